//! Property tests for the spec-level invariants: retrieval ranking,
//! tokenizer idempotence, DSL round-trip stability, executor totality, and
//! metric oracle agreement.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use claimcheck_core::atomic::AtomicFunctions;
use claimcheck_core::bootstrap::bootstrap_candidates;
use claimcheck_core::corpus::{recall_at_k, tokenize, Document, Index, RetrievalConfig};
use claimcheck_core::dsl::{parse, pretty_print, validate, Ast, BoolOpKind, Expr, FmtPart, Statement, StatementKind};
use claimcheck_core::eval::{balanced_accuracy, macro_f1};
use claimcheck_core::executor::{execute, AtomicFn, TraceOutput};
use claimcheck_core::gateway::{Gateway, ModelRole, ScriptedBackend};
use claimcheck_core::strategy::{initial_strategy, render_prompt, PromptVariant};

use common::{bm25_oracle, oracle_bacc, oracle_macro_f1, WORDS};

// ── Generators ──────────────────────────────────────────────────────

const RESERVED: [&str; 31] = [
    "and", "or", "not", "f", "for", "while", "if", "elif", "else", "import", "from", "def",
    "class", "return", "lambda", "in", "is", "pass", "break", "continue", "with", "try", "except",
    "finally", "raise", "global", "nonlocal", "assert", "yield", "del", "None",
];

fn arb_ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_filter("not a keyword", |s| !RESERVED.contains(&s.as_str()))
}

fn arb_text() -> impl Strategy<Value = String> {
    // Includes characters the printer must escape.
    prop::collection::vec(
        prop_oneof![
            prop::char::range('a', 'z').prop_map(|c| c.to_string()),
            Just(" ".to_string()),
            Just("\"".to_string()),
            Just("'".to_string()),
            Just("\\".to_string()),
            Just("\n".to_string()),
            Just("\t".to_string()),
            Just("{".to_string()),
            Just("}".to_string()),
            Just("é".to_string()),
        ],
        0..12,
    )
    .prop_map(|parts| parts.concat())
}

fn arb_fmt_parts() -> impl Strategy<Value = Vec<FmtPart>> {
    prop::collection::vec(
        prop_oneof![
            arb_text()
                .prop_filter("literal parts are non-empty", |t| !t.is_empty())
                .prop_map(FmtPart::Lit),
            arb_ident().prop_map(FmtPart::Var),
        ],
        0..4,
    )
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        arb_ident().prop_map(Expr::Var),
        arb_text().prop_map(Expr::StrLit),
        any::<bool>().prop_map(Expr::BoolLit),
        arb_fmt_parts().prop_map(Expr::FmtStr),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (
                prop_oneof![
                    Just("retrieve".to_string()),
                    Just("question".to_string()),
                    Just("verify".to_string()),
                    arb_ident(),
                ],
                prop::collection::vec(inner.clone(), 0..3)
            )
                .prop_map(|(name, args)| Expr::Call { name, args }),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Concat),
            (any::<bool>(), prop::collection::vec(inner.clone(), 2..4)).prop_map(|(and, operands)| {
                Expr::BoolOp {
                    op: if and { BoolOpKind::And } else { BoolOpKind::Or },
                    operands,
                }
            }),
            inner.prop_map(|e| Expr::Not(Box::new(e))),
        ]
    })
}

fn arb_comment() -> impl Strategy<Value = String> {
    "[ a-z0-9.,!?]{0,20}"
}

fn arb_statement() -> impl Strategy<Value = StatementKind> {
    prop_oneof![
        arb_comment().prop_map(StatementKind::Comment),
        (arb_ident(), arb_expr(), prop::option::of(arb_comment())).prop_map(
            |(name, value, trailing_comment)| StatementKind::Assign {
                name,
                value,
                trailing_comment,
            }
        ),
        (arb_expr(), prop::option::of(arb_comment())).prop_map(|(value, trailing_comment)| {
            StatementKind::ExprStmt {
                value,
                trailing_comment,
            }
        }),
    ]
}

fn arb_ast() -> impl Strategy<Value = Ast> {
    prop::collection::vec(arb_statement(), 0..8).prop_map(|kinds| Ast {
        statements: kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| Statement { line: i + 1, kind })
            .collect(),
    })
}

// ── DSL round-trip ──────────────────────────────────────────────────

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Printing any tree, parsing it back, and printing again is a fixed
    /// point at both the string and the AST level.
    #[test]
    fn print_parse_print_fixed_point(ast in arb_ast()) {
        let once = pretty_print(&ast);
        let reparsed = parse(&once).expect("printer output must parse");
        let twice = pretty_print(&reparsed);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(parse(&twice).unwrap(), reparsed);
    }
}

// ── Executor totality on validated programs ─────────────────────────

/// Builds a program that is well formed by construction: every variable is
/// assigned before use at the right type and `final_prediction` ends it.
fn materialize_program(ops: &[(u8, u16)]) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut strings: Vec<String> = Vec::new();
    let mut bools: Vec<String> = Vec::new();
    let mut counter = 0usize;
    let mut fresh = |prefix: &str, counter: &mut usize| {
        *counter += 1;
        format!("{prefix}{counter}")
    };
    for &(op, r) in ops {
        match op % 5 {
            0 => {
                let var = fresh("e", &mut counter);
                lines.push(format!("{var} = retrieve(\"topic {r} words\")"));
                strings.push(var);
            }
            1 => {
                let evidence = strings
                    .get(r as usize % strings.len().max(1))
                    .map(|v| v.clone())
                    .unwrap_or_else(|| "\"static evidence\"".into());
                let var = fresh("a", &mut counter);
                lines.push(format!("{var} = question(\"who {r}\", {evidence})"));
                strings.push(var);
            }
            2 => {
                let evidence = strings
                    .get(r as usize % strings.len().max(1))
                    .map(|v| v.clone())
                    .unwrap_or_else(|| "\"static evidence\"".into());
                let var = fresh("v", &mut counter);
                lines.push(format!("{var} = verify(\"claim {r}\", {evidence})"));
                bools.push(var);
            }
            3 => {
                if strings.len() >= 2 {
                    let a = &strings[r as usize % strings.len()];
                    let b = &strings[(r as usize / 7) % strings.len()];
                    let var = fresh("c", &mut counter);
                    lines.push(format!("{var} = {a} + \"\\n\" + {b}"));
                    strings.push(var);
                }
            }
            _ => {
                if bools.len() >= 2 {
                    let a = &bools[r as usize % bools.len()];
                    let b = &bools[(r as usize / 5) % bools.len()];
                    let var = fresh("b", &mut counter);
                    let op = if r % 3 == 0 { "and" } else { "or" };
                    let neg = if r % 2 == 0 { "not " } else { "" };
                    lines.push(format!("{var} = {neg}{a} {op} {b}"));
                    bools.push(var);
                }
            }
        }
    }
    match bools.last() {
        Some(last) => lines.push(format!("final_prediction = {last}")),
        None => lines.push("final_prediction = verify(\"seed claim\", \"seed evidence\")".into()),
    }
    lines.join("\n")
}

fn small_index() -> Index {
    Index::build(
        vec![
            Document {
                doc_id: "w1".into(),
                title: "topic".into(),
                text: "topic words appear here".into(),
            },
            Document {
                doc_id: "w2".into(),
                title: "other".into(),
                text: "unrelated body".into(),
            },
        ],
        RetrievalConfig::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Every program accepted by `validate` executes without unbound
    /// variables or unknown functions, whatever the scripted model says.
    #[test]
    fn validated_programs_execute_totally(
        ops in prop::collection::vec((any::<u8>(), any::<u16>()), 1..10),
        backend_mode in 0u8..4,
    ) {
        let code = materialize_program(&ops);
        let ast = parse(&code).expect("constructed programs parse");
        let report = validate(&ast);
        prop_assert!(report.ok, "constructed program failed validation: {:?}\n{code}", report.violations);

        let fallback = match backend_mode {
            0 => "Reasoning: r\nVerification Result: True",
            1 => "Reasoning: r\nVerification Result: False",
            2 => "complete garbage with no markers",
            _ => "Answer: some answer text",
        };
        let index = small_index();
        let gateway = Gateway::scripted(ScriptedBackend::new(fallback));
        let atomics = AtomicFunctions::new(&index, &gateway);
        let trace = execute(&ast, &atomics).unwrap();
        if let Some(failure) = &trace.failure {
            prop_assert!(
                !failure.reason.contains("unbound variable"),
                "unbound variable slipped through validation: {code}"
            );
            prop_assert!(
                !failure.reason.contains("unknown function"),
                "unknown function slipped through validation: {code}"
            );
        } else {
            prop_assert!(trace.final_prediction.is_some());
        }
        // Queries built here never tokenize to nothing, so execution must
        // in fact complete.
        prop_assert!(trace.final_prediction.is_some());
    }

    /// Replaying each trace entry's recorded inputs through the same
    /// scripted backend reproduces the recorded outputs byte for byte.
    #[test]
    fn trace_replay_reproduces_outputs(
        ops in prop::collection::vec((any::<u8>(), any::<u16>()), 1..8),
        verdict_true in any::<bool>(),
    ) {
        let code = materialize_program(&ops);
        let ast = parse(&code).unwrap();
        let fallback = if verdict_true {
            "Reasoning: replay.\nVerification Result: True"
        } else {
            "Reasoning: replay.\nVerification Result: False"
        };
        let index = small_index();
        let gateway = Gateway::scripted(ScriptedBackend::new(fallback).rule("Answer:", "Answer: replayed"));
        let atomics = AtomicFunctions::new(&index, &gateway);
        let trace = execute(&ast, &atomics).unwrap();
        for entry in &trace.entries {
            match entry.function {
                AtomicFn::Retrieve => {
                    let blob = atomics.retrieve(&entry.inputs[0]).unwrap();
                    prop_assert_eq!(&entry.output, &TraceOutput::Text(blob.text));
                }
                AtomicFn::Question => {
                    let blob = claimcheck_core::atomic::EvidenceBlob { text: entry.inputs[1].clone() };
                    let answer = atomics.question(&entry.inputs[0], &blob).unwrap();
                    prop_assert_eq!(&entry.output, &TraceOutput::Text(answer));
                }
                AtomicFn::Verify => {
                    let blob = claimcheck_core::atomic::EvidenceBlob { text: entry.inputs[1].clone() };
                    let verdict = atomics.verify(&entry.inputs[0], &blob).unwrap();
                    prop_assert_eq!(&entry.output, &TraceOutput::Bool(verdict.label));
                    prop_assert_eq!(entry.rationale.clone().unwrap(), verdict.rationale);
                }
            }
        }
    }
}

// ── Retrieval properties ────────────────────────────────────────────

fn arb_corpus() -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec(
        prop::collection::vec(0..WORDS.len(), 2..12),
        2..25,
    )
    .prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, word_ids)| Document {
                doc_id: format!("doc{i:02}"),
                title: String::new(),
                text: word_ids.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" "),
            })
            .collect()
    })
}

fn arb_query() -> impl Strategy<Value = String> {
    prop::collection::vec(0..WORDS.len(), 1..4)
        .prop_map(|ids| ids.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tokenize_is_idempotent_on_joined_output(s in "\\PC{0,40}") {
        let tokens = tokenize(&s);
        prop_assert_eq!(tokenize(&tokens.join(" ")), tokens);
    }

    /// For every k, the top-k result is a prefix of the full ranking.
    #[test]
    fn topk_is_prefix_of_full_ranking(docs in arb_corpus(), query in arb_query(), k in 1usize..10) {
        let n = docs.len();
        let index = Index::build(docs, RetrievalConfig::default()).unwrap();
        let full = index.retrieve_topk(&query, n).unwrap();
        let topk = index.retrieve_topk(&query, k).unwrap();
        prop_assert_eq!(&topk[..], &full[..k.min(full.len())]);
    }

    /// Adding a document sharing no query terms may shift scores only
    /// through avgdl/df; the implementation must still agree with a full
    /// oracle re-scoring of the grown corpus.
    #[test]
    fn irrelevant_document_only_shifts_normalization(
        docs in arb_corpus(),
        query in arb_query(),
    ) {
        let mut grown = docs.clone();
        grown.push(Document {
            doc_id: "zzz-extra".into(),
            title: String::new(),
            // Vocabulary disjoint from WORDS.
            text: "qqqq wwww zzzz xxxx".into(),
        });
        let config = RetrievalConfig::default();
        let index = Index::build(grown.clone(), config.clone()).unwrap();
        let hits = index.retrieve_topk(&query, grown.len()).unwrap();
        let oracle = bm25_oracle(&grown, true, &query, config.k1, config.b);
        prop_assert_eq!(hits.len(), oracle.len());
        for (hit, (oracle_id, oracle_score)) in hits.iter().zip(&oracle) {
            prop_assert_eq!(&hit.doc_id, oracle_id);
            prop_assert!((hit.score - oracle_score).abs() < 1e-9);
        }
        prop_assert!(!hits.iter().any(|h| h.doc_id == "zzz-extra"));
    }

    #[test]
    fn recall_monotone_for_nested_retrieved_sets(
        ranked in prop::collection::vec(0..30u8, 1..15),
        gold in prop::collection::btree_set(0..30u8, 1..6),
    ) {
        let gold: BTreeSet<String> = gold.iter().map(|g| g.to_string()).collect();
        let mut previous = 0.0;
        for k in 1..=ranked.len() {
            let retrieved: BTreeSet<String> = ranked[..k].iter().map(|r| r.to_string()).collect();
            let r = recall_at_k(&retrieved, &gold).unwrap();
            prop_assert!(r >= previous);
            previous = r;
        }
    }
}

// ── Gateway and prompt properties ───────────────────────────────────

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The scripted backend is a pure function of (role, prompt).
    #[test]
    fn scripted_backend_is_pure(
        needles in prop::collection::vec("[a-z]{1,6}", 0..4),
        prompt in "[ a-z]{0,40}",
        role_pick in 0u8..3,
    ) {
        let mut backend = ScriptedBackend::new("fallback");
        for (i, needle) in needles.iter().enumerate() {
            backend = backend.rule(needle.clone(), format!("response {i}"));
        }
        let role = ModelRole::ALL[role_pick as usize];
        let first = backend.respond(role, &prompt);
        let second = backend.respond(role, &prompt);
        prop_assert_eq!(first, second);
    }

    /// Distinct claims always produce distinct rendered prompts.
    #[test]
    fn prompt_rendering_is_injective_on_claims(a in "[a-z]{1,20}", b in "[a-z]{1,20}") {
        prop_assume!(a != b);
        let strategy = initial_strategy();
        let pa = render_prompt(&strategy, PromptVariant::Zs, &a).unwrap();
        let pb = render_prompt(&strategy, PromptVariant::Zs, &b).unwrap();
        prop_assert_ne!(pa, pb);
    }
}

// ── Metric oracle agreement ─────────────────────────────────────────

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_agree_with_independent_oracle(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..=20),
    ) {
        let preds: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let golds: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(macro_f1(&preds, &golds).unwrap(), oracle_macro_f1(&preds, &golds));
        match oracle_bacc(&preds, &golds) {
            Some(expected) => prop_assert_eq!(balanced_accuracy(&preds, &golds).unwrap(), expected),
            None => prop_assert!(balanced_accuracy(&preds, &golds).is_err()),
        }
    }
}

// ── Bootstrap sampling ──────────────────────────────────────────────

/// Within-set uniqueness of bootstrapped candidate sets over 1000 seeds.
#[test]
fn candidate_sets_unique_within_across_seeds() {
    use rand::SeedableRng;

    let pool: Vec<claimcheck_core::bootstrap::AnnotatedClaim> = (0..12)
        .map(|i| claimcheck_core::bootstrap::AnnotatedClaim {
            claim: format!("claim {i}"),
            label: i % 2 == 0,
            gold_evidence: vec![],
        })
        .collect();
    for seed in 0..1000u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sets = bootstrap_candidates(&pool, 3, 5, &mut rng).unwrap();
        for set in sets {
            let unique: BTreeSet<&str> = set.iter().map(|c| c.claim.as_str()).collect();
            assert_eq!(unique.len(), 5, "duplicate claim within a set at seed {seed}");
        }
    }
}
