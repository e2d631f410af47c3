//! Executes validated reasoning programs against the atomic functions,
//! recording an execution trace.
//!
//! Every atomic call appends one trace entry; boolean operators evaluate all
//! operands left to right with no short-circuiting, so the trace always
//! shows every verification step. When generation, parsing, validation, or
//! execution fails, [`run_claim`] falls back to retrieve-then-verify on the
//! raw claim so a claim always gets a boolean label. Transport failures are
//! the one class of error that propagates instead.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::atomic::{AtomicError, AtomicFunctions};
use crate::corpus::CorpusError;
use crate::dsl::{
    extract_program, validate, Ast, BoolOpKind, Expr, FmtPart, ProgramSource, StatementKind,
};
use crate::gateway::{CompletionRequest, GatewayError, ModelRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicFn {
    Retrieve,
    Question,
    Verify,
}

/// A call's output: evidence/answer text, or a verification label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceOutput {
    Bool(bool),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based position in the trace.
    pub step: usize,
    #[serde(rename = "fn")]
    pub function: AtomicFn,
    /// Fully resolved argument strings, in call order.
    pub inputs: Vec<String>,
    pub output: TraceOutput,
    /// Chain-of-thought text; present iff the call is a verify whose verdict
    /// parsed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rationale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anomaly: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Extract,
    Parse,
    Validate,
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: FailureStage,
    pub reason: String,
}

/// Ordered record of a program run. Exactly one of `final_prediction` and
/// `failure` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub entries: Vec<TraceEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_prediction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<Failure>,
}

impl ExecutionTrace {
    fn failed(entries: Vec<TraceEntry>, stage: FailureStage, reason: impl Into<String>) -> Self {
        Self {
            entries,
            final_prediction: None,
            failure: Some(Failure {
                stage,
                reason: reason.into(),
            }),
        }
    }

    /// JSON rendering with stable key order, used for trace files and for
    /// the critique prompt's trace field.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Result of running one claim end to end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimRun {
    pub prediction: bool,
    pub program: ProgramSource,
    pub trace: ExecutionTrace,
    /// Present iff the program attempt failed and the fallback produced the
    /// prediction. Always exactly two entries: retrieve then verify.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback_trace: Option<ExecutionTrace>,
    /// Union of document ids hit by every retrieve call, fallback included.
    pub retrieved_doc_ids: BTreeSet<String>,
}

impl ClaimRun {
    pub fn used_fallback(&self) -> bool {
        self.fallback_trace.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Bool(bool),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
        }
    }
}

/// Aborts of a single program run: either the program misbehaved (recorded
/// in the trace) or the transport failed (propagated).
enum Interrupt {
    Program(String),
    Transport(GatewayError),
}

fn program_fault(err: AtomicError) -> Interrupt {
    match err {
        AtomicError::Retrieval(CorpusError::EmptyQuery) => {
            Interrupt::Program("retrieve: query tokenizes to nothing".into())
        }
        AtomicError::Retrieval(other) => Interrupt::Program(format!("retrieve: {other}")),
        AtomicError::Gateway(err) => Interrupt::Transport(err),
        AtomicError::UnparseableVerdict { .. } => {
            unreachable!("verify call sites coerce unparseable verdicts")
        }
    }
}

struct Interpreter<'a> {
    atomics: &'a AtomicFunctions<'a>,
    env: BTreeMap<String, Value>,
    entries: Vec<TraceEntry>,
    retrieved: BTreeSet<String>,
}

impl Interpreter<'_> {
    fn push_entry(
        &mut self,
        function: AtomicFn,
        inputs: Vec<String>,
        output: TraceOutput,
        rationale: Option<String>,
        anomaly: Option<String>,
    ) {
        self.entries.push(TraceEntry {
            step: self.entries.len() + 1,
            function,
            inputs,
            output,
            rationale,
            anomaly,
        });
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, Interrupt> {
        match expr {
            Expr::StrLit(value) => Ok(Value::Str(value.clone())),
            Expr::BoolLit(value) => Ok(Value::Bool(*value)),
            Expr::Var(name) => self.env.get(name).cloned().ok_or_else(|| {
                Interrupt::Program(format!("unbound variable `{name}`"))
            }),
            Expr::FmtStr(parts) => {
                let mut text = String::new();
                for part in parts {
                    match part {
                        FmtPart::Lit(lit) => text.push_str(lit),
                        FmtPart::Var(name) => match self.env.get(name) {
                            Some(Value::Str(s)) => text.push_str(s),
                            Some(Value::Bool(_)) => {
                                return Err(Interrupt::Program(format!(
                                    "type mismatch: f-string interpolates boolean variable `{name}`"
                                )))
                            }
                            None => {
                                return Err(Interrupt::Program(format!(
                                    "unbound variable `{name}`"
                                )))
                            }
                        },
                    }
                }
                Ok(Value::Str(text))
            }
            Expr::Concat(operands) => {
                let mut text = String::new();
                for operand in operands {
                    match self.eval(operand)? {
                        Value::Str(s) => text.push_str(&s),
                        Value::Bool(_) => {
                            return Err(Interrupt::Program(
                                "type mismatch: `+` concatenation requires string operands".into(),
                            ))
                        }
                    }
                }
                Ok(Value::Str(text))
            }
            Expr::BoolOp { op, operands } => {
                // All operands are evaluated, left to right; the trace must
                // show every verification step.
                let mut values = Vec::with_capacity(operands.len());
                for operand in operands {
                    match self.eval(operand)? {
                        Value::Bool(b) => values.push(b),
                        Value::Str(_) => {
                            return Err(Interrupt::Program(format!(
                                "type mismatch: `{}` requires boolean operands",
                                op.keyword()
                            )))
                        }
                    }
                }
                let folded = match op {
                    BoolOpKind::And => values.into_iter().all(|b| b),
                    BoolOpKind::Or => values.into_iter().any(|b| b),
                };
                Ok(Value::Bool(folded))
            }
            Expr::Not(inner) => match self.eval(inner)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                Value::Str(_) => Err(Interrupt::Program(
                    "type mismatch: `not` requires a boolean operand".into(),
                )),
            },
            Expr::Call { name, args } => self.call(name, args),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Result<Value, Interrupt> {
        let mut resolved = Vec::with_capacity(args.len());
        for arg in args {
            match self.eval(arg)? {
                Value::Str(s) => resolved.push(s),
                Value::Bool(_) => {
                    return Err(Interrupt::Program(format!(
                        "type mismatch: `{name}` takes string arguments"
                    )))
                }
            }
        }
        match name {
            "retrieve" => {
                let [query] = resolved.as_slice() else {
                    return Err(Interrupt::Program(format!(
                        "`retrieve` takes 1 argument, found {}",
                        resolved.len()
                    )));
                };
                let (blob, hits) = self
                    .atomics
                    .retrieve_with_hits(query)
                    .map_err(program_fault)?;
                self.retrieved.extend(hits.into_iter().map(|h| h.doc_id));
                self.push_entry(
                    AtomicFn::Retrieve,
                    resolved,
                    TraceOutput::Text(blob.text.clone()),
                    None,
                    None,
                );
                Ok(Value::Str(blob.text))
            }
            "question" => {
                let [q, e] = resolved.as_slice() else {
                    return Err(Interrupt::Program(format!(
                        "`question` takes 2 arguments, found {}",
                        resolved.len()
                    )));
                };
                let answer = self
                    .atomics
                    .question(q, &crate::atomic::EvidenceBlob { text: e.clone() })
                    .map_err(program_fault)?;
                self.push_entry(
                    AtomicFn::Question,
                    resolved,
                    TraceOutput::Text(answer.clone()),
                    None,
                    None,
                );
                Ok(Value::Str(answer))
            }
            "verify" => {
                let [c, e] = resolved.as_slice() else {
                    return Err(Interrupt::Program(format!(
                        "`verify` takes 2 arguments, found {}",
                        resolved.len()
                    )));
                };
                let blob = crate::atomic::EvidenceBlob { text: e.clone() };
                match self.atomics.verify(c, &blob) {
                    Ok(verdict) => {
                        self.push_entry(
                            AtomicFn::Verify,
                            resolved,
                            TraceOutput::Bool(verdict.label),
                            Some(verdict.rationale),
                            None,
                        );
                        Ok(Value::Bool(verdict.label))
                    }
                    Err(AtomicError::UnparseableVerdict { .. }) => {
                        // Unconfirmable claims count as False; flag the entry.
                        self.push_entry(
                            AtomicFn::Verify,
                            resolved,
                            TraceOutput::Bool(false),
                            None,
                            Some("unparseable verdict; defaulted to False".into()),
                        );
                        Ok(Value::Bool(false))
                    }
                    Err(other) => Err(program_fault(other)),
                }
            }
            other => Err(Interrupt::Program(format!("unknown function `{other}`"))),
        }
    }

    fn run(mut self, ast: &Ast) -> Result<(ExecutionTrace, BTreeSet<String>), GatewayError> {
        for statement in &ast.statements {
            let result = match &statement.kind {
                StatementKind::Comment(_) => continue,
                StatementKind::Assign { name, value, .. } => {
                    self.eval(value).and_then(|v| {
                        if let Some(prev) = self.env.get(name) {
                            if prev.type_name() != v.type_name() {
                                return Err(Interrupt::Program(format!(
                                    "type mismatch: variable `{name}` changes type from {} to {}",
                                    prev.type_name(),
                                    v.type_name()
                                )));
                            }
                        }
                        self.env.insert(name.clone(), v);
                        Ok(())
                    })
                }
                StatementKind::ExprStmt { value, .. } => self.eval(value).map(|_| ()),
            };
            match result {
                Ok(()) => {}
                Err(Interrupt::Program(reason)) => {
                    return Ok((
                        ExecutionTrace::failed(self.entries, FailureStage::Run, reason),
                        self.retrieved,
                    ))
                }
                Err(Interrupt::Transport(err)) => return Err(err),
            }
        }
        let trace = match self.env.get(crate::dsl::FINAL_PREDICTION) {
            Some(Value::Bool(b)) => ExecutionTrace {
                entries: self.entries,
                final_prediction: Some(*b),
                failure: None,
            },
            Some(Value::Str(_)) => ExecutionTrace::failed(
                self.entries,
                FailureStage::Run,
                "type mismatch: `final_prediction` is not boolean",
            ),
            None => ExecutionTrace::failed(
                self.entries,
                FailureStage::Run,
                "`final_prediction` was never assigned",
            ),
        };
        Ok((trace, self.retrieved))
    }
}

fn fresh_interpreter<'a>(atomics: &'a AtomicFunctions<'a>) -> Interpreter<'a> {
    Interpreter {
        atomics,
        env: BTreeMap::new(),
        entries: Vec::new(),
        retrieved: BTreeSet::new(),
    }
}

/// Runs a program. Program-level faults (bad types, unbound names, empty
/// queries) land in `trace.failure`; only transport failures are `Err`.
///
/// The caller is expected to have validated the AST; execution still checks
/// everything defensively at run time.
pub fn execute(
    ast: &Ast,
    atomics: &AtomicFunctions<'_>,
) -> Result<ExecutionTrace, GatewayError> {
    execute_collecting(ast, atomics).map(|(trace, _)| trace)
}

pub(crate) fn execute_collecting(
    ast: &Ast,
    atomics: &AtomicFunctions<'_>,
) -> Result<(ExecutionTrace, BTreeSet<String>), GatewayError> {
    fresh_interpreter(atomics).run(ast)
}

/// Direct retrieve-then-verify on the raw claim; the safety net behind
/// program failures. Never fails short of transport errors: a claim that
/// tokenizes to nothing just verifies against empty evidence.
pub fn fallback_verify(
    claim: &str,
    atomics: &AtomicFunctions<'_>,
) -> Result<bool, GatewayError> {
    fallback_run(claim, atomics).map(|(label, _, _)| label)
}

fn fallback_run(
    claim: &str,
    atomics: &AtomicFunctions<'_>,
) -> Result<(bool, ExecutionTrace, BTreeSet<String>), GatewayError> {
    let mut entries = Vec::new();
    let mut retrieved = BTreeSet::new();

    let blob = match atomics.retrieve_with_hits(claim) {
        Ok((blob, hits)) => {
            retrieved.extend(hits.into_iter().map(|h| h.doc_id));
            blob
        }
        Err(AtomicError::Retrieval(CorpusError::EmptyQuery)) => crate::atomic::EvidenceBlob::default(),
        Err(AtomicError::Gateway(err)) => return Err(err),
        Err(AtomicError::Retrieval(other)) => {
            // Index-level problems degrade to empty evidence rather than
            // aborting the claim.
            let _ = other;
            crate::atomic::EvidenceBlob::default()
        }
        Err(AtomicError::UnparseableVerdict { .. }) => unreachable!("retrieve cannot emit verdicts"),
    };
    entries.push(TraceEntry {
        step: 1,
        function: AtomicFn::Retrieve,
        inputs: vec![claim.to_string()],
        output: TraceOutput::Text(blob.text.clone()),
        rationale: None,
        anomaly: None,
    });

    let (label, rationale, anomaly) = match atomics.verify(claim, &blob) {
        Ok(verdict) => (verdict.label, Some(verdict.rationale), None),
        Err(AtomicError::UnparseableVerdict { .. }) => (
            false,
            None,
            Some("unparseable verdict; defaulted to False".to_string()),
        ),
        Err(AtomicError::Gateway(err)) => return Err(err),
        Err(AtomicError::Retrieval(_)) => unreachable!("verify does not retrieve"),
    };
    entries.push(TraceEntry {
        step: 2,
        function: AtomicFn::Verify,
        inputs: vec![claim.to_string(), blob.text],
        output: TraceOutput::Bool(label),
        rationale,
        anomaly,
    });

    let trace = ExecutionTrace {
        entries,
        final_prediction: Some(label),
        failure: None,
    };
    Ok((label, trace, retrieved))
}

/// Full single-claim pipeline: prompt the generator once, extract, parse,
/// validate, execute; fall back to [`fallback_verify`] when any stage fails.
/// Always yields a boolean prediction.
pub fn run_claim(
    claim: &str,
    prompt: &str,
    atomics: &AtomicFunctions<'_>,
) -> Result<ClaimRun, GatewayError> {
    let output = atomics
        .gateway()
        .complete(&CompletionRequest::new(ModelRole::Generator, prompt))?;
    let program = extract_program(&output);

    let (trace, retrieved) = match program.parse() {
        Err(err) => (
            ExecutionTrace::failed(Vec::new(), FailureStage::Parse, err.to_string()),
            BTreeSet::new(),
        ),
        Ok(ast) => {
            let report = validate(&ast);
            if report.ok {
                execute_collecting(&ast, atomics)?
            } else {
                let summary = report
                    .violations
                    .iter()
                    .map(|v| format!("{} (line {}): {}", v.rule, v.line, v.message))
                    .collect::<Vec<_>>()
                    .join("; ");
                (
                    ExecutionTrace::failed(Vec::new(), FailureStage::Validate, summary),
                    BTreeSet::new(),
                )
            }
        }
    };

    match trace.final_prediction {
        Some(prediction) => Ok(ClaimRun {
            prediction,
            program,
            trace,
            fallback_trace: None,
            retrieved_doc_ids: retrieved,
        }),
        None => {
            let (prediction, fallback, fallback_retrieved) = fallback_run(claim, atomics)?;
            let mut retrieved = retrieved;
            retrieved.extend(fallback_retrieved);
            Ok(ClaimRun {
                prediction,
                program,
                trace,
                fallback_trace: Some(fallback),
                retrieved_doc_ids: retrieved,
            })
        }
    }
}
