//! Placeholder substitution for prompt templates.

/// Replaces `{name}` occurrences of the given names in a single pass over
/// the template. Substituted values are never rescanned, so a value may
/// itself contain placeholder-shaped text verbatim. Braces that do not open
/// a known placeholder pass through untouched.
pub(crate) fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut pos = 0;
    'scan: while pos < bytes.len() {
        if bytes[pos] == b'{' {
            for (name, value) in vars {
                let end = pos + 1 + name.len();
                if end < bytes.len()
                    && &bytes[pos + 1..end] == name.as_bytes()
                    && bytes[end] == b'}'
                {
                    out.push_str(value);
                    pos = end + 1;
                    continue 'scan;
                }
            }
        }
        // Advance one UTF-8 character.
        let step = utf8_len(bytes[pos]);
        out.push_str(&template[pos..pos + step]);
        pos += step;
    }
    out
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >= 0xF0 => 4,
        b if b >= 0xE0 => 3,
        _ => 2,
    }
}
