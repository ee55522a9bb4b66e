//! Small helpers for reading labeled-line model replies.

/// Value of the first `label:` line (case-insensitive), trimmed.
pub fn labeled<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().find_map(|l| field(l, label))
}

/// `label: value` on one line, case-insensitive label, optional leading
/// list markers.
pub fn field<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let l = line.trim().trim_start_matches(['-', '*', ' ']);
    let (k, v) = l.split_once(':')?;
    k.trim().eq_ignore_ascii_case(label).then(|| v.trim())
}

/// Splits on `sep`, trims, drops empties and a literal `none`.
pub fn list(value: &str, sep: char) -> Vec<String> {
    value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("none"))
        .map(str::to_string)
        .collect()
}

pub fn is_none_reply(text: &str) -> bool {
    let t = text.trim().trim_end_matches('.');
    t.eq_ignore_ascii_case("none")
}

/// Blocks separated by blank lines.
pub fn blocks(text: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for l in text.lines() {
        if l.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(l);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Removes a surrounding Markdown code fence if present.
pub fn strip_fence(text: &str) -> String {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map(|(_, b)| b).unwrap_or("");
        let body = body.trim_end();
        return body.strip_suffix("```").unwrap_or(body).trim_end().to_string() + "\n";
    }
    let mut s = t.to_string();
    s.push('\n');
    s
}

/// Rough token count used for context-window checks.
pub fn token_estimate(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercase words joined by single spaces.
pub fn normalize_phrase(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(labeled("x\nMode: task\nmode: other", "mode"), Some("task"));
        assert_eq!(field("- category: bug_validation", "category"), Some("bug_validation"));
        assert_eq!(list("a; b;;none", ';'), ["a", "b"]);
        assert!(is_none_reply(" None.\n"));
    }

    #[test]
    fn fences_and_blocks() {
        assert_eq!(strip_fence("```verilog\nmodule m;\nendmodule\n```"), "module m;\nendmodule\n");
        assert_eq!(blocks("a\nb\n\n\nc\n").len(), 2);
        assert_eq!(normalize_phrase("Improper  Access-Control!"), "improper access control");
    }
}
