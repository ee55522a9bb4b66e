use std::sync::OnceLock;

use regex::Regex;

/// Confidence assigned when a reply carries no explicit marker.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bconfidence\s*[:=]\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+))").expect("static regex"))
}

/// Reads the first `confidence: X` marker in a reply, clamped to `[0, 1]`.
/// Falls back to [`DEFAULT_CONFIDENCE`].
pub fn estimate_confidence(response_text: &str) -> f64 {
    marker()
        .captures(response_text)
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .map(|v| v.clamp(0.0, 1.0))
        .unwrap_or(DEFAULT_CONFIDENCE)
}
