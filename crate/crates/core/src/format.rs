//! Locale-independent number formatting for CSV artifacts.

/// Significant digits used in every numeric artifact.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `v` rounded to [`SIGNIFICANT_DIGITS`] significant digits, using the
/// shortest decimal that round-trips the rounded value.
///
/// Magnitudes outside `[1e-4, 1e12)` are written in exponent form.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses");
    let mag = rounded.abs();
    if (1e-4..1e12).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}
