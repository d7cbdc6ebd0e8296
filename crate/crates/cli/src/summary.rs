//! `summary.csv` rows and the text report rendered from them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use holder_hj::fmt_sig;

/// One line of `summary.csv`: `check,expected,measured,tolerance,pass`.
///
/// `expected` and `tolerance` are written as given, so they can hold bounds
/// such as `<=1.175` or words such as `increasing`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub check: String,
    pub expected: String,
    pub measured: String,
    pub tolerance: String,
    pub pass: bool,
}

impl SummaryRow {
    pub fn new(check: &str, expected: &str, measured: f64, tolerance: &str, pass: bool) -> Self {
        Self::text(check, expected, &fmt_sig(measured), tolerance, pass)
    }

    pub fn text(check: &str, expected: &str, measured: &str, tolerance: &str, pass: bool) -> Self {
        Self {
            check: check.into(),
            expected: expected.into(),
            measured: measured.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }

    /// `|measured − expected| ≤ tol`.
    pub fn close(check: &str, expected: f64, measured: f64, tol: f64, tol_text: &str) -> Self {
        let pass = (measured - expected).abs() <= tol;
        Self::text(check, &fmt_expected(expected), &fmt_sig(measured), tol_text, pass)
    }

    /// `measured ≤ bound`.
    pub fn at_most(check: &str, bound: f64, measured: f64) -> Self {
        Self::text(check, &format!("<={}", fmt_sig(bound)), &fmt_sig(measured), "0", measured <= bound)
    }

    /// `measured ≥ bound`.
    pub fn at_least(check: &str, bound: f64, measured: f64) -> Self {
        Self::text(check, &format!(">={}", fmt_sig(bound)), &fmt_sig(measured), "0", measured >= bound)
    }
}

/// Integral expectations keep a trailing `.0`.
fn fmt_expected(v: f64) -> String {
    let s = fmt_sig(v);
    if v.is_finite() && v.fract() == 0.0 && !s.contains('e') {
        format!("{s}.0")
    } else {
        s
    }
}

pub const SUMMARY_HEADER: &str = "check,expected,measured,tolerance,pass";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.check,
            r.expected,
            r.measured,
            r.tolerance,
            if r.pass { "pass" } else { "fail" }
        );
    }
    s
}

#[derive(Debug)]
pub struct ReportError(pub String);

impl std::fmt::Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ReportError {}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>, ReportError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SUMMARY_HEADER) => {}
        Some(other) => return Err(ReportError(format!("summary.csv: unexpected header `{other}`"))),
        None => return Err(ReportError("summary.csv: empty file".into())),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 || !(f[4] == "pass" || f[4] == "fail") {
                return Err(ReportError(format!("summary.csv line {}: malformed row `{l}`", i + 2)));
            }
            Ok(SummaryRow::text(f[0], f[1], f[2], f[3], f[4] == "pass"))
        })
        .collect()
}

/// Plain-text rendering of a summary. Criterion rows (`A1`, `A2`, …) are
/// listed first.
pub fn render_report(rows: &[SummaryRow]) -> String {
    let is_criterion = |r: &&SummaryRow| {
        r.check.len() >= 2 && r.check.starts_with('A') && r.check[1..].chars().all(|c| c.is_ascii_digit())
    };
    let failed = rows.iter().filter(|r| !r.pass).count();
    let mut s = String::new();
    let _ = writeln!(s, "holder-hj report");
    let _ = writeln!(s, "checks: {}  passed: {}  failed: {}", rows.len(), rows.len() - failed, failed);
    let criteria: Vec<&SummaryRow> = rows.iter().filter(is_criterion).collect();
    if !criteria.is_empty() {
        let _ = writeln!(s, "\nacceptance criteria");
        for r in &criteria {
            let _ = writeln!(s, "  {:<4} {}  {}", r.check, verdict(r), r.measured);
        }
    }
    let details: Vec<&SummaryRow> = rows.iter().filter(|r| !is_criterion(r)).collect();
    if !details.is_empty() {
        let _ = writeln!(s, "\nchecks");
        let width = details.iter().map(|r| r.check.len()).max().unwrap_or(0);
        for r in details {
            let _ = writeln!(
                s,
                "  {:<width$}  {}  measured {}  expected {}  tolerance {}",
                r.check,
                verdict(r),
                r.measured,
                r.expected,
                r.tolerance
            );
        }
    }
    s
}

fn verdict(r: &SummaryRow) -> &'static str {
    if r.pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Reads `summary.csv` from `dir`, writes `report.txt` next to it and returns
/// the text.
pub fn emit_report(dir: &Path) -> Result<String, ReportError> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path).map_err(|e| ReportError(format!("missing artifact summary.csv in {}: {e}", dir.display())))?;
    let report = render_report(&parse_summary(&text)?);
    fs::write(dir.join("report.txt"), &report).map_err(|e| ReportError(format!("report.txt: {e}")))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_formats() {
        let rows = vec![
            SummaryRow::close("c_plus_q2_d1", 0.25, 0.25, 1e-12, "1e-12"),
            SummaryRow::close("theta_star", 4.0, 4.0000001, 1e-3, "1e-3"),
        ];
        assert_eq!(
            summary_csv(&rows),
            "check,expected,measured,tolerance,pass\nc_plus_q2_d1,0.25,0.25,1e-12,pass\ntheta_star,4.0,4.0000001,1e-3,pass\n"
        );
    }

    #[test]
    fn round_trip_and_report() {
        let rows = vec![SummaryRow::at_most("A7", 0.05, 0.025), SummaryRow::at_least("x", 0.0, -1.0)];
        let parsed = parse_summary(&summary_csv(&rows)).unwrap();
        assert_eq!(parsed, rows);
        let report = render_report(&parsed);
        assert!(report.contains("A7   PASS"));
        assert!(report.contains("FAIL"));
    }

    #[test]
    fn empty_summary_renders_header_only() {
        let report = render_report(&parse_summary("check,expected,measured,tolerance,pass\n").unwrap());
        assert_eq!(report, "holder-hj report\nchecks: 0  passed: 0  failed: 0\n");
        assert!(parse_summary("nope\n").is_err());
    }
}
