//! Markdown summaries of Monte Carlo reports.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::estimators::identifiability::{table_condition, table_rate, TABLE_ROWS};
use crate::estimators::Method;
use crate::lab::{McReport, VerdictStatus, REPORT_SCHEMA_VERSION};

/// Read a report, refusing other schema versions.
pub fn load_report(path: &FsPath) -> Result<McReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read report {}: {e}", path.display())))?;
    parse_report(&text).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_report(text: &str) -> Result<McReport> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::input(format!("not a JSON report: {e}")))?;
    let version = v.get("schema_version").and_then(|x| x.as_u64());
    match version {
        Some(x) if x == REPORT_SCHEMA_VERSION as u64 => {}
        Some(x) => {
            return Err(Error::input(format!(
                "report schema version {x} needs migration: this build reads version {REPORT_SCHEMA_VERSION}; \
                 re-run the experiment with this build to regenerate the report"
            )))
        }
        None => return Err(Error::input("report has no schema_version field")),
    }
    serde_json::from_value(v).map_err(|e| Error::input(format!("malformed report: {e}")))
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "—".into()
    } else {
        format!("{x:.4}")
    }
}

fn status(s: VerdictStatus) -> &'static str {
    match s {
        VerdictStatus::Pass => "pass",
        VerdictStatus::Fail => "FAIL",
        VerdictStatus::Degenerate => "degenerate",
        VerdictStatus::Skipped => "skipped",
    }
}

fn method_name(m: Option<Method>) -> &'static str {
    match m {
        Some(Method::Adaptive) => "adaptive",
        Some(Method::Threshold) => "threshold",
        None => "—",
    }
}

fn slope_cell(r: &McReport, name: &str) -> String {
    match r.fits.iter().find(|f| f.name == name) {
        Some(f) => format!("{} ± {}", fmt(f.slope), fmt(f.slope_se)),
        None => "—".into(),
    }
}

fn rates_table(r: &McReport, out: &mut String) {
    out.push_str("| parameter | predicted exponent | fitted slope | SE | verdict |\n");
    out.push_str("|---|---|---|---|---|\n");
    for f in &r.fits {
        let v = r
            .verdict(&format!("slope_{}", f.name))
            .map_or("—", |v| status(v.status));
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            f.name,
            fmt(f.predicted),
            fmt(f.slope),
            fmt(f.slope_se),
            v
        );
    }
}

fn verdict_table(r: &McReport, out: &mut String) {
    out.push_str("| check | value | tolerance | rule | status |\n");
    out.push_str("|---|---|---|---|---|\n");
    for v in &r.verdicts {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            v.name,
            fmt(v.value),
            fmt(v.tolerance),
            v.rule,
            status(v.status)
        );
    }
}

/// Conditions and rates of both methods side by side, with the fitted
/// slopes of the two reports where a parameter was estimated.
fn side_by_side(adaptive: &McReport, threshold: &McReport, out: &mut String) {
    out.push_str("| parameter | without threshold (G_n): condition | rate | fitted slope | with threshold (H_n): condition | rate | fitted slope |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for (row, name) in TABLE_ROWS.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            name,
            table_condition(Method::Adaptive, row),
            table_rate(Method::Adaptive, row),
            slope_cell(adaptive, name),
            table_condition(Method::Threshold, row),
            table_rate(Method::Threshold, row),
            slope_cell(threshold, name),
        );
    }
}

/// Markdown summary of one or more reports.
pub fn render(reports: &[McReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::config("report needs at least one report file"));
    }
    let mut out = String::new();
    if reports.len() == 2 && reports.iter().all(|r| r.experiment == "rates") {
        let a = reports.iter().find(|r| r.method == Some(Method::Adaptive));
        let t = reports.iter().find(|r| r.method == Some(Method::Threshold));
        if let (Some(a), Some(t)) = (a, t) {
            out.push_str("## Identifiability conditions and rates\n\n");
            side_by_side(a, t, &mut out);
            out.push('\n');
        }
    }
    for r in reports {
        let _ = writeln!(
            out,
            "## {} ({}), seed {}, {} replications\n",
            r.experiment,
            method_name(r.method),
            r.base_seed,
            r.reps
        );
        if !r.reliable {
            out.push_str("**unreliable**: too many replications failed\n\n");
        }
        if r.experiment == "rates" {
            rates_table(r, &mut out);
        } else {
            verdict_table(r, &mut out);
        }
        if !r.warnings.is_empty() {
            out.push_str("\nwarnings:\n");
            for w in &r.warnings {
                let _ = writeln!(out, "- {w}");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{SlopeFit, Verdict};

    fn rates(method: Method) -> McReport {
        let mut r = McReport::new("rates", 1, 10);
        r.method = Some(method);
        for n in ["b1", "H1", "beta1"] {
            r.fits.push(SlopeFit {
                name: n.into(),
                slope: -0.5,
                slope_se: 0.05,
                predicted: -0.5,
            });
            r.verdicts.push(Verdict::below(format!("slope_{n}"), 0.0, 0.15));
        }
        r
    }

    #[test]
    fn one_row_per_parameter() {
        let s = render(&[rates(Method::Adaptive)]).unwrap();
        let rows = s.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| parameter")).count();
        assert_eq!(rows, 3);
    }

    #[test]
    fn two_methods_side_by_side() {
        let s = render(&[rates(Method::Adaptive), rates(Method::Threshold)]).unwrap();
        assert!(s.contains("without threshold (G_n)") && s.contains("with threshold (H_n)"));
        assert!(s.contains("(log n)^{β1/4}"));
    }

    #[test]
    fn schema_mismatch_is_a_migration_error() {
        let mut v = serde_json::to_value(rates(Method::Adaptive)).unwrap();
        v["schema_version"] = serde_json::json!(99);
        let e = parse_report(&v.to_string()).unwrap_err();
        assert!(e.to_string().contains("migration"), "{e}");
        assert!(render(&[]).is_err());
    }
}
