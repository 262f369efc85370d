//! Plain-text tables for test and bench results.

use std::fmt::Write;

use grng_core::stats::{PValue, TestReport};

/// Four significant decimals, switching to scientific notation once that
/// would print as zero.
pub fn format_p(p: PValue) -> String {
    match p {
        PValue::Value(v) if v != 0.0 && v < 1e-4 => format!("{v:.3e}"),
        other => other.to_string(),
    }
}

fn format_statistic(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.4e}")
    } else {
        format!("{x:.4}")
    }
}

/// Renders rows of cells with left-aligned, space-padded columns.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let text: Vec<String> = cells
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        writeln!(out, "{}", text.join("  ").trim_end()).unwrap();
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

/// Normality test results in the Null Hypothesis / P Value / Test Statistic
/// layout.
pub fn test_table(label: &str, n: usize, reports: &[TestReport]) -> String {
    let alpha = reports.first().map_or(0.05, |r| r.alpha);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.test.title().to_string(),
                r.decision().to_string(),
                format_p(r.p_value),
                format_statistic(r.statistic),
            ]
        })
        .collect();
    format!(
        "{label}: n = {n}, alpha = {alpha}\n{}",
        render_table(
            &["Test", "Null Hypothesis", "P Value", "Test Statistic"],
            &rows
        )
    )
}
