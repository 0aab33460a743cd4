//! Console and HTML rendering of verification results.
//!
//! The console output covers four things in order: what was found in the
//! workbook, the feature model as UVL, per-configuration verdicts, and
//! the overall tallies. The HTML report is one self-contained file built
//! around a matrix of distinct query formulas (rows) against
//! configurations (columns).

use std::path::PathBuf;

use crate::featmodel::Violation;
use crate::runner::{QueryResult, QueryStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    pub config_name: String,
    /// Expanded selection with attribute values, sorted by name.
    pub selected_features: Vec<(String, Option<String>)>,
    pub violations: Vec<Violation>,
    /// Empty whenever `skipped` is set.
    pub results: Vec<QueryResult>,
    /// Invalid configurations are reported but never verified.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub generated_at: String,
    pub workbook: PathBuf,
    pub model: PathBuf,
    pub uvl_text: Option<String>,
    /// Display names of the annotation tables found, workbook order.
    pub annotation_tables: Vec<String>,
    /// One entry per configuration, in `@Configurations` row order.
    pub entries: Vec<ConfigEntry>,
}

/// (passed, failed, errored) across all entries.
pub fn tallies(report: &VerificationReport) -> (usize, usize, usize) {
    let mut passed = 0;
    let mut failed = 0;
    let mut errored = 0;
    for entry in &report.entries {
        for result in &entry.results {
            match result.status {
                QueryStatus::Passed => passed += 1,
                QueryStatus::Failed => failed += 1,
                QueryStatus::Error(_) => errored += 1,
            }
        }
    }
    (passed, failed, errored)
}

pub fn render_console(report: &VerificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("verification report ({})\n", report.generated_at));
    out.push_str(&format!("workbook: {}\n", report.workbook.display()));
    out.push_str(&format!("model: {}\n", report.model.display()));
    if report.annotation_tables.is_empty() {
        out.push_str("0 annotation tables\n");
    } else {
        out.push_str(&format!(
            "{} annotation tables ({})\n",
            report.annotation_tables.len(),
            report.annotation_tables.join(", ")
        ));
    }
    out.push_str(&format!("{} configurations\n", report.entries.len()));

    if let Some(uvl) = &report.uvl_text {
        out.push_str("\nfeature model (UVL):\n");
        out.push_str(uvl);
    }

    for entry in &report.entries {
        let status = if entry.violations.is_empty() { "valid" } else { "INVALID" };
        let skipped = if entry.skipped { ", SKIPPED" } else { "" };
        out.push_str(&format!(
            "\nconfiguration '{}': {status}{skipped}\n",
            entry.config_name
        ));
        for violation in &entry.violations {
            out.push_str(&format!("  - {}\n", violation.detail));
        }
        for result in &entry.results {
            let line = match &result.status {
                QueryStatus::Passed => {
                    format!("  PASS {} ({}ms)\n", result.formula, result.duration_ms)
                }
                QueryStatus::Failed => {
                    format!("  FAIL {} ({}ms)\n", result.formula, result.duration_ms)
                }
                QueryStatus::Error(reason) => format!(
                    "  ERR {} ({}ms) [{reason}]\n",
                    result.formula, result.duration_ms
                ),
            };
            out.push_str(&line);
        }
    }

    let (passed, failed, errored) = tallies(report);
    out.push_str(&format!(
        "\ntotals: passed: {passed}, failed: {failed}, errors: {errored}\n"
    ));
    out
}

fn html_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            other => out.push(other),
        }
    }
    out
}

/// Distinct formulas across all entries, first appearance order, with the
/// first comment seen for each.
fn matrix_rows(report: &VerificationReport) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = Vec::new();
    for entry in &report.entries {
        for result in &entry.results {
            if !rows.iter().any(|(f, _)| f == &result.formula) {
                rows.push((result.formula.clone(), result.comment.clone()));
            }
        }
    }
    rows
}

pub fn render_html(report: &VerificationReport) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n\
         <title>verification report</title>\n<style>\n\
         body { font-family: system-ui, sans-serif; margin: 1.5em; color: #222; }\n\
         table { border-collapse: collapse; margin: 1em 0; }\n\
         th, td { border: 1px solid #999; padding: 0.3em 0.6em; text-align: left; }\n\
         th.cfg { background: #e8e8f0; }\n\
         td.passed { background: #b9e0b9; }\n\
         td.failed { background: #f0b3b3; }\n\
         td.error { background: #f0d9a6; }\n\
         td.skipped { background: #ddd; color: #555; }\n\
         td.blank { background: #fff; }\n\
         li.violation { color: #a00; }\n\
         pre { background: #f6f6f6; padding: 0.8em; }\n\
         code { font-family: ui-monospace, monospace; }\n\
         </style>\n</head>\n<body>\n<h1>verification report</h1>\n",
    );
    let (passed, failed, errored) = tallies(report);
    out.push_str(&format!(
        "<p>generated {} | workbook <code>{}</code> | model <code>{}</code></p>\n\
         <p>{} configurations, {} annotation tables | \
         passed: {passed}, failed: {failed}, errors: {errored}</p>\n",
        html_escape(&report.generated_at),
        html_escape(&report.workbook.display().to_string()),
        html_escape(&report.model.display().to_string()),
        report.entries.len(),
        report.annotation_tables.len(),
    ));

    if let Some(uvl) = &report.uvl_text {
        out.push_str("<h2>feature model (UVL)</h2>\n<pre>");
        out.push_str(&html_escape(uvl));
        out.push_str("</pre>\n");
    }

    out.push_str("<h2>results matrix</h2>\n<table>\n<tr><th>formula</th><th>comment</th>");
    for entry in &report.entries {
        out.push_str(&format!(
            "<th class=\"cfg\">{}</th>",
            html_escape(&entry.config_name)
        ));
    }
    out.push_str("</tr>\n");
    for (formula, comment) in matrix_rows(report) {
        out.push_str(&format!(
            "<tr><th class=\"formula\"><code>{}</code></th><td>{}</td>",
            html_escape(&formula),
            html_escape(&comment)
        ));
        for entry in &report.entries {
            if entry.skipped {
                out.push_str("<td class=\"skipped\">skipped</td>");
                continue;
            }
            let cell = entry.results.iter().find(|r| r.formula == formula);
            match cell {
                Some(result) => match &result.status {
                    QueryStatus::Passed => out.push_str("<td class=\"passed\">pass</td>"),
                    QueryStatus::Failed => out.push_str("<td class=\"failed\">fail</td>"),
                    QueryStatus::Error(reason) => out.push_str(&format!(
                        "<td class=\"error\" title=\"{}\">error</td>",
                        html_escape(reason)
                    )),
                },
                None => out.push_str("<td class=\"blank\"></td>"),
            }
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");

    out.push_str("<h2>configurations</h2>\n");
    for entry in &report.entries {
        out.push_str(&format!(
            "<section>\n<h3>{}</h3>\n",
            html_escape(&entry.config_name)
        ));
        if entry.selected_features.is_empty() {
            out.push_str("<p>features: (none)</p>\n");
        } else {
            let rendered: Vec<String> = entry
                .selected_features
                .iter()
                .map(|(name, value)| match value {
                    Some(v) => format!("{}={}", html_escape(name), html_escape(v)),
                    None => html_escape(name),
                })
                .collect();
            out.push_str(&format!("<p>features: {}</p>\n", rendered.join(", ")));
        }
        if !entry.violations.is_empty() {
            out.push_str("<ul>\n");
            for violation in &entry.violations {
                out.push_str(&format!(
                    "<li class=\"violation\">{}</li>\n",
                    html_escape(&violation.detail)
                ));
            }
            out.push_str("</ul>\n");
        }
        if entry.skipped {
            out.push_str("<p>skipped: not verified because validation failed</p>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}
