use serde::{Deserialize, Serialize};

use super::EvalReport;

/// One line of the comparison table. `report` is absent when the cohort
/// could not be evaluated, in which case `note` says why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub cohort_size: usize,
    pub report: Option<EvalReport>,
    pub note: Option<String>,
}

/// "1856 visits (180 +, 1676 -)"
pub fn describe(report: &EvalReport) -> String {
    format!(
        "{} visits ({} +, {} -)",
        report.visit_count, report.positive_count, report.negative_count
    )
}

/// "0.81(0.05)"
pub fn format_auc(report: &EvalReport) -> String {
    format!("{:.2}({:.2})", report.auc_mean, report.auc_std)
}

/// Aligned plain-text comparison table.
pub fn format_table(title: &str, rows: &[TableRow]) -> String {
    let header = ["Data Set", "Data Description", "AUC for LR"];
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|row| match &row.report {
            Some(r) if r.visit_count == row.cohort_size => {
                [row.name.clone(), describe(r), format_auc(r)]
            }
            // Task filters (minimum stay) can drop visits before evaluation.
            Some(r) => [
                row.name.clone(),
                format!(
                    "{} visits, {}",
                    row.cohort_size,
                    describe(r).replacen("visits", "usable", 1)
                ),
                format_auc(r),
            ],
            None => [
                row.name.clone(),
                format!("{} visits", row.cohort_size),
                row.note.clone().unwrap_or_else(|| "n/a".to_owned()),
            ],
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: [&str; 3]| {
        format!(
            "{:<w0$} | {:<w1$} | {}",
            cols[0],
            cols[1],
            cols[2],
            w0 = widths[0],
            w1 = widths[1]
        )
        .trim_end()
        .to_owned()
    };
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&line(header));
    out.push('\n');
    out.push_str(&format!(
        "{}-+-{}-+-{}\n",
        "-".repeat(widths[0]),
        "-".repeat(widths[1]),
        "-".repeat(widths[2])
    ));
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2]]));
        out.push('\n');
    }
    out
}
