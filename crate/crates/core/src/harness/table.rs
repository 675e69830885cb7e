use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::ShiftReport;
use crate::eval::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub setup: String,
    pub method: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    /// Test FPR strictly above the 1% budget.
    pub flag_1pct: bool,
    pub flag_01pct: bool,
}

impl TableRow {
    pub fn from_report(report: EvalReport) -> Self {
        Self {
            setup: report.setup.clone(),
            method: report.method.clone(),
            flag_1pct: report.test.fpr_1pct > 0.01,
            flag_01pct: report.test.fpr_01pct > 0.001,
            report: Some(report),
            error: None,
        }
    }

    pub fn failed(setup: &str, method: &str, error: String) -> Self {
        Self {
            setup: setup.to_string(),
            method: method.to_string(),
            report: None,
            error: Some(error),
            flag_1pct: false,
            flag_01pct: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub setup: String,
    pub report: Option<ShiftReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<TableRow>,
    pub shift: Vec<ShiftRow>,
}

impl BenchmarkTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
            + self.shift.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn row(&self, setup: &str, method: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.setup == setup && r.method == method)
    }

    pub fn shift_row(&self, setup: &str) -> Option<&ShiftReport> {
        self.shift.iter().find(|r| r.setup == setup)?.report.as_ref()
    }

    /// Aligned plain-text rendering; `*` marks test FPRs over budget.
    pub fn to_text(&self) -> String {
        let header = [
            "setup", "method", "val_auc", "val_tpr@1%", "test_tpr@1%", "test_fpr@1%", "val_tpr@0.1%",
            "test_tpr@0.1%", "test_fpr@0.1%",
        ];
        let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let mut cells = vec![r.setup.clone(), r.method.clone()];
            match &r.report {
                Some(rep) => {
                    let star = |v: f64, flag: bool| format!("{v:.4}{}", if flag { "*" } else { "" });
                    cells.extend([
                        format!("{:.4}", rep.val.auc),
                        format!("{:.4}", rep.val.tpr_at_1pct),
                        format!("{:.4}", rep.test.tpr_1pct),
                        star(rep.test.fpr_1pct, r.flag_1pct),
                        format!("{:.4}", rep.val.tpr_at_01pct),
                        format!("{:.4}", rep.test.tpr_01pct),
                        star(rep.test.fpr_01pct, r.flag_01pct),
                    ]);
                }
                None => cells.push(format!("FAILED: {}", r.error.as_deref().unwrap_or(""))),
            }
            lines.push(cells);
        }
        let mut out = render(&lines);

        let mut shift: Vec<Vec<String>> = vec![[
            "setup", "val_tpr", "val_fpr", "val_tnr", "val_fnr", "test_tpr", "test_fpr", "test_tnr", "test_fnr",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()];
        for r in &self.shift {
            let mut cells = vec![r.setup.clone()];
            match &r.report {
                Some(s) => {
                    for v in [
                        s.val.tpr, s.val.fpr, s.val.tnr, s.val.fnr, s.test.tpr, s.test.fpr, s.test.tnr, s.test.fnr,
                    ] {
                        cells.push(format!("{v:.4}"));
                    }
                }
                None => cells.push(format!("FAILED: {}", r.error.as_deref().unwrap_or(""))),
            }
            shift.push(cells);
        }
        out.push('\n');
        out.push_str(&render(&shift));
        out
    }
}

fn render(lines: &[Vec<String>]) -> String {
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| lines.iter().filter_map(|l| l.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in lines {
        let row: Vec<String> = l.iter().enumerate().map(|(c, v)| format!("{v:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", row.join("  ").trim_end());
    }
    out
}
