//! Side-by-side distortion table across several runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::result::Summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    /// One entry per column; `None` where no fundamental was measurable.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
}

type Pick = fn(&Summary) -> Option<f64>;

const ROWS: [(&str, Pick); 8] = [
    ("output THD, current", |s| s.thd_out.current_wideband),
    ("output THD, voltage", |s| s.thd_out.voltage_wideband),
    ("input THD, current", |s| s.thd_in.current_wideband),
    ("input THD, voltage", |s| s.thd_in.voltage_wideband),
    ("output THD, current (harmonics)", |s| s.thd_out.current),
    ("output THD, voltage (harmonics)", |s| s.thd_out.voltage),
    ("input THD, current (harmonics)", |s| s.thd_in.current),
    ("input THD, voltage (harmonics)", |s| s.thd_in.voltage),
];

/// Rows: distortion quantities; columns: one per labelled result.
pub fn report(results: &[(String, Summary)]) -> ReportTable {
    if results.is_empty() {
        return ReportTable::default();
    }
    ReportTable {
        columns: results.iter().map(|(l, _)| l.clone()).collect(),
        rows: ROWS
            .iter()
            .map(|(name, pick)| ReportRow {
                quantity: name.to_string(),
                values: results.iter().map(|(_, s)| pick(s)).collect(),
            })
            .collect(),
    }
}

impl ReportTable {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn to_text(&self) -> String {
        if self.is_empty() {
            return "(no results)\n".to_string();
        }
        let label_w = self.rows.iter().map(|r| r.quantity.len()).max().unwrap_or(0).max(8);
        let col_w: Vec<usize> = self.columns.iter().map(|c| c.len().max(9)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "");
        for (c, w) in self.columns.iter().zip(&col_w) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<label_w$}", row.quantity);
            for (v, w) in row.values.iter().zip(&col_w) {
                let cell = v.map_or("n/a".to_string(), |x| format!("{:.2}%", 100.0 * x));
                let _ = write!(out, "  {cell:>w$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
