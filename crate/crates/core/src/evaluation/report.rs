use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, cohen_kappa, off_by_one_accuracy, ConfusionMatrix};
use crate::error::Result;
use crate::model::ClassLabel;

/// A confusion matrix with its headline numbers, ready to print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub row_title: String,
    pub col_title: String,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub total: u64,
    pub accuracy: f64,
    pub kappa: f64,
    pub kappa_degenerate: bool,
    pub off_by_one: Option<f64>,
    pub recall: Vec<Option<f64>>,
}

impl MatrixSummary {
    pub fn new<L: ClassLabel>(m: &ConfusionMatrix<L>, row_title: &str, col_title: &str) -> Result<Self> {
        let kappa = cohen_kappa::<f64, L>(m)?;
        Ok(Self {
            row_title: row_title.into(),
            col_title: col_title.into(),
            labels: L::ALL.iter().map(|l| l.name().to_string()).collect(),
            counts: m.counts().to_vec(),
            row_totals: m.row_totals(),
            col_totals: m.col_totals(),
            total: m.total(),
            accuracy: accuracy(m)?,
            kappa: kappa.value,
            kappa_degenerate: kappa.degenerate,
            off_by_one: off_by_one_accuracy(m).ok(),
            recall: m.recall(),
        })
    }

    pub fn render(&self, out: &mut String) {
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(7) + 2;
        let _ = writeln!(out, "rows: {}; columns: {}", self.row_title, self.col_title);
        let _ = write!(out, "{:width$}", "");
        for l in &self.labels {
            let _ = write!(out, "{l:>width$}");
        }
        let _ = writeln!(out, "{:>width$}", "Total");
        for (i, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{:width$}", self.labels[i]);
            for c in row {
                let _ = write!(out, "{c:>width$}");
            }
            let _ = writeln!(out, "{:>width$}", self.row_totals[i]);
        }
        let _ = write!(out, "{:width$}", "Total");
        for c in &self.col_totals {
            let _ = write!(out, "{c:>width$}");
        }
        let _ = writeln!(out, "{:>width$}", self.total);
        let _ = writeln!(out, "accuracy: {:.4} ({}/{})", self.accuracy, self.counts_trace(), self.total);
        if let Some(o) = self.off_by_one {
            let _ = writeln!(out, "off-by-one accuracy: {o:.4}");
        }
        let flag = if self.kappa_degenerate { " (degenerate: single class)" } else { "" };
        let _ = writeln!(out, "cohen kappa: {:.4}{flag}", self.kappa);
        let _ = write!(out, "recall:");
        for (l, r) in self.labels.iter().zip(&self.recall) {
            match r {
                Some(r) => {
                    let _ = write!(out, " {l}={r:.4}");
                }
                None => {
                    let _ = write!(out, " {l}=n/a");
                }
            }
        }
        out.push('\n');
    }

    fn counts_trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fingerprint: String,
    pub protocol: String,
    pub samples: usize,
    pub cin: MatrixSummary,
    pub sil: MatrixSummary,
    pub notes: Vec<String>,
    pub failures: Vec<String>,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config fingerprint: {}", self.fingerprint);
        let _ = writeln!(out, "protocol: {}", self.protocol);
        let _ = writeln!(out, "samples: {}", self.samples);
        out.push_str("\n[CIN]\n");
        self.cin.render(&mut out);
        out.push_str("\n[SIL]\n");
        self.sil.render(&mut out);
        if !self.failures.is_empty() {
            let _ = writeln!(out, "\nfailed entries: {}", self.failures.join(", "));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub fingerprint: String,
    pub pairs: usize,
    pub cin: MatrixSummary,
    pub sil: MatrixSummary,
    pub footnote: String,
}

/// Printed under every agreement report so the computed figure is never
/// mistaken for a rounded or quoted one.
pub const AGREEMENT_FOOTNOTE: &str =
    "agreement is the matrix diagonal over its total, computed from the cells; \
     quoted summary percentages for the same cells may differ and are not matched";

impl AgreementReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config fingerprint: {}", self.fingerprint);
        let _ = writeln!(out, "dual-labelled entries: {}", self.pairs);
        out.push_str("\n[CIN]\n");
        self.cin.render(&mut out);
        out.push_str("\n[SIL]\n");
        self.sil.render(&mut out);
        let _ = writeln!(out, "\n* {}", self.footnote);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
