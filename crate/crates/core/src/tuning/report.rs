//! Experiment result file in the mono/cross layout.

use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use crate::models::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub learner: ModelKind,
    /// Training set, e.g. `mono npm` or `cross`.
    pub trained_on: String,
    /// Evaluation slice, e.g. `npm` or `all`.
    pub tested_on: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    pub fn push(&mut self, learner: ModelKind, trained_on: &str, tested_on: &str, report: MetricsReport) {
        self.rows.push(ExperimentRow {
            learner,
            trained_on: trained_on.to_string(),
            tested_on: tested_on.to_string(),
            report,
        });
    }

    pub fn find(&self, learner: ModelKind, trained_on: &str, tested_on: &str) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.learner == learner && r.trained_on == trained_on && r.tested_on == tested_on)
            .map(|r| &r.report)
    }

    /// Percentages as mean±std, one row per (learner, training set, slice).
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "{}-fold cross validation, {} repeat(s), seed {}\n\n| Learner | Trained on | Tested on | Pr. | Rec. | F1 | Acc. |\n|---|---|---|---|---|---|---|\n",
            self.k, self.repeats, self.seed
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                r.learner.as_str().to_uppercase(),
                r.trained_on,
                r.tested_on,
                r.report.precision,
                r.report.recall,
                r.report.f1,
                r.report.accuracy
            ));
        }
        out
    }
}
