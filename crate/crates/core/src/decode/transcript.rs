use serde::{Deserialize, Serialize};

use crate::schema::{ErrorClass, ValidationReport, Verdict};
use crate::vocab::TokenId;

/// One line of a run's output: what a session generated and how the
/// reference validator judged it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session: usize,
    pub seed: u64,
    pub policy: String,
    pub token_ids: Vec<TokenId>,
    pub text: String,
    /// `Valid`, `Invalid` or `Incomplete` (step limit hit).
    pub verdict: String,
    pub error_class: Option<ErrorClass>,
    pub error_offset: Option<usize>,
    pub steps: usize,
    pub fallbacks: usize,
    pub wall_micros: u64,
}

impl Transcript {
    pub fn set_verdict(&mut self, report: &ValidationReport) {
        match &report.verdict {
            Verdict::Valid => {
                self.verdict = "Valid".into();
                self.error_class = None;
                self.error_offset = None;
            }
            Verdict::Invalid { class, offset, .. } => {
                self.verdict = "Invalid".into();
                self.error_class = Some(*class);
                self.error_offset = Some(*offset);
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.verdict == "Valid"
    }
}

/// Aggregate over a run's transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sessions: usize,
    pub valid: usize,
    pub invalid: usize,
    pub incomplete: usize,
    pub error_rate: f64,
    pub fallbacks: usize,
}

impl RunSummary {
    pub fn of(transcripts: &[Transcript]) -> Self {
        let sessions = transcripts.len();
        let valid = transcripts.iter().filter(|t| t.is_valid()).count();
        let incomplete = transcripts.iter().filter(|t| t.verdict == "Incomplete").count();
        let invalid = sessions - valid - incomplete;
        RunSummary {
            sessions,
            valid,
            invalid,
            incomplete,
            error_rate: if sessions == 0 { 0.0 } else { (invalid + incomplete) as f64 / sessions as f64 },
            fallbacks: transcripts.iter().map(|t| t.fallbacks).sum(),
        }
    }
}
