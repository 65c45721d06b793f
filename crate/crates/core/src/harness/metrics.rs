use serde::{Deserialize, Serialize};

use super::pipeline::QuestionRecord;

/// Accuracy and per-question cost averages for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_questions: usize,
    pub n_correct: usize,
    pub n_abstained: usize,
    pub n_failed: usize,
    pub accuracy: f64,
    pub calls_per_q: f64,
    pub retr_per_q: f64,
    /// Seconds.
    pub time_per_q: f64,
    pub tokens_per_q: f64,
    pub tokens_in_per_q: f64,
    pub tokens_out_per_q: f64,
}

impl RunMetrics {
    pub fn from_records(records: &[QuestionRecord]) -> Self {
        let n = records.len();
        let mean = |f: &dyn Fn(&QuestionRecord) -> u64| -> f64 {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<u64>() as f64 / n as f64
            }
        };
        let n_correct = records.iter().filter(|r| r.correct).count();
        RunMetrics {
            n_questions: n,
            n_correct,
            n_abstained: records.iter().filter(|r| r.abstained).count(),
            n_failed: records.iter().filter(|r| r.error.is_some()).count(),
            accuracy: if n == 0 { 0.0 } else { n_correct as f64 / n as f64 },
            calls_per_q: mean(&|r| r.cost.llm_calls),
            retr_per_q: mean(&|r| r.cost.retrieval_ops),
            time_per_q: mean(&|r| r.cost.wall_ms) / 1000.0,
            tokens_per_q: mean(&|r| r.cost.total_tokens()),
            tokens_in_per_q: mean(&|r| r.cost.tokens_in),
            tokens_out_per_q: mean(&|r| r.cost.tokens_out),
        }
    }

    /// Human-readable summary table.
    pub fn to_table(&self, label: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<16} {:>6} {:>8} {:>8} {:>8} {:>9} {:>10}\n",
            "run", "n", "acc(%)", "calls", "retr", "time(s)", "tok/q"
        ));
        s.push_str(&format!(
            "{:<16} {:>6} {:>8.2} {:>8.2} {:>8.2} {:>9.2} {:>10.1}\n",
            label,
            self.n_questions,
            self.accuracy * 100.0,
            self.calls_per_q,
            self.retr_per_q,
            self.time_per_q,
            self.tokens_per_q
        ));
        s.push_str(&format!(
            "correct {}  abstained {}  failed {}  tokens in/out per q {:.1}/{:.1}\n",
            self.n_correct, self.n_abstained, self.n_failed, self.tokens_in_per_q, self.tokens_out_per_q
        ));
        s
    }
}
