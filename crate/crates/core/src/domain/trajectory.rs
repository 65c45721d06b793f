use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::verdict::SufficiencyVerdict;

/// Why the retrieval loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Sufficient,
    MaxRounds,
    Stagnation,
}

/// Cost accounting for a question or a stage of it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    /// Counted (non-cached, successful) LLM invocations.
    pub llm_calls: u64,
    /// Extra attempts spent on transient backend failures.
    #[serde(default)]
    pub retries: u64,
    #[serde(default)]
    pub cache_hits: u64,
    pub retrieval_ops: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub wall_ms: u64,
}

impl CostCounters {
    pub fn total_tokens(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }

    /// Component-wise difference; `self` must dominate `earlier`.
    pub fn since(&self, earlier: &CostCounters) -> CostCounters {
        CostCounters {
            llm_calls: self.llm_calls - earlier.llm_calls,
            retries: self.retries - earlier.retries,
            cache_hits: self.cache_hits - earlier.cache_hits,
            retrieval_ops: self.retrieval_ops - earlier.retrieval_ops,
            tokens_in: self.tokens_in - earlier.tokens_in,
            tokens_out: self.tokens_out - earlier.tokens_out,
            wall_ms: self.wall_ms - earlier.wall_ms,
        }
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, o: Self) {
        self.llm_calls += o.llm_calls;
        self.retries += o.retries;
        self.cache_hits += o.cache_hits;
        self.retrieval_ops += o.retrieval_ops;
        self.tokens_in += o.tokens_in;
        self.tokens_out += o.tokens_out;
        self.wall_ms += o.wall_ms;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round_index: usize,
    pub queries: Vec<String>,
    pub newly_added: Vec<String>,
    pub evidence_size: usize,
    pub verdict: SufficiencyVerdict,
    /// Set when the audit output could not be parsed and a stand-in verdict was used.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub audit_failed: bool,
}

/// Per-round log of one retrieval loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalTrajectory {
    pub rounds: Vec<RoundRecord>,
    #[serde(rename = "T")]
    pub rounds_executed: usize,
    pub termination: Termination,
    pub counters: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("trajectory has {rounds} rounds, outside 1..={t_max}")]
    RoundCount { rounds: usize, t_max: usize },
    #[error("T = {declared} but {actual} rounds are recorded")]
    CountMismatch { declared: usize, actual: usize },
    #[error("evidence size shrinks at round {0}")]
    EvidenceShrinks(usize),
    #[error("termination {termination:?} disagrees with the final verdict")]
    TerminationMismatch { termination: Termination },
}

impl RetrievalTrajectory {
    pub fn last_verdict(&self) -> Option<&SufficiencyVerdict> {
        self.rounds.last().map(|r| &r.verdict)
    }

    /// Total number of queries issued across all rounds.
    pub fn query_count(&self) -> usize {
        self.rounds.iter().map(|r| r.queries.len()).sum()
    }

    pub fn check(&self, t_max: usize) -> Result<(), TrajectoryError> {
        let n = self.rounds.len();
        if n == 0 || n > t_max {
            return Err(TrajectoryError::RoundCount { rounds: n, t_max });
        }
        if self.rounds_executed != n {
            return Err(TrajectoryError::CountMismatch {
                declared: self.rounds_executed,
                actual: n,
            });
        }
        for w in self.rounds.windows(2) {
            if w[1].evidence_size < w[0].evidence_size {
                return Err(TrajectoryError::EvidenceShrinks(w[1].round_index));
            }
        }
        let last_sufficient = self.last_verdict().is_some_and(|v| v.is_sufficient());
        if (self.termination == Termination::Sufficient) != last_sufficient {
            return Err(TrajectoryError::TerminationMismatch {
                termination: self.termination,
            });
        }
        Ok(())
    }
}
