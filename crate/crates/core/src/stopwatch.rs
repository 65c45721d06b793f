use std::time::Instant;

use crate::domain::Timing;

/// Elapsed-time source honouring [`Timing`]: frozen watches always read zero.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch(Option<Instant>);

impl Stopwatch {
    pub fn start(timing: Timing) -> Self {
        match timing {
            Timing::Wall => Stopwatch(Some(Instant::now())),
            Timing::Frozen => Stopwatch(None),
        }
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.0.map_or(0, |t| t.elapsed().as_millis() as u64)
    }
}
