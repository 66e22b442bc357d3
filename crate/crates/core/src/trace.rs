//! Incumbent traces recorded by the solvers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

/// A new incumbent, stamped with the time since the solver started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub seconds: f64,
    pub cost: f64,
}

/// Records strictly improving incumbents against a monotonic clock.
#[derive(Debug, Clone)]
pub struct ImprovementLog {
    start: Instant,
    entries: Vec<Improvement>,
}

impl ImprovementLog {
    pub fn start() -> Self {
        Self { start: Instant::now(), entries: Vec::new() }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Logs `cost` if it beats the last logged incumbent.
    pub fn offer(&mut self, cost: f64) {
        if self.entries.last().is_none_or(|last| cost < last.cost) {
            let seconds = self.elapsed();
            self.entries.push(Improvement { seconds, cost });
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.entries.last().map(|e| e.cost)
    }

    pub fn into_entries(self) -> Vec<Improvement> {
        self.entries
    }
}

/// First time at which the incumbent reached `target` or better.
pub fn time_to_target(trace: &[Improvement], target: f64) -> Option<f64> {
    trace.iter().find(|i| i.cost <= target).map(|i| i.seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_improvements_are_logged() {
        let mut log = ImprovementLog::start();
        for c in [5.0, 6.0, 4.0, 4.0, 3.5] {
            log.offer(c);
        }
        let costs: Vec<f64> = log.into_entries().iter().map(|e| e.cost).collect();
        assert_eq!(costs, vec![5.0, 4.0, 3.5]);
    }

    #[test]
    fn hit_time_lookup() {
        let trace = [
            Improvement { seconds: 0.1, cost: 10.0 },
            Improvement { seconds: 0.5, cost: 8.0 },
            Improvement { seconds: 0.9, cost: 7.0 },
        ];
        assert_eq!(time_to_target(&trace, 8.0), Some(0.5));
        assert_eq!(time_to_target(&trace, 100.0), Some(0.1));
        assert_eq!(time_to_target(&trace, 6.9), None);
    }
}
