use super::config::Config;
use crate::network::LinkStats;

/// Fraction of critical requests among all requests, `crit / (crit + noncrit)`.
/// Zero when there are no requests at all.
pub fn crit_ratio(crit: u64, noncrit: u64) -> f64 {
    let total = crit + noncrit;
    if total == 0 {
        0.0
    } else {
        crit as f64 / total as f64
    }
}

/// Correctness counters gathered while a run executes. All zero in a correct run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    pub swmr: u64,
    pub data_value: u64,
    pub lock_safety: u64,
    pub crit_audit: u64,
    pub inclusion: u64,
    pub conservation: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.swmr + self.data_value + self.lock_safety + self.crit_audit + self.inclusion + self.conservation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub config: Config,
    pub total_cycles: u64,
    /// Cycles spent inside critical sections, summed over cores.
    pub crit_cycles: u64,
    /// GETS/GETX requests issued with crit set.
    pub crit_reqs: u64,
    pub noncrit_reqs: u64,
    pub links: Vec<LinkStats>,
    pub counter_values: Vec<u64>,
    pub messages: u64,
    pub violations: Violations,
    /// First few violation descriptions, for diagnostics.
    pub violation_log: Vec<String>,
}

impl RunStats {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn ratio(&self) -> f64 {
        crit_ratio(self.crit_reqs, self.noncrit_reqs)
    }

    /// Mean over links of busy/total cycles.
    pub fn avg_link_utilization(&self) -> f64 {
        if self.links.is_empty() || self.total_cycles == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .links
            .iter()
            .map(|l| l.busy_cycles as f64 / self.total_cycles as f64)
            .sum();
        sum / self.links.len() as f64
    }

    pub fn avg_contention_cycles(&self) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        self.links.iter().map(|l| l.contention_cycles as f64).sum::<f64>() / self.links.len() as f64
    }

    /// Every shared counter equals `procs × iters`.
    pub fn counters_correct(&self) -> bool {
        let want = (self.config.procs * self.config.iters) as u64;
        self.counter_values.len() == self.config.counters
            && self.counter_values.iter().all(|&v| v == want)
    }
}
