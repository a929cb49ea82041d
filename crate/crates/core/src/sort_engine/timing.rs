use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hbm::{effective_bandwidth, BandwidthProfile, HbmTopology, Pattern};
use crate::merge_net::{mms_stats, Record};
use crate::merge_tree::{spread_leaves, Topology};

use super::plan::{SortConfig, SortPlan, Trace};

/// Memory feed rates and per-job overhead, in records and cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub clock_hz: f64,
    /// Records per cycle one phase-1 tree can write (1x1 pattern).
    pub phase1_mem_rate: f64,
    /// Records per cycle the phase-2 tree can write (4x4 pattern).
    pub phase2_mem_rate: f64,
    pub phase1_reset: u64,
    pub phase2_reset: u64,
}

impl TimingParams {
    pub fn new(cfg: &SortConfig, topo: &HbmTopology, profile: &BandwidthProfile) -> Result<Self> {
        let per_cycle = Record::BYTES as f64 * cfg.clock_hz;
        let bw1 = effective_bandwidth(Pattern::ONE, cfg.burst_phase1, profile, topo)?;
        let bw2 = effective_bandwidth(Pattern::FOUR, cfg.burst_phase2, profile, topo)?;
        let depth = |rate| mms_stats(rate).map(|s| s.stages as u64);
        Ok(Self {
            clock_hz: cfg.clock_hz,
            phase1_mem_rate: bw1 / per_cycle,
            phase2_mem_rate: bw2 / per_cycle,
            phase1_reset: cfg.reset_cycles.map_or_else(|| depth(cfg.phase1_rate), Ok)?,
            phase2_reset: cfg.reset_cycles.map_or_else(|| depth(cfg.phase2_rate), Ok)?,
        })
    }
}

/// Time spent in one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    /// Cycles derived from the job trace.
    pub cycles: u64,
    pub seconds: f64,
    /// User bytes sorted per second over this phase.
    pub gbps: f64,
    /// Cycles from the cycle simulator, when it ran.
    pub simulated_cycles: Option<u64>,
}

impl PhaseTiming {
    pub fn new(cycles: u64, simulated_cycles: Option<u64>, records: u64, clock_hz: f64) -> Self {
        let seconds = cycles as f64 / clock_hz;
        let gbps = if seconds > 0.0 { records as f64 * Record::BYTES as f64 / seconds / 1e9 } else { 0.0 };
        Self { cycles, seconds, gbps, simulated_cycles }
    }

    /// Relative deviation of simulated from modeled cycles.
    pub fn skew(&self) -> Option<f64> {
        self.simulated_cycles
            .filter(|_| self.cycles > 0)
            .map(|s| s as f64 / self.cycles as f64 - 1.0)
    }
}

/// Cycles for one job: its records at the lower of the memory rate and the
/// tree's capacity with `feeds` active leaves, plus a reset.
fn job_cycles(tree: &Topology, mem_rate: f64, reset: u64, records: u64, active: &[bool]) -> f64 {
    let rate = mem_rate.min(tree.throughput_cap(active));
    records as f64 / rate + reset as f64
}

fn spread_mask(feeds: usize, leaves: usize) -> Vec<bool> {
    let mut active = vec![false; leaves];
    for leaf in spread_leaves(feeds, leaves) {
        active[leaf] = true;
    }
    active
}

/// Phase-1 cycles of one tree for the given per-pass traces. Trees run in
/// parallel on identical shapes, so this is also the phase time.
pub fn model_phase1(traces: &[Trace], tree: &Topology, params: &TimingParams) -> u64 {
    let total: f64 = traces
        .iter()
        .flat_map(|t| &t.groups)
        .map(|g| {
            let active = spread_mask(g.feeds, tree.leaves());
            g.count as f64 * job_cycles(tree, params.phase1_mem_rate, params.phase1_reset, g.records, &active)
        })
        .sum();
    total.ceil() as u64
}

/// Leaves of the wide tree streaming at the same time. With tuning every
/// sub-run overlaps in key range; without it a channel's sub-runs are
/// consecutive, so only one per channel is consumed at a time.
pub fn phase2_active_leaves(plan: &SortPlan, leaves: usize) -> Vec<bool> {
    (0..leaves)
        .map(|leaf| plan.tuned || leaf % plan.subruns_per_channel == 0)
        .collect()
}

pub fn model_phase2(plan: &SortPlan, wide: &Topology, params: &TimingParams) -> u64 {
    let active = phase2_active_leaves(plan, wide.leaves());
    job_cycles(wide, params.phase2_mem_rate, params.phase2_reset, plan.padded, &active).ceil() as u64
}

/// Timing of a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub phase1: PhaseTiming,
    pub phase2: PhaseTiming,
    /// Harmonic combination of the two phases.
    pub overall_gbps: f64,
}

impl RunTiming {
    pub fn new(phase1: PhaseTiming, phase2: PhaseTiming) -> Self {
        let overall_gbps = crate::analytics::perf_overall(phase1.gbps, phase2.gbps);
        Self { phase1, phase2, overall_gbps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge_tree::{build_tree, MergeTree};
    use crate::sort_engine::plan::{plan_sort, JobGroup};

    fn params() -> TimingParams {
        TimingParams::new(&SortConfig::default(), &HbmTopology::default(), &BandwidthProfile::default()).unwrap()
    }

    #[test]
    fn default_rates() {
        let p = params();
        assert!((p.phase1_mem_rate - 13.125e9 / (8.0 * 214e6)).abs() < 1e-9);
        assert!((p.phase2_mem_rate - 4.0 * 13.125e9 / (8.0 * 214e6)).abs() < 1e-9);
        assert_eq!((p.phase1_reset, p.phase2_reset), (8, 12));
    }

    #[test]
    fn job_cost_arithmetic() {
        let tree = build_tree(8, 16).unwrap().topology();
        let p = TimingParams { phase1_mem_rate: 100.0, phase1_reset: 3, ..params() };
        // Eight spread feeds still cover every bottom unit: capacity 8.
        let t = Trace { groups: vec![JobGroup { records: 800, feeds: 8, count: 2 }] };
        assert_eq!(model_phase1(&[t], &tree, &p), 2 * (100 + 3));
        // Two feeds land under different root children: capacity 2.
        let t = Trace { groups: vec![JobGroup { records: 800, feeds: 2, count: 1 }] };
        assert_eq!(model_phase1(&[t], &tree, &p), 400 + 3);
    }

    #[test]
    fn untuned_phase2_halves_capacity() {
        let topo = HbmTopology::default();
        let cfg = SortConfig::default();
        let plan = plan_sort(&SortConfig { tuning: false, ..cfg.clone() }, &topo).unwrap();
        let sub = std::sync::Arc::new(build_tree(8, 16).unwrap());
        let wide = crate::merge_tree::compose_wide_tree([sub.clone(), sub.clone(), sub.clone(), sub]).unwrap();
        let active = phase2_active_leaves(&plan, 64);
        assert_eq!(wide.topology().throughput_cap(&active), 16.0);
        let tuned = plan_sort(&cfg, &topo).unwrap();
        assert_eq!(wide.topology().throughput_cap(&phase2_active_leaves(&tuned, 64)), 32.0);
    }
}
