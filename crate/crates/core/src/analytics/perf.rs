use serde::{Deserialize, Serialize};

/// Inputs shared by the throughput formulas. Bandwidths are bytes/s of
/// write traffic: half of what the memory moves, since every pass reads
/// as much as it writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfModelInput {
    pub records: u64,
    pub leaves: u64,
    pub memory_bw: f64,
    pub channel_bw: f64,
    pub trees: u64,
    /// Phase-2 root rate in records per cycle.
    pub phase2_rate: f64,
    pub clock_hz: f64,
    pub record_bytes: u64,
}

impl Default for PerfModelInput {
    fn default() -> Self {
        Self {
            records: 1 << 29,
            leaves: 16,
            memory_bw: 32e9,
            channel_bw: 420e9 / 32.0,
            trees: 16,
            phase2_rate: 32.0,
            clock_hz: 214e6,
            record_bytes: 8,
        }
    }
}

/// Smallest `j` with `l^j >= n`, i.e. the ceiling of log base `l` of `n`.
pub fn passes(n: u64, l: u64) -> u32 {
    assert!(l >= 2, "a merge tree needs at least two leaves");
    let mut reach = 1u64;
    let mut j = 0;
    while reach < n {
        reach = reach.saturating_mul(l);
        j += 1;
    }
    j
}

/// One tree using the whole memory: its bandwidth divided by the pass count.
pub fn perf_single_tree(inp: &PerfModelInput) -> f64 {
    inp.memory_bw / f64::from(passes(inp.records, inp.leaves).max(1))
}

/// `k` trees, each on one channel, sorting `N/k` records apiece.
pub fn perf_phase1(inp: &PerfModelInput) -> f64 {
    perf_phase1_with_passes(inp, passes(inp.records / inp.trees, inp.leaves).max(1))
}

/// Same as [`perf_phase1`] with an externally supplied pass count, such as
/// the tuned schedule's.
pub fn perf_phase1_with_passes(inp: &PerfModelInput, passes: u32) -> f64 {
    inp.trees as f64 * inp.channel_bw / f64::from(passes.max(1))
}

/// Phase 2 is one pass bounded by the root rate.
pub fn perf_phase2(inp: &PerfModelInput) -> f64 {
    inp.phase2_rate * inp.record_bytes as f64 * inp.clock_hz
}

/// Harmonic combination of two sequential phases.
pub fn perf_overall(beta1: f64, beta2: f64) -> f64 {
    1.0 / (1.0 / beta1 + 1.0 / beta2)
}

/// Memory bandwidth consumed by phase 1: every pass reads and writes all data.
pub fn bandwidth_accounting(beta1: f64, passes: u32) -> f64 {
    beta1 * f64::from(passes) * 2.0
}
