use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::merge_net::mms_stats;
use crate::merge_tree::{build_tree, compose_wide_tree};
use crate::sort_engine::SortConfig;

/// LUTs in one leaf buffer row set: 512 bits wide, one LUT per bit per 32
/// rows of shift register.
const BUFFER_WIDTH_BITS: u64 = 512;
const SRL_DEPTH: u64 = 32;

/// Width of one memory beat in bytes.
const BEAT_BYTES: u64 = 64;

/// Tree LUTs measured for the default (8, 16) tree with 1 KB bursts.
pub const REFERENCE_TREE_LUTS: u64 = 28_788;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceModelParams {
    /// Scale of the `p log^2 p` unit cost in [`analytic_l`].
    pub c_unit: f64,
    /// L(1).
    pub base: u64,
    pub lut_per_comparator: f64,
    pub axi_converter_luts: u64,
    pub axi_converter_ffs: u64,
}

impl Default for ResourceModelParams {
    fn default() -> Self {
        Self { c_unit: 1.0, base: 0, lut_per_comparator: 135.0, axi_converter_luts: 5000, axi_converter_ffs: 6000 }
    }
}

/// Comparators of one rate-`p` merge unit.
pub fn unit_cost(p: usize) -> Result<u64> {
    Ok(mms_stats(p)?.comparators as u64)
}

/// L(p): comparators of a full `(p, p)` tree, counted from its units.
pub fn enumerated_l(p: usize, params: &ResourceModelParams) -> Result<u64> {
    if p == 1 {
        return Ok(params.base);
    }
    Ok(build_tree(p, p)?.comparators() as u64 + params.base * p as u64)
}

/// L(p) from the recurrence with a `c · p log^2 p` unit cost.
pub fn analytic_l(p: u64, params: &ResourceModelParams) -> f64 {
    if p <= 1 {
        return params.base as f64;
    }
    let lg = (p as f64).log2();
    2.0 * analytic_l(p / 2, params) + params.c_unit * p as f64 * lg * lg
}

/// LUTs of a shift-register buffer holding two bursts.
pub fn buffer_luts(burst_bytes: usize) -> u64 {
    let rows = (2 * burst_bytes as u64).div_ceil(BEAT_BYTES);
    BUFFER_WIDTH_BITS * rows.div_ceil(SRL_DEPTH)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub comparators: u64,
    pub comparator_luts: u64,
    pub buffer_luts: u64,
    pub luts: u64,
    pub ffs: u64,
}

/// Comparator and LUT estimate for one `(p, l)` tree with leaf buffers
/// sized for `burst` bytes.
pub fn resource_tree(p: usize, l: usize, burst: usize, params: &ResourceModelParams) -> Result<ResourceEstimate> {
    let comparators = build_tree(p, l)?.comparators() as u64;
    let comparator_luts = (comparators as f64 * params.lut_per_comparator).round() as u64;
    let buffer_luts = l as u64 * buffer_luts(burst);
    Ok(ResourceEstimate { comparators, comparator_luts, buffer_luts, luts: comparator_luts + buffer_luts, ffs: 0 })
}

/// LUTs per comparator that reproduce `measured` tree LUTs.
pub fn calibrate_lut_per_comparator(measured: u64, p: usize, l: usize, burst: usize) -> Result<f64> {
    let comparators = build_tree(p, l)?.comparators() as u64;
    let buffers = l as u64 * buffer_luts(burst);
    Ok((measured.saturating_sub(buffers) as f64 / comparators as f64).floor())
}

/// Whole-design estimate: phase-1 trees (the reused ones with phase-2
/// bursts), the extra phase-2 units and one AXI converter per tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResources {
    pub plain_tree: ResourceEstimate,
    pub reused_tree: ResourceEstimate,
    pub extra_comparators: u64,
    pub extra_luts: u64,
    pub axi_luts: u64,
    pub axi_ffs: u64,
    pub total_luts: u64,
}

pub fn system_resources(cfg: &SortConfig, params: &ResourceModelParams) -> Result<SystemResources> {
    let (p, l) = (cfg.phase1_rate, cfg.phase1_leaves);
    let plain_tree = resource_tree(p, l, cfg.burst_phase1, params)?;
    let reused_tree = resource_tree(p, l, cfg.burst_phase2, params)?;
    let sub = std::sync::Arc::new(build_tree(p, l)?);
    let extra_comparators = compose_wide_tree([sub.clone(), sub.clone(), sub.clone(), sub])?.extra_comparators() as u64;
    let extra_luts = (extra_comparators as f64 * params.lut_per_comparator).round() as u64;
    let k = cfg.trees as u64;
    let axi_luts = k * params.axi_converter_luts;
    let axi_ffs = k * params.axi_converter_ffs;
    let total_luts = (k - 4) * plain_tree.luts + 4 * reused_tree.luts + extra_luts + axi_luts;
    Ok(SystemResources { plain_tree, reused_tree, extra_comparators, extra_luts, axi_luts, axi_ffs, total_luts })
}
