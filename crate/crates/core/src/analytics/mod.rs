//! Closed-form models: throughput, comparator and LUT cost, die
//! placement and burst sizing.

mod burst;
mod floorplan;
mod perf;
mod resource;

pub use burst::{select_burst_sizes, BurstChoice, BurstSelection, PEAK_THRESHOLD};
pub use floorplan::{floorplan_solve, FloorplanProblem, FloorplanSolution};
pub use perf::{
    bandwidth_accounting, passes, perf_overall, perf_phase1, perf_phase1_with_passes, perf_phase2, perf_single_tree,
    PerfModelInput,
};
pub use resource::{
    analytic_l, buffer_luts, calibrate_lut_per_comparator, enumerated_l, resource_tree, system_resources, unit_cost,
    ResourceEstimate, ResourceModelParams, SystemResources, REFERENCE_TREE_LUTS,
};
