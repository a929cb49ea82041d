//! Report schemas. JSON keys follow field declaration order, so output is
//! stable across runs; bump [`REPORT_VERSION`] when a field changes.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::analytics::{BurstSelection, FloorplanProblem, FloorplanSolution, ResourceEstimate, SystemResources};
use crate::hbm::HbmTopology;
use crate::sort_engine::{Mode, PhaseTiming, SortConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    /// Nothing to check, as in a dry run.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn passed(detail: impl Into<String>) -> Self {
        Self { status: Status::Passed, detail: detail.into() }
    }

    pub fn failed(detail: impl Into<String>) -> Self {
        Self { status: Status::Failed, detail: detail.into() }
    }

    pub fn skipped(detail: impl Into<String>) -> Self {
        Self { status: Status::Skipped, detail: detail.into() }
    }

    pub fn ok(&self) -> bool {
        self.status != Status::Failed
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.status {
            Status::Passed => "PASS",
            Status::Failed => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "{s} ({})", self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub cycles: u64,
    pub simulated_cycles: Option<u64>,
    /// Simulated over modeled cycles, minus one.
    pub skew: Option<f64>,
    pub seconds: f64,
    pub gbps: f64,
}

impl From<PhaseTiming> for PhaseReport {
    fn from(t: PhaseTiming) -> Self {
        Self { cycles: t.cycles, simulated_cycles: t.simulated_cycles, skew: t.skew(), seconds: t.seconds, gbps: t.gbps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub mode: Mode,
    pub dry_run: bool,
    pub seed: Option<u64>,
    pub config: SortConfig,
    pub hbm: HbmTopology,
    pub records: u64,
    pub padded_records: u64,
    pub phase1_passes: usize,
    pub phase1: PhaseReport,
    pub phase2: PhaseReport,
    pub overall_gbps: f64,
    /// Memory traffic phase 1 sustains: its throughput times passes times
    /// two (every pass reads and writes).
    pub phase1_memory_gbps: f64,
    pub verdict: Verdict,
}

fn phase_line(out: &mut String, name: &str, p: &PhaseReport) {
    let _ = write!(out, "  {name:<8} {:>14} cycles  {:>10.6} s  {:>7.2} GB/s", p.cycles, p.seconds, p.gbps);
    if let (Some(sim), Some(skew)) = (p.simulated_cycles, p.skew) {
        let _ = write!(out, "  (simulated {sim}, skew {:+.3})", skew);
    }
    out.push('\n');
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = if self.dry_run { "dry run" } else { "full run" };
        let _ = writeln!(s, "sort report v{} ({mode}, {:?} mode)", self.version, self.mode);
        let _ = writeln!(s, "  records  {} (padded {})", self.records, self.padded_records);
        let _ = writeln!(s, "  passes   {} in phase 1", self.phase1_passes);
        phase_line(&mut s, "phase 1", &self.phase1);
        phase_line(&mut s, "phase 2", &self.phase2);
        let _ = writeln!(s, "  overall  {:.2} GB/s", self.overall_gbps);
        let _ = writeln!(s, "  memory   {:.1} GB/s consumed by phase 1", self.phase1_memory_gbps);
        let _ = writeln!(s, "  verdict  {}", self.verdict);
        s
    }
}

/// Throughput from the closed-form equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationRates {
    pub phase1_passes: u32,
    pub phase1_gbps: f64,
    pub phase2_gbps: f64,
    pub overall_gbps: f64,
}

/// Composition of externally measured phase rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredComposition {
    pub phase1_gbps: f64,
    pub phase2_gbps: f64,
    pub phase1_passes: u32,
    pub overall_gbps: f64,
    pub phase1_memory_gbps: f64,
}

/// One big tree over all data against the two-phase design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleTreeComparison {
    pub leaves: u64,
    pub throughput_gbps: f64,
    pub passes: u32,
    pub single_tree_gbps: f64,
    pub two_phase_gbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub p: usize,
    pub l: usize,
    pub burst: usize,
    pub estimate: ResourceEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub version: u32,
    pub config: SortConfig,
    pub equations: EquationRates,
    pub measured: MeasuredComposition,
    pub single_tree: SingleTreeComparison,
    /// Cycle-model timing of the configured size, from the plan.
    pub simulated: RunReport,
    pub trees: Vec<ResourceRow>,
    pub calibrated_lut_per_comparator: f64,
    pub system: SystemResources,
    pub floorplan_problem: FloorplanProblem,
    pub floorplan: FloorplanSolution,
    pub bursts: BurstSelection,
}

impl ModelReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.equations;
        let m = &self.measured;
        let t = &self.single_tree;
        let _ = writeln!(s, "model report v{} for {} records", self.version, self.config.records);
        let _ = writeln!(
            s,
            "equations   phase 1 {:.2} GB/s ({} passes), phase 2 {:.2} GB/s, overall {:.2} GB/s",
            e.phase1_gbps, e.phase1_passes, e.phase2_gbps, e.overall_gbps
        );
        let _ = writeln!(
            s,
            "measured    {:.1} and {:.1} GB/s give {:.2} GB/s overall; phase 1 moves {:.0} GB/s over {} passes",
            m.phase1_gbps, m.phase2_gbps, m.overall_gbps, m.phase1_memory_gbps, m.phase1_passes
        );
        let _ = writeln!(
            s,
            "single tree {} leaves at {:.1} GB/s: {} passes, {:.2} GB/s vs {:.2} GB/s two-phase",
            t.leaves, t.throughput_gbps, t.passes, t.single_tree_gbps, t.two_phase_gbps
        );
        let r = &self.simulated;
        let _ = writeln!(
            s,
            "cycle model phase 1 {:.2} GB/s ({} passes), phase 2 {:.2} GB/s, overall {:.2} GB/s",
            r.phase1.gbps, r.phase1_passes, r.phase2.gbps, r.overall_gbps
        );
        let _ = writeln!(s, "trees       {:>4} {:>4} {:>6} {:>11} {:>9}", "p", "l", "burst", "comparators", "LUTs");
        for row in &self.trees {
            let _ = writeln!(
                s,
                "            {:>4} {:>4} {:>6} {:>11} {:>9}",
                row.p, row.l, row.burst, row.estimate.comparators, row.estimate.luts
            );
        }
        let _ = writeln!(
            s,
            "system      {} LUTs ({:.0} LUTs per comparator)",
            self.system.total_luts, self.calibrated_lut_per_comparator
        );
        let _ = writeln!(
            s,
            "floorplan   u1 = {}, u2 = {} ({} trees)",
            self.floorplan.u1, self.floorplan.u2, self.floorplan.objective
        );
        let fmt_burst = |c: Option<crate::analytics::BurstChoice>| c.map_or("none".to_owned(), |c| format!("{} B", c.burst));
        let _ = writeln!(
            s,
            "bursts      phase 1 {}, phase 2 {}",
            fmt_burst(self.bursts.phase1),
            fmt_burst(self.bursts.phase2)
        );
        for w in &self.bursts.warnings {
            let _ = writeln!(s, "warning     {w}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub records: u64,
    pub bytes: u64,
    pub phase1_passes: usize,
    pub phase1_gbps: f64,
    pub phase2_gbps: f64,
    pub overall_gbps: f64,
    pub materialized: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstRow {
    pub burst: usize,
    pub efficiency: f64,
    pub overall_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: u32,
    pub rows: Vec<SweepRow>,
    /// Phase-2 burst size against overall throughput at the largest size.
    pub phase2_bursts: Vec<BurstRow>,
}

impl SweepReport {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.verdict.ok())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sweep report v{}", self.version);
        let _ = writeln!(
            s,
            "{:>12} {:>12} {:>6} {:>9} {:>9} {:>9}  check",
            "records", "bytes", "passes", "p1 GB/s", "p2 GB/s", "GB/s"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>12} {:>12} {:>6} {:>9.2} {:>9.2} {:>9.2}  {}",
                r.records, r.bytes, r.phase1_passes, r.phase1_gbps, r.phase2_gbps, r.overall_gbps, r.verdict
            );
        }
        let _ = writeln!(s, "phase-2 burst   efficiency   overall GB/s");
        for b in &self.phase2_bursts {
            let _ = writeln!(s, "{:>11} B {:>12.2} {:>14.2}", b.burst, b.efficiency, b.overall_gbps);
        }
        s
    }
}

/// Result of checking a sorted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub version: u32,
    pub records: u64,
    pub verdict: Verdict,
}
