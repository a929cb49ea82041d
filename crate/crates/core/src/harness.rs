//! Command implementations behind the `hbmsort` binary.

use std::path::Path;

use crate::analytics::{
    bandwidth_accounting, calibrate_lut_per_comparator, floorplan_solve, passes, perf_overall, perf_phase1_with_passes,
    perf_phase2, perf_single_tree, resource_tree, select_burst_sizes, system_resources, PerfModelInput,
    REFERENCE_TREE_LUTS,
};
use crate::config::Config;
use crate::dataset::{read_records, write_records, DatasetSpec};
use crate::error::Result;
use crate::hbm::{BandwidthProfile, Pattern};
use crate::merge_net::Record;
use crate::report::*;
use crate::sort_engine::{
    dry_run, fingerprint, plan_sort, sort_records, verify_permutation, RunOptions, RunTiming, SortConfig, SortPlan,
};

/// Leaves of the single large tree the two-phase design is compared with.
pub const SINGLE_TREE_LEAVES: u64 = 256;

pub fn cmd_gen(spec: &DatasetSpec, out: &Path) -> Result<()> {
    write_records(out, &spec.generate()?)
}

/// Sorted order plus an unchanged multiset.
pub fn check_sorted(input: &[Record], output: &[Record]) -> Verdict {
    if input.len() != output.len() {
        return Verdict::failed(format!("expected {} records, found {}", input.len(), output.len()));
    }
    if let Some(i) = output.windows(2).position(|w| w[1].key < w[0].key) {
        return Verdict::failed(format!("keys descend at index {}", i + 1));
    }
    if fingerprint(input) != fingerprint(output) {
        return Verdict::failed("output is not a permutation of the input");
    }
    Verdict::passed(format!("{} records sorted, multiset preserved", output.len()))
}

/// Output keys must be exactly `1..=n`.
pub fn check_permutation(output: &[Record], n: u64) -> Verdict {
    match verify_permutation(output, n) {
        Ok(()) => Verdict::passed(format!("keys are 1..={n} in order")),
        Err(e) => Verdict::failed(e.to_string()),
    }
}

fn run_report(
    cfg: &SortConfig,
    config: &Config,
    plan: &SortPlan,
    timing: &RunTiming,
    opts: RunOptions,
    verdict: Verdict,
) -> RunReport {
    let passes = plan.phase1_passes();
    RunReport {
        version: REPORT_VERSION,
        mode: opts.mode,
        dry_run: false,
        seed: None,
        config: cfg.clone(),
        hbm: config.hbm,
        records: plan.records,
        padded_records: plan.padded,
        phase1_passes: passes,
        phase1: timing.phase1.into(),
        phase2: timing.phase2.into(),
        overall_gbps: timing.overall_gbps,
        phase1_memory_gbps: bandwidth_accounting(timing.phase1.gbps, passes as u32),
        verdict,
    }
}

/// Sorts records in memory and checks the result.
pub fn sort_in_memory(
    config: &Config,
    input: &[Record],
    opts: RunOptions,
    seed: Option<u64>,
) -> Result<(Vec<Record>, RunReport)> {
    let profile = config.bandwidth_profile()?;
    let cfg = config.sort.clone().with_records(input.len() as u64);
    let outcome = sort_records(&cfg, &config.hbm, &profile, input, opts)?;
    let verdict = check_sorted(input, &outcome.output);
    let report = RunReport { seed, ..run_report(&cfg, config, &outcome.plan, &outcome.timing, opts, verdict) };
    Ok((outcome.output, report))
}

pub fn cmd_sort(config: &Config, input: &Path, output: Option<&Path>, opts: RunOptions) -> Result<RunReport> {
    let records = read_records(input)?;
    let (sorted, report) = sort_in_memory(config, &records, opts, None)?;
    if let Some(out) = output {
        write_records(out, &sorted)?;
    }
    Ok(report)
}

/// Timing for `config.sort.records` from the plan alone.
pub fn cmd_sort_dry(config: &Config, opts: RunOptions) -> Result<RunReport> {
    let profile = config.bandwidth_profile()?;
    let (plan, timing) = dry_run(&config.sort, &config.hbm, &profile)?;
    let verdict = Verdict::skipped("dry run: no records materialized");
    Ok(RunReport { dry_run: true, ..run_report(&config.sort, config, &plan, &timing, opts, verdict) })
}

/// Generates a seeded permutation, sorts it and checks the keys are `1..=N`.
pub fn sort_generated(config: &Config, records: u64, seed: u64, opts: RunOptions) -> Result<RunReport> {
    let input = DatasetSpec::permutation(records, seed).generate()?;
    let (sorted, mut report) = sort_in_memory(config, &input, opts, Some(seed))?;
    if report.verdict.ok() {
        report.verdict = check_permutation(&sorted, records);
    }
    Ok(report)
}

fn perf_input(config: &Config) -> PerfModelInput {
    let s = &config.sort;
    PerfModelInput {
        records: s.records,
        leaves: s.phase1_leaves as u64,
        channel_bw: config.hbm.channel_bandwidth,
        trees: s.trees as u64,
        phase2_rate: s.phase2_rate as f64,
        clock_hz: s.clock_hz,
        record_bytes: Record::BYTES as u64,
        ..PerfModelInput::default()
    }
}

/// One `leaves`-leaf tree running every pass at `throughput_gbps`,
/// against the two-phase composition of the measured rates.
pub fn single_tree_comparison(config: &Config, leaves: u64) -> SingleTreeComparison {
    let m = &config.measured;
    let inp = PerfModelInput { leaves, memory_bw: m.phase2_gbps * 1e9, ..perf_input(config) };
    SingleTreeComparison {
        leaves,
        throughput_gbps: m.phase2_gbps,
        passes: passes(inp.records, leaves),
        single_tree_gbps: perf_single_tree(&inp) / 1e9,
        two_phase_gbps: perf_overall(m.phase1_gbps, m.phase2_gbps),
    }
}

pub fn cmd_model(config: &Config) -> Result<ModelReport> {
    let s = &config.sort;
    let profile = config.bandwidth_profile()?;
    let plan = plan_sort(s, &config.hbm)?;
    let inp = perf_input(config);
    let plan_passes = plan.phase1_passes() as u32;
    let p1 = perf_phase1_with_passes(&inp, plan_passes) / 1e9;
    let p2 = perf_phase2(&inp) / 1e9;
    let m = config.measured;

    let mut trees = Vec::new();
    let mut p = 1;
    while p <= s.phase1_leaves.min(s.phase1_rate * 2) {
        for burst in [s.burst_phase1, s.burst_phase2] {
            let estimate = resource_tree(p, s.phase1_leaves, burst, &config.resources)?;
            trees.push(ResourceRow { p, l: s.phase1_leaves, burst, estimate });
        }
        p *= 2;
    }
    trees.dedup();

    Ok(ModelReport {
        version: REPORT_VERSION,
        config: s.clone(),
        equations: EquationRates {
            phase1_passes: plan_passes,
            phase1_gbps: p1,
            phase2_gbps: p2,
            overall_gbps: perf_overall(p1, p2),
        },
        measured: MeasuredComposition {
            phase1_gbps: m.phase1_gbps,
            phase2_gbps: m.phase2_gbps,
            phase1_passes: m.phase1_passes,
            overall_gbps: perf_overall(m.phase1_gbps, m.phase2_gbps),
            phase1_memory_gbps: bandwidth_accounting(m.phase1_gbps, m.phase1_passes),
        },
        single_tree: single_tree_comparison(config, SINGLE_TREE_LEAVES),
        simulated: cmd_sort_dry(config, RunOptions::default())?,
        trees,
        calibrated_lut_per_comparator: calibrate_lut_per_comparator(
            REFERENCE_TREE_LUTS,
            s.phase1_rate,
            s.phase1_leaves,
            s.burst_phase1,
        )?,
        system: system_resources(s, &config.resources)?,
        floorplan_problem: config.floorplan,
        floorplan: floorplan_solve(&config.floorplan),
        bursts: select_burst_sizes(&profile, s.phase1_leaves, None),
    })
}

/// Overall modeled throughput for each phase-2 burst size in the profile.
pub fn phase2_burst_sweep(config: &Config, records: u64) -> Result<Vec<BurstRow>> {
    let profile: BandwidthProfile = config.bandwidth_profile()?;
    profile
        .bursts(Pattern::FOUR)
        .into_iter()
        .map(|burst| {
            let cfg = SortConfig { burst_phase2: burst, ..config.sort.clone().with_records(records) };
            let (_, timing) = dry_run(&cfg, &config.hbm, &profile)?;
            Ok(BurstRow { burst, efficiency: profile.efficiency(Pattern::FOUR, burst)?, overall_gbps: timing.overall_gbps })
        })
        .collect()
}

/// Throughput per data size. Sizes up to `sweep.materialize_limit` are
/// generated from `seed`, sorted and checked; larger ones use the plan.
pub fn cmd_sweep(config: &Config, seed: u64, opts: RunOptions) -> Result<SweepReport> {
    let sizes = config.sweep.sizes()?;
    let profile = config.bandwidth_profile()?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let materialized = n <= config.sweep.materialize_limit;
        let report = if materialized {
            sort_generated(config, n, seed, opts)?
        } else {
            let cfg = config.sort.clone().with_records(n);
            let (plan, timing) = dry_run(&cfg, &config.hbm, &profile)?;
            RunReport { dry_run: true, ..run_report(&cfg, config, &plan, &timing, opts, Verdict::skipped("modeled")) }
        };
        rows.push(SweepRow {
            records: n,
            bytes: n * Record::BYTES as u64,
            phase1_passes: report.phase1_passes,
            phase1_gbps: report.phase1.gbps,
            phase2_gbps: report.phase2.gbps,
            overall_gbps: report.overall_gbps,
            materialized,
            verdict: report.verdict,
        });
    }
    let largest = *sizes.last().expect("sizes is never empty");
    Ok(SweepReport { version: REPORT_VERSION, rows, phase2_bursts: phase2_burst_sweep(config, largest)? })
}

/// Checks a sorted file: against its input when given, otherwise as a
/// permutation of `1..=N`.
pub fn cmd_validate(sorted: &Path, input: Option<&Path>) -> Result<ValidationReport> {
    let output = read_records(sorted)?;
    let verdict = match input {
        Some(path) => check_sorted(&read_records(path)?, &output),
        None => check_permutation(&output, output.len() as u64),
    };
    Ok(ValidationReport { version: REPORT_VERSION, records: output.len() as u64, verdict })
}
