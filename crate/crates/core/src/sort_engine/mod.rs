//! Two-phase sort: sixteen trees sort their channel pairs in parallel, then
//! four of them are joined into one wide tree that merges everything in a
//! single pass and writes batches round-robin over freed channels.

mod output;
mod plan;
mod timing;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbm::{BandwidthProfile, ChannelStore, HbmTopology};
use crate::merge_net::{first_unsorted, Record};
use crate::merge_tree::{
    build_tree, compose_wide_tree, spread_leaves, CycleSim, FeedRate, MergeTree, Topology, TreeRunner, TreeSpec,
    WideTreeSpec,
};

pub use output::{fingerprint, reconstruct_output, verify_permutation, BatchedOutput};
pub use plan::{plan_sort, Job, JobGroup, PassPlan, SortConfig, SortPlan, Trace};
pub use timing::{model_phase1, model_phase2, phase2_active_leaves, PhaseTiming, RunTiming, TimingParams};

/// Sentinel appended to reach the padded size. Sorts after every real
/// record with the same key because it enters last and merges are stable.
pub const PAD_RECORD: Record = Record::new(u32::MAX, u32::MAX);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Merge decisions only.
    #[default]
    Functional,
    /// Same merges driven by the cycle simulator.
    Cycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    /// Worker threads for phase 1; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { mode: Mode::Functional, threads: 0 }
    }
}

pub fn phase1_tree(cfg: &SortConfig) -> Result<TreeSpec> {
    build_tree(cfg.phase1_rate, cfg.phase1_leaves)
}

pub fn phase2_tree(cfg: &SortConfig) -> Result<WideTreeSpec> {
    let sub = Arc::new(phase1_tree(cfg)?);
    compose_wide_tree([sub.clone(), sub.clone(), sub.clone(), sub])
}

/// Pads the input and places tree `t`'s share in channel `2t`.
pub fn distribute_input(plan: &SortPlan, input: &[Record], topo: &HbmTopology) -> Result<ChannelStore> {
    if input.len() as u64 != plan.records {
        return Err(Error::LengthMismatch { expected: plan.records, actual: input.len() as u64 });
    }
    let mut store = ChannelStore::new(topo);
    let n = plan.channel_records as usize;
    let trees = (plan.padded / plan.channel_records) as usize;
    for t in 0..trees {
        let lo = (t * n).min(input.len());
        let hi = ((t + 1) * n).min(input.len());
        store.append(2 * t, &input[lo..hi])?;
        let pads = n - (hi - lo);
        if pads > 0 {
            store.append(2 * t, &vec![PAD_RECORD; pads])?;
        }
    }
    Ok(store)
}

/// Feeds for one job placed on evenly spread leaves.
fn job_feeds<'a>(src: &'a [Record], job: &Job, run_in: u64, leaves: usize) -> Vec<&'a [Record]> {
    let window = &src[job.start as usize..(job.start + job.records) as usize];
    let mut feeds = vec![&[][..]; leaves];
    for (run, leaf) in window.chunks(run_in as usize).zip(spread_leaves(job.feeds, leaves)) {
        feeds[leaf] = run;
    }
    feeds
}

enum Driver {
    Functional(TreeRunner),
    Cycles(CycleSim, Vec<u64>),
}

impl Driver {
    fn new(tree: &impl MergeTree, cfg: &SortConfig, mode: Mode) -> Result<Self> {
        Ok(match mode {
            Mode::Functional => Driver::Functional(TreeRunner::new(tree)?),
            Mode::Cycles => {
                let sim = CycleSim::new(tree)?.with_fifo_blocks(cfg.fifo_blocks);
                let zeros = vec![0; sim.topology().leaves()];
                Driver::Cycles(sim, zeros)
            }
        })
    }

    /// Merges `feeds` into `out`; returns simulated cycles in cycles mode.
    fn merge(&mut self, feeds: &[&[Record]], rate: f64, out: &mut Vec<Record>) -> Result<u64> {
        match self {
            Driver::Functional(runner) => runner.merge_into(feeds, out).map(|()| 0),
            Driver::Cycles(sim, zeros) => {
                let pass = sim.run(feeds, zeros, FeedRate::Shared(rate))?;
                out.extend_from_slice(&pass.output);
                Ok(pass.cycles)
            }
        }
    }
}

/// What phase 1 did on one channel pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeRun {
    pub traces: Vec<Trace>,
    pub simulated_cycles: u64,
}

fn run_tree(
    cfg: &SortConfig,
    plan: &SortPlan,
    tree: &TreeSpec,
    pair: &mut [Vec<Record>],
    mode: Mode,
    mem_rate: f64,
) -> Result<TreeRun> {
    let mut driver = Driver::new(tree, cfg, mode)?;
    let mut traces = Vec::with_capacity(plan.passes.len());
    let mut cycles = 0;
    for (i, pass) in plan.passes.iter().enumerate() {
        let (even, odd) = pair.split_at_mut(1);
        let (src, dst) = if i % 2 == 0 { (&mut even[0], &mut odd[0]) } else { (&mut odd[0], &mut even[0]) };
        dst.clear();
        dst.reserve(src.len());
        let mut trace = Trace::default();
        for job in pass.jobs(src.len() as u64) {
            let feeds = job_feeds(src, &job, pass.run_in, cfg.phase1_leaves);
            cycles += driver.merge(&feeds, mem_rate, dst)?;
            trace.push(job.records, job.feeds);
        }
        src.clear();
        traces.push(trace);
    }
    Ok(TreeRun { traces, simulated_cycles: cycles })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every phase-1 pass on every tree. Returns one result per tree.
pub fn run_phase1(
    cfg: &SortConfig,
    plan: &SortPlan,
    store: &mut ChannelStore,
    opts: RunOptions,
    params: &TimingParams,
) -> Result<Vec<TreeRun>> {
    let tree = phase1_tree(cfg)?;
    let channels = &mut store.channels_mut()[..2 * cfg.trees];
    with_pool(opts.threads, || {
        channels
            .par_chunks_mut(2)
            .map(|pair| run_tree(cfg, plan, &tree, pair, opts.mode, params.phase1_mem_rate))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Phase-2 feeds in leaf order, read from the channels phase 1 wrote.
pub fn phase2_feeds<'a>(plan: &SortPlan, store: &'a ChannelStore) -> Vec<&'a [Record]> {
    let trees = plan.write_order.len();
    let sub = plan.subrun as usize;
    (0..trees)
        .flat_map(|t| {
            let ch = store.read(plan.phase1_channel(t));
            (0..plan.subruns_per_channel).map(move |s| ch.get(s * sub..(s + 1) * sub).unwrap_or(&[]))
        })
        .collect()
}

/// Merges the phase-2 feeds in one pass and cuts the root stream into
/// batches. Returns the batches and, in cycles mode, simulated cycles.
pub fn run_phase2_feeds(
    cfg: &SortConfig,
    plan: &SortPlan,
    feeds: &[&[Record]],
    mode: Mode,
    params: &TimingParams,
) -> Result<(BatchedOutput, Option<u64>)> {
    if feeds.len() != cfg.phase2_leaves {
        return Err(Error::FeedCount { expected: cfg.phase2_leaves, actual: feeds.len() });
    }
    for (leaf, feed) in feeds.iter().enumerate() {
        if let Some(index) = first_unsorted(feed) {
            return Err(Error::UnsortedFeed { leaf, index });
        }
    }
    let wide = phase2_tree(cfg)?;
    let total: usize = feeds.iter().map(|f| f.len()).sum();
    let mut stream = Vec::with_capacity(total);
    let cycles = Driver::new(&wide, cfg, mode)?.merge(feeds, params.phase2_mem_rate, &mut stream)?;
    let channels = (0..plan.write_order.len()).map(|b| plan.batch_channel(b)).collect();
    let padding = plan.padding().min(total as u64);
    let out = BatchedOutput::from_stream(&stream, plan.batch_records, channels, padding);
    Ok((out, (mode == Mode::Cycles).then_some(cycles)))
}

/// Phase 2 over the channel store; batches are written into the freed
/// channels and then collected.
pub fn run_phase2(
    cfg: &SortConfig,
    plan: &SortPlan,
    store: &mut ChannelStore,
    mode: Mode,
    params: &TimingParams,
) -> Result<(BatchedOutput, Option<u64>)> {
    let (mut out, cycles) = run_phase2_feeds(cfg, plan, &phase2_feeds(plan, store), mode, params)?;
    for (slot, &ch) in out.channels.iter().enumerate() {
        store.append(ch, &out.streams[slot])?;
    }
    for (slot, &ch) in out.channels.iter().enumerate() {
        out.streams[slot] = store.take(ch);
    }
    Ok((out, cycles))
}

/// Everything a full run produced.
#[derive(Debug, Clone)]
pub struct SortOutcome {
    pub output: Vec<Record>,
    pub plan: SortPlan,
    /// Per-pass job traces observed on tree 0.
    pub traces: Vec<Trace>,
    pub timing: RunTiming,
}

/// Sorts `input` end to end.
pub fn sort_records(
    cfg: &SortConfig,
    topo: &HbmTopology,
    profile: &BandwidthProfile,
    input: &[Record],
    opts: RunOptions,
) -> Result<SortOutcome> {
    let cfg = SortConfig { records: input.len() as u64, ..cfg.clone() };
    let plan = plan_sort(&cfg, topo)?;
    let params = TimingParams::new(&cfg, topo, profile)?;
    let mut store = distribute_input(&plan, input, topo)?;
    let runs = run_phase1(&cfg, &plan, &mut store, opts, &params)?;
    let (batched, sim2) = run_phase2(&cfg, &plan, &mut store, opts.mode, &params)?;
    let output = reconstruct_output(&batched)?;

    let traces = runs[0].traces.clone();
    let sim1 = (opts.mode == Mode::Cycles).then(|| runs.iter().map(|r| r.simulated_cycles).max().unwrap_or(0));
    let timing = timing_from_traces(&cfg, &plan, &traces, &params, sim1, sim2)?;
    Ok(SortOutcome { output, plan, traces, timing })
}

fn timing_from_traces(
    cfg: &SortConfig,
    plan: &SortPlan,
    traces: &[Trace],
    params: &TimingParams,
    sim1: Option<u64>,
    sim2: Option<u64>,
) -> Result<RunTiming> {
    let c1 = model_phase1(traces, &phase1_tree(cfg)?.topology(), params);
    let c2 = model_phase2(plan, &phase2_tree(cfg)?.topology(), params);
    Ok(RunTiming::new(
        PhaseTiming::new(c1, sim1, plan.records, params.clock_hz),
        PhaseTiming::new(c2, sim2, plan.records, params.clock_hz),
    ))
}

/// Timing from the plan alone; no records are allocated.
pub fn dry_run(cfg: &SortConfig, topo: &HbmTopology, profile: &BandwidthProfile) -> Result<(SortPlan, RunTiming)> {
    let plan = plan_sort(cfg, topo)?;
    let params = TimingParams::new(cfg, topo, profile)?;
    let timing = timing_from_traces(cfg, &plan, &plan.traces(), &params, None, None)?;
    Ok((plan, timing))
}

/// The topology used by phase 1, for callers that only need the shape.
pub fn phase1_topology(cfg: &SortConfig) -> Result<Topology> {
    Ok(phase1_tree(cfg)?.topology())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shuffled(n: u32, seed: u64) -> Vec<Record> {
        let mut keys: Vec<u32> = (1..=n).collect();
        let mut x = seed | 1;
        for i in (1..keys.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            keys.swap(i, (x % (i as u64 + 1)) as usize);
        }
        keys.into_iter().map(|k| Record::new(k, !k)).collect()
    }

    fn run(n: u32, mode: Mode, cfg: SortConfig) -> SortOutcome {
        let input = shuffled(n, 7);
        sort_records(&cfg, &HbmTopology::default(), &BandwidthProfile::default(), &input, RunOptions { mode, threads: 1 })
            .unwrap()
    }

    #[test]
    fn sorts_small_inputs() {
        for n in [1, 5, 1000, 1024, 4096, 5000] {
            let out = run(n, Mode::Functional, SortConfig::default());
            verify_permutation(&out.output, u64::from(n)).unwrap();
        }
    }

    #[test]
    fn observed_passes_match_plan() {
        let out = run(1 << 14, Mode::Functional, SortConfig::default());
        assert_eq!(out.traces.len(), out.plan.phase1_passes());
        assert_eq!(out.traces, out.plan.traces());
    }

    #[test]
    fn cycles_mode_agrees_with_functional() {
        let f = run(4096, Mode::Functional, SortConfig::default());
        let c = run(4096, Mode::Cycles, SortConfig::default());
        assert_eq!(f.output, c.output);
        assert_eq!(f.timing.phase1.cycles, c.timing.phase1.cycles);
        assert!(c.timing.phase1.simulated_cycles.unwrap() > 0);
        assert!(c.timing.phase2.simulated_cycles.unwrap() > 0);
        assert!(f.timing.phase1.simulated_cycles.is_none());
    }

    #[test]
    fn untuned_still_sorts() {
        let out = run(1 << 12, Mode::Functional, SortConfig { tuning: false, ..SortConfig::default() });
        verify_permutation(&out.output, 1 << 12).unwrap();
    }

    #[test]
    fn dry_run_matches_full_run() {
        let cfg = SortConfig::default().with_records(1 << 14);
        let full = run(1 << 14, Mode::Functional, cfg.clone());
        let (_, dry) = dry_run(&cfg, &HbmTopology::default(), &BandwidthProfile::default()).unwrap();
        assert_eq!(full.timing, dry);
    }

    #[test]
    fn phase2_checks_feeds() {
        let cfg = SortConfig::default().with_records(1024);
        let topo = HbmTopology::default();
        let plan = plan_sort(&cfg, &topo).unwrap();
        let params = TimingParams::new(&cfg, &topo, &BandwidthProfile::default()).unwrap();
        let few: Vec<&[Record]> = vec![&[]; 3];
        assert!(matches!(
            run_phase2_feeds(&cfg, &plan, &few, Mode::Functional, &params),
            Err(Error::FeedCount { expected: 64, actual: 3 })
        ));
        let bad = [Record::new(2, 0), Record::new(1, 0)];
        let mut feeds: Vec<&[Record]> = vec![&[]; 64];
        feeds[5] = &bad;
        assert!(matches!(
            run_phase2_feeds(&cfg, &plan, &feeds, Mode::Functional, &params),
            Err(Error::UnsortedFeed { leaf: 5, index: 1 })
        ));
    }
}
