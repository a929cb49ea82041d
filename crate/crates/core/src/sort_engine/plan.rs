use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbm::{HbmTopology, MAX_BURST, MIN_BURST};
use crate::merge_net::{self, Record};

/// Parameters of one two-phase sort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SortConfig {
    /// Records to sort (N).
    pub records: u64,
    /// Phase-1 trees (k), one per channel pair.
    pub trees: usize,
    pub phase1_leaves: usize,
    pub phase1_rate: usize,
    pub phase2_leaves: usize,
    pub phase2_rate: usize,
    /// Phase-2 write batch in bytes.
    pub batch_bytes: usize,
    pub burst_phase1: usize,
    pub burst_phase2: usize,
    pub clock_hz: f64,
    /// Cap phase-1 runs so that every phase-2 leaf stays busy.
    pub tuning: bool,
    /// Idle cycles charged per merge job; defaults to the root unit's depth.
    pub reset_cycles: Option<u64>,
    /// Inter-level FIFO depth used by the cycle simulator.
    pub fifo_blocks: usize,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            records: 1 << 29,
            trees: 16,
            phase1_leaves: 16,
            phase1_rate: 8,
            phase2_leaves: 64,
            phase2_rate: 32,
            batch_bytes: 4096,
            burst_phase1: 1024,
            burst_phase2: 4096,
            clock_hz: 214e6,
            tuning: true,
            reset_cycles: None,
            fifo_blocks: crate::merge_tree::DEFAULT_FIFO_BLOCKS,
        }
    }
}

impl SortConfig {
    pub fn with_records(mut self, records: u64) -> Self {
        self.records = records;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !matches!(self.trees, 4 | 8 | 16) {
            return bad(format!("trees must be 4, 8 or 16, got {}", self.trees));
        }
        if !self.phase1_leaves.is_power_of_two() || self.phase1_leaves < 2 {
            return bad(format!("phase1_leaves {} is not a power of two >= 2", self.phase1_leaves));
        }
        merge_net::check_rate(self.phase1_rate)?;
        merge_net::check_rate(self.phase2_rate)?;
        if self.phase1_rate > self.phase1_leaves {
            return bad("phase1_rate may not exceed phase1_leaves".into());
        }
        if self.phase2_leaves != 4 * self.phase1_leaves || self.phase2_rate != 4 * self.phase1_rate {
            return bad("phase 2 reuses four phase-1 trees: phase2_leaves and phase2_rate must be 4x phase 1".into());
        }
        if !self.phase2_leaves.is_multiple_of(self.trees) {
            return bad(format!("phase2_leaves {} not divisible by trees {}", self.phase2_leaves, self.trees));
        }
        if self.batch_bytes == 0 || !self.batch_bytes.is_multiple_of(Record::BYTES) {
            return bad(format!("batch_bytes {} is not a positive multiple of 8", self.batch_bytes));
        }
        for burst in [self.burst_phase1, self.burst_phase2] {
            if !burst.is_power_of_two() || !(MIN_BURST..=MAX_BURST).contains(&burst) {
                return bad(format!("burst size {burst} outside 64..=4096 or not a power of two"));
            }
        }
        if self.clock_hz.is_nan() || self.clock_hz <= 0.0 {
            return bad("clock_hz must be positive".into());
        }
        if self.fifo_blocks == 0 {
            return bad("fifo_blocks must be at least 1".into());
        }
        Ok(())
    }

    /// Sorted sub-runs each channel hands to phase 2.
    pub fn subruns_per_channel(&self) -> usize {
        self.phase2_leaves / self.trees
    }

    /// Granularity N is padded to: one record per leaf of every final job.
    pub fn alignment(&self) -> u64 {
        (self.phase2_leaves * self.phase1_leaves) as u64
    }

    pub fn batch_records(&self) -> usize {
        self.batch_bytes / Record::BYTES
    }
}

/// One phase-1 pass over a channel of `n` records: the channel is cut into
/// segments, each segment into output windows of `run_out`, each window
/// into input runs of `run_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassPlan {
    pub segment: u64,
    pub run_in: u64,
    pub run_out: u64,
}

/// A merge job: one output run built from `feeds` input runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub start: u64,
    pub records: u64,
    pub feeds: usize,
}

/// `count` consecutive jobs of the same shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobGroup {
    pub records: u64,
    pub feeds: usize,
    pub count: u64,
}

impl PassPlan {
    /// Jobs of this pass over a channel of `n` records, in order.
    pub fn jobs(&self, n: u64) -> impl Iterator<Item = Job> + '_ {
        let seg = self.segment;
        (0..n.div_ceil(seg)).flat_map(move |s| {
            let s0 = s * seg;
            let s_len = seg.min(n - s0);
            (0..s_len.div_ceil(self.run_out)).map(move |w| {
                let start = w * self.run_out;
                let records = self.run_out.min(s_len - start);
                Job { start: s0 + start, records, feeds: records.div_ceil(self.run_in) as usize }
            })
        })
    }

    /// Same jobs as [`Self::jobs`], run-length encoded. Costs one step per
    /// segment rather than one per job.
    pub fn job_groups(&self, n: u64) -> Vec<JobGroup> {
        let mut trace = Trace::default();
        self.push_segments(&mut trace, self.segment, n / self.segment);
        self.push_segments(&mut trace, n % self.segment, 1);
        trace.groups
    }

    fn push_segments(&self, trace: &mut Trace, len: u64, count: u64) {
        let mut window = |len: u64, count: u64| {
            if len > 0 && count > 0 {
                trace.push_group(len, len.div_ceil(self.run_in) as usize, count);
            }
        };
        let (full, rest) = (len / self.run_out, len % self.run_out);
        if rest == 0 {
            window(self.run_out, full * count);
        } else {
            for _ in 0..count {
                window(self.run_out, full);
                window(rest, 1);
            }
        }
    }
}

/// Run-length encoded job shapes of one pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub groups: Vec<JobGroup>,
}

impl Trace {
    pub fn push(&mut self, records: u64, feeds: usize) {
        self.push_group(records, feeds, 1);
    }

    fn push_group(&mut self, records: u64, feeds: usize, count: u64) {
        match self.groups.last_mut() {
            Some(g) if g.records == records && g.feeds == feeds => g.count += count,
            _ => self.groups.push(JobGroup { records, feeds, count }),
        }
    }

    pub fn jobs(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn records(&self) -> u64 {
        self.groups.iter().map(|g| g.records * g.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortPlan {
    pub records: u64,
    /// Records after padding with maximum-key sentinels.
    pub padded: u64,
    /// Records each phase-1 tree owns.
    pub channel_records: u64,
    /// Records fed to each leaf in the tuned last pass.
    pub leaf_feed: u64,
    /// Length of each phase-2 feed.
    pub subrun: u64,
    pub passes: Vec<PassPlan>,
    pub tuned: bool,
    pub subruns_per_channel: usize,
    pub batch_records: usize,
    /// Tree whose write channel receives each batch, cycling in this order.
    pub write_order: Vec<usize>,
}

impl SortPlan {
    pub fn phase1_passes(&self) -> usize {
        self.passes.len()
    }

    pub fn padding(&self) -> u64 {
        self.padded - self.records
    }

    /// Phase-2 leaf for sub-run `s` of tree `t`'s channel.
    pub fn phase2_leaf(&self, tree: usize, subrun: usize) -> usize {
        tree * self.subruns_per_channel + subrun
    }

    /// Channel holding tree `t`'s data after phase 1; its input starts in
    /// channel `2t` and passes alternate within the pair.
    pub fn phase1_channel(&self, tree: usize) -> usize {
        2 * tree + self.passes.len() % 2
    }

    /// The other channel of the pair, free once phase 1 is done.
    pub fn phase2_write_channel(&self, tree: usize) -> usize {
        2 * tree + 1 - self.passes.len() % 2
    }

    /// Physical channel receiving batch `b`.
    pub fn batch_channel(&self, batch: usize) -> usize {
        self.phase2_write_channel(self.write_order[batch % self.write_order.len()])
    }

    /// Per-pass job traces implied by the plan; identical for every tree.
    pub fn traces(&self) -> Vec<Trace> {
        self.passes
            .iter()
            .map(|p| Trace { groups: p.job_groups(self.channel_records) })
            .collect()
    }
}

fn smallest_power_covering(base: u64, target: u64) -> u32 {
    let mut j = 0;
    let mut reach = 1u64;
    while reach < target {
        reach = reach.saturating_mul(base);
        j += 1;
    }
    j
}

/// Builds the pass schedule, phase-2 feed map and write order.
pub fn plan_sort(cfg: &SortConfig, topo: &HbmTopology) -> Result<SortPlan> {
    cfg.validate()?;
    let align = cfg.alignment();
    let padded = cfg.records.div_ceil(align).max(1) * align;
    let k = cfg.trees as u64;
    let capacity = k * topo.channel_records();
    if padded > capacity {
        return Err(Error::Capacity { records: cfg.records, capacity });
    }
    let l = cfg.phase1_leaves as u64;
    let channel_records = padded / k;
    let subruns = cfg.subruns_per_channel();
    let subrun = channel_records / subruns as u64;
    let leaf_feed = subrun / l;

    let grow = |i: u32, cap: u64| l.saturating_pow(i).min(cap);
    let mut passes = Vec::new();
    if cfg.tuning {
        let j = smallest_power_covering(l, leaf_feed);
        for i in 1..=j {
            passes.push(PassPlan { segment: leaf_feed, run_in: grow(i - 1, leaf_feed), run_out: grow(i, leaf_feed) });
        }
        passes.push(PassPlan { segment: subrun, run_in: leaf_feed, run_out: subrun });
    } else {
        let j = smallest_power_covering(l, channel_records);
        for i in 1..=j {
            passes.push(PassPlan {
                segment: channel_records,
                run_in: grow(i - 1, channel_records),
                run_out: grow(i, channel_records),
            });
        }
    }

    let per_group = cfg.trees / 4;
    let write_order = (0..per_group)
        .flat_map(|j| (0..4).map(move |g| g * per_group + j))
        .collect();

    Ok(SortPlan {
        records: cfg.records,
        padded,
        channel_records,
        leaf_feed,
        subrun,
        passes,
        tuned: cfg.tuning,
        subruns_per_channel: subruns,
        batch_records: cfg.batch_records(),
        write_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(n: u64) -> SortPlan {
        plan_sort(&SortConfig::default().with_records(n), &HbmTopology::default()).unwrap()
    }

    #[test]
    fn pass_counts() {
        assert_eq!(plan(1 << 25).phase1_passes(), 5);
        assert_eq!(plan(1 << 29).phase1_passes(), 6);
        assert_eq!(plan(1024 * 16).phase1_passes(), 2);
        assert_eq!(plan(1024).phase1_passes(), 1);
    }

    #[test]
    fn capacity_is_enforced() {
        let cfg = SortConfig::default().with_records((1 << 29) + 1);
        assert!(matches!(plan_sort(&cfg, &HbmTopology::default()), Err(Error::Capacity { .. })));
    }

    #[test]
    fn padding_and_geometry() {
        let p = plan(1000);
        assert_eq!(p.padded, 1024);
        assert_eq!(p.padding(), 24);
        assert_eq!(p.channel_records, 64);
        assert_eq!(p.subrun, 16);
        assert_eq!(p.leaf_feed, 1);
        let p = plan(1 << 20);
        assert_eq!(p.leaf_feed, 1024);
        assert_eq!(p.subrun, 1 << 14);
    }

    #[test]
    fn write_order_cycles_groups_first() {
        let p = plan(1 << 20);
        assert_eq!(&p.write_order[..8], &[0, 4, 8, 12, 1, 5, 9, 13]);
        assert_eq!(p.write_order.len(), 16);
    }

    #[test]
    fn job_groups_match_enumeration() {
        for n in [1024u64, 4096, 1 << 14, 3 * 1024, 5 * 1024 * 16] {
            for tuning in [true, false] {
                let cfg = SortConfig { tuning, ..SortConfig::default() }.with_records(n);
                let p = plan_sort(&cfg, &HbmTopology::default()).unwrap();
                for pass in &p.passes {
                    let mut t = Trace::default();
                    for job in pass.jobs(p.channel_records) {
                        t.push(job.records, job.feeds);
                    }
                    assert_eq!(t.groups, pass.job_groups(p.channel_records), "{pass:?}");
                    assert_eq!(t.records(), p.channel_records);
                }
            }
        }
    }

    #[test]
    fn odd_segment_tails() {
        let pass = PassPlan { segment: 40, run_in: 4, run_out: 16 };
        let jobs: Vec<Job> = pass.jobs(100).collect();
        let lens: Vec<u64> = jobs.iter().map(|j| j.records).collect();
        assert_eq!(lens, vec![16, 16, 8, 16, 16, 8, 16, 4]);
        let mut t = Trace::default();
        for j in &jobs {
            t.push(j.records, j.feeds);
        }
        assert_eq!(t.groups, pass.job_groups(100));
    }

    #[test]
    fn untuned_sorts_whole_channel() {
        let cfg = SortConfig { tuning: false, ..SortConfig::default() }.with_records(1 << 29);
        let p = plan_sort(&cfg, &HbmTopology::default()).unwrap();
        assert_eq!(p.phase1_passes(), 7);
        assert_eq!(p.passes.last().unwrap().run_out, p.channel_records);
    }
}
