//! Merge trees built from streaming merge units.
//!
//! A `(p, l)` tree has one rate-`p` unit at the root; rates halve per level
//! towards the leaves and bottom out at 1, after which extra rate-1 levels
//! are added until the tree has `l` leaves. Four identical trees can be
//! joined under two `2p` units and one `4p` unit to form a wide tree that
//! reuses the subtrees unchanged.

mod cycles;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge_net::{self, first_unsorted, mms_stats, MergeUnitState, Record};

pub use cycles::{run_pass_cycles, CycleSim, FeedRate, LeafFeed, PassCycles, DEFAULT_FIFO_BLOCKS};

/// Leaf buffer depth in records: two 1 KB bursts.
pub const DEFAULT_LEAF_BUFFER_DEPTH: usize = 2 * 1024 / Record::BYTES;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    p: usize,
    l: usize,
    /// Unit rates per level, root first.
    levels: Vec<Vec<usize>>,
    leaf_buffer_depth: usize,
}

pub fn build_tree(p: usize, l: usize) -> Result<TreeSpec> {
    let invalid = |reason| Error::InvalidTree { p, l, reason };
    if !p.is_power_of_two() || p > merge_net::MAX_RATE {
        return Err(invalid("p must be a power of two up to 32"));
    }
    if !l.is_power_of_two() || l < 2 {
        return Err(invalid("l must be a power of two of at least 2"));
    }
    if l < p {
        return Err(invalid("l must be at least p"));
    }
    let depth = l.trailing_zeros() as usize;
    let levels = (0..depth)
        .map(|d| vec![(p >> d).max(1); 1 << d])
        .collect();
    Ok(TreeSpec { p, l, levels, leaf_buffer_depth: DEFAULT_LEAF_BUFFER_DEPTH })
}

impl TreeSpec {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn leaf_buffer_depth(&self) -> usize {
        self.leaf_buffer_depth
    }

    pub fn with_leaf_buffer_depth(mut self, depth: usize) -> Self {
        self.leaf_buffer_depth = depth.max(1);
        self
    }

    pub fn unit_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Total compare-swap cells over all merge units.
    pub fn comparators(&self) -> usize {
        self.levels
            .iter()
            .flatten()
            .map(|&r| mms_stats(r).map_or(0, |s| s.comparators))
            .sum()
    }
}

/// Four shared `(p/4, l)` subtrees plus the extra units that join them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WideTreeSpec {
    subtrees: [Arc<TreeSpec>; 4],
    /// Rates of the joining units: two at `p/2`, then the root at `p`.
    extra_units: [usize; 3],
}

pub fn compose_wide_tree(subtrees: [Arc<TreeSpec>; 4]) -> Result<WideTreeSpec> {
    if subtrees.iter().any(|t| **t != *subtrees[0]) {
        return Err(Error::SubtreeMismatch);
    }
    let sub = subtrees[0].p();
    merge_net::check_rate(4 * sub)?;
    Ok(WideTreeSpec { subtrees, extra_units: [2 * sub, 2 * sub, 4 * sub] })
}

impl WideTreeSpec {
    pub fn p(&self) -> usize {
        self.extra_units[2]
    }

    pub fn l(&self) -> usize {
        4 * self.subtrees[0].l()
    }

    pub fn subtrees(&self) -> &[Arc<TreeSpec>; 4] {
        &self.subtrees
    }

    pub fn extra_units(&self) -> [usize; 3] {
        self.extra_units
    }

    /// Comparators added on top of the reused subtrees.
    pub fn extra_comparators(&self) -> usize {
        self.extra_units
            .iter()
            .map(|&r| mms_stats(r).map_or(0, |s| s.comparators))
            .sum()
    }

    pub fn comparators(&self) -> usize {
        self.extra_comparators() + 4 * self.subtrees[0].comparators()
    }
}

/// Where a merge unit input comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Unit(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitNode {
    pub rate: usize,
    pub inputs: [Source; 2],
    pub parent: Option<usize>,
}

/// Flattened unit graph. Unit 0 is the root and every child has a larger
/// index than its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    units: Vec<UnitNode>,
    leaves: usize,
    leaf_buffer_depth: usize,
}

/// Anything that can be flattened into a [`Topology`].
pub trait MergeTree {
    fn topology(&self) -> Topology;
}

impl MergeTree for TreeSpec {
    fn topology(&self) -> Topology {
        let mut topo = Topology { units: Vec::new(), leaves: self.l, leaf_buffer_depth: self.leaf_buffer_depth };
        topo.append_tree(self, None, 0);
        topo
    }
}

impl MergeTree for WideTreeSpec {
    fn topology(&self) -> Topology {
        let sub = &self.subtrees[0];
        let mut units = vec![UnitNode {
            rate: self.extra_units[2],
            inputs: [Source::Unit(1), Source::Unit(2)],
            parent: None,
        }];
        // Inputs are patched once the subtree roots are known.
        units.extend(
            self.extra_units[..2]
                .iter()
                .map(|&rate| UnitNode { rate, inputs: [Source::Unit(0); 2], parent: Some(0) }),
        );
        let mut topo = Topology { units, leaves: self.l(), leaf_buffer_depth: sub.leaf_buffer_depth };
        for (t, tree) in self.subtrees.iter().enumerate() {
            let joiner = 1 + t / 2;
            let root = topo.append_tree(tree, Some(joiner), t * sub.l());
            topo.units[joiner].inputs[t % 2] = Source::Unit(root);
        }
        topo
    }
}

impl MergeTree for Topology {
    fn topology(&self) -> Topology {
        self.clone()
    }
}

impl Topology {
    fn append_tree(&mut self, tree: &TreeSpec, parent: Option<usize>, leaf_offset: usize) -> usize {
        let base = self.units.len();
        let mut level_start = base;
        for (d, level) in tree.levels.iter().enumerate() {
            let next_start = level_start + level.len();
            let bottom = d + 1 == tree.levels.len();
            for (i, &rate) in level.iter().enumerate() {
                let inputs = if bottom {
                    [Source::Leaf(leaf_offset + 2 * i), Source::Leaf(leaf_offset + 2 * i + 1)]
                } else {
                    [Source::Unit(next_start + 2 * i), Source::Unit(next_start + 2 * i + 1)]
                };
                let parent = if d == 0 { parent } else { Some(level_start - (1 << (d - 1)) + i / 2) };
                self.units.push(UnitNode { rate, inputs, parent });
            }
            level_start = next_start;
        }
        base
    }

    pub fn units(&self) -> &[UnitNode] {
        &self.units
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn root_rate(&self) -> usize {
        self.units[0].rate
    }

    pub fn leaf_buffer_depth(&self) -> usize {
        self.leaf_buffer_depth
    }

    pub fn comparators(&self) -> usize {
        self.units
            .iter()
            .map(|u| mms_stats(u.rate).map_or(0, |s| s.comparators))
            .sum()
    }

    /// Sum of unit pipeline depths on the longest root-to-leaf path.
    pub fn fill_latency(&self) -> u64 {
        fn walk(topo: &Topology, u: usize) -> u64 {
            let node = &topo.units[u];
            let own = mms_stats(node.rate).map_or(0, |s| s.stages as u64);
            let below = node
                .inputs
                .iter()
                .map(|s| match *s {
                    Source::Unit(c) => walk(topo, c),
                    Source::Leaf(_) => 0,
                })
                .max()
                .unwrap_or(0);
            own + below
        }
        walk(self, 0)
    }

    /// Upper bound on root records per cycle when only the marked leaves
    /// supply data: every unit is capped by its own rate and by what its
    /// children can deliver.
    pub fn throughput_cap(&self, active: &[bool]) -> f64 {
        fn cap(topo: &Topology, u: usize, active: &[bool]) -> f64 {
            let node = &topo.units[u];
            let supply: f64 = node
                .inputs
                .iter()
                .map(|s| match *s {
                    Source::Unit(c) => cap(topo, c, active),
                    Source::Leaf(i) => {
                        if active.get(i).copied().unwrap_or(false) {
                            f64::INFINITY
                        } else {
                            0.0
                        }
                    }
                })
                .sum();
            supply.min(node.rate as f64)
        }
        cap(self, 0, active)
    }
}

/// Leaf positions for `runs` feeds spread evenly over `leaves` leaves, so
/// partially filled passes keep as many bottom units busy as possible.
pub fn spread_leaves(runs: usize, leaves: usize) -> Vec<usize> {
    (0..runs).map(|r| r * leaves / runs.max(1)).collect()
}

pub(crate) fn validate_feeds<F: AsRef<[Record]>>(feeds: &[F], leaves: usize) -> Result<()> {
    if feeds.len() > leaves {
        return Err(Error::TooManyFeeds { feeds: feeds.len(), leaves });
    }
    for (leaf, feed) in feeds.iter().enumerate() {
        if let Some(index) = first_unsorted(feed.as_ref()) {
            return Err(Error::UnsortedFeed { leaf, index });
        }
    }
    Ok(())
}

/// Reusable functional evaluator for one topology.
///
/// Each unit drains its two complete input streams through the same
/// [`MergeUnitState::try_step`] used by the cycle simulator, children first.
#[derive(Debug, Clone)]
pub struct TreeRunner {
    topo: Topology,
    units: Vec<MergeUnitState>,
    streams: Vec<Vec<Record>>,
    steps: u64,
}

impl TreeRunner {
    pub fn new(tree: &impl MergeTree) -> Result<Self> {
        let topo = tree.topology();
        let units = topo
            .units
            .iter()
            .map(|u| MergeUnitState::new(u.rate))
            .collect::<Result<Vec<_>>>()?;
        let streams = vec![Vec::new(); topo.units.len()];
        Ok(Self { topo, units, streams, steps: 0 })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Unit invocations performed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Merges `feeds[i]` (fed to leaf `i`) and appends the result to `out`.
    /// Feeds are assumed sorted; see [`run_pass_functional`] for the checked
    /// entry point.
    pub fn merge_into<F: AsRef<[Record]>>(&mut self, feeds: &[F], out: &mut Vec<Record>) -> Result<()> {
        if feeds.len() > self.topo.leaves {
            return Err(Error::TooManyFeeds { feeds: feeds.len(), leaves: self.topo.leaves });
        }
        let empty: &[Record] = &[];
        for u in (0..self.topo.units.len()).rev() {
            let (head, tail) = self.streams.split_at_mut(u + 1);
            let input = |s: Source| -> &[Record] {
                match s {
                    Source::Leaf(i) => feeds.get(i).map_or(empty, |f| f.as_ref()),
                    Source::Unit(c) => &tail[c - u - 1],
                }
            };
            let [sa, sb] = self.topo.units[u].inputs;
            let (a, b) = (input(sa), input(sb));
            let dst = if u == 0 { &mut *out } else { &mut head[u] };
            if u != 0 {
                dst.clear();
            }
            let unit = &mut self.units[u];
            unit.reset();
            self.steps += unit.merge_closed(a, b, dst);
        }
        Ok(())
    }
}

/// Merges up to `l` sorted feeds into one sorted run.
pub fn run_pass_functional<F: AsRef<[Record]>>(tree: &impl MergeTree, feeds: &[F]) -> Result<Vec<Record>> {
    let mut runner = TreeRunner::new(tree)?;
    validate_feeds(feeds, runner.topo.leaves)?;
    let total = feeds.iter().map(|f| f.as_ref().len()).sum();
    let mut out = Vec::with_capacity(total);
    runner.merge_into(feeds, &mut out)?;
    Ok(out)
}
