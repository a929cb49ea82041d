//! Block-synchronous cycle model of one streaming pass.
//!
//! Every cycle each unit may fire once: it needs the block selected by its
//! merge rule to be present in the child FIFO (or leaf buffer) at the start
//! of the cycle, and room for one block in its own output FIFO. FIFOs hold
//! [`DEFAULT_FIFO_BLOCKS`] blocks of the consuming unit's rate unless
//! overridden. Units are evaluated root first,
//! so data moves at most one level per cycle while freed space is visible
//! to the producer in the same cycle. The pipeline fill latency is added
//! once per pass.

use crate::error::{Error, Result};
use crate::merge_net::{MergeUnitState, Port, Record, StepOutcome};

use super::{validate_feeds, MergeTree, Source, Topology};

/// Cycles without any movement before the simulation is declared stuck.
const STALL_LIMIT: u64 = 1 << 20;

/// Inter-level FIFO depth in blocks of the consuming unit's rate. A parent
/// often pulls several blocks in a row from one child, which produces at
/// half the parent's rate; two blocks of slack cap a fully fed (8, 16) tree
/// near 6.1 records per cycle, eight blocks bring it within 6% of 8.
pub const DEFAULT_FIFO_BLOCKS: usize = 8;

/// A sorted run destined for one leaf, available from `start_cycle` on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeafFeed {
    pub run: Vec<Record>,
    pub start_cycle: u64,
}

impl LeafFeed {
    pub fn new(run: Vec<Record>) -> Self {
        Self { run, start_cycle: 0 }
    }
}

impl AsRef<[Record]> for LeafFeed {
    fn as_ref(&self) -> &[Record] {
        &self.run
    }
}

/// How memory refills leaf buffers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedRate {
    /// Each leaf independently receives this many records per cycle.
    PerLeaf(f64),
    /// Records per cycle shared among leaves that have room and data left.
    Shared(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassCycles {
    pub output: Vec<Record>,
    /// Emission cycles plus one pipeline fill.
    pub cycles: u64,
    /// Records delivered per cycle at the root.
    pub root_active_rate: f64,
}

#[derive(Debug, Default, Clone)]
struct Fifo {
    buf: Vec<Record>,
    head: usize,
}

impl Fifo {
    fn len(&self) -> usize {
        self.buf.len() - self.head
    }

    fn visible(&self) -> &[Record] {
        &self.buf[self.head..]
    }

    fn consume(&mut self, n: usize) {
        self.head += n;
        if self.head == self.buf.len() {
            self.buf.clear();
            self.head = 0;
        } else if self.head >= 256 && self.head * 2 >= self.buf.len() {
            self.buf.drain(..self.head);
            self.head = 0;
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Leaf {
    buffer: Fifo,
    next: usize,
    credit: f64,
}

/// Cycle simulator for one topology; reusable across passes.
#[derive(Debug, Clone)]
pub struct CycleSim {
    topo: Topology,
    units: Vec<MergeUnitState>,
    fifo_cap: Vec<usize>,
    fill_latency: u64,
}

impl CycleSim {
    pub fn new(tree: &impl MergeTree) -> Result<Self> {
        let topo = tree.topology();
        let units = topo
            .units()
            .iter()
            .map(|u| MergeUnitState::new(u.rate))
            .collect::<Result<Vec<_>>>()?;
        let fifo_cap = topo
            .units()
            .iter()
            .map(|u| u.parent.map_or(usize::MAX, |p| DEFAULT_FIFO_BLOCKS * topo.units()[p].rate))
            .collect();
        let fill_latency = topo.fill_latency();
        Ok(Self { topo, units, fifo_cap, fill_latency })
    }

    /// Sets every inter-level FIFO to `blocks` blocks of its consumer's rate.
    pub fn with_fifo_blocks(mut self, blocks: usize) -> Self {
        let blocks = blocks.max(1);
        for (cap, u) in self.fifo_cap.iter_mut().zip(self.topo.units()) {
            if let Some(p) = u.parent {
                *cap = blocks * self.topo.units()[p].rate;
            }
        }
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn fill_latency(&self) -> u64 {
        self.fill_latency
    }

    /// Runs one pass. Feeds must already be validated.
    pub fn run<F: AsRef<[Record]>>(&mut self, feeds: &[F], starts: &[u64], rate: FeedRate) -> Result<PassCycles> {
        let n_units = self.topo.units().len();
        let depth = self.topo.leaf_buffer_depth();
        let feed_of = |i: usize| -> &[Record] { feeds.get(i).map_or(&[][..], |f| f.as_ref()) };
        let total: usize = feeds.iter().map(|f| f.as_ref().len()).sum();

        let mut leaves = vec![Leaf::default(); self.topo.leaves()];
        let mut fifos = vec![Fifo::default(); n_units];
        let mut finished = vec![false; n_units];
        for u in &mut self.units {
            u.reset();
        }
        let mut output = Vec::with_capacity(total);
        let mut cycle: u64 = 0;
        let mut last_emit: Option<u64> = None;
        let mut idle: u64 = 0;

        while !finished[0] {
            let mut moved = false;

            // Refill leaf buffers.
            let wanting: Vec<usize> = (0..leaves.len())
                .filter(|&i| {
                    let lf = &leaves[i];
                    lf.next < feed_of(i).len()
                        && lf.buffer.len() < depth
                        && cycle >= starts.get(i).copied().unwrap_or(0)
                })
                .collect();
            let share = match rate {
                FeedRate::PerLeaf(r) => r,
                FeedRate::Shared(r) if !wanting.is_empty() => r / wanting.len() as f64,
                FeedRate::Shared(_) => 0.0,
            };
            for &i in &wanting {
                let feed = feed_of(i);
                let lf = &mut leaves[i];
                let space = depth - lf.buffer.len();
                lf.credit = (lf.credit + share).min(depth as f64);
                let n = (lf.credit.floor() as usize).min(space).min(feed.len() - lf.next);
                if n > 0 {
                    lf.buffer.buf.extend_from_slice(&feed[lf.next..lf.next + n]);
                    lf.next += n;
                    lf.credit -= n as f64;
                    moved = true;
                }
            }

            // Units, root first.
            for u in 0..n_units {
                if finished[u] {
                    continue;
                }
                let rate = self.units[u].rate();
                let (head, tail) = fifos.split_at_mut(u + 1);
                let own = &mut head[u];
                if u != 0 && own.len() + rate > self.fifo_cap[u] {
                    continue;
                }
                let [sa, sb] = self.topo.units()[u].inputs;
                let port = |s: Source| -> Port<'_> {
                    match s {
                        Source::Leaf(i) => {
                            let lf = &leaves[i];
                            Port { data: lf.buffer.visible(), done: lf.next == feed_of(i).len() }
                        }
                        Source::Unit(c) => Port { data: tail[c - u - 1].visible(), done: finished[c] },
                    }
                };
                let dst = if u == 0 { &mut output } else { &mut own.buf };
                let before = dst.len();
                match self.units[u].try_step(port(sa), port(sb), dst) {
                    StepOutcome::Wait => {}
                    StepOutcome::Finished => {
                        finished[u] = true;
                        moved = true;
                    }
                    StepOutcome::Emitted { taken, .. } => {
                        moved = true;
                        if u == 0 && output.len() > before {
                            last_emit = Some(cycle);
                        }
                        for (s, n) in [(sa, taken[0]), (sb, taken[1])] {
                            if n == 0 {
                                continue;
                            }
                            match s {
                                Source::Leaf(i) => leaves[i].buffer.consume(n),
                                Source::Unit(c) => tail[c - u - 1].consume(n),
                            }
                        }
                    }
                }
            }

            if moved {
                idle = 0;
            } else {
                idle += 1;
                if idle > STALL_LIMIT {
                    return Err(Error::Deadlock(idle));
                }
            }
            cycle += 1;
        }

        let emit_cycles = last_emit.map_or(0, |c| c + 1);
        let cycles = emit_cycles + self.fill_latency;
        let root_active_rate = if cycles == 0 { 0.0 } else { total as f64 / cycles as f64 };
        Ok(PassCycles { output, cycles, root_active_rate })
    }
}

/// Simulates one pass cycle by cycle. The output is identical to
/// [`super::run_pass_functional`] for the same feeds.
pub fn run_pass_cycles(tree: &impl MergeTree, feeds: &[LeafFeed], rate: FeedRate) -> Result<PassCycles> {
    let mut sim = CycleSim::new(tree)?;
    validate_feeds(feeds, sim.topo.leaves())?;
    let starts: Vec<u64> = feeds.iter().map(|f| f.start_cycle).collect();
    sim.run(feeds, &starts, rate)
}
