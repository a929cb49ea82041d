//! Streaming merge primitives.
//!
//! A merge unit of rate `E` consumes sorted `E`-record blocks from two input
//! streams and emits one sorted `E`-record block per invocation. Internally
//! every comparison goes through a fixed bitonic compare-swap network over
//! `2E` lanes; no general-purpose sort is involved.
//!
//! Records are ordered by key only. To make the networks stable, each lane
//! carries a 64-bit order word `key:32 | pad:1 | port:1 | seq:30`, so equal
//! keys resolve by input port (A before B) and then by stream position.
//! Padding lanes sort after every real record and never leave a unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest block rate a merge unit supports.
pub const MAX_RATE: usize = 32;

const PAD_BIT: u64 = 1 << 31;
const PORT_BIT: u64 = 1 << 30;
const SEQ_LIMIT: u64 = 1 << 30;

/// A 64-bit sort element: 32-bit key plus an opaque 32-bit payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Record {
    pub key: u32,
    pub value: u32,
}

impl Record {
    /// Serialized width in bytes.
    pub const BYTES: usize = 8;

    pub const fn new(key: u32, value: u32) -> Self {
        Self { key, value }
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.key.to_le_bytes());
        out[4..].copy_from_slice(&self.value.to_le_bytes());
        out
    }

    pub fn from_le_bytes(bytes: [u8; 8]) -> Self {
        let [k0, k1, k2, k3, v0, v1, v2, v3] = bytes;
        Self {
            key: u32::from_le_bytes([k0, k1, k2, k3]),
            value: u32::from_le_bytes([v0, v1, v2, v3]),
        }
    }
}

/// Returns `(lo, hi)`. Equal keys keep their input order.
pub fn compare_swap(a: Record, b: Record) -> (Record, Record) {
    if b.key < a.key {
        (b, a)
    } else {
        (a, b)
    }
}

/// Returns the index of the first record whose key is smaller than its
/// predecessor's, if any.
pub fn first_unsorted(records: &[Record]) -> Option<usize> {
    records
        .windows(2)
        .position(|w| w[1].key < w[0].key)
        .map(|i| i + 1)
}

pub fn is_sorted(records: &[Record]) -> bool {
    first_unsorted(records).is_none()
}

pub(crate) fn check_rate(rate: usize) -> Result<()> {
    if rate.is_power_of_two() && rate <= MAX_RATE {
        Ok(())
    } else {
        Err(Error::InvalidRate(rate))
    }
}

/// A fixed-width group of `E` records, `E` a power of two up to 32.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    elems: Vec<Record>,
}

impl Block {
    pub fn new(elems: Vec<Record>) -> Result<Self> {
        check_rate(elems.len())?;
        Ok(Self { elems })
    }

    /// Like [`Block::new`] but also rejects unsorted contents.
    pub fn sorted(elems: Vec<Record>) -> Result<Self> {
        if let Some(i) = first_unsorted(&elems) {
            return Err(Error::UnsortedBlock(i));
        }
        Self::new(elems)
    }

    pub fn from_keys(keys: &[u32]) -> Result<Self> {
        Self::new(keys.iter().map(|&k| Record::new(k, 0)).collect())
    }

    pub fn rate(&self) -> usize {
        self.elems.len()
    }

    pub fn records(&self) -> &[Record] {
        &self.elems
    }

    pub fn is_sorted(&self) -> bool {
        is_sorted(&self.elems)
    }

    pub fn into_records(self) -> Vec<Record> {
        self.elems
    }
}

/// One lane of a merge network: order word plus payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Lane {
    ord: u64,
    value: u32,
}

impl Lane {
    #[inline]
    fn tag(rec: Record, port: usize, seq: u64) -> Self {
        Self {
            ord: (u64::from(rec.key) << 32) | (port as u64 * PORT_BIT) | seq,
            value: rec.value,
        }
    }

    #[inline]
    fn pad(port: usize, seq: u64) -> Self {
        Self {
            ord: (u64::from(u32::MAX) << 32) | PAD_BIT | (port as u64 * PORT_BIT) | seq,
            value: 0,
        }
    }

    #[inline]
    fn is_pad(self) -> bool {
        self.ord & PAD_BIT != 0
    }

    #[inline]
    fn record(self) -> Record {
        Record::new((self.ord >> 32) as u32, self.value)
    }
}

/// Compare-swap structure of a bitonic merger over `2E` lanes.
///
/// The merger expects `a ++ reverse(b)` (a bitonic sequence) and applies
/// `log2(2E)` half-cleaner stages of `E` cells each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitonicNetwork {
    width: usize,
    cells: Vec<(u8, u8)>,
}

impl BitonicNetwork {
    pub fn for_rate(rate: usize) -> Result<Self> {
        check_rate(rate)?;
        let width = 2 * rate;
        let mut cells = Vec::new();
        let mut half = rate;
        while half >= 1 {
            for i in 0..width {
                if i & half == 0 {
                    cells.push((i as u8, (i + half) as u8));
                }
            }
            half /= 2;
        }
        Ok(Self { width, cells })
    }

    /// Number of lanes (`2E`).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[(u8, u8)] {
        &self.cells
    }

    /// Cells grouped by pipeline stage.
    pub fn stages(&self) -> impl Iterator<Item = &[(u8, u8)]> {
        self.cells.chunks(self.width / 2)
    }

    /// Applies the cells stage by stage. Equivalent to walking `cells` in
    /// order; the nested loops just avoid the index table.
    #[inline]
    fn apply(&self, lanes: &mut [Lane]) {
        debug_assert_eq!(lanes.len(), self.width);
        half_clean(lanes);
    }
}

#[inline(always)]
fn half_clean(lanes: &mut [Lane]) {
    let mut half = lanes.len() / 2;
    while half >= 1 {
        for group in lanes.chunks_exact_mut(2 * half) {
            let (lo, hi) = group.split_at_mut(half);
            for (x, y) in lo.iter_mut().zip(hi) {
                let (a, b) = (*x, *y);
                let swap = b.ord < a.ord;
                *x = if swap { b } else { a };
                *y = if swap { a } else { b };
            }
        }
        half /= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub comparators: usize,
    pub stages: usize,
}

/// Comparator and stage count of a single bitonic merger of two `E`-blocks.
pub fn comparator_stats(rate: usize) -> Result<NetworkStats> {
    check_rate(rate)?;
    let stages = (2 * rate).trailing_zeros() as usize;
    Ok(NetworkStats { comparators: rate * stages, stages })
}

/// Cost of a complete streaming merge unit: two mergers, except at `E = 1`
/// where the unit degenerates to one compare-swap and a one-deep register.
pub fn mms_stats(rate: usize) -> Result<NetworkStats> {
    let single = comparator_stats(rate)?;
    if rate == 1 {
        return Ok(single);
    }
    Ok(NetworkStats {
        comparators: 2 * single.comparators,
        stages: 2 * single.stages,
    })
}

/// Merges two sorted blocks of equal rate through a bitonic network.
pub fn bitonic_merge_blocks(a: &Block, b: &Block) -> Result<Vec<Record>> {
    if a.rate() != b.rate() {
        return Err(Error::RateMismatch { left: a.rate(), right: b.rate() });
    }
    for block in [a, b] {
        if let Some(i) = first_unsorted(block.records()) {
            return Err(Error::UnsortedBlock(i));
        }
    }
    let network = BitonicNetwork::for_rate(a.rate())?;
    let mut lanes: Vec<Lane> = a
        .records()
        .iter()
        .enumerate()
        .map(|(i, &r)| Lane::tag(r, 0, i as u64))
        .chain(
            b.records()
                .iter()
                .enumerate()
                .rev()
                .map(|(i, &r)| Lane::tag(r, 1, i as u64)),
        )
        .collect();
    network.apply(&mut lanes);
    Ok(lanes.into_iter().map(Lane::record).collect())
}

/// Which input a merge-unit invocation consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Consumed {
    A,
    B,
    /// First step of a run: one block from each input.
    Both,
    /// Both inputs exhausted; the retained half was emitted.
    Flush,
}

/// What a merge unit currently sees on one input.
#[derive(Debug, Clone, Copy)]
pub struct Port<'a> {
    /// Records visible at the head of the input stream.
    pub data: &'a [Record],
    /// No further records will arrive.
    pub done: bool,
}

impl<'a> Port<'a> {
    pub const EXHAUSTED: Port<'static> = Port { data: &[], done: true };

    pub fn open(data: &'a [Record]) -> Self {
        Self { data, done: false }
    }

    pub fn closed(data: &'a [Record]) -> Self {
        Self { data, done: true }
    }

    fn exhausted(&self) -> bool {
        self.done && self.data.is_empty()
    }

    /// Length of the block that can be consumed now; a partial block is only
    /// available once the stream is closed.
    fn ready(&self, rate: usize) -> Option<usize> {
        if self.data.len() >= rate {
            Some(rate)
        } else if self.done && !self.data.is_empty() {
            Some(self.data.len())
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// An input needed for the next decision is not available yet.
    Wait,
    /// Inputs exhausted and nothing retained.
    Finished,
    /// One block was emitted; `taken` records consumed from each port.
    Emitted { consumed: Consumed, taken: [usize; 2] },
}

/// State of one streaming (initiation interval 1) merge unit.
#[derive(Debug, Clone)]
pub struct MergeUnitState {
    rate: usize,
    /// While set, `lanes[rate..2 * rate]` holds the upper half of the last merge.
    holding: bool,
    seq: [u64; 2],
    pipeline_depth: u32,
    run_epoch: u64,
    lanes: [Lane; 2 * MAX_RATE],
}

const EMPTY_LANE: Lane = Lane { ord: 0, value: 0 };

impl MergeUnitState {
    pub fn new(rate: usize) -> Result<Self> {
        BitonicNetwork::for_rate(rate)?;
        let depth = mms_stats(rate)?.stages as u32;
        Ok(Self {
            rate,
            holding: false,
            seq: [0; 2],
            pipeline_depth: depth,
            run_epoch: 0,
            lanes: [EMPTY_LANE; 2 * MAX_RATE],
        })
    }

    /// Overrides the structural latency used by the cycle model.
    pub fn with_pipeline_depth(mut self, depth: u32) -> Self {
        self.pipeline_depth = depth;
        self
    }

    pub fn rate(&self) -> usize {
        self.rate
    }

    pub fn pipeline_depth(&self) -> u32 {
        self.pipeline_depth
    }

    pub fn run_epoch(&self) -> u64 {
        self.run_epoch
    }

    fn held(&self) -> &[Lane] {
        if self.holding {
            &self.lanes[self.rate..2 * self.rate]
        } else {
            &[]
        }
    }

    /// Records held in the retained half (padding excluded).
    pub fn retained(&self) -> Vec<Record> {
        self.held().iter().filter(|l| !l.is_pad()).map(|l| l.record()).collect()
    }

    /// Seeds the retained half directly, e.g. to resume mid-run.
    pub fn set_retained(&mut self, block: &Block) -> Result<()> {
        if block.rate() != self.rate {
            return Err(Error::RateMismatch { left: self.rate, right: block.rate() });
        }
        if let Some(i) = first_unsorted(block.records()) {
            return Err(Error::UnsortedBlock(i));
        }
        // Tag as port A entries preceding everything the unit will read.
        for (i, (slot, &r)) in self.lanes[self.rate..].iter_mut().zip(block.records()).enumerate() {
            *slot = Lane::tag(r, 0, i as u64);
        }
        self.holding = true;
        self.seq = [self.rate as u64; 2];
        Ok(())
    }

    /// Clears state at a run boundary.
    pub fn reset(&mut self) {
        self.holding = false;
        self.seq = [0; 2];
        self.run_epoch += 1;
    }

    /// Writes one input block into `lanes[at..at + R]`, padded to the full
    /// rate, optionally reversed.
    #[inline(always)]
    fn load<const R: usize>(&mut self, at: usize, port: usize, data: &[Record], reversed: bool) {
        let base = self.seq[port];
        let dst = &mut self.lanes[at..at + R];
        if data.len() >= R {
            for (k, &r) in data[..R].iter().enumerate() {
                let i = if reversed { R - 1 - k } else { k };
                dst[i] = Lane::tag(r, port, base + k as u64);
            }
        } else {
            for k in 0..R {
                let i = if reversed { R - 1 - k } else { k };
                dst[i] = match data.get(k) {
                    Some(&r) => Lane::tag(r, port, base + k as u64),
                    None => Lane::pad(port, base + k as u64),
                };
            }
        }
        self.seq[port] += R as u64;
    }

    #[inline(always)]
    fn emit_lower<const R: usize>(&mut self, out: &mut Vec<Record>) {
        let lanes = &mut self.lanes[..2 * R];
        half_clean(lanes);
        // Padding sorts above every real record, so real lanes form a prefix.
        let real = lanes[..R].partition_point(|l| !l.is_pad());
        out.extend(lanes[..real].iter().map(|l| l.record()));
        self.holding = true;
    }

    /// Attempts one invocation. Emitted records (padding stripped) are
    /// appended to `out`; the caller removes `taken` records from each input.
    pub fn try_step(&mut self, a: Port<'_>, b: Port<'_>, out: &mut Vec<Record>) -> StepOutcome {
        match self.rate {
            1 => self.step::<1>(a, b, out),
            2 => self.step::<2>(a, b, out),
            4 => self.step::<4>(a, b, out),
            8 => self.step::<8>(a, b, out),
            16 => self.step::<16>(a, b, out),
            32 => self.step::<32>(a, b, out),
            r => unreachable!("rate {r} rejected at construction"),
        }
    }

    /// Merges two complete runs from a reset state, appending to `out`.
    /// Returns the number of invocations. Same decisions as calling
    /// [`try_step`](Self::try_step) with closed ports until it finishes.
    pub fn merge_closed(&mut self, a: &[Record], b: &[Record], out: &mut Vec<Record>) -> u64 {
        match self.rate {
            1 => self.merge_closed_at::<1>(a, b, out),
            2 => self.merge_closed_at::<2>(a, b, out),
            4 => self.merge_closed_at::<4>(a, b, out),
            8 => self.merge_closed_at::<8>(a, b, out),
            16 => self.merge_closed_at::<16>(a, b, out),
            32 => self.merge_closed_at::<32>(a, b, out),
            r => unreachable!("rate {r} rejected at construction"),
        }
    }

    fn merge_closed_at<const R: usize>(&mut self, a: &[Record], b: &[Record], out: &mut Vec<Record>) -> u64 {
        assert!(((a.len().max(b.len()) + R) as u64) < SEQ_LIMIT, "run too long for the lane sequence field");
        out.reserve(a.len() + b.len());
        let (mut ia, mut ib, mut steps) = (0, 0, 0);
        loop {
            match self.step::<R>(Port::closed(&a[ia..]), Port::closed(&b[ib..]), out) {
                StepOutcome::Emitted { taken, .. } => {
                    ia += taken[0];
                    ib += taken[1];
                    steps += 1;
                }
                StepOutcome::Finished => return steps,
                StepOutcome::Wait => unreachable!("closed ports never wait"),
            }
        }
    }

    #[inline(always)]
    fn step<const R: usize>(&mut self, a: Port<'_>, b: Port<'_>, out: &mut Vec<Record>) -> StepOutcome {
        let (ea, eb) = (a.exhausted(), b.exhausted());

        if !self.holding {
            return match (ea, eb) {
                (true, true) => StepOutcome::Finished,
                (true, false) | (false, true) => {
                    let (port, p) = if ea { (1, b) } else { (0, a) };
                    let Some(n) = p.ready(R) else {
                        return StepOutcome::Wait;
                    };
                    out.extend_from_slice(&p.data[..n]);
                    self.seq[port] += R as u64;
                    let mut taken = [0; 2];
                    taken[port] = n;
                    StepOutcome::Emitted {
                        consumed: if port == 0 { Consumed::A } else { Consumed::B },
                        taken,
                    }
                }
                (false, false) => {
                    let (Some(na), Some(nb)) = (a.ready(R), b.ready(R)) else {
                        return StepOutcome::Wait;
                    };
                    self.load::<R>(0, 0, &a.data[..na], false);
                    self.load::<R>(R, 1, &b.data[..nb], true);
                    self.emit_lower::<R>(out);
                    StepOutcome::Emitted { consumed: Consumed::Both, taken: [na, nb] }
                }
            };
        }

        if ea && eb {
            out.extend(self.held().iter().filter(|l| !l.is_pad()).map(|l| l.record()));
            self.holding = false;
            return StepOutcome::Emitted { consumed: Consumed::Flush, taken: [0, 0] };
        }

        let port = if ea {
            1
        } else if eb {
            0
        } else {
            match (a.data.first(), b.data.first()) {
                (Some(ha), Some(hb)) => usize::from(hb.key < ha.key),
                _ => return StepOutcome::Wait,
            }
        };
        let p = if port == 0 { a } else { b };
        let Some(n) = p.ready(R) else {
            return StepOutcome::Wait;
        };
        // A descending block below the ascending retained half is also bitonic.
        self.load::<R>(0, port, &p.data[..n], true);
        self.emit_lower::<R>(out);
        let mut taken = [0; 2];
        taken[port] = n;
        StepOutcome::Emitted {
            consumed: if port == 0 { Consumed::A } else { Consumed::B },
            taken,
        }
    }
}

/// Result of one [`mms_step`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsOutput {
    pub out: Vec<Record>,
    pub consumed: Consumed,
}

/// One invocation of a streaming merge unit on whole blocks. `None` marks an
/// exhausted input.
pub fn mms_step(state: &mut MergeUnitState, a: Option<&Block>, b: Option<&Block>) -> Result<MmsOutput> {
    for block in [a, b].into_iter().flatten() {
        if block.rate() != state.rate() {
            return Err(Error::RateMismatch { left: state.rate(), right: block.rate() });
        }
        if let Some(i) = first_unsorted(block.records()) {
            return Err(Error::UnsortedBlock(i));
        }
    }
    fn port(blk: Option<&Block>) -> Port<'_> {
        blk.map_or(Port::EXHAUSTED, |b| Port::open(b.records()))
    }
    let mut out = Vec::with_capacity(state.rate());
    match state.try_step(port(a), port(b), &mut out) {
        StepOutcome::Emitted { consumed, .. } => Ok(MmsOutput { out, consumed }),
        StepOutcome::Finished => Err(Error::Drained),
        // Whole blocks are always ready; only reachable if both heads are absent.
        StepOutcome::Wait => Err(Error::Drained),
    }
}

/// Streams two complete sorted runs through one merge unit and returns the
/// merged run along with the number of invocations used.
pub fn merge_runs(rate: usize, a: &[Record], b: &[Record]) -> Result<(Vec<Record>, usize)> {
    let mut unit = MergeUnitState::new(rate)?;
    let mut out = Vec::new();
    let steps = unit.merge_closed(a, b, &mut out);
    Ok((out, steps as usize))
}
