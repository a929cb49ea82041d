//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use hbmsort::analytics::{FloorplanProblem, FloorplanSolution};
use hbmsort::hbm::{ChannelLayout, Phase, CHANNELS, GROUP_SIZE};
use hbmsort::merge_net::Record;
use rand::{Rng, RngExt};

/// Stable merge: on equal keys the record from `a` goes first.
pub fn two_pointer(a: &[Record], b: &[Record]) -> Vec<Record> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j].key < a[i].key {
            out.push(b[j]);
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// k-way merge through a min-heap; equal keys leave in feed order.
pub fn heap_merge<F: AsRef<[Record]>>(feeds: &[F]) -> Vec<Record> {
    let mut heap = BinaryHeap::new();
    for (f, feed) in feeds.iter().enumerate() {
        if let Some(r) = feed.as_ref().first() {
            heap.push(Reverse((r.key, f, 0usize)));
        }
    }
    let mut out = Vec::new();
    while let Some(Reverse((_, f, i))) = heap.pop() {
        let feed = feeds[f].as_ref();
        out.push(feed[i]);
        if let Some(r) = feed.get(i + 1) {
            heap.push(Reverse((r.key, f, i + 1)));
        }
    }
    out
}

/// Sorted run of `len` records with keys below `key_space`; values are
/// tagged with `tag` so the origin of equal keys stays visible.
pub fn sorted_run(rng: &mut impl Rng, len: usize, key_space: u32, tag: u32) -> Vec<Record> {
    let mut keys: Vec<u32> = (0..len).map(|_| rng.random_range(0..key_space)).collect();
    keys.sort_unstable();
    keys.into_iter().enumerate().map(|(i, k)| Record::new(k, tag << 20 | i as u32)).collect()
}

/// Exhaustive search over every integer placement.
/// A random instance whose every bound on `u1`, `u2` and `u1 + u2` is at
/// most 64, so [`brute_floorplan`] covers the whole feasible region.
pub fn small_floorplan(rng: &mut impl RngExt) -> FloorplanProblem {
    let tree_resources = rng.random_range(1..50u64);
    let axi_width = rng.random_range(1..20u64);
    FloorplanProblem {
        tree_resources,
        die1: rng.random_range(0..=64 * tree_resources),
        die2: rng.random_range(0..=64 * tree_resources),
        axi_width,
        crossing_budget: rng.random_range(0..=64 * axi_width),
    }
}

pub fn brute_floorplan(p: &FloorplanProblem) -> FloorplanSolution {
    let mut best = FloorplanSolution { u1: 0, u2: 0, objective: 0 };
    for u1 in 0..=64u64 {
        for u2 in 0..=64u64 {
            let fits = u1 * p.tree_resources <= p.die1
                && u2 * p.tree_resources <= p.die2
                && (u1 + u2) * p.axi_width <= p.crossing_budget;
            let better = u1 + u2 > best.objective || (u1 + u2 == best.objective && u1 > best.u1);
            if fits && better {
                best = FloorplanSolution { u1, u2, objective: u1 + u2 };
            }
        }
    }
    best
}

/// Lateral links on the path between two groups, found by breadth-first
/// search over the group chain.
pub fn path_links(from_group: usize, to_group: usize) -> BTreeSet<usize> {
    let groups = CHANNELS / GROUP_SIZE;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; groups];
    let mut seen = vec![false; groups];
    let mut queue = VecDeque::from([from_group]);
    seen[from_group] = true;
    while let Some(g) = queue.pop_front() {
        // Link k joins groups k and k + 1.
        let mut next = Vec::new();
        if g > 0 {
            next.push((g - 1, g - 1));
        }
        if g + 1 < groups {
            next.push((g + 1, g));
        }
        for (n, link) in next {
            if !seen[n] {
                seen[n] = true;
                prev[n] = Some((g, link));
                queue.push_back(n);
            }
        }
    }
    let mut links = BTreeSet::new();
    let mut at = to_group;
    while let Some((p, link)) = prev[at] {
        links.insert(link);
        at = p;
    }
    links
}

/// (phase, link, (lower AXI, higher AXI)) for every pair sharing a link.
pub fn oracle_conflicts(layout: &ChannelLayout) -> BTreeSet<(Phase, usize, (usize, usize))> {
    let mut found = BTreeSet::new();
    for phase in [Phase::One, Phase::Two] {
        let mut users: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for a in layout.phase(phase) {
            for &ch in a.reads.iter().chain(&a.writes) {
                for link in path_links(a.port / GROUP_SIZE, ch / GROUP_SIZE) {
                    users.entry(link).or_default().insert(a.axi);
                }
            }
        }
        for (link, axis) in users {
            for &x in &axis {
                for &y in axis.range(x + 1..) {
                    found.insert((phase, link, (x, y)));
                }
            }
        }
    }
    found
}
