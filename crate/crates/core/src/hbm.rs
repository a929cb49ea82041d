//! 32-channel HBM model: crossbar groups and lateral links, AXI channel
//! layouts, burst-size dependent bandwidth and a burst-level service queue.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge_net::Record;

pub const CHANNELS: usize = 32;
pub const GROUP_SIZE: usize = 4;
pub const GROUPS: usize = CHANNELS / GROUP_SIZE;
/// Link `i` joins crossbar groups `i` and `i + 1`.
pub const LATERAL_LINKS: usize = GROUPS - 1;

/// Smallest and largest burst sizes covered by profiles, in bytes.
pub const MIN_BURST: usize = 64;
pub const MAX_BURST: usize = 4096;

const DEFAULT_PROFILE: &str = include_str!("../config/bandwidth_profile.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbmTopology {
    /// Peak bytes per second of one channel.
    pub channel_bandwidth: f64,
    /// Bytes per channel.
    pub channel_capacity: u64,
}

impl Default for HbmTopology {
    fn default() -> Self {
        Self {
            channel_bandwidth: 420e9 / CHANNELS as f64,
            channel_capacity: 8 << 30 >> 5,
        }
    }
}

impl HbmTopology {
    pub fn group_of(channel: usize) -> usize {
        channel / GROUP_SIZE
    }

    pub fn channel_records(&self) -> u64 {
        self.channel_capacity / Record::BYTES as u64
    }
}

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, index, limit })
    }
}

/// Lateral links traversed from AXI port `axi` (attached next to channel
/// `axi`) to `channel`, in traversal order.
pub fn route(axi: usize, channel: usize, _topo: &HbmTopology) -> Result<Vec<usize>> {
    check_index("AXI port", axi, CHANNELS)?;
    check_index("HBM channel", channel, CHANNELS)?;
    let (from, to) = (HbmTopology::group_of(axi), HbmTopology::group_of(channel));
    Ok(if from <= to {
        (from..to).collect()
    } else {
        (to..from).rev().collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    One,
    Two,
}

/// Channels one user-side AXI interface touches in a phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiAssignment {
    /// Logical interface number (AXI-i).
    pub axi: usize,
    /// Physical port the interface is attached to; decides its home group.
    pub port: usize,
    pub reads: Vec<usize>,
    pub writes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub phase1: Vec<AxiAssignment>,
    pub phase2: Vec<AxiAssignment>,
}

impl ChannelLayout {
    /// The conflict-free layout: in phase 1 AXI-i serves the pair
    /// `(2i, 2i+1)`; in phase 2 AXI-4i spans channels `8i..8i+8` while
    /// AXI-(4i+j) keeps its local pair.
    pub fn reference() -> Self {
        let trees = CHANNELS / 2;
        let phase1 = (0..trees)
            .map(|i| AxiAssignment { axi: i, port: 2 * i, reads: vec![2 * i], writes: vec![2 * i + 1] })
            .collect();
        let phase2 = (0..trees)
            .map(|a| {
                let (i, j) = (a / 4, a % 4);
                if j == 0 {
                    AxiAssignment {
                        axi: a,
                        port: 8 * i,
                        reads: (0..4).map(|k| 8 * i + 2 * k).collect(),
                        writes: (0..4).map(|k| 8 * i + 2 * k + 1).collect(),
                    }
                } else {
                    let ch = 8 * i + 2 * j;
                    AxiAssignment { axi: a, port: ch, reads: vec![ch], writes: vec![ch + 1] }
                }
            })
            .collect();
        Self { phase1, phase2 }
    }

    pub fn phase(&self, phase: Phase) -> &[AxiAssignment] {
        match phase {
            Phase::One => &self.phase1,
            Phase::Two => &self.phase2,
        }
    }

    /// Number of distinct AXI interfaces used in a phase.
    pub fn axi_count(&self, phase: Phase) -> usize {
        self.phase(phase).iter().map(|a| a.axi).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkConflict {
    pub phase: Phase,
    pub link: usize,
    /// The two AXI interfaces, lower number first.
    pub axis: (usize, usize),
}

/// Lateral links an assignment occupies.
pub fn links_used(assignment: &AxiAssignment, topo: &HbmTopology) -> Result<BTreeSet<usize>> {
    let mut links = BTreeSet::new();
    for &ch in assignment.reads.iter().chain(&assignment.writes) {
        links.extend(route(assignment.port, ch, topo)?);
    }
    Ok(links)
}

/// Every pair of AXI interfaces that share a lateral link within one phase.
pub fn validate_layout(layout: &ChannelLayout, topo: &HbmTopology) -> Result<Vec<LinkConflict>> {
    let mut conflicts = Vec::new();
    for phase in [Phase::One, Phase::Two] {
        let mut users: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for a in layout.phase(phase) {
            for link in links_used(a, topo)? {
                users.entry(link).or_default().insert(a.axi);
            }
        }
        for (link, axis) in users {
            let axis: Vec<usize> = axis.into_iter().collect();
            for (i, &x) in axis.iter().enumerate() {
                for &y in &axis[i + 1..] {
                    conflicts.push(LinkConflict { phase, link, axis: (x, y) });
                }
            }
        }
    }
    Ok(conflicts)
}

/// Access pattern m×m: read from `m` channels, write to `m` neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern(pub usize);

impl Pattern {
    pub const ONE: Pattern = Pattern(1);
    pub const FOUR: Pattern = Pattern(4);

    pub fn new(m: usize) -> Result<Self> {
        if matches!(m, 1 | 2 | 4 | 8) {
            Ok(Self(m))
        } else {
            Err(Error::Config(format!("pattern {m}x{m} is not one of 1x1, 2x2, 4x4, 8x8")))
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{0}x{0}", self.0)
    }
}

fn check_burst(burst: usize) -> Result<()> {
    if burst.is_power_of_two() && (MIN_BURST..=MAX_BURST).contains(&burst) {
        Ok(())
    } else {
        Err(Error::Config(format!("burst size {burst} B is not a power of two in 64..=4096")))
    }
}

/// Measured fraction of peak bandwidth per (pattern, burst size).
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthProfile {
    table: BTreeMap<(Pattern, usize), f64>,
    pub outstanding_bursts: u32,
}

impl Default for BandwidthProfile {
    fn default() -> Self {
        Self::parse(DEFAULT_PROFILE).expect("bundled bandwidth profile is valid")
    }
}

impl BandwidthProfile {
    /// Parses a `"MxM,BYTES"` key.
    pub fn parse_key(key: &str) -> Result<(Pattern, usize)> {
        let bad = || Error::Config(format!("unknown profile key {key:?}; expected \"MxM,BYTES\""));
        let (pattern, burst) = key.split_once(',').ok_or_else(bad)?;
        let (m1, m2) = pattern.trim().split_once('x').ok_or_else(bad)?;
        let m: usize = m1.parse().map_err(|_| bad())?;
        if m2.parse::<usize>().ok() != Some(m) {
            return Err(bad());
        }
        let burst: usize = burst.trim().parse().map_err(|_| bad())?;
        check_burst(burst)?;
        Ok((Pattern::new(m)?, burst))
    }

    pub fn from_entries<K: AsRef<str>>(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (key, eff) in entries {
            let key = Self::parse_key(key.as_ref())?;
            if !(eff > 0.0 && eff <= 1.0) {
                return Err(Error::Config(format!("efficiency {eff} for {}x{0},{} outside (0, 1]", key.0 .0, key.1)));
            }
            table.insert(key, eff);
        }
        let profile = Self { table, outstanding_bursts: 32 };
        profile.check_monotone()?;
        Ok(profile)
    }

    /// Parses a profile file: top-level `"MxM,BYTES" = efficiency` pairs and
    /// an optional `outstanding_bursts`.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut outstanding = 32;
        let mut entries = Vec::new();
        for (key, value) in doc {
            if key == "outstanding_bursts" {
                outstanding = value
                    .as_integer()
                    .and_then(|v| u32::try_from(v).ok())
                    .ok_or_else(|| Error::Config("outstanding_bursts must be a positive integer".into()))?;
                continue;
            }
            let eff = value
                .as_float()
                .or_else(|| value.as_integer().map(|v| v as f64))
                .ok_or_else(|| Error::Config(format!("profile entry {key:?} must be a number")))?;
            entries.push((key, eff));
        }
        let mut profile = Self::from_entries(entries)?;
        profile.outstanding_bursts = outstanding;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev: Option<((Pattern, usize), f64)> = None;
        for (&key, &eff) in &self.table {
            if let Some((pk, pe)) = prev {
                if pk.0 == key.0 && eff < pe {
                    return Err(Error::Config(format!(
                        "efficiency for {} drops from {pe} at {} B to {eff} at {} B",
                        key.0, pk.1, key.1
                    )));
                }
            }
            prev = Some((key, eff));
        }
        Ok(())
    }

    pub fn efficiency(&self, pattern: Pattern, burst: usize) -> Result<f64> {
        self.table
            .get(&(pattern, burst))
            .copied()
            .ok_or(Error::MissingProfileEntry { m: pattern.0, burst })
    }

    /// Burst sizes listed for a pattern, ascending.
    pub fn bursts(&self, pattern: Pattern) -> Vec<usize> {
        self.table.keys().filter(|k| k.0 == pattern).map(|k| k.1).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Pattern, usize, f64)> + '_ {
        self.table.iter().map(|(&(p, b), &e)| (p, b, e))
    }

    /// Returns a copy with one entry replaced.
    pub fn with_entry(mut self, pattern: Pattern, burst: usize, eff: f64) -> Result<Self> {
        check_burst(burst)?;
        self.table.insert((pattern, burst), eff);
        self.check_monotone()?;
        Ok(self)
    }
}

/// Aggregate bytes/s of an m×m pattern at a given burst size.
pub fn effective_bandwidth(pattern: Pattern, burst: usize, profile: &BandwidthProfile, topo: &HbmTopology) -> Result<f64> {
    Pattern::new(pattern.0)?;
    check_burst(burst)?;
    let eff = profile.efficiency(pattern, burst)?;
    Ok(pattern.0 as f64 * topo.channel_bandwidth * eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstRequest {
    /// Issue time in seconds.
    pub at: f64,
    pub axi: usize,
    pub channel: usize,
    pub direction: Direction,
    pub bytes: u64,
}

/// Burst-level service model. A channel serves one burst at a time, reads
/// and writes alike; a burst leaving its home group also holds every
/// lateral link on its route for the duration of the transfer.
#[derive(Debug, Clone)]
pub struct HbmSim {
    topo: HbmTopology,
    efficiency: Vec<f64>,
    channel_free: Vec<f64>,
    link_free: Vec<f64>,
    written: Vec<u64>,
}

impl HbmSim {
    pub fn new(topo: HbmTopology) -> Self {
        Self {
            topo,
            efficiency: vec![1.0; CHANNELS],
            channel_free: vec![0.0; CHANNELS],
            link_free: vec![0.0; LATERAL_LINKS],
            written: vec![0; CHANNELS],
        }
    }

    /// Efficiency applied to bursts issued from an AXI port.
    pub fn set_efficiency(&mut self, axi: usize, eff: f64) -> Result<()> {
        check_index("AXI port", axi, CHANNELS)?;
        self.efficiency[axi] = eff;
        Ok(())
    }

    pub fn topology(&self) -> &HbmTopology {
        &self.topo
    }

    /// Bytes written so far per channel.
    pub fn written(&self) -> &[u64] {
        &self.written
    }

    /// Time by which all issued bursts complete.
    pub fn horizon(&self) -> f64 {
        self.channel_free.iter().copied().fold(0.0, f64::max)
    }

    /// Serves one burst and returns its completion time minus `at`.
    pub fn service_burst(&mut self, at: f64, axi: usize, channel: usize, direction: Direction, bytes: u64) -> Result<f64> {
        let links = route(axi, channel, &self.topo)?;
        if direction == Direction::Write {
            let total = self.written[channel] + bytes;
            if total > self.topo.channel_capacity {
                return Err(Error::ChannelOverflow { channel, bytes: total, capacity: self.topo.channel_capacity });
            }
            self.written[channel] = total;
        }
        let duration = bytes as f64 / (self.topo.channel_bandwidth * self.efficiency[axi]);
        let start = links
            .iter()
            .map(|&l| self.link_free[l])
            .fold(at.max(self.channel_free[channel]), f64::max);
        let end = start + duration;
        self.channel_free[channel] = end;
        for l in links {
            self.link_free[l] = end;
        }
        Ok(end - at)
    }

    /// Serves requests in `(at, axi)` order; results follow input order.
    pub fn service_all(&mut self, requests: &[BurstRequest]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..requests.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&requests[i], &requests[j]);
            a.at.total_cmp(&b.at).then(a.axi.cmp(&b.axi))
        });
        let mut deltas = vec![0.0; requests.len()];
        for i in order {
            let r = requests[i];
            deltas[i] = self.service_burst(r.at, r.axi, r.channel, r.direction, r.bytes)?;
        }
        Ok(deltas)
    }
}

/// Record contents of every channel.
#[derive(Debug, Clone)]
pub struct ChannelStore {
    channels: Vec<Vec<Record>>,
    capacity_records: u64,
}

impl ChannelStore {
    pub fn new(topo: &HbmTopology) -> Self {
        Self { channels: vec![Vec::new(); CHANNELS], capacity_records: topo.channel_records() }
    }

    pub fn append(&mut self, channel: usize, records: &[Record]) -> Result<()> {
        check_index("HBM channel", channel, CHANNELS)?;
        let ch = &mut self.channels[channel];
        let total = (ch.len() + records.len()) as u64;
        if total > self.capacity_records {
            return Err(Error::ChannelOverflow {
                channel,
                bytes: total * Record::BYTES as u64,
                capacity: self.capacity_records * Record::BYTES as u64,
            });
        }
        ch.extend_from_slice(records);
        Ok(())
    }

    pub fn read(&self, channel: usize) -> &[Record] {
        &self.channels[channel]
    }

    pub fn take(&mut self, channel: usize) -> Vec<Record> {
        std::mem::take(&mut self.channels[channel])
    }

    pub fn clear(&mut self, channel: usize) {
        self.channels[channel].clear();
    }

    pub fn capacity_records(&self) -> u64 {
        self.capacity_records
    }

    /// All channels, for handing disjoint pairs to independent workers.
    pub fn channels_mut(&mut self) -> &mut [Vec<Record>] {
        &mut self.channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn route_examples() {
        let topo = HbmTopology::default();
        assert_eq!(route(0, 3, &topo).unwrap(), Vec::<usize>::new());
        assert_eq!(route(0, 6, &topo).unwrap(), vec![0]);
        assert_eq!(route(4, 15, &topo).unwrap(), vec![1, 2]);
        assert_eq!(route(31, 0, &topo).unwrap(), vec![6, 5, 4, 3, 2, 1, 0]);
        assert!(matches!(route(32, 0, &topo), Err(Error::OutOfRange { .. })));
        assert!(route(0, 40, &topo).is_err());
    }

    #[test]
    fn reference_layout_accounting() {
        let layout = ChannelLayout::reference();
        let topo = HbmTopology::default();
        assert_eq!(layout.axi_count(Phase::One), 16);
        assert!(validate_layout(&layout, &topo).unwrap().is_empty());
        for a in &layout.phase1 {
            assert!(links_used(a, &topo).unwrap().is_empty());
        }
        let used: Vec<usize> = layout
            .phase2
            .iter()
            .flat_map(|a| links_used(a, &topo).unwrap())
            .collect();
        assert_eq!(used, vec![0, 2, 4, 6]);
    }

    #[test]
    fn defaults() {
        let topo = HbmTopology::default();
        assert_eq!(topo.channel_capacity, 256 << 20);
        assert!((topo.channel_bandwidth * 32.0 - 420e9).abs() < 1.0);
    }

    #[test]
    fn default_profile_shape() {
        let p = BandwidthProfile::default();
        assert_eq!(p.outstanding_bursts, 32);
        for b in [512, 1024, 2048, 4096] {
            assert_eq!(p.efficiency(Pattern::ONE, b).unwrap(), 1.0);
        }
        assert_eq!(p.efficiency(Pattern::FOUR, 4096).unwrap(), 1.0);
        assert!(p.efficiency(Pattern::FOUR, 2048).unwrap() < 1.0);
    }

    #[test]
    fn profile_rejects_bad_keys_and_values() {
        assert!(BandwidthProfile::parse("\"3x3,512\" = 1.0").is_err());
        assert!(BandwidthProfile::parse("\"1x1,500\" = 1.0").is_err());
        assert!(BandwidthProfile::parse("bogus = 1.0").is_err());
        assert!(BandwidthProfile::parse("\"1x2,512\" = 1.0").is_err());
        assert!(BandwidthProfile::parse("\"1x1,512\" = 1.5").is_err());
        assert!(BandwidthProfile::parse("\"1x1,512\" = 0.9\n\"1x1,1024\" = 0.8").is_err());
        let p = BandwidthProfile::parse("\"2x2,256\" = 0.5\noutstanding_bursts = 16").unwrap();
        assert_eq!(p.outstanding_bursts, 16);
        assert_eq!(p.efficiency(Pattern(2), 256).unwrap(), 0.5);
    }

    #[test]
    fn effective_bandwidth_examples() {
        let p = BandwidthProfile::default();
        let topo = HbmTopology::default();
        let peak = topo.channel_bandwidth;
        assert_eq!(effective_bandwidth(Pattern::ONE, 1024, &p, &topo).unwrap(), peak);
        assert_eq!(effective_bandwidth(Pattern::FOUR, 4096, &p, &topo).unwrap(), 4.0 * peak);
        let e = p.efficiency(Pattern::FOUR, 512).unwrap();
        assert_eq!(effective_bandwidth(Pattern::FOUR, 512, &p, &topo).unwrap(), 4.0 * peak * e);
        assert!(e < 1.0);
        let sparse = BandwidthProfile::parse("\"1x1,512\" = 1.0").unwrap();
        assert!(matches!(
            effective_bandwidth(Pattern::ONE, 1024, &sparse, &topo),
            Err(Error::MissingProfileEntry { m: 1, burst: 1024 })
        ));
        assert!(effective_bandwidth(Pattern(3), 1024, &p, &topo).is_err());
    }

    #[test]
    fn bursts_serialize_per_channel() {
        let topo = HbmTopology { channel_bandwidth: 1024e6, channel_capacity: 1 << 20 };
        let mut sim = HbmSim::new(topo);
        let d = 1024.0 / 1024e6;
        assert!((sim.service_burst(0.0, 0, 0, Direction::Write, 1024).unwrap() - d).abs() < 1e-15);
        assert!((sim.service_burst(0.0, 1, 0, Direction::Write, 1024).unwrap() - 2.0 * d).abs() < 1e-15);
    }

    #[test]
    fn distinct_channels_run_in_parallel() {
        let topo = HbmTopology { channel_bandwidth: 1024e6, channel_capacity: 1 << 20 };
        let mut sim = HbmSim::new(topo);
        let reqs: Vec<BurstRequest> = (0..4)
            .map(|c| BurstRequest { at: 0.0, axi: c, channel: c, direction: Direction::Read, bytes: 1024 })
            .collect();
        let d = 1024.0 / 1024e6;
        for delta in sim.service_all(&reqs).unwrap() {
            assert!((delta - d).abs() < 1e-15);
        }
    }

    #[test]
    fn lateral_link_contention_blocks() {
        let topo = HbmTopology { channel_bandwidth: 1024e6, channel_capacity: 1 << 20 };
        let mut sim = HbmSim::new(topo);
        let d = 1024.0 / 1024e6;
        // Both bursts cross link 0 towards different channels of group 1.
        sim.service_burst(0.0, 0, 4, Direction::Read, 1024).unwrap();
        let second = sim.service_burst(0.0, 1, 5, Direction::Read, 1024).unwrap();
        assert!((second - 2.0 * d).abs() < 1e-15);
        // An intra-group burst is unaffected.
        let local = sim.service_burst(0.0, 2, 2, Direction::Read, 1024).unwrap();
        assert!((local - d).abs() < 1e-15);
    }

    #[test]
    fn efficiency_stretches_bursts_and_capacity_is_enforced() {
        let topo = HbmTopology { channel_bandwidth: 1000.0, channel_capacity: 2048 };
        let mut sim = HbmSim::new(topo);
        sim.set_efficiency(0, 0.5).unwrap();
        assert!((sim.service_burst(0.0, 0, 0, Direction::Write, 1000).unwrap() - 2.0).abs() < 1e-12);
        assert!(sim.service_burst(0.0, 0, 0, Direction::Write, 1000).is_ok());
        assert!(matches!(
            sim.service_burst(0.0, 0, 0, Direction::Write, 100),
            Err(Error::ChannelOverflow { channel: 0, .. })
        ));
        assert_eq!(sim.written()[0], 2000);
    }

    #[test]
    fn store_round_trips_records() {
        let topo = HbmTopology { channel_bandwidth: 1.0, channel_capacity: 64 };
        let mut store = ChannelStore::new(&topo);
        let data: Vec<Record> = (0..8).map(|i| Record::new(i, !i)).collect();
        store.append(3, &data).unwrap();
        assert_eq!(store.read(3), &data[..]);
        assert!(store.append(3, &data[..1]).is_err());
        assert_eq!(store.take(3), data);
        assert!(store.read(3).is_empty());
    }
}
