use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge_net::Record;

/// Phase-2 root stream cut into batches written round-robin over a set of
/// channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchedOutput {
    pub batch_records: usize,
    /// Physical channel of each slot, in visit order.
    pub channels: Vec<usize>,
    /// Records written to each slot.
    pub streams: Vec<Vec<Record>>,
    /// Records in the root stream, padding included.
    pub records: u64,
    /// Trailing sentinel records to drop after reassembly.
    pub padding: u64,
}

impl BatchedOutput {
    /// Distributes `stream` batch by batch over `channels`.
    pub fn from_stream(stream: &[Record], batch_records: usize, channels: Vec<usize>, padding: u64) -> Self {
        let mut streams = vec![Vec::new(); channels.len()];
        for (b, batch) in stream.chunks(batch_records).enumerate() {
            streams[b % channels.len()].extend_from_slice(batch);
        }
        Self { batch_records, channels, streams, records: stream.len() as u64, padding }
    }

    pub fn batches(&self) -> usize {
        (self.records as usize).div_ceil(self.batch_records)
    }

    /// Slot and length of batch `b`.
    pub fn locate(&self, b: usize) -> (usize, usize) {
        let len = self.batch_records.min(self.records as usize - b * self.batch_records);
        (b % self.channels.len(), len)
    }
}

/// Reads batches back in visit order and drops trailing padding.
pub fn reconstruct_output(b: &BatchedOutput) -> Result<Vec<Record>> {
    let slots = b.channels.len();
    if slots == 0 || b.streams.len() != slots || b.batch_records == 0 {
        return Err(Error::BatchIntegrity(0));
    }
    let mut out = Vec::with_capacity(b.records as usize);
    let mut offsets = vec![0usize; slots];
    for batch in 0..b.batches() {
        let (slot, len) = b.locate(batch);
        let stream = &b.streams[slot];
        let start = offsets[slot];
        let chunk = stream.get(start..start + len).ok_or(Error::BatchIntegrity(batch))?;
        out.extend_from_slice(chunk);
        offsets[slot] += len;
    }
    if let Some(slot) = (0..slots).find(|&s| offsets[s] != b.streams[s].len()) {
        // Surplus data: report the first batch index that slot would hold next.
        return Err(Error::BatchIntegrity(offsets[slot] / b.batch_records * slots + slot));
    }
    let keep = out.len().saturating_sub(b.padding as usize);
    out.truncate(keep);
    Ok(out)
}

/// Checks that keys are exactly `1..=n` in order.
pub fn verify_permutation(output: &[Record], n: u64) -> Result<()> {
    if output.len() as u64 != n {
        return Err(Error::LengthMismatch { expected: n, actual: output.len() as u64 });
    }
    match output.iter().enumerate().find(|(i, r)| u64::from(r.key) != *i as u64 + 1) {
        Some((index, r)) => Err(Error::Verification { index, expected: index as u64 + 1, found: r.key }),
        None => Ok(()),
    }
}

/// Order-independent digest of a record multiset.
pub fn fingerprint(records: &[Record]) -> u64 {
    records.iter().fold(0u64, |acc, r| {
        let mut x = (u64::from(r.key) << 32 | u64::from(r.value)).wrapping_add(0x9e37_79b9_7f4a_7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        acc.wrapping_add(x ^ (x >> 31))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(keys: impl IntoIterator<Item = u32>) -> Vec<Record> {
        keys.into_iter().map(|k| Record::new(k, 0)).collect()
    }

    #[test]
    fn single_batch_identity() {
        let data = recs(1..=5);
        let b = BatchedOutput::from_stream(&data, 8, vec![1], 0);
        assert_eq!(reconstruct_output(&b).unwrap(), data);
    }

    #[test]
    fn round_robin_interleave() {
        let data = recs(0..16);
        let b = BatchedOutput::from_stream(&data, 2, vec![1, 3, 5, 7], 0);
        assert_eq!(b.streams[0], recs([0, 1, 8, 9]));
        assert_eq!(b.streams[3], recs([6, 7, 14, 15]));
        assert_eq!(reconstruct_output(&b).unwrap(), data);
    }

    #[test]
    fn short_batch_is_reported() {
        let data = recs(0..16);
        let mut b = BatchedOutput::from_stream(&data, 2, vec![1, 3, 5, 7], 0);
        b.streams[2].truncate(3);
        assert!(matches!(reconstruct_output(&b), Err(Error::BatchIntegrity(6))));
        let mut b = BatchedOutput::from_stream(&data, 2, vec![1, 3, 5, 7], 0);
        b.streams[1].push(Record::new(99, 0));
        assert!(matches!(reconstruct_output(&b), Err(Error::BatchIntegrity(_))));
    }

    #[test]
    fn padding_is_stripped() {
        let mut data = recs(1..=6);
        data.extend(recs([u32::MAX; 2]));
        let b = BatchedOutput::from_stream(&data, 3, vec![0, 2], 2);
        assert_eq!(reconstruct_output(&b).unwrap(), recs(1..=6));
    }

    #[test]
    fn verify_examples() {
        assert!(verify_permutation(&recs([1, 2, 3, 4]), 4).is_ok());
        assert!(matches!(
            verify_permutation(&recs([1, 2, 2, 4]), 4),
            Err(Error::Verification { index: 2, expected: 3, found: 2 })
        ));
        assert!(matches!(verify_permutation(&recs([1, 2]), 3), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn fingerprint_ignores_order() {
        let a = recs([3, 1, 2]);
        let b = recs([1, 2, 3]);
        assert_eq!(fingerprint(&a), fingerprint(&b));
        assert_ne!(fingerprint(&a), fingerprint(&recs([1, 2, 4])));
    }
}
