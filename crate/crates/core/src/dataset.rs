//! Synthetic inputs and the on-disk record format: 8 bytes per record,
//! key then value, both little-endian `u32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge_net::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Keys `1..=N`, each once, shuffled.
    #[default]
    Permutation,
    /// Keys drawn uniformly from `1..=N`; duplicates expected.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub records: u64,
    pub distribution: Distribution,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn permutation(records: u64, seed: u64) -> Self {
        Self { records, distribution: Distribution::Permutation, seed }
    }

    /// Values carry the record's original position so ordering among equal
    /// keys stays observable.
    pub fn generate(&self) -> Result<Vec<Record>> {
        let n = u32::try_from(self.records)
            .map_err(|_| Error::Config(format!("{} records exceed the 32-bit key space", self.records)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut keys: Vec<u32> = match self.distribution {
            Distribution::Permutation => (1..=n).collect(),
            Distribution::Uniform => (0..n).map(|_| rng.random_range(1..=n)).collect(),
        };
        if self.distribution == Distribution::Permutation {
            keys.shuffle(&mut rng);
        }
        Ok(keys.into_iter().zip(0..).map(|(k, i)| Record::new(k, i)).collect())
    }
}

pub fn encode(records: &[Record]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(records.len() * Record::BYTES);
    for r in records {
        bytes.extend_from_slice(&r.to_le_bytes());
    }
    bytes
}

pub fn decode(bytes: &[u8]) -> Option<Vec<Record>> {
    if !bytes.len().is_multiple_of(Record::BYTES) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(Record::BYTES)
            .map(|c| Record::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode(records)).and_then(|()| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    decode(&bytes).ok_or_else(|| Error::Format {
        path: path.into(),
        reason: format!("size {} B is not a multiple of {} B", bytes.len(), Record::BYTES),
    })
}
