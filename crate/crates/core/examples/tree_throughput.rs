//! Cycle simulation of a 16-leaf tree emitting 8 records per cycle, fed
//! from four sorted channels cut into four sub-runs each. Consecutive
//! sub-runs leave most leaves idle; interleaved ones keep them all busy.

use hbmsort::merge_net::Record;
use hbmsort::merge_tree::{build_tree, run_pass_cycles, FeedRate, LeafFeed};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CHANNELS: usize = 4;
const SUBRUNS: usize = 4;
const PER_CHANNEL: usize = 1 << 14;

fn feeds(interleaved: bool, rng: &mut ChaCha8Rng) -> Vec<LeafFeed> {
    let mut keys: Vec<u32> = (0..(CHANNELS * PER_CHANNEL) as u32).collect();
    keys.shuffle(rng);
    let mut out = Vec::new();
    for chunk in keys.chunks(PER_CHANNEL) {
        let mut channel = chunk.to_vec();
        if !interleaved {
            channel.sort_unstable();
        }
        for sub in channel.chunks(PER_CHANNEL / SUBRUNS) {
            let mut run: Vec<Record> = sub.iter().map(|&k| Record::new(k, 0)).collect();
            run.sort_unstable_by_key(|r| r.key);
            out.push(LeafFeed::new(run));
        }
    }
    out
}

fn main() -> hbmsort::Result<()> {
    let tree = build_tree(8, 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, interleaved) in [("consecutive sub-runs", false), ("interleaved sub-runs", true)] {
        let pass = run_pass_cycles(&tree, &feeds(interleaved, &mut rng), FeedRate::PerLeaf(1.0))?;
        println!("{name:<22} {:>7} cycles, {:.2} records/cycle", pass.cycles, pass.root_active_rate);
    }
    Ok(())
}
