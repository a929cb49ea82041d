//! End-to-end sort of a shuffled permutation, in functional and cycle mode,
//! with the report each run produces.

use hbmsort::config::Config;
use hbmsort::harness::sort_generated;
use hbmsort::sort_engine::{Mode, RunOptions};

fn main() -> hbmsort::Result<()> {
    let config = Config::default();
    let n = 1 << 16;
    for mode in [Mode::Functional, Mode::Cycles] {
        let report = sort_generated(&config, n, 42, RunOptions { mode, threads: 0 })?;
        print!("{}", report.to_text());
    }
    Ok(())
}
