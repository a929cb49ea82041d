//! Throughput across data sizes. Small sizes are sorted for real on a
//! reduced-capacity memory; the full range comes from the plan.

use hbmsort::config::{Config, SweepConfig};
use hbmsort::harness::cmd_sweep;
use hbmsort::sort_engine::RunOptions;

fn main() -> hbmsort::Result<()> {
    let mut desk = Config::default();
    desk.hbm.channel_capacity = 1 << 20;
    desk.sweep = SweepConfig { min_records: 1 << 14, max_records: 1 << 20, materialize_limit: 1 << 20 };
    print!("{}", cmd_sweep(&desk, 7, RunOptions::default())?.to_text());

    print!("{}", cmd_sweep(&Config::default(), 0, RunOptions::default())?.to_text());
    Ok(())
}
