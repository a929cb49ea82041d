//! Throughput equations, resource estimates, floorplan and burst choice for
//! the default 4 GB configuration.

use hbmsort::analytics::{enumerated_l, unit_cost, ResourceModelParams};
use hbmsort::config::Config;
use hbmsort::harness::cmd_model;

fn main() -> hbmsort::Result<()> {
    let report = cmd_model(&Config::default())?;
    print!("{}", report.to_text());

    let params = ResourceModelParams::default();
    println!("comparators per tree of width p (l = p):");
    let mut p = 2;
    while p <= 32 {
        let l = enumerated_l(p, &params)?;
        let half = enumerated_l(p / 2, &params)?;
        println!("  p={p:<3} L={l:<6} 2L(p/2)+unit={:<6} ratio {:.2}", 2 * half + unit_cost(p)?, l as f64 / half.max(1) as f64);
        p *= 2;
    }
    Ok(())
}
