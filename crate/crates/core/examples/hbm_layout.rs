//! Channel assignment checks and effective bandwidth per access pattern.

use hbmsort::hbm::{effective_bandwidth, validate_layout, BandwidthProfile, ChannelLayout, HbmTopology, Pattern, Phase};

fn main() -> hbmsort::Result<()> {
    let topo = HbmTopology::default();
    let layout = ChannelLayout::reference();
    println!(
        "reference layout: {} AXI in phase 1, {} in phase 2, {} lateral conflicts",
        layout.axi_count(Phase::One),
        layout.axi_count(Phase::Two),
        validate_layout(&layout, &topo)?.len()
    );

    // Two interfaces reading across each other's groups share lateral links.
    let mut bad = layout.clone();
    bad.phase1[0].reads = vec![9];
    bad.phase1[4].reads = vec![1];
    for c in validate_layout(&bad, &topo)? {
        println!("  conflict on link {} between AXI {} and AXI {}", c.link, c.axis.0, c.axis.1);
    }

    let profile = BandwidthProfile::default();
    println!("pattern  burst  GB/s");
    for m in [1, 2, 4, 8] {
        let pattern = Pattern::new(m)?;
        for burst in [512, 1024, 4096] {
            let bw = effective_bandwidth(pattern, burst, &profile, &topo)?;
            println!("{pattern:>7} {burst:>6} {:>5.1}", bw / 1e9);
        }
    }
    Ok(())
}
