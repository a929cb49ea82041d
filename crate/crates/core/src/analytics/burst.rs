use serde::{Deserialize, Serialize};

use crate::hbm::{BandwidthProfile, Pattern};

use super::resource::buffer_luts;

/// Efficiency a burst must reach to count as peak.
pub const PEAK_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstChoice {
    pub burst: usize,
    pub efficiency: f64,
    pub buffer_luts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSelection {
    pub phase1: Option<BurstChoice>,
    pub phase2: Option<BurstChoice>,
    pub warnings: Vec<String>,
}

/// Cheapest burst reaching peak for one pattern; equal LUT cost goes to
/// the larger burst. Without a peak burst, the most efficient one.
fn pick(profile: &BandwidthProfile, pattern: Pattern, warnings: &mut Vec<String>) -> Option<BurstChoice> {
    let options: Vec<BurstChoice> = profile
        .bursts(pattern)
        .into_iter()
        .map(|burst| BurstChoice {
            burst,
            efficiency: profile.efficiency(pattern, burst).unwrap_or(0.0),
            buffer_luts: buffer_luts(burst),
        })
        .collect();
    let peak = options
        .iter()
        .filter(|c| c.efficiency >= PEAK_THRESHOLD)
        .min_by(|a, b| a.buffer_luts.cmp(&b.buffer_luts).then(b.burst.cmp(&a.burst)));
    if let Some(&c) = peak {
        return Some(c);
    }
    let best = options.iter().max_by(|a, b| a.efficiency.total_cmp(&b.efficiency)).copied();
    match best {
        Some(c) => warnings.push(format!(
            "pattern {pattern}: no burst reaches {:.0}% of peak; best is {} B at {:.0}%",
            PEAK_THRESHOLD * 100.0,
            c.burst,
            c.efficiency * 100.0
        )),
        None => warnings.push(format!("pattern {pattern}: no profile entries")),
    }
    best
}

/// Burst sizes for the phase-1 (1x1) and phase-2 (4x4) patterns.
/// `lut_budget` bounds the buffer LUTs of one tree with `leaves` leaves.
pub fn select_burst_sizes(profile: &BandwidthProfile, leaves: usize, lut_budget: Option<u64>) -> BurstSelection {
    let mut warnings = Vec::new();
    let phase1 = pick(profile, Pattern::ONE, &mut warnings);
    let phase2 = pick(profile, Pattern::FOUR, &mut warnings);
    if let Some(budget) = lut_budget {
        for (name, choice) in [("phase 1", phase1), ("phase 2", phase2)] {
            if let Some(c) = choice {
                let need = leaves as u64 * c.buffer_luts;
                if need > budget {
                    warnings.push(format!("{name}: {need} buffer LUTs per tree exceed the budget of {budget}"));
                }
            }
        }
    }
    BurstSelection { phase1, phase2, warnings }
}
