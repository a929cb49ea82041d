use serde::{Deserialize, Serialize};

/// Trees to place on the two dies away from memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloorplanProblem {
    /// Resources one tree needs.
    pub tree_resources: u64,
    /// Resources free on the far die (u1) and the middle die (u2).
    pub die1: u64,
    pub die2: u64,
    /// Crossing signals one tree's memory interface needs.
    pub axi_width: u64,
    /// Crossing signals available towards the memory die.
    pub crossing_budget: u64,
}

impl Default for FloorplanProblem {
    fn default() -> Self {
        Self { tree_resources: 40_000, die1: 340_000, die2: 260_000, axi_width: 1_600, crossing_budget: 23_040 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorplanSolution {
    pub u1: u64,
    pub u2: u64,
    pub objective: u64,
}

/// Maximises `u1 + u2` subject to the crossing budget and both die
/// capacities, preferring the larger `u1` among optimal placements.
///
/// The constraints are two independent upper bounds plus a bound on the
/// sum, so filling die 1 first and topping up with die 2 is optimal.
pub fn floorplan_solve(prob: &FloorplanProblem) -> FloorplanSolution {
    let per_die = |a: u64| a.checked_div(prob.tree_resources).unwrap_or(u64::MAX);
    let crossing = prob.crossing_budget.checked_div(prob.axi_width).unwrap_or(u64::MAX);
    let u1 = per_die(prob.die1).min(crossing);
    let u2 = per_die(prob.die2).min(crossing - u1);
    FloorplanSolution { u1, u2, objective: u1 + u2 }
}
