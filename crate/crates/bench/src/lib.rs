//! Fixtures shared by the solver benchmarks.

use lcdflow_core::scenario::initial_state;
use lcdflow_core::{Grid, Params, Scenario, ScenarioOptions, SimState};

/// Default `variable-density-2d` state on an `n × n` grid.
pub fn variable_density(n: usize) -> (SimState, Params) {
    let grid = Grid::torus(2, n).expect("power-of-two grid");
    let params = Params::default();
    let state = initial_state(Scenario::VariableDensity2d, grid, &params, &ScenarioOptions::default())
        .expect("preset");
    (state, params)
}
