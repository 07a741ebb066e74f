use std::path::Path;

use mmgp_core::grid::{Grid, GridConfig};
use mmgp_core::net::SimTime;
use mmgp_core::simnet::Scenario;

use crate::error::CliError;
use crate::util;

pub fn run(scenario: &Path, trace: Option<&Path>, settle: SimTime, cfg: GridConfig) -> Result<(), CliError> {
    let sc = Scenario::load(scenario).map_err(mmgp_core::grid::GridError::from)?;
    let mut grid = Grid::from_scenario(&sc, cfg)?;
    grid.sim_mut().set_tracing(trace.is_some());
    for line in grid.run_scenario(&sc, settle)? {
        println!("{line}");
    }
    let stats = grid.sim().stats();
    println!(
        "messages injected {} delivered {} dropped {}",
        stats.injected,
        stats.delivered,
        stats.dropped_total()
    );
    if let Some(path) = trace {
        util::write_atomic(path, grid.sim().trace_csv().as_bytes())?;
    }
    Ok(())
}
