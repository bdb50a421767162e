//! Monte Carlo experiments. Trials run in parallel; each draws from its own
//! counter-derived stream and results are reduced in trial order, so output
//! does not depend on the thread count.

mod filters;
mod game;
mod planner;
mod posterior_error;
mod response;

use rayon::prelude::*;

pub use filters::{run_table1, run_table2};
pub use game::{run_fig2, run_game_threshold};
pub use planner::{run_planner_demo, PlannerDemo};
pub use posterior_error::run_table3;
pub use response::{plateau_levels, relative_rms, run_fig3};

use crate::error::Result;

/// Stream index for row `row` of experiment `tag`.
pub(crate) fn stream(tag: u64, row: usize) -> u64 {
    (tag << 32) | row as u64
}

pub(crate) fn run_trials<T, F>(trials: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(trial).collect()
}
