//! EKF overconfidence and the grid estimator on the same observation streams.

use rand::Rng;
use robust_sensing::grid::{grid_prior, posterior, posterior_mean, SufficientSummary};
use robust_sensing::kalman::{ekf_update, GaussianBelief};
use robust_sensing::model::{observe, ControlVector, ParameterBox, ParameterVector, SinSystem};
use robust_sensing::rng::stream_rng;
use robust_sensing::stats::{paired_ratio, RunningMoments};

use super::{run_trials, stream};
use crate::config::FilterComparisonConfig;
use crate::error::Result;
use crate::table::ResultTable;

const TAG: u64 = 1;

struct TrialErrors {
    ekf_predicted: f64,
    ekf_squared: f64,
    grid_squared: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn trial(cfg: &FilterComparisonConfig, sys: &SinSystem, bound: f64, with_grid: bool, seed: u64, row: usize, t: u64) -> Result<TrialErrors> {
    let mut rng = stream_rng(seed, t, stream(TAG, row));
    let truth = cfg.center + rng.random_range(-bound..=bound);
    let p = ParameterVector::scalar(truth)?;
    let u = ControlVector::empty();

    let mut belief = GaussianBelief::scalar(cfg.center, bound * bound / 3.0)?;
    let mut summary = SufficientSummary::new();
    for _ in 0..cfg.observations {
        let z = observe(sys, &u, &p, &mut rng)?;
        belief = ekf_update(&belief, sys, &u, &z)?;
        summary.push(&u, &z)?;
    }
    let grid_squared = if with_grid {
        let prior = grid_prior(&ParameterBox::symmetric(&[cfg.center], &[bound])?, cfg.grid_points, cfg.mass_rule.into())?;
        Some((posterior_mean(&posterior(&prior, sys, &summary)?)[0] - truth).powi(2))
    } else {
        None
    };
    Ok(TrialErrors {
        ekf_predicted: belief.covariance()[(0, 0)],
        ekf_squared: (belief.mean()[0] - truth).powi(2),
        grid_squared,
    })
}

fn per_bound(cfg: &FilterComparisonConfig, with_grid: bool, seed: u64) -> Result<Vec<(f64, Vec<TrialErrors>)>> {
    cfg.validate()?;
    let sys = SinSystem::new(cfg.amplitude, cfg.noise_var)?;
    cfg.bounds
        .iter()
        .enumerate()
        .map(|(row, &bound)| Ok((bound, run_trials(cfg.trials, |t| trial(cfg, &sys, bound, with_grid, seed, row, t))?)))
        .collect()
}

/// Covariance-predicted against observed squared error of the EKF per prior
/// half-width.
pub fn run_table1(cfg: &FilterComparisonConfig, seed: u64) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "table1",
        &["bound", "trials", "predicted_mse", "predicted_se", "observed_mse", "observed_se", "ratio", "percent_error"],
    );
    for (bound, errors) in per_bound(cfg, false, seed)? {
        let predicted: RunningMoments = errors.iter().map(|e| e.ekf_predicted).collect();
        let observed: RunningMoments = errors.iter().map(|e| e.ekf_squared).collect();
        let ratio = predicted.mean() / observed.mean();
        table.push(vec![
            bound,
            errors.len() as f64,
            predicted.mean(),
            predicted.std_error(),
            observed.mean(),
            observed.std_error(),
            ratio,
            100.0 * (ratio - 1.0),
        ]);
    }
    table.note("observations_per_trial", cfg.observations);
    table.note("noise_var", cfg.noise_var);
    Ok(table)
}

/// Observed squared error of the grid estimator and its paired ratio to the
/// EKF's, both fed the same observations.
pub fn run_table2(cfg: &FilterComparisonConfig, seed: u64) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "table2",
        &["bound", "trials", "grid_mse", "grid_se", "ekf_mse", "ekf_se", "ratio", "ratio_se"],
    );
    for (bound, errors) in per_bound(cfg, true, seed)? {
        let grid: Vec<f64> = errors.iter().filter_map(|e| e.grid_squared).collect();
        let ekf: Vec<f64> = errors.iter().map(|e| e.ekf_squared).collect();
        let (ratio, ratio_se) = paired_ratio(&grid, &ekf);
        let g: RunningMoments = grid.iter().copied().collect();
        let e: RunningMoments = ekf.iter().copied().collect();
        table.push(vec![bound, errors.len() as f64, g.mean(), g.std_error(), e.mean(), e.std_error(), ratio, ratio_se]);
    }
    table.note("observations_per_trial", cfg.observations);
    table.note("grid_points", cfg.grid_points);
    Ok(table)
}
