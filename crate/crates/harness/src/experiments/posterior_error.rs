//! Posterior-computed against observed squared error of the grid estimator.

use rand::Rng;
use robust_sensing::grid::{grid_prior, posterior, posterior_mean, posterior_mse, SufficientSummary};
use robust_sensing::model::{observe_batch, ControlVector, ParameterBox, ParameterVector, SinSystem};
use robust_sensing::rng::stream_rng;
use robust_sensing::stats::RunningMoments;

use super::{run_trials, stream};
use crate::config::PosteriorErrorConfig;
use crate::error::Result;
use crate::table::ResultTable;

const TAG: u64 = 3;

/// One row per (iterations, bound). Each iteration contributes
/// `samples_per_iteration` observations to the same posterior.
pub fn run_table3(cfg: &PosteriorErrorConfig, seed: u64) -> Result<ResultTable> {
    cfg.validate()?;
    let sys = SinSystem::new(cfg.amplitude, cfg.noise_var)?;
    let u = ControlVector::empty();
    let mut table = ResultTable::new(
        "table3",
        &["iterations", "bound", "trials", "computed_mse", "computed_se", "observed_mse", "observed_se", "percent_difference"],
    );
    let mut row = 0;
    for &iterations in &cfg.iterations {
        for &bound in &cfg.bounds {
            let prior = grid_prior(&ParameterBox::symmetric(&[cfg.center], &[bound])?, cfg.grid_points, cfg.mass_rule.into())?;
            let count = iterations * cfg.samples_per_iteration;
            let pairs = run_trials(cfg.trials, |t| {
                let mut rng = stream_rng(seed, t, stream(TAG, row));
                let truth = cfg.center + rng.random_range(-bound..=bound);
                let zs = observe_batch(&sys, &u, &ParameterVector::scalar(truth)?, count, &mut rng)?;
                let mut summary = SufficientSummary::new();
                summary.extend(&u, &zs)?;
                let post = posterior(&prior, &sys, &summary)?;
                let estimate = posterior_mean(&post);
                Ok((posterior_mse(&post, &estimate)?[0], (estimate[0] - truth).powi(2)))
            })?;
            let computed: RunningMoments = pairs.iter().map(|p| p.0).collect();
            let observed: RunningMoments = pairs.iter().map(|p| p.1).collect();
            table.push(vec![
                iterations as f64,
                bound,
                cfg.trials as f64,
                computed.mean(),
                computed.std_error(),
                observed.mean(),
                observed.std_error(),
                100.0 * (computed.mean() - observed.mean()) / observed.mean(),
            ]);
            row += 1;
        }
    }
    table.note("samples_per_iteration", cfg.samples_per_iteration);
    table.note("noise_var", cfg.noise_var);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn many_samples_collapse_both_errors() {
        let cfg = PosteriorErrorConfig {
            trials: 200,
            iterations: vec![3],
            bounds: vec![0.05],
            samples_per_iteration: 2000,
            ..Default::default()
        };
        let t = run_table3(&cfg, 9).unwrap();
        let cell = 0.05 * 2.0 / 4.0;
        assert!(t.get(&t.rows[0], "computed_mse") < cell * cell);
        assert!(t.get(&t.rows[0], "observed_mse") < cell * cell);
    }
}
