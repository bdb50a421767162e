//! Linear game: randomization threshold and the error-term sweep.

use robust_sensing::game::{error_term_comparison, randomization_threshold};

use crate::config::{ErrorTermConfig, ThresholdConfig};
use crate::error::Result;
use crate::table::ResultTable;

const TAG: u64 = 2;

/// Predicted and simulated error of the game filter and of the filter that
/// assumes the smallest slope, per prior variance.
pub fn run_fig2(cfg: &ErrorTermConfig, seed: u64) -> Result<ResultTable> {
    cfg.validate()?;
    let rows = error_term_comparison(
        cfg.slope_lo,
        cfg.slope_hi,
        cfg.noise_var,
        &cfg.prior_vars,
        cfg.atoms,
        cfg.trials,
        robust_sensing::rng::derive_seed(seed, TAG, 0),
    )?;
    let mut table = ResultTable::new(
        "fig2",
        &[
            "prior_var",
            "randomized",
            "game_gain",
            "game_predicted",
            "game_observed",
            "game_se",
            "lower_gain",
            "lower_predicted",
            "lower_observed",
            "lower_se",
            "trials",
        ],
    );
    for r in rows {
        table.push(vec![
            r.prior_var,
            f64::from(u8::from(r.randomized)),
            r.game_gain,
            r.game_predicted,
            r.game_observed,
            r.game_std_error,
            r.lower_gain,
            r.lower_predicted,
            r.lower_observed,
            r.lower_std_error,
            r.trials as f64,
        ]);
    }
    table.note("slope_interval", format!("[{}, {}]", cfg.slope_lo, cfg.slope_hi));
    table.note("noise_var", cfg.noise_var);
    Ok(table)
}

/// Prior variance above which the minimax filter must randomize, one row per
/// noise variance. `closed_form` is `2σ_v² / (h_lo (h_hi − h_lo))`, the
/// switch point of the two-slope game with a continuous prior.
pub fn run_game_threshold(cfg: &ThresholdConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = ResultTable::new("game-threshold", &["slope_lo", "slope_hi", "noise_var", "atoms", "threshold", "closed_form"]);
    for &noise_var in &cfg.noise_vars {
        let threshold = randomization_threshold(
            cfg.slope_lo,
            cfg.slope_hi,
            noise_var,
            (cfg.search[0] * noise_var, cfg.search[1] * noise_var),
            cfg.atoms,
        )?;
        let closed_form = 2.0 * noise_var / (cfg.slope_lo * (cfg.slope_hi - cfg.slope_lo));
        table.push(vec![cfg.slope_lo, cfg.slope_hi, noise_var, cfg.atoms as f64, threshold, closed_form]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_scales_with_noise() {
        let t = run_game_threshold(&ThresholdConfig::default()).unwrap();
        let th = t.values("threshold");
        assert!((th[1] / th[0] - 4.0).abs() < 0.05, "{th:?}");
    }

    #[test]
    fn sweep_rows_follow_config() {
        let cfg = ErrorTermConfig { trials: 100, prior_vars: vec![0.2, 1.0], ..Default::default() };
        let t = run_fig2(&cfg, 4).unwrap();
        assert_eq!(t.values("prior_var"), vec![0.2, 1.0]);
        assert_eq!(t.values("randomized"), vec![0.0, 1.0]);
    }
}
