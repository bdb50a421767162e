//! Expected-estimate response curves of a dense reference grid and a coarse
//! grid, averaged over the observation noise by Gauss–Hermite quadrature.

use rayon::prelude::*;
use robust_sensing::grid::{grid_prior, posterior, posterior_mean, uniform_grid, GridPrior, SufficientSummary};
use robust_sensing::model::{ControlVector, ParameterBox, SinSystem};
use robust_sensing::stats::gauss_hermite;

use crate::config::ResponseCurveConfig;
use crate::error::Result;
use crate::table::ResultTable;

fn expected_estimate(sys: &SinSystem, prior: &GridPrior, p: f64, nodes: &[f64], weights: &[f64]) -> Result<f64> {
    let u = ControlVector::empty();
    let center = sys.amplitude * p.sin();
    let sd = sys.noise_var.sqrt();
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let mut summary = SufficientSummary::new();
        summary.push(&u, &nalgebra::DVector::from_element(1, center + sd * x))?;
        total += w * posterior_mean(&posterior(prior, sys, &summary)?)[0];
    }
    Ok(total)
}

/// Rows of (noise_var, p, reference, approximation). Metadata carries the
/// relative RMS gap and the plateau levels of each approximation curve.
pub fn run_fig3(cfg: &ResponseCurveConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let bbox = ParameterBox::symmetric(&[0.0], &[cfg.half_width])?;
    let reference = uniform_grid(&bbox, cfg.reference_points)?;
    let coarse = grid_prior(&bbox, cfg.grid_points, cfg.mass_rule.into())?;
    let (nodes, weights) = gauss_hermite(cfg.quadrature_order);
    let sweep: Vec<f64> = (0..cfg.sweep_points)
        .map(|i| -cfg.half_width + 2.0 * cfg.half_width * i as f64 / (cfg.sweep_points - 1) as f64)
        .collect();

    let mut table = ResultTable::new("fig3", &["noise_var", "p", "reference_mean", "approx_mean"]);
    for &noise_var in &cfg.noise_vars {
        let sys = SinSystem::new(cfg.amplitude, noise_var)?;
        let curves: Vec<(f64, f64)> = sweep
            .par_iter()
            .map(|&p| {
                Ok((
                    expected_estimate(&sys, &reference, p, &nodes, &weights)?,
                    expected_estimate(&sys, &coarse, p, &nodes, &weights)?,
                ))
            })
            .collect::<Result<_>>()?;
        for (&p, (r, a)) in sweep.iter().zip(&curves) {
            table.push(vec![noise_var, p, *r, *a]);
        }
        let (r, a): (Vec<f64>, Vec<f64>) = curves.into_iter().unzip();
        table.note(&format!("relative_rms[{noise_var}]"), relative_rms(&a, &r));
        table.note(&format!("plateau_levels[{noise_var}]"), plateau_levels(&a, 1e-6).len());
    }
    table.note("grid_points", cfg.grid_points);
    table.note("reference_points", cfg.reference_points);
    Ok(table)
}

/// RMS of `approx − reference` relative to the RMS of `reference`.
pub fn relative_rms(approx: &[f64], reference: &[f64]) -> f64 {
    let gap: f64 = approx.iter().zip(reference).map(|(a, r)| (a - r).powi(2)).sum();
    let size: f64 = reference.iter().map(|r| r * r).sum();
    (gap / size).sqrt()
}

/// Distinct values of the flat runs in a sampled curve: maximal runs of at
/// least two consecutive samples agreeing within `tol`. Runs at the same
/// level (within `tol`) count once.
pub fn plateau_levels(curve: &[f64], tol: f64) -> Vec<f64> {
    let mut levels: Vec<f64> = Vec::new();
    let mut start = 0;
    for end in 1..=curve.len() {
        if end == curve.len() || (curve[end] - curve[start]).abs() > tol {
            if end - start >= 2 && !levels.iter().any(|l| (l - curve[start]).abs() <= tol) {
                levels.push(curve[start]);
            }
            start = end;
        }
    }
    levels
}
