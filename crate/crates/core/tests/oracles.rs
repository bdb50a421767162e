//! Exact-math checks against independent reference computations.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_sensing::camera::{CameraSystem, Feature, FeatureSet, Pose2};
use robust_sensing::game::{inner_max, payoff, GVector, GameSpec};
use robust_sensing::grid::{posterior, posterior_mean, uniform_grid, SufficientSummary};
use robust_sensing::kalman::{ekf_update, kf_update, GaussianBelief};
use robust_sensing::model::{
    finite_difference_jacobian, jacobian, ControlVector, GaussianNoiseSpec, LinearSystem, ParameterBox, ParameterVector,
    SinSystem,
};

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

#[test]
fn kalman_sequence_matches_conjugate_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = 3;
        let k = 2;
        let prior_cov = random_spd(&mut rng, s, 0.5);
        let prior_mean = DVector::from_fn(s, |_, _| rng.random_range(-1.0..1.0));
        let noise = random_spd(&mut rng, k, 0.2);
        let steps: Vec<(DMatrix<f64>, DVector<f64>)> = (0..6)
            .map(|_| {
                (
                    DMatrix::from_fn(k, s, |_, _| rng.random_range(-2.0..2.0)),
                    DVector::from_fn(k, |_, _| rng.random_range(-3.0..3.0)),
                )
            })
            .collect();
        let mut belief = GaussianBelief::new(ParameterVector::from_vector(prior_mean.clone()).unwrap(), prior_cov.clone()).unwrap();
        for (h, z) in &steps {
            belief = kf_update(&belief, h, &noise, z).unwrap();
        }
        // Information-form closed form.
        let noise_inv = noise.clone().try_inverse().unwrap();
        let mut info = prior_cov.clone().try_inverse().unwrap();
        let mut shift = &info * &prior_mean;
        for (h, z) in &steps {
            info += h.transpose() * &noise_inv * h;
            shift += h.transpose() * &noise_inv * z;
        }
        let post_cov = info.try_inverse().unwrap();
        let post_mean = &post_cov * shift;
        assert!((belief.mean().as_vector() - post_mean).amax() < 1e-10);
        assert!((belief.covariance() - post_cov).amax() < 1e-10);
    }
}

#[test]
fn extended_filter_equals_linear_filter_on_linear_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let a = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-2.0..2.0));
        let noise = random_spd(&mut rng, 2, 0.3);
        let sys = LinearSystem::new(a.clone(), GaussianNoiseSpec::new(DVector::zeros(2), noise.clone()).unwrap()).unwrap();
        let mut kf = GaussianBelief::new(ParameterVector::new(vec![0.1, -0.3, 0.2]).unwrap(), random_spd(&mut rng, 3, 0.1)).unwrap();
        let mut ekf = kf.clone();
        for _ in 0..5 {
            let z = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            kf = kf_update(&kf, &a, &noise, &z).unwrap();
            ekf = ekf_update(&ekf, &sys, &ControlVector::empty(), &z).unwrap();
        }
        assert!((kf.mean().as_vector() - ekf.mean().as_vector()).amax() < 1e-12);
        assert!((kf.covariance() - ekf.covariance()).amax() < 1e-12);
    }
}

#[test]
fn grid_posterior_matches_direct_summation() {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let bbox = ParameterBox::new(vec![-0.4], vec![0.4]).unwrap();
    let prior = uniform_grid(&bbox, 5).unwrap();
    for (zbar, n) in [(0.0, 1usize), (1.3, 4), (-2.7, 9), (3.1, 2)] {
        let mut summary = SufficientSummary::new();
        summary.push_group_mean(&ControlVector::empty(), DVector::from_element(1, zbar), n).unwrap();
        let post = posterior(&prior, &sys, &summary).unwrap();
        // Plain products of densities, no log-space.
        let weights: Vec<f64> = prior.axes()[0]
            .iter()
            .map(|p| {
                let var = 1.0 / n as f64;
                (-(zbar - 10.0 * p.sin()).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt() * 0.2
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for (m, w) in post.masses().iter().zip(&weights) {
            assert!((m - w / total).abs() < 1e-12);
        }
        let mean: f64 = prior.axes()[0].iter().zip(&weights).map(|(p, w)| p * w / total).sum();
        assert!((posterior_mean(&post)[0] - mean).abs() < 1e-12);
        assert!((post.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

/// Trapezoid rule on `[-12, 12]` standard deviations, which is exact to
/// round-off for Gaussian-weighted polynomials.
fn gaussian_expectation_2d(f: impl Fn(f64, f64) -> f64) -> f64 {
    let n = 1201;
    let h = 24.0 / (n - 1) as f64;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let x = -12.0 + i as f64 * h;
        let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * phi(x) * h;
        for j in 0..n {
            let y = -12.0 + j as f64 * h;
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 } * phi(y) * h;
            total += wx * wy * f(x, y);
        }
    }
    total
}

#[test]
fn payoff_matches_two_dimensional_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let lo = rng.random_range(0.5..5.0);
        let hi = lo + rng.random_range(0.0..2.0);
        let noise_var = rng.random_range(0.1..4.0);
        let prior_var = rng.random_range(0.05..3.0);
        let spec = GameSpec::linear(lo, hi, noise_var, prior_var, 9).unwrap();
        let a = rng.random_range(-0.5..1.0);
        let slope = if rng.random_bool(0.5) { lo } else { hi };
        let g = GVector(spec.deviations().iter().map(|d| slope * d).collect());
        let reference = gaussian_expectation_2d(|x, y| {
            let theta = prior_var.sqrt() * x;
            let v = noise_var.sqrt() * y;
            (a * (slope * theta + v) - theta).powi(2)
        });
        assert!((payoff(a, &g, &spec).unwrap() - reference).abs() < 1e-8);
    }
}

#[test]
fn inner_max_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let atoms: Vec<f64> = (0..6).map(|_| rng.random_range(-1.2..1.2)).collect();
        let masses: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.0)).collect();
        let center = rng.random_range(-0.3..0.3);
        let spec = GameSpec::linearized(&atoms, &masses, center, &|x: f64| 10.0 * x.cos(), false, rng.random_range(0.1..2.0)).unwrap();
        let a = rng.random_range(-0.2..0.3);
        let best = spec
            .vertices()
            .unwrap()
            .iter()
            .map(|g| payoff(a, g, &spec).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let (_, v) = inner_max(a, &spec);
        assert!((v - best).abs() < 1e-12 * (1.0 + best));
    }
}

#[test]
fn camera_jacobian_matches_finite_differences() {
    let features = FeatureSet::new(vec![
        Feature { position: Vector2::new(-1.0, 1.0), normal: Vector2::new(-1.0, 0.0) },
        Feature { position: Vector2::new(-1.0, -0.5), normal: Vector2::new(-1.0, 0.0) },
        Feature { position: Vector2::new(0.3, -1.0), normal: Vector2::new(0.0, -1.0) },
    ])
    .unwrap();
    let sys = CameraSystem::new(features, Pose2::new(0.0, 0.0, 0.0).unwrap(), 0.05).unwrap();
    let u = ControlVector::new(vec![-4.0, -3.0, 0.6]).unwrap();
    let p = ParameterVector::new(vec![0.2, -0.1, 0.3]).unwrap();
    let analytic = jacobian(&sys, &u, &p).unwrap();
    let numeric = finite_difference_jacobian(&sys, &u, &p, 1e-6).unwrap();
    assert_eq!(analytic.nrows(), 6);
    for (a, n) in analytic.iter().zip(numeric.iter()) {
        assert!((a - n).abs() <= 1e-5 * a.abs().max(1.0));
    }
}
