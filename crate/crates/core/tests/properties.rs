//! Randomized invariant suites.

use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;
use robust_sensing::camera::{object_to_camera, CameraSystem, FeatureSet, Pose2};
use robust_sensing::error::Result;
use robust_sensing::game::{inner_max, payoff, solve_saddle, GameSpec};
use robust_sensing::grid::{posterior, uniform_grid, SufficientSummary};
use robust_sensing::iterative::{finite_bayes, RefinementConfig, SimulatedSource};
use robust_sensing::kalman::{kf_update, GaussianBelief};
use robust_sensing::model::{
    finite_difference_jacobian, jacobian, ControlVector, GaussianNoiseSpec, LinearSystem, MeasurementSystem,
    ParameterBox, ParameterVector, SinSystem,
};
use robust_sensing::planner::{batch_size, select_control, FixedControlPolicy, QuantizationTarget, TimeModel};
use robust_sensing::rng::stream_rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 128, ..ProptestConfig::default() }
}

fn spd(entries: &[f64], n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

fn jacobian_agrees(sys: &dyn MeasurementSystem, u: &ControlVector, p: &ParameterVector) -> bool {
    let a = jacobian(sys, u, p).unwrap();
    let n = finite_difference_jacobian(sys, u, p, 1e-6).unwrap();
    a.iter().zip(n.iter()).all(|(x, y)| (x - y).abs() <= 1e-5 * x.abs().max(1.0))
}

/// `z = gain · 10 sin(p) + v` with the gain as a one-dimensional control.
struct GainSin;

impl MeasurementSystem for GainSin {
    fn param_dim(&self) -> usize {
        1
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn obs_dim(&self, _: &ControlVector) -> usize {
        1
    }
    fn evaluate(&self, u: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, u[0] * 10.0 * p[0].sin()))
    }
    fn jacobian(&self, u: &ControlVector, p: &ParameterVector) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, u[0] * 10.0 * p[0].cos()))
    }
    fn noise(&self, _: &ControlVector, _: &ParameterVector) -> Result<GaussianNoiseSpec> {
        GaussianNoiseSpec::isotropic(1, 1.0)
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn covariance_never_grows(
        cov in prop::collection::vec(-1.0f64..1.0, 9),
        h in prop::collection::vec(-3.0f64..3.0, 6),
        noise in prop::collection::vec(-1.0f64..1.0, 4),
        z in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        let belief = GaussianBelief::new(ParameterVector::new(vec![0.0; 3]).unwrap(), spd(&cov, 3, 1e-3)).unwrap();
        let h = DMatrix::from_row_slice(2, 3, &h);
        let post = kf_update(&belief, &h, &spd(&noise, 2, 1e-2), &DVector::from_vec(z)).unwrap();
        let drop = belief.covariance() - post.covariance();
        prop_assert!(drop.symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn linear_updates_commute(
        zs in prop::collection::vec(-4.0f64..4.0, 5),
        hs in prop::collection::vec(-2.0f64..2.0, 10),
        perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let noise = DMatrix::from_element(1, 1, 0.7);
        let start = GaussianBelief::new(ParameterVector::new(vec![0.2, -0.1]).unwrap(), DMatrix::identity(2, 2)).unwrap();
        let run = |order: &[usize]| {
            let mut b = start.clone();
            for &i in order {
                let h = DMatrix::from_row_slice(1, 2, &hs[2 * i..2 * i + 2]);
                b = kf_update(&b, &h, &noise, &DVector::from_element(1, zs[i])).unwrap();
            }
            b
        };
        let a = run(&[0, 1, 2, 3, 4]);
        let b = run(&perm);
        prop_assert!((a.mean().as_vector() - b.mean().as_vector()).amax() < 1e-8);
        prop_assert!((a.covariance() - b.covariance()).amax() < 1e-8);
    }

    #[test]
    fn posterior_is_normalized(
        amplitude in 0.1f64..20.0,
        noise_var in 1e-3f64..10.0,
        half in 0.01f64..1.5,
        points in 2usize..12,
        zs in prop::collection::vec(-15.0f64..15.0, 1..30),
    ) {
        let sys = SinSystem::new(amplitude, noise_var).unwrap();
        let prior = uniform_grid(&ParameterBox::new(vec![-half], vec![half]).unwrap(), points).unwrap();
        let mut summary = SufficientSummary::new();
        for z in &zs {
            summary.push(&ControlVector::empty(), &DVector::from_element(1, *z)).unwrap();
        }
        let post = posterior(&prior, &sys, &summary).unwrap();
        prop_assert!((post.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shipped_jacobians_match_finite_differences(
        p in -3.0f64..3.0,
        entries in prop::collection::vec(-3.0f64..3.0, 6),
        q in prop::collection::vec(-2.0f64..2.0, 3),
        pose in (-0.5f64..0.5, -0.5f64..0.5, -0.6f64..0.6),
        view in -1.2f64..1.2,
        dist in 3.0f64..8.0,
    ) {
        let sin = SinSystem::new(10.0, 1.0).unwrap();
        prop_assert!(jacobian_agrees(&sin, &ControlVector::empty(), &ParameterVector::scalar(p).unwrap()));
        let lin = LinearSystem::new(DMatrix::from_row_slice(2, 3, &entries), GaussianNoiseSpec::isotropic(2, 1.0).unwrap()).unwrap();
        prop_assert!(jacobian_agrees(&lin, &ControlVector::empty(), &ParameterVector::new(q).unwrap()));
        let cam = CameraSystem::new(FeatureSet::square_corners(), Pose2::new(0.0, 0.0, 0.0).unwrap(), 0.05).unwrap();
        let u = ControlVector::new(vec![-dist * view.cos(), -dist * view.sin(), view]).unwrap();
        let p = ParameterVector::new(vec![pose.0, pose.1, pose.2]).unwrap();
        prop_assert!(jacobian_agrees(&cam, &u, &p));
    }

    #[test]
    fn saddle_duality_and_certificates(
        lo in 0.5f64..6.0,
        width in 0.0f64..3.0,
        noise_var in 0.05f64..5.0,
        prior_var in 0.05f64..5.0,
    ) {
        let spec = GameSpec::linear(lo, lo + width, noise_var, prior_var, 9).unwrap();
        check_saddle(&spec)?;
    }

    #[test]
    fn nonlinear_saddle_duality_and_certificates(
        atoms in prop::collection::vec(-1.2f64..1.2, 1..8),
        center in -0.4f64..0.4,
        noise_var in 0.05f64..3.0,
    ) {
        let masses = vec![1.0; atoms.len()];
        let spec = GameSpec::linearized(&atoms, &masses, center, &|x: f64| 10.0 * x.cos(), false, noise_var).unwrap();
        check_saddle(&spec)?;
    }

    #[test]
    fn control_choice_ignores_time_units(
        gains in prop::collection::vec(0.2f64..3.0, 2..6),
        speed in 0.1f64..10.0,
        sample_time in 0.01f64..2.0,
        scale in 0.01f64..100.0,
    ) {
        let sys = GainSin;
        let prior = uniform_grid(&ParameterBox::new(vec![-0.3], vec![0.3]).unwrap(), 5).unwrap();
        let candidates: Vec<ControlVector> = gains.iter().map(|g| ControlVector::new(vec![*g]).unwrap()).collect();
        let here = ControlVector::new(vec![1.0]).unwrap();
        let est = ParameterVector::scalar(0.05).unwrap();
        let time = TimeModel::euclidean(sample_time, speed).unwrap();
        let a = select_control(&candidates, &here, &sys, &prior, &est, 0.05, QuantizationTarget::Mode, &time, 100_000).unwrap();
        let b = select_control(&candidates, &here, &sys, &prior, &est, 0.05, QuantizationTarget::Mode, &time.scaled(scale).unwrap(), 100_000).unwrap();
        prop_assert_eq!(a.index, b.index);
    }

    #[test]
    fn batch_size_is_monotone(
        risk in 0.001f64..0.3,
        risk_factor in 1.0f64..3.0,
        noise_var in 0.05f64..5.0,
        noise_factor in 1.0f64..3.0,
        half in 0.05f64..0.8,
        shrink in 0.3f64..1.0,
        est in -0.8f64..0.8,
    ) {
        let plan = |var: f64, h: f64, r: f64| {
            let sys = SinSystem::new(10.0, var).unwrap();
            let prior = uniform_grid(&ParameterBox::new(vec![-h], vec![h]).unwrap(), 5).unwrap();
            batch_size(&sys, &ControlVector::empty(), &prior, &ParameterVector::scalar(est * h).unwrap(), r, QuantizationTarget::Mode, 10_000_000).unwrap().count
        };
        let base = plan(noise_var, half, risk);
        prop_assert!(plan(noise_var, half, (risk * risk_factor).min(0.99)) <= base);
        prop_assert!(plan(noise_var * noise_factor, half, risk) >= base);
        prop_assert!(plan(noise_var, half * shrink, risk) >= base);
    }

    #[test]
    fn refinement_boxes_are_nested(seed in 0u64..10_000, truth in -0.5f64..0.5) {
        let sys = SinSystem::new(10.0, 1.0).unwrap();
        let initial = ParameterBox::new(vec![-0.5], vec![0.5]).unwrap();
        let mut source = SimulatedSource::new(&sys, ParameterVector::scalar(truth).unwrap(), stream_rng(seed, 0, 0));
        let mut policy = FixedControlPolicy { control: ControlVector::empty(), target: QuantizationTarget::Mode, n_max: 100_000 };
        let out = finite_bayes(&sys, &initial, &DVector::from_element(1, 0.0625), 0.95, &mut source, &mut policy, &RefinementConfig::default()).unwrap();
        prop_assert_eq!(out.refinements, 4);
        let boxes: Vec<ParameterBox> = out.stages.iter().map(|s| s.bbox.clone()).collect();
        prop_assert_eq!(boxes.last().unwrap(), &out.final_box);
        for (k, pair) in boxes.windows(2).enumerate() {
            prop_assert!(pair[1].is_within(&pair[0]));
            prop_assert_eq!(pair[1].widths()[0], 1.0 / f64::powi(2.0, k as i32 + 1));
        }
    }

    #[test]
    fn rigid_transforms_preserve_distances(
        o in (-5.0f64..5.0, -5.0f64..5.0, -3.2f64..3.2),
        c in (-5.0f64..5.0, -5.0f64..5.0, -3.2f64..3.2),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let t = object_to_camera(&Pose2::new(o.0, o.1, o.2).unwrap(), &Pose2::new(c.0, c.1, c.2).unwrap());
        let (a, b) = (Vector2::new(a.0, a.1), Vector2::new(b.0, b.1));
        prop_assert!(((t.apply(&a) - t.apply(&b)).norm() - (a - b).norm()).abs() < 1e-12);
    }
}

fn check_saddle(spec: &GameSpec) -> std::result::Result<(), TestCaseError> {
    let sol = solve_saddle(spec).unwrap();
    let tol = 1e-6 * sol.value.abs().max(1.0);
    prop_assert!(sol.mixed_lower <= sol.value + 1e-9 * sol.value.abs().max(1.0));
    prop_assert!(sol.pure_lower <= sol.value + 1e-9 * sol.value.abs().max(1.0));
    prop_assert!(sol.mixture.len() <= 2);
    let weight: f64 = sol.mixture.iter().map(|m| m.1).sum();
    prop_assert!((weight - 1.0).abs() < 1e-12);
    // Mixture support lies on vertices.
    for (g, _) in &sol.mixture {
        for (j, v) in g.0.iter().enumerate() {
            let (lo, hi) = spec.feasible(j);
            prop_assert!(*v == lo || *v == hi);
        }
    }
    // Nature cannot gain by deviating from the mixture against the gain.
    let (_, best) = inner_max(sol.gain, spec);
    prop_assert!(best <= sol.value + tol);
    // The filter cannot gain by deviating against the mixture: the mixture's
    // Bayes risk reaches the value.
    let (mut qa, mut qb) = (spec.noise_var(), 0.0);
    let qc: f64 = spec.deviations().iter().zip(spec.masses()).map(|(d, p)| p * d * d).sum();
    for (g, w) in &sol.mixture {
        for ((gj, dj), pj) in g.0.iter().zip(spec.deviations()).zip(spec.masses()) {
            qa += w * pj * gj * gj;
            qb += w * pj * gj * dj;
        }
        prop_assert!(payoff(sol.gain, g, spec).is_ok());
    }
    prop_assert!(qc - qb * qb / qa >= sol.value - tol);
    Ok(())
}
