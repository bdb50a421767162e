//! Simulation-based calibration checks.

use std::sync::Arc;

use nalgebra::{DVector, Vector2};
use rand::Rng;
use robust_sensing::camera::{CameraSystem, Feature, FeatureSet, Pose2};
use robust_sensing::grid::{
    is_quantized, map_index, posterior, posterior_mean, uniform_grid, GridPrior, SufficientSummary,
    DEFAULT_QUANTIZATION_THRESHOLD,
};
use robust_sensing::iterative::{finite_bayes, RefinementConfig, SimulatedSource};
use robust_sensing::model::{observe_batch, ControlVector, MeasurementSystem, ParameterBox, ParameterVector, SinSystem};
use robust_sensing::planner::{
    batch_size, select_control, zero_w_loss, FixedControlPolicy, LossSpec, QuantizationTarget, TimeModel,
};
use robust_sensing::rng::stream_rng;
use robust_sensing::stats::RunningMoments;

fn posterior_after(sys: &dyn MeasurementSystem, u: &ControlVector, prior: &GridPrior, truth: &ParameterVector, n: usize, seed: u64, trial: u64) -> GridPrior {
    let mut rng = stream_rng(seed, trial, 0);
    let zs = observe_batch(sys, u, truth, n, &mut rng).unwrap();
    let mut summary = SufficientSummary::new();
    summary.extend(u, &zs).unwrap();
    posterior(prior, sys, &summary).unwrap()
}

fn mode_failure_rate(sys: &dyn MeasurementSystem, u: &ControlVector, prior: &GridPrior, atom: usize, n: usize, trials: u64, seed: u64) -> f64 {
    let truth = prior.atom(atom);
    let misses = (0..trials)
        .filter(|&t| map_index(&posterior_after(sys, u, prior, &truth, n, seed, t)) != atom)
        .count();
    misses as f64 / trials as f64
}

#[test]
fn planned_batch_matches_simulated_minimum() {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let prior = uniform_grid(&ParameterBox::new(vec![-0.2], vec![0.2]).unwrap(), 5).unwrap();
    let u = ControlVector::empty();
    let planned = batch_size(&sys, &u, &prior, &ParameterVector::scalar(0.0).unwrap(), 0.05, QuantizationTarget::Mode, 10_000).unwrap();
    let simulated = (1..200)
        .find(|&n| mode_failure_rate(&sys, &u, &prior, 2, n, 5000, 21) <= 0.05)
        .unwrap();
    println!("planned {} simulated minimum {}", planned.count, simulated);
    assert!(planned.count.abs_diff(simulated) <= 1);
}

#[test]
fn batch_rule_forces_quantization() {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let prior = uniform_grid(&ParameterBox::new(vec![-0.4], vec![0.4]).unwrap(), 5).unwrap();
    let u = ControlVector::empty();
    for atom in 0..5 {
        let truth = prior.atom(atom);
        let plan = batch_size(&sys, &u, &prior, &truth, 0.05, QuantizationTarget::Mass(DEFAULT_QUANTIZATION_THRESHOLD), 10_000).unwrap();
        let hits = (0..2000)
            .filter(|&t| {
                let post = posterior_after(&sys, &u, &prior, &truth, plan.count, 22 + atom as u64, t);
                is_quantized(&post, DEFAULT_QUANTIZATION_THRESHOLD).unwrap() && map_index(&post) == atom
            })
            .count();
        assert!(hits as f64 / 2000.0 >= 0.95, "atom {atom}: {hits}/2000 quantized at n = {}", plan.count);
    }
}

#[test]
fn posterior_mean_lands_within_one_cell() {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let prior = uniform_grid(&ParameterBox::new(vec![-0.4], vec![0.4]).unwrap(), 5).unwrap();
    let u = ControlVector::empty();
    let n = batch_size(&sys, &u, &prior, &ParameterVector::scalar(0.0).unwrap(), 0.05, QuantizationTarget::Mode, 10_000).unwrap().count;
    let close = (0..2000u64)
        .filter(|&t| {
            let truth = stream_rng(23, t, 1).random_range(-0.4..=0.4);
            let post = posterior_after(&sys, &u, &prior, &ParameterVector::scalar(truth).unwrap(), n, 23, t);
            (posterior_mean(&post)[0] - truth).abs() <= 0.2
        })
        .count();
    assert!(close as f64 / 2000.0 >= 0.95, "{close}/2000 within one cell");
}

#[test]
fn mass_on_truth_grows_with_data() {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let prior = uniform_grid(&ParameterBox::new(vec![-0.4], vec![0.4]).unwrap(), 5).unwrap();
    let u = ControlVector::empty();
    let truth = prior.atom(3);
    let mean_mass = |n: usize| -> f64 {
        (0..500u64).map(|t| posterior_after(&sys, &u, &prior, &truth, n, 24, t).mass(3)).sum::<f64>() / 500.0
    };
    let (one, fifty) = (mean_mass(1), mean_mass(50));
    assert!(fifty > one, "mass at n=1 {one}, at n=50 {fifty}");
}

fn finite_bayes_calibration(half: f64, seed: u64) -> (f64, f64) {
    let sys = SinSystem::new(10.0, 1.0).unwrap();
    let initial = ParameterBox::new(vec![-half], vec![half]).unwrap();
    let tol = DVector::from_element(1, 0.05);
    let mut confidence = RunningMoments::new();
    let mut covered = 0usize;
    let trials = 2000u64;
    for t in 0..trials {
        let truth = stream_rng(seed, t, 1).random_range(-half..=half);
        let mut source = SimulatedSource::new(&sys, ParameterVector::scalar(truth).unwrap(), stream_rng(seed, t, 0));
        let mut policy = FixedControlPolicy { control: ControlVector::empty(), target: QuantizationTarget::Mode, n_max: 1_000_000 };
        let out = finite_bayes(&sys, &initial, &tol, 0.95, &mut source, &mut policy, &RefinementConfig::default()).unwrap();
        confidence.push(out.report.confidence);
        let point = DVector::from_element(1, truth);
        if out.final_box.contains_point(&point).unwrap() {
            covered += 1;
        }
        // Both candidate outputs sit in the final box.
        assert!(out.final_box.contains_point(out.report.estimate.as_vector()).unwrap());
        assert!(out.final_box.contains_point(out.selected_atom.as_vector()).unwrap());
    }
    (confidence.mean(), covered as f64 / trials as f64)
}

#[test]
fn finite_bayes_confidence_is_calibrated() {
    for (half, seed) in [(0.2, 25), (0.4, 26)] {
        let (reported, coverage) = finite_bayes_calibration(half, seed);
        println!("half-width {half}: reported {reported:.4} coverage {coverage:.4}");
        assert!((reported - coverage).abs() <= 0.05);
    }
}

#[test]
fn camera_noise_moments_converge() {
    let sys = CameraSystem::new(FeatureSet::square_corners(), Pose2::new(0.0, 0.0, 0.0).unwrap(), 0.1).unwrap();
    let u = ControlVector::new(vec![-5.0, 0.0, 0.0]).unwrap();
    let p = ParameterVector::new(vec![0.1, 0.0, 0.2]).unwrap();
    let h = sys.evaluate(&u, &p).unwrap();
    let zs = observe_batch(&sys, &u, &p, 100_000, &mut stream_rng(27, 0, 0)).unwrap();
    for i in 0..h.len() {
        let acc: RunningMoments = zs.iter().map(|z| z[i] - h[i]).collect();
        assert!(acc.mean().abs() <= 3.0 * acc.std_error());
        // Standard error of the sample variance of a Gaussian: σ²√(2/n).
        assert!((acc.variance() - 0.01).abs() <= 3.0 * 0.01 * (2.0f64 / 1e5).sqrt());
    }
}

#[test]
fn face_on_view_beats_near_centre_view() {
    let features = FeatureSet::new(vec![
        Feature { position: Vector2::new(-1.0, 1.0), normal: Vector2::new(-1.0, 0.0) },
        Feature { position: Vector2::new(-1.0, -1.0), normal: Vector2::new(-1.0, 0.0) },
        Feature { position: Vector2::new(0.1, -0.1), normal: Vector2::new(0.0, -1.0) },
    ])
    .unwrap();
    let sys = CameraSystem::new(features, Pose2::new(0.0, 0.0, 0.0).unwrap(), 0.05).unwrap();
    // Only the orientation is uncertain.
    let prior = uniform_grid(&ParameterBox::new(vec![0.0, 0.0, -0.1], vec![0.0, 0.0, 0.1]).unwrap(), 5).unwrap();
    let face_on = ControlVector::new(vec![-5.0, 0.0, 0.0]).unwrap();
    let near_centre = ControlVector::new(vec![0.0, -5.0, std::f64::consts::FRAC_PI_2]).unwrap();
    let est = ParameterVector::new(vec![0.0, 0.0, 0.0]).unwrap();
    let start = ControlVector::new(vec![-5.0, -5.0, 0.0]).unwrap();
    let time = TimeModel::new(0.1, Arc::new(|_, _| 1.0)).unwrap();
    let candidates = [near_centre.clone(), face_on.clone()];
    let choice = select_control(&candidates, &start, &sys, &prior, &est, 0.05, QuantizationTarget::Mode, &time, 1_000_000).unwrap();
    assert_eq!(choice.control, face_on);

    let n_face = choice.batch.count;
    let n_centre = batch_size(&sys, &near_centre, &prior, &est, 0.05, QuantizationTarget::Mode, 1_000_000).unwrap().count;
    assert!(n_centre > n_face);
    let fail_face = mode_failure_rate(&sys, &face_on, &prior, 2, n_face, 2000, 28);
    let fail_centre = mode_failure_rate(&sys, &near_centre, &prior, 2, n_face, 2000, 28);
    assert!(fail_face < fail_centre, "face-on {fail_face}, near-centre {fail_centre}");
}

#[test]
fn expected_loss_is_weighted_miss_rate() {
    let spec = LossSpec::new(vec![0.1], 4.0).unwrap();
    let mut rng = stream_rng(29, 0, 0);
    let (mut loss, mut misses) = (0.0, 0usize);
    for _ in 0..1000 {
        let truth = ParameterVector::scalar(0.0).unwrap();
        let est = ParameterVector::scalar(rng.random_range(-0.2..0.2)).unwrap();
        let l = zero_w_loss(&spec, &truth, &est).unwrap();
        loss += l;
        if l > 0.0 {
            misses += 1;
        }
    }
    assert_eq!(loss, 4.0 * misses as f64);
}
