//! End-to-end camera scenario: iterative refinement with the planner choosing
//! a view and batch size each stage.

use nalgebra::{DVector, Vector2};
use rand::Rng;
use robust_sensing::camera::{CameraSystem, Feature, FeatureSet, Pose2};
use robust_sensing::iterative::{finite_bayes, FiniteBayesOutcome, RefinementConfig, SimulatedSource};
use robust_sensing::model::{ControlVector, ParameterBox, ParameterVector};
use robust_sensing::planner::{PlannedControlPolicy, PlannedStage, TimeModel};
use robust_sensing::rng::stream_rng;
use robust_sensing::stats::{binomial_std_error, RunningMoments};

use super::{run_trials, stream};
use crate::config::PlannerDemoConfig;
use crate::error::Result;
use crate::table::ResultTable;

const TAG: u64 = 4;

/// Stage log of one trial plus a calibration summary over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerDemo {
    pub log: ResultTable,
    pub summary: ResultTable,
}

struct TrialOutcome {
    truth: ParameterVector,
    outcome: FiniteBayesOutcome,
    planned: Vec<PlannedStage>,
    elapsed: f64,
}

fn scene(cfg: &PlannerDemoConfig) -> Result<CameraSystem> {
    let features = cfg
        .features
        .iter()
        .map(|f| Feature { position: Vector2::from(f.position), normal: Vector2::from(f.normal) })
        .collect();
    Ok(CameraSystem::new(FeatureSet::new(features)?, Pose2::new(0.0, 0.0, 0.0)?, cfg.noise_std)?)
}

pub fn run_planner_demo(cfg: &PlannerDemoConfig, seed: u64) -> Result<PlannerDemo> {
    cfg.validate()?;
    let sys = scene(cfg)?;
    let initial = ParameterBox::symmetric(&[0.0; 3], &cfg.half_width)?;
    let tolerance = DVector::from_element(3, cfg.tolerance);
    let candidates: Vec<ControlVector> = cfg.candidates.iter().map(|c| ControlVector::new(c.to_vec())).collect::<std::result::Result<_, _>>()?;
    let start = ControlVector::new(cfg.start.to_vec())?;
    let time = TimeModel::euclidean(cfg.sample_time, cfg.speed)?;
    let refinement = RefinementConfig { points_per_axis: cfg.grid_points, ..Default::default() };

    let trials = run_trials(cfg.trials, |t| {
        let mut rng = stream_rng(seed, t, stream(TAG, 1));
        let truth = ParameterVector::new((0..3).map(|k| rng.random_range(-cfg.half_width[k]..=cfg.half_width[k])).collect())?;
        let mut source = SimulatedSource::new(&sys, truth.clone(), stream_rng(seed, t, stream(TAG, 0)));
        let mut policy = PlannedControlPolicy::new(candidates.clone(), start.clone(), time.clone(), cfg.deadline);
        let outcome = finite_bayes(&sys, &initial, &tolerance, cfg.confidence, &mut source, &mut policy, &refinement)?;
        Ok(TrialOutcome { truth, outcome, elapsed: policy.elapsed, planned: policy.log })
    })?;

    let mut log = ResultTable::new(
        "planner-demo",
        &[
            "stage",
            "candidate",
            "camera_x",
            "camera_y",
            "camera_angle",
            "batch",
            "elapsed",
            "box_lo_x",
            "box_hi_x",
            "box_lo_y",
            "box_hi_y",
            "box_lo_angle",
            "box_hi_angle",
            "estimate_x",
            "estimate_y",
            "estimate_angle",
            "confidence",
        ],
    );
    let shown = &trials[cfg.log_trial];
    for (record, planned) in shown.outcome.stages.iter().zip(&shown.planned) {
        let mut row = vec![record.stage as f64, planned.choice.index as f64];
        row.extend(record.control.iter());
        row.extend([record.batch as f64, planned.elapsed]);
        for k in 0..3 {
            row.extend([record.bbox.lower()[k], record.bbox.upper()[k]]);
        }
        row.extend(record.estimate.iter());
        row.push(record.confidence);
        log.push(row);
    }
    log.note("trial", cfg.log_trial);
    log.note("truth", format!("{:?}", shown.truth.as_slice()));
    log.note("truncated", shown.outcome.truncated);
    log.note("final_estimate", format!("{:?}", shown.outcome.report.estimate.as_slice()));
    log.note("final_confidence", shown.outcome.report.confidence);

    let mut columns = vec![
        "trials".to_string(),
        "coverage".into(),
        "coverage_se".into(),
        "mean_confidence".into(),
        "confidence_se".into(),
        "truncated".into(),
        "mean_samples".into(),
        "mean_elapsed".into(),
    ];
    columns.extend((0..candidates.len()).map(|i| format!("selected_{i}")));
    let mut summary = ResultTable::new("planner-demo-summary", &columns.iter().map(String::as_str).collect::<Vec<_>>());
    let n = trials.len();
    let covered = trials.iter().filter(|t| t.outcome.final_box.contains_point(t.truth.as_vector()).unwrap_or(false)).count();
    let coverage = covered as f64 / n as f64;
    let confidence: RunningMoments = trials.iter().map(|t| t.outcome.report.confidence).collect();
    let samples: RunningMoments = trials.iter().map(|t| t.outcome.report.samples_used as f64).collect();
    let elapsed: RunningMoments = trials.iter().map(|t| t.elapsed).collect();
    let mut row = vec![
        n as f64,
        coverage,
        binomial_std_error(coverage, n),
        confidence.mean(),
        confidence.std_error(),
        trials.iter().filter(|t| t.outcome.truncated).count() as f64,
        samples.mean(),
        elapsed.mean(),
    ];
    row.extend((0..candidates.len()).map(|i| {
        trials.iter().flat_map(|t| &t.planned).filter(|s| s.choice.index == i).count() as f64
    }));
    summary.push(row);
    summary.note("target_confidence", cfg.confidence);
    summary.note("tolerance", cfg.tolerance);
    summary.note("deadline", cfg.deadline);
    Ok(PlannerDemo { log, summary })
}
