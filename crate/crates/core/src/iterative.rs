//! Iterative interval refinement: estimate on a coarse grid, shrink the box
//! around the selected atom, repeat with a fresh batch until the box meets
//! the tolerance.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{grid_prior, map_index, posterior, posterior_mean, GridPrior, MassRule, SufficientSummary};
use crate::model::{observe_batch, ControlVector, EstimateReport, MeasurementSystem, ParameterBox, ParameterVector};
use crate::planner::stage_risks;

/// Box spanned by the atom's left and right grid neighbours on every axis.
/// A boundary atom is its own outer neighbour.
pub fn neighborhood(grid: &GridPrior, atom_index: usize) -> ParameterBox {
    let multi = grid.multi_index(atom_index);
    let (lower, upper): (Vec<f64>, Vec<f64>) = multi
        .iter()
        .zip(grid.axes())
        .map(|(&j, axis)| (axis[j.saturating_sub(1)], axis[(j + 1).min(axis.len() - 1)]))
        .unzip();
    ParameterBox::new(lower, upper).expect("grid axes are sorted")
}

/// Box used for the next refinement stage: the neighbourhood of the atom,
/// shifted inward at the boundary so that it always spans two grid spacings.
/// With five points per axis the width halves exactly.
pub fn refinement_box(grid: &GridPrior, atom_index: usize) -> ParameterBox {
    let multi = grid.multi_index(atom_index);
    let (lower, upper): (Vec<f64>, Vec<f64>) = multi
        .iter()
        .zip(grid.axes())
        .map(|(&j, axis)| {
            let n = axis.len();
            if n < 3 {
                return (axis[0], axis[n - 1]);
            }
            let lo = j.saturating_sub(1).min(n - 3);
            (axis[lo], axis[lo + 2])
        })
        .unzip();
    ParameterBox::new(lower, upper).expect("grid axes are sorted")
}

/// Grid resolution and mass rule used at every stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub points_per_axis: usize,
    pub mass_rule: MassRule,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            points_per_axis: 5,
            mass_rule: MassRule::Uniform,
        }
    }
}

impl RefinementConfig {
    fn validate(&self) -> Result<()> {
        if self.points_per_axis < 3 {
            return Err(Error::invalid("refinement needs at least three points per axis"));
        }
        Ok(())
    }

    pub fn grid(&self, bbox: &ParameterBox) -> Result<GridPrior> {
        grid_prior(bbox, self.points_per_axis, self.mass_rule)
    }
}

/// State carried between refinement stages.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    pub bbox: ParameterBox,
    pub stage: usize,
    pub samples_used: usize,
    /// Posterior of the most recent stage, on the previous box's grid.
    pub posterior: Option<GridPrior>,
    /// Product of the posterior masses captured by each chosen box.
    pub confidence: f64,
}

impl RefinementState {
    pub fn initial(bbox: ParameterBox) -> Self {
        Self {
            bbox,
            stage: 0,
            samples_used: 0,
            posterior: None,
            confidence: 1.0,
        }
    }
}

/// Posterior on the current box from `summary`, then the box shrinks around
/// the highest-mass atom.
pub fn refine_step(
    state: &RefinementState,
    sys: &dyn MeasurementSystem,
    summary: &SufficientSummary,
    config: &RefinementConfig,
) -> Result<RefinementState> {
    config.validate()?;
    let prior = config.grid(&state.bbox)?;
    let post = posterior(&prior, sys, summary)?;
    let selected = map_index(&post);
    let next = refinement_box(&post, selected);
    let captured = post.mass_in_box(&next)?;
    Ok(RefinementState {
        bbox: next,
        stage: state.stage + 1,
        samples_used: state.samples_used + summary.total_count(),
        posterior: Some(post),
        confidence: state.confidence * captured,
    })
}

/// `⌈log₂(width / tolerance)⌉` clamped at zero, maximised over axes. A small
/// slack absorbs round-off in ratios that are exact powers of two.
pub fn refinement_count(widths: &DVector<f64>, tolerance: &DVector<f64>) -> Result<usize> {
    Error::check_dim("tolerance", widths.len(), tolerance.len())?;
    if tolerance.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut count = 0usize;
    for (w, e) in widths.iter().zip(tolerance.iter()) {
        if w > e {
            count = count.max(((w / e).log2() - 1e-9).ceil().max(0.0) as usize);
        }
    }
    Ok(count)
}

/// A source of observations at a requested control.
pub trait ObservationSource {
    /// `count` observations at `u`, or `None` when the source cannot supply them.
    fn draw(&mut self, u: &ControlVector, count: usize) -> Result<Option<Vec<DVector<f64>>>>;
}

/// Simulated observations of a fixed true parameter, with an optional cap on
/// the total number of samples.
pub struct SimulatedSource<'a, R: Rng> {
    sys: &'a dyn MeasurementSystem,
    truth: ParameterVector,
    rng: R,
    remaining: Option<usize>,
}

impl<'a, R: Rng> SimulatedSource<'a, R> {
    pub fn new(sys: &'a dyn MeasurementSystem, truth: ParameterVector, rng: R) -> Self {
        Self {
            sys,
            truth,
            rng,
            remaining: None,
        }
    }

    pub fn with_budget(mut self, samples: usize) -> Self {
        self.remaining = Some(samples);
        self
    }
}

impl<R: Rng> ObservationSource for SimulatedSource<'_, R> {
    fn draw(&mut self, u: &ControlVector, count: usize) -> Result<Option<Vec<DVector<f64>>>> {
        if let Some(left) = self.remaining.as_mut() {
            if *left < count {
                return Ok(None);
            }
            *left -= count;
        }
        observe_batch(self.sys, u, &self.truth, count, &mut self.rng).map(Some)
    }
}

/// What a policy sees before each stage.
pub struct StageContext<'a> {
    pub sys: &'a dyn MeasurementSystem,
    pub prior: &'a GridPrior,
    /// Estimate carried from the previous stage (box centre at stage 0).
    pub estimate: &'a ParameterVector,
    pub stage_risk: f64,
    pub stage: usize,
    pub refinements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageDecision {
    Sample { control: ControlVector, count: usize },
    /// End the run early and report the current state.
    Stop,
}

/// Chooses the control and batch size for each stage.
pub trait StagePolicy {
    fn plan(&mut self, ctx: &StageContext<'_>) -> Result<StageDecision>;
}

/// One stage of a refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub control: ControlVector,
    pub batch: usize,
    pub bbox: ParameterBox,
    pub estimate: ParameterVector,
    pub selected_atom: ParameterVector,
    /// Mass inside the next box, or 1 on the final estimation stage.
    pub captured_mass: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBayesOutcome {
    /// Last-stage posterior mean, confidence that the truth lies in
    /// `final_box`, and total samples.
    pub report: EstimateReport,
    pub final_box: ParameterBox,
    /// Highest-mass atom of the last posterior computed.
    pub selected_atom: ParameterVector,
    pub refinements: usize,
    pub stages: Vec<StageRecord>,
    /// True when the policy stopped before the tolerance was met.
    pub truncated: bool,
}

impl FiniteBayesOutcome {
    /// Per-axis width of the final box: the tolerance actually delivered.
    pub fn achieved_tolerance(&self) -> DVector<f64> {
        self.final_box.widths()
    }
}

/// Refines `initial` until its width is at most `tolerance` on every axis,
/// drawing a fresh batch per stage. The target confidence is split evenly
/// across refinements; the final estimation stage uses the same stage risk.
pub fn finite_bayes(
    sys: &dyn MeasurementSystem,
    initial: &ParameterBox,
    tolerance: &DVector<f64>,
    target_confidence: f64,
    source: &mut dyn ObservationSource,
    policy: &mut dyn StagePolicy,
    config: &RefinementConfig,
) -> Result<FiniteBayesOutcome> {
    config.validate()?;
    Error::check_dim("initial box", sys.param_dim(), initial.dim())?;
    if initial.widths().iter().all(|w| *w == 0.0) {
        return Err(Error::invalid("initial box is degenerate"));
    }
    let refinements = refinement_count(&initial.widths(), tolerance)?;
    let stage_risk = stage_risks(target_confidence, refinements.max(1))?.risk;

    let mut bbox = initial.clone();
    let mut estimate = ParameterVector::from_vector(initial.center())?;
    let mut selected = estimate.clone();
    let mut confidence = 1.0;
    let mut samples = 0usize;
    let mut stages = Vec::with_capacity(refinements + 1);

    for stage in 0..=refinements {
        let prior = config.grid(&bbox)?;
        let decision = policy.plan(&StageContext {
            sys,
            prior: &prior,
            estimate: &estimate,
            stage_risk,
            stage,
            refinements,
        })?;
        let (control, count) = match decision {
            StageDecision::Sample { control, count } => (control, count),
            StageDecision::Stop => {
                return Ok(FiniteBayesOutcome {
                    report: EstimateReport::new(estimate, confidence, samples)?,
                    final_box: bbox,
                    selected_atom: selected,
                    refinements: stage.saturating_sub(1).min(refinements),
                    stages,
                    truncated: true,
                })
            }
        };
        let batch = match source.draw(&control, count)? {
            Some(batch) => batch,
            None => {
                return Err(Error::Exhausted {
                    stages: stage,
                    partial: Box::new(EstimateReport::new(estimate, confidence, samples)?),
                })
            }
        };
        let mut summary = SufficientSummary::new();
        summary.extend(&control, &batch)?;
        samples += summary.total_count();
        let post = posterior(&prior, sys, &summary)?;
        estimate = posterior_mean(&post);
        let best = map_index(&post);
        selected = post.atom(best);
        let stage_box = bbox.clone();
        let captured = if stage < refinements {
            let next = refinement_box(&post, best);
            let mass = post.mass_in_box(&next)?;
            bbox = next;
            mass
        } else {
            1.0
        };
        confidence *= captured;
        stages.push(StageRecord {
            stage,
            control,
            batch: count,
            bbox: stage_box,
            estimate: estimate.clone(),
            selected_atom: selected.clone(),
            captured_mass: captured,
            confidence,
        });
    }

    Ok(FiniteBayesOutcome {
        report: EstimateReport::new(estimate, confidence.clamp(0.0, 1.0), samples)?,
        final_box: bbox,
        selected_atom: selected,
        refinements,
        stages,
        truncated: false,
    })
}

/// Sampling cost as a function of the number of observations.
pub type SampleCost = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Cost of a refinement run: a fixed charge per stage plus a sampling cost.
#[derive(Clone)]
pub struct CostModel {
    per_stage: f64,
    per_samples: SampleCost,
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostModel").field("per_stage", &self.per_stage).finish_non_exhaustive()
    }
}

impl CostModel {
    /// `sampling` must be nondecreasing in its argument.
    pub fn new(per_stage: f64, sampling: SampleCost) -> Result<Self> {
        if !(per_stage >= 0.0) || !per_stage.is_finite() {
            return Err(Error::invalid("per-stage cost must be non-negative"));
        }
        Ok(Self {
            per_stage,
            per_samples: sampling,
        })
    }

    pub fn linear(per_stage: f64, per_sample: f64) -> Result<Self> {
        if !(per_sample >= 0.0) {
            return Err(Error::invalid("per-sample cost must be non-negative"));
        }
        Self::new(per_stage, Arc::new(move |n| per_sample * n as f64))
    }
}

/// `per_stage · ⌈log₂(width / tolerance)⌉ + sampling(total_samples)`.
pub fn iteration_cost(width: f64, tolerance: f64, cost: &CostModel, total_samples: usize) -> Result<f64> {
    if !(tolerance > 0.0) || !(width >= tolerance) {
        return Err(Error::invalid("need width ≥ tolerance > 0"));
    }
    let stages = refinement_count(&DVector::from_element(1, width), &DVector::from_element(1, tolerance))?;
    Ok(cost.per_stage * stages as f64 + (cost.per_samples)(total_samples))
}
