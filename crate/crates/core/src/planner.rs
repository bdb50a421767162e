//! Sensor-control planning: 0-w loss and decision risk, per-stage risk
//! allocation, batch sizing to quantization, and time-optimal control choice.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{nearest_atom, GridPrior};
use crate::iterative::{StageContext, StageDecision, StagePolicy};
use crate::model::{transfer, ControlVector, MeasurementSystem, ParameterVector};
use crate::stats::normal_cdf;

/// Batch-size search is linear up to this count and bisected beyond it.
const LINEAR_SCAN_LIMIT: usize = 32;
/// Mahalanobis separations below this are treated as indistinguishable.
const SEPARATION_FLOOR: f64 = 1e-9;

/// Tolerance and priority weight of a 0-w loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    tolerance: DVector<f64>,
    weight: f64,
}

impl LossSpec {
    pub fn new(tolerance: Vec<f64>, weight: f64) -> Result<Self> {
        if tolerance.is_empty() || tolerance.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::invalid("loss weight must be positive"));
        }
        Ok(Self {
            tolerance: DVector::from_vec(tolerance),
            weight,
        })
    }

    pub fn tolerance(&self) -> &DVector<f64> {
        &self.tolerance
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// 0 when every coordinate is strictly within tolerance, else the weight.
pub fn zero_w_loss(spec: &LossSpec, truth: &ParameterVector, estimate: &ParameterVector) -> Result<f64> {
    Error::check_dim("parameter", spec.tolerance.len(), truth.len())?;
    Error::check_dim("estimate", spec.tolerance.len(), estimate.len())?;
    let inside = (0..truth.len()).all(|i| (estimate[i] - truth[i]).abs() < spec.tolerance[i]);
    Ok(if inside { 0.0 } else { spec.weight })
}

/// `w · P(outside) + time_cost · time_to_cost`.
pub fn decision_risk(estimation_risk: f64, spec: &LossSpec, time_cost: f64, time_to_cost: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&estimation_risk) {
        return Err(Error::invalid("estimation risk must be a probability"));
    }
    if !(time_cost >= 0.0) || !(time_to_cost >= 0.0) {
        return Err(Error::invalid("costs must be non-negative"));
    }
    Ok(spec.weight * estimation_risk + time_cost * time_to_cost)
}

/// Equal split of an overall confidence target across sequential stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagePlan {
    pub target: f64,
    pub stages: usize,
    /// Failure probability allowed at each stage, `1 - target^(1/stages)`.
    pub risk: f64,
}

impl StagePlan {
    pub fn risks(&self) -> Vec<f64> {
        vec![self.risk; self.stages]
    }
}

pub fn stage_risks(target: f64, stages: usize) -> Result<StagePlan> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target confidence must lie in (0, 1)"));
    }
    if stages == 0 {
        return Err(Error::invalid("need at least one stage"));
    }
    // 1 - exp(ln τ / i) without cancellation.
    let risk = -(target.ln() / stages as f64).exp_m1();
    Ok(StagePlan { target, stages, risk })
}

/// What counts as a successful quantization onto the conditioning atom.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum QuantizationTarget {
    /// The atom has the highest posterior mass.
    #[default]
    Mode,
    /// The atom carries at least this posterior mass.
    Mass(f64),
}

/// Planned batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchPlan {
    pub count: usize,
    /// Some competing atom predicts the same observation distribution.
    pub unobservable: bool,
    /// Union bound on the failure probability at `count`.
    pub failure_bound: f64,
}

impl BatchPlan {
    pub fn meets(&self, risk: f64) -> bool {
        !self.unobservable && self.failure_bound <= risk
    }
}

/// Per-competitor log-likelihood-ratio requirement: separation `d` (in
/// noise standard deviations) and margin `c` the ratio must exceed.
struct Competitor {
    separation: f64,
    margin: f64,
}

impl Competitor {
    /// `P(LLR_n ≤ c)` with `LLR_n ~ N(n d²/2, n d²)`.
    fn failure(&self, n: usize) -> f64 {
        if self.separation.is_infinite() {
            return 0.0;
        }
        let n = n as f64;
        let d = self.separation;
        normal_cdf((self.margin - 0.5 * n * d * d) / (n.sqrt() * d))
    }
}

fn failure_bound(competitors: &[Competitor], n: usize) -> f64 {
    competitors.iter().map(|c| c.failure(n)).sum()
}

/// Smallest `n ≤ n_max` such that, if the truth is the atom nearest
/// `estimate`, the probability the posterior fails to quantize onto it is at
/// most `stage_risk`. The failure probability is the Gaussian union bound
/// over competing atoms.
pub fn batch_size(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    prior: &GridPrior,
    estimate: &ParameterVector,
    stage_risk: f64,
    target: QuantizationTarget,
    n_max: usize,
) -> Result<BatchPlan> {
    if !(stage_risk > 0.0 && stage_risk < 1.0) {
        return Err(Error::invalid("stage risk must lie in (0, 1)"));
    }
    if n_max == 0 {
        return Err(Error::invalid("batch cap must be positive"));
    }
    let base_margin = match target {
        QuantizationTarget::Mode => 0.0,
        QuantizationTarget::Mass(theta) => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::invalid("mass target must lie in (0, 1)"));
            }
            (((prior.len().max(2) - 1) as f64) * theta / (1.0 - theta)).ln()
        }
    };
    let anchor_idx = nearest_atom(prior, estimate.as_vector())?;
    if prior.len() == 1 {
        return Ok(BatchPlan { count: 1, unobservable: false, failure_bound: 0.0 });
    }
    let anchor = prior.atom(anchor_idx);
    let h_anchor = transfer(sys, u, &anchor)?;
    let noise = sys.noise(u, &anchor)?;
    let eig = SymmetricEigen::new(noise.covariance().clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut competitors = Vec::with_capacity(prior.len() - 1);
    let mut unobservable = false;
    for q in (0..prior.len()).filter(|&q| q != anchor_idx) {
        let diff = transfer(sys, u, &prior.atom(q))? - &h_anchor;
        let coords = eig.eigenvectors.transpose() * &diff;
        let mut d2 = 0.0;
        for (c, lam) in coords.iter().zip(eig.eigenvalues.iter()) {
            if *lam > 1e-14 * scale && *lam > 0.0 {
                d2 += c * c / lam;
            } else if c.abs() > SEPARATION_FLOOR * (1.0 + h_anchor.amax()) {
                d2 = f64::INFINITY;
            }
        }
        let separation = d2.sqrt();
        if !(separation > SEPARATION_FLOOR) {
            unobservable = true;
            continue;
        }
        let prior_ratio = prior.log_masses()[q] - prior.log_masses()[anchor_idx];
        competitors.push(Competitor { separation, margin: base_margin + prior_ratio });
    }
    if unobservable {
        return Ok(BatchPlan {
            count: n_max,
            unobservable: true,
            failure_bound: 1.0,
        });
    }

    let scan_end = n_max.min(LINEAR_SCAN_LIMIT);
    for n in 1..=scan_end {
        let bound = failure_bound(&competitors, n);
        if bound <= stage_risk {
            return Ok(BatchPlan { count: n, unobservable: false, failure_bound: bound });
        }
    }
    if scan_end == n_max {
        return Ok(BatchPlan { count: n_max, unobservable: false, failure_bound: failure_bound(&competitors, n_max) });
    }
    // Beyond the scan the bound decreases in n: double, then bisect.
    let mut lo = scan_end;
    let mut hi = scan_end;
    loop {
        hi = (hi * 2).min(n_max);
        if failure_bound(&competitors, hi) <= stage_risk {
            break;
        }
        if hi == n_max {
            return Ok(BatchPlan { count: n_max, unobservable: false, failure_bound: failure_bound(&competitors, n_max) });
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if failure_bound(&competitors, mid) <= stage_risk {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BatchPlan { count: hi, unobservable: false, failure_bound: failure_bound(&competitors, hi) })
}

/// Travel time between controls.
pub type TravelTime = Arc<dyn Fn(&ControlVector, &ControlVector) -> f64 + Send + Sync>;

/// Time per observation and travel time between controls.
#[derive(Clone)]
pub struct TimeModel {
    sample_time: f64,
    travel: TravelTime,
}

impl fmt::Debug for TimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeModel").field("sample_time", &self.sample_time).finish_non_exhaustive()
    }
}

impl TimeModel {
    /// `travel` must be non-negative; it is forced to zero between equal controls.
    pub fn new(sample_time: f64, travel: TravelTime) -> Result<Self> {
        if !(sample_time >= 0.0) || !sample_time.is_finite() {
            return Err(Error::invalid("sample time must be non-negative"));
        }
        Ok(Self { sample_time, travel })
    }

    /// Travel at `speed` along the straight line in control space.
    pub fn euclidean(sample_time: f64, speed: f64) -> Result<Self> {
        if !(speed > 0.0) {
            return Err(Error::invalid("travel speed must be positive"));
        }
        Self::new(sample_time, Arc::new(move |a, b| (a.as_vector() - b.as_vector()).norm() / speed))
    }

    /// All times multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let inner = self.travel.clone();
        Self::new(self.sample_time * factor, Arc::new(move |a, b| factor * inner(a, b)))
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn travel_time(&self, from: &ControlVector, to: &ControlVector) -> Result<f64> {
        if from == to {
            return Ok(0.0);
        }
        let t = (self.travel)(from, to);
        if !(t >= 0.0) {
            return Err(Error::invalid("travel time must be non-negative"));
        }
        Ok(t)
    }
}

/// The chosen control for a stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlChoice {
    pub index: usize,
    pub control: ControlVector,
    pub batch: BatchPlan,
    pub total_time: f64,
}

/// Candidate minimising travel plus sampling time. Unobservable candidates
/// are skipped; ties go to the earliest candidate.
#[allow(clippy::too_many_arguments)]
pub fn select_control(
    candidates: &[ControlVector],
    current: &ControlVector,
    sys: &dyn MeasurementSystem,
    prior: &GridPrior,
    estimate: &ParameterVector,
    stage_risk: f64,
    target: QuantizationTarget,
    time: &TimeModel,
    n_max: usize,
) -> Result<ControlChoice> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate controls"));
    }
    let mut best: Option<ControlChoice> = None;
    for (index, u) in candidates.iter().enumerate() {
        let batch = match batch_size(sys, u, prior, estimate, stage_risk, target, n_max) {
            Ok(b) if !b.unobservable => b,
            Ok(_) | Err(Error::Unobservable) => continue,
            Err(e) => return Err(e),
        };
        let total_time = time.travel_time(current, u)? + time.sample_time * batch.count as f64;
        if best.as_ref().is_none_or(|b| total_time < b.total_time) {
            best = Some(ControlChoice { index, control: u.clone(), batch, total_time });
        }
    }
    best.ok_or_else(|| Error::Planning("every candidate control is unobservable".into()))
}

/// Samples at one control, sized by [`batch_size`].
#[derive(Debug, Clone)]
pub struct FixedControlPolicy {
    pub control: ControlVector,
    pub target: QuantizationTarget,
    pub n_max: usize,
}

impl StagePolicy for FixedControlPolicy {
    fn plan(&mut self, ctx: &StageContext<'_>) -> Result<StageDecision> {
        let plan = batch_size(ctx.sys, &self.control, ctx.prior, ctx.estimate, ctx.stage_risk, self.target, self.n_max)?;
        if plan.unobservable {
            return Err(Error::Planning("the fixed control cannot distinguish the atoms".into()));
        }
        Ok(StageDecision::Sample { control: self.control.clone(), count: plan.count })
    }
}

/// One planned stage of a [`PlannedControlPolicy`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStage {
    pub choice: ControlChoice,
    /// Time elapsed once this stage's sampling completes.
    pub elapsed: f64,
}

/// Chooses the fastest candidate each stage and stops when the next stage
/// would overrun the deadline.
#[derive(Debug, Clone)]
pub struct PlannedControlPolicy {
    pub candidates: Vec<ControlVector>,
    pub current: ControlVector,
    pub time: TimeModel,
    pub target: QuantizationTarget,
    pub n_max: usize,
    pub deadline: f64,
    pub elapsed: f64,
    pub log: Vec<PlannedStage>,
}

impl PlannedControlPolicy {
    pub fn new(candidates: Vec<ControlVector>, start: ControlVector, time: TimeModel, deadline: f64) -> Self {
        Self {
            candidates,
            current: start,
            time,
            target: QuantizationTarget::Mode,
            n_max: 100_000,
            deadline,
            elapsed: 0.0,
            log: Vec::new(),
        }
    }
}

impl StagePolicy for PlannedControlPolicy {
    fn plan(&mut self, ctx: &StageContext<'_>) -> Result<StageDecision> {
        let choice = select_control(
            &self.candidates,
            &self.current,
            ctx.sys,
            ctx.prior,
            ctx.estimate,
            ctx.stage_risk,
            self.target,
            &self.time,
            self.n_max,
        )?;
        if self.elapsed + choice.total_time > self.deadline {
            return Ok(StageDecision::Stop);
        }
        self.elapsed += choice.total_time;
        self.current = choice.control.clone();
        let decision = StageDecision::Sample { control: choice.control.clone(), count: choice.batch.count };
        self.log.push(PlannedStage { choice, elapsed: self.elapsed });
        Ok(decision)
    }
}
