//! Measurement-system abstraction `z = H(u, p) + v`, with `v ~ N(μ(u,p), Σ(u,p))`.
//!
//! `p` is the static parameter being estimated and `u` the sensor control.
//! Parameter uncertainty is expressed as a closed axis-aligned box.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal_vector;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

fn ensure_finite(what: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

macro_rules! real_vector_newtype {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                Self::from_vector(DVector::from_vec(coords))
            }

            pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
                ensure_finite($what, &coords)?;
                Ok(Self(coords))
            }

            pub fn scalar(x: f64) -> Result<Self> {
                Self::new(vec![x])
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }
    };
}

real_vector_newtype!(ParameterVector, "parameter vector");
real_vector_newtype!(ControlVector, "control vector");

impl ControlVector {
    /// The control of a system that has no control input.
    pub fn empty() -> Self {
        ControlVector(DVector::zeros(0))
    }
}

/// Closed box `[lower, upper]` in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::from_vectors(DVector::from_vec(lower), DVector::from_vec(upper))
    }

    pub fn from_vectors(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        Error::check_dim("box upper corner", lower.len(), upper.len())?;
        ensure_finite("box lower corner", &lower)?;
        ensure_finite("box upper corner", &upper)?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::invalid("box lower corner exceeds upper corner"));
        }
        Ok(Self { lower, upper })
    }

    /// Box `center ± half_width` per coordinate.
    pub fn symmetric(center: &[f64], half_width: &[f64]) -> Result<Self> {
        Error::check_dim("box half-widths", center.len(), half_width.len())?;
        if half_width.iter().any(|h| *h < 0.0) {
            return Err(Error::invalid("negative half-width"));
        }
        let lower = center.iter().zip(half_width).map(|(c, h)| c - h).collect();
        let upper = center.iter().zip(half_width).map(|(c, h)| c + h).collect();
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.upper + &self.lower) * 0.5
    }

    pub fn contains_point(&self, p: &DVector<f64>) -> Result<bool> {
        Error::check_dim("point", self.dim(), p.len())?;
        Ok(p
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(x, (l, u))| *l <= *x && *x <= *u))
    }

    /// True when `self` lies inside `outer` (closed containment).
    pub fn is_within(&self, outer: &ParameterBox) -> bool {
        self.dim() == outer.dim()
            && (0..self.dim())
                .all(|i| outer.lower[i] <= self.lower[i] && self.upper[i] <= outer.upper[i])
    }
}

pub fn box_contains(bbox: &ParameterBox, p: &ParameterVector) -> Result<bool> {
    bbox.contains_point(p)
}

/// Additive Gaussian noise with a symmetric positive semi-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNoiseSpec {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianNoiseSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if covariance.nrows() != k || covariance.ncols() != k {
            return Err(Error::Dimension {
                what: "noise covariance",
                expected: k,
                got: covariance.nrows().max(covariance.ncols()),
            });
        }
        ensure_finite("noise mean", &mean)?;
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::Model("noise covariance has non-finite entries".into()));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(Error::Model(format!("noise covariance asymmetric by {asym:e}")));
        }
        if k > 0 {
            let min_eig = covariance.clone().symmetric_eigenvalues().min();
            if min_eig < -PSD_TOL {
                return Err(Error::Model(format!(
                    "noise covariance not positive semi-definite (eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(Self { mean, covariance })
    }

    /// Zero-mean noise with covariance `variance · I_k`.
    pub fn isotropic(k: usize, variance: f64) -> Result<Self> {
        Self::new(DVector::zeros(k), DMatrix::identity(k, k) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Symmetric square root `L` with `L Lᵀ = Σ`, negative round-off
    /// eigenvalues clipped to zero.
    pub fn sampling_factor(&self) -> DMatrix<f64> {
        let k = self.dim();
        if k == 0 {
            return DMatrix::zeros(0, 0);
        }
        if self.covariance.iter().all(|x| *x == 0.0) {
            return DMatrix::zeros(k, k);
        }
        let eig = SymmetricEigen::new(self.covariance.clone());
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let factor = self.sampling_factor();
        &self.mean + factor * standard_normal_vector(rng, self.dim())
    }
}

/// A controllable measurement system. Implementors may assume inputs have
/// already been dimension-checked; call the free functions in this module to
/// get the checks.
pub trait MeasurementSystem: Send + Sync {
    fn param_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    /// Observation length at control `u`.
    fn obs_dim(&self, u: &ControlVector) -> usize;

    /// Noiseless observation `H(u, p)`.
    fn evaluate(&self, u: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>>;

    /// `∂H/∂p` at `(u, p)`, shape `obs_dim × param_dim`.
    fn jacobian(&self, u: &ControlVector, p: &ParameterVector) -> Result<DMatrix<f64>>;

    fn noise(&self, u: &ControlVector, p: &ParameterVector) -> Result<GaussianNoiseSpec>;

    /// Whether `noise` varies with `p`.
    fn noise_depends_on_parameter(&self) -> bool {
        false
    }

    /// Membership in the admissible control set.
    fn admits_control(&self, _u: &ControlVector) -> bool {
        true
    }
}

fn check_inputs(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
) -> Result<()> {
    Error::check_dim("parameter", sys.param_dim(), p.len())?;
    Error::check_dim("control", sys.control_dim(), u.len())?;
    if !sys.admits_control(u) {
        return Err(Error::invalid("control outside the admissible set"));
    }
    Ok(())
}

/// `H(u, p)` with dimension checks.
pub fn transfer(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
) -> Result<DVector<f64>> {
    check_inputs(sys, u, p)?;
    let h = sys.evaluate(u, p)?;
    Error::check_dim("observation", sys.obs_dim(u), h.len())?;
    Ok(h)
}

/// `∂H/∂p` with dimension checks.
pub fn jacobian(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
) -> Result<DMatrix<f64>> {
    check_inputs(sys, u, p)?;
    let j = sys.jacobian(u, p)?;
    Error::check_dim("jacobian rows", sys.obs_dim(u), j.nrows())?;
    Error::check_dim("jacobian columns", sys.param_dim(), j.ncols())?;
    Ok(j)
}

fn noise_checked(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
) -> Result<GaussianNoiseSpec> {
    let spec = sys.noise(u, p)?;
    Error::check_dim("noise", sys.obs_dim(u), spec.dim())?;
    Ok(spec)
}

/// One simulated draw `H(u, p) + v`.
pub fn observe<R: Rng + ?Sized>(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let h = transfer(sys, u, p)?;
    let noise = noise_checked(sys, u, p)?;
    Ok(h + noise.sample(rng))
}

/// `count` independent draws at a fixed `(u, p)`; the noise factorization is
/// computed once. Consumes the stream exactly as repeated [`observe`] calls.
pub fn observe_batch<R: Rng + ?Sized>(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
    count: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let h = transfer(sys, u, p)?;
    let noise = noise_checked(sys, u, p)?;
    let shift = &h + noise.mean();
    let factor = noise.sampling_factor();
    Ok((0..count)
        .map(|_| &shift + &factor * standard_normal_vector(rng, h.len()))
        .collect())
}

/// Central finite-difference jacobian with per-coordinate step
/// `rel_step · max(1, |p_i|)`.
pub fn finite_difference_jacobian(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    p: &ParameterVector,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let base = transfer(sys, u, p)?;
    let mut out = DMatrix::zeros(base.len(), p.len());
    for i in 0..p.len() {
        let step = rel_step * p[i].abs().max(1.0);
        let mut plus = p.as_vector().clone();
        let mut minus = p.as_vector().clone();
        plus[i] += step;
        minus[i] -= step;
        let hp = sys.evaluate(u, &ParameterVector::from_vector(plus)?)?;
        let hm = sys.evaluate(u, &ParameterVector::from_vector(minus)?)?;
        out.set_column(i, &((hp - hm) / (2.0 * step)));
    }
    Ok(out)
}

/// A requester's tolerance, deadline and priority.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRequest {
    tolerance: DVector<f64>,
    deadline: f64,
    priority: f64,
}

impl SensorRequest {
    pub fn new(tolerance: Vec<f64>, deadline: f64, priority: f64) -> Result<Self> {
        if tolerance.is_empty() || tolerance.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("tolerance must be positive in every coordinate"));
        }
        if !(deadline >= 0.0) {
            return Err(Error::invalid("deadline must be non-negative"));
        }
        if !(priority > 0.0) || !priority.is_finite() {
            return Err(Error::invalid("priority must be positive"));
        }
        Ok(Self {
            tolerance: DVector::from_vec(tolerance),
            deadline,
            priority,
        })
    }

    pub fn tolerance(&self) -> &DVector<f64> {
        &self.tolerance
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    pub fn priority(&self) -> f64 {
        self.priority
    }
}

/// Estimate returned to a requester, with the probability that it lies
/// within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: ParameterVector,
    pub confidence: f64,
    pub samples_used: usize,
}

impl EstimateReport {
    pub fn new(estimate: ParameterVector, confidence: f64, samples_used: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            estimate,
            confidence,
            samples_used,
        })
    }
}

/// Scalar system `z = amplitude · sin(p) + v`, `v ~ N(0, noise_var)`. The
/// control input is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SinSystem {
    pub amplitude: f64,
    pub noise_var: f64,
}

impl SinSystem {
    pub fn new(amplitude: f64, noise_var: f64) -> Result<Self> {
        if !amplitude.is_finite() || !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid("sin system needs finite amplitude and variance ≥ 0"));
        }
        Ok(Self {
            amplitude,
            noise_var,
        })
    }
}

impl MeasurementSystem for SinSystem {
    fn param_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        0
    }

    fn obs_dim(&self, _u: &ControlVector) -> usize {
        1
    }

    fn evaluate(&self, _u: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.amplitude * p[0].sin()))
    }

    fn jacobian(&self, _u: &ControlVector, p: &ParameterVector) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, self.amplitude * p[0].cos()))
    }

    fn noise(&self, _u: &ControlVector, _p: &ParameterVector) -> Result<GaussianNoiseSpec> {
        GaussianNoiseSpec::isotropic(1, self.noise_var)
    }
}

/// Linear system `z = A p + v` with fixed noise; the control input is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    matrix: DMatrix<f64>,
    noise: GaussianNoiseSpec,
}

impl LinearSystem {
    pub fn new(matrix: DMatrix<f64>, noise: GaussianNoiseSpec) -> Result<Self> {
        Error::check_dim("linear system noise", matrix.nrows(), noise.dim())?;
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("linear map has non-finite entries"));
        }
        Ok(Self { matrix, noise })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl MeasurementSystem for LinearSystem {
    fn param_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn control_dim(&self) -> usize {
        0
    }

    fn obs_dim(&self, _u: &ControlVector) -> usize {
        self.matrix.nrows()
    }

    fn evaluate(&self, _u: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>> {
        Ok(&self.matrix * p.as_vector())
    }

    fn jacobian(&self, _u: &ControlVector, _p: &ParameterVector) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }

    fn noise(&self, _u: &ControlVector, _p: &ParameterVector) -> Result<GaussianNoiseSpec> {
        Ok(self.noise.clone())
    }
}
