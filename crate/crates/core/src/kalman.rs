//! Static-parameter Kalman filter and its extended (relinearizing) variant.
//!
//! The parameter has no dynamics, so each update is a pure measurement
//! update. Covariances are propagated in Joseph form and re-symmetrized.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{jacobian, transfer, ControlVector, MeasurementSystem, ParameterVector};
use crate::stats::{binomial_std_error, normal_cdf, normal_quantile};

const BELIEF_SYMMETRY_TOL: f64 = 1e-12;
const BELIEF_PSD_TOL: f64 = -1e-10;
/// Innovation covariances with reciprocal condition below this are singular.
const MIN_RECIPROCAL_CONDITION: f64 = 1e-14;
/// Number of quasi-random points used for correlated tolerance risk.
pub const QMC_POINTS: usize = 16_384;

/// Gaussian belief `N(mean, covariance)` over the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: ParameterVector,
    covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: ParameterVector, covariance: DMatrix<f64>) -> Result<Self> {
        let s = mean.len();
        if covariance.nrows() != s || covariance.ncols() != s {
            return Err(Error::Dimension {
                what: "belief covariance",
                expected: s,
                got: covariance.nrows().max(covariance.ncols()),
            });
        }
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("belief covariance has non-finite entries".into()));
        }
        let scale = covariance.abs().max().max(1.0);
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > BELIEF_SYMMETRY_TOL * scale {
            return Err(Error::invalid(format!("belief covariance asymmetric by {asym:e}")));
        }
        if s > 0 {
            let min_eig = covariance.clone().symmetric_eigenvalues().min();
            if min_eig < BELIEF_PSD_TOL * scale {
                return Err(Error::invalid(format!(
                    "belief covariance not positive semi-definite (eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(Self { mean, covariance })
    }

    /// Scalar belief `N(mean, variance)`.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(
            ParameterVector::scalar(mean)?,
            DMatrix::from_element(1, 1, variance),
        )
    }

    pub fn mean(&self) -> &ParameterVector {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Affine pseudo-measurement `y = z + offset ≈ M p + v` obtained from a
/// first-order expansion of `H` about the current mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Linearization {
    pub fn pseudo_measurement(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_dim("observation", self.offset.len(), z.len())?;
        Ok(z + &self.offset)
    }
}

fn check_update_shapes(belief: &GaussianBelief, h: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<()> {
    Error::check_dim("measurement matrix columns", belief.dim(), h.ncols())?;
    Error::check_dim("noise covariance rows", h.nrows(), noise_cov.nrows())?;
    Error::check_dim("noise covariance columns", h.nrows(), noise_cov.ncols())
}

/// Gain `Λ Hᵀ (H Λ Hᵀ + R)⁻¹`.
pub fn kf_gain(belief: &GaussianBelief, h: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_update_shapes(belief, h, noise_cov)?;
    let lam = belief.covariance();
    let innovation = h * lam * h.transpose() + noise_cov;
    let innovation = (&innovation + innovation.transpose()) * 0.5;
    let eig = innovation.clone().symmetric_eigenvalues();
    let largest = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let smallest = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(smallest > MIN_RECIPROCAL_CONDITION * largest) || largest == 0.0 {
        let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
        return Err(Error::SingularInnovation { condition });
    }
    let chol = innovation
        .cholesky()
        .ok_or(Error::SingularInnovation { condition: largest / smallest })?;
    // K = (S⁻¹ H Λ)ᵀ since S and Λ are symmetric.
    Ok(chol.solve(&(h * lam)).transpose())
}

/// Measurement update with observation `z ≈ H p + v`, `v ~ N(0, R)`.
pub fn kf_update(
    belief: &GaussianBelief,
    h: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<GaussianBelief> {
    let gain = kf_gain(belief, h, noise_cov)?;
    Error::check_dim("observation", h.nrows(), z.len())?;
    let mean = belief.mean().as_vector();
    let innovation = z - h * mean;
    let new_mean = mean + &gain * innovation;
    let s = belief.dim();
    let reduce = DMatrix::identity(s, s) - &gain * h;
    let joseph = &reduce * belief.covariance() * reduce.transpose() + &gain * noise_cov * gain.transpose();
    let cov = (&joseph + joseph.transpose()) * 0.5;
    GaussianBelief::new(ParameterVector::from_vector(new_mean)?, cov)
}

/// First-order expansion of `H(u, ·)` about `center`.
pub fn ekf_linearize(
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    center: &ParameterVector,
) -> Result<Linearization> {
    let matrix = jacobian(sys, u, center)?;
    let h = transfer(sys, u, center)?;
    let offset = &matrix * center.as_vector() - h;
    Ok(Linearization { matrix, offset })
}

/// Relinearize at the current mean, then apply the linear update to the
/// pseudo-measurement. A non-zero noise mean is removed from `z` first.
pub fn ekf_update(
    belief: &GaussianBelief,
    sys: &dyn MeasurementSystem,
    u: &ControlVector,
    z: &DVector<f64>,
) -> Result<GaussianBelief> {
    let lin = ekf_linearize(sys, u, belief.mean())?;
    let noise = sys.noise(u, belief.mean())?;
    let y = lin.pseudo_measurement(z)? - noise.mean();
    kf_update(belief, &lin.matrix, noise.covariance(), &y)
}

/// Probability that the parameter falls outside `mean ± tolerance`, with the
/// standard error of the estimate (zero when computed exactly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceRisk {
    pub probability: f64,
    pub std_error: f64,
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().all(|p| !candidate.is_multiple_of(*p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Risk of a Gaussian belief against a per-coordinate tolerance. Diagonal
/// covariances are handled exactly; correlated ones by a Halton rule of
/// [`QMC_POINTS`] points.
pub fn gaussian_tolerance_risk(belief: &GaussianBelief, tolerance: &DVector<f64>) -> Result<ToleranceRisk> {
    Error::check_dim("tolerance", belief.dim(), tolerance.len())?;
    if tolerance.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let cov = belief.covariance();
    let s = belief.dim();
    let diagonal = (0..s).all(|i| (0..s).all(|j| i == j || cov[(i, j)] == 0.0));
    if diagonal {
        let inside: f64 = (0..s)
            .map(|i| {
                let sd = cov[(i, i)].max(0.0).sqrt();
                if sd == 0.0 {
                    1.0
                } else {
                    1.0 - 2.0 * normal_cdf(-tolerance[i] / sd)
                }
            })
            .product();
        return Ok(ToleranceRisk {
            probability: (1.0 - inside).clamp(0.0, 1.0),
            std_error: 0.0,
        });
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    let bases = first_primes(s);
    let mut outside = 0usize;
    let mut xi = DVector::zeros(s);
    for idx in 1..=QMC_POINTS as u64 {
        for (d, base) in bases.iter().enumerate() {
            xi[d] = normal_quantile(radical_inverse(idx, *base));
        }
        let x = &factor * &xi;
        if x.iter().zip(tolerance.iter()).any(|(v, e)| v.abs() > *e) {
            outside += 1;
        }
    }
    let prob = outside as f64 / QMC_POINTS as f64;
    Ok(ToleranceRisk {
        probability: prob,
        std_error: binomial_std_error(prob, QMC_POINTS),
    })
}
