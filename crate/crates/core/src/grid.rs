//! Finite-prior Bayes estimation on a Cartesian grid of atoms.
//!
//! Masses are stored as normalized log-masses. Observations are reduced to
//! per-control sufficient statistics (count, mean, scatter matrix), which
//! reproduce the full-sample Gaussian likelihood exactly, including when the
//! noise covariance varies with the parameter.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{transfer, ControlVector, MeasurementSystem, ParameterBox, ParameterVector};
use crate::stats::log_sum_exp;

/// Default mass threshold above which a posterior counts as quantized.
pub const DEFAULT_QUANTIZATION_THRESHOLD: f64 = 0.9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// How prior mass is spread over grid atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassRule {
    /// Equal mass on every atom.
    #[default]
    Uniform,
    /// Mass proportional to the volume of the atom's cell (half-cells at the
    /// box faces), i.e. a discretized uniform density.
    Cell,
}

/// Discrete prior or posterior on a Cartesian grid. Atoms are enumerated in
/// row-major order: the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrior {
    axes: Vec<Vec<f64>>,
    log_masses: Vec<f64>,
}

impl GridPrior {
    /// Builds a grid from per-axis values and unnormalized log-masses.
    pub fn new(axes: Vec<Vec<f64>>, log_masses: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        for axis in &axes {
            if axis.is_empty() || axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("grid axes must be non-empty and finite"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("grid axis values must be strictly increasing"));
            }
        }
        let count: usize = axes.iter().map(Vec::len).product();
        Error::check_dim("log-masses", count, log_masses.len())?;
        let mut grid = Self { axes, log_masses };
        grid.normalize()?;
        Ok(grid)
    }

    fn normalize(&mut self) -> Result<()> {
        if self.log_masses.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::Numerical("log-mass is NaN or +inf".into()));
        }
        let total = log_sum_exp(&self.log_masses);
        if !total.is_finite() {
            return Err(Error::Numerical("every atom has zero mass".into()));
        }
        for x in &mut self.log_masses {
            *x -= total;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.log_masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_masses.is_empty()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn log_masses(&self) -> &[f64] {
        &self.log_masses
    }

    pub fn masses(&self) -> Vec<f64> {
        self.log_masses.iter().map(|x| x.exp()).collect()
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.log_masses[index].exp()
    }

    /// Per-axis positions of atom `index`.
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = index % axis.len();
            index /= axis.len();
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (i, axis)| acc * axis.len() + i)
    }

    pub fn atom_coords(&self, index: usize) -> DVector<f64> {
        let multi = self.multi_index(index);
        DVector::from_iterator(self.dim(), multi.iter().zip(&self.axes).map(|(i, axis)| axis[*i]))
    }

    pub fn atom(&self, index: usize) -> ParameterVector {
        ParameterVector::from_vector(self.atom_coords(index)).expect("grid atoms are finite")
    }

    /// Same atoms, new (unnormalized) log-masses.
    pub fn with_log_masses(&self, log_masses: Vec<f64>) -> Result<Self> {
        Error::check_dim("log-masses", self.len(), log_masses.len())?;
        let mut grid = Self {
            axes: self.axes.clone(),
            log_masses,
        };
        grid.normalize()?;
        Ok(grid)
    }

    /// Smallest box containing every atom.
    pub fn bounding_box(&self) -> ParameterBox {
        let lower = self.axes.iter().map(|a| a[0]).collect();
        let upper = self.axes.iter().map(|a| a[a.len() - 1]).collect();
        ParameterBox::new(lower, upper).expect("axes are sorted")
    }

    /// Total mass of atoms inside the closed box.
    pub fn mass_in_box(&self, bbox: &ParameterBox) -> Result<f64> {
        Error::check_dim("box", self.dim(), bbox.dim())?;
        let mut total = 0.0;
        for i in 0..self.len() {
            if bbox.contains_point(&self.atom_coords(i))? {
                total += self.mass(i);
            }
        }
        Ok(total)
    }
}

fn axis_points(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if lo == hi {
        return Ok(vec![lo]);
    }
    let last = (points - 1) as f64;
    let mut axis: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * (i as f64 / last)).collect();
    axis[points - 1] = hi;
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("box too narrow for the requested resolution"));
    }
    Ok(axis)
}

fn cell_widths(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i == 0 { axis[0] } else { axis[i - 1] };
            let right = if i + 1 == n { axis[n - 1] } else { axis[i + 1] };
            0.5 * (right - left)
        })
        .collect()
}

/// Grid with `points_per_axis` equispaced atoms per axis, endpoints included.
/// A degenerate axis contributes a single atom.
pub fn grid_prior(bbox: &ParameterBox, points_per_axis: usize, rule: MassRule) -> Result<GridPrior> {
    if points_per_axis < 2 {
        return Err(Error::invalid("need at least two points per axis"));
    }
    let axes = (0..bbox.dim())
        .map(|d| axis_points(bbox.lower()[d], bbox.upper()[d], points_per_axis))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = axes.iter().map(Vec::len).product();
    let log_masses = match rule {
        MassRule::Uniform => vec![0.0; count],
        MassRule::Cell => {
            let widths: Vec<Vec<f64>> = axes.iter().map(|a| cell_widths(a)).collect();
            let shell = GridPrior {
                axes: axes.clone(),
                log_masses: vec![0.0; count],
            };
            (0..count)
                .map(|i| {
                    shell
                        .multi_index(i)
                        .iter()
                        .zip(&widths)
                        .map(|(j, w)| w[*j].ln())
                        .sum()
                })
                .collect()
        }
    };
    GridPrior::new(axes, log_masses)
}

pub fn uniform_grid(bbox: &ParameterBox, points_per_axis: usize) -> Result<GridPrior> {
    grid_prior(bbox, points_per_axis, MassRule::Uniform)
}

/// Observations taken at one control value, reduced to count, mean and
/// scatter matrix `Σ (z - z̄)(z - z̄)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGroup {
    pub control: ControlVector,
    pub count: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl ObservationGroup {
    fn push(&mut self, z: &DVector<f64>) {
        self.count += 1;
        let delta = z - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta_after = z - &self.mean;
        self.scatter += &delta * delta_after.transpose();
    }
}

/// Observations grouped by distinct control value (exact equality).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SufficientSummary {
    groups: Vec<ObservationGroup>,
}

impl SufficientSummary {
    pub fn new() -> Self {
        Self::default()
    }

    fn group_mut(&mut self, u: &ControlVector, k: usize) -> Result<&mut ObservationGroup> {
        let pos = self.groups.iter().position(|g| g.control == *u);
        let idx = match pos {
            Some(i) => {
                Error::check_dim("observation", self.groups[i].mean.len(), k)?;
                i
            }
            None => {
                self.groups.push(ObservationGroup {
                    control: u.clone(),
                    count: 0,
                    mean: DVector::zeros(k),
                    scatter: DMatrix::zeros(k, k),
                });
                self.groups.len() - 1
            }
        };
        Ok(&mut self.groups[idx])
    }

    pub fn push(&mut self, u: &ControlVector, z: &DVector<f64>) -> Result<()> {
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("observation has non-finite entries"));
        }
        self.group_mut(u, z.len())?.push(z);
        Ok(())
    }

    pub fn extend<'a, I>(&mut self, u: &ControlVector, zs: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a DVector<f64>>,
    {
        for z in zs {
            self.push(u, z)?;
        }
        Ok(())
    }

    /// Adds a group known only through its mean and count. The scatter is
    /// unknown and taken as zero, which shifts the log-likelihood by an
    /// atom-independent constant when the noise does not depend on the
    /// parameter.
    pub fn push_group_mean(&mut self, u: &ControlVector, mean: DVector<f64>, count: usize) -> Result<()> {
        if count == 0 {
            return Err(Error::invalid("group count must be positive"));
        }
        if self.groups.iter().any(|g| g.control == *u) {
            return Err(Error::invalid("control already has a group"));
        }
        let k = mean.len();
        self.groups.push(ObservationGroup {
            control: u.clone(),
            count,
            mean,
            scatter: DMatrix::zeros(k, k),
        });
        Ok(())
    }

    pub fn groups(&self) -> &[ObservationGroup] {
        &self.groups
    }

    pub fn total_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Noise quantities for one group that do not depend on the atom.
struct GroupNoise {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    mean: DVector<f64>,
    log_det: f64,
    scatter_term: f64,
}

fn group_noise(
    sys: &dyn MeasurementSystem,
    group: &ObservationGroup,
    p: &ParameterVector,
) -> Result<GroupNoise> {
    let noise = sys.noise(&group.control, p)?;
    Error::check_dim("noise", group.mean.len(), noise.dim())?;
    let chol = noise
        .covariance()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("noise covariance is singular".into()))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let scatter_term = chol.solve(&group.scatter).trace();
    Ok(GroupNoise {
        chol,
        mean: noise.mean().clone(),
        log_det,
        scatter_term,
    })
}

fn group_log_likelihood(
    sys: &dyn MeasurementSystem,
    group: &ObservationGroup,
    atom: &ParameterVector,
    noise: &GroupNoise,
) -> Result<f64> {
    let predicted = transfer(sys, &group.control, atom)? + &noise.mean;
    Error::check_dim("observation", predicted.len(), group.mean.len())?;
    let resid = &group.mean - predicted;
    let quad = resid.dot(&noise.chol.solve(&resid));
    let n = group.count as f64;
    let k = resid.len() as f64;
    Ok(-0.5 * (n * k * LN_2PI + n * noise.log_det + noise.scatter_term + n * quad))
}

/// Log-density of every observation in `summary` given parameter `atom`.
/// Equal to the sum of per-sample Gaussian log-densities.
pub fn log_likelihood(
    sys: &dyn MeasurementSystem,
    atom: &ParameterVector,
    summary: &SufficientSummary,
) -> Result<f64> {
    summary.groups.iter().try_fold(0.0, |acc, g| {
        let noise = group_noise(sys, g, atom)?;
        Ok(acc + group_log_likelihood(sys, g, atom, &noise)?)
    })
}

/// Bayes update of a grid prior, computed in log-space.
pub fn posterior(prior: &GridPrior, sys: &dyn MeasurementSystem, summary: &SufficientSummary) -> Result<GridPrior> {
    Error::check_dim("grid", sys.param_dim(), prior.dim())?;
    if summary.is_empty() {
        return Ok(prior.clone());
    }
    let shared: Option<Vec<GroupNoise>> = if sys.noise_depends_on_parameter() {
        None
    } else {
        let anchor = prior.atom(0);
        Some(
            summary
                .groups
                .iter()
                .map(|g| group_noise(sys, g, &anchor))
                .collect::<Result<_>>()?,
        )
    };
    let mut log_post = Vec::with_capacity(prior.len());
    for i in 0..prior.len() {
        let lp = prior.log_masses[i];
        if lp == f64::NEG_INFINITY {
            log_post.push(lp);
            continue;
        }
        let atom = prior.atom(i);
        let ll = match &shared {
            Some(noises) => summary
                .groups
                .iter()
                .zip(noises)
                .try_fold(0.0, |acc, (g, nz)| Ok::<_, Error>(acc + group_log_likelihood(sys, g, &atom, nz)?))?,
            None => log_likelihood(sys, &atom, summary)?,
        };
        log_post.push(lp + ll);
    }
    prior.with_log_masses(log_post)
}

/// Mass-weighted atom average.
pub fn posterior_mean(post: &GridPrior) -> ParameterVector {
    let mut acc = DVector::zeros(post.dim());
    for i in 0..post.len() {
        acc += post.atom_coords(i) * post.mass(i);
    }
    ParameterVector::from_vector(acc).expect("finite atoms give a finite mean")
}

/// Mass of atoms outside the closed box `estimate ± tolerance`.
pub fn posterior_tolerance_risk(post: &GridPrior, estimate: &ParameterVector, tolerance: &DVector<f64>) -> Result<f64> {
    Error::check_dim("estimate", post.dim(), estimate.len())?;
    Error::check_dim("tolerance", post.dim(), tolerance.len())?;
    if tolerance.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut risk = 0.0;
    for i in 0..post.len() {
        let atom = post.atom_coords(i);
        let outside = (0..post.dim()).any(|d| (atom[d] - estimate[d]).abs() > tolerance[d]);
        if outside {
            risk += post.mass(i);
        }
    }
    Ok(risk.clamp(0.0, 1.0))
}

/// Per-coordinate posterior mean squared deviation from `estimate`.
pub fn posterior_mse(post: &GridPrior, estimate: &ParameterVector) -> Result<DVector<f64>> {
    Error::check_dim("estimate", post.dim(), estimate.len())?;
    let mut acc = DVector::zeros(post.dim());
    for i in 0..post.len() {
        let diff = post.atom_coords(i) - estimate.as_vector();
        acc += diff.component_mul(&diff) * post.mass(i);
    }
    Ok(acc)
}

/// Index of the highest-mass atom; ties go to the lowest index.
pub fn map_index(post: &GridPrior) -> usize {
    let mut best = 0;
    for (i, lm) in post.log_masses.iter().enumerate() {
        if *lm > post.log_masses[best] {
            best = i;
        }
    }
    best
}

/// Whether one atom carries at least `threshold` of the mass.
pub fn is_quantized(post: &GridPrior, threshold: f64) -> Result<bool> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(Error::invalid("quantization threshold must lie in (0.5, 1]"));
    }
    Ok(post.mass(map_index(post)) >= threshold)
}

/// Atom closest to `p` (per-axis nearest value); ties go to the lower value.
pub fn nearest_atom(grid: &GridPrior, p: &DVector<f64>) -> Result<usize> {
    Error::check_dim("point", grid.dim(), p.len())?;
    let multi: Vec<usize> = grid
        .axes
        .iter()
        .enumerate()
        .map(|(d, axis)| {
            let mut best = 0;
            for (i, x) in axis.iter().enumerate() {
                if (x - p[d]).abs() < (axis[best] - p[d]).abs() {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(grid.flat_index(&multi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianNoiseSpec, SinSystem};

    fn unit_box() -> ParameterBox {
        ParameterBox::new(vec![-1.0], vec![1.0]).unwrap()
    }

    fn scalar_summary(zbar: f64, n: usize) -> SufficientSummary {
        let mut s = SufficientSummary::new();
        s.push_group_mean(&ControlVector::empty(), DVector::from_element(1, zbar), n).unwrap();
        s
    }

    #[test]
    fn uniform_grid_examples() {
        let g = uniform_grid(&unit_box(), 5).unwrap();
        assert_eq!(g.axes()[0], vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(g.masses().iter().all(|m| (m - 0.2).abs() < 1e-15));
        let point = uniform_grid(&ParameterBox::new(vec![0.0], vec![0.0]).unwrap(), 5).unwrap();
        assert_eq!(point.len(), 1);
        assert!((point.mass(0) - 1.0).abs() < 1e-15);
        let square = uniform_grid(&ParameterBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(), 3).unwrap();
        assert_eq!(square.len(), 9);
        assert!((square.mass(4) - 1.0 / 9.0).abs() < 1e-15);
        assert!(uniform_grid(&unit_box(), 1).is_err());
    }

    #[test]
    fn cell_masses_taper_at_faces() {
        let g = grid_prior(&unit_box(), 5, MassRule::Cell).unwrap();
        let expect = [1.0, 2.0, 2.0, 2.0, 1.0].map(|x| x / 8.0);
        for (m, e) in g.masses().iter().zip(expect) {
            assert!((m - e).abs() < 1e-15);
        }
    }

    #[test]
    fn index_round_trip() {
        let g = uniform_grid(&ParameterBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]).unwrap(), 3).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
        assert_eq!(g.atom_coords(1).as_slice(), &[0.0, 0.0, 1.5]);
    }

    #[test]
    fn log_likelihood_gap_is_half_n_residual_squared() {
        let sys = SinSystem::new(10.0, 1.0).unwrap();
        // Atom with H = 0 and atom with H = 1 against zbar = 1, n = 4.
        let s = scalar_summary(1.0, 4);
        let zero = log_likelihood(&sys, &ParameterVector::scalar(0.0).unwrap(), &s).unwrap();
        let exact = log_likelihood(&sys, &ParameterVector::scalar((0.1f64).asin()).unwrap(), &s).unwrap();
        assert!((zero - exact + 2.0).abs() < 1e-12);
    }

    #[test]
    fn sufficient_statistics_equal_per_sample_product() {
        let sys = SinSystem::new(10.0, 0.7).unwrap();
        let zs = [0.4, -1.3, 2.2, 0.05, 1.7, -0.6];
        let mut s = SufficientSummary::new();
        for z in zs {
            s.push(&ControlVector::empty(), &DVector::from_element(1, z)).unwrap();
        }
        let p = 0.13f64;
        let h = 10.0 * p.sin();
        let direct: f64 = zs
            .iter()
            .map(|z| -0.5 * ((2.0 * std::f64::consts::PI * 0.7).ln() + (z - h).powi(2) / 0.7))
            .sum();
        let ll = log_likelihood(&sys, &ParameterVector::scalar(p).unwrap(), &s).unwrap();
        assert!((ll - direct).abs() < 1e-9);
    }

    #[test]
    fn empty_or_flat_data_leaves_prior() {
        let prior = grid_prior(&unit_box(), 5, MassRule::Cell).unwrap();
        let sys = SinSystem::new(10.0, 1.0).unwrap();
        assert_eq!(posterior(&prior, &sys, &SufficientSummary::new()).unwrap(), prior);
        let flat = SinSystem::new(0.0, 1.0).unwrap();
        let post = posterior(&prior, &flat, &scalar_summary(3.0, 10)).unwrap();
        for (a, b) in post.masses().iter().zip(prior.masses()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_noise_is_a_model_error() {
        let sys = SinSystem::new(10.0, 0.0).unwrap();
        let prior = uniform_grid(&unit_box(), 3).unwrap();
        assert!(matches!(posterior(&prior, &sys, &scalar_summary(0.0, 1)), Err(Error::Model(_))));
    }

    #[test]
    fn mean_risk_and_mse_examples() {
        let g = uniform_grid(&unit_box(), 5).unwrap();
        assert!(posterior_mean(&g)[0].abs() < 1e-15);
        let origin = ParameterVector::scalar(0.0).unwrap();
        let risk = posterior_tolerance_risk(&g, &origin, &DVector::from_element(1, 0.6)).unwrap();
        assert!((risk - 0.4).abs() < 1e-15);
        assert_eq!(posterior_tolerance_risk(&g, &origin, &DVector::from_element(1, 5.0)).unwrap(), 0.0);
        let two = GridPrior::new(vec![vec![-1.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert!((posterior_mse(&two, &origin).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_cases() {
        let g = GridPrior::new(vec![vec![-1.0, 0.0, 1.0]], vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]).unwrap();
        let at = posterior_mean(&g);
        assert_eq!(at[0], 0.0);
        assert_eq!(posterior_mse(&g, &at).unwrap()[0], 0.0);
        assert_eq!(posterior_tolerance_risk(&g, &at, &DVector::from_element(1, 1e-3)).unwrap(), 0.0);
        assert!(is_quantized(&g, 0.99).unwrap());
        let u = uniform_grid(&unit_box(), 5).unwrap();
        assert!(!is_quantized(&u, DEFAULT_QUANTIZATION_THRESHOLD).unwrap());
        assert!(is_quantized(&u, 0.5).is_err());
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let g = GridPrior::new(vec![vec![0.0, 1.0, 2.0]], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(map_index(&g), 1);
        let grid = uniform_grid(&unit_box(), 5).unwrap();
        assert_eq!(nearest_atom(&grid, &DVector::from_element(1, 0.25)).unwrap(), 2);
    }

    #[test]
    fn parameter_dependent_noise_uses_atom_covariance() {
        struct Heteroscedastic;
        impl MeasurementSystem for Heteroscedastic {
            fn param_dim(&self) -> usize { 1 }
            fn control_dim(&self) -> usize { 0 }
            fn obs_dim(&self, _: &ControlVector) -> usize { 1 }
            fn evaluate(&self, _: &ControlVector, p: &ParameterVector) -> Result<DVector<f64>> {
                Ok(DVector::from_element(1, p[0]))
            }
            fn jacobian(&self, _: &ControlVector, _: &ParameterVector) -> Result<DMatrix<f64>> {
                Ok(DMatrix::from_element(1, 1, 1.0))
            }
            fn noise(&self, _: &ControlVector, p: &ParameterVector) -> Result<GaussianNoiseSpec> {
                GaussianNoiseSpec::isotropic(1, 0.5 + p[0] * p[0])
            }
            fn noise_depends_on_parameter(&self) -> bool { true }
        }
        let zs = [0.3, 1.1, -0.4];
        let mut s = SufficientSummary::new();
        for z in zs {
            s.push(&ControlVector::empty(), &DVector::from_element(1, z)).unwrap();
        }
        let prior = uniform_grid(&unit_box(), 5).unwrap();
        let post = posterior(&prior, &Heteroscedastic, &s).unwrap();
        let direct: Vec<f64> = prior.axes()[0]
            .iter()
            .map(|p| {
                let v = 0.5 + p * p;
                zs.iter().map(|z| (-(z - p) * (z - p) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()).product()
            })
            .collect();
        let total: f64 = direct.iter().sum();
        for (m, d) in post.masses().iter().zip(&direct) {
            assert!((m - d / total).abs() < 1e-12);
        }
    }
}
