//! Discretized linearization game.
//!
//! A scalar gain `a` is played against the unknown linearization error. For
//! each prior atom with deviation `δ_j` from the linearization point, nature
//! picks a value `g_j` for the observed signal between the two extreme
//! slopes on the segment joining the atom and the linearization point. The
//! payoff is the mean squared error
//!
//! `K(a, g) = Σ_j π_j [(a g_j − δ_j)² + a² σ²]`,
//!
//! convex in `a` and in each `g_j`, so nature's best responses sit on
//! vertices and an optimal mixed strategy needs at most two of them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream_rng};
use crate::stats::{gauss_hermite, RunningMoments};

/// Exhaustive vertex enumeration is allowed up to this many atoms.
pub const ENUMERATION_LIMIT: usize = 12;
/// Relative duality-gap tolerance for declaring the optimum randomized.
pub const RANDOMIZATION_TOL: f64 = 1e-6;
const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_BRACKET_EXPANSIONS: usize = 60;
const MAX_SEARCH_ITERS: usize = 400;

/// How nature's choices are tied across atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// One slope shared by every atom (a linear system with unknown gain).
    Shared,
    /// Each atom picks its own slope.
    PerAtom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    deviations: Vec<f64>,
    masses: Vec<f64>,
    slope_ranges: Vec<(f64, f64)>,
    coupling: Coupling,
    noise_var: f64,
    nominal_slope: f64,
    gain_interval: Option<(f64, f64)>,
}

/// Nature's choice: the signal value at every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct GVector(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub gain: f64,
    /// Nature's optimal mixture, at most two vertices.
    pub mixture: Vec<(GVector, f64)>,
    /// `min_a max_g K(a, g)`.
    pub value: f64,
    /// Best value nature guarantees with a two-vertex mixture.
    pub mixed_lower: f64,
    /// Best value nature guarantees with a single vertex.
    pub pure_lower: f64,
    pub randomized: bool,
}

impl GameSpec {
    /// Linear observation `z = h θ + v` with `h` anywhere in
    /// `[slope_lo, slope_hi]`, zero-mean Gaussian prior of variance
    /// `prior_var` discretized by a Gauss-Hermite rule with `atoms` nodes.
    pub fn linear(slope_lo: f64, slope_hi: f64, noise_var: f64, prior_var: f64, atoms: usize) -> Result<Self> {
        if !(slope_lo <= slope_hi) || !slope_lo.is_finite() || !slope_hi.is_finite() {
            return Err(Error::invalid("slope interval must be finite and ordered"));
        }
        if !(prior_var > 0.0) {
            return Err(Error::invalid("prior variance must be positive"));
        }
        if atoms == 0 {
            return Err(Error::invalid("need at least one atom"));
        }
        let (nodes, weights) = gauss_hermite(atoms);
        let sd = prior_var.sqrt();
        let spec = Self {
            deviations: nodes.iter().map(|x| x * sd).collect(),
            masses: weights,
            slope_ranges: vec![(slope_lo, slope_hi); atoms],
            coupling: Coupling::Shared,
            noise_var,
            nominal_slope: 0.5 * (slope_lo + slope_hi),
            gain_interval: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Game for linearizing a scalar transfer function at `center`. Each
    /// atom's slope range is the extreme derivative on `[atom, center]`:
    /// the endpoint values when the derivative is monotone there, otherwise
    /// the extremes of 101 evenly spaced samples.
    pub fn linearized(
        atoms: &[f64],
        masses: &[f64],
        center: f64,
        derivative: &dyn Fn(f64) -> f64,
        monotone_derivative: bool,
        noise_var: f64,
    ) -> Result<Self> {
        Error::check_dim("atom masses", atoms.len(), masses.len())?;
        if atoms.is_empty() {
            return Err(Error::invalid("need at least one atom"));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|m| !(*m >= 0.0)) || !(total > 0.0) {
            return Err(Error::invalid("masses must be non-negative with positive total"));
        }
        let slope_ranges = atoms
            .iter()
            .map(|&x| {
                let samples: Vec<f64> = if monotone_derivative {
                    vec![derivative(x), derivative(center)]
                } else {
                    (0..=100).map(|i| derivative(x + (center - x) * i as f64 / 100.0)).collect()
                };
                let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        let spec = Self {
            deviations: atoms.iter().map(|x| x - center).collect(),
            masses: masses.iter().map(|m| m / total).collect(),
            slope_ranges,
            coupling: Coupling::PerAtom,
            noise_var,
            nominal_slope: derivative(center),
            gain_interval: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fixes the initial gain bracket (it still expands if the minimiser
    /// lands on its boundary).
    pub fn with_gain_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("gain interval must be bounded and non-empty"));
        }
        self.gain_interval = Some((lo, hi));
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(Error::invalid("noise variance must be positive"));
        }
        if self.deviations.iter().chain(&self.masses).any(|x| !x.is_finite()) {
            return Err(Error::invalid("atoms and masses must be finite"));
        }
        if self.slope_ranges.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid("slope ranges must be finite and ordered"));
        }
        Ok(())
    }

    pub fn atoms(&self) -> usize {
        self.deviations.len()
    }

    pub fn deviations(&self) -> &[f64] {
        &self.deviations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Feasible interval for `g_j`.
    pub fn feasible(&self, j: usize) -> (f64, f64) {
        let (lo, hi) = self.slope_ranges[j];
        let a = lo * self.deviations[j];
        let b = hi * self.deviations[j];
        (a.min(b), a.max(b))
    }

    /// Vertex with `upper[j]` choosing the high slope at atom `j`.
    fn vertex(&self, upper: &[bool]) -> GVector {
        GVector(
            (0..self.atoms())
                .map(|j| {
                    let (lo, hi) = self.slope_ranges[j];
                    (if upper[j] { hi } else { lo }) * self.deviations[j]
                })
                .collect(),
        )
    }

    /// Vertices of nature's strategy set: two for shared coupling, `2^n`
    /// otherwise.
    pub fn vertices(&self) -> Result<Vec<GVector>> {
        match self.coupling {
            Coupling::Shared => Ok(vec![self.vertex(&vec![false; self.atoms()]), self.vertex(&vec![true; self.atoms()])]),
            Coupling::PerAtom => {
                let n = self.atoms();
                if n > ENUMERATION_LIMIT {
                    return Err(Error::Capacity { atoms: n, limit: ENUMERATION_LIMIT });
                }
                Ok((0..1usize << n)
                    .map(|mask| self.vertex(&(0..n).map(|j| mask >> j & 1 == 1).collect::<Vec<_>>()))
                    .collect())
            }
        }
    }

    fn check_feasible(&self, g: &GVector) -> Result<()> {
        Error::check_dim("strategy", self.atoms(), g.0.len())?;
        for (j, v) in g.0.iter().enumerate() {
            let (lo, hi) = self.feasible(j);
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if *v < lo - slack || *v > hi + slack {
                return Err(Error::invalid(format!("strategy value at atom {j} is infeasible")));
            }
        }
        Ok(())
    }

    /// Coefficients of `K(a, g) = A a² − 2 B a + C`.
    fn quadratic(&self, g: &GVector) -> (f64, f64, f64) {
        let mut a = self.noise_var;
        let mut b = 0.0;
        let mut c = 0.0;
        for ((gj, dj), pj) in g.0.iter().zip(&self.deviations).zip(&self.masses) {
            a += pj * gj * gj;
            b += pj * gj * dj;
            c += pj * dj * dj;
        }
        (a, b, c)
    }

    /// Bayes gain against a fixed strategy and its risk.
    pub fn best_gain(&self, g: &GVector) -> (f64, f64) {
        let (a, b, c) = self.quadratic(g);
        (b / a, c - b * b / a)
    }

    fn nominal_gain(&self) -> f64 {
        let g = GVector(self.deviations.iter().map(|d| self.nominal_slope * d).collect());
        self.best_gain(&g).0
    }
}

fn term(a: f64, g: f64, dev: f64) -> f64 {
    (a * g - dev).powi(2)
}

/// Expected squared error of gain `a` when nature plays `g`.
pub fn payoff(a: f64, g: &GVector, spec: &GameSpec) -> Result<f64> {
    spec.check_feasible(g)?;
    Ok(payoff_unchecked(a, g, spec))
}

fn payoff_unchecked(a: f64, g: &GVector, spec: &GameSpec) -> f64 {
    g.0.iter()
        .zip(&spec.deviations)
        .zip(&spec.masses)
        .map(|((gj, dj), pj)| pj * (term(a, *gj, *dj) + a * a * spec.noise_var))
        .sum()
}

/// Expected payoff of gain `a` against a mixture of strategies.
pub fn mixture_payoff(a: f64, mixture: &[(GVector, f64)], spec: &GameSpec) -> Result<f64> {
    let total: f64 = mixture.iter().map(|m| m.1).sum();
    if mixture.iter().any(|m| !(m.1 >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("mixture weights must be a probability vector"));
    }
    mixture.iter().try_fold(0.0, |acc, (g, w)| Ok(acc + w * payoff(a, g, spec)?))
}

/// Nature's best response to gain `a`. Ties go to the lower value.
pub fn inner_max(a: f64, spec: &GameSpec) -> (GVector, f64) {
    match spec.coupling {
        Coupling::Shared => {
            let lo = spec.vertex(&vec![false; spec.atoms()]);
            let hi = spec.vertex(&vec![true; spec.atoms()]);
            let (vlo, vhi) = (payoff_unchecked(a, &lo, spec), payoff_unchecked(a, &hi, spec));
            if vhi > vlo {
                (hi, vhi)
            } else {
                (lo, vlo)
            }
        }
        Coupling::PerAtom => {
            let g: Vec<f64> = (0..spec.atoms())
                .map(|j| {
                    let (lo, hi) = spec.feasible(j);
                    let d = spec.deviations[j];
                    if term(a, hi, d) > term(a, lo, d) {
                        hi
                    } else {
                        lo
                    }
                })
                .collect();
            let g = GVector(g);
            let v = payoff_unchecked(a, &g, spec);
            (g, v)
        }
    }
}

fn upper_envelope(a: f64, spec: &GameSpec) -> f64 {
    inner_max(a, spec).1
}

/// Golden-section maximisation of a concave function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..MAX_SEARCH_ITERS {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    Err(Error::Numerical(format!("golden-section search stalled on [{lo:e}, {hi:e}]")))
}

/// Minimiser of the convex upper envelope, expanding the bracket as needed.
fn minimise_gain(spec: &GameSpec) -> Result<f64> {
    let (mut lo, mut hi) = spec.gain_interval.unwrap_or_else(|| {
        let a0 = spec.nominal_gain().abs();
        if a0 > 0.0 && a0.is_finite() {
            (-10.0 * a0, 10.0 * a0)
        } else {
            (-1.0, 1.0)
        }
    });
    for _ in 0..MAX_BRACKET_EXPANSIONS {
        let width = hi - lo;
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        let a = golden_max(|a| -upper_envelope(a, spec), lo, hi, tol)?;
        let margin = 1e-6 * width;
        if a - lo > margin && hi - a > margin {
            return Ok(a);
        }
        if a - lo <= margin {
            lo -= width;
        } else {
            hi += width;
        }
    }
    Err(Error::Numerical("gain minimiser escaped every bracket expansion".into()))
}

fn pure_lower(spec: &GameSpec, seeds: &[GVector]) -> Result<(GVector, f64)> {
    let risk = |g: &GVector| spec.best_gain(g).1;
    let candidates = match spec.vertices() {
        Ok(v) => v,
        Err(Error::Capacity { .. }) => {
            // Single-coordinate flip ascent from each best response.
            let mut found = Vec::new();
            for seed in seeds {
                let mut g = seed.clone();
                let mut current = risk(&g);
                loop {
                    let mut improved = false;
                    for j in 0..spec.atoms() {
                        let (lo, hi) = spec.feasible(j);
                        let mut trial = g.clone();
                        trial.0[j] = if g.0[j] == lo { hi } else { lo };
                        let r = risk(&trial);
                        if r > current {
                            g = trial;
                            current = r;
                            improved = true;
                        }
                    }
                    if !improved {
                        break;
                    }
                }
                found.push(g);
            }
            found
        }
        Err(e) => return Err(e),
    };
    let mut best = candidates[0].clone();
    let mut best_risk = risk(&best);
    for g in candidates.into_iter().skip(1) {
        let r = risk(&g);
        if r > best_risk {
            best_risk = r;
            best = g;
        }
    }
    Ok((best, best_risk))
}

/// Solves the game. The gain minimises the convex upper envelope; nature's
/// optimal mixture combines the best responses on either side of it. The
/// solution is randomized when no single vertex attains the value.
pub fn solve_saddle(spec: &GameSpec) -> Result<SaddleSolution> {
    spec.validate()?;
    let mut a_star = minimise_gain(spec)?;
    let step = 1e-7 * (1.0 + a_star.abs());
    let (left, _) = inner_max(a_star - step, spec);
    let (right, _) = inner_max(a_star + step, spec);
    if left == right {
        // Smooth minimum: the envelope is locally one quadratic, whose
        // minimiser is known in closed form and sharper than the search.
        let exact = spec.best_gain(&left).0;
        if inner_max(exact, spec).0 == left {
            a_star = exact;
        }
    }
    let value = upper_envelope(a_star, spec);

    let (ql, qr) = (spec.quadratic(&left), spec.quadratic(&right));
    let mixed = |lam: f64| {
        let a = lam * ql.0 + (1.0 - lam) * qr.0;
        let b = lam * ql.1 + (1.0 - lam) * qr.1;
        ql.2 - b * b / a
    };
    let lam = if left == right { 1.0 } else { golden_max(mixed, 0.0, 1.0, 1e-12)? };
    let mixed_lower = mixed(lam).max(mixed(0.0)).max(mixed(1.0));
    let lam = if mixed(lam) >= mixed_lower {
        lam
    } else if mixed(1.0) >= mixed(0.0) {
        1.0
    } else {
        0.0
    };

    let (pure_g, pure_value) = pure_lower(spec, &[left.clone(), right.clone()])?;
    if mixed_lower > value + 1e-9 * (1.0 + value.abs()) {
        return Err(Error::Numerical(format!(
            "weak duality violated: lower {mixed_lower:e} above upper {value:e}"
        )));
    }
    let randomized = value - pure_value > RANDOMIZATION_TOL * value.abs().max(1.0);

    let mixture = if randomized {
        [(left, lam), (right, 1.0 - lam)].into_iter().filter(|(_, w)| *w > 0.0).collect()
    } else {
        vec![(pure_g, 1.0)]
    };
    Ok(SaddleSolution { gain: a_star, mixture, value, mixed_lower, pure_lower: pure_value, randomized })
}

/// Prior variance at which the linear game's optimum becomes randomized,
/// located by bisection on the randomization flag to within 1e-4.
pub fn randomization_threshold(
    slope_lo: f64,
    slope_hi: f64,
    noise_var: f64,
    search: (f64, f64),
    atoms: usize,
) -> Result<f64> {
    let flag = |v: f64| -> Result<bool> { Ok(solve_saddle(&GameSpec::linear(slope_lo, slope_hi, noise_var, v, atoms)?)?.randomized) };
    let (mut lo, mut hi) = search;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::invalid("search range must satisfy 0 < lo < hi"));
    }
    if flag(lo)? || !flag(hi)? {
        return Err(Error::Range(format!("randomization does not switch on within [{lo}, {hi}]")));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if flag(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Predicted and simulated errors of the game filter and the filter that
/// assumes the lowest slope, at one prior variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTermRow {
    pub prior_var: f64,
    pub randomized: bool,
    pub game_gain: f64,
    pub game_predicted: f64,
    pub game_observed: f64,
    pub game_std_error: f64,
    pub lower_gain: f64,
    pub lower_predicted: f64,
    pub lower_observed: f64,
    pub lower_std_error: f64,
    pub trials: usize,
}

/// Sweeps the linear game over prior variances. For each point the
/// simulation draws `θ ~ N(0, prior_var)`, `h ~ U[slope_lo, slope_hi]` and
/// `v ~ N(0, noise_var)` per trial and scores both filters on the same draws.
pub fn error_term_comparison(
    slope_lo: f64,
    slope_hi: f64,
    noise_var: f64,
    prior_vars: &[f64],
    atoms: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ErrorTermRow>> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    prior_vars
        .iter()
        .enumerate()
        .map(|(k, &prior_var)| {
            let spec = GameSpec::linear(slope_lo, slope_hi, noise_var, prior_var, atoms)?;
            let solution = solve_saddle(&spec)?;
            let lower_gain = slope_lo * prior_var / (slope_lo * slope_lo * prior_var + noise_var);
            let lower_predicted = prior_var * (lower_gain * slope_lo - 1.0).powi(2) + lower_gain * lower_gain * noise_var;
            let mut game = RunningMoments::new();
            let mut lower = RunningMoments::new();
            for t in 0..trials {
                let mut rng = stream_rng(seed, t as u64, k as u64);
                let theta = prior_var.sqrt() * standard_normal(&mut rng);
                let h = if slope_hi > slope_lo { rng.random_range(slope_lo..slope_hi) } else { slope_lo };
                let z = h * theta + noise_var.sqrt() * standard_normal(&mut rng);
                game.push((solution.gain * z - theta).powi(2));
                lower.push((lower_gain * z - theta).powi(2));
            }
            Ok(ErrorTermRow {
                prior_var,
                randomized: solution.randomized,
                game_gain: solution.gain,
                game_predicted: solution.value,
                game_observed: game.mean(),
                game_std_error: game.std_error(),
                lower_gain,
                lower_predicted,
                lower_observed: lower.mean(),
                lower_std_error: lower.std_error(),
                trials,
            })
        })
        .collect()
}
