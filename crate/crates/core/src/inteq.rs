//! The integral equation for `φ` behind the SMLE's asymptotic variance,
//! discretised by the midpoint rule on an `m`-point grid.
//!
//! With `d_F = F(1-F)/(h₁(1-F) + h₂F)` and `k_{t,b}(u) = K((t-u)/b)/b`,
//! `φ` solves
//!
//! ```text
//! φ(u) + d_F(u) ∫ (φ(u) - φ(v)) h(u∧v, u∨v) / |F(v) - F(u)| dv = d_F(u) k_{t,b}(u),
//! ```
//!
//! and `E θ² = ∫φ²h₁/F + ∬_{u<v}(φ(v)-φ(u))²h/(F(v)-F(u)) + ∫φ²h₂/(1-F)` is the
//! approximation of `n·var F̃ₙ(t)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CensoredObservation, Dataset, ObservationScheme, Position, TargetDistribution};
use crate::npmle::npmle_icm;
use crate::smle::{kernel, SmleConfig, SmoothedMle};

pub const DEFAULT_GRID: usize = 1000;
pub const MIN_GRID: usize = 100;
const F_CLIP: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-10;

fn check_grid(m: usize) -> Result<()> {
    if m < MIN_GRID {
        return Err(Error::arg(format!("grid size m = {m} must be at least {MIN_GRID}")));
    }
    Ok(())
}

fn midpoint(i: usize, m: usize) -> f64 {
    (i as f64 + 0.5) / m as f64
}

/// Values on the midpoints `(i + ½)/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_grid(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("grid function has non-finite values"));
        }
        Ok(GridFunction { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.len();
        (0..m).map(move |i| midpoint(i, m))
    }

    /// Linear interpolation, constant beyond the outer midpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.len();
        let pos = x * m as f64 - 0.5;
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= (m - 1) as f64 {
            return self.values[m - 1];
        }
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}

/// Observation density on the grid: `h(u_i, u_j)` for `i ≠ j` (symmetrised,
/// zero diagonal) and the marginals `h₁`, `h₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    m: usize,
    h: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl GridDensity {
    pub fn from_scheme(scheme: ObservationScheme, m: usize) -> Result<Self> {
        check_grid(m)?;
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let v = scheme.density(midpoint(i, m), midpoint(j, m));
                h[i * m + j] = v;
                h[j * m + i] = v;
            }
        }
        let h1 = (0..m).map(|i| scheme.g1(midpoint(i, m))).collect();
        let h2 = (0..m).map(|i| scheme.g2(midpoint(i, m))).collect();
        Ok(GridDensity { m, h, h1, h2 })
    }

    /// From upper-triangular values `upper[i*m + j]`, `i < j`; marginals by row
    /// and column sums.
    fn from_upper(m: usize, upper: &[f64]) -> Self {
        let dx = 1.0 / m as f64;
        let mut h = vec![0.0; m * m];
        let mut h1 = vec![0.0; m];
        let mut h2 = vec![0.0; m];
        for i in 0..m {
            for j in i + 1..m {
                let v = upper[i * m + j];
                h[i * m + j] = v;
                h[j * m + i] = v;
                h1[i] += v * dx;
                h2[j] += v * dx;
            }
        }
        GridDensity { m, h, h1, h2 }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.m + j]
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    pub fn h2(&self) -> &[f64] {
        &self.h2
    }

    /// `∬_{u<v} h` by the midpoint rule.
    pub fn total_mass(&self) -> f64 {
        let dx = 1.0 / self.m as f64;
        self.h1.iter().sum::<f64>() * dx
    }
}

/// `F` and `h` on a common grid; everything in the equation except the forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    f: Vec<f64>,
    density: GridDensity,
}

impl GridModel {
    /// `F` is clipped to `[1e-6, 1-1e-6]`.
    pub fn new(f: Vec<f64>, density: GridDensity) -> Result<Self> {
        if f.len() != density.len() {
            return Err(Error::arg("F and h must share the grid"));
        }
        check_grid(f.len())?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("F must be finite on the grid"));
        }
        let f = f.into_iter().map(|v| v.clamp(F_CLIP, 1.0 - F_CLIP)).collect();
        Ok(GridModel { f, density })
    }

    /// The true model: `F0` and the scheme's density.
    pub fn exact(target: TargetDistribution, scheme: ObservationScheme, m: usize) -> Result<Self> {
        target.validate()?;
        let f = (0..m).map(|i| target.cdf(midpoint(i, m))).collect();
        GridModel::new(f, GridDensity::from_scheme(scheme, m)?)
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    /// `d_F`; zero where `h₁(1-F) + h₂F` vanishes.
    pub fn d(&self) -> Vec<f64> {
        let (h1, h2) = (self.density.h1(), self.density.h2());
        self.f
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let den = h1[i] * (1.0 - f) + h2[i] * f;
                if den > 0.0 {
                    f * (1.0 - f) / den
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `a_ij = h(u_i ∧ u_j, u_i ∨ u_j) Δ / |F_j - F_i|`, zero on the diagonal
    /// and wherever `F` is flat.
    fn a(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let h = self.density.h(i, j);
        let df = (self.f[j] - self.f[i]).abs();
        if h == 0.0 || df == 0.0 {
            0.0
        } else {
            h / (df * self.len() as f64)
        }
    }
}

/// One instance of the equation: a model plus the point `t` and bandwidth `b`.
#[derive(Debug, Clone, Copy)]
pub struct PhiProblem<'a> {
    pub model: &'a GridModel,
    pub t: f64,
    pub b: f64,
}

impl<'a> PhiProblem<'a> {
    pub fn new(model: &'a GridModel, t: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("t = {t} must lie in [0,1]")));
        }
        if !(b > 0.0) {
            return Err(Error::arg(format!("bandwidth {b} must be positive")));
        }
        Ok(PhiProblem { model, t, b })
    }

    /// `k_{t,b}` on the grid.
    pub fn forcing(&self) -> Vec<f64> {
        let m = self.model.len();
        (0..m).map(|i| kernel((self.t - midpoint(i, m)) / self.b) / self.b).collect()
    }
}

/// Factorised discrete system; the matrix does not depend on `(t, b)`, so one
/// factorisation serves every evaluation point.
pub struct PhiSolver<'a> {
    model: &'a GridModel,
    matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    d: Vec<f64>,
}

impl<'a> PhiSolver<'a> {
    pub fn new(model: &'a GridModel) -> Result<Self> {
        let m = model.len();
        let d = model.d();
        let mut matrix = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                let a = model.a(i, j);
                if a != 0.0 {
                    matrix[(i, j)] = -d[i] * a;
                    row += a;
                }
            }
            matrix[(i, i)] = 1.0 + d[i] * row;
        }
        let lu = matrix.clone().lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        if !(lo > 0.0) || !(hi / lo < 1e14) {
            return Err(Error::numeric(format!(
                "integral-equation system is singular (pivot ratio estimate {:e})",
                hi / lo
            )));
        }
        Ok(PhiSolver { model, matrix, lu, d })
    }

    pub fn solve(&self, t: f64, b: f64) -> Result<GridFunction> {
        let problem = PhiProblem::new(self.model, t, b)?;
        let rhs = DVector::from_iterator(self.d.len(), problem.forcing().iter().zip(&self.d).map(|(k, d)| k * d));
        let phi = self.lu.solve(&rhs).ok_or_else(|| Error::numeric("integral-equation system is singular"))?;
        let residual = (&self.matrix * &phi - &rhs).norm();
        if residual > RESIDUAL_TOL * rhs.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::numeric(format!(
                "integral-equation residual {residual:e} exceeds {RESIDUAL_TOL:e} relative"
            )));
        }
        GridFunction::new(phi.iter().copied().collect())
    }
}

/// Solves the discretised equation for one `(t, b)`.
pub fn solve_phi(problem: &PhiProblem) -> Result<GridFunction> {
    PhiSolver::new(problem.model)?.solve(problem.t, problem.b)
}

/// `E θ²` for a solution `φ` of `problem`.
pub fn theta_variance(phi: &GridFunction, problem: &PhiProblem) -> f64 {
    theta_variance_on(phi, problem.model)
}

fn theta_variance_on(phi: &GridFunction, model: &GridModel) -> f64 {
    let m = model.len();
    let dx = 1.0 / m as f64;
    let (p, f) = (phi.values(), model.f());
    let (h1, h2) = (model.density.h1(), model.density.h2());
    let mut left = 0.0;
    let mut right = 0.0;
    let mut pairs = 0.0;
    for i in 0..m {
        left += p[i] * p[i] * h1[i] / f[i];
        right += p[i] * p[i] * h2[i] / (1.0 - f[i]);
        for j in i + 1..m {
            let h = model.density.h(i, j);
            let df = f[j] - f[i];
            if h > 0.0 && df != 0.0 {
                let dp = p[j] - p[i];
                pairs += dp * dp * h / df.abs();
            }
        }
    }
    (left + right) * dx + pairs * dx * dx
}

/// Product-triweight kernel estimate of the observation density, restricted to
/// `{0 ≤ t < u ≤ 1}` and renormalised there. Observations are reflected in the
/// three edges of the triangle to limit boundary loss.
#[derive(Debug, Clone)]
pub struct KernelDensity2d {
    points: Vec<(f64, f64)>,
    n: usize,
    bandwidth: f64,
    grid: GridDensity,
    scale: f64,
}

const KDE_CHUNK: usize = 2048;

impl KernelDensity2d {
    pub fn new(observations: &[CensoredObservation], bandwidth: f64, m: usize) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::arg("kernel density needs at least one observation"));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::arg(format!("bandwidth {bandwidth} must be positive")));
        }
        check_grid(m)?;
        let points: Vec<(f64, f64)> = observations
            .iter()
            .flat_map(|o| [(o.t, o.u), (o.u, o.t), (-o.t, o.u), (o.t, 2.0 - o.u)])
            .collect();
        let n = observations.len();
        let raw = Self::raw_grid(&points, bandwidth, m);
        let scale = 1.0 / (n as f64 * bandwidth * bandwidth);
        let mut upper = vec![0.0; m * m];
        let mut mass = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let v = raw[(i, j)] * scale;
                upper[i * m + j] = v;
                mass += v;
            }
        }
        mass /= (m * m) as f64;
        if !(mass > 0.0) {
            return Err(Error::numeric("kernel density has no mass on the grid"));
        }
        upper.iter_mut().for_each(|v| *v /= mass);
        Ok(KernelDensity2d { points, n, bandwidth, grid: GridDensity::from_upper(m, &upper), scale: scale / mass })
    }

    /// `Σ_p K((u_i - t_p)/b) K((u_j - u_p)/b)`, accumulated in chunks.
    fn raw_grid(points: &[(f64, f64)], bw: f64, m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(m, m);
        for chunk in points.chunks(KDE_CHUNK) {
            let a = DMatrix::from_fn(chunk.len(), m, |r, i| kernel((midpoint(i, m) - chunk[r].0) / bw));
            let c = DMatrix::from_fn(chunk.len(), m, |r, j| kernel((midpoint(j, m) - chunk[r].1) / bw));
            out += a.tr_mul(&c);
        }
        out
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        if !(0.0 <= t && t < u && u <= 1.0) {
            return 0.0;
        }
        let b = self.bandwidth;
        self.points.iter().map(|&(a, c)| kernel((t - a) / b) * kernel((u - c) / b)).sum::<f64>() * self.scale
    }

    pub fn grid(&self) -> &GridDensity {
        &self.grid
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }
}

pub fn kernel_density_2d(dataset: &Dataset, bandwidth: f64, m: usize) -> Result<KernelDensity2d> {
    if dataset.len() < 20 {
        return Err(Error::arg(format!("kernel density needs n >= 20 (n = {})", dataset.len())));
    }
    KernelDensity2d::new(&dataset.observations, bandwidth, m)
}

/// Plug-in estimate of `n·var F̃ₙ(t)`: the equation is solved with the SMLE
/// and a kernel estimate of `h`, and `θ̃²` is averaged over the sample.
pub fn plugin_variance(dataset: &Dataset, t: f64, b: f64, m: usize) -> Result<f64> {
    let config = SmleConfig::new(b)?;
    let mle = npmle_icm(dataset, 1e-8, 5000)?;
    let smle = SmoothedMle::new(&mle.estimate, config);
    plugin_variance_with(&dataset.observations, &smle, t, m)
}

pub fn plugin_variance_with(observations: &[CensoredObservation], smle: &SmoothedMle, t: f64, m: usize) -> Result<f64> {
    check_grid(m)?;
    let b = smle.config().bandwidth();
    let f: Vec<f64> = (0..m).map(|i| smle.eval(midpoint(i, m))).collect();
    for i in 0..m - 1 {
        let (x, y) = (midpoint(i, m), midpoint(i + 1, m));
        if x >= b && y <= 1.0 - b && !(f[i + 1] > f[i]) {
            return Err(Error::DegenerateEstimate(format!(
                "SMLE is not strictly increasing on [{b}, {}] (flat between {x} and {y})",
                1.0 - b
            )));
        }
    }
    let kde = KernelDensity2d::new(observations, b, m)?;
    let model = GridModel::new(f, kde.grid().clone())?;
    let phi = PhiSolver::new(&model)?.solve(t, b)?;
    let cdf = |x: f64| smle.eval(x).clamp(F_CLIP, 1.0 - F_CLIP);
    let total: f64 = observations
        .iter()
        .map(|o| {
            let theta = match o.delta {
                Position::Left => -phi.eval(o.t) / cdf(o.t),
                Position::Interval => {
                    let df = cdf(o.u) - cdf(o.t);
                    if df > 0.0 {
                        (phi.eval(o.u) - phi.eval(o.t)) / df
                    } else {
                        0.0
                    }
                }
                Position::Right => phi.eval(o.u) / (1.0 - cdf(o.u)),
            };
            theta * theta
        })
        .sum();
    Ok(total / observations.len() as f64)
}

/// Current-status analogue `F(t)(1-F(t)) ∫K² / (b g(t))`.
pub fn cs_smle_variance(t: f64, b: f64, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::arg(format!("bandwidth {b} must be positive")));
    }
    let gt = g(t);
    if !(gt > 0.0) {
        return Err(Error::domain(format!("observation density g({t}) = {gt} must be positive")));
    }
    let ft = f(t);
    Ok(ft * (1.0 - ft) * crate::smle::Kernel::Triweight.square_integral() / (b * gt))
}

/// `E θ²` for the true model at each `t`, sharing one factorisation.
pub fn theoretical_variances(
    target: TargetDistribution,
    scheme: ObservationScheme,
    ts: &[f64],
    b: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let model = GridModel::exact(target, scheme, m)?;
    let solver = PhiSolver::new(&model)?;
    ts.iter().map(|&t| Ok(theta_variance_on(&solver.solve(t, b)?, &model))).collect()
}
