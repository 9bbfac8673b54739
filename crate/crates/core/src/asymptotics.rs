//! Asymptotic constants for the local estimators.
//!
//! Closed forms exist for the uniform observation schemes; every such
//! constant also has a quadrature path computed from the scheme's joint and
//! marginal densities, and the two are cross-checked in the tests.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ObservationScheme, TargetDistribution};
use crate::quad::{integrate, integrate_pieces, tanh_sinh_pieces};
use crate::rng::{derive_seed, stream};

/// `Var(2Z)` for `Z` the last maximiser of two-sided Brownian motion minus
/// `t²`, i.e. four times `Var Z = 0.26355964`. Reproduced by
/// [`chernoff_variance_mc`] up to Monte Carlo error.
pub const CHERNOFF_VAR_2Z: f64 = 1.054_238_56;

const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norming {
    /// `(n log n)^{1/3}`, Birgé and MLE under a non-separated scheme.
    NLogNCubeRoot,
    /// `n^{1/3}`, separated schemes.
    NCubeRoot,
    /// `n^{2/5}`, smoothed MLE.
    NTwoFifths,
}

impl Norming {
    /// Factor by which a mean squared error is multiplied.
    pub fn mse_factor(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Norming::NLogNCubeRoot => (n * n.ln()).powf(2.0 / 3.0),
            Norming::NCubeRoot => n.powf(2.0 / 3.0),
            Norming::NTwoFifths => n.powf(0.8),
        }
    }

    pub fn for_scheme(scheme: ObservationScheme) -> Self {
        if scheme.is_separated() {
            Norming::NCubeRoot
        } else {
            Norming::NLogNCubeRoot
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport {
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub norming: Norming,
}

impl AsymptoticReport {
    pub fn new(bias: f64, variance: f64, norming: Norming) -> Self {
        AsymptoticReport { bias, variance, mse: bias * bias + variance, norming }
    }

    pub fn bias_sq(&self) -> f64 {
        self.bias * self.bias
    }
}

fn check_interior(t0: f64) -> Result<()> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::arg(format!("t0 = {t0} must lie in (0,1)")));
    }
    Ok(())
}

fn positive_density(target: TargetDistribution, t0: f64) -> Result<f64> {
    check_interior(t0)?;
    let f = target.pdf(t0);
    if !(f > 0.0) {
        return Err(Error::domain(format!("f0({t0}) = {f} must be positive")));
    }
    Ok(f)
}

fn check_positive(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::arg(format!("c = {c} must be positive")));
    }
    Ok(())
}

fn separated_eps(scheme: ObservationScheme) -> Result<f64> {
    match scheme {
        ObservationScheme::Separated(eps) => Ok(eps),
        ObservationScheme::NonSeparated => Err(Error::arg("this constant is defined for a separated scheme only")),
    }
}

fn check_w_domain(t0: f64, eps: f64) -> Result<()> {
    check_interior(t0)?;
    if t0 < 2.0 * eps - 1e-12 || t0 > 1.0 - 2.0 * eps + 1e-12 {
        return Err(Error::domain(format!("t0 = {t0} must lie in [2eps, 1-2eps] for eps = {eps}")));
    }
    Ok(())
}

/// `(a(t), b(t)) = (√(h(t0,t) ∧ g1(t)), √(h(t,t0) ∧ g2(t)))`, with the diagonal
/// limit of `h` at `t = t0`.
pub fn a_b(t0: f64, t: f64, scheme: ObservationScheme) -> (f64, f64) {
    let (h_right, h_left) = if t == t0 {
        let d = scheme.diagonal_density(t0);
        (d, d)
    } else {
        (scheme.density(t0, t), scheme.density(t, t0))
    };
    (h_right.min(scheme.g1(t)).sqrt(), h_left.min(scheme.g2(t)).sqrt())
}

/// Asymptotic variance of Birgé's estimator under `(n log n)^{1/3}` norming.
pub fn sigma0_sq(t0: f64, c: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    if scheme.is_separated() {
        return Err(Error::arg("sigma0_sq is defined for the non-separated scheme"));
    }
    check_positive(c)?;
    let f = positive_density(target, t0)?;
    let h = scheme.diagonal_density(t0);
    let (a, b) = a_b(t0, t0, scheme);
    if !(h > 0.0) || !(a + b > 0.0) {
        return Err(Error::domain(format!("h({t0},{t0}) must be positive")));
    }
    Ok(3.0 * f * (a * a + b * b) / (c * h * (a + b) * (a + b)))
}

/// Normaliser of the deterministic weights in the separated case, by quadrature.
pub fn w_tilde(t0: f64, scheme: ObservationScheme) -> Result<f64> {
    let eps = separated_eps(scheme)?;
    check_w_domain(t0, eps)?;
    let left = |t: f64| scheme.density_closed(t, t0).min(scheme.g2(t)).sqrt() / (t0 - t);
    let right = |u: f64| scheme.density_closed(t0, u).min(scheme.g1(u)).sqrt() / (u - t0);
    let v = integrate(&left, eps, t0 - eps, QUAD_TOL)? + integrate(&right, t0 + eps, 1.0 - eps, QUAD_TOL)?;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::domain(format!("W~({t0}) = {v} is not a positive finite number")));
    }
    Ok(v)
}

/// `∫_0^{√(A-ε)} r²/(A-r²) dr` pieces of the uniform-scheme normaliser.
fn w_side(a: f64, eps: f64) -> f64 {
    let s = (a - eps).max(0.0).sqrt();
    -s + a.sqrt() * (s / a.sqrt()).atanh()
}

/// Closed form of [`w_tilde`] for the uniform separated scheme.
pub fn w_tilde_uniform_closed(t0: f64, eps: f64) -> Result<f64> {
    check_w_domain(t0, eps)?;
    let (a, b) = (t0 - eps, 1.0 - eps - t0);
    Ok(2.0 * 2f64.sqrt() / (1.0 - eps) * (w_side(a, eps) + w_side(b, eps)))
}

/// `c·σ²` in the separated case, by quadrature of the two one-sided integrals.
fn separated_variance_constant(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    let eps = separated_eps(scheme)?;
    let w = w_tilde(t0, scheme)?;
    let right = |u: f64| {
        let h = scheme.density_closed(t0, u);
        let d = target.increment(t0, u);
        if h > 0.0 { scheme.g1(u).min(h) / (h * (u - t0).powi(2)) * d * (1.0 - d) } else { 0.0 }
    };
    let left = |t: f64| {
        let h = scheme.density_closed(t, t0);
        let d = target.increment(t, t0);
        if h > 0.0 { scheme.g2(t).min(h) / (h * (t0 - t).powi(2)) * d * (1.0 - d) } else { 0.0 }
    };
    let s = integrate(&right, t0 + eps, 1.0 - eps, QUAD_TOL)? + integrate(&left, eps, t0 - eps, QUAD_TOL)?;
    Ok(s / (w * w))
}

/// Asymptotic variance of Birgé's estimator under `n^{1/3}` norming.
pub fn sigma_sq_separated(t0: f64, c: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    check_positive(c)?;
    check_interior(t0)?;
    Ok(separated_variance_constant(t0, target, scheme)? / c)
}

/// [`sigma_sq_separated`] with the uniform-scheme simplifications
/// `(g1 ∧ h)/h = 1-u-ε`, `(g2 ∧ h)/h = t-ε` and the closed-form normaliser.
pub fn sigma_sq_uniform_scheme(t0: f64, c: f64, target: TargetDistribution, eps: f64) -> Result<f64> {
    check_positive(c)?;
    let w = w_tilde_uniform_closed(t0, eps)?;
    let right = |u: f64| {
        let d = target.increment(t0, u);
        (1.0 - u - eps) / (u - t0).powi(2) * d * (1.0 - d)
    };
    let left = |t: f64| {
        let d = target.increment(t, t0);
        (t - eps) / (t0 - t).powi(2) * d * (1.0 - d)
    };
    let s = integrate(&right, t0 + eps, 1.0 - eps, QUAD_TOL)? + integrate(&left, eps, t0 - eps, QUAD_TOL)?;
    Ok(s / (c * w * w))
}

/// Fully closed form of the separated-case variance for a uniform `F0`.
pub fn sigma_sq_uniform_closed(t0: f64, c: f64, eps: f64) -> Result<f64> {
    check_positive(c)?;
    let w = w_tilde_uniform_closed(t0, eps)?;
    // ∫_ε^A (A-s)(1-s)/s ds
    let side = |a: f64| a * (a / eps).ln() - (a + 1.0) * (a - eps) + (a * a - eps * eps) / 2.0;
    Ok((side(t0 - eps) + side(1.0 - eps - t0)) / (c * w * w))
}

/// `c` times the asymptotic variance of Birgé's estimator (the variance is
/// inversely proportional to `c`).
pub fn birge_variance_constant(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    match scheme {
        ObservationScheme::NonSeparated => sigma0_sq(t0, 1.0, target, scheme),
        ObservationScheme::Separated(_) => separated_variance_constant(t0, target, scheme),
    }
}

/// Asymptotic bias `c f0(t0)/2`, variance and MSE of Birgé's estimator.
pub fn birge_report(t0: f64, c: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<AsymptoticReport> {
    check_positive(c)?;
    let f = positive_density(target, t0)?;
    let v = birge_variance_constant(t0, target, scheme)? / c;
    Ok(AsymptoticReport::new(0.5 * c * f, v, Norming::for_scheme(scheme)))
}

/// Binwidth constant minimising `(c f0/2)² + S/c`: `c = (2S/f0²)^{1/3}`.
pub fn optimal_birge_c(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    let f = positive_density(target, t0)?;
    let s = birge_variance_constant(t0, target, scheme)?;
    Ok((2.0 * s / (f * f)).cbrt())
}

/// Information functional of the separated case, by quadrature.
pub fn xi(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    let eps = separated_eps(scheme)?;
    check_interior(t0)?;
    let f0 = target.cdf(t0);
    if !(f0 > 0.0 && f0 < 1.0) {
        return Err(Error::domain(format!("F0({t0}) = {f0} must lie in (0,1)")));
    }
    let k1 = |v: f64| scheme.density_closed(t0, v) / target.increment(t0, v);
    let k2 = |u: f64| scheme.density_closed(u, t0) / target.increment(u, t0);
    let mut total = scheme.g1(t0) / f0 + scheme.g2(t0) / target.survival(t0);
    if t0 + eps < 1.0 {
        total += integrate_pieces(&k1, &[t0 + eps, 1.0], QUAD_TOL)?;
    }
    if t0 - eps > 0.0 {
        total += integrate_pieces(&k2, &[0.0, t0 - eps], QUAD_TOL)?;
    }
    if !total.is_finite() {
        return Err(Error::numeric(format!("xi({t0}) is not finite")));
    }
    Ok(total)
}

/// Closed forms of [`xi`] for the uniform separated scheme with a uniform or
/// `1-(1-x)^4` target.
pub fn xi_closed(t0: f64, target: TargetDistribution, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::arg(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    if !(t0 > eps && t0 < 1.0 - eps) {
        return Err(Error::domain(format!("t0 = {t0} must lie in (eps, 1-eps)")));
    }
    let lvl = 2.0 / ((1.0 - eps) * (1.0 - eps));
    match target {
        TargetDistribution::Uniform01 => {
            Ok(lvl * ((1.0 - t0 - eps) / t0 + (t0 * (1.0 - t0) / (eps * eps)).ln() + (t0 - eps) / (1.0 - t0)))
        }
        TargetDistribution::PowerDecay(4) => {
            let f0 = target.cdf(t0);
            let s = 1.0 - t0;
            let marg = lvl * ((1.0 - t0 - eps) / f0 + (t0 - eps) / s.powi(4));
            let k = 2.0 * ((1.0 - t0 - eps) / s).atan() + ((2.0 - 2.0 * t0 - eps) / eps).ln() + 2.0 * ((1.0 - t0 + eps) / s).atan()
                - 2.0 * (1.0 / s).atan()
                + (t0 * (2.0 - 2.0 * t0 + eps) / (eps * (2.0 - t0))).ln();
            Ok(marg + k / (2.0 * (1.0 - eps) * (1.0 - eps) * s.powi(3)))
        }
        other => Err(Error::arg(format!("no closed form for xi with target {other}"))),
    }
}

/// Asymptotic MSE of the MLE at `t0` under the norming of the scheme, given `Var(2Z)`.
pub fn mle_asymptotic_mse(t0: f64, target: TargetDistribution, scheme: ObservationScheme, var_2z: f64) -> Result<f64> {
    let f = positive_density(target, t0)?;
    match scheme {
        ObservationScheme::NonSeparated => {
            let h = scheme.diagonal_density(t0);
            Ok(var_2z * (0.75 * f * f / h).powf(2.0 / 3.0))
        }
        ObservationScheme::Separated(_) => {
            let x = xi(t0, target, scheme)?;
            Ok(var_2z * (f / (2.0 * x)).powf(2.0 / 3.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffEstimate {
    pub var_2z: f64,
    pub std_error: f64,
    pub mean_z: f64,
    pub reps: usize,
}

fn last_argmax_path(rng: &mut impl Rng, step: f64, steps: usize) -> f64 {
    let sd = step.sqrt();
    // t = 0 is a grid point with value 0
    let (mut best, mut arg) = (0.0f64, 0.0f64);
    let mut w = 0.0;
    for i in 1..=steps {
        w += sd * rng.sample::<f64, _>(StandardNormal);
        let t = -(i as f64) * step;
        let y = w - t * t;
        if y > best {
            best = y;
            arg = t;
        }
    }
    w = 0.0;
    for i in 1..=steps {
        w += sd * rng.sample::<f64, _>(StandardNormal);
        let t = i as f64 * step;
        let y = w - t * t;
        if y >= best {
            best = y;
            arg = t;
        }
    }
    arg
}

/// Monte Carlo estimate of `Var(2Z)` from grid-discretised paths on `[-horizon, horizon]`.
pub fn chernoff_variance_mc(grid_step: f64, horizon: f64, reps: usize, seed: u64) -> Result<ChernoffEstimate> {
    if !(grid_step > 0.0 && grid_step < horizon) || reps < 2 {
        return Err(Error::arg("need 0 < grid_step < horizon and at least two replications"));
    }
    let steps = (horizon / grid_step).round() as usize;
    let z: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| last_argmax_path(&mut stream(derive_seed(seed, r as u64)), grid_step, steps))
        .collect();
    let n = reps as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sq: Vec<f64> = z.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = sq.iter().sum::<f64>() / n;
    let var_sq = sq.iter().map(|s| (s - var) * (s - var)).sum::<f64>() / (n - 1.0);
    Ok(ChernoffEstimate { var_2z: 4.0 * var, std_error: 4.0 * (var_sq / n).sqrt(), mean_z: mean, reps })
}

/// Constant of the local minimax lower bound under `(n log n)^{1/3}` norming.
pub fn minimax_constant(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    check_interior(t0)?;
    let h = scheme.diagonal_density(t0);
    if !(h > 0.0) {
        return Err(Error::domain(format!("h({t0},{t0}) = {h} must be positive")));
    }
    let f = target.pdf(t0);
    Ok(6f64.cbrt() / 4.0 * (-1.0f64 / 3.0).exp() * (f * f / h).cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerReport {
    /// Half-width `c (n log n)^{-1/3}` of the perturbation window.
    pub delta: f64,
    pub h_sq: f64,
    pub n_h_sq: f64,
    /// `f0 h c³/18`, the limit of `n H²` carrying the `c³` factor.
    pub limit_with_c3: f64,
    /// `f0 h/18`, the limit as displayed without the `c³` factor.
    pub limit_without_c3: f64,
}

impl HellingerReport {
    pub fn ratio_with_c3(&self) -> f64 {
        self.n_h_sq / self.limit_with_c3
    }

    pub fn ratio_without_c3(&self) -> f64 {
        self.n_h_sq / self.limit_without_c3
    }
}

/// Squared Hellinger distance between the observation laws under `F0` and
/// under the local perturbation that flattens `F0` on each half of
/// `[t0-δ, t0+δ)`.
pub fn hellinger_sq_numeric(t0: f64, c: f64, n: usize, target: TargetDistribution, scheme: ObservationScheme) -> Result<HellingerReport> {
    if scheme.is_separated() {
        return Err(Error::arg("the perturbation bound is stated for the non-separated scheme"));
    }
    check_interior(t0)?;
    if !(c >= 0.0 && c.is_finite()) || n < 2 {
        return Err(Error::arg("need c >= 0 and n >= 2"));
    }
    let nf = n as f64;
    let delta = c * (nf * nf.ln()).powf(-1.0 / 3.0);
    let (lo, hi) = (t0 - delta, t0 + delta);
    if !(lo > 0.0 && hi < 1.0) {
        return Err(Error::domain(format!("window [{lo}, {hi}] leaves (0,1)")));
    }
    let f = target.pdf(t0);
    let h0 = scheme.diagonal_density(t0);
    let limit_with_c3 = f * h0 * c.powi(3) / 18.0;
    let report = |h_sq: f64| HellingerReport {
        delta,
        h_sq,
        n_h_sq: nf * h_sq,
        limit_with_c3,
        limit_without_c3: f * h0 / 18.0,
    };
    if delta == 0.0 {
        return Ok(report(0.0));
    }

    let (f_lo, f_hi) = (target.cdf(lo), target.cdf(hi));
    let fn_ = move |x: f64| {
        if x < lo || x >= hi {
            target.cdf(x)
        } else if x < t0 {
            f_lo
        } else {
            f_hi
        }
    };
    let sq = |a: f64, b: f64| {
        let d = a.max(0.0).sqrt() - b.max(0.0).sqrt();
        d * d
    };
    let integrand = move |t: f64, u: f64| {
        let (p0t, p0u, pnt, pnu) = (target.cdf(t), target.cdf(u), fn_(t), fn_(u));
        scheme.density(t, u) * (sq(pnt, p0t) + sq(pnu - pnt, p0u - p0t) + sq(1.0 - pnu, 1.0 - p0u))
    };

    // Nested double-exponential rules, split where the perturbation jumps;
    // the square roots make the integrand non-smooth at those lines.
    let scale = (limit_with_c3 / nf).max(1e-300);
    let outer_tol = 1e-8 * scale;
    let inner_tol = 1e-3 * outer_tol;
    let inner_err = std::cell::Cell::new(None::<Error>);
    let inner = |u: f64, pts: &[f64]| -> f64 {
        match tanh_sinh_pieces(&|t| integrand(t, u), pts, inner_tol) {
            Ok(v) => v,
            Err(e) => {
                inner_err.set(Some(e));
                f64::NAN
            }
        }
    };
    // u inside the window: t ranges over [0, u]
    let in_window = |u: f64| if u > t0 { inner(u, &[0.0, lo, t0, u]) } else { inner(u, &[0.0, lo, u]) };
    // u beyond the window: only t inside the window contributes
    let beyond = |u: f64| inner(u, &[lo, t0, hi]);
    let first = tanh_sinh_pieces(&in_window, &[lo, t0, hi], outer_tol);
    let second = tanh_sinh_pieces(&beyond, &[hi, 1.0], outer_tol);
    if let Some(e) = inner_err.take() {
        return Err(e);
    }
    Ok(report(0.5 * (first? + second?)))
}

/// The constants reported per `(t0, model)`; `None` where a constant is not
/// defined for the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsRow {
    pub t0: f64,
    pub target: TargetDistribution,
    pub scheme: ObservationScheme,
    pub birge_c: f64,
    pub birge: AsymptoticReport,
    pub mle_mse: f64,
    pub xi: Option<f64>,
    pub w_tilde: Option<f64>,
    pub minimax: Option<f64>,
}

pub fn constants_row(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<ConstantsRow> {
    let birge_c = optimal_birge_c(t0, target, scheme)?;
    let (xi, w_tilde, minimax) = if scheme.is_separated() {
        (Some(xi(t0, target, scheme)?), Some(w_tilde(t0, scheme)?), None)
    } else {
        (None, None, Some(minimax_constant(t0, target, scheme)?))
    };
    Ok(ConstantsRow {
        t0,
        target,
        scheme,
        birge_c,
        birge: birge_report(t0, birge_c, target, scheme)?,
        mle_mse: mle_asymptotic_mse(t0, target, scheme, CHERNOFF_VAR_2Z)?,
        xi,
        w_tilde,
        minimax,
    })
}
