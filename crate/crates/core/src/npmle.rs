//! Nonparametric MLE for interval-censored (case 2) data.
//!
//! The distribution function is parametrised by its values at the sorted
//! distinct observation times that appear in an active likelihood term.
//! Internally each observation is a contiguous range of "cells" of the
//! extended vector `C = (0, F_1, ..., F_m, 1)`, so that its probability is
//! `C[hi] - C[lo]`.

use crate::error::{Error, Result};
use crate::isotonic::{isotonic_regression, StepDistribution};
use crate::model::{CensoredObservation, Dataset, Position};

/// Floor applied to observation probabilities when forming the quadratic model.
const PROB_FLOOR: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Iterations without likelihood or gap progress before giving up.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub struct LikelihoodProblem {
    candidates: Vec<f64>,
    /// Per observation `(lo, hi)` into the extended vector, `lo < hi`.
    ranges: Vec<(usize, usize)>,
}

impl LikelihoodProblem {
    pub fn new(observations: &[CensoredObservation]) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::arg("likelihood needs at least one observation"));
        }
        let mut obs = observations.to_vec();
        obs.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.u.total_cmp(&b.u)).then(a.delta.cmp(&b.delta)));

        let mut candidates: Vec<f64> = Vec::with_capacity(2 * obs.len());
        for o in &obs {
            match o.delta {
                Position::Left => candidates.push(o.t),
                Position::Interval => {
                    candidates.push(o.t);
                    candidates.push(o.u);
                }
                Position::Right => candidates.push(o.u),
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let m = candidates.len();
        // extended index of candidate value x: 1 + position
        let ext = |x: f64| 1 + candidates.partition_point(|&c| c < x);
        let ranges = obs
            .iter()
            .map(|o| match o.delta {
                Position::Left => (0, ext(o.t)),
                Position::Interval => (ext(o.t), ext(o.u)),
                Position::Right => (ext(o.u), m + 1),
            })
            .collect();
        Ok(LikelihoodProblem { candidates, ranges })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::new(&ds.observations)
    }

    /// Distinct observation times that can carry a change of `F`.
    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    fn extend(&self, f: &[f64]) -> Vec<f64> {
        let mut c = Vec::with_capacity(f.len() + 2);
        c.push(0.0);
        c.extend_from_slice(f);
        c.push(1.0);
        c
    }

    fn check_values(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.candidates.len() {
            return Err(Error::arg(format!(
                "expected {} distribution-function values, got {}",
                self.candidates.len(),
                f.len()
            )));
        }
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg("distribution-function values must lie in [0,1]"));
        }
        if f.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::arg("distribution-function values must be nondecreasing"));
        }
        Ok(())
    }

    /// Derivative of the log-likelihood at `to`, in the direction `to - from`.
    fn slope_towards(&self, from: &[f64], to: &[f64]) -> f64 {
        self.ranges
            .iter()
            .map(|&(lo, hi)| ((to[hi] - from[hi]) - (to[lo] - from[lo])) / (to[hi] - to[lo]))
            .sum()
    }

    fn loglik_ext(&self, c: &[f64]) -> f64 {
        let mut ll = 0.0;
        for &(lo, hi) in &self.ranges {
            let p = c[hi] - c[lo];
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += p.ln();
        }
        ll
    }

    /// Log-likelihood of `F` given by its values at [`Self::candidates`].
    pub fn log_likelihood(&self, f: &[f64]) -> Result<f64> {
        self.check_values(f)?;
        Ok(self.loglik_ext(&self.extend(f)))
    }

    /// `D_k = Σ_{i: cell k ∈ A_i} 1/P_i` for the `m+1` cells `(x_{k-1}, x_k]`.
    fn cell_scores(&self, c: &[f64]) -> Result<Vec<f64>> {
        let m = self.candidates.len();
        let mut diff = vec![0.0; m + 2];
        for (i, &(lo, hi)) in self.ranges.iter().enumerate() {
            let p = c[hi] - c[lo];
            if p <= 0.0 {
                return Err(Error::Degenerate(i));
            }
            diff[lo] += 1.0 / p;
            diff[hi] -= 1.0 / p;
        }
        let mut acc = 0.0;
        Ok(diff[..=m]
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect())
    }

    /// One self-consistency (EM) update of `F`.
    pub fn em_step(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_values(f)?;
        let c = self.extend(f);
        let scores = self.cell_scores(&c)?;
        let n = self.ranges.len() as f64;
        let mut acc = 0.0;
        let mut out: Vec<f64> = (0..self.candidates.len())
            .map(|k| {
                acc += (c[k + 1] - c[k]) * scores[k] / n;
                acc.min(1.0)
            })
            .collect();
        enforce_monotone(&mut out);
        Ok(out)
    }

    /// Maximal violation of the optimality conditions `D_k ≤ n`, with equality
    /// on cells carrying mass, measured relative to `n`.
    pub fn duality_gap(&self, f: &[f64]) -> Result<f64> {
        self.check_values(f)?;
        let c = self.extend(f);
        let scores = self.cell_scores(&c)?;
        Ok(self.gap_from_scores(&c, &scores))
    }

    fn gap_from_scores(&self, c: &[f64], scores: &[f64]) -> f64 {
        let n = self.ranges.len() as f64;
        let mut upper: f64 = 0.0;
        let mut slack = 0.0;
        for (k, &d) in scores.iter().enumerate() {
            let r = d / n - 1.0;
            upper = upper.max(r);
            slack += (c[k + 1] - c[k]) * r.abs();
        }
        upper.max(slack)
    }

    /// Interior starting point `F(s) = (#{u_i ≤ s} + #{t_i ≤ s}) / 2n`, clipped.
    fn naive_start(&self, observations: &[CensoredObservation]) -> Vec<f64> {
        let n = observations.len();
        let mut ts: Vec<f64> = observations.iter().map(|o| o.t).collect();
        let mut us: Vec<f64> = observations.iter().map(|o| o.u).collect();
        ts.sort_by(f64::total_cmp);
        us.sort_by(f64::total_cmp);
        let lo = 1.0 / (2.0 * n as f64);
        self.candidates
            .iter()
            .map(|&s| {
                let k = ts.partition_point(|&t| t <= s) + us.partition_point(|&u| u <= s);
                (k as f64 / (2.0 * n as f64)).clamp(lo, 1.0 - lo)
            })
            .collect()
    }

    fn rank_start(&self) -> Vec<f64> {
        let m = self.candidates.len();
        (0..m).map(|k| (k + 1) as f64 / (m + 1) as f64).collect()
    }

    fn estimate_from(&self, f: &[f64]) -> StepDistribution {
        let mut knots = self.candidates.clone();
        let mut values = f.to_vec();
        // Mass beyond the last candidate is placed at the right end of [0,1].
        if values.last().is_some_and(|&v| v < 1.0) && knots.last().is_some_and(|&k| k < 1.0) {
            knots.push(1.0);
            values.push(1.0);
        }
        StepDistribution::new(knots, values).expect("iterates stay monotone in [0,1]")
    }
}

fn enforce_monotone(f: &mut [f64]) {
    let mut prev = 0.0f64;
    for v in f.iter_mut() {
        *v = v.clamp(prev, 1.0);
        prev = *v;
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub estimate: StepDistribution,
    /// `F` at the likelihood candidates.
    pub values: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub duality_gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct IcmOptions {
    pub tol: f64,
    pub rel_loglik_tol: f64,
    pub max_iter: usize,
}

impl Default for IcmOptions {
    fn default() -> Self {
        IcmOptions { tol: 1e-8, rel_loglik_tol: 1e-12, max_iter: 5000 }
    }
}

/// Log-likelihood of `F` (values at the candidates of `dataset`).
pub fn log_likelihood(f: &[f64], dataset: &Dataset) -> Result<f64> {
    LikelihoodProblem::from_dataset(dataset)?.log_likelihood(f)
}

pub fn em_step(f: &[f64], dataset: &Dataset) -> Result<Vec<f64>> {
    LikelihoodProblem::from_dataset(dataset)?.em_step(f)
}

/// NPMLE by the iterative convex minorant algorithm with line search.
pub fn npmle_icm(dataset: &Dataset, tol: f64, max_iter: usize) -> Result<MleResult> {
    npmle_icm_with(&dataset.observations, IcmOptions { tol, max_iter, ..IcmOptions::default() })
}

pub fn npmle_icm_with(observations: &[CensoredObservation], opts: IcmOptions) -> Result<MleResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tolerance must be positive"));
    }
    let problem = LikelihoodProblem::new(observations)?;
    let m = problem.candidates.len();

    let mut f = problem.naive_start(observations);
    let mut c = problem.extend(&f);
    let mut ll = problem.loglik_ext(&c);
    if !ll.is_finite() {
        f = problem.rank_start();
        c = problem.extend(&f);
        ll = problem.loglik_ext(&c);
    }

    let mut grad = vec![0.0; m];
    let mut weight = vec![0.0; m];
    let mut trial_f = vec![0.0; m];
    let mut trial_c = c.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0;
    let mut gap = problem.gap_from_scores(&c, &problem.cell_scores(&c)?);

    while iterations < opts.max_iter {
        if gap <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        grad.iter_mut().for_each(|g| *g = 0.0);
        weight.iter_mut().for_each(|w| *w = 0.0);
        for &(lo, hi) in &problem.ranges {
            let p = (c[hi] - c[lo]).max(PROB_FLOOR);
            let (g, w) = (1.0 / p, 1.0 / (p * p));
            if hi <= m {
                grad[hi - 1] += g;
                weight[hi - 1] += w;
            }
            if lo >= 1 {
                grad[lo - 1] -= g;
                weight[lo - 1] += w;
            }
        }
        let target: Vec<f64> = (0..m).map(|k| f[k] + grad[k] / weight[k]).collect();
        let mut proposal = isotonic_regression(&target, &weight);
        enforce_monotone(&mut proposal);

        let slope: f64 = (0..m).map(|k| grad[k] * (proposal[k] - f[k])).sum();
        if !(slope > 0.0) {
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            for k in 0..m {
                trial_f[k] = f[k] + step * (proposal[k] - f[k]);
            }
            enforce_monotone(&mut trial_f);
            trial_c[1..=m].copy_from_slice(&trial_f);
            let trial_ll = problem.loglik_ext(&trial_c);
            // Near the optimum the likelihood change drowns in rounding; a
            // nonnegative directional derivative at the trial point certifies
            // ascent by concavity instead.
            if trial_ll.is_finite()
                && (trial_ll >= ll + ARMIJO * step * slope || problem.slope_towards(&c, &trial_c) >= 0.0)
            {
                accepted = Some(trial_ll.max(ll));
                break;
            }
            step *= 0.5;
        }
        let Some(new_ll) = accepted else {
            // no ascent possible at machine precision
            break;
        };
        debug_assert!(new_ll >= ll);
        std::mem::swap(&mut f, &mut trial_f);
        std::mem::swap(&mut c, &mut trial_c);
        let rel = (new_ll - ll) / ll.abs().max(1.0);
        ll = new_ll;
        let previous_gap = gap;
        gap = problem.gap_from_scores(&c, &problem.cell_scores(&c)?);
        if gap <= opts.tol {
            converged = true;
            break;
        }
        stalled = if rel <= opts.rel_loglik_tol && gap >= previous_gap { stalled + 1 } else { 0 };
        if stalled >= STALL_LIMIT {
            break;
        }
    }

    Ok(MleResult {
        estimate: problem.estimate_from(&f),
        log_likelihood: problem.loglik_ext(&c),
        values: f,
        iterations,
        duality_gap: gap,
        converged,
    })
}

/// Plain EM iterations from the naive start, for cross-checking the ICM solver.
pub fn npmle_em(observations: &[CensoredObservation], max_iter: usize, abs_tol: f64) -> Result<MleResult> {
    let problem = LikelihoodProblem::new(observations)?;
    let mut f = problem.naive_start(observations);
    if !problem.loglik_ext(&problem.extend(&f)).is_finite() {
        f = problem.rank_start();
    }
    let mut ll = problem.log_likelihood(&f)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next = problem.em_step(&f)?;
        let next_ll = problem.log_likelihood(&next)?;
        let change = next_ll - ll;
        f = next;
        ll = next_ll;
        if change.abs() <= abs_tol {
            converged = true;
            break;
        }
    }
    let gap = problem.duality_gap(&f)?;
    Ok(MleResult { estimate: problem.estimate_from(&f), values: f, log_likelihood: ll, iterations, duality_gap: gap, converged })
}

/// EM run until its duality gap is at most `gap_tol` (checked every 256 steps).
/// Slow, but a solver-independent reference: per-step likelihood changes
/// become tiny long before EM has converged.
pub fn npmle_em_certified(observations: &[CensoredObservation], max_iter: usize, gap_tol: f64) -> Result<MleResult> {
    let problem = LikelihoodProblem::new(observations)?;
    let mut f = problem.naive_start(observations);
    if !problem.loglik_ext(&problem.extend(&f)).is_finite() {
        f = problem.rank_start();
    }
    let mut iterations = 0;
    let mut gap = problem.duality_gap(&f)?;
    while gap > gap_tol && iterations < max_iter {
        for _ in 0..256 {
            f = problem.em_step(&f)?;
        }
        iterations += 256;
        gap = problem.duality_gap(&f)?;
    }
    Ok(MleResult {
        estimate: problem.estimate_from(&f),
        log_likelihood: problem.log_likelihood(&f)?,
        values: f,
        iterations,
        duality_gap: gap,
        converged: gap <= gap_tol,
    })
}
