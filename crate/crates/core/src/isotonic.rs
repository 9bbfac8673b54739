//! Greatest convex minorants, weighted isotonic regression and the
//! current-status MLE.

use crate::error::{Error, Result};

/// Right-continuous nondecreasing step function on `[0,1]`.
///
/// `eval(x)` is `0` below the first knot and `values[i]` on `[knots[i], knots[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepDistribution {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::arg("knots and values must have equal length"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("knots must be strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg("step values must lie in [0,1]"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::arg("step values must be nondecreasing"));
        }
        Ok(StepDistribution { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= x);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Jump locations and sizes (zero jumps skipped).
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 0.0;
        self.knots.iter().zip(&self.values).filter_map(move |(&k, &v)| {
            let m = v - prev;
            prev = v;
            (m > 0.0).then_some((k, m))
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Cumulative-sum diagram; the origin `(0,0)` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDiagram {
    points: Vec<(f64, f64)>,
}

impl CusumDiagram {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::arg("cusum diagram needs at least one point"));
        }
        let mut prev = 0.0;
        for &(x, _) in &points {
            if !(x > prev) {
                return Err(Error::arg("cusum x-coordinates must be strictly increasing from the origin"));
            }
            prev = x;
        }
        Ok(CusumDiagram { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Left slopes of the greatest convex minorant of `{(0,0)} ∪ points`, one per point.
pub fn gcm_left_slopes(diagram: &CusumDiagram) -> Vec<f64> {
    let mut dx = Vec::with_capacity(diagram.points.len());
    let mut dy = Vec::with_capacity(diagram.points.len());
    let (mut px, mut py) = (0.0, 0.0);
    for &(x, y) in &diagram.points {
        dx.push(x - px);
        dy.push(y - py);
        px = x;
        py = y;
    }
    pool_increments(&dx, &dy)
}

/// Weighted least-squares nondecreasing fit to `y` with positive weights `w`.
///
/// Same computation as [`gcm_left_slopes`] on the diagram `(Σw, Σwy)`.
pub fn isotonic_regression(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    let wy: Vec<f64> = y.iter().zip(w).map(|(y, w)| y * w).collect();
    pool_increments(w, &wy)
}

/// Stack-based pooling of adjacent blocks whose slopes violate monotonicity.
fn pool_increments(dx: &[f64], dy: &[f64]) -> Vec<f64> {
    // (sum dx, sum dy, number of increments)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(dx.len());
    for (&a, &b) in dx.iter().zip(dy) {
        let mut cur = (a, b, 1usize);
        while let Some(&(pa, pb, pc)) = blocks.last() {
            // pb/pa > cur.1/cur.0, cross-multiplied (all dx > 0)
            if pb * cur.0 > cur.1 * pa {
                blocks.pop();
                cur = (pa + cur.0, pb + cur.1, pc + cur.2);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(dx.len());
    for (sx, sy, c) in blocks {
        let slope = sy / sx;
        out.extend(std::iter::repeat_n(slope, c));
    }
    out
}

/// One-step MLE for current-status data `(t, δ)`, `δ = 1{X ≤ t}`.
///
/// Tied observation times are merged into a single diagram point.
pub fn current_status_mle(sample: &[(f64, bool)]) -> Result<StepDistribution> {
    if sample.is_empty() {
        return Err(Error::arg("current-status sample is empty"));
    }
    let mut sorted: Vec<(f64, bool)> = sample.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut knots: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut hits: Vec<f64> = Vec::new();
    for (t, d) in sorted {
        if knots.last() != Some(&t) {
            knots.push(t);
            counts.push(0.0);
            hits.push(0.0);
        }
        *counts.last_mut().unwrap() += 1.0;
        *hits.last_mut().unwrap() += d as u8 as f64;
    }
    let values = pool_increments(&counts, &hits);
    StepDistribution::new(knots, values)
}

/// Current-status log-likelihood of `f` evaluated at each `t`.
pub fn current_status_loglik(sample: &[(f64, bool)], f: impl Fn(f64) -> f64) -> f64 {
    sample
        .iter()
        .map(|&(t, d)| {
            let p = if d { f(t) } else { 1.0 - f(t) };
            if p > 0.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}
