//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;
const MAX_EVALS: usize = 4_000_000;
const ROUNDING: f64 = 1e-15;

struct State<'a> {
    f: &'a dyn Fn(f64) -> f64,
    unresolved: f64,
    evals: usize,
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse(st: &mut State, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = ((st.f)(lm), (st.f)(rm));
    st.evals += 2;
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    // below a few ulps of the piece, refinement only chases rounding noise
    let tol = tol.max(ROUNDING * (left.abs() + right.abs()));
    if delta.abs() <= 15.0 * tol || depth == 0 || m <= a || m >= b || st.evals > MAX_EVALS {
        if delta.abs() > 15.0 * tol {
            st.unresolved += delta.abs() / 15.0;
        }
        return left + right + delta / 15.0;
    }
    recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol`, or to about 1e-15 relative on
/// pieces where that is coarser.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut st = State { f, unresolved: 0.0, evals: 3 };
    let whole = simpson(fa, fm, fb, b - a);
    let v = recurse(&mut st, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if !v.is_finite() {
        return Err(Error::numeric(format!("non-finite integral over [{a}, {b}]")));
    }
    if st.unresolved > tol {
        return Err(Error::numeric(format!(
            "quadrature over [{a}, {b}] did not reach tolerance {tol:e} (unresolved error {:e})",
            st.unresolved
        )));
    }
    Ok(v)
}

/// Integral over `[points[0], points[last]]`, splitting at every interior point
/// (kinks and jumps of the integrand should be listed).
pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, points: &[f64], tol: f64) -> Result<f64> {
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pieces = pts.len().saturating_sub(1).max(1) as f64;
    pts.windows(2).map(|w| integrate(f, w[0], w[1], tol / pieces)).sum()
}

/// Double-exponential (tanh-sinh) quadrature, robust to integrable endpoint
/// singularities. Refines the step until successive levels agree to `tol`
/// (or to 1e-14 relative, below which rounding dominates).
pub fn tanh_sinh(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_LEVEL: u32 = 12;
    const T_MAX: f64 = 4.0;
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let hp = std::f64::consts::FRAC_PI_2;
    // contribution of the node pair at parameter s > 0 (or the centre at s = 0)
    let node = |s: f64| -> f64 {
        let u = hp * s.sinh();
        let w = hp * s.cosh() / u.cosh().powi(2);
        // 1 - tanh(u), without cancellation
        let gap = 2.0 / (1.0 + (2.0 * u).exp());
        if s == 0.0 {
            return w * f(a + half);
        }
        let d = half * gap;
        if w == 0.0 {
            return 0.0;
        }
        // nodes that round onto an endpoint are dropped
        let (x, y) = (a + d, b - d);
        let left = if x > a && x < b { f(x) } else { 0.0 };
        let right = if y > a && y < b { f(y) } else { 0.0 };
        w * (left + right)
    };
    let mut h = 1.0;
    let mut sum = node(0.0) + (1..=(T_MAX / h) as usize).map(|k| node(k as f64 * h)).sum::<f64>();
    let mut estimate = half * h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let odd = (T_MAX / h) as usize;
        sum += (1..=odd).step_by(2).map(|k| node(k as f64 * h)).sum::<f64>();
        let next = half * h * sum;
        if !next.is_finite() {
            return Err(Error::numeric(format!("non-finite integral over [{a}, {b}]")));
        }
        let change = (next - estimate).abs();
        estimate = next;
        if level >= 3 && change <= tol.max(1e-14 * next.abs()) {
            return Ok(estimate);
        }
    }
    Err(Error::numeric(format!("tanh-sinh quadrature over [{a}, {b}] did not reach tolerance {tol:e}")))
}

/// [`tanh_sinh`] over consecutive pieces of `points`.
pub fn tanh_sinh_pieces(f: &dyn Fn(f64) -> f64, points: &[f64], tol: f64) -> Result<f64> {
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pieces = pts.len().saturating_sub(1).max(1) as f64;
    pts.windows(2).map(|w| tanh_sinh(f, w[0], w[1], tol / pieces)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_transcendentals() {
        assert!((integrate(&|x| x * x, 0.0, 1.0, 1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((integrate(&f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap() - 2.0).abs() < 1e-11);
        assert!((integrate(&|x| 1.0 / x, 1.0, 10.0, 1e-12).unwrap() - 10f64.ln()).abs() < 1e-11);
        assert!((integrate(&|x| x, 1.0, 0.0, 1e-12).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn kinks_are_handled_by_splitting() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_pieces(&f, &[0.0, 0.3, 1.0], 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let v = integrate(&f64::sqrt, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let v = tanh_sinh(&|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        let v = tanh_sinh(&|x| (1.0 - x).sqrt().ln(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v + 0.5).abs() < 1e-10, "{v}");
        let v = tanh_sinh_pieces(&|x| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-13).unwrap();
        assert!((v - 0.29).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(integrate(&|x| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
