//! Target distributions, observation schemes and synthetic interval-censored data.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Distribution of the unobservable event times `X` on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetDistribution {
    Uniform01,
    /// `F(x) = 1 - (1-x)^k`.
    PowerDecay(u32),
}

impl TargetDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            TargetDistribution::Uniform01 => x,
            TargetDistribution::PowerDecay(k) => 1.0 - (1.0 - x).powi(k as i32),
        }
    }

    /// `1 - F(x)`, accurate where `F` is close to 1.
    pub fn survival(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            TargetDistribution::Uniform01 => 1.0 - x,
            TargetDistribution::PowerDecay(k) => (1.0 - x).powi(k as i32),
        }
    }

    /// `F(b) - F(a)` without the cancellation of subtracting two values near 1.
    pub fn increment(&self, a: f64, b: f64) -> f64 {
        match *self {
            TargetDistribution::Uniform01 => b.clamp(0.0, 1.0) - a.clamp(0.0, 1.0),
            TargetDistribution::PowerDecay(_) => self.survival(a) - self.survival(b),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            TargetDistribution::Uniform01 => 1.0,
            TargetDistribution::PowerDecay(k) => k as f64 * (1.0 - x).powi(k as i32 - 1),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            TargetDistribution::Uniform01 => p,
            TargetDistribution::PowerDecay(k) => 1.0 - (1.0 - p).powf(1.0 / k as f64),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            TargetDistribution::PowerDecay(0) => Err(Error::arg("power-decay exponent must be >= 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for TargetDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetDistribution::Uniform01 => write!(f, "uniform"),
            TargetDistribution::PowerDecay(k) => write!(f, "pow{k}"),
        }
    }
}

impl FromStr for TargetDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "unif" => Ok(TargetDistribution::Uniform01),
            _ => {
                let k = s
                    .strip_prefix("pow")
                    .and_then(|k| k.parse::<u32>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::Parse(format!("model: unknown target distribution `{s}` (expected uniform | pow<k>)")))?;
                Ok(TargetDistribution::PowerDecay(k))
            }
        }
    }
}

/// `(F₀(x), f₀(x))`.
pub fn eval_target(dist: TargetDistribution, x: f64) -> Result<(f64, f64)> {
    dist.validate()?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} lies outside [0,1]")));
    }
    Ok((dist.cdf(x), dist.pdf(x)))
}

/// Law of the observation pair `(T,U)`: uniform on the upper triangle,
/// optionally with a minimal gap `ε` between the two times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationScheme {
    NonSeparated,
    Separated(f64),
}

impl ObservationScheme {
    pub fn separated(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::arg(format!("eps = {eps} must lie in (0, 1/2)")));
        }
        Ok(ObservationScheme::Separated(eps))
    }

    /// Smallest possible `u - t`.
    pub fn min_gap(&self) -> f64 {
        match *self {
            ObservationScheme::NonSeparated => 0.0,
            ObservationScheme::Separated(eps) => eps,
        }
    }

    pub fn is_separated(&self) -> bool {
        matches!(self, ObservationScheme::Separated(_))
    }

    fn level(&self) -> f64 {
        match *self {
            ObservationScheme::NonSeparated => 2.0,
            ObservationScheme::Separated(eps) => 2.0 / ((1.0 - eps) * (1.0 - eps)),
        }
    }

    /// Joint density `h(t,u)`.
    pub fn density(&self, t: f64, u: f64) -> f64 {
        if t < 0.0 || u > 1.0 {
            return 0.0;
        }
        match *self {
            ObservationScheme::NonSeparated if t <= u => 2.0,
            ObservationScheme::Separated(eps) if t + eps <= u => self.level(),
            _ => 0.0,
        }
    }

    /// `h` on the closed support, tolerating rounding on the boundary
    /// `u - t = ε`. Used by quadrature whose limits sit on that boundary.
    pub fn density_closed(&self, t: f64, u: f64) -> f64 {
        if t < -1e-12 || u > 1.0 + 1e-12 || u - t < self.min_gap() - 1e-12 {
            return 0.0;
        }
        self.level()
    }

    /// `h(t,t) = lim_{u↓t} h(t,u)`.
    pub fn diagonal_density(&self, t: f64) -> f64 {
        match *self {
            ObservationScheme::NonSeparated if (0.0..=1.0).contains(&t) => 2.0,
            _ => 0.0,
        }
    }

    /// Marginal density of `T`.
    pub fn g1(&self, t: f64) -> f64 {
        let eps = self.min_gap();
        if t < 0.0 || t > 1.0 - eps {
            return 0.0;
        }
        (self.level() * (1.0 - t - eps)).max(0.0)
    }

    /// Marginal density of `U`.
    pub fn g2(&self, u: f64) -> f64 {
        let eps = self.min_gap();
        if u < eps || u > 1.0 {
            return 0.0;
        }
        (self.level() * (u - eps)).max(0.0)
    }
}

impl fmt::Display for ObservationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationScheme::NonSeparated => write!(f, "nonsep"),
            ObservationScheme::Separated(eps) => write!(f, "sep({eps})"),
        }
    }
}

/// `(h(t,u), g₁(t), g₂(u))`; zero outside the support.
pub fn scheme_density(s: ObservationScheme, t: f64, u: f64) -> (f64, f64, f64) {
    (s.density(t, u), s.g1(t), s.g2(u))
}

/// Position of `X` relative to the observation interval `[T, U]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    /// `X ≤ T` (δ₁ = 1)
    Left,
    /// `T < X ≤ U` (δ₂ = 1)
    Interval,
    /// `X > U` (δ₃ = 1)
    Right,
}

impl Position {
    pub fn indicators(self) -> [u8; 3] {
        match self {
            Position::Left => [1, 0, 0],
            Position::Interval => [0, 1, 0],
            Position::Right => [0, 0, 1],
        }
    }

    pub fn from_indicators(d: [u8; 3]) -> Result<Self> {
        match d {
            [1, 0, 0] => Ok(Position::Left),
            [0, 1, 0] => Ok(Position::Interval),
            [0, 0, 1] => Ok(Position::Right),
            _ => Err(Error::Parse(format!("indicators {d:?}: exactly one of d1,d2,d3 must be 1"))),
        }
    }
}

pub fn censor_indicator(x: f64, t: f64, u: f64) -> Result<Position> {
    if !(t < u) {
        return Err(Error::arg(format!("observation times must satisfy t < u (t = {t}, u = {u})")));
    }
    Ok(if x <= t {
        Position::Left
    } else if x <= u {
        Position::Interval
    } else {
        Position::Right
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoredObservation {
    pub t: f64,
    pub u: f64,
    pub delta: Position,
}

impl CensoredObservation {
    pub fn new(t: f64, u: f64, delta: Position) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&u) || !(t < u) {
            return Err(Error::arg(format!("observation requires 0 <= t < u <= 1 (t = {t}, u = {u})")));
        }
        Ok(CensoredObservation { t, u, delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub observations: Vec<CensoredObservation>,
    pub seed: u64,
    pub scheme: ObservationScheme,
    pub target: TargetDistribution,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// One draw of `(T, U)` from `s`. Ties (probability zero) are redrawn.
pub fn draw_observation_pair<R: Rng + ?Sized>(s: ObservationScheme, rng: &mut R) -> (f64, f64) {
    loop {
        let v1: f64 = rng.gen();
        let v2: f64 = rng.gen();
        let (lo, hi) = if v1 < v2 { (v1, v2) } else { (v2, v1) };
        if lo == hi {
            continue;
        }
        match s {
            ObservationScheme::NonSeparated => return (lo, hi),
            ObservationScheme::Separated(eps) => {
                let t = (1.0 - eps) * lo;
                let u = ((1.0 - eps) * hi + eps).min(1.0);
                if u - t >= eps {
                    return (t, u);
                }
            }
        }
    }
}

fn draw_observation(target: TargetDistribution, scheme: ObservationScheme, rng: &mut StreamRng) -> CensoredObservation {
    let x = target.quantile(rng.gen());
    let (t, u) = draw_observation_pair(scheme, rng);
    let delta = censor_indicator(x, t, u).expect("draw_observation_pair returns t < u");
    CensoredObservation { t, u, delta }
}

/// `n` independent observations; bit-for-bit reproducible from `seed`.
pub fn generate_dataset(target: TargetDistribution, scheme: ObservationScheme, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::arg("n must be at least 1"));
    }
    target.validate()?;
    if let ObservationScheme::Separated(eps) = scheme {
        ObservationScheme::separated(eps)?;
    }
    let mut rng = rng::stream(seed);
    let observations = (0..n).map(|_| draw_observation(target, scheme, &mut rng)).collect();
    Ok(Dataset { observations, seed, scheme, target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_examples() {
        assert_eq!(eval_target(TargetDistribution::Uniform01, 0.5).unwrap(), (0.5, 1.0));
        assert_eq!(eval_target(TargetDistribution::PowerDecay(4), 0.0).unwrap(), (0.0, 4.0));
        let (f, d) = eval_target(TargetDistribution::PowerDecay(2), 0.5).unwrap();
        assert!((f - 0.75).abs() < 1e-15 && (d - 1.0).abs() < 1e-15);
        assert!(matches!(eval_target(TargetDistribution::Uniform01, 1.5), Err(Error::Domain(_))));
        assert!(matches!(eval_target(TargetDistribution::Uniform01, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn target_density_integrates_to_one() {
        for dist in [TargetDistribution::Uniform01, TargetDistribution::PowerDecay(2), TargetDistribution::PowerDecay(4)] {
            let m = 100_000;
            let s: f64 = (0..m).map(|i| dist.pdf((i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
            assert!((s - 1.0).abs() < 1e-8, "{dist}: {s}");
            assert_eq!(dist.cdf(0.0), 0.0);
            assert_eq!(dist.cdf(1.0), 1.0);
            for p in [0.1, 0.37, 0.9] {
                assert!((dist.cdf(dist.quantile(p)) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scheme_examples() {
        assert_eq!(scheme_density(ObservationScheme::NonSeparated, 0.3, 0.7).0, 2.0);
        let sep = ObservationScheme::separated(0.1).unwrap();
        assert_eq!(scheme_density(sep, 0.3, 0.35).0, 0.0);
        assert!((scheme_density(sep, 0.3, 0.7).0 - 2.0 / 0.81).abs() < 1e-12);
        assert!(ObservationScheme::separated(0.5).is_err());
    }

    #[test]
    fn scheme_density_mass_and_marginals() {
        let m = 800;
        for s in [ObservationScheme::NonSeparated, ObservationScheme::Separated(0.1), ObservationScheme::Separated(0.3)] {
            let mut total = 0.0;
            let mut marg_err: f64 = 0.0;
            for i in 0..m {
                let t = (i as f64 + 0.5) / m as f64;
                let mut row = 0.0;
                for j in 0..m {
                    let u = (j as f64 + 0.5) / m as f64;
                    row += s.density(t, u);
                }
                row /= m as f64;
                total += row / m as f64;
                marg_err = marg_err.max((row - s.g1(t)).abs());
            }
            assert!((total - 1.0).abs() < 1e-2, "{s}: {total}");
            assert!(marg_err < 0.05, "{s}: {marg_err}");
        }
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(censor_indicator(0.2, 0.3, 0.7).unwrap().indicators(), [1, 0, 0]);
        assert_eq!(censor_indicator(0.5, 0.3, 0.7).unwrap().indicators(), [0, 1, 0]);
        assert_eq!(censor_indicator(0.9, 0.3, 0.7).unwrap().indicators(), [0, 0, 1]);
        assert_eq!(censor_indicator(0.7, 0.3, 0.7).unwrap(), Position::Interval);
        assert!(censor_indicator(0.5, 0.7, 0.7).is_err());
        assert!(censor_indicator(0.5, 0.8, 0.7).is_err());
    }

    #[test]
    fn separated_pairs_respect_gap() {
        let mut rng = rng::stream(3);
        let s = ObservationScheme::Separated(0.1);
        for _ in 0..100_000 {
            let (t, u) = draw_observation_pair(s, &mut rng);
            assert!(u - t >= 0.1 && t >= 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn pair_means_nonseparated() {
        // E T = 1/3, E U = 2/3; sd of each coordinate is sqrt(1/18).
        let mut rng = rng::stream(11);
        let n = 1_000_000;
        let (mut st, mut su) = (0.0, 0.0);
        for _ in 0..n {
            let (t, u) = draw_observation_pair(ObservationScheme::NonSeparated, &mut rng);
            st += t;
            su += u;
        }
        let band = 3.0 * (1.0f64 / 18.0).sqrt() / (n as f64).sqrt();
        assert!((st / n as f64 - 1.0 / 3.0).abs() < band);
        assert!((su / n as f64 - 2.0 / 3.0).abs() < band);
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 5, 42).unwrap();
        let b = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 10, 43).unwrap();
        let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 10, 44).unwrap();
        assert_ne!(c.observations, d.observations);
        assert!(generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 0, 1).is_err());
    }

    #[test]
    fn indicator_frequencies() {
        let n = 1_000_000;
        let band = |p: f64| 3.0 * (p * (1.0 - p) / n as f64).sqrt();

        // P(δ₁) = ∫ t g₁(t) dt = 1/3
        let ds = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, n, 5).unwrap();
        let p1 = ds.observations.iter().filter(|o| o.delta == Position::Left).count() as f64 / n as f64;
        assert!((p1 - 1.0 / 3.0).abs() < band(1.0 / 3.0), "{p1}");

        // P(δ₂) = E(U - T) under the ε-triangle, by midpoint double integral.
        let s = ObservationScheme::Separated(0.1);
        let m = 1000;
        let mut expected = 0.0;
        for i in 0..m {
            for j in 0..m {
                let t = (i as f64 + 0.5) / m as f64;
                let u = (j as f64 + 0.5) / m as f64;
                expected += s.density(t, u) * (u - t);
            }
        }
        expected /= (m * m) as f64;
        let ds = generate_dataset(TargetDistribution::Uniform01, s, n, 6).unwrap();
        let p2 = ds.observations.iter().filter(|o| o.delta == Position::Interval).count() as f64 / n as f64;
        // midpoint error on the discontinuous boundary is O(1/m)
        assert!((p2 - expected).abs() < band(expected) + 2e-3, "{p2} vs {expected}");
    }

    #[test]
    fn inverse_cdf_passes_ks_band() {
        let n = 100_000;
        for dist in [TargetDistribution::Uniform01, TargetDistribution::PowerDecay(4)] {
            let mut rng = rng::stream(99);
            let mut xs: Vec<f64> = (0..n).map(|_| dist.quantile(rng.gen())).collect();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = dist.cdf(x);
                    (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            // 99% Kolmogorov critical value 1.628 / sqrt(n)
            assert!(d < 1.628 / (n as f64).sqrt(), "{dist}: D = {d}");
        }
    }

    #[test]
    fn generated_observations_are_valid() {
        for s in [ObservationScheme::NonSeparated, ObservationScheme::Separated(0.2)] {
            let ds = generate_dataset(TargetDistribution::PowerDecay(2), s, 10_000, 8).unwrap();
            for o in &ds.observations {
                assert!(o.t < o.u && o.u - o.t >= s.min_gap());
                assert_eq!(o.delta.indicators().iter().sum::<u8>(), 1);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("uniform".parse::<TargetDistribution>().unwrap(), TargetDistribution::Uniform01);
        assert_eq!("pow4".parse::<TargetDistribution>().unwrap(), TargetDistribution::PowerDecay(4));
        assert!("pow0".parse::<TargetDistribution>().is_err());
        assert!("normal".parse::<TargetDistribution>().is_err());
    }
}
