//! Smoothed MLE: the NPMLE's jumps convolved with an integrated kernel.

use crate::error::{Error, Result};
use crate::isotonic::StepDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `K(u) = (35/32)(1-u²)³` on `[-1,1]`.
    #[default]
    Triweight,
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Triweight => {
                if u.abs() > 1.0 {
                    0.0
                } else {
                    let v = 1.0 - u * u;
                    35.0 / 32.0 * v * v * v
                }
            }
        }
    }

    /// `∫_{-∞}^u K`.
    pub fn integrated(&self, u: f64) -> f64 {
        match self {
            Kernel::Triweight => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    let u2 = u * u;
                    35.0 / 32.0 * u * (1.0 - u2 + u2 * u2 * (0.6 - u2 / 7.0)) + 0.5
                }
            }
        }
    }

    /// `∫ K²`.
    pub fn square_integral(&self) -> f64 {
        match self {
            Kernel::Triweight => 350.0 / 429.0,
        }
    }
}

pub fn kernel(u: f64) -> f64 {
    Kernel::Triweight.eval(u)
}

pub fn integrated_kernel(u: f64) -> f64 {
    Kernel::Triweight.integrated(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmleConfig {
    bandwidth: f64,
    kernel: Kernel,
}

impl SmleConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth < 0.5) {
            return Err(Error::arg(format!("bandwidth {bandwidth} must lie in (0, 1/2)")));
        }
        Ok(SmleConfig { bandwidth, kernel: Kernel::Triweight })
    }

    /// Bandwidth `n^{-1/5}`.
    pub fn for_sample_size(n: usize) -> Result<Self> {
        SmleConfig::new(default_bandwidth(n))
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
}

pub fn default_bandwidth(n: usize) -> f64 {
    (n as f64).powf(-0.2)
}

/// SMLE with the jumps of the underlying MLE extracted once.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMle {
    positions: Vec<f64>,
    masses: Vec<f64>,
    config: SmleConfig,
}

impl SmoothedMle {
    pub fn new(mle: &StepDistribution, config: SmleConfig) -> Self {
        let (positions, masses) = mle.jumps().unzip();
        SmoothedMle { positions, masses, config }
    }

    pub fn config(&self) -> SmleConfig {
        self.config
    }

    /// Jumps within one bandwidth of `t`; positions are sorted.
    fn window(&self, t: f64) -> std::ops::Range<usize> {
        let b = self.config.bandwidth;
        let lo = self.positions.partition_point(|&p| p < t - b);
        let hi = self.positions.partition_point(|&p| p <= t + b);
        lo..hi
    }

    pub fn eval(&self, t: f64) -> f64 {
        let b = self.config.bandwidth;
        let k = self.config.kernel;
        let r = self.window(t);
        let below: f64 = self.masses[..r.start].iter().sum();
        let near: f64 = r.clone().map(|i| self.masses[i] * k.integrated((t - self.positions[i]) / b)).sum();
        (below + near).min(1.0)
    }

    pub fn density(&self, t: f64) -> f64 {
        let b = self.config.bandwidth;
        let k = self.config.kernel;
        self.window(t).map(|i| self.masses[i] * k.eval((t - self.positions[i]) / b)).sum::<f64>() / b
    }
}

/// `Σ m · IK((t - p)/b)` over the jumps `(p, m)` of `mle`.
pub fn smle_eval(mle: &StepDistribution, t: f64, config: &SmleConfig) -> f64 {
    let b = config.bandwidth;
    mle.jumps().map(|(p, m)| m * config.kernel.integrated((t - p) / b)).sum()
}

/// `Σ m · K((t - p)/b) / b`.
pub fn smle_density(mle: &StepDistribution, t: f64, config: &SmleConfig) -> f64 {
    let b = config.bandwidth;
    mle.jumps().map(|(p, m)| m * config.kernel.eval((t - p) / b)).sum::<f64>() / b
}

/// `(t, F̃(t), f̃(t))` on `points` equally spaced points of `[0,1]`.
pub fn smle_curve(mle: &StepDistribution, config: &SmleConfig, points: usize) -> Vec<(f64, f64, f64)> {
    let s = SmoothedMle::new(mle, *config);
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| {
            let t = i as f64 / denom;
            (t, s.eval(t), s.density(t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_dataset, ObservationScheme, TargetDistribution};
    use crate::npmle::npmle_icm;
    use crate::quad::integrate;
    use proptest::prelude::*;

    fn point_mass(x: f64) -> StepDistribution {
        StepDistribution::new(vec![x], vec![1.0]).unwrap()
    }

    fn random_mle(seed: u64, n: usize) -> StepDistribution {
        let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, n, seed).unwrap();
        npmle_icm(&d, 1e-8, 5000).unwrap().estimate
    }

    #[test]
    fn kernel_integrals() {
        assert!((integrate(&kernel, -1.0, 1.0, 1e-13).unwrap() - 1.0).abs() < 1e-12);
        let sq = integrate(&|u| kernel(u).powi(2), -1.0, 1.0, 1e-13).unwrap();
        assert!((sq - 350.0 / 429.0).abs() < 1e-12);
        for u in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            let num = integrate(&kernel, -1.0, u, 1e-13).unwrap();
            assert!((integrated_kernel(u) - num).abs() < 1e-12);
        }
    }

    #[test]
    fn integrated_kernel_examples() {
        assert_eq!(integrated_kernel(-1.0), 0.0);
        assert_eq!(integrated_kernel(-3.0), 0.0);
        assert_eq!(integrated_kernel(2.0), 1.0);
        assert!((integrated_kernel(0.0) - 0.5).abs() < 1e-15);
        assert!((integrated_kernel(0.5) - (0.5 + 1759.0 / 4096.0)).abs() < 1e-12);
        assert!((integrated_kernel(1.0 - 1e-15) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smle_examples() {
        let c = SmleConfig::new(0.2).unwrap();
        assert!((smle_eval(&point_mass(0.5), 0.5, &c) - 0.5).abs() < 1e-15);
        assert_eq!(smle_eval(&point_mass(0.2), 0.9, &c), 1.0);
        let two = StepDistribution::new(vec![0.4, 0.6], vec![0.5, 1.0]).unwrap();
        assert_eq!(smle_eval(&two, 0.5, &SmleConfig::new(0.05).unwrap()), 0.5);
        assert!((smle_density(&point_mass(0.5), 0.5, &c) - 5.46875).abs() < 1e-12);
        assert_eq!(smle_density(&point_mass(0.5), 0.75, &c), 0.0);
    }

    #[test]
    fn bandwidth_range() {
        assert!(SmleConfig::new(0.0).is_err());
        assert!(SmleConfig::new(0.5).is_err());
        assert!(SmleConfig::new(0.7).is_err());
        assert!((SmleConfig::for_sample_size(1000).unwrap().bandwidth() - 0.251_188_643_150_958).abs() < 1e-12);
    }

    #[test]
    fn density_is_the_derivative() {
        for seed in 0..5 {
            let mle = random_mle(seed, 300);
            let c = SmleConfig::for_sample_size(300).unwrap();
            let s = SmoothedMle::new(&mle, c);
            let d = 1e-5;
            for i in 1..50 {
                let t = i as f64 / 50.0;
                let fd = (smle_eval(&mle, t + d, &c) - smle_eval(&mle, t - d, &c)) / (2.0 * d);
                assert!((fd - smle_density(&mle, t, &c)).abs() < 1e-6);
                assert!((s.density(t) - smle_density(&mle, t, &c)).abs() < 1e-12);
                assert!((s.eval(t) - smle_eval(&mle, t, &c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shrinking_bandwidth_recovers_the_step_function() {
        let mle = random_mle(2, 200);
        let t = 0.5 * (mle.knots()[40] + mle.knots()[41]);
        let gap = (t - mle.knots()[40]).min(mle.knots()[41] - t);
        let c = SmleConfig::new(0.9 * gap).unwrap();
        assert!((smle_eval(&mle, t, &c) - mle.eval(t)).abs() < 1e-12);
    }

    #[test]
    fn linear_in_the_masses() {
        let a = random_mle(3, 150);
        let b = random_mle(4, 150);
        let c = SmleConfig::new(0.2).unwrap();
        let lambda = 0.3;
        // mixture as a step function on the union of knots
        let mut knots: Vec<f64> = a.knots().iter().chain(b.knots()).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values: Vec<f64> = knots.iter().map(|&x| lambda * a.eval(x) + (1.0 - lambda) * b.eval(x)).collect();
        let mix = StepDistribution::new(knots, values).unwrap();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let lhs = smle_eval(&mix, t, &c);
            let rhs = lambda * smle_eval(&a, t, &c) + (1.0 - lambda) * smle_eval(&b, t, &c);
            assert!((lhs - rhs).abs() < 1e-14, "{t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn curve_export() {
        let mle = random_mle(1, 100);
        let curve = smle_curve(&mle, &SmleConfig::new(0.3).unwrap(), 11);
        assert_eq!(curve.len(), 11);
        assert_eq!((curve[0].0, curve[10].0), (0.0, 1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn monotone_and_in_unit_interval(seed in 0u64..10_000, n in 5usize..200, b in 0.01f64..0.49) {
            let mle = random_mle(seed, n);
            let s = SmoothedMle::new(&mle, SmleConfig::new(b).unwrap());
            let mut prev = 0.0;
            for i in 0..1000 {
                let v = s.eval(i as f64 / 999.0);
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v >= prev - 1e-15);
                prev = v;
            }
        }
    }
}
