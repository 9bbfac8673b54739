//! Seeded Monte Carlo experiments.
//!
//! Replication `r` at sample size `n` always uses the dataset seeded by
//! `derive_seed2(master, n, r)`. Results go into per-replication slots and are
//! aggregated in index order, so the output does not depend on the number of
//! worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::asymptotics::{birge_report, mle_asymptotic_mse, CHERNOFF_VAR_2Z};
use crate::birge::{birge_estimate_k, default_k, optimal_c};
use crate::error::{Error, Result};
use crate::inteq::{theoretical_variances, DEFAULT_GRID};
use crate::model::{generate_dataset, ObservationScheme, TargetDistribution};
use crate::npmle::{npmle_icm_with, IcmOptions};
use crate::rng::derive_seed2;
use crate::smle::{default_bandwidth, SmleConfig, SmoothedMle};

/// Largest tolerated fraction of failed replications per row.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Birge,
    Mle,
    Smle,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Birge => "birge",
            Estimator::Mle => "mle",
            Estimator::Smle => "smle",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "birge" => Ok(Estimator::Birge),
            "mle" => Ok(Estimator::Mle),
            "smle" => Ok(Estimator::Smle),
            other => Err(Error::Parse(format!("unknown estimator '{other}' (expected birge, mle or smle)"))),
        }
    }
}

/// Factor applied to mean squared errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// `(n log n)^{2/3}`
    NLogNTwoThirds,
    /// `n^{2/3}`
    NTwoThirds,
    /// `n`
    Linear,
}

impl Scaling {
    pub fn factor(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Scaling::NLogNTwoThirds => (nf * nf.ln()).powf(2.0 / 3.0),
            Scaling::NTwoThirds => nf.powf(2.0 / 3.0),
            Scaling::Linear => nf,
        }
    }

    pub fn for_scheme(scheme: ObservationScheme) -> Self {
        if scheme.is_separated() {
            Scaling::NTwoThirds
        } else {
            Scaling::NLogNTwoThirds
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetDistribution,
    pub scheme: ObservationScheme,
    pub t0s: Vec<f64>,
    pub ns: Vec<usize>,
    /// Replications per entry of `ns`.
    pub reps: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    pub scaling: Scaling,
    /// Require `t0 ∈ [b_n, 1 - b_n]` for the SMLE.
    pub smle_boundary_check: bool,
}

impl ExperimentConfig {
    pub fn new(
        target: TargetDistribution,
        scheme: ObservationScheme,
        t0s: Vec<f64>,
        ns: Vec<usize>,
        reps: usize,
        estimators: Vec<Estimator>,
        master_seed: u64,
    ) -> Self {
        let reps = vec![reps; ns.len()];
        ExperimentConfig {
            target,
            scheme,
            t0s,
            ns,
            reps,
            estimators,
            master_seed,
            scaling: Scaling::for_scheme(scheme),
            smle_boundary_check: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if let ObservationScheme::Separated(eps) = self.scheme {
            ObservationScheme::separated(eps)?;
        }
        if self.t0s.is_empty() || self.ns.is_empty() || self.estimators.is_empty() {
            return Err(Error::arg("t0 list, n list and estimators must be non-empty"));
        }
        if let Some(t) = self.t0s.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::arg(format!("t0 = {t} must lie in (0,1)")));
        }
        if self.reps.len() != self.ns.len() || self.reps.contains(&0) {
            return Err(Error::arg("need at least one replication for every n"));
        }
        if self.ns.iter().any(|&n| n < 2) {
            return Err(Error::arg("sample sizes must be at least 2"));
        }
        if self.scaling != Scaling::Linear && self.scaling != Scaling::for_scheme(self.scheme) {
            return Err(Error::arg("scaling does not match the observation scheme"));
        }
        Ok(())
    }
}

/// Aggregated result for one `(n, t0, estimator)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub t0: f64,
    pub estimator: String,
    pub scaled_mse: f64,
    pub scaled_var: f64,
    pub scaled_bias_sq: f64,
    pub mc_standard_error: f64,
    pub reps: usize,
    pub failures: usize,
}

/// Per-replication estimates for one cell, `None` for failed replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCell {
    pub n: usize,
    pub t0: f64,
    pub estimator: Estimator,
    pub truth: f64,
    pub estimates: Vec<Option<f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn check_failures(n: usize, t0: f64, label: &str, failures: usize, total: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_RATE * total as f64 || failures == total {
        return Err(Error::numeric(format!(
            "{label} failed in {failures} of {total} replications at n = {n}, t0 = {t0}"
        )));
    }
    Ok(())
}

/// MSE, variance and squared bias (population divisor) of the errors in `cell`,
/// multiplied by `factor`.
pub fn aggregate(cell: &RawCell, factor: f64) -> Result<TableRow> {
    let errors: Vec<f64> = cell.estimates.iter().flatten().map(|v| v - cell.truth).collect();
    let failures = cell.estimates.len() - errors.len();
    let label = cell.estimator.to_string();
    check_failures(cell.n, cell.t0, &label, failures, cell.estimates.len())?;
    let r = errors.len() as f64;
    let bias = mean(&errors);
    let var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / r;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    Ok(TableRow {
        n: cell.n,
        t0: cell.t0,
        estimator: label,
        scaled_mse: factor * mean(&sq),
        scaled_var: factor * var,
        scaled_bias_sq: factor * bias * bias,
        mc_standard_error: factor * sample_sd(&sq) / r.sqrt(),
        reps: errors.len(),
        failures,
    })
}

/// `MSE(num)/MSE(den)` over replications where both succeeded, split as
/// `var(num)/MSE(den) + bias²(num)/MSE(den)`; the standard error is by the
/// delta method.
pub fn ratio_row(num: &RawCell, den: &RawCell) -> Result<TableRow> {
    if num.estimates.len() != den.estimates.len() || num.n != den.n || num.t0 != den.t0 {
        return Err(Error::arg("ratio of cells from different experiments"));
    }
    let pairs: Vec<(f64, f64)> = num
        .estimates
        .iter()
        .zip(&den.estimates)
        .filter_map(|(a, b)| Some((a.as_ref()? - num.truth, b.as_ref()? - den.truth)))
        .collect();
    let label = format!("{}/{}", num.estimator, den.estimator);
    let failures = num.estimates.len() - pairs.len();
    check_failures(num.n, num.t0, &label, failures, num.estimates.len())?;
    let r = pairs.len() as f64;
    let a: Vec<f64> = pairs.iter().map(|p| p.0 * p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1 * p.1).collect();
    let (ma, mb) = (mean(&a), mean(&b));
    if !(mb > 0.0) {
        return Err(Error::numeric(format!("{} has zero MSE at n = {}, t0 = {}", den.estimator, den.n, den.t0)));
    }
    let ratio = ma / mb;
    let bias = pairs.iter().map(|p| p.0).sum::<f64>() / r;
    let var = pairs.iter().map(|p| (p.0 - bias).powi(2)).sum::<f64>() / r;
    let se = if pairs.len() < 2 {
        0.0
    } else {
        let d = r - 1.0;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / d;
        let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / d;
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / d;
        ((va - 2.0 * ratio * cov + ratio * ratio * vb).max(0.0) / r).sqrt() / mb
    };
    Ok(TableRow {
        n: num.n,
        t0: num.t0,
        estimator: label,
        scaled_mse: ratio,
        scaled_var: var / mb,
        scaled_bias_sq: bias * bias / mb,
        mc_standard_error: se,
        reps: pairs.len(),
        failures,
    })
}

/// All per-replication estimates, ordered by `n`, then `t0`, then estimator.
pub fn run_raw(config: &ExperimentConfig) -> Result<Vec<RawCell>> {
    config.validate()?;
    let wants = |e: Estimator| config.estimators.contains(&e);
    let mut cells = Vec::new();
    for (&n, &reps) in config.ns.iter().zip(&config.reps) {
        let birge_k: Vec<usize> = if wants(Estimator::Birge) {
            config
                .t0s
                .iter()
                .map(|&t0| default_k(n, optimal_c(t0, config.target, config.scheme)?, config.scheme))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let smle = if wants(Estimator::Smle) {
            let b = default_bandwidth(n);
            if config.smle_boundary_check {
                if let Some(t) = config.t0s.iter().find(|&&t| t < b || t > 1.0 - b) {
                    return Err(Error::arg(format!("t0 = {t} lies within the SMLE bandwidth {b} of the boundary")));
                }
            }
            Some(SmleConfig::new(b)?)
        } else {
            None
        };
        let need_mle = wants(Estimator::Mle) || wants(Estimator::Smle);
        // slot[rep][t0 * estimators + e]
        let slots: Vec<Vec<Option<f64>>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let k = config.estimators.len();
                let mut out = vec![None; config.t0s.len() * k];
                let seed = derive_seed2(config.master_seed, n as u64, rep as u64);
                let Ok(data) = generate_dataset(config.target, config.scheme, n, seed) else {
                    return out;
                };
                let mle = if need_mle {
                    npmle_icm_with(&data.observations, IcmOptions::default()).ok().map(|r| r.estimate)
                } else {
                    None
                };
                let smoothed = match (&mle, smle) {
                    (Some(m), Some(c)) => Some(SmoothedMle::new(m, c)),
                    _ => None,
                };
                for (ti, &t0) in config.t0s.iter().enumerate() {
                    for (ei, e) in config.estimators.iter().enumerate() {
                        out[ti * k + ei] = match e {
                            Estimator::Birge => birge_estimate_k(&data.observations, t0, birge_k[ti]).ok(),
                            Estimator::Mle => mle.as_ref().map(|m| m.eval(t0)),
                            Estimator::Smle => smoothed.as_ref().map(|s| s.eval(t0)),
                        }
                        .filter(|v| v.is_finite());
                    }
                }
                out
            })
            .collect();
        for (ti, &t0) in config.t0s.iter().enumerate() {
            let truth = config.target.cdf(t0);
            for (ei, &estimator) in config.estimators.iter().enumerate() {
                let idx = ti * config.estimators.len() + ei;
                let estimates = slots.iter().map(|s| s[idx]).collect();
                cells.push(RawCell { n, t0, estimator, truth, estimates });
            }
        }
    }
    Ok(cells)
}

/// One row per `(n, t0, estimator)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TableRow>> {
    let scaling = config.scaling;
    run_raw(config)?.iter().map(|c| aggregate(c, scaling.factor(c.n))).collect()
}

/// Row of a replicated table, with the asymptotic value it is compared to.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCsvRow {
    pub table: u32,
    pub row: TableRow,
    pub asymptotic_ref: Option<f64>,
}

pub const TABLE_IDS: std::ops::RangeInclusive<u32> = 1..=13;
pub const DEFAULT_MASTER_SEED: u64 = 20_100_521;

const STANDARD_NS: [usize; 4] = [1000, 2500, 5000, 10_000];
const STANDARD_T0: [f64; 4] = [0.3, 0.4, 0.5, 0.6];
const SEPARATION: f64 = 0.1;

/// Replications at sample size `n` when the full-scale count `base` is scaled
/// by `scale`. Below full scale, `n ≥ 5000` runs a quarter of the smaller sizes.
pub fn scaled_reps(n: usize, scale: f64, base: usize) -> usize {
    let b = if scale < 1.0 && n >= 5000 { base / 4 } else { base };
    ((b as f64 * scale).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Mse,
    Var,
    BiasSq,
}

fn scheme_for(table: u32) -> ObservationScheme {
    if table <= 5 {
        ObservationScheme::NonSeparated
    } else {
        ObservationScheme::Separated(SEPARATION)
    }
}

fn standard_config(target: TargetDistribution, scheme: ObservationScheme, estimators: Vec<Estimator>, scale: f64, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(target, scheme, STANDARD_T0.to_vec(), STANDARD_NS.to_vec(), 1, estimators, seed);
    c.reps = STANDARD_NS.iter().map(|&n| scaled_reps(n, scale, 10_000)).collect();
    c
}

fn reference(q: Quantity, e: Estimator, t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<Option<f64>> {
    Ok(match e {
        Estimator::Birge => {
            let r = birge_report(t0, optimal_c(t0, target, scheme)?, target, scheme)?;
            Some(match q {
                Quantity::Mse => r.mse,
                Quantity::Var => r.variance,
                Quantity::BiasSq => r.bias_sq(),
            })
        }
        Estimator::Mle if q != Quantity::BiasSq => Some(mle_asymptotic_mse(t0, target, scheme, CHERNOFF_VAR_2Z)?),
        _ => None,
    })
}

fn decomposition_table(table: u32, q: Quantity, target: TargetDistribution, scale: f64, seed: u64) -> Result<Vec<TableCsvRow>> {
    let scheme = scheme_for(table);
    let config = standard_config(target, scheme, vec![Estimator::Birge, Estimator::Mle], scale, seed);
    run_raw(&config)?
        .iter()
        .map(|c| {
            Ok(TableCsvRow {
                table,
                row: aggregate(c, config.scaling.factor(c.n))?,
                asymptotic_ref: reference(q, c.estimator, c.t0, target, scheme)?,
            })
        })
        .collect()
}

fn ratio_table(table: u32, targets: &[TargetDistribution], scale: f64, seed: u64) -> Result<Vec<TableCsvRow>> {
    let scheme = scheme_for(table);
    let mut rows = Vec::new();
    for &target in targets {
        let config = standard_config(target, scheme, vec![Estimator::Smle, Estimator::Mle], scale, seed);
        let raw = run_raw(&config)?;
        for pair in raw.chunks(2) {
            let mut row = ratio_row(&pair[0], &pair[1])?;
            if targets.len() > 1 {
                row.estimator = format!("{}[{}]", row.estimator, target);
            }
            rows.push(TableCsvRow { table, row, asymptotic_ref: None });
        }
    }
    Ok(rows)
}

const TABLE1_T: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn smle_variance_table(scale: f64, seed: u64) -> Result<Vec<TableCsvRow>> {
    let (target, scheme, n) = (TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 1000);
    let mut config =
        ExperimentConfig::new(target, scheme, TABLE1_T.to_vec(), vec![n], scaled_reps(n, scale, 10_000), vec![Estimator::Smle], seed);
    config.scaling = Scaling::Linear;
    config.smle_boundary_check = false;
    let refs = theoretical_variances(target, scheme, &TABLE1_T, default_bandwidth(n), DEFAULT_GRID)?;
    run_experiment(&config)?
        .into_iter()
        .zip(refs)
        .map(|(row, r)| Ok(TableCsvRow { table: 1, row, asymptotic_ref: Some(r) }))
        .collect()
}

fn huge_sample_table(scale: f64, seed: u64) -> Result<Vec<TableCsvRow>> {
    let scheme = ObservationScheme::Separated(SEPARATION);
    let ns = vec![1_000_000, 10_000_000];
    let mut rows = Vec::new();
    for target in [TargetDistribution::Uniform01, TargetDistribution::PowerDecay(4)] {
        let mut config = ExperimentConfig::new(target, scheme, vec![0.3], ns.clone(), 1, vec![Estimator::Birge], seed);
        config.reps = ns.iter().map(|_| ((1000.0 * scale).round() as usize).max(1)).collect();
        let reference = reference(Quantity::Mse, Estimator::Birge, 0.3, target, scheme)?;
        for mut row in run_experiment(&config)? {
            row.estimator = format!("birge[{}]", target);
            rows.push(TableCsvRow { table: 9, row, asymptotic_ref: reference });
        }
    }
    Ok(rows)
}

/// The configuration behind table `table` with replications scaled by `scale`.
pub fn replicate_table(table: u32, scale: f64, seed: u64) -> Result<Vec<TableCsvRow>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::arg(format!("scale {scale} must be positive")));
    }
    let uniform = TargetDistribution::Uniform01;
    let pow4 = TargetDistribution::PowerDecay(4);
    match table {
        1 => smle_variance_table(scale, seed),
        2 | 6 => decomposition_table(table, Quantity::Mse, uniform, scale, seed),
        3 | 7 => decomposition_table(table, Quantity::Var, uniform, scale, seed),
        4 | 8 => decomposition_table(table, Quantity::BiasSq, uniform, scale, seed),
        5 => ratio_table(5, &[uniform], scale, seed),
        9 => huge_sample_table(scale, seed),
        10 => decomposition_table(10, Quantity::Mse, pow4, scale, seed),
        11 => decomposition_table(11, Quantity::Var, pow4, scale, seed),
        12 => decomposition_table(12, Quantity::BiasSq, pow4, scale, seed),
        13 => ratio_table(13, &[uniform, pow4], scale, seed),
        other => Err(Error::arg(format!("table id {other} is not in 1..=13"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(estimators: Vec<Estimator>, reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            TargetDistribution::Uniform01,
            ObservationScheme::NonSeparated,
            vec![0.4, 0.5],
            vec![200],
            reps,
            estimators,
            seed,
        )
    }

    #[test]
    fn single_rep_has_no_variance() {
        let rows = run_experiment(&small(vec![Estimator::Mle, Estimator::Birge], 1, 3)).unwrap();
        for r in rows {
            assert_eq!(r.scaled_var, 0.0);
            assert!((r.scaled_mse - r.scaled_bias_sq).abs() <= 1e-12 * r.scaled_mse.max(1.0));
        }
    }

    #[test]
    fn decomposition_identity() {
        let rows = run_experiment(&small(vec![Estimator::Birge, Estimator::Mle, Estimator::Smle], 200, 5)).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows {
            assert!((r.scaled_mse - r.scaled_var - r.scaled_bias_sq).abs() < 1e-9);
            assert_eq!((r.reps, r.failures), (200, 0));
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let c = small(vec![Estimator::Birge, Estimator::Mle, Estimator::Smle], 64, 11);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_experiment(&c)).unwrap();
        let b = four.install(|| run_experiment(&c)).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn standard_error_halves_with_four_times_the_reps() {
        let se = |reps| run_experiment(&small(vec![Estimator::Mle], reps, 2)).unwrap()[1].mc_standard_error;
        let ratio = se(400) / se(1600);
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn ratio_rows_are_consistent() {
        let raw = run_raw(&small(vec![Estimator::Smle, Estimator::Mle], 100, 7)).unwrap();
        let row = ratio_row(&raw[0], &raw[1]).unwrap();
        let a = aggregate(&raw[0], 1.0).unwrap();
        let b = aggregate(&raw[1], 1.0).unwrap();
        assert!((row.scaled_mse - a.scaled_mse / b.scaled_mse).abs() < 1e-12);
        assert!((row.scaled_mse - row.scaled_var - row.scaled_bias_sq).abs() < 1e-12);
        assert!(row.mc_standard_error > 0.0);
        assert_eq!(row.estimator, "smle/mle");
    }

    #[test]
    fn failures_are_counted_and_abort() {
        let mut estimates = vec![Some(0.5); 99];
        estimates.push(None);
        let cell = RawCell { n: 10, t0: 0.5, estimator: Estimator::Mle, truth: 0.5, estimates };
        assert_eq!(aggregate(&cell, 1.0).unwrap().failures, 1);
        let mut bad = cell.clone();
        bad.estimates[0] = None;
        assert!(aggregate(&bad, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = small(vec![Estimator::Mle], 10, 1);
        c.t0s = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = small(vec![Estimator::Mle], 10, 1);
        c.scaling = Scaling::NTwoThirds;
        assert!(c.validate().is_err());
        let mut c = small(vec![Estimator::Smle], 10, 1);
        c.t0s = vec![0.1];
        assert!(run_experiment(&c).is_err());
        assert!(replicate_table(14, 0.1, 1).is_err());
        assert!(replicate_table(2, 0.0, 1).is_err());
    }

    #[test]
    fn rep_policy() {
        assert_eq!(scaled_reps(1000, 0.2, 10_000), 2000);
        assert_eq!(scaled_reps(2500, 0.2, 10_000), 2000);
        assert_eq!(scaled_reps(5000, 0.2, 10_000), 500);
        assert_eq!(scaled_reps(10_000, 1.0, 10_000), 10_000);
        assert_eq!(scaled_reps(1000, 1e-9, 10_000), 1);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in [Estimator::Birge, Estimator::Mle, Estimator::Smle] {
            assert_eq!(e.to_string().parse::<Estimator>().unwrap(), e);
        }
        assert!("npmle".parse::<Estimator>().is_err());
    }
}
