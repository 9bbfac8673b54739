//! Browser demo. The plain functions below do the work and are tested
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg`.

use wasm_bindgen::prelude::*;

use censcope::asymptotics::{birge_report, mle_asymptotic_mse, optimal_birge_c, CHERNOFF_VAR_2Z};
use censcope::birge::{birge_curve, build_partition, default_k, optimal_c};
use censcope::inteq::{theta_variance, GridModel, PhiProblem, PhiSolver};
use censcope::npmle::{npmle_icm_with, IcmOptions};
use censcope::smle::{smle_curve, SmleConfig};
use censcope::{generate_dataset, ObservationScheme, TargetDistribution};

pub const CURVE_POINTS: usize = 201;

pub fn parse_model(model: &str, scheme: &str, eps: f64) -> Result<(TargetDistribution, ObservationScheme), String> {
    let target: TargetDistribution = model.parse().map_err(|e: censcope::Error| e.to_string())?;
    let scheme = match scheme {
        "nonsep" => ObservationScheme::NonSeparated,
        "sep" => ObservationScheme::separated(eps).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown scheme `{other}`")),
    };
    Ok((target, scheme))
}

/// Truth and the three estimators on a common grid of [0,1].
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Curves {
    grid: Vec<f64>,
    truth: Vec<f64>,
    mle: Vec<f64>,
    smle: Vec<f64>,
    birge: Vec<f64>,
    bins: usize,
    bandwidth: f64,
}

#[wasm_bindgen]
impl Curves {
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    pub fn mle(&self) -> Vec<f64> {
        self.mle.clone()
    }
    pub fn smle(&self) -> Vec<f64> {
        self.smle.clone()
    }
    pub fn birge(&self) -> Vec<f64> {
        self.birge.clone()
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

/// Simulates `n` observations and fits every estimator. The histogram
/// estimator uses the optimal binwidth at `t0`; `bandwidth <= 0` selects n^(-1/5).
pub fn compute_curves(
    model: &str,
    scheme: &str,
    eps: f64,
    n: usize,
    seed: u64,
    bandwidth: f64,
    t0: f64,
) -> Result<Curves, String> {
    let (target, scheme) = parse_model(model, scheme, eps)?;
    let data = generate_dataset(target, scheme, n, seed).map_err(|e| e.to_string())?;
    let fit = npmle_icm_with(&data.observations, IcmOptions::default()).map_err(|e| e.to_string())?;
    let config = if bandwidth > 0.0 { SmleConfig::new(bandwidth) } else { SmleConfig::for_sample_size(n) }
        .map_err(|e| e.to_string())?;
    let smoothed = smle_curve(&fit.estimate, &config, CURVE_POINTS);
    let grid: Vec<f64> = smoothed.iter().map(|p| p.0).collect();

    let c = optimal_c(t0, target, scheme).map_err(|e| e.to_string())?;
    let k = default_k(n, c, scheme).map_err(|e| e.to_string())?;
    if n < k {
        return Err(format!("{k} bins exceed the sample size"));
    }
    let cells = birge_curve(&data.observations, &build_partition(t0, k).map_err(|e| e.to_string())?);
    let birge = grid
        .iter()
        .map(|&x| cells.iter().find(|&&(l, r, _)| x >= l && (x < r || r >= 1.0)).map_or(f64::NAN, |c| c.2))
        .collect();

    Ok(Curves {
        truth: grid.iter().map(|&x| target.cdf(x)).collect(),
        mle: grid.iter().map(|&x| fit.estimate.eval(x)).collect(),
        smle: smoothed.iter().map(|p| p.1).collect(),
        birge,
        grid,
        bins: k,
        bandwidth: config.bandwidth(),
    })
}

/// phi(.; t, b) on the midpoint grid, followed by the asymptotic variance
/// as the last element.
pub fn compute_phi(model: &str, scheme: &str, eps: f64, t: f64, b: f64, m: usize) -> Result<Vec<f64>, String> {
    let (target, scheme) = parse_model(model, scheme, eps)?;
    let grid = GridModel::exact(target, scheme, m).map_err(|e| e.to_string())?;
    let phi = PhiSolver::new(&grid).and_then(|s| s.solve(t, b)).map_err(|e| e.to_string())?;
    let problem = PhiProblem::new(&grid, t, b).map_err(|e| e.to_string())?;
    let mut out = phi.values().to_vec();
    out.push(theta_variance(&phi, &problem));
    Ok(out)
}

/// Rows of (t0, histogram MSE constant, MLE MSE constant), flattened, for
/// `points` equispaced t0 in [lo, hi]. Points where a constant is undefined
/// are skipped.
pub fn compute_profile(model: &str, scheme: &str, eps: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    let (target, scheme) = parse_model(model, scheme, eps)?;
    if !(0.0 < lo && lo < hi && hi < 1.0) || points < 2 {
        return Err("need 0 < lo < hi < 1 and at least 2 points".into());
    }
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let t0 = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let birge = optimal_birge_c(t0, target, scheme).and_then(|c| birge_report(t0, c, target, scheme));
        let mle = mle_asymptotic_mse(t0, target, scheme, CHERNOFF_VAR_2Z);
        if let (Ok(b), Ok(m)) = (birge, mle) {
            out.extend([t0, b.mse, m]);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn curves(model: &str, scheme: &str, eps: f64, n: usize, seed: u64, bandwidth: f64, t0: f64) -> Result<Curves, JsError> {
    compute_curves(model, scheme, eps, n, seed, bandwidth, t0).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn phi(model: &str, scheme: &str, eps: f64, t: f64, b: f64, m: usize) -> Result<Vec<f64>, JsError> {
    compute_phi(model, scheme, eps, t, b, m).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn profile(model: &str, scheme: &str, eps: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    compute_profile(model, scheme, eps, lo, hi, points).map_err(|e| JsError::new(&e))
}
