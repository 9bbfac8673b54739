//! Birgé's histogram-type estimator of `F0(t0)`.
//!
//! `[0,1]` is cut into cells of width `1/K` arranged so that `t0` is a left
//! endpoint. Each other cell `k` yields a contrast `F̂^{(j,k)}` from the cell
//! frequencies, and the estimate is a weighted average of these contrasts with
//! weights decaying like `1/(1+|j-k|)`.

use crate::asymptotics::{a_b, optimal_birge_c, w_tilde};
use crate::error::{Error, Result};
use crate::model::{CensoredObservation, Dataset, ObservationScheme, Position, TargetDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// `K t0` integral: `K` equal cells.
    Equal,
    /// `K+1` cells on the lattice `t0 + m/K`; the outer two are shorter.
    Shifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirgePartition {
    boundaries: Vec<f64>,
    j_index: usize,
    k: usize,
    scheme: PartitionScheme,
}

impl BirgePartition {
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Cell whose left endpoint is `t0`.
    pub fn j_index(&self) -> usize {
        self.j_index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.boundaries[self.j_index]
    }

    pub fn left(&self, k: usize) -> f64 {
        self.boundaries[k]
    }

    /// Cell containing `x`; cells are `[t_k, t_{k+1})`, the last one closed.
    pub fn cell_of(&self, x: f64) -> usize {
        let p = self.boundaries.partition_point(|&b| b <= x);
        p.saturating_sub(1).min(self.cells() - 1)
    }
}

/// Partition of `[0,1]` with binwidth `1/K` having `t0` as a left endpoint.
pub fn build_partition(t0: f64, k: usize) -> Result<BirgePartition> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::arg(format!("t0 = {t0} must lie in (0,1)")));
    }
    if k < 2 {
        return Err(Error::arg(format!("K = {k} must be at least 2")));
    }
    let kf = k as f64;
    let pos = kf * t0;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-9 {
        let j = nearest as usize;
        let boundaries = (0..=k).map(|i| if i == j { t0 } else { i as f64 / kf }).collect();
        return Ok(BirgePartition { boundaries, j_index: j, k, scheme: PartitionScheme::Equal });
    }
    let below = pos.floor() as i64;
    let mut boundaries = vec![0.0];
    for m in -below..=(k as i64) {
        let b = t0 + m as f64 / kf;
        if b > 0.0 && b < 1.0 {
            boundaries.push(b);
        }
    }
    boundaries.push(1.0);
    let j_index = boundaries.iter().position(|&b| b == t0).expect("t0 is on the lattice");
    Ok(BirgePartition { boundaries, j_index, k, scheme: PartitionScheme::Shifted })
}

/// Cell frequencies. `q(j,k)` counts pairs with `T` in cell `j` and `U` in cell `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStatistics {
    pub n: Vec<u64>,
    pub m: Vec<u64>,
    pub n_prime: Vec<u64>,
    pub m_prime: Vec<u64>,
    q: Vec<u64>,
    q_prime: Vec<u64>,
    cells: usize,
}

impl CountStatistics {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn q(&self, j: usize, k: usize) -> u64 {
        self.q[j * self.cells + k]
    }

    pub fn q_prime(&self, j: usize, k: usize) -> u64 {
        self.q_prime[j * self.cells + k]
    }
}

pub fn count_statistics(observations: &[CensoredObservation], partition: &BirgePartition) -> CountStatistics {
    let c = partition.cells();
    let mut s = CountStatistics {
        n: vec![0; c],
        m: vec![0; c],
        n_prime: vec![0; c],
        m_prime: vec![0; c],
        q: vec![0; c * c],
        q_prime: vec![0; c * c],
        cells: c,
    };
    for o in observations {
        let (a, b) = (partition.cell_of(o.t), partition.cell_of(o.u));
        s.n[a] += 1;
        s.m[b] += 1;
        s.q[a * c + b] += 1;
        match o.delta {
            Position::Left => s.n_prime[a] += 1,
            Position::Interval => s.q_prime[a * c + b] += 1,
            Position::Right => s.m_prime[b] += 1,
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    /// Weight per cell; the entry for the reference cell is 0.
    pub w: Vec<f64>,
    /// Normaliser `W_j` (random weights) or its deterministic counterpart.
    pub big_w: f64,
}

impl WeightSet {
    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Unnormalised weight of cell `k` relative to the reference cell `j`.
fn raw_weight(counts: &CountStatistics, j: usize, k: usize, big_k: f64) -> f64 {
    if k > j {
        (counts.n[k] as f64).min(big_k * counts.q(j, k) as f64).sqrt() / (k - j + 1) as f64
    } else {
        (counts.m[k] as f64).min(big_k * counts.q(k, j) as f64).sqrt() / (j - k + 1) as f64
    }
}

/// Data-driven weights for reference cell `j`.
pub fn birge_weights_for(counts: &CountStatistics, j: usize, big_k: usize) -> WeightSet {
    let c = counts.cells();
    let kf = big_k as f64;
    let mut w: Vec<f64> = (0..c).map(|k| if k == j { 0.0 } else { raw_weight(counts, j, k, kf) }).collect();
    let big_w: f64 = w.iter().sum();
    if big_w > 0.0 {
        w.iter_mut().for_each(|x| *x /= big_w);
    } else {
        w.iter_mut().for_each(|x| *x = 0.0);
    }
    WeightSet { w, big_w }
}

/// Data-driven weights for the cell starting at `t0`.
pub fn birge_weights(counts: &CountStatistics, partition: &BirgePartition) -> WeightSet {
    birge_weights_for(counts, partition.j_index(), partition.k())
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// The contrast `F̂^{(j,k)}`, with any ratio over an empty cell taken as 0.
pub fn contrast(counts: &CountStatistics, j: usize, k: usize) -> f64 {
    if k > j {
        ratio(counts.n_prime[k], counts.n[k]) - ratio(counts.q_prime(j, k), counts.q(j, k))
    } else {
        1.0 - ratio(counts.m_prime[k], counts.m[k]) + ratio(counts.q_prime(k, j), counts.q(k, j))
    }
}

/// Estimate for the cell `j` of an existing partition.
pub fn birge_cell_value(counts: &CountStatistics, j: usize, big_k: usize) -> f64 {
    let w = birge_weights_for(counts, j, big_k);
    (0..counts.cells()).filter(|&k| k != j && w.w[k] > 0.0).map(|k| w.w[k] * contrast(counts, j, k)).sum()
}

/// Default number of bins: `⌊(n log n)^{1/3}/c⌋` (non-separated) or `⌊n^{1/3}/c⌋`.
pub fn default_k(n: usize, c: f64, scheme: ObservationScheme) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::arg(format!("binwidth constant c = {c} must be positive")));
    }
    let nf = n as f64;
    let base = if scheme.is_separated() { nf.cbrt() } else { (nf * nf.ln()).cbrt() };
    let k = (base / c).floor();
    if !(k >= 2.0) {
        return Err(Error::arg(format!("K = {k} from n = {n}, c = {c} is below 2")));
    }
    Ok(k as usize)
}

pub fn optimal_c(t0: f64, target: TargetDistribution, scheme: ObservationScheme) -> Result<f64> {
    optimal_birge_c(t0, target, scheme)
}

/// Birgé's estimate of `F0(t0)` at an explicit `K`.
pub fn birge_estimate_k(observations: &[CensoredObservation], t0: f64, k: usize) -> Result<f64> {
    if observations.len() < k {
        return Err(Error::arg(format!(
            "partition too fine: K = {k} exceeds the sample size {}",
            observations.len()
        )));
    }
    let p = build_partition(t0, k)?;
    let counts = count_statistics(observations, &p);
    Ok(birge_cell_value(&counts, p.j_index(), k))
}

/// Birgé's estimate of `F0(t0)`; `K` defaults to the asymptotically optimal
/// binwidth for the dataset's model.
pub fn birge_estimate(dataset: &Dataset, t0: f64, k_override: Option<usize>) -> Result<f64> {
    let k = match k_override {
        Some(k) => k,
        None => default_k(dataset.len(), optimal_c(t0, dataset.target, dataset.scheme)?, dataset.scheme)?,
    };
    birge_estimate_k(&dataset.observations, t0, k)
}

/// Piecewise-constant curve over the cells of `partition`: `(left, right, value)`.
pub fn birge_curve(observations: &[CensoredObservation], partition: &BirgePartition) -> Vec<(f64, f64, f64)> {
    let counts = count_statistics(observations, partition);
    let b = partition.boundaries();
    (0..partition.cells())
        .map(|j| (b[j], b[j + 1], birge_cell_value(&counts, j, partition.k())))
        .collect()
}

/// Deterministic approximations of the weights: proportional to `a(t_k)` or
/// `b(t_k)` over `(|k-j|+1) log n` (non-separated), or to
/// `√(h ∧ g)/(K W̃ |t_k - t0|)` (separated).
pub fn deterministic_weights(partition: &BirgePartition, scheme: ObservationScheme, n: usize) -> Result<WeightSet> {
    let j = partition.j_index();
    let t0 = partition.t0();
    let c = partition.cells();
    match scheme {
        ObservationScheme::NonSeparated => {
            if n < 2 {
                return Err(Error::arg("n must be at least 2"));
            }
            let (a0, b0) = a_b(t0, t0, scheme);
            let big_w = (a0 + b0) * (n as f64).ln() / 3.0;
            if !(big_w > 0.0) {
                return Err(Error::domain(format!("a(t0) + b(t0) vanishes at t0 = {t0}")));
            }
            let w = (0..c)
                .map(|k| {
                    let (a, b) = a_b(t0, partition.left(k), scheme);
                    match k.cmp(&j) {
                        std::cmp::Ordering::Greater => a / ((k - j + 1) as f64 * big_w),
                        std::cmp::Ordering::Less => b / ((j - k + 1) as f64 * big_w),
                        std::cmp::Ordering::Equal => 0.0,
                    }
                })
                .collect();
            Ok(WeightSet { w, big_w })
        }
        ObservationScheme::Separated(_) => {
            let wt = w_tilde(t0, scheme)?;
            let kf = partition.k() as f64;
            let w = (0..c)
                .map(|k| {
                    let tk = partition.left(k);
                    match k.cmp(&j) {
                        std::cmp::Ordering::Greater => {
                            scheme.density(t0, tk).min(scheme.g1(tk)).sqrt() / (kf * wt * (tk - t0))
                        }
                        std::cmp::Ordering::Less => scheme.density(tk, t0).min(scheme.g2(tk)).sqrt() / (kf * wt * (t0 - tk)),
                        std::cmp::Ordering::Equal => 0.0,
                    }
                })
                .collect();
            Ok(WeightSet { w, big_w: wt })
        }
    }
}
