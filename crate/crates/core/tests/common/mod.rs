//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use censcope::{CensoredObservation, Position};

/// The set `{x : observation i is consistent with X = x}` as a half-open `(lo, hi]`.
fn consistent_set(o: &CensoredObservation) -> (f64, f64) {
    match o.delta {
        Position::Left => (0.0, o.t),
        Position::Interval => (o.t, o.u),
        Position::Right => (o.u, 1.0),
    }
}

/// Maximum log-likelihood over all distributions putting mass in multiples
/// of `1/resolution` on the maximal-intersection cells of the data.
pub fn brute_force_max_loglik(obs: &[CensoredObservation], resolution: usize) -> f64 {
    let sets: Vec<(f64, f64)> = obs.iter().map(consistent_set).collect();
    let mut ends: Vec<f64> = vec![0.0, 1.0];
    for &(a, b) in &sets {
        ends.push(a);
        ends.push(b);
    }
    ends.sort_by(f64::total_cmp);
    ends.dedup();

    let mut masks: Vec<u32> = Vec::new();
    for w in ends.windows(2) {
        let mask = sets
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| w[0] >= a && w[1] <= b)
            .fold(0u32, |m, (i, _)| m | (1 << i));
        if mask != 0 {
            masks.push(mask);
        }
    }
    masks.sort_unstable();
    masks.dedup();
    let maximal: Vec<u32> = masks
        .iter()
        .copied()
        .filter(|&m| !masks.iter().any(|&o| o != m && o & m == m))
        .collect();

    let mut best = f64::NEG_INFINITY;
    let mut counts = vec![0usize; maximal.len()];
    enumerate(&mut counts, 0, resolution, &mut |c| {
        let ll: f64 = (0..obs.len())
            .map(|i| {
                let p: usize = maximal.iter().zip(c).filter(|(m, _)| *m & (1 << i) != 0).map(|(_, &k)| k).sum();
                (p as f64 / resolution as f64).ln()
            })
            .sum();
        if ll > best {
            best = ll;
        }
    });
    best
}

fn enumerate(counts: &mut [usize], pos: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        visit(counts);
        return;
    }
    for k in 0..=left {
        counts[pos] = k;
        enumerate(counts, pos + 1, left - k, visit);
    }
}
