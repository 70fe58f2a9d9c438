//! Statistical distances: binned and exact TV, 1-D Wasserstein-2, KS, and
//! the close-pair rate of a coupling.

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::rng::stream;
use crate::special::{integrate, normal_pdf, std_normal_cdf};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const DEFAULT_BINS: usize = 20;
/// Minimum samples per bin for a binned TV estimate.
pub const MIN_PER_BIN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub value: f64,
    pub ci95: (f64, f64),
    pub n: (usize, usize),
}

/// Edges of `bins` equal-mass bins of `a`, deduplicated. The outermost
/// edges are the sample extremes, so mass outside the range of `a` lands in
/// two extra overflow bins.
pub fn equal_mass_edges(a: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(sorted[0]);
    edges.extend((1..bins).map(|k| sorted[k * n / bins]));
    edges.push(sorted[n - 1].next_up());
    edges.dedup();
    edges
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

fn tv_counts(ca: &[usize], na: usize, cb: &[usize], nb: usize) -> f64 {
    0.5 * ca
        .iter()
        .zip(cb)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}

/// Half-L¹ distance between the histograms of `a` and `b` on equal-mass bins
/// of `a`, with a percentile bootstrap interval.
pub fn tv_binned(a: &[f64], b: &[f64], bins: usize, seed: u64) -> Result<DistanceReport> {
    if bins < 2 {
        return Err(invalid("bins", "need at least two bins"));
    }
    let needed = MIN_PER_BIN * bins;
    for len in [a.len(), b.len()] {
        if len < needed {
            return Err(Error::TooFewSamples { needed, got: len });
        }
    }
    let edges = equal_mass_edges(a, bins);
    let nb_bins = edges.len() + 1;
    let ia: Vec<usize> = a.iter().map(|&v| bin_of(&edges, v)).collect();
    let ib: Vec<usize> = b.iter().map(|&v| bin_of(&edges, v)).collect();
    let count = |idx: &[usize]| {
        let mut c = vec![0usize; nb_bins];
        for &i in idx {
            c[i] += 1;
        }
        c
    };
    let value = tv_counts(&count(&ia), a.len(), &count(&ib), b.len());
    let mut rng = stream(seed, 0);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut ca = vec![0usize; nb_bins];
            let mut cb = vec![0usize; nb_bins];
            for _ in 0..ia.len() {
                ca[ia[rng.random_range(0..ia.len())]] += 1;
            }
            for _ in 0..ib.len() {
                cb[ib[rng.random_range(0..ib.len())]] += 1;
            }
            tv_counts(&ca, a.len(), &cb, b.len())
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let lo = boots[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = boots[((0.975 * BOOTSTRAP_RESAMPLES as f64) as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    Ok(DistanceReport {
        value,
        ci95: (lo, hi),
        n: (a.len(), b.len()),
    })
}

/// Largest per-coordinate binned TV between two vector samples.
pub fn tv_binned_max(a: &[Vec<f64>], b: &[Vec<f64>], bins: usize, seed: u64) -> Result<DistanceReport> {
    let dim = a.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(invalid("a", "empty sample"));
    }
    let mut worst: Option<DistanceReport> = None;
    for c in 0..dim {
        let ca: Vec<f64> = a.iter().map(|v| v[c]).collect();
        let cb = b
            .iter()
            .map(|v| {
                ensure_dim(dim, v.len())?;
                Ok(v[c])
            })
            .collect::<Result<Vec<f64>>>()?;
        let r = tv_binned(&ca, &cb, bins, seed.wrapping_add(c as u64))?;
        if worst.is_none_or(|w| r.value > w.value) {
            worst = Some(r);
        }
    }
    Ok(worst.unwrap())
}

fn check_normalized(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Unnormalized { sum });
    }
    Ok(())
}

/// Exact TV between two probability tables on the same support.
pub fn tv_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    ensure_dim(p.len(), q.len())?;
    check_normalized(p)?;
    check_normalized(q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// For joints indexed `[y][x]`, returns `(E_{y~P}[TV(P(·|y), Q(·|y))],
/// 2·TV(P, Q))`. A `y` that `Q` never produces counts as conditional TV 1.
pub fn conditional_tv_check(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<(f64, f64)> {
    ensure_dim(p.len(), q.len())?;
    let flat_p: Vec<f64> = p.iter().flatten().copied().collect();
    let flat_q: Vec<f64> = q
        .iter()
        .zip(p)
        .map(|(qr, pr)| ensure_dim(pr.len(), qr.len()).map(|_| qr.clone()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let joint = tv_discrete(&flat_p, &flat_q)?;
    let mut lhs = 0.0;
    for (pr, qr) in p.iter().zip(q) {
        let py: f64 = pr.iter().sum();
        if py == 0.0 {
            continue;
        }
        let qy: f64 = qr.iter().sum();
        let cond = if qy == 0.0 {
            1.0
        } else {
            0.5 * pr.iter().zip(qr).map(|(a, b)| (a / py - b / qy).abs()).sum::<f64>()
        };
        lhs += py * cond;
    }
    Ok((lhs, 2.0 * joint))
}

/// TV between `N(0, β²)` and the same law truncated to `[-β_max, β_max]`,
/// by quadrature of the absolute density difference.
pub fn clipped_noise_tv(beta: f64, beta_max: f64) -> Result<f64> {
    if !(beta > 0.0) || !(beta_max > 0.0) {
        return Err(invalid("beta", "beta and beta_max must be positive"));
    }
    let c = beta_max / beta;
    let tail = std_normal_cdf(-c);
    let inside_mass = 1.0 - 2.0 * tail;
    // On the window the truncated density is φ/Z, so |φ/Z − φ| = φ·(2Φ(−c)/Z).
    let excess = 2.0 * tail / inside_mass;
    let inner = integrate(&|x| normal_pdf(x, 1.0), -c, c, 1e-13) * excess;
    // Outside the window only the untruncated law has mass; integrate unit
    // slices with tolerance relative to each slice.
    let mut outer = 0.0;
    for k in 0..40 {
        let a = c + k as f64;
        let tol = 1e-12 * normal_pdf(a, 1.0);
        if tol == 0.0 {
            break;
        }
        outer += integrate(&|x| normal_pdf(x, 1.0), a, a + 1.0, tol);
    }
    Ok(0.5 * (inner + 2.0 * outer))
}

/// Empirical Wasserstein-2 distance between two 1-D samples, via the
/// quantile coupling.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("a", "empty sample"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) as f64 / na as f64;
        let next_b = (j + 1) as f64 / nb as f64;
        let next = next_a.min(next_b);
        let diff = sa[i] - sb[j];
        acc += (next - u) * diff * diff;
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// One-sample KS statistic against `cdf`.
pub fn ks<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<f64> {
    if a.is_empty() {
        return Err(invalid("a", "empty sample"));
    }
    let mut s = a.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("a", "empty sample"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let v = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= v {
            i += 1;
        }
        while j < sb.len() && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic p-value of a two-sample KS statistic.
pub fn ks_two_sample_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Fraction of pairs farther apart than `tau` in Euclidean norm.
pub fn close_pair_rate(pairs: &[(Vec<f64>, Vec<f64>)], tau: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(invalid("pairs", "empty"));
    }
    let mut far = 0usize;
    for (x, y) in pairs {
        ensure_dim(x.len(), y.len())?;
        let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2.sqrt() > tau {
            far += 1;
        }
    }
    Ok(far as f64 / pairs.len() as f64)
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// Unbiased sample variance.
pub fn variance(a: &[f64]) -> f64 {
    let m = mean(a);
    a.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (a.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal;

    fn gauss(n: usize, shift: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0);
        (0..n).map(|_| shift + normal(&mut rng)).collect()
    }

    #[test]
    fn tv_binned_identical_and_disjoint() {
        let a = gauss(5000, 0.0, 1);
        assert_eq!(tv_binned(&a, &a, 20, 0).unwrap().value, 0.0);
        let b = gauss(5000, 100.0, 2);
        assert!(tv_binned(&a, &b, 20, 0).unwrap().value >= 0.98);
        assert!(matches!(tv_binned(&a[..100], &a, 20, 0), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn discrete_tv_checks_normalization() {
        assert_eq!(tv_discrete(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(tv_discrete(&[0.5, 0.4], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn conditional_check_extremes() {
        let p = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
        assert_eq!(conditional_tv_check(&p, &p).unwrap(), (0.0, 0.0));
        let p = vec![vec![0.5, 0.0], vec![0.5, 0.0]];
        let q = vec![vec![0.0, 0.5], vec![0.0, 0.5]];
        let (lhs, rhs) = conditional_tv_check(&p, &q).unwrap();
        assert_eq!(lhs, 1.0);
        assert!(rhs >= 1.0);
    }

    #[test]
    fn clipped_tv_matches_closed_form() {
        for c in [1.0, 2.0, 3.0, 6.0] {
            let v = clipped_noise_tv(0.1, 0.1 * c).unwrap();
            let exact = 2.0 * std_normal_cdf(-c);
            assert!((v / exact - 1.0).abs() < 1e-9, "{c}: {v} vs {exact}");
        }
        assert!(clipped_noise_tv(1.0, 10.0).unwrap() <= 1e-20);
    }

    #[test]
    fn w2_of_shift_is_shift() {
        let a = gauss(1000, 0.0, 3);
        let b: Vec<f64> = a.iter().map(|v| v + 0.7).collect();
        assert!((w2_1d(&a, &b).unwrap() - 0.7).abs() < 1e-12);
        // Unequal sizes: {0,1} vs {0,0,1,1} coincide as laws.
        assert!(w2_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]).unwrap() < 1e-15);
    }

    #[test]
    fn ks_and_pairs() {
        let a = gauss(4000, 0.0, 4);
        assert!(ks(&a, std_normal_cdf).unwrap() < 1.63 / (4000f64).sqrt());
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let pairs = vec![(vec![1.0, 2.0], vec![1.0, 2.0]); 5];
        assert_eq!(close_pair_rate(&pairs, 0.1).unwrap(), 0.0);
    }
}
