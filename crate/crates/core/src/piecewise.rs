//! Continuous piecewise-linear approximations of one-dimensional smoothed
//! scores.
//!
//! The construction runs in three stages on the grid `γZ`: interpolate the
//! score at grid points, bridge intervals where the score is too large, and
//! hold the result constant far from the mean. With `γ = σ√κ` and `δ = κ²`
//! the result has `O(m₂/(σκ^{3/2}))` pieces and `L²` error `O(κ/σ²)`.

use crate::error::{invalid, Error, Result};
use crate::fmt::g17;
use crate::instance::LatticeTable;
use crate::rng::{normal, stream, uniform};
use crate::scores::{two_point_log_density, two_point_score, DiscreteGaussianSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Piece-count constant: `pieces ≤ C1·m₂/(σκ^{3/2})`.
pub const C1: f64 = 2.5;
/// Slope constant: `|slope| ≤ C2·ln(1/κ)/(σ²√κ)`.
pub const C2: f64 = 4.0;
/// Value constant: `|l| ≤ C3·ln(1/κ)/σ`.
pub const C3: f64 = 2.0;
/// Error constant: `E[(l − s)²] ≤ C4·κ/σ²`.
pub const C4: f64 = 10.0;

/// Points per interval when testing whether the score stays bounded there.
pub const SUP_GRID: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(invalid("knots", "need one value per knot and at least one knot"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("knots", "must be strictly increasing"));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) || !left_slope.is_finite() || !right_slope.is_finite() {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Self {
            knots,
            values,
            left_slope,
            right_slope,
        })
    }

    /// The linear map `a·x + b`, stored with a single knot at 0.
    pub fn linear(a: f64, b: f64) -> Self {
        Self {
            knots: vec![0.0],
            values: vec![b],
            left_slope: a,
            right_slope: a,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    pub fn pieces(&self) -> usize {
        self.knots.len() + 1
    }

    /// Slopes of all pieces, left to right.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.pieces());
        s.push(self.left_slope);
        for i in 0..self.knots.len() - 1 {
            s.push((self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i]));
        }
        s.push(self.right_slope);
        s
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0] + self.left_slope * (x - self.knots[0]);
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1] + self.right_slope * (x - self.knots[n - 1]);
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// `sup |l|`; infinite unless both end slopes vanish.
    pub fn max_abs_value(&self) -> f64 {
        if self.left_slope != 0.0 || self.right_slope != 0.0 {
            return f64::INFINITY;
        }
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Drops knots whose removal moves no original knot value by more than
    /// `tol`. End slopes are kept.
    pub fn simplify(&self, tol: f64) -> Self {
        let n = self.knots.len();
        if n <= 2 {
            return self.clone();
        }
        let (xs, vs) = (&self.knots, &self.values);
        let mut keep = vec![0usize];
        let mut anchor = 0usize;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut j = 1;
        while j < n {
            let dx = xs[j] - xs[anchor];
            let slope = (vs[j] - vs[anchor]) / dx;
            if slope < lo || slope > hi {
                // The segment anchor → j would miss an intermediate knot.
                let prev = j - 1;
                keep.push(prev);
                anchor = prev;
                lo = f64::NEG_INFINITY;
                hi = f64::INFINITY;
                continue;
            }
            lo = lo.max((vs[j] - tol - vs[anchor]) / dx);
            hi = hi.min((vs[j] + tol - vs[anchor]) / dx);
            j += 1;
        }
        if *keep.last().unwrap() != n - 1 {
            keep.push(n - 1);
        }
        // End knots are redundant when the end slope continues the adjacent
        // segment.
        let seg = |a: usize, b: usize| (vs[b] - vs[a]) / (xs[b] - xs[a]);
        if keep.len() >= 2 && (seg(keep[0], keep[1]) - self.left_slope).abs() * (xs[keep[1]] - xs[keep[0]]) <= tol {
            keep.remove(0);
        }
        let m = keep.len();
        if m >= 2 && (seg(keep[m - 2], keep[m - 1]) - self.right_slope).abs() * (xs[keep[m - 1]] - xs[keep[m - 2]]) <= tol {
            keep.pop();
        }
        Self {
            knots: keep.iter().map(|&i| xs[i]).collect(),
            values: keep.iter().map(|&i| vs[i]).collect(),
            left_slope: self.left_slope,
            right_slope: self.right_slope,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# left_slope={},right_slope={}\nbreakpoint,value\n",
            g17(self.left_slope),
            g17(self.right_slope)
        );
        for (k, v) in self.knots.iter().zip(&self.values) {
            s.push_str(&format!("{},{}\n", g17(*k), g17(*v)));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (i0, header) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| parse_err(i0, "expected `# left_slope=..,right_slope=..`"))?;
        let mut slopes = [None, None];
        for field in header.split(',') {
            let (k, v) = field.split_once('=').ok_or_else(|| parse_err(i0, "malformed slope field"))?;
            let v: f64 = v.trim().parse().map_err(|_| parse_err(i0, "slope is not a number"))?;
            match k.trim() {
                "left_slope" => slopes[0] = Some(v),
                "right_slope" => slopes[1] = Some(v),
                _ => return Err(parse_err(i0, "unknown header field")),
            }
        }
        let (i1, cols) = lines.next().ok_or_else(|| parse_err(1, "missing column header"))?;
        if cols.trim() != "breakpoint,value" {
            return Err(parse_err(i1, "expected `breakpoint,value`"));
        }
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(',').ok_or_else(|| parse_err(i, "expected two columns"))?;
            knots.push(k.trim().parse().map_err(|_| parse_err(i, "bad breakpoint"))?);
            values.push(v.trim().parse().map_err(|_| parse_err(i, "bad value"))?);
        }
        let left = slopes[0].ok_or_else(|| parse_err(i0, "missing left_slope"))?;
        let right = slopes[1].ok_or_else(|| parse_err(i0, "missing right_slope"))?;
        Self::new(knots, values, left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub kappa: f64,
    pub sigma: f64,
    pub m2: f64,
    pub mu: f64,
}

impl ApproxParams {
    pub fn new(kappa: f64, sigma: f64, m2: f64, mu: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 0.25) {
            return Err(invalid("kappa", "must lie in (0, 1/4]"));
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(m2 > 0.0) {
            return Err(invalid("m2", "must be positive"));
        }
        if !mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        Ok(Self { kappa, sigma, m2, mu })
    }

    pub fn gamma(&self) -> f64 {
        self.sigma * self.kappa.sqrt()
    }

    pub fn delta(&self) -> f64 {
        self.kappa * self.kappa
    }

    /// Score bound `(1/σ)·ln(1/δ)` used to classify intervals.
    pub fn threshold(&self) -> f64 {
        (1.0 / self.delta()).ln() / self.sigma
    }

    /// `m₂/√δ = m₂/κ`.
    pub fn radius(&self) -> f64 {
        self.m2 / self.delta().sqrt()
    }

    pub fn piece_bound(&self) -> f64 {
        C1 * self.m2 / (self.sigma * self.kappa.powf(1.5))
    }

    pub fn slope_bound(&self) -> f64 {
        C2 * (1.0 / self.kappa).ln() / (self.sigma * self.sigma * self.kappa.sqrt())
    }

    pub fn value_bound(&self) -> f64 {
        C3 * (1.0 / self.kappa).ln() / self.sigma
    }

    pub fn error_bound(&self) -> f64 {
        C4 * self.kappa / (self.sigma * self.sigma)
    }
}

fn grid(gamma: f64, range: (f64, f64)) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be positive"));
    }
    let (a, b) = range;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("range", "must be a finite non-empty interval"));
    }
    let lo = (a / gamma).ceil() as i64;
    let hi = (b / gamma).floor() as i64;
    if hi <= lo {
        return Err(invalid("range", "contains fewer than two grid points"));
    }
    Ok((lo..=hi).map(|i| i as f64 * gamma).collect())
}

/// Linear interpolation of `score` at the grid points `iγ` inside `range`;
/// the end pieces extend linearly.
pub fn build_interpolant<F: Fn(f64) -> f64>(score: F, gamma: f64, range: (f64, f64)) -> Result<PiecewiseLinear> {
    let knots = grid(gamma, range)?;
    let values: Vec<f64> = knots.iter().map(|&x| score(x)).collect();
    let n = knots.len();
    let left = (values[1] - values[0]) / (knots[1] - knots[0]);
    let right = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
    PiecewiseLinear::new(knots, values, left, right)
}

/// As [`build_interpolant`], but intervals on which `|score|` exceeds
/// `threshold` somewhere on a 21-point grid are bridged linearly between the
/// nearest good endpoints. Both ends are flat, so `|l| ≤ threshold`.
pub fn build_good_interval<F: Fn(f64) -> f64>(
    score: F,
    gamma: f64,
    threshold: f64,
    range: (f64, f64),
) -> Result<PiecewiseLinear> {
    if !(threshold > 0.0) {
        return Err(invalid("threshold", "must be positive"));
    }
    let knots = grid(gamma, range)?;
    let n = knots.len();
    let at_knots: Vec<f64> = knots.iter().map(|&x| score(x)).collect();
    let good: Vec<bool> = (0..n - 1)
        .map(|i| {
            (0..SUP_GRID).all(|k| {
                let v = if k == 0 {
                    at_knots[i]
                } else if k == SUP_GRID - 1 {
                    at_knots[i + 1]
                } else {
                    let t = k as f64 / (SUP_GRID - 1) as f64;
                    score(knots[i] + t * (knots[i + 1] - knots[i]))
                };
                v.is_finite() && v.abs() <= threshold
            })
        })
        .collect();
    // A grid point is trusted when it bounds at least one good interval.
    let trusted: Vec<bool> = (0..n)
        .map(|k| (k > 0 && good[k - 1]) || (k < n - 1 && good[k]))
        .collect();
    if !trusted.iter().any(|&t| t) {
        return Err(Error::NoGoodInterval);
    }
    let mut prev_trusted = vec![None; n];
    let mut last = None;
    for k in 0..n {
        if trusted[k] {
            last = Some(k);
        }
        prev_trusted[k] = last;
    }
    let mut next_trusted = vec![None; n];
    last = None;
    for k in (0..n).rev() {
        if trusted[k] {
            last = Some(k);
        }
        next_trusted[k] = last;
    }
    let values: Vec<f64> = (0..n)
        .map(|k| match (prev_trusted[k], next_trusted[k]) {
            (Some(l), _) if l == k => at_knots[k],
            (Some(l), Some(r)) => {
                let t = (knots[k] - knots[l]) / (knots[r] - knots[l]);
                at_knots[l] + t * (at_knots[r] - at_knots[l])
            }
            (Some(l), None) => at_knots[l],
            (None, Some(r)) => at_knots[r],
            (None, None) => unreachable!("some grid point is trusted"),
        })
        .collect();
    PiecewiseLinear::new(knots, values, 0.0, 0.0)
}

/// Holds `l` constant outside `|x − μ| ≤ m₂/√δ`.
pub fn clamp_tails(l: &PiecewiseLinear, mu: f64, m2: f64, delta: f64) -> Result<PiecewiseLinear> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    if !(m2 > 0.0) {
        return Err(invalid("m2", "must be positive"));
    }
    let r = m2 / delta.sqrt();
    let (lo, hi) = (mu - r, mu + r);
    let mut knots = vec![lo];
    let mut values = vec![l.eval(lo)];
    for (&k, &v) in l.knots().iter().zip(l.values()) {
        if k > lo && k < hi {
            knots.push(k);
            values.push(v);
        }
    }
    knots.push(hi);
    values.push(l.eval(hi));
    PiecewiseLinear::new(knots, values, 0.0, 0.0)
}

/// The three-stage approximation with `γ = σ√κ` and `δ = κ²`.
pub fn build_score_approx<F: Fn(f64) -> f64>(score: F, ap: &ApproxParams) -> Result<PiecewiseLinear> {
    let ap = ApproxParams::new(ap.kappa, ap.sigma, ap.m2, ap.mu)?;
    let r = ap.radius();
    let l2 = build_good_interval(&score, ap.gamma(), ap.threshold(), (ap.mu - r, ap.mu + r))?;
    clamp_tails(&l2, ap.mu, ap.m2, ap.delta())
}

/// Measured structural quantities of an approximation next to their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub pieces: usize,
    pub piece_bound: f64,
    pub max_transition_offset: f64,
    pub transition_bound: f64,
    pub max_slope: f64,
    pub slope_bound: f64,
    pub max_value: f64,
    pub value_bound: f64,
}

impl StructureReport {
    pub fn holds(&self) -> bool {
        self.pieces as f64 <= self.piece_bound
            && self.max_transition_offset <= self.transition_bound
            && self.max_slope <= self.slope_bound
            && self.max_value <= self.value_bound
    }
}

pub fn structure_report(l: &PiecewiseLinear, ap: &ApproxParams) -> StructureReport {
    StructureReport {
        pieces: l.pieces(),
        piece_bound: ap.piece_bound(),
        max_transition_offset: l.knots().iter().fold(0.0, |m, k| m.max((k - ap.mu).abs())),
        transition_bound: ap.m2 / ap.kappa * (1.0 + 1e-12),
        max_slope: l.slopes().iter().fold(0.0, |m, s| m.max(s.abs())),
        slope_bound: ap.slope_bound(),
        max_value: l.max_abs_value(),
        value_bound: ap.value_bound(),
    }
}

/// One-dimensional test laws with exact smoothed scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestFamily {
    Gaussian { mean: f64, var: f64 },
    /// `½N(−offset, var) + ½N(offset, var)`; `var = 0` gives two atoms.
    SymmetricPair { offset: f64, var: f64 },
    /// The unit discretized Gaussian on `εZ + phase`.
    DiscretizedGaussian { eps: f64, phase: f64 },
}

impl TestFamily {
    /// `½N(−3, 1) + ½N(3, 1)`.
    pub const STANDARD_MIXTURE: TestFamily = TestFamily::SymmetricPair { offset: 3.0, var: 1.0 };

    pub fn smoothed(&self, sigma: f64) -> Result<Smoothed> {
        if !(sigma >= 0.0) {
            return Err(invalid("sigma", "must be non-negative"));
        }
        let dg = match *self {
            TestFamily::Gaussian { var, .. } | TestFamily::SymmetricPair { var, .. } => {
                if var + sigma * sigma <= 0.0 {
                    return Err(Error::Unsmoothed);
                }
                None
            }
            TestFamily::DiscretizedGaussian { eps, phase } => {
                if sigma == 0.0 {
                    return Err(Error::Unsmoothed);
                }
                let spec = DiscreteGaussianSpec::new(eps, phase, sigma)?;
                let table = LatticeTable::new(if phase == 0.0 { 1 } else { -1 }, eps)?;
                Some((spec, table))
            }
        };
        Ok(Smoothed {
            family: *self,
            sigma,
            dg,
        })
    }
}

/// A [`TestFamily`] member convolved with `N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct Smoothed {
    family: TestFamily,
    sigma: f64,
    dg: Option<(DiscreteGaussianSpec, LatticeTable)>,
}

impl Smoothed {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn score(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.family {
            TestFamily::Gaussian { mean, var } => -(x - mean) / (var + s2),
            TestFamily::SymmetricPair { offset, var } => two_point_score(offset, var + s2, x),
            TestFamily::DiscretizedGaussian { .. } => self.dg.as_ref().unwrap().0.score(x).unwrap(),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.family {
            TestFamily::Gaussian { mean, var } => crate::special::normal_log_pdf(x - mean, (var + s2).sqrt()),
            TestFamily::SymmetricPair { offset, var } => two_point_log_density(offset, var + s2, x),
            TestFamily::DiscretizedGaussian { .. } => self.dg.as_ref().unwrap().0.log_density(x).unwrap(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            TestFamily::Gaussian { mean, .. } => mean,
            _ => 0.0,
        }
    }

    pub fn sd(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.family {
            TestFamily::Gaussian { var, .. } => (var + s2).sqrt(),
            TestFamily::SymmetricPair { offset, var } => (offset * offset + var + s2).sqrt(),
            TestFamily::DiscretizedGaussian { .. } => self.dg.as_ref().unwrap().0.variance().sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let noise = self.sigma * normal(rng);
        match self.family {
            TestFamily::Gaussian { mean, var } => mean + var.sqrt() * normal(rng) + noise,
            TestFamily::SymmetricPair { offset, var } => {
                let c = if uniform(rng) < 0.5 { -offset } else { offset };
                c + var.sqrt() * normal(rng) + noise
            }
            TestFamily::DiscretizedGaussian { .. } => self.dg.as_ref().unwrap().1.sample(rng) + noise,
        }
    }

    /// Approximation parameters for this law at accuracy `kappa`.
    pub fn approx_params(&self, kappa: f64) -> Result<ApproxParams> {
        ApproxParams::new(kappa, self.sigma, self.sd(), self.mean())
    }
}

/// Monte Carlo `E[(l(x) − s(x))²]` under the smoothed law, with its standard
/// error.
pub fn l2_error<L: Fn(f64) -> f64>(l: L, law: &Smoothed, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, 0);
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let x = law.sample(&mut rng);
            let e = l(x) - law.score(x);
            e * e
        })
        .collect();
    let m = errs.iter().sum::<f64>() / n as f64;
    let var = errs.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    (m, (var / n as f64).sqrt())
}

/// Monte Carlo `E[sup_{|c| ≤ eps} s'(x + c)²]` with `x` from the
/// σ-smoothed law; derivatives by centered differences of step `σ·10⁻⁴`.
pub fn estimate_sup_score_moment(family: &TestFamily, sigma: f64, eps: f64, n: usize, seed: u64) -> Result<f64> {
    if !(eps >= 0.0 && eps <= sigma) {
        return Err(invalid("eps", "must lie in [0, sigma]"));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one draw"));
    }
    let law = family.smoothed(sigma)?;
    let h = sigma * 1e-4;
    let deriv = |x: f64| (law.score(x + h) - law.score(x - h)) / (2.0 * h);
    let mut rng = stream(seed, 0);
    let mut acc = 0.0;
    for _ in 0..n {
        let x = law.sample(&mut rng);
        let sup = if eps == 0.0 {
            deriv(x).powi(2)
        } else {
            (0..41)
                .map(|k| deriv(x - eps + 2.0 * eps * k as f64 / 40.0).powi(2))
                .fold(0.0, f64::max)
        };
        acc += sup;
    }
    Ok(acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_target_is_reproduced() {
        let l = build_interpolant(|x| -x / 2.0, 0.1, (-5.0, 5.0)).unwrap();
        for i in -100..=100 {
            let x = i as f64 * 0.0731;
            assert!((l.eval(x) + x / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn good_interval_bounded_and_identity_at_infinity() {
        let law = TestFamily::STANDARD_MIXTURE.smoothed(0.5).unwrap();
        let range = (-20.0, 20.0);
        let l1 = build_interpolant(|x| law.score(x), 0.05, range).unwrap();
        let l2 = build_good_interval(|x| law.score(x), 0.05, f64::INFINITY, range).unwrap();
        assert_eq!(l1.knots(), l2.knots());
        assert_eq!(l1.values(), l2.values());
        let l3 = build_good_interval(|x| law.score(x), 0.05, 10.0, range).unwrap();
        for i in -1000..=1000 {
            assert!(l3.eval(i as f64 * 0.05).abs() <= 10.0);
        }
        assert!(matches!(build_good_interval(|_| 100.0, 0.1, 1.0, range), Err(Error::NoGoodInterval)));
    }

    #[test]
    fn clamp_adds_at_most_two_pieces() {
        let l = build_interpolant(|x: f64| x.sin(), 0.1, (-10.0, 10.0)).unwrap();
        let c = clamp_tails(&l, 0.0, 1.0, 0.25).unwrap();
        assert!(c.pieces() <= l.pieces() + 2);
        assert_eq!(c.eval(100.0), l.eval(2.0));
        assert_eq!(c.eval(-100.0), l.eval(-2.0));
    }

    #[test]
    fn simplify_collapses_collinear_runs() {
        let l = build_interpolant(|x| 3.0 * x - 1.0, 0.01, (-10.0, 10.0)).unwrap();
        let s = l.simplify(1e-9);
        assert_eq!(s.pieces(), 2);
        assert!((s.eval(7.0) - 20.0).abs() < 1e-12);
        let wavy = build_interpolant(|x: f64| x.abs(), 0.5, (-3.0, 3.0)).unwrap().simplify(1e-12);
        assert_eq!(wavy.knots(), &[0.0]);
        assert_eq!(wavy.eval(-2.0), 2.0);
    }

    #[test]
    fn csv_roundtrip() {
        let l = build_interpolant(|x: f64| x.cos(), 0.3, (-2.0, 2.0)).unwrap();
        assert_eq!(PiecewiseLinear::from_csv(&l.to_csv()).unwrap(), l);
        assert!(PiecewiseLinear::from_csv("breakpoint,value\n").is_err());
    }

    #[test]
    fn gaussian_moment_is_exact() {
        let fam = TestFamily::Gaussian { mean: 0.0, var: 1.0 };
        let sigma: f64 = 0.7;
        let est = estimate_sup_score_moment(&fam, sigma, 0.3, 200, 1).unwrap();
        let exact = 1.0 / (1.0 + sigma * sigma).powi(2);
        assert!((est / exact - 1.0).abs() < 0.02);
    }
}
