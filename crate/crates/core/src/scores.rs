//! Exact smoothed densities and scores for the instance family, plus the
//! small- and large-σ surrogates and the [`ScoreProvider`] abstraction the
//! samplers consume.

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::instance::{phase_offset, round_r, BitString, Instance, InstanceParams};
use crate::special::{log_sum_exp, normal_log_pdf, softmax_into};
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest `d` for which the exact mixture score enumerates all seeds.
pub const MAX_EXACT_D: usize = 12;

const SERIES_CUTOFF: f64 = 1e-18;
const MAX_SERIES_TERMS: usize = 100_000;
/// Half-width of the lattice window, in units of the posterior std.
const WINDOW_SDS: f64 = 40.0;
/// Use the Fourier form once its terms decay at least like `e^{-2 j²}`.
const FOURIER_MIN_DECAY: f64 = 2.0;

/// `-(x-μ)/(baseVar+σ²)`.
pub fn gaussian_smoothed_score(mu: f64, base_var: f64, sigma: f64, x: f64) -> Result<f64> {
    let v = base_var + sigma * sigma;
    if !(v > 0.0) {
        return Err(invalid("sigma", "base variance and smoothing are both zero"));
    }
    Ok(-(x - mu) / v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMethod {
    Auto,
    Fourier,
    Lattice,
}

/// The unit-variance discretized Gaussian on `εZ + φ`, smoothed by
/// `N(0, ρ²)`.
///
/// Writing `s² = 1+ρ²`, `m = x/s²` and `τ = ρ/s`, the density factors as
/// `w_s(x) · Σ_k w_τ(a_k − m) / Σ_k w_1(a_k)`. The lattice sum is evaluated
/// either directly or through its Poisson-summed theta series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGaussianSpec {
    eps: f64,
    phase: f64,
    rho: f64,
    s2: f64,
    tau: f64,
    /// `2π²τ²/ε²`: decay rate of the numerator series.
    decay: f64,
    /// `ln Θ₀`, the theta series of the unsmoothed normalizer.
    log_theta0: f64,
    /// Direct normalizer `log Σ_k e^{-a_k²/2}`.
    log_z_lattice: f64,
}

impl DiscreteGaussianSpec {
    pub fn new(eps: f64, phase: f64, rho: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", "must be positive and finite"));
        }
        if phase != 0.0 && phase != eps / 2.0 {
            return Err(invalid("phase", "must be 0 or eps/2"));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(invalid("rho", "must be non-negative and finite"));
        }
        let s2 = 1.0 + rho * rho;
        let tau = rho / s2.sqrt();
        let decay = 2.0 * PI * PI * tau * tau / (eps * eps);
        let base_decay = 2.0 * PI * PI / (eps * eps);
        let mut theta0 = 1.0;
        for j in 1..=MAX_SERIES_TERMS {
            let c = (-base_decay * (j * j) as f64).exp();
            if c < SERIES_CUTOFF {
                break;
            }
            theta0 += 2.0 * c * (2.0 * PI * j as f64 * phase / eps).cos();
        }
        let kmax = (40.0 / eps).ceil() as i64 + 1;
        let terms: Vec<f64> = (-kmax..=kmax)
            .map(|k| {
                let a = k as f64 * eps + phase;
                -0.5 * a * a
            })
            .collect();
        Ok(Self {
            eps,
            phase,
            rho,
            s2,
            tau,
            decay,
            log_theta0: theta0.ln(),
            log_z_lattice: log_sum_exp(&terms),
        })
    }

    /// Phase for bit `b`: `+1 → 0`, `-1 → ε/2`.
    pub fn for_bit(b: i8, eps: f64, rho: f64) -> Result<Self> {
        Self::new(eps, phase_offset(b, eps), rho)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Variance of the smoothed law, `Σ p_k a_k² + ρ²` (mean is 0 for
    /// phase 0 and exactly 0 by symmetry for phase ε/2 as well).
    pub fn variance(&self) -> f64 {
        let kmax = (40.0 / self.eps).ceil() as i64 + 1;
        let mut m2 = 0.0;
        for k in -kmax..=kmax {
            let a = k as f64 * self.eps + self.phase;
            m2 += a * a * (-0.5 * a * a - self.log_z_lattice).exp();
        }
        m2 + self.rho * self.rho
    }

    fn resolve(&self, method: SeriesMethod) -> SeriesMethod {
        match method {
            SeriesMethod::Auto if self.decay >= FOURIER_MIN_DECAY => SeriesMethod::Fourier,
            SeriesMethod::Auto => SeriesMethod::Lattice,
            m => m,
        }
    }

    fn require_smoothed(&self) -> Result<()> {
        if self.rho == 0.0 {
            Err(Error::Unsmoothed)
        } else {
            Ok(())
        }
    }

    /// `(Θ(m), Θ'(m))` for the numerator theta series.
    fn theta(&self, m: f64) -> (f64, f64) {
        let mut th = 1.0;
        let mut dth = 0.0;
        let w = 2.0 * PI / self.eps;
        for j in 1..=MAX_SERIES_TERMS {
            let jf = j as f64;
            let c = (-self.decay * jf * jf).exp();
            if c < SERIES_CUTOFF {
                break;
            }
            let arg = w * jf * (m - self.phase);
            th += 2.0 * c * arg.cos();
            dth -= 2.0 * c * w * jf * arg.sin();
        }
        (th, dth)
    }

    /// `log Σ_k w_τ(a_k − m)` and the posterior mean of `(a_k − m)/τ²`,
    /// summed over atoms within `40τ + ε` of `m`.
    fn lattice_window(&self, m: f64) -> (f64, f64) {
        let half = WINDOW_SDS * self.tau + self.eps;
        let k_lo = ((m - half - self.phase) / self.eps).floor() as i64;
        let k_hi = ((m + half - self.phase) / self.eps).ceil() as i64;
        let t2 = self.tau * self.tau;
        let mut logs = Vec::with_capacity((k_hi - k_lo + 1) as usize);
        let mut gaps = Vec::with_capacity(logs.capacity());
        for k in k_lo..=k_hi {
            let g = k as f64 * self.eps + self.phase - m;
            logs.push(-0.5 * g * g / t2);
            gaps.push(g / t2);
        }
        let lse = log_sum_exp(&logs);
        let mut w = Vec::new();
        softmax_into(&logs, &mut w);
        let mean: f64 = w.iter().zip(&gaps).map(|(a, b)| a * b).sum();
        (lse, mean)
    }

    pub fn log_density_with(&self, x: f64, method: SeriesMethod) -> Result<f64> {
        self.require_smoothed()?;
        let m = x / self.s2;
        let log_ws = normal_log_pdf(x, self.s2.sqrt());
        Ok(match self.resolve(method) {
            SeriesMethod::Fourier => log_ws + self.theta(m).0.ln() - self.log_theta0,
            _ => {
                let (lse, _) = self.lattice_window(m);
                // Σ w_τ(a−m) = e^{lse}/(τ√2π); Σ w_1(a) = e^{logZ}/√2π.
                log_ws + lse - self.tau.ln() - self.log_z_lattice
            }
        })
    }

    pub fn density_with(&self, x: f64, method: SeriesMethod) -> Result<f64> {
        self.log_density_with(x, method).map(f64::exp)
    }

    pub fn score_with(&self, x: f64, method: SeriesMethod) -> Result<f64> {
        self.require_smoothed()?;
        let m = x / self.s2;
        Ok(match self.resolve(method) {
            SeriesMethod::Fourier => {
                let (th, dth) = self.theta(m);
                (-x + dth / th) / self.s2
            }
            _ => {
                let (_, mean) = self.lattice_window(m);
                (-x + mean) / self.s2
            }
        })
    }

    /// `g(x)/w_s(x) − 1` straight from the two theta series, so it stays
    /// accurate far below machine epsilon where `g − w_s` would cancel.
    /// Terms are kept until they underflow rather than stopping at the
    /// usual cutoff.
    pub fn relative_deviation(&self, x: f64) -> Result<f64> {
        self.require_smoothed()?;
        let m = x / self.s2;
        let w = 2.0 * PI / self.eps;
        let base_decay = 2.0 * PI * PI / (self.eps * self.eps);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 1..=MAX_SERIES_TERMS {
            let jf = j as f64;
            let cn = (-self.decay * jf * jf).exp();
            let cd = (-base_decay * jf * jf).exp();
            if cn == 0.0 && cd == 0.0 {
                break;
            }
            num += 2.0 * cn * (w * jf * (m - self.phase)).cos();
            den += 2.0 * cd * (w * jf * self.phase).cos();
        }
        Ok((num - den) / (1.0 + den))
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        self.log_density_with(x, SeriesMethod::Auto)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.density_with(x, SeriesMethod::Auto)
    }

    pub fn score(&self, x: f64) -> Result<f64> {
        self.score_with(x, SeriesMethod::Auto)
    }
}

/// Density of the smoothed discretized Gaussian.
pub fn dg_smoothed_density(spec: &DiscreteGaussianSpec, x: f64) -> Result<f64> {
    spec.density(x)
}

/// Score of the smoothed discretized Gaussian; [`Error::Unsmoothed`] at ρ = 0.
pub fn dg_smoothed_score(spec: &DiscreteGaussianSpec, x: f64) -> Result<f64> {
    spec.score(x)
}

/// Per-coordinate log-densities and scores of both choices (sign or phase)
/// at one point, for one σ.
struct CoordinateTable {
    /// `[i][0]` is the `+1` choice, `[i][1]` the `−1` choice.
    log_dens: Vec<[f64; 2]>,
    score: Vec<[f64; 2]>,
}

#[inline]
fn slot(b: i8) -> usize {
    if b == 1 {
        0
    } else {
        1
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", "must be positive and finite"))
    }
}

fn coordinate_table(p: &InstanceParams, sigma: f64, x: &[f64]) -> Result<CoordinateTable> {
    ensure_dim(p.dim(), x.len())?;
    let v = 1.0 + sigma * sigma;
    let sd = v.sqrt();
    let mut log_dens = Vec::with_capacity(p.dim());
    let mut score = Vec::with_capacity(p.dim());
    for &xi in &x[..p.d] {
        log_dens.push([normal_log_pdf(xi - p.r, sd), normal_log_pdf(xi + p.r, sd)]);
        score.push([-(xi - p.r) / v, -(xi + p.r) / v]);
    }
    if p.d_prime > 0 {
        let even = DiscreteGaussianSpec::for_bit(1, p.eps, sigma)?;
        let odd = DiscreteGaussianSpec::for_bit(-1, p.eps, sigma)?;
        for &xi in &x[p.d..] {
            log_dens.push([even.log_density(xi)?, odd.log_density(xi)?]);
            score.push([even.score(xi)?, odd.score(xi)?]);
        }
    }
    Ok(CoordinateTable { log_dens, score })
}

/// Score of `h_s = g_s ∗ N(0, σ²I)`.
pub fn component_score(inst: &Instance, s: &BitString, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let p = inst.params();
    ensure_dim(p.d, s.len())?;
    ensure_dim(p.dim(), x.len())?;
    let z = inst.f().eval(s);
    component_score_with_phases(p, s, &z, sigma, x)
}

fn component_score_with_phases(p: &InstanceParams, s: &BitString, z: &BitString, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    let v = 1.0 + sigma * sigma;
    let mut out = Vec::with_capacity(p.dim());
    for (xi, &si) in x[..p.d].iter().zip(s.bits()) {
        out.push(-(xi - p.r * si as f64) / v);
    }
    if p.d_prime > 0 {
        let even = DiscreteGaussianSpec::for_bit(1, p.eps, sigma)?;
        let odd = DiscreteGaussianSpec::for_bit(-1, p.eps, sigma)?;
        for (xi, &zi) in x[p.d..].iter().zip(z.bits()) {
            out.push(if zi == 1 { even.score(*xi)? } else { odd.score(*xi)? });
        }
    }
    Ok(out)
}

/// `log h_s(x)`.
pub fn component_log_density(inst: &Instance, s: &BitString, sigma: f64, x: &[f64]) -> Result<f64> {
    check_sigma(sigma)?;
    let p = inst.params();
    ensure_dim(p.d, s.len())?;
    let t = coordinate_table(p, sigma, x)?;
    let z = inst.f().eval(s);
    let head: f64 = s.bits().iter().enumerate().map(|(i, &b)| t.log_dens[i][slot(b)]).sum();
    let tail: f64 = z.bits().iter().enumerate().map(|(j, &b)| t.log_dens[p.d + j][slot(b)]).sum();
    Ok(head + tail)
}

/// Exact smoothed mixture `h = 2^{-d} Σ_s h_s`, with `f` tabulated once.
#[derive(Debug, Clone)]
pub struct ExactMixture {
    params: InstanceParams,
    seeds: Vec<BitString>,
    images: Vec<BitString>,
}

impl ExactMixture {
    pub fn new(inst: &Instance) -> Result<Self> {
        let p = *inst.params();
        if p.d > MAX_EXACT_D {
            return Err(Error::TooLarge { d: p.d, max: MAX_EXACT_D });
        }
        let images = inst.f().truth_table()?;
        let seeds = (0..images.len()).map(|i| BitString::from_index(i, p.d)).collect();
        Ok(Self {
            params: p,
            seeds,
            images,
        })
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    fn component_logs(&self, t: &CoordinateTable) -> Vec<f64> {
        let d = self.params.d;
        self.seeds
            .iter()
            .zip(&self.images)
            .map(|(s, z)| {
                let head: f64 = s.bits().iter().enumerate().map(|(i, &b)| t.log_dens[i][slot(b)]).sum();
                let tail: f64 = z.bits().iter().enumerate().map(|(j, &b)| t.log_dens[d + j][slot(b)]).sum();
                head + tail
            })
            .collect()
    }

    pub fn log_density(&self, sigma: f64, x: &[f64]) -> Result<f64> {
        check_sigma(sigma)?;
        let t = coordinate_table(&self.params, sigma, x)?;
        let logs = self.component_logs(&t);
        Ok(log_sum_exp(&logs) - (self.seeds.len() as f64).ln())
    }

    /// Posterior weights of the seeds given the smoothed point `x`.
    pub fn seed_weights(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_sigma(sigma)?;
        let t = coordinate_table(&self.params, sigma, x)?;
        let mut w = Vec::new();
        softmax_into(&self.component_logs(&t), &mut w);
        Ok(w)
    }

    pub fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_sigma(sigma)?;
        let d = self.params.d;
        let t = coordinate_table(&self.params, sigma, x)?;
        let mut w = Vec::new();
        softmax_into(&self.component_logs(&t), &mut w);
        let mut out = vec![0.0; self.params.dim()];
        for ((s, z), wk) in self.seeds.iter().zip(&self.images).zip(&w) {
            if *wk == 0.0 {
                continue;
            }
            for (i, &b) in s.bits().iter().enumerate() {
                out[i] += wk * t.score[i][slot(b)];
            }
            for (j, &b) in z.bits().iter().enumerate() {
                out[d + j] += wk * t.score[d + j][slot(b)];
            }
        }
        Ok(out)
    }
}

/// `∇ log h` by enumerating all `2^d` seeds.
pub fn mixture_score_exact(inst: &Instance, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    ExactMixture::new(inst)?.score(sigma, x)
}

/// Score of the component whose orthant contains `x`.
pub fn orthant_score(inst: &Instance, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let p = inst.params();
    ensure_dim(p.dim(), x.len())?;
    let r = round_r(&x[..p.d]);
    component_score(inst, &r, sigma, x)
}

/// Product of two-point mixtures `½N(±R, 1+σ²)` on the head and
/// `N(0, 1+σ²)` on the tail.
pub fn large_sigma_score(p: &InstanceParams, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    ensure_dim(p.dim(), x.len())?;
    let v = 1.0 + sigma * sigma;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            if i < p.d {
                two_point_score(p.r, v, xi)
            } else {
                -xi / v
            }
        })
        .collect())
}

/// Score of `½N(−a, v) + ½N(a, v)`.
#[inline]
pub fn two_point_score(a: f64, v: f64, x: f64) -> f64 {
    (-x + a * (a * x / v).tanh()) / v
}

/// log density of `½N(−a, v) + ½N(a, v)`.
pub fn two_point_log_density(a: f64, v: f64, x: f64) -> f64 {
    let sd = v.sqrt();
    log_sum_exp(&[normal_log_pdf(x - a, sd), normal_log_pdf(x + a, sd)]) - 2f64.ln()
}

/// A map `(σ, x) ↦ ŝ_σ(x)`.
pub trait ScoreProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>>;
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn label(&self) -> String {
        (**self).label()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).score(sigma, x)
    }
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn label(&self) -> String {
        (**self).label()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        (**self).score(sigma, x)
    }
}

impl ScoreProvider for ExactMixture {
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn label(&self) -> String {
        "exact".into()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        ExactMixture::score(self, sigma, x)
    }
}

#[derive(Debug, Clone)]
pub struct OrthantScore {
    inst: Instance,
}

impl OrthantScore {
    pub fn new(inst: Instance) -> Self {
        Self { inst }
    }
}

impl ScoreProvider for OrthantScore {
    fn dim(&self) -> usize {
        self.inst.params().dim()
    }
    fn label(&self) -> String {
        "orthant".into()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        orthant_score(&self.inst, sigma, x)
    }
}

#[derive(Debug, Clone)]
pub struct LargeSigmaScore {
    params: InstanceParams,
}

impl LargeSigmaScore {
    pub fn new(params: InstanceParams) -> Self {
        Self { params }
    }
}

impl ScoreProvider for LargeSigmaScore {
    fn dim(&self) -> usize {
        self.params.dim()
    }
    fn label(&self) -> String {
        "large-sigma".into()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        large_sigma_score(&self.params, sigma, x)
    }
}

/// Uses `small` below `sigma_star` and `large` at or above it.
pub struct RegimeScore {
    small: Box<dyn ScoreProvider>,
    large: Box<dyn ScoreProvider>,
    sigma_star: f64,
}

impl RegimeScore {
    pub const DEFAULT_SIGMA_STAR: f64 = 1.0;

    pub fn new(small: Box<dyn ScoreProvider>, large: Box<dyn ScoreProvider>, sigma_star: f64) -> Result<Self> {
        ensure_dim(small.dim(), large.dim())?;
        if !(sigma_star > 0.0) {
            return Err(invalid("sigma_star", "must be positive"));
        }
        Ok(Self {
            small,
            large,
            sigma_star,
        })
    }
}

impl ScoreProvider for RegimeScore {
    fn dim(&self) -> usize {
        self.small.dim()
    }
    fn label(&self) -> String {
        format!("regime({}|{}@{})", self.small.label(), self.large.label(), self.sigma_star)
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        if sigma < self.sigma_star {
            self.small.score(sigma, x)
        } else {
            self.large.score(sigma, x)
        }
    }
}

/// Wraps a closure.
pub struct FnScore<F> {
    dim: usize,
    label: String,
    f: F,
}

impl<F> FnScore<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, label: impl Into<String>, f: F) -> Self {
        Self {
            dim,
            label: label.into(),
            f,
        }
    }
}

impl<F> ScoreProvider for FnScore<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, x.len())?;
        Ok((self.f)(sigma, x))
    }
}

/// The zero map.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScore(pub usize);

impl ScoreProvider for ZeroScore {
    fn dim(&self) -> usize {
        self.0
    }
    fn label(&self) -> String {
        "zero".into()
    }
    fn score(&self, _sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.0, x.len())?;
        Ok(vec![0.0; self.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::OneWayCandidate;

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_smoothed_score(0.0, 1.0, 0.0, 2.0).unwrap(), -2.0);
        assert_eq!(gaussian_smoothed_score(3.0, 1.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(gaussian_smoothed_score(0.0, 1.0, 2.0, 5.0).unwrap(), -1.0);
        assert!(gaussian_smoothed_score(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn dg_symmetry_and_unsmoothed() {
        let spec = DiscreteGaussianSpec::new(0.5, 0.0, 0.3).unwrap();
        for x in [0.3, 1.7, 4.1] {
            let a = spec.density(x).unwrap();
            let b = spec.density(-x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
        let atomic = DiscreteGaussianSpec::new(0.5, 0.0, 0.0).unwrap();
        assert_eq!(atomic.score(0.1), Err(Error::Unsmoothed));
        assert!(DiscreteGaussianSpec::new(0.5, 0.1, 0.3).is_err());
    }

    #[test]
    fn relative_deviation_matches_ratio() {
        for (eps, phase, rho) in [(0.5, 0.0, 0.3), (0.5, 0.25, 1.0), (1.0, 0.5, 0.5)] {
            let spec = DiscreteGaussianSpec::new(eps, phase, rho).unwrap();
            let s = (1.0 + rho * rho as f64).sqrt();
            for x in [-2.0, -0.3, 0.0, 0.7, 3.1] {
                let lattice = spec.density_with(x, SeriesMethod::Lattice).unwrap();
                let ratio = lattice / crate::special::normal_pdf(x, s) - 1.0;
                assert!((spec.relative_deviation(x).unwrap() - ratio).abs() <= 1e-12);
            }
        }
        // Far below epsilon the series still resolves the sign of the gap.
        let fine = DiscreteGaussianSpec::new(0.2, 0.0, 1.0).unwrap();
        let d = fine.relative_deviation(0.0).unwrap();
        assert!(d > 0.0 && d < 1e-100);
    }

    #[test]
    fn both_forms_agree_on_score() {
        for (eps, rho) in [(0.5, 0.1), (0.5, 0.3), (1.0, 0.2)] {
            for phase in [0.0, eps / 2.0] {
                let spec = DiscreteGaussianSpec::new(eps, phase, rho).unwrap();
                for i in -30..=30 {
                    let x = i as f64 * 0.137;
                    let a = spec.score_with(x, SeriesMethod::Fourier).unwrap();
                    let b = spec.score_with(x, SeriesMethod::Lattice).unwrap();
                    assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{eps} {rho} {x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn large_sigma_examples() {
        let p = InstanceParams::new(1, 1, 30.0, 1.0, 0.1, 0.25).unwrap();
        let s = large_sigma_score(&p, 1.0, &[0.0, 2.0]).unwrap();
        assert_eq!(s, vec![0.0, -1.0]);
    }

    #[test]
    fn symmetric_mixture_score_vanishes_at_origin() {
        let p = InstanceParams::new(1, 0, 4.0, 1.0, 0.1, 0.25).unwrap();
        let inst = Instance::new(p, OneWayCandidate::no_outputs(1)).unwrap();
        let s = mixture_score_exact(&inst, 1.0, &[0.0]).unwrap();
        assert!(s[0].abs() < 1e-15);
    }

    #[test]
    fn regime_switches_at_threshold() {
        let small = Box::new(FnScore::new(1, "a", |_, _| vec![1.0]));
        let large = Box::new(FnScore::new(1, "b", |_, _| vec![2.0]));
        let r = RegimeScore::new(small, large, 1.0).unwrap();
        assert_eq!(r.score(0.5, &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(r.score(1.0, &[0.0]).unwrap(), vec![2.0]);
    }
}
