//! Variance-exploding forward process and an Euler–Maruyama discretization
//! of its time reversal.

use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, SampleVector};
use crate::rng::normal;
use crate::scores::ScoreProvider;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub t_max: f64,
    pub t_min: f64,
    pub steps: usize,
}

impl DiffusionConfig {
    pub const DEFAULT_T_MIN: f64 = 1e-4;
    pub const DEFAULT_STEPS: usize = 2000;

    pub fn new(t_max: f64, t_min: f64, steps: usize) -> Result<Self> {
        let c = Self { t_max, t_min, steps };
        c.validate()?;
        Ok(c)
    }

    /// `T = 10·m₂`, `t_min = 10⁻⁴`, 2000 steps.
    pub fn for_second_moment(m2: f64) -> Result<Self> {
        Self::new(10.0 * m2, Self::DEFAULT_T_MIN, Self::DEFAULT_STEPS)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0) {
            return Err(invalid("t_min", "must be positive"));
        }
        if !(self.t_max > self.t_min) || !self.t_max.is_finite() {
            return Err(invalid("t_max", "must be finite and exceed t_min"));
        }
        Ok(())
    }
}

/// Strictly decreasing times `T = t_0 > t_1 > … > t_N = t_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| !(w[0] > w[1])) || !(times[times.len() - 1] > 0.0) {
            return Err(invalid("times", "must be strictly decreasing and positive"));
        }
        Ok(Self { times })
    }

    /// `t_k = T·(t_min/T)^{k/N}`.
    pub fn geometric(cfg: &DiffusionConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.steps == 0 {
            return Self::new(vec![cfg.t_max]);
        }
        let ratio = cfg.t_min / cfg.t_max;
        let n = cfg.steps as f64;
        let mut times: Vec<f64> = (0..=cfg.steps).map(|k| cfg.t_max * ratio.powf(k as f64 / n)).collect();
        times[cfg.steps] = cfg.t_min;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// `x_0 + √t·N(0, I)`.
pub fn forward_sample<R: Rng + ?Sized>(x0: &[f64], t: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    let sd = t.sqrt();
    Ok(x0.iter().map(|v| v + sd * normal(rng)).collect())
}

/// Reverse run with an extra drift term added to the score; `drift(t, x)`
/// returns a vector of the same dimension. Calls `visit(t, x)` at every grid
/// time including the first.
pub fn reverse_run_with<R, D, V>(
    provider: &dyn ScoreProvider,
    cfg: &DiffusionConfig,
    rng: &mut R,
    init: Option<&[f64]>,
    drift: D,
    mut visit: V,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    D: Fn(f64, &[f64]) -> Option<Vec<f64>>,
    V: FnMut(f64, &[f64]),
{
    let grid = TimeGrid::geometric(cfg)?;
    let dim = provider.dim();
    let mut x: Vec<f64> = match init {
        Some(v) => {
            crate::error::ensure_dim(dim, v.len())?;
            v.to_vec()
        }
        None => {
            let sd = cfg.t_max.sqrt();
            (0..dim).map(|_| sd * normal(rng)).collect()
        }
    };
    let times = grid.times();
    visit(times[0], &x);
    for k in 0..times.len() - 1 {
        let t = times[k];
        let h = t - times[k + 1];
        let mut s = provider.score(t.sqrt(), &x)?;
        if let Some(extra) = drift(t, &x) {
            for (si, e) in s.iter_mut().zip(extra) {
                *si += e;
            }
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore { t });
        }
        let sh = h.sqrt();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += h * si + sh * normal(rng);
        }
        visit(times[k + 1], &x);
    }
    Ok(x)
}

/// Euler–Maruyama on the geometric grid: `x ← x + h·ŝ(√t, x) + √h·N(0, I)`.
/// Starts from `init`, or from `N(0, T·I)` when `init` is `None`.
pub fn reverse_run<R: Rng + ?Sized>(
    provider: &dyn ScoreProvider,
    cfg: &DiffusionConfig,
    rng: &mut R,
    init: Option<&[f64]>,
) -> Result<Vec<f64>> {
    reverse_run_with(provider, cfg, rng, init, |_, _| None, |_, _| {})
}

/// As [`reverse_run`], also returning `(t, x)` at every grid time.
pub fn reverse_trajectory<R: Rng + ?Sized>(
    provider: &dyn ScoreProvider,
    cfg: &DiffusionConfig,
    rng: &mut R,
    init: Option<&[f64]>,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut path = Vec::with_capacity(cfg.steps + 1);
    reverse_run_with(provider, cfg, rng, init, |_, _| None, |t, x| path.push((t, x.to_vec())))?;
    Ok(path)
}

/// An approximate draw from the instance's unscaled law.
pub fn unconditional_sample<R: Rng + ?Sized>(
    inst: &Instance,
    provider: &dyn ScoreProvider,
    cfg: &DiffusionConfig,
    rng: &mut R,
) -> Result<SampleVector> {
    crate::error::ensure_dim(inst.params().dim(), provider.dim())?;
    Ok(SampleVector::unscaled(reverse_run(provider, cfg, rng, None)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::scores::{FnScore, ZeroScore};

    #[test]
    fn geometric_grid_endpoints() {
        let cfg = DiffusionConfig::new(100.0, 1e-3, 10).unwrap();
        let g = TimeGrid::geometric(&cfg).unwrap();
        assert_eq!(g.times().len(), 11);
        assert_eq!(g.times()[0], 100.0);
        assert_eq!(g.times()[10], 1e-3);
        assert!(DiffusionConfig::new(1.0, 2.0, 10).is_err());
    }

    #[test]
    fn zero_steps_returns_init() {
        let cfg = DiffusionConfig::new(10.0, 1e-4, 0).unwrap();
        let mut rng = stream(1, 0);
        let out = reverse_run(&ZeroScore(2), &cfg, &mut rng, Some(&[1.5, -2.0])).unwrap();
        assert_eq!(out, vec![1.5, -2.0]);
    }

    #[test]
    fn forward_at_zero_is_identity() {
        let mut rng = stream(2, 0);
        assert_eq!(forward_sample(&[1.0, 2.0], 0.0, &mut rng).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn non_finite_score_aborts() {
        let bad = FnScore::new(1, "nan", |_, _| vec![f64::NAN]);
        let cfg = DiffusionConfig::new(10.0, 1e-4, 5).unwrap();
        let mut rng = stream(3, 0);
        assert!(matches!(reverse_run(&bad, &cfg, &mut rng, None), Err(Error::NonFiniteScore { .. })));
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let cfg = DiffusionConfig::new(10.0, 1e-2, 50).unwrap();
        let s = FnScore::new(2, "g", |t, x: &[f64]| x.iter().map(|v| -v / (1.0 + t * t)).collect());
        let a = reverse_run(&s, &cfg, &mut stream(9, 4), None).unwrap();
        let b = reverse_run(&s, &cfg, &mut stream(9, 4), None).unwrap();
        assert_eq!(a, b);
    }
}
