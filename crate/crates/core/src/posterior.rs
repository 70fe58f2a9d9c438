//! Posterior samplers for `y = A x + β·N(0, I)`.
//!
//! Three samplers live here: the exact brute-force oracle (enumerates seeds,
//! so d ≤ 12), rejection sampling against an arbitrary unconditional
//! proposal, and a guided reverse diffusion that adds the Gaussian
//! likelihood gradient to the unconditional score. The last one has no
//! correctness guarantee and is kept as a baseline.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::diffusion::{reverse_run_with, DiffusionConfig};
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::instance::{Instance, LatticeTable, Measurement, SampleVector};
use crate::linalg::Matrix;
use crate::rng::{normal, par_map, stream, uniform};
use crate::scores::{ScoreProvider, MAX_EXACT_D};
use crate::special::{log_sum_exp, normal_log_pdf, softmax_into, std_normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorConfig {
    pub max_rounds: u64,
    pub beta: f64,
}

impl PosteriorConfig {
    pub fn new(max_rounds: u64, beta: f64) -> Result<Self> {
        let cfg = Self { max_rounds, beta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(invalid("max_rounds", "must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerStats {
    pub rounds: u64,
    pub accepted: bool,
    /// accepted / rounds for this run.
    pub acceptance_rate_estimate: f64,
    #[serde(skip)]
    pub wall_nanos: u128,
}

/// Acceptance probability `exp(−‖Ax − y‖² / (2β²))` of a proposal `x`.
pub fn acceptance_probability(a: &Matrix, x: &[f64], y: &[f64], beta: f64) -> Result<f64> {
    ensure_dim(a.rows(), y.len())?;
    let ax = a.apply(x)?;
    let r2: f64 = ax.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok((-r2 / (2.0 * beta * beta)).exp())
}

/// Rejection sampler bound to one `(A, y)`; validates `A` once so repeated
/// draws skip the norm check.
pub struct RejectionSampler<'a> {
    a: &'a Matrix,
    y: &'a [f64],
    cfg: PosteriorConfig,
}

impl<'a> RejectionSampler<'a> {
    pub fn new(a: &'a Matrix, y: &'a Measurement, cfg: PosteriorConfig) -> Result<Self> {
        cfg.validate()?;
        a.check_contraction()?;
        ensure_dim(a.rows(), y.len())?;
        Ok(Self {
            a,
            y: &y.entries,
            cfg,
        })
    }

    /// Draw proposals until one is accepted or the budget runs out. Running out
    /// is reported as `None`, not as an error.
    pub fn sample<R, P>(&self, proposal: &mut P, rng: &mut R) -> Result<(Option<Vec<f64>>, SamplerStats)>
    where
        R: Rng + ?Sized,
        P: FnMut(&mut R) -> Result<Vec<f64>>,
    {
        let start = Instant::now();
        let mut rounds = 0;
        while rounds < self.cfg.max_rounds {
            rounds += 1;
            let x = proposal(rng)?;
            ensure_dim(self.a.cols(), x.len())?;
            let q = acceptance_probability(self.a, &x, self.y, self.cfg.beta)?;
            if uniform(rng) < q {
                let stats = SamplerStats {
                    rounds,
                    accepted: true,
                    acceptance_rate_estimate: 1.0 / rounds as f64,
                    wall_nanos: start.elapsed().as_nanos(),
                };
                return Ok((Some(x), stats));
            }
        }
        let stats = SamplerStats {
            rounds,
            accepted: false,
            acceptance_rate_estimate: 0.0,
            wall_nanos: start.elapsed().as_nanos(),
        };
        Ok((None, stats))
    }
}

/// One rejection-sampling run. See [`RejectionSampler`] for repeated use.
pub fn rejection_sample<R, P>(
    mut proposal: P,
    a: &Matrix,
    y: &Measurement,
    cfg: &PosteriorConfig,
    rng: &mut R,
) -> Result<(Option<Vec<f64>>, SamplerStats)>
where
    R: Rng + ?Sized,
    P: FnMut(&mut R) -> Result<Vec<f64>>,
{
    RejectionSampler::new(a, y, *cfg)?.sample(&mut proposal, rng)
}

/// Per-atom log posterior weights of ψ_b given one measured coordinate.
/// With `clip` the noise law is the Gaussian truncated to `[-clip, clip]`.
fn atom_log_weights(table: &LatticeTable, y: f64, beta: f64, clip: Option<f64>) -> Vec<f64> {
    let log_mass = clip.map(|c| (1.0 - 2.0 * std_normal_cdf(-c / beta)).ln()).unwrap_or(0.0);
    table
        .atoms()
        .iter()
        .zip(table.log_probs())
        .map(|(&a, &lp)| match clip {
            Some(c) if (y - a).abs() > c => f64::NEG_INFINITY,
            _ => lp + normal_log_pdf(y - a, beta) - log_mass,
        })
        .collect()
}

/// The exact posterior of the instance given a tail measurement `y`.
///
/// Seeds are enumerated; per coordinate only two likelihoods exist (one per
/// phase), so setup costs `2^d · d′`.
#[derive(Debug, Clone)]
pub struct BruteForcePosterior<'a> {
    inst: &'a Instance,
    y: Measurement,
    beta: f64,
    clip: Option<f64>,
    seed_weights: Vec<f64>,
    seed_cdf: Vec<f64>,
    /// `atom_weights[j][0]` for phase +1, `[1]` for phase −1.
    atom_weights: Vec<[Vec<f64>; 2]>,
}

impl<'a> BruteForcePosterior<'a> {
    /// Uses the instance's β; a clipped measurement gets the truncated
    /// likelihood.
    pub fn new(inst: &'a Instance, y: &Measurement) -> Result<Self> {
        let p = inst.params();
        let clip = if y.clipped { Some(p.beta_max) } else { None };
        Self::with_beta(inst, y, p.beta, clip)
    }

    pub fn with_beta(inst: &'a Instance, y: &Measurement, beta: f64, clip: Option<f64>) -> Result<Self> {
        let p = inst.params();
        if p.d > MAX_EXACT_D {
            return Err(Error::TooLarge { d: p.d, max: MAX_EXACT_D });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Unsmoothed);
        }
        ensure_dim(p.d_prime, y.len())?;
        let mut atom_weights = Vec::with_capacity(p.d_prime);
        let mut coord_ll = Vec::with_capacity(p.d_prime);
        for &yj in &y.entries {
            let lw = [
                atom_log_weights(inst.table(1), yj, beta, clip),
                atom_log_weights(inst.table(-1), yj, beta, clip),
            ];
            coord_ll.push([log_sum_exp(&lw[0]), log_sum_exp(&lw[1])]);
            let mut w = [Vec::new(), Vec::new()];
            softmax_into(&lw[0], &mut w[0]);
            softmax_into(&lw[1], &mut w[1]);
            atom_weights.push(w);
        }
        let table = inst.f().truth_table()?;
        let log_w: Vec<f64> = table
            .iter()
            .map(|z| {
                z.bits()
                    .iter()
                    .zip(&coord_ll)
                    .map(|(&b, ll)| if b == 1 { ll[0] } else { ll[1] })
                    .sum()
            })
            .collect();
        if log_w.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(invalid("y", "has zero likelihood under every seed"));
        }
        let mut seed_weights = Vec::new();
        softmax_into(&log_w, &mut seed_weights);
        let mut acc = 0.0;
        let seed_cdf = seed_weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            inst,
            y: y.clone(),
            beta,
            clip,
            seed_weights,
            seed_cdf,
            atom_weights,
        })
    }

    /// Posterior weights over seeds, indexed by [`crate::instance::BitString::to_index`].
    pub fn seed_weights(&self) -> &[f64] {
        &self.seed_weights
    }

    pub fn measurement(&self) -> &Measurement {
        &self.y
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn clip(&self) -> Option<f64> {
        self.clip
    }

    pub fn sample_seed<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = uniform(rng) * self.seed_cdf.last().copied().unwrap_or(1.0);
        self.seed_cdf.partition_point(|&c| c <= u).min(self.seed_cdf.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleVector {
        let p = self.inst.params();
        let idx = self.sample_seed(rng);
        let s = crate::instance::BitString::from_index(idx, p.d);
        let z = self.inst.f().eval(&s);
        let mut x = Vec::with_capacity(p.dim());
        for &si in s.bits() {
            x.push(p.r * si as f64 + normal(rng));
        }
        for (j, &zj) in z.bits().iter().enumerate() {
            let table = self.inst.table(zj);
            let w = &self.atom_weights[j][if zj == 1 { 0 } else { 1 }];
            let u = uniform(rng);
            let mut acc = 0.0;
            let mut atom = *table.atoms().last().unwrap();
            for (k, wk) in w.iter().enumerate() {
                acc += wk;
                if u < acc {
                    atom = table.atoms()[k];
                    break;
                }
            }
            x.push(atom);
        }
        SampleVector::unscaled(x)
    }
}

/// Convenience wrapper: one exact posterior draw.
pub fn brute_force_posterior<R: Rng + ?Sized>(inst: &Instance, y: &Measurement, rng: &mut R) -> Result<SampleVector> {
    Ok(BruteForcePosterior::new(inst, y)?.sample(rng))
}

/// Reverse diffusion guided by `Aᵀ(y − Ax)/(β² + t)`. No correctness contract.
pub fn heuristic_posterior_sample<R: Rng + ?Sized>(
    provider: &dyn ScoreProvider,
    a: &Matrix,
    y: &Measurement,
    beta: f64,
    dcfg: &DiffusionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ensure_dim(a.cols(), provider.dim())?;
    ensure_dim(a.rows(), y.len())?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be non-negative and finite"));
    }
    let b2 = beta * beta;
    reverse_run_with(
        provider,
        dcfg,
        rng,
        None,
        |t, x| {
            let ax = a.apply(x).ok()?;
            let resid: Vec<f64> = y.entries.iter().zip(&ax).map(|(yi, v)| (yi - v) / (b2 + t)).collect();
            a.apply_transpose(&resid).ok()
        },
        |_, _| {},
    )
}

/// Probability that one exact proposal is accepted when the first `m` tail
/// coordinates are measured with noise `beta`:
/// `2^{-d} Σ_s Π_j E_{a∼ψ_{f(s)_j}} exp(−(a − y_j)²/(2β²))`.
pub fn exact_acceptance_probability(inst: &Instance, y: &[f64], beta: f64) -> Result<f64> {
    let p = inst.params();
    if p.d > MAX_EXACT_D {
        return Err(Error::TooLarge { d: p.d, max: MAX_EXACT_D });
    }
    if y.len() > p.d_prime {
        return Err(invalid("y", "longer than the tail block"));
    }
    let c: Vec<[f64; 2]> = y
        .iter()
        .map(|&yj| {
            let f = |b: i8| {
                let t = inst.table(b);
                t.atoms()
                    .iter()
                    .zip(t.log_probs())
                    .map(|(&a, &lp)| (lp - (a - yj) * (a - yj) / (2.0 * beta * beta)).exp())
                    .sum::<f64>()
            };
            [f(1), f(-1)]
        })
        .collect();
    let table = inst.f().truth_table()?;
    let total: f64 = table
        .iter()
        .map(|z| {
            c.iter()
                .zip(z.bits())
                .map(|(cj, &b)| if b == 1 { cj[0] } else { cj[1] })
                .product::<f64>()
        })
        .sum();
    Ok(total / table.len() as f64)
}

/// One row of an acceptance-rate table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceRow {
    pub beta: f64,
    pub m: usize,
    pub trials: usize,
    /// Mean over trials of the exact expected rounds `1/P(accept | y)`.
    pub mean_rounds: f64,
    /// Mean over trials of `ln(1/P(accept | y))`; the log of the geometric mean.
    pub log_rounds: f64,
    /// Empirical mean rounds from actual rejection runs (0 if not run).
    pub empirical_mean_rounds: f64,
    /// Runs that hit the round budget.
    pub budget_failures: usize,
}

/// Acceptance rates of rejection sampling with the exact proposal.
///
/// For every `(β, m)` each trial draws `x ∼ g`, measures the first `m` tail
/// coordinates with noise `β`, and records the exact expected number of
/// rounds. When `empirical_rounds` is set, a budgeted rejection run is also
/// performed per trial.
pub fn acceptance_curve(
    inst: &Instance,
    betas: &[f64],
    ms: &[usize],
    trials: usize,
    seed: u64,
    empirical_rounds: Option<u64>,
    jobs: usize,
) -> Result<Vec<AcceptanceRow>> {
    let p = inst.params();
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let mut rows = Vec::new();
    for (bi, &beta) in betas.iter().enumerate() {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", "must be positive and finite"));
        }
        for (mi, &m) in ms.iter().enumerate() {
            if m > p.d_prime {
                return Err(invalid("m", "exceeds the tail dimension"));
            }
            let coords: Vec<usize> = (p.d..p.d + m).collect();
            let a = Matrix::coordinate_selector(p.dim(), &coords);
            let stream_base = ((bi * ms.len() + mi) as u64) << 32;
            let results: Vec<Result<(f64, Option<SamplerStats>)>> = par_map(trials, jobs, |t| {
                let mut rng = stream(seed, stream_base + t as u64);
                let (_, x) = inst.sample_unconditional(&mut rng);
                let y: Vec<f64> = x.tail(p.d)[..m].iter().map(|v| v + beta * normal(&mut rng)).collect();
                let pa = exact_acceptance_probability(inst, &y, beta)?;
                let stats = match empirical_rounds {
                    Some(budget) => {
                        let ym = Measurement::new(y);
                        let cfg = PosteriorConfig::new(budget, beta)?;
                        let sampler = RejectionSampler::new(&a, &ym, cfg)?;
                        let mut prop = |r: &mut crate::rng::StreamRng| Ok(inst.sample_unconditional(r).1.entries);
                        Some(sampler.sample(&mut prop, &mut rng)?.1)
                    }
                    None => None,
                };
                Ok((pa, stats))
            });
            let mut sum_rounds = 0.0;
            let mut sum_log = 0.0;
            let mut emp = 0.0;
            let mut failures = 0;
            for r in results {
                let (pa, stats) = r?;
                sum_rounds += 1.0 / pa;
                sum_log += -pa.ln();
                if let Some(s) = stats {
                    emp += s.rounds as f64;
                    failures += usize::from(!s.accepted);
                }
            }
            let n = trials as f64;
            rows.push(AcceptanceRow {
                beta,
                m,
                trials,
                mean_rounds: sum_rounds / n,
                log_rounds: sum_log / n,
                empirical_mean_rounds: if empirical_rounds.is_some() { emp / n } else { 0.0 },
                budget_failures: failures,
            });
        }
    }
    Ok(rows)
}

/// Least-squares line `y = a + b·x`; returns `(a, b)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    ensure_dim(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(invalid("x", "need at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("x", "all points coincide"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}
