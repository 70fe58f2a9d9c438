//! The hard instance family.
//!
//! A seed `s ∈ {±1}^d` picks the hypercube vertex `R·s`; the first `d`
//! coordinates are `N(R·s_i, 1)` and the remaining `d'` coordinates are
//! discretized Gaussians whose lattice phase encodes `f(s)`. Observing only
//! the tail reveals `f(s)`, so posterior sampling recovers a preimage.

use crate::circuit::{BooleanCircuit, Gate, GateKind};
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::fmt::g17;
use crate::linalg::Matrix;
use crate::rng::{normal, uniform};
use crate::special::normal_log_pdf;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Atoms farther than this from the origin carry mass below 1e-30.
pub const LATTICE_RADIUS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub d: usize,
    pub d_prime: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub eps: f64,
    pub beta: f64,
    pub beta_max: f64,
}

impl InstanceParams {
    pub fn new(d: usize, d_prime: usize, r: f64, eps: f64, beta: f64, beta_max: f64) -> Result<Self> {
        let p = Self {
            d,
            d_prime,
            r,
            eps,
            beta,
            beta_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Desk-scale defaults: R = 30, ε = 1, β = ε/40, β_max = ε/4.
    pub fn canonical(d: usize, d_prime: usize) -> Self {
        Self {
            d,
            d_prime,
            r: 30.0,
            eps: 1.0,
            beta: 1.0 / 40.0,
            beta_max: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d + self.d_prime == 0 {
            return Err(invalid("d", "d + d_prime must be at least 1"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("R", "must be positive and finite"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps", "must be positive and finite"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be non-negative and finite"));
        }
        if !(self.beta_max > 0.0) {
            return Err(invalid("beta_max", "must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d + self.d_prime
    }

    /// Conditions for exact decoding with failure probability `delta`.
    pub fn reduction_ready(&self, delta: f64) -> Result<()> {
        self.validate()?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if self.beta_max > self.eps / 4.0 {
            return Err(invalid(
                "beta_max",
                format!("{} exceeds eps/4 = {}", self.beta_max, self.eps / 4.0),
            ));
        }
        let dd = ((self.d * self.d_prime).max(1)) as f64;
        let need = (32.0 * (dd / delta).ln()).sqrt();
        if self.r < need {
            return Err(invalid("R", format!("{} is below sqrt(32 log(d d'/delta)) = {need}", self.r)));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "d = {}\nd_prime = {}\nR = {}\neps = {}\nbeta = {}\nbeta_max = {}\n",
            self.d,
            self.d_prime,
            g17(self.r),
            g17(self.eps),
            g17(self.beta),
            g17(self.beta_max)
        )
    }

    /// Parses the block written by [`InstanceParams::to_kv`]. Every key is
    /// required and unknown keys are rejected.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 6] = [None; 6];
        const KEYS: [&str; 6] = ["d", "d_prime", "R", "eps", "beta", "beta_max"];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: "expected `key = value`".into(),
            })?;
            let k = k.trim();
            let slot = KEYS.iter().position(|&key| key == k).ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown key `{k}`"),
            })?;
            let v: f64 = v.trim().parse().map_err(|e| Error::Parse {
                line,
                msg: format!("{k}: {e}"),
            })?;
            vals[slot] = Some(v);
        }
        let get = |i: usize| {
            vals[i].ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing key `{}`", KEYS[i]),
            })
        };
        let count = |i: usize| -> Result<usize> {
            let v = get(i)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("`{}` must be a non-negative integer", KEYS[i]),
                });
            }
            Ok(v as usize)
        };
        Self::new(count(0)?, count(1)?, get(2)?, get(3)?, get(4)?, get(5)?)
    }
}

/// A vector of ±1 entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString(Vec<i8>);

impl BitString {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(invalid("bits", "entries must be +1 or -1"));
        }
        Ok(Self(bits))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Bit `i` of `index` set means entry `i` is `-1`.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|i| if index >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &b)| if b == -1 { 1usize << i } else { 0 })
            .sum()
    }

    /// `-1` is read as *true*.
    pub fn from_bools(bits: &[bool]) -> Self {
        Self(bits.iter().map(|&b| if b { -1 } else { 1 }).collect())
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.0.iter().map(|&b| b == -1).collect()
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(invalid("bits", format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(Self)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVector {
    pub entries: Vec<f64>,
    pub scaled: bool,
}

impl SampleVector {
    pub fn unscaled(entries: Vec<f64>) -> Self {
        Self {
            entries,
            scaled: false,
        }
    }

    /// Divides by `r`; a no-op on vectors that are already scaled.
    pub fn scale(&self, r: f64) -> Self {
        if self.scaled {
            return self.clone();
        }
        Self {
            entries: self.entries.iter().map(|v| v / r).collect(),
            scaled: true,
        }
    }

    pub fn head(&self, d: usize) -> &[f64] {
        &self.entries[..d]
    }

    pub fn tail(&self, d: usize) -> &[f64] {
        &self.entries[d..]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub entries: Vec<f64>,
    pub clipped: bool,
}

impl Measurement {
    pub fn new(entries: Vec<f64>) -> Self {
        Self {
            entries,
            clipped: false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The candidate one-way function `f: {±1}^n → {±1}^m`, as a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneWayCandidate {
    circuit: BooleanCircuit,
}

impl OneWayCandidate {
    pub fn new(circuit: BooleanCircuit) -> Self {
        Self { circuit }
    }

    /// `f(s) = s`.
    pub fn identity(n: usize) -> Self {
        Self::new(BooleanCircuit::identity(n))
    }

    /// `f: {±1}^n → {±1}^0`, for instances without a tail.
    pub fn no_outputs(n: usize) -> Self {
        Self::new(BooleanCircuit::new(n, Vec::new(), Vec::new()).expect("no gates"))
    }

    /// Every output is the constant `value`. Needs `n ≥ 1`.
    pub fn constant(n: usize, m: usize, value: i8) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "constant candidate needs at least one input"));
        }
        // x0 AND NOT x0 is false (+1); x0 OR NOT x0 is true (-1).
        let kind = if value == 1 { GateKind::And } else { GateKind::Or };
        let gates = vec![
            Gate {
                kind: GateKind::Not,
                inputs: vec![0],
            },
            Gate {
                kind,
                inputs: vec![0, n],
            },
        ];
        Ok(Self::new(BooleanCircuit::new(n, gates, vec![n + 1; m])?))
    }

    pub fn input_len(&self) -> usize {
        self.circuit.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.circuit.output_len()
    }

    pub fn circuit(&self) -> &BooleanCircuit {
        &self.circuit
    }

    pub fn eval(&self, s: &BitString) -> BitString {
        BitString::from_bools(&self.circuit.eval(&s.to_bools()))
    }

    /// `f` on every seed, indexed by [`BitString::to_index`].
    pub fn truth_table(&self) -> Result<Vec<BitString>> {
        let n = self.input_len();
        if n > 24 {
            return Err(Error::TooLarge { d: n, max: 24 });
        }
        Ok((0..1usize << n).map(|i| self.eval(&BitString::from_index(i, n))).collect())
    }
}

/// Lattice offset φ_b: 0 for b = +1, ε/2 for b = −1.
#[inline]
pub fn phase_offset(b: i8, eps: f64) -> f64 {
    if b == 1 {
        0.0
    } else {
        eps / 2.0
    }
}

/// The discretized Gaussian ψ_b as a finite table of atoms `kε + φ_b` with
/// `|atom| ≤ 12`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeTable {
    eps: f64,
    phase: f64,
    atoms: Vec<f64>,
    log_probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl LatticeTable {
    pub fn new(b: i8, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", "must be positive and finite"));
        }
        let phase = phase_offset(b, eps);
        let kmin = ((-LATTICE_RADIUS - phase) / eps).ceil() as i64;
        let kmax = ((LATTICE_RADIUS - phase) / eps).floor() as i64;
        let atoms: Vec<f64> = (kmin..=kmax).map(|k| k as f64 * eps + phase).collect();
        let logw: Vec<f64> = atoms.iter().map(|&a| -0.5 * a * a).collect();
        let lz = crate::special::log_sum_exp(&logw);
        let log_probs: Vec<f64> = logw.iter().map(|l| l - lz).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = log_probs
            .iter()
            .map(|l| {
                acc += l.exp();
                acc
            })
            .collect();
        let total = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(Self {
            eps,
            phase,
            atoms,
            log_probs,
            cdf,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = uniform(rng);
        let i = self.cdf.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[i]
    }

    /// Draws an atom from the posterior given `y = atom + N(0, beta²)`.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, y: f64, beta: f64, rng: &mut R) -> f64 {
        if beta == 0.0 {
            return nearest_atom(y, self.eps, self.phase);
        }
        let logw: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.log_probs)
            .map(|(&a, &lp)| lp + normal_log_pdf(y - a, beta))
            .collect();
        let mut w = Vec::new();
        crate::special::softmax_into(&logw, &mut w);
        let u = uniform(rng);
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if u < acc {
                return self.atoms[i];
            }
        }
        *self.atoms.last().unwrap()
    }

    /// log of `(ψ_b ∗ N(0, beta²))(y)`, by direct sum over atoms.
    pub fn log_convolved_density(&self, y: f64, beta: f64) -> f64 {
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.log_probs)
            .map(|(&a, &lp)| lp + normal_log_pdf(y - a, beta))
            .collect();
        crate::special::log_sum_exp(&terms)
    }
}

fn nearest_atom(y: f64, eps: f64, phase: f64) -> f64 {
    ((y - phase) / eps).round() * eps + phase
}

/// One draw from ψ_b. Builds the table each call; reuse a [`LatticeTable`]
/// in loops.
pub fn sample_discretized_gaussian<R: Rng + ?Sized>(b: i8, eps: f64, rng: &mut R) -> Result<f64> {
    Ok(LatticeTable::new(b, eps)?.sample(rng))
}

/// Parameters, candidate, and lattice tables bundled for sampling.
#[derive(Debug, Clone)]
pub struct Instance {
    params: InstanceParams,
    f: OneWayCandidate,
    tables: [LatticeTable; 2],
}

impl Instance {
    pub fn new(params: InstanceParams, f: OneWayCandidate) -> Result<Self> {
        params.validate()?;
        ensure_dim(params.d, f.input_len())?;
        ensure_dim(params.d_prime, f.output_len())?;
        let tables = [LatticeTable::new(1, params.eps)?, LatticeTable::new(-1, params.eps)?];
        Ok(Self { params, f, tables })
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn f(&self) -> &OneWayCandidate {
        &self.f
    }

    /// Table of ψ_b.
    pub fn table(&self, b: i8) -> &LatticeTable {
        &self.tables[if b == 1 { 0 } else { 1 }]
    }

    /// A draw from g_s.
    pub fn sample_component<R: Rng + ?Sized>(&self, s: &BitString, rng: &mut R) -> Result<SampleVector> {
        ensure_dim(self.params.d, s.len())?;
        let z = self.f.eval(s);
        Ok(self.sample_with_phases(s, &z, rng))
    }

    /// A draw from g_s when `z = f(s)` is already known.
    pub fn sample_with_phases<R: Rng + ?Sized>(&self, s: &BitString, z: &BitString, rng: &mut R) -> SampleVector {
        let mut x = Vec::with_capacity(self.params.dim());
        for &si in s.bits() {
            x.push(self.params.r * si as f64 + normal(rng));
        }
        for &zi in z.bits() {
            x.push(self.table(zi).sample(rng));
        }
        SampleVector::unscaled(x)
    }

    /// Uniform seed and a draw from its component.
    pub fn sample_unconditional<R: Rng + ?Sized>(&self, rng: &mut R) -> (BitString, SampleVector) {
        let s = BitString::random(self.params.d, rng);
        let x = self.sample_component(&s, rng).expect("seed length matches d");
        (s, x)
    }

    /// `y = x_tail + β·N(0, I)`.
    pub fn measure<R: Rng + ?Sized>(&self, x: &SampleVector, rng: &mut R) -> Result<Measurement> {
        ensure_dim(self.params.dim(), x.entries.len())?;
        let beta = self.params.beta;
        Ok(Measurement::new(
            x.tail(self.params.d).iter().map(|v| v + beta * normal(rng)).collect(),
        ))
    }

    /// As [`Instance::measure`] with each noise coordinate truncated to
    /// `[-β_max, β_max]`.
    pub fn measure_clipped<R: Rng + ?Sized>(&self, x: &SampleVector, rng: &mut R) -> Result<Measurement> {
        ensure_dim(self.params.dim(), x.entries.len())?;
        let (beta, bmax) = (self.params.beta, self.params.beta_max);
        let entries = x
            .tail(self.params.d)
            .iter()
            .map(|v| v + clipped_noise(beta, bmax, rng))
            .collect();
        Ok(Measurement {
            entries,
            clipped: true,
        })
    }
}

/// `β·N(0,1)` conditioned on `|·| ≤ β_max`, by rejection.
pub fn clipped_noise<R: Rng + ?Sized>(beta: f64, beta_max: f64, rng: &mut R) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    // Switch to the uniform proposal when the window is much narrower than β.
    if beta_max < 0.5 * beta {
        loop {
            let v = (2.0 * uniform(rng) - 1.0) * beta_max;
            if uniform(rng) < (-0.5 * (v / beta) * (v / beta)).exp() {
                return v;
            }
        }
    }
    loop {
        let v = beta * normal(rng);
        if v.abs() <= beta_max {
            return v;
        }
    }
}

/// `y = A x + β·N(0, I)` for a contraction `A`.
pub fn measure_general<R: Rng + ?Sized>(a: &Matrix, x: &SampleVector, beta: f64, rng: &mut R) -> Result<Measurement> {
    a.check_contraction()?;
    let ax = a.apply(&x.entries)?;
    Ok(Measurement::new(ax.into_iter().map(|v| v + beta * normal(rng)).collect()))
}

/// Nearest vertex of `{±R}` per coordinate, as signs. Zero maps to `+1`.
pub fn round_r(v: &[f64]) -> BitString {
    BitString(v.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect())
}

/// Nearest multiple of `eps/2`: even index decodes to `+1`, odd to `-1`.
/// Exact midpoints go to the index of smaller magnitude.
pub fn bits_eps(y: &[f64], eps: f64) -> BitString {
    BitString(y.iter().map(|&v| if half_grid_index(v, eps) % 2 == 0 { 1 } else { -1 }).collect())
}

fn half_grid_index(v: f64, eps: f64) -> i64 {
    let u = v / (eps / 2.0);
    let lo = u.floor();
    let frac = u - lo;
    let j = if frac < 0.5 {
        lo
    } else if frac > 0.5 {
        lo + 1.0
    } else if lo.abs() <= (lo + 1.0).abs() {
        lo
    } else {
        lo + 1.0
    };
    j as i64
}
