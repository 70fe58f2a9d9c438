//! Inverting a candidate one-way function with a posterior sampler.
//!
//! Given `z = f(s)` for an unknown seed `s`, draw `y ∼ h_z` (the tail
//! measurement law restricted to seeds mapping to `z`), ask the sampler for
//! `x̂ ∼ p(x | y)`, and guess `round_r(x̂_head)`. Success means
//! `f(guess) = z`.

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use crate::circuit::{BooleanCircuit, Gate, GateKind};
use crate::diffusion::DiffusionConfig;
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::instance::{bits_eps, round_r, BitString, Instance, Measurement, OneWayCandidate, SampleVector};
use crate::linalg::Matrix;
use crate::posterior::{heuristic_posterior_sample, BruteForcePosterior, PosteriorConfig, RejectionSampler};
use crate::rng::{normal, par_map, stream, uniform, StreamRng};
use crate::scores::ScoreProvider;

/// Largest support allowed for one output of [`random_circuit_owf`].
pub const MAX_LOCALITY: usize = 8;

/// `y_j = ψ_{z_j} draw + β·N(0,1)`: a measurement from `h_z`.
pub fn sample_measurement_for_target<R: Rng + ?Sized>(inst: &Instance, z: &BitString, rng: &mut R) -> Result<Measurement> {
    let p = inst.params();
    ensure_dim(p.d_prime, z.len())?;
    Ok(Measurement::new(
        z.bits().iter().map(|&b| inst.table(b).sample(rng) + p.beta * normal(rng)).collect(),
    ))
}

/// A posterior sampler for the instance's tail measurement. `None` means the
/// sampler gave up (for example, a rejection budget ran out).
pub trait PosteriorSampler: Sync {
    fn name(&self) -> &str;
    fn sample(&self, inst: &Instance, y: &Measurement, rng: &mut StreamRng) -> Result<Option<SampleVector>>;
}

/// The exact oracle.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForceSampler;

impl PosteriorSampler for BruteForceSampler {
    fn name(&self) -> &str {
        "brute-force"
    }

    fn sample(&self, inst: &Instance, y: &Measurement, rng: &mut StreamRng) -> Result<Option<SampleVector>> {
        Ok(Some(BruteForcePosterior::new(inst, y)?.sample(rng)))
    }
}

/// Rejection sampling with the exact unconditional proposal and a round
/// budget.
#[derive(Debug, Clone, Copy)]
pub struct RejectionExactSampler {
    pub max_rounds: u64,
}

impl PosteriorSampler for RejectionExactSampler {
    fn name(&self) -> &str {
        "rejection"
    }

    fn sample(&self, inst: &Instance, y: &Measurement, rng: &mut StreamRng) -> Result<Option<SampleVector>> {
        let p = inst.params();
        let a = Matrix::tail_selector(p.d, p.d_prime);
        let cfg = PosteriorConfig::new(self.max_rounds, p.beta)?;
        let sampler = RejectionSampler::new(&a, y, cfg)?;
        let mut prop = |r: &mut StreamRng| Ok(inst.sample_unconditional(r).1.entries);
        let (x, _) = sampler.sample(&mut prop, rng)?;
        Ok(x.map(SampleVector::unscaled))
    }
}

/// Likelihood-guided reverse diffusion over an unconditional score.
pub struct HeuristicSampler {
    pub provider: Box<dyn ScoreProvider>,
    pub diffusion: DiffusionConfig,
}

impl PosteriorSampler for HeuristicSampler {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn sample(&self, inst: &Instance, y: &Measurement, rng: &mut StreamRng) -> Result<Option<SampleVector>> {
        let p = inst.params();
        let a = Matrix::tail_selector(p.d, p.d_prime);
        let x = heuristic_posterior_sample(self.provider.as_ref(), &a, y, p.beta, &self.diffusion, rng)?;
        Ok(Some(SampleVector::unscaled(x)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertOutcome {
    pub guess: Option<BitString>,
    pub measurement: Measurement,
    /// Whether `Bits_ε(y) = z` for the synthesized measurement.
    pub bits_match: bool,
    pub sampler_nanos: u128,
}

/// One run of the inversion algorithm on target `z`.
pub fn invert(sampler: &dyn PosteriorSampler, inst: &Instance, z: &BitString, rng: &mut StreamRng) -> Result<InvertOutcome> {
    let p = inst.params();
    let y = sample_measurement_for_target(inst, z, rng)?;
    let bits_match = bits_eps(&y.entries, p.eps) == *z;
    let start = Instant::now();
    let x = sampler.sample(inst, &y, rng)?;
    let sampler_nanos = start.elapsed().as_nanos();
    Ok(InvertOutcome {
        guess: x.map(|x| round_r(x.head(p.d))),
        measurement: y,
        bits_match,
        sampler_nanos,
    })
}

/// Aggregate of an inversion experiment. Timing is kept out of the
/// serialized form so reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionReport {
    pub sampler: String,
    pub trials: usize,
    /// `f(guess) = z`.
    pub successes: usize,
    /// `guess = s`.
    pub exact_seed_hits: usize,
    /// Sampler returned nothing.
    pub no_guess: usize,
    /// Trials whose measurement decodes to the target: `Bits_ε(y) = z`.
    pub bits_consistent: usize,
    /// Successes among the `bits_consistent` trials.
    pub successes_given_bits: usize,
    /// `f(guess) = Bits_ε(y)`.
    pub decode_agreements: usize,
    #[serde(skip)]
    pub mean_sampler_nanos: f64,
}

impl InversionReport {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// `trials` independent targets `z = f(s)` with uniform `s`; trial `i` runs on
/// stream `i` of `seed`, so the counts do not depend on `jobs`.
pub fn inversion_experiment(
    inst: &Instance,
    sampler: &dyn PosteriorSampler,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<InversionReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let p = inst.params();
    let rows = par_map(trials, jobs, |i| -> Result<_> {
        let mut rng = stream(seed, i as u64);
        let s = BitString::random(p.d, &mut rng);
        let z = inst.f().eval(&s);
        let out = invert(sampler, inst, &z, &mut rng)?;
        let decoded = bits_eps(&out.measurement.entries, p.eps);
        let fz = out.guess.as_ref().map(|g| inst.f().eval(g));
        Ok((
            fz.as_ref() == Some(&z),
            out.guess.as_ref() == Some(&s),
            out.guess.is_none(),
            out.bits_match,
            fz.as_ref() == Some(&decoded),
            out.sampler_nanos,
        ))
    });
    let mut r = InversionReport {
        sampler: sampler.name().to_string(),
        trials,
        successes: 0,
        exact_seed_hits: 0,
        no_guess: 0,
        bits_consistent: 0,
        successes_given_bits: 0,
        decode_agreements: 0,
        mean_sampler_nanos: 0.0,
    };
    let mut nanos = 0.0;
    for row in rows {
        let (ok, hit, none, bits, agree, ns) = row?;
        r.successes += usize::from(ok);
        r.exact_seed_hits += usize::from(hit);
        r.no_guess += usize::from(none);
        r.bits_consistent += usize::from(bits);
        r.successes_given_bits += usize::from(ok && bits);
        r.decode_agreements += usize::from(agree);
        nanos += ns as f64;
    }
    r.mean_sampler_nanos = nanos / trials as f64;
    Ok(r)
}

/// Every seed with `f(s) = z`, by enumeration.
pub fn preimages(f: &OneWayCandidate, z: &BitString) -> Result<Vec<BitString>> {
    ensure_dim(f.output_len(), z.len())?;
    Ok(f.truth_table()?
        .iter()
        .enumerate()
        .filter(|(_, v)| *v == z)
        .map(|(i, _)| BitString::from_index(i, f.input_len()))
        .collect())
}

/// Changes the output length to `l`.
///
/// Longer: append constant `+1` outputs. Shorter: keep only the first
/// `n' = ceil(l·n/m)` inputs (the rest are fixed to `+1`) and the first `l`
/// outputs.
pub fn stretch_owf(f: &OneWayCandidate, l: usize) -> Result<OneWayCandidate> {
    if l == 0 {
        return Err(invalid("l", "must be at least 1"));
    }
    let c = f.circuit();
    let (n, m) = (c.input_len(), c.output_len());
    if l == m {
        return Ok(f.clone());
    }
    if n == 0 {
        return Err(invalid("f", "needs at least one input to build constants"));
    }
    let n_new = if l > m { n } else { (l * n).div_ceil(m).clamp(1, n) };
    // Wire layout: new inputs, then NOT u0 and the constant u0 AND NOT u0,
    // then the original gates.
    let konst = n_new + 1;
    let map = |w: usize| -> usize {
        if w < n_new {
            w
        } else if w < n {
            konst
        } else {
            w - n + n_new + 2
        }
    };
    let mut gates = vec![
        Gate {
            kind: GateKind::Not,
            inputs: vec![0],
        },
        Gate {
            kind: GateKind::And,
            inputs: vec![0, n_new],
        },
    ];
    for g in c.gates() {
        gates.push(Gate {
            kind: g.kind,
            inputs: g.inputs.iter().map(|&w| map(w)).collect(),
        });
    }
    let mut outputs: Vec<usize> = c.outputs().iter().map(|&w| map(w)).collect();
    outputs.truncate(l);
    outputs.resize(l, konst);
    Ok(OneWayCandidate::new(BooleanCircuit::new(n_new, gates, outputs)?))
}

/// A seed-deterministic local circuit: every output is computed by its own
/// cone of gates (fan-in ≤ 3) reading at most [`MAX_LOCALITY`] inputs, and no
/// output is constant.
pub fn random_circuit_owf(n: usize, m: usize, gate_count: usize, seed: u64) -> Result<OneWayCandidate> {
    if n == 0 || m == 0 {
        return Err(invalid("n", "need at least one input and one output"));
    }
    if gate_count < m {
        return Err(invalid("gate_count", "must be at least the output count"));
    }
    let mut rng = stream(seed, 0);
    let mut circuit = BooleanCircuit::new(n, Vec::new(), Vec::new())?;
    let mut outputs = Vec::with_capacity(m);
    for k in 0..m {
        let budget = gate_count / m + usize::from(k < gate_count % m);
        let mut placed = None;
        for _ in 0..64 {
            let mut trial = circuit.clone();
            let out = random_cone(&mut trial, n, budget, &mut rng)?;
            if !is_constant(&trial, out) {
                placed = Some((trial, out));
                break;
            }
        }
        let (c, out) = placed.ok_or_else(|| Error::Circuit(format!("output {k}: every attempt was constant")))?;
        circuit = c;
        outputs.push(out);
    }
    circuit.set_outputs(outputs)?;
    Ok(OneWayCandidate::new(circuit))
}

fn random_cone(c: &mut BooleanCircuit, n: usize, gates: usize, rng: &mut StreamRng) -> Result<usize> {
    let lo = n.min(3);
    let hi = n.min(MAX_LOCALITY);
    let size = rng.random_range(lo..=hi);
    let mut avail: Vec<usize> = sample_indices(rng, n, size).into_vec();
    avail.sort_unstable();
    let mut last = None;
    for _ in 0..gates {
        let u = uniform(rng);
        let fan = if avail.len() == 1 { 1 } else { rng.random_range(2..=3.min(avail.len())) };
        let kind = if fan == 1 || u < 0.2 {
            GateKind::Not
        } else if u < 0.6 {
            GateKind::And
        } else {
            GateKind::Or
        };
        let mut inputs = Vec::new();
        if let Some(w) = last {
            inputs.push(w);
        }
        let want = if kind == GateKind::Not { 1 } else { fan };
        while inputs.len() < want {
            let w = avail[rng.random_range(0..avail.len())];
            if !inputs.contains(&w) {
                inputs.push(w);
            }
        }
        let w = c.push_gate(kind, inputs)?;
        avail.push(w);
        last = Some(w);
    }
    Ok(last.expect("at least one gate per output"))
}

fn is_constant(c: &BooleanCircuit, wire: usize) -> bool {
    let support = wire_support(c, wire);
    let n = c.input_len();
    let mut first = None;
    for mask in 0..1usize << support.len() {
        let mut input = vec![false; n];
        for (b, &i) in support.iter().enumerate() {
            input[i] = mask >> b & 1 == 1;
        }
        let v = c.eval_wires(&input)[wire];
        match first {
            None => first = Some(v),
            Some(f) if f != v => return false,
            _ => {}
        }
    }
    true
}

fn wire_support(c: &BooleanCircuit, wire: usize) -> Vec<usize> {
    let n = c.input_len();
    let mut seen = vec![false; c.wire_count()];
    let mut stack = vec![wire];
    let mut support = Vec::new();
    while let Some(w) = stack.pop() {
        if std::mem::replace(&mut seen[w], true) {
            continue;
        }
        if w < n {
            support.push(w);
        } else {
            stack.extend(&c.gates()[w - n].inputs);
        }
    }
    support.sort_unstable();
    support
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceParams;

    #[test]
    fn beta_zero_lands_on_lattice() {
        let params = InstanceParams::new(1, 1, 30.0, 1.0, 0.0, 0.25).unwrap();
        let inst = Instance::new(params, OneWayCandidate::identity(1)).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            let y = sample_measurement_for_target(&inst, &BitString::ones(1), &mut rng).unwrap();
            assert_eq!(y.entries[0], y.entries[0].round());
        }
    }

    #[test]
    fn padding_appends_plus_ones() {
        let f = OneWayCandidate::identity(4);
        let g = stretch_owf(&f, 6).unwrap();
        assert_eq!(g.input_len(), 4);
        for i in 0..16 {
            let s = BitString::from_index(i, 4);
            let v = g.eval(&s);
            assert_eq!(&v.bits()[..4], s.bits());
            assert_eq!(&v.bits()[4..], &[1, 1]);
        }
        assert_eq!(stretch_owf(&f, 4).unwrap(), f);
        assert!(stretch_owf(&f, 0).is_err());
    }

    #[test]
    fn truncation_matches_restricted_evaluation() {
        let f = random_circuit_owf(8, 8, 24, 5).unwrap();
        let g = stretch_owf(&f, 2).unwrap();
        assert_eq!(g.input_len(), 2);
        assert_eq!(g.output_len(), 2);
        for i in 0..4 {
            let u = BitString::from_index(i, 2);
            let mut full = u.bits().to_vec();
            full.resize(8, 1);
            let direct = f.eval(&BitString::new(full).unwrap());
            assert_eq!(g.eval(&u).bits(), &direct.bits()[..2]);
        }
    }

    #[test]
    fn random_circuit_shape() {
        let f = random_circuit_owf(8, 8, 24, 11).unwrap();
        assert_eq!(f, random_circuit_owf(8, 8, 24, 11).unwrap());
        assert_ne!(f, random_circuit_owf(8, 8, 24, 12).unwrap());
        for g in f.circuit().gates() {
            assert!(g.inputs.len() <= 3);
        }
        for s in f.circuit().output_supports() {
            assert!(s.len() <= MAX_LOCALITY);
        }
        let table = f.truth_table().unwrap();
        for j in 0..8 {
            assert!(table.iter().any(|v| v.get(j) == 1) && table.iter().any(|v| v.get(j) == -1));
        }
        assert!(random_circuit_owf(8, 8, 7, 1).is_err());
    }

    #[test]
    fn preimage_oracle() {
        let f = random_circuit_owf(8, 8, 24, 3).unwrap();
        for i in 0..256 {
            let s = BitString::from_index(i, 8);
            let pre = preimages(&f, &f.eval(&s)).unwrap();
            assert!(pre.contains(&s));
        }
    }

    #[test]
    fn constant_f_always_inverts() {
        let params = InstanceParams::canonical(3, 2);
        let inst = Instance::new(params, OneWayCandidate::constant(3, 2, -1).unwrap()).unwrap();
        let r = inversion_experiment(&inst, &BruteForceSampler, 20, 1, 1).unwrap();
        assert_eq!(r.successes, 20);
        assert!(inversion_experiment(&inst, &BruteForceSampler, 0, 1, 1).is_err());
    }

    #[test]
    fn identity_hits_are_successes() {
        let inst = Instance::new(InstanceParams::canonical(4, 4), OneWayCandidate::identity(4)).unwrap();
        let a = inversion_experiment(&inst, &BruteForceSampler, 50, 9, 1).unwrap();
        let b = inversion_experiment(&inst, &BruteForceSampler, 50, 9, 3).unwrap();
        assert_eq!(a.successes, a.exact_seed_hits);
        assert!(a.successes >= 48);
        let strip = |mut r: InversionReport| {
            r.mean_sampler_nanos = 0.0;
            r
        };
        assert_eq!(strip(a), strip(b));
    }
}
