//! Fast invariant suite. Each check is a reduced-size version of an
//! acceptance criterion or a module invariant.

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use dpslab::diagnostics::{clipped_noise_tv, conditional_tv_check, tv_binned_max, DEFAULT_BINS};
use dpslab::instance::{bits_eps, round_r, BitString, Instance, InstanceParams, OneWayCandidate};
use dpslab::linalg::Matrix;
use dpslab::mixture2d::Mixture2d;
use dpslab::piecewise::{build_score_approx, TestFamily};
use dpslab::posterior::{BruteForcePosterior, PosteriorConfig, RejectionSampler};
use dpslab::reduction::{inversion_experiment, random_circuit_owf, stretch_owf, BruteForceSampler};
use dpslab::relu::{circuit_to_relu, compile_piecewise};
use dpslab::rng::{stream, uniform, StreamRng};
use dpslab::scores::{DiscreteGaussianSpec, SeriesMethod};
use dpslab::special::normal_pdf;
use serde_json::json;

use crate::artifacts::{check_run, Run};
use crate::config::ExperimentConfig;

type Check = (bool, String);

fn decode_chain(seed: u64) -> Result<Check> {
    let params = InstanceParams::canonical(8, 8);
    let inst = Instance::new(params, random_circuit_owf(8, 8, 24, seed)?)?;
    let mut rng = stream(seed, 1);
    let n = 100_000;
    let mut bad = 0;
    for _ in 0..n {
        let (_, x) = inst.sample_unconditional(&mut rng);
        let y = inst.measure_clipped(&x, &mut rng)?;
        bad += usize::from(inst.f().eval(&round_r(x.head(8))) != bits_eps(&y.entries, params.eps));
    }
    Ok((bad == 0, format!("{bad} failures in {n} clipped draws")))
}

fn rejection_vs_oracle(seed: u64) -> Result<Check> {
    let params = InstanceParams::canonical(2, 2);
    let inst = Instance::new(params, OneWayCandidate::identity(2))?;
    let mut rng = stream(seed, 2);
    let (_, x) = inst.sample_unconditional(&mut rng);
    let y = inst.measure(&x, &mut rng)?;
    let n = 20_000;
    let oracle = BruteForcePosterior::new(&inst, &y)?;
    let exact: Vec<Vec<f64>> = (0..n).map(|_| oracle.sample(&mut rng).entries).collect();
    let a = Matrix::tail_selector(2, 2);
    let rs = RejectionSampler::new(&a, &y, PosteriorConfig::new(u64::MAX, params.beta)?)?;
    let mut prop = |r: &mut StreamRng| Ok(inst.sample_unconditional(r).1.entries);
    let mut acc = Vec::with_capacity(n);
    while acc.len() < n {
        acc.extend(rs.sample(&mut prop, &mut rng)?.0);
    }
    let tv = tv_binned_max(&exact, &acc, DEFAULT_BINS, seed)?;
    Ok((tv.value <= 0.05, format!("binned TV {:.4} at n = {n} (limit 0.05)", tv.value)))
}

fn fourier() -> Result<Check> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (eps, rho) in [(0.5, 0.1), (0.1, 1.0), (0.05, 2.0)] {
        let s = (1.0f64 + rho * rho).sqrt();
        let bound = 3.0 * (-rho * rho / (2.0 * eps * eps * s * s)).exp();
        let spec = DiscreteGaussianSpec::for_bit(1, eps, rho)?;
        for i in 0..601 {
            let x = -6.0 * s + 12.0 * s * i as f64 / 600.0;
            ok &= spec.relative_deviation(x)?.abs() <= bound;
            let w = normal_pdf(x, s);
            ok &= (spec.density(x)? / w - 1.0).abs() <= bound.max(1e-12);
            let f = spec.density_with(x, SeriesMethod::Fourier)?;
            let l = spec.density_with(x, SeriesMethod::Lattice)?;
            worst = worst.max((f - l).abs() / l);
        }
    }
    Ok((ok && worst <= 1e-10, format!("bound holds: {ok}; series/lattice rel diff {worst:.1e}")))
}

fn relu_exact(seed: u64) -> Result<Check> {
    let law = TestFamily::STANDARD_MIXTURE.smoothed(1.0)?;
    let l = build_score_approx(|x| law.score(x), &law.approx_params(0.04)?)?;
    let net = compile_piecewise(&l);
    let mut worst: f64 = 0.0;
    for i in 0..2001 {
        let x = -40.0 + 80.0 * i as f64 / 2000.0;
        worst = worst.max((net.eval1(x) - l.eval(x)).abs() / l.eval(x).abs().max(1.0));
    }
    let mut circuits = 0;
    for c in 0..20u64 {
        let n = 2 + c as usize % 7;
        let f = random_circuit_owf(n, 3, 9, seed + c)?;
        let net = circuit_to_relu(f.circuit())?;
        let all = (0..1usize << n).all(|i| {
            let s = BitString::from_index(i, n);
            let x: Vec<f64> = s.bits().iter().map(|&b| b as f64).collect();
            let out = net.eval(&x).map(|o| o.iter().map(|&v| v as i8).collect::<Vec<_>>());
            out.ok().as_deref() == Some(f.eval(&s).bits())
        });
        circuits += usize::from(all);
    }
    Ok((
        worst <= 1e-9 && circuits == 20,
        format!("piecewise rel err {worst:.1e}; circuits exact {circuits}/20"),
    ))
}

fn tv_inequalities(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, 3);
    let joint = |rng: &mut StreamRng| {
        let mut t: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| uniform(rng)).collect()).collect();
        let z: f64 = t.iter().flatten().sum();
        t.iter_mut().flatten().for_each(|v| *v /= z);
        t
    };
    let mut bad = 0;
    for _ in 0..200 {
        let (p, q) = (joint(&mut rng), joint(&mut rng));
        let (lhs, rhs) = conditional_tv_check(&p, &q)?;
        bad += usize::from(lhs > rhs + 1e-12);
    }
    let mut clip_ok = true;
    for c in [1.0, 2.0, 4.0] {
        clip_ok &= clipped_noise_tv(0.1, 0.1 * c)? <= 2.0 * (-c * c / 2.0).exp();
    }
    Ok((bad == 0 && clip_ok, format!("{bad} conditional-TV violations; clipped bound holds: {clip_ok}")))
}

fn inversion(seed: u64) -> Result<Check> {
    let inst = Instance::new(InstanceParams::canonical(4, 4), OneWayCandidate::identity(4))?;
    let r = inversion_experiment(&inst, &BruteForceSampler, 100, seed, 1)?;
    Ok((
        r.success_rate() >= 0.95 && r.successes == r.exact_seed_hits,
        format!("identity 4->4: {}/{} successes", r.successes, r.trials),
    ))
}

fn stretching() -> Result<Check> {
    let f = random_circuit_owf(8, 8, 24, 2)?;
    let pad = stretch_owf(&OneWayCandidate::identity(4), 6)?;
    let pad_ok = (0..16).all(|i| {
        let v = pad.eval(&BitString::from_index(i, 4));
        v.get(4) == 1 && v.get(5) == 1
    });
    let cut = stretch_owf(&f, 2)?;
    let n = cut.input_len();
    let cut_ok = (0..1usize << n).all(|i| {
        let u = BitString::from_index(i, n);
        let mut full = u.bits().to_vec();
        full.resize(8, 1);
        BitString::new(full).is_ok_and(|s| cut.eval(&u).bits() == &f.eval(&s).bits()[..2])
    });
    Ok((pad_ok && cut_ok, format!("padding {pad_ok}, truncation {cut_ok}")))
}

fn demo_weight() -> Result<Check> {
    let w = Mixture2d::default().posterior_weights(4.0)[1];
    let expect = 1.0 / (1.0 + (-16.0f64 / 2.42).exp());
    Ok(((w - expect).abs() <= 1e-12, format!("weight of (4,4) at y=4: {w:.12}")))
}

pub fn verify(cfg: &ExperimentConfig, out: &Path, artifacts: Option<&Path>) -> Result<bool> {
    let seed = cfg.seed;
    let checks: Vec<(&str, Box<dyn Fn() -> Result<Check>>)> = vec![
        ("decode-chain", Box::new(move || decode_chain(seed))),
        ("rejection-vs-oracle", Box::new(move || rejection_vs_oracle(seed))),
        ("fourier-envelope", Box::new(fourier)),
        ("relu-exactness", Box::new(move || relu_exact(seed))),
        ("tv-inequalities", Box::new(move || tv_inequalities(seed))),
        ("inversion", Box::new(move || inversion(seed))),
        ("stretching", Box::new(stretching)),
        ("demo2d-weight", Box::new(demo_weight)),
    ];
    let mut run = Run::new(out, "verify", cfg)?;
    let mut results = Vec::new();
    let mut all = true;
    for (name, check) in checks {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        run.time(name, start.elapsed().as_secs_f64());
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        all &= pass;
        results.push(json!({ "suite": name, "pass": pass, "detail": detail }));
    }
    if let Some(dir) = artifacts {
        let problems = check_run(dir).unwrap_or_else(|e| vec![format!("{e:#}")]);
        let pass = problems.is_empty();
        let detail = if pass {
            format!("{}: hashes consistent", dir.display())
        } else {
            problems.join("; ")
        };
        println!("{} artifacts: {detail}", if pass { "PASS" } else { "FAIL" });
        all &= pass;
        results.push(json!({ "suite": "artifacts", "pass": pass, "detail": detail }));
    }
    println!("verify: {}", if all { "all suites passed" } else { "FAILED" });
    run.json("verify.json", &json!({ "all_passed": all, "suites": results }))?;
    run.finish()?;
    Ok(all)
}
