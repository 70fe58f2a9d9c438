//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. Exits
//! non-zero if any criterion fails.

use std::time::Instant;

use dpslab::circuit::BooleanCircuit;
use dpslab::diagnostics::{clipped_noise_tv, conditional_tv_check, ks, tv_binned_max, DEFAULT_BINS};
use dpslab::diffusion::{reverse_run, DiffusionConfig};
use dpslab::instance::{bits_eps, round_r, Instance, InstanceParams, OneWayCandidate};
use dpslab::linalg::Matrix;
use dpslab::piecewise::{build_score_approx, l2_error, structure_report, PiecewiseLinear, TestFamily};
use dpslab::posterior::{acceptance_curve, exact_acceptance_probability, fit_line, BruteForcePosterior, PosteriorConfig, RejectionSampler};
use dpslab::reduction::{
    inversion_experiment, random_circuit_owf, BruteForceSampler, HeuristicSampler, RejectionExactSampler,
};
use dpslab::relu::{assemble_score_net_large_sigma, assemble_score_net_small_sigma, circuit_to_relu, compile_piecewise};
use dpslab::rng::{normal, stream, uniform, StreamRng};
use dpslab::scores::{DiscreteGaussianSpec, ExactMixture, FnScore, SeriesMethod};
use dpslab::special::{normal_pdf, std_normal_cdf};
use rand::Rng;

type Outcome = (bool, String);

fn c1_rejection_correctness() -> Outcome {
    let params = InstanceParams::canonical(2, 2);
    let inst = Instance::new(params, OneWayCandidate::identity(2)).unwrap();
    // First measurement whose exact expected round count fits the time budget.
    let mut rng = stream(101, 0);
    let (y, expected_rounds) = loop {
        let (_, x) = inst.sample_unconditional(&mut rng);
        let y = inst.measure(&x, &mut rng).unwrap();
        let pa = exact_acceptance_probability(&inst, &y.entries, params.beta).unwrap();
        if 1.0 / pa <= 1000.0 {
            break (y, 1.0 / pa);
        }
    };
    let n = 100_000;

    let oracle = BruteForcePosterior::new(&inst, &y).unwrap();
    let mut orng = stream(101, 1);
    let exact: Vec<Vec<f64>> = (0..n).map(|_| oracle.sample(&mut orng).entries).collect();

    let start = Instant::now();
    let a = Matrix::tail_selector(2, 2);
    let cfg = PosteriorConfig::new(u64::MAX, params.beta).unwrap();
    let sampler = RejectionSampler::new(&a, &y, cfg).unwrap();
    let mut prop = |r: &mut StreamRng| Ok(inst.sample_unconditional(r).1.entries);
    let mut rrng = stream(101, 2);
    let mut rounds = 0u64;
    let mut accepted = Vec::with_capacity(n);
    while accepted.len() < n {
        let (x, st) = sampler.sample(&mut prop, &mut rrng).unwrap();
        rounds += st.rounds;
        accepted.extend(x);
    }
    let secs = start.elapsed().as_secs_f64();
    let tv = tv_binned_max(&exact, &accepted, DEFAULT_BINS, 7).unwrap();
    (
        tv.value <= 0.03 && secs <= 300.0,
        format!(
            "binned TV {:.4} (CI {:.4}..{:.4}), {} rounds for {} samples (expected {:.1}/sample), {:.1}s",
            tv.value, tv.ci95.0, tv.ci95.1, rounds, n, expected_rounds, secs
        ),
    )
}

fn c2_acceptance_scaling() -> Outcome {
    let params = InstanceParams::canonical(4, 4);
    let inst = Instance::new(params, OneWayCandidate::identity(4)).unwrap();
    let ms = [1, 2, 3, 4];
    let rows = acceptance_curve(&inst, &[0.1], &ms, 2000, 202, None, 1).unwrap();
    let emp = acceptance_curve(&inst, &[0.1], &ms, 200, 204, Some(1_000_000), 1).unwrap();
    let logs: Vec<f64> = rows.iter().map(|r| r.log_rounds).collect();
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let (_, slope) = fit_line(&xs, &logs).unwrap();
    // C is fitted from the single-coordinate cost: log(C/β) = log rounds at m = 1.
    let log_c_over_beta = logs[0];
    let monotone = logs.windows(2).all(|w| w[1] > w[0]);
    let in_band = slope >= 0.5 * log_c_over_beta && slope <= 2.0 * log_c_over_beta;
    let doubled = acceptance_curve(&inst, &[0.1, 0.2], &[2], 2000, 203, None, 1).unwrap();
    let decreases = doubled[1].log_rounds < doubled[0].log_rounds && doubled[1].mean_rounds < doubled[0].mean_rounds;
    let table: Vec<String> = rows
        .iter()
        .zip(&emp)
        .map(|(r, e)| {
            format!(
                "m={} log={:.3} empirical mean={:.1} (budget misses {})",
                r.m, r.log_rounds, e.empirical_mean_rounds, e.budget_failures
            )
        })
        .collect();
    (
        monotone && in_band && decreases,
        format!(
            "slope {:.3}, log(C/beta) {:.3}, band [{:.3}, {:.3}]; {}; beta 0.1->0.2 at m=2: {:.3}->{:.3}",
            slope,
            log_c_over_beta,
            0.5 * log_c_over_beta,
            2.0 * log_c_over_beta,
            table.join(", "),
            doubled[0].log_rounds,
            doubled[1].log_rounds
        ),
    )
}

fn c3_inversion() -> Outcome {
    let start = Instant::now();
    let params = InstanceParams::canonical(8, 8);
    let mut successes = 0;
    let mut trials = 0;
    for seed in 1..=4u64 {
        let f = random_circuit_owf(8, 8, 24, seed).unwrap();
        let inst = Instance::new(params, f).unwrap();
        let r = inversion_experiment(&inst, &BruteForceSampler, 50, 300 + seed, 1).unwrap();
        successes += r.successes;
        trials += r.trials;
    }
    let rate = successes as f64 / trials as f64;
    let secs = start.elapsed().as_secs_f64();
    (
        rate >= 0.9 && secs <= 600.0,
        format!("success {successes}/{trials} = {rate:.3}, {secs:.1}s"),
    )
}

fn c4_decode_chain() -> Outcome {
    let params = InstanceParams::canonical(8, 8);
    assert_eq!(params.beta_max, params.eps / 4.0);
    let inst = Instance::new(params, random_circuit_owf(8, 8, 24, 4).unwrap()).unwrap();
    let mut rng = stream(404, 0);
    let n = 1_000_000;
    let mut failures = 0;
    for _ in 0..n {
        let (_, x) = inst.sample_unconditional(&mut rng);
        let y = inst.measure_clipped(&x, &mut rng).unwrap();
        let lhs = inst.f().eval(&round_r(x.head(8)));
        if lhs != bits_eps(&y.entries, params.eps) {
            failures += 1;
        }
    }
    (failures == 0, format!("{failures} failures in {n} draws"))
}

fn c5_score_approx() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [0.5, 1.0] {
        let law = TestFamily::STANDARD_MIXTURE.smoothed(sigma).unwrap();
        let mut pieces = Vec::new();
        for kappa in [0.04, 0.01] {
            let ap = law.approx_params(kappa).unwrap();
            let l = build_score_approx(|x| law.score(x), &ap).unwrap();
            let (err, _) = l2_error(|x| l.eval(x), &law, 100_000, 505);
            let scaled = err * sigma * sigma / kappa;
            let structure = structure_report(&l, &ap).holds();
            ok &= scaled <= 10.0 && structure;
            pieces.push(l.pieces());
            parts.push(format!("s={sigma} k={kappa}: err*s2/k={scaled:.2e} pieces={} bounds={structure}", l.pieces()));
        }
        let ratio = pieces[1] as f64 / pieces[0] as f64;
        ok &= (4.0..=16.0).contains(&ratio);
        parts.push(format!("s={sigma} piece ratio {ratio:.2}"));
    }
    (ok, parts.join("; "))
}

fn c6_relu_exactness() -> Outcome {
    let mut rng = stream(606, 0);
    let mut worst: f64 = 0.0;
    let mut sources: Vec<PiecewiseLinear> = Vec::new();
    let law = TestFamily::STANDARD_MIXTURE.smoothed(0.5).unwrap();
    let ap = law.approx_params(0.04).unwrap();
    sources.push(build_score_approx(|x| law.score(x), &ap).unwrap());
    for _ in 0..20 {
        let k = rng.random_range(1..60);
        let mut knots: Vec<f64> = (0..k).map(|_| 20.0 * uniform(&mut rng) - 10.0).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values = knots.iter().map(|_| 10.0 * normal(&mut rng)).collect();
        sources.push(PiecewiseLinear::new(knots, values, normal(&mut rng), normal(&mut rng)).unwrap());
    }
    for l in &sources {
        let net = compile_piecewise(l);
        let lo = l.knots()[0] - 5.0;
        let hi = l.knots()[l.knots().len() - 1] + 5.0;
        for i in 0..10_000 {
            let x = lo + (hi - lo) * i as f64 / 9999.0;
            let want = l.eval(x);
            let got = net.eval1(x);
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let mut circuits_ok = 0;
    for c in 0..50u64 {
        let n = 2 + (c as usize % 9);
        let m = 1 + (c as usize % 4);
        let f = random_circuit_owf(n, m, 3 * m + (c as usize % 5), 6000 + c).unwrap();
        let circuit: &BooleanCircuit = f.circuit();
        let net = circuit_to_relu(circuit).unwrap();
        let all = (0..1usize << n).all(|idx| {
            let bits: Vec<bool> = (0..n).map(|i| idx >> i & 1 == 1).collect();
            let input: Vec<f64> = bits.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let out = net.eval(&input).unwrap();
            let want = circuit.eval(&bits);
            out.iter().zip(&want).all(|(&o, &w)| o == if w { -1.0 } else { 1.0 })
        });
        circuits_ok += usize::from(all);
    }
    (
        worst <= 1e-9 && circuits_ok == 50,
        format!(
            "piecewise max rel err {worst:.2e} over {} sources; circuits exact {circuits_ok}/50",
            sources.len()
        ),
    )
}

fn c7_well_modeled() -> Outcome {
    let params = InstanceParams::new(2, 2, 30.0, 0.05, 0.025, 0.0125).unwrap();
    let f = OneWayCandidate::identity(2);
    let inst = Instance::new(params, f.clone()).unwrap();
    let exact = ExactMixture::new(&inst).unwrap();
    let kappa = 0.01;
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [0.1, 0.5, 1.0, 5.0, 20.0] {
        let net = if sigma < 1.0 {
            assemble_score_net_small_sigma(&params, f.circuit(), sigma, kappa).unwrap()
        } else {
            assemble_score_net_large_sigma(&params, sigma, kappa).unwrap()
        };
        let mut rng = stream(707, (sigma * 1000.0) as u64);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (_, x) = inst.sample_unconditional(&mut rng);
            let xs: Vec<f64> = x.entries.iter().map(|v| v + sigma * normal(&mut rng)).collect();
            let e = exact.score(sigma, &xs).unwrap();
            let o = net.net.eval(&xs).unwrap();
            acc += e.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let err = acc / n as f64;
        let bound = 1e-3 / (sigma * sigma);
        ok &= err <= bound;
        parts.push(format!(
            "s={sigma}: {err:.2e} <= {bound:.1e} ({} params, depth {})",
            net.report.param_count, net.report.depth
        ));
    }
    (ok, parts.join("; "))
}

fn c8_fourier() -> Outcome {
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    for (eps, rho) in [(0.5, 0.1), (0.1, 1.0), (0.05, 2.0)] {
        let s = (1.0 + rho * rho as f64).sqrt();
        let bound = 3.0 * (-rho * rho / (2.0 * eps * eps * (1.0 + rho * rho))).exp();
        for b in [1i8, -1] {
            let spec = DiscreteGaussianSpec::for_bit(b, eps, rho).unwrap();
            for i in 0..601 {
                let x = -6.0 * s + 12.0 * s * i as f64 / 600.0;
                let w = normal_pdf(x, s);
                // Deviation from the series directly; `g - w` by subtraction
                // bottoms out at rounding error long before the bound does.
                let dev = spec.relative_deviation(x).unwrap();
                let ratio = dev.abs() / bound;
                worst_ratio = worst_ratio.max(ratio);
                ok &= ratio <= 1.0;
                let g = spec.density(x).unwrap();
                let direct = (g - w).abs() / w;
                ok &= (direct - dev.abs()).abs() <= 1e-12;
                worst_direct = worst_direct.max(direct);
                let fo = spec.density_with(x, SeriesMethod::Fourier).unwrap();
                let la = spec.density_with(x, SeriesMethod::Lattice).unwrap();
                let rel = (fo - la).abs() / la.abs();
                worst_agree = worst_agree.max(rel);
                ok &= rel <= 1e-10;
            }
        }
    }
    (
        ok,
        format!(
            "max |g/w-1|/bound {worst_ratio:.3} (series form; by subtraction max |g-w|/w {worst_direct:.2e}); \
             max Fourier/lattice rel diff {worst_agree:.2e}"
        ),
    )
}

fn random_joint(rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = (0..6)
        .map(|_| {
            (0..6)
                .map(|_| {
                    let u = uniform(rng);
                    if u < 0.2 {
                        0.0
                    } else {
                        u
                    }
                })
                .collect()
        })
        .collect();
    let total: f64 = t.iter().flatten().sum();
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    t
}

fn c9_tv_inequalities() -> Outcome {
    let mut rng = stream(909, 0);
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..200 {
        let p = random_joint(&mut rng);
        let q = random_joint(&mut rng);
        let (lhs, rhs) = conditional_tv_check(&p, &q).unwrap();
        worst_gap = worst_gap.max(lhs - rhs);
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
    }
    let mut clip_ok = true;
    let mut parts = Vec::new();
    for ratio in [1.0, 2.0, 4.0] {
        let beta = 0.1;
        let tv = clipped_noise_tv(beta, ratio * beta).unwrap();
        let bound = 2.0 * (-(ratio * ratio) / 2.0).exp();
        clip_ok &= tv <= bound;
        parts.push(format!("c={ratio}: {tv:.3e}<={bound:.3e}"));
    }
    (
        violations == 0 && clip_ok,
        format!(
            "{violations} violations in 200 joints (max lhs-rhs {worst_gap:.3}); clipped TV {}",
            parts.join(", ")
        ),
    )
}

fn c10_diffusion() -> Outcome {
    let (mu, var) = (1.0, 0.25);
    let provider = FnScore::new(1, "gaussian", move |sigma: f64, x: &[f64]| vec![-(x[0] - mu) / (var + sigma * sigma)]);
    let cfg = DiffusionConfig::new(10.0 * (mu * mu + var), 1e-4, 1000).unwrap();
    let runs = 10_000;
    let out: Vec<f64> = (0..runs)
        .map(|i| reverse_run(&provider, &cfg, &mut stream(1010, i), None).unwrap()[0])
        .collect();
    let sd = (var + cfg.t_min).sqrt();
    let d = ks(&out, |x| std_normal_cdf((x - mu) / sd)).unwrap();

    let params = InstanceParams::new(1, 0, 4.0, 1.0, 0.025, 0.25).unwrap();
    let inst = Instance::new(params, OneWayCandidate::no_outputs(1)).unwrap();
    let exact = ExactMixture::new(&inst).unwrap();
    let cfg2 = DiffusionConfig::new(10.0 * 17.0, 1e-4, 1000).unwrap();
    let runs2 = 20_000;
    let positive = (0..runs2)
        .filter(|&i| reverse_run(&exact, &cfg2, &mut stream(1011, i), None).unwrap()[0] >= 0.0)
        .count();
    let freq = positive as f64 / runs2 as f64;
    (
        d <= 0.02 && (freq - 0.5).abs() <= 0.01,
        format!("KS {d:.4} over {runs} runs; +R orthant frequency {freq:.4} over {runs2} runs"),
    )
}

fn c11_hardness() -> Outcome {
    let params = InstanceParams::canonical(8, 8);
    let f = random_circuit_owf(8, 8, 24, 1).unwrap();
    let inst = Instance::new(params, f).unwrap();
    let rows = acceptance_curve(&inst, &[params.beta], &[4, 8], 500, 1111, None, 1).unwrap();
    let growth = (rows[1].log_rounds - rows[0].log_rounds).exp();

    let exact = ExactMixture::new(&inst).unwrap();
    let heuristic = HeuristicSampler {
        provider: Box::new(exact),
        diffusion: DiffusionConfig::for_second_moment(params.r * params.r + 1.0).unwrap(),
    };
    let h = inversion_experiment(&inst, &heuristic, 40, 1112, 1).unwrap();
    let rej = inversion_experiment(&inst, &RejectionExactSampler { max_rounds: 100_000 }, 40, 1113, 1).unwrap();
    let bf = inversion_experiment(&inst, &BruteForceSampler, 40, 1114, 1).unwrap();
    (
        growth >= 8.0,
        format!(
            "rejection rounds (geo. mean) m=4 {:.3e}, m=8 {:.3e}, growth {:.3e}x; inversion success: brute-force {}/40, rejection(1e5 rounds) {}/40, heuristic {}/40",
            rows[0].log_rounds.exp(),
            rows[1].log_rounds.exp(),
            growth,
            bf.successes,
            rej.successes,
            h.successes
        ),
    )
}

fn main() {
    // libtest passes flags such as --nocapture or a filter; only a filter is honoured.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 rejection-sampling correctness", c1_rejection_correctness),
        ("2 acceptance-rate scaling", c2_acceptance_scaling),
        ("3 inversion end-to-end", c3_inversion),
        ("4 decode-chain exactness", c4_decode_chain),
        ("5 score-approximation error", c5_score_approx),
        ("6 relu exactness", c6_relu_exactness),
        ("7 well-modeled at desk scale", c7_well_modeled),
        ("8 fourier envelope", c8_fourier),
        ("9 tv inequalities", c9_tv_inequalities),
        ("10 diffusion sanity", c10_diffusion),
        ("11 hardness demonstration", c11_hardness),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run();
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
