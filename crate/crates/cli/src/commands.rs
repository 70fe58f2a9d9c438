use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dpslab::diffusion::{reverse_run, DiffusionConfig};
use dpslab::fmt::g17;
use dpslab::instance::{Instance, Measurement};
use dpslab::linalg::Matrix;
use dpslab::mixture2d::Mixture2d;
use dpslab::piecewise::{build_score_approx, l2_error, structure_report, TestFamily};
use dpslab::posterior::{
    acceptance_curve, fit_line, heuristic_posterior_sample, BruteForcePosterior, PosteriorConfig, RejectionSampler,
};
use dpslab::reduction::{
    inversion_experiment, BruteForceSampler, HeuristicSampler, PosteriorSampler, RejectionExactSampler,
};
use dpslab::relu::{
    assemble_score_net_large_sigma, assemble_score_net_small_sigma, circuit_to_relu, compile_piecewise, ReluBank,
};
use dpslab::rng::{par_map, stream, StreamRng};
use dpslab::scores::{
    ExactMixture, LargeSigmaScore, OrthantScore, RegimeScore, ScoreProvider, MAX_EXACT_D,
};
use serde_json::json;

use crate::artifacts::Run;
use crate::config::ExperimentConfig;

fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| g17(*x)).collect()
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn provider(cfg: &ExperimentConfig, inst: &Instance) -> Result<Box<dyn ScoreProvider>> {
    Ok(match cfg.sampler.score.as_str() {
        "exact" => {
            if inst.params().d > MAX_EXACT_D {
                bail!("sampler.score = exact needs d <= {MAX_EXACT_D}; use regime or bank");
            }
            Box::new(ExactMixture::new(inst)?)
        }
        "orthant" => Box::new(OrthantScore::new(inst.clone())),
        "regime" => Box::new(RegimeScore::new(
            Box::new(OrthantScore::new(inst.clone())),
            Box::new(LargeSigmaScore::new(*inst.params())),
            RegimeScore::DEFAULT_SIGMA_STAR,
        )?),
        "bank" => {
            let path = cfg.sampler.bank.as_ref().context("sampler.bank is required for score = bank")?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let bank = ReluBank::from_text(&text)?;
            if bank.dim() != inst.params().dim() {
                bail!("bank dimension {} does not match the instance", bank.dim());
            }
            Box::new(bank)
        }
        other => bail!("sampler.score: unknown `{other}`"),
    })
}

pub fn sampler(cfg: &ExperimentConfig, inst: &Instance) -> Result<Box<dyn PosteriorSampler>> {
    Ok(match cfg.sampler.kind.as_str() {
        "brute-force" => Box::new(BruteForceSampler),
        "rejection" => Box::new(RejectionExactSampler {
            max_rounds: cfg.sampler.max_rounds,
        }),
        "heuristic" => Box::new(HeuristicSampler {
            provider: provider(cfg, inst)?,
            diffusion: cfg.diffusion_config()?,
        }),
        other => bail!("sampler.kind: unknown `{other}`"),
    })
}

pub fn sample(cfg: &ExperimentConfig, out: &Path, method: &str) -> Result<()> {
    let inst = cfg.instance()?;
    let dim = inst.params().dim();
    let mut run = Run::new(out, "sample", cfg)?;
    let start = Instant::now();
    let rows: Vec<Result<Vec<String>>> = match method {
        "direct" => par_map(cfg.samples, cfg.jobs, |i| {
            let mut rng = stream(cfg.seed, i as u64);
            let (s, x) = inst.sample_unconditional(&mut rng);
            let mut row = vec![s.to_string()];
            row.extend(nums(&x.entries));
            Ok(row)
        }),
        _ => {
            let prov = provider(cfg, &inst)?;
            let dcfg = cfg.diffusion_config()?;
            par_map(cfg.samples, cfg.jobs, |i| {
                let mut rng = stream(cfg.seed, i as u64);
                let x = reverse_run(prov.as_ref(), &dcfg, &mut rng, None)?;
                Ok(nums(&x))
            })
        }
    };
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    run.time("sampling", start.elapsed().as_secs_f64());
    let mut header = if method == "direct" { vec!["seed".to_string()] } else { Vec::new() };
    header.extend(coord_header("x", dim));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv("samples.csv", &header, &rows)?;
    run.finish()
}

fn read_measurement(path: &Path) -> Result<Measurement> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#') && l.starts_with(|c: char| c == '-' || c == '.' || c.is_ascii_digit()))
        .context("no numeric row in y file")?;
    let entries = line
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Measurement::new(entries))
}

pub fn posterior(cfg: &ExperimentConfig, out: &Path, y_file: Option<&Path>) -> Result<()> {
    let inst = cfg.instance()?;
    let p = *inst.params();
    let y = match y_file {
        Some(path) => read_measurement(path)?,
        None => {
            let mut rng = stream(cfg.seed, u64::MAX);
            let (_, x) = inst.sample_unconditional(&mut rng);
            inst.measure(&x, &mut rng)?
        }
    };
    if y.len() != p.d_prime {
        bail!("y has {} entries, instance has d_prime = {}", y.len(), p.d_prime);
    }
    let mut run = Run::new(out, "posterior", cfg)?;
    let header = coord_header("y", p.d_prime);
    run.csv(
        "y.csv",
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        &[nums(&y.entries)],
    )?;
    let start = Instant::now();
    let kind = cfg.sampler.kind.as_str();
    let a = Matrix::tail_selector(p.d, p.d_prime);
    let draws: Vec<Result<(Option<Vec<f64>>, u64)>> = match kind {
        "brute-force" => {
            let oracle = BruteForcePosterior::new(&inst, &y)?;
            par_map(cfg.samples, cfg.jobs, |i| {
                let mut rng = stream(cfg.seed, i as u64);
                Ok((Some(oracle.sample(&mut rng).entries), 0))
            })
        }
        "rejection" => {
            let pc = PosteriorConfig::new(cfg.sampler.max_rounds, p.beta)?;
            let rs = RejectionSampler::new(&a, &y, pc)?;
            par_map(cfg.samples, cfg.jobs, |i| {
                let mut rng = stream(cfg.seed, i as u64);
                let mut prop = |r: &mut StreamRng| Ok(inst.sample_unconditional(r).1.entries);
                let (x, st) = rs.sample(&mut prop, &mut rng)?;
                Ok((x, st.rounds))
            })
        }
        _ => {
            let prov = provider(cfg, &inst)?;
            let dcfg = cfg.diffusion_config()?;
            par_map(cfg.samples, cfg.jobs, |i| {
                let mut rng = stream(cfg.seed, i as u64);
                let x = heuristic_posterior_sample(prov.as_ref(), &a, &y, p.beta, &dcfg, &mut rng)?;
                Ok((Some(x), 0))
            })
        }
    };
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    run.time("sampling", start.elapsed().as_secs_f64());
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (i, (x, rounds)) in draws.iter().enumerate() {
        stats.push(vec![i.to_string(), x.is_some().to_string(), rounds.to_string()]);
        if let Some(x) = x {
            rows.push(nums(x));
        }
    }
    let header = coord_header("x", p.dim());
    run.csv(
        "posterior.csv",
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        &rows,
    )?;
    run.csv("stats.csv", &["draw", "accepted", "rounds"], &stats)?;
    run.finish()
}

pub fn invert(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let inst = cfg.instance()?;
    let s = sampler(cfg, &inst)?;
    let mut run = Run::new(out, "invert", cfg)?;
    let start = Instant::now();
    let report = inversion_experiment(&inst, s.as_ref(), cfg.trials, cfg.seed, cfg.jobs)?;
    run.time("experiment", start.elapsed().as_secs_f64());
    run.time("mean_sampler_seconds", report.mean_sampler_nanos * 1e-9);
    run.json("report.json", &report)?;
    run.csv(
        "report.csv",
        &[
            "sampler",
            "trials",
            "successes",
            "exact_seed_hits",
            "no_guess",
            "bits_consistent",
            "successes_given_bits",
            "decode_agreements",
            "success_rate",
        ],
        &[vec![
            report.sampler.clone(),
            report.trials.to_string(),
            report.successes.to_string(),
            report.exact_seed_hits.to_string(),
            report.no_guess.to_string(),
            report.bits_consistent.to_string(),
            report.successes_given_bits.to_string(),
            report.decode_agreements.to_string(),
            g17(report.success_rate()),
        ]],
    )?;
    run.text("candidate.txt", &inst.f().circuit().to_text())?;
    run.finish()
}

pub fn approx_score(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let a = &cfg.approx;
    let family = match a.family.as_str() {
        "mixture" => TestFamily::STANDARD_MIXTURE,
        "gaussian" => TestFamily::Gaussian { mean: 0.0, var: 1.0 },
        _ => TestFamily::DiscretizedGaussian { eps: a.eps, phase: 0.0 },
    };
    let mut run = Run::new(out, "approx-score", cfg)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for &sigma in &a.sigmas {
        let law = family.smoothed(sigma)?;
        for &kappa in &a.kappas {
            let ap = law.approx_params(kappa)?;
            let l = build_score_approx(|x| law.score(x), &ap)?;
            let net = compile_piecewise(&l);
            let (err, se) = l2_error(|x| l.eval(x), &law, a.draws, cfg.seed);
            let sr = structure_report(&l, &ap);
            let lo = ap.mu - ap.radius();
            let hi = ap.mu + ap.radius();
            let net_diff = (0..=1000)
                .map(|i| {
                    let x = lo + (hi - lo) * i as f64 / 1000.0;
                    (net.eval1(x) - l.eval(x)).abs()
                })
                .fold(0.0, f64::max);
            let rep = net.report();
            rows.push(vec![
                g17(sigma),
                g17(kappa),
                l.pieces().to_string(),
                g17(sr.piece_bound),
                rep.param_count.to_string(),
                rep.depth.to_string(),
                g17(err),
                g17(se),
                g17(err * sigma * sigma / kappa),
                g17(ap.error_bound()),
                g17(net_diff),
                sr.holds().to_string(),
            ]);
            run.text(&format!("score_s{}_k{}.csv", sigma, kappa), &l.to_csv())?;
        }
    }
    run.time("build", start.elapsed().as_secs_f64());
    run.csv(
        "approx_table.csv",
        &[
            "sigma",
            "kappa",
            "pieces",
            "piece_bound",
            "params",
            "depth",
            "l2_error",
            "l2_stderr",
            "scaled_error",
            "error_bound",
            "net_max_abs_diff",
            "structure_holds",
        ],
        &rows,
    )?;
    run.finish()
}

pub fn compile_circuit(cfg: &ExperimentConfig, out: &Path, score_bank: bool) -> Result<()> {
    let f = cfg.candidate()?;
    let mut run = Run::new(out, "compile-circuit", cfg)?;
    let start = Instant::now();
    let net = circuit_to_relu(f.circuit())?;
    run.text("network.txt", &net.to_text())?;
    run.json("params.json", &net.report())?;
    if score_bank {
        let p = cfg.instance;
        let kappa = cfg.approx.kappas.first().copied().unwrap_or(0.01);
        let mut entries = Vec::new();
        let mut reports = Vec::new();
        for &sigma in &cfg.approx.sigmas {
            let a = if sigma < RegimeScore::DEFAULT_SIGMA_STAR {
                assemble_score_net_small_sigma(&p, f.circuit(), sigma, kappa)?
            } else {
                assemble_score_net_large_sigma(&p, sigma, kappa)?
            };
            reports.push(json!({ "sigma": sigma, "kappa": kappa, "params": a.report, "switch_t": a.switch_t }));
            entries.push((sigma, a.net));
        }
        let bank = ReluBank::new(entries)?;
        run.text("bank.txt", &bank.to_text())?;
        run.json("bank_params.json", &reports)?;
    }
    run.time("compile", start.elapsed().as_secs_f64());
    run.finish()
}

pub fn bench_acceptance(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let inst = cfg.instance()?;
    let b = &cfg.bench;
    if b.ms.iter().any(|&m| m > inst.params().d_prime) {
        bail!("bench.ms: every m must be at most instance.d_prime");
    }
    let mut run = Run::new(out, "bench-acceptance", cfg)?;
    let start = Instant::now();
    let rows = acceptance_curve(&inst, &b.betas, &b.ms, b.trials, cfg.seed, b.empirical_rounds, cfg.jobs)?;
    run.time("acceptance_curve", start.elapsed().as_secs_f64());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                g17(r.beta),
                r.m.to_string(),
                r.trials.to_string(),
                g17(r.mean_rounds),
                g17(r.log_rounds),
                g17(r.empirical_mean_rounds),
                r.budget_failures.to_string(),
            ]
        })
        .collect();
    run.csv(
        "acceptance.csv",
        &["beta", "m", "trials", "mean_rounds", "log_rounds", "empirical_mean_rounds", "budget_failures"],
        &table,
    )?;
    let mut fits = Vec::new();
    for &beta in &b.betas {
        let pts: Vec<_> = rows.iter().filter(|r| r.beta == beta).collect();
        if pts.len() >= 2 {
            let xs: Vec<f64> = pts.iter().map(|r| r.m as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|r| r.log_rounds).collect();
            let (intercept, slope) = fit_line(&xs, &ys)?;
            fits.push(json!({ "beta": beta, "intercept": intercept, "slope": slope }));
        }
    }
    let mut summary = json!({ "rows": rows, "fits": fits });
    if b.hardness {
        let start = Instant::now();
        let mut reports = Vec::new();
        let heuristic = HeuristicSampler {
            provider: provider(cfg, &inst)?,
            diffusion: cfg.diffusion_config()?,
        };
        let samplers: [&dyn PosteriorSampler; 3] = [
            &BruteForceSampler,
            &RejectionExactSampler {
                max_rounds: cfg.sampler.max_rounds,
            },
            &heuristic,
        ];
        for (k, s) in samplers.iter().enumerate() {
            let r = inversion_experiment(&inst, *s, b.hardness_trials, cfg.seed.wrapping_add(k as u64 + 1), cfg.jobs)?;
            reports.push(r);
        }
        let p = inst.params();
        let full = acceptance_curve(&inst, &[p.beta], &[p.d_prime / 2, p.d_prime], b.trials, cfg.seed, None, cfg.jobs)?;
        summary["hardness"] = json!({
            "inversion": reports,
            "rounds_at_instance_beta": full,
        });
        run.time("hardness", start.elapsed().as_secs_f64());
    }
    run.json("bench.json", &summary)?;
    run.finish()
}

pub fn demo2d(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let m = Mixture2d::default();
    let y = cfg.demo2d.y;
    let beta = m.noise_var.sqrt();
    let n = cfg.samples;
    let mut run = Run::new(out, "demo2d", cfg)?;
    let start = Instant::now();
    let prior: Vec<[f64; 2]> = par_map(n, cfg.jobs, |i| m.sample_prior(&mut stream(cfg.seed, i as u64)));
    let exact: Vec<[f64; 2]> = par_map(n, cfg.jobs, |i| m.sample_posterior(y, &mut stream(cfg.seed, (1 << 32) + i as u64)));
    let a = Matrix::new(1, 2, vec![0.0, 1.0])?;
    let ym = Measurement::new(vec![y]);
    let dcfg = DiffusionConfig::new(10.0 * 8.4, 1e-4, cfg.demo2d.steps)?;
    let heuristic: Vec<Result<Vec<f64>>> = par_map(n, cfg.jobs, |i| {
        let mut rng = stream(cfg.seed, (2 << 32) + i as u64);
        Ok(heuristic_posterior_sample(&m, &a, &ym, beta, &dcfg, &mut rng)?)
    });
    let heuristic = heuristic.into_iter().collect::<Result<Vec<_>>>()?;
    let pc = PosteriorConfig::new(cfg.demo2d.max_rounds, beta)?;
    let rs = RejectionSampler::new(&a, &ym, pc)?;
    let rejection: Vec<Result<Option<Vec<f64>>>> = par_map(n, cfg.jobs, |i| {
        let mut rng = stream(cfg.seed, (3 << 32) + i as u64);
        let mut prop = |r: &mut StreamRng| Ok(m.sample_prior(r).to_vec());
        Ok(rs.sample(&mut prop, &mut rng)?.0)
    });
    let rejection: Vec<Vec<f64>> = rejection.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    run.time("sampling", start.elapsed().as_secs_f64());

    let frac_upper = |xs: &mut dyn Iterator<Item = [f64; 2]>| {
        let (mut hit, mut tot) = (0usize, 0usize);
        for x in xs {
            hit += m.nearest_component(&x);
            tot += 1;
        }
        hit as f64 / tot.max(1) as f64
    };
    let oracle = m.posterior_weights(y)[1];
    let est_exact = frac_upper(&mut exact.iter().copied());
    let est_heur = frac_upper(&mut heuristic.iter().map(|v| [v[0], v[1]]));
    let est_rej = frac_upper(&mut rejection.iter().map(|v| [v[0], v[1]]));
    let pair = |x: &[f64]| vec![g17(x[0]), g17(x[1])];
    run.csv("prior.csv", &["x1", "x2"], &prior.iter().map(|x| pair(x)).collect::<Vec<_>>())?;
    let mut post = Vec::new();
    for (name, xs) in [
        ("brute-force", exact.iter().map(|x| x.to_vec()).collect::<Vec<_>>()),
        ("rejection", rejection.clone()),
        ("heuristic", heuristic.clone()),
    ] {
        for x in xs {
            let mut row = vec![name.to_string()];
            row.extend(pair(&x));
            post.push(row);
        }
    }
    run.csv("posterior.csv", &["sampler", "x1", "x2"], &post)?;
    run.json(
        "weights.json",
        &json!({
            "y": y,
            "oracle_weight_upper": oracle,
            "estimates": {
                "brute-force": est_exact,
                "rejection": est_rej,
                "heuristic": est_heur,
            },
            "discrepancy": {
                "brute-force": est_exact - oracle,
                "rejection": est_rej - oracle,
                "heuristic": est_heur - oracle,
            },
            "rejection_accepted": rejection.len(),
            "samples": n,
        }),
    )?;
    run.finish()
}
