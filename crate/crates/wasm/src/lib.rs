//! Browser bindings for the demo page in `www/`. Every export returns a flat
//! `Vec<f64>` so the page can read it as a `Float64Array` without glue.
//! The `*_impl` functions carry the logic and are tested natively.

use dpslab::diffusion::{reverse_trajectory, DiffusionConfig};
use dpslab::instance::{Instance, InstanceParams, Measurement, OneWayCandidate};
use dpslab::linalg::Matrix;
use dpslab::mixture2d::Mixture2d;
use dpslab::piecewise::{build_score_approx, TestFamily};
use dpslab::posterior::heuristic_posterior_sample;
use dpslab::relu::compile_piecewise;
use dpslab::rng::stream;
use dpslab::scores::ExactMixture;
use wasm_bindgen::prelude::*;

fn js_err(e: dpslab::error::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Planar posterior scatter at observation `y`.
///
/// Layout: `[w_exact, w_heuristic, x1, x2, ...exact..., x1, x2, ...heuristic...]`
/// with `n` points in each block. The two leading numbers are the oracle
/// weight of the upper component and the fraction of heuristic draws nearest it.
pub fn posterior_scatter_impl(y: f64, n: usize, steps: usize, seed: u64) -> dpslab::error::Result<Vec<f64>> {
    let m = Mixture2d::default();
    let a = Matrix::new(1, 2, vec![0.0, 1.0])?;
    let ym = Measurement::new(vec![y]);
    let dcfg = DiffusionConfig::new(84.0, 1e-4, steps)?;
    let beta = m.noise_var.sqrt();
    let mut out = vec![m.posterior_weights(y)[1], 0.0];
    let mut rng = stream(seed, 0);
    for _ in 0..n {
        out.extend(m.sample_posterior(y, &mut rng));
    }
    let mut upper = 0usize;
    let mut rng = stream(seed, 1);
    for _ in 0..n {
        let x = heuristic_posterior_sample(&m, &a, &ym, beta, &dcfg, &mut rng)?;
        upper += m.nearest_component(&x);
        out.extend(x);
    }
    out[1] = upper as f64 / n.max(1) as f64;
    Ok(out)
}

#[wasm_bindgen]
pub fn posterior_scatter(y: f64, n: usize, steps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    posterior_scatter_impl(y, n, steps, seed).map_err(js_err)
}

/// Score of the smoothed standard mixture, its piecewise-linear
/// approximation and the compiled ReLU network on `points` grid points in
/// `[lo, hi]`.
///
/// Layout: `[pieces, params, x, true, approx, relu, x, true, approx, relu, ...]`.
pub fn score_curve_impl(sigma: f64, kappa: f64, lo: f64, hi: f64, points: usize) -> dpslab::error::Result<Vec<f64>> {
    let law = TestFamily::STANDARD_MIXTURE.smoothed(sigma)?;
    let l = build_score_approx(|x| law.score(x), &law.approx_params(kappa)?)?;
    let net = compile_piecewise(&l);
    let mut out = vec![l.pieces() as f64, net.report().param_count as f64];
    let steps = points.max(2) - 1;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        out.extend([x, law.score(x), l.eval(x), net.eval1(x)]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn score_curve(sigma: f64, kappa: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    score_curve_impl(sigma, kappa, lo, hi, points).map_err(js_err)
}

/// Reverse-diffusion paths for the one-coordinate instance with separation
/// `r`, driven by the exact mixture score.
///
/// Layout: `[steps + 1, t_0, ..., t_steps, path_0..., path_1..., ...]`, each
/// path holding `steps + 1` positions.
pub fn trajectories_impl(r: f64, paths: usize, steps: usize, seed: u64) -> dpslab::error::Result<Vec<f64>> {
    let params = InstanceParams::new(1, 0, r, 1.0, 0.1, 0.25)?;
    let inst = Instance::new(params, OneWayCandidate::no_outputs(1))?;
    let provider = ExactMixture::new(&inst)?;
    let dcfg = DiffusionConfig::for_second_moment(r * r + 1.0)?;
    let dcfg = DiffusionConfig::new(dcfg.t_max, dcfg.t_min, steps)?;
    let mut out = Vec::new();
    for i in 0..paths {
        let path = reverse_trajectory(&provider, &dcfg, &mut stream(seed, i as u64), None)?;
        if i == 0 {
            out.push(path.len() as f64);
            out.extend(path.iter().map(|(t, _)| *t));
        }
        out.extend(path.iter().map(|(_, x)| x[0]));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn trajectories(r: f64, paths: usize, steps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    trajectories_impl(r, paths, steps, seed).map_err(js_err)
}
