//! Randomized checks of the module invariants.

use dpslab::circuit::BooleanCircuit;
use dpslab::diagnostics::{conditional_tv_check, tv_discrete};
use dpslab::diffusion::{reverse_run, DiffusionConfig, TimeGrid};
use dpslab::instance::{
    bits_eps, clipped_noise, phase_offset, round_r, BitString, Instance, InstanceParams, OneWayCandidate,
};
use dpslab::piecewise::PiecewiseLinear;
use dpslab::reduction::{random_circuit_owf, stretch_owf};
use dpslab::relu::{circuit_to_relu, compile_piecewise};
use dpslab::rng::{par_map, stream, uniform};
use dpslab::scores::{component_log_density, component_score, DiscreteGaussianSpec, ExactMixture, ScoreProvider, SeriesMethod};
use proptest::prelude::*;

fn bits(n: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n)
}

fn joint(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, cols), rows).prop_filter_map("empty", |mut t| {
        let z: f64 = t.iter().flatten().sum();
        if z <= 0.0 {
            return None;
        }
        t.iter_mut().flatten().for_each(|v| *v /= z);
        Some(t)
    })
}

/// Strictly increasing knots with matching values.
fn pl() -> impl Strategy<Value = PiecewiseLinear> {
    (1usize..30).prop_flat_map(|k| {
        (
            prop::collection::vec(0.01f64..3.0, k),
            -20.0f64..20.0,
            prop::collection::vec(-50.0f64..50.0, k),
            -10.0f64..10.0,
            -10.0f64..10.0,
        )
            .prop_map(|(gaps, start, values, ls, rs)| {
                let mut knots = Vec::with_capacity(gaps.len());
                let mut x = start;
                for g in gaps {
                    knots.push(x);
                    x += g;
                }
                PiecewiseLinear::new(knots, values, ls, rs).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bitstring_index_round_trip(n in 1usize..16, raw in any::<usize>()) {
        let i = raw % (1usize << n);
        let s = BitString::from_index(i, n);
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.bits().iter().all(|b| *b == 1 || *b == -1));
        prop_assert_eq!(s.to_index(), i);
        prop_assert_eq!(BitString::parse(&s.to_string()).unwrap(), s.clone());
        prop_assert_eq!(BitString::from_bools(&s.to_bools()), s);
    }

    #[test]
    fn tail_sits_on_its_lattice(s in bits(3), seed in any::<u64>(), eps in prop_oneof![Just(1.0), Just(0.5), Just(0.05)]) {
        let params = InstanceParams::new(3, 3, 30.0, eps, eps / 40.0, eps / 4.0).unwrap();
        let inst = Instance::new(params, OneWayCandidate::identity(3)).unwrap();
        let s = BitString::new(s).unwrap();
        let x = inst.sample_component(&s, &mut stream(seed, 0)).unwrap();
        prop_assert_eq!(x.entries.len(), 6);
        for (j, a) in x.tail(3).iter().enumerate() {
            let phase = phase_offset(s.get(j), eps);
            let k = ((a - phase) / eps).round();
            prop_assert_eq!(*a, k * eps + phase, "coordinate {}", j);
        }
    }

    #[test]
    fn clipped_measurement_decodes_exactly(circuit_seed in 0u64..1000, seed in any::<u64>()) {
        let params = InstanceParams::canonical(6, 5);
        let f = random_circuit_owf(6, 5, 18, circuit_seed).unwrap();
        let inst = Instance::new(params, f).unwrap();
        let mut rng = stream(seed, 0);
        for _ in 0..50 {
            let (s, x) = inst.sample_unconditional(&mut rng);
            let y = inst.measure_clipped(&x, &mut rng).unwrap();
            prop_assert_eq!(round_r(x.head(6)), s.clone());
            prop_assert_eq!(bits_eps(&y.entries, params.eps), inst.f().eval(&s));
        }
    }

    #[test]
    fn clipped_noise_stays_bounded(beta in 0.0f64..1.0, frac in 0.01f64..4.0, seed in any::<u64>()) {
        let beta_max = beta * frac + 1e-6;
        let mut rng = stream(seed, 0);
        for _ in 0..200 {
            prop_assert!(clipped_noise(beta, beta_max, &mut rng).abs() <= beta_max);
        }
    }

    #[test]
    fn circuits_round_trip_and_compile_exactly(n in 1usize..7, m in 1usize..5, extra in 0usize..16, seed in any::<u64>()) {
        let f = random_circuit_owf(n, m, m + extra, seed).unwrap();
        let c = f.circuit();
        let back = BooleanCircuit::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(&back, c);
        let net = circuit_to_relu(c).unwrap();
        for i in 0..1usize << n {
            let s = BitString::from_index(i, n);
            let out = f.eval(&s);
            prop_assert_eq!(out.clone(), f.eval(&s));
            let x: Vec<f64> = s.bits().iter().map(|&b| b as f64).collect();
            let got: Vec<f64> = net.eval(&x).unwrap();
            let want: Vec<f64> = out.bits().iter().map(|&b| b as f64).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn stretch_truncation_is_a_prefix(l in 1usize..8, seed in 0u64..500) {
        let f = random_circuit_owf(8, 8, 24, seed).unwrap();
        let g = stretch_owf(&f, l).unwrap();
        prop_assert_eq!(g.output_len(), l);
        let n = g.input_len();
        for i in 0..1usize << n {
            let u = BitString::from_index(i, n);
            let mut full = u.bits().to_vec();
            full.resize(8, 1);
            let want = f.eval(&BitString::new(full).unwrap());
            let got = g.eval(&u);
            prop_assert_eq!(got.bits(), &want.bits()[..l]);
        }
    }

    #[test]
    fn piecewise_is_continuous_and_compiles_exactly(l in pl()) {
        let eps = 1e-9;
        let steep = l.slopes().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (k, v) in l.knots().iter().zip(l.values()) {
            prop_assert_eq!(l.eval(*k), *v);
            let lo = l.eval(k - eps);
            let hi = l.eval(k + eps);
            let tol = 2.0 * steep * eps + 1e-12 * (1.0 + v.abs());
            prop_assert!((lo - v).abs() <= tol && (hi - v).abs() <= tol);
        }
        let net = compile_piecewise(&l);
        prop_assert!(net.report().param_count <= 4 * l.pieces() + 4);
        let (a, b) = (l.knots()[0] - 10.0, l.knots()[l.knots().len() - 1] + 10.0);
        for i in 0..=2000 {
            let x = a + (b - a) * i as f64 / 2000.0;
            let want = l.eval(x);
            prop_assert!((net.eval1(x) - want).abs() <= 1e-9 * (1.0 + want.abs()), "x = {}", x);
        }
    }

    #[test]
    fn tv_is_a_bounded_metric(p in joint(1, 8), q in joint(1, 8)) {
        let (p, q) = (&p[0], &q[0]);
        let d = tv_discrete(p, q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - tv_discrete(q, p).unwrap()).abs() <= 1e-15);
        prop_assert!(tv_discrete(p, p).unwrap() <= 1e-15);
    }

    #[test]
    fn conditional_tv_inequality(p in joint(4, 5), q in joint(4, 5)) {
        let (lhs, rhs) = conditional_tv_check(&p, &q).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn series_and_lattice_agree(
        eps in 0.05f64..1.5,
        odd in any::<bool>(),
        rho in 0.05f64..3.0,
        x in -6.0f64..6.0,
    ) {
        let spec = DiscreteGaussianSpec::for_bit(if odd { -1 } else { 1 }, eps, rho).unwrap();
        let f = spec.log_density_with(x, SeriesMethod::Fourier).unwrap();
        let l = spec.log_density_with(x, SeriesMethod::Lattice).unwrap();
        prop_assert!((f.exp() - l.exp()).abs() <= 1e-10 * l.exp(), "{} vs {}", f, l);
    }

    #[test]
    fn dg_score_is_log_density_slope(eps in 0.1f64..1.5, rho in 0.2f64..3.0, x in -5.0f64..5.0) {
        let spec = DiscreteGaussianSpec::for_bit(1, eps, rho).unwrap();
        let h = 1e-5;
        let fd = (spec.log_density(x + h).unwrap() - spec.log_density(x - h).unwrap()) / (2.0 * h);
        let sc = spec.score(x).unwrap();
        prop_assert!((fd - sc).abs() <= 1e-5 * sc.abs().max(1.0), "{} vs {}", fd, sc);
    }

    #[test]
    fn component_score_is_log_density_gradient(s in bits(2), sigma in 0.05f64..5.0, seed in any::<u64>()) {
        let params = InstanceParams::new(2, 2, 3.0, 1.0, 0.025, 0.25).unwrap();
        let inst = Instance::new(params, OneWayCandidate::identity(2)).unwrap();
        let s = BitString::new(s).unwrap();
        let mut rng = stream(seed, 0);
        let x: Vec<f64> = (0..4).map(|_| 8.0 * uniform(&mut rng) - 4.0).collect();
        let g = component_score(&inst, &s, sigma, &x).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (component_log_density(&inst, &s, sigma, &up).unwrap()
                - component_log_density(&inst, &s, sigma, &dn).unwrap())
                / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "coord {}: {} vs {}", i, fd, g[i]);
        }
    }

    #[test]
    fn mixture_scores_are_finite(sigma in 0.01f64..50.0, seed in any::<u64>()) {
        let inst = Instance::new(InstanceParams::canonical(2, 2), OneWayCandidate::identity(2)).unwrap();
        let p = ExactMixture::new(&inst).unwrap();
        let mut rng = stream(seed, 0);
        let x: Vec<f64> = (0..4).map(|_| 200.0 * uniform(&mut rng) - 100.0).collect();
        let s = p.score(sigma, &x).unwrap();
        prop_assert_eq!(s.len(), ScoreProvider::dim(&p));
        prop_assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn geometric_grid_is_strictly_decreasing(t_max in 1.0f64..1e4, frac in 1e-6f64..0.5, steps in 1usize..500) {
        let cfg = DiffusionConfig::new(t_max, t_max * frac, steps).unwrap();
        let g = TimeGrid::geometric(&cfg).unwrap();
        let t = g.times();
        prop_assert_eq!(t.len(), steps + 1);
        prop_assert!(t.windows(2).all(|w| w[0] > w[1]));
        prop_assert!(t[steps] > 0.0);
    }
}

#[test]
fn seeds_determine_runs() {
    let inst = Instance::new(InstanceParams::canonical(2, 2), OneWayCandidate::identity(2)).unwrap();
    let p = ExactMixture::new(&inst).unwrap();
    let cfg = DiffusionConfig::new(1000.0, 1e-3, 100).unwrap();
    let run = |seed| reverse_run(&p, &cfg, &mut stream(seed, 4), None).unwrap();
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
    let draw = |i: usize| inst.sample_unconditional(&mut stream(3, i as u64)).1.entries;
    assert_eq!(par_map(40, 1, draw), par_map(40, 4, draw));
}
