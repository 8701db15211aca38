//! Property suites. Every runner uses a fixed seed so failures reproduce.

use gasket_qw::analysis::{sigma_points, sigma_series};
use gasket_qw::evolution::port_slots;
use gasket_qw::spectral::{limiting_distribution, EIGEN_TOLERANCE};
use gasket_qw::{
    build_shift, classical_walk_series, coin_matrix, fit_power_law, probability, scan_mixing_time, stddev,
    sweep_exponents, tvd, Boundary, CoinOperator, GasketGraph, GasketSpec, ProbabilityField, QuantumWalk,
    SpectralDecomposition, TimeAverage, DIRECTIONS,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::Reflective)]
}

fn field_from(graph: &GasketGraph, weights: &[f64]) -> ProbabilityField {
    let total: f64 = weights.iter().sum();
    let values = weights.iter().map(|w| w / total).collect();
    ProbabilityField::from_values(graph, values, 0).unwrap()
}

fn g2() -> GasketGraph {
    GasketGraph::new(GasketSpec::new(2, Boundary::Periodic))
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 15).prop_filter("nonzero mass", |w| w.iter().sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(config(48, 0x5eed_0001))]

    #[test]
    fn evolution_preserves_normalization(g in 0u32..=3, b in boundary(), pick in any::<prop::sample::Index>(), steps in 0u64..80) {
        let walk = QuantumWalk::new(GasketSpec::new(g, b));
        let graph = walk.graph();
        let start = graph.vertex(pick.index(graph.len()));
        let mut state = walk.initial_state(start).unwrap();
        for _ in 0..steps {
            walk.step(&mut state).unwrap();
        }
        prop_assert!((state.norm_sqr() - 1.0).abs() <= 1e-10);
        let p = probability(graph, &state).unwrap();
        prop_assert!((p.total() - 1.0).abs() <= 1e-10);
        let valid: std::collections::HashSet<usize> = port_slots(graph).collect();
        for (slot, a) in state.amplitudes().iter().enumerate() {
            if !valid.contains(&slot) {
                prop_assert_eq!(*a, Complex64::new(0.0, 0.0));
            }
        }
        prop_assert!(stddev(&p).sigma <= (1u64 << (g + 1)) as f64);
    }

    #[test]
    fn shift_is_an_involution(g in 0u32..=5, b in boundary()) {
        let graph = GasketGraph::new(GasketSpec::new(g, b));
        let shift = build_shift(&graph);
        for slot in port_slots(&graph) {
            let partner = shift.forward(slot);
            prop_assert_ne!(partner, slot);
            prop_assert_eq!(shift.forward(partner), slot);
        }
        prop_assert_eq!(shift.pairs().len(), graph.edge_count());
    }

    #[test]
    fn step_then_step_back_is_identity(g in 1u32..=3, b in boundary(), steps in 1u64..30) {
        let walk = QuantumWalk::new(GasketSpec::new(g, b));
        let initial = walk.initial_state(walk.graph().vertex(0)).unwrap();
        let mut state = initial.clone();
        for _ in 0..steps {
            walk.step(&mut state).unwrap();
        }
        for _ in 0..steps {
            walk.step_back(&mut state).unwrap();
        }
        for (a, b) in state.amplitudes().iter().zip(initial.amplitudes()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(128, 0x5eed_0002))]

    #[test]
    fn tvd_is_a_metric(a in weights(), b in weights(), c in weights()) {
        let graph = g2();
        let (p, q, r) = (field_from(&graph, &a), field_from(&graph, &b), field_from(&graph, &c));
        let pq = tvd(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&pq));
        prop_assert_eq!(pq, tvd(&q, &p).unwrap());
        prop_assert_eq!(tvd(&p, &p).unwrap(), 0.0);
        prop_assert!(pq <= tvd(&p, &r).unwrap() + tvd(&r, &q).unwrap() + 1e-15);
        if p.values() != q.values() {
            prop_assert!(pq > 0.0);
        }
    }

    #[test]
    fn fit_recovers_exact_power_laws(a in 0.05f64..20.0, b in -2.0f64..2.0, t_max in 8u32..400, c in 0.01f64..100.0) {
        let series: Vec<(f64, f64)> = (1..=t_max).map(|t| (t as f64, a * (t as f64).powf(b))).collect();
        let fit = fit_power_law(&series, (1.0, t_max as f64)).unwrap();
        prop_assert!((fit.exponent - b).abs() <= 1e-10);
        prop_assert!((fit.prefactor / a - 1.0).abs() <= 1e-10);
        prop_assert!(fit.residual < 1e-12);

        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, y)| (t, c * y)).collect();
        let refit = fit_power_law(&scaled, (1.0, t_max as f64)).unwrap();
        prop_assert!((refit.exponent - fit.exponent).abs() <= 1e-12);
        prop_assert!((refit.prefactor / (c * fit.prefactor) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn grover_blocks_are_invariant_under_port_relabeling(perm4 in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(), swap in any::<bool>()) {
        let g4 = coin_matrix(4).unwrap();
        let p4 = DMatrix::from_fn(4, 4, |i, j| if perm4[i] == j { 1.0 } else { 0.0 });
        prop_assert_eq!(&p4 * &g4 * p4.transpose(), g4);
        let g2 = coin_matrix(2).unwrap();
        let p2 = if swap { DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]) } else { DMatrix::identity(2, 2) };
        prop_assert_eq!(&p2 * &g2 * p2.transpose(), g2);
    }

    #[test]
    fn scan_mixing_time_satisfies_its_definition(values in prop::collection::vec(0.0f64..1.0, 1..200), eps in 0.01f64..0.99) {
        let series: Vec<(u64, f64)> = values.iter().enumerate().map(|(i, &d)| (i as u64 + 1, d)).collect();
        match scan_mixing_time(&series, eps) {
            Some(tau) => {
                prop_assert!(series.iter().filter(|(t, _)| *t >= tau).all(|(_, d)| *d <= eps));
                if tau > 1 {
                    prop_assert!(series[(tau - 2) as usize].1 > eps);
                }
            }
            None => prop_assert!(series.last().unwrap().1 > eps),
        }
    }
}

proptest! {
    #![proptest_config(config(24, 0x5eed_0003))]

    #[test]
    fn coin_blocks_match_every_vertex_degree(g in 0u32..=4, b in boundary(), pick in any::<prop::sample::Index>()) {
        let graph = GasketGraph::new(GasketSpec::new(g, b));
        let coin = CoinOperator::new(&graph);
        let v = pick.index(graph.len());
        let d = graph.degree(v);
        prop_assert_eq!(coin.block(v), coin_matrix(d).unwrap());
    }

    #[test]
    fn time_average_is_the_mean_of_stored_fields(g in 1u32..=3, b in boundary(), steps in 1u64..60) {
        let walk = QuantumWalk::new(GasketSpec::new(g, b));
        let graph = walk.graph();
        let mut state = walk.initial_state(graph.vertex(graph.len() / 2)).unwrap();
        let mut acc = TimeAverage::new(graph);
        let mut stored = Vec::new();
        for t in 0..steps {
            if t > 0 {
                walk.step(&mut state).unwrap();
            }
            let p = probability(graph, &state).unwrap();
            acc.push(&p).unwrap();
            stored.push(p);
        }
        let avg = acc.average().unwrap();
        for (i, value) in avg.values().iter().enumerate() {
            let mean = stored.iter().map(|p| p.values()[i]).sum::<f64>() / steps as f64;
            prop_assert!((value - mean).abs() <= 1e-14);
        }
    }

    #[test]
    fn classical_walk_keeps_unit_mass_and_bounded_spread(g in 1u32..=5, steps in 1u64..64) {
        let graph = GasketGraph::new(GasketSpec::new(g, Boundary::Reflective));
        let start = GasketSpec::new(g, Boundary::Reflective).bottom_center();
        let p = gasket_qw::analysis::classical_walk_distribution(&graph, start, steps).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let series = classical_walk_series(&graph, start, steps).unwrap();
        prop_assert!(series.iter().all(|s| s.sigma <= (1u64 << (g + 1)) as f64));
    }

    #[test]
    fn windowed_sigma_series_matches_full_evolution(g in 2u32..=5, pick in any::<prop::sample::Index>()) {
        let walk = QuantumWalk::new(GasketSpec::new(g, Boundary::Reflective));
        let v = walk.graph().vertex(pick.index(walk.graph().len()));
        let steps = 1u64 << (g - 1);
        let fast = sigma_series(&walk, v, steps).unwrap();
        let full = gasket_qw::analysis::sigma_series_full(&walk, v, steps).unwrap();
        prop_assert_eq!(sigma_points(&fast), sigma_points(&full));
    }
}

proptest! {
    #![proptest_config(config(8, 0x5eed_0004))]

    #[test]
    fn eigenvalue_grouping_is_stable_under_tolerance_changes(g in 0u32..=2, b in boundary(), pick in any::<prop::sample::Index>()) {
        let walk = QuantumWalk::new(GasketSpec::new(g, b));
        let graph = walk.graph();
        let initial = walk.initial_state(graph.vertex(pick.index(graph.len()))).unwrap();
        let reference = SpectralDecomposition::with_tolerance(graph, 8192, EIGEN_TOLERANCE).unwrap();
        let pi = limiting_distribution(&reference, &initial).unwrap();
        for tol in [EIGEN_TOLERANCE * 10.0, EIGEN_TOLERANCE / 10.0] {
            let other = SpectralDecomposition::with_tolerance(graph, 8192, tol).unwrap();
            let alt = limiting_distribution(&other, &initial).unwrap();
            prop_assert!(tvd(&pi, &alt).unwrap() < 1e-6);
        }
    }
}

#[test]
fn sweep_output_is_independent_of_worker_count() {
    let walk = QuantumWalk::new(GasketSpec::new(4, Boundary::Reflective));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let sweep = pool.install(|| sweep_exponents(&walk, 8, (4.0, 8.0))).unwrap();
        let mut per_vertex = Vec::new();
        sweep.write_per_vertex_csv(&mut per_vertex).unwrap();
        let mut hist = Vec::new();
        sweep.histogram.write_csv(&mut hist).unwrap();
        let mut mean = Vec::new();
        sweep.write_mean_series_csv(&mut mean).unwrap();
        (per_vertex, hist, mean)
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn port_layout_uses_six_slots_per_vertex() {
    let graph = g2();
    let shift = build_shift(&graph);
    assert_eq!(shift.slot_count(), graph.len() * DIRECTIONS);
    assert_eq!(shift.port_count(), graph.port_count());
}
