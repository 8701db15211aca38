use std::collections::BTreeSet;

use gasket_qw::{
    build_dense_unitary, contains, exact_time_average, limiting_distribution, probability, tvd, Boundary,
    GasketGraph, GasketSpec, QuantumWalk, SpectralDecomposition, TimeAverage, Vertex, WalkerState,
};

const CAP: usize = 8192;

fn walk(g: u32, b: Boundary) -> QuantumWalk {
    QuantumWalk::new(GasketSpec::new(g, b))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn iterative_average(walk: &QuantumWalk, initial: &WalkerState, horizon: u64) -> Vec<f64> {
    let graph = walk.graph();
    let mut acc = TimeAverage::new(graph);
    let mut state = initial.clone();
    acc.push(&probability(graph, &state).unwrap()).unwrap();
    for _ in 1..horizon {
        walk.step(&mut state).unwrap();
        acc.push(&probability(graph, &state).unwrap()).unwrap();
    }
    acc.average().unwrap().values().to_vec()
}

/// Vertices of the gasket obtained by explicit recursive subdivision of the
/// bounding triangle, independent of the membership predicate.
fn subdivided_vertices(g: u32) -> BTreeSet<(i64, i64)> {
    fn rec(g: u32, x0: i64, y0: i64, out: &mut BTreeSet<(i64, i64)>) {
        if g == 0 {
            out.extend([(x0, y0), (x0 + 2, y0), (x0 + 1, y0 + 1)]);
            return;
        }
        let h = 1i64 << g;
        rec(g - 1, x0, y0, out);
        rec(g - 1, x0 + h, y0, out);
        rec(g - 1, x0 + h / 2, y0 + h / 2, out);
    }
    let mut out = BTreeSet::new();
    rec(g, 0, 0, &mut out);
    out
}

#[test]
fn membership_matches_recursive_subdivision() {
    for g in 0..=8u32 {
        let expected = subdivided_vertices(g);
        let w = 1i64 << (g + 1);
        let mut found = BTreeSet::new();
        for y in -1..=w / 2 + 1 {
            for x in -1..=w + 1 {
                if contains(g, x, y) {
                    found.insert((x, y));
                }
            }
        }
        assert_eq!(found, expected, "g={g}");
        let graph = GasketGraph::new(GasketSpec::new(g, Boundary::Periodic));
        let listed: BTreeSet<_> = graph.vertices().iter().map(|v| (v.x, v.y)).collect();
        assert_eq!(listed, expected, "g={g}");
    }
}

#[test]
fn sparse_step_matches_dense_operator() {
    for g in 0..=2u32 {
        for b in [Boundary::Periodic, Boundary::Reflective] {
            let w = walk(g, b);
            let dense = build_dense_unitary(w.graph(), CAP).unwrap();
            for &v in w.graph().vertices() {
                let mut sparse = w.initial_state(v).unwrap();
                let mut reference = sparse.clone();
                for t in 1..=50 {
                    w.step(&mut sparse).unwrap();
                    reference = dense.apply(&reference);
                    let err = sparse
                        .amplitudes()
                        .iter()
                        .zip(reference.amplitudes())
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                    assert!(err <= 1e-12, "g={g} {b} start {v} step {t}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn two_steps_match_dense_square() {
    let w = walk(1, Boundary::Periodic);
    let dense = build_dense_unitary(w.graph(), CAP).unwrap();
    let initial = w.initial_state(Vertex::new(2, 0)).unwrap();
    let u = dense.complex();
    let expected = &u * &u * dense.to_ports(&initial);
    let mut state = initial;
    w.step(&mut state).unwrap();
    w.step(&mut state).unwrap();
    let got = dense.to_ports(&state);
    assert!((got - expected).camax() < 1e-13);
}

#[test]
fn mid_run_probabilities_match_dense_operator() {
    for b in [Boundary::Periodic, Boundary::Reflective] {
        let w = walk(2, b);
        let dense = build_dense_unitary(w.graph(), CAP).unwrap();
        let initial = w.initial_state(Vertex::new(5, 1)).unwrap();
        let mut sparse = initial.clone();
        let mut reference = initial;
        for _ in 0..37 {
            w.step(&mut sparse).unwrap();
            reference = dense.apply(&reference);
        }
        let p = probability(w.graph(), &sparse).unwrap();
        let q = probability(w.graph(), &reference).unwrap();
        assert!(max_abs_diff(p.values(), q.values()) <= 1e-12);
    }
}

#[test]
fn unitarity_of_dense_operator() {
    for g in 0..=2u32 {
        for b in [Boundary::Periodic, Boundary::Reflective] {
            let d = build_dense_unitary(walk(g, b).graph(), CAP).unwrap();
            assert!(d.unitarity_defect() <= 1e-12, "g={g} {b}");
        }
    }
}

#[test]
fn norm_drift_over_ten_thousand_steps() {
    let w = walk(4, Boundary::Periodic);
    let mut state = w.initial_state(Vertex::new(16, 0)).unwrap();
    for _ in 0..10_000 {
        w.step(&mut state).unwrap();
    }
    assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
}

#[test]
fn iterative_average_matches_spectral_average() {
    let w = walk(2, Boundary::Periodic);
    let decomp = SpectralDecomposition::new(&w, CAP).unwrap();
    let initial = w.initial_state(Vertex::new(4, 0)).unwrap();
    let exact = exact_time_average(&decomp, &initial, 200).unwrap();
    let iterative = iterative_average(&w, &initial, 200);
    assert!(max_abs_diff(exact.values(), &iterative) <= 1e-8);
}

#[test]
fn averages_agree_for_several_starts_and_horizons() {
    for b in [Boundary::Periodic, Boundary::Reflective] {
        for g in 1..=2u32 {
            let w = walk(g, b);
            let decomp = SpectralDecomposition::new(&w, CAP).unwrap();
            let vertices = w.graph().vertices();
            for (i, &v) in vertices.iter().enumerate().filter(|(i, _)| i % 3 == 0).take(5) {
                let initial = w.initial_state(v).unwrap();
                let horizon = [1u64, 7, 64, 333, 1000][i % 5];
                let exact = exact_time_average(&decomp, &initial, horizon).unwrap();
                let iterative = iterative_average(&w, &initial, horizon);
                assert!(
                    max_abs_diff(exact.values(), &iterative) <= 1e-8,
                    "g={g} {b} start {v} T={horizon}"
                );
            }
        }
    }
}

#[test]
fn long_run_average_approaches_limit() {
    let w = walk(2, Boundary::Periodic);
    let decomp = SpectralDecomposition::new(&w, CAP).unwrap();
    let initial = w.initial_state(Vertex::new(4, 0)).unwrap();
    let pi = limiting_distribution(&decomp, &initial).unwrap();
    assert!((pi.total() - 1.0).abs() <= 1e-10);

    let avg = iterative_average(&w, &initial, 5000);
    let avg = gasket_qw::ProbabilityField::from_values(w.graph(), avg, 5000).unwrap();
    assert!(tvd(&avg, &pi).unwrap() < 2e-3);

    let far = exact_time_average(&decomp, &initial, 100_000).unwrap();
    assert!(tvd(&far, &pi).unwrap() < 5e-5);
}

#[test]
fn distance_to_limit_decays_like_inverse_time_at_small_scale() {
    let w = walk(2, Boundary::Periodic);
    let decomp = SpectralDecomposition::new(&w, CAP).unwrap();
    let initial = w.initial_state(Vertex::new(4, 0)).unwrap();
    let pi = limiting_distribution(&decomp, &initial).unwrap();
    let series = gasket_qw::tvd_series(&w, &initial, pi.values(), 10_000).unwrap();
    let mut scaled: Vec<f64> = series.iter().filter(|(t, _)| *t >= 10).map(|&(t, d)| t as f64 * d).collect();
    scaled.sort_by(f64::total_cmp);
    let median = scaled[scaled.len() / 2];
    let max = *scaled.last().unwrap();
    assert!(median > 0.0 && max / median < 10.0, "max {max} median {median}");
}

#[test]
fn decomposition_invariants() {
    for b in [Boundary::Periodic, Boundary::Reflective] {
        let w = walk(2, b);
        let decomp = SpectralDecomposition::new(&w, CAP).unwrap();
        for l in decomp.eigenvalues() {
            assert!((l.norm() - 1.0).abs() <= 1e-10);
        }
        let err = (decomp.reconstruct() - decomp.dense().complex()).camax();
        assert!(err <= 1e-8, "{b}: reconstruction error {err:e}");
        let spaces = decomp.eigenspaces();
        let dim = decomp.dense().dim();
        let mut total = nalgebra::DMatrix::<num_complex::Complex64>::zeros(dim, dim);
        for (i, a) in spaces.iter().enumerate() {
            let pa = a.projector();
            assert!((&pa * &pa - &pa).camax() <= 1e-8);
            for bsp in spaces.iter().skip(i + 1).take(3) {
                assert!((&pa * bsp.projector()).camax() <= 1e-8);
            }
            total += pa;
        }
        let id = nalgebra::DMatrix::<num_complex::Complex64>::identity(dim, dim);
        assert!((total - id).camax() <= 1e-8);
    }
}
