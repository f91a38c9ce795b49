use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use specsbm::contacts::{window_contacts, ContactStream, WindowSpec};
use specsbm::geometry::detect_geometry;
use specsbm::io::{read_corpus, write_corpus};
use specsbm::rng::GraphSeed;
use specsbm::sbm::{
    build_theory_matrices, eigenfunction_values, expected_eigenvalue, limiting_covariance, sample_sbm,
    sample_sbm_batch, ExpectationOptions,
};
use specsbm::spectral::dist_values;
use specsbm::{dist_truncated, full_spectrum, spectrum, Graph, SbmParams};

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (3..max_n).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..3 * n)
            .prop_map(move |pairs| Graph::from_edges(n, pairs.into_iter().filter(|(a, b)| a != b)).unwrap())
    })
}

fn same_size_graphs(count: usize) -> impl Strategy<Value = Vec<Graph>> {
    (3usize..20).prop_flat_map(move |n| {
        proptest::collection::vec(
            proptest::collection::vec((0..n, 0..n), 0..3 * n)
                .prop_map(move |pairs| Graph::from_edges(n, pairs.into_iter().filter(|(a, b)| a != b)).unwrap()),
            count,
        )
    })
}

proptest! {
    #[test]
    fn pseudometric_axioms(gs in same_size_graphs(3)) {
        let s: Vec<Vec<f64>> = gs.iter().map(|g| full_spectrum(g).values).collect();
        let d = |a: usize, b: usize| dist_values(&s[a], &s[b]).unwrap();
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert!(d(0, 1) >= 0.0);
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        let c = gs[0].n().min(3);
        let t: Vec<_> = gs.iter().map(|g| spectrum(g, c).unwrap()).collect();
        let dt = |a: usize, b: usize| dist_truncated(&t[a], &t[b]).unwrap();
        prop_assert!(dt(0, 2) <= dt(0, 1) + dt(1, 2) + 1e-9);
        prop_assert!(dt(0, 1) <= d(0, 1) + 1e-9);
    }

    #[test]
    fn spectrum_is_permutation_invariant(g in graph_strategy(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut perm: Vec<usize> = (0..g.n()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let h = g.relabel(&perm).unwrap();
        let (a, b) = (full_spectrum(&g).values, full_spectrum(&h).values);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn single_edge_moves_each_eigenvalue_at_most_one(g in graph_strategy(30), a in 0usize..30, b in 0usize..30) {
        let n = g.n();
        let (a, b) = (a % n, b % n);
        prop_assume!(a != b);
        let h = g.toggle_edge(a, b).unwrap();
        let (x, y) = (full_spectrum(&g).values, full_spectrum(&h).values);
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn power_of_two_rescaling_samples_the_same_graph(
        p in proptest::collection::vec(0.05f64..0.9, 2),
        qf in 0.0f64..1.0,
        shift in 1i32..4,
        idx in 0u64..1000,
    ) {
        let k = 2f64.powi(shift);
        let q = qf * p[0].min(p[1]);
        let base = SbmParams::new(0.5, vec![0.5, 0.5], p.clone(), q).unwrap();
        let scaled = SbmParams::new(0.5 / k, vec![0.5, 0.5], p.iter().map(|x| x * k).collect(), q * k);
        // Scaled densities may leave [0, 1]; only compare valid pairs.
        if let Ok(scaled) = scaled {
            let gs = GraphSeed::new(3, idx);
            prop_assert_eq!(sample_sbm(&base, 40, gs).unwrap(), sample_sbm(&scaled, 40, gs).unwrap());
        }
    }

    #[test]
    fn window_count_and_membership_match_brute_force(
        times in proptest::collection::vec(0u32..5000, 1..40),
        window in 1u32..900,
        step in 1u32..300,
    ) {
        let raw: Vec<(f64, u64, u64)> = times.iter().enumerate().map(|(k, &t)| (t as f64, k as u64 % 7, 7 + k as u64 % 5)).collect();
        let stream = ContactStream::from_records(raw, vec![]).unwrap();
        let spec = WindowSpec::new(window as f64, step as f64);
        let graphs = window_contacts(&stream, spec).unwrap();
        let t_max = stream.t_max();
        // Windows [step (k-1), step (k-1) + window) that end by t_max.
        let brute = (1..).take_while(|&k| step as f64 * (k - 1) as f64 + window as f64 <= t_max).count();
        prop_assert_eq!(graphs.len(), brute);
        for r in &stream.records {
            let inside: Vec<usize> = (1..=graphs.len())
                .filter(|&k| {
                    let start = step as f64 * (k - 1) as f64;
                    r.t >= start && r.t < start + window as f64
                })
                .collect();
            let m = spec.membership(r.t);
            let predicted: Vec<usize> = m.filter(|&k| k <= graphs.len()).collect();
            prop_assert_eq!(&inside, &predicted);
            for &k in &inside {
                prop_assert!(graphs[k - 1].has_edge(r.i, r.j));
            }
        }
    }
}

#[test]
fn edge_list_round_trip_preserves_spectra() {
    let params = SbmParams::new(0.6, vec![0.4, 0.6], vec![0.5, 0.3], 0.02).unwrap();
    let graphs = sample_sbm_batch(&params, 300, 4, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &graphs).unwrap();
    let back = read_corpus(dir.path()).unwrap();
    assert_eq!(back, graphs);
    for (a, b) in graphs.iter().zip(&back) {
        let (x, y) = (spectrum(a, 3).unwrap().values, spectrum(b, 3).unwrap().values);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}

#[test]
fn discretized_kernel_eigenvectors_are_block_constant() {
    // With block sizes s_i n exact, the n×n kernel matrix has eigenvalues n ν_k
    // and eigenvectors equal to r_k on each block, over sqrt(n).
    let params = SbmParams::new(1.0, vec![0.2, 0.3, 0.5], vec![0.7, 0.5, 0.4], 0.1).unwrap();
    let n = 60;
    let blocks = params.node_blocks(n);
    let sizes: Vec<usize> = (0..3).map(|b| blocks.iter().filter(|&&x| x == b).count()).collect();
    assert_eq!(sizes, vec![12, 18, 30]);
    let f = |a: usize, b: usize| if a == b { params.p[a] } else { params.q };
    let k = DMatrix::from_fn(n, n, |x, y| f(blocks[x], blocks[y]));
    let eig = k.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let tm = build_theory_matrices(&params).unwrap();
    let r = eigenfunction_values(&tm, &params.s).unwrap();
    for j in 0..3 {
        assert_relative_eq!(eig.eigenvalues[idx[j]], n as f64 * tm.nu[j], max_relative = 1e-10);
        let col = eig.eigenvectors.column(idx[j]);
        let sign = if col[0] * r[(j, blocks[0])] >= 0.0 { 1.0 } else { -1.0 };
        for x in 0..n {
            assert!((sign * col[x] - r[(j, blocks[x])] / (n as f64).sqrt()).abs() < 1e-10);
        }
    }
}

#[test]
fn monte_carlo_eigenvalue_moments_match_theory() {
    // The predicted moments drop O(ω p) terms (zero diagonal, p(1 - ω p)
    // edge variance), so the mean tolerance carries a 2 ω max p allowance.
    let omega = 0.3;
    let params = SbmParams::new(omega, vec![0.5, 0.5], vec![0.6, 0.4], 0.02).unwrap();
    let n = 800;
    let count = 300;
    let graphs = sample_sbm_batch(&params, n, count, 13).unwrap();
    let spectra: Vec<Vec<f64>> = graphs.iter().map(|g| spectrum(g, 2).unwrap().values).collect();
    let cov = limiting_covariance(&params).unwrap();
    for i in 0..2 {
        let xs: Vec<f64> = spectra.iter().map(|s| s[i]).collect();
        let m = xs.iter().sum::<f64>() / count as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (count - 1) as f64;
        let predicted = expected_eigenvalue(&params, n, i, ExpectationOptions::default()).unwrap();
        let se = (v / count as f64).sqrt();
        let tol = 4.0 * se + 2.0 * omega * 0.6;
        assert!((m - predicted).abs() < tol, "λ{}: mean {m} vs {predicted}", i + 1);
        let pv = cov[(i, i)] * omega;
        assert!((v / pv - 1.0).abs() < 0.25, "λ{}: variance {v} vs {pv}", i + 1);
    }
}

#[test]
fn geometry_ignores_relabeling() {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let params = SbmParams::new(1.0, vec![0.3, 0.7], vec![0.5, 0.4], 0.01).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    for k in 0..4 {
        let g = sample_sbm(&params, 400, GraphSeed::new(17, k)).unwrap();
        let mut perm: Vec<usize> = (0..400).collect();
        perm.shuffle(&mut rng);
        let a = detect_geometry(&g).unwrap();
        let b = detect_geometry(&g.relabel(&perm).unwrap()).unwrap();
        assert_eq!(a.community_count, b.community_count);
        assert_eq!(a.s, b.s);
        assert_eq!(a.community_count, 2);
    }
}
