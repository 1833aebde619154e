use ising_lab::chain::{eigenvalues, exact_gap, stationary, tv_evolution, BirthDeathSpec, TvStart};
use ising_lab::graph::{sample_configuration_model, RegularGraph};
use ising_lab::landscape::{critical_points, phi_hat, phi_hat_mirror};
use ising_lab::quenched::fixed_spin_partition;
use ising_lab::tree::{root_ratio, Boundary, LeafState};
use ising_lab::ModelParams;
use proptest::prelude::*;

fn even_sized() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=6, 2usize..=20).prop_map(|(d, n)| if n * d % 2 == 1 { (n + 1, d) } else { (n, d) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_a_fixed_point_free_involution((n, d) in even_sized(), seed in any::<u64>()) {
        let g = sample_configuration_model(n, d, seed).unwrap();
        let pairing = g.pairing();
        prop_assert_eq!(pairing.len(), n * d);
        for (h, &m) in pairing.iter().enumerate() {
            prop_assert_ne!(h, m);
            prop_assert_eq!(pairing[m], h);
        }
        for v in 0..n {
            prop_assert_eq!(g.neighbors(v).len(), d);
        }
    }

    #[test]
    fn adjacency_is_symmetric((n, d) in even_sized(), seed in any::<u64>()) {
        let g = sample_configuration_model(n, d, seed).unwrap();
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(g.multiplicity(u, v), g.multiplicity(v, u));
            }
        }
    }

    #[test]
    fn crossing_counts_agree((n, d) in even_sized(), seed in any::<u64>(), mask in any::<u32>()) {
        let g = sample_configuration_model(n, d, seed).unwrap();
        let subset: Vec<usize> = (0..n).filter(|&v| mask >> (v % 32) & 1 == 1).collect();
        let cut = g.crossing_edges(&subset).unwrap();
        prop_assert_eq!(cut.crossing, g.crossing_via_adjacency(&subset).unwrap());
        // d|A| = 2 e(A) + e(A, A^c) + 2 loops(A) once loops count as internal
        prop_assert!(2 * cut.internal + cut.crossing <= d * cut.subset.len());
    }

    #[test]
    fn edge_list_round_trip((n, d) in even_sized(), seed in any::<u64>()) {
        let g = sample_configuration_model(n, d, seed).unwrap();
        let back = RegularGraph::from_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back.n(), n);
        prop_assert_eq!(back.edge_count(), g.edge_count());
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(back.multiplicity(u, v), g.multiplicity(u, v));
            }
        }
    }

    #[test]
    fn birth_death_rows_are_stochastic(steps in prop::collection::vec(-4.0f64..4.0, 2..40)) {
        let mut w = 0.0;
        let weights: Vec<f64> = steps.iter().map(|s| { w += s; w }).collect();
        let spec = BirthDeathSpec::build(weights).unwrap();
        for k in 0..=spec.n() {
            let total = spec.p()[k] + spec.q()[k] + spec.r()[k];
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(spec.r()[k] >= -1e-15);
        }
        prop_assert!(stationary(&spec).detailed_balance_residual(&spec) < 1e-12);
    }

    #[test]
    fn spectrum_lies_in_unit_interval(steps in prop::collection::vec(-3.0f64..3.0, 2..25)) {
        let mut w = 0.0;
        let weights: Vec<f64> = steps.iter().map(|s| { w += s; w }).collect();
        let spec = BirthDeathSpec::build(weights).unwrap();
        let ev = eigenvalues(&spec).unwrap();
        prop_assert_eq!(ev.len(), spec.n() + 1);
        prop_assert_eq!(ev[0], 1.0);
        prop_assert!(ev.iter().all(|&x| (-1.0 - 1e-9..=1.0).contains(&x)));
        prop_assert!(ev.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let gap = exact_gap(&spec).unwrap();
        prop_assert!((gap - (1.0 - ev[1])).abs() <= 1e-9);
    }

    #[test]
    fn tv_is_non_increasing(steps in prop::collection::vec(-2.0f64..2.0, 3..30)) {
        let mut w = 0.0;
        let weights: Vec<f64> = steps.iter().map(|s| { w += s; w }).collect();
        let spec = BirthDeathSpec::build(weights).unwrap();
        let curve = tv_evolution(&spec, TvStart::All, 200, 1).unwrap();
        for pair in curve.dist.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn landscape_mirror_matches_direct(beta in 0.1f64..4.0, b in -1.0f64..1.0, t in 0.05f64..0.95) {
        let p = ModelParams::new(3, beta, b).unwrap();
        prop_assert!((phi_hat_mirror(1.0 - t, &p) - phi_hat(t, &p)).abs() < 1e-9);
    }

    #[test]
    fn critical_points_alternate(beta in 0.2f64..6.0, b in 0.0f64..1.0, d in 3usize..6) {
        let p = ModelParams::new(d, beta, b).unwrap();
        let report = critical_points(&p);
        prop_assert!(report.criticals.len() == 1 || report.criticals.len() == 3);
        for pair in report.criticals.windows(2) {
            prop_assert!(pair[0].t < pair[1].t);
            prop_assert_ne!(pair[0].kind, pair[1].kind);
        }
    }

    #[test]
    fn root_ratio_is_antitone(seed in any::<u64>(), beta in 0.2f64..3.0, b in -0.5f64..0.5) {
        let p = ModelParams::new(3, beta, b).unwrap();
        let depth = 4;
        let count = 3 * 2usize.pow(depth as u32 - 1);
        let states = [LeafState::Plus, LeafState::Free, LeafState::Minus];
        let mut lower = Vec::with_capacity(count);
        let mut upper = Vec::with_capacity(count);
        let mut x = seed;
        for _ in 0..count {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = states[(x >> 33) as usize % 3];
            let c = states[(x >> 17) as usize % 3];
            let (lo, hi) = if a.rank() <= c.rank() { (a, c) } else { (c, a) };
            lower.push(lo);
            upper.push(hi);
        }
        let r_lo = root_ratio(depth, &Boundary::Leaves(lower), &p, 3).unwrap();
        let r_hi = root_ratio(depth, &Boundary::Leaves(upper), &p, 3).unwrap();
        prop_assert!(r_lo <= r_hi * (1.0 + 1e-12));
    }
}

#[test]
fn fixed_spin_tables_are_spin_flip_symmetric() {
    for seed in 0..10 {
        let g = sample_configuration_model(10, 3, seed).unwrap();
        let table = fixed_spin_partition(&g, 0.7).unwrap();
        for k in 0..=10 {
            assert!((table.log_z[k] - table.log_z[10 - k]).abs() < 1e-12);
        }
        // log Z_0 = beta |E|
        assert!((table.log_z[0] - 0.7 * table.edge_count as f64).abs() < 1e-12);
    }
}
