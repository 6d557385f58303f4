use std::f64::consts::PI;

use anomaly_walk::edgespace::edge_probabilities;
use anomaly_walk::numeric::{circular_distance, wrap_phase};
use anomaly_walk::{
    apply_step, build_star, build_step_operator, check_unitarity, eigendecompose, make_basis,
    parse_spec, power_apply, serialize_spec, Anomaly, AnomalyKind, Complex64, Phase, StarGraph,
    WalkState,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![
        (-12i64..=12, 1i64..=12).prop_map(|(n, d)| Phase::pi_fraction(n, d).unwrap()),
        (-3.1f64..3.1).prop_map(|r| Phase::radians(r).unwrap()),
    ]
}

fn graph(max_n: usize) -> impl Strategy<Value = StarGraph> {
    (3..=max_n)
        .prop_flat_map(|n| (Just(n), 1..=n, 1..=n, 0u8..5, phase()))
        .prop_map(|(n, a, b, which, ph)| {
            let anomaly = match which {
                0 => Anomaly::none(),
                1 => Anomaly::extra_edge(a, if a == b { a % n + 1 } else { b }),
                2 => Anomaly::loop_at(a),
                3 => Anomaly::extended_edge(a).with_phase(ph),
                _ => Anomaly::missing_loop(a, ph),
            };
            build_star(n, anomaly).unwrap()
        })
}

fn state(dim: usize) -> impl Strategy<Value = WalkState> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| WalkState::normalized(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

fn graph_and_state(max_n: usize) -> impl Strategy<Value = (StarGraph, WalkState)> {
    graph(max_n).prop_flat_map(|g| {
        let d = g.hilbert_dim();
        (Just(g), state(d))
    })
}

proptest! {
    #[test]
    fn steps_preserve_norm((g, s) in graph_and_state(80), steps in 1usize..50) {
        let op = build_step_operator(&g);
        let mut cur = s;
        for _ in 0..steps {
            cur = apply_step(&op, &cur).unwrap();
        }
        prop_assert!((cur.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_probabilities_sum_to_one((g, s) in graph_and_state(60)) {
        let p = edge_probabilities(&s, &make_basis(&g)).unwrap();
        prop_assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.values().all(|x| *x >= 0.0));
    }

    #[test]
    fn spec_round_trip_and_dimension(g in graph(40)) {
        let text = serialize_spec(&g);
        let back = parse_spec(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_spec(&back), text);
        let n = g.n_spokes();
        let want = match g.kind() {
            AnomalyKind::None => 2 * n,
            AnomalyKind::ExtraEdge { .. } | AnomalyKind::ExtendedEdge { .. } => 2 * n + 2,
            AnomalyKind::Loop { .. } => 2 * n + 1,
            AnomalyKind::MissingLoop { .. } => 3 * n,
        };
        prop_assert_eq!(g.hilbert_dim(), want);
        prop_assert_eq!(make_basis(&g).dim(), want);
    }

    #[test]
    fn sparse_apply_matches_dense((g, s) in graph_and_state(60)) {
        let op = build_step_operator(&g);
        prop_assert!(check_unitarity(&op, 1e-12).passed);
        let dense = op.to_dense(5000).unwrap();
        let v = DVector::from_column_slice(s.amplitudes());
        let want = &dense * &v;
        let got = apply_step(&op, &s).unwrap();
        let err = got.amplitudes().iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
        let back = op.apply_adjoint(&got).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn spectral_powers_compose((g, s) in graph_and_state(12), m in 0u64..500, k in 0u64..500) {
        let dense = build_step_operator(&g).to_dense(5000).unwrap();
        let spec = eigendecompose(&dense, 1e-6).unwrap();
        let v = DVector::from_column_slice(s.amplitudes());
        let once = power_apply(&spec, m + k, &v).unwrap();
        let twice = power_apply(&spec, m, &power_apply(&spec, k, &v).unwrap()).unwrap();
        prop_assert!((once - twice).norm() < 1e-8);
    }

    #[test]
    fn wrapping_is_periodic(theta in -100.0f64..100.0, k in -5i32..5) {
        let w = wrap_phase(theta);
        prop_assert!(w > -PI && w <= PI);
        let shifted = wrap_phase(theta + 2.0 * PI * k as f64);
        prop_assert!(circular_distance(w, shifted) < 1e-9);
    }
}
