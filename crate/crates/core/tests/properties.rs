//! Property tests for the structural invariants.

use causal_dqn::discovery::{graph_metrics, Cpdag};
use causal_dqn::linalg::Mat;
use causal_dqn::monitor::{alarm_check, init_monitor, local_contributions, update_monitor};
use causal_dqn::qnet::{boltzmann, causal_entropy, select_top_m};
use causal_dqn::streams::{parse_csv_streams, sample_er_dag, write_csv_streams, StreamBatch};
use proptest::prelude::*;

proptest! {
    #[test]
    fn er_dags_are_acyclic_with_expected_edge_budget(
        p in 1usize..40,
        prob in 0.0f64..=1.0,
        seed in 0u64..5000,
    ) {
        let g = sample_er_dag(p, prob, seed).unwrap();
        prop_assert!(g.is_acyclic_by_order());
        prop_assert!(g.edge_count() <= p * (p - 1) / 2);
        for i in 0..p {
            prop_assert!(!g.adjacency[i][i], "self loop at {i}");
        }
    }

    #[test]
    fn boltzmann_is_a_distribution_and_shift_invariant(
        q in prop::collection::vec(-50.0f64..50.0, 1..20),
        tau in 0.01f64..5.0,
        shift in -100.0f64..100.0,
    ) {
        let pi = boltzmann(&q, tau);
        prop_assert!(pi.probs.iter().all(|&v| v >= 0.0));
        prop_assert!((pi.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let shifted: Vec<f64> = q.iter().map(|v| v + shift).collect();
        let pi2 = boltzmann(&shifted, tau);
        for (a, b) in pi.probs.iter().zip(pi2.probs.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_entropy_is_nonnegative_and_zero_mask_is_zero(
        q in prop::collection::vec(-10.0f64..10.0, 2..12),
        tau in 0.05f64..3.0,
        mask_bits in prop::collection::vec(0u8..2, 2..12),
    ) {
        let pi = boltzmann(&q, tau);
        let mask: Vec<u8> = mask_bits.iter().cycle().take(q.len()).copied().collect();
        let h = causal_entropy(&pi, &mask);
        prop_assert!(h >= 0.0);
        if mask.iter().all(|&c| c == 0) {
            prop_assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn top_m_is_permutation_equivariant_up_to_ties(
        q in prop::collection::vec(-10.0f64..10.0, 2..12),
        rot in 1usize..11,
    ) {
        // distinct values so the tie rule cannot interfere
        let mut q = q;
        for (i, v) in q.iter_mut().enumerate() {
            *v += i as f64 * 1e-9;
        }
        let p = q.len();
        let m = 1 + rot % p;
        let rot = rot % p;
        let top = select_top_m(&q, m).unwrap();
        let mut rotated = q.clone();
        rotated.rotate_left(rot);
        let top_rot = select_top_m(&rotated, m).unwrap();
        // map back through the rotation
        let mut mapped: Vec<usize> = top_rot.iter().map(|&i| (i + rot) % p).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, top);
    }

    #[test]
    fn alarm_is_monotone_in_the_statistic(
        a in 0.0f64..100.0,
        b in 0.0f64..100.0,
        dof in 1usize..60,
        zeta in 0.001f64..0.5,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if alarm_check(lo, dof, zeta) {
            prop_assert!(alarm_check(hi, dof, zeta));
        }
    }

    #[test]
    fn contribution_sum_matches_quadratic_form(
        values in prop::collection::vec(-3.0f64..3.0, 24),
        lambda in 0.0f64..0.5,
    ) {
        let p = 4;
        let mut state = init_monitor(p, Mat::identity(p), lambda).unwrap();
        for chunk in values.chunks(p) {
            if chunk.len() == p {
                state = update_monitor(&state, chunk, &[0, 1, 2, 3]).unwrap();
            }
        }
        let c = local_contributions(&state);
        let direct = causal_dqn::linalg::quad_form(&state.precision, &state.mu);
        prop_assert!((c.total - direct).abs() < 1e-12);
        prop_assert!((c.per_var.iter().sum::<f64>() - c.total).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_preserves_values(
        rows in prop::collection::vec(
            prop::collection::vec(-1e6f64..1e6, 3),
            1..20,
        ),
    ) {
        let batch = StreamBatch { horizon: rows.len(), p: 3, values: rows, truth: None };
        let text = write_csv_streams(&batch);
        let back = parse_csv_streams(&text, 1, 3).unwrap();
        prop_assert_eq!(back.values, batch.values);
    }

    #[test]
    fn self_metrics_are_perfect_for_any_dag(
        p in 2usize..15,
        prob in 0.0f64..=1.0,
        seed in 0u64..1000,
    ) {
        let g = sample_er_dag(p, prob, seed).unwrap();
        let m = graph_metrics(&Cpdag::from_dag(&g), &g).unwrap();
        prop_assert_eq!(m.shd, 0);
        prop_assert_eq!(m.tpr, 1.0);
        prop_assert_eq!(m.fdr, 0.0);
    }
}
