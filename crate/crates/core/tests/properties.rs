use proptest::prelude::*;

use hetqp::decoding::{decode, is_feasible_solution};
use hetqp::encoding::{batch, encode};
use hetqp::graphs::{generate_er, Graph};
use hetqp::loss::{batch_losses, penalty, relaxed_loss, LossConfig};
use hetqp::model::{forward, init_model, ModelConfig};
use hetqp::oracle::{
    approx_gap, approx_ratio, branch_and_bound_with, brute_force, format_mip_start, parse_mip_start, solve_exact,
    BnbConfig, MipStart, OracleCache,
};
use hetqp::problems::{build_qp, BinaryAssignment, ProblemClass, QpInstance, Sense};
use hetqp::training::dynamic_weights;

fn class() -> impl Strategy<Value = ProblemClass> {
    prop::sample::select(ProblemClass::ALL.to_vec())
}

fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n, 0.0..1.0f64, any::<u64>()).prop_map(|(n, p, seed)| generate_er(n, p, seed).unwrap())
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, n)
}

fn oriented(cls: ProblemClass, v: f64) -> f64 {
    match cls.sense() {
        Sense::Max => v,
        Sense::Min => -v,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_solutions_are_feasible((g, x) in graph(14).prop_flat_map(|g| { let n = g.num_nodes(); (Just(g), unit_vec(n)) }), cls in class()) {
        let sol = decode(cls, &g, &x).unwrap();
        prop_assert!(is_feasible_solution(&g, &sol).unwrap());
    }

    #[test]
    fn penalty_vanishes_exactly_on_feasible_points(g in graph(10), cls in class(), bits in prop::collection::vec(any::<bool>(), 10)) {
        let qp = build_qp(&g, cls);
        let x = BinaryAssignment::new(bits[..g.num_nodes()].to_vec());
        let h = encode(&g, &qp).unwrap();
        let feasible = qp.is_feasible(&x).unwrap().feasible;
        prop_assert_eq!(penalty(&h, &x.to_f64()).unwrap() == 0.0, feasible);
    }

    #[test]
    fn branch_and_bound_matches_enumeration(g in graph(11), cls in class()) {
        let qp = build_qp(&g, cls);
        let bf = brute_force(&qp).unwrap();
        let bb = branch_and_bound_with(&qp, &BnbConfig::with_time_limit(30.0), None).unwrap();
        prop_assert!(bb.proven_optimal);
        prop_assert_eq!(bf.value_reported, bb.value_reported);
        prop_assert!(qp.is_feasible(&bb.x_star).unwrap().feasible);
    }

    #[test]
    fn warm_start_never_makes_the_incumbent_worse((g, x) in graph(24).prop_flat_map(|g| { let n = g.num_nodes(); (Just(g), unit_vec(n)) }), cls in class()) {
        let qp = build_qp(&g, cls);
        let start = decode(cls, &g, &x).unwrap().assignment();
        let start_value = qp.discrete_objective(&start).unwrap().reported;
        let cfg = BnbConfig { time_limit: 10.0, node_limit: Some(50) };
        let r = branch_and_bound_with(&qp, &cfg, Some(&start)).unwrap();
        prop_assert!(oriented(cls, r.value_reported) >= oriented(cls, start_value));
    }

    #[test]
    fn decoded_ratio_is_on_the_right_side_of_one(g in graph(12), cls in class(), seed in any::<u64>()) {
        let qp = build_qp(&g, cls);
        let opt = solve_exact(&qp).unwrap();
        prop_assume!(opt.value_reported != 0.0);
        let x: Vec<f64> = (0..g.num_nodes()).map(|i| ((seed >> (i % 60)) & 1) as f64 * 0.5 + 0.25).collect();
        let v = qp.discrete_objective(&decode(cls, &g, &x).unwrap().assignment()).unwrap().reported;
        let ar = approx_ratio(v, opt.value_reported).unwrap();
        match cls.sense() {
            Sense::Max => prop_assert!(ar <= 1.0),
            Sense::Min => prop_assert!(ar >= 1.0),
        }
    }

    #[test]
    fn approx_gap_is_symmetric_under_negation(pairs in prop::collection::vec((-50.0..50.0f64, 0.5..50.0f64), 1..20)) {
        let neg: Vec<(f64, f64)> = pairs.iter().map(|&(v, o)| (-v, -o)).collect();
        prop_assert!((approx_gap(&pairs).unwrap() - approx_gap(&neg).unwrap()).abs() <= 1e-12);
        let exact: Vec<(f64, f64)> = pairs.iter().map(|&(_, o)| (o, o)).collect();
        prop_assert_eq!(approx_gap(&exact).unwrap(), 0.0);
    }

    #[test]
    fn dynamic_weights_are_inverse_to_gradient_norms(norms in prop::collection::vec(1e-3..1e3f64, 1..6)) {
        let w = dynamic_weights(&norms, 0.0);
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        for (wk, gk) in w.iter().zip(&norms) {
            prop_assert!((wk * gk - mean).abs() <= 1e-9 * mean);
        }
        let equal = dynamic_weights(&vec![norms[0]; norms.len()], 0.0);
        prop_assert!(equal.iter().all(|&x| (x - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn model_output_is_permutation_equivariant(g in graph(12), cls in class(), perm_seed in any::<u64>()) {
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let params = init_model(&ModelConfig { hidden_dim: 8, layers_prob: 2, layers_constr: 2, ..ModelConfig::default() }).unwrap();
        let h = encode(&g, &build_qp(&g, cls)).unwrap();
        let gp = g.relabel(&perm).unwrap();
        let hp = encode(&gp, &build_qp(&gp, cls)).unwrap();
        let y = forward(&params, &h).unwrap();
        let yp = forward(&params, &hp).unwrap();
        for i in 0..n {
            prop_assert!((y.values()[i] - yp.values()[perm[i]]).abs() <= 1e-9, "node {}: {} vs {}", i, y.values()[i], yp.values()[perm[i]]);
        }
    }

    #[test]
    fn batched_losses_equal_per_instance_losses(gs in prop::collection::vec(graph(10), 1..5), cls in class(), seed in any::<u64>()) {
        let hs: Vec<_> = gs.iter().map(|g| encode(g, &build_qp(g, cls)).unwrap()).collect();
        let b = batch(&hs).unwrap();
        let x: Vec<f64> = (0..b.num_var()).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 999.0).collect();
        let cfg = LossConfig::default();
        let losses = batch_losses(&b, &x, &cfg).unwrap();
        for (k, h) in hs.iter().enumerate() {
            let single = relaxed_loss(h, &x[b.var_range(k)], &cfg).unwrap();
            prop_assert!((losses[k] - single).abs() <= 1e-12 * (1.0 + single.abs()));
        }
        prop_assert_eq!(b.unbatch(), hs);
    }

    #[test]
    fn qp_text_and_edge_list_round_trip(g in graph(20), cls in class()) {
        let qp = build_qp(&g, cls);
        prop_assert_eq!(QpInstance::parse_text(&qp.to_text()).unwrap(), qp);
        prop_assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn mip_start_round_trips_values_bit_exactly(g in graph(16), cls in class(), x in unit_vec(16)) {
        let qp = build_qp(&g, cls);
        let n = g.num_nodes();
        let text = format_mip_start(qp.var_names(), MipStart::Relaxed(&x[..n])).unwrap();
        let back = parse_mip_start(&text).unwrap();
        prop_assert_eq!(back.len(), n);
        for ((name, v), (want_name, want)) in back.iter().zip(qp.var_names().iter().zip(&x[..n])) {
            prop_assert_eq!(name, want_name);
            prop_assert_eq!(v.to_bits(), want.to_bits());
        }
    }

    #[test]
    fn oracle_cache_returns_the_first_answer(g in graph(12), cls in class()) {
        let mut cache = OracleCache::in_memory();
        let first = cache.optimum(&g, cls).unwrap();
        let second = cache.optimum(&g, cls).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(cache.len(), 1);
        prop_assert_eq!(first.value_reported, solve_exact(&build_qp(&g, cls)).unwrap().value_reported);
    }
}
