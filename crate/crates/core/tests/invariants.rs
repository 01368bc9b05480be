use ndarray::Array2;
use pmp_core::data_io::{read_idx, read_params, read_samples, write_idx, write_params, write_samples, IdxArray};
use pmp_core::evaluation::{exact_distribution, mmd2, SampleSet};
use pmp_core::factor_graph::{Evidence, FactorGraph, FactorKind};
use pmp_core::lp_export::{
    map_reduced_to_full, parse_lp, reduced_lp_ising, serialize_lp, standard_lp_ising, PairLayout,
};
use pmp_core::max_product::{normalize, pair_update, SweepConfig};
use pmp_core::models::{EnergyModel, IsingModel};
use pmp_core::perturbation::{gumbel_cdf, gumbel_inv_cdf, persistent_step, PersistentPerturbationState};
use pmp_core::rng::Streams;
use pmp_core::samplers::Sampler;
use proptest::prelude::*;

fn ising(n: usize, vals: &[f64]) -> (Array2<f64>, Vec<f64>) {
    let mut w = Array2::zeros((n, n));
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            w[[i, j]] = vals[k];
            w[[j, i]] = vals[k];
            k += 1;
        }
    }
    (w, vals[k..k + n].to_vec())
}

proptest! {
    #[test]
    fn pair_update_is_clamped_max_difference(a in -50.0f64..50.0, w in -10.0f64..10.0) {
        let v = pair_update(a, w);
        prop_assert!(v >= w.min(0.0) - 1e-12 && v <= w.max(0.0) + 1e-12);
        prop_assert!((v - ((a + w).max(0.0) - a.max(0.0))).abs() < 1e-9);
    }

    #[test]
    fn normalize_sets_max_to_zero(mut v in prop::collection::vec(-1e6f64..1e6, 1..10)) {
        let order: Vec<f64> = v.clone();
        normalize(&mut v);
        prop_assert_eq!(v.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0.0);
        for (a, b) in order.iter().zip(&v) {
            prop_assert!(*b <= 0.0);
            prop_assert!((a - b - (order[0] - v[0])).abs() < 1e-6);
        }
    }

    #[test]
    fn gumbel_cdf_inverts(u in 1e-9f64..(1.0 - 1e-9)) {
        prop_assert!((gumbel_cdf(gumbel_inv_cdf(u)) - u).abs() < 1e-9);
    }

    #[test]
    fn persistent_step_keeps_length_and_freezes_at_one(len in 1usize..50, seed in any::<u64>()) {
        let mut rng = Streams::new(seed).rng(0, 0);
        let mut state = PersistentPerturbationState::new(len, 1.0, &mut rng).unwrap();
        let before = state.current();
        let after = persistent_step(&mut state, &mut rng).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn lp_text_round_trips(n in 1usize..6, vals in prop::collection::vec(-5.0f64..5.0, 21)) {
        let (w, b) = ising(n, &vals);
        let lp = reduced_lp_ising(&w, &b).unwrap();
        let back = parse_lp(&serialize_lp(&lp).unwrap()).unwrap();
        prop_assert_eq!(back, lp);
    }

    #[test]
    fn reduced_points_map_to_feasible_standard_points(
        n in 2usize..5,
        vals in prop::collection::vec(-3.0f64..3.0, 14),
        fracs in prop::collection::vec(0.0f64..=1.0, 32),
    ) {
        let (w, b) = ising(n, &vals);
        let layout = PairLayout::ising_ordered(n);
        let mut x: Vec<f64> = fracs[..n].to_vec();
        for (e, &(i, j)) in layout.edges.iter().enumerate() {
            let (lo, hi) = ((x[i] + x[j] - 1.0).max(0.0), x[i].min(x[j]));
            x.push(lo + (hi - lo) * fracs[n + e]);
        }
        let full = map_reduced_to_full(&x, n).unwrap();
        let standard = standard_lp_ising(&w, &b).unwrap();
        prop_assert!(standard.check_feasible(&full, 1e-12).is_ok());
        prop_assert!(full.iter().all(|&v| v >= -1e-12));
        let reduced = reduced_lp_ising(&w, &b).unwrap();
        prop_assert!((reduced.objective_value(&x) - standard.objective_value(&full)).abs() < 1e-10);
    }

    #[test]
    fn idx_round_trips(dims in prop::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
        let len: usize = dims.iter().product();
        let data: Vec<u8> = (0..len).map(|k| (seed.wrapping_add(k as u64 * 31) % 256) as u8).collect();
        let arr = IdxArray::new(dims, data).unwrap();
        prop_assert_eq!(read_idx(&write_idx(&arr)).unwrap(), arr);
    }

    #[test]
    fn samples_and_params_round_trip(
        rows in 1usize..6,
        cols in 1usize..6,
        big in any::<bool>(),
        theta in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..20),
    ) {
        let scale = if big { 1000 } else { 2 };
        let values: Vec<u16> = (0..rows * cols).map(|k| (k % scale) as u16).collect();
        let s = SampleSet::new(rows, cols, values, "x").unwrap();
        prop_assert_eq!(read_samples(&write_samples(&s), "x").unwrap(), s);
        prop_assert_eq!(read_params(&write_params(&theta)).unwrap(), theta);
    }

    #[test]
    fn perturbed_map_respects_evidence(seed in any::<u64>(), clamp in prop::collection::vec(0usize..2, 5)) {
        let mut rng = Streams::new(seed).rng(0, 0);
        let model = IsingModel::random(5, 1.0, 1.0, &mut rng);
        let sampler = model.sampler().unwrap();
        let evidence = Evidence::from_pairs([(1, clamp[1]), (3, clamp[3])]);
        let eps: Vec<f64> = (0..10).map(|k| (k as f64 * 0.37 + seed as f64).sin()).collect();
        let x = sampler.perturbed_map(&eps, &evidence, &SweepConfig::default());
        prop_assert_eq!(x[1], clamp[1]);
        prop_assert_eq!(x[3], clamp[3]);
    }

    #[test]
    fn exact_distribution_sums_to_one(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = Streams::new(seed).rng(0, 0);
        let model = IsingModel::random(n, 2.0, 2.0, &mut rng);
        let p = exact_distribution(&model).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn mmd_is_symmetric(a in prop::collection::vec(0u16..2, 12), b in prop::collection::vec(0u16..2, 16)) {
        let x = SampleSet::new(3, 4, a, "x").unwrap();
        let y = SampleSet::new(4, 4, b, "y").unwrap();
        prop_assert!((mmd2(&x, &y).unwrap() - mmd2(&y, &x).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn factor_graph_json_round_trips() {
    let mut g = FactorGraph::new(vec![2, 3, 2]).unwrap();
    g.set_unary(1, &[0.1, -0.2, 0.3]).unwrap();
    g.add_factor(vec![0, 2], FactorKind::IsingEdge { weight: 0.4 }).unwrap();
    g.add_factor(vec![0, 1], FactorKind::DenseTable { table: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0] })
        .unwrap();
    let back = FactorGraph::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(back, g);
}
