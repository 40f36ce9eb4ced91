mod common;

use common::{bits_of, direct_hamiltonian, edge_list, random_instance};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrp_vqe::ansatz::{build, Family};
use vrp_vqe::ising::{brute_force_minimum, compile_qubo, instance_minimum, qubo_to_ising, IsingModel, QuboModel};
use vrp_vqe::statevector::{argmax_bitstring, expectation, Controls, DiagonalObservable, Gate, GateOp, Statevector};
use vrp_vqe::vrp::{edge_of, var_index, Assignment, VrpInstance};

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Statevector {
    let amps: Vec<Complex64> = (0..1 << n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, m: usize) -> IsingModel {
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.random_bool(0.6) {
                pairs.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let fields = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    IsingModel::new(m, &pairs, fields, rng.random_range(-2.0..2.0)).unwrap()
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate {
    let q = rng.random_range(0..n);
    let other = |rng: &mut ChaCha8Rng| loop {
        let p = rng.random_range(0..n);
        if p != q {
            break p;
        }
    };
    let t = rng.random_range(-4.0..4.0);
    match rng.random_range(0..9) {
        0 => GateOp::H(q),
        1 => GateOp::X(q),
        2 => GateOp::Rx(q, t),
        3 => GateOp::Ry(q, t),
        4 => GateOp::Rz(q, t),
        5 => GateOp::Phase(q, t),
        6 => GateOp::Cnot { control: q, target: other(rng) },
        7 => GateOp::Rzz { a: q, b: other(rng), angle: t },
        _ => {
            let c = other(rng);
            GateOp::ControlledRy {
                controls: Controls::single(c, rng.random_bool(0.5)),
                target: q,
                angle: t,
            }
        }
    }
}

#[test]
fn var_index_is_a_bijection() {
    for n in 2..=6 {
        let mut seen = vec![false; n * (n - 1)];
        for (i, j) in edge_list(n) {
            let q = var_index(i, j, n).unwrap();
            assert!(!seen[q]);
            seen[q] = true;
            assert_eq!(edge_of(q, n).unwrap(), (i, j));
        }
        assert!(seen.into_iter().all(|s| s));
    }
}

#[test]
fn enumerated_edge_order_matches_index() {
    for n in 2..=5 {
        for (q, (i, j)) in edge_list(n).into_iter().enumerate() {
            assert_eq!(var_index(i, j, n).unwrap(), q);
        }
    }
}

#[test]
fn feasible_counts_by_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (k, expected) in [(1, 2), (2, 1)] {
        let inst = random_instance(&mut rng, 3, k);
        let feasible: Vec<u64> = (0..64u64).filter(|&z| inst.is_feasible(&Assignment::from_index(z, 6)).unwrap()).collect();
        assert_eq!(feasible.len(), expected, "k={k}");
    }
}

#[test]
fn qubo_matches_direct_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, k) in [(2, 1), (3, 1), (3, 2)] {
        for _ in 0..5 {
            let inst = random_instance(&mut rng, n, k);
            let qubo = compile_qubo(&inst);
            let m = n * (n - 1);
            for z in 0..1u64 << m {
                let a = Assignment::from_index(z, m);
                let direct = direct_hamiltonian(&inst, &bits_of(z, m));
                assert!((qubo.energy(&a).unwrap() - direct).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn vrp_ising_matches_qubo_on_random_assignments() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let inst = random_instance(&mut rng, 4, 2);
    let qubo = compile_qubo(&inst);
    let ising = qubo_to_ising(&qubo);
    for _ in 0..1000 {
        let a = Assignment::from_index(rng.random_range(0..1u64 << 12), 12);
        assert!((qubo.energy(&a).unwrap() - ising.energy(&a).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn penalty_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in [1, 2] {
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 3, k);
            let ising = qubo_to_ising(&compile_qubo(&inst));
            let (mut worst_feasible, mut best_infeasible) = (f64::NEG_INFINITY, f64::INFINITY);
            for z in 0..64u64 {
                let a = Assignment::from_index(z, 6);
                let e = ising.energy(&a).unwrap();
                if inst.is_feasible(&a).unwrap() {
                    worst_feasible = worst_feasible.max(e);
                } else {
                    best_infeasible = best_infeasible.min(e);
                }
            }
            assert!(best_infeasible > worst_feasible);
        }
    }
}

#[test]
fn oracle_is_feasible_depot_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3, 2);
        let ising = qubo_to_ising(&compile_qubo(&inst));
        let oracle = instance_minimum(&inst, &ising).unwrap();
        let loops = Assignment::from_edges(3, &[(0, 1), (1, 0), (0, 2), (2, 0)]).unwrap();
        assert_eq!(oracle.argmin_set, vec![loops]);
        assert_eq!(oracle.feasible_min, Some(true));
        let cost = inst.weight(0, 1) + inst.weight(1, 0) + inst.weight(0, 2) + inst.weight(2, 0);
        assert!((oracle.min_energy - cost).abs() < 1e-9);
    }
}

#[test]
fn oracle_listing_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for m in [1, 5, 13] {
        let model = random_model(&mut rng, m);
        let oracle = brute_force_minimum(&model).unwrap();
        let scan = (0..1u64 << m).map(|z| model.energy_of_index(z)).fold(f64::INFINITY, f64::min);
        assert_eq!(oracle.min_energy, scan);
        assert!(!oracle.argmin_set.is_empty());
        for a in &oracle.argmin_set {
            assert!((model.energy(a).unwrap() - oracle.min_energy).abs() <= 1e-12);
        }
    }
    let flat = brute_force_minimum(&IsingModel::constant(4, 1.0)).unwrap();
    assert_eq!(flat.argmin_set.len(), 16);
    let fields = brute_force_minimum(&IsingModel::new(2, &[], vec![1.0, 1.0], 0.0).unwrap()).unwrap();
    assert_eq!(fields.min_energy, -2.0);
    assert_eq!(fields.argmin_set, vec![Assignment::new(vec![true, true])]);
    assert!(brute_force_minimum(&IsingModel::zeros(25)).is_err());
}

#[test]
fn norm_survives_long_random_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for n in [2, 5, 9, 12] {
        let gates: Vec<Gate> = (0..200).map(|_| random_gate(&mut rng, n)).collect();
        let s = Statevector::run(n, &gates).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn expectation_reordered_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let state = random_state(&mut rng, 6);
    let model = random_model(&mut rng, 6);
    let mut order: Vec<usize> = (0..64).collect();
    order.shuffle(&mut rng);
    let direct: f64 = order
        .iter()
        .map(|&z| state.amplitudes()[z].norm_sqr() * model.energy(&Assignment::from_index(z as u64, 6)).unwrap())
        .sum();
    let e = expectation(&state, &DiagonalObservable::new(&model)).unwrap();
    assert!((e - direct).abs() < 1e-9);
}

#[test]
fn uniform_state_expectation_is_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let model = random_model(&mut rng, 2);
    let s = Statevector::run(2, &[GateOp::H(0), GateOp::H(1)]).unwrap();
    assert!((expectation(&s, &DiagonalObservable::new(&model)).unwrap() - model.offset()).abs() < 1e-12);
}

#[test]
fn argmax_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..20 {
        let s = random_state(&mut rng, 5);
        let p = s.probabilities();
        let best = (0..p.len()).fold(0, |b, z| if p[z] > p[b] { z } else { b });
        assert_eq!(argmax_bitstring(&s).to_index(), best as u64);
    }
}

#[test]
fn param_counts_by_audit() {
    let model = IsingModel::zeros(12);
    for n in 2..=12 {
        for layers in 1..=3 {
            for family in [Family::Angle, Family::HigherOrder, Family::Iqp] {
                let t = build(family, n, layers, None).unwrap();
                assert_eq!(t.param_count(), family.param_count(n, layers));
                assert_eq!(t.param_count(), layers * n);
            }
            let sub = IsingModel::zeros(n);
            let t = build(Family::QaoaCostMixer, n, layers, Some(&sub)).unwrap();
            assert_eq!(t.param_count(), 2 * layers);
        }
        if n <= 6 {
            assert_eq!(build(Family::Amplitude, n, 2, None).unwrap().param_count(), (1 << n) - 1);
        }
    }
    assert!(build(Family::Amplitude, 7, 1, None).is_err());
    assert!(build(Family::QaoaCostMixer, 3, 1, Some(&model)).is_err());
}

#[test]
fn qaoa_origin_keeps_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for m in 1..=5 {
        let model = random_model(&mut rng, m);
        let t = build(Family::QaoaCostMixer, m, 2, Some(&model)).unwrap();
        let s = Statevector::run(m, &t.bind(&[0.0; 4]).unwrap()).unwrap();
        assert!((expectation(&s, &DiagonalObservable::new(&model)).unwrap() - model.offset()).abs() < 1e-10);
    }
}

fn arb_qubo(max_m: usize) -> impl Strategy<Value = QuboModel> {
    (1..=max_m).prop_flat_map(|m| {
        (
            proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, m), m),
            proptest::collection::vec(-3.0..3.0f64, m),
            -5.0..5.0f64,
        )
            .prop_map(|(q, g, c)| QuboModel::from_dense(&q, g, c).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ising_substitution_is_exact(qubo in arb_qubo(8)) {
        let ising = qubo_to_ising(&qubo);
        let m = qubo.num_vars();
        for z in 0..1u64 << m {
            let a = Assignment::from_index(z, m);
            prop_assert!((qubo.energy(&a).unwrap() - ising.energy(&a).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn vrp_ising_exhaustive(seed in any::<u64>(), n in 2usize..=3, k_pick in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1 + k_pick % (n - 1);
        let inst = random_instance(&mut rng, n, k);
        let qubo = compile_qubo(&inst);
        let ising = qubo_to_ising(&qubo);
        let m = n * (n - 1);
        for z in 0..1u64 << m {
            let a = Assignment::from_index(z, m);
            prop_assert!((qubo.energy(&a).unwrap() - ising.energy(&a).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn route_cost_is_monotone(seed in any::<u64>(), z in 0u64..1 << 12, extra in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 4, 2);
        let a = Assignment::from_index(z, 12);
        let mut b = a.clone();
        b.set(extra, true);
        prop_assert!(inst.route_cost(&b).unwrap() >= inst.route_cost(&a).unwrap());
    }

    #[test]
    fn route_cost_matches_edge_sum(seed in any::<u64>(), z in 0u64..1 << 12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 4, 3);
        let bits = bits_of(z, 12);
        let direct: f64 = edge_list(4).iter().zip(&bits).filter(|(_, &b)| b).map(|(&(i, j), _)| inst.weight(i, j)).sum();
        prop_assert!((inst.route_cost(&Assignment::new(bits)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn expectation_ignores_global_phase(seed in any::<u64>(), phase in -7.0..7.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, 4);
        let model = random_model(&mut rng, 4);
        let rotated = Statevector::from_amplitudes(s.amplitudes().iter().map(|a| a * Complex64::cis(phase)).collect()).unwrap();
        let obs = DiagonalObservable::new(&model);
        prop_assert!((expectation(&s, &obs).unwrap() - expectation(&rotated, &obs).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bound_templates_stay_normalized(
        family_pick in 0usize..5,
        n in 1usize..=6,
        layers in 1usize..=2,
        seed in any::<u64>(),
    ) {
        let family = [Family::Amplitude, Family::Angle, Family::HigherOrder, Family::Iqp, Family::QaoaCostMixer][family_pick];
        prop_assume!(!(family == Family::HigherOrder && n < 2));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, n);
        let t = build(family, n, layers, Some(&model)).unwrap();
        let params: Vec<f64> = (0..t.param_count()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let s = Statevector::run(n, &t.bind(&params).unwrap()).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        prop_assert!(t.bind(&params[1..]).is_err());
    }

    #[test]
    fn instance_json_round_trip(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, 1);
        let back = VrpInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn ising_text_round_trip(seed in any::<u64>(), m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, m);
        let back = IsingModel::from_text(&model.to_text()).unwrap();
        for z in 0..1u64 << m {
            prop_assert_eq!(back.energy_of_index(z), model.energy_of_index(z));
        }
    }
}
