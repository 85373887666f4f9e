mod common;

use common::*;
use proptest::prelude::*;
use suprahmm::hmm::{
    backward, forward, init_model, sample_sequence, train, viterbi_align, GmmEmission, Lattice, Order,
    Shape, Topology, TrainConfig,
};

#[test]
fn forward_matches_path_enumeration_n3_t4() {
    let topo = Topology::new(Order::Second, Shape::Circular, 3).unwrap();
    let model = random_model(topo, 2, 2, 17);
    let obs = random_sequence(4, 2, 18);
    let (_, ll) = forward(&model, &obs).unwrap();
    let want = brute_force_log_likelihood(&model, &obs);
    assert!(relative_gap(ll, want) < 1e-8, "{ll} vs {want}");
}

#[test]
fn alpha_beta_product_constant_over_time() {
    let topo = Topology::new(Order::Second, Shape::Circular, 4).unwrap();
    let model = random_model(topo, 3, 2, 5);
    let obs = random_sequence(7, 3, 6);
    let (alpha, ll) = forward(&model, &obs).unwrap();
    let beta = backward(&model, &obs).unwrap();
    let brute = brute_force_log_likelihood(&model, &obs);
    for t in 0..obs.len() {
        let c = Lattice::combine(&alpha, &beta, t);
        assert!(relative_gap(c, ll) < 1e-8);
        assert!(relative_gap(c, brute) < 1e-8);
    }
}

#[test]
fn viterbi_matches_enumeration_n3_t5() {
    for seed in 0..10 {
        for shape in [Shape::Circular, Shape::Linear] {
            for order in [Order::First, Order::Second] {
                let topo = Topology::new(order, shape, 3).unwrap();
                let model = random_model(topo, 2, 2, 100 + seed);
                let obs = random_sequence(5, 2, 200 + seed);
                let (path, score) = viterbi_align(&model, &obs).unwrap();
                let (bpath, bscore) = brute_force_best_path(&model, &obs);
                assert!(relative_gap(score, bscore) < 1e-10);
                assert_eq!(path, bpath);
            }
        }
    }
}

#[test]
fn constant_oldest_index_collapses_to_first_order() {
    for seed in 0..10 {
        let (second, first) = collapsible_pair(4, Shape::Circular, 2, seed);
        for s in 0..5 {
            let obs = random_sequence(1 + s * 3, 2, 1000 + seed * 10 + s as u64);
            let a = forward(&second, &obs).unwrap().1;
            let b = forward(&first, &obs).unwrap().1;
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn em_recovers_generating_tensor() {
    let truth = recovery_truth();
    let corpus: Vec<_> = (0..200).map(|i| sample_sequence(&truth, 50, 5000 + i).unwrap().0).collect();
    let mut start = init_model(truth.topology, 2, 1, 77).unwrap();
    let frames = corpus.iter().flat_map(|s| s.frames());
    start.emissions = GmmEmission::from_data(3, 1, frames, 2, &mut rng(78)).unwrap();
    let cfg = TrainConfig { max_iters: 100, tol: 1e-7, ..TrainConfig::default() };
    let fitted = train(&start, &corpus, &cfg).unwrap();
    for w in fitted.meta.history.windows(2) {
        assert!(w[1] >= w[0] - 1e-6);
    }
    // learned state s corresponds to the true state with the nearest mean
    let perm: Vec<usize> = fitted
        .emissions
        .states
        .iter()
        .map(|g| {
            let mu = &g.means[0];
            (0..3)
                .min_by(|&a, &b| {
                    let da = dist2(mu, &truth.emissions.states[a].means[0]);
                    let db = dist2(mu, &truth.emissions.states[b].means[0]);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
        })
        .collect();
    let mut sorted = perm.clone();
    sorted.sort();
    assert_eq!(sorted, vec![0, 1, 2], "states did not separate: {perm:?}");
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let got = fitted.transitions.second(i, j, k).unwrap();
                let want = truth.transitions.second(perm[i], perm[j], perm[k]).unwrap();
                worst = worst.max((got - want).abs());
            }
        }
    }
    assert!(worst <= 0.1, "L-inf error {worst}");
}


proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_equals_enumeration(
        n in 2usize..5,
        t in 1usize..6,
        second in any::<bool>(),
        circular in any::<bool>(),
        seed in 0u64..10_000,
    ) {
        let order = if second { Order::Second } else { Order::First };
        let shape = if circular { Shape::Circular } else { Shape::Linear };
        let model = random_model(Topology::new(order, shape, n).unwrap(), 2, 2, seed);
        let obs = random_sequence(t, 2, seed + 1);
        let (alpha, ll) = forward(&model, &obs).unwrap();
        prop_assert!(relative_gap(ll, brute_force_log_likelihood(&model, &obs)) < 1e-8);
        let beta = backward(&model, &obs).unwrap();
        for step in 0..t {
            prop_assert!(relative_gap(Lattice::combine(&alpha, &beta, step), ll) < 1e-8);
        }
    }

    #[test]
    fn training_step_never_lowers_likelihood(seed in 0u64..1000, circular in any::<bool>()) {
        let shape = if circular { Shape::Circular } else { Shape::Linear };
        let topo = Topology::new(Order::Second, shape, 3).unwrap();
        let model = random_model(topo, 2, 2, seed);
        let corpus: Vec<_> = (0..3).map(|i| random_sequence(8, 2, seed * 7 + i)).collect();
        let cfg = TrainConfig { max_iters: 1, tol: 0.0, ..TrainConfig::default() };
        let out = train(&model, &corpus, &cfg).unwrap();
        prop_assert_eq!(out.meta.history.len(), 2);
        prop_assert!(out.meta.history[1] >= out.meta.history[0] - 1e-6);
    }
}
