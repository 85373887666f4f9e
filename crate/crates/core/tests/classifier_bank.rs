mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use suprahmm::classifier::{fuse_scores, train_bank, BankConfig, ConditionBank, ConditionModel};
use suprahmm::corpus::{synth_generate, SynthSpec};
use suprahmm::features::{FeatureSequence, ProsodyFrame, PROSODIC_DIM};
use suprahmm::hmm::{Hmm2Model, Order, Shape, Topology, TrainConfig};
use suprahmm::math::argmax;
use suprahmm::suprasegmental::{prosodic_observations, StateMapping, SuprasegmentalModel};
use suprahmm::utterance::Utterance;
use suprahmm::Error;

fn track(t: usize, seed: u64) -> Vec<ProsodyFrame> {
    let mut r = rng(seed);
    (0..t)
        .map(|_| ProsodyFrame {
            log_energy: r.random_range(-1.0..1.0),
            pitch: r.random_range(-1.0..1.0),
            zcr: r.random_range(-1.0..1.0),
        })
        .collect()
}

/// Shifts every emission mean by `offset`, so models can be pushed apart.
fn shifted(mut m: Hmm2Model, offset: f64) -> Hmm2Model {
    for g in &mut m.emissions.states {
        for mu in &mut g.means {
            mu.iter_mut().for_each(|x| *x += offset);
        }
    }
    m
}

fn condition(label: &str, seed: u64, offset: f64) -> ConditionModel {
    let acoustic = shifted(random_model(Topology::new(Order::Second, Shape::Circular, 4).unwrap(), 2, 2, seed), offset);
    let supra_hmm = random_model(Topology::new(Order::Second, Shape::Circular, 2).unwrap(), PROSODIC_DIM, 1, seed + 1);
    let supra = SuprasegmentalModel::new(StateMapping::blocks(4, 2).unwrap(), supra_hmm).unwrap();
    ConditionModel { label: label.into(), acoustic, suprasegmental: Some(supra) }
}

/// Fused score recomputed from path enumeration at both levels.
fn oracle_fused(c: &ConditionModel, utt: &Utterance, alpha: f64) -> f64 {
    let la = brute_force_log_likelihood(&c.acoustic, &utt.features);
    let supra = c.suprasegmental.as_ref().unwrap();
    let pros = prosodic_observations(&c.acoustic, &supra.mapping, utt).unwrap();
    let lp = brute_force_log_likelihood(&supra.hmm, &pros);
    (1.0 - alpha) * la + alpha * lp
}

#[test]
fn hand_built_pair_matches_enumerated_scores() {
    let a = condition("a", 10, 0.0);
    let b = condition("b", 20, 4.0);
    let bank = ConditionBank::new(vec![a.clone(), b.clone()], 0.5).unwrap();
    for seed in 0..6 {
        // frames near model a's means (offset 0), far from b's (offset 4)
        let obs = random_sequence(5, 2, 300 + seed);
        let utt = Utterance::from_features(obs, Some(track(5, 400 + seed))).unwrap();
        let want = [oracle_fused(&a, &utt, 0.5), oracle_fused(&b, &utt, 0.5)];
        let d = bank.classify(&utt).unwrap();
        for (got, want) in d.scores.iter().zip(want) {
            assert!(relative_gap(*got, want) < 1e-9, "{got} vs {want}");
        }
        assert!(want[0] > want[1]);
        assert_eq!((d.index, d.label.as_str()), (0, "a"));
    }
}

#[test]
fn identical_models_pick_the_first_label() {
    let c = condition("x", 5, 0.0);
    let mut d = c.clone();
    d.label = "y".into();
    let mut e = c.clone();
    e.label = "z".into();
    let bank = ConditionBank::new(vec![c, d, e], 0.5).unwrap();
    let utt = Utterance::from_features(random_sequence(7, 2, 9), Some(track(7, 10))).unwrap();
    let out = bank.classify(&utt).unwrap();
    assert_eq!(out.scores[0], out.scores[1]);
    assert_eq!((out.index, out.label.as_str()), (0, "x"));
}

#[test]
fn endpoints_match_single_streams() {
    let bank = ConditionBank::new(vec![condition("a", 1, 0.0), condition("b", 2, 0.5), condition("c", 3, -0.5)], 0.5)
        .unwrap();
    for seed in 0..10 {
        let utt = Utterance::from_features(random_sequence(12, 2, seed), Some(track(12, seed + 99))).unwrap();
        let la = bank.acoustic_scores(&utt.features).unwrap();
        let lp = bank.prosodic_scores(&utt).unwrap();
        assert_eq!(bank.classify_at(&utt, 0.0).unwrap().index, argmax(&la).unwrap());
        assert_eq!(bank.classify_at(&utt, 1.0).unwrap().index, argmax(&lp).unwrap());
        assert_eq!(bank.classify_at(&utt, 0.0).unwrap().scores, la);
        assert_eq!(bank.classify_at(&utt, 1.0).unwrap().scores, lp);
    }
}

#[test]
fn acoustic_only_bank_ignores_missing_prosody() {
    let mut c = condition("a", 1, 0.0);
    c.suprasegmental = None;
    let bank = ConditionBank::new(vec![c.clone()], 0.0).unwrap();
    let utt = Utterance::from_features(random_sequence(4, 2, 3), None).unwrap();
    let d = bank.classify(&utt).unwrap();
    assert!(relative_gap(d.scores[0], brute_force_log_likelihood(&c.acoustic, &utt.features)) < 1e-9);
    assert!(matches!(ConditionBank::new(vec![c], 0.5), Err(Error::MissingSuprasegmental(_))));
}

#[test]
fn fusion_rejects_bad_weights() {
    assert_eq!(fuse_scores(-100.0, -80.0, 0.5).unwrap(), -90.0);
    assert_eq!(fuse_scores(-100.0, -80.0, 0.0).unwrap(), -100.0);
    assert_eq!(fuse_scores(-100.0, -80.0, 1.0).unwrap(), -80.0);
    for bad in [-0.01, 1.01, f64::NAN] {
        assert!(matches!(fuse_scores(-1.0, -1.0, bad), Err(Error::InvalidWeight(_))));
    }
    assert!(fuse_scores(f64::NEG_INFINITY, -1.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_shift_keeps_the_decision(
        scores in proptest::collection::vec(-1e4f64..1e4, 1..8),
        shift in -1e3f64..1e3,
    ) {
        let moved: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        prop_assert_eq!(argmax(&scores), argmax(&moved));
    }

    #[test]
    fn fused_score_lies_between_streams(la in -1e4f64..0.0, lp in -1e4f64..0.0, alpha in 0.0f64..=1.0) {
        let f = fuse_scores(la, lp, alpha).unwrap();
        prop_assert!(f >= la.min(lp) - 1e-9 && f <= la.max(lp) + 1e-9);
    }
}

fn small_spec() -> SynthSpec {
    SynthSpec { speakers: 6, texts: 12, train_speakers: 3, train_texts: 6, min_frames: 30, max_frames: 50, ..SynthSpec::default() }
}

fn small_config(seed: u64) -> BankConfig {
    BankConfig { mixtures: 2, seed, train: TrainConfig { max_iters: 8, ..TrainConfig::default() }, ..BankConfig::default() }
}

#[test]
fn separated_synthetic_conditions_are_identified() {
    let corpus = synth_generate(&small_spec()).unwrap();
    let (train, test) = corpus.split();
    let bank = train_bank(&corpus.manifest.conditions, &train, &small_config(1)).unwrap();
    assert_eq!(bank.conditions.len(), 6);
    // each test utterance was sampled from its own condition's generator
    let sample: Vec<_> = test.iter().take(200).collect();
    assert_eq!(sample.len(), 200);
    let hits = sample.iter().filter(|u| bank.classify(&u.utterance).unwrap().index == u.label).count();
    assert!(hits >= 180, "{hits} of 200");
}

#[test]
fn training_is_deterministic() {
    let corpus = synth_generate(&SynthSpec { n_conditions: 2, ..small_spec() }).unwrap();
    let (train, _) = corpus.split();
    let a = train_bank(&corpus.manifest.conditions, &train, &small_config(3)).unwrap();
    let b = train_bank(&corpus.manifest.conditions, &train, &small_config(3)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn missing_condition_is_rejected() {
    let corpus = synth_generate(&SynthSpec { n_conditions: 2, ..small_spec() }).unwrap();
    let (train, _) = corpus.split();
    let only_first: Vec<_> = train.into_iter().filter(|u| u.label == 0).collect();
    let err = train_bank(&corpus.manifest.conditions, &only_first, &small_config(0)).unwrap_err();
    assert!(matches!(err, Error::InvalidCorpus(_)), "{err}");
}

#[test]
fn classification_is_bit_stable() {
    let bank = ConditionBank::new(vec![condition("a", 1, 0.0), condition("b", 2, 1.0)], 0.5).unwrap();
    let utt = Utterance::from_features(
        FeatureSequence::new("u", 2, (0..40).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap(),
        Some(track(20, 4)),
    )
    .unwrap();
    let first = bank.classify(&utt).unwrap();
    for _ in 0..3 {
        let again = bank.classify(&utt).unwrap();
        assert_eq!(again.scores.iter().map(|s| s.to_bits()).collect::<Vec<_>>(), first.scores.iter().map(|s| s.to_bits()).collect::<Vec<_>>());
    }
}
