//! Property tests for the distance family, the per-logit gradient identity,
//! and the best-pair/softmax relationship.

use proptest::prelude::*;

use probemb::distance::{closed_form_distance, DistanceKind};
use probemb::losses::{mil_pair_loss, soft_pair_loss, LabeledPair, LogitTable, PairBatch};
use probemb::losses::{mil_loss, soft_contrastive_loss};
use probemb::{GaussianEmbedding, MatchParams, Modality};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn embedding_strategy(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-3.0..3.0f64, dim),
        prop::collection::vec(-4.0..2.0f64, dim),
    )
}

fn build(id: &str, mu: Vec<f64>, lv: Vec<f64>) -> GaussianEmbedding {
    GaussianEmbedding::new(id, Modality::A, mu, lv).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symmetric_kinds_are_symmetric(
        (mu_p, lv_p) in embedding_strategy(4),
        (mu_q, lv_q) in embedding_strategy(4),
    ) {
        let p = build("p", mu_p, lv_p);
        let q = build("q", mu_q, lv_q);
        for kind in DistanceKind::ALL {
            if !kind.is_symmetric() {
                continue;
            }
            let fwd = closed_form_distance(kind, &p, &q).unwrap();
            let rev = closed_form_distance(kind, &q, &p).unwrap();
            prop_assert!((fwd - rev).abs() <= 1e-10 * (1.0 + fwd.abs()),
                "{kind:?}: {fwd} vs {rev}");
        }
    }

    #[test]
    fn nonnegative_kinds_vanish_only_at_identity(
        (mu_p, lv_p) in embedding_strategy(3),
        delta_mu in prop::collection::vec(-1.0..1.0f64, 3),
        delta_lv in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let p = build("p", mu_p.clone(), lv_p.clone());
        // identity: zero within 1e-10
        let same = build("q", mu_p.clone(), lv_p.clone());
        for kind in [DistanceKind::Kl, DistanceKind::Js, DistanceKind::W2, DistanceKind::MeanL2] {
            let v = closed_form_distance(kind, &p, &same).unwrap();
            prop_assert!(v.abs() < 1e-10, "{kind:?} at identity: {v}");
        }
        // a clear perturbation: strictly positive
        let moved_mu: Vec<f64> = mu_p.iter().zip(&delta_mu)
            .map(|(m, d)| m + d.signum() * (d.abs() + 1e-2))
            .collect();
        let moved_lv: Vec<f64> = lv_p.iter().zip(&delta_lv)
            .map(|(l, d)| l + d.signum() * (d.abs() + 1e-2))
            .collect();
        for kind in [DistanceKind::Kl, DistanceKind::Js, DistanceKind::W2, DistanceKind::MeanL2] {
            let q = if kind == DistanceKind::MeanL2 {
                build("q", moved_mu.clone(), lv_p.clone())
            } else {
                build("q", moved_mu.clone(), moved_lv.clone())
            };
            let v = closed_form_distance(kind, &p, &q).unwrap();
            prop_assert!(v > 0.0, "{kind:?} after perturbation: {v}");
        }
    }

    #[test]
    fn distances_are_additive_over_dimensions(
        (mu_p, lv_p) in embedding_strategy(5),
        (mu_q, lv_q) in embedding_strategy(5),
    ) {
        let p = build("p", mu_p.clone(), lv_p.clone());
        let q = build("q", mu_q.clone(), lv_q.clone());
        for kind in DistanceKind::ALL {
            let full = closed_form_distance(kind, &p, &q).unwrap();
            let per_dim: Vec<f64> = (0..5).map(|d| {
                let p1 = build("p1", vec![mu_p[d]], vec![lv_p[d]]);
                let q1 = build("q1", vec![mu_q[d]], vec![lv_q[d]]);
                closed_form_distance(kind, &p1, &q1).unwrap()
            }).collect();
            let combined = if kind == DistanceKind::MeanL2 {
                per_dim.iter().map(|v| v * v).sum::<f64>().sqrt()
            } else {
                per_dim.iter().sum::<f64>()
            };
            prop_assert!((full - combined).abs() <= 1e-9 * (1.0 + full.abs()),
                "{kind:?}: {full} vs {combined}");
        }
    }

    #[test]
    fn logit_gradients_match_normalized_sigmoid_weights(
        logits in prop::collection::vec(-4.0..2.0f64, 9),
    ) {
        // positive pairs: dL/dl = -[s / sum s] (1 - s)
        // negative pairs: dL/dl = +[(1 - s) / sum (1 - s)] s
        let table = LogitTable::from_values(3, logits.clone()).unwrap();
        let sum_s: f64 = logits.iter().map(|&l| sigmoid(l)).sum();
        let sum_one_minus: f64 = logits.iter().map(|&l| 1.0 - sigmoid(l)).sum();
        let pos = soft_pair_loss(&table, true);
        let neg = soft_pair_loss(&table, false);
        for (i, &l) in logits.iter().enumerate() {
            let s = sigmoid(l);
            let expected_pos = -(s / sum_s) * (1.0 - s);
            let expected_neg = ((1.0 - s) / sum_one_minus) * s;
            prop_assert!((pos.logit_grads[i] - expected_pos).abs() < 1e-10,
                "positive weight identity: {} vs {expected_pos}", pos.logit_grads[i]);
            prop_assert!((neg.logit_grads[i] - expected_neg).abs() < 1e-10,
                "negative weight identity: {} vs {expected_neg}", neg.logit_grads[i]);
        }
    }

    #[test]
    fn one_hot_weights_reproduce_best_pair_loss(
        logits in prop::collection::vec(-5.0..3.0f64, 4),
    ) {
        // replacing the softmax-style weights with a one-hot vector on the
        // best logit is exactly the best-pair loss
        let table = LogitTable::from_values(2, logits.clone()).unwrap();
        let best = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let worst = logits.iter().cloned().fold(f64::INFINITY, f64::min);
        let expect_pos = -sigmoid(best).max(1e-12).ln();
        let expect_neg = -(1.0 - sigmoid(worst)).max(1e-12).ln();
        let pos = mil_pair_loss(&table, true);
        let neg = mil_pair_loss(&table, false);
        prop_assert!((pos.value - expect_pos).abs() < 1e-12);
        prop_assert!((neg.value - expect_neg).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_regularizer_equals_closed_form_against_standard_normal(
        (mu, lv) in embedding_strategy(4),
    ) {
        // two independent routes to the same divergence
        let e = build("e", mu, lv);
        let standard = build("std", vec![0.0; 4], vec![0.0; 4]);
        let reg = probemb::losses::kl_regularizer(&e).value;
        let closed = closed_form_distance(DistanceKind::Kl, &e, &standard).unwrap();
        prop_assert!((reg - closed).abs() <= 1e-10 * (1.0 + closed.abs()),
            "regularizer {reg} vs closed form {closed}");
    }

    #[test]
    fn plausible_positive_sets_grow_with_zeta(
        attrs in prop::collection::vec(prop::collection::vec(0u8..=1, 6), 2..20),
        query in prop::collection::vec(0u8..=1, 6),
    ) {
        // enlarging zeta never shrinks a query's positive set
        let mut previous: Vec<usize> = Vec::new();
        for zeta in 0..=6usize {
            let current: Vec<usize> = attrs
                .iter()
                .enumerate()
                .filter(|(_, a)| probemb::datagen::plausible_match(&query, a, zeta).unwrap())
                .map(|(i, _)| i)
                .collect();
            for idx in &previous {
                prop_assert!(current.contains(idx), "zeta {zeta} dropped index {idx}");
            }
            previous = current;
        }
    }
}

#[test]
fn positive_gradient_magnitude_increases_with_logit_when_all_negative() {
    // closer sample pairs (larger logits, all below zero) must receive
    // strictly larger gradient magnitude
    let logits = vec![-3.7, -0.4, -2.2, -1.1, -0.6, -2.9, -0.2, -3.1, -1.8];
    let table = LogitTable::from_values(3, logits.clone()).unwrap();
    let pl = soft_pair_loss(&table, true);
    let mut pairs: Vec<(f64, f64)> = logits
        .iter()
        .zip(&pl.logit_grads)
        .map(|(&l, &g)| (l, g.abs()))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in pairs.windows(2) {
        assert!(
            w[1].1 > w[0].1,
            "gradient magnitude not increasing: {pairs:?}"
        );
    }
}

#[test]
fn loss_approaches_zero_with_confident_correct_predictions() {
    // a positive pair with very high logits: p -> 1, loss -> 0
    let table = LogitTable::from_values(2, vec![20.0, 21.0, 22.0, 23.0]).unwrap();
    let pl = soft_pair_loss(&table, true);
    assert!(pl.value < 1e-8);
    // a negative pair with very low logits: p -> 0, loss -> 0
    let table = LogitTable::from_values(2, vec![-20.0, -21.0, -22.0, -23.0]).unwrap();
    let pl = soft_pair_loss(&table, false);
    assert!(pl.value < 1e-8);
}

#[test]
fn clamp_events_are_counted() {
    let a = GaussianEmbedding::point("a", Modality::A, vec![0.0]).unwrap();
    let b = GaussianEmbedding::point("b", Modality::B, vec![0.0]).unwrap();
    // identical points with a huge offset: p saturates to 1 in f64
    let params = MatchParams::new(1.0, 60.0).unwrap();
    let batch = PairBatch::new(
        vec![LabeledPair {
            a,
            b,
            positive: false,
        }],
        1,
        0,
    )
    .unwrap();
    let out = soft_contrastive_loss(&batch, &params).unwrap();
    assert_eq!(out.clamp_events, 1);
    assert!(out.value.is_finite());
}

#[test]
fn mil_equals_one_hot_soft_on_random_batches() {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut r = rand_chacha::ChaCha12Rng::seed_from_u64(5150);
    for _ in 0..20 {
        let j = r.random_range(1..=4usize);
        let n = j * j;
        let logits: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..3.0)).collect();
        let table = LogitTable::from_values(j, logits.clone()).unwrap();
        for positive in [true, false] {
            let mil = mil_pair_loss(&table, positive);
            let selected = if positive {
                logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            } else {
                logits.iter().cloned().fold(f64::INFINITY, f64::min)
            };
            let s = sigmoid(selected);
            let expected = if positive {
                -s.clamp(1e-12, 1.0 - 1e-12).ln()
            } else {
                -(1.0 - s.clamp(1e-12, 1.0 - 1e-12)).ln()
            };
            assert!((mil.value - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn batch_losses_are_order_invariant() {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_distr::StandardNormal;
    let mut r = rand_chacha::ChaCha12Rng::seed_from_u64(616);
    let dim = 4;
    let mk = |r: &mut rand_chacha::ChaCha12Rng, id: String, m: Modality| {
        let mu: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let lv: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..0.0)).collect();
        GaussianEmbedding::new(id, m, mu, lv).unwrap()
    };
    let a: Vec<_> = (0..3).map(|i| mk(&mut r, format!("a{i}"), Modality::A)).collect();
    let b: Vec<_> = (0..3).map(|i| mk(&mut r, format!("b{i}"), Modality::B)).collect();
    let mut pairs = Vec::new();
    for (i, ea) in a.iter().enumerate() {
        for (k, eb) in b.iter().enumerate() {
            pairs.push(LabeledPair {
                a: ea.clone(),
                b: eb.clone(),
                positive: i == k,
            });
        }
    }
    let params = MatchParams::new(1.2, 0.1).unwrap();
    let forward = PairBatch::new(pairs.clone(), 3, 9).unwrap();
    let mut shuffled = pairs;
    shuffled.reverse();
    shuffled.swap(0, 4);
    let backward = PairBatch::new(shuffled, 3, 9).unwrap();
    for f in [soft_contrastive_loss, mil_loss] {
        let v1 = f(&forward, &params).unwrap().value;
        let v2 = f(&backward, &params).unwrap().value;
        assert!((v1 - v2).abs() < 1e-12);
    }
}
