//! Finite-difference oracles for every loss and for the end-to-end
//! encoder-through-loss gradient.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use probemb::datagen::{generate, DatasetConfig};
use probemb::gradcheck::{
    central_difference, flatten_batch_grads, flatten_batch_params, flatten_embedding_grads,
    flatten_embedding_params, max_rel_error, rebuild_batch, rebuild_embeddings, DEFAULT_STEP,
};
use probemb::losses::{
    kl_regularizer, mil_loss, pairwise_logits, soft_contrastive_loss, total_loss,
    triplet_hnm_loss, uniformity_loss, LabeledPair, PairBatch,
};
use probemb::trainer::{make_minibatch, train, LossKind, MatchInit, Model, TrainConfig, TrainMode};
use probemb::{sample_embeddings, GaussianEmbedding, MatchParams, Modality};

const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn random_embedding(
    rng: &mut ChaCha12Rng,
    id: &str,
    modality: Modality,
    dim: usize,
) -> GaussianEmbedding {
    let mu: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let log_var: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..0.5)).collect();
    GaussianEmbedding::new(id, modality, mu, log_var).unwrap()
}

fn random_batch(rng: &mut ChaCha12Rng, b: usize, dim: usize, j: usize, seed: u64) -> PairBatch {
    let a_side: Vec<GaussianEmbedding> = (0..b)
        .map(|i| random_embedding(rng, &format!("a{i}"), Modality::A, dim))
        .collect();
    let b_side: Vec<GaussianEmbedding> = (0..b)
        .map(|i| random_embedding(rng, &format!("b{i}"), Modality::B, dim))
        .collect();
    let mut pairs = Vec::new();
    for (i, a) in a_side.iter().enumerate() {
        for (k, bb) in b_side.iter().enumerate() {
            pairs.push(LabeledPair {
                a: a.clone(),
                b: bb.clone(),
                positive: i == k,
            });
        }
    }
    PairBatch::new(pairs, j, seed).unwrap()
}

fn random_params(rng: &mut ChaCha12Rng) -> MatchParams {
    MatchParams::new(rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0)).unwrap()
}

#[test]
fn soft_contrastive_matches_finite_differences() {
    // B = 4, D = 8, J = 3
    for trial in 0..5u64 {
        let mut r = rng(100 + trial);
        let batch = random_batch(&mut r, 4, 8, 3, 55 + trial);
        let params = random_params(&mut r);
        let out = soft_contrastive_loss(&batch, &params).unwrap();
        let analytic = flatten_batch_grads(&batch, &out.grads);
        let theta = flatten_batch_params(&batch, &params);
        let numeric = central_difference(
            |t| {
                let (b, p) = rebuild_batch(&batch, t).unwrap();
                soft_contrastive_loss(&b, &p).unwrap().value
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < TOL, "trial {trial}: max rel error {err}");
    }
}

/// The best-logit selection must be stable under the finite-difference step;
/// resample until every pair's winning logit leads by a clear gap.
fn mil_safe_batch(trial: u64) -> (PairBatch, MatchParams) {
    for attempt in 0..50u64 {
        let mut r = rng(1000 + trial * 50 + attempt);
        let batch = random_batch(&mut r, 3, 5, 2, 77 + trial * 50 + attempt);
        let params = random_params(&mut r);
        let mut stable = true;
        for pair in batch.pairs() {
            let sa = sample_embeddings(&pair.a, batch.samples_per_embedding(), batch.seed());
            let sb = sample_embeddings(&pair.b, batch.samples_per_embedding(), batch.seed());
            let table = pairwise_logits(&sa, &sb, &params).unwrap();
            let mut values = table.values().to_vec();
            values.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let gap_low = values[1] - values[0];
            let gap_high = values[values.len() - 1] - values[values.len() - 2];
            if gap_low < 1e-3 || gap_high < 1e-3 {
                stable = false;
                break;
            }
        }
        if stable {
            return (batch, params);
        }
    }
    panic!("could not build an argmax-stable batch");
}

#[test]
fn mil_matches_finite_differences() {
    for trial in 0..5u64 {
        let (batch, params) = mil_safe_batch(trial);
        let out = mil_loss(&batch, &params).unwrap();
        let analytic = flatten_batch_grads(&batch, &out.grads);
        let theta = flatten_batch_params(&batch, &params);
        let numeric = central_difference(
            |t| {
                let (b, p) = rebuild_batch(&batch, t).unwrap();
                mil_loss(&b, &p).unwrap().value
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < TOL, "trial {trial}: max rel error {err}");
    }
}

/// Active hinge with a clear argmax and slack away from the kink.
fn triplet_safe_inputs(
    trial: u64,
) -> (GaussianEmbedding, GaussianEmbedding, Vec<GaussianEmbedding>) {
    for attempt in 0..100u64 {
        let mut r = rng(9000 + trial * 100 + attempt);
        let anchor = random_embedding(&mut r, "anchor", Modality::A, 6);
        let positive = random_embedding(&mut r, "pos", Modality::B, 6);
        let negatives: Vec<GaussianEmbedding> = (0..3)
            .map(|i| random_embedding(&mut r, &format!("neg{i}"), Modality::B, 6))
            .collect();
        let margin = 0.2;
        let cos = |x: &GaussianEmbedding, y: &GaussianEmbedding| {
            let nx: f64 = x.mu().iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.mu().iter().map(|v| v * v).sum::<f64>().sqrt();
            x.mu().iter().zip(y.mu()).map(|(a, b)| a * b).sum::<f64>() / (nx * ny)
        };
        let mut sims: Vec<f64> = negatives.iter().map(|n| cos(&anchor, n)).collect();
        sims.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let slack = margin + sims[0] - cos(&anchor, &positive);
        if slack > 1e-2 && (sims[0] - sims[1]) > 1e-3 {
            return (anchor, positive, negatives);
        }
    }
    panic!("could not build a non-degenerate triplet input");
}

#[test]
fn triplet_matches_finite_differences() {
    let margin = 0.2;
    for trial in 0..5u64 {
        let (anchor, positive, negatives) = triplet_safe_inputs(trial);
        let out = triplet_hnm_loss(&anchor, &positive, &negatives, margin).unwrap();
        assert!(out.value > 0.0);
        let mut templates: Vec<&GaussianEmbedding> = vec![&anchor, &positive];
        templates.extend(negatives.iter());
        let analytic = flatten_embedding_grads(&templates, &out.grads);
        let theta = flatten_embedding_params(&templates);
        let numeric = central_difference(
            |t| {
                let rebuilt = rebuild_embeddings(&templates, t).unwrap();
                triplet_hnm_loss(&rebuilt[0], &rebuilt[1], &rebuilt[2..], margin)
                    .unwrap()
                    .value
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < TOL, "trial {trial}: max rel error {err}");
    }
}

#[test]
fn triplet_inactive_hinge_has_zero_gradient() {
    let anchor = GaussianEmbedding::point("a", Modality::A, vec![1.0, 0.0]).unwrap();
    let positive = GaussianEmbedding::point("p", Modality::B, vec![0.99, 0.1]).unwrap();
    let negative = GaussianEmbedding::point("n", Modality::B, vec![-1.0, 0.0]).unwrap();
    let out = triplet_hnm_loss(&anchor, &positive, &[negative.clone()], 0.1).unwrap();
    assert_eq!(out.value, 0.0);
    let templates = vec![&anchor, &positive, &negative];
    let analytic = flatten_embedding_grads(&templates, &out.grads);
    let theta = flatten_embedding_params(&templates);
    let numeric = central_difference(
        |t| {
            let rebuilt = rebuild_embeddings(&templates, t).unwrap();
            triplet_hnm_loss(&rebuilt[0], &rebuilt[1], &rebuilt[2..], 0.1)
                .unwrap()
                .value
        },
        &theta,
        DEFAULT_STEP,
    );
    assert!(analytic.iter().all(|&g| g == 0.0));
    assert!(numeric.iter().all(|&g| g.abs() < 1e-12));
}

#[test]
fn kl_regularizer_matches_finite_differences_tightly() {
    // the analytic form is exact; demand 1e-6 relative agreement
    for trial in 0..5u64 {
        let mut r = rng(400 + trial);
        let emb = random_embedding(&mut r, "e", Modality::A, 7);
        let out = kl_regularizer(&emb);
        let templates = vec![&emb];
        let analytic = flatten_embedding_grads(&templates, &out.grads);
        let theta = flatten_embedding_params(&templates);
        let numeric = central_difference(
            |t| {
                let rebuilt = rebuild_embeddings(&templates, t).unwrap();
                kl_regularizer(&rebuilt[0]).value
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < 1e-6, "trial {trial}: max rel error {err}");
    }
}

/// The raw kernel sum underlying the uniformity loss, reimplemented here so
/// the finite-difference probe can evaluate it slightly off the sphere.
fn raw_uniformity(vectors: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for x in vectors {
        for y in vectors {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            total += (-2.0 * d2).exp();
        }
    }
    total
}

#[test]
fn uniformity_matches_finite_differences() {
    for trial in 0..5u64 {
        let mut r = rng(500 + trial);
        let dim = 4;
        let vectors: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng_normal(&mut r)).collect();
                let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let out = uniformity_loss(&vectors).unwrap();
        assert!((out.value - raw_uniformity(&vectors)).abs() < 1e-12);
        let theta: Vec<f64> = vectors.iter().flatten().copied().collect();
        let analytic: Vec<f64> = out.grads.iter().flatten().copied().collect();
        let numeric = central_difference(
            |t| {
                let rebuilt: Vec<Vec<f64>> =
                    t.chunks(dim).map(|chunk| chunk.to_vec()).collect();
                raw_uniformity(&rebuilt)
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < TOL, "trial {trial}: max rel error {err}");
    }
}

fn rng_normal(r: &mut ChaCha12Rng) -> f64 {
    r.sample(StandardNormal)
}

#[test]
fn total_loss_matches_finite_differences() {
    for trial in 0..5u64 {
        let mut r = rng(600 + trial);
        let batch = random_batch(&mut r, 3, 6, 3, 90 + trial);
        let params = random_params(&mut r);
        let lambda_kl = r.random_range(0.1..1.0);
        let lambda_unif = r.random_range(0.05..0.5);
        let out = total_loss(&batch, &params, lambda_kl, lambda_unif).unwrap();
        let analytic = flatten_batch_grads(&batch, &out.grads);
        let theta = flatten_batch_params(&batch, &params);
        let numeric = central_difference(
            |t| {
                let (b, p) = rebuild_batch(&batch, t).unwrap();
                total_loss(&b, &p, lambda_kl, lambda_unif).unwrap().value
            },
            &theta,
            DEFAULT_STEP,
        );
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < TOL, "trial {trial}: max rel error {err}");
    }
}

/// End-to-end check through the encoder: perturb head weights, re-encode,
/// recompute the composed loss. The analytic gradient is recovered from a
/// single momentum-free SGD step.
#[test]
fn encode_through_total_loss_matches_finite_differences() {
    let dataset = generate(&DatasetConfig {
        num_classes: 2,
        items_per_class_per_modality: 4,
        feature_dim: 6,
        attribute_dim: 2,
        noise_sigma: 0.3,
        ambiguity_fraction: 0.0,
        seed: 21,
    })
    .unwrap();
    let config = TrainConfig {
        batch_size: 8,
        samples: 3,
        epochs: 1,
        learning_rate: 1e-3,
        momentum: 0.0,
        lambda_kl: 0.7,
        lambda_unif: 0.3,
        seed: 13,
        mode: TrainMode::Probabilistic,
        loss_kind: LossKind::SoftContrastive,
        margin: 0.2,
        embed_dim: 5,
        match_init: MatchInit::Small,
    };
    // min modality size 8 with B = 8: exactly one step per epoch
    let zero_epochs = TrainConfig {
        epochs: 0,
        ..config.clone()
    };
    let (model0, _) = train(&dataset, &zero_epochs).unwrap();
    let (model1, _) = train(&dataset, &config).unwrap();

    let objective = |model: &Model| -> f64 {
        let batch = make_minibatch(
            &dataset,
            model,
            config.batch_size,
            config.samples,
            config.seed,
            0,
        )
        .unwrap();
        total_loss(
            &batch,
            model.match_params(),
            config.lambda_kl,
            config.lambda_unif,
        )
        .unwrap()
        .value
    };

    let h = DEFAULT_STEP;
    let lr = config.learning_rate;
    let mut checked = 0usize;
    let mut max_err: f64 = 0.0;
    // probe a spread of weight coordinates in every head
    for m in 0..2 {
        for head in ["mean", "var"] {
            let n_weights = model0.mean_heads[m].weight.len();
            for idx in (0..n_weights).step_by(7) {
                let (w0, w1) = match head {
                    "mean" => (
                        model0.mean_heads[m].weight[idx],
                        model1.mean_heads[m].weight[idx],
                    ),
                    _ => (
                        model0.var_heads[m].weight[idx],
                        model1.var_heads[m].weight[idx],
                    ),
                };
                let analytic = (w0 - w1) / lr;
                let mut perturbed = model0.clone();
                {
                    let slot = match head {
                        "mean" => &mut perturbed.mean_heads[m].weight[idx],
                        _ => &mut perturbed.var_heads[m].weight[idx],
                    };
                    *slot = w0 + h;
                }
                let plus = objective(&perturbed);
                {
                    let slot = match head {
                        "mean" => &mut perturbed.mean_heads[m].weight[idx],
                        _ => &mut perturbed.var_heads[m].weight[idx],
                    };
                    *slot = w0 - h;
                }
                let minus = objective(&perturbed);
                let numeric = (plus - minus) / (2.0 * h);
                max_err = max_err.max(probemb::gradcheck::rel_error(analytic, numeric));
                checked += 1;
            }
        }
    }
    // match scalars through the same single-step recovery
    let ga = (model0.match_params().a() - model1.match_params().a()) / lr;
    let gb = (model0.match_params().b() - model1.match_params().b()) / lr;
    for (grad, which) in [(ga, "a"), (gb, "b")] {
        let mut perturbed = model0.clone();
        let (a0, b0) = (model0.match_params().a(), model0.match_params().b());
        let set = |p: &mut Model, a: f64, b: f64| {
            p.set_match_params(MatchParams::new(a, b).unwrap());
        };
        if which == "a" {
            set(&mut perturbed, a0 + h, b0);
        } else {
            set(&mut perturbed, a0, b0 + h);
        }
        let plus = objective(&perturbed);
        if which == "a" {
            set(&mut perturbed, a0 - h, b0);
        } else {
            set(&mut perturbed, a0, b0 - h);
        }
        let minus = objective(&perturbed);
        let numeric = (plus - minus) / (2.0 * h);
        max_err = max_err.max(probemb::gradcheck::rel_error(grad, numeric));
        checked += 1;
    }
    assert!(checked > 20);
    assert!(max_err < TOL, "end-to-end max rel error {max_err}");
}
