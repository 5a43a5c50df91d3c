//! Desk-scale trainer: linear per-modality encoder heads producing Gaussian
//! embeddings, batch construction over the ground-truth match relation, and
//! SGD with momentum under a cosine learning-rate schedule.
//!
//! The mean head is L2-projected; the variance head is an unconstrained
//! linear map whose output is clamped into the log-variance bounds. In
//! `MuOnly` mode the variance heads are frozen and every embedding carries
//! the minimum log-variance, which collapses the match probability to the
//! deterministic logit.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;

use crate::datagen::CrossModalDataset;
use crate::embedding::{GaussianEmbedding, MatchParams, Modality, LOG_VAR_BOUND};
use crate::error::{Error, Result};
use crate::losses::{
    composed_loss, triplet_hnm_loss, BaseLoss, GradientMap, LabeledPair, PairBatch,
};
use crate::streams::{keyed_rng, stream_seed};
use crate::vecmath::{dot, norm};

/// Whether the variance heads are trained or frozen at the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Probabilistic,
    MuOnly,
}

/// Which training objective drives the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SoftContrastive,
    Mil,
    TripletHnm,
}

/// Initial value preset for the match parameters `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchInit {
    /// a = 5, b = 5
    Small,
    /// a = 15, b = 15
    Large,
}

impl MatchInit {
    pub fn params(self) -> MatchParams {
        let (a, b) = match self {
            MatchInit::Small => (5.0, 5.0),
            MatchInit::Large => (15.0, 15.0),
        };
        MatchParams::new(a, b).expect("preset params are valid")
    }
}

/// A dense affine map, stored row-major (`out_dim x in_dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearHead {
    fn seeded(in_dim: usize, out_dim: usize, rng: &mut impl Rng, bias_value: Option<f64>) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let bias = match bias_value {
            Some(v) => vec![v; out_dim],
            None => (0..out_dim).map(|_| rng.random_range(-scale..scale)).collect(),
        };
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(&self.weight[r * self.in_dim..(r + 1) * self.in_dim], x);
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().all(|v| v.is_finite()) && self.bias.iter().all(|v| v.is_finite())
    }
}

/// Per-modality encoder heads plus the learnable match parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub mode: TrainMode,
    pub loss_kind: LossKind,
    pub mean_heads: [LinearHead; 2],
    pub var_heads: [LinearHead; 2],
    match_params: MatchParams,
}

/// Variance-head bias initialization; gives sigma ~= 0.13 so early
/// Monte-Carlo estimates are stable but not collapsed.
const VAR_BIAS_INIT: f64 = -4.0;

impl Model {
    pub fn init(
        feature_dim: usize,
        embed_dim: usize,
        mode: TrainMode,
        loss_kind: LossKind,
        match_init: MatchInit,
        seed: u64,
    ) -> Result<Self> {
        if feature_dim == 0 || embed_dim == 0 {
            return Err(Error::InvalidArgument(
                "feature_dim and embed_dim must be positive".into(),
            ));
        }
        let head = |tag: &str, modality: Modality, bias: Option<f64>| {
            let mut rng = keyed_rng(
                seed,
                &[b"init", tag.as_bytes(), modality.as_str().as_bytes()],
            );
            LinearHead::seeded(feature_dim, embed_dim, &mut rng, bias)
        };
        Ok(Self {
            feature_dim,
            embed_dim,
            mode,
            loss_kind,
            mean_heads: [head("mean", Modality::A, None), head("mean", Modality::B, None)],
            var_heads: [
                head("var", Modality::A, Some(VAR_BIAS_INIT)),
                head("var", Modality::B, Some(VAR_BIAS_INIT)),
            ],
            match_params: match_init.params(),
        })
    }

    pub fn match_params(&self) -> &MatchParams {
        &self.match_params
    }

    pub fn set_match_params(&mut self, params: MatchParams) {
        self.match_params = params;
    }

    /// Validate a model loaded from a checkpoint.
    pub fn validate(&self) -> Result<()> {
        for head in self.mean_heads.iter().chain(self.var_heads.iter()) {
            if head.in_dim != self.feature_dim
                || head.out_dim != self.embed_dim
                || head.weight.len() != head.in_dim * head.out_dim
                || head.bias.len() != head.out_dim
            {
                return Err(Error::DimensionMismatch(
                    "model head shapes do not match the declared dimensions".into(),
                ));
            }
            if !head.is_finite() {
                return Err(Error::Numeric("model has non-finite parameters".into()));
            }
        }
        MatchParams::new(self.match_params.a(), self.match_params.b())?;
        Ok(())
    }

    /// Encode item features into a Gaussian embedding:
    /// `mu = normalize(W_mu x + b_mu)`, `log_var = clamp(W_sigma x + b_sigma)`
    /// (pinned at the floor in `MuOnly` mode).
    pub fn encode(&self, id: &str, features: &[f64], modality: Modality) -> Result<GaussianEmbedding> {
        let (emb, _) = self.encode_cached(id, features, modality)?;
        Ok(emb)
    }

    fn encode_cached(
        &self,
        id: &str,
        features: &[f64],
        modality: Modality,
    ) -> Result<(GaussianEmbedding, EncodeCache)> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "item {id:?} has {} features but the model expects {}",
                features.len(),
                self.feature_dim
            )));
        }
        let pre = self.mean_heads[modality as usize].forward(features);
        let pre_norm = norm(&pre);
        if !pre_norm.is_finite() || pre_norm < 1e-12 {
            return Err(Error::Numeric(format!(
                "degenerate encoding for {id:?}: pre-normalization mean norm is {pre_norm}"
            )));
        }
        let mu: Vec<f64> = pre.iter().map(|x| x / pre_norm).collect();
        let raw_log_var = match self.mode {
            TrainMode::MuOnly => vec![-LOG_VAR_BOUND; self.embed_dim],
            TrainMode::Probabilistic => self.var_heads[modality as usize].forward(features),
        };
        let emb = GaussianEmbedding::new(id, modality, mu.clone(), raw_log_var.clone())?;
        Ok((
            emb,
            EncodeCache {
                modality,
                mu,
                raw_log_var,
                pre_norm,
            },
        ))
    }
}

struct EncodeCache {
    modality: Modality,
    mu: Vec<f64>,
    raw_log_var: Vec<f64>,
    pre_norm: f64,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Monte-Carlo samples per embedding (J).
    pub samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lambda_kl: f64,
    pub lambda_unif: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub loss_kind: LossKind,
    /// Triplet margin (TripletHnm only).
    pub margin: f64,
    pub embed_dim: usize,
    pub match_init: MatchInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            samples: 7,
            epochs: 200,
            learning_rate: 0.08,
            momentum: 0.9,
            lambda_kl: 1e-3,
            lambda_unif: 0.0,
            seed: 0,
            mode: TrainMode::Probabilistic,
            loss_kind: LossKind::SoftContrastive,
            margin: 0.2,
            embed_dim: 16,
            match_init: MatchInit::Small,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument(
                "batch_size must be at least 2".into(),
            ));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "margin must be nonnegative, got {}",
                self.margin
            )));
        }
        for (name, lambda) in [("lambda_kl", self.lambda_kl), ("lambda_unif", self.lambda_unif)] {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be nonnegative, got {lambda}"
                )));
            }
        }
        if self.embed_dim == 0 {
            return Err(Error::InvalidArgument("embed_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch telemetry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub contrastive: f64,
    pub kl: f64,
    pub uniformity: f64,
    /// E[log sigma] over items and dimensions, per modality.
    pub mean_log_sigma_a: f64,
    pub mean_log_sigma_b: f64,
    pub learning_rate: f64,
    pub clamp_events: usize,
}

/// One record per trained epoch.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Cosine learning-rate schedule: `lr0 * 0.5 * (1 + cos(pi * t / total))`,
/// so `lr(0) = lr0` and `lr(total) = 0`.
pub fn cosine_lr(lr0: f64, step: u64, total_steps: u64) -> f64 {
    if total_steps == 0 {
        return lr0;
    }
    let progress = step as f64 / total_steps as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Indices into `dataset.items()` of the sampled ground-truth pairs.
fn select_pairs(
    dataset: &CrossModalDataset,
    batch_size: usize,
    seed: u64,
    step: u64,
) -> Result<Vec<(usize, usize)>> {
    let mut by_class: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (idx, item) in dataset.items().iter().enumerate() {
        let entry = by_class.entry(item.class_id).or_default();
        match item.modality {
            Modality::A => entry.0.push(idx),
            Modality::B => entry.1.push(idx),
        }
    }
    let mut all_pairs = Vec::new();
    for (a_side, b_side) in by_class.values() {
        for &a in a_side {
            for &b in b_side {
                all_pairs.push((a, b));
            }
        }
    }
    if all_pairs.len() < batch_size {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} ground-truth pairs but the batch needs {batch_size}",
            all_pairs.len()
        )));
    }
    let mut rng = keyed_rng(seed, &[b"batch", &step.to_le_bytes()]);
    let chosen = index::sample(&mut rng, all_pairs.len(), batch_size);
    Ok(chosen.iter().map(|i| all_pairs[i]).collect())
}

/// Build the training batch for `(seed, step)`: `batch_size` ground-truth
/// pairs sampled without replacement, expanded to all ordered cross pairs
/// with labels from the match relation (same-class pairs are positives even
/// off the diagonal).
pub fn make_minibatch(
    dataset: &CrossModalDataset,
    model: &Model,
    batch_size: usize,
    samples: usize,
    seed: u64,
    step: u64,
) -> Result<PairBatch> {
    let selection = select_pairs(dataset, batch_size, seed, step)?;
    let mut encoded: BTreeMap<usize, GaussianEmbedding> = BTreeMap::new();
    for &(a, b) in &selection {
        for idx in [a, b] {
            if !encoded.contains_key(&idx) {
                let item = &dataset.items()[idx];
                encoded.insert(idx, model.encode(&item.id, &item.features, item.modality)?);
            }
        }
    }
    let mut pairs = Vec::with_capacity(batch_size * batch_size);
    for &(a_idx, _) in &selection {
        for &(_, b_idx) in &selection {
            let a_item = &dataset.items()[a_idx];
            let b_item = &dataset.items()[b_idx];
            pairs.push(LabeledPair {
                a: encoded[&a_idx].clone(),
                b: encoded[&b_idx].clone(),
                positive: dataset.is_match(a_item, b_item),
            });
        }
    }
    PairBatch::new(pairs, samples, stream_seed(seed, &[b"step-samples", &step.to_le_bytes()]))
}

/// Flat parameter gradients mirroring the model layout.
#[derive(Debug, Clone)]
struct ModelGrads {
    mean_w: [Vec<f64>; 2],
    mean_b: [Vec<f64>; 2],
    var_w: [Vec<f64>; 2],
    var_b: [Vec<f64>; 2],
    match_a: f64,
    match_b: f64,
}

impl ModelGrads {
    fn zeros(model: &Model) -> Self {
        let w = vec![0.0; model.feature_dim * model.embed_dim];
        let b = vec![0.0; model.embed_dim];
        Self {
            mean_w: [w.clone(), w.clone()],
            mean_b: [b.clone(), b.clone()],
            var_w: [w.clone(), w],
            var_b: [b.clone(), b],
            match_a: 0.0,
            match_b: 0.0,
        }
    }
}

struct MomentumState {
    grads: ModelGrads,
}

impl MomentumState {
    fn zeros(model: &Model) -> Self {
        Self {
            grads: ModelGrads::zeros(model),
        }
    }
}

/// Backpropagate embedding-level gradients through the encoder heads.
fn accumulate_head_grads(
    model: &Model,
    dataset: &CrossModalDataset,
    caches: &BTreeMap<String, (usize, EncodeCache)>,
    grads: &GradientMap,
    out: &mut ModelGrads,
) {
    let d = model.embed_dim;
    let f = model.feature_dim;
    for (id, egrad) in &grads.embeddings {
        let (item_idx, cache) = &caches[id];
        let x = &dataset.items()[*item_idx].features;
        let m = cache.modality as usize;
        // through the L2 projection: du = (I - mu mu^T) dmu / ||pre||
        let dmu_dot_mu = dot(&egrad.mu, &cache.mu);
        for r in 0..d {
            let du = (egrad.mu[r] - dmu_dot_mu * cache.mu[r]) / cache.pre_norm;
            if du != 0.0 {
                let row = &mut out.mean_w[m][r * f..(r + 1) * f];
                for (c, &xc) in x.iter().enumerate() {
                    row[c] += du * xc;
                }
                out.mean_b[m][r] += du;
            }
        }
        if model.mode == TrainMode::Probabilistic {
            for r in 0..d {
                // clamped coordinates pass no gradient
                if cache.raw_log_var[r].abs() >= LOG_VAR_BOUND {
                    continue;
                }
                let dv = egrad.log_var[r];
                if dv != 0.0 {
                    let row = &mut out.var_w[m][r * f..(r + 1) * f];
                    for (c, &xc) in x.iter().enumerate() {
                        row[c] += dv * xc;
                    }
                    out.var_b[m][r] += dv;
                }
            }
        }
    }
    out.match_a += grads.match_a;
    out.match_b += grads.match_b;
}

fn sgd_update(model: &mut Model, grads: &ModelGrads, vel: &mut MomentumState, lr: f64, momentum: f64) {
    let update_vec = |param: &mut [f64], grad: &[f64], velocity: &mut [f64]| {
        for i in 0..param.len() {
            velocity[i] = momentum * velocity[i] - lr * grad[i];
            param[i] += velocity[i];
        }
    };
    for m in 0..2 {
        update_vec(
            &mut model.mean_heads[m].weight,
            &grads.mean_w[m],
            &mut vel.grads.mean_w[m],
        );
        update_vec(
            &mut model.mean_heads[m].bias,
            &grads.mean_b[m],
            &mut vel.grads.mean_b[m],
        );
        if model.mode == TrainMode::Probabilistic {
            update_vec(
                &mut model.var_heads[m].weight,
                &grads.var_w[m],
                &mut vel.grads.var_w[m],
            );
            update_vec(
                &mut model.var_heads[m].bias,
                &grads.var_b[m],
                &mut vel.grads.var_b[m],
            );
        }
    }
    vel.grads.match_a = momentum * vel.grads.match_a - lr * grads.match_a;
    vel.grads.match_b = momentum * vel.grads.match_b - lr * grads.match_b;
    let new_a = (model.match_params.a() + vel.grads.match_a).max(1e-6);
    let new_b = model.match_params.b() + vel.grads.match_b;
    model.match_params = MatchParams::new(new_a, new_b).expect("updated params stay valid");
}

struct StepOutcome {
    total: f64,
    contrastive: f64,
    kl: f64,
    uniformity: f64,
    clamp_events: usize,
}

fn train_step(
    model: &Model,
    dataset: &CrossModalDataset,
    config: &TrainConfig,
    step: u64,
    out: &mut ModelGrads,
) -> Result<StepOutcome> {
    let selection = select_pairs(dataset, config.batch_size, config.seed, step)?;
    let mut caches: BTreeMap<String, (usize, EncodeCache)> = BTreeMap::new();
    let mut encoded: BTreeMap<usize, GaussianEmbedding> = BTreeMap::new();
    for &(a, b) in &selection {
        for idx in [a, b] {
            if let std::collections::btree_map::Entry::Vacant(slot) = encoded.entry(idx) {
                let item = &dataset.items()[idx];
                let (emb, cache) = model.encode_cached(&item.id, &item.features, item.modality)?;
                caches.insert(item.id.clone(), (idx, cache));
                slot.insert(emb);
            }
        }
    }

    let (value, parts, grads) = match config.loss_kind {
        LossKind::SoftContrastive | LossKind::Mil => {
            let mut pairs = Vec::with_capacity(config.batch_size * config.batch_size);
            for &(a_idx, _) in &selection {
                for &(_, b_idx) in &selection {
                    pairs.push(LabeledPair {
                        a: encoded[&a_idx].clone(),
                        b: encoded[&b_idx].clone(),
                        positive: dataset
                            .is_match(&dataset.items()[a_idx], &dataset.items()[b_idx]),
                    });
                }
            }
            let batch = PairBatch::new(
                pairs,
                config.samples,
                stream_seed(config.seed, &[b"step-samples", &step.to_le_bytes()]),
            )?;
            let base = if config.loss_kind == LossKind::Mil {
                BaseLoss::Mil
            } else {
                BaseLoss::Soft
            };
            let total = composed_loss(
                &batch,
                &model.match_params,
                config.lambda_kl,
                config.lambda_unif,
                base,
            )?;
            (
                total.value,
                (total.contrastive, total.kl, total.uniformity, total.clamp_events),
                total.grads,
            )
        }
        LossKind::TripletHnm => {
            // both retrieval directions, hinge per anchor against every
            // other item of the batch. This is the annotation-level baseline
            // (same-class items count as negatives unless they are the
            // anchor's own sampled partner), reproducing the hardest-negative
            // recipe the soft loss is contrasted against.
            let mut grads = GradientMap::default();
            let mut value = 0.0;
            let mut terms = 0usize;
            let mut contributions = Vec::new();
            for dir in 0..2usize {
                for &sel in &selection {
                    let (anchor_idx, positive_idx) = if dir == 0 {
                        (sel.0, sel.1)
                    } else {
                        (sel.1, sel.0)
                    };
                    let negatives: Vec<GaussianEmbedding> = selection
                        .iter()
                        .map(|other| if dir == 0 { other.1 } else { other.0 })
                        .filter(|&idx| idx != positive_idx)
                        .map(|idx| encoded[&idx].clone())
                        .collect();
                    if negatives.is_empty() {
                        continue;
                    }
                    let term = triplet_hnm_loss(
                        &encoded[&anchor_idx],
                        &encoded[&positive_idx],
                        &negatives,
                        config.margin,
                    )?;
                    value += term.value;
                    terms += 1;
                    contributions.push(term.grads);
                }
            }
            if terms > 0 {
                let w = 1.0 / terms as f64;
                value *= w;
                for g in &contributions {
                    grads.add_scaled(g, w);
                }
            }
            (value, (value, 0.0, 0.0, 0), grads)
        }
    };

    if !value.is_finite() {
        return Err(Error::TrainAbort {
            step,
            component: "loss value".into(),
        });
    }
    accumulate_head_grads(model, dataset, &caches, &grads, out);
    Ok(StepOutcome {
        total: value,
        contrastive: parts.0,
        kl: parts.1,
        uniformity: parts.2,
        clamp_events: parts.3,
    })
}

fn mean_log_sigma(embeddings: &[GaussianEmbedding], modality: Modality) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for emb in embeddings.iter().filter(|e| e.modality() == modality) {
        total += emb.log_var().iter().map(|lv| 0.5 * lv).sum::<f64>() / emb.dim() as f64;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    }
}

/// Train a fresh model on the dataset. Returns the model and the per-epoch
/// history; bitwise deterministic given the config.
pub fn train(dataset: &CrossModalDataset, config: &TrainConfig) -> Result<(Model, TrainHistory)> {
    config.validate()?;
    let n_a = dataset.modality_items(Modality::A).len();
    let n_b = dataset.modality_items(Modality::B).len();
    if n_a == 0 || n_b == 0 {
        return Err(Error::InvalidArgument(
            "dataset needs items in both modalities".into(),
        ));
    }
    let mut model = Model::init(
        dataset.feature_dim(),
        config.embed_dim,
        config.mode,
        config.loss_kind,
        config.match_init,
        config.seed,
    )?;
    // fail early if the dataset cannot fill a batch
    select_pairs(dataset, config.batch_size, config.seed, 0)?;

    let steps_per_epoch = n_a.min(n_b).div_ceil(config.batch_size) as u64;
    let total_steps = config.epochs as u64 * steps_per_epoch;
    let mut velocity = MomentumState::zeros(&model);
    let mut history = TrainHistory::default();
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut clamp_events = 0usize;
        let mut last_lr = 0.0;
        for _ in 0..steps_per_epoch {
            let mut grads = ModelGrads::zeros(&model);
            let outcome = train_step(&model, dataset, config, step, &mut grads)?;
            let lr = cosine_lr(config.learning_rate, step, total_steps);
            sgd_update(&mut model, &grads, &mut velocity, lr, config.momentum);
            sums.0 += outcome.total;
            sums.1 += outcome.contrastive;
            sums.2 += outcome.kl;
            sums.3 += outcome.uniformity;
            clamp_events += outcome.clamp_events;
            last_lr = lr;
            step += 1;
        }
        let spe = steps_per_epoch as f64;
        let embeddings = embed_dataset(&model, dataset)?;
        history.records.push(EpochRecord {
            epoch,
            total_loss: sums.0 / spe,
            contrastive: sums.1 / spe,
            kl: sums.2 / spe,
            uniformity: sums.3 / spe,
            mean_log_sigma_a: mean_log_sigma(&embeddings, Modality::A),
            mean_log_sigma_b: mean_log_sigma(&embeddings, Modality::B),
            learning_rate: last_lr,
            clamp_events,
        });
    }
    Ok((model, history))
}

/// Encode every dataset item, preserving dataset order.
pub fn embed_dataset(model: &Model, dataset: &CrossModalDataset) -> Result<Vec<GaussianEmbedding>> {
    dataset
        .items()
        .iter()
        .map(|item| model.encode(&item.id, &item.features, item.modality))
        .collect()
}
