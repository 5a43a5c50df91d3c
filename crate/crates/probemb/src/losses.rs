//! Soft contrastive loss with exact pathwise gradients, plus the baseline
//! losses (best-pair selection, hardest-negative triplet) and regularizers.
//!
//! Gradients are defined on the fixed-sample objective: reparametrized
//! samples are deterministic functions of `(mu, log_var)` with the underlying
//! noise frozen by the batch seed, so central finite differences reproduce
//! every gradient exactly. For a positive pair the per-logit gradient is
//!
//! ```text
//! dL/dl_jj' = -[ s(l_jj') / sum s(l) ] * (1 - s(l_jj'))
//! ```
//!
//! and for a negative pair
//!
//! ```text
//! dL/dl_jj' = +[ (1 - s(l_jj')) / sum (1 - s(l)) ] * s(l_jj')
//! ```
//!
//! so sample pairs that already predict the right distance relation receive
//! the larger share of the supervision.

use std::collections::BTreeMap;

use crate::embedding::{sample_embeddings, GaussianEmbedding, MatchParams, SampleSet};
use crate::error::{Error, Result};
use crate::vecmath::{l2_distance, norm, sigmoid};

/// Probabilities are clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]` before the
/// log; clamp events are counted rather than silently absorbed.
pub const PROB_FLOOR: f64 = 1e-12;

/// One labeled cross-modal pair inside a batch.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub a: GaussianEmbedding,
    pub b: GaussianEmbedding,
    pub positive: bool,
}

/// A batch of labeled pairs sharing a sample count and sampling seed.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pairs: Vec<LabeledPair>,
    samples_per_embedding: usize,
    seed: u64,
}

impl PairBatch {
    pub fn new(pairs: Vec<LabeledPair>, samples_per_embedding: usize, seed: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("batch has no pairs".into()));
        }
        if samples_per_embedding == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be at least 1".into(),
            ));
        }
        let dim = pairs[0].a.dim();
        let mut seen: BTreeMap<&str, &GaussianEmbedding> = BTreeMap::new();
        for pair in &pairs {
            for emb in [&pair.a, &pair.b] {
                if emb.dim() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "embedding {:?} has D={} but the batch uses D={dim}",
                        emb.id(),
                        emb.dim()
                    )));
                }
                match seen.get(emb.id()) {
                    Some(prev) if *prev != emb => {
                        return Err(Error::InvalidArgument(format!(
                            "id {:?} appears with two different embeddings",
                            emb.id()
                        )));
                    }
                    _ => {
                        seen.insert(emb.id(), emb);
                    }
                }
            }
        }
        Ok(Self {
            pairs,
            samples_per_embedding,
            seed,
        })
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    /// Sample count J used for every embedding in the batch.
    pub fn samples_per_embedding(&self) -> usize {
        self.samples_per_embedding
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Distinct embeddings in the batch, ordered by id.
    pub fn distinct_embeddings(&self) -> Vec<&GaussianEmbedding> {
        let mut map: BTreeMap<&str, &GaussianEmbedding> = BTreeMap::new();
        for pair in &self.pairs {
            map.entry(pair.a.id()).or_insert(&pair.a);
            map.entry(pair.b.id()).or_insert(&pair.b);
        }
        map.into_values().collect()
    }
}

/// Gradient of a mean/log-variance pair for one embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrad {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl EmbeddingGrad {
    fn zeros(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }
}

/// Gradients keyed by embedding id, plus the match-parameter gradients.
/// Embeddings appearing in several pairs accumulate into one entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientMap {
    pub embeddings: BTreeMap<String, EmbeddingGrad>,
    pub match_a: f64,
    pub match_b: f64,
}

impl GradientMap {
    pub fn entry(&mut self, id: &str, dim: usize) -> &mut EmbeddingGrad {
        self.embeddings
            .entry(id.to_string())
            .or_insert_with(|| EmbeddingGrad::zeros(dim))
    }

    /// Accumulate `weight * other` into `self`.
    pub fn add_scaled(&mut self, other: &GradientMap, weight: f64) {
        for (id, grad) in &other.embeddings {
            let entry = self.entry(id, grad.mu.len());
            for d in 0..grad.mu.len() {
                entry.mu[d] += weight * grad.mu[d];
                entry.log_var[d] += weight * grad.log_var[d];
            }
        }
        self.match_a += weight * other.match_a;
        self.match_b += weight * other.match_b;
    }

    pub fn is_finite(&self) -> bool {
        self.match_a.is_finite()
            && self.match_b.is_finite()
            && self.embeddings.values().all(|g| {
                g.mu.iter().all(|x| x.is_finite()) && g.log_var.iter().all(|x| x.is_finite())
            })
    }
}

/// A loss value with the gradients of everything that produced it.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grads: GradientMap,
    /// Number of pairs whose probability hit the clamp bounds.
    pub clamp_events: usize,
}

/// The `J x J` table of distance logits `l_jj' = -a * ||z_a^j - z_b^j'|| + b`
/// for one pair, stored row-major (row = sample of `a`).
#[derive(Debug, Clone)]
pub struct LogitTable {
    j: usize,
    values: Vec<f64>,
}

impl LogitTable {
    /// Wrap raw logit values; `values.len()` must equal `j * j`.
    pub fn from_values(j: usize, values: Vec<f64>) -> Result<Self> {
        if j == 0 || values.len() != j * j {
            return Err(Error::DimensionMismatch(format!(
                "logit table expects {} entries for J={j}, got {}",
                j * j,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("logit table has non-finite entries".into()));
        }
        Ok(Self { j, values })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.j + col]
    }
}

/// Compute the logit table for two sample sets of equal size and dimension.
pub fn pairwise_logits(
    samples_a: &SampleSet,
    samples_b: &SampleSet,
    params: &MatchParams,
) -> Result<LogitTable> {
    if samples_a.len() != samples_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "sample counts differ: {} vs {}",
            samples_a.len(),
            samples_b.len()
        )));
    }
    if samples_a.dim() != samples_b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sample dims differ: {} vs {}",
            samples_a.dim(),
            samples_b.dim()
        )));
    }
    let j = samples_a.len();
    let mut values = Vec::with_capacity(j * j);
    for za in samples_a.samples() {
        for zb in samples_b.samples() {
            values.push(-params.a() * l2_distance(za, zb) + params.b());
        }
    }
    LogitTable::from_values(j, values)
}

/// Loss and per-logit gradients for a single pair, before batch averaging.
#[derive(Debug, Clone)]
pub struct PairLoss {
    pub value: f64,
    /// dL/dl for every table entry, row-major.
    pub logit_grads: Vec<f64>,
    /// The (possibly clamped) match probability used in the log.
    pub probability: f64,
    pub clamped: bool,
}

/// Soft contrastive loss of one pair from its logit table: `-log p` for a
/// positive pair and `-log (1 - p)` for a negative one, with
/// `p = mean sigmoid(l)`.
pub fn soft_pair_loss(table: &LogitTable, positive: bool) -> PairLoss {
    let j2 = table.values().len() as f64;
    let sigmoids: Vec<f64> = table.values().iter().map(|&l| sigmoid(l)).collect();
    let p = sigmoids.iter().sum::<f64>() / j2;
    let clamped_p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let clamped = clamped_p != p;
    let (value, dloss_dp) = if positive {
        (-clamped_p.ln(), if clamped { 0.0 } else { -1.0 / p })
    } else {
        let q = 1.0 - clamped_p;
        (-q.ln(), if clamped { 0.0 } else { 1.0 / (1.0 - p) })
    };
    let logit_grads = sigmoids
        .iter()
        .map(|&s| dloss_dp * s * (1.0 - s) / j2)
        .collect();
    PairLoss {
        value,
        logit_grads,
        probability: clamped_p,
        clamped,
    }
}

/// Best-pair variant: only the highest logit (positives) or lowest logit
/// (negatives) is supervised. Ties resolve to the first entry in row-major
/// order. Gradients flow only through the selected entry, with the argmax
/// held fixed.
pub fn mil_pair_loss(table: &LogitTable, positive: bool) -> PairLoss {
    let values = table.values();
    let mut best = 0;
    for (i, &l) in values.iter().enumerate() {
        let better = if positive {
            l > values[best]
        } else {
            l < values[best]
        };
        if better {
            best = i;
        }
    }
    let s = sigmoid(values[best]);
    let clamped_p = s.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let clamped = clamped_p != s;
    let (value, dloss_dp) = if positive {
        (-clamped_p.ln(), if clamped { 0.0 } else { -1.0 / s })
    } else {
        let q = 1.0 - clamped_p;
        (-q.ln(), if clamped { 0.0 } else { 1.0 / (1.0 - s) })
    };
    let mut logit_grads = vec![0.0; values.len()];
    logit_grads[best] = dloss_dp * s * (1.0 - s);
    PairLoss {
        value,
        logit_grads,
        probability: clamped_p,
        clamped,
    }
}

struct BatchContext<'a> {
    samples: BTreeMap<&'a str, SampleSet>,
    embeddings: BTreeMap<&'a str, &'a GaussianEmbedding>,
}

impl<'a> BatchContext<'a> {
    fn new(batch: &'a PairBatch) -> Self {
        let mut samples = BTreeMap::new();
        let mut embeddings = BTreeMap::new();
        for pair in batch.pairs() {
            for emb in [&pair.a, &pair.b] {
                embeddings.entry(emb.id()).or_insert(emb);
                samples.entry(emb.id()).or_insert_with(|| {
                    sample_embeddings(emb, batch.samples_per_embedding(), batch.seed())
                });
            }
        }
        Self {
            samples,
            embeddings,
        }
    }
}

/// Chain per-logit gradients of one pair back to `(mu, log_var, a, b)`.
///
/// Uses `dz/dlog_var_d = 0.5 * (z_d - mu_d)`, which follows from
/// `z = mu + exp(log_var/2) * eps` with the noise held fixed.
fn backprop_pair(
    logit_grads: &[f64],
    weight: f64,
    sa: &SampleSet,
    sb: &SampleSet,
    emb_a: &GaussianEmbedding,
    emb_b: &GaussianEmbedding,
    params: &MatchParams,
    grads: &mut GradientMap,
) {
    let j = sa.len();
    let dim = sa.dim();
    let mut acc_a = EmbeddingGrad::zeros(dim);
    let mut acc_b = EmbeddingGrad::zeros(dim);
    let mut grad_match_a = 0.0;
    let mut grad_match_b = 0.0;
    for (row, za) in sa.samples().iter().enumerate() {
        for (col, zb) in sb.samples().iter().enumerate() {
            let g = logit_grads[row * j + col] * weight;
            if g == 0.0 {
                continue;
            }
            let dist = l2_distance(za, zb);
            grad_match_a += g * (-dist);
            grad_match_b += g;
            if dist <= 0.0 {
                // coincident samples: distance has no defined direction,
                // subgradient zero
                continue;
            }
            let coef = -params.a() / dist;
            for d in 0..dim {
                let dz = g * coef * (za[d] - zb[d]);
                acc_a.mu[d] += dz;
                acc_a.log_var[d] += dz * 0.5 * (za[d] - emb_a.mu()[d]);
                acc_b.mu[d] -= dz;
                acc_b.log_var[d] -= dz * 0.5 * (zb[d] - emb_b.mu()[d]);
            }
        }
    }
    let entry_a = grads.entry(emb_a.id(), dim);
    for d in 0..dim {
        entry_a.mu[d] += acc_a.mu[d];
        entry_a.log_var[d] += acc_a.log_var[d];
    }
    let entry_b = grads.entry(emb_b.id(), dim);
    for d in 0..dim {
        entry_b.mu[d] += acc_b.mu[d];
        entry_b.log_var[d] += acc_b.log_var[d];
    }
    grads.match_a += grad_match_a;
    grads.match_b += grad_match_b;
}

fn batch_loss(
    batch: &PairBatch,
    params: &MatchParams,
    pair_loss: fn(&LogitTable, bool) -> PairLoss,
) -> Result<LossOutput> {
    let ctx = BatchContext::new(batch);
    let n = batch.pairs().len() as f64;
    let weight = 1.0 / n;
    let mut value = 0.0;
    let mut clamp_events = 0;
    let mut grads = GradientMap::default();
    for pair in batch.pairs() {
        let sa = &ctx.samples[pair.a.id()];
        let sb = &ctx.samples[pair.b.id()];
        let table = pairwise_logits(sa, sb, params)?;
        let pl = pair_loss(&table, pair.positive);
        value += pl.value;
        clamp_events += usize::from(pl.clamped);
        backprop_pair(
            &pl.logit_grads,
            weight,
            sa,
            sb,
            ctx.embeddings[pair.a.id()],
            ctx.embeddings[pair.b.id()],
            params,
            &mut grads,
        );
    }
    // make sure every batch embedding has a grad entry, even if all its
    // logit gradients vanished
    for emb in batch.distinct_embeddings() {
        grads.entry(emb.id(), emb.dim());
    }
    let value = value / n;
    if !value.is_finite() || !grads.is_finite() {
        return Err(Error::Numeric("batch loss is non-finite".into()));
    }
    Ok(LossOutput {
        value,
        grads,
        clamp_events,
    })
}

/// Mean soft contrastive loss over all pairs in the batch, with exact
/// gradients on the fixed-sample objective.
pub fn soft_contrastive_loss(batch: &PairBatch, params: &MatchParams) -> Result<LossOutput> {
    batch_loss(batch, params, soft_pair_loss)
}

/// Mean best-pair loss over the batch (multiple-instance flavor of the soft
/// contrastive loss).
pub fn mil_loss(batch: &PairBatch, params: &MatchParams) -> Result<LossOutput> {
    batch_loss(batch, params, mil_pair_loss)
}

fn normalized(mu: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(mu);
    if n < 1e-12 {
        return Err(Error::Numeric(
            "cannot normalize a zero-norm mean vector".into(),
        ));
    }
    Ok((mu.iter().map(|x| x / n).collect(), n))
}

/// Gradient of `cos(x, y)` with respect to raw `x`, given the normalized
/// vectors and the raw norm of `x`.
fn cosine_grad_wrt_first(nx: &[f64], ny: &[f64], cos: f64, norm_x: f64) -> Vec<f64> {
    nx.iter()
        .zip(ny)
        .map(|(&ux, &uy)| (uy - cos * ux) / norm_x)
        .collect()
}

/// Hardest-negative triplet loss on mean vectors:
/// `max(0, margin + max_n cos(anchor, n) - cos(anchor, positive))`.
///
/// Deterministic (mu-only) evaluation; cosine similarity is taken on
/// L2-normalized means, and gradients are reported with respect to the raw
/// mean vectors. The log-variance gradients are zero.
pub fn triplet_hnm_loss(
    anchor: &GaussianEmbedding,
    positive: &GaussianEmbedding,
    negatives: &[GaussianEmbedding],
    margin: f64,
) -> Result<LossOutput> {
    if negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "triplet loss needs at least one negative".into(),
        ));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must be a nonnegative real, got {margin}"
        )));
    }
    let dim = anchor.dim();
    for emb in std::iter::once(positive).chain(negatives.iter()) {
        if emb.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding {:?} has D={} but the anchor uses D={dim}",
                emb.id(),
                emb.dim()
            )));
        }
    }
    let (na, norm_a) = normalized(anchor.mu())?;
    let (np, norm_p) = normalized(positive.mu())?;
    let sim_pos = na.iter().zip(&np).map(|(x, y)| x * y).sum::<f64>();

    let mut hardest = 0;
    let mut hardest_sim = f64::NEG_INFINITY;
    let mut normed_negs = Vec::with_capacity(negatives.len());
    for (i, neg) in negatives.iter().enumerate() {
        let (nn, norm_n) = normalized(neg.mu())?;
        let sim = na.iter().zip(&nn).map(|(x, y)| x * y).sum::<f64>();
        if sim > hardest_sim {
            hardest_sim = sim;
            hardest = i;
        }
        normed_negs.push((nn, norm_n));
    }

    let slack = margin + hardest_sim - sim_pos;
    let mut grads = GradientMap::default();
    grads.entry(anchor.id(), dim);
    grads.entry(positive.id(), dim);
    for neg in negatives {
        grads.entry(neg.id(), dim);
    }
    let value = if slack > 0.0 {
        let (nh, norm_h) = &normed_negs[hardest];
        let d_anchor_h = cosine_grad_wrt_first(&na, nh, hardest_sim, norm_a);
        let d_anchor_p = cosine_grad_wrt_first(&na, &np, sim_pos, norm_a);
        let d_hardest = cosine_grad_wrt_first(nh, &na, hardest_sim, *norm_h);
        let d_positive = cosine_grad_wrt_first(&np, &na, sim_pos, norm_p);
        let entry = grads.entry(anchor.id(), dim);
        for d in 0..dim {
            entry.mu[d] += d_anchor_h[d] - d_anchor_p[d];
        }
        let entry = grads.entry(negatives[hardest].id(), dim);
        for d in 0..dim {
            entry.mu[d] += d_hardest[d];
        }
        let entry = grads.entry(positive.id(), dim);
        for d in 0..dim {
            entry.mu[d] -= d_positive[d];
        }
        slack
    } else {
        0.0
    };
    Ok(LossOutput {
        value,
        grads,
        clamp_events: 0,
    })
}

/// KL divergence of the embedding's distribution from the standard normal:
/// `0.5 * sum(sigma^2 + mu^2 - 1 - log sigma^2)`, with exact gradients.
pub fn kl_regularizer(emb: &GaussianEmbedding) -> LossOutput {
    let dim = emb.dim();
    let mut value = 0.0;
    let mut grads = GradientMap::default();
    let entry = grads.entry(emb.id(), dim);
    for d in 0..dim {
        let mu = emb.mu()[d];
        let lv = emb.log_var()[d];
        let var = lv.exp();
        value += 0.5 * (var + mu * mu - 1.0 - lv);
        entry.mu[d] = mu;
        entry.log_var[d] = 0.5 * (var - 1.0);
    }
    LossOutput {
        value,
        grads,
        clamp_events: 0,
    }
}

/// Uniformity loss value with per-vector gradients.
#[derive(Debug, Clone)]
pub struct UniformityLoss {
    pub value: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Pairwise Gaussian-kernel sum over the full ordered product `Z x Z`
/// (self-pairs included, each contributing `exp(0) = 1` and zero gradient):
/// `sum_{z, z'} exp(-2 ||z - z'||^2)`.
///
/// Inputs must be unit vectors within `1e-6`.
pub fn uniformity_loss(vectors: &[Vec<f64>]) -> Result<UniformityLoss> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument(
            "uniformity loss needs at least one vector".into(),
        ));
    }
    let dim = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "vector {i} has {} entries, expected {dim}",
                v.len()
            )));
        }
        let n = norm(v);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "vector {i} is not L2-normalized (norm = {n})"
            )));
        }
    }
    let n = vectors.len();
    // the n self-pairs contribute exp(0) each
    let mut value = n as f64;
    let mut grads = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for k in (i + 1)..n {
            let mut d2 = 0.0;
            for d in 0..dim {
                let diff = vectors[i][d] - vectors[k][d];
                d2 += diff * diff;
            }
            let kernel = (-2.0 * d2).exp();
            // the unordered pair appears twice in the ordered sum
            value += 2.0 * kernel;
            for d in 0..dim {
                let diff = vectors[i][d] - vectors[k][d];
                let g = -8.0 * kernel * diff;
                grads[i][d] += g;
                grads[k][d] -= g;
            }
        }
    }
    Ok(UniformityLoss { value, grads })
}

/// Which batch loss the composed objective is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BaseLoss {
    Soft,
    Mil,
}

/// Composed training objective with its component values.
#[derive(Debug, Clone)]
pub struct TotalLoss {
    pub value: f64,
    pub contrastive: f64,
    /// Mean KL regularizer over the distinct embeddings of the batch
    /// (unweighted component value).
    pub kl: f64,
    /// Uniformity value over the pooled, re-normalized batch samples
    /// (unweighted component value).
    pub uniformity: f64,
    pub grads: GradientMap,
    pub clamp_events: usize,
}

pub(crate) fn composed_loss(
    batch: &PairBatch,
    params: &MatchParams,
    lambda_kl: f64,
    lambda_unif: f64,
    base: BaseLoss,
) -> Result<TotalLoss> {
    for (name, lambda) in [("lambda_kl", lambda_kl), ("lambda_unif", lambda_unif)] {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be a nonnegative real, got {lambda}"
            )));
        }
    }
    let base_out = match base {
        BaseLoss::Soft => soft_contrastive_loss(batch, params)?,
        BaseLoss::Mil => mil_loss(batch, params)?,
    };
    let mut grads = base_out.grads.clone();
    let distinct = batch.distinct_embeddings();

    let mut kl_mean = 0.0;
    if lambda_kl > 0.0 {
        let weight = lambda_kl / distinct.len() as f64;
        for emb in &distinct {
            let reg = kl_regularizer(emb);
            kl_mean += reg.value / distinct.len() as f64;
            grads.add_scaled(&reg.grads, weight);
        }
    }

    let mut unif_value = 0.0;
    if lambda_unif > 0.0 {
        // pooled samples of every distinct embedding, re-normalized onto the
        // unit sphere before the kernel sum
        let j = batch.samples_per_embedding();
        let mut pool = Vec::with_capacity(distinct.len() * j);
        let mut owners = Vec::with_capacity(distinct.len() * j);
        for emb in &distinct {
            let set = sample_embeddings(emb, j, batch.seed());
            for z in set.samples() {
                let (unit, raw_norm) = normalized(z)?;
                owners.push((*emb, z.clone(), raw_norm));
                pool.push(unit);
            }
        }
        let unif = uniformity_loss(&pool)?;
        unif_value = unif.value;
        for (i, (emb, z, raw_norm)) in owners.iter().enumerate() {
            let du = &unif.grads[i];
            let u = &pool[i];
            let du_dot_u: f64 = du.iter().zip(u).map(|(x, y)| x * y).sum();
            let entry = grads.entry(emb.id(), emb.dim());
            for d in 0..emb.dim() {
                let dz = lambda_unif * (du[d] - du_dot_u * u[d]) / raw_norm;
                entry.mu[d] += dz;
                entry.log_var[d] += dz * 0.5 * (z[d] - emb.mu()[d]);
            }
        }
    }

    let value = base_out.value + lambda_kl * kl_mean + lambda_unif * unif_value;
    if !value.is_finite() || !grads.is_finite() {
        return Err(Error::Numeric("composed loss is non-finite".into()));
    }
    Ok(TotalLoss {
        value,
        contrastive: base_out.value,
        kl: kl_mean,
        uniformity: unif_value,
        grads,
        clamp_events: base_out.clamp_events,
    })
}

/// Soft contrastive loss plus weighted regularizers: the KL term is averaged
/// over the distinct embeddings of the batch, the uniformity term runs on the
/// pooled re-normalized batch samples.
pub fn total_loss(
    batch: &PairBatch,
    params: &MatchParams,
    lambda_kl: f64,
    lambda_unif: f64,
) -> Result<TotalLoss> {
    composed_loss(batch, params, lambda_kl, lambda_unif, BaseLoss::Soft)
}
