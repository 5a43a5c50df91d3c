//! Finite-difference verification utilities.
//!
//! The losses in this crate ship with hand-derived gradients; these helpers
//! flatten a batch (or a list of embeddings) into a parameter vector, rebuild
//! it after perturbation, and compare analytic gradients against central
//! differences. Because sample noise is keyed by `(seed, id)` and never by
//! the parameter values, perturbing `mu` or `log_var` moves the fixed-sample
//! objective smoothly and central differences converge to the exact pathwise
//! gradient.

use crate::embedding::{GaussianEmbedding, MatchParams};
use crate::error::Result;
use crate::losses::{GradientMap, LabeledPair, PairBatch};

/// Default step for central differences.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor, so near-zero gradient pairs
/// compare by absolute difference.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest elementwise relative error between two gradient vectors.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

/// Central finite differences of `f` at `theta`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(theta.len());
    let mut point = theta.to_vec();
    for i in 0..theta.len() {
        point[i] = theta[i] + h;
        let plus = f(&point);
        point[i] = theta[i] - h;
        let minus = f(&point);
        point[i] = theta[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Flatten the batch's learnables: for every distinct embedding in id order,
/// its mu entries then its log-var entries; finally the match scalars (a, b).
pub fn flatten_batch_params(batch: &PairBatch, params: &MatchParams) -> Vec<f64> {
    let mut theta = Vec::new();
    for emb in batch.distinct_embeddings() {
        theta.extend_from_slice(emb.mu());
        theta.extend_from_slice(emb.log_var());
    }
    theta.push(params.a());
    theta.push(params.b());
    theta
}

/// Rebuild a batch and match params from a flattened parameter vector,
/// keeping the template's ids, modalities, labels, J, and seed.
pub fn rebuild_batch(template: &PairBatch, theta: &[f64]) -> Result<(PairBatch, MatchParams)> {
    let distinct = template.distinct_embeddings();
    let mut cursor = 0usize;
    let mut by_id = std::collections::BTreeMap::new();
    for emb in &distinct {
        let d = emb.dim();
        let mu = theta[cursor..cursor + d].to_vec();
        let log_var = theta[cursor + d..cursor + 2 * d].to_vec();
        cursor += 2 * d;
        by_id.insert(
            emb.id().to_string(),
            GaussianEmbedding::new(emb.id(), emb.modality(), mu, log_var)?,
        );
    }
    let params = MatchParams::new(theta[cursor], theta[cursor + 1])?;
    let pairs = template
        .pairs()
        .iter()
        .map(|p| LabeledPair {
            a: by_id[p.a.id()].clone(),
            b: by_id[p.b.id()].clone(),
            positive: p.positive,
        })
        .collect();
    let batch = PairBatch::new(pairs, template.samples_per_embedding(), template.seed())?;
    Ok((batch, params))
}

/// Flatten a gradient map in the same order as [`flatten_batch_params`].
pub fn flatten_batch_grads(template: &PairBatch, grads: &GradientMap) -> Vec<f64> {
    let mut flat = Vec::new();
    for emb in template.distinct_embeddings() {
        match grads.embeddings.get(emb.id()) {
            Some(g) => {
                flat.extend_from_slice(&g.mu);
                flat.extend_from_slice(&g.log_var);
            }
            None => flat.extend(std::iter::repeat(0.0).take(2 * emb.dim())),
        }
    }
    flat.push(grads.match_a);
    flat.push(grads.match_b);
    flat
}

/// Flatten a list of embeddings (in the given order) into `[mu..., lv...]`
/// blocks.
pub fn flatten_embedding_params(embeddings: &[&GaussianEmbedding]) -> Vec<f64> {
    let mut theta = Vec::new();
    for emb in embeddings {
        theta.extend_from_slice(emb.mu());
        theta.extend_from_slice(emb.log_var());
    }
    theta
}

/// Rebuild embeddings from a flattened vector, keeping ids and modalities.
pub fn rebuild_embeddings(
    templates: &[&GaussianEmbedding],
    theta: &[f64],
) -> Result<Vec<GaussianEmbedding>> {
    let mut out = Vec::with_capacity(templates.len());
    let mut cursor = 0usize;
    for emb in templates {
        let d = emb.dim();
        let mu = theta[cursor..cursor + d].to_vec();
        let log_var = theta[cursor + d..cursor + 2 * d].to_vec();
        cursor += 2 * d;
        out.push(GaussianEmbedding::new(emb.id(), emb.modality(), mu, log_var)?);
    }
    Ok(out)
}

/// Flatten a gradient map in the order of `templates` (ids must be distinct).
pub fn flatten_embedding_grads(templates: &[&GaussianEmbedding], grads: &GradientMap) -> Vec<f64> {
    let mut flat = Vec::new();
    for emb in templates {
        match grads.embeddings.get(emb.id()) {
            Some(g) => {
                flat.extend_from_slice(&g.mu);
                flat.extend_from_slice(&g.log_var);
            }
            None => flat.extend(std::iter::repeat(0.0).take(2 * emb.dim())),
        }
    }
    flat
}
