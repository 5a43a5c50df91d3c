//! Gaussian embeddings over a shared space, reparametrized sampling, and the
//! Monte-Carlo match probability.
//!
//! Each item is represented as a diagonal Gaussian `N(mu, diag(exp(log_var)))`
//! in `R^D`. A pair's match probability is the sigmoid of a scaled negative
//! Euclidean distance, averaged over `J x J` reparametrized sample pairs:
//!
//! ```text
//! p(match) ~= (1/J^2) sum_{j,j'} sigmoid(-a * ||z_a^j - z_b^j'||_2 + b)
//! z^j       = mu + exp(log_var / 2) .* eps^j,   eps^j ~ N(0, I)
//! ```
//!
//! Sample noise comes from a stream keyed by `(seed, id)`, so results are
//! reproducible and independent of evaluation order.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::keyed_rng;
use crate::vecmath::{all_finite, l2_distance, sigmoid};

/// Hard bound on log-variance entries; keeps `exp` and the variance-ratio
/// terms of KL/JS finite.
pub const LOG_VAR_BOUND: f64 = 60.0;

/// Which side of the cross-modal relation an item belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    A,
    B,
}

impl Modality {
    pub fn opposite(self) -> Modality {
        match self {
            Modality::A => Modality::B,
            Modality::B => Modality::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::A => "a",
            Modality::B => "b",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Modality::A),
            "b" | "B" => Ok(Modality::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown modality {other:?} (expected \"a\" or \"b\")"
            ))),
        }
    }
}

/// One item's Gaussian embedding: mean vector plus per-dimension
/// log-variance. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmbedding {
    id: String,
    modality: Modality,
    mu: Vec<f64>,
    log_var: Vec<f64>,
}

impl GaussianEmbedding {
    /// Build an embedding, validating finiteness and clamping `log_var`
    /// entries into `[-LOG_VAR_BOUND, LOG_VAR_BOUND]`.
    pub fn new(
        id: impl Into<String>,
        modality: Modality,
        mu: Vec<f64>,
        mut log_var: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if mu.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "embedding {id:?} has zero dimensions"
            )));
        }
        if mu.len() != log_var.len() {
            return Err(Error::DimensionMismatch(format!(
                "embedding {id:?}: mu has {} entries but log_var has {}",
                mu.len(),
                log_var.len()
            )));
        }
        if !all_finite(&mu) || !all_finite(&log_var) {
            return Err(Error::Numeric(format!(
                "embedding {id:?} contains non-finite entries"
            )));
        }
        for v in &mut log_var {
            *v = v.clamp(-LOG_VAR_BOUND, LOG_VAR_BOUND);
        }
        Ok(Self {
            id,
            modality,
            mu,
            log_var,
        })
    }

    /// A zero-variance embedding (log-variance pinned at the lower bound).
    pub fn point(id: impl Into<String>, modality: Modality, mu: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        Self::new(id, modality, mu, vec![-LOG_VAR_BOUND; d])
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn log_var(&self) -> &[f64] {
        &self.log_var
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Per-dimension standard deviations `exp(log_var / 2)`.
    pub fn sigmas(&self) -> Vec<f64> {
        self.log_var.iter().map(|v| (0.5 * v).exp()).collect()
    }

    /// Scalar uncertainty: the geometric mean of the sigma entries,
    /// `exp(mean(log_var) / 2)`. Equals `det(diag(sigma^2))^(1/(2D))`.
    pub fn uncertainty(&self) -> f64 {
        let mean_log_var = self.log_var.iter().sum::<f64>() / self.dim() as f64;
        (0.5 * mean_log_var).exp()
    }
}

/// Reparametrized samples drawn from one embedding's distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    owner_id: String,
    samples: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn owner_id(&self) -> &str {
        &self.owner_id
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Sample count J.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }
}

/// Draw `j` reparametrized samples `mu + exp(log_var/2) .* eps` from the
/// stream keyed by `(seed, emb.id)`. Identical inputs give bitwise-identical
/// output.
pub fn sample_embeddings(emb: &GaussianEmbedding, j: usize, seed: u64) -> SampleSet {
    assert!(j >= 1, "sample count must be at least 1");
    let mut rng = keyed_rng(seed, &[b"sample", emb.id().as_bytes()]);
    let sigmas = emb.sigmas();
    let samples = (0..j)
        .map(|_| {
            emb.mu()
                .iter()
                .zip(&sigmas)
                .map(|(&m, &s)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    m + s * eps
                })
                .collect()
        })
        .collect();
    SampleSet {
        owner_id: emb.id().to_string(),
        samples,
    }
}

/// Learnable scalars converting Euclidean distance to a match logit
/// `-a * d + b`. `a` must be positive so proximity raises the logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    a: f64,
    b: f64,
}

impl MatchParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Numeric("match params must be finite".into()));
        }
        if a <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "match scale a must be positive, got {a}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Sample-level match probability `sigmoid(-a * distance + b)`.
    pub fn probability_of_distance(&self, distance: f64) -> f64 {
        sigmoid(-self.a * distance + self.b)
    }
}

impl Default for MatchParams {
    /// Neutral parameters used when no trained values are available
    /// (e.g. ranking embeddings loaded from a dump).
    fn default() -> Self {
        Self { a: 1.0, b: 0.0 }
    }
}

/// Monte-Carlo match probability of a pair under `params`, averaging the
/// sample-level sigmoid over `j * j` reparametrized sample pairs.
pub fn match_probability_mc(
    emb_a: &GaussianEmbedding,
    emb_b: &GaussianEmbedding,
    params: &MatchParams,
    j: usize,
    seed: u64,
) -> Result<f64> {
    if emb_a.dim() != emb_b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "embeddings {:?} (D={}) and {:?} (D={}) are incompatible",
            emb_a.id(),
            emb_a.dim(),
            emb_b.id(),
            emb_b.dim()
        )));
    }
    let sa = sample_embeddings(emb_a, j, seed);
    let sb = sample_embeddings(emb_b, j, seed);
    Ok(match_probability_of_samples(&sa, &sb, params))
}

/// Match probability computed from already-drawn sample sets.
pub fn match_probability_of_samples(sa: &SampleSet, sb: &SampleSet, params: &MatchParams) -> f64 {
    let mut total = 0.0;
    for za in sa.samples() {
        for zb in sb.samples() {
            total += params.probability_of_distance(l2_distance(za, zb));
        }
    }
    total / (sa.len() * sb.len()) as f64
}
