//! Closed-form distances between diagonal Gaussian embeddings.
//!
//! All kinds except `MeanL2` are sums of per-dimension terms; `MeanL2` is the
//! Euclidean distance between means. `W2` is the *squared* 2-Wasserstein
//! distance; callers needing the metric take the square root.
//!
//! Per dimension, with `p = N(m1, v1)` and `q = N(m2, v2)`:
//!
//! ```text
//! KL(p,q)  = 0.5 * [ ln(v2/v1) + v1/v2 + (m1-m2)^2/v2 - 1 ]
//! JS(p,q)  = 0.5 * [ KL(p,q) + KL(q,p) ]
//! ELK(p,q) = 0.5 * [ (m1-m2)^2/(v1+v2) + ln(v1+v2) ]
//! BK(p,q)  = 0.25 * (m1-m2)^2/(v1+v2) + 0.5 * ln(s2/s1 + s1/s2)
//! W2(p,q)  = (m1-m2)^2 + (s1-s2)^2
//! ```
//!
//! ELK and BK are negative log kernels with constant offsets dropped, so
//! their value at `p == q` is not zero (ELK(p,p) = 0.5 * sum ln(2 v); BK(p,p)
//! = 0.5 * D * ln 2); both are still minimized at `p == q` over mean
//! perturbations.

use serde::{Deserialize, Serialize};

use crate::embedding::GaussianEmbedding;
use crate::error::{Error, Result};
use crate::vecmath::l2_distance;

/// Closed-form distance kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Kullback-Leibler divergence KL(p || q); asymmetric.
    Kl,
    /// Jensen-Shannon divergence: half-sum of forward and reverse KL.
    Js,
    /// Expected likelihood kernel, as a log-space distance.
    Elk,
    /// Bhattacharyya kernel, as a log-space distance.
    Bk,
    /// Squared 2-Wasserstein distance.
    W2,
    /// Euclidean distance between the mean vectors only.
    MeanL2,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 6] = [
        DistanceKind::Kl,
        DistanceKind::Js,
        DistanceKind::Elk,
        DistanceKind::Bk,
        DistanceKind::W2,
        DistanceKind::MeanL2,
    ];

    pub fn is_symmetric(self) -> bool {
        !matches!(self, DistanceKind::Kl)
    }
}

fn kl_term(m1: f64, lv1: f64, m2: f64, lv2: f64) -> f64 {
    let dm = m1 - m2;
    let v1 = lv1.exp();
    let v2 = lv2.exp();
    0.5 * ((lv2 - lv1) + v1 / v2 + dm * dm / v2 - 1.0)
}

fn elk_term(m1: f64, lv1: f64, m2: f64, lv2: f64) -> f64 {
    let dm = m1 - m2;
    let vsum = lv1.exp() + lv2.exp();
    0.5 * (dm * dm / vsum + vsum.ln())
}

fn bk_term(m1: f64, lv1: f64, m2: f64, lv2: f64) -> f64 {
    let dm = m1 - m2;
    let vsum = lv1.exp() + lv2.exp();
    // s2/s1 + s1/s2 computed in log space to survive extreme variance ratios
    let ratio = (0.5 * (lv2 - lv1)).exp() + (0.5 * (lv1 - lv2)).exp();
    0.25 * dm * dm / vsum + 0.5 * ratio.ln()
}

fn w2_term(m1: f64, lv1: f64, m2: f64, lv2: f64) -> f64 {
    let dm = m1 - m2;
    let ds = (0.5 * lv1).exp() - (0.5 * lv2).exp();
    dm * dm + ds * ds
}

/// Evaluate a closed-form distance between two embeddings.
///
/// Errors on dimension mismatch and when the result is non-finite (variance
/// ratio overflow).
pub fn closed_form_distance(
    kind: DistanceKind,
    p: &GaussianEmbedding,
    q: &GaussianEmbedding,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "embeddings {:?} (D={}) and {:?} (D={}) are incompatible",
            p.id(),
            p.dim(),
            q.id(),
            q.dim()
        )));
    }
    let value = match kind {
        DistanceKind::MeanL2 => l2_distance(p.mu(), q.mu()),
        _ => {
            let term = |m1: f64, lv1: f64, m2: f64, lv2: f64| match kind {
                DistanceKind::Kl => kl_term(m1, lv1, m2, lv2),
                DistanceKind::Js => 0.5 * (kl_term(m1, lv1, m2, lv2) + kl_term(m2, lv2, m1, lv1)),
                DistanceKind::Elk => elk_term(m1, lv1, m2, lv2),
                DistanceKind::Bk => bk_term(m1, lv1, m2, lv2),
                DistanceKind::W2 => w2_term(m1, lv1, m2, lv2),
                DistanceKind::MeanL2 => unreachable!(),
            };
            let mut total = 0.0;
            for d in 0..p.dim() {
                total += term(p.mu()[d], p.log_var()[d], q.mu()[d], q.log_var()[d]);
            }
            total
        }
    };
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "{kind:?} distance between {:?} and {:?} overflowed",
            p.id(),
            q.id()
        )));
    }
    Ok(value)
}
