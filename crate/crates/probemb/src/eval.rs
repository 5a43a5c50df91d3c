//! Retrieval over Gaussian embedding galleries under every test-time
//! similarity variant, plus the evaluation metrics: Recall@k, R-Precision,
//! Plausible-Match R-Precision, uncertainty binning, and the corruption
//! sweep.
//!
//! Scores keep each kind's natural orientation (distances rank ascending,
//! probabilities descending); ranking code negates distances internally so
//! every kind sorts "higher is better". Ties break by ascending gallery id.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::datagen::{corrupt, plausible_match, CrossModalDataset};
use crate::distance::{closed_form_distance, DistanceKind};
use crate::embedding::{
    match_probability_of_samples, sample_embeddings, GaussianEmbedding, MatchParams, SampleSet,
};
use crate::error::{Error, Result};
use crate::streams::stream_seed;
use crate::trainer::Model;
use crate::vecmath::l2_distance;

/// Test-time similarity variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// Euclidean distance between mean vectors.
    MeanOnly,
    /// KL(query || gallery).
    Kl,
    Js,
    Elk,
    Bk,
    W2,
    /// Mean L2 distance over J x J sample pairs.
    AvgL2Sampled,
    /// Monte-Carlo match probability over J x J sample pairs.
    MatchProbSampled,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 8] = [
        SimilarityKind::MeanOnly,
        SimilarityKind::Kl,
        SimilarityKind::Js,
        SimilarityKind::Elk,
        SimilarityKind::Bk,
        SimilarityKind::W2,
        SimilarityKind::AvgL2Sampled,
        SimilarityKind::MatchProbSampled,
    ];

    pub fn is_sampled(self) -> bool {
        matches!(
            self,
            SimilarityKind::AvgL2Sampled | SimilarityKind::MatchProbSampled
        )
    }

    /// True when larger scores mean closer matches.
    pub fn higher_is_better(self) -> bool {
        matches!(self, SimilarityKind::MatchProbSampled)
    }

    /// Reals stored per gallery item of dimension `d` with `j` samples:
    /// D for mean-only, 2D for closed-form kinds, J*D for sampled kinds.
    pub fn stored_reals_per_item(self, d: usize, j: usize) -> usize {
        match self {
            SimilarityKind::MeanOnly => d,
            SimilarityKind::AvgL2Sampled | SimilarityKind::MatchProbSampled => j * d,
            _ => 2 * d,
        }
    }

    /// Scalar distance evaluations per query-gallery pair.
    pub fn evaluations_per_pair(self, j: usize) -> u64 {
        if self.is_sampled() {
            (j * j) as u64
        } else {
            1
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::MeanOnly => "mean",
            SimilarityKind::Kl => "kl",
            SimilarityKind::Js => "js",
            SimilarityKind::Elk => "elk",
            SimilarityKind::Bk => "bk",
            SimilarityKind::W2 => "w2",
            SimilarityKind::AvgL2Sampled => "avg-l2",
            SimilarityKind::MatchProbSampled => "match-prob",
        }
    }
}

impl std::str::FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean-only" => Ok(SimilarityKind::MeanOnly),
            "kl" => Ok(SimilarityKind::Kl),
            "js" => Ok(SimilarityKind::Js),
            "elk" => Ok(SimilarityKind::Elk),
            "bk" => Ok(SimilarityKind::Bk),
            "w2" => Ok(SimilarityKind::W2),
            "avg-l2" => Ok(SimilarityKind::AvgL2Sampled),
            "match-prob" => Ok(SimilarityKind::MatchProbSampled),
            other => Err(Error::InvalidArgument(format!(
                "unknown similarity kind {other:?} (expected one of mean, kl, js, elk, bk, \
                 w2, avg-l2, match-prob)"
            ))),
        }
    }
}

/// How a gallery is scored at test time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub kind: SimilarityKind,
    /// Sample count J (sampled kinds only).
    pub j: usize,
    /// Seed for the per-embedding sample sets (sampled kinds only).
    pub seed: u64,
    /// Match parameters for `MatchProbSampled`; defaults to (a=1, b=0) when
    /// no trained values are available.
    pub match_params: MatchParams,
}

impl SimilaritySpec {
    pub fn closed_form(kind: SimilarityKind) -> Self {
        Self {
            kind,
            j: 1,
            seed: 0,
            match_params: MatchParams::default(),
        }
    }

    pub fn sampled(kind: SimilarityKind, j: usize, seed: u64) -> Self {
        Self {
            kind,
            j,
            seed,
            match_params: MatchParams::default(),
        }
    }

    pub fn with_match_params(mut self, params: MatchParams) -> Self {
        self.match_params = params;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.kind.is_sampled() && self.j == 0 {
            return Err(Error::InvalidArgument(
                "sampled similarity kinds need J >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full gallery ranking for one query, best first. Scores keep the kind's
/// natural orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
}

/// Bookkeeping for the complexity claims of each similarity kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalStats {
    /// Scalar distance evaluations performed.
    pub distance_evaluations: u64,
    /// Reals stored per gallery item under this kind.
    pub stored_reals_per_item: usize,
}

fn ranked_from_scores(query_id: &str, ids: &[String], scores: Vec<f64>, ascending: bool) -> RankedList {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&x, &y| {
        let cmp = scores[x]
            .partial_cmp(&scores[y])
            .expect("scores are finite");
        let cmp = if ascending { cmp } else { cmp.reverse() };
        cmp.then_with(|| ids[x].cmp(&ids[y]))
    });
    RankedList {
        query_id: query_id.to_string(),
        ids: order.iter().map(|&i| ids[i].clone()).collect(),
        scores: order.iter().map(|&i| scores[i]).collect(),
    }
}

/// Sort gallery ids by score under the stated orientation, ties broken by
/// ascending id. Exposed for ranking-invariance checks.
pub fn rank_gallery(query_id: &str, ids: &[String], scores: &[f64], ascending: bool) -> RankedList {
    ranked_from_scores(query_id, ids, scores.to_vec(), ascending)
}

/// Rank the full gallery for every query under the spec. Sampled kinds draw
/// one sample set per embedding from `spec.seed` and reuse it across pairs.
pub fn retrieve_with_stats(
    queries: &[GaussianEmbedding],
    gallery: &[GaussianEmbedding],
    spec: &SimilaritySpec,
) -> Result<(Vec<RankedList>, RetrievalStats)> {
    spec.validate()?;
    if gallery.is_empty() {
        return Err(Error::InvalidArgument("gallery is empty".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no queries supplied".into()));
    }
    let q_mod = queries[0].modality();
    if queries.iter().any(|q| q.modality() != q_mod)
        || gallery.iter().any(|g| g.modality() == q_mod)
    {
        return Err(Error::InvalidArgument(
            "queries must share one modality and the gallery must hold the other".into(),
        ));
    }
    let dim = queries[0].dim();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for emb in queries.iter().chain(gallery.iter()) {
        if emb.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding {:?} has D={} but the retrieval space is D={dim}",
                emb.id(),
                emb.dim()
            )));
        }
        if !seen.insert(emb.id()) {
            return Err(Error::InvalidArgument(format!(
                "id {:?} appears more than once across queries and gallery",
                emb.id()
            )));
        }
    }

    let mut sample_cache: BTreeMap<&str, SampleSet> = BTreeMap::new();
    if spec.kind.is_sampled() {
        for emb in queries.iter().chain(gallery.iter()) {
            sample_cache
                .entry(emb.id())
                .or_insert_with(|| sample_embeddings(emb, spec.j, spec.seed));
        }
    }

    let gallery_ids: Vec<String> = gallery.iter().map(|g| g.id().to_string()).collect();
    let mut evaluations = 0u64;
    let mut results = Vec::with_capacity(queries.len());
    for query in queries {
        let mut scores = Vec::with_capacity(gallery.len());
        for item in gallery {
            let score = match spec.kind {
                SimilarityKind::MeanOnly => closed_form_distance(DistanceKind::MeanL2, query, item)?,
                SimilarityKind::Kl => closed_form_distance(DistanceKind::Kl, query, item)?,
                SimilarityKind::Js => closed_form_distance(DistanceKind::Js, query, item)?,
                SimilarityKind::Elk => closed_form_distance(DistanceKind::Elk, query, item)?,
                SimilarityKind::Bk => closed_form_distance(DistanceKind::Bk, query, item)?,
                SimilarityKind::W2 => closed_form_distance(DistanceKind::W2, query, item)?,
                SimilarityKind::AvgL2Sampled => {
                    let sq = &sample_cache[query.id()];
                    let sg = &sample_cache[item.id()];
                    let mut total = 0.0;
                    for zq in sq.samples() {
                        for zg in sg.samples() {
                            total += l2_distance(zq, zg);
                        }
                    }
                    total / (sq.len() * sg.len()) as f64
                }
                SimilarityKind::MatchProbSampled => {
                    let sq = &sample_cache[query.id()];
                    let sg = &sample_cache[item.id()];
                    match_probability_of_samples(sq, sg, &spec.match_params)
                }
            };
            if !score.is_finite() {
                return Err(Error::Numeric(format!(
                    "score between {:?} and {:?} is non-finite",
                    query.id(),
                    item.id()
                )));
            }
            evaluations += spec.kind.evaluations_per_pair(spec.j);
            scores.push(score);
        }
        results.push(ranked_from_scores(
            query.id(),
            &gallery_ids,
            scores,
            !spec.kind.higher_is_better(),
        ));
    }
    let stats = RetrievalStats {
        distance_evaluations: evaluations,
        stored_reals_per_item: spec.kind.stored_reals_per_item(dim, spec.j),
    };
    Ok((results, stats))
}

/// `retrieve_with_stats` without the bookkeeping.
pub fn retrieve(
    queries: &[GaussianEmbedding],
    gallery: &[GaussianEmbedding],
    spec: &SimilaritySpec,
) -> Result<Vec<RankedList>> {
    retrieve_with_stats(queries, gallery, spec).map(|(r, _)| r)
}

/// 1 if any positive appears in the top `k` of the ranking, else 0.
pub fn recall_at_k(ranked: &RankedList, positives: &BTreeSet<String>, k: usize) -> Result<bool> {
    if k == 0 || k > ranked.ids.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} is outside the gallery size {}",
            ranked.ids.len()
        )));
    }
    Ok(ranked.ids[..k].iter().any(|id| positives.contains(id)))
}

/// Fraction of positives among the top `r` entries, `r = |positives|`.
pub fn r_precision(ranked: &RankedList, positives: &BTreeSet<String>) -> Result<f64> {
    let r = positives.len();
    if r == 0 {
        return Err(Error::InvalidArgument(
            "R-Precision is undefined for an empty positive set".into(),
        ));
    }
    if r > ranked.ids.len() {
        return Err(Error::InvalidArgument(format!(
            "positive set ({r}) exceeds the gallery size {}",
            ranked.ids.len()
        )));
    }
    let hits = ranked.ids[..r]
        .iter()
        .filter(|id| positives.contains(*id))
        .count();
    Ok(hits as f64 / r as f64)
}

/// Outcome for one Hamming threshold of the plausible-match evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaOutcome {
    pub zeta: usize,
    pub value: f64,
    pub included_queries: usize,
    /// Queries skipped because their positive set was empty at this zeta.
    pub excluded_queries: usize,
}

/// Plausible-Match R-Precision report with the per-zeta breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmrpReport {
    /// Mean of the per-zeta values.
    pub mean: f64,
    pub per_zeta: Vec<ZetaOutcome>,
}

/// R-Precision under the plausible-match relation for every `zeta`,
/// averaged over zetas. Queries whose positive set is empty at a given zeta
/// are excluded from that zeta's average and counted.
pub fn pmrp(
    ranked: &[RankedList],
    attributes: &BTreeMap<String, Vec<u8>>,
    zeta_set: &[usize],
) -> Result<PmrpReport> {
    if ranked.is_empty() {
        return Err(Error::InvalidArgument("no ranked lists supplied".into()));
    }
    if zeta_set.is_empty() {
        return Err(Error::InvalidArgument("zeta set is empty".into()));
    }
    let attrs_of = |id: &str| -> Result<&Vec<u8>> {
        attributes.get(id).ok_or_else(|| {
            Error::InvalidArgument(format!("no attribute vector for item {id:?}"))
        })
    };
    let mut per_zeta = Vec::with_capacity(zeta_set.len());
    for &zeta in zeta_set {
        let mut total = 0.0;
        let mut included = 0usize;
        let mut excluded = 0usize;
        for list in ranked {
            let qa = attrs_of(&list.query_id)?;
            let mut positives = BTreeSet::new();
            for id in &list.ids {
                if plausible_match(qa, attrs_of(id)?, zeta)? {
                    positives.insert(id.clone());
                }
            }
            if positives.is_empty() {
                excluded += 1;
            } else {
                total += r_precision(list, &positives)?;
                included += 1;
            }
        }
        if included == 0 {
            return Err(Error::InvalidArgument(format!(
                "every query has an empty positive set at zeta = {zeta}"
            )));
        }
        per_zeta.push(ZetaOutcome {
            zeta,
            value: total / included as f64,
            included_queries: included,
            excluded_queries: excluded,
        });
    }
    let mean = per_zeta.iter().map(|z| z.value).sum::<f64>() / per_zeta.len() as f64;
    Ok(PmrpReport { mean, per_zeta })
}

/// A query's uncertainty paired with its R@1 outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryPerformance {
    pub id: String,
    pub uncertainty: f64,
    pub r1: f64,
}

/// One row of the uncertainty-bin table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyBin {
    pub bin: usize,
    pub mean_uncertainty: f64,
    pub mean_r1: f64,
}

/// Sort queries by uncertainty (ties by id), split into `num_bins`
/// equal-count bins (remainder spread over the earliest bins), and average
/// R@1 per bin.
pub fn uncertainty_bins(
    queries: &[QueryPerformance],
    num_bins: usize,
) -> Result<Vec<UncertaintyBin>> {
    if num_bins == 0 {
        return Err(Error::InvalidArgument("num_bins must be positive".into()));
    }
    if queries.len() < num_bins {
        return Err(Error::InvalidArgument(format!(
            "{} queries cannot fill {num_bins} bins",
            queries.len()
        )));
    }
    let mut sorted: Vec<&QueryPerformance> = queries.iter().collect();
    sorted.sort_by(|a, b| {
        a.uncertainty
            .partial_cmp(&b.uncertainty)
            .expect("uncertainties are finite")
            .then_with(|| a.id.cmp(&b.id))
    });
    let base = queries.len() / num_bins;
    let remainder = queries.len() % num_bins;
    let mut bins = Vec::with_capacity(num_bins);
    let mut cursor = 0usize;
    for bin in 0..num_bins {
        let size = base + usize::from(bin < remainder);
        let chunk = &sorted[cursor..cursor + size];
        cursor += size;
        bins.push(UncertaintyBin {
            bin,
            mean_uncertainty: chunk.iter().map(|q| q.uncertainty).sum::<f64>() / size as f64,
            mean_r1: chunk.iter().map(|q| q.r1).sum::<f64>() / size as f64,
        });
    }
    Ok(bins)
}

/// One row of the corruption sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionRow {
    pub ratio: f64,
    pub mean_sigma: f64,
}

/// For each erase ratio, corrupt every item's features, encode, and report
/// the mean scalar uncertainty over all items.
pub fn corruption_sweep(
    model: &Model,
    dataset: &CrossModalDataset,
    ratios: &[f64],
    seed: u64,
) -> Result<Vec<CorruptionRow>> {
    let mut rows = Vec::with_capacity(ratios.len());
    for (ratio_idx, &ratio) in ratios.iter().enumerate() {
        let mut total = 0.0;
        for item in dataset.items() {
            let item_seed = stream_seed(
                seed,
                &[
                    b"sweep",
                    &(ratio_idx as u64).to_le_bytes(),
                    item.id.as_bytes(),
                ],
            );
            let corrupted = corrupt(&item.features, ratio, item_seed)?;
            let emb = model.encode(&item.id, &corrupted, item.modality)?;
            total += emb.uncertainty();
        }
        rows.push(CorruptionRow {
            ratio,
            mean_sigma: total / dataset.len() as f64,
        });
    }
    Ok(rows)
}

/// Aggregated metrics for one retrieval direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionReport {
    /// "a2b" or "b2a".
    pub direction: String,
    /// (k, mean R@k) for every valid k.
    pub recall_at: Vec<(usize, f64)>,
    pub r_precision: f64,
    pub pmrp: PmrpReport,
    pub mean_query_uncertainty: f64,
    pub per_query: Vec<QueryPerformance>,
}

/// Metrics for both retrieval directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub directions: Vec<DirectionReport>,
}

/// Recall cutoffs reported by the evaluation harness.
pub const RECALL_CUTOFFS: [usize; 3] = [1, 5, 10];

/// Rank and score one direction, computing R@k for every valid cutoff,
/// R-Precision under the class relation, and PMRP over `zeta_set`.
pub fn evaluate_direction(
    direction: &str,
    queries: &[GaussianEmbedding],
    gallery: &[GaussianEmbedding],
    dataset: &CrossModalDataset,
    spec: &SimilaritySpec,
    zeta_set: &[usize],
) -> Result<DirectionReport> {
    let ranked = retrieve(queries, gallery, spec)?;
    let class_of = |id: &str| -> Result<usize> {
        dataset
            .get(id)
            .map(|item| item.class_id)
            .ok_or_else(|| Error::InvalidArgument(format!("item {id:?} is not in the dataset")))
    };
    let mut recall_sums: Vec<(usize, f64)> = RECALL_CUTOFFS
        .iter()
        .filter(|&&k| k <= gallery.len())
        .map(|&k| (k, 0.0))
        .collect();
    let mut rp_sum = 0.0;
    let mut per_query = Vec::with_capacity(queries.len());
    for (query, list) in queries.iter().zip(&ranked) {
        let q_class = class_of(query.id())?;
        let mut positives = BTreeSet::new();
        for id in &list.ids {
            if class_of(id)? == q_class {
                positives.insert(id.clone());
            }
        }
        if positives.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "query {:?} has no ground-truth match in the gallery",
                query.id()
            )));
        }
        for (k, sum) in recall_sums.iter_mut() {
            *sum += f64::from(recall_at_k(list, &positives, *k)?);
        }
        rp_sum += r_precision(list, &positives)?;
        per_query.push(QueryPerformance {
            id: query.id().to_string(),
            uncertainty: query.uncertainty(),
            r1: f64::from(recall_at_k(list, &positives, 1)?),
        });
    }
    let n = queries.len() as f64;
    let attributes: BTreeMap<String, Vec<u8>> = dataset
        .items()
        .iter()
        .map(|item| (item.id.clone(), item.attributes.clone()))
        .collect();
    Ok(DirectionReport {
        direction: direction.to_string(),
        recall_at: recall_sums.into_iter().map(|(k, s)| (k, s / n)).collect(),
        r_precision: rp_sum / n,
        pmrp: pmrp(&ranked, &attributes, zeta_set)?,
        mean_query_uncertainty: per_query.iter().map(|q| q.uncertainty).sum::<f64>() / n,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Modality;

    fn emb(id: &str, modality: Modality, mu: Vec<f64>, lv: f64) -> GaussianEmbedding {
        let d = mu.len();
        GaussianEmbedding::new(id, modality, mu, vec![lv; d]).unwrap()
    }

    #[test]
    fn mean_only_identical_mu_ranks_first() {
        let query = emb("q", Modality::A, vec![0.3, 0.4], -2.0);
        let gallery = vec![
            emb("g1", Modality::B, vec![1.0, -1.0], 0.0),
            emb("g2", Modality::B, vec![0.3, 0.4], 1.0),
            emb("g3", Modality::B, vec![-0.5, 0.2], -1.0),
        ];
        let spec = SimilaritySpec::closed_form(SimilarityKind::MeanOnly);
        let ranked = retrieve(&[query], &gallery, &spec).unwrap();
        assert_eq!(ranked[0].ids[0], "g2");
        assert_eq!(ranked[0].scores[0], 0.0);
    }

    #[test]
    fn zero_variance_match_prob_matches_mean_only() {
        let query = emb("q", Modality::A, vec![0.1, 0.9], -60.0);
        let gallery = vec![
            emb("g1", Modality::B, vec![0.4, 0.1], -60.0),
            emb("g2", Modality::B, vec![0.2, 0.8], -60.0),
            emb("g3", Modality::B, vec![-0.9, 0.0], -60.0),
            emb("g4", Modality::B, vec![0.0, 1.0], -60.0),
        ];
        let mean = retrieve(
            &[query.clone()],
            &gallery,
            &SimilaritySpec::closed_form(SimilarityKind::MeanOnly),
        )
        .unwrap();
        let prob = retrieve(
            &[query],
            &gallery,
            &SimilaritySpec::sampled(SimilarityKind::MatchProbSampled, 3, 5),
        )
        .unwrap();
        assert_eq!(mean[0].ids, prob[0].ids);
    }

    #[test]
    fn empty_gallery_and_modality_violations_error() {
        let q = emb("q", Modality::A, vec![0.0], 0.0);
        let g_same = emb("g", Modality::A, vec![0.0], 0.0);
        let spec = SimilaritySpec::closed_form(SimilarityKind::MeanOnly);
        assert!(retrieve(std::slice::from_ref(&q), &[], &spec).is_err());
        assert!(retrieve(&[q], &[g_same], &spec).is_err());
    }

    #[test]
    fn tie_break_is_ascending_id() {
        let query = emb("q", Modality::A, vec![0.0, 0.0], 0.0);
        let gallery = vec![
            emb("g-b", Modality::B, vec![1.0, 0.0], 0.0),
            emb("g-a", Modality::B, vec![1.0, 0.0], 0.0),
            emb("g-c", Modality::B, vec![2.0, 0.0], 0.0),
        ];
        let spec = SimilaritySpec::closed_form(SimilarityKind::MeanOnly);
        let ranked = retrieve(&[query], &gallery, &spec).unwrap();
        assert_eq!(ranked[0].ids, vec!["g-a", "g-b", "g-c"]);
    }

    #[test]
    fn recall_and_r_precision_basics() {
        let list = RankedList {
            query_id: "q".into(),
            ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            scores: vec![0.1, 0.2, 0.3, 0.4],
        };
        let positives: BTreeSet<String> = ["a".to_string(), "c".to_string()].into();
        assert!(recall_at_k(&list, &positives, 1).unwrap());
        let only_d: BTreeSet<String> = ["d".to_string()].into();
        // positive only at rank 4: R@3 = 0
        assert!(!recall_at_k(&list, &only_d, 3).unwrap());
        assert!(recall_at_k(&list, &positives, 9).is_err());
        // positives at ranks 1 and 3: R-P over r = 2 counts one hit
        assert_eq!(r_precision(&list, &positives).unwrap(), 0.5);
        // all positives before negatives gives 1.0
        let front: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        assert_eq!(r_precision(&list, &front).unwrap(), 1.0);
        assert!(r_precision(&list, &BTreeSet::new()).is_err());
    }

    #[test]
    fn pmrp_uniform_attributes_is_one() {
        let lists = vec![RankedList {
            query_id: "q".into(),
            ids: vec!["a".into(), "b".into()],
            scores: vec![0.0, 1.0],
        }];
        let mut attrs = BTreeMap::new();
        for id in ["q", "a", "b"] {
            attrs.insert(id.to_string(), vec![1, 0, 1]);
        }
        let report = pmrp(&lists, &attrs, &[0, 1, 2]).unwrap();
        assert_eq!(report.mean, 1.0);
        for z in &report.per_zeta {
            assert_eq!(z.value, 1.0);
            assert_eq!(z.excluded_queries, 0);
        }
    }

    #[test]
    fn pmrp_excludes_and_counts_empty_positive_sets() {
        let lists = vec![
            RankedList {
                query_id: "q1".into(),
                ids: vec!["a".into(), "b".into()],
                scores: vec![0.0, 1.0],
            },
            RankedList {
                query_id: "q2".into(),
                ids: vec!["a".into(), "b".into()],
                scores: vec![0.0, 1.0],
            },
        ];
        let mut attrs = BTreeMap::new();
        attrs.insert("q1".to_string(), vec![1, 1, 1, 1]);
        attrs.insert("q2".to_string(), vec![0, 0, 0, 0]);
        attrs.insert("a".to_string(), vec![1, 1, 1, 1]);
        attrs.insert("b".to_string(), vec![1, 1, 1, 0]);
        let report = pmrp(&lists, &attrs, &[0]).unwrap();
        // q2 has nothing within Hamming 0
        assert_eq!(report.per_zeta[0].included_queries, 1);
        assert_eq!(report.per_zeta[0].excluded_queries, 1);
        assert_eq!(report.per_zeta[0].value, 1.0);
    }

    #[test]
    fn pmrp_mean_is_mean_of_per_zeta() {
        let lists = vec![RankedList {
            query_id: "q".into(),
            ids: vec!["a".into(), "b".into(), "c".into()],
            scores: vec![0.0, 1.0, 2.0],
        }];
        let mut attrs = BTreeMap::new();
        attrs.insert("q".to_string(), vec![1, 1, 0, 0]);
        attrs.insert("a".to_string(), vec![1, 1, 0, 0]);
        attrs.insert("b".to_string(), vec![1, 0, 1, 0]);
        attrs.insert("c".to_string(), vec![0, 0, 1, 1]);
        let report = pmrp(&lists, &attrs, &[0, 2]).unwrap();
        let by_hand =
            report.per_zeta.iter().map(|z| z.value).sum::<f64>() / report.per_zeta.len() as f64;
        assert_eq!(report.mean, by_hand);
    }

    #[test]
    fn bins_single_bin_is_overall_mean() {
        let rows: Vec<QueryPerformance> = (0..7)
            .map(|i| QueryPerformance {
                id: format!("q{i}"),
                uncertainty: 0.1 * i as f64,
                r1: f64::from(i % 2 == 0),
            })
            .collect();
        let bins = uncertainty_bins(&rows, 1).unwrap();
        assert_eq!(bins.len(), 1);
        let mean = rows.iter().map(|r| r.r1).sum::<f64>() / rows.len() as f64;
        assert!((bins[0].mean_r1 - mean).abs() < 1e-15);
    }

    #[test]
    fn bins_remainder_goes_to_earliest() {
        let rows: Vec<QueryPerformance> = (0..7)
            .map(|i| QueryPerformance {
                id: format!("q{i}"),
                uncertainty: i as f64,
                r1: 1.0,
            })
            .collect();
        let bins = uncertainty_bins(&rows, 3).unwrap();
        // sizes 3, 2, 2
        assert!((bins[0].mean_uncertainty - 1.0).abs() < 1e-15);
        assert!((bins[1].mean_uncertainty - 3.5).abs() < 1e-15);
        assert!((bins[2].mean_uncertainty - 5.5).abs() < 1e-15);
    }

    #[test]
    fn bins_tie_break_by_id() {
        let rows = vec![
            QueryPerformance {
                id: "b".into(),
                uncertainty: 1.0,
                r1: 0.0,
            },
            QueryPerformance {
                id: "a".into(),
                uncertainty: 1.0,
                r1: 1.0,
            },
        ];
        let bins = uncertainty_bins(&rows, 2).unwrap();
        // id "a" sorts first
        assert_eq!(bins[0].mean_r1, 1.0);
        assert_eq!(bins[1].mean_r1, 0.0);
    }

    #[test]
    fn bins_require_enough_queries() {
        let rows = vec![QueryPerformance {
            id: "a".into(),
            uncertainty: 1.0,
            r1: 1.0,
        }];
        assert!(uncertainty_bins(&rows, 2).is_err());
    }

    #[test]
    fn ranking_invariant_under_affine_transforms() {
        let ids: Vec<String> = (0..6).map(|i| format!("g{i}")).collect();
        let scores = vec![0.4, -1.2, 3.3, 0.0, 2.2, -0.7];
        let base = rank_gallery("q", &ids, &scores, true);
        for (scale, shift) in [(2.0, 0.0), (0.5, 3.0), (10.0, -5.0)] {
            let transformed: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
            let ranked = rank_gallery("q", &ids, &transformed, true);
            assert_eq!(base.ids, ranked.ids);
        }
    }
}
