//! Command implementations.

use std::collections::BTreeSet;
use std::path::Path;

use probemb::datagen::{generate, DatasetConfig};
use probemb::eval::{
    corruption_sweep, evaluate_direction, retrieve_with_stats, uncertainty_bins, QueryPerformance,
    SimilarityKind, SimilaritySpec,
};
use probemb::io::{
    read_dataset, read_embeddings, read_model, write_atomic, write_csv, write_dataset,
    write_embeddings, write_model, FileMeta,
};
use probemb::trainer::{embed_dataset, LossKind, MatchInit, TrainConfig, TrainMode};
use probemb::{GaussianEmbedding, Modality};

use crate::resolve::{parse_list, pick, ConfigMap};
use crate::{
    AnalyzeArgs, CliError, EmbedArgs, EvalArgs, GenDataArgs, RetrieveArgs, TrainArgs,
};

fn parse_mode(text: &str) -> Result<TrainMode, CliError> {
    match text {
        "prob" => Ok(TrainMode::Probabilistic),
        "mu-only" => Ok(TrainMode::MuOnly),
        other => Err(CliError::Validation(format!(
            "--mode must be prob or mu-only, got {other:?}"
        ))),
    }
}

fn parse_loss(text: &str) -> Result<LossKind, CliError> {
    match text {
        "soft" => Ok(LossKind::SoftContrastive),
        "mil" => Ok(LossKind::Mil),
        "triplet" => Ok(LossKind::TripletHnm),
        other => Err(CliError::Validation(format!(
            "--loss must be soft, mil, or triplet, got {other:?}"
        ))),
    }
}

fn parse_match_init(text: &str) -> Result<MatchInit, CliError> {
    match text {
        "small" => Ok(MatchInit::Small),
        "large" => Ok(MatchInit::Large),
        other => Err(CliError::Validation(format!(
            "--match-init must be small or large, got {other:?}"
        ))),
    }
}

fn parse_metric(text: &str) -> Result<SimilarityKind, CliError> {
    text.parse::<SimilarityKind>()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn split_by_modality(embeddings: &[GaussianEmbedding], modality: Modality) -> Vec<GaussianEmbedding> {
    embeddings
        .iter()
        .filter(|e| e.modality() == modality)
        .cloned()
        .collect()
}

pub fn gen_data(args: GenDataArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(
        args.config.as_deref(),
        &[
            "classes",
            "items",
            "feature-dim",
            "attr-dim",
            "noise",
            "ambiguity",
            "seed",
            "out",
        ],
    )?;
    let classes = pick(args.classes, cfg.usize_value("classes")?, Some(3), "classes")?;
    let items = pick(args.items, cfg.usize_value("items")?, Some(20), "items")?;
    let feature_dim = pick(
        args.feature_dim,
        cfg.usize_value("feature-dim")?,
        Some(32),
        "feature-dim",
    )?;
    let attr_dim = pick(args.attr_dim, cfg.usize_value("attr-dim")?, Some(8), "attr-dim")?;
    let noise = pick(args.noise, cfg.f64_value("noise")?, Some(0.05), "noise")?;
    let ambiguity = pick(args.ambiguity, cfg.f64_value("ambiguity")?, Some(0.0), "ambiguity")?;
    let seed = pick(args.seed, cfg.u64_value("seed")?, None, "seed")?;
    let out = pick(args.out, cfg.string_value("out")?, None, "out")?;

    let dataset = generate(&DatasetConfig {
        num_classes: classes,
        items_per_class_per_modality: items,
        feature_dim,
        attribute_dim: attr_dim,
        noise_sigma: noise,
        ambiguity_fraction: ambiguity,
        seed,
    })?;
    write_dataset(Path::new(&out), &dataset, &FileMeta::new(invocation))?;
    Ok(())
}

pub fn train(args: TrainArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(
        args.config.as_deref(),
        &[
            "data",
            "mode",
            "loss",
            "batch",
            "samples",
            "epochs",
            "lr",
            "lambda-kl",
            "lambda-unif",
            "seed",
            "out",
            "embed-dim",
            "momentum",
            "margin",
            "match-init",
        ],
    )?;
    let data = pick(args.data, cfg.string_value("data")?, None, "data")?;
    let mode = parse_mode(&pick(
        args.mode,
        cfg.string_value("mode")?,
        Some("prob".into()),
        "mode",
    )?)?;
    let loss_kind = parse_loss(&pick(
        args.loss,
        cfg.string_value("loss")?,
        Some("soft".into()),
        "loss",
    )?)?;
    let match_init = parse_match_init(&pick(
        args.match_init,
        cfg.string_value("match-init")?,
        Some("small".into()),
        "match-init",
    )?)?;
    let config = TrainConfig {
        batch_size: pick(args.batch, cfg.usize_value("batch")?, Some(8), "batch")?,
        samples: pick(args.samples, cfg.usize_value("samples")?, Some(7), "samples")?,
        epochs: pick(args.epochs, cfg.usize_value("epochs")?, Some(200), "epochs")?,
        learning_rate: pick(args.lr, cfg.f64_value("lr")?, Some(0.08), "lr")?,
        momentum: pick(args.momentum, cfg.f64_value("momentum")?, Some(0.9), "momentum")?,
        lambda_kl: pick(
            args.lambda_kl,
            cfg.f64_value("lambda-kl")?,
            Some(1e-3),
            "lambda-kl",
        )?,
        lambda_unif: pick(
            args.lambda_unif,
            cfg.f64_value("lambda-unif")?,
            Some(0.0),
            "lambda-unif",
        )?,
        seed: pick(args.seed, cfg.u64_value("seed")?, None, "seed")?,
        mode,
        loss_kind,
        margin: pick(args.margin, cfg.f64_value("margin")?, Some(0.2), "margin")?,
        embed_dim: pick(
            args.embed_dim,
            cfg.usize_value("embed-dim")?,
            Some(16),
            "embed-dim",
        )?,
        match_init,
    };
    let out = pick(args.out, cfg.string_value("out")?, None, "out")?;

    let dataset = read_dataset(Path::new(&data))?;
    let (model, _history) = probemb::trainer::train(&dataset, &config)?;
    write_model(Path::new(&out), &model, &config, &FileMeta::new(invocation))?;
    Ok(())
}

pub fn embed(args: EmbedArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(args.config.as_deref(), &["model", "data", "out"])?;
    let model_path = pick(args.model, cfg.string_value("model")?, None, "model")?;
    let data = pick(args.data, cfg.string_value("data")?, None, "data")?;
    let out = pick(args.out, cfg.string_value("out")?, None, "out")?;

    let (model, _) = read_model(Path::new(&model_path))?;
    let dataset = read_dataset(Path::new(&data))?;
    let embeddings = embed_dataset(&model, &dataset)?;
    write_embeddings(Path::new(&out), &embeddings, &FileMeta::new(invocation))?;
    Ok(())
}

/// Build a similarity spec, requiring a seed exactly when the kind samples.
fn build_spec(
    kind: SimilarityKind,
    samples: usize,
    seed: Option<u64>,
) -> Result<SimilaritySpec, CliError> {
    if kind.is_sampled() {
        let seed = seed.ok_or_else(|| {
            CliError::Validation(format!(
                "--seed is required for the sampled metric {:?}",
                kind.as_str()
            ))
        })?;
        Ok(SimilaritySpec::sampled(kind, samples, seed))
    } else {
        Ok(SimilaritySpec::closed_form(kind))
    }
}

pub fn retrieve(args: RetrieveArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(
        args.config.as_deref(),
        &["queries", "gallery", "metric", "samples", "seed", "topk", "out"],
    )?;
    let queries_path = pick(args.queries, cfg.string_value("queries")?, None, "queries")?;
    let gallery_path = pick(args.gallery, cfg.string_value("gallery")?, None, "gallery")?;
    let kind = parse_metric(&pick(args.metric, cfg.string_value("metric")?, None, "metric")?)?;
    let samples = pick(args.samples, cfg.usize_value("samples")?, Some(7), "samples")?;
    let seed = args.seed.or(cfg.u64_value("seed")?);
    let topk = args.topk.or(cfg.usize_value("topk")?);
    let out = pick(args.out, cfg.string_value("out")?, None, "out")?;
    let spec = build_spec(kind, samples, seed)?;

    let query_dump = read_embeddings(Path::new(&queries_path))?;
    let gallery_dump = read_embeddings(Path::new(&gallery_path))?;
    // rank every query against the opposite-modality side of the gallery
    // dump; emit results in the query file's order
    let mut by_query: std::collections::BTreeMap<String, probemb::eval::RankedList> =
        std::collections::BTreeMap::new();
    for (q_mod, g_mod) in [(Modality::A, Modality::B), (Modality::B, Modality::A)] {
        let queries = split_by_modality(&query_dump, q_mod);
        if queries.is_empty() {
            continue;
        }
        let gallery = split_by_modality(&gallery_dump, g_mod);
        if gallery.is_empty() {
            return Err(CliError::Validation(format!(
                "gallery has no modality-{} items for the modality-{} queries",
                g_mod.as_str(),
                q_mod.as_str()
            )));
        }
        let (ranked, _) = retrieve_with_stats(&queries, &gallery, &spec)?;
        for list in ranked {
            by_query.insert(list.query_id.clone(), list);
        }
    }
    let mut ranked: Vec<probemb::eval::RankedList> = query_dump
        .iter()
        .map(|q| by_query.remove(q.id()).expect("every query was ranked"))
        .collect();
    if let Some(k) = topk {
        if k == 0 {
            return Err(CliError::Validation("--topk must be at least 1".into()));
        }
        for list in &mut ranked {
            list.ids.truncate(k);
            list.scores.truncate(k);
        }
    }
    let mut text = String::new();
    text.push_str(&serde_json::to_string(&serde_json::json!({
        "meta": FileMeta::new(invocation)
    })).map_err(probemb::Error::from)?);
    text.push('\n');
    for list in &ranked {
        text.push_str(&serde_json::to_string(list).map_err(probemb::Error::from)?);
        text.push('\n');
    }
    write_atomic(Path::new(&out), &text).map_err(CliError::from)?;
    Ok(())
}

pub fn eval(args: EvalArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(
        args.config.as_deref(),
        &["queries", "gallery", "data", "metric", "zeta", "samples", "seed", "out"],
    )?;
    let queries_path = pick(args.queries, cfg.string_value("queries")?, None, "queries")?;
    let gallery_path = pick(args.gallery, cfg.string_value("gallery")?, None, "gallery")?;
    let data = pick(args.data, cfg.string_value("data")?, None, "data")?;
    let kind = parse_metric(&pick(
        args.metric,
        cfg.string_value("metric")?,
        Some("mean".into()),
        "metric",
    )?)?;
    let zeta_text = pick(args.zeta, cfg.string_value("zeta")?, Some("0,1,2".into()), "zeta")?;
    let zetas = parse_list(&zeta_text, "zeta", |s| s.parse::<usize>().ok())?;
    let samples = pick(args.samples, cfg.usize_value("samples")?, Some(7), "samples")?;
    let seed = args.seed.or(cfg.u64_value("seed")?);
    let out = pick(args.out, cfg.string_value("out")?, None, "out")?;
    let spec = build_spec(kind, samples, seed)?;

    let query_dump = read_embeddings(Path::new(&queries_path))?;
    let gallery_dump = read_embeddings(Path::new(&gallery_path))?;
    let dataset = read_dataset(Path::new(&data))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut evaluated = 0usize;
    for (direction, q_mod, g_mod) in [
        ("a2b", Modality::A, Modality::B),
        ("b2a", Modality::B, Modality::A),
    ] {
        let queries = split_by_modality(&query_dump, q_mod);
        let gallery = split_by_modality(&gallery_dump, g_mod);
        if queries.is_empty() || gallery.is_empty() {
            continue;
        }
        let report = evaluate_direction(direction, &queries, &gallery, &dataset, &spec, &zetas)?;
        evaluated += 1;
        for (k, value) in &report.recall_at {
            rows.push(vec![
                direction.into(),
                "recall".into(),
                k.to_string(),
                value.to_string(),
            ]);
        }
        rows.push(vec![
            direction.into(),
            "r_precision".into(),
            "-".into(),
            report.r_precision.to_string(),
        ]);
        for z in &report.pmrp.per_zeta {
            rows.push(vec![
                direction.into(),
                "pmrp".into(),
                z.zeta.to_string(),
                z.value.to_string(),
            ]);
        }
        rows.push(vec![
            direction.into(),
            "pmrp".into(),
            "mean".into(),
            report.pmrp.mean.to_string(),
        ]);
        for z in &report.pmrp.per_zeta {
            rows.push(vec![
                direction.into(),
                "pmrp_excluded".into(),
                z.zeta.to_string(),
                z.excluded_queries.to_string(),
            ]);
        }
        rows.push(vec![
            direction.into(),
            "mean_query_uncertainty".into(),
            "-".into(),
            report.mean_query_uncertainty.to_string(),
        ]);
    }
    if evaluated == 0 {
        return Err(CliError::Validation(
            "no retrieval direction has both queries and gallery items".into(),
        ));
    }
    write_csv(Path::new(&out), invocation, "direction,metric,zeta_or_k,value", &rows)?;
    Ok(())
}

pub fn analyze(args: AnalyzeArgs, invocation: &str) -> Result<(), CliError> {
    let cfg = ConfigMap::load(
        args.config.as_deref(),
        &["model", "data", "embeddings", "bins", "ratios", "seed", "out"],
    )?;
    let model_path = pick(args.model, cfg.string_value("model")?, None, "model")?;
    let data = pick(args.data, cfg.string_value("data")?, None, "data")?;
    let embeddings_path = pick(
        args.embeddings,
        cfg.string_value("embeddings")?,
        None,
        "embeddings",
    )?;
    let bins = pick(args.bins, cfg.usize_value("bins")?, Some(10), "bins")?;
    let ratio_text = pick(
        args.ratios,
        cfg.string_value("ratios")?,
        Some("0,0.25,0.5,0.75".into()),
        "ratios",
    )?;
    let ratios = parse_list(&ratio_text, "ratios", |s| s.parse::<f64>().ok())?;
    let seed = pick(args.seed, cfg.u64_value("seed")?, None, "seed")?;
    let out_dir = pick(args.out, cfg.string_value("out")?, None, "out")?;

    let (model, train_config) = read_model(Path::new(&model_path))?;
    let dataset = read_dataset(Path::new(&data))?;
    let dump = read_embeddings(Path::new(&embeddings_path))?;

    // per-query R@1 under the trained match probability, both directions
    // pooled
    let spec = SimilaritySpec::sampled(
        SimilarityKind::MatchProbSampled,
        train_config.samples,
        seed,
    )
    .with_match_params(*model.match_params());
    let mut performances: Vec<QueryPerformance> = Vec::new();
    for (q_mod, g_mod) in [(Modality::A, Modality::B), (Modality::B, Modality::A)] {
        let queries = split_by_modality(&dump, q_mod);
        let gallery = split_by_modality(&dump, g_mod);
        if queries.is_empty() || gallery.is_empty() {
            continue;
        }
        let (ranked, _) = retrieve_with_stats(&queries, &gallery, &spec)?;
        for (query, list) in queries.iter().zip(&ranked) {
            let q_class = dataset
                .get(query.id())
                .ok_or_else(|| {
                    probemb::Error::InvalidArgument(format!(
                        "embedding {:?} is not in the dataset",
                        query.id()
                    ))
                })?
                .class_id;
            let positives: BTreeSet<String> = list
                .ids
                .iter()
                .filter(|id| dataset.get(id).is_some_and(|item| item.class_id == q_class))
                .cloned()
                .collect();
            let r1 = f64::from(!positives.is_empty() && positives.contains(&list.ids[0]));
            performances.push(QueryPerformance {
                id: query.id().to_string(),
                uncertainty: query.uncertainty(),
                r1,
            });
        }
    }
    if performances.is_empty() {
        return Err(CliError::Validation(
            "embedding dump holds no usable query/gallery split".into(),
        ));
    }
    let bin_rows = uncertainty_bins(&performances, bins)?;
    let sweep_rows = corruption_sweep(&model, &dataset, &ratios, seed)?;

    std::fs::create_dir_all(&out_dir).map_err(probemb::Error::from)?;
    let bins_csv: Vec<Vec<String>> = bin_rows
        .iter()
        .map(|b| {
            vec![
                b.bin.to_string(),
                b.mean_uncertainty.to_string(),
                b.mean_r1.to_string(),
            ]
        })
        .collect();
    write_csv(
        &Path::new(&out_dir).join("bins.csv"),
        invocation,
        "bin,mean_uncertainty,mean_r1",
        &bins_csv,
    )?;
    let sweep_csv: Vec<Vec<String>> = sweep_rows
        .iter()
        .map(|r| vec![r.ratio.to_string(), r.mean_sigma.to_string()])
        .collect();
    write_csv(
        &Path::new(&out_dir).join("corruption.csv"),
        invocation,
        "ratio,mean_sigma",
        &sweep_csv,
    )?;
    Ok(())
}
