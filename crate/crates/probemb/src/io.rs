//! File formats: JSON-lines embedding dumps and datasets, model checkpoints,
//! and CSV tables.
//!
//! Every file starts with a metadata record carrying the producing
//! invocation, so results are reproducible from the file alone. For
//! JSON-lines that is a first line of the form `{"meta": {...}}` (readers
//! skip any object with a top-level `meta` key); for CSV a leading
//! `# invocation: ...` comment; checkpoints embed a `meta` field. All writes
//! go through a temp file plus rename.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::datagen::{CrossModalDataset, Item};
use crate::embedding::{GaussianEmbedding, Modality};
use crate::error::{Error, Result};
use crate::trainer::{Model, TrainConfig};

/// Format version written into every file.
pub const FORMAT_VERSION: u32 = 1;

/// Provenance header embedded in every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileMeta {
    pub invocation: String,
    pub version: u32,
}

impl FileMeta {
    pub fn new(invocation: impl Into<String>) -> Self {
        Self {
            invocation: invocation.into(),
            version: FORMAT_VERSION,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: FileMeta,
}

/// Write bytes to `path` atomically (temp file in the same directory, then
/// rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn schema_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    modality: Modality,
    mu: Vec<f64>,
    log_var: Vec<f64>,
}

/// Write an embedding dump: a metadata line followed by one object per
/// embedding with `id`, `modality`, `mu`, `log_var`.
pub fn write_embeddings(
    path: &Path,
    embeddings: &[GaussianEmbedding],
    meta: &FileMeta,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&MetaLine { meta: meta.clone() })?);
    out.push('\n');
    for emb in embeddings {
        let record = EmbeddingRecord {
            id: emb.id().to_string(),
            modality: emb.modality(),
            mu: emb.mu().to_vec(),
            log_var: emb.log_var().to_vec(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    write_atomic(path, &out)
}

fn is_meta_line(value: &serde_json::Value) -> bool {
    value.as_object().is_some_and(|obj| obj.contains_key("meta"))
}

/// Read an embedding dump, skipping metadata lines. Schema violations are
/// reported with their line number.
pub fn read_embeddings(path: &Path) -> Result<Vec<GaussianEmbedding>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| schema_error(path, line_no, format!("invalid JSON: {e}")))?;
        if is_meta_line(&value) {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_value(value)
            .map_err(|e| schema_error(path, line_no, format!("invalid embedding record: {e}")))?;
        let emb = GaussianEmbedding::new(record.id, record.modality, record.mu, record.log_var)
            .map_err(|e| schema_error(path, line_no, e.to_string()))?;
        out.push(emb);
    }
    if out.is_empty() {
        return Err(schema_error(path, 1, "file contains no embedding records"));
    }
    Ok(out)
}

/// Write a dataset dump: a metadata line followed by one object per item.
pub fn write_dataset(path: &Path, dataset: &CrossModalDataset, meta: &FileMeta) -> Result<()> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&MetaLine { meta: meta.clone() })?);
    out.push('\n');
    for item in dataset.items() {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Read a dataset dump, skipping metadata lines.
pub fn read_dataset(path: &Path) -> Result<CrossModalDataset> {
    let text = fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| schema_error(path, line_no, format!("invalid JSON: {e}")))?;
        if is_meta_line(&value) {
            continue;
        }
        let item: Item = serde_json::from_value(value)
            .map_err(|e| schema_error(path, line_no, format!("invalid item record: {e}")))?;
        items.push(item);
    }
    if items.is_empty() {
        return Err(schema_error(path, 1, "file contains no item records"));
    }
    CrossModalDataset::from_items(items).map_err(|e| schema_error(path, 1, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    meta: FileMeta,
    version: u32,
    config: TrainConfig,
    model: Model,
}

/// Save a model checkpoint with the training config echoed alongside.
pub fn write_model(path: &Path, model: &Model, config: &TrainConfig, meta: &FileMeta) -> Result<()> {
    let checkpoint = Checkpoint {
        meta: meta.clone(),
        version: FORMAT_VERSION,
        config: config.clone(),
        model: model.clone(),
    };
    let mut text = serde_json::to_string_pretty(&checkpoint)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Load a model checkpoint, validating shapes and parameter finiteness.
pub fn read_model(path: &Path) -> Result<(Model, TrainConfig)> {
    let text = fs::read_to_string(path)?;
    let checkpoint: Checkpoint =
        serde_json::from_str(&text).map_err(|e| schema_error(path, 1, e.to_string()))?;
    checkpoint
        .model
        .validate()
        .map_err(|e| schema_error(path, 1, e.to_string()))?;
    Ok((checkpoint.model, checkpoint.config))
}

/// Write a CSV table with an invocation comment line and a header row.
pub fn write_csv(path: &Path, invocation: &str, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# invocation: {invocation}\n"));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}
