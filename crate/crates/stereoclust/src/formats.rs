//! On-disk formats: the DVEC embedding exchange format and the model bank
//! document.
//!
//! DVEC is a line-oriented text format that bridges to externally computed
//! speaker embeddings:
//!
//! ```text
//! DVEC v1 dim=<D> method=<MONO|SUM|HSTACK|SUMDIF>
//! speaker_id,index,v1,...,vD
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use stereoclust_core::channel::CombinationMethod;
use stereoclust_core::embed::{EmbedError, EmbeddingSet, EmbeddingVector};
use stereoclust_core::gmm::{FitError, ModelBank, SpeakerModel};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line 1: bad DVEC header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("line {line}: {source}")]
    Embed { line: usize, source: EmbedError },
    #[error("speaker id {0:?} cannot be written: it contains a comma or newline")]
    BadSpeakerId(String),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model document: {0}")]
    Model(#[from] FitError),
}

/// Reads a DVEC stream into a validated [`EmbeddingSet`].
pub fn import_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingSet, FormatError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| FormatError::Header("empty stream".into()))??;
    let (dim, method) = parse_header(&header)?;

    let mut set = EmbeddingSet::new(dim, method);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(FormatError::Row {
                line: line_no,
                message: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        let speaker_id = fields[0].to_string();
        let index: usize = fields[1].parse().map_err(|_| FormatError::Row {
            line: line_no,
            message: format!("cannot parse segment index from {:?}", fields[1]),
        })?;
        let mut values = Vec::with_capacity(dim);
        for field in &fields[2..] {
            let value: f64 = field.parse().map_err(|_| FormatError::Row {
                line: line_no,
                message: format!("cannot parse value from {field:?}"),
            })?;
            values.push(value);
        }
        set.push(EmbeddingVector {
            values,
            speaker_id,
            index,
            method,
        })
        .map_err(|source| FormatError::Embed {
            line: line_no,
            source,
        })?;
    }
    Ok(set)
}

fn parse_header(header: &str) -> Result<(usize, CombinationMethod), FormatError> {
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "DVEC" || parts[1] != "v1" {
        return Err(FormatError::Header(format!(
            "expected 'DVEC v1 dim=<D> method=<M>', got {header:?}"
        )));
    }
    let dim_field = parts[2]
        .strip_prefix("dim=")
        .ok_or_else(|| FormatError::Header(format!("missing dim= in {header:?}")))?;
    let dim: usize = dim_field
        .parse()
        .map_err(|_| FormatError::Header(format!("bad dimension {dim_field:?}")))?;
    if dim == 0 {
        return Err(FormatError::Header("dimension must be positive".into()));
    }
    let method_field = parts[3]
        .strip_prefix("method=")
        .ok_or_else(|| FormatError::Header(format!("missing method= in {header:?}")))?;
    let method: CombinationMethod = method_field
        .parse()
        .map_err(|_| FormatError::Header(format!("unknown method {method_field:?}")))?;
    Ok((dim, method))
}

/// Writes an [`EmbeddingSet`] in canonical DVEC form: values at 17
/// significant digits, one row per vector in entry order.
pub fn export_embeddings<W: Write>(set: &EmbeddingSet, mut writer: W) -> Result<(), FormatError> {
    writeln!(
        writer,
        "DVEC v1 dim={} method={}",
        set.dimension(),
        set.method()
    )?;
    for entry in set.entries() {
        if entry.speaker_id.contains(',') || entry.speaker_id.contains('\n') {
            return Err(FormatError::BadSpeakerId(entry.speaker_id.clone()));
        }
        write!(writer, "{},{}", entry.speaker_id, entry.index)?;
        for value in &entry.values {
            write!(writer, ",{value:.16e}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BankDoc {
    models: Vec<ModelDoc>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    speaker_id: String,
    dimension: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Row-major `dimension * dimension` matrix per component.
    covariances: Vec<Vec<f64>>,
}

/// Serializes a model bank as a JSON document. Floats are written with
/// enough digits to reload bit-exactly.
pub fn save_model_bank<W: Write>(bank: &ModelBank, writer: W) -> Result<(), FormatError> {
    let doc = BankDoc {
        models: bank
            .models()
            .iter()
            .map(|m| ModelDoc {
                speaker_id: m.speaker_id().to_string(),
                dimension: m.dimension(),
                weights: m.weights().to_vec(),
                means: m.means().to_vec(),
                covariances: m.covariances().to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}

/// Reloads a model bank document, revalidating every mixture invariant.
pub fn load_model_bank<R: std::io::Read>(reader: R) -> Result<ModelBank, FormatError> {
    let doc: BankDoc = serde_json::from_reader(reader)?;
    let mut models = Vec::with_capacity(doc.models.len());
    for m in doc.models {
        models.push(SpeakerModel::new(
            m.speaker_id,
            m.weights,
            m.means,
            m.covariances,
        )?);
    }
    Ok(ModelBank::new(models)?)
}

/// Groups a per-method collection of embedding sets into the corpus shape
/// the experiment harness consumes.
pub fn corpus_from_sets(
    sets: &BTreeMap<CombinationMethod, EmbeddingSet>,
) -> BTreeMap<CombinationMethod, BTreeMap<String, Vec<EmbeddingVector>>> {
    sets.iter()
        .map(|(&method, set)| (method, set.by_speaker()))
        .collect()
}
