//! End-to-end experiment pipeline: corpus generation, refinement profiles,
//! meta-model fitting, prediction, controller runs and reports.
//!
//! Everything lives under the configured output directory:
//!
//! ```text
//! corpus/<name>/manifest.json, <id>.json
//! profiles/<name>/manifest.json, <id>.csv, <id>.profile.json, <id>.policy.json
//! solutions/<id>.solution.json
//! models/model-d<degree>.json
//! predictions/<name>/<id>.prediction.json, <id>.prediction.csv
//! control/<id>.trace.csv, <id>.series.csv, <id>.summary.txt, <id>.svg
//! report.json, report.txt
//! ```
//!
//! Files are written to a temporary sibling and renamed into place.

mod commands;
mod config;
mod report;
mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::InfluenceDiagram;

pub use commands::{
    cmd_control, cmd_fit, cmd_generate, cmd_predict, cmd_refine, cmd_solve, ControlOutcome, Prediction,
    PredictionRow, RefineOutcome, RefineTarget, SolveOutcome, SERIES_HEADER,
};
pub use config::{ControlConfig, CorpusConfig, ExperimentConfig, FitConfig, RefineConfig, Split};
pub use report::{cmd_report, AggregateRow, ModelColumn, ProblemReport, Report, Stat};
pub use svg::line_chart;

/// Per-purpose seed derived from the master seed.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}/{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a diagram and rejects it unless it is well-formed.
pub fn load_diagram(path: &Path) -> Result<InfluenceDiagram> {
    let d = InfluenceDiagram::load(path)?;
    let report = crate::model::validate(&d);
    if !report.is_valid() {
        return Err(Error::parse(path, report.errors.join("; ")));
    }
    Ok(d)
}

/// Files in `dir` whose names end with `suffix`, sorted by name.
pub(crate) fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// File name with `suffix` removed.
pub(crate) fn stem_of(path: &Path, suffix: &str) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    name.strip_suffix(suffix).unwrap_or(name).to_string()
}
