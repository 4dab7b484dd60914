//! On-disk documents written and read by the commands.

use std::path::{Path, PathBuf};

use gpm_core::energy::{Labeling, Slice, VideoLabels};
use gpm_core::gpm::Solution;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Planted labeling written next to a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub labeling: Labeling,
    pub segment_sizes: Vec<u64>,
    pub n_labels: usize,
}

/// Solver output without the trace, which goes to its own file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub labeling: Labeling,
    pub slice: Slice,
    pub video: VideoLabels,
    pub converged: bool,
    pub iterations: usize,
}

impl From<&Solution> for SolutionFile {
    fn from(s: &Solution) -> Self {
        SolutionFile {
            labeling: s.labeling.clone(),
            slice: s.slice.clone(),
            video: s.video.clone(),
            converged: s.converged,
            iterations: s.iterations,
        }
    }
}

/// Any document with a `labeling` field: solutions and truth files.
#[derive(Deserialize)]
struct AnyLabeling {
    labeling: Labeling,
}

pub fn read_labeling(path: &Path) -> Result<Labeling, CliError> {
    read_json::<AnyLabeling>(path).map(|d| d.labeling)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_pretty(value))
}

/// `dir/name.json` -> `dir/name.<suffix>.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("instance");
    let stem = name.strip_suffix(".json").unwrap_or(name);
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

/// Output documents of other commands, skipped when solving a directory.
pub fn is_derived(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    [".truth.json", ".solution.json", ".trace.json"]
        .iter()
        .any(|s| name.ends_with(s))
}
