//! Corpus directories, spectra tables, model specs and JSON report framing.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::moments::CorpusSpectra;
use crate::sbm::model::{sample_rpsbm_batch, sample_sbm_batch, RpsbmModel, SbmParams};

/// Version tag carried by every JSON document.
pub const FORMAT_VERSION: u64 = 1;
pub const EDGE_EXT: &str = "edges";

pub fn graph_file_name(index: usize) -> String {
    format!("graph_{index:05}.{EDGE_EXT}")
}

/// Writes graph k to `dir/graph_<k>.edges`, creating `dir` if needed.
pub fn write_corpus(dir: &Path, graphs: &[Graph]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    graphs
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let path = dir.join(graph_file_name(k));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            g.write_edge_list(&mut w)?;
            w.flush()?;
            Ok(path)
        })
        .collect()
}

/// Edge-list files of `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == EDGE_EXT))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!(
            "no .{EDGE_EXT} files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

pub fn read_corpus(dir: &Path) -> Result<Vec<Graph>> {
    corpus_files(dir)?
        .iter()
        .map(Graph::read_edge_list_file)
        .collect()
}

/// CSV with header `graph,lambda1,...,lambdac,density`.
pub fn spectra_csv(cs: &CorpusSpectra) -> String {
    let c = cs.spectra.first().map_or(0, Vec::len);
    let mut out = String::from("graph");
    for i in 1..=c {
        out.push_str(&format!(",lambda{i}"));
    }
    out.push_str(",density\n");
    for (k, (row, d)) in cs.spectra.iter().zip(&cs.densities).enumerate() {
        out.push_str(&k.to_string());
        for x in row {
            out.push_str(&format!(",{x}"));
        }
        out.push_str(&format!(",{d}\n"));
    }
    out
}

/// Serializes `value` as a JSON object carrying `"format": 1`.
pub fn to_framed_json<T: Serialize>(value: &T) -> Result<String> {
    let body = serde_json::to_value(value)?;
    let mut map = serde_json::Map::new();
    map.insert("format".into(), Value::from(FORMAT_VERSION));
    match body {
        Value::Object(obj) => map.extend(obj),
        other => {
            map.insert("data".into(), other);
        }
    }
    Ok(serde_json::to_string_pretty(&Value::Object(map))? + "\n")
}

/// Parses a framed document, rejecting unknown format versions.
pub fn from_framed_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let mut value: Value = serde_json::from_str(text)?;
    if let Value::Object(map) = &mut value {
        match map.remove("format") {
            None => {}
            Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::InvalidArgument(format!(
                    "unsupported format version {v}"
                )));
            }
        }
    }
    Ok(serde_json::from_value(value)?)
}

/// A generative model read from a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Rpsbm(RpsbmModel),
    Sbm(SbmParams),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Rpsbm(m) => m.validate(),
            ModelSpec::Sbm(p) => p.validate(),
        }
    }

    /// `count` graphs and the number of clamped parameter coordinates.
    pub fn sample(&self, n: usize, count: usize, seed: u64) -> Result<(Vec<Graph>, usize)> {
        match self {
            ModelSpec::Rpsbm(m) => sample_rpsbm_batch(m, n, count, seed),
            ModelSpec::Sbm(p) => Ok((sample_sbm_batch(p, n, count, seed)?, 0)),
        }
    }
}
