//! Plain-text dataset directories.
//!
//! ```text
//! meta.json      {"nodes": n, "features": d, "classes": C}
//! edges.csv      one `u,v` pair per line, 0-based, each undirected link listed once
//! features.csv   n lines of d comma-separated reals
//! labels.csv     n lines, one integer class id each
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphView, Link};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
}

/// On-disk layouts understood by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    #[default]
    PlainText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub format: DatasetFormat,
    /// Reject self-loops and links listed more than once (in either orientation)
    /// instead of silently dropping them.
    pub strict: bool,
    /// Scale each feature row to unit L1 norm.
    pub normalize_features: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: DatasetFormat::PlainText,
            strict: false,
            normalize_features: true,
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .collect()
}

fn parse_usize(s: &str, what: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("{what} line {}: `{s}` is not an index", line + 1)))
}

pub fn load_dataset<T: Scalar>(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<Graph<T>> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::Dataset(format!("meta.json: {e}")))?;

    let labels: Vec<usize> = read_lines(&dir.join("labels.csv"))?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_usize(l, "labels.csv", i))
        .collect::<Result<_>>()?;
    if labels.len() != meta.nodes {
        return Err(Error::Dataset(format!(
            "labels.csv has {} rows, meta.json declares {} nodes",
            labels.len(),
            meta.nodes
        )));
    }
    if let Some((u, c)) = labels.iter().enumerate().find(|(_, &c)| c >= meta.classes) {
        return Err(Error::Dataset(format!(
            "node {u} has label {c} >= {} classes",
            meta.classes
        )));
    }

    let feature_lines = read_lines(&dir.join("features.csv"))?;
    if feature_lines.len() != meta.nodes {
        return Err(Error::Dataset(format!(
            "features.csv has {} rows, meta.json declares {} nodes",
            feature_lines.len(),
            meta.nodes
        )));
    }
    let mut rows = Vec::with_capacity(meta.nodes);
    for (i, line) in feature_lines.iter().enumerate() {
        let mut row = Vec::new();
        let mut width = 0;
        for (c, cell) in line.split(',').enumerate() {
            width += 1;
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "features.csv line {}: `{cell}` is not a real",
                    i + 1
                ))
            })?;
            if v != 0.0 {
                row.push((c, T::of(v)));
            }
        }
        if width != meta.features {
            return Err(Error::Dataset(format!(
                "features.csv line {} has {width} columns, expected {}",
                i + 1,
                meta.features
            )));
        }
        rows.push(row);
    }
    let mut features = CsrMatrix::from_rows(meta.features, rows)?;
    if opts.normalize_features {
        features.row_normalize_l1();
    }

    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in read_lines(&dir.join("edges.csv"))?.iter().enumerate() {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Dataset(format!("edges.csv line {}: expected `u,v`", i + 1)))?;
        let u = parse_usize(a, "edges.csv", i)?;
        let v = parse_usize(b, "edges.csv", i)?;
        if u >= meta.nodes || v >= meta.nodes {
            return Err(Error::Dataset(format!(
                "edges.csv line {}: ({u}, {v}) out of range",
                i + 1
            )));
        }
        if u == v {
            if opts.strict {
                return Err(Error::Dataset(format!(
                    "edges.csv line {}: self-loop on {u}",
                    i + 1
                )));
            }
            continue;
        }
        if !seen.insert((u.min(v), u.max(v))) {
            if opts.strict {
                return Err(Error::Dataset(format!(
                    "edges.csv line {}: ({u}, {v}) listed twice or in both directions",
                    i + 1
                )));
            }
            continue;
        }
        edges.push((u, v));
    }
    Graph::new(meta.nodes, &edges, features, labels, meta.classes)
}

/// Writes `g` in the plain-text layout. Features are written as stored.
pub fn save_dataset<T: Scalar>(g: &Graph<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        nodes: g.node_count(),
        features: g.feature_dim(),
        classes: g.class_count(),
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_string(&meta)?).map_err(|e| Error::io(&meta_path, e))?;

    let write = |name: &str, body: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))
    };
    write("edges.csv", &|w| {
        g.edges()
            .iter()
            .try_for_each(|(u, v): &Link| writeln!(w, "{u},{v}"))
    })?;
    write("labels.csv", &|w| {
        g.labels().iter().try_for_each(|c| writeln!(w, "{c}"))
    })?;
    write("features.csv", &|w| {
        let mut line = String::new();
        for r in 0..g.node_count() {
            line.clear();
            for c in 0..g.feature_dim() {
                if c > 0 {
                    line.push(',');
                }
                let v = g.features().get(r, c);
                if v == T::zero() {
                    line.push('0');
                } else {
                    line.push_str(&v.to_string());
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}
