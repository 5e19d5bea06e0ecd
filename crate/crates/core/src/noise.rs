//! Link noise: how strongly a prospective link `(u, v)` would disturb the
//! aggregation at target `u`.
//!
//! `dis(u, v)` compares the rows of `u` and `v` in a node representation
//! (the surrogate's softmax output by default). Link noise scales it by the
//! aggregation weight the new link would receive,
//!
//! ```text
//! LN(u, v)  = dis(u, v) / √((deg(u) + 2) · (deg(v) + 2))
//! ALN(u, v) = dis(u, v) / √(deg(v) + 2)
//! ```
//!
//! where `deg` is the structural degree on the clean graph: one `+1` is the
//! self-loop and the other is the link being added. For a fixed target both
//! quantities order candidates identically, so ranking uses ALN.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{ModelKind, ProbMatrix, TrainedModel};
use crate::graph::{normalized_adjacency, Graph, GraphView};
use crate::scalar::Scalar;

/// Floor applied inside the logarithm of the entropy dissimilarity.
pub const LOG_EPS: f64 = 1e-12;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum DissimilarityMetric {
    /// Cross-entropy `−Σ hu·ln hv`; asymmetric, the target row comes first.
    #[default]
    Ent,
    Euc,
    Cos,
}

impl DissimilarityMetric {
    pub const ALL: [DissimilarityMetric; 3] = [Self::Ent, Self::Euc, Self::Cos];
}

impl std::fmt::Display for DissimilarityMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Ent => "ENT",
            Self::Euc => "EUC",
            Self::Cos => "COS",
        })
    }
}

impl FromStr for DissimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ENT" => Ok(Self::Ent),
            "EUC" => Ok(Self::Euc),
            "COS" => Ok(Self::Cos),
            _ => Err(Error::Config(format!(
                "unknown dissimilarity `{s}` (ENT, EUC, COS)"
            ))),
        }
    }
}

/// Which node representation the dissimilarity is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Final softmax output of the surrogate.
    #[default]
    Output,
    /// Hidden layer after ReLU (GCN only).
    Hidden,
}

/// Rows of the chosen representation for every node of the clean graph.
pub fn representation<T: Scalar>(
    m: &TrainedModel<T>,
    g: &Graph<T>,
    repr: Representation,
) -> Result<Array2<T>> {
    match repr {
        Representation::Output => Ok(crate::gnn::forward(m, g)?.values().clone()),
        Representation::Hidden => {
            if m.kind != ModelKind::Gcn {
                return Err(Error::Config("hidden representation needs a GCN".into()));
            }
            if g.feature_dim() != m.feature_dim() {
                return Err(Error::Dimension(
                    "model and graph feature dimensions differ".into(),
                ));
            }
            let adj = normalized_adjacency(g);
            let mut h = adj.mul_dense(&g.features().mul_dense(&m.weights[0]));
            h.mapv_inplace(|x| x.max(T::zero()));
            Ok(h)
        }
    }
}

fn dis_rows<T: Scalar>(
    hu: ArrayView1<'_, T>,
    hv: ArrayView1<'_, T>,
    metric: DissimilarityMetric,
) -> f64 {
    match metric {
        DissimilarityMetric::Ent => hu
            .iter()
            .zip(hv.iter())
            .filter(|(a, _)| **a != T::zero())
            .map(|(a, b)| -a.as_f64() * b.as_f64().max(LOG_EPS).ln())
            .sum(),
        DissimilarityMetric::Euc => hu
            .iter()
            .zip(hv.iter())
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt(),
        DissimilarityMetric::Cos => {
            let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
            for (a, b) in hu.iter().zip(hv.iter()) {
                let (a, b) = (a.as_f64(), b.as_f64());
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if nu == 0.0 || nv == 0.0 {
                return 1.0;
            }
            (1.0 - dot / (nu.sqrt() * nv.sqrt())).max(0.0)
        }
    }
}

/// Dissimilarity between two rows; `hu` is the target's row.
///
/// Zero-probability target entries contribute nothing to ENT, and `hv` is floored
/// at [`LOG_EPS`] inside the logarithm.
pub fn dissimilarity<T: Scalar>(hu: &[T], hv: &[T], metric: DissimilarityMetric) -> Result<f64> {
    if hu.len() != hv.len() {
        return Err(Error::Dimension(format!(
            "rows have {} and {} entries",
            hu.len(),
            hv.len()
        )));
    }
    Ok(dis_rows(ArrayView1::from(hu), ArrayView1::from(hv), metric))
}

fn check_candidate<T: Scalar>(g: &Graph<T>, u: usize, v: usize) -> Result<()> {
    let n = g.node_count();
    if u >= n || v >= n {
        return Err(Error::InvalidLink(u, v, format!("graph has {n} nodes")));
    }
    if u == v {
        return Err(Error::InvalidLink(u, v, "self-loop".into()));
    }
    if g.has_edge(u, v) {
        return Err(Error::InvalidLink(u, v, "already an edge".into()));
    }
    Ok(())
}

fn check_rows<T: Scalar>(g: &Graph<T>, reps: &Array2<T>) -> Result<()> {
    if reps.nrows() != g.node_count() {
        return Err(Error::Dimension(format!(
            "{} representation rows for {} nodes",
            reps.nrows(),
            g.node_count()
        )));
    }
    Ok(())
}

fn aggregation_factor(degree: usize) -> f64 {
    1.0 / ((degree + 2) as f64).sqrt()
}

/// `(dis, LN)` of the prospective link `(u, v)`, `u` being the target.
pub fn link_noise<T: Scalar>(
    g: &Graph<T>,
    z: &ProbMatrix<T>,
    u: usize,
    v: usize,
    metric: DissimilarityMetric,
) -> Result<(f64, f64)> {
    check_rows(g, z.values())?;
    check_candidate(g, u, v)?;
    let dis = dis_rows(z.row(u), z.row(v), metric);
    Ok((
        dis,
        dis * aggregation_factor(g.degree(u)) * aggregation_factor(g.degree(v)),
    ))
}

/// ALN of the prospective link `(u, v)`: LN without the target-side factor.
pub fn appropriate_link_noise<T: Scalar>(
    g: &Graph<T>,
    z: &ProbMatrix<T>,
    u: usize,
    v: usize,
    metric: DissimilarityMetric,
) -> Result<f64> {
    check_rows(g, z.values())?;
    check_candidate(g, u, v)?;
    Ok(dis_rows(z.row(u), z.row(v), metric) * aggregation_factor(g.degree(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub target: usize,
    pub candidate: usize,
    pub dis: f64,
    pub ln: f64,
    pub aln: f64,
}

/// Candidates for one target, ALN descending with ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub target: usize,
    pub metric: DissimilarityMetric,
    pub entries: Vec<NoiseEntry>,
    /// Set when fewer valid candidates existed than were requested.
    pub truncated: bool,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.candidate)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["target", "candidate", "dis", "ln", "aln"])?;
        for e in &self.entries {
            out.serialize((e.target, e.candidate, e.dis, e.ln, e.aln))?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Top `limit` valid links for target `u` by ALN over the output rows `z`.
pub fn rank_candidates<T: Scalar>(
    g: &Graph<T>,
    z: &ProbMatrix<T>,
    u: usize,
    limit: usize,
    metric: DissimilarityMetric,
) -> Result<CandidateList> {
    rank_candidates_by(g, z.values(), u, limit, metric)
}

/// As [`rank_candidates`] over an arbitrary per-node representation.
pub fn rank_candidates_by<T: Scalar>(
    g: &Graph<T>,
    reps: &Array2<T>,
    u: usize,
    limit: usize,
    metric: DissimilarityMetric,
) -> Result<CandidateList> {
    check_rows(g, reps)?;
    if u >= g.node_count() {
        return Err(Error::InvalidLink(
            u,
            u,
            format!("graph has {} nodes", g.node_count()),
        ));
    }
    if limit == 0 {
        return Err(Error::Config("candidate limit must be at least 1".into()));
    }
    let target_factor = aggregation_factor(g.degree(u));
    let hu = reps.row(u);
    let mut entries: Vec<NoiseEntry> = (0..g.node_count())
        .into_par_iter()
        .filter(|&v| v != u && !g.has_edge(u, v))
        .map(|v| {
            let dis = dis_rows(hu, reps.row(v), metric);
            let aln = dis * aggregation_factor(g.degree(v));
            NoiseEntry {
                target: u,
                candidate: v,
                dis,
                ln: aln * target_factor,
                aln,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.aln.total_cmp(&a.aln).then(a.candidate.cmp(&b.candidate)));
    let truncated = entries.len() < limit;
    entries.truncate(limit);
    Ok(CandidateList {
        target: u,
        metric,
        entries,
        truncated,
    })
}
