use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::{ModelKind, ProbMatrix, TrainedModel};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, DeltaGraph, Graph, GraphView, Link};
use crate::scalar::{softmax, Scalar};

fn check_dims<T: Scalar, G: GraphView<T>>(m: &TrainedModel<T>, g: &G) -> Result<()> {
    if g.features().cols() != m.feature_dim() {
        return Err(Error::Dimension(format!(
            "graph has {} features, model expects {}",
            g.features().cols(),
            m.feature_dim()
        )));
    }
    Ok(())
}

/// Pre-softmax output for every node of `g` (clean graph or overlay).
pub fn logits<T: Scalar, G: GraphView<T>>(m: &TrainedModel<T>, g: &G) -> Result<Array2<T>> {
    check_dims(m, g)?;
    let adj = normalized_adjacency(g);
    let mut h = g.features().mul_dense(&m.weights[0]);
    match m.kind {
        ModelKind::Gcn => {
            h = adj.mul_dense(&h);
            h.mapv_inplace(|x| x.max(T::zero()));
            Ok(adj.mul_dense(&h).dot(&m.weights[1]))
        }
        ModelKind::Sgc => {
            for _ in 0..m.hops() {
                h = adj.mul_dense(&h);
            }
            Ok(h)
        }
    }
}

/// Class probabilities for every node of `g`.
pub fn forward<T: Scalar, G: GraphView<T>>(m: &TrainedModel<T>, g: &G) -> Result<ProbMatrix<T>> {
    Ok(ProbMatrix::from_logits(logits(m, g)?))
}

/// Single-node inference on perturbed views of one clean graph.
///
/// Caches the feature projection and the clean first propagation step, then
/// recomputes only the terms whose normalisation changes when links are added.
/// The cost of one query is proportional to the summed degree of the target and
/// of the added links' endpoints, independent of the graph size.
#[derive(Debug, Clone)]
pub struct LocalForward<'a, T> {
    model: &'a TrainedModel<T>,
    graph: &'a Graph<T>,
    projected: Array2<T>,
    propagated: Array2<T>,
    inv_sqrt: Vec<T>,
}

impl<'a, T: Scalar> LocalForward<'a, T> {
    pub fn new(model: &'a TrainedModel<T>, graph: &'a Graph<T>) -> Result<Self> {
        check_dims(model, graph)?;
        if model.hops() > 2 {
            return Err(Error::Config(
                "local inference supports at most 2 hops".into(),
            ));
        }
        let projected = graph.features().mul_dense(&model.weights[0]);
        let adj = normalized_adjacency(graph);
        let propagated = adj.mul_dense(&projected);
        let inv_sqrt = (0..graph.node_count())
            .map(|u| T::one() / T::of((graph.degree(u) + 1) as f64).sqrt())
            .collect();
        Ok(LocalForward {
            model,
            graph,
            projected,
            propagated,
            inv_sqrt,
        })
    }

    pub fn model(&self) -> &'a TrainedModel<T> {
        self.model
    }

    pub fn graph(&self) -> &'a Graph<T> {
        self.graph
    }

    /// Logits of `u` on the clean graph with `added` links, which must be valid
    /// additions (see [`DeltaGraph::new`]).
    pub fn logits(&self, u: usize, added: &[Link]) -> Result<Vec<T>> {
        DeltaGraph::new(self.graph, added)?;
        Ok(self.logits_unchecked(u, added))
    }

    pub fn probabilities(&self, u: usize, added: &[Link]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(u, added)?))
    }

    /// As [`Self::probabilities`] for links already validated by the caller.
    pub(crate) fn probabilities_unchecked(&self, u: usize, added: &[Link]) -> Vec<T> {
        softmax(&self.logits_unchecked(u, added))
    }

    fn logits_unchecked(&self, u: usize, added: &[Link]) -> Vec<T> {
        let g = self.graph;
        let mut extra: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in added {
            *extra.entry(a).or_default() += 1;
            *extra.entry(b).or_default() += 1;
        }
        let inv_sqrt_new = |x: usize| -> T {
            match extra.get(&x) {
                Some(&k) => T::one() / T::of((g.degree(x) + k + 1) as f64).sqrt(),
                None => self.inv_sqrt[x],
            }
        };
        let partners = |x: usize| {
            added.iter().filter_map(move |&(a, b)| {
                if a == x {
                    Some(b)
                } else if b == x {
                    Some(a)
                } else {
                    None
                }
            })
        };
        let width = self.projected.ncols();

        // First propagation step for one node under the perturbation, from scratch.
        let full_step = |v: usize| -> Array1<T> {
            let sv = inv_sqrt_new(v);
            let mut acc = Array1::zeros(width);
            for w in std::iter::once(v).chain(g.neighbors(v)).chain(partners(v)) {
                acc.scaled_add(sv * inv_sqrt_new(w), &self.projected.row(w));
            }
            acc
        };

        let needed: Vec<usize> = if self.model.hops() == 1 {
            vec![u]
        } else {
            std::iter::once(u)
                .chain(g.neighbors(u))
                .chain(partners(u))
                .collect()
        };
        let slot: BTreeMap<usize, usize> =
            needed.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut step: Vec<Array1<T>> = needed
            .iter()
            .map(|&v| {
                if extra.contains_key(&v) {
                    full_step(v)
                } else {
                    self.propagated.row(v).to_owned()
                }
            })
            .collect();
        // Unperturbed nodes only see the re-weighting of neighbours whose degree grew.
        for &w in extra.keys() {
            let delta = inv_sqrt_new(w) - self.inv_sqrt[w];
            for x in g.neighbors(w) {
                if extra.contains_key(&x) {
                    continue;
                }
                if let Some(&i) = slot.get(&x) {
                    step[i].scaled_add(self.inv_sqrt[x] * delta, &self.projected.row(w));
                }
            }
        }

        if self.model.hops() == 1 {
            return step.swap_remove(0).to_vec();
        }
        let su = inv_sqrt_new(u);
        let mut out = Array1::zeros(width);
        for (i, &v) in needed.iter().enumerate() {
            let coef = su * inv_sqrt_new(v);
            match self.model.kind {
                ModelKind::Gcn => out.scaled_add(coef, &step[i].mapv(|x| x.max(T::zero()))),
                ModelKind::Sgc => out.scaled_add(coef, &step[i]),
            }
        }
        match self.model.kind {
            ModelKind::Gcn => out.dot(&self.model.weights[1]).to_vec(),
            ModelKind::Sgc => out.to_vec(),
        }
    }
}
