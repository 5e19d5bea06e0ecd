//! Undirected attributed graphs, perturbation overlays and graph statistics.
//!
//! Degrees reported by [`GraphView::degree`] are *structural*: they never count the
//! implicit self-loop. Aggregation weights use `degree + 1` so that every node
//! aggregates itself, which is the convention of [`normalized_adjacency`].

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng, Stream};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// An undirected link between two nodes.
pub type Link = (usize, usize);

/// Read access shared by clean graphs and perturbed overlays.
pub trait GraphView<T: Scalar> {
    fn node_count(&self) -> usize;
    /// Structural degree, self-loop excluded.
    fn degree(&self, u: usize) -> usize;
    fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_;
    fn has_edge(&self, u: usize, v: usize) -> bool;
    fn features(&self) -> &CsrMatrix<T>;
    fn labels(&self) -> &[usize];
    fn class_count(&self) -> usize;

    fn edge_count(&self) -> usize {
        (0..self.node_count())
            .map(|u| self.degree(u))
            .sum::<usize>()
            / 2
    }
}

/// Immutable undirected graph with sorted compressed adjacency, node features and labels.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
    features: CsrMatrix<T>,
    labels: Vec<usize>,
    class_count: usize,
    original_ids: Vec<usize>,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph from an undirected edge list in which each link appears once.
    ///
    /// Self-loops, duplicate links (in either orientation), out-of-range endpoints,
    /// labels outside `0..class_count` and a feature row count different from `n`
    /// are rejected.
    pub fn new(
        n: usize,
        edges: &[Link],
        features: CsrMatrix<T>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((u, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= class_count) {
            return Err(Error::InvalidGraph(format!(
                "node {u} has label {c} but there are {class_count} classes"
            )));
        }
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for (u, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({u}, {})",
                    w[0]
                )));
            }
            adjacency.extend(list);
            offsets.push(adjacency.len());
        }
        Ok(Graph {
            offsets,
            adjacency,
            features,
            labels,
            class_count,
            original_ids: (0..n).collect(),
        })
    }

    pub fn neighbor_slice(&self, u: usize) -> &[usize] {
        &self.adjacency[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Each undirected edge once, as `(min, max)`, in ascending order.
    pub fn edges(&self) -> Vec<Link> {
        (0..self.node_count())
            .flat_map(|u| {
                self.neighbor_slice(u)
                    .iter()
                    .filter(move |&&v| v > u)
                    .map(move |&v| (u, v))
            })
            .collect()
    }

    /// Id of each node in the graph this one was extracted from.
    pub fn original_ids(&self) -> &[usize] {
        &self.original_ids
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_count() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    pub fn with_features(mut self, features: CsrMatrix<T>) -> Result<Self> {
        if features.rows() != self.node_count() {
            return Err(Error::InvalidGraph("feature row count changed".into()));
        }
        self.features = features;
        Ok(self)
    }

    /// Overlay view of this graph with extra links; see [`DeltaGraph`].
    pub fn with_added_edges(&self, links: &[Link]) -> Result<DeltaGraph<'_, T>> {
        DeltaGraph::new(self, links)
    }

    /// Renumbers the nodes: node `u` of `self` becomes node `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        if perm.len() != n {
            return Err(Error::InvalidGraph("permutation length".into()));
        }
        let mut inverse = vec![usize::MAX; n];
        for (u, &p) in perm.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            inverse[p] = u;
        }
        let edges: Vec<Link> = self
            .edges()
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        let rows = inverse
            .iter()
            .map(|&old| {
                let (idx, vals) = self.features.row(old);
                idx.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        let features = CsrMatrix::from_rows(self.features.cols(), rows)?;
        let labels = inverse.iter().map(|&old| self.labels[old]).collect();
        let mut g = Graph::new(n, &edges, features, labels, self.class_count)?;
        g.original_ids = inverse.iter().map(|&old| self.original_ids[old]).collect();
        Ok(g)
    }
}

impl<T: Scalar> GraphView<T> for Graph<T> {
    fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_slice(u).iter().copied()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.neighbor_slice(u).binary_search(&v).is_ok()
    }

    fn features(&self) -> &CsrMatrix<T> {
        &self.features
    }

    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn class_count(&self) -> usize {
        self.class_count
    }

    fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }
}

/// A clean graph plus a short ordered list of added links.
///
/// Construction is linear in the number of added links; the base graph is
/// never copied.
#[derive(Debug, Clone)]
pub struct DeltaGraph<'a, T> {
    base: &'a Graph<T>,
    added: Vec<Link>,
}

impl<'a, T: Scalar> DeltaGraph<'a, T> {
    pub fn new(base: &'a Graph<T>, links: &[Link]) -> Result<Self> {
        let n = base.node_count();
        for (i, &(u, v)) in links.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidLink(u, v, "endpoint out of range".into()));
            }
            if u == v {
                return Err(Error::InvalidLink(u, v, "self-loop".into()));
            }
            if base.has_edge(u, v) {
                return Err(Error::InvalidLink(u, v, "already an edge".into()));
            }
            if links[..i]
                .iter()
                .any(|&(a, b)| (a == u && b == v) || (a == v && b == u))
            {
                return Err(Error::InvalidLink(u, v, "added twice".into()));
            }
        }
        Ok(DeltaGraph {
            base,
            added: links.to_vec(),
        })
    }

    pub fn base(&self) -> &'a Graph<T> {
        self.base
    }

    pub fn added(&self) -> &[Link] {
        &self.added
    }

    fn added_partners(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.added.iter().filter_map(move |&(a, b)| {
            if a == u {
                Some(b)
            } else if b == u {
                Some(a)
            } else {
                None
            }
        })
    }
}

impl<T: Scalar> GraphView<T> for DeltaGraph<'_, T> {
    fn node_count(&self) -> usize {
        self.base.node_count()
    }

    fn degree(&self, u: usize) -> usize {
        self.base.degree(u) + self.added_partners(u).count()
    }

    fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.base.neighbors(u).chain(self.added_partners(u))
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.base.has_edge(u, v) || self.added_partners(u).any(|w| w == v)
    }

    fn features(&self) -> &CsrMatrix<T> {
        self.base.features()
    }

    fn labels(&self) -> &[usize] {
        self.base.labels()
    }

    fn class_count(&self) -> usize {
        self.base.class_count()
    }

    fn edge_count(&self) -> usize {
        self.base.edge_count() + self.added.len()
    }
}

/// Symmetrically normalised adjacency with self-loops:
/// entry `(u, v)` is `1 / sqrt((deg(u) + 1)(deg(v) + 1))` for `v` adjacent to `u` or `v = u`.
pub fn normalized_adjacency<T: Scalar, G: GraphView<T>>(g: &G) -> CsrMatrix<T> {
    let n = g.node_count();
    let inv_sqrt: Vec<T> = (0..n)
        .map(|u| T::one() / T::of((g.degree(u) + 1) as f64).sqrt())
        .collect();
    let rows = (0..n)
        .map(|u| {
            std::iter::once(u)
                .chain(g.neighbors(u))
                .map(|v| (v, inv_sqrt[u] * inv_sqrt[v]))
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(n, rows).expect("adjacency rows are well formed")
}

/// Fraction of `u`'s structural neighbours that share its label.
pub fn homophily<T: Scalar, G: GraphView<T>>(g: &G, u: usize) -> Result<f64> {
    let deg = g.degree(u);
    if deg == 0 {
        return Err(Error::Undefined(format!("homophily of isolated node {u}")));
    }
    let labels = g.labels();
    let same = g.neighbors(u).filter(|&v| labels[v] == labels[u]).count();
    Ok(same as f64 / deg as f64)
}

/// Connected component containing the most nodes; ties go to the component with the
/// smallest node id. Node ids are compacted in ascending original order and the
/// mapping back to the input ids is kept in [`Graph::original_ids`].
pub fn largest_connected_component<T: Scalar>(g: &Graph<T>) -> Graph<T> {
    let n = g.node_count();
    let mut component = vec![usize::MAX; n];
    let mut best: Option<(usize, usize)> = None;
    let mut queue = VecDeque::new();
    let mut next_id = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next_id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in g.neighbor_slice(u) {
                if component[v] == usize::MAX {
                    component[v] = next_id;
                    queue.push_back(v);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next_id, size));
        }
        next_id += 1;
    }
    let Some((keep, _)) = best else {
        return g.clone();
    };
    let kept: Vec<usize> = (0..n).filter(|&u| component[u] == keep).collect();
    induced_subgraph(g, &kept).expect("component nodes are distinct and in range")
}

/// Subgraph induced by `nodes`, renumbered in the given order. Original ids are
/// carried over into [`Graph::original_ids`].
pub fn induced_subgraph<T: Scalar>(g: &Graph<T>, nodes: &[usize]) -> Result<Graph<T>> {
    let n = g.node_count();
    let mut new_id = vec![usize::MAX; n];
    for (i, &u) in nodes.iter().enumerate() {
        if u >= n {
            return Err(Error::InvalidGraph(format!("node {u} out of range")));
        }
        if new_id[u] != usize::MAX {
            return Err(Error::InvalidGraph(format!("node {u} listed twice")));
        }
        new_id[u] = i;
    }
    let edges: Vec<Link> = g
        .edges()
        .into_iter()
        .filter(|&(u, v)| new_id[u] != usize::MAX && new_id[v] != usize::MAX)
        .map(|(u, v)| (new_id[u], new_id[v]))
        .collect();
    let rows = nodes
        .iter()
        .map(|&u| {
            let (idx, vals) = g.features.row(u);
            idx.iter().copied().zip(vals.iter().copied()).collect()
        })
        .collect();
    let features = CsrMatrix::from_rows(g.features.cols(), rows)?;
    let labels = nodes.iter().map(|&u| g.labels[u]).collect();
    let mut out = Graph::new(nodes.len(), &edges, features, labels, g.class_count)?;
    out.original_ids = nodes.iter().map(|&u| g.original_ids[u]).collect();
    Ok(out)
}

/// True when every node is reachable from node 0.
pub fn is_connected<T: Scalar>(g: &Graph<T>) -> bool {
    let n = g.node_count();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in g.neighbor_slice(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Disjoint train / validation / test node sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitMask {
    pub fn node_count(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Seeded random split. Train and validation sizes are `round(n · fraction)`;
/// the test set takes the remainder. Each set is returned sorted.
pub fn random_split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitMask> {
    let (tr, va, te) = fractions;
    if [tr, va, te].iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidSplit(format!(
            "fractions must be positive, got {fractions:?}"
        )));
    }
    if ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSplit(format!(
            "fractions must sum to 1, got {}",
            tr + va + te
        )));
    }
    let n_train = (n as f64 * tr).round() as usize;
    let n_val = (n as f64 * va).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidSplit(format!(
            "split of {n} nodes leaves an empty set ({n_train}, {n_val})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed, Stream::Split));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitMask {
        train,
        validation,
        test,
        seed,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn triangle_counts() {
        let g = triangle();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!((0..3).all(|u| g.degree(u) == 2));
    }

    #[test]
    fn rejects_bad_edges_and_labels() {
        let f = || CsrMatrix::<f64>::zeros(3, 1);
        assert!(Graph::new(3, &[(0, 0)], f(), vec![0; 3], 1).is_err());
        assert!(Graph::new(3, &[(0, 1), (1, 0)], f(), vec![0; 3], 1).is_err());
        assert!(Graph::new(3, &[(0, 3)], f(), vec![0; 3], 1).is_err());
        assert!(Graph::new(3, &[], f(), vec![0, 1, 2], 2).is_err());
        assert!(Graph::new(4, &[], f(), vec![0; 4], 1).is_err());
    }

    #[test]
    fn lcc_picks_one_triangle() {
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
        let g = graph(7, &edges, vec![0; 7], 1);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.node_count(), 3);
        assert_eq!(lcc.edge_count(), 3);
        assert_eq!(lcc.original_ids(), &[0, 1, 2]);
        assert!(is_connected(&lcc));
    }

    #[test]
    fn lcc_of_connected_graph_is_identity() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], vec![0, 1, 0, 1], 2);
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.edges(), g.edges());
        assert_eq!(lcc.labels(), g.labels());
        assert_eq!(lcc.features(), g.features());
    }

    #[test]
    fn lcc_of_empty_graph_is_empty() {
        let g = graph(0, &[], vec![], 1);
        assert_eq!(largest_connected_component(&g).node_count(), 0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = random_split(10, (0.1, 0.1, 0.8), 0).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1, 1, 8));
        assert_eq!(s, random_split(10, (0.1, 0.1, 0.8), 0).unwrap());
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        assert!(random_split(4, (0.1, 0.1, 0.8), 0).is_err());
        assert!(random_split(100, (0.0, 0.2, 0.8), 0).is_err());
        assert!(random_split(100, (0.3, 0.3, 0.3), 0).is_err());
    }

    #[test]
    fn normalized_adjacency_entries() {
        let isolated = graph(1, &[], vec![0], 1);
        assert_eq!(normalized_adjacency(&isolated).get(0, 0), 1.0);

        let pair = graph(2, &[(0, 1)], vec![0, 0], 1);
        let a = normalized_adjacency(&pair);
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((a.get(r, c) - 0.5).abs() < 1e-15);
        }

        let path = graph(3, &[(0, 1), (1, 2)], vec![0; 3], 1);
        let a = normalized_adjacency(&path);
        assert!((a.get(1, 0) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(1, 0) - 0.4082).abs() < 1e-4);
        assert_eq!(a.row(1).0.len(), 3);
    }

    #[test]
    fn regular_graph_rows_sum_to_one() {
        let cycle: Vec<Link> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let g = graph(6, &cycle, vec![0; 6], 1);
        let a = normalized_adjacency(&g);
        for r in 0..6 {
            let s: f64 = a.row(r).1.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn homophily_examples() {
        let star = graph(4, &[(0, 1), (0, 2), (0, 3)], vec![1, 1, 1, 1], 2);
        assert_eq!(homophily(&star, 0).unwrap(), 1.0);
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], vec![0, 0, 1, 1, 1], 2);
        assert_eq!(homophily(&star, 0).unwrap(), 0.25);
        let lonely = graph(2, &[], vec![0, 0], 1);
        assert!(homophily(&lonely, 0).is_err());
    }

    #[test]
    fn delta_graph_overlay() {
        let g = graph(4, &[(0, 1), (1, 2)], vec![0; 4], 1);
        let same = g.with_added_edges(&[]).unwrap();
        for u in 0..4 {
            assert_eq!(same.degree(u), g.degree(u));
        }
        let d = g.with_added_edges(&[(0, 3)]).unwrap();
        assert_eq!(d.degree(0), 2);
        assert_eq!(d.degree(3), 1);
        assert!(d.has_edge(3, 0));
        assert_eq!(d.edge_count(), 3);
        assert!(g.with_added_edges(&[(0, 3), (3, 0)]).is_err());
        assert!(g.with_added_edges(&[(0, 1)]).is_err());
        assert!(g.with_added_edges(&[(2, 2)]).is_err());
    }

    #[test]
    fn permutation_relabels_consistently() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], vec![0, 1, 0, 1], 2);
        let p = g.permuted(&[3, 2, 1, 0]).unwrap();
        assert!(p.has_edge(3, 2));
        assert_eq!(p.labels(), &[1, 0, 1, 0]);
        assert_eq!(p.features().get(3, 0), 1.0);
        assert_eq!(p.original_ids(), &[3, 2, 1, 0]);
    }
}
