//! Seeded generator for citation-style benchmark graphs.
//!
//! Produces connected, homophilic graphs with heavy-tailed degrees and sparse
//! bag-of-words features whose node, link, feature and class counts match a
//! [`SyntheticProfile`]. Used when the real citation datasets are not on disk,
//! and for tests that need realistic structure at known scale.
//!
//! Construction:
//! 1. labels are assigned by the profile's class proportions;
//! 2. every node draws a Pareto fitness;
//! 3. nodes arrive in random order and attach to one earlier node, chosen by
//!    fitness among same-class nodes with probability `homophily` and among all
//!    nodes otherwise (a spanning tree, so the graph is connected);
//! 4. the remaining links join fitness-sampled endpoints with the same class bias;
//! 5. each node draws about `words_per_node` binary features, each one from a
//!    Zipf-weighted topical vocabulary with a per-node signal probability and
//!    from a Zipf background distribution otherwise. The topical vocabulary is
//!    the node's own class's, except for a `confusion` fraction of nodes that
//!    use a random other class's.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Link};
use crate::rng::{rng, Stream};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    /// Relative class sizes; the class count is the length of this list.
    pub class_weights: Vec<f64>,
    /// Probability that a generated link is forced to stay inside the class.
    pub homophily: f64,
    /// Tail exponent of the Pareto node fitness; smaller means heavier hubs.
    pub fitness_exponent: f64,
    pub words_per_node: f64,
    /// Words in each class-specific vocabulary.
    pub vocabulary_per_class: usize,
    /// Mean probability that a word is drawn from the node's topical vocabulary.
    pub signal: f64,
    /// Fraction of nodes whose topical vocabulary is that of another, random class.
    #[serde(default)]
    pub confusion: f64,
}

impl SyntheticProfile {
    /// Stand-in with the size of the Cora largest connected component.
    pub fn cora() -> Self {
        SyntheticProfile {
            name: "cora".into(),
            nodes: 2485,
            edges: 5069,
            features: 1433,
            class_weights: vec![298.0, 418.0, 818.0, 426.0, 217.0, 180.0, 351.0],
            homophily: 0.77,
            fitness_exponent: 2.6,
            words_per_node: 18.0,
            vocabulary_per_class: 150,
            signal: 0.5,
            confusion: 0.32,
        }
    }

    /// Stand-in with the size of the Citeseer largest connected component.
    pub fn citeseer() -> Self {
        SyntheticProfile {
            name: "citeseer".into(),
            nodes: 2100,
            edges: 3668,
            features: 3703,
            class_weights: vec![264.0, 590.0, 668.0, 701.0, 596.0, 508.0],
            homophily: 0.72,
            fitness_exponent: 2.7,
            words_per_node: 32.0,
            vocabulary_per_class: 400,
            signal: 0.4,
            confusion: 0.42,
        }
    }

    /// Stand-in with the size of Pubmed.
    pub fn pubmed() -> Self {
        SyntheticProfile {
            name: "pubmed".into(),
            nodes: 19717,
            edges: 44324,
            features: 500,
            class_weights: vec![4103.0, 7739.0, 7875.0],
            homophily: 0.75,
            fitness_exponent: 2.5,
            words_per_node: 50.0,
            vocabulary_per_class: 80,
            signal: 0.3,
            confusion: 0.25,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cora" => Ok(Self::cora()),
            "citeseer" => Ok(Self::citeseer()),
            "pubmed" => Ok(Self::pubmed()),
            other => Err(Error::Config(format!(
                "unknown synthetic profile `{other}`"
            ))),
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_weights.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes;
        if n < 2 || self.class_count() < 2 {
            return Err(Error::Config(
                "profile needs at least 2 nodes and 2 classes".into(),
            ));
        }
        if self.edges < n - 1 || self.edges > n * (n - 1) / 4 {
            return Err(Error::Config(format!(
                "cannot build a connected sparse graph with {n} nodes and {} links",
                self.edges
            )));
        }
        if [self.homophily, self.signal, self.confusion]
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::Config(
                "homophily, signal and confusion must lie in [0, 1]".into(),
            ));
        }
        if self.vocabulary_per_class == 0 || self.vocabulary_per_class > self.features {
            return Err(Error::Config("vocabulary size out of range".into()));
        }
        Ok(())
    }
}

/// Fenwick tree over non-negative weights supporting proportional sampling.
struct WeightTree {
    tree: Vec<f64>,
}

impl WeightTree {
    fn new(len: usize) -> Self {
        WeightTree {
            tree: vec![0.0; len + 1],
        }
    }

    fn add(&mut self, index: usize, weight: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += weight;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut i = self.tree.len() - 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(self.tree.len() - 2)
    }

    fn sample(&self, rng: &mut impl Rng) -> Option<usize> {
        let total = self.total();
        (total > 0.0).then(|| self.find(rng.random::<f64>() * total))
    }
}

/// Generates a graph with raw 0/1 features.
pub fn generate<T: Scalar>(profile: &SyntheticProfile, seed: u64) -> Result<Graph<T>> {
    profile.validate()?;
    let mut rng = rng(seed, Stream::Synthetic);
    let n = profile.nodes;
    let classes = profile.class_count();

    let total_weight: f64 = profile.class_weights.iter().sum();
    let mut labels = Vec::with_capacity(n);
    let mut assigned = 0;
    for (c, w) in profile.class_weights.iter().enumerate() {
        let count = if c + 1 == classes {
            n - assigned
        } else {
            ((w / total_weight) * n as f64).round() as usize
        };
        labels.extend(std::iter::repeat_n(c, count));
        assigned += count;
    }
    labels.shuffle(&mut rng);

    let shape = profile.fitness_exponent - 1.0;
    let fitness: Vec<f64> = (0..n)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / shape).min(n as f64))
        .collect();

    let mut arrival: Vec<usize> = (0..n).collect();
    arrival.shuffle(&mut rng);

    // Trees index nodes by node id; a node only carries weight once it has arrived.
    let mut all = WeightTree::new(n);
    let mut by_class: Vec<WeightTree> = (0..classes).map(|_| WeightTree::new(n)).collect();
    let mut edge_set: HashSet<Link> = HashSet::with_capacity(profile.edges * 2);
    let mut edges = Vec::with_capacity(profile.edges);

    for (i, &u) in arrival.iter().enumerate() {
        if i > 0 {
            let same = rng.random::<f64>() < profile.homophily;
            let v = if same {
                by_class[labels[u]].sample(&mut rng)
            } else {
                None
            }
            .or_else(|| all.sample(&mut rng))
            .expect("at least one node has arrived");
            edge_set.insert((u.min(v), u.max(v)));
            edges.push((u, v));
        }
        all.add(u, fitness[u]);
        by_class[labels[u]].add(u, fitness[u]);
    }

    while edges.len() < profile.edges {
        let u = all.sample(&mut rng).expect("weights are positive");
        let v = if rng.random::<f64>() < profile.homophily {
            by_class[labels[u]].sample(&mut rng)
        } else {
            all.sample(&mut rng)
        }
        .expect("weights are positive");
        if u != v && edge_set.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }

    let d = profile.features;
    let mut pool: Vec<usize> = (0..d).collect();
    let vocabularies: Vec<Vec<usize>> = (0..classes)
        .map(|_| {
            pool.shuffle(&mut rng);
            pool[..profile.vocabulary_per_class].to_vec()
        })
        .collect();
    // Zipf background over a random ranking of the vocabulary.
    pool.shuffle(&mut rng);
    let mut background = WeightTree::new(d);
    for (rank, &word) in pool.iter().enumerate() {
        background.add(word, 1.0 / (rank as f64 + 1.0));
    }
    // Class words are Zipf-distributed too, so a few topical words dominate each class.
    let topical =
        WeightedIndex::new((0..profile.vocabulary_per_class).map(|r| 1.0 / (r as f64 + 1.0)))
            .map_err(|e| Error::Config(format!("vocabulary_per_class: {e}")))?;
    let lengths = Poisson::new(profile.words_per_node - 1.0)
        .map_err(|e| Error::Config(format!("words_per_node: {e}")))?;
    let rows = (0..n)
        .map(|u| {
            let len = 1 + lengths.sample(&mut rng) as usize;
            let signal = (profile.signal * 2.0 * rng.random::<f64>()).min(1.0);
            let topic = if classes > 1 && rng.random::<f64>() < profile.confusion {
                (labels[u] + rng.random_range(1..classes)) % classes
            } else {
                labels[u]
            };
            let vocab = &vocabularies[topic];
            let mut words: Vec<usize> = (0..len)
                .map(|_| {
                    if rng.random::<f64>() < signal {
                        vocab[topical.sample(&mut rng)]
                    } else {
                        background.sample(&mut rng).expect("background weights")
                    }
                })
                .collect();
            words.sort_unstable();
            words.dedup();
            words.into_iter().map(|w| (w, T::one())).collect()
        })
        .collect();
    let features = CsrMatrix::from_rows(d, rows)?;
    Graph::new(n, &edges, features, labels, classes)
}
