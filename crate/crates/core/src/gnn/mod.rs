//! Graph convolutional models: a two-layer GCN surrogate and an SGC victim,
//! trained from scratch with hand-written backpropagation.
//!
//! * GCN: `softmax(Â · ReLU(Â X W1) · W2)`
//! * SGC: `softmax(Â^K X W)` with `K = layers` (2 by default)
//!
//! `Â` is [`normalized_adjacency`](crate::graph::normalized_adjacency).

mod forward;
mod io;
mod train;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

pub use forward::{forward, logits, LocalForward};
pub use io::{load_model, read_model, save_model, write_model};
pub use train::{gradient_check, loss_and_gradients, train, train_gcn, train_sgc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Gcn,
    Sgc,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gcn => "GCN",
            ModelKind::Sgc => "SGC",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GCN" => Ok(ModelKind::Gcn),
            "SGC" => Ok(ModelKind::Sgc),
            _ => Err(Error::Config(format!("unknown model `{s}` (GCN, SGC)"))),
        }
    }
}

/// Training configuration.
///
/// For SGC, `layers` is the number of propagation steps and `hidden_dim` is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub hidden_dim: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::gcn_default()
    }
}

impl Hyperparams {
    pub fn gcn_default() -> Self {
        Hyperparams {
            hidden_dim: 16,
            layers: 2,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            max_epochs: 200,
            patience: 30,
            seed: 0,
        }
    }

    pub fn sgc_default() -> Self {
        Hyperparams {
            hidden_dim: 0,
            layers: 2,
            learning_rate: 0.2,
            weight_decay: 1e-5,
            dropout: 0.0,
            max_epochs: 200,
            patience: 30,
            seed: 0,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => Self::gcn_default(),
            ModelKind::Sgc => Self::sgc_default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        match kind {
            ModelKind::Gcn if self.layers != 2 => {
                return Err(Error::Config("GCN has exactly 2 layers".into()))
            }
            ModelKind::Gcn if self.hidden_dim == 0 => {
                return Err(Error::Config("hidden_dim must be at least 1".into()))
            }
            ModelKind::Sgc if !(1..=2).contains(&self.layers) => {
                return Err(Error::Config(
                    "SGC supports 1 or 2 propagation steps".into(),
                ))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience exceeds max_epochs".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "learning rate must be positive, weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub kind: ModelKind,
    pub weights: Vec<Array2<T>>,
    pub hyperparams: Hyperparams,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

impl<T: Scalar> TrainedModel<T> {
    /// Model with explicit weights, checked for shape chaining and finiteness.
    pub fn from_weights(
        kind: ModelKind,
        weights: Vec<Array2<T>>,
        hyperparams: Hyperparams,
    ) -> Result<Self> {
        let expected = match kind {
            ModelKind::Gcn => 2,
            ModelKind::Sgc => 1,
        };
        if weights.len() != expected {
            return Err(Error::Dimension(format!(
                "{kind} takes {expected} weight matrices, got {}",
                weights.len()
            )));
        }
        for pair in weights.windows(2) {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::Dimension(format!(
                    "weight shapes {:?} and {:?} do not chain",
                    pair[0].dim(),
                    pair[1].dim()
                )));
            }
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite weight".into()));
        }
        Ok(TrainedModel {
            kind,
            weights,
            hyperparams,
            train_accuracy: f64::NAN,
            val_accuracy: f64::NAN,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn class_count(&self) -> usize {
        self.weights.last().expect("at least one layer").ncols()
    }

    /// Number of propagation steps through `Â`.
    pub fn hops(&self) -> usize {
        match self.kind {
            ModelKind::Gcn => 2,
            ModelKind::Sgc => self.hyperparams.layers,
        }
    }

    pub fn cast<U: Scalar>(&self) -> TrainedModel<U> {
        TrainedModel {
            kind: self.kind,
            weights: self
                .weights
                .iter()
                .map(|w| w.mapv(|x| U::of(x.as_f64())))
                .collect(),
            hyperparams: self.hyperparams.clone(),
            train_accuracy: self.train_accuracy,
            val_accuracy: self.val_accuracy,
        }
    }
}

/// Row-stochastic model output, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> ProbMatrix<T> {
    /// Wraps a matrix after checking every row is a probability distribution.
    pub fn new(values: Array2<T>) -> Result<Self> {
        let tol = T::of(1e-6);
        for (r, row) in values.outer_iter().enumerate() {
            let sum: T = row.iter().copied().sum();
            if row.iter().any(|&p| p < T::zero() || !p.is_finite()) || (sum - T::one()).abs() > tol
            {
                return Err(Error::Dimension(format!(
                    "row {r} is not a probability vector"
                )));
            }
        }
        Ok(ProbMatrix { values })
    }

    pub(crate) fn from_logits(mut logits: Array2<T>) -> Self {
        for mut row in logits.outer_iter_mut() {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            row.mapv_inplace(|x| (x - max).exp());
            let total: T = row.iter().copied().sum();
            row.mapv_inplace(|x| x / total);
        }
        ProbMatrix { values: logits }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, u: usize) -> ArrayView1<'_, T> {
        self.values.row(u)
    }

    pub fn row_slice(&self, u: usize) -> &[T] {
        self.values
            .row(u)
            .to_slice()
            .expect("probability matrix is stored row-major")
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    /// Class with the highest probability; ties go to the lower class id.
    pub fn predict(&self, u: usize) -> usize {
        argmax(self.row_slice(u))
    }

    /// Index of the second most probable class, using the same tie rule.
    pub fn runner_up(&self, u: usize) -> usize {
        let row = self.row_slice(u);
        let top = argmax(row);
        let mut best: Option<usize> = None;
        for (c, &p) in row.iter().enumerate() {
            if c != top && best.is_none_or(|b| p > row[b]) {
                best = Some(c);
            }
        }
        best.unwrap_or(top)
    }

    /// Fraction of `nodes` whose prediction equals their label.
    pub fn accuracy(&self, nodes: &[usize], labels: &[usize]) -> Result<f64> {
        if nodes.is_empty() {
            return Err(Error::Undefined("accuracy over an empty node set".into()));
        }
        let correct = nodes
            .iter()
            .filter(|&&u| self.predict(u) == labels[u])
            .count();
        Ok(correct as f64 / nodes.len() as f64)
    }
}
