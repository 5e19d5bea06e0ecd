use log::debug;
use ndarray::{Array2, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Hyperparams, ModelKind, ProbMatrix, TrainedModel};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph, GraphView, SplitMask};
use crate::rng::{rng, Stream};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

const LOG_FLOOR: f64 = -50.0;

/// Full-batch training objective: mean cross-entropy over the training nodes plus
/// `weight_decay / 2 · Σ‖W‖²`.
struct Objective<'a, T> {
    kind: ModelKind,
    features: &'a CsrMatrix<T>,
    adj: CsrMatrix<T>,
    /// `Â^K X` for SGC, which makes the SGC objective a linear model.
    propagated: Option<CsrMatrix<T>>,
    train: &'a [usize],
    labels: &'a [usize],
    weight_decay: T,
}

struct Evaluation<T> {
    loss: T,
    grads: Vec<Array2<T>>,
}

impl<'a, T: Scalar> Objective<'a, T> {
    fn new(
        kind: ModelKind,
        g: &'a Graph<T>,
        train: &'a [usize],
        hops: usize,
        weight_decay: f64,
    ) -> Self {
        let adj = normalized_adjacency(g);
        let propagated = (kind == ModelKind::Sgc).then(|| {
            let mut s = adj.mul_sparse(g.features());
            for _ in 1..hops {
                s = adj.mul_sparse(&s);
            }
            s
        });
        Objective {
            kind,
            features: g.features(),
            adj,
            propagated,
            train,
            labels: g.labels(),
            weight_decay: T::of(weight_decay),
        }
    }

    fn logits(&self, weights: &[Array2<T>]) -> Array2<T> {
        match self.kind {
            ModelKind::Gcn => {
                let mut h = self.adj.mul_dense(&self.features.mul_dense(&weights[0]));
                h.mapv_inplace(|x| x.max(T::zero()));
                self.adj.mul_dense(&h).dot(&weights[1])
            }
            ModelKind::Sgc => self
                .propagated
                .as_ref()
                .expect("SGC operator")
                .mul_dense(&weights[0]),
        }
    }

    /// Cross-entropy part of the loss and its gradient with respect to the logits.
    fn cross_entropy(&self, logits: &Array2<T>) -> (T, Array2<T>) {
        let scale = T::one() / T::of(self.train.len() as f64);
        let mut grad = Array2::zeros(logits.raw_dim());
        let mut loss = T::zero();
        for &u in self.train {
            let row = logits.row(u);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let log_total = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
            let log_p = row[self.labels[u]] - log_total;
            if log_p < T::of(LOG_FLOOR) {
                loss = loss - T::of(LOG_FLOOR) * scale;
                continue;
            }
            loss = loss - log_p * scale;
            let mut g = grad.row_mut(u);
            for (c, &x) in row.iter().enumerate() {
                g[c] = (x - log_total).exp() * scale;
            }
            g[self.labels[u]] = g[self.labels[u]] - scale;
        }
        (loss, grad)
    }

    fn regularizer(&self, weights: &[Array2<T>]) -> T {
        let half = T::of(0.5) * self.weight_decay;
        weights
            .iter()
            .map(|w| w.iter().map(|&x| x * x).sum::<T>())
            .sum::<T>()
            * half
    }

    /// Loss and gradients; `dropout` holds the scaled keep-mask of the hidden layer.
    fn evaluate(&self, weights: &[Array2<T>], dropout: Option<&Array2<T>>) -> Evaluation<T> {
        let reg = self.regularizer(weights);
        match self.kind {
            ModelKind::Gcn => {
                let projected = self.features.mul_dense(&weights[0]);
                let pre = self.adj.mul_dense(&projected);
                let mut hidden = pre.mapv(|x| x.max(T::zero()));
                if let Some(mask) = dropout {
                    hidden = hidden * mask;
                }
                let aggregated = self.adj.mul_dense(&hidden);
                let logits = aggregated.dot(&weights[1]);
                let (ce, d_logits) = self.cross_entropy(&logits);

                let mut d_w2 = aggregated.t().dot(&d_logits);
                d_w2.scaled_add(self.weight_decay, &weights[1]);
                let d_aggregated = d_logits.dot(&weights[1].t());
                let mut d_hidden = self.adj.mul_dense(&d_aggregated);
                if let Some(mask) = dropout {
                    d_hidden = d_hidden * mask;
                }
                Zip::from(&mut d_hidden).and(&pre).for_each(|d, &p| {
                    if p <= T::zero() {
                        *d = T::zero();
                    }
                });
                let d_projected = self.adj.mul_dense(&d_hidden);
                let mut d_w1 = self.features.transpose_mul_dense(&d_projected);
                d_w1.scaled_add(self.weight_decay, &weights[0]);
                Evaluation {
                    loss: ce + reg,
                    grads: vec![d_w1, d_w2],
                }
            }
            ModelKind::Sgc => {
                let s = self.propagated.as_ref().expect("SGC operator");
                let logits = s.mul_dense(&weights[0]);
                let (ce, d_logits) = self.cross_entropy(&logits);
                let mut d_w = s.transpose_mul_dense(&d_logits);
                d_w.scaled_add(self.weight_decay, &weights[0]);
                Evaluation {
                    loss: ce + reg,
                    grads: vec![d_w],
                }
            }
        }
    }
}

fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.random_range(-limit..limit)))
}

struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    first: Vec<Array2<T>>,
    second: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    fn new(lr: f64, shapes: &[Array2<T>]) -> Self {
        Adam {
            lr: T::of(lr),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            first: shapes.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            second: shapes.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }

    fn update(&mut self, weights: &mut [Array2<T>], grads: &[Array2<T>]) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for ((w, g), (m, v)) in weights
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *w = *w - self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            });
        }
    }
}

fn check_split<T: Scalar>(g: &Graph<T>, split: &SplitMask) -> Result<()> {
    let n = g.node_count();
    if split.node_count() != n
        || split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .any(|&u| u >= n)
    {
        return Err(Error::InvalidSplit(format!(
            "split does not cover the {n} graph nodes"
        )));
    }
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::InvalidSplit("empty train or validation set".into()));
    }
    Ok(())
}

/// Trains a model of the given kind with Adam on the full graph.
///
/// Returns the weights of the epoch with the best validation accuracy (ties go to
/// the lower validation loss). Training stops once neither validation accuracy nor
/// validation loss has improved for `patience` epochs.
pub fn train<T: Scalar>(
    kind: ModelKind,
    g: &Graph<T>,
    split: &SplitMask,
    hp: &Hyperparams,
) -> Result<TrainedModel<T>> {
    hp.validate(kind)?;
    check_split(g, split)?;
    let mut rng = rng(hp.seed, Stream::Training);
    let d = g.feature_dim();
    let c = g.class_count();
    let mut weights = match kind {
        ModelKind::Gcn => vec![
            glorot(d, hp.hidden_dim, &mut rng),
            glorot(hp.hidden_dim, c, &mut rng),
        ],
        ModelKind::Sgc => vec![glorot(d, c, &mut rng)],
    };
    let objective = Objective::new(kind, g, &split.train, hp.layers, hp.weight_decay);
    let val_objective = Objective {
        train: &split.validation,
        ..Objective::new(kind, g, &split.validation, hp.layers, 0.0)
    };
    let mut adam = Adam::new(hp.learning_rate, &weights);
    let keep = 1.0 - hp.dropout;
    let n = g.node_count();

    let mut best_weights = weights.clone();
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_val_loss = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..hp.max_epochs {
        let mask = (kind == ModelKind::Gcn && hp.dropout > 0.0).then(|| {
            let scale = T::of(1.0 / keep);
            Array2::from_shape_simple_fn((n, hp.hidden_dim), || {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            })
        });
        let eval = objective.evaluate(&weights, mask.as_ref());
        let loss = eval.loss.as_f64();
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        adam.update(&mut weights, &eval.grads);

        let logits = objective.logits(&weights);
        let val_loss = val_objective.cross_entropy(&logits).0.as_f64();
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: val_loss,
            });
        }
        let z = ProbMatrix::from_logits(logits);
        let val_acc = z.accuracy(&split.validation, g.labels())?;
        let mut improved = false;
        if val_acc > best.0 || (val_acc == best.0 && val_loss < best.1) {
            best = (val_acc, val_loss);
            best_weights = weights.clone();
            improved = true;
        }
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            improved = true;
        }
        stale = if improved { 0 } else { stale + 1 };
        debug!("{kind} epoch {epoch}: loss {loss:.4} val_loss {val_loss:.4} val_acc {val_acc:.4}");
        if stale >= hp.patience {
            break;
        }
    }

    let z = ProbMatrix::from_logits(objective.logits(&best_weights));
    let mut model = TrainedModel::from_weights(kind, best_weights, hp.clone())?;
    model.train_accuracy = z.accuracy(&split.train, g.labels())?;
    model.val_accuracy = z.accuracy(&split.validation, g.labels())?;
    Ok(model)
}

pub fn train_gcn<T: Scalar>(
    g: &Graph<T>,
    split: &SplitMask,
    hp: &Hyperparams,
) -> Result<TrainedModel<T>> {
    train(ModelKind::Gcn, g, split, hp)
}

pub fn train_sgc<T: Scalar>(
    g: &Graph<T>,
    split: &SplitMask,
    hp: &Hyperparams,
) -> Result<TrainedModel<T>> {
    train(ModelKind::Sgc, g, split, hp)
}

/// Training loss of `m` (dropout off) and its analytic gradient per weight matrix.
pub fn loss_and_gradients<T: Scalar>(
    m: &TrainedModel<T>,
    g: &Graph<T>,
    split: &SplitMask,
) -> Result<(T, Vec<Array2<T>>)> {
    check_split(g, split)?;
    let objective = Objective::new(
        m.kind,
        g,
        &split.train,
        m.hops(),
        m.hyperparams.weight_decay,
    );
    let eval = objective.evaluate(&m.weights, None);
    Ok((eval.loss, eval.grads))
}

/// Largest relative disagreement between the analytic gradient and a central
/// finite difference with step `1e-5`, over up to 400 evenly spaced weight entries.
///
/// Relative error is `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)`; the floor
/// keeps round-off in near-zero gradients from dominating. Meaningful in `f64`.
pub fn gradient_check<T: Scalar>(
    m: &TrainedModel<T>,
    g: &Graph<T>,
    split: &SplitMask,
) -> Result<f64> {
    const EPS: f64 = 1e-5;
    const MAX_ENTRIES: usize = 400;
    check_split(g, split)?;
    let objective = Objective::new(
        m.kind,
        g,
        &split.train,
        m.hops(),
        m.hyperparams.weight_decay,
    );
    let analytic = objective.evaluate(&m.weights, None).grads;
    let total: usize = m.weights.iter().map(|w| w.len()).sum();
    let stride = total.div_ceil(MAX_ENTRIES).max(1);
    let mut weights = m.weights.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    for layer in 0..weights.len() {
        let (rows, cols) = weights[layer].dim();
        for r in 0..rows {
            for c in 0..cols {
                flat += 1;
                if (flat - 1) % stride != 0 {
                    continue;
                }
                let original = weights[layer][[r, c]];
                weights[layer][[r, c]] = original + T::of(EPS);
                let plus = objective.evaluate(&weights, None).loss.as_f64();
                weights[layer][[r, c]] = original - T::of(EPS);
                let minus = objective.evaluate(&weights, None).loss.as_f64();
                weights[layer][[r, c]] = original;
                let numeric = (plus - minus) / (2.0 * EPS);
                let exact = analytic[layer][[r, c]].as_f64();
                worst =
                    worst.max((exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6));
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::forward;
    use crate::graph::{fixtures, random_split};
    use crate::sparse::CsrMatrix;
    use rand::SeedableRng;

    /// Two 5-cliques joined by one link; features are one-hot class indicators.
    fn two_cliques() -> Graph<f64> {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((4, 5));
        let labels: Vec<usize> = (0..10).map(|u| u / 5).collect();
        let rows = labels.iter().map(|&c| vec![(c, 1.0)]).collect();
        Graph::new(
            10,
            &edges,
            CsrMatrix::from_rows(2, rows).unwrap(),
            labels,
            2,
        )
        .unwrap()
    }

    fn split_for(n: usize) -> SplitMask {
        random_split(n, (0.4, 0.2, 0.4), 7).unwrap()
    }

    #[test]
    fn separable_toy_reaches_full_train_accuracy() {
        let g = two_cliques();
        let split = split_for(10);
        let gcn = train_gcn(
            &g,
            &split,
            &Hyperparams {
                dropout: 0.0,
                ..Hyperparams::gcn_default()
            },
        )
        .unwrap();
        assert_eq!(gcn.train_accuracy, 1.0);
        let sgc = train_sgc(&g, &split, &Hyperparams::sgc_default()).unwrap();
        assert_eq!(sgc.train_accuracy, 1.0);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let g = two_cliques();
        let split = split_for(10);
        let hp = Hyperparams::gcn_default().with_seed(9);
        let a = train_gcn(&g, &split, &hp).unwrap();
        let b = train_gcn(&g, &split, &hp).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let g = two_cliques();
        let split = split_for(10);
        let hp = Hyperparams {
            learning_rate: 1e300,
            dropout: 0.0,
            ..Hyperparams::gcn_default()
        };
        match train_gcn(&g, &split, &hp) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 200),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = two_cliques();
        let split = split_for(10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = TrainedModel::from_weights(
            ModelKind::Gcn,
            vec![glorot::<f64>(2, 6, &mut rng), glorot(6, 2, &mut rng)],
            Hyperparams::gcn_default(),
        )
        .unwrap();
        assert!(gradient_check(&m, &g, &split).unwrap() < 1e-4);
        let sgc = TrainedModel::from_weights(
            ModelKind::Sgc,
            vec![glorot::<f64>(2, 2, &mut rng)],
            Hyperparams::sgc_default(),
        )
        .unwrap();
        assert!(gradient_check(&sgc, &g, &split).unwrap() < 1e-4);
    }

    #[test]
    fn zero_model_gradient_matches_oracle() {
        let g = fixtures::graph(
            10,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (4, 5),
                (5, 6),
                (7, 8),
                (8, 9),
                (3, 4),
            ],
            (0..10).map(|u| u % 3).collect(),
            3,
        );
        let split = split_for(10);
        let m = TrainedModel::from_weights(
            ModelKind::Gcn,
            vec![Array2::zeros((10, 4)), Array2::zeros((4, 3))],
            Hyperparams::gcn_default(),
        )
        .unwrap();
        assert!(gradient_check(&m, &g, &split).unwrap() < 1e-4);
        let (loss, _) = loss_and_gradients(&m, &g, &split).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn objective_logits_agree_with_forward() {
        let g = two_cliques();
        let split = split_for(10);
        let m = train_gcn(&g, &split, &Hyperparams::gcn_default()).unwrap();
        let objective = Objective::new(ModelKind::Gcn, &g, &split.train, 2, 0.0);
        let a = objective.logits(&m.weights);
        let b = forward::logits(&m, &g).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}
