//! Closed-form checks of the degree and similarity claims on a toy one-layer GCN.
//!
//! Every node's feature is the one-hot vector of its label, every original
//! neighbour of the target shares its label and has degree `⟨d⟩`, and one
//! adversarial node `e` is linked to the target. The target's output is
//!
//! ```text
//! h_u = softmax( N_u · W·μ(Y_u) / √((N_u + 1)·⟨d⟩)  +  W·f_e / √((N_u + 1)(N_e + 1)) )
//! ```
//!
//! with `f_e = s·μ(Y_u) + (1 − s)·μ(Y_e)` for adversary similarity `s` (0 when
//! unspecified). The claims: `h_u[Y_u]` after the attack grows with the target's
//! degree, with the adversary's degree, and with the adversary's similarity.

use std::io::Write;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{train_sgc, Hyperparams};
use crate::graph::{random_split, Graph, GraphView};
use crate::scalar::softmax;
use crate::sparse::CsrMatrix;
use crate::synth::{generate, SyntheticProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `W = I`.
    #[default]
    Identity,
    /// `W` of a one-step SGC trained on a homophilic block graph with one-hot label features.
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySpec {
    pub class_count: usize,
    /// Target degrees swept for the target-degree claim.
    pub target_degrees: Vec<usize>,
    /// Adversary degrees swept for the adversary-degree claim.
    pub adversary_degrees: Vec<usize>,
    /// Degree of every original neighbour, `⟨d⟩`.
    pub mean_degree: f64,
    /// Target degree held fixed while other parameters vary.
    pub fixed_target_degree: usize,
    /// Adversary degree held fixed while other parameters vary.
    pub fixed_adversary_degree: usize,
    pub target_label: usize,
    /// Adversary label; `(target_label + 1) mod C` when unset.
    pub adversary_label: Option<usize>,
    pub similarity_grid: Vec<f64>,
    pub weight_mode: WeightMode,
    /// Seed of the block graph and training in [`WeightMode::Trained`].
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            class_count: 7,
            target_degrees: (1..=10).collect(),
            adversary_degrees: (1..=10).collect(),
            mean_degree: 4.0,
            fixed_target_degree: 2,
            fixed_adversary_degree: 2,
            target_label: 0,
            adversary_label: None,
            similarity_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            weight_mode: WeightMode::Identity,
            seed: 0,
        }
    }
}

impl ToySpec {
    pub fn adversary_label(&self) -> usize {
        self.adversary_label
            .unwrap_or((self.target_label + 1) % self.class_count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config("toy model needs at least 2 classes".into()));
        }
        if self.target_label >= self.class_count || self.adversary_label() >= self.class_count {
            return Err(Error::Config("labels must be below the class count".into()));
        }
        let degrees = self.target_degrees.iter().chain(&self.adversary_degrees);
        if degrees
            .chain([&self.fixed_target_degree, &self.fixed_adversary_degree])
            .any(|&d| d == 0)
        {
            return Err(Error::Config("degrees must be at least 1".into()));
        }
        if self.mean_degree.is_nan() || self.mean_degree < 1.0 {
            return Err(Error::Config("mean degree must be at least 1".into()));
        }
        Ok(())
    }
}

/// Toy weights for `spec`: identity, or trained as described on [`WeightMode::Trained`].
pub fn toy_weights(spec: &ToySpec) -> Result<Array2<f64>> {
    spec.validate()?;
    match spec.weight_mode {
        WeightMode::Identity => Ok(Array2::eye(spec.class_count)),
        WeightMode::Trained => {
            let c = spec.class_count;
            let profile = SyntheticProfile {
                name: "toy-blocks".into(),
                nodes: 60 * c,
                edges: 60 * c * 2,
                features: c,
                class_weights: vec![1.0; c],
                homophily: 0.9,
                fitness_exponent: 3.0,
                words_per_node: 2.0,
                vocabulary_per_class: 1,
                signal: 0.5,
                confusion: 0.0,
            };
            let g: Graph<f64> = generate(&profile, spec.seed)?;
            let rows = g.labels().iter().map(|&y| vec![(y, 1.0)]).collect();
            let g = g.with_features(CsrMatrix::from_rows(c, rows)?)?;
            let split = random_split(g.node_count(), (0.5, 0.25, 0.25), spec.seed)?;
            let hp = Hyperparams {
                layers: 1,
                ..Hyperparams::sgc_default().with_seed(spec.seed)
            };
            let mut m = train_sgc(&g, &split, &hp)?;
            Ok(m.weights.swap_remove(0).reversed_axes())
        }
    }
}

/// Output of the attacked target. `weights` maps features to logits (`C × C`).
pub fn toy_output(
    spec: &ToySpec,
    weights: &Array2<f64>,
    target_degree: usize,
    adversary_degree: usize,
    adversary_label: usize,
    similarity: Option<f64>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let c = spec.class_count;
    if weights.dim() != (c, c) {
        return Err(Error::Dimension(format!("toy weights must be {c}×{c}")));
    }
    if adversary_label >= c {
        return Err(Error::Config(format!(
            "adversary label {adversary_label} >= {c}"
        )));
    }
    let s = similarity.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Config(format!("similarity {s} outside [0, 1]")));
    }
    let nu = target_degree as f64;
    let ne = adversary_degree as f64;
    let mut own = Array1::zeros(c);
    own[spec.target_label] = 1.0;
    let mut adversary = Array1::zeros(c);
    adversary[adversary_label] = 1.0;
    let blended = &own * s + &adversary * (1.0 - s);
    let mixed = own * (nu / ((nu + 1.0) * spec.mean_degree).sqrt())
        + blended / ((nu + 1.0) * (ne + 1.0)).sqrt();
    Ok(softmax(weights.dot(&mixed).as_slice().expect("contiguous")))
}

/// One swept claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSweep {
    pub claim: String,
    pub parameter: String,
    pub values: Vec<f64>,
    /// `h_u[Y_u]` after the attack at each value.
    pub h_true_class: Vec<f64>,
    /// `h_true_class` strictly increases along `values`.
    pub monotone_increasing: bool,
}

impl ClaimSweep {
    fn new(claim: &str, parameter: &str, values: Vec<f64>, h_true_class: Vec<f64>) -> Self {
        let monotone_increasing = h_true_class.windows(2).all(|w| w[1] > w[0]);
        ClaimSweep {
            claim: claim.into(),
            parameter: parameter.into(),
            values,
            h_true_class,
            monotone_increasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub weight_mode: WeightMode,
    pub claims: Vec<ClaimSweep>,
}

impl PropositionReport {
    pub fn verdict(&self) -> bool {
        self.claims.iter().all(|c| c.monotone_increasing)
    }

    /// Writes `param,value,h_u_true_class` rows for every claim.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["param", "value", "h_u_true_class"])?;
        for claim in &self.claims {
            for (v, h) in claim.values.iter().zip(&claim.h_true_class) {
                out.serialize((&claim.parameter, v, h))?;
            }
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

fn sorted_sweep(values: &[usize], what: &str) -> Result<Vec<usize>> {
    if values.len() < 2 {
        return Err(Error::Config(format!(
            "{what} sweep needs at least 2 values"
        )));
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Sweeps target degree (fixed adversary) and adversary degree (fixed target).
pub fn verify_degree_claims(spec: &ToySpec) -> Result<PropositionReport> {
    let w = toy_weights(spec)?;
    verify_degree_claims_with(spec, &w)
}

pub fn verify_degree_claims_with(spec: &ToySpec, w: &Array2<f64>) -> Result<PropositionReport> {
    let y = spec.target_label;
    let ye = spec.adversary_label();
    let targets = sorted_sweep(&spec.target_degrees, "target degree")?;
    let adversaries = sorted_sweep(&spec.adversary_degrees, "adversary degree")?;
    let by_target = targets
        .iter()
        .map(|&d| Ok(toy_output(spec, w, d, spec.fixed_adversary_degree, ye, None)?[y]))
        .collect::<Result<_>>()?;
    let by_adversary = adversaries
        .iter()
        .map(|&d| Ok(toy_output(spec, w, spec.fixed_target_degree, d, ye, None)?[y]))
        .collect::<Result<_>>()?;
    Ok(PropositionReport {
        weight_mode: spec.weight_mode,
        claims: vec![
            ClaimSweep::new(
                "target-degree",
                "target_degree",
                targets.iter().map(|&d| d as f64).collect(),
                by_target,
            ),
            ClaimSweep::new(
                "adversary-degree",
                "adversary_degree",
                adversaries.iter().map(|&d| d as f64).collect(),
                by_adversary,
            ),
        ],
    })
}

/// Sweeps adversary similarity at fixed degrees.
pub fn verify_similarity_claim(spec: &ToySpec) -> Result<PropositionReport> {
    let w = toy_weights(spec)?;
    verify_similarity_claim_with(spec, &w)
}

pub fn verify_similarity_claim_with(spec: &ToySpec, w: &Array2<f64>) -> Result<PropositionReport> {
    let mut grid = spec.similarity_grid.clone();
    if grid.len() < 3 || grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Config(
            "similarity grid needs at least 3 points in [0, 1]".into(),
        ));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let h = grid
        .iter()
        .map(|&s| {
            let out = toy_output(
                spec,
                w,
                spec.fixed_target_degree,
                spec.fixed_adversary_degree,
                spec.adversary_label(),
                Some(s),
            )?;
            Ok(out[spec.target_label])
        })
        .collect::<Result<_>>()?;
    Ok(PropositionReport {
        weight_mode: spec.weight_mode,
        claims: vec![ClaimSweep::new("similarity", "similarity", grid, h)],
    })
}
