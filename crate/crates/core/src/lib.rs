//! Targeted link-addition attacks on graph convolutional networks, guided by
//! link noise.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix it to `f64`, with `*32` variants for single precision.
//!
//! ```no_run
//! use linknoise::{attack::Attacker, eval::DatasetSource, AttackConfig, DissimilarityMetric, Graph, GraphView, Hyperparams};
//!
//! let g: Graph = DatasetSource::parse("synthetic:cora").load(0)?;
//! let split = linknoise::graph::random_split(g.node_count(), (0.1, 0.1, 0.8), 0)?;
//! let surrogate = linknoise::gnn::train_gcn(&g, &split, &Hyperparams::gcn_default())?;
//! let attacker = Attacker::new(&g, &surrogate)?;
//! let u = split.test[0];
//! let result = attacker.nma(u, &AttackConfig::for_degree(g.degree(u), DissimilarityMetric::Ent))?;
//! println!("{:?} -> margin {}", result.links, result.final_margin);
//! # Ok::<(), linknoise::Error>(())
//! ```

pub mod attack;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod noise;
pub mod props;
mod rng;
pub mod scalar;
pub mod sparse;
pub mod synth;

pub use attack::{AttackConfig, AttackResult, Method};
pub use error::{Error, Result};
pub use eval::{CampaignConfig, CampaignReport, PropertyReport};
pub use gnn::{Hyperparams, ModelKind};
pub use graph::{GraphView, Link, SplitMask};
pub use noise::DissimilarityMetric;
pub use scalar::Scalar;

pub type Graph = graph::Graph<f64>;
pub type DeltaGraph<'a> = graph::DeltaGraph<'a, f64>;
pub type CsrMatrix = sparse::CsrMatrix<f64>;
pub type TrainedModel = gnn::TrainedModel<f64>;
pub type ProbMatrix = gnn::ProbMatrix<f64>;
pub type Attacker<'a> = attack::Attacker<'a, f64>;

pub type Graph32 = graph::Graph<f32>;
pub type DeltaGraph32<'a> = graph::DeltaGraph<'a, f32>;
pub type CsrMatrix32 = sparse::CsrMatrix<f32>;
pub type TrainedModel32 = gnn::TrainedModel<f32>;
pub type ProbMatrix32 = gnn::ProbMatrix<f32>;
pub type Attacker32<'a> = attack::Attacker<'a, f32>;
