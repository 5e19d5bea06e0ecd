//! JSON configuration file: one optional section per subcommand.

use std::path::{Path, PathBuf};

use linknoise::eval::{AttackTemplate, CampaignConfig};
use linknoise::noise::Representation;
use linknoise::props::ToySpec;
use linknoise::{DissimilarityMetric, Hyperparams, Method, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Seed applied to every section that has one.
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
    pub attack: AttackSection,
    pub evaluate: CampaignConfig,
    pub analyze: AnalyzeConfig,
    pub props: ToySpec,
    pub containment: ContainmentConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Dataset directory or `synthetic:<cora|citeseer|pubmed>`.
    pub dataset: String,
    pub generator_seed: u64,
    pub model: ModelKind,
    pub split: (f64, f64, f64),
    /// Seed of the split and the weight initialisation.
    pub seed: u64,
    /// Defaults to the model's standard settings.
    pub hyperparams: Option<Hyperparams>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: "synthetic:cora".into(),
            generator_seed: 0,
            model: ModelKind::Gcn,
            split: (0.1, 0.1, 0.8),
            seed: 0,
            hyperparams: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub dataset: String,
    pub generator_seed: u64,
    pub split: (f64, f64, f64),
    /// Seed of the split, the surrogate and target sampling.
    pub seed: u64,
    /// Saved surrogate to attack with; trained from `surrogate` when absent.
    pub model: Option<PathBuf>,
    pub surrogate: Hyperparams,
    pub methods: Vec<Method>,
    pub metric: DissimilarityMetric,
    pub representation: Representation,
    /// Explicit targets; when empty, `n_targets` test nodes are sampled.
    pub targets: Vec<usize>,
    pub n_targets: usize,
    pub attack: AttackTemplate,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            dataset: "synthetic:cora".into(),
            generator_seed: 0,
            split: (0.1, 0.1, 0.8),
            seed: 0,
            model: None,
            surrogate: Hyperparams::gcn_default(),
            methods: vec![Method::Nma],
            metric: DissimilarityMetric::Ent,
            representation: Representation::Output,
            targets: Vec::new(),
            n_targets: 10,
            attack: AttackTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    /// Campaign report to analyse; `<out>/report.json` when absent.
    pub report: Option<PathBuf>,
    /// Largest absolute difference tolerated between stored and recomputed statistics.
    pub tolerance: f64,
    /// Containment tables for the first targets of every seed; 0 skips them.
    pub containment_targets: usize,
    pub pool_size: usize,
    pub max_len: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            report: None,
            tolerance: 1e-9,
            containment_targets: 10,
            pool_size: 20,
            max_len: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContainmentConfig {
    pub dataset: String,
    pub generator_seed: u64,
    pub split: (f64, f64, f64),
    pub seed: u64,
    pub surrogate: Hyperparams,
    pub metric: DissimilarityMetric,
    pub targets: Vec<usize>,
    pub n_targets: usize,
    pub pool_size: usize,
    pub max_len: usize,
}

impl Default for ContainmentConfig {
    fn default() -> Self {
        ContainmentConfig {
            dataset: "synthetic:cora".into(),
            generator_seed: 0,
            split: (0.1, 0.1, 0.8),
            seed: 0,
            surrogate: Hyperparams::gcn_default(),
            metric: DissimilarityMetric::Ent,
            targets: Vec::new(),
            n_targets: 10,
            pool_size: 20,
            max_len: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// `cora`, `citeseer` or `pubmed`.
    pub profile: String,
    pub seed: u64,
    /// Output directory; `<out>/<profile>` when absent.
    pub dir: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            profile: "cora".into(),
            seed: 0,
            dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_examples_parse() {
        let doc = include_str!("../../../docs/config.md");
        let blocks: Vec<&str> = doc
            .split("```json")
            .skip(1)
            .map(|b| b.split("```").next().unwrap())
            .collect();
        assert_eq!(blocks.len(), 7);
        for block in blocks {
            serde_json::from_str::<Config>(block).unwrap_or_else(|e| panic!("{e}\n{block}"));
        }
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(
            serde_json::from_str::<Config>("{}").unwrap(),
            Config::default()
        );
        assert!(serde_json::from_str::<Config>(r#"{"attack": {"metod": "NGA"}}"#).is_err());
    }
}
