//! Attack campaigns: sample targets, craft links against a surrogate, transfer
//! them to victims trained on the clean graph, and summarise the outcome.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, AttackResult, Attacker, Method};
use crate::dataset::{load_dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::gnn::{
    train, train_gcn, Hyperparams, LocalForward, ModelKind, ProbMatrix, TrainedModel,
};
use crate::graph::{
    homophily, largest_connected_component, random_split, DeltaGraph, Graph, GraphView, SplitMask,
};
use crate::noise::{DissimilarityMetric, Representation};
use crate::rng::{rng, Stream};
use crate::scalar::{argmax, Scalar};
use crate::synth::{generate, SyntheticProfile};

/// Where a campaign's graph comes from: a dataset directory, or
/// `synthetic:<profile>` for a generated stand-in (seeded by `generator_seed`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    Directory(PathBuf),
    Synthetic(String),
}

impl DatasetSource {
    pub fn parse(spec: &str) -> Self {
        match spec.strip_prefix("synthetic:") {
            Some(name) => DatasetSource::Synthetic(name.to_string()),
            None => DatasetSource::Directory(PathBuf::from(spec)),
        }
    }

    /// Loads the graph, row-normalises features and keeps the largest connected component.
    pub fn load<T: Scalar>(&self, generator_seed: u64) -> Result<Graph<T>> {
        let g = match self {
            DatasetSource::Directory(dir) => load_dataset(dir, LoadOptions::default())?,
            DatasetSource::Synthetic(name) => {
                let g: Graph<T> = generate(&SyntheticProfile::by_name(name)?, generator_seed)?;
                let mut features = g.features().clone();
                features.row_normalize_l1();
                g.with_features(features)?
            }
        };
        Ok(largest_connected_component(&g))
    }
}

/// Per-target attack widths as multiples of the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackTemplate {
    /// Fixed budget for every target; by default the target's degree.
    pub budget: Option<usize>,
    pub delta1_factor: usize,
    pub delta2_factor: usize,
    pub len_sin_factor: usize,
    pub len_re: usize,
}

impl Default for AttackTemplate {
    fn default() -> Self {
        AttackTemplate {
            budget: None,
            delta1_factor: 5,
            delta2_factor: 10,
            len_sin_factor: 3,
            len_re: 10,
        }
    }
}

impl AttackTemplate {
    pub fn for_target(&self, degree: usize, metric: DissimilarityMetric) -> AttackConfig {
        let budget = self.budget.unwrap_or(degree).max(1);
        AttackConfig {
            budget,
            delta1: self.delta1_factor * budget,
            delta2: self.delta2_factor * budget,
            len_sin: self.len_sin_factor * budget,
            len_re: self.len_re,
            metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    /// Dataset directory or `synthetic:<cora|citeseer|pubmed>`.
    pub dataset: String,
    pub generator_seed: u64,
    /// One split, surrogate and victim set per seed.
    pub seeds: Vec<u64>,
    pub n_targets: usize,
    pub methods: Vec<Method>,
    pub metrics: Vec<DissimilarityMetric>,
    pub victims: Vec<ModelKind>,
    pub attack: AttackTemplate,
    pub split: (f64, f64, f64),
    pub representation: Representation,
    pub surrogate: Hyperparams,
    pub victim_gcn: Hyperparams,
    pub victim_sgc: Hyperparams,
    /// Victims are seeded with `seed + victim_seed_offset` so they differ from the surrogate.
    pub victim_seed_offset: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            dataset: "synthetic:cora".into(),
            generator_seed: 0,
            seeds: vec![0, 1],
            n_targets: 200,
            methods: Method::ALL.to_vec(),
            metrics: vec![DissimilarityMetric::Ent],
            victims: vec![ModelKind::Gcn, ModelKind::Sgc],
            attack: AttackTemplate::default(),
            split: (0.1, 0.1, 0.8),
            representation: Representation::Output,
            surrogate: Hyperparams::gcn_default(),
            victim_gcn: Hyperparams::gcn_default(),
            victim_sgc: Hyperparams::sgc_default(),
            victim_seed_offset: 1000,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 {
            return Err(Error::Config("n_targets must be at least 1".into()));
        }
        if self.seeds.is_empty()
            || self.methods.is_empty()
            || self.metrics.is_empty()
            || self.victims.is_empty()
        {
            return Err(Error::Config(
                "seeds, methods, metrics and victims must be nonempty".into(),
            ));
        }
        self.surrogate.validate(ModelKind::Gcn)?;
        self.victim_gcn.validate(ModelKind::Gcn)?;
        self.victim_sgc.validate(ModelKind::Sgc)
    }

    pub fn victim_hyperparams(&self, kind: ModelKind) -> &Hyperparams {
        match kind {
            ModelKind::Gcn => &self.victim_gcn,
            ModelKind::Sgc => &self.victim_sgc,
        }
    }
}

/// `n` distinct test nodes, uniformly without replacement, in sampled order.
pub fn sample_targets(split: &SplitMask, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > split.test.len() {
        return Err(Error::Config(format!(
            "{n} targets requested from a test set of {}",
            split.test.len()
        )));
    }
    let mut pool = split.test.clone();
    pool.shuffle(&mut rng(seed, Stream::Targets));
    pool.truncate(n);
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassGroups {
    pub same: f64,
    pub second_possible: f64,
    pub others: f64,
}

/// Statistics of the adversarial nodes picked by a set of attacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub n_results: usize,
    pub n_links: usize,
    /// Adversary label equal to the target's, equal to the runner-up class of
    /// the target's clean surrogate output, or neither.
    pub class_groups: ClassGroups,
    /// Mean clean structural degree of adversarial nodes.
    pub mean_adversarial_degree: f64,
    /// Mean of `100 · max z[v]` over adversarial nodes.
    pub mean_adversarial_confidence: f64,
    pub homophily_before: f64,
    pub homophily_after: f64,
}

pub fn analyze_adversaries<T: Scalar>(
    results: &[AttackResult],
    g: &Graph<T>,
    z: &ProbMatrix<T>,
) -> Result<PropertyReport> {
    if results.is_empty() {
        return Err(Error::Undefined("no attack results to analyse".into()));
    }
    let labels = g.labels();
    let (mut same, mut second, mut others) = (0usize, 0usize, 0usize);
    let (mut degree, mut confidence) = (0.0, 0.0);
    let (mut before, mut after) = (0.0, 0.0);
    for r in results {
        let runner_up = z.runner_up(r.target);
        for v in r.adversaries() {
            if labels[v] == labels[r.target] {
                same += 1;
            } else if labels[v] == runner_up {
                second += 1;
            } else {
                others += 1;
            }
            degree += g.degree(v) as f64;
            confidence += 100.0
                * z.row_slice(v)
                    .iter()
                    .copied()
                    .fold(T::zero(), T::max)
                    .as_f64();
        }
        before += homophily(g, r.target)?;
        after += homophily(&DeltaGraph::new(g, &r.links)?, r.target)?;
    }
    let n_links = same + second + others;
    if n_links == 0 {
        return Err(Error::Undefined("attacks added no links".into()));
    }
    let total = n_links as f64;
    let n = results.len() as f64;
    Ok(PropertyReport {
        n_results: results.len(),
        n_links,
        class_groups: ClassGroups {
            same: same as f64 / total,
            second_possible: second as f64 / total,
            others: others as f64 / total,
        },
        mean_adversarial_degree: degree / total,
        mean_adversarial_confidence: confidence / total,
        homophily_before: before / n,
        homophily_after: after / n,
    })
}

/// A target whose attack could not be run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFailure {
    pub target: usize,
    pub kind: String,
    pub message: String,
}

/// All attacks of one method and metric against one seed's surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRun {
    pub seed: u64,
    pub method: Method,
    pub metric: DissimilarityMetric,
    pub results: Vec<AttackResult>,
    pub failures: Vec<TargetFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntryTiming {
    pub mean_time_ms: f64,
}

/// Transfer of one [`AttackRun`] to one victim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub seed: u64,
    pub method: Method,
    pub metric: DissimilarityMetric,
    pub victim: ModelKind,
    pub n_targets: usize,
    /// Fraction of targets the victim misclassifies after the attack.
    pub asr: f64,
    /// As `asr`, over the targets the victim classified correctly before the attack.
    pub asr_correct_only: Option<f64>,
    pub mean_final_margin: f64,
    /// Surrogate margin of each attacked target, in target order.
    pub margins: Vec<f64>,
    /// Victim misclassifies the target after the attack, in target order; failed
    /// targets count as unsuccessful.
    pub successes: Vec<bool>,
    pub clean_correct: Vec<bool>,
    /// Adversarial nodes of the successful attacks.
    pub properties: Option<PropertyReport>,
    pub timing: EntryTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub targets: Vec<usize>,
    pub surrogate_test_accuracy: f64,
    pub victim_test_accuracy: BTreeMap<ModelKind, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTiming {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub dataset: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub config: CampaignConfig,
    pub seeds: Vec<SeedSummary>,
    pub runs: Vec<AttackRun>,
    pub entries: Vec<ReportEntry>,
    pub timing: ReportTiming,
}

impl CampaignReport {
    pub fn entry(
        &self,
        seed: u64,
        method: Method,
        metric: DissimilarityMetric,
        victim: ModelKind,
    ) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| {
            e.seed == seed && e.method == method && e.metric == metric && e.victim == victim
        })
    }

    /// Successes over all seeds divided by targets over all seeds.
    pub fn pooled_asr(
        &self,
        method: Method,
        metric: DissimilarityMetric,
        victim: ModelKind,
    ) -> Option<f64> {
        let (mut hits, mut total) = (0usize, 0usize);
        for e in self
            .entries
            .iter()
            .filter(|e| e.method == method && e.metric == metric && e.victim == victim)
        {
            hits += e.successes.iter().filter(|&&s| s).count();
            total += e.n_targets;
        }
        (total > 0).then(|| hits as f64 / total as f64)
    }
}

/// Everything trained for one seed.
pub struct SeedModels<T> {
    pub split: SplitMask,
    pub surrogate: TrainedModel<T>,
    pub victims: Vec<(ModelKind, TrainedModel<T>)>,
}

pub fn train_seed_models<T: Scalar>(
    g: &Graph<T>,
    cfg: &CampaignConfig,
    seed: u64,
) -> Result<SeedModels<T>> {
    let split = random_split(g.node_count(), cfg.split, seed)?;
    let surrogate = train_gcn(g, &split, &cfg.surrogate.clone().with_seed(seed))?;
    let victims = cfg
        .victims
        .iter()
        .map(|&kind| {
            let hp = cfg
                .victim_hyperparams(kind)
                .clone()
                .with_seed(seed + cfg.victim_seed_offset);
            Ok((kind, train(kind, g, &split, &hp)?))
        })
        .collect::<Result<_>>()?;
    Ok(SeedModels {
        split,
        surrogate,
        victims,
    })
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let g: Graph<f64> = DatasetSource::parse(&cfg.dataset).load(cfg.generator_seed)?;
    run_campaign_on(&g, cfg)
}

/// Runs a campaign on an already loaded graph.
pub fn run_campaign_on<T: Scalar>(g: &Graph<T>, cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut seeds = Vec::new();
    let mut runs = Vec::new();
    let mut entries = Vec::new();
    for &seed in &cfg.seeds {
        let models = train_seed_models(g, cfg, seed)?;
        let targets = sample_targets(&models.split, cfg.n_targets, seed)?;
        let attacker = Attacker::with_representation(g, &models.surrogate, cfg.representation)?;
        let victims: Vec<(ModelKind, LocalForward<'_, T>, ProbMatrix<T>)> = models
            .victims
            .iter()
            .map(|(kind, m)| Ok((*kind, LocalForward::new(m, g)?, crate::gnn::forward(m, g)?)))
            .collect::<Result<_>>()?;
        seeds.push(SeedSummary {
            seed,
            targets: targets.clone(),
            surrogate_test_accuracy: attacker
                .clean_output()
                .accuracy(&models.split.test, g.labels())?,
            victim_test_accuracy: victims
                .iter()
                .map(|(kind, _, z)| Ok((*kind, z.accuracy(&models.split.test, g.labels())?)))
                .collect::<Result<_>>()?,
        });
        info!(
            "seed {seed}: surrogate and {} victims trained",
            victims.len()
        );

        for &method in &cfg.methods {
            for &metric in &cfg.metrics {
                let outcomes: Vec<std::result::Result<AttackResult, Error>> = targets
                    .par_iter()
                    .map(|&u| attacker.run(method, u, &cfg.attack.for_target(g.degree(u), metric)))
                    .collect();
                let mut results = Vec::new();
                let mut failures = Vec::new();
                for (&u, outcome) in targets.iter().zip(outcomes) {
                    match outcome {
                        Ok(r) => results.push(r),
                        Err(e) => failures.push(TargetFailure {
                            target: u,
                            kind: e.kind().to_string(),
                            message: e.to_string(),
                        }),
                    }
                }
                for (kind, local, clean) in &victims {
                    entries.push(transfer(
                        g, &attacker, &targets, &results, *kind, local, clean, seed, method, metric,
                    )?);
                }
                info!(
                    "seed {seed} {method}/{metric}: {} attacks, {} failures",
                    results.len(),
                    failures.len()
                );
                runs.push(AttackRun {
                    seed,
                    method,
                    metric,
                    results,
                    failures,
                });
            }
        }
    }
    Ok(CampaignReport {
        dataset: cfg.dataset.clone(),
        node_count: g.node_count(),
        edge_count: g.edge_count(),
        config: cfg.clone(),
        seeds,
        runs,
        entries,
        timing: ReportTiming {
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn transfer<T: Scalar>(
    g: &Graph<T>,
    attacker: &Attacker<'_, T>,
    targets: &[usize],
    results: &[AttackResult],
    victim: ModelKind,
    local: &LocalForward<'_, T>,
    clean: &ProbMatrix<T>,
    seed: u64,
    method: Method,
    metric: DissimilarityMetric,
) -> Result<ReportEntry> {
    let by_target: BTreeMap<usize, &AttackResult> = results.iter().map(|r| (r.target, r)).collect();
    let labels = g.labels();
    let mut successes = Vec::with_capacity(targets.len());
    let mut clean_correct = Vec::with_capacity(targets.len());
    let mut successful = Vec::new();
    for &u in targets {
        clean_correct.push(clean.predict(u) == labels[u]);
        let hit = match by_target.get(&u) {
            Some(r) => {
                let hit = argmax(&local.probabilities(u, &r.links)?) != labels[u];
                if hit {
                    successful.push((*r).clone());
                }
                hit
            }
            None => false,
        };
        successes.push(hit);
    }
    let n = targets.len();
    let hits = successes.iter().filter(|&&s| s).count();
    let correct = clean_correct.iter().filter(|&&c| c).count();
    let correct_hits = successes
        .iter()
        .zip(&clean_correct)
        .filter(|(&s, &c)| s && c)
        .count();
    let margins: Vec<f64> = results.iter().map(|r| r.final_margin).collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>, count: usize| {
        if count == 0 {
            0.0
        } else {
            xs.sum::<f64>() / count as f64
        }
    };
    let properties = if successful.iter().any(|r| !r.links.is_empty()) {
        Some(analyze_adversaries(
            &successful,
            g,
            attacker.clean_output(),
        )?)
    } else {
        None
    };
    Ok(ReportEntry {
        seed,
        method,
        metric,
        victim,
        n_targets: n,
        asr: hits as f64 / n as f64,
        asr_correct_only: (correct > 0).then(|| correct_hits as f64 / correct as f64),
        mean_final_margin: mean(&mut margins.iter().copied(), margins.len()),
        timing: EntryTiming {
            mean_time_ms: mean(
                &mut results.iter().map(|r| r.timing.wall_time_ms),
                results.len(),
            ),
        },
        margins,
        successes,
        clean_correct,
        properties,
    })
}

/// One row of the exhaustive subset ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSet {
    pub adversaries: Vec<usize>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentLevel {
    pub size: usize,
    pub evaluated: usize,
    /// Lowest-margin sets of this size, best first (ties in enumeration order).
    pub top: Vec<RankedSet>,
    /// The best set of this size contains the best set one size smaller.
    pub contains_previous_optimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentTable {
    pub target: usize,
    pub label: usize,
    pub pool: Vec<usize>,
    pub levels: Vec<ContainmentLevel>,
}

/// Largest number of subsets [`containment_study`] will evaluate.
pub const CONTAINMENT_LIMIT: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Ranks every subset of size `1..=max_len` of the `pool_size` noisiest candidates
/// of `u` by surrogate margin and reports the ten best per size.
pub fn containment_study<T: Scalar>(
    attacker: &Attacker<'_, T>,
    u: usize,
    pool_size: usize,
    max_len: usize,
    metric: DissimilarityMetric,
) -> Result<ContainmentTable> {
    if pool_size == 0 || max_len == 0 {
        return Err(Error::Config(
            "pool size and max length must be positive".into(),
        ));
    }
    let pool: Vec<usize> = attacker
        .candidates(u, pool_size, metric)?
        .candidates()
        .collect();
    let max_len = max_len.min(pool.len());
    let total: u128 = (1..=max_len).map(|k| binomial(pool.len(), k)).sum();
    if total > CONTAINMENT_LIMIT {
        return Err(Error::TooLarge(total));
    }
    let mut levels: Vec<ContainmentLevel> = Vec::with_capacity(max_len);
    let mut previous_best: Option<Vec<usize>> = None;
    for k in 1..=max_len {
        let mut combos = Vec::new();
        let mut c: Vec<usize> = (0..k).collect();
        loop {
            combos.push(c.clone());
            if !next_combination(&mut c, pool.len()) {
                break;
            }
        }
        let scored: Vec<RankedSet> = combos
            .par_iter()
            .map(|c| {
                let adversaries: Vec<usize> = c.iter().map(|&i| pool[i]).collect();
                let links: Vec<_> = adversaries.iter().map(|&v| (u, v)).collect();
                Ok(RankedSet {
                    margin: attacker.margin(u, &links)?,
                    adversaries,
                })
            })
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[a]
                .margin
                .total_cmp(&scored[b].margin)
                .then(a.cmp(&b))
        });
        let best: HashSet<usize> = scored[order[0]].adversaries.iter().copied().collect();
        let contains = previous_best
            .as_ref()
            .is_none_or(|prev| prev.iter().all(|v| best.contains(v)));
        previous_best = Some(scored[order[0]].adversaries.clone());
        levels.push(ContainmentLevel {
            size: k,
            evaluated: scored.len(),
            top: order.iter().take(10).map(|&i| scored[i].clone()).collect(),
            contains_previous_optimum: contains,
        });
    }
    Ok(ContainmentTable {
        target: u,
        label: attacker.graph().labels()[u],
        pool,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// One CSV line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub seed: u64,
    pub method: Method,
    pub metric: DissimilarityMetric,
    pub victim: ModelKind,
    pub n_targets: usize,
    pub asr: f64,
    pub asr_correct_only: Option<f64>,
    pub mean_final_margin: f64,
    pub mean_time_ms: f64,
}

pub fn summary_rows(report: &CampaignReport) -> Vec<SummaryRow> {
    report
        .entries
        .iter()
        .map(|e| SummaryRow {
            dataset: report.dataset.clone(),
            seed: e.seed,
            method: e.method,
            metric: e.metric,
            victim: e.victim,
            n_targets: e.n_targets,
            asr: e.asr,
            asr_correct_only: e.asr_correct_only,
            mean_final_margin: e.mean_final_margin,
            mean_time_ms: e.timing.mean_time_ms,
        })
        .collect()
}

pub fn export_report(
    report: &CampaignReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        ReportFormat::Csv => {
            let mut out = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut w);
            out.write_record([
                "dataset",
                "seed",
                "method",
                "metric",
                "victim",
                "n_targets",
                "asr",
                "asr_correct_only",
                "mean_final_margin",
                "mean_time_ms",
            ])?;
            for row in summary_rows(report) {
                out.serialize(row)?;
            }
            out.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<CampaignReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// `value` with every object member named `timing` removed, recursively.
pub fn without_timing(mut value: serde_json::Value) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.remove("timing");
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut value);
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::Timing;

    fn result(target: usize, links: Vec<(usize, usize)>) -> AttackResult {
        AttackResult {
            target,
            label: 0,
            method: Method::Nga,
            metric: DissimilarityMetric::Ent,
            margins: vec![-0.1; links.len()],
            final_margin: -0.1,
            links,
            success_vs_surrogate: true,
            evaluations: 1,
            exhausted: false,
            timing: Timing::default(),
        }
    }

    #[test]
    fn combinations_enumerate_lexicographically() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(binomial(20, 3), 1140);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn same_class_adversaries_group_as_same() {
        let g = crate::graph::fixtures::graph(5, &[(0, 1), (2, 3)], vec![0, 0, 0, 0, 1], 2);
        let z = ProbMatrix::new(ndarray::Array2::from_elem((5, 2), 0.5)).unwrap();
        let report = analyze_adversaries(&[result(0, vec![(0, 2), (0, 3)])], &g, &z).unwrap();
        assert_eq!(
            report.class_groups,
            ClassGroups {
                same: 1.0,
                second_possible: 0.0,
                others: 0.0
            }
        );
        assert_eq!(report.mean_adversarial_degree, 1.0);
        assert_eq!(report.mean_adversarial_confidence, 50.0);
        assert_eq!(report.homophily_before, 1.0);
        assert_eq!(report.homophily_after, 1.0);
        assert!(analyze_adversaries(&[], &g, &z).is_err());
    }

    #[test]
    fn groups_and_homophily_after_attack() {
        let g = crate::graph::fixtures::graph(5, &[(0, 1)], vec![0, 0, 1, 2, 2], 3);
        let z = ProbMatrix::new(ndarray::array![
            [0.6, 0.3, 0.1],
            [0.5, 0.3, 0.2],
            [0.1, 0.8, 0.1],
            [0.1, 0.1, 0.8],
            [0.2, 0.2, 0.6]
        ])
        .unwrap();
        let report = analyze_adversaries(&[result(0, vec![(0, 2), (0, 3)])], &g, &z).unwrap();
        let groups = report.class_groups;
        assert!(
            (groups.second_possible - 0.5).abs() < 1e-12 && (groups.others - 0.5).abs() < 1e-12
        );
        assert_eq!(report.homophily_before, 1.0);
        assert!((report.homophily_after - 1.0 / 3.0).abs() < 1e-12);
        assert!((report.mean_adversarial_confidence - 80.0).abs() < 1e-9);
    }

    #[test]
    fn target_sampling() {
        let split = random_split(50, (0.2, 0.2, 0.6), 3).unwrap();
        let all = sample_targets(&split, split.test.len(), 1).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, split.test);
        assert_eq!(
            sample_targets(&split, 10, 5).unwrap(),
            sample_targets(&split, 10, 5).unwrap()
        );
        assert!(sample_targets(&split, 31, 5).is_err());
    }

    #[test]
    fn stripping_timing_is_recursive() {
        let v = serde_json::json!({"a": 1, "timing": 2, "b": [{"timing": {"x": 1}, "c": 3}]});
        assert_eq!(
            without_timing(v),
            serde_json::json!({"a": 1, "b": [{"c": 3}]})
        );
    }

    #[test]
    fn dataset_source_parsing() {
        assert_eq!(
            DatasetSource::parse("synthetic:cora"),
            DatasetSource::Synthetic("cora".into())
        );
        assert_eq!(
            DatasetSource::parse("data/cora"),
            DatasetSource::Directory("data/cora".into())
        );
    }
}
