use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use linknoise::attack::AttackResult;
use linknoise::dataset::save_dataset;
use linknoise::eval::{
    analyze_adversaries, containment_study, export_report, load_report, run_campaign_on,
    sample_targets, train_seed_models, ContainmentTable, DatasetSource, ReportFormat,
};
use linknoise::gnn::{self, forward, load_model, save_model, train_gcn};
use linknoise::graph::random_split;
use linknoise::props::{verify_degree_claims, verify_similarity_claim, PropositionReport, ToySpec};
use linknoise::scalar::argmax;
use linknoise::synth::{generate, SyntheticProfile};
use linknoise::{
    Attacker, CampaignConfig, DeltaGraph, DissimilarityMetric, Graph, GraphView, Hyperparams,
    PropertyReport, SplitMask,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{AnalyzeConfig, AttackSection, ContainmentConfig, SynthConfig, TrainConfig};
use crate::error::{CliError, Context};

fn load_graph(spec: &str, generator_seed: u64) -> Result<Graph, CliError> {
    let source = DatasetSource::parse(spec);
    if let DatasetSource::Directory(dir) = &source {
        if !dir.is_dir() {
            return Err(CliError::new(
                "dataset",
                format!("dataset directory `{}` not found", dir.display()),
            ));
        }
    }
    source
        .load(generator_seed)
        .context(&format!("loading dataset `{spec}`"))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<PathBuf, CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::new("serde", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))
}

fn check_targets(g: &Graph, targets: &[usize]) -> Result<(), CliError> {
    match targets.iter().find(|&&u| u >= g.node_count()) {
        Some(u) => Err(CliError::new(
            "config",
            format!(
                "target {u} is not a node of the {}-node graph",
                g.node_count()
            ),
        )),
        None => Ok(()),
    }
}

fn choose_targets(
    explicit: &[usize],
    n: usize,
    split: &SplitMask,
    seed: u64,
    g: &Graph,
) -> Result<Vec<usize>, CliError> {
    if explicit.is_empty() {
        sample_targets(split, n, seed).context("sampling targets")
    } else {
        check_targets(g, explicit)?;
        Ok(explicit.to_vec())
    }
}

fn accuracy(z: &linknoise::ProbMatrix, nodes: &[usize], g: &Graph) -> Result<f64, CliError> {
    Ok(z.accuracy(nodes, g.labels())?)
}

pub fn train(cfg: &TrainConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let g = load_graph(&cfg.dataset, cfg.generator_seed)?;
    let split = random_split(g.node_count(), cfg.split, cfg.seed).context("splitting nodes")?;
    let hp = cfg
        .hyperparams
        .clone()
        .unwrap_or_else(|| Hyperparams::default_for(cfg.model))
        .with_seed(cfg.seed);
    let model =
        gnn::train(cfg.model, &g, &split, &hp).context(&format!("training {}", cfg.model))?;
    let z = forward(&model, &g)?;
    let model_path = out.join("model.json");
    save_model(&model, &model_path).context("saving model")?;
    let metrics = json!({
        "dataset": cfg.dataset,
        "model": cfg.model,
        "seed": cfg.seed,
        "node_count": g.node_count(),
        "edge_count": g.edge_count(),
        "hyperparams": hp,
        "accuracy": {
            "train": accuracy(&z, &split.train, &g)?,
            "validation": accuracy(&z, &split.validation, &g)?,
            "test": accuracy(&z, &split.test, &g)?,
        },
        "timing": { "seconds": started.elapsed().as_secs_f64() },
    });
    Ok(vec![
        model_path,
        write_json(&out.join("train.json"), &metrics)?,
    ])
}

pub fn attack(cfg: &AttackSection, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if cfg.methods.is_empty() {
        return Err(CliError::new(
            "config",
            "at least one attack method is required",
        ));
    }
    let g = load_graph(&cfg.dataset, cfg.generator_seed)?;
    let split = random_split(g.node_count(), cfg.split, cfg.seed).context("splitting nodes")?;
    let surrogate = match &cfg.model {
        Some(path) => load_model(path).context(&format!("loading model {}", path.display()))?,
        None => train_gcn(&g, &split, &cfg.surrogate.clone().with_seed(cfg.seed))
            .context("training surrogate")?,
    };
    let targets = choose_targets(&cfg.targets, cfg.n_targets, &split, cfg.seed, &g)?;
    let attacker = Attacker::with_representation(&g, &surrogate, cfg.representation)
        .context("preparing attacker")?;
    let dir = out.join("attacks");
    create_dir(&dir)?;
    let mut written = Vec::new();
    for &method in &cfg.methods {
        let results: Vec<AttackResult> = targets
            .par_iter()
            .map(|&u| {
                attacker
                    .run(method, u, &cfg.attack.for_target(g.degree(u), cfg.metric))
                    .context(&format!("{method} on target {u}"))
            })
            .collect::<Result<_, _>>()?;
        for r in &results {
            written.push(write_json(
                &dir.join(format!("{method}-{}-{}.json", cfg.metric, r.target)),
                r,
            )?);
        }
    }
    Ok(written)
}

fn campaign_graph(cfg: &CampaignConfig) -> Result<Graph, CliError> {
    cfg.validate().context("campaign config")?;
    load_graph(&cfg.dataset, cfg.generator_seed)
}

pub fn evaluate(cfg: &CampaignConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let g = campaign_graph(cfg)?;
    let report = run_campaign_on(&g, cfg).context("campaign")?;
    let json_path = out.join("report.json");
    let csv_path = out.join("summary.csv");
    export_report(&report, &json_path, ReportFormat::Json)?;
    export_report(&report, &csv_path, ReportFormat::Csv)?;
    Ok(vec![json_path, csv_path])
}

fn property_difference(a: &PropertyReport, b: &PropertyReport) -> f64 {
    if a.n_results != b.n_results || a.n_links != b.n_links {
        return f64::INFINITY;
    }
    [
        (a.class_groups.same, b.class_groups.same),
        (
            a.class_groups.second_possible,
            b.class_groups.second_possible,
        ),
        (a.class_groups.others, b.class_groups.others),
        (a.mean_adversarial_degree, b.mean_adversarial_degree),
        (a.mean_adversarial_confidence, b.mean_adversarial_confidence),
        (a.homophily_before, b.homophily_before),
        (a.homophily_after, b.homophily_after),
    ]
    .iter()
    .map(|(x, y)| (x - y).abs())
    .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct EntryCheck {
    seed: u64,
    method: linknoise::Method,
    metric: DissimilarityMetric,
    victim: linknoise::ModelKind,
    successes_match: bool,
    /// Largest absolute difference from the stored statistics; infinite when the
    /// stored and recomputed reports disagree on presence or counts.
    max_difference: f64,
    properties: Option<PropertyReport>,
}

#[derive(Serialize)]
struct SeedContainment {
    seed: u64,
    /// Per adversary-set size, the fraction of targets whose best set contains the
    /// best set one size smaller.
    contains_previous_fraction: Vec<f64>,
    tables: Vec<ContainmentTable>,
}

fn contains_fraction(tables: &[ContainmentTable]) -> Vec<f64> {
    let depth = tables.iter().map(|t| t.levels.len()).max().unwrap_or(0);
    (0..depth)
        .map(|k| {
            let levels: Vec<bool> = tables
                .iter()
                .filter_map(|t| t.levels.get(k))
                .map(|l| l.contains_previous_optimum)
                .collect();
            levels.iter().filter(|&&c| c).count() as f64 / levels.len() as f64
        })
        .collect()
}

pub fn analyze(cfg: &AnalyzeConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let report_path = cfg
        .report
        .clone()
        .unwrap_or_else(|| out.join("report.json"));
    if !report_path.is_file() {
        return Err(CliError::new(
            "io",
            format!("report `{}` not found", report_path.display()),
        ));
    }
    let report = load_report(&report_path).context("reading report")?;
    let campaign = &report.config;
    let g = campaign_graph(campaign)?;
    if g.node_count() != report.node_count || g.edge_count() != report.edge_count {
        return Err(CliError::new(
            "consistency",
            format!(
                "dataset has {} nodes and {} edges, report has {} and {}",
                g.node_count(),
                g.edge_count(),
                report.node_count,
                report.edge_count
            ),
        ));
    }
    let labels = g.labels();
    let mut checks = Vec::new();
    let mut containment = Vec::new();
    for summary in &report.seeds {
        let models = train_seed_models(&g, campaign, summary.seed)
            .context(&format!("retraining seed {}", summary.seed))?;
        let attacker =
            Attacker::with_representation(&g, &models.surrogate, campaign.representation)?;
        for run in report.runs.iter().filter(|r| r.seed == summary.seed) {
            for (kind, victim) in &models.victims {
                let Some(entry) = report.entry(run.seed, run.method, run.metric, *kind) else {
                    return Err(CliError::new(
                        "consistency",
                        format!(
                            "no entry for seed {} {} {} {kind}",
                            run.seed, run.method, run.metric
                        ),
                    ));
                };
                let mut successes = Vec::with_capacity(summary.targets.len());
                let mut successful = Vec::new();
                for &u in &summary.targets {
                    let hit = match run.results.iter().find(|r| r.target == u) {
                        Some(r) => {
                            let z = forward(victim, &DeltaGraph::new(&g, &r.links)?)?;
                            let hit = argmax(z.row_slice(u)) != labels[u];
                            if hit {
                                successful.push(r.clone());
                            }
                            hit
                        }
                        None => false,
                    };
                    successes.push(hit);
                }
                let properties = if successful.iter().any(|r| !r.links.is_empty()) {
                    Some(analyze_adversaries(
                        &successful,
                        &g,
                        attacker.clean_output(),
                    )?)
                } else {
                    None
                };
                let max_difference = match (&properties, &entry.properties) {
                    (Some(a), Some(b)) => property_difference(a, b),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                checks.push(EntryCheck {
                    seed: run.seed,
                    method: run.method,
                    metric: run.metric,
                    victim: *kind,
                    successes_match: successes == entry.successes,
                    max_difference,
                    properties,
                });
            }
        }
        if cfg.containment_targets > 0 {
            let metric = campaign.metrics[0];
            let tables = summary
                .targets
                .iter()
                .take(cfg.containment_targets)
                .map(|&u| {
                    containment_study(&attacker, u, cfg.pool_size, cfg.max_len, metric)
                        .context(&format!("containment on target {u}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            containment.push(SeedContainment {
                seed: summary.seed,
                contains_previous_fraction: contains_fraction(&tables),
                tables,
            });
        }
    }
    let consistent = checks
        .iter()
        .all(|c| c.successes_match && c.max_difference <= cfg.tolerance);
    let analysis = json!({
        "report": report_path,
        "consistent": consistent,
        "entries": checks,
        "containment": containment,
    });
    let path = write_json(&out.join("analysis.json"), &analysis)?;
    if !consistent {
        return Err(CliError::new(
            "consistency",
            format!(
                "recomputed statistics disagree with the report; see {}",
                path.display()
            ),
        ));
    }
    Ok(vec![path])
}

fn write_proposition(
    report: &PropositionReport,
    out: &Path,
    name: &str,
) -> Result<Vec<PathBuf>, CliError> {
    let mut value =
        serde_json::to_value(report).map_err(|e| CliError::new("serde", e.to_string()))?;
    value["verdict"] = json!(report.verdict());
    let json_path = write_json(&out.join(format!("{name}.json")), &value)?;
    let csv_path = out.join(format!("{name}.csv"));
    let file = fs::File::create(&csv_path)
        .map_err(|e| CliError::new("io", format!("{}: {e}", csv_path.display())))?;
    report.write_csv(file)?;
    Ok(vec![json_path, csv_path])
}

pub fn verify_props(spec: &ToySpec, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let degree = verify_degree_claims(spec).context("degree sweeps")?;
    let similarity = verify_similarity_claim(spec).context("similarity sweep")?;
    let mut written = write_proposition(&degree, out, "props-degree")?;
    written.extend(write_proposition(&similarity, out, "props-similarity")?);
    Ok(written)
}

pub fn containment(cfg: &ContainmentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let g = load_graph(&cfg.dataset, cfg.generator_seed)?;
    let split = random_split(g.node_count(), cfg.split, cfg.seed).context("splitting nodes")?;
    let surrogate = train_gcn(&g, &split, &cfg.surrogate.clone().with_seed(cfg.seed))
        .context("training surrogate")?;
    let targets = choose_targets(&cfg.targets, cfg.n_targets, &split, cfg.seed, &g)?;
    let attacker = Attacker::new(&g, &surrogate)?;
    let tables = targets
        .iter()
        .map(|&u| {
            containment_study(&attacker, u, cfg.pool_size, cfg.max_len, cfg.metric)
                .context(&format!("containment on target {u}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let value = SeedContainment {
        seed: cfg.seed,
        contains_previous_fraction: contains_fraction(&tables),
        tables,
    };
    Ok(vec![write_json(&out.join("containment.json"), &value)?])
}

pub fn synth(cfg: &SynthConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let profile = SyntheticProfile::by_name(&cfg.profile)?;
    let g: Graph = generate(&profile, cfg.seed).context("generating dataset")?;
    let dir = cfg.dir.clone().unwrap_or_else(|| out.join(&cfg.profile));
    create_dir(&dir)?;
    save_dataset(&g, &dir).context("writing dataset")?;
    Ok(vec![dir])
}
