//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//!
//! Datasets come from `LINKNOISE_<NAME>_DIR` when set (NAME = CORA, CITESEER, PUBMED),
//! otherwise from the synthetic stand-in of the same name.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use linknoise::attack::{classification_margin, search_space};
use linknoise::eval::{
    containment_study, export_report, run_campaign_on, train_seed_models, without_timing,
    CampaignReport, ContainmentTable, DatasetSource, ReportFormat,
};
use linknoise::gnn::{forward, gradient_check, train_gcn};
use linknoise::graph::{induced_subgraph, random_split};
use linknoise::noise::rank_candidates;
use linknoise::props::{verify_degree_claims, verify_similarity_claim, ToySpec};
use linknoise::{
    AttackConfig, Attacker, CampaignConfig, DissimilarityMetric, Graph, GraphView, Hyperparams,
    Method, ModelKind,
};

/// Mean surrogate test accuracy of the first training run on the Cora stand-in, seeds 0 to 4.
const PINNED_SURROGATE_ACCURACY: f64 = 0.827;
const ACCURACY_TOLERANCE: f64 = 0.02;
const ACCURACY_BAND: (f64, f64) = (0.75, 0.88);
const SURROGATE_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const CORA_MEAN_DEGREE: f64 = 4.08;

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn dataset(name: &str) -> (String, &'static str) {
    match std::env::var(format!("LINKNOISE_{}_DIR", name.to_ascii_uppercase())) {
        Ok(dir) => (dir, "directory"),
        Err(_) => (format!("synthetic:{name}"), "synthetic stand-in"),
    }
}

fn load(spec: &str) -> Graph {
    DatasetSource::parse(spec)
        .load(0)
        .unwrap_or_else(|e| panic!("loading {spec}: {e}"))
}

fn artifacts() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("artifact directory");
    dir
}

fn run(c: Criterion, f: impl FnOnce() -> Outcome, failures: &mut Vec<u8>) {
    let started = Instant::now();
    let mut outcome = f();
    let elapsed = started.elapsed();
    if let Some(limit) = c.limit {
        if elapsed > limit {
            outcome.pass = false;
            outcome
                .detail
                .push_str(&format!("; runtime over {:.0}s", limit.as_secs_f64()));
        }
    }
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] {:>2}. {} ({:.1}s): {}",
        c.id,
        c.name,
        elapsed.as_secs_f64(),
        outcome.detail
    );
    if !outcome.pass {
        failures.push(c.id);
    }
}

fn gradient(cora: &Graph) -> Outcome {
    let mut nodes = Vec::new();
    let mut seen = vec![false; cora.node_count()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        if nodes.len() == 40 {
            break;
        }
        nodes.push(u);
        for v in cora.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let g = induced_subgraph(cora, &nodes).expect("fixture");
    let split = random_split(g.node_count(), (0.5, 0.25, 0.25), 0).expect("split");
    let hp = Hyperparams {
        dropout: 0.0,
        max_epochs: 20,
        patience: 20,
        ..Hyperparams::gcn_default()
    };
    let m = train_gcn(&g, &split, &hp).expect("training");
    let err = gradient_check(&m, &g, &split).expect("gradient check");
    Outcome {
        pass: err < 1e-4,
        detail: format!(
            "{}-node fixture, max relative error {err:.2e} (< 1e-4)",
            g.node_count()
        ),
    }
}

fn surrogate_quality(cora: &Graph, source: &str) -> Outcome {
    let mut accs = Vec::new();
    let mut slowest = 0.0f64;
    for seed in SURROGATE_SEEDS {
        let started = Instant::now();
        let split = random_split(cora.node_count(), (0.1, 0.1, 0.8), seed).expect("split");
        let m =
            train_gcn(cora, &split, &Hyperparams::gcn_default().with_seed(seed)).expect("training");
        accs.push(
            forward(&m, cora)
                .expect("forward")
                .accuracy(&split.test, cora.labels())
                .expect("accuracy"),
        );
        slowest = slowest.max(started.elapsed().as_secs_f64());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let pinned = if source == "directory" {
        mean
    } else {
        PINNED_SURROGATE_ACCURACY
    };
    let (lo, hi) = (pinned - ACCURACY_TOLERANCE, pinned + ACCURACY_TOLERANCE);
    let in_band = accs.iter().all(|a| (lo..=hi).contains(a));
    let band_ok = pinned >= ACCURACY_BAND.0 && pinned <= ACCURACY_BAND.1;
    let list: Vec<String> = accs.iter().map(|a| format!("{a:.3}")).collect();
    Outcome {
        pass: in_band && band_ok && slowest < 120.0,
        detail: format!(
            "test accuracy per seed [{}], pinned {pinned:.3} ± {ACCURACY_TOLERANCE} inside [{}, {}], slowest seed {slowest:.1}s",
            list.join(", "),
            ACCURACY_BAND.0,
            ACCURACY_BAND.1
        ),
    }
}

/// Also returns how many NMA evaluation counts matched and missed the closed form.
fn exhaustive_oracle(cora: &Graph, cfg: &CampaignConfig) -> (Outcome, (usize, usize)) {
    let models = train_seed_models(cora, cfg, 0).expect("seed models");
    let mut nodes = Vec::new();
    let mut seen = vec![false; cora.node_count()];
    let start = models.split.test[0];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        if nodes.len() == 200 {
            break;
        }
        nodes.push(u);
        for v in cora.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let g = induced_subgraph(cora, &nodes).expect("subgraph");
    let m = &models.surrogate;
    let attacker = Attacker::new(&g, m).expect("attacker");
    let z = forward(m, &g).expect("forward");
    let targets: Vec<usize> = (0..g.node_count()).step_by(8).collect();
    let mut agree = 0;
    let mut counts = (0, 0);
    for &u in &targets {
        let label = g.labels()[u];
        let candidates: Vec<usize> = (0..g.node_count())
            .filter(|&v| v != u && !g.has_edge(u, v))
            .collect();
        let margins: Vec<f64> = candidates
            .iter()
            .map(|&v| classification_margin(m, &g, &[(u, v)], u, label).expect("margin"))
            .collect();
        let best = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = candidates
            .iter()
            .zip(&margins)
            .filter(|(_, &cm)| cm - best <= 1e-12)
            .map(|(&v, _)| v)
            .collect();
        let ranking = rank_candidates(&g, &z, u, candidates.len(), DissimilarityMetric::Ent)
            .expect("ranking");
        let expected = ranking
            .candidates()
            .find(|v| tied.contains(v))
            .expect("tie winner");
        let n = candidates.len();
        let cfg = AttackConfig {
            budget: 1,
            delta1: n,
            delta2: n,
            len_sin: 1,
            len_re: 1,
            metric: DissimilarityMetric::Ent,
        };
        let r = attacker.nma(u, &cfg).expect("nma");
        if r.evaluations == search_space(Method::Nma, &cfg, n) {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
        if r.adversaries().collect::<Vec<_>>() == [expected] {
            agree += 1;
        }
    }
    let outcome = Outcome {
        pass: agree == targets.len() && targets.len() >= 20 && g.node_count() <= 200,
        detail: format!(
            "{}-node subgraph, delta1 = all candidates, budget 1: NMA equals exhaustive minimum on {agree}/{} targets",
            g.node_count(),
            targets.len()
        ),
    };
    (outcome, counts)
}

fn asr(
    report: &CampaignReport,
    method: Method,
    metric: DissimilarityMetric,
    victim: ModelKind,
) -> f64 {
    report
        .pooled_asr(method, metric, victim)
        .expect("entry present")
}

fn method_ordering(report: &CampaignReport) -> Outcome {
    let e = DissimilarityMetric::Ent;
    let g = |m| asr(report, m, e, ModelKind::Gcn);
    let s = |m| asr(report, m, e, ModelKind::Sgc);
    let (gn, gm, gb) = (g(Method::Nga), g(Method::Nma), g(Method::Nmab));
    let (sn, sm, sb) = (s(Method::Nga), s(Method::Nma), s(Method::Nmab));
    let gcn_ok = gn < gm && gm <= gb && gb >= 0.90 && (0.60..=0.85).contains(&gn);
    let sgc_ok = sn < sm && sm <= sb;
    Outcome {
        pass: gcn_ok && sgc_ok,
        detail: format!(
            "GCN NGA {gn:.3} < NMA {gm:.3} <= NMAB {gb:.3} (NMAB >= 0.90, NGA in [0.60, 0.85]); SGC NGA {sn:.3} < NMA {sm:.3} <= NMAB {sb:.3}"
        ),
    }
}

fn metric_ablation(report: &CampaignReport) -> Outcome {
    let a = |metric| asr(report, Method::Nma, metric, ModelKind::Gcn);
    let (ent, euc, cos) = (
        a(DissimilarityMetric::Ent),
        a(DissimilarityMetric::Euc),
        a(DissimilarityMetric::Cos),
    );
    Outcome {
        pass: ent >= euc - 0.02 && ent >= cos - 0.02,
        detail: format!(
            "NMA on GCN: ENT {ent:.3}, EUC {euc:.3}, COS {cos:.3} (ENT may trail by at most 0.02)"
        ),
    }
}

struct Pooled {
    same: f64,
    degree: f64,
    before: f64,
    after: f64,
}

fn pooled_properties(report: &CampaignReport) -> Pooled {
    let (mut links, mut results) = (0.0, 0.0);
    let mut p = Pooled {
        same: 0.0,
        degree: 0.0,
        before: 0.0,
        after: 0.0,
    };
    for e in report.entries.iter().filter(|e| {
        e.method == Method::Nma
            && e.metric == DissimilarityMetric::Ent
            && e.victim == ModelKind::Gcn
    }) {
        let Some(q) = &e.properties else { continue };
        let (l, r) = (q.n_links as f64, q.n_results as f64);
        p.same += q.class_groups.same * l;
        p.degree += q.mean_adversarial_degree * l;
        p.before += q.homophily_before * r;
        p.after += q.homophily_after * r;
        links += l;
        results += r;
    }
    Pooled {
        same: p.same / links,
        degree: p.degree / links,
        before: p.before / results,
        after: p.after / results,
    }
}

fn adversary_properties(cora: &CampaignReport, others: &[(String, CampaignReport)]) -> Outcome {
    let p = pooled_properties(cora);
    let mut pass = p.same < 0.02 && p.degree < CORA_MEAN_DEGREE && p.after < p.before;
    let mut homophily = vec![format!("cora {:.3} -> {:.3}", p.before, p.after)];
    for (name, report) in others {
        let q = pooled_properties(report);
        pass &= q.after < q.before;
        homophily.push(format!("{name} {:.3} -> {:.3}", q.before, q.after));
    }
    Outcome {
        pass,
        detail: format!(
            "Cora NMA successes: same-class fraction {:.4} (< 0.02), mean adversary degree {:.2} (< {CORA_MEAN_DEGREE}); homophily {}",
            p.same,
            p.degree,
            homophily.join(", ")
        ),
    }
}

fn search_space_accounting(
    g: &Graph,
    reports: &[&CampaignReport],
    oracle: (usize, usize),
) -> Outcome {
    let (mut exact, mut bounded, mut bad) = (oracle.0, 0usize, oracle.1);
    for report in reports {
        let template = report.config.attack;
        for run in &report.runs {
            for r in &run.results {
                let degree = g.degree(r.target);
                let cfg = template.for_target(degree, run.metric);
                let closed = search_space(run.method, &cfg, g.node_count() - 1 - degree);
                match run.method {
                    Method::Nmab if r.evaluations <= closed => bounded += 1,
                    Method::Nga | Method::Nma if r.evaluations == closed => exact += 1,
                    _ => bad += 1,
                }
            }
        }
    }
    Outcome {
        pass: bad == 0 && exact + bounded > 0,
        detail: format!(
            "{} NGA/NMA counts equal the closed form, {bounded} NMAB counts within it, {bad} mismatches",
            exact
        ),
    }
}

fn proposition_sweeps() -> Outcome {
    let spec = ToySpec::default();
    let degree = verify_degree_claims(&spec).expect("degree claims");
    let similarity = verify_similarity_claim(&spec).expect("similarity claim");
    let verdicts: Vec<String> = degree
        .claims
        .iter()
        .chain(&similarity.claims)
        .map(|c| format!("{} {}", c.claim, c.monotone_increasing))
        .collect();
    Outcome {
        pass: degree.verdict() && similarity.verdict(),
        detail: format!(
            "identity weights, degrees 1..10, similarity grid 0..1: {}",
            verdicts.join(", ")
        ),
    }
}

fn containment(cora: &Graph, cfg: &CampaignConfig, targets: &[usize]) -> Outcome {
    let models = train_seed_models(cora, cfg, 0).expect("seed models");
    let attacker = Attacker::new(cora, &models.surrogate).expect("attacker");
    let tables: Vec<ContainmentTable> = targets
        .iter()
        .take(10)
        .map(|&u| {
            containment_study(&attacker, u, 20, 3, DissimilarityMetric::Ent).expect("containment")
        })
        .collect();
    let path = artifacts().join("containment.json");
    std::fs::write(&path, serde_json::to_string_pretty(&tables).expect("json"))
        .expect("write tables");
    let first = &tables[0];
    println!(
        "       top-10 sets for target {} (label {}), pool {:?}",
        first.target, first.label, first.pool
    );
    for level in &first.levels {
        for (rank, set) in level.top.iter().enumerate() {
            println!(
                "       k={} #{:<2} {:?} margin {:.4}",
                level.size,
                rank + 1,
                set.adversaries,
                set.margin
            );
        }
    }
    let exhaustive = tables.iter().all(|t| {
        t.levels.len() == 3
            && t.levels.iter().map(|l| l.evaluated).eq([20, 190, 1140])
            && t.levels.iter().all(|l| l.top.len() == 10)
    });
    let fraction = |k: usize| {
        tables
            .iter()
            .filter(|t| t.levels[k - 1].contains_previous_optimum)
            .count() as f64
            / tables.len() as f64
    };
    Outcome {
        pass: exhaustive && tables.len() >= 10,
        detail: format!(
            "{} targets, pool 20, lengths 1..3 enumerated exhaustively; optimum contains previous optimum: k=2 {:.2}, k=3 {:.2}; tables in {}",
            tables.len(),
            fraction(2),
            fraction(3),
            path.display()
        ),
    }
}

fn determinism(first: &CampaignReport, second: &CampaignReport) -> Outcome {
    let bytes = |r: &CampaignReport| {
        serde_json::to_vec(&without_timing(serde_json::to_value(r).expect("json"))).expect("json")
    };
    let (a, b) = (bytes(first), bytes(second));
    Outcome {
        pass: a == b,
        detail: format!(
            "repeated campaign JSON without timing: {} vs {} bytes, identical {}",
            a.len(),
            b.len(),
            a == b
        ),
    }
}

fn main() {
    let mut failures = Vec::new();
    let (cora_spec, cora_source) = dataset("cora");
    println!("acceptance: Cora from {cora_source} ({cora_spec})");
    let cora = load(&cora_spec);
    println!(
        "acceptance: {} nodes, {} edges, mean degree {:.2}",
        cora.node_count(),
        cora.edge_count(),
        cora.mean_degree()
    );

    let campaign_cfg = CampaignConfig {
        dataset: cora_spec.clone(),
        seeds: vec![0, 1],
        n_targets: 200,
        methods: Method::ALL.to_vec(),
        metrics: DissimilarityMetric::ALL.to_vec(),
        victims: vec![ModelKind::Gcn, ModelKind::Sgc],
        ..CampaignConfig::default()
    };

    let c = |id, name, secs: Option<u64>| Criterion {
        id,
        name,
        limit: secs.map(Duration::from_secs),
    };
    run(
        c(1, "gradient correctness", Some(10)),
        || gradient(&cora),
        &mut failures,
    );
    run(
        c(
            2,
            "surrogate quality",
            Some(120 * SURROGATE_SEEDS.len() as u64),
        ),
        || surrogate_quality(&cora, cora_source),
        &mut failures,
    );
    let mut oracle_counts = (0, 0);
    run(
        c(3, "exhaustive-oracle equivalence", Some(300)),
        || {
            let (outcome, counts) = exhaustive_oracle(&cora, &campaign_cfg);
            oracle_counts = counts;
            outcome
        },
        &mut failures,
    );

    let started = Instant::now();
    let report = run_campaign_on(&cora, &campaign_cfg).expect("campaign");
    let campaign_secs = started.elapsed().as_secs_f64();
    println!("acceptance: Cora campaign (2 seeds, 200 targets, 3 methods, 3 metrics, 2 victims) took {campaign_secs:.1}s");
    let dir = artifacts();
    export_report(&report, dir.join("cora.json"), ReportFormat::Json).expect("export");
    export_report(&report, dir.join("cora.csv"), ReportFormat::Csv).expect("export");

    run(
        c(4, "method ordering", None),
        || {
            let mut o = method_ordering(&report);
            if campaign_secs > 1800.0 {
                o.pass = false;
                o.detail.push_str("; campaign over 30 min");
            }
            o
        },
        &mut failures,
    );
    run(
        c(5, "dissimilarity ablation", None),
        || metric_ablation(&report),
        &mut failures,
    );

    let mut others = Vec::new();
    for name in ["citeseer", "pubmed"] {
        let (spec, source) = dataset(name);
        let g = load(&spec);
        let cfg = CampaignConfig {
            dataset: spec,
            seeds: vec![0],
            methods: vec![Method::Nma],
            metrics: vec![DissimilarityMetric::Ent],
            victims: vec![ModelKind::Gcn],
            ..campaign_cfg.clone()
        };
        let started = Instant::now();
        others.push((
            name.to_string(),
            run_campaign_on(&g, &cfg).expect("campaign"),
        ));
        println!(
            "acceptance: {name} from {source}, NMA campaign took {:.1}s",
            started.elapsed().as_secs_f64()
        );
    }
    run(
        c(6, "adversarial-node properties", None),
        || adversary_properties(&report, &others),
        &mut failures,
    );

    let repeat = run_campaign_on(&cora, &campaign_cfg).expect("campaign");
    run(
        c(7, "search-space accounting", None),
        || search_space_accounting(&cora, &[&report, &repeat], oracle_counts),
        &mut failures,
    );
    run(
        c(8, "toy-model sweeps", Some(1)),
        proposition_sweeps,
        &mut failures,
    );
    run(
        c(9, "containment study", Some(600)),
        || containment(&cora, &campaign_cfg, &report.seeds[0].targets),
        &mut failures,
    );
    run(
        c(10, "determinism", None),
        || determinism(&report, &repeat),
        &mut failures,
    );

    if failures.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failing criteria {failures:?}");
        std::process::exit(1);
    }
}
