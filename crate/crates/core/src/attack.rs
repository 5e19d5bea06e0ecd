//! Targeted link-addition attacks guided by link noise.
//!
//! * NGA adds the `Δ` links with the highest noise, ranked once on the clean graph.
//! * NMA keeps the top-`δ1` noisy links and greedily adds, `Δ` times, the one that
//!   lowers the surrogate's classification margin the most.
//! * NMAB keeps the top-`δ2` noisy links and runs a beam search: the `len_sin` best
//!   single links extend the `len_re` best sequences, one link per round.
//!
//! The classification margin of a link set is the surrogate's probability of the
//! target's true class on the perturbed graph minus the same probability on the
//! clean graph. Noise is never recomputed during an attack, and the victim is
//! never queried.

use std::collections::HashSet;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{forward, LocalForward, ProbMatrix, TrainedModel};
use crate::graph::{DeltaGraph, Graph, GraphView, Link};
use crate::noise::{
    rank_candidates_by, representation, CandidateList, DissimilarityMetric, Representation,
};
use crate::scalar::{argmax, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Nga,
    Nma,
    Nmab,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Nga, Method::Nma, Method::Nmab];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Nga => "NGA",
            Method::Nma => "NMA",
            Method::Nmab => "NMAB",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NGA" => Ok(Method::Nga),
            "NMA" => Ok(Method::Nma),
            "NMAB" => Ok(Method::Nmab),
            _ => Err(Error::Config(format!(
                "unknown attack method `{s}` (NGA, NMA, NMAB)"
            ))),
        }
    }
}

/// Budget and search widths of one attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Maximum number of links added (`Δ`).
    pub budget: usize,
    /// Candidate pool of NMA (`δ1`).
    pub delta1: usize,
    /// Candidate pool of NMAB (`δ2`).
    pub delta2: usize,
    /// Single links kept for extension in NMAB.
    pub len_sin: usize,
    /// Sequences kept per NMAB round.
    pub len_re: usize,
    pub metric: DissimilarityMetric,
}

impl AttackConfig {
    /// Default widths for a target of the given structural degree:
    /// `Δ = max(degree, 1)`, `δ1 = 5Δ`, `δ2 = 10Δ`, `len_sin = 3Δ`, `len_re = 10`.
    pub fn for_degree(degree: usize, metric: DissimilarityMetric) -> Self {
        let budget = degree.max(1);
        AttackConfig {
            budget,
            delta1: 5 * budget,
            delta2: 10 * budget,
            len_sin: 3 * budget,
            len_re: 10,
            metric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.delta1 < self.budget || self.delta2 < self.budget {
            return Err(Error::Config(format!(
                "candidate pools ({}, {}) must be at least the budget {}",
                self.delta1, self.delta2, self.budget
            )));
        }
        if self.len_sin == 0 || self.len_sin > self.delta2 || self.len_re == 0 {
            return Err(Error::Config(format!(
                "need 1 <= len_sin ({}) <= delta2 ({}) and len_re ({}) >= 1",
                self.len_sin, self.delta2, self.len_re
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub target: usize,
    pub label: usize,
    pub method: Method,
    pub metric: DissimilarityMetric,
    /// Links in the order they were added, each written `[target, adversary]`.
    pub links: Vec<Link>,
    /// Margin of each prefix of `links`.
    pub margins: Vec<f64>,
    pub final_margin: f64,
    pub success_vs_surrogate: bool,
    /// Surrogate evaluations of perturbed graphs spent by the search.
    pub evaluations: u64,
    /// The candidate pool ran out before the search finished.
    pub exhausted: bool,
    pub timing: Timing,
}

impl AttackResult {
    /// Adversarial endpoints, in link order.
    pub fn adversaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .map(move |&(a, b)| if a == self.target { b } else { a })
    }
}

/// Closed-form number of surrogate evaluations of a method when `available`
/// valid candidates exist for the target. Pool widths are capped at `available`.
pub fn search_space(method: Method, cfg: &AttackConfig, available: usize) -> u64 {
    let budget = cfg.budget.min(available) as u64;
    match method {
        Method::Nga => budget,
        Method::Nma => budget * cfg.delta1.min(available) as u64,
        Method::Nmab => {
            let pool = cfg.delta2.min(available) as u64;
            let sin = (cfg.len_sin as u64).min(pool);
            pool + sin * cfg.len_re as u64 * (cfg.budget as u64 - 1)
        }
    }
}

/// Margin of `links` for node `u` and class `c`, by full forward passes.
pub fn classification_margin<T: Scalar>(
    m: &TrainedModel<T>,
    g: &Graph<T>,
    links: &[Link],
    u: usize,
    c: usize,
) -> Result<f64> {
    if u >= g.node_count() || c >= m.class_count() {
        return Err(Error::Config(format!("node {u} or class {c} out of range")));
    }
    let perturbed = DeltaGraph::new(g, links)?;
    if links.is_empty() {
        return Ok(0.0);
    }
    let before = forward(m, g)?.row(u)[c].as_f64();
    let after = forward(m, &perturbed)?.row(u)[c].as_f64();
    Ok(after - before)
}

/// One NMAB sequence with the margin of each of its prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub links: Vec<Link>,
    pub margins: Vec<f64>,
}

impl Sequence {
    pub fn margin(&self) -> f64 {
        *self.margins.last().expect("sequences are nonempty")
    }
}

/// Everything NMAB evaluated, round by round, for inspection in tests and studies.
#[derive(Debug, Clone, Default)]
pub struct BeamTrace {
    /// Every sequence evaluated in each round; round 0 holds the singletons.
    pub evaluated: Vec<Vec<Sequence>>,
    /// The beam kept after each round.
    pub kept: Vec<Vec<Sequence>>,
}

/// Attacks against one surrogate on one clean graph.
///
/// Holds the surrogate's clean output and an incremental evaluator, so repeated
/// attacks on different targets share the setup cost.
pub struct Attacker<'a, T> {
    graph: &'a Graph<T>,
    local: LocalForward<'a, T>,
    clean: ProbMatrix<T>,
    reps: Array2<T>,
}

/// Margin evaluator for one target; counts every perturbed evaluation.
struct Scorer<'s, 'a, T> {
    attacker: &'s Attacker<'a, T>,
    target: usize,
    label: usize,
    clean: f64,
    evaluations: u64,
}

impl<T: Scalar> Scorer<'_, '_, T> {
    /// Margin and predicted class of the target with `links` added.
    fn score(&mut self, links: &[Link]) -> (f64, usize) {
        self.evaluations += 1;
        let p = self
            .attacker
            .local
            .probabilities_unchecked(self.target, links);
        (p[self.label].as_f64() - self.clean, argmax(&p))
    }
}

fn link(u: usize, v: usize) -> Link {
    (u, v)
}

fn set_key(links: &[Link]) -> Vec<usize> {
    let mut key: Vec<usize> = links.iter().map(|&(_, v)| v).collect();
    key.sort_unstable();
    key
}

impl<'a, T: Scalar> Attacker<'a, T> {
    pub fn new(graph: &'a Graph<T>, surrogate: &'a TrainedModel<T>) -> Result<Self> {
        Self::with_representation(graph, surrogate, Representation::Output)
    }

    pub fn with_representation(
        graph: &'a Graph<T>,
        surrogate: &'a TrainedModel<T>,
        repr: Representation,
    ) -> Result<Self> {
        let local = LocalForward::new(surrogate, graph)?;
        let clean = forward(surrogate, graph)?;
        let reps = match repr {
            Representation::Output => clean.values().clone(),
            Representation::Hidden => representation(surrogate, graph, repr)?,
        };
        Ok(Attacker {
            graph,
            local,
            clean,
            reps,
        })
    }

    pub fn graph(&self) -> &'a Graph<T> {
        self.graph
    }

    pub fn surrogate(&self) -> &'a TrainedModel<T> {
        self.local.model()
    }

    /// Surrogate output on the clean graph.
    pub fn clean_output(&self) -> &ProbMatrix<T> {
        &self.clean
    }

    pub fn candidates(
        &self,
        u: usize,
        limit: usize,
        metric: DissimilarityMetric,
    ) -> Result<CandidateList> {
        rank_candidates_by(self.graph, &self.reps, u, limit, metric)
    }

    /// Number of valid adversarial nodes for `u`.
    pub fn available(&self, u: usize) -> usize {
        self.graph.node_count() - 1 - self.graph.degree(u)
    }

    fn scorer(&self, u: usize) -> Scorer<'_, 'a, T> {
        let label = self.graph.labels()[u];
        Scorer {
            attacker: self,
            target: u,
            label,
            clean: self.clean.row(u)[label].as_f64(),
            evaluations: 0,
        }
    }

    /// Surrogate margin of an arbitrary valid link set for `u`, without counting.
    pub fn margin(&self, u: usize, links: &[Link]) -> Result<f64> {
        let label = self.graph.labels()[u];
        let p = self.local.probabilities(u, links)?;
        Ok(p[label].as_f64() - self.clean.row(u)[label].as_f64())
    }

    pub fn run(&self, method: Method, u: usize, cfg: &AttackConfig) -> Result<AttackResult> {
        match method {
            Method::Nga => self.nga(u, cfg),
            Method::Nma => self.nma(u, cfg),
            Method::Nmab => self.nmab(u, cfg),
        }
    }

    fn check_target(&self, u: usize, cfg: &AttackConfig) -> Result<()> {
        cfg.validate()?;
        if u >= self.graph.node_count() {
            return Err(Error::Config(format!("target {u} out of range")));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        method: Method,
        cfg: &AttackConfig,
        scorer: Scorer<'_, 'a, T>,
        links: Vec<Link>,
        margins: Vec<f64>,
        success: bool,
        exhausted: bool,
        started: Instant,
    ) -> AttackResult {
        AttackResult {
            target: scorer.target,
            label: scorer.label,
            method,
            metric: cfg.metric,
            final_margin: margins.last().copied().unwrap_or(0.0),
            links,
            margins,
            success_vs_surrogate: success,
            evaluations: scorer.evaluations,
            exhausted,
            timing: Timing {
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            },
        }
    }

    /// Adds the `Δ` noisiest valid links. Margins are measured afterwards on each prefix.
    pub fn nga(&self, u: usize, cfg: &AttackConfig) -> Result<AttackResult> {
        self.check_target(u, cfg)?;
        let started = Instant::now();
        let pool = self.candidates(u, cfg.budget, cfg.metric)?;
        if pool.truncated {
            return Err(Error::InsufficientCandidates {
                needed: cfg.budget,
                found: pool.len(),
            });
        }
        let mut scorer = self.scorer(u);
        let links: Vec<Link> = pool.candidates().map(|v| link(u, v)).collect();
        let mut margins = Vec::with_capacity(links.len());
        let mut prediction = self.clean.predict(u);
        for k in 1..=links.len() {
            let (margin, pred) = scorer.score(&links[..k]);
            margins.push(margin);
            prediction = pred;
        }
        let success = prediction != scorer.label;
        Ok(self.finish(
            Method::Nga,
            cfg,
            scorer,
            links,
            margins,
            success,
            false,
            started,
        ))
    }

    /// Greedy margin minimisation over the `δ1` noisiest links.
    ///
    /// Every step re-scores the whole pool against the current perturbation:
    /// unused candidates are scored with the candidate added, used ones score the
    /// current set. Only unused candidates can be selected; ties go to the lower
    /// margin, then to the earlier (noisier) candidate.
    pub fn nma(&self, u: usize, cfg: &AttackConfig) -> Result<AttackResult> {
        self.check_target(u, cfg)?;
        let started = Instant::now();
        let pool: Vec<usize> = self
            .candidates(u, cfg.delta1, cfg.metric)?
            .candidates()
            .collect();
        let mut scorer = self.scorer(u);
        let mut used = vec![false; pool.len()];
        let mut links: Vec<Link> = Vec::with_capacity(cfg.budget);
        let mut margins = Vec::with_capacity(cfg.budget);
        let mut prediction = self.clean.predict(u);
        let mut exhausted = false;
        let mut trial: Vec<Link> = Vec::with_capacity(cfg.budget);
        for _ in 0..cfg.budget {
            if used.iter().all(|&x| x) {
                exhausted = true;
                break;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, &v) in pool.iter().enumerate() {
                trial.clear();
                trial.extend_from_slice(&links);
                if !used[i] {
                    trial.push(link(u, v));
                }
                let (margin, pred) = scorer.score(&trial);
                if !used[i] && best.is_none_or(|(m, _, _)| margin < m) {
                    best = Some((margin, i, pred));
                }
            }
            let (margin, i, pred) = best.expect("an unused candidate exists");
            used[i] = true;
            links.push(link(u, pool[i]));
            margins.push(margin);
            prediction = pred;
        }
        let success = prediction != scorer.label;
        Ok(self.finish(
            Method::Nma,
            cfg,
            scorer,
            links,
            margins,
            success,
            exhausted,
            started,
        ))
    }

    pub fn nmab(&self, u: usize, cfg: &AttackConfig) -> Result<AttackResult> {
        Ok(self.nmab_traced(u, cfg)?.0)
    }

    /// NMAB returning the full beam history alongside the result.
    ///
    /// Round 0 scores every pool link on its own. The `len_sin` best become the
    /// extension set and the `len_re` best the initial beam. Each later round
    /// extends every beam sequence by every extension link it does not already
    /// contain, skipping link sets seen earlier in the round, and keeps the
    /// `len_re` lowest margins (ties by generation order). The result is the
    /// lowest-margin sequence evaluated in any round, ties going to the earlier
    /// round. A round that produces nothing ends the search and marks the result
    /// exhausted.
    pub fn nmab_traced(&self, u: usize, cfg: &AttackConfig) -> Result<(AttackResult, BeamTrace)> {
        self.check_target(u, cfg)?;
        let started = Instant::now();
        let pool: Vec<usize> = self
            .candidates(u, cfg.delta2, cfg.metric)?
            .candidates()
            .collect();
        let mut scorer = self.scorer(u);
        let mut trace = BeamTrace::default();
        if pool.is_empty() {
            let result = self.finish(
                Method::Nmab,
                cfg,
                scorer,
                Vec::new(),
                Vec::new(),
                self.clean.predict(u) != self.graph.labels()[u],
                true,
                started,
            );
            return Ok((result, trace));
        }

        let mut singles: Vec<(Sequence, usize, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let links = vec![link(u, v)];
                let (margin, pred) = scorer.score(&links);
                (
                    Sequence {
                        links,
                        margins: vec![margin],
                    },
                    i,
                    pred,
                )
            })
            .collect();
        trace
            .evaluated
            .push(singles.iter().map(|s| s.0.clone()).collect());
        singles.sort_by(|a, b| a.0.margin().total_cmp(&b.0.margin()).then(a.1.cmp(&b.1)));
        let extensions: Vec<Link> = singles
            .iter()
            .take(cfg.len_sin)
            .map(|s| s.0.links[0])
            .collect();
        let mut beam: Vec<(Sequence, usize)> = singles
            .into_iter()
            .take(cfg.len_re)
            .map(|(s, _, pred)| (s, pred))
            .collect();
        trace.kept.push(beam.iter().map(|s| s.0.clone()).collect());
        let mut best = beam[0].clone();

        let mut exhausted = false;
        for _ in 1..cfg.budget {
            let mut seen: HashSet<Vec<usize>> = HashSet::new();
            let mut next: Vec<(Sequence, usize, usize)> = Vec::new();
            for (seq, _) in &beam {
                for &extra in &extensions {
                    if seq.links.contains(&extra) {
                        continue;
                    }
                    let mut links = seq.links.clone();
                    links.push(extra);
                    if !seen.insert(set_key(&links)) {
                        continue;
                    }
                    let (margin, pred) = scorer.score(&links);
                    let mut margins = seq.margins.clone();
                    margins.push(margin);
                    let order = next.len();
                    next.push((Sequence { links, margins }, order, pred));
                }
            }
            if next.is_empty() {
                exhausted = true;
                break;
            }
            trace
                .evaluated
                .push(next.iter().map(|s| s.0.clone()).collect());
            next.sort_by(|a, b| a.0.margin().total_cmp(&b.0.margin()).then(a.1.cmp(&b.1)));
            next.truncate(cfg.len_re);
            beam = next.into_iter().map(|(s, _, pred)| (s, pred)).collect();
            trace.kept.push(beam.iter().map(|s| s.0.clone()).collect());
            if beam[0].0.margin() < best.0.margin() {
                best = beam[0].clone();
            }
        }

        let (best, pred) = best;
        let success = pred != scorer.label;
        let result = self.finish(
            Method::Nmab,
            cfg,
            scorer,
            best.links,
            best.margins,
            success,
            exhausted,
            started,
        );
        Ok((result, trace))
    }
}
