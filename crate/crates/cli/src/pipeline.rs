use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use verirank_core::distill::DistillError;
use verirank_core::exec::{execute, Executor, ExternalConfig, ExternalSimulator, MiniBackend};
use verirank_core::judge::{Generator, LlmGenerator, LlmJudge, LlmTestGenerator};
use verirank_core::metrics::{discriminator_nll, reranked_pass_at_1, suite_pass_at_k, Percent, ProblemOutcome};
use verirank_core::model::{
    load_candidates, load_labels, load_problems, validate_pool, Candidate, CandidatePool, DatasetError, Label,
    LabelSet, Problem, RunManifest,
};
use verirank_core::rerank::{
    prefilter_syntax, select, CodeTScorer, DiscriminatorScorer, EmbeddingScorer, Prefiltered, ProbabilityScorer,
    RandomScorer, RerankDecision, Scorer, Strategy,
};
use verirank_gateway::{DiskCache, EndpointConfig, Gateway, MockTransport};

use crate::config::{BackendKind, ConfigError, RunConfig, TransportKind};
use crate::report::{emit_report, EmitError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error("worker pool: {0}")]
    Workers(String),
}

impl RunError {
    /// Bad input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            RunError::Config(_)
                | RunError::Dataset(_)
                | RunError::Distill(DistillError::InvalidSeed(_) | DistillError::Dataset(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Generate,
    Validate,
    Prefilter,
    Score,
    Select,
    Evaluate,
    Summarize,
}

/// A problem quarantined by a failure at `stage`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemError {
    pub problem_id: String,
    pub stage: Stage,
    pub message: String,
}

/// Outcome of one decided problem whose whole slice is labeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemEval {
    pub problem_id: String,
    pub benchmark: String,
    pub k: usize,
    /// Passing candidates among the first `k`.
    pub correct: usize,
    pub selected_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub problems: usize,
    pub decided: usize,
    pub errored: usize,
    pub evaluated: usize,
    pub pass1: Option<Percent>,
    pub reranked_pass1: Option<Percent>,
    pub passk: Option<Percent>,
    /// Log-loss of vote fractions against labels (discriminator only).
    pub nll: Option<f64>,
}

impl MetricSummary {
    /// Recomputes the metrics from per-problem outcomes. `nll` is left unset.
    pub fn from_outcomes(outcomes: &[ProblemEval], k: usize) -> (Option<Percent>, Option<Percent>, Option<Percent>) {
        let sampled: Vec<ProblemOutcome> = outcomes
            .iter()
            .map(|o| ProblemOutcome::new(&o.problem_id, o.k, o.correct))
            .collect();
        (
            suite_pass_at_k(&sampled, 1).ok(),
            reranked_pass_at_1(outcomes.iter().map(|o| Label::from_pass(o.selected_pass))).ok(),
            suite_pass_at_k(&sampled, k).ok(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub stage: Stage,
    pub seconds: f64,
}

/// Wall time per pipeline stage. Stages run one after another (each fanned
/// out over the worker pool), so they sum to roughly the total.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub stages: Vec<StageLatency>,
    pub total_seconds: f64,
    /// Mean single-problem scoring time, independent of parallelism.
    pub scoring_seconds_per_problem: f64,
}

impl Latency {
    pub fn staged_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub calls: usize,
    pub cache_hits: usize,
    pub network_calls: usize,
    pub failures: usize,
}

pub struct RunReport {
    pub config: RunConfig,
    pub manifest: RunManifest,
    pub model: String,
    pub backend: String,
    /// Sorted by problem id.
    pub decisions: Vec<RerankDecision>,
    pub errored: Vec<ProblemError>,
    pub outcomes: Vec<ProblemEval>,
    /// Labels used for evaluation, for every candidate in a decided slice.
    pub labels: LabelSet,
    pub summary: MetricSummary,
    pub latency: Latency,
    pub gateway: GatewayStats,
}

/// Everything a run talks to. Build from config with
/// [`Services::from_config`] or assemble directly to inject test doubles.
pub struct Services {
    pub scorer: Box<dyn Scorer>,
    pub backend: Arc<dyn Executor>,
    pub generator: Option<Box<dyn Generator>>,
    /// Gateways whose call logs feed [`GatewayStats`].
    pub gateways: Vec<Arc<Gateway>>,
}

/// Gateway for `endpoint` honouring the configured transport, cache and
/// offline mode.
pub fn gateway_for(config: &RunConfig, endpoint: &EndpointConfig) -> Result<Arc<Gateway>, RunError> {
    let dir = config.cache_dir();
    let cache = DiskCache::new(&dir).map_err(|source| RunError::Io { path: dir, source })?;
    let gw = if config.offline {
        Gateway::offline(endpoint.clone(), cache)
    } else {
        match config.transport {
            TransportKind::Http => Gateway::http(endpoint.clone()).with_cache(cache),
            TransportKind::Synthetic => {
                Gateway::new(endpoint.clone(), Arc::new(MockTransport::synthetic())).with_cache(cache)
            }
        }
    };
    Ok(Arc::new(gw))
}

pub fn backend_for(config: &RunConfig) -> Result<Arc<dyn Executor>, RunError> {
    Ok(match config.backend {
        BackendKind::Mini => Arc::new(MiniBackend),
        BackendKind::Icarus => Arc::new(ExternalSimulator::new(ExternalConfig::icarus())),
        BackendKind::External => {
            let ext = &config.external;
            let mut sim = ExternalConfig::new(&ext.run_template);
            sim.compile_template = ext.compile_template.clone();
            sim.timeout = Duration::from_secs(ext.timeout_secs);
            if let Some(p) = &ext.failure_pattern {
                sim.failure_pattern =
                    regex::Regex::new(p).map_err(|e| ConfigError::Invalid(format!("external.failure_pattern: {e}")))?;
            }
            Arc::new(ExternalSimulator::new(sim))
        }
    })
}

impl Services {
    pub fn from_config(config: &RunConfig) -> Result<Self, RunError> {
        let backend = backend_for(config)?;
        let mut gateways = Vec::new();
        let mut gw = |ep: &EndpointConfig| -> Result<Arc<Gateway>, RunError> {
            let g = gateway_for(config, ep)?;
            gateways.push(g.clone());
            Ok(g)
        };
        let sampling = config
            .generator
            .as_ref()
            .map(|g| g.sampling.clone())
            .unwrap_or_default();
        let eps = &config.endpoints;
        let scorer: Box<dyn Scorer> = match config.strategy {
            Strategy::Probability => Box::new(ProbabilityScorer),
            Strategy::CodeRank => Box::new(EmbeddingScorer {
                embedder: gw(&eps.embedder)?,
            }),
            Strategy::CodeT => Box::new(CodeTScorer {
                generator: LlmTestGenerator {
                    chat: gw(&eps.generator)?,
                    config: sampling.clone(),
                },
                oracle: backend.clone(),
                tests_per_candidate: config.tests_per_candidate,
            }),
            Strategy::Discriminator => Box::new(DiscriminatorScorer {
                judge: LlmJudge::new(gw(&eps.judge)?, config.judge.clone()),
                m: config.m,
            }),
            Strategy::Random => Box::new(RandomScorer {
                seed: config.seed("random"),
            }),
        };
        let generator: Option<Box<dyn Generator>> = match &config.generator {
            Some(g) => Some(Box::new(LlmGenerator {
                chat: gw(&eps.generator)?,
                config: g.sampling.clone(),
            })),
            None => None,
        };
        Ok(Services {
            scorer,
            backend,
            generator,
            gateways,
        })
    }

    pub fn gateway_stats(&self) -> GatewayStats {
        let mut s = GatewayStats::default();
        for g in &self.gateways {
            for r in g.call_log() {
                s.calls += 1;
                s.cache_hits += r.cache_hit as usize;
                s.network_calls += r.network as usize;
                s.failures += !r.ok as usize;
            }
        }
        s
    }
}

/// Builds services from `config`, runs the pipeline and writes the output
/// directory.
pub fn run_benchmark(config: RunConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let services = Services::from_config(&config)?;
    let report = run_with(config, &services)?;
    emit_report(&report, &report.config.out_dir, &report.config.formats)?;
    Ok(report)
}

struct Timer {
    stages: Vec<StageLatency>,
}

impl Timer {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageLatency {
            stage,
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Per-problem state between stages; `Err` once quarantined.
type Slot = Result<Work, ProblemError>;

struct Work {
    problem: Problem,
    slice: CandidatePool,
    pre: Option<Prefiltered>,
    decision: Option<RerankDecision>,
}

fn quarantine(problem_id: &str, stage: Stage, message: impl ToString) -> ProblemError {
    let message = message.to_string();
    tracing::warn!(problem = problem_id, ?stage, "quarantined: {message}");
    ProblemError {
        problem_id: problem_id.to_string(),
        stage,
        message,
    }
}

fn generate_pool(problem: &Problem, generator: &dyn Generator, n: usize, model: &str) -> Result<CandidatePool, String> {
    let sources = generator.generate(&problem.spec, n).map_err(|e| e.to_string())?;
    let candidates = sources
        .into_iter()
        .enumerate()
        .map(|(i, src)| Candidate {
            generator: model.to_string(),
            ..Candidate::new(&problem.id, format!("{}-s{i}", problem.id), src)
        })
        .collect();
    Ok(CandidatePool::new(&problem.id, candidates))
}

/// Runs generate → validate → prefilter → score → select → evaluate without
/// writing anything. Per-problem failures are quarantined in
/// [`RunReport::errored`]; only configuration and input errors abort.
pub fn run_with(config: RunConfig, services: &Services) -> Result<RunReport, RunError> {
    config.validate()?;
    let start = Instant::now();
    let mut timer = Timer { stages: Vec::new() };
    let (workers, problems, mut pools, given_labels) = timer.time(Stage::Load, || -> Result<_, RunError> {
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| RunError::Workers(e.to_string()))?;
        let mut problems = load_problems(&config.problems)?;
        problems.sort_by(|a, b| a.id.cmp(&b.id));
        let pools = match &config.candidates {
            Some(path) => load_candidates(path, &problems)?,
            None => BTreeMap::new(),
        };
        let labels = config.labels.as_ref().map(load_labels).transpose()?;
        Ok((workers, problems, pools, labels))
    })?;

    let mut errored = Vec::new();
    if let (Some(generator), Some(settings)) = (&services.generator, &config.generator) {
        let n = settings.n.unwrap_or(config.k);
        let model = settings.sampling.model.clone();
        let generated: Vec<_> = timer.time(Stage::Generate, || {
            workers.install(|| {
                problems
                    .par_iter()
                    .map(|p| (p.id.clone(), generate_pool(p, generator.as_ref(), n, &model)))
                    .collect()
            })
        });
        for (id, pool) in generated {
            match pool {
                Ok(pool) => {
                    pools.insert(id, pool);
                }
                Err(e) => errored.push(quarantine(&id, Stage::Generate, e)),
            }
        }
    }

    let mut slots: Vec<Slot> = timer.time(Stage::Validate, || {
        problems
            .iter()
            .filter(|p| !errored.iter().any(|e: &ProblemError| e.problem_id == p.id))
            .map(|p| {
                let pool = pools
                    .get(&p.id)
                    .ok_or_else(|| quarantine(&p.id, Stage::Validate, "no candidates"))?;
                let slice = validate_pool(pool, config.k).map_err(|e| quarantine(&p.id, Stage::Validate, e))?;
                Ok(Work {
                    problem: p.clone(),
                    slice,
                    pre: None,
                    decision: None,
                })
            })
            .collect()
    });

    timer.time(Stage::Prefilter, || {
        workers.install(|| {
            slots.par_iter_mut().flatten().for_each(|w| {
                let pre = prefilter_syntax(&w.slice);
                if pre.fallback {
                    tracing::warn!(problem = %w.problem.id, "no candidate passed the syntax gate; scoring the full slice");
                }
                w.pre = Some(pre);
            })
        })
    });

    let scored: Vec<(Option<Result<_, _>>, Duration)> = timer.time(Stage::Score, || {
        workers.install(|| {
            slots
                .par_iter()
                .map(|slot| {
                    let t = Instant::now();
                    let out = slot.as_ref().ok().map(|w| {
                        let pre = w.pre.as_ref().expect("prefiltered");
                        services.scorer.score(&w.problem, &pre.survivors)
                    });
                    (out, t.elapsed())
                })
                .collect()
        })
    });
    let scoring_total: Duration = scored.iter().map(|(_, d)| *d).sum();
    let scored_count = scored.iter().filter(|(s, _)| s.is_some()).count();

    timer.time(Stage::Select, || {
        for (slot, (sv, _)) in slots.iter_mut().zip(scored) {
            let Ok(w) = slot else { continue };
            let Some(sv) = sv else { continue };
            let decided = sv
                .map_err(|e| quarantine(&w.problem.id, Stage::Score, e))
                .and_then(|sv| select(sv).map_err(|e| quarantine(&w.problem.id, Stage::Select, e)));
            match decided {
                Ok(mut d) => {
                    let pre = w.pre.take().expect("prefiltered");
                    d.prefiltered_out = pre.removed;
                    d.fallback = pre.fallback;
                    w.decision = Some(d);
                }
                Err(e) => *slot = Err(e),
            }
        }
    });

    let evaluated: Vec<Vec<(String, Option<Label>)>> = timer.time(Stage::Evaluate, || {
        workers.install(|| {
            slots
                .par_iter()
                .map(|slot| match slot {
                    Ok(w) => w
                        .slice
                        .candidates
                        .iter()
                        .map(|c| {
                            (
                                c.candidate_id.clone(),
                                label_of(&w.problem, c, given_labels.as_ref(), services),
                            )
                        })
                        .collect(),
                    Err(_) => Vec::new(),
                })
                .collect()
        })
    });

    let (decisions, outcomes, labels, summary) = timer.time(Stage::Summarize, || {
        let mut decisions = Vec::new();
        let mut outcomes = Vec::new();
        let mut labels = LabelSet::default();
        for (slot, slice_labels) in slots.into_iter().zip(evaluated) {
            let w = match slot {
                Ok(w) => w,
                Err(e) => {
                    errored.push(e);
                    continue;
                }
            };
            let decision = w.decision.expect("decided");
            for (cid, label) in &slice_labels {
                if let Some(l) = label {
                    labels.insert(&w.problem.id, cid, *l);
                }
            }
            if slice_labels.iter().all(|(_, l)| l.is_some()) {
                let selected = labels.get(&w.problem.id, &decision.selected_candidate_id);
                outcomes.push(ProblemEval {
                    problem_id: w.problem.id.clone(),
                    benchmark: w.problem.benchmark.clone(),
                    k: config.k,
                    correct: slice_labels.iter().filter(|(_, l)| *l == Some(Label::Pass)).count(),
                    selected_pass: selected == Some(Label::Pass),
                });
            }
            decisions.push(decision);
        }
        errored.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));

        let (pass1, reranked_pass1, passk) = MetricSummary::from_outcomes(&outcomes, config.k);
        let nll = (config.strategy == Strategy::Discriminator)
            .then(|| {
                let pairs: Vec<(f64, Label)> = decisions
                    .iter()
                    .flat_map(|d| {
                        d.score_vector
                            .scores
                            .iter()
                            .filter_map(|(cid, s)| labels.get(&d.problem_id, cid).map(|l| (*s, l)))
                    })
                    .collect();
                discriminator_nll(&pairs).ok()
            })
            .flatten();
        let summary = MetricSummary {
            problems: problems.len(),
            decided: decisions.len(),
            errored: errored.len(),
            evaluated: outcomes.len(),
            pass1,
            reranked_pass1,
            passk,
            nll,
        };
        (decisions, outcomes, labels, summary)
    });

    let model = config.model_label.clone().unwrap_or_else(|| {
        pools
            .values()
            .flat_map(|p| p.candidates.first())
            .map(|c| c.generator.clone())
            .find(|g| !g.is_empty())
            .unwrap_or_else(|| "unknown".into())
    });
    let digest = config.digest();
    let manifest = RunManifest {
        run_id: digest[..12].to_string(),
        config_digest: digest,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        strategy: config.strategy.name().to_string(),
        k: config.k,
        m: config.m,
        seeds: config.seeds.clone(),
    };
    let latency = Latency {
        stages: timer.stages,
        total_seconds: start.elapsed().as_secs_f64(),
        scoring_seconds_per_problem: if scored_count == 0 {
            0.0
        } else {
            scoring_total.as_secs_f64() / scored_count as f64
        },
    };
    Ok(RunReport {
        backend: services.backend.backend_id().to_string(),
        gateway: services.gateway_stats(),
        config,
        manifest,
        model,
        decisions,
        errored,
        outcomes,
        labels,
        summary,
        latency,
    })
}

fn label_of(problem: &Problem, c: &Candidate, given: Option<&LabelSet>, services: &Services) -> Option<Label> {
    if let Some(l) = given.and_then(|g| g.get(&problem.id, &c.candidate_id)) {
        return Some(l);
    }
    let tb = problem.testbench.as_deref()?;
    let result = execute(c, tb, services.backend.as_ref());
    let label = result.status.label();
    if label.is_none() {
        tracing::warn!(candidate = %c.candidate_id, status = %result.status, "left unlabeled");
    }
    label
}
