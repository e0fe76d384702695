//! Seeded experiment sweeps over sample sizes, with per-trial and per-`n`
//! CSV reports.
//!
//! Every trial seed is derived from the master seed, `n` and the trial index
//! alone, so reordering the grid or changing the thread count leaves each
//! row unchanged.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::learners::{learn_ising, learn_mrf_l1, learn_mrf_linf, learn_pairwise, LearnConfig, LinfConfig};
use crate::models::{fixtures, IsingModel, Model};
use crate::polynomial::MonomialIndex;
use crate::privacy::{Accountant, Charge, SPEND_TOLERANCE};
use crate::rng::{self, labels};
use crate::sampler::{exact_sample, gibbs_sample, DEFAULT_BURN_IN};
use crate::structure::{stable_mode_structure, BaseLearner, BaseStructure, GraphEstimate, ModelKind, StabilityConfig};

pub const DEFAULT_TIMEOUT_SECS: u64 = 300;

/// Ground truth for a sweep: a named fixture or an inline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fixture", rename_all = "snake_case")]
pub enum ModelSource {
    MatchedPairs { p: usize, eta: f64 },
    RandomIsing { p: usize, width: f64, density: f64, seed: u64 },
    RandomPairwise { p: usize, k: usize, width: f64, density: f64, seed: u64 },
    RandomMrf { p: usize, t: usize, terms: usize, width: f64, seed: u64 },
    Inline { model: Model },
}

impl ModelSource {
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSource::MatchedPairs { p, eta } => IsingModel::matched_pairs(*p, *eta)?.into(),
            ModelSource::RandomIsing { p, width, density, seed } => {
                fixtures::random_ising(*p, *width, *density, &mut ChaCha8Rng::seed_from_u64(*seed)).into()
            }
            ModelSource::RandomPairwise { p, k, width, density, seed } => {
                fixtures::random_pairwise(*p, *k, *width, *density, &mut ChaCha8Rng::seed_from_u64(*seed)).into()
            }
            ModelSource::RandomMrf { p, t, terms, width, seed } => {
                fixtures::random_mrf(*p, *t, *terms, *width, &mut ChaCha8Rng::seed_from_u64(*seed)).into()
            }
            ModelSource::Inline { model } => model.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Parameters,
    Structure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ising,
    Pairwise,
    MrfL1,
    MrfLinf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Privacy {
    None,
    Zcdp { rho: f64 },
    Approx { eps: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Exact,
    Gibbs,
}

fn default_trials() -> usize {
    10
}

fn default_lambda() -> f64 {
    1.0
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelSource,
    pub task: Task,
    pub learner: LearnerKind,
    pub privacy: Privacy,
    /// Sample sizes.
    pub grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Success threshold on the max entry error of parameter tasks.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Edge threshold of structure tasks.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    /// Order of `t`-wise learners; the model's order if absent.
    #[serde(default)]
    pub t: Option<usize>,
    #[serde(default)]
    pub blocks: Option<usize>,
    /// Frank-Wolfe iterations per fit, overriding the default rule.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub sampler: Option<SamplerKind>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.grid.is_empty() || self.grid.contains(&0) {
            return Err(invalid("grid must be a nonempty list of positive sizes"));
        }
        if !(self.lambda > 0.0) {
            return Err(invalid("lambda must be positive"));
        }
        match self.task {
            Task::Parameters => {
                if !self.alpha.is_some_and(|a| a > 0.0) {
                    return Err(invalid("parameter tasks need a positive alpha"));
                }
                if matches!(self.privacy, Privacy::Approx { .. }) {
                    return Err(invalid("parameter learners take a zcdp budget"));
                }
            }
            Task::Structure => {
                if !self.eta.is_some_and(|e| e > 0.0) {
                    return Err(invalid("structure tasks need a positive eta"));
                }
                if matches!(self.privacy, Privacy::Zcdp { .. }) {
                    return Err(invalid("structure learning takes an approx budget"));
                }
                if self.learner == LearnerKind::MrfLinf {
                    return Err(invalid("structure learning uses the l1 learner for t-wise models"));
                }
            }
        }
        if self.timeout_secs == 0 {
            return Err(invalid("timeout must be positive"));
        }
        Ok(())
    }

    fn order(&self, model: &Model) -> usize {
        self.t.unwrap_or(match model {
            Model::Mrf(m) => m.order(),
            _ => 2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub max_entry_error: Option<f64>,
    pub recovered: Option<bool>,
    pub bottom: Option<bool>,
    pub success: bool,
    pub rho_spent: f64,
    pub ledger: Vec<Charge>,
    pub message: String,
    /// Seconds; never written to CSV.
    pub wall_time: f64,
}

/// Seed of trial `trial` at sample size `n`.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    rng::derive_seed(master, &[labels::TRIAL, n as u64, trial as u64])
}

struct Outcome {
    error: Option<f64>,
    recovered: Option<bool>,
    bottom: Option<bool>,
    ledger: Vec<Charge>,
}

fn draw(spec: &ExperimentSpec, model: &Model, n: usize, seed: u64) -> Result<Dataset> {
    let seed = rng::derive_seed(seed, &[labels::SAMPLE]);
    match spec.sampler.unwrap_or(SamplerKind::Exact) {
        SamplerKind::Exact => exact_sample(model, n, seed),
        SamplerKind::Gibbs => gibbs_sample(model, n, DEFAULT_BURN_IN, 1, seed),
    }
}

/// Largest absolute entry difference between the true and estimated
/// parameters: couplings for Ising models, centered weights for pairwise
/// models, and all nonconstant coefficients for `t`-wise models.
pub fn max_entry_error(truth: &Model, estimate: &Model) -> Result<f64> {
    match (truth, estimate) {
        (Model::Ising(a), Model::Ising(b)) if a.dim() == b.dim() => {
            let p = a.dim();
            Ok((0..p)
                .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
                .map(|(i, j)| (a.coupling(i, j) - b.coupling(i, j)).abs())
                .fold(0.0, f64::max))
        }
        (Model::Pairwise(a), Model::Pairwise(b)) if a.dim() == b.dim() && a.alphabet() == b.alphabet() => {
            let (a, b) = (a.center(), b.center());
            let (p, k) = (a.dim(), a.alphabet());
            let mut worst: f64 = 0.0;
            for i in 0..p {
                for j in i + 1..p {
                    for u in 0..k {
                        for v in 0..k {
                            worst = worst.max((a.weight(i, j, u, v) - b.weight(i, j, u, v)).abs());
                        }
                    }
                }
            }
            Ok(worst)
        }
        (Model::Ising(a), Model::Mrf(_)) => max_entry_error(&a.to_mrf().into(), estimate),
        (Model::Mrf(a), Model::Mrf(b)) if a.dim() == b.dim() => {
            let (a, b) = (a.polynomial(), b.polynomial());
            let support: BTreeSet<&MonomialIndex> = a.terms().chain(b.terms()).map(|(m, _)| m).collect();
            Ok(support
                .into_iter()
                .filter(|m| !m.is_empty())
                .map(|m| (a.coefficient(m) - b.coefficient(m)).abs())
                .fold(0.0, f64::max))
        }
        _ => Err(invalid("estimate and ground truth are of different families")),
    }
}

fn run_parameters(spec: &ExperimentSpec, model: &Model, data: &Dataset, seed: u64) -> Result<Outcome> {
    let (mut cfg, budget) = match spec.privacy {
        Privacy::None => (LearnConfig::non_private(spec.lambda, seed), 0.0),
        Privacy::Zcdp { rho } => (LearnConfig::private(spec.lambda, rho, seed), rho),
        Privacy::Approx { .. } => unreachable!("rejected by validate"),
    };
    cfg.iterations = spec.iterations;
    let mut acct = Accountant::new(budget)?;
    let t = spec.order(model);
    let estimate: Model = match spec.learner {
        LearnerKind::Ising => learn_ising(data, &cfg, &mut acct)?.model.into(),
        LearnerKind::Pairwise => learn_pairwise(data, &cfg, &mut acct)?.model.into(),
        LearnerKind::MrfL1 => learn_mrf_l1(data, t, &cfg, &mut acct)?.model.into(),
        LearnerKind::MrfLinf => learn_mrf_linf(data, t, &cfg, &LinfConfig::default(), &mut acct)?.model.into(),
    };
    let truth = match (&spec.learner, model) {
        (LearnerKind::Pairwise, Model::Ising(m)) => m.to_pairwise().into(),
        _ => model.clone(),
    };
    Ok(Outcome {
        error: Some(max_entry_error(&truth, &estimate)?),
        recovered: None,
        bottom: None,
        ledger: acct.ledger().to_vec(),
    })
}

fn run_structure(spec: &ExperimentSpec, model: &Model, data: &Dataset, seed: u64) -> Result<Outcome> {
    let kind = match spec.learner {
        LearnerKind::Ising => ModelKind::Ising,
        LearnerKind::Pairwise => ModelKind::Pairwise,
        _ => ModelKind::Mrf { t: spec.order(model) },
    };
    let mut base = BaseStructure::new(kind, spec.lambda, spec.eta.expect("validated"));
    base.iterations = spec.iterations;
    let estimate = match spec.privacy {
        Privacy::None => base.learn(data)?,
        Privacy::Approx { eps, delta } => {
            let cfg = StabilityConfig { blocks: spec.blocks, ..StabilityConfig::new(eps, delta) };
            stable_mode_structure(data, &base, &cfg, seed)?
        }
        Privacy::Zcdp { .. } => unreachable!("rejected by validate"),
    };
    let truth = GraphEstimate::new(model.dim(), model.edges())?;
    Ok(Outcome {
        error: None,
        recovered: Some(estimate == truth),
        bottom: Some(!estimate.is_released()),
        ledger: Vec::new(),
    })
}

fn run_trial(spec: &ExperimentSpec, model: &Model, n: usize, seed: u64) -> Result<Outcome> {
    let data = draw(spec, model, n, seed)?;
    match spec.task {
        Task::Parameters => run_parameters(spec, model, &data, seed),
        Task::Structure => run_structure(spec, model, &data, seed),
    }
}

fn trial_result(spec: &ExperimentSpec, model: &Model, n: usize, trial: usize) -> TrialResult {
    let seed = trial_seed(spec.seed, n, trial);
    let start = Instant::now();
    let (tx, rx) = mpsc::channel();
    let (job_spec, job_model) = (spec.clone(), model.clone());
    // a timed-out trial is abandoned, not cancelled
    std::thread::spawn(move || {
        let _ = tx.send(run_trial(&job_spec, &job_model, n, seed));
    });
    let mut row = TrialResult {
        n,
        trial,
        seed,
        status: TrialStatus::Ok,
        max_entry_error: None,
        recovered: None,
        bottom: None,
        success: false,
        rho_spent: 0.0,
        ledger: Vec::new(),
        message: String::new(),
        wall_time: 0.0,
    };
    match rx.recv_timeout(Duration::from_secs(spec.timeout_secs)) {
        Ok(Ok(out)) => {
            row.success = match (out.error, out.recovered) {
                (Some(e), _) => e <= spec.alpha.expect("validated"),
                (_, Some(r)) => r,
                _ => false,
            };
            row.max_entry_error = out.error;
            row.recovered = out.recovered;
            row.bottom = out.bottom;
            row.rho_spent = out.ledger.iter().map(|c| c.rho).sum();
            row.ledger = out.ledger;
        }
        Ok(Err(e)) => {
            row.status = TrialStatus::Error;
            row.message = e.to_string();
        }
        Err(_) => {
            row.status = TrialStatus::Timeout;
            row.message = format!("exceeded {} s", spec.timeout_secs);
        }
    }
    row.wall_time = start.elapsed().as_secs_f64();
    row
}

/// One row per `(n, trial)`, sorted by `n` then trial index. Failed trials
/// are recorded rather than propagated.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let model = spec.build_model()?;
    let jobs: Vec<(usize, usize)> = spec.grid.iter().flat_map(|&n| (0..spec.trials).map(move |t| (n, t))).collect();
    // Trials wait on their own threads, which use the global pool, so the
    // waiting happens on a separate pool.
    let waiters = rayon::ThreadPoolBuilder::new()
        .num_threads(rayon::current_num_threads())
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let mut rows: Vec<TrialResult> =
        waiters.install(|| jobs.par_iter().map(|&(n, t)| trial_result(spec, &model, n, t)).collect());
    rows.sort_by_key(|r| (r.n, r.trial));
    if let Privacy::Zcdp { rho } = spec.privacy {
        for r in &rows {
            assert!(r.rho_spent <= rho + SPEND_TOLERANCE, "trial {} at n = {} overspent", r.trial, r.n);
        }
    }
    Ok(rows)
}

impl ExperimentSpec {
    pub fn build_model(&self) -> Result<Model> {
        self.model.build()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub trials: usize,
    pub success_rate: f64,
    /// Over trials that produced an error value.
    pub median_error: Option<f64>,
    pub bottom_rate: f64,
    pub failures: usize,
    pub mean_wall_time: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// One row per distinct `n`, in increasing order.
pub fn summarize(rows: &[TrialResult]) -> Vec<SummaryRow> {
    let sizes: BTreeSet<usize> = rows.iter().map(|r| r.n).collect();
    sizes
        .into_iter()
        .map(|n| {
            let group: Vec<&TrialResult> = rows.iter().filter(|r| r.n == n).collect();
            let count = group.len() as f64;
            SummaryRow {
                n,
                trials: group.len(),
                success_rate: group.iter().filter(|r| r.success).count() as f64 / count,
                median_error: median(group.iter().filter_map(|r| r.max_entry_error).collect()),
                bottom_rate: group.iter().filter(|r| r.bottom == Some(true)).count() as f64 / count,
                failures: group.iter().filter(|r| r.status != TrialStatus::Ok).count(),
                mean_wall_time: group.iter().map(|r| r.wall_time).sum::<f64>() / count,
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub const TRIAL_HEADER: [&str; 11] =
    ["n", "trial", "seed", "status", "max_entry_error", "recovered", "bottom", "success", "rho_spent", "charges", "message"];

pub const SUMMARY_HEADER: [&str; 6] = ["n", "trials", "success_rate", "median_error", "bottom_rate", "failures"];

pub fn write_trials_csv<W: Write>(rows: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_HEADER)?;
    for r in rows {
        let status = match r.status {
            TrialStatus::Ok => "ok",
            TrialStatus::Error => "error",
            TrialStatus::Timeout => "timeout",
        };
        w.write_record([
            r.n.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            status.to_string(),
            opt(r.max_entry_error),
            opt(r.recovered),
            opt(r.bottom),
            r.success.to_string(),
            r.rho_spent.to_string(),
            r.ledger.len().to_string(),
            r.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.trials.to_string(),
            r.success_rate.to_string(),
            opt(r.median_error),
            r.bottom_rate.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary, including wall time.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:>10} {:>7} {:>12} {:>13} {:>9} {:>9} {:>10}\n",
        "n", "trials", "success_rate", "median_error", "⊥_rate", "failures", "wall_time"
    );
    for r in rows {
        let err = r.median_error.map_or("-".to_string(), |e| format!("{e:.4}"));
        let _ = writeln!(
            s,
            "{:>10} {:>7} {:>12.3} {:>13} {:>9.3} {:>9} {:>9.2}s",
            r.n, r.trials, r.success_rate, err, r.bottom_rate, r.failures, r.mean_wall_time
        );
    }
    s
}

/// Writes `<dir>/<name>.csv` with columns `n,success_rate`.
pub fn write_plot_data(dir: &Path, name: &str, rows: &[SummaryRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
    w.write_record(["n", "success_rate"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.success_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
