//! Parameter learners built on node-wise ℓ1-constrained logistic
//! regression.
//!
//! Every learner reserves its whole budget on the accountant before
//! reading any data, then runs its per-node fits in parallel. Each fit
//! draws noise from a stream derived from the seed and its own labels, so
//! results do not depend on scheduling.

mod features;
mod ising;
mod mrf;
mod pairwise;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{center_rows_eq1, one_hot_encode, shifted_index, NodeFeatureMap};
pub use ising::{learn_ising, IsingEstimate};
pub use mrf::{learn_mrf_l1, learn_mrf_linf, LinfConfig, MRFEstimate, ParitySource};
pub use pairwise::{learn_pairwise, PairwiseEstimate};

use crate::error::{invalid, Result};
use crate::models::Model;
use crate::pfw::{self, FWOutput, FitOptions, IterationRule, LogisticProblem, PolytopeConstraint};
use crate::privacy::{Accountant, Charge};

/// Default limit on the number of features of a single regression.
pub const DEFAULT_FEATURE_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Known upper bound on the model width.
    pub lambda: f64,
    /// Total zCDP budget of the learner.
    pub rho: f64,
    pub seed: u64,
    /// Zero-noise fits, nothing charged.
    pub non_private: bool,
    pub rule: IterationRule,
    /// Fixed iteration count for every fit.
    pub iterations: Option<usize>,
    pub feature_cap: usize,
}

impl LearnConfig {
    pub fn private(lambda: f64, rho: f64, seed: u64) -> Self {
        LearnConfig {
            lambda,
            rho,
            seed,
            non_private: false,
            rule: IterationRule::Corollary,
            iterations: None,
            feature_cap: DEFAULT_FEATURE_CAP,
        }
    }

    pub fn non_private(lambda: f64, seed: u64) -> Self {
        LearnConfig { non_private: true, rho: 0.0, ..LearnConfig::private(lambda, 0.0, seed) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !self.non_private && !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }

    fn options(&self, seed: u64, label: String) -> FitOptions {
        FitOptions { rule: self.rule, iterations: self.iterations, non_private: self.non_private, seed, label }
    }
}

/// Provenance attached to every estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub seed: u64,
    pub rho: f64,
    pub non_private: bool,
    pub ledger: Vec<Charge>,
    pub warnings: Vec<String>,
    /// Frank-Wolfe iteration count of each fit, in fit order.
    pub iterations: Vec<usize>,
}

impl EstimateMeta {
    fn new(cfg: &LearnConfig) -> Self {
        EstimateMeta { seed: cfg.seed, rho: cfg.rho, non_private: cfg.non_private, ..Default::default() }
    }
}

/// The model descriptor with a `"meta"` member added.
pub fn estimate_json(model: &Model, meta: &EstimateMeta) -> String {
    let mut value = serde_json::to_value(model).expect("models serialize");
    value
        .as_object_mut()
        .expect("models serialize to objects")
        .insert("meta".into(), serde_json::to_value(meta).expect("metadata serializes"));
    serde_json::to_string_pretty(&value).expect("json values serialize")
}

/// One regression to run after its budget has been reserved.
struct Fit {
    problem: Option<LogisticProblem>,
    radius: f64,
    rho: f64,
    options: FitOptions,
}

/// Records all charges of a learner at once, before it reads any data.
fn reserve(accountant: &mut Accountant, charges: &[(String, f64)], non_private: bool) -> Result<()> {
    if non_private {
        Ok(())
    } else {
        accountant.spend_all(charges)
    }
}

/// Runs already-paid fits in parallel. A fit without a problem returns
/// `None`.
fn run_fits(fits: &[Fit]) -> Result<Vec<Option<FWOutput>>> {
    fits.par_iter()
        .map(|fit| {
            let Some(problem) = &fit.problem else { return Ok(None) };
            let constraint = PolytopeConstraint::l1_ball(fit.radius, problem.dim())?;
            let cfg = fit.options.config(problem, fit.radius, fit.rho);
            pfw::run_charged(problem, &constraint, &cfg).map(Some)
        })
        .collect()
}
