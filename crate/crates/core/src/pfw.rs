//! Frank-Wolfe over an ℓ1 ball with noisy vertex selection, and its
//! specialization to sparse logistic regression.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::privacy::{frank_wolfe_noise_scale, laplace_noise, Accountant};
use crate::rng::{self, StreamRng};

/// Iteration count used when no noise is added and no count is given.
pub const NON_PRIVATE_ITERATIONS: usize = 400;

/// Weighted logistic regression data. Every feature lies in `[-1, 1]` and
/// every label is ±1. Row weights are multiplicities, so a dataset with
/// repeated rows can be stored once per distinct row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProblem {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    weights: Vec<f64>,
}

impl LogisticProblem {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|x| x.len() != dim) {
            return Err(invalid("feature vectors differ in length"));
        }
        let n = labels.len();
        let flat = features.into_iter().flatten().collect();
        Self::from_flat(dim, flat, labels.into_iter().map(f64::from).collect(), vec![1.0; n])
    }

    /// Row-major features with one weight per row.
    pub fn from_flat(dim: usize, features: Vec<f64>, labels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if features.len() != dim * labels.len() || weights.len() != labels.len() {
            return Err(invalid("features, labels and weights disagree in length"));
        }
        if features.iter().any(|x| !(x.abs() <= 1.0)) {
            return Err(invalid("features must lie in [-1, 1]"));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(invalid("labels must be ±1"));
        }
        if weights.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
            return Err(invalid("row weights must be nonnegative"));
        }
        Ok(LogisticProblem { dim, features, labels, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored rows.
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    /// Total weight, the `n` of the loss and of the noise scale.
    pub fn size(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|j| dot(self.row(j), w)).collect()
    }

    /// Mean loss `(1/n) Σ log(1 + exp(-y⟨w, x⟩))`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let margins = self.margins(w);
        self.loss_from_margins(&margins)
    }

    fn loss_from_margins(&self, margins: &[f64]) -> f64 {
        let total: f64 = margins
            .iter()
            .zip(&self.labels)
            .zip(&self.weights)
            .map(|((m, y), c)| c * softplus(-y * m))
            .sum();
        total / self.size()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let margins = self.margins(w);
        let mut g = vec![0.0; self.dim];
        self.gradient_from_margins(&margins, &mut g);
        g
    }

    fn gradient_from_margins(&self, margins: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        let n = self.size();
        for (j, ((m, y), c)) in margins.iter().zip(&self.labels).zip(&self.weights).enumerate() {
            let coef = -c * y * crate::models::sigmoid(-y * m) / n;
            for (gi, xi) in g.iter_mut().zip(self.row(j)) {
                *gi += coef * xi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// The ℓ1 ball `{w : ‖w‖₁ ≤ radius}` in `dim` dimensions, seen as the
/// convex hull of its `2 dim` vertices `±radius e_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolytopeConstraint {
    pub radius: f64,
    pub dim: usize,
}

impl PolytopeConstraint {
    pub fn l1_ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(PolytopeConstraint { radius, dim })
    }

    pub fn num_vertices(&self) -> usize {
        2 * self.dim
    }

    /// `‖C‖₁`, the largest ℓ1 norm of a vertex.
    pub fn norm_bound(&self) -> f64 {
        self.radius
    }

    /// Vertex `v` in the order `+e_0, -e_0, +e_1, -e_1, ...` as a
    /// coordinate and a signed value.
    pub fn vertex(&self, v: usize) -> (usize, f64) {
        (v / 2, if v % 2 == 0 { self.radius } else { -self.radius })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FWConfig {
    /// `T`; the loop performs `T - 1` updates.
    pub iterations: usize,
    pub l1: f64,
    pub gamma_curv: f64,
    pub rho: f64,
    pub seed: u64,
    /// Zero noise and no accounting.
    pub non_private: bool,
    /// Starting point, the origin when absent.
    pub start: Option<Vec<f64>>,
    pub label: String,
}

impl FWConfig {
    pub fn new(iterations: usize, rho: f64, seed: u64) -> Self {
        FWConfig {
            iterations,
            l1: 2.0,
            gamma_curv: 1.0,
            rho,
            seed,
            non_private: false,
            start: None,
            label: "frank-wolfe".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FWOutput {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub noise_scale: f64,
    /// `‖w_t‖₁` for every iterate, the start included.
    pub iterate_norms: Vec<f64>,
}

fn validate(problem: &LogisticProblem, constraint: &PolytopeConstraint, cfg: &FWConfig) -> Result<f64> {
    if problem.rows() == 0 || problem.size() <= 0.0 {
        return Err(invalid("empty dataset"));
    }
    if constraint.dim != problem.dim() {
        return Err(invalid("constraint and problem dimensions differ"));
    }
    if cfg.iterations == 0 {
        return Err(invalid("at least one iteration is required"));
    }
    if !(cfg.l1 > 0.0) {
        return Err(invalid("Lipschitz bound must be positive"));
    }
    if let Some(start) = &cfg.start {
        let norm: f64 = start.iter().map(|x| x.abs()).sum();
        if start.len() != problem.dim() || norm > constraint.radius + 1e-9 {
            return Err(invalid("starting point outside the constraint set"));
        }
    }
    if cfg.non_private {
        return Ok(0.0);
    }
    if !(cfg.rho > 0.0 && cfg.rho.is_finite()) {
        return Err(invalid("a private run needs a positive finite rho"));
    }
    Ok(frank_wolfe_noise_scale(cfg.l1, constraint.norm_bound(), cfg.iterations, problem.size(), cfg.rho))
}

/// Runs the private Frank-Wolfe loop, charging `cfg.rho` once to
/// `accountant` before any data is read. Non-private runs are not charged.
pub fn private_frank_wolfe(
    problem: &LogisticProblem,
    constraint: &PolytopeConstraint,
    cfg: &FWConfig,
    accountant: &mut Accountant,
) -> Result<FWOutput> {
    validate(problem, constraint, cfg)?;
    if !cfg.non_private {
        accountant.spend(cfg.label.clone(), cfg.rho)?;
    }
    run_charged(problem, constraint, cfg)
}

/// The loop itself, for callers that have already paid for it.
pub(crate) fn run_charged(problem: &LogisticProblem, constraint: &PolytopeConstraint, cfg: &FWConfig) -> Result<FWOutput> {
    let scale = validate(problem, constraint, cfg)?;
    let mut rng: StreamRng = rng::stream(cfg.seed, &[rng::labels::FRANK_WOLFE]);
    let dim = problem.dim();
    let mut w = cfg.start.clone().unwrap_or_else(|| vec![0.0; dim]);
    let mut margins = problem.margins(&w);
    let mut grad = vec![0.0; dim];
    let l1 = |w: &[f64]| w.iter().map(|x| x.abs()).sum::<f64>();
    let mut iterate_norms = vec![l1(&w)];
    for t in 1..cfg.iterations {
        problem.gradient_from_margins(&margins, &mut grad);
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for v in 0..constraint.num_vertices() {
            let (i, value) = constraint.vertex(v);
            let score = value * grad[i] + laplace_noise(scale, &mut rng);
            if score < best_score {
                best = v;
                best_score = score;
            }
        }
        let (i, value) = constraint.vertex(best);
        let mu = 2.0 / (t as f64 + 2.0);
        for wj in w.iter_mut() {
            *wj *= 1.0 - mu;
        }
        w[i] += mu * value;
        for (j, m) in margins.iter_mut().enumerate() {
            *m = (1.0 - mu) * *m + mu * value * problem.row(j)[i];
        }
        iterate_norms.push(l1(&w));
    }
    Ok(FWOutput { weights: w, iterations: cfg.iterations, noise_scale: scale, iterate_norms })
}

/// How the iteration count of a logistic fit is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum IterationRule {
    /// `λ^{2/3} (n√ρ)^{2/3}`.
    #[default]
    Corollary,
    /// `Γ^{2/3} (n√ρ)^{2/3} / (L₁‖C‖₁)^{2/3}` with `Γ = λ²`, `L₁ = 2`.
    Lemma,
}

impl IterationRule {
    pub fn iterations(self, radius: f64, n: f64, rho: f64) -> usize {
        let base = (n * rho.sqrt()).powf(2.0 / 3.0);
        let raw = match self {
            IterationRule::Corollary => radius.powf(2.0 / 3.0) * base,
            IterationRule::Lemma => (radius * radius).powf(2.0 / 3.0) * base / (2.0 * radius).powf(2.0 / 3.0),
        };
        (raw.round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub rule: IterationRule,
    /// Overrides the rule.
    pub iterations: Option<usize>,
    pub non_private: bool,
    pub seed: u64,
    pub label: String,
}

impl FitOptions {
    pub fn new(seed: u64) -> Self {
        FitOptions { rule: IterationRule::Corollary, iterations: None, non_private: false, seed, label: "logistic".into() }
    }

    pub fn non_private(seed: u64) -> Self {
        FitOptions { non_private: true, ..FitOptions::new(seed) }
    }

    pub(crate) fn config(&self, problem: &LogisticProblem, radius: f64, rho: f64) -> FWConfig {
        let iterations = self.iterations.unwrap_or_else(|| {
            if self.non_private {
                NON_PRIVATE_ITERATIONS
            } else {
                self.rule.iterations(radius, problem.size(), rho)
            }
        });
        FWConfig {
            iterations,
            l1: 2.0,
            gamma_curv: radius * radius,
            rho,
            seed: self.seed,
            non_private: self.non_private,
            start: None,
            label: self.label.clone(),
        }
    }
}

/// ℓ1-constrained logistic regression with radius `radius`.
pub fn sparse_logistic_fit(
    problem: &LogisticProblem,
    radius: f64,
    rho: f64,
    accountant: &mut Accountant,
    options: &FitOptions,
) -> Result<FWOutput> {
    let constraint = PolytopeConstraint::l1_ball(radius, problem.dim())?;
    private_frank_wolfe(problem, &constraint, &options.config(problem, radius, rho), accountant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> LogisticProblem {
        let features = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let labels = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        LogisticProblem::new(features, labels).unwrap()
    }

    /// Minimum of the loss over the 2-D ℓ1 ball of the given radius, by a
    /// coarse grid followed by a 1e-3 grid around the coarse winner.
    fn grid_optimum(problem: &LogisticProblem, radius: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let scan = |lo0: f64, hi0: f64, lo1: f64, hi1: f64, step: f64, best: &mut (f64, f64, f64)| {
            let steps0 = ((hi0 - lo0) / step).round() as i64;
            let steps1 = ((hi1 - lo1) / step).round() as i64;
            for a in 0..=steps0 {
                for b in 0..=steps1 {
                    let w = [lo0 + a as f64 * step, lo1 + b as f64 * step];
                    if w[0].abs() + w[1].abs() <= radius + 1e-12 {
                        let l = problem.loss(&w);
                        if l < best.0 {
                            *best = (l, w[0], w[1]);
                        }
                    }
                }
            }
        };
        scan(-radius, radius, -radius, radius, 0.02, &mut best);
        let (_, c0, c1) = best;
        scan(c0 - 0.03, c0 + 0.03, c1 - 0.03, c1 + 0.03, 1e-3, &mut best);
        best.0
    }

    #[test]
    fn hand_iterated_example() {
        let problem = LogisticProblem::new(vec![vec![1.0]], vec![1]).unwrap();
        let constraint = PolytopeConstraint::l1_ball(1.0, 1).unwrap();
        let mut cfg = FWConfig::new(5, 0.0, 0);
        cfg.non_private = true;
        cfg.start = Some(vec![-1.0]);
        let mut acct = Accountant::new(0.0).unwrap();
        let out = private_frank_wolfe(&problem, &constraint, &cfg, &mut acct).unwrap();
        assert!((out.weights[0] - 13.0 / 15.0).abs() < 1e-15);
        assert!(acct.ledger().is_empty());
    }

    #[test]
    fn iteration_rules() {
        assert_eq!(IterationRule::Corollary.iterations(2.0, 1000.0, 1.0), 159);
        // λ = 2: Γ^{2/3} / (2λ)^{2/3} = 4^{2/3} / 4^{2/3} = 1
        assert_eq!(IterationRule::Lemma.iterations(2.0, 1000.0, 1.0), 100);
        assert_eq!(IterationRule::Corollary.iterations(1.0, 1e-6, 1e-6), 1);
    }

    #[test]
    fn errors() {
        let empty = LogisticProblem::from_flat(2, vec![], vec![], vec![]).unwrap();
        let mut acct = Accountant::new(1.0).unwrap();
        assert!(sparse_logistic_fit(&empty, 1.0, 0.5, &mut acct, &FitOptions::new(0)).is_err());
        assert!(acct.ledger().is_empty());

        let problem = LogisticProblem::new(vec![vec![0.5, 0.5]], vec![1]).unwrap();
        let mut small = Accountant::new(0.1).unwrap();
        assert!(matches!(
            sparse_logistic_fit(&problem, 1.0, 0.5, &mut small, &FitOptions::new(0)),
            Err(crate::Error::BudgetExceeded { .. })
        ));
        assert!(LogisticProblem::new(vec![vec![1.5]], vec![1]).is_err());
        assert!(LogisticProblem::new(vec![vec![0.5]], vec![0]).is_err());
    }

    #[test]
    fn one_charge_per_call() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let problem = random_problem(&mut rng, 50, 3);
        let mut acct = Accountant::new(1.0).unwrap();
        let mut opts = FitOptions::new(1);
        opts.iterations = Some(37);
        sparse_logistic_fit(&problem, 1.0, 0.4, &mut acct, &opts).unwrap();
        assert_eq!(acct.ledger().len(), 1);
        assert_eq!(acct.ledger()[0].rho, 0.4);
    }

    #[test]
    fn zero_noise_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let problem = random_problem(&mut rng, 30, 2);
            let radius = 1.5;
            let optimum = grid_optimum(&problem, radius);
            let t = 400;
            let mut opts = FitOptions::non_private(0);
            opts.iterations = Some(t);
            let mut acct = Accountant::new(0.0).unwrap();
            let w = sparse_logistic_fit(&problem, radius, 0.0, &mut acct, &opts).unwrap().weights;
            let excess = problem.loss(&w) - optimum;
            assert!(excess <= 4.0 * radius * radius / (t as f64 + 2.0) + 1e-3, "{excess}");
        }
    }

    #[test]
    fn separable_data_uses_the_informative_coordinate() {
        let features = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]];
        let problem = LogisticProblem::new(features, vec![1, -1, 1, -1]).unwrap();
        let mut acct = Accountant::new(0.0).unwrap();
        let w = sparse_logistic_fit(&problem, 1.0, 0.0, &mut acct, &FitOptions::non_private(0)).unwrap().weights;
        assert!(w[0] > 0.99, "{w:?}");
        assert!(w[1].abs() < 1e-9);
        assert!((grid_optimum(&problem, 1.0) - problem.loss(&[1.0, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn constant_objective_stays_feasible() {
        let problem = LogisticProblem::new(vec![vec![0.0, 0.0]; 10], vec![1; 10]).unwrap();
        let mut acct = Accountant::new(1.0).unwrap();
        let w = sparse_logistic_fit(&problem, 0.5, 1.0, &mut acct, &FitOptions::new(3)).unwrap().weights;
        assert!(w.iter().map(|x| x.abs()).sum::<f64>() <= 0.5 + 1e-9);
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let problem = random_problem(&mut rng, 15, 4);
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = problem.gradient(&w);
            for i in 0..4 {
                let h = 1e-5;
                let mut up = w.clone();
                let mut down = w.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (problem.loss(&up) - problem.loss(&down)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn weights_equal_repeated_rows() {
        let a = LogisticProblem::new(vec![vec![0.5, -0.2], vec![0.5, -0.2], vec![-1.0, 0.3]], vec![1, 1, -1]).unwrap();
        let b = LogisticProblem::from_flat(2, vec![0.5, -0.2, -1.0, 0.3], vec![1.0, -1.0], vec![2.0, 1.0]).unwrap();
        let w = [0.3, -0.7];
        assert!((a.loss(&w) - b.loss(&w)).abs() < 1e-15);
        let run = |p: &LogisticProblem| {
            let mut acct = Accountant::new(1.0).unwrap();
            sparse_logistic_fit(p, 1.0, 1.0, &mut acct, &FitOptions::new(4)).unwrap().weights
        };
        assert_eq!(run(&a), run(&b));
    }

    proptest! {
        #[test]
        fn iterates_stay_in_the_ball(seed in 0u64..1000, radius in 0.1f64..3.0, rho in 0.01f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let problem = random_problem(&mut rng, 20, 3);
            let mut acct = Accountant::new(rho).unwrap();
            let w = sparse_logistic_fit(&problem, radius, rho, &mut acct, &FitOptions::new(seed)).unwrap().weights;
            prop_assert!(w.iter().map(|x| x.abs()).sum::<f64>() <= radius + 1e-9);
        }

        #[test]
        fn deterministic(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let problem = random_problem(&mut rng, 20, 3);
            let run = || {
                let mut acct = Accountant::new(1.0).unwrap();
                sparse_logistic_fit(&problem, 1.0, 1.0, &mut acct, &FitOptions::new(seed)).unwrap().weights
            };
            prop_assert_eq!(run(), run());
        }
    }
}
