//! (ε, δ)-private structure learning by subsample-and-mode with a
//! propose-test-release check.
//!
//! The rows are cut into contiguous blocks, a non-private base learner
//! produces one graph per block, and the most common graph is released only
//! if its lead over the runner-up is large after Laplace noise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::learners::{learn_ising, learn_mrf_l1, learn_pairwise, LearnConfig};
use crate::privacy::{laplace_noise, Accountant};
use crate::rng::{self, labels};

/// An undirected graph on `p` vertices, or `⊥` when the private release
/// declined to answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEstimate {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
    released: bool,
}

impl GraphEstimate {
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            let (a, b) = (i.min(j), i.max(j));
            if a == b || b >= p {
                return Err(invalid(format!("({i}, {j}) is not an edge on {p} vertices")));
            }
            set.insert((a, b));
        }
        Ok(GraphEstimate { p, edges: set, released: true })
    }

    pub fn bottom(p: usize) -> Self {
        GraphEstimate { p, edges: BTreeSet::new(), released: false }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn is_released(&self) -> bool {
        self.released
    }

    /// Sorted `i-j` pairs joined by commas.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graphs serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl fmt::Display for GraphEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, (i, j)) in self.edges.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}-{j}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    p: usize,
    released: bool,
    edges: Vec<[usize; 2]>,
}

impl Serialize for GraphEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson { p: self.p, released: self.released, edges: self.edges.iter().map(|&(i, j)| [i, j]).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GraphEstimate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        if !raw.released {
            if !raw.edges.is_empty() {
                return Err(serde::de::Error::custom("an unreleased graph carries no edges"));
            }
            return Ok(GraphEstimate::bottom(raw.p));
        }
        GraphEstimate::new(raw.p, raw.edges.into_iter().map(|[i, j]| (i, j))).map_err(serde::de::Error::custom)
    }
}

/// A deterministic, non-private map from a dataset to a graph.
pub trait BaseLearner: Sync {
    fn learn(&self, data: &Dataset) -> Result<GraphEstimate>;
}

impl<F> BaseLearner for F
where
    F: Fn(&Dataset) -> Result<GraphEstimate> + Sync,
{
    fn learn(&self, data: &Dataset) -> Result<GraphEstimate> {
        self(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ModelKind {
    Ising,
    Pairwise,
    Mrf { t: usize },
}

/// Zero-noise parameter learning followed by thresholding at `η/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStructure {
    pub kind: ModelKind,
    pub lambda: f64,
    pub eta: f64,
    /// Frank-Wolfe iterations per fit; the non-private default if absent.
    pub iterations: Option<usize>,
}

impl BaseStructure {
    pub fn new(kind: ModelKind, lambda: f64, eta: f64) -> Self {
        BaseStructure { kind, lambda, eta, iterations: None }
    }
}

impl BaseLearner for BaseStructure {
    fn learn(&self, data: &Dataset) -> Result<GraphEstimate> {
        base_structure(data, self)
    }
}

/// Keeps `(i, j)` when the estimated interaction between `i` and `j`
/// exceeds `η/2` in magnitude: `|Â_ij|` for Ising models,
/// `max_{a,b} |Ŵ_ij(a, b)|` for pairwise models, and the largest estimated
/// monomial containing both for `t`-wise models.
pub fn base_structure(data: &Dataset, base: &BaseStructure) -> Result<GraphEstimate> {
    if !(base.eta > 0.0) {
        return Err(invalid(format!("eta must be positive, got {}", base.eta)));
    }
    let p = data.dim();
    let mut cfg = LearnConfig::non_private(base.lambda, 0);
    cfg.iterations = base.iterations;
    let mut acct = Accountant::new(0.0)?;
    let mut strength: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    match base.kind {
        ModelKind::Ising => {
            let est = learn_ising(data, &cfg, &mut acct)?;
            for i in 0..p {
                for j in i + 1..p {
                    strength.insert((i, j), est.model.coupling(i, j).abs());
                }
            }
        }
        ModelKind::Pairwise => {
            let est = learn_pairwise(data, &cfg, &mut acct)?;
            for (&(i, j), w) in est.model.stored_weights() {
                strength.insert((i, j), w.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
        ModelKind::Mrf { t } => {
            let est = learn_mrf_l1(data, t, &cfg, &mut acct)?;
            for (index, coef) in est.model.polynomial().terms() {
                let vars = index.indices();
                for (a, &i) in vars.iter().enumerate() {
                    for &j in &vars[a + 1..] {
                        let entry = strength.entry((i, j)).or_insert(0.0);
                        *entry = entry.max(coef.abs());
                    }
                }
            }
        }
    }
    threshold_graph(p, &strength, base.eta / 2.0)
}

/// Pairs whose strength is strictly above `cutoff`.
fn threshold_graph(p: usize, strength: &BTreeMap<(usize, usize), f64>, cutoff: f64) -> Result<GraphEstimate> {
    GraphEstimate::new(p, strength.iter().filter(|(_, s)| **s > cutoff).map(|(e, _)| *e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Number of blocks; `⌈12 (1 + ln(1/δ)/ε)⌉` when absent.
    pub blocks: Option<usize>,
    pub eps: f64,
    pub delta: f64,
    /// Skip the Laplace draw in the release test. Not private.
    pub noiseless: bool,
}

impl StabilityConfig {
    pub fn new(eps: f64, delta: f64) -> Self {
        StabilityConfig { blocks: None, eps, delta, noiseless: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.blocks.is_some_and(|k| k < 3) {
            return Err(invalid("at least three blocks are required"));
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        self.blocks.unwrap_or_else(|| default_blocks(self.eps, self.delta))
    }

    /// `ln(1/δ)/ε + 1`.
    pub fn threshold(&self) -> f64 {
        (1.0 / self.delta).ln() / self.eps + 1.0
    }
}

pub fn default_blocks(eps: f64, delta: f64) -> usize {
    (12.0 * (1.0 + (1.0 / delta).ln() / eps)).ceil() as usize
}

/// Vote summary of the block outputs. Computed without noise, so it must
/// not be published.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeStats {
    pub mode: GraphEstimate,
    pub top: usize,
    pub runner_up: usize,
    /// `(top − runner_up) / 2`, the number of rows that must change before
    /// the mode can change.
    pub distance: f64,
}

/// Mode of `votes` with ties going to the smallest canonical encoding.
pub fn mode_stats(votes: &[GraphEstimate]) -> Result<ModeStats> {
    let mut counts: BTreeMap<String, (usize, &GraphEstimate)> = BTreeMap::new();
    for g in votes {
        counts.entry(g.canonical()).or_insert((0, g)).0 += 1;
    }
    let mut ranked: Vec<(usize, &GraphEstimate)> = counts.into_values().collect();
    // stable sort keeps the encoding order among equal counts
    ranked.sort_by(|a, b| b.0.cmp(&a.0));
    let (top, mode) = *ranked.first().ok_or_else(|| invalid("no votes"))?;
    let runner_up = ranked.get(1).map_or(0, |r| r.0);
    Ok(ModeStats { mode: mode.clone(), top, runner_up, distance: (top - runner_up) as f64 / 2.0 })
}

/// Releases `stats.mode` iff `distance + Lap(1/ε) > ln(1/δ)/ε + 1`, and `⊥`
/// otherwise.
pub fn ptr_release<R: Rng + ?Sized>(stats: &ModeStats, cfg: &StabilityConfig, rng: &mut R) -> Result<GraphEstimate> {
    cfg.validate()?;
    let noise = if cfg.noiseless { 0.0 } else { laplace_noise(1.0 / cfg.eps, rng) };
    if stats.distance + noise > cfg.threshold() {
        Ok(stats.mode.clone())
    } else {
        Ok(GraphEstimate::bottom(stats.mode.dim()))
    }
}

/// Outputs of `base` on consecutive blocks of `n / blocks` rows; the
/// remainder is dropped.
pub fn block_votes(data: &Dataset, base: &dyn BaseLearner, blocks: usize) -> Result<Vec<GraphEstimate>> {
    if data.len() < blocks {
        return Err(Error::InsufficientData { rows: data.len(), blocks });
    }
    let size = data.len() / blocks;
    (0..blocks).into_par_iter().map(|b| base.learn(&data.slice(b * size..(b + 1) * size))).collect()
}

/// (ε, δ)-private structure estimate.
pub fn stable_mode_structure(
    data: &Dataset,
    base: &dyn BaseLearner,
    cfg: &StabilityConfig,
    seed: u64,
) -> Result<GraphEstimate> {
    cfg.validate()?;
    let votes = block_votes(data, base, cfg.block_count())?;
    let stats = mode_stats(&votes)?;
    let mut rng = rng::stream(seed, &[labels::MODE_RELEASE]);
    ptr_release(&stats, cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IsingModel, Model};
    use crate::sampler::exact_sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(p: usize, edges: &[(usize, usize)]) -> GraphEstimate {
        GraphEstimate::new(p, edges.iter().copied()).unwrap()
    }

    fn votes(counts: &[(GraphEstimate, usize)]) -> Vec<GraphEstimate> {
        counts.iter().flat_map(|(g, c)| std::iter::repeat(g.clone()).take(*c)).collect()
    }

    #[test]
    fn json_and_encoding() {
        let g = graph(4, &[(2, 3), (1, 0)]);
        assert_eq!(g.canonical(), "0-1,2-3");
        assert_eq!(g.to_json(), r#"{"p":4,"released":true,"edges":[[0,1],[2,3]]}"#);
        assert_eq!(GraphEstimate::from_json(&g.to_json()).unwrap(), g);
        assert_eq!(GraphEstimate::bottom(3).to_json(), r#"{"p":3,"released":false,"edges":[]}"#);
        assert!(GraphEstimate::new(3, [(1, 1)]).is_err());
        assert!(GraphEstimate::from_json(r#"{"p":3,"released":false,"edges":[[0,1]]}"#).is_err());
    }

    #[test]
    fn default_block_count() {
        assert_eq!(default_blocks(2.0, 1e-6), 95);
    }

    #[test]
    fn mode_ties_go_to_the_smallest_encoding() {
        let a = graph(3, &[(0, 1)]);
        let b = graph(3, &[(0, 2)]);
        let stats = mode_stats(&votes(&[(b.clone(), 4), (a.clone(), 4)])).unwrap();
        assert_eq!(stats.mode, a);
        assert_eq!(stats.distance, 0.0);
        let single = mode_stats(&votes(&[(b.clone(), 5)])).unwrap();
        assert_eq!((single.top, single.runner_up, single.distance), (5, 0, 2.5));
    }

    #[test]
    fn release_examples() {
        let cfg = StabilityConfig::new(1.0, (-5.0f64).exp());
        let a = graph(3, &[(0, 1)]);
        let b = graph(3, &[(1, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        let strong = mode_stats(&votes(&[(a.clone(), 70), (b.clone(), 2)])).unwrap();
        assert_eq!(strong.distance, 34.0);
        assert_eq!(ptr_release(&strong, &cfg, &mut rng).unwrap(), a);

        let split = mode_stats(&votes(&[(a.clone(), 5), (b.clone(), 5)])).unwrap();
        let released = (0..10_000).filter(|_| ptr_release(&split, &cfg, &mut rng).unwrap().is_released()).count();
        assert!(released <= 100);

        let noiseless = StabilityConfig { noiseless: true, ..cfg };
        let weak = mode_stats(&votes(&[(a, 10), (b, 2)])).unwrap();
        assert!(!ptr_release(&weak, &noiseless, &mut rng).unwrap().is_released());
    }

    #[test]
    fn threshold_is_strict() {
        let strength = BTreeMap::from([((0, 1), 0.4), ((0, 2), 0.41)]);
        assert_eq!(threshold_graph(3, &strength, 0.8 / 2.0).unwrap(), graph(3, &[(0, 2)]));
        let stats = ModeStats { mode: graph(2, &[(0, 1)]), top: 14, runner_up: 0, distance: 7.0 };
        let cfg = StabilityConfig { noiseless: true, ..StabilityConfig::new(1.0, (-6.0f64).exp()) };
        assert!(!ptr_release(&stats, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().is_released());
    }

    #[test]
    fn insufficient_rows() {
        let data = Dataset::from_spins(2, &[1, 1, -1, 1]).unwrap();
        let base = |_: &Dataset| Ok(GraphEstimate::bottom(2));
        let cfg = StabilityConfig { blocks: Some(3), ..StabilityConfig::new(1.0, 1e-3) };
        assert!(matches!(stable_mode_structure(&data, &base, &cfg, 0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn base_recovers_matched_pairs() {
        let model: Model = IsingModel::matched_pairs(6, 0.8).unwrap().into();
        let base = BaseStructure::new(ModelKind::Ising, 0.8, 0.8);
        let mut hits = 0;
        for seed in 0..10 {
            let data = exact_sample(&model, 20_000, seed).unwrap();
            let g = base_structure(&data, &base).unwrap();
            hits += usize::from(g == graph(6, &[(0, 1), (2, 3), (4, 5)]));
        }
        assert!(hits >= 9, "{hits}");

        let empty: Model = IsingModel::zero(4).into();
        let data = exact_sample(&empty, 100_000, 1).unwrap();
        assert!(base_structure(&data, &BaseStructure::new(ModelKind::Ising, 0.5, 0.4)).unwrap().edges().is_empty());
    }
}
