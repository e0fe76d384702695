//! Parity queries `Q(I) = mean of Π_{j∈I} z_j` and their private release by
//! multiplicative weights over the full cube `{±1}^p`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::oracle::{check_state_space, state_cap};
use crate::polynomial::{subsets_up_to, MonomialIndex};
use crate::privacy::{laplace_noise, Accountant, Charge};
use crate::rng::{self, labels};

/// Parity answers for every `I` with `|I| ≤ t`. The empty set always
/// answers 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityTable {
    t: usize,
    entries: BTreeMap<MonomialIndex, f64>,
}

impl ParityTable {
    pub fn new(t: usize, entries: impl IntoIterator<Item = (MonomialIndex, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (index, value) in entries {
            if index.len() > t {
                return Err(invalid(format!("{index:?} has more than {t} variables")));
            }
            if !(value.abs() <= 1.0) {
                return Err(invalid(format!("parity {value} for {index:?} outside [-1, 1]")));
            }
            if index.is_empty() && value != 1.0 {
                return Err(invalid("the empty parity must be 1"));
            }
            map.insert(index, value);
        }
        map.insert(MonomialIndex::empty(), 1.0);
        Ok(ParityTable { t, entries: map })
    }

    pub fn order(&self) -> usize {
        self.t
    }

    pub fn get(&self, index: &MonomialIndex) -> Option<f64> {
        if index.is_empty() {
            return Some(1.0);
        }
        self.entries.get(index).copied()
    }

    pub fn entries(&self) -> &BTreeMap<MonomialIndex, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest absolute difference over the entries of `self`; entries
    /// missing from `other` count as infinitely wrong.
    pub fn max_error(&self, other: &ParityTable) -> f64 {
        self.entries
            .iter()
            .map(|(index, v)| other.get(index).map_or(f64::INFINITY, |w| (v - w).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    vars: MonomialIndex,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    t: usize,
    entries: Vec<EntryJson>,
}

impl Serialize for ParityTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self.entries.iter().map(|(vars, &value)| EntryJson { vars: vars.clone(), value }).collect();
        TableJson { t: self.t, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParityTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TableJson::deserialize(d)?;
        ParityTable::new(raw.t, raw.entries.into_iter().map(|e| (e.vars, e.value))).map_err(serde::de::Error::custom)
    }
}

/// Every nonempty `I ⊆ [p]` with `|I| ≤ t`, in canonical order.
pub fn parity_queries(p: usize, t: usize) -> Vec<MonomialIndex> {
    let vars: Vec<usize> = (0..p).collect();
    subsets_up_to(&vars, t).into_iter().skip(1).collect()
}

fn check_binary(data: &Dataset) -> Result<()> {
    if !data.is_binary() {
        return Err(invalid("parities need ±1 data"));
    }
    if data.is_empty() {
        return Err(invalid("empty dataset"));
    }
    Ok(())
}

/// Exact empirical parities of `data` up to order `t`.
pub fn empirical_parities(data: &Dataset, t: usize) -> Result<ParityTable> {
    check_binary(data)?;
    let counts = data.row_counts();
    let n = data.len() as f64;
    let entries = parity_queries(data.dim(), t).into_iter().map(|index| {
        let mut total = 0i64;
        for (row, c) in &counts {
            let odd = index.indices().iter().filter(|&&j| row[j] == 0).count() % 2 == 1;
            total += if odd { -(*c as i64) } else { *c as i64 };
        }
        (index, total as f64 / n)
    });
    ParityTable::new(t, entries)
}

/// How the synthetic distribution is corrected on the selected query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateRule {
    /// `x ∝ x · exp(η · sign(e) · χ_I)` with `η = min(0.25, 0.25 |e|)`.
    Multiplicative,
    /// Exponential tilt along `χ_I` that makes the selected parity equal the
    /// noisy answer. Converges in far fewer rounds than the fixed-rate rule.
    #[default]
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmwConfig {
    /// Defaults to `min(#queries, ⌈√n⌉)` for private runs. Zero-noise runs
    /// stop early once every error is at most `tolerance`.
    pub rounds: Option<usize>,
    pub rule: UpdateRule,
    pub non_private: bool,
    pub seed: u64,
    pub tolerance: f64,
}

/// Round limit of zero-noise runs with no explicit count.
pub const EXACT_ROUND_LIMIT: usize = 200_000;

impl Default for PmwConfig {
    fn default() -> Self {
        PmwConfig { rounds: None, rule: UpdateRule::default(), non_private: false, seed: 0, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmwRelease {
    pub table: ParityTable,
    pub rounds: usize,
    /// Per-round split of the budget: selection then answer, each
    /// `ρ / (2 · rounds)`.
    pub round_ledger: Vec<Charge>,
    /// Largest error against the exact answers after each round. This
    /// reads the data without noise and is for diagnostics only.
    pub error_trace: Vec<f64>,
    /// Final synthetic distribution over the cube, little-endian states
    /// with bit `j` set for `z_j = +1`.
    pub synthetic: Vec<f64>,
}

/// Releases every parity of order at most `t` with ρ-zCDP.
///
/// Each round picks the query whose current error is largest after Laplace
/// noise, measures it with fresh Laplace noise, and corrects the synthetic
/// distribution. Each round is `√(ρ/rounds)`-DP, half for selection and
/// half for measurement, and is charged `ρ/rounds`. The answers are the
/// parities of the final synthetic distribution.
pub fn pmw_release(data: &Dataset, t: usize, rho: f64, cfg: &PmwConfig, accountant: &mut Accountant) -> Result<PmwRelease> {
    check_binary(data)?;
    let p = data.dim();
    let states = check_state_space(p, 2, state_cap())?;
    let queries = parity_queries(p, t);
    let n = data.len() as f64;
    let rounds = match cfg.rounds {
        Some(r) => r,
        None if cfg.non_private => EXACT_ROUND_LIMIT,
        None => queries.len().min(n.sqrt().ceil() as usize),
    };
    if rounds == 0 && !queries.is_empty() {
        return Err(invalid("at least one round is required"));
    }
    let mut round_ledger = Vec::new();
    let scale = if cfg.non_private {
        0.0
    } else {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        accountant.spend("parity release", rho)?;
        let per = rho / (2 * rounds) as f64;
        for r in 0..rounds {
            round_ledger.push(Charge { label: format!("round {r} select"), rho: per });
            round_ledger.push(Charge { label: format!("round {r} answer"), rho: per });
        }
        let eps0 = (rho / rounds as f64).sqrt();
        4.0 / (n * eps0)
    };

    // little-endian state index, bit j set for z_j = +1
    let masks: Vec<usize> = queries.iter().map(|q| q.indices().iter().map(|&j| 1usize << j).sum()).collect();
    let chi = |s: usize, m: usize, size: usize| -> f64 {
        if (s & m).count_ones() as usize % 2 == size % 2 {
            1.0
        } else {
            -1.0
        }
    };
    let mut hist = vec![0.0; states];
    for row in data.rows() {
        let s: usize = row.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum();
        hist[s] += 1.0 / n;
    }
    let expect = |x: &[f64], q: usize| -> f64 {
        let size = queries[q].len();
        x.iter().enumerate().map(|(s, w)| w * chi(s, masks[q], size)).sum()
    };
    let truth: Vec<f64> = (0..queries.len()).map(|q| expect(&hist, q)).collect();

    let mut rng = rng::stream(cfg.seed, &[labels::PMW]);
    let mut x = vec![1.0 / states as f64; states];
    let mut estimates: Vec<f64> = (0..queries.len()).map(|q| expect(&x, q)).collect();
    let mut error_trace = Vec::new();
    let mut used = 0;
    for _ in 0..rounds {
        if queries.is_empty() {
            break;
        }
        if cfg.non_private && truth.iter().zip(&estimates).all(|(a, b)| (a - b).abs() <= cfg.tolerance) {
            break;
        }
        used += 1;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for q in 0..queries.len() {
            let score = (truth[q] - estimates[q]).abs() + laplace_noise(scale, &mut rng);
            if score > best_score {
                best = q;
                best_score = score;
            }
        }
        let answer = truth[best] + laplace_noise(scale, &mut rng);
        let diff = answer - estimates[best];
        let step = match cfg.rule {
            UpdateRule::Multiplicative => diff.signum() * (0.25 * diff.abs()).min(0.25),
            UpdateRule::Projection => {
                let limit = 1.0 - 1e-12;
                answer.clamp(-limit, limit).atanh() - estimates[best].clamp(-limit, limit).atanh()
            }
        };
        let size = queries[best].len();
        let tilt = |step: f64| -> (Vec<f64>, Vec<f64>) {
            let mut y: Vec<f64> = x.iter().enumerate().map(|(s, w)| w * (step * chi(s, masks[best], size)).exp()).collect();
            let total: f64 = y.iter().sum();
            y.iter_mut().for_each(|w| *w /= total);
            let e = (0..queries.len()).map(|q| expect(&y, q)).collect();
            (y, e)
        };
        let max_error = |e: &[f64]| truth.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (mut y, mut e) = tilt(step);
        if cfg.non_private {
            // exact answers: shrink the step until the worst error does not grow
            let current = max_error(&estimates);
            let mut step = step;
            let mut halvings = 0;
            while max_error(&e) > current && halvings < 30 {
                step *= 0.5;
                (y, e) = tilt(step);
                halvings += 1;
            }
            if halvings > 0 {
                // several queries near the worst error: correct them jointly
                if let Some((ny, ne)) = newton_tilt(&x, &masks, &queries, &truth, &estimates) {
                    if max_error(&ne) < max_error(&e) {
                        (y, e) = (ny, ne);
                    }
                }
            }
            if max_error(&e) > current {
                (y, e) = (x.clone(), estimates.clone());
            }
        }
        x = y;
        estimates = e;
        error_trace.push(max_error(&estimates));
    }
    let table = ParityTable::new(t, queries.into_iter().zip(estimates.into_iter().map(|e| e.clamp(-1.0, 1.0))))?;
    Ok(PmwRelease { table, rounds: if cfg.non_private { used } else { rounds }, round_ledger, error_trace, synthetic: x })
}

/// Damped Newton step on the tilt parameters of every query, which moves
/// all errors towards zero by the same factor. `None` if no damping
/// lowers the worst error.
fn newton_tilt(
    x: &[f64],
    masks: &[usize],
    queries: &[MonomialIndex],
    truth: &[f64],
    estimates: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = queries.len();
    let chi: Vec<Vec<f64>> = (0..x.len())
        .map(|s| {
            (0..m)
                .map(|q| if (s & masks[q]).count_ones() as usize % 2 == queries[q].len() % 2 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (w, c) in x.iter().zip(&chi) {
        for a in 0..m {
            for b in a..m {
                cov[(a, b)] += w * c[a] * c[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            cov[(a, b)] -= estimates[a] * estimates[b];
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let residual = nalgebra::DVector::from_iterator(m, truth.iter().zip(estimates).map(|(t, e)| t - e));
    let direction = cov.cholesky()?.solve(&residual);
    let worst = |e: &[f64]| truth.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let current = worst(estimates);
    let mut damping = 1.0;
    for _ in 0..30 {
        let mut y: Vec<f64> = x
            .iter()
            .zip(&chi)
            .map(|(w, c)| w * (damping * c.iter().zip(direction.iter()).map(|(a, b)| a * b).sum::<f64>()).exp())
            .collect();
        let total: f64 = y.iter().sum();
        y.iter_mut().for_each(|w| *w /= total);
        let e: Vec<f64> = (0..m).map(|q| y.iter().zip(&chi).map(|(w, c)| w * c[q]).sum()).collect();
        if worst(&e) < current {
            return Some((y, e));
        }
        damping *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IsingModel, Model};
    use crate::sampler::exact_sample;

    fn idx(v: &[usize]) -> MonomialIndex {
        MonomialIndex::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let data = Dataset::from_spins(2, &[1, 1, 1, -1]).unwrap();
        let q = empirical_parities(&data, 2).unwrap();
        assert_eq!(q.get(&idx(&[0, 1])), Some(0.0));
        assert_eq!(q.get(&idx(&[0])), Some(1.0));
        assert_eq!(q.get(&MonomialIndex::empty()), Some(1.0));
        assert_eq!(q.len(), 4);
        assert!(empirical_parities(&Dataset::empty(2, crate::Alphabet::Binary), 2).is_err());
    }

    #[test]
    fn matched_pair_parity_from_samples() {
        let model: Model = IsingModel::matched_pairs(2, 2f64.ln()).unwrap().into();
        let data = exact_sample(&model, 100_000, 3).unwrap();
        let q = empirical_parities(&data, 2).unwrap();
        assert!((q.get(&idx(&[0, 1])).unwrap() - 0.6).abs() <= 0.02);
    }

    #[test]
    fn json_round_trip() {
        let table = ParityTable::new(2, [(idx(&[0]), 0.25), (idx(&[0, 1]), -0.5)]).unwrap();
        let text = serde_json::to_string(&table).unwrap();
        assert_eq!(text, r#"{"t":2,"entries":[{"vars":[],"value":1.0},{"vars":[0],"value":0.25},{"vars":[0,1],"value":-0.5}]}"#);
        assert_eq!(ParityTable::from_json(&text).unwrap(), table);
        assert!(ParityTable::from_json(r#"{"t":1,"entries":[{"vars":[0,1],"value":0.5}]}"#).is_err());
        assert!(ParityTable::from_json(r#"{"t":1,"entries":[{"vars":[0],"value":1.5}]}"#).is_err());
    }

    fn fixture() -> Dataset {
        let model: Model = IsingModel::matched_pairs(6, 0.6).unwrap().into();
        exact_sample(&model, 3000, 8).unwrap()
    }

    #[test]
    fn zero_noise_recovers_empirical_parities() {
        let data = fixture();
        let exact = empirical_parities(&data, 2).unwrap();
        for rule in [UpdateRule::Multiplicative, UpdateRule::Projection] {
            let cfg = PmwConfig { non_private: true, rule, ..PmwConfig::default() };
            let mut acct = Accountant::new(0.0).unwrap();
            let out = pmw_release(&data, 2, 0.0, &cfg, &mut acct).unwrap();
            assert!(exact.max_error(&out.table) <= 1e-9, "{rule:?}");
            assert!(acct.ledger().is_empty());
        }
    }

    #[test]
    fn zero_noise_error_never_increases() {
        let data = fixture();
        let cfg = PmwConfig { non_private: true, rounds: Some(200), ..PmwConfig::default() };
        let out = pmw_release(&data, 2, 0.0, &cfg, &mut Accountant::new(0.0).unwrap()).unwrap();
        assert!(out.error_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{:?}", out.error_trace);
    }

    #[test]
    fn private_release_budget_and_range() {
        let data = fixture();
        let mut acct = Accountant::new(2.0).unwrap();
        let cfg = PmwConfig { seed: 4, ..PmwConfig::default() };
        let out = pmw_release(&data, 2, 2.0, &cfg, &mut acct).unwrap();
        assert_eq!(acct.ledger().len(), 1);
        assert_eq!(out.rounds, 21);
        let spent: f64 = out.round_ledger.iter().map(|c| c.rho).sum();
        assert!((spent - 2.0).abs() <= 1e-12);
        assert!(out.table.entries().values().all(|v| v.abs() <= 1.0));
        let synthetic = crate::oracle::ExactDistribution::from_probs(6, 2, out.synthetic.clone()).unwrap();
        for (index, v) in out.table.entries() {
            assert!((synthetic.parity(index).unwrap() - v).abs() <= 1e-12);
        }
        assert_eq!(out.table, pmw_release(&data, 2, 2.0, &cfg, &mut Accountant::new(2.0).unwrap()).unwrap().table);
    }

    #[test]
    fn state_cap_enforced() {
        let data = Dataset::from_spins(30, &[1; 30]).unwrap();
        let cfg = PmwConfig { non_private: true, ..PmwConfig::default() };
        let err = pmw_release(&data, 1, 0.0, &cfg, &mut Accountant::new(0.0).unwrap()).unwrap_err();
        assert!(matches!(err, crate::Error::StateSpaceTooLarge { .. }));
    }
}
