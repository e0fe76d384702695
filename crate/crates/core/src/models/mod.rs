//! Ground-truth model families and their closed-form single-site laws.
//!
//! Binary models encode states as symbols `0 ↔ -1` and `1 ↔ +1`; pairwise
//! models use symbols `0..k`. Width and minimum edge weight are computed on
//! demand.

mod ising;
mod mrf;
mod pairwise;

pub mod fixtures;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ising::IsingModel;
pub use mrf::BinaryMRF;
pub use pairwise::PairwiseModel;

use crate::error::{invalid, Error, Result};
use crate::polynomial::MultilinearPolynomial;

/// Logistic function `1 / (1 + e^{-s})`.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Binary symbol to spin: `0 → -1`, `1 → +1`.
#[inline]
pub fn spin(symbol: u8) -> i8 {
    2 * symbol as i8 - 1
}

/// Spin to binary symbol.
#[inline]
pub fn symbol(spin: i8) -> u8 {
    u8::from(spin > 0)
}

/// Any of the supported model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub enum Model {
    Ising(IsingModel),
    Pairwise(PairwiseModel),
    Mrf(BinaryMRF),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Ising(m) => m.dim(),
            Model::Pairwise(m) => m.dim(),
            Model::Mrf(m) => m.dim(),
        }
    }

    /// Alphabet size.
    pub fn alphabet(&self) -> usize {
        match self {
            Model::Pairwise(m) => m.alphabet(),
            _ => 2,
        }
    }

    pub fn width(&self) -> f64 {
        match self {
            Model::Ising(m) => m.width(),
            Model::Pairwise(m) => m.width(),
            Model::Mrf(m) => m.width(),
        }
    }

    /// Lower bound on every single-site conditional probability:
    /// `e^{-2λ}/k` for pairwise models (`k = 2` for Ising) and `e^{-2λ}/2`
    /// for binary MRFs.
    pub fn delta_unbiased_bound(&self) -> f64 {
        (-2.0 * self.width()).exp() / self.alphabet() as f64
    }

    /// Unnormalized log-probability of a symbol vector.
    pub fn log_weight(&self, state: &[u8]) -> f64 {
        match self {
            Model::Ising(m) => m.log_weight(state),
            Model::Pairwise(m) => m.log_weight(state),
            Model::Mrf(m) => m.log_weight(state),
        }
    }

    /// Writes `Pr(Z_i = a | Z_{-i})` for every symbol `a` into `out`, using
    /// the closed-form conditional of the family. Entry `i` of `state` is
    /// ignored.
    pub fn site_conditional(&self, i: usize, state: &[u8], out: &mut [f64]) {
        match self {
            Model::Ising(m) => {
                let plus = m.conditional_plus(i, state);
                out[0] = 1.0 - plus;
                out[1] = plus;
            }
            Model::Mrf(m) => {
                let x: Vec<i8> = state.iter().map(|&s| spin(s)).collect();
                let plus = sigmoid(m.conditional_logit(i, &x));
                out[0] = 1.0 - plus;
                out[1] = plus;
            }
            Model::Pairwise(m) => {
                let k = m.alphabet();
                for (a, slot) in out.iter_mut().enumerate().take(k) {
                    *slot = m.site_energy(i, a, state);
                }
                let max = out[..k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for slot in out[..k].iter_mut() {
                    *slot = (*slot - max).exp();
                    total += *slot;
                }
                for slot in out[..k].iter_mut() {
                    *slot /= total;
                }
            }
        }
    }

    /// Edges of the dependency graph as `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            Model::Ising(m) => m.edges(),
            Model::Pairwise(m) => m.center().edges(),
            Model::Mrf(m) => {
                let mut set = std::collections::BTreeSet::new();
                for (index, _) in m.polynomial().terms() {
                    let v = index.indices();
                    for (a, &i) in v.iter().enumerate() {
                        for &j in &v[a + 1..] {
                            set.insert((i, j));
                        }
                    }
                }
                set.into_iter().collect()
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }
}

impl From<IsingModel> for Model {
    fn from(m: IsingModel) -> Self {
        Model::Ising(m)
    }
}

impl From<PairwiseModel> for Model {
    fn from(m: PairwiseModel) -> Self {
        Model::Pairwise(m)
    }
}

impl From<BinaryMRF> for Model {
    fn from(m: BinaryMRF) -> Self {
        Model::Mrf(m)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ModelJson {
    Ising {
        p: usize,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        theta: Vec<f64>,
    },
    Pairwise {
        p: usize,
        k: usize,
        #[serde(rename = "W")]
        w: BTreeMap<String, Vec<Vec<f64>>>,
        #[serde(rename = "Theta")]
        theta: Vec<Vec<f64>>,
    },
    Mrf {
        t: usize,
        h: MultilinearPolynomial,
    },
}

impl TryFrom<ModelJson> for Model {
    type Error = Error;

    fn try_from(raw: ModelJson) -> Result<Self> {
        match raw {
            ModelJson::Ising { p, a, theta } => {
                if theta.len() != p {
                    return Err(invalid(format!("theta has {} entries, p = {p}", theta.len())));
                }
                Ok(Model::Ising(IsingModel::new(a, theta)?))
            }
            ModelJson::Pairwise { p, k, w, theta } => {
                let mut weights = Vec::with_capacity(w.len());
                for (key, rows) in w {
                    let (i, j) = parse_pair_key(&key)?;
                    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                        return Err(invalid(format!("W[{key}] must be {k}×{k}")));
                    }
                    weights.push((i, j, rows.into_iter().flatten().collect()));
                }
                Ok(Model::Pairwise(PairwiseModel::new(p, k, weights, theta)?))
            }
            ModelJson::Mrf { t, h } => Ok(Model::Mrf(BinaryMRF::new(t, h)?)),
        }
    }
}

impl From<Model> for ModelJson {
    fn from(m: Model) -> Self {
        match m {
            Model::Ising(m) => ModelJson::Ising { p: m.dim(), a: m.couplings(), theta: m.fields().to_vec() },
            Model::Pairwise(m) => {
                let k = m.alphabet();
                let w = m
                    .stored_weights()
                    .iter()
                    .map(|(&(i, j), w)| (format!("{i},{j}"), w.chunks(k).map(<[f64]>::to_vec).collect()))
                    .collect();
                ModelJson::Pairwise { p: m.dim(), k, w, theta: m.fields().to_vec() }
            }
            Model::Mrf(m) => ModelJson::Mrf { t: m.order(), h: m.polynomial().clone() },
        }
    }
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let (a, b) = key
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("weight key {key:?} is not \"i,j\"")))?;
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{key:?}: {e}")));
    Ok((parse(a)?, parse(b)?))
}

#[cfg(test)]
mod tests;
