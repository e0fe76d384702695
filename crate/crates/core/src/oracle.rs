//! Exact distributions by enumeration of the full state space.
//!
//! States are laid out mixed-radix little-endian: the index of `z` is
//! `Σ_j z_j k^j`, with binary symbols ordered `(-1, +1)`. This layout is
//! part of the golden-file format and must not change.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::models::{spin, Model};
use crate::polynomial::MonomialIndex;

/// Default largest state space the oracle will enumerate.
pub const DEFAULT_STATE_CAP: u64 = 1 << 20;

/// Environment variable overriding [`DEFAULT_STATE_CAP`].
pub const STATE_CAP_ENV: &str = "DPMRF_STATE_CAP";

/// The configured state cap: `DPMRF_STATE_CAP` if set and valid, otherwise
/// the default.
pub fn state_cap() -> u64 {
    std::env::var(STATE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_CAP)
}

/// Checks that `k^p` fits under `cap` and returns it.
pub fn check_state_space(p: usize, k: usize, cap: u64) -> Result<usize> {
    let states = (k as u128).checked_pow(p as u32).unwrap_or(u128::MAX);
    if states > u128::from(cap) {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    Ok(states as usize)
}

/// Normalized probability table over `[k]^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    p: usize,
    k: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    /// Wraps a table, checking shape, signs and normalization.
    pub fn from_probs(p: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        let states = check_state_space(p, k, u64::MAX)?;
        if probs.len() != states {
            return Err(invalid(format!("expected {states} probabilities, got {}", probs.len())));
        }
        if probs.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(ExactDistribution { p, k, probs })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn index_of(&self, state: &[u8]) -> usize {
        state.iter().rev().fold(0usize, |acc, &s| acc * self.k + s as usize)
    }

    /// Writes the symbols of state `index` into `out`.
    pub fn state_into(&self, mut index: usize, out: &mut [u8]) {
        for slot in out.iter_mut().take(self.p) {
            *slot = (index % self.k) as u8;
            index /= self.k;
        }
    }

    pub fn state(&self, index: usize) -> Vec<u8> {
        let mut out = vec![0; self.p];
        self.state_into(index, &mut out);
        out
    }

    pub fn prob(&self, state: &[u8]) -> f64 {
        self.probs[self.index_of(state)]
    }

    /// `Pr(Z_i = value | Z_{-i} = rest)`, where `rest` lists the other
    /// coordinates in order.
    pub fn conditional(&self, i: usize, value: usize, rest: &[u8]) -> Result<f64> {
        if i >= self.p || value >= self.k || rest.len() + 1 != self.p {
            return Err(invalid("conditional query does not match the distribution"));
        }
        let mut state = Vec::with_capacity(self.p);
        state.extend_from_slice(&rest[..i]);
        state.push(0);
        state.extend_from_slice(&rest[i..]);
        let mut total = 0.0;
        let mut hit = 0.0;
        for a in 0..self.k {
            state[i] = a as u8;
            let pr = self.prob(&state);
            total += pr;
            if a == value {
                hit = pr;
            }
        }
        Ok(hit / total)
    }

    /// `E[Π_{j∈I} Z_j]` for a binary distribution.
    pub fn parity(&self, index: &MonomialIndex) -> Result<f64> {
        if self.k != 2 {
            return Err(invalid("parities are defined for binary distributions"));
        }
        if index.max().is_some_and(|m| m >= self.p) {
            return Err(invalid(format!("monomial {index:?} exceeds dimension {}", self.p)));
        }
        let mask: usize = index.indices().iter().map(|&j| 1usize << j).sum();
        Ok(self
            .probs
            .iter()
            .enumerate()
            .map(|(s, pr)| if (s & mask).count_ones() as usize % 2 == index.len() % 2 { *pr } else { -*pr })
            .sum())
    }

    /// Expectation of an arbitrary function of the ±1 point.
    pub fn expect_spins(&self, f: impl Fn(&[i8]) -> f64) -> f64 {
        let mut state = vec![0u8; self.p];
        let mut x = vec![0i8; self.p];
        let mut total = 0.0;
        for (s, pr) in self.probs.iter().enumerate() {
            self.state_into(s, &mut state);
            for (xi, si) in x.iter_mut().zip(&state) {
                *xi = spin(*si);
            }
            total += pr * f(&x);
        }
        total
    }

    /// Cumulative sums in state order, last entry forced to 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self.probs.iter().map(|p| {
            acc += p;
            acc
        }).collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Golden-file dump: one `index,probability` line per state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, pr) in self.probs.iter().enumerate() {
            writeln!(out, "{s},{pr:e}")?;
        }
        Ok(())
    }
}

/// Exact distribution of `model`, under the configured state cap.
pub fn exact_distribution(model: &Model) -> Result<ExactDistribution> {
    exact_distribution_with_cap(model, state_cap())
}

/// Exact distribution with an explicit cap on `k^p`.
///
/// Log-weights are shifted by their maximum before exponentiation.
pub fn exact_distribution_with_cap(model: &Model, cap: u64) -> Result<ExactDistribution> {
    let (p, k) = (model.dim(), model.alphabet());
    let states = check_state_space(p, k, cap)?;
    let mut state = vec![0u8; p];
    let mut logw = Vec::with_capacity(states);
    for _ in 0..states {
        logw.push(model.log_weight(&state));
        for s in state.iter_mut() {
            *s += 1;
            if (*s as usize) < k {
                break;
            }
            *s = 0;
        }
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logw.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in logw.iter_mut() {
        *v /= total;
    }
    Ok(ExactDistribution { p, k, probs: logw })
}

/// `Pr(Z_i = value | Z_{-i} = rest)` by enumeration.
pub fn exact_conditional(model: &Model, i: usize, value: usize, rest: &[u8]) -> Result<f64> {
    exact_distribution(model)?.conditional(i, value, rest)
}

/// `E[Π_{j∈I} Z_j]` by enumeration.
pub fn exact_parity(model: &Model, index: &MonomialIndex) -> Result<f64> {
    exact_distribution(model)?.parity(index)
}

/// Total variation distance `½ Σ |p − q|`.
pub fn tv_distance(a: &ExactDistribution, b: &ExactDistribution) -> Result<f64> {
    if a.p != b.p || a.k != b.k {
        return Err(invalid("distributions live on different spaces"));
    }
    Ok(0.5 * a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum::<f64>())
}
