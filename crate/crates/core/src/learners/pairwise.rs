use std::collections::BTreeMap;

use rayon::prelude::*;

use super::features::{center_rows_eq1, node_symbols, one_hot_encode, shifted_index};
use super::{reserve, run_fits, EstimateMeta, Fit, LearnConfig};
use crate::dataset::{Alphabet, Dataset};
use crate::error::{invalid, Result};
use crate::models::{Model, PairwiseModel};
use crate::pfw::LogisticProblem;
use crate::privacy::{Accountant, Charge};
use crate::rng::{self, labels};

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEstimate {
    /// Symmetrized and clamped to `[-λ, λ]`.
    pub model: PairwiseModel,
    /// `(i, j) → Ŵ_ij` as estimated at node `i`, row-major `k × k`, for
    /// every ordered pair `i ≠ j`.
    pub directed: BTreeMap<(usize, usize), Vec<f64>>,
    pub meta: EstimateMeta,
}

impl PairwiseEstimate {
    pub fn to_json(&self) -> String {
        super::estimate_json(&Model::Pairwise(self.model.clone()), &self.meta)
    }
}

/// Samples with `z_i ∈ {u, v}`, labelled `+1` for `u`, as one-hot
/// encodings of `[z_{-i}, 0]`.
fn pair_problem(counts: &[(&[u8], usize)], k: usize, i: usize, u: u8, v: u8) -> Result<Option<LogisticProblem>> {
    let p = counts.first().map_or(0, |(row, _)| row.len());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    let mut symbols = Vec::with_capacity(p);
    for (row, c) in counts {
        let y = match row[i] {
            s if s == u => 1.0,
            s if s == v => -1.0,
            _ => continue,
        };
        node_symbols(row, i, &mut symbols);
        features.extend(one_hot_encode(&symbols, k));
        labels.push(y);
        weights.push(*c as f64);
    }
    if labels.is_empty() {
        return Ok(None);
    }
    LogisticProblem::from_flat(p * k, features, labels, weights).map(Some)
}

/// For every node and every pair of symbols `u < v`, regresses the event
/// `z_i = u` against `z_i = v` on the one-hot encoding of the other
/// coordinates, over the ℓ1 ball of radius `2λk` at `ρ/(k²p)` each. The
/// centered coefficients give `W_ij(u, ·) − W_ij(v, ·)`, and averaging over
/// `v` recovers `W_ij(u, ·)`.
///
/// Binary data is read as two symbols, `-1` first.
pub fn learn_pairwise(data: &Dataset, cfg: &LearnConfig, accountant: &mut Accountant) -> Result<PairwiseEstimate> {
    cfg.validate()?;
    let data = if data.is_binary() { data.to_categorical() } else { data.clone() };
    let Alphabet::Categorical(k) = data.alphabet() else { unreachable!() };
    if k < 2 {
        return Err(invalid("alphabet needs at least two symbols"));
    }
    if data.is_empty() {
        return Err(invalid("empty dataset"));
    }
    let p = data.dim();
    let rho = cfg.rho / (k * k * p) as f64;
    let jobs: Vec<(usize, u8, u8)> = (0..p)
        .flat_map(|i| (0..k as u8).flat_map(move |u| (u + 1..k as u8).map(move |v| (i, u, v))))
        .collect();
    let charges: Vec<(String, f64)> =
        jobs.iter().map(|(i, u, v)| (format!("pairwise node {i} symbols {u},{v}"), rho)).collect();
    reserve(accountant, &charges, cfg.non_private)?;

    let counts = data.row_counts();
    let fits = jobs
        .par_iter()
        .zip(&charges)
        .map(|(&(i, u, v), (label, _))| {
            Ok(Fit {
                problem: pair_problem(&counts, k, i, u, v)?,
                radius: 2.0 * cfg.lambda * k as f64,
                rho,
                options: cfg.options(
                    rng::derive_seed(cfg.seed, &[labels::PAIRWISE, i as u64, u as u64, v as u64]),
                    label.clone(),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs = run_fits(&fits)?;

    let mut meta = EstimateMeta::new(cfg);
    if !cfg.non_private {
        meta.ledger = charges.iter().map(|(label, rho)| Charge { label: label.clone(), rho: *rho }).collect();
    }
    // centered[i][u][v] = U_{u,v} at node i, a p × k matrix
    let zero = vec![0.0; p * k];
    let mut centered = vec![vec![vec![zero.clone(); k]; k]; p];
    for (&(i, u, v), out) in jobs.iter().zip(outputs) {
        let (u, v) = (u as usize, v as usize);
        let w = match out {
            Some(out) => {
                meta.iterations.push(out.iterations);
                center_rows_eq1(&out.weights, k)?
            }
            None => {
                meta.iterations.push(0);
                meta.warnings.push(format!("node {i}: no samples with symbol {} or {}", u + 1, v + 1));
                zero.clone()
            }
        };
        centered[i][v][u] = w.iter().map(|x| -x).collect();
        centered[i][u][v] = w;
    }

    let kf = k as f64;
    let mut directed = BTreeMap::new();
    let mut fields = vec![vec![0.0; k]; p];
    for i in 0..p {
        for j in (0..p).filter(|&j| j != i) {
            let row = shifted_index(i, j);
            let mut w = vec![0.0; k * k];
            for u in 0..k {
                for b in 0..k {
                    w[u * k + b] = (0..k).map(|v| centered[i][u][v][row * k + b]).sum::<f64>() / kf;
                }
            }
            directed.insert((i, j), w);
        }
        for u in 0..k {
            fields[i][u] = (0..k).map(|v| centered[i][u][v][(p - 1) * k]).sum::<f64>() / kf;
        }
    }

    let clamp = |x: f64| x.clamp(-cfg.lambda, cfg.lambda);
    let mut weights = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (&directed[&(i, j)], &directed[&(j, i)]);
            let w: Vec<f64> = (0..k * k).map(|e| clamp(0.5 * (a[e] + b[(e % k) * k + e / k]))).collect();
            weights.push((i, j, w));
        }
    }
    let fields = fields.into_iter().map(|f| f.into_iter().map(clamp).collect()).collect();
    let model = PairwiseModel::new(p, k, weights, fields)?;
    Ok(PairwiseEstimate { model, directed, meta })
}
