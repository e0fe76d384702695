use rayon::prelude::*;

use super::features::{binary_counts, NodeFeatureMap};
use super::{reserve, run_fits, EstimateMeta, Fit, LearnConfig};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::models::{IsingModel, Model};
use crate::polynomial::MonomialIndex;
use crate::privacy::Accountant;
use crate::rng::{self, labels};

#[derive(Debug, Clone, PartialEq)]
pub struct IsingEstimate {
    /// Symmetrized and clamped to `[-λ, λ]`.
    pub model: IsingModel,
    /// Row `i` holds half the coefficients fitted at node `i`, with the
    /// intercept half on the diagonal.
    pub raw: Vec<Vec<f64>>,
    pub meta: EstimateMeta,
}

impl IsingEstimate {
    pub fn to_json(&self) -> String {
        super::estimate_json(&Model::Ising(self.model.clone()), &self.meta)
    }
}

/// Per-node seed shared by the Ising and `t`-wise learners, so that with
/// `t = 2` both run identical fits.
pub(super) fn node_seed(seed: u64, node: usize) -> u64 {
    rng::derive_seed(seed, &[labels::MRF, node as u64])
}

/// Regresses every spin on the others over the ℓ1 ball of radius `2λ` at
/// `ρ/p` each, then reads `A_ij` and `θ_i` back as half the coefficients.
pub fn learn_ising(data: &Dataset, cfg: &LearnConfig, accountant: &mut Accountant) -> Result<IsingEstimate> {
    cfg.validate()?;
    let p = data.dim();
    let counts = binary_counts(data)?;
    let rho = cfg.rho / p as f64;
    let labels: Vec<String> = (0..p).map(|i| format!("ising node {i}")).collect();
    let charges: Vec<(String, f64)> = labels.iter().map(|l| (l.clone(), rho)).collect();
    reserve(accountant, &charges, cfg.non_private)?;

    let maps: Vec<NodeFeatureMap> = (0..p).map(|i| NodeFeatureMap::pairwise(p, i)).collect();
    let fits = maps
        .par_iter()
        .zip(labels)
        .map(|(map, label)| {
            Ok(Fit {
                problem: Some(map.problem(&counts)?),
                radius: 2.0 * cfg.lambda,
                rho,
                options: cfg.options(node_seed(cfg.seed, map.node()), label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs = run_fits(&fits)?;

    let mut meta = EstimateMeta::new(cfg);
    if !cfg.non_private {
        meta.ledger = charges.into_iter().map(|(label, rho)| crate::privacy::Charge { label, rho }).collect();
    }
    let mut raw = vec![vec![0.0; p]; p];
    for (i, (map, out)) in maps.iter().zip(outputs).enumerate() {
        let out = out.expect("every node has a problem");
        meta.iterations.push(out.iterations);
        for j in 0..p {
            let index = if j == i { MonomialIndex::empty() } else { MonomialIndex::singleton(j) };
            raw[i][j] = 0.5 * out.weights[map.position(&index).expect("feature present")];
        }
    }

    let clamp = |v: f64| v.clamp(-cfg.lambda, cfg.lambda);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            edges.push((i, j, clamp(0.5 * (raw[i][j] + raw[j][i]))));
        }
    }
    let theta = (0..p).map(|i| clamp(raw[i][i])).collect();
    let model = IsingModel::from_edges(p, &edges, theta)?;
    Ok(IsingEstimate { model, raw, meta })
}
