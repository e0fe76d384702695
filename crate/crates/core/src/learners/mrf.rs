use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{binary_counts, NodeFeatureMap};
use super::ising::node_seed;
use super::{reserve, run_fits, EstimateMeta, Fit, LearnConfig};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::models::{BinaryMRF, Model};
use crate::polynomial::{count_subsets_up_to, MultilinearPolynomial};
use crate::privacy::{Accountant, Charge};
use crate::query_release::{empirical_parities, pmw_release, ParityTable, PmwConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MRFEstimate {
    /// Estimated factorization polynomial `u`.
    pub model: BinaryMRF,
    /// `v_i`, half the coefficients fitted at node `i`, as a polynomial in
    /// the other coordinates.
    pub node_polynomials: Vec<MultilinearPolynomial>,
    /// Parity estimates used by the ℓ∞ read-back.
    pub parities: Option<ParityTable>,
    pub meta: EstimateMeta,
}

impl MRFEstimate {
    pub fn to_json(&self) -> String {
        super::estimate_json(&Model::Mrf(self.model.clone()), &self.meta)
    }
}

struct NodeFits {
    maps: Vec<NodeFeatureMap>,
    polys: Vec<MultilinearPolynomial>,
}

fn check_order(data: &Dataset, t: usize, cap: usize) -> Result<()> {
    if t == 0 {
        return Err(invalid("order t must be at least 1"));
    }
    let count = count_subsets_up_to(data.dim() - 1, t - 1);
    if count > cap {
        return Err(Error::TooManyFeatures { count, cap });
    }
    Ok(())
}

/// Per-node fits over monomial features, already paid for.
fn fit_nodes(data: &Dataset, t: usize, cfg: &LearnConfig, rho: f64, labels: &[String], meta: &mut EstimateMeta) -> Result<NodeFits> {
    let p = data.dim();
    let counts = binary_counts(data)?;
    let maps: Vec<NodeFeatureMap> = (0..p).map(|i| NodeFeatureMap::monomials_up_to(p, i, t)).collect();
    let fits = maps
        .par_iter()
        .zip(labels)
        .map(|(map, label)| {
            Ok(Fit {
                problem: Some(map.problem(&counts)?),
                radius: 2.0 * cfg.lambda,
                rho,
                options: cfg.options(node_seed(cfg.seed, map.node()), label.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs = run_fits(&fits)?;
    let mut polys = Vec::with_capacity(p);
    for (map, out) in maps.iter().zip(outputs) {
        let out = out.expect("every node has a problem");
        meta.iterations.push(out.iterations);
        let terms = map.monomials().iter().cloned().zip(out.weights.iter().map(|w| 0.5 * w));
        polys.push(MultilinearPolynomial::from_terms(p, terms)?);
    }
    Ok(NodeFits { maps, polys })
}

fn node_labels(p: usize, prefix: &str) -> Vec<String> {
    (0..p).map(|i| format!("{prefix} node {i}")).collect()
}

/// Regresses every spin on all monomials of size below `t` in the other
/// spins, over the ℓ1 ball of radius `2λ` at `ρ/p` each. The coefficient of
/// `I` at node `i` gives `ū(I ∪ {i})` when `i` is the smallest index of
/// `I ∪ {i}`.
pub fn learn_mrf_l1(data: &Dataset, t: usize, cfg: &LearnConfig, accountant: &mut Accountant) -> Result<MRFEstimate> {
    cfg.validate()?;
    check_order(data, t, cfg.feature_cap)?;
    let p = data.dim();
    let rho = cfg.rho / p as f64;
    let labels = node_labels(p, "mrf");
    let charges: Vec<(String, f64)> = labels.iter().map(|l| (l.clone(), rho)).collect();
    reserve(accountant, &charges, cfg.non_private)?;

    let mut meta = EstimateMeta::new(cfg);
    let fits = fit_nodes(data, t, cfg, rho, &labels, &mut meta)?;
    let mut u = MultilinearPolynomial::zero(p);
    for (i, (map, v)) in fits.maps.iter().zip(&fits.polys).enumerate() {
        for index in map.monomials().iter().filter(|m| m.indices().first().map_or(true, |&m| m > i)) {
            u.add_term(index.with(i), v.coefficient(index))?;
        }
    }
    if !cfg.non_private {
        meta.ledger = charges.into_iter().map(|(label, rho)| Charge { label, rho }).collect();
    }
    Ok(MRFEstimate { model: BinaryMRF::new(t, u)?, node_polynomials: fits.polys, parities: None, meta })
}

/// Where the ℓ∞ learner gets its parity estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParitySource {
    /// Private multiplicative weights at half the budget.
    Pmw(PmwConfig),
    /// Exact empirical parities of the second half, with no privacy.
    Empirical,
    /// A table supplied by the caller.
    Given(ParityTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfConfig {
    /// Fraction of rows used by the regressions; the rest feed the parities.
    pub split: f64,
    pub parities: ParitySource,
}

impl Default for LinfConfig {
    fn default() -> Self {
        LinfConfig { split: 0.5, parities: ParitySource::Pmw(PmwConfig::default()) }
    }
}

/// Like [`learn_mrf_l1`] on the first part of the data with `ρ/(2p)` per
/// node, but each coefficient is read back as `ū(I ∪ {i}) = Σ_{I'}
/// ∂_I v_i(I') · Q̂(I')`, using parity estimates of the second part.
pub fn learn_mrf_linf(
    data: &Dataset,
    t: usize,
    cfg: &LearnConfig,
    linf: &LinfConfig,
    accountant: &mut Accountant,
) -> Result<MRFEstimate> {
    cfg.validate()?;
    check_order(data, t, cfg.feature_cap)?;
    if !(linf.split > 0.0 && linf.split < 1.0) {
        return Err(invalid(format!("split must lie in (0, 1), got {}", linf.split)));
    }
    let p = data.dim();
    let n1 = (data.len() as f64 * linf.split).floor() as usize;
    if n1 == 0 || n1 == data.len() {
        return Err(invalid(format!("{} rows cannot be split into two nonempty parts", data.len())));
    }
    let private_parities = matches!(linf.parities, ParitySource::Pmw(_)) && !cfg.non_private;
    let rho = cfg.rho / (2 * p) as f64;
    let labels = node_labels(p, "mrf");
    let mut charges = Vec::new();
    if private_parities {
        charges.push(("parity release".to_string(), cfg.rho / 2.0));
    }
    charges.extend(labels.iter().map(|l| (l.clone(), rho)));
    reserve(accountant, &charges, cfg.non_private)?;

    let mut meta = EstimateMeta::new(cfg);
    let second = data.slice(n1..data.len());
    let table = match &linf.parities {
        ParitySource::Pmw(pmw) => {
            let mut pmw = pmw.clone();
            pmw.non_private |= cfg.non_private;
            pmw.seed = cfg.seed;
            // the release was charged above
            let mut scratch = Accountant::new(cfg.rho / 2.0)?;
            pmw_release(&second, t, cfg.rho / 2.0, &pmw, &mut scratch)?.table
        }
        ParitySource::Empirical => {
            if !cfg.non_private {
                meta.warnings.push("parities computed without privacy".into());
            }
            empirical_parities(&second, t)?
        }
        ParitySource::Given(table) => table.clone(),
    };
    let fits = fit_nodes(&data.slice(0..n1), t, cfg, rho, &labels, &mut meta)?;

    let mut u = MultilinearPolynomial::zero(p);
    for (i, (map, v)) in fits.maps.iter().zip(&fits.polys).enumerate() {
        for index in map.monomials().iter().filter(|m| m.indices().first().map_or(true, |&m| m > i)) {
            let derivative = v.partial_derivative(index)?;
            let mut value = 0.0;
            for (monomial, coef) in derivative.terms() {
                let q = table
                    .get(monomial)
                    .ok_or_else(|| invalid(format!("no parity estimate for {monomial:?}")))?;
                value += coef * q;
            }
            u.add_term(index.with(i), value)?;
        }
    }
    if !cfg.non_private {
        meta.ledger = charges.into_iter().map(|(label, rho)| Charge { label, rho }).collect();
    }
    Ok(MRFEstimate { model: BinaryMRF::new(t, u)?, node_polynomials: fits.polys, parities: Some(table), meta })
}
