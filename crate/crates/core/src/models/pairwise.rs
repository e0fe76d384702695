use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

/// Pairwise model on `[k]^p`:
/// `Pr(z) ∝ exp(Σ_{i<j} W_ij(z_i, z_j) + Σ_i θ_i(z_i))`.
///
/// Symbols are `0..k`. Weight matrices are stored for `i < j` only, rows
/// indexed by the symbol of `i`; `W_ji` is read as the transpose. Pairs
/// without a stored matrix have zero interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    p: usize,
    k: usize,
    weights: BTreeMap<(usize, usize), Vec<f64>>,
    fields: Vec<Vec<f64>>,
}

impl PairwiseModel {
    pub fn zero(p: usize, k: usize) -> Self {
        PairwiseModel { p, k, weights: BTreeMap::new(), fields: vec![vec![0.0; k]; p] }
    }

    /// Builds a model from `(i, j, W_ij)` triples (row-major `k×k`, any
    /// order of `i` and `j`) and per-node fields.
    pub fn new(
        p: usize,
        k: usize,
        weights: impl IntoIterator<Item = (usize, usize, Vec<f64>)>,
        fields: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("alphabet size must be at least 2, got {k}")));
        }
        if fields.len() != p {
            return Err(invalid(format!("expected {p} field vectors, got {}", fields.len())));
        }
        let mut model = PairwiseModel::zero(p, k);
        for (i, f) in fields.into_iter().enumerate() {
            model.set_field(i, f)?;
        }
        for (i, j, w) in weights {
            model.set_weight(i, j, w)?;
        }
        Ok(model)
    }

    /// Sets `W_ij` (row-major, rows indexed by the symbol of `i`).
    pub fn set_weight(&mut self, i: usize, j: usize, w: Vec<f64>) -> Result<()> {
        let k = self.k;
        if i == j || i >= self.p || j >= self.p {
            return Err(invalid(format!("bad pair ({i}, {j}) for p = {}", self.p)));
        }
        if w.len() != k * k || w.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("W[{i},{j}] must hold {} finite entries", k * k)));
        }
        let stored = if i < j { w } else { transpose(&w, k) };
        let key = (i.min(j), i.max(j));
        if stored.iter().all(|v| *v == 0.0) {
            self.weights.remove(&key);
        } else {
            self.weights.insert(key, stored);
        }
        Ok(())
    }

    pub fn set_field(&mut self, i: usize, f: Vec<f64>) -> Result<()> {
        if i >= self.p || f.len() != self.k || f.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("field {i} must hold {} finite entries", self.k)));
        }
        self.fields[i] = f;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    /// `W_ij(a, b)` for any ordered pair.
    #[inline]
    pub fn weight(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        let k = self.k;
        if i < j {
            self.weights.get(&(i, j)).map_or(0.0, |w| w[a * k + b])
        } else {
            self.weights.get(&(j, i)).map_or(0.0, |w| w[b * k + a])
        }
    }

    /// `W_ij` as a row-major matrix, rows indexed by the symbol of `i`.
    pub fn weight_matrix(&self, i: usize, j: usize) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                out[a * k + b] = self.weight(i, j, a, b);
            }
        }
        out
    }

    pub fn field(&self, i: usize, a: usize) -> f64 {
        self.fields[i][a]
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    /// Stored matrices, keyed by `(i, j)` with `i < j`.
    pub fn stored_weights(&self) -> &BTreeMap<(usize, usize), Vec<f64>> {
        &self.weights
    }

    /// Pairs `i < j` with a nonzero weight matrix.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.weights
            .iter()
            .filter(|(_, w)| w.iter().any(|v| *v != 0.0))
            .map(|(&e, _)| e)
            .collect()
    }

    /// `max_{i,a} (Σ_{j≠i} max_b |W_ij(a,b)| + |θ_i(a)|)`.
    pub fn width(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.p {
            for a in 0..self.k {
                let mut total = self.fields[i][a].abs();
                for j in (0..self.p).filter(|&j| j != i) {
                    total += (0..self.k).map(|b| self.weight(i, j, a, b).abs()).fold(0.0, f64::max);
                }
                best = best.max(total);
            }
        }
        best
    }

    /// `min_{(i,j)∈E} max_{a,b} |W_ij(a,b)|`, evaluated on the centered
    /// representation.
    pub fn min_edge(&self) -> Result<f64> {
        self.center()
            .weights
            .values()
            .map(|w| w.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .filter(|m| *m > 0.0)
            .reduce(f64::min)
            .ok_or(Error::NoEdges)
    }

    /// Moves row and column means of every weight matrix into the fields.
    ///
    /// Row means of `W_ij` go to `θ_i`, then column means of the
    /// row-centered matrix go to `θ_j`. The resulting matrices have zero row
    /// and column sums and the distribution is unchanged.
    pub fn center(&self) -> PairwiseModel {
        let k = self.k;
        let kf = k as f64;
        let mut out = self.clone();
        for (&(i, j), w) in out.weights.iter_mut() {
            for a in 0..k {
                let mean = w[a * k..(a + 1) * k].iter().sum::<f64>() / kf;
                for b in 0..k {
                    w[a * k + b] -= mean;
                }
                out.fields[i][a] += mean;
            }
            for b in 0..k {
                let mean = (0..k).map(|a| w[a * k + b]).sum::<f64>() / kf;
                for a in 0..k {
                    w[a * k + b] -= mean;
                }
                out.fields[j][b] += mean;
            }
        }
        out.weights.retain(|_, w| w.iter().any(|v| *v != 0.0));
        out
    }

    /// Whether every row and column of every weight matrix sums to zero
    /// within `tol`.
    pub fn is_centered(&self, tol: f64) -> bool {
        let k = self.k;
        self.weights.values().all(|w| {
            (0..k).all(|a| w[a * k..(a + 1) * k].iter().sum::<f64>().abs() <= tol)
                && (0..k).all(|b| (0..k).map(|a| w[a * k + b]).sum::<f64>().abs() <= tol)
        })
    }

    pub fn log_weight(&self, state: &[u8]) -> f64 {
        let k = self.k;
        let mut total: f64 = (0..self.p).map(|i| self.fields[i][state[i] as usize]).sum();
        for (&(i, j), w) in &self.weights {
            total += w[state[i] as usize * k + state[j] as usize];
        }
        total
    }

    /// Log-potential of `Z_i = a` given the other coordinates:
    /// `Σ_{j≠i} W_ij(a, z_j) + θ_i(a)`.
    pub fn site_energy(&self, i: usize, a: usize, state: &[u8]) -> f64 {
        let mut total = self.fields[i][a];
        for j in (0..self.p).filter(|&j| j != i) {
            total += self.weight(i, j, a, state[j] as usize);
        }
        total
    }

    /// Log-odds of `Z_i = u` against `Z_i = v` given the rest:
    /// `Σ_{j≠i} (W_ij(u, z_j) − W_ij(v, z_j)) + θ_i(u) − θ_i(v)`.
    pub fn pair_conditional_logit(&self, i: usize, u: usize, v: usize, state: &[u8]) -> f64 {
        self.site_energy(i, u, state) - self.site_energy(i, v, state)
    }
}

pub(crate) fn transpose(w: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            out[b * k + a] = w[a * k + b];
        }
    }
    out
}
