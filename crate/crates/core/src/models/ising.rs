use crate::error::{invalid, Error, Result};
use crate::polynomial::{MonomialIndex, MultilinearPolynomial};

use super::{sigmoid, spin, PairwiseModel};

/// Ising model `Pr(z) ∝ exp(Σ_{i<j} A_ij z_i z_j + Σ_i θ_i z_i)` on `{-1, +1}^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    p: usize,
    a: Vec<f64>,
    theta: Vec<f64>,
}

impl IsingModel {
    /// Builds a model from a dense interaction matrix, which must be
    /// symmetric with a zero diagonal.
    pub fn new(a: Vec<Vec<f64>>, theta: Vec<f64>) -> Result<Self> {
        let p = theta.len();
        if a.len() != p || a.iter().any(|row| row.len() != p) {
            return Err(invalid(format!("interaction matrix must be {p}×{p}")));
        }
        for i in 0..p {
            if a[i][i] != 0.0 {
                return Err(invalid(format!("A[{i}][{i}] = {} must be zero", a[i][i])));
            }
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(invalid(format!("A is not symmetric at ({i}, {j})")));
                }
            }
        }
        if a.iter().flatten().chain(&theta).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite model parameter"));
        }
        Ok(IsingModel { p, a: a.into_iter().flatten().collect(), theta })
    }

    /// Model with no interactions and no field.
    pub fn zero(p: usize) -> Self {
        IsingModel { p, a: vec![0.0; p * p], theta: vec![0.0; p] }
    }

    /// Builds a model from a list of edges `(i, j, A_ij)`.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)], theta: Vec<f64>) -> Result<Self> {
        let mut a = vec![vec![0.0; p]; p];
        for &(i, j, w) in edges {
            if i == j || i >= p || j >= p {
                return Err(invalid(format!("bad edge ({i}, {j}) for p = {p}")));
            }
            a[i][j] = w;
            a[j][i] = w;
        }
        IsingModel::new(a, theta)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.p + j]
    }

    pub fn field(&self, i: usize) -> f64 {
        self.theta[i]
    }

    pub fn fields(&self) -> &[f64] {
        &self.theta
    }

    /// Rows of the interaction matrix.
    pub fn couplings(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.p.max(1)).map(<[f64]>::to_vec).take(self.p).collect()
    }

    /// Edges `(i, j)` with `i < j` and `A_ij ≠ 0`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.coupling(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `λ = max_i (Σ_j |A_ij| + |θ_i|)`.
    pub fn width(&self) -> f64 {
        (0..self.p)
            .map(|i| (0..self.p).map(|j| self.coupling(i, j).abs()).sum::<f64>() + self.theta[i].abs())
            .fold(0.0, f64::max)
    }

    /// Smallest nonzero `|A_ij|`.
    pub fn min_edge(&self) -> Result<f64> {
        self.a
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .reduce(f64::min)
            .ok_or(Error::NoEdges)
    }

    /// Unnormalized log-probability of a symbol vector (`0 ↔ -1`, `1 ↔ +1`).
    pub fn log_weight(&self, state: &[u8]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.p {
            let zi = f64::from(spin(state[i]));
            total += self.theta[i] * zi;
            for j in i + 1..self.p {
                total += self.coupling(i, j) * zi * f64::from(spin(state[j]));
            }
        }
        total
    }

    /// `Σ_{j≠i} 2 A_ij z_j + 2 θ_i`, the log-odds of `Z_i = +1` given the
    /// rest. Entry `i` of `state` is ignored.
    pub fn conditional_logit(&self, i: usize, state: &[u8]) -> f64 {
        let mut field = self.theta[i];
        for j in 0..self.p {
            if j != i {
                field += self.coupling(i, j) * f64::from(spin(state[j]));
            }
        }
        2.0 * field
    }

    /// `Pr(Z_i = +1 | Z_{-i})`.
    pub fn conditional_plus(&self, i: usize, state: &[u8]) -> f64 {
        sigmoid(self.conditional_logit(i, state))
    }

    /// Factorization polynomial with `h̄({i,j}) = A_ij` and `h̄({i}) = θ_i`.
    pub fn to_mrf(&self) -> super::BinaryMRF {
        let mut terms = Vec::new();
        for i in 0..self.p {
            terms.push((MonomialIndex::singleton(i), self.theta[i]));
            for j in i + 1..self.p {
                terms.push((MonomialIndex::from_sorted(vec![i, j]), self.coupling(i, j)));
            }
        }
        let h = MultilinearPolynomial::from_terms(self.p, terms).expect("indices are in range");
        super::BinaryMRF::new(2, h).expect("degree two")
    }

    /// The same distribution as a pairwise model over two symbols, with
    /// symbol 0 standing for -1 and symbol 1 for +1. The result is centered.
    pub fn to_pairwise(&self) -> PairwiseModel {
        let mut out = PairwiseModel::zero(self.p, 2);
        for (i, j) in self.edges() {
            let a = self.coupling(i, j);
            out.set_weight(i, j, vec![a, -a, -a, a]).expect("valid pair");
        }
        for i in 0..self.p {
            out.set_field(i, vec![-self.theta[i], self.theta[i]]).expect("valid field");
        }
        out
    }

    /// Couples variables `2i` and `2i+1` with weight `eta` for every pair and
    /// leaves the model otherwise empty.
    pub fn matched_pairs(p: usize, eta: f64) -> Result<Self> {
        if p % 2 != 0 {
            return Err(invalid(format!("matched pairs need an even dimension, got {p}")));
        }
        IsingModel::matched_pairs_with(&vec![eta; p / 2])
    }

    /// Matched pairs with a separate weight per pair; dimension is
    /// `2 * etas.len()`.
    pub fn matched_pairs_with(etas: &[f64]) -> Result<Self> {
        let p = 2 * etas.len();
        let edges: Vec<_> = etas.iter().enumerate().map(|(k, &eta)| (2 * k, 2 * k + 1, eta)).collect();
        IsingModel::from_edges(p, &edges, vec![0.0; p])
    }
}
