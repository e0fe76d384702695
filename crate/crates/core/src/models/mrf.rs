use crate::error::{invalid, Result};
use crate::polynomial::{MonomialIndex, MultilinearPolynomial};

use super::spin;

/// Binary t-wise Markov random field `Pr(z) ∝ exp(h(z))` on `{-1, +1}^p`,
/// where `h` has no monomial larger than `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMRF {
    t: usize,
    h: MultilinearPolynomial,
}

impl BinaryMRF {
    pub fn new(t: usize, h: MultilinearPolynomial) -> Result<Self> {
        if h.degree() > t {
            return Err(invalid(format!("factorization polynomial has degree {} > t = {t}", h.degree())));
        }
        Ok(BinaryMRF { t, h })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn order(&self) -> usize {
        self.t
    }

    pub fn polynomial(&self) -> &MultilinearPolynomial {
        &self.h
    }

    /// `∂_i h` for every node.
    pub fn node_derivatives(&self) -> Vec<MultilinearPolynomial> {
        (0..self.dim())
            .map(|i| self.h.partial_derivative(&MonomialIndex::singleton(i)).expect("in range"))
            .collect()
    }

    /// `λ = max_i ‖∂_i h‖₁`.
    pub fn width(&self) -> f64 {
        self.node_derivatives().iter().map(MultilinearPolynomial::l1_norm).fold(0.0, f64::max)
    }

    pub fn log_weight(&self, state: &[u8]) -> f64 {
        let x: Vec<i8> = state.iter().map(|&s| spin(s)).collect();
        self.h.evaluate_unchecked(&x)
    }

    /// `2 ∂_i h(x)`, the log-odds of `Z_i = +1` given the rest. The value
    /// of `x_i` is irrelevant because `∂_i h` does not contain `x_i`.
    pub fn conditional_logit(&self, i: usize, x: &[i8]) -> f64 {
        let d = self.h.partial_derivative(&MonomialIndex::singleton(i)).expect("in range");
        2.0 * d.evaluate_unchecked(x)
    }
}
