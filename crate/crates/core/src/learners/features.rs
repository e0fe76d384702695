//! Per-node feature vectors and the coefficient read-back helpers.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::models::spin;
use crate::pfw::LogisticProblem;
use crate::polynomial::{subsets_up_to, MonomialIndex};

/// Monomials `I ⊆ [p] \ {i}` used as features when regressing `Z_i` on the
/// other coordinates, in canonical order. The empty monomial is the
/// intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFeatureMap {
    node: usize,
    p: usize,
    monomials: Vec<MonomialIndex>,
}

impl NodeFeatureMap {
    /// `[1, z_0, ..., z_{p-1}]` with `z_i` left out.
    pub fn pairwise(p: usize, node: usize) -> Self {
        NodeFeatureMap::monomials_up_to(p, node, 2)
    }

    /// All monomials of size at most `t - 1` avoiding `node`.
    pub fn monomials_up_to(p: usize, node: usize, t: usize) -> Self {
        let others: Vec<usize> = (0..p).filter(|&j| j != node).collect();
        NodeFeatureMap { node, p, monomials: subsets_up_to(&others, t.saturating_sub(1)) }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MonomialIndex] {
        &self.monomials
    }

    /// Coordinate of `index` in the feature vector.
    pub fn position(&self, index: &MonomialIndex) -> Option<usize> {
        self.monomials.binary_search(index).ok()
    }

    pub fn encode_into(&self, x: &[i8], out: &mut Vec<f64>) {
        out.extend(self.monomials.iter().map(|m| f64::from(m.parity(x))));
    }

    pub fn encode(&self, x: &[i8]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.encode_into(x, &mut out);
        out
    }

    /// Regression problem for this node over a binary dataset, one stored
    /// row per distinct sample.
    pub fn problem(&self, counts: &[(&[u8], usize)]) -> Result<LogisticProblem> {
        let mut features = Vec::with_capacity(counts.len() * self.len());
        let mut labels = Vec::with_capacity(counts.len());
        let mut weights = Vec::with_capacity(counts.len());
        let mut x = vec![0i8; self.p];
        for (row, c) in counts {
            for (xi, s) in x.iter_mut().zip(row.iter()) {
                *xi = spin(*s);
            }
            self.encode_into(&x, &mut features);
            labels.push(f64::from(x[self.node]));
            weights.push(*c as f64);
        }
        LogisticProblem::from_flat(self.len(), features, labels, weights)
    }
}

/// Row `j` is the standard basis vector for symbol `s[j]`, flattened
/// row-major into a `len(s) · k` vector.
pub fn one_hot_encode(s: &[u8], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; s.len() * k];
    for (j, &a) in s.iter().enumerate() {
        out[j * k + a as usize] = 1.0;
    }
    out
}

/// Symbol layout `[z_{-i}, 0]` of a categorical sample, whose one-hot
/// encoding is the feature vector for node `i`.
pub(crate) fn node_symbols(row: &[u8], node: usize, out: &mut Vec<u8>) {
    out.clear();
    out.extend(row.iter().enumerate().filter(|(j, _)| *j != node).map(|(_, s)| *s));
    out.push(0);
}

/// Position of coordinate `j` among `[p] \ {i}`.
#[inline]
pub fn shifted_index(i: usize, j: usize) -> usize {
    if j < i {
        j
    } else {
        j - 1
    }
}

/// Centers a row-major `p × k` coefficient matrix whose last row multiplies
/// a constant one-hot row. Every other row loses its mean, and the sum of
/// those means is added to the last row, so inner products with encodings
/// of `[z, 1]` are unchanged.
pub fn center_rows_eq1(w: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || w.len() % k != 0 || w.is_empty() {
        return Err(invalid("matrix must be p × k with p, k ≥ 1"));
    }
    let p = w.len() / k;
    let mut u = w.to_vec();
    let mut moved = 0.0;
    for j in 0..p - 1 {
        let row = &mut u[j * k..(j + 1) * k];
        let mean = row.iter().sum::<f64>() / k as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        moved += mean;
    }
    u[(p - 1) * k..].iter_mut().for_each(|v| *v += moved);
    Ok(u)
}

/// Distinct rows of a binary dataset, checked.
pub(crate) fn binary_counts(data: &Dataset) -> Result<Vec<(&[u8], usize)>> {
    if !data.is_binary() {
        return Err(invalid("this learner needs ±1 data"));
    }
    if data.is_empty() {
        return Err(invalid("empty dataset"));
    }
    Ok(data.row_counts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_examples() {
        // symbols 2, 1 over [3] written 0-based
        assert_eq!(one_hot_encode(&[1, 0], 3), vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let all = one_hot_encode(&[0; 5], 2);
        assert!((0..5).all(|j| all[j * 2] == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<u8> = (0..7).map(|_| rng.gen_range(0..4)).collect();
        let x = one_hot_encode(&s, 4);
        assert!(x.chunks(4).all(|r| r.iter().sum::<f64>() == 1.0));
    }

    #[test]
    fn centering_example() {
        let u = center_rows_eq1(&[0.4, 0.2, 0.3, 0.1], 2).unwrap();
        let expect = [0.1, -0.1, 0.6, 0.4];
        assert!(u.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15), "{u:?}");
        let centered = [0.5, -0.5, 0.2, 0.7];
        assert_eq!(center_rows_eq1(&centered, 2).unwrap(), centered.to_vec());
    }

    #[test]
    fn centering_preserves_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (p, k) = (4, 3);
        let w: Vec<f64> = (0..p * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = center_rows_eq1(&w, k).unwrap();
        for _ in 0..100 {
            let mut s: Vec<u8> = (0..p - 1).map(|_| rng.gen_range(0..k as u8)).collect();
            s.push(0);
            let x = one_hot_encode(&s, k);
            let dot = |v: &[f64]| v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            assert!((dot(&u) - dot(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_maps() {
        let map = NodeFeatureMap::pairwise(4, 2);
        let names: Vec<_> = map.monomials().iter().map(|m| format!("{m:?}")).collect();
        assert_eq!(names, ["{}", "{0}", "{1}", "{3}"]);
        assert_eq!(map.encode(&[1, -1, 1, -1]), vec![1.0, 1.0, -1.0, -1.0]);
        let three = NodeFeatureMap::monomials_up_to(5, 0, 3);
        assert_eq!(three.len(), 1 + 4 + 6);
        assert_eq!(three.position(&MonomialIndex::new([3, 4]).unwrap()), Some(10));
        assert_eq!(NodeFeatureMap::monomials_up_to(5, 0, 1).len(), 1);
        assert_eq!(shifted_index(2, 1), 1);
        assert_eq!(shifted_index(2, 3), 2);
    }
}
