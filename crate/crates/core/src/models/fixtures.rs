//! Random model generators with a prescribed width, used by tests, the
//! experiment harness and the book.

use rand::Rng;

use super::{BinaryMRF, IsingModel, PairwiseModel};
use crate::polynomial::{MonomialIndex, MultilinearPolynomial};

/// Ising model with every pair coupled with probability `density`, random
/// signs and magnitudes, rescaled so that its width equals `width`.
pub fn random_ising<R: Rng>(p: usize, width: f64, density: f64, rng: &mut R) -> IsingModel {
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen::<f64>() < density {
                edges.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let theta: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let raw = IsingModel::from_edges(p, &edges, theta.clone()).expect("valid edges");
    let scale = if raw.width() > 0.0 { width / raw.width() } else { 0.0 };
    let edges: Vec<_> = edges.into_iter().map(|(i, j, w)| (i, j, w * scale)).collect();
    IsingModel::from_edges(p, &edges, theta.into_iter().map(|t| t * scale).collect()).expect("valid edges")
}

/// Centered pairwise model over `k` symbols with the given width.
pub fn random_pairwise<R: Rng>(p: usize, k: usize, width: f64, density: f64, rng: &mut R) -> PairwiseModel {
    let mut weights = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen::<f64>() < density {
                weights.push((i, j, (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()));
            }
        }
    }
    let fields: Vec<Vec<f64>> = (0..p).map(|_| (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
    let centered = PairwiseModel::new(p, k, weights, fields).expect("valid model").center();
    let w = centered.width();
    let scale = if w > 0.0 { width / w } else { 0.0 };
    let weights = centered
        .stored_weights()
        .iter()
        .map(|(&(i, j), m)| (i, j, m.iter().map(|v| v * scale).collect()))
        .collect::<Vec<_>>();
    let fields = centered.fields().iter().map(|f| f.iter().map(|v| v * scale).collect()).collect();
    PairwiseModel::new(p, k, weights, fields).expect("valid model")
}

/// Binary MRF with `terms` random monomials of size between 1 and `t`,
/// rescaled to the given width.
pub fn random_mrf<R: Rng>(p: usize, t: usize, terms: usize, width: f64, rng: &mut R) -> BinaryMRF {
    let mut h = MultilinearPolynomial::zero(p);
    for _ in 0..terms {
        let size = rng.gen_range(1..=t.min(p));
        let mut vars: Vec<usize> = (0..p).collect();
        for a in 0..size {
            let b = rng.gen_range(a..p);
            vars.swap(a, b);
        }
        let index = MonomialIndex::new(vars[..size].iter().copied()).expect("distinct");
        h.add_term(index, rng.gen_range(-1.0..1.0)).expect("in range");
    }
    let raw = BinaryMRF::new(t, h.clone()).expect("degree bounded");
    let scale = if raw.width() > 0.0 { width / raw.width() } else { 0.0 };
    let scaled = MultilinearPolynomial::from_terms(p, h.terms().map(|(i, c)| (i.clone(), c * scale)))
        .expect("in range");
    BinaryMRF::new(t, scaled).expect("degree bounded")
}
