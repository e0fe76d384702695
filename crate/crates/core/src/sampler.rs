//! i.i.d. sample generation.
//!
//! Sample `m` is always drawn from its own stream
//! [`rng::indexed_stream`]`(seed, m)`, so datasets do not depend on how
//! many threads produced them.

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{Alphabet, Dataset};
use crate::error::Result;
use crate::models::{sigmoid, spin, Model};
use crate::oracle::exact_distribution;
use crate::polynomial::MultilinearPolynomial;
use crate::rng;

/// Default Gibbs burn-in, in full sweeps.
pub const DEFAULT_BURN_IN: usize = 100;

fn alphabet_of(model: &Model) -> Alphabet {
    match model {
        Model::Pairwise(m) => Alphabet::Categorical(m.alphabet()),
        _ => Alphabet::Binary,
    }
}

/// Draws `n` samples by inverse-CDF lookup in the exact probability table.
pub fn exact_sample(model: &Model, n: usize, seed: u64) -> Result<Dataset> {
    let dist = exact_distribution(model)?;
    let cdf = dist.cdf();
    let p = model.dim();
    let mut rows = vec![0u8; n * p];
    rows.par_chunks_mut(p).enumerate().for_each(|(m, row)| {
        let u: f64 = rng::indexed_stream(seed, m as u64).gen();
        let index = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        dist.state_into(index, row);
    });
    Ok(Dataset::new(p, alphabet_of(model), rows)?.with_meta("exact", Some(seed)))
}

/// Closed-form single-site update rule, with per-node derivatives of the
/// factorization polynomial precomputed for MRFs.
struct SiteKernel<'a> {
    model: &'a Model,
    derivatives: Vec<MultilinearPolynomial>,
}

impl<'a> SiteKernel<'a> {
    fn new(model: &'a Model) -> Self {
        let derivatives = match model {
            Model::Mrf(m) => m.node_derivatives(),
            _ => Vec::new(),
        };
        SiteKernel { model, derivatives }
    }

    fn resample<R: Rng>(&self, i: usize, state: &mut [u8], spins: &mut [i8], buf: &mut [f64], rng: &mut R) {
        let u: f64 = rng.gen();
        match self.model {
            Model::Ising(m) => {
                state[i] = u8::from(u < m.conditional_plus(i, state));
            }
            Model::Mrf(_) => {
                let plus = sigmoid(2.0 * self.derivatives[i].evaluate_unchecked(spins));
                state[i] = u8::from(u < plus);
                spins[i] = spin(state[i]);
            }
            Model::Pairwise(m) => {
                self.model.site_conditional(i, state, buf);
                let k = m.alphabet();
                let mut acc = 0.0;
                let mut pick = k - 1;
                for (a, pr) in buf[..k].iter().enumerate() {
                    acc += pr;
                    if u < acc {
                        pick = a;
                        break;
                    }
                }
                state[i] = pick as u8;
            }
        }
    }
}

/// Gibbs sampling with an independent chain per sample.
///
/// Each chain starts uniformly at random and runs `burn_in` systematic
/// sweeps; its final state is the sample. Chains are never reused, so
/// `thin` has no effect and is recorded only in the metadata.
pub fn gibbs_sample(model: &Model, n: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Dataset> {
    let p = model.dim();
    let k = model.alphabet();
    let kernel = SiteKernel::new(model);
    let mut rows = vec![0u8; n * p];
    rows.par_chunks_mut(p).enumerate().for_each(|(m, state)| {
        let mut rng = rng::indexed_stream(seed, m as u64);
        for s in state.iter_mut() {
            *s = rng.gen_range(0..k) as u8;
        }
        let mut spins: Vec<i8> = state.iter().map(|&s| spin(s)).collect();
        let mut buf = vec![0.0; k];
        for _ in 0..burn_in {
            for i in 0..p {
                kernel.resample(i, state, &mut spins, &mut buf, &mut rng);
            }
        }
    });
    let tag = format!("gibbs(burn_in={burn_in},thin={thin})");
    Ok(Dataset::new(p, alphabet_of(model), rows)?.with_meta(tag, Some(seed)))
}
