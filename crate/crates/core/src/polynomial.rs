//! Sparse multilinear polynomials over `{-1, +1}^p`.
//!
//! A polynomial is a map from monomials (sets of variable indices) to real
//! coefficients, `h(x) = Σ_I h̄(I) Π_{i∈I} x_i`. Variables are indexed from
//! zero. Monomials order first by size and then lexicographically; that order
//! is used for iteration, evaluation and serialization.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// Coefficients with magnitude at or below this are treated as zero.
pub const ZERO_TOLERANCE: f64 = 1e-15;

/// A set of variable indices stored as a strictly increasing sequence.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct MonomialIndex(Vec<usize>);

impl MonomialIndex {
    /// The empty monomial (the constant term).
    pub fn empty() -> Self {
        MonomialIndex(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        MonomialIndex(vec![i])
    }

    /// Builds a monomial from any collection of indices. Duplicates are
    /// rejected, order does not matter.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid(format!("repeated variable in monomial {v:?}")));
        }
        Ok(MonomialIndex(v))
    }

    /// Wraps an already strictly increasing sequence.
    pub(crate) fn from_sorted(v: Vec<usize>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        MonomialIndex(v)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Smallest variable, `None` for the constant term.
    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn is_disjoint(&self, other: &MonomialIndex) -> bool {
        let (mut a, mut b) = (0, 0);
        while a < self.0.len() && b < other.0.len() {
            match self.0[a].cmp(&other.0[b]) {
                Ordering::Less => a += 1,
                Ordering::Greater => b += 1,
                Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn is_subset(&self, other: &MonomialIndex) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    pub fn union(&self, other: &MonomialIndex) -> MonomialIndex {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        while a < self.0.len() || b < other.0.len() {
            let next = match (self.0.get(a), other.0.get(b)) {
                (Some(&x), Some(&y)) if x < y => {
                    a += 1;
                    x
                }
                (Some(&x), Some(&y)) if y < x => {
                    b += 1;
                    y
                }
                (Some(&x), Some(_)) => {
                    a += 1;
                    b += 1;
                    x
                }
                (Some(&x), None) => {
                    a += 1;
                    x
                }
                (None, Some(&y)) => {
                    b += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            v.push(next);
        }
        MonomialIndex(v)
    }

    /// `self ∖ other`.
    pub fn difference(&self, other: &MonomialIndex) -> MonomialIndex {
        MonomialIndex(self.0.iter().copied().filter(|i| !other.contains(*i)).collect())
    }

    /// Adds one variable.
    pub fn with(&self, i: usize) -> MonomialIndex {
        self.union(&MonomialIndex::singleton(i))
    }

    /// Π_{i∈I} x_i for a ±1 point.
    #[inline]
    pub fn parity(&self, x: &[i8]) -> i8 {
        self.0.iter().fold(1i8, |acc, &i| acc * x[i])
    }
}

impl Ord for MonomialIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MonomialIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for MonomialIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MonomialIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        MonomialIndex::new(v).map_err(serde::de::Error::custom)
    }
}

/// All subsets of `vars` with size at most `max_size`, in canonical order.
pub fn subsets_up_to(vars: &[usize], max_size: usize) -> Vec<MonomialIndex> {
    let mut out = vec![MonomialIndex::empty()];
    let mut current = Vec::new();
    for size in 1..=max_size.min(vars.len()) {
        combinations(vars, size, 0, &mut current, &mut out);
    }
    out
}

fn combinations(
    vars: &[usize],
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<MonomialIndex>,
) {
    if current.len() == size {
        out.push(MonomialIndex(current.clone()));
        return;
    }
    for k in start..vars.len() {
        if vars.len() - k < size - current.len() {
            break;
        }
        current.push(vars[k]);
        combinations(vars, size, k + 1, current, out);
        current.pop();
    }
}

/// Number of subsets of an `m`-set with size at most `max_size`.
pub fn count_subsets_up_to(m: usize, max_size: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for j in 0..=max_size.min(m) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(m - j) / (j + 1);
    }
    total
}

/// A multilinear polynomial in `p` variables with sparse coefficients.
#[derive(Clone, PartialEq, Default)]
pub struct MultilinearPolynomial {
    p: usize,
    terms: BTreeMap<MonomialIndex, f64>,
}

impl MultilinearPolynomial {
    /// The zero polynomial.
    pub fn zero(p: usize) -> Self {
        MultilinearPolynomial { p, terms: BTreeMap::new() }
    }

    /// Builds a polynomial, summing repeated monomials and dropping
    /// coefficients that end up at zero.
    pub fn from_terms(
        p: usize,
        terms: impl IntoIterator<Item = (MonomialIndex, f64)>,
    ) -> Result<Self> {
        let mut poly = MultilinearPolynomial::zero(p);
        for (index, coef) in terms {
            poly.add_term(index, coef)?;
        }
        Ok(poly)
    }

    /// Adds `coef` to the coefficient of `index`.
    pub fn add_term(&mut self, index: MonomialIndex, coef: f64) -> Result<()> {
        if !coef.is_finite() {
            return Err(invalid(format!("non-finite coefficient {coef} for {index:?}")));
        }
        if let Some(&max) = index.indices().last() {
            if max >= self.p {
                return Err(invalid(format!("monomial {index:?} exceeds dimension {}", self.p)));
            }
        }
        let slot = self.terms.entry(index.clone()).or_insert(0.0);
        *slot += coef;
        if slot.abs() <= ZERO_TOLERANCE {
            self.terms.remove(&index);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn coefficient(&self, index: &MonomialIndex) -> f64 {
        self.terms.get(index).copied().unwrap_or(0.0)
    }

    /// Stored terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&MonomialIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest monomial size, 0 for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(MonomialIndex::len).max().unwrap_or(0)
    }

    /// Evaluates at a point of `{-1, +1}^p`.
    pub fn evaluate(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.p {
            return Err(invalid(format!("point has {} coordinates, polynomial has {}", x.len(), self.p)));
        }
        if let Some(bad) = x.iter().find(|&&v| v != 1 && v != -1) {
            return Err(invalid(format!("coordinate {bad} is not ±1")));
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluation without validating `x`; sums in canonical term order.
    #[inline]
    pub fn evaluate_unchecked(&self, x: &[i8]) -> f64 {
        self.terms.iter().map(|(index, &c)| c * f64::from(index.parity(x))).sum()
    }

    /// `∂_I h = Σ_{J∩I=∅} h̄(J ∪ I) Π_{j∈J} x_j`.
    pub fn partial_derivative(&self, wrt: &MonomialIndex) -> Result<MultilinearPolynomial> {
        if let Some(max) = wrt.max() {
            if max >= self.p {
                return Err(invalid(format!("derivative index {wrt:?} exceeds dimension {}", self.p)));
            }
        }
        let terms = self
            .terms
            .iter()
            .filter(|(index, _)| wrt.is_subset(index))
            .map(|(index, &c)| (index.difference(wrt), c))
            .collect();
        Ok(MultilinearPolynomial { p: self.p, terms })
    }

    /// `Σ_I |h̄(I)|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Stored monomials not strictly contained in another stored monomial.
    pub fn maximal_monomials(&self) -> Vec<MonomialIndex> {
        self.terms
            .keys()
            .filter(|index| {
                !self
                    .terms
                    .keys()
                    .any(|other| other.len() > index.len() && index.is_subset(other))
            })
            .cloned()
            .collect()
    }
}

impl fmt::Debug for MultilinearPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[p={}](", self.p)?;
        for (n, (index, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·x{index:?}")?;
        }
        write!(f, ")")
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    vars: MonomialIndex,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    p: usize,
    terms: Vec<TermJson>,
}

impl Serialize for MultilinearPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialJson {
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|(vars, &coef)| TermJson { vars: vars.clone(), coef })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultilinearPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolynomialJson::deserialize(d)?;
        MultilinearPolynomial::from_terms(raw.p, raw.terms.into_iter().map(|t| (t.vars, t.coef)))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(v: &[usize]) -> MonomialIndex {
        MonomialIndex::new(v.iter().copied()).unwrap()
    }

    // 0.5·x1x2x3 + 0.2·x1 − 0.3·x2, written with zero-based variables.
    fn running_example() -> MultilinearPolynomial {
        MultilinearPolynomial::from_terms(3, [(m(&[0, 1, 2]), 0.5), (m(&[0]), 0.2), (m(&[1]), -0.3)])
            .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let h = running_example();
        assert_eq!(MultilinearPolynomial::zero(3).evaluate(&[1, -1, 1]).unwrap(), 0.0);
        assert!((h.evaluate(&[1, 1, 1]).unwrap() - 0.4).abs() < 1e-15);
        assert!(h.evaluate(&[1, -1, 1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_bad_points() {
        let h = running_example();
        assert!(h.evaluate(&[1, 1]).is_err());
        assert!(h.evaluate(&[1, 0, 1]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let h = running_example();
        let d1 = h.partial_derivative(&m(&[0])).unwrap();
        let expected =
            MultilinearPolynomial::from_terms(3, [(m(&[1, 2]), 0.5), (m(&[]), 0.2)]).unwrap();
        assert_eq!(d1, expected);

        let single = MultilinearPolynomial::from_terms(4, [(m(&[0, 1]), 1.0)]).unwrap();
        assert!(single.partial_derivative(&m(&[3])).unwrap().is_zero());
        assert_eq!(h.partial_derivative(&MonomialIndex::empty()).unwrap(), h);
        assert!(h.partial_derivative(&m(&[3])).is_err());
    }

    #[test]
    fn norm_examples() {
        let h = running_example();
        assert_eq!(MultilinearPolynomial::zero(2).l1_norm(), 0.0);
        assert!((h.l1_norm() - 1.0).abs() < 1e-15);
        assert!((h.partial_derivative(&m(&[0])).unwrap().l1_norm() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn maximal_examples() {
        assert_eq!(running_example().maximal_monomials(), vec![m(&[0, 1, 2])]);
        let single = MultilinearPolynomial::from_terms(2, [(m(&[0]), 1.0)]).unwrap();
        assert_eq!(single.maximal_monomials(), vec![m(&[0])]);
        let two = MultilinearPolynomial::from_terms(2, [(m(&[0]), 0.1), (m(&[1]), 0.1)]).unwrap();
        assert_eq!(two.maximal_monomials(), vec![m(&[0]), m(&[1])]);
    }

    #[test]
    fn cancelling_terms_are_dropped() {
        let h = MultilinearPolynomial::from_terms(2, [(m(&[0]), 0.3), (m(&[1]), 1.0), (m(&[0]), -0.3)])
            .unwrap();
        assert_eq!(h.num_terms(), 1);
        assert_eq!(h.coefficient(&m(&[0])), 0.0);
    }

    #[test]
    fn json_layout() {
        let h = running_example();
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(
            s,
            r#"{"p":3,"terms":[{"vars":[0],"coef":0.2},{"vars":[1],"coef":-0.3},{"vars":[0,1,2],"coef":0.5}]}"#
        );
        let back: MultilinearPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<MultilinearPolynomial>(r#"{"p":2,"terms":[{"vars":[2],"coef":1}]}"#).is_err());
    }

    #[test]
    fn subset_enumeration() {
        let s = subsets_up_to(&[0, 2, 5], 2);
        assert_eq!(s, vec![m(&[]), m(&[0]), m(&[2]), m(&[5]), m(&[0, 2]), m(&[0, 5]), m(&[2, 5])]);
        assert_eq!(count_subsets_up_to(3, 2), 7);
        assert_eq!(count_subsets_up_to(10, 3), 1 + 10 + 45 + 120);
    }

    fn arb_poly() -> impl Strategy<Value = MultilinearPolynomial> {
        (2usize..=10).prop_flat_map(|p| {
            prop::collection::vec((prop::collection::btree_set(0..p, 0..=4), -1.0f64..1.0), 0..=20)
                .prop_map(move |terms| {
                    MultilinearPolynomial::from_terms(
                        p,
                        terms.into_iter().map(|(s, c)| (MonomialIndex::new(s).unwrap(), c)),
                    )
                    .unwrap()
                })
        })
    }

    fn all_points(p: usize) -> impl Iterator<Item = Vec<i8>> {
        (0u32..(1 << p)).map(move |bits| (0..p).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    proptest! {
        #[test]
        fn derivative_matches_naive_double_loop(h in arb_poly(), seed in any::<u64>()) {
            let p = h.dim();
            let wrt: Vec<usize> = (0..p).filter(|i| seed >> i & 1 == 1 && i % 3 == 0).collect();
            let wrt = MonomialIndex::new(wrt).unwrap();
            let d = h.partial_derivative(&wrt).unwrap();
            let x: Vec<i8> = (0..p).map(|i| if seed >> (i + 20) & 1 == 1 { 1 } else { -1 }).collect();
            // naive: every J ⊆ [p] disjoint from I, looking up J ∪ I
            let mut naive = 0.0;
            for bits in 0u32..(1 << p) {
                let j = MonomialIndex::new((0..p).filter(|k| bits >> k & 1 == 1)).unwrap();
                if j.is_disjoint(&wrt) {
                    let c = h.coefficient(&j.union(&wrt));
                    let prod: f64 = j.indices().iter().map(|&k| f64::from(x[k])).product();
                    naive += c * prod;
                }
            }
            prop_assert!((d.evaluate(&x).unwrap() - naive).abs() <= 1e-12);
        }

        #[test]
        fn derivatives_compose(h in arb_poly(), i in 0usize..10, j in 0usize..10) {
            let p = h.dim();
            let (i, j) = (i % p, j % p);
            prop_assume!(i != j);
            let di = h.partial_derivative(&MonomialIndex::singleton(i)).unwrap();
            let dij = di.partial_derivative(&MonomialIndex::singleton(j)).unwrap();
            let joint = h.partial_derivative(&MonomialIndex::new([i, j]).unwrap()).unwrap();
            prop_assert_eq!(dij, joint);
        }

        #[test]
        fn l1_norm_bounds_every_value(h in arb_poly()) {
            prop_assume!(h.dim() <= 8);
            for x in all_points(h.dim()) {
                prop_assert!(h.evaluate(&x).unwrap().abs() <= h.l1_norm() + 1e-12);
            }
        }
    }
}
