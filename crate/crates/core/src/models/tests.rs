use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::oracle::{exact_distribution, tv_distance};
use crate::polynomial::MonomialIndex;

fn m(v: &[usize]) -> MonomialIndex {
    MonomialIndex::new(v.iter().copied()).unwrap()
}

#[test]
fn ising_validation() {
    assert!(IsingModel::new(vec![vec![0.0, 1.0], vec![0.5, 0.0]], vec![0.0, 0.0]).is_err());
    assert!(IsingModel::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 0.0]).is_err());
    assert!(IsingModel::new(vec![vec![0.0]], vec![0.0, 0.0]).is_err());
}

#[test]
fn ising_width_examples() {
    assert_eq!(IsingModel::zero(3).width(), 0.0);
    let m3 = IsingModel::from_edges(3, &[(0, 1, 0.3), (0, 2, -0.2)], vec![0.1, 0.0, 0.0]).unwrap();
    assert!((m3.width() - 0.6).abs() < 1e-15);
    assert_eq!(IsingModel::matched_pairs(4, 0.5).unwrap().width(), 0.5);
}

#[test]
fn ising_min_edge_examples() {
    let one = IsingModel::from_edges(2, &[(0, 1, -0.4)], vec![0.0; 2]).unwrap();
    assert_eq!(one.min_edge().unwrap(), 0.4);
    let two = IsingModel::from_edges(4, &[(0, 1, 0.3), (2, 3, 0.7)], vec![0.0; 4]).unwrap();
    assert_eq!(two.min_edge().unwrap(), 0.3);
    assert!(matches!(IsingModel::zero(3).min_edge(), Err(Error::NoEdges)));
}

#[test]
fn pairwise_width_examples() {
    assert_eq!(PairwiseModel::zero(3, 3).width(), 0.0);
    let mut pw = PairwiseModel::new(2, 2, [(0, 1, vec![0.2, -0.2, -0.2, 0.2])], vec![vec![0.0; 2]; 2]).unwrap();
    assert!((pw.width() - 0.2).abs() < 1e-15);
    pw.set_field(0, vec![0.1, 0.0]).unwrap();
    assert!((pw.width() - 0.3).abs() < 1e-15);
}

#[test]
fn centering_examples() {
    let pw = PairwiseModel::new(2, 2, [(0, 1, vec![1.0, 0.0, 0.0, 1.0])], vec![vec![0.0; 2]; 2]).unwrap();
    let c = pw.center();
    assert_eq!(c.weight_matrix(0, 1), vec![0.5, -0.5, -0.5, 0.5]);
    assert_eq!(c.fields()[0], vec![0.5, 0.5]);
    assert_eq!(c.fields()[1], vec![0.0, 0.0]);
    assert_eq!(c.center(), c);
}

#[test]
fn centering_preserves_distribution_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for p in 2..=4 {
        for k in 2..=3 {
            let weights: Vec<_> = (0..p)
                .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, (0..k * k).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()))
                .collect();
            let fields = (0..p).map(|_| (0..k).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()).collect();
            let raw = PairwiseModel::new(p, k, weights, fields).unwrap();
            let c = raw.center();
            assert!(c.is_centered(1e-12));
            let cc = c.center();
            for ((_, a), (_, b)) in c.stored_weights().iter().zip(cc.stored_weights()) {
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
            let d1 = exact_distribution(&raw.into()).unwrap();
            let d2 = exact_distribution(&c.into()).unwrap();
            assert!(tv_distance(&d1, &d2).unwrap() <= 1e-10);
        }
    }
}

#[test]
fn transposed_access() {
    let pw = PairwiseModel::new(3, 3, [(2, 0, (0..9).map(f64::from).collect())], vec![vec![0.0; 3]; 3]).unwrap();
    // W_20(a, b) = 3a + b, so W_02(b, a) is the same entry.
    assert_eq!(pw.weight(2, 0, 1, 2), 5.0);
    assert_eq!(pw.weight(0, 2, 2, 1), 5.0);
}

#[test]
fn mrf_width_examples() {
    assert_eq!(BinaryMRF::new(2, MultilinearPolynomial::zero(3)).unwrap().width(), 0.0);
    let h = MultilinearPolynomial::from_terms(3, [(m(&[0, 1, 2]), 0.5), (m(&[0]), 0.2), (m(&[1]), -0.3)]).unwrap();
    assert!((BinaryMRF::new(3, h.clone()).unwrap().width() - 0.8).abs() < 1e-15);
    assert!(BinaryMRF::new(2, h).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let ising = fixtures::random_ising(6, 1.3, 0.5, &mut rng);
        assert!((ising.to_mrf().width() - ising.width()).abs() < 1e-12);
    }
}

#[test]
fn to_mrf_examples() {
    assert!(IsingModel::zero(3).to_mrf().polynomial().is_zero());
    let one = IsingModel::from_edges(2, &[(0, 1, 0.5)], vec![0.0; 2]).unwrap().to_mrf();
    assert_eq!(one.polynomial().terms().collect::<Vec<_>>(), vec![(&m(&[0, 1]), 0.5)]);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in 2..=6 {
        let ising = fixtures::random_ising(p, 1.5, 0.5, &mut rng);
        let a = exact_distribution(&ising.to_mrf().into()).unwrap();
        let b = exact_distribution(&ising.into()).unwrap();
        assert!(a.probs().iter().zip(b.probs()).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

#[test]
fn matched_pairs_examples() {
    assert!(IsingModel::matched_pairs(3, 0.5).is_err());
    let uniform = exact_distribution(&IsingModel::matched_pairs(2, 0.0).unwrap().into()).unwrap();
    assert!(uniform.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));

    let d = exact_distribution(&IsingModel::matched_pairs(4, 0.5).unwrap().into()).unwrap();
    assert!((d.parity(&m(&[0, 1])).unwrap() - 0.5f64.tanh()).abs() < 1e-12);
    assert!(d.parity(&m(&[0, 2])).unwrap().abs() < 1e-12);
    // pairs are independent: the joint factorizes into the two pair marginals
    for s in 0..d.num_states() {
        let z = d.state(s);
        // concordant cell e^η / (2e^η + 2e^{-η}) = (1 + tanh η) / 4
        let t = 0.5f64.tanh();
        let pair = |a: u8, b: u8| if a == b { (1.0 + t) / 4.0 } else { (1.0 - t) / 4.0 };
        assert!((d.prob(&z) - pair(z[0], z[1]) * pair(z[2], z[3])).abs() < 1e-12);
    }

    let per_pair = IsingModel::matched_pairs_with(&[0.2, -0.4]).unwrap();
    assert_eq!(per_pair.coupling(0, 1), 0.2);
    assert_eq!(per_pair.coupling(3, 2), -0.4);
    assert_eq!(per_pair.edges(), vec![(0, 1), (2, 3)]);
}

#[test]
fn delta_bound_examples() {
    assert_eq!(Model::from(IsingModel::zero(3)).delta_unbiased_bound(), 0.5);
    // a single k = 3 field entry of magnitude 1 gives width exactly 1
    let pw = PairwiseModel::new(1, 3, [], vec![vec![1.0, 0.0, 0.0]]).unwrap();
    assert!((Model::from(pw).delta_unbiased_bound() - (-2.0f64).exp() / 3.0).abs() < 1e-15);
    assert!(((-2.0f64).exp() / 3.0 - 0.04511).abs() < 1e-5);
    let h = MultilinearPolynomial::from_terms(2, [(m(&[0, 1]), 0.5)]).unwrap();
    let mrf = Model::from(BinaryMRF::new(2, h).unwrap());
    assert!((mrf.delta_unbiased_bound() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
    assert!(((-1.0f64).exp() / 2.0 - 0.18394).abs() < 1e-5);
}

#[test]
fn conditionals_respect_delta_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let models: Vec<Model> = vec![
        fixtures::random_ising(5, 2.0, 0.7, &mut rng).into(),
        fixtures::random_pairwise(4, 3, 2.0, 0.7, &mut rng).into(),
        fixtures::random_mrf(5, 3, 10, 2.0, &mut rng).into(),
    ];
    for model in models {
        let bound = model.delta_unbiased_bound();
        let d = exact_distribution(&model).unwrap();
        for s in 0..d.num_states() {
            let state = d.state(s);
            for i in 0..model.dim() {
                let mut rest = state.clone();
                rest.remove(i);
                for a in 0..model.alphabet() {
                    assert!(d.conditional(i, a, &rest).unwrap() >= bound - 1e-12);
                }
            }
        }
    }
}

#[test]
fn json_descriptors() {
    let ising: Model = IsingModel::from_edges(2, &[(0, 1, 0.5)], vec![0.1, 0.0]).unwrap().into();
    let text = serde_json::to_string(&ising).unwrap();
    assert_eq!(text, r#"{"type":"ising","p":2,"A":[[0.0,0.5],[0.5,0.0]],"theta":[0.1,0.0]}"#);
    assert_eq!(Model::from_json(&text).unwrap(), ising);

    let pw = Model::from_json(r#"{"type":"pairwise","p":2,"k":2,"W":{"1,0":[[1,2],[3,4]]},"Theta":[[0,0],[0,0]]}"#)
        .unwrap();
    let Model::Pairwise(inner) = &pw else { panic!() };
    assert_eq!(inner.weight(0, 1, 0, 1), 3.0);
    assert_eq!(Model::from_json(&pw.to_json()).unwrap(), pw);

    let mrf = Model::from_json(r#"{"type":"mrf","t":3,"h":{"p":3,"terms":[{"vars":[0,1,2],"coef":0.4}]}}"#).unwrap();
    assert_eq!(mrf.dim(), 3);
    assert_eq!(Model::from_json(&mrf.to_json()).unwrap(), mrf);

    assert!(Model::from_json(r#"{"type":"mrf","t":2,"h":{"p":3,"terms":[{"vars":[0,1,2],"coef":0.4}]}}"#).is_err());
    assert!(Model::from_json(r#"{"type":"ising","p":2,"A":[[0,1],[0,0]],"theta":[0,0]}"#).is_err());
}

#[test]
fn dependency_edges() {
    let h = MultilinearPolynomial::from_terms(4, [(m(&[0, 1, 2]), 0.4), (m(&[3]), 0.1)]).unwrap();
    let mrf = Model::from(BinaryMRF::new(3, h).unwrap());
    assert_eq!(mrf.edges(), vec![(0, 1), (0, 2), (1, 2)]);
}
