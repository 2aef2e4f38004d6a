mod common;

use affdim_core::decompose::decompose;
use affdim_core::linalg::{self, RationalMatrix, SubspaceCanonical};
use affdim_core::model::{NuJointPmf, SourceSpec};
use affdim_core::rational::{ratio, Rational};
use affdim_core::rid::{self, lipschitz_upper_bound, rid_linear, rid_sensitivity};
use num_traits::Zero;
use proptest::prelude::*;

fn small_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = RationalMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec((-3i64..=3, 1i64..=2), m * n).prop_map(move |v| {
            let rows = v
                .chunks(n)
                .map(|r| r.iter().map(|&(p, q)| ratio(p, q)).collect())
                .collect();
            RationalMatrix::from_rows(rows).unwrap()
        })
    })
}

fn seeded_instance(max_n: usize, max_m: usize) -> impl Strategy<Value = (SourceSpec, RationalMatrix)> {
    (any::<u64>(), 1..=max_n, 1..=max_m).prop_map(|(seed, n, m)| {
        let mut rng = common::rng(seed);
        let spec = common::random_spec(&mut rng, n);
        let a = common::random_instance_matrix(&mut rng, m, n);
        (spec, a)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_rank_matches_exact(a in small_matrix(5, 5)) {
        let exact = linalg::rank(&a);
        let svd = linalg::float_rank(&a.to_f64(), linalg::DEFAULT_FLOAT_RANK_TOL).unwrap();
        prop_assert_eq!(exact, svd);
        prop_assert_eq!(exact, linalg::float_rank_elimination(&a.to_f64(), linalg::DEFAULT_FLOAT_RANK_TOL));
    }

    #[test]
    fn spark_at_most_rank_plus_one(a in small_matrix(4, 6)) {
        prop_assert!(linalg::spark(&a).unwrap() <= linalg::rank(&a) + 1);
    }

    #[test]
    fn vandermonde_meets_spark_condition(seed in any::<u64>(), m in 1usize..=5, n in 1usize..=7) {
        let mut rng = common::rng(seed);
        let t = common::vandermonde(&common::distinct_nodes(&mut rng, n), m);
        prop_assert_eq!(linalg::spark(&t).unwrap(), linalg::rank(&t) + 1);
        prop_assert!(rid::check_spark_condition(&t).unwrap());
    }

    #[test]
    fn canonical_form_ignores_basis_choice(seed in any::<u64>(), m in 1usize..=5, k in 1usize..=4) {
        let mut rng = common::rng(seed);
        let a = common::random_matrix(&mut rng, m, k);
        // Unit upper-triangular factor: always invertible.
        let mut g = common::random_matrix(&mut rng, k, k);
        for i in 0..k {
            for j in 0..i {
                g.set(i, j, Rational::zero());
            }
            g.set(i, i, ratio(1, 1));
        }
        let ag = a.mul(&g).unwrap();
        let cols = |x: &RationalMatrix| (0..x.cols()).map(|j| x.column(j)).collect();
        prop_assert_eq!(
            SubspaceCanonical::from_vectors(m, cols(&a)),
            SubspaceCanonical::from_vectors(m, cols(&ag))
        );
    }

    #[test]
    fn orthogonal_projection_is_idempotent(seed in any::<u64>(), m in 1usize..=5, k in 0usize..=4) {
        let mut rng = common::rng(seed);
        let a = common::random_matrix(&mut rng, m, k.max(1));
        let s = SubspaceCanonical::from_vectors(m, (0..k).map(|j| a.column(j)).collect());
        let v: Vec<Rational> = (0..m).map(|_| common::small_rational(&mut rng)).collect();
        let p = linalg::project_orthogonal(&v, &s).unwrap();
        prop_assert_eq!(&linalg::project_orthogonal(&p, &s).unwrap(), &p);
        for b in s.basis() {
            let dot: Rational = b.iter().zip(&p).map(|(x, y)| x * y).sum();
            prop_assert!(dot.is_zero());
        }
        let proj = linalg::orthogonal_projector(&s);
        prop_assert_eq!(proj.mul_vec(&v).unwrap(), p);
    }

    #[test]
    fn rid_is_affine_and_monotone_in_each_weight(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut rng = common::rng(seed);
        let spec = common::random_independent_spec(&mut rng, n);
        let a = common::random_instance_matrix(&mut rng, m, n);
        let i = (seed % n as u64) as usize;
        let NuJointPmf::Independent { alphas } = &spec.nu_model else { unreachable!() };
        let at = |w: Rational| {
            let mut s = spec.clone();
            let mut al = alphas.clone();
            al[i] = w;
            s.nu_model = NuJointPmf::Independent { alphas: al };
            rid_linear(&s, &a).unwrap().exact().unwrap().clone()
        };
        let v0 = at(ratio(0, 1));
        let v1 = at(ratio(1, 1));
        let slope = rid_sensitivity(&spec, &a, i).unwrap();
        prop_assert_eq!(&(&v1 - &v0), &slope);
        prop_assert!(slope >= Rational::zero());
        for w in [ratio(1, 4), ratio(1, 2), ratio(3, 4)] {
            prop_assert_eq!(at(w.clone()), &v0 + &slope * w);
        }
    }

    #[test]
    fn decomposition_matches_rid((spec, a) in seeded_instance(5, 4)) {
        let d = decompose(&spec, &a).unwrap();
        let exact = rid_linear(&spec, &a).unwrap();
        prop_assert_eq!(&rid::rid_of_decomposition(&d), exact.exact().unwrap());
        prop_assert_eq!(d.total_prob(), ratio(1, 1));
        prop_assert!(d.selector_entropy_bits <= spec.joint_entropy_bits() + 1e-9);
    }

    #[test]
    fn rid_below_lipschitz_bound((spec, a) in seeded_instance(5, 4)) {
        let r = rid_linear(&spec, &a).unwrap().exact().unwrap().clone();
        prop_assert!(r <= lipschitz_upper_bound(&spec, a.rows()).unwrap());
    }

    #[test]
    fn source_json_round_trips((spec, _a) in seeded_instance(4, 1)) {
        let text = serde_json::to_string(&spec.to_json()).unwrap();
        let back = SourceSpec::from_json_str(&text).unwrap();
        prop_assert_eq!(back.nu_marginal(), spec.nu_marginal());
        prop_assert_eq!(back.support(), spec.support());
    }
}
