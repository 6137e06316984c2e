use decolab::dyson::{dyson_vs_exact, TwoLevelModel};
use decolab::lindblad::{propagate, DephasingGenerator};
use decolab::symmetry::{build_constrained_family, check_generator_symmetry, LabelledBasis, SymmetryKind, SymmetryTransform};
use decolab::{ComplexMatrix, DensityMatrix, Tolerances, C64};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Coherences of a constrained family evolve as e^{−Γ_ki t}, including
    /// growth where CPT makes Γ_ki negative.
    #[test]
    fn constrained_family_coherences_follow_rate_matrix(seed in 0u64..10_000, cpt in any::<bool>()) {
        let basis = LabelledBasis::single(1, 1);
        let kind = if cpt { SymmetryKind::Cpt } else { SymmetryKind::Cp };
        let fam = build_constrained_family(&basis, kind, seed);
        let gen = DephasingGenerator::new(ComplexMatrix::zeros(3), fam.to_channels(), vec![]).unwrap();
        let t = SymmetryTransform::new(kind, &basis);
        prop_assert!(check_generator_symmetry(&t, &basis, &gen).unwrap().pass);

        let rho0 = DensityMatrix::maximally_mixed(3);
        let mut m = rho0.matrix().clone();
        for k in 0..3 {
            for i in 0..3 {
                if k != i {
                    m.set(k, i, C64::new(0.05, 0.0));
                }
            }
        }
        let rho0 = DensityMatrix::new(m, &Tolerances::default()).unwrap();
        let t_end = 0.5;
        let path = propagate(&gen, &rho0, t_end, 1e-3).unwrap();
        let rates = fam.rates();
        for k in 0..3 {
            for i in 0..3 {
                if k == i {
                    continue;
                }
                let expect = 0.05 * (-rates.get(k, i) * t_end).exp();
                prop_assert!((path.last().get(k, i).re - expect).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn dyson_series_error_is_third_order() {
    let residual = |g: f64| dyson_vs_exact(&TwoLevelModel::from_rates(1.0, 0.7, g), 5.0).unwrap().hierarchy_residual;
    let (a, b) = (residual(2e-2), residual(1e-2));
    // Halving g shrinks an O(g³) remainder eightfold.
    let ratio = a / b;
    assert!((6.0..10.0).contains(&ratio), "ratio {ratio}");
}
