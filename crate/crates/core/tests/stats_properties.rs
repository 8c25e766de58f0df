mod common;

use atnquant::stats::{anova_oneway, bland_altman, cohens_d, icc, linear_fit};
use common::oracle;
use proptest::prelude::*;

fn pairs(min: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (min..40usize).prop_flat_map(|n| (prop::collection::vec(-100.0f64..100.0, n), prop::collection::vec(-100.0f64..100.0, n)))
}

fn groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..15), 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fit_agrees_with_normal_equations((x, y) in pairs(2)) {
        let fit = linear_fit(&x, &y);
        prop_assume!(fit.is_ok());
        let fit = fit.unwrap();
        let (b0, b1, r2) = oracle::ols(&x, &y);
        prop_assert!(oracle::close(fit.slope, b1, 1e-9));
        prop_assert!(oracle::close(fit.intercept, b0, 1e-9));
        prop_assert!(oracle::close(fit.r2, r2, 1e-9));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r2));
    }

    #[test]
    fn residuals_are_orthogonal_to_x((x, y) in pairs(2)) {
        if let Ok(fit) = linear_fit(&x, &y) {
            let dot: f64 = x.iter().zip(&y).map(|(&xi, &yi)| (yi - fit.predict(xi)) * xi).sum();
            let sum: f64 = x.iter().zip(&y).map(|(&xi, &yi)| yi - fit.predict(xi)).sum();
            prop_assert!(dot.abs() <= 1e-7 * x.len() as f64);
            prop_assert!(sum.abs() <= 1e-7 * x.len() as f64);
        }
    }

    #[test]
    fn cohens_d_matches_oracle_and_invariances(
        (a, b) in (prop::collection::vec(-10.0f64..10.0, 2..30), prop::collection::vec(-10.0f64..10.0, 2..30)),
        shift in -100.0f64..100.0,
        scale in 0.01f64..100.0,
    ) {
        let d = cohens_d(&a, &b).unwrap();
        prop_assert!(oracle::close(d, oracle::cohens_d(&a, &b), 1e-9));
        prop_assert!(oracle::close(cohens_d(&b, &a).unwrap(), -d, 1e-12));
        let moved = |v: &[f64]| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        prop_assert!(oracle::close(cohens_d(&moved(&a), &moved(&b)).unwrap(), d, 1e-8));
    }

    #[test]
    fn icc_matches_two_way_table((x, y) in pairs(3)) {
        let v = icc(&x, &y).unwrap();
        prop_assert!(oracle::close(v, oracle::icc21(&x, &y), 1e-9));
        prop_assert!(oracle::close(icc(&y, &x).unwrap(), v, 1e-12));
        prop_assert!(v <= 1.0 + 1e-12);
    }

    #[test]
    fn bland_altman_is_antisymmetric((x, y) in pairs(2)) {
        let ab = bland_altman(&x, &y).unwrap();
        let ba = bland_altman(&y, &x).unwrap();
        prop_assert!(ab.loa_low <= ab.loa_high);
        prop_assert!((ab.bias + ba.bias).abs() < 1e-12);
        prop_assert!((ab.loa_low + ba.loa_high).abs() < 1e-9);
        prop_assert!((ab.loa_high + ba.loa_low).abs() < 1e-9);
    }

    #[test]
    fn anova_matches_oracle_and_ignores_shifts(g in groups(), shift in -1000.0f64..1000.0) {
        let r = anova_oneway(&g).unwrap();
        let (f, p) = oracle::anova(&g);
        prop_assert!(oracle::close(r.f, f, 1e-9));
        prop_assert!((r.p - p).abs() < 1e-9);
        let shifted: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x + shift).collect()).collect();
        prop_assert!(oracle::close(anova_oneway(&shifted).unwrap().f, r.f, 1e-8));
    }

    #[test]
    fn generic_core_agrees_in_single_precision((x, y) in pairs(3)) {
        let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let yf: Vec<f32> = y.iter().map(|&v| v as f32).collect();
        let xd: Vec<f64> = xf.iter().map(|&v| v as f64).collect();
        let yd: Vec<f64> = yf.iter().map(|&v| v as f64).collect();
        if let (Ok(a), Ok(b)) = (linear_fit(&xf, &yf), linear_fit(&xd, &yd)) {
            prop_assert!(oracle::close(a.slope as f64, b.slope, 1e-2));
        }
    }
}
