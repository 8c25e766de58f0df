use atnquant::scales::{check_centiloid_criteria, fit_level1, Registry};
use atnquant::staging::{
    amyloid_status, neurodegeneration_status, tau_status, AmyloidScheme, AmyloidStatus, HavasModel,
};
use atnquant::stats::linear_fit;
use proptest::prelude::*;
use std::collections::BTreeMap;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_line_is_increasing_and_invertible(suvr in 0.2f64..4.0, delta in 1e-3f64..1.0) {
        let reg = Registry::<f64>::builtin();
        for line in &reg.lines {
            prop_assert!(line.apply(suvr + delta) > line.apply(suvr));
            prop_assert!((line.invert(line.apply(suvr)) - suvr).abs() < 1e-9);
            let (a, b) = line.inverse();
            prop_assert!((a * line.apply(suvr) + b - suvr).abs() < 1e-9);
        }
    }

    #[test]
    fn level1_hits_both_anchors(
        ycn in prop::collection::vec(0.8f64..1.2, 1..20),
        ad in prop::collection::vec(1.5f64..2.5, 1..20),
    ) {
        let (anchors, line) = fit_level1(&ycn, &ad).unwrap();
        prop_assert!(line.apply(anchors.mean_ycn_suvr).abs() < 1e-9);
        prop_assert!((line.apply(anchors.mean_ad_suvr) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn adding_points_on_the_fit_keeps_a_pass(
        published in prop::collection::vec(-20.0f64..150.0, 5..30),
        noise in prop::collection::vec(-2.0f64..2.0, 30),
        extra in prop::collection::vec(-20.0f64..150.0, 1..10),
    ) {
        let replicated: Vec<f64> = published.iter().zip(&noise).map(|(p, e)| p + e).collect();
        let report = check_centiloid_criteria(&replicated, &published);
        prop_assume!(report.as_ref().is_ok_and(|r| r.pass));
        let fit = linear_fit(&published, &replicated).unwrap();
        let mut p2 = published.clone();
        let mut r2 = replicated.clone();
        for x in extra {
            p2.push(x);
            r2.push(fit.predict(x));
        }
        prop_assert!(check_centiloid_criteria(&r2, &p2).unwrap().pass);
    }

    #[test]
    fn raising_a_value_never_lowers_its_status(a in -50.0f64..150.0, b in -50.0f64..150.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for scheme in [AmyloidScheme::Amypad, AmyloidScheme::Binary] {
            prop_assert!(amyloid_status(lo, scheme).unwrap() <= amyloid_status(hi, scheme).unwrap());
        }
        prop_assert!(tau_status(lo / 10.0).unwrap() <= tau_status(hi / 10.0).unwrap());
        let (pl, ph) = ((lo + 50.0) / 200.0, (hi + 50.0) / 200.0);
        prop_assert!(neurodegeneration_status(pl).unwrap() <= neurodegeneration_status(ph).unwrap());
    }

    #[test]
    fn schemes_agree_outside_the_grey_zone(cl in prop_oneof![-50.0f64..10.0, 30.0f64..200.0]) {
        let ternary = amyloid_status(cl, AmyloidScheme::Amypad).unwrap();
        let binary = amyloid_status(cl, AmyloidScheme::Binary).unwrap();
        let collapsed = match ternary {
            AmyloidStatus::Intermediate if cl >= 24.1 => AmyloidStatus::Positive,
            AmyloidStatus::Intermediate => AmyloidStatus::Negative,
            s => s,
        };
        prop_assert_eq!(collapsed, binary);
    }

    #[test]
    fn havas_follows_model_orientation(
        age in 20.0f64..100.0,
        hippo in 0.1f64..0.5,
        amyg in 0.05f64..0.2,
        ilv in 0.01f64..0.1,
        bump in 1e-3f64..0.1,
    ) {
        let m = HavasModel::<f64>::demo();
        let vols = |h: f64, v: f64| -> BTreeMap<String, f64> {
            [("hippocampus".to_string(), h), ("amygdala".to_string(), amyg), ("inferior_lateral_ventricle".to_string(), v)].into()
        };
        let p = atnquant::staging::havas_probability(&vols(hippo, ilv), age, &m).unwrap();
        let bigger_hippo = atnquant::staging::havas_probability(&vols(hippo + bump, ilv), age, &m).unwrap();
        let bigger_ventricle = atnquant::staging::havas_probability(&vols(hippo, ilv + bump), age, &m).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(bigger_hippo <= p);
        prop_assert!(bigger_ventricle >= p);
    }
}
