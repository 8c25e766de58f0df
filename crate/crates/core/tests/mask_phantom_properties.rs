use atnquant::data::DataDir;
use atnquant::maskderive::{derive_mask, rank_structures, GroupSuvrTable, RankedStructure};
use atnquant::phantom::{make_phantom, PhantomBlock, PhantomSpec};
use atnquant::roi::roi_stats;
use atnquant::Error;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn ranking() -> impl Strategy<Value = Vec<RankedStructure<f64>>> {
    let labels: Vec<u32> = DataDir::embedded()
        .regions()
        .unwrap()
        .regions
        .iter()
        .flat_map(|r| r.labels.iter().copied())
        .collect();
    prop::collection::vec(-2.0f64..9.0, labels.len()).prop_map(move |ds| {
        labels
            .iter()
            .zip(ds)
            .map(|(&label, d)| RankedStructure { label, name: None, d: Some(d) })
            .collect()
    })
}

fn mask_at(r: &[RankedStructure<f64>], t: f64) -> BTreeSet<u32> {
    let partners = DataDir::embedded().regions().unwrap().partner_map();
    match derive_mask(r, t, &partners) {
        Ok(m) => m.labels,
        Err(Error::EmptySelection) => BTreeSet::new(),
        Err(e) => panic!("{e}"),
    }
}

fn blocks() -> impl Strategy<Value = PhantomSpec> {
    (prop::collection::vec((0.0f64..5.0, 0.0f64..0.5, 1usize..4), 1..8), any::<u64>(), 0.0f64..2.0).prop_map(
        |(defs, seed, background)| {
            let blocks = defs
                .iter()
                .enumerate()
                .map(|(i, &(uptake, noise_sd, w))| PhantomBlock {
                    label: i as u32 + 1,
                    uptake,
                    noise_sd,
                    min: [4 * i, 0, 1],
                    max: [4 * i + w, 3, 4],
                })
                .collect();
            PhantomSpec { dims: [32, 4, 5], spacing: [1.0; 3], origin: [0.0; 3], background, seed, blocks }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_are_hemisphere_symmetric(r in ranking(), t in 0.0f64..8.0) {
        let partners = DataDir::embedded().regions().unwrap().partner_map();
        let m = mask_at(&r, t);
        for l in &m {
            prop_assert!(m.contains(&partners[l]));
        }
    }

    #[test]
    fn higher_thresholds_give_subsets(r in ranking(), t1 in 0.0f64..8.0, dt in 0.0f64..4.0) {
        let lo = mask_at(&r, t1);
        let hi = mask_at(&r, t1 + dt);
        prop_assert!(hi.is_subset(&lo));
    }

    #[test]
    fn ranking_matches_per_column_d(
        a in prop::collection::vec(prop::collection::vec(0.5f64..2.5, 4), 3..10),
        b in prop::collection::vec(prop::collection::vec(0.5f64..2.5, 4), 3..10),
    ) {
        let labels = vec![100, 101, 132, 133];
        let names = |n: usize| (0..n).map(|i| format!("s{i}")).collect::<Vec<_>>();
        let ga = GroupSuvrTable::new(labels.clone(), names(a.len()), a.clone()).unwrap();
        let gb = GroupSuvrTable::new(labels.clone(), names(b.len()), b.clone()).unwrap();
        let ranked = rank_structures(&ga, &gb).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| { let m = mean(v); v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 };
        for (j, &label) in labels.iter().enumerate() {
            let ca: Vec<f64> = a.iter().map(|r| r[j]).collect();
            let cb: Vec<f64> = b.iter().map(|r| r[j]).collect();
            let (na, nb) = (ca.len() as f64, cb.len() as f64);
            let pooled = (((na - 1.0) * var(&ca) + (nb - 1.0) * var(&cb)) / (na + nb - 2.0)).sqrt();
            let d = (mean(&cb) - mean(&ca)) / pooled;
            let got = ranked.iter().find(|s| s.label == label).unwrap().d.unwrap();
            prop_assert!((got - d).abs() < 1e-9);
        }
        for w in ranked.windows(2) {
            prop_assert!(w[0].d.unwrap() > w[1].d.unwrap() || (w[0].d == w[1].d && w[0].label < w[1].label));
        }
    }

    #[test]
    fn ground_truth_matches_region_means(spec in blocks()) {
        let p = make_phantom(&spec).unwrap();
        for row in &p.ground_truth {
            let s = roi_stats(&p.image, &p.labels, &[row.label].into()).unwrap();
            prop_assert_eq!(s.voxel_count, row.voxels);
            prop_assert!((s.mean - row.realized_mean).abs() < 1e-6);
        }
        let again = make_phantom(&spec).unwrap();
        prop_assert!(p.image.data().iter().zip(again.image.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
