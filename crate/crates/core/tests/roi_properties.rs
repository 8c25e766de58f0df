use atnquant::roi::{roi_stats, suvr, LabelStatistics};
use atnquant::volume::{Geometry, LabelVolume, VolumeImage};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn volume() -> impl Strategy<Value = (VolumeImage, LabelVolume)> {
    (prop::array::uniform3(2usize..9), 0u64..1000).prop_flat_map(|(dims, _)| {
        let n: usize = dims.iter().product();
        (prop::collection::vec(0.1f32..10.0, n), prop::collection::vec(0u32..6, n)).prop_map(move |(v, l)| {
            let g = Geometry::axis_aligned(dims, [1.0, 1.5, 2.0], [0.0; 3]).unwrap();
            (VolumeImage::new(g.clone(), v).unwrap(), LabelVolume::new(g, l).unwrap())
        })
    })
}

fn brute(vol: &VolumeImage, labels: &LabelVolume, set: &BTreeSet<u32>) -> Option<(usize, f64, f64)> {
    let xs: Vec<f64> = vol
        .data()
        .iter()
        .zip(labels.data())
        .filter(|(_, l)| set.contains(l))
        .map(|(&v, _)| v as f64)
        .collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some((xs.len(), m, sd))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force((vol, labels) in volume(), set in prop::collection::btree_set(0u32..6, 1..4)) {
        match (roi_stats(&vol, &labels, &set), brute(&vol, &labels, &set)) {
            (Ok(s), Some((n, m, sd))) => {
                prop_assert_eq!(s.voxel_count, n);
                prop_assert!((s.mean - m).abs() < 1e-9);
                prop_assert!((s.sd - sd).abs() < 1e-9);
                prop_assert!((s.volume_mm3 - 3.0 * n as f64).abs() < 1e-9);
            }
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "library {:?} vs oracle {:?}", a, b),
        }
    }

    #[test]
    fn union_combines_parts((vol, labels) in volume()) {
        let a: BTreeSet<u32> = [1, 2].into();
        let b: BTreeSet<u32> = [3].into();
        let u: BTreeSet<u32> = [1, 2, 3].into();
        let stats = LabelStatistics::compute(&vol, &labels, None).unwrap();
        if let (Ok(sa), Ok(sb)) = (stats.region(&a), stats.region(&b)) {
            let su = stats.region(&u).unwrap();
            let n = (sa.voxel_count + sb.voxel_count) as f64;
            let combined = (sa.mean * sa.voxel_count as f64 + sb.mean * sb.voxel_count as f64) / n;
            prop_assert_eq!(su.voxel_count, sa.voxel_count + sb.voxel_count);
            prop_assert!((su.mean - combined).abs() < 1e-9);
        }
    }

    #[test]
    fn ratios_survive_global_scaling((vol, labels) in volume(), k in 0.01f32..100.0) {
        let (t, r): (BTreeSet<u32>, BTreeSet<u32>) = ([1, 4].into(), [2].into());
        if let Ok(s) = suvr(&vol, &labels, &t, &r) {
            let scaled = suvr(&vol.scaled(k), &labels, &t, &r).unwrap();
            prop_assert!((scaled - s).abs() <= 1e-6 * s.abs().max(1.0));
        }
    }

    #[test]
    fn reference_against_itself_is_one((vol, labels) in volume()) {
        let r: BTreeSet<u32> = [2, 3].into();
        if let Ok(s) = suvr(&vol, &labels, &r, &r) {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
