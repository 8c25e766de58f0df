#![allow(clippy::needless_range_loop)]

use atnquant::geometry::{compose, resample_trilinear, AffineTransform};
use atnquant::volume::{Geometry, VolumeImage};
use proptest::prelude::*;

fn transform() -> impl Strategy<Value = AffineTransform<f64>> {
    (-0.4f64..0.4, prop::array::uniform3(-3.0f64..3.0)).prop_map(|(a, t)| AffineTransform::rotation_z(a, t))
}

fn source() -> impl Strategy<Value = VolumeImage> {
    (prop::array::uniform3(2usize..7), prop::array::uniform3(0.8f64..2.5)).prop_flat_map(|(dims, spacing)| {
        let n: usize = dims.iter().product();
        prop::collection::vec(0.0f32..5.0, n).prop_map(move |data| {
            let g = Geometry::axis_aligned(dims, spacing, [-4.0, -3.0, -2.0]).unwrap();
            VolumeImage::new(g, data).unwrap()
        })
    })
}

fn target() -> impl Strategy<Value = Geometry> {
    (prop::array::uniform3(2usize..6), prop::array::uniform3(0.7f64..2.0))
        .prop_map(|(dims, spacing)| Geometry::axis_aligned(dims, spacing, [-3.5, -2.5, -1.5]).unwrap())
}

/// Source voxel coordinates of every target voxel, via an explicit product.
fn source_coords(src: &Geometry, xfm: &AffineTransform<f64>, tgt: &Geometry) -> Vec<[f64; 3]> {
    let m = src.affine.inverse().unwrap().then_after(&xfm.inverse().unwrap()).then_after(&tgt.affine);
    let [tx, ty, tz] = tgt.dims;
    let mut out = Vec::with_capacity(tgt.len());
    for k in 0..tz {
        for j in 0..ty {
            for i in 0..tx {
                out.push(m.apply([i as f64, j as f64, k as f64]));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_overshoot(src in source(), xfm in transform(), tgt in target()) {
        let r = resample_trilinear(&src, &xfm, &tgt).unwrap();
        let g = src.geometry();
        for (idx, p) in source_coords(g, &xfm, &tgt).into_iter().enumerate() {
            if r.out_of_field[idx] {
                prop_assert_eq!(r.image.data()[idx], 0.0);
                continue;
            }
            let lo = p.map(|c| c.floor().max(0.0) as usize);
            let mut min = f32::INFINITY;
            let mut max = f32::NEG_INFINITY;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let x = (lo[0] + dx).min(g.dims[0] - 1);
                        let y = (lo[1] + dy).min(g.dims[1] - 1);
                        let z = (lo[2] + dz).min(g.dims[2] - 1);
                        let v = src.get(x, y, z);
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
            }
            let v = r.image.data()[idx];
            prop_assert!(v >= min - 1e-5 && v <= max + 1e-5, "{} outside [{}, {}]", v, min, max);
        }
    }

    #[test]
    fn resampling_is_linear(
        (u, v) in source().prop_flat_map(|u| {
            let g = u.geometry().clone();
            let n = g.len();
            (Just(u), prop::collection::vec(0.0f32..5.0, n).prop_map(move |d| VolumeImage::new(g.clone(), d).unwrap()))
        }),
        alpha in -2.0f32..2.0,
        beta in -2.0f32..2.0,
        xfm in transform(),
        tgt in target(),
    ) {
        let combo: Vec<f32> = u.data().iter().zip(v.data()).map(|(a, b)| alpha * a + beta * b).collect();
        let combo = VolumeImage::new(u.geometry().clone(), combo).unwrap();
        let rc = resample_trilinear(&combo, &xfm, &tgt).unwrap();
        let ru = resample_trilinear(&u, &xfm, &tgt).unwrap();
        let rv = resample_trilinear(&v, &xfm, &tgt).unwrap();
        for i in 0..tgt.len() {
            let want = alpha * ru.image.data()[i] + beta * rv.image.data()[i];
            prop_assert!((rc.image.data()[i] - want).abs() < 1e-5);
        }
    }

    #[test]
    fn one_pass_through_composed_map(src in source(), a in transform(), b in transform(), tgt in target()) {
        let composed = compose(&a, &b).unwrap();
        let mut rows = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rows[i][j] = (0..4).map(|k| a.rows()[i][k] * b.rows()[k][j]).sum();
            }
        }
        let product = AffineTransform::from_rows(rows).unwrap();
        prop_assert!(composed.approx_eq(&product, 1e-12));
        let once = resample_trilinear(&src, &composed, &tgt).unwrap();
        let explicit = resample_trilinear(&src, &product, &tgt).unwrap();
        for i in 0..tgt.len() {
            prop_assert!((once.image.data()[i] - explicit.image.data()[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn inverse_round_trips(t in transform(), p in prop::array::uniform3(-50.0f64..50.0)) {
        let q = t.inverse().unwrap().apply(t.apply(p));
        for i in 0..3 {
            prop_assert!((q[i] - p[i]).abs() < 1e-9);
        }
    }
}
