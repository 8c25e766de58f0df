//! Affine transforms and single-pass trilinear resampling.
//!
//! Registration is not estimated here. Transforms arrive as 4x4 world (mm)
//! matrices and are composed before any voxel is touched, so a volume is
//! interpolated exactly once no matter how many transforms are chained.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::volume::{Geometry, VolumeImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Determinant magnitude below which a transform is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Homogeneous 4x4 affine matrix, row-major. The last row is `(0, 0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform<T> {
    rows: [[T; 4]; 4],
}

impl<T: Real> AffineTransform<T> {
    pub fn identity() -> Self {
        let mut rows = [[T::zero(); 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self { rows }
    }

    /// Rejects matrices whose last row is not `(0, 0, 0, 1)` or that contain
    /// non-finite entries.
    pub fn from_rows(rows: [[T; 4]; 4]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let last = rows[3];
        if last != [T::zero(), T::zero(), T::zero(), T::one()] {
            return Err(Error::InvalidTransform(format!(
                "last row must be (0, 0, 0, 1), got {last:?}"
            )));
        }
        Ok(Self { rows })
    }

    pub fn translation(t: [T; 3]) -> Self {
        let mut a = Self::identity();
        for (i, &v) in t.iter().enumerate() {
            a.rows[i][3] = v;
        }
        a
    }

    pub fn from_scale_translation(scale: [T; 3], t: [T; 3]) -> Self {
        let mut a = Self::translation(t);
        for (i, &s) in scale.iter().enumerate() {
            a.rows[i][i] = s;
        }
        a
    }

    /// Rotation about the z axis by `radians`, followed by translation `t`.
    pub fn rotation_z(radians: T, t: [T; 3]) -> Self {
        let (s, c) = radians.sin_cos();
        let mut a = Self::translation(t);
        a.rows[0][0] = c;
        a.rows[0][1] = -s;
        a.rows[1][0] = s;
        a.rows[1][1] = c;
        a
    }

    pub fn rows(&self) -> &[[T; 4]; 4] {
        &self.rows
    }

    pub fn determinant(&self) -> T {
        // Last row is (0,0,0,1), so the determinant is that of the linear block.
        let m = &self.rows;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs().as_f64() > SINGULAR_DET
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs().as_f64() <= SINGULAR_DET {
            return Err(Error::SingularTransform(det.abs().as_f64()));
        }
        let m = &self.rows;
        let mut inv = Self::identity();
        // Adjugate of the 3x3 linear part.
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let lin = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                inv.rows[i][j] = lin[i][j] / det;
            }
        }
        for i in 0..3 {
            inv.rows[i][3] = -(0..3).map(|j| inv.rows[i][j] * m[j][3]).sum::<T>();
        }
        Ok(inv)
    }

    /// Matrix product `self * other`: applies `other` first, then `self`.
    pub fn then_after(&self, other: &Self) -> Self {
        let mut out = [[T::zero(); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.rows[i][k] * other.rows[k][j]).sum();
            }
        }
        Self { rows: out }
    }

    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let m = &self.rows;
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3];
        }
        out
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .all(|(a, b)| (*a - *b).abs().as_f64() <= tol)
    }

    pub fn cast<U: Real>(&self) -> AffineTransform<U> {
        let mut rows = [[U::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rows[i][j] = U::lit(self.rows[i][j].as_f64());
            }
        }
        AffineTransform { rows }
    }

    /// Parse 4 lines of 4 whitespace-separated reals. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut rows = Vec::with_capacity(4);
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::InvalidTransform(format!("not a number: {tok:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 4 {
                return Err(Error::InvalidTransform(format!(
                    "expected 4 values per row, got {}",
                    vals.len()
                )));
            }
            rows.push([vals[0], vals[1], vals[2], vals[3]]);
        }
        if rows.len() != 4 {
            return Err(Error::InvalidTransform(format!("expected 4 rows, got {}", rows.len())));
        }
        Self::from_rows([rows[0], rows[1], rows[2], rows[3]])
    }

    pub fn to_text(&self) -> String {
        self.rows
            .iter()
            .map(|r| format!("{} {} {} {}\n", r[0], r[1], r[2], r[3]))
            .collect()
    }
}

impl AffineTransform<f64> {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::parse_text(&text).map_err(|e| e.in_file(path))
    }
}

/// `a` applied after `b` (the product `a * b`). Both must be invertible.
pub fn compose<T: Real>(a: &AffineTransform<T>, b: &AffineTransform<T>) -> Result<AffineTransform<T>> {
    for t in [a, b] {
        if !t.is_invertible() {
            return Err(Error::SingularTransform(t.determinant().abs().as_f64()));
        }
    }
    Ok(a.then_after(b))
}

/// The 1 mm MNI template grid used for all quantification.
pub struct MniGrid;

impl MniGrid {
    pub const DIMS: [usize; 3] = [181, 217, 181];
    pub const SPACING: [f64; 3] = [1.0, 1.0, 1.0];
    /// World position (mm) of voxel (0, 0, 0).
    pub const ORIGIN: [f64; 3] = [-90.0, -126.0, -72.0];

    pub fn geometry() -> Geometry {
        Geometry::axis_aligned(Self::DIMS, Self::SPACING, Self::ORIGIN)
            .expect("MNI grid constants are valid")
    }
}

/// Output of [`resample_trilinear`].
#[derive(Debug, Clone)]
pub struct Resampled {
    pub image: VolumeImage,
    /// `true` where the target voxel mapped outside the source field of view.
    pub out_of_field: Vec<bool>,
    pub out_of_field_fraction: f64,
}

const EDGE_TOL: f64 = 1e-6;
const SNAP_TOL: f64 = 1e-9;

/// Per-axis lower index and weight of the upper neighbour, or `None` when the
/// coordinate falls outside `[0, n - 1]`.
#[inline]
fn axis_weights(c: f64, n: usize) -> Option<(usize, f64)> {
    let hi = (n - 1) as f64;
    if !(c >= -EDGE_TOL && c <= hi + EDGE_TOL) {
        return None;
    }
    let c = c.clamp(0.0, hi);
    let mut i0 = c.floor();
    let mut t = c - i0;
    if t < SNAP_TOL {
        t = 0.0;
    } else if 1.0 - t < SNAP_TOL {
        i0 += 1.0;
        t = 0.0;
    }
    let i0 = (i0 as usize).min(n - 1);
    Some((i0, t))
}

/// Resample `src` onto `target` through `world_transform`, which maps source
/// world coordinates to target world coordinates (e.g. native PET to MNI).
///
/// Sampling points are voxel centres. The source-voxel lookup matrix is built
/// once from the three affines, so the data is interpolated exactly once.
/// Target voxels that land outside the source grid get 0 and are flagged.
pub fn resample_trilinear(
    src: &VolumeImage,
    world_transform: &AffineTransform<f64>,
    target: &Geometry,
) -> Result<Resampled> {
    let src_geom = src.geometry();
    let lookup = src_geom
        .affine
        .inverse()?
        .then_after(&world_transform.inverse()?)
        .then_after(&target.affine);

    let [sx, sy, sz] = src_geom.dims;
    let [tx, ty, _] = target.dims;
    let src_data = src.data();
    let slice = tx * ty;

    let mut data = vec![0f32; target.len()];
    let mut oof = vec![false; target.len()];
    data.par_chunks_mut(slice)
        .zip(oof.par_chunks_mut(slice))
        .enumerate()
        .for_each(|(k, (out, flags))| {
            for j in 0..ty {
                for i in 0..tx {
                    let p = lookup.apply([i as f64, j as f64, k as f64]);
                    let idx = i + tx * j;
                    let (Some((x0, wx)), Some((y0, wy)), Some((z0, wz))) =
                        (axis_weights(p[0], sx), axis_weights(p[1], sy), axis_weights(p[2], sz))
                    else {
                        flags[idx] = true;
                        continue;
                    };
                    let mut acc = 0f64;
                    for (dz, fz) in [(0, 1.0 - wz), (1, wz)] {
                        if fz == 0.0 {
                            continue;
                        }
                        let z = (z0 + dz).min(sz - 1);
                        for (dy, fy) in [(0, 1.0 - wy), (1, wy)] {
                            if fy == 0.0 {
                                continue;
                            }
                            let y = (y0 + dy).min(sy - 1);
                            for (dx, fx) in [(0, 1.0 - wx), (1, wx)] {
                                if fx == 0.0 {
                                    continue;
                                }
                                let x = (x0 + dx).min(sx - 1);
                                acc += fx * fy * fz * src_data[x + sx * (y + sy * z)] as f64;
                            }
                        }
                    }
                    out[idx] = acc as f32;
                }
            }
        });

    let n_oof = oof.iter().filter(|&&f| f).count();
    let out_of_field_fraction = n_oof as f64 / oof.len() as f64;
    Ok(Resampled {
        image: VolumeImage::new(target.clone(), data)?,
        out_of_field: oof,
        out_of_field_fraction,
    })
}
