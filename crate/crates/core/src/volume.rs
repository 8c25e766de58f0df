//! In-memory volumes: a dense 3D grid plus the voxel-to-world affine.

use crate::error::{Error, Result};
use crate::geometry::AffineTransform;
use serde::{Deserialize, Serialize};

/// Grid geometry shared by intensity and label volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    /// Voxel size in mm.
    pub spacing: [f64; 3],
    /// Voxel index to world (mm) transform.
    pub affine: AffineTransform<f64>,
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: AffineTransform<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidHeader(format!("zero dimension in {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidHeader(format!("non-positive spacing {spacing:?}")));
        }
        affine.inverse()?;
        Ok(Self { dims, spacing, affine })
    }

    /// Axis-aligned grid with `spacing` and voxel (0,0,0) at `origin`.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let affine = AffineTransform::from_scale_translation(spacing, origin);
        Self::new(dims, spacing, affine)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Same dims, spacing within 1e-6 mm and affine within 1e-6.
    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-6)
            && self.affine.approx_eq(&other.affine, 1e-6)
    }

    pub fn ensure_matches(&self, other: &Geometry) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "dims {:?} vs {:?}, spacing {:?} vs {:?}",
                self.dims, other.dims, self.spacing, other.spacing
            )))
        }
    }
}

/// Scalar volume (PET or MRI-derived). Values are stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeImage {
    geometry: Geometry,
    data: Vec<f32>,
}

impl VolumeImage {
    pub fn new(geometry: Geometry, data: Vec<f32>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidHeader(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: f32) -> Self {
        let data = vec![value; geometry.len()];
        Self { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.geometry.index(x, y, z)]
    }

    /// Multiply every voxel by `k`.
    pub fn scaled(&self, k: f32) -> Self {
        Self {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }
}

/// Integer label segmentation; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: Geometry,
    data: Vec<u32>,
}

impl LabelVolume {
    pub fn new(geometry: Geometry, data: Vec<u32>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::InvalidHeader(format!(
                "label data length {} does not match dims {:?}",
                data.len(),
                geometry.dims
            )));
        }
        Ok(Self { geometry, data })
    }

    /// Convert an intensity volume whose values are non-negative integers.
    pub fn from_image(image: VolumeImage) -> Result<Self> {
        let VolumeImage { geometry, data } = image;
        let labels = data
            .into_iter()
            .map(|v| {
                if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f32 {
                    Ok(v as u32)
                } else {
                    Err(Error::NonIntegerLabel(v as f64))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { geometry, data: labels })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Distinct non-zero labels, ascending.
    /// Voxel count of every non-zero label.
    pub fn voxel_counts(&self) -> std::collections::BTreeMap<u32, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for &l in self.data.iter().filter(|&&l| l != 0) {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn labels_present(&self) -> Vec<u32> {
        let mut seen = std::collections::BTreeSet::new();
        seen.extend(self.data.iter().copied().filter(|&l| l != 0));
        seen.into_iter().collect()
    }
}
