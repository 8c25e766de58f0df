//! Synthetic PET and label volumes with known regional uptake.
//!
//! Each block is an axis-aligned box of voxels carrying one label. Voxel
//! values are `uptake + noise_sd · z` where `z` is a standard normal draw.
//!
//! Noise generation, so that fixtures can be reproduced elsewhere:
//! * the stream is ChaCha8 seeded with `seed_from_u64(seed)` (rand_core
//!   convention);
//! * blocks are visited in spec order, and within a block voxels are visited
//!   with x fastest, then y, then z;
//! * every block voxel consumes two `next_u64` outputs `a` and `b`, giving
//!   `u1 = 1 - (a >> 11) · 2⁻⁵³` and `u2 = (b >> 11) · 2⁻⁵³`, and
//!   `z = sqrt(-2 ln u1) · cos(2π u2)`;
//! * the value is computed in `f64` and stored as `f32`.
//!
//! Background voxels (label 0) hold the background uptake without noise.

use crate::error::{Error, Result, ResultExt};
use crate::volume::{Geometry, LabelVolume, VolumeImage};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomBlock {
    pub label: u32,
    pub uptake: f64,
    #[serde(default)]
    pub noise_sd: f64,
    /// Inclusive lower voxel corner.
    pub min: [usize; 3],
    /// Exclusive upper voxel corner.
    pub max: [usize; 3],
}

impl PhantomBlock {
    fn overlaps(&self, other: &PhantomBlock) -> bool {
        (0..3).all(|a| self.min[a] < other.max[a] && other.min[a] < self.max[a])
    }

    fn voxel_count(&self) -> usize {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub seed: u64,
    pub blocks: Vec<PhantomBlock>,
}

impl PhantomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::axis_aligned(self.dims, self.spacing, self.origin)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPhantom(msg));
        if self.dims.contains(&0) {
            return bad("grid dimensions must be positive".into());
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return bad("background uptake must be finite and non-negative".into());
        }
        for b in &self.blocks {
            if b.label == 0 {
                return bad("label 0 is reserved for background".into());
            }
            if !(b.uptake >= 0.0 && b.uptake.is_finite()) {
                return bad(format!("label {}: uptake must be finite and non-negative", b.label));
            }
            if !(b.noise_sd >= 0.0 && b.noise_sd.is_finite()) {
                return bad(format!("label {}: noise sd must be finite and non-negative", b.label));
            }
            for a in 0..3 {
                if b.min[a] >= b.max[a] || b.max[a] > self.dims[a] {
                    return bad(format!("label {}: block extent outside the grid or empty", b.label));
                }
            }
        }
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::OverlappingBlocks(a.label, b.label));
                }
            }
        }
        Ok(())
    }

    /// Lay out `entries` (label, uptake, noise sd) as cubes of side `block`
    /// packed from the grid corner, x fastest.
    pub fn tiled(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        block: usize,
        entries: &[(u32, f64, f64)],
        background: f64,
        seed: u64,
    ) -> Result<Self> {
        let per = dims.map(|d| d / block.max(1));
        if block == 0 || per.iter().product::<usize>() < entries.len() {
            return Err(Error::InvalidPhantom(format!(
                "{} blocks of side {block} do not fit in {dims:?}",
                entries.len()
            )));
        }
        let blocks = entries
            .iter()
            .enumerate()
            .map(|(i, &(label, uptake, noise_sd))| {
                let cell = [i % per[0], (i / per[0]) % per[1], i / (per[0] * per[1])];
                PhantomBlock {
                    label,
                    uptake,
                    noise_sd,
                    min: cell.map(|c| c * block),
                    max: cell.map(|c| (c + 1) * block),
                }
            })
            .collect();
        let spec = Self {
            dims,
            spacing,
            origin,
            background,
            seed,
            blocks,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Realized statistics of one label in a generated phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub label: u32,
    pub voxels: usize,
    pub uptake: f64,
    pub noise_sd: f64,
    pub realized_mean: f64,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: VolumeImage,
    pub labels: LabelVolume,
    pub ground_truth: Vec<GroundTruthRow>,
}

impl Phantom {
    pub fn truth(&self, label: u32) -> Option<&GroundTruthRow> {
        self.ground_truth.iter().find(|r| r.label == label)
    }
}

struct Gaussian(ChaCha8Rng);

impl Gaussian {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn sample(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let n = geometry.len();
    let mut values = vec![spec.background as f32; n];
    let mut labels = vec![0u32; n];
    let mut rng = Gaussian(ChaCha8Rng::seed_from_u64(spec.seed));
    // label -> (voxels, sum, uptake, noise_sd)
    let mut acc: BTreeMap<u32, (usize, f64, f64, f64)> = BTreeMap::new();

    for b in &spec.blocks {
        let entry = acc.entry(b.label).or_insert((0, 0.0, b.uptake, b.noise_sd));
        for z in b.min[2]..b.max[2] {
            for y in b.min[1]..b.max[1] {
                for x in b.min[0]..b.max[0] {
                    let v = (b.uptake + b.noise_sd * rng.sample()) as f32;
                    let i = geometry.index(x, y, z);
                    values[i] = v;
                    labels[i] = b.label;
                    entry.0 += 1;
                    entry.1 += f64::from(v);
                }
            }
        }
    }

    let block_voxels: usize = spec.blocks.iter().map(PhantomBlock::voxel_count).sum();
    let mut ground_truth = Vec::with_capacity(acc.len() + 1);
    if block_voxels < n {
        ground_truth.push(GroundTruthRow {
            label: 0,
            voxels: n - block_voxels,
            uptake: spec.background,
            noise_sd: 0.0,
            realized_mean: f64::from(spec.background as f32),
        });
    }
    ground_truth.extend(acc.into_iter().map(|(label, (voxels, sum, uptake, noise_sd))| GroundTruthRow {
        label,
        voxels,
        uptake,
        noise_sd,
        realized_mean: sum / voxels as f64,
    }));

    Ok(Phantom {
        image: VolumeImage::new(geometry.clone(), values)?,
        labels: LabelVolume::new(geometry, labels)?,
        ground_truth,
    })
}

pub fn write_ground_truth_csv<W: Write>(rows: &[GroundTruthRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "voxels", "uptake", "noise_sd", "realized_mean"])?;
    for r in rows {
        w.write_record([
            r.label.to_string(),
            r.voxels.to_string(),
            r.uptake.to_string(),
            r.noise_sd.to_string(),
            r.realized_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
