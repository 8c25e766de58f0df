#![allow(dead_code)]

pub mod oracle;

use atnquant::data::DataDir;
use atnquant::nifti::{write_image_file, write_labels_file};
use atnquant::phantom::{make_phantom, Phantom, PhantomSpec};
use atnquant::volume::VolumeImage;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub const TARGET_UPTAKE: f64 = 1.8;
pub const REFERENCE_UPTAKE: f64 = 0.9;

/// Every label used by the shipped masks and the HAVAs structures, plus a
/// few unrelated ones.
pub fn atlas_labels() -> Vec<u32> {
    let masks = DataDir::embedded().masks().unwrap();
    let mut all: BTreeSet<u32> = BTreeSet::new();
    for m in [&masks.centiloid, &masks.centaur] {
        all.extend(&m.target_labels);
        all.extend(&m.reference_labels);
    }
    all.extend([47, 48, 49, 50, 35, 4, 44, 45]);
    all.into_iter().collect()
}

/// Amyloid-like uptake: Centiloid target at 1.8, whole-cerebellum reference
/// at 0.9, everything else at 1.2.
pub fn amyloid_uptake(label: u32) -> f64 {
    let masks = DataDir::embedded().masks().unwrap();
    if masks.centiloid.target_labels.contains(&label) {
        TARGET_UPTAKE
    } else if masks.centiloid.reference_labels.contains(&label) {
        REFERENCE_UPTAKE
    } else {
        1.2
    }
}

/// Tau-like uptake: meta-temporal target at 1.5, cerebellar GM reference at 1.0.
pub fn tau_uptake(label: u32) -> f64 {
    let masks = DataDir::embedded().masks().unwrap();
    if masks.centaur.target_labels.contains(&label) {
        1.5
    } else if masks.centaur.reference_labels.contains(&label) {
        1.0
    } else {
        1.1
    }
}

/// Tiled atlas phantom with cubes of side `block`, shifted away from the
/// grid corner by `margin` voxels. Spacing is 2 mm with the grid centred on
/// the world origin.
pub fn atlas_spec(
    dims: [usize; 3],
    block: usize,
    margin: usize,
    uptake: impl Fn(u32) -> f64,
    noise_sd: f64,
    seed: u64,
) -> PhantomSpec {
    let origin = dims.map(|d| -(d as f64));
    atlas_spec_on(dims, [2.0; 3], origin, block, margin, uptake, noise_sd, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn atlas_spec_on(
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    block: usize,
    margin: usize,
    uptake: impl Fn(u32) -> f64,
    noise_sd: f64,
    seed: u64,
) -> PhantomSpec {
    let entries: Vec<(u32, f64, f64)> = atlas_labels().into_iter().map(|l| (l, uptake(l), noise_sd)).collect();
    let inner = dims.map(|d| d - 2 * margin);
    let mut spec = PhantomSpec::tiled(inner, spacing, origin, block, &entries, 0.0, seed).unwrap();
    spec.dims = dims;
    for b in &mut spec.blocks {
        b.min = b.min.map(|v| v + margin);
        b.max = b.max.map(|v| v + margin);
    }
    spec.validate().unwrap();
    spec
}

/// Copy of `image` whose voxel (x, y, z) lands at (x + s₀, y + s₁, z + s₂).
/// Voxels shifted past the far edge are dropped and the gap is zero.
pub fn shifted(image: &VolumeImage, shift: [usize; 3]) -> VolumeImage {
    let g = image.geometry().clone();
    let [nx, ny, nz] = g.dims;
    let mut out = vec![0f32; g.len()];
    for z in 0..nz - shift[2] {
        for y in 0..ny - shift[1] {
            for x in 0..nx - shift[0] {
                out[g.index(x + shift[0], y + shift[1], z + shift[2])] = image.get(x, y, z);
            }
        }
    }
    VolumeImage::new(g, out).unwrap()
}

pub fn small_atlas(uptake: impl Fn(u32) -> f64) -> Phantom {
    make_phantom(&atlas_spec([40, 36, 28], 4, 2, uptake, 0.0, 1)).unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub amyloid: PathBuf,
    pub tau: PathBuf,
    pub labels: PathBuf,
}

pub fn write_fixture(amyloid: &Phantom, tau: &Phantom) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let fx = Fixture {
        amyloid: dir.path().join("amyloid.nii.gz"),
        tau: dir.path().join("tau.nii"),
        labels: dir.path().join("labels.nii.gz"),
        dir,
    };
    write_image_file(&fx.amyloid, &amyloid.image).unwrap();
    write_image_file(&fx.tau, &tau.image).unwrap();
    write_labels_file(&fx.labels, &amyloid.labels).unwrap();
    fx
}

/// All files under `root` as (relative path, bytes), sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
