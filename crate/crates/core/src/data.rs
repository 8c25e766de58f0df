//! Shipped defaults: region list, composite masks, calibration registry,
//! effect-size table and the demonstration HAVAs model.
//!
//! A directory named by `ATNQUANT_DATA` overrides any of these files it
//! contains; files it lacks fall back to the embedded copies.

use crate::error::{Error, Result, ResultExt};
use crate::maskderive::{ranking_from_csv, RankedStructure};
use crate::roi::{MaskDefinition, RegionSet};
use crate::scales::Registry;
use crate::staging::HavasModel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DATA_ENV: &str = "ATNQUANT_DATA";

pub const REGIONS_FILE: &str = "regions_gm122.json";
pub const MASKS_FILE: &str = "masks.json";
pub const REGISTRY_FILE: &str = "registry.json";
pub const COHENS_D_FILE: &str = "centiloid_pib_cohens_d.csv";
pub const HAVAS_FILE: &str = "havas_demo_model.json";

const REGIONS: &str = include_str!("../data/regions_gm122.json");
const MASKS: &str = include_str!("../data/masks.json");
const REGISTRY: &str = include_str!("../data/registry.json");
const COHENS_D: &str = include_str!("../data/centiloid_pib_cohens_d.csv");
const HAVAS: &str = include_str!("../data/havas_demo_model.json");

/// The amyloid and tau composite masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    pub centiloid: MaskDefinition,
    pub centaur: MaskDefinition,
}

impl MaskSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        set.centiloid.validate()?;
        set.centaur.validate()?;
        Ok(set)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DataDir {
    root: Option<PathBuf>,
}

impl DataDir {
    pub fn embedded() -> Self {
        Self { root: None }
    }

    pub fn at(root: impl Into<PathBuf>) -> Self {
        Self { root: Some(root.into()) }
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var_os(DATA_ENV) {
            None => Ok(Self::embedded()),
            Some(dir) => {
                let dir = PathBuf::from(dir);
                if !dir.is_dir() {
                    return Err(Error::Config(format!("{DATA_ENV}={} is not a directory", dir.display())));
                }
                Ok(Self::at(dir))
            }
        }
    }

    /// Path of `file` under the override directory, if present there.
    pub fn override_path(&self, file: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(file)).filter(|p| p.is_file())
    }

    fn load<T>(&self, file: &str, embedded: &str, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        match self.override_path(file) {
            Some(path) => {
                let text = std::fs::read_to_string(&path).in_file(&path)?;
                parse(&text).in_file(&path)
            }
            None => parse(embedded).context(format!("embedded {file}")),
        }
    }

    pub fn regions(&self) -> Result<RegionSet> {
        self.load(REGIONS_FILE, REGIONS, RegionSet::from_json)
    }

    pub fn masks(&self) -> Result<MaskSet> {
        self.load(MASKS_FILE, MASKS, MaskSet::from_json)
    }

    /// Calibration lines. The embedded registry is also checked against the
    /// PiB anchors.
    pub fn registry(&self) -> Result<Registry<f64>> {
        self.load(REGISTRY_FILE, REGISTRY, |text| {
            let reg = Registry::from_json(text)?;
            if self.override_path(REGISTRY_FILE).is_none() {
                reg.verify_pib_anchors()?;
            }
            Ok(reg)
        })
    }

    pub fn cohens_d(&self) -> Result<Vec<RankedStructure<f64>>> {
        self.load(COHENS_D_FILE, COHENS_D, |text| ranking_from_csv(text.as_bytes()))
    }

    pub fn havas_model(&self) -> Result<HavasModel<f64>> {
        self.load(HAVAS_FILE, HAVAS, HavasModel::from_json)
    }
}
