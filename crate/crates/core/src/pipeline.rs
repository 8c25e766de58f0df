//! End-to-end subject quantification: align PET to the label grid, extract
//! composite and regional SUVR, convert to Centiloid and CenTauR units,
//! score neurodegeneration, stage and write the report.

use crate::data::{DataDir, MaskSet};
use crate::error::{Error, Result, ResultExt};
use crate::geometry::{resample_trilinear, AffineTransform};
use crate::nifti::{read_image, read_labels, ReadOptions};
use crate::report::{
    emit_report, read_volumes_csv, AmyloidResult, Format, NeuroResult, QcFlags, SubjectResult, TauResult, VolumeRow,
};
use crate::roi::{LabelStatistics, MaskDefinition, RegionSet, RegionalRow};
use crate::scales::{suvr_to_centaur, suvr_to_centaurz, suvr_to_centiloid, Registry, Scale, Tracer, TracerKind};
use crate::staging::{AmyloidScheme, HavasModel, StagingThresholds};
use crate::volume::LabelVolume;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subject: String,
    pub age: Option<f64>,
    pub sex: Option<String>,
    pub amyloid_pet: Option<PathBuf>,
    pub tau_pet: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub xfm_amyloid: Option<PathBuf>,
    pub xfm_tau: Option<PathBuf>,
    /// Treat PET as already in label space; resample only if the grids differ.
    pub assume_registered: bool,
    pub amyloid_tracer: Option<Tracer>,
    pub tau_tracer: Option<Tracer>,
    pub masks: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub volumes: Option<PathBuf>,
    pub havas_model: Option<PathBuf>,
    pub amyloid_scheme: AmyloidScheme,
    pub out: Option<PathBuf>,
    /// Reject non-finite voxels instead of zeroing them.
    pub strict: bool,
    /// Leave voxels that resampled from outside the PET field out of all regions.
    pub exclude_oof: bool,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require_tracer(tracer: Option<Tracer>, kind: TracerKind, flag: &str) -> Result<Tracer> {
    let t = tracer.ok_or_else(|| config_error(format!("{flag} is required with the matching PET image")))?;
    if t.kind() != kind {
        let scale = if kind == TracerKind::Amyloid { Scale::CL } else { Scale::CTRz };
        return Err(Error::ScaleMismatch {
            tracer: t.to_string(),
            scale: scale.to_string(),
        }
        .context(flag.to_string()));
    }
    Ok(t)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.amyloid_pet.is_none() && self.tau_pet.is_none() && self.volumes.is_none() {
            return Err(config_error("nothing to quantify: give a PET image or a volumes table"));
        }
        if (self.amyloid_pet.is_some() || self.tau_pet.is_some()) && self.labels.is_none() {
            return Err(config_error("--labels is required with PET input"));
        }
        if self.amyloid_pet.is_some() {
            require_tracer(self.amyloid_tracer, TracerKind::Amyloid, "--amyloid-tracer")?;
        } else if self.xfm_amyloid.is_some() {
            return Err(config_error("--xfm-amyloid given without --amyloid-pet"));
        }
        if self.tau_pet.is_some() {
            require_tracer(self.tau_tracer, TracerKind::Tau, "--tau-tracer")?;
        } else if self.xfm_tau.is_some() {
            return Err(config_error("--xfm-tau given without --tau-pet"));
        }
        if let Some(age) = self.age {
            if !age.is_finite() {
                return Err(config_error("age must be finite"));
            }
        }
        Ok(())
    }
}

/// Region list, masks, calibration lines and HAVAs model for one run.
#[derive(Debug, Clone)]
pub struct Resources {
    pub regions: RegionSet,
    pub masks: MaskSet,
    pub registry: Registry<f64>,
    pub havas: HavasModel<f64>,
}

impl Resources {
    pub fn load(config: &RunConfig, data: &DataDir) -> Result<Self> {
        Ok(Self {
            regions: match &config.regions {
                Some(p) => RegionSet::read(p)?,
                None => data.regions()?,
            },
            masks: match &config.masks {
                Some(p) => MaskSet::read(p)?,
                None => data.masks()?,
            },
            registry: match &config.registry {
                Some(p) => Registry::read(p)?,
                None => data.registry()?,
            },
            havas: match &config.havas_model {
                Some(p) => HavasModel::read(p)?,
                None => data.havas_model()?,
            },
        })
    }
}

struct ModalityStats {
    stats: LabelStatistics,
    out_of_field_fraction: Option<f64>,
    non_finite: usize,
}

fn quantify_pet(
    pet: &Path,
    xfm: Option<&Path>,
    labels: &LabelVolume,
    config: &RunConfig,
    xfm_flag: &str,
) -> Result<ModalityStats> {
    let loaded = read_image(pet, ReadOptions { strict: config.strict })?;
    let target = labels.geometry();
    let transform = match xfm {
        Some(path) => Some(AffineTransform::read(path)?),
        None if loaded.image.geometry().matches(target) => None,
        None if config.assume_registered => Some(AffineTransform::identity()),
        None => {
            return Err(Error::GeometryMismatch(format!(
                "PET grid differs from the label grid; give {xfm_flag} or --assume-registered"
            ))
            .in_file(pet))
        }
    };
    let (image, oof) = match transform {
        Some(t) => {
            let r = resample_trilinear(&loaded.image, &t, target).in_file(pet)?;
            (r.image, Some((r.out_of_field, r.out_of_field_fraction)))
        }
        None => (loaded.image, None),
    };
    let exclude = oof.as_ref().filter(|_| config.exclude_oof).map(|(mask, _)| mask.as_slice());
    Ok(ModalityStats {
        stats: LabelStatistics::compute(&image, labels, exclude).in_file(pet)?,
        out_of_field_fraction: oof.map(|(_, f)| f),
        non_finite: loaded.non_finite_replaced,
    })
}

fn composite(stats: &LabelStatistics, mask: &MaskDefinition, regions: &RegionSet) -> Result<(f64, Vec<RegionalRow>)> {
    let suvr = stats
        .suvr(&mask.target_labels, &mask.reference_labels)
        .context(format!("mask {}", mask.name))?;
    let table = stats
        .regional_table(regions, &mask.reference_labels)
        .context(format!("mask {}", mask.name))?;
    Ok((suvr, table))
}

fn empty_region_names(rows: &[RegionalRow], out: &mut BTreeSet<String>) {
    out.extend(rows.iter().filter(|r| r.empty).map(|r| r.name.clone()));
}

/// Native volumes of every non-zero label, normalized to percent of the
/// total labelled (intracranial) volume.
pub fn volumes_from_labels(labels: &LabelVolume, regions: &RegionSet) -> Vec<VolumeRow> {
    let voxel = labels.geometry().voxel_volume_mm3();
    let counts = labels.voxel_counts();
    let icv = counts.values().sum::<usize>() as f64 * voxel;
    counts
        .into_iter()
        .map(|(label, n)| {
            let volume = n as f64 * voxel;
            VolumeRow {
                label,
                name: regions
                    .name_of(label)
                    .map_or_else(|| format!("label {label}"), str::to_string),
                volume_mm3: volume,
                volume_normalized: Some(100.0 * volume / icv),
            }
        })
        .collect()
}

fn score_neurodegeneration(volumes: &[VolumeRow], age: f64, model: &HavasModel<f64>) -> Result<NeuroResult> {
    let normalized: BTreeMap<u32, f64> = volumes
        .iter()
        .filter_map(|v| v.volume_normalized.map(|n| (v.label, n)))
        .collect();
    let structures = model.structure_volumes(&normalized)?;
    let composite = model.composite(&structures)?;
    Ok(NeuroResult {
        model: model.name.clone(),
        non_clinical: model.non_clinical,
        composite,
        havas: model.probability_from_composite(composite, age)?,
    })
}

/// Quantify one subject with explicitly supplied resources.
pub fn run_quantify_with(config: &RunConfig, res: &Resources) -> Result<SubjectResult> {
    config.validate()?;
    let labels = config.labels.as_deref().map(read_labels).transpose()?;
    let mut qc = QcFlags::default();
    let mut empty = BTreeSet::new();

    let amyloid = match (&config.amyloid_pet, &labels) {
        (Some(pet), Some(labels)) => {
            let tracer = require_tracer(config.amyloid_tracer, TracerKind::Amyloid, "--amyloid-tracer")?;
            let m = quantify_pet(pet, config.xfm_amyloid.as_deref(), labels, config, "--xfm-amyloid")?;
            qc.amyloid_out_of_field_fraction = m.out_of_field_fraction;
            qc.amyloid_non_finite_voxels = m.non_finite;
            let mask = &res.masks.centiloid;
            let (suvr, regional) = composite(&m.stats, mask, &res.regions).in_file(pet)?;
            empty_region_names(&regional, &mut empty);
            Some(AmyloidResult {
                tracer,
                mask: mask.name.clone(),
                composite_suvr: suvr,
                centiloid: suvr_to_centiloid(&res.registry, tracer, suvr)?,
                regional,
            })
        }
        _ => None,
    };

    let tau = match (&config.tau_pet, &labels) {
        (Some(pet), Some(labels)) => {
            let tracer = require_tracer(config.tau_tracer, TracerKind::Tau, "--tau-tracer")?;
            let m = quantify_pet(pet, config.xfm_tau.as_deref(), labels, config, "--xfm-tau")?;
            qc.tau_out_of_field_fraction = m.out_of_field_fraction;
            qc.tau_non_finite_voxels = m.non_finite;
            let mask = &res.masks.centaur;
            let (suvr, regional) = composite(&m.stats, mask, &res.regions).in_file(pet)?;
            empty_region_names(&regional, &mut empty);
            Some(TauResult {
                tracer,
                mask: mask.name.clone(),
                composite_suvr: suvr,
                centaur: (tracer == Tracer::FTP).then(|| suvr_to_centaur(suvr)),
                centaurz: suvr_to_centaurz(&res.registry, tracer, suvr)?,
                regional,
            })
        }
        _ => None,
    };
    qc.empty_regions = empty.into_iter().collect();

    let volumes = match (&config.volumes, &labels) {
        (Some(path), _) => read_volumes_csv(path)?,
        (None, Some(labels)) => volumes_from_labels(labels, &res.regions),
        (None, None) => Vec::new(),
    };

    let neurodegeneration = match config.age {
        Some(age) if !volumes.is_empty() => {
            let n = score_neurodegeneration(&volumes, age, &res.havas).context("HAVAs")?;
            if n.non_clinical {
                qc.warnings
                    .push(format!("HAVAs model {:?} is a non-clinical demonstration model", n.model));
            }
            Some(n)
        }
        None if config.volumes.is_some() => {
            qc.warnings.push("no age given; HAVAs not computed".into());
            None
        }
        _ => None,
    };

    let result = SubjectResult::assemble(
        config.subject.clone(),
        config.age,
        config.sex.clone(),
        amyloid,
        tau,
        neurodegeneration,
        StagingThresholds::with_scheme(config.amyloid_scheme),
        volumes,
        qc,
    )?;
    if let Some(out) = &config.out {
        emit_report(&result, &Format::ALL.into(), out)?;
    }
    Ok(result)
}

/// Quantify one subject using defaults from `ATNQUANT_DATA` or the embedded
/// data for anything the config does not name.
pub fn run_quantify(config: &RunConfig) -> Result<SubjectResult> {
    let res = Resources::load(config, &DataDir::from_env()?)?;
    run_quantify_with(config, &res)
}

#[derive(Debug, Default, Deserialize)]
struct ManifestRow {
    subject: String,
    #[serde(default)]
    amyloid_pet: Option<PathBuf>,
    #[serde(default)]
    tau_pet: Option<PathBuf>,
    #[serde(default)]
    labels: Option<PathBuf>,
    #[serde(default)]
    xfm_amyloid: Option<PathBuf>,
    #[serde(default)]
    xfm_tau: Option<PathBuf>,
    #[serde(default)]
    amyloid_tracer: Option<String>,
    #[serde(default)]
    tau_tracer: Option<String>,
    #[serde(default)]
    volumes: Option<PathBuf>,
    #[serde(default)]
    age: Option<f64>,
    #[serde(default)]
    sex: Option<String>,
}

/// One config per manifest row. Columns: `subject` plus any of
/// `amyloid_pet, tau_pet, labels, xfm_amyloid, xfm_tau, amyloid_tracer,
/// tau_tracer, volumes, age, sex`; empty cells fall back to `base`. Relative
/// paths are resolved against the manifest's directory, and each subject
/// writes to `<base.out>/<subject>`.
pub fn read_manifest(path: &Path, base: &RunConfig) -> Result<Vec<RunConfig>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: Option<PathBuf>| p.filter(|p| !p.as_os_str().is_empty()).map(|p| dir.join(p));
    let parse = || -> Result<Vec<RunConfig>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut seen = BTreeSet::new();
        let mut configs = Vec::new();
        for row in rdr.deserialize::<ManifestRow>() {
            let row = row?;
            if row.subject.is_empty() || !seen.insert(row.subject.clone()) {
                return Err(config_error(format!("missing or duplicate subject {:?}", row.subject)));
            }
            let tracer = |t: Option<String>, fallback: Option<Tracer>| -> Result<Option<Tracer>> {
                match t.filter(|s| !s.is_empty()) {
                    Some(s) => Ok(Some(s.parse()?)),
                    None => Ok(fallback),
                }
            };
            let mut c = base.clone();
            c.out = base.out.as_ref().map(|o| o.join(&row.subject));
            c.amyloid_pet = resolve(row.amyloid_pet).or(c.amyloid_pet);
            c.tau_pet = resolve(row.tau_pet).or(c.tau_pet);
            c.labels = resolve(row.labels).or(c.labels);
            c.xfm_amyloid = resolve(row.xfm_amyloid).or(c.xfm_amyloid);
            c.xfm_tau = resolve(row.xfm_tau).or(c.xfm_tau);
            c.volumes = resolve(row.volumes).or(c.volumes);
            c.amyloid_tracer = tracer(row.amyloid_tracer, base.amyloid_tracer)?;
            c.tau_tracer = tracer(row.tau_tracer, base.tau_tracer)?;
            c.age = row.age.or(base.age);
            c.sex = row.sex.filter(|s| !s.is_empty()).or(base.sex.clone());
            c.subject = row.subject;
            configs.push(c);
        }
        Ok(configs)
    };
    parse().in_file(path)
}

/// Run subjects in parallel on `jobs` threads (all cores when `None`).
/// Results come back in input order.
pub fn run_batch(configs: &[RunConfig], jobs: Option<usize>) -> Result<Vec<(String, Result<SubjectResult>)>> {
    let data = DataDir::from_env()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| config_error(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let r = Resources::load(c, &data).and_then(|res| run_quantify_with(c, &res));
                (c.subject.clone(), r.map_err(|e| e.context(format!("subject {}", c.subject))))
            })
            .collect()
    }))
}

pub fn write_batch_summary(results: &[(String, Result<SubjectResult>)], path: &Path) -> Result<()> {
    let write = || -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "subject", "status", "centiloid", "amyloid", "centaurz", "tau", "havas", "neurodegeneration", "error",
        ])?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (subject, r) in results {
            match r {
                Ok(r) => {
                    let p = &r.profile;
                    w.write_record([
                        subject.clone(),
                        "ok".into(),
                        fmt(p.amyloid.map(|a| a.value)),
                        p.amyloid.map(|a| a.status.to_string()).unwrap_or_default(),
                        fmt(p.tau.map(|t| t.value)),
                        p.tau.map(|t| t.status.to_string()).unwrap_or_default(),
                        fmt(p.neuro.map(|n| n.value)),
                        p.neuro.map(|n| n.status.to_string()).unwrap_or_default(),
                        String::new(),
                    ])?;
                }
                Err(e) => {
                    let mut rec = vec![subject.clone(), "error".into()];
                    rec.extend(std::iter::repeat_n(String::new(), 6));
                    rec.push(e.to_string());
                    w.write_record(rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    };
    write().in_file(path)
}
