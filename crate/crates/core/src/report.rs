//! Subject results and their JSON, CSV and plain-text renderings.
//!
//! Every renderer is a pure function of [`SubjectResult`], so a report
//! regenerated from the same result (or from its re-read JSON) is
//! byte-identical.

use crate::error::{Error, Result, ResultExt};
use crate::roi::{write_regional_csv, RegionalRow};
use crate::scales::Tracer;
use crate::staging::{AtnProfile, StagingThresholds};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = "atnquant/1";

pub const SUMMARY_JSON: &str = "summary.json";
pub const REPORT_TXT: &str = "report.txt";
pub const REGIONAL_AMYLOID_CSV: &str = "regional_amyloid.csv";
pub const REGIONAL_TAU_CSV: &str = "regional_tau.csv";
pub const VOLUMES_CSV: &str = "volumes.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmyloidResult {
    pub tracer: Tracer,
    pub mask: String,
    pub composite_suvr: f64,
    pub centiloid: f64,
    pub regional: Vec<RegionalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tracer: Tracer,
    pub mask: String,
    pub composite_suvr: f64,
    /// Only defined for flortaucipir.
    pub centaur: Option<f64>,
    pub centaurz: f64,
    pub regional: Vec<RegionalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuroResult {
    pub model: String,
    pub non_clinical: bool,
    pub composite: f64,
    pub havas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRow {
    pub label: u32,
    pub name: String,
    pub volume_mm3: f64,
    /// Percent of intracranial volume.
    pub volume_normalized: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QcFlags {
    pub amyloid_out_of_field_fraction: Option<f64>,
    pub tau_out_of_field_fraction: Option<f64>,
    pub amyloid_non_finite_voxels: usize,
    pub tau_non_finite_voxels: usize,
    pub empty_regions: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub schema: String,
    pub subject: String,
    pub age: Option<f64>,
    pub sex: Option<String>,
    pub amyloid: Option<AmyloidResult>,
    pub tau: Option<TauResult>,
    pub neurodegeneration: Option<NeuroResult>,
    pub thresholds: StagingThresholds<f64>,
    pub profile: AtnProfile<f64>,
    pub volumes: Vec<VolumeRow>,
    pub qc: QcFlags,
}

impl SubjectResult {
    /// Result with the profile derived from the quantities already present.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        subject: impl Into<String>,
        age: Option<f64>,
        sex: Option<String>,
        amyloid: Option<AmyloidResult>,
        tau: Option<TauResult>,
        neurodegeneration: Option<NeuroResult>,
        thresholds: StagingThresholds<f64>,
        volumes: Vec<VolumeRow>,
        qc: QcFlags,
    ) -> Result<Self> {
        let profile = AtnProfile::classify(
            amyloid.as_ref().map(|a| a.centiloid),
            tau.as_ref().map(|t| t.centaurz),
            neurodegeneration.as_ref().map(|n| n.havas),
            &thresholds,
        )?;
        Ok(Self {
            schema: SCHEMA.to_string(),
            subject: subject.into(),
            age,
            sex,
            amyloid,
            tau,
            neurodegeneration,
            thresholds,
            profile,
            volumes,
            qc,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }

    /// Schema tag, and statuses that agree with the stored values under the
    /// stored thresholds.
    pub fn validate(&self) -> Result<()> {
        let incomplete = |m: &str| Err(Error::IncompleteResult(m.to_string()));
        if self.schema != SCHEMA {
            return incomplete(&format!("schema {:?}, expected {SCHEMA:?}", self.schema));
        }
        let p = &self.profile;
        if p.amyloid.map(|r| r.value) != self.amyloid.as_ref().map(|a| a.centiloid)
            || p.tau.map(|r| r.value) != self.tau.as_ref().map(|t| t.centaurz)
            || p.neuro.map(|r| r.value) != self.neurodegeneration.as_ref().map(|n| n.havas)
        {
            return incomplete("profile values differ from measured values");
        }
        if !p.is_consistent(&self.thresholds) {
            return incomplete("statuses inconsistent with thresholds");
        }
        Ok(())
    }

    fn has_biomarker(&self) -> bool {
        self.amyloid.is_some() || self.tau.is_some() || self.neurodegeneration.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Json,
    Text,
    Csv,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Text, Format::Csv];
}

pub fn render_json(result: &SubjectResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// The biomarker summary lines, e.g. `A+ Centiloid = 73.54`. Missing
/// modalities are left out.
pub fn biomarker_lines(profile: &AtnProfile<f64>) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(a) = profile.amyloid {
        lines.push(format!("{} Centiloid = {:.2}", a.status, a.value));
    }
    if let Some(t) = profile.tau {
        lines.push(format!("{} CenTauRz = {:.2}", t.status, t.value));
    }
    if let Some(n) = profile.neuro {
        lines.push(format!("{} HAVAs = {:.2}", n.status, n.value));
    }
    lines
}

pub fn render_text(result: &SubjectResult) -> Result<String> {
    if !result.has_biomarker() {
        return Err(Error::IncompleteResult("no biomarker to report".into()));
    }
    let mut s = String::new();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "n/a".into());
    writeln!(s, "Subject: {}", result.subject).unwrap();
    writeln!(s, "Age: {}", opt(result.age.map(|a| format!("{a:.0}")))).unwrap();
    writeln!(s, "Sex: {}", opt(result.sex.clone())).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "A / T₂ / N Biomarkers").unwrap();
    for line in biomarker_lines(&result.profile) {
        writeln!(s, "{line}").unwrap();
    }

    if let Some(a) = &result.amyloid {
        writeln!(s).unwrap();
        writeln!(s, "Amyloid ({})", a.tracer.name()).unwrap();
        writeln!(s, "  Mask: {}", a.mask).unwrap();
        writeln!(s, "  Composite SUVR = {:.2}", a.composite_suvr).unwrap();
        writeln!(s, "  Centiloid = {:.2}", a.centiloid).unwrap();
    }
    if let Some(t) = &result.tau {
        writeln!(s).unwrap();
        writeln!(s, "Tau ({})", t.tracer.name()).unwrap();
        writeln!(s, "  Mask: {}", t.mask).unwrap();
        writeln!(s, "  Composite SUVR = {:.2}", t.composite_suvr).unwrap();
        if let Some(c) = t.centaur {
            writeln!(s, "  CenTauR = {c:.2}").unwrap();
        }
        writeln!(s, "  CenTauRz = {:.2}", t.centaurz).unwrap();
    }
    if let Some(n) = &result.neurodegeneration {
        writeln!(s).unwrap();
        writeln!(s, "Neurodegeneration ({})", n.model).unwrap();
        writeln!(s, "  Composite volume score = {:.2}", n.composite).unwrap();
        writeln!(s, "  HAVAs = {:.2}", n.havas).unwrap();
        if n.non_clinical {
            writeln!(s, "  Model is for demonstration only and is not clinically validated.").unwrap();
        }
    }

    let qc = &result.qc;
    let mut notes = Vec::new();
    if let Some(f) = qc.amyloid_out_of_field_fraction.filter(|f| *f > 0.0) {
        notes.push(format!("amyloid out-of-field fraction = {:.2}%", 100.0 * f));
    }
    if let Some(f) = qc.tau_out_of_field_fraction.filter(|f| *f > 0.0) {
        notes.push(format!("tau out-of-field fraction = {:.2}%", 100.0 * f));
    }
    if qc.amyloid_non_finite_voxels > 0 {
        notes.push(format!("amyloid non-finite voxels set to 0: {}", qc.amyloid_non_finite_voxels));
    }
    if qc.tau_non_finite_voxels > 0 {
        notes.push(format!("tau non-finite voxels set to 0: {}", qc.tau_non_finite_voxels));
    }
    if !qc.empty_regions.is_empty() {
        notes.push(format!("empty regions: {}", qc.empty_regions.len()));
    }
    notes.extend(qc.warnings.iter().cloned());
    if !notes.is_empty() {
        writeln!(s).unwrap();
        writeln!(s, "QC").unwrap();
        for n in notes {
            writeln!(s, "  {n}").unwrap();
        }
    }
    Ok(s)
}

pub fn render_regional_csv(rows: &[RegionalRow]) -> Result<String> {
    let mut out = Vec::new();
    write_regional_csv(rows, &mut out)?;
    Ok(String::from_utf8(out).expect("csv output is UTF-8"))
}

pub const VOLUMES_CSV_HEADER: [&str; 4] = ["label", "name", "volume_mm3", "volume_normalized"];

pub fn render_volumes_csv(rows: &[VolumeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(VOLUMES_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.label.to_string(),
            r.name.clone(),
            r.volume_mm3.to_string(),
            r.volume_normalized.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn read_volumes_csv(path: &Path) -> Result<Vec<VolumeRow>> {
    let parse = || -> Result<Vec<VolumeRow>> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<VolumeRow>, _>>()?;
        Ok(rows)
    };
    parse().in_file(path)
}

/// Rendered files as (file name, contents), in a fixed order.
pub fn render_files(result: &SubjectResult, formats: &BTreeSet<Format>) -> Result<Vec<(&'static str, String)>> {
    result.validate()?;
    let mut files = Vec::new();
    if formats.contains(&Format::Json) {
        files.push((SUMMARY_JSON, render_json(result)?));
    }
    if formats.contains(&Format::Text) {
        files.push((REPORT_TXT, render_text(result)?));
    }
    if formats.contains(&Format::Csv) {
        let before = files.len();
        if let Some(a) = &result.amyloid {
            files.push((REGIONAL_AMYLOID_CSV, render_regional_csv(&a.regional)?));
        }
        if let Some(t) = &result.tau {
            files.push((REGIONAL_TAU_CSV, render_regional_csv(&t.regional)?));
        }
        if !result.volumes.is_empty() {
            files.push((VOLUMES_CSV, render_volumes_csv(&result.volumes)?));
        }
        if files.len() == before {
            return Err(Error::IncompleteResult("no table to write as CSV".into()));
        }
    }
    Ok(files)
}

/// Write the requested formats into `dir`, creating it if needed.
pub fn emit_report(result: &SubjectResult, formats: &BTreeSet<Format>, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render_files(result, formats)?;
    std::fs::create_dir_all(dir).in_file(dir)?;
    files
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            std::fs::write(&path, text).in_file(&path)?;
            Ok(path)
        })
        .collect()
}
