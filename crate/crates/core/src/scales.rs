//! Tracer-harmonized scales: SUVR to Centiloid (CL), CenTauR (CTR) and
//! CenTauRz (CTRz), plus calibration fitting and the Centiloid acceptance gate.

use crate::error::{Error, Result, ResultExt};
use crate::num::{mean, Real};
use crate::stats::linear_fit;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// PiB SUVR of the young-control group (CL = 0).
pub const PIB_YOUNG_CONTROL_SUVR: f64 = 0.9659;
/// PiB SUVR of the typical-AD group (CL = 100).
pub const PIB_TYPICAL_AD_SUVR: f64 = 1.8972;

/// Local FTP SUVR = `CENTAUR_FTP_SLOPE` · published CTR SUVR + `CENTAUR_FTP_INTERCEPT`.
pub const CENTAUR_FTP_SLOPE: f64 = 0.7646;
pub const CENTAUR_FTP_INTERCEPT: f64 = 0.2222;

/// Tolerance for matching the PiB registry row against the anchor-derived line.
pub const REGISTRY_ANCHOR_TOL: f64 = 1e-3;

pub const GATE_SLOPE_MIN: f64 = 0.98;
pub const GATE_SLOPE_MAX: f64 = 1.02;
pub const GATE_INTERCEPT_MIN: f64 = -2.0;
pub const GATE_INTERCEPT_MAX: f64 = 2.0;
/// R² must be strictly greater than this.
pub const GATE_R2_MIN: f64 = 0.98;

const BUILTIN_REGISTRY: &str = include_str!("../data/registry.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tracer {
    PiB,
    FBP,
    FBB,
    FTM,
    NAV,
    FTP,
    RO,
    MK,
    GTP,
    PBB3,
    PI,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracerKind {
    Amyloid,
    Tau,
}

impl Tracer {
    pub const ALL: [Tracer; 11] = [
        Tracer::PiB,
        Tracer::FBP,
        Tracer::FBB,
        Tracer::FTM,
        Tracer::NAV,
        Tracer::FTP,
        Tracer::RO,
        Tracer::MK,
        Tracer::GTP,
        Tracer::PBB3,
        Tracer::PI,
    ];

    pub fn kind(self) -> TracerKind {
        match self {
            Tracer::PiB | Tracer::FBP | Tracer::FBB | Tracer::FTM | Tracer::NAV => TracerKind::Amyloid,
            _ => TracerKind::Tau,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tracer::PiB => "PiB",
            Tracer::FBP => "FBP",
            Tracer::FBB => "FBB",
            Tracer::FTM => "FTM",
            Tracer::NAV => "NAV",
            Tracer::FTP => "FTP",
            Tracer::RO => "RO",
            Tracer::MK => "MK",
            Tracer::GTP => "GTP",
            Tracer::PBB3 => "PBB3",
            Tracer::PI => "PI",
        }
    }
}

impl fmt::Display for Tracer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tracer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tracer::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownTracer(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scale {
    CL,
    CTR,
    CTRz,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::CL => "CL",
            Scale::CTR => "CTR",
            Scale::CTRz => "CTRz",
        })
    }
}

/// `value = slope · suvr + intercept` for one tracer on one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct CalibrationLine<T> {
    pub tracer: Tracer,
    pub scale: Scale,
    pub slope: T,
    pub intercept: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<T>,
}

impl<T: Real> CalibrationLine<T> {
    pub fn new(tracer: Tracer, scale: Scale, slope: T, intercept: T) -> Self {
        Self {
            tracer,
            scale,
            slope,
            intercept,
            r2: None,
        }
    }

    pub fn apply(&self, suvr: T) -> T {
        self.slope * suvr + self.intercept
    }

    /// SUVR that maps to `value`.
    pub fn invert(&self, value: T) -> T {
        (value - self.intercept) / self.slope
    }

    /// The line expressed the other way round: SUVR as a function of scale value.
    pub fn inverse(&self) -> (T, T) {
        (T::one() / self.slope, -self.intercept / self.slope)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct Registry<T> {
    pub lines: Vec<CalibrationLine<T>>,
}

impl<T: Real + DeserializeOwned> Registry<T> {
    /// Shipped Centiloid and CenTauRz conversion lines, checked against the
    /// PiB anchors.
    pub fn builtin() -> Self {
        let reg = Self::from_json(BUILTIN_REGISTRY).expect("builtin registry parses");
        reg.verify_pib_anchors().expect("builtin PiB line matches its anchors");
        reg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let reg: Registry<T> = serde_json::from_str(text)?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }
}

impl<T: Real> Registry<T> {
    pub fn validate(&self) -> Result<()> {
        for (i, line) in self.lines.iter().enumerate() {
            if !(line.slope > T::zero()) || !line.intercept.is_finite() {
                return Err(Error::Registry(format!(
                    "{} {} line must have a positive slope",
                    line.tracer, line.scale
                )));
            }
            if self.lines[..i]
                .iter()
                .any(|o| o.tracer == line.tracer && o.scale == line.scale)
            {
                return Err(Error::Registry(format!("duplicate {} {} line", line.tracer, line.scale)));
            }
        }
        Ok(())
    }

    pub fn line(&self, tracer: Tracer, scale: Scale) -> Result<&CalibrationLine<T>> {
        self.lines
            .iter()
            .find(|l| l.tracer == tracer && l.scale == scale)
            .ok_or_else(|| Error::UnknownTracer(format!("{tracer} has no {scale} line")))
    }

    /// The PiB CL row must equal the Level-1 line through the published anchors.
    pub fn verify_pib_anchors(&self) -> Result<()> {
        let row = self.line(Tracer::PiB, Scale::CL)?;
        let anchors = Level1Anchors {
            mean_ycn_suvr: T::lit(PIB_YOUNG_CONTROL_SUVR),
            mean_ad_suvr: T::lit(PIB_TYPICAL_AD_SUVR),
        };
        let expected = anchors.line()?;
        let tol = T::lit(REGISTRY_ANCHOR_TOL);
        if (row.slope - expected.slope).abs() > tol || (row.intercept - expected.intercept).abs() > tol {
            return Err(Error::Registry(format!(
                "PiB row ({}, {}) differs from anchor line ({}, {})",
                row.slope, row.intercept, expected.slope, expected.intercept
            )));
        }
        Ok(())
    }
}

fn require_kind(tracer: Tracer, kind: TracerKind, scale: Scale) -> Result<()> {
    if tracer.kind() != kind {
        return Err(Error::ScaleMismatch {
            tracer: tracer.to_string(),
            scale: scale.to_string(),
        });
    }
    Ok(())
}

pub fn suvr_to_centiloid<T: Real>(registry: &Registry<T>, tracer: Tracer, suvr: T) -> Result<T> {
    require_kind(tracer, TracerKind::Amyloid, Scale::CL)?;
    Ok(registry.line(tracer, Scale::CL)?.apply(suvr))
}

pub fn suvr_to_centaurz<T: Real>(registry: &Registry<T>, tracer: Tracer, suvr: T) -> Result<T> {
    require_kind(tracer, TracerKind::Tau, Scale::CTRz)?;
    Ok(registry.line(tracer, Scale::CTRz)?.apply(suvr))
}

/// FTP SUVR to CenTauR units.
pub fn suvr_to_centaur<T: Real>(suvr: T) -> T {
    (suvr - T::lit(CENTAUR_FTP_INTERCEPT)) / T::lit(CENTAUR_FTP_SLOPE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level1Anchors<T> {
    pub mean_ycn_suvr: T,
    pub mean_ad_suvr: T,
}

impl<T: Real> Level1Anchors<T> {
    /// PiB line with CL(mean_ycn) = 0 and CL(mean_ad) = 100.
    pub fn line(&self) -> Result<CalibrationLine<T>> {
        let span = self.mean_ad_suvr - self.mean_ycn_suvr;
        if !(span > T::lit(1e-9)) {
            return Err(Error::DegenerateAnchors);
        }
        let slope = T::lit(100.0) / span;
        Ok(CalibrationLine::new(Tracer::PiB, Scale::CL, slope, -slope * self.mean_ycn_suvr))
    }
}

/// Level-1 calibration from young-control and typical-AD PiB SUVRs.
pub fn fit_level1<T: Real>(ycn_suvr: &[T], ad_suvr: &[T]) -> Result<(Level1Anchors<T>, CalibrationLine<T>)> {
    for g in [ycn_suvr, ad_suvr] {
        if g.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
    }
    let anchors = Level1Anchors {
        mean_ycn_suvr: mean(ycn_suvr),
        mean_ad_suvr: mean(ad_suvr),
    };
    let line = anchors.line()?;
    Ok((anchors, line))
}

/// Level-2 calibration: regress tracer SUVR on PiB SUVR, then compose with
/// the Level-1 PiB line so the result maps tracer SUVR directly to CL.
/// Returns the composed line and the R² of the PiB/tracer regression.
pub fn fit_level2<T: Real>(
    tracer: Tracer,
    pib_suvr: &[T],
    tracer_suvr: &[T],
    level1: &CalibrationLine<T>,
) -> Result<(CalibrationLine<T>, T)> {
    require_kind(tracer, TracerKind::Amyloid, Scale::CL)?;
    if pib_suvr.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: pib_suvr.len() });
    }
    let fit = linear_fit(pib_suvr, tracer_suvr)?;
    if !(fit.slope > T::zero()) {
        return Err(Error::DegenerateFit("tracer SUVR does not increase with PiB SUVR"));
    }
    let slope = level1.slope / fit.slope;
    let intercept = level1.intercept - level1.slope * fit.intercept / fit.slope;
    let line = CalibrationLine {
        tracer,
        scale: Scale::CL,
        slope,
        intercept,
        r2: Some(fit.r2),
    };
    Ok((line, fit.r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Slope,
    Intercept,
    R2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub n: usize,
    pub pass: bool,
    pub failures: Vec<Gate>,
}

/// Regress replicated CL on published CL and apply the acceptance gates:
/// slope in [0.98, 1.02], intercept in [-2, 2], R² > 0.98.
pub fn check_centiloid_criteria<T: Real>(replicated_cl: &[T], published_cl: &[T]) -> Result<CriteriaReport<T>> {
    if published_cl.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: published_cl.len() });
    }
    let fit = linear_fit(published_cl, replicated_cl)?;
    let mut failures = Vec::new();
    if !(fit.slope >= T::lit(GATE_SLOPE_MIN) && fit.slope <= T::lit(GATE_SLOPE_MAX)) {
        failures.push(Gate::Slope);
    }
    if !(fit.intercept >= T::lit(GATE_INTERCEPT_MIN) && fit.intercept <= T::lit(GATE_INTERCEPT_MAX)) {
        failures.push(Gate::Intercept);
    }
    if !(fit.r2 > T::lit(GATE_R2_MIN)) {
        failures.push(Gate::R2);
    }
    Ok(CriteriaReport {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        n: fit.n,
        pass: failures.is_empty(),
        failures,
    })
}

/// CenTauR Level-1: regress local FTP SUVR on published CTR-pipeline SUVR
/// (`local = a·published + b`) and return the inverted line `CTR = (suvr - b)/a`.
pub fn fit_centaur_level1<T: Real>(published_ctr: &[T], local_suvr: &[T]) -> Result<CalibrationLine<T>> {
    if published_ctr.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: published_ctr.len() });
    }
    let fit = linear_fit(published_ctr, local_suvr)?;
    if !(fit.slope > T::zero()) {
        return Err(Error::DegenerateFit("local SUVR does not increase with published SUVR"));
    }
    Ok(CalibrationLine {
        tracer: Tracer::FTP,
        scale: Scale::CTR,
        slope: T::one() / fit.slope,
        intercept: -fit.intercept / fit.slope,
        r2: Some(fit.r2),
    })
}
