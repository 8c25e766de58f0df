//! A/T₂/N status classification and the age-aware neurodegeneration
//! probability.

use crate::error::{Error, Result, ResultExt};
use crate::num::Real;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmyloidScheme {
    #[default]
    /// CL < 10 negative, 10 ≤ CL < 30 intermediate, CL ≥ 30 positive.
    Amypad,
    /// CL ≥ 24.1 positive.
    Binary,
}

impl FromStr for AmyloidScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amypad" => Ok(AmyloidScheme::Amypad),
            "binary" => Ok(AmyloidScheme::Binary),
            other => Err(Error::Config(format!("unknown amyloid scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagingThresholds<T> {
    pub amyloid_scheme: AmyloidScheme,
    pub amypad_lo: T,
    pub amypad_hi: T,
    pub binary_cut: T,
    pub tau_cut: T,
    pub n_cut: T,
}

impl<T: Real> Default for StagingThresholds<T> {
    fn default() -> Self {
        Self::with_scheme(AmyloidScheme::Amypad)
    }
}

impl<T: Real> StagingThresholds<T> {
    pub fn with_scheme(amyloid_scheme: AmyloidScheme) -> Self {
        Self {
            amyloid_scheme,
            amypad_lo: T::lit(10.0),
            amypad_hi: T::lit(30.0),
            binary_cut: T::lit(24.1),
            tau_cut: T::lit(2.0),
            n_cut: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.amypad_lo, self.amypad_hi, self.binary_cut, self.tau_cut, self.n_cut];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if !(self.amypad_lo < self.amypad_hi) {
            return Err(Error::Config("amypad_lo must be below amypad_hi".into()));
        }
        Ok(())
    }

    pub fn amyloid(&self, cl: T) -> Result<AmyloidStatus> {
        finite(cl, "Centiloid")?;
        Ok(match self.amyloid_scheme {
            AmyloidScheme::Amypad if cl < self.amypad_lo => AmyloidStatus::Negative,
            AmyloidScheme::Amypad if cl < self.amypad_hi => AmyloidStatus::Intermediate,
            AmyloidScheme::Amypad => AmyloidStatus::Positive,
            AmyloidScheme::Binary if cl >= self.binary_cut => AmyloidStatus::Positive,
            AmyloidScheme::Binary => AmyloidStatus::Negative,
        })
    }

    pub fn tau(&self, ctrz: T) -> Result<TauStatus> {
        finite(ctrz, "CenTauRz")?;
        Ok(if ctrz < self.tau_cut {
            TauStatus::Negative
        } else {
            TauStatus::Positive
        })
    }

    pub fn neuro(&self, p: T) -> Result<NeuroStatus> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::OutOfRange(format!("HAVAs probability {p} not in [0, 1]")));
        }
        Ok(if p < self.n_cut {
            NeuroStatus::Negative
        } else {
            NeuroStatus::Positive
        })
    }
}

fn finite<T: Real>(v: T, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{what} value {v} is not finite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AmyloidStatus {
    #[serde(rename = "A-")]
    Negative,
    #[serde(rename = "Ainter")]
    Intermediate,
    #[serde(rename = "A+")]
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TauStatus {
    #[serde(rename = "T2-")]
    Negative,
    #[serde(rename = "T2+")]
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NeuroStatus {
    #[serde(rename = "N-")]
    Negative,
    #[serde(rename = "N+")]
    Positive,
}

impl fmt::Display for AmyloidStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AmyloidStatus::Negative => "A-",
            AmyloidStatus::Intermediate => "Ainter",
            AmyloidStatus::Positive => "A+",
        })
    }
}

impl fmt::Display for TauStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TauStatus::Negative => "T₂-",
            TauStatus::Positive => "T₂+",
        })
    }
}

impl fmt::Display for NeuroStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeuroStatus::Negative => "N-",
            NeuroStatus::Positive => "N+",
        })
    }
}

pub fn amyloid_status<T: Real>(cl: T, scheme: AmyloidScheme) -> Result<AmyloidStatus> {
    StagingThresholds::with_scheme(scheme).amyloid(cl)
}

pub fn tau_status<T: Real>(ctrz: T) -> Result<TauStatus> {
    StagingThresholds::default().tau(ctrz)
}

pub fn neurodegeneration_status<T: Real>(p: T) -> Result<NeuroStatus> {
    StagingThresholds::default().neuro(p)
}

/// A status together with the raw value it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading<S, T> {
    pub status: S,
    pub value: T,
}

/// A/T₂/N profile. A missing modality is `None`, never a zero value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtnProfile<T> {
    pub amyloid: Option<Reading<AmyloidStatus, T>>,
    pub tau: Option<Reading<TauStatus, T>>,
    pub neuro: Option<Reading<NeuroStatus, T>>,
}

impl<T: Real> AtnProfile<T> {
    pub fn classify(
        cl: Option<T>,
        ctrz: Option<T>,
        havas_p: Option<T>,
        thresholds: &StagingThresholds<T>,
    ) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            amyloid: cl
                .map(|v| thresholds.amyloid(v).map(|status| Reading { status, value: v }))
                .transpose()?,
            tau: ctrz
                .map(|v| thresholds.tau(v).map(|status| Reading { status, value: v }))
                .transpose()?,
            neuro: havas_p
                .map(|v| thresholds.neuro(v).map(|status| Reading { status, value: v }))
                .transpose()?,
        })
    }

    /// Every stored status agrees with its raw value under `thresholds`.
    pub fn is_consistent(&self, thresholds: &StagingThresholds<T>) -> bool {
        self.amyloid
            .is_none_or(|r| thresholds.amyloid(r.value).is_ok_and(|s| s == r.status))
            && self
                .tau
                .is_none_or(|r| thresholds.tau(r.value).is_ok_and(|s| s == r.status))
            && self
                .neuro
                .is_none_or(|r| thresholds.neuro(r.value).is_ok_and(|s| s == r.status))
    }
}

pub fn atn_profile<T: Real>(cl: T, ctrz: T, havas_p: T, thresholds: &StagingThresholds<T>) -> Result<AtnProfile<T>> {
    AtnProfile::classify(Some(cl), Some(ctrz), Some(havas_p), thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian<T> {
    pub mean: T,
    pub sd: T,
}

impl<T: Real> Gaussian<T> {
    fn log_density(&self, x: T) -> T {
        let z = (x - self.mean) / self.sd;
        -self.sd.ln() - T::lit(0.5) * z * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBin<T> {
    pub age: T,
    pub normal: Gaussian<T>,
    pub ad: Gaussian<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HavasStructure<T> {
    pub name: String,
    pub labels: BTreeSet<u32>,
    pub weight: T,
}

fn default_structures<T: Real>() -> Vec<HavasStructure<T>> {
    let s = |name: &str, labels: [u32; 2], w: f64| HavasStructure {
        name: name.to_string(),
        labels: labels.into_iter().collect(),
        weight: T::lit(w),
    };
    vec![
        s("hippocampus", [47, 48], 1.0),
        s("amygdala", [31, 32], 1.0),
        s("inferior_lateral_ventricle", [49, 50], -1.0),
    ]
}

/// Normal-aging and AD distributions of a composite volume score, given at
/// age knots and linearly interpolated in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct HavasModel<T> {
    pub name: String,
    #[serde(default)]
    pub non_clinical: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_structures")]
    pub structures: Vec<HavasStructure<T>>,
    pub bins: Vec<AgeBin<T>>,
}

const DEMO_MODEL: &str = include_str!("../data/havas_demo_model.json");

impl<T: Real + DeserializeOwned> HavasModel<T> {
    /// Synthetic demonstration model. Not for clinical use.
    pub fn demo() -> Self {
        Self::from_json(DEMO_MODEL).expect("demo model is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }
}

impl<T: Real> HavasModel<T> {
    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::InvalidModel("no age bins".into()));
        }
        if self.structures.is_empty() {
            return Err(Error::InvalidModel("no structures".into()));
        }
        for w in self.bins.windows(2) {
            if !(w[1].age > w[0].age) {
                return Err(Error::InvalidModel("age bins must be strictly increasing".into()));
            }
        }
        for b in &self.bins {
            for g in [b.normal, b.ad] {
                if !(g.sd > T::zero()) || !g.mean.is_finite() {
                    return Err(Error::InvalidModel(format!("bad distribution at age {}", b.age)));
                }
            }
        }
        Ok(())
    }

    pub fn age_range(&self) -> (T, T) {
        (self.bins[0].age, self.bins[self.bins.len() - 1].age)
    }

    /// Normal and AD distributions at `age`.
    pub fn distributions_at(&self, age: T) -> Result<(Gaussian<T>, Gaussian<T>)> {
        let (lo, hi) = self.age_range();
        if !(age >= lo && age <= hi) {
            return Err(Error::AgeOutOfRange {
                age: age.as_f64(),
                min: lo.as_f64(),
                max: hi.as_f64(),
            });
        }
        let i = self.bins.iter().rposition(|b| b.age <= age).unwrap_or(0);
        let a = &self.bins[i];
        let Some(b) = self.bins.get(i + 1) else {
            return Ok((a.normal, a.ad));
        };
        let t = (age - a.age) / (b.age - a.age);
        let lerp = |x: Gaussian<T>, y: Gaussian<T>| Gaussian {
            mean: x.mean + t * (y.mean - x.mean),
            sd: x.sd + t * (y.sd - x.sd),
        };
        Ok((lerp(a.normal, b.normal), lerp(a.ad, b.ad)))
    }

    /// Sum per-label volumes into the model's structures.
    pub fn structure_volumes(&self, label_volumes: &BTreeMap<u32, T>) -> Result<BTreeMap<String, T>> {
        self.structures
            .iter()
            .map(|s| {
                let vols: Vec<T> = s.labels.iter().filter_map(|l| label_volumes.get(l).copied()).collect();
                if vols.is_empty() {
                    return Err(Error::MissingStructure(s.name.clone()));
                }
                Ok((s.name.clone(), vols.into_iter().sum()))
            })
            .collect()
    }

    /// Weighted composite of normalized structure volumes.
    pub fn composite(&self, volumes: &BTreeMap<String, T>) -> Result<T> {
        let mut c = T::zero();
        for s in &self.structures {
            let v = *volumes
                .get(&s.name)
                .ok_or_else(|| Error::MissingStructure(s.name.clone()))?;
            if !(v > T::zero()) {
                return Err(Error::OutOfRange(format!("{} volume {v} must be positive", s.name)));
            }
            c += s.weight * v;
        }
        Ok(c)
    }

    /// Posterior probability of the AD distribution (equal priors).
    pub fn probability_from_composite(&self, composite: T, age: T) -> Result<T> {
        let (normal, ad) = self.distributions_at(age)?;
        let log_ratio = normal.log_density(composite) - ad.log_density(composite);
        Ok(T::one() / (T::one() + log_ratio.exp()))
    }
}

pub fn havas_probability<T: Real>(volumes: &BTreeMap<String, T>, age: T, model: &HavasModel<T>) -> Result<T> {
    let c = model.composite(volumes)?;
    model.probability_from_composite(c, age)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_bin(normal_mean: f64, ad_mean: f64) -> HavasModel<f64> {
        HavasModel {
            name: "t".into(),
            non_clinical: true,
            description: None,
            structures: default_structures(),
            bins: vec![
                AgeBin { age: 40.0, normal: Gaussian { mean: normal_mean, sd: 1.0 }, ad: Gaussian { mean: ad_mean, sd: 1.0 } },
                AgeBin { age: 90.0, normal: Gaussian { mean: normal_mean, sd: 1.0 }, ad: Gaussian { mean: ad_mean, sd: 1.0 } },
            ],
        }
    }

    #[test]
    fn amypad_and_binary_rules() {
        use AmyloidStatus::*;
        let s = AmyloidScheme::Amypad;
        assert_eq!(amyloid_status(73.54, s).unwrap(), Positive);
        assert_eq!(amyloid_status(9.99, s).unwrap(), Negative);
        assert_eq!(amyloid_status(10.0, s).unwrap(), Intermediate);
        assert_eq!(amyloid_status(29.99, s).unwrap(), Intermediate);
        assert_eq!(amyloid_status(30.0, s).unwrap(), Positive);
        assert_eq!(amyloid_status(24.1, AmyloidScheme::Binary).unwrap(), Positive);
        assert_eq!(amyloid_status(24.09, AmyloidScheme::Binary).unwrap(), Negative);
        assert!(amyloid_status(f64::NAN, s).is_err());
    }

    #[test]
    fn tau_and_neuro_rules() {
        assert_eq!(tau_status(11.0).unwrap(), TauStatus::Positive);
        assert_eq!(tau_status(2.0).unwrap(), TauStatus::Positive);
        assert_eq!(tau_status(1.9989).unwrap(), TauStatus::Negative);
        assert_eq!(neurodegeneration_status(0.94).unwrap(), NeuroStatus::Positive);
        assert_eq!(neurodegeneration_status(0.5).unwrap(), NeuroStatus::Positive);
        assert_eq!(neurodegeneration_status(0.0).unwrap(), NeuroStatus::Negative);
        assert!(matches!(neurodegeneration_status(1.2), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn profiles() {
        let t = StagingThresholds::default();
        let p = atn_profile(73.54, 11.0, 0.94, &t).unwrap();
        assert_eq!(p.amyloid.unwrap().status, AmyloidStatus::Positive);
        assert_eq!(p.tau.unwrap().status, TauStatus::Positive);
        assert_eq!(p.neuro.unwrap().status, NeuroStatus::Positive);
        let p = atn_profile(0.0, 0.0, 0.0, &t).unwrap();
        assert_eq!(
            (p.amyloid.unwrap().status, p.tau.unwrap().status, p.neuro.unwrap().status),
            (AmyloidStatus::Negative, TauStatus::Negative, NeuroStatus::Negative)
        );
        let p = atn_profile(20.0, 2.5, 0.4, &t).unwrap();
        assert_eq!(
            (p.amyloid.unwrap().status, p.tau.unwrap().status, p.neuro.unwrap().status),
            (AmyloidStatus::Intermediate, TauStatus::Positive, NeuroStatus::Negative)
        );
        assert!(p.is_consistent(&t));
        let partial = AtnProfile::classify(Some(40.0), None, Some(0.2), &t).unwrap();
        assert!(partial.tau.is_none());
    }

    #[test]
    fn two_gaussian_posterior() {
        let m = single_bin(5.0, 0.0);
        assert!((m.probability_from_composite(2.5, 60.0).unwrap() - 0.5).abs() < 1e-15);
        let at_ad = m.probability_from_composite(0.0, 60.0).unwrap();
        assert!((at_ad - 1.0 / (1.0 + (-12.5f64).exp())).abs() < 1e-15);
        assert!((at_ad - 0.999996).abs() < 1e-6);
        let at_normal = m.probability_from_composite(5.0, 60.0).unwrap();
        assert!((at_normal - 3.7e-6).abs() < 1e-7);
    }

    #[test]
    fn age_interpolation_and_range() {
        let m = HavasModel::<f64>::demo();
        let (n, a) = m.distributions_at(70.0).unwrap();
        assert!((n.mean - 0.65).abs() < 1e-12);
        assert!((a.mean - 0.51).abs() < 1e-12);
        assert!(matches!(m.distributions_at(10.0), Err(Error::AgeOutOfRange { .. })));
        assert!(m.distributions_at(100.0).is_ok());
    }

    #[test]
    fn composite_and_missing_structures() {
        let m = HavasModel::<f64>::demo();
        let mut vols = BTreeMap::new();
        vols.insert("hippocampus".to_string(), 0.5);
        vols.insert("amygdala".to_string(), 0.2);
        assert!(matches!(m.composite(&vols), Err(Error::MissingStructure(_))));
        vols.insert("inferior_lateral_ventricle".to_string(), 0.05);
        assert!((m.composite(&vols).unwrap() - 0.65).abs() < 1e-12);
        let p = havas_probability(&vols, 72.0, &m).unwrap();
        assert!(p > 0.0 && p < 1.0);

        let labels: BTreeMap<u32, f64> = [(47, 0.25), (48, 0.25), (31, 0.1), (32, 0.1), (49, 0.03)].into();
        let s = m.structure_volumes(&labels).unwrap();
        assert!((s["inferior_lateral_ventricle"] - 0.03).abs() < 1e-15);
        let missing: BTreeMap<u32, f64> = [(47, 0.25)].into();
        assert!(m.structure_volumes(&missing).is_err());
    }

    #[test]
    fn model_validation() {
        let mut m = single_bin(1.0, 0.0);
        m.bins[1].age = 40.0;
        assert!(m.validate().is_err());
        let mut m = single_bin(1.0, 0.0);
        m.bins[0].ad.sd = 0.0;
        assert!(m.validate().is_err());
        let json = r#"{"name":"x","bins":[{"age":50,"normal":{"mean":1,"sd":1},"ad":{"mean":0,"sd":1}}]}"#;
        let m = HavasModel::<f64>::from_json(json).unwrap();
        assert_eq!(m.structures.len(), 3);
        assert_eq!(m.structures[2].weight, -1.0);
    }
}
