//! Region statistics and SUVR.
//!
//! Voxels are assigned to regions by label identity only. All per-label
//! moments are gathered in one pass over the volume and merged per region, so
//! a 122-region table costs the same as a single ROI.

use crate::error::{Error, Result, ResultExt};
use crate::volume::{LabelVolume, VolumeImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

/// Reference means at or below this are rejected.
pub const REFERENCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
    Bilateral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDefinition {
    pub name: String,
    pub labels: BTreeSet<u32>,
    pub hemisphere: Hemisphere,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<String>,
}

/// An ordered list of regions, e.g. the 122 gray-matter structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub name: String,
    pub regions: Vec<RegionDefinition>,
}

impl RegionSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let set: RegionSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).in_file(path)?;
        Self::from_json(&text).in_file(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::InvalidRegion("region list is empty".into()));
        }
        let by_name: HashMap<&str, &RegionDefinition> =
            self.regions.iter().map(|r| (r.name.as_str(), r)).collect();
        if by_name.len() != self.regions.len() {
            return Err(Error::InvalidRegion("duplicate region names".into()));
        }
        for r in &self.regions {
            if r.labels.is_empty() {
                return Err(Error::InvalidRegion(format!("{:?} has no labels", r.name)));
            }
            if let Some(p) = &r.partner {
                let other = by_name
                    .get(p.as_str())
                    .ok_or_else(|| Error::InvalidRegion(format!("{:?}: unknown partner {p:?}", r.name)))?;
                if other.partner.as_deref() != Some(r.name.as_str()) {
                    return Err(Error::InvalidRegion(format!(
                        "partner relation of {:?} and {p:?} is not symmetric",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Label-to-label contralateral map for single-label regions. Midline
    /// regions map to themselves; lateral regions without a partner are absent.
    pub fn partner_map(&self) -> BTreeMap<u32, u32> {
        let by_name: HashMap<&str, &RegionDefinition> =
            self.regions.iter().map(|r| (r.name.as_str(), r)).collect();
        let mut map = BTreeMap::new();
        for r in &self.regions {
            if r.labels.len() != 1 {
                continue;
            }
            let label = *r.labels.first().unwrap();
            match (&r.partner, r.hemisphere) {
                (Some(p), _) => {
                    let other = by_name[p.as_str()];
                    if other.labels.len() == 1 {
                        map.insert(label, *other.labels.first().unwrap());
                    }
                }
                (None, Hemisphere::Midline) => {
                    map.insert(label, label);
                }
                _ => {}
            }
        }
        map
    }

    pub fn name_of(&self, label: u32) -> Option<&str> {
        self.regions
            .iter()
            .find(|r| r.labels.len() == 1 && r.labels.contains(&label))
            .map(|r| r.name.as_str())
    }
}

/// Target and reference label sets for one composite SUVR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDefinition {
    pub name: String,
    pub target_labels: BTreeSet<u32>,
    pub reference_labels: BTreeSet<u32>,
}

impl MaskDefinition {
    pub fn new(
        name: impl Into<String>,
        target_labels: BTreeSet<u32>,
        reference_labels: BTreeSet<u32>,
    ) -> Result<Self> {
        let mask = Self {
            name: name.into(),
            target_labels,
            reference_labels,
        };
        mask.validate()?;
        Ok(mask)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_labels.is_empty() || self.reference_labels.is_empty() {
            return Err(Error::InvalidRegion(format!("mask {:?}: empty label set", self.name)));
        }
        if let Some(l) = self.target_labels.intersection(&self.reference_labels).next() {
            return Err(Error::InvalidRegion(format!(
                "mask {:?}: label {l} is both target and reference",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for single-voxel regions.
    pub sd: f64,
    pub voxel_count: usize,
    pub volume_mm3: f64,
}

/// Running count / mean / sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
    }
}

const CHUNK: usize = 1 << 16;

/// Per-label moments of an intensity volume over a label volume.
#[derive(Debug, Clone)]
pub struct LabelStatistics {
    per_label: BTreeMap<u32, Moments>,
    voxel_volume_mm3: f64,
}

impl LabelStatistics {
    /// `exclude`, when given, marks voxels left out of every region (e.g.
    /// out-of-field voxels after resampling).
    pub fn compute(vol: &VolumeImage, labels: &LabelVolume, exclude: Option<&[bool]>) -> Result<Self> {
        vol.geometry().ensure_matches(labels.geometry())?;
        if let Some(ex) = exclude {
            if ex.len() != vol.data().len() {
                return Err(Error::GeometryMismatch("exclusion mask length".into()));
            }
        }
        let values = vol.data();
        let lab = labels.data();
        let n_labels = labels.max_label() as usize + 1;
        // Fixed chunking and in-order merging keep results bit-reproducible
        // regardless of thread count.
        let partials: Vec<HashMap<u32, Moments>> = (0..values.len().div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let range = c * CHUNK..((c + 1) * CHUNK).min(values.len());
                let mut dense = vec![Moments::default(); n_labels.min(1 << 16)];
                let mut sparse: HashMap<u32, Moments> = HashMap::new();
                for i in range {
                    if exclude.is_some_and(|ex| ex[i]) {
                        continue;
                    }
                    let l = lab[i];
                    let x = values[i] as f64;
                    match dense.get_mut(l as usize) {
                        Some(m) => m.push(x),
                        None => sparse.entry(l).or_default().push(x),
                    }
                }
                sparse.extend(
                    dense
                        .into_iter()
                        .enumerate()
                        .filter(|(_, m)| m.n > 0)
                        .map(|(l, m)| (l as u32, m)),
                );
                sparse
            })
            .collect();
        let mut per_label: BTreeMap<u32, Moments> = BTreeMap::new();
        for part in partials {
            let mut keys: Vec<_> = part.into_iter().collect();
            keys.sort_unstable_by_key(|(l, _)| *l);
            for (l, m) in keys {
                per_label.entry(l).or_default().merge(&m);
            }
        }
        Ok(Self {
            per_label,
            voxel_volume_mm3: vol.geometry().voxel_volume_mm3(),
        })
    }

    pub fn voxel_count(&self, label: u32) -> usize {
        self.per_label.get(&label).map_or(0, |m| m.n)
    }

    /// Statistics over the union of `label_set`.
    pub fn region(&self, label_set: &BTreeSet<u32>) -> Result<RoiStats> {
        let mut acc = Moments::default();
        for l in label_set {
            if let Some(m) = self.per_label.get(l) {
                acc.merge(m);
            }
        }
        if acc.n == 0 {
            return Err(Error::EmptyRegion(label_set.iter().copied().collect()));
        }
        let sd = if acc.n > 1 {
            (acc.m2.max(0.0) / (acc.n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(RoiStats {
            mean: acc.mean,
            sd,
            voxel_count: acc.n,
            volume_mm3: acc.n as f64 * self.voxel_volume_mm3,
        })
    }

    pub fn suvr(&self, target: &BTreeSet<u32>, reference: &BTreeSet<u32>) -> Result<f64> {
        let reference_mean = self.reference_mean(reference)?;
        Ok(self.region(target)?.mean / reference_mean)
    }

    fn reference_mean(&self, reference: &BTreeSet<u32>) -> Result<f64> {
        let r = self.region(reference)?;
        if r.mean <= REFERENCE_EPS {
            return Err(Error::ZeroReference(r.mean));
        }
        Ok(r.mean)
    }

    /// One row per region, in input order. Regions with no voxels are flagged
    /// rather than failing the table.
    pub fn regional_table(&self, regions: &RegionSet, reference: &BTreeSet<u32>) -> Result<Vec<RegionalRow>> {
        if regions.is_empty() {
            return Err(Error::InvalidRegion("region list is empty".into()));
        }
        let reference_mean = self.reference_mean(reference)?;
        Ok(regions
            .regions
            .iter()
            .map(|r| match self.region(&r.labels) {
                Ok(stats) => RegionalRow {
                    name: r.name.clone(),
                    labels: r.labels.clone(),
                    suvr: Some(stats.mean / reference_mean),
                    single_voxel: stats.voxel_count == 1,
                    stats: Some(stats),
                    empty: false,
                },
                Err(_) => RegionalRow {
                    name: r.name.clone(),
                    labels: r.labels.clone(),
                    stats: None,
                    suvr: None,
                    empty: true,
                    single_voxel: false,
                },
            })
            .collect())
    }
}

pub fn roi_stats(vol: &VolumeImage, labels: &LabelVolume, label_set: &BTreeSet<u32>) -> Result<RoiStats> {
    LabelStatistics::compute(vol, labels, None)?.region(label_set)
}

/// Mean of `target` over mean of `reference`.
pub fn suvr(
    vol: &VolumeImage,
    labels: &LabelVolume,
    target: &BTreeSet<u32>,
    reference: &BTreeSet<u32>,
) -> Result<f64> {
    LabelStatistics::compute(vol, labels, None)?.suvr(target, reference)
}

pub fn regional_suvr_table(
    vol: &VolumeImage,
    labels: &LabelVolume,
    regions: &RegionSet,
    reference: &BTreeSet<u32>,
) -> Result<Vec<RegionalRow>> {
    LabelStatistics::compute(vol, labels, None)?.regional_table(regions, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalRow {
    pub name: String,
    pub labels: BTreeSet<u32>,
    pub stats: Option<RoiStats>,
    pub suvr: Option<f64>,
    pub empty: bool,
    /// QC: sd reported as 0 because only one voxel carries the label(s).
    pub single_voxel: bool,
}

pub fn label_set_string(labels: &BTreeSet<u32>) -> String {
    labels.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

pub const REGIONAL_CSV_HEADER: [&str; 8] = ["label_set", "name", "voxels", "volume_mm3", "mean", "sd", "suvr", "empty"];

pub fn write_regional_csv<W: Write>(rows: &[RegionalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGIONAL_CSV_HEADER)?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let s = r.stats.as_ref();
        w.write_record([
            label_set_string(&r.labels),
            r.name.clone(),
            s.map_or(0, |s| s.voxel_count).to_string(),
            opt(s.map(|s| s.volume_mm3)),
            opt(s.map(|s| s.mean)),
            opt(s.map(|s| s.sd)),
            opt(r.suvr),
            r.empty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn set(labels: &[u32]) -> BTreeSet<u32> {
        labels.iter().copied().collect()
    }

    fn pair(values: Vec<f32>, labels: Vec<u32>) -> (VolumeImage, LabelVolume) {
        let g = Geometry::axis_aligned([values.len(), 1, 1], [2.0, 1.0, 1.5], [0.0; 3]).unwrap();
        (
            VolumeImage::new(g.clone(), values).unwrap(),
            LabelVolume::new(g, labels).unwrap(),
        )
    }

    #[test]
    fn constant_region() {
        let (v, l) = pair(vec![3.0, 3.0, 3.0, 9.0], vec![5, 5, 5, 6]);
        let s = roi_stats(&v, &l, &set(&[5])).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.voxel_count, 3);
        assert_eq!(s.volume_mm3, 9.0);
    }

    #[test]
    fn two_voxel_sample_sd() {
        let (v, l) = pair(vec![2.0, 4.0], vec![1, 1]);
        let s = roi_stats(&v, &l, &set(&[1])).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn absent_label_is_empty_region() {
        let (v, l) = pair(vec![1.0], vec![1]);
        assert!(matches!(roi_stats(&v, &l, &set(&[999])), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn suvr_cases() {
        let (v, l) = pair(vec![2.0, 2.0, 1.0, 1.0], vec![1, 1, 2, 2]);
        assert_eq!(suvr(&v, &l, &set(&[1]), &set(&[2])).unwrap(), 2.0);
        assert_eq!(suvr(&v, &l, &set(&[1]), &set(&[1])).unwrap(), 1.0);
        let (u, l) = pair(vec![0.7; 4], vec![1, 1, 2, 3]);
        assert_eq!(suvr(&u, &l, &set(&[1]), &set(&[2, 3])).unwrap(), 1.0);
    }

    #[test]
    fn zero_reference_rejected() {
        let (v, l) = pair(vec![2.0, 0.0], vec![1, 2]);
        assert!(matches!(suvr(&v, &l, &set(&[1]), &set(&[2])), Err(Error::ZeroReference(_))));
    }

    #[test]
    fn geometry_mismatch() {
        let (v, _) = pair(vec![1.0, 2.0], vec![1, 1]);
        let g = Geometry::axis_aligned([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        let l = LabelVolume::new(g, vec![1, 1]).unwrap();
        assert!(matches!(roi_stats(&v, &l, &set(&[1])), Err(Error::GeometryMismatch(_))));
    }

    fn regions(spec: &[(&str, &[u32])]) -> RegionSet {
        RegionSet {
            name: "t".into(),
            regions: spec
                .iter()
                .map(|(n, ls)| RegionDefinition {
                    name: n.to_string(),
                    labels: set(ls),
                    hemisphere: Hemisphere::Bilateral,
                    partner: None,
                })
                .collect(),
        }
    }

    #[test]
    fn table_flags_empty_rows() {
        let (v, l) = pair(vec![1.8, 1.8, 0.9, 5.0], vec![10, 10, 20, 30]);
        let rs = regions(&[("a", &[10]), ("missing", &[11]), ("c", &[30])]);
        let rows = regional_suvr_table(&v, &l, &rs, &set(&[20])).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].suvr.unwrap() - 2.0).abs() < 1e-6);
        assert!(rows[1].empty && rows[1].suvr.is_none());
        assert!(rows[2].single_voxel);

        let mut buf = Vec::new();
        write_regional_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "label_set,name,voxels,volume_mm3,mean,sd,suvr,empty");
        assert_eq!(lines[2], "11,missing,0,,,,,true");
    }

    #[test]
    fn exclusion_mask_drops_voxels() {
        let (v, l) = pair(vec![1.0, 5.0, 1.0], vec![1, 1, 2]);
        let stats = LabelStatistics::compute(&v, &l, Some(&[false, true, false])).unwrap();
        assert_eq!(stats.region(&set(&[1])).unwrap().mean, 1.0);
    }

    #[test]
    fn partner_validation() {
        let mut rs = regions(&[("R", &[1]), ("L", &[2]), ("M", &[3])]);
        rs.regions[0].partner = Some("L".into());
        assert!(rs.validate().is_err());
        rs.regions[1].partner = Some("R".into());
        rs.regions[2].hemisphere = Hemisphere::Midline;
        rs.validate().unwrap();
        let map = rs.partner_map();
        assert_eq!(map[&1], 2);
        assert_eq!(map[&2], 1);
        assert_eq!(map[&3], 3);
    }

    #[test]
    fn mask_must_be_disjoint() {
        assert!(MaskDefinition::new("m", set(&[1, 2]), set(&[2])).is_err());
        assert!(MaskDefinition::new("m", set(&[]), set(&[2])).is_err());
        MaskDefinition::new("m", set(&[1]), set(&[2])).unwrap();
    }
}
