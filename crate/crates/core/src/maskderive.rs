//! Effect-size ranking of structures between two groups and the thresholded,
//! contralaterally closed composite mask built from it.

use crate::error::{Error, Result, ResultExt};
use crate::num::Real;
use crate::roi::MaskDefinition;
use crate::stats::cohens_d;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

pub const DEFAULT_THRESHOLD: f64 = 5.0;

/// Subject-by-structure SUVR matrix for one group. Columns are structures
/// identified by label.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSuvrTable<T> {
    pub labels: Vec<u32>,
    pub subjects: Vec<String>,
    pub rows: Vec<Vec<T>>,
}

impl<T: Real> GroupSuvrTable<T> {
    pub fn new(labels: Vec<u32>, subjects: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        let table = Self { labels, subjects, rows };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let unique: BTreeSet<u32> = self.labels.iter().copied().collect();
        if unique.len() != self.labels.len() {
            return Err(Error::InvalidRegion("duplicate structure label in table".into()));
        }
        if self.subjects.len() != self.rows.len() {
            return Err(Error::LengthMismatch(self.subjects.len(), self.rows.len()));
        }
        for row in &self.rows {
            if row.len() != self.labels.len() {
                return Err(Error::LengthMismatch(self.labels.len(), row.len()));
            }
        }
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

impl<T: Real + DeserializeOwned> GroupSuvrTable<T> {
    /// CSV with a `subject` column followed by one column per structure,
    /// headed by its label number.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.get(0).map(str::trim) != Some("subject") {
            return Err(Error::Config("first column of a group table must be `subject`".into()));
        }
        let labels = header
            .iter()
            .skip(1)
            .map(|h| {
                h.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Config(format!("column header {h:?} is not a label number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut subjects = Vec::new();
        let mut rows = Vec::new();
        for record in rdr.deserialize::<(String, Vec<T>)>() {
            let (subject, values) = record?;
            subjects.push(subject);
            rows.push(values);
        }
        Self::new(labels, subjects, rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).in_file(path)?;
        Self::from_csv(file).in_file(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedStructure<T> {
    pub label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `None` when the pooled standard deviation is zero.
    pub d: Option<T>,
}

impl<T: Real> RankedStructure<T> {
    pub fn flagged(&self) -> bool {
        self.d.is_none()
    }
}

/// Descending by d, ties by ascending label, flagged structures last.
pub fn sort_ranking<T: Real>(ranked: &mut [RankedStructure<T>]) {
    ranked.sort_by(|a, b| match (a.d, b.d) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(Ordering::Equal).then(a.label.cmp(&b.label)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.label.cmp(&b.label),
    });
}

/// Per-structure Cohen's d of `b` relative to `a`.
pub fn rank_structures<T: Real>(a: &GroupSuvrTable<T>, b: &GroupSuvrTable<T>) -> Result<Vec<RankedStructure<T>>> {
    a.validate()?;
    b.validate()?;
    if a.labels != b.labels {
        return Err(Error::InvalidRegion("groups have different structure lists".into()));
    }
    let mut ranked = (0..a.labels.len())
        .into_par_iter()
        .map(|j| {
            let d = match cohens_d(&a.column(j), &b.column(j)) {
                Ok(d) => Some(d),
                Err(Error::ZeroPooledSd) => None,
                Err(e) => return Err(e),
            };
            Ok(RankedStructure { label: a.labels[j], name: None, d })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_ranking(&mut ranked);
    Ok(ranked)
}

#[derive(Debug, Deserialize)]
struct DValueRow {
    label: u32,
    name: String,
    cohens_d: f64,
}

/// Ranking stored as `label,name,cohens_d` rows.
pub fn ranking_from_csv<T: Real, R: Read>(input: R) -> Result<Vec<RankedStructure<T>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut ranked = rdr
        .deserialize::<DValueRow>()
        .map(|row| {
            let row = row?;
            Ok(RankedStructure {
                label: row.label,
                name: Some(row.name),
                d: Some(T::lit(row.cohens_d)).filter(|d| d.is_finite()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_ranking(&mut ranked);
    Ok(ranked)
}

pub fn read_ranking<T: Real>(path: &Path) -> Result<Vec<RankedStructure<T>>> {
    let file = std::fs::File::open(path).in_file(path)?;
    ranking_from_csv(file).in_file(path)
}

/// The label set chosen by [`derive_mask`], split by how each label got in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedMask {
    pub labels: BTreeSet<u32>,
    pub selected: BTreeSet<u32>,
    pub added_by_symmetry: BTreeSet<u32>,
}

impl DerivedMask {
    pub fn into_mask(self, name: impl Into<String>, reference: BTreeSet<u32>) -> Result<MaskDefinition> {
        MaskDefinition::new(name, self.labels, reference)
    }
}

/// Keep structures with d strictly above `threshold`, then add the partner of
/// every kept structure.
pub fn derive_mask<T: Real>(
    ranked: &[RankedStructure<T>],
    threshold: T,
    partners: &BTreeMap<u32, u32>,
) -> Result<DerivedMask> {
    let selected: BTreeSet<u32> = ranked
        .iter()
        .filter(|s| s.d.is_some_and(|d| d > threshold))
        .map(|s| s.label)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut labels = selected.clone();
    for &l in &selected {
        let p = *partners.get(&l).ok_or(Error::MissingPartner(l))?;
        labels.insert(p);
    }
    let added_by_symmetry = labels.difference(&selected).copied().collect();
    Ok(DerivedMask {
        labels,
        selected,
        added_by_symmetry,
    })
}
