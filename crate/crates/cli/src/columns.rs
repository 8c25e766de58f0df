use atnquant::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

fn wrap(path: &Path, e: impl Into<Error>) -> Error {
    e.into().in_file(path)
}

/// A small CSV table read as text, with typed column accessors.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| wrap(path, e))?;
        let headers = rdr.headers().map_err(|e| wrap(path, e))?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(|e| wrap(path, e))?;
        Ok(Self { headers, rows })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column {name:?}")))
    }

    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("row {}: column {name:?} is not a number", r + 1)))
            })
            .collect()
    }

    pub fn text(&self, name: &str) -> Result<Vec<String>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|row| row[i].clone()).collect())
    }

    /// Values of `value` grouped by `group`, groups in first-seen order.
    pub fn groups(&self, group: &str, value: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let keys = self.text(group)?;
        let values = self.numbers(value)?;
        let mut order = Vec::new();
        let mut map: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (k, v) in keys.into_iter().zip(values) {
            if !map.contains_key(&k) {
                order.push(k.clone());
            }
            map.entry(k).or_default().push(v);
        }
        Ok(order
            .into_iter()
            .map(|k| {
                let v = map.remove(&k).unwrap_or_default();
                (k, v)
            })
            .collect())
    }
}
