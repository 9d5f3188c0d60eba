use std::path::{Path, PathBuf};

use rand::seq::index;

use super::stream_rng;
use crate::error::{Error, Result};

/// Environment variable naming the directory relative dataset paths resolve against.
pub const DATA_DIR_ENV: &str = "DUALSEED_DATA_DIR";

/// Points in `R^d`, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::parse(
                    k + 1,
                    format!("expected {dim} coordinates, found {}", row.len()),
                ));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(k + 1, "non-finite coordinate"));
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub has_header: bool,
    /// Keep `count` rows chosen uniformly with `seed`, in file order.
    pub subsample: Option<(usize, u64)>,
}

/// Resolves a relative path against `$DUALSEED_DATA_DIR` when that is set.
pub fn resolve_dataset_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() && !path.exists() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Reads a CSV of numeric rows. Errors carry the 1-based file line.
pub fn load_points(path: &Path, opts: &LoadOptions) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::parse(
                    line,
                    format!("not a finite number: {field:?}"),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::parse(
                    line,
                    format!("expected {d} fields, found {}", row.len()),
                ))
            }
            Some(_) => {}
        }
        rows.push(row);
    }

    if let Some((count, seed)) = opts.subsample {
        if count < rows.len() {
            let mut keep = index::sample(&mut stream_rng(seed, 0), rows.len(), count).into_vec();
            keep.sort_unstable();
            let mut all: Vec<Option<Vec<f64>>> = rows.into_iter().map(Some).collect();
            rows = keep.into_iter().filter_map(|k| all[k].take()).collect();
        }
    }
    PointSet::new(rows)
}

pub fn save_points(path: &Path, points: &PointSet) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in &points.rows {
        writer.write_record(row.iter().map(|x| format!("{x:?}")))?;
    }
    writer.flush()?;
    Ok(())
}
