//! Feature matrices, standardization and cohort CSV files.
//!
//! Cohort CSV layout: `time,event[,truth][,feature_0,...]`, `event` in {0,1},
//! one subject per row.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::SurvivalRecord;

/// Dense row-major n×m matrix of subject features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::invalid(format!(
                "feature matrix {n}x{m} needs {} values, got {}",
                n * m,
                data.len()
            )));
        }
        Ok(Self { n, m, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![0.0; n * m],
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            m: self.m,
            data,
        }
    }
}

/// Per-feature z-scoring. Constant features get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &FeatureMatrix) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::invalid("cannot fit standardizer on zero rows"));
        }
        let m = features.cols();
        let mut mean = vec![0.0; m];
        for i in 0..n {
            for (mu, x) in mean.iter_mut().zip(features.row(i)) {
                *mu += x;
            }
        }
        mean.iter_mut().for_each(|mu| *mu /= n as f64);
        let mut var = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                let d = features.get(i, j) - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} features, got {}",
                self.mean.len(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out.set(i, j, (features.get(i, j) - self.mean[j]) / self.scale[j]);
            }
        }
        Ok(out)
    }
}

/// Subjects with survival outcomes, features and optional known groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub features: FeatureMatrix,
    pub records: Vec<SurvivalRecord>,
    pub truth: Option<Vec<usize>>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn censoring_rate(&self) -> f64 {
        let censored = self.records.iter().filter(|r| !r.event).count();
        censored as f64 / self.records.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        if self.truth.is_some() {
            header.push("truth".to_string());
        }
        header.extend((0..self.features.cols()).map(|j| format!("feature_{j}")));
        w.write_record(&header)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![r.time.to_string(), u8::from(r.event).to_string()];
            if let Some(t) = &self.truth {
                row.push(t[i].to_string());
            }
            row.extend(self.features.row(i).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let time_col = find("time").ok_or_else(|| Error::Data("missing `time` column".into()))?;
        let event_col = find("event").ok_or_else(|| Error::Data("missing `event` column".into()))?;
        let truth_col = find("truth");
        let feature_cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim().starts_with("feature_"))
            .map(|(i, _)| i)
            .collect();

        let mut records = Vec::new();
        let mut truth = truth_col.map(|_| Vec::new());
        let mut data = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let field = |c: usize| row.get(c).unwrap_or("").trim();
            let parse_f = |c: usize| -> Result<f64> {
                field(c).parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {}: cannot parse `{}` as a number", line + 1, field(c)))
                })
            };
            let time = parse_f(time_col)?;
            let event = match field(event_col) {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Data(format!(
                        "row {}: event must be 0 or 1, got `{other}`",
                        line + 1
                    )))
                }
            };
            records.push(SurvivalRecord::new(time, event).map_err(|e| {
                Error::Data(format!("row {}: {e}", line + 1))
            })?);
            if let (Some(c), Some(t)) = (truth_col, truth.as_mut()) {
                let v = field(c).parse::<usize>().map_err(|_| {
                    Error::Data(format!("row {}: truth must be a non-negative integer", line + 1))
                })?;
                t.push(v);
            }
            for &c in &feature_cols {
                data.push(parse_f(c)?);
            }
        }
        let features = FeatureMatrix::new(records.len(), feature_cols.len(), data)?;
        Ok(Self {
            features,
            records,
            truth,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
