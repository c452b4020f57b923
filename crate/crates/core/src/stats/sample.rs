use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::{Initial, Metric, QueueParams};

/// Provenance of a sample array.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "M", default)]
    pub m: usize,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<QueueParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prng: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

/// Finite i.i.d. samples with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub meta: SampleMeta,
}

#[derive(Debug, Deserialize)]
struct Row {
    #[allow(dead_code)]
    index: usize,
    cost: f64,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, mut meta: SampleMeta) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("sample contains non-finite values"));
        }
        meta.m = values.len();
        Ok(Self { values, meta })
    }

    pub fn from_values(values: Vec<f64>, label: &str) -> Result<Self> {
        Self::new(
            values,
            SampleMeta {
                label: label.to_string(),
                ..SampleMeta::default()
            },
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `index,cost` rows; values keep full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,cost\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar; returns the CSV path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.meta)? + "\n",
        )?;
        Ok(csv)
    }

    /// Reads a CSV written by [`SampleSet::write`], picking up the sidecar if present.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(csv_path)?;
        let mut values = Vec::new();
        for row in reader.deserialize::<Row>() {
            values.push(row?.cost);
        }
        let sidecar = csv_path.with_extension("json");
        let meta = if sidecar.exists() {
            serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?
        } else {
            SampleMeta {
                label: csv_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                ..SampleMeta::default()
            }
        };
        Self::new(values, meta)
    }
}
