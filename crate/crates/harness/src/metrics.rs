//! Per-epoch metric files.
//!
//! Layout: a `#`-prefixed preamble (`key=value` lines carrying the schema
//! version, config hash, seed and algorithm), then a CSV header and one row
//! per epoch. Any column change requires bumping [`SCHEMA_VERSION`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gdq_core::train::EpochMetrics;

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 10] = [
    "epoch",
    "success_rate",
    "avg_reward",
    "avg_steps",
    "collision_pct",
    "avg_landmark_distance",
    "episode_steps",
    "env_steps",
    "epsilon",
    "mean_loss",
];

/// Columns that [`crate::aggregate`] summarizes.
pub const SUMMARY_METRICS: [&str; 5] = [
    "success_rate",
    "avg_reward",
    "avg_steps",
    "collision_pct",
    "avg_landmark_distance",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub algorithm: String,
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_preamble(w: &mut impl Write, p: &Provenance) -> std::io::Result<()> {
    writeln!(w, "# schema={}", p.schema)?;
    writeln!(w, "# config_hash={}", p.config_hash)?;
    writeln!(w, "# seed={}", p.seed)?;
    writeln!(w, "# algorithm={}", p.algorithm)
}

/// Streams rows to disk, flushing after each so a crashed run keeps its
/// completed epochs.
pub struct MetricsWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    pub fn create(path: &Path, p: &Provenance) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut buf = BufWriter::new(file);
        write_preamble(&mut buf, p).map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(COLUMNS).map_err(|e| csv_err(path, e))?;
        inner.flush().map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, m: &EpochMetrics) -> Result<(), HarnessError> {
        self.inner.write_record(row(m)).map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().map_err(io_err(&self.path))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub fn row(m: &EpochMetrics) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        m.success_rate.to_string(),
        m.avg_reward.to_string(),
        m.avg_steps.to_string(),
        m.collision_pct.to_string(),
        m.avg_landmark_distance.to_string(),
        m.episode_steps.to_string(),
        m.env_steps.to_string(),
        m.epsilon.to_string(),
        m.mean_loss.to_string(),
    ]
}

/// A parsed metric file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsFile {
    pub provenance: Provenance,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricsFile {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_preamble(path: &Path) -> Result<Provenance, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut schema = None;
    let mut hash = None;
    let mut seed = None;
    let mut algorithm = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once('=') {
            match k {
                "schema" => schema = v.parse().ok(),
                "config_hash" => hash = Some(v.to_string()),
                "seed" => seed = v.parse().ok(),
                "algorithm" => algorithm = v.to_string(),
                _ => {}
            }
        }
    }
    let bad = |what: &str| HarnessError::Config(format!("{}: missing or invalid {what} in preamble", path.display()));
    Ok(Provenance {
        schema: schema.ok_or_else(|| bad("schema"))?,
        config_hash: hash.ok_or_else(|| bad("config_hash"))?,
        seed: seed.ok_or_else(|| bad("seed"))?,
        algorithm,
    })
}

pub fn read_metrics(path: &Path) -> Result<MetricsFile, HarnessError> {
    let provenance = read_preamble(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        rows.push(vals);
    }
    Ok(MetricsFile {
        provenance,
        header,
        rows,
    })
}

/// Trailing moving average: entry `t` averages `xs[t+1-w ..= t]`, using the
/// available prefix for the first `w - 1` entries.
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (t, &x) in xs.iter().enumerate() {
        sum += x;
        if t >= w {
            sum -= xs[t - w];
        }
        out.push(sum / (t + 1).min(w) as f64);
    }
    out
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
