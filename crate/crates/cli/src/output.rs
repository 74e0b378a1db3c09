//! Run directory layout: metrics.csv, circuit.json, params.json, summary.json.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use qnnlab::circuit::Circuit;
use qnnlab::trainer::{MetricsRecord, MetricsWriter};

pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let p = self.path.join("metrics.csv");
        let file = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(Metrics {
            writer: MetricsWriter::new(BufWriter::new(file)),
            error: None,
        })
    }

    pub fn circuit(&self, c: &Circuit) -> Result<()> {
        self.text("circuit.json", &c.to_json()?)
    }

    pub fn params(&self, params: &[f64]) -> Result<()> {
        self.json("params.json", &params)
    }

    pub fn summary(&self, value: &serde_json::Value) -> Result<()> {
        self.json("summary.json", value)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }
}

/// Incremental metrics file. The training sink cannot fail, so the first
/// write error is kept and reported by [`Metrics::finish`].
pub struct Metrics {
    writer: MetricsWriter<BufWriter<File>>,
    error: Option<qnnlab::QnnError>,
}

impl Metrics {
    pub fn write(&mut self, r: &MetricsRecord) {
        if self.error.is_none() {
            if let Err(e) = self.writer.write(r) {
                self.error = Some(e);
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        if let Some(e) = self.error {
            return Err(e).context("writing metrics.csv");
        }
        self.writer.into_inner()?;
        Ok(())
    }
}
