//! Artifact emission: deterministic CSV text, gnuplot-ready .dat
//! companions, and a JSON run manifest.
//!
//! CSV bytes depend only on the resolved configuration and seed — wall
//! clock readings live in the manifest, never in the CSV.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// One named pass/fail check performed by an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Record of one emitted file for the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub description: String,
    pub rows: usize,
}

/// Collects artifacts and assertions for a run, writing files under the
/// output directory as they are produced.
pub struct RunOutput {
    dir: PathBuf,
    pub artifacts: Vec<ArtifactRecord>,
    pub assertions: Vec<Assertion>,
    /// Extra experiment-specific numbers for the manifest.
    pub notes: serde_json::Map<String, serde_json::Value>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            assertions: Vec::new(),
            notes: serde_json::Map::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write a CSV artifact and its gnuplot twin (`name.csv` + `name.dat`).
    pub fn write_table(&mut self, name: &str, csv: &str, description: &str) -> Result<()> {
        let csv_path = self.dir.join(format!("{name}.csv"));
        fs::write(&csv_path, csv)
            .with_context(|| format!("cannot write {}", csv_path.display()))?;
        let dat_path = self.dir.join(format!("{name}.dat"));
        fs::write(&dat_path, csv_to_dat(csv))
            .with_context(|| format!("cannot write {}", dat_path.display()))?;
        let rows = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .count()
            .saturating_sub(1); // header line
        self.artifacts.push(ArtifactRecord {
            file: format!("{name}.csv"),
            description: description.to_string(),
            rows,
        });
        self.artifacts.push(ArtifactRecord {
            file: format!("{name}.dat"),
            description: format!("gnuplot companion of {name}.csv"),
            rows,
        });
        Ok(())
    }

    /// Write a raw (non-tabular) artifact, e.g. a binary field dump.
    pub fn write_raw(&mut self, name: &str, bytes: &[u8], description: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.artifacts.push(ArtifactRecord {
            file: name.to_string(),
            description: description.to_string(),
            rows: 0,
        });
        Ok(())
    }

    pub fn assert_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }

    pub fn note(&mut self, key: &str, value: serde_json::Value) {
        self.notes.insert(key.to_string(), value);
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Write `manifest.json`: config echo, resolved parameters, artifact
    /// index, assertion results, and wall-clock timings.
    pub fn write_manifest(
        &self,
        experiment: &str,
        config_echo: &serde_json::Value,
        resolved: &serde_json::Value,
        seed: u64,
        wallclock_s: f64,
    ) -> Result<()> {
        let manifest = serde_json::json!({
            "experiment": experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "threads": rayon::current_num_threads(),
            "config": config_echo,
            "resolved": resolved,
            "artifacts": self.artifacts,
            "assertions": self.assertions,
            "notes": serde_json::Value::Object(self.notes.clone()),
            "wallclock_s": wallclock_s,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Convert CSV text to gnuplot .dat: `#` comments pass through, the
/// header row becomes a comment, commas become single spaces.
fn csv_to_dat(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    let mut header_done = false;
    for line in csv.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            out.push_str(line);
        } else if !header_done {
            header_done = true;
            out.push_str("# ");
            out.push_str(&line.replace(',', " "));
        } else {
            out.push_str(&line.replace(',', " "));
        }
        out.push('\n');
    }
    out
}

/// Format a float the way all tables do.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}
