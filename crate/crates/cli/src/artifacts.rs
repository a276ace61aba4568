//! Output directory bookkeeping. Every file carries the config hash and is
//! listed in `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use magrest_core::config::ProjectConfig;
use magrest_core::lti::FrequencyResponse;
use magrest_core::plot::bode_svg;

use crate::Format;

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path, cfg: &ProjectConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), hash: cfg.hash(), files: Vec::new(), warnings: Vec::new() })
    }

    pub fn note(&self) -> String {
        format!("config_hash={}", self.hash)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// CSV body behind a `# config_hash=…` comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# {}\n{body}", self.note());
        self.write(name, &text)
    }

    /// Objects get a `config_hash` member; anything else is wrapped.
    pub fn json(&mut self, name: &str, value: Value) -> Result<()> {
        let value = match value {
            Value::Object(mut m) => {
                m.insert("config_hash".into(), Value::String(self.hash.clone()));
                Value::Object(m)
            }
            other => json!({ "config_hash": self.hash, "data": other }),
        };
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body)
    }

    /// One frequency response as `<stem>.csv`, `.json` or `.svg`.
    pub fn frf(&mut self, stem: &str, fr: &FrequencyResponse, format: Format, title: &str) -> Result<()> {
        match format {
            Format::Csv => self.csv(&format!("{stem}.csv"), &fr.to_csv()),
            Format::Json => self.json(&format!("{stem}.json"), frf_json(fr)),
            Format::Svg => {
                let svg = bode_svg(fr, title, Some(&self.note()))?;
                self.svg(&format!("{stem}.svg"), &svg)
            }
        }
    }

    /// Writes the effective config and the manifest.
    pub fn finish(mut self, command: &str, cfg: &ProjectConfig, overrides: &[String]) -> Result<()> {
        let config = serde_json::to_value(cfg)?;
        self.json("effective_config.json", json!({ "overrides": overrides, "config": config }))?;
        let manifest = json!({
            "command": command,
            "config_hash": self.hash,
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.files,
            "warnings": self.warnings,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn frf_json(fr: &FrequencyResponse) -> Value {
    json!({
        "freq_hz": fr.freqs_hz,
        "mag_db": fr.magnitudes_db(),
        "phase_deg": fr.phases_deg_unwrapped(),
        "real": fr.values.iter().map(|v| v.re).collect::<Vec<_>>(),
        "imag": fr.values.iter().map(|v| v.im).collect::<Vec<_>>(),
    })
}
