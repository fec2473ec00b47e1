use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use facehall::degrade::DegradationParams;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Decibel value as JSON; infinite PSNR is written as `"inf"`.
pub fn db(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn degradation_json(p: &DegradationParams) -> Value {
    json!({
        "psf_dims": [p.psf.dims().height, p.psf.dims().width],
        "psf_anchor": [p.psf.anchor().0, p.psf.anchor().1],
        "psf_kernel": p.psf.kernel(),
        "scale": p.d,
        "noise_sigma": p.noise_sigma,
    })
}

/// Reproducibility block attached to every report.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: Value,
    pub seeds: Value,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl Provenance {
    pub fn new(command: &'static str, params: Value) -> Self {
        Provenance {
            tool: "facehall",
            version: env!("CARGO_PKG_VERSION"),
            command,
            params,
            seeds: json!({}),
            inputs: Vec::new(),
        }
    }

    pub fn seeds(mut self, seeds: Value) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<String> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256.clone(),
        });
        Ok(sha256)
    }
}

pub fn write_report(path: Option<&Path>, provenance: Provenance, mut body: Value) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    if let Value::Object(map) = &mut body {
        map.insert("provenance".into(), serde_json::to_value(provenance)?);
    }
    let mut text = serde_json::to_string_pretty(&body)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing report {}", path.display()))
}
