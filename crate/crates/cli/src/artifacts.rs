//! Output directory handling. Every file carries the config hash; the
//! manifest lists files with their digests, and wall-clock timing goes to a
//! separate `timing.json` so the other artifacts stay byte-reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const HASH_KEY: &str = "config_sha256";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of the resolved configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

pub struct Run {
    dir: PathBuf,
    subcommand: String,
    cfg: ExperimentConfig,
    hash: String,
    files: BTreeMap<String, String>,
    timing: BTreeMap<String, f64>,
}

impl Run {
    pub fn new(dir: &Path, subcommand: &str, cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand: subcommand.into(),
            cfg: cfg.clone(),
            hash: config_hash(cfg)?,
            files: BTreeMap::new(),
            timing: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.into(), sha256_hex(body.as_bytes()));
        Ok(())
    }

    /// CSV with a `# config_sha256=…` first line, then the header.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut body = format!("# {HASH_KEY}={}\n{}\n", self.hash, header.join(","));
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        self.write(name, body)
    }

    /// JSON object with the hash added under `config_sha256`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(m) = &mut v {
            m.insert(HASH_KEY.into(), Value::String(self.hash.clone()));
        } else {
            v = json!({ "value": v, HASH_KEY: self.hash });
        }
        self.write(name, serde_json::to_string_pretty(&v)? + "\n")
    }

    /// Plain text whose format accepts `#` comment lines.
    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, format!("# {HASH_KEY}={}\n{body}", self.hash))
    }

    pub fn time(&mut self, key: &str, secs: f64) {
        self.timing.insert(key.into(), secs);
    }

    pub fn finish(mut self) -> Result<()> {
        let manifest = json!({
            "tool": "dpslab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "seed": self.cfg.seed,
            HASH_KEY: self.hash,
            "config": self.cfg,
            "files": self.files,
        });
        let timing = json!({ HASH_KEY: self.hash, "seconds": self.timing });
        let tpath = self.dir.join("timing.json");
        fs::write(&tpath, serde_json::to_string_pretty(&timing)? + "\n")?;
        self.write("manifest.json", serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

/// Re-derives the config hash of a finished run and checks every listed
/// file. Returns one message per problem.
pub fn check_run(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join("manifest.json")).context("reading manifest.json")?;
    let manifest: Value = serde_json::from_str(&text)?;
    let mut problems = Vec::new();
    let cfg: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).context("manifest config")?;
    let hash = config_hash(&cfg)?;
    if manifest[HASH_KEY] != Value::String(hash.clone()) {
        problems.push("manifest hash does not match its config".to_string());
    }
    let files = manifest["files"].as_object().cloned().unwrap_or_default();
    for (name, digest) in files {
        let Ok(body) = fs::read(dir.join(&name)) else {
            problems.push(format!("{name}: missing"));
            continue;
        };
        if Value::String(sha256_hex(&body)) != digest {
            problems.push(format!("{name}: digest mismatch"));
        }
        let s = String::from_utf8_lossy(&body);
        if !s.contains(&hash) {
            problems.push(format!("{name}: config hash not embedded"));
        }
    }
    Ok(problems)
}
