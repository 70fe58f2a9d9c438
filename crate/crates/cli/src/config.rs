//! Experiment configuration: TOML (or JSON) with every field optional.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dpslab::diffusion::DiffusionConfig;
use dpslab::instance::{Instance, InstanceParams, OneWayCandidate};
use dpslab::reduction::random_circuit_owf;
use dpslab::circuit::BooleanCircuit;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub trials: usize,
    pub samples: usize,
    pub instance: InstanceParams,
    pub candidate: CandidateConfig,
    pub sampler: SamplerConfig,
    pub diffusion: Option<DiffusionConfig>,
    pub approx: ApproxConfig,
    pub bench: BenchConfig,
    pub demo2d: Demo2dConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            jobs: 1,
            trials: 200,
            samples: 1000,
            instance: InstanceParams::canonical(4, 4),
            candidate: CandidateConfig::default(),
            sampler: SamplerConfig::default(),
            diffusion: None,
            approx: ApproxConfig::default(),
            bench: BenchConfig::default(),
            demo2d: Demo2dConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateConfig {
    /// identity, random, constant, or file
    pub kind: String,
    pub gates: usize,
    pub seed: u64,
    /// Output value for `constant`, +1 or -1.
    pub value: i8,
    pub path: Option<PathBuf>,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            kind: "identity".into(),
            gates: 0,
            seed: 1,
            value: 1,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// brute-force, rejection, or heuristic
    pub kind: String,
    pub max_rounds: u64,
    /// Unconditional score for diffusion: exact, orthant, regime, or bank
    pub score: String,
    /// Network bank file used when `score = "bank"`.
    pub bank: Option<PathBuf>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: "brute-force".into(),
            max_rounds: 1_000_000,
            score: "exact".into(),
            bank: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    /// mixture, gaussian, or discretized
    pub family: String,
    pub sigmas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub draws: usize,
    /// Lattice spacing for the discretized family.
    pub eps: f64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            family: "mixture".into(),
            sigmas: vec![0.5, 1.0],
            kappas: vec![0.04, 0.01],
            draws: 100_000,
            eps: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub betas: Vec<f64>,
    pub ms: Vec<usize>,
    pub trials: usize,
    /// Budget for actual rejection runs; omitted means exact rounds only.
    pub empirical_rounds: Option<u64>,
    /// Also run the inversion comparison between samplers.
    pub hardness: bool,
    pub hardness_trials: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.1],
            ms: vec![1, 2, 3, 4],
            trials: 1000,
            empirical_rounds: None,
            hardness: false,
            hardness_trials: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Demo2dConfig {
    pub y: f64,
    pub steps: usize,
    pub max_rounds: u64,
}

impl Default for Demo2dConfig {
    fn default() -> Self {
        Self {
            y: 4.0,
            steps: 1000,
            max_rounds: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.instance.validate().context("instance")?;
        if self.jobs == 0 {
            bail!("jobs: must be at least 1");
        }
        if self.trials == 0 {
            bail!("trials: must be at least 1");
        }
        if self.samples == 0 {
            bail!("samples: must be at least 1");
        }
        if !["identity", "random", "constant", "file"].contains(&self.candidate.kind.as_str()) {
            bail!("candidate.kind: unknown `{}`", self.candidate.kind);
        }
        if !["brute-force", "rejection", "heuristic"].contains(&self.sampler.kind.as_str()) {
            bail!("sampler.kind: unknown `{}`", self.sampler.kind);
        }
        if !["exact", "orthant", "regime", "bank"].contains(&self.sampler.score.as_str()) {
            bail!("sampler.score: unknown `{}`", self.sampler.score);
        }
        if self.sampler.max_rounds == 0 {
            bail!("sampler.max_rounds: must be at least 1");
        }
        if let Some(d) = &self.diffusion {
            d.validate().context("diffusion")?;
        }
        if !["mixture", "gaussian", "discretized"].contains(&self.approx.family.as_str()) {
            bail!("approx.family: unknown `{}`", self.approx.family);
        }
        Ok(())
    }

    pub fn candidate(&self) -> Result<OneWayCandidate> {
        let p = &self.instance;
        let c = &self.candidate;
        let f = match c.kind.as_str() {
            "identity" => {
                if p.d != p.d_prime {
                    bail!("candidate.kind = identity needs d = d_prime");
                }
                OneWayCandidate::identity(p.d)
            }
            "random" => {
                let gates = if c.gates == 0 { 3 * p.d_prime } else { c.gates };
                random_circuit_owf(p.d, p.d_prime, gates, c.seed)?
            }
            "constant" => OneWayCandidate::constant(p.d, p.d_prime, c.value)?,
            "file" => {
                let path = c.path.as_ref().context("candidate.path is required for kind = file")?;
                load_candidate(path)?
            }
            other => bail!("candidate.kind: unknown `{other}`"),
        };
        Ok(f)
    }

    pub fn instance(&self) -> Result<Instance> {
        Ok(Instance::new(self.instance, self.candidate()?)?)
    }

    pub fn diffusion_config(&self) -> Result<DiffusionConfig> {
        match self.diffusion {
            Some(d) => Ok(d),
            None => {
                let p = &self.instance;
                // Second moment of one head coordinate dominates.
                let m2 = if p.d > 0 { p.r * p.r + 1.0 } else { 1.0 };
                Ok(DiffusionConfig::for_second_moment(m2)?)
            }
        }
    }
}

pub fn load_candidate(path: &Path) -> Result<OneWayCandidate> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(OneWayCandidate::new(BooleanCircuit::from_text(&text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("seeds = 3").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[instance]\nd = 2\nd_prime = 2\nR = 30\neps = 1\nbeta = 0.1\nbeta_max = 0.25\ngamma = 1").is_err());
        let c: ExperimentConfig = toml::from_str("seed = 9\n[sampler]\nkind = \"rejection\"").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.sampler.kind, "rejection");
    }
}
