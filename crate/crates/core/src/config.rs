//! Engine configuration.
//!
//! One TOML document configures every stage; each section falls back to
//! its defaults when omitted. A sha-256 digest of the resolved
//! configuration stamps all artifacts for provenance.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clonal::MaturationConfig;
use crate::dca::FusionWeights;
use crate::lifecycle::LifecyclePolicy;
use crate::negsel::Variant;
use crate::synth::ScenarioSpec;
use crate::{Error, Result};

/// Which immune-theory branch drives detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Selfnonself,
    Danger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepresentationConfig {
    pub bits_per_feature: u32,
    /// Encode unknown categories as all-zeros one-hot (with a warning)
    /// instead of failing.
    pub lenient: bool,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self { bits_per_feature: 8, lenient: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegselConfig {
    pub variant: Variant,
    pub radius: f64,
    pub self_radius: f64,
    pub target_count: usize,
    pub target_coverage: f64,
    pub seed: u64,
    /// Candidate budget; defaults to `100 * target_count` when unset.
    pub max_attempts: Option<u64>,
}

impl NegselConfig {
    pub fn effective_max_attempts(&self) -> u64 {
        self.max_attempts.unwrap_or(100 * self.target_count as u64)
    }
}

impl Default for NegselConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Fixed,
            radius: 0.05,
            self_radius: 0.05,
            target_count: 500,
            target_coverage: 0.95,
            seed: 42,
            max_attempts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClonalConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub maturation: MaturationConfig,
    /// Emit a population snapshot into the maturation log every this
    /// many generations.
    pub snapshot_interval: usize,
}

impl Default for ClonalConfig {
    fn default() -> Self {
        Self { enabled: false, maturation: MaturationConfig::default(), snapshot_interval: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcaConfig {
    #[serde(flatten)]
    pub weights: FusionWeights,
    pub pool_size: usize,
    pub threshold_low: f64,
    pub threshold_high: f64,
    pub anomaly_threshold: f64,
    pub seed: u64,
}

impl Default for DcaConfig {
    fn default() -> Self {
        Self {
            weights: FusionWeights::default(),
            pool_size: 20,
            threshold_low: 5.0,
            threshold_high: 15.0,
            anomaly_threshold: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifecycleConfig {
    #[serde(flatten)]
    pub policy: LifecyclePolicy,
    /// Gene-library capacity.
    pub capacity: usize,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self { policy: LifecyclePolicy::default(), capacity: 256 }
    }
}

/// The resolved engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub mode: Mode,
    pub representation: RepresentationConfig,
    pub negsel: NegselConfig,
    pub clonal: ClonalConfig,
    pub dca: DcaConfig,
    pub lifecycle: LifecycleConfig,
    pub synth: ScenarioSpec,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Selfnonself,
            representation: RepresentationConfig::default(),
            negsel: NegselConfig::default(),
            clonal: ClonalConfig::default(),
            dca: DcaConfig::default(),
            lifecycle: LifecycleConfig::default(),
            synth: ScenarioSpec::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(doc).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let doc = std::fs::read_to_string(path)?;
        Self::from_toml_str(&doc)
    }

    /// Route a single `--seed` override into every seed-bearing section.
    pub fn override_seed(&mut self, seed: u64) {
        self.negsel.seed = seed;
        self.clonal.maturation.rng_seed = seed;
        self.dca.seed = seed;
        self.synth.seed = seed;
    }

    /// Provenance stamp written into every artifact.
    pub fn digest(&self) -> String {
        let doc = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(doc.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(digest.len() * 2);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.negsel;
        if !(n.radius > 0.0) {
            return Err(Error::Config(format!("negsel.radius must be positive, got {}", n.radius)));
        }
        if !(n.self_radius >= 0.0) {
            return Err(Error::Config(format!(
                "negsel.self_radius must be >= 0, got {}",
                n.self_radius
            )));
        }
        if n.target_count == 0 {
            return Err(Error::Config("negsel.target_count must be positive".into()));
        }
        if !(n.target_coverage > 0.0 && n.target_coverage < 1.0) {
            return Err(Error::Config(format!(
                "negsel.target_coverage must lie in (0,1), got {}",
                n.target_coverage
            )));
        }
        let d = &self.dca;
        if d.pool_size == 0 {
            return Err(Error::Config("dca.pool_size must be positive".into()));
        }
        if !(d.threshold_low > 0.0 && d.threshold_high >= d.threshold_low) {
            return Err(Error::Config(format!(
                "dca threshold range must satisfy 0 < low <= high, got [{}, {}]",
                d.threshold_low, d.threshold_high
            )));
        }
        if !(0.0..=1.0).contains(&d.anomaly_threshold) {
            return Err(Error::Config(format!(
                "dca.anomaly_threshold must lie in [0,1], got {}",
                d.anomaly_threshold
            )));
        }
        if self.representation.bits_per_feature == 0 || self.representation.bits_per_feature > 32 {
            return Err(Error::Config(
                "representation.bits_per_feature must lie in 1..=32".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lifecycle.policy.library_seed_fraction) {
            return Err(Error::Config(format!(
                "lifecycle.library_seed_fraction must lie in [0,1], got {}",
                self.lifecycle.policy.library_seed_fraction
            )));
        }
        if self.lifecycle.capacity == 0 {
            return Err(Error::Config("lifecycle.capacity must be positive".into()));
        }
        self.synth.validate()?;
        Ok(())
    }
}
