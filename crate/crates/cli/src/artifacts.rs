//! Artifact file formats and helpers shared by the commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ais_core::dca::{McavTable, McavVerdict};
use ais_core::negsel::DetectorSet;
use ais_core::representation::FeatureSchema;
use ais_core::{Error, Result};

pub const SCHEMA_FILE: &str = "schema.json";
pub const DETECTORS_FILE: &str = "detectors.json";
pub const LIBRARY_FILE: &str = "library.json";
pub const ALERTS_FILE: &str = "alerts.jsonl";
pub const MCAV_FILE: &str = "mcav.json";
pub const REPORT_FILE: &str = "report.json";
pub const MATURATION_FILE: &str = "maturation.jsonl";

/// One line of the alerts file: a nonself antigen and the detectors that
/// matched it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlertRecord {
    pub id: String,
    pub detectors: Vec<u64>,
}

/// The mcav.json document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McavDoc {
    pub schema_version: u32,
    pub config_digest: String,
    pub anomaly_threshold: f64,
    pub antigens: BTreeMap<String, McavDocEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McavDocEntry {
    pub presentations_total: u64,
    pub presentations_mature: u64,
    pub mcav: Option<f64>,
    pub verdict: McavVerdict,
}

impl McavDoc {
    pub fn build(
        table: &McavTable,
        verdicts: &BTreeMap<String, McavVerdict>,
        anomaly_threshold: f64,
        config_digest: String,
    ) -> Self {
        let antigens = table
            .entries
            .iter()
            .map(|(id, entry)| {
                (
                    id.clone(),
                    McavDocEntry {
                        presentations_total: entry.presentations_total,
                        presentations_mature: entry.presentations_mature,
                        mcav: entry.mcav(),
                        verdict: verdicts[id],
                    },
                )
            })
            .collect();
        Self { schema_version: 1, config_digest, anomaly_threshold, antigens }
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Write a schema artifact, stamped with the config digest. The stamp is
/// an extra top-level field the schema parser ignores.
pub fn write_schema(path: &Path, schema: &FeatureSchema, config_digest: &str) -> Result<()> {
    let mut doc: serde_json::Value = serde_json::from_str(&schema.to_json()?)?;
    doc.as_object_mut()
        .expect("schema document is an object")
        .insert("config_digest".into(), serde_json::Value::String(config_digest.into()));
    write_text(path, &serde_json::to_string_pretty(&doc)?)
}

pub fn load_schema(path: &Path) -> Result<FeatureSchema> {
    let doc = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    FeatureSchema::from_json(&doc)
}

pub fn load_detectors(path: &Path) -> Result<DetectorSet> {
    let doc = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    DetectorSet::from_json(&doc)
}

/// Schema path: explicit flag, or `schema.json` next to the detector file.
pub fn sibling_schema(detectors: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    match explicit {
        Some(path) => path.clone(),
        None => detectors
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(SCHEMA_FILE),
    }
}
