//! Deterministic synthetic scenarios.
//!
//! The generator produces a complete benchmark workload: gaussian self
//! clusters for training and testing, anomaly clusters, ground-truth
//! labels, and a correlated signal stream where anomaly-heavy windows
//! raise PAMP/danger and quiet windows raise safe. Everything derives
//! from one seeded ChaCha stream, so outputs are byte-identical per seed.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dca::SignalFrame;
use crate::{Error, Result};

/// One gaussian blob, clipped to the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: Vec<f64>,
    pub std_dev: f64,
}

/// Scenario parameters; the `[synth]` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub dims: usize,
    pub seed: u64,
    pub n_self_train: usize,
    pub n_self_test: usize,
    pub n_anomaly_test: usize,
    pub self_clusters: Vec<ClusterSpec>,
    pub anomaly_clusters: Vec<ClusterSpec>,
    /// Traffic rows per signal frame.
    pub window: usize,
    pub pamp_scale: f64,
    pub danger_scale: f64,
    pub safe_scale: f64,
    /// When set, also emit a drifted self sample: self clusters shifted
    /// by this per-dimension offset.
    pub drift_offset: Option<Vec<f64>>,
    pub n_self_drift: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            dims: 2,
            seed: 42,
            n_self_train: 500,
            n_self_test: 200,
            n_anomaly_test: 200,
            self_clusters: vec![ClusterSpec { center: vec![0.3, 0.3], std_dev: 0.08 }],
            anomaly_clusters: vec![ClusterSpec { center: vec![0.75, 0.75], std_dev: 0.06 }],
            window: 10,
            pamp_scale: 1.0,
            danger_scale: 0.5,
            safe_scale: 1.0,
            drift_offset: None,
            n_self_drift: 500,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Input("synth.dims must be positive".into()));
        }
        if self.n_self_train == 0 {
            return Err(Error::Input("synth.n_self_train must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Input("synth.window must be positive".into()));
        }
        if self.self_clusters.is_empty() {
            return Err(Error::Input("synth needs at least one self cluster".into()));
        }
        if self.n_anomaly_test > 0 && self.anomaly_clusters.is_empty() {
            return Err(Error::Input(
                "synth.n_anomaly_test > 0 requires an anomaly cluster".into(),
            ));
        }
        for (group, clusters) in
            [("self", &self.self_clusters), ("anomaly", &self.anomaly_clusters)]
        {
            for c in clusters.iter() {
                if c.center.len() != self.dims {
                    return Err(Error::Input(format!(
                        "{group} cluster center has {} dims, scenario has {}",
                        c.center.len(),
                        self.dims
                    )));
                }
                if !(c.std_dev > 0.0 && c.std_dev.is_finite()) {
                    return Err(Error::Input(format!(
                        "{group} cluster std_dev must be positive, got {}",
                        c.std_dev
                    )));
                }
            }
        }
        for (name, v) in [
            ("pamp_scale", self.pamp_scale),
            ("danger_scale", self.danger_scale),
            ("safe_scale", self.safe_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("synth.{name} must be >= 0, got {v}")));
            }
        }
        if let Some(offset) = &self.drift_offset {
            if offset.len() != self.dims {
                return Err(Error::Input(format!(
                    "drift_offset has {} dims, scenario has {}",
                    offset.len(),
                    self.dims
                )));
            }
        }
        Ok(())
    }
}

/// One generated workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub self_train: Vec<(String, Vec<f64>)>,
    /// Shuffled mix of self-test and anomaly rows.
    pub traffic: Vec<(String, Vec<f64>)>,
    /// Ground truth per traffic id (true = anomaly), in traffic order.
    pub labels: Vec<(String, bool)>,
    pub frames: Vec<SignalFrame>,
    pub drifted_self: Option<Vec<(String, Vec<f64>)>>,
}

fn sample_cluster(cluster: &ClusterSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, cluster.std_dev).expect("validated std_dev");
    cluster
        .center
        .iter()
        .map(|&c| (c + noise.sample(rng)).clamp(0.0, 1.0))
        .collect()
}

fn sample_group(
    clusters: &[ClusterSpec],
    count: usize,
    prefix: &str,
    start: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, Vec<f64>)> {
    (0..count)
        .map(|i| {
            let cluster = &clusters[i % clusters.len()];
            (format!("{prefix}{:05}", start + i), sample_cluster(cluster, rng))
        })
        .collect()
}

/// Generate a workload from a validated spec.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let self_train = sample_group(&spec.self_clusters, spec.n_self_train, "s", 0, &mut rng);
    let self_test = sample_group(&spec.self_clusters, spec.n_self_test, "t", 0, &mut rng);
    let anomaly_test = sample_group(
        &spec.anomaly_clusters,
        spec.n_anomaly_test,
        "t",
        spec.n_self_test,
        &mut rng,
    );

    let drifted_self = match &spec.drift_offset {
        Some(offset) => {
            let drifted_clusters: Vec<ClusterSpec> = spec
                .self_clusters
                .iter()
                .map(|c| ClusterSpec {
                    center: c
                        .center
                        .iter()
                        .zip(offset)
                        .map(|(a, b)| (a + b).clamp(0.0, 1.0))
                        .collect(),
                    std_dev: c.std_dev,
                })
                .collect();
            Some(sample_group(&drifted_clusters, spec.n_self_drift, "d", 0, &mut rng))
        }
        None => None,
    };

    let mut traffic: Vec<(String, Vec<f64>, bool)> = self_test
        .into_iter()
        .map(|(id, v)| (id, v, false))
        .chain(anomaly_test.into_iter().map(|(id, v)| (id, v, true)))
        .collect();
    traffic.shuffle(&mut rng);

    let mut frames = Vec::new();
    for (window_idx, chunk) in traffic.chunks(spec.window).enumerate() {
        let anomalies = chunk.iter().filter(|(_, _, label)| *label).count();
        let frac = anomalies as f64 / chunk.len() as f64;
        let active: BTreeSet<String> = chunk.iter().map(|(id, _, _)| id.clone()).collect();
        frames.push(SignalFrame::new(
            window_idx as u64,
            spec.pamp_scale * frac,
            spec.danger_scale * frac,
            spec.safe_scale * (1.0 - frac),
            active,
        )?);
    }

    let labels: Vec<(String, bool)> =
        traffic.iter().map(|(id, _, label)| (id.clone(), *label)).collect();
    let traffic: Vec<(String, Vec<f64>)> =
        traffic.into_iter().map(|(id, v, _)| (id, v)).collect();

    Ok(SyntheticData { self_train, traffic, labels, frames, drifted_self })
}

/// File names written by [`write_csv_files`].
pub const SELF_CSV: &str = "self.csv";
pub const TRAFFIC_CSV: &str = "traffic.csv";
pub const SIGNALS_CSV: &str = "signals.csv";
pub const LABELS_CSV: &str = "labels.csv";
pub const DRIFTED_SELF_CSV: &str = "drifted_self.csv";

fn write_feature_csv(path: &Path, dims: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..dims).map(|d| format!("f{d}")));
    writer.write_record(&header)?;
    for (id, values) in rows {
        let mut row = vec![id.clone()];
        row.extend(values.iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the workload as the CSV files the other commands consume.
/// Returns the paths written.
pub fn write_csv_files(data: &SyntheticData, spec: &ScenarioSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let self_path = dir.join(SELF_CSV);
    write_feature_csv(&self_path, spec.dims, &data.self_train)?;
    written.push(self_path);

    let traffic_path = dir.join(TRAFFIC_CSV);
    write_feature_csv(&traffic_path, spec.dims, &data.traffic)?;
    written.push(traffic_path);

    let signals_path = dir.join(SIGNALS_CSV);
    {
        let mut writer = csv::Writer::from_path(&signals_path)?;
        writer.write_record(["timestamp", "pamp", "danger", "safe", "antigens"])?;
        for frame in &data.frames {
            let ids: Vec<&str> = frame.active_antigens.iter().map(|s| s.as_str()).collect();
            writer.write_record([
                frame.timestamp.to_string(),
                frame.pamp.to_string(),
                frame.danger.to_string(),
                frame.safe.to_string(),
                ids.join(";"),
            ])?;
        }
        writer.flush()?;
    }
    written.push(signals_path);

    let labels_path = dir.join(LABELS_CSV);
    {
        let mut writer = csv::Writer::from_path(&labels_path)?;
        writer.write_record(["id", "label"])?;
        for (id, anomalous) in &data.labels {
            writer.write_record([id.as_str(), if *anomalous { "anomaly" } else { "normal" }])?;
        }
        writer.flush()?;
    }
    written.push(labels_path);

    if let Some(drifted) = &data.drifted_self {
        let drifted_path = dir.join(DRIFTED_SELF_CSV);
        write_feature_csv(&drifted_path, spec.dims, drifted)?;
        written.push(drifted_path);
    }

    Ok(written)
}
