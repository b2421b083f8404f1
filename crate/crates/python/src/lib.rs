//! Python bindings for the detection engine.
//!
//! Exposes the pipeline in-process: schema fitting and antigen encoding,
//! detector generation and classification, clonal maturation, the
//! dendritic-cell algorithm, and the detector lifecycle.
//!
//! Usage from Python:
//!
//!     from ais_py import Schema, DetectorSet, run_dca
//!     schema = Schema.fit([{"x": "1.0", "proto": "tcp"}, ...])
//!     detectors, attempts, coverage = DetectorSet.generate_nsa(
//!         self_vectors, self_radius=0.05, target_count=100,
//!         radius=0.05, seed=42)
//!     nonself, matched = detectors.classify(schema.encode(record))

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ais_core::clonal::{run_maturation, MaturationConfig, Population, ValidationSet};
use ais_core::dca::{classify_mcav, run_dca as core_run_dca, FusionWeights, McavVerdict, SignalFrame};
use ais_core::lifecycle::{evolve as core_evolve, GeneLibrary, LifecyclePolicy};
use ais_core::negsel::{self, DetectorSet as CoreDetectorSet, SelfSet};
use ais_core::representation::{self, Antigen, FeatureSchema, RawRecord};
use ais_core::synth::{generate as synth_generate, ScenarioSpec};

fn err(e: ais_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn record_from_dict(record: &HashMap<String, String>, index: usize) -> RawRecord {
    let id = record.get("id").cloned().unwrap_or_else(|| index.to_string());
    let mut fields: Vec<(String, String)> = record
        .iter()
        .filter(|(k, _)| k.as_str() != "id")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    fields.sort();
    RawRecord::new(id, fields)
}

/// A fitted feature schema: bounds, vocabularies, and the encoding space.
#[pyclass]
struct Schema {
    inner: FeatureSchema,
}

#[pymethods]
impl Schema {
    /// Fit over records given as dicts of raw string values. An `id` key
    /// is treated as identity, not a feature.
    #[staticmethod]
    fn fit(records: Vec<HashMap<String, String>>) -> PyResult<Self> {
        let raw: Vec<RawRecord> = records
            .iter()
            .enumerate()
            .map(|(i, r)| record_from_dict(r, i))
            .collect();
        Ok(Self { inner: representation::fit_schema(&raw).map_err(err)? })
    }

    /// Encode one record into a normalized vector.
    fn encode(&self, record: HashMap<String, String>) -> PyResult<Vec<f64>> {
        let raw = record_from_dict(&record, 0);
        Ok(representation::encode(&raw, &self.inner).map_err(err)?.vector)
    }

    /// Encode and quantize into a bit-string such as "10110100".
    #[pyo3(signature = (record, bits_per_feature=8))]
    fn encode_bits(&self, record: HashMap<String, String>, bits_per_feature: u32) -> PyResult<String> {
        let raw = record_from_dict(&record, 0);
        let antigen = representation::encode(&raw, &self.inner).map_err(err)?;
        Ok(representation::to_bits(&antigen, bits_per_feature).map_err(err)?.to_string())
    }

    fn dimensionality(&self) -> usize {
        self.inner.dimensionality()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(Self { inner: FeatureSchema::from_json(doc).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Schema(features={}, dims={})", self.inner.features.len(), self.inner.dimensionality())
    }
}

/// A censored hypersphere detector set.
#[pyclass]
struct DetectorSet {
    inner: CoreDetectorSet,
}

#[pymethods]
impl DetectorSet {
    /// Fixed-radius negative selection. Returns (set, attempts,
    /// estimated_coverage or None).
    #[staticmethod]
    #[pyo3(signature = (self_vectors, self_radius=0.05, target_count=500, radius=0.05, seed=42, max_attempts=None, schema_fingerprint=""))]
    #[allow(clippy::too_many_arguments)]
    fn generate_nsa(
        self_vectors: Vec<Vec<f64>>,
        self_radius: f64,
        target_count: usize,
        radius: f64,
        seed: u64,
        max_attempts: Option<u64>,
        schema_fingerprint: &str,
    ) -> PyResult<(Self, u64, Option<f64>)> {
        let self_set = SelfSet::new(self_vectors, self_radius).map_err(err)?;
        let budget = max_attempts.unwrap_or(100 * target_count as u64);
        let (set, outcome) =
            negsel::generate_nsa(&self_set, target_count, radius, seed, budget, schema_fingerprint)
                .map_err(err)?;
        Ok((Self { inner: set }, outcome.attempts, outcome.estimated_coverage))
    }

    /// Variable-radius V-detector generation toward an estimated nonself
    /// coverage. Returns (set, attempts, estimated_coverage or None).
    #[staticmethod]
    #[pyo3(signature = (self_vectors, self_radius=0.05, target_coverage=0.95, seed=42, max_attempts=50_000, schema_fingerprint=""))]
    fn generate_vdetector(
        self_vectors: Vec<Vec<f64>>,
        self_radius: f64,
        target_coverage: f64,
        seed: u64,
        max_attempts: u64,
        schema_fingerprint: &str,
    ) -> PyResult<(Self, u64, Option<f64>)> {
        let self_set = SelfSet::new(self_vectors, self_radius).map_err(err)?;
        let (set, outcome) = negsel::generate_vdetector(
            &self_set,
            target_coverage,
            seed,
            max_attempts,
            schema_fingerprint,
        )
        .map_err(err)?;
        Ok((Self { inner: set }, outcome.attempts, outcome.estimated_coverage))
    }

    /// Classify one vector: (is_nonself, matched detector ids). Matching
    /// detectors' match counts are incremented.
    fn classify(&mut self, vector: Vec<f64>) -> PyResult<(bool, Vec<u64>)> {
        let result = self.inner.classify(&Antigen::new("", vector)).map_err(err)?;
        Ok((result.nonself, result.matched))
    }

    /// Mature the set against labeled validation vectors (true = nonself).
    /// Returns per-generation (generation, best_fitness, mean_fitness).
    #[pyo3(signature = (self_vectors, self_radius, validation_vectors, validation_labels, n_select=5, beta=1.0, rho=3.0, d_replace=2, generations=50, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn mature(
        &mut self,
        self_vectors: Vec<Vec<f64>>,
        self_radius: f64,
        validation_vectors: Vec<Vec<f64>>,
        validation_labels: Vec<bool>,
        n_select: usize,
        beta: f64,
        rho: f64,
        d_replace: usize,
        generations: usize,
        seed: u64,
    ) -> PyResult<Vec<(u64, f64, f64)>> {
        let self_set = SelfSet::new(self_vectors, self_radius).map_err(err)?;
        let antigens: Vec<Antigen> = validation_vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| Antigen::new(i.to_string(), v))
            .collect();
        let validation = ValidationSet::new(&antigens, &validation_labels).map_err(err)?;
        let cfg = MaturationConfig { n_select, beta, rho, d_replace, generations, rng_seed: seed };
        let gen_params = self.inner.params.clone();
        let population = Population::from_detector_set(&self.inner, &validation).map_err(err)?;
        let (population, history) =
            run_maturation(population, &validation, &cfg, &self_set, &gen_params, None)
                .map_err(err)?;
        self.inner = population.into_detector_set(self.inner.clone());
        Ok(history
            .into_iter()
            .map(|s| (s.generation, s.best_fitness, s.mean_fitness))
            .collect())
    }

    /// One evolution pass against a drifted self sample. Returns a
    /// turnover summary dict.
    #[pyo3(signature = (library, new_self_vectors, self_radius, max_age=50, min_matches_by_age=1, library_seed_fraction=0.5, seed_mutation_scale=0.05, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn evolve(
        &mut self,
        library: &mut Library,
        new_self_vectors: Vec<Vec<f64>>,
        self_radius: f64,
        max_age: u64,
        min_matches_by_age: u64,
        library_seed_fraction: f64,
        seed_mutation_scale: f64,
        seed: u64,
    ) -> PyResult<BTreeMap<String, u64>> {
        let current_self = SelfSet::new(new_self_vectors, self_radius).map_err(err)?;
        let policy = LifecyclePolicy {
            max_age,
            min_matches_by_age,
            library_seed_fraction,
            seed_mutation_scale,
            ..LifecyclePolicy::default()
        };
        let (set, lib, summary) = core_evolve(
            self.inner.clone(),
            library.inner.clone(),
            &current_self,
            &policy,
            seed,
        )
        .map_err(err)?;
        self.inner = set;
        library.inner = lib;
        Ok(BTreeMap::from([
            ("generation".into(), summary.generation),
            ("original".into(), summary.original as u64),
            ("kept".into(), summary.kept as u64),
            ("invalidated".into(), summary.invalidated as u64),
            ("pruned".into(), summary.pruned as u64),
            ("archived".into(), summary.archived as u64),
            ("seeded_library".into(), summary.seeded_library as u64),
            ("seeded_random".into(), summary.seeded_random as u64),
            ("unfilled".into(), summary.unfilled as u64),
        ]))
    }

    /// Detector genotypes as (id, center, radius, match_count) tuples.
    fn detectors(&self) -> Vec<(u64, Vec<f64>, f64, u64)> {
        self.inner
            .detectors
            .iter()
            .map(|d| (d.id, d.center.clone(), d.radius, d.match_count))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json(None).map_err(err)
    }

    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreDetectorSet::from_json(doc).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.detectors.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "DetectorSet(detectors={}, dims={}, generation={})",
            self.inner.detectors.len(),
            self.inner.dims,
            self.inner.generation,
        )
    }
}

/// The gene library of remembered detector genotypes.
#[pyclass]
struct Library {
    inner: GeneLibrary,
}

#[pymethods]
impl Library {
    #[new]
    #[pyo3(signature = (capacity=256))]
    fn new(capacity: usize) -> PyResult<Self> {
        Ok(Self { inner: GeneLibrary::new(capacity).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json(None).map_err(err)
    }

    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(Self { inner: GeneLibrary::from_json(doc).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Library(entries={}, capacity={})", self.inner.len(), self.inner.capacity())
    }
}

/// Euclidean distance between two vectors.
#[pyfunction]
fn euclidean(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    representation::euclidean(&a, &b).map_err(err)
}

/// Count of differing bits between equal-length bit-strings like "1010".
#[pyfunction]
fn hamming(a: &str, b: &str) -> PyResult<u64> {
    let a: representation::BitString = a.parse().map_err(err)?;
    let b: representation::BitString = b.parse().map_err(err)?;
    representation::hamming(&a, &b).map_err(err)
}

/// True iff the bit-strings agree on at least r consecutive positions.
#[pyfunction]
fn r_contiguous(r: usize, a: &str, b: &str) -> PyResult<bool> {
    let a: representation::BitString = a.parse().map_err(err)?;
    let b: representation::BitString = b.parse().map_err(err)?;
    representation::r_contiguous(r, &a, &b).map_err(err)
}

/// Run the dendritic-cell algorithm over (timestamp, pamp, danger, safe,
/// antigen_ids) frames. Returns {antigen_id: {"total", "mature", "mcav",
/// "verdict"}} where mcav is None until the antigen has been presented.
#[pyfunction]
#[pyo3(signature = (frames, pool_size=20, threshold_low=5.0, threshold_high=15.0, seed=42, anomaly_threshold=0.5))]
fn run_dca(
    py: Python<'_>,
    frames: Vec<(u64, f64, f64, f64, Vec<String>)>,
    pool_size: usize,
    threshold_low: f64,
    threshold_high: f64,
    seed: u64,
    anomaly_threshold: f64,
) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let frames: Vec<SignalFrame> = frames
        .into_iter()
        .map(|(ts, pamp, danger, safe, ids)| {
            SignalFrame::new(ts, pamp, danger, safe, ids.into_iter().collect::<BTreeSet<_>>())
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let (table, _) = core_run_dca(
        &frames,
        pool_size,
        (threshold_low, threshold_high),
        seed,
        &FusionWeights::default(),
    )
    .map_err(err)?;
    let verdicts = classify_mcav(&table, anomaly_threshold);

    let mut out = BTreeMap::new();
    for (id, entry) in &table.entries {
        let item = pyo3::types::PyDict::new(py);
        item.set_item("total", entry.presentations_total)?;
        item.set_item("mature", entry.presentations_mature)?;
        item.set_item("mcav", entry.mcav())?;
        let verdict = match verdicts[id] {
            McavVerdict::Anomalous => "anomalous",
            McavVerdict::Normal => "normal",
            McavVerdict::NoVerdict => "no-verdict",
        };
        item.set_item("verdict", verdict)?;
        out.insert(id.clone(), item.into_any().unbind());
    }
    Ok(out)
}

/// Generate the synthetic benchmark scenario. Returns a dict with
/// self_train, traffic, labels, and frames.
#[pyfunction]
#[pyo3(signature = (seed=42, dims=2, n_self_train=500, n_self_test=200, n_anomaly_test=200))]
fn synth_scenario(
    py: Python<'_>,
    seed: u64,
    dims: usize,
    n_self_train: usize,
    n_self_test: usize,
    n_anomaly_test: usize,
) -> PyResult<Py<PyAny>> {
    let spec = ScenarioSpec {
        seed,
        dims,
        n_self_train,
        n_self_test,
        n_anomaly_test,
        ..ScenarioSpec::default()
    };
    let data = synth_generate(&spec).map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("self_train", data.self_train)?;
    out.set_item("traffic", data.traffic)?;
    out.set_item("labels", data.labels)?;
    let frames: Vec<(u64, f64, f64, f64, Vec<String>)> = data
        .frames
        .into_iter()
        .map(|f| {
            (f.timestamp, f.pamp, f.danger, f.safe, f.active_antigens.into_iter().collect())
        })
        .collect();
    out.set_item("frames", frames)?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn ais_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Schema>()?;
    m.add_class::<DetectorSet>()?;
    m.add_class::<Library>()?;
    m.add_function(wrap_pyfunction!(euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(r_contiguous, m)?)?;
    m.add_function(wrap_pyfunction!(run_dca, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scenario, m)?)?;
    Ok(())
}
