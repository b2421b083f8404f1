//! Detector generation by negative selection.
//!
//! Candidate detectors are drawn uniformly from `[0,1]^d` and censored
//! against the self set: any candidate whose hypersphere overlaps a self
//! sample (plus its `self_radius` halo) is discarded. Two variants are
//! provided: fixed-radius generation toward a target count, and the
//! variable-radius V-detector scheme where each detector stretches to its
//! nearest self sample and generation stops once an estimated fraction of
//! nonself space is covered.
//!
//! Determinism contract: all candidate centers come from a single
//! `ChaCha8Rng` seeded with the configured seed, drawing one `f64` in
//! `[0,1)` per dimension in dimension order, one candidate at a time.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::representation::{euclidean, Antigen, FeatureSchema};
use crate::{Error, Result};

/// Current on-disk detector-set document version.
pub const DETECTOR_SET_VERSION: u32 = 1;

/// Sliding-window length for the coverage estimator.
pub const COVERAGE_WINDOW: usize = 100;

/// How a detector came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorOrigin {
    Random,
    LibrarySeeded,
    Clonal,
}

/// A hypersphere detector in normalized feature space, with lifecycle
/// metadata. Matching is closed-ball: a point on the boundary matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub id: u64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub birth_generation: u64,
    pub match_count: u64,
    pub origin: DetectorOrigin,
}

impl Detector {
    /// Closed-ball membership test.
    pub fn covers(&self, point: &[f64]) -> Result<bool> {
        Ok(euclidean(&self.center, point).map_err(|_| Error::Dimension {
            expected: self.center.len(),
            got: point.len(),
        })? <= self.radius)
    }
}

/// The normal-behavior training samples plus the variability halo around
/// each of them.
#[derive(Debug, Clone)]
pub struct SelfSet {
    samples: Vec<Vec<f64>>,
    self_radius: f64,
}

impl SelfSet {
    pub fn new(samples: Vec<Vec<f64>>, self_radius: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("self set must be non-empty".into()));
        }
        if !(self_radius >= 0.0) {
            return Err(Error::Input(format!(
                "self_radius must be >= 0, got {self_radius}"
            )));
        }
        let dims = samples[0].len();
        if dims == 0 {
            return Err(Error::Input("self samples must have at least one dimension".into()));
        }
        for s in &samples {
            if s.len() != dims {
                return Err(Error::Dimension { expected: dims, got: s.len() });
            }
        }
        Ok(Self { samples, self_radius })
    }

    pub fn from_antigens(antigens: &[Antigen], self_radius: f64) -> Result<Self> {
        Self::new(antigens.iter().map(|a| a.vector.clone()).collect(), self_radius)
    }

    pub fn dims(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn self_radius(&self) -> f64 {
        self.self_radius
    }

    /// Distance from `point` to the nearest self sample.
    pub fn nearest_distance(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dims() {
            return Err(Error::Dimension { expected: self.dims(), got: point.len() });
        }
        let mut best = f64::INFINITY;
        for s in &self.samples {
            let d = euclidean(s, point)?;
            if d < best {
                best = d;
            }
        }
        Ok(best)
    }
}

/// Censoring test: returns true (reject) iff the candidate ball overlaps
/// any self sample's halo, i.e. some self sample lies within
/// `radius + self_radius` of the center. The boundary counts as overlap.
pub fn censor_point(center: &[f64], radius: f64, self_set: &SelfSet) -> Result<bool> {
    if center.len() != self_set.dims() {
        return Err(Error::Dimension { expected: self_set.dims(), got: center.len() });
    }
    let limit = radius + self_set.self_radius;
    for s in self_set.samples() {
        if euclidean(center, s)? <= limit {
            return Ok(true);
        }
    }
    Ok(false)
}

/// [`censor_point`] over a full detector.
pub fn censor(candidate: &Detector, self_set: &SelfSet) -> Result<bool> {
    censor_point(&candidate.center, candidate.radius, self_set)
}

/// Generation variant tag, persisted with the detector set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fixed,
    Vdetector,
}

/// Parameters a detector set was generated under, persisted for
/// provenance and reused when the lifecycle tops the set back up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub variant: Variant,
    pub seed: u64,
    pub self_radius: f64,
    pub radius: Option<f64>,
    pub target_count: Option<usize>,
    pub target_coverage: Option<f64>,
    pub max_attempts: u64,
}

/// What a generation run achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub attempts: u64,
    pub admitted: usize,
    /// Fraction of the last [`COVERAGE_WINDOW`] nonself candidate points
    /// (outside the self halo) already covered by existing detectors;
    /// `None` until the window fills.
    pub estimated_coverage: Option<f64>,
}

/// An immutable set of censored detectors bound to the feature schema
/// that produced their space.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSet {
    pub detectors: Vec<Detector>,
    pub schema_fingerprint: String,
    pub dims: usize,
    /// Lifecycle generation counter, incremented by each evolution pass.
    pub generation: u64,
    pub next_id: u64,
    pub params: GenerationParams,
}

#[derive(Serialize, Deserialize)]
struct DetectorSetDoc {
    schema_version: u32,
    schema_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_digest: Option<String>,
    dims: usize,
    generation: u64,
    next_id: u64,
    params: GenerationParams,
    detectors: Vec<Detector>,
}

/// Verdict plus the detectors that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub nonself: bool,
    pub matched: Vec<u64>,
}

impl DetectorSet {
    /// Fails with a mismatch error unless the set was generated under the
    /// given schema.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        let got = schema.fingerprint();
        if self.schema_fingerprint != got {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                got,
            });
        }
        Ok(())
    }

    /// Ids of every detector covering `vector`, ascending. Pure; the
    /// reference path any accelerated index must agree with exactly.
    pub fn matches(&self, vector: &[f64]) -> Result<Vec<u64>> {
        if vector.len() != self.dims {
            return Err(Error::Dimension { expected: self.dims, got: vector.len() });
        }
        let mut ids: Vec<u64> = self
            .detectors
            .iter()
            .filter_map(|d| match d.covers(vector) {
                Ok(true) => Some(d.id),
                _ => None,
            })
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }

    /// Classify one antigen, incrementing the match count of every
    /// detector that covers it.
    pub fn classify(&mut self, antigen: &Antigen) -> Result<Classification> {
        let matched = self.matches(&antigen.vector)?;
        self.bump_matches(&matched);
        Ok(Classification { nonself: !matched.is_empty(), matched })
    }

    /// Classify a batch. Matching runs in parallel over an immutable view;
    /// match-count updates are applied by this single owner afterwards,
    /// in batch order, so results are independent of thread count.
    pub fn classify_batch(&mut self, antigens: &[Antigen]) -> Result<Vec<Classification>> {
        let matched: Vec<Vec<u64>> = antigens
            .par_iter()
            .map(|a| self.matches(&a.vector))
            .collect::<Result<_>>()?;
        for ids in &matched {
            self.bump_matches(ids);
        }
        Ok(matched
            .into_iter()
            .map(|m| Classification { nonself: !m.is_empty(), matched: m })
            .collect())
    }

    fn bump_matches(&mut self, ids: &[u64]) {
        if ids.is_empty() {
            return;
        }
        let by_id: BTreeMap<u64, usize> = self
            .detectors
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id, i))
            .collect();
        for id in ids {
            if let Some(&i) = by_id.get(id) {
                self.detectors[i].match_count += 1;
            }
        }
    }

    pub fn to_json(&self, config_digest: Option<&str>) -> Result<String> {
        let doc = DetectorSetDoc {
            schema_version: DETECTOR_SET_VERSION,
            schema_fingerprint: self.schema_fingerprint.clone(),
            config_digest: config_digest.map(|s| s.to_string()),
            dims: self.dims,
            generation: self.generation,
            next_id: self.next_id,
            params: self.params.clone(),
            detectors: self.detectors.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let doc: DetectorSetDoc = serde_json::from_str(doc)?;
        if doc.schema_version != DETECTOR_SET_VERSION {
            return Err(Error::Config(format!(
                "unsupported detector-set version {}",
                doc.schema_version
            )));
        }
        Ok(Self {
            detectors: doc.detectors,
            schema_fingerprint: doc.schema_fingerprint,
            dims: doc.dims,
            generation: doc.generation,
            next_id: doc.next_id,
            params: doc.params,
        })
    }
}

/// Radius below which a V-detector candidate is rejected outright.
pub(crate) fn v_candidate_radius(center: &[f64], self_set: &SelfSet) -> Result<f64> {
    Ok(self_set.nearest_distance(center)? - self_set.self_radius())
}

enum AdmissionRule {
    /// Admit any censored candidate at this radius, whether or not an
    /// existing detector already covers the point (plain NSA).
    FixedRadius(f64),
    /// Skip candidates already covered; stretch the rest to their nearest
    /// self sample (V-detector).
    NearestSelf,
}

enum StopRule {
    Count(usize),
    Coverage(f64),
}

fn run_generation(
    self_set: &SelfSet,
    rule: AdmissionRule,
    stop: StopRule,
    seed: u64,
    max_attempts: u64,
    schema_fingerprint: &str,
    params: GenerationParams,
) -> Result<(DetectorSet, GenerationOutcome)> {
    if max_attempts == 0 {
        return Err(Error::Input("max_attempts must be positive".into()));
    }
    let dims = self_set.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut detectors: Vec<Detector> = Vec::new();
    let mut next_id: u64 = 0;
    let mut window: VecDeque<bool> = VecDeque::with_capacity(COVERAGE_WINDOW);
    let mut window_covered: usize = 0;
    let mut attempts: u64 = 0;

    let coverage_of = |window: &VecDeque<bool>, covered: usize| -> Option<f64> {
        (window.len() == COVERAGE_WINDOW).then(|| covered as f64 / COVERAGE_WINDOW as f64)
    };

    loop {
        if let StopRule::Count(target) = stop {
            if detectors.len() >= target {
                break;
            }
        }
        if attempts >= max_attempts {
            break;
        }
        attempts += 1;

        let center: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let covered = detectors
            .iter()
            .any(|d| euclidean(&d.center, &center).map(|dist| dist <= d.radius).unwrap_or(false));
        let nearest = self_set.nearest_distance(&center)?;

        // Coverage is estimated over nonself space: candidates inside the
        // self halo can never be covered by a censored detector, so they
        // stay out of the window.
        if nearest > self_set.self_radius() {
            if window.len() == COVERAGE_WINDOW && window.pop_front() == Some(true) {
                window_covered -= 1;
            }
            window.push_back(covered);
            if covered {
                window_covered += 1;
            }
        }

        match rule {
            AdmissionRule::FixedRadius(radius) => {
                // Censoring test: reject iff some self sample lies within
                // radius + self_radius, i.e. nearest <= radius + self_radius.
                if nearest > radius + self_set.self_radius() {
                    detectors.push(Detector {
                        id: next_id,
                        center,
                        radius,
                        birth_generation: 0,
                        match_count: 0,
                        origin: DetectorOrigin::Random,
                    });
                    next_id += 1;
                }
            }
            AdmissionRule::NearestSelf => {
                if !covered {
                    let radius = nearest - self_set.self_radius();
                    if radius > 0.0 {
                        detectors.push(Detector {
                            id: next_id,
                            center,
                            radius,
                            birth_generation: 0,
                            match_count: 0,
                            origin: DetectorOrigin::Random,
                        });
                        next_id += 1;
                    }
                }
            }
        }

        if let StopRule::Coverage(target) = stop {
            if let Some(frac) = coverage_of(&window, window_covered) {
                if frac >= target {
                    break;
                }
            }
        }
    }

    if detectors.is_empty() {
        return Err(Error::Coverage { attempts });
    }

    let outcome = GenerationOutcome {
        attempts,
        admitted: detectors.len(),
        estimated_coverage: coverage_of(&window, window_covered),
    };
    let set = DetectorSet {
        detectors,
        schema_fingerprint: schema_fingerprint.to_string(),
        dims,
        generation: 0,
        next_id,
        params,
    };
    Ok((set, outcome))
}

/// Fixed-radius negative selection: draw random candidates, censor against
/// self, keep up to `target_count`. Deterministic given the seed; stops at
/// `max_attempts` total candidates and reports the achieved count.
pub fn generate_nsa(
    self_set: &SelfSet,
    target_count: usize,
    radius: f64,
    seed: u64,
    max_attempts: u64,
    schema_fingerprint: &str,
) -> Result<(DetectorSet, GenerationOutcome)> {
    if target_count == 0 {
        return Err(Error::Input("target_count must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Input(format!("radius must be positive, got {radius}")));
    }
    let params = GenerationParams {
        variant: Variant::Fixed,
        seed,
        self_radius: self_set.self_radius(),
        radius: Some(radius),
        target_count: Some(target_count),
        target_coverage: None,
        max_attempts,
    };
    run_generation(
        self_set,
        AdmissionRule::FixedRadius(radius),
        StopRule::Count(target_count),
        seed,
        max_attempts,
        schema_fingerprint,
        params,
    )
}

/// Fixed-radius negative selection run until the sliding-window coverage
/// estimator reaches `target_coverage`. This is the comparison harness for
/// detector-count experiments against the V-detector variant.
pub fn generate_nsa_coverage(
    self_set: &SelfSet,
    radius: f64,
    target_coverage: f64,
    seed: u64,
    max_attempts: u64,
    schema_fingerprint: &str,
) -> Result<(DetectorSet, GenerationOutcome)> {
    if !(radius > 0.0) {
        return Err(Error::Input(format!("radius must be positive, got {radius}")));
    }
    check_coverage_target(target_coverage)?;
    let params = GenerationParams {
        variant: Variant::Fixed,
        seed,
        self_radius: self_set.self_radius(),
        radius: Some(radius),
        target_count: None,
        target_coverage: Some(target_coverage),
        max_attempts,
    };
    run_generation(
        self_set,
        AdmissionRule::FixedRadius(radius),
        StopRule::Coverage(target_coverage),
        seed,
        max_attempts,
        schema_fingerprint,
        params,
    )
}

/// V-detector generation: each admitted detector stretches to its nearest
/// self sample (`radius = nearest distance - self_radius`, rejected when
/// that is not positive). Terminates once the fraction of the last
/// [`COVERAGE_WINDOW`] nonself candidates already covered reaches
/// `target_coverage`, or at `max_attempts`.
pub fn generate_vdetector(
    self_set: &SelfSet,
    target_coverage: f64,
    seed: u64,
    max_attempts: u64,
    schema_fingerprint: &str,
) -> Result<(DetectorSet, GenerationOutcome)> {
    check_coverage_target(target_coverage)?;
    let params = GenerationParams {
        variant: Variant::Vdetector,
        seed,
        self_radius: self_set.self_radius(),
        radius: None,
        target_count: None,
        target_coverage: Some(target_coverage),
        max_attempts,
    };
    run_generation(
        self_set,
        AdmissionRule::NearestSelf,
        StopRule::Coverage(target_coverage),
        seed,
        max_attempts,
        schema_fingerprint,
        params,
    )
}

fn check_coverage_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Input(format!(
            "target_coverage must lie in (0,1), got {target}"
        )));
    }
    Ok(())
}

/// Draw one random censored detector under the generation params that
/// produced a set. Used by maturation replacement and lifecycle top-up.
/// Returns `None` if no candidate is admitted within `max_tries`.
pub fn random_censored_detector(
    self_set: &SelfSet,
    params: &GenerationParams,
    rng: &mut ChaCha8Rng,
    max_tries: u64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let dims = self_set.dims();
    for _ in 0..max_tries {
        let center: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        match params.variant {
            Variant::Fixed => {
                let radius = params.radius.ok_or_else(|| {
                    Error::Config("fixed variant requires a radius".into())
                })?;
                if !censor_point(&center, radius, self_set)? {
                    return Ok(Some((center, radius)));
                }
            }
            Variant::Vdetector => {
                let radius = v_candidate_radius(&center, self_set)?;
                if radius > 0.0 {
                    return Ok(Some((center, radius)));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_params() -> GenerationParams {
        GenerationParams {
            variant: Variant::Fixed,
            seed: 0,
            self_radius: 0.0,
            radius: Some(0.1),
            target_count: Some(1),
            target_coverage: None,
            max_attempts: 100,
        }
    }

    fn detector(center: Vec<f64>, radius: f64) -> Detector {
        Detector {
            id: 0,
            center,
            radius,
            birth_generation: 0,
            match_count: 0,
            origin: DetectorOrigin::Random,
        }
    }

    #[test]
    fn censor_rejects_contained_sample() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.6]], 0.0).unwrap();
        let cand = detector(vec![0.5, 0.5], 0.2);
        assert!(censor(&cand, &self_set).unwrap());
    }

    #[test]
    fn censor_accepts_distant_sample() {
        let self_set = SelfSet::new(vec![vec![0.9, 0.9]], 0.0).unwrap();
        let cand = detector(vec![0.0, 0.0], 0.1);
        assert!(!censor(&cand, &self_set).unwrap());
    }

    #[test]
    fn censor_boundary_counts_as_overlap() {
        let self_set = SelfSet::new(vec![vec![0.0, 0.0]], 0.2).unwrap();
        let cand = detector(vec![0.5, 0.0], 0.3);
        assert!(censor(&cand, &self_set).unwrap());
    }

    #[test]
    fn censor_dimension_mismatch() {
        let self_set = SelfSet::new(vec![vec![0.0, 0.0]], 0.0).unwrap();
        assert!(matches!(
            censor_point(&[0.5], 0.1, &self_set),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn nsa_censors_every_detector() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let (set, outcome) = generate_nsa(&self_set, 10, 0.1, 42, 10_000, "fp").unwrap();
        assert_eq!(set.detectors.len(), 10);
        assert_eq!(outcome.admitted, 10);
        // Independent linear-scan check of the censoring property.
        for d in &set.detectors {
            let dist = euclidean(&d.center, &[0.5, 0.5]).unwrap();
            assert!(dist > d.radius + 0.05, "detector {} overlaps self", d.id);
            assert!(dist > 0.15);
        }
    }

    #[test]
    fn nsa_same_seed_same_set() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let (a, _) = generate_nsa(&self_set, 25, 0.08, 7, 10_000, "fp").unwrap();
        let (b, _) = generate_nsa(&self_set, 25, 0.08, 7, 10_000, "fp").unwrap();
        assert_eq!(a.detectors, b.detectors);
    }

    #[test]
    fn nsa_coverage_error_when_self_fills_space() {
        // A fine grid over [0,1]^2 with a huge halo leaves no admissible candidate.
        let mut samples = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                samples.push(vec![i as f64 / 5.0, j as f64 / 5.0]);
            }
        }
        let self_set = SelfSet::new(samples, 0.8).unwrap();
        match generate_nsa(&self_set, 10, 0.1, 1, 500, "fp") {
            Err(Error::Coverage { attempts }) => assert_eq!(attempts, 500),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn v_radius_rule() {
        let self_set = SelfSet::new(vec![vec![0.0, 0.0]], 0.1).unwrap();
        assert_eq!(v_candidate_radius(&[0.5, 0.0], &self_set).unwrap(), 0.4);
        // Would-be radius is negative: candidate rejected by the caller.
        assert!(v_candidate_radius(&[0.05, 0.0], &self_set).unwrap() < 0.0);
    }

    #[test]
    fn vdetector_tightness() {
        let self_set =
            SelfSet::new(vec![vec![0.5, 0.5], vec![0.4, 0.6], vec![0.6, 0.4]], 0.05).unwrap();
        let (set, _) = generate_vdetector(&self_set, 0.9, 3, 50_000, "fp").unwrap();
        assert!(!set.detectors.is_empty());
        for d in &set.detectors {
            let nearest = self_set.nearest_distance(&d.center).unwrap();
            assert!((d.radius + 0.05 - nearest).abs() < 1e-9);
        }
    }

    #[test]
    fn classify_inside_boundary_and_outside() {
        let mut set = DetectorSet {
            detectors: vec![
                Detector { id: 3, ..detector(vec![0.2, 0.2], 0.1) },
                Detector { id: 7, ..detector(vec![0.5, 0.2], 0.25) },
            ],
            schema_fingerprint: "fp".into(),
            dims: 2,
            generation: 0,
            next_id: 8,
            params: fixed_params(),
        };

        // Inside the first detector only.
        let inside = set.classify(&Antigen::new("a", vec![0.2, 0.25])).unwrap();
        assert!(inside.nonself);
        assert_eq!(inside.matched, vec![3]);

        // Exactly on the boundary of detector 7: distance == radius.
        let boundary = set.classify(&Antigen::new("b", vec![0.75, 0.2])).unwrap();
        assert!(boundary.nonself);
        assert_eq!(boundary.matched, vec![7]);

        // Covered by nothing.
        let clear = set.classify(&Antigen::new("c", vec![0.9, 0.9])).unwrap();
        assert!(!clear.nonself);
        assert!(clear.matched.is_empty());

        assert_eq!(set.detectors[0].match_count, 1);
        assert_eq!(set.detectors[1].match_count, 1);
    }

    #[test]
    fn classify_dimension_mismatch() {
        let mut set = DetectorSet {
            detectors: vec![detector(vec![0.2, 0.2], 0.1)],
            schema_fingerprint: "fp".into(),
            dims: 2,
            generation: 0,
            next_id: 1,
            params: fixed_params(),
        };
        assert!(matches!(
            set.classify(&Antigen::new("a", vec![0.1])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn detector_set_json_round_trip() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let (set, _) = generate_nsa(&self_set, 5, 0.1, 11, 10_000, "fp").unwrap();
        let doc = set.to_json(Some("digest")).unwrap();
        let back = DetectorSet::from_json(&doc).unwrap();
        assert_eq!(set, back);
    }
}
