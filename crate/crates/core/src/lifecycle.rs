//! Detector evolution: revalidation, pruning, and the gene library.
//!
//! As the self region drifts, detectors that now overlap it are
//! invalidated and detectors that grew old without ever matching are
//! pruned. Detectors that did catch something are remembered in a
//! bounded gene library; their genotypes pre-seed replacement candidates
//! near past attack regions, topped up with fresh random generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::negsel::{
    censor, censor_point, random_censored_detector, Detector, DetectorOrigin, DetectorSet,
    SelfSet,
};
use crate::{Error, Result};

/// Current on-disk gene-library document version.
pub const LIBRARY_VERSION: u32 = 1;

/// Attempt budget per random replacement detector.
const REPLACEMENT_TRIES: u64 = 1_000;

/// Aging and re-seeding policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifecyclePolicy {
    /// Generations a detector may live without scrutiny.
    pub max_age: u64,
    /// A detector older than `max_age` with fewer lifetime matches than
    /// this is pruned.
    pub min_matches_by_age: u64,
    /// How often (in generations) a deployment is expected to re-sample
    /// self and revalidate. Configuration surface only; the engine acts
    /// whenever the evolve entry point is invoked.
    pub revalidation_interval: u64,
    /// Fraction of replacements drawn from the gene library.
    pub library_seed_fraction: f64,
    /// Scale of the zero-mean perturbation applied to seeded genotypes.
    pub seed_mutation_scale: f64,
}

impl Default for LifecyclePolicy {
    fn default() -> Self {
        Self {
            max_age: 50,
            min_matches_by_age: 1,
            revalidation_interval: 10,
            library_seed_fraction: 0.5,
            seed_mutation_scale: 0.05,
        }
    }
}

/// A remembered detector genotype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub center: Vec<f64>,
    pub radius: f64,
    pub archived_generation: u64,
    pub lifetime_matches: u64,
}

/// Bounded archive of historically successful detectors. Eviction keeps
/// the entries with the highest lifetime match counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneLibrary {
    entries: Vec<LibraryEntry>,
    capacity: usize,
}

#[derive(Serialize, Deserialize)]
struct GeneLibraryDoc {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_digest: Option<String>,
    capacity: usize,
    entries: Vec<LibraryEntry>,
}

impl GeneLibrary {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Input("library capacity must be positive".into()));
        }
        Ok(Self { entries: Vec::new(), capacity })
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Remember a detector that detected something. Archiving a detector
    /// with zero matches is a policy error. Over capacity, the entry with
    /// the lowest lifetime matches is evicted (ties: oldest archived
    /// generation).
    pub fn archive(&mut self, detector: &Detector, generation: u64) -> Result<()> {
        if detector.match_count == 0 {
            return Err(Error::Policy(
                "refusing to archive a detector that never matched".into(),
            ));
        }
        self.entries.push(LibraryEntry {
            center: detector.center.clone(),
            radius: detector.radius,
            archived_generation: generation,
            lifetime_matches: detector.match_count,
        });
        if self.entries.len() > self.capacity {
            let evict = self
                .entries
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.lifetime_matches, e.archived_generation))
                .map(|(i, _)| i)
                .expect("library is non-empty");
            self.entries.remove(evict);
        }
        Ok(())
    }

    pub fn to_json(&self, config_digest: Option<&str>) -> Result<String> {
        let doc = GeneLibraryDoc {
            schema_version: LIBRARY_VERSION,
            config_digest: config_digest.map(|s| s.to_string()),
            capacity: self.capacity,
            entries: self.entries.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let doc: GeneLibraryDoc = serde_json::from_str(doc)?;
        if doc.schema_version != LIBRARY_VERSION {
            return Err(Error::Config(format!(
                "unsupported gene-library version {}",
                doc.schema_version
            )));
        }
        if doc.entries.len() > doc.capacity {
            return Err(Error::Config("gene library exceeds its capacity".into()));
        }
        Ok(Self { entries: doc.entries, capacity: doc.capacity })
    }
}

/// Split a detector set against an updated self sample: detectors that now
/// overlap self are invalidated; the kept set still passes censoring.
pub fn revalidate(
    mut set: DetectorSet,
    current_self: &SelfSet,
) -> Result<(DetectorSet, Vec<Detector>)> {
    if set.dims != current_self.dims() {
        return Err(Error::Dimension { expected: current_self.dims(), got: set.dims });
    }
    let mut kept = Vec::new();
    let mut invalidated = Vec::new();
    for d in std::mem::take(&mut set.detectors) {
        if censor_point(&d.center, d.radius, current_self)? {
            invalidated.push(d);
        } else {
            kept.push(d);
        }
    }
    set.detectors = kept;
    Ok((set, invalidated))
}

/// Remove detectors that aged past `max_age` generations without
/// accumulating `min_matches_by_age` lifetime matches.
pub fn prune_stale(
    mut set: DetectorSet,
    policy: &LifecyclePolicy,
    current_generation: u64,
) -> (DetectorSet, Vec<Detector>) {
    let mut kept = Vec::new();
    let mut pruned = Vec::new();
    for d in std::mem::take(&mut set.detectors) {
        let age = current_generation.saturating_sub(d.birth_generation);
        if age > policy.max_age && d.match_count < policy.min_matches_by_age {
            pruned.push(d);
        } else {
            kept.push(d);
        }
    }
    set.detectors = kept;
    (set, pruned)
}

/// Draw `count` candidates from the library: pick an entry uniformly,
/// perturb its center with zero-mean noise of the given scale, re-censor
/// against the current self, and keep the survivors. An empty library
/// yields an empty list; callers top up the remainder with random
/// generation.
pub fn seed_from_library(
    library: &GeneLibrary,
    count: usize,
    scale: f64,
    self_set: &SelfSet,
    rng: &mut ChaCha8Rng,
    next_id: &mut u64,
    birth_generation: u64,
) -> Result<Vec<Detector>> {
    if library.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    if !(scale > 0.0) {
        return Err(Error::Input(format!("seed_mutation_scale must be positive, got {scale}")));
    }
    let noise = Normal::new(0.0, scale).expect("finite positive scale");
    let mut seeded = Vec::new();
    for _ in 0..count {
        let entry = &library.entries()[rng.random_range(0..library.len())];
        let center: Vec<f64> = entry
            .center
            .iter()
            .map(|&c| (c + noise.sample(rng)).clamp(0.0, 1.0))
            .collect();
        let candidate = Detector {
            id: *next_id,
            center,
            radius: entry.radius,
            birth_generation,
            match_count: 0,
            origin: DetectorOrigin::LibrarySeeded,
        };
        if !censor(&candidate, self_set)? {
            *next_id += 1;
            seeded.push(candidate);
        }
    }
    Ok(seeded)
}

/// Turnover summary of one evolution pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub generation: u64,
    pub original: usize,
    pub kept: usize,
    pub invalidated: usize,
    pub pruned: usize,
    pub archived: usize,
    pub seeded_library: usize,
    pub seeded_random: usize,
    /// Replacement slots left unfilled because no censored candidate was
    /// found within budget.
    pub unfilled: usize,
}

/// One full evolution pass: revalidate against the updated self, prune
/// stale detectors, archive invalidated-but-successful ones, then refill
/// the set to its original size — library-seeded first, random after.
pub fn evolve(
    set: DetectorSet,
    mut library: GeneLibrary,
    current_self: &SelfSet,
    policy: &LifecyclePolicy,
    seed: u64,
) -> Result<(DetectorSet, GeneLibrary, EvolveSummary)> {
    if !(0.0..=1.0).contains(&policy.library_seed_fraction) {
        return Err(Error::Input(format!(
            "library_seed_fraction must lie in [0,1], got {}",
            policy.library_seed_fraction
        )));
    }
    let original = set.detectors.len();
    let new_generation = set.generation + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(new_generation);

    let (kept_set, invalidated) = revalidate(set, current_self)?;
    let (mut out, pruned) = prune_stale(kept_set, policy, new_generation);

    let mut archived = 0;
    for d in &invalidated {
        if d.match_count > 0 {
            library.archive(d, new_generation)?;
            archived += 1;
        }
    }

    let kept = out.detectors.len();
    let n_replace = original - kept;
    let lib_target = (n_replace as f64 * policy.library_seed_fraction).round() as usize;
    let seeded = seed_from_library(
        &library,
        lib_target,
        policy.seed_mutation_scale,
        current_self,
        &mut rng,
        &mut out.next_id,
        new_generation,
    )?;
    let seeded_library = seeded.len();
    out.detectors.extend(seeded);

    let mut seeded_random = 0;
    let mut unfilled = 0;
    for _ in 0..n_replace.saturating_sub(seeded_library) {
        match random_censored_detector(current_self, &out.params, &mut rng, REPLACEMENT_TRIES)? {
            Some((center, radius)) => {
                out.detectors.push(Detector {
                    id: out.next_id,
                    center,
                    radius,
                    birth_generation: new_generation,
                    match_count: 0,
                    origin: DetectorOrigin::Random,
                });
                out.next_id += 1;
                seeded_random += 1;
            }
            None => unfilled += 1,
        }
    }

    out.generation = new_generation;
    let summary = EvolveSummary {
        generation: new_generation,
        original,
        kept,
        invalidated: invalidated.len(),
        pruned: pruned.len(),
        archived,
        seeded_library,
        seeded_random,
        unfilled,
    };
    Ok((out, library, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::negsel::{generate_nsa, GenerationParams, Variant};

    fn detector(id: u64, center: Vec<f64>, radius: f64, birth: u64, matches: u64) -> Detector {
        Detector {
            id,
            center,
            radius,
            birth_generation: birth,
            match_count: matches,
            origin: DetectorOrigin::Random,
        }
    }

    fn small_set(detectors: Vec<Detector>) -> DetectorSet {
        let next_id = detectors.iter().map(|d| d.id + 1).max().unwrap_or(0);
        DetectorSet {
            detectors,
            schema_fingerprint: "fp".into(),
            dims: 2,
            generation: 0,
            next_id,
            params: GenerationParams {
                variant: Variant::Fixed,
                seed: 0,
                self_radius: 0.05,
                radius: Some(0.1),
                target_count: Some(4),
                target_coverage: None,
                max_attempts: 10_000,
            },
        }
    }

    #[test]
    fn revalidate_drops_overlapping_detectors() {
        let set = small_set(vec![
            detector(0, vec![0.2, 0.2], 0.1, 0, 0),
            detector(1, vec![0.8, 0.8], 0.1, 0, 3),
        ]);
        // Self drifted onto the first detector's center.
        let drifted = SelfSet::new(vec![vec![0.2, 0.2]], 0.05).unwrap();
        let (kept, invalidated) = revalidate(set, &drifted).unwrap();
        assert_eq!(kept.detectors.len(), 1);
        assert_eq!(kept.detectors[0].id, 1);
        assert_eq!(invalidated.len(), 1);
        assert_eq!(invalidated[0].id, 0);
    }

    #[test]
    fn revalidate_without_drift_keeps_everything() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let (set, _) = generate_nsa(&self_set, 20, 0.08, 4, 100_000, "fp").unwrap();
        let before = set.detectors.clone();
        let (kept, invalidated) = revalidate(set, &self_set).unwrap();
        assert!(invalidated.is_empty());
        assert_eq!(kept.detectors, before);
    }

    #[test]
    fn revalidate_can_empty_the_set() {
        let set = small_set(vec![detector(0, vec![0.5, 0.5], 0.2, 0, 1)]);
        let everywhere = SelfSet::new(vec![vec![0.5, 0.5]], 0.9).unwrap();
        let (kept, invalidated) = revalidate(set, &everywhere).unwrap();
        assert!(kept.detectors.is_empty());
        assert_eq!(invalidated.len(), 1);
    }

    #[test]
    fn prune_rules() {
        let policy = LifecyclePolicy { max_age: 50, min_matches_by_age: 1, ..Default::default() };
        let set = small_set(vec![
            detector(0, vec![0.1, 0.1], 0.05, 0, 0), // age 100, no matches: pruned
            detector(1, vec![0.2, 0.2], 0.05, 0, 7), // age 100, matched: kept
            detector(2, vec![0.3, 0.3], 0.05, 90, 0), // age 10: too young to judge
        ]);
        let (kept, pruned) = prune_stale(set, &policy, 100);
        assert_eq!(pruned.iter().map(|d| d.id).collect::<Vec<_>>(), vec![0]);
        assert_eq!(kept.detectors.iter().map(|d| d.id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn archive_evicts_lowest_matches() {
        let mut lib = GeneLibrary::new(2).unwrap();
        lib.archive(&detector(0, vec![0.1, 0.1], 0.05, 0, 5), 1).unwrap();
        lib.archive(&detector(1, vec![0.2, 0.2], 0.05, 0, 3), 2).unwrap();
        lib.archive(&detector(2, vec![0.3, 0.3], 0.05, 0, 4), 3).unwrap();
        let matches: Vec<u64> = lib.entries().iter().map(|e| e.lifetime_matches).collect();
        assert_eq!(matches, vec![5, 4]);
    }

    #[test]
    fn archive_tie_evicts_oldest() {
        let mut lib = GeneLibrary::new(2).unwrap();
        lib.archive(&detector(0, vec![0.1, 0.1], 0.05, 0, 3), 1).unwrap();
        lib.archive(&detector(1, vec![0.2, 0.2], 0.05, 0, 3), 2).unwrap();
        lib.archive(&detector(2, vec![0.3, 0.3], 0.05, 0, 5), 3).unwrap();
        // Two entries tie on 3 matches; the one archived at generation 1 goes.
        let gens: Vec<u64> = lib.entries().iter().map(|e| e.archived_generation).collect();
        assert_eq!(gens, vec![2, 3]);
    }

    #[test]
    fn archive_rejects_zero_match_detector() {
        let mut lib = GeneLibrary::new(4).unwrap();
        assert!(matches!(
            lib.archive(&detector(0, vec![0.1, 0.1], 0.05, 0, 0), 1),
            Err(Error::Policy(_))
        ));
    }

    #[test]
    fn capacity_bound_holds_after_every_archive() {
        let mut lib = GeneLibrary::new(3).unwrap();
        for i in 0..20 {
            lib.archive(&detector(i, vec![0.1, 0.1], 0.05, 0, i + 1), i).unwrap();
            assert!(lib.len() <= 3);
        }
    }

    #[test]
    fn seeding_stays_near_genotype() {
        let mut lib = GeneLibrary::new(8).unwrap();
        lib.archive(&detector(0, vec![0.8, 0.8], 0.1, 0, 9), 1).unwrap();
        let self_set = SelfSet::new(vec![vec![0.1, 0.1]], 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut next_id = 100;
        let scale = 0.02;
        let seeded =
            seed_from_library(&lib, 10, scale, &self_set, &mut rng, &mut next_id, 5).unwrap();
        assert!(!seeded.is_empty());
        for d in &seeded {
            let dist = crate::representation::euclidean(&d.center, &[0.8, 0.8]).unwrap();
            assert!(dist < 3.0 * scale, "seeded detector strayed {dist}");
            assert_eq!(d.origin, DetectorOrigin::LibrarySeeded);
            assert_eq!(d.birth_generation, 5);
        }
    }

    #[test]
    fn seeding_into_self_region_is_censored_away() {
        let mut lib = GeneLibrary::new(8).unwrap();
        lib.archive(&detector(0, vec![0.5, 0.5], 0.1, 0, 9), 1).unwrap();
        // Self has drifted onto the archived genotype.
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut next_id = 0;
        let seeded =
            seed_from_library(&lib, 50, 0.01, &self_set, &mut rng, &mut next_id, 1).unwrap();
        assert!(seeded.is_empty());
    }

    #[test]
    fn seeding_zero_count_is_empty() {
        let mut lib = GeneLibrary::new(2).unwrap();
        lib.archive(&detector(0, vec![0.8, 0.8], 0.1, 0, 1), 1).unwrap();
        let self_set = SelfSet::new(vec![vec![0.1, 0.1]], 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut next_id = 0;
        assert!(seed_from_library(&lib, 0, 0.05, &self_set, &mut rng, &mut next_id, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn evolve_no_drift_zero_turnover() {
        let self_set = SelfSet::new(vec![vec![0.5, 0.5]], 0.05).unwrap();
        let (set, _) = generate_nsa(&self_set, 15, 0.08, 2, 100_000, "fp").unwrap();
        let before = set.detectors.clone();
        let lib = GeneLibrary::new(16).unwrap();
        let (out, _, summary) =
            evolve(set, lib, &self_set, &LifecyclePolicy::default(), 9).unwrap();
        assert_eq!(summary.invalidated, 0);
        assert_eq!(summary.pruned, 0);
        assert_eq!(summary.seeded_library + summary.seeded_random, 0);
        assert_eq!(out.detectors, before);
        assert_eq!(out.generation, 1);
    }

    #[test]
    fn evolve_refills_to_original_size_and_stays_sound() {
        let old_self = SelfSet::new(vec![vec![0.2, 0.2]], 0.05).unwrap();
        let (mut set, _) = generate_nsa(&old_self, 30, 0.08, 6, 100_000, "fp").unwrap();
        // Give some detectors matches so invalidation feeds the library.
        for d in set.detectors.iter_mut().take(10) {
            d.match_count = 2;
        }
        let drifted = SelfSet::new(vec![vec![0.7, 0.7], vec![0.75, 0.7]], 0.05).unwrap();
        let lib = GeneLibrary::new(64).unwrap();
        let (out, lib, summary) =
            evolve(set, lib, &drifted, &LifecyclePolicy::default(), 11).unwrap();
        assert_eq!(summary.original, 30);
        assert_eq!(out.detectors.len() + summary.unfilled, 30);
        assert_eq!(lib.len(), summary.archived);
        // Post-revalidation soundness: nothing covers the new self.
        for d in &out.detectors {
            for s in drifted.samples() {
                assert!(!d.covers(s).unwrap());
            }
        }
    }

    #[test]
    fn evolve_is_deterministic() {
        let old_self = SelfSet::new(vec![vec![0.2, 0.2]], 0.05).unwrap();
        let (mut set, _) = generate_nsa(&old_self, 20, 0.08, 6, 100_000, "fp").unwrap();
        for d in set.detectors.iter_mut().take(5) {
            d.match_count = 1;
        }
        let drifted = SelfSet::new(vec![vec![0.6, 0.6]], 0.05).unwrap();
        let run = |set: DetectorSet| {
            evolve(
                set,
                GeneLibrary::new(32).unwrap(),
                &drifted,
                &LifecyclePolicy::default(),
                13,
            )
            .unwrap()
        };
        let (a, la, _) = run(set.clone());
        let (b, lb, _) = run(set);
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn library_json_round_trip() {
        let mut lib = GeneLibrary::new(4).unwrap();
        lib.archive(&detector(0, vec![0.3, 0.7], 0.12, 0, 6), 2).unwrap();
        let doc = lib.to_json(None).unwrap();
        let back = GeneLibrary::from_json(&doc).unwrap();
        assert_eq!(lib, back);
    }
}
