//! CLONALG-style affinity maturation.
//!
//! A detector population is evolved against a labeled validation set:
//! score, select the top performers, clone them in rank proportion,
//! hypermutate the clones inversely to (normalized) fitness, censor the
//! mutants against self so mutation can never undo negative selection,
//! and keep the best survivors, replacing the worst few with fresh random
//! censored detectors each generation.
//!
//! Determinism contract: each maturation step draws from a `ChaCha8Rng`
//! seeded with the configured seed on stream `generation + 1`, so stepping
//! manually and running the full loop produce identical populations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::negsel::{
    censor_point, random_censored_detector, Detector, DetectorOrigin, DetectorSet,
    GenerationParams, SelfSet,
};
use crate::representation::Antigen;
use crate::{Error, Result};

/// Base scale of hypermutation perturbations before fitness damping.
const MUTATION_BASE_SCALE: f64 = 0.1;

/// Attempt budget per fresh replacement detector.
const REPLACEMENT_TRIES: u64 = 1_000;

/// Maturation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaturationConfig {
    /// Top members selected for cloning each generation.
    pub n_select: usize,
    /// Clone multiplier: rank `i` receives `round(beta * pop / (i+1))` clones.
    pub beta: f64,
    /// Mutation decay: mutation scale is `exp(-rho * normalized_fitness)`.
    pub rho: f64,
    /// Worst members replaced by fresh random detectors per generation.
    pub d_replace: usize,
    pub generations: usize,
    pub rng_seed: u64,
}

impl Default for MaturationConfig {
    fn default() -> Self {
        Self { n_select: 5, beta: 1.0, rho: 3.0, d_replace: 2, generations: 50, rng_seed: 42 }
    }
}

/// Labeled antigens the population matures against, split by class.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    nonself: Vec<Vec<f64>>,
    self_points: Vec<Vec<f64>>,
}

impl ValidationSet {
    /// `labels[i]` is true when `antigens[i]` is nonself (anomalous).
    pub fn new(antigens: &[Antigen], labels: &[bool]) -> Result<Self> {
        if antigens.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} antigens but {} labels",
                antigens.len(),
                labels.len()
            )));
        }
        let mut nonself = Vec::new();
        let mut self_points = Vec::new();
        for (a, &anomalous) in antigens.iter().zip(labels) {
            if anomalous {
                nonself.push(a.vector.clone());
            } else {
                self_points.push(a.vector.clone());
            }
        }
        if nonself.is_empty() {
            return Err(Error::Validation("validation set has no nonself antigens".into()));
        }
        if self_points.is_empty() {
            return Err(Error::Validation("validation set has no self antigens".into()));
        }
        Ok(Self { nonself, self_points })
    }

    pub fn nonself(&self) -> &[Vec<f64>] {
        &self.nonself
    }

    pub fn self_points(&self) -> &[Vec<f64>] {
        &self.self_points
    }
}

/// A scored detector population.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Detector>,
    pub fitness: Vec<f64>,
    pub generation: u64,
    pub next_id: u64,
}

impl Population {
    pub fn from_detector_set(set: &DetectorSet, validation: &ValidationSet) -> Result<Self> {
        if set.detectors.is_empty() {
            return Err(Error::Input("population must be non-empty".into()));
        }
        let fitness = score_all(&set.detectors, validation)?;
        Ok(Self {
            members: set.detectors.clone(),
            fitness,
            generation: 0,
            next_id: set.next_id,
        })
    }

    /// Replace a set's detectors with this population's members.
    pub fn into_detector_set(self, mut set: DetectorSet) -> DetectorSet {
        set.detectors = self.members;
        set.next_id = self.next_id;
        set
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }
}

/// Classification effectiveness of one detector: the fraction of nonself
/// validation antigens it covers, zeroed outright if it covers any self
/// validation antigen.
pub fn score_fitness(detector: &Detector, validation: &ValidationSet) -> Result<f64> {
    for s in validation.self_points() {
        if detector.covers(s)? {
            return Ok(0.0);
        }
    }
    let covered = validation
        .nonself()
        .iter()
        .map(|x| detector.covers(x))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&c| c)
        .count();
    Ok(covered as f64 / validation.nonself().len() as f64)
}

fn score_all(members: &[Detector], validation: &ValidationSet) -> Result<Vec<f64>> {
    members
        .par_iter()
        .map(|d| score_fitness(d, validation))
        .collect()
}

/// Rank-proportional clone counts: rank `i` (0-based, fitness descending)
/// receives `round(beta * pop_size / (i+1))` clones.
pub fn clone_counts(ranked_fitness: &[f64], beta: f64, pop_size: usize) -> Vec<usize> {
    debug_assert!(ranked_fitness.windows(2).all(|w| w[0] >= w[1]));
    (0..ranked_fitness.len())
        .map(|i| (beta * pop_size as f64 / (i + 1) as f64).round() as usize)
        .collect()
}

/// Hypermutate one detector: perturbation scale is
/// `exp(-rho * normalized_fitness) * 0.1`, applied as zero-mean gaussian
/// noise to each center component (clamped to `[0,1]`) and as a relative
/// radius factor (floored at 1e-6). The clone's origin becomes `clonal`.
pub fn hypermutate(
    detector: &Detector,
    normalized_fitness: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
    id: u64,
    birth_generation: u64,
) -> Detector {
    let sigma = (-rho * normalized_fitness).exp();
    let scale = sigma * MUTATION_BASE_SCALE;
    let noise = Normal::new(0.0, scale).expect("finite non-negative scale");
    let center: Vec<f64> = detector
        .center
        .iter()
        .map(|&c| (c + noise.sample(rng)).clamp(0.0, 1.0))
        .collect();
    let radius = (detector.radius * (1.0 + noise.sample(rng))).max(1e-6);
    Detector {
        id,
        center,
        radius,
        birth_generation,
        match_count: 0,
        origin: DetectorOrigin::Clonal,
    }
}

fn validate_config(cfg: &MaturationConfig, pop_size: usize) -> Result<()> {
    if cfg.n_select == 0 || cfg.n_select > pop_size {
        return Err(Error::Input(format!(
            "n_select must lie in 1..={pop_size}, got {}",
            cfg.n_select
        )));
    }
    if cfg.d_replace >= pop_size {
        return Err(Error::Input(format!(
            "d_replace must be < population size {pop_size}, got {}",
            cfg.d_replace
        )));
    }
    if !(cfg.beta > 0.0) {
        return Err(Error::Input(format!("beta must be positive, got {}", cfg.beta)));
    }
    if !(cfg.rho > 0.0) {
        return Err(Error::Input(format!("rho must be positive, got {}", cfg.rho)));
    }
    Ok(())
}

/// One CLONALG generation. Deterministic given the config seed and the
/// population's generation counter.
pub fn maturation_step(
    pop: &Population,
    validation: &ValidationSet,
    cfg: &MaturationConfig,
    self_set: &SelfSet,
    gen_params: &GenerationParams,
) -> Result<Population> {
    let pop_size = pop.members.len();
    validate_config(cfg, pop_size)?;

    let next_generation = pop.generation + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(next_generation);
    let mut next_id = pop.next_id;

    // (1) score all members.
    let scores = score_all(&pop.members, validation)?;

    // (2) select the top n_select by fitness, ties broken by position.
    let mut order: Vec<usize> = (0..pop_size).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let selected = &order[..cfg.n_select];

    // (3) clone in rank proportion.
    let ranked_fitness: Vec<f64> = selected.iter().map(|&i| scores[i]).collect();
    let counts = clone_counts(&ranked_fitness, cfg.beta, pop_size);

    // (4) hypermutate, inversely to fitness (already normalized to [0,1]
    // by construction: a covered-fraction with a hard penalty).
    let mut clones = Vec::with_capacity(counts.iter().sum());
    for (rank, &member_idx) in selected.iter().enumerate() {
        let parent = &pop.members[member_idx];
        for _ in 0..counts[rank] {
            let clone =
                hypermutate(parent, scores[member_idx], cfg.rho, &mut rng, next_id, next_generation);
            next_id += 1;
            clones.push(clone);
        }
    }

    // (5) mutation must not undo negative selection.
    let mut survivors = Vec::new();
    for clone in clones {
        if !censor(&clone, self_set)? {
            survivors.push(clone);
        }
    }

    // (6) re-score the surviving clones.
    let survivor_scores = score_all(&survivors, validation)?;

    // (7) keep the best pop_size of parents and survivors, then swap the
    // d_replace worst for fresh random censored detectors.
    let mut pool: Vec<(f64, Detector)> = pop
        .fitness
        .iter()
        .zip(&pop.members)
        .map(|(&f, d)| (f, d.clone()))
        .chain(survivor_scores.into_iter().zip(survivors))
        .collect();
    pool.sort_by(|a, b| b.0.total_cmp(&a.0));
    pool.truncate(pop_size);

    let replace_from = pop_size - cfg.d_replace;
    for slot in pool.iter_mut().skip(replace_from) {
        if let Some((center, radius)) =
            random_censored_detector(self_set, gen_params, &mut rng, REPLACEMENT_TRIES)?
        {
            let fresh = Detector {
                id: next_id,
                center,
                radius,
                birth_generation: next_generation,
                match_count: 0,
                origin: DetectorOrigin::Random,
            };
            next_id += 1;
            let fitness = score_fitness(&fresh, validation)?;
            *slot = (fitness, fresh);
        }
        // No admissible candidate within budget: the incumbent stays.
    }

    let (fitness, members): (Vec<f64>, Vec<Detector>) = pool.into_iter().unzip();
    Ok(Population { members, fitness, generation: next_generation, next_id })
}

fn censor(detector: &Detector, self_set: &SelfSet) -> Result<bool> {
    censor_point(&detector.center, detector.radius, self_set)
}

/// Per-generation maturation record. Written as one JSON line each by the
/// CLI; `snapshot` is populated every `snapshot_every` generations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<Vec<Detector>>,
}

/// Run the full maturation loop. The history holds one entry for the
/// initial population and one per generation.
pub fn run_maturation(
    mut pop: Population,
    validation: &ValidationSet,
    cfg: &MaturationConfig,
    self_set: &SelfSet,
    gen_params: &GenerationParams,
    snapshot_every: Option<usize>,
) -> Result<(Population, Vec<GenerationStats>)> {
    if cfg.generations == 0 {
        return Err(Error::Input("generations must be positive".into()));
    }
    let snapshot_due = |generation: u64| match snapshot_every {
        Some(k) if k > 0 => generation.is_multiple_of(k as u64),
        _ => false,
    };
    let mut history = Vec::with_capacity(cfg.generations + 1);
    history.push(GenerationStats {
        generation: pop.generation,
        best_fitness: pop.best_fitness(),
        mean_fitness: pop.mean_fitness(),
        snapshot: snapshot_due(pop.generation).then(|| pop.members.clone()),
    });
    for _ in 0..cfg.generations {
        pop = maturation_step(&pop, validation, cfg, self_set, gen_params)?;
        history.push(GenerationStats {
            generation: pop.generation,
            best_fitness: pop.best_fitness(),
            mean_fitness: pop.mean_fitness(),
            snapshot: snapshot_due(pop.generation).then(|| pop.members.clone()),
        });
    }
    Ok((pop, history))
}
