//! Dendritic cell algorithm: danger-theory signal fusion.
//!
//! A pool of immature cells watches a stream of signal frames. Every frame
//! is fused into two running sums per cell: costimulation (`csm`) and a
//! signed context value (`k`), while the cell samples the antigen ids
//! active in the window. When `csm` reaches the cell's migration
//! threshold the cell migrates — mature if `k > 0`, semimature otherwise —
//! and presents every sampled antigen copy under that verdict. The MCAV of
//! an antigen is the fraction of its presentations made by mature cells.
//!
//! Determinism contract: migration thresholds come from a `ChaCha8Rng`
//! seeded with the configured seed, drawn uniformly from the inclusive
//! threshold range — first `pool_size` draws for the initial pool in cell
//! order, then one draw per replacement cell, in cell order within each
//! frame.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Signal fusion weights: `csm = w_cp*pamp + w_cd*danger + w_cs*safe`,
/// `k = w_kp*pamp + w_kd*danger - w_ks*safe`.
///
/// The defaults make one unit of safe signal outweigh one unit of danger
/// in context while still driving costimulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionWeights {
    pub csm_pamp: f64,
    pub csm_danger: f64,
    pub csm_safe: f64,
    pub k_pamp: f64,
    pub k_danger: f64,
    pub k_safe: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            csm_pamp: 2.0,
            csm_danger: 1.0,
            csm_safe: 2.0,
            k_pamp: 2.0,
            k_danger: 1.0,
            k_safe: 3.0,
        }
    }
}

/// One timestamped measurement of the system state plus the antigen ids
/// active in that window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub timestamp: u64,
    pub pamp: f64,
    pub danger: f64,
    pub safe: f64,
    pub active_antigens: BTreeSet<String>,
}

impl SignalFrame {
    pub fn new(
        timestamp: u64,
        pamp: f64,
        danger: f64,
        safe: f64,
        active_antigens: BTreeSet<String>,
    ) -> Result<Self> {
        for (name, v) in [("pamp", pamp), ("danger", danger), ("safe", safe)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Input(format!(
                    "signal {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { timestamp, pamp, danger, safe, active_antigens })
    }
}

/// Fuse one frame into a `(csm_increment, k_increment)` pair.
pub fn fuse(frame: &SignalFrame, weights: &FusionWeights) -> (f64, f64) {
    let csm = weights.csm_pamp * frame.pamp
        + weights.csm_danger * frame.danger
        + weights.csm_safe * frame.safe;
    let k = weights.k_pamp * frame.pamp + weights.k_danger * frame.danger
        - weights.k_safe * frame.safe;
    (csm, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DcState {
    Immature,
    MigratedMature,
    MigratedSemimature,
}

/// A signal-integrating cell. Transitions only immature -> migrated-*.
#[derive(Debug, Clone, PartialEq)]
pub struct DendriticCell {
    pub sampled: BTreeMap<String, u64>,
    pub csm: f64,
    pub k: f64,
    pub migration_threshold: f64,
    pub state: DcState,
}

impl DendriticCell {
    pub fn new(migration_threshold: f64) -> Result<Self> {
        if !(migration_threshold > 0.0) {
            return Err(Error::Input(format!(
                "migration threshold must be positive, got {migration_threshold}"
            )));
        }
        Ok(Self {
            sampled: BTreeMap::new(),
            csm: 0.0,
            k: 0.0,
            migration_threshold,
            state: DcState::Immature,
        })
    }
}

/// Feed one frame to an immature cell: sample its active antigens,
/// accumulate the fused increments, and migrate when costimulation
/// reaches the threshold (mature iff `k > 0`; a tie breaks toward
/// semimature).
pub fn dc_step(cell: &mut DendriticCell, frame: &SignalFrame, weights: &FusionWeights) -> Result<()> {
    if cell.state != DcState::Immature {
        return Err(Error::Lifecycle("cannot step a migrated dendritic cell".into()));
    }
    for id in &frame.active_antigens {
        *cell.sampled.entry(id.clone()).or_insert(0) += 1;
    }
    let (csm_inc, k_inc) = fuse(frame, weights);
    cell.csm += csm_inc;
    cell.k += k_inc;
    if cell.csm >= cell.migration_threshold {
        cell.state = if cell.k > 0.0 {
            DcState::MigratedMature
        } else {
            DcState::MigratedSemimature
        };
    }
    Ok(())
}

/// Presentation counts for one antigen id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct McavEntry {
    pub presentations_total: u64,
    pub presentations_mature: u64,
}

impl McavEntry {
    /// Mature context antigen value; `None` until the antigen has been
    /// presented at least once.
    pub fn mcav(&self) -> Option<f64> {
        (self.presentations_total > 0)
            .then(|| self.presentations_mature as f64 / self.presentations_total as f64)
    }
}

/// Per-antigen presentation tallies for a whole stream. Holds an entry for
/// every antigen id observed in the stream, including never-presented ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct McavTable {
    pub entries: BTreeMap<String, McavEntry>,
}

/// Stream-level counters, for summaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcaStats {
    pub frames: u64,
    pub migrated_mature: u64,
    pub migrated_semimature: u64,
    /// Total antigen copies presented by migrated cells.
    pub presentations: u64,
}

/// Run the full algorithm over an ordered frame stream.
///
/// The pool holds `pool_size` immature cells with thresholds drawn
/// uniformly from `threshold_range`; every frame is presented to every
/// cell; cells that migrate present their sampled antigens and are
/// replaced by fresh immature cells. Cells still immature when the stream
/// ends present nothing.
pub fn run_dca(
    frames: &[SignalFrame],
    pool_size: usize,
    threshold_range: (f64, f64),
    seed: u64,
    weights: &FusionWeights,
) -> Result<(McavTable, DcaStats)> {
    if frames.is_empty() {
        return Err(Error::Input("signal stream is empty".into()));
    }
    if pool_size == 0 {
        return Err(Error::Input("pool_size must be positive".into()));
    }
    let (lo, hi) = threshold_range;
    if !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::Input(format!(
            "threshold range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    for (i, pair) in frames.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::Input(format!(
                "timestamps must strictly increase: frame {} has {} after {}",
                i + 1,
                pair[1].timestamp,
                pair[0].timestamp
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<DendriticCell> {
        DendriticCell::new(rng.random_range(lo..=hi))
    };

    let mut pool: Vec<DendriticCell> = (0..pool_size)
        .map(|_| draw(&mut rng))
        .collect::<Result<_>>()?;

    let mut table = McavTable::default();
    for frame in frames {
        for id in &frame.active_antigens {
            table.entries.entry(id.clone()).or_default();
        }
    }

    let mut stats = DcaStats { frames: frames.len() as u64, ..Default::default() };

    for frame in frames {
        for cell in pool.iter_mut() {
            dc_step(cell, frame, weights)?;
        }
        for cell in pool.iter_mut() {
            if cell.state == DcState::Immature {
                continue;
            }
            let mature = cell.state == DcState::MigratedMature;
            if mature {
                stats.migrated_mature += 1;
            } else {
                stats.migrated_semimature += 1;
            }
            for (id, &copies) in &cell.sampled {
                let entry = table.entries.entry(id.clone()).or_default();
                entry.presentations_total += copies;
                if mature {
                    entry.presentations_mature += copies;
                }
                stats.presentations += copies;
            }
            *cell = draw(&mut rng)?;
        }
    }

    Ok((table, stats))
}

/// Per-antigen verdict at an MCAV anomaly threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McavVerdict {
    Anomalous,
    Normal,
    NoVerdict,
}

/// Threshold the table: anomalous iff `mcav >= anomaly_threshold`;
/// never-presented antigens pass through as no-verdict.
pub fn classify_mcav(table: &McavTable, anomaly_threshold: f64) -> BTreeMap<String, McavVerdict> {
    table
        .entries
        .iter()
        .map(|(id, entry)| {
            let verdict = match entry.mcav() {
                Some(mcav) if mcav >= anomaly_threshold => McavVerdict::Anomalous,
                Some(_) => McavVerdict::Normal,
                None => McavVerdict::NoVerdict,
            };
            (id.clone(), verdict)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(ts: u64, pamp: f64, danger: f64, safe: f64, ids: &[&str]) -> SignalFrame {
        SignalFrame::new(
            ts,
            pamp,
            danger,
            safe,
            ids.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn fuse_default_weights() {
        let w = FusionWeights::default();
        assert_eq!(fuse(&frame(0, 1.0, 0.0, 0.0, &[]), &w), (2.0, 2.0));
        assert_eq!(fuse(&frame(0, 0.0, 0.0, 1.0, &[]), &w), (2.0, -3.0));
        assert_eq!(fuse(&frame(0, 0.0, 0.0, 0.0, &[]), &w), (0.0, 0.0));
    }

    #[test]
    fn fuse_is_linear() {
        let w = FusionWeights::default();
        let f = frame(0, 0.3, 0.7, 0.2, &[]);
        let (c1, k1) = fuse(&f, &w);
        let scaled = frame(0, 0.3 * 4.0, 0.7 * 4.0, 0.2 * 4.0, &[]);
        let (c4, k4) = fuse(&scaled, &w);
        assert_eq!(c4, 4.0 * c1);
        assert_eq!(k4, 4.0 * k1);
    }

    #[test]
    fn negative_signals_rejected() {
        assert!(matches!(
            SignalFrame::new(0, -0.1, 0.0, 0.0, BTreeSet::new()),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            SignalFrame::new(0, 0.0, f64::NAN, 0.0, BTreeSet::new()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn pure_safe_cell_goes_semimature() {
        let w = FusionWeights::default();
        let mut cell = DendriticCell::new(10.0).unwrap();
        for ts in 0..5 {
            dc_step(&mut cell, &frame(ts, 0.0, 0.0, 1.0, &["a"]), &w).unwrap();
        }
        // csm reaches 10 on the fifth frame; k = -15 < 0.
        assert_eq!(cell.state, DcState::MigratedSemimature);
        assert_eq!(cell.sampled.get("a"), Some(&5));
    }

    #[test]
    fn pure_pamp_cell_goes_mature() {
        let w = FusionWeights::default();
        let mut cell = DendriticCell::new(10.0).unwrap();
        for ts in 0..5 {
            dc_step(&mut cell, &frame(ts, 1.0, 0.0, 0.0, &["a"]), &w).unwrap();
        }
        assert_eq!(cell.state, DcState::MigratedMature);
    }

    #[test]
    fn migrates_exactly_at_threshold() {
        let w = FusionWeights::default();
        let mut cell = DendriticCell::new(4.0).unwrap();
        dc_step(&mut cell, &frame(0, 1.0, 0.0, 0.0, &[]), &w).unwrap();
        assert_eq!(cell.state, DcState::Immature);
        dc_step(&mut cell, &frame(1, 1.0, 0.0, 0.0, &[]), &w).unwrap();
        assert_eq!(cell.csm, 4.0);
        assert_eq!(cell.state, DcState::MigratedMature);
    }

    #[test]
    fn zero_context_breaks_toward_semimature() {
        // pamp and safe balanced so k accumulates to exactly 0.
        let w = FusionWeights {
            k_safe: 2.0,
            ..FusionWeights::default()
        };
        let mut cell = DendriticCell::new(4.0).unwrap();
        dc_step(&mut cell, &frame(0, 1.0, 0.0, 1.0, &[]), &w).unwrap();
        assert_eq!(cell.k, 0.0);
        assert_eq!(cell.state, DcState::MigratedSemimature);
    }

    #[test]
    fn stepping_a_migrated_cell_errors() {
        let w = FusionWeights::default();
        let mut cell = DendriticCell::new(1.0).unwrap();
        dc_step(&mut cell, &frame(0, 1.0, 0.0, 0.0, &[]), &w).unwrap();
        assert_ne!(cell.state, DcState::Immature);
        assert!(matches!(
            dc_step(&mut cell, &frame(1, 1.0, 0.0, 0.0, &[]), &w),
            Err(Error::Lifecycle(_))
        ));
    }

    #[test]
    fn mcav_is_mature_fraction() {
        let entry = McavEntry { presentations_total: 4, presentations_mature: 3 };
        assert_eq!(entry.mcav(), Some(0.75));
        assert_eq!(McavEntry::default().mcav(), None);
    }

    #[test]
    fn pure_safe_stream_all_mcav_zero() {
        let frames: Vec<SignalFrame> =
            (0..40).map(|ts| frame(ts, 0.0, 0.0, 1.0, &["a", "b"])).collect();
        let (table, stats) =
            run_dca(&frames, 4, (5.0, 15.0), 42, &FusionWeights::default()).unwrap();
        assert!(stats.presentations > 0);
        for entry in table.entries.values() {
            assert_eq!(entry.mcav(), Some(0.0));
        }
    }

    #[test]
    fn pure_pamp_stream_all_mcav_one() {
        let frames: Vec<SignalFrame> =
            (0..40).map(|ts| frame(ts, 1.0, 0.5, 0.0, &["a", "b"])).collect();
        let (table, _) =
            run_dca(&frames, 4, (5.0, 15.0), 42, &FusionWeights::default()).unwrap();
        for entry in table.entries.values() {
            assert_eq!(entry.mcav(), Some(1.0));
        }
    }

    #[test]
    fn unpresented_antigen_gets_no_verdict() {
        // One weak frame: no cell can reach its threshold, so the antigen
        // is sampled but never presented.
        let frames = vec![frame(0, 0.1, 0.0, 0.0, &["ghost"])];
        let (table, stats) =
            run_dca(&frames, 3, (5.0, 15.0), 1, &FusionWeights::default()).unwrap();
        assert_eq!(stats.presentations, 0);
        assert_eq!(table.entries["ghost"].mcav(), None);
        let verdicts = classify_mcav(&table, 0.5);
        assert_eq!(verdicts["ghost"], McavVerdict::NoVerdict);
    }

    #[test]
    fn classify_mcav_thresholds() {
        let mut table = McavTable::default();
        table.entries.insert(
            "hot".into(),
            McavEntry { presentations_total: 4, presentations_mature: 3 },
        );
        table.entries.insert(
            "cold".into(),
            McavEntry { presentations_total: 5, presentations_mature: 0 },
        );
        let verdicts = classify_mcav(&table, 0.5);
        assert_eq!(verdicts["hot"], McavVerdict::Anomalous);
        assert_eq!(verdicts["cold"], McavVerdict::Normal);
    }

    #[test]
    fn non_monotonic_timestamps_rejected() {
        let frames = vec![frame(5, 0.0, 0.0, 1.0, &[]), frame(5, 0.0, 0.0, 1.0, &[])];
        match run_dca(&frames, 2, (5.0, 15.0), 1, &FusionWeights::default()) {
            Err(Error::Input(msg)) => assert!(msg.contains("frame 1"), "{msg}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn run_is_deterministic() {
        let frames: Vec<SignalFrame> = (0..60)
            .map(|ts| {
                let anomaly = ts % 3 == 0;
                let (p, s) = if anomaly { (0.9, 0.1) } else { (0.0, 1.0) };
                frame(ts, p, 0.2, s, &[&format!("t{}", ts % 7)])
            })
            .collect();
        let w = FusionWeights::default();
        let a = run_dca(&frames, 8, (5.0, 15.0), 99, &w).unwrap();
        let b = run_dca(&frames, 8, (5.0, 15.0), 99, &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conservation_of_presentations() {
        let frames: Vec<SignalFrame> = (0..50)
            .map(|ts| {
                let (p, s) = if ts % 2 == 0 { (0.8, 0.0) } else { (0.0, 0.9) };
                frame(ts, p, 0.1, s, &[&format!("a{}", ts % 5), "shared"])
            })
            .collect();
        let (table, stats) =
            run_dca(&frames, 6, (5.0, 15.0), 7, &FusionWeights::default()).unwrap();
        let total: u64 = table.entries.values().map(|e| e.presentations_total).sum();
        assert_eq!(total, stats.presentations);
    }
}
