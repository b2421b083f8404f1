//! The six pipeline commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use ais_core::clonal::{run_maturation, Population, ValidationSet};
use ais_core::config::EngineConfig;
use ais_core::dataset;
use ais_core::dca::{classify_mcav, run_dca, McavVerdict};
use ais_core::index::GridIndex;
use ais_core::lifecycle::{evolve, GeneLibrary};
use ais_core::negsel::{generate_nsa, generate_vdetector, Classification, SelfSet, Variant};
use ais_core::report::{confusion, EvaluationReport};
use ais_core::representation::{encode, encode_lenient, fit_schema, Antigen, FeatureSchema};
use ais_core::synth;
use ais_core::{Error, Result};

use crate::artifacts::{
    self, load_detectors, load_schema, sibling_schema, write_schema, write_text, AlertRecord,
    McavDoc,
};

/// Resolved common options.
pub struct Ctx {
    pub config: EngineConfig,
    pub digest: String,
    pub out_dir: PathBuf,
}

fn encode_all(
    records: &[ais_core::representation::RawRecord],
    schema: &FeatureSchema,
    lenient: bool,
) -> Result<Vec<Antigen>> {
    let mut antigens = Vec::with_capacity(records.len());
    for record in records {
        if lenient {
            let (antigen, warnings) = encode_lenient(record, schema)?;
            for warning in warnings {
                eprintln!("warning: record {}: {warning}", record.id);
            }
            antigens.push(antigen);
        } else {
            antigens.push(encode(record, schema)?);
        }
    }
    Ok(antigens)
}

/// `train`: fit a schema over the self file, generate a censored detector
/// set (optionally matured against a labeled validation file), and write
/// the schema + detector artifacts.
pub fn cmd_train(ctx: &Ctx, self_csv: &Path, validation_csv: Option<&Path>) -> Result<()> {
    let records = dataset::read_records(self_csv)?;
    let schema = fit_schema(&records)?;
    let antigens = encode_all(&records, &schema, false)?;
    let self_set = SelfSet::from_antigens(&antigens, ctx.config.negsel.self_radius)?;
    let fingerprint = schema.fingerprint();

    let negsel = &ctx.config.negsel;
    let (mut set, outcome) = match negsel.variant {
        Variant::Fixed => generate_nsa(
            &self_set,
            negsel.target_count,
            negsel.radius,
            negsel.seed,
            negsel.effective_max_attempts(),
            &fingerprint,
        )?,
        Variant::Vdetector => generate_vdetector(
            &self_set,
            negsel.target_coverage,
            negsel.seed,
            negsel.effective_max_attempts(),
            &fingerprint,
        )?,
    };
    println!(
        "generated {} detectors in {} candidates (estimated coverage: {})",
        outcome.admitted,
        outcome.attempts,
        outcome
            .estimated_coverage
            .map(|c| format!("{c:.3}"))
            .unwrap_or_else(|| "n/a".into()),
    );

    if ctx.config.clonal.enabled {
        let validation_csv = validation_csv.ok_or_else(|| {
            Error::Input("clonal maturation is enabled but no --validation file was given".into())
        })?;
        let (v_records, v_labels) = dataset::read_labeled_records(validation_csv)?;
        let v_antigens = encode_all(&v_records, &schema, ctx.config.representation.lenient)?;
        let validation = ValidationSet::new(&v_antigens, &v_labels)?;
        let gen_params = set.params.clone();
        let population = Population::from_detector_set(&set, &validation)?;
        let before = population.best_fitness();
        let (population, history) = run_maturation(
            population,
            &validation,
            &ctx.config.clonal.maturation,
            &self_set,
            &gen_params,
            Some(ctx.config.clonal.snapshot_interval),
        )?;
        println!(
            "matured {} generations: best fitness {:.4} -> {:.4}",
            ctx.config.clonal.maturation.generations,
            before,
            population.best_fitness(),
        );
        let mut log = String::new();
        for stats in &history {
            log.push_str(&serde_json::to_string(stats)?);
            log.push('\n');
        }
        write_text(&ctx.out_dir.join(artifacts::MATURATION_FILE), &log)?;
        set = population.into_detector_set(set);
    }

    write_schema(&ctx.out_dir.join(artifacts::SCHEMA_FILE), &schema, &ctx.digest)?;
    write_text(
        &ctx.out_dir.join(artifacts::DETECTORS_FILE),
        &set.to_json(Some(&ctx.digest))?,
    )?;
    println!(
        "wrote {} and {} ({} detectors)",
        ctx.out_dir.join(artifacts::SCHEMA_FILE).display(),
        ctx.out_dir.join(artifacts::DETECTORS_FILE).display(),
        set.detectors.len(),
    );
    Ok(())
}

/// `detect`: classify a traffic file against a detector set, write one
/// alert per nonself antigen plus the updated detector set (match counts).
pub fn cmd_detect(
    ctx: &Ctx,
    detectors_path: &Path,
    traffic_csv: &Path,
    schema_path: Option<&PathBuf>,
) -> Result<()> {
    let mut set = load_detectors(detectors_path)?;
    let schema = load_schema(&sibling_schema(detectors_path, schema_path))?;
    set.check_schema(&schema)?;

    let records = dataset::read_records(traffic_csv)?;
    let antigens = encode_all(&records, &schema, ctx.config.representation.lenient)?;

    // Accelerated matching over an immutable snapshot; match counts are
    // applied by this single owner afterwards, in traffic order.
    let grid = GridIndex::build(&set);
    let matches: Vec<Vec<u64>> = antigens
        .par_iter()
        .map(|a| grid.matches(&set, &a.vector))
        .collect::<Result<_>>()?;

    let mut alerts = Vec::new();
    let mut classifications = Vec::with_capacity(matches.len());
    for (antigen, matched) in antigens.iter().zip(matches) {
        if !matched.is_empty() {
            alerts.push(AlertRecord { id: antigen.id.clone(), detectors: matched.clone() });
        }
        classifications.push(Classification { nonself: !matched.is_empty(), matched });
    }
    let mut by_id: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, d) in set.detectors.iter().enumerate() {
        by_id.insert(d.id, i);
    }
    for c in &classifications {
        for id in &c.matched {
            set.detectors[by_id[id]].match_count += 1;
        }
    }

    let mut alert_lines = String::new();
    for alert in &alerts {
        alert_lines.push_str(&serde_json::to_string(alert)?);
        alert_lines.push('\n');
    }
    write_text(&ctx.out_dir.join(artifacts::ALERTS_FILE), &alert_lines)?;
    write_text(
        &ctx.out_dir.join(artifacts::DETECTORS_FILE),
        &set.to_json(Some(&ctx.digest))?,
    )?;
    println!("scanned {} antigens: {} nonself alerts", antigens.len(), alerts.len());
    Ok(())
}

/// `dca`: run the dendritic-cell algorithm over a signal stream and write
/// the per-antigen MCAV report with verdicts.
pub fn cmd_dca(ctx: &Ctx, signals_csv: &Path) -> Result<()> {
    let frames = dataset::read_signal_frames(signals_csv)?;
    let d = &ctx.config.dca;
    let (table, stats) = run_dca(
        &frames,
        d.pool_size,
        (d.threshold_low, d.threshold_high),
        d.seed,
        &d.weights,
    )?;
    let verdicts = classify_mcav(&table, d.anomaly_threshold);
    let doc = McavDoc::build(&table, &verdicts, d.anomaly_threshold, ctx.digest.clone());
    write_text(
        &ctx.out_dir.join(artifacts::MCAV_FILE),
        &serde_json::to_string_pretty(&doc)?,
    )?;

    let count = |v: McavVerdict| verdicts.values().filter(|&&x| x == v).count();
    println!(
        "{} frames, {} cells migrated mature / {} semimature; verdicts: {} anomalous, {} normal, {} no-verdict",
        stats.frames,
        stats.migrated_mature,
        stats.migrated_semimature,
        count(McavVerdict::Anomalous),
        count(McavVerdict::Normal),
        count(McavVerdict::NoVerdict),
    );
    Ok(())
}

/// `evolve`: revalidate a detector set against a fresh self sample, prune,
/// archive, re-seed, and write the updated detector set and gene library.
pub fn cmd_evolve(
    ctx: &Ctx,
    detectors_path: &Path,
    library_path: &Path,
    new_self_csv: &Path,
    schema_path: Option<&PathBuf>,
) -> Result<()> {
    let set = load_detectors(detectors_path)?;
    let schema = load_schema(&sibling_schema(detectors_path, schema_path))?;
    set.check_schema(&schema)?;

    let library = if library_path.exists() {
        GeneLibrary::from_json(&std::fs::read_to_string(library_path)?)?
    } else {
        println!("library {} not found; starting empty", library_path.display());
        GeneLibrary::new(ctx.config.lifecycle.capacity)?
    };

    let records = dataset::read_records(new_self_csv)?;
    let antigens = encode_all(&records, &schema, ctx.config.representation.lenient)?;
    let current_self = SelfSet::from_antigens(&antigens, ctx.config.negsel.self_radius)?;

    let (set, library, summary) = evolve(
        set,
        library,
        &current_self,
        &ctx.config.lifecycle.policy,
        ctx.config.negsel.seed,
    )?;

    write_text(
        &ctx.out_dir.join(artifacts::DETECTORS_FILE),
        &set.to_json(Some(&ctx.digest))?,
    )?;
    write_text(
        &ctx.out_dir.join(artifacts::LIBRARY_FILE),
        &library.to_json(Some(&ctx.digest))?,
    )?;
    println!(
        "generation {}: kept {}/{}, invalidated {}, pruned {}, archived {}, seeded {} from library + {} random{}",
        summary.generation,
        summary.kept,
        summary.original,
        summary.invalidated,
        summary.pruned,
        summary.archived,
        summary.seeded_library,
        summary.seeded_random,
        if summary.unfilled > 0 {
            format!(", {} slots unfilled", summary.unfilled)
        } else {
            String::new()
        },
    );
    Ok(())
}

enum Predictions {
    /// Ids flagged nonself; every other labeled id counts as normal.
    Alerts(Vec<String>),
    /// Explicit verdicts; no-verdict antigens are skipped.
    Mcav(BTreeMap<String, McavVerdict>),
}

fn load_predictions(path: &Path) -> Result<Predictions> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    if let Ok(doc) = serde_json::from_str::<McavDoc>(&content) {
        let verdicts = doc.antigens.into_iter().map(|(id, e)| (id, e.verdict)).collect();
        return Ok(Predictions::Mcav(verdicts));
    }
    let mut ids = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let alert: AlertRecord = serde_json::from_str(line).map_err(|e| {
            Error::Input(format!("{} line {}: {e}", path.display(), n + 1))
        })?;
        ids.push(alert.id);
    }
    Ok(Predictions::Alerts(ids))
}

/// `evaluate`: join predictions (alerts or MCAV report) against ground
/// truth by id and write the metrics report.
pub fn cmd_evaluate(
    ctx: &Ctx,
    predictions_path: &Path,
    labels_csv: &Path,
    detectors_path: Option<&PathBuf>,
) -> Result<()> {
    let started = Instant::now();
    let labels = dataset::read_labels(labels_csv)?;
    if labels.is_empty() {
        return Err(Error::Input(format!("{}: zero labeled rows", labels_csv.display())));
    }

    let predictions: BTreeMap<String, bool> = match load_predictions(predictions_path)? {
        Predictions::Alerts(alert_ids) => {
            let mut map: BTreeMap<String, bool> =
                labels.keys().map(|id| (id.clone(), false)).collect();
            for id in alert_ids {
                map.insert(id, true);
            }
            map
        }
        Predictions::Mcav(verdicts) => verdicts
            .into_iter()
            .filter_map(|(id, v)| match v {
                McavVerdict::Anomalous => Some((id, true)),
                McavVerdict::Normal => Some((id, false)),
                McavVerdict::NoVerdict => None,
            })
            .collect(),
    };

    let detector_count = match detectors_path {
        Some(path) => load_detectors(path)?.detectors.len(),
        None => 0,
    };
    let report = EvaluationReport::from_confusion(
        confusion(&predictions, &labels),
        detector_count,
        started.elapsed().as_millis() as u64,
        ctx.digest.clone(),
    );
    write_text(
        &ctx.out_dir.join(artifacts::REPORT_FILE),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "tp {} fp {} tn {} fn {} skipped {} | tpr {:.4} fpr {:.4} precision {:.4} f1 {}",
        report.true_positives,
        report.false_positives,
        report.true_negatives,
        report.false_negatives,
        report.skipped,
        report.tpr,
        report.fpr,
        report.precision,
        report.f1.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}

/// `synth`: write the synthetic scenario CSVs.
pub fn cmd_synth(ctx: &Ctx) -> Result<()> {
    let spec = &ctx.config.synth;
    let data = synth::generate(spec)?;
    let written = synth::write_csv_files(&data, spec, &ctx.out_dir)?;
    println!(
        "scenario seed {}: {} self train, {} traffic rows ({} anomalies), {} frames",
        spec.seed,
        data.self_train.len(),
        data.traffic.len(),
        data.labels.iter().filter(|(_, a)| *a).count(),
        data.frames.len(),
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
