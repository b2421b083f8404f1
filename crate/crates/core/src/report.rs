//! Evaluation metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Confusion counts from joining predictions against ground truth by id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    /// Ids present on only one side of the join (unlabeled predictions,
    /// or labels with no prediction such as DCA no-verdicts).
    pub skipped: u64,
}

/// Join predictions (true = anomalous) against labels by id.
pub fn confusion(
    predictions: &BTreeMap<String, bool>,
    labels: &BTreeMap<String, bool>,
) -> Confusion {
    let mut c = Confusion::default();
    for (id, &label) in labels {
        match predictions.get(id) {
            Some(&pred) => match (pred, label) {
                (true, true) => c.true_positives += 1,
                (true, false) => c.false_positives += 1,
                (false, false) => c.true_negatives += 1,
                (false, true) => c.false_negatives += 1,
            },
            None => c.skipped += 1,
        }
    }
    c.skipped += predictions.keys().filter(|id| !labels.contains_key(*id)).count() as u64;
    c
}

/// The evaluation artifact: counts, the rates recomputable from them,
/// and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    pub skipped: u64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    /// `null` when precision + recall is zero.
    pub f1: Option<f64>,
    pub detector_count: usize,
    pub runtime_ms: u64,
    pub config_digest: String,
}

impl EvaluationReport {
    pub fn from_confusion(
        c: Confusion,
        detector_count: usize,
        runtime_ms: u64,
        config_digest: String,
    ) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let tpr = ratio(c.true_positives, c.true_positives + c.false_negatives);
        let fpr = ratio(c.false_positives, c.false_positives + c.true_negatives);
        let precision = ratio(c.true_positives, c.true_positives + c.false_positives);
        let recall = tpr;
        let f1 = (precision + recall > 0.0)
            .then(|| 2.0 * precision * recall / (precision + recall));
        Self {
            true_positives: c.true_positives,
            false_positives: c.false_positives,
            true_negatives: c.true_negatives,
            false_negatives: c.false_negatives,
            skipped: c.skipped,
            tpr,
            fpr,
            precision,
            f1,
            detector_count,
            runtime_ms,
            config_digest,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(id, v)| (id.to_string(), *v)).collect()
    }

    #[test]
    fn all_correct() {
        let preds = maps(&[("a", true), ("b", false)]);
        let labels = maps(&[("a", true), ("b", false)]);
        let r = EvaluationReport::from_confusion(confusion(&preds, &labels), 0, 0, "d".into());
        assert_eq!(r.tpr, 1.0);
        assert_eq!(r.fpr, 0.0);
        assert_eq!(r.f1, Some(1.0));
    }

    #[test]
    fn all_wrong() {
        let preds = maps(&[("a", false), ("b", true)]);
        let labels = maps(&[("a", true), ("b", false)]);
        let r = EvaluationReport::from_confusion(confusion(&preds, &labels), 0, 0, "d".into());
        assert_eq!(r.tpr, 0.0);
        assert_eq!(r.fpr, 1.0);
        assert_eq!(r.f1, None);
    }

    #[test]
    fn mixed_fixture_hand_counted() {
        // 3 TP, 1 FN, 1 FP, 5 TN.
        let preds = maps(&[
            ("p1", true),
            ("p2", true),
            ("p3", true),
            ("p4", false),
            ("n1", true),
            ("n2", false),
            ("n3", false),
            ("n4", false),
            ("n5", false),
            ("n6", false),
        ]);
        let labels = maps(&[
            ("p1", true),
            ("p2", true),
            ("p3", true),
            ("p4", true),
            ("n1", false),
            ("n2", false),
            ("n3", false),
            ("n4", false),
            ("n5", false),
            ("n6", false),
        ]);
        let c = confusion(&preds, &labels);
        assert_eq!(
            (c.true_positives, c.false_negatives, c.false_positives, c.true_negatives),
            (3, 1, 1, 5)
        );
        let r = EvaluationReport::from_confusion(c, 0, 0, "d".into());
        assert_eq!(r.tpr, 0.75);
        assert_eq!(r.fpr, 1.0 / 6.0);
    }

    #[test]
    fn unmatched_ids_are_skipped() {
        let preds = maps(&[("a", true), ("stranger", true)]);
        let labels = maps(&[("a", true), ("unpredicted", false)]);
        let c = confusion(&preds, &labels);
        assert_eq!(c.skipped, 2);
        assert_eq!(c.true_positives, 1);
    }

    #[test]
    fn rates_recompute_from_counts() {
        let preds = maps(&[("a", true), ("b", false), ("c", true)]);
        let labels = maps(&[("a", true), ("b", true), ("c", false)]);
        let r = EvaluationReport::from_confusion(confusion(&preds, &labels), 0, 0, "d".into());
        let tp = r.true_positives as f64;
        assert_eq!(r.tpr, tp / (tp + r.false_negatives as f64));
        assert_eq!(r.fpr, r.false_positives as f64 / (r.false_positives + r.true_negatives) as f64);
    }

    #[test]
    fn f1_serializes_as_null_when_undefined() {
        let preds = maps(&[("a", false)]);
        let labels = maps(&[("a", true)]);
        let r = EvaluationReport::from_confusion(confusion(&preds, &labels), 0, 0, "d".into());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"f1\":null"));
    }
}
