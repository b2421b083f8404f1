//! Antigen encoding and affinity measures.
//!
//! Raw feature records are fitted into a [`FeatureSchema`] (observed bounds
//! for continuous features, sorted vocabularies for categorical ones) and
//! encoded into [`Antigen`]s: real vectors in `[0,1]^d` with an optional
//! quantized bit-string. Affinity between representations is euclidean
//! distance on vectors, or Hamming / r-contiguous matching on bit-strings.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Current on-disk schema document version.
pub const SCHEMA_VERSION: u32 = 1;

/// Per-feature encoding rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Min-max normalized to `[0,1]`; values outside the fitted range clamp.
    Continuous { min: f64, max: f64, constant: bool },
    /// One-hot expanded over a lexicographically sorted vocabulary.
    Categorical { vocabulary: Vec<String> },
}

/// One named feature and how to encode it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Fitted encoding schema: feature order, bounds and vocabularies.
///
/// A fitted schema is immutable; encoding never mutates it, so it can be
/// shared freely across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub schema_version: u32,
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    /// Dimensionality of encoded vectors: 1 per continuous feature,
    /// vocabulary size per categorical feature.
    pub fn dimensionality(&self) -> usize {
        self.features
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Continuous { .. } => 1,
                FeatureKind::Categorical { vocabulary } => vocabulary.len(),
            })
            .sum()
    }

    /// Stable content hash binding detector sets to the space that
    /// produced them.
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::to_string(self).expect("schema serializes");
        let mut hasher = Sha256::new();
        hasher.update(doc.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(digest.len() * 2);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(doc)?;
        if schema.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                schema.schema_version
            )));
        }
        Ok(schema)
    }
}

/// One raw observation prior to encoding. Field order is preserved from
/// the source; the fitted schema fixes the canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// Identity tag; synthesized from the row index when the source has
    /// no id column.
    pub id: String,
    pub fields: Vec<(String, String)>,
}

impl RawRecord {
    pub fn new(id: impl Into<String>, fields: Vec<(String, String)>) -> Self {
        Self { id: id.into(), fields }
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

/// An encoded observation: a normalized real vector, an optional
/// bit-string encoding, and its identity tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antigen {
    pub id: String,
    pub vector: Vec<f64>,
    pub bits: Option<BitString>,
}

impl Antigen {
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Self {
        Self { id: id.into(), vector, bits: None }
    }
}

fn parse_finite(value: &str) -> Option<f64> {
    value.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Fit a schema over raw records: observed min/max per continuous feature,
/// sorted vocabulary per categorical feature. A feature is continuous iff
/// every observed value parses as a finite number.
pub fn fit_schema(records: &[RawRecord]) -> Result<FeatureSchema> {
    if records.is_empty() {
        return Err(Error::Schema("cannot fit a schema over zero records".into()));
    }

    let names: Vec<String> = records[0].fields.iter().map(|(n, _)| n.clone()).collect();
    if names.is_empty() {
        return Err(Error::Schema("records carry no features".into()));
    }
    let mut seen = BTreeSet::new();
    for name in &names {
        if name.is_empty() {
            return Err(Error::Schema("empty feature name".into()));
        }
        if !seen.insert(name.clone()) {
            return Err(Error::Schema(format!("duplicate feature name `{name}`")));
        }
    }

    let name_set: BTreeSet<&str> = names.iter().map(|s| s.as_str()).collect();
    for (idx, record) in records.iter().enumerate() {
        let record_set: BTreeSet<&str> =
            record.fields.iter().map(|(n, _)| n.as_str()).collect();
        if record_set != name_set {
            return Err(Error::Schema(format!(
                "record {idx} has a different field set than record 0"
            )));
        }
    }

    let mut features = Vec::with_capacity(names.len());
    for name in &names {
        let values: Vec<&str> = records
            .iter()
            .map(|r| r.get(name).expect("field set checked above"))
            .collect();
        let numeric: Option<Vec<f64>> = values.iter().map(|v| parse_finite(v)).collect();
        let kind = match numeric {
            Some(nums) => {
                let min = nums.iter().copied().fold(f64::INFINITY, f64::min);
                let max = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                FeatureKind::Continuous { min, max, constant: min == max }
            }
            None => {
                let vocab: BTreeSet<String> =
                    values.iter().map(|v| v.to_string()).collect();
                FeatureKind::Categorical { vocabulary: vocab.into_iter().collect() }
            }
        };
        features.push(FeatureSpec { name: name.clone(), kind });
    }

    Ok(FeatureSchema { schema_version: SCHEMA_VERSION, features })
}

fn encode_inner(
    record: &RawRecord,
    schema: &FeatureSchema,
    lenient: &mut Option<&mut Vec<String>>,
) -> Result<Antigen> {
    let mut vector = Vec::with_capacity(schema.dimensionality());
    for spec in &schema.features {
        let raw = record.get(&spec.name).ok_or_else(|| Error::Encode {
            feature: spec.name.clone(),
            reason: "missing from record".into(),
        })?;
        match &spec.kind {
            FeatureKind::Continuous { min, max, constant } => {
                let value = parse_finite(raw).ok_or_else(|| Error::Encode {
                    feature: spec.name.clone(),
                    reason: format!("`{raw}` is not a finite number"),
                })?;
                let component = if *constant {
                    0.0
                } else {
                    ((value - min) / (max - min)).clamp(0.0, 1.0)
                };
                vector.push(component);
            }
            FeatureKind::Categorical { vocabulary } => {
                let hit = vocabulary.iter().position(|v| v == raw);
                match (hit, &mut *lenient) {
                    (Some(pos), _) => {
                        for i in 0..vocabulary.len() {
                            vector.push(if i == pos { 1.0 } else { 0.0 });
                        }
                    }
                    (None, Some(warnings)) => {
                        warnings.push(format!(
                            "unknown category `{raw}` for feature `{}`; encoded as all zeros",
                            spec.name
                        ));
                        vector.extend(std::iter::repeat_n(0.0, vocabulary.len()));
                    }
                    (None, None) => {
                        return Err(Error::Encode {
                            feature: spec.name.clone(),
                            reason: format!("unknown category `{raw}`"),
                        });
                    }
                }
            }
        }
    }
    Ok(Antigen::new(record.id.clone(), vector))
}

/// Encode a record under a fitted schema. Continuous features map by
/// `(v - min) / (max - min)` clamped to `[0,1]` (constant features map to
/// 0.0); categorical features one-hot expand. Unknown categories are an
/// error; the caller decides drop vs abort.
pub fn encode(record: &RawRecord, schema: &FeatureSchema) -> Result<Antigen> {
    encode_inner(record, schema, &mut None)
}

/// Like [`encode`], but unknown categories encode as an all-zeros one-hot
/// block and produce a warning instead of an error.
pub fn encode_lenient(record: &RawRecord, schema: &FeatureSchema) -> Result<(Antigen, Vec<String>)> {
    let mut warnings = Vec::new();
    let antigen = encode_inner(record, schema, &mut Some(&mut warnings))?;
    Ok((antigen, warnings))
}

/// A fixed-length bit-string encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.0 {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Input(format!("invalid bit character `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Quantize an antigen's vector into a bit-string: each component `v` maps
/// to level `floor(v * (2^b - 1) + 0.5)` written as `b` big-endian bits,
/// concatenated in schema order.
pub fn to_bits(antigen: &Antigen, bits_per_feature: u32) -> Result<BitString> {
    if bits_per_feature == 0 || bits_per_feature > 32 {
        return Err(Error::Input(format!(
            "bits_per_feature must be in 1..=32, got {bits_per_feature}"
        )));
    }
    let levels = (1u64 << bits_per_feature) - 1;
    let mut bits = Vec::with_capacity(antigen.vector.len() * bits_per_feature as usize);
    for &v in &antigen.vector {
        let level = (v * levels as f64 + 0.5).floor() as u64;
        let level = level.min(levels);
        for shift in (0..bits_per_feature).rev() {
            bits.push((level >> shift) & 1 == 1);
        }
    }
    Ok(BitString(bits))
}

/// Similarity measure between a detector/antigen pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffinityMeasure {
    /// L2 distance on real vectors; smaller means higher affinity.
    Euclidean,
    /// Count of differing bits on equal-length bit-strings.
    Hamming,
    /// True iff some window of at least `r` consecutive positions is
    /// bitwise equal.
    RContiguous { r: usize },
}

/// Result of an affinity computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Affinity {
    Distance(f64),
    Mismatches(u64),
    Match(bool),
}

/// L2 distance between two equal-length real vectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Affinity(format!(
            "vector length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Number of differing bit positions.
pub fn hamming(a: &BitString, b: &BitString) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::Affinity(format!(
            "bit-string length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|(x, y)| x != y)
        .count() as u64)
}

/// True iff `a` and `b` agree on at least `r` consecutive positions.
pub fn r_contiguous(r: usize, a: &BitString, b: &BitString) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Affinity(format!(
            "bit-string length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if r == 0 || r > a.len() {
        return Err(Error::Affinity(format!(
            "match window r={r} must be in 1..={}",
            a.len()
        )));
    }
    let mut run = 0usize;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        if x == y {
            run += 1;
            if run >= r {
                return Ok(true);
            }
        } else {
            run = 0;
        }
    }
    Ok(false)
}

/// Affinity between two antigens (or a detector center wrapped in an
/// antigen) under the given measure. Euclidean applies to real vectors;
/// hamming and r-contiguous require both bit-strings to be present.
pub fn affinity(measure: AffinityMeasure, a: &Antigen, b: &Antigen) -> Result<Affinity> {
    match measure {
        AffinityMeasure::Euclidean => Ok(Affinity::Distance(euclidean(&a.vector, &b.vector)?)),
        AffinityMeasure::Hamming => {
            let (ba, bb) = bit_pair(a, b)?;
            Ok(Affinity::Mismatches(hamming(ba, bb)?))
        }
        AffinityMeasure::RContiguous { r } => {
            let (ba, bb) = bit_pair(a, b)?;
            Ok(Affinity::Match(r_contiguous(r, ba, bb)?))
        }
    }
}

fn bit_pair<'a>(a: &'a Antigen, b: &'a Antigen) -> Result<(&'a BitString, &'a BitString)> {
    match (&a.bits, &b.bits) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(Error::Affinity(
            "bit-string measure requires bits on both operands".into(),
        )),
    }
}
