//! Domain types shared by every stage: channel layout, label taxonomy,
//! sensor sequences and datasets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal sampling rate of the wrist sensors.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 60.0;

/// Shortest sequence a length-9 kernel can cover at dilation 1.
pub const MIN_SEQUENCE_LEN: usize = 9;

/// Maximum deviation of a quaternion norm from 1.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-3;

const DEFAULT_TAXONOMY_CSV: &str = include_str!("../data/taxonomy.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    AccX,
    AccY,
    AccZ,
    GyrX,
    GyrY,
    GyrZ,
    QuatW,
    QuatX,
    QuatY,
    QuatZ,
}

impl ChannelRole {
    pub const ALL: [ChannelRole; 10] = [
        ChannelRole::AccX,
        ChannelRole::AccY,
        ChannelRole::AccZ,
        ChannelRole::GyrX,
        ChannelRole::GyrY,
        ChannelRole::GyrZ,
        ChannelRole::QuatW,
        ChannelRole::QuatX,
        ChannelRole::QuatY,
        ChannelRole::QuatZ,
    ];

    pub const ACC: [ChannelRole; 3] = [ChannelRole::AccX, ChannelRole::AccY, ChannelRole::AccZ];
    pub const GYR: [ChannelRole; 3] = [ChannelRole::GyrX, ChannelRole::GyrY, ChannelRole::GyrZ];
    pub const QUAT: [ChannelRole; 4] = [
        ChannelRole::QuatW,
        ChannelRole::QuatX,
        ChannelRole::QuatY,
        ChannelRole::QuatZ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelRole::AccX => "acc_x",
            ChannelRole::AccY => "acc_y",
            ChannelRole::AccZ => "acc_z",
            ChannelRole::GyrX => "gyr_x",
            ChannelRole::GyrY => "gyr_y",
            ChannelRole::GyrZ => "gyr_z",
            ChannelRole::QuatW => "quat_w",
            ChannelRole::QuatX => "quat_x",
            ChannelRole::QuatY => "quat_y",
            ChannelRole::QuatZ => "quat_z",
        }
    }

    /// Physical unit the role is stored in.
    pub fn unit(self) -> &'static str {
        match self {
            ChannelRole::AccX | ChannelRole::AccY | ChannelRole::AccZ => "m/s^2",
            ChannelRole::GyrX | ChannelRole::GyrY | ChannelRole::GyrZ => "deg/s",
            _ => "1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.name() == name)
    }

    pub fn is_acc(self) -> bool {
        Self::ACC.contains(&self)
    }

    pub fn is_gyr(self) -> bool {
        Self::GYR.contains(&self)
    }

    pub fn is_quat(self) -> bool {
        Self::QUAT.contains(&self)
    }
}

impl fmt::Display for ChannelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three input-stream combinations that are compared against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelSet {
    AccGyro,
    Quat,
    All,
}

impl ChannelSet {
    pub fn roles(self) -> &'static [ChannelRole] {
        match self {
            ChannelSet::AccGyro => &ChannelRole::ALL[..6],
            ChannelSet::Quat => &ChannelRole::QUAT,
            ChannelSet::All => &ChannelRole::ALL,
        }
    }

    pub fn len(self) -> usize {
        self.roles().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelSet::AccGyro => "acc-gyro",
            ChannelSet::Quat => "quat",
            ChannelSet::All => "all",
        }
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "acc-gyro" => Ok(ChannelSet::AccGyro),
            "quat" => Ok(ChannelSet::Quat),
            "all" => Ok(ChannelSet::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel set `{other}` (expected acc-gyro, quat or all)"
            ))),
        }
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Movement domain an item belongs to. `Junk` is reserved for the junk label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Grasp,
    Grip,
    Pinch,
    Gross,
    Junk,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Grasp,
        Domain::Grip,
        Domain::Pinch,
        Domain::Gross,
        Domain::Junk,
    ];

    pub const MOVEMENT: [Domain; 4] = [Domain::Grasp, Domain::Grip, Domain::Pinch, Domain::Gross];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Grasp => "Grasp",
            Domain::Grip => "Grip",
            Domain::Pinch => "Pinch",
            Domain::Gross => "Gross",
            Domain::Junk => "Junk",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .iter()
            .copied()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Taxonomy(format!("unknown domain `{s}`")))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An item identifier, or the junk label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemLabel(String);

impl ItemLabel {
    pub const JUNK_ID: &'static str = "JUNK";

    pub fn new(id: impl Into<String>) -> Self {
        ItemLabel(id.into())
    }

    pub fn junk() -> Self {
        ItemLabel(Self::JUNK_ID.to_string())
    }

    pub fn is_junk(&self) -> bool {
        self.0 == Self::JUNK_ID
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The 19 items plus the implicit junk label, each mapped to a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTaxonomy {
    items: Vec<(ItemLabel, Domain)>,
}

impl LabelTaxonomy {
    pub const NUM_ITEMS: usize = 19;

    /// Builds a taxonomy from `(item_id, domain)` pairs, excluding junk.
    pub fn new(items: Vec<(ItemLabel, Domain)>) -> Result<Self> {
        if items.len() != Self::NUM_ITEMS {
            return Err(Error::Taxonomy(format!(
                "expected {} items, found {}",
                Self::NUM_ITEMS,
                items.len()
            )));
        }
        let mut seen = HashSet::new();
        for (label, domain) in &items {
            if label.is_junk() {
                return Err(Error::Taxonomy("JUNK is implicit and must not be listed".into()));
            }
            if label.as_str().is_empty() {
                return Err(Error::Taxonomy("empty item id".into()));
            }
            if *domain == Domain::Junk {
                return Err(Error::Taxonomy(format!("item `{label}` mapped to Junk")));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::Taxonomy(format!("duplicate item `{label}`")));
            }
        }
        Ok(LabelTaxonomy { items })
    }

    /// Parses the `item_id,domain` CSV layout.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Taxonomy(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["item_id", "domain"] {
            return Err(Error::Taxonomy(format!(
                "expected header `item_id,domain`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut items = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Taxonomy(format!("row {}: {e}", i + 1)))?;
            let domain: Domain = record[1].parse()?;
            items.push((ItemLabel::new(&record[0]), domain));
        }
        Self::new(items)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("item_id,domain\n");
        for (label, domain) in &self.items {
            out.push_str(&format!("{label},{domain}\n"));
        }
        out
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemLabel> {
        self.items.iter().map(|(l, _)| l)
    }

    /// All 20 labels: items in file order, then junk.
    pub fn labels(&self) -> Vec<ItemLabel> {
        self.items().cloned().chain(std::iter::once(ItemLabel::junk())).collect()
    }

    pub fn contains(&self, label: &ItemLabel) -> bool {
        label.is_junk() || self.items.iter().any(|(l, _)| l == label)
    }

    pub fn label(&self, id: &str) -> Result<ItemLabel> {
        let label = ItemLabel::new(id);
        if self.contains(&label) {
            Ok(label)
        } else {
            Err(Error::UnknownLabel(id.to_string()))
        }
    }

    pub fn domain_of(&self, item: &ItemLabel) -> Result<Domain> {
        if item.is_junk() {
            return Ok(Domain::Junk);
        }
        self.items
            .iter()
            .find(|(l, _)| l == item)
            .map(|(_, d)| *d)
            .ok_or_else(|| Error::UnknownLabel(item.to_string()))
    }

    pub fn items_of(&self, domain: Domain) -> Vec<ItemLabel> {
        if domain == Domain::Junk {
            return vec![ItemLabel::junk()];
        }
        self.items
            .iter()
            .filter(|(_, d)| *d == domain)
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// Items ordered so consecutive picks rotate through the movement domains.
    pub fn interleaved_items(&self) -> Vec<ItemLabel> {
        let groups: Vec<Vec<ItemLabel>> = Domain::MOVEMENT.iter().map(|d| self.items_of(*d)).collect();
        let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = Vec::with_capacity(Self::NUM_ITEMS);
        for i in 0..longest {
            for g in &groups {
                if let Some(l) = g.get(i) {
                    out.push(l.clone());
                }
            }
        }
        out
    }
}

impl Default for LabelTaxonomy {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_TAXONOMY_CSV).expect("bundled taxonomy is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(Error::InvalidParameter(format!("unknown side `{other}`"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// One recording of one item execution. `samples` is laid out `[channels × T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSequence {
    pub id: String,
    pub samples: Array2<f64>,
    pub sample_rate: f64,
    pub channels: Vec<ChannelRole>,
    pub label: ItemLabel,
    pub subject_id: String,
    pub side: Side,
    pub score: Option<u8>,
}

impl SensorSequence {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn num_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn channel_index(&self, role: ChannelRole) -> Option<usize> {
        self.channels.iter().position(|r| *r == role)
    }

    pub fn channel(&self, role: ChannelRole) -> Option<ArrayView1<'_, f64>> {
        self.channel_index(role).map(|i| self.samples.row(i))
    }

    pub fn has_quaternion(&self) -> bool {
        ChannelRole::QUAT.iter().all(|r| self.channels.contains(r))
    }
}

/// A single violated sequence invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Issue {
    ShapeMismatch { rows: usize, roles: usize },
    TooShort { len: usize },
    NonFinite { channel: ChannelRole, index: usize },
    QuaternionNorm { index: usize, norm: f64 },
    BadSampleRate { rate: f64 },
    ScoreOutOfRange { score: u8 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::ShapeMismatch { rows, roles } => {
                write!(f, "samples have {rows} rows but {roles} channel roles")
            }
            Issue::TooShort { len } => {
                write!(f, "length {len} is below the minimum of {MIN_SEQUENCE_LEN}")
            }
            Issue::NonFinite { channel, index } => {
                write!(f, "non-finite value in {channel} at index {index}")
            }
            Issue::QuaternionNorm { index, norm } => {
                write!(f, "quaternion norm {norm} at index {index}")
            }
            Issue::BadSampleRate { rate } => write!(f, "invalid sample rate {rate}"),
            Issue::ScoreOutOfRange { score } => write!(f, "score {score} outside 0..=3"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn summary(&self) -> String {
        self.issues
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks every sequence invariant and lists all violations. Never fails.
pub fn validate_sequence(seq: &SensorSequence) -> ValidationReport {
    let mut issues = Vec::new();
    if seq.samples.nrows() != seq.channels.len() {
        issues.push(Issue::ShapeMismatch {
            rows: seq.samples.nrows(),
            roles: seq.channels.len(),
        });
        return ValidationReport { issues };
    }
    if !(seq.sample_rate.is_finite() && seq.sample_rate > 0.0) {
        issues.push(Issue::BadSampleRate {
            rate: seq.sample_rate,
        });
    }
    if seq.len() < MIN_SEQUENCE_LEN {
        issues.push(Issue::TooShort { len: seq.len() });
    }
    for (row, role) in seq.samples.rows().into_iter().zip(&seq.channels) {
        for (t, v) in row.iter().enumerate() {
            if !v.is_finite() {
                issues.push(Issue::NonFinite {
                    channel: *role,
                    index: t,
                });
            }
        }
    }
    if seq.has_quaternion() {
        let rows: Vec<_> = ChannelRole::QUAT
            .iter()
            .map(|r| seq.channel(*r).expect("checked by has_quaternion"))
            .collect();
        for t in 0..seq.len() {
            let norm = rows.iter().map(|r| r[t] * r[t]).sum::<f64>().sqrt();
            // NaN norms are already reported as non-finite samples.
            if norm.is_finite() && (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
                issues.push(Issue::QuaternionNorm { index: t, norm });
            }
        }
    }
    if let Some(score) = seq.score {
        if score > 3 {
            issues.push(Issue::ScoreOutOfRange { score });
        }
    }
    ValidationReport { issues }
}

/// A validated collection of sequences sharing one channel layout and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sequences: Vec<SensorSequence>,
    taxonomy: LabelTaxonomy,
}

impl Dataset {
    pub fn new(sequences: Vec<SensorSequence>, taxonomy: LabelTaxonomy) -> Result<Self> {
        let mut ids = HashSet::new();
        for seq in &sequences {
            if !ids.insert(seq.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate sequence id `{}`", seq.id)));
            }
            if !taxonomy.contains(&seq.label) {
                return Err(Error::UnknownLabel(seq.label.to_string()));
            }
            let report = validate_sequence(seq);
            if !report.is_valid() {
                return Err(Error::InvalidSequence {
                    id: seq.id.clone(),
                    message: report.summary(),
                });
            }
        }
        if let Some(first) = sequences.first() {
            for seq in &sequences[1..] {
                if seq.channels != first.channels {
                    return Err(Error::InvalidDataset(format!(
                        "sequence `{}` has a different channel layout than `{}`",
                        seq.id, first.id
                    )));
                }
                if seq.sample_rate != first.sample_rate {
                    return Err(Error::InvalidDataset(format!(
                        "sequence `{}` has sample rate {} but `{}` has {}",
                        seq.id, seq.sample_rate, first.id, first.sample_rate
                    )));
                }
            }
        }
        Ok(Dataset {
            sequences,
            taxonomy,
        })
    }

    pub fn sequences(&self) -> &[SensorSequence] {
        &self.sequences
    }

    pub fn taxonomy(&self) -> &LabelTaxonomy {
        &self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn channels(&self) -> &[ChannelRole] {
        self.sequences.first().map(|s| s.channels.as_slice()).unwrap_or(&[])
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(SensorSequence::len).max().unwrap_or(0)
    }

    /// Number of sequences per label, in label order.
    pub fn class_counts(&self) -> BTreeMap<ItemLabel, usize> {
        let mut counts = BTreeMap::new();
        for seq in &self.sequences {
            *counts.entry(seq.label.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Labels present in the dataset, in taxonomy order.
    pub fn present_labels(&self) -> Vec<ItemLabel> {
        let counts = self.class_counts();
        self.taxonomy
            .labels()
            .into_iter()
            .filter(|l| counts.contains_key(l))
            .collect()
    }

    pub fn into_sequences(self) -> Vec<SensorSequence> {
        self.sequences
    }

    /// Keeps the sequences at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            taxonomy: self.taxonomy.clone(),
        }
    }
}
