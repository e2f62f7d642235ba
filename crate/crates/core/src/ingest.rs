//! Loading and writing the manifest + per-sequence CSV layout, plus the
//! dataset-level reductions: junk balancing, length truncation and channel
//! selection.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::data::{
    validate_sequence, ChannelRole, ChannelSet, Dataset, ItemLabel, LabelTaxonomy,
    SensorSequence, Side, DEFAULT_SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::seed;

pub const MANIFEST_HEADER: [&str; 6] = ["sequence_id", "file", "label", "subject_id", "side", "score"];

/// Allowed relative deviation of an inter-sample interval from the nominal period.
pub const SAMPLING_TOLERANCE: f64 = 0.10;

/// One parsed manifest row. `file` is resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub sequence_id: String,
    pub file: PathBuf,
    pub label: ItemLabel,
    pub subject_id: String,
    pub side: Side,
    pub score: Option<u8>,
}

fn row_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

/// Parses a manifest. Rows are numbered from 1 starting at the first data row.
pub fn read_manifest(path: &Path, taxonomy: &LabelTaxonomy) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!(
                "expected header `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(path, row, e.to_string()))?;
        if record.len() != MANIFEST_HEADER.len() {
            return Err(row_err(path, row, format!("expected 6 fields, found {}", record.len())));
        }
        let label = taxonomy
            .label(&record[2])
            .map_err(|_| row_err(path, row, format!("unknown label `{}`", &record[2])))?;
        let side = record[4]
            .parse::<Side>()
            .map_err(|e| row_err(path, row, e.to_string()))?;
        let score = match &record[5] {
            "" => None,
            s => match s.parse::<u8>() {
                Ok(v) if v <= 3 => Some(v),
                _ => return Err(row_err(path, row, format!("score `{s}` is not in 0..=3"))),
            },
        };
        let file = base.join(&record[1]);
        if !file.is_file() {
            return Err(row_err(path, row, format!("missing file {}", file.display())));
        }
        rows.push(ManifestRow {
            sequence_id: record[0].to_string(),
            file,
            label,
            subject_id: record[3].to_string(),
            side,
            score,
        });
    }
    Ok(rows)
}

fn parse_column_header(raw: &str) -> std::result::Result<(String, Option<String>), String> {
    let raw = raw.trim();
    match raw.find('[') {
        None => Ok((raw.to_string(), None)),
        Some(open) => {
            let close = raw
                .rfind(']')
                .filter(|c| *c > open)
                .ok_or_else(|| format!("unterminated unit in column `{raw}`"))?;
            Ok((
                raw[..open].trim().to_string(),
                Some(raw[open + 1..close].trim().to_string()),
            ))
        }
    }
}

fn unit_matches(column: &str, unit: &str) -> bool {
    let unit = unit.replace(' ', "");
    match column {
        "t" => unit == "s",
        c if c.starts_with("acc_") => matches!(unit.as_str(), "m/s^2" | "m/s2" | "m/s²"),
        c if c.starts_with("gyr_") => matches!(unit.as_str(), "deg/s" | "°/s"),
        _ => matches!(unit.as_str(), "" | "1"),
    }
}

/// Parses one sequence file into a `[10 × T]` sample matrix.
pub fn read_sequence_file(path: &Path, sample_rate: f64) -> Result<Array2<f64>> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let expected: Vec<&str> = std::iter::once("t")
        .chain(ChannelRole::ALL.iter().map(|r| r.name()))
        .collect();
    if headers.len() != expected.len() {
        return Err(csv_err(format!(
            "expected {} columns `{}`, found {}",
            expected.len(),
            expected.join(","),
            headers.len()
        )));
    }
    for (raw, want) in headers.iter().zip(&expected) {
        let (name, unit) = parse_column_header(raw).map_err(csv_err)?;
        if name != *want {
            return Err(csv_err(format!("expected column `{want}`, found `{name}`")));
        }
        if let Some(unit) = unit {
            if !unit_matches(&name, &unit) {
                return Err(csv_err(format!(
                    "column `{name}` declares unit `{unit}`; only m/s^2, deg/s and s are accepted"
                )));
            }
        }
    }

    let period = 1.0 / sample_rate;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); ChannelRole::ALL.len()];
    let mut last_t: Option<f64> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(path, row, e.to_string()))?;
        let mut values = [0.0f64; 11];
        for (j, field) in record.iter().enumerate() {
            values[j] = field
                .parse::<f64>()
                .map_err(|_| row_err(path, row, format!("`{field}` is not a number")))?;
        }
        let t = values[0];
        if let Some(prev) = last_t {
            let dt = t - prev;
            if dt <= 0.0 {
                return Err(row_err(path, row, "timestamps must be strictly increasing"));
            }
            if ((dt - period) / period).abs() > SAMPLING_TOLERANCE {
                return Err(row_err(
                    path,
                    row,
                    format!("sample interval {dt:.6}s deviates from the nominal {period:.6}s by more than 10%"),
                ));
            }
        }
        last_t = Some(t);
        for (c, v) in values[1..].iter().enumerate() {
            columns[c].push(*v);
        }
    }
    let len = columns[0].len();
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((ChannelRole::ALL.len(), len), flat).expect("rectangular"))
}

/// Loads every manifest row. Any failure aborts the whole load and names the row.
pub fn load_dataset(manifest_path: &Path, taxonomy: &LabelTaxonomy) -> Result<Dataset> {
    let rows = read_manifest(manifest_path, taxonomy)?;
    let sequences: Vec<Result<SensorSequence>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let samples = read_sequence_file(&row.file, DEFAULT_SAMPLE_RATE_HZ)
                .map_err(|e| row_err(manifest_path, i + 1, e.to_string()))?;
            let seq = SensorSequence {
                id: row.sequence_id.clone(),
                samples,
                sample_rate: DEFAULT_SAMPLE_RATE_HZ,
                channels: ChannelRole::ALL.to_vec(),
                label: row.label.clone(),
                subject_id: row.subject_id.clone(),
                side: row.side,
                score: row.score,
            };
            let report = validate_sequence(&seq);
            if !report.is_valid() {
                return Err(row_err(manifest_path, i + 1, report.summary()));
            }
            Ok(seq)
        })
        .collect();
    let sequences = sequences.into_iter().collect::<Result<Vec<_>>>()?;
    Dataset::new(sequences, taxonomy.clone())
}

/// Writes `ds` as `manifest.csv` plus `sequences/<id>.csv` under `dir`.
/// Returns the manifest path.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    if ds.channels() != ChannelRole::ALL {
        return Err(Error::InvalidDataset(
            "only datasets carrying all 10 channels can be written".into(),
        ));
    }
    let seq_dir = dir.join("sequences");
    fs::create_dir_all(&seq_dir).map_err(|e| Error::io(&seq_dir, e))?;
    ds.sequences().par_iter().try_for_each(|seq| {
        let path = seq_dir.join(format!("{}.csv", seq.id));
        let mut out = String::with_capacity(seq.len() * 160);
        out.push('t');
        for role in ChannelRole::ALL {
            out.push(',');
            out.push_str(role.name());
        }
        out.push('\n');
        for t in 0..seq.len() {
            out.push_str(&format!("{}", t as f64 / seq.sample_rate));
            for c in 0..seq.num_channels() {
                out.push_str(&format!(",{}", seq.samples[[c, t]]));
            }
            out.push('\n');
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))
    })?;

    let manifest = dir.join("manifest.csv");
    let mut text = MANIFEST_HEADER.join(",");
    text.push('\n');
    for seq in ds.sequences() {
        text.push_str(&format!(
            "{},sequences/{}.csv,{},{},{},{}\n",
            seq.id,
            seq.id,
            seq.label,
            seq.subject_id,
            seq.side,
            seq.score.map(|s| s.to_string()).unwrap_or_default()
        ));
    }
    write_atomic(&manifest, text.as_bytes())?;
    Ok(manifest)
}

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let unique = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{unique}.tmp", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Caps the junk class at the size of the most frequent item by seeded
/// sampling without replacement. Dataset order is preserved.
pub fn balance_junk(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = ds.class_counts();
    let max_item = counts
        .iter()
        .filter(|(l, _)| !l.is_junk())
        .map(|(_, c)| *c)
        .max()
        .ok_or_else(|| Error::InvalidDataset("balancing needs at least one non-junk label".into()))?;
    let junk: Vec<usize> = ds
        .sequences()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label.is_junk())
        .map(|(i, _)| i)
        .collect();
    if junk.len() <= max_item {
        return Ok(ds.clone());
    }
    let mut rng = seed::derived_rng(seed, "balance_junk");
    let mut keep = vec![true; ds.len()];
    for &i in &junk {
        keep[i] = false;
    }
    for pick in sample(&mut rng, junk.len(), max_item) {
        keep[junk[pick]] = true;
    }
    let indices: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    Ok(ds.subset(&indices))
}

/// Number of sequences kept by [`truncate_longest`].
pub fn kept_count(n: usize, keep_fraction: f64) -> usize {
    // The epsilon absorbs representation error, e.g. 0.7 * 10 = 7.000000000000001.
    (((keep_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Keeps the ⌈f·N⌉ shortest sequences (ties by ascending id), in dataset order.
pub fn truncate_longest(ds: &Dataset, keep_fraction: f64) -> Result<Dataset> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let seqs = ds.sequences();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.sort_by(|&a, &b| {
        seqs[a]
            .len()
            .cmp(&seqs[b].len())
            .then_with(|| seqs[a].id.cmp(&seqs[b].id))
    });
    let keep = kept_count(seqs.len(), keep_fraction);
    let mut kept: Vec<usize> = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(ds.subset(&kept))
}

pub fn select_sequence_channels(seq: &SensorSequence, roles: &[ChannelRole]) -> Result<SensorSequence> {
    let mut samples = Array2::zeros((roles.len(), seq.len()));
    for (row, role) in roles.iter().enumerate() {
        let src = seq.channel(*role).ok_or_else(|| {
            Error::InvalidDataset(format!("sequence `{}` has no channel {role}", seq.id))
        })?;
        samples.row_mut(row).assign(&src);
    }
    Ok(SensorSequence {
        samples,
        channels: roles.to_vec(),
        ..seq.clone()
    })
}

/// Restricts every sequence to the roles of `set`, in the set's canonical order.
pub fn select_channels(ds: &Dataset, set: ChannelSet) -> Result<Dataset> {
    let sequences = ds
        .sequences()
        .iter()
        .map(|s| select_sequence_channels(s, set.roles()))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(sequences, ds.taxonomy().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ChannelRole;

    fn seq(id: &str, label: &str, len: usize) -> SensorSequence {
        let mut samples = Array2::zeros((10, len));
        samples.row_mut(6).fill(1.0);
        for t in 0..len {
            samples[[0, t]] = t as f64;
        }
        SensorSequence {
            id: id.into(),
            samples,
            sample_rate: 60.0,
            channels: ChannelRole::ALL.to_vec(),
            label: ItemLabel::new(label),
            subject_id: "P1".into(),
            side: Side::Left,
            score: if label == "JUNK" { None } else { Some(3) },
        }
    }

    fn ds(seqs: Vec<SensorSequence>) -> Dataset {
        Dataset::new(seqs, LabelTaxonomy::default()).unwrap()
    }

    #[test]
    fn truncation_keeps_shortest_six_of_eight() {
        let lens = [80, 10, 60, 20, 30, 70, 40, 50];
        let d = ds(lens
            .iter()
            .enumerate()
            .map(|(i, l)| seq(&format!("s{i}"), "stone", *l))
            .collect());
        let t = truncate_longest(&d, 0.75).unwrap();
        let mut kept: Vec<usize> = t.sequences().iter().map(|s| s.len()).collect();
        kept.sort_unstable();
        assert_eq!(kept, vec![10, 20, 30, 40, 50, 60]);
        assert_eq!(truncate_longest(&d, 1.0).unwrap(), d);
        assert!(truncate_longest(&d, 0.0).is_err());
        assert!(truncate_longest(&d, 1.5).is_err());
    }

    #[test]
    fn truncation_ties_break_by_id() {
        let d = ds(vec![seq("b", "stone", 20), seq("a", "stone", 20), seq("c", "stone", 10)]);
        let t = truncate_longest(&d, 0.5).unwrap();
        let ids: Vec<&str> = t.sequences().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c"]);
    }

    #[test]
    fn kept_count_absorbs_float_error() {
        assert_eq!(kept_count(10, 0.7), 7);
        assert_eq!(kept_count(8, 0.75), 6);
        assert_eq!(kept_count(103, 0.75), 78);
        assert_eq!(kept_count(1, 0.01), 1);
    }

    #[test]
    fn junk_below_cap_is_untouched() {
        let mut seqs: Vec<_> = (0..10).map(|i| seq(&format!("i{i}"), "stone", 20)).collect();
        seqs.extend((0..5).map(|i| seq(&format!("j{i}"), "JUNK", 20)));
        let d = ds(seqs);
        assert_eq!(balance_junk(&d, 42).unwrap(), d);
    }

    #[test]
    fn junk_above_cap_is_downsampled_deterministically() {
        let mut seqs: Vec<_> = (0..7).map(|i| seq(&format!("a{i}"), "stone", 20)).collect();
        seqs.extend((0..3).map(|i| seq(&format!("b{i}"), "hand_to_mouth", 20)));
        seqs.extend((0..30).map(|i| seq(&format!("j{i:02}"), "JUNK", 20)));
        let d = ds(seqs);
        let b1 = balance_junk(&d, 42).unwrap();
        let b2 = balance_junk(&d, 42).unwrap();
        assert_eq!(b1, b2);
        let counts = b1.class_counts();
        assert_eq!(counts[&ItemLabel::junk()], 7);
        assert_eq!(counts[&ItemLabel::new("stone")], 7);
        assert_eq!(counts[&ItemLabel::new("hand_to_mouth")], 3);
        let b3 = balance_junk(&d, 7).unwrap();
        assert_ne!(b1, b3);
    }

    #[test]
    fn balancing_requires_a_real_item() {
        let d = ds(vec![seq("j", "JUNK", 20)]);
        assert!(balance_junk(&d, 1).is_err());
    }

    #[test]
    fn channel_selection_widths_and_idempotence() {
        let d = ds(vec![seq("a", "stone", 20)]);
        assert_eq!(select_channels(&d, ChannelSet::All).unwrap().channels().len(), 10);
        let ag = select_channels(&d, ChannelSet::AccGyro).unwrap();
        assert_eq!(ag.channels(), &ChannelRole::ALL[..6]);
        assert_eq!(select_channels(&ag, ChannelSet::AccGyro).unwrap(), ag);
        let q = select_channels(&d, ChannelSet::Quat).unwrap();
        assert_eq!(q.channels(), &ChannelRole::QUAT);
        assert_eq!(q.sequences()[0].samples.row(0)[0], 1.0);
        assert!(select_channels(&ag, ChannelSet::Quat).is_err());
    }

    #[test]
    fn column_units_are_checked() {
        assert!(unit_matches("acc_x", "m/s^2"));
        assert!(unit_matches("gyr_z", "deg/s"));
        assert!(!unit_matches("acc_x", "g"));
        assert!(!unit_matches("gyr_x", "rad/s"));
        assert_eq!(
            parse_column_header("acc_x [m/s^2]").unwrap(),
            ("acc_x".to_string(), Some("m/s^2".to_string()))
        );
    }
}
