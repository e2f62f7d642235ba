use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Domain, ItemLabel, LabelTaxonomy};
use crate::error::{Error, Result};

/// Rows are true labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

const CORNER: &str = "truth\\predicted";

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Trace over total; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Adds `other` cell-wise. Both matrices must share the label order.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::Shape("confusion matrices have different labels".into()));
        }
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        Ok(())
    }

    /// Row-normalised percentages; empty rows stay at zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let sum: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if sum == 0 { 0.0 } else { 100.0 * c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![CORNER.to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(u64::to_string));
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Csv {
            path: "<confusion matrix>".into(),
            message: m,
        };
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut counts = Vec::with_capacity(labels.len());
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != labels.len() + 1 || rec.get(0) != Some(labels.get(i).map(String::as_str).unwrap_or("")) {
                return Err(bad(format!("row {} does not match the header", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<u64>().map_err(|_| bad(format!("row {}: bad count `{v}`", i + 1))))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        if counts.len() != labels.len() {
            return Err(bad(format!("{} rows for {} labels", counts.len(), labels.len())));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    /// Monospace table. With `percent`, cells show row-normalised percentages.
    pub fn render_text(&self, percent: bool) -> String {
        let cells: Vec<Vec<String>> = if percent {
            self.row_percentages()
                .iter()
                .map(|r| r.iter().map(|p| format!("{p:.1}%")).collect())
                .collect()
        } else {
            self.counts
                .iter()
                .map(|r| r.iter().map(u64::to_string).collect())
                .collect()
        };
        let first = self
            .labels
            .iter()
            .map(String::len)
            .chain(std::iter::once(CORNER.len()))
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = (0..self.labels.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].len())
                    .chain(std::iter::once(self.labels[j].len()))
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{CORNER:<first$}");
        for (l, w) in self.labels.iter().zip(&widths) {
            let _ = write!(out, "  {l:>w$}");
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&cells) {
            let _ = write!(out, "{label:<first$}");
            for (c, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Counts `(truth, prediction)` pairs over the label order `order`.
pub fn confusion(truth: &[ItemLabel], pred: &[ItemLabel], order: &[ItemLabel]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let index: HashMap<&ItemLabel, usize> = order.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut cm = ConfusionMatrix::zeros(order.iter().map(|l| l.to_string()).collect());
    for (t, p) in truth.iter().zip(pred) {
        let i = *index.get(t).ok_or_else(|| Error::UnknownLabel(t.to_string()))?;
        let j = *index.get(p).ok_or_else(|| Error::UnknownLabel(p.to_string()))?;
        cm.counts[i][j] += 1;
    }
    Ok(cm)
}

/// Sums item-level counts into domain blocks. Rows and columns are the four
/// movement domains, plus Junk when the item matrix carries the junk label.
pub fn aggregate_domains(cm: &ConfusionMatrix, taxonomy: &LabelTaxonomy) -> Result<ConfusionMatrix> {
    let domains: Vec<Domain> = cm
        .labels
        .iter()
        .map(|l| taxonomy.domain_of(&ItemLabel::new(l.as_str())))
        .collect::<Result<_>>()?;
    let mut order: Vec<Domain> = Domain::MOVEMENT.to_vec();
    if domains.contains(&Domain::Junk) {
        order.push(Domain::Junk);
    }
    let pos = |d: Domain| order.iter().position(|x| *x == d).expect("listed above");
    let mut out = ConfusionMatrix::zeros(order.iter().map(|d| d.to_string()).collect());
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            out.counts[pos(domains[i])][pos(domains[j])] += c;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(names: &[&str]) -> Vec<ItemLabel> {
        names.iter().map(|s| ItemLabel::new(*s)).collect()
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let t = l(&["a", "b", "c", "a"]);
        let cm = confusion(&t, &t, &l(&["a", "b", "c"])).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(cm.accuracy(), 1.0);
    }

    #[test]
    fn one_error_in_four() {
        let cm = confusion(&l(&["a", "a", "b", "b"]), &l(&["a", "b", "b", "b"]), &l(&["a", "b"])).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.trace(), 3);
        assert_eq!(cm.accuracy(), 0.75);
    }

    #[test]
    fn unknown_labels_and_length_mismatch() {
        assert!(confusion(&l(&["a"]), &l(&["z"]), &l(&["a"])).is_err());
        assert!(confusion(&l(&["a"]), &l(&[]), &l(&["a"])).is_err());
    }

    #[test]
    fn domain_aggregation() {
        let tax = LabelTaxonomy::default();
        let order = l(&["cube_10cm", "stone", "pour_water", "hand_on_head"]);
        let truth = l(&["cube_10cm", "cube_10cm", "stone", "pour_water", "hand_on_head"]);
        let pred = l(&["cube_10cm", "stone", "stone", "cube_10cm", "hand_on_head"]);
        let cm = confusion(&truth, &pred, &order).unwrap();
        let d = aggregate_domains(&cm, &tax).unwrap();
        assert_eq!(d.labels, vec!["Grasp", "Grip", "Pinch", "Gross"]);
        // The Grasp/Grasp confusion lands on the diagonal.
        assert_eq!(d.counts[0][0], 3);
        assert_eq!(d.counts[1][0], 1);
        assert_eq!(d.counts[3][3], 1);
        assert_eq!(d.total(), cm.total());
        assert!(d.accuracy() >= cm.accuracy());
    }

    #[test]
    fn junk_gets_its_own_domain_row() {
        let tax = LabelTaxonomy::default();
        let order = l(&["stone", "JUNK"]);
        let cm = confusion(&l(&["stone", "JUNK"]), &l(&["JUNK", "JUNK"]), &order).unwrap();
        let d = aggregate_domains(&cm, &tax).unwrap();
        assert_eq!(d.labels.len(), 5);
        assert_eq!(d.counts[0][4], 1);
        assert_eq!(d.counts[4][4], 1);
    }

    #[test]
    fn identity_item_matrix_gives_identity_domain_matrix() {
        let tax = LabelTaxonomy::default();
        let order = tax.labels();
        let cm = confusion(&order, &order, &order).unwrap();
        let d = aggregate_domains(&cm, &tax).unwrap();
        for (i, row) in d.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                assert_eq!(*c > 0, i == j);
            }
        }
        assert!(aggregate_domains(&ConfusionMatrix::zeros(vec!["nope".into()]), &tax).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cm = ConfusionMatrix {
            labels: vec!["a,b".into(), "c".into()],
            counts: vec![vec![3, 1], vec![0, 7]],
        };
        let back = ConfusionMatrix::from_csv(&cm.to_csv()).unwrap();
        assert_eq!(back, cm);
        assert_eq!(ConfusionMatrix::from_csv(&back.to_csv()).unwrap().to_csv(), cm.to_csv());
        assert!(ConfusionMatrix::from_csv("x,a\na,zz\n").is_err());
        assert!(ConfusionMatrix::from_csv("x,a,b\na,1,2\n").is_err());
    }

    #[test]
    fn text_rendering() {
        let cm = ConfusionMatrix {
            labels: vec!["a".into(), "bb".into()],
            counts: vec![vec![4, 0], vec![0, 2]],
        };
        let pct = cm.render_text(true);
        assert!(pct.contains("100.0%"));
        let lines: Vec<&str> = pct.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|x| x.len() == lines[0].len()));
        assert!(cm.render_text(false).contains('4'));
    }
}
