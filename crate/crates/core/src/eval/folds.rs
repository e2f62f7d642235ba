use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::ItemLabel;
use crate::error::{Error, Result};
use crate::seed;

/// Assignment of sequence ids to `k` disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold members in shuffled order.
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn assignments(&self) -> BTreeMap<String, usize> {
        self.folds
            .iter()
            .enumerate()
            .flat_map(|(f, ids)| ids.iter().map(move |id| (id.clone(), f)))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.iter().any(|x| x == id))
    }
}

fn check(ids: &[String], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if ids.len() < k {
        return Err(Error::InvalidDataset(format!("{} sequences cannot fill {k} folds", ids.len())));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::InvalidDataset(format!("duplicate sequence id `{dup}`")));
    }
    Ok(())
}

/// Seeded whole-list shuffle, then contiguous split. The first `n mod k`
/// folds take one extra id.
pub fn make_folds(ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    check(ids, k)?;
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut seed::derived_rng(seed, "folds"));
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(shuffled[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Label-stratified variant: each label's ids are shuffled and dealt
/// round-robin, continuing across labels, so sizes still differ by at most one.
pub fn make_stratified_folds(ids: &[String], labels: &[ItemLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    check(ids, k)?;
    if labels.len() != ids.len() {
        return Err(Error::Shape(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    let mut groups: BTreeMap<&ItemLabel, Vec<String>> = BTreeMap::new();
    for (id, label) in ids.iter().zip(labels) {
        groups.entry(label).or_default().push(id.clone());
    }
    let mut rng = seed::derived_rng(seed, "folds/stratified");
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        for id in members.drain(..) {
            folds[next].push(id);
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, seed, folds })
}
