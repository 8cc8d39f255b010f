//! Train/test splits and dataset statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use serde::Serialize;

use crate::coco::CocoDataset;
use crate::rng::Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SplitError {
    #[error("cannot split a dataset without images")]
    Empty,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("unknown split unit {0:?} (expected per-instance or per-image)")]
    Unit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitUnit {
    /// Balance the number of annotations on each side.
    PerInstance,
    /// Balance the number of images on each side.
    PerImage,
}

impl FromStr for SplitUnit {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-instance" => Ok(SplitUnit::PerInstance),
            "per-image" => Ok(SplitUnit::PerImage),
            other => Err(SplitError::Unit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub unit: SplitUnit,
    pub seed: u64,
}

/// Two disjoint datasets whose images partition the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: CocoDataset,
    pub test: CocoDataset,
}

fn take_fraction(order: &[usize], fraction: f64, train: &mut [bool]) {
    let n = (fraction * order.len() as f64).round() as usize;
    for &i in &order[..n] {
        train[i] = true;
    }
}

/// Which images go to train, indexed like `dataset.images`.
pub fn assign_train(dataset: &CocoDataset, spec: &SplitSpec) -> Result<Vec<bool>, SplitError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(SplitError::Fraction(spec.train_fraction));
    }
    let n = dataset.images.len();
    if n == 0 {
        return Err(SplitError::Empty);
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(spec.seed).shuffle(&mut order);
    let mut train = vec![false; n];
    match spec.unit {
        SplitUnit::PerImage => take_fraction(&order, spec.train_fraction, &mut train),
        SplitUnit::PerInstance => {
            let counts = instance_counts(dataset);
            // Images without instances cannot move the balance; split them by image count.
            let (empty, mut busy): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| counts[i] == 0);
            take_fraction(&empty, spec.train_fraction, &mut train);
            busy.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
            let total: usize = counts.iter().sum();
            let target = spec.train_fraction * total as f64;
            let mut have = 0usize;
            for i in busy {
                let with = (have + counts[i]) as f64;
                if (with - target).abs() < (have as f64 - target).abs() {
                    train[i] = true;
                    have += counts[i];
                }
            }
        }
    }
    Ok(train)
}

fn instance_counts(dataset: &CocoDataset) -> Vec<usize> {
    let index: HashMap<u64, usize> = dataset.images.iter().enumerate().map(|(i, img)| (img.id, i)).collect();
    let mut counts = vec![0; dataset.images.len()];
    for a in &dataset.annotations {
        if let Some(&i) = index.get(&a.image_id) {
            counts[i] += 1;
        }
    }
    counts
}

fn subset(dataset: &CocoDataset, keep: impl Fn(usize) -> bool) -> CocoDataset {
    let images: Vec<_> =
        dataset.images.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, img)| img.clone()).collect();
    let ids: HashSet<u64> = images.iter().map(|img| img.id).collect();
    CocoDataset {
        images,
        annotations: dataset.annotations.iter().filter(|a| ids.contains(&a.image_id)).cloned().collect(),
        categories: dataset.categories.clone(),
    }
}

/// Splits by whole images; input order is preserved on both sides.
pub fn split_dataset(dataset: &CocoDataset, spec: &SplitSpec) -> Result<Split, SplitError> {
    let train = assign_train(dataset, spec)?;
    Ok(Split { train: subset(dataset, |i| train[i]), test: subset(dataset, |i| !train[i]) })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AreaQuantiles {
    pub min: u64,
    pub p25: u64,
    pub median: u64,
    pub p75: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub images: usize,
    pub instances: usize,
    /// instances per image -> number of images
    pub instances_per_image: BTreeMap<usize, usize>,
    pub images_per_difficulty: BTreeMap<String, usize>,
    pub instances_per_difficulty: BTreeMap<String, usize>,
    pub mask_area: Option<AreaQuantiles>,
}

/// Nearest-rank quantile of ascending `sorted`.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn dataset_stats(dataset: &CocoDataset) -> DatasetStats {
    let counts = instance_counts(dataset);
    let mut instances_per_image = BTreeMap::new();
    let mut images_per_difficulty = BTreeMap::new();
    let mut instances_per_difficulty = BTreeMap::new();
    for (img, &c) in dataset.images.iter().zip(&counts) {
        *instances_per_image.entry(c).or_insert(0) += 1;
        let key = img.difficulty.clone().unwrap_or_else(|| "unknown".into());
        *images_per_difficulty.entry(key.clone()).or_insert(0) += 1;
        *instances_per_difficulty.entry(key).or_insert(0) += c;
    }
    let mut areas: Vec<u64> = dataset.annotations.iter().map(|a| a.area).collect();
    areas.sort_unstable();
    let mask_area = (!areas.is_empty()).then(|| AreaQuantiles {
        min: areas[0],
        p25: nearest_rank(&areas, 0.25),
        median: nearest_rank(&areas, 0.5),
        p75: nearest_rank(&areas, 0.75),
        max: areas[areas.len() - 1],
    });
    DatasetStats {
        images: dataset.images.len(),
        instances: dataset.annotations.len(),
        instances_per_image,
        images_per_difficulty,
        instances_per_difficulty,
        mask_area,
    }
}
