//! COCO-format ground truth and prediction files with uncompressed RLE masks.
//!
//! RLE counts scan the mask column-major (down column 0, then column 1, ...)
//! and alternate zero-runs and one-runs, always starting with a zero-run
//! (which may have length 0). Unknown JSON fields are ignored on read.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::json::{to_canonical_string, CanonicalStyle};
use crate::mask::BinaryMask;

pub const FOOD_CATEGORY_ID: u64 = 1;
pub const FOOD_CATEGORY_NAME: &str = "food";
pub const ANNOTATIONS_FILE: &str = "annotations.json";

#[derive(Debug, thiserror::Error)]
pub enum CocoError {
    #[error("RLE counts sum to {got}, expected {expected} (= height * width)")]
    RleCountMismatch { expected: u64, got: u64 },
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{record}: {message}")]
    Invalid { record: String, message: String },
}

impl CocoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CocoError::Io { path: path.display().to_string(), source }
    }

    fn invalid(record: String, message: impl Into<String>) -> Self {
        CocoError::Invalid { record, message: message.into() }
    }
}

/// Uncompressed run-length encoding of a binary mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl Rle {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.size[0]) * u64::from(self.size[1])
    }

    pub fn check(&self) -> Result<(), CocoError> {
        let got: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        if got != self.pixel_count() {
            return Err(CocoError::RleCountMismatch { expected: self.pixel_count(), got });
        }
        Ok(())
    }

    /// Number of set pixels (sum of the one-runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    /// `(start, end)` column-major index ranges of the one-runs.
    fn one_runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += u64::from(c);
            (i % 2 == 1 && c > 0).then_some((start, pos))
        })
    }

    /// Tight `[x, y, w, h]` box of the set pixels, computed from the runs.
    pub fn bbox(&self) -> Option<[u32; 4]> {
        let h = u64::from(self.height());
        if h == 0 {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0u64, 0u64);
        let mut any = false;
        for (start, end) in self.one_runs() {
            any = true;
            let last = end - 1;
            let (cx0, cy0) = (start / h, start % h);
            let (cx1, cy1) = (last / h, last % h);
            x0 = x0.min(cx0);
            x1 = x1.max(cx1);
            if cx0 == cx1 {
                y0 = y0.min(cy0);
                y1 = y1.max(cy1);
            } else {
                // a run wrapping past a column bottom touches both the top and the bottom row
                y0 = 0;
                y1 = h - 1;
            }
        }
        any.then(|| [x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32])
    }

    /// Set pixels shared with `other`, computed by merging runs.
    pub fn intersection_area(&self, other: &Rle) -> Option<u64> {
        if self.size != other.size {
            return None;
        }
        let mut a = self.one_runs().peekable();
        let mut b = other.one_runs().peekable();
        let mut total = 0;
        while let (Some(&(a0, a1)), Some(&(b0, b1))) = (a.peek(), b.peek()) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += hi - lo;
            }
            if a1 <= b1 {
                a.next();
            } else {
                b.next();
            }
        }
        Some(total)
    }
}

/// Column-major run-length encoding of `mask`.
pub fn encode_rle(mask: &BinaryMask) -> Rle {
    let (w, h) = (mask.width(), mask.height());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle { size: [h, w], counts }
}

pub fn decode_rle(rle: &Rle) -> Result<BinaryMask, CocoError> {
    rle.check()?;
    let (h, w) = (rle.height(), rle.width());
    let mut mask = BinaryMask::new(w, h);
    let mut pos = 0u64;
    for (i, &c) in rle.counts.iter().enumerate() {
        if i % 2 == 1 {
            for k in pos..pos + u64::from(c) {
                mask.set((k / u64::from(h)) as u32, (k % u64::from(h)) as u32, true);
            }
        }
        pos += u64::from(c);
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Background difficulty tier ("easy", "medium", "hard"); not part of core COCO.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Rle,
    /// `[x, y, width, height]`, origin top-left.
    pub bbox: [f64; 4],
    pub area: u64,
    pub iscrowd: u8,
}

impl CocoAnnotation {
    /// Annotation for one food mask; area and box are derived from the mask.
    pub fn from_mask(id: u64, image_id: u64, mask: &BinaryMask) -> Self {
        let segmentation = encode_rle(mask);
        let bbox = mask.bbox().map(|b| b.map(f64::from)).unwrap_or([0.0; 4]);
        Self {
            id,
            image_id,
            category_id: FOOD_CATEGORY_ID,
            area: segmentation.area(),
            segmentation,
            bbox,
            iscrowd: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

impl Category {
    pub fn food() -> Self {
        Self { id: FOOD_CATEGORY_ID, name: FOOD_CATEGORY_NAME.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<Category>,
}

impl Default for CocoDataset {
    fn default() -> Self {
        Self { images: Vec::new(), annotations: Vec::new(), categories: vec![Category::food()] }
    }
}

/// One predicted instance from a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u64,
    pub score: f64,
    pub segmentation: Rle,
    pub bbox: [f64; 4],
}

impl Detection {
    pub fn from_annotation(a: &CocoAnnotation, score: f64) -> Self {
        Self {
            image_id: a.image_id,
            category_id: a.category_id,
            score,
            segmentation: a.segmentation.clone(),
            bbox: a.bbox,
        }
    }
}

fn bbox_ok(b: &[f64; 4]) -> bool {
    b.iter().all(|v| v.is_finite()) && b[2] >= 0.0 && b[3] >= 0.0
}

impl CocoDataset {
    /// Checks every dataset invariant, naming the first offending record.
    pub fn validate(&self) -> Result<(), CocoError> {
        if !self.categories.iter().any(|c| c.id == FOOD_CATEGORY_ID && c.name == FOOD_CATEGORY_NAME) {
            return Err(CocoError::invalid("categories".into(), "missing {id: 1, name: \"food\"}"));
        }
        let mut images = std::collections::HashMap::new();
        for (i, img) in self.images.iter().enumerate() {
            if images.insert(img.id, img).is_some() {
                return Err(CocoError::invalid(
                    format!("images[{i}] (id {})", img.id),
                    "duplicate image id",
                ));
            }
        }
        let mut ann_ids = HashSet::new();
        for (i, a) in self.annotations.iter().enumerate() {
            let record = format!("annotations[{i}] (id {})", a.id);
            if !ann_ids.insert(a.id) {
                return Err(CocoError::invalid(record, "duplicate annotation id"));
            }
            let Some(img) = images.get(&a.image_id) else {
                return Err(CocoError::invalid(
                    record,
                    format!("image_id {} does not exist", a.image_id),
                ));
            };
            if a.category_id != FOOD_CATEGORY_ID {
                return Err(CocoError::invalid(record, format!("category_id {} is not 1", a.category_id)));
            }
            if a.iscrowd != 0 {
                return Err(CocoError::invalid(record, "iscrowd must be 0"));
            }
            if a.segmentation.size != [img.height, img.width] {
                return Err(CocoError::invalid(
                    record,
                    format!(
                        "segmentation size {:?} does not match image {}x{} (height, width)",
                        a.segmentation.size, img.height, img.width
                    ),
                ));
            }
            if let Err(e) = a.segmentation.check() {
                return Err(CocoError::invalid(record, e.to_string()));
            }
            let area = a.segmentation.area();
            if a.area != area {
                return Err(CocoError::invalid(record, format!("area {} but mask has {area} pixels", a.area)));
            }
            let tight = a.segmentation.bbox().map(|b| b.map(f64::from)).unwrap_or([0.0; 4]);
            if a.bbox != tight {
                return Err(CocoError::invalid(
                    record,
                    format!("bbox {:?} is not the tight mask box {tight:?}", a.bbox),
                ));
            }
        }
        Ok(())
    }
}

pub fn validate_detections(dets: &[Detection]) -> Result<(), CocoError> {
    for (i, d) in dets.iter().enumerate() {
        let record = format!("results[{i}] (image_id {})", d.image_id);
        if !(0.0..=1.0).contains(&d.score) {
            return Err(CocoError::invalid(record, format!("score {} outside [0, 1]", d.score)));
        }
        if d.category_id != FOOD_CATEGORY_ID {
            return Err(CocoError::invalid(record, format!("category_id {} is not 1", d.category_id)));
        }
        if !bbox_ok(&d.bbox) {
            return Err(CocoError::invalid(record, format!("invalid bbox {:?}", d.bbox)));
        }
        if let Err(e) = d.segmentation.check() {
            return Err(CocoError::invalid(record, e.to_string()));
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CocoError> {
    let text = fs::read_to_string(path).map_err(|e| CocoError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|source| CocoError::Json { path: path.display().to_string(), source })
}

fn write_canonical<T: Serialize>(path: &Path, value: &T) -> Result<(), CocoError> {
    let text = to_canonical_string(value, CanonicalStyle::COMPACT)
        .map_err(|source| CocoError::Json { path: path.display().to_string(), source })?;
    fs::write(path, text).map_err(|e| CocoError::io(path, e))
}

/// Reads and validates a ground-truth file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<CocoDataset, CocoError> {
    let ds: CocoDataset = read_json(path.as_ref())?;
    ds.validate()?;
    Ok(ds)
}

/// Reads and validates a results file (a JSON list of detections).
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<Detection>, CocoError> {
    let dets: Vec<Detection> = read_json(path.as_ref())?;
    validate_detections(&dets)?;
    Ok(dets)
}

/// Writes a ground-truth file with sorted keys; identical datasets give identical bytes.
pub fn write_annotations(dataset: &CocoDataset, path: impl AsRef<Path>) -> Result<(), CocoError> {
    dataset.validate()?;
    write_canonical(path.as_ref(), dataset)
}

/// Writes `annotations.json` into `output_dir` (created if needed) and returns its path.
pub fn write_dataset(dataset: &CocoDataset, output_dir: impl AsRef<Path>) -> Result<PathBuf, CocoError> {
    let dir = output_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CocoError::io(dir, e))?;
    let path = dir.join(ANNOTATIONS_FILE);
    write_annotations(dataset, &path)?;
    Ok(path)
}

pub fn write_results(dets: &[Detection], path: impl AsRef<Path>) -> Result<(), CocoError> {
    validate_detections(dets)?;
    write_canonical(path.as_ref(), &dets)
}
