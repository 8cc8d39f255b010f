//! Dataset generation: scene sampling, rendering, mask extraction, and output files.
//!
//! Output layout:
//!
//! ```text
//! out/
//!   annotations.json
//!   images/000000.png   8-bit RGB
//!   masks/000000.png    16-bit food instance ids (0 = background)
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::coco::{write_dataset, Category, CocoAnnotation, CocoDataset, CocoError, CocoImage};
use crate::randomizer::{sample_scene, ConfigError, GenConfig};
use crate::render::{extract_masks, render, InstanceMask, RenderError, RenderOutput};
use crate::rng::hash64;
use crate::scene::Scene;

/// Images rendered concurrently before their buffers are dropped.
const BATCH: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("image {index}: {source}")]
    Render { index: usize, source: RenderError },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Coco(#[from] CocoError),
}

/// Seed of the scene at `index` within a dataset generated from `seed`.
pub fn scene_seed(seed: u64, index: u64) -> u64 {
    hash64(hash64(seed) ^ index)
}

pub fn image_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// One rendered image with its annotated instances.
#[derive(Debug, Clone)]
pub struct Sample {
    pub index: usize,
    pub scene: Scene,
    pub render: RenderOutput,
    pub masks: Vec<InstanceMask>,
}

impl Sample {
    pub fn image_id(&self) -> u64 {
        self.index as u64 + 1
    }

    pub fn coco_image(&self) -> CocoImage {
        CocoImage {
            id: self.image_id(),
            file_name: image_file_name(self.index),
            width: self.render.width,
            height: self.render.height,
            difficulty: Some(self.scene.difficulty.as_str().to_string()),
        }
    }

    /// Annotations in instance-id order, numbered from `first_id`.
    pub fn annotations(&self, first_id: u64) -> Vec<CocoAnnotation> {
        self.masks
            .iter()
            .zip(first_id..)
            .map(|(m, id)| CocoAnnotation::from_mask(id, self.image_id(), &m.mask))
            .collect()
    }

    /// Id map restricted to annotated instances.
    pub fn annotated_id_map(&self) -> RenderOutput {
        let keep: HashSet<u16> = self.masks.iter().map(|m| m.instance_id as u16).collect();
        let mut out = self.render.clone();
        for id in &mut out.id_buffer {
            if !keep.contains(id) {
                *id = 0;
            }
        }
        out
    }
}

pub fn generate_sample(config: &GenConfig, seed: u64, index: usize) -> Result<Sample, GenerateError> {
    let scene = sample_scene(config, scene_seed(seed, index as u64))?;
    let render = render(&scene).map_err(|source| GenerateError::Render { index, source })?;
    let masks = extract_masks(&render, u64::from(config.min_mask_pixels));
    Ok(Sample { index, scene, render, masks })
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GenerateSummary {
    pub images: usize,
    pub instances: usize,
    pub per_difficulty: BTreeMap<String, usize>,
}

impl GenerateSummary {
    pub fn of(dataset: &CocoDataset) -> Self {
        let mut per_difficulty = BTreeMap::new();
        for img in &dataset.images {
            let key = img.difficulty.clone().unwrap_or_else(|| "unknown".into());
            *per_difficulty.entry(key).or_insert(0) += 1;
        }
        Self { images: dataset.images.len(), instances: dataset.annotations.len(), per_difficulty }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenerateError + '_ {
    move |source| GenerateError::Io { path: path.display().to_string(), source }
}

fn write_pngs(sample: &Sample, out_dir: &Path) -> Result<(), GenerateError> {
    let name = image_file_name(sample.index);
    let rgb = out_dir.join("images").join(&name);
    sample
        .render
        .save_rgb_png(&rgb)
        .map_err(|source| GenerateError::Render { index: sample.index, source })?;
    sample
        .annotated_id_map()
        .save_id_png(out_dir.join("masks").join(&name))
        .map_err(|source| GenerateError::Render { index: sample.index, source })
}

/// Generates `count` images and their annotations. When `out_dir` is given,
/// PNGs are written as each batch finishes; otherwise only annotations are kept.
pub fn generate_coco(
    config: &GenConfig,
    count: usize,
    seed: u64,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(usize, usize),
) -> Result<CocoDataset, GenerateError> {
    config.validate()?;
    if let Some(dir) = out_dir {
        for sub in ["images", "masks"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
    }
    let mut dataset = CocoDataset { categories: vec![Category::food()], ..CocoDataset::default() };
    let mut next_ann = 1u64;
    for start in (0..count).step_by(BATCH) {
        let end = (start + BATCH).min(count);
        let batch: Vec<(CocoImage, Sample)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let sample = generate_sample(config, seed, i)?;
                if let Some(dir) = out_dir {
                    write_pngs(&sample, dir)?;
                }
                Ok((sample.coco_image(), sample))
            })
            .collect::<Result<_, GenerateError>>()?;
        for (image, sample) in batch {
            let anns = sample.annotations(next_ann);
            next_ann += anns.len() as u64;
            dataset.images.push(image);
            dataset.annotations.extend(anns);
        }
        progress(end, count);
    }
    Ok(dataset)
}

/// Writes a full dataset to `out_dir` and returns the path of `annotations.json`.
pub fn generate_dataset(
    config: &GenConfig,
    count: usize,
    seed: u64,
    out_dir: &Path,
    progress: impl FnMut(usize, usize),
) -> Result<(PathBuf, GenerateSummary), GenerateError> {
    let dataset = generate_coco(config, count, seed, Some(out_dir), progress)?;
    let path = write_dataset(&dataset, out_dir)?;
    Ok((path, GenerateSummary::of(&dataset)))
}
