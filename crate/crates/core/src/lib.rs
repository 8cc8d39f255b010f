//! foodsynth: deterministic synthetic meal-tray scenes for class-agnostic
//! food instance segmentation, plus a COCO-style evaluator.
//!
//! Pipeline:
//!
//! 1. [`randomizer`] samples a [`scene::Scene`] from a seed and a [`randomizer::GenConfig`].
//! 2. [`render`] rasterizes it to an RGB image and an instance-id map; only
//!    food objects become instances, distractors stay background.
//! 3. [`generate`] renders many scenes in parallel and [`coco`] stores the
//!    images and RLE-encoded masks as a COCO dataset.
//! 4. [`eval`] scores predictions against ground truth (mask or box AP over
//!    IoU thresholds 0.50:0.95).
//! 5. [`protocol`] splits datasets and summarizes them.

pub mod coco;
pub mod eval;
pub mod generate;
pub mod json;
pub mod mask;
pub mod mesh;
pub mod protocol;
pub mod randomizer;
pub mod render;
pub mod rng;
pub mod scene;
pub mod texture;

pub use coco::{CocoDataset, Detection, Rle};
pub use eval::{evaluate, EvalConfig, EvalReport, IouType};
pub use generate::{generate_coco, generate_dataset};
pub use protocol::{split_dataset, SplitSpec, SplitUnit};
pub use randomizer::{sample_scene, GenConfig};
pub use render::{extract_masks, render, RenderOutput};
pub use scene::{validate_scene, Scene};
