//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls the evaluator, the RLE decoder, or the rasterizer; each
//! oracle recomputes its answer from first principles.

#![allow(dead_code)]

use foodsynth::coco::{encode_rle, Category, CocoAnnotation, CocoDataset, CocoImage, Detection, Rle};
use foodsynth::mask::BinaryMask;
use foodsynth::rng::Rng;
use foodsynth::scene::{
    Camera, Difficulty, FoodObject, Light, Material, MealTray, Primitive, PrimitiveKind, RigidTransform, Scene,
    Vec3, WellLayout,
};

// ---------------------------------------------------------------- scenes

pub fn tray() -> MealTray {
    MealTray {
        outer_size: [0.4, 0.3],
        height: 0.03,
        wells: WellLayout { row_counts: vec![2, 3], margin: 0.015, depth: 0.02 },
        material: Material::solid([0.7, 0.7, 0.7]),
    }
}

pub fn primitive(kind: PrimitiveKind, half: [f64; 3], local: RigidTransform) -> Primitive {
    Primitive { kind, half_extents: Vec3::new(half[0], half[1], half[2]), local_transform: local }
}

pub fn food(instance_id: u32, primitives: Vec<Primitive>, at: RigidTransform) -> FoodObject {
    FoodObject {
        instance_id,
        primitives,
        cluster_transform: at,
        material: Material::solid([0.8, 0.4, 0.2]),
        well_index: None,
    }
}

/// Scene with the given foods, no distractors, one overhead light.
pub fn scene_with(foods: Vec<FoodObject>, camera: Camera) -> Scene {
    Scene {
        seed: 0,
        tray: tray(),
        food_objects: foods,
        distractors: vec![],
        lights: vec![Light { position: Vec3::new(0.3, -0.2, 2.0), intensity: 1.0, color: [1.0; 3] }],
        camera,
        background_material: Material::solid([0.05, 0.05, 0.05]),
        difficulty: Difficulty::Easy,
    }
}

pub fn camera(position: Vec3, look_at: Vec3, up: Vec3, vertical_fov: f64, size: u32) -> Camera {
    Camera { position, look_at, up, vertical_fov, image_size: [size, size] }
}

// ---------------------------------------------------------------- ray casting

/// Camera basis and focal length recomputed from the camera parameters.
pub struct Pinhole {
    pub eye: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl Pinhole {
    pub fn new(c: &Camera) -> Self {
        let forward = (c.look_at - c.position).normalize();
        let right = forward.cross(&c.up).normalize();
        let up = right.cross(&forward);
        let [width, height] = c.image_size;
        let focal = 0.5 * height as f64 / (0.5 * c.vertical_fov).tan();
        Self { eye: c.position, forward, right, up, focal, width, height }
    }

    /// Unit ray through the center of pixel `(x, y)`.
    pub fn ray(&self, x: u32, y: u32) -> Vec3 {
        let u = (x as f64 + 0.5 - 0.5 * self.width as f64) / self.focal;
        let v = (0.5 * self.height as f64 - (y as f64 + 0.5)) / self.focal;
        (self.forward + self.right * u + self.up * v).normalize()
    }
}

/// Nearest positive hit of a ray with an oriented box (slab method in the box frame).
pub fn ray_box(origin: &Vec3, dir: &Vec3, to_world: &RigidTransform, half: &Vec3) -> Option<f64> {
    let rt = to_world.rotation.transpose();
    let o = rt * (origin - to_world.translation);
    let d = rt * dir;
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let a = (-half[k] - o[k]) / d[k];
        let b = (half[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1 && t1 > 0.0).then_some(if t0 > 0.0 { t0 } else { t1 })
}

/// Nearest positive hit of a ray with an ellipsoid.
pub fn ray_ellipsoid(origin: &Vec3, dir: &Vec3, to_world: &RigidTransform, radii: &Vec3) -> Option<f64> {
    let rt = to_world.rotation.transpose();
    let o = (rt * (origin - to_world.translation)).component_div(radii);
    let d = (rt * dir).component_div(radii);
    let a = d.dot(&d);
    let b = 2.0 * o.dot(&d);
    let c = o.dot(&o) - 1.0;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (t0, t1) = ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a));
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

// ---------------------------------------------------------------- metric oracle

/// Column-major pixel vector expanded straight from the counts.
pub fn expand_rle(rle: &Rle) -> Vec<bool> {
    let mut px = Vec::new();
    for (i, &c) in rle.counts.iter().enumerate() {
        px.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    assert_eq!(px.len() as u64, u64::from(rle.size[0]) * u64::from(rle.size[1]));
    px
}

fn pixel_iou(a: &Rle, b: &Rle) -> f64 {
    let (pa, pb) = (expand_rle(a), expand_rle(b));
    let inter = pa.iter().zip(&pb).filter(|(x, y)| **x && **y).count();
    let union = pa.iter().zip(&pb).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Box IoU by counting unit cells; boxes must have integer coordinates.
fn cell_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let cells = |r: &[f64; 4]| {
        assert!(r.iter().all(|v| v.fract() == 0.0), "oracle needs integer boxes");
        let [x, y, w, h] = r.map(|v| v as i64);
        (x..x + w).flat_map(move |i| (y..y + h).map(move |j| (i, j))).collect::<std::collections::HashSet<_>>()
    };
    let (ca, cb) = (cells(a), cells(b));
    let inter = ca.intersection(&cb).count();
    let union = ca.union(&cb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Overlap {
    Mask,
    Box,
}

fn overlap(kind: Overlap, a_seg: &Rle, a_box: &[f64; 4], b_seg: &Rle, b_box: &[f64; 4]) -> f64 {
    match kind {
        Overlap::Mask => pixel_iou(a_seg, b_seg),
        Overlap::Box => cell_iou(a_box, b_box),
    }
}

#[derive(Debug, PartialEq)]
pub struct OracleScore {
    pub ap: Vec<Option<f64>>,
    pub map_all: Option<f64>,
}

/// Brute-force scorer: box-IoU NMS at 0.5, greedy matching, 101-point AP.
pub fn brute_force_score(gt: &CocoDataset, dets: &[Detection], kind: Overlap) -> OracleScore {
    let thresholds: Vec<f64> = (0..10).map(|i| (50.0 + 5.0 * i as f64) / 100.0).collect();
    // (score, image position, rank within image, det) after NMS
    let mut kept_all: Vec<(f64, usize, usize, &Detection)> = Vec::new();
    let mut gt_total = 0;
    let per_image: Vec<Vec<&CocoAnnotation>> = gt
        .images
        .iter()
        .map(|img| gt.annotations.iter().filter(|a| a.image_id == img.id).collect())
        .collect();
    for (pos, img) in gt.images.iter().enumerate() {
        gt_total += per_image[pos].len();
        let mut mine: Vec<(usize, &Detection)> =
            dets.iter().enumerate().filter(|(_, d)| d.image_id == img.id).collect();
        // selection sort: highest score first, earliest input first on ties
        let mut ordered = Vec::new();
        while !mine.is_empty() {
            let mut best = 0;
            for k in 1..mine.len() {
                let (ik, dk) = mine[k];
                let (ib, db) = mine[best];
                if dk.score > db.score || (dk.score == db.score && ik < ib) {
                    best = k;
                }
            }
            ordered.push(mine.remove(best).1);
        }
        let mut kept: Vec<&Detection> = Vec::new();
        for d in ordered {
            if kept.iter().all(|k| cell_iou(&d.bbox, &k.bbox) <= 0.5) && kept.len() < 100 {
                kept.push(d);
            }
        }
        for (rank, d) in kept.into_iter().enumerate() {
            kept_all.push((d.score, pos, rank, d));
        }
    }

    let mut ap = Vec::new();
    for &t in &thresholds {
        // per-image greedy matching, detections visited by rank
        let mut flags: Vec<(f64, usize, usize, bool)> = Vec::new();
        for (pos, gts) in per_image.iter().enumerate() {
            let mut taken = vec![false; gts.len()];
            let mut mine: Vec<_> = kept_all.iter().filter(|k| k.1 == pos).collect();
            mine.sort_by_key(|k| k.2);
            for &&(score, p, rank, d) in &mine {
                let mut best: Option<(usize, f64)> = None;
                for (g, a) in gts.iter().enumerate() {
                    if taken[g] {
                        continue;
                    }
                    let v = overlap(kind, &d.segmentation, &d.bbox, &a.segmentation, &a.bbox);
                    match best {
                        Some((_, bv)) if v <= bv => {}
                        _ => best = Some((g, v)),
                    }
                }
                let hit = match best {
                    Some((g, v)) if v >= t => {
                        taken[g] = true;
                        true
                    }
                    _ => false,
                };
                flags.push((score, p, rank, hit));
            }
        }
        flags.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        if gt_total == 0 {
            ap.push(if flags.is_empty() { None } else { Some(0.0) });
            continue;
        }
        let mut points = Vec::new();
        let mut tp = 0;
        for (i, f) in flags.iter().enumerate() {
            if f.3 {
                tp += 1;
            }
            points.push((tp as f64 / gt_total as f64, tp as f64 / (i + 1) as f64));
        }
        let mut sum = 0.0;
        for k in 0..=100 {
            let r = k as f64 / 100.0;
            let mut p: f64 = 0.0;
            for &(rec, prec) in &points {
                if rec >= r && prec > p {
                    p = prec;
                }
            }
            sum += p;
        }
        ap.push(Some(sum / 101.0));
    }
    let defined: Vec<f64> = ap.iter().flatten().copied().collect();
    let map_all = if defined.is_empty() {
        None
    } else {
        let mut s = 0.0;
        for v in &defined {
            s += v;
        }
        Some(s / defined.len() as f64)
    };
    OracleScore { ap, map_all }
}

// ---------------------------------------------------------------- random micro datasets

fn random_mask(rng: &mut Rng, w: u32, h: u32) -> BinaryMask {
    loop {
        let x0 = rng.uniform_u32(0, w - 1);
        let y0 = rng.uniform_u32(0, h - 1);
        let x1 = rng.uniform_u32(x0, w - 1);
        let y1 = rng.uniform_u32(y0, h - 1);
        let noise = rng.uniform_f64(0.0, 0.3);
        let m = BinaryMask::from_fn(w, h, |x, y| {
            let inside = (x0..=x1).contains(&x) && (y0..=y1).contains(&y);
            inside != rng.chance(noise)
        });
        if m.area() > 0 {
            return m;
        }
    }
}

/// Flips a few pixels of `m`, keeping it nonempty.
fn perturb(rng: &mut Rng, m: &BinaryMask) -> BinaryMask {
    let p = rng.uniform_f64(0.0, 0.25);
    loop {
        let out = BinaryMask::from_fn(m.width(), m.height(), |x, y| m.get(x, y) != rng.chance(p));
        if out.area() > 0 {
            return out;
        }
    }
}

/// Up to 3 small images, up to 4 ground truths and 5 detections each.
/// Scores come from a coarse grid so ties are common.
pub fn random_micro_case(rng: &mut Rng) -> (CocoDataset, Vec<Detection>) {
    let mut ds = CocoDataset { categories: vec![Category::food()], ..CocoDataset::default() };
    let mut dets = Vec::new();
    let mut next = 1;
    for i in 0..rng.uniform_u32(1, 3) {
        let (w, h) = (rng.uniform_u32(3, 8), rng.uniform_u32(3, 8));
        let id = u64::from(i) * 7 + 3;
        ds.images.push(CocoImage { id, file_name: format!("{i}.png"), width: w, height: h, difficulty: None });
        let mut masks = Vec::new();
        for _ in 0..rng.uniform_u32(0, 4) {
            let m = random_mask(rng, w, h);
            ds.annotations.push(CocoAnnotation::from_mask(next, id, &m));
            next += 1;
            masks.push(m);
        }
        for _ in 0..rng.uniform_u32(0, 5) {
            let m = if !masks.is_empty() && rng.chance(0.7) {
                let src = masks[rng.index(masks.len())].clone();
                perturb(rng, &src)
            } else {
                random_mask(rng, w, h)
            };
            let bbox = if rng.chance(0.8) {
                m.bbox().unwrap().map(f64::from)
            } else {
                let x = rng.uniform_u32(0, w - 1);
                let y = rng.uniform_u32(0, h - 1);
                [x, y, rng.uniform_u32(1, w - x), rng.uniform_u32(1, h - y)].map(f64::from)
            };
            dets.push(Detection {
                image_id: id,
                category_id: 1,
                score: f64::from(rng.uniform_u32(1, 5)) / 5.0,
                segmentation: encode_rle(&m),
                bbox,
            });
        }
    }
    // interleave images so input order differs from image order
    rng.shuffle(&mut dets);
    (ds, dets)
}
