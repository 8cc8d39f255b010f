//! Parametric description of one meal-tray world.
//!
//! Coordinates are in meters, z-up. The background plane is z = 0, the tray
//! stands on it centered at the origin and its top surface is at
//! z = `tray.height`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::json::{to_canonical_string, CanonicalStyle, FloatFormat};

pub type Vec3 = Vector3<f64>;

/// Largest instance id representable in the 16-bit id buffer.
pub const MAX_INSTANCE_ID: u32 = u16::MAX as u32;
pub const MAX_PRIMITIVES_PER_CLUSTER: usize = 16;
pub const MIN_IMAGE_SIDE: u32 = 64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("primitive index {index} out of bounds for cluster of {len} primitives")]
    PrimitiveIndex { index: usize, len: usize },
}

/// Rotation followed by translation: `p -> R p + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn from_rotation(rotation: &UnitQuaternion<f64>) -> Self {
        Self { rotation: *rotation.to_rotation_matrix().matrix(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: &UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self { rotation: *rotation.to_rotation_matrix().matrix(), translation }
    }

    /// `self ∘ inner`: applies `inner` first, then `self`.
    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Orthonormal with determinant +1, to within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        r.iter().all(|x| x.is_finite())
            && self.translation.iter().all(|x| x.is_finite())
            && orth <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Cylinder,
    Ellipsoid,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] =
        [PrimitiveKind::Sphere, PrimitiveKind::Box, PrimitiveKind::Cylinder, PrimitiveKind::Ellipsoid];
}

/// A closed solid in its own frame, centered at the origin.
///
/// Spheres use `half_extents.x` as radius. Cylinders run along local z with
/// an elliptical cross-section of semi-axes `half_extents.x` and `.y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub half_extents: Vec3,
    pub local_transform: RigidTransform,
}

impl Primitive {
    /// Half-height of the primitive along the world z axis once rotated by `rotation`.
    pub fn vertical_half_extent(&self, rotation: &Matrix3<f64>) -> f64 {
        let h = &self.half_extents;
        let row = rotation.row(2);
        match self.kind {
            PrimitiveKind::Sphere => h.x,
            PrimitiveKind::Box => row[0].abs() * h.x + row[1].abs() * h.y + row[2].abs() * h.z,
            PrimitiveKind::Ellipsoid => {
                ((row[0] * h.x).powi(2) + (row[1] * h.y).powi(2) + (row[2] * h.z).powi(2)).sqrt()
            }
            PrimitiveKind::Cylinder => {
                ((row[0] * h.x).powi(2) + (row[1] * h.y).powi(2)).sqrt() + row[2].abs() * h.z
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    Solid,
    Checker,
    Stripes,
    ValueNoise,
    Blended,
}

impl TextureKind {
    pub const ALL: [TextureKind; 5] = [
        TextureKind::Solid,
        TextureKind::Checker,
        TextureKind::Stripes,
        TextureKind::ValueNoise,
        TextureKind::Blended,
    ];
}

/// Procedural surface pattern, evaluated on world-space positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Solid,
    Checker { scale: f64, secondary: [f64; 3] },
    /// Stripes perpendicular to the horizontal direction at `angle` radians.
    Stripes { scale: f64, secondary: [f64; 3], angle: f64 },
    ValueNoise { scale: f64, secondary: [f64; 3], octaves: u32, seed: u32 },
    /// Checker pattern with its two colors mixed by value noise.
    Blended { scale: f64, secondary: [f64; 3], octaves: u32, seed: u32 },
}

impl Texture {
    pub fn kind(&self) -> TextureKind {
        match self {
            Texture::Solid => TextureKind::Solid,
            Texture::Checker { .. } => TextureKind::Checker,
            Texture::Stripes { .. } => TextureKind::Stripes,
            Texture::ValueNoise { .. } => TextureKind::ValueNoise,
            Texture::Blended { .. } => TextureKind::Blended,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub base_color: [f64; 3],
    pub texture: Texture,
    pub specular_strength: f64,
}

impl Material {
    pub fn solid(base_color: [f64; 3]) -> Self {
        Self { base_color, texture: Texture::Solid, specular_strength: 0.0 }
    }
}

/// Shared view of food objects and distractors: a rigid cluster of primitives.
pub trait Cluster {
    fn primitives(&self) -> &[Primitive];
    fn cluster_transform(&self) -> &RigidTransform;
    fn material(&self) -> &Material;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodObject {
    pub instance_id: u32,
    pub primitives: Vec<Primitive>,
    pub cluster_transform: RigidTransform,
    pub material: Material,
    pub well_index: Option<usize>,
}

/// Clutter outside the tray; rendered, but never annotated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub primitives: Vec<Primitive>,
    pub cluster_transform: RigidTransform,
    pub material: Material,
}

impl Cluster for FoodObject {
    fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }
    fn cluster_transform(&self) -> &RigidTransform {
        &self.cluster_transform
    }
    fn material(&self) -> &Material {
        &self.material
    }
}

impl Cluster for Distractor {
    fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }
    fn cluster_transform(&self) -> &RigidTransform {
        &self.cluster_transform
    }
    fn material(&self) -> &Material {
        &self.material
    }
}

/// World transform of one primitive: the cluster transform composed with the
/// primitive's local transform.
pub fn world_transform<C: Cluster + ?Sized>(
    object: &C,
    primitive_index: usize,
) -> Result<RigidTransform, SceneError> {
    let prims = object.primitives();
    let prim = prims
        .get(primitive_index)
        .ok_or(SceneError::PrimitiveIndex { index: primitive_index, len: prims.len() })?;
    Ok(object.cluster_transform().compose(&prim.local_transform))
}

/// Axis-aligned rectangle in the z = const plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }
    pub fn depth(&self) -> f64 {
        self.max[1] - self.min[1]
    }
    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min[0] >= self.min[0]
            && other.min[1] >= self.min[1]
            && other.max[0] <= self.max[0]
            && other.max[1] <= self.max[1]
    }
    /// True when the interiors overlap; touching edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }
}

/// Recessed compartments, laid out in rows along y. `row_counts[r]` wells sit
/// side by side in row r; all gaps (between wells and to the rim) are `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellLayout {
    pub row_counts: Vec<u32>,
    pub margin: f64,
    pub depth: f64,
}

impl WellLayout {
    pub fn rows(&self) -> usize {
        self.row_counts.len()
    }

    pub fn max_cols(&self) -> u32 {
        self.row_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn capacity(&self) -> usize {
        self.row_counts.iter().map(|&c| c as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealTray {
    pub outer_size: [f64; 2],
    pub height: f64,
    pub wells: WellLayout,
    pub material: Material,
}

impl MealTray {
    pub fn footprint(&self) -> Rect {
        let [w, d] = self.outer_size;
        Rect { min: [-0.5 * w, -0.5 * d], max: [0.5 * w, 0.5 * d] }
    }

    pub fn floor_z(&self) -> f64 {
        self.height - self.wells.depth
    }

    /// Footprints of every well, row by row (row 0 at the back, +y).
    pub fn well_rects(&self) -> Vec<Rect> {
        let fp = self.footprint();
        let m = self.wells.margin;
        let rows = self.wells.rows();
        if rows == 0 {
            return Vec::new();
        }
        let row_h = (fp.depth() - (rows as f64 + 1.0) * m) / rows as f64;
        let mut rects = Vec::with_capacity(self.wells.capacity());
        for (r, &cols) in self.wells.row_counts.iter().enumerate() {
            let y_max = fp.max[1] - m - r as f64 * (row_h + m);
            let y_min = y_max - row_h;
            let n = cols as f64;
            let col_w = (fp.width() - (n + 1.0) * m) / n;
            for c in 0..cols {
                let x_min = fp.min[0] + m + c as f64 * (col_w + m);
                rects.push(Rect { min: [x_min, y_min], max: [x_min + col_w, y_max] });
            }
        }
        rects
    }

    /// Center of a well's floor, if the index exists.
    pub fn well_floor_center(&self, index: usize) -> Option<Vec3> {
        let rect = *self.well_rects().get(index)?;
        let [cx, cy] = rect.center();
        Some(Vec3::new(cx, cy, self.floor_z()))
    }

    /// Center of the tray's top surface.
    pub fn top_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub position: Vec3,
    pub intensity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub vertical_fov: f64,
    /// `[width, height]` in pixels.
    pub image_size: [u32; 2],
}

impl Camera {
    pub fn width(&self) -> u32 {
        self.image_size[0]
    }
    pub fn height(&self) -> u32 {
        self.image_size[1]
    }
    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height() as f64 / (0.5 * self.vertical_fov).tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub tray: MealTray,
    pub food_objects: Vec<FoodObject>,
    pub distractors: Vec<Distractor>,
    pub lights: Vec<Light>,
    pub camera: Camera,
    pub background_material: Material,
    pub difficulty: Difficulty,
}

impl Scene {
    /// Deterministic JSON dump: sorted keys, floats with 9 significant digits.
    pub fn to_json(&self) -> String {
        let style = CanonicalStyle { floats: FloatFormat::Significant(9), pretty: true };
        to_canonical_string(self, style).expect("scene is always serializable")
    }

    pub fn food(&self, instance_id: u32) -> Option<&FoodObject> {
        self.food_objects.iter().find(|f| f.instance_id == instance_id)
    }
}

/// One broken invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, ok: bool, field: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.out.push(Violation { field: field.into(), message: message.into() });
        }
    }

    fn color(&mut self, c: &[f64; 3], field: &str) {
        self.check(
            c.iter().all(|x| (0.0..=1.0).contains(x)),
            field,
            format!("color channels must lie in [0, 1], got {c:?}"),
        );
    }

    fn material(&mut self, m: &Material, field: &str) {
        self.color(&m.base_color, &format!("{field}.base_color"));
        self.check(
            (0.0..=1.0).contains(&m.specular_strength),
            format!("{field}.specular_strength"),
            format!("must lie in [0, 1], got {}", m.specular_strength),
        );
        let tf = format!("{field}.texture");
        match &m.texture {
            Texture::Solid => {}
            Texture::Checker { scale, secondary } | Texture::Stripes { scale, secondary, .. } => {
                self.check(*scale > 0.0, format!("{tf}.scale"), "must be > 0");
                self.color(secondary, &format!("{tf}.secondary"));
            }
            Texture::ValueNoise { scale, secondary, octaves, .. }
            | Texture::Blended { scale, secondary, octaves, .. } => {
                self.check(*scale > 0.0, format!("{tf}.scale"), "must be > 0");
                self.color(secondary, &format!("{tf}.secondary"));
                self.check(
                    (1..=6).contains(octaves),
                    format!("{tf}.octaves"),
                    format!("must lie in [1, 6], got {octaves}"),
                );
            }
        }
    }

    fn cluster<C: Cluster>(&mut self, c: &C, field: &str) {
        let n = c.primitives().len();
        self.check(
            (1..=MAX_PRIMITIVES_PER_CLUSTER).contains(&n),
            format!("{field}.primitives"),
            format!("length must lie in [1, {MAX_PRIMITIVES_PER_CLUSTER}], got {n}"),
        );
        self.check(
            c.cluster_transform().is_rigid(1e-9),
            format!("{field}.cluster_transform"),
            "rotation must be orthonormal with determinant +1",
        );
        for (i, p) in c.primitives().iter().enumerate() {
            let pf = format!("{field}.primitives[{i}]");
            self.check(
                p.half_extents.iter().all(|&h| h > 0.0 && h.is_finite()),
                format!("{pf}.half_extents"),
                format!("must be strictly positive, got {:?}", p.half_extents.as_slice()),
            );
            self.check(
                p.local_transform.is_rigid(1e-9),
                format!("{pf}.local_transform"),
                "rotation must be orthonormal with determinant +1",
            );
        }
        self.material(c.material(), &format!("{field}.material"));
    }
}

/// Checks every scene invariant. An empty list means the scene is well formed.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut ck = Checker { out: Vec::new() };

    // tray
    let tray = &scene.tray;
    ck.check(
        tray.outer_size.iter().all(|&s| s > 0.0),
        "tray.outer_size",
        "must be strictly positive",
    );
    ck.check(tray.height > 0.0, "tray.height", "must be > 0");
    ck.check(
        tray.wells.depth > 0.0 && tray.wells.depth < tray.height,
        "tray.wells.depth",
        format!("must lie in (0, tray height), got {}", tray.wells.depth),
    );
    ck.check(tray.wells.margin >= 0.0, "tray.wells.margin", "must be >= 0");
    ck.check(
        !tray.wells.row_counts.is_empty() && tray.wells.row_counts.iter().all(|&c| c >= 1),
        "tray.wells.row_counts",
        "need at least one row and one well per row",
    );
    let rects = tray.well_rects();
    let fp = tray.footprint();
    for (i, r) in rects.iter().enumerate() {
        ck.check(
            r.width() > 0.0 && r.depth() > 0.0 && fp.contains_rect(r),
            format!("tray.wells[{i}]"),
            "well footprint must be nonempty and inside the tray",
        );
        for (j, other) in rects.iter().enumerate().skip(i + 1) {
            ck.check(
                !r.overlaps(other),
                format!("tray.wells[{i}]"),
                format!("overlaps well {j}"),
            );
        }
    }
    ck.material(&tray.material, "tray.material");

    // food
    ck.check(!scene.food_objects.is_empty(), "food_objects", "must be nonempty");
    let mut ids = HashSet::new();
    let mut occupied = HashSet::new();
    for (i, food) in scene.food_objects.iter().enumerate() {
        let field = format!("food_objects[{i}]");
        ck.check(
            (1..=MAX_INSTANCE_ID).contains(&food.instance_id),
            format!("{field}.instance_id"),
            format!("must lie in [1, {MAX_INSTANCE_ID}], got {}", food.instance_id),
        );
        ck.check(
            ids.insert(food.instance_id),
            format!("{field}.instance_id"),
            format!("instance_id {} is not unique", food.instance_id),
        );
        if let Some(w) = food.well_index {
            ck.check(
                w < tray.wells.capacity(),
                format!("{field}.well_index"),
                format!("well {w} does not exist"),
            );
            occupied.insert(w);
        }
        ck.cluster(food, &field);
    }
    ck.check(
        tray.wells.rows() * tray.wells.max_cols() as usize >= occupied.len(),
        "tray.wells",
        "more occupied wells than the layout holds",
    );

    for (i, d) in scene.distractors.iter().enumerate() {
        let field = format!("distractors[{i}]");
        let t = &d.cluster_transform.translation;
        ck.check(
            !fp.contains(t.x, t.y),
            format!("{field}.cluster_transform"),
            "distractor must lie outside the tray footprint",
        );
        ck.cluster(d, &field);
    }

    ck.check(!scene.lights.is_empty(), "lights", "must be nonempty");
    for (i, l) in scene.lights.iter().enumerate() {
        let field = format!("lights[{i}]");
        ck.check(
            l.intensity > 0.0 && l.intensity.is_finite(),
            format!("{field}.intensity"),
            "must be > 0",
        );
        ck.check(l.position.z > 0.0, format!("{field}.position"), "must lie above z = 0");
        ck.color(&l.color, &format!("{field}.color"));
    }

    let cam = &scene.camera;
    ck.check(
        cam.vertical_fov > 0.0 && cam.vertical_fov < std::f64::consts::PI,
        "camera.vertical_fov",
        format!("must lie in (0, pi), got {}", cam.vertical_fov),
    );
    ck.check(
        cam.image_size.iter().all(|&s| s >= MIN_IMAGE_SIDE),
        "camera.image_size",
        format!("width and height must be >= {MIN_IMAGE_SIDE}"),
    );
    ck.check(
        (cam.position - cam.look_at).norm() > 0.0,
        "camera.look_at",
        "must differ from camera position",
    );
    ck.check((cam.up.norm() - 1.0).abs() < 1e-9, "camera.up", "must be a unit vector");

    ck.material(&scene.background_material, "background_material");
    ck.out
}

#[cfg(test)]
pub(crate) use tests::tiny_scene;
