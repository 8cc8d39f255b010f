//! Domain randomization: samples complete scenes from a seed and a config.
//!
//! Every scene owns one master [`Rng`] which is forked into per-subsystem
//! streams in a fixed order (scene, tray, foods, distractors, lights, camera,
//! background). New samplers must take a new stream at the end so existing
//! streams are never perturbed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt::Debug;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scene::{
    Camera, Difficulty, Distractor, FoodObject, Light, Material, MealTray, Primitive, PrimitiveKind,
    RigidTransform, Scene, Texture, TextureKind, Vec3, WellLayout, MAX_INSTANCE_ID,
    MAX_PRIMITIVES_PER_CLUSTER, MIN_IMAGE_SIDE,
};

/// Maximum distance between the camera target and the tray center.
pub const MAX_LOOK_AT_JITTER: f64 = 0.05;

const STREAM_SCENE: u64 = 1;
const STREAM_TRAY: u64 = 2;
const STREAM_FOODS: u64 = 3;
const STREAM_DISTRACTORS: u64 = 4;
const STREAM_LIGHTS: u64 = 5;
const STREAM_CAMERA: u64 = 6;
const STREAM_BACKGROUND: u64 = 7;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: range min {min} exceeds max {max}")]
    InvalidRange { field: &'static str, min: String, max: String },
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultySetting {
    Easy,
    Medium,
    Hard,
    /// Sampled uniformly per scene.
    Mixed,
}

impl std::str::FromStr for DifficultySetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(DifficultySetting::Mixed),
            other => other.parse::<Difficulty>().map(DifficultySetting::from),
        }
    }
}

impl From<Difficulty> for DifficultySetting {
    fn from(d: Difficulty) -> Self {
        match d {
            Difficulty::Easy => DifficultySetting::Easy,
            Difficulty::Medium => DifficultySetting::Medium,
            Difficulty::Hard => DifficultySetting::Hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrayConfig {
    pub outer_size: [f64; 2],
    pub height: f64,
    /// Wells per row, back to front.
    pub well_rows: Vec<u32>,
    pub well_margin: f64,
    pub well_depth: f64,
}

impl Default for TrayConfig {
    fn default() -> Self {
        Self {
            outer_size: [0.40, 0.30],
            height: 0.03,
            well_rows: vec![2, 3],
            well_margin: 0.015,
            well_depth: 0.02,
        }
    }
}

/// Generation parameters. Every field is optional in the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub food_count_range: [u32; 2],
    pub primitives_per_cluster_range: [u32; 2],
    pub distractor_count_range: [u32; 2],
    pub light_count_range: [u32; 2],
    pub light_intensity_range: [f64; 2],
    /// Distance of lights from the tray center, meters.
    pub light_radius_range: [f64; 2],
    pub light_elevation_range: [f64; 2],
    pub camera_elevation_range: [f64; 2],
    pub camera_azimuth_range: [f64; 2],
    pub camera_distance_range: [f64; 2],
    pub camera_vertical_fov: f64,
    pub look_at_jitter: f64,
    pub difficulty: DifficultySetting,
    /// `[width, height]` in pixels.
    pub image_size: [u32; 2],
    /// Bound on the offset of each primitive from its cluster origin.
    pub cluster_radius: f64,
    pub primitive_half_extent_range: [f64; 2],
    /// Allow more than one food object per well.
    pub shared_wells: bool,
    pub tray: TrayConfig,
    /// Instances with fewer visible pixels are left unannotated.
    pub min_mask_pixels: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            food_count_range: [3, 8],
            primitives_per_cluster_range: [3, 12],
            distractor_count_range: [0, 5],
            light_count_range: [1, 4],
            light_intensity_range: [0.4, 1.6],
            light_radius_range: [1.0, 2.0],
            light_elevation_range: [0.35, FRAC_PI_2],
            camera_elevation_range: [FRAC_PI_4, FRAC_PI_2],
            camera_azimuth_range: [0.0, TAU],
            camera_distance_range: [0.55, 0.85],
            camera_vertical_fov: 50f64.to_radians(),
            look_at_jitter: 0.03,
            difficulty: DifficultySetting::Mixed,
            image_size: [512, 512],
            cluster_radius: 0.04,
            primitive_half_extent_range: [0.008, 0.025],
            shared_wells: false,
            tray: TrayConfig::default(),
            min_mask_pixels: 64,
        }
    }
}

fn check_range<T: PartialOrd + Debug>(field: &'static str, r: &[T; 2]) -> Result<(), ConfigError> {
    if r[0] > r[1] {
        return Err(ConfigError::InvalidRange {
            field,
            min: format!("{:?}", r[0]),
            max: format!("{:?}", r[1]),
        });
    }
    Ok(())
}

fn require(ok: bool, field: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid { field, reason: reason.into() })
    }
}

impl GenConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let config: GenConfig = serde_json::from_str(&text)
            .map_err(|source| ConfigError::Json { path: path.display().to_string(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_range("food_count_range", &self.food_count_range)?;
        check_range("primitives_per_cluster_range", &self.primitives_per_cluster_range)?;
        check_range("distractor_count_range", &self.distractor_count_range)?;
        check_range("light_count_range", &self.light_count_range)?;
        check_range("light_intensity_range", &self.light_intensity_range)?;
        check_range("light_radius_range", &self.light_radius_range)?;
        check_range("light_elevation_range", &self.light_elevation_range)?;
        check_range("camera_elevation_range", &self.camera_elevation_range)?;
        check_range("camera_azimuth_range", &self.camera_azimuth_range)?;
        check_range("camera_distance_range", &self.camera_distance_range)?;
        check_range("primitive_half_extent_range", &self.primitive_half_extent_range)?;

        require(self.food_count_range[0] >= 1, "food_count_range", "min must be >= 1")?;
        require(
            self.food_count_range[1] <= MAX_INSTANCE_ID,
            "food_count_range",
            format!("max must be <= {MAX_INSTANCE_ID}"),
        )?;
        require(self.light_count_range[0] >= 1, "light_count_range", "min must be >= 1")?;
        require(
            self.primitives_per_cluster_range[0] >= 1
                && self.primitives_per_cluster_range[1] as usize <= MAX_PRIMITIVES_PER_CLUSTER,
            "primitives_per_cluster_range",
            format!("must lie within [1, {MAX_PRIMITIVES_PER_CLUSTER}]"),
        )?;
        require(self.light_intensity_range[0] > 0.0, "light_intensity_range", "min must be > 0")?;
        require(self.light_radius_range[0] > 0.0, "light_radius_range", "min must be > 0")?;
        require(
            self.light_elevation_range[0] > 0.0 && self.light_elevation_range[1] <= FRAC_PI_2,
            "light_elevation_range",
            "must lie within (0, pi/2]",
        )?;
        require(
            self.camera_elevation_range[0] > 0.0 && self.camera_elevation_range[1] <= FRAC_PI_2,
            "camera_elevation_range",
            "must lie within (0, pi/2]",
        )?;
        require(self.camera_distance_range[0] > 0.0, "camera_distance_range", "min must be > 0")?;
        require(
            self.camera_vertical_fov > 0.0 && self.camera_vertical_fov < PI,
            "camera_vertical_fov",
            "must lie in (0, pi)",
        )?;
        require(
            (0.0..=MAX_LOOK_AT_JITTER).contains(&self.look_at_jitter),
            "look_at_jitter",
            format!("must lie in [0, {MAX_LOOK_AT_JITTER}]"),
        )?;
        require(
            self.image_size.iter().all(|&s| s >= MIN_IMAGE_SIDE),
            "image_size",
            format!("width and height must be >= {MIN_IMAGE_SIDE}"),
        )?;
        require(self.cluster_radius > 0.0, "cluster_radius", "must be > 0")?;
        require(
            self.primitive_half_extent_range[0] > 0.0,
            "primitive_half_extent_range",
            "min must be > 0",
        )?;
        require(self.min_mask_pixels >= 1, "min_mask_pixels", "must be >= 1")?;

        let t = &self.tray;
        require(t.outer_size.iter().all(|&s| s > 0.0), "tray.outer_size", "must be positive")?;
        require(
            t.well_depth > 0.0 && t.well_depth < t.height,
            "tray.well_depth",
            "must lie in (0, tray.height)",
        )?;
        require(t.well_margin >= 0.0, "tray.well_margin", "must be >= 0")?;
        require(
            !t.well_rows.is_empty() && t.well_rows.iter().all(|&c| c >= 1),
            "tray.well_rows",
            "need at least one row with at least one well",
        )?;
        let rows = t.well_rows.len() as f64;
        let cols = *t.well_rows.iter().max().unwrap_or(&1) as f64;
        require(
            t.outer_size[1] - (rows + 1.0) * t.well_margin > 0.0
                && t.outer_size[0] - (cols + 1.0) * t.well_margin > 0.0,
            "tray.well_margin",
            "wells do not fit inside the tray",
        )?;
        Ok(())
    }

    pub fn build_tray(&self, material: Material) -> MealTray {
        MealTray {
            outer_size: self.tray.outer_size,
            height: self.tray.height,
            wells: WellLayout {
                row_counts: self.tray.well_rows.clone(),
                margin: self.tray.well_margin,
                depth: self.tray.well_depth,
            },
            material,
        }
    }

    fn tray_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.tray.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaterialRole {
    Tray,
    Food,
    Distractor,
    Background,
}

fn random_color(rng: &mut Rng, lo: f64, hi: f64) -> [f64; 3] {
    [rng.uniform_f64(lo, hi), rng.uniform_f64(lo, hi), rng.uniform_f64(lo, hi)]
}

fn random_texture(rng: &mut Rng) -> (Texture, [f64; 3]) {
    let kind = TextureKind::ALL[rng.index(TextureKind::ALL.len())];
    let base = random_color(rng, 0.0, 1.0);
    let secondary = random_color(rng, 0.0, 1.0);
    let scale = rng.uniform_f64(0.005, 0.05);
    let texture = match kind {
        TextureKind::Solid => Texture::Solid,
        TextureKind::Checker => Texture::Checker { scale, secondary },
        TextureKind::Stripes => Texture::Stripes { scale, secondary, angle: rng.uniform_f64(0.0, PI) },
        TextureKind::ValueNoise => Texture::ValueNoise {
            scale,
            secondary,
            octaves: rng.uniform_u32(1, 6),
            seed: rng.next_u64() as u32,
        },
        TextureKind::Blended => Texture::Blended {
            scale,
            secondary,
            octaves: rng.uniform_u32(1, 6),
            seed: rng.next_u64() as u32,
        },
    };
    (texture, base)
}

/// Samples a surface material.
///
/// Backgrounds follow the difficulty tiers: easy is plain near-black, medium
/// is near-black but glossy (light reflections), hard is any pattern in any
/// colors. Other roles ignore the difficulty.
pub fn sample_material(rng: &mut Rng, difficulty: Difficulty, role: MaterialRole) -> Material {
    match (role, difficulty) {
        (MaterialRole::Background, Difficulty::Easy) => Material {
            base_color: random_color(rng, 0.0, 0.1),
            texture: Texture::Solid,
            specular_strength: 0.0,
        },
        (MaterialRole::Background, Difficulty::Medium) => Material {
            base_color: random_color(rng, 0.0, 0.1),
            texture: Texture::Solid,
            specular_strength: rng.uniform_f64(0.3, 0.8),
        },
        (MaterialRole::Background, Difficulty::Hard) => {
            let (texture, base_color) = random_texture(rng);
            Material { base_color, texture, specular_strength: rng.uniform_f64(0.0, 1.0) }
        }
        _ => {
            let (texture, base_color) = random_texture(rng);
            Material { base_color, texture, specular_strength: rng.uniform_f64(0.0, 0.6) }
        }
    }
}

fn sample_primitive(rng: &mut Rng, config: &GenConfig) -> Primitive {
    let kind = PrimitiveKind::ALL[rng.index(PrimitiveKind::ALL.len())];
    let [lo, hi] = config.primitive_half_extent_range;
    let mut half_extents =
        Vec3::new(rng.uniform_f64(lo, hi), rng.uniform_f64(lo, hi), rng.uniform_f64(lo, hi));
    if kind == PrimitiveKind::Sphere {
        half_extents = Vec3::repeat(half_extents.x);
    }
    let rotation = rng.rotation();
    let offset = rng.in_ball(config.cluster_radius);
    Primitive { kind, half_extents, local_transform: RigidTransform::new(&rotation, offset) }
}

/// Samples a cluster of primitives resting on the plane through `floor_center`.
fn sample_cluster(
    rng: &mut Rng,
    config: &GenConfig,
    floor_center: Vec3,
) -> (Vec<Primitive>, RigidTransform) {
    let [lo, hi] = config.primitives_per_cluster_range;
    let n = rng.uniform_u32(lo, hi);
    let primitives: Vec<Primitive> = (0..n).map(|_| sample_primitive(rng, config)).collect();
    let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.uniform_f64(0.0, TAU));
    let placed = RigidTransform::from_rotation(&yaw);
    let lowest = primitives
        .iter()
        .map(|p| {
            let world = placed.compose(&p.local_transform);
            world.translation.z - p.vertical_half_extent(&world.rotation)
        })
        .fold(f64::INFINITY, f64::min);
    let translation = Vec3::new(floor_center.x, floor_center.y, floor_center.z - lowest);
    (primitives, RigidTransform::new(&yaw, translation))
}

/// Samples one food object centered on a well floor. The caller assigns
/// `instance_id` and `well_index`.
pub fn sample_food_cluster(rng: &mut Rng, config: &GenConfig, well_center: Vec3) -> FoodObject {
    let (primitives, cluster_transform) = sample_cluster(rng, config, well_center);
    let material = sample_material(rng, Difficulty::Hard, MaterialRole::Food);
    FoodObject { instance_id: 1, primitives, cluster_transform, material, well_index: None }
}

fn sample_distractor(rng: &mut Rng, config: &GenConfig, tray: &MealTray) -> Distractor {
    let half_diag = 0.5 * (tray.outer_size[0].hypot(tray.outer_size[1]));
    let inner = half_diag + config.cluster_radius;
    let outer = (1.5 * half_diag).max(inner);
    // uniform over the annulus area
    let u = rng.next_f64();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = rng.uniform_f64(0.0, TAU);
    let ground = Vec3::new(r * theta.cos(), r * theta.sin(), 0.0);
    let (primitives, cluster_transform) = sample_cluster(rng, config, ground);
    let material = sample_material(rng, Difficulty::Hard, MaterialRole::Distractor);
    Distractor { primitives, cluster_transform, material }
}

/// Point lights on a spherical shell above the tray center.
pub fn sample_lights(rng: &mut Rng, config: &GenConfig) -> Vec<Light> {
    let [lo, hi] = config.light_count_range;
    let n = rng.uniform_u32(lo, hi);
    let center = config.tray_center();
    (0..n)
        .map(|_| {
            let [ilo, ihi] = config.light_intensity_range;
            let intensity = rng.uniform_f64(ilo, ihi);
            let [rlo, rhi] = config.light_radius_range;
            let radius = rng.uniform_f64(rlo, rhi);
            let [elo, ehi] = config.light_elevation_range;
            let el = rng.uniform_f64(elo, ehi);
            let az = rng.uniform_f64(0.0, TAU);
            let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            Light { position: center + dir * radius, intensity, color: random_color(rng, 0.85, 1.0) }
        })
        .collect()
}

pub fn sample_camera(rng: &mut Rng, config: &GenConfig) -> Camera {
    let [elo, ehi] = config.camera_elevation_range;
    let [alo, ahi] = config.camera_azimuth_range;
    let [dlo, dhi] = config.camera_distance_range;
    let el = rng.uniform_f64(elo, ehi);
    let az = rng.uniform_f64(alo, ahi);
    let dist = rng.uniform_f64(dlo, dhi);
    let center = config.tray_center();
    let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    let jitter = rng.in_ball(config.look_at_jitter);
    // d(dir)/d(elevation): unit length and well defined straight overhead
    let up = Vec3::new(-el.sin() * az.cos(), -el.sin() * az.sin(), el.cos());
    Camera {
        position: center + dir * dist,
        look_at: center + jitter,
        up,
        vertical_fov: config.camera_vertical_fov,
        image_size: config.image_size,
    }
}

/// Samples a complete scene. The result is a pure function of `(config, seed)`.
pub fn sample_scene(config: &GenConfig, seed: u64) -> Result<Scene, ConfigError> {
    config.validate()?;
    let mut master = Rng::new(seed);
    let mut scene_rng = master.fork(STREAM_SCENE);
    let mut tray_rng = master.fork(STREAM_TRAY);
    let mut food_rng = master.fork(STREAM_FOODS);
    let mut distractor_rng = master.fork(STREAM_DISTRACTORS);
    let mut light_rng = master.fork(STREAM_LIGHTS);
    let mut camera_rng = master.fork(STREAM_CAMERA);
    let mut background_rng = master.fork(STREAM_BACKGROUND);

    let difficulty = match config.difficulty {
        DifficultySetting::Easy => Difficulty::Easy,
        DifficultySetting::Medium => Difficulty::Medium,
        DifficultySetting::Hard => Difficulty::Hard,
        DifficultySetting::Mixed => Difficulty::ALL[scene_rng.index(Difficulty::ALL.len())],
    };

    let tray = config.build_tray(sample_material(&mut tray_rng, difficulty, MaterialRole::Tray));

    let capacity = tray.wells.capacity();
    let [flo, fhi] = config.food_count_range;
    let mut count = food_rng.uniform_u32(flo, fhi) as usize;
    if !config.shared_wells {
        count = count.min(capacity);
    }
    let mut wells: Vec<usize> = (0..capacity).collect();
    food_rng.shuffle(&mut wells);
    let rects = tray.well_rects();
    let food_objects = (0..count)
        .map(|i| {
            let well = wells[i % capacity];
            let mut center = tray.well_floor_center(well).expect("well index in range");
            if i >= capacity {
                // extra foods in an occupied well sit off-center
                let r = rects[well];
                center.x += food_rng.uniform_f64(-0.25, 0.25) * r.width();
                center.y += food_rng.uniform_f64(-0.25, 0.25) * r.depth();
            }
            let mut food = sample_food_cluster(&mut food_rng, config, center);
            food.instance_id = i as u32 + 1;
            food.well_index = Some(well);
            food
        })
        .collect();

    let [dlo, dhi] = config.distractor_count_range;
    let n_distractors = distractor_rng.uniform_u32(dlo, dhi);
    let distractors = (0..n_distractors)
        .map(|_| sample_distractor(&mut distractor_rng, config, &tray))
        .collect();

    let lights = sample_lights(&mut light_rng, config);
    let camera = sample_camera(&mut camera_rng, config);
    let background_material =
        sample_material(&mut background_rng, difficulty, MaterialRole::Background);

    Ok(Scene {
        seed,
        tray,
        food_objects,
        distractors,
        lights,
        camera,
        background_material,
        difficulty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{validate_scene, Cluster};
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_scene() {
        let c = GenConfig::default();
        assert_eq!(sample_scene(&c, 42).unwrap(), sample_scene(&c, 42).unwrap());
    }

    #[test]
    fn inverted_range_is_rejected() {
        let c = GenConfig { food_count_range: [5, 2], ..GenConfig::default() };
        let err = sample_scene(&c, 0).unwrap_err();
        assert!(matches!(err, ConfigError::InvalidRange { field: "food_count_range", .. }));
    }

    #[test]
    fn other_invalid_configs_are_rejected() {
        let bad = [
            GenConfig { light_count_range: [0, 2], ..GenConfig::default() },
            GenConfig { camera_elevation_range: [0.0, 1.0], ..GenConfig::default() },
            GenConfig { image_size: [32, 512], ..GenConfig::default() },
            GenConfig { look_at_jitter: 0.2, ..GenConfig::default() },
            GenConfig { primitives_per_cluster_range: [1, 17], ..GenConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn scenes_validate_over_many_seeds() {
        let c = GenConfig::default();
        for seed in 0..1000 {
            let s = sample_scene(&c, seed).unwrap();
            let v = validate_scene(&s);
            assert!(v.is_empty(), "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn food_counts_stay_in_range() {
        let c = GenConfig { food_count_range: [3, 8], shared_wells: true, ..GenConfig::default() };
        let mut seen = HashSet::new();
        for seed in 0..1000 {
            let n = sample_scene(&c, seed).unwrap().food_objects.len();
            assert!((3..=8).contains(&n));
            seen.insert(n);
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn foods_use_distinct_wells_by_default() {
        let c = GenConfig::default();
        for seed in 0..200 {
            let s = sample_scene(&c, seed).unwrap();
            let wells: HashSet<_> = s.food_objects.iter().map(|f| f.well_index).collect();
            assert_eq!(wells.len(), s.food_objects.len());
            assert!(s.food_objects.len() <= 5);
        }
    }

    #[test]
    fn adjacent_seeds_differ() {
        let c = GenConfig::default();
        let mut collisions = 0;
        for seed in 0..1000u64 {
            if sample_scene(&c, seed).unwrap() == sample_scene(&c, seed + 1).unwrap() {
                collisions += 1;
            }
        }
        assert!(collisions <= 1);
    }

    #[test]
    fn easy_background_is_dark_and_solid() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let m = sample_material(&mut rng, Difficulty::Easy, MaterialRole::Background);
            assert_eq!(m.texture, Texture::Solid);
            assert!(m.base_color.iter().all(|&c| c <= 0.1));
            assert_eq!(m.specular_strength, 0.0);
        }
    }

    #[test]
    fn medium_background_is_glossy() {
        let mut rng = Rng::new(2);
        for _ in 0..1000 {
            let m = sample_material(&mut rng, Difficulty::Medium, MaterialRole::Background);
            assert_eq!(m.texture, Texture::Solid);
            assert!(m.base_color.iter().all(|&c| c <= 0.1));
            assert!((0.3..=0.8).contains(&m.specular_strength));
        }
    }

    #[test]
    fn hard_background_covers_texture_kinds() {
        let mut rng = Rng::new(3);
        let kinds: HashSet<_> = (0..1000)
            .map(|_| sample_material(&mut rng, Difficulty::Hard, MaterialRole::Background).texture.kind())
            .collect();
        assert!(kinds.len() >= 4, "{kinds:?}");
    }

    #[test]
    fn easy_scene_background() {
        let c = GenConfig { difficulty: DifficultySetting::Easy, ..GenConfig::default() };
        for seed in 0..50 {
            let s = sample_scene(&c, seed).unwrap();
            assert_eq!(s.difficulty, Difficulty::Easy);
            assert_eq!(s.background_material.texture, Texture::Solid);
            assert!(s.background_material.base_color.iter().all(|&x| x <= 0.1));
        }
    }

    #[test]
    fn degenerate_cluster_range_gives_one_primitive() {
        let c = GenConfig { primitives_per_cluster_range: [1, 1], ..GenConfig::default() };
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            let f = sample_food_cluster(&mut rng, &c, Vec3::new(0.0, 0.0, 0.01));
            assert_eq!(f.primitives.len(), 1);
        }
    }

    #[test]
    fn cluster_primitive_counts_are_uniform() {
        // Chi-square goodness of fit against uniform over 3..=12 (9 dof).
        let c = GenConfig::default();
        let mut rng = Rng::new(5);
        let mut hist = [0u32; 10];
        let draws = 1000;
        for _ in 0..draws {
            let n = sample_food_cluster(&mut rng, &c, Vec3::zeros()).primitives.len();
            assert!((3..=12).contains(&n));
            hist[n - 3] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-square with 9 degrees of freedom
        assert!(chi2 < 27.88, "chi2 = {chi2}, hist = {hist:?}");
        // every bin within 3 sigma of its binomial expectation
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        assert!(hist.iter().all(|&o| (o as f64 - expected).abs() <= 3.0 * sigma), "{hist:?}");
    }

    #[test]
    fn cluster_stays_near_well_center_and_rests_on_floor() {
        let c = GenConfig::default();
        let mut rng = Rng::new(6);
        let center = Vec3::new(0.1, -0.05, 0.01);
        for _ in 0..100 {
            let f = sample_food_cluster(&mut rng, &c, center);
            let mut lowest = f64::INFINITY;
            for i in 0..f.primitives().len() {
                let w = crate::scene::world_transform(&f, i).unwrap();
                let horiz = (w.translation.xy() - center.xy()).norm();
                assert!(horiz <= c.cluster_radius + 1e-12);
                assert!(f.primitives[i].local_transform.translation.norm() <= c.cluster_radius);
                lowest = lowest.min(w.translation.z - f.primitives[i].vertical_half_extent(&w.rotation));
            }
            assert!((lowest - center.z).abs() < 1e-12);
        }
    }

    #[test]
    fn light_sampler_ranges() {
        let c = GenConfig { light_count_range: [1, 1], light_intensity_range: [1.0, 1.0], ..GenConfig::default() };
        let mut rng = Rng::new(7);
        let lights = sample_lights(&mut rng, &c);
        assert_eq!(lights.len(), 1);
        assert_eq!(lights[0].intensity, 1.0);

        let c = GenConfig::default();
        let mut counts = HashSet::new();
        for _ in 0..1000 {
            let lights = sample_lights(&mut rng, &c);
            counts.insert(lights.len());
            for l in &lights {
                assert!(l.position.z > 0.0);
                assert!((0.4..=1.6).contains(&l.intensity));
                let r = (l.position - c.tray_center()).norm();
                assert!((1.0 - 1e-9..=2.0 + 1e-9).contains(&r));
            }
        }
        assert_eq!(counts, HashSet::from([1, 2, 3, 4]));
    }

    #[test]
    fn top_down_camera() {
        let c = GenConfig {
            camera_elevation_range: [FRAC_PI_2, FRAC_PI_2],
            camera_azimuth_range: [0.0, 0.0],
            camera_distance_range: [1.0, 1.0],
            ..GenConfig::default()
        };
        let cam = sample_camera(&mut Rng::new(8), &c);
        assert!((cam.position - (Vec3::new(0.0, 0.0, 1.0) + c.tray_center())).norm() < 1e-12);
        assert!((cam.up.norm() - 1.0).abs() < 1e-12);
        assert_eq!(cam.image_size, c.image_size);
    }

    #[test]
    fn camera_sweep_respects_ranges() {
        let c = GenConfig::default();
        let mut rng = Rng::new(9);
        for _ in 0..1000 {
            let cam = sample_camera(&mut rng, &c);
            let rel = cam.position - c.tray_center();
            let el = (rel.z / rel.norm()).asin();
            assert!(el >= c.camera_elevation_range[0] - 1e-9 && el <= c.camera_elevation_range[1] + 1e-9);
            assert!((cam.look_at - c.tray_center()).norm() <= MAX_LOOK_AT_JITTER);
            let d = rel.norm();
            assert!((0.55 - 1e-9..=0.85 + 1e-9).contains(&d));
        }
    }

    #[test]
    fn config_file_fields_are_optional() {
        let c: GenConfig = serde_json::from_str(r#"{"food_count_range": [1, 2]}"#).unwrap();
        assert_eq!(c.food_count_range, [1, 2]);
        assert_eq!(c.light_count_range, GenConfig::default().light_count_range);
        assert!(serde_json::from_str::<GenConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
