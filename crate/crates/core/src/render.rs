//! Z-buffered software rasterizer producing RGB images and instance-id maps.
//!
//! Geometry is rasterized into a G-buffer (nearest surface, its world
//! position and face normal per pixel) and shaded afterwards with an ambient
//! term plus Lambertian diffuse and Blinn-Phong specular from every point
//! light, attenuated by inverse-square distance. There are no cast shadows.
//!
//! Food pixels carry their instance id in the id buffer. Distractor pixels
//! are shaded into the RGB image but written to a separate distractor
//! channel, so they export as background.

use std::collections::BTreeMap;
use std::path::Path;

use image::{ImageBuffer, Luma, RgbImage};

use crate::mask::BinaryMask;
use crate::mesh::{box_mesh, triangulate, Mesh};
use crate::scene::{world_transform, Cluster, Material, MealTray, Scene, Vec3};
use crate::texture::albedo;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("degenerate camera: position equals look_at")]
    DegenerateCamera,
    #[error("image size {0}x{1} is empty")]
    EmptyImage(u32, u32),
    #[error("image export failed: {0}")]
    Export(#[from] image::ImageError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Segments around curved primitives.
    pub subdivisions: u32,
    pub ambient: f64,
    /// Scales every light's intensity before distance attenuation.
    pub light_gain: f64,
    pub shininess: f64,
    pub near_plane: f64,
    /// Half-size of the square background plane, meters.
    pub ground_extent: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            subdivisions: 24,
            ambient: 0.15,
            light_gain: 1.5,
            shininess: 32.0,
            near_plane: 0.01,
            ground_extent: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceTag {
    Background,
    Tray,
    Food(u16),
    Distractor,
}

/// World-space mesh with its material and what it belongs to.
#[derive(Debug, Clone)]
pub struct Surface<'a> {
    pub mesh: Mesh,
    pub material: &'a Material,
    pub tag: SurfaceTag,
}

/// Closed boxes making up the tray: a base slab below the well floors and
/// rim pieces around the wells.
pub fn tray_mesh(tray: &MealTray) -> Mesh {
    let fp = tray.footprint();
    let floor = tray.floor_z();
    let top = tray.height;
    let mut mesh = box_mesh(Vec3::new(fp.min[0], fp.min[1], 0.0), Vec3::new(fp.max[0], fp.max[1], floor));
    let mut add = |x0: f64, y0: f64, x1: f64, y1: f64| {
        if x1 - x0 > 1e-12 && y1 - y0 > 1e-12 {
            mesh.append(&box_mesh(Vec3::new(x0, y0, floor), Vec3::new(x1, y1, top)));
        }
    };
    let rects = tray.well_rects();
    let mut start = 0;
    let mut y_above = fp.max[1];
    for &cols in &tray.wells.row_counts {
        let row = &rects[start..start + cols as usize];
        start += cols as usize;
        let (ry0, ry1) = (row[0].min[1], row[0].max[1]);
        add(fp.min[0], ry1, fp.max[0], y_above);
        let mut x_left = fp.min[0];
        for r in row {
            add(x_left, ry0, r.min[0], ry1);
            x_left = r.max[0];
        }
        add(x_left, ry0, fp.max[0], ry1);
        y_above = ry0;
    }
    add(fp.min[0], fp.min[1], fp.max[0], y_above);
    mesh
}

fn ground_mesh(extent: f64) -> Mesh {
    let e = extent;
    Mesh {
        vertices: vec![
            Vec3::new(-e, -e, 0.0),
            Vec3::new(e, -e, 0.0),
            Vec3::new(e, e, 0.0),
            Vec3::new(-e, e, 0.0),
        ],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
    }
}

fn cluster_mesh<C: Cluster>(c: &C, subdivisions: u32) -> Mesh {
    let mut mesh = Mesh::default();
    for (i, p) in c.primitives().iter().enumerate() {
        let t = world_transform(c, i).expect("index in range");
        mesh.append(&triangulate(p, subdivisions).transformed(&t));
    }
    mesh
}

/// Every surface of the scene in world space, in draw order.
pub fn scene_surfaces<'a>(scene: &'a Scene, opts: &RenderOptions) -> Vec<Surface<'a>> {
    let mut out = vec![
        Surface {
            mesh: ground_mesh(opts.ground_extent),
            material: &scene.background_material,
            tag: SurfaceTag::Background,
        },
        Surface { mesh: tray_mesh(&scene.tray), material: &scene.tray.material, tag: SurfaceTag::Tray },
    ];
    for d in &scene.distractors {
        out.push(Surface {
            mesh: cluster_mesh(d, opts.subdivisions),
            material: &d.material,
            tag: SurfaceTag::Distractor,
        });
    }
    for f in &scene.food_objects {
        out.push(Surface {
            mesh: cluster_mesh(f, opts.subdivisions),
            material: &f.material,
            tag: SurfaceTag::Food(f.instance_id as u16),
        });
    }
    out
}

/// Pinhole camera basis and intrinsics.
#[derive(Debug, Clone)]
pub struct CameraFrame {
    pub eye: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraFrame {
    pub fn new(camera: &crate::scene::Camera) -> Result<Self, RenderError> {
        let (width, height) = (camera.width(), camera.height());
        if width == 0 || height == 0 {
            return Err(RenderError::EmptyImage(width, height));
        }
        let view = camera.look_at - camera.position;
        if view.norm() == 0.0 {
            return Err(RenderError::DegenerateCamera);
        }
        let forward = view.normalize();
        let mut right = forward.cross(&camera.up);
        if right.norm() < 1e-12 {
            // up parallel to the view direction; any perpendicular will do
            let alt = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        Ok(Self { eye: camera.position, right, up, forward, focal: camera.focal_px(), width, height })
    }

    /// Camera-space coordinates: (right, up, depth along view direction).
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let d = p - self.eye;
        Vec3::new(d.dot(&self.right), d.dot(&self.up), d.dot(&self.forward))
    }

    /// Pixel coordinates of a camera-space point with positive depth.
    pub fn project(&self, c: &Vec3) -> (f64, f64) {
        (
            0.5 * self.width as f64 + self.focal * c.x / c.z,
            0.5 * self.height as f64 - self.focal * c.y / c.z,
        )
    }

    /// Unit world-space direction through the given pixel coordinates.
    pub fn ray_direction(&self, sx: f64, sy: f64) -> Vec3 {
        let x = (sx - 0.5 * self.width as f64) / self.focal;
        let y = (0.5 * self.height as f64 - sy) / self.focal;
        (self.forward + self.right * x + self.up * y).normalize()
    }
}

const NO_SURFACE: u32 = u32::MAX;

/// Nearest-surface record for every pixel.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub surface: Vec<u32>,
    pub position: Vec<Vec3>,
    pub normal: Vec<Vec3>,
}

impl GBuffer {
    fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            surface: vec![NO_SURFACE; n],
            position: vec![Vec3::zeros(); n],
            normal: vec![Vec3::zeros(); n],
        }
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    cam: Vec3,
    world: Vec3,
}

fn clip_near(tri: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.cam.z >= near;
        let b_in = b.cam.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.cam.z) / (b.cam.z - a.cam.z);
            out.push(ClipVertex {
                cam: a.cam + (b.cam - a.cam) * t,
                world: a.world + (b.world - a.world) * t,
            });
        }
    }
    out
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

fn raster_triangle(
    g: &mut GBuffer,
    frame: &CameraFrame,
    v: [ClipVertex; 3],
    surface: u32,
    normal: &Vec3,
) {
    let s = [frame.project(&v[0].cam), frame.project(&v[1].cam), frame.project(&v[2].cam)];
    let area = edge(s[0], s[1], s[2]);
    if area.abs() < 1e-12 || !area.is_finite() {
        return;
    }
    let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (g.width as f64, g.height as f64);
    if max_x < 0.0 || max_y < 0.0 || min_x > w || min_y > h {
        return;
    }
    // pixel centers sit at (x + 0.5, y + 0.5)
    let x0 = (min_x - 0.5).ceil().max(0.0) as u32;
    let x1 = ((max_x - 0.5).floor().min(w - 1.0)).max(-1.0);
    let y0 = (min_y - 0.5).ceil().max(0.0) as u32;
    let y1 = ((max_y - 0.5).floor().min(h - 1.0)).max(-1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as u32, y1 as u32);
    let inv_z = [1.0 / v[0].cam.z, 1.0 / v[1].cam.z, 1.0 / v[2].cam.z];
    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        for x in x0..=x1 {
            let p = (x as f64 + 0.5, py);
            let b0 = edge(s[1], s[2], p) / area;
            let b1 = edge(s[2], s[0], p) / area;
            let b2 = edge(s[0], s[1], p) / area;
            if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                continue;
            }
            let iz = b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2];
            let depth = 1.0 / iz;
            let idx = y as usize * g.width as usize + x as usize;
            if depth < g.depth[idx] {
                g.depth[idx] = depth;
                g.surface[idx] = surface;
                g.position[idx] = (v[0].world * (b0 * inv_z[0])
                    + v[1].world * (b1 * inv_z[1])
                    + v[2].world * (b2 * inv_z[2]))
                    / iz;
                g.normal[idx] = *normal;
            }
        }
    }
}

/// Rasterizes every surface into a G-buffer (hidden-surface removal by depth).
pub fn rasterize(surfaces: &[Surface<'_>], frame: &CameraFrame, opts: &RenderOptions) -> GBuffer {
    let mut g = GBuffer::new(frame.width, frame.height);
    for (si, surf) in surfaces.iter().enumerate() {
        let cam: Vec<Vec3> = surf.mesh.vertices.iter().map(|p| frame.to_camera(p)).collect();
        for t in &surf.mesh.triangles {
            let idx = t.map(|i| i as usize);
            let world = idx.map(|i| surf.mesh.vertices[i]);
            let normal = (world[1] - world[0]).cross(&(world[2] - world[0]));
            let len = normal.norm();
            if len == 0.0 {
                continue;
            }
            let normal = normal / len;
            let verts = [0, 1, 2].map(|k| ClipVertex { cam: cam[idx[k]], world: world[k] });
            if verts.iter().all(|v| v.cam.z >= opts.near_plane) {
                raster_triangle(&mut g, frame, verts, si as u32, &normal);
                continue;
            }
            let poly = clip_near(verts, opts.near_plane);
            for k in 1..poly.len().saturating_sub(1) {
                raster_triangle(&mut g, frame, [poly[0], poly[k], poly[k + 1]], si as u32, &normal);
            }
        }
    }
    g
}

/// Linear (unclamped) radiance per pixel.
pub fn shade(
    scene: &Scene,
    surfaces: &[Surface<'_>],
    g: &GBuffer,
    frame: &CameraFrame,
    opts: &RenderOptions,
) -> Vec<[f64; 3]> {
    let sky = scene.background_material.base_color;
    (0..g.surface.len())
        .map(|i| {
            let si = g.surface[i];
            if si == NO_SURFACE {
                return sky;
            }
            let material = surfaces[si as usize].material;
            let p = g.position[i];
            let base = albedo(material, &p);
            let view = (frame.eye - p).normalize();
            let mut n = g.normal[i];
            if n.dot(&view) < 0.0 {
                n = -n;
            }
            let mut c = base.map(|a| opts.ambient * a);
            for light in &scene.lights {
                let l = light.position - p;
                let d2 = l.norm_squared();
                let ldir = l / d2.sqrt();
                let ndl = n.dot(&ldir);
                if ndl <= 0.0 {
                    continue;
                }
                let e = light.intensity * opts.light_gain / d2;
                let half = (ldir + view).normalize();
                let spec = material.specular_strength * n.dot(&half).max(0.0).powf(opts.shininess);
                for k in 0..3 {
                    c[k] += light.color[k] * e * (base[k] * ndl + spec);
                }
            }
            c
        })
        .collect()
}

/// Clamp to `[0, 1]`, scale to 255 and round half away from zero.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Rendered image, instance ids, depth, and the distractor channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, 3 bytes per pixel.
    pub rgb: Vec<u8>,
    /// 0 = background (including distractors), k = food instance k.
    pub id_buffer: Vec<u16>,
    /// Camera-space depth of the visible surface, `+inf` where nothing was hit.
    pub depth: Vec<f64>,
    /// True where a distractor is the visible surface.
    pub distractor: Vec<bool>,
}

impl RenderOutput {
    pub fn id_at(&self, x: u32, y: u32) -> u16 {
        self.id_buffer[y as usize * self.width as usize + x as usize]
    }

    pub fn rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.rgb.clone()).expect("buffer size")
    }

    pub fn id_image(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        ImageBuffer::from_raw(self.width, self.height, self.id_buffer.clone()).expect("buffer size")
    }

    /// Writes the RGB image as an 8-bit PNG.
    pub fn save_rgb_png(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        self.rgb_image().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Writes the id map as a 16-bit grayscale PNG.
    pub fn save_id_png(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        self.id_image().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

pub fn render(scene: &Scene) -> Result<RenderOutput, RenderError> {
    render_with(scene, &RenderOptions::default())
}

pub fn render_with(scene: &Scene, opts: &RenderOptions) -> Result<RenderOutput, RenderError> {
    let frame = CameraFrame::new(&scene.camera)?;
    let surfaces = scene_surfaces(scene, opts);
    let g = rasterize(&surfaces, &frame, opts);
    let radiance = shade(scene, &surfaces, &g, &frame, opts);
    let rgb = radiance.iter().flat_map(|c| c.map(quantize)).collect();
    let tag = |i: usize| surfaces.get(g.surface[i] as usize).map(|s| s.tag);
    let n = g.surface.len();
    let id_buffer = (0..n)
        .map(|i| match tag(i) {
            Some(SurfaceTag::Food(id)) => id,
            _ => 0,
        })
        .collect();
    let distractor = (0..n).map(|i| tag(i) == Some(SurfaceTag::Distractor)).collect();
    Ok(RenderOutput { width: frame.width, height: frame.height, rgb, id_buffer, depth: g.depth, distractor })
}

/// One annotated food instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub instance_id: u32,
    pub mask: BinaryMask,
    pub area: u64,
    /// Tight `[x, y, w, h]` box in pixels.
    pub bbox: [u32; 4],
}

/// One mask per visible instance with at least `min_pixels` pixels, ordered
/// by instance id.
pub fn extract_masks(out: &RenderOutput, min_pixels: u64) -> Vec<InstanceMask> {
    let min_pixels = min_pixels.max(1);
    // id -> (area, x0, y0, x1, y1)
    let mut stats: BTreeMap<u16, (u64, u32, u32, u32, u32)> = BTreeMap::new();
    for y in 0..out.height {
        for x in 0..out.width {
            let id = out.id_at(x, y);
            if id == 0 {
                continue;
            }
            let e = stats.entry(id).or_insert((0, x, y, x, y));
            e.0 += 1;
            e.1 = e.1.min(x);
            e.2 = e.2.min(y);
            e.3 = e.3.max(x);
            e.4 = e.4.max(y);
        }
    }
    stats
        .into_iter()
        .filter(|(_, s)| s.0 >= min_pixels)
        .map(|(id, (area, x0, y0, x1, y1))| InstanceMask {
            instance_id: u32::from(id),
            mask: BinaryMask::from_rows(
                out.width,
                out.height,
                out.id_buffer.iter().map(|&v| v == id).collect(),
            ),
            area,
            bbox: [x0, y0, x1 - x0 + 1, y1 - y0 + 1],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tiny_scene;

    fn blank_output(width: u32, height: u32, ids: Vec<u16>) -> RenderOutput {
        let n = (width * height) as usize;
        RenderOutput {
            width,
            height,
            rgb: vec![0; 3 * n],
            id_buffer: ids,
            depth: vec![f64::INFINITY; n],
            distractor: vec![false; n],
        }
    }

    #[test]
    fn no_ids_no_masks() {
        assert!(extract_masks(&blank_output(8, 8, vec![0; 64]), 1).is_empty());
    }

    #[test]
    fn small_instances_are_dropped() {
        let mut ids = vec![0u16; 64 * 64];
        ids[..10].fill(4);
        let out = blank_output(64, 64, ids);
        assert!(extract_masks(&out, 64).is_empty());
        let masks = extract_masks(&out, 1);
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].area, 10);
        assert_eq!(masks[0].bbox, [0, 0, 10, 1]);
        assert_eq!(masks[0].mask.bbox(), Some(masks[0].bbox));
    }

    #[test]
    fn degenerate_camera_is_rejected() {
        let mut s = tiny_scene();
        s.camera.look_at = s.camera.position;
        assert!(matches!(render(&s), Err(RenderError::DegenerateCamera)));
    }

    #[test]
    fn render_is_deterministic_and_labels_food_only() {
        let s = tiny_scene();
        let a = render(&s).unwrap();
        let b = render(&s).unwrap();
        assert_eq!(a, b);
        let ids: std::collections::BTreeSet<u16> = a.id_buffer.iter().copied().collect();
        assert_eq!(ids, [0, 1, 2].into_iter().collect());
        assert!(a.distractor.iter().any(|&d| d));
        for (i, &d) in a.distractor.iter().enumerate() {
            if d {
                assert_eq!(a.id_buffer[i], 0);
            }
        }
    }

    #[test]
    fn nothing_in_view_gives_empty_ids() {
        let mut s = tiny_scene();
        // look straight up, away from everything
        s.camera.position = Vec3::new(0.0, 0.0, 1.0);
        s.camera.look_at = Vec3::new(0.0, 0.0, 2.0);
        let out = render(&s).unwrap();
        assert!(out.id_buffer.iter().all(|&v| v == 0));
        assert!(out.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn tray_mesh_is_closed_pieces() {
        let s = tiny_scene();
        let m = tray_mesh(&s.tray);
        // base slab + 3 horizontal strips + (2+1) + (3+1) vertical pieces
        assert_eq!(m.triangles.len(), 12 * (1 + 3 + 3 + 4));
        let fp = s.tray.footprint();
        let wells: f64 = s.tray.well_rects().iter().map(|r| r.width() * r.depth()).sum();
        let expected = fp.width() * fp.depth() * s.tray.height - wells * s.tray.wells.depth;
        assert!((m.signed_volume() - expected).abs() < 1e-12);
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        assert_eq!(quantize(-0.5), 0);
        assert_eq!(quantize(2.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.0), 255);
    }
}
