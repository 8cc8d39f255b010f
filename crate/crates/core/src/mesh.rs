//! Closed triangle meshes for scene primitives.

use std::f64::consts::{PI, TAU};

use crate::scene::{Primitive, PrimitiveKind, RigidTransform, Vec3};

/// Indexed triangle mesh. Triangles wind counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn transformed(&self, t: &RigidTransform) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn append(&mut self, other: &Mesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
}

/// Axis-aligned box spanning `min..max`: 8 vertices, 12 triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> Mesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    // index = x | y << 1 | z << 2
    let vertices = (0..8).map(|i| v(i & 1 != 0, i & 2 != 0, i & 4 != 0)).collect();
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let triangles = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    Mesh { vertices, triangles }
}

/// Latitude/longitude ellipsoid with single-vertex poles.
fn ellipsoid_mesh(radii: Vec3, subdivisions: u32) -> Mesh {
    let slices = subdivisions.max(3);
    let stacks = subdivisions.div_ceil(2).max(2);
    let mut vertices = vec![Vec3::new(0.0, 0.0, radii.z)];
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..slices {
            let phi = TAU * j as f64 / slices as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Vec3::new(radii.x * st * cp, radii.y * st * sp, radii.z * ct));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radii.z));
    let south = vertices.len() as u32 - 1;
    let ring = |i: u32, j: u32| 1 + (i - 1) * slices + (j % slices);

    let mut triangles = Vec::with_capacity((2 * slices * (stacks - 1)) as usize);
    for j in 0..slices {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for j in 0..slices {
        triangles.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    Mesh { vertices, triangles }
}

/// Elliptical cylinder along z with capped ends.
fn cylinder_mesh(half: Vec3, subdivisions: u32) -> Mesh {
    let slices = subdivisions.max(3);
    let mut vertices = vec![Vec3::new(0.0, 0.0, half.z), Vec3::new(0.0, 0.0, -half.z)];
    for j in 0..slices {
        let phi = TAU * j as f64 / slices as f64;
        let (sp, cp) = phi.sin_cos();
        vertices.push(Vec3::new(half.x * cp, half.y * sp, half.z));
        vertices.push(Vec3::new(half.x * cp, half.y * sp, -half.z));
    }
    let top = |j: u32| 2 + 2 * (j % slices);
    let bottom = |j: u32| 3 + 2 * (j % slices);
    let mut triangles = Vec::with_capacity(4 * slices as usize);
    for j in 0..slices {
        triangles.push([0, top(j), top(j + 1)]);
        triangles.push([1, bottom(j + 1), bottom(j)]);
        triangles.push([top(j), bottom(j), bottom(j + 1)]);
        triangles.push([top(j), bottom(j + 1), top(j + 1)]);
    }
    Mesh { vertices, triangles }
}

/// Closed outward mesh of a primitive in its own frame.
///
/// Curved surfaces use `subdivisions` segments around (at least 3); every
/// vertex lies exactly on the analytic surface.
pub fn triangulate(primitive: &Primitive, subdivisions: u32) -> Mesh {
    let h = primitive.half_extents;
    match primitive.kind {
        PrimitiveKind::Box => box_mesh(-h, h),
        PrimitiveKind::Sphere => ellipsoid_mesh(Vec3::repeat(h.x), subdivisions),
        PrimitiveKind::Ellipsoid => ellipsoid_mesh(h, subdivisions),
        PrimitiveKind::Cylinder => cylinder_mesh(h, subdivisions),
    }
}
