//! Procedural texture evaluation on world-space points.

use crate::rng::hash64;
use crate::scene::{Material, Texture, Vec3};

fn lattice_value(seed: u32, x: i64, y: i64, z: i64) -> f64 {
    let mut h = hash64(u64::from(seed));
    h = hash64(h ^ x as u64);
    h = hash64(h ^ (y as u64).rotate_left(21));
    h = hash64(h ^ (z as u64).rotate_left(42));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Trilinear value noise in `[0, 1)` with smoothstep fade.
pub fn value_noise(seed: u32, p: &Vec3) -> f64 {
    let base = p.map(f64::floor);
    let f = p - base;
    let (ix, iy, iz) = (base.x as i64, base.y as i64, base.z as i64);
    let (u, v, w) = (smoothstep(f.x), smoothstep(f.y), smoothstep(f.z));
    let c = |dx: i64, dy: i64, dz: i64| lattice_value(seed, ix + dx, iy + dy, iz + dz);
    let x00 = lerp(c(0, 0, 0), c(1, 0, 0), u);
    let x10 = lerp(c(0, 1, 0), c(1, 1, 0), u);
    let x01 = lerp(c(0, 0, 1), c(1, 0, 1), u);
    let x11 = lerp(c(0, 1, 1), c(1, 1, 1), u);
    lerp(lerp(x00, x10, v), lerp(x01, x11, v), w)
}

/// Fractal sum of `octaves` noise layers, normalized back to `[0, 1)`.
pub fn fractal_noise(seed: u32, p: &Vec3, octaves: u32) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0;
    for o in 0..octaves.max(1) {
        sum += amp * value_noise(seed.wrapping_add(o), &(p * freq));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

fn mix(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    [lerp(a[0], b[0], t), lerp(a[1], b[1], t), lerp(a[2], b[2], t)]
}

fn checker(p: &Vec3) -> bool {
    let s = p.x.floor() as i64 + p.y.floor() as i64 + p.z.floor() as i64;
    s.rem_euclid(2) == 1
}

/// Diffuse albedo of `material` at world point `p`, each channel in `[0, 1]`.
pub fn albedo(material: &Material, p: &Vec3) -> [f64; 3] {
    let base = &material.base_color;
    match &material.texture {
        Texture::Solid => *base,
        Texture::Checker { scale, secondary } => {
            if checker(&(p / *scale)) {
                *secondary
            } else {
                *base
            }
        }
        Texture::Stripes { scale, secondary, angle } => {
            let along = p.x * angle.cos() + p.y * angle.sin();
            if (along / scale).floor() as i64 % 2 == 0 {
                *base
            } else {
                *secondary
            }
        }
        Texture::ValueNoise { scale, secondary, octaves, seed } => {
            mix(base, secondary, fractal_noise(*seed, &(p / *scale), *octaves))
        }
        Texture::Blended { scale, secondary, octaves, seed } => {
            let q = p / *scale;
            let n = fractal_noise(*seed, &(q * 0.5), *octaves);
            let t = if checker(&q) { n } else { 1.0 - n };
            mix(base, secondary, t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_bounded_and_deterministic() {
        for i in 0..1000 {
            let p = Vec3::new(i as f64 * 0.37, -(i as f64) * 0.11, 0.5 + i as f64 * 0.013);
            let n = fractal_noise(7, &p, 4);
            assert!((0.0..1.0).contains(&n));
            assert_eq!(n, fractal_noise(7, &p, 4));
        }
    }

    #[test]
    fn noise_is_continuous_across_cells() {
        let a = value_noise(1, &Vec3::new(0.999_999_9, 0.3, 0.3));
        let b = value_noise(1, &Vec3::new(1.000_000_1, 0.3, 0.3));
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn albedo_stays_in_unit_cube() {
        let m = Material {
            base_color: [0.0, 0.5, 1.0],
            texture: Texture::Blended { scale: 0.02, secondary: [1.0, 0.0, 0.2], octaves: 6, seed: 3 },
            specular_strength: 0.2,
        };
        for i in 0..500 {
            let p = Vec3::new(i as f64 * 0.003, 0.01, -0.2);
            assert!(albedo(&m, &p).iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn checker_alternates() {
        let m = Material {
            base_color: [0.0; 3],
            texture: Texture::Checker { scale: 1.0, secondary: [1.0; 3] },
            specular_strength: 0.0,
        };
        let a = albedo(&m, &Vec3::new(0.5, 0.5, 0.5));
        let b = albedo(&m, &Vec3::new(1.5, 0.5, 0.5));
        assert_ne!(a, b);
    }
}
