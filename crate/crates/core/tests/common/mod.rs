#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texmesh_core::{Face, Texture, TexturedMesh};

pub const TERRAIN: u32 = 1;
pub const VEGETATION: u32 = 2;
pub const BUILDING: u32 = 3;
pub const WATER: u32 = 4;
pub const VEHICLE: u32 = 5;
pub const BOAT: u32 = 6;

#[derive(Default)]
pub struct SceneBuilder {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<Face>,
}

impl SceneBuilder {
    pub fn vertex(&mut self, p: Vector3<f64>) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    pub fn tri(&mut self, v: [u32; 3], class: u32) {
        self.faces.push(Face::new(v).with_class(class));
    }

    /// `n x n` quads over `[0, size]^2`, two faces each.
    pub fn terrain(
        &mut self,
        n: usize,
        size: f64,
        height: impl Fn(f64, f64) -> f64,
        class: impl Fn(f64, f64) -> u32,
    ) {
        let base = self.vertices.len() as u32;
        let step = size / n as f64;
        for j in 0..=n {
            for i in 0..=n {
                let (x, y) = (i as f64 * step, j as f64 * step);
                self.vertices.push(Vector3::new(x, y, height(x, y)));
            }
        }
        let id = |i: usize, j: usize| base + (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                let c = class((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
                self.tri([id(i, j), id(i + 1, j), id(i + 1, j + 1)], c);
                self.tri([id(i, j), id(i + 1, j + 1), id(i, j + 1)], c);
            }
        }
    }

    /// Axis-aligned box without its bottom: ten outward-facing triangles.
    pub fn open_box(&mut self, min: Vector3<f64>, size: Vector3<f64>, class: u32) {
        let mut v = [0u32; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            let p = min
                + Vector3::new(
                    if k & 1 != 0 { size.x } else { 0.0 },
                    if k & 2 != 0 { size.y } else { 0.0 },
                    if k & 4 != 0 { size.z } else { 0.0 },
                );
            *slot = self.vertex(p);
        }
        let quads = [
            [4, 5, 7, 6], // top
            [0, 1, 5, 4], // -y
            [1, 3, 7, 5], // +x
            [3, 2, 6, 7], // +y
            [2, 0, 4, 6], // -x
        ];
        for q in quads {
            self.tri([v[q[0]], v[q[1]], v[q[2]]], class);
            self.tri([v[q[0]], v[q[2]], v[q[3]]], class);
        }
    }

    /// Four-sided pyramid standing on `base` (its center).
    pub fn pyramid(&mut self, base: Vector3<f64>, half: f64, height: f64, class: u32) {
        let apex = self.vertex(base + Vector3::new(0.0, 0.0, height));
        let c = [
            self.vertex(base + Vector3::new(-half, -half, 0.0)),
            self.vertex(base + Vector3::new(half, -half, 0.0)),
            self.vertex(base + Vector3::new(half, half, 0.0)),
            self.vertex(base + Vector3::new(-half, half, 0.0)),
        ];
        for k in 0..4 {
            self.tri([c[k], c[(k + 1) % 4], apex], class);
        }
    }

    pub fn build(self, class_count: u32) -> TexturedMesh {
        TexturedMesh::from_absolute(self.vertices, self.faces, vec![], class_count)
            .expect("valid fixture")
    }
}

pub fn ground_height(x: f64, y: f64) -> f64 {
    0.5 * (x / 15.0).sin() + 0.3 * (y / 11.0).cos()
}

/// Synthetic city block: undulating terrain with a flat water strip along
/// `x < 0.15 * size`, and a lattice of buildings, trees, vehicles and boats.
/// Every face carries one of the six real classes.
pub fn urban_scene(n: usize, size: f64, seed: u64) -> TexturedMesh {
    let water_edge = 0.15 * size;
    let height = move |x: f64, y: f64| {
        if x < water_edge {
            -0.5
        } else {
            ground_height(x, y)
        }
    };
    let mut b = SceneBuilder::default();
    b.terrain(n, size, height, |x, _| {
        if x < water_edge {
            WATER
        } else {
            TERRAIN
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = 10.0;
    let cells = (size / lattice) as usize;
    for gj in 0..cells {
        for gi in 0..cells {
            let cx = (gi as f64 + 0.5) * lattice;
            let cy = (gj as f64 + 0.5) * lattice;
            if cx < water_edge {
                if rng.random_bool(0.5) {
                    let min = Vector3::new(cx - 2.5, cy - 1.0, -0.5);
                    b.open_box(min, Vector3::new(5.0, 2.0, 1.0), BOAT);
                }
                continue;
            }
            let z = height(cx, cy) - 0.3;
            match rng.random_range(0..4) {
                0 => {
                    let w = rng.random_range(5.0..8.0);
                    let d = rng.random_range(5.0..8.0);
                    let h = rng.random_range(6.0..25.0);
                    b.open_box(
                        Vector3::new(cx - w / 2.0, cy - d / 2.0, z),
                        Vector3::new(w, d, h),
                        BUILDING,
                    );
                }
                1 => b.pyramid(
                    Vector3::new(cx, cy, z),
                    2.0,
                    rng.random_range(4.0..8.0),
                    VEGETATION,
                ),
                2 => b.open_box(
                    Vector3::new(cx - 2.1, cy - 0.9, z),
                    Vector3::new(4.2, 1.8, 1.5),
                    VEHICLE,
                ),
                _ => {}
            }
        }
    }
    b.build(7)
}

/// Unit square in the z = 0 plane, two faces.
pub fn flat_square(side: f64) -> TexturedMesh {
    let mut b = SceneBuilder::default();
    b.terrain(1, side, |_, _| 0.0, |_, _| TERRAIN);
    b.build(7)
}

/// Texture of `w x h` random pixels.
pub fn noise_texture(w: u32, h: u32, seed: u64) -> Texture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..w * h)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    Texture::new(w, h, pixels).unwrap()
}

/// Maps the xy footprint of every face onto one texture.
pub fn with_planar_texture(mut mesh: TexturedMesh, texture: Texture) -> TexturedMesh {
    let (lo, hi) = mesh
        .vertices
        .iter()
        .fold((mesh.vertices[0], mesh.vertices[0]), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        });
    let ext = hi - lo;
    let uv_of = |p: &Vector3<f64>| Vector2::new((p.x - lo.x) / ext.x, (p.y - lo.y) / ext.y);
    let vertices = mesh.vertices.clone();
    for face in &mut mesh.faces {
        let uv = face.vertices.map(|v| uv_of(&vertices[v as usize]));
        face.uv = Some(uv);
        face.texture = Some(0);
    }
    mesh.textures = vec![texture];
    mesh
}

pub fn min_pairwise_distance(points: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

/// For every query, whether some reference point lies strictly closer than
/// `r`. Sort-and-sweep along x, independent of any grid index.
pub fn has_neighbor_within(
    references: &[Vector3<f64>],
    queries: &[Vector3<f64>],
    r: f64,
) -> Vec<bool> {
    let mut sorted: Vec<Vector3<f64>> = references.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    queries
        .iter()
        .map(|q| {
            let start = sorted.partition_point(|p| p.x < q.x - r);
            sorted[start..]
                .iter()
                .take_while(|p| p.x <= q.x + r)
                .any(|p| (p - q).norm_squared() < r * r)
        })
        .collect()
}
