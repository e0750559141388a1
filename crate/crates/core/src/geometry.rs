//! Per-face and per-vertex differential quantities and barycentric helpers.

use nalgebra::{Vector2, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mesh_io::TexturedMesh;

/// Faces with a smaller 3D area (m²) are degenerate: skipped by the samplers
/// and ignored when averaging normals.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Smallest UV triangle area, in texture-square units, treated as valid.
pub const MIN_UV_AREA: f64 = 1e-14;

/// Distance clamp (m) for inverse-distance normal weights.
pub const DISTANCE_EPS: f64 = 1e-9;

/// A point is inside a triangle when all barycentrics are `>= -BARY_TOLERANCE`.
pub const BARY_TOLERANCE: f64 = 1e-9;

/// Magnitude below which an area-weighted normal sum counts as null.
pub const NULL_NORMAL_SUM: f64 = 1e-12;

fn cross2(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Geometry of one face in both 3D and texture space.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBasis {
    pub face: usize,
    pub corners: [Vector3<f64>; 3],
    pub uv: Option<[Vector2<f64>; 3]>,
    pub area_3d: f64,
    /// Signed UV area; positive for counter-clockwise UV corners.
    pub area_uv: f64,
    pub normal: Option<Vector3<f64>>,
}

impl FaceBasis {
    pub fn new(mesh: &TexturedMesh, face: usize) -> Self {
        let corners = mesh.corners(face);
        let [a, b, c] = corners;
        let cross = (b - a).cross(&(c - a));
        let area_3d = 0.5 * cross.norm();
        let normal = (area_3d > MIN_FACE_AREA).then(|| cross.normalize());
        let uv = mesh.faces[face].uv;
        let area_uv = uv.map_or(0.0, |[ua, ub, uc]| 0.5 * cross2(ub - ua, uc - ua));
        Self {
            face,
            corners,
            uv,
            area_3d,
            area_uv,
            normal,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal.is_none()
    }

    pub fn has_valid_uv(&self) -> bool {
        self.uv.is_some() && self.area_uv.abs() > MIN_UV_AREA
    }

    pub fn centroid(&self) -> Vector3<f64> {
        (self.corners[0] + self.corners[1] + self.corners[2]) / 3.0
    }

    pub fn point_at(&self, bary: [f64; 3]) -> Vector3<f64> {
        let [a, b, c] = self.corners;
        a * bary[0] + b * bary[1] + c * bary[2]
    }

    pub fn uv_at(&self, bary: [f64; 3]) -> Option<Vector2<f64>> {
        self.uv
            .map(|[a, b, c]| a * bary[0] + b * bary[1] + c * bary[2])
    }

    /// Barycentric coordinates of `uv` in the face's UV triangle.
    pub fn uv_barycentric(&self, uv: Vector2<f64>) -> Result<[f64; 3]> {
        let [a, b, c] = match self.uv {
            Some(t) if self.has_valid_uv() => t,
            _ => return Err(Error::DegenerateUv { face: self.face }),
        };
        let d = cross2(b - a, c - a);
        let beta = cross2(uv - a, c - a) / d;
        let gamma = cross2(b - a, uv - a) / d;
        Ok([1.0 - beta - gamma, beta, gamma])
    }

    /// Barycentric coordinates of the projection of `p` onto the face plane.
    /// NaN for degenerate faces.
    pub fn barycentric_of(&self, p: &Vector3<f64>) -> [f64; 3] {
        barycentric_in(&self.corners, p).unwrap_or([f64::NAN; 3])
    }
}

/// Outward unit normal from the counter-clockwise winding.
pub fn face_normal(mesh: &TexturedMesh, face: usize) -> Result<Vector3<f64>> {
    FaceBasis::new(mesh, face)
        .normal
        .ok_or(Error::DegenerateFace { face })
}

pub fn face_area(mesh: &TexturedMesh, face: usize) -> f64 {
    let [a, b, c] = mesh.corners(face);
    0.5 * (b - a).cross(&(c - a)).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexNormals {
    pub normals: Vec<Vector3<f64>>,
    /// Vertices whose area-weighted sum was null (folded faces), resolved
    /// from the directions of their incident edges.
    pub edge_fallback: Vec<u32>,
}

/// Area-weighted vertex normals.
///
/// When the weighted sum vanishes, the normal is the normalized sum of unit
/// vectors from the vertex toward each neighbor. Isolated vertices get +Z.
pub fn vertex_normals(mesh: &TexturedMesh) -> VertexNormals {
    let n = mesh.vertices.len();
    let mut sums = vec![Vector3::zeros(); n];
    let mut used = vec![false; n];
    for (fi, face) in mesh.faces.iter().enumerate() {
        let [a, b, c] = mesh.corners(fi);
        // |cross| is twice the area, so cross/2 is the unit normal times the area
        let weighted = 0.5 * (b - a).cross(&(c - a));
        let area_ok = weighted.norm() > MIN_FACE_AREA;
        for &v in &face.vertices {
            used[v as usize] = true;
            if area_ok {
                sums[v as usize] += weighted;
            }
        }
    }

    let mut normals = Vec::with_capacity(n);
    let mut null_vertices = Vec::new();
    for (v, sum) in sums.iter().enumerate() {
        if !used[v] {
            normals.push(Vector3::z());
        } else if sum.norm() < NULL_NORMAL_SUM {
            normals.push(Vector3::zeros());
            null_vertices.push(v as u32);
        } else {
            normals.push(sum.normalize());
        }
    }

    if !null_vertices.is_empty() {
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut is_null = vec![false; n];
        for &v in &null_vertices {
            is_null[v as usize] = true;
        }
        for face in &mesh.faces {
            for k in 0..3 {
                let v = face.vertices[k];
                if is_null[v as usize] {
                    for other in [face.vertices[(k + 1) % 3], face.vertices[(k + 2) % 3]] {
                        neighbors[v as usize].push(other);
                    }
                }
            }
        }
        for &v in &null_vertices {
            let list = &mut neighbors[v as usize];
            list.sort_unstable();
            list.dedup();
            let origin = mesh.vertices[v as usize];
            let sum: Vector3<f64> = list
                .iter()
                .filter_map(|&o| (mesh.vertices[o as usize] - origin).try_normalize(0.0))
                .sum();
            normals[v as usize] = sum.try_normalize(NULL_NORMAL_SUM).unwrap_or(Vector3::z());
        }
    }

    VertexNormals {
        normals,
        edge_fallback: null_vertices,
    }
}

/// Inverse-distance blend of the corner normals of `face` at `p`.
///
/// Each corner weight `1 / d` is scaled by the corner's barycentric
/// coordinate, so the corner opposite an edge drops out on that edge and the
/// result is continuous across faces sharing it.
///
/// Returns `None` when the blended vector vanishes.
pub fn interpolated_normal(
    mesh: &TexturedMesh,
    vertex_normals: &VertexNormals,
    face: usize,
    p: &Vector3<f64>,
) -> Option<Vector3<f64>> {
    let corners = mesh.corners(face);
    let ids = mesh.faces[face].vertices;
    let bary = barycentric_in(&corners, p)?;
    let mut sum = Vector3::zeros();
    for k in 0..3 {
        let n = vertex_normals.normals[ids[k] as usize];
        let d = (p - corners[k]).norm();
        if d < DISTANCE_EPS {
            return Some(n);
        }
        sum += n * (bary[k].max(0.0) / d);
    }
    sum.try_normalize(NULL_NORMAL_SUM)
}

fn barycentric_in(corners: &[Vector3<f64>; 3], p: &Vector3<f64>) -> Option<[f64; 3]> {
    let [a, b, c] = *corners;
    let (e0, e1, e2) = (b - a, c - a, p - a);
    let d00 = e0.dot(&e0);
    let d01 = e0.dot(&e1);
    let d11 = e1.dot(&e1);
    let denom = d00 * d11 - d01 * d01;
    if !(denom > 0.0) {
        return None;
    }
    let d20 = e2.dot(&e0);
    let d21 = e2.dot(&e1);
    let beta = (d11 * d20 - d01 * d21) / denom;
    let gamma = (d00 * d21 - d01 * d20) / denom;
    Some([1.0 - beta - gamma, beta, gamma])
}

/// Maps `uv` to the face: returns the 3D point and its barycentric coordinates.
pub fn uv_to_world(fb: &FaceBasis, uv: Vector2<f64>) -> Result<(Vector3<f64>, [f64; 3])> {
    let bary = fb.uv_barycentric(uv)?;
    Ok((fb.point_at(bary), bary))
}

/// Barycentric coordinates of the uniform triangle sample driven by `u, v` in `[0, 1)`.
pub fn uniform_barycentric(u: f64, v: f64) -> [f64; 3] {
    let su = u.sqrt();
    [1.0 - su, su * (1.0 - v), su * v]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub position: Vector3<f64>,
    pub barycentric: [f64; 3],
}

/// Uniformly distributed point on the face.
pub fn sample_uniform_on_face<R: Rng + ?Sized>(fb: &FaceBasis, rng: &mut R) -> SurfaceSample {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let barycentric = uniform_barycentric(u, v);
    SurfaceSample {
        position: fb.point_at(barycentric),
        barycentric,
    }
}

/// Total surface (m²) per class id; unlabeled faces count as class 0.
pub fn class_area(mesh: &TexturedMesh) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.class_count.max(1) as usize];
    for (fi, face) in mesh.faces.iter().enumerate() {
        let class = face.class.unwrap_or(0) as usize;
        areas[class] += face_area(mesh, fi);
    }
    areas
}

/// `class_area` normalized to fractions of the total surface.
pub fn class_area_fractions(mesh: &TexturedMesh) -> Vec<f64> {
    let areas = class_area(mesh);
    let total: f64 = areas.iter().sum();
    if total > 0.0 {
        areas.iter().map(|a| a / total).collect()
    } else {
        areas
    }
}

pub fn total_area(mesh: &TexturedMesh) -> f64 {
    (0..mesh.faces.len())
        .map(|f| face_area(mesh, f))
        .filter(|&a| a > MIN_FACE_AREA)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::{Face, TexturedMesh};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mesh(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>) -> TexturedMesh {
        TexturedMesh {
            vertices: vertices.into_iter().map(Vector3::from).collect(),
            faces: faces.into_iter().map(Face::new).collect(),
            textures: vec![],
            class_count: 7,
            origin: Vector3::zeros(),
        }
    }

    fn unit_tri() -> TexturedMesh {
        mesh(
            vec![[0., 0., 0.], [1., 0., 0.], [0., 1., 0.]],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn face_normal_follows_winding() {
        assert_eq!(face_normal(&unit_tri(), 0).unwrap(), Vector3::z());
        let flipped = mesh(
            vec![[0., 0., 0.], [1., 0., 0.], [0., 1., 0.]],
            vec![[0, 2, 1]],
        );
        assert_eq!(face_normal(&flipped, 0).unwrap(), -Vector3::z());
        let flat = mesh(
            vec![[0., 0., 0.], [1., 0., 0.], [2., 0., 0.]],
            vec![[0, 1, 2]],
        );
        assert!(matches!(
            face_normal(&flat, 0),
            Err(Error::DegenerateFace { face: 0 })
        ));
    }

    #[test]
    fn random_face_normal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p: Vec<[f64; 3]> = (0..3)
                .map(|_| [rng.random::<f64>(), rng.random(), rng.random()])
                .collect();
            let m = mesh(p, vec![[0, 1, 2]]);
            let Ok(n) = face_normal(&m, 0) else { continue };
            let [a, b, c] = m.corners(0);
            assert!(n.dot(&(b - a)).abs() < 1e-9);
            assert!(n.dot(&(c - a)).abs() < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_square_vertex_normals() {
        let m = mesh(
            vec![[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.]],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        let vn = vertex_normals(&m);
        assert!(vn.edge_fallback.is_empty());
        for n in &vn.normals {
            assert_eq!(*n, Vector3::z());
        }
    }

    #[test]
    fn fold_uses_edge_directions() {
        let m = mesh(
            vec![[0., 0., 0.], [1., 0., 0.], [0., 1., 0.]],
            vec![[0, 1, 2], [0, 2, 1]],
        );
        let vn = vertex_normals(&m);
        assert_eq!(vn.edge_fallback, vec![0, 1, 2]);
        for n in &vn.normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
        // vertex 0: x + y directions
        let expected = Vector3::new(1.0, 1.0, 0.0).normalize();
        assert!((vn.normals[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn isolated_vertex_points_up() {
        let mut m = unit_tri();
        m.vertices.push(Vector3::new(5.0, 5.0, 5.0));
        assert_eq!(vertex_normals(&m).normals[3], Vector3::z());
    }

    #[test]
    fn interpolated_normal_at_corner_and_uniform() {
        let m = unit_tri();
        let vn = VertexNormals {
            normals: vec![Vector3::x(), Vector3::y(), Vector3::z()],
            edge_fallback: vec![],
        };
        assert_eq!(
            interpolated_normal(&m, &vn, 0, &Vector3::x()),
            Some(Vector3::y())
        );
        let same = VertexNormals {
            normals: vec![Vector3::new(0.0, 0.6, 0.8); 3],
            edge_fallback: vec![],
        };
        let n = interpolated_normal(&m, &same, 0, &Vector3::new(0.2, 0.3, 0.0)).unwrap();
        assert!((n - Vector3::new(0.0, 0.6, 0.8)).norm() < 1e-12);
    }

    #[test]
    fn interpolated_normal_continuous_over_ridge() {
        // tent: ridge along y at x = 0, z = 1
        let m = mesh(
            vec![[0., 0., 1.], [0., 2., 1.], [-1., 0., 0.], [1., 0., 0.]],
            vec![[0, 2, 1], [0, 1, 3]],
        );
        let vn = vertex_normals(&m);
        for t in [1e-3, 1e-5, 1e-7] {
            let left = Vector3::new(-t, 0.7, 1.0 - t);
            let right = Vector3::new(t, 0.7, 1.0 - t);
            let a = interpolated_normal(&m, &vn, 0, &left).unwrap();
            let b = interpolated_normal(&m, &vn, 1, &right).unwrap();
            assert!((a - b).norm() < 10.0 * t, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn uv_to_world_corners_and_midpoints() {
        let mut m = mesh(
            vec![[0., 0., 0.], [2., 0., 0.], [0., 3., 1.]],
            vec![[0, 1, 2]],
        );
        let uv = [
            Vector2::new(0.1, 0.1),
            Vector2::new(0.5, 0.2),
            Vector2::new(0.2, 0.6),
        ];
        m.faces[0].uv = Some(uv);
        let fb = FaceBasis::new(&m, 0);
        let (p, b) = uv_to_world(&fb, uv[0]).unwrap();
        assert!((p - m.vertices[0]).norm() < 1e-12);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12 && b[2].abs() < 1e-12);
        let (p, b) = uv_to_world(&fb, (uv[0] + uv[1]) / 2.0).unwrap();
        assert!((p - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((b[0] - 0.5).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = uniform_barycentric(rng.random(), rng.random());
            let q = fb.uv_at(s).unwrap();
            let (_, b) = uv_to_world(&fb, q).unwrap();
            assert!((fb.uv_at(b).unwrap() - q).norm() < 1e-9);
        }
    }

    #[test]
    fn degenerate_uv_is_flagged() {
        let mut m = unit_tri();
        m.faces[0].uv = Some([
            Vector2::new(0.0, 0.0),
            Vector2::new(0.5, 0.5),
            Vector2::new(1.0, 1.0),
        ]);
        let fb = FaceBasis::new(&m, 0);
        assert!(matches!(
            uv_to_world(&fb, Vector2::new(0.2, 0.2)),
            Err(Error::DegenerateUv { face: 0 })
        ));
    }

    #[test]
    fn uniform_sample_corners() {
        assert_eq!(uniform_barycentric(0.0, 0.7), [1.0, 0.0, 0.0]);
        assert_eq!(uniform_barycentric(1.0, 0.0), [0.0, 1.0, 0.0]);
        assert_eq!(uniform_barycentric(1.0, 1.0), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn class_area_fractions_by_class() {
        let mut m = mesh(
            vec![
                [0., 0., 0.],
                [1., 0., 0.],
                [0., 2., 0.],
                [3., 0., 0.],
                [0., 2., 0.],
            ],
            vec![[0, 1, 2], [0, 3, 2]],
        );
        // areas 1 and 3
        m.faces[0].class = Some(1);
        m.faces[1].class = Some(2);
        let f = class_area_fractions(&m);
        assert!((f[1] - 0.25).abs() < 1e-12);
        assert!((f[2] - 0.75).abs() < 1e-12);

        let single = {
            let mut m = unit_tri();
            m.faces[0].class = Some(4);
            m
        };
        assert_eq!(class_area_fractions(&single)[4], 1.0);
    }
}
