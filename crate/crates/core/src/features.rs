//! Per-point normals and height above the local minimum.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{interpolated_normal, vertex_normals, FaceBasis};
use crate::mesh_io::{PointCloud, TexturedMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalKind {
    /// Normal of the source face, constant over each face.
    Face,
    /// Inverse-distance blend of the source face's vertex normals.
    Interpolated,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalReport {
    /// Points whose own face could not provide a normal.
    pub fallback_points: usize,
    /// Vertices resolved from edge directions (folded faces).
    pub edge_fallback_vertices: usize,
}

/// Normal of the nearest non-degenerate face reachable through shared
/// vertices, for every degenerate face. `+Z` when none exists.
fn degenerate_face_normals(mesh: &TexturedMesh, bases: &[FaceBasis]) -> Vec<Option<Vector3<f64>>> {
    let mut out = vec![None; bases.len()];
    if bases.iter().all(|b| !b.is_degenerate()) {
        return out;
    }
    let mut vertex_faces: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertices.len()];
    for (fi, face) in mesh.faces.iter().enumerate() {
        for &v in &face.vertices {
            vertex_faces[v as usize].push(fi as u32);
        }
    }
    for (fi, fb) in bases.iter().enumerate() {
        if !fb.is_degenerate() {
            continue;
        }
        let target = fb.centroid();
        let mut seen = vec![false; bases.len()];
        let mut frontier = VecDeque::from([fi]);
        seen[fi] = true;
        let mut found: Option<(f64, Vector3<f64>)> = None;
        // breadth-first over face rings; the first ring holding a valid face wins
        while !frontier.is_empty() && found.is_none() {
            let mut next = VecDeque::new();
            while let Some(f) = frontier.pop_front() {
                for &v in &mesh.faces[f].vertices {
                    for &g in &vertex_faces[v as usize] {
                        let g = g as usize;
                        if seen[g] {
                            continue;
                        }
                        seen[g] = true;
                        if let Some(n) = bases[g].normal {
                            let d = (bases[g].centroid() - target).norm_squared();
                            if found.is_none_or(|(best, _)| d < best) {
                                found = Some((d, n));
                            }
                        }
                        next.push_back(g);
                    }
                }
            }
            frontier = next;
        }
        out[fi] = Some(found.map_or(Vector3::z(), |(_, n)| n));
    }
    out
}

/// Fills `cloud.normals` from the mesh faces each point was sampled on.
pub fn attach_normals(
    cloud: &mut PointCloud,
    mesh: &TexturedMesh,
    kind: NormalKind,
) -> Result<NormalReport> {
    cloud.validate()?;
    if let Some(i) = cloud
        .face_index
        .iter()
        .position(|&f| f as usize >= mesh.faces.len())
    {
        return Err(Error::ShapeMismatch(format!(
            "point {i} references face {}, mesh has {} faces",
            cloud.face_index[i],
            mesh.faces.len()
        )));
    }
    let bases: Vec<FaceBasis> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|f| FaceBasis::new(mesh, f))
        .collect();
    let fallback = degenerate_face_normals(mesh, &bases);
    let face_normal = |f: usize| -> (Vector3<f64>, bool) {
        match bases[f].normal {
            Some(n) => (n, false),
            None => (fallback[f].unwrap_or(Vector3::z()), true),
        }
    };

    let mut report = NormalReport::default();
    let normals: Vec<(Vector3<f64>, bool)> = match kind {
        NormalKind::Face => cloud
            .face_index
            .par_iter()
            .map(|&f| face_normal(f as usize))
            .collect(),
        NormalKind::Interpolated => {
            let vn = vertex_normals(mesh);
            report.edge_fallback_vertices = vn.edge_fallback.len();
            cloud
                .face_index
                .par_iter()
                .zip(cloud.positions.par_iter())
                .map(
                    |(&f, p)| match interpolated_normal(mesh, &vn, f as usize, p) {
                        Some(n) => (n, false),
                        None => (face_normal(f as usize).0, true),
                    },
                )
                .collect()
        }
    };
    report.fallback_points = normals.iter().filter(|(_, flagged)| *flagged).count();
    cloud.normals = Some(normals.into_iter().map(|(n, _)| n).collect());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationParams {
    /// Horizontal neighborhood radius (m).
    pub radius: f64,
    /// Edge of the horizontal accumulation cells (m).
    pub cell: f64,
}

impl Default for ElevationParams {
    fn default() -> Self {
        Self {
            radius: 20.0,
            cell: 1.0,
        }
    }
}

/// Per-row sparse tables answering range-minimum queries in O(1).
struct MinGrid {
    nx: usize,
    ny: usize,
    min_x: f64,
    min_y: f64,
    cell: f64,
    /// `levels[l][row * nx + i]` = min over `i .. i + 2^l` in that row.
    levels: Vec<Vec<f64>>,
}

impl MinGrid {
    fn build(points: &[Vector3<f64>], cell: f64) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut base = vec![f64::INFINITY; nx * ny];
        for p in points {
            let i = (((p.x - lo.x) / cell).floor() as usize).min(nx - 1);
            let j = (((p.y - lo.y) / cell).floor() as usize).min(ny - 1);
            let slot = &mut base[j * nx + i];
            *slot = slot.min(p.z);
        }
        let mut levels = vec![base];
        let mut width = 1;
        while width * 2 <= nx {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..nx * ny)
                .into_par_iter()
                .map(|k| {
                    let i = k % nx;
                    if i + width < nx {
                        prev[k].min(prev[k + width])
                    } else {
                        prev[k]
                    }
                })
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self {
            nx,
            ny,
            min_x: lo.x,
            min_y: lo.y,
            cell,
            levels,
        }
    }

    fn row_min(&self, row: usize, i0: usize, i1: usize) -> f64 {
        let len = i1 - i0 + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let t = &self.levels[level];
        let base = row * self.nx;
        t[base + i0].min(t[base + i1 + 1 - (1 << level)])
    }

    /// Minimum over cells whose center lies within `radius` of `(x, y)`.
    fn disk_min(&self, x: f64, y: f64, radius: f64) -> f64 {
        let fx = (x - self.min_x) / self.cell - 0.5;
        let fy = (y - self.min_y) / self.cell - 0.5;
        let rc = radius / self.cell;
        let j0 = (fy - rc).ceil().max(0.0) as usize;
        let j1 = (fy + rc).floor();
        if j1 < 0.0 {
            return f64::INFINITY;
        }
        let j1 = (j1 as usize).min(self.ny - 1);
        let mut best = f64::INFINITY;
        for j in j0..=j1 {
            let dy = j as f64 - fy;
            let half = (rc * rc - dy * dy).max(0.0).sqrt();
            let i0 = (fx - half).ceil().max(0.0) as usize;
            let i1 = (fx + half).floor();
            if i1 < 0.0 {
                continue;
            }
            let i1 = (i1 as usize).min(self.nx - 1);
            if i0 <= i1 {
                best = best.min(self.row_min(j, i0, i1));
            }
        }
        best
    }
}

/// Fills `cloud.elevations` with the height of each point above the lowest
/// point found in the horizontal cells whose centers lie within
/// `params.radius` of it.
pub fn attach_elevation(cloud: &mut PointCloud, params: &ElevationParams) -> Result<()> {
    if !(params.radius > 0.0 && params.cell > 0.0 && params.cell <= params.radius) {
        return Err(Error::InvalidParameter {
            name: "elevation",
            detail: format!(
                "need 0 < cell <= radius, got cell {} radius {}",
                params.cell, params.radius
            ),
        });
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let grid = MinGrid::build(&cloud.positions, params.cell);
    let elevations = cloud
        .positions
        .par_iter()
        .map(|p| {
            let ground = grid.disk_min(p.x, p.y, params.radius);
            (p.z - ground).max(0.0)
        })
        .collect();
    cloud.elevations = Some(elevations);
    Ok(())
}
