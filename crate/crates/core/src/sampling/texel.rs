use nalgebra::Vector2;
use rayon::prelude::*;

use super::{pack, RawPoint};
use crate::error::{Error, Result};
use crate::geometry::{FaceBasis, BARY_TOLERANCE};
use crate::mesh_io::{ColorLookup, PointCloud, TexturedMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelParams {
    /// Retained texel size over original texel size.
    pub scale: f64,
    pub color: ColorLookup,
}

impl TexelParams {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            color: ColorLookup::Nearest,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TexelReport {
    /// Faces without a texture; they produce no points.
    pub untextured_faces: usize,
    /// Faces with zero 3D area; they produce no points.
    pub degenerate_faces: usize,
    /// Textured faces with a collapsed UV triangle, sampled once at their centroid.
    pub degenerate_uv_faces: usize,
    /// Texel centers claimed by more than one face and emitted only once.
    pub shared_texels: usize,
}

#[derive(Debug, Clone)]
pub struct TexelSampling {
    pub cloud: PointCloud,
    pub report: TexelReport,
}

/// Number of virtual texel centers `(i + 0.5) * scale` that fall below `size`.
pub fn virtual_grid_size(size: u32, scale: f64) -> u64 {
    let n = size as f64;
    let mut count = (n / scale - 0.5).ceil().max(0.0) as u64;
    while count > 0 && ((count - 1) as f64 + 0.5) * scale >= n {
        count -= 1;
    }
    while (count as f64 + 0.5) * scale < n {
        count += 1;
    }
    count
}

struct TexelGrid {
    width: u32,
    height: u32,
    nx: u64,
    ny: u64,
    scale: f64,
}

impl TexelGrid {
    fn center(&self, i: u64, j: u64) -> Vector2<f64> {
        Vector2::new(
            (i as f64 + 0.5) * self.scale / self.width as f64,
            (j as f64 + 0.5) * self.scale / self.height as f64,
        )
    }

    /// Inclusive index range of centers whose coordinate in texels lies in `[lo, hi]`.
    fn span(lo: f64, hi: f64, scale: f64, count: u64) -> Option<(u64, u64)> {
        let first = (lo / scale - 0.5).ceil().max(0.0);
        let last = (hi / scale - 0.5).floor();
        if last < 0.0 || first > last || count == 0 {
            return None;
        }
        let first = first as u64;
        let last = (last as u64).min(count - 1);
        (first <= last).then_some((first, last))
    }
}

enum FaceOutcome {
    Points(Vec<RawPoint>),
    Untextured,
    Degenerate,
    DegenerateUv(RawPoint),
}

/// Samples one point at the center of every virtual texel covered by a face.
///
/// The virtual grid of a `W x H` texture has centers at `(i + 0.5) * scale`
/// texels. A center belongs to a face when all of its barycentric coordinates
/// in the face's UV triangle are `>= -1e-9`; centers shared by several faces of
/// the same texture go to the lowest face index. Points are ordered by face,
/// then by row and column of the virtual grid.
pub fn texel_sample(mesh: &TexturedMesh, params: &TexelParams) -> Result<TexelSampling> {
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "scale",
            detail: format!("{} is not positive", params.scale),
        });
    }
    let mut by_texture: Vec<Vec<usize>> = vec![Vec::new(); mesh.textures.len()];
    let mut report = TexelReport::default();
    for (fi, face) in mesh.faces.iter().enumerate() {
        match face.texture {
            Some(t) => by_texture[t as usize].push(fi),
            None => report.untextured_faces += 1,
        }
    }

    let per_texture: Vec<(Vec<(usize, FaceOutcome)>, usize)> = by_texture
        .par_iter()
        .enumerate()
        .map(|(t, faces)| sample_texture(mesh, t, faces, params))
        .collect();

    let mut outcomes: Vec<Option<FaceOutcome>> = (0..mesh.faces.len()).map(|_| None).collect();
    for (faces, shared) in per_texture {
        report.shared_texels += shared;
        for (fi, outcome) in faces {
            outcomes[fi] = Some(outcome);
        }
    }
    let mut points = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            FaceOutcome::Points(p) => points.extend(p),
            FaceOutcome::DegenerateUv(p) => {
                report.degenerate_uv_faces += 1;
                points.push(p);
            }
            FaceOutcome::Degenerate => report.degenerate_faces += 1,
            FaceOutcome::Untextured => report.untextured_faces += 1,
        }
    }
    Ok(TexelSampling {
        cloud: pack(mesh, points, true),
        report,
    })
}

fn sample_texture(
    mesh: &TexturedMesh,
    texture: usize,
    faces: &[usize],
    params: &TexelParams,
) -> (Vec<(usize, FaceOutcome)>, usize) {
    let tex = &mesh.textures[texture];
    let grid = TexelGrid {
        width: tex.width(),
        height: tex.height(),
        nx: virtual_grid_size(tex.width(), params.scale),
        ny: virtual_grid_size(tex.height(), params.scale),
        scale: params.scale,
    };
    let mut claimed = vec![0u64; ((grid.nx * grid.ny) as usize).div_ceil(64)];
    let mut shared = 0usize;
    let mut out = Vec::with_capacity(faces.len());

    for &fi in faces {
        let fb = FaceBasis::new(mesh, fi);
        if fb.is_degenerate() {
            out.push((fi, FaceOutcome::Degenerate));
            continue;
        }
        let Some(uv) = fb.uv else {
            out.push((fi, FaceOutcome::Untextured));
            continue;
        };
        if !fb.has_valid_uv() {
            let mut sum = [0u32; 3];
            for corner in uv {
                let c = tex.lookup(corner, params.color);
                for k in 0..3 {
                    sum[k] += c[k] as u32;
                }
            }
            let color = sum.map(|s| ((s as f64) / 3.0).round() as u8);
            out.push((
                fi,
                FaceOutcome::DegenerateUv(RawPoint {
                    position: fb.centroid(),
                    face: fi as u32,
                    color,
                }),
            ));
            continue;
        }

        // bounding box in texel units, padded so the barycentric tolerance decides
        let (mut lo, mut hi) = (uv[0], uv[0]);
        for c in &uv[1..] {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        let pad = 1e-6;
        let xs = TexelGrid::span(
            (lo.x - pad) * grid.width as f64,
            (hi.x + pad) * grid.width as f64,
            grid.scale,
            grid.nx,
        );
        let ys = TexelGrid::span(
            (lo.y - pad) * grid.height as f64,
            (hi.y + pad) * grid.height as f64,
            grid.scale,
            grid.ny,
        );
        let mut points = Vec::new();
        if let (Some((i0, i1)), Some((j0, j1))) = (xs, ys) {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let center = grid.center(i, j);
                    let bary = fb
                        .uv_barycentric(center)
                        .expect("valid UV triangle checked above");
                    if bary.iter().any(|&b| b < -BARY_TOLERANCE) {
                        continue;
                    }
                    let bit = (j * grid.nx + i) as usize;
                    if claimed[bit / 64] & (1 << (bit % 64)) != 0 {
                        shared += 1;
                        continue;
                    }
                    claimed[bit / 64] |= 1 << (bit % 64);
                    points.push(RawPoint {
                        position: fb.point_at(bary),
                        face: fi as u32,
                        color: tex.lookup(center, params.color),
                    });
                }
            }
        }
        out.push((fi, FaceOutcome::Points(points)));
    }
    (out, shared)
}
