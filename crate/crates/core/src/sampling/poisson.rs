use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{pack, substream, RawPoint};
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_on_face, FaceBasis};
use crate::mesh_io::{ColorLookup, PointCloud, TexturedMesh};
use crate::spatial_index::UniformGrid3D;

const FACE_CHOICE_STREAM: u64 = 0;
const SELECTION_STREAM: u64 = 1;
const FIRST_FACE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParams {
    /// Minimum distance between kept samples (m).
    pub radius: f64,
    /// Candidates drawn per disk of radius `radius / 2`.
    pub oversample: f64,
    pub seed: u64,
    pub color: ColorLookup,
}

impl PoissonParams {
    pub const DEFAULT_OVERSAMPLE: f64 = 20.0;

    pub fn new(radius: f64, seed: u64) -> Self {
        Self {
            radius,
            oversample: Self::DEFAULT_OVERSAMPLE,
            seed,
            color: ColorLookup::Nearest,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                detail: format!("{} is not positive", self.radius),
            });
        }
        if !(self.oversample >= 1.0 && self.oversample.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "oversample",
                detail: format!("{} is below 1", self.oversample),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSampling {
    /// The kept samples.
    pub cloud: PointCloud,
    /// Every candidate, kept or not.
    pub candidates: PointCloud,
    /// Indices into `candidates` of the kept samples, ascending.
    pub kept: Vec<usize>,
}

/// `ceil(oversample * area / (pi * (radius / 2)^2))`.
pub fn candidate_count(total_area: f64, radius: f64, oversample: f64) -> f64 {
    let disk = std::f64::consts::PI * (radius / 2.0).powi(2);
    (oversample * total_area / disk).ceil()
}

/// Draws `count` uniform surface samples: faces are chosen with probability
/// proportional to area, then each face fills its quota from its own random
/// stream. Degenerate faces are never chosen.
pub fn generate_candidates(
    mesh: &TexturedMesh,
    count: usize,
    seed: u64,
    color: ColorLookup,
) -> Result<PointCloud> {
    let bases: Vec<FaceBasis> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|f| FaceBasis::new(mesh, f))
        .collect();
    let mut cumulative = Vec::with_capacity(bases.len());
    let mut total = 0.0;
    for fb in &bases {
        if !fb.is_degenerate() {
            total += fb.area_3d;
        }
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut quota = vec![0u32; bases.len()];
    let mut rng = substream(seed, FACE_CHOICE_STREAM);
    for _ in 0..count {
        let target = rng.random::<f64>() * total;
        let f = cumulative
            .partition_point(|&c| c <= target)
            .min(bases.len() - 1);
        quota[f] += 1;
    }

    let per_face: Vec<Vec<RawPoint>> = bases
        .par_iter()
        .zip(quota.par_iter())
        .map(|(fb, &n)| {
            if n == 0 {
                return Vec::new();
            }
            let tex = mesh.texture_of(fb.face).filter(|_| fb.has_valid_uv());
            let mut rng = substream(seed, FIRST_FACE_STREAM + fb.face as u64);
            (0..n)
                .map(|_| {
                    let s = sample_uniform_on_face(fb, &mut rng);
                    let color = match (tex, fb.uv_at(s.barycentric)) {
                        (Some(t), Some(uv)) => t.lookup(uv, color),
                        _ => [0, 0, 0],
                    };
                    RawPoint {
                        position: s.position,
                        face: fb.face as u32,
                        color,
                    }
                })
                .collect()
        })
        .collect();

    let points: Vec<RawPoint> = per_face.into_iter().flatten().collect();
    Ok(pack(mesh, points, !mesh.textures.is_empty()))
}

/// Greedy constrained selection: visits candidates in a seeded random order,
/// keeping each one that has no kept sample closer than `radius` and
/// removing every open candidate closer than `radius` to it.
///
/// Returns the kept indices in ascending order.
pub fn select_poisson(positions: &[Vector3<f64>], radius: f64, seed: u64) -> Result<Vec<usize>> {
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    const OPEN: u8 = 0;
    const KEPT: u8 = 1;
    const REMOVED: u8 = 2;

    // cell diagonal equals the radius; neighbors lie within a 5x5x5 stencil
    let grid = UniformGrid3D::build(positions, radius / 3f64.sqrt())?;
    let mut order: Vec<u32> = (0..positions.len() as u32).collect();
    order.shuffle(&mut substream(seed, SELECTION_STREAM));

    let r2 = radius * radius;
    let mut state = vec![OPEN; positions.len()];
    for &i in &order {
        let i = i as usize;
        if state[i] != OPEN {
            continue;
        }
        state[i] = KEPT;
        grid.for_each_within(&positions[i], radius, |j, d2| {
            if d2 < r2 && state[j] == OPEN {
                state[j] = REMOVED;
            }
        });
    }
    Ok((0..positions.len()).filter(|&i| state[i] == KEPT).collect())
}

/// Poisson disk sampling of the mesh surface with minimum distance `radius`.
pub fn poisson_disk_sample(mesh: &TexturedMesh, params: &PoissonParams) -> Result<PoissonSampling> {
    params.validate()?;
    let area = crate::geometry::total_area(mesh);
    if !(area > 0.0) {
        return Err(Error::ZeroArea);
    }
    let n = candidate_count(area, params.radius, params.oversample);
    if n > u32::MAX as f64 {
        return Err(Error::InvalidParameter {
            name: "radius",
            detail: format!("would need {n} candidates"),
        });
    }
    let candidates = generate_candidates(mesh, n as usize, params.seed, params.color)?;
    let kept = select_poisson(&candidates.positions, params.radius, params.seed)?;
    Ok(PoissonSampling {
        cloud: candidates.select(&kept),
        candidates,
        kept,
    })
}
