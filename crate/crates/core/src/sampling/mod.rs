//! Point cloud generation from a textured mesh.
//!
//! Two samplers are provided: texel sampling, which emits one point per
//! (virtual) texel center, and Poisson disk sampling, which greedily thins a
//! dense uniform candidate set. Either output can be thinned further with
//! [`grid_subsample`].

mod grid;
mod poisson;
mod texel;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use grid::{grid_cells, grid_subsample, GridParams};
pub use poisson::{
    candidate_count, generate_candidates, poisson_disk_sample, select_poisson, PoissonParams,
    PoissonSampling,
};
pub use texel::{texel_sample, virtual_grid_size, TexelParams, TexelReport, TexelSampling};

use crate::mesh_io::{PointCloud, TexturedMesh, NO_LABEL};

/// Random stream `stream` of the generator seeded with `seed`.
pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn face_label(mesh: &TexturedMesh, face: usize) -> i32 {
    mesh.faces[face].class.map_or(NO_LABEL, |c| c as i32)
}

pub(crate) fn mesh_has_labels(mesh: &TexturedMesh) -> bool {
    mesh.faces.iter().any(|f| f.class.is_some())
}

/// One sampled point before it is packed into a [`PointCloud`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawPoint {
    pub position: Vector3<f64>,
    pub face: u32,
    pub color: [u8; 3],
}

pub(crate) fn pack(mesh: &TexturedMesh, points: Vec<RawPoint>, with_color: bool) -> PointCloud {
    let labels = mesh_has_labels(mesh).then(|| {
        points
            .iter()
            .map(|p| face_label(mesh, p.face as usize))
            .collect()
    });
    PointCloud {
        origin: mesh.origin,
        colors: with_color.then(|| points.iter().map(|p| p.color).collect()),
        face_index: points.iter().map(|p| p.face).collect(),
        positions: points.into_iter().map(|p| p.position).collect(),
        normals: None,
        elevations: None,
        labels,
    }
}
