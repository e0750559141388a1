//! Point cloud sampling from textured meshes, per-point features, training
//! subsets and inference tiles, and back-projection of point logits to face
//! labels with segmentation metrics.

pub mod error;
pub mod features;
pub mod geometry;
pub mod labels;
pub mod mesh_io;
pub mod sampling;
pub mod spatial_index;
pub mod subsets;

pub use error::{Error, ErrorKind, Result};
pub use mesh_io::{
    Alignment, ColorLookup, Face, LogitTable, MeshOptions, PointCloud, Subset, SubsetList, Texture,
    TexturedMesh,
};
pub use spatial_index::UniformGrid3D;
