use std::collections::HashMap;

use nalgebra::Vector3;
use rand::Rng;

use super::substream;
use crate::error::{Error, Result};
use crate::mesh_io::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// Cell edge (m).
    pub step: f64,
    pub seed: u64,
}

/// Groups point indices by cubic cell of edge `step` anchored at the minimum
/// corner. Cells are ordered by their lowest member; members ascend.
pub fn grid_cells(positions: &[Vector3<f64>], step: f64) -> Result<Vec<Vec<usize>>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "grid step",
            detail: format!("{step} is not positive"),
        });
    }
    let Some(first) = positions.first() else {
        return Ok(Vec::new());
    };
    let min = positions.iter().fold(*first, |m, p| m.inf(p));
    let mut ids: HashMap<[i64; 3], usize> = HashMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let r = (p - min) / step;
        let key = [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64];
        let id = *ids.entry(key).or_insert_with(|| {
            cells.push(Vec::new());
            cells.len() - 1
        });
        cells[id].push(i);
    }
    Ok(cells)
}

/// Keeps one uniformly chosen point per occupied cell. Channels pass through
/// untouched and the output keeps the original point order.
pub fn grid_subsample(cloud: &PointCloud, params: &GridParams) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let cells = grid_cells(&cloud.positions, params.step)?;
    let mut rng = substream(params.seed, 0);
    let mut keep: Vec<usize> = cells
        .iter()
        .map(|members| members[rng.random_range(0..members.len())])
        .collect();
    keep.sort_unstable();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud {
            positions: points.iter().map(|&p| Vector3::from(p)).collect(),
            face_index: (0..points.len() as u32).collect(),
            labels: Some((0..points.len() as i32).collect()),
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_keeps_one_input_verbatim() {
        let c = cloud(&[[0.0, 0.0, 0.0], [0.05, 0.05, 0.0], [0.1, 0.0, 0.1]]);
        let out = grid_subsample(&c, &GridParams { step: 0.5, seed: 1 }).unwrap();
        assert_eq!(out.len(), 1);
        let i = out.face_index[0] as usize;
        assert_eq!(out.positions[0], c.positions[i]);
        assert_eq!(out.labels.as_ref().unwrap()[0], i as i32);
    }

    #[test]
    fn output_size_is_occupied_cell_count() {
        let c = cloud(&[
            [0.0, 0.0, 0.0],
            [0.3, 0.0, 0.0],
            [1.1, 0.0, 0.0],
            [1.2, 0.1, 0.0],
            [2.9, 2.9, 2.9],
        ]);
        let out = grid_subsample(&c, &GridParams { step: 1.0, seed: 9 }).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.face_index.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(
            grid_subsample(&PointCloud::default(), &GridParams { step: 1.0, seed: 0 }).is_err()
        );
    }
}
