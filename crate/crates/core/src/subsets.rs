//! Class-balanced training draws, covering inference tiles, and merging of
//! per-tile logits back onto points.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh_io::{is_evaluated_label, Alignment, LogitTable, PointCloud, Subset, SubsetList};
use crate::sampling::substream;
use crate::spatial_index::UniformGrid3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetParams {
    /// Points per subset.
    pub k: usize,
    /// Number of training draws.
    pub n_subsets: usize,
    pub seed: u64,
}

impl SubsetParams {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_subsets == 0 {
            return Err(Error::InvalidParameter {
                name: "subsets",
                detail: format!("k={} n={} must both be >= 1", self.k, self.n_subsets),
            });
        }
        if u32::try_from(self.k).is_err() {
            return Err(Error::InvalidParameter {
                name: "k",
                detail: format!("{} exceeds u32", self.k),
            });
        }
        Ok(())
    }
}

/// Per-label weights proportional to the inverse point count of each class
/// present, normalized to sum to one. Indexed by label; unclassified labels
/// (0 and -1) weigh nothing.
pub fn class_weights(cloud: &PointCloud) -> Result<Vec<f64>> {
    let counts = class_counts(cloud)?;
    let inv: Vec<f64> = counts
        .iter()
        .map(|&m| if m > 0 { 1.0 / m as f64 } else { 0.0 })
        .collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|w| w / total).collect())
}

/// Points per evaluated label, indexed by label.
fn class_counts(cloud: &PointCloud) -> Result<Vec<usize>> {
    let labels = cloud.labels.as_ref().ok_or(Error::NoLabeledPoints)?;
    let mut counts: Vec<usize> = Vec::new();
    for &l in labels.iter().filter(|&&l| is_evaluated_label(l)) {
        let l = l as usize;
        if counts.len() <= l {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::NoLabeledPoints);
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDraw {
    pub subsets: SubsetList,
    /// Label of each drawn center, in draw order.
    pub center_labels: Vec<i32>,
    /// Subsets whose members were padded because the cloud has fewer than k points.
    pub padded: usize,
}

/// `k` neighbors of `center`, padded by cycling back from the farthest when
/// the cloud is too small. The flag reports padding.
fn neighborhood(grid: &UniformGrid3D, center: usize, k: usize) -> (Vec<u32>, bool) {
    let mut members: Vec<u32> = grid
        .knn(&grid.points()[center], k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let found = members.len();
    let padded = found < k;
    let mut back = found;
    while members.len() < k {
        back = if back == 0 { found - 1 } else { back - 1 };
        members.push(members[back]);
    }
    (members, padded)
}

fn build_grid(cloud: &PointCloud) -> Result<UniformGrid3D> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    UniformGrid3D::build(
        &cloud.positions,
        UniformGrid3D::knn_cell_size(&cloud.positions),
    )
}

/// Draws `n_subsets` centers, each point weighted by the inverse frequency
/// of its class so that every class present is visited equally often, and
/// takes each center's `k` nearest neighbors. Draws are independent (with
/// replacement).
pub fn draw_training_subsets(cloud: &PointCloud, params: &SubsetParams) -> Result<TrainingDraw> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let labels = cloud.labels.as_ref().ok_or(Error::NoLabeledPoints)?;
    let counts = class_counts(cloud)?;
    let mut members_of: Vec<Vec<u32>> = vec![Vec::new(); counts.len()];
    for (i, &l) in labels.iter().enumerate() {
        if is_evaluated_label(l) {
            members_of[l as usize].push(i as u32);
        }
    }
    // m_c points of weight 1/m_c each: the class itself is uniform
    members_of.retain(|m| !m.is_empty());

    let mut rng = substream(params.seed, 0);
    let centers: Vec<usize> = (0..params.n_subsets)
        .map(|_| {
            let pool = &members_of[rng.random_range(0..members_of.len())];
            pool[rng.random_range(0..pool.len())] as usize
        })
        .collect();

    let grid = build_grid(cloud)?;
    let neighborhoods: Vec<(Vec<u32>, bool)> = centers
        .par_iter()
        .map(|&c| neighborhood(&grid, c, params.k))
        .collect();
    let padded = neighborhoods.iter().filter(|(_, p)| *p).count();
    let subsets = centers
        .iter()
        .zip(neighborhoods)
        .map(|(&c, (members, _))| Subset {
            center: c as u32,
            members,
        })
        .collect();
    Ok(TrainingDraw {
        subsets: SubsetList::new(params.k, subsets)?,
        center_labels: centers.iter().map(|&c| labels[c]).collect(),
        padded,
    })
}

/// Overlapping tiles of `k` nearest neighbors covering every point. Each new
/// tile is centered on the lowest-index point not yet covered.
pub fn tile_for_inference(cloud: &PointCloud, k: usize) -> Result<SubsetList> {
    if k == 0 || u32::try_from(k).is_err() {
        return Err(Error::InvalidParameter {
            name: "k",
            detail: format!("{k} is out of range"),
        });
    }
    let grid = build_grid(cloud)?;
    let mut covered = vec![false; cloud.len()];
    let mut next = 0;
    let mut subsets = Vec::new();
    while next < covered.len() {
        let (members, _) = neighborhood(&grid, next, k);
        for &m in &members {
            covered[m as usize] = true;
        }
        subsets.push(Subset {
            center: next as u32,
            members,
        });
        while next < covered.len() && covered[next] {
            next += 1;
        }
    }
    SubsetList::new(k, subsets)
}

/// Averages per-tile logits onto points. `blocks` holds one `k`-row block per
/// tile, concatenated in tile order, with rows following member order. Every
/// occurrence of a point, padded duplicates included, counts once.
pub fn merge_tile_logits(
    tiles: &SubsetList,
    blocks: &LogitTable,
    point_count: usize,
) -> Result<LogitTable> {
    let k = tiles.k();
    let classes = blocks.class_count();
    if blocks.rows() != tiles.len() * k {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows for {} tiles of {k} members (expected {})",
            blocks.rows(),
            tiles.len(),
            tiles.len() * k
        )));
    }
    tiles.check_indices(point_count)?;

    // (point, block row) pairs; sorting groups them by point
    let mut owners: Vec<(u32, usize)> = tiles
        .subsets()
        .iter()
        .enumerate()
        .flat_map(|(t, s)| {
            s.members
                .iter()
                .enumerate()
                .map(move |(j, &p)| (p, t * k + j))
        })
        .collect();
    owners.par_sort_unstable();
    let mut starts = vec![0usize; point_count + 1];
    for &(p, _) in &owners {
        starts[p as usize + 1] += 1;
    }
    for i in 0..point_count {
        starts[i + 1] += starts[i];
    }
    if let Some(p) = (0..point_count).find(|&p| starts[p] == starts[p + 1]) {
        return Err(Error::CoverageGap { point: p });
    }

    let values: Vec<f32> = (0..point_count)
        .into_par_iter()
        .flat_map_iter(|p| {
            let rows = &owners[starts[p]..starts[p + 1]];
            let mut sum = vec![0.0f64; classes];
            for &(_, r) in rows {
                for (s, &v) in sum.iter_mut().zip(blocks.row(r)) {
                    *s += v as f64;
                }
            }
            let n = rows.len() as f64;
            sum.into_iter().map(move |s| (s / n) as f32)
        })
        .collect();
    LogitTable::new(classes, Alignment::Point, values)
}
