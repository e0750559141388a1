use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Label value for points without a class.
pub const NO_LABEL: i32 = -1;

/// Sampled points and their per-point channels.
///
/// Positions are relative to `origin`. Optional channels, when present, have
/// one entry per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub origin: Vector3<f64>,
    pub positions: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub elevations: Option<Vec<f64>>,
    pub face_index: Vec<u32>,
    pub labels: Option<Vec<i32>>,
}

/// `true` for labels that take part in class balancing and evaluation:
/// neither missing (`-1`) nor the reserved unclassified id `0`.
pub fn is_evaluated_label(label: i32) -> bool {
    label > 0
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        let check = |channel: &'static str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::ChannelLength {
                    channel,
                    len,
                    expected: n,
                })
            }
        };
        check("face_index", self.face_index.len())?;
        if let Some(c) = &self.colors {
            check("colors", c.len())?;
        }
        if let Some(c) = &self.normals {
            check("normals", c.len())?;
        }
        if let Some(c) = &self.elevations {
            check("elevations", c.len())?;
        }
        if let Some(c) = &self.labels {
            check("labels", c.len())?;
        }
        Ok(())
    }

    /// Copies the points at `indices`, in the given order, with all channels.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
            idx.iter().map(|&i| v[i]).collect()
        }
        PointCloud {
            origin: self.origin,
            positions: pick(&self.positions, indices),
            colors: self.colors.as_deref().map(|c| pick(c, indices)),
            normals: self.normals.as_deref().map(|c| pick(c, indices)),
            elevations: self.elevations.as_deref().map(|c| pick(c, indices)),
            face_index: pick(&self.face_index, indices),
            labels: self.labels.as_deref().map(|c| pick(c, indices)),
        }
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels.as_ref().map_or(NO_LABEL, |l| l[i])
    }

    /// Axis-aligned bounds of the positions, `None` when empty.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.positions.first()?;
        Some(
            self.positions
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_keeps_channels_aligned() {
        let cloud = PointCloud {
            positions: vec![Vector3::zeros(), Vector3::x(), Vector3::y()],
            face_index: vec![0, 1, 2],
            labels: Some(vec![3, -1, 5]),
            ..Default::default()
        };
        let sub = cloud.select(&[2, 0]);
        assert_eq!(sub.face_index, vec![2, 0]);
        assert_eq!(sub.labels, Some(vec![5, 3]));
        assert!(sub.colors.is_none());
    }

    #[test]
    fn validate_reports_channel() {
        let cloud = PointCloud {
            positions: vec![Vector3::zeros(); 2],
            face_index: vec![0, 0],
            elevations: Some(vec![1.0]),
            ..Default::default()
        };
        match cloud.validate() {
            Err(Error::ChannelLength {
                channel,
                len,
                expected,
            }) => {
                assert_eq!((channel, len, expected), ("elevations", 1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
