//! Per-point predictions to per-face labels, and segmentation metrics.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::FaceBasis;
use crate::mesh_io::{Alignment, LogitTable, PointCloud, TexturedMesh, UNCLASSIFIED};
use crate::spatial_index::UniformGrid3D;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceLogits {
    pub table: LogitTable,
    /// Faces without any sample, which took the row of the sample nearest
    /// to their centroid. Ascending.
    pub fallback_faces: Vec<u32>,
}

/// Sums the logit rows of the samples drawn on each face.
pub fn face_logits(
    cloud: &PointCloud,
    logits: &LogitTable,
    mesh: &TexturedMesh,
) -> Result<FaceLogits> {
    if logits.rows() != cloud.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows for {} points",
            logits.rows(),
            cloud.len()
        )));
    }
    if logits.alignment() != Alignment::Point {
        return Err(Error::ShapeMismatch("logits are not per point".into()));
    }
    cloud.validate()?;
    let faces = mesh.faces.len();
    if let Some(i) = cloud.face_index.iter().position(|&f| f as usize >= faces) {
        return Err(Error::ShapeMismatch(format!(
            "point {i} references face {}, mesh has {faces} faces",
            cloud.face_index[i]
        )));
    }
    if cloud.is_empty() && faces > 0 {
        return Err(Error::EmptyCloud);
    }

    let mut order: Vec<(u32, u32)> = cloud
        .face_index
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, i as u32))
        .collect();
    order.par_sort_unstable();
    let mut starts = vec![0usize; faces + 1];
    for &(f, _) in &order {
        starts[f as usize + 1] += 1;
    }
    for f in 0..faces {
        starts[f + 1] += starts[f];
    }

    let classes = logits.class_count();
    let fallback_faces: Vec<u32> = (0..faces as u32)
        .filter(|&f| starts[f as usize] == starts[f as usize + 1])
        .collect();
    let nearest: Vec<usize> = if fallback_faces.is_empty() {
        Vec::new()
    } else {
        let grid = UniformGrid3D::build(
            &cloud.positions,
            UniformGrid3D::knn_cell_size(&cloud.positions),
        )?;
        fallback_faces
            .par_iter()
            .map(|&f| grid.knn(&FaceBasis::new(mesh, f as usize).centroid(), 1)[0])
            .collect()
    };

    let mut values: Vec<f32> = (0..faces)
        .into_par_iter()
        .flat_map_iter(|f| {
            let mut sum = vec![0.0f64; classes];
            for &(_, p) in &order[starts[f]..starts[f + 1]] {
                for (s, &v) in sum.iter_mut().zip(logits.row(p as usize)) {
                    *s += v as f64;
                }
            }
            sum.into_iter().map(|s| s as f32)
        })
        .collect();
    for (&f, &p) in fallback_faces.iter().zip(&nearest) {
        let f = f as usize;
        values[f * classes..(f + 1) * classes].copy_from_slice(logits.row(p));
    }
    Ok(FaceLogits {
        table: LogitTable::new(classes, Alignment::Face, values)?,
        fallback_faces,
    })
}

/// Row-wise argmax; the lowest class id wins ties.
pub fn predict_faces(face_logits: &LogitTable) -> Vec<u32> {
    (0..face_logits.rows())
        .into_par_iter()
        .map(|f| {
            let row = face_logits.row(f);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best as u32
        })
        .collect()
}

/// Square count matrix, `count(i, j)` = faces of true class `i` predicted `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(class_count: usize) -> Self {
        Self {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    /// From row-major counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "row of {} entries in a {n}x{n} matrix",
                r.len()
            )));
        }
        Ok(Self {
            class_count: n,
            counts: rows.concat(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.class_count + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.class_count + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.class_count).map(|j| self.count(truth, j)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.class_count)
            .map(|i| self.count(i, predicted))
            .sum()
    }
}

/// Counts predictions against the mesh ground truth. Faces without a class
/// or marked unclassified are skipped.
pub fn confusion(pred: &[u32], mesh: &TexturedMesh) -> Result<ConfusionMatrix> {
    if pred.len() != mesh.faces.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} faces",
            pred.len(),
            mesh.faces.len()
        )));
    }
    let n = mesh.class_count as usize;
    let mut cm = ConfusionMatrix::zeros(n);
    for (f, (&p, face)) in pred.iter().zip(&mesh.faces).enumerate() {
        if p as usize >= n {
            return Err(Error::PredictionOutOfRange {
                face: f,
                class: p as usize,
                class_count: n,
            });
        }
        match face.class {
            Some(t) if t != UNCLASSIFIED => cm.add(t as usize, p as usize),
            _ => {}
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Per-class IoU; `None` for classes absent from the ground truth.
    pub iou: Vec<Option<f64>>,
    /// Per-class accuracy (recall); `None` for absent classes.
    pub acc: Vec<Option<f64>>,
    pub oa: f64,
    pub miou: f64,
    pub macc: f64,
    pub evaluated: u64,
}

fn mean_defined(v: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = v.iter().flatten().copied().collect();
    defined.iter().sum::<f64>() / defined.len() as f64
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = cm.class_count();
    let mut iou = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    let mut diagonal = 0;
    for i in 0..n {
        let tp = cm.count(i, i);
        let row = cm.row_sum(i);
        diagonal += tp;
        if row == 0 {
            iou.push(None);
            acc.push(None);
            continue;
        }
        let union = row + cm.col_sum(i) - tp;
        iou.push(Some(tp as f64 / union as f64));
        acc.push(Some(tp as f64 / row as f64));
    }
    Ok(Metrics {
        oa: diagonal as f64 / total as f64,
        miou: mean_defined(&iou),
        macc: mean_defined(&acc),
        iou,
        acc,
        evaluated: total,
    })
}

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

impl Metrics {
    /// `name=value` lines, values in six-decimal fixed point, `nan` when
    /// undefined.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "faces_evaluated={}", self.evaluated);
        let _ = writeln!(out, "oa={}", fixed(Some(self.oa)));
        let _ = writeln!(out, "miou={}", fixed(Some(self.miou)));
        let _ = writeln!(out, "macc={}", fixed(Some(self.macc)));
        for (c, v) in self.iou.iter().enumerate() {
            let _ = writeln!(out, "iou_{c}={}", fixed(*v));
        }
        for (c, v) in self.acc.iter().enumerate() {
            let _ = writeln!(out, "acc_{c}={}", fixed(*v));
        }
        out
    }

    /// Human-readable table with percentages.
    pub fn to_text(&self) -> String {
        let pct = |v: Option<f64>| {
            v.map_or_else(|| "     -".to_string(), |x| format!("{:6.2}", 100.0 * x))
        };
        let mut out = String::new();
        let _ = writeln!(out, "evaluated faces: {}", self.evaluated);
        let _ = writeln!(out, "class    IoU    Acc");
        for c in 0..self.iou.len() {
            if self.iou[c].is_none() && c == UNCLASSIFIED as usize {
                continue;
            }
            let _ = writeln!(out, "{c:>5} {} {}", pct(self.iou[c]), pct(self.acc[c]));
        }
        let _ = writeln!(out, "mIoU {}", pct(Some(self.miou)));
        let _ = writeln!(out, "OA   {}", pct(Some(self.oa)));
        let _ = writeln!(out, "mAcc {}", pct(Some(self.macc)));
        out
    }
}
