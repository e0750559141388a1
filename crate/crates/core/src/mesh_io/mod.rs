//! Mesh loading and the on-disk formats for point clouds, logit tables and
//! subset lists. Every multi-byte value is little-endian.

mod cloud;
mod mesh;
mod obj;
pub mod ply;
mod tables;

use std::io::Write;
use std::path::Path;

use nalgebra::{Vector2, Vector3};

pub use cloud::{is_evaluated_label, PointCloud, NO_LABEL};
pub use mesh::{ColorLookup, Face, Texture, TexturedMesh, DEFAULT_CLASS_COUNT, UNCLASSIFIED};
pub use tables::{
    decode_logits, decode_subsets, encode_logits, encode_subsets, load_logits, load_subsets,
    write_logits, write_subsets, Alignment, LogitTable, Subset, SubsetList,
};

use crate::error::{Error, Result};
use ply::{ElementDef, PropertyDef, PropertyKind, ScalarType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshOptions {
    pub label_property: String,
    pub class_count: u32,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            label_property: "label".into(),
            class_count: DEFAULT_CLASS_COUNT,
        }
    }
}

/// Loads an OBJ (with MTL and texture images) or PLY mesh, chosen by extension.
pub fn load_mesh(path: &Path, opts: &MeshOptions) -> Result<TexturedMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => obj::load(path, opts),
        Some("ply") => load_ply_mesh(path, opts),
        _ => Err(Error::format(path, "expected a .obj or .ply mesh")),
    }
}

/// Reads an 8-bit RGB image. Other pixel formats are rejected.
pub fn load_texture(path: &Path) -> Result<Texture> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    if img.color() != image::ColorType::Rgb8 {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: format!(
                "pixel format {:?}, only 8-bit RGB is supported",
                img.color()
            ),
        });
    }
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Texture::new(w, h, pixels)
}

fn scalar_column<'a>(path: &Path, elem: &'a ply::Element, name: &str) -> Result<Option<&'a [f64]>> {
    match elem.column(name) {
        None => Ok(None),
        Some(c) => c.scalars().map(Some).ok_or_else(|| {
            Error::format(
                path,
                format!("{} property `{name}` must be a scalar", elem.name),
            )
        }),
    }
}

fn required_column<'a>(path: &Path, elem: &'a ply::Element, name: &str) -> Result<&'a [f64]> {
    scalar_column(path, elem, name)?
        .ok_or_else(|| Error::format(path, format!("{} has no `{name}` property", elem.name)))
}

pub fn load_ply_mesh(path: &Path, opts: &MeshOptions) -> Result<TexturedMesh> {
    let data = ply::read(path)?;
    let vertex = data
        .element("vertex")
        .ok_or_else(|| Error::format(path, "no vertex element"))?;
    let xs = required_column(path, vertex, "x")?;
    let ys = required_column(path, vertex, "y")?;
    let zs = required_column(path, vertex, "z")?;
    let positions: Vec<Vector3<f64>> = (0..vertex.count)
        .map(|i| Vector3::new(xs[i], ys[i], zs[i]))
        .collect();

    let dir = path.parent().unwrap_or(Path::new("."));
    let texture_files: Vec<&str> = data
        .header
        .comments
        .iter()
        .filter_map(|c| c.strip_prefix("TextureFile").map(str::trim))
        .collect();

    let mut faces = Vec::new();
    if let Some(face_elem) = data.element("face") {
        let indices = face_elem
            .column("vertex_indices")
            .or_else(|| face_elem.column("vertex_index"))
            .ok_or_else(|| Error::format(path, "face element has no vertex_indices"))?;
        let texcoord = face_elem.column("texcoord");
        let texnumber = scalar_column(path, face_elem, "texnumber")?;
        let labels = scalar_column(path, face_elem, &opts.label_property)?;
        faces.reserve(face_elem.count);
        for fi in 0..face_elem.count {
            let idx = indices
                .list(fi)
                .ok_or_else(|| Error::format(path, "vertex_indices must be a list"))?;
            if idx.len() != 3 {
                return Err(Error::NonTriangularFace {
                    face: fi,
                    len: idx.len(),
                });
            }
            let mut vi = [0u32; 3];
            for (k, &v) in idx.iter().enumerate() {
                if v < 0.0 || v as usize >= positions.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: v as i64,
                        vertex_count: positions.len(),
                    });
                }
                vi[k] = v as u32;
            }
            let mut face = Face::new(vi);
            let tc = match texcoord {
                Some(col) => col
                    .list(fi)
                    .ok_or_else(|| Error::format(path, "texcoord must be a list"))?,
                None => &[],
            };
            // an empty list marks an untextured face
            if !tc.is_empty() {
                if tc.len() != 6 {
                    return Err(Error::TexcoordArity {
                        face: fi,
                        len: tc.len(),
                    });
                }
                face.uv = Some([
                    Vector2::new(tc[0], tc[1]),
                    Vector2::new(tc[2], tc[3]),
                    Vector2::new(tc[4], tc[5]),
                ]);
                let tex = match texnumber {
                    Some(t) => t[fi],
                    None if !texture_files.is_empty() => 0.0,
                    None => -1.0,
                };
                if tex >= 0.0 {
                    if tex as usize >= texture_files.len() {
                        return Err(Error::UnknownTexture {
                            face: fi,
                            texture: tex as i64,
                        });
                    }
                    face.texture = Some(tex as u32);
                }
            }
            if let Some(l) = labels {
                let class = l[fi];
                if class >= 0.0 {
                    if class >= opts.class_count as f64 {
                        return Err(Error::ClassOutOfRange {
                            face: fi,
                            class: class as i64,
                            class_count: opts.class_count,
                        });
                    }
                    face.class = Some(class as u32);
                }
            }
            faces.push(face);
        }
    }

    let textures = texture_files
        .iter()
        .map(|f| load_texture(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    TexturedMesh::from_absolute(positions, faces, textures, opts.class_count)
}

fn origin_comment(origin: &Vector3<f64>) -> String {
    // `{:?}` prints the shortest representation that parses back exactly
    format!("origin {:?} {:?} {:?}", origin.x, origin.y, origin.z)
}

fn parse_origin(path: &Path, comments: &[String]) -> Result<Vector3<f64>> {
    for c in comments {
        if let Some(rest) = c.strip_prefix("origin") {
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(path, format!("bad origin comment `{c}`")))?;
            if v.len() != 3 {
                return Err(Error::format(path, format!("bad origin comment `{c}`")));
            }
            return Ok(Vector3::new(v[0], v[1], v[2]));
        }
    }
    Ok(Vector3::zeros())
}

fn cloud_properties(cloud: &PointCloud) -> Vec<PropertyDef> {
    use ScalarType::*;
    let mut props = vec![
        ply::scalar("x", F32),
        ply::scalar("y", F32),
        ply::scalar("z", F32),
    ];
    if cloud.colors.is_some() {
        props.extend(["red", "green", "blue"].map(|n| ply::scalar(n, U8)));
    }
    if cloud.normals.is_some() {
        props.extend(["nx", "ny", "nz"].map(|n| ply::scalar(n, F32)));
    }
    if cloud.elevations.is_some() {
        props.push(ply::scalar("elevation", F32));
    }
    props.push(ply::scalar("face_index", U32));
    if cloud.labels.is_some() {
        props.push(ply::scalar("label", I32));
    }
    props
}

/// Serializes a point cloud as binary little-endian PLY.
///
/// Positions, normals and elevations are written as 32-bit floats; the
/// origin goes into a `comment origin X Y Z` header line.
pub fn encode_point_cloud(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let elements = [ElementDef {
        name: "vertex".into(),
        count: cloud.len(),
        properties: cloud_properties(cloud),
    }];
    let header = ply::binary_header(&[origin_comment(&cloud.origin)], &elements);
    let stride: usize = 12
        + cloud.colors.as_ref().map_or(0, |_| 3)
        + cloud.normals.as_ref().map_or(0, |_| 12)
        + cloud.elevations.as_ref().map_or(0, |_| 4)
        + 4
        + cloud.labels.as_ref().map_or(0, |_| 4);
    let mut buf = Vec::with_capacity(header.len() + stride * cloud.len());
    buf.extend_from_slice(header.as_bytes());
    for i in 0..cloud.len() {
        for c in cloud.positions[i].iter() {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(colors) = &cloud.colors {
            buf.extend_from_slice(&colors[i]);
        }
        if let Some(normals) = &cloud.normals {
            for c in normals[i].iter() {
                buf.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        if let Some(e) = &cloud.elevations {
            buf.extend_from_slice(&(e[i] as f32).to_le_bytes());
        }
        buf.extend_from_slice(&cloud.face_index[i].to_le_bytes());
        if let Some(l) = &cloud.labels {
            buf.extend_from_slice(&l[i].to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let bytes = encode_point_cloud(cloud)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_point_cloud(path: &Path) -> Result<PointCloud> {
    let data = ply::read(path)?;
    let vertex = data
        .element("vertex")
        .ok_or_else(|| Error::format(path, "no vertex element"))?;
    let n = vertex.count;
    let col = |name: &str| scalar_column(path, vertex, name);
    let triple = |names: [&str; 3]| -> Result<Option<[&[f64]; 3]>> {
        match (col(names[0])?, col(names[1])?, col(names[2])?) {
            (Some(a), Some(b), Some(c)) => Ok(Some([a, b, c])),
            (None, None, None) => Ok(None),
            _ => Err(Error::format(
                path,
                format!(
                    "incomplete {}/{}/{} properties",
                    names[0], names[1], names[2]
                ),
            )),
        }
    };
    let vec3 = |[a, b, c]: [&[f64]; 3]| -> Vec<Vector3<f64>> {
        (0..n).map(|i| Vector3::new(a[i], b[i], c[i])).collect()
    };

    let positions = vec3(triple(["x", "y", "z"])?.ok_or_else(|| Error::format(path, "no x/y/z"))?);
    let colors = triple(["red", "green", "blue"])?.map(|[r, g, b]| {
        (0..n)
            .map(|i| [r[i] as u8, g[i] as u8, b[i] as u8])
            .collect()
    });
    let normals = triple(["nx", "ny", "nz"])?.map(vec3);
    let elevations = col("elevation")?.map(<[f64]>::to_vec);
    let face_index = required_column(path, vertex, "face_index")?
        .iter()
        .map(|&f| f as u32)
        .collect();
    let labels = col("label")?.map(|l| l.iter().map(|&v| v as i32).collect());
    let cloud = PointCloud {
        origin: parse_origin(path, &data.header.comments)?,
        positions,
        colors,
        normals,
        elevations,
        face_index,
        labels,
    };
    Ok(cloud)
}

/// Writes the mesh geometry with one predicted class per face as a `label`
/// face property.
pub fn write_face_labels(mesh: &TexturedMesh, labels: &[u32], path: &Path) -> Result<()> {
    if labels.len() != mesh.faces.len() {
        return Err(Error::ChannelLength {
            channel: "face labels",
            len: labels.len(),
            expected: mesh.faces.len(),
        });
    }
    use ScalarType::*;
    let elements = [
        ElementDef {
            name: "vertex".into(),
            count: mesh.vertices.len(),
            properties: vec![
                ply::scalar("x", F32),
                ply::scalar("y", F32),
                ply::scalar("z", F32),
            ],
        },
        ElementDef {
            name: "face".into(),
            count: mesh.faces.len(),
            properties: vec![
                PropertyDef {
                    name: "vertex_indices".into(),
                    kind: PropertyKind::List {
                        count: U8,
                        item: I32,
                    },
                },
                ply::scalar("label", I32),
            ],
        },
    ];
    let mut buf = ply::binary_header(&[origin_comment(&mesh.origin)], &elements).into_bytes();
    for v in &mesh.vertices {
        for c in v.iter() {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for (face, &label) in mesh.faces.iter().zip(labels) {
        buf.push(3);
        for &v in &face.vertices {
            buf.extend_from_slice(&(v as i32).to_le_bytes());
        }
        buf.extend_from_slice(&(label as i32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads back the `label` face property written by [`write_face_labels`].
pub fn load_face_labels(path: &Path) -> Result<Vec<i32>> {
    let data = ply::read(path)?;
    let face = data
        .element("face")
        .ok_or_else(|| Error::format(path, "no face element"))?;
    Ok(required_column(path, face, "label")?
        .iter()
        .map(|&v| v as i32)
        .collect())
}
