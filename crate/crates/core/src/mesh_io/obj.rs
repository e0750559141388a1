//! Wavefront OBJ + MTL loading. Textures come from `map_Kd`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};

use super::mesh::{Face, Texture, TexturedMesh};
use super::{load_texture, MeshOptions};
use crate::error::{Error, Result};

pub fn load(path: &Path, opts: &MeshOptions) -> Result<TexturedMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));

    let mut positions: Vec<Vector3<f64>> = Vec::new();
    let mut texcoords: Vec<Vector2<f64>> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    // material name -> texture image path
    let mut material_maps: HashMap<String, Option<PathBuf>> = HashMap::new();
    let mut texture_paths: Vec<PathBuf> = Vec::new();
    let mut current_texture: Option<u32> = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let bad = |what: &str| Error::format(path, format!("line {}: {what}", line_no + 1));
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for v in &mut c {
                    *v = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad vertex"))?;
                }
                positions.push(Vector3::from(c));
            }
            Some("vt") => {
                let u = tok.next().and_then(|t| t.parse().ok());
                let v = tok.next().and_then(|t| t.parse().ok());
                match (u, v) {
                    (Some(u), Some(v)) => texcoords.push(Vector2::new(u, v)),
                    _ => return Err(bad("bad texture coordinate")),
                }
            }
            Some("mtllib") => {
                let name = line["mtllib".len()..].trim();
                let mtl_path = dir.join(name);
                for (mat, map) in parse_mtl(&mtl_path)? {
                    material_maps.insert(mat, map);
                }
            }
            Some("usemtl") => {
                let name = line["usemtl".len()..].trim();
                current_texture = match material_maps.get(name) {
                    Some(Some(tex)) => {
                        let id = match texture_paths.iter().position(|p| p == tex) {
                            Some(i) => i,
                            None => {
                                texture_paths.push(tex.clone());
                                texture_paths.len() - 1
                            }
                        };
                        Some(id as u32)
                    }
                    _ => None,
                };
            }
            Some("f") => {
                let face_id = faces.len();
                let corners: Vec<&str> = tok.collect();
                if corners.len() != 3 {
                    return Err(Error::NonTriangularFace {
                        face: face_id,
                        len: corners.len(),
                    });
                }
                let mut vi = [0u32; 3];
                let mut ti: [Option<usize>; 3] = [None; 3];
                for (k, corner) in corners.iter().enumerate() {
                    let mut parts = corner.split('/');
                    let v: i64 = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad face corner"))?;
                    vi[k] = resolve(v, positions.len()).ok_or(Error::FaceIndexOutOfRange {
                        face: face_id,
                        index: v,
                        vertex_count: positions.len(),
                    })? as u32;
                    if let Some(t) = parts.next().filter(|t| !t.is_empty()) {
                        let t: i64 = t.parse().map_err(|_| bad("bad texcoord index"))?;
                        ti[k] = Some(resolve(t, texcoords.len()).ok_or_else(|| {
                            bad(&format!("face {face_id}: texcoord index {t} out of range"))
                        })?);
                    }
                }
                let mut face = Face::new(vi);
                if let ([Some(a), Some(b), Some(c)], Some(tex)) = (ti, current_texture) {
                    face = face.with_uv([texcoords[a], texcoords[b], texcoords[c]], tex);
                }
                faces.push(face);
            }
            _ => {}
        }
    }

    let textures = texture_paths
        .iter()
        .map(|p| load_texture(p))
        .collect::<Result<Vec<Texture>>>()?;
    TexturedMesh::from_absolute(positions, faces, textures, opts.class_count)
}

/// OBJ indices are 1-based; negative values count back from the end.
fn resolve(index: i64, len: usize) -> Option<usize> {
    let i = if index > 0 {
        index - 1
    } else if index < 0 {
        len as i64 + index
    } else {
        return None;
    };
    (0..len as i64).contains(&i).then_some(i as usize)
}

fn parse_mtl(path: &Path) -> Result<Vec<(String, Option<PathBuf>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out: Vec<(String, Option<PathBuf>)> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(rest) = line.strip_prefix("newmtl") {
            out.push((rest.trim().to_string(), None));
        } else if let Some(rest) = line.strip_prefix("map_Kd") {
            // options such as `-s 1 1 1` may precede the file name; take the last token
            if let (Some(last), Some(file)) = (out.last_mut(), rest.split_whitespace().last()) {
                last.1 = Some(dir.join(file));
            }
        }
    }
    Ok(out)
}
