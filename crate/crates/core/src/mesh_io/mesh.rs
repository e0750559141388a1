use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Default class count: unclassified plus six urban categories.
pub const DEFAULT_CLASS_COUNT: u32 = 7;

/// Class id reserved for unclassified faces.
pub const UNCLASSIFIED: u32 = 0;

/// 8-bit RGB image, rows stored top to bottom.
///
/// Texture coordinates use the usual convention where `v = 0` is the bottom
/// row of the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Texture {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

/// How a color is read out of a texture at a continuous UV position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ColorLookup {
    #[default]
    Nearest,
    Bilinear,
}

impl Texture {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter {
                name: "texture",
                detail: "zero-sized image".into(),
            });
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::ChannelLength {
                channel: "pixels",
                len: pixels.len(),
                expected: width as usize * height as usize,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self::new(width, height, vec![color; width as usize * height as usize])
            .expect("consistent dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// Pixel at column `x`, row `y` counted from the top.
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Texel containing `uv`, as (column, row from the bottom), clamped to the image.
    pub fn texel_at(&self, uv: Vector2<f64>) -> (u32, u32) {
        let clamp = |t: f64, n: u32| -> u32 {
            let i = (t * n as f64).floor();
            if i.is_nan() || i < 0.0 {
                0
            } else {
                (i as u64).min(n as u64 - 1) as u32
            }
        };
        (clamp(uv.x, self.width), clamp(uv.y, self.height))
    }

    /// Color of the texel containing `uv`.
    pub fn nearest(&self, uv: Vector2<f64>) -> [u8; 3] {
        let (col, row_up) = self.texel_at(uv);
        self.pixel(col, self.height - 1 - row_up)
    }

    pub fn bilinear(&self, uv: Vector2<f64>) -> [u8; 3] {
        // continuous texel coordinates with texel centers at integers
        let x = uv.x * self.width as f64 - 0.5;
        let y = uv.y * self.height as f64 - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let clamp = |i: f64, n: u32| (i.max(0.0) as u64).min(n as u64 - 1) as u32;
        let sample = |xi: f64, yi: f64| {
            let row_up = clamp(yi, self.height);
            self.pixel(clamp(xi, self.width), self.height - 1 - row_up)
        };
        let c00 = sample(x0, y0);
        let c10 = sample(x0 + 1.0, y0);
        let c01 = sample(x0, y0 + 1.0);
        let c11 = sample(x0 + 1.0, y0 + 1.0);
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = c00[k] as f64 * (1.0 - fx) + c10[k] as f64 * fx;
            let bottom = c01[k] as f64 * (1.0 - fx) + c11[k] as f64 * fx;
            out[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        out
    }

    pub fn lookup(&self, uv: Vector2<f64>, mode: ColorLookup) -> [u8; 3] {
        match mode {
            ColorLookup::Nearest => self.nearest(uv),
            ColorLookup::Bilinear => self.bilinear(uv),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [u32; 3],
    pub uv: Option<[Vector2<f64>; 3]>,
    pub texture: Option<u32>,
    pub class: Option<u32>,
}

impl Face {
    pub fn new(vertices: [u32; 3]) -> Self {
        Self {
            vertices,
            uv: None,
            texture: None,
            class: None,
        }
    }

    pub fn with_uv(mut self, uv: [Vector2<f64>; 3], texture: u32) -> Self {
        self.uv = Some(uv);
        self.texture = Some(texture);
        self
    }

    pub fn with_class(mut self, class: u32) -> Self {
        self.class = Some(class);
        self
    }
}

/// Triangle mesh with per-corner UVs, texture images and optional face classes.
///
/// Vertex positions are stored relative to `origin`, which is the per-axis
/// minimum of the input coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<Face>,
    pub textures: Vec<Texture>,
    pub class_count: u32,
    pub origin: Vector3<f64>,
}

impl TexturedMesh {
    /// Builds a mesh from absolute vertex coordinates, moving them to an
    /// origin at their per-axis minimum, and checks every invariant.
    pub fn from_absolute(
        mut vertices: Vec<Vector3<f64>>,
        faces: Vec<Face>,
        textures: Vec<Texture>,
        class_count: u32,
    ) -> Result<Self> {
        let mut origin = Vector3::zeros();
        if let Some(first) = vertices.first() {
            origin = *first;
            for v in &vertices {
                origin = origin.inf(v);
            }
        }
        for v in &mut vertices {
            *v -= origin;
        }
        let mesh = Self {
            vertices,
            faces,
            textures,
            class_count,
            origin,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        let n = self.vertices.len();
        for (fi, face) in self.faces.iter().enumerate() {
            for &idx in &face.vertices {
                if idx as usize >= n {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: idx as i64,
                        vertex_count: n,
                    });
                }
            }
            let [a, b, c] = face.vertices;
            if a == b || b == c || a == c {
                return Err(Error::RepeatedFaceVertex { face: fi });
            }
            if let Some(t) = face.texture {
                if face.uv.is_none() || t as usize >= self.textures.len() {
                    return Err(Error::UnknownTexture {
                        face: fi,
                        texture: t as i64,
                    });
                }
            }
            if let Some(c) = face.class {
                if c >= self.class_count {
                    return Err(Error::ClassOutOfRange {
                        face: fi,
                        class: c as i64,
                        class_count: self.class_count,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn corners(&self, face: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[face].vertices;
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn centroid(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(face);
        (a + b + c) / 3.0
    }

    /// Area of the bounding box of the mesh projected on the horizontal plane.
    pub fn footprint_area(&self) -> f64 {
        let Some(first) = self.vertices.first() else {
            return 0.0;
        };
        let (mut lo, mut hi) = (*first, *first);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi.x - lo.x) * (hi.y - lo.y)
    }

    pub fn texture_of(&self, face: usize) -> Option<&Texture> {
        self.faces[face].texture.map(|t| &self.textures[t as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker() -> Texture {
        // 2x2: top row red, green; bottom row blue, white
        Texture::new(
            2,
            2,
            vec![[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]],
        )
        .unwrap()
    }

    #[test]
    fn nearest_uses_bottom_up_v() {
        let t = checker();
        assert_eq!(t.nearest(Vector2::new(0.25, 0.25)), [0, 0, 255]);
        assert_eq!(t.nearest(Vector2::new(0.75, 0.75)), [0, 255, 0]);
        assert_eq!(t.nearest(Vector2::new(1.0, 1.0)), [0, 255, 0]);
        assert_eq!(t.nearest(Vector2::new(-0.5, 0.0)), [0, 0, 255]);
    }

    #[test]
    fn bilinear_at_texel_center_is_nearest() {
        let t = checker();
        for uv in [Vector2::new(0.25, 0.25), Vector2::new(0.75, 0.75)] {
            assert_eq!(t.bilinear(uv), t.nearest(uv));
        }
        assert_eq!(t.bilinear(Vector2::new(0.5, 0.75)), [128, 128, 0]);
    }

    #[test]
    fn origin_is_per_axis_minimum() {
        let mesh = TexturedMesh::from_absolute(
            vec![
                Vector3::new(10.0, 5.0, 3.0),
                Vector3::new(11.0, 4.0, 3.0),
                Vector3::new(10.0, 6.0, 2.0),
            ],
            vec![Face::new([0, 1, 2])],
            vec![],
            DEFAULT_CLASS_COUNT,
        )
        .unwrap();
        assert_eq!(mesh.origin, Vector3::new(10.0, 4.0, 2.0));
        assert_eq!(mesh.vertices[1], Vector3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn rejects_repeated_vertex_and_bad_class() {
        let verts = vec![Vector3::zeros(), Vector3::x(), Vector3::y()];
        let err = TexturedMesh::from_absolute(verts.clone(), vec![Face::new([0, 0, 2])], vec![], 7)
            .unwrap_err();
        assert!(matches!(err, Error::RepeatedFaceVertex { face: 0 }));
        let err =
            TexturedMesh::from_absolute(verts, vec![Face::new([0, 1, 2]).with_class(7)], vec![], 7)
                .unwrap_err();
        assert!(matches!(err, Error::ClassOutOfRange { class: 7, .. }));
    }
}
