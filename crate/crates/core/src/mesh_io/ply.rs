//! Minimal PLY reader and header writer.
//!
//! The reader handles `ascii`, `binary_little_endian` and `binary_big_endian`
//! bodies with arbitrary scalar and list properties. Every value is widened to
//! `f64`, which is exact for all PLY scalar types.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if little {
                    <$t>::from_le_bytes(arr)
                } else {
                    <$t>::from_be_bytes(arr)
                }) as f64
            }};
        }
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => num!(i16, 2),
            Self::U16 => num!(u16, 2),
            Self::I32 => num!(i32, 4),
            Self::U32 => num!(u32, 4),
            Self::F32 => num!(f32, 4),
            Self::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDef {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDef {
    pub name: String,
    pub count: usize,
    pub properties: Vec<PropertyDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub encoding: Encoding,
    pub comments: Vec<String>,
    pub elements: Vec<ElementDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    /// Row `i` spans `values[offsets[i]..offsets[i + 1]]`.
    List {
        offsets: Vec<usize>,
        values: Vec<f64>,
    },
}

impl Column {
    pub fn scalars(&self) -> Option<&[f64]> {
        match self {
            Column::Scalar(v) => Some(v),
            Column::List { .. } => None,
        }
    }

    pub fn list(&self, row: usize) -> Option<&[f64]> {
        match self {
            Column::List { offsets, values } => Some(&values[offsets[row]..offsets[row + 1]]),
            Column::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub columns: Vec<(String, Column)>,
}

impl Element {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub header: Header,
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

pub fn read(path: &Path) -> Result<PlyData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes).map_err(|detail| Error::format(path, detail))
}

pub fn parse(bytes: &[u8]) -> std::result::Result<PlyData, String> {
    let (header, body_start) = parse_header(bytes)?;
    let body = &bytes[body_start..];
    let elements = match header.encoding {
        Encoding::Ascii => parse_ascii(&header, body)?,
        Encoding::BinaryLittleEndian => parse_binary(&header, body, true)?,
        Encoding::BinaryBigEndian => parse_binary(&header, body, false)?,
    };
    Ok(PlyData { header, elements })
}

fn parse_header(bytes: &[u8]) -> std::result::Result<(Header, usize), String> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |i| *pos + i);
        let line = String::from_utf8_lossy(&bytes[*pos..end])
            .trim_end_matches('\r')
            .to_string();
        *pos = (end + 1).min(bytes.len());
        Some(line)
    };

    if next_line(&mut pos).as_deref().map(str::trim) != Some("ply") {
        return Err("missing `ply` magic line".into());
    }
    let mut encoding = None;
    let mut comments = Vec::new();
    let mut elements: Vec<ElementDef> = Vec::new();
    let mut line_no = 1;
    loop {
        line_no += 1;
        let line = next_line(&mut pos).ok_or("header is not terminated by `end_header`")?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                encoding = Some(match tok.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLittleEndian,
                    Some("binary_big_endian") => Encoding::BinaryBigEndian,
                    other => return Err(format!("line {line_no}: unknown format {other:?}")),
                });
            }
            Some("comment") | Some("obj_info") => {
                let rest = line.trim_start();
                let rest = rest.split_once(char::is_whitespace).map_or("", |(_, r)| r);
                comments.push(rest.trim().to_string());
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or(format!("line {line_no}: element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or(format!("line {line_no}: bad element count"))?;
                elements.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or(format!("line {line_no}: property before any element"))?;
                let ty = tok
                    .next()
                    .ok_or(format!("line {line_no}: empty property"))?;
                let kind = if ty == "list" {
                    let count = tok.next().and_then(ScalarType::parse);
                    let item = tok.next().and_then(ScalarType::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => PropertyKind::List { count, item },
                        _ => return Err(format!("line {line_no}: bad list property")),
                    }
                } else {
                    PropertyKind::Scalar(
                        ScalarType::parse(ty)
                            .ok_or(format!("line {line_no}: unknown type `{ty}`"))?,
                    )
                };
                let name = tok
                    .next()
                    .ok_or(format!("line {line_no}: property without name"))?;
                elem.properties.push(PropertyDef {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            None => {}
            Some(other) => return Err(format!("line {line_no}: unexpected keyword `{other}`")),
        }
    }
    let encoding = encoding.ok_or("header has no `format` line")?;
    Ok((
        Header {
            encoding,
            comments,
            elements,
        },
        pos,
    ))
}

fn empty_columns(def: &ElementDef) -> Vec<(String, Column)> {
    def.properties
        .iter()
        .map(|p| {
            let col = match p.kind {
                PropertyKind::Scalar(_) => Column::Scalar(Vec::with_capacity(def.count)),
                PropertyKind::List { .. } => Column::List {
                    offsets: {
                        let mut o = Vec::with_capacity(def.count + 1);
                        o.push(0);
                        o
                    },
                    values: Vec::new(),
                },
            };
            (p.name.clone(), col)
        })
        .collect()
}

fn parse_ascii(header: &Header, body: &[u8]) -> std::result::Result<Vec<Element>, String> {
    let text = std::str::from_utf8(body).map_err(|_| "ascii body is not valid UTF-8")?;
    let mut tokens = text.split_ascii_whitespace();
    let mut out = Vec::with_capacity(header.elements.len());
    for def in &header.elements {
        let mut columns = empty_columns(def);
        for row in 0..def.count {
            let mut next = || -> std::result::Result<f64, String> {
                let t = tokens
                    .next()
                    .ok_or_else(|| format!("{} {row}: unexpected end of data", def.name))?;
                t.parse::<f64>()
                    .map_err(|_| format!("{} {row}: bad number `{t}`", def.name))
            };
            for (_, col) in columns.iter_mut() {
                match col {
                    Column::Scalar(v) => v.push(next()?),
                    Column::List { offsets, values } => {
                        let n = next()?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(format!("{} {row}: bad list length {n}", def.name));
                        }
                        for _ in 0..n as usize {
                            values.push(next()?);
                        }
                        offsets.push(values.len());
                    }
                }
            }
        }
        out.push(Element {
            name: def.name.clone(),
            count: def.count,
            columns,
        });
    }
    Ok(out)
}

fn parse_binary(
    header: &Header,
    body: &[u8],
    little: bool,
) -> std::result::Result<Vec<Element>, String> {
    let mut pos = 0usize;
    let mut out = Vec::with_capacity(header.elements.len());
    for def in &header.elements {
        let mut columns = empty_columns(def);
        for row in 0..def.count {
            for (prop, (_, col)) in def.properties.iter().zip(columns.iter_mut()) {
                let mut take = |ty: ScalarType| -> std::result::Result<f64, String> {
                    let sz = ty.size();
                    if pos + sz > body.len() {
                        return Err(format!("{} {row}: truncated payload", def.name));
                    }
                    let v = ty.decode(&body[pos..pos + sz], little);
                    pos += sz;
                    Ok(v)
                };
                match (&prop.kind, col) {
                    (PropertyKind::Scalar(ty), Column::Scalar(v)) => v.push(take(*ty)?),
                    (PropertyKind::List { count, item }, Column::List { offsets, values }) => {
                        let n = take(*count)?;
                        if n < 0.0 {
                            return Err(format!("{} {row}: negative list length", def.name));
                        }
                        for _ in 0..n as usize {
                            values.push(take(*item)?);
                        }
                        offsets.push(values.len());
                    }
                    _ => unreachable!("columns are built from the same definitions"),
                }
            }
        }
        out.push(Element {
            name: def.name.clone(),
            count: def.count,
            columns,
        });
    }
    Ok(out)
}

/// Renders a `binary_little_endian` header.
pub fn binary_header(comments: &[String], elements: &[ElementDef]) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    for c in comments {
        h.push_str("comment ");
        h.push_str(c);
        h.push('\n');
    }
    for e in elements {
        h.push_str(&format!("element {} {}\n", e.name, e.count));
        for p in &e.properties {
            match p.kind {
                PropertyKind::Scalar(t) => {
                    h.push_str(&format!("property {} {}\n", t.name(), p.name))
                }
                PropertyKind::List { count, item } => h.push_str(&format!(
                    "property list {} {} {}\n",
                    count.name(),
                    item.name(),
                    p.name
                )),
            }
        }
    }
    h.push_str("end_header\n");
    h
}

pub fn scalar(name: &str, ty: ScalarType) -> PropertyDef {
    PropertyDef {
        name: name.to_string(),
        kind: PropertyKind::Scalar(ty),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII: &str = "ply\nformat ascii 1.0\ncomment TextureFile a.png\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\nelement face 1\n\
property list uchar int vertex_indices\nproperty int label\nend_header\n\
0 0 0\n1 0 0\n0 1 0\n3 0 1 2 4\n";

    #[test]
    fn parses_ascii() {
        let ply = parse(ASCII.as_bytes()).unwrap();
        assert_eq!(ply.header.comments, vec!["TextureFile a.png".to_string()]);
        let v = ply.element("vertex").unwrap();
        assert_eq!(v.column("x").unwrap().scalars().unwrap(), &[0.0, 1.0, 0.0]);
        let f = ply.element("face").unwrap();
        assert_eq!(
            f.column("vertex_indices").unwrap().list(0).unwrap(),
            &[0.0, 1.0, 2.0]
        );
        assert_eq!(f.column("label").unwrap().scalars().unwrap(), &[4.0]);
    }

    #[test]
    fn binary_truncation_is_reported() {
        let mut bytes = binary_header(
            &[],
            &[ElementDef {
                name: "vertex".into(),
                count: 2,
                properties: vec![scalar("x", ScalarType::F32)],
            }],
        )
        .into_bytes();
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        let err = parse(&bytes).unwrap_err();
        assert!(err.contains("vertex 1"), "{err}");
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        let ply = parse(&bytes).unwrap();
        assert_eq!(
            ply.elements[0].columns[0].1,
            Column::Scalar(vec![1.5, -2.0])
        );
    }

    #[test]
    fn big_endian_and_signed_types() {
        let mut bytes = b"ply\nformat binary_big_endian 1.0\nelement e 1\nproperty short a\nproperty char b\nend_header\n".to_vec();
        bytes.extend_from_slice(&(-300i16).to_be_bytes());
        bytes.push(0xff);
        let ply = parse(&bytes).unwrap();
        let e = &ply.elements[0];
        assert_eq!(e.column("a").unwrap().scalars().unwrap(), &[-300.0]);
        assert_eq!(e.column("b").unwrap().scalars().unwrap(), &[-1.0]);
    }

    #[test]
    fn rejects_missing_magic() {
        assert!(parse(b"plx\n").is_err());
    }
}
