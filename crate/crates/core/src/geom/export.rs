use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    Obj,
    PlyBinary,
}

impl MeshFormat {
    /// Format implied by a file extension (`obj` or `ply`).
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::PlyBinary),
            _ => None,
        }
    }
}

pub fn export_mesh(m: &TriangleMesh, format: MeshFormat) -> Result<Vec<u8>> {
    if m.is_empty() {
        return Err(Error::Empty("cannot export an empty mesh".into()));
    }
    m.validate()?;
    Ok(match format {
        MeshFormat::Obj => obj(m).into_bytes(),
        MeshFormat::PlyBinary => ply(m),
    })
}

/// `%.9g`: nine significant digits, trailing zeros removed.
fn g9(x: f32) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    let strip = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..9).contains(&e) {
        strip(format!("{:.*}", (8 - e) as usize, x))
    } else {
        format!("{}e{}{:02}", strip(mant.to_string()), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn obj(m: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &m.vertices {
        let _ = writeln!(s, "v {} {} {}", g9(v[0]), g9(v[1]), g9(v[2]));
    }
    if let Some(ns) = &m.normals {
        for n in ns {
            let _ = writeln!(s, "vn {} {} {}", g9(n[0]), g9(n[1]), g9(n[2]));
        }
    }
    for t in &m.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        if m.normals.is_some() {
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

fn ply(m: &TriangleMesh) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(header, "element vertex {}", m.vertices.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if m.normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    let _ = writeln!(header, "element face {}", m.triangles.len());
    header.push_str("property list uchar uint vertex_indices\nend_header\n");
    let stride = if m.normals.is_some() { 24 } else { 12 };
    let mut out = Vec::with_capacity(header.len() + m.vertices.len() * stride + m.triangles.len() * 13);
    out.extend_from_slice(header.as_bytes());
    for (i, v) in m.vertices.iter().enumerate() {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(ns) = &m.normals {
            for c in ns[i] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    for t in &m.triangles {
        out.push(3);
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

/// Reads the binary PLY layout written by [`export_mesh`].
pub fn read_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let bad = |msg: &str| Error::Codec(format!("PLY: {msg}"));
    const END: &[u8] = b"end_header\n";
    let end = bytes.windows(END.len()).position(|w| w == END).ok_or_else(|| bad("missing end_header"))? + END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") || lines.next() != Some("format binary_little_endian 1.0") {
        return Err(bad("expected binary little-endian 1.0"));
    }
    let (mut nv, mut nf) = (None, None);
    let mut props = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["element", "vertex", n] => nv = n.parse::<usize>().ok(),
            ["element", "face", n] => nf = n.parse::<usize>().ok(),
            ["property", "float", name] if nf.is_none() => props.push(*name),
            ["property", "list", "uchar", "uint", "vertex_indices"] => {}
            ["end_header"] => {}
            _ => return Err(bad(&format!("unsupported header line {line:?}"))),
        }
    }
    let (nv, nf) = (nv.ok_or_else(|| bad("no vertex count"))?, nf.ok_or_else(|| bad("no face count"))?);
    let with_normals = match props.as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "nx", "ny", "nz"] => true,
        _ => return Err(bad("unsupported vertex properties")),
    };
    let stride = if with_normals { 24 } else { 12 };
    let body = &bytes[end..];
    if body.len() != nv * stride + nf * 13 {
        return Err(bad("body length does not match the header"));
    }
    let f32_at = |o: usize| f32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes"));
    let mut vertices = Vec::with_capacity(nv);
    let mut normals = with_normals.then(|| Vec::with_capacity(nv));
    for i in 0..nv {
        let o = i * stride;
        vertices.push([f32_at(o), f32_at(o + 4), f32_at(o + 8)]);
        if let Some(ns) = normals.as_mut() {
            ns.push([f32_at(o + 12), f32_at(o + 16), f32_at(o + 20)]);
        }
    }
    let mut triangles = Vec::with_capacity(nf);
    let base = nv * stride;
    for i in 0..nf {
        let o = base + i * 13;
        if body[o] != 3 {
            return Err(bad("only triangles are supported"));
        }
        let u = |k: usize| u32::from_le_bytes(body[o + 1 + 4 * k..o + 5 + 4 * k].try_into().expect("4 bytes"));
        triangles.push([u(0), u(1), u(2)]);
    }
    TriangleMesh::new(vertices, normals, triangles)
}
