//! Minimal Wavefront OBJ reader and writer: `v`, `vn` and `f` records.
//!
//! Polygons are fan-triangulated. Texture coordinates, groups and materials
//! are skipped. A vertex's normal is the normalized sum of all `vn` entries
//! faces pair it with; vertices never paired with a `vn` get a synthesized
//! area-weighted normal.

use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

/// Serializes positions, per-vertex normals and `v//vn` faces. Numbers use
/// the shortest representation that parses back to the same `f64`.
pub fn format_obj(mesh: &TriMesh) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for p in mesh.positions() {
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    for n in mesh.normals() {
        let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| i + 1);
        let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
    }
    out
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_obj(mesh)).map_err(|e| Error::io(path, e))
}

fn parse_floats<const N: usize>(fields: &[&str], name: &str, line: usize, path: &str) -> Result<[f64; N]> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    if fields.len() < N {
        return Err(err(format!("`{name}` record needs {N} numbers, found {}", fields.len())));
    }
    let mut out = [0.0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(format!("invalid number {f:?} in `{name}` record")))?;
    }
    Ok(out)
}

/// Resolves a 1-based (or negative, relative) OBJ index against `count` entries.
fn resolve(index: &str, count: usize, what: &str, line: usize, path: &str) -> Result<usize> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let i: i64 = index
        .parse()
        .map_err(|_| err(format!("invalid {what} index {index:?}")))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        return Err(err(format!("{what} index 0 is invalid")));
    };
    if resolved < 0 || resolved as usize >= count {
        return Err(err(format!("{what} index {i} out of range (have {count})")));
    }
    Ok(resolved as usize)
}

pub fn parse_obj(text: &str, path: &str) -> Result<TriMesh> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut file_normals: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // (vertex, normal) pairs as referenced by faces.
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(keyword) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match keyword {
            "v" => positions.push(Vec3::from(parse_floats::<3>(&rest, "v", line, path)?)),
            "vn" => file_normals.push(Vec3::from(parse_floats::<3>(&rest, "vn", line, path)?)),
            "f" => {
                if rest.len() < 3 {
                    return Err(Error::Parse {
                        path: path.to_string(),
                        line,
                        msg: format!("face needs at least 3 vertices, found {}", rest.len()),
                    });
                }
                let mut corners = Vec::with_capacity(rest.len());
                for corner in &rest {
                    let mut parts = corner.split('/');
                    let v = resolve(parts.next().unwrap_or(""), positions.len(), "vertex", line, path)?;
                    let _texcoord = parts.next();
                    if let Some(n) = parts.next().filter(|s| !s.is_empty()) {
                        let n = resolve(n, file_normals.len(), "normal", line, path)?;
                        pairs.push((v, n));
                    }
                    if parts.next().is_some() {
                        return Err(Error::Parse {
                            path: path.to_string(),
                            line,
                            msg: format!("malformed face corner {corner:?}"),
                        });
                    }
                    corners.push(v as u32);
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }

    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let normals = if pairs.is_empty() {
        None
    } else {
        let mut acc = vec![Vec3::zeros(); positions.len()];
        for (v, n) in pairs {
            let fnorm = file_normals[n];
            let len = fnorm.norm();
            if len > 0.0 {
                acc[v] += fnorm / len;
            }
        }
        Some(acc)
    };
    TriMesh::new(positions, normals, triangles)
}
