//! Loader for user-supplied antenna meshes.
//!
//! Format (`lismesh v1`), whitespace separated, `#` starts a comment:
//!
//! ```text
//! lismesh v1 2        # header: version and intrinsic dimension (1 or 2)
//! v 0 0 0             # vertex x y z (meters)
//! v 1 0 0
//! v 0 1 0
//! f 1 2 3             # triangle, 1-based vertex indices (dim 2)
//! e 1 2               # segment, 1-based vertex indices (dim 1)
//! ```
//!
//! Each element becomes one quadrature node at its centroid, weighted by
//! its length or area.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point3, SampledManifold};

/// Relative measure (against the squared/plain bounding-box extent) below which an element is degenerate.
const DEGENERATE_TOL: f64 = 1e-14;

pub fn load_custom_mesh(path: impl AsRef<Path>) -> Result<SampledManifold> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::MeshIo {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".to_string());
    parse_mesh(&text, &label)
}

pub fn parse_mesh(text: &str, label: &str) -> Result<SampledManifold> {
    let mut dim = None;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut elements: Vec<(usize, Vec<usize>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        let rest: Vec<&str> = tokens.collect();
        let parse_err = |message: String| Error::MeshParse { line, message };

        if dim.is_none() {
            if head != "lismesh" || rest.len() != 2 || rest[0] != "v1" {
                return Err(parse_err("expected header 'lismesh v1 <dim>'".into()));
            }
            let d: usize = rest[1]
                .parse()
                .map_err(|_| parse_err(format!("bad dimension '{}'", rest[1])))?;
            if !(d == 1 || d == 2) {
                return Err(parse_err(format!("dimension must be 1 or 2, got {d}")));
            }
            dim = Some(d);
            continue;
        }
        let d = dim.expect("header parsed");
        match head {
            "v" => {
                if rest.len() != 3 {
                    return Err(parse_err(format!(
                        "vertex needs 3 coordinates, got {}",
                        rest.len()
                    )));
                }
                let mut p = [0.0f64; 3];
                for (c, tok) in p.iter_mut().zip(&rest) {
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(format!("bad coordinate '{tok}'")))?;
                    if !c.is_finite() {
                        return Err(parse_err(format!("non-finite coordinate '{tok}'")));
                    }
                }
                vertices.push(p);
            }
            "f" | "e" => {
                let (want_head, arity) = if d == 2 { ("f", 3) } else { ("e", 2) };
                if head != want_head {
                    return Err(parse_err(format!(
                        "'{head}' element in a dimension-{d} mesh (expected '{want_head}')"
                    )));
                }
                if rest.len() != arity {
                    return Err(parse_err(format!(
                        "'{head}' needs {arity} indices, got {}",
                        rest.len()
                    )));
                }
                let idx = rest
                    .iter()
                    .map(|tok| match tok.parse::<usize>() {
                        Ok(i) if i >= 1 => Ok(i - 1),
                        _ => Err(parse_err(format!("bad vertex index '{tok}'"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                elements.push((line, idx));
            }
            other => return Err(parse_err(format!("unknown record '{other}'"))),
        }
    }

    let dim = dim.ok_or(Error::MeshParse {
        line: 0,
        message: "empty mesh file".into(),
    })?;
    if elements.is_empty() {
        return Err(Error::MeshParse {
            line: 0,
            message: "mesh has no elements".into(),
        });
    }

    let extent = bounding_extent(&vertices);
    let mut nodes = Vec::with_capacity(elements.len());
    let mut weights = Vec::with_capacity(elements.len());
    for (index, (line, idx)) in elements.iter().enumerate() {
        let pts = idx
            .iter()
            .map(|&i| {
                vertices.get(i).copied().ok_or(Error::MeshParse {
                    line: *line,
                    message: format!(
                        "vertex index {} out of range ({} vertices)",
                        i + 1,
                        vertices.len()
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (centroid, measure, scale) = if dim == 2 {
            (
                centroid(&pts),
                triangle_area(&pts[0], &pts[1], &pts[2]),
                extent * extent,
            )
        } else {
            (centroid(&pts), norm(&sub(&pts[1], &pts[0])), extent)
        };
        if !(measure > DEGENERATE_TOL * scale) {
            return Err(Error::DegenerateElement { index, measure });
        }
        nodes.push(centroid);
        weights.push(measure);
    }
    SampledManifold::new(nodes, weights, dim, label)
}

fn centroid(pts: &[Point3]) -> Point3 {
    let k = pts.len() as f64;
    let mut c = [0.0; 3];
    for p in pts {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.map(|x| x / k)
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * norm(&cross)
}

fn bounding_extent(vertices: &[Point3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let d = sub(&hi, &lo);
    let e = norm(&d);
    if e.is_finite() && e > 0.0 {
        e
    } else {
        1.0
    }
}
