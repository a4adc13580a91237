use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Triangle mesh in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::DegenerateDomain("mesh has no faces".into()));
        }
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::invalid(format!("face {i} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!("face {i} repeats a vertex")));
            }
        }
        if !(self.total_area() > 0.0) {
            return Err(Error::DegenerateDomain("mesh has zero surface area".into()));
        }
        Ok(())
    }

    pub fn corners(&self, face: usize) -> [Vector3<f64>; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Unnormalized face normal; its norm is twice the face area.
    fn cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.cross(face).norm()
    }

    /// Unit normal from the counter-clockwise winding, or `None` for a sliver.
    pub fn face_normal(&self, face: usize) -> Option<Vector3<f64>> {
        let n = self.cross(face);
        let len = n.norm();
        (len > 0.0).then(|| n / len)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a mesh from the ASCII OBJ subset (`v` and `f` records).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// Parses OBJ text. Polygons are fan-triangulated; other record types are ignored.
pub fn parse_obj(text: &str, origin: impl Into<PathBuf>) -> Result<TriangleMesh> {
    let origin = origin.into();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(&origin, line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err(&origin, line_no, "vertex needs three finite coordinates"));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| parse_err(&origin, line_no, format!("bad face index {t:?}")))?;
                    // OBJ indices are 1-based; negative values count back from the end.
                    let resolved = match i {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => vertices.len().checked_sub(i.unsigned_abs() as usize),
                    };
                    match resolved {
                        Some(v) if v < vertices.len() => idx.push(v),
                        _ => {
                            return Err(parse_err(
                                &origin,
                                line_no,
                                format!("face index {i} out of range (1..={})", vertices.len()),
                            ))
                        }
                    }
                }
                if idx.len() < 3 {
                    return Err(parse_err(&origin, line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    let tri = [idx[0], idx[k], idx[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(parse_err(&origin, line_no, "face repeats a vertex"));
                    }
                    faces.push(tri);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(parse_err(&origin, text.lines().count(), "mesh has no faces"));
    }
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::DegenerateDomain(m) => Error::DegenerateDomain(format!("{}: {m}", origin.display())),
        other => other,
    })
}
