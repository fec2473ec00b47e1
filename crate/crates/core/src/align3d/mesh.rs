use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Triangle mesh with per-vertex RGB colors on the `[0, 255]` scale.
///
/// Coordinates are image-aligned: `x` runs along columns, `y` along rows and
/// `z` points toward the viewer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    colors: Vec<Vector3<f64>>,
}

impl Mesh {
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
        colors: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::Empty("mesh needs vertices and triangles".into()));
        }
        if colors.len() != vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} colors for {} vertices",
                colors.len(),
                vertices.len()
            )));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidParameter(format!(
                "triangle {t:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        let finite = vertices.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && colors.iter().all(|c| c.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidParameter("mesh contains non-finite values".into()));
        }
        Ok(Mesh {
            vertices,
            triangles,
            colors,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn colors(&self) -> &[Vector3<f64>] {
        &self.colors
    }

    /// Same topology and colors with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Mesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} replacement vertices for {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        Ok(Mesh {
            vertices,
            ..self.clone()
        })
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::parse_obj(&text, &path.display().to_string())
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }

    /// Parses the OBJ subset `v x y z [r g b]` and triangular `f i j k`.
    /// Texture/normal suffixes (`i/t/n`) and negative indices are accepted;
    /// comments, normals, texture coordinates, groups and materials are
    /// ignored. Vertices without colors are black.
    pub fn parse_obj(text: &str, origin: &str) -> Result<Mesh> {
        let mut vertices = Vec::new();
        let mut colors = Vec::new();
        let mut faces: Vec<([i64; 3], usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let loc = || format!("{origin}:{}", i + 1);
            let mut parts = line.split_whitespace();
            let Some(tag) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            match tag {
                "v" => {
                    if rest.len() != 3 && rest.len() != 6 {
                        return Err(Error::parse(loc(), "vertex needs 3 coordinates and optionally 3 colors"));
                    }
                    let vals = rest
                        .iter()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::parse(loc(), e.to_string()))?;
                    vertices.push(Point3::new(vals[0], vals[1], vals[2]));
                    colors.push(if vals.len() == 6 {
                        Vector3::new(vals[3], vals[4], vals[5])
                    } else {
                        Vector3::zeros()
                    });
                }
                "f" => {
                    if rest.len() != 3 {
                        return Err(Error::parse(
                            loc(),
                            format!("only triangles are supported, face has {} vertices", rest.len()),
                        ));
                    }
                    let mut idx = [0i64; 3];
                    for (slot, s) in idx.iter_mut().zip(&rest) {
                        let head = s.split('/').next().unwrap_or("");
                        *slot = head
                            .parse()
                            .map_err(|_| Error::parse(loc(), format!("bad face index {s:?}")))?;
                    }
                    faces.push((idx, i + 1));
                }
                "vn" | "vt" | "vp" | "o" | "g" | "s" | "usemtl" | "mtllib" | "l" => {}
                other => return Err(Error::parse(loc(), format!("unknown statement {other:?}"))),
            }
        }
        let n = vertices.len() as i64;
        let triangles = faces
            .into_iter()
            .map(|(idx, line)| {
                let mut t = [0usize; 3];
                for (slot, &k) in t.iter_mut().zip(&idx) {
                    let resolved = if k > 0 { k - 1 } else { n + k };
                    if k == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::parse(
                            format!("{origin}:{line}"),
                            format!("vertex index {k} out of range for {n} vertices"),
                        ));
                    }
                    *slot = resolved as usize;
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Mesh::new(vertices, triangles, colors)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for (v, c) in self.vertices.iter().zip(&self.colors) {
            writeln!(out, "v {} {} {} {} {} {}", v.x, v.y, v.z, c.x, c.y, c.z).expect("string write");
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("string write");
        }
        out
    }
}

/// Exactly 68 landmark points in image-aligned coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point3<f64>>,
}

impl LandmarkSet {
    pub const COUNT: usize = 68;

    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.len() != Self::COUNT {
            return Err(Error::InvalidParameter(format!(
                "landmark set needs {} points, got {}",
                Self::COUNT,
                points.len()
            )));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter("landmark set contains non-finite points".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// One `x y z` triple per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("{origin}:{}", i + 1), e.to_string()))?;
            if vals.len() != 3 {
                return Err(Error::parse(format!("{origin}:{}", i + 1), "expected `x y z`"));
            }
            points.push(Point3::new(vals[0], vals[1], vals[2]));
        }
        Self::new(points)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for p in &self.points {
            writeln!(out, "{} {} {}", p.x, p.y, p.z).expect("string write");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn minimal_obj() {
        let m = Mesh::parse_obj("# tri\nv 0 0 0\nv 1 0 0 255 0 0\nv 0 1 0\nf 1 2 3\n", "t").unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.colors()[0], Vector3::zeros());
        assert_eq!(m.colors()[1], Vector3::new(255.0, 0.0, 0.0));
        let m = Mesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n", "t").unwrap();
        assert_eq!(m.triangles()[0], [0, 1, 2]);
    }

    #[test]
    fn obj_errors() {
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(Mesh::parse_obj(quad, "t"), Err(Error::Parse { .. })));
        assert!(Mesh::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", "t").is_err());
        assert!(Mesh::parse_obj("v 0 0\n", "t").is_err());
        assert!(Mesh::parse_obj("v 0 0 0\nf 0 1 1\n", "t").is_err());
        assert!(Mesh::parse_obj("v 0 0 0\n", "t").is_err());
        assert!(Mesh::parse_obj("bogus 1\n", "t").is_err());
    }

    #[test]
    fn obj_roundtrip() {
        let mut rng = StdRng::seed_from_u64(1);
        let vertices: Vec<_> = (0..20)
            .map(|_| Point3::new(rng.random::<f64>() * 40.0, rng.random::<f64>() * 30.0, rng.random::<f64>()))
            .collect();
        let colors: Vec<_> = (0..20)
            .map(|_| Vector3::new(rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0, 7.0))
            .collect();
        let triangles: Vec<_> = (0..15)
            .map(|_| [rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0..20)])
            .collect();
        let mesh = Mesh::new(vertices, triangles, colors).unwrap();
        let back = Mesh::parse_obj(&mesh.to_obj(), "t").unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
        for (a, b) in back.colors().iter().zip(mesh.colors()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn landmarks_need_68_finite_points() {
        let text: String = (0..68).map(|i| format!("{i} {} 0.5\n", i * 2)).collect();
        let set = LandmarkSet::parse(&text, "t").unwrap();
        assert_eq!(set.points()[3], Point3::new(3.0, 6.0, 0.5));
        let short: String = (0..67).map(|i| format!("{i} 0 0\n")).collect();
        assert!(LandmarkSet::parse(&short, "t").is_err());
        assert!(LandmarkSet::parse("1 2\n", "t").is_err());
    }
}
