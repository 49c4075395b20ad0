//! ASCII PLY point clouds and ASCII OBJ meshes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::synth::TriMesh;

/// Coordinates are written with 17 significant digits so they parse back to
/// the same `f64`.
fn coord(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn encode_ply(cloud: &PointCloud) -> String {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        coord(&mut out, p.x);
        out.push(' ');
        coord(&mut out, p.y);
        out.push(' ');
        coord(&mut out, p.z);
        out.push('\n');
    }
    out
}

pub fn write_cloud_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ply(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&text, &path.display().to_string())
}

/// Reads the vertex element of an ASCII PLY. Elements declared after the
/// vertices are ignored; elements before them are skipped by count.
pub fn decode_ply(text: &str, context: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse(context, "missing ply magic"));
    }
    // (name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut ascii = false;
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(context, "header not terminated"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => ascii = true,
            ["format", other, _] => {
                return Err(Error::UnsupportedFormat(format!("{context}: PLY format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(context, format!("bad element count {count}")))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", ..] => {
                let last = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(context, "property before element"))?;
                last.2.push(String::from("<list>"));
            }
            ["property", _, name] => {
                let last = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(context, "property before element"))?;
                last.2.push(name.to_string());
            }
            _ => return Err(Error::parse(context, format!("unexpected header line {line:?}"))),
        }
    }
    if !ascii {
        return Err(Error::parse(context, "missing format line"));
    }
    let mut body = lines.filter(|l| !l.trim().is_empty());
    for (name, count, props) in &elements {
        if name != "vertex" {
            for _ in 0..*count {
                body.next()
                    .ok_or_else(|| Error::parse(context, format!("truncated {name} element")))?;
            }
            continue;
        }
        let index = |axis: &str| {
            props
                .iter()
                .position(|p| p == axis)
                .ok_or_else(|| Error::parse(context, format!("vertex has no {axis} property")))
        };
        let (ix, iy, iz) = (index("x")?, index("y")?, index("z")?);
        let mut points = Vec::with_capacity(*count);
        for _ in 0..*count {
            let line = body
                .next()
                .ok_or_else(|| Error::parse(context, "truncated vertex element"))?;
            let values: Vec<&str> = line.split_whitespace().collect();
            let get = |i: usize| -> Result<f64> {
                values
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(context, format!("bad vertex line {line:?}")))
            };
            points.push(Point3::new(get(ix)?, get(iy)?, get(iz)?));
        }
        return PointCloud::new(points);
    }
    Err(Error::parse(context, "no vertex element"))
}

pub fn encode_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push('v');
        for c in [v.x, v.y, v.z] {
            out.push(' ');
            coord(&mut out, c);
        }
        out.push('\n');
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

pub fn write_mesh_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_obj(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_obj(&text, &path.display().to_string())
}

/// Reads `v` and `f` records; polygons are fan-triangulated and texture or
/// normal indices after `/` are dropped. Other records are ignored.
pub fn decode_obj(text: &str, context: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for line in text.lines() {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let c: Vec<f64> = fields
                    .take(3)
                    .map(|s| s.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(context, format!("bad vertex {line:?}")))?;
                if c.len() != 3 {
                    return Err(Error::parse(context, format!("bad vertex {line:?}")));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx = fields
                    .map(|s| {
                        s.split('/')
                            .next()
                            .and_then(|i| i.parse::<usize>().ok())
                            .filter(|&i| i >= 1)
                            .map(|i| i - 1)
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::parse(context, format!("bad face {line:?}")))?;
                if idx.len() < 3 {
                    return Err(Error::parse(context, format!("face with fewer than 3 vertices {line:?}")));
                }
                faces.push(idx);
            }
            _ => {}
        }
    }
    let triangles = faces
        .iter()
        .flat_map(|f| (1..f.len() - 1).map(move |k| [f[0], f[k], f[k + 1]]))
        .collect();
    let mesh = TriMesh {
        vertices,
        triangles,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_primitive, Primitive, ShapeKind};

    #[test]
    fn single_point_header() {
        let cloud = PointCloud::new(vec![Point3::new(0.1, -2.0, 3.5)]).unwrap();
        let text = encode_ply(&cloud);
        assert!(text.contains("element vertex 1\n"));
        assert_eq!(decode_ply(&text, "t").unwrap(), cloud);
    }

    #[test]
    fn ply_round_trip_is_exact() {
        let points = (0..50)
            .map(|i| {
                let t = i as f64 * 0.7310582;
                Point3::new(t.sin() * 1e-7, t.cos() * 123.456, -t / 3.0)
            })
            .collect();
        let cloud = PointCloud::new(points).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_cloud_ply(&cloud, &path).unwrap();
        assert_eq!(read_cloud_ply(&path).unwrap(), cloud);
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n";
        let cloud = decode_ply(text, "t").unwrap();
        assert_eq!(cloud.points[1], Point3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn ply_errors() {
        assert!(matches!(decode_ply("plx\n", "t"), Err(Error::Parse { .. })));
        let truncated = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 2 3\n";
        assert!(matches!(decode_ply(truncated, "t"), Err(Error::Parse { .. })));
        let binary = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(decode_ply(binary, "t"), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn box_obj_records() {
        let mesh = make_primitive(&Primitive::default_for(ShapeKind::Box)).unwrap();
        let text = encode_obj(&mesh);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
        let back = decode_obj(&text, "t").unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.triangles, mesh.triangles);
    }

    #[test]
    fn obj_quads_and_slashes() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let mesh = decode_obj(text, "t").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(decode_obj("v 0 0 0\nf 1 2 3\n", "t").is_err());
    }
}
