//! Synthetic ground truth: parametric meshes, ring cameras, silhouette
//! rasterization and area-weighted surface sampling.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::BinarySilhouette;
use crate::geometry::{look_at_camera, project_point, CameraPose, PointCloud};
use crate::loss::View;
use crate::metrics::bounding_box;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::BadParams(format!("triangle {t} indexes a missing vertex")));
            }
            if self.triangle_area(t) <= 1e-12 {
                return Err(Error::BadParams(format!("triangle {t} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Appends another mesh as an independent part.
    pub fn append(&mut self, other: &TriMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Moves the bounding-box center to the origin and scales the diagonal to 1.
    fn normalized(mut self) -> TriMesh {
        let (lo, hi) = bounding_box(&self.vertices);
        let center = nalgebra::center(&lo, &hi);
        let scale = 1.0 / (hi - lo).norm();
        for v in &mut self.vertices {
            *v = Point3::from((*v - center) * scale);
        }
        self
    }

    /// Counts how often each undirected edge is used; every edge of a closed
    /// two-manifold part is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }
}

/// Shape families available to the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Box,
    Torus,
    CompositeChair,
    CompositePlane,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Box,
        ShapeKind::Torus,
        ShapeKind::CompositeChair,
        ShapeKind::CompositePlane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Box => "box",
            ShapeKind::Torus => "torus",
            ShapeKind::CompositeChair => "composite_chair",
            ShapeKind::CompositePlane => "composite_plane",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chair" => return Ok(ShapeKind::CompositeChair),
            "plane" => return Ok(ShapeKind::CompositePlane),
            _ => {}
        }
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::BadParams(format!("unknown shape `{s}`")))
    }
}

/// Shape parameters. Sizes are relative; every mesh is normalized afterwards.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere { subdivisions: u32 },
    Box { size: [f64; 3] },
    Torus { major: f64, minor: f64, rings: usize, sides: usize },
    CompositeChair,
    CompositePlane,
}

impl Primitive {
    pub fn default_for(kind: ShapeKind) -> Self {
        match kind {
            ShapeKind::Sphere => Primitive::Sphere { subdivisions: 3 },
            ShapeKind::Box => Primitive::Box { size: [1.0, 0.8, 0.6] },
            ShapeKind::Torus => Primitive::Torus {
                major: 1.0,
                minor: 0.35,
                rings: 32,
                sides: 16,
            },
            ShapeKind::CompositeChair => Primitive::CompositeChair,
            ShapeKind::CompositePlane => Primitive::CompositePlane,
        }
    }
}

/// Closed axis-aligned box with outward-facing triangles.
fn box_mesh(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriMesh { vertices, triangles }
}

fn centered_box(center: [f64; 3], size: [f64; 3]) -> TriMesh {
    let c = Vector3::from(center);
    let h = Vector3::from(size) * 0.5;
    box_mesh(Point3::from(c - h), Point3::from(c + h))
}

fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Point3::from(Vector3::from(*v).normalize()))
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a].coords + vertices[b].coords).normalize();
                vertices.push(Point3::from(m));
                vertices.len() - 1
            })
        };
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    TriMesh { vertices, triangles }
}

fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = i as f64 / rings as f64 * std::f64::consts::TAU;
        for j in 0..sides {
            let v = j as f64 / sides as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), minor * v.sin(), r * u.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % rings) * sides + (j % sides);
    let mut triangles = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            triangles.push([idx(i, j), idx(i, j + 1), idx(i + 1, j)]);
            triangles.push([idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)]);
        }
    }
    TriMesh { vertices, triangles }
}

fn chair() -> TriMesh {
    let mut mesh = centered_box([0.0, 0.0, 0.0], [0.5, 0.06, 0.5]); // seat
    mesh.append(&centered_box([0.0, 0.3, -0.22], [0.5, 0.54, 0.06])); // back
    for (x, z) in [(-0.21, -0.21), (0.21, -0.21), (-0.21, 0.21), (0.21, 0.21)] {
        mesh.append(&centered_box([x, -0.24, z], [0.06, 0.42, 0.06])); // legs
    }
    mesh
}

fn plane() -> TriMesh {
    let mut mesh = centered_box([0.0, 0.0, 0.0], [0.12, 0.12, 1.0]); // fuselage
    mesh.append(&centered_box([0.0, 0.0, 0.05], [1.0, 0.03, 0.2])); // wings
    mesh.append(&centered_box([0.0, 0.02, -0.42], [0.36, 0.02, 0.1])); // tailplane
    mesh.append(&centered_box([0.0, 0.14, -0.43], [0.02, 0.2, 0.1])); // fin
    mesh
}

/// Builds a closed mesh of the requested kind, centered at the origin with a
/// unit bounding-box diagonal.
pub fn make_primitive(primitive: &Primitive) -> Result<TriMesh> {
    let mesh = match *primitive {
        Primitive::Sphere { subdivisions } => {
            if subdivisions > 7 {
                return Err(Error::BadParams("sphere subdivisions above 7".into()));
            }
            icosphere(subdivisions)
        }
        Primitive::Box { size } => {
            if size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::BadParams("box sizes must be positive".into()));
            }
            centered_box([0.0; 3], size)
        }
        Primitive::Torus {
            major,
            minor,
            rings,
            sides,
        } => {
            if !(major > 0.0 && minor > 0.0 && minor < major) || rings < 3 || sides < 3 {
                return Err(Error::BadParams(
                    "torus needs 0 < minor < major and at least 3 rings and sides".into(),
                ));
            }
            torus(major, minor, rings, sides)
        }
        Primitive::CompositeChair => chair(),
        Primitive::CompositePlane => plane(),
    };
    let mesh = mesh.normalized();
    mesh.validate()?;
    Ok(mesh)
}

/// `count` cameras on a horizontal ring around the origin, azimuth 0 first,
/// all looking at the origin with world `+Y` up.
pub fn ring_cameras(
    count: usize,
    radius: f64,
    elevation_deg: f64,
    focal: f64,
    width: usize,
    height: usize,
) -> Result<Vec<CameraPose>> {
    if count == 0 {
        return Err(Error::BadParams("at least one camera is required".into()));
    }
    if !(radius > 0.5) {
        return Err(Error::BadParams("ring radius must exceed 0.5".into()));
    }
    if !(elevation_deg.abs() < 89.0) {
        return Err(Error::BadParams("ring elevation must be within (-89, 89) degrees".into()));
    }
    let el = elevation_deg.to_radians();
    (0..count)
        .map(|k| {
            let az = ring_azimuth(k, count);
            let eye = Point3::new(
                radius * el.cos() * az.sin(),
                radius * el.sin(),
                radius * el.cos() * az.cos(),
            );
            look_at_camera(eye, Point3::origin(), Vector3::y(), focal, width, height)
        })
        .collect()
}

/// Azimuth of camera `k` of `count` in radians.
pub fn ring_azimuth(k: usize, count: usize) -> f64 {
    (k as f64 * 360.0 / count as f64).to_radians()
}

/// Signed doubled area of `(a, b, p)`; positive when `p` is left of `a -> b`
/// in a y-down frame drawn on screen.
fn edge(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Whether a pixel center lying exactly on edge `a -> b` belongs to this
/// triangle. Reversed edges get the opposite answer, so a center on an edge
/// shared by two triangles is claimed exactly once.
fn owns_edge(a: Vector2<f64>, b: Vector2<f64>) -> bool {
    let d = b - a;
    d.y < 0.0 || (d.y == 0.0 && d.x > 0.0)
}

/// Marks every pixel whose center is covered by a projected triangle.
pub fn rasterize_silhouette(mesh: &TriMesh, pose: &CameraPose) -> Result<BinarySilhouette> {
    let (w, h) = (pose.width, pose.height);
    let mut sil = BinarySilhouette::from_fn(w, h, |_, _| false);
    let projected: Vec<Option<Vector2<f64>>> = mesh
        .vertices
        .iter()
        .map(|v| project_point(pose, v).ok().map(|p| p.uv))
        .collect();
    for tri in &mesh.triangles {
        let [Some(mut a), Some(mut b), Some(c)] = tri.map(|i| projected[i]) else {
            continue;
        };
        let area = edge(a, b, c);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
        let lo = a.inf(&b).inf(&c);
        let hi = a.sup(&b).sup(&c);
        // pixel centers col + 0.5 within [lo.x, hi.x]
        let c0 = (lo.x - 0.5).ceil().max(0.0);
        let c1 = (hi.x - 0.5).floor().min(w as f64 - 1.0);
        let r0 = (lo.y - 0.5).ceil().max(0.0);
        let r1 = (hi.y - 0.5).floor().min(h as f64 - 1.0);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        let edges = [(a, b), (b, c), (c, a)];
        let owned = edges.map(|(p, q)| owns_edge(p, q));
        for row in r0 as usize..=r1 as usize {
            for col in c0 as usize..=c1 as usize {
                let p = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
                let inside = edges.iter().zip(owned).all(|(&(s, e), own)| {
                    let v = edge(s, e, p);
                    v > 0.0 || (v == 0.0 && own)
                });
                if inside {
                    sil.mask[row * w + col] = 1;
                }
            }
        }
    }
    if sil.foreground_count() == 0 {
        return Err(Error::NothingVisible);
    }
    Ok(sil)
}

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 || mesh.triangles.is_empty() {
        return Err(Error::BadParams("need n >= 1 and a non-empty mesh".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let pick = rng.gen::<f64>() * total;
            let t = cumulative
                .partition_point(|&c| c <= pick)
                .min(mesh.triangles.len() - 1);
            let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i]);
            let s = rng.gen::<f64>().sqrt();
            let r = rng.gen::<f64>();
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r)) + c.coords * (s * r))
        })
        .collect();
    PointCloud::new(points)
}

/// Parameters of a generated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub shape: ShapeKind,
    pub views: usize,
    /// Square image size in pixels.
    pub resolution: usize,
    pub radius: f64,
    pub elevation_deg: f64,
    /// Focal length as a multiple of the resolution.
    pub focal_scale: f64,
    pub gt_points: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            shape: ShapeKind::Sphere,
            views: 4,
            resolution: 64,
            radius: 2.5,
            elevation_deg: 20.0,
            focal_scale: 1.75,
            gt_points: 2000,
            seed: 0,
        }
    }
}

/// Ground truth for one synthetic object.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub mesh: TriMesh,
    pub cameras: Vec<CameraPose>,
    pub silhouettes: Vec<BinarySilhouette>,
    pub gt_cloud: PointCloud,
}

impl SyntheticScene {
    /// Views with smoothed fields built at the given padding.
    pub fn views(&self, pad: usize) -> Result<Vec<View>> {
        self.cameras
            .iter()
            .zip(&self.silhouettes)
            .map(|(c, s)| View::new(c.clone(), s.clone(), pad))
            .collect()
    }
}

pub fn synthesize_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    let mesh = make_primitive(&Primitive::default_for(spec.shape))?;
    let focal = spec.focal_scale * spec.resolution as f64;
    let cameras = ring_cameras(
        spec.views,
        spec.radius,
        spec.elevation_deg,
        focal,
        spec.resolution,
        spec.resolution,
    )?;
    let silhouettes = cameras
        .iter()
        .map(|c| rasterize_silhouette(&mesh, c))
        .collect::<Result<Vec<_>>>()?;
    let gt_cloud = sample_surface(&mesh, spec.gt_points, spec.seed)?;
    Ok(SyntheticScene {
        mesh,
        cameras,
        silhouettes,
        gt_cloud,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn icosphere_vertex_count() {
        let mesh = make_primitive(&Primitive::Sphere { subdivisions: 3 }).unwrap();
        assert_eq!(mesh.vertices.len(), 10 * 4usize.pow(3) + 2);
        assert_eq!(mesh.vertices.len(), 642);
        assert!(mesh.is_watertight());
    }

    #[test]
    fn box_counts() {
        let mesh = make_primitive(&Primitive::default_for(ShapeKind::Box)).unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.triangles.len(), 12);
        assert!(mesh.is_watertight());
    }

    #[test]
    fn all_primitives_are_normalized_and_closed() {
        for kind in ShapeKind::ALL {
            let mesh = make_primitive(&Primitive::default_for(kind)).unwrap();
            let (lo, hi) = bounding_box(&mesh.vertices);
            assert!(((hi - lo).norm() - 1.0).abs() < 1e-9, "{kind}");
            assert!(nalgebra::center(&lo, &hi).coords.norm() < 1e-12, "{kind}");
            assert!(mesh.is_watertight(), "{kind}");
        }
    }

    #[test]
    fn bad_params_are_rejected() {
        assert!(make_primitive(&Primitive::Box { size: [1.0, 0.0, 1.0] }).is_err());
        assert!(make_primitive(&Primitive::Torus {
            major: 0.2,
            minor: 0.5,
            rings: 8,
            sides: 8
        })
        .is_err());
    }

    #[test]
    fn ring_azimuths_and_principal_points() {
        let cams = ring_cameras(4, 2.5, 0.0, 60.0, 64, 64).unwrap();
        for (k, cam) in cams.iter().enumerate() {
            let center = cam.center();
            let az = center.x.atan2(center.z).to_degrees().rem_euclid(360.0);
            assert!((az - 90.0 * k as f64).abs() < 1e-9);
            let p = project_point(cam, &Point3::origin()).unwrap();
            assert!((p.uv - cam.principal_point).norm() < 1e-9);
        }
        let single = ring_cameras(1, 2.5, 0.0, 60.0, 64, 64).unwrap();
        assert!((single[0].center() - Point3::new(0.0, 0.0, 2.5)).norm() < 1e-12);
    }

    #[test]
    fn fronto_parallel_square_is_sixteen_pixels_wide() {
        let square = TriMesh {
            vertices: vec![
                Point3::new(-0.5, -0.5, 0.0),
                Point3::new(0.5, -0.5, 0.0),
                Point3::new(0.5, 0.5, 0.0),
                Point3::new(-0.5, 0.5, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        };
        let pose = look_at_camera(Point3::new(0.0, 0.0, 2.0), Point3::origin(), Vector3::y(), 32.0, 64, 64).unwrap();
        let sil = rasterize_silhouette(&square, &pose).unwrap();
        assert_eq!(sil.foreground_count(), 16 * 16);
        for row in 0..64 {
            for col in 0..64 {
                assert_eq!(sil.get(row, col), (24..40).contains(&row) && (24..40).contains(&col));
            }
        }
    }

    #[test]
    fn shared_edge_through_pixel_centers_leaves_no_hole() {
        // the diagonal passes exactly through pixel centers
        let square = TriMesh {
            vertices: vec![
                Point3::new(-0.25, -0.25, 0.0),
                Point3::new(0.25, -0.25, 0.0),
                Point3::new(0.25, 0.25, 0.0),
                Point3::new(-0.25, 0.25, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        };
        // focal 30 at depth 2: half-width 3.75 px -> corners at 28.25 and 35.75
        let pose = look_at_camera(Point3::new(0.0, 0.0, 2.0), Point3::origin(), Vector3::y(), 30.0, 64, 64).unwrap();
        let sil = rasterize_silhouette(&square, &pose).unwrap();
        assert_eq!(sil.foreground_count(), 64);
    }

    #[test]
    fn sphere_silhouette_is_row_convex() {
        let mesh = make_primitive(&Primitive::Sphere { subdivisions: 3 }).unwrap();
        for cam in ring_cameras(5, 2.5, 20.0, 80.0, 64, 64).unwrap() {
            let sil = rasterize_silhouette(&mesh, &cam).unwrap();
            for row in 0..64 {
                let cols: Vec<usize> = (0..64).filter(|&c| sil.get(row, c)).collect();
                if let (Some(&a), Some(&b)) = (cols.first(), cols.last()) {
                    assert_eq!(cols.len(), b - a + 1);
                }
            }
            assert!(sil.foreground_count() > 100);
        }
    }

    #[test]
    fn mesh_behind_camera_is_invisible() {
        let mesh = make_primitive(&Primitive::Sphere { subdivisions: 1 }).unwrap();
        let pose = look_at_camera(Point3::new(0.0, 0.0, 2.0), Point3::new(0.0, 0.0, 5.0), Vector3::y(), 32.0, 64, 64).unwrap();
        assert!(matches!(rasterize_silhouette(&mesh, &pose), Err(Error::NothingVisible)));
    }

    #[test]
    fn rasterization_is_deterministic() {
        let mesh = make_primitive(&Primitive::CompositeChair).unwrap();
        let cam = &ring_cameras(3, 2.5, 25.0, 90.0, 64, 64).unwrap()[1];
        assert_eq!(rasterize_silhouette(&mesh, cam).unwrap(), rasterize_silhouette(&mesh, cam).unwrap());
    }

    #[test]
    fn ring_cameras_are_azimuthal_rotations() {
        let mesh = make_primitive(&Primitive::CompositeChair).unwrap();
        let cams = ring_cameras(4, 2.5, 20.0, 90.0, 64, 64).unwrap();
        for (k, cam) in cams.iter().enumerate() {
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), -ring_azimuth(k, 4));
            let rotated = mesh.map_vertices(|v| rot * v);
            let direct = rasterize_silhouette(&mesh, cam).unwrap();
            let via_front = rasterize_silhouette(&rotated, &cams[0]).unwrap();
            assert_eq!(direct, via_front, "camera {k}");
        }
    }

    #[test]
    fn samples_lie_in_single_triangle() {
        let mesh = TriMesh {
            vertices: vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            triangles: vec![[0, 1, 2]],
        };
        let cloud = sample_surface(&mesh, 2000, 3).unwrap();
        for p in &cloud.points {
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-12 && p.z == 0.0);
        }
    }

    #[test]
    fn sampling_follows_area() {
        // triangle areas 1.5 and 0.5
        let mesh = TriMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        };
        let cloud = sample_surface(&mesh, 10_000, 17).unwrap();
        let big = cloud.points.iter().filter(|p| p.x < 5.0).count() as f64;
        // binomial(10^4, 0.75): sigma = sqrt(10^4 * 0.75 * 0.25) ~ 43.3
        let sigma = (10_000.0f64 * 0.75 * 0.25).sqrt();
        assert!((big - 7500.0).abs() < 3.0 * sigma, "{big}");
        assert_eq!(sample_surface(&mesh, 100, 5).unwrap(), sample_surface(&mesh, 100, 5).unwrap());
    }

    #[test]
    fn surface_samples_project_inside_silhouettes() {
        let mesh = make_primitive(&Primitive::CompositeChair).unwrap();
        let cloud = sample_surface(&mesh, 10_000, 1).unwrap();
        for cam in ring_cameras(4, 2.5, 20.0, 90.0, 64, 64).unwrap() {
            let sil = rasterize_silhouette(&mesh, &cam).unwrap();
            let inside = cloud
                .points
                .iter()
                .filter(|p| {
                    let uv = project_point(&cam, p).unwrap().uv;
                    let (c, r) = (uv.x.floor() as isize, uv.y.floor() as isize);
                    // the pixel holding the projection, or an 8-neighbour for boundary straddlers
                    (-1..=1).any(|dr| {
                        (-1..=1).any(|dc| {
                            let (rr, cc) = (r + dr, c + dc);
                            rr >= 0 && cc >= 0 && rr < 64 && cc < 64 && sil.get(rr as usize, cc as usize)
                        })
                    })
                })
                .count();
            assert!(inside as f64 >= 0.999 * 10_000.0);
        }
    }
}
