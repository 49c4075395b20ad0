//! World-space point clouds, pinhole cameras and the projection Jacobian.
//!
//! Camera frames follow the usual computer-vision convention: `x` right,
//! `y` down, `z` along the optical axis. A world point `p` maps to the camera
//! frame as `R p + t`, where `R` is the pose rotation and `t` its translation.
//! Continuous image coordinates place the center of pixel `(row, col)` at
//! `(col + 0.5, row + 0.5)`.

use nalgebra::{Matrix2x3, Matrix3, Point3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

/// Points closer to the camera plane than this are flagged as behind the camera.
pub const DEFAULT_Z_NEAR: f64 = 1e-4;

/// A set of world-space points, the unknown being optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::BadParams("point cloud has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates flattened as `[x0, y0, z0, x1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    /// Inverse of [`PointCloud::to_flat`]. Panics if the length is not a multiple of 3.
    pub fn from_flat(coords: &[f64]) -> Self {
        assert_eq!(coords.len() % 3, 0, "flat coordinate buffer must hold xyz triples");
        let points = coords
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        Self { points }
    }
}

/// How camera-frame points are mapped onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionModel {
    Perspective,
    /// Parallel projection with the magnification a perspective camera has at
    /// `reference_depth`. Used for debugging only.
    Orthographic { reference_depth: f64 },
}

/// Rigid world-to-camera pose plus pinhole intrinsics for a single view.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub focal: f64,
    pub principal_point: Vector2<f64>,
    pub width: usize,
    pub height: usize,
    pub model: ProjectionModel,
}

/// Continuous pixel position and camera-frame depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection2 {
    pub uv: Vector2<f64>,
    pub depth: f64,
}

/// Image center under the `+0.5` pixel-center convention.
pub fn default_principal_point(width: usize, height: usize) -> Vector2<f64> {
    Vector2::new(
        (width as f64 - 1.0) / 2.0 + 0.5,
        (height as f64 - 1.0) / 2.0 + 0.5,
    )
}

impl CameraPose {
    /// Builds a pose from a raw `(w, x, y, z)` quaternion, validating all invariants.
    pub fn from_parts(
        quaternion_wxyz: [f64; 4],
        translation: Vector3<f64>,
        focal: f64,
        principal_point: Vector2<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let [w, x, y, z] = quaternion_wxyz;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::BadParams(format!(
                "camera quaternion norm {} is not 1",
                q.norm()
            )));
        }
        let pose = Self {
            rotation: UnitQuaternion::new_unchecked(q),
            translation,
            focal,
            principal_point,
            width,
            height,
            model: ProjectionModel::Perspective,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::BadParams(format!("focal {} must be positive", self.focal)));
        }
        if self.width < 4 || self.height < 4 {
            return Err(Error::BadParams(format!(
                "image size {}x{} is below 4x4",
                self.width, self.height
            )));
        }
        if (self.rotation.quaternion().norm() - 1.0).abs() > 1e-9 {
            return Err(Error::BadParams("camera rotation is not a unit quaternion".into()));
        }
        if let ProjectionModel::Orthographic { reference_depth } = self.model {
            if !(reference_depth > 0.0) {
                return Err(Error::BadParams("orthographic reference depth must be positive".into()));
            }
        }
        Ok(())
    }

    /// Switches this camera to parallel projection, keeping the magnification it
    /// has at the distance between the camera center and the world origin.
    pub fn into_orthographic(mut self) -> Self {
        let reference_depth = self.translation.z.abs().max(DEFAULT_Z_NEAR);
        self.model = ProjectionModel::Orthographic { reference_depth };
        self
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.inverse() * self.translation))
    }

    pub fn to_camera(&self, point: &Point3<f64>) -> Vector3<f64> {
        self.rotation * point.coords + self.translation
    }

    fn magnification(&self, depth: f64) -> f64 {
        match self.model {
            ProjectionModel::Perspective => self.focal / depth,
            ProjectionModel::Orthographic { reference_depth } => self.focal / reference_depth,
        }
    }
}

/// Camera at `eye` looking at `target`, with `up` mapping to the negative image `v` axis.
pub fn look_at_camera(
    eye: Point3<f64>,
    target: Point3<f64>,
    up: Vector3<f64>,
    focal: f64,
    width: usize,
    height: usize,
) -> Result<CameraPose> {
    let view = target - eye;
    if view.norm() <= 1e-9 {
        return Err(Error::DegenerateFrame("eye and target coincide"));
    }
    let z_axis = view.normalize();
    let up_norm = up.norm();
    let side = if up_norm > 0.0 { z_axis.cross(&(up / up_norm)) } else { Vector3::zeros() };
    if side.norm() <= 1e-9 {
        return Err(Error::DegenerateFrame("up vector is parallel to the view direction"));
    }
    let x_axis = side.normalize();
    let y_axis = z_axis.cross(&x_axis);
    let rotation = Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
    let translation = -(rotation * eye.coords);
    let pose = CameraPose {
        rotation,
        translation,
        focal,
        principal_point: default_principal_point(width, height),
        width,
        height,
        model: ProjectionModel::Perspective,
    };
    pose.validate()?;
    Ok(pose)
}

pub fn project_point(pose: &CameraPose, point: &Point3<f64>) -> Result<Projection2> {
    let pc = pose.to_camera(point);
    if !(pc.z > DEFAULT_Z_NEAR) {
        return Err(Error::BehindCamera { depth: pc.z });
    }
    let m = pose.magnification(pc.z);
    Ok(Projection2 {
        uv: pose.principal_point + Vector2::new(pc.x, pc.y) * m,
        depth: pc.z,
    })
}

/// `d uv / d point`, in pixels per world unit.
pub fn projection_jacobian(pose: &CameraPose, point: &Point3<f64>) -> Result<Matrix2x3<f64>> {
    let pc = pose.to_camera(point);
    if !(pc.z > DEFAULT_Z_NEAR) {
        return Err(Error::BehindCamera { depth: pc.z });
    }
    Ok(camera_jacobian(pose, &pc) * pose.rotation_matrix())
}

fn camera_jacobian(pose: &CameraPose, pc: &Vector3<f64>) -> Matrix2x3<f64> {
    match pose.model {
        ProjectionModel::Perspective => {
            let f = pose.focal;
            let iz = 1.0 / pc.z;
            Matrix2x3::new(
                f * iz,
                0.0,
                -f * pc.x * iz * iz,
                0.0,
                f * iz,
                -f * pc.y * iz * iz,
            )
        }
        ProjectionModel::Orthographic { reference_depth } => {
            let m = pose.focal / reference_depth;
            Matrix2x3::new(m, 0.0, 0.0, 0.0, m, 0.0)
        }
    }
}

/// Projects every point; entries behind the camera are `None` so indices stay aligned.
pub fn project_cloud(pose: &CameraPose, cloud: &PointCloud) -> Vec<Option<Projection2>> {
    cloud
        .points
        .iter()
        .map(|p| project_point(pose, p).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Isometry3, Translation3};

    fn front_camera() -> CameraPose {
        look_at_camera(
            Point3::new(0.0, 0.0, 2.0),
            Point3::origin(),
            Vector3::y(),
            32.0,
            64,
            64,
        )
        .unwrap()
    }

    #[test]
    fn origin_projects_to_principal_point() {
        let pose = front_camera();
        let p = project_point(&pose, &Point3::origin()).unwrap();
        assert!((p.uv - pose.principal_point).norm() < 1e-12);
        assert!((p.depth - 2.0).abs() < 1e-12);
        assert_eq!(pose.principal_point, Vector2::new(32.0, 32.0));
    }

    #[test]
    fn side_camera_looks_along_negative_x() {
        let pose = look_at_camera(
            Point3::new(2.0, 0.0, 0.0),
            Point3::origin(),
            Vector3::y(),
            32.0,
            64,
            64,
        )
        .unwrap();
        let z_row = pose.rotation_matrix().row(2).transpose();
        assert!((z_row - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn parallel_up_is_degenerate() {
        let err = look_at_camera(
            Point3::new(0.0, 1.0, 0.0),
            Point3::origin(),
            Vector3::y(),
            32.0,
            64,
            64,
        );
        assert!(matches!(err, Err(Error::DegenerateFrame(_))));
    }

    #[test]
    fn pinhole_offset_in_u() {
        let pose = front_camera();
        let p = project_point(&pose, &Point3::new(0.5, 0.0, 0.0)).unwrap();
        let offset = p.uv - pose.principal_point;
        assert!((offset.x - 8.0).abs() < 1e-12);
        assert!(offset.y.abs() < 1e-12);
    }

    #[test]
    fn world_up_maps_to_smaller_v() {
        let pose = front_camera();
        let p = project_point(&pose, &Point3::new(0.0, 0.5, 0.0)).unwrap();
        assert!(p.uv.y < pose.principal_point.y);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let pose = front_camera();
        let err = project_point(&pose, &Point3::new(0.0, 0.0, 3.0));
        assert!(matches!(err, Err(Error::BehindCamera { .. })));
        assert!(projection_jacobian(&pose, &Point3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn optical_axis_jacobian_has_focal_over_depth_entries() {
        let pose = front_camera();
        let j = projection_jacobian(&pose, &Point3::origin()).unwrap();
        // camera x = world x, camera y = -world y, camera z = -world z
        let expected = Matrix2x3::new(16.0, 0.0, 0.0, 0.0, -16.0, 0.0);
        assert!((j - expected).norm() < 1e-12);
    }

    #[test]
    fn jacobian_grows_as_depth_shrinks() {
        let pose = front_camera();
        let mut last = 0.0;
        for z in [0.0, 1.0, 1.5, 1.9, 1.99, 1.999] {
            let j = projection_jacobian(&pose, &Point3::new(0.1, 0.05, z)).unwrap();
            let scale = j.abs().max();
            assert!(scale > last);
            last = scale;
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let pose = look_at_camera(
            Point3::new(1.3, 0.7, 2.1),
            Point3::new(0.1, -0.05, 0.02),
            Vector3::new(0.1, 1.0, 0.0),
            57.0,
            80,
            60,
        )
        .unwrap();
        let point = Point3::new(0.21, -0.13, 0.3);
        let j = projection_jacobian(&pose, &point).unwrap();
        let h = 1e-6;
        for axis in 0..3 {
            let mut plus = point;
            let mut minus = point;
            plus[axis] += h;
            minus[axis] -= h;
            let fd = (project_point(&pose, &plus).unwrap().uv - project_point(&pose, &minus).unwrap().uv)
                / (2.0 * h);
            for row in 0..2 {
                let a = j[(row, axis)];
                let rel = (a - fd[row]).abs() / a.abs().max(fd[row].abs()).max(1e-8);
                assert!(rel < 1e-5, "axis {axis} row {row}: {a} vs {}", fd[row]);
            }
        }
    }

    #[test]
    fn orthographic_ignores_depth() {
        let pose = front_camera().into_orthographic();
        let a = project_point(&pose, &Point3::new(0.5, 0.0, 0.0)).unwrap();
        let b = project_point(&pose, &Point3::new(0.5, 0.0, 1.0)).unwrap();
        assert!((a.uv - b.uv).norm() < 1e-12);
        assert!((a.uv.x - 40.0).abs() < 1e-12);
    }

    #[test]
    fn rigid_motion_of_pose_and_point_preserves_projection() {
        let pose = front_camera();
        let point = Point3::new(0.2, -0.3, 0.4);
        let iso = Isometry3::from_parts(
            Translation3::new(0.5, -1.0, 2.0),
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
        );
        let moved_pose = CameraPose {
            rotation: pose.rotation * iso.rotation.inverse(),
            translation: pose.translation - pose.rotation * (iso.rotation.inverse() * iso.translation.vector),
            ..pose.clone()
        };
        let a = project_point(&pose, &point).unwrap();
        let b = project_point(&moved_pose, &(iso * point)).unwrap();
        assert!((a.uv - b.uv).norm() < 1e-9);
    }

    #[test]
    fn project_cloud_flags_but_keeps_invalid_points() {
        let pose = front_camera();
        let cloud = PointCloud::new(vec![
            Point3::origin(),
            Point3::new(0.0, 0.0, 5.0),
            Point3::new(0.1, 0.0, 0.0),
        ])
        .unwrap();
        let proj = project_cloud(&pose, &cloud);
        assert_eq!(proj.len(), 3);
        assert!(proj[0].is_some() && proj[1].is_none() && proj[2].is_some());
        assert!((proj[0].unwrap().uv - pose.principal_point).norm() < 1e-12);
    }

    #[test]
    fn project_cloud_preserves_length_and_order() {
        let pose = front_camera();
        let points: Vec<_> = (0..1000)
            .map(|i| Point3::new((i as f64) * 1e-4, 0.0, 0.0))
            .collect();
        let cloud = PointCloud::new(points.clone()).unwrap();
        let proj = project_cloud(&pose, &cloud);
        assert_eq!(proj.len(), 1000);
        for (p, q) in points.iter().zip(&proj) {
            assert_eq!(q.unwrap().uv, project_point(&pose, p).unwrap().uv);
        }
    }

    #[test]
    fn empty_cloud_is_rejected() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
    }
}
