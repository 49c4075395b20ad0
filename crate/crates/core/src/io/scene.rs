//! Camera files and scene directories.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::BinarySilhouette;
use crate::geometry::{CameraPose, PointCloud};
use crate::io::image::{read_silhouette, write_silhouette};
use crate::io::mesh::{read_cloud_ply, write_cloud_ply, write_mesh_obj};
use crate::loss::View;
use crate::synth::SyntheticScene;

pub const MANIFEST_NAME: &str = "scene.json";
pub const CAMERAS_NAME: &str = "cameras.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub id: usize,
    /// World-to-camera rotation as `[w, x, y, z]`.
    pub rotation_wxyz: [f64; 4],
    pub translation: [f64; 3],
    pub focal: f64,
    pub principal_point: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl CameraRecord {
    pub fn from_pose(id: usize, pose: &CameraPose) -> Self {
        let q = pose.rotation.quaternion();
        Self {
            id,
            rotation_wxyz: [q.w, q.i, q.j, q.k],
            translation: pose.translation.into(),
            focal: pose.focal,
            principal_point: pose.principal_point.into(),
            width: pose.width,
            height: pose.height,
        }
    }

    pub fn to_pose(&self) -> Result<CameraPose> {
        CameraPose::from_parts(
            self.rotation_wxyz,
            Vector3::from(self.translation),
            self.focal,
            Vector2::from(self.principal_point),
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub cameras: Vec<CameraRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub mask: String,
    pub camera: usize,
}

/// Contents of `scene.json`. Paths are relative to the scene directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub width: usize,
    pub height: usize,
    pub cameras: String,
    pub views: Vec<ViewEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_cloud: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

/// A scene loaded from disk with every view checked against its camera.
#[derive(Debug, Clone)]
pub struct Scene {
    pub manifest: SceneManifest,
    pub cameras: Vec<CameraPose>,
    pub silhouettes: Vec<BinarySilhouette>,
    pub gt_cloud: Option<PointCloud>,
}

impl Scene {
    pub fn views(&self, pad: usize) -> Result<Vec<View>> {
        self.cameras
            .iter()
            .zip(&self.silhouettes)
            .map(|(c, s)| View::new(c.clone(), s.clone(), pad))
            .collect()
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_cameras(path: impl AsRef<Path>) -> Result<CameraFile> {
    read_json(path.as_ref())
}

pub fn write_cameras(cameras: &CameraFile, path: impl AsRef<Path>) -> Result<()> {
    write_json(cameras, path.as_ref())
}

pub fn load_scene(dir: impl AsRef<Path>) -> Result<Scene> {
    let dir = dir.as_ref();
    let manifest: SceneManifest = read_json(&dir.join(MANIFEST_NAME))?;
    let camera_file = read_cameras(dir.join(&manifest.cameras))?;
    if manifest.views.is_empty() {
        return Err(Error::parse(MANIFEST_NAME, "scene has no views"));
    }
    let mut cameras = Vec::with_capacity(manifest.views.len());
    let mut silhouettes = Vec::with_capacity(manifest.views.len());
    for (index, entry) in manifest.views.iter().enumerate() {
        let record = camera_file
            .cameras
            .iter()
            .find(|c| c.id == entry.camera)
            .ok_or_else(|| Error::InconsistentView {
                index,
                reason: format!("camera id {} is not defined", entry.camera),
            })?;
        let pose = record.to_pose()?;
        let sil = read_silhouette(dir.join(&entry.mask))?;
        let dims = [
            (sil.width, sil.height, "mask"),
            (pose.width, pose.height, "camera"),
        ];
        for (w, h, what) in dims {
            if (w, h) != (manifest.width, manifest.height) {
                return Err(Error::InconsistentView {
                    index,
                    reason: format!(
                        "{what} is {w}x{h} but the scene is {}x{}",
                        manifest.width, manifest.height
                    ),
                });
            }
        }
        cameras.push(pose);
        silhouettes.push(sil);
    }
    let gt_cloud = manifest
        .gt_cloud
        .as_ref()
        .map(|p| read_cloud_ply(dir.join(p)))
        .transpose()?;
    Ok(Scene {
        manifest,
        cameras,
        silhouettes,
        gt_cloud,
    })
}

pub fn mask_name(index: usize) -> String {
    format!("mask_{index:03}.pgm")
}

/// Writes masks, cameras, ground-truth cloud, mesh and manifest into `dir`.
pub fn write_scene(scene: &SyntheticScene, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let first = scene
        .cameras
        .first()
        .ok_or_else(|| Error::BadParams("scene has no cameras".into()))?;
    let mut views = Vec::with_capacity(scene.cameras.len());
    for (i, sil) in scene.silhouettes.iter().enumerate() {
        write_silhouette(sil, dir.join(mask_name(i)))?;
        views.push(ViewEntry {
            mask: mask_name(i),
            camera: i,
        });
    }
    let cameras = CameraFile {
        cameras: scene
            .cameras
            .iter()
            .enumerate()
            .map(|(i, c)| CameraRecord::from_pose(i, c))
            .collect(),
    };
    write_cameras(&cameras, dir.join(CAMERAS_NAME))?;
    write_cloud_ply(&scene.gt_cloud, dir.join("gt_cloud.ply"))?;
    write_mesh_obj(&scene.mesh, dir.join("mesh.obj"))?;
    let manifest = SceneManifest {
        width: first.width,
        height: first.height,
        cameras: CAMERAS_NAME.into(),
        views,
        gt_cloud: Some("gt_cloud.ply".into()),
        mesh: Some("mesh.obj".into()),
    };
    let path = dir.join(MANIFEST_NAME);
    write_json(&manifest, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize_scene, SceneSpec, ShapeKind};

    fn small_scene() -> SyntheticScene {
        synthesize_scene(&SceneSpec {
            shape: ShapeKind::Box,
            views: 3,
            resolution: 32,
            gt_points: 100,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = small_scene();
        write_scene(&scene, dir.path()).unwrap();
        let loaded = load_scene(dir.path()).unwrap();
        assert_eq!(loaded.silhouettes, scene.silhouettes);
        assert_eq!(loaded.gt_cloud.as_ref(), Some(&scene.gt_cloud));
        for (a, b) in loaded.cameras.iter().zip(&scene.cameras) {
            assert_eq!(a.translation, b.translation);
            assert_eq!(a.rotation.quaternion(), b.rotation.quaternion());
            assert_eq!(a.focal, b.focal);
        }
    }

    #[test]
    fn mismatched_mask_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        write_scene(&small_scene(), dir.path()).unwrap();
        write_silhouette(&BinarySilhouette::from_fn(16, 16, |_, _| true), dir.path().join(mask_name(1)))
            .unwrap();
        match load_scene(dir.path()) {
            Err(Error::InconsistentView { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_camera_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        write_scene(&small_scene(), dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).unwrap().replace("\"camera\": 2", "\"camera\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_scene(dir.path()), Err(Error::InconsistentView { index: 2, .. })));
    }
}
