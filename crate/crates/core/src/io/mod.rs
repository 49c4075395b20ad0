//! File formats: masks, clouds, meshes, scenes, configs and reports.

pub mod config;
pub mod image;
pub mod mesh;
pub mod report;
pub mod scene;

pub use config::RunConfig;
pub use image::{read_silhouette, write_grid_pgm, write_overlay, write_silhouette};
pub use mesh::{read_cloud_ply, read_mesh_obj, write_cloud_ply, write_mesh_obj};
pub use scene::{load_scene, write_scene, Scene, SceneManifest};
