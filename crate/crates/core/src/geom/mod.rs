//! Geometry recovery from depth and normal maps: unprojection, normal
//! integration, depth-grid triangulation, smoothing and mesh export.

mod cloud;
mod export;
mod integrate;
mod triangulate;

pub use cloud::{chamfer_distance, unproject_depth, PointCloud};
pub use export::{export_mesh, read_ply, MeshFormat};
pub use integrate::{integrate_normals, integration_energy, IntegrationConfig, IntegrationReport};
pub use triangulate::{default_discontinuity, smooth_mesh, triangulate_depth_grid};
