//! P1 finite elements on a concentric disk mesh.

pub mod assemble;
pub mod io;
pub mod mesh;
pub mod solve;

pub use assemble::{assemble_system, density_load, ring_load, source_load, AssembledSystem};
pub use mesh::{generate_disk_mesh, generate_disk_mesh_with, Mesh, MeshQuality, PointLocator};
pub use solve::{
    energy_identity_residual, error_norms, field_norms, solve_forward, solve_transmission, ErrorNorms, ExactField,
    Field, FieldNorms,
};
