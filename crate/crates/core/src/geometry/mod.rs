//! Planar domains, boundary data, graded meshes and winding numbers.

mod datum;
mod domain;
mod mesh;
mod meshgen;
mod winding;

pub use datum::{BoundaryDatum, LoopPhase};
pub use domain::{Domain, DomainKind};
pub(crate) use domain::segment_distance as segment_distance_pub;
pub use mesh::{BoundaryEdge, Mesh};
pub use meshgen::{build_mesh, build_mesh_with, MeshOptions};
pub use winding::{principal_angle, unwrap_phase, winding_of_loop, Winding};
