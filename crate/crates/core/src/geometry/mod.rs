mod generators;
mod io;
mod mesh;
mod model;

pub use generators::{bcc_torus_3d, flat_torus_2d, icosphere, sixteen_cell, square_torus};
pub use io::{read_mesh, write_mesh};
pub use mesh::{MeshQuality, SimplicialMesh};
pub use model::ModelSpace;

/// Volume of either geometry backend.
pub enum Geometry<'a> {
    Mesh(&'a SimplicialMesh),
    Space(&'a ModelSpace),
}

pub fn volume(g: Geometry<'_>) -> f64 {
    match g {
        Geometry::Mesh(m) => m.total_volume(),
        Geometry::Space(s) => s.volume(),
    }
}
