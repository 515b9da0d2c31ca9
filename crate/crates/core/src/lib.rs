//! Numerical laboratory for coexact 1-form spectra, magnetic critical values,
//! magnetic geodesic flows, hyperbolic quasigeodesic shadowing and
//! isoperimetric chain estimates.

pub mod dec;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod harness;
pub mod isoperimetric;
pub mod linalg;
pub mod magflow;
pub mod mane;
pub mod optim;
pub mod shadow;
pub mod spectral;

pub use dec::{Cochain, HodgeOperators};
pub use error::{Error, Result};
pub use forms::AnalyticForm;
pub use geometry::{ModelSpace, SimplicialMesh};
pub use magflow::Trajectory;
pub use mane::MagneticSystem;
