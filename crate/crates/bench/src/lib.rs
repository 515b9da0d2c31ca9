//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use coexact::dec::HodgeOperators;
use coexact::geometry::{flat_torus_2d, ModelSpace};
use coexact::{AnalyticForm, MagneticSystem};

/// Operators on the n×n triangulation of the 2π square torus.
pub fn torus_ops(n: usize) -> Arc<HodgeOperators> {
    let mesh = flat_torus_2d(n, n, 2.0 * PI, 2.0 * PI).expect("valid lattice");
    Arc::new(HodgeOperators::new(Arc::new(mesh)).expect("operators"))
}

/// ε sin x dy sampled on the n×n torus.
pub fn sin_system(n: usize, eps: f64) -> MagneticSystem {
    let space = ModelSpace::FlatTorus { periods: vec![2.0 * PI; 2] };
    MagneticSystem::on_mesh(space, AnalyticForm::SinDy { eps }, torus_ops(n)).expect("sampled form")
}

pub fn h2_uniform(b: f64) -> MagneticSystem {
    MagneticSystem::analytic(ModelSpace::Hyperbolic { dim: 2 }, AnalyticForm::UniformFieldH2 { b })
}
