use std::f64::consts::PI;
use std::sync::Arc;

use coexact::dec::{self, hodge_decompose, inner_product, random_cochain, Cochain, HodgeOperators};
use coexact::geometry::{bcc_torus_3d, flat_torus_2d, icosphere, ModelSpace, SimplicialMesh};
use coexact::isoperimetric::{
    cycle_from_path, minimal_spanning_chain, polyline_path, refine_cycle, refine_surface, stokes_check,
};
use coexact::magflow::{comass_estimate, integrate, reversibility_defect, FlowOptions};
use coexact::mane::{critical_value_hamiltonian, random_point, strict_critical_value, LinfOptions};
use coexact::spectral::mvi_ratio;
use coexact::{AnalyticForm, MagneticSystem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn torus_ops(n: usize) -> Arc<HodgeOperators> {
    let mesh = flat_torus_2d(n, n, 2.0 * PI, 2.0 * PI).unwrap();
    Arc::new(HodgeOperators::new(Arc::new(mesh)).unwrap())
}

fn torus2() -> ModelSpace {
    ModelSpace::FlatTorus { periods: vec![2.0 * PI; 2] }
}

fn spaces() -> Vec<ModelSpace> {
    vec![
        torus2(),
        ModelSpace::FlatTorus { periods: vec![1.0, 2.0, 3.0] },
        ModelSpace::Euclidean { dim: 2 },
        ModelSpace::Hyperbolic { dim: 2 },
        ModelSpace::RoundSphere { dim: 2, radius: 1.5 },
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn euler_characteristics() {
    for n in [3, 5, 8] {
        assert_eq!(flat_torus_2d(n, 2 * n, 1.0, 2.0).unwrap().euler_characteristic(), 0);
        assert_eq!(bcc_torus_3d(n, 1.0).unwrap().euler_characteristic(), 0);
    }
    for level in 0..4 {
        assert_eq!(icosphere(level, 1.0).unwrap().euler_characteristic(), 2);
    }
    assert_eq!(torus2().euler_characteristic(), Some(0));
    assert_eq!(ModelSpace::RoundSphere { dim: 2, radius: 1.0 }.euler_characteristic(), Some(2));
}

#[test]
fn distance_is_a_metric_on_random_triples() {
    for space in spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = random_point(&space, &mut rng);
            let y = random_point(&space, &mut rng);
            let z = random_point(&space, &mut rng);
            let dxy = space.distance(&x, &y).unwrap();
            let dyx = space.distance(&y, &x).unwrap();
            let dyz = space.distance(&y, &z).unwrap();
            let dxz = space.distance(&x, &z).unwrap();
            let scale = 1.0 + dxy.max(dyz).max(dxz);
            assert!((dxy - dyx).abs() <= 1e-9 * scale, "{space:?}: asymmetric {dxy} {dyx}");
            assert!(dxz <= dxy + dyz + 1e-9 * scale, "{space:?}: triangle {dxz} > {dxy} + {dyz}");
            assert!(space.distance(&x, &x).unwrap() <= 1e-7);
        }
    }
}

#[test]
fn flat_christoffel_symbols_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for space in [torus2(), ModelSpace::FlatTorus { periods: vec![1.0, 2.0, 3.0] }, ModelSpace::Euclidean { dim: 3 }] {
        for _ in 0..50 {
            let x = random_point(&space, &mut rng);
            for g in space.christoffel(&x).unwrap() {
                assert_eq!(g.amax(), 0.0);
            }
        }
    }
}

fn small_meshes() -> Vec<Arc<HodgeOperators>> {
    vec![
        torus_ops(6),
        Arc::new(HodgeOperators::new(Arc::new(icosphere(1, 1.0).unwrap())).unwrap()),
        Arc::new(HodgeOperators::new(Arc::new(bcc_torus_3d(3, 2.0 * PI).unwrap())).unwrap()),
    ]
}

fn codiff(ops: &HodgeOperators, c: &Cochain) -> Cochain {
    dec::codifferential(ops, c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_is_exactly_zero(seed in any::<u64>()) {
        for ops in small_meshes() {
            let mesh = ops.mesh();
            for p in 0..mesh.dim().saturating_sub(1) {
                let c = random_cochain(mesh, p, seed);
                let dd = dec::coboundary(&ops, &dec::coboundary(&ops, &c).unwrap()).unwrap();
                prop_assert!(dd.values.iter().all(|v| *v == 0.0), "degree {p}");
            }
        }
    }

    #[test]
    fn codifferential_squares_to_zero(seed in any::<u64>()) {
        for ops in small_meshes() {
            let mesh = ops.mesh();
            for p in 2..=mesh.dim() {
                let c = random_cochain(mesh, p, seed);
                let once = codiff(&ops, &c);
                let twice = codiff(&ops, &once);
                prop_assert!(max_abs(&twice.values) <= 1e-12 * (1.0 + max_abs(&once.values)) * mesh.count(p) as f64);
            }
        }
    }

    #[test]
    fn codifferential_is_adjoint_to_d(seed in any::<u64>()) {
        for ops in small_meshes() {
            let mesh = ops.mesh();
            for p in 0..mesh.dim() {
                let a = random_cochain(mesh, p, seed);
                let b = random_cochain(mesh, p + 1, seed ^ 0x5a5a);
                let lhs = inner_product(&ops, &dec::coboundary(&ops, &a).unwrap(), &b).unwrap();
                let rhs = inner_product(&ops, &a, &codiff(&ops, &b)).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0), "p={p}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn hodge_decomposition_is_a_projection(seed in any::<u64>()) {
        let ops = torus_ops(8);
        let omega = random_cochain(ops.mesh(), 1, seed);
        let parts = hodge_decompose(&ops, &omega).unwrap();
        let sum = parts.exact.add(&parts.coexact).unwrap().add(&parts.harmonic).unwrap();
        prop_assert!(max_abs(&sum.sub(&omega).unwrap().values) <= 1e-10 * (1.0 + max_abs(&omega.values)));
        let again = hodge_decompose(&ops, &parts.coexact).unwrap();
        let scale = 1.0 + max_abs(&parts.coexact.values);
        prop_assert!(max_abs(&again.coexact.sub(&parts.coexact).unwrap().values) <= 1e-10 * scale);
        prop_assert!(max_abs(&again.exact.values) <= 1e-10 * scale);
        prop_assert!(max_abs(&again.harmonic.values) <= 1e-10 * scale);
    }

    #[test]
    fn mvi_ratio_is_scale_invariant(seed in any::<u64>(), c in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64]) {
        let ops = torus_ops(6);
        let omega = random_cochain(ops.mesh(), 1, seed);
        let r = mvi_ratio(&ops, &omega).unwrap();
        let rc = mvi_ratio(&ops, &omega.scaled(c)).unwrap();
        prop_assert!((r - rc).abs() <= 1e-12 * r);
    }
}

fn sin_system(ops: &Arc<HodgeOperators>, eps: f64) -> MagneticSystem {
    MagneticSystem::on_mesh(torus2(), AnalyticForm::SinDy { eps }, ops.clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn strict_value_never_exceeds_plain(eps in 0.1..1.0f64, a in -0.5..0.5f64) {
        let ops = torus_ops(8);
        let form = AnalyticForm::Constant { coeffs: vec![a, eps] };
        let sys = MagneticSystem::on_mesh(torus2(), form, ops).unwrap();
        let opts = LinfOptions::default();
        let plain = critical_value_hamiltonian(&sys, &opts).unwrap().c;
        let strict = strict_critical_value(&sys, &opts).unwrap().c;
        prop_assert!(strict <= plain + 1e-6, "{strict} > {plain}");
        let sys = sin_system(&torus_ops(8), eps);
        let plain = critical_value_hamiltonian(&sys, &opts).unwrap().c;
        let strict = strict_critical_value(&sys, &opts).unwrap().c;
        prop_assert!(strict <= plain + 1e-6, "{strict} > {plain}");
    }

    #[test]
    fn critical_value_scales_quadratically(eps in 0.1..1.0f64) {
        let ops = torus_ops(8);
        let opts = LinfOptions::default();
        let c = critical_value_hamiltonian(&sin_system(&ops, eps), &opts).unwrap().c;
        for t in [0.5, 2.0] {
            let ct = critical_value_hamiltonian(&sin_system(&ops, t * eps), &opts).unwrap().c;
            prop_assert!((ct - t * t * c).abs() <= 1e-4 * ct + 1e-6, "t={t}: {ct} vs {}", t * t * c);
        }
    }
}

#[test]
fn strict_equals_plain_without_harmonic_forms() {
    let ops = Arc::new(HodgeOperators::new(Arc::new(icosphere(2, 1.0).unwrap())).unwrap());
    let space = ModelSpace::RoundSphere { dim: 2, radius: 1.0 };
    let sys = MagneticSystem::on_mesh(space, AnalyticForm::normalized_sphere_form(), ops).unwrap();
    let opts = LinfOptions::default();
    let plain = critical_value_hamiltonian(&sys, &opts).unwrap().c;
    let strict = strict_critical_value(&sys, &opts).unwrap().c;
    assert!((plain - strict).abs() <= 1e-6 * plain.max(1.0), "{plain} vs {strict}");
}

fn flow_systems() -> Vec<MagneticSystem> {
    vec![
        MagneticSystem::analytic(torus2(), AnalyticForm::SinDy { eps: 0.5 }),
        MagneticSystem::analytic(ModelSpace::Hyperbolic { dim: 2 }, AnalyticForm::UniformFieldH2 { b: 1.0 }),
        MagneticSystem::analytic(ModelSpace::Euclidean { dim: 2 }, AnalyticForm::PlaneUniform { b: 0.7 }),
        MagneticSystem::analytic(
            ModelSpace::Hyperbolic { dim: 2 },
            AnalyticForm::BumpH2 { center: [0.3, 1.2], radius: 1.0, angle: 0.4, amp: 0.8 },
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_is_reversible(seed in any::<u64>(), s in 0.2..3.0f64) {
        // the bump field is only C⁰, which costs RK4 its order near the rim
        let opts = FlowOptions { step: 1e-3, ..Default::default() };
        for sys in flow_systems() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = match sys.space() {
                ModelSpace::Hyperbolic { .. } => vec![0.0, 1.0],
                space => random_point(space, &mut rng),
            };
            let theta = rand::Rng::gen_range(&mut rng, 0.0..2.0 * PI);
            let unit = sys.speed(&x, &[theta.cos(), theta.sin()]).unwrap();
            let v = vec![s * theta.cos() / unit, s * theta.sin() / unit];
            // fixed arc length: the curved flows separate orbits like e^{st}
            let defect = reversibility_defect(&sys, &x, &v, 10.0 / s.max(1.0), &opts).unwrap();
            prop_assert!(defect <= 1e-6, "{:?}: {defect}", sys.space());
        }
    }

    #[test]
    fn lorentz_force_is_bounded_and_orthogonal(seed in any::<u64>(), s in 0.1..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sys in flow_systems() {
            let space = sys.space().clone();
            for _ in 0..20 {
                let x = random_point(&space, &mut rng);
                let theta = rand::Rng::gen_range(&mut rng, 0.0..2.0 * PI);
                let v = vec![s * theta.cos(), s * theta.sin()];
                let y = sys.lorentz_force(&x, &v).unwrap();
                let ny = space.norm(&x, &y).unwrap();
                let nv = space.norm(&x, &v).unwrap();
                prop_assert!(ny <= sys.d_bound() * nv * (1.0 + 1e-12) + 1e-12, "{space:?}: {ny} > {} {nv}", sys.d_bound());
                let g = space.metric_tensor(&x).unwrap();
                let inner = g[(0, 0)] * y[0] * v[0] + g[(1, 1)] * y[1] * v[1] + g[(0, 1)] * (y[0] * v[1] + y[1] * v[0]);
                prop_assert!(inner.abs() <= 1e-12 * (1.0 + ny * nv));
            }
        }
    }
}

#[test]
fn orbit_averages_stay_below_the_sup_norm() {
    let opts = FlowOptions::default();
    for sys in flow_systems() {
        if !sys.a_bound().is_finite() {
            continue;
        }
        for s in [0.3, 1.0, 2.5] {
            let est = comass_estimate(&sys, s, 12, 40.0, &opts).unwrap();
            for v in &est.per_orbit {
                assert!(*v <= sys.a_bound() * (1.0 + 1e-9), "{:?} s={s}: {v} > {}", sys.space(), sys.a_bound());
            }
        }
    }
}

#[test]
fn integration_is_deterministic() {
    let sys = &flow_systems()[0];
    let opts = FlowOptions::default();
    let a = integrate(sys, &[1.0, 2.0], &[0.3, 0.4], 30.0, &opts).unwrap();
    let b = integrate(sys, &[1.0, 2.0], &[0.3, 0.4], 30.0, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

fn triangle_cycle(mesh: &SimplicialMesh, corners: &[Vec<f64>]) -> Cochain {
    let path = polyline_path(mesh, corners).unwrap();
    cycle_from_path(mesh, &path).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refinement_never_increases_minimal_mass(
        pts in proptest::collection::vec((1.5..3.5f64, 1.5..3.5f64), 3..5),
    ) {
        let ops = torus_ops(8);
        let corners: Vec<Vec<f64>> = pts.iter().map(|(x, y)| vec![*x, *y]).collect();
        let cycle = triangle_cycle(ops.mesh(), &corners);
        prop_assume!(cycle.values.iter().any(|v| *v != 0.0));
        let coarse = minimal_spanning_chain(&ops, &cycle).unwrap();
        let (fine, halves) = refine_surface(ops.mesh()).unwrap();
        let fine_cycle = refine_cycle(&fine, &halves, &cycle).unwrap();
        let fine_ops = HodgeOperators::new(Arc::new(fine)).unwrap();
        let refined = minimal_spanning_chain(&fine_ops, &fine_cycle).unwrap();
        prop_assert!(refined.mass <= coarse.mass + 1e-6, "{} > {}", refined.mass, coarse.mass);
        prop_assert!(coarse.duality_gap <= 1e-6 * coarse.mass.max(1.0));
        prop_assert!(refined.duality_gap <= 1e-6 * refined.mass.max(1.0));
    }

    #[test]
    fn stokes_holds_on_spanning_chains(
        pts in proptest::collection::vec((1.5..3.5f64, 1.5..3.5f64), 3..5),
        seed in any::<u64>(),
    ) {
        let ops = torus_ops(8);
        let corners: Vec<Vec<f64>> = pts.iter().map(|(x, y)| vec![*x, *y]).collect();
        let cycle = triangle_cycle(ops.mesh(), &corners);
        prop_assume!(cycle.values.iter().any(|v| *v != 0.0));
        let chain = minimal_spanning_chain(&ops, &cycle).unwrap();
        let omega = random_cochain(ops.mesh(), 1, seed);
        prop_assert!(stokes_check(&ops, &omega, &chain).unwrap() <= 1e-12);
    }
}
