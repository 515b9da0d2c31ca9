//! Least-mass real 2-chains bounding null-homologous edge cycles on closed
//! surfaces, the discrete Stokes identity, the per-loop Cheeger-type
//! inequality and a length-over-area estimate for loop families.
//!
//! On a closed connected oriented surface the 2-chains with a given boundary
//! form a line c_p + t·[M] through any particular solution, so the L¹
//! problem min Σ a_σ|c_σ| is one-dimensional: its optimum is a weighted
//! median. A dual certificate y with |d y|_σ ≤ a_σ is built from the
//! subgradient at the optimum and gives the duality gap.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dec::{self, Cochain, HodgeOperators};
use crate::error::{Error, Result};
use crate::geometry::SimplicialMesh;
use crate::linalg;
use crate::mane::MagneticSystem;

#[derive(Clone, Debug, Serialize)]
pub struct SpanningChain {
    /// Coefficient per 2-simplex in the mesh orientation.
    pub coeffs: Vec<f64>,
    /// Boundary cycle, one value per edge.
    pub cycle: Vec<f64>,
    pub mass: f64,
    /// Dual objective ⟨γ, y⟩ of the feasible certificate.
    pub dual: f64,
    pub duality_gap: f64,
    /// max_e |(∂c − γ)_e|.
    pub boundary_defect: f64,
}

fn require_surface(mesh: &SimplicialMesh) -> Result<()> {
    if mesh.dim() != 2 {
        return Err(Error::Unsupported(format!("spanning chains on a {}-dimensional mesh", mesh.dim())));
    }
    Ok(())
}

/// ∂c as an edge vector: (d₁)ᵀc.
pub fn boundary(mesh: &SimplicialMesh, chain: &[f64]) -> Vec<f64> {
    mesh.coboundary_matrix(1).mul_t_vec(chain)
}

/// Edge cycle of the closed vertex path v₀ → v₁ → … → v₀.
pub fn cycle_from_path(mesh: &SimplicialMesh, path: &[usize]) -> Result<Cochain> {
    let mut values = vec![0.0; mesh.count(1)];
    for i in 0..path.len() {
        let (a, b) = (path[i], path[(i + 1) % path.len()]);
        let (e, s) = mesh
            .oriented_edge(a, b)
            .ok_or_else(|| Error::InvalidMesh(format!("vertices {a} and {b} are not joined by an edge")))?;
        values[e] += s;
    }
    Cochain::from_values(mesh, 1, values)
}

/// Closed edge path through the vertices nearest to the given corners,
/// walking greedily along edges between consecutive corners. Returns the
/// vertex path.
pub fn polyline_path(mesh: &SimplicialMesh, corners: &[Vec<f64>]) -> Result<Vec<usize>> {
    if corners.len() < 2 {
        return Err(Error::EmptyFamily);
    }
    let nv = mesh.count(0);
    let mut nbrs = vec![Vec::new(); nv];
    for e in mesh.simplices(1) {
        nbrs[e[0]].push(e[1]);
        nbrs[e[1]].push(e[0]);
    }
    let nearest = |p: &[f64]| -> usize {
        (0..nv)
            .min_by(|&a, &b| {
                image_dist(mesh, &mesh.vertices()[a], p).total_cmp(&image_dist(mesh, &mesh.vertices()[b], p))
            })
            .unwrap()
    };
    let mut path = Vec::new();
    let ids: Vec<usize> = corners.iter().map(|c| nearest(c)).collect();
    for k in 0..ids.len() {
        let (mut cur, target) = (ids[k], ids[(k + 1) % ids.len()]);
        // position of the target relative to the walk, tracked in the lift
        let mut remaining = mesh.displacement(cur, target);
        let mut guard = 0;
        while linalg::norm(&remaining) > 1e-9 {
            path.push(cur);
            let next = *nbrs[cur]
                .iter()
                .min_by(|&&a, &&b| {
                    let ra: Vec<f64> = remaining.iter().zip(mesh.displacement(cur, a)).map(|(r, d)| r - d).collect();
                    let rb: Vec<f64> = remaining.iter().zip(mesh.displacement(cur, b)).map(|(r, d)| r - d).collect();
                    linalg::norm(&ra).total_cmp(&linalg::norm(&rb))
                })
                .unwrap();
            let d = mesh.displacement(cur, next);
            remaining.iter_mut().zip(&d).for_each(|(r, d)| *r -= d);
            cur = next;
            guard += 1;
            if guard > nv {
                return Err(Error::InvalidMesh("edge walk did not reach its target".into()));
            }
        }
    }
    Ok(path)
}

fn image_dist(mesh: &SimplicialMesh, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut d = x - y;
            if let Some(l) = mesh.period().and_then(|p| p.get(i)).filter(|l| l.is_finite()) {
                d -= l * (d / l).round();
            }
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Signed area enclosed by a closed vertex path, from the shoelace formula
/// on its lift.
pub fn enclosed_area(mesh: &SimplicialMesh, path: &[usize]) -> f64 {
    let mut p = vec![0.0, 0.0];
    let mut twice = 0.0;
    for i in 0..path.len() {
        let d = mesh.displacement(path[i], path[(i + 1) % path.len()]);
        twice += p[0] * d[1] - p[1] * d[0];
        p[0] += d[0];
        p[1] += d[1];
    }
    0.5 * twice
}

/// Checks d₀ᵀγ = 0 and zero pairing with every harmonic cochain.
pub fn check_null_homologous(ops: &HodgeOperators, cycle: &Cochain, basis: &[Cochain]) -> Result<()> {
    let mesh = ops.mesh();
    let div = mesh.coboundary_matrix(0).mul_t_vec(&cycle.values);
    let scale = cycle.values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if let Some(v) = div.iter().map(|v| v.abs()).max_by(|a, b| a.total_cmp(b)) {
        if v > 1e-9 * scale {
            return Err(Error::BoundaryMismatch(v));
        }
    }
    for (k, h) in basis.iter().enumerate() {
        let pairing = linalg::dot(&cycle.values, &h.values);
        let hmax = h.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if pairing.abs() > 1e-9 * scale * hmax.max(1e-300) {
            return Err(Error::NotNullHomologous { index: k, pairing });
        }
    }
    Ok(())
}

/// Particular solution of ∂c = γ by elimination along a breadth-first tree
/// of the dual graph (faces joined through shared edges); the root face gets
/// 0. Exact in floating point for integer cycles.
fn tree_solution(mesh: &SimplicialMesh, gamma: &[f64]) -> Result<Vec<f64>> {
    let nf = mesh.count(2);
    let ne = mesh.count(1);
    let d1 = mesh.coboundary_matrix(1);
    let mut edge_faces: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ne];
    for f in 0..nf {
        for (e, s) in d1.row(f) {
            edge_faces[e].push((f, s));
        }
    }
    let mut c = vec![f64::NAN; nf];
    let mut queue = VecDeque::new();
    for root in 0..nf {
        if !c[root].is_nan() {
            continue;
        }
        c[root] = 0.0;
        queue.push_back(root);
        while let Some(f) = queue.pop_front() {
            for (e, _) in d1.row(f) {
                let faces = &edge_faces[e];
                if faces.len() != 2 {
                    continue;
                }
                let (g, sg) = if faces[0].0 == f { faces[1] } else { faces[0] };
                if !c[g].is_nan() {
                    continue;
                }
                let sf = if faces[0].0 == f { faces[0].1 } else { faces[1].1 };
                // s_f c_f + s_g c_g = γ_e
                c[g] = (gamma[e] - sf * c[f]) / sg;
                queue.push_back(g);
            }
        }
    }
    Ok(c)
}

fn weighted_median(points: &mut [(f64, f64)]) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = points.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for p in points.iter() {
        acc += p.1;
        if acc >= 0.5 * total {
            return p.0;
        }
    }
    points.last().map(|p| p.0).unwrap_or(0.0)
}

/// Least-mass real 2-chain with boundary γ, with a dual certificate.
pub fn minimal_spanning_chain(ops: &HodgeOperators, cycle: &Cochain) -> Result<SpanningChain> {
    let mesh = ops.mesh();
    require_surface(mesh)?;
    let basis = dec::harmonic_basis(ops)?;
    check_null_homologous(ops, cycle, &basis)?;
    let gamma = &cycle.values;
    let area = mesh.volumes(2);
    let nf = mesh.count(2);
    // top simplices carry the coherent orientation, so [M] is all ones
    let orient = vec![1.0; nf];
    let cp = tree_solution(mesh, gamma)?;
    let defect0 = max_abs_diff(&boundary(mesh, &cp), gamma);
    let scale = gamma.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if defect0 > 1e-9 * scale {
        return Err(Error::BoundaryMismatch(defect0));
    }
    // Σ a|cp + t o| = Σ a|o cp + t|: weighted median of −o cp
    let mut pts: Vec<(f64, f64)> = (0..nf).map(|f| (-orient[f] * cp[f], area[f])).collect();
    let t = weighted_median(&mut pts);
    let c: Vec<f64> = (0..nf).map(|f| cp[f] + t * orient[f]).collect();
    let mass: f64 = (0..nf).map(|f| area[f] * c[f].abs()).sum();
    let boundary_defect = max_abs_diff(&boundary(mesh, &c), gamma);

    // subgradient z with Σ o z = 0, then y solving d₁y = z
    let cmax = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let zero: Vec<bool> = c.iter().map(|v| v.abs() <= 1e-12 * cmax.max(1e-300)).collect();
    let mut z: Vec<f64> = (0..nf).map(|f| if zero[f] { 0.0 } else { area[f] * c[f].signum() }).collect();
    let s: f64 = (0..nf).map(|f| orient[f] * z[f]).sum();
    let free: f64 = (0..nf).filter(|&f| zero[f]).map(|f| area[f]).sum();
    if free > 0.0 {
        let theta = (-s / free).clamp(-1.0, 1.0);
        for f in 0..nf {
            if zero[f] {
                z[f] = area[f] * orient[f] * theta;
            }
        }
    }
    let y = face_potential(mesh, &z, &orient);
    let dy = mesh.coboundary_matrix(1).mul_vec(&y);
    let rho = (0..nf).map(|f| dy[f].abs() / area[f]).fold(1.0, f64::max);
    let dual = linalg::dot(gamma, &y) / rho;
    Ok(SpanningChain {
        coeffs: c,
        cycle: gamma.clone(),
        mass,
        dual,
        duality_gap: (mass - dual).max(0.0),
        boundary_defect,
    })
}

/// y = d₁ᵀφ with d₁d₁ᵀφ = z, z orthogonal to the orientation class.
fn face_potential(mesh: &SimplicialMesh, z: &[f64], orient: &[f64]) -> Vec<f64> {
    let d1 = mesh.coboundary_matrix(1);
    let nf = z.len();
    let on = (nf as f64).sqrt();
    let ohat: Vec<f64> = orient.iter().map(|o| o / on).collect();
    let mut rhs = z.to_vec();
    let proj = linalg::dot(&rhs, &ohat);
    linalg::axpy(-proj, &ohat, &mut rhs);
    let mut phi = vec![0.0; nf];
    let apply = |x: &[f64]| d1.mul_vec(&d1.mul_t_vec(x));
    linalg::conjugate_gradient(apply, &rhs, &mut phi, None, 1e-14, 20 * nf);
    d1.mul_t_vec(&phi)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// |⟨ω, γ⟩ − ⟨dω, c⟩| relative to Σ|ω_e γ_e| (at least 1).
pub fn stokes_check(ops: &HodgeOperators, omega: &Cochain, chain: &SpanningChain) -> Result<f64> {
    let mesh = ops.mesh();
    let defect = max_abs_diff(&boundary(mesh, &chain.coeffs), &chain.cycle);
    if defect > 1e-9 {
        return Err(Error::BoundaryMismatch(defect));
    }
    let domega = dec::coboundary(ops, omega)?;
    let lhs = linalg::dot(&omega.values, &chain.cycle);
    let rhs = linalg::dot(&domega.values, &chain.coeffs);
    let scale: f64 = omega.values.iter().zip(&chain.cycle).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1.0);
    Ok((lhs - rhs).abs() / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheegerCheck {
    pub length: f64,
    pub integral: f64,
    pub mass: f64,
    /// (1/ℓ)|∫_γ ω|.
    pub lhs: f64,
    /// D · mass / ℓ with D = max_σ |dω(σ)| / area(σ).
    pub rhs: f64,
    pub discrete_d: f64,
    /// Pointwise bound of the analytic field, when known.
    pub analytic_d: Option<f64>,
    pub slack: f64,
    pub holds: bool,
    pub duality_gap: f64,
    pub stokes_defect: f64,
}

pub fn loop_length(mesh: &SimplicialMesh, cycle: &Cochain) -> f64 {
    cycle.values.iter().enumerate().map(|(e, v)| v.abs() * mesh.edge_length(e)).sum()
}

/// Both sides of (1/ℓ)|∫_γ ω| ≤ ‖dω‖∞ · mass / ℓ with the least-mass chain.
pub fn cheeger_chain_check(sys: &MagneticSystem, cycle: &Cochain) -> Result<CheegerCheck> {
    let ops = sys.ops().ok_or_else(|| Error::Unsupported("cheeger_chain_check needs a mesh".into()))?;
    let omega = sys.omega().ok_or_else(|| Error::Unsupported("cheeger_chain_check needs ω on the mesh".into()))?;
    let mesh = ops.mesh();
    let chain = minimal_spanning_chain(ops, cycle)?;
    let stokes_defect = stokes_check(ops, omega, &chain)?;
    let domega = dec::coboundary(ops, omega)?;
    let area = mesh.volumes(2);
    let discrete_d = domega.values.iter().zip(area).map(|(w, a)| w.abs() / a).fold(0.0, f64::max);
    let length = loop_length(mesh, cycle);
    let integral = linalg::dot(&omega.values, &cycle.values);
    let lhs = integral.abs() / length;
    let rhs = discrete_d * chain.mass / length;
    let tol = 1e-12 * (1.0 + rhs);
    Ok(CheegerCheck {
        length,
        integral,
        mass: chain.mass,
        lhs,
        rhs,
        discrete_d,
        analytic_d: sys.d_bound().is_finite().then(|| sys.d_bound()),
        slack: rhs - lhs,
        holds: lhs <= rhs + tol,
        duality_gap: chain.duality_gap,
        stokes_defect,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Estimate {
    /// min over the family of ℓ / mass.
    pub ratio: f64,
    pub witness: usize,
    pub lengths: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Smallest length-to-mass ratio over a family of null-homologous loops.
pub fn h1_upper_estimate(ops: &HodgeOperators, family: &[Cochain]) -> Result<H1Estimate> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mesh = ops.mesh();
    let mut lengths = Vec::new();
    let mut masses = Vec::new();
    for c in family {
        lengths.push(loop_length(mesh, c));
        masses.push(minimal_spanning_chain(ops, c)?.mass);
    }
    let (witness, ratio) =
        lengths.iter().zip(&masses).map(|(l, m)| l / m).enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Ok(H1Estimate { ratio, witness, lengths, masses })
}

/// Midpoint subdivision of a surface mesh (each triangle into four) and the
/// map taking an edge cycle to its refinement.
pub fn refine_surface(mesh: &SimplicialMesh) -> Result<(SimplicialMesh, Vec<[(usize, usize); 2]>)> {
    require_surface(mesh)?;
    let nv = mesh.count(0);
    let mut vertices = mesh.vertices().to_vec();
    let period = mesh.period().map(|p| p.to_vec());
    let mut mid = vec![0usize; mesh.count(1)];
    for (e, ev) in mesh.simplices(1).iter().enumerate() {
        let d = mesh.displacement(ev[0], ev[1]);
        let mut p: Vec<f64> = mesh.vertices()[ev[0]].iter().zip(&d).map(|(a, d)| a + 0.5 * d).collect();
        if let Some(per) = &period {
            for (x, l) in p.iter_mut().zip(per) {
                if l.is_finite() {
                    *x = x.rem_euclid(*l);
                }
            }
        }
        mid[e] = nv + e;
        vertices.push(p);
    }
    let m = |a: usize, b: usize| mid[mesh.find(&[a, b]).unwrap()];
    let mut top = Vec::with_capacity(4 * mesh.count(2));
    for (f, s) in mesh.simplices(2).iter().enumerate() {
        // restore the user orientation before splitting
        let (a, b, c) = if mesh.top_orientation(f) > 0.0 { (s[0], s[1], s[2]) } else { (s[1], s[0], s[2]) };
        let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
        top.push(vec![a, ab, ca]);
        top.push(vec![ab, b, bc]);
        top.push(vec![ca, bc, c]);
        top.push(vec![ab, bc, ca]);
    }
    let fine = SimplicialMesh::new(2, vertices, top, period)?;
    let halves = mesh.simplices(1).iter().enumerate().map(|(e, ev)| [(ev[0], mid[e]), (mid[e], ev[1])]).collect();
    Ok((fine, halves))
}

/// Refinement of an edge cycle under `refine_surface`.
pub fn refine_cycle(fine: &SimplicialMesh, halves: &[[(usize, usize); 2]], cycle: &Cochain) -> Result<Cochain> {
    let mut values = vec![0.0; fine.count(1)];
    for (e, v) in cycle.values.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        for &(a, b) in &halves[e] {
            let (id, s) = fine.oriented_edge(a, b).ok_or_else(|| Error::InvalidMesh("missing refined edge".into()))?;
            values[id] += s * v;
        }
    }
    Cochain::from_values(fine, 1, values)
}

/// Chain as CSV rows `simplex,coefficient` (nonzero entries only).
pub fn write_chain_csv<W: Write>(chain: &SpanningChain, mut w: W) -> Result<()> {
    writeln!(w, "simplex,coefficient")?;
    for (i, c) in chain.coeffs.iter().enumerate() {
        if *c != 0.0 {
            writeln!(w, "{i},{c}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::AnalyticForm;
    use crate::geometry::{square_torus, ModelSpace};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(n: usize) -> Arc<HodgeOperators> {
        Arc::new(HodgeOperators::new(Arc::new(square_torus(n, 2.0 * PI).unwrap())).unwrap())
    }

    #[test]
    fn triangle_boundary_spans_the_triangle() {
        let ops = torus(8);
        let mesh = ops.mesh();
        let f = 5;
        let s = &mesh.simplices(2)[f];
        let path = if mesh.top_orientation(f) > 0.0 { vec![s[0], s[1], s[2]] } else { vec![s[1], s[0], s[2]] };
        let cyc = cycle_from_path(mesh, &path).unwrap();
        let chain = minimal_spanning_chain(&ops, &cyc).unwrap();
        assert!((chain.mass - mesh.volumes(2)[f]).abs() < 1e-12);
        assert!(chain.duality_gap <= 1e-6 * chain.mass);
        assert_eq!(chain.boundary_defect, 0.0);
    }

    #[test]
    fn small_loop_mass_is_enclosed_area() {
        let ops = torus(16);
        let mesh = ops.mesh();
        let corners = vec![vec![1.0, 1.0], vec![2.5, 1.0], vec![2.5, 2.5], vec![1.0, 2.5]];
        let path = polyline_path(mesh, &corners).unwrap();
        let cyc = cycle_from_path(mesh, &path).unwrap();
        let chain = minimal_spanning_chain(&ops, &cyc).unwrap();
        let area = enclosed_area(mesh, &path).abs();
        assert!(area > 1.0);
        assert!((chain.mass - area).abs() < 1e-6, "{} vs {}", chain.mass, area);
        assert!(chain.duality_gap <= 1e-6 * chain.mass, "{}", chain.duality_gap);
    }

    #[test]
    fn generator_loop_is_rejected() {
        let ops = torus(8);
        // the bottom row of the lattice, closed around the x-period
        let row: Vec<usize> = (0..8).collect();
        let gen = cycle_from_path(ops.mesh(), &row).unwrap();
        assert!(matches!(minimal_spanning_chain(&ops, &gen), Err(Error::NotNullHomologous { .. })));
    }

    #[test]
    fn stokes_and_cheeger_on_sin_form() {
        let ops = torus(16);
        let space = ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] };
        let sys = MagneticSystem::on_mesh(space, AnalyticForm::SinDy { eps: 0.5 }, ops.clone()).unwrap();
        let mesh = ops.mesh();
        let h = 0.6;
        let centred = |cx: f64| {
            let corners = vec![vec![cx - h, PI - h], vec![cx + h, PI - h], vec![cx + h, PI + h], vec![cx - h, PI + h]];
            cycle_from_path(mesh, &polyline_path(mesh, &corners).unwrap()).unwrap()
        };
        let rep = cheeger_chain_check(&sys, &centred(PI / 2.0)).unwrap();
        assert!(rep.holds && rep.stokes_defect <= 1e-12 && rep.lhs > 0.0, "{rep:?}");
        assert!(rep.discrete_d <= 0.5 + 1e-12);
        let zero = MagneticSystem::on_mesh(
            ModelSpace::FlatTorus { periods: vec![2.0 * PI; 2] },
            AnalyticForm::Zero,
            ops.clone(),
        )
        .unwrap();
        let rep0 = cheeger_chain_check(&zero, &centred(PI / 2.0)).unwrap();
        assert_eq!((rep0.lhs, rep0.rhs), (0.0, 0.0));
    }

    #[test]
    fn refinement_does_not_increase_mass() {
        let ops = torus(8);
        let mesh = ops.mesh();
        let corners = vec![vec![1.0, 1.0], vec![3.0, 1.0], vec![3.0, 3.0], vec![1.0, 3.0]];
        let cyc = cycle_from_path(mesh, &polyline_path(mesh, &corners).unwrap()).unwrap();
        let coarse = minimal_spanning_chain(&ops, &cyc).unwrap();
        let (fine, halves) = refine_surface(mesh).unwrap();
        let fine_cyc = refine_cycle(&fine, &halves, &cyc).unwrap();
        let fine_ops = HodgeOperators::new(Arc::new(fine)).unwrap();
        let chain = minimal_spanning_chain(&fine_ops, &fine_cyc).unwrap();
        assert!(chain.mass <= coarse.mass + 1e-6);
    }

    #[test]
    fn empty_family_is_an_error() {
        assert!(matches!(h1_upper_estimate(&torus(6), &[]), Err(Error::EmptyFamily)));
    }
}
