//! Closed oriented simplicial manifolds with a geometric realization.
//!
//! Every simplex of dimension below the top is stored with its vertices in
//! increasing order and that order defines its orientation. Top simplices keep
//! an extra sign so that the manifold is consistently oriented. Periodic
//! charts (tori) are handled with the minimum-image convention, which
//! requires at least three cells across every period.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Csr;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    id: u64,
    dim: usize,
    ambient: usize,
    vertices: Vec<Vec<f64>>,
    period: Option<Vec<f64>>,
    /// `simplices[p]` lists the sorted vertex tuples of the p-simplices.
    simplices: Vec<Vec<Vec<usize>>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    top_sign: Vec<f64>,
    /// `coboundary[p]` maps p-cochains to (p+1)-cochains.
    coboundary: Vec<Csr>,
    volumes: Vec<Vec<f64>>,
    dual_volumes: Vec<Vec<f64>>,
    well_centered: Vec<bool>,
}

/// Summary statistics reported alongside results; not interpreted further.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MeshQuality {
    pub min_edge: f64,
    pub max_edge: f64,
    pub well_centered_fraction: f64,
    pub min_dual_edge_ratio: f64,
}

fn permutation_sign(v: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// k-volume of the simplex spanned by `pts` via the Gram determinant.
pub(crate) fn simplex_volume(pts: &[Vec<f64>]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let e: Vec<Vec<f64>> = pts[1..].iter().map(|p| sub(p, &pts[0])).collect();
    let g = DMatrix::from_fn(k, k, |i, j| crate::linalg::dot(&e[i], &e[j]));
    let det = g.determinant().max(0.0);
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    det.sqrt() / fact
}

/// Circumcenter of the simplex within its affine span.
pub(crate) fn circumcenter(pts: &[Vec<f64>]) -> Vec<f64> {
    let k = pts.len() - 1;
    if k == 0 {
        return pts[0].clone();
    }
    let e: Vec<Vec<f64>> = pts[1..].iter().map(|p| sub(p, &pts[0])).collect();
    let g = DMatrix::from_fn(k, k, |i, j| crate::linalg::dot(&e[i], &e[j]));
    let rhs = DVector::from_fn(k, |i, _| 0.5 * g[(i, i)]);
    let coef = g.lu().solve(&rhs).expect("degenerate simplex in circumcenter");
    let mut c = pts[0].clone();
    for (i, ei) in e.iter().enumerate() {
        crate::linalg::axpy(coef[i], ei, &mut c);
    }
    c
}

fn barycenter(pts: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; pts[0].len()];
    for p in pts {
        crate::linalg::axpy(1.0 / pts.len() as f64, p, &mut c);
    }
    c
}

/// All k-element subsets of `v` (kept in input order).
fn combinations(v: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > v.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| v[i]).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + v.len() - k {
                break;
            }
            if i == 0 && idx[0] == v.len() - k {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl SimplicialMesh {
    /// Builds a mesh from top-simplex vertex tuples (orientation given by the
    /// tuple order). Validates closedness, consistent orientation and positive
    /// volumes.
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, top: Vec<Vec<usize>>, period: Option<Vec<f64>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let ambient = vertices.first().map(|v| v.len()).unwrap_or(0);
        if ambient < dim {
            return Err(Error::InvalidMesh(format!("ambient dimension {ambient} below {dim}")));
        }
        if vertices.iter().any(|v| v.len() != ambient || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidMesh("inconsistent or non-finite vertex coordinates".into()));
        }
        if let Some(p) = &period {
            if p.len() != ambient || p.iter().any(|&x| x.is_finite() && x <= 0.0) {
                return Err(Error::InvalidMesh("period vector must be positive per axis".into()));
            }
        }
        let nv = vertices.len();
        for (t, s) in top.iter().enumerate() {
            if s.len() != dim + 1 || s.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("top simplex {t} malformed")));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!("top simplex {t} repeats a vertex")));
            }
        }

        let mut simplices: Vec<Vec<Vec<usize>>> = vec![Vec::new(); dim + 1];
        let mut lookup: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); dim + 1];
        simplices[0] = (0..nv).map(|i| vec![i]).collect();
        for i in 0..nv {
            lookup[0].insert(vec![i], i);
        }
        let mut top_sign = Vec::with_capacity(top.len());
        for s in &top {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            for p in 1..dim {
                for face in combinations(&sorted, p + 1) {
                    if !lookup[p].contains_key(&face) {
                        lookup[p].insert(face.clone(), simplices[p].len());
                        simplices[p].push(face);
                    }
                }
            }
            if lookup[dim].insert(sorted.clone(), simplices[dim].len()).is_some() {
                return Err(Error::InvalidMesh(format!("duplicate top simplex {sorted:?}")));
            }
            simplices[dim].push(sorted);
            top_sign.push(permutation_sign(s));
        }

        let mut coboundary = Vec::with_capacity(dim);
        for p in 0..dim {
            let mut trips = Vec::new();
            for (row, s) in simplices[p + 1].iter().enumerate() {
                let orient = if p + 1 == dim { top_sign[row] } else { 1.0 };
                for i in 0..s.len() {
                    let mut face = s.clone();
                    face.remove(i);
                    let col = lookup[p][&face];
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    trips.push((row, col, sign * orient));
                }
            }
            coboundary.push(Csr::from_triplets(simplices[p + 1].len(), simplices[p].len(), &trips));
        }

        let mut mesh = SimplicialMesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            ambient,
            vertices,
            period,
            simplices,
            lookup,
            top_sign,
            coboundary,
            volumes: Vec::new(),
            dual_volumes: Vec::new(),
            well_centered: Vec::new(),
        };
        mesh.check_closed_oriented()?;
        mesh.compute_geometry()?;
        Ok(mesh)
    }

    fn check_closed_oriented(&self) -> Result<()> {
        let n = self.dim;
        let d = &self.coboundary[n - 1];
        let mut incidence = vec![0usize; self.simplices[n - 1].len()];
        let mut total = vec![0.0; self.simplices[n - 1].len()];
        for r in 0..d.nrows {
            for (c, v) in d.row(r) {
                incidence[c] += 1;
                total[c] += v;
            }
        }
        for (f, (&k, &t)) in incidence.iter().zip(&total).enumerate() {
            if k != 2 {
                return Err(Error::InvalidMesh(format!(
                    "{}-simplex {f} is a face of {k} top simplices (closed manifolds need 2)",
                    n - 1
                )));
            }
            if t != 0.0 {
                return Err(Error::InvalidMesh(format!("top simplices induce the same orientation on face {f}")));
            }
        }
        Ok(())
    }

    /// Vertex coordinates of a simplex, unwrapped around its first vertex.
    pub fn simplex_points(&self, verts: &[usize]) -> Vec<Vec<f64>> {
        let p0 = &self.vertices[verts[0]];
        verts
            .iter()
            .map(|&v| {
                let mut d = sub(&self.vertices[v], p0);
                if let Some(per) = &self.period {
                    for (x, &l) in d.iter_mut().zip(per) {
                        if l.is_finite() {
                            *x -= l * (*x / l).round();
                        }
                    }
                }
                d.iter().zip(p0).map(|(a, b)| a + b).collect()
            })
            .collect()
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let n = self.dim;
        let mut volumes = vec![Vec::new(); n + 1];
        for p in 0..=n {
            volumes[p] = Vec::with_capacity(self.simplices[p].len());
            for (id, s) in self.simplices[p].iter().enumerate() {
                let v = simplex_volume(&self.simplex_points(s));
                let scale = if p == 0 { 1.0 } else { self.edge_scale() };
                if !(v > 1e-14 * scale.powi(p as i32)) {
                    return Err(Error::DegenerateSimplex { dim: p, id, volume: v });
                }
                volumes[p].push(v);
            }
        }
        let mut dual = vec![Vec::new(); n + 1];
        for p in 0..=n {
            dual[p] = vec![0.0; self.simplices[p].len()];
        }
        let mut well_centered = Vec::with_capacity(self.simplices[n].len());
        for t in 0..self.simplices[n].len() {
            let verts = self.simplices[n][t].clone();
            let pts = self.simplex_points(&verts);
            let contrib = self.elementary_duals(&verts, &pts, true);
            let ok = contrib.iter().all(|(_, _, v)| *v > 0.0);
            let contrib = if ok { contrib } else { self.elementary_duals(&verts, &pts, false) };
            well_centered.push(ok);
            for (p, id, v) in contrib {
                dual[p][id] += v;
            }
        }
        dual[n].iter_mut().for_each(|v| *v = 1.0);
        self.volumes = volumes;
        self.dual_volumes = dual;
        self.well_centered = well_centered;
        Ok(())
    }

    fn edge_scale(&self) -> f64 {
        let s = &self.simplices[1];
        if s.is_empty() {
            return 1.0;
        }
        let pts = self.simplex_points(&s[0]);
        dist(&pts[0], &pts[1])
    }

    /// Elementary dual cell volumes inside one top simplex, for every face
    /// dimension p < n. Circumcentric chains carry signs; barycentric ones
    /// are always positive.
    fn elementary_duals(&self, verts: &[usize], pts: &[Vec<f64>], circumcentric: bool) -> Vec<(usize, usize, f64)> {
        let n = self.dim;
        let local: Vec<usize> = (0..=n).collect();
        let center = |idx: &[usize]| -> Vec<f64> {
            let sub_pts: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
            if circumcentric {
                circumcenter(&sub_pts)
            } else {
                barycenter(&sub_pts)
            }
        };
        let mut out = Vec::new();
        for p in 0..n {
            for face in combinations(&local, p + 1) {
                let global: Vec<usize> = {
                    let mut g: Vec<usize> = face.iter().map(|&i| verts[i]).collect();
                    g.sort_unstable();
                    g
                };
                let id = self.lookup[p][&global];
                let rest: Vec<usize> = local.iter().copied().filter(|i| !face.contains(i)).collect();
                let mut total = 0.0;
                // every ordering of the remaining vertices is one flag
                for order in permutations(&rest) {
                    let mut chain = face.clone();
                    let mut centers = vec![center(&chain)];
                    let mut sign = 1.0;
                    let mut steps = Vec::new();
                    for &v in &order {
                        chain.push(v);
                        let c = center(&chain);
                        let prev = centers.last().unwrap();
                        let step = sub(&c, prev);
                        if circumcentric {
                            let toward = sub(&pts[v], prev);
                            if crate::linalg::dot(&step, &toward) < 0.0 {
                                sign = -sign;
                            }
                        }
                        steps.push(step);
                        centers.push(c);
                    }
                    let vol = if circumcentric {
                        let fact: f64 = (1..=steps.len()).map(|i| i as f64).product();
                        steps.iter().map(|s| crate::linalg::norm(s)).product::<f64>() / fact
                    } else {
                        simplex_volume(&centers)
                    };
                    total += sign * vol;
                }
                out.push((p, id, total));
            }
        }
        out
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }
    pub fn period(&self) -> Option<&[f64]> {
        self.period.as_deref()
    }
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
    pub fn count(&self, p: usize) -> usize {
        self.simplices[p].len()
    }
    pub fn simplices(&self, p: usize) -> &[Vec<usize>] {
        &self.simplices[p]
    }
    /// Index of the simplex with the given (unordered) vertex set.
    pub fn find(&self, verts: &[usize]) -> Option<usize> {
        let mut v = verts.to_vec();
        v.sort_unstable();
        self.lookup.get(v.len().wrapping_sub(1))?.get(&v).copied()
    }
    /// Index and orientation sign of the edge running from `a` to `b`.
    pub fn oriented_edge(&self, a: usize, b: usize) -> Option<(usize, f64)> {
        let id = self.find(&[a, b])?;
        Some((id, if a < b { 1.0 } else { -1.0 }))
    }
    pub fn top_orientation(&self, t: usize) -> f64 {
        self.top_sign[t]
    }
    pub fn coboundary_matrix(&self, p: usize) -> &Csr {
        &self.coboundary[p]
    }
    pub fn volumes(&self, p: usize) -> &[f64] {
        &self.volumes[p]
    }
    pub fn dual_volumes(&self, p: usize) -> &[f64] {
        &self.dual_volumes[p]
    }
    pub fn is_well_centered(&self, t: usize) -> bool {
        self.well_centered[t]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes[self.dim].iter().sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        (0..=self.dim).map(|p| if p % 2 == 0 { self.count(p) as i64 } else { -(self.count(p) as i64) }).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.volumes[1][e]
    }

    /// Displacement from vertex `a` to vertex `b` under the minimum-image rule.
    pub fn displacement(&self, a: usize, b: usize) -> Vec<f64> {
        let pts = self.simplex_points(&[a, b]);
        sub(&pts[1], &pts[0])
    }

    /// Gradients of the barycentric coordinates of top simplex `t`, one
    /// ambient vector per local vertex (in sorted vertex order).
    pub fn barycentric_gradients(&self, t: usize) -> Vec<Vec<f64>> {
        let verts = &self.simplices[self.dim][t];
        let pts = self.simplex_points(verts);
        let n = self.dim;
        let e: Vec<Vec<f64>> = pts[1..].iter().map(|p| sub(p, &pts[0])).collect();
        let g = DMatrix::from_fn(n, n, |i, j| crate::linalg::dot(&e[i], &e[j]));
        let ginv = g.try_inverse().expect("degenerate top simplex");
        let mut grads = vec![vec![0.0; self.ambient]; n + 1];
        for i in 0..n {
            for j in 0..n {
                crate::linalg::axpy(ginv[(i, j)], &e[j], &mut grads[i + 1]);
            }
        }
        let mut g0 = vec![0.0; self.ambient];
        for gi in &grads[1..] {
            crate::linalg::axpy(-1.0, gi, &mut g0);
        }
        grads[0] = g0;
        grads
    }

    /// Barycenter of top simplex `t` (in the unwrapped chart).
    pub fn top_barycenter(&self, t: usize) -> Vec<f64> {
        barycenter(&self.simplex_points(&self.simplices[self.dim][t]))
    }

    pub fn quality(&self) -> MeshQuality {
        let lens = &self.volumes[1];
        let min_edge = lens.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_edge = lens.iter().cloned().fold(0.0, f64::max);
        let wc = self.well_centered.iter().filter(|&&b| b).count() as f64 / self.well_centered.len().max(1) as f64;
        let min_ratio = (0..lens.len()).map(|e| self.dual_volumes[1][e] / lens[e]).fold(f64::INFINITY, f64::min);
        MeshQuality { min_edge, max_edge, well_centered_fraction: wc, min_dual_edge_ratio: min_ratio }
    }
}

fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_enumerates_subsets() {
        assert_eq!(combinations(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(&[1, 2, 3, 4], 4).len(), 1);
        assert_eq!(combinations(&[0, 1, 2, 3], 1).len(), 4);
    }

    #[test]
    fn circumcenter_of_right_triangle_is_hypotenuse_midpoint() {
        let c = circumcenter(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]);
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tetrahedron_boundary_is_a_sphere() {
        let v = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, -1.0], vec![-1.0, 1.0, -1.0], vec![-1.0, -1.0, 1.0]];
        let top = vec![vec![1, 2, 3], vec![0, 3, 2], vec![0, 1, 3], vec![0, 2, 1]];
        let m = SimplicialMesh::new(2, v, top, None).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        // dual areas of vertices partition the surface
        let s: f64 = m.dual_volumes(0).iter().sum();
        assert!((s - m.total_volume()).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_orientation() {
        let v = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, -1.0], vec![-1.0, 1.0, -1.0], vec![-1.0, -1.0, 1.0]];
        let top = vec![vec![1, 2, 3], vec![0, 2, 3], vec![0, 1, 3], vec![0, 2, 1]];
        assert!(matches!(SimplicialMesh::new(2, v, top, None), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_open_surface() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(SimplicialMesh::new(2, v, vec![vec![0, 1, 2]], None).is_err());
    }
}
