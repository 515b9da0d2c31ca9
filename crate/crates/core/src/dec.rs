//! Discrete exterior calculus on simplicial meshes: cochains, diagonal Hodge
//! stars, codifferentials, Hodge Laplacians and the Hodge decomposition of
//! 1-cochains.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::AnalyticForm;
use crate::geometry::SimplicialMesh;
use crate::linalg::{self, conjugate_gradient, CgOutcome, Csr};

/// One real value per oriented p-simplex of a specific mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub values: Vec<f64>,
    pub mesh_id: u64,
}

impl Cochain {
    pub fn zeros(mesh: &SimplicialMesh, degree: usize) -> Self {
        Cochain { degree, values: vec![0.0; mesh.count(degree)], mesh_id: mesh.id() }
    }

    pub fn from_values(mesh: &SimplicialMesh, degree: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.count(degree) {
            return Err(Error::InvalidMesh(format!(
                "{degree}-cochain needs {} values, got {}",
                mesh.count(degree),
                values.len()
            )));
        }
        Ok(Cochain { degree, values, mesh_id: mesh.id() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Cochain { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &Cochain) -> Result<Self> {
        self.compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Cochain { values, ..self.clone() })
    }

    pub fn sub(&self, other: &Cochain) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    fn compatible(&self, other: &Cochain) -> Result<()> {
        if self.mesh_id != other.mesh_id {
            return Err(Error::MeshMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, got: other.degree });
        }
        Ok(())
    }

    /// Value on the p-simplex with vertices in the given order: reversing the
    /// orientation negates the value.
    pub fn value_on(&self, mesh: &SimplicialMesh, verts: &[usize]) -> Option<f64> {
        let id = mesh.find(verts)?;
        let mut sorted = verts.to_vec();
        let mut sign = 1.0;
        for i in 0..sorted.len() {
            for j in 0..sorted.len() - 1 - i {
                if sorted[j] > sorted[j + 1] {
                    sorted.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        Some(sign * self.values[id])
    }
}

/// Assembled DEC operators of one mesh.
#[derive(Clone, Debug)]
pub struct HodgeOperators {
    mesh: Arc<SimplicialMesh>,
    star: Vec<Vec<f64>>,
    star_inv: Vec<Vec<f64>>,
    /// d₀ᵀ ⋆₁ d₀ on vertices.
    vertex_laplacian: Csr,
    /// d₁ ⋆₁⁻¹ d₁ᵀ on 2-simplices.
    face_operator: Csr,
    /// Per top simplex: (edge, (∇λ_b − ∇λ_a)/(n+1)) so that the Whitney
    /// interpolant at the barycenter is Σ x_e · vector.
    whitney: Vec<Vec<(usize, Vec<f64>)>>,
}

impl HodgeOperators {
    pub fn new(mesh: Arc<SimplicialMesh>) -> Result<Self> {
        let n = mesh.dim();
        if n < 2 {
            return Err(Error::Unsupported("DEC operators need a 2- or 3-manifold".into()));
        }
        let mut star: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut star_inv: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let s: Vec<f64> = mesh.dual_volumes(p).iter().zip(mesh.volumes(p)).map(|(d, v)| d / v).collect();
            if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::InvalidMesh(format!("Hodge star ⋆_{p} entry {i} is {v:e}")));
            }
            star_inv.push(s.iter().map(|v| 1.0 / v).collect());
            star.push(s);
        }
        let d0 = mesh.coboundary_matrix(0);
        let d1 = mesh.coboundary_matrix(1);
        let vertex_laplacian = d0.transpose().matmul(&d0.scaled(Some(&star[1]), None));
        let face_operator = d1.matmul(&d1.transpose().scaled(Some(&star_inv[1]), None));

        let whitney = (0..mesh.count(n))
            .map(|t| {
                let verts = &mesh.simplices(n)[t];
                let grads = mesh.barycentric_gradients(t);
                let mut entries = Vec::new();
                for a in 0..=n {
                    for b in a + 1..=n {
                        let e = mesh.find(&[verts[a], verts[b]]).expect("edge of top simplex");
                        let v: Vec<f64> =
                            grads[b].iter().zip(&grads[a]).map(|(gb, ga)| (gb - ga) / (n + 1) as f64).collect();
                        entries.push((e, v));
                    }
                }
                entries
            })
            .collect();
        Ok(HodgeOperators { mesh, star, star_inv, vertex_laplacian, face_operator, whitney })
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<SimplicialMesh> {
        self.mesh.clone()
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn d(&self, p: usize) -> &Csr {
        self.mesh.coboundary_matrix(p)
    }

    pub fn star(&self, p: usize) -> &[f64] {
        &self.star[p]
    }

    pub fn star_inv(&self, p: usize) -> &[f64] {
        &self.star_inv[p]
    }

    pub fn vertex_laplacian(&self) -> &Csr {
        &self.vertex_laplacian
    }

    pub fn face_operator(&self) -> &Csr {
        &self.face_operator
    }

    pub fn whitney_entries(&self, t: usize) -> &[(usize, Vec<f64>)] {
        &self.whitney[t]
    }

    /// Whitney interpolant of a 1-cochain at the barycenter of top simplex t.
    pub fn whitney_at(&self, t: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.ambient_dim()];
        for (e, v) in &self.whitney[t] {
            linalg::axpy(x[*e], v, &mut out);
        }
        out
    }

    /// d*_p = ⋆_{p−1}⁻¹ d_{p−1}ᵀ ⋆_p, the adjoint of d_{p−1}.
    pub fn codifferential_apply(&self, p: usize, x: &[f64]) -> Vec<f64> {
        assert!(p >= 1 && p <= self.dim());
        let sx: Vec<f64> = x.iter().zip(&self.star[p]).map(|(a, s)| a * s).collect();
        let mut y = self.d(p - 1).mul_t_vec(&sx);
        y.iter_mut().zip(&self.star_inv[p - 1]).for_each(|(a, s)| *a *= s);
        y
    }

    pub fn codifferential_matrix(&self, p: usize) -> Csr {
        self.d(p - 1).transpose().scaled(Some(&self.star_inv[p - 1]), Some(&self.star[p]))
    }

    /// Δ_p = d_{p−1} d*_p + d*_{p+1} d_p.
    pub fn laplacian_apply(&self, p: usize, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; x.len()];
        if p >= 1 {
            let down = self.d(p - 1).mul_vec(&self.codifferential_apply(p, x));
            linalg::axpy(1.0, &down, &mut y);
        }
        if p < n {
            let up = self.codifferential_apply(p + 1, &self.d(p).mul_vec(x));
            linalg::axpy(1.0, &up, &mut y);
        }
        y
    }

    pub fn laplacian_matrix(&self, p: usize) -> Csr {
        let n = self.dim();
        let size = self.mesh.count(p);
        let mut total = Csr::from_triplets(size, size, &[]);
        if p >= 1 {
            total = add_csr(&total, &self.d(p - 1).matmul(&self.codifferential_matrix(p)));
        }
        if p < n {
            total = add_csr(&total, &self.codifferential_matrix(p + 1).matmul(self.d(p)));
        }
        total
    }

    /// Writes d_p, ⋆_p and Δ_p as triplet files into `dir`.
    pub fn export_triplets(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut save = |name: String, m: &Csr| -> Result<()> {
            let path = dir.join(name);
            let f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            m.write_triplets(f)?;
            written.push(path);
            Ok(())
        };
        for p in 0..=self.dim() {
            if p < self.dim() {
                save(format!("d{p}.txt"), self.d(p))?;
            }
            save(format!("star{p}.txt"), &Csr::diagonal(&self.star[p]))?;
            save(format!("laplacian{p}.txt"), &self.laplacian_matrix(p))?;
        }
        Ok(written)
    }

    fn check(&self, c: &Cochain) -> Result<()> {
        if c.mesh_id != self.mesh.id() {
            return Err(Error::MeshMismatch);
        }
        if c.degree > self.dim() || c.values.len() != self.mesh.count(c.degree) {
            return Err(Error::DegreeMismatch { expected: self.mesh.count(c.degree), got: c.values.len() });
        }
        Ok(())
    }

    fn wrap(&self, degree: usize, values: Vec<f64>) -> Cochain {
        Cochain { degree, values, mesh_id: self.mesh.id() }
    }

    /// Solves d₀ᵀ⋆₁d₀ α = d₀ᵀ⋆₁ ω, so that d₀α is the ⋆-orthogonal projection
    /// of ω onto exact cochains.
    pub fn exact_potential(&self, omega: &[f64]) -> Result<(Vec<f64>, CgOutcome)> {
        let weighted: Vec<f64> = omega.iter().zip(&self.star[1]).map(|(a, s)| a * s).collect();
        let mut rhs = self.d(0).mul_t_vec(&weighted);
        // constants span the kernel; the rhs is in the range up to rounding
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
        if linalg::norm(&rhs) <= 1e-13 * linalg::norm(&weighted) {
            return Ok((vec![0.0; rhs.len()], CgOutcome { iterations: 0, residual: 0.0, converged: true }));
        }
        let diag: Vec<f64> = self.vertex_laplacian.diag_entries().iter().map(|v| 1.0 / v).collect();
        let mut alpha = vec![0.0; rhs.len()];
        let out = conjugate_gradient(
            |x| self.vertex_laplacian.mul_vec(x),
            &rhs,
            &mut alpha,
            Some(&diag),
            1e-13,
            20 * rhs.len() + 200,
        );
        if out.residual > 1e-10 {
            return Err(Error::NoConvergence {
                solver: "exact projection CG",
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        Ok((alpha, out))
    }

    /// Coexact component ⋆₁⁻¹d₁ᵀγ of ω with d₁⋆₁⁻¹d₁ᵀ γ = d₁ ω.
    pub fn coexact_component(&self, omega: &[f64]) -> Result<(Vec<f64>, CgOutcome)> {
        let rhs = self.d(1).mul_vec(omega);
        if linalg::norm(&rhs) <= 1e-13 * linalg::norm(omega) {
            return Ok((vec![0.0; omega.len()], CgOutcome { iterations: 0, residual: 0.0, converged: true }));
        }
        let diag: Vec<f64> = self.face_operator.diag_entries().iter().map(|v| 1.0 / v).collect();
        let mut gamma = vec![0.0; rhs.len()];
        let out = conjugate_gradient(
            |x| self.face_operator.mul_vec(x),
            &rhs,
            &mut gamma,
            Some(&diag),
            1e-13,
            20 * rhs.len() + 200,
        );
        if out.residual > 1e-10 {
            return Err(Error::NoConvergence {
                solver: "coexact projection CG",
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        let mut c = self.d(1).mul_t_vec(&gamma);
        c.iter_mut().zip(&self.star_inv[1]).for_each(|(a, s)| *a *= s);
        Ok((c, out))
    }
}

fn add_csr(a: &Csr, b: &Csr) -> Csr {
    let mut t = a.triplets();
    t.extend(b.triplets());
    Csr::from_triplets(a.nrows, a.ncols, &t)
}

pub fn coboundary(ops: &HodgeOperators, c: &Cochain) -> Result<Cochain> {
    ops.check(c)?;
    if c.degree >= ops.dim() {
        return Err(Error::DegreeMismatch { expected: ops.dim() - 1, got: c.degree });
    }
    Ok(ops.wrap(c.degree + 1, ops.d(c.degree).mul_vec(&c.values)))
}

pub fn codifferential(ops: &HodgeOperators, c: &Cochain) -> Result<Cochain> {
    ops.check(c)?;
    if c.degree == 0 {
        return Err(Error::DegreeMismatch { expected: 1, got: 0 });
    }
    Ok(ops.wrap(c.degree - 1, ops.codifferential_apply(c.degree, &c.values)))
}

/// ⟨a, b⟩ = aᵀ ⋆ b.
pub fn inner_product(ops: &HodgeOperators, a: &Cochain, b: &Cochain) -> Result<f64> {
    ops.check(a)?;
    a.compatible(b)?;
    Ok(linalg::wdot(ops.star(a.degree), &a.values, &b.values))
}

pub fn l2_norm(ops: &HodgeOperators, a: &Cochain) -> Result<f64> {
    Ok(inner_product(ops, a, a)?.sqrt())
}

/// Pointwise sup-norm surrogate. Degree 1 uses the Whitney interpolant at
/// top-simplex barycenters; other degrees divide by the simplex measure.
pub fn linf_norm(ops: &HodgeOperators, a: &Cochain) -> Result<f64> {
    ops.check(a)?;
    let mesh = ops.mesh();
    if a.degree == 1 {
        let mut best: f64 = 0.0;
        for t in 0..mesh.count(mesh.dim()) {
            best = best.max(linalg::norm(&ops.whitney_at(t, &a.values)));
        }
        return Ok(best);
    }
    Ok(a.values.iter().zip(mesh.volumes(a.degree)).map(|(v, m)| (v / m).abs()).fold(0.0, f64::max))
}

/// Samples a scalar function at the vertices.
pub fn sample_function(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> f64) -> Cochain {
    Cochain { degree: 0, values: mesh.vertices().iter().map(|v| f(v)).collect(), mesh_id: mesh.id() }
}

/// Integrates an analytic 1-form over every oriented edge.
pub fn sample_one_form(mesh: &SimplicialMesh, form: &AnalyticForm) -> Cochain {
    let values = mesh
        .simplices(1)
        .iter()
        .map(|e| {
            let pts = mesh.simplex_points(e);
            form.segment_integral(&pts[0], &pts[1])
        })
        .collect();
    Cochain { degree: 1, values, mesh_id: mesh.id() }
}

/// Seeded Gaussian-free random cochain with entries uniform in [−1, 1].
pub fn random_cochain(mesh: &SimplicialMesh, degree: usize, seed: u64) -> Cochain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.count(degree)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Cochain { degree, values, mesh_id: mesh.id() }
}

#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    pub exact: Cochain,
    pub coexact: Cochain,
    pub harmonic: Cochain,
    /// 0-cochain with exact = dα.
    pub potential: Cochain,
    pub exact_residual: f64,
    pub coexact_residual: f64,
}

/// ω = dα + d*β + h with ⋆-orthogonal summands.
pub fn hodge_decompose(ops: &HodgeOperators, omega: &Cochain) -> Result<HodgeDecomposition> {
    ops.check(omega)?;
    if omega.degree != 1 {
        return Err(Error::DegreeMismatch { expected: 1, got: omega.degree });
    }
    let (alpha, out0) = ops.exact_potential(&omega.values)?;
    let exact = ops.d(0).mul_vec(&alpha);
    let (coexact, out1) = ops.coexact_component(&omega.values)?;
    let harmonic: Vec<f64> = omega.values.iter().zip(&exact).zip(&coexact).map(|((w, e), c)| w - e - c).collect();
    Ok(HodgeDecomposition {
        exact: ops.wrap(1, exact),
        coexact: ops.wrap(1, coexact),
        harmonic: ops.wrap(1, harmonic),
        potential: ops.wrap(0, alpha),
        exact_residual: out0.residual,
        coexact_residual: out1.residual,
    })
}

/// Smallest nonzero eigenvalue estimate of Δ₁ off a given kernel, by inverse
/// iteration with CG inner solves in the ⋆-inner product.
fn first_nonzero_eigenvalue(ops: &HodgeOperators, kernel: &[Vec<f64>], seed: u64) -> Result<f64> {
    let star = ops.star(1);
    let mut x = random_cochain(ops.mesh(), 1, seed).values;
    let project = |x: &mut Vec<f64>| {
        for h in kernel {
            let c = linalg::wdot(star, x, h);
            linalg::axpy(-c, h, x);
        }
        let n = linalg::wdot(star, x, x).sqrt();
        linalg::scale(1.0 / n, x);
    };
    project(&mut x);
    // ⋆Δ₁ is symmetric, so solve ⋆Δ₁ y = ⋆ x
    let apply = |v: &[f64]| -> Vec<f64> { ops.laplacian_apply(1, v).iter().zip(star).map(|(a, s)| a * s).collect() };
    let mut lambda = f64::INFINITY;
    for _ in 0..40 {
        let rhs: Vec<f64> = x.iter().zip(star).map(|(a, s)| a * s).collect();
        let mut y = vec![0.0; x.len()];
        conjugate_gradient(apply, &rhs, &mut y, None, 1e-10, 10 * x.len() + 200);
        project(&mut y);
        let ay = ops.laplacian_apply(1, &y);
        let next = linalg::wdot(star, &y, &ay);
        x = y;
        let done = ((next - lambda) / next).abs() < 1e-6;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Orthonormal (in ⋆₁) basis of the numerical kernel of Δ₁.
///
/// Harmonic projections of random cochains span the kernel; a vector is
/// accepted when its Rayleigh quotient is below 1e-8 times the first nonzero
/// eigenvalue estimate. Anything between that threshold and a clear gap is
/// reported as ambiguous.
pub fn harmonic_basis(ops: &HodgeOperators) -> Result<Vec<Cochain>> {
    let mesh = ops.mesh();
    let star = ops.star(1);
    let mut probes = 2 * mesh.dim() + 4;
    loop {
        let mut candidates = Vec::with_capacity(probes);
        for s in 0..probes {
            let w = random_cochain(mesh, 1, 0x5eed_0000 + s as u64);
            let h = hodge_decompose(ops, &w)?.harmonic.values;
            let wn = linalg::wdot(star, &w.values, &w.values).sqrt();
            candidates.push((h, wn));
        }
        // ⋆-orthonormalize via symmetric scaling
        let sq: Vec<f64> = star.iter().map(|s| s.sqrt()).collect();
        let scaled: Vec<Vec<f64>> =
            candidates.iter().map(|(h, wn)| h.iter().zip(&sq).map(|(a, s)| a * s / wn).collect()).collect();
        let basis = orthonormalize_with_floor(scaled, 1e-6);
        if basis.len() == probes {
            probes *= 2;
            continue;
        }
        let basis: Vec<Vec<f64>> = basis.into_iter().map(|v| v.iter().zip(&sq).map(|(a, s)| a / s).collect()).collect();
        let quotients: Vec<f64> = basis
            .iter()
            .map(|h| linalg::wdot(star, h, &ops.laplacian_apply(1, h)) / linalg::wdot(star, h, h))
            .collect();
        let lambda1 = first_nonzero_eigenvalue(ops, &basis, 0x1a_b1)?;
        if quotients.iter().any(|&q| q.abs() >= 1e-8 * lambda1) {
            let mut eigenvalues = quotients.clone();
            eigenvalues.push(lambda1);
            return Err(Error::SpectralGapAmbiguous { eigenvalues });
        }
        return Ok(basis.into_iter().map(|v| ops.wrap(1, v)).collect());
    }
}

/// Gram–Schmidt keeping vectors whose residual norm exceeds `floor`
/// (absolute; inputs are pre-normalized).
fn orthonormalize_with_floor(vectors: Vec<Vec<f64>>, floor: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        linalg::orthogonalize_against(&mut v, &out);
        let n = linalg::norm(&v);
        if n > floor {
            linalg::scale(1.0 / n, &mut v);
            out.push(v);
        }
    }
    out
}

/// Writes a cochain as `index value` lines.
pub fn write_cochain<W: Write>(c: &Cochain, mut w: W) -> Result<()> {
    writeln!(w, "# degree {} count {}", c.degree, c.values.len())?;
    for (i, v) in c.values.iter().enumerate() {
        writeln!(w, "{i} {v:.17e}")?;
    }
    Ok(())
}

/// Reads the format written by [`write_cochain`] onto `mesh`. Indices may
/// appear in any order but must cover every simplex exactly once.
pub fn read_cochain<R: BufRead>(mesh: &SimplicialMesh, reader: R) -> Result<Cochain> {
    let mut degree = None;
    let mut values: Vec<Option<f64>> = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if let Some(h) = t.strip_prefix('#') {
            let h: Vec<&str> = h.split_whitespace().collect();
            if let ["degree", d, "count", n] = h[..] {
                let d: usize = d.parse().map_err(|_| Error::Parse(format!("line {}: bad degree", no + 1)))?;
                let n: usize = n.parse().map_err(|_| Error::Parse(format!("line {}: bad count", no + 1)))?;
                if n != mesh.count(d) {
                    return Err(Error::Parse(format!(
                        "cochain has {n} values, mesh has {} {d}-simplices",
                        mesh.count(d)
                    )));
                }
                degree = Some(d);
                values = vec![None; n];
            }
            continue;
        }
        if t.is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("line {}: expected `<index> <value>`", no + 1));
        let d = degree.ok_or_else(|| Error::Parse("missing `# degree <p> count <n>` header".into()))?;
        let mut it = t.split_whitespace();
        let i: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if i >= values.len() || values[i].is_some() {
            return Err(Error::Parse(format!("line {}: index {i} out of range or repeated for a {d}-cochain", no + 1)));
        }
        values[i] = Some(v);
    }
    let degree = degree.ok_or_else(|| Error::Parse("missing `# degree <p> count <n>` header".into()))?;
    let values: Option<Vec<f64>> = values.into_iter().collect();
    let values = values.ok_or_else(|| Error::Parse("cochain file does not cover every simplex".into()))?;
    Cochain::from_values(mesh, degree, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{icosphere, square_torus};
    use std::f64::consts::PI;

    fn torus(n: usize) -> HodgeOperators {
        HodgeOperators::new(Arc::new(square_torus(n, 2.0 * PI).unwrap())).unwrap()
    }

    #[test]
    fn cochain_file_round_trip() {
        let ops = torus(4);
        let c = random_cochain(ops.mesh(), 1, 9);
        let mut buf = Vec::new();
        write_cochain(&c, &mut buf).unwrap();
        let back = read_cochain(ops.mesh(), buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(read_cochain(ops.mesh(), &buf[..buf.len() / 2]).is_err());
    }

    #[test]
    fn d_squared_vanishes_exactly() {
        let ops = torus(8);
        let u = random_cochain(ops.mesh(), 0, 1);
        let dd = coboundary(&ops, &coboundary(&ops, &u).unwrap()).unwrap();
        assert!(dd.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn codifferential_is_adjoint() {
        let ops = torus(8);
        let a = random_cochain(ops.mesh(), 0, 2);
        let b = random_cochain(ops.mesh(), 1, 3);
        let lhs = inner_product(&ops, &coboundary(&ops, &a).unwrap(), &b).unwrap();
        let rhs = inner_product(&ops, &a, &codifferential(&ops, &b).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn l2_and_linf_of_sin_x_dy() {
        let ops = torus(64);
        let w = sample_one_form(ops.mesh(), &AnalyticForm::SinDy { eps: 1.0 });
        let ip = inner_product(&ops, &w, &w).unwrap();
        assert!((ip / (2.0 * PI * PI) - 1.0).abs() < 0.02, "{ip}");
        let inf = linf_norm(&ops, &w).unwrap();
        assert!((inf - 1.0).abs() < 0.02, "{inf}");
    }

    #[test]
    fn derivative_of_sin_matches_edge_integrals() {
        let ops = torus(32);
        let u = sample_function(ops.mesh(), |x| x[0].sin());
        let du = coboundary(&ops, &u).unwrap();
        // ∫_e cos x dx along each edge
        let h = 2.0 * PI / 32.0;
        for (e, s) in ops.mesh().simplices(1).iter().enumerate() {
            let pts = ops.mesh().simplex_points(s);
            let analytic = quad_cos(pts[0][0], pts[1][0]);
            assert!((du.values[e] - analytic).abs() < h * h);
        }
    }

    fn quad_cos(a: f64, b: f64) -> f64 {
        // midpoint rule, independent of the closed form
        let n = 200;
        (0..n).map(|i| (a + (i as f64 + 0.5) / n as f64 * (b - a)).cos()).sum::<f64>() * (b - a) / n as f64
    }

    #[test]
    fn harmonic_basis_counts() {
        assert_eq!(harmonic_basis(&torus(8)).unwrap().len(), 2);
        let s2 = HodgeOperators::new(Arc::new(icosphere(2, 1.0).unwrap())).unwrap();
        assert!(harmonic_basis(&s2).unwrap().is_empty());
    }

    #[test]
    fn laplacian_is_star_symmetric() {
        let ops = torus(6);
        for p in 0..=2 {
            let l = ops.laplacian_matrix(p).scaled(Some(ops.star(p)), None);
            assert!(l.relative_asymmetry() <= 1e-12, "p={p}");
        }
    }

    #[test]
    fn decomposition_identities() {
        let ops = torus(16);
        let w = random_cochain(ops.mesh(), 1, 9);
        let dec = hodge_decompose(&ops, &w).unwrap();
        let n2 = inner_product(&ops, &w, &w).unwrap();
        let parts = [&dec.exact, &dec.coexact, &dec.harmonic];
        for i in 0..3 {
            for j in i + 1..3 {
                let ip = inner_product(&ops, parts[i], parts[j]).unwrap();
                assert!(ip.abs() <= 1e-9 * n2, "{i}{j}: {ip}");
            }
        }
        let sum = dec.exact.add(&dec.coexact).unwrap().add(&dec.harmonic).unwrap();
        let err = l2_norm(&ops, &sum.sub(&w).unwrap()).unwrap();
        assert!(err <= 1e-10 * n2.sqrt());
        let again = hodge_decompose(&ops, &dec.coexact).unwrap();
        let err = l2_norm(&ops, &again.coexact.sub(&dec.coexact).unwrap()).unwrap();
        assert!(err <= 1e-10 * n2.sqrt(), "{err}");
    }

    #[test]
    fn constant_form_is_harmonic_and_gradient_is_exact() {
        let ops = torus(16);
        let w = sample_one_form(ops.mesh(), &AnalyticForm::Constant { coeffs: vec![0.7, 0.0] });
        let dec = hodge_decompose(&ops, &w).unwrap();
        let n = l2_norm(&ops, &w).unwrap();
        assert!(l2_norm(&ops, &dec.harmonic.sub(&w).unwrap()).unwrap() <= 1e-6 * n);
        let u = sample_function(ops.mesh(), |x| x[0].sin() * x[1].cos());
        let du = coboundary(&ops, &u).unwrap();
        let dec = hodge_decompose(&ops, &du).unwrap();
        let n = l2_norm(&ops, &du).unwrap();
        assert!(l2_norm(&ops, &dec.coexact).unwrap() <= 1e-8 * n);
        assert!(l2_norm(&ops, &dec.harmonic).unwrap() <= 1e-8 * n);
    }
}
