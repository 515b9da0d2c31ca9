//! Smallest coexact eigenpairs of the Hodge Laplacian on 1-cochains, curl
//! eigenpairs in three dimensions and empirical mean-value ratios.
//!
//! The coexact problem is solved in the symmetric coordinates y = ⋆₁^{1/2} x,
//! where Δ₁ restricted to coexact cochains becomes
//! A = ⋆₁^{-1/2} d₁ᵀ ⋆₂ d₁ ⋆₁^{-1/2}. The kernel of A (exact plus harmonic)
//! is deflated explicitly after every inner solve, and a block shift-invert
//! Krylov space of A is searched by Rayleigh–Ritz with restarts.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dec::{self, Cochain, HodgeOperators};
use crate::error::{Error, Result};
use crate::linalg::{self, conjugate_gradient, Csr};

#[derive(Clone, Debug, Serialize)]
pub struct SolverDiagnostics {
    pub restarts: usize,
    pub inner_solves: usize,
    pub inner_iterations: usize,
    pub block_size: usize,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    /// λ for Laplace pairs, μ for curl pairs.
    pub value: f64,
    pub form: Cochain,
    /// ‖Δω − λω‖₂ (curl: max of the two half residuals).
    pub residual: f64,
    /// ‖d*ω‖₂.
    pub coexactness: f64,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Clone, Debug)]
pub struct SpectralOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_restarts: usize,
    pub krylov_blocks: usize,
    /// Extra block vectors beyond `count`; guards against degenerate clusters.
    pub guard: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol: 1e-8, seed: 7, max_restarts: 30, krylov_blocks: 6, guard: 8 }
    }
}

struct CoexactOperator<'a> {
    ops: &'a HodgeOperators,
    a: Csr,
    /// A plus the exact-part operator ⋆₁^{1/2} d₀ ⋆₀⁻¹ d₀ᵀ ⋆₁^{1/2}: the full
    /// Hodge Laplacian in y, which agrees with A on coexact vectors.
    full: Csr,
    jacobi: Vec<f64>,
    sqrt_m: Vec<f64>,
    harmonic: Vec<Vec<f64>>,
    inner_iterations: std::cell::Cell<usize>,
    inner_solves: std::cell::Cell<usize>,
}

impl<'a> CoexactOperator<'a> {
    fn new(ops: &'a HodgeOperators) -> Result<Self> {
        let m = ops.star(1);
        let sqrt_m: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
        let inv: Vec<f64> = sqrt_m.iter().map(|v| 1.0 / v).collect();
        let d1 = ops.d(1);
        let a = d1.transpose().scaled(Some(&inv), Some(ops.star(2))).matmul(&d1.scaled(None, Some(&inv)));
        let g = d0_scaled(ops, &sqrt_m);
        let full = add(&a, &g);
        let jacobi = full.diag_entries().iter().map(|v| if *v > 0.0 { 1.0 / v } else { 1.0 }).collect();
        let harmonic = dec::harmonic_basis(ops)?
            .into_iter()
            .map(|h| h.values.iter().zip(&sqrt_m).map(|(a, s)| a * s).collect())
            .collect();
        Ok(CoexactOperator {
            ops,
            a,
            full,
            jacobi,
            sqrt_m,
            harmonic,
            inner_iterations: 0.into(),
            inner_solves: 0.into(),
        })
    }

    fn to_x(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.sqrt_m).map(|(a, s)| a / s).collect()
    }

    fn to_y(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.sqrt_m).map(|(a, s)| a * s).collect()
    }

    /// Removes the exact and harmonic components (orthogonal projection in y).
    fn project(&self, y: &mut Vec<f64>) -> Result<()> {
        let mut x = self.to_x(y);
        let (alpha, _) = self.ops.exact_potential(&x)?;
        let dalpha = self.ops.d(0).mul_vec(&alpha);
        linalg::axpy(-1.0, &dalpha, &mut x);
        *y = self.to_y(&x);
        linalg::orthogonalize_against(y, &self.harmonic);
        Ok(())
    }

    /// The full Laplacian plus the harmonic projector: nonsingular, and equal
    /// to A on the coexact subspace.
    fn apply_regularized(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.full.mul_vec(x);
        for h in &self.harmonic {
            let c = linalg::dot(h, x);
            linalg::axpy(c, h, &mut y);
        }
        y
    }

    /// A⁺ v on the coexact subspace.
    fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut z = vec![0.0; v.len()];
        let out =
            conjugate_gradient(|x| self.apply_regularized(x), v, &mut z, Some(&self.jacobi), 1e-12, 20 * v.len() + 500);
        self.inner_iterations.set(self.inner_iterations.get() + out.iterations);
        self.inner_solves.set(self.inner_solves.get() + 1);
        if !out.residual.is_finite() || out.residual > 1e-8 {
            return Err(Error::NoConvergence {
                solver: "shift-invert CG",
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        self.project(&mut z)?;
        Ok(z)
    }
}

fn add(a: &Csr, b: &Csr) -> Csr {
    let mut t = a.triplets();
    t.extend(b.triplets());
    Csr::from_triplets(a.nrows, a.ncols, &t)
}

/// ⋆₁^{1/2} d₀ ⋆₀⁻¹ d₀ᵀ ⋆₁^{1/2}.
fn d0_scaled(ops: &HodgeOperators, sqrt_m: &[f64]) -> Csr {
    let d0 = ops.d(0);
    let left = d0.scaled(Some(sqrt_m), Some(ops.star_inv(0)));
    left.matmul(&d0.transpose().scaled(None, Some(sqrt_m)))
}

/// Orthonormalizes `block` against `basis` and itself, dropping vectors that
/// collapse.
fn orthonormal_block(block: Vec<Vec<f64>>, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in block {
        let n0 = linalg::norm(&v);
        if n0 == 0.0 {
            continue;
        }
        linalg::orthogonalize_against(&mut v, basis);
        linalg::orthogonalize_against(&mut v, &out);
        let n1 = linalg::norm(&v);
        if n1 > 1e-10 * n0 {
            linalg::scale(1.0 / n1, &mut v);
            out.push(v);
        }
    }
    out
}

/// Rayleigh–Ritz of A on an orthonormal basis; returns ascending (θ, y).
fn rayleigh_ritz(a: &Csr, basis: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let k = basis.len();
    let av: Vec<Vec<f64>> = basis.iter().map(|v| a.mul_vec(v)).collect();
    let h = DMatrix::from_fn(k, k, |i, j| 0.5 * (linalg::dot(&basis[i], &av[j]) + linalg::dot(&basis[j], &av[i])));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order
        .into_iter()
        .map(|i| {
            let mut y = vec![0.0; basis[0].len()];
            for (j, v) in basis.iter().enumerate() {
                linalg::axpy(eig.eigenvectors[(j, i)], v, &mut y);
            }
            (eig.eigenvalues[i], y)
        })
        .collect()
}

/// Smallest `count` coexact eigenpairs in the symmetric coordinates.
fn coexact_pairs_y(
    op: &CoexactOperator<'_>,
    count: usize,
    opts: &SpectralOptions,
) -> Result<(Vec<(f64, Vec<f64>)>, usize)> {
    let n = op.sqrt_m.len();
    let b = count + opts.guard;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = Vec::with_capacity(b);
    for _ in 0..b {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        op.project(&mut v)?;
        start.push(v);
    }
    let mut x = orthonormal_block(start, &[]);
    let mut last_residuals = Vec::new();
    for restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut block = x.clone();
        for j in 0..opts.krylov_blocks {
            let fresh = orthonormal_block(block, &basis);
            if fresh.is_empty() {
                break;
            }
            basis.extend(fresh.iter().cloned());
            if j + 1 < opts.krylov_blocks {
                block = fresh.iter().map(|v| op.solve(v)).collect::<Result<_>>()?;
            } else {
                block = Vec::new();
            }
        }
        let ritz = rayleigh_ritz(&op.a, &basis);
        // Ritz values of leftover kernel directions are discarded
        let scale = ritz.last().map(|r| r.0.abs()).unwrap_or(1.0);
        let ritz: Vec<(f64, Vec<f64>)> = ritz.into_iter().filter(|r| r.0 > 1e-10 * scale).collect();
        if ritz.len() < count {
            return Err(Error::EigenNoConvergence { residuals: vec![f64::NAN; count] });
        }
        last_residuals = ritz[..count]
            .iter()
            .map(|(t, y)| {
                let mut r = op.a.mul_vec(y);
                linalg::axpy(-t, y, &mut r);
                linalg::norm(&r)
            })
            .collect();
        if last_residuals.iter().all(|&r| r <= 0.1 * opts.tol) {
            let pairs = ritz.into_iter().take(count).collect();
            return Ok((pairs, restart));
        }
        x = ritz.into_iter().take(b).map(|r| r.1).collect();
    }
    Err(Error::EigenNoConvergence { residuals: last_residuals })
}

/// The `count` smallest eigenpairs of Δ₁ on coexact 1-cochains, normalized
/// in the ⋆-inner product and sorted by eigenvalue.
pub fn coexact_spectrum(ops: &HodgeOperators, count: usize, opts: &SpectralOptions) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let op = CoexactOperator::new(ops)?;
    let (pairs, restarts) = coexact_pairs_y(&op, count, opts)?;
    let diagnostics = SolverDiagnostics {
        restarts,
        inner_solves: op.inner_solves.get(),
        inner_iterations: op.inner_iterations.get(),
        block_size: count + opts.guard,
    };
    let mesh = ops.mesh();
    let star = ops.star(1);
    let mut out = Vec::with_capacity(count);
    for (lambda, y) in pairs {
        let x = op.to_x(&y);
        let norm = linalg::wdot(star, &x, &x).sqrt();
        let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let mut r = ops.laplacian_apply(1, &x);
        linalg::axpy(-lambda, &x, &mut r);
        let residual = linalg::wdot(star, &r, &r).sqrt();
        let dstar = ops.codifferential_apply(1, &x);
        let coexactness = linalg::wdot(ops.star(0), &dstar, &dstar).sqrt();
        out.push(EigenPair {
            value: lambda,
            form: Cochain::from_values(mesh, 1, x)?,
            residual,
            coexactness,
            diagnostics: diagnostics.clone(),
        });
    }
    Ok(out)
}

/// Discrete helicity pairing h(x, y) = Σ_T vol_T ⟨W x(b_T), curl W y⟩ with W
/// the Whitney map; symmetrized by the caller.
fn helicity(ops: &HodgeOperators, x: &[f64], y: &[f64]) -> f64 {
    let mesh = ops.mesh();
    let n = mesh.dim();
    let mut total = 0.0;
    for t in 0..mesh.count(n) {
        let u = ops.whitney_at(t, x);
        let verts = &mesh.simplices(n)[t];
        let grads = mesh.barycentric_gradients(t);
        let mut curl = [0.0; 3];
        for a in 0..=n {
            for b in a + 1..=n {
                let e = mesh.find(&[verts[a], verts[b]]).expect("edge");
                let (ga, gb) = (&grads[a], &grads[b]);
                let c = [ga[1] * gb[2] - ga[2] * gb[1], ga[2] * gb[0] - ga[0] * gb[2], ga[0] * gb[1] - ga[1] * gb[0]];
                for k in 0..3 {
                    curl[k] += 2.0 * y[e] * c[k];
                }
            }
        }
        let vol = mesh.volumes(n)[t];
        total += vol * (u[0] * curl[0] + u[1] * curl[1] + u[2] * curl[2]);
    }
    total
}

/// Smallest-|μ| curl eigenpairs on a 3-manifold.
///
/// The primal–dual curl K = ⋆₂^{1/2} d₁ ⋆₁^{-1/2} has singular values σ
/// with σ² the coexact Laplace eigenvalues. Its right singular vectors are
/// the coexact eigenforms; within each cluster of equal σ the helicity
/// pairing is diagonalized to split the two chiralities, and μ = ±σ.
pub fn curl_spectrum(ops: &HodgeOperators, count: usize, opts: &SpectralOptions) -> Result<Vec<EigenPair>> {
    if ops.dim() != 3 {
        return Err(Error::Unsupported("curl eigenproblem needs a 3-manifold".into()));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut lap = coexact_spectrum(ops, count, opts)?;
    // complete the last cluster so that chirality splitting sees all of it
    let mut want = count;
    while lap.len() == want && (lap[want - 1].value - lap[count - 1].value).abs() <= 1e-6 * lap[count - 1].value {
        want += 4;
        lap = coexact_spectrum(ops, want, opts)?;
        let last = lap[want - 1].value;
        if (last - lap[count - 1].value).abs() > 1e-6 * lap[count - 1].value {
            break;
        }
    }
    let star = ops.star(1);
    let mut out: Vec<EigenPair> = Vec::new();
    let mut i = 0;
    while i < lap.len() {
        let mut j = i + 1;
        while j < lap.len() && (lap[j].value - lap[i].value).abs() <= 1e-6 * lap[i].value {
            j += 1;
        }
        let cluster = &lap[i..j];
        let k = cluster.len();
        let h = DMatrix::from_fn(k, k, |a, b| {
            let xa = &cluster[a].form.values;
            let xb = &cluster[b].form.values;
            0.5 * (helicity(ops, xa, xb) + helicity(ops, xb, xa))
        });
        let eig = SymmetricEigen::new(h);
        for c in 0..k {
            let mut x = vec![0.0; star.len()];
            for (a, p) in cluster.iter().enumerate() {
                linalg::axpy(eig.eigenvectors[(a, c)], &p.form.values, &mut x);
            }
            let norm = linalg::wdot(star, &x, &x).sqrt();
            linalg::scale(1.0 / norm, &mut x);
            let sigma2 = {
                let dx = ops.d(1).mul_vec(&x);
                linalg::wdot(ops.star(2), &dx, &dx)
            };
            let sigma = sigma2.sqrt();
            let sign = if eig.eigenvalues[c] >= 0.0 { 1.0 } else { -1.0 };
            // singular-pair residuals of K: ‖K y − σ z‖ = 0 by construction of z,
            // so the reported residual is ‖Kᵀ z − σ y‖ in the symmetric frame
            let y: Vec<f64> = x.iter().zip(star).map(|(a, s)| a * s.sqrt()).collect();
            let dx = ops.d(1).mul_vec(&x);
            let z: Vec<f64> = dx.iter().zip(ops.star(2)).map(|(a, s)| a * s.sqrt() / sigma).collect();
            let kz_face: Vec<f64> = z.iter().zip(ops.star(2)).map(|(a, s)| a * s.sqrt()).collect();
            let kt = ops.d(1).mul_t_vec(&kz_face);
            let mut r: Vec<f64> = kt.iter().zip(star).map(|(a, s)| a / s.sqrt()).collect();
            linalg::axpy(-sigma, &y, &mut r);
            let dstar = ops.codifferential_apply(1, &x);
            out.push(EigenPair {
                value: sign * sigma,
                form: Cochain::from_values(ops.mesh(), 1, x)?,
                residual: linalg::norm(&r),
                coexactness: linalg::wdot(ops.star(0), &dstar, &dstar).sqrt(),
                diagnostics: cluster[0].diagnostics.clone(),
            });
        }
        i = j;
    }
    out.sort_by(|a, b| a.value.abs().total_cmp(&b.value.abs()).then(a.value.total_cmp(&b.value)));
    out.truncate(count);
    Ok(out)
}

/// ‖ω‖∞ / ‖ω‖₂, the smallest empirical mean-value constant of ω.
pub fn mvi_ratio(ops: &HodgeOperators, omega: &Cochain) -> Result<f64> {
    let l2 = dec::l2_norm(ops, omega)?;
    if l2 == 0.0 {
        return Err(Error::ZeroForm);
    }
    Ok(dec::linf_norm(ops, omega)? / l2)
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenRecord<'a> {
    pub scenario: &'a str,
    pub kind: &'a str,
    pub index: usize,
    pub value: f64,
    pub residual: f64,
    pub coexactness: f64,
    pub linf: f64,
    pub l2: f64,
}

/// Writes one JSON line per eigenpair.
pub fn write_eigen_jsonl<W: Write>(
    ops: &HodgeOperators,
    scenario: &str,
    kind: &str,
    pairs: &[EigenPair],
    mut w: W,
) -> Result<()> {
    for (index, p) in pairs.iter().enumerate() {
        let rec = EigenRecord {
            scenario,
            kind,
            index,
            value: p.value,
            residual: p.residual,
            coexactness: p.coexactness,
            linf: dec::linf_norm(ops, &p.form)?,
            l2: dec::l2_norm(ops, &p.form)?,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{flat_torus_2d, square_torus};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn coarse_torus_first_coexact_eigenvalue() {
        let ops = HodgeOperators::new(Arc::new(square_torus(16, 2.0 * PI).unwrap())).unwrap();
        let pairs = coexact_spectrum(&ops, 4, &SpectralOptions::default()).unwrap();
        for p in &pairs {
            assert!((p.value - 1.0).abs() < 0.03, "{}", p.value);
            assert!(p.residual <= 1e-8);
            assert!(p.coexactness <= 1e-8);
        }
    }

    #[test]
    fn long_torus_scales_like_inverse_square() {
        let ops = HodgeOperators::new(Arc::new(flat_torus_2d(32, 16, 4.0 * PI, 2.0 * PI).unwrap())).unwrap();
        let pairs = coexact_spectrum(&ops, 1, &SpectralOptions::default()).unwrap();
        assert!((pairs[0].value - 0.25).abs() < 0.01, "{}", pairs[0].value);
    }

    #[test]
    fn zero_count_is_empty() {
        let ops = HodgeOperators::new(Arc::new(square_torus(4, 1.0).unwrap())).unwrap();
        assert!(coexact_spectrum(&ops, 0, &SpectralOptions::default()).unwrap().is_empty());
    }
}
