//! Small sparse linear algebra kit: CSR matrices, conjugate gradients and
//! vector helpers. Everything here is sequential and deterministic.

use std::io::Write;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros produced by cancellation are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Csr { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    /// Main diagonal entries (square matrices).
    pub fn diag_entries(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).find(|&(c, _)| c == r).map(|(_, v)| v).unwrap_or(0.0)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Csr::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// `y = Aᵀ x` without forming the transpose.
    pub fn mul_t_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut trips = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                trips.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        Csr::from_triplets(self.nrows, other.ncols, &trips)
    }

    /// Scales rows by `left` and columns by `right`: `diag(left) A diag(right)`.
    pub fn scaled(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> Csr {
        let mut out = self.clone();
        for r in 0..out.nrows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                let c = out.indices[k];
                if let Some(l) = left {
                    out.values[k] *= l[r];
                }
                if let Some(rt) = right {
                    out.values[k] *= rt[c];
                }
            }
        }
        out
    }

    /// Largest absolute entry of `A - Aᵀ`, relative to the largest entry of `A`.
    pub fn relative_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let a: Vec<_> = self.row(r).collect();
            let b: Vec<_> = t.row(r).collect();
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let d = match (a.get(i), b.get(j)) {
                    (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                        i += 1;
                        j += 1;
                        va - vb
                    }
                    (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                        i += 1;
                        va
                    }
                    (Some(&(ca, va)), None) => {
                        let _ = ca;
                        i += 1;
                        va
                    }
                    (_, Some(&(_, vb))) => {
                        j += 1;
                        -vb
                    }
                    (None, None) => unreachable!(),
                };
                worst = worst.max(d.abs());
            }
        }
        worst / scale
    }

    /// Writes `row col value` lines (zero-based) with a `rows cols nnz` header.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Weighted inner product `Σ w_i a_i b_i`.
pub fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for a symmetric positive semi-definite operator.
///
/// For singular operators the right-hand side must lie in the range; the
/// iterates then stay in the range as long as `x` starts at zero.
/// `precond` is an optional diagonal (Jacobi) inverse.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x: &mut [f64],
    precond: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome { iterations: 0, residual: 0.0, converged: true };
    }
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let prec = |r: &[f64]| -> Vec<f64> {
        match precond {
            Some(p) => r.iter().zip(p).map(|(r, p)| r * p).collect(),
            None => r.to_vec(),
        }
    };
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    // near the rounding floor of a singular system CG can drift away again,
    // so the best iterate seen is what gets returned
    let mut best = (res, x.to_vec());
    let mut since_best = 0;
    let mut it = 0;
    while it < max_iter && res > rel_tol {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        // recompute the true residual periodically to avoid drift
        if it % 50 == 0 {
            let ax = apply(x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        res = norm(&r) / bnorm;
        if res < best.0 {
            best.0 = res;
            best.1.copy_from_slice(x);
            since_best = 0;
        } else {
            since_best += 1;
            if res > 1e3 * best.0 || since_best > 200 {
                break;
            }
        }
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if best.0 < res {
        x.copy_from_slice(&best.1);
        // the recursive residual of the best iterate may be optimistic
        let ax = apply(x);
        let rr: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        res = norm(&rr) / bnorm;
    }
    CgOutcome { iterations: it, residual: res, converged: res <= rel_tol }
}

/// Modified Gram-Schmidt against an orthonormal set (twice, for stability).
pub fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            axpy(-c, q, v);
        }
    }
}

/// Orthonormalizes `vectors` in place, dropping those whose norm after
/// projection falls below `drop_tol` times their original norm.
pub fn orthonormalize(vectors: Vec<Vec<f64>>, drop_tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        orthogonalize_against(&mut v, &out);
        let n1 = norm(&v);
        if n1 > drop_tol * n0 {
            scale(1.0 / n1, &mut v);
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.mul_vec(&[1.0, 0.0]), vec![3.0, 0.0]);
    }

    #[test]
    fn transpose_product_matches_mul_t() {
        let m = Csr::from_triplets(2, 3, &[(0, 1, 2.0), (1, 2, -1.0), (1, 0, 4.0)]);
        let x = [1.0, 3.0];
        assert_eq!(m.transpose().mul_vec(&x), m.mul_t_vec(&x));
        let p = m.matmul(&m.transpose());
        assert_eq!(p.mul_vec(&x), m.mul_vec(&m.mul_t_vec(&x)));
        assert_eq!(p.relative_asymmetry(), 0.0);
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let a = laplacian_1d(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&xs);
        let mut x = vec![0.0; 50];
        let out = conjugate_gradient(|v| a.mul_vec(v), &b, &mut x, None, 1e-13, 500);
        assert!(out.converged);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let q = orthonormalize(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0]], 1e-10);
        assert_eq!(q.len(), 2);
        assert!(dot(&q[0], &q[1]).abs() < 1e-15);
    }
}
