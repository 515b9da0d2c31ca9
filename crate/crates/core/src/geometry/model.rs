//! Analytic model spaces with closed-form metric, Christoffel symbols and
//! distance.
//!
//! Coordinates are chart coordinates: the flat torus and Euclidean space use
//! Cartesian coordinates, hyperbolic space the upper half-space with the
//! height as the last coordinate, and the round sphere hyperspherical angles
//! `(θ₁, …, θ_{n-1}, φ)`. Sphere distances also accept embedded points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpace {
    FlatTorus { periods: Vec<f64> },
    Euclidean { dim: usize },
    Hyperbolic { dim: usize },
    RoundSphere { dim: usize, radius: f64 },
}

impl ModelSpace {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpace::FlatTorus { periods } => periods.len(),
            ModelSpace::Euclidean { dim } | ModelSpace::Hyperbolic { dim } => *dim,
            ModelSpace::RoundSphere { dim, .. } => *dim,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpace::FlatTorus { periods } => format!("flat torus {periods:?}"),
            ModelSpace::Euclidean { dim } => format!("E^{dim}"),
            ModelSpace::Hyperbolic { dim } => format!("H^{dim}"),
            ModelSpace::RoundSphere { dim, radius } => format!("S^{dim}(r={radius})"),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ModelSpace::FlatTorus { .. } | ModelSpace::Euclidean { .. })
    }

    fn outside(&self, x: &[f64]) -> Error {
        Error::OutsideChart { space: self.name(), point: x.to_vec() }
    }

    /// Validates that `x` lies in the chart domain.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(self.outside(x));
        }
        match self {
            ModelSpace::Hyperbolic { dim } if x[dim - 1] <= 0.0 => Err(self.outside(x)),
            ModelSpace::RoundSphere { dim, .. } => {
                let polar_ok = x[..dim - 1].iter().all(|&t| t > 0.0 && t < std::f64::consts::PI);
                if polar_ok {
                    Ok(())
                } else {
                    Err(self.outside(x))
                }
            }
            _ => Ok(()),
        }
    }

    /// Diagonal of the metric tensor (all supported metrics are diagonal in
    /// their charts) and its partial derivatives `dg[k][i] = ∂_k g_ii`.
    fn diagonal_metric(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.dim();
        match self {
            ModelSpace::FlatTorus { .. } | ModelSpace::Euclidean { .. } => (vec![1.0; n], vec![vec![0.0; n]; n]),
            ModelSpace::Hyperbolic { .. } => {
                let y = x[n - 1];
                let g = vec![1.0 / (y * y); n];
                let mut dg = vec![vec![0.0; n]; n];
                dg[n - 1] = vec![-2.0 / (y * y * y); n];
                (g, dg)
            }
            ModelSpace::RoundSphere { radius, .. } => {
                // g_ii = R² Π_{j<i} sin²θ_j
                let r2 = radius * radius;
                let mut g = vec![r2; n];
                for i in 1..n {
                    g[i] = g[i - 1] * x[i - 1].sin().powi(2);
                }
                let mut dg = vec![vec![0.0; n]; n];
                for (k, row) in dg.iter_mut().enumerate() {
                    let (s, c) = x[k].sin_cos();
                    for i in k + 1..n {
                        // ∂_k of sin²θ_k is 2 sin cos; divide it out of g_ii
                        let rest: f64 = (0..i).filter(|&j| j != k).map(|j| x[j].sin().powi(2)).product();
                        row[i] = r2 * rest * 2.0 * s * c;
                    }
                }
                (g, dg)
            }
        }
    }

    pub fn metric_tensor(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let (g, _) = self.diagonal_metric(x);
        Ok(DMatrix::from_diagonal(&DVector::from_vec(g)))
    }

    /// Christoffel symbols `Γ[i][(j, k)] = Γ^i_jk` of the Levi-Civita connection.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        let n = self.dim();
        let (g, dg) = self.diagonal_metric(x);
        let mut gamma = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // ½ g^ii (∂_j g_ik + ∂_k g_ij − ∂_i g_jk), metric diagonal
                    let mut v = 0.0;
                    if i == k {
                        v += dg[j][i];
                    }
                    if i == j {
                        v += dg[k][i];
                    }
                    if j == k {
                        v -= dg[i][j];
                    }
                    gamma[i][(j, k)] = 0.5 * v / g[i];
                }
            }
        }
        Ok(gamma)
    }

    /// Largest violation of `∂_k g_ij = Γ^l_ki g_lj + Γ^l_kj g_il`, with the
    /// metric derivative taken by central differences of step `h`.
    pub fn metric_compatibility_defect(&self, x: &[f64], h: f64) -> Result<f64> {
        let n = self.dim();
        let g = self.metric_tensor(x)?;
        let gamma = self.christoffel(x)?;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let dg = (self.metric_tensor(&xp)? - self.metric_tensor(&xm)?) / (2.0 * h);
            for i in 0..n {
                for j in 0..n {
                    let mut rhs = 0.0;
                    for l in 0..n {
                        rhs += gamma[l][(k, i)] * g[(l, j)] + gamma[l][(k, j)] * g[(i, l)];
                    }
                    worst = worst.max((dg[(i, j)] - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Geodesic acceleration `−Γ^i_jk v^j v^k`.
    pub fn geodesic_acceleration(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let gamma = self.christoffel(x)?;
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                let mut a = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        a -= gamma[i][(j, k)] * v[j] * v[k];
                    }
                }
                a
            })
            .collect())
    }

    /// Riemannian norm of the tangent vector `v` at `x`.
    pub fn norm(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let (g, _) = self.diagonal_metric(x);
        Ok(g.iter().zip(v).map(|(gi, vi)| gi * vi * vi).sum::<f64>().sqrt())
    }

    /// Embedding of sphere chart coordinates into R^{n+1}.
    pub fn sphere_embed(radius: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = Vec::with_capacity(n + 1);
        let mut prod = radius;
        for &t in &x[..n - 1] {
            out.push(prod * t.cos());
            prod *= t.sin();
        }
        out.push(prod * x[n - 1].cos());
        out.push(prod * x[n - 1].sin());
        out
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            ModelSpace::RoundSphere { dim, radius } => {
                let embed = |p: &[f64]| -> Result<Vec<f64>> {
                    if p.len() == dim + 1 {
                        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if (r - radius).abs() > 1e-9 * radius.max(1.0) {
                            return Err(self.outside(p));
                        }
                        Ok(p.to_vec())
                    } else {
                        self.check_point(p)?;
                        Ok(Self::sphere_embed(*radius, p))
                    }
                };
                let (a, b) = (embed(x)?, embed(y)?);
                let cross2: f64 = {
                    // |a × b| generalised: sqrt(|a|²|b|² − (a·b)²), stable via atan2
                    let ab = crate::linalg::dot(&a, &b);
                    let aa = crate::linalg::dot(&a, &a);
                    let bb = crate::linalg::dot(&b, &b);
                    (aa * bb - ab * ab).max(0.0)
                };
                let ab = crate::linalg::dot(&a, &b);
                Ok(radius * cross2.sqrt().atan2(ab))
            }
            _ => {
                self.check_point(x)?;
                self.check_point(y)?;
                let mut d2 = 0.0;
                for (i, (a, b)) in x.iter().zip(y).enumerate() {
                    let mut d = b - a;
                    if let ModelSpace::FlatTorus { periods } = self {
                        let l = periods[i];
                        d -= l * (d / l).round();
                    }
                    d2 += d * d;
                }
                match self {
                    ModelSpace::Hyperbolic { dim } => {
                        let arg = 1.0 + d2 / (2.0 * x[dim - 1] * y[dim - 1]);
                        Ok(arg.acosh())
                    }
                    _ => Ok(d2.sqrt()),
                }
            }
        }
    }

    /// Closed-form total volume; infinite for the non-compact spaces.
    pub fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            ModelSpace::FlatTorus { periods } => periods.iter().product(),
            ModelSpace::Euclidean { .. } | ModelSpace::Hyperbolic { .. } => f64::INFINITY,
            ModelSpace::RoundSphere { dim, radius } => match dim {
                1 => 2.0 * PI * radius,
                2 => 4.0 * PI * radius.powi(2),
                3 => 2.0 * PI * PI * radius.powi(3),
                n => {
                    // |S^n| = 2π^{(n+1)/2} / Γ((n+1)/2), via the recursion |S^n| = 2π/(n−1) |S^{n−2}|
                    let mut v = if n % 2 == 0 { 4.0 * PI } else { 2.0 * PI * PI };
                    let mut k = if n % 2 == 0 { 2 } else { 3 };
                    while k < *n {
                        k += 2;
                        v *= 2.0 * PI / (k - 1) as f64;
                    }
                    v * radius.powi(*n as i32)
                }
            },
        }
    }

    /// Euler characteristic of the closed model spaces.
    pub fn euler_characteristic(&self) -> Option<i64> {
        match self {
            ModelSpace::FlatTorus { .. } => Some(0),
            ModelSpace::RoundSphere { dim, .. } => Some(if dim % 2 == 0 { 2 } else { 0 }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn half_plane_distances() {
        let h = ModelSpace::Hyperbolic { dim: 2 };
        assert!((h.distance(&[0.0, 1.0], &[0.0, E]).unwrap() - 1.0).abs() < 1e-12);
        let d = h.distance(&[-1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((d - 3f64.acosh()).abs() < 1e-12);
        assert!((d - 1.7627).abs() < 1e-4);
        assert!(h.distance(&[0.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn torus_distance_wraps() {
        let t = ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] };
        assert_eq!(t.distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let d = t.distance(&[0.1, 0.0], &[2.0 * PI - 0.1, 0.0]).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sphere_volume_and_distance() {
        let s = ModelSpace::RoundSphere { dim: 2, radius: 1.0 };
        assert!((s.volume() - 4.0 * PI).abs() < 1e-12);
        let d = s.distance(&[PI / 2.0, 0.0], &[PI / 2.0, PI / 2.0]).unwrap();
        assert!((d - PI / 2.0).abs() < 1e-12);
        let s4 = ModelSpace::RoundSphere { dim: 4, radius: 1.0 };
        assert!((s4.volume() - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn christoffel_symbols_are_metric_compatible() {
        let spaces = [
            (ModelSpace::Hyperbolic { dim: 2 }, vec![0.3, 0.7]),
            (ModelSpace::Hyperbolic { dim: 3 }, vec![0.3, -1.0, 2.0]),
            (ModelSpace::RoundSphere { dim: 2, radius: 2.0 }, vec![1.0, 0.4]),
            (ModelSpace::RoundSphere { dim: 3, radius: 1.0 }, vec![1.0, 2.0, 0.4]),
            (ModelSpace::FlatTorus { periods: vec![1.0, 1.0, 1.0] }, vec![0.1, 0.2, 0.3]),
        ];
        for (s, x) in spaces {
            let defect = s.metric_compatibility_defect(&x, 1e-5).unwrap();
            assert!(defect < 1e-6, "{} defect {defect}", s.name());
        }
    }

    #[test]
    fn half_plane_christoffels_match_closed_form() {
        let h = ModelSpace::Hyperbolic { dim: 2 };
        let g = h.christoffel(&[0.0, 2.0]).unwrap();
        // Γ^x_xy = −1/y, Γ^y_xx = 1/y, Γ^y_yy = −1/y
        assert!((g[0][(0, 1)] + 0.5).abs() < 1e-15);
        assert!((g[1][(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g[1][(1, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_torus_christoffels_vanish() {
        let t = ModelSpace::FlatTorus { periods: vec![1.0, 2.0] };
        let g = t.christoffel(&[0.3, 0.4]).unwrap();
        assert!(g.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }
}
