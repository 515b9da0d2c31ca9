//! Structured closed meshes: flat tori, icospheres and the 16-cell boundary.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::SimplicialMesh;

/// Flat 2-torus `[0, lx) × [0, ly)` as a row-shifted triangular lattice.
///
/// Odd rows are shifted by half a cell so that every triangle is acute
/// (and the circumcentric dual is positive) whenever `ly/ny > lx/(2 nx)`.
/// Refining `(nx, ny)` to `(2 nx, 2 ny)` is exactly midpoint subdivision.
pub fn flat_torus_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<SimplicialMesh> {
    if nx < 3 || ny < 4 || ny % 2 != 0 {
        return Err(Error::InvalidMesh(format!("torus lattice needs nx >= 3 and even ny >= 4 (got {nx} x {ny})")));
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let idx = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let shift = if j % 2 == 1 { 0.5 * hx } else { 0.0 };
            vertices.push(vec![i as f64 * hx + shift, j as f64 * hy]);
        }
    }
    let mut top = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if j % 2 == 0 {
                top.push(vec![idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                top.push(vec![idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            } else {
                top.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                top.push(vec![idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    SimplicialMesh::new(2, vertices, top, Some(vec![lx, ly]))
}

/// Square 2-torus of side `l` with `n` cells per side.
pub fn square_torus(n: usize, l: f64) -> Result<SimplicialMesh> {
    flat_torus_2d(n, n, l, l)
}

/// Cubic flat 3-torus of side `l` tiled by the body-centred cubic lattice:
/// cube corners plus cube centres, 12 congruent tetrahedra per cube.
pub fn bcc_torus_3d(n: usize, l: f64) -> Result<SimplicialMesh> {
    if n < 3 {
        return Err(Error::InvalidMesh(format!("BCC torus needs n >= 3 (got {n})")));
    }
    let h = l / n as f64;
    let corner = |i: usize, j: usize, k: usize| (i % n) + n * ((j % n) + n * (k % n));
    let centre = |i: usize, j: usize, k: usize| n * n * n + corner(i, j, k);
    let mut vertices = vec![Vec::new(); 2 * n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let (x, y, z) = (i as f64 * h, j as f64 * h, k as f64 * h);
                vertices[corner(i, j, k)] = vec![x, y, z];
                vertices[centre(i, j, k)] = vec![x + 0.5 * h, y + 0.5 * h, z + 0.5 * h];
            }
        }
    }
    let mut top = Vec::with_capacity(12 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let a = centre(i, j, k);
                for axis in 0..3 {
                    let mut base = [i, j, k];
                    base[axis] += 1;
                    let b = centre(base[0], base[1], base[2]);
                    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                    let ring: Vec<usize> = [(0, 0), (1, 0), (1, 1), (0, 1)]
                        .iter()
                        .map(|&(p, q)| {
                            let mut c = base;
                            c[u] += p;
                            c[w] += q;
                            corner(c[0], c[1], c[2])
                        })
                        .collect();
                    for r in 0..4 {
                        top.push(vec![a, b, ring[r], ring[(r + 1) % 4]]);
                    }
                }
            }
        }
    }
    orient_positively(&vertices, &mut top, Some(&[l, l, l]));
    SimplicialMesh::new(3, vertices, top, Some(vec![l, l, l]))
}

/// Flips top simplices with negative signed volume (top dimension equal to
/// the ambient dimension only).
fn orient_positively(vertices: &[Vec<f64>], top: &mut [Vec<usize>], period: Option<&[f64]>) {
    for s in top.iter_mut() {
        let p0 = &vertices[s[0]];
        let rows: Vec<Vec<f64>> = s[1..]
            .iter()
            .map(|&v| {
                vertices[v]
                    .iter()
                    .zip(p0)
                    .enumerate()
                    .map(|(c, (a, b))| {
                        let mut d = a - b;
                        if let Some(per) = period {
                            d -= per[c] * (d / per[c]).round();
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        let m = nalgebra::DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]);
        if m.determinant() < 0.0 {
            s.swap(0, 1);
        }
    }
}

/// Icosphere of the given radius: an icosahedron subdivided `level` times
/// with vertices pushed to the sphere.
pub fn icosphere(level: usize, radius: f64) -> Result<SimplicialMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec<f64>> = vec![
        vec![-1.0, t, 0.0],
        vec![1.0, t, 0.0],
        vec![-1.0, -t, 0.0],
        vec![1.0, -t, 0.0],
        vec![0.0, -1.0, t],
        vec![0.0, 1.0, t],
        vec![0.0, -1.0, -t],
        vec![0.0, 1.0, -t],
        vec![t, 0.0, -1.0],
        vec![t, 0.0, 1.0],
        vec![-t, 0.0, -1.0],
        vec![-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x *= radius / n);
    };
    vertices.iter_mut().for_each(normalize);
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<Vec<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let mut m: Vec<f64> = vs[a].iter().zip(&vs[b]).map(|(x, y)| 0.5 * (x + y)).collect();
                normalize(&mut m);
                vs.push(m);
                vs.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let top = faces.iter().map(|f| f.to_vec()).collect();
    SimplicialMesh::new(2, vertices, top, None)
}

/// The 3-sphere as the boundary of the 16-cell (cross-polytope) in R⁴.
pub fn sixteen_cell() -> Result<SimplicialMesh> {
    let mut vertices = Vec::new();
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; 4];
            v[axis] = sign;
            vertices.push(v);
        }
    }
    let mut top = Vec::new();
    for mask in 0..16usize {
        let mut s: Vec<usize> = (0..4).map(|axis| 2 * axis + ((mask >> axis) & 1)).collect();
        // orientation as the boundary of the ball: det[centroid, v1-v0, v2-v0, v3-v0] > 0
        let p = |i: usize| &vertices[s[i]];
        let cols: Vec<Vec<f64>> = std::iter::once((0..4).map(|c| (0..4).map(|i| p(i)[c]).sum::<f64>()).collect())
            .chain((1..4).map(|i| (0..4).map(|c| p(i)[c] - p(0)[c]).collect()))
            .collect();
        let m = nalgebra::DMatrix::from_fn(4, 4, |r, c| cols[c][r]);
        if m.determinant() < 0.0 {
            s.swap(0, 1);
        }
        top.push(s);
    }
    SimplicialMesh::new(3, vertices, top, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn torus_volume_and_euler_characteristic() {
        let m = square_torus(8, 2.0 * PI).unwrap();
        assert!((m.total_volume() - 4.0 * PI * PI).abs() < 1e-9);
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.quality().well_centered_fraction == 1.0);
    }

    #[test]
    fn refinement_preserves_volume() {
        let a = square_torus(8, 2.0 * PI).unwrap();
        let b = square_torus(16, 2.0 * PI).unwrap();
        assert!((a.total_volume() - b.total_volume()).abs() < 1e-9);
    }

    #[test]
    fn bcc_torus_is_closed_and_well_centered() {
        let m = bcc_torus_3d(3, 2.0 * PI).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert!((m.total_volume() - 8.0 * PI.powi(3)).abs() < 1e-9);
        assert_eq!(m.quality().well_centered_fraction, 1.0);
        assert!(m.dual_volumes(1).iter().all(|&v| v > 0.0));
        assert!(m.dual_volumes(2).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn spheres_have_euler_characteristic_two_or_zero() {
        let s2 = icosphere(2, 1.0).unwrap();
        assert_eq!(s2.euler_characteristic(), 2);
        let s3 = sixteen_cell().unwrap();
        assert_eq!(s3.euler_characteristic(), 0);
        assert_eq!(s3.count(3), 16);
    }

    #[test]
    fn rejects_odd_row_count() {
        assert!(flat_torus_2d(8, 7, 1.0, 1.0).is_err());
    }
}
