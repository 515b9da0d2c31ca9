//! Closed-form 1-forms used as magnetic potentials and as test oracles.
//!
//! Components are given in the chart (or, for the sphere, embedding)
//! coordinates. The differential is returned as the antisymmetric matrix
//! `F[i][j] = ∂_i ω_j − ∂_j ω_i`, so that `dω(u, v) = uᵀ F v`.

use serde::{Deserialize, Serialize};

use crate::geometry::ModelSpace;

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum AnalyticForm {
    Zero,
    /// Σ aᵢ dxᵢ.
    Constant {
        coeffs: Vec<f64>,
    },
    /// ε sin x dy.
    SinDy {
        eps: f64,
    },
    /// amp (sin z dx + cos z dy), a curl eigenfield with eigenvalue 1.
    Beltrami {
        amp: f64,
    },
    /// scale (−y dx + x dy) in embedding coordinates; on the unit sphere this
    /// is scale · sin²θ dφ.
    SphereRotation {
        scale: f64,
    },
    /// b dx / y in the upper half-plane; |ω| = b and dω = b · area.
    UniformFieldH2 {
        b: f64,
    },
    /// ½ b (−y dx + x dy) in the Euclidean plane; dω = b dx∧dy.
    PlaneUniform {
        b: f64,
    },
    /// amp ψ(r) (cos φ dx + sin φ dy) / y in the upper half-plane, with r the
    /// hyperbolic distance to `center` and ψ(r) = cos²(πr / 2R) for r < R.
    BumpH2 {
        center: [f64; 2],
        radius: f64,
        angle: f64,
        amp: f64,
    },
}

fn comp(x: &[f64], i: usize) -> f64 {
    x.get(i).copied().unwrap_or(0.0)
}

/// Gauss–Legendre nodes and weights on [0, 1], 8 points.
const GL8: [(f64, f64); 8] = [
    (0.019855071751231856, 0.05061426814518813),
    (0.10166676129318664, 0.11119051722668724),
    (0.2372337950418355, 0.15685332293894363),
    (0.4082826787521751, 0.18134189168918100),
    (0.5917173212478249, 0.18134189168918100),
    (0.7627662049581645, 0.15685332293894363),
    (0.8983332387068134, 0.11119051722668724),
    (0.9801449282487681, 0.05061426814518813),
];

impl AnalyticForm {
    /// Unit-L² form −α sin²θ dφ on the round unit sphere, α = (8π/3)^{-1/2}.
    pub fn normalized_sphere_form() -> Self {
        let alpha = (8.0 * std::f64::consts::PI / 3.0).powf(-0.5);
        AnalyticForm::SphereRotation { scale: -alpha }
    }

    pub fn scaled(&self, t: f64) -> Self {
        use AnalyticForm::*;
        match self {
            Zero => Zero,
            Constant { coeffs } => Constant { coeffs: coeffs.iter().map(|a| a * t).collect() },
            SinDy { eps } => SinDy { eps: eps * t },
            Beltrami { amp } => Beltrami { amp: amp * t },
            SphereRotation { scale } => SphereRotation { scale: scale * t },
            UniformFieldH2 { b } => UniformFieldH2 { b: b * t },
            PlaneUniform { b } => PlaneUniform { b: b * t },
            BumpH2 { center, radius, angle, amp } => {
                BumpH2 { center: *center, radius: *radius, angle: *angle, amp: amp * t }
            }
        }
    }

    /// Hyperbolic distance from the bump centre and ψ, ψ'(r)/sinh r.
    fn bump_profile(center: &[f64; 2], radius: f64, x: &[f64]) -> (f64, f64, f64, f64) {
        let (dx, dy) = (comp(x, 0) - center[0], comp(x, 1) - center[1]);
        let y = comp(x, 1);
        let q = 1.0 + (dx * dx + dy * dy) / (2.0 * y * center[1]);
        let r = q.max(1.0).acosh();
        if r >= radius {
            return (r, q, 0.0, 0.0);
        }
        let k = std::f64::consts::PI / radius;
        let psi = (0.5 * k * r).cos().powi(2);
        // ψ' = −(k/2) sin(k r)
        let dpsi_over_sinh = if r < 1e-6 { -0.5 * k * k } else { -0.5 * k * (k * r).sin() / r.sinh() };
        (r, q, psi, dpsi_over_sinh)
    }

    /// Covector components ω_i(x), padded to length 3.
    pub fn eval(&self, x: &[f64]) -> [f64; 3] {
        use AnalyticForm::*;
        match self {
            Zero => [0.0; 3],
            Constant { coeffs } => [comp(coeffs, 0), comp(coeffs, 1), comp(coeffs, 2)],
            SinDy { eps } => [0.0, eps * comp(x, 0).sin(), 0.0],
            Beltrami { amp } => {
                let z = comp(x, 2);
                [amp * z.sin(), amp * z.cos(), 0.0]
            }
            SphereRotation { scale } => [-scale * comp(x, 1), scale * comp(x, 0), 0.0],
            UniformFieldH2 { b } => [b / comp(x, 1), 0.0, 0.0],
            PlaneUniform { b } => [-0.5 * b * comp(x, 1), 0.5 * b * comp(x, 0), 0.0],
            BumpH2 { center, radius, angle, amp } => {
                let (_, _, psi, _) = Self::bump_profile(center, *radius, x);
                let f = amp * psi / comp(x, 1);
                [f * angle.cos(), f * angle.sin(), 0.0]
            }
        }
    }

    /// Antisymmetric matrix of dω at x.
    pub fn differential(&self, x: &[f64]) -> Mat3 {
        use AnalyticForm::*;
        let mut f = [[0.0; 3]; 3];
        let mut set = |i: usize, j: usize, v: f64| {
            f[i][j] = v;
            f[j][i] = -v;
        };
        match self {
            Zero | Constant { .. } => {}
            SinDy { eps } => set(0, 1, eps * comp(x, 0).cos()),
            Beltrami { amp } => {
                let z = comp(x, 2);
                // ∂_z ω_x = amp cos z, ∂_z ω_y = −amp sin z
                set(2, 0, amp * z.cos());
                set(2, 1, -amp * z.sin());
            }
            SphereRotation { scale } => set(0, 1, 2.0 * scale),
            UniformFieldH2 { b } => set(0, 1, b / comp(x, 1).powi(2)),
            PlaneUniform { b } => set(0, 1, *b),
            BumpH2 { center, radius, angle, amp } => {
                let (r, q, psi, dpsi_over_sinh) = Self::bump_profile(center, *radius, x);
                if r < *radius {
                    let (xx, y) = (comp(x, 0), comp(x, 1));
                    let qx = (xx - center[0]) / (y * center[1]);
                    let qy = (y - center[1]) / (y * center[1])
                        - ((xx - center[0]).powi(2) + (y - center[1]).powi(2)) / (2.0 * y * y * center[1]);
                    let _ = q;
                    // ∂ψ = ψ'(r) ∂q / sinh r
                    let (px, py) = (dpsi_over_sinh * qx, dpsi_over_sinh * qy);
                    let (c, s) = (angle.cos(), angle.sin());
                    // ω = (amp ψ / y)(c, s): F_xy = ∂_x ω_y − ∂_y ω_x
                    let fx = amp * s * px / y;
                    let fy = amp * c * (py / y - psi / (y * y));
                    set(0, 1, fx - fy);
                }
            }
        }
        f
    }

    /// Pointwise upper bounds (A, D) for |ω|_g and the comass of dω over the
    /// given space. `None` when unbounded.
    pub fn bounds(&self, space: &ModelSpace) -> (Option<f64>, Option<f64>) {
        use AnalyticForm::*;
        match self {
            Zero => (Some(0.0), Some(0.0)),
            Constant { coeffs } => {
                let a = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                match space {
                    ModelSpace::Hyperbolic { .. } => (None, None),
                    _ => (Some(a), Some(0.0)),
                }
            }
            SinDy { eps } => (Some(eps.abs()), Some(eps.abs())),
            Beltrami { amp } => (Some(amp.abs()), Some(amp.abs())),
            SphereRotation { scale } => {
                let r = match space {
                    ModelSpace::RoundSphere { radius, .. } => *radius,
                    _ => return (None, Some(2.0 * scale.abs())),
                };
                (Some(scale.abs() * r), Some(2.0 * scale.abs()))
            }
            UniformFieldH2 { b } => (Some(b.abs()), Some(b.abs())),
            PlaneUniform { b } => (None, Some(b.abs())),
            BumpH2 { radius, angle, amp, .. } => {
                let d = amp.abs() * (std::f64::consts::PI / (2.0 * radius) + angle.cos().abs());
                (Some(amp.abs()), Some(d))
            }
        }
    }

    /// ∫ ω along the straight chart segment from a to b.
    pub fn segment_integral(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = (0..3).map(|i| comp(b, i) - comp(a, i)).collect();
        let mut total = 0.0;
        for &(t, w) in &GL8 {
            let p: Vec<f64> = (0..3).map(|i| comp(a, i) + t * d[i]).collect();
            let v = self.eval(&p);
            total += w * (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]);
        }
        total
    }

    /// ω(v) at x.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> f64 {
        let w = self.eval(x);
        (0..3).map(|i| w[i] * comp(v, i)).sum()
    }
}
