//! Mañé critical values of magnetic systems: the Hamiltonian L∞ problem, its
//! strict variant over harmonic shifts, the Lagrangian free-period bisection,
//! finite-cover estimates of the universal value and the subsolution and
//! calibration defects.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dec::{self, Cochain, HodgeOperators};
use crate::error::{Error, Result};
use crate::forms::AnalyticForm;
use crate::geometry::{flat_torus_2d, ModelSpace};
use crate::linalg;
use crate::magflow::Trajectory;
use crate::optim::{lbfgs, LbfgsOptions};

/// A geometry together with a magnetic potential ω and its field Ω = dω.
///
/// Dynamics on the round sphere use embedding coordinates in R³; all other
/// spaces use their chart coordinates.
#[derive(Clone, Debug)]
pub struct MagneticSystem {
    space: ModelSpace,
    form: Option<AnalyticForm>,
    ops: Option<Arc<HodgeOperators>>,
    omega: Option<Cochain>,
    domega: Option<Cochain>,
    a_bound: f64,
    d_bound: f64,
}

impl MagneticSystem {
    /// Analytic system on a model space.
    pub fn analytic(space: ModelSpace, form: AnalyticForm) -> Self {
        let (a, d) = form.bounds(&space);
        MagneticSystem {
            space,
            form: Some(form),
            ops: None,
            omega: None,
            domega: None,
            a_bound: a.unwrap_or(f64::INFINITY),
            d_bound: d.unwrap_or(f64::INFINITY),
        }
    }

    /// Analytic system that is also sampled onto a mesh.
    pub fn on_mesh(space: ModelSpace, form: AnalyticForm, ops: Arc<HodgeOperators>) -> Result<Self> {
        let mut sys = Self::analytic(space, form);
        let omega = dec::sample_one_form(ops.mesh(), sys.form.as_ref().unwrap());
        let domega = dec::coboundary(&ops, &omega)?;
        sys.omega = Some(omega);
        sys.domega = Some(domega);
        sys.ops = Some(ops);
        Ok(sys)
    }

    /// System given only by a 1-cochain (for example an eigenform). Bounds are
    /// the discrete sup-norm surrogates.
    pub fn from_cochain(space: ModelSpace, ops: Arc<HodgeOperators>, omega: Cochain) -> Result<Self> {
        let domega = dec::coboundary(&ops, &omega)?;
        let a_bound = dec::linf_norm(&ops, &omega)?;
        let d_bound = dec::linf_norm(&ops, &domega)?;
        Ok(MagneticSystem {
            space,
            form: None,
            ops: Some(ops),
            omega: Some(omega),
            domega: Some(domega),
            a_bound,
            d_bound,
        })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }
    pub fn form(&self) -> Option<&AnalyticForm> {
        self.form.as_ref()
    }
    pub fn ops(&self) -> Option<&Arc<HodgeOperators>> {
        self.ops.as_ref()
    }
    pub fn omega(&self) -> Option<&Cochain> {
        self.omega.as_ref()
    }
    pub fn domega(&self) -> Option<&Cochain> {
        self.domega.as_ref()
    }
    /// A = ‖ω‖∞ (upper bound).
    pub fn a_bound(&self) -> f64 {
        self.a_bound
    }
    /// D = ‖dω‖∞ (upper bound).
    pub fn d_bound(&self) -> f64 {
        self.d_bound
    }

    fn require_form(&self, what: &str) -> Result<&AnalyticForm> {
        self.form.as_ref().ok_or_else(|| Error::Unsupported(format!("{what} needs an analytic form")))
    }

    fn require_mesh(&self, what: &str) -> Result<(&Arc<HodgeOperators>, &Cochain)> {
        match (&self.ops, &self.omega) {
            (Some(o), Some(w)) => Ok((o, w)),
            _ => Err(Error::Unsupported(format!("{what} needs a mesh"))),
        }
    }

    pub fn is_embedded_sphere(&self) -> bool {
        matches!(self.space, ModelSpace::RoundSphere { dim: 2, .. })
    }

    /// Coordinate dimension of positions and velocities.
    pub fn coord_dim(&self) -> usize {
        if self.is_embedded_sphere() {
            3
        } else {
            self.space.dim()
        }
    }

    fn diag_metric(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_embedded_sphere() {
            return Ok(vec![1.0; 3]);
        }
        let g = self.space.metric_tensor(x)?;
        Ok((0..g.nrows()).map(|i| g[(i, i)]).collect())
    }

    /// |v|_g at x.
    pub fn speed(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.diag_metric(x)?;
        Ok(g.iter().zip(v).map(|(g, v)| g * v * v).sum::<f64>().sqrt())
    }

    /// ω_x(v).
    pub fn form_apply(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.require_form("pointwise evaluation")?.apply(x, v))
    }

    /// |ω_x|_g.
    pub fn form_norm(&self, x: &[f64]) -> Result<f64> {
        let w = self.require_form("pointwise evaluation")?.eval(x);
        if self.is_embedded_sphere() {
            let n = linalg::norm(x);
            let dot = (0..3).map(|i| w[i] * x[i]).sum::<f64>() / (n * n);
            return Ok((0..3).map(|i| (w[i] - dot * x[i]).powi(2)).sum::<f64>().sqrt());
        }
        let g = self.diag_metric(x)?;
        Ok(g.iter().enumerate().map(|(i, g)| w[i] * w[i] / g).sum::<f64>().sqrt())
    }

    /// Comass of Ω = dω at x.
    pub fn field_norm(&self, x: &[f64]) -> Result<f64> {
        let f = self.require_form("pointwise evaluation")?.differential(x);
        if self.is_embedded_sphere() {
            let n = linalg::norm(x);
            let axial = [f[1][2], f[2][0], f[0][1]];
            return Ok(((0..3).map(|i| axial[i] * x[i]).sum::<f64>() / n).abs());
        }
        let g = self.diag_metric(x)?;
        let dim = g.len();
        let mut s = 0.0;
        for i in 0..dim {
            for j in i + 1..dim {
                s += f[i][j] * f[i][j] / (g[i] * g[j]);
            }
        }
        Ok(s.sqrt())
    }

    /// Lorentz force Y(v) defined by Ω(v, w) = g(Y(v), w).
    pub fn lorentz_force(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let f = self.require_form("Lorentz force")?.differential(x);
        let n = self.coord_dim();
        // (Fᵀ v)_j = Σ_i v_i F_ij
        let mut y: Vec<f64> = (0..n).map(|j| (0..n).map(|i| v[i] * f[i][j]).sum()).collect();
        if self.is_embedded_sphere() {
            let r2 = linalg::dot(x, x);
            let c = linalg::dot(&y, x) / r2;
            linalg::axpy(-c, x, &mut y);
        } else {
            let g = self.diag_metric(x)?;
            if g.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                return Err(Error::NonFinite("metric"));
            }
            y.iter_mut().zip(&g).for_each(|(a, g)| *a /= g);
        }
        Ok(y)
    }

    /// Largest sampled |ω| and comass of dω over `n` seeded points, to be
    /// compared with the certified bounds A and D.
    pub fn sample_bounds(&self, n: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = (0.0f64, 0.0f64);
        for _ in 0..n {
            let x = random_point(&self.space, &mut rng);
            worst.0 = worst.0.max(self.form_norm(&x)?);
            worst.1 = worst.1.max(self.field_norm(&x)?);
        }
        Ok(worst)
    }
}

/// A random point in a representative region of the space (fundamental
/// domain, box, or sphere surface in embedding coordinates).
pub fn random_point(space: &ModelSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match space {
        ModelSpace::FlatTorus { periods } => periods.iter().map(|l| rng.gen_range(0.0..*l)).collect(),
        ModelSpace::Euclidean { dim } => (0..*dim).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        ModelSpace::Hyperbolic { dim } => {
            let mut x: Vec<f64> = (0..*dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            x[dim - 1] = (rng.gen_range(-3.0f64..3.0)).exp();
            x
        }
        ModelSpace::RoundSphere { dim, radius } => {
            let mut v: Vec<f64> = (0..dim + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            loop {
                let n = linalg::norm(&v);
                if n > 1e-3 && n <= 1.0 {
                    return v.iter().map(|x| x * radius / n).collect();
                }
                v = (0..dim + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lagrangian action along trajectories

fn lagrangian_samples(sys: &MagneticSystem, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.samples
        .iter()
        .map(|s| {
            let v2 = sys.speed(&s.x, &s.v)?.powi(2);
            let w = sys.form_apply(&s.x, &s.v)?;
            let l = 0.5 * v2 - w;
            if l.is_finite() {
                Ok(l)
            } else {
                Err(Error::NonFinite("Lagrangian sample"))
            }
        })
        .collect()
}

/// Composite quadrature (Simpson on uniform samples with an even number of
/// intervals, trapezoid otherwise).
pub fn integrate_samples(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    let h0 = t[1] - t[0];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0.abs());
    if uniform && (n - 1) % 2 == 0 {
        let mut s = f[0] + f[n - 1];
        for i in 1..n - 1 {
            s += if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] };
        }
        return s * h0 / 3.0;
    }
    t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

/// A(γ) = ∫ (½|γ̇|² − ω(γ̇)) dt.
pub fn action(sys: &MagneticSystem, traj: &Trajectory) -> Result<f64> {
    let l = lagrangian_samples(sys, traj)?;
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    Ok(integrate_samples(&t, &l))
}

/// S_k(γ) = A(γ) + k T(γ).
pub fn free_period_action(sys: &MagneticSystem, traj: &Trajectory, k: f64) -> Result<f64> {
    if !k.is_finite() {
        return Err(Error::NonFinite("energy level k"));
    }
    Ok(action(sys, traj)? + k * traj.duration())
}

// ---------------------------------------------------------------------------
// Hamiltonian side: inf_u ½‖du + ω‖∞²

#[derive(Clone, Debug)]
pub struct LinfOptions {
    /// Agreement required between the smoothed and the exact maximum, and the
    /// target smoothed-gradient norm.
    pub tol: f64,
    pub max_stages: usize,
    pub iterations_per_stage: usize,
}

impl Default for LinfOptions {
    fn default() -> Self {
        LinfOptions { tol: 1e-6, max_stages: 60, iterations_per_stage: 400 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfSolution {
    pub c: f64,
    #[serde(skip)]
    pub u: Option<Cochain>,
    pub harmonic_coeffs: Vec<f64>,
    pub smoothed_grad_norm: f64,
    pub smoothing_gap: f64,
    pub final_temperature: f64,
    pub stages: usize,
    pub converged: bool,
}

/// Per-top-simplex data of the pointwise field W(du + ω + Σβ_k h_k) at the
/// barycenter.
struct LinfProblem {
    nv: usize,
    nh: usize,
    dim: usize,
    base: Vec<Vec<f64>>,
    /// (a, b, vector): contributes (u_b − u_a)·vector.
    edges: Vec<Vec<(usize, usize, Vec<f64>)>>,
    harm: Vec<Vec<Vec<f64>>>,
}

impl LinfProblem {
    fn new(ops: &HodgeOperators, omega: &[f64], harmonic: &[Cochain]) -> Self {
        let mesh = ops.mesh();
        let n = mesh.dim();
        let nt = mesh.count(n);
        let mut base = Vec::with_capacity(nt);
        let mut edges = Vec::with_capacity(nt);
        let mut harm = Vec::with_capacity(nt);
        for t in 0..nt {
            base.push(ops.whitney_at(t, omega));
            edges.push(
                ops.whitney_entries(t)
                    .iter()
                    .map(|(e, v)| {
                        let s = &mesh.simplices(1)[*e];
                        (s[0], s[1], v.clone())
                    })
                    .collect(),
            );
            harm.push(harmonic.iter().map(|h| ops.whitney_at(t, &h.values)).collect());
        }
        LinfProblem { nv: mesh.count(0), nh: harmonic.len(), dim: mesh.ambient_dim(), base, edges, harm }
    }

    fn field(&self, t: usize, z: &[f64]) -> Vec<f64> {
        let mut g = self.base[t].clone();
        for (a, b, v) in &self.edges[t] {
            linalg::axpy(z[*b] - z[*a], v, &mut g);
        }
        for (k, h) in self.harm[t].iter().enumerate() {
            linalg::axpy(z[self.nv + k], h, &mut g);
        }
        g
    }

    fn exact(&self, z: &[f64]) -> f64 {
        (0..self.base.len()).map(|t| 0.5 * linalg::dot(&self.field(t, z), &self.field(t, z))).fold(0.0, f64::max)
    }

    /// τ log Σ exp(q_t/τ) and its gradient.
    fn smoothed(&self, z: &[f64], tau: f64, grad: &mut [f64]) -> f64 {
        let nt = self.base.len();
        let fields: Vec<Vec<f64>> = (0..nt).map(|t| self.field(t, z)).collect();
        let q: Vec<f64> = fields.iter().map(|g| 0.5 * linalg::dot(g, g)).collect();
        let qmax = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = q.iter().map(|q| ((q - qmax) / tau).exp()).collect();
        let z_sum: f64 = w.iter().sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in 0..nt {
            let p = w[t] / z_sum;
            if p < 1e-300 {
                continue;
            }
            let g = &fields[t];
            for (a, b, v) in &self.edges[t] {
                let c = p * linalg::dot(g, v);
                grad[*b] += c;
                grad[*a] -= c;
            }
            for (k, h) in self.harm[t].iter().enumerate() {
                grad[self.nv + k] += p * linalg::dot(g, h);
            }
        }
        qmax + tau * z_sum.ln()
    }
}

fn solve_linf(ops: &HodgeOperators, omega: &Cochain, harmonic: &[Cochain], opts: &LinfOptions) -> Result<LinfSolution> {
    let prob = LinfProblem::new(ops, &omega.values, harmonic);
    let _ = prob.dim;
    let mut z = vec![0.0; prob.nv + prob.nh];
    let c0 = prob.exact(&z);
    if c0 == 0.0 {
        return Ok(LinfSolution {
            c: 0.0,
            u: Some(Cochain::zeros(ops.mesh(), 0)),
            harmonic_coeffs: vec![0.0; prob.nh],
            smoothed_grad_norm: 0.0,
            smoothing_gap: 0.0,
            final_temperature: 0.0,
            stages: 0,
            converged: true,
        });
    }
    let mut tau = c0;
    let mut stages = 0;
    let mut gap = f64::INFINITY;
    let mut grad_norm = f64::INFINITY;
    let mut grad = vec![0.0; z.len()];
    while stages < opts.max_stages {
        stages += 1;
        let lb =
            LbfgsOptions { max_iter: opts.iterations_per_stage, memory: 12, grad_tol: opts.tol * 1e-2, f_tol: 1e-15 };
        let res = lbfgs(|x, g| prob.smoothed(x, tau, g), z.clone(), &lb, None);
        z = res.x;
        let smooth = prob.smoothed(&z, tau, &mut grad);
        grad_norm = linalg::norm(&grad);
        let exact = prob.exact(&z);
        gap = smooth - exact;
        if gap <= opts.tol && grad_norm <= opts.tol {
            break;
        }
        if gap <= opts.tol && tau < 1e-3 * opts.tol {
            break;
        }
        tau *= 0.5;
    }
    let c = prob.exact(&z);
    // the gauge constant of u is arbitrary; fix the mean to zero
    let mean = z[..prob.nv].iter().sum::<f64>() / prob.nv as f64;
    let u: Vec<f64> = z[..prob.nv].iter().map(|v| v - mean).collect();
    Ok(LinfSolution {
        c,
        u: Some(Cochain::from_values(ops.mesh(), 0, u)?),
        harmonic_coeffs: z[prob.nv..].to_vec(),
        smoothed_grad_norm: grad_norm,
        smoothing_gap: gap,
        final_temperature: tau,
        stages,
        converged: gap <= opts.tol && grad_norm <= opts.tol.max(1e-3 * c.sqrt()),
    })
}

/// c(H) = inf_u ½‖du + ω‖∞² over vertex potentials u.
pub fn critical_value_hamiltonian(sys: &MagneticSystem, opts: &LinfOptions) -> Result<LinfSolution> {
    let (ops, omega) = sys.require_mesh("critical_value_hamiltonian")?;
    solve_linf(ops, omega, &[], opts)
}

/// c₀(H) = inf_{u, h} ½‖du + h + ω‖∞² with h harmonic.
pub fn strict_critical_value(sys: &MagneticSystem, opts: &LinfOptions) -> Result<LinfSolution> {
    let (ops, omega) = sys.require_mesh("strict_critical_value")?;
    let basis = dec::harmonic_basis(ops)?;
    solve_linf(ops, omega, &basis, opts)
}

/// max over top simplices of ½|W(du + ω)|² − c.
pub fn subsolution_defect(sys: &MagneticSystem, u: &Cochain, c: f64) -> Result<f64> {
    let (ops, omega) = sys.require_mesh("subsolution_defect")?;
    let du = dec::coboundary(ops, u)?;
    let total = du.add(omega)?;
    let mesh = ops.mesh();
    let mut worst = f64::NEG_INFINITY;
    for t in 0..mesh.count(mesh.dim()) {
        let g = ops.whitney_at(t, &total.values);
        worst = worst.max(0.5 * linalg::dot(&g, &g));
    }
    Ok(worst - c)
}

/// Pointwise version on a model space: max over `points` of ½|du + ω|² − c,
/// with `du` the differential of u in chart coordinates.
pub fn subsolution_defect_pointwise(
    sys: &MagneticSystem,
    du: impl Fn(&[f64]) -> Vec<f64>,
    c: f64,
    points: &[Vec<f64>],
) -> Result<f64> {
    let form = sys.require_form("subsolution_defect_pointwise")?;
    let mut worst = f64::NEG_INFINITY;
    for x in points {
        let w = form.eval(x);
        let g = sys.diag_metric(x)?;
        let d = du(x);
        let s: f64 = (0..g.len()).map(|i| (d.get(i).copied().unwrap_or(0.0) + w[i]).powi(2) / g[i]).sum();
        worst = worst.max(0.5 * s);
    }
    Ok(worst - c)
}

/// u(γ(t₁)) − u(γ(t₀)) − ∫_{t₀}^{t₁} (c + L(γ, γ̇)) dt.
pub fn calibration_defect(
    sys: &MagneticSystem,
    u: impl Fn(&[f64]) -> f64,
    c: f64,
    traj: &Trajectory,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    if traj.exited {
        return Err(Error::OutsideChart {
            space: sys.space.name(),
            point: traj.samples.last().map(|s| s.x.clone()).unwrap_or_default(),
        });
    }
    let sub: Vec<&crate::magflow::Sample> =
        traj.samples.iter().filter(|s| s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12).collect();
    if sub.len() < 2 {
        return Err(Error::HorizonTooShort { horizon: t1 - t0, required: 0.0 });
    }
    let t: Vec<f64> = sub.iter().map(|s| s.t).collect();
    let f: Vec<f64> = sub
        .iter()
        .map(|s| Ok(c + 0.5 * sys.speed(&s.x, &s.v)?.powi(2) - sys.form_apply(&s.x, &s.v)?))
        .collect::<Result<_>>()?;
    let first = sub.first().unwrap();
    let last = sub.last().unwrap();
    Ok(u(&last.x) - u(&first.x) - integrate_samples(&t, &f))
}

// ---------------------------------------------------------------------------
// Lagrangian side: bisection on k over closed polylines

#[derive(Clone, Debug)]
pub struct LagrangianOptions {
    pub nodes: usize,
    pub starts_per_class: usize,
    pub max_winding: i64,
    pub seed: u64,
    /// Bisection bracket width on k.
    pub tol: f64,
    pub descent_iterations: usize,
    /// Longest seed loop as a multiple of the largest period.
    pub max_seed_extent: f64,
}

impl Default for LagrangianOptions {
    fn default() -> Self {
        LagrangianOptions {
            nodes: 64,
            starts_per_class: 16,
            max_winding: 1,
            seed: 11,
            tol: 1e-3,
            descent_iterations: 300,
            max_seed_extent: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopWitness {
    pub nodes: Vec<Vec<f64>>,
    /// Closing displacement in units of the periods.
    pub winding: Vec<i64>,
    pub length: f64,
    pub integral: f64,
    /// (1/ℓ) ∫ω.
    pub ratio: f64,
    pub k: f64,
    pub action: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LagrangianResult {
    pub c: f64,
    pub k_subcritical: f64,
    pub k_supercritical: f64,
    pub bisection_steps: usize,
    pub nullhomologous_only: bool,
    /// Loop with S_k < 0 at the largest subcritical k found.
    pub witness: Option<LoopWitness>,
    /// Largest ratio (1/ℓ)∫ω seen over all final loops.
    pub best_ratio: f64,
    pub best_ratio_loop: Option<LoopWitness>,
}

struct LoopFamily<'a> {
    form: &'a AnalyticForm,
    n: usize,
    dim: usize,
    shift: Vec<f64>,
}

impl<'a> LoopFamily<'a> {
    fn node(&self, p: &[f64], i: usize) -> Vec<f64> {
        let i = i % self.n;
        p[i * self.dim..(i + 1) * self.dim].to_vec()
    }

    /// End point of segment i (the last segment closes with the shift).
    fn seg(&self, p: &[f64], i: usize) -> (Vec<f64>, Vec<f64>) {
        let a = self.node(p, i);
        let mut b = self.node(p, i + 1);
        if i + 1 == self.n {
            linalg::axpy(1.0, &self.shift, &mut b);
        }
        (a, b)
    }

    fn length_and_integral(&self, p: &[f64]) -> (f64, f64) {
        let mut l = 0.0;
        let mut w = 0.0;
        for i in 0..self.n {
            let (a, b) = self.seg(p, i);
            let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            l += linalg::norm(&d);
            w += self.form.segment_integral(&a, &b);
        }
        (l, w)
    }

    /// S_k with the period eliminated, ℓ√(2k) − ∫ω, and its gradient.
    fn objective(&self, p: &[f64], k: f64, grad: &mut [f64]) -> f64 {
        const GL: [(f64, f64); 4] = [
            (0.069431844202973713, 0.17392742256872692),
            (0.33000947820757187, 0.32607257743127307),
            (0.66999052179242813, 0.32607257743127307),
            (0.93056815579702629, 0.17392742256872692),
        ];
        let sk = (2.0 * k).sqrt();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        let dim = self.dim;
        for i in 0..self.n {
            let (a, b) = self.seg(p, i);
            let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            let len = (linalg::dot(&d, &d) + 1e-24).sqrt();
            total += sk * len - self.form.segment_integral(&a, &b);
            let j = (i + 1) % self.n;
            for c in 0..dim {
                grad[i * dim + c] -= sk * d[c] / len;
                grad[j * dim + c] += sk * d[c] / len;
            }
            // variation of ∫ω: node i gets ∫(1−t)FΔ, node i+1 gets ∫tFΔ
            for &(t, w) in &GL {
                let x: Vec<f64> = (0..dim).map(|c| a[c] + t * d[c]).collect();
                let f = self.form.differential(&x);
                for r in 0..dim {
                    let fd: f64 = (0..dim).map(|c| f[r][c] * d[c]).sum();
                    grad[i * dim + r] -= w * (1.0 - t) * fd;
                    grad[j * dim + r] -= w * t * fd;
                }
            }
        }
        total
    }
}

fn winding_classes(dim: usize, max: i64, null_only: bool) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0; dim]];
    if null_only || max == 0 {
        return out;
    }
    let mut cur = vec![-max; dim];
    loop {
        if cur.iter().any(|&c| c != 0) {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == dim {
                return out;
            }
            cur[i] += 1;
            if cur[i] > max {
                cur[i] = -max;
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// Seed loop: rectangles and ellipses of varied aspect for the trivial
/// class, perturbed straight lines otherwise.
fn seed_loop(rng: &mut ChaCha8Rng, n: usize, dim: usize, periods: &[f64], shift: &[f64], extent: f64) -> Vec<f64> {
    let lmax = periods.iter().cloned().fold(0.0, f64::max);
    let origin: Vec<f64> = periods.iter().map(|l| rng.gen_range(0.0..*l)).collect();
    let mut p = vec![0.0; n * dim];
    if shift.iter().all(|&s| s == 0.0) {
        let (ax, ay) = if dim == 1 {
            (0, 0)
        } else {
            let a = rng.gen_range(0..dim);
            let mut b = rng.gen_range(0..dim - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        };
        let w = rng.gen_range(0.1..1.0) * periods[ax];
        let h = lmax * (rng.gen_range(0.0f64..1.0) * (extent / 0.1).ln()).exp() * 0.1;
        let orient = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let rect = rng.gen_bool(0.6);
        for i in 0..n {
            let s = i as f64 / n as f64;
            let (u, v) = if rect {
                // perimeter parametrization of a w × h rectangle
                let per = 2.0 * (w + h);
                let q = s * per;
                if q < w {
                    (q, 0.0)
                } else if q < w + h {
                    (w, q - w)
                } else if q < 2.0 * w + h {
                    (2.0 * w + h - q, h)
                } else {
                    (0.0, per - q)
                }
            } else {
                let th = 2.0 * std::f64::consts::PI * s;
                (0.5 * w * (1.0 - th.cos()), 0.5 * h * th.sin())
            };
            p[i * dim + ax] = origin[ax] + u;
            if dim > 1 {
                p[i * dim + ay] = origin[ay] + orient * v;
            }
            for c in 0..dim {
                if c != ax && c != ay {
                    p[i * dim + c] = origin[c];
                }
            }
        }
    } else {
        let amp = rng.gen_range(0.0..0.2) * lmax;
        let freq = rng.gen_range(1..4) as f64;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir = rng.gen_range(0..dim);
        for i in 0..n {
            let s = i as f64 / n as f64;
            for c in 0..dim {
                p[i * dim + c] = origin[c] + s * shift[c];
            }
            p[i * dim + dir] += amp * (std::f64::consts::TAU * freq * s + phase).sin();
        }
    }
    p
}

struct SearchOutcome {
    found: Option<LoopWitness>,
    best_ratio: Option<LoopWitness>,
}

fn loop_search(
    form: &AnalyticForm,
    periods: &[f64],
    classes: &[Vec<i64>],
    k: f64,
    opts: &LagrangianOptions,
    round: u64,
) -> SearchOutcome {
    let dim = periods.len();
    let jobs: Vec<(usize, usize)> =
        (0..classes.len()).flat_map(|c| (0..opts.starts_per_class).map(move |s| (c, s))).collect();
    let results: Vec<(Option<LoopWitness>, LoopWitness)> = jobs
        .par_iter()
        .map(|&(ci, si)| {
            let w = &classes[ci];
            let shift: Vec<f64> = w.iter().zip(periods).map(|(w, l)| *w as f64 * l).collect();
            let fam = LoopFamily { form, n: opts.nodes, dim, shift: shift.clone() };
            let seed = opts.seed ^ ((ci as u64) << 32) ^ (si as u64) ^ (round << 48);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p0 = seed_loop(&mut rng, opts.nodes, dim, periods, &shift, opts.max_seed_extent);
            let lb = LbfgsOptions { max_iter: opts.descent_iterations, memory: 8, grad_tol: 1e-10, f_tol: 1e-12 };
            let res = lbfgs(|p, g| fam.objective(p, k, g), p0, &lb, Some(&|f: f64| f < -1e-6));
            let (length, integral) = fam.length_and_integral(&res.x);
            let nodes: Vec<Vec<f64>> = (0..opts.nodes).map(|i| fam.node(&res.x, i)).collect();
            let action = (2.0 * k).sqrt() * length - integral;
            let wit = LoopWitness {
                nodes,
                winding: w.clone(),
                length,
                integral,
                ratio: if length > 0.0 { integral / length } else { 0.0 },
                k,
                action,
            };
            let found = if action < -1e-6 { Some(wit.clone()) } else { None };
            (found, wit)
        })
        .collect();
    let found = results.iter().find_map(|r| r.0.clone());
    let best_ratio = results.into_iter().map(|r| r.1).filter(|w| w.length > 1e-6).fold(
        None,
        |acc: Option<LoopWitness>, w| match acc {
            Some(a) if a.ratio >= w.ratio => Some(a),
            _ => Some(w),
        },
    );
    SearchOutcome { found, best_ratio }
}

/// c(L) by bisection on k over closed polylines with free period; with
/// `nullhomologous_only`, only loops with zero winding are searched (c₀ on
/// tori).
pub fn critical_value_lagrangian(
    sys: &MagneticSystem,
    opts: &LagrangianOptions,
    nullhomologous_only: bool,
) -> Result<LagrangianResult> {
    let form = sys.require_form("critical_value_lagrangian")?;
    let (periods, max_winding) = match sys.space() {
        ModelSpace::FlatTorus { periods } => (periods.clone(), opts.max_winding),
        ModelSpace::Euclidean { dim } => (vec![2.0 * std::f64::consts::PI; *dim], 0),
        other => {
            return Err(Error::Unsupported(format!("Lagrangian loop search on {}", other.name())));
        }
    };
    let classes = winding_classes(periods.len(), max_winding, nullhomologous_only);
    let mut lo = 0.0;
    let mut hi = if sys.a_bound().is_finite() { 0.5 * sys.a_bound().powi(2) } else { 1.0 };
    let mut witness = None;
    let mut best: Option<LoopWitness> = None;
    let mut steps = 0u64;
    let keep_best = |b: Option<LoopWitness>, best: &mut Option<LoopWitness>| {
        if let Some(b) = b {
            if best.as_ref().map(|x| b.ratio > x.ratio).unwrap_or(true) {
                *best = Some(b);
            }
        }
    };
    if !sys.a_bound().is_finite() {
        // grow the bracket until a supercritical level is seen
        loop {
            let out = loop_search(form, &periods, &classes, hi, opts, steps);
            steps += 1;
            keep_best(out.best_ratio, &mut best);
            match out.found {
                Some(w) => {
                    lo = hi;
                    witness = Some(w);
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Err(Error::NoBracket { lo: 0.0, hi });
                    }
                }
                None => break,
            }
        }
    }
    while hi - lo > opts.tol {
        let k = 0.5 * (lo + hi);
        let out = loop_search(form, &periods, &classes, k, opts, steps);
        steps += 1;
        keep_best(out.best_ratio, &mut best);
        match out.found {
            Some(w) => {
                lo = k;
                witness = Some(w);
            }
            None => hi = k,
        }
    }
    Ok(LagrangianResult {
        c: 0.5 * (lo + hi),
        k_subcritical: lo,
        k_supercritical: hi,
        bisection_steps: steps as usize,
        nullhomologous_only,
        best_ratio: best.as_ref().map(|b| b.ratio).unwrap_or(0.0),
        best_ratio_loop: best,
        witness,
    })
}

// ---------------------------------------------------------------------------
// Finite covers

/// c on the n×n covers of a flat 2-torus (orders given), each computed by
/// the Hamiltonian solver on a mesh of `cells_per_period` cells per period
/// direction. Fails when a cover would exceed `cell_budget` triangles.
pub fn universal_critical_value_estimate(
    space: &ModelSpace,
    form: &AnalyticForm,
    cells_per_period: usize,
    orders: &[usize],
    cell_budget: usize,
    opts: &LinfOptions,
) -> Result<Vec<(usize, f64)>> {
    let periods = match space {
        ModelSpace::FlatTorus { periods } if periods.len() == 2 => periods.clone(),
        other => return Err(Error::Unsupported(format!("cover tower on {}", other.name()))),
    };
    for &k in orders {
        let cells = 2 * (k * cells_per_period).pow(2);
        if cells > cell_budget {
            return Err(Error::ResourceBudget { order: k, cells, budget: cell_budget });
        }
    }
    orders
        .par_iter()
        .map(|&k| {
            let n = k * cells_per_period;
            let mesh = flat_torus_2d(n, n + n % 2, periods[0] * k as f64, periods[1] * k as f64)?;
            let ops = Arc::new(HodgeOperators::new(Arc::new(mesh))?);
            let cover_space = ModelSpace::FlatTorus { periods: vec![periods[0] * k as f64, periods[1] * k as f64] };
            let sys = MagneticSystem::on_mesh(cover_space, form.clone(), ops)?;
            Ok((k, critical_value_hamiltonian(&sys, opts)?.c))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, Serialize)]
pub struct CriticalValueReport {
    pub scenario: String,
    pub c_hamiltonian: Option<f64>,
    pub c_strict: Option<f64>,
    pub c_lagrangian: Option<f64>,
    pub c_lagrangian_null: Option<f64>,
    pub c_universal_estimates: Vec<(usize, f64)>,
    pub harmonic_coeffs: Vec<f64>,
    pub hamiltonian: Option<LinfSolution>,
    pub strict: Option<LinfSolution>,
    pub lagrangian: Option<LagrangianResult>,
    pub lagrangian_null: Option<LagrangianResult>,
}

pub fn write_report_jsonl<W: Write>(report: &CriticalValueReport, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

/// Loop witness as CSV rows `node,x,y[,z]`, closed by repeating the first
/// node shifted by the winding.
pub fn write_loop_csv<W: Write>(loop_: &LoopWitness, periods: &[f64], mut w: W) -> Result<()> {
    let dim = loop_.nodes.first().map(|n| n.len()).unwrap_or(0);
    let names = ["x", "y", "z"];
    writeln!(w, "node,{}", names[..dim].join(","))?;
    for (i, p) in loop_.nodes.iter().enumerate() {
        let cols: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{i},{}", cols.join(","))?;
    }
    if let Some(first) = loop_.nodes.first() {
        let cols: Vec<String> = first
            .iter()
            .enumerate()
            .map(|(c, v)| format!("{}", v + loop_.winding[c] as f64 * periods.get(c).copied().unwrap_or(0.0)))
            .collect();
        writeln!(w, "{},{}", loop_.nodes.len(), cols.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::square_torus;
    use std::f64::consts::PI;

    fn torus_system(form: AnalyticForm, n: usize) -> MagneticSystem {
        let ops = Arc::new(HodgeOperators::new(Arc::new(square_torus(n, 2.0 * PI).unwrap())).unwrap());
        let space = ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] };
        MagneticSystem::on_mesh(space, form, ops).unwrap()
    }

    #[test]
    fn zero_form_has_zero_critical_value() {
        let sys = torus_system(AnalyticForm::Zero, 8);
        let sol = critical_value_hamiltonian(&sys, &LinfOptions::default()).unwrap();
        assert_eq!(sol.c, 0.0);
        assert!(sol.u.unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_form_critical_values() {
        let sys = torus_system(AnalyticForm::Constant { coeffs: vec![0.3, 0.0] }, 12);
        let c = critical_value_hamiltonian(&sys, &LinfOptions::default()).unwrap();
        assert!((c.c - 0.045).abs() < 0.05 * 0.045, "{}", c.c);
        let c0 = strict_critical_value(&sys, &LinfOptions::default()).unwrap();
        assert!(c0.c < 1e-3, "{}", c0.c);
    }

    #[test]
    fn sin_form_subsolution_checks() {
        let eps = 0.5;
        let sys = torus_system(AnalyticForm::SinDy { eps }, 16);
        let zero = Cochain::zeros(sys.ops().unwrap().mesh(), 0);
        assert!(subsolution_defect(&sys, &zero, eps * eps / 2.0).unwrap() <= 1e-9);
        let grid: Vec<Vec<f64>> =
            (0..16).flat_map(|i| (0..16).map(move |j| vec![i as f64 * PI / 8.0, j as f64 * PI / 8.0])).collect();
        let d = subsolution_defect_pointwise(&sys, |_| vec![0.0, 0.0], eps * eps / 4.0, &grid).unwrap();
        assert!((d - eps * eps / 4.0).abs() < 1e-12);
    }

    #[test]
    fn lorentz_force_is_orthogonal_to_velocity() {
        let sys = MagneticSystem::analytic(ModelSpace::Hyperbolic { dim: 2 }, AnalyticForm::UniformFieldH2 { b: 0.7 });
        let x = [0.3, 1.7];
        let v = [0.4, -1.1];
        let y = sys.lorentz_force(&x, &v).unwrap();
        let g = 1.0 / (x[1] * x[1]);
        assert!((g * (y[0] * v[0] + y[1] * v[1])).abs() < 1e-12);
        let ny = sys.speed(&x, &y).unwrap();
        assert!(ny <= sys.d_bound() * sys.speed(&x, &v).unwrap() + 1e-12);
    }

    #[test]
    fn winding_classes_enumerate() {
        assert_eq!(winding_classes(2, 1, false).len(), 9);
        assert_eq!(winding_classes(2, 1, true), vec![vec![0, 0]]);
    }
}
