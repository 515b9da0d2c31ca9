//! Magnetic geodesic flow ∇_γ̇ γ̇ = Y(γ̇): RK4 integration, time averages of
//! ω along orbits, comass estimates and a shooting search for periodic
//! orbits.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ModelSpace;
use crate::linalg;
use crate::mane::MagneticSystem;

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Initial speed |v(0)|_g.
    pub speed: f64,
    pub step: f64,
    pub scheme: String,
    /// Set when the orbit left the chart before the horizon.
    pub exited: bool,
    /// max_t | |v(t)| − s | / s over the stored samples.
    pub max_relative_drift: f64,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// CSV with columns t, x0.., v0...
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.samples.first().map(|s| s.x.len()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("v{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{}", s.t)];
            row.extend(s.x.iter().map(|v| format!("{v}")));
            row.extend(s.v.iter().map(|v| format!("{v}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Initial RK4 step.
    pub step: f64,
    /// Spacing of stored samples (rounded to a multiple of the step).
    pub sample_dt: f64,
    /// Allowed relative speed drift per 100 time units.
    pub drift_per_100: f64,
    pub max_halvings: usize,
    /// Renormalize |v| after every step.
    pub project_speed: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { step: 1e-2, sample_dt: 1e-2, drift_per_100: 1e-8, max_halvings: 8, project_speed: false }
    }
}

fn in_chart(sys: &MagneticSystem, x: &[f64]) -> bool {
    if x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match sys.space() {
        ModelSpace::Hyperbolic { dim } => x[dim - 1] > 1e-250 && x[dim - 1] < 1e250,
        _ => true,
    }
}

/// Right-hand side (ẋ, v̇) of the flow.
pub fn acceleration(sys: &MagneticSystem, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let y = sys.lorentz_force(x, v)?;
    let d = sys.d_bound();
    if d.is_finite() {
        let ny = sys.speed(x, &y)?;
        let nv = sys.speed(x, v)?;
        if ny > d * nv * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::BoundViolation(format!("|Y(v)| = {ny:e} exceeds D|v| = {:e}", d * nv)));
        }
    }
    let mut a = if sys.is_embedded_sphere() {
        let c = -linalg::dot(v, v) / linalg::dot(x, x);
        x.iter().map(|xi| c * xi).collect()
    } else if sys.space().is_flat() {
        vec![0.0; x.len()]
    } else {
        sys.space().geodesic_acceleration(x, v)?
    };
    linalg::axpy(1.0, &y, &mut a);
    Ok(a)
}

fn rk4_step(sys: &MagneticSystem, x: &[f64], v: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let shift = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { (0..n).map(|i| base[i] + c * k[i]).collect() };
    let a1 = acceleration(sys, x, v)?;
    let x2 = shift(x, v, 0.5 * h);
    let v2 = shift(v, &a1, 0.5 * h);
    let a2 = acceleration(sys, &x2, &v2)?;
    let x3 = shift(x, &v2, 0.5 * h);
    let v3 = shift(v, &a2, 0.5 * h);
    let a3 = acceleration(sys, &x3, &v3)?;
    let x4 = shift(x, &v3, h);
    let v4 = shift(v, &a3, h);
    let a4 = acceleration(sys, &x4, &v4)?;
    let xn = (0..n).map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])).collect();
    let vn = (0..n).map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])).collect();
    Ok((xn, vn))
}

/// Fixed-step run over a signed horizon. Returns samples, the exit flag and
/// the step actually used.
fn run_fixed(
    sys: &MagneticSystem,
    x0: &[f64],
    v0: &[f64],
    horizon: f64,
    step: f64,
    sample_dt: f64,
    project: Option<f64>,
) -> Result<(Vec<Sample>, bool, f64)> {
    let steps = (horizon.abs() / step).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let every = ((sample_dt / h.abs()).round() as usize).max(1);
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut samples = vec![Sample { t: 0.0, x: x.clone(), v: v.clone() }];
    for i in 1..=steps {
        let (xn, mut vn) = rk4_step(sys, &x, &v, h)?;
        if !in_chart(sys, &xn) || vn.iter().any(|c| !c.is_finite()) {
            return Ok((samples, true, h));
        }
        if let Some(s) = project {
            let c = s / sys.speed(&xn, &vn)?;
            vn.iter_mut().for_each(|c2| *c2 *= c);
        }
        x = xn;
        v = vn;
        if i % every == 0 || i == steps {
            samples.push(Sample { t: i as f64 * h, x: x.clone(), v: v.clone() });
        }
    }
    Ok((samples, false, h))
}

fn drift(sys: &MagneticSystem, samples: &[Sample], s: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for smp in samples {
        worst = worst.max((sys.speed(&smp.x, &smp.v)? - s).abs() / s);
    }
    Ok(worst)
}

fn integrate_signed(
    sys: &MagneticSystem,
    x0: &[f64],
    v0: &[f64],
    horizon: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    let n = sys.coord_dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Unsupported(format!("state must have {n} coordinates")));
    }
    if !in_chart(sys, x0) {
        return Err(Error::OutsideChart { space: sys.space().name(), point: x0.to_vec() });
    }
    let s = sys.speed(x0, v0)?;
    if !(s > 0.0) {
        return Err(Error::Unsupported("initial speed must be positive".into()));
    }
    let allowed = opts.drift_per_100 * (horizon.abs() / 100.0).max(1.0);
    let mut step = opts.step;
    let project = if opts.project_speed { Some(s) } else { None };
    let mut halvings = 0;
    loop {
        let (samples, exited, h) = run_fixed(sys, x0, v0, horizon, step, opts.sample_dt, project)?;
        let d = drift(sys, &samples, s)?;
        if d <= allowed || halvings >= opts.max_halvings {
            return Ok(Trajectory {
                samples,
                speed: s,
                step: h.abs(),
                scheme: "rk4".into(),
                exited,
                max_relative_drift: d,
            });
        }
        step *= 0.5;
        halvings += 1;
    }
}

/// Integrates the flow from (x0, v0) for time `horizon`, halving the step
/// until the speed drift meets the configured bound.
pub fn integrate(sys: &MagneticSystem, x0: &[f64], v0: &[f64], horizon: f64, opts: &FlowOptions) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::HorizonTooShort { horizon, required: 0.0 });
    }
    integrate_signed(sys, x0, v0, horizon, opts)
}

/// Trajectory through (x0, v0) at time 0 covering [−half, half].
pub fn integrate_centered(
    sys: &MagneticSystem,
    x0: &[f64],
    v0: &[f64],
    half: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    if !(half > 0.0) {
        return Err(Error::HorizonTooShort { horizon: half, required: 0.0 });
    }
    let back = integrate_signed(sys, x0, v0, -half, opts)?;
    let fwd = integrate_signed(sys, x0, v0, half, opts)?;
    let mut samples: Vec<Sample> = back.samples.into_iter().skip(1).rev().collect();
    samples.extend(fwd.samples);
    Ok(Trajectory {
        samples,
        speed: fwd.speed,
        step: fwd.step.min(back.step),
        scheme: fwd.scheme,
        exited: fwd.exited || back.exited,
        max_relative_drift: fwd.max_relative_drift.max(back.max_relative_drift),
    })
}

/// Distance in the model space between the start and the result of
/// integrating forward for T and then backward for T.
pub fn reversibility_defect(
    sys: &MagneticSystem,
    x0: &[f64],
    v0: &[f64],
    horizon: f64,
    opts: &FlowOptions,
) -> Result<f64> {
    let fwd = integrate_signed(sys, x0, v0, horizon, opts)?;
    let end = fwd.last();
    // reuse the forward step so both legs use the same scheme
    let back_opts = FlowOptions { step: fwd.step, ..opts.clone() };
    let back = integrate_signed(sys, &end.x, &end.v, -fwd.duration(), &back_opts)?;
    sys.space().distance(&back.last().x, x0)
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeAverage {
    /// max over the final decade of (1/(s t)) |∫₀ᵗ ω(γ̇)|.
    pub value: f64,
    /// Spread of the running average over the final decade.
    pub tail_fluctuation: f64,
    pub horizon: f64,
}

/// Finite-horizon surrogate for limsup (1/(sT)) |∫₀ᵀ ω(γ̇) dt|.
pub fn time_average(sys: &MagneticSystem, traj: &Trajectory, min_horizon: f64) -> Result<TimeAverage> {
    let horizon = traj.duration();
    if horizon < min_horizon || traj.samples.len() < 2 {
        return Err(Error::HorizonTooShort { horizon, required: min_horizon });
    }
    let s = traj.speed;
    let t0 = traj.samples[0].t;
    let vals: Vec<f64> = traj.samples.iter().map(|p| sys.form_apply(&p.x, &p.v)).collect::<Result<_>>()?;
    let mut integral = 0.0;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 1..traj.samples.len() {
        let (a, b) = (&traj.samples[i - 1], &traj.samples[i]);
        integral += 0.5 * (b.t - a.t) * (vals[i - 1] + vals[i]);
        let t = b.t - t0;
        if t >= 0.9 * horizon {
            let avg = integral.abs() / (s * t);
            hi = hi.max(avg);
            lo = lo.min(avg);
        }
    }
    let a = sys.a_bound();
    if a.is_finite() && hi > a * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::BoundViolation(format!("orbit average {hi:e} exceeds ‖ω‖∞ = {a:e}")));
    }
    Ok(TimeAverage { value: hi, tail_fluctuation: hi - lo, horizon })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// i-th point of a Halton sequence in the unit sphere bundle, scaled to
/// speed s. Positions cover the fundamental domain on tori, [−5, 5]ⁿ in the
/// plane, a box around (0, 1) in the half-plane and the whole sphere.
pub fn bundle_seed(sys: &MagneticSystem, i: usize, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let h = |k: usize| radical_inverse(i as u64 + 1, BASES[k]);
    let tau = std::f64::consts::TAU;
    let unit_dir = |k: usize, n: usize| -> Vec<f64> {
        match n {
            1 => vec![if h(k) < 0.5 { 1.0 } else { -1.0 }],
            2 => {
                let a = tau * h(k);
                vec![a.cos(), a.sin()]
            }
            _ => {
                let z = 2.0 * h(k) - 1.0;
                let a = tau * h(k + 1);
                let r = (1.0 - z * z).sqrt();
                vec![r * a.cos(), r * a.sin(), z]
            }
        }
    };
    let (x, mut v) = match sys.space() {
        ModelSpace::FlatTorus { periods } => {
            let n = periods.len();
            ((0..n).map(|k| h(k) * periods[k]).collect(), unit_dir(n, n))
        }
        ModelSpace::Euclidean { dim } => ((0..*dim).map(|k| 10.0 * h(k) - 5.0).collect(), unit_dir(*dim, *dim)),
        ModelSpace::Hyperbolic { dim } => {
            let mut x: Vec<f64> = (0..*dim).map(|k| 2.0 * h(k) - 1.0).collect();
            x[dim - 1] = (2.0 * h(dim - 1) - 1.0).exp();
            (x, unit_dir(*dim, *dim))
        }
        ModelSpace::RoundSphere { dim: 2, radius } => {
            let z = 2.0 * h(0) - 1.0;
            let phi = tau * h(1);
            let r = (1.0 - z * z).sqrt();
            let p = [r * phi.cos(), r * phi.sin(), z];
            // orthonormal tangent frame (east, north)
            let east = if r > 1e-12 { [-phi.sin(), phi.cos(), 0.0] } else { [1.0, 0.0, 0.0] };
            let north =
                [p[1] * east[2] - p[2] * east[1], p[2] * east[0] - p[0] * east[2], p[0] * east[1] - p[1] * east[0]];
            let a = tau * h(2);
            let v = (0..3).map(|k| a.cos() * east[k] + a.sin() * north[k]).collect();
            (p.iter().map(|c| c * radius).collect(), v)
        }
        other => return Err(Error::Unsupported(format!("seeding on {}", other.name()))),
    };
    let norm = sys.speed(&x, &v)?;
    v.iter_mut().for_each(|c| *c *= s / norm);
    Ok((x, v))
}

#[derive(Clone, Debug, Serialize)]
pub struct ComassEstimate {
    pub speed: f64,
    pub value: f64,
    pub per_orbit: Vec<f64>,
    pub median: f64,
    pub q90: f64,
    /// Orbits dropped because they left the chart early.
    pub exited: usize,
}

/// Max of time averages over `n_orbits` Halton seeds at speed s.
pub fn comass_estimate(
    sys: &MagneticSystem,
    s: f64,
    n_orbits: usize,
    horizon: f64,
    opts: &FlowOptions,
) -> Result<ComassEstimate> {
    if !(s > 0.0) {
        return Err(Error::Unsupported("speed must be positive".into()));
    }
    let results: Vec<Option<f64>> = (0..n_orbits)
        .into_par_iter()
        .map(|i| {
            let (x, v) = bundle_seed(sys, i, s)?;
            let traj = integrate(sys, &x, &v, horizon, opts)?;
            if traj.exited {
                return Ok(None);
            }
            Ok(Some(time_average(sys, &traj, 0.0)?.value))
        })
        .collect::<Result<_>>()?;
    let exited = results.iter().filter(|r| r.is_none()).count();
    let per_orbit: Vec<f64> = results.into_iter().flatten().collect();
    let mut sorted = per_orbit.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        if sorted.is_empty() {
            0.0
        } else {
            sorted[((sorted.len() - 1) as f64 * p).round() as usize]
        }
    };
    Ok(ComassEstimate {
        speed: s,
        value: sorted.last().copied().unwrap_or(0.0),
        median: q(0.5),
        q90: q(0.9),
        per_orbit,
        exited,
    })
}

#[derive(Clone, Debug)]
pub struct PeriodicOptions {
    pub step: f64,
    /// Horizon of the initial run used to guess the return time.
    pub search_horizon: f64,
    /// Returns earlier than this are ignored.
    pub min_return_time: f64,
    pub max_iter: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions { step: 5e-3, search_horizon: 60.0, min_return_time: 0.5, max_iter: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub period: f64,
    pub closure_defect: f64,
    /// Lift displacement in units of the periods (zero off tori).
    pub winding: Vec<i64>,
    pub contractible: bool,
    pub seed: usize,
}

struct Shooter<'a> {
    sys: &'a MagneticSystem,
    s: f64,
    step: f64,
    periods: Option<Vec<f64>>,
}

impl Shooter<'_> {
    fn velocity(&self, x: &[f64], theta: f64) -> Result<Vec<f64>> {
        let v = vec![theta.cos(), theta.sin()];
        let n = self.sys.speed(x, &v)?;
        Ok(v.iter().map(|c| c * self.s / n).collect())
    }

    fn end_state(&self, x: &[f64], v: &[f64], t: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let (samples, exited, _) = run_fixed(self.sys, x, v, t, self.step, f64::INFINITY, None)?;
        if exited {
            return Ok(None);
        }
        let last = samples.last().unwrap();
        Ok(Some((last.x.clone(), last.v.clone())))
    }

    fn shift(&self, winding: &[i64]) -> Vec<f64> {
        match &self.periods {
            Some(p) => winding.iter().zip(p).map(|(w, l)| *w as f64 * l).collect(),
            None => vec![0.0; 2],
        }
    }

    fn nearest_winding(&self, d: &[f64]) -> Vec<i64> {
        match &self.periods {
            Some(p) => d.iter().zip(p).map(|(d, l)| (d / l).round() as i64).collect(),
            None => vec![0; 2],
        }
    }

    /// Closure residual (Δx, Δv) for p = (x, y, θ, T).
    fn residual(&self, p: &[f64], winding: &[i64]) -> Result<Option<Vec<f64>>> {
        let x = &p[..2];
        if !in_chart(self.sys, x) || !(p[3] > 0.0) {
            return Ok(None);
        }
        let v = self.velocity(x, p[2])?;
        let Some((xe, ve)) = self.end_state(x, &v, p[3])? else {
            return Ok(None);
        };
        let sh = self.shift(winding);
        Ok(Some(vec![xe[0] - x[0] - sh[0], xe[1] - x[1] - sh[1], ve[0] - v[0], ve[1] - v[1]]))
    }
}

/// Shooting search for a closed orbit of speed s from each seed (position,
/// direction angle). Seeds are tried concurrently; the first success in
/// seed order is returned. `None` is not a certificate of absence.
pub fn find_periodic_orbit(
    sys: &MagneticSystem,
    s: f64,
    seeds: &[(Vec<f64>, f64)],
    opts: &PeriodicOptions,
) -> Result<Option<PeriodicOrbit>> {
    let periods = match sys.space() {
        ModelSpace::FlatTorus { periods } if periods.len() == 2 => Some(periods.clone()),
        ModelSpace::Euclidean { dim: 2 } | ModelSpace::Hyperbolic { dim: 2 } => None,
        other => return Err(Error::Unsupported(format!("periodic orbit search on {}", other.name()))),
    };
    if !(s > 0.0) {
        return Err(Error::Unsupported("speed must be positive".into()));
    }
    let shooter = Shooter { sys, s, step: opts.step, periods };
    let found: Vec<Option<PeriodicOrbit>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, (x, th))| {
            shoot(&shooter, x, *th, opts).map(|o| {
                o.map(|mut o| {
                    o.seed = i;
                    o
                })
            })
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().next())
}

fn shoot(sh: &Shooter, x0: &[f64], theta: f64, opts: &PeriodicOptions) -> Result<Option<PeriodicOrbit>> {
    let v0 = sh.velocity(x0, theta)?;
    let (samples, _, _) = run_fixed(sh.sys, x0, &v0, opts.search_horizon, sh.step, sh.step, None)?;
    // best return after first leaving the starting neighbourhood
    let dist = |smp: &Sample| -> (f64, Vec<i64>) {
        let d: Vec<f64> = (0..2).map(|k| smp.x[k] - x0[k]).collect();
        let w = sh.nearest_winding(&d);
        let shv = sh.shift(&w);
        let e = (0..2).map(|k| (d[k] - shv[k]).powi(2) + (smp.v[k] - v0[k]).powi(2)).sum::<f64>().sqrt();
        (e, w)
    };
    let mut track: Vec<(f64, f64, Vec<i64>)> = Vec::new();
    let mut left = false;
    for smp in samples.iter().skip(1) {
        let (e, w) = dist(smp);
        if !left {
            left = smp.t >= opts.min_return_time && e > 0.1 * sh.s;
            continue;
        }
        track.push((e, smp.t, w));
    }
    // first return: the local minimum of the first dip close to the global one
    let e_min = track.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let threshold = e_min + 0.02 * sh.s;
    let best = track.iter().position(|r| r.0 <= threshold).map(|start| {
        let mut i = start;
        while i + 1 < track.len() && track[i + 1].0 <= track[i].0 {
            i += 1;
        }
        track[i].clone()
    });
    let Some((_, t_guess, winding)) = best else {
        return Ok(None);
    };
    let mut p = vec![x0[0], x0[1], theta, t_guess];
    let norm = |r: &[f64]| linalg::norm(r);
    let Some(mut r) = sh.residual(&p, &winding)? else {
        return Ok(None);
    };
    let mut mu = 1e-3;
    for _ in 0..opts.max_iter {
        if norm(&r) <= 1e-9 * sh.s {
            break;
        }
        let mut jac = DMatrix::zeros(4, 4);
        for c in 0..4 {
            let hstep = 1e-7 * p[c].abs().max(1.0);
            let mut q = p.clone();
            q[c] += hstep;
            let Some(rq) = sh.residual(&q, &winding)? else {
                return Ok(None);
            };
            for k in 0..4 {
                jac[(k, c)] = (rq[k] - r[k]) / hstep;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for k in 0..4 {
                m[(k, k)] += mu * (jtj[(k, k)] + 1e-12);
            }
            let Some(delta) = m.lu().solve(&(-&jtr)) else {
                break;
            };
            let q: Vec<f64> = (0..4).map(|k| p[k] + delta[k]).collect();
            // T → 0 closes every orbit trivially
            if q[3] < opts.min_return_time {
                mu *= 10.0;
                continue;
            }
            if let Some(rq) = sh.residual(&q, &winding)? {
                if norm(&rq) < norm(&r) {
                    p = q;
                    r = rq;
                    mu = (mu * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let defect = norm(&r);
    if defect > 1e-6 * sh.s || p[3] < opts.min_return_time {
        return Ok(None);
    }
    let x = p[..2].to_vec();
    let v = sh.velocity(&x, p[2])?;
    Ok(Some(PeriodicOrbit {
        x0: x,
        v0: v,
        period: p[3],
        closure_defect: defect,
        contractible: winding.iter().all(|&w| w == 0),
        winding,
        seed: 0,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::AnalyticForm;
    use std::f64::consts::PI;

    fn plane(b: f64) -> MagneticSystem {
        MagneticSystem::analytic(ModelSpace::Euclidean { dim: 2 }, AnalyticForm::PlaneUniform { b })
    }

    #[test]
    fn plane_force_matches_hand_solve() {
        let y = plane(2.0).lorentz_force(&[0.3, -0.1], &[1.5, 0.0]).unwrap();
        assert!(y[0].abs() < 1e-15 && (y[1] - 3.0).abs() < 1e-15);
        let y0 = MagneticSystem::analytic(ModelSpace::Euclidean { dim: 2 }, AnalyticForm::Zero)
            .lorentz_force(&[0.0, 0.0], &[1.0, 2.0])
            .unwrap();
        assert_eq!(y0, vec![0.0, 0.0]);
    }

    #[test]
    fn cyclotron_circle() {
        let (b, s) = (0.8, 1.3);
        let sys = plane(b);
        let period = 2.0 * PI * s / (b * s);
        let traj = integrate(&sys, &[0.0, 0.0], &[s, 0.0], period, &FlowOptions::default()).unwrap();
        // Y(v) = (0, b s) at the start, so the centre is (0, s/b)
        let centre = [0.0, s / b];
        for smp in &traj.samples {
            let r = ((smp.x[0] - centre[0]).powi(2) + (smp.x[1] - centre[1]).powi(2)).sqrt();
            assert!((r - s / b).abs() < 1e-6, "{r}");
        }
        assert!(linalg::norm(&traj.last().x) < 1e-6);
        assert!(traj.max_relative_drift < 1e-8);
    }

    #[test]
    fn free_torus_line() {
        let sys =
            MagneticSystem::analytic(ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] }, AnalyticForm::Zero);
        let traj = integrate(&sys, &[0.1, 0.2], &[0.6, 0.8], 30.0, &FlowOptions::default()).unwrap();
        for smp in &traj.samples {
            assert!((smp.v[0] - 0.6).abs() < 1e-10 && (smp.v[1] - 0.8).abs() < 1e-10);
        }
    }

    #[test]
    fn reversible() {
        let sys = MagneticSystem::analytic(ModelSpace::Hyperbolic { dim: 2 }, AnalyticForm::UniformFieldH2 { b: 0.4 });
        let d = reversibility_defect(&sys, &[0.0, 1.0], &[1.0, 0.2], 20.0, &FlowOptions::default()).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn time_average_oracles() {
        let a = 0.7;
        let torus = ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] };
        let sys = MagneticSystem::analytic(torus.clone(), AnalyticForm::Constant { coeffs: vec![a, 0.0] });
        let tx = integrate(&sys, &[0.0, 0.0], &[1.0, 0.0], 50.0, &FlowOptions::default()).unwrap();
        assert!((time_average(&sys, &tx, 10.0).unwrap().value - a).abs() < 1e-8);
        let ty = integrate(&sys, &[0.0, 0.0], &[0.0, 1.0], 50.0, &FlowOptions::default()).unwrap();
        assert!(time_average(&sys, &ty, 10.0).unwrap().value < 1e-8);
        assert!(matches!(time_average(&sys, &ty, 100.0), Err(Error::HorizonTooShort { .. })));

        // sin x dy is exact along x = π/2 only when the orbit stays there;
        // with the field cos x vanishing on that line it does.
        let eps = 0.3;
        let sys = MagneticSystem::analytic(torus, AnalyticForm::SinDy { eps });
        let t = integrate(&sys, &[PI / 2.0, 0.0], &[0.0, 1.0], 50.0, &FlowOptions::default()).unwrap();
        assert!((time_average(&sys, &t, 10.0).unwrap().value - eps).abs() < 1e-8);
    }

    #[test]
    fn zero_form_comass() {
        let sys = MagneticSystem::analytic(ModelSpace::FlatTorus { periods: vec![1.0, 1.0] }, AnalyticForm::Zero);
        let c = comass_estimate(&sys, 0.7, 8, 5.0, &FlowOptions::default()).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn cyclotron_is_periodic_and_contractible() {
        let sys = plane(1.0);
        let orbit =
            find_periodic_orbit(&sys, 0.5, &[(vec![0.0, 0.0], 0.3)], &PeriodicOptions::default()).unwrap().unwrap();
        assert!(orbit.closure_defect <= 1e-8, "{}", orbit.closure_defect);
        assert!(orbit.contractible);
        assert!((orbit.period - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn rational_line_winds() {
        let sys =
            MagneticSystem::analytic(ModelSpace::FlatTorus { periods: vec![2.0 * PI, 2.0 * PI] }, AnalyticForm::Zero);
        let orbit = find_periodic_orbit(&sys, 1.0, &[(vec![0.5, 0.5], PI / 4.0)], &PeriodicOptions::default())
            .unwrap()
            .unwrap();
        assert!(!orbit.contractible);
        assert_eq!(orbit.winding, vec![1, 1]);
    }
}
