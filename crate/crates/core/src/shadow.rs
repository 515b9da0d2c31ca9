//! Quasigeodesics in the upper half-plane: geodesic curvature of sampled
//! curves, shadow geodesics from estimated ideal endpoints, and the averaged
//! line-integral difference between a curve and its shadow.

use std::io::Write;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::AnalyticForm;
use crate::geometry::ModelSpace;
use crate::magflow::{Sample, Trajectory};

type C = Complex<f64>;

/// Stencil disagreement (second vs fourth order) above which the sampling is
/// rejected.
const STENCIL_TOL: f64 = 1e-3;
/// Endpoint stabilization threshold in Poincaré-disk units.
const ENDPOINT_TOL: f64 = 1e-4;
/// Disk points this close to 1 are read as the ideal point ∞.
const INFINITY_TOL: f64 = 1e-7;

fn require_h2(space: &ModelSpace) -> Result<()> {
    match space {
        ModelSpace::Hyperbolic { dim: 2 } => Ok(()),
        other => Err(Error::Unsupported(format!("shadowing on {}", other.name()))),
    }
}

/// |∇_γ̇ γ̇|_g / |γ̇|²_g from a fourth-order central stencil on the stored
/// velocities, at every sample with two neighbours on each side. A
/// second-order stencil serves as the error check.
pub fn geodesic_curvature(space: &ModelSpace, traj: &Trajectory) -> Result<Vec<f64>> {
    let s = &traj.samples;
    let n = s.len();
    if n < 5 {
        return Err(Error::SamplingTooCoarse { spacing: traj.duration() });
    }
    let dim = s[0].x.len();
    let mut out = Vec::with_capacity(n - 4);
    for i in 2..n - 2 {
        let h = 0.5 * (s[i + 1].t - s[i - 1].t);
        let d2: Vec<f64> = (0..dim).map(|k| (s[i + 1].v[k] - s[i - 1].v[k]) / (2.0 * h)).collect();
        let d4: Vec<f64> = (0..dim)
            .map(|k| (-s[i + 2].v[k] + 8.0 * s[i + 1].v[k] - 8.0 * s[i - 1].v[k] + s[i - 2].v[k]) / (12.0 * h))
            .collect();
        let speed2 = space.norm(&s[i].x, &s[i].v)?.powi(2);
        let a2 = covariant(space, &s[i], &d2)?;
        let a4 = covariant(space, &s[i], &d4)?;
        if (a2 - a4).abs() / speed2 > STENCIL_TOL {
            return Err(Error::SamplingTooCoarse { spacing: h });
        }
        out.push(a4 / speed2);
    }
    Ok(out)
}

fn covariant(space: &ModelSpace, p: &Sample, dv: &[f64]) -> Result<f64> {
    // ∇_γ̇ γ̇ = v̇ − (geodesic acceleration)
    let geo = space.geodesic_acceleration(&p.x, &p.v)?;
    let a: Vec<f64> = dv.iter().zip(&geo).map(|(d, g)| d - g).collect();
    space.norm(&p.x, &a)
}

/// (1 − κ²)^{-1/2}.
pub fn quasigeodesic_constant(kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) || kappa >= 1.0 {
        return Err(Error::CurvatureTooLarge(kappa));
    }
    Ok((1.0 - kappa * kappa).powf(-0.5))
}

/// A point of the ideal boundary R ∪ {∞} of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "x", rename_all = "snake_case")]
pub enum IdealPoint {
    Finite(f64),
    Infinity,
}

/// Oriented geodesic from `start` to `end`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Geodesic {
    pub start: IdealPoint,
    pub end: IdealPoint,
}

impl Geodesic {
    pub fn new(start: IdealPoint, end: IdealPoint) -> Result<Self> {
        if start == end {
            return Err(Error::Unsupported("geodesic endpoints coincide".into()));
        }
        Ok(Geodesic { start, end })
    }

    /// Orientation-preserving isometry sending start to 0 and end to ∞.
    fn normalize(&self, z: C) -> C {
        use IdealPoint::*;
        match (self.start, self.end) {
            (Finite(a), Infinity) => z - a,
            (Infinity, Finite(b)) => -C::new(1.0, 0.0) / (z - b),
            (Finite(a), Finite(b)) if a < b => (z - a) / (b - z),
            (Finite(a), Finite(b)) => (z - a) / (z - b),
            (Infinity, Infinity) => unreachable!(),
        }
    }

    /// Inverse of `normalize`.
    fn denormalize(&self, w: C) -> C {
        use IdealPoint::*;
        match (self.start, self.end) {
            (Finite(a), Infinity) => w + a,
            (Infinity, Finite(b)) => b - C::new(1.0, 0.0) / w,
            // w (b − z) = z − a  ⇒  z = (w b + a) / (1 + w)
            (Finite(a), Finite(b)) if a < b => (w * b + a) / (w + 1.0),
            // w (z − b) = z − a  ⇒  z = (w b − a) / (w − 1)
            (Finite(a), Finite(b)) => (w * b - a) / (w - 1.0),
            (Infinity, Infinity) => unreachable!(),
        }
    }

    /// Hyperbolic distance from the chart point x to the geodesic.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let w = self.normalize(C::new(x[0], x[1]));
        (w.re.abs() / w.im).asinh()
    }

    /// Signed arc-length coordinate of the orthogonal projection of x.
    pub fn projection(&self, x: &[f64]) -> f64 {
        self.normalize(C::new(x[0], x[1])).norm().ln()
    }

    /// Point at arc-length coordinate σ, and its unit velocity.
    pub fn point(&self, sigma: f64) -> ([f64; 2], [f64; 2]) {
        let w = C::new(0.0, sigma.exp());
        let h = 1e-6 * w.norm();
        let z = self.denormalize(w);
        // derivative of the Möbius inverse by a symmetric difference in w
        let dz = (self.denormalize(w + C::new(0.0, h)) - self.denormalize(w - C::new(0.0, h))) / (2.0 * h);
        let v = dz * w.im;
        ([z.re, z.im], [v.re, v.im])
    }
}

fn to_disk(x: &[f64]) -> C {
    let z = C::new(x[0], x[1]);
    (z - C::i()) / (z + C::i())
}

fn from_disk(w: C) -> IdealPoint {
    let w = w / w.norm();
    if (w - 1.0).norm() < INFINITY_TOL {
        return IdealPoint::Infinity;
    }
    let z = C::i() * (w + 1.0) / (C::new(1.0, 0.0) - w);
    IdealPoint::Finite(z.re)
}

fn sample_at(traj: &Trajectory, t: f64) -> &Sample {
    let i = traj.samples.partition_point(|s| s.t < t).min(traj.samples.len() - 1);
    &traj.samples[i]
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowGeodesic {
    pub geodesic: Geodesic,
    /// Largest change of the boundary direction between the half and full
    /// horizons, over both ends.
    pub endpoint_drift: f64,
}

/// Shadow geodesic of a curve from the boundary limits of its two ends. With
/// c the middle time and H the half-horizon, the forward endpoint is the
/// boundary direction of the disk position at c + H; the change from c + H/2
/// is the stabilization metric. Likewise backward.
pub fn shadow_geodesic(space: &ModelSpace, traj: &Trajectory) -> Result<ShadowGeodesic> {
    require_h2(space)?;
    if traj.samples.len() < 3 {
        return Err(Error::HorizonTooShort { horizon: traj.duration(), required: 0.0 });
    }
    let t0 = traj.samples[0].t;
    let t1 = traj.last().t;
    let c = 0.5 * (t0 + t1);
    let h = 0.5 * (t1 - t0);
    let end = |far: f64, near: f64| -> (C, f64) {
        let wf = to_disk(&sample_at(traj, far).x);
        let wn = to_disk(&sample_at(traj, near).x);
        let (uf, un) = (wf / wf.norm(), wn / wn.norm());
        (uf, (uf - un).norm())
    };
    let (wb, db) = end(c - h, c - 0.5 * h);
    let (wf, df) = end(c + h, c + 0.5 * h);
    let drift = db.max(df);
    if !(drift <= ENDPOINT_TOL) {
        return Err(Error::EndpointsUnstable { drift });
    }
    Ok(ShadowGeodesic { geodesic: Geodesic::new(from_disk(wb), from_disk(wf))?, endpoint_drift: drift })
}

#[derive(Clone, Debug, Serialize)]
pub struct FellowTravel {
    /// max distance from the central half of the curve to the geodesic.
    pub max_distance: f64,
    /// Two-sided Hausdorff distance over the central half.
    pub hausdorff: f64,
    /// Arc length over projected length on the geodesic (central half).
    pub stretch: f64,
}

/// Fellow-traveling measurements on the central half of the time interval,
/// where chart coordinates are well conditioned.
pub fn fellow_travel(geo: &Geodesic, space: &ModelSpace, traj: &Trajectory) -> Result<FellowTravel> {
    let t0 = traj.samples[0].t;
    let t1 = traj.last().t;
    let (a, b) = (t0 + 0.25 * (t1 - t0), t0 + 0.75 * (t1 - t0));
    let mid: Vec<&Sample> = traj.samples.iter().filter(|s| s.t >= a && s.t <= b).collect();
    if mid.len() < 2 {
        return Err(Error::SamplingTooCoarse { spacing: t1 - t0 });
    }
    let max_distance = mid.iter().map(|s| geo.distance(&s.x)).fold(0.0, f64::max);
    let mut arc = 0.0;
    for w in mid.windows(2) {
        let la = space.norm(&w[0].x, &w[0].v)?;
        let lb = space.norm(&w[1].x, &w[1].v)?;
        arc += 0.5 * (w[1].t - w[0].t) * (la + lb);
    }
    let pa = geo.projection(&mid[0].x);
    let pb = geo.projection(&mid[mid.len() - 1].x);
    if !(pa.is_finite() && pb.is_finite() && pa != pb) {
        return Err(Error::EndpointsUnstable { drift: f64::NAN });
    }
    // geodesic side of the Hausdorff distance: points between the feet
    let m = 400;
    let mut back = 0.0f64;
    for j in 0..=m {
        let sigma = pa + (pb - pa) * j as f64 / m as f64;
        let (p, _) = geo.point(sigma);
        let d = mid.iter().map(|s| space.distance(&p, &s.x)).collect::<Result<Vec<f64>>>()?;
        let j = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        let mut best = d[j];
        for k in [j.saturating_sub(1), j] {
            if k + 1 < mid.len() {
                best = best.min(segment_distance(space, &p, mid[k], mid[k + 1])?);
            }
        }
        back = back.max(best);
    }
    Ok(FellowTravel { max_distance, hausdorff: max_distance.max(back), stretch: arc / (pb - pa).abs() })
}

/// Distance from p to the cubic Hermite arc between two samples, by golden
/// section on the parameter.
fn segment_distance(space: &ModelSpace, p: &[f64], a: &Sample, b: &Sample) -> Result<f64> {
    let h = b.t - a.t;
    let at = |u: f64| -> Vec<f64> {
        let (h00, h10, h01, h11) = (
            2.0 * u.powi(3) - 3.0 * u * u + 1.0,
            u.powi(3) - 2.0 * u * u + u,
            -2.0 * u.powi(3) + 3.0 * u * u,
            u.powi(3) - u * u,
        );
        (0..a.x.len()).map(|k| h00 * a.x[k] + h10 * h * a.v[k] + h01 * b.x[k] + h11 * h * b.v[k]).collect()
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if space.distance(p, &at(m1))? < space.distance(p, &at(m2))? {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    space.distance(p, &at(0.5 * (lo + hi)))
}

fn line_integral_samples(form: &AnalyticForm, traj: &Trajectory) -> (f64, f64) {
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let f: Vec<f64> = traj.samples.iter().map(|s| form.apply(&s.x, &s.v)).collect();
    let fine = crate::mane::integrate_samples(&t, &f);
    let ts: Vec<f64> = t.iter().step_by(2).copied().collect();
    let fs: Vec<f64> = f.iter().step_by(2).copied().collect();
    let coarse = if ts.last() == t.last() { crate::mane::integrate_samples(&ts, &fs) } else { fine };
    (fine, (fine - coarse).abs() / 15.0)
}

fn geodesic_integral(form: &AnalyticForm, geo: &Geodesic, from: f64, length: f64) -> f64 {
    const GL4: [(f64, f64); 4] = [
        (0.069431844202973713, 0.17392742256872692),
        (0.33000947820757187, 0.32607257743127307),
        (0.66999052179242813, 0.32607257743127307),
        (0.93056815579702629, 0.17392742256872692),
    ];
    let pieces = ((length / 0.02).ceil() as usize).max(1);
    let h = length / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        for &(t, w) in &GL4 {
            let (p, v) = geo.point(from + (k as f64 + t) * h);
            total += w * h * form.apply(&p, &v);
        }
    }
    total
}

#[derive(Clone, Debug, Serialize)]
pub struct AverageDifference {
    pub measured: f64,
    pub bound: f64,
    pub kappa_max: f64,
    pub length: f64,
    pub quadrature_error: f64,
}

/// (1/ℓ)|∫_γ ω − ∫_η ω| with η the shadow geodesic run for the same arc
/// length ℓ from the foot of γ's first point, against the bound (A + D)κ.
/// Line integrals do not depend on the parametrization, so arc length only
/// enters through ℓ.
pub fn average_difference(
    space: &ModelSpace,
    form: &AnalyticForm,
    traj: &Trajectory,
    geo: &Geodesic,
    kappa_max: f64,
) -> Result<AverageDifference> {
    require_h2(space)?;
    let (a, d) = form.bounds(space);
    let (a, d) = match (a, d) {
        (Some(a), Some(d)) => (a, d),
        _ => return Err(Error::Unsupported("average difference needs bounded ω and dω".into())),
    };
    let mut length = 0.0;
    for w in traj.samples.windows(2) {
        length += 0.5 * (w[1].t - w[0].t) * (space.norm(&w[0].x, &w[0].v)? + space.norm(&w[1].x, &w[1].v)?);
    }
    if !(length > 0.0) {
        return Err(Error::HorizonTooShort { horizon: length, required: 0.0 });
    }
    let (ig, err) = line_integral_samples(form, traj);
    let start = geo.projection(&traj.samples[0].x);
    let ie = geodesic_integral(form, geo, start, length);
    Ok(AverageDifference {
        measured: (ig - ie).abs() / length,
        bound: (a + d) * kappa_max,
        kappa_max,
        length,
        quadrature_error: err / length,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowReport {
    pub kappa_max: f64,
    pub quasigeodesic_constant: f64,
    pub shadow: ShadowGeodesic,
    pub fellow: FellowTravel,
    pub difference: Option<AverageDifference>,
}

/// Full analysis of one curve; the form is optional.
pub fn analyze(space: &ModelSpace, traj: &Trajectory, form: Option<&AnalyticForm>) -> Result<ShadowReport> {
    require_h2(space)?;
    let kappa = geodesic_curvature(space, traj)?;
    let kappa_max = kappa.iter().cloned().fold(0.0, f64::max);
    let q = quasigeodesic_constant(kappa_max)?;
    let shadow = shadow_geodesic(space, traj)?;
    let fellow = fellow_travel(&shadow.geodesic, space, traj)?;
    let difference = match form {
        Some(f) => Some(average_difference(space, f, traj, &shadow.geodesic, kappa_max)?),
        None => None,
    };
    Ok(ShadowReport { kappa_max, quasigeodesic_constant: q, shadow, fellow, difference })
}

/// Unit-speed hypercycle at signed distance d from the imaginary axis,
/// γ(t) = e^{t sech d}(tanh d, sech d), sampled on [−h, h] with spacing dt.
pub fn hypercycle(d: f64, half_length: f64, dt: f64) -> Trajectory {
    let (th, sh) = (d.tanh(), 1.0 / d.cosh());
    synthetic(half_length, dt, |t| {
        let r = (t * sh).exp();
        ([r * th, r * sh], [sh * r * th, sh * r * sh])
    })
}

/// Unit-speed horocycle y = 1.
pub fn horocycle(half_length: f64, dt: f64) -> Trajectory {
    synthetic(half_length, dt, |t| ([t, 1.0], [1.0, 0.0]))
}

/// Unit-speed geodesic along the imaginary axis.
pub fn axis_geodesic(half_length: f64, dt: f64) -> Trajectory {
    synthetic(half_length, dt, |t| ([0.0, t.exp()], [0.0, t.exp()]))
}

fn synthetic(h: f64, dt: f64, f: impl Fn(f64) -> ([f64; 2], [f64; 2])) -> Trajectory {
    let n = (2.0 * h / dt).round() as usize;
    let samples = (0..=n)
        .map(|i| {
            let t = -h + 2.0 * h * i as f64 / n as f64;
            let (x, v) = f(t);
            Sample { t, x: x.to_vec(), v: v.to_vec() }
        })
        .collect();
    Trajectory {
        samples,
        speed: 1.0,
        step: 2.0 * h / n as f64,
        scheme: "closed-form".into(),
        exited: false,
        max_relative_drift: 0.0,
    }
}

/// Applies the isometry z ↦ λz + c (λ > 0) to a curve.
pub fn transform(traj: &Trajectory, scale: f64, shift: f64) -> Trajectory {
    let mut out = traj.clone();
    for s in &mut out.samples {
        s.x = vec![scale * s.x[0] + shift, scale * s.x[1]];
        s.v = vec![scale * s.v[0], scale * s.v[1]];
    }
    out
}

/// CSV of the curve and the shadow geodesic sampled at the feet of the
/// curve points: `t,x,y,gx,gy,distance`.
pub fn write_pair_csv<W: Write>(traj: &Trajectory, geo: &Geodesic, mut w: W) -> Result<()> {
    writeln!(w, "t,x,y,gx,gy,distance")?;
    for s in &traj.samples {
        let (p, _) = geo.point(geo.projection(&s.x));
        writeln!(w, "{},{},{},{},{},{}", s.t, s.x[0], s.x[1], p[0], p[1], geo.distance(&s.x))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpRow {
    pub kappa: f64,
    pub measured: f64,
    pub bound: f64,
    pub quadrature_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSuite {
    pub pairs: usize,
    pub violations: usize,
    /// max of measured − bound.
    pub worst_excess: f64,
    /// max of measured / bound.
    pub worst_ratio: f64,
    pub rows: Vec<BumpRow>,
}

/// The i-th random pair: a hypercycle with curvature in [0.05, 0.8] moved by a
/// random isometry, and a bump form centered within distance about 1 of it.
pub fn random_bump_pair(seed: u64, i: u64, half_length: f64, dt: f64) -> (Trajectory, AnalyticForm) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let kappa: f64 = rng.gen_range(0.05..0.8);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let scale = rng.gen_range(-1.0f64..1.0).exp();
    let shift = rng.gen_range(-2.0..2.0);
    let traj = transform(&hypercycle(sign * kappa.atanh(), half_length, dt), scale, shift);
    let t = rng.gen_range(-5.0..5.0);
    let p = &sample_at(&traj, t).x;
    let center = [p[0] + p[1] * rng.gen_range(-0.5..0.5), p[1] * rng.gen_range(-0.5f64..0.5).exp()];
    let form = AnalyticForm::BumpH2 {
        center,
        radius: rng.gen_range(0.5..2.0),
        angle: rng.gen_range(0.0..std::f64::consts::TAU),
        amp: rng.gen_range(0.2..1.0),
    };
    (traj, form)
}

/// Average-difference measurements on `pairs` random bump/hypercycle pairs.
/// A violation is measured > bound + quadrature error + 1e-6.
pub fn bump_suite(pairs: usize, seed: u64, half_length: f64, dt: f64) -> Result<BumpSuite> {
    let space = ModelSpace::Hyperbolic { dim: 2 };
    let rows: Vec<BumpRow> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let (traj, form) = random_bump_pair(seed, i, half_length, dt);
            let rep = analyze(&space, &traj, Some(&form))?;
            let d = rep.difference.expect("form given");
            Ok(BumpRow {
                kappa: rep.kappa_max,
                measured: d.measured,
                bound: d.bound,
                quadrature_error: d.quadrature_error,
            })
        })
        .collect::<Result<_>>()?;
    let violations = rows.iter().filter(|r| r.measured > r.bound + r.quadrature_error + 1e-6).count();
    Ok(BumpSuite {
        pairs,
        violations,
        worst_excess: rows.iter().map(|r| r.measured - r.bound).fold(f64::NEG_INFINITY, f64::max),
        worst_ratio: rows.iter().map(|r| r.measured / r.bound).fold(0.0, f64::max),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: ModelSpace = ModelSpace::Hyperbolic { dim: 2 };

    #[test]
    fn curvature_of_model_curves() {
        let k = geodesic_curvature(&H2, &axis_geodesic(5.0, 0.01)).unwrap();
        assert!(k.iter().all(|k| k.abs() < 1e-6));
        let k = geodesic_curvature(&H2, &horocycle(5.0, 0.01)).unwrap();
        assert!(k.iter().all(|k| (k - 1.0).abs() < 1e-5));
        for d in [0.1, 0.5, 1.0] {
            let k = geodesic_curvature(&H2, &hypercycle(d, 5.0, 0.01)).unwrap();
            assert!(k.iter().all(|k| (k - d.tanh()).abs() < 1e-5), "{d}");
        }
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        assert!(matches!(geodesic_curvature(&H2, &hypercycle(1.0, 20.0, 2.0)), Err(Error::SamplingTooCoarse { .. })));
    }

    #[test]
    fn quasigeodesic_constants() {
        assert_eq!(quasigeodesic_constant(0.0).unwrap(), 1.0);
        assert!((quasigeodesic_constant(0.6).unwrap() - 1.25).abs() < 1e-15);
        let d: f64 = 0.8;
        assert!((quasigeodesic_constant(d.tanh()).unwrap() - d.cosh()).abs() < 1e-12);
        assert!(quasigeodesic_constant(1.0).is_err());
    }

    #[test]
    fn hypercycle_shadow_is_the_axis() {
        let d = 0.7;
        let traj = hypercycle(d, 40.0, 0.01);
        let sh = shadow_geodesic(&H2, &traj).unwrap();
        match (sh.geodesic.start, sh.geodesic.end) {
            (IdealPoint::Finite(a), IdealPoint::Infinity) => assert!(a.abs() < 1e-4),
            other => panic!("{other:?}"),
        }
        let ft = fellow_travel(&sh.geodesic, &H2, &traj).unwrap();
        assert!((ft.max_distance - d).abs() < 1e-4);
        assert!((ft.stretch - d.cosh()).abs() < 1e-3);
    }

    #[test]
    fn geodesic_shadows_itself() {
        let traj = transform(&axis_geodesic(30.0, 0.01), 2.0, 0.5);
        let sh = shadow_geodesic(&H2, &traj).unwrap();
        let ft = fellow_travel(&sh.geodesic, &H2, &traj).unwrap();
        assert!(ft.hausdorff <= 1e-6, "{}", ft.hausdorff);
        let form = AnalyticForm::BumpH2 { center: [0.5, 2.0], radius: 1.0, angle: 0.3, amp: 1.0 };
        let diff = average_difference(&H2, &form, &traj, &sh.geodesic, 0.0).unwrap();
        assert!(diff.measured <= 1e-8, "{}", diff.measured);
    }

    #[test]
    fn small_bump_suite_respects_the_bound() {
        let suite = bump_suite(4, 3, 30.0, 0.01).unwrap();
        assert_eq!(suite.rows.len(), 4);
        assert_eq!(suite.violations, 0, "{:?}", suite.rows);
        let again = bump_suite(4, 3, 30.0, 0.01).unwrap();
        assert_eq!(suite.rows[2].measured, again.rows[2].measured);
    }

    #[test]
    fn semicircle_geodesic_round_trip() {
        let g = Geodesic::new(IdealPoint::Finite(2.0), IdealPoint::Finite(-1.0)).unwrap();
        for sigma in [-2.0, 0.0, 1.5] {
            let (p, v) = g.point(sigma);
            assert!(g.distance(&p) < 1e-12);
            assert!((g.projection(&p) - sigma).abs() < 1e-12);
            assert!((H2.norm(&p, &v).unwrap() - 1.0).abs() < 1e-8);
            // on the circle of centre 1/2 and radius 3/2
            assert!((((p[0] - 0.5).powi(2) + p[1] * p[1]).sqrt() - 1.5).abs() < 1e-12);
        }
    }
}
