//! Scenario execution in dependency order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Analysis, Config, DerivedForm, FormSpec, GeometrySpec, Scenario};
use super::record::*;
use crate::dec::{self, Cochain, HodgeOperators};
use crate::error::{Error, Result};
use crate::forms::AnalyticForm;
use crate::geometry::{self, ModelSpace};
use crate::isoperimetric;
use crate::magflow::{self, FlowOptions, PeriodicOptions};
use crate::mane::{self, LagrangianOptions, LinfOptions, MagneticSystem};
use crate::shadow;
use crate::spectral::{self, EigenPair, SpectralOptions};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tol_scale: Option<f64>,
    /// Restrict to scenarios requesting this analysis, running it and its
    /// prerequisites only.
    pub only: Option<Analysis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub scenario: String,
    pub analysis: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    /// Wall times, kept apart from the records so those stay reproducible.
    pub timings: Vec<Timing>,
}

impl RunOutput {
    /// 0 when no analysis errored and no verdict failed, else 1.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.records.iter().any(RunRecord::has_failure))
    }
}

fn restrict(sc: &Scenario, only: Analysis) -> Option<Scenario> {
    if !sc.requests(only) {
        return None;
    }
    if only == Analysis::Verify {
        return Some(sc.clone());
    }
    let mut keep = vec![only];
    let mut i = 0;
    while i < keep.len() {
        for p in sc.prerequisites(keep[i]) {
            if !keep.contains(&p) {
                keep.push(p);
            }
        }
        i += 1;
    }
    let mut out = sc.clone();
    out.analyses.retain(|a| keep.contains(a));
    Some(out)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))
}

/// Runs every scenario and returns one record per scenario in config order.
pub fn run(config: &Config, opts: &RunOptions) -> Result<RunOutput> {
    let scenarios: Vec<Scenario> = match opts.only {
        Some(a) => config.scenarios.iter().filter_map(|s| restrict(s, a)).collect(),
        None => config.scenarios.clone(),
    };
    for sc in &scenarios {
        sc.check_dependencies()?;
    }
    let tol_scale = opts.tol_scale.unwrap_or(config.tol_scale);
    if !(tol_scale > 0.0 && tol_scale.is_finite()) {
        return Err(Error::Config { line: 0, column: 0, message: "tol-scale must be positive".into() });
    }
    let threads = opts.threads.unwrap_or(config.threads);
    let outer = pool(threads)?;
    let results: Vec<Result<(RunRecord, Vec<Timing>)>> = outer.install(|| {
        scenarios
            .par_iter()
            .map(|sc| {
                let seed = opts.seed.or(sc.seed).unwrap_or(config.seed);
                match sc.threads {
                    Some(t) => Ok(pool(t)?.install(|| run_scenario(sc, seed, tol_scale))),
                    None => Ok(run_scenario(sc, seed, tol_scale)),
                }
            })
            .collect()
    });
    let mut out = RunOutput::default();
    for r in results {
        let (rec, t) = r?;
        out.records.push(rec);
        out.timings.extend(t);
    }
    Ok(out)
}

struct Built {
    space: ModelSpace,
    ops: Option<Arc<HodgeOperators>>,
    harmonic: Vec<Cochain>,
}

fn budget(cells: usize, max: usize) -> Result<()> {
    if cells > max {
        return Err(Error::ResourceBudget { order: 1, cells, budget: max });
    }
    Ok(())
}

fn build_geometry(sc: &Scenario, spec: &GeometrySpec) -> Result<Built> {
    if let Some(cells) = spec.estimated_cells() {
        budget(cells, sc.max_cells)?;
    }
    let tau = std::f64::consts::TAU;
    let (space, mesh) = match spec {
        GeometrySpec::FlatTorus { cells, periods } => {
            let periods = periods.clone().unwrap_or_else(|| vec![tau; cells.len()]);
            if periods.len() != cells.len() {
                return Err(Error::InvalidMesh("`periods` and `cells` differ in length".into()));
            }
            let mesh = match cells.len() {
                2 => geometry::flat_torus_2d(cells[0], cells[1], periods[0], periods[1])?,
                3 if cells.iter().all(|&c| c == cells[0]) && periods.iter().all(|&p| p == periods[0]) => {
                    geometry::bcc_torus_3d(cells[0], periods[0])?
                }
                _ => return Err(Error::Unsupported("flat torus meshes are 2D or cubic 3D".into())),
            };
            (ModelSpace::FlatTorus { periods }, Some(mesh))
        }
        GeometrySpec::Icosphere { level, radius } => {
            (ModelSpace::RoundSphere { dim: 2, radius: *radius }, Some(geometry::icosphere(*level, *radius)?))
        }
        GeometrySpec::MeshFile { path, space } => {
            let mesh = geometry::read_mesh(BufReader::new(File::open(path)?))?;
            budget(mesh.count(mesh.dim()), sc.max_cells)?;
            (space.clone(), Some(mesh))
        }
        GeometrySpec::Hyperbolic { dim } => (ModelSpace::Hyperbolic { dim: *dim }, None),
        GeometrySpec::Euclidean { dim } => (ModelSpace::Euclidean { dim: *dim }, None),
    };
    match mesh {
        Some(m) => {
            let ops = Arc::new(HodgeOperators::new(Arc::new(m))?);
            let harmonic = dec::harmonic_basis(&ops)?;
            Ok(Built { space, ops: Some(ops), harmonic })
        }
        None => Ok(Built { space, ops: None, harmonic: Vec::new() }),
    }
}

fn geometry_result(b: &Built) -> GeometryResult {
    let mesh = b.ops.as_ref().map(|ops| {
        let m = ops.mesh();
        MeshSummary {
            vertices: m.count(0),
            edges: m.count(1),
            top_simplices: m.count(m.dim()),
            max_edge: (0..m.count(1)).map(|e| m.edge_length(e)).fold(0.0, f64::max),
            b1: b.harmonic.len(),
        }
    });
    let b1 = match (&mesh, &b.space) {
        (Some(m), _) => m.b1,
        (None, ModelSpace::FlatTorus { periods }) => periods.len(),
        (None, _) => 0,
    };
    GeometryResult {
        space: b.space.clone(),
        volume: Some(b.ops.as_ref().map(|o| o.mesh().total_volume()).unwrap_or_else(|| b.space.volume()))
            .filter(|v| v.is_finite()),
        b1,
        mesh,
    }
}

fn require_ops(b: &Built, what: &str) -> Result<Arc<HodgeOperators>> {
    b.ops.clone().ok_or_else(|| Error::Unsupported(format!("{what} needs a meshed geometry")))
}

fn run_spectrum(sc: &Scenario, b: &Built, seed: u64) -> Result<(SpectrumResult, Vec<EigenPair>)> {
    let ops = require_ops(b, "spectrum")?;
    let opts = SpectralOptions { tol: sc.spectrum.solver_tol, seed, ..Default::default() };
    let pairs = spectral::coexact_spectrum(&ops, sc.spectrum.count, &opts)?;
    let curl = if sc.spectrum.curl_count > 0 {
        spectral::curl_spectrum(&ops, sc.spectrum.curl_count, &opts)?
    } else {
        Vec::new()
    };
    let summary = |p: &EigenPair| EigenSummary { value: p.value, residual: p.residual, coexactness: p.coexactness };
    let res = SpectrumResult {
        coexact: pairs.iter().map(summary).collect(),
        curl: curl.iter().map(summary).collect(),
        lambda_star: pairs.first().map(|p| p.value),
        mvi_ratio: pairs.first().map(|p| spectral::mvi_ratio(&ops, &p.form)).transpose()?,
        expected_lambda: sc.spectrum.expected_lambda,
        expected_curl: sc.spectrum.expected_curl,
    };
    Ok((res, pairs))
}

fn build_system(form: &FormSpec, b: &Built, pairs: &[EigenPair]) -> Result<MagneticSystem> {
    let analytic = |f: AnalyticForm| match &b.ops {
        Some(ops) => MagneticSystem::on_mesh(b.space.clone(), f, ops.clone()),
        None => Ok(MagneticSystem::analytic(b.space.clone(), f)),
    };
    match form {
        FormSpec::Analytic(f) => analytic(f.clone()),
        FormSpec::Derived(DerivedForm::NormalizedSphere) => analytic(AnalyticForm::normalized_sphere_form()),
        FormSpec::Derived(DerivedForm::Eigenform { index }) => {
            let ops = require_ops(b, "an eigenform")?;
            let p = pairs.get(*index).ok_or_else(|| {
                Error::Unsupported(format!("eigenform {index} requested but only {} computed", pairs.len()))
            })?;
            MagneticSystem::from_cochain(b.space.clone(), ops, p.form.clone())
        }
        FormSpec::Derived(DerivedForm::CochainFile { path }) => {
            let ops = require_ops(b, "a cochain file")?;
            let c = dec::read_cochain(ops.mesh(), BufReader::new(File::open(path)?))?;
            if c.degree != 1 {
                return Err(Error::DegreeMismatch { expected: 1, got: c.degree });
            }
            MagneticSystem::from_cochain(b.space.clone(), ops, c)
        }
    }
}

type Errors = BTreeMap<String, ErrorInfo>;

fn note<T>(errors: &mut Errors, key: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.insert(key.to_string(), ErrorInfo::from(&e));
            None
        }
    }
}

fn run_mane(sc: &Scenario, sys: &MagneticSystem, seed: u64, errors: &mut Errors) -> ManeResult {
    let spec = &sc.mane;
    let mut res =
        ManeResult { expected_c: spec.expected_c, expected_c_strict: spec.expected_c_strict, ..Default::default() };
    if let (Some(ops), Some(omega)) = (sys.ops(), sys.omega()) {
        let norms = (|| -> Result<(f64, f64)> {
            let l2 = dec::l2_norm(ops, omega)?;
            let dec = dec::hodge_decompose(ops, omega)?;
            let rest = dec::l2_norm(ops, &omega.sub(&dec.coexact)?)?;
            Ok((l2, if l2 > 0.0 { rest / l2 } else { 0.0 }))
        })();
        if let Some((l2, frac)) = note(errors, "mane.norms", norms) {
            res.l2_norm = Some(l2);
            res.non_coexact_fraction = Some(frac);
        }
        let linf = LinfOptions::default();
        if spec.hamiltonian {
            if let Some(h) = note(errors, "mane.hamiltonian", mane::critical_value_hamiltonian(sys, &linf)) {
                res.c_hamiltonian = Some(h.c);
                res.hamiltonian_converged = Some(h.converged);
            }
        }
        if spec.strict {
            if let Some(s) = note(errors, "mane.strict", mane::strict_critical_value(sys, &linf)) {
                res.c_strict = Some(s.c);
                res.harmonic_coeffs = s.harmonic_coeffs;
            }
        }
    }
    let lag = LagrangianOptions {
        nodes: spec.nodes,
        starts_per_class: spec.starts_per_class,
        max_winding: spec.max_winding,
        seed,
        ..Default::default()
    };
    if spec.lagrangian {
        if let Some(l) = note(errors, "mane.lagrangian", mane::critical_value_lagrangian(sys, &lag, false)) {
            res.c_lagrangian = Some(l.c);
        }
    }
    if spec.lagrangian_null {
        if let Some(l) = note(errors, "mane.lagrangian_null", mane::critical_value_lagrangian(sys, &lag, true)) {
            res.c_lagrangian_null = Some(l.c);
            res.best_null_ratio = Some(l.best_ratio);
            res.best_null_loop = l.best_ratio_loop;
        }
    }
    if !spec.cover_orders.is_empty() {
        let cover = match sys.form() {
            Some(f) => mane::universal_critical_value_estimate(
                sys.space(),
                f,
                spec.cells_per_period,
                &spec.cover_orders,
                spec.cell_budget,
                &LinfOptions::default(),
            ),
            None => Err(Error::Unsupported("cover tower needs an analytic form".into())),
        };
        if let Some(c) = note(errors, "mane.cover", cover) {
            res.cover = c;
        }
    }
    res
}

fn cyclotron(sys: &MagneticSystem, s: f64, opts: &FlowOptions) -> Result<CyclotronRow> {
    let b = match sys.form() {
        Some(AnalyticForm::PlaneUniform { b }) if matches!(sys.space(), ModelSpace::Euclidean { dim: 2 }) => *b,
        _ => return Err(Error::Unsupported("cyclotron check needs a uniform field in the plane".into())),
    };
    let (x0, v0) = (vec![0.0, 0.0], vec![s, 0.0]);
    let a0 = magflow::acceleration(sys, &x0, &v0)?;
    let a2 = a0[0] * a0[0] + a0[1] * a0[1];
    let center = [x0[0] + a0[0] * s * s / a2, x0[1] + a0[1] * s * s / a2];
    let expected = s / b.abs();
    let traj = magflow::integrate(sys, &x0, &v0, std::f64::consts::TAU / b.abs(), opts)?;
    let max_deviation = traj
        .samples
        .iter()
        .map(|p| ((p.x[0] - center[0]).hypot(p.x[1] - center[1]) - expected).abs())
        .fold(0.0, f64::max);
    Ok(CyclotronRow { speed: s, field: b, expected_radius: expected, max_deviation })
}

fn run_flow(sc: &Scenario, sys: &MagneticSystem, mane: Option<&ManeResult>, errors: &mut Errors) -> FlowResult {
    let spec = &sc.flow;
    let opts = FlowOptions { step: spec.step, sample_dt: spec.step, ..Default::default() };
    let s0 = mane.and_then(|m| m.c_strict).map(|c| (2.0 * c.max(0.0)).sqrt());
    let mut res = FlowResult { s0, ..Default::default() };
    let mut speeds: Vec<(f64, Option<f64>)> = spec.speeds.iter().map(|&s| (s, None)).collect();
    if !spec.speed_multiples.is_empty() {
        match s0 {
            Some(s0) if s0 > 0.0 => speeds.extend(spec.speed_multiples.iter().map(|&k| (k * s0, Some(k)))),
            _ => {
                note::<()>(errors, "flow.speeds", Err(Error::Unsupported("speed multiples need c₀ > 0".into())));
            }
        }
    }
    for (i, &(s, multiple)) in speeds.iter().enumerate() {
        let key = format!("flow.comass[{i}]");
        if let Some(c) = note(errors, &key, magflow::comass_estimate(sys, s, spec.orbits, spec.horizon, &opts)) {
            res.comass.push(ComassRow {
                speed: s,
                multiple,
                value: c.value,
                median: c.median,
                q90: c.q90,
                orbits: spec.orbits,
                exited: c.exited,
            });
        }
        let drift =
            magflow::bundle_seed(sys, 0, s).and_then(|(x, v)| magflow::integrate(sys, &x, &v, spec.horizon, &opts));
        if let Some(t) = note(errors, &format!("flow.drift[{i}]"), drift) {
            res.drift.push(DriftRow { speed: s, horizon: t.duration(), max_relative_drift: t.max_relative_drift });
        }
    }
    for (i, &s) in spec.cyclotron_speeds.iter().enumerate() {
        if let Some(c) = note(errors, &format!("flow.cyclotron[{i}]"), cyclotron(sys, s, &opts)) {
            res.cyclotron.push(c);
        }
    }
    if let Some(p) = &spec.periodic {
        let speed = if p.relative { s0.map(|s0| p.speed * s0) } else { Some(p.speed) };
        let found = speed.ok_or_else(|| Error::Unsupported("relative periodic speed needs c₀".into())).and_then(|s| {
            let seeds = (0..p.seeds)
                .map(|i| magflow::bundle_seed(sys, i, s).map(|(x, v)| (x, v[1].atan2(v[0]))))
                .collect::<Result<Vec<_>>>()?;
            Ok(PeriodicResult {
                speed: s,
                orbit: magflow::find_periodic_orbit(sys, s, &seeds, &PeriodicOptions::default())?,
            })
        });
        res.periodic = note(errors, "flow.periodic", found);
    }
    res
}

fn orbit_shadow(sys: &MagneticSystem, s: f64, half_length: f64, dt: f64) -> Result<OrbitShadow> {
    let b = match sys.form() {
        Some(AnalyticForm::UniformFieldH2 { b }) => *b,
        _ => return Err(Error::Unsupported("orbit shadowing needs a uniform field on H²".into())),
    };
    let opts = FlowOptions { step: dt, sample_dt: dt, ..Default::default() };
    let traj = magflow::integrate_centered(sys, &[0.0, 1.0], &[s, 0.0], half_length / s, &opts)?;
    let kappa = shadow::geodesic_curvature(sys.space(), &traj)?;
    let rep = shadow::analyze(sys.space(), &traj, None)?;
    Ok(OrbitShadow {
        speed: s,
        field: b.abs(),
        kappa_max: rep.kappa_max,
        kappa_min: kappa.iter().cloned().fold(f64::INFINITY, f64::min),
        distance: rep.fellow.max_distance,
        stretch: rep.fellow.stretch,
        endpoint_drift: rep.shadow.endpoint_drift,
    })
}

fn run_shadow(sc: &Scenario, sys: Option<&MagneticSystem>, seed: u64, errors: &mut Errors) -> ShadowResult {
    let spec = &sc.shadow;
    let mut res = ShadowResult::default();
    if let Some(sys) = sys {
        for (i, &s) in spec.speeds.iter().enumerate() {
            if let Some(o) =
                note(errors, &format!("shadow.orbit[{i}]"), orbit_shadow(sys, s, spec.half_length, spec.dt))
            {
                res.orbits.push(o);
            }
        }
    }
    if spec.bump_pairs > 0 {
        res.bump =
            note(errors, "shadow.bump", shadow::bump_suite(spec.bump_pairs, seed, spec.bump_half_length, spec.dt));
    }
    res
}

fn run_iso(sc: &Scenario, sys: &MagneticSystem, harmonic: &[Cochain], errors: &mut Errors) -> IsoResult {
    let spec = &sc.iso;
    let mut res = IsoResult::default();
    let mut sys = sys.clone();
    let mut harmonic = harmonic.to_vec();
    if spec.refine > 0 {
        let refined = (|| -> Result<(MagneticSystem, Vec<Cochain>)> {
            let form =
                sys.form().cloned().ok_or_else(|| Error::Unsupported("refinement needs an analytic form".into()))?;
            let mut mesh = require_mesh(&sys)?.mesh().clone();
            for _ in 0..spec.refine {
                mesh = isoperimetric::refine_surface(&mesh)?.0;
            }
            budget(mesh.count(mesh.dim()), sc.max_cells)?;
            let ops = Arc::new(HodgeOperators::new(Arc::new(mesh))?);
            let h = dec::harmonic_basis(&ops)?;
            Ok((MagneticSystem::on_mesh(sys.space().clone(), form, ops)?, h))
        })();
        match note(errors, "iso.refine", refined) {
            Some((s, h)) => {
                sys = s;
                harmonic = h;
            }
            None => return res,
        }
    }
    let Some(ops) = note(errors, "iso", require_mesh(&sys)) else {
        return res;
    };
    let mut cycles = Vec::new();
    for corners in &spec.loops {
        let out = (|| -> Result<(Cochain, isoperimetric::CheegerCheck)> {
            let path = isoperimetric::polyline_path(ops.mesh(), corners)?;
            let cycle = isoperimetric::cycle_from_path(ops.mesh(), &path)?;
            isoperimetric::check_null_homologous(&ops, &cycle, &harmonic)?;
            let check = isoperimetric::cheeger_chain_check(&sys, &cycle)?;
            Ok((cycle, check))
        })();
        match out {
            Ok((cycle, check)) => {
                cycles.push(cycle);
                res.loops.push(LoopOutcome { corners: corners.clone(), check: Some(check), error: None });
            }
            Err(e) => res.loops.push(LoopOutcome { corners: corners.clone(), check: None, error: Some(e.to_string()) }),
        }
    }
    if !cycles.is_empty() {
        res.h1 = note(errors, "iso.h1", isoperimetric::h1_upper_estimate(&ops, &cycles));
    }
    res
}

fn require_mesh(sys: &MagneticSystem) -> Result<Arc<HodgeOperators>> {
    sys.ops().cloned().ok_or_else(|| Error::Unsupported("needs a meshed geometry".into()))
}

struct Clock<'a> {
    scenario: &'a str,
    timings: Vec<Timing>,
}

impl Clock<'_> {
    fn time<T>(&mut self, analysis: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            scenario: self.scenario.to_string(),
            analysis: analysis.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs one scenario. Failures are recorded per analysis; an analysis whose
/// inputs failed is marked as skipped.
pub fn run_scenario(sc: &Scenario, seed: u64, tol_scale: f64) -> (RunRecord, Vec<Timing>) {
    let mut rec = RunRecord {
        scenario: sc.id.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        analyses: sc.analyses.clone(),
        tolerances: sc.tolerances.scaled(tol_scale),
        geometry: None,
        spectrum: None,
        mane: None,
        flow: None,
        shadow: None,
        iso: None,
        verify: None,
        errors: BTreeMap::new(),
    };
    let mut clock = Clock { scenario: &sc.id, timings: Vec::new() };
    let computes = sc.analyses.iter().any(|a| *a != Analysis::Verify);
    let built = match (&sc.geometry, computes) {
        (Some(g), true) => note(&mut rec.errors, "geometry", clock.time("geometry", || build_geometry(sc, g))),
        _ => None,
    };
    rec.geometry = built.as_ref().map(geometry_result);

    let mut pairs = Vec::new();
    if sc.requests(Analysis::Spectrum) {
        if let Some(b) = &built {
            let r = clock.time("spectrum", || run_spectrum(sc, b, seed));
            if let Some((res, p)) = note(&mut rec.errors, "spectrum", r) {
                rec.spectrum = Some(res);
                pairs = p;
            }
        }
    }

    let needs_system =
        sc.analyses.iter().any(|a| matches!(a, Analysis::Mane | Analysis::Flow | Analysis::Iso | Analysis::Shadow));
    let sys = match (&built, &sc.form, needs_system) {
        (Some(b), Some(f), true) => note(&mut rec.errors, "form", build_system(f, b, &pairs)),
        _ => None,
    };

    if sc.requests(Analysis::Mane) {
        if let Some(sys) = &sys {
            let m = clock.time("mane", || run_mane(sc, sys, seed, &mut rec.errors));
            rec.mane = Some(m);
        }
    }
    if sc.requests(Analysis::Flow) {
        if let Some(sys) = &sys {
            let f = clock.time("flow", || run_flow(sc, sys, rec.mane.as_ref(), &mut rec.errors));
            rec.flow = Some(f);
        }
    }
    if sc.requests(Analysis::Shadow) && built.is_some() {
        let s = clock.time("shadow", || run_shadow(sc, sys.as_ref(), seed, &mut rec.errors));
        rec.shadow = Some(s);
    }
    if sc.requests(Analysis::Iso) {
        if let (Some(sys), Some(b)) = (&sys, &built) {
            let i = clock.time("iso", || run_iso(sc, sys, &b.harmonic, &mut rec.errors));
            rec.iso = Some(i);
        }
    }
    for a in &sc.analyses {
        let produced = match a {
            Analysis::Spectrum => rec.spectrum.is_some(),
            Analysis::Mane => rec.mane.is_some(),
            Analysis::Flow => rec.flow.is_some(),
            Analysis::Shadow => rec.shadow.is_some(),
            Analysis::Iso => rec.iso.is_some(),
            Analysis::Verify => true,
        };
        if !produced && !rec.errors.contains_key(a.name()) {
            let info = ErrorInfo { kind: "skipped".into(), message: "an input of this analysis failed".into() };
            rec.errors.insert(a.name().to_string(), info);
        }
    }
    if sc.requests(Analysis::Verify) {
        rec.verify = Some(verify(&rec));
    }
    (rec, clock.timings)
}
