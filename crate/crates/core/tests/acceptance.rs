//! End-to-end acceptance over the default scenario suite. Every criterion is
//! checked against references computed here, not against the harness
//! verdicts, and reported as one PASS/FAIL line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use coexact::harness::{load_config, parse_config, run, write_jsonl, RunOptions, RunOutput, RunRecord};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Report {
    lines: Vec<(usize, String, bool, String)>,
}

impl Report {
    fn add(&mut self, n: usize, name: &str, ok: bool, detail: String) {
        self.lines.push((n, name.to_string(), ok, detail));
    }
}

struct Suite<'a> {
    records: BTreeMap<&'a str, &'a RunRecord>,
    seconds: BTreeMap<(String, String), f64>,
}

impl<'a> Suite<'a> {
    fn new(out: &'a RunOutput) -> Self {
        Suite {
            records: out.records.iter().map(|r| (r.scenario.as_str(), r)).collect(),
            seconds: out.timings.iter().map(|t| ((t.scenario.clone(), t.analysis.clone()), t.seconds)).collect(),
        }
    }

    fn rec(&self, id: &str) -> Result<&'a RunRecord, String> {
        self.records.get(id).copied().ok_or_else(|| format!("scenario {id} missing"))
    }

    fn secs(&self, id: &str, analysis: &str) -> f64 {
        self.seconds.get(&(id.to_string(), analysis.to_string())).copied().unwrap_or(f64::INFINITY)
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

/// Grid bounds for c(ε sin x dy): ½ (loop average)² over vertical loops from
/// below and ½ max |ω|² (u = 0) from above.
fn sin_grid_bounds(eps: f64) -> (f64, f64) {
    let n = 720;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for i in 0..n {
        let x = 2.0 * PI * i as f64 / n as f64;
        let avg = (0..n).map(|_| eps * x.sin()).sum::<f64>() / n as f64;
        lo = lo.max(0.5 * avg * avg);
        hi = hi.max(0.5 * (eps * x.sin()).powi(2));
    }
    (lo, hi)
}

fn sin_eps(id: &str) -> f64 {
    if id.ends_with("0.25") {
        0.25
    } else {
        0.5
    }
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1(s: &Suite) -> Check {
    let torus = s.rec("torus-spectrum-64")?;
    let lambda = torus.spectrum.as_ref().and_then(|r| r.lambda_star).ok_or("no λ* on the torus")?;
    let cube = s.rec("cube-curl")?;
    let mu = cube.spectrum.as_ref().and_then(|r| r.curl.first()).map(|e| e.value.abs()).ok_or("no curl pair")?;
    let (t1, t2) = (s.secs("torus-spectrum-64", "spectrum"), s.secs("cube-curl", "spectrum"));
    ensure(
        within(lambda, 1.0, 0.02) && within(mu, 1.0, 0.03) && t1 <= 120.0 && t2 <= 120.0,
        format!("λ* = {lambda:.5} ({t1:.1} s), |μ| = {mu:.5} ({t2:.1} s)"),
    )
}

fn c2(s: &Suite) -> Check {
    let spec = s.rec("cube-curl")?.spectrum.as_ref().ok_or("no spectrum")?;
    if spec.curl.len() < 5 || spec.coexact.len() < 5 {
        return Err(format!("{} curl and {} Laplace pairs", spec.curl.len(), spec.coexact.len()));
    }
    let mut mu2: Vec<f64> = spec.curl.iter().map(|e| e.value * e.value).collect();
    mu2.sort_by(f64::total_cmp);
    let worst = mu2.iter().zip(&spec.coexact).take(5).map(|(m, l)| (m - l.value).abs() / l.value).fold(0.0, f64::max);
    ensure(worst <= 0.03, format!("worst relative mismatch {worst:.2e}"))
}

fn c3(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for id in ["torus-adx", "torus-sin-0.25", "torus-sin-0.5"] {
        let m = s.rec(id)?.mane.as_ref().ok_or(format!("{id}: no critical values"))?;
        let (h, l) = (m.c_hamiltonian.ok_or("no c_H")?, m.c_lagrangian.ok_or(format!("{id}: no c_L"))?);
        let t = s.secs(id, "mane");
        ok &= (h - l).abs() <= 0.05 * h.abs().max(l.abs()) && t <= 300.0;
        parts.push(format!("{id}: {h:.5}/{l:.5} ({t:.1} s)"));
    }
    ensure(ok, parts.join(", "))
}

fn c4(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    let adx = s.rec("torus-adx")?.mane.as_ref().ok_or("no a·dx values")?;
    let (c, c0) = (adx.c_hamiltonian.ok_or("no c")?, adx.c_strict.ok_or("no c₀")?);
    ok &= within(c, 0.5 * 0.3f64.powi(2), 0.05) && c0 <= 1e-3;
    parts.push(format!("a·dx c = {c:.5} c₀ = {c0:.1e}"));
    for id in ["torus-sin-0.25", "torus-sin-0.5"] {
        let m = s.rec(id)?.mane.as_ref().ok_or("no values")?;
        let (c, c0) = (m.c_hamiltonian.ok_or("no c")?, m.c_strict.ok_or("no c₀")?);
        let (lo, hi) = sin_grid_bounds(sin_eps(id));
        let inside = |v: f64| v >= lo * 0.95 && v <= hi * 1.05;
        ok &= (c - c0).abs() <= 1e-3 && inside(c) && inside(c0);
        parts.push(format!("{id} c = {c:.5} c₀ = {c0:.5} grid [{lo:.5}, {hi:.5}]"));
    }
    ensure(ok, parts.join(", "))
}

fn c5(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut applied = 0;
    for rec in s.records.values() {
        let (Some(m), Some(g)) = (&rec.mane, &rec.geometry) else { continue };
        let (Some(l2), Some(c0), Some(frac), Some(vol)) = (m.l2_norm, m.c_strict, m.non_coexact_fraction, g.volume)
        else {
            continue;
        };
        if frac > 1e-2 {
            parts.push(format!("{} skipped (not coexact)", rec.scenario));
            continue;
        }
        applied += 1;
        let rhs = vol.sqrt() * (2.0 * c0).sqrt();
        ok &= l2 <= rhs + 1e-6;
        parts.push(format!("{} {l2:.4} ≤ {rhs:.4}", rec.scenario));
    }
    ensure(ok && applied > 0, parts.join(", "))
}

fn c6(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for id in ["torus-sin-0.25", "torus-sin-0.5"] {
        let m = s.rec(id)?.mane.as_ref().ok_or("no values")?;
        let c0 = m.c_strict.ok_or("no c₀")?;
        let w = m.best_null_loop.as_ref().ok_or(format!("{id}: no null loop"))?;
        let target = (2.0 * c0).sqrt();
        ok &= w.winding.iter().all(|k| *k == 0) && w.ratio >= 0.95 * target;
        parts.push(format!("{id} ratio {:.4} vs √(2c₀) = {target:.4}", w.ratio));
    }
    ensure(ok, parts.join(", "))
}

fn c7(s: &Suite) -> Check {
    let mut ok = true;
    let plane = s.rec("plane-cyclotron")?.flow.as_ref().ok_or("no plane flow")?;
    let radius = plane.cyclotron.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    ok &= !plane.cyclotron.is_empty()
        && plane.cyclotron.iter().all(|r| (r.expected_radius - r.speed / r.field).abs() < 1e-15)
        && radius <= 1e-6;
    let h2 = s.rec("h2-uniform")?.shadow.as_ref().ok_or("no H² shadow")?;
    let (mut kappa, mut dist) = (0.0f64, 0.0f64);
    for o in &h2.orbits {
        let k = o.field / o.speed;
        kappa = kappa.max((o.kappa_max - k).abs()).max((o.kappa_min - k).abs());
        dist = dist.max((o.distance - k.atanh()).abs());
    }
    ok &= !h2.orbits.is_empty() && kappa <= 1e-4 && dist <= 1e-3;
    let mut drift = 0.0f64;
    for rec in s.records.values() {
        for d in rec.flow.iter().flat_map(|f| &f.drift) {
            drift = drift.max(d.max_relative_drift * 100.0 / d.horizon.max(100.0));
        }
    }
    ok &= drift <= 1e-8;
    ensure(ok, format!("radius {radius:.1e}, curvature {kappa:.1e}, distance {dist:.1e}, drift/100 {drift:.1e}"))
}

fn c8(s: &Suite) -> Check {
    let rec = s.rec("sphere")?;
    if rec.geometry.as_ref().map(|g| g.b1) != Some(0) {
        return Err("sphere has b₁ ≠ 0".into());
    }
    let c0 = rec.mane.as_ref().and_then(|m| m.c_strict).ok_or("no c₀")?;
    let target = (2.0 * c0).sqrt();
    let flow = rec.flow.as_ref().ok_or("no flow")?;
    let at = |m: f64| flow.comass.iter().find(|r| r.multiple == Some(m)).map(|r| r.value);
    let (v1, v2) = (at(1.0).ok_or("no row at s₀")?, at(2.0).ok_or("no row at 2s₀")?);
    ensure(
        within(v1, target, 0.05) && v2 <= 1.05 * target,
        format!("√(2c₀) = {target:.4}, comass(s₀) = {v1:.4}, comass(2s₀) = {v2:.4}"),
    )
}

fn c9(s: &Suite) -> Check {
    let bump = s.rec("h2-bumps")?.shadow.as_ref().and_then(|r| r.bump.as_ref()).ok_or("no bump suite")?;
    let violations = bump.rows.iter().filter(|r| r.measured > r.bound + 1e-6).count();
    let worst = bump.rows.iter().map(|r| r.measured - r.bound).fold(f64::NEG_INFINITY, f64::max);
    let t = s.secs("h2-bumps", "shadow");
    ensure(
        bump.rows.len() == 100 && violations == 0 && t <= 180.0,
        format!("{} pairs, {violations} violations, worst excess {worst:.3e}, {t:.1} s", bump.rows.len()),
    )
}

fn c10(s: &Suite) -> Check {
    let h2 = s.rec("h2-uniform")?.shadow.as_ref().ok_or("no H² shadow")?;
    let (mut kappa, mut stretch) = (0.0f64, 0.0f64);
    for o in &h2.orbits {
        let k = o.field / o.speed;
        kappa = kappa.max((o.kappa_max - k).abs());
        stretch = stretch.max((o.stretch - k.atanh().cosh()).abs());
        stretch = stretch.max((o.stretch - (1.0 - o.kappa_max.powi(2)).powf(-0.5)).abs());
    }
    ensure(
        !h2.orbits.is_empty() && kappa <= 1e-4 && stretch <= 1e-3,
        format!("{} orbits, κ error {kappa:.1e}, stretch error {stretch:.1e}", h2.orbits.len()),
    )
}

fn c11(s: &Suite) -> Check {
    let mut n = 0;
    let (mut gap, mut stokes) = (0.0f64, 0.0f64);
    for rec in s.records.values() {
        for l in rec.iso.iter().flat_map(|i| &i.loops) {
            let c = l.check.as_ref().ok_or(format!("{}: loop {:?} failed: {:?}", rec.scenario, l.corners, l.error))?;
            if !(c.lhs <= c.rhs + 1e-12 * (1.0 + c.rhs)) {
                return Err(format!("{}: Cheeger inequality fails ({} > {})", rec.scenario, c.lhs, c.rhs));
            }
            gap = gap.max(c.duality_gap / c.mass);
            stokes = stokes.max(c.stokes_defect);
            n += 1;
        }
    }
    ensure(n > 0 && gap <= 1e-6 && stokes <= 1e-12, format!("{n} loops, gap/mass {gap:.1e}, Stokes {stokes:.1e}"))
}

fn c12(s: &Suite) -> Check {
    let cover = &s.rec("torus-sin-0.5")?.mane.as_ref().ok_or("no values")?.cover;
    let orders: Vec<usize> = cover.iter().map(|c| c.0).collect();
    let rise = cover.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    ensure(orders == [1, 2, 3] && rise <= 1e-3, format!("{cover:?}"))
}

const SMALL: &str = r#"
[[scenario]]
id = "spec"
analyses = ["spectrum", "mane", "verify"]
geometry = { generator = "flat_torus", cells = [12, 12] }
form = { form = "eigenform", index = 0 }
mane = { lagrangian = true, starts_per_class = 4, nodes = 24 }

[[scenario]]
id = "sin"
analyses = ["mane", "flow", "iso", "verify"]
geometry = { generator = "flat_torus", cells = [12, 12] }
form = { form = "sin_dy", eps = 0.5 }
mane = { lagrangian = true, lagrangian_null = true, starts_per_class = 4, nodes = 24 }
flow = { speeds = [0.3], orbits = 8, horizon = 30.0 }
iso = { loops = [[[1.0, 1.0], [3.0, 1.0], [2.0, 3.0]]] }

[[scenario]]
id = "bumps"
analyses = ["shadow", "verify"]
geometry = { generator = "hyperbolic" }
shadow = { bump_pairs = 8 }
"#;

fn c13() -> Check {
    let config = parse_config(SMALL, &configs()).map_err(|e| e.to_string())?;
    let opts = RunOptions { seed: Some(17), threads: Some(1), ..Default::default() };
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let out = run(&config, &opts).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_jsonl(&out.records, &mut buf).map_err(|e| e.to_string())?;
        bytes.push(buf);
    }
    ensure(bytes[0] == bytes[1] && !bytes[0].is_empty(), format!("{} bytes per run", bytes[0].len()))
}

#[test]
fn acceptance() {
    let config = load_config(&configs().join("default.toml")).expect("default suite");
    let out = run(&config, &RunOptions { threads: Some(1), ..Default::default() }).expect("suite runs");
    let suite = Suite::new(&out);
    let mut report = Report { lines: Vec::new() };
    let checks: [(&str, &dyn Fn(&Suite) -> Check); 12] = [
        ("spectral oracle", &c1),
        ("curl-Laplace consistency", &c2),
        ("CIPP cross-check", &c3),
        ("strict vs plain critical value", &c4),
        ("norm comparison", &c5),
        ("null-homologous loop ratio", &c6),
        ("magnetic flow oracles", &c7),
        ("critical speed on the sphere", &c8),
        ("average difference bound", &c9),
        ("quasigeodesic constants", &c10),
        ("isoperimetric LP", &c11),
        ("cover tower", &c12),
    ];
    for (i, (name, f)) in checks.iter().enumerate() {
        let (ok, detail) = match f(&suite) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        report.add(i + 1, name, ok, detail);
    }
    let (ok, detail) = match c13() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    report.add(13, "determinism", ok, detail);

    // straight to stdout so the lines survive the test harness capture
    let mut stdout = std::io::stdout().lock();
    for (n, name, ok, detail) in &report.lines {
        let status = if *ok { "PASS" } else { "FAIL" };
        writeln!(stdout, "criterion {n:>2} {name:<32} {status}  {detail}").unwrap();
    }
    for rec in &out.records {
        for (key, e) in &rec.errors {
            writeln!(stdout, "  {} {key}: [{}] {}", rec.scenario, e.kind, e.message).unwrap();
        }
    }
    drop(stdout);
    let failed: Vec<usize> = report.lines.iter().filter(|l| !l.2).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
