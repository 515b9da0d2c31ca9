//! Run records and the verdict table derived from them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::{Analysis, Tolerances};
use crate::error::{Error, Result};
use crate::geometry::ModelSpace;
use crate::isoperimetric::{CheegerCheck, H1Estimate};
use crate::magflow::PeriodicOrbit;
use crate::mane::LoopWitness;
use crate::shadow::BumpSuite;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub edges: usize,
    pub top_simplices: usize,
    pub max_edge: f64,
    pub b1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryResult {
    pub space: ModelSpace,
    /// Mesh volume when meshed, else the model volume; absent when noncompact.
    pub volume: Option<f64>,
    /// First Betti number: from the discrete harmonic space when meshed.
    pub b1: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub value: f64,
    pub residual: f64,
    pub coexactness: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub coexact: Vec<EigenSummary>,
    pub curl: Vec<EigenSummary>,
    pub lambda_star: Option<f64>,
    /// ‖ω‖∞/‖ω‖₂ of the first eigenform.
    pub mvi_ratio: Option<f64>,
    pub expected_lambda: Option<f64>,
    pub expected_curl: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManeResult {
    pub c_hamiltonian: Option<f64>,
    pub c_strict: Option<f64>,
    pub c_lagrangian: Option<f64>,
    pub c_lagrangian_null: Option<f64>,
    /// Largest (1/ℓ)∫ω over the null-homologous loops searched.
    pub best_null_ratio: Option<f64>,
    pub best_null_loop: Option<LoopWitness>,
    pub harmonic_coeffs: Vec<f64>,
    pub hamiltonian_converged: Option<bool>,
    /// ‖ω‖₂ of the discrete form.
    pub l2_norm: Option<f64>,
    /// ‖ω − ω_coexact‖₂ / ‖ω‖₂.
    pub non_coexact_fraction: Option<f64>,
    pub cover: Vec<(usize, f64)>,
    pub expected_c: Option<f64>,
    pub expected_c_strict: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComassRow {
    pub speed: f64,
    pub multiple: Option<f64>,
    pub value: f64,
    pub median: f64,
    pub q90: f64,
    pub orbits: usize,
    pub exited: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub speed: f64,
    pub horizon: f64,
    pub max_relative_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclotronRow {
    pub speed: f64,
    pub field: f64,
    pub expected_radius: f64,
    /// max over one turn of | |x − center| − s/B |.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicResult {
    pub speed: f64,
    pub orbit: Option<PeriodicOrbit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub s0: Option<f64>,
    pub comass: Vec<ComassRow>,
    pub drift: Vec<DriftRow>,
    pub cyclotron: Vec<CyclotronRow>,
    pub periodic: Option<PeriodicResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitShadow {
    pub speed: f64,
    pub field: f64,
    pub kappa_max: f64,
    pub kappa_min: f64,
    pub distance: f64,
    pub stretch: f64,
    pub endpoint_drift: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult {
    pub orbits: Vec<OrbitShadow>,
    pub bump: Option<BumpSuite>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopOutcome {
    pub corners: Vec<Vec<f64>>,
    pub check: Option<CheegerCheck>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IsoResult {
    pub loops: Vec<LoopOutcome>,
    pub h1: Option<H1Estimate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One inequality `left ≤ right + tol`; slack is `right + tol − left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim: String,
    pub status: Status,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub tol: f64,
    pub slack: Option<f64>,
    pub note: String,
}

impl Verdict {
    fn check(claim: impl Into<String>, left: f64, right: f64, tol: f64, note: impl Into<String>) -> Self {
        let slack = right + tol - left;
        Verdict {
            claim: claim.into(),
            status: if slack >= 0.0 { Status::Pass } else { Status::Fail },
            left: Some(left),
            right: Some(right),
            tol,
            slack: Some(slack),
            note: note.into(),
        }
    }

    fn inconclusive(claim: impl Into<String>, note: impl Into<String>) -> Self {
        Verdict {
            claim: claim.into(),
            status: Status::Inconclusive,
            left: None,
            right: None,
            tol: 0.0,
            slack: None,
            note: note.into(),
        }
    }

    /// Turns a failed check into INCONCLUSIVE: for claims whose sampled side
    /// can only under-approximate a supremum.
    fn sampling_limited(mut self, why: &str) -> Self {
        if self.status == Status::Fail {
            self.status = Status::Inconclusive;
            self.note = why.to_string();
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub analyses: Vec<Analysis>,
    /// Tolerances after the run-wide scale.
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mane: Option<ManeResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<ShadowResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso: Option<IsoResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<Vec<Verdict>>,
    /// Structured errors keyed by analysis.
    #[serde(default)]
    pub errors: BTreeMap<String, ErrorInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo { kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl RunRecord {
    /// True when an analysis errored or a stored verdict failed.
    pub fn has_failure(&self) -> bool {
        !self.errors.is_empty() || self.verify.iter().flatten().any(|v| v.status == Status::Fail)
    }
}

pub fn write_jsonl<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("record line {}: {e}", no + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

fn rel_check(claim: &str, value: f64, expected: f64, rel: f64, note: &str) -> Verdict {
    Verdict::check(claim, (value - expected).abs(), 0.0, rel * expected.abs(), note)
}

/// Derives the verdict table from a record's stored results only.
pub fn verify(rec: &RunRecord) -> Vec<Verdict> {
    let t = &rec.tolerances;
    let mut rows = Vec::new();
    let mane = rec.mane.as_ref();
    let c0 = mane.and_then(|m| m.c_strict);
    let s0 = c0.map(|c| (2.0 * c.max(0.0)).sqrt());

    if let Some(sp) = &rec.spectrum {
        if let (Some(l), Some(e)) = (sp.lambda_star, sp.expected_lambda) {
            rows.push(rel_check("spectral-oracle", l, e, t.spectral, "|λ* − expected| vs relative tolerance"));
        }
        if let (Some(mu), Some(e)) = (sp.curl.first(), sp.expected_curl) {
            rows.push(rel_check("curl-oracle", mu.value.abs(), e, t.curl, "|μ₁| against expected"));
        }
        if !sp.curl.is_empty() && !sp.coexact.is_empty() {
            let mut mu2: Vec<f64> = sp.curl.iter().map(|p| p.value * p.value).collect();
            mu2.sort_by(f64::total_cmp);
            let n = mu2.len().min(sp.coexact.len());
            let dev = (0..n).map(|i| (mu2[i] - sp.coexact[i].value).abs() / sp.coexact[i].value).fold(0.0, f64::max);
            rows.push(Verdict::check("curl-laplace", dev, 0.0, t.curl, format!("max relative gap over {n} pairs")));
        }
    }

    match mane {
        None => {
            for claim in ["norm-comp", "null-loop-id", "cipp"] {
                rows.push(Verdict::inconclusive(claim, "no mane analysis in the record"));
            }
        }
        Some(m) => {
            if let (Some(c), Some(e)) = (m.c_hamiltonian, m.expected_c) {
                rows.push(rel_check("c-oracle", c, e, t.relative, "c against expected"));
            }
            if let (Some(c), Some(e)) = (m.c_strict, m.expected_c_strict) {
                if e == 0.0 {
                    rows.push(Verdict::check("c0-oracle", c, 0.0, t.strict_floor, "c₀ against 0"));
                } else {
                    rows.push(rel_check("c0-oracle", c, e, t.relative, "c₀ against expected"));
                }
            }
            if let (Some(c), Some(c0)) = (m.c_hamiltonian, m.c_strict) {
                rows.push(Verdict::check("strict-le-plain", c0, c, t.absolute, "c₀ ≤ c"));
                if m.expected_c_strict.map(|e| e > 0.0).unwrap_or(false) {
                    rows.push(Verdict::check("strict-gap", (c - c0).abs(), 0.0, t.strict_floor, "|c − c₀|"));
                }
            }
            match (m.l2_norm, c0, m.non_coexact_fraction, rec.geometry.as_ref()) {
                (Some(l2), Some(c0), Some(frac), Some(GeometryResult { volume: Some(vol), .. })) => {
                    if frac > t.coexact {
                        rows.push(Verdict::inconclusive(
                            "norm-comp",
                            format!("ω is not coexact (non-coexact fraction {frac:.3e}); the bound does not apply"),
                        ));
                    } else {
                        let right = vol.sqrt() * (2.0 * c0.max(0.0)).sqrt();
                        rows.push(Verdict::check("norm-comp", l2, right, t.absolute, "‖ω‖₂ ≤ √vol·√(2c₀)"));
                    }
                }
                _ => rows.push(Verdict::inconclusive("norm-comp", "needs ‖ω‖₂, c₀ and a compact meshed geometry")),
            }
            match (s0, m.best_null_ratio) {
                (Some(s0), Some(r)) => rows.push(
                    Verdict::check(
                        "null-loop-id",
                        s0,
                        r,
                        (t.relative * s0).max(t.absolute),
                        "√(2c₀) ≤ sup over null loops of (1/ℓ)∫ω",
                    )
                    .sampling_limited("the sampled loops do not reach the supremum"),
                ),
                _ => rows.push(Verdict::inconclusive("null-loop-id", "needs c₀ and a null-homologous loop search")),
            }
            match (m.c_hamiltonian, m.c_lagrangian) {
                (Some(h), Some(l)) => {
                    let scale = h.abs().max(l.abs());
                    rows.push(Verdict::check("cipp", (h - l).abs(), 0.0, t.relative * scale, "|c(H) − c(L)|"));
                }
                _ => rows.push(Verdict::inconclusive("cipp", "needs both the Hamiltonian and the Lagrangian value")),
            }
            if let (Some(h), Some(l)) = (m.c_strict, m.c_lagrangian_null) {
                let tol = (t.relative * h.abs().max(l.abs())).max(t.strict_floor);
                rows.push(Verdict::check("cipp-strict", (h - l).abs(), 0.0, tol, "|c₀(H) − c₀(L)|"));
            }
            if m.cover.len() >= 2 {
                let rise = m.cover.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
                rows.push(Verdict::check("cover-tower", rise, 0.0, t.cover, "largest increase of c along the covers"));
            }
        }
    }

    let b1 = rec.geometry.as_ref().map(|g| g.b1);
    match (&rec.flow, s0) {
        (Some(f), Some(s0)) if !f.comass.is_empty() => {
            if b1 != Some(0) {
                rows.push(Verdict::inconclusive(
                    "mane-crit-speed",
                    format!("requires trivial first Betti number (b₁ = {b1:?})"),
                ));
            } else {
                for r in &f.comass {
                    rows.push(Verdict::check(
                        format!("mane-crit-speed s={:.6}", r.speed),
                        r.value,
                        s0,
                        t.relative * s0,
                        "m_s ≤ √(2c₀)",
                    ));
                    if r.multiple == Some(1.0) {
                        rows.push(
                            Verdict::check("mane-crit-speed-equality", s0, r.value, t.relative * s0, "m_{s₀} ≥ √(2c₀)")
                                .sampling_limited("sampled orbits do not attain the supremum"),
                        );
                    }
                }
            }
        }
        (Some(f), None) if !f.comass.is_empty() => {
            rows.push(Verdict::inconclusive("mane-crit-speed", "no c₀ in the record"))
        }
        _ => rows.push(Verdict::inconclusive("mane-crit-speed", "no comass table in the record")),
    }
    if let Some(f) = &rec.flow {
        for d in &f.drift {
            let per100 = d.max_relative_drift * 100.0 / d.horizon.max(100.0);
            rows.push(Verdict::check(
                format!("speed-drift s={:.6}", d.speed),
                per100,
                0.0,
                t.drift_per_100,
                "relative speed drift per 100 time units",
            ));
        }
        for c in &f.cyclotron {
            rows.push(Verdict::check(
                format!("cyclotron-radius s={:.6}", c.speed),
                c.max_deviation,
                0.0,
                t.radius,
                "| |x − center| − s/B |",
            ));
        }
        if let Some(p) = &f.periodic {
            match &p.orbit {
                Some(o) => rows.push(Verdict::check(
                    "periodic-orbit",
                    o.closure_defect,
                    0.0,
                    t.absolute.max(1e-6),
                    format!("closed orbit of period {:.6}", o.period),
                )),
                None => {
                    rows.push(Verdict::inconclusive("periodic-orbit", "shooting found no closed orbit from the seeds"))
                }
            }
        }
    }

    if let Some(s) = &rec.shadow {
        for o in &s.orbits {
            let k = o.field / o.speed;
            let tag = format!("s={:.6}", o.speed);
            rows.push(Verdict::check(
                format!("orbit-curvature {tag}"),
                (o.kappa_max - k).abs().max((o.kappa_min - k).abs()),
                0.0,
                t.curvature,
                "geodesic curvature against B/s",
            ));
            rows.push(Verdict::check(
                format!("hypercycle-distance {tag}"),
                (o.distance - k.atanh()).abs(),
                0.0,
                t.shadow,
                "shadow distance against arctanh(B/s)",
            ));
            rows.push(Verdict::check(
                format!("quasigeodesic-stretch {tag}"),
                (o.stretch - k.atanh().cosh()).abs(),
                0.0,
                t.shadow,
                "stretch against cosh(arctanh κ)",
            ));
        }
        if let Some(b) = &s.bump {
            let excess =
                b.rows.iter().map(|r| r.measured - r.bound - r.quadrature_error).fold(f64::NEG_INFINITY, f64::max);
            rows.push(Verdict::check(
                "average-diff-bound",
                excess,
                0.0,
                t.absolute,
                format!("max of measured − (A+D)κ over {} pairs, {} violations", b.pairs, b.violations),
            ));
        }
    }

    if let Some(iso) = &rec.iso {
        for (i, l) in iso.loops.iter().enumerate() {
            match &l.check {
                Some(c) => {
                    rows.push(Verdict::check(
                        format!("cheeger-chain[{i}]"),
                        c.lhs,
                        c.rhs,
                        t.stokes * (1.0 + c.rhs),
                        "(1/ℓ)|∫ω| ≤ D·mass/ℓ",
                    ));
                    rows.push(Verdict::check(
                        format!("lp-gap[{i}]"),
                        c.duality_gap,
                        0.0,
                        t.lp_gap * c.mass,
                        "duality gap ≤ tol·mass",
                    ));
                    rows.push(Verdict::check(
                        format!("stokes[{i}]"),
                        c.stokes_defect,
                        0.0,
                        t.stokes,
                        "⟨ω, ∂c⟩ = ⟨dω, c⟩",
                    ));
                }
                None => rows.push(Verdict::inconclusive(
                    format!("cheeger-chain[{i}]"),
                    l.error.clone().unwrap_or_else(|| "loop was not evaluated".into()),
                )),
            }
        }
    }
    rows
}

/// Verdict table as aligned text.
pub fn format_table(rec: &RunRecord, rows: &[Verdict]) -> String {
    let num = |v: Option<f64>| v.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
    let mut s = String::new();
    for r in rows {
        s.push_str(&format!(
            "{:<14} {:<34} {:<12} left={:<14} right={:<14} tol={:<10.3e} slack={:<14} {}\n",
            rec.scenario,
            r.claim,
            r.status.to_string(),
            num(r.left),
            num(r.right),
            r.tol,
            num(r.slack),
            r.note
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus_record(eps: f64) -> RunRecord {
        let tau = 2.0 * PI;
        RunRecord {
            scenario: "t".into(),
            version: "0".into(),
            seed: 0,
            analyses: vec![Analysis::Mane, Analysis::Verify],
            tolerances: Tolerances::default(),
            geometry: Some(GeometryResult {
                space: ModelSpace::FlatTorus { periods: vec![tau, tau] },
                volume: Some(tau * tau),
                b1: 2,
                mesh: None,
            }),
            spectrum: None,
            mane: Some(ManeResult {
                c_hamiltonian: Some(eps * eps / 2.0),
                c_strict: Some(eps * eps / 2.0),
                l2_norm: Some(eps * PI * 2f64.sqrt()),
                non_coexact_fraction: Some(0.0),
                ..Default::default()
            }),
            flow: None,
            shadow: None,
            iso: None,
            verify: None,
            errors: BTreeMap::new(),
        }
    }

    fn row<'a>(rows: &'a [Verdict], claim: &str) -> &'a Verdict {
        rows.iter().find(|r| r.claim == claim).unwrap_or_else(|| panic!("no row {claim}"))
    }

    #[test]
    fn norm_comp_with_analytic_sides() {
        let eps = 0.5;
        let rows = verify(&torus_record(eps));
        let r = row(&rows, "norm-comp");
        assert_eq!(r.status, Status::Pass);
        assert!((r.left.unwrap() - eps * PI * 2f64.sqrt()).abs() < 1e-12);
        assert!((r.right.unwrap() - 2.0 * PI * eps).abs() < 1e-12);
        assert!(r.slack.unwrap() > 0.0);
    }

    #[test]
    fn missing_flow_and_betti_number_give_inconclusive() {
        let rows = verify(&torus_record(0.5));
        assert_eq!(row(&rows, "mane-crit-speed").status, Status::Inconclusive);
        assert_eq!(row(&rows, "cipp").status, Status::Inconclusive);
        let mut rec = torus_record(0.5);
        rec.flow = Some(FlowResult {
            comass: vec![ComassRow {
                speed: 0.5,
                multiple: Some(1.0),
                value: 0.5,
                median: 0.4,
                q90: 0.45,
                orbits: 4,
                exited: 0,
            }],
            ..Default::default()
        });
        let rows = verify(&rec);
        assert!(row(&rows, "mane-crit-speed").note.contains("Betti"));
    }

    #[test]
    fn non_coexact_forms_are_not_judged() {
        let mut rec = torus_record(0.5);
        rec.mane.as_mut().unwrap().non_coexact_fraction = Some(1.0);
        assert_eq!(row(&verify(&rec), "norm-comp").status, Status::Inconclusive);
    }

    #[test]
    fn cipp_fails_outside_tolerance() {
        let mut rec = torus_record(0.5);
        rec.mane.as_mut().unwrap().c_lagrangian = Some(0.125 * 1.2);
        let r = verify(&rec);
        assert_eq!(row(&r, "cipp").status, Status::Fail);
        assert!(row(&r, "cipp").slack.unwrap() < 0.0);
    }

    #[test]
    fn records_round_trip_through_jsonl() {
        let mut rec = torus_record(0.25);
        rec.verify = Some(verify(&rec));
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&rec), &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec.clone()]);
        assert_eq!(verify(&back[0]), rec.verify.unwrap());
    }
}
