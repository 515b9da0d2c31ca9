//! Run configuration: TOML files with `include` support.
//!
//! ```toml
//! include = ["common.toml"]
//! seed = 7
//!
//! [[scenario]]
//! id = "torus-sin"
//! analyses = ["spectrum", "mane", "verify"]
//! geometry = { generator = "flat_torus", cells = [32, 32] }
//! form = { form = "sin_dy", eps = 0.5 }
//! ```
//!
//! Included files are loaded first; their scenarios precede the including
//! file's, and top-level keys of the including file win.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::forms::AnalyticForm;
use crate::geometry::ModelSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Spectrum,
    Mane,
    Flow,
    Shadow,
    #[serde(alias = "isoperimetric")]
    Iso,
    Verify,
}

impl Analysis {
    pub const ALL: [Analysis; 6] =
        [Analysis::Spectrum, Analysis::Mane, Analysis::Flow, Analysis::Shadow, Analysis::Iso, Analysis::Verify];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Spectrum => "spectrum",
            Analysis::Mane => "mane",
            Analysis::Flow => "flow",
            Analysis::Shadow => "shadow",
            Analysis::Iso => "iso",
            Analysis::Verify => "verify",
        }
    }
}

impl std::str::FromStr for Analysis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s || (s == "isoperimetric" && *a == Analysis::Iso))
            .ok_or_else(|| Error::Unsupported(format!("unknown analysis `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Staggered triangulation in 2D (`cells = [nx, ny]`), BCC tetrahedra in
    /// 3D (`cells = [n, n, n]`, cubic only). Periods default to 2π.
    FlatTorus {
        cells: Vec<usize>,
        #[serde(default)]
        periods: Option<Vec<f64>>,
    },
    Icosphere {
        level: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    MeshFile {
        path: PathBuf,
        space: ModelSpace,
    },
    Hyperbolic {
        #[serde(default = "two")]
        dim: usize,
    },
    Euclidean {
        #[serde(default = "two")]
        dim: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}

impl GeometrySpec {
    pub fn has_mesh(&self) -> bool {
        matches!(self, GeometrySpec::FlatTorus { .. } | GeometrySpec::Icosphere { .. } | GeometrySpec::MeshFile { .. })
    }

    /// Top-simplex count of a generated mesh, when known before building.
    pub fn estimated_cells(&self) -> Option<usize> {
        match self {
            GeometrySpec::FlatTorus { cells, .. } => match cells.len() {
                2 => Some(2 * cells[0] * cells[1]),
                3 => Some(12 * cells[0].pow(3)),
                _ => None,
            },
            GeometrySpec::Icosphere { level, .. } => Some(20 * 4usize.saturating_pow(*level as u32)),
            _ => None,
        }
    }
}

/// Special forms that are not closed-form expressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivedForm {
    /// The `index`-th coexact Laplace eigenform from the spectrum analysis.
    Eigenform {
        #[serde(default)]
        index: usize,
    },
    CochainFile {
        path: PathBuf,
    },
    /// Unit-L² rotation form on the round unit sphere.
    NormalizedSphere,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FormSpec {
    Analytic(AnalyticForm),
    Derived(DerivedForm),
}

impl<'de> Deserialize<'de> for FormSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = toml::Value::deserialize(d)?;
        let tag =
            v.get("form").and_then(|t| t.as_str()).ok_or_else(|| D::Error::custom("form table needs a `form` key"))?;
        if matches!(tag, "eigenform" | "cochain_file" | "normalized_sphere") {
            DerivedForm::deserialize(v).map(FormSpec::Derived).map_err(D::Error::custom)
        } else {
            AnalyticForm::deserialize(v).map(FormSpec::Analytic).map_err(D::Error::custom)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative agreement for critical values, comass and the null-loop ratio.
    pub relative: f64,
    /// Additive slack for inequalities between computed quantities.
    pub absolute: f64,
    /// Relative error for λ* against an expected value.
    pub spectral: f64,
    /// Relative error for curl eigenvalues and the curl–Laplace pairing.
    pub curl: f64,
    /// Absolute floor for c₀ when its expected value is 0.
    pub strict_floor: f64,
    pub drift_per_100: f64,
    pub radius: f64,
    pub curvature: f64,
    pub shadow: f64,
    pub lp_gap: f64,
    pub stokes: f64,
    pub cover: f64,
    /// Relative size of the exact and harmonic parts below which ω counts as
    /// coexact. Not affected by the tolerance scale.
    pub coexact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relative: 0.05,
            absolute: 1e-6,
            spectral: 0.02,
            curl: 0.03,
            strict_floor: 1e-3,
            drift_per_100: 1e-8,
            radius: 1e-6,
            curvature: 1e-4,
            shadow: 1e-3,
            lp_gap: 1e-6,
            stokes: 1e-12,
            cover: 1e-3,
            coexact: 1e-2,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, k: f64) -> Tolerances {
        Tolerances {
            relative: self.relative * k,
            absolute: self.absolute * k,
            spectral: self.spectral * k,
            curl: self.curl * k,
            strict_floor: self.strict_floor * k,
            drift_per_100: self.drift_per_100 * k,
            radius: self.radius * k,
            curvature: self.curvature * k,
            shadow: self.shadow * k,
            lp_gap: self.lp_gap * k,
            stokes: self.stokes * k,
            cover: self.cover * k,
            coexact: self.coexact,
        }
    }

    fn all_positive(&self) -> bool {
        [
            self.relative,
            self.absolute,
            self.spectral,
            self.curl,
            self.strict_floor,
            self.drift_per_100,
            self.radius,
            self.curvature,
            self.shadow,
            self.lp_gap,
            self.stokes,
            self.cover,
            self.coexact,
        ]
        .iter()
        .all(|t| *t > 0.0 && t.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSpec {
    pub count: usize,
    pub curl_count: usize,
    pub solver_tol: f64,
    pub expected_lambda: Option<f64>,
    pub expected_curl: Option<f64>,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec { count: 5, curl_count: 0, solver_tol: 1e-8, expected_lambda: None, expected_curl: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManeSpec {
    pub hamiltonian: bool,
    pub strict: bool,
    pub lagrangian: bool,
    pub lagrangian_null: bool,
    pub nodes: usize,
    pub starts_per_class: usize,
    pub max_winding: i64,
    pub cover_orders: Vec<usize>,
    pub cells_per_period: usize,
    pub cell_budget: usize,
    pub expected_c: Option<f64>,
    pub expected_c_strict: Option<f64>,
}

impl Default for ManeSpec {
    fn default() -> Self {
        ManeSpec {
            hamiltonian: true,
            strict: true,
            lagrangian: false,
            lagrangian_null: false,
            nodes: 64,
            starts_per_class: 16,
            max_winding: 1,
            cover_orders: Vec::new(),
            cells_per_period: 16,
            cell_budget: 200_000,
            expected_c: None,
            expected_c_strict: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicSpec {
    /// Absolute speed, or a multiple of s₀ when `relative`.
    pub speed: f64,
    pub relative: bool,
    pub seeds: usize,
}

impl Default for PeriodicSpec {
    fn default() -> Self {
        PeriodicSpec { speed: 0.5, relative: true, seeds: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    /// Absolute speeds for the comass table.
    pub speeds: Vec<f64>,
    /// Speeds as multiples of s₀ = √(2c₀); needs the mane analysis.
    pub speed_multiples: Vec<f64>,
    pub orbits: usize,
    pub horizon: f64,
    pub step: f64,
    /// Speeds of single orbits checked against the cyclotron radius s/B.
    pub cyclotron_speeds: Vec<f64>,
    pub periodic: Option<PeriodicSpec>,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            speeds: Vec::new(),
            speed_multiples: Vec::new(),
            orbits: 64,
            horizon: 100.0,
            step: 1e-2,
            cyclotron_speeds: Vec::new(),
            periodic: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowSpec {
    /// Speeds of constant-field orbits through i with horizontal velocity.
    pub speeds: Vec<f64>,
    /// Half arc length of each orbit.
    pub half_length: f64,
    pub bump_pairs: usize,
    pub bump_half_length: f64,
    pub dt: f64,
}

impl Default for ShadowSpec {
    fn default() -> Self {
        ShadowSpec { speeds: Vec::new(), half_length: 40.0, bump_pairs: 0, bump_half_length: 45.0, dt: 0.01 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsoSpec {
    /// Closed polygons given by corner points; each becomes an edge loop.
    pub loops: Vec<Vec<Vec<f64>>>,
    /// Midpoint subdivisions applied to the mesh and the loops.
    pub refine: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub form: Option<FormSpec>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Thread budget of this scenario; the run-wide budget when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Upper limit on top simplices of any mesh built for the scenario.
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub mane: ManeSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub shadow: ShadowSpec,
    #[serde(default)]
    pub iso: IsoSpec,
}

fn default_max_cells() -> usize {
    4_000_000
}

impl Scenario {
    pub fn new(id: &str) -> Self {
        Scenario {
            id: id.to_string(),
            geometry: None,
            form: None,
            analyses: Vec::new(),
            tolerances: Tolerances::default(),
            seed: None,
            threads: None,
            max_cells: default_max_cells(),
            spectrum: SpectrumSpec::default(),
            mane: ManeSpec::default(),
            flow: FlowSpec::default(),
            shadow: ShadowSpec::default(),
            iso: IsoSpec::default(),
        }
    }

    pub fn requests(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Analyses that `a` needs from the same scenario.
    pub fn prerequisites(&self, a: Analysis) -> Vec<Analysis> {
        let mut out = Vec::new();
        let eigenform = matches!(self.form, Some(FormSpec::Derived(DerivedForm::Eigenform { .. })));
        if eigenform && matches!(a, Analysis::Mane | Analysis::Flow | Analysis::Iso) {
            out.push(Analysis::Spectrum);
        }
        if a == Analysis::Flow
            && (!self.flow.speed_multiples.is_empty()
                || self.flow.periodic.as_ref().map(|p| p.relative).unwrap_or(false))
        {
            out.push(Analysis::Mane);
        }
        out
    }

    /// Checks that every requested analysis has its inputs.
    pub fn check_dependencies(&self) -> Result<()> {
        let missing = |analysis: Analysis, what: &str| Error::MissingDependency {
            scenario: self.id.clone(),
            analysis: analysis.name().to_string(),
            missing: what.to_string(),
        };
        for &a in &self.analyses {
            let needs_geometry = a != Analysis::Verify;
            if needs_geometry && self.geometry.is_none() {
                return Err(missing(a, "geometry"));
            }
            let needs_form = matches!(a, Analysis::Mane | Analysis::Flow | Analysis::Iso)
                || (a == Analysis::Shadow && !self.shadow.speeds.is_empty());
            if needs_form && self.form.is_none() {
                return Err(missing(a, "form"));
            }
            for p in self.prerequisites(a) {
                if !self.requests(p) {
                    return Err(missing(a, p.name()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    include: Vec<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
    tol_scale: Option<f64>,
    #[serde(default)]
    scenario: Vec<toml::Spanned<Scenario>>,
}

/// A fully loaded configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub seed: u64,
    pub threads: usize,
    pub tol_scale: f64,
    pub scenarios: Vec<Scenario>,
}

impl Default for Config {
    fn default() -> Self {
        Config { seed: 0, threads: 1, tol_scale: 1.0, scenarios: Vec::new() }
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

fn config_error(path: &Path, text: &str, span: Option<std::ops::Range<usize>>, message: &str) -> Error {
    let (line, column) = span.map(|s| line_col(text, s.start)).unwrap_or((0, 0));
    Error::Config { line, column, message: format!("{}: {}", path.display(), message.trim()) }
}

struct Loaded {
    seed: Option<u64>,
    threads: Option<usize>,
    tol_scale: Option<f64>,
    scenarios: Vec<(Scenario, PathBuf, usize, usize)>,
}

fn load_file(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Loaded> {
    let canonical = path.canonicalize().map_err(|e| Error::Config {
        line: 0,
        column: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    if stack.contains(&canonical) {
        return Err(Error::Config { line: 0, column: 0, message: format!("{}: include cycle", path.display()) });
    }
    let text = std::fs::read_to_string(&canonical)?;
    let base = canonical.parent().map(Path::to_path_buf).unwrap_or_default();
    stack.push(canonical);
    let out = parse_file(&text, path, &base, stack);
    stack.pop();
    out
}

fn parse_file(text: &str, path: &Path, base: &Path, stack: &mut Vec<PathBuf>) -> Result<Loaded> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| config_error(path, text, e.span(), e.message()))?;
    let mut loaded = Loaded { seed: None, threads: None, tol_scale: None, scenarios: Vec::new() };
    for inc in &file.include {
        let sub = load_file(&base.join(inc), stack)?;
        loaded.seed = sub.seed.or(loaded.seed);
        loaded.threads = sub.threads.or(loaded.threads);
        loaded.tol_scale = sub.tol_scale.or(loaded.tol_scale);
        loaded.scenarios.extend(sub.scenarios);
    }
    loaded.seed = file.seed.or(loaded.seed);
    loaded.threads = file.threads.or(loaded.threads);
    loaded.tol_scale = file.tol_scale.or(loaded.tol_scale);
    for sp in file.scenario {
        let (line, column) = line_col(text, sp.span().start);
        let mut sc = sp.into_inner();
        resolve_paths(&mut sc, base);
        loaded.scenarios.push((sc, path.to_path_buf(), line, column));
    }
    Ok(loaded)
}

fn resolve_paths(sc: &mut Scenario, base: &Path) {
    if let Some(GeometrySpec::MeshFile { path, .. }) = &mut sc.geometry {
        *path = base.join(&*path);
    }
    if let Some(FormSpec::Derived(DerivedForm::CochainFile { path })) = &mut sc.form {
        *path = base.join(&*path);
    }
}

fn validate(loaded: Loaded) -> Result<Config> {
    let mut ids = HashSet::new();
    let mut scenarios = Vec::new();
    for (sc, path, line, column) in loaded.scenarios {
        let fail = |m: String| Error::Config {
            line,
            column,
            message: format!("{}: scenario `{}`: {m}", path.display(), sc.id),
        };
        if !ids.insert(sc.id.clone()) {
            return Err(fail("duplicate id".into()));
        }
        if !sc.tolerances.all_positive() {
            return Err(fail("tolerances must be positive".into()));
        }
        let mut files = Vec::new();
        if let Some(GeometrySpec::MeshFile { path, .. }) = &sc.geometry {
            files.push(path.clone());
        }
        if let Some(FormSpec::Derived(DerivedForm::CochainFile { path })) = &sc.form {
            files.push(path.clone());
        }
        if let Some(f) = files.iter().find(|f| !f.exists()) {
            return Err(fail(format!("file {} does not exist", f.display())));
        }
        if sc.threads == Some(0) {
            return Err(fail("threads must be at least 1".into()));
        }
        let dup: BTreeSet<_> = sc.analyses.iter().collect();
        if dup.len() != sc.analyses.len() {
            return Err(fail("an analysis is listed twice".into()));
        }
        sc.check_dependencies()?;
        scenarios.push(sc);
    }
    let tol_scale = loaded.tol_scale.unwrap_or(1.0);
    if !(tol_scale > 0.0 && tol_scale.is_finite()) {
        return Err(Error::Config { line: 0, column: 0, message: "tol_scale must be positive".into() });
    }
    Ok(Config { seed: loaded.seed.unwrap_or(0), threads: loaded.threads.unwrap_or(1).max(1), tol_scale, scenarios })
}

/// Loads a configuration file and everything it includes.
pub fn load_config(path: &Path) -> Result<Config> {
    validate(load_file(path, &mut Vec::new())?)
}

/// Parses configuration text; includes resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Config> {
    let label = base.join("<inline>");
    validate(parse_file(text, &label, base, &mut Vec::new())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_error_reports_line_and_column() {
        let text = "seed = 3\n[[scenario]]\nid = \"a\"\nanalyses = [\"spectrum\"\n";
        match parse_config(text, Path::new(".")) {
            Err(Error::Config { line, column, .. }) => {
                assert_eq!((line, column), (4, 23));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_points_at_it() {
        let text = "[[scenario]]\nid = \"a\"\nbogus = 1\n";
        match parse_config(text, Path::new(".")) {
            Err(Error::Config { line, message, .. }) => {
                assert!((1..=3).contains(&line), "{line}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forms_of_both_kinds_parse() {
        let text = r#"
[[scenario]]
id = "a"
geometry = { generator = "flat_torus", cells = [8, 8] }
form = { form = "sin_dy", eps = 0.5 }
[[scenario]]
id = "b"
analyses = ["spectrum", "mane"]
geometry = { generator = "icosphere", level = 1 }
form = { form = "eigenform", index = 2 }
"#;
        let c = parse_config(text, Path::new(".")).unwrap();
        assert_eq!(c.scenarios[0].form, Some(FormSpec::Analytic(AnalyticForm::SinDy { eps: 0.5 })));
        assert_eq!(c.scenarios[1].form, Some(FormSpec::Derived(DerivedForm::Eigenform { index: 2 })));
    }

    #[test]
    fn mane_without_geometry_is_a_dependency_error() {
        let text = "[[scenario]]\nid = \"a\"\nanalyses = [\"mane\"]\nform = { form = \"zero\" }\n";
        match parse_config(text, Path::new(".")) {
            Err(Error::MissingDependency { analysis, missing, .. }) => {
                assert_eq!((analysis.as_str(), missing.as_str()), ("mane", "geometry"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_bad_tolerances_are_rejected() {
        let dup = "[[scenario]]\nid = \"a\"\n[[scenario]]\nid = \"a\"\n";
        assert!(matches!(parse_config(dup, Path::new(".")), Err(Error::Config { line: 3, .. })));
        let neg = "[[scenario]]\nid = \"a\"\n[scenario.tolerances]\nrelative = -1.0\n";
        assert!(matches!(parse_config(neg, Path::new(".")), Err(Error::Config { .. })));
    }

    #[test]
    fn includes_merge_in_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.toml"), "seed = 5\nthreads = 2\n[[scenario]]\nid = \"first\"\n").unwrap();
        std::fs::write(
            dir.path().join("main.toml"),
            "include = [\"base.toml\"]\nthreads = 1\n[[scenario]]\nid = \"second\"\n",
        )
        .unwrap();
        let c = load_config(&dir.path().join("main.toml")).unwrap();
        assert_eq!((c.seed, c.threads), (5, 1));
        let ids: Vec<_> = c.scenarios.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["first", "second"]);
    }

    #[test]
    fn include_cycles_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.toml"), "include = [\"b.toml\"]\n").unwrap();
        std::fs::write(dir.path().join("b.toml"), "include = [\"a.toml\"]\n").unwrap();
        assert!(matches!(load_config(&dir.path().join("a.toml")), Err(Error::Config { .. })));
    }

    #[test]
    fn empty_config_has_no_scenarios() {
        assert!(parse_config("", Path::new(".")).unwrap().scenarios.is_empty());
    }
}
