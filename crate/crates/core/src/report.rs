//! The batch pipeline behind the CLI: holonomy, momentum table, harness and
//! normal form for one config, assembled into a JSON report with explicit
//! pass/fail checks.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::config::{HarnessTarget, ModelSpec, RunConfig, SampledMapSpec, Task};
use crate::cylinder::{ClosedSubgroup, Cylinder, CylinderPoint, SubgroupSpec};
use crate::error::{Error, Result};
use crate::harness::{
    bucket_values, build_fiber_quotient, check_local_conditions, fiber_connectivity_report, local_isometry_defect,
    subsample, verify_convexity, verify_weak_convexity, witness_geodesics, LocalOptions, PassCounts,
    PointConditions, SampledMap, DEFAULT_MAX_ENDPOINTS, DEFAULT_WEAK_BOX,
};
use crate::holonomy::{holonomy_generators, holonomy_group, MomentumMap};
use crate::mesh::{action_angle_mesh, torus_mesh, Mesh};
use crate::metric::{ConvexityReport, Polyline};
use crate::model::SymplecticModel;
use crate::normal_form::{check_local_properties, consistency_check, SliceChart, TorusRepresentation};

/// JSON schema every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NON_CLOSED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Points of the chart mesh used by the normal-form consistency check.
const CONSISTENCY_BUDGET: f64 = 20_000.0;
const CHART_HALF_WIDTH: f64 = 0.5;
const LOCAL_PROPERTIES_RESOLUTION: usize = 8;
const WITNESS_GEODESICS: usize = 8;
const MAX_LISTED: usize = 20;

fn ser_ext<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub dim: usize,
    pub algebra_dim: usize,
    pub omega: Vec<Vec<f64>>,
    pub periods: Vec<Option<f64>>,
    pub generators: Vec<Vec<f64>>,
    pub linear: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomySection {
    /// Transports along the loop basis.
    pub generators: Vec<Vec<f64>>,
    pub subspace_basis: Vec<Vec<f64>>,
    pub lattice_basis: Vec<Vec<f64>>,
    pub cylinder_type: (usize, usize),
    #[serde(serialize_with = "ser_ext")]
    pub injectivity_radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumRow {
    pub point: Vec<f64>,
    pub value: CylinderPoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleEntry {
    pub generator: usize,
    pub value: Option<CylinderPoint>,
    #[serde(serialize_with = "ser_ext")]
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumSection {
    pub basepoint: Vec<f64>,
    pub base_value: Vec<f64>,
    pub samples: Vec<MomentumRow>,
    pub path_pairs: usize,
    pub path_classes: usize,
    pub path_max_discrepancy: f64,
    pub cocycle: Vec<CocycleEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexitySummary {
    pub is_convex: bool,
    pub pairs_checked: usize,
    pub max_gap: f64,
    pub witness_pair: Option<(CylinderPoint, CylinderPoint)>,
}

impl From<&ConvexityReport<CylinderPoint>> for ConvexitySummary {
    fn from(r: &ConvexityReport<CylinderPoint>) -> Self {
        Self {
            is_convex: r.is_convex,
            pairs_checked: r.pairs_checked,
            max_gap: r.max_gap,
            witness_pair: r.witness_pair.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalSummary {
    pub radius_hops: usize,
    pub coverage_threshold: f64,
    pub all_points: PassCounts,
    pub interior: PassCounts,
    pub interior_fraction: f64,
    /// Failing interior points more than one hop away from the mesh boundary.
    pub failures_away_from_boundary: usize,
    pub failures: Vec<PointConditions>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessSection {
    pub source: String,
    pub target: SubgroupSpec,
    pub points: usize,
    pub edges: usize,
    pub boundary_points: usize,
    pub eps_fiber: f64,
    pub fiber_buckets: usize,
    pub components: usize,
    pub cut_edges: usize,
    pub quotient_warnings: Vec<String>,
    pub fiber_histogram: BTreeMap<usize, usize>,
    pub all_fibers_connected: bool,
    pub flagged_buckets: Vec<usize>,
    pub local: LocalSummary,
    pub convexity_tolerance: f64,
    pub weak_convexity: ConvexitySummary,
    pub convexity: ConvexitySummary,
    pub isometry_pairs: usize,
    #[serde(serialize_with = "ser_ext")]
    pub isometry_max_defect: f64,
    pub isometry_worst_pair: Option<(usize, usize)>,
    pub isometry_tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalFormSection {
    pub point: Vec<f64>,
    /// `(dim g_m, dim m, dim q)`.
    pub dims: (usize, usize, usize),
    pub slice_dim: usize,
    pub chu_q: Vec<Vec<f64>>,
    pub constant: Vec<f64>,
    pub max_residual: f64,
    pub samples: usize,
    pub local_properties: bool,
    pub factors: Vec<(String, bool)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "ser_ext")]
    pub value: f64,
    pub tolerance: Option<f64>,
    pub detail: String,
    /// Present on every failed check.
    pub witness: Option<Value>,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, tolerance: Option<f64>, detail: String, witness: impl FnOnce() -> Value) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            tolerance,
            detail,
            witness: if passed { None } else { Some(witness()) },
        }
    }
}

/// A polyline for plotting, in target coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ExportPolyline {
    pub kind: String,
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub name: String,
    pub config: RunConfig,
    pub model: ModelSummary,
    pub holonomy: Option<HolonomySection>,
    pub momentum: Option<MomentumSection>,
    pub harness: Option<HarnessSection>,
    pub normal_form: Option<NormalFormSection>,
    pub assumed_hypotheses: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Wall-clock milliseconds per stage; excluded from determinism.
    pub timing_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    pub polylines: Vec<ExportPolyline>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    /// Compact machine-readable pass/fail record.
    pub fn summary(&self) -> Value {
        serde_json::json!({
            "name": self.name,
            "passed": self.passed,
            "exit_code": self.exit_code(),
            "checks": self.checks.iter().map(|c| serde_json::json!({"name": c.name, "passed": c.passed})).collect::<Vec<_>>(),
        })
    }

    /// Writes the report, polylines and summary under `dir` using the names
    /// from the config; returns the report path.
    pub fn write_outputs(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let out = &self.config.output;
        let report_path = dir.join(&out.report);
        write_file(&report_path, self.to_json()?.as_bytes())?;
        export_polylines(&self.polylines, &dir.join(&out.polylines))?;
        write_file(&dir.join(&out.summary), to_json_string(&self.summary())?.as_bytes())?;
        Ok(report_path)
    }
}

/// Exit code for a pipeline error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NonClosedHolonomy(_) => EXIT_NON_CLOSED,
        _ => EXIT_CONFIG,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with every float written at 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Pretty printer with `{:.16e}` floats.
#[derive(Default)]
pub struct PreciseFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

/// CSV with columns `polyline_id,kind,point_index,x0,…`; one row per point.
/// An empty list yields the header alone.
pub fn export_polylines(polylines: &[ExportPolyline], path: &Path) -> Result<()> {
    let dim = polylines.iter().flat_map(|p| p.points.iter().map(Vec::len)).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let mut header = vec!["polyline_id".to_string(), "kind".into(), "point_index".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (id, poly) in polylines.iter().enumerate() {
        for (k, p) in poly.points.iter().enumerate() {
            let mut rec = vec![id.to_string(), poly.kind.clone(), k.to_string()];
            rec.extend((0..dim).map(|i| p.get(i).map_or(String::new(), |x| format!("{x:.16e}"))));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn model_summary(model: &SymplecticModel) -> ModelSummary {
    ModelSummary {
        dim: model.dim(),
        algebra_dim: model.algebra_dim(),
        omega: rows(model.omega()),
        periods: model.periods().to_vec(),
        generators: rows(model.generators()),
        linear: !model.has_constant_generators(),
    }
}

fn random_point(model: &SymplecticModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        model.dim(),
        model.periods().iter().map(|p| match p {
            Some(p) => rng.random_range(0.0..*p),
            None => rng.random_range(-1.0..1.0),
        }),
    )
}

fn segment(a: &DVector<f64>, b: &DVector<f64>, pieces: usize) -> Vec<DVector<f64>> {
    (0..=pieces).map(|s| a + (b - a) * (s as f64 / pieces as f64)).collect()
}

/// Paths from the basepoint to `x` in distinct homotopy classes (when the
/// model has periods): straight, detour through `via`, and one loop around
/// each periodic coordinate first.
pub fn homotopy_paths(k: &MomentumMap, x: &DVector<f64>, via: &DVector<f64>) -> Result<Vec<Polyline<DVector<f64>>>> {
    let base = k.basepoint().clone();
    let mut out = vec![Polyline::new(segment(&base, x, 4))?];
    let mut detour = segment(&base, via, 4);
    detour.extend(segment(via, x, 4).into_iter().skip(1));
    out.push(Polyline::new(detour)?);
    for (i, p) in k.model().periods().iter().enumerate() {
        if let Some(p) = p {
            let mut shifted = base.clone();
            shifted[i] += p;
            let mut pts = segment(&base, &shifted, 8);
            pts.extend(segment(&shifted, x, 4).into_iter().skip(1));
            out.push(Polyline::new(pts)?);
        }
    }
    Ok(out)
}

/// Largest cylinder distance between `K(x)` and its value along each path of
/// [`homotopy_paths`], over `pairs` seeded random `(x, via)`.
pub fn path_independence(k: &MomentumMap, pairs: usize, seed: u64) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut classes = 0;
    for _ in 0..pairs {
        let x = random_point(k.model(), &mut rng);
        let via = random_point(k.model(), &mut rng);
        let direct = k.value(&x)?;
        let paths = homotopy_paths(k, &x, &via)?;
        classes = paths.len();
        for p in &paths {
            worst = worst.max(k.cylinder().distance(&direct, &k.value_along(p)?));
        }
    }
    Ok((classes, worst))
}

fn load_sampled_map(spec: &SampledMapSpec, base_dir: &Path) -> Result<SampledMap> {
    let path = base_dir.join(&spec.points_csv);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.clone();
    let xs: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.trim().starts_with('x')).map(|(i, _)| i).collect();
    let vs: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.trim().starts_with('v')).map(|(i, _)| i).collect();
    if xs.is_empty() || vs.is_empty() {
        return Err(Error::Config(format!(
            "{}: need columns named x… (domain) and v… (value)",
            path.display()
        )));
    }
    let parse = |rec: &csv::StringRecord, cols: &[usize], line: usize| -> Result<DVector<f64>> {
        let vals = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("{}: bad number in row {line}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    };
    let mut points = Vec::new();
    let mut lifted = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        points.push(parse(&rec, &xs, line + 1)?);
        lifted.push(parse(&rec, &vs, line + 1)?);
    }
    let target = match &spec.target {
        Some(s) => ClosedSubgroup::try_from(s.clone()).map_err(|e| Error::Config(format!("sampled_map.target: {e}")))?,
        None => ClosedSubgroup::trivial(vs.len()),
    };
    let cyl = Cylinder::new(target)?;
    let values = lifted.iter().map(|v| cyl.project(v)).collect::<Result<Vec<_>>>()?;
    let edges: Vec<(usize, usize)> = match (&spec.adjacency_csv, spec.adjacency_radius) {
        (Some(adj), _) => {
            let adj_path = base_dir.join(adj);
            let mut r = csv::Reader::from_path(&adj_path)
                .map_err(|e| Error::Config(format!("{}: {e}", adj_path.display())))?;
            r.deserialize::<(usize, usize)>().collect::<std::result::Result<_, _>>()?
        }
        (None, Some(radius)) => {
            let mut e = Vec::new();
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    if (&points[i] - &points[j]).norm() <= radius {
                        e.push((i, j));
                    }
                }
            }
            e
        }
        (None, None) => return Err(Error::Config("sampled_map needs an adjacency".into())),
    };
    SampledMap::new(points, &edges, values, cyl).map_err(|e| Error::Config(format!("sampled_map: {e}")))
}

/// The mesh the harness samples `K` on.
pub fn harness_mesh(spec: &ModelSpec, model: &SymplecticModel, cfg: &RunConfig) -> Result<Mesh> {
    match spec {
        ModelSpec::LinearRep { radius, .. } => {
            action_angle_mesh(model.dim() / 2, *radius, cfg.mesh.resolution, cfg.mesh.angles)
        }
        _ => torus_mesh(model, cfg.mesh.resolution, cfg.mesh.extent),
    }
}

/// `K` on the mesh, in the holonomy cylinder or reduced to `𝔤*/2πℤᵏ`.
pub fn momentum_sampled_map(k: &MomentumMap, mesh: &Mesh, target: HarnessTarget) -> Result<SampledMap> {
    let cyl = match target {
        HarnessTarget::Cylinder => k.cylinder().clone(),
        HarnessTarget::Torus => Cylinder::new(ClosedSubgroup::standard_torus(k.model().algebra_dim()))?,
    };
    let values = mesh
        .points
        .iter()
        .map(|x| cyl.project(&k.lift_value(x)))
        .collect::<Result<Vec<_>>>()?;
    SampledMap::new(mesh.points.clone(), &mesh.edges, values, cyl)?.with_boundary(mesh.boundary.clone())
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.0.insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

fn json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

/// Runs the configured tasks. Relative CSV paths resolve against `base_dir`.
pub fn run(cfg: &RunConfig, base_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let spec = cfg.model.resolve()?;
    let model = cfg.model.build()?;
    let name = cfg.name.clone().unwrap_or_else(|| match &cfg.model {
        ModelSpec::Builtin { name } => name.clone(),
        _ => "custom".to_string(),
    });
    log::info!("run {name}: dim {} algebra {}", model.dim(), model.algebra_dim());
    let mut timer = Timer(BTreeMap::new());
    let mut checks = Vec::new();
    let mut hypotheses = vec![
        "closedness of the sampled map: assumed (compact domain or user data)".to_string(),
        format!(
            "local openness onto the image: coverage proxy with threshold {} (declared, not derived)",
            cfg.tolerances.loi_coverage
        ),
        "normalization: K(basepoint) = base value (origin, 0)".to_string(),
    ];
    let mut polylines = Vec::new();

    let (gens, group) = timer.time("holonomy", || Ok((holonomy_generators(&model)?, holonomy_group(&model)?)))?;
    hypotheses.push("holonomy group closed: verified by rational lattice assembly".to_string());
    let holonomy = cfg.wants(Task::Holonomy).then(|| HolonomySection {
        generators: gens.iter().map(vec_of).collect(),
        subspace_basis: group.subspace_basis().iter().map(vec_of).collect(),
        lattice_basis: group.lattice_basis().iter().map(vec_of).collect(),
        cylinder_type: group.cylinder_type(),
        injectivity_radius: group.injectivity_radius().ok().and_then(|r| r.finite()).unwrap_or(f64::INFINITY),
    });
    let k = MomentumMap::with_basepoint(
        model.clone(),
        group,
        DVector::zeros(model.dim()),
        DVector::zeros(model.algebra_dim()),
    )?;

    let momentum = if cfg.wants(Task::Momentum) {
        Some(timer.time("momentum", || momentum_section(cfg, &k, &mut checks))?)
    } else {
        None
    };

    let harness = if cfg.wants(Task::Harness) {
        Some(timer.time("harness", || {
            harness_section(cfg, &spec, &k, base_dir, &mut checks, &mut polylines)
        })?)
    } else {
        None
    };

    let normal_form = if cfg.wants(Task::Normalform) {
        Some(timer.time("normal_form", || normal_form_section(cfg, &spec, &k, &mut checks))?)
    } else {
        None
    };

    let passed = checks.iter().all(|c| c.passed);
    for c in checks.iter().filter(|c| !c.passed) {
        log::warn!("check {} failed: {}", c.name, c.detail);
    }
    Ok(RunReport {
        schema_version: crate::config::SCHEMA_VERSION,
        name,
        config: cfg.clone(),
        model: model_summary(&model),
        holonomy,
        momentum,
        harness,
        normal_form,
        assumed_hypotheses: hypotheses,
        checks,
        passed,
        timing_ms: timer.0,
        polylines,
    })
}

fn momentum_section(cfg: &RunConfig, k: &MomentumMap, checks: &mut Vec<Check>) -> Result<MomentumSection> {
    let model = k.model();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = (0..cfg.momentum_rows)
        .map(|_| {
            let x = random_point(model, &mut rng);
            Ok(MomentumRow {
                value: k.value(&x)?,
                point: vec_of(&x),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (classes, worst) = path_independence(k, 100, cfg.seed.wrapping_add(1))?;
    let tol = cfg.tolerances.tol_path;
    checks.push(Check::new(
        "path_independence",
        worst <= tol,
        worst,
        Some(tol),
        format!("100 random endpoints, {classes} path classes each"),
        || serde_json::json!({"max_discrepancy": worst}),
    ));
    let mut cocycle = Vec::new();
    for i in 0..model.algebra_dim() {
        let mut e = DVector::zeros(model.algebra_dim());
        e[i] = 1.0;
        let entry = match k.nonequivariance_cocycle(&e, 16, tol) {
            Ok(v) => CocycleEntry {
                generator: i,
                value: Some(v),
                spread: 0.0,
            },
            Err(Error::CocycleNotConstant { spread }) => CocycleEntry {
                generator: i,
                value: None,
                spread,
            },
            Err(e) => return Err(e),
        };
        checks.push(Check::new(
            &format!("cocycle_constant[{i}]"),
            entry.value.is_some(),
            entry.spread,
            Some(tol),
            "K(Φ_g m) − K(m) over 16 sampled points".into(),
            || serde_json::json!({"spread": entry.spread}),
        ));
        cocycle.push(entry);
    }
    Ok(MomentumSection {
        basepoint: vec_of(k.basepoint()),
        base_value: vec_of(k.base_value()),
        samples,
        path_pairs: 100,
        path_classes: classes,
        path_max_discrepancy: worst,
        cocycle,
    })
}

fn harness_section(
    cfg: &RunConfig,
    spec: &ModelSpec,
    k: &MomentumMap,
    base_dir: &Path,
    checks: &mut Vec<Check>,
    polylines: &mut Vec<ExportPolyline>,
) -> Result<HarnessSection> {
    let tols = &cfg.tolerances;
    let (map, source, spacing) = match &cfg.sampled_map {
        Some(s) => {
            let map = load_sampled_map(s, base_dir)?;
            let spacing = map.max_image_edge();
            (map, format!("csv:{}", s.points_csv.display()), spacing)
        }
        None => {
            let mesh = harness_mesh(spec, k.model(), cfg)?;
            let map = momentum_sampled_map(k, &mesh, cfg.effective_harness_target())?;
            (map, "mesh".to_string(), mesh.spacing)
        }
    };
    let eps = tols.eps_fiber.unwrap_or_else(|| map.default_eps_fiber());
    let q = build_fiber_quotient(&map, eps, None)?;
    let opts = LocalOptions {
        radius_hops: tols.radius_hops,
        coverage_threshold: tols.loi_coverage,
        eps_gap: tols.eps_gap,
        ..LocalOptions::default()
    };
    log::debug!("quotient: {} components", q.component_count());
    let local = check_local_conditions(&map, &q, &opts)?;
    log::debug!("local conditions done");
    let boundary = map.boundary().to_vec();
    let near = map.near_boundary(1);
    let interior = local.counts_where(|i| !boundary[i]);
    let failures: Vec<PointConditions> = local.failures().cloned().collect();
    let away = failures.iter().filter(|p| !near[p.index]).count();
    let fraction = interior.fraction();
    checks.push(Check::new(
        "local_conditions",
        fraction >= tols.local_pass_fraction,
        fraction,
        Some(tols.local_pass_fraction),
        format!("{} of {} interior points pass LFC, LOI and LCD", interior.all, interior.checked),
        || json(&failures.first()),
    ));
    checks.push(Check::new(
        "local_failures_near_boundary",
        away == 0,
        away as f64,
        None,
        "failing points more than one hop from the mesh boundary".into(),
        || json(&failures.iter().find(|p| !near[p.index])),
    ));

    let tol_conv = tols.tol_convexity.unwrap_or_else(|| map.max_image_edge().max(1e-9));
    let weak = verify_weak_convexity(&map, &q, tol_conv, tols.eps_gap, DEFAULT_WEAK_BOX)?;
    log::debug!("weak convexity done");
    let shortest = verify_convexity(&map, &q, tol_conv, tols.eps_gap)?;
    log::debug!("convexity done");
    checks.push(Check::new(
        "weak_convexity",
        weak.is_convex,
        weak.max_gap,
        Some(tol_conv),
        format!("{} image pairs", weak.pairs_checked),
        || json(&weak.witness_pair),
    ));
    let hist = fiber_connectivity_report(&q);
    if map.target().is_uniquely_geodesic() {
        checks.push(Check::new(
            "connected_fibers",
            hist.all_connected,
            hist.flagged.len() as f64,
            None,
            "uniquely geodesic target: every fiber should be connected".into(),
            || serde_json::json!({"buckets": hist.flagged.iter().take(MAX_LISTED).collect::<Vec<_>>()}),
        ));
    }
    let iso = local_isometry_defect(&map, &q, &local);
    log::debug!("isometry done");
    let iso_tol = 2.0 * spacing;
    checks.push(Check::new(
        "local_isometry",
        iso.max_defect <= iso_tol,
        iso.max_defect,
        Some(iso_tol),
        format!("{} component pairs inside good charts", iso.pairs_checked),
        || json(&iso.worst_pair),
    ));

    let set = bucket_values(&map, &q);
    let endpoints = subsample(&set, DEFAULT_MAX_ENDPOINTS);
    polylines.push(ExportPolyline {
        kind: "image_samples".into(),
        points: set.iter().map(CylinderPoint::to_vec).collect(),
    });
    for g in witness_geodesics(map.target(), &endpoints, &weak, tols.eps_gap, 0.5 * tol_conv, DEFAULT_WEAK_BOX, WITNESS_GEODESICS) {
        polylines.push(ExportPolyline {
            kind: "geodesic".into(),
            points: g.points().iter().map(CylinderPoint::to_vec).collect(),
        });
    }

    Ok(HarnessSection {
        source,
        target: map.target().group().clone().into(),
        points: map.len(),
        edges: map.edge_count(),
        boundary_points: boundary.iter().filter(|&&b| b).count(),
        eps_fiber: eps,
        fiber_buckets: q.bucket_count,
        components: q.component_count(),
        cut_edges: q.cut_edges,
        quotient_warnings: q.warnings.iter().take(MAX_LISTED).cloned().collect(),
        fiber_histogram: hist.histogram.clone(),
        all_fibers_connected: hist.all_connected,
        flagged_buckets: hist.flagged.iter().take(MAX_LISTED).copied().collect(),
        local: LocalSummary {
            radius_hops: local.radius_hops,
            coverage_threshold: local.coverage_threshold,
            all_points: local.counts(),
            interior,
            interior_fraction: fraction,
            failures_away_from_boundary: away,
            failures: failures.into_iter().take(MAX_LISTED).collect(),
            warnings: local.warnings.iter().take(MAX_LISTED).cloned().collect(),
        },
        convexity_tolerance: tol_conv,
        weak_convexity: (&weak).into(),
        convexity: (&shortest).into(),
        isometry_pairs: iso.pairs_checked,
        isometry_max_defect: iso.max_defect,
        isometry_worst_pair: iso.worst_pair,
        isometry_tolerance: iso_tol,
    })
}

/// Weights of the isotropy representation in the `g_m` basis of the chart.
fn isotropy_rep(spec: &ModelSpec, chart: &SliceChart) -> Result<Option<TorusRepresentation>> {
    let b = chart.splitting().basis_gm();
    if b.ncols() == 0 {
        return Ok(None);
    }
    let weights: Vec<DVector<f64>> = match spec {
        ModelSpec::LinearRep { weights, .. } if chart.point().iter().all(|x| *x == 0.0) => weights
            .iter()
            .map(|w| b.tr_mul(&DVector::from_row_slice(w)))
            .collect(),
        _ => {
            // isotropy acting trivially on the slice
            let n = (chart.slice_dim() / 2).clamp(1, 3);
            vec![DVector::zeros(b.ncols()); n]
        }
    };
    TorusRepresentation::new(weights).map(Some)
}

fn normal_form_section(cfg: &RunConfig, spec: &ModelSpec, k: &MomentumMap, checks: &mut Vec<Check>) -> Result<NormalFormSection> {
    let model = k.model();
    let m = model.point(k.basepoint().clone())?;
    let chart = SliceChart::at(model, &m)?;
    let (dgm, dm, dq) = chart.splitting().dims();
    let total = model.algebra_dim() + dm + chart.slice_dim();
    let steps = ((CONSISTENCY_BUDGET.powf(1.0 / total.max(1) as f64)).floor() as usize).saturating_sub(1).clamp(1, 16);
    let cons = consistency_check(k, &chart, CHART_HALF_WIDTH, steps)?;
    let tol = cfg.tolerances.tol_normal_form;
    checks.push(Check::new(
        "normal_form_consistency",
        cons.max_residual <= tol,
        cons.max_residual,
        Some(tol),
        format!("{} chart points", cons.samples),
        || serde_json::json!({"constant": vec_of(&cons.constant), "max_residual": cons.max_residual}),
    ));
    let rep = isotropy_rep(spec, &chart)?;
    let props = check_local_properties(chart.splitting(), rep.as_ref(), CHART_HALF_WIDTH, LOCAL_PROPERTIES_RESOLUTION)?;
    checks.push(Check::new(
        "normal_form_local_properties",
        props.all(),
        props.product.counts.fraction(),
        None,
        "LFC, LOI and LCD of the local model on each factor and the product".into(),
        || json(&props),
    ));
    Ok(NormalFormSection {
        point: vec_of(chart.point()),
        dims: (dgm, dm, dq),
        slice_dim: chart.slice_dim(),
        chu_q: rows(chart.splitting().chu_q()),
        constant: vec_of(&cons.constant),
        max_residual: cons.max_residual,
        samples: cons.samples,
        local_properties: props.all(),
        factors: props.factors.iter().map(|(n, f)| (n.clone(), f.all())).collect(),
    })
}
