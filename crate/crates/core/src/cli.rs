//! Batch runner: configuration, experiment dispatch and artifact emission.
//!
//! Every artifact starts with a header recording the config hash, the
//! quadrature order and convergence flags. JSON artifacts carry it under
//! `"header"`; CSV traces carry it as `#`-prefixed lines above the column row.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::flow::{run_krf, trace_csv as flow_csv};
use crate::functionals::{h_functional, h_functional_report, w_and_mu_bound, DEFAULT_ORDER};
use crate::geodesic::eps::{EPS_HALF_WIDTH, EPS_NT, EPS_NY, EPS_SEGMENT_DELTA};
use crate::geodesic::{
    dh_dt_identity, eps_convergence, path_trace, ray_catalog, stability_probe, trace_csv,
    GeodesicPath, MODIFIED_PROBE_TOL, PROBE_TOL,
};
use crate::geometry::{quadrature, ModelName};
use crate::invariants::{
    beta_vector, extremal_field, futaki, h_invariant, modified_futaki, TorusVector,
};
use crate::metric::legendre::MIN_GRID;
use crate::metric::{
    grid_csv, random_metric, roundtrip_error, Direction, MetricSpec, RaySpec, SampledMetric,
    SymplecticPotential, DEFAULT_DELTA,
};

/// Environment variable overriding `quadrature_order`.
pub const QUAD_ORDER_ENV: &str = "KAHLERLAB_QUAD_ORDER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Invariants,
    Flow,
    Geodesic,
    Stability,
    Calibrate,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Invariants => "invariants",
            Command::Flow => "flow",
            Command::Geodesic => "geodesic",
            Command::Stability => "stability",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMetric {
    pub seed: u64,
    #[serde(default)]
    pub index: u64,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}
fn default_half_width() -> f64 {
    10.0
}
fn default_grid_points() -> usize {
    513
}
fn default_dt() -> f64 {
    1e-3
}
fn default_final_time() -> f64 {
    20.0
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_times() -> Vec<f64> {
    (0..=16).map(|k| 0.5 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    pub model: ModelName,
    /// Catalog metric; the reference metric when absent.
    #[serde(default, alias = "psi")]
    pub metric: Option<MetricSpec>,
    /// Seeded random catalog metric, exclusive with `metric`.
    #[serde(default)]
    pub random_metric: Option<RandomMetric>,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    /// Flow grid half width `L` and point count `m`.
    #[serde(default = "default_half_width", alias = "L")]
    pub half_width: f64,
    #[serde(default = "default_grid_points", alias = "m")]
    pub grid_points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_final_time", alias = "T")]
    pub final_time: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Fillet width of smoothed piecewise-linear rays.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Ray traced by `geodesic`.
    #[serde(default)]
    pub ray: Option<RaySpec>,
    /// Catalog probed by `stability`; the built-in catalog when absent.
    #[serde(default)]
    pub rays: Option<Vec<RaySpec>>,
    #[serde(default = "default_times")]
    pub trace_times: Vec<f64>,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config {
        key: String,
        message: String,
    },
    Numerical {
        message: String,
        partial: Vec<PathBuf>,
    },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Config { key, message } => {
                json!({"error": "config", "key": key, "message": message})
            }
            CliError::Numerical { message, partial } => json!({
                "error": "numerical",
                "message": message,
                "partial_artifacts": partial.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            }),
            CliError::Io(message) => json!({"error": "io", "message": message}),
        }
    }
}

fn config_error<T>(key: &str, message: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config {
        key: key.to_string(),
        message: message.into(),
    })
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical {
        message: e.to_string(),
        partial: Vec::new(),
    }
}

/// Parses, applies the environment override and validates.
pub fn parse_config(
    text: &str,
    command: Command,
    env_order: Option<&str>,
) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        // the path already ends at an unknown key; a missing key is named in the message
        let key = match inner.split('`').nth(1) {
            Some(k) if inner.starts_with("missing field") => match path.as_str() {
                "." => k.to_string(),
                p => format!("{p}.{k}"),
            },
            _ => path,
        };
        CliError::Config {
            key,
            message: inner,
        }
    })?;
    if let Some(v) = env_order {
        cfg.quadrature_order = match v.trim().parse() {
            Ok(o) => o,
            Err(_) => {
                return config_error(QUAD_ORDER_ENV, format!("not a positive integer: '{v}'"))
            }
        };
    }
    validate(&cfg, command)?;
    cfg.command = Some(command);
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, command: Command) -> Result<(), CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return config_error("command", format!("config is for '{}'", c.as_str()));
        }
    }
    if !(2..=64).contains(&cfg.quadrature_order) {
        return config_error("quadrature_order", "must be in [2, 64]");
    }
    if !(cfg.half_width > 0.0 && cfg.half_width <= 40.0) {
        return config_error("half_width", "must be in (0, 40]");
    }
    if !(MIN_GRID..=8193).contains(&cfg.grid_points) {
        return config_error("grid_points", format!("must be in [{MIN_GRID}, 8193]"));
    }
    if !(cfg.dt > 0.0 && cfg.dt <= 1.0) {
        return config_error("dt", "must be in (0, 1]");
    }
    if !(cfg.final_time >= 0.0 && cfg.final_time <= 1e3) {
        return config_error("final_time", "must be in [0, 1000]");
    }
    if cfg.epsilons.is_empty() || cfg.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return config_error("epsilons", "must be a nonempty list in (0, 1]");
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 0.5) {
        return config_error("delta", "must be in (0, 0.5]");
    }
    let times_ok = cfg.trace_times.iter().all(|t| t.is_finite() && *t >= 0.0)
        && cfg.trace_times.windows(2).all(|w| w[0] < w[1]);
    if cfg.trace_times.is_empty() || !times_ok {
        return config_error(
            "trace_times",
            "must be a nonempty increasing list of nonnegative times",
        );
    }
    if let Some(m) = &cfg.metric {
        if m.model != cfg.model {
            return config_error("metric.model", "differs from 'model'");
        }
        if cfg.random_metric.is_some() {
            return config_error("random_metric", "exclusive with 'metric'");
        }
    }
    let dim = match cfg.model {
        ModelName::Cp1 => 1,
        ModelName::Hirzebruch1 => 2,
    };
    if let Some(r) = &cfg.ray {
        Direction::from_spec(r, dim, cfg.delta).or_else(|e| config_error("ray", e.to_string()))?;
    }
    if let Some(rs) = &cfg.rays {
        for (i, r) in rs.iter().enumerate() {
            Direction::from_spec(r, dim, cfg.delta)
                .or_else(|e| config_error(&format!("rays[{i}]"), e.to_string()))?;
        }
    }
    if matches!(command, Command::Flow | Command::Calibrate) && cfg.model != ModelName::Cp1 {
        return config_error("model", format!("'{}' runs on CP1 only", command.as_str()));
    }
    if command == Command::Geodesic && cfg.ray.is_none() {
        return config_error("ray", "the geodesic command needs a ray");
    }
    Ok(())
}

fn potential(cfg: &ExperimentConfig) -> Result<SymplecticPotential, CliError> {
    match (&cfg.metric, &cfg.random_metric) {
        (Some(m), _) => {
            SymplecticPotential::new(m.clone()).or_else(|e| config_error("metric", e.to_string()))
        }
        (None, Some(r)) => Ok(random_metric(cfg.model, r.seed, r.index)),
        (None, None) => Ok(SymplecticPotential::reference(cfg.model)),
    }
}

/// Hex SHA-256 of the normalized config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
struct Header {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_sha256: String,
    config: ExperimentConfig,
    quadrature_order: usize,
    converged: BTreeMap<String, bool>,
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    /// Temp file in the target directory, then rename.
    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{name}: {e}"));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(content.as_bytes()).map_err(io)?;
        let target = self.dir.join(name);
        tmp.persist(&target).map_err(|e| io(e.error))?;
        self.written.push(target);
        Ok(())
    }

    fn json(&mut self, name: &str, header: &Header, body: Value) -> Result<(), CliError> {
        let doc = json!({"header": header, "body": body});
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn csv(&mut self, name: &str, header: &Header, body: &str) -> Result<(), CliError> {
        let meta = serde_json::to_string(header).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &format!("# {meta}\n{body}"))
    }

    /// Turns a numerical failure into one that lists what was written.
    fn fail(&self, e: impl std::fmt::Display) -> CliError {
        CliError::Numerical {
            message: e.to_string(),
            partial: self.written.clone(),
        }
    }
}

/// Runs `command` on the config text and writes artifacts into `out`.
/// Returns the artifact paths.
pub fn execute(
    command: Command,
    config_text: &str,
    env_order: Option<&str>,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let cfg = parse_config(config_text, command, env_order)?;
    let dir = match (out, &cfg.output) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut w = Writer {
        dir,
        written: Vec::new(),
    };
    let header = |converged: BTreeMap<String, bool>| Header {
        tool: "kahlerlab",
        version: env!("CARGO_PKG_VERSION"),
        command: command.as_str(),
        config_sha256: config_hash(&cfg),
        config: cfg.clone(),
        quadrature_order: cfg.quadrature_order,
        converged,
    };
    let u = potential(&cfg)?;
    let order = cfg.quadrature_order;
    match command {
        Command::Calibrate => {
            let reference = SymplecticPotential::reference(ModelName::Cp1);
            let rule = quadrature(&reference.model.polytope, order).map_err(numerical)?;
            let s = SampledMetric::new(&reference, &rule).map_err(numerical)?;
            let sup_h = s.ricci.h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let probes: Vec<f64> = rule.nodes.iter().map(|x| x[0]).collect();
            let roundtrip =
                roundtrip_error(&u, cfg.half_width, cfg.grid_points, &probes).map_err(numerical)?;
            let ok = BTreeMap::from([
                ("sup_h_reference".to_string(), sup_h < 1e-8),
                ("legendre_roundtrip".to_string(), roundtrip < 1e-8),
            ]);
            let body = json!({"sup_h_reference": sup_h, "legendre_roundtrip": roundtrip});
            w.json("calibrate.json", &header(ok), body)?;
        }
        Command::Invariants => {
            let rule = quadrature(&u.model.polytope, order).map_err(numerical)?;
            let s = SampledMetric::new(&u, &rule).map_err(numerical)?;
            let dim = u.dim();
            let h_report = h_functional_report(&u, order).map_err(numerical)?;
            let ext = extremal_field(cfg.model, order).map_err(numerical)?;
            let beta = beta_vector(cfg.model, order).map_err(numerical)?;
            let mut basis = Vec::new();
            let mut residuals = Vec::new();
            for i in 0..dim {
                let e = TorusVector::basis(dim, i);
                let f = futaki(&s, &e).map_err(numerical)?;
                let fx = modified_futaki(&s, &e, &ext.xi0).map_err(numerical)?;
                residuals.push(fx);
                basis.push(json!({
                    "xi": e.components,
                    "H": h_invariant(&s, &e).map_err(numerical)?,
                    "futaki_measure": f.measure,
                    "futaki_gradient": f.gradient,
                    "modified_futaki_at_xi0": fx,
                }));
            }
            let residual = residuals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let h_xi0 = h_invariant(&s, &ext.xi0).map_err(numerical)?;
            let wb = w_and_mu_bound(&s);
            let v = s.volume();
            let ok = BTreeMap::from([
                ("H_functional".to_string(), h_report.converged),
                ("extremal_routes".to_string(), ext.route_gap < 1e-6),
                ("modified_futaki_residual".to_string(), residual < 1e-5 * v),
            ]);
            let body = json!({
                "model": cfg.model,
                "volume": v,
                "H_functional": h_report,
                "xi0": ext.xi0.components,
                "extremal": ext,
                "H_xi0": h_xi0,
                "lower_bound_gap": h_functional(&s) - h_xi0,
                "futaki_basis": basis,
                "modified_futaki_residuals": residuals,
                "convergence_flags": ok,
                "beta": beta,
                "W_at_minus_h": wb.w_at_minus_h,
                "mu_bound": wb.mu_bound,
            });
            w.csv("metric_grid.csv", &header(ok.clone()), &grid_csv(&s))?;
            w.json("invariants.json", &header(ok), body)?;
        }
        Command::Flow => {
            let (state, failure) =
                match run_krf(&u, cfg.final_time, cfg.dt, cfg.half_width, cfg.grid_points) {
                    Ok(s) => (s, None),
                    Err(abort) => (*abort.partial, Some(abort.error)),
                };
            let ok = BTreeMap::from([("completed".to_string(), failure.is_none())]);
            w.csv(
                "flow_trace.csv",
                &header(ok.clone()),
                &flow_csv(&state.trace),
            )?;
            let last = state.trace.last();
            let body = json!({
                "t": state.t,
                "steps": state.trace.len().saturating_sub(1),
                "terminal_H": last.map(|m| m.h_functional),
                "terminal_sup_h": last.map(|m| m.sup_h),
                "max_H_increase": state.trace.windows(2).map(|p| p[1].h_functional - p[0].h_functional).fold(f64::NEG_INFINITY, f64::max),
                "error": failure.as_ref().map(|e| e.to_string()),
            });
            w.json("flow.json", &header(ok), body)?;
            if let Some(e) = failure {
                return Err(w.fail(e));
            }
        }
        Command::Geodesic => {
            let ray = cfg.ray.as_ref().expect("validated");
            let dir = Direction::from_spec(ray, u.dim(), cfg.delta).map_err(numerical)?;
            let path = GeodesicPath::ray(u.clone(), dir);
            let xi0 = extremal_field(cfg.model, order).map_err(|e| w.fail(e))?.xi0;
            let rows =
                path_trace(&path, &cfg.trace_times, Some(&xi0), order).map_err(|e| w.fail(e))?;
            w.csv(
                "geodesic_trace.csv",
                &header(BTreeMap::new()),
                &trace_csv(&rows),
            )?;
            let mut slopes = Vec::new();
            for r in rows.iter().filter(|r| r.t > 1e-2) {
                let c = dh_dt_identity(&path, r.t, order).map_err(|e| w.fail(e))?;
                slopes.push(json!({"t": r.t, "fd_slope": c.fd_slope, "rhs": c.rhs}));
            }
            let mut ok = BTreeMap::new();
            let eps = if cfg.model == ModelName::Cp1 {
                let v = Direction::from_spec(
                    &RaySpec::Pl {
                        a: vec![1.0],
                        b: 0.0,
                        delta: Some(EPS_SEGMENT_DELTA),
                    },
                    1,
                    EPS_SEGMENT_DELTA,
                )
                .map_err(numerical)?;
                let seg = GeodesicPath::segment(u.clone(), v, 1.0).map_err(numerical)?;
                let study = eps_convergence(&seg, &cfg.epsilons, EPS_HALF_WIDTH, EPS_NT, EPS_NY)
                    .map_err(|e| w.fail(e))?;
                ok.insert("eps_newton".to_string(), true);
                Some(study)
            } else {
                None
            };
            let body = json!({"ray": ray, "xi0": xi0.components, "slope_identity": slopes, "eps_geodesic": eps});
            w.json("geodesic.json", &header(ok), body)?;
        }
        Command::Stability => {
            let rays = cfg.rays.clone().unwrap_or_else(|| ray_catalog(cfg.model));
            let xi0 = extremal_field(cfg.model, order).map_err(numerical)?.xi0;
            let plain =
                stability_probe(&u, &rays, None, cfg.delta, PROBE_TOL, order).map_err(numerical)?;
            let modified =
                stability_probe(&u, &rays, Some(&xi0), cfg.delta, MODIFIED_PROBE_TOL, order)
                    .map_err(numerical)?;
            let body = json!({"F_probe": plain, "FX_probe": modified});
            w.json("stability.json", &header(BTreeMap::new()), body)?;
        }
    }
    Ok(w.written)
}
