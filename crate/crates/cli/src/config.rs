//! Run configuration: a strict TOML schema with documented defaults.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys, wrong types and out-of-range values are all collected and
//! reported together.

use crate::scenario::Scenario;
use serde::Serialize;
use sha2::{Digest, Sha256};
use softbolt::collision::InterpolationMode;
use softbolt::diagnostics::DiagnosticsPlan;
use softbolt::integrator::{IntegratorConfig, ProjectionWeight, Scheme};
use softbolt::kernel::{AngularLaw, KineticLaw, Tabulated};
use softbolt::{Distribution, Grid, Kernel, Operator, State};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl ConfigError {
    fn single(msg: impl Into<String>) -> Self {
        Self {
            errors: vec![msg.into()],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiForm {
    Power,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BForm {
    Constant,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    pub gamma: f64,
    pub c_phi: f64,
    #[serde(rename = "C_phi")]
    pub c_phi_upper: f64,
    pub b0: f64,
    pub phi_form: PhiForm,
    pub b_form: BForm,
    pub phi_table: Option<PathBuf>,
    pub b_table: Option<PathBuf>,
    pub relaxed_gamma: bool,
    pub derivative_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    pub n_sigma: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionConfig {
    pub interpolation: InterpolationMode,
    pub table_cap_mb: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightChoice {
    State,
    Maxwellian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorSection {
    pub scheme: Scheme,
    pub safety_factor: f64,
    pub t_end: f64,
    pub output_stride: usize,
    pub conservation_projection: bool,
    pub positivity_clip: bool,
    pub projection_weight: WeightChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialDatum {
    Maxwellian {
        rho: f64,
        u: Vec<f64>,
        #[serde(rename = "T")]
        temperature: f64,
    },
    /// Sum of two Maxwellians; `weights` are their densities.
    Bimodal {
        weights: Vec<f64>,
        centers: Vec<Vec<f64>>,
        temperatures: Vec<f64>,
    },
    /// Gaussian with one temperature per axis.
    Squeezed {
        rho: f64,
        u: Vec<f64>,
        temperatures: Vec<f64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    pub moments: Vec<f64>,
    pub lp: Vec<f64>,
    pub hk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationConfig {
    pub late_fraction: f64,
    pub plateau_tol: f64,
    pub min_horizon: f64,
    pub plateau_moments: Vec<f64>,
    pub plateau_sobolev: Vec<f64>,
    pub burn_in_fraction: f64,
    pub floor_factor: f64,
    pub decay_factor: f64,
    pub tau_min: f64,
    pub stationarity_t_end: f64,
    pub residual_sizes: Vec<usize>,
    pub residual_max: f64,
    pub povzner_s: f64,
    pub povzner_speeds: usize,
    pub povzner_max_speed: f64,
    pub regularity_k: usize,
    pub regularity_s: f64,
    pub weight_shift: Option<f64>,
    pub regularity_factor: f64,
    pub smooth_family_size: usize,
    pub random_family_size: usize,
    pub interpolation_orders: Vec<f64>,
    pub growth_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub collision: CollisionConfig,
    pub integrator: IntegratorSection,
    pub initial: InitialDatum,
    pub diagnostics: DiagnosticsConfig,
    pub verification: VerificationConfig,
}

trait FromValue: Sized {
    const KIND: &'static str;
    fn from_value(v: &Value) -> Option<Self>;
}

impl FromValue for f64 {
    const KIND: &'static str = "a number";
    fn from_value(v: &Value) -> Option<Self> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl FromValue for usize {
    const KIND: &'static str = "a non-negative integer";
    fn from_value(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| usize::try_from(i).ok())
    }
}

impl FromValue for u64 {
    const KIND: &'static str = "a non-negative integer";
    fn from_value(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| u64::try_from(i).ok())
    }
}

impl FromValue for bool {
    const KIND: &'static str = "a boolean";
    fn from_value(v: &Value) -> Option<Self> {
        v.as_bool()
    }
}

impl FromValue for String {
    const KIND: &'static str = "a string";
    fn from_value(v: &Value) -> Option<Self> {
        v.as_str().map(str::to_owned)
    }
}

impl<T: FromValue> FromValue for Vec<T> {
    const KIND: &'static str = "an array";
    fn from_value(v: &Value) -> Option<Self> {
        v.as_array()?.iter().map(T::from_value).collect()
    }
}

/// Pulls keys out of one table, remembering problems instead of stopping.
struct Section<'a> {
    path: String,
    table: Table,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: Table, errors: &'a mut Vec<String>) -> Self {
        Self {
            path: path.to_owned(),
            table,
            errors,
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_owned()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn opt<T: FromValue>(&mut self, k: &str) -> Option<T> {
        let v = self.table.remove(k)?;
        match T::from_value(&v) {
            Some(x) => Some(x),
            None => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` must be {}, got `{v}`", T::KIND));
                None
            }
        }
    }

    fn get<T: FromValue>(&mut self, k: &str, default: T) -> T {
        self.opt(k).unwrap_or(default)
    }

    fn choice<T: Copy>(&mut self, k: &str, default: T, options: &[(&str, T)]) -> T {
        let Some(s) = self.opt::<String>(k) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some(&(_, v)) => v,
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                let key = self.key(k);
                self.errors
                    .push(format!("`{key}` must be one of {names:?}, got \"{s}\""));
                default
            }
        }
    }

    fn sub(&mut self, k: &str) -> Table {
        match self.table.remove(k) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(v) => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` must be a table, got `{v}`"));
                Table::new()
            }
        }
    }

    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    /// Reports whatever was not consumed as unknown.
    fn finish(self) {
        for k in self.table.keys() {
            let key = if self.path.is_empty() {
                k.clone()
            } else {
                format!("{}.{k}", self.path)
            };
            self.errors.push(format!("unknown key `{key}`"));
        }
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `key.path=value`; the value is read as a TOML literal, falling
/// back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override key `{key}` is malformed"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(format!("override `{key}`: `{p}` is not a table")),
        };
    }
    cur.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

/// Settings a scenario changes from the global defaults; the file and
/// command-line overrides still take precedence.
fn preset(scenario: Option<Scenario>) -> Table {
    let mut t = Table::new();
    if scenario == Some(Scenario::VerySoft) {
        let mut k = Table::new();
        k.insert("gamma".into(), Value::Float(-2.5));
        t.insert("kernel".into(), Value::Table(k));
    }
    t
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    load_config_with(path, None, &[])
}

/// Loads a file, then applies an optional scenario and `key=value`
/// overrides. Relative paths inside the file resolve against its directory.
pub fn load_config_with(
    path: impl AsRef<Path>,
    scenario: Option<&str>,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, scenario, overrides)
}

pub fn parse_config(
    text: &str,
    base_dir: &Path,
    scenario: Option<&str>,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut file: Table = text
        .parse()
        .map_err(|e| ConfigError::single(format!("invalid TOML: {e}")))?;
    let mut errors = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut file, o) {
            errors.push(e);
        }
    }
    if let Some(s) = scenario {
        file.insert("scenario".into(), Value::String(s.to_owned()));
    }
    let chosen = match file.get("scenario") {
        Some(Value::String(s)) => match s.parse::<Scenario>() {
            Ok(sc) => Some(sc),
            Err(e) => {
                errors.push(e);
                None
            }
        },
        Some(v) => {
            errors.push(format!("`scenario` must be a string, got `{v}`"));
            None
        }
        None => None,
    };
    file.remove("scenario");
    let mut table = preset(chosen);
    merge(&mut table, file);

    let cfg = extract(table, chosen, base_dir, &mut errors);
    check_ranges(&cfg, &mut errors);
    if errors.is_empty() {
        if let Err(e) = cfg.kernel() {
            errors.push(e.to_string());
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { errors })
    }
}

fn resolve(base: &Path, p: String) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn extract(table: Table, scenario: Option<Scenario>, base: &Path, errors: &mut Vec<String>) -> RunConfig {
    let mut top = Section::new("", table, errors);
    let output_dir = PathBuf::from(top.get("output_dir", "runs".to_owned()));
    let seed = top.get("seed", 7u64);
    let kernel_t = top.sub("kernel");
    let grid_t = top.sub("grid");
    let coll_t = top.sub("collision");
    let integ_t = top.sub("integrator");
    let init_t = top.sub("initial");
    let diag_t = top.sub("diagnostics");
    let ver_t = top.sub("verification");
    top.finish();

    let mut s = Section::new("grid", grid_t, errors);
    let grid = GridConfig {
        dim: s.get("N", 2),
        half_width: s.get("L", 8.0),
        n: s.get("n", 32),
        n_sigma: s.get("n_sigma", 32),
    };
    s.finish();
    let dim = grid.dim;

    let mut s = Section::new("kernel", kernel_t, errors);
    let gamma = s.get("gamma", -1.0);
    let c_phi = s.get("c_phi", 1.0);
    let kernel = KernelConfig {
        gamma,
        c_phi,
        c_phi_upper: s.get("C_phi", c_phi),
        b0: s.get("b0", 1.0),
        phi_form: s.choice(
            "phi_form",
            PhiForm::Power,
            &[("power", PhiForm::Power), ("table", PhiForm::Table)],
        ),
        b_form: s.choice(
            "b_form",
            BForm::Constant,
            &[("constant", BForm::Constant), ("table", BForm::Table)],
        ),
        phi_table: s.opt::<String>("phi_table").map(|p| resolve(base, p)),
        b_table: s.opt::<String>("b_table").map(|p| resolve(base, p)),
        relaxed_gamma: s.get("relaxed_gamma", false),
        derivative_bound: s.opt("derivative_bound"),
    };
    s.finish();

    let mut s = Section::new("collision", coll_t, errors);
    let collision = CollisionConfig {
        interpolation: s.choice(
            "interpolation",
            InterpolationMode::MaxwellianWeighted,
            &[
                ("maxwellian_weighted", InterpolationMode::MaxwellianWeighted),
                ("multilinear", InterpolationMode::Multilinear),
            ],
        ),
        table_cap_mb: s.get("table_cap_mb", 512),
    };
    s.finish();

    let mut s = Section::new("integrator", integ_t, errors);
    let integrator = IntegratorSection {
        scheme: s.choice("scheme", Scheme::Rk2, &[("rk2", Scheme::Rk2), ("euler", Scheme::Euler)]),
        safety_factor: s.get("safety_factor", 0.5),
        t_end: s.get("t_end", 20.0),
        output_stride: s.get("output_stride", 1),
        conservation_projection: s.get("conservation_projection", true),
        positivity_clip: s.get("positivity_clip", true),
        projection_weight: s.choice(
            "projection_weight",
            WeightChoice::State,
            &[("state", WeightChoice::State), ("maxwellian", WeightChoice::Maxwellian)],
        ),
    };
    s.finish();

    let mut s = Section::new("initial", init_t, errors);
    let zero = vec![0.0; dim];
    let kind = s.get("kind", "bimodal".to_owned());
    let initial = match kind.as_str() {
        "maxwellian" => InitialDatum::Maxwellian {
            rho: s.get("rho", 1.0),
            u: s.get("u", zero),
            temperature: s.get("T", 1.0),
        },
        "bimodal" => {
            let mut c1 = vec![0.0; dim];
            let mut c2 = vec![0.0; dim];
            c1[0] = 2.0;
            c2[0] = -2.0;
            InitialDatum::Bimodal {
                weights: s.get("weights", vec![0.5, 0.5]),
                centers: s.get("centers", vec![c1, c2]),
                temperatures: s.get("temperatures", vec![0.5, 0.5]),
            }
        }
        "squeezed" => {
            let mut ts = vec![1.0; dim];
            ts[0] = 1.8;
            if dim > 1 {
                ts[1] = 0.6;
            }
            InitialDatum::Squeezed {
                rho: s.get("rho", 1.0),
                u: s.get("u", zero),
                temperatures: s.get("temperatures", ts),
            }
        }
        "file" => match s.opt::<String>("path") {
            Some(p) => InitialDatum::File { path: resolve(base, p) },
            None => {
                s.err("`initial.path` is required when `initial.kind = \"file\"`".into());
                InitialDatum::File { path: PathBuf::new() }
            }
        },
        other => {
            s.err(format!(
                "`initial.kind` must be one of [\"maxwellian\", \"bimodal\", \"squeezed\", \"file\"], got \"{other}\""
            ));
            InitialDatum::Maxwellian {
                rho: 1.0,
                u: zero,
                temperature: 1.0,
            }
        }
    };
    s.finish();

    let mut s = Section::new("diagnostics", diag_t, errors);
    let default_plan = DiagnosticsPlan::<f64>::default_for(dim.clamp(2, 3));
    let diagnostics = DiagnosticsConfig {
        moments: s.get("moments", default_plan.moment_orders.clone()),
        lp: s.get("lp", default_plan.lp_orders.iter().map(|&(p, _)| p).collect()),
        hk: s.get("hk", default_plan.hk_orders.clone()),
    };
    s.finish();

    let mut s = Section::new("verification", ver_t, errors);
    let verification = VerificationConfig {
        late_fraction: s.get("late_fraction", 0.5),
        plateau_tol: s.get("plateau_tol", 0.05),
        min_horizon: s.get("min_horizon", 1.0),
        plateau_moments: s.get("plateau_moments", vec![2.0, 4.0]),
        plateau_sobolev: s.get("plateau_sobolev", vec![0.0, 1.0]),
        burn_in_fraction: s.get("burn_in_fraction", 0.25),
        floor_factor: s.get("floor_factor", 10.0),
        decay_factor: s.get("decay_factor", 100.0),
        tau_min: s.get("tau_min", 1.0),
        stationarity_t_end: s.get("stationarity_t_end", 1.0),
        residual_sizes: s.get("residual_sizes", vec![32, 48, 64]),
        residual_max: s.get("residual_max", 1e-2),
        povzner_s: s.get("povzner_s", 4.0),
        povzner_speeds: s.get("povzner_speeds", 20),
        povzner_max_speed: s.get("povzner_max_speed", 10.0),
        regularity_k: s.get("regularity_k", 0),
        regularity_s: s.get("regularity_s", 0.0),
        weight_shift: s.opt("weight_shift"),
        regularity_factor: s.get("regularity_factor", 10.0),
        smooth_family_size: s.get("smooth_family_size", 20),
        random_family_size: s.get("random_family_size", 100),
        interpolation_orders: s.get("interpolation_orders", vec![2.0, 4.0]),
        growth_order: s.opt("growth_order"),
    };
    s.finish();

    RunConfig {
        scenario,
        output_dir,
        seed,
        kernel,
        grid,
        collision,
        integrator,
        initial,
        diagnostics,
        verification,
    }
}

fn check_ranges(c: &RunConfig, e: &mut Vec<String>) {
    let g = &c.grid;
    if !(g.dim == 2 || g.dim == 3) {
        e.push(format!("`grid.N` must be 2 or 3, got {}", g.dim));
    }
    if !(g.half_width > 0.0 && g.half_width.is_finite()) {
        e.push(format!("`grid.L` must be positive, got {}", g.half_width));
    }
    if g.n < 4 {
        e.push(format!("`grid.n` must be at least 4, got {}", g.n));
    }
    if g.n_sigma < 4 {
        e.push(format!("`grid.n_sigma` must be at least 4, got {}", g.n_sigma));
    }

    let k = &c.kernel;
    if k.relaxed_gamma {
        if !(k.gamma > -3.0 && k.gamma <= 0.0) {
            e.push(format!(
                "`kernel.gamma` = {} lies outside (-3, 0], the widest range even with relaxed_gamma",
                k.gamma
            ));
        }
    } else if !(k.gamma > -2.0 && k.gamma <= 0.0) {
        e.push(format!(
            "`kernel.gamma` = {} lies outside the (H2) range (-2, 0]; set `kernel.relaxed_gamma = true` for out-of-hypothesis runs",
            k.gamma
        ));
    }
    if !(k.c_phi > 0.0) {
        e.push(format!("`kernel.c_phi` must be positive, got {}", k.c_phi));
    }
    if !(k.c_phi_upper >= k.c_phi) {
        e.push(format!(
            "`kernel.C_phi` = {} must be at least `kernel.c_phi` = {}",
            k.c_phi_upper, k.c_phi
        ));
    }
    if !(k.b0 > 0.0) {
        e.push(format!("`kernel.b0` must be positive (H3), got {}", k.b0));
    }
    for (form_is_table, table, name) in [
        (k.phi_form == PhiForm::Table, &k.phi_table, "phi"),
        (k.b_form == BForm::Table, &k.b_table, "b"),
    ] {
        match (form_is_table, table) {
            (true, None) => e.push(format!(
                "`kernel.{name}_table` is required when `kernel.{name}_form = \"table\"`"
            )),
            (true, Some(p)) if !p.is_file() => e.push(format!("`kernel.{name}_table`: {} does not exist", p.display())),
            (false, Some(_)) => e.push(format!(
                "`kernel.{name}_table` is set but `kernel.{name}_form` is not \"table\""
            )),
            _ => {}
        }
    }
    if c.scenario == Some(Scenario::VerySoft) && !k.relaxed_gamma {
        e.push("scenario `very-soft` runs outside (H2) and requires `kernel.relaxed_gamma = true`".into());
    }

    let i = &c.integrator;
    if !(i.safety_factor > 0.0 && i.safety_factor <= 1.0) {
        e.push(format!(
            "`integrator.safety_factor` must lie in (0, 1], got {}",
            i.safety_factor
        ));
    }
    if !(i.t_end > 0.0 && i.t_end.is_finite()) {
        e.push(format!("`integrator.t_end` must be positive, got {}", i.t_end));
    }
    if i.output_stride == 0 {
        e.push("`integrator.output_stride` must be at least 1".into());
    }

    let check_state = |e: &mut Vec<String>, what: &str, rho: f64, u: &[f64], temps: &[f64]| {
        if !(rho > 0.0) {
            e.push(format!("`{what}` density must be positive, got {rho}"));
        }
        if u.len() != g.dim {
            e.push(format!(
                "`{what}` velocity has {} components, grid.N = {}",
                u.len(),
                g.dim
            ));
        }
        if temps.iter().any(|t| !(*t > 0.0)) {
            e.push(format!("`{what}` temperatures must be positive, got {temps:?}"));
        }
    };
    match &c.initial {
        InitialDatum::Maxwellian { rho, u, temperature } => check_state(e, "initial", *rho, u, &[*temperature]),
        InitialDatum::Bimodal {
            weights,
            centers,
            temperatures,
        } => {
            if weights.len() != 2 || centers.len() != 2 || temperatures.len() != 2 {
                e.push("`initial` bimodal datum needs exactly two weights, centers and temperatures".into());
            } else {
                for j in 0..2 {
                    check_state(e, "initial", weights[j], &centers[j], &[temperatures[j]]);
                }
            }
        }
        InitialDatum::Squeezed { rho, u, temperatures } => {
            check_state(e, "initial", *rho, u, temperatures);
            if temperatures.len() != g.dim {
                e.push(format!("`initial.temperatures` needs {} entries", g.dim));
            }
        }
        InitialDatum::File { path } => {
            if !path.as_os_str().is_empty() && !path.is_file() {
                e.push(format!("`initial.path`: {} does not exist", path.display()));
            }
        }
    }

    let d = &c.diagnostics;
    if d.moments.iter().chain(&d.hk).any(|x| !x.is_finite()) {
        e.push("`diagnostics` orders must be finite".into());
    }
    if d.lp.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
        e.push(format!(
            "`diagnostics.lp` orders must be finite and >= 1, got {:?}",
            d.lp
        ));
    }

    let v = &c.verification;
    if !(v.late_fraction > 0.0 && v.late_fraction < 1.0) {
        e.push(format!(
            "`verification.late_fraction` must lie in (0, 1), got {}",
            v.late_fraction
        ));
    }
    if !(v.plateau_tol >= 0.0) {
        e.push("`verification.plateau_tol` must be non-negative".into());
    }
    if !(v.burn_in_fraction >= 0.0 && v.burn_in_fraction < 1.0) {
        e.push("`verification.burn_in_fraction` must lie in [0, 1)".into());
    }
    if !(v.stationarity_t_end > 0.0) {
        e.push("`verification.stationarity_t_end` must be positive".into());
    }
    if v.residual_sizes.is_empty() || v.residual_sizes.iter().any(|&n| n < 4) {
        e.push("`verification.residual_sizes` must be a non-empty list of sizes >= 4".into());
    }
    if !(v.povzner_s > 2.0) {
        e.push(format!("`verification.povzner_s` must exceed 2, got {}", v.povzner_s));
    }
    if v.povzner_speeds < 2 || !(v.povzner_max_speed > 0.1) {
        e.push("`verification.povzner_speeds` must be >= 2 and `povzner_max_speed` > 0.1".into());
    }
    if v.smooth_family_size == 0 || v.random_family_size == 0 {
        e.push("verification family sizes must be at least 1".into());
    }
    if v.interpolation_orders.iter().any(|s| !(*s > 0.0)) {
        e.push("`verification.interpolation_orders` must be positive".into());
    }
}

impl RunConfig {
    pub fn scenario_name(&self) -> &'static str {
        self.scenario.map_or("run", Scenario::name)
    }

    pub fn build_grid(&self, n: usize) -> softbolt::Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(
            self.grid.dim,
            self.grid.half_width,
            n,
            self.grid.n_sigma,
        )?))
    }

    pub fn grid(&self) -> softbolt::Result<Arc<Grid>> {
        self.build_grid(self.grid.n)
    }

    pub fn kernel(&self) -> softbolt::Result<Kernel> {
        let k = &self.kernel;
        let mut kernel = Kernel::power_law(k.gamma, k.c_phi, k.b0)
            .with_relaxed_gamma(k.relaxed_gamma)
            .with_derivative_bound(k.derivative_bound);
        let read = |p: &Option<PathBuf>| -> softbolt::Result<Tabulated<f64>> {
            let p = p
                .as_ref()
                .ok_or_else(|| softbolt::Error::InvalidConfig("missing table path".into()))?;
            let text = std::fs::read_to_string(p)
                .map_err(|e| softbolt::Error::InvalidConfig(format!("cannot read {}: {e}", p.display())))?;
            Tabulated::parse(&text)
        };
        kernel = match k.phi_form {
            PhiForm::Power => kernel.with_kinetic(
                KineticLaw::Power {
                    c: k.c_phi,
                    gamma: k.gamma,
                },
                k.c_phi,
                k.c_phi_upper,
            ),
            PhiForm::Table => kernel.with_kinetic(KineticLaw::Table(read(&k.phi_table)?), k.c_phi, k.c_phi_upper),
        };
        if k.b_form == BForm::Table {
            kernel = kernel.with_angular(AngularLaw::Table(read(&k.b_table)?), k.b0);
        }
        let report = softbolt::validate_kernel(&kernel, 200)?;
        let failures: Vec<String> = report
            .failures()
            .map(|c| format!("{}: {}", c.hypothesis, c.message))
            .collect();
        if !failures.is_empty() {
            return Err(softbolt::Error::InvalidConfig(format!(
                "kernel violates its hypotheses: {}",
                failures.join("; ")
            )));
        }
        Ok(kernel)
    }

    pub fn operator(&self, grid: Arc<Grid>) -> softbolt::Result<Operator> {
        let op = Operator::with_cap(grid, self.kernel()?, self.collision.table_cap_mb << 20)?;
        Ok(op.with_mode(self.collision.interpolation))
    }

    pub fn integrator_config(&self, reference: &State) -> IntegratorConfig<f64> {
        let i = &self.integrator;
        IntegratorConfig {
            scheme: i.scheme,
            safety_factor: i.safety_factor,
            t_end: i.t_end,
            output_stride: i.output_stride,
            conservation_projection: i.conservation_projection,
            positivity_clip: i.positivity_clip,
            projection_weight: match i.projection_weight {
                WeightChoice::State => ProjectionWeight::State,
                WeightChoice::Maxwellian => ProjectionWeight::Maxwellian(reference.clone()),
            },
            ..IntegratorConfig::default()
        }
    }

    pub fn plan(&self) -> DiagnosticsPlan<f64> {
        DiagnosticsPlan {
            moment_orders: self.diagnostics.moments.clone(),
            lp_orders: self.diagnostics.lp.iter().map(|&p| (p, 0.0)).collect(),
            hk_orders: self.diagnostics.hk.clone(),
            loss_bound: true,
        }
    }

    pub fn initial_state(&self, grid: &Arc<Grid>) -> softbolt::Result<Distribution> {
        match &self.initial {
            InitialDatum::Maxwellian { rho, u, temperature } => {
                softbolt::maxwellian(&State::new(*rho, u.clone(), *temperature), grid)
            }
            InitialDatum::Bimodal {
                weights,
                centers,
                temperatures,
            } => {
                let parts: Vec<State> = (0..2)
                    .map(|j| State::new(weights[j], centers[j].clone(), temperatures[j]))
                    .collect();
                Distribution::from_fn(grid.clone(), |v| parts.iter().map(|p| p.density_at(v)).sum())
            }
            InitialDatum::Squeezed { rho, u, temperatures } => {
                let norm: f64 = temperatures
                    .iter()
                    .map(|t| (2.0 * std::f64::consts::PI * t).sqrt())
                    .product();
                Distribution::from_fn(grid.clone(), |v| {
                    let e: f64 = v
                        .iter()
                        .zip(u)
                        .zip(temperatures)
                        .map(|((x, c), t)| (x - c) * (x - c) / (2.0 * t))
                        .sum();
                    rho / norm * (-e).exp()
                })
            }
            InitialDatum::File { path } => softbolt::snapshot::load_snapshot(path, grid.clone()),
        }
    }

    /// Hex SHA-256 of the resolved configuration and the contents of every
    /// file it references. The output directory is excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("configuration serializes"));
        let files = [
            self.kernel.phi_table.clone(),
            self.kernel.b_table.clone(),
            match &self.initial {
                InitialDatum::File { path } => Some(path.clone()),
                _ => None,
            },
        ];
        for p in files.into_iter().flatten() {
            h.update(std::fs::read(&p).unwrap_or_default());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `<scenario>-<first 12 hex digits of the hash>` under the output root.
    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(format!("{}-{}", self.scenario_name(), &self.hash()[..12]))
    }
}
