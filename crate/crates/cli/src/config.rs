//! Experiment configuration: a TOML document with `model`, `bath`, `solver`,
//! `scan`, `dynamics`, `sweep` and `output` tables.
//!
//! Parsing walks the document by hand so every violation is collected and
//! unknown keys are reported instead of silently ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use toml::{Table, Value};

use zeno_core::bath::SpectralDensity;
use zeno_core::heom::{HeomOptions, LinkConvention};
use zeno_core::linalg::StateVector;
use zeno_core::models::{biased_qubit, biased_qutrit, su2_coherent_state, ModelSpec};
use zeno_core::zeno::{tau_grid, BathSpec, SolverSettings, StepSize};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax(String),
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax(msg) => write!(f, "config is not valid TOML: {msg}"),
            ConfigError::Invalid(v) => {
                writeln!(f, "config has {} problem(s):", v.len())?;
                for line in v {
                    writeln!(f, "  - {line}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Qubit,
    Qutrit,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Qubit => 2,
            ModelKind::Qutrit => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelKind::Qubit => "qubit",
            ModelKind::Qutrit => "qutrit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Excited,
    Ground,
    /// Equal-weight superposition of all basis states.
    Plus,
    Coherent { theta: f64, phi0: f64 },
    /// Explicit amplitudes in the basis ordered from the top level down.
    Amplitudes(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub epsilon: f64,
    pub delta: f64,
    pub initial_state: InitialState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BathConfig {
    /// Zero-temperature Lorentzian.
    Lorentzian { gamma0: f64, lambda: f64, omega0: f64 },
    OhmicDrude { chi: f64, omega_c: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// `None` means automatic.
    pub dt: Option<f64>,
    pub l_start: usize,
    pub l_max: usize,
    pub conv_tol: f64,
    /// `None` means automatic.
    pub matsubara_epsilon: Option<usize>,
    pub allow_unconverged: bool,
    pub fit_window: usize,
    pub link_convention: LinkConvention,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            dt: None,
            l_start: s.l_start,
            l_max: s.l_max,
            conv_tol: s.conv_tol,
            matsubara_epsilon: None,
            allow_unconverged: s.allow_unconverged,
            fit_window: s.fit_window,
            link_convention: LinkConvention::Derived,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    pub log_spacing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub t_max: f64,
    /// Samples on [0, t_max], both ends included.
    pub points: usize,
    /// Add the distance to the state orthogonal to ψ₀.
    pub distance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Epsilon,
    Delta,
    Gamma0,
    Lambda,
    Omega0,
    Chi,
    OmegaC,
    Beta,
}

impl SweepParameter {
    const ALL: [SweepParameter; 8] = [
        Self::Epsilon,
        Self::Delta,
        Self::Gamma0,
        Self::Lambda,
        Self::Omega0,
        Self::Chi,
        Self::OmegaC,
        Self::Beta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::Delta => "delta",
            Self::Gamma0 => "gamma0",
            Self::Lambda => "lambda",
            Self::Omega0 => "omega0",
            Self::Chi => "chi",
            Self::OmegaC => "omega_c",
            Self::Beta => "beta",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_plots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub bath: BathConfig,
    pub solver: SolverConfig,
    pub scan: Option<ScanConfig>,
    pub dynamics: Option<DynamicsConfig>,
    pub sweep: Option<SweepConfig>,
    pub output: OutputConfig,
}

/// Reads one table, remembering which keys were used and every problem met.
struct Reader<'a, 'e> {
    table: &'a Table,
    path: &'static str,
    used: BTreeSet<&'static str>,
    errors: &'e mut Vec<String>,
}

impl<'a, 'e> Reader<'a, 'e> {
    fn new(table: &'a Table, path: &'static str, errors: &'e mut Vec<String>) -> Self {
        Self { table, path, used: BTreeSet::new(), errors }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.get(key)
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.path));
    }

    fn number(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.fail(key, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn required_number(&mut self, key: &'static str) -> Option<f64> {
        if !self.table.contains_key(key) {
            self.fail(key, "missing");
        }
        self.number(key)
    }

    fn positive(&mut self, key: &'static str) -> Option<f64> {
        let v = self.required_number(key)?;
        if !(v > 0.0) || !v.is_finite() {
            self.fail(key, format!("must be positive and finite, got {v}"));
            return None;
        }
        Some(v)
    }

    fn finite(&mut self, key: &'static str, default: Option<f64>) -> Option<f64> {
        let v = match (self.number(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) if !self.table.contains_key(key) => d,
            (None, _) => {
                if !self.table.contains_key(key) {
                    self.fail(key, "missing");
                }
                return None;
            }
        };
        if !v.is_finite() {
            self.fail(key, format!("must be finite, got {v}"));
            return None;
        }
        Some(v)
    }

    fn integer(&mut self, key: &'static str, default: Option<usize>, min: usize) -> Option<usize> {
        let v = match self.raw(key) {
            None if default.is_some() => return default,
            None => {
                self.fail(key, "missing");
                return None;
            }
            Some(Value::Integer(i)) => *i,
            Some(other) => {
                self.fail(key, format!("expected an integer, got {}", other.type_str()));
                return None;
            }
        };
        if v < min as i64 {
            self.fail(key, format!("must be at least {min}, got {v}"));
            return None;
        }
        Some(v as usize)
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> Option<bool> {
        match self.raw(key) {
            None => Some(default),
            Some(Value::Boolean(b)) => Some(*b),
            Some(other) => {
                self.fail(key, format!("expected true or false, got {}", other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.fail(key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    /// Number, or the given keyword meaning "automatic".
    fn number_or(&mut self, key: &'static str, keyword: &str) -> Option<Option<f64>> {
        match self.raw(key) {
            None => Some(None),
            Some(Value::String(s)) if s == keyword => Some(None),
            Some(Value::Float(x)) => Some(Some(*x)),
            Some(Value::Integer(i)) => Some(Some(*i as f64)),
            Some(other) => {
                self.fail(key, format!("expected a number or \"{keyword}\", got {other}"));
                None
            }
        }
    }

    fn finish(self) {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                self.errors.push(format!("{}.{key}: unknown key", self.path));
            }
        }
    }
}

fn sub_table<'a>(root: &'a Table, name: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(other) => {
            errors.push(format!("{name}: expected a table, got {}", other.type_str()));
            None
        }
    }
}

fn parse_initial_state(value: Option<&Value>, errors: &mut Vec<String>) -> Option<InitialState> {
    let bad = |errors: &mut Vec<String>, msg: String| {
        errors.push(format!("model.initial_state: {msg}"));
        None
    };
    match value {
        None => Some(InitialState::Excited),
        Some(Value::String(s)) => {
            let s = s.trim();
            match s {
                "excited" => Some(InitialState::Excited),
                "ground" => Some(InitialState::Ground),
                "plus" => Some(InitialState::Plus),
                _ => {
                    let Some(args) = s.strip_prefix("coherent(").and_then(|r| r.strip_suffix(')')) else {
                        return bad(
                            errors,
                            format!("unknown state \"{s}\" (use excited, ground, plus, coherent(theta, phi0) or amplitudes)"),
                        );
                    };
                    let parts: Vec<Option<f64>> = args.split(',').map(|p| p.trim().parse().ok()).collect();
                    match parts.as_slice() {
                        [Some(theta), Some(phi0)] => Some(InitialState::Coherent { theta: *theta, phi0: *phi0 }),
                        _ => bad(errors, format!("coherent state needs two numbers, got \"{args}\"")),
                    }
                }
            }
        }
        Some(Value::Array(items)) => {
            let mut amps = Vec::with_capacity(items.len());
            for item in items {
                let pair = match item {
                    Value::Array(p) if p.len() == 2 => p,
                    _ => return bad(errors, "amplitudes must be [re, im] pairs".into()),
                };
                let num = |v: &Value| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                };
                match (num(&pair[0]), num(&pair[1])) {
                    (Some(re), Some(im)) => amps.push(C64::new(re, im)),
                    _ => return bad(errors, "amplitudes must be numbers".into()),
                }
            }
            Some(InitialState::Amplitudes(amps))
        }
        Some(other) => bad(errors, format!("expected a string or an array, got {}", other.type_str())),
    }
}

fn parse_model(root: &Table, errors: &mut Vec<String>) -> Option<ModelConfig> {
    let Some(table) = sub_table(root, "model", errors) else {
        if !root.contains_key("model") {
            errors.push("model: missing".into());
        }
        return None;
    };
    let mut r = Reader::new(table, "model", errors);
    let kind = match r.string("kind") {
        Some("qubit") => Some(ModelKind::Qubit),
        Some("qutrit") => Some(ModelKind::Qutrit),
        Some(other) => {
            r.fail("kind", format!("expected qubit or qutrit, got \"{other}\""));
            None
        }
        None => {
            if !table.contains_key("kind") {
                r.fail("kind", "missing");
            }
            None
        }
    };
    let epsilon = r.finite("epsilon", None);
    let delta = r.finite("delta", Some(0.0));
    let raw_state = r.raw("initial_state");
    r.finish();
    let initial_state = parse_initial_state(raw_state, errors);
    Some(ModelConfig { kind: kind?, epsilon: epsilon?, delta: delta?, initial_state: initial_state? })
}

fn parse_bath(root: &Table, errors: &mut Vec<String>) -> Option<BathConfig> {
    let Some(table) = sub_table(root, "bath", errors) else {
        if !root.contains_key("bath") {
            errors.push("bath: missing".into());
        }
        return None;
    };
    let mut r = Reader::new(table, "bath", errors);
    let kind = r.string("kind");
    let beta = r.raw("beta");
    let is_zero = matches!(beta, Some(Value::String(s)) if s == "zero");
    let out = match kind {
        Some("lorentzian") => {
            // γ₀ = 0 is the closed system
            let gamma0 = r.required_number("gamma0").filter(|g| *g >= 0.0 && g.is_finite());
            if gamma0.is_none() && table.get("gamma0").is_some_and(|v| v.is_float() || v.is_integer()) {
                r.fail("gamma0", "must be non-negative and finite");
            }
            let lambda = r.positive("lambda");
            let omega0 = r.finite("omega0", Some(0.0));
            if !is_zero {
                r.fail("beta", "the Lorentzian bath is zero-temperature only; set beta = \"zero\"");
            }
            match (gamma0, lambda, omega0) {
                (Some(gamma0), Some(lambda), Some(omega0)) if is_zero => {
                    Some(BathConfig::Lorentzian { gamma0, lambda, omega0 })
                }
                _ => None,
            }
        }
        Some("ohmic_drude") => {
            let chi = r.positive("chi");
            let omega_c = r.positive("omega_c");
            let beta = match beta {
                Some(_) if is_zero => {
                    r.fail("beta", "beta = \"zero\" pairs only with the Lorentzian bath; give a positive number");
                    None
                }
                Some(Value::Float(b)) if *b > 0.0 && b.is_finite() => Some(*b),
                Some(Value::Integer(b)) if *b > 0 => Some(*b as f64),
                Some(other) => {
                    r.fail("beta", format!("must be a positive number, got {other}"));
                    None
                }
                None => {
                    r.fail("beta", "missing");
                    None
                }
            };
            match (chi, omega_c, beta) {
                (Some(chi), Some(omega_c), Some(beta)) => Some(BathConfig::OhmicDrude { chi, omega_c, beta }),
                _ => None,
            }
        }
        Some(other) => {
            r.fail("kind", format!("expected lorentzian or ohmic_drude, got \"{other}\""));
            None
        }
        None => {
            if !table.contains_key("kind") {
                r.fail("kind", "missing");
            }
            None
        }
    };
    // keys belonging to the other bath kind are unknown here
    r.finish();
    out
}

fn parse_solver(root: &Table, errors: &mut Vec<String>) -> Option<SolverConfig> {
    let d = SolverConfig::default();
    let Some(table) = sub_table(root, "solver", errors) else {
        return (!root.contains_key("solver")).then_some(d);
    };
    let mut r = Reader::new(table, "solver", errors);
    let dt = r.number_or("dt", "auto");
    if let Some(Some(v)) = dt {
        if !(v > 0.0) || !v.is_finite() {
            r.fail("dt", format!("must be positive or \"auto\", got {v}"));
        }
    }
    let l_start = r.integer("L_start", Some(d.l_start), 1);
    let l_max = r.integer("L_max", Some(d.l_max), 1);
    if let (Some(s), Some(m)) = (l_start, l_max) {
        if m < s {
            r.fail("L_max", format!("must be at least L_start ({s}), got {m}"));
        }
    }
    let conv_tol = r.number("conv_tol").or(if table.contains_key("conv_tol") { None } else { Some(d.conv_tol) });
    if let Some(t) = conv_tol {
        if !(t > 0.0) {
            r.fail("conv_tol", format!("must be positive, got {t}"));
        }
    }
    let matsubara_epsilon = match r.raw("matsubara_epsilon") {
        None => Some(None),
        Some(Value::String(s)) if s == "auto" => Some(None),
        Some(Value::Integer(i)) if *i >= 0 => Some(Some(*i as usize)),
        Some(other) => {
            r.fail("matsubara_epsilon", format!("expected a non-negative integer or \"auto\", got {other}"));
            None
        }
    };
    let allow_unconverged = r.boolean("allow_unconverged", d.allow_unconverged);
    let fit_window = r.integer("fit_window", Some(d.fit_window), 3);
    let link_convention = match r.string("link_convention") {
        None if !table.contains_key("link_convention") => Some(LinkConvention::Derived),
        None => None,
        Some(s) => match convention_from_name(s) {
            Some(c) => Some(c),
            None => {
                r.fail("link_convention", format!("expected derived, swapped or mis_signed, got \"{s}\""));
                None
            }
        },
    };
    r.finish();
    let dt = dt?;
    if matches!(dt, Some(v) if !(v > 0.0) || !v.is_finite()) || matches!(conv_tol, Some(t) if !(t > 0.0)) {
        return None;
    }
    match (l_start, l_max) {
        (Some(s), Some(m)) if m >= s => Some(SolverConfig {
            dt,
            l_start: s,
            l_max: m,
            conv_tol: conv_tol?,
            matsubara_epsilon: matsubara_epsilon?,
            allow_unconverged: allow_unconverged?,
            fit_window: fit_window?,
            link_convention: link_convention?,
        }),
        _ => None,
    }
}

pub fn convention_from_name(s: &str) -> Option<LinkConvention> {
    match s {
        "derived" => Some(LinkConvention::Derived),
        "swapped" => Some(LinkConvention::SwappedPairing),
        "mis_signed" => Some(LinkConvention::MisSigned),
        _ => None,
    }
}

pub fn convention_name(c: LinkConvention) -> &'static str {
    match c {
        LinkConvention::Derived => "derived",
        LinkConvention::SwappedPairing => "swapped",
        LinkConvention::MisSigned => "mis_signed",
    }
}

fn parse_scan(root: &Table, errors: &mut Vec<String>) -> Option<Option<ScanConfig>> {
    let Some(table) = sub_table(root, "scan", errors) else {
        return (!root.contains_key("scan")).then_some(None);
    };
    let mut r = Reader::new(table, "scan", errors);
    // a missing tau_min is filled in from the energy scales after parsing
    let tau_min = if table.contains_key("tau_min") { r.positive("tau_min") } else { Some(f64::NAN) };
    let tau_max = r.positive("tau_max");
    let points = r.integer("points", None, 2);
    let log_spacing = match r.string("spacing") {
        None if !table.contains_key("spacing") => Some(false),
        Some("linear") => Some(false),
        Some("log") => Some(true),
        Some(other) => {
            r.fail("spacing", format!("expected linear or log, got \"{other}\""));
            None
        }
        None => None,
    };
    if let (Some(lo), Some(hi)) = (tau_min, tau_max) {
        if hi <= lo {
            r.fail("tau_max", format!("must exceed tau_min ({lo}), got {hi}"));
        }
    }
    r.finish();
    Some(Some(ScanConfig { tau_min: tau_min?, tau_max: tau_max?, points: points?, log_spacing: log_spacing? }))
}

fn parse_dynamics(root: &Table, errors: &mut Vec<String>) -> Option<Option<DynamicsConfig>> {
    let Some(table) = sub_table(root, "dynamics", errors) else {
        return (!root.contains_key("dynamics")).then_some(None);
    };
    let mut r = Reader::new(table, "dynamics", errors);
    let t_max = r.positive("t_max");
    let points = r.integer("points", None, 3);
    let distance = r.boolean("distance", false);
    r.finish();
    Some(Some(DynamicsConfig { t_max: t_max?, points: points?, distance: distance? }))
}

fn parse_sweep(root: &Table, errors: &mut Vec<String>) -> Option<Option<SweepConfig>> {
    let Some(table) = sub_table(root, "sweep", errors) else {
        return (!root.contains_key("sweep")).then_some(None);
    };
    let mut r = Reader::new(table, "sweep", errors);
    let parameter = match r.string("parameter") {
        Some(s) => match SweepParameter::parse(s) {
            Some(p) => Some(p),
            None => {
                r.fail("parameter", format!("unknown sweep parameter \"{s}\""));
                None
            }
        },
        None => {
            if !table.contains_key("parameter") {
                r.fail("parameter", "missing");
            }
            None
        }
    };
    let values = match r.raw("values") {
        Some(Value::Array(items)) => {
            let nums: Option<Vec<f64>> = items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Some(*x),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect();
            if nums.is_none() {
                r.fail("values", "must be an array of numbers");
            }
            nums
        }
        Some(other) => {
            r.fail("values", format!("expected an array, got {}", other.type_str()));
            None
        }
        None => {
            r.fail("values", "missing");
            None
        }
    };
    r.finish();
    let values = values?;
    // an empty sweep block means a single run
    if values.is_empty() {
        return Some(None);
    }
    Some(Some(SweepConfig { parameter: parameter?, values }))
}

fn parse_output(root: &Table, errors: &mut Vec<String>) -> Option<OutputConfig> {
    let default = OutputConfig { directory: PathBuf::from("out"), emit_plots: false };
    let Some(table) = sub_table(root, "output", errors) else {
        return (!root.contains_key("output")).then_some(default);
    };
    let mut r = Reader::new(table, "output", errors);
    let directory = match r.string("directory") {
        Some(s) => Some(PathBuf::from(s)),
        None if !table.contains_key("directory") => Some(default.directory),
        None => None,
    };
    let emit_plots = r.boolean("emit_plots", false);
    r.finish();
    Some(OutputConfig { directory: directory?, emit_plots: emit_plots? })
}

const SECTIONS: [&str; 7] = ["model", "bath", "solver", "scan", "dynamics", "sweep", "output"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            errors.push(format!("{key}: unknown section"));
        }
    }
    let model = parse_model(&root, &mut errors);
    let bath = parse_bath(&root, &mut errors);
    let solver = parse_solver(&root, &mut errors);
    let scan = parse_scan(&root, &mut errors);
    let dynamics = parse_dynamics(&root, &mut errors);
    let sweep = parse_sweep(&root, &mut errors);
    let output = parse_output(&root, &mut errors);
    let assembled = match (model, bath, solver, scan, dynamics, sweep, output) {
        (Some(model), Some(bath), Some(solver), Some(scan), Some(dynamics), Some(sweep), Some(output))
            if errors.is_empty() =>
        {
            let mut cfg = ExperimentConfig { model, bath, solver, scan, dynamics, sweep, output };
            if let Some(scan) = cfg.scan.as_mut() {
                if scan.tau_min.is_nan() {
                    scan.tau_min = default_tau_min(&cfg.model, &cfg.bath);
                    if scan.tau_max <= scan.tau_min {
                        errors.push(format!("scan.tau_max: must exceed the default tau_min {}", scan.tau_min));
                    }
                }
            }
            Some(cfg)
        }
        _ => None,
    };
    if let Some(cfg) = &assembled {
        validate_semantics(cfg, &mut errors);
    }
    match assembled {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid(errors)),
    }
}

/// 0.02 / max(|ε|, |Δ|, λ or ω_c)
pub fn default_tau_min(model: &ModelConfig, bath: &BathConfig) -> f64 {
    let width = match bath {
        BathConfig::Lorentzian { lambda, .. } => *lambda,
        BathConfig::OhmicDrude { omega_c, .. } => *omega_c,
    };
    0.02 / model.epsilon.abs().max(model.delta.abs()).max(width)
}

/// Checks that need the whole config: state dimensions, sweep targets and
/// every swept variant.
fn validate_semantics(cfg: &ExperimentConfig, errors: &mut Vec<String>) {
    if let InitialState::Amplitudes(a) = &cfg.model.initial_state {
        if a.len() != cfg.model.kind.dim() {
            errors.push(format!(
                "model.initial_state: {} amplitudes given for a {} ({} levels)",
                a.len(),
                cfg.model.kind.name(),
                cfg.model.kind.dim()
            ));
        }
    }
    if let Err(e) = cfg.initial_state() {
        errors.push(format!("model.initial_state: {e}"));
    }
    let Some(sweep) = &cfg.sweep else { return };
    let fits = matches!(
        (sweep.parameter, &cfg.bath),
        (SweepParameter::Epsilon | SweepParameter::Delta, _)
            | (SweepParameter::Gamma0 | SweepParameter::Lambda | SweepParameter::Omega0, BathConfig::Lorentzian { .. })
            | (SweepParameter::Chi | SweepParameter::OmegaC | SweepParameter::Beta, BathConfig::OhmicDrude { .. })
    );
    if !fits {
        errors.push(format!("sweep.parameter: \"{}\" does not apply to this bath", sweep.parameter.name()));
        return;
    }
    for (i, &v) in sweep.values.iter().enumerate() {
        if let Err(e) = cfg.with_parameter(sweep.parameter, v).bath_spec() {
            errors.push(format!("sweep.values[{i}]: {e}"));
        }
    }
}

impl ExperimentConfig {
    pub fn model_spec(&self) -> ModelSpec {
        match self.model.kind {
            ModelKind::Qubit => biased_qubit(self.model.epsilon, self.model.delta),
            ModelKind::Qutrit => biased_qutrit(self.model.epsilon, self.model.delta),
        }
    }

    pub fn initial_state(&self) -> Result<StateVector, String> {
        let dim = self.model.kind.dim();
        match &self.model.initial_state {
            InitialState::Excited => Ok(StateVector::basis(dim, 0)),
            InitialState::Ground => Ok(StateVector::basis(dim, dim - 1)),
            InitialState::Plus => {
                StateVector::normalized(vec![C64::new(1.0, 0.0); dim]).map_err(|e| e.to_string())
            }
            InitialState::Coherent { theta, phi0 } => {
                su2_coherent_state(dim - 1, *theta, *phi0).map_err(|e| e.to_string())
            }
            InitialState::Amplitudes(a) => StateVector::normalized(a.clone()).map_err(|e| e.to_string()),
        }
    }

    pub fn spectrum(&self) -> Result<SpectralDensity, String> {
        match self.bath {
            BathConfig::Lorentzian { gamma0, lambda, omega0 } => {
                SpectralDensity::lorentzian_allow_zero(gamma0, lambda, omega0).map_err(|e| e.to_string())
            }
            BathConfig::OhmicDrude { chi, omega_c, .. } => {
                SpectralDensity::ohmic_drude(chi, omega_c).map_err(|e| e.to_string())
            }
        }
    }

    pub fn bath_spec(&self) -> Result<BathSpec, String> {
        let spectrum = self.spectrum()?;
        Ok(match self.bath {
            BathConfig::Lorentzian { .. } => {
                BathSpec::ZeroTemperature { spectrum, convention: self.solver.link_convention }
            }
            BathConfig::OhmicDrude { beta, .. } => {
                if !(beta > 0.0) {
                    return Err(format!("beta must be positive, got {beta}"));
                }
                BathSpec::Thermal { spectrum, beta, matsubara: self.solver.matsubara_epsilon }
            }
        })
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            dt: self.solver.dt.map_or(StepSize::Auto, StepSize::Fixed),
            l_start: self.solver.l_start,
            l_max: self.solver.l_max,
            conv_tol: self.solver.conv_tol,
            allow_unconverged: self.solver.allow_unconverged,
            fit_window: self.solver.fit_window,
            heom: HeomOptions::default(),
        }
    }

    pub fn tau_grid(&self) -> Option<Vec<f64>> {
        let s = self.scan?;
        tau_grid(s.tau_min, s.tau_max, s.points, s.log_spacing).ok()
    }

    pub fn time_grid(&self) -> Option<Vec<f64>> {
        let d = self.dynamics?;
        let last = (d.points - 1) as f64;
        Some((0..d.points).map(|k| if k + 1 == d.points { d.t_max } else { d.t_max * k as f64 / last }).collect())
    }

    /// Copy with one physical parameter replaced and the sweep removed.
    pub fn with_parameter(&self, p: SweepParameter, v: f64) -> Self {
        let mut c = self.clone();
        c.sweep = None;
        match (p, &mut c.bath) {
            (SweepParameter::Epsilon, _) => c.model.epsilon = v,
            (SweepParameter::Delta, _) => c.model.delta = v,
            (SweepParameter::Gamma0, BathConfig::Lorentzian { gamma0, .. }) => *gamma0 = v,
            (SweepParameter::Lambda, BathConfig::Lorentzian { lambda, .. }) => *lambda = v,
            (SweepParameter::Omega0, BathConfig::Lorentzian { omega0, .. }) => *omega0 = v,
            (SweepParameter::Chi, BathConfig::OhmicDrude { chi, .. }) => *chi = v,
            (SweepParameter::OmegaC, BathConfig::OhmicDrude { omega_c, .. }) => *omega_c = v,
            (SweepParameter::Beta, BathConfig::OhmicDrude { beta, .. }) => *beta = v,
            _ => {}
        }
        c
    }

    /// The configs to run: one per sweep value, or just this one.
    pub fn variants(&self) -> Vec<(Option<f64>, ExperimentConfig)> {
        match &self.sweep {
            None => vec![(None, self.clone())],
            Some(s) => s.values.iter().map(|&v| (Some(v), self.with_parameter(s.parameter, v))).collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        let mut model = Table::new();
        model.insert("kind".into(), self.model.kind.name().into());
        model.insert("epsilon".into(), self.model.epsilon.into());
        model.insert("delta".into(), self.model.delta.into());
        let state: Value = match &self.model.initial_state {
            InitialState::Excited => "excited".into(),
            InitialState::Ground => "ground".into(),
            InitialState::Plus => "plus".into(),
            InitialState::Coherent { theta, phi0 } => format!("coherent({theta:?}, {phi0:?})").into(),
            InitialState::Amplitudes(a) => {
                Value::Array(a.iter().map(|z| Value::Array(vec![z.re.into(), z.im.into()])).collect())
            }
        };
        model.insert("initial_state".into(), state);
        root.insert("model".into(), model.into());

        let mut bath = Table::new();
        match self.bath {
            BathConfig::Lorentzian { gamma0, lambda, omega0 } => {
                bath.insert("kind".into(), "lorentzian".into());
                bath.insert("gamma0".into(), gamma0.into());
                bath.insert("lambda".into(), lambda.into());
                bath.insert("omega0".into(), omega0.into());
                bath.insert("beta".into(), "zero".into());
            }
            BathConfig::OhmicDrude { chi, omega_c, beta } => {
                bath.insert("kind".into(), "ohmic_drude".into());
                bath.insert("chi".into(), chi.into());
                bath.insert("omega_c".into(), omega_c.into());
                bath.insert("beta".into(), beta.into());
            }
        }
        root.insert("bath".into(), bath.into());

        let s = &self.solver;
        let mut solver = Table::new();
        solver.insert("dt".into(), s.dt.map_or_else(|| "auto".into(), Value::from));
        solver.insert("L_start".into(), (s.l_start as i64).into());
        solver.insert("L_max".into(), (s.l_max as i64).into());
        solver.insert("conv_tol".into(), s.conv_tol.into());
        solver.insert(
            "matsubara_epsilon".into(),
            s.matsubara_epsilon.map_or_else(|| "auto".into(), |e| Value::from(e as i64)),
        );
        solver.insert("allow_unconverged".into(), s.allow_unconverged.into());
        solver.insert("fit_window".into(), (s.fit_window as i64).into());
        solver.insert("link_convention".into(), convention_name(s.link_convention).into());
        root.insert("solver".into(), solver.into());

        if let Some(sc) = self.scan {
            let mut scan = Table::new();
            scan.insert("tau_min".into(), sc.tau_min.into());
            scan.insert("tau_max".into(), sc.tau_max.into());
            scan.insert("points".into(), (sc.points as i64).into());
            scan.insert("spacing".into(), if sc.log_spacing { "log" } else { "linear" }.into());
            root.insert("scan".into(), scan.into());
        }
        if let Some(d) = self.dynamics {
            let mut dynamics = Table::new();
            dynamics.insert("t_max".into(), d.t_max.into());
            dynamics.insert("points".into(), (d.points as i64).into());
            dynamics.insert("distance".into(), d.distance.into());
            root.insert("dynamics".into(), dynamics.into());
        }
        if let Some(sw) = &self.sweep {
            let mut sweep = Table::new();
            sweep.insert("parameter".into(), sw.parameter.name().into());
            sweep.insert("values".into(), Value::Array(sw.values.iter().map(|&v| v.into()).collect()));
            root.insert("sweep".into(), sweep.into());
        }
        let mut output = Table::new();
        output.insert("directory".into(), self.output.directory.display().to_string().into());
        output.insert("emit_plots".into(), self.output.emit_plots.into());
        root.insert("output".into(), output.into());
        toml::to_string(&root).expect("a table of plain values always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEPHASING_QUBIT: &str = r#"
[model]
kind = "qubit"
epsilon = 1.0
delta = 0.0
initial_state = "plus"

[bath]
kind = "lorentzian"
gamma0 = 0.5
lambda = 0.05
omega0 = 0.0
beta = "zero"

[scan]
tau_min = 0.05
tau_max = 40.0
points = 50
"#;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(ConfigError::Invalid(v)) => v,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn dephasing_fixture_parses() {
        let cfg = parse_config(DEPHASING_QUBIT).unwrap();
        assert!(cfg.model_spec().is_pure_dephasing());
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.tau_grid().unwrap().len(), 50);
    }

    #[test]
    fn zero_beta_with_drude_rejected() {
        let text = DEPHASING_QUBIT.replace("kind = \"lorentzian\"", "kind = \"ohmic_drude\"\nchi = 0.05\nomega_c = 10.0");
        let v = violations(&text);
        assert!(v.iter().any(|m| m.contains("pairs only with the Lorentzian")), "{v:?}");
        // gamma0, lambda and omega0 do not belong to a Drude bath
        assert!(v.iter().any(|m| m.contains("bath.gamma0: unknown key")));
    }

    #[test]
    fn zero_tau_min_rejected() {
        let v = violations(&DEPHASING_QUBIT.replace("tau_min = 0.05", "tau_min = 0"));
        assert!(v.iter().any(|m| m.starts_with("scan.tau_min")), "{v:?}");
    }

    #[test]
    fn all_violations_reported() {
        let text = DEPHASING_QUBIT.replace("epsilon = 1.0", "epsilon = \"one\"").replace("gamma0 = 0.5", "gamma0 = -1").replace(
            "points = 50",
            "points = 50\nspacng = \"log\"",
        );
        let v = violations(&text);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn missing_tau_min_uses_default() {
        let cfg = parse_config(&DEPHASING_QUBIT.replace("tau_min = 0.05\n", "")).unwrap();
        assert_eq!(cfg.scan.unwrap().tau_min, 0.02);
    }

    #[test]
    fn initial_state_forms() {
        let with = |s: &str| parse_config(&DEPHASING_QUBIT.replace("initial_state = \"plus\"", s));
        let c = with("initial_state = \"coherent(1.5707963267948966, 0)\"").unwrap();
        assert!(matches!(c.model.initial_state, InitialState::Coherent { .. }));
        let c = with("initial_state = [[1, 0], [0, 1]]").unwrap();
        assert!((c.initial_state().unwrap().amplitudes()[1].im - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(with("initial_state = [[1, 0]]").is_err());
        assert!(with("initial_state = \"sideways\"").is_err());
    }

    #[test]
    fn sweep_checks_each_value() {
        let ok = format!("{DEPHASING_QUBIT}\n[sweep]\nparameter = \"lambda\"\nvalues = [0.05, 0.5, 5.0]\n");
        let cfg = parse_config(&ok).unwrap();
        let variants = cfg.variants();
        assert_eq!(variants.len(), 3);
        assert!(matches!(variants[2].1.bath, BathConfig::Lorentzian { lambda, .. } if lambda == 5.0));
        let bad = ok.replace("values = [0.05, 0.5, 5.0]", "values = [0.05, -1.0]");
        assert_eq!(violations(&bad).len(), 1);
        let wrong = ok.replace("\"lambda\"", "\"chi\"");
        assert!(violations(&wrong)[0].contains("does not apply"));
        let empty = ok.replace("values = [0.05, 0.5, 5.0]", "values = []");
        assert_eq!(parse_config(&empty).unwrap().variants().len(), 1);
    }

    #[test]
    fn round_trip() {
        let full = format!(
            "{}\n[solver]\ndt = 0.01\nL_max = 12\nmatsubara_epsilon = 3\n\n[dynamics]\nt_max = 5\npoints = 11\n\n[sweep]\nparameter = \"omega0\"\nvalues = [0.0, 1.5]\n\n[output]\ndirectory = \"runs/a\"\nemit_plots = true\n",
            DEPHASING_QUBIT.replace("initial_state = \"plus\"", "initial_state = [[0.6, 0.1], [0.0, -0.8]]")
        );
        for text in [DEPHASING_QUBIT.to_string(), full] {
            let cfg = parse_config(&text).unwrap();
            assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
        }
        let drude = "[model]\nkind = \"qutrit\"\nepsilon = 1\ninitial_state = \"coherent(0.3, 0.2)\"\n[bath]\nkind = \"ohmic_drude\"\nchi = 0.05\nomega_c = 10\nbeta = 0.5\n";
        let cfg = parse_config(drude).unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}
