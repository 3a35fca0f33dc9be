//! Flat `key = value` experiment configuration.
//!
//! Keys may be written dotted (`flow.kind = shear`) or grouped under a
//! `[flow]` section header. `#` starts a comment. Unknown keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{ModelParams, RunSetup, DEFAULT_CFL};
use crate::error::{ConfigError, ConfigIssue, KsError, Result};
use crate::flow::{make_flow, FlowKind, FlowSpec};
use crate::kernel::KernelSpec;
use crate::snapshot::read_snapshot;
use crate::spectral::{inverse_transform, ScalarField, SpectralField, TorusGrid};

/// Initial density generators.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `amplitude · exp(Σ_j (cos(x_j - c_j) - 1) / width²)`: a smooth periodic
    /// bump, Gaussian of standard deviation `width` near its center.
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// `offset + amplitude · g`, where `g` has random Fourier modes in
    /// `0 < |k| <= k_max` and is scaled to `max|g| = 1`.
    RandomBand {
        seed: u64,
        k_max: usize,
        amplitude: f64,
        offset: f64,
    },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub every: usize,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub flow: FlowKind,
    pub amplitude: f64,
    pub horizon: f64,
    pub dt_max: f64,
    pub c_cfl: f64,
    pub ic: InitialCondition,
    pub disable_nonlinear: bool,
    pub disable_dissipation: bool,
    /// Projection radius `N` used by the low-mode diagnostics.
    pub diag_modes: usize,
    pub output: OutputSpec,
}

const KNOWN_KEYS: &[&str] = &[
    "dim",
    "n",
    "alpha",
    "beta",
    "A",
    "T",
    "dt_max",
    "c_cfl",
    "disable_nonlinear",
    "disable_dissipation",
    "diag.N",
    "flow.kind",
    "flow.m",
    "flow.gamma",
    "flow.tau_sw",
    "flow.seed",
    "flow.files",
    "ic.kind",
    "ic.amplitude",
    "ic.width",
    "ic.center",
    "ic.seed",
    "ic.k_max",
    "ic.offset",
    "ic.path",
    "output.dir",
    "output.every",
    "output.snapshots",
];

/// Shorthand spellings accepted for some keys.
fn canonical(key: &str) -> &str {
    match key {
        "flow" => "flow.kind",
        "ic" => "ic.kind",
        "amplitude" => "A",
        "horizon" => "T",
        "diag_modes" => "diag.N",
        other => other,
    }
}

struct Doc {
    entries: BTreeMap<String, String>,
    issues: Vec<ConfigIssue>,
}

impl Doc {
    fn issue(&mut self, key: &str, constraint: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            constraint: constraint.into(),
        });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>, what: &str) -> Option<T> {
        match self.raw(key).map(str::to_string) {
            Some(v) => match v.parse::<T>() {
                Ok(x) => Some(x),
                Err(_) => {
                    self.issue(key, format!("expected {what}, got `{v}`"));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.issue(key, "required key is missing");
                }
                default
            }
        }
    }

    fn real(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        let v = self.parsed::<f64>(key, default, "a real number")?;
        if !v.is_finite() {
            self.issue(key, "must be finite");
            return None;
        }
        Some(v)
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key).map(str::to_string) {
            None => default,
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => {
                    self.issue(key, format!("expected true or false, got `{v}`"));
                    default
                }
            },
        }
    }

    fn reals(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(key)?.to_string();
        let parsed: std::result::Result<Vec<f64>, _> =
            v.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(list) => Some(list),
            Err(_) => {
                self.issue(key, format!("expected a comma-separated list of reals, got `{v}`"));
                None
            }
        }
    }
}

fn tokenize(text: &str) -> Doc {
    let mut doc = Doc {
        entries: BTreeMap::new(),
        issues: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            section = if name.is_empty() { None } else { Some(name.to_string()) };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            doc.issue(&format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"));
            continue;
        };
        let key = key.trim();
        let full = match &section {
            Some(s) if !key.contains('.') => format!("{s}.{key}"),
            _ => key.to_string(),
        };
        let full = canonical(&full).to_string();
        if !KNOWN_KEYS.contains(&full.as_str()) {
            doc.issue(&full, "unknown key");
            continue;
        }
        let value = value.trim().trim_matches('"').to_string();
        if doc.entries.insert(full.clone(), value).is_some() {
            doc.issue(&full, "key given more than once");
        }
    }
    doc
}

/// Parses and validates a configuration document. Every violated constraint
/// is reported, each naming its key.
pub fn parse_config(text: &str) -> std::result::Result<SimConfig, ConfigError> {
    let mut doc = tokenize(text);

    let dim = doc.parsed::<usize>("dim", None, "an integer");
    let n = doc.parsed::<usize>("n", None, "an integer");
    let alpha = doc.real("alpha", Some(0.0));
    let beta = doc.real("beta", None);
    let amplitude = doc.real("A", None);
    let horizon = doc.real("T", None);
    let dt_max = doc.real("dt_max", Some(0.01));
    let c_cfl = doc.real("c_cfl", Some(DEFAULT_CFL));
    let disable_nonlinear = doc.bool("disable_nonlinear", false);
    let disable_dissipation = doc.bool("disable_dissipation", false);
    let diag_modes = doc.parsed::<usize>("diag.N", Some(4), "an integer");
    let every = doc.parsed::<usize>("output.every", Some(10), "an integer");
    let snapshots = doc.bool("output.snapshots", false);
    let dir = PathBuf::from(doc.raw("output.dir").unwrap_or("out"));

    if let Some(d) = dim {
        if !(2..=3).contains(&d) {
            doc.issue("dim", format!("must be 2 or 3, got {d}"));
        }
    }
    if let Some(n) = n {
        if n < 8 || n % 2 != 0 {
            doc.issue("n", format!("must be even and >= 8, got {n}"));
        }
    }
    if let Some(a) = alpha {
        if !(0.0..=2.0).contains(&a) {
            doc.issue("alpha", format!("must lie in [0, 2], got {a}"));
        }
    }
    if let (Some(b), Some(d)) = (beta, dim) {
        if !(b >= 2.0 && b < d as f64) {
            doc.issue(
                "beta",
                format!("weak-singularity regime violated: need 2 <= beta < dim = {d}, got {b}"),
            );
        }
    }
    if let Some(a) = amplitude {
        if a < 0.0 {
            doc.issue("A", format!("must be >= 0, got {a}"));
        }
    }
    for (key, v) in [("T", horizon), ("dt_max", dt_max), ("c_cfl", c_cfl)] {
        if let Some(v) = v {
            if v <= 0.0 {
                doc.issue(key, format!("must be positive, got {v}"));
            }
        }
    }
    if every == Some(0) {
        doc.issue("output.every", "must be >= 1");
    }
    if diag_modes == Some(0) {
        doc.issue("diag.N", "must be >= 1");
    }

    let flow = parse_flow(&mut doc, dim);
    let ic = parse_ic(&mut doc, dim);

    if !doc.issues.is_empty() {
        return Err(ConfigError { issues: doc.issues });
    }
    let config = SimConfig {
        dim: dim.unwrap(),
        n: n.unwrap(),
        alpha: alpha.unwrap(),
        beta: beta.unwrap(),
        flow: flow.unwrap(),
        amplitude: amplitude.unwrap(),
        horizon: horizon.unwrap(),
        dt_max: dt_max.unwrap(),
        c_cfl: c_cfl.unwrap(),
        ic: ic.unwrap(),
        disable_nonlinear,
        disable_dissipation,
        diag_modes: diag_modes.unwrap(),
        output: OutputSpec {
            dir,
            every: every.unwrap(),
            snapshots,
        },
    };
    config.validate_initial_data()?;
    Ok(config)
}

fn parse_flow(doc: &mut Doc, dim: Option<usize>) -> Option<FlowKind> {
    let kind = doc.raw("flow.kind").map(str::to_string);
    let Some(kind) = kind else {
        doc.issue("flow.kind", "required key is missing");
        return None;
    };
    match kind.as_str() {
        "zero" => Some(FlowKind::Zero),
        "shear" => {
            let m = doc.parsed::<u32>("flow.m", Some(1), "a positive integer")?;
            if m == 0 {
                doc.issue("flow.m", "must be >= 1");
                return None;
            }
            Some(FlowKind::Shear { wavenumber: m })
        }
        "relaxed-linear" => {
            let gamma = doc.real("flow.gamma", Some(0.5 * (5f64.sqrt() - 1.0)))?;
            Some(FlowKind::RelaxedLinear { gamma })
        }
        "alternating-shear" => {
            let tau = doc.real("flow.tau_sw", Some(0.5));
            let seed = doc.raw("flow.seed").map(str::to_string);
            let seed = match seed {
                None => {
                    doc.issue("flow.seed", "a seed is mandatory for alternating-shear");
                    None
                }
                Some(s) => match s.parse::<u64>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        doc.issue("flow.seed", format!("expected an unsigned integer, got `{s}`"));
                        None
                    }
                },
            };
            if let Some(t) = tau {
                if t <= 0.0 {
                    doc.issue("flow.tau_sw", format!("must be positive, got {t}"));
                    return None;
                }
            }
            Some(FlowKind::AlternatingShear {
                half_period: tau?,
                seed: seed?,
            })
        }
        "from-file" => {
            let Some(files) = doc.raw("flow.files").map(str::to_string) else {
                doc.issue("flow.files", "required for from-file flows");
                return None;
            };
            let paths: Vec<PathBuf> = files.split(',').map(|s| PathBuf::from(s.trim())).collect();
            if let Some(d) = dim {
                if paths.len() != d {
                    doc.issue("flow.files", format!("need {d} component files, got {}", paths.len()));
                    return None;
                }
            }
            Some(FlowKind::FromFile { paths })
        }
        other => {
            doc.issue(
                "flow.kind",
                format!("unknown flow `{other}` (zero, shear, relaxed-linear, alternating-shear, from-file)"),
            );
            None
        }
    }
}

fn parse_ic(doc: &mut Doc, dim: Option<usize>) -> Option<InitialCondition> {
    let kind = doc.raw("ic.kind").unwrap_or("gaussian-bump").to_string();
    match kind.as_str() {
        "gaussian-bump" => {
            let amplitude = doc.real("ic.amplitude", Some(1.0));
            let width = doc.real("ic.width", Some(0.5));
            let center = match doc.reals("ic.center") {
                Some(c) => {
                    if dim.is_some_and(|d| c.len() != d) {
                        doc.issue("ic.center", format!("need {} coordinates, got {}", dim.unwrap(), c.len()));
                        return None;
                    }
                    Some(c)
                }
                None if doc.raw("ic.center").is_some() => None,
                None => Some(vec![PI; dim.unwrap_or(3)]),
            };
            if let Some(w) = width {
                if w <= 0.0 {
                    doc.issue("ic.width", format!("must be positive, got {w}"));
                    return None;
                }
            }
            Some(InitialCondition::GaussianBump {
                amplitude: amplitude?,
                width: width?,
                center: center?,
            })
        }
        "random-band" => {
            let seed = doc.parsed::<u64>("ic.seed", None, "an unsigned integer");
            let k_max = doc.parsed::<usize>("ic.k_max", Some(4), "an integer");
            let amplitude = doc.real("ic.amplitude", Some(1.0));
            let offset = doc.real("ic.offset", Some(0.0));
            if k_max == Some(0) {
                doc.issue("ic.k_max", "must be >= 1");
                return None;
            }
            Some(InitialCondition::RandomBand {
                seed: seed?,
                k_max: k_max?,
                amplitude: amplitude?,
                offset: offset?,
            })
        }
        "file" => match doc.raw("ic.path") {
            Some(p) => Some(InitialCondition::File { path: PathBuf::from(p) }),
            None => {
                doc.issue("ic.path", "required for file initial data");
                None
            }
        },
        other => {
            doc.issue("ic.kind", format!("unknown initial condition `{other}` (gaussian-bump, random-band, file)"));
            None
        }
    }
}

impl InitialCondition {
    pub fn build(&self, grid: TorusGrid) -> Result<ScalarField> {
        match self {
            InitialCondition::GaussianBump { amplitude, width, center } => {
                let inv = 1.0 / (width * width);
                Ok(ScalarField::from_fn(grid, |x| {
                    let e: f64 = x.iter().zip(center).map(|(xi, ci)| (xi - ci).cos() - 1.0).sum();
                    amplitude * (e * inv).exp()
                }))
            }
            InitialCondition::RandomBand { seed, k_max, amplitude, offset } => {
                let g = random_band(grid, *seed, *k_max);
                Ok(g.map(|v| offset + amplitude * v))
            }
            InitialCondition::File { path } => {
                let f = read_snapshot(path)?;
                grid.check_same(&f.grid())?;
                Ok(f)
            }
        }
    }
}

/// Mean-free field with independent Gaussian coefficients on `0 < |k| <= k_max`,
/// Hermitian, scaled to `max|f| = 1`.
pub fn random_band(grid: TorusGrid, seed: u64, k_max: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = grid.tables();
    let mut hat = SpectralField::zeros(grid);
    let r2 = (k_max * k_max) as f64;
    for i in 0..grid.len() {
        let j = t.neg[i];
        if t.kmag2[i] == 0.0 || t.kmag2[i] > r2 || t.nyquist[i] || j < i {
            continue;
        }
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        hat.coeffs_mut()[i] = c;
        hat.coeffs_mut()[j] = c.conj();
    }
    let f = inverse_transform(&hat);
    let m = f.max_abs();
    if m > 0.0 {
        f.scaled(1.0 / m)
    } else {
        f
    }
}

impl SimConfig {
    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.n)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.dim, self.beta)
    }

    pub fn flow_spec(&self) -> Result<FlowSpec> {
        FlowSpec::new(self.flow.clone(), self.amplitude)
    }

    pub fn model(&self) -> Result<ModelParams> {
        let mut p = ModelParams::new(self.alpha, self.kernel()?, self.amplitude)?;
        if self.disable_nonlinear {
            p = p.without_nonlinearity();
        }
        p.dissipation = !self.disable_dissipation;
        Ok(p)
    }

    pub fn initial_field(&self) -> Result<ScalarField> {
        self.ic.build(self.grid()?)
    }

    fn validate_initial_data(&self) -> std::result::Result<(), ConfigError> {
        if matches!(self.ic, InitialCondition::File { .. }) {
            return Ok(());
        }
        let field = self
            .initial_field()
            .map_err(|e| ConfigError::single("ic", e.to_string()))?;
        if !self.disable_nonlinear && field.min() < 0.0 {
            return Err(ConfigError::single(
                "ic",
                format!(
                    "initial density must be nonnegative when the nonlinear term is enabled (min = {:.3e})",
                    field.min()
                ),
            ));
        }
        Ok(())
    }

    /// Resolves flow, kernel and initial data into a runnable setup.
    pub fn setup(&self) -> Result<RunSetup> {
        let grid = self.grid()?;
        let rho0 = self.initial_field()?;
        if !self.disable_nonlinear && rho0.min() < 0.0 {
            return Err(ConfigError::single("ic", "initial density must be nonnegative").into());
        }
        Ok(RunSetup {
            params: self.model()?,
            flow: Arc::new(make_flow(&self.flow_spec()?, grid)?),
            rho0,
            horizon: self.horizon,
            c_cfl: self.c_cfl,
            dt_max: self.dt_max,
            output_every: self.output.every,
            diag_modes: self.diag_modes,
            diag_kernel: Some(self.kernel()?),
        })
    }

    /// Reads and parses a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| KsError::io(path, e))?;
        Ok(parse_config(&text)?)
    }

    /// Copy with a different advection amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> SimConfig {
        SimConfig {
            amplitude,
            ..self.clone()
        }
    }
}
