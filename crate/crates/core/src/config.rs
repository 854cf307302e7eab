//! Run-configuration files: a flat, line-oriented `section.key = value`
//! format (diffable, language-neutral). Parsing collects *every* problem in
//! the file rather than stopping at the first, so one edit-compile loop
//! fixes a config.
//!
//! Required keys: `model.name`, `grid.n`, `solver.t_end`. Everything else
//! has a documented default. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::entropy::ToleranceOverrides;
use crate::grid::{build_grid, RectDomain, UniformGrid};
use crate::model::{builtin_model_pair, make_builtin, InitialData, ModelError, Problem};
use crate::solver::{FluxScheme, SolverConfig};
use crate::verify::{default_suite, OracleKind, SuiteConfig, VerifyError};

/// One problem found while parsing, tied to its line when applicable.
#[derive(Debug, Clone)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}", format_issues(.0))]
    Invalid(Vec<ConfigIssue>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Suite(#[from] VerifyError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    let body = issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n");
    format!("{} config error(s):\n{body}", issues.len())
}

/// Suite-level overrides a config may apply on top of [`default_suite`].
#[derive(Debug, Clone, Default)]
pub struct SuiteOverrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub oracle: Option<OracleKind>,
    pub refinement_levels: Option<Vec<usize>>,
    pub self_refinement_levels: Option<Vec<usize>>,
    pub contraction_pairs: Option<usize>,
    pub random_fields: Option<usize>,
    pub k_count: Option<usize>,
    pub steady_states: Option<bool>,
    pub convergence: Option<bool>,
    pub viscosity: Option<bool>,
    pub dirichlet_fixture: Option<bool>,
}

/// A fully parsed and validated configuration file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_name: String,
    pub model_params: BTreeMap<String, f64>,
    pub grid_n: Vec<usize>,
    pub domain_lo: Option<Vec<f64>>,
    pub domain_hi: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub t_end: f64,
    pub eps: f64,
    pub cfl_safety: f64,
    pub scheme: FluxScheme,
    pub max_steps: Option<usize>,
    pub snapshot_count: usize,
    pub output_dir: Option<PathBuf>,
    pub initial: Option<InitialData>,
    pub suite: SuiteOverrides,
    pub tolerances: ToleranceOverrides,
}

impl RunConfig {
    /// The rectangle this run lives on (defaults to the unit box).
    pub fn domain(&self) -> Result<RectDomain, ConfigError> {
        let dim = self.grid_n.len();
        match (&self.domain_lo, &self.domain_hi) {
            (None, None) => Ok(if dim == 1 {
                RectDomain::unit_interval()
            } else {
                RectDomain::unit_square()
            }),
            (Some(lo), Some(hi)) => Ok(RectDomain::new(lo.clone(), hi.clone())?),
            _ => Err(ConfigError::Invalid(vec![ConfigIssue {
                line: None,
                message: "domain.lo and domain.hi must be given together".into(),
            }])),
        }
    }

    pub fn grid(&self) -> Result<UniformGrid, ConfigError> {
        Ok(build_grid(self.domain()?, self.grid_n.clone())?)
    }

    /// Assemble and validate the problem this config describes.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let dim = self.grid_n.len();
        // make_builtin validates the parameter map even when we only need
        // the 2-D variant of the models.
        let template = make_builtin(&self.model_name, &self.model_params)?;
        let (flux, diffusion) = if dim == 1 {
            (template.flux.clone(), template.diffusion.clone())
        } else {
            builtin_model_pair(&self.model_name, &self.model_params, dim)?
        };
        let initial = match &self.initial {
            Some(explicit) => explicit.clone(),
            None => extend_initial(template.initial.clone(), dim),
        };
        let horizon = self
            .horizon
            .unwrap_or_else(|| template.horizon.max(self.t_end));
        let problem = Problem {
            domain: self.domain()?,
            horizon,
            flux,
            diffusion,
            initial,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut config = SolverConfig::new(self.t_end)
            .with_eps(self.eps)
            .with_scheme(self.scheme);
        config.cfl_safety = self.cfl_safety;
        if let Some(max_steps) = self.max_steps {
            config.max_steps = max_steps;
        }
        if self.snapshot_count > 0 {
            config = config.with_uniform_snapshots(self.snapshot_count);
        }
        config
    }

    /// The verification suite: the shipped default with this config's
    /// overrides applied.
    pub fn suite_config(&self) -> Result<SuiteConfig, ConfigError> {
        let mut suite = default_suite()?;
        let o = &self.suite;
        if let Some(seed) = o.seed {
            suite.seed = seed;
        }
        if let Some(threads) = o.threads {
            suite.threads = Some(threads);
        }
        if let Some(oracle) = o.oracle {
            suite.oracle = oracle;
        }
        if let Some(levels) = &o.refinement_levels {
            suite.refinement_levels = levels.clone();
        }
        if let Some(levels) = &o.self_refinement_levels {
            suite.self_refinement_levels = levels.clone();
        }
        if let Some(pairs) = o.contraction_pairs {
            suite.contraction_pairs = pairs;
        }
        if let Some(fields) = o.random_fields {
            suite.random_fields = fields;
        }
        if let Some(k) = o.k_count {
            suite.k_count = k;
        }
        if let Some(flag) = o.steady_states {
            suite.include_steady_states = flag;
        }
        if let Some(flag) = o.convergence {
            suite.include_convergence = flag;
        }
        if let Some(flag) = o.viscosity {
            suite.include_viscosity = flag;
        }
        if let Some(flag) = o.dirichlet_fixture {
            suite.inject_dirichlet_fixture = flag;
        }
        suite.overrides = self.tolerances.clone();
        Ok(suite)
    }
}

/// A 1-D default initial profile reused in 2-D: cosine series gain a
/// constant factor on the extra axis; steps already carry their axis.
fn extend_initial(initial: InitialData, dim: usize) -> InitialData {
    match initial {
        InitialData::CosineSeries { mut coeffs } => {
            while coeffs.len() < dim {
                coeffs.push(vec![1.0]);
            }
            InitialData::CosineSeries { coeffs }
        }
        other => other,
    }
}

struct RawLine {
    line: usize,
    key: String,
    value: String,
}

struct Collector {
    issues: Vec<ConfigIssue>,
}

impl Collector {
    fn push(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }
}

fn parse_typed<T: std::str::FromStr>(
    raw: &RawLine,
    what: &str,
    errs: &mut Collector,
) -> Option<T> {
    match raw.value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errs.push(
                Some(raw.line),
                format!("{} expects {what}, got `{}`", raw.key, raw.value),
            );
            None
        }
    }
}

fn parse_bool(raw: &RawLine, errs: &mut Collector) -> Option<bool> {
    match raw.value.as_str() {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        other => {
            errs.push(
                Some(raw.line),
                format!("{} expects true or false, got `{other}`", raw.key),
            );
            None
        }
    }
}

fn parse_list<T: std::str::FromStr>(
    raw: &RawLine,
    what: &str,
    errs: &mut Collector,
) -> Option<Vec<T>> {
    let items: Result<Vec<T>, _> = raw
        .value
        .split_whitespace()
        .map(|t| t.parse::<T>())
        .collect();
    match items {
        Ok(v) if !v.is_empty() => Some(v),
        _ => {
            errs.push(
                Some(raw.line),
                format!(
                    "{} expects a space-separated list of {what}, got `{}`",
                    raw.key, raw.value
                ),
            );
            None
        }
    }
}

#[derive(Default)]
struct StepBuilder {
    axis: Option<usize>,
    position: Option<f64>,
    left: Option<f64>,
    right: Option<f64>,
    seen: bool,
}

#[derive(Default)]
struct InitialBuilder {
    constant: Option<f64>,
    cosine: BTreeMap<usize, Vec<f64>>,
    file: Option<PathBuf>,
    step: StepBuilder,
}

impl InitialBuilder {
    fn finish(self, errs: &mut Collector) -> Option<InitialData> {
        let mut families = Vec::new();
        if self.constant.is_some() {
            families.push("initial.constant");
        }
        if !self.cosine.is_empty() {
            families.push("initial.cosine.*");
        }
        if self.file.is_some() {
            families.push("initial.file");
        }
        if self.step.seen {
            families.push("initial.step.*");
        }
        if families.len() > 1 {
            errs.push(
                None,
                format!(
                    "conflicting initial-data families: {}",
                    families.join(", ")
                ),
            );
            return None;
        }
        if let Some(c) = self.constant {
            return Some(InitialData::Constant(c));
        }
        if let Some(path) = self.file {
            return Some(InitialData::File(path));
        }
        if !self.cosine.is_empty() {
            let max_axis = *self.cosine.keys().max().unwrap();
            let mut coeffs = Vec::with_capacity(max_axis + 1);
            for axis in 0..=max_axis {
                match self.cosine.get(&axis) {
                    Some(c) => coeffs.push(c.clone()),
                    None => {
                        errs.push(
                            None,
                            format!("initial.cosine.axis{axis} is missing (axes must be contiguous from 0)"),
                        );
                        return None;
                    }
                }
            }
            return Some(InitialData::CosineSeries { coeffs });
        }
        if self.step.seen {
            match (
                self.step.axis,
                self.step.position,
                self.step.left,
                self.step.right,
            ) {
                (Some(axis), Some(position), Some(left), Some(right)) => {
                    return Some(InitialData::Step {
                        axis,
                        position,
                        left,
                        right,
                    });
                }
                _ => {
                    errs.push(
                        None,
                        "initial.step.* requires axis, position, left, and right",
                    );
                    return None;
                }
            }
        }
        None
    }
}

/// Parse a configuration file, collecting every error before failing.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut errs = Collector { issues: Vec::new() };
    let mut raw_lines = Vec::new();
    let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            errs.push(
                Some(line_no),
                format!("expected `key = value`, got `{trimmed}`"),
            );
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            errs.push(Some(line_no), "empty key before `=`");
            continue;
        }
        if value.is_empty() {
            errs.push(Some(line_no), format!("key `{key}` has an empty value"));
            continue;
        }
        if let Some(&first) = first_seen.get(&key) {
            errs.push(
                Some(line_no),
                format!("duplicate key `{key}` (lines {first} and {line_no})"),
            );
            continue;
        }
        first_seen.insert(key.clone(), line_no);
        raw_lines.push(RawLine {
            line: line_no,
            key,
            value,
        });
    }

    let mut model_name: Option<String> = None;
    let mut model_params: BTreeMap<String, f64> = BTreeMap::new();
    let mut grid_n: Option<Vec<usize>> = None;
    let mut domain_lo: Option<Vec<f64>> = None;
    let mut domain_hi: Option<Vec<f64>> = None;
    let mut horizon: Option<f64> = None;
    let mut t_end: Option<f64> = None;
    let mut eps = 0.0f64;
    let mut cfl_safety = 0.5f64;
    let mut scheme = FluxScheme::EngquistOsher;
    let mut max_steps: Option<usize> = None;
    let mut snapshot_count = 50usize;
    let mut output_dir: Option<PathBuf> = None;
    let mut initial = InitialBuilder::default();
    let mut suite = SuiteOverrides::default();
    let mut tolerances = ToleranceOverrides::default();

    for raw in &raw_lines {
        let line = Some(raw.line);
        match raw.key.as_str() {
            "model.name" => model_name = Some(raw.value.clone()),
            key if key.starts_with("model.param.") => {
                let param = key.trim_start_matches("model.param.").to_string();
                if param.is_empty() {
                    errs.push(line, "model.param. needs a parameter name");
                } else if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    model_params.insert(param, v);
                }
            }
            "grid.n" => {
                if let Some(n) = parse_list::<usize>(raw, "positive integers", &mut errs) {
                    if n.len() > 2 {
                        errs.push(line, "grid.n supports 1 or 2 axes");
                    } else if n.iter().any(|&v| v == 0) {
                        errs.push(line, "grid.n entries must be ≥ 1");
                    } else {
                        grid_n = Some(n);
                    }
                }
            }
            "domain.lo" => domain_lo = parse_list::<f64>(raw, "numbers", &mut errs),
            "domain.hi" => domain_hi = parse_list::<f64>(raw, "numbers", &mut errs),
            "problem.horizon" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v > 0.0 && v.is_finite() {
                        horizon = Some(v);
                    } else {
                        errs.push(line, "problem.horizon must be a finite positive number");
                    }
                }
            }
            "solver.t_end" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v > 0.0 && v.is_finite() {
                        t_end = Some(v);
                    } else {
                        errs.push(line, "solver.t_end must be a finite positive number");
                    }
                }
            }
            "solver.eps" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v >= 0.0 && v.is_finite() {
                        eps = v;
                    } else {
                        errs.push(line, "eps must be ≥ 0");
                    }
                }
            }
            "solver.cfl_safety" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v > 0.0 && v <= 1.0 {
                        cfl_safety = v;
                    } else {
                        errs.push(line, "solver.cfl_safety must lie in (0, 1]");
                    }
                }
            }
            "solver.scheme" => match raw.value.parse::<FluxScheme>() {
                Ok(s) => scheme = s,
                Err(e) => errs.push(line, e),
            },
            "solver.max_steps" => {
                max_steps = parse_typed::<usize>(raw, "a positive integer", &mut errs);
                if max_steps == Some(0) {
                    errs.push(line, "solver.max_steps must be ≥ 1");
                    max_steps = None;
                }
            }
            "solver.snapshots" => {
                if let Some(v) = parse_typed::<usize>(raw, "an integer", &mut errs) {
                    snapshot_count = v;
                }
            }
            "output.dir" => output_dir = Some(PathBuf::from(&raw.value)),
            "initial.constant" => {
                initial.constant = parse_typed::<f64>(raw, "a number", &mut errs);
            }
            "initial.file" => initial.file = Some(PathBuf::from(&raw.value)),
            key if key.starts_with("initial.cosine.axis") => {
                let axis_txt = key.trim_start_matches("initial.cosine.axis");
                match axis_txt.parse::<usize>() {
                    Ok(axis) if axis < 2 => {
                        if let Some(c) = parse_list::<f64>(raw, "numbers", &mut errs) {
                            initial.cosine.insert(axis, c);
                        }
                    }
                    _ => errs.push(
                        line,
                        format!("`{key}`: expected initial.cosine.axis0 or initial.cosine.axis1"),
                    ),
                }
            }
            "initial.step.axis" => {
                initial.step.seen = true;
                initial.step.axis = parse_typed::<usize>(raw, "an axis index", &mut errs);
            }
            "initial.step.position" => {
                initial.step.seen = true;
                initial.step.position = parse_typed::<f64>(raw, "a number", &mut errs);
            }
            "initial.step.left" => {
                initial.step.seen = true;
                initial.step.left = parse_typed::<f64>(raw, "a number", &mut errs);
            }
            "initial.step.right" => {
                initial.step.seen = true;
                initial.step.right = parse_typed::<f64>(raw, "a number", &mut errs);
            }
            "suite.seed" => suite.seed = parse_typed::<u64>(raw, "an integer", &mut errs),
            "suite.threads" => {
                suite.threads = parse_typed::<usize>(raw, "a positive integer", &mut errs);
                if suite.threads == Some(0) {
                    errs.push(line, "suite.threads must be ≥ 1");
                    suite.threads = None;
                }
            }
            "suite.oracle" => match raw.value.parse::<OracleKind>() {
                Ok(o) => suite.oracle = Some(o),
                Err(e) => errs.push(line, e),
            },
            "suite.refinement_levels" => {
                suite.refinement_levels =
                    parse_list::<usize>(raw, "positive integers", &mut errs);
            }
            "suite.self_refinement_levels" => {
                suite.self_refinement_levels =
                    parse_list::<usize>(raw, "positive integers", &mut errs);
            }
            "suite.contraction_pairs" => {
                suite.contraction_pairs = parse_typed::<usize>(raw, "an integer", &mut errs);
            }
            "suite.random_fields" => {
                suite.random_fields = parse_typed::<usize>(raw, "an integer", &mut errs);
            }
            "suite.k_count" => {
                suite.k_count = parse_typed::<usize>(raw, "an integer", &mut errs);
            }
            "suite.steady_states" => suite.steady_states = parse_bool(raw, &mut errs),
            "suite.convergence" => suite.convergence = parse_bool(raw, &mut errs),
            "suite.viscosity" => suite.viscosity = parse_bool(raw, &mut errs),
            "suite.dirichlet_fixture" => suite.dirichlet_fixture = parse_bool(raw, &mut errs),
            "tol.c_res" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v > 0.0 {
                        tolerances.c_res = Some(v);
                    } else {
                        errs.push(line, "tol.c_res must be > 0");
                    }
                }
            }
            "tol.c_bnd" => {
                if let Some(v) = parse_typed::<f64>(raw, "a number", &mut errs) {
                    if v > 0.0 {
                        tolerances.c_bnd = Some(v);
                    } else {
                        errs.push(line, "tol.c_bnd must be > 0");
                    }
                }
            }
            other => errs.push(line, format!("unknown key `{other}`")),
        }
    }

    for (key, have) in [
        ("model.name", model_name.is_some()),
        ("grid.n", grid_n.is_some()),
        ("solver.t_end", t_end.is_some()),
    ] {
        if !have && !first_seen.contains_key(key) {
            errs.push(None, format!("missing required key `{key}`"));
        }
    }
    if let (Some(h), Some(t)) = (horizon, t_end) {
        if h < t {
            errs.push(None, "problem.horizon must be ≥ solver.t_end");
        }
    }
    if let (Some(lo), Some(hi), Some(n)) = (&domain_lo, &domain_hi, &grid_n) {
        if lo.len() != n.len() || hi.len() != n.len() {
            errs.push(
                None,
                format!(
                    "domain.lo/hi have {}/{} entries but grid.n has {}",
                    lo.len(),
                    hi.len(),
                    n.len()
                ),
            );
        }
    }
    let initial = initial.finish(&mut errs);

    if !errs.issues.is_empty() {
        return Err(ConfigError::Invalid(errs.issues));
    }
    Ok(RunConfig {
        model_name: model_name.unwrap(),
        model_params,
        grid_n: grid_n.unwrap(),
        domain_lo,
        domain_hi,
        horizon,
        t_end: t_end.unwrap(),
        eps,
        cfl_safety,
        scheme,
        max_steps,
        snapshot_count,
        output_dir,
        initial,
        suite,
        tolerances,
    })
}

/// Parse and immediately resolve problem + grid, surfacing model-level
/// validation (for example unknown model names) as config errors.
pub fn load_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config = parse_config(text)?;
    config.problem()?;
    config.grid()?;
    Ok(config)
}
