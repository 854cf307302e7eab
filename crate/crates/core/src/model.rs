//! Model data: convective fluxes `f`, degenerate diffusion operators `B`,
//! initial data, and complete problem statements, plus structural validators.
//!
//! The admissible class is
//!
//! * `f : [0, M] → ℝᴺ`, Lipschitz, with `f(0) = f(M) = 0` componentwise
//!   (so the constant states 0 and M are equilibria and the zero-flux
//!   boundary condition admits them exactly);
//! * `B : [0, M] → ℝ`, nondecreasing, Lipschitz, `B(0) = 0`; `B′` may vanish
//!   identically on `[0, u_c]` (strong degeneracy).
//!
//! Everything is closed-form: models carry their own exact derivatives, which
//! the solver uses for flux splitting and stability bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{Field, GridError, RectDomain, UniformGrid};

/// Number of sample intervals used by sampled suprema and validators.
const SUP_SAMPLES: usize = 2048;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` does not take a parameter `{key}`")]
    UnknownParameter { model: String, key: String },
    #[error("parameter {key} = {value} out of admissible range: {why}")]
    ParameterOutOfRange {
        key: String,
        value: f64,
        why: String,
    },
    #[error("flux must have 1 or 2 components, got {0}")]
    BadComponentCount(usize),
    #[error("saturation M = {0} must be positive and finite")]
    BadSaturation(f64),
    #[error("model function returned a non-finite value at u = {0}")]
    NonFiniteModelValue(f64),
    #[error("probe parameters invalid: {0}")]
    BadProbeParams(String),
    #[error("validation sample count {0} too small (need ≥ 2)")]
    TooFewSamples(usize),
    #[error("initial data out of bounds at cell {cell}: u0 = {value}, admissible [0, {m}]")]
    InitialOutOfBounds { cell: usize, value: f64, m: f64 },
    #[error("initial data: {0}")]
    BadInitialData(String),
    #[error("flux dimension {flux} does not match domain dimension {domain}")]
    DimensionMismatch { flux: usize, domain: usize },
    #[error("time horizon T = {0} must be positive and finite")]
    BadHorizon(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("reading initial data file: {0}")]
    InitialFile(String),
}

/// A shared closed-form scalar function of the state.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.0)(u)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// One directional component of the convective flux with its exact derivative.
#[derive(Debug, Clone)]
pub struct FluxComponent {
    pub f: ScalarFn,
    pub df: ScalarFn,
}

impl FluxComponent {
    pub fn zero() -> Self {
        Self {
            f: ScalarFn::zero(),
            df: ScalarFn::zero(),
        }
    }
}

/// Convective flux `f(u) ∈ ℝᴺ` on the state interval `[0, M]`.
#[derive(Debug, Clone)]
pub struct FluxModel {
    m: f64,
    components: Vec<FluxComponent>,
}

impl FluxModel {
    pub fn new(m: f64, components: Vec<FluxComponent>) -> Result<Self, ModelError> {
        if !(m.is_finite() && m > 0.0) {
            return Err(ModelError::BadSaturation(m));
        }
        if components.is_empty() || components.len() > 2 {
            return Err(ModelError::BadComponentCount(components.len()));
        }
        Ok(Self { m, components })
    }

    pub fn zero(m: f64, dim: usize) -> Result<Self, ModelError> {
        Self::new(m, (0..dim).map(|_| FluxComponent::zero()).collect())
    }

    /// Saturation state M (upper bound of the invariant region).
    pub fn saturation(&self) -> f64 {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn f(&self, axis: usize, u: f64) -> f64 {
        self.components[axis].f.eval(u)
    }

    #[inline]
    pub fn df(&self, axis: usize, u: f64) -> f64 {
        self.components[axis].df.eval(u)
    }

    /// Sampled `sup_{[0,M]} max_axis |f_axis|`.
    pub fn sup_abs_f(&self) -> f64 {
        self.sampled_sup(|axis, u| self.f(axis, u).abs())
    }

    /// Sampled `sup_{[0,M]} max_axis |f_axis′|` (Lipschitz constant estimate).
    pub fn sup_abs_df(&self) -> f64 {
        self.sampled_sup(|axis, u| self.df(axis, u).abs())
    }

    fn sampled_sup(&self, g: impl Fn(usize, f64) -> f64) -> f64 {
        let mut sup: f64 = 0.0;
        for axis in 0..self.dim() {
            for i in 0..=SUP_SAMPLES {
                let u = self.m * i as f64 / SUP_SAMPLES as f64;
                sup = sup.max(g(axis, u));
            }
        }
        sup
    }
}

/// Diffusion operator `B(u)` with exact derivative `B′ ≥ 0`; `u_c` marks the
/// top of the known degeneracy interval `[0, u_c]` when the model has one.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    b: ScalarFn,
    db: ScalarFn,
    u_c: Option<f64>,
}

impl DiffusionModel {
    pub fn new(b: ScalarFn, db: ScalarFn, u_c: Option<f64>) -> Self {
        Self { b, db, u_c }
    }

    /// `B ≡ 0`: the purely hyperbolic case.
    pub fn none() -> Self {
        Self::new(ScalarFn::zero(), ScalarFn::zero(), None)
    }

    /// `B(u) = d·u`, the uniformly parabolic (heat) case.
    pub fn linear(d: f64) -> Result<Self, ModelError> {
        if !(d.is_finite() && d > 0.0) {
            return Err(ModelError::ParameterOutOfRange {
                key: "d".into(),
                value: d,
                why: "diffusivity must be positive".into(),
            });
        }
        Ok(Self::new(
            ScalarFn::new(move |u| d * u),
            ScalarFn::new(move |_| d),
            None,
        ))
    }

    #[inline]
    pub fn b(&self, u: f64) -> f64 {
        self.b.eval(u)
    }

    #[inline]
    pub fn db(&self, u: f64) -> f64 {
        self.db.eval(u)
    }

    pub fn u_c(&self) -> Option<f64> {
        self.u_c
    }

    /// Sampled `sup_{[0,M]} B′` (diffusion Lipschitz constant estimate).
    pub fn sup_db(&self, m: f64) -> f64 {
        (0..=SUP_SAMPLES)
            .map(|i| self.db(m * i as f64 / SUP_SAMPLES as f64))
            .fold(0.0, f64::max)
    }
}

/// A shared closed-form profile `x ↦ u0(x)`.
#[derive(Clone)]
pub struct ProfileFn(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl ProfileFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ProfileFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ProfileFn(..)")
    }
}

/// Initial data specification; sampled at cell centers and required to take
/// values in `[0, M]`.
#[derive(Debug, Clone)]
pub enum InitialData {
    Constant(f64),
    /// `left` where `x[axis] < position`, `right` elsewhere.
    Step {
        axis: usize,
        position: f64,
        left: f64,
        right: f64,
    },
    /// Product over axes of Neumann cosine series
    /// `Σ_m coeffs[axis][m] · cos(mπ(x − lo)/L)`.
    CosineSeries { coeffs: Vec<Vec<f64>> },
    /// Arbitrary closed-form profile.
    Profile(ProfileFn),
    /// Cell values read from a snapshot CSV on the same grid.
    File(PathBuf),
}

impl InitialData {
    fn sample(&self, grid: &UniformGrid) -> Result<Vec<f64>, ModelError> {
        match self {
            InitialData::Constant(c) => Ok(vec![*c; grid.cell_count()]),
            InitialData::Step {
                axis,
                position,
                left,
                right,
            } => {
                if *axis >= grid.dim() {
                    return Err(ModelError::BadInitialData(format!(
                        "step axis {axis} out of range for dimension {}",
                        grid.dim()
                    )));
                }
                Ok((0..grid.cell_count())
                    .map(|c| {
                        if grid.center(c)[*axis] < *position {
                            *left
                        } else {
                            *right
                        }
                    })
                    .collect())
            }
            InitialData::CosineSeries { coeffs } => {
                if coeffs.len() != grid.dim() {
                    return Err(ModelError::BadInitialData(format!(
                        "cosine series has {} axis groups, grid has dimension {}",
                        coeffs.len(),
                        grid.dim()
                    )));
                }
                Ok((0..grid.cell_count())
                    .map(|c| {
                        let x = grid.center(c);
                        (0..grid.dim())
                            .map(|a| {
                                let lo = grid.domain().lo(a);
                                let len = grid.domain().extent(a);
                                coeffs[a]
                                    .iter()
                                    .enumerate()
                                    .map(|(m, &am)| {
                                        am * (m as f64 * std::f64::consts::PI * (x[a] - lo) / len)
                                            .cos()
                                    })
                                    .sum::<f64>()
                            })
                            .product()
                    })
                    .collect())
            }
            InitialData::Profile(p) => Ok((0..grid.cell_count())
                .map(|c| p.eval(&grid.center(c)))
                .collect()),
            InitialData::File(path) => {
                let field = crate::io::read_snapshot(path, grid)
                    .map_err(|e| ModelError::InitialFile(e.to_string()))?;
                Ok(field.values().to_vec())
            }
        }
    }
}

/// A complete initial–boundary value problem on a rectangle.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: RectDomain,
    /// Time horizon T > 0.
    pub horizon: f64,
    pub flux: FluxModel,
    pub diffusion: DiffusionModel,
    pub initial: InitialData,
}

impl Problem {
    /// Structural validation: dimensions agree, horizon positive, flux
    /// vanishes at both ends of the state interval.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.flux.dim() != self.domain.dim() {
            return Err(ModelError::DimensionMismatch {
                flux: self.flux.dim(),
                domain: self.domain.dim(),
            });
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ModelError::BadHorizon(self.horizon));
        }
        let report = validate_zero_endpoints(&self.flux)?;
        if !report.passed {
            return Err(ModelError::ParameterOutOfRange {
                key: "flux".into(),
                value: report.worst,
                why: "flux must vanish at u = 0 and u = M".into(),
            });
        }
        Ok(())
    }

    /// Sample the initial data on `grid`, checking the `[0, M]` bound.
    pub fn initial_field(&self, grid: &UniformGrid) -> Result<Field, ModelError> {
        let values = self.initial.sample(grid)?;
        let m = self.flux.saturation();
        for (cell, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=m).contains(&v) {
                return Err(ModelError::InitialOutOfBounds { cell, value: v, m });
            }
        }
        Ok(Field::from_values(grid, values)?)
    }

    pub fn with_initial(mut self, initial: InitialData) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Outcome of a sampled structural check, with the worst measured violation.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub check: &'static str,
    pub passed: bool,
    pub tolerance: f64,
    /// Largest measured violation magnitude (0 when clean).
    pub worst: f64,
    pub details: Vec<String>,
}

/// Check `f(0) = f(M) = 0` componentwise to absolute tolerance `1e-12·(1+sup|f|)`.
pub fn validate_zero_endpoints(flux: &FluxModel) -> Result<ValidationReport, ModelError> {
    let m = flux.saturation();
    let tolerance = 1e-12 * (1.0 + flux.sup_abs_f());
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for axis in 0..flux.dim() {
        for u in [0.0, m] {
            let v = flux.f(axis, u);
            if !v.is_finite() {
                return Err(ModelError::NonFiniteModelValue(u));
            }
            details.push(format!("axis {axis}: |f({u})| = {:e}", v.abs()));
            worst = worst.max(v.abs());
        }
    }
    Ok(ValidationReport {
        check: "zero_endpoints",
        passed: worst <= tolerance,
        tolerance,
        worst,
        details,
    })
}

/// Check the strong-degeneracy structure when `u_c` is declared:
/// `B′ ≤ 1e-12` on `[0, u_c]`, `B′ > 0` on `(u_c, M]`, and `|f| ≤ 1e-12·scale`
/// on `[u_c, M]`, each at `samples` uniform points. Returns `None` (not
/// applicable, distinct from failure) when the model declares no `u_c`.
pub fn validate_degeneracy_structure(
    flux: &FluxModel,
    diffusion: &DiffusionModel,
    samples: usize,
) -> Result<Option<ValidationReport>, ModelError> {
    let Some(u_c) = diffusion.u_c() else {
        return Ok(None);
    };
    if samples < 2 {
        return Err(ModelError::TooFewSamples(samples));
    }
    let m = flux.saturation();
    let flat_tol = 1e-12;
    let flux_tol = 1e-12 * (1.0 + flux.sup_abs_f());
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();

    // B′ ≈ 0 on the degenerate interval [0, u_c].
    for i in 0..=samples {
        let u = u_c * i as f64 / samples as f64;
        let db = diffusion.db(u);
        if !db.is_finite() {
            return Err(ModelError::NonFiniteModelValue(u));
        }
        if db.abs() > flat_tol {
            worst = worst.max(db.abs());
            details.push(format!("B'({u}) = {db:e} on the degenerate interval"));
        }
    }
    // B′ strictly positive above u_c.
    for i in 1..=samples {
        let u = u_c + (m - u_c) * i as f64 / samples as f64;
        let db = diffusion.db(u);
        if !(db.is_finite() && db > 0.0) {
            worst = worst.max(1.0);
            details.push(format!("B'({u}) = {db:e} not positive above u_c"));
        }
    }
    // Flux vanishes on the parabolic interval [u_c, M].
    for axis in 0..flux.dim() {
        for i in 0..=samples {
            let u = u_c + (m - u_c) * i as f64 / samples as f64;
            let v = flux.f(axis, u);
            if !v.is_finite() {
                return Err(ModelError::NonFiniteModelValue(u));
            }
            if v.abs() > flux_tol {
                worst = worst.max(v.abs());
                details.push(format!("axis {axis}: f({u}) = {v:e} above u_c"));
            }
        }
    }

    Ok(Some(ValidationReport {
        check: "degeneracy_structure",
        passed: details.is_empty(),
        tolerance: flux_tol,
        worst,
        details,
    }))
}

/// Estimated degenerate-set measure for one probe direction `(τ, ξ)`.
#[derive(Debug, Clone)]
pub struct DirectionEstimate {
    pub tau: f64,
    pub xi: Vec<f64>,
    /// Estimated Lebesgue measure of
    /// `{u ∈ [0,M] : |τ + ξ·f′(u)| < tol and B′(u)|ξ|² < tol}`.
    pub measure: f64,
}

/// Sample directions `(τ, ξ)` on the unit sphere of ℝ^{1+N} and estimate, for
/// each, the measure of states where the direction is simultaneously
/// characteristic for the flux and degenerate for the diffusion. The
/// nonlinearity–diffusivity condition demands these measures vanish; the
/// probe reports the sampled estimates so callers can assert smallness.
pub fn nd_condition_probe(
    flux: &FluxModel,
    diffusion: &DiffusionModel,
    directions: usize,
    u_samples: usize,
    tol: f64,
) -> Result<Vec<DirectionEstimate>, ModelError> {
    if directions == 0 {
        return Err(ModelError::BadProbeParams("directions must be ≥ 1".into()));
    }
    if u_samples < 16 {
        return Err(ModelError::BadProbeParams(format!(
            "u_samples = {u_samples} too small (≥ 16)"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ModelError::BadProbeParams(format!("tol = {tol} not positive")));
    }

    let m = flux.saturation();
    let dim = flux.dim();
    let dirs: Vec<(f64, Vec<f64>)> = match dim {
        1 => (0..directions)
            .map(|j| {
                let theta = std::f64::consts::PI * j as f64 / directions as f64;
                (theta.cos(), vec![theta.sin()])
            })
            .collect(),
        2 => (0..directions)
            .map(|j| {
                // Fibonacci sphere points on S² ⊂ ℝ³, (τ, ξ₁, ξ₂).
                let tau = 1.0 - (2.0 * j as f64 + 1.0) / directions as f64;
                let r = (1.0 - tau * tau).max(0.0).sqrt();
                let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                let phi = golden * j as f64;
                (tau, vec![r * phi.cos(), r * phi.sin()])
            })
            .collect(),
        d => return Err(ModelError::BadComponentCount(d)),
    };

    let du = m / u_samples as f64;
    Ok(dirs
        .into_iter()
        .map(|(tau, xi)| {
            let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
            let mut count = 0usize;
            for i in 0..u_samples {
                let u = (i as f64 + 0.5) * du;
                let characteristic =
                    tau + (0..dim).map(|a| xi[a] * flux.df(a, u)).sum::<f64>();
                if characteristic.abs() < tol && diffusion.db(u) * xi_sq < tol {
                    count += 1;
                }
            }
            DirectionEstimate {
                tau,
                xi,
                measure: count as f64 * du,
            }
        })
        .collect())
}

/// Names of the built-in models, in catalogue order.
pub const BUILTIN_NAMES: [&str; 3] = ["batch_sedimentation", "heat", "zero_flux_conservation"];

/// Documentation rows for the `models` CLI listing:
/// `(name, summary, [(param, default, doc)])`.
pub fn builtin_catalog() -> Vec<(&'static str, &'static str, Vec<(&'static str, f64, &'static str)>)>
{
    vec![
        (
            "batch_sedimentation",
            "settling suspension: f(u) = v0·u·(1−u/u_c)² below u_c, 0 above; \
             B' = 0 below u_c, B(u) = kappa·(u−u_c)² above (strongly degenerate)",
            vec![
                ("v0", 1.0, "Stokes settling velocity scale, > 0"),
                ("u_c", 0.5, "critical concentration in (0, m)"),
                ("kappa", 0.25, "compression modulus, > 0"),
                ("m", 1.0, "saturation concentration, > 0"),
            ],
        ),
        (
            "heat",
            "pure diffusion: f ≡ 0, B(u) = d·u (uniformly parabolic reference)",
            vec![
                ("d", 0.1, "diffusivity, > 0"),
                ("m", 1.0, "saturation state, > 0"),
            ],
        ),
        (
            "zero_flux_conservation",
            "pure convection: f(u) = u·(1−u/m), B ≡ 0 (hyperbolic reference)",
            vec![("m", 1.0, "saturation state, > 0")],
        ),
    ]
}

fn take_params(
    name: &str,
    params: &BTreeMap<String, f64>,
    allowed: &[(&str, f64)],
) -> Result<BTreeMap<String, f64>, ModelError> {
    for key in params.keys() {
        if !allowed.iter().any(|(k, _)| k == key) {
            return Err(ModelError::UnknownParameter {
                model: name.into(),
                key: key.clone(),
            });
        }
    }
    Ok(allowed
        .iter()
        .map(|&(k, default)| (k.to_string(), *params.get(k).unwrap_or(&default)))
        .collect())
}

fn require_positive(key: &str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::ParameterOutOfRange {
            key: key.into(),
            value,
            why: "must be positive and finite".into(),
        })
    }
}

/// Build the flux/diffusion pair of a built-in model for a given spatial
/// dimension. In 2-D, `batch_sedimentation` settles along the last axis and
/// `zero_flux_conservation` convects along every axis.
pub fn builtin_model_pair(
    name: &str,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<(FluxModel, DiffusionModel), ModelError> {
    if !(1..=2).contains(&dim) {
        return Err(ModelError::BadComponentCount(dim));
    }
    match name {
        "batch_sedimentation" => {
            let p = take_params(
                name,
                params,
                &[("v0", 1.0), ("u_c", 0.5), ("kappa", 0.25), ("m", 1.0)],
            )?;
            let m = require_positive("m", p["m"])?;
            let v0 = require_positive("v0", p["v0"])?;
            let kappa = require_positive("kappa", p["kappa"])?;
            let u_c = p["u_c"];
            if !(u_c.is_finite() && u_c > 0.0 && u_c < m) {
                return Err(ModelError::ParameterOutOfRange {
                    key: "u_c".into(),
                    value: u_c,
                    why: format!("must lie strictly inside (0, {m})"),
                });
            }
            // Hindered-settling flux, C¹ across u_c (f and f′ both vanish there).
            let f = ScalarFn::new(move |u| {
                if u < u_c {
                    let s = 1.0 - u / u_c;
                    v0 * u * s * s
                } else {
                    0.0
                }
            });
            let df = ScalarFn::new(move |u| {
                if u < u_c {
                    let s = u / u_c;
                    v0 * (1.0 - 4.0 * s + 3.0 * s * s)
                } else {
                    0.0
                }
            });
            let mut components = vec![FluxComponent::zero(); dim];
            components[dim - 1] = FluxComponent { f, df };
            let flux = FluxModel::new(m, components)?;
            // Compression only above the critical concentration, C¹ at u_c.
            let b = ScalarFn::new(move |u| {
                if u > u_c {
                    kappa * (u - u_c) * (u - u_c)
                } else {
                    0.0
                }
            });
            let db = ScalarFn::new(move |u| if u > u_c { 2.0 * kappa * (u - u_c) } else { 0.0 });
            Ok((flux, DiffusionModel::new(b, db, Some(u_c))))
        }
        "heat" => {
            let p = take_params(name, params, &[("d", 0.1), ("m", 1.0)])?;
            let m = require_positive("m", p["m"])?;
            let d = require_positive("d", p["d"])?;
            Ok((FluxModel::zero(m, dim)?, DiffusionModel::linear(d)?))
        }
        "zero_flux_conservation" => {
            let p = take_params(name, params, &[("m", 1.0)])?;
            let m = require_positive("m", p["m"])?;
            let make = |m: f64| FluxComponent {
                f: ScalarFn::new(move |u| u * (1.0 - u / m)),
                df: ScalarFn::new(move |u| 1.0 - 2.0 * u / m),
            };
            let flux = FluxModel::new(m, (0..dim).map(|_| make(m)).collect())?;
            Ok((flux, DiffusionModel::none()))
        }
        other => Err(ModelError::UnknownModel(other.into())),
    }
}

/// Build a complete 1-D problem for a built-in model on the unit interval
/// with a model-appropriate default initial state and horizon T = 1.
pub fn make_builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Problem, ModelError> {
    let (flux, diffusion) = builtin_model_pair(name, params, 1)?;
    let m = flux.saturation();
    let initial = match name {
        // Smooth profile spanning both sides of the critical concentration.
        "batch_sedimentation" | "heat" => InitialData::CosineSeries {
            coeffs: vec![vec![0.5 * m, 0.4 * m]],
        },
        // Riemann data with unequal flux levels so the shock actually moves.
        "zero_flux_conservation" => InitialData::Step {
            axis: 0,
            position: 0.3,
            left: 0.7 * m,
            right: 0.1 * m,
        },
        _ => unreachable!("builtin_model_pair vetted the name"),
    };
    let problem = Problem {
        domain: RectDomain::unit_interval(),
        horizon: 1.0,
        flux,
        diffusion,
        initial,
    };
    problem.validate()?;
    Ok(problem)
}
