//! Browser bindings for the solver: build one of the built-in 1-D models,
//! march it interactively, and interrogate the run with the same entropy
//! and boundary functionals the verification suite uses.
//!
//! Build for the web with `wasm-pack build crates/wasm --target web`;
//! the crate also compiles natively so the bindings stay under `cargo test`.
//! The `try_*` methods are the native-callable API; the exported wrappers
//! only translate their errors for JavaScript.

use wasm_bindgen::prelude::*;

use zeroflux::entropy::{
    canonical_closure_test_functions, canonical_interior_test_functions, default_delta_schedule,
    interior_entropy_residual, k_grid, zero_total_flux_functional, ToleranceOverrides,
};
use zeroflux::grid::{build_grid, Field, RectDomain, UniformGrid};
use zeroflux::model::{builtin_catalog, make_builtin, Problem};
use zeroflux::solver::{Engine, SolverConfig, Trajectory};

/// JSON catalog of the built-in models: name, description, and parameter
/// schema, for populating a model picker.
#[wasm_bindgen]
pub fn model_catalog_json() -> String {
    let mut entries = Vec::new();
    for (name, description, params) in builtin_catalog() {
        let params_json = params
            .iter()
            .map(|(key, default, what)| {
                format!(r#"{{"key":"{key}","default":{default},"doc":"{what}"}}"#)
            })
            .collect::<Vec<_>>()
            .join(",");
        entries.push(format!(
            r#"{{"name":"{name}","description":"{description}","params":[{params_json}]}}"#
        ));
    }
    format!("[{}]", entries.join(","))
}

/// An interactive 1-D run of a built-in model: explicit monotone scheme,
/// zero-total-flux walls, and a recorded trajectory the residual
/// functionals can be evaluated on at any moment.
#[wasm_bindgen]
pub struct Simulation {
    problem: Problem,
    grid: UniformGrid,
    engine: Engine,
    state: Field,
    t: f64,
    recorded: Vec<(f64, Field)>,
}

/// Keep at most this many recorded snapshots; beyond it every other one is
/// dropped (endpoints kept), halving the time resolution of the functionals.
const MAX_RECORDED: usize = 512;

impl Simulation {
    pub fn try_new(model: &str, n: usize, eps: f64) -> Result<Simulation, String> {
        if n < 16 {
            return Err("use at least 16 cells".into());
        }
        let problem = make_builtin(model, &Default::default()).map_err(|e| e.to_string())?;
        let grid = build_grid(RectDomain::unit_interval(), vec![n]).map_err(|e| e.to_string())?;
        let config = SolverConfig::new(problem.horizon).with_eps(eps);
        let engine = Engine::new(&problem, &grid, &config).map_err(|e| e.to_string())?;
        let mut state = problem.initial_field(&grid).map_err(|e| e.to_string())?;
        if eps > 0.0 {
            let m = problem.flux.saturation();
            for v in state.values_mut() {
                *v = v.clamp(eps, m - eps);
            }
        }
        let recorded = vec![(0.0, state.clone())];
        Ok(Simulation {
            problem,
            grid,
            engine,
            state,
            t: 0.0,
            recorded,
        })
    }

    pub fn try_advance(&mut self, duration: f64) -> Result<u32, String> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err("duration must be positive".into());
        }
        let dt_stable = self.engine.stable_dt();
        let target = self.t + duration;
        let mut steps = 0u32;
        while self.t < target {
            let dt = dt_stable.min(target - self.t);
            self.state = self.engine.step(&self.state, dt).map_err(|e| e.to_string())?;
            self.t += dt;
            steps += 1;
            if steps == u32::MAX {
                return Err("step budget exhausted".into());
            }
        }
        self.t = target;
        self.recorded.push((self.t, self.state.clone()));
        if self.recorded.len() > MAX_RECORDED {
            let last = self.recorded.len() - 1;
            let mut thinned = Vec::with_capacity(last / 2 + 2);
            for (i, entry) in self.recorded.drain(..).enumerate() {
                if i % 2 == 0 || i == last {
                    thinned.push(entry);
                }
            }
            self.recorded = thinned;
        }
        Ok(steps)
    }

    fn trajectory(&self) -> Result<Trajectory, String> {
        if self.recorded.len() < 2 || self.t <= 0.0 {
            return Err("advance the simulation before evaluating functionals".into());
        }
        Ok(Trajectory {
            problem: self.problem.clone(),
            config: SolverConfig::new(self.t),
            snapshots: self.recorded.clone(),
            step_log: Vec::new(),
        })
    }

    pub fn try_entropy_sweep_json(&self, k_count: usize) -> Result<String, String> {
        let traj = self.trajectory()?;
        let phis = canonical_interior_test_functions(&self.grid, self.t)
            .map_err(|e| e.to_string())?;
        let overrides = ToleranceOverrides::default();
        let mut ks = Vec::new();
        let mut margins = Vec::new();
        for k in k_grid(self.problem.flux.saturation(), k_count.clamp(2, 201)) {
            let mut worst = f64::INFINITY;
            for phi in &phis {
                let report = interior_entropy_residual(&traj, k, phi, &overrides)
                    .map_err(|e| e.to_string())?;
                worst = worst.min(report.limit / report.tolerance);
            }
            ks.push(format!("{k:.6}"));
            margins.push(format!("{worst:.6}"));
        }
        Ok(format!(
            r#"{{"k":[{}],"margin":[{}]}}"#,
            ks.join(","),
            margins.join(",")
        ))
    }

    pub fn try_boundary_flux_json(&self) -> Result<String, String> {
        let traj = self.trajectory()?;
        let phis = canonical_closure_test_functions(self.grid.domain(), self.t)
            .map_err(|e| e.to_string())?;
        let deltas = default_delta_schedule(&self.grid);
        let overrides = ToleranceOverrides::default();
        let mut rows = Vec::new();
        for phi in &phis {
            let report = zero_total_flux_functional(&traj, phi, &deltas, &overrides)
                .map_err(|e| e.to_string())?;
            let values = report
                .values
                .iter()
                .map(|(delta, v)| {
                    format!(
                        r#"{{"delta":{:.6},"value":{:.6e}}}"#,
                        delta.unwrap_or(f64::NAN),
                        v
                    )
                })
                .collect::<Vec<_>>()
                .join(",");
            rows.push(format!(
                r#"{{"phi":"{}","values":[{}],"limit":{:.6e},"tol":{:.6e},"pass":{}}}"#,
                report.test_function,
                values,
                report.limit,
                report.tolerance,
                report.passed()
            ));
        }
        Ok(format!("[{}]", rows.join(",")))
    }
}

#[wasm_bindgen]
impl Simulation {
    /// Create a fresh run of `model` ("batch_sedimentation", "heat", or
    /// "zero_flux_conservation") on `n` cells with viscosity `eps ≥ 0`.
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, n: usize, eps: f64) -> Result<Simulation, JsError> {
        Self::try_new(model, n, eps).map_err(|e| JsError::new(&e))
    }

    /// March the solution forward by `duration` sim-time and record the new
    /// state. Returns the number of explicit steps taken.
    pub fn advance(&mut self, duration: f64) -> Result<u32, JsError> {
        self.try_advance(duration).map_err(|e| JsError::new(&e))
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Largest admissible explicit step at the current CFL safety factor.
    pub fn stable_dt(&self) -> f64 {
        self.engine.stable_dt()
    }

    /// Cell-center coordinates, for the x-axis of a plot.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.grid.cell_count())
            .map(|c| self.grid.center(c)[0])
            .collect()
    }

    /// Current cell averages.
    pub fn state(&self) -> Vec<f64> {
        self.state.values().to_vec()
    }

    /// `[min, max, mass, saturation]` of the current state.
    pub fn summary(&self) -> Vec<f64> {
        vec![
            self.state.min(),
            self.state.max(),
            self.state.integrate(),
            self.problem.flux.saturation(),
        ]
    }

    /// Interior Kruzhkov residual sweep over a uniform level grid: JSON
    /// `{"k":[...],"margin":[...]}` where `margin = limit / tolerance` is
    /// the worst value over the canonical test functions (≥ −1 passes).
    pub fn entropy_sweep_json(&self, k_count: usize) -> Result<String, JsError> {
        self.try_entropy_sweep_json(k_count)
            .map_err(|e| JsError::new(&e))
    }

    /// Zero-total-flux functional of the recorded run: JSON rows per test
    /// function with the boundary-layer values, the extrapolated limit, the
    /// tolerance, and the verdict. A conservative run reads ≈ 0 everywhere.
    pub fn boundary_flux_json(&self) -> Result<String, JsError> {
        self.try_boundary_flux_json().map_err(|e| JsError::new(&e))
    }
}
