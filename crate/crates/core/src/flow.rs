//! Explicit integration of the scalar graph flow `∂u/∂t = v/F^p`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvature::{CurvatureFunction, CurvatureKind, PhiCalc};
use crate::diagnostics::{
    convexity_threshold, pinching_z, validate_initial_pinching, DiagnosticsRecord, PinchingCheck,
    PinchingConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{
    default_phi_ref, principal_curvatures, Ambient, AxisymGrid, CurvatureField, GraphState, DIM,
};
use crate::reference::{euclid_radius_from_blowup, hyperbolic_radius_series};

/// Relative floor for the time step, in units of the initial e-folding time.
const DT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
#[derive(Default)]
pub enum SpeedSpec {
    #[serde(rename = "H")]
    #[default]
    H,
    #[serde(rename = "rootHk")]
    RootHk { k: usize },
}

impl SpeedSpec {
    pub fn function(self, n: usize) -> Result<CurvatureFunction> {
        match self {
            SpeedSpec::H => CurvatureFunction::new(CurvatureKind::MeanH, n),
            SpeedSpec::RootHk { k } => CurvatureFunction::new(CurvatureKind::RootHk(k), n),
        }
    }
}

/// Initial radial profile `u0(θ) = r0·(1 + eps·cos(kθ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum InitialProfile {
    #[serde(rename = "sphere")]
    Sphere { r0: f64 },
    #[serde(rename = "perturbed")]
    PerturbedSphere { r0: f64, eps: f64, k: u32 },
}

impl InitialProfile {
    pub fn r0(&self) -> f64 {
        match *self {
            InitialProfile::Sphere { r0 } | InitialProfile::PerturbedSphere { r0, .. } => r0,
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        match *self {
            InitialProfile::Sphere { r0 } => r0,
            InitialProfile::PerturbedSphere { r0, eps, k } => r0 * (1.0 + eps * (k as f64 * theta).cos()),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r0() > 0.0) {
            return Err(config_err("initial.r0", format!("must be positive, got {}", self.r0())));
        }
        if let InitialProfile::PerturbedSphere { eps, .. } = *self {
            if !(eps.abs() < 1.0) {
                return Err(config_err("initial.eps", format!("need |eps| < 1, got {eps}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub safety: f64,
    pub max_rel_change: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self { safety: 0.2, max_rel_change: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopConfig {
    pub t_end: Option<f64>,
    pub u_max_stop: Option<f64>,
    pub halt_on_pinching_violation: bool,
    pub halt_on_nonconvex: bool,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self { t_end: None, u_max_stop: None, halt_on_pinching_violation: true, halt_on_nonconvex: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub every_n_steps: usize,
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { every_n_steps: 10, dir: "out".into() }
    }
}

fn default_n_theta() -> usize {
    64
}

fn default_c0() -> f64 {
    0.1
}

/// Complete description of one flow run.
///
/// Missing optional fields take these defaults: `F = H`, `n_theta = 64`,
/// `c0 = 0.1`, `safety = 0.2`, `max_rel_change = 1e-3`, both halt flags on,
/// `every_n_steps = 10`, `dir = "out"`. When neither stop bound is given,
/// Euclidean runs stop at `u_max = 10·r0` and hyperbolic runs at `t = 40`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub ambient: Ambient,
    pub p: f64,
    #[serde(rename = "F", default)]
    pub speed: SpeedSpec,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    pub initial: InitialProfile,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(path: &str, message: String) -> Error {
    Error::Config { path: path.into(), message }
}

impl FlowConfig {
    /// A config with all defaults for the given ambient, exponent and profile.
    pub fn new(ambient: Ambient, p: f64, initial: InitialProfile) -> Self {
        Self {
            ambient,
            p,
            speed: SpeedSpec::default(),
            n_theta: default_n_theta(),
            initial,
            c0: default_c0(),
            stepper: StepperConfig::default(),
            stop: StopConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Checks all ranges and fills the stop defaults.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(config_err("p", format!("flow exponent requires 1 < p < inf, got {}", self.p)));
        }
        let n = DIM as f64;
        let bound = 1.0 / (n * (n - 1.0));
        if !(self.c0 > 0.0 && self.c0 < bound) {
            return Err(config_err("c0", format!("must lie in (0, {bound}), got {}", self.c0)));
        }
        if self.n_theta < crate::geometry::MIN_CELLS {
            return Err(config_err("n_theta", format!("must be at least 16, got {}", self.n_theta)));
        }
        self.speed.function(DIM).map_err(|e| config_err("F.k", e.to_string()))?;
        self.initial.validate()?;
        for (path, value) in
            [("stepper.safety", self.stepper.safety), ("stepper.max_rel_change", self.stepper.max_rel_change)]
        {
            if !(value > 0.0) || !value.is_finite() {
                return Err(config_err(path, format!("must be positive, got {value}")));
            }
        }
        for (path, value) in [("stop.t_end", self.stop.t_end), ("stop.u_max_stop", self.stop.u_max_stop)] {
            if let Some(v) = value {
                if !(v > 0.0) {
                    return Err(config_err(path, format!("must be positive, got {v}")));
                }
            }
        }
        if self.output.every_n_steps == 0 {
            return Err(config_err("output.every_n_steps", "must be positive".into()));
        }
        if self.stop.t_end.is_none() && self.stop.u_max_stop.is_none() {
            match self.ambient {
                Ambient::Euclidean => self.stop.u_max_stop = Some(10.0 * self.initial.r0()),
                Ambient::Hyperbolic => self.stop.t_end = Some(40.0),
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TEnd,
    UMaxStop,
    PinchingViolated,
    Nonconvex,
    SpeedDegenerate,
    Stiffness,
}

impl StopReason {
    /// Process exit code for the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            StopReason::TEnd | StopReason::UMaxStop => 0,
            StopReason::PinchingViolated => 2,
            StopReason::Nonconvex => 3,
            StopReason::SpeedDegenerate | StopReason::Stiffness => 4,
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::TEnd => "t_end",
            StopReason::UMaxStop => "u_max_stop",
            StopReason::PinchingViolated => "pinching_violated",
            StopReason::Nonconvex => "nonconvex",
            StopReason::SpeedDegenerate => "speed_degenerate",
            StopReason::Stiffness => "stiffness",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: GraphState,
    pub dt: f64,
    /// Curvature field of the state the step started from.
    pub field: CurvatureField,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub records: Vec<DiagnosticsRecord>,
    /// States at the record times.
    pub snapshots: Vec<GraphState>,
    pub stop_reason: StopReason,
    /// Estimated blow-up time (Euclidean runs only).
    pub t_star_est: Option<f64>,
    pub steps: usize,
    pub initial_check: PinchingCheck,
}

/// Integrator for one validated [`FlowConfig`].
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: FlowConfig,
    grid: Arc<AxisymGrid>,
    speed: CurvatureFunction,
    phi: PhiCalc,
    pinching: PinchingConfig,
    phi_ref: f64,
    t_scale: f64,
}

impl Solver {
    pub fn new(cfg: &FlowConfig) -> Result<Self> {
        let cfg = cfg.clone().validated()?;
        let grid = Arc::new(AxisymGrid::new(cfg.n_theta)?);
        let u0 = grid.sample(|t| cfg.initial.radius(t));
        let phi_ref = default_phi_ref(&u0);
        let mut solver = Self {
            speed: cfg.speed.function(DIM)?,
            phi: PhiCalc::new(cfg.p)?,
            pinching: PinchingConfig::new(cfg.c0, DIM)?,
            grid,
            cfg,
            phi_ref,
            t_scale: 1.0,
        };
        let init = solver.initial_state();
        // initial e-folding time min u/u_t sets the scale of the underflow guard
        if let Ok(field) = solver.curvature(&init) {
            let vel = solver.velocity(&field);
            solver.t_scale = init.u.iter().zip(&vel).map(|(u, w)| u / w).fold(f64::INFINITY, f64::min);
        }
        Ok(solver)
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<AxisymGrid> {
        &self.grid
    }

    pub fn speed_function(&self) -> &CurvatureFunction {
        &self.speed
    }

    pub fn pinching(&self) -> &PinchingConfig {
        &self.pinching
    }

    pub fn initial_state(&self) -> GraphState {
        let u = self.grid.sample(|t| self.cfg.initial.radius(t));
        GraphState { ambient: self.cfg.ambient, t: 0.0, grid: self.grid.clone(), u }
    }

    /// Makes a state on this solver's grid from raw radii.
    pub fn state(&self, t: f64, u: Vec<f64>) -> Result<GraphState> {
        GraphState::new(self.cfg.ambient, t, self.grid.clone(), u)
    }

    fn phi_ref_for(&self, state: &GraphState) -> f64 {
        if state.u_min() > self.phi_ref {
            self.phi_ref
        } else {
            default_phi_ref(&state.u)
        }
    }

    /// Principal curvatures without the speed function.
    pub fn principal(&self, state: &GraphState) -> Result<CurvatureField> {
        principal_curvatures(state, self.phi_ref_for(state))
    }

    /// Curvature field with `F`; fails when `F ≤ 0` anywhere.
    pub fn curvature(&self, state: &GraphState) -> Result<CurvatureField> {
        let mut field = self.principal(state)?;
        self.fill_speed(&mut field)?;
        Ok(field)
    }

    fn fill_speed(&self, field: &mut CurvatureField) -> Result<()> {
        field.speed = self.speed.eval_field(&field.kappa1, &field.kappa2).map_err(|e| match e {
            Error::ConeViolation { node } => Error::SpeedDegenerate { node: node.unwrap_or(0) },
            other => other,
        })?;
        Ok(())
    }

    /// Normal-graph velocity `v·F^{-p}` at every node.
    pub fn velocity(&self, field: &CurvatureField) -> Vec<f64> {
        let p = self.cfg.p;
        field.v.iter().zip(&field.speed).map(|(v, f)| v * f.powf(-p)).collect()
    }

    /// Stable step: the smaller of the diffusive limit and the relative
    /// change cap.
    #[allow(clippy::needless_range_loop)]
    pub fn time_step(&self, state: &GraphState, field: &CurvatureField, velocity: &[f64]) -> f64 {
        let p = self.cfg.p;
        let h = self.grid.d_theta();
        let n = DIM as f64;
        let mut dt_cfl = f64::INFINITY;
        let mut rate = 0.0f64;
        for i in 0..state.u.len() {
            let w = state.ambient.warp(state.u[i]) * h;
            let limit = w * w * field.speed[i].powf(p + 1.0) / (p * field.v[i] * n);
            dt_cfl = dt_cfl.min(limit);
            rate = rate.max(velocity[i].abs() / state.u[i]);
        }
        let dt_change = self.cfg.stepper.max_rel_change / rate;
        (self.cfg.stepper.safety * dt_cfl).min(dt_change)
    }

    /// Explicit midpoint update from a state with known field and velocity.
    fn advance(&self, state: &GraphState, velocity: &[f64], dt: f64, t_new: f64) -> Result<GraphState> {
        let mid_u: Vec<f64> = state.u.iter().zip(velocity).map(|(u, w)| u + 0.5 * dt * w).collect();
        let mid = self.state(state.t + 0.5 * dt, mid_u)?;
        let mid_field = self.curvature(&mid)?;
        let mid_vel = self.velocity(&mid_field);
        let u: Vec<f64> = state.u.iter().zip(&mid_vel).map(|(u, w)| u + dt * w).collect();
        self.state(t_new, u)
    }

    fn clip(&self, state: &GraphState, dt: f64) -> (f64, f64) {
        match self.cfg.stop.t_end {
            Some(te) if state.t + dt >= te => (te - state.t, te),
            _ => (dt, state.t + dt),
        }
    }

    /// One explicit second-order Runge–Kutta (midpoint) step.
    pub fn step(&self, state: &GraphState) -> Result<StepOutcome> {
        let field = self.curvature(state)?;
        let vel = self.velocity(&field);
        let dt = self.time_step(state, &field, &vel);
        if !(dt >= DT_FLOOR * self.t_scale) {
            return Err(Error::Stiffness { t: state.t, dt });
        }
        let (dt, t_new) = self.clip(state, dt);
        let next = self.advance(state, &vel, dt, t_new)?;
        Ok(StepOutcome { state: next, dt, field })
    }

    /// Integrates until a stop condition fires.
    pub fn run(&self) -> Result<FlowResult> {
        let stop = self.cfg.stop;
        let every = self.cfg.output.every_n_steps;
        let threshold = convexity_threshold(self.cfg.ambient);
        let mut state = self.initial_state();
        let initial_check = validate_initial_pinching(&state, self.phi_ref, &self.pinching)?;
        let mut records = Vec::new();
        let mut snapshots = Vec::new();
        let mut steps = 0usize;
        let mut last_dt = 0.0;

        let stop_reason = loop {
            let mut field = self.principal(&state)?;
            let (z_max, b_min) = pinching_z(&field, state.ambient, &self.pinching);
            let mut reason = None;
            if stop.halt_on_pinching_violation && !(z_max < 0.0 && b_min > 0.0) {
                reason = Some(StopReason::PinchingViolated);
            } else if stop.halt_on_nonconvex && !(field.kappa_min() > threshold) {
                reason = Some(StopReason::Nonconvex);
            }
            let mut dt = last_dt;
            let mut velocity = Vec::new();
            if reason.is_none() {
                match self.fill_speed(&mut field) {
                    Ok(()) => {
                        velocity = self.velocity(&field);
                        dt = self.time_step(&state, &field, &velocity);
                    }
                    Err(_) => reason = Some(StopReason::SpeedDegenerate),
                }
            }
            if field.speed.is_empty() {
                field.speed = vec![f64::NAN; field.len()];
            }
            if reason.is_none() {
                if stop.u_max_stop.is_some_and(|um| state.u_max() >= um) {
                    reason = Some(StopReason::UMaxStop);
                } else if stop.t_end.is_some_and(|te| state.t >= te) {
                    reason = Some(StopReason::TEnd);
                } else if !(dt >= DT_FLOOR * self.t_scale) {
                    reason = Some(StopReason::Stiffness);
                }
            }
            if reason.is_some() {
                dt = last_dt;
            }
            if steps.is_multiple_of(every) || reason.is_some() {
                records.push(DiagnosticsRecord::observe(&state, &field, dt, &self.pinching));
                snapshots.push(state.clone());
            }
            if let Some(r) = reason {
                break r;
            }
            let (dt, t_new) = self.clip(&state, dt);
            state = match self.advance(&state, &velocity, dt, t_new) {
                Ok(s) => s,
                Err(Error::SpeedDegenerate { .. } | Error::ConeViolation { .. }) => {
                    break StopReason::SpeedDegenerate;
                }
                Err(Error::Domain { .. } | Error::NonFinite { .. }) => break StopReason::Stiffness,
                Err(e) => return Err(e),
            };
            last_dt = dt;
            steps += 1;
        };

        let t_star_est = self.attach_reference(&mut records);
        Ok(FlowResult { records, snapshots, stop_reason, t_star_est, steps, initial_check })
    }

    /// Fills the reference radius and rescaled columns of every record.
    /// Euclidean runs use the sphere with the fitted blow-up time; hyperbolic
    /// runs use the geodesic sphere started at the profile radius `r0`.
    fn attach_reference(&self, records: &mut [DiagnosticsRecord]) -> Option<f64> {
        let n = DIM as f64;
        let p = self.cfg.p;
        let ambient = self.cfg.ambient;
        match ambient {
            Ambient::Euclidean => {
                let t_star = estimate_blowup(records, p).ok()?;
                for rec in records.iter_mut() {
                    if let Ok(theta) = euclid_radius_from_blowup(t_star, n, p, rec.t) {
                        rec.rescale(theta, ambient);
                    }
                }
                Some(t_star)
            }
            Ambient::Hyperbolic => {
                let times: Vec<f64> = records.iter().map(|r| r.t).collect();
                if let Ok(radii) = hyperbolic_radius_series(self.cfg.initial.r0(), n, p, &times) {
                    for (rec, r) in records.iter_mut().zip(radii) {
                        rec.rescale(r, ambient);
                    }
                }
                None
            }
        }
    }

    /// Pointwise residual of the speed evolution
    /// `Φ̇ − Φ'F^{ij}Φ_{;ij} = Φ'F^{ij}h_{ik}h^k_jΦ + K_NΦ'F^{ij}g_{ij}Φ`
    /// for `F = H`, with `Φ = −F^{-p}`.
    ///
    /// The time derivative at fixed `θ` is a central difference along the
    /// discrete velocity with the solver's own step size; the total
    /// derivative adds the tangential drift of the normal parametrisation.
    pub fn evolution_residual(&self, state: &GraphState) -> Result<Vec<f64>> {
        if !self.speed.is_mean() {
            return Err(Error::Precondition("evolution residual is only available for F = H".into()));
        }
        let field = self.curvature(state)?;
        let vel = self.velocity(&field);
        let tau = self.time_step(state, &field, &vel);
        let shifted = |sign: f64| -> Result<Vec<f64>> {
            let u = state.u.iter().zip(&vel).map(|(u, w)| u + sign * tau * w).collect();
            let f = self.curvature(&self.state(state.t + sign * tau, u)?)?;
            f.speed.iter().map(|&x| self.phi.eval(x).map(|r| r.0)).collect::<Result<_>>()
        };
        let plus = shifted(1.0)?;
        let minus = shifted(-1.0)?;

        let ambient = state.ambient;
        let kn = ambient.sectional_curvature();
        let n = DIM as f64;
        let grid = &self.grid;
        let phi_vals: Vec<(f64, f64, f64)> =
            field.speed.iter().map(|&f| self.phi.eval(f)).collect::<Result<_>>()?;
        let phi: Vec<f64> = phi_vals.iter().map(|x| x.0).collect();
        let (dphi, ddphi) = grid.derivatives(&phi);
        let (du, ddu) = grid.derivatives(&state.u);

        let mut out = Vec::with_capacity(phi.len());
        for i in 0..phi.len() {
            let u = state.u[i];
            let w = ambient.warp(u);
            let wp = ambient.warp_prime(u);
            let big_w2 = du[i] * du[i] + w * w;
            let big_w = big_w2.sqrt();
            let big_w_prime = (du[i] * ddu[i] + w * wp * du[i]) / big_w;
            let laplace = ddphi[i] / big_w2
                + dphi[i] * ((wp * du[i] / w + grid.cot()[i]) / big_w2 - big_w_prime / (big_w2 * big_w));
            let phi_t = (plus[i] - minus[i]) / (2.0 * tau);
            let drift = -dphi[i] * field.speed[i].powf(-self.cfg.p) * du[i] / (field.v[i] * w * w);
            let phi_dot = phi_t + drift;
            let (ph, ph_prime, _) = phi_vals[i];
            let norm_a2 = field.kappa1[i].powi(2) + field.kappa2[i].powi(2);
            out.push(phi_dot - ph_prime * laplace - ph_prime * norm_a2 * ph - kn * ph_prime * n * ph);
        }
        Ok(out)
    }
}

/// Least-squares fit of `u_mid^{1−p}` against `t` over the later half of the
/// records, with `u_mid = (u_min + u_max)/2`; returns the root of the fitted
/// line. The midpoint is exact for centred spheres and, unlike `u_min`, does
/// not see an off-centre translation to first order.
pub fn estimate_blowup(records: &[DiagnosticsRecord], p: f64) -> Result<f64> {
    if records.len() < 10 {
        return Err(Error::Fit(format!("need at least 10 records, got {}", records.len())));
    }
    let tail = &records[records.len() / 2..];
    if tail.windows(2).any(|w| !(w[1].u_min > w[0].u_min)) {
        return Err(Error::Fit("u_min is not increasing".into()));
    }
    let t: Vec<f64> = tail.iter().map(|r| r.t).collect();
    let y: Vec<f64> = tail.iter().map(|r| (0.5 * (r.u_min + r.u_max)).powf(1.0 - p)).collect();
    let (a, b) = crate::diagnostics::linear_fit(&t, &y)?;
    if !(b < 0.0) {
        return Err(Error::Fit("fitted line does not decrease".into()));
    }
    Ok(-a / b)
}

/// Convenience: run a config to completion.
pub fn run(cfg: &FlowConfig) -> Result<FlowResult> {
    Solver::new(cfg)?.run()
}

/// Convenience: one step of a config's solver from an arbitrary state.
pub fn step(state: &GraphState, cfg: &FlowConfig) -> Result<StepOutcome> {
    Solver::new(cfg)?.step(state)
}
