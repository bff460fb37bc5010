//! Per-step fixed-point iteration, time loop and continuation sweep.
//!
//! One step from `t` to `t + dt` runs the Picard loop
//!
//! 1. transport ϱ with the velocity iterate u⁽ᵏ⁾,
//! 2. solve the momentum step with the new density and u⁽ᵏ⁾ as advecting
//!    field, giving u⁽ᵏ⁺¹⁾,
//!
//! until the relative coefficient change drops below `picard_tol`. The
//! temperature step then runs once with the converged density, the heat
//! fluxes of the last iterate and the viscous dissipation of u⁽ᵏ⁺¹⁾ at
//! μ(θ_old). Since the viscosity is lagged, θ does not enter the loop.
//!
//! A failed step is retried with half the step size, at most
//! [`MAX_HALVINGS`] times.

use std::sync::Arc;

use crate::basis::{StreamBasis, Velocity};
use crate::coefficients::{ConductivityLaw, ViscosityLaw};
use crate::diagnostics::{self, AprioriReport};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::momentum;
use crate::par;
use crate::thermal::{self, Linearization, ThermalStepParams};
use crate::transport::{self, FaceFluxes};
use crate::{Error, Result};

/// Maximum number of dt halvings per step.
pub const MAX_HALVINGS: usize = 5;

/// Relative slack on the density bounds.
pub const BOUND_TOL: f64 = 1e-12;

/// Shape of an initial profile, with values in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 0 everywhere.
    Uniform,
    /// (1 − cos(πx/Lx)·cos(πy/Ly))/2.
    Cosine,
    /// (1 − cos(2πx/Lx))(1 − cos(2πy/Ly))/4.
    Bump,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Cosine => "cosine",
            Self::Bump => "bump",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(Self::Uniform),
            "cosine" => Some(Self::Cosine),
            "bump" => Some(Self::Bump),
            _ => None,
        }
    }

    pub fn shape(self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Self::Uniform => 0.0,
            Self::Cosine => 0.5 * (1.0 - (PI * x / lx).cos() * (PI * y / ly).cos()),
            Self::Bump => 0.25 * (1.0 - (2.0 * PI * x / lx).cos()) * (1.0 - (2.0 * PI * y / ly).cos()),
        }
    }
}

/// Scheme used for the density in the coupled solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityTransport {
    /// Conservative upwind with the stream-function face fluxes.
    Upwind,
    /// [`transport::advect_density`].
    SemiLagrangian,
}

impl DensityTransport {
    pub fn name(self) -> &'static str {
        match self {
            Self::Upwind => "upwind",
            Self::SemiLagrangian => "semi-lagrangian",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "upwind" => Some(Self::Upwind),
            "semi-lagrangian" => Some(Self::SemiLagrangian),
            _ => None,
        }
    }
}

/// Regularized initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho_profile: Profile,
    pub rho_min: f64,
    pub rho_max: f64,
    pub theta_profile: Profile,
    pub theta_floor: f64,
    pub theta_peak: f64,
    /// m₀ = ϱ₀·Σ a_j η_j; shorter lists are padded with zeros.
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub dt: f64,
    pub output_every: usize,
    pub n_modes: usize,
    pub eps: f64,
    pub delta: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linearization: Linearization,
    pub density_transport: DensityTransport,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub viscosity: ViscosityLaw,
    pub conductivity: ConductivityLaw,
    pub initial: InitialData,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            lx: 1.0,
            ly: 1.0,
            t_final: 0.5,
            dt: 0.005,
            output_every: 10,
            n_modes: 16,
            eps: 1e-3,
            delta: 1e-2,
            picard_tol: 1e-8,
            picard_max: 30,
            linearization: Linearization::KirchhoffNewton,
            density_transport: DensityTransport::Upwind,
            newton_tol: 1e-10,
            newton_max: 50,
            viscosity: ViscosityLaw::canonical(0.1, 1.0).expect("valid default"),
            conductivity: ConductivityLaw::quadratic(0.01, 0.01).expect("valid default"),
            initial: InitialData {
                rho_profile: Profile::Bump,
                rho_min: 1.0,
                rho_max: 2.0,
                theta_profile: Profile::Cosine,
                theta_floor: 0.1,
                theta_peak: 1.0,
                momentum: vec![0.02, -0.01, 0.01],
            },
        }
    }
}

impl RunConfig {
    /// All invariant violations, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                p.push(msg);
            }
        };
        need(self.nx >= 4 && self.ny >= 4, format!("grid needs nx, ny >= 4, got {}x{}", self.nx, self.ny));
        need(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite(), "lx and ly must be > 0".into());
        need(self.t_final >= 0.0 && self.t_final.is_finite(), format!("t_final must be >= 0, got {}", self.t_final));
        need(self.dt > 0.0 && self.dt.is_finite(), format!("dt must be > 0, got {}", self.dt));
        need(self.output_every >= 1, "output_every must be >= 1".into());
        need(self.n_modes >= 1, "n_modes must be >= 1".into());
        need(self.eps >= 0.0 && self.eps.is_finite(), format!("eps must be >= 0, got {}", self.eps));
        need(self.delta > 0.0 && self.delta < 1.0, format!("delta must lie in (0,1), got {}", self.delta));
        need(self.picard_tol > 0.0, "picard_tol must be > 0".into());
        need(self.picard_max >= 1, "picard_max must be >= 1".into());
        need(self.newton_tol > 0.0, "newton_tol must be > 0".into());
        need(self.newton_max >= 1, "newton_max must be >= 1".into());
        let ini = &self.initial;
        need(ini.rho_min >= self.delta, format!("rho_min = {} must be >= delta = {}", ini.rho_min, self.delta));
        need(ini.rho_max >= ini.rho_min && ini.rho_max.is_finite(), "rho_max must be >= rho_min".into());
        need(ini.theta_floor > 0.0, format!("theta_floor must be > 0, got {}", ini.theta_floor));
        need(ini.theta_peak >= ini.theta_floor && ini.theta_peak.is_finite(), "theta_peak must be >= theta_floor".into());
        need(ini.momentum.len() <= self.n_modes, format!("{} momentum amplitudes for {} modes", ini.momentum.len(), self.n_modes));
        need(ini.momentum.iter().all(|a| a.is_finite()), "momentum amplitudes must be finite".into());
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(p.join("; ")))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn thermal_params(&self, dt: f64) -> ThermalStepParams {
        ThermalStepParams {
            dt,
            delta: self.delta,
            linearization: self.linearization,
            newton_tol: self.newton_tol,
            newton_max: self.newton_max,
        }
    }
}

/// Density, Galerkin coefficients and temperature at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub time: f64,
    pub rho: ScalarField,
    pub coeffs: Vec<f64>,
    pub theta: ScalarField,
}

/// Bookkeeping of one accepted step `states[m] → states[m+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub dt: f64,
    pub halvings: usize,
    pub picard_iterations: usize,
    /// Relative coefficient change after each Picard sweep.
    pub picard_changes: Vec<f64>,
    /// Coefficients of the velocity that transported ϱ and ϱθ.
    pub advecting: Vec<f64>,
    pub kinetic_old: f64,
    pub kinetic_new: f64,
    /// ∫S:∇u at the new velocity with μ(θ_old).
    pub viscous_work: f64,
    /// ε∫|∇u|² at the new velocity.
    pub eps_work: f64,
    /// ∫θ³ at the new temperature.
    pub cubic_integral: f64,
    pub newton_iterations: usize,
}

/// A computed run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: RunConfig,
    pub grid: Grid,
    pub basis: Arc<StreamBasis>,
    pub states: Vec<FluidState>,
    pub records: Vec<StepRecord>,
}

/// A run that stopped early.
#[derive(Debug, Clone, thiserror::Error)]
#[error("run failed at t = {time}: {error}")]
pub struct RunError {
    pub error: Error,
    pub time: f64,
    pub partial: Box<Trajectory>,
}

impl Trajectory {
    pub fn velocity(&self, m: usize) -> Velocity {
        self.basis.reconstruct(&self.states[m].coeffs).expect("coefficient length fixed by the basis")
    }

    /// Face fluxes used in step m.
    pub fn fluxes(&self, m: usize) -> FaceFluxes {
        let psi = self.basis.stream_at_centers(&self.records[m].advecting).expect("coefficient length fixed by the basis");
        FaceFluxes::from_stream(&self.grid, &psi).expect("stream sized by the grid")
    }

    /// μ(θ) on the nodes of state m.
    pub fn viscosity_field(&self, m: usize) -> ScalarField {
        let law = &self.config.viscosity;
        self.states[m].theta.map(|t| law.mu(t))
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn min_theta(&self) -> f64 {
        self.states.iter().map(|s| s.theta.min()).fold(f64::INFINITY, f64::min)
    }
}

/// Builds ϱ₀, θ₀ and projects m₀ = ϱ₀u₀ onto the basis.
pub fn initial_state(config: &RunConfig, grid: &Grid, basis: &StreamBasis) -> Result<FluidState> {
    let ini = &config.initial;
    let (lx, ly) = (grid.lx(), grid.ly());
    let rho = grid.sample(|x, y| ini.rho_min + (ini.rho_max - ini.rho_min) * ini.rho_profile.shape(x, y, lx, ly));
    let theta = grid.sample(|x, y| ini.theta_floor + (ini.theta_peak - ini.theta_floor) * ini.theta_profile.shape(x, y, lx, ly));
    let mut a = ini.momentum.clone();
    a.resize(basis.len(), 0.0);
    let u0 = basis.reconstruct(&a)?.u;
    let m0 = VectorField {
        x: par::map_range(grid.n_nodes(), |k| rho.values[k] * u0.x[k]),
        y: par::map_range(grid.n_nodes(), |k| rho.values[k] * u0.y[k]),
    };
    let coeffs = if a.iter().all(|v| *v == 0.0) { a } else { basis.project_initial(&rho, &m0)?.c };
    Ok(FluidState { time: 0.0, rho, coeffs, theta })
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let d = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let s = new.iter().map(|a| a * a).sum::<f64>().sqrt().max(old.iter().map(|a| a * a).sum::<f64>().sqrt());
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// One step of size `dt` without retries.
pub fn fixed_point_step(basis: &StreamBasis, state: &FluidState, config: &RunConfig, dt: f64) -> Result<(FluidState, StepRecord)> {
    let grid = basis.grid();
    let rho_lo = state.rho.min();
    let rho_hi = state.rho.max();
    let mut iterate = state.coeffs.clone();
    let mut changes = Vec::new();
    let mut converged = None;
    for _ in 0..config.picard_max {
        let psi = basis.stream_at_centers(&iterate)?;
        let fluxes = FaceFluxes::from_stream(grid, &psi)?;
        let vel = basis.reconstruct(&iterate)?;
        let rho_new = match config.density_transport {
            DensityTransport::Upwind => fluxes.advect(grid, &state.rho, dt)?,
            DensityTransport::SemiLagrangian => transport::advect_density(grid, &state.rho, &vel.u, dt).map_err(|e| Error::Step(e.to_string()))?,
        };
        let mom = momentum::step_momentum(basis, &state.coeffs, &state.rho, &rho_new, &state.theta, Some(&vel.u), dt, config.eps, &config.viscosity)?;
        let change = relative_change(&mom.c, &iterate);
        changes.push(change);
        let advecting = std::mem::replace(&mut iterate, mom.c.clone());
        if change <= config.picard_tol {
            converged = Some((rho_new, fluxes, mom, advecting));
            break;
        }
    }
    let Some((rho_new, fluxes, mom, advecting)) = converged else {
        return Err(Error::Step(format!("Picard iteration did not converge in {} sweeps; changes {:?}", config.picard_max, changes)));
    };
    let slack = BOUND_TOL * rho_hi.max(1.0);
    if rho_new.min() < rho_lo - slack || rho_new.max() > rho_hi + slack {
        return Err(Error::Scheme(format!(
            "density left [{rho_lo}, {rho_hi}]: [{}, {}]",
            rho_new.min(),
            rho_new.max()
        )));
    }

    let vel = basis.reconstruct(&mom.c)?;
    let mu = state.theta.map(|t| config.viscosity.mu(t));
    let diss = thermal::dissipation_field(&mu, &vel);
    let th = thermal::step_temperature(grid, &state.theta, &rho_new, &state.rho, &fluxes, &diss, &config.thermal_params(dt), &config.conductivity)?;

    let record = StepRecord {
        dt,
        halvings: 0,
        picard_iterations: changes.len(),
        picard_changes: changes,
        advecting,
        kinetic_old: mom.kinetic_old,
        kinetic_new: mom.kinetic_new,
        viscous_work: mom.strain_work,
        eps_work: mom.eps_work,
        cubic_integral: th.cubic_integral,
        newton_iterations: th.newton_iterations,
    };
    let next = FluidState { time: state.time + dt, rho: rho_new, coeffs: mom.c, theta: th.theta };
    Ok((next, record))
}

/// [`fixed_point_step`] with the dt-halving retry ladder.
pub fn step_with_retries(basis: &StreamBasis, state: &FluidState, config: &RunConfig, dt: f64) -> Result<(FluidState, StepRecord)> {
    let mut h = dt;
    let mut last = None;
    for halvings in 0..=MAX_HALVINGS {
        match fixed_point_step(basis, state, config, h) {
            Ok((s, mut r)) => {
                r.halvings = halvings;
                return Ok((s, r));
            }
            Err(e @ Error::Step(_)) => {
                last = Some(e);
                h *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn run_simulation(config: &RunConfig) -> std::result::Result<Trajectory, RunError> {
    let grid = config.grid();
    let setup = config.validate().and_then(|_| {
        let grid = grid.clone()?;
        let basis = StreamBasis::new(&grid, config.n_modes)?;
        let s0 = initial_state(config, &grid, &basis)?;
        Ok((grid, basis, s0))
    });
    let (grid, basis, s0) = match setup {
        Ok(v) => v,
        Err(error) => {
            let grid = grid.unwrap_or_else(|_| Grid::unit(4).expect("valid"));
            let basis = StreamBasis::new(&grid, 1).expect("one mode fits any grid");
            let partial = Trajectory { config: config.clone(), grid, basis: Arc::new(basis), states: Vec::new(), records: Vec::new() };
            return Err(RunError { error, time: 0.0, partial: Box::new(partial) });
        }
    };
    let mut traj = Trajectory { config: config.clone(), grid, basis: Arc::new(basis), states: vec![s0], records: Vec::new() };
    let t_end = config.t_final;
    // steps end exactly on multiples of dt; the tolerance absorbs representation error of T/dt
    let n_steps = ((t_end / config.dt) - 1e-9).ceil().max(0.0) as usize;
    let mut target_index = 1;
    while target_index <= n_steps {
        let current = traj.states.last().expect("non-empty");
        let target = if target_index == n_steps { t_end } else { target_index as f64 * config.dt };
        let dt = target - current.time;
        match step_with_retries(&traj.basis, current, config, dt) {
            Ok((mut next, rec)) => {
                if rec.halvings == 0 {
                    next.time = target;
                    target_index += 1;
                }
                traj.states.push(next);
                traj.records.push(rec);
            }
            Err(error) => {
                let time = current.time;
                return Err(RunError { error, time, partial: Box::new(traj) });
            }
        }
    }
    Ok(traj)
}

/// Outcome of a continuation sweep over (n, ε, δ).
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub schedule: Vec<(usize, f64, f64)>,
    /// Per run: `None` when the run completed, otherwise the failure.
    pub errors: Vec<Option<String>>,
    /// ‖u_i − u_{i+1}‖ in L²(0,T; L²).
    pub u_differences: Vec<f64>,
    pub theta_differences: Vec<f64>,
    pub u_strictly_decreasing: bool,
    pub theta_strictly_decreasing: bool,
    pub final_thermal_energy: Vec<f64>,
    pub monitors: Vec<AprioriReport>,
    /// Per monitored quantity, max/min across the runs.
    pub monitor_ratios: Vec<(String, f64)>,
    pub monitors_bounded: bool,
}

/// Bound on the spread of monitored quantities across a sweep.
pub const MONITOR_BAND: f64 = 4.0;

pub fn continuation_sweep(base: &RunConfig, schedule: &[(usize, f64, f64)]) -> Result<SweepReport> {
    if schedule.is_empty() {
        return Err(Error::Argument("empty schedule".into()));
    }
    for w in schedule.windows(2) {
        let ((n0, e0, d0), (n1, e1, d1)) = (w[0], w[1]);
        if e1 > e0 || d1 > d0 || n1 < n0 {
            return Err(Error::Argument(format!("schedule must have non-increasing (eps, delta) and non-decreasing n: {:?} then {:?}", w[0], w[1])));
        }
    }
    let configs: Vec<RunConfig> = schedule
        .iter()
        .map(|&(n, eps, delta)| {
            let mut c = base.clone();
            c.n_modes = n;
            c.eps = eps;
            c.delta = delta;
            c
        })
        .collect();
    let results = par::run_all(configs, run_simulation);
    let errors = results.iter().map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
    let runs: Vec<&Trajectory> = results.iter().map(|r| r.as_ref().unwrap_or_else(|e| &e.partial)).collect();

    let grid = base.grid()?;
    let n_max = schedule.iter().map(|s| s.0).max().expect("non-empty");
    let basis = StreamBasis::new(&grid, n_max)?;
    let t_end = runs.iter().map(|r| r.states.last().map_or(0.0, |s| s.time)).fold(f64::INFINITY, f64::min);
    let n_samples = ((t_end / base.dt).round() as usize).max(1);
    let times: Vec<f64> = (0..=n_samples).map(|s| t_end * s as f64 / n_samples as f64).collect();

    let sampled: Vec<Vec<(Vec<f64>, Vec<f64>)>> = runs
        .iter()
        .map(|r| times.iter().map(|&t| sample_at(r, t, n_max)).collect())
        .collect();
    let mut u_differences = Vec::new();
    let mut theta_differences = Vec::new();
    for w in sampled.windows(2) {
        let mut du = Vec::with_capacity(times.len());
        let mut dth = Vec::with_capacity(times.len());
        for ((ca, ta), (cb, tb)) in w[0].iter().zip(&w[1]) {
            let dc: Vec<f64> = ca.iter().zip(cb).map(|(a, b)| a - b).collect();
            let v = basis.reconstruct(&dc)?.u;
            du.push(grid.integrate_with(|k| v.x[k] * v.x[k] + v.y[k] * v.y[k]));
            dth.push(grid.integrate_with(|k| (ta[k] - tb[k]).powi(2)));
        }
        u_differences.push(trapezoid(&times, &du).sqrt());
        theta_differences.push(trapezoid(&times, &dth).sqrt());
    }
    let strictly = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let final_thermal_energy = runs
        .iter()
        .map(|r| {
            let s = r.states.last().expect("initial state present");
            grid.integrate_with(|k| (r.config.delta + s.rho.values[k]) * s.theta.values[k])
        })
        .collect();
    let monitors: Vec<AprioriReport> = runs.iter().map(|r| diagnostics::apriori_monitor(r)).collect();
    let monitor_ratios = diagnostics::monitor_ratios(&monitors);
    let monitors_bounded = monitor_ratios.iter().all(|(_, r)| *r <= MONITOR_BAND);
    Ok(SweepReport {
        schedule: schedule.to_vec(),
        errors,
        u_strictly_decreasing: strictly(&u_differences),
        theta_strictly_decreasing: strictly(&theta_differences),
        u_differences,
        theta_differences,
        final_thermal_energy,
        monitors,
        monitor_ratios,
        monitors_bounded,
    })
}

// coefficients (zero-padded to n) and θ at time t, linear in time between states
fn sample_at(traj: &Trajectory, t: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let st = &traj.states;
    let m = st.partition_point(|s| s.time < t).min(st.len() - 1);
    let pad = |c: &[f64]| {
        let mut v = c.to_vec();
        v.resize(n, 0.0);
        v
    };
    if m == 0 || st[m].time <= t {
        return (pad(&st[m].coeffs), st[m].theta.values.clone());
    }
    let (a, b) = (&st[m - 1], &st[m]);
    let s = (t - a.time) / (b.time - a.time);
    let lerp = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + s * (q - p)).collect::<Vec<f64>>();
    (lerp(&pad(&a.coeffs), &pad(&b.coeffs)), lerp(&a.theta.values, &b.theta.values))
}

/// Trapezoid rule on a non-uniform time grid.
pub fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times.windows(2).zip(f.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}
