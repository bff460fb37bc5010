//! One time step of the regularized temperature equation
//! ∂t((δ+ϱ)θ) + div(ϱuθ) − ΔK(θ) + δθ³ = (1−δ)S:∇u with ∇θ·n = 0.
//!
//! The step is split into an explicit conservative upwind transport of ϱθ,
//! using the same face fluxes as the density, followed by a backward Euler
//! solve of
//!
//! (δ+ϱ')V(θ − θ_a) + dt·L K(θ) + dt·δVθ³ = dt(1−δ)V·diss
//!
//! where L is the dual-mesh graph Laplacian. The nonlinear system is solved by
//! damped Newton iteration, either on w = K(θ) (`KirchhoffNewton`) or on θ
//! with edge conductances frozen at the old temperature (`LaggedCoefficient`).
//! Both Jacobians are symmetric M-matrices, so the update keeps θ ≥ 0.

use crate::basis::Velocity;
use crate::coefficients::ConductivityLaw;
use crate::grid::{Grid, ScalarField};
use crate::linalg;
use crate::par;
use crate::transport::FaceFluxes;
use crate::{Error, Result};

/// Treatment of the Kirchhoff diffusion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    LaggedCoefficient,
    KirchhoffNewton,
}

impl Linearization {
    pub fn name(self) -> &'static str {
        match self {
            Self::LaggedCoefficient => "lagged",
            Self::KirchhoffNewton => "kirchhoff-newton",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "lagged" | "lagged-coefficient" => Some(Self::LaggedCoefficient),
            "kirchhoff-newton" | "newton" => Some(Self::KirchhoffNewton),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalStepParams {
    pub dt: f64,
    pub delta: f64,
    pub linearization: Linearization,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl ThermalStepParams {
    pub fn new(dt: f64, delta: f64) -> Result<Self> {
        let p = Self { dt, delta, linearization: Linearization::KirchhoffNewton, newton_tol: 1e-10, newton_max: 50 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be > 0, got {}", self.dt)));
        }
        // δ = 0 is allowed here for limit studies; the run configuration insists on (0,1)
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::Argument(format!("delta must lie in [0,1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Result of [`step_temperature`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalOutcome {
    pub theta: ScalarField,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    /// ∫θ³ at the new state.
    pub cubic_integral: f64,
}

/// S:∇u = 2μ|D(u)|² at every node.
pub fn dissipation_field(mu: &ScalarField, vel: &Velocity) -> ScalarField {
    ScalarField { values: par::map_range(mu.len(), |k| 2.0 * mu.values[k] * vel.strain_sq(k)) }
}

/// CG tolerance for the Newton corrections.
const CG_TOL: f64 = 1e-12;

#[allow(clippy::too_many_arguments)]
pub fn step_temperature(
    grid: &Grid,
    theta: &ScalarField,
    rho_new: &ScalarField,
    rho_old: &ScalarField,
    fluxes: &FaceFluxes,
    diss: &ScalarField,
    params: &ThermalStepParams,
    law: &ConductivityLaw,
) -> Result<ThermalOutcome> {
    params.validate()?;
    for f in [theta, rho_new, rho_old, diss] {
        grid.check_scalar(f)?;
    }
    if theta.values.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Input("temperature must be >= 0".into()));
    }
    if rho_new.values.iter().chain(&rho_old.values).any(|r| !(*r >= 0.0)) {
        return Err(Error::Input("density must be >= 0".into()));
    }
    if diss.values.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Input("dissipation must be >= 0".into()));
    }
    let n = grid.n_nodes();
    let (dt, delta) = (params.dt, params.delta);
    let v = grid.weights();

    // explicit transport of ϱθ
    let rt: Vec<f64> = par::map_range(n, |k| rho_old.values[k] * theta.values[k]);
    let adv = fluxes.upwind_divergence(grid, &rt);
    let cap: Vec<f64> = par::map_range(n, |k| (delta + rho_new.values[k]) * v[k]);
    let q_a: Vec<f64> = par::map_range(n, |k| (delta + rho_old.values[k]) * theta.values[k] * v[k] - dt * adv[k]);
    if let Some(k) = (0..n).find(|&k| q_a[k] < -1e-12 * cap[k].max(1e-300)) {
        return Err(Error::Step(format!("transported heat negative at node {k}; reduce dt")));
    }
    let source: Vec<f64> = par::map_range(n, |k| q_a[k] + dt * (1.0 - delta) * v[k] * diss.values[k]);

    // edge conductance multipliers for the lagged variant
    let (cx, cy) = match params.linearization {
        Linearization::KirchhoffNewton => (None, None),
        Linearization::LaggedCoefficient => {
            let nx = grid.nx();
            let kap: Vec<f64> = par::map_range(n, |k| law.k(theta.values[k]));
            let cx = par::map_range(grid.n_xedges(), |e| {
                let a = grid.idx(e % nx, e / nx);
                0.5 * (kap[a] + kap[a + 1])
            });
            let cy = par::map_range(grid.n_yedges(), |e| {
                let a = e;
                0.5 * (kap[a] + kap[a + nx + 1])
            });
            (Some(cx), Some(cy))
        }
    };
    let kirchhoff = params.linearization == Linearization::KirchhoffNewton;

    // θ(v) with the odd extension below zero so Newton can cross it
    let to_theta = |x: f64| -> f64 {
        if !kirchhoff {
            x
        } else if x >= 0.0 {
            law.big_k_inv(x)
        } else {
            -law.big_k_inv(-x)
        }
    };
    let dtheta = |t: f64| -> f64 {
        if kirchhoff {
            1.0 / law.k(t.abs())
        } else {
            1.0
        }
    };
    let residual = |x: &[f64], th: &[f64]| -> Vec<f64> {
        let l = grid.graph_laplacian(x, cx.as_deref(), cy.as_deref());
        par::map_range(n, |k| {
            let t = th[k];
            cap[k] * t + dt * l[k] + dt * delta * v[k] * t * t * t - source[k]
        })
    };
    let norm = |r: &[f64]| par::dot(r, r).sqrt();

    let mut x: Vec<f64> = if kirchhoff {
        par::map_range(n, |k| law.big_k(theta.values[k]))
    } else {
        theta.values.clone()
    };
    let mut th: Vec<f64> = par::map_range(n, |k| to_theta(x[k]));
    let mut r = residual(&x, &th);
    let mut rn = norm(&r);
    let scale = norm(&source).max(f64::MIN_POSITIVE);
    // diagonal of L: sum of incident edge weights
    let lap_diag: Vec<f64> = par::map_range(n, |k| node_degree(grid, k, cx.as_deref(), cy.as_deref()));
    let mut cg_total = 0;
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=params.newton_max {
        iters = it;
        let diag: Vec<f64> = par::map_range(n, |k| (cap[k] + 3.0 * dt * delta * v[k] * th[k] * th[k]) * dtheta(th[k]));
        let pre: Vec<f64> = par::map_range(n, |k| diag[k] + dt * lap_diag[k]);
        let apply = |s: &[f64], out: &mut [f64]| {
            grid.graph_laplacian_into(s, cx.as_deref(), cy.as_deref(), out);
            for k in 0..n {
                out[k] = diag[k] * s[k] + dt * out[k];
            }
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut step = vec![0.0; n];
        let info = linalg::cg(apply, &pre, &rhs, &mut step, CG_TOL, 20 * n)?;
        cg_total += info.iterations;

        // backtracking on ‖F‖
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = par::map_range(n, |k| x[k] + alpha * step[k]);
            let tt: Vec<f64> = par::map_range(n, |k| to_theta(xt[k]));
            let rt = residual(&xt, &tt);
            let rtn = norm(&rt);
            if rtn <= (1.0 - 1e-4 * alpha) * rn || rtn <= 1e-14 * scale {
                accepted = Some((xt, tt, rt, rtn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xt, tt, rt, rtn)) = accepted else {
            // no decrease possible: accept if already at round-off level
            if rn <= 1e-12 * scale {
                converged = true;
                break;
            }
            return Err(Error::Step(format!("thermal Newton line search failed (residual {rn:.3e})")));
        };
        let dmax = (0..n).map(|k| (tt[k] - th[k]).abs()).fold(0.0, f64::max);
        let tmax = tt.iter().map(|t| t.abs()).fold(0.0, f64::max).max(1.0);
        x = xt;
        th = tt;
        r = rt;
        rn = rtn;
        if dmax <= params.newton_tol * tmax && alpha == 1.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Step(format!("thermal Newton did not converge in {} iterations (residual {rn:.3e})", params.newton_max)));
    }
    if let Some(k) = (0..n).find(|&k| th[k] < -1e-12) {
        return Err(Error::Scheme(format!("negative temperature {:.3e} at node {k}", th[k])));
    }
    let values: Vec<f64> = th.into_iter().map(|t| t.max(0.0)).collect();
    let cubic_integral = grid.integrate_with(|k| values[k].powi(3));
    Ok(ThermalOutcome { theta: ScalarField { values }, newton_iterations: iters, cg_iterations: cg_total, cubic_integral })
}

fn node_degree(grid: &Grid, k: usize, cx: Option<&[f64]>, cy: Option<&[f64]>) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (i, j) = grid.ij(k);
    let ex = |i: usize| grid.gx(j) * cx.map_or(1.0, |c| c[j * nx + i]);
    let ey = |j: usize| grid.gy(i) * cy.map_or(1.0, |c| c[j * (nx + 1) + i]);
    let mut s = 0.0;
    if i > 0 {
        s += ex(i - 1);
    }
    if i < nx {
        s += ex(i);
    }
    if j > 0 {
        s += ey(j - 1);
    }
    if j < ny {
        s += ey(j);
    }
    s
}
