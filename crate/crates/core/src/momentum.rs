//! One implicit step of the projected momentum equation.
//!
//! With σ = √ϱ the step solves
//!
//! (M(ϱ') + dt·(A + N))·c' = M(σσ')·c
//!
//! where M(·) is the weighted Gram matrix, A the viscous matrix at μ(θ_old)
//! plus the ε-regularization, and N = ½(T − Tᵀ) the skew part of the
//! convection matrix built with the advecting velocity w. Testing with c'
//! gives the discrete energy identity
//!
//! ½c'ᵀM(ϱ')c' − ½cᵀM(ϱ)c + dt·c'ᵀAc' = −½‖σ'u' − σu‖²
//!
//! for any density update, so the kinetic energy never increases.

use nalgebra::{DMatrix, DVector};

use crate::basis::StreamBasis;
use crate::coefficients::ViscosityLaw;
use crate::grid::{ScalarField, VectorField};
use crate::linalg;
use crate::par;
use crate::{Error, Result};

/// Result of [`step_momentum`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumOutcome {
    pub c: Vec<f64>,
    pub kinetic_old: f64,
    pub kinetic_new: f64,
    /// c'ᵀ A_μ c' = ∫ 2μ|D(u')|².
    pub strain_work: f64,
    /// ε·∫|∇u'|².
    pub eps_work: f64,
}

impl MomentumOutcome {
    /// ½‖σ'u' − σu‖², the dissipation of the time discretization.
    pub fn numerical_dissipation(&self, dt: f64) -> f64 {
        self.kinetic_old - self.kinetic_new - dt * (self.strain_work + self.eps_work)
    }
}

/// Relative tolerance of the per-step kinetic energy check.
pub const ENERGY_TOL: f64 = 1e-12;

#[allow(clippy::too_many_arguments)]
pub fn step_momentum(
    basis: &StreamBasis,
    c_old: &[f64],
    rho_old: &ScalarField,
    rho_new: &ScalarField,
    theta: &ScalarField,
    advecting: Option<&VectorField>,
    dt: f64,
    eps: f64,
    law: &ViscosityLaw,
) -> Result<MomentumOutcome> {
    let grid = basis.grid();
    let n = basis.len();
    if c_old.len() != n {
        return Err(Error::Input(format!("{} coefficients for a {n}-mode basis", c_old.len())));
    }
    for f in [rho_old, rho_new, theta] {
        grid.check_scalar(f)?;
    }
    if !(dt > 0.0) || !(eps >= 0.0) {
        return Err(Error::Argument(format!("need dt > 0 and eps >= 0, got dt = {dt}, eps = {eps}")));
    }
    let mu = ScalarField { values: par::map_range(theta.len(), |k| law.mu(theta.values[k])) };
    let sigma = ScalarField { values: par::map_range(rho_old.len(), |k| (rho_old.values[k] * rho_new.values[k]).sqrt()) };

    let m_old = basis.assemble_weighted_gram(rho_old)?;
    let m_new = basis.assemble_weighted_gram(rho_new)?;
    let m_mix = basis.assemble_weighted_gram(&sigma)?;
    let strain = basis.assemble_strain(&mu)?;
    let grad = basis.gradient_gram();
    let mut lhs: DMatrix<f64> = &m_new + (&strain + grad * eps) * dt;
    if let Some(w) = advecting {
        let t = basis.assemble_convection(rho_new, w)?;
        lhs += (&t - t.transpose()) * (0.5 * dt);
    }
    let co = DVector::from_column_slice(c_old);
    let rhs = &m_mix * &co;
    let cn = linalg::solve_dense(&lhs, &rhs)?;

    let kinetic_old = 0.5 * co.dot(&(&m_old * &co));
    let kinetic_new = 0.5 * cn.dot(&(&m_new * &cn));
    let strain_work = cn.dot(&(&strain * &cn));
    let eps_work = eps * cn.dot(&(grad * &cn));
    let out = MomentumOutcome { c: cn.iter().copied().collect(), kinetic_old, kinetic_new, strain_work, eps_work };
    if !out.c.iter().all(|v| v.is_finite()) {
        return Err(Error::Step("momentum solve produced non-finite coefficients".into()));
    }
    // ½‖σ'u' − σu‖² must be nonnegative
    let slack = out.numerical_dissipation(dt);
    if slack < -ENERGY_TOL * kinetic_old.max(kinetic_new).max(f64::MIN_POSITIVE) {
        return Err(Error::Scheme(format!("kinetic energy increased by {:.3e}", -slack)));
    }
    Ok(out)
}
