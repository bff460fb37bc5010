//! De Giorgi level-set iteration for a lower bound on the temperature.

use crate::coupler::{trapezoid, Trajectory};
use crate::par;
use crate::{Error, Result};

/// [ln(C_k/(θ+ω))]₊.
pub fn truncation_phi(theta: f64, c_k: f64, omega: f64) -> Result<f64> {
    if !(theta >= 0.0) || !(omega >= 0.0) || !(c_k > 0.0) {
        return Err(Error::Argument(format!("need θ ≥ 0, ω ≥ 0, C_k > 0; got θ = {theta}, ω = {omega}, C_k = {c_k}")));
    }
    let s = theta + omega;
    if s == 0.0 {
        return Err(Error::Range("truncation is infinite at θ + ω = 0".into()));
    }
    Ok((c_k / s).ln().max(0.0))
}

/// Ladder of truncation levels C_k = exp(−M(1 − 2^{−k})).
#[derive(Debug, Clone, PartialEq)]
pub struct DeGiorgiLadder {
    pub m: f64,
    pub omega: f64,
    pub k_max: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl DeGiorgiLadder {
    pub fn new(m: f64, omega: f64, k_max: usize) -> Result<Self> {
        Self::with_exponents(m, omega, k_max, 2.0, 0.5)
    }

    pub fn with_exponents(m: f64, omega: f64, k_max: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Argument(format!("M must be positive, got {m}")));
        }
        if !(omega >= 0.0) {
            return Err(Error::Argument(format!("ω must be nonnegative, got {omega}")));
        }
        if !(alpha > 1.0) || !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Argument(format!("need α > 1 and 0 < β < 1, got α = {alpha}, β = {beta}")));
        }
        let ladder = Self { m, omega, k_max, alpha, beta };
        if !(ladder.gamma() > 1.0) {
            return Err(Error::Argument(format!("γ = {} must exceed 1", ladder.gamma())));
        }
        Ok(ladder)
    }

    /// M = 2 ln(1/θ̲) + ln 4, so that e^{−M/2} = θ̲/2.
    pub fn for_floor(theta_floor: f64, omega: f64, k_max: usize) -> Result<Self> {
        if !(theta_floor > 0.0) {
            return Err(Error::Argument(format!("θ floor must be positive, got {theta_floor}")));
        }
        Self::new(default_m(theta_floor), omega, k_max)
    }

    pub fn gamma(&self) -> f64 {
        (0.5 * (self.alpha + self.beta)).min(self.alpha)
    }

    pub fn level(&self, k: usize) -> f64 {
        (-self.m * (1.0 - 0.5f64.powi(k as i32))).exp()
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..=self.k_max).map(|k| self.level(k)).collect()
    }
}

pub fn default_m(theta_floor: f64) -> f64 {
    2.0 * (1.0 / theta_floor).ln() + 4f64.ln()
}

/// U_k = sup_t ∫(δ+ϱ)φ_k + 2(1−δ)∫∫ μ/(θ+ω)·1|D(u)|² + ∫∫ κ/(θ+ω)²·1|∇θ|².
pub fn level_energy(traj: &Trajectory, k: usize, ladder: &DeGiorgiLadder, delta: f64) -> Result<f64> {
    if traj.states.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    if k > ladder.k_max {
        return Err(Error::Argument(format!("level {k} beyond k_max = {}", ladder.k_max)));
    }
    let grid = &traj.grid;
    let ck = ladder.level(k);
    let omega = ladder.omega;
    let visc = &traj.config.viscosity;
    let cond = &traj.config.conductivity;
    let n = grid.n_nodes();
    let mut sup: f64 = 0.0;
    let mut dens = Vec::with_capacity(traj.states.len());
    for (m, s) in traj.states.iter().enumerate() {
        let (r, t) = (&s.rho.values, &s.theta.values);
        let phis = par::map_range(n, |i| truncation_phi(t[i].max(0.0), ck, omega));
        let phis: Vec<f64> = phis.into_iter().collect::<Result<_>>()?;
        sup = sup.max(grid.integrate_with(|i| (delta + r[i]) * phis[i]));
        let vel = traj.velocity(m);
        let g = grid.grad(&s.theta);
        let inside = |i: usize| t[i] + omega <= ck;
        let d = grid.integrate_with(|i| {
            if !inside(i) {
                return 0.0;
            }
            let w = t[i] + omega;
            2.0 * (1.0 - delta) * visc.mu(t[i]) / w * vel.strain_sq(i)
                + cond.k(t[i]) / (w * w) * (g.x[i] * g.x[i] + g.y[i] * g.y[i])
        });
        dens.push(d);
    }
    let times = traj.times();
    let integral = if times.len() > 1 { trapezoid(&times, &dens) } else { 0.0 };
    Ok(sup + integral)
}

/// Gate on U_{k_max} relative to U_0.
pub const DECAY_TOL: f64 = 1e-6;

/// Outcome of [`ladder_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub m: f64,
    pub omega: f64,
    pub k_max: usize,
    pub levels: Vec<f64>,
    pub u: Vec<f64>,
    pub decay_ok: bool,
    pub lower_bound: f64,
    pub observed_min_theta: f64,
    /// min θ ≥ lower_bound; only meaningful when `decay_ok`.
    pub bound_holds: bool,
    /// Largest U_k·M^α/(2^{kα}U_{k−1}^γ) over pairs with U_{k−1} > 0.
    pub fitted_c: Option<f64>,
}

pub fn ladder_run(traj: &Trajectory, theta_floor: f64, k_max: usize, omega: f64, delta: f64) -> Result<Certificate> {
    let ladder = DeGiorgiLadder::for_floor(theta_floor, omega, k_max)?;
    certify(traj, &ladder, delta)
}

/// Certificate for a caller-chosen ladder.
pub fn certify(traj: &Trajectory, ladder: &DeGiorgiLadder, delta: f64) -> Result<Certificate> {
    let u: Vec<f64> = par::map_range(ladder.k_max + 1, |k| level_energy(traj, k, ladder, delta))
        .into_iter()
        .collect::<Result<_>>()?;
    let monotone = u.windows(2).all(|w| w[1] <= w[0]);
    let last = *u.last().expect("k_max + 1 levels");
    let decay_ok = monotone && last <= DECAY_TOL * u[0].max(1e-30);
    let lower_bound = (-ladder.m).exp() - ladder.omega;
    let observed_min_theta = traj.min_theta();
    let gamma = ladder.gamma();
    let fitted_c = (1..u.len())
        .filter(|&k| u[k - 1] > 0.0)
        .map(|k| u[k] * ladder.m.powf(ladder.alpha) / (2f64.powf(k as f64 * ladder.alpha) * u[k - 1].powf(gamma)))
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))));
    Ok(Certificate {
        m: ladder.m,
        omega: ladder.omega,
        k_max: ladder.k_max,
        levels: ladder.levels(),
        u,
        decay_ok,
        lower_bound,
        observed_min_theta,
        bound_holds: observed_min_theta >= lower_bound,
        fitted_c,
    })
}

/// Hypotheses of the abstract recursion lemma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma62Params {
    pub c: f64,
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub k: f64,
    pub u0: f64,
}

impl Lemma62Params {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c >= 0.0
            && self.a >= 1.0
            && self.beta1 > 1.0
            && self.beta2 > self.beta1
            && self.k > 0.0
            && self.u0 >= 0.0
            && [self.c, self.a, self.beta1, self.beta2, self.k, self.u0].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid recursion parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma62Outcome {
    /// U_0, U_1, … up to the last finite value.
    pub sequence: Vec<f64>,
    pub converged: bool,
}

/// Limit below which the iterated sequence counts as converged.
pub const CONVERGED_BELOW: f64 = 1e-12;

/// U_k = C·A^k/K·(U_{k−1}^{β₁} + U_{k−1}^{β₂}).
pub fn lemma62_iterate(p: &Lemma62Params, k_steps: usize) -> Result<Lemma62Outcome> {
    p.validate()?;
    let mut seq = Vec::with_capacity(k_steps + 1);
    seq.push(p.u0);
    let mut u = p.u0;
    for k in 1..=k_steps {
        let next = p.c * p.a.powi(k as i32) / p.k * (u.powf(p.beta1) + u.powf(p.beta2));
        if !next.is_finite() {
            return Ok(Lemma62Outcome { sequence: seq, converged: false });
        }
        seq.push(next);
        u = next;
    }
    Ok(Lemma62Outcome { converged: u < CONVERGED_BELOW, sequence: seq })
}

/// Iteration depth used by [`lemma62_threshold`].
pub const THRESHOLD_STEPS: usize = 200;

/// Smallest K in `range` (up to bisection accuracy) for which the
/// recursion converges; `p.k` is ignored.
pub fn lemma62_threshold(p: &Lemma62Params, range: (f64, f64)) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Argument(format!("invalid search range [{lo}, {hi}]")));
    }
    let converges = |k: f64| -> Result<bool> { Ok(lemma62_iterate(&Lemma62Params { k, ..*p }, THRESHOLD_STEPS)?.converged) };
    if converges(lo)? {
        return Ok(lo);
    }
    if !converges(hi)? {
        return Err(Error::Range(format!("recursion diverges on all of [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if converges(mid.exp())? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_examples() {
        assert!((truncation_phi(0.5, 1.0, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(truncation_phi(0.7, 0.5, 0.0).unwrap(), 0.0);
        assert!((truncation_phi(0.0, 0.2, 0.1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(truncation_phi(0.0, 1.0, 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn ladder_levels() {
        let l = DeGiorgiLadder::for_floor(0.1, 0.0, 10).unwrap();
        assert_eq!(l.level(0), 1.0);
        assert!((l.gamma() - 1.25).abs() < 1e-15);
        assert!((-l.m / 2.0).exp() < 0.1);
        let c = l.levels();
        for k in 1..c.len() {
            assert!(c[k] < c[k - 1]);
            let lhs = (c[k - 1] / c[k]).ln().powf(-l.alpha);
            let rhs = 2f64.powf(k as f64 * l.alpha) / l.m.powf(l.alpha);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn recursion_examples() {
        let p = Lemma62Params { c: 1.0, a: 2.0, beta1: 2.0, beta2: 3.0, k: 100.0, u0: 1.0 };
        let out = lemma62_iterate(&p, 50).unwrap();
        assert!((out.sequence[1] - 0.04).abs() < 1e-12 * 0.04);
        assert!((out.sequence[2] - 6.656e-5).abs() < 1e-12 * 6.656e-5);
        assert!(out.converged);
        let zero = lemma62_iterate(&Lemma62Params { u0: 0.0, ..p }, 20).unwrap();
        assert!(zero.converged && zero.sequence.iter().all(|v| *v == 0.0));
        assert!(!lemma62_iterate(&Lemma62Params { k: 1e-6, ..p }, 200).unwrap().converged);
        assert!(lemma62_iterate(&Lemma62Params { beta2: 1.5, ..p }, 5).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = Lemma62Params { c: 1.0, a: 2.0, beta1: 2.0, beta2: 3.0, k: 100.0, u0: 1.0 };
        let k0 = lemma62_threshold(&p, (1e-6, 1e6)).unwrap();
        assert!(k0 < 100.0 && k0 > 1e-6);
        for f in [1.01, 2.0, 10.0] {
            assert!(lemma62_iterate(&Lemma62Params { k: f * k0, ..p }, THRESHOLD_STEPS).unwrap().converged);
        }
        let k2 = lemma62_threshold(&Lemma62Params { c: 2.0, ..p }, (1e-6, 1e6)).unwrap();
        assert!((k2 - 2.0 * k0).abs() < 1e-9 * k2);
        assert_eq!(lemma62_threshold(&Lemma62Params { u0: 0.0, ..p }, (0.5, 10.0)).unwrap(), 0.5);
        assert!(matches!(lemma62_threshold(&p, (1e-9, 1e-8)), Err(Error::Range(_))));
    }
}
