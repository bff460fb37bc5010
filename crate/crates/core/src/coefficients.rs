//! Constitutive laws and the Kirchhoff-type transforms built on them.
//!
//! * [`ViscosityLaw`]: μ(θ), Lipschitz, allowed to vanish at θ = 0, with
//!   μ(θ) ≥ slope·θ on `[0, θ̄]` and a positive plateau beyond.
//! * [`ConductivityLaw`]: κ(θ) with κ̲(1+θ²) ≤ κ(θ) ≤ κ̄(1+θ²), and
//!   K(θ) = ∫₀^θ κ together with its inverse.
//! * [`RenormFunction`]: the renormalization weights h, with H = ∫h and
//!   K_h = ∫κh, and the admissibility test h''h ≥ 2(h')².
//!
//! All objects are immutable after construction.

use crate::quad;
use crate::{Error, Result};

/// Relative tolerance used when a transform has to fall back on quadrature.
pub const QUAD_TOL: f64 = 1e-13;

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::Domain(format!("temperature must be >= 0, got {theta}")));
    }
    Ok(())
}

/// Temperature-dependent viscosity.
///
/// μ(θ) = slope·θ on `[0, θ̄]`, then a linear ramp from slope·θ̄ to
/// `mu_infinity` over `[θ̄, 2θ̄]`, constant afterwards. With the default
/// `mu_infinity = slope·θ̄` this is slope·min(θ, θ̄).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityLaw {
    slope: f64,
    theta_bar: f64,
    mu_infinity: f64,
}

impl ViscosityLaw {
    pub fn new(slope: f64, theta_bar: f64, mu_infinity: f64) -> Result<Self> {
        for (name, v) in [("slope", slope), ("theta_bar", theta_bar), ("mu_infinity", mu_infinity)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Construction(format!("viscosity {name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { slope, theta_bar, mu_infinity })
    }

    /// slope·min(θ, θ̄).
    pub fn canonical(slope: f64, theta_bar: f64) -> Result<Self> {
        Self::new(slope, theta_bar, slope * theta_bar)
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    pub fn mu_infinity(&self) -> f64 {
        self.mu_infinity
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.mu(theta))
    }

    /// Unchecked evaluation; negative input is treated as zero.
    #[inline]
    pub fn mu(&self, theta: f64) -> f64 {
        let t = theta.max(0.0);
        let knee = self.slope * self.theta_bar;
        if t <= self.theta_bar {
            self.slope * t
        } else if t <= 2.0 * self.theta_bar {
            knee + (self.mu_infinity - knee) * (t - self.theta_bar) / self.theta_bar
        } else {
            self.mu_infinity
        }
    }

    /// Global Lipschitz constant of μ.
    pub fn lipschitz(&self) -> f64 {
        let knee = self.slope * self.theta_bar;
        self.slope.max((self.mu_infinity - knee).abs() / self.theta_bar)
    }

    /// min μ over `[θ̄, theta_max]`.
    pub fn plateau_floor(&self, theta_max: f64) -> f64 {
        let knee = self.slope * self.theta_bar;
        if theta_max <= self.theta_bar {
            return knee;
        }
        knee.min(self.mu(theta_max))
    }
}

/// Functional form of the heat conductivity.
#[derive(Debug, Clone, PartialEq)]
pub enum ConductivityForm {
    /// κ(θ) = κ̲(1 + θ²).
    Quadratic,
    /// Piecewise-linear table starting at θ = 0; beyond the last node κ keeps
    /// the shape κ_last·(1+θ²)/(1+θ_last²).
    Tabulated { theta: Vec<f64>, kappa: Vec<f64> },
}

/// Heat conductivity with quadratic growth bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityLaw {
    kappa_lo: f64,
    kappa_hi: f64,
    form: ConductivityForm,
    // K at each table node (tabulated form only)
    cumulative: Vec<f64>,
}

impl ConductivityLaw {
    pub fn quadratic(kappa_lo: f64, kappa_hi: f64) -> Result<Self> {
        Self::check_bounds(kappa_lo, kappa_hi)?;
        Ok(Self { kappa_lo, kappa_hi, form: ConductivityForm::Quadratic, cumulative: Vec::new() })
    }

    pub fn tabulated(kappa_lo: f64, kappa_hi: f64, theta: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        Self::check_bounds(kappa_lo, kappa_hi)?;
        if theta.len() < 2 || theta.len() != kappa.len() {
            return Err(Error::Construction("conductivity table needs >= 2 (theta, kappa) pairs".into()));
        }
        if theta[0] != 0.0 {
            return Err(Error::Construction("conductivity table must start at theta = 0".into()));
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Construction("conductivity table theta must be strictly increasing".into()));
        }
        let mut cumulative = vec![0.0; theta.len()];
        for i in 1..theta.len() {
            cumulative[i] = cumulative[i - 1] + 0.5 * (kappa[i] + kappa[i - 1]) * (theta[i] - theta[i - 1]);
        }
        let law = Self {
            kappa_lo,
            kappa_hi,
            form: ConductivityForm::Tabulated { theta: theta.clone(), kappa: kappa.clone() },
            cumulative,
        };
        // growth bounds on the nodes and on a dense sample (the tail is a
        // fixed multiple of 1+θ², so checking up to 2θ_last covers it)
        let last = *theta.last().unwrap();
        let samples = theta.iter().copied().chain((0..=10_000).map(|i| 2.0 * last * i as f64 / 10_000.0));
        for t in samples {
            let k = law.k(t);
            let g = 1.0 + t * t;
            if !(k > 0.0) || k < kappa_lo * g * (1.0 - 1e-12) || k > kappa_hi * g * (1.0 + 1e-12) {
                return Err(Error::Construction(format!(
                    "tabulated conductivity violates {kappa_lo}(1+θ²) <= κ(θ) <= {kappa_hi}(1+θ²) at θ = {t} (κ = {k})"
                )));
            }
        }
        Ok(law)
    }

    fn check_bounds(kappa_lo: f64, kappa_hi: f64) -> Result<()> {
        if !(kappa_lo.is_finite() && kappa_lo > 0.0 && kappa_hi.is_finite() && kappa_hi > 0.0) {
            return Err(Error::Construction("conductivity bounds must be finite and > 0".into()));
        }
        if kappa_lo > kappa_hi {
            return Err(Error::Construction(format!("kappa_lo = {kappa_lo} exceeds kappa_hi = {kappa_hi}")));
        }
        Ok(())
    }

    pub fn kappa_lo(&self) -> f64 {
        self.kappa_lo
    }

    pub fn kappa_hi(&self) -> f64 {
        self.kappa_hi
    }

    pub fn form(&self) -> &ConductivityForm {
        &self.form
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.k(theta))
    }

    /// Unchecked κ(θ); negative input is treated as zero.
    #[inline]
    pub fn k(&self, theta: f64) -> f64 {
        let t = theta.max(0.0);
        match &self.form {
            ConductivityForm::Quadratic => self.kappa_lo * (1.0 + t * t),
            ConductivityForm::Tabulated { theta, kappa } => {
                let n = theta.len();
                let last = theta[n - 1];
                if t >= last {
                    return kappa[n - 1] * (1.0 + t * t) / (1.0 + last * last);
                }
                let i = segment(theta, t);
                let s = (t - theta[i]) / (theta[i + 1] - theta[i]);
                kappa[i] + s * (kappa[i + 1] - kappa[i])
            }
        }
    }

    /// K(θ) = ∫₀^θ κ.
    pub fn kirchhoff(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.big_k(theta))
    }

    #[inline]
    pub fn big_k(&self, theta: f64) -> f64 {
        let t = theta.max(0.0);
        match &self.form {
            ConductivityForm::Quadratic => self.kappa_lo * (t + t * t * t / 3.0),
            ConductivityForm::Tabulated { theta, kappa } => {
                let n = theta.len();
                let last = theta[n - 1];
                if t >= last {
                    let c = kappa[n - 1] / (1.0 + last * last);
                    return self.cumulative[n - 1] + c * ((t - last) + (t * t * t - last * last * last) / 3.0);
                }
                let i = segment(theta, t);
                let k_t = self.k(t);
                self.cumulative[i] + 0.5 * (kappa[i] + k_t) * (t - theta[i])
            }
        }
    }

    /// θ = K⁻¹(y) by safeguarded Newton iteration.
    pub fn kirchhoff_inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("Kirchhoff value must be >= 0, got {y}")));
        }
        Ok(self.big_k_inv(y))
    }

    pub fn big_k_inv(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.big_k(hi) < y {
            lo = hi;
            hi *= 2.0;
        }
        // K is convex-ish and increasing; start from the linear guess
        let mut t = if matches!(self.form, ConductivityForm::Quadratic) {
            quadratic_guess(y / self.kappa_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let f = self.big_k(t) - y;
            if f == 0.0 {
                return t;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = f / self.k(t);
            let mut next = t - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.max(f64::MIN_POSITIVE) {
                return next;
            }
            t = next;
        }
        t
    }
}

// Cardano root of t + t³/3 = s.
fn quadratic_guess(s: f64) -> f64 {
    // t³ + 3t − 3s = 0
    let q = -1.5 * s;
    let disc = (q * q + 1.0).sqrt();
    (-q + disc).cbrt() + (-q - disc).cbrt()
}

fn segment(nodes: &[f64], t: f64) -> usize {
    match nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(nodes.len() - 2),
        Err(i) => (i - 1).min(nodes.len() - 2),
    }
}

/// Tabulated renormalization function with optional derivative tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRenorm {
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub dh: Option<Vec<f64>>,
    pub d2h: Option<Vec<f64>>,
}

/// Renormalization weight h and its derivative data.
#[derive(Debug, Clone, PartialEq)]
pub enum RenormFunction {
    /// h(z) = (1+z)^{-l}.
    Power { exponent: f64 },
    /// h(z) = 1/(z+ω) while z+ω ≤ cap, zero beyond.
    LogTruncated { omega: f64, cap: f64 },
    /// h(z) = e^{-rz}; not admissible, kept as the reference counterexample.
    Exponential { rate: f64 },
    Sampled(SampledRenorm),
}

/// Outcome of [`RenormFunction::check_admissible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub passes: bool,
    /// min over samples of h''h − 2(h')².
    pub worst_margin: f64,
    pub worst_z: f64,
    pub finite_positive_at_zero: bool,
    pub non_increasing: bool,
    pub vanishes_at_infinity: bool,
}

/// Tolerance on the margin h''h − 2(h')².
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

impl RenormFunction {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::Construction(format!("power exponent must be > 0, got {exponent}")));
        }
        Ok(Self::Power { exponent })
    }

    pub fn log_truncated(omega: f64, cap: f64) -> Result<Self> {
        if !(omega > 0.0 && cap > omega && cap.is_finite()) {
            return Err(Error::Construction(format!("need 0 < omega < cap, got omega = {omega}, cap = {cap}")));
        }
        Ok(Self::LogTruncated { omega, cap })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Construction(format!("rate must be > 0, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn sampled(z: Vec<f64>, h: Vec<f64>, dh: Option<Vec<f64>>, d2h: Option<Vec<f64>>) -> Result<Self> {
        let n = z.len();
        if n < 2 || h.len() != n || dh.as_ref().is_some_and(|d| d.len() != n) || d2h.as_ref().is_some_and(|d| d.len() != n) {
            return Err(Error::Construction("sampled h needs >= 2 nodes and equal-length tables".into()));
        }
        if z[0] != 0.0 || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Construction("sampled h nodes must start at 0 and increase".into()));
        }
        Ok(Self::Sampled(SampledRenorm { z, h, dh, d2h }))
    }

    /// h(z) for z ≥ 0.
    pub fn value(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        match self {
            Self::Power { exponent } => (1.0 + z).powf(-exponent),
            Self::LogTruncated { omega, cap } => {
                if z + omega <= *cap {
                    1.0 / (z + omega)
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => (-rate * z).exp(),
            Self::Sampled(s) => interp(&s.z, &s.h, z),
        }
    }

    pub fn derivative(&self, z: f64) -> Result<f64> {
        let z = z.max(0.0);
        Ok(match self {
            Self::Power { exponent: l } => -l * (1.0 + z).powf(-l - 1.0),
            Self::LogTruncated { omega, cap } => {
                if z + omega <= *cap {
                    -1.0 / ((z + omega) * (z + omega))
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => -rate * (-rate * z).exp(),
            Self::Sampled(s) => match &s.dh {
                Some(d) => interp(&s.z, d, z),
                None => return Err(Error::Capability("sampled h carries no first-derivative table".into())),
            },
        })
    }

    pub fn second_derivative(&self, z: f64) -> Result<f64> {
        let z = z.max(0.0);
        Ok(match self {
            Self::Power { exponent: l } => l * (l + 1.0) * (1.0 + z).powf(-l - 2.0),
            Self::LogTruncated { omega, cap } => {
                if z + omega <= *cap {
                    2.0 / (z + omega).powi(3)
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => rate * rate * (-rate * z).exp(),
            Self::Sampled(s) => match &s.d2h {
                Some(d) => interp(&s.z, d, z),
                None => return Err(Error::Capability("sampled h carries no second-derivative table".into())),
            },
        })
    }

    /// H(θ) = ∫₀^θ h.
    pub fn antiderivative(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.big_h(theta))
    }

    pub fn big_h(&self, theta: f64) -> f64 {
        let t = theta.max(0.0);
        match self {
            Self::Power { exponent: l } => power_integral(-l, t),
            Self::LogTruncated { omega, cap } => {
                let top = t.min(cap - omega);
                ((top + omega) / omega).ln()
            }
            Self::Exponential { rate } => -(-rate * t).exp_m1() / rate,
            Self::Sampled(s) => {
                let mut acc = 0.0;
                for i in 0..s.z.len() - 1 {
                    let (a, b) = (s.z[i], s.z[i + 1]);
                    if t <= a {
                        return acc;
                    }
                    let e = t.min(b);
                    let he = interp(&s.z, &s.h, e);
                    acc += 0.5 * (s.h[i] + he) * (e - a);
                }
                let last = *s.z.last().unwrap();
                if t > last {
                    acc += s.h.last().unwrap() * (t - last);
                }
                acc
            }
        }
    }

    /// K_h(θ) = ∫₀^θ κh, closed form where one exists, quadrature otherwise.
    pub fn weighted_kirchhoff(&self, law: &ConductivityLaw, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.big_k_h(law, theta))
    }

    pub fn big_k_h(&self, law: &ConductivityLaw, theta: f64) -> f64 {
        let t = theta.max(0.0);
        if let ConductivityForm::Quadratic = law.form {
            let kl = law.kappa_lo;
            match self {
                Self::Power { exponent: l } => {
                    // 1+z² = (1+z)² − 2(1+z) + 2
                    return kl * (power_integral(2.0 - l, t) - 2.0 * power_integral(1.0 - l, t) + 2.0 * power_integral(-l, t));
                }
                Self::LogTruncated { omega, cap } => {
                    let z1 = t.min(cap - omega);
                    let s1 = z1 + omega;
                    // (1+z²)/(z+ω) = s − 2ω + (1+ω²)/s with s = z+ω
                    return kl * (0.5 * (s1 * s1 - omega * omega) - 2.0 * omega * z1 + (1.0 + omega * omega) * (s1 / omega).ln());
                }
                Self::Exponential { rate: r } => {
                    let e = (-r * t).exp();
                    let zeroth = -(-r * t).exp_m1() / r;
                    let second = (2.0 - e * (r * r * t * t + 2.0 * r * t + 2.0)) / (r * r * r);
                    return kl * (zeroth + second);
                }
                Self::Sampled(_) => {}
            }
        }
        self.weighted_kirchhoff_quadrature(law, t)
    }

    /// K_h by adaptive quadrature, split at every kink of κ and h.
    pub fn weighted_kirchhoff_quadrature(&self, law: &ConductivityLaw, theta: f64) -> f64 {
        let mut breaks = vec![0.0, theta];
        if let ConductivityForm::Tabulated { theta: nodes, .. } = &law.form {
            breaks.extend(nodes.iter().copied());
        }
        match self {
            Self::LogTruncated { omega, cap } => breaks.push(cap - omega),
            Self::Sampled(s) => breaks.extend(s.z.iter().copied()),
            _ => {}
        }
        breaks.retain(|b| *b >= 0.0 && *b <= theta);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        breaks
            .windows(2)
            .map(|w| {
                // evaluate at interior points only so jumps at panel ends are harmless
                let (a, b) = (w[0], w[1]);
                quad::integrate(|z| law.k(z) * self.value(z.clamp(a, b)), a, b, QUAD_TOL)
            })
            .sum()
    }

    /// Samples `n_samples` equispaced points of `[0, z_max]` and checks
    /// 0 < h(0) < ∞, monotonicity, decay at infinity and h''h ≥ 2(h')².
    pub fn check_admissible(&self, z_max: f64, n_samples: usize) -> Result<AdmissibilityReport> {
        if n_samples < 2 {
            return Err(Error::Argument("admissibility check needs at least 2 samples".into()));
        }
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(Error::Argument(format!("z_max must be finite and > 0, got {z_max}")));
        }
        let h0 = self.value(0.0);
        let finite_positive_at_zero = h0.is_finite() && h0 > 0.0;
        let vanishes_at_infinity = match self {
            Self::Power { .. } | Self::LogTruncated { .. } | Self::Exponential { .. } => true,
            Self::Sampled(s) => s.h.last().unwrap().abs() <= 1e-12 * h0.abs().max(1.0),
        };
        let mut non_increasing = true;
        let mut worst_margin = f64::INFINITY;
        let mut worst_z = 0.0;
        let mut margin_ok = true;
        let mut prev = h0;
        for i in 0..n_samples {
            let z = z_max * i as f64 / (n_samples - 1) as f64;
            let h = self.value(z);
            let d1 = self.derivative(z)?;
            let d2 = self.second_derivative(z)?;
            if h > prev * (1.0 + 1e-14) + 1e-300 || d1 > 0.0 {
                non_increasing = false;
            }
            prev = h;
            let lhs = d2 * h;
            let rhs = 2.0 * d1 * d1;
            let margin = lhs - rhs;
            if margin < -ADMISSIBILITY_TOL * lhs.abs().max(rhs).max(1.0) {
                margin_ok = false;
            }
            if margin < worst_margin {
                worst_margin = margin;
                worst_z = z;
            }
        }
        Ok(AdmissibilityReport {
            passes: finite_positive_at_zero && non_increasing && vanishes_at_infinity && margin_ok,
            worst_margin,
            worst_z,
            finite_positive_at_zero,
            non_increasing,
            vanishes_at_infinity,
        })
    }
}

// ∫₀^t (1+z)^p dz
fn power_integral(p: f64, t: f64) -> f64 {
    let q = p + 1.0;
    let lg = t.ln_1p();
    if q.abs() < 1e-14 {
        lg
    } else {
        (q * lg).exp_m1() / q
    }
}

fn interp(nodes: &[f64], values: &[f64], z: f64) -> f64 {
    let n = nodes.len();
    if z >= nodes[n - 1] {
        return values[n - 1];
    }
    let i = segment(nodes, z);
    let s = (z - nodes[i]) / (nodes[i + 1] - nodes[i]);
    values[i] + s * (values[i + 1] - values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ConductivityLaw {
        ConductivityLaw::quadratic(1.0, 1.0).unwrap()
    }

    #[test]
    fn viscosity_examples() {
        let law = ViscosityLaw::canonical(1.0, 1.0).unwrap();
        assert_eq!(law.eval(0.0).unwrap(), 0.0);
        assert_eq!(law.eval(0.5).unwrap(), 0.5);
        assert_eq!(law.eval(10.0).unwrap(), 1.0);
        assert!(matches!(law.eval(-1.0), Err(Error::Domain(_))));
        assert_eq!(law.lipschitz(), 1.0);
    }

    #[test]
    fn viscosity_ramp_to_custom_plateau() {
        let law = ViscosityLaw::new(2.0, 0.5, 3.0).unwrap();
        assert_eq!(law.mu(0.5), 1.0);
        assert_eq!(law.mu(0.75), 2.0);
        assert_eq!(law.mu(5.0), 3.0);
        assert_eq!(law.lipschitz(), 4.0);
        assert_eq!(law.plateau_floor(10.0), 1.0);
    }

    #[test]
    fn conductivity_examples() {
        let law = unit();
        assert_eq!(law.eval(0.0).unwrap(), 1.0);
        assert_eq!(law.eval(2.0).unwrap(), 5.0);
        let wide = ConductivityLaw::quadratic(1.0, 2.0).unwrap();
        let k = wide.eval(1.0).unwrap();
        assert!((2.0..=4.0).contains(&k));
        assert!(matches!(law.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn conductivity_construction_rejects_bad_bounds() {
        assert!(ConductivityLaw::quadratic(2.0, 1.0).is_err());
        assert!(ConductivityLaw::quadratic(0.0, 1.0).is_err());
        // 3(1+θ²) is above κ̄ = 2
        let r = ConductivityLaw::tabulated(1.0, 2.0, vec![0.0, 1.0], vec![3.0, 6.0]);
        assert!(matches!(r, Err(Error::Construction(_))));
    }

    #[test]
    fn kirchhoff_examples() {
        let law = unit();
        assert_eq!(law.kirchhoff(0.0).unwrap(), 0.0);
        assert!((law.kirchhoff(2.0).unwrap() - 14.0 / 3.0).abs() < 1e-14);
        assert!((law.kirchhoff(1.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(law.kirchhoff_inverse(0.0).unwrap(), 0.0);
        assert!((law.kirchhoff_inverse(14.0 / 3.0).unwrap() - 2.0).abs() < 1e-12);
        for t in [0.1, 1.0, 7.0] {
            let back = law.kirchhoff_inverse(law.kirchhoff(t).unwrap()).unwrap();
            assert!((back - t).abs() < 1e-8);
        }
    }

    #[test]
    fn tabulated_kirchhoff_matches_quadrature() {
        let theta = vec![0.0, 0.5, 1.0, 2.0];
        let kappa: Vec<f64> = theta.iter().map(|t| 1.5 * (1.0 + t * t)).collect();
        let law = ConductivityLaw::tabulated(1.0, 2.0, theta, kappa).unwrap();
        for t in [0.3, 1.7, 4.0] {
            let q = quad::integrate(|z| law.k(z), 0.0, t, 1e-14);
            let q = if t > 2.0 { quad::integrate(|z| law.k(z), 0.0, 2.0, 1e-14) + quad::integrate(|z| law.k(z), 2.0, t, 1e-14) } else { q };
            assert!((law.big_k(t) - q).abs() < 1e-10 * q, "t={t}");
            assert!((law.big_k_inv(law.big_k(t)) - t).abs() < 1e-10);
        }
    }

    #[test]
    fn h_antiderivative_examples() {
        let h1 = RenormFunction::power(1.0).unwrap();
        assert!((h1.antiderivative(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(h1.antiderivative(0.0).unwrap(), 0.0);
        let half = RenormFunction::power(0.5).unwrap();
        assert!((half.antiderivative(3.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn k_h_examples() {
        let law = unit();
        let h1 = RenormFunction::power(1.0).unwrap();
        let expect = -0.5 + 2.0 * 2f64.ln();
        assert!((h1.weighted_kirchhoff(&law, 1.0).unwrap() - expect).abs() < 1e-14);
        assert_eq!(h1.weighted_kirchhoff(&law, 0.0).unwrap(), 0.0);
        for t in [0.5, 2.0, 5.0] {
            let closed = h1.big_k_h(&law, t);
            let q = h1.weighted_kirchhoff_quadrature(&law, t);
            assert!((closed - q).abs() <= 1e-10 * q.abs(), "t={t}: {closed} vs {q}");
        }
    }

    #[test]
    fn admissibility_examples() {
        let h1 = RenormFunction::power(1.0).unwrap();
        let r = h1.check_admissible(50.0, 501).unwrap();
        assert!(r.passes);
        assert!(r.worst_margin.abs() < 1e-15);
        assert!(RenormFunction::power(0.5).unwrap().check_admissible(50.0, 501).unwrap().passes);
        let e = RenormFunction::exponential(1.0).unwrap().check_admissible(50.0, 501).unwrap();
        assert!(!e.passes);
        assert!((e.worst_margin + 1.0).abs() < 1e-15);
        assert_eq!(e.worst_z, 0.0);
    }

    #[test]
    fn admissibility_needs_derivative_tables() {
        let s = RenormFunction::sampled(vec![0.0, 1.0], vec![1.0, 0.0], None, None).unwrap();
        assert!(matches!(s.check_admissible(1.0, 3), Err(Error::Capability(_))));
        assert!(matches!(RenormFunction::power(1.0).unwrap().check_admissible(1.0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn truncated_family_is_admissible_with_equality() {
        let h = RenormFunction::log_truncated(0.1, 2.0).unwrap();
        let r = h.check_admissible(5.0, 1001).unwrap();
        assert!(r.passes, "{r:?}");
        assert!((h.big_h(1.0) - (1.1f64 / 0.1).ln()).abs() < 1e-14);
        assert!((h.big_h(10.0) - (2.0f64 / 0.1).ln()).abs() < 1e-14);
        let law = unit();
        for t in [0.5, 1.9, 3.0] {
            let closed = h.big_k_h(&law, t);
            let q = h.weighted_kirchhoff_quadrature(&law, t);
            assert!((closed - q).abs() <= 1e-10 * q, "t={t}: {closed} vs {q}");
        }
    }

    #[test]
    fn exponential_k_h_closed_form() {
        let h = RenormFunction::exponential(0.7).unwrap();
        let law = ConductivityLaw::quadratic(2.0, 2.0).unwrap();
        for t in [0.3, 4.0] {
            let closed = h.big_k_h(&law, t);
            let q = h.weighted_kirchhoff_quadrature(&law, t);
            assert!((closed - q).abs() <= 1e-10 * q);
        }
    }
}
