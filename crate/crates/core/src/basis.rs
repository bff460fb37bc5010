//! Divergence-free, no-slip Galerkin velocity space.
//!
//! Mode `(p, q)` has stream function ψ = X_p(x)·Y_q(y) with
//! X_p(x) = cos((p−1)πx/L) − cos((p+1)πx/L), which vanishes together with its
//! derivative at both ends. The velocity mode is η = ∇⊥ψ = (∂_yψ, −∂_xψ), so
//! it is divergence free and zero on the walls. Nodal values of η and of its
//! gradient are evaluated from the closed form.
//!
//! Modes are ordered by p + q, ties broken by ascending p.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::grid::{Grid, ScalarField, VectorField};
use crate::{linalg, par};
use crate::{Error, Result};

/// Component order of velocity gradients: `[∂x ux, ∂y ux, ∂x uy, ∂y uy]`.
pub type Gradient = [Vec<f64>; 4];

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    ux: Vec<f64>,
    uy: Vec<f64>,
    grad: Gradient,
    // ψ at cell centres, row-major nx × ny
    psi: Vec<f64>,
}

/// The space X_n.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBasis {
    grid: Grid,
    indices: Vec<(usize, usize)>,
    modes: Vec<Mode>,
    grad_gram: DMatrix<f64>,
}

/// Galerkin coordinates of a velocity in X_n.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinCoeffs {
    pub c: Vec<f64>,
    pub time: f64,
}

/// A reconstructed velocity with its analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub u: VectorField,
    pub grad: Gradient,
}

// X_p and its first two derivatives at x on [0, l].
fn profile(p: usize, l: f64, x: f64) -> (f64, f64, f64) {
    let a = (p as f64 - 1.0) * PI / l;
    let b = (p as f64 + 1.0) * PI / l;
    let (sa, ca) = (a * x).sin_cos();
    let (sb, cb) = (b * x).sin_cos();
    (ca - cb, -a * sa + b * sb, -a * a * ca + b * b * cb)
}

/// The first `n` mode indices in basis order.
pub fn mode_indices(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n);
    let mut total = 2;
    while out.len() < n {
        for p in 1..total {
            if out.len() == n {
                break;
            }
            out.push((p, total - p));
        }
        total += 1;
    }
    out
}

impl StreamBasis {
    pub fn new(grid: &Grid, n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Argument("basis needs at least one mode".into()));
        }
        let indices = mode_indices(n_modes);
        for &(p, q) in &indices {
            if 2 * (p + 1) > grid.nx() || 2 * (q + 1) > grid.ny() {
                return Err(Error::Resolution(format!(
                    "{n_modes} modes need mode ({p},{q}), which a {}x{} grid cannot resolve",
                    grid.nx(),
                    grid.ny()
                )));
            }
        }
        let (lx, ly) = (grid.lx(), grid.ly());
        let (nx, ny) = (grid.nx(), grid.ny());
        let modes: Vec<Mode> = par::run_all(indices.clone(), |&(p, q)| {
            let xs: Vec<_> = (0..=nx).map(|i| profile(p, lx, grid.x(i))).collect();
            let ys: Vec<_> = (0..=ny).map(|j| profile(q, ly, grid.y(j))).collect();
            let n = grid.n_nodes();
            let mut m = Mode {
                ux: vec![0.0; n],
                uy: vec![0.0; n],
                grad: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
                psi: Vec::with_capacity(nx * ny),
            };
            for (j, &(y0, y1, y2)) in ys.iter().enumerate() {
                for (i, &(x0, x1, x2)) in xs.iter().enumerate() {
                    let k = grid.idx(i, j);
                    m.ux[k] = x0 * y1;
                    m.uy[k] = -x1 * y0;
                    m.grad[0][k] = x1 * y1;
                    m.grad[1][k] = x0 * y2;
                    m.grad[2][k] = -x2 * y0;
                    m.grad[3][k] = -x1 * y1;
                }
            }
            for j in 0..ny {
                let yc = profile(q, ly, (j as f64 + 0.5) * grid.hy()).0;
                for i in 0..nx {
                    m.psi.push(profile(p, lx, (i as f64 + 0.5) * grid.hx()).0 * yc);
                }
            }
            m
        });
        let mut basis = Self { grid: grid.clone(), indices, modes, grad_gram: DMatrix::zeros(0, 0) };
        basis.grad_gram = basis.symmetric(|a, b| {
            let (ga, gb) = (&basis.modes[a].grad, &basis.modes[b].grad);
            basis.grid.integrate_with(|k| ga[0][k] * gb[0][k] + ga[1][k] * gb[1][k] + ga[2][k] * gb[2][k] + ga[3][k] * gb[3][k])
        });
        Ok(basis)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    /// Nodal values of η_j.
    pub fn mode(&self, j: usize) -> (&[f64], &[f64]) {
        (&self.modes[j].ux, &self.modes[j].uy)
    }

    pub fn mode_gradient(&self, j: usize) -> &Gradient {
        &self.modes[j].grad
    }

    fn symmetric(&self, entry: impl Fn(usize, usize) -> f64 + Sync + Send) -> DMatrix<f64> {
        let n = self.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        let vals = par::run_all(pairs.clone(), |&(a, b)| entry(a, b));
        let mut m = DMatrix::zeros(n, n);
        for ((a, b), v) in pairs.into_iter().zip(vals) {
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        m
    }

    fn check_coeffs(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::Input(format!("{} coefficients for a {}-mode basis", c.len(), self.len())));
        }
        Ok(())
    }

    /// u = Σ c_j η_j with its gradient.
    pub fn reconstruct(&self, c: &[f64]) -> Result<Velocity> {
        self.check_coeffs(c)?;
        let n = self.grid.n_nodes();
        let comb = |sel: &(dyn Fn(&Mode) -> &[f64] + Sync)| -> Vec<f64> {
            par::map_range(n, |k| {
                let mut s = 0.0;
                for (m, cj) in self.modes.iter().zip(c) {
                    s += cj * sel(m)[k];
                }
                s
            })
        };
        Ok(Velocity {
            u: VectorField { x: comb(&|m| &m.ux), y: comb(&|m| &m.uy) },
            grad: [comb(&|m| &m.grad[0]), comb(&|m| &m.grad[1]), comb(&|m| &m.grad[2]), comb(&|m| &m.grad[3])],
        })
    }

    /// Σ c_j ψ_j at the cell centres, row-major `nx × ny`.
    pub fn stream_at_centers(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_coeffs(c)?;
        let m = self.grid.nx() * self.grid.ny();
        Ok(par::map_range(m, |k| self.modes.iter().zip(c).map(|(md, cj)| cj * md.psi[k]).sum()))
    }

    /// M_ij = ∫ϱ η_i·η_j.
    pub fn assemble_weighted_gram(&self, rho: &ScalarField) -> Result<DMatrix<f64>> {
        self.grid.check_scalar(rho)?;
        if let Some(bad) = rho.values.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::Input(format!("weighted Gram needs ϱ >= 0, found {bad}")));
        }
        let r = &rho.values;
        Ok(self.symmetric(|a, b| {
            let (ma, mb) = (&self.modes[a], &self.modes[b]);
            self.grid.integrate_with(|k| r[k] * (ma.ux[k] * mb.ux[k] + ma.uy[k] * mb.uy[k]))
        }))
    }

    /// ∫ ∇η_i:∇η_j, precomputed at construction.
    pub fn gradient_gram(&self) -> &DMatrix<f64> {
        &self.grad_gram
    }

    /// ∫ 2μ D(η_i):D(η_j).
    pub fn assemble_strain(&self, mu: &ScalarField) -> Result<DMatrix<f64>> {
        self.grid.check_scalar(mu)?;
        let w = &mu.values;
        Ok(self.symmetric(|a, b| {
            let (ga, gb) = (&self.modes[a].grad, &self.modes[b].grad);
            self.grid.integrate_with(|k| {
                let oa = 0.5 * (ga[1][k] + ga[2][k]);
                let ob = 0.5 * (gb[1][k] + gb[2][k]);
                2.0 * w[k] * (ga[0][k] * gb[0][k] + ga[3][k] * gb[3][k] + 2.0 * oa * ob)
            })
        }))
    }

    /// A_ij = ∫ 2μ D(η_i):D(η_j) + ε ∇η_i:∇η_j.
    pub fn assemble_viscous(&self, mu: &ScalarField, eps: f64) -> Result<DMatrix<f64>> {
        if mu.values.iter().any(|m| !(*m >= 0.0)) || !(eps >= 0.0) {
            return Err(Error::Input("viscous assembly needs μ >= 0 and ε >= 0".into()));
        }
        Ok(self.assemble_strain(mu)? + &self.grad_gram * eps)
    }

    /// b_i = ∫ ϱ (u⊗u):∇η_i.
    pub fn assemble_advection(&self, rho: &ScalarField, u: &VectorField) -> Result<DVector<f64>> {
        self.grid.check_scalar(rho)?;
        let r = &rho.values;
        let vals = par::map_range(self.len(), |a| {
            let g = &self.modes[a].grad;
            self.grid.integrate_with(|k| {
                let (x, y) = (u.x[k], u.y[k]);
                r[k] * (x * x * g[0][k] + x * y * (g[1][k] + g[2][k]) + y * y * g[3][k])
            })
        });
        Ok(DVector::from_vec(vals))
    }

    /// T_ij = ∫ ϱ ((w·∇)η_j)·η_i; the convection operator is ½(T − Tᵀ).
    pub fn assemble_convection(&self, rho: &ScalarField, w: &VectorField) -> Result<DMatrix<f64>> {
        self.grid.check_scalar(rho)?;
        let n = self.len();
        let r = &rho.values;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        let vals = par::run_all(pairs, |&(a, b)| {
            let (ma, gb) = (&self.modes[a], &self.modes[b].grad);
            self.grid.integrate_with(|k| {
                let (wx, wy) = (w.x[k], w.y[k]);
                let cx = wx * gb[0][k] + wy * gb[1][k];
                let cy = wx * gb[2][k] + wy * gb[3][k];
                r[k] * (ma.ux[k] * cx + ma.uy[k] * cy)
            })
        });
        Ok(DMatrix::from_row_slice(n, n, &vals))
    }

    /// Solves M(ϱ₀)c = r with r_i = ∫ m₀·η_i.
    pub fn project_initial(&self, rho0: &ScalarField, m0: &VectorField) -> Result<GalerkinCoeffs> {
        let gram = self.assemble_weighted_gram(rho0)?;
        let rhs = DVector::from_vec(par::map_range(self.len(), |a| {
            let m = &self.modes[a];
            self.grid.integrate_with(|k| m0.x[k] * m.ux[k] + m0.y[k] * m.uy[k])
        }));
        let chol = gram.cholesky().ok_or_else(|| Error::Input("weighted Gram matrix is singular".into()))?;
        Ok(GalerkinCoeffs { c: chol.solve(&rhs).iter().copied().collect(), time: 0.0 })
    }

    /// ½cᵀM(ϱ)c.
    pub fn kinetic_energy(&self, rho: &ScalarField, c: &[f64]) -> Result<f64> {
        let m = self.assemble_weighted_gram(rho)?;
        let v = DVector::from_column_slice(c);
        Ok(0.5 * v.dot(&(&m * &v)))
    }

    /// Smallest eigenvalue of the unweighted Gram matrix.
    pub fn gram_min_eigenvalue(&self) -> f64 {
        let one = ScalarField::constant(&self.grid, 1.0);
        linalg::min_eigenvalue(&self.assemble_weighted_gram(&one).expect("unit weight is valid"))
    }
}

impl Velocity {
    /// Pointwise |D(u)|² with D = ½(∇u + ∇uᵀ).
    pub fn strain_sq(&self, k: usize) -> f64 {
        let g = &self.grad;
        let off = 0.5 * (g[1][k] + g[2][k]);
        g[0][k] * g[0][k] + g[3][k] * g[3][k] + 2.0 * off * off
    }

    /// Pointwise |∇u|².
    pub fn grad_sq(&self, k: usize) -> f64 {
        let g = &self.grad;
        g[0][k] * g[0][k] + g[1][k] * g[1][k] + g[2][k] * g[2][k] + g[3][k] * g[3][k]
    }

    /// max |∂x ux + ∂y uy|.
    pub fn max_divergence(&self) -> f64 {
        self.grad[0].iter().zip(&self.grad[3]).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max)
    }

    pub fn max_grad(&self) -> f64 {
        self.grad.iter().flat_map(|g| g.iter()).map(|v| v.abs()).fold(0.0, f64::max)
    }
}
