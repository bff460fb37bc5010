//! Rectangular node grid, nodal fields and discrete calculus.
//!
//! Nodes sit at `(i·hx, j·hy)` for `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny`, stored row-major
//! with index `j·(nx+1) + i`. Integration uses the tensor trapezoid rule, whose
//! node weights are the areas of the dual cells.
//!
//! The Neumann Laplacian is the graph Laplacian of the dual mesh divided by
//! the dual-cell area. This is the same stencil as ghost-node reflection, and
//! summing it against the weights telescopes to zero.

use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    weights: Vec<f64>,
}

/// Nodal scalar values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

/// Nodal vector values, stored per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { values: vec![c; grid.n_nodes()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        Self { values: par::map_range(self.values.len(), |i| f(self.values[i])) }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.n_nodes();
        Self { x: vec![0.0; n], y: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Pointwise |v|².
    pub fn norm_sq(&self) -> ScalarField {
        ScalarField { values: par::map_range(self.x.len(), |i| self.x[i] * self.x[i] + self.y[i] * self.y[i]) }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }
}

/// Report of [`Grid::poincare_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareReport {
    pub constant: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Construction(format!("grid needs at least 4 cells per direction, got {nx}x{ny}")));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::Construction(format!("domain lengths must be finite and > 0, got {lx}x{ly}")));
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let mut weights = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let wy = if j == 0 || j == ny { 0.5 * hy } else { hy };
            for i in 0..=nx {
                let wx = if i == 0 || i == nx { 0.5 * hx } else { hx };
                weights.push(wx * wy);
            }
        }
        Ok(Self { nx, ny, lx, ly, hx, hy, weights })
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Trapezoid weight (dual-cell area) of every node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % (self.nx + 1), k / (self.nx + 1))
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.lx
        } else {
            i as f64 * self.hx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.ly
        } else {
            j as f64 * self.hy
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> ScalarField {
        ScalarField {
            values: par::map_range(self.n_nodes(), |k| {
                let (i, j) = self.ij(k);
                f(self.x(i), self.y(j))
            }),
        }
    }

    pub fn check_scalar(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.n_nodes() {
            return Err(Error::Input(format!("field has {} values, grid has {} nodes", f.len(), self.n_nodes())));
        }
        Ok(())
    }

    /// Trapezoid rule; exact for bilinear fields.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        self.integrate_values(&f.values)
    }

    pub fn integrate_values(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_nodes());
        par::sum_range(f.len(), |k| self.weights[k] * f[k])
    }

    /// ∫ g(k) with g evaluated per node.
    pub fn integrate_with(&self, g: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
        par::sum_range(self.n_nodes(), |k| self.weights[k] * g(k))
    }

    #[inline]
    fn d_dx(&self, f: &[f64], i: usize, j: usize) -> f64 {
        let nx = self.nx;
        let at = |ii: usize| f[self.idx(ii, j)];
        if i == 0 {
            (4.0 * (at(1) - at(0)) - (at(2) - at(0))) / (2.0 * self.hx)
        } else if i == nx {
            (4.0 * (at(nx) - at(nx - 1)) - (at(nx) - at(nx - 2))) / (2.0 * self.hx)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * self.hx)
        }
    }

    #[inline]
    fn d_dy(&self, f: &[f64], i: usize, j: usize) -> f64 {
        let ny = self.ny;
        let at = |jj: usize| f[self.idx(i, jj)];
        if j == 0 {
            (4.0 * (at(1) - at(0)) - (at(2) - at(0))) / (2.0 * self.hy)
        } else if j == ny {
            (4.0 * (at(ny) - at(ny - 1)) - (at(ny) - at(ny - 2))) / (2.0 * self.hy)
        } else {
            (at(j + 1) - at(j - 1)) / (2.0 * self.hy)
        }
    }

    /// Centered differences inside, one-sided second order at the walls.
    pub fn grad(&self, f: &ScalarField) -> VectorField {
        let v = &f.values;
        let parts = par::map_range(self.n_nodes(), |k| {
            let (i, j) = self.ij(k);
            (self.d_dx(v, i, j), self.d_dy(v, i, j))
        });
        let (x, y) = parts.into_iter().unzip();
        VectorField { x, y }
    }

    pub fn div(&self, v: &VectorField) -> ScalarField {
        ScalarField {
            values: par::map_range(self.n_nodes(), |k| {
                let (i, j) = self.ij(k);
                self.d_dx(&v.x, i, j) + self.d_dy(&v.y, i, j)
            }),
        }
    }

    /// Edge conductance of the x-edge `(i,j)–(i+1,j)`.
    #[inline]
    pub fn gx(&self, j: usize) -> f64 {
        let g = self.hy / self.hx;
        if j == 0 || j == self.ny {
            0.5 * g
        } else {
            g
        }
    }

    /// Edge conductance of the y-edge `(i,j)–(i,j+1)`.
    #[inline]
    pub fn gy(&self, i: usize) -> f64 {
        let g = self.hx / self.hy;
        if i == 0 || i == self.nx {
            0.5 * g
        } else {
            g
        }
    }

    pub fn n_xedges(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_yedges(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    /// `(L f)_k = Σ_l g_kl·c_kl·(f_k − f_l)` over the dual-mesh edges. Edge
    /// multipliers `cx[j·nx+i]` and `cy[j·(nx+1)+i]` default to one.
    pub fn graph_laplacian(&self, f: &[f64], cx: Option<&[f64]>, cy: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        self.graph_laplacian_into(f, cx, cy, &mut out);
        out
    }

    pub fn graph_laplacian_into(&self, f: &[f64], cx: Option<&[f64]>, cy: Option<&[f64]>, out: &mut [f64]) {
        let nx = self.nx;
        let ny = self.ny;
        let ex = |i: usize, j: usize| self.gx(j) * cx.map_or(1.0, |c| c[j * nx + i]);
        let ey = |i: usize, j: usize| self.gy(i) * cy.map_or(1.0, |c| c[j * (nx + 1) + i]);
        par::fill(out, |k| {
            let (i, j) = self.ij(k);
            let fk = f[k];
            let mut s = 0.0;
            if i > 0 {
                s += ex(i - 1, j) * (fk - f[k - 1]);
            }
            if i < nx {
                s += ex(i, j) * (fk - f[k + 1]);
            }
            if j > 0 {
                s += ey(i, j - 1) * (fk - f[k - nx - 1]);
            }
            if j < ny {
                s += ey(i, j) * (fk - f[k + nx + 1]);
            }
            s
        });
    }

    /// Σ over edges of `g·(f_k − f_l)(q_k − q_l)`, the bilinear form of the graph Laplacian.
    pub fn dirichlet_form(&self, f: &[f64], q: &[f64]) -> f64 {
        let nx = self.nx;
        let sx = par::sum_range(self.n_xedges(), |e| {
            let (i, j) = (e % nx, e / nx);
            let a = self.idx(i, j);
            self.gx(j) * (f[a] - f[a + 1]) * (q[a] - q[a + 1])
        });
        let sy = par::sum_range(self.n_yedges(), |e| {
            let (i, j) = (e % (nx + 1), e / (nx + 1));
            let a = self.idx(i, j);
            let b = a + nx + 1;
            self.gy(i) * (f[a] - f[b]) * (q[a] - q[b])
        });
        sx + sy
    }

    /// Ghost-reflection Neumann Laplacian.
    pub fn laplacian_neumann(&self, f: &ScalarField) -> ScalarField {
        let l = self.graph_laplacian(&f.values, None, None);
        ScalarField { values: par::map_range(l.len(), |k| -l[k] / self.weights[k]) }
    }

    pub fn norm_l2(&self, f: &ScalarField) -> f64 {
        self.integrate_with(|k| f.values[k] * f.values[k]).sqrt()
    }

    pub fn norm_h1(&self, f: &ScalarField) -> f64 {
        let g = self.grad(f);
        let l2 = self.integrate_with(|k| f.values[k] * f.values[k]);
        let gg = self.integrate_with(|k| g.x[k] * g.x[k] + g.y[k] * g.y[k]);
        (l2 + gg).sqrt()
    }

    /// Empirical constant of ‖v‖_{H¹} ≤ C(‖∇v‖ + ∫ϱ|v|) for one sample v.
    pub fn poincare_check(&self, v: &ScalarField, rho: &ScalarField, m1: f64, m2: f64, gamma_exp: f64) -> Result<PoincareReport> {
        self.check_scalar(v)?;
        self.check_scalar(rho)?;
        if rho.values.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Argument("density must be nonnegative".into()));
        }
        if !(gamma_exp > 1.2) {
            return Err(Error::Argument(format!("gamma must exceed 6/5, got {gamma_exp}")));
        }
        if !(m1 > 0.0) || self.integrate(rho) < m1 {
            return Err(Error::Argument(format!("density mass below M1 = {m1}")));
        }
        if self.integrate_with(|k| rho.values[k].powf(gamma_exp)) > m2 {
            return Err(Error::Argument(format!("∫ρ^γ exceeds M2 = {m2}")));
        }
        let g = self.grad(v);
        let grad_l2 = self.integrate_with(|k| g.x[k] * g.x[k] + g.y[k] * g.y[k]).sqrt();
        let weighted = self.integrate_with(|k| rho.values[k] * v.values[k].abs());
        let denom = grad_l2 + weighted;
        if denom == 0.0 {
            return Err(Error::Degenerate("v vanishes identically".into()));
        }
        Ok(PoincareReport { constant: self.norm_h1(v) / denom })
    }
}
