//! Density transport.
//!
//! Two schemes share this module:
//!
//! * [`advect_density`]: semi-Lagrangian step along backward characteristics
//!   with a midpoint foot and clamped bilinear interpolation. Works for any
//!   nodal velocity field and keeps the output inside `[min ϱ, max ϱ]`.
//! * [`FaceFluxes`]: conservative upwind finite volumes on the dual mesh, with
//!   face fluxes taken from the stream function at cell centres. These fluxes
//!   are divergence free to round-off and have no flux through the walls, so
//!   the scheme conserves mass exactly and, under the CFL bound
//!   `dt·Σ_out|F| ≤ V`, is a convex combination of old values.

use crate::grid::{Grid, ScalarField, VectorField};
use crate::par;
use crate::{Error, Result};

/// Default cap on dt·max|u| / h for semi-Lagrangian steps.
pub const CFL_CAP: f64 = 5.0;

/// Bilinear interpolation of nodal values at `(x, y)`, clamped to the domain.
pub fn interpolate(grid: &Grid, f: &[f64], x: f64, y: f64) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let sx = (x / grid.hx()).clamp(0.0, nx as f64);
    let sy = (y / grid.hy()).clamp(0.0, ny as f64);
    let i = (sx.floor() as usize).min(nx - 1);
    let j = (sy.floor() as usize).min(ny - 1);
    let tx = (sx - i as f64).clamp(0.0, 1.0);
    let ty = (sy - j as f64).clamp(0.0, 1.0);
    let k = grid.idx(i, j);
    let k2 = k + nx + 1;
    let bottom = f[k] + tx * (f[k + 1] - f[k]);
    let top = f[k2] + tx * (f[k2 + 1] - f[k2]);
    let v = bottom + ty * (top - bottom);
    // the convex combination can overshoot its corners by one ulp
    let lo = f[k].min(f[k + 1]).min(f[k2]).min(f[k2 + 1]);
    let hi = f[k].max(f[k + 1]).max(f[k2]).max(f[k2 + 1]);
    v.clamp(lo, hi)
}

/// ϱ'(x) = ϱ(x − dt·u(x − dt·u(x)/2)).
pub fn advect_density(grid: &Grid, rho: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
    advect_density_capped(grid, rho, u, dt, CFL_CAP)
}

pub fn advect_density_capped(grid: &Grid, rho: &ScalarField, u: &VectorField, dt: f64, cfl_cap: f64) -> Result<ScalarField> {
    grid.check_scalar(rho)?;
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be > 0, got {dt}")));
    }
    let h = grid.hx().min(grid.hy());
    let umax = u.max_abs();
    if dt * umax > cfl_cap * h {
        return Err(Error::Argument(format!("dt·max|u| = {:.3e} exceeds {cfl_cap}·h = {:.3e}", dt * umax, cfl_cap * h)));
    }
    let (lx, ly) = (grid.lx(), grid.ly());
    Ok(ScalarField {
        values: par::map_range(grid.n_nodes(), |k| {
            let (i, j) = grid.ij(k);
            let (x, y) = (grid.x(i), grid.y(j));
            let xm = (x - 0.5 * dt * u.x[k]).clamp(0.0, lx);
            let ym = (y - 0.5 * dt * u.y[k]).clamp(0.0, ly);
            let um = interpolate(grid, &u.x, xm, ym);
            let vm = interpolate(grid, &u.y, xm, ym);
            let xf = (x - dt * um).clamp(0.0, lx);
            let yf = (y - dt * vm).clamp(0.0, ly);
            interpolate(grid, &rho.values, xf, yf)
        }),
    })
}

/// Measure of {α ≤ ϱ ≤ β}, each node counting with its dual-cell area.
pub fn level_set_measure(grid: &Grid, rho: &ScalarField, alpha: f64, beta: f64) -> Result<f64> {
    if alpha > beta {
        return Err(Error::Argument(format!("alpha = {alpha} exceeds beta = {beta}")));
    }
    grid.check_scalar(rho)?;
    Ok(grid.integrate_with(|k| {
        let r = rho.values[k];
        if r >= alpha && r <= beta {
            1.0
        } else {
            0.0
        }
    }))
}

/// Volume fluxes through the faces of the dual mesh.
///
/// `x[j·nx + i]` is the flux from node `(i,j)` to `(i+1,j)`, `y[j·(nx+1) + i]`
/// the flux from `(i,j)` to `(i,j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceFluxes {
    pub fn zeros(grid: &Grid) -> Self {
        Self { x: vec![0.0; grid.n_xedges()], y: vec![0.0; grid.n_yedges()] }
    }

    /// Fluxes of u = ∇⊥ψ from ψ at the cell centres (ψ = 0 outside Ω).
    pub fn from_stream(grid: &Grid, psi: &[f64]) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        if psi.len() != nx * ny {
            return Err(Error::Input(format!("stream function has {} values, grid has {} cells", psi.len(), nx * ny)));
        }
        let cell = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                0.0
            } else {
                psi[j as usize * nx + i as usize]
            }
        };
        let x = par::map_range(grid.n_xedges(), |e| {
            let (i, j) = ((e % nx) as isize, (e / nx) as isize);
            cell(i, j) - cell(i, j - 1)
        });
        let y = par::map_range(grid.n_yedges(), |e| {
            let (i, j) = ((e % (nx + 1)) as isize, (e / (nx + 1)) as isize);
            -(cell(i, j) - cell(i - 1, j))
        });
        Ok(Self { x, y })
    }

    /// Net outflow of every node.
    pub fn divergence(&self, grid: &Grid) -> Vec<f64> {
        self.node_sum(grid, |f, _, _| f)
    }

    /// Σ over faces of node k of `g(F_out, k, l)` where F_out is the flux
    /// leaving k towards neighbour l.
    fn node_sum(&self, grid: &Grid, g: impl Fn(f64, usize, usize) -> f64 + Sync + Send) -> Vec<f64> {
        let (nx, ny) = (grid.nx(), grid.ny());
        par::map_range(grid.n_nodes(), |k| {
            let (i, j) = grid.ij(k);
            let mut s = 0.0;
            if i < nx {
                s += g(self.x[j * nx + i], k, k + 1);
            }
            if i > 0 {
                s += g(-self.x[j * nx + i - 1], k, k - 1);
            }
            if j < ny {
                s += g(self.y[j * (nx + 1) + i], k, k + nx + 1);
            }
            if j > 0 {
                s += g(-self.y[(j - 1) * (nx + 1) + i], k, k - nx - 1);
            }
            s
        })
    }

    /// Σ_out |F| per node.
    pub fn outflow(&self, grid: &Grid) -> Vec<f64> {
        self.node_sum(grid, |f, _, _| f.max(0.0))
    }

    /// max over nodes of dt·Σ_out|F| / V.
    pub fn cfl(&self, grid: &Grid, dt: f64) -> f64 {
        let out = self.outflow(grid);
        let w = grid.weights();
        out.iter().zip(w).map(|(o, v)| dt * o / v).fold(0.0, f64::max)
    }

    /// Upwind flux divergence Σ_l F_kl·q_up(k,l) of a nodal quantity.
    pub fn upwind_divergence(&self, grid: &Grid, q: &[f64]) -> Vec<f64> {
        self.node_sum(grid, |f, k, l| if f > 0.0 { f * q[k] } else { f * q[l] })
    }

    /// Upwind adjoint: Σ_l F⁺_kl·(φ_l − φ_k), so that Σ_k φ_k·div(Fq)_k = −Σ_k q_k·adj(φ)_k.
    pub fn upwind_adjoint(&self, grid: &Grid, phi: &[f64]) -> Vec<f64> {
        self.node_sum(grid, |f, k, l| if f > 0.0 { f * (phi[l] - phi[k]) } else { 0.0 })
    }

    /// One conservative upwind step of ϱ: V·ϱ' = V·ϱ − dt·div(Fϱ).
    pub fn advect(&self, grid: &Grid, rho: &ScalarField, dt: f64) -> Result<ScalarField> {
        grid.check_scalar(rho)?;
        let cfl = self.cfl(grid, dt);
        if cfl > 1.0 {
            return Err(Error::Step(format!("upwind CFL number {cfl:.3} exceeds 1")));
        }
        let d = self.upwind_divergence(grid, &rho.values);
        let w = grid.weights();
        Ok(ScalarField { values: par::map_range(grid.n_nodes(), |k| rho.values[k] - dt * d[k] / w[k]) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_velocity_is_identity() {
        let g = Grid::unit(16).unwrap();
        let rho = g.sample(|x, y| 1.0 + x * y);
        let out = advect_density(&g, &rho, &VectorField::zeros(&g), 0.1).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn uniform_translation() {
        let g = Grid::unit(32).unwrap();
        let f = |x: f64, y: f64| (PI * x).sin() * (PI * y).cos();
        let rho = g.sample(f);
        let n = g.n_nodes();
        let u = VectorField { x: vec![1.0; n], y: vec![0.0; n] };
        let out = advect_density(&g, &rho, &u, 0.1).unwrap();
        for k in 0..n {
            let (i, j) = g.ij(k);
            if g.x(i) > 0.15 {
                assert!((out.values[k] - f(g.x(i) - 0.1, g.y(j))).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn cfl_cap_enforced() {
        let g = Grid::unit(8).unwrap();
        let n = g.n_nodes();
        let u = VectorField { x: vec![100.0; n], y: vec![0.0; n] };
        let rho = ScalarField::constant(&g, 1.0);
        assert!(matches!(advect_density(&g, &rho, &u, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn level_set_examples() {
        let g = Grid::new(8, 4, 2.0, 1.0).unwrap();
        let rho = ScalarField::constant(&g, 0.5);
        assert!((level_set_measure(&g, &rho, 0.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(level_set_measure(&g, &rho, 0.0, 0.4).unwrap(), 0.0);
        assert!(level_set_measure(&g, &rho, 1.0, 0.0).is_err());
    }

    #[test]
    fn stream_fluxes_are_divergence_free() {
        let g = Grid::new(10, 7, 1.0, 0.8).unwrap();
        let psi: Vec<f64> = (0..70).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let ff = FaceFluxes::from_stream(&g, &psi).unwrap();
        assert!(ff.divergence(&g).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn upwind_step_conserves_and_is_monotone() {
        let g = Grid::unit(12).unwrap();
        let psi: Vec<f64> = (0..144).map(|k| ((k * 17 % 13) as f64 - 6.0) * 1e-3).collect();
        let ff = FaceFluxes::from_stream(&g, &psi).unwrap();
        let rho = g.sample(|x, y| 1.0 + (5.0 * x * y).sin().abs());
        let dt = 0.9 / ff.cfl(&g, 1.0);
        let out = ff.advect(&g, &rho, dt).unwrap();
        assert!((g.integrate(&out) - g.integrate(&rho)).abs() < 1e-14);
        assert!(out.min() >= rho.min() - 1e-14 && out.max() <= rho.max() + 1e-14, "{} {}", out.min() - rho.min(), out.max() - rho.max());
        let adj = ff.upwind_adjoint(&g, &out.values);
        let div = ff.upwind_divergence(&g, &rho.values);
        let lhs: f64 = out.values.iter().zip(&div).map(|(a, b)| a * b).sum();
        let rhs: f64 = rho.values.iter().zip(&adj).map(|(a, b)| a * b).sum();
        assert!((lhs + rhs).abs() < 1e-14);
    }
}
