//! Steady linear BGK problem for a frozen temperature profile.
//!
//! Integrating the transport equation along characteristics expresses the
//! density through itself: wall re-emission terms weighted by the outfluxes
//! `L = (C₋ + C₂C₊)/(1 − C₁C₂)` and `R = (C₊ + C₁C₋)/(1 − C₁C₂)`, plus the
//! collision gain `(1/κ)∫ρ(y) km(−1, |x−y|, T(y)) dy`. The homogeneous
//! equation is discretized by product-integration Nyström on a graded grid
//! and solved as a Perron eigenproblem.

pub mod grid;
mod product;
mod weak_form;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::QuadratureSettings;
use crate::error::{BgkError, Result};
use crate::kernels::{maxwellian_unchecked, wall_factor, KernelTable, WallTemperatures};
use crate::quadrature::{integrate, Tolerance};

pub use grid::{SpatialGrid, TemperatureProfile};
use product::{basis_integrals, BasisIntegrals};
pub use weak_form::WeakFormTest;

/// Relative spectral gap below which the steady density is not unique to
/// working precision.
pub const MIN_SPECTRAL_GAP: f64 = 1e-8;

/// Moment constants closing the boundary fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstants {
    pub c1: f64,
    pub c2: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub denominator: f64,
}

impl MomentConstants {
    fn new(c1: f64, c2: f64, c_minus: f64, c_plus: f64) -> Self {
        Self { c1, c2, c_minus, c_plus, denominator: 1.0 - c1 * c2 }
    }

    /// Flux absorbed (and re-emitted) at `x = 0`.
    pub fn left_outflux(&self) -> f64 {
        (self.c_minus + self.c2 * self.c_plus) / self.denominator
    }

    /// Flux absorbed (and re-emitted) at `x = 1`.
    pub fn right_outflux(&self) -> f64 {
        (self.c_plus + self.c1 * self.c_minus) / self.denominator
    }
}

/// Wall re-emission contributions to the moments of order 0..=3 at one
/// point, per unit outflux.
#[derive(Debug, Clone, Copy)]
struct WallTerms {
    left: [f64; 4],
    right: [f64; 4],
}

/// Discrete density operator for one temperature profile.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub profile: TemperatureProfile,
    pub walls: WallTemperatures,
    /// Row-major `N × N` matrix of `ρ ↦ L[ρ]` on the solver grid.
    pub matrix: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Weights of the `C₋` functional: `C₋ = Σ_j escape_left[j]·ρ_j`.
    pub escape_left: Vec<f64>,
    /// Weights of the `C₊` functional.
    pub escape_right: Vec<f64>,
    grid: SpatialGrid,
    wall: Vec<WallTerms>,
    // Per target node; kernel orders −1..=2, already divided by κ.
    interior: Vec<BasisIntegrals<4>>,
}

impl DensityOperator {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| self.matrix[i * n..(i + 1) * n].iter().zip(rho).map(|(a, r)| a * r).sum())
            .collect()
    }

    fn constants(&self, source: &[f64]) -> MomentConstants {
        let dot = |w: &[f64]| w.iter().zip(source).map(|(a, b)| a * b).sum::<f64>();
        MomentConstants::new(self.c1, self.c2, dot(&self.escape_left), dot(&self.escape_right))
    }
}

/// Perron eigenpair of the discrete operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySolve {
    /// Nodal density with `∫ρ = 1`.
    pub rho: Vec<f64>,
    /// Leading eigenvalue; its distance from 1 is the discrete mass defect.
    pub perron_root: f64,
    /// Modulus of the second eigenvalue.
    pub second_modulus: f64,
    /// `1 − |λ₂|/λ₁`.
    pub spectral_gap: f64,
    /// `‖ρ − L[ρ]/λ₁‖∞`.
    pub residual: f64,
}

/// Hydrodynamic state produced by one linear solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySolution {
    pub grid: SpatialGrid,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    /// Grid average of the pointwise pressure.
    pub pressure: f64,
    /// `∫v² f dv` at each node.
    pub pressure_profile: Vec<f64>,
    pub tau: Vec<f64>,
    /// `∫v³ f dv` at each node.
    pub third_moment: Vec<f64>,
    pub moments: MomentConstants,
    pub profile: TemperatureProfile,
    pub walls: WallTemperatures,
    pub perron_root: f64,
    pub spectral_gap: f64,
    pub residual: f64,
}

impl SteadySolution {
    /// Collision source density. The operator is normalized by its Perron
    /// root so that the nodal density is reproduced exactly.
    pub fn source(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r / self.perron_root).collect()
    }

    /// `max P(x) − min P(x)` over nodes.
    pub fn pressure_variation(&self) -> f64 {
        let max = self.pressure_profile.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.pressure_profile.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, u| m.max(u.abs()))
    }

    pub fn tau_profile(&self) -> Result<TemperatureProfile> {
        TemperatureProfile::new(self.grid.clone(), self.tau.clone())
    }
}

/// Raw velocity moments of `f` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMoments {
    pub density: f64,
    pub momentum: f64,
    /// `∫v² f dv`.
    pub pressure: f64,
    pub third: f64,
}

/// Linear BGK solver bound to one wall configuration and grid.
#[derive(Debug, Clone)]
pub struct LinearBgkSolver {
    walls: WallTemperatures,
    grid: SpatialGrid,
    kernels: Arc<KernelTable>,
    tol: Tolerance,
}

impl LinearBgkSolver {
    pub fn new(walls: WallTemperatures, grid: SpatialGrid, quadrature: &QuadratureSettings) -> Result<Self> {
        walls.validate()?;
        let kernels = KernelTable::shared(quadrature.kernel())?;
        Ok(Self { walls, grid, kernels, tol: quadrature.product() })
    }

    pub fn walls(&self) -> &WallTemperatures {
        &self.walls
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kernels(&self) -> &KernelTable {
        &self.kernels
    }

    pub(crate) fn tolerance(&self) -> Tolerance {
        self.tol
    }

    fn interior_at(&self, profile: &TemperatureProfile, x: f64) -> Result<BasisIntegrals<4>> {
        let kappa = self.walls.kappa;
        let table = &*self.kernels;
        basis_integrals::<4, 8, _>(
            &self.grid,
            x,
            |d, y| {
                let t = profile.at(y);
                let rt = t.sqrt();
                let s = (d / (kappa * rt)).max(f64::MIN_POSITIVE);
                let g = table.scaled::<4>(-1, s);
                [g[0] / (rt * kappa), g[1] / kappa, g[2] * rt / kappa, g[3] * t / kappa]
            },
            self.tol,
        )
    }

    fn wall_terms_at(&self, x: f64) -> WallTerms {
        let side = |dist: f64, t: f64| {
            let rt = t.sqrt();
            let g = self.kernels.scaled::<4>(0, dist / (self.walls.kappa * rt));
            let wf = wall_factor(t);
            [wf * g[0], wf * rt * g[1], wf * t * g[2], wf * t * rt * g[3]]
        };
        WallTerms { left: side(x, self.walls.t1), right: side(1.0 - x, self.walls.t2) }
    }

    fn wall_constant(&self, t: f64) -> f64 {
        let rt = t.sqrt();
        wall_factor(t) * rt * self.kernels.scaled::<1>(1, 1.0 / (self.walls.kappa * rt))[0]
    }

    /// Builds the discrete operator for a frozen profile.
    pub fn assemble(&self, profile: &TemperatureProfile) -> Result<DensityOperator> {
        let (t1, t2) = (self.walls.t1, self.walls.t2);
        let slack = 1e-9 * t2;
        if !profile.within(t1, t2, slack) {
            return Err(BgkError::Domain(format!("temperature profile leaves [{t1}, {t2}]")));
        }
        let n = self.grid.len();
        let c1 = self.wall_constant(t1);
        let c2 = self.wall_constant(t2);
        let den = 1.0 - c1 * c2;
        let escape_left: Vec<f64> = self.interior_at(profile, 0.0)?.right.iter().map(|v| v[1]).collect();
        let escape_right: Vec<f64> = self.interior_at(profile, 1.0)?.left.iter().map(|v| v[1]).collect();
        let interior: Vec<BasisIntegrals<4>> = self
            .grid
            .nodes()
            .par_iter()
            .map(|&x| self.interior_at(profile, x))
            .collect::<Result<_>>()?;
        let wall: Vec<WallTerms> = self.grid.nodes().iter().map(|&x| self.wall_terms_at(x)).collect();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            let (b1, b2) = (wall[i].left[0], wall[i].right[0]);
            for j in 0..n {
                let (a, b) = (escape_left[j], escape_right[j]);
                let v = b1 * (a + c2 * b) / den
                    + b2 * (b + c1 * a) / den
                    + interior[i].left[j][0]
                    + interior[i].right[j][0];
                if !v.is_finite() {
                    return Err(BgkError::Assembly { row: i, col: j });
                }
                matrix[i * n + j] = v;
            }
        }
        Ok(DensityOperator {
            profile: profile.clone(),
            walls: self.walls,
            matrix,
            c1,
            c2,
            escape_left,
            escape_right,
            grid: self.grid.clone(),
            wall,
            interior,
        })
    }

    /// Perron eigenvector of the operator, normalized to unit mass.
    pub fn solve_density(&self, op: &DensityOperator) -> Result<DensitySolve> {
        let n = op.len();
        let m = DMatrix::from_row_slice(n, n, &op.matrix);
        let eig = m.complex_eigenvalues();
        let mut by_modulus: Vec<(f64, f64, f64)> = eig.iter().map(|z| (z.norm(), z.re, z.im)).collect();
        by_modulus.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (lam1_mod, lam1, lam1_im) = by_modulus[0];
        let lam2_mod = by_modulus.get(1).map_or(0.0, |e| e.0);
        if !(lam1 > 0.0) || lam1_im.abs() > 1e-12 * lam1_mod {
            return Err(BgkError::Solve(format!("leading eigenvalue {lam1} + {lam1_im}i is not a positive real")));
        }
        let gap = 1.0 - lam2_mod / lam1;
        if gap < MIN_SPECTRAL_GAP {
            return Err(BgkError::Degenerate { lambda1: lam1, lambda2: lam2_mod });
        }
        // (L − λ₁I)ρ = 0 has one redundant row; swap it for the mass constraint.
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= lam1;
        }
        for j in 0..n {
            a[(n - 1, j)] = self.grid.weights()[j];
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let rho = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| BgkError::Solve("bordered eigenvector system is singular".into()))?;
        let rho: Vec<f64> = rho.iter().cloned().collect();
        if let Some((j, r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(BgkError::Solve(format!("density not positive at node {j}: {r:e}")));
        }
        let lr = op.apply(&rho);
        let residual = rho.iter().zip(&lr).map(|(r, l)| (r - l / lam1).abs()).fold(0.0, f64::max);
        Ok(DensitySolve { rho, perron_root: lam1, second_modulus: lam2_mod, spectral_gap: gap, residual })
    }

    /// Moments, pressure and temperature from a solved density.
    pub fn observables(&self, op: &DensityOperator, solve: &DensitySolve) -> Result<SteadySolution> {
        let n = op.len();
        let source: Vec<f64> = solve.rho.iter().map(|r| r / solve.perron_root).collect();
        let moments = op.constants(&source);
        let (lo, ro) = (moments.left_outflux(), moments.right_outflux());
        let mut u = vec![0.0; n];
        let mut p_local = vec![0.0; n];
        let mut third = vec![0.0; n];
        for i in 0..n {
            let lm = combine(&op.wall[i], &op.interior[i], &source, lo, ro);
            u[i] = lm.momentum / solve.rho[i];
            p_local[i] = lm.pressure;
            third[i] = lm.third;
        }
        let pressure = self.grid.integrate(&p_local);
        let mut tau = vec![0.0; n];
        for i in 0..n {
            tau[i] = pressure / solve.rho[i] - u[i] * u[i];
            if !(tau[i] > 0.0) {
                return Err(BgkError::NegativeTemperature { node: i, value: tau[i] });
            }
        }
        Ok(SteadySolution {
            grid: self.grid.clone(),
            rho: solve.rho.clone(),
            u,
            pressure,
            pressure_profile: p_local,
            tau,
            third_moment: third,
            moments,
            profile: op.profile.clone(),
            walls: self.walls,
            perron_root: solve.perron_root,
            spectral_gap: solve.spectral_gap,
            residual: solve.residual,
        })
    }

    /// Assemble, solve and post-process in one call.
    pub fn steady_state(&self, profile: &TemperatureProfile) -> Result<SteadySolution> {
        let op = self.assemble(profile)?;
        let solve = self.solve_density(&op)?;
        self.observables(&op, &solve)
    }

    /// Moments of the reconstructed `f` at an arbitrary `x ∈ [0, 1]`.
    pub fn local_moments(&self, sol: &SteadySolution, x: f64) -> Result<LocalMoments> {
        if !(0.0..=1.0).contains(&x) {
            return Err(BgkError::Domain(format!("position {x} outside [0, 1]")));
        }
        let interior = self.interior_at(&sol.profile, x)?;
        let wall = self.wall_terms_at(x);
        let source = sol.source();
        Ok(combine(&wall, &interior, &source, sol.moments.left_outflux(), sol.moments.right_outflux()))
    }

    /// Density of the reconstruction at `x`; equals `ρ_j` at the nodes.
    pub fn density_at(&self, sol: &SteadySolution, x: f64) -> Result<f64> {
        Ok(self.local_moments(sol, x)?.density)
    }

    /// `τ(x) = P/ρ(x) − u(x)²` with the solution's scalar pressure.
    pub fn tau_at(&self, sol: &SteadySolution, x: f64) -> Result<f64> {
        let m = self.local_moments(sol, x)?;
        let u = m.momentum / m.density;
        Ok(sol.pressure / m.density - u * u)
    }

    /// Applies the continuous extension of the operator (no Perron
    /// normalization) to nodal values `rho` and evaluates it at `x`.
    pub fn apply_at(&self, op: &DensityOperator, rho: &[f64], x: f64) -> Result<f64> {
        let interior = self.interior_at(&op.profile, x)?;
        let wall = self.wall_terms_at(x);
        let m = op.constants(rho);
        Ok(combine(&wall, &interior, rho, m.left_outflux(), m.right_outflux()).density)
    }

    /// Phase-space density from the Duhamel representation.
    pub fn reconstruct_f(&self, sol: &SteadySolution, x: f64, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(BgkError::Domain(format!("position {x} outside [0, 1]")));
        }
        if v == 0.0 || v.abs() < 1e-300 {
            return Err(BgkError::Grazing);
        }
        let kappa = self.walls.kappa;
        let speed = v.abs();
        let lam = kappa * speed;
        let source = sol.source();
        let bp = self.grid.breakpoints();
        let tol = Tolerance::new(self.tol.abs * 1e-3, self.tol.rel);
        let gain = |y: f64, dist: f64| {
            let s = self.grid.interpolate(&source, y);
            (-dist / lam).exp() / lam * s * maxwellian_unchecked(sol.profile.at(y), v)
        };
        let mut total = 0.0;
        if v > 0.0 {
            let t1 = self.walls.t1;
            total += (-x / lam).exp() * (-0.5 * v * v / t1).exp() / t1 * sol.moments.left_outflux();
            for k in 0..bp.len() - 1 {
                let (a, b) = (bp[k], bp[k + 1].min(x));
                if b <= a {
                    break;
                }
                total += integrate(|y| gain(y, x - y), a, b, 1, tol)?;
            }
        } else {
            let t2 = self.walls.t2;
            total += (-(1.0 - x) / lam).exp() * (-0.5 * v * v / t2).exp() / t2 * sol.moments.right_outflux();
            for k in 0..bp.len() - 1 {
                let (a, b) = (bp[k].max(x), bp[k + 1]);
                if b <= a {
                    continue;
                }
                total += integrate(|y| gain(y, y - x), a, b, 1, tol)?;
            }
        }
        Ok(total)
    }

    /// Largest weak-form residual over the standard test battery.
    pub fn weak_form_residual(&self, sol: &SteadySolution) -> Result<f64> {
        weak_form::residual(self, sol)
    }

    /// Residual of each test function in the battery.
    pub fn weak_form_residuals(&self, sol: &SteadySolution) -> Result<Vec<(WeakFormTest, f64)>> {
        weak_form::residuals(self, sol)
    }
}

fn combine(wall: &WallTerms, interior: &BasisIntegrals<4>, source: &[f64], lo: f64, ro: f64) -> LocalMoments {
    let mut acc = [0.0; 4];
    for (j, s) in source.iter().enumerate() {
        let (l, r) = (&interior.left[j], &interior.right[j]);
        acc[0] += (l[0] + r[0]) * s;
        acc[1] += (l[1] - r[1]) * s;
        acc[2] += (l[2] + r[2]) * s;
        acc[3] += (l[3] - r[3]) * s;
    }
    LocalMoments {
        density: wall.left[0] * lo + wall.right[0] * ro + acc[0],
        momentum: wall.left[1] * lo - wall.right[1] * ro + acc[1],
        pressure: wall.left[2] * lo + wall.right[2] * ro + acc[2],
        third: wall.left[3] * lo - wall.right[3] * ro + acc[3],
    }
}

/// Builds a solver with default quadrature settings and assembles the
/// operator for `profile`.
pub fn assemble_density_operator(profile: &TemperatureProfile, walls: &WallTemperatures) -> Result<DensityOperator> {
    LinearBgkSolver::new(*walls, profile.grid().clone(), &QuadratureSettings::default())?.assemble(profile)
}

#[cfg(test)]
mod tests;
