//! Stationary weak form
//!
//! ```text
//! R[φ] = ∫∫ f [v ∂ₓφ + (⟨φ⟩_{T(x)} − φ)/κ] dv dx
//! ```
//!
//! for test functions `φ(x, v) = X_a(x)·V_b(v)` with
//! `X_a = (x(1−x))² xᵃ` and `V_b = (v/σ)ᵇ exp(−v²/(2σ²))`. Multiplying a
//! Maxwellian by the Gaussian cutoff gives a Maxwellian at
//! `T' = Tσ²/(T + σ²)`, so every velocity integral of the reconstructed `f`
//! against `V_b` is again a damped Gaussian moment and is evaluated with the
//! same product integration as the solver.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::half_gaussian_moment;
use crate::quadrature::gauss_legendre;

use super::product::basis_integrals;
use super::{LinearBgkSolver, SteadySolution};

const X_POWERS: usize = 3;
const V_POWERS: usize = 4;
const GAUSS_POINTS: usize = 8;

/// One member of the test battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakFormTest {
    pub x_power: usize,
    pub v_power: usize,
}

fn x_part(a: usize, x: f64) -> (f64, f64) {
    let w = x * (1.0 - x);
    let dw = 1.0 - 2.0 * x;
    let xa = x.powi(a as i32);
    let dxa = if a == 0 { 0.0 } else { a as f64 * x.powi(a as i32 - 1) };
    (w * w * xa, 2.0 * w * dw * xa + w * w * dxa)
}

/// `∫ vᶜ M_T dv` over the whole line.
fn full_moment(c: usize, t: f64) -> f64 {
    if c % 2 == 1 {
        0.0
    } else {
        2.0 * t.powf(0.5 * c as f64) * half_gaussian_moment(c as i32)
    }
}

/// Residual of every test function, in battery order.
pub(crate) fn residuals(solver: &LinearBgkSolver, sol: &SteadySolution) -> Result<Vec<(WeakFormTest, f64)>> {
    let walls = solver.walls;
    let kappa = walls.kappa;
    let sigma2 = walls.geometric_mean();
    let sigma = sigma2.sqrt();
    let shifted = |t: f64| t * sigma2 / (t + sigma2);
    let source = sol.source();
    let (lo_flux, ro_flux) = (sol.moments.left_outflux(), sol.moments.right_outflux());
    let table = solver.kernels();
    let (gx, gw) = gauss_legendre(GAUSS_POINTS);
    let bp = solver.grid().breakpoints();

    let mut acc = [[0.0; V_POWERS]; X_POWERS];
    for k in 0..bp.len() - 1 {
        let (a, b) = (bp[k], bp[k + 1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in gx.iter().zip(&gw) {
            let x = a + half * (1.0 + xi);
            let weight = half * wi;
            let t_here = sol.profile.at(x);
            let rho_f = solver.density_at(sol, x)?;
            // G[c] = ∫ V_c f dv for c = 0..=4.
            let interior = basis_integrals::<5, 10, _>(
                solver.grid(),
                x,
                |d, y| {
                    let t = sol.profile.at(y);
                    let tp = shifted(t);
                    let rtp = tp.sqrt();
                    let s = (d / (kappa * rtp)).max(f64::MIN_POSITIVE);
                    let g = table.scaled::<5>(-1, s);
                    let scale = (tp / t).sqrt() / kappa;
                    let mut out = [0.0; 5];
                    let mut pw = 1.0 / rtp;
                    for c in 0..5 {
                        out[c] = scale * pw * g[c];
                        pw *= rtp;
                    }
                    out
                },
                solver.tolerance(),
            )?;
            let wall = |dist: f64, t: f64| {
                let tp = shifted(t);
                let rtp = tp.sqrt();
                let g = table.scaled::<5>(0, dist / (kappa * rtp));
                let scale = (2.0 * std::f64::consts::PI * tp).sqrt() / t;
                let mut out = [0.0; 5];
                let mut pw = 1.0;
                for c in 0..5 {
                    out[c] = scale * pw * g[c];
                    pw *= rtp;
                }
                out
            };
            let wl = wall(x, walls.t1);
            let wr = wall(1.0 - x, walls.t2);
            let mut g = [0.0; 5];
            for c in 0..5 {
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                let mut v = wl[c] * lo_flux + sign * wr[c] * ro_flux;
                for (j, s) in source.iter().enumerate() {
                    v += (interior.left[j][c] + sign * interior.right[j][c]) * s;
                }
                g[c] = v / sigma.powi(c as i32);
            }
            let tp_here = shifted(t_here);
            for bpow in 0..V_POWERS {
                let mean_v = (tp_here / t_here).sqrt() * full_moment(bpow, tp_here) / sigma.powi(bpow as i32);
                let g0 = g[bpow];
                let g1 = sigma * g[bpow + 1];
                for (apow, row) in acc.iter_mut().enumerate() {
                    let (xv, dxv) = x_part(apow, x);
                    row[bpow] += weight * (dxv * g1 + xv * (mean_v * rho_f - g0) / kappa);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(X_POWERS * V_POWERS);
    for (apow, row) in acc.iter().enumerate() {
        for (bpow, r) in row.iter().enumerate() {
            out.push((WeakFormTest { x_power: apow, v_power: bpow }, *r));
        }
    }
    Ok(out)
}

pub(crate) fn residual(solver: &LinearBgkSolver, sol: &SteadySolution) -> Result<f64> {
    Ok(residuals(solver, sol)?.iter().fold(0.0, |m, (_, r)| m.max(r.abs())))
}
