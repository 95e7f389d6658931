//! Maxwellians, wall distributions and the damped Gaussian moments
//!
//! ```text
//! km(n, a, T, κ) = ∫₀^∞ vⁿ exp(−a/(κv)) M_T(v) dv
//! ```
//!
//! that every other module is built from. With `v = √T·u` the moment factors
//! as `T^{n/2}·g_n(s)` where `s = a/(κ√T)` and
//! `g_n(s) = ∫₀^∞ uⁿ exp(−s/u) M₁(u) du`. Direct evaluation integrates `g_n`
//! in the variable `w = ln u`, where the integrand `exp((n+1)w − s·e^{−w} − e^{2w}/2)`
//! is smooth and log-concave, so the `exp(−s/u)` layer at `u → 0` and the
//! `ln(1/s)` growth of `g_{−1}` are both resolved without special cases.
//! [`KernelTable`] caches `ln g_n` as piecewise Chebyshev series in `ln s` for
//! the solver's inner loops.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BgkError, Result};
use crate::quadrature::{integrate, Tolerance};

/// Smallest and largest kernel order supported by the table.
pub const MIN_ORDER: i32 = -1;
pub const MAX_ORDER: i32 = 4;
const ORDERS: usize = (MAX_ORDER - MIN_ORDER + 1) as usize;

/// Wall temperatures and Knudsen number. Wall 1 sits at `x = 0` and is the
/// colder one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallTemperatures {
    pub t1: f64,
    pub t2: f64,
    pub kappa: f64,
}

impl WallTemperatures {
    pub fn new(t1: f64, t2: f64, kappa: f64) -> Result<Self> {
        let w = Self { t1, t2, kappa };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.t1) || !finite_pos(self.t2) {
            return Err(BgkError::Domain(format!(
                "wall temperatures must be positive and finite (t1 = {}, t2 = {})",
                self.t1, self.t2
            )));
        }
        if !finite_pos(self.kappa) {
            return Err(BgkError::Domain(format!("kappa must be positive and finite (got {})", self.kappa)));
        }
        if self.t1 > self.t2 {
            return Err(BgkError::Domain(format!(
                "wall 1 must be the colder wall (t1 = {} > t2 = {})",
                self.t1, self.t2
            )));
        }
        Ok(())
    }

    /// `√(T₁T₂)`, the leading-order NESS temperature.
    pub fn geometric_mean(&self) -> f64 {
        (self.t1 * self.t2).sqrt()
    }

    pub fn temperature(&self, wall: Wall) -> f64 {
        match wall {
            Wall::Left => self.t1,
            Wall::Right => self.t2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wall {
    /// `x = 0`, temperature `T₁`.
    Left,
    /// `x = 1`, temperature `T₂`.
    Right,
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(BgkError::Domain(format!("temperature must be positive and finite (got {t})")))
    }
}

/// `(2πT)^{−1/2} exp(−v²/(2T))`.
pub fn maxwellian(t: f64, v: f64) -> Result<f64> {
    check_temperature(t)?;
    Ok(maxwellian_unchecked(t, v))
}

#[inline]
pub(crate) fn maxwellian_unchecked(t: f64, v: f64) -> f64 {
    (-0.5 * v * v / t).exp() / (2.0 * PI * t).sqrt()
}

/// `(1/T) exp(−v²/(2T))`, normalized to unit outgoing flux.
pub fn wall_maxwellian(t: f64, v: f64) -> Result<f64> {
    check_temperature(t)?;
    Ok((-0.5 * v * v / t).exp() / t)
}

/// Ratio between the wall Maxwellian and the Maxwellian at the same
/// temperature, `√(2π/T)`.
#[inline]
pub fn wall_factor(t: f64) -> f64 {
    (2.0 * PI / t).sqrt()
}

/// Tolerances used by direct kernel quadrature.
pub const KERNEL_TOLERANCE: Tolerance = Tolerance::new(1e-12, 1e-10);

/// One damped Gaussian moment `km(n, a, T, κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoment {
    pub order: i32,
    pub distance: f64,
    pub temperature: f64,
    pub kappa: f64,
}

impl KernelMoment {
    pub fn value(&self) -> Result<f64> {
        kernel_moment(self.order, self.distance, self.temperature, self.kappa)
    }
}

fn check_order(n: i32) -> Result<()> {
    if (MIN_ORDER..=MAX_ORDER).contains(&n) {
        Ok(())
    } else {
        Err(BgkError::Domain(format!("kernel order {n} outside {MIN_ORDER}..={MAX_ORDER}")))
    }
}

/// `∫₀^∞ vⁿ exp(−a/(κv)) M_T(v) dv` by direct quadrature.
pub fn kernel_moment(n: i32, a: f64, t: f64, kappa: f64) -> Result<f64> {
    check_order(n)?;
    check_temperature(t)?;
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(BgkError::Domain(format!("kappa must be positive and finite (got {kappa})")));
    }
    if a.is_nan() || a < 0.0 {
        return Err(BgkError::Domain(format!("distance must be nonnegative (got {a})")));
    }
    if a == 0.0 && n == -1 {
        return Err(BgkError::Singularity);
    }
    let s = a / (kappa * t.sqrt());
    Ok(t.powf(0.5 * n as f64) * scaled_moment(n, s, KERNEL_TOLERANCE)?)
}

/// `g_n(0) = ∫₀^∞ uⁿ M₁(u) du` for `n ≥ 0`.
pub fn half_gaussian_moment(n: i32) -> f64 {
    // ∫₀^∞ uⁿ e^{−u²/2} du = 2^{(n−1)/2} Γ((n+1)/2)
    let mut twice = n + 1;
    let mut gamma = 1.0;
    while twice > 2 {
        twice -= 2;
        gamma *= twice as f64 / 2.0;
    }
    if twice == 1 {
        gamma *= PI.sqrt();
    }
    2f64.powf((n as f64 - 1.0) / 2.0) * gamma / (2.0 * PI).sqrt()
}

#[inline]
fn log_integrand(n: i32, s: f64, w: f64) -> f64 {
    (n + 1) as f64 * w - s * (-w).exp() - 0.5 * (2.0 * w).exp()
}

/// `ln g_n(s)` by direct quadrature in the log variable.
pub fn scaled_moment_ln(n: i32, s: f64, tol: Tolerance) -> Result<f64> {
    check_order(n)?;
    if s.is_nan() || s < 0.0 {
        return Err(BgkError::Domain(format!("scaled distance must be nonnegative (got {s})")));
    }
    if s == 0.0 {
        if n == -1 {
            return Err(BgkError::Singularity);
        }
        return Ok(half_gaussian_moment(n).ln());
    }
    let slope = |w: f64| (n + 1) as f64 + s * (-w).exp() - (2.0 * w).exp();
    // The exponent is strictly concave; bisect its derivative for the peak.
    let (mut lo, mut hi) = (-700.0_f64, 20.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let peak = 0.5 * (lo + hi);
    let top = log_integrand(n, s, peak);
    const DROP: f64 = 50.0;
    let cut = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if log_integrand(n, s, mid) > top - DROP {
                inside = mid;
            } else {
                outside = mid;
            }
            if (outside - inside).abs() < 1e-10 {
                break;
            }
        }
        outside
    };
    let w_lo = cut(peak, peak - 1000.0);
    let w_hi = cut(peak, peak + 40.0);
    let pieces = ((w_hi - w_lo) / 2.0).ceil().max(4.0) as usize;
    let inner = integrate(|w| (log_integrand(n, s, w) - top).exp(), w_lo, w_hi, pieces, tol)?;
    Ok(top + inner.ln() - 0.5 * (2.0 * PI).ln())
}

/// `g_n(s)` by direct quadrature.
pub fn scaled_moment(n: i32, s: f64, tol: Tolerance) -> Result<f64> {
    scaled_moment_ln(n, s, tol).map(f64::exp)
}

/// `(C₁, C₂)`: fraction of the flux leaving each wall that reaches the other
/// wall without colliding.
pub fn boundary_constants(walls: &WallTemperatures) -> Result<(f64, f64)> {
    walls.validate()?;
    let c = |t: f64| -> Result<f64> { Ok(wall_factor(t) * kernel_moment(1, 1.0, t, walls.kappa)?) };
    Ok((c(walls.t1)?, c(walls.t2)?))
}

/// Inverse-CDF map for the flux-weighted wall law: `√(−2T ln u)`.
pub fn wall_velocity_from_uniform(t: f64, u: f64) -> f64 {
    (-2.0 * t * u.ln()).sqrt()
}

/// Draws a speed with density `v·(1/T)·exp(−v²/(2T))` on `v > 0`. The caller
/// applies the inward sign.
pub fn sample_wall_velocity<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], keeping the logarithm finite.
    let u = 1.0 - rng.random::<f64>();
    wall_velocity_from_uniform(t, u)
}

const Z_LO: f64 = -36.0;
const Z_HI: f64 = 10.0;
const PANEL: f64 = 0.5;
const DEGREE: usize = 16;

/// Piecewise Chebyshev tables of `ln g_n(e^z)` for every supported order.
#[derive(Debug)]
pub struct KernelTable {
    panels: usize,
    // coeffs[order][panel][k]
    coeffs: Vec<Vec<[f64; DEGREE]>>,
    // g_n at the left end of the table, for the small-s extension.
    g_lo: [f64; ORDERS],
}

impl KernelTable {
    pub fn build(tol: Tolerance) -> Result<Self> {
        let panels = ((Z_HI - Z_LO) / PANEL).round() as usize;
        let cheb_t: Vec<f64> = (0..DEGREE)
            .map(|j| (PI * (j as f64 + 0.5) / DEGREE as f64).cos())
            .collect();
        let mut coeffs = Vec::with_capacity(ORDERS);
        let mut g_lo = [0.0; ORDERS];
        for (oi, n) in (MIN_ORDER..=MAX_ORDER).enumerate() {
            let mut per_order = Vec::with_capacity(panels);
            for p in 0..panels {
                let z0 = Z_LO + PANEL * p as f64;
                let mut values = [0.0; DEGREE];
                for j in 0..DEGREE {
                    let z = z0 + 0.5 * PANEL * (cheb_t[j] + 1.0);
                    values[j] = scaled_moment_ln(n, z.exp(), tol)?;
                }
                let mut c = [0.0; DEGREE];
                for (k, ck) in c.iter_mut().enumerate() {
                    let mut sum = 0.0;
                    for (j, v) in values.iter().enumerate() {
                        sum += v * (PI * k as f64 * (j as f64 + 0.5) / DEGREE as f64).cos();
                    }
                    *ck = 2.0 * sum / DEGREE as f64;
                }
                c[0] *= 0.5;
                per_order.push(c);
            }
            g_lo[oi] = scaled_moment(n, Z_LO.exp(), tol)?;
            coeffs.push(per_order);
        }
        Ok(Self { panels, coeffs, g_lo })
    }

    /// Process-wide table for the given tolerance, built on first use.
    pub fn shared(tol: Tolerance) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<Vec<(u64, u64, Arc<KernelTable>)>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let key = (tol.abs.to_bits(), tol.rel.to_bits());
        let mut guard = cache.lock().expect("kernel table cache poisoned");
        if let Some((_, _, t)) = guard.iter().find(|(a, r, _)| (*a, *r) == key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(Self::build(tol)?);
        guard.push((key.0, key.1, Arc::clone(&table)));
        Ok(table)
    }

    /// `g_n(s)` for `K` consecutive orders starting at `first`.
    #[inline]
    pub fn scaled<const K: usize>(&self, first: i32, s: f64) -> [f64; K] {
        debug_assert!(first >= MIN_ORDER && first + K as i32 - 1 <= MAX_ORDER);
        let base = (first - MIN_ORDER) as usize;
        let mut out = [0.0; K];
        if s <= 0.0 || s.is_nan() {
            for (k, o) in out.iter_mut().enumerate() {
                let n = first + k as i32;
                *o = if n == -1 { f64::INFINITY } else { half_gaussian_moment(n) };
            }
            return out;
        }
        let z = s.ln();
        if z >= Z_HI {
            return out;
        }
        if z < Z_LO {
            for (k, o) in out.iter_mut().enumerate() {
                let n = first + k as i32;
                *o = self.g_lo[base + k];
                if n == -1 {
                    *o += (Z_LO - z) / (2.0 * PI).sqrt();
                }
            }
            return out;
        }
        let x = (z - Z_LO) / PANEL;
        let p = (x as usize).min(self.panels - 1);
        let t = 2.0 * (x - p as f64) - 1.0;
        let mut basis = [0.0; DEGREE];
        basis[0] = 1.0;
        basis[1] = t;
        for k in 2..DEGREE {
            basis[k] = 2.0 * t * basis[k - 1] - basis[k - 2];
        }
        for (k, o) in out.iter_mut().enumerate() {
            let c = &self.coeffs[base + k][p];
            let mut acc = 0.0;
            for j in 0..DEGREE {
                acc += c[j] * basis[j];
            }
            *o = acc.exp();
        }
        out
    }

    /// Tabulated `km(n, a, T, κ)`.
    pub fn moment(&self, n: i32, a: f64, t: f64, kappa: f64) -> f64 {
        let s = a / (kappa * t.sqrt());
        t.powf(0.5 * n as f64) * self.scaled::<1>(n, s)[0]
    }
}
