//! Damped Picard iteration for the temperature map `T ↦ τ_T`.
//!
//! The nonlinear steady state is a temperature profile reproduced by the
//! linear problem it defines. Existence is known only through a compactness
//! argument, so the iteration is damped and its delta history is kept as a
//! diagnostic rather than assumed contractive.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{BgkError, Result};
use crate::kernels::WallTemperatures;
use crate::linear_bgk::{LinearBgkSolver, SpatialGrid, SteadySolution, TemperatureProfile};

/// Escapes from `[T₁, T₂]` up to this fraction of `T₂` are treated as
/// round-off and clamped.
pub const ESCAPE_SLACK: f64 = 1e-9;

/// Escapes below this fraction of `T₂` are within the accuracy of the
/// density solve: snapped back without being counted as clamp events.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Length of a non-decreasing tail of deltas that marks a run as suspect.
pub const SUSPECT_TAIL: usize = 5;

/// Verdict of the two-part admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `κ²T₁ > γ₂`.
    pub rarefaction_holds: bool,
    /// `κ²T₁ − γ₂`.
    pub rarefaction_margin: f64,
    /// `√T₂ − √T₁ ≥ γ₁ κ^{1/2} T₂^{1/4}`.
    pub separation_holds: bool,
    /// `(√T₂ − √T₁) − γ₁ κ^{1/2} T₂^{1/4}`.
    pub separation_margin: f64,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.rarefaction_holds && self.separation_holds
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.rarefaction_holds {
            parts.push(format!("kappa^2*T1 - gamma2 = {:e} is not positive", self.rarefaction_margin));
        }
        if !self.separation_holds {
            parts.push(format!(
                "sqrt(T2) - sqrt(T1) - gamma1*kappa^(1/2)*T2^(1/4) = {:e} is negative",
                self.separation_margin
            ));
        }
        parts.join("; ")
    }
}

pub fn check_condition(walls: &WallTemperatures, gamma1: f64, gamma2: f64) -> ConditionReport {
    let WallTemperatures { t1, t2, kappa } = *walls;
    let rarefaction_margin = kappa * kappa * t1 - gamma2;
    let separation_margin = (t2.sqrt() - t1.sqrt()) - gamma1 * kappa.sqrt() * t2.powf(0.25);
    ConditionReport {
        gamma1,
        gamma2,
        rarefaction_holds: rarefaction_margin > 0.0,
        rarefaction_margin,
        separation_holds: separation_margin >= 0.0,
        separation_margin,
    }
}

/// One application of the temperature map: the linear steady state for
/// `profile` and its temperature `τ` as a profile on the same grid.
pub fn apply_map(solver: &LinearBgkSolver, profile: &TemperatureProfile) -> Result<(TemperatureProfile, SteadySolution)> {
    let sol = solver.steady_state(profile)?;
    Ok((sol.tau_profile()?, sol))
}

/// Convenience form of [`apply_map`] with default quadrature on the
/// profile's own grid.
pub fn apply_f(profile: &TemperatureProfile, walls: &WallTemperatures) -> Result<TemperatureProfile> {
    let solver = LinearBgkSolver::new(*walls, profile.grid().clone(), &Default::default())?;
    Ok(apply_map(&solver, profile)?.0)
}

/// Empirical continuity ratio `‖F(a) − F(b)‖∞ / ‖√a − √b‖∞`.
pub fn continuity_ratio(solver: &LinearBgkSolver, a: &TemperatureProfile, b: &TemperatureProfile) -> Result<f64> {
    let (fa, _) = apply_map(solver, a)?;
    let (fb, _) = apply_map(solver, b)?;
    let root_gap = a.values().iter().zip(b.values()).map(|(x, y)| (x.sqrt() - y.sqrt()).abs()).fold(0.0, f64::max);
    if root_gap == 0.0 {
        return Err(BgkError::Domain("continuity ratio needs two distinct profiles".into()));
    }
    Ok(fa.sup_distance(&fb) / root_gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// Nodal values of every iterate, starting with the initial guess.
    pub iterates: Vec<Vec<f64>>,
    pub sup_norm_deltas: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub damping: f64,
    /// Number of nodal values moved back into `[T₁, T₂]` from beyond
    /// the solver noise floor.
    pub clamp_events: usize,
    /// Clamping happened although the admissibility condition holds.
    pub clamp_anomaly: bool,
    /// Deltas ended with a non-decreasing run longer than [`SUSPECT_TAIL`].
    pub suspect: bool,
    pub condition: ConditionReport,
    /// `‖T* − F(T*)‖∞ / √(T₁T₂)` from one extra application of the map.
    pub consistency_residual: f64,
    /// Linear steady state for the final profile.
    pub last: SteadySolution,
}

impl FixedPointReport {
    pub fn profile(&self) -> &TemperatureProfile {
        &self.last.profile
    }
}

/// Length of the trailing run of non-decreasing deltas.
pub fn nondecreasing_tail(deltas: &[f64]) -> usize {
    let mut n = 0;
    for w in deltas.windows(2).rev() {
        if w[1] >= w[0] {
            n += 1;
        } else {
            break;
        }
    }
    n
}

/// Runs damped Picard from the constant profile `√(T₁T₂)`.
pub fn find_ness(walls: &WallTemperatures, config: &RunConfig) -> Result<FixedPointReport> {
    walls.validate()?;
    let fp = &config.fixed_point;
    let condition = check_condition(walls, fp.gamma1, fp.gamma2);
    if !condition.holds() && !fp.force {
        return Err(BgkError::Condition(condition.describe()));
    }
    let grid = SpatialGrid::graded(config.grid.nodes, config.grid.grading)?;
    let solver = LinearBgkSolver::new(*walls, grid.clone(), &config.quadrature)?;
    let scale = walls.geometric_mean();
    let (t1, t2) = (walls.t1, walls.t2);
    let slack = ESCAPE_SLACK * t2;
    let theta = fp.damping;

    let mut current = TemperatureProfile::constant(grid.clone(), scale)?;
    let mut iterates = vec![current.values().to_vec()];
    let mut deltas = Vec::new();
    let mut clamp_events = 0;
    let mut converged = false;

    for _ in 0..fp.max_iter {
        let (mapped, _) = apply_map(&solver, &current)?;
        let mut next = Vec::with_capacity(grid.len());
        for (j, (old, new)) in current.values().iter().zip(mapped.values()).enumerate() {
            let mut t = (1.0 - theta) * old + theta * new;
            if t < t1 || t > t2 {
                let escape = (t1 - t).max(t - t2);
                if escape > slack && condition.holds() && !fp.force {
                    return Err(BgkError::Invariant(format!(
                        "iterate value {t} at node {j} leaves [{t1}, {t2}] by {escape:e}"
                    )));
                }
                if escape > NOISE_FLOOR * t2 {
                    clamp_events += 1;
                }
                t = t.clamp(t1, t2);
            }
            next.push(t);
        }
        let next = TemperatureProfile::new(grid.clone(), next)?;
        let delta = next.sup_distance(&current);
        deltas.push(delta);
        iterates.push(next.values().to_vec());
        current = next;
        if delta <= fp.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = deltas.last().copied().unwrap_or(f64::NAN);
        return Err(BgkError::NonConvergence { iterations: deltas.len(), deltas, last });
    }
    let (check, last) = apply_map(&solver, &current)?;
    let consistency_residual = check.sup_distance(&current) / scale;
    Ok(FixedPointReport {
        iterations: deltas.len(),
        suspect: nondecreasing_tail(&deltas) > SUSPECT_TAIL,
        iterates,
        sup_norm_deltas: deltas,
        converged,
        damping: theta,
        clamp_events,
        clamp_anomaly: clamp_events > 0 && condition.holds(),
        condition,
        consistency_residual,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(nodes: usize) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.grid.nodes = nodes;
        cfg
    }

    #[test]
    fn condition_margins_by_arithmetic() {
        let w = WallTemperatures::new(100.0, 10_000.0, 1.0).unwrap();
        let c = check_condition(&w, 1.0, 1.0);
        assert!(c.holds());
        assert!((c.rarefaction_margin - 99.0).abs() < 1e-12);
        // 100 − 10 − 1·10
        assert!((c.separation_margin - 80.0).abs() < 1e-12);
    }

    #[test]
    fn equal_walls_fail_separation() {
        let w = WallTemperatures::new(50.0, 50.0, 1.0).unwrap();
        let c = check_condition(&w, 1e-6, 1.0);
        assert!(!c.separation_holds);
        assert!(c.rarefaction_holds);
    }

    #[test]
    fn rarefaction_is_strict() {
        let w = WallTemperatures::new(4.0, 400.0, 0.5).unwrap();
        let c = check_condition(&w, 1.0, 1.0);
        assert_eq!(c.rarefaction_margin, 0.0);
        assert!(!c.rarefaction_holds);
    }

    #[test]
    fn condition_failure_is_an_error_without_force() {
        let mut cfg = quick_config(8);
        cfg.walls = WallTemperatures::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(find_ness(&cfg.walls.clone(), &cfg), Err(BgkError::Condition(_))));
    }

    #[test]
    fn equilibrium_converges_in_one_iteration() {
        let mut cfg = quick_config(32);
        cfg.walls = WallTemperatures::new(1.0, 1.0, 1.0).unwrap();
        cfg.fixed_point.force = true;
        let rep = find_ness(&cfg.walls.clone(), &cfg).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.clamp_events, 0);
        assert!(rep.last.tau.iter().all(|t| (t - 1.0).abs() < 1e-10));
        assert!(rep.consistency_residual < 1e-10);
    }

    #[test]
    fn map_fixes_equilibrium_and_stays_in_band() {
        let grid = SpatialGrid::graded(16, 2.0).unwrap();
        let w = WallTemperatures::new(3.0, 3.0, 1.0).unwrap();
        let out = apply_f(&TemperatureProfile::constant(grid.clone(), 3.0).unwrap(), &w).unwrap();
        assert!(out.values().iter().all(|t| (t - 3.0).abs() < 1e-10));

        let w = WallTemperatures::new(100.0, 400.0, 1.0).unwrap();
        let tilted = TemperatureProfile::new(grid.clone(), grid.nodes().iter().map(|x| 100.0 + 300.0 * x).collect()).unwrap();
        let out = apply_f(&tilted, &w).unwrap();
        assert!(out.within(100.0, 400.0, 0.0));
    }

    #[test]
    fn admissible_point_converges_without_clamping() {
        let cfg = quick_config(24);
        let rep = find_ness(&cfg.walls.clone(), &cfg).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.clamp_events, 0);
        assert!(!rep.suspect);
        assert!(rep.iterations <= 50);
        assert!(*rep.sup_norm_deltas.last().unwrap() <= cfg.fixed_point.tol * 200.0);
        assert!(rep.consistency_residual < 2.0 * cfg.fixed_point.tol);
        assert!(rep.last.tau.iter().all(|t| (100.0..=400.0).contains(t)));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let mut cfg = quick_config(16);
        cfg.fixed_point.max_iter = 2;
        cfg.fixed_point.tol = 1e-14;
        match find_ness(&cfg.walls.clone(), &cfg) {
            Err(BgkError::NonConvergence { iterations, deltas, last }) => {
                assert_eq!(iterations, 2);
                assert_eq!(deltas.len(), 2);
                assert_eq!(last, deltas[1]);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn continuity_ratio_is_finite() {
        let grid = SpatialGrid::graded(16, 2.0).unwrap();
        let w = WallTemperatures::new(100.0, 400.0, 1.0).unwrap();
        let solver = LinearBgkSolver::new(w, grid.clone(), &Default::default()).unwrap();
        let a = TemperatureProfile::constant(grid.clone(), 200.0).unwrap();
        let b = TemperatureProfile::constant(grid.clone(), 210.0).unwrap();
        let r = continuity_ratio(&solver, &a, &b).unwrap();
        assert!(r.is_finite() && r >= 0.0);
        assert!(continuity_ratio(&solver, &a, &a).is_err());
    }

    #[test]
    fn tail_counter() {
        assert_eq!(nondecreasing_tail(&[5.0, 4.0, 3.0]), 0);
        assert_eq!(nondecreasing_tail(&[5.0, 1.0, 2.0, 2.0, 3.0]), 3);
        assert_eq!(nondecreasing_tail(&[]), 0);
    }
}
