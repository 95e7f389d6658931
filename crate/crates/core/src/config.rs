//! Run configuration. Every numeric knob of the library lives here so that a
//! single file fully determines a run.

use serde::{Deserialize, Serialize};

use crate::error::{BgkError, Result};
use crate::kernels::WallTemperatures;
use crate::quadrature::Tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    /// Number of Nyström nodes.
    pub nodes: usize,
    /// Grading exponent toward both walls; 1 is uniform.
    pub grading: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { nodes: 64, grading: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    pub kernel_abs_tol: f64,
    pub kernel_rel_tol: f64,
    pub product_abs_tol: f64,
    pub product_rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { kernel_abs_tol: 1e-12, kernel_rel_tol: 1e-10, product_abs_tol: 1e-14, product_rel_tol: 1e-11 }
    }
}

impl QuadratureSettings {
    pub fn kernel(&self) -> Tolerance {
        Tolerance::new(self.kernel_abs_tol, self.kernel_rel_tol)
    }

    pub fn product(&self) -> Tolerance {
        Tolerance::new(self.product_abs_tol, self.product_rel_tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSettings {
    /// Picard damping θ ∈ (0, 1].
    pub damping: f64,
    /// Relative sup-norm tolerance, scaled by √(T₁T₂).
    pub tol: f64,
    pub max_iter: usize,
    /// Constant of the wall-separation requirement (not fixed by theory).
    pub gamma1: f64,
    /// Constant of the rarefaction requirement (not fixed by theory).
    pub gamma2: f64,
    /// Run even when the admissibility condition fails.
    pub force: bool,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-8, max_iter: 200, gamma1: 1.0, gamma2: 1.0, force: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub particles: usize,
    pub t_end: f64,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub bins: usize,
    pub batches: usize,
    /// Optional profile table written by `solve`; its τ column is used as the
    /// frozen temperature. Without it the profile is solved self-consistently.
    pub profile: Option<String>,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            particles: 10_000,
            t_end: 1000.0,
            burn_in_fraction: 0.2,
            seed: 20_240_611,
            bins: 32,
            batches: 32,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSettings {
    /// |∫ρ − 1|.
    pub mass_tol: f64,
    /// max|u| relative to √P.
    pub momentum_tol: f64,
    /// (max P(x) − min P(x)) / P.
    pub pressure_tol: f64,
    /// (max J − min J) / |mean J|, or absolute when |mean J| is tiny.
    pub heat_flux_tol: f64,
    /// ‖T − F(T)‖∞ / √(T₁T₂).
    pub consistency_tol: f64,
    /// Upper limit on the fitted constants of the `T₁^{−1/4}` density and
    /// temperature brackets.
    pub fitted_constant_max: f64,
    /// Largest weak-form residual over the built-in test functions.
    pub weak_form_tol: f64,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            mass_tol: 1e-10,
            momentum_tol: 1e-6,
            pressure_tol: 1e-4,
            heat_flux_tol: 1e-3,
            consistency_tol: 1e-6,
            fitted_constant_max: 10.0,
            weak_form_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub t1: f64,
    pub t2: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: String,
    /// Worker threads for assembly and Monte Carlo.
    pub workers: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: "out".into(), workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub walls: WallTemperatures,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub fixed_point: FixedPointSettings,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            walls: WallTemperatures { t1: 100.0, t2: 400.0, kappa: 1.0 },
            grid: GridSettings::default(),
            quadrature: QuadratureSettings::default(),
            fixed_point: FixedPointSettings::default(),
            monte_carlo: MonteCarloSettings::default(),
            diagnostics: DiagnosticsSettings::default(),
            sweep: SweepSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(BgkError::Config(format!("{name} must be positive and finite (got {v})")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BgkError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.walls.validate().map_err(|e| BgkError::Config(e.to_string()))?;
        if self.grid.nodes < 4 || self.grid.nodes > 4096 {
            return Err(BgkError::Config(format!("grid.nodes must be in 4..=4096 (got {})", self.grid.nodes)));
        }
        if !(self.grid.grading.is_finite() && (1.0..=4.0).contains(&self.grid.grading)) {
            return Err(BgkError::Config(format!("grid.grading must be in [1, 4] (got {})", self.grid.grading)));
        }
        let q = &self.quadrature;
        for (name, v) in [
            ("quadrature.kernel_abs_tol", q.kernel_abs_tol),
            ("quadrature.kernel_rel_tol", q.kernel_rel_tol),
            ("quadrature.product_abs_tol", q.product_abs_tol),
            ("quadrature.product_rel_tol", q.product_rel_tol),
        ] {
            positive(name, v)?;
            if v >= 1e-3 {
                return Err(BgkError::Config(format!("{name} must be below 1e-3 (got {v})")));
            }
        }
        let fp = &self.fixed_point;
        if !(fp.damping > 0.0 && fp.damping <= 1.0) {
            return Err(BgkError::Config(format!("fixed_point.damping must be in (0, 1] (got {})", fp.damping)));
        }
        positive("fixed_point.tol", fp.tol)?;
        positive("fixed_point.gamma1", fp.gamma1)?;
        positive("fixed_point.gamma2", fp.gamma2)?;
        if fp.max_iter == 0 {
            return Err(BgkError::Config("fixed_point.max_iter must be at least 1".into()));
        }
        let mc = &self.monte_carlo;
        if mc.particles == 0 {
            return Err(BgkError::Config("monte_carlo.particles must be at least 1".into()));
        }
        positive("monte_carlo.t_end", mc.t_end)?;
        if !(0.0..1.0).contains(&mc.burn_in_fraction) {
            return Err(BgkError::Config(format!(
                "monte_carlo.burn_in_fraction must be in [0, 1) (got {})",
                mc.burn_in_fraction
            )));
        }
        if mc.bins == 0 || mc.batches < 2 {
            return Err(BgkError::Config("monte_carlo needs bins >= 1 and batches >= 2".into()));
        }
        let d = &self.diagnostics;
        for (name, v) in [
            ("diagnostics.mass_tol", d.mass_tol),
            ("diagnostics.momentum_tol", d.momentum_tol),
            ("diagnostics.pressure_tol", d.pressure_tol),
            ("diagnostics.heat_flux_tol", d.heat_flux_tol),
            ("diagnostics.consistency_tol", d.consistency_tol),
            ("diagnostics.fitted_constant_max", d.fitted_constant_max),
            ("diagnostics.weak_form_tol", d.weak_form_tol),
        ] {
            positive(name, v)?;
        }
        for (i, p) in self.sweep.points.iter().enumerate() {
            WallTemperatures::new(p.t1, p.t2, p.kappa)
                .map_err(|e| BgkError::Config(format!("sweep.points[{i}]: {e}")))?;
        }
        if self.output.workers == 0 {
            return Err(BgkError::Config("output.workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[walls]\nt1 = 1.0\nt2 = 2.0\nkappa = 1.0\n[grid]\nnodez = 3\n";
        assert!(matches!(RunConfig::from_toml_str(text), Err(BgkError::Config(_))));
    }

    #[test]
    fn ranges_are_checked() {
        let mut cfg = RunConfig::default();
        cfg.walls.t1 = 500.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.fixed_point.damping = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.monte_carlo.burn_in_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_toml_str("[walls]\nt1 = 1.0\nt2 = 1.0\nkappa = 1.0\n").unwrap();
        assert_eq!(cfg.grid, GridSettings::default());
        assert_eq!(cfg.fixed_point.damping, 0.5);
    }
}
