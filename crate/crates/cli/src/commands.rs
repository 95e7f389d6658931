use std::path::{Path, PathBuf};

use bgk_ness::bounds::{bracket_reports, log_log_slope, BoundReport, BoundStatus};
use bgk_ness::config::RunConfig;
use bgk_ness::diagnostics::{heat_flux, run_full_diagnostics, DiagnosticsReport};
use bgk_ness::fixed_point::{find_ness, ConditionReport, FixedPointReport};
use bgk_ness::kernels::WallTemperatures;
use bgk_ness::linear_bgk::{LinearBgkSolver, SpatialGrid, SteadySolution, TemperatureProfile};
use bgk_ness::stochastic::{bin_temperatures, simulate, EmpiricalMoments, Estimate, WallStatistics};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{canonical_config, config_hash, header_line, prepare_dir, read_profile_table, write_file, write_json, Cell, Table};
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let out = prepare_dir(Path::new(&config.output.dir))?;
        Ok(Context { hash: config_hash(&config), config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_config(&self) -> Result<(), CliError> {
        let text = format!("{}\n{}", header_line(&self.hash), canonical_config(&self.config));
        write_file(&self.path("config.toml"), &text)
    }
}

#[derive(Debug, Serialize)]
pub struct FixedPointSummary {
    pub converged: bool,
    pub iterations: usize,
    pub damping: f64,
    pub sup_norm_deltas: Vec<f64>,
    pub clamp_events: usize,
    pub clamp_anomaly: bool,
    pub suspect: bool,
    pub condition: ConditionReport,
    pub consistency_residual: f64,
    pub pressure: f64,
    pub perron_root: f64,
    pub spectral_gap: f64,
    pub density_residual: f64,
    pub left_outflux: f64,
    pub right_outflux: f64,
}

impl From<&FixedPointReport> for FixedPointSummary {
    fn from(r: &FixedPointReport) -> Self {
        FixedPointSummary {
            converged: r.converged,
            iterations: r.iterations,
            damping: r.damping,
            sup_norm_deltas: r.sup_norm_deltas.clone(),
            clamp_events: r.clamp_events,
            clamp_anomaly: r.clamp_anomaly,
            suspect: r.suspect,
            condition: r.condition,
            consistency_residual: r.consistency_residual,
            pressure: r.last.pressure,
            perron_root: r.last.perron_root,
            spectral_gap: r.last.spectral_gap,
            density_residual: r.last.residual,
            left_outflux: r.last.moments.left_outflux(),
            right_outflux: r.last.moments.right_outflux(),
        }
    }
}

fn profile_table(hash: &str, sol: &SteadySolution) -> Table {
    let mut t = Table::new(hash, &["x", "rho", "u", "tau", "P", "J"]);
    let flux = heat_flux(sol);
    for (i, x) in sol.grid.nodes().iter().enumerate() {
        t.row(&[
            Cell::F(*x),
            Cell::F(sol.rho[i]),
            Cell::F(sol.u[i]),
            Cell::F(sol.tau[i]),
            Cell::F(sol.pressure_profile[i]),
            Cell::F(flux[i]),
        ]);
    }
    t
}

fn failed_names(diag: &DiagnosticsReport) -> Vec<String> {
    diag.failures().iter().map(|c| format!("{} ({:e} > {:e})", c.name, c.measured, c.limit)).collect()
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let fp = find_ness(&cfg.walls, cfg)?;
    let diag = run_full_diagnostics(&fp.last, cfg, Some(&fp));
    ctx.write_config()?;
    profile_table(&ctx.hash, &fp.last).write(&ctx.path("profile.tsv"))?;
    write_json(&ctx.path("fixed_point.json"), &ctx.hash, &FixedPointSummary::from(&fp))?;
    write_json(&ctx.path("diagnostics.json"), &ctx.hash, &diag)?;
    println!(
        "converged in {} iterations: P = {:.10e}, tau in [{:.6e}, {:.6e}], clamp events {}",
        fp.iterations, fp.last.pressure, diag.tau_min, diag.tau_max, fp.clamp_events
    );
    if diag.passed {
        Ok(())
    } else {
        Err(CliError::Validation(failed_names(&diag).join(", ")))
    }
}

#[derive(Debug, Serialize)]
struct McSummary {
    profile_source: String,
    particles: usize,
    events: u64,
    event_rate: f64,
    total_time: f64,
    window: (f64, f64),
    batches: usize,
    left_wall: WallStatistics,
    right_wall: WallStatistics,
    left_outflux: f64,
    right_outflux: f64,
    /// Deterministic `∫₀¹ J dx` against which the wall energy fluxes compare.
    heat_flux: f64,
    tau_within_3se: f64,
    u_within_3se: f64,
}

fn fraction_within(z: impl Iterator<Item = f64>, limit: f64) -> f64 {
    let (mut inside, mut n) = (0usize, 0usize);
    for v in z {
        n += 1;
        inside += usize::from(v.abs() <= limit);
    }
    inside as f64 / n.max(1) as f64
}

pub fn mc(ctx: &Context, profile_path: Option<&Path>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let walls = cfg.walls;
    let source = profile_path.map(Path::to_path_buf).or_else(|| cfg.monte_carlo.profile.as_ref().map(PathBuf::from));
    let (solver, sol, label) = match &source {
        Some(path) => {
            let (xs, ts, digest) = read_profile_table(path)?;
            let grid = SpatialGrid::from_nodes(xs)?;
            let profile = TemperatureProfile::new(grid.clone(), ts)?;
            let solver = LinearBgkSolver::new(walls, grid, &cfg.quadrature)?;
            let sol = solver.steady_state(&profile)?;
            (solver, sol, format!("profile table sha256={digest}"))
        }
        None => {
            let fp = find_ness(&walls, cfg)?;
            let solver = LinearBgkSolver::new(walls, fp.last.grid.clone(), &cfg.quadrature)?;
            (solver, fp.last, "self-consistent".to_string())
        }
    };
    let em = simulate(&walls, &sol.profile, &cfg.monte_carlo)?;
    let reference = bin_temperatures(&em.edges, sol.pressure, |x| solver.density_at(&sol, x))?;

    ctx.write_config()?;
    moments_table(&ctx.hash, &em).write(&ctx.path("moments.tsv"))?;
    let mut cmp = Table::new(&ctx.hash, &["x_lo", "x_hi", "tau_det", "tau_mc", "tau_se", "z_tau", "u_mc", "u_se", "z_u"]);
    for b in 0..em.bins() {
        let (t, u) = (em.tau_hat[b], em.u_hat[b]);
        cmp.row(&[
            Cell::F(em.edges[b]),
            Cell::F(em.edges[b + 1]),
            Cell::F(reference[b]),
            Cell::F(t.mean),
            Cell::F(t.stderr),
            Cell::F(t.z_score(reference[b])),
            Cell::F(u.mean),
            Cell::F(u.stderr),
            Cell::F(u.z_score(0.0)),
        ]);
    }
    cmp.write(&ctx.path("comparison.tsv"))?;
    let summary = McSummary {
        profile_source: label,
        particles: em.particles,
        events: em.events,
        event_rate: em.event_rate,
        total_time: em.total_time,
        window: em.window,
        batches: em.batches,
        left_wall: em.left_wall.clone(),
        right_wall: em.right_wall.clone(),
        left_outflux: sol.moments.left_outflux(),
        right_outflux: sol.moments.right_outflux(),
        heat_flux: sol.grid.integrate(&heat_flux(&sol)),
        tau_within_3se: fraction_within(em.tau_hat.iter().zip(&reference).map(|(e, r)| e.z_score(*r)), 3.0),
        u_within_3se: fraction_within(em.u_hat.iter().map(|e| e.z_score(0.0)), 3.0),
    };
    write_json(&ctx.path("mc_summary.json"), &ctx.hash, &summary)?;
    println!(
        "{} events; tau within 3 se in {:.1}% of bins, u in {:.1}%",
        em.events,
        100.0 * summary.tau_within_3se,
        100.0 * summary.u_within_3se
    );
    Ok(())
}

fn moments_table(hash: &str, em: &EmpiricalMoments) -> Table {
    let mut t = Table::new(
        hash,
        &["x_lo", "x_hi", "rho", "rho_se", "u", "u_se", "tau", "tau_se", "q", "q_se"],
    );
    for b in 0..em.bins() {
        let mut cells = vec![Cell::F(em.edges[b]), Cell::F(em.edges[b + 1])];
        for e in [em.rho_hat[b], em.u_hat[b], em.tau_hat[b], em.heat_flux_hat[b]] {
            let Estimate { mean, stderr } = e;
            cells.push(Cell::F(mean));
            cells.push(Cell::F(stderr));
        }
        t.row(&cells);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub walls: WallTemperatures,
    pub status: String,
    pub iterations: usize,
    /// `τ(½)/√(T₁T₂) − 1`.
    pub tau_half_deviation: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub pressure_ratio: f64,
    /// `|τ(½)/√(T₁T₂) − 1|·κ^{1/2}T₁^{1/4}`.
    pub rate_constant: f64,
    pub brackets: Vec<BoundReport>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub points: usize,
    pub succeeded: usize,
    /// `|τ(½)/√(T₁T₂) − 1|` strictly decreasing in T₁ over successful rows.
    pub strictly_decreasing: Option<bool>,
    /// Slope of `ln|τ(½)/√(T₁T₂) − 1|` against `ln T₁`.
    pub log_log_slope: Option<f64>,
    pub brackets_checked: usize,
    pub bracket_violations: usize,
}

pub fn sweep_point(walls: WallTemperatures, cfg: &RunConfig) -> SweepRow {
    let attempt = || -> Result<SweepRow, CliError> {
        let fp = find_ness(&walls, cfg)?;
        let sol = &fp.last;
        let solver = LinearBgkSolver::new(walls, sol.grid.clone(), &cfg.quadrature)?;
        let root = walls.geometric_mean();
        let dev = solver.tau_at(sol, 0.5)? / root - 1.0;
        let (rho_min, rho_max) = sol.rho.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));
        Ok(SweepRow {
            walls,
            status: "ok".into(),
            iterations: fp.iterations,
            tau_half_deviation: dev,
            rho_min,
            rho_max,
            pressure_ratio: sol.pressure / root,
            rate_constant: dev.abs() * walls.kappa.sqrt() * walls.t1.powf(0.25),
            brackets: bracket_reports(sol),
        })
    };
    attempt().unwrap_or_else(|e| SweepRow {
        walls,
        status: e.to_string(),
        iterations: 0,
        tau_half_deviation: f64::NAN,
        rho_min: f64::NAN,
        rho_max: f64::NAN,
        pressure_ratio: f64::NAN,
        rate_constant: f64::NAN,
        brackets: Vec::new(),
    })
}

pub fn summarize_sweep(rows: &[SweepRow]) -> SweepSummary {
    let mut good: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    good.sort_by(|a, b| a.walls.t1.total_cmp(&b.walls.t1));
    let devs: Vec<(f64, f64)> = good.iter().map(|r| (r.walls.t1, r.tau_half_deviation.abs())).collect();
    let enough = devs.len() >= 2;
    let brackets = good.iter().flat_map(|r| &r.brackets);
    SweepSummary {
        points: rows.len(),
        succeeded: good.len(),
        strictly_decreasing: enough.then(|| devs.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1)),
        log_log_slope: enough.then(|| log_log_slope(&devs)),
        brackets_checked: brackets.clone().filter(|b| b.status != BoundStatus::Skipped).count(),
        bracket_violations: brackets.filter(|b| b.failed()).count(),
    }
}

fn bracket_cells(b: &BoundReport) -> Vec<Cell> {
    let opt = |v: Option<f64>| Cell::F(v.unwrap_or(f64::NAN));
    vec![
        Cell::S(b.quantity.clone()),
        Cell::F(b.value),
        opt(b.lower),
        opt(b.upper),
        Cell::S(format!("{:?}", b.status).to_lowercase()),
    ]
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    if cfg.sweep.points.is_empty() {
        return Err(CliError::Config("[sweep] lists no points".into()));
    }
    let rows: Vec<SweepRow> = cfg
        .sweep
        .points
        .par_iter()
        // invalid walls surface as a failed row from the solver's own check
        .map(|p| sweep_point(WallTemperatures { t1: p.t1, t2: p.t2, kappa: p.kappa }, cfg))
        .collect();
    let summary = summarize_sweep(&rows);

    ctx.write_config()?;
    let mut table = Table::new(
        &ctx.hash,
        &["t1", "t2", "kappa", "iterations", "tau_half_deviation", "rho_min", "rho_max", "pressure_ratio", "rate_constant", "status"],
    );
    let mut brackets = Table::new(&ctx.hash, &["t1", "t2", "kappa", "quantity", "value", "lower", "upper", "status"]);
    for r in &rows {
        let w = r.walls;
        table.row(&[
            Cell::F(w.t1),
            Cell::F(w.t2),
            Cell::F(w.kappa),
            Cell::I(r.iterations as u64),
            Cell::F(r.tau_half_deviation),
            Cell::F(r.rho_min),
            Cell::F(r.rho_max),
            Cell::F(r.pressure_ratio),
            Cell::F(r.rate_constant),
            Cell::S(r.status.clone()),
        ]);
        for b in &r.brackets {
            let mut cells = vec![Cell::F(w.t1), Cell::F(w.t2), Cell::F(w.kappa)];
            cells.extend(bracket_cells(b));
            brackets.row(&cells);
        }
    }
    table.write(&ctx.path("sweep.tsv"))?;
    brackets.write(&ctx.path("sweep_brackets.tsv"))?;
    write_json(&ctx.path("sweep_summary.json"), &ctx.hash, &summary)?;
    println!(
        "{}/{} points solved; slope {:?}; {} of {} brackets violated",
        summary.succeeded, summary.points, summary.log_log_slope, summary.bracket_violations, summary.brackets_checked
    );
    if summary.succeeded == 0 {
        let first = rows.first().map(|r| r.status.clone()).unwrap_or_default();
        return Err(CliError::NonConvergence(format!("no sweep point succeeded ({first})")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ValidationSummary {
    passed: bool,
    bracket_failures: Vec<String>,
    diagnostic_failures: Vec<String>,
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let fp = find_ness(&cfg.walls, cfg)?;
    let reports = bracket_reports(&fp.last);
    let diag = run_full_diagnostics(&fp.last, cfg, Some(&fp));

    let mut table = Table::new(&ctx.hash, &["quantity", "value", "lower", "upper", "status"]);
    for b in &reports {
        table.row(&bracket_cells(b));
        println!("{:<28} {:?}", b.quantity, b.status);
    }
    for c in &diag.checks {
        println!("{:<28} {}", c.name, if c.passed { "Pass" } else { "Fail" });
    }
    let summary = ValidationSummary {
        bracket_failures: reports.iter().filter(|b| b.failed()).map(|b| b.quantity.clone()).collect(),
        diagnostic_failures: failed_names(&diag),
        passed: false,
    };
    let summary = ValidationSummary { passed: summary.bracket_failures.is_empty() && summary.diagnostic_failures.is_empty(), ..summary };
    ctx.write_config()?;
    table.write(&ctx.path("brackets.tsv"))?;
    write_json(&ctx.path("diagnostics.json"), &ctx.hash, &diag)?;
    write_json(&ctx.path("validation.json"), &ctx.hash, &summary)?;
    if summary.passed {
        Ok(())
    } else {
        let all: Vec<String> = summary.bracket_failures.iter().chain(&summary.diagnostic_failures).cloned().collect();
        Err(CliError::Validation(all.join(", ")))
    }
}
