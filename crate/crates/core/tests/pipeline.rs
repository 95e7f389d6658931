//! End-to-end use of the public API: configuration, nonlinear solve,
//! diagnostics, brackets and the particle oracle.

use bgk_ness::bounds::{bracket_reports, BoundStatus, LOWER_BOUND_THRESHOLD};
use bgk_ness::config::RunConfig;
use bgk_ness::diagnostics::run_full_diagnostics;
use bgk_ness::fixed_point::{find_ness, FixedPointReport};
use bgk_ness::kernels::WallTemperatures;
use bgk_ness::linear_bgk::LinearBgkSolver;
use bgk_ness::stochastic::{bin_temperatures, simulate};
use bgk_ness::BgkError;

fn run(t1: f64, t2: f64, kappa: f64, nodes: usize) -> (RunConfig, FixedPointReport) {
    let mut cfg = RunConfig::default();
    cfg.walls = WallTemperatures::new(t1, t2, kappa).unwrap();
    cfg.grid.nodes = nodes;
    let fp = find_ness(&cfg.walls.clone(), &cfg).unwrap();
    (cfg, fp)
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = RunConfig::default();
    cfg.walls = WallTemperatures::new(3.0, 70.0, 0.5).unwrap();
    cfg.monte_carlo.profile = Some("p.tsv".into());
    let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn invalid_config_values_are_rejected() {
    for text in [
        "[walls]\nt1 = -1.0\nt2 = 4.0\nkappa = 1.0\n",
        "[walls]\nt1 = 5.0\nt2 = 4.0\nkappa = 1.0\n",
        "[walls]\nt1 = 1.0\nt2 = 4.0\nkappa = 1.0\n[fixed_point]\ndamping = 1.5\n",
        "[walls]\nt1 = 1.0\nt2 = 4.0\nkappa = 1.0\n[grid]\nnodes = 1\n",
    ] {
        assert!(RunConfig::from_toml_str(text).is_err(), "accepted {text}");
    }
}

#[test]
fn solution_feeds_diagnostics_and_brackets() {
    let (cfg, fp) = run(100.0, 400.0, 1.0, 32);
    let diag = run_full_diagnostics(&fp.last, &cfg, Some(&fp));
    assert!(diag.passed, "{:?}", diag.failures());
    assert!(diag.tau_min >= 100.0 && diag.tau_max <= 400.0);
    let reports = bracket_reports(&fp.last);
    assert_eq!(reports.len(), 7);
    assert!(reports.iter().all(|r| r.value.is_finite() && r.walls == cfg.walls));
}

#[test]
fn low_temperature_gates_hypothesis_bound() {
    // κ²T₁ below the threshold: the collision-probability lower bound does
    // not apply and must be skipped rather than failed.
    let t1 = 0.5 * LOWER_BOUND_THRESHOLD;
    let mut cfg = RunConfig::default();
    cfg.walls = WallTemperatures::new(t1, 40.0, 1.0).unwrap();
    cfg.grid.nodes = 16;
    cfg.fixed_point.force = true;
    let fp = find_ness(&cfg.walls.clone(), &cfg).unwrap();
    let reports = bracket_reports(&fp.last);
    let left = reports.iter().find(|r| r.quantity == "collision_probability_left").unwrap();
    assert_eq!(left.status, BoundStatus::Skipped);
}

#[test]
fn admissibility_is_enforced_unless_forced() {
    let mut cfg = RunConfig::default();
    cfg.walls = WallTemperatures::new(2.0, 2.5, 1.0).unwrap();
    cfg.grid.nodes = 16;
    assert!(matches!(find_ness(&cfg.walls.clone(), &cfg), Err(BgkError::Condition(_))));
    cfg.fixed_point.force = true;
    let fp = find_ness(&cfg.walls.clone(), &cfg).unwrap();
    assert!(fp.converged);
}

#[test]
fn deviation_from_geometric_mean_shrinks_with_temperature() {
    let dev = |t1: f64| {
        let (cfg, fp) = run(t1, 4.0 * t1, 1.0, 32);
        let solver = LinearBgkSolver::new(cfg.walls, fp.last.grid.clone(), &cfg.quadrature).unwrap();
        (solver.tau_at(&fp.last, 0.5).unwrap() / cfg.walls.geometric_mean() - 1.0).abs()
    };
    let (a, b) = (dev(100.0), dev(1000.0));
    assert!(b < a, "{a} -> {b}");
}

#[test]
fn particle_oracle_agrees_on_short_run() {
    let (mut cfg, fp) = run(100.0, 400.0, 1.0, 32);
    cfg.monte_carlo.particles = 2000;
    cfg.monte_carlo.t_end = 200.0;
    cfg.monte_carlo.bins = 8;
    cfg.monte_carlo.batches = 16;
    let sol = &fp.last;
    let em = simulate(&cfg.walls, &sol.profile, &cfg.monte_carlo).unwrap();
    let solver = LinearBgkSolver::new(cfg.walls, sol.grid.clone(), &cfg.quadrature).unwrap();
    let reference = bin_temperatures(&em.edges, sol.pressure, |x| solver.density_at(sol, x)).unwrap();
    for (est, t) in em.tau_hat.iter().zip(&reference) {
        assert!(est.z_score(*t).abs() < 4.0, "{est:?} vs {t}");
    }
    let l = sol.moments.left_outflux();
    assert!(em.left_wall.hit_rate.z_score(l).abs() < 4.0, "{:?} vs {l}", em.left_wall.hit_rate);
}

#[test]
fn momentum_is_pure_discretisation_error() {
    // Cold walls: at 64 nodes max|u| sits above 1e-6, but it halves twice
    // per grid doubling, so zero is the limit.
    let u = |n: usize| run(2.0, 20.0, 1.0, n).1.last.max_abs_u();
    let (a, b, c) = (u(32), u(64), u(128));
    assert!((a / b).log2() >= 1.5 && (b / c).log2() >= 1.5, "{a:e} {b:e} {c:e}");
}
