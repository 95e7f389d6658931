use super::*;
use crate::kernels::wall_maxwellian;
use crate::quadrature::integrate;
use approx::assert_relative_eq;

fn solver(t1: f64, t2: f64, kappa: f64, n: usize) -> LinearBgkSolver {
    let walls = WallTemperatures::new(t1, t2, kappa).unwrap();
    LinearBgkSolver::new(walls, SpatialGrid::graded(n, 2.0).unwrap(), &QuadratureSettings::default()).unwrap()
}

fn constant_state(s: &LinearBgkSolver, t: f64) -> SteadySolution {
    let prof = TemperatureProfile::constant(s.grid().clone(), t).unwrap();
    s.steady_state(&prof).unwrap()
}

/// ∫ g(v) dv over the real line for a function with Gaussian tails, split
/// at the origin where `f` jumps.
fn velocity_integral(g: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let tol = Tolerance::new(1e-13, 1e-11);
    let half = |sign: f64| {
        // v = sign·scale·u/(1−u) maps (0, 1) onto the half line.
        integrate(
            |u| {
                let v = sign * scale * u / (1.0 - u);
                let jac = scale / ((1.0 - u) * (1.0 - u));
                if u >= 1.0 || v.abs() < 1e-280 {
                    0.0
                } else {
                    g(v) * jac
                }
            },
            0.0,
            1.0,
            8,
            tol,
        )
        .unwrap()
    };
    half(1.0) + half(-1.0)
}

#[test]
fn operator_entries_are_nonnegative() {
    let s = solver(100.0, 400.0, 1.0, 24);
    let prof = TemperatureProfile::new(
        s.grid().clone(),
        s.grid().nodes().iter().map(|x| 100.0 + 300.0 * x).collect(),
    )
    .unwrap();
    let op = s.assemble(&prof).unwrap();
    assert!(op.matrix.iter().all(|v| *v >= 0.0 && v.is_finite()));
    assert!(op.escape_left.iter().chain(&op.escape_right).all(|v| *v >= 0.0));
}

#[test]
fn assembly_rejects_profile_outside_walls() {
    let s = solver(100.0, 400.0, 1.0, 8);
    let prof = TemperatureProfile::constant(s.grid().clone(), 50.0).unwrap();
    assert!(matches!(s.assemble(&prof), Err(BgkError::Domain(_))));
}

#[test]
fn equilibrium_is_reproduced() {
    let s = solver(1.0, 1.0, 1.0, 64);
    let sol = constant_state(&s, 1.0);
    assert!((sol.perron_root - 1.0).abs() < 1e-10);
    for i in 0..64 {
        assert!((sol.rho[i] - 1.0).abs() < 1e-6, "rho[{i}] = {}", sol.rho[i]);
        assert!((sol.tau[i] - 1.0).abs() < 1e-6);
        assert!(sol.u[i].abs() < 1e-6);
        assert!(sol.third_moment[i].abs() < 1e-6);
    }
    assert!((sol.pressure - 1.0).abs() < 1e-6);
    assert!(sol.residual < 1e-10);
    assert_relative_eq!(sol.mass(), 1.0, epsilon = 1e-12);
}

#[test]
fn equilibrium_is_exact_at_high_temperature() {
    let s = solver(250.0, 250.0, 0.7, 32);
    let sol = constant_state(&s, 250.0);
    assert!(sol.rho.iter().all(|r| (r - 1.0).abs() < 1e-6));
    assert_relative_eq!(sol.pressure, 250.0, max_relative = 1e-8);
}

#[test]
fn solve_residual_is_small() {
    let s = solver(50.0, 200.0, 1.0, 48);
    let sol = constant_state(&s, 100.0);
    assert!(sol.residual < 1e-10, "residual {}", sol.residual);
    assert!(sol.spectral_gap > 0.1);
    assert!(sol.rho.iter().all(|r| *r > 0.0));
}

#[test]
fn outfluxes_are_nonnegative_and_closure_is_consistent() {
    let s = solver(100.0, 400.0, 1.0, 32);
    let sol = constant_state(&s, 200.0);
    let m = sol.moments;
    assert!(m.c1 > 0.0 && m.c1 < 1.0 && m.c2 > 0.0 && m.c2 < 1.0);
    assert!(m.denominator > 0.0);
    assert!(m.left_outflux() >= 0.0 && m.right_outflux() >= 0.0);
    assert_relative_eq!(m.left_outflux(), m.c_minus + m.c2 * m.right_outflux(), max_relative = 1e-12);
    assert_relative_eq!(m.right_outflux(), m.c_plus + m.c1 * m.left_outflux(), max_relative = 1e-12);
}

#[test]
fn tau_is_pressure_over_density() {
    let s = solver(100.0, 400.0, 1.0, 32);
    let sol = constant_state(&s, 200.0);
    for i in 0..32 {
        assert_relative_eq!(sol.tau[i], sol.pressure / sol.rho[i] - sol.u[i] * sol.u[i], max_relative = 1e-14);
    }
}

#[test]
fn ness_momentum_and_pressure_are_flat() {
    let s = solver(100.0, 400.0, 1.0, 64);
    let sol = constant_state(&s, 200.0);
    assert!(sol.max_abs_u() < 1e-6 * sol.pressure.sqrt());
    assert!(sol.pressure_variation() < 1e-4 * sol.pressure);
}

#[test]
fn operator_refinement_order_on_smooth_density() {
    let rho = |x: f64| 1.0 + 0.3 * (std::f64::consts::PI * x).cos();
    let tprof = |x: f64| 100.0 + 300.0 * x * x;
    let probes = [0.13, 0.5, 0.81];
    let eval = |n: usize| -> Vec<f64> {
        let s = solver(100.0, 400.0, 1.0, n);
        let nodes = s.grid().nodes().to_vec();
        let prof = TemperatureProfile::new(s.grid().clone(), nodes.iter().map(|&x| tprof(x)).collect()).unwrap();
        let op = s.assemble(&prof).unwrap();
        let r: Vec<f64> = nodes.iter().map(|&x| rho(x)).collect();
        probes.iter().map(|&x| s.apply_at(&op, &r, x).unwrap()).collect()
    };
    let (a, b, c) = (eval(16), eval(32), eval(64));
    for k in 0..probes.len() {
        let e1 = (a[k] - b[k]).abs();
        let e2 = (b[k] - c[k]).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 1.5, "order {order} at x = {}", probes[k]);
    }
}

#[test]
fn reconstructed_f_integrates_to_density() {
    let s = solver(100.0, 400.0, 1.0, 32);
    let sol = constant_state(&s, 200.0);
    let scale = 200f64.sqrt();
    for &x in &[0.07, 0.29, 0.5, 0.66, 0.93] {
        let rho = s.density_at(&sol, x).unwrap();
        let mass = velocity_integral(|v| s.reconstruct_f(&sol, x, v).unwrap(), scale);
        assert!((mass - rho).abs() < 1e-6 * rho, "x={x}: {mass} vs {rho}");
        let mom = velocity_integral(|v| v * s.reconstruct_f(&sol, x, v).unwrap(), scale);
        assert!(mom.abs() < 1e-6 * scale, "x={x}: momentum {mom}");
    }
}

#[test]
fn reconstructed_f_matches_wall_law_at_left_wall() {
    let s = solver(100.0, 400.0, 1.0, 32);
    let sol = constant_state(&s, 200.0);
    let lo = sol.moments.left_outflux();
    for &v in &[0.5, 3.0, 10.0, 25.0, 60.0] {
        let ratio = s.reconstruct_f(&sol, 0.0, v).unwrap() / wall_maxwellian(100.0, v).unwrap();
        assert!((ratio - lo).abs() < 1e-6 * lo, "v={v}: {ratio} vs {lo}");
    }
}

#[test]
fn outflux_from_reconstruction_matches_closure() {
    let s = solver(100.0, 400.0, 1.0, 32);
    let sol = constant_state(&s, 200.0);
    let scale = 200f64.sqrt();
    let left = velocity_integral(|v| if v < 0.0 { -v * s.reconstruct_f(&sol, 0.0, v).unwrap() } else { 0.0 }, scale);
    let right = velocity_integral(|v| if v > 0.0 { v * s.reconstruct_f(&sol, 1.0, v).unwrap() } else { 0.0 }, scale);
    assert!((left - sol.moments.left_outflux()).abs() < 1e-6 * left);
    assert!((right - sol.moments.right_outflux()).abs() < 1e-6 * right);
    // net wall fluxes vanish
    let net0 = velocity_integral(|v| v * s.reconstruct_f(&sol, 0.0, v).unwrap(), scale);
    assert!(net0.abs() < 1e-6 * scale);
}

#[test]
fn grazing_and_domain_errors() {
    let s = solver(1.0, 1.0, 1.0, 8);
    let sol = constant_state(&s, 1.0);
    assert!(matches!(s.reconstruct_f(&sol, 0.5, 0.0), Err(BgkError::Grazing)));
    assert!(matches!(s.reconstruct_f(&sol, 0.5, 1e-310), Err(BgkError::Grazing)));
    assert!(matches!(s.reconstruct_f(&sol, 1.5, 1.0), Err(BgkError::Domain(_))));
    assert!(matches!(s.local_moments(&sol, -0.1), Err(BgkError::Domain(_))));
}

#[test]
fn weak_form_equilibrium_and_refinement() {
    let s = solver(1.0, 1.0, 1.0, 16);
    let sol = constant_state(&s, 1.0);
    let res = s.weak_form_residuals(&sol).unwrap();
    assert!(res.len() >= 12);
    assert!(s.weak_form_residual(&sol).unwrap() < 1e-8);

    let r16 = {
        let s = solver(50.0, 200.0, 1.0, 16);
        s.weak_form_residual(&constant_state(&s, 100.0)).unwrap()
    };
    let r32 = {
        let s = solver(50.0, 200.0, 1.0, 32);
        s.weak_form_residual(&constant_state(&s, 100.0)).unwrap()
    };
    assert!(r32 < 1e-4);
    assert!((r16 / r32).log2() >= 1.5, "{r16} -> {r32}");
}

#[test]
fn free_assembly_matches_solver() {
    let walls = WallTemperatures::new(2.0, 3.0, 1.0).unwrap();
    let grid = SpatialGrid::graded(8, 2.0).unwrap();
    let prof = TemperatureProfile::constant(grid.clone(), 2.5).unwrap();
    let a = assemble_density_operator(&prof, &walls).unwrap();
    let b = LinearBgkSolver::new(walls, grid, &QuadratureSettings::default()).unwrap().assemble(&prof).unwrap();
    assert_eq!(a.matrix, b.matrix);
}
