//! Adaptive Gauss–Kronrod integration and fixed Gauss–Legendre rules.
//!
//! The adaptive integrator works on vector-valued integrands so that several
//! moments sharing one geometry are integrated from the same function
//! evaluations. Each component must meet its own tolerance.

use std::collections::BinaryHeap;

use crate::error::{BgkError, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525485170,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Absolute and relative error targets for one adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const M: usize> {
    lo: f64,
    hi: f64,
    value: [f64; M],
    error: [f64; M],
    resabs: [f64; M],
    // Largest error-to-tolerance ratio, used as the heap priority.
    priority: f64,
}

impl<const M: usize> PartialEq for Panel<M> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const M: usize> Eq for Panel<M> {}
impl<const M: usize> PartialOrd for Panel<M> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Panel<M> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn gk21<const M: usize, F>(f: &mut F, lo: f64, hi: f64) -> ([f64; M], [f64; M], [f64; M])
where
    F: FnMut(f64) -> [f64; M],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = [0.0; M];
    let mut gauss = [0.0; M];
    let mut abs_sum = [0.0; M];
    for k in 0..M {
        kronrod[k] = WGK[10] * fc[k];
        abs_sum[k] = WGK[10] * fc[k].abs();
    }
    let mut samples = [[0.0; M]; 21];
    samples[20] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        samples[2 * j] = f1;
        samples[2 * j + 1] = f2;
        for k in 0..M {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            abs_sum[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; M];
    for k in 0..M {
        let mean = 0.5 * kronrod[k];
        let mut asc = WGK[10] * (fc[k] - mean).abs();
        for j in 0..10 {
            asc += WGK[j] * ((samples[2 * j][k] - mean).abs() + (samples[2 * j + 1][k] - mean).abs());
        }
        let asc = asc * half.abs();
        let raw = ((kronrod[k] - gauss[k]) * half).abs();
        let mut e = raw;
        if asc != 0.0 && raw != 0.0 {
            e = asc * (200.0 * raw / asc).powf(1.5).min(1.0);
        }
        err[k] = e;
        abs_sum[k] *= half.abs();
        kronrod[k] *= half;
    }
    (kronrod, err, abs_sum)
}

/// Integrates a vector-valued `f` over `[lo, hi]`, starting from `pieces`
/// equal panels and bisecting the worst panel until every component meets
/// `max(tol.abs, tol.rel * |I_k|)`.
pub fn integrate_vec<const M: usize, F>(
    mut f: F,
    lo: f64,
    hi: f64,
    pieces: usize,
    tol: Tolerance,
) -> Result<[f64; M]>
where
    F: FnMut(f64) -> [f64; M],
{
    const MAX_PANELS: usize = 2000;
    if lo == hi {
        return Ok([0.0; M]);
    }
    let pieces = pieces.max(1);
    let mut heap = BinaryHeap::with_capacity(4 * pieces);
    let mut total = [0.0; M];
    let mut total_err = [0.0; M];
    // Σ∫|f| over panels; errors below 50·eps of it are round-off.
    let mut total_abs = [0.0; M];
    let width = (hi - lo) / pieces as f64;
    for p in 0..pieces {
        let a = lo + width * p as f64;
        let b = if p + 1 == pieces { hi } else { a + width };
        let (v, e, r) = gk21(&mut f, a, b);
        for k in 0..M {
            total[k] += v[k];
            total_err[k] += e[k];
            total_abs[k] += r[k];
        }
        heap.push(Panel { lo: a, hi: b, value: v, error: e, resabs: r, priority: 0.0 });
    }
    let target = |k: usize, total: &[f64; M], total_abs: &[f64; M]| {
        tol.abs.max(tol.rel * total[k].abs()).max(50.0 * f64::EPSILON * total_abs[k])
    };
    let priority = |p: &Panel<M>, total: &[f64; M], total_abs: &[f64; M]| -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..M {
            let target = target(k, total, total_abs);
            worst = worst.max(p.error[k] / target);
        }
        worst
    };
    let mut panels: Vec<Panel<M>> = heap.into_vec();
    for p in panels.iter_mut() {
        p.priority = priority(p, &total, &total_abs);
    }
    let mut heap: BinaryHeap<Panel<M>> = panels.into_iter().collect();

    let converged = |total: &[f64; M], err: &[f64; M], total_abs: &[f64; M]| {
        (0..M).all(|k| err[k] <= target(k, total, total_abs))
    };
    let mut count = heap.len();
    while !converged(&total, &total_err, &total_abs) {
        if count >= MAX_PANELS {
            let worst = (0..M)
                .map(|k| total_err[k])
                .fold(0.0_f64, f64::max);
            return Err(BgkError::Quadrature { lo, hi, error: worst, subdivisions: count });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel cannot be split further in floating point; accept what we have.
            heap.push(Panel { priority: 0.0, ..worst });
            if heap.iter().all(|p| p.priority == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1, r1) = gk21(&mut f, worst.lo, mid);
        let (v2, e2, r2) = gk21(&mut f, mid, worst.hi);
        for k in 0..M {
            total[k] += v1[k] + v2[k] - worst.value[k];
            total_err[k] += e1[k] + e2[k] - worst.error[k];
            total_abs[k] += r1[k] + r2[k] - worst.resabs[k];
        }
        let mut left = Panel { lo: worst.lo, hi: mid, value: v1, error: e1, resabs: r1, priority: 0.0 };
        let mut right = Panel { lo: mid, hi: worst.hi, value: v2, error: e2, resabs: r2, priority: 0.0 };
        left.priority = priority(&left, &total, &total_abs);
        right.priority = priority(&right, &total, &total_abs);
        heap.push(left);
        heap.push(right);
        count += 1;
    }
    // Re-sum from the panels to shed accumulated update round-off.
    let mut sum = [0.0; M];
    for p in heap.iter() {
        for k in 0..M {
            sum[k] += p.value[k];
        }
    }
    Ok(sum)
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, pieces: usize, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x| [f(x)], lo, hi, pieces, tol).map(|v| v[0])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
