//! Direct simulation of the jump process behind the linear BGK equation.
//!
//! A particle flies ballistically, redraws its velocity from the local
//! Maxwellian `M_{T(x)}` when an exponential clock of rate `1/κ` rings, and is
//! re-emitted from the flux-weighted wall law when it reaches `x = 0` or
//! `x = 1`. Time averages of many independent particles estimate the steady
//! state of the linear problem for the frozen profile `T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MonteCarloSettings, RunConfig};
use crate::error::{BgkError, Result};
use crate::fixed_point::find_ness;
use crate::kernels::{maxwellian, sample_wall_velocity, WallTemperatures};
use crate::linear_bgk::{SpatialGrid, TemperatureProfile};

/// Velocities below this magnitude are on the grazing set.
pub const GRAZING_SPEED: f64 = 1e-300;

/// Particles per work unit; fixed so that results do not depend on the
/// thread count.
const CHUNK: usize = 64;

/// Free-flight time from `x` to the wall ahead; infinite on the grazing set.
pub fn hitting_time(x: f64, v: f64) -> f64 {
    if v.abs() < GRAZING_SPEED {
        f64::INFINITY
    } else if v > 0.0 {
        ((1.0 - x) / v).max(0.0)
    } else {
        (x / -v).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// Time left until the collision clock rings.
    pub clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Collision,
    LeftWall,
    RightWall,
}

impl ParticleState {
    /// Time of the next event if nothing interrupts the flight.
    pub fn next_event_time(&self) -> f64 {
        self.t + self.clock.min(hitting_time(self.x, self.v))
    }

    /// Ballistic position at time `t ≥ self.t`, before the next event.
    pub fn position_at(&self, t: f64) -> f64 {
        (self.x + self.v * (t - self.t)).clamp(0.0, 1.0)
    }
}

fn draw_clock<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    loop {
        let e: f64 = Exp1.sample(rng);
        if e > 0.0 {
            return kappa * e;
        }
    }
}

/// Initial state: uniform position, local Maxwellian velocity.
pub fn initial_state<R: Rng + ?Sized>(profile: &TemperatureProfile, walls: &WallTemperatures, rng: &mut R) -> ParticleState {
    let x: f64 = rng.random();
    let g: f64 = StandardNormal.sample(rng);
    ParticleState { t: 0.0, x, v: g * profile.at(x).sqrt(), clock: draw_clock(walls.kappa, rng) }
}

/// Advances to the next event and applies its jump. A fresh clock is drawn
/// after every event.
pub fn step<R: Rng + ?Sized>(
    state: &ParticleState,
    profile: &TemperatureProfile,
    walls: &WallTemperatures,
    rng: &mut R,
) -> (ParticleState, Event) {
    let zeta = hitting_time(state.x, state.v);
    let (dt, x, v, event) = if state.clock < zeta {
        let x = (state.x + state.v * state.clock).clamp(0.0, 1.0);
        let g: f64 = StandardNormal.sample(rng);
        (state.clock, x, g * profile.at(x).sqrt(), Event::Collision)
    } else if state.v > 0.0 {
        (zeta, 1.0, -sample_wall_velocity(walls.t2, rng), Event::RightWall)
    } else {
        (zeta, 0.0, sample_wall_velocity(walls.t1, rng), Event::LeftWall)
    };
    let clock = draw_clock(walls.kappa, rng);
    (ParticleState { t: state.t + dt, x, v, clock }, event)
}

/// Where the temperature seen by the collisions comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileMode {
    Frozen(TemperatureProfile),
    /// Solve the nonlinear steady state first and freeze its profile.
    SelfConsistent,
}

impl ProfileMode {
    pub fn resolve(self, walls: &WallTemperatures, config: &RunConfig) -> Result<TemperatureProfile> {
        match self {
            ProfileMode::Frozen(p) => Ok(p),
            ProfileMode::SelfConsistent => Ok(find_ness(walls, config)?.profile().clone()),
        }
    }
}

/// Mean and batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_batches(point: f64, batches: &[f64]) -> Self {
        let b = batches.len() as f64;
        let m = batches.iter().sum::<f64>() / b;
        let var = batches.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1.0);
        Estimate { mean: point, stderr: (var / b).sqrt() }
    }

    /// `(mean − reference)/stderr`; infinite when the error is zero but the
    /// difference is not.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallStatistics {
    /// Hits per particle per unit time; estimates the wall outflux.
    pub hit_rate: Estimate,
    /// Net flux of `v²` in the `+x` direction through the wall.
    pub energy_flux: Estimate,
    pub hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub edges: Vec<f64>,
    pub rho_hat: Vec<Estimate>,
    pub u_hat: Vec<Estimate>,
    pub tau_hat: Vec<Estimate>,
    /// Central third velocity moment per bin.
    pub heat_flux_hat: Vec<Estimate>,
    pub left_wall: WallStatistics,
    pub right_wall: WallStatistics,
    /// Events per particle per unit time over the whole run.
    pub event_rate: f64,
    pub events: u64,
    pub particles: usize,
    /// Particle-time accumulated after burn-in.
    pub total_time: f64,
    pub window: (f64, f64),
    pub batches: usize,
}

impl EmpiricalMoments {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins() as f64
    }
}

/// Raw sums: per (batch, bin) the time and `v, v², v³` time integrals, per
/// batch and wall the hit count and `v²` flux.
#[derive(Debug, Clone)]
struct Tally {
    bins: usize,
    cells: Vec<[f64; 4]>,
    hits: Vec<[u64; 2]>,
    energy: Vec<[f64; 2]>,
    events: u64,
}

impl Tally {
    fn new(batches: usize, bins: usize) -> Self {
        Tally {
            bins,
            cells: vec![[0.0; 4]; batches * bins],
            hits: vec![[0; 2]; batches],
            energy: vec![[0.0; 2]; batches],
            events: 0,
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.energy.iter_mut().zip(&other.energy) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.events += other.events;
        self
    }

    /// Adds a flight of duration `dt` from `x0` at velocity `v` to `batch`.
    fn flight(&mut self, batch: usize, x0: f64, x1: f64, v: f64, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let nb = self.bins;
        let row = &mut self.cells[batch * nb..(batch + 1) * nb];
        let (v2, v3) = (v * v, v * v * v);
        let mut add = |b: usize, time: f64| {
            let c = &mut row[b];
            c[0] += time;
            c[1] += v * time;
            c[2] += v2 * time;
            c[3] += v3 * time;
        };
        let bin_of = |x: f64| ((x * nb as f64) as usize).min(nb - 1);
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let len = hi - lo;
        let (first, last) = (bin_of(lo), bin_of(hi));
        if len <= 0.0 || first == last {
            add(first, dt);
            return;
        }
        // time in a bin is proportional to the length of path inside it
        let per_length = dt / len;
        let w = 1.0 / nb as f64;
        add(first, ((first + 1) as f64 * w - lo) * per_length);
        for b in first + 1..last {
            add(b, w * per_length);
        }
        add(last, (hi - last as f64 * w) * per_length);
    }
}

struct Window {
    start: f64,
    end: f64,
    batches: usize,
}

impl Window {
    fn batch_length(&self) -> f64 {
        (self.end - self.start) / self.batches as f64
    }

    fn batch_of(&self, t: f64) -> Option<usize> {
        if t < self.start || t > self.end {
            return None;
        }
        Some((((t - self.start) / self.batch_length()) as usize).min(self.batches - 1))
    }

    /// Splits `[ta, tb]` into per-batch pieces inside the window.
    fn record(&self, tally: &mut Tally, ta: f64, tb: f64, xa: f64, v: f64) {
        let (s, e) = (ta.max(self.start), tb.min(self.end));
        if e <= s {
            return;
        }
        let bl = self.batch_length();
        let mut t = s;
        while t < e {
            let k = (((t - self.start) / bl) as usize).min(self.batches - 1);
            let bend = if k + 1 == self.batches { self.end } else { self.start + (k + 1) as f64 * bl };
            let stop = bend.min(e);
            let x0 = (xa + v * (t - ta)).clamp(0.0, 1.0);
            let x1 = (xa + v * (stop - ta)).clamp(0.0, 1.0);
            tally.flight(k, x0, x1, v, stop - t);
            if stop <= t {
                break;
            }
            t = stop;
        }
    }
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_particle(
    index: usize,
    profile: &TemperatureProfile,
    walls: &WallTemperatures,
    settings: &MonteCarloSettings,
    window: &Window,
    tally: &mut Tally,
) {
    let mut rng = particle_rng(settings.seed, index);
    let mut s = initial_state(profile, walls, &mut rng);
    while s.t < settings.t_end {
        let (next, event) = step(&s, profile, walls, &mut rng);
        window.record(tally, s.t, next.t.min(settings.t_end), s.x, s.v);
        if next.t <= settings.t_end {
            tally.events += 1;
            if let Some(k) = window.batch_of(next.t) {
                match event {
                    Event::LeftWall => {
                        tally.hits[k][0] += 1;
                        tally.energy[k][0] += next.v * next.v - s.v * s.v;
                    }
                    Event::RightWall => {
                        tally.hits[k][1] += 1;
                        tally.energy[k][1] += s.v * s.v - next.v * next.v;
                    }
                    Event::Collision => {}
                }
            }
        }
        s = next;
    }
}

/// Time-averaged moments of `settings.particles` independent particles in
/// the frozen profile. Deterministic for a given seed and particle count.
pub fn simulate(walls: &WallTemperatures, profile: &TemperatureProfile, settings: &MonteCarloSettings) -> Result<EmpiricalMoments> {
    walls.validate()?;
    if !profile.within(walls.t1, walls.t2, 1e-9 * walls.t2) {
        return Err(BgkError::Domain("frozen profile leaves [T1, T2]".into()));
    }
    if settings.particles == 0 || settings.bins == 0 || settings.batches < 2 {
        return Err(BgkError::Domain("simulation needs particles, bins and at least two batches".into()));
    }
    if !(settings.t_end > 0.0) || !(0.0..1.0).contains(&settings.burn_in_fraction) {
        return Err(BgkError::Domain("simulation needs t_end > 0 and burn-in fraction in [0, 1)".into()));
    }
    let window = Window {
        start: settings.burn_in_fraction * settings.t_end,
        end: settings.t_end,
        batches: settings.batches,
    };
    let n = settings.particles;
    let chunks: Vec<usize> = (0..n.div_ceil(CHUNK)).collect();
    let partial: Vec<Tally> = chunks
        .par_iter()
        .map(|&c| {
            let mut tally = Tally::new(settings.batches, settings.bins);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                run_particle(i, profile, walls, settings, &window, &mut tally);
            }
            tally
        })
        .collect();
    let total = partial.iter().fold(Tally::new(settings.batches, settings.bins), |acc, t| acc.merge(t));
    Ok(summarize(&total, settings, &window))
}

fn summarize(tally: &Tally, settings: &MonteCarloSettings, window: &Window) -> EmpiricalMoments {
    let nb = settings.bins;
    let nk = settings.batches;
    let np = settings.particles as f64;
    let bw = 1.0 / nb as f64;
    let bl = window.batch_length();
    let per_batch = |k: usize, b: usize| -> [f64; 4] {
        let c = tally.cells[k * nb + b];
        let norm = np * bl * bw;
        [c[0] / norm, c[1] / norm, c[2] / norm, c[3] / norm]
    };
    let hydro = |m: [f64; 4]| -> [f64; 4] {
        let rho = m[0];
        if rho <= 0.0 {
            return [0.0, 0.0, 0.0, 0.0];
        }
        let u = m[1] / rho;
        let tau = m[2] / rho - u * u;
        let q = m[3] - 3.0 * u * m[2] + 2.0 * u * u * u * rho;
        [rho, u, tau, q]
    };
    let mut out: [Vec<Estimate>; 4] = Default::default();
    for b in 0..nb {
        let mut totals = [0.0; 4];
        let mut batches: [Vec<f64>; 4] = Default::default();
        for k in 0..nk {
            let m = per_batch(k, b);
            for q in 0..4 {
                totals[q] += m[q] / nk as f64;
            }
            let h = hydro(m);
            for q in 0..4 {
                batches[q].push(h[q]);
            }
        }
        let point = hydro(totals);
        for q in 0..4 {
            out[q].push(Estimate::from_batches(point[q], &batches[q]));
        }
    }
    let wall = |side: usize| {
        let rates: Vec<f64> = (0..nk).map(|k| tally.hits[k][side] as f64 / (np * bl)).collect();
        let flux: Vec<f64> = (0..nk).map(|k| tally.energy[k][side] / (np * bl)).collect();
        let hits: u64 = (0..nk).map(|k| tally.hits[k][side]).sum();
        WallStatistics {
            hit_rate: Estimate::from_batches(rates.iter().sum::<f64>() / nk as f64, &rates),
            energy_flux: Estimate::from_batches(flux.iter().sum::<f64>() / nk as f64, &flux),
            hits,
        }
    };
    let [rho_hat, u_hat, tau_hat, heat_flux_hat] = out;
    EmpiricalMoments {
        edges: (0..=nb).map(|b| b as f64 * bw).collect(),
        rho_hat,
        u_hat,
        tau_hat,
        heat_flux_hat,
        left_wall: wall(0),
        right_wall: wall(1),
        event_rate: tally.events as f64 / (np * settings.t_end),
        events: tally.events,
        particles: settings.particles,
        total_time: np * (window.end - window.start),
        window: (window.start, window.end),
        batches: nk,
    }
}

/// Minorization constant of the time-`2ε` transition kernel:
///
/// ```text
/// β = α e^{−2ε} min{ (αε/2)·M_{T₁}(2/ε), e^{−1/(2T₁ε²)}/T₁, e^{−1/(2T₂ε²)}/T₂ },  α = √(T₁/T₂)
/// ```
///
/// The transition density from any starting point is at least `β` on
/// `{(x, v) : x − 2εv ∈ (ε, 1 − ε)}`. The bound is derived for unit Knudsen
/// number and is evaluated as is for other `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoeblinConstant {
    pub epsilon: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Waiting time `2ε` of the minorized kernel.
    pub t_star: f64,
    /// The three candidates inside the minimum, in displayed order.
    pub terms: [f64; 3],
}

impl DoeblinConstant {
    /// Whether `(x, v)` lies in the minorizing set.
    pub fn contains(&self, x: f64, v: f64) -> bool {
        let w = x - self.t_star * v;
        (0.0..=1.0).contains(&x) && w > self.epsilon && w < 1.0 - self.epsilon
    }

    /// Lebesgue measure of the minorizing set in `(x, v)`.
    pub fn set_area(&self) -> f64 {
        (1.0 - 2.0 * self.epsilon) / self.t_star
    }
}

pub fn doeblin_beta(epsilon: f64, walls: &WallTemperatures) -> Result<DoeblinConstant> {
    walls.validate()?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(BgkError::Domain(format!("epsilon must lie in (0, 1/2) (got {epsilon})")));
    }
    let WallTemperatures { t1, t2, .. } = *walls;
    let alpha = (t1 / t2).sqrt();
    let e2 = epsilon * epsilon;
    let terms = [
        0.5 * alpha * epsilon * maxwellian(t1, 2.0 / epsilon)?,
        (-0.5 / (t1 * e2)).exp() / t1,
        (-0.5 / (t2 * e2)).exp() / t2,
    ];
    let m = terms.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DoeblinConstant { epsilon, beta: alpha * (-2.0 * epsilon).exp() * m, alpha, t_star: 2.0 * epsilon, terms })
}

/// `β(ε)` on an even grid of `points` values in `(0, 1/2)`, plus the index of
/// the maximum.
pub fn doeblin_scan(walls: &WallTemperatures, points: usize) -> Result<(Vec<DoeblinConstant>, usize)> {
    if points == 0 {
        return Err(BgkError::Domain("empty epsilon grid".into()));
    }
    let scan: Vec<DoeblinConstant> =
        (1..=points).map(|k| doeblin_beta(0.5 * k as f64 / (points + 1) as f64, walls)).collect::<Result<_>>()?;
    let best = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.beta.total_cmp(&b.1.beta))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((scan, best))
}

/// Cell of the minorizing set, in coordinates `(x, w = x − 2εv)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorizationCell {
    pub x: (f64, f64),
    pub w: (f64, f64),
    /// Measure of the cell in `(x, v)`.
    pub area: f64,
    pub probability: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorizationRun {
    pub start: (f64, f64),
    pub trajectories: usize,
    pub cells: Vec<MinorizationCell>,
    /// Fraction of cells whose probability reaches `β·area`.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorizationCheck {
    pub constant: DoeblinConstant,
    pub runs: Vec<MinorizationRun>,
    pub required_coverage: f64,
    pub passed: bool,
}

/// Runs `trajectories` copies of the process from each start point for time
/// `2ε` and compares the occupation of an `nx × nw` partition of the
/// minorizing set with `β` times the cell measure.
#[allow(clippy::too_many_arguments)]
pub fn minorization_check(
    walls: &WallTemperatures,
    profile: &TemperatureProfile,
    epsilon: f64,
    starts: &[(f64, f64)],
    trajectories: usize,
    partition: (usize, usize),
    seed: u64,
    required_coverage: f64,
) -> Result<MinorizationCheck> {
    let constant = doeblin_beta(epsilon, walls)?;
    let (nx, nw) = partition;
    if nx == 0 || nw == 0 || trajectories == 0 {
        return Err(BgkError::Domain("minorization check needs cells and trajectories".into()));
    }
    let (w_lo, w_hi) = (epsilon, 1.0 - epsilon);
    let dw = (w_hi - w_lo) / nw as f64;
    let dx = 1.0 / nx as f64;
    let area = dx * dw / constant.t_star;
    let mut runs = Vec::with_capacity(starts.len());
    for (si, &(x0, v0)) in starts.iter().enumerate() {
        if !(0.0..=1.0).contains(&x0) || !v0.is_finite() {
            return Err(BgkError::Domain(format!("start point ({x0}, {v0}) is outside phase space")));
        }
        let stream_base = (si * trajectories) as u64;
        let counts: Vec<Vec<u64>> = (0..trajectories.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut counts = vec![0u64; nx * nw];
                for i in c * CHUNK..((c + 1) * CHUNK).min(trajectories) {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream_base + i as u64);
                    let mut s = ParticleState { t: 0.0, x: x0, v: v0, clock: draw_clock(walls.kappa, &mut rng) };
                    while s.next_event_time() <= constant.t_star {
                        s = step(&s, profile, walls, &mut rng).0;
                    }
                    let x = s.position_at(constant.t_star);
                    let w = x - constant.t_star * s.v;
                    if w > w_lo && w < w_hi && x > 0.0 && x < 1.0 {
                        let ix = ((x / dx) as usize).min(nx - 1);
                        let iw = (((w - w_lo) / dw) as usize).min(nw - 1);
                        counts[ix * nw + iw] += 1;
                    }
                }
                counts
            })
            .collect();
        let mut total = vec![0u64; nx * nw];
        for c in &counts {
            for (a, b) in total.iter_mut().zip(c) {
                *a += b;
            }
        }
        let required = constant.beta * area;
        let cells: Vec<MinorizationCell> = (0..nx * nw)
            .map(|k| {
                let (ix, iw) = (k / nw, k % nw);
                MinorizationCell {
                    x: (ix as f64 * dx, (ix + 1) as f64 * dx),
                    w: (w_lo + iw as f64 * dw, w_lo + (iw + 1) as f64 * dw),
                    area,
                    probability: total[k] as f64 / trajectories as f64,
                    required,
                }
            })
            .collect();
        let ok = cells.iter().filter(|c| c.probability >= c.required).count();
        runs.push(MinorizationRun {
            start: (x0, v0),
            trajectories,
            coverage: ok as f64 / cells.len() as f64,
            cells,
        });
    }
    let passed = runs.iter().all(|r| r.coverage >= required_coverage);
    Ok(MinorizationCheck { constant, runs, required_coverage, passed })
}

/// Start points used for the two-point minorization experiment: a particle
/// leaving each wall at three thermal speeds of the hot wall.
pub fn extremal_starts(walls: &WallTemperatures) -> [(f64, f64); 2] {
    let s = 3.0 * walls.t2.sqrt();
    [(0.0, s), (1.0, -s)]
}

/// Deterministic bin averages for comparison with [`EmpiricalMoments`]:
/// density mass of each bin by Gauss–Legendre on the supplied pointwise
/// density, and `τ = P·Δx/∫ρ`.
pub fn bin_temperatures(edges: &[f64], pressure: f64, density: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    let (gx, gw) = crate::quadrature::gauss_legendre(8);
    edges
        .windows(2)
        .map(|e| {
            let half = 0.5 * (e[1] - e[0]);
            let mut mass = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                mass += half * w * density(e[0] + half * (1.0 + x))?;
            }
            Ok(pressure * (e[1] - e[0]) / mass)
        })
        .collect()
}

/// Constant profile helper for equilibrium runs.
pub fn constant_profile(nodes: usize, t: f64) -> Result<TemperatureProfile> {
    TemperatureProfile::constant(SpatialGrid::graded(nodes, 2.0)?, t)
}
