//! Independent time-domain checks of the frequency-space machinery.
//!
//! * A classical Langevin Monte Carlo for the strictly Ohmic oscillator,
//!   prepared by the δ-kick from global equilibrium.
//! * A deterministic pseudo-mode embedding of the peaked density: the system
//!   couples to one auxiliary oscillator which is damped by an Ohmic bath.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Magnitude beyond which a trajectory is declared unstable.
const BLOW_UP: f64 = 1e6;

/// Trajectories per work unit; also the unit of the deterministic reduction.
const CHUNK: usize = 1000;

/// Parameters of a Langevin ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinConfig {
    /// Ohmic coupling `D`.
    pub d: f64,
    pub omega0: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub a_q: f64,
    pub a_p: f64,
    /// Record ensemble statistics every this many steps.
    pub record_stride: usize,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            d: 0.2,
            omega0: 1.0,
            beta: 1.0,
            dt: 0.01,
            t_max: 20.0,
            n_traj: 100_000,
            seed: 0x5eed,
            a_q: 1.0,
            a_p: 1.0,
            record_stride: 10,
        }
    }
}

impl LangevinConfig {
    /// Largest admissible step for the given frequencies.
    pub fn max_dt(&self) -> f64 {
        0.01 / self.omega0.max(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(invalid("D", format!("must be >= 0, got {}", self.d)));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(invalid("omega0", format!("must be > 0, got {}", self.omega0)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta", format!("must be > 0, got {}", self.beta)));
        }
        if !(self.dt > 0.0 && self.dt <= self.max_dt() * (1.0 + 1e-12)) {
            return Err(invalid(
                "dt",
                format!("must lie in (0, {}], got {}", self.max_dt(), self.dt),
            ));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(invalid("t_max", format!("must be > 0, got {}", self.t_max)));
        }
        if self.n_traj < 1000 {
            return Err(invalid("n_traj", format!("must be >= 1000, got {}", self.n_traj)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        if !(self.a_q.is_finite() && self.a_p.is_finite()) {
            return Err(invalid("kick", "a_q and a_p must be finite"));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Recorded times, starting with `0⁺` right after the kick.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps() / self.record_stride)
            .map(|k| (k * self.record_stride) as f64 * self.dt)
            .collect()
    }
}

/// Ensemble means and standard errors at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinSeries {
    pub times: Vec<f64>,
    pub q_mean: Vec<f64>,
    pub p_mean: Vec<f64>,
    pub q_se: Vec<f64>,
    pub p_se: Vec<f64>,
}

/// Running first and second moments (Welford / Chan).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        self.mean += delta * o.n / n;
        self.m2 += o.m2 + delta * delta * self.n * o.n / n;
        self.n = n;
    }

    fn standard_error(&self) -> f64 {
        if self.n < 2.0 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// State right after the kick.
///
/// Pre-kick values come from the canonical ensemble. The position shift
/// `-a_p` enters the friction `-D q̇` as a δ-function, so the momentum
/// receives `a_q + D a_p` rather than `a_q` alone.
fn kicked_state(cfg: &LangevinConfig, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let q = gaussian(rng) / (cfg.beta.sqrt() * cfg.omega0);
    let p = gaussian(rng) / cfg.beta.sqrt();
    (q - cfg.a_p, p + cfg.a_q + cfg.d * cfg.a_p)
}

/// One chunk of trajectories; returns per-record moments of `q` and `p`.
fn run_chunk(cfg: &LangevinConfig, first: usize, count: usize) -> Result<Vec<(Moments, Moments)>> {
    let n_records = cfg.n_steps() / cfg.record_stride + 1;
    let mut out = vec![(Moments::default(), Moments::default()); n_records];
    let dt = cfg.dt;
    let w2 = cfg.omega0 * cfg.omega0;
    let c = (-cfg.d * dt).exp();
    let kick = ((1.0 - c * c) / cfg.beta).sqrt();
    for i in first..first + count {
        let mut rng = stream(cfg.seed, i as u64);
        let (mut q, mut p) = kicked_state(cfg, &mut rng);
        out[0].0.push(q);
        out[0].1.push(p);
        for step in 1..=cfg.n_steps() {
            // BAOAB splitting
            p -= 0.5 * dt * w2 * q;
            q += 0.5 * dt * p;
            p = c * p + kick * gaussian(&mut rng);
            q += 0.5 * dt * p;
            p -= 0.5 * dt * w2 * q;
            if !(q.abs() < BLOW_UP && p.abs() < BLOW_UP) {
                return Err(Error::UnstableStep {
                    time: step as f64 * dt,
                });
            }
            if step % cfg.record_stride == 0 {
                let r = &mut out[step / cfg.record_stride];
                r.0.push(q);
                r.1.push(p);
            }
        }
    }
    Ok(out)
}

/// Ensemble means of `q` and `p` after the kick, with standard errors.
///
/// Each trajectory draws from its own ChaCha stream selected by its index,
/// and chunks are merged in index order, so the output depends only on the
/// configuration and not on the thread count.
pub fn langevin_means(cfg: &LangevinConfig) -> Result<LangevinSeries> {
    cfg.validate()?;
    let n_chunks = cfg.n_traj.div_ceil(CHUNK);
    let chunks: Vec<Result<Vec<(Moments, Moments)>>> = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let first = k * CHUNK;
            run_chunk(cfg, first, CHUNK.min(cfg.n_traj - first))
        })
        .collect();
    let mut total: Option<Vec<(Moments, Moments)>> = None;
    for chunk in chunks {
        let chunk = chunk?;
        match total.as_mut() {
            None => total = Some(chunk),
            Some(t) => {
                for (acc, c) in t.iter_mut().zip(&chunk) {
                    acc.0.merge(&c.0);
                    acc.1.merge(&c.1);
                }
            }
        }
    }
    let total = total.unwrap_or_default();
    Ok(LangevinSeries {
        times: cfg.times(),
        q_mean: total.iter().map(|m| m.0.mean).collect(),
        p_mean: total.iter().map(|m| m.1.mean).collect(),
        q_se: total.iter().map(|m| m.0.standard_error()).collect(),
        p_se: total.iter().map(|m| m.1.standard_error()).collect(),
    })
}

/// Discretised white-noise impulses `ξ_n dt` with variance `2 D dt / β`.
pub fn noise_increments(d: f64, beta: f64, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(d >= 0.0 && beta > 0.0 && dt > 0.0) {
        return Err(invalid("noise", "need D >= 0, beta > 0, dt > 0"));
    }
    let sigma = (2.0 * d * dt / beta).sqrt();
    let mut rng = stream(seed, 0);
    Ok((0..n).map(|_| sigma * gaussian(&mut rng)).collect())
}

/// Variance of the velocity impulse injected by one thermostat step of the
/// Langevin integrator, `(1 - e^{-2 D dt}) / β ≈ 2 D dt / β`.
pub fn thermostat_impulse_variance(d: f64, beta: f64, dt: f64) -> f64 {
    -(-2.0 * d * dt).exp_m1() / beta
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Absolute part of the error scale, relative to the unit kick. Kept well
/// below the tolerance so that decaying solutions stay resolved.
const ABS_FLOOR: f64 = 1e-3;

/// Adaptive Dormand–Prince integrator with mixed absolute/relative control.
struct DormandPrince<const N: usize> {
    tol: f64,
    h: f64,
}

impl<const N: usize> DormandPrince<N> {
    fn new(tol: f64, h: f64) -> Self {
        Self { tol, h }
    }

    /// Advance `y` from `t` to exactly `t_end`.
    fn advance(
        &mut self,
        f: &impl Fn(f64, &[f64; N]) -> [f64; N],
        t: &mut f64,
        y: &mut [f64; N],
        t_end: f64,
    ) -> Result<()> {
        let mut rejections = 0usize;
        while *t < t_end {
            let last = self.h >= t_end - *t;
            let h = if last { t_end - *t } else { self.h };
            let mut k = [[0.0; N]; 7];
            k[0] = f(*t, y);
            for s in 0..6 {
                let mut ys = *y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    *yi += h * (0..=s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                k[s + 1] = f(*t + C[s] * h, &ys);
            }
            // FSAL: stage 6 was evaluated at the fifth-order solution.
            let mut y5 = *y;
            let mut err = 0.0f64;
            for i in 0..N {
                let d5: f64 = (0..7).map(|j| B5[j] * k[j][i]).sum();
                let d4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
                y5[i] += h * d5;
                let scale = self.tol * (ABS_FLOOR + y[i].abs().max(y5[i].abs()));
                err = err.max((h * (d5 - d4)).abs() / scale);
            }
            if !err.is_finite() {
                return Err(Error::NonConvergence {
                    estimate: y[0],
                    error: f64::INFINITY,
                });
            }
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                *y = y5;
                rejections = 0;
            } else {
                rejections += 1;
                if rejections > 50 || h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::NonConvergence {
                        estimate: y[0],
                        error: err * self.tol,
                    });
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // The shortened final step says nothing about the natural step size.
            if !(last && err <= 1.0) {
                self.h = h * factor;
            }
        }
        Ok(())
    }
}

/// Peaked density realised as an explicit pseudo-mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding {
    /// Coupling `D` (units of frequency²).
    pub d: f64,
    /// Pseudo-mode damping `Γ`.
    pub gamma: f64,
    /// Pseudo-mode frequency `Ω`.
    pub omega: f64,
    pub omega0: f64,
}

/// System and pseudo-mode coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmbeddingState {
    pub q: f64,
    pub p: f64,
    pub x: f64,
    pub y: f64,
}

/// Integration tolerance of the embedding ODE.
pub const EMBEDDING_TOL: f64 = 1e-10;

impl Embedding {
    pub fn new(d: f64, gamma: f64, omega: f64, omega0: f64) -> Result<Self> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(invalid("D", format!("must be >= 0, got {d}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", format!("must be > 0, got {omega}")));
        }
        if 2.0 * omega * omega - gamma * gamma <= 0.0 {
            return Err(invalid("gamma", "embedding oracle needs 2Ω² - Γ² > 0"));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(invalid("omega0", format!("must be > 0, got {omega0}")));
        }
        Ok(Self {
            d,
            gamma,
            omega,
            omega0,
        })
    }

    /// Mean-value equations. The counter-term `D²/Ω²` keeps the static
    /// response at `1/ω0²`.
    fn rhs(&self, s: &[f64]) -> [f64; 4] {
        let (q, p, x, y) = (s[0], s[1], s[2], s[3]);
        let w2 = self.omega * self.omega;
        [
            p,
            -self.omega0 * self.omega0 * q - self.d * self.d / w2 * q + self.d * x,
            y,
            -w2 * x + self.d * q - self.gamma * y,
        ]
    }

    /// Unit momentum impulse on the system; the pseudo-mode is untouched.
    fn kicked() -> [f64; 4] {
        [0.0, 1.0, 0.0, 0.0]
    }

    fn initial_step(&self) -> f64 {
        0.01 / self.omega0.max(self.omega)
    }

    /// `(χ_qq(t), χ_pq(t))` and the pseudo-mode coordinates at each of the
    /// (non-decreasing, non-negative) `times`.
    pub fn trajectory(&self, times: &[f64]) -> Result<Vec<EmbeddingState>> {
        let mut dp = DormandPrince::<4>::new(EMBEDDING_TOL, self.initial_step());
        let f = |_t: f64, s: &[f64; 4]| self.rhs(s);
        let mut t = 0.0;
        let mut y = Self::kicked();
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if !(target >= t && target.is_finite()) {
                return Err(invalid("times", "must be finite, non-negative and sorted"));
            }
            dp.advance(&f, &mut t, &mut y, target)?;
            out.push(EmbeddingState {
                q: y[0],
                p: y[1],
                x: y[2],
                y: y[3],
            });
        }
        Ok(out)
    }

    /// `∫_0^∞ e^{iωt} χ_qq(t) dt`, integrated alongside the ODE until the
    /// mode energy has decayed by 20 orders of magnitude.
    pub fn fourier(&self, omega: f64) -> Result<Complex64> {
        let mut dp = DormandPrince::<6>::new(EMBEDDING_TOL, self.initial_step());
        let f = |t: f64, s: &[f64; 6]| {
            let r = self.rhs(&s[..4]);
            let (sn, cs) = (omega * t).sin_cos();
            [r[0], r[1], r[2], r[3], cs * s[0], sn * s[0]]
        };
        let mut y = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        self.run_to_rest(&mut dp, &f, &mut y)?;
        Ok(Complex64::new(y[4], y[5]))
    }

    /// `∫_0^∞ χ_qq(t) dt`, which must equal the static susceptibility `1/ω0²`.
    pub fn static_sum(&self) -> Result<f64> {
        self.fourier(0.0).map(|z| z.re)
    }

    fn energy(&self, s: &[f64]) -> f64 {
        let w02 = self.omega0 * self.omega0;
        s[1] * s[1] + w02 * s[0] * s[0] + s[3] * s[3] + self.omega * self.omega * s[2] * s[2]
    }

    fn run_to_rest<const N: usize>(
        &self,
        dp: &mut DormandPrince<N>,
        f: &impl Fn(f64, &[f64; N]) -> [f64; N],
        y: &mut [f64; N],
    ) -> Result<()> {
        let e0 = self.energy(&y[..4]);
        let period = 2.0 * std::f64::consts::PI / self.omega0.min(self.omega);
        let mut t = 0.0;
        // Pure exponential decay is monitored once per slow period.
        while self.energy(&y[..4]) > 1e-20 * e0 {
            let target = t + period;
            dp.advance(f, &mut t, y, target)?;
            if t > 1e7 * period {
                return Err(Error::NonConvergence {
                    estimate: y[0],
                    error: self.energy(&y[..4]),
                });
            }
        }
        Ok(())
    }
}

/// `χ_qq(t)` of the pseudo-mode embedding.
pub fn embedding_response(d: f64, gamma: f64, omega: f64, omega0: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    Ok(Embedding::new(d, gamma, omega, omega0)?.trajectory(&[t])?[0].q)
}
