//! Linear response of the Caldeira–Leggett oscillator for the observable
//! pair `(q, p)`.
//!
//! In frequency space everything follows from
//! `χ̃_qq(ω) = 1 / (ω0² - ω² - iω γ̃(ω))`:
//!
//! ```text
//! χ̃(ω) = [[1, iω], [-iω, ω²]] χ̃_qq(ω) + [[0, 0], [0, 1]]
//! ```
//!
//! Time-domain responses are rebuilt from `Im χ̃_qq` alone, which is enough
//! for a real causal function.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{cosine_transform, integrate, sine_transform, ErrorSlot, Integrand, QuadratureConfig};
use crate::spectral::MemoryKernel;

/// System frequency, bath temperature, quantum scale and UV cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega0: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// `0` selects the classical branch.
    pub hbar: f64,
    /// UV cutoff `Λ`, used only for covariance integrals that diverge.
    pub cutoff: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            beta: 1.0,
            hbar: 1.0,
            cutoff: 1e3,
        }
    }
}

impl ModelParams {
    pub fn new(omega0: f64, beta: f64, hbar: f64, cutoff: f64) -> Result<Self> {
        let p = Self {
            omega0,
            beta,
            hbar,
            cutoff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(invalid("omega0", format!("must be > 0, got {}", self.omega0)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta", format!("must be > 0, got {}", self.beta)));
        }
        if !(self.hbar.is_finite() && self.hbar >= 0.0) {
            return Err(invalid("hbar", format!("must be >= 0, got {}", self.hbar)));
        }
        if !(self.cutoff.is_finite() && self.cutoff > self.omega0) {
            return Err(invalid("cutoff", format!("must exceed omega0, got {}", self.cutoff)));
        }
        Ok(())
    }

    pub fn is_classical(&self) -> bool {
        self.hbar == 0.0
    }

    /// A human-readable warning when the cutoff is too close to `ω0`.
    pub fn cutoff_warning(&self) -> Option<String> {
        (self.cutoff <= 10.0 * self.omega0).then(|| {
            format!(
                "cutoff {} is within a decade of omega0 = {}; covariances may be cutoff dominated",
                self.cutoff, self.omega0
            )
        })
    }
}

/// 2×2 complex matrix indexed by the observables `(q, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexMatrix2 {
    pub qq: Complex64,
    pub qp: Complex64,
    pub pq: Complex64,
    pub pp: Complex64,
}

/// Entry selector for [`ComplexMatrix2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    QQ,
    QP,
    PQ,
    PP,
}

impl Entry {
    pub const ALL: [Entry; 4] = [Entry::QQ, Entry::QP, Entry::PQ, Entry::PP];

    pub fn label(self) -> &'static str {
        match self {
            Entry::QQ => "qq",
            Entry::QP => "qp",
            Entry::PQ => "pq",
            Entry::PP => "pp",
        }
    }
}

impl ComplexMatrix2 {
    pub fn new(qq: Complex64, qp: Complex64, pq: Complex64, pp: Complex64) -> Self {
        Self { qq, qp, pq, pp }
    }

    pub fn real(qq: f64, qp: f64, pq: f64, pp: f64) -> Self {
        Self::new(qq.into(), qp.into(), pq.into(), pp.into())
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 0.0, 1.0)
    }

    /// `[[1, iω], [-iω, ω²]]`, the common frequency structure of the
    /// response and correlation matrices.
    pub fn frequency_structure(omega: f64) -> Self {
        Self::new(
            1.0.into(),
            Complex64::new(0.0, omega),
            Complex64::new(0.0, -omega),
            (omega * omega).into(),
        )
    }

    pub fn get(&self, e: Entry) -> Complex64 {
        match e {
            Entry::QQ => self.qq,
            Entry::QP => self.qp,
            Entry::PQ => self.pq,
            Entry::PP => self.pp,
        }
    }

    pub fn conj(&self) -> Self {
        Self::new(self.qq.conj(), self.qp.conj(), self.pq.conj(), self.pp.conj())
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.qq, self.pq, self.qp, self.pp)
    }

    pub fn adjoint(&self) -> Self {
        self.conj().transpose()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.qq * s, self.qp * s, self.pq * s, self.pp * s)
    }

    pub fn max_abs(&self) -> f64 {
        Entry::ALL
            .iter()
            .map(|&e| self.get(e).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Add for ComplexMatrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.qq + o.qq, self.qp + o.qp, self.pq + o.pq, self.pp + o.pp)
    }
}

impl Sub for ComplexMatrix2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.qq - o.qq, self.qp - o.qp, self.pq - o.pq, self.pp - o.pp)
    }
}

impl Mul for ComplexMatrix2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.qq * o.qq + self.qp * o.pq,
            self.qq * o.qp + self.qp * o.pp,
            self.pq * o.qq + self.pp * o.pq,
            self.pq * o.qp + self.pp * o.pp,
        )
    }
}

/// Real 2×2 matrix, rows/columns ordered `(q, p)`.
pub type RealMatrix2 = [[f64; 2]; 2];

/// The `t → 0⁺` limit of the response matrix for `(q, p)`: the symplectic
/// form with `(χ₊)_pq = 1 = -(χ₊)_qp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChiPlus;

impl ChiPlus {
    pub const MATRIX: RealMatrix2 = [[0.0, -1.0], [1.0, 0.0]];
    /// `χ₊⁻¹ = -χ₊ᵀ·(-1) = [[0, 1], [-1, 0]]`.
    pub const INVERSE: RealMatrix2 = [[0.0, 1.0], [-1.0, 0.0]];

    pub fn matrix() -> ComplexMatrix2 {
        let m = Self::MATRIX;
        ComplexMatrix2::real(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn inverse() -> ComplexMatrix2 {
        let m = Self::INVERSE;
        ComplexMatrix2::real(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    /// `χ₊ a` for a kick `a = (a_q, a_p)`.
    pub fn apply(a_q: f64, a_p: f64) -> (f64, f64) {
        let m = Self::MATRIX;
        (m[0][0] * a_q + m[0][1] * a_p, m[1][0] * a_q + m[1][1] * a_p)
    }
}

fn denominator<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, omega: f64) -> Result<Complex64> {
    let g = k.gamma_tilde(omega)?;
    let den = Complex64::new(p.omega0 * p.omega0 - omega * omega, 0.0) - Complex64::i() * omega * g;
    if den.norm() < 1e-14 * p.omega0 * p.omega0 {
        return Err(Error::DivisionNearZero { omega });
    }
    Ok(den)
}

/// `χ̃_qq(ω) = 1 / (ω0² - ω² - iω γ̃(ω))`.
pub fn chi_qq<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, omega: f64) -> Result<Complex64> {
    Ok(denominator(p, k, omega)?.inv())
}

/// `Im χ̃_qq(ω) / ω`, evaluated as `Re γ̃ / |den|²` so that `ω = 0` is regular.
pub fn im_chi_qq_over_omega<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, omega: f64) -> Result<f64> {
    let den = denominator(p, k, omega)?;
    Ok(k.gamma_tilde(omega)?.re / den.norm_sqr())
}

/// Full response matrix `χ̃(ω)`.
pub fn chi_matrix<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, omega: f64) -> Result<ComplexMatrix2> {
    let c = chi_qq(p, k, omega)?;
    Ok(ComplexMatrix2::frequency_structure(omega).scale(c) + ComplexMatrix2::real(0.0, 0.0, 0.0, 1.0))
}

/// `dχ̃/dω`, from `χ̃_qq' = χ̃_qq² (2ω + iγ̃ + iωγ̃')` and the product rule
/// on the frequency structure.
pub fn chi_prime_matrix<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
) -> Result<ComplexMatrix2> {
    let c = chi_qq(p, k, omega)?;
    let g = k.gamma_tilde(omega)?;
    let gp = k.gamma_tilde_prime(omega)?;
    let i = Complex64::i();
    let cp = c * c * (2.0 * omega + i * g + i * omega * gp);
    Ok(ComplexMatrix2::new(
        cp,
        i * c + i * omega * cp,
        -i * c - i * omega * cp,
        2.0 * omega * c + omega * omega * cp,
    ))
}

/// Both sides of the Fourier-space divisibility condition:
/// `(-i χ̃'(ω), χ̃(ω) χ₊⁻¹ χ̃(ω))`.
pub fn divisibility_sides<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
) -> Result<(ComplexMatrix2, ComplexMatrix2)> {
    let chi = chi_matrix(p, k, omega)?;
    let lhs = chi_prime_matrix(p, k, omega)?.scale(-Complex64::i());
    let rhs = chi * ChiPlus::inverse() * chi;
    Ok((lhs, rhs))
}

/// `R(ω) = -i χ̃'(ω) - χ̃(ω) χ₊⁻¹ χ̃(ω)`; identically zero for divisible
/// (Markovian) mean-value dynamics.
pub fn divisibility_residual<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
) -> Result<ComplexMatrix2> {
    let (lhs, rhs) = divisibility_sides(p, k, omega)?;
    Ok(lhs - rhs)
}

/// Frequencies where the response has structure: resonance centres and a
/// ladder of points at multiples of each resonance width.
pub fn feature_points<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K) -> Vec<f64> {
    let mut pts = vec![p.omega0];
    pts.extend(k.features());
    let mut res = k.resonances(p.omega0);
    if res.is_empty() {
        res = scan_resonances(p, k);
    }
    for r in res {
        pts.push(r.center);
        pts.push(r.width);
        for m in [1.0, 3.0, 10.0, 30.0] {
            pts.push(r.center + m * r.width);
            pts.push(r.center - m * r.width);
        }
    }
    pts.retain(|x| x.is_finite() && *x > 0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Local maxima of `|χ̃_qq|` on a logarithmic grid, for kernels without
/// closed-form poles.
fn scan_resonances<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K) -> Vec<crate::spectral::Resonance> {
    let n = 4000;
    let (lo, hi) = (1e-3 * p.omega0, 1e3 * p.omega0);
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
        .collect();
    let mags: Vec<f64> = grid
        .iter()
        .map(|&w| chi_qq(p, k, w).map_or(0.0, |c| c.norm()))
        .collect();
    (1..n)
        .filter(|&i| mags[i] > mags[i - 1] && mags[i] >= mags[i + 1])
        .map(|i| crate::spectral::Resonance {
            center: grid[i],
            width: grid[i + 1] - grid[i - 1],
        })
        .collect()
}

/// `(2/π) ∫_0^∞ Im χ̃_qq(ω)/ω dω`, which must reproduce `χ̃_qq(0) = 1/ω0²`.
pub fn static_sum<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, cfg: &QuadratureConfig) -> Result<f64> {
    if k.is_decoupled() {
        return Ok(1.0 / (p.omega0 * p.omega0));
    }
    let slot = ErrorSlot::default();
    let r = {
        let f = Integrand::new(|w| slot.unwrap_or_nan(im_chi_qq_over_omega(p, k, w)))
            .with_breakpoints(feature_points(p, k));
        integrate(&f, 0.0, f64::INFINITY, cfg).map(|e| std::f64::consts::FRAC_2_PI * e.value.re)
    };
    slot.resolve(r)
}

fn time_integrand<'a, K: MemoryKernel + ?Sized>(
    p: &'a ModelParams,
    k: &'a K,
    power: i32,
    slot: &'a ErrorSlot,
    features: &[f64],
) -> Integrand<'a> {
    Integrand::new(move |w| {
        slot.unwrap_or_nan(im_chi_qq_over_omega(p, k, w).map(|v| v * w.powi(power + 1)))
    })
    .with_breakpoints(features.iter().copied())
}

/// Causal response matrix `χ(t)` for `t ≥ 0`:
///
/// * `χ_qq(t) = (2/π) ∫ Im χ̃_qq(ω) sin(ωt) dω`
/// * `χ_pq(t) = dχ_qq/dt = (2/π) ∫ ω Im χ̃_qq(ω) cos(ωt) dω = -χ_qp(t)`
/// * `χ_pp(t) = (2/π) ∫ ω² Im χ̃_qq(ω) sin(ωt) dω`
///
/// At `t = 0` the right-hand limit is returned. For a strictly Ohmic bath
/// `χ_pp(0⁺) = D`: the instantaneous friction converts a position kick into
/// a momentum kick.
pub fn chi_time<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<RealMatrix2> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        let mut m = ChiPlus::MATRIX;
        m[1][1] = k.high_frequency_friction();
        return Ok(m);
    }
    if k.is_decoupled() {
        let w0 = p.omega0;
        let (s, c) = (w0 * t).sin_cos();
        return Ok([[s / w0, -c], [c, w0 * s]]);
    }
    let features = feature_points(p, k);
    let slot = ErrorSlot::default();
    let result = (|| {
        let qq = sine_transform(&time_integrand(p, k, 0, &slot, &features), t, cfg)?;
        let pq = cosine_transform(&time_integrand(p, k, 1, &slot, &features), t, cfg)?;
        let pp = sine_transform(&time_integrand(p, k, 2, &slot, &features), t, cfg)?;
        Ok([[qq, -pq], [pq, pp]])
    })();
    slot.resolve(result)
}

/// Mean values `(⟨q(t)⟩, ⟨p(t)⟩) = χ(t)·a` after a δ-kick `a = (a_q, a_p)`
/// at `t = 0` from global equilibrium.
pub fn propagate_means<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    a_q: f64,
    a_p: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let chi = chi_time(p, k, t, cfg)?;
    Ok((
        chi[0][0] * a_q + chi[0][1] * a_p,
        chi[1][0] * a_q + chi[1][1] * a_p,
    ))
}

/// [`propagate_means`] over a grid of times, evaluated in parallel.
pub fn propagate_means_series<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    a_q: f64,
    a_p: f64,
    times: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<(f64, f64)>> {
    times
        .par_iter()
        .map(|&t| propagate_means(p, k, a_q, a_p, t, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralDensity;
    use approx::assert_abs_diff_eq;

    fn unit() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn static_susceptibility_and_resonant_value() {
        let sd = SpectralDensity::ohmic(0.4).unwrap();
        let p = ModelParams { omega0: 2.0, ..unit() };
        assert_abs_diff_eq!(chi_qq(&p, &sd, 0.0).unwrap().re, 0.25, epsilon = 1e-15);
        let sd = SpectralDensity::ohmic(1.0).unwrap();
        let c = chi_qq(&unit(), &sd, 1.0).unwrap();
        assert_abs_diff_eq!(c.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn high_frequency_falloff() {
        let sd = SpectralDensity::ohmic(0.3).unwrap();
        let w = 1e3;
        assert!(chi_qq(&unit(), &sd, w).unwrap().norm() < 1.1 / (w * w));
    }

    #[test]
    fn resonance_without_damping_is_rejected() {
        let sd = SpectralDensity::ohmic(0.0).unwrap();
        assert!(matches!(
            chi_qq(&unit(), &sd, 1.0),
            Err(Error::DivisionNearZero { .. })
        ));
    }

    #[test]
    fn ohmic_derivative_at_origin() {
        let d = 0.7;
        let p = ModelParams { omega0: 1.3, ..unit() };
        let sd = SpectralDensity::ohmic(d).unwrap();
        let cp = chi_prime_matrix(&p, &sd, 0.0).unwrap().qq;
        assert_abs_diff_eq!(cp.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cp.im, d / p.omega0.powi(4), epsilon = 1e-14);
    }

    #[test]
    fn decoupled_limit_of_pp_entry() {
        let sd = SpectralDensity::ohmic(1e-9).unwrap();
        let w = 0.6;
        let pp = chi_matrix(&unit(), &sd, w).unwrap().pp;
        assert_abs_diff_eq!(pp.re, 1.0 + w * w / (1.0 - w * w), epsilon = 1e-8);
    }

    #[test]
    fn chi_plus_round_trip() {
        assert_eq!(ChiPlus::matrix() * ChiPlus::inverse(), ComplexMatrix2::identity());
        assert_eq!(ChiPlus::inverse() * ChiPlus::matrix(), ComplexMatrix2::identity());
        assert_eq!(ChiPlus::apply(1.0, 1.0), (-1.0, 1.0));
    }

    #[test]
    fn residual_vanishes_without_coupling() {
        let p = unit();
        for sd in [
            SpectralDensity::ohmic(0.0).unwrap(),
            SpectralDensity::peaked(0.0, 0.5, 2.0).unwrap(),
        ] {
            for &w in &[0.3, 1.7, 4.0] {
                let r = divisibility_residual(&p, &sd, w).unwrap();
                assert!(r.max_abs() < 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn ohmic_residual_at_resonance() {
        let sd = SpectralDensity::ohmic(1.0).unwrap();
        let r = divisibility_residual(&unit(), &sd, 1.0).unwrap();
        let expected = ComplexMatrix2::new(
            (-1.0).into(),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            (-1.0).into(),
        );
        assert!(r.max_abs_diff(&expected) < 1e-12, "{r:?}");
    }

    #[test]
    fn free_oscillator_in_time() {
        let sd = SpectralDensity::ohmic(0.0).unwrap();
        let cfg = QuadratureConfig::default();
        for &t in &[0.5, 2.0, 7.3] {
            let chi = chi_time(&unit(), &sd, t, &cfg).unwrap();
            assert_abs_diff_eq!(chi[0][0], t.sin(), epsilon = 1e-14);
        }
        let chi0 = chi_time(&unit(), &sd, 0.0, &cfg).unwrap();
        assert_eq!((chi0[0][0], chi0[0][1]), (0.0, -1.0));
    }

    #[test]
    fn kick_limit_matches_symplectic_shift() {
        let sd = SpectralDensity::peaked(0.5, 0.3, 1.2).unwrap();
        let m = propagate_means(&unit(), &sd, 1.0, 1.0, 0.0, &QuadratureConfig::default()).unwrap();
        assert_eq!(m, (-1.0, 1.0));
        // just after the kick the quadrature route agrees with the limit
        let m = propagate_means(&unit(), &sd, 1.0, 1.0, 1e-4, &QuadratureConfig::default()).unwrap();
        assert_abs_diff_eq!(m.0, -1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(m.1, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn free_rotation_conserves_energy() {
        let sd = SpectralDensity::ohmic(0.0).unwrap();
        let p = ModelParams { omega0: 1.7, ..unit() };
        let cfg = QuadratureConfig::default();
        let (a_q, a_p) = (0.4, -0.9);
        let e0 = {
            let (q, pm) = ChiPlus::apply(a_q, a_p);
            pm * pm + p.omega0 * p.omega0 * q * q
        };
        for k in 0..20 {
            let (q, pm) = propagate_means(&p, &sd, a_q, a_p, 0.37 * k as f64, &cfg).unwrap();
            assert_abs_diff_eq!(pm * pm + p.omega0 * p.omega0 * q * q, e0, epsilon = 1e-12);
        }
    }
}
