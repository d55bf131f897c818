//! Equilibrium covariances, exact correlation spectra from the
//! fluctuation–dissipation theorem, and the regression-theorem prediction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::Result;
use crate::quadrature::{integrate, ErrorSlot, Integrand, QuadratureConfig};
use crate::response::{
    chi_matrix, chi_qq, feature_points, im_chi_qq_over_omega, ChiPlus, ComplexMatrix2, ModelParams,
};
use crate::spectral::{MemoryKernel, SpectralDensity};

/// Relative change of `c_pp` between `Λ` and `2Λ` above which the quantum
/// momentum variance is flagged as cutoff dominated.
pub const CUTOFF_SENSITIVITY: f64 = 0.01;

/// Below this `|βħω|` the Bose factor is evaluated by its series.
const BOSE_SERIES_THRESHOLD: f64 = 1e-4;

/// Diagonal equilibrium covariance `C(0)`; the cross terms vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    pub c_qq: f64,
    pub c_pp: f64,
    /// Relative change of `c_pp` when the cutoff is doubled (0 when no
    /// cutoff is applied).
    pub cutoff_change: f64,
    pub cutoff_sensitive: bool,
}

impl CovarianceMatrix {
    pub fn c_qp(&self) -> f64 {
        0.0
    }

    pub fn matrix(&self) -> ComplexMatrix2 {
        ComplexMatrix2::real(self.c_qq, 0.0, 0.0, self.c_pp)
    }
}

/// `x / (1 - e^{-x})`, regular at `x = 0`.
pub fn bose_ratio(x: f64) -> f64 {
    if x.abs() < BOSE_SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 + x / 2.0 + x2 / 12.0 - x2 * x2 / 720.0
    } else {
        x / -(-x).exp_m1()
    }
}

/// `(x/2) coth(x/2)`, the symmetrised Bose weight; regular and even.
fn coth_weight(x: f64) -> f64 {
    let x = x.abs();
    if x < BOSE_SERIES_THRESHOLD {
        1.0 + x * x / 12.0
    } else {
        0.5 * x / (0.5 * x).tanh()
    }
}

/// Integrand of `C(0)` with the `ω`-power `power` (0 for `q`, 2 for `p`):
/// `(2/πβ) w(βħω) ω^power Im χ̃_qq/ω`.
fn covariance_integrand<'a, K: MemoryKernel + ?Sized>(
    p: &'a ModelParams,
    k: &'a K,
    power: i32,
    slot: &'a ErrorSlot,
    features: &[f64],
) -> Integrand<'a> {
    let pref = 2.0 / (PI * p.beta);
    Integrand::new(move |w| {
        let weight = if p.is_classical() { 1.0 } else { coth_weight(p.beta * p.hbar * w) };
        slot.unwrap_or_nan(im_chi_qq_over_omega(p, k, w).map(|v| pref * weight * w.powi(power) * v))
    })
    .with_breakpoints(features.iter().copied())
}

/// Equilibrium covariances
/// `c_qq = (ħ/π) ∫_0^∞ coth(βħω/2) Im χ̃_qq dω` and
/// `c_pp = (ħ/π) ∫_0^Λ coth(βħω/2) ω² Im χ̃_qq dω`.
///
/// With `ħ = 0` the weight becomes `2/(βω)` and both integrals converge
/// on the half-line, giving equipartition. In the quantum case only
/// `c_pp` is truncated at the cutoff, since for a strictly Ohmic bath it
/// diverges logarithmically.
pub fn covariance0<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    cfg: &QuadratureConfig,
) -> Result<CovarianceMatrix> {
    p.validate()?;
    if k.is_decoupled() {
        // Free oscillator: Im χ̃_qq collapses onto δ(ω - ω0).
        let w0 = p.omega0;
        let e = if p.is_classical() {
            1.0 / p.beta
        } else {
            0.5 * p.hbar * w0 / (0.5 * p.beta * p.hbar * w0).tanh()
        };
        return Ok(CovarianceMatrix {
            c_qq: e / (w0 * w0),
            c_pp: e,
            cutoff_change: 0.0,
            cutoff_sensitive: false,
        });
    }
    let features = feature_points(p, k);
    let slot = ErrorSlot::default();
    let result = (|| {
        let qq = integrate(&covariance_integrand(p, k, 0, &slot, &features), 0.0, f64::INFINITY, cfg)?;
        let fp = covariance_integrand(p, k, 2, &slot, &features);
        if p.is_classical() {
            let pp = integrate(&fp, 0.0, f64::INFINITY, cfg)?;
            return Ok(CovarianceMatrix {
                c_qq: qq.value.re,
                c_pp: pp.value.re,
                cutoff_change: 0.0,
                cutoff_sensitive: false,
            });
        }
        let pp = integrate(&fp, 0.0, p.cutoff, cfg)?.value.re;
        let extra = integrate(&fp, p.cutoff, 2.0 * p.cutoff, cfg)?.value.re;
        let change = (extra / pp).abs();
        Ok(CovarianceMatrix {
            c_qq: qq.value.re,
            c_pp: pp,
            cutoff_change: change,
            cutoff_sensitive: change > CUTOFF_SENSITIVITY,
        })
    })();
    slot.resolve(result)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    params: [u64; 4],
    density: Vec<u64>,
    quadrature: [u64; 6],
}

impl CacheKey {
    fn new(p: &ModelParams, sd: &SpectralDensity, cfg: &QuadratureConfig) -> Self {
        let density = match sd {
            SpectralDensity::Ohmic { coupling } => vec![0, coupling.to_bits()],
            SpectralDensity::Peaked {
                coupling,
                width,
                center,
            } => vec![1, coupling.to_bits(), width.to_bits(), center.to_bits()],
            SpectralDensity::Tabulated(t) => std::iter::once(2)
                .chain(t.samples().flat_map(|(w, j)| [w.to_bits(), j.to_bits()]))
                .collect(),
        };
        Self {
            params: [p.omega0, p.beta, p.hbar, p.cutoff].map(f64::to_bits),
            density,
            quadrature: [
                cfg.half_width.to_bits(),
                cfg.rel_tol.to_bits(),
                cfg.abs_tol.to_bits(),
                cfg.pv_radius.to_bits(),
                cfg.max_subdivisions as u64,
                cfg.tail_tol.to_bits(),
            ],
        }
    }
}

type Cache = RwLock<HashMap<CacheKey, CovarianceMatrix>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// [`covariance0`] memoised per `(params, density, config)`.
pub fn covariance0_cached(
    p: &ModelParams,
    sd: &SpectralDensity,
    cfg: &QuadratureConfig,
) -> Result<CovarianceMatrix> {
    let key = CacheKey::new(p, sd, cfg);
    if let Some(c) = cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(*c);
    }
    let c = covariance0(p, sd, cfg)?;
    cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, c);
    Ok(c)
}

/// `C̃_qq(ω) = 2ħ Im χ̃_qq(ω) / (1 - e^{-βħω})`, or `2 Im χ̃_qq/(βω)` when
/// `ħ = 0`.
pub fn exact_spectrum_qq<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, omega: f64) -> Result<f64> {
    let r = im_chi_qq_over_omega(p, k, omega)?;
    let bose = if p.is_classical() {
        1.0
    } else {
        bose_ratio(p.beta * p.hbar * omega)
    };
    Ok(2.0 * r * bose / p.beta)
}

/// Exact equilibrium spectrum `C̃(ω) = [[1, iω], [-iω, ω²]] C̃_qq(ω)`.
pub fn exact_spectrum<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
) -> Result<ComplexMatrix2> {
    let c = exact_spectrum_qq(p, k, omega)?;
    Ok(ComplexMatrix2::frequency_structure(omega).scale(c.into()))
}

/// Regression-theorem prediction of the correlation spectrum, entry by
/// entry.
pub fn rt_spectrum<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
    c0: &CovarianceMatrix,
) -> Result<ComplexMatrix2> {
    let chi = chi_qq(p, k, omega)?;
    let (cq, cp) = (c0.c_qq, c0.c_pp);
    let w2 = omega * omega;
    let one = Complex64::new(1.0, 0.0);
    Ok(ComplexMatrix2::new(
        (2.0 * omega * cq * chi.im).into(),
        chi * cp - (chi.conj() * w2 + one) * cq,
        chi.conj() * cp - (chi * w2 + one) * cq,
        (2.0 * omega * cp * chi.im).into(),
    ))
}

/// `χ̃ χ₊⁻¹ C(0) - C(0) χ₊⁻¹ χ̃†`, the matrix form of [`rt_spectrum`].
pub fn rt_spectrum_general<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    omega: f64,
    c0: &CovarianceMatrix,
) -> Result<ComplexMatrix2> {
    let chi = chi_matrix(p, k, omega)?;
    let c = c0.matrix();
    let inv = ChiPlus::inverse();
    Ok(chi * inv * c - c * inv * chi.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralDensity;
    use approx::assert_relative_eq;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn bose_series_joins_closed_form() {
        for &x in &[-2e-4f64, -1.0001e-4, 1.0001e-4, 3e-4] {
            let closed = x / -(-x).exp_m1();
            let series = 1.0 + x / 2.0 + x * x / 12.0;
            assert_relative_eq!(closed, series, max_relative = 1e-12);
        }
        assert_eq!(bose_ratio(0.0), 1.0);
    }

    #[test]
    fn classical_equipartition() {
        let p = ModelParams { beta: 2.0, hbar: 0.0, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(0.3).unwrap();
        let c = covariance0(&p, &sd, &cfg()).unwrap();
        assert_relative_eq!(c.c_qq, 0.5, max_relative = 1e-6);
        assert_relative_eq!(c.c_pp, 0.5, max_relative = 1e-6);
        assert_eq!(c.c_qp(), 0.0);
    }

    #[test]
    fn weak_coupling_quantum_position_variance() {
        let p = ModelParams { beta: 1.5, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(1e-3).unwrap();
        let c = covariance0(&p, &sd, &cfg()).unwrap();
        let free = 0.5 / (0.5 * p.beta).tanh();
        assert_relative_eq!(c.c_qq, free, max_relative = 5e-3);
    }

    #[test]
    fn ohmic_momentum_variance_depends_on_cutoff() {
        let p = ModelParams { cutoff: 1e3, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(0.5).unwrap();
        let c = covariance0(&p, &sd, &cfg()).unwrap();
        assert!(c.cutoff_change > 0.0);
        // the log divergence adds about (D/π) ln 2 per doubling
        let expected = 0.5 / PI * 2f64.ln() / c.c_pp;
        assert_relative_eq!(c.cutoff_change, expected, max_relative = 2e-2);
    }

    #[test]
    fn cache_returns_identical_values() {
        let p = ModelParams::default();
        let sd = SpectralDensity::peaked(0.5, 0.4, 1.5).unwrap();
        let a = covariance0_cached(&p, &sd, &cfg()).unwrap();
        let b = covariance0_cached(&p, &sd, &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, covariance0(&p, &sd, &cfg()).unwrap());
    }

    #[test]
    fn resonant_classical_spectrum() {
        let p = ModelParams { hbar: 0.0, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(1.0).unwrap();
        assert_relative_eq!(exact_spectrum_qq(&p, &sd, 1.0).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn detailed_balance() {
        let p = ModelParams { beta: 0.7, hbar: 1.3, ..ModelParams::default() };
        let sd = SpectralDensity::peaked(0.8, 0.5, 1.7).unwrap();
        for &w in &[0.2, 1.0, 2.5, 6.0] {
            let plus = exact_spectrum_qq(&p, &sd, w).unwrap();
            let minus = exact_spectrum_qq(&p, &sd, -w).unwrap();
            assert_relative_eq!(minus, (-p.beta * p.hbar * w).exp() * plus, max_relative = 1e-12);
        }
    }

    #[test]
    fn rt_forms_agree_and_are_symmetric() {
        let p = ModelParams { beta: 0.9, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(0.6).unwrap();
        let c0 = CovarianceMatrix { c_qq: 0.8, c_pp: 1.4, cutoff_change: 0.0, cutoff_sensitive: false };
        for &w in &[-3.0, -0.4, 0.0, 0.9, 2.2] {
            let a = rt_spectrum(&p, &sd, w, &c0).unwrap();
            let b = rt_spectrum_general(&p, &sd, w, &c0).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
            assert!((a.qp - a.pq.conj()).norm() < 1e-14);
        }
        assert_eq!(rt_spectrum(&p, &sd, 0.0, &c0).unwrap().qq.norm(), 0.0);
    }
}
