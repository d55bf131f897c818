//! Bath spectral densities `J(ω)` and the Fourier-transformed memory kernel
//! `γ̃(ω)`.
//!
//! `J` is extended to negative frequencies as an odd function, so that
//! `Re γ̃ = J(ω)/ω` is even and `Im γ̃` is odd. The odd extension is what
//! makes the symmetrized principal-value form of `Im γ̃` hold.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, principal_value, Integrand, QuadratureConfig};

/// Real and imaginary part of `γ̃(ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryKernelValue {
    pub re: f64,
    pub im: f64,
}

impl MemoryKernelValue {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A resonance of the system response: a pole of `χ̃_qq` at
/// `±center - i·width` in the lower half plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub center: f64,
    pub width: f64,
}

/// Anything that provides a causal memory kernel `γ̃(ω)`.
pub trait MemoryKernel: Send + Sync {
    fn gamma_tilde(&self, omega: f64) -> Result<Complex64>;

    /// `dγ̃/dω`.
    fn gamma_tilde_prime(&self, omega: f64) -> Result<Complex64>;

    /// `lim_{ω→∞} Re γ̃(ω)`; non-zero only for a strictly Ohmic bath.
    fn high_frequency_friction(&self) -> f64 {
        0.0
    }

    /// True when the system is decoupled from the bath (`γ̃ ≡ 0`).
    fn is_decoupled(&self) -> bool;

    /// Characteristic bath frequencies (peak positions, widths).
    fn features(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Poles of `χ̃_qq` for a system of frequency `omega0`, when known in
    /// closed form.
    fn resonances(&self, _omega0: f64) -> Vec<Resonance> {
        Vec::new()
    }
}

/// Coupling spectrum of the bath.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// `J(ω) = D ω` with no cutoff, i.e. `γ(t) = D δ(t)`.
    Ohmic { coupling: f64 },
    /// `J(ω) = D² Γ ω / ((ω² - Ω²)² + Γ² ω²)`: a system coupled with strength
    /// `D` to a mode of frequency `Ω` which is damped by an Ohmic bath `Γω`.
    Peaked {
        coupling: f64,
        width: f64,
        center: f64,
    },
    Tabulated(TabulatedDensity),
}

impl SpectralDensity {
    pub fn ohmic(coupling: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(invalid("D", format!("must be >= 0, got {coupling}")));
        }
        Ok(Self::Ohmic { coupling })
    }

    /// Peaked density in the regime `2Ω² - Γ² > 0` where the residue
    /// evaluation of `Im γ̃` applies; other widths are rejected.
    pub fn peaked(coupling: f64, width: f64, center: f64) -> Result<Self> {
        let sd = Self::peaked_any_width(coupling, width, center)?;
        if 2.0 * center * center - width * width <= 0.0 {
            return Err(invalid(
                "gamma",
                format!("peaked density needs 2Ω² - Γ² > 0 (Ω = {center}, Γ = {width})"),
            ));
        }
        Ok(sd)
    }

    /// Peaked density for any `Γ > 0`. The rational form of `γ̃` is the
    /// analytic continuation of the residue result and coincides with the
    /// damped pseudo-mode embedding for every width, so broad peaks such as
    /// `Γ > √2 Ω` are accepted here.
    pub fn peaked_any_width(coupling: f64, width: f64, center: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(invalid("D", format!("must be >= 0, got {coupling}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid("gamma", format!("must be > 0, got {width}")));
        }
        if !(center.is_finite() && center > 0.0) {
            return Err(invalid("omega", format!("must be > 0, got {center}")));
        }
        Ok(Self::Peaked {
            coupling,
            width,
            center,
        })
    }

    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        Ok(Self::Tabulated(TabulatedDensity::new(samples)?))
    }

    /// `J(ω)`, odd in `ω`.
    pub fn j(&self, omega: f64) -> f64 {
        match self {
            Self::Ohmic { coupling } => coupling * omega,
            Self::Peaked {
                coupling,
                width,
                center,
            } => {
                let d = omega * omega - center * center;
                coupling * coupling * width * omega / (d * d + width * width * omega * omega)
            }
            Self::Tabulated(t) => t.j(omega),
        }
    }

    pub fn gamma_tilde(&self, omega: f64) -> Result<MemoryKernelValue> {
        match self {
            Self::Ohmic { coupling } => Ok(MemoryKernelValue {
                re: *coupling,
                im: 0.0,
            }),
            Self::Peaked {
                coupling,
                width,
                center,
            } => {
                let (d, g, w) = (*coupling, *width, *center);
                let den = (omega * omega - w * w).powi(2) + g * g * omega * omega;
                // J/ω, written without the division so ω = 0 is regular.
                let re = d * d * g / den;
                let im = (g * g + omega * omega - w * w) / (g * w * w) * self.j(omega);
                Ok(MemoryKernelValue { re, im })
            }
            Self::Tabulated(t) => t.gamma_tilde(omega),
        }
    }

    pub fn gamma_tilde_prime(&self, omega: f64) -> Result<Complex64> {
        match self {
            Self::Ohmic { .. } => Ok(Complex64::default()),
            Self::Peaked {
                coupling,
                width,
                center,
            } => {
                let (d, g, w) = (*coupling, *width, *center);
                let den = Complex64::new(w * w - omega * omega, -omega * g);
                let num = Complex64::new(2.0 * omega * g, g * g - w * w - omega * omega);
                Ok(num * (d * d) / (den * den * (w * w)))
            }
            Self::Tabulated(t) => t.gamma_tilde_prime(omega),
        }
    }

    fn coupling_is_zero(&self) -> bool {
        match self {
            Self::Ohmic { coupling } | Self::Peaked { coupling, .. } => *coupling == 0.0,
            Self::Tabulated(t) => t.values.iter().all(|&v| v == 0.0),
        }
    }
}

/// `J(ω)`; see [`SpectralDensity::j`].
pub fn j_omega(sd: &SpectralDensity, omega: f64) -> f64 {
    sd.j(omega)
}

/// `γ̃(ω)`; see [`SpectralDensity::gamma_tilde`].
pub fn gamma_tilde(sd: &SpectralDensity, omega: f64) -> Result<MemoryKernelValue> {
    sd.gamma_tilde(omega)
}

/// `dγ̃/dω`; see [`SpectralDensity::gamma_tilde_prime`].
pub fn gamma_tilde_prime(sd: &SpectralDensity, omega: f64) -> Result<Complex64> {
    sd.gamma_tilde_prime(omega)
}

impl MemoryKernel for SpectralDensity {
    fn gamma_tilde(&self, omega: f64) -> Result<Complex64> {
        SpectralDensity::gamma_tilde(self, omega).map(MemoryKernelValue::to_complex)
    }

    fn gamma_tilde_prime(&self, omega: f64) -> Result<Complex64> {
        SpectralDensity::gamma_tilde_prime(self, omega)
    }

    fn high_frequency_friction(&self) -> f64 {
        match self {
            Self::Ohmic { coupling } => *coupling,
            _ => 0.0,
        }
    }

    fn is_decoupled(&self) -> bool {
        self.coupling_is_zero()
    }

    fn features(&self) -> Vec<f64> {
        match self {
            Self::Ohmic { coupling } => vec![*coupling],
            Self::Peaked { width, center, .. } => {
                vec![*center, (center - width).max(0.0), center + width, *width]
            }
            Self::Tabulated(t) => vec![t.peak_frequency(), t.max_frequency()],
        }
    }

    fn resonances(&self, omega0: f64) -> Vec<Resonance> {
        let a = omega0 * omega0;
        let coeffs: Vec<Complex64> = match self {
            // ω² + iDω - ω0² = 0
            Self::Ohmic { coupling } => vec![
                Complex64::new(-a, 0.0),
                Complex64::new(0.0, *coupling),
                Complex64::new(1.0, 0.0),
            ],
            // (ω0² - ω²) Ω² (Ω² - ω² - iΓω) - iωD² (Γ - iω) = 0
            Self::Peaked {
                coupling,
                width,
                center,
            } => {
                let (d2, g, w2) = (coupling * coupling, *width, center * center);
                vec![
                    Complex64::new(a * w2 * w2, 0.0),
                    Complex64::new(0.0, -a * g * w2 - d2 * g),
                    Complex64::new(-w2 * (a + w2) - d2, 0.0),
                    Complex64::new(0.0, w2 * g),
                    Complex64::new(w2, 0.0),
                ]
            }
            Self::Tabulated(_) => return Vec::new(),
        };
        polynomial_roots(&coeffs)
            .into_iter()
            .map(|z| Resonance {
                center: z.re.abs(),
                width: z.im.abs(),
            })
            .collect()
    }
}

/// Roots of `Σ c_k z^k` (ascending coefficients) by Durand–Kerner iteration
/// followed by Newton polishing.
pub(crate) fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::default(), |acc, c| acc * z + c);
    let deriv = |z: Complex64| {
        monic
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::default(), |acc, (k, c)| acc * z + c * k as f64)
    };
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..1000 {
        let mut shift = 0.0_f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            shift = shift.max(step.norm());
        }
        if shift < 1e-15 * radius {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.norm() > 0.0 {
                *r -= eval(*r) / d;
            }
        }
    }
    roots
}

/// A spectral density given by samples `(ω_k, J_k)` and interpolated by a
/// monotone (Fritsch–Carlson) cubic. Zero outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    omegas: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    pv: QuadratureConfig,
}

impl TabulatedDensity {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(invalid("samples", "need at least 3 samples"));
        }
        let (omegas, values): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        if omegas.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(invalid("samples", "non-finite entry"));
        }
        if omegas[0] != 0.0 || values[0] != 0.0 {
            return Err(invalid("samples", "first sample must be (0, 0) since J(0) = 0"));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("samples", "frequencies must be strictly increasing"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(invalid("samples", "J must be non-negative"));
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        let last = *values.last().unwrap();
        if last > 1e-3 * max {
            return Err(invalid(
                "samples",
                format!("J must decay to zero at the last sample (J_last / J_max = {:e})", last / max),
            ));
        }
        let slopes = pchip_slopes(&omegas, &values);
        Ok(Self {
            omegas,
            values,
            slopes,
            pv: QuadratureConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-15,
                max_subdivisions: 200_000,
                ..QuadratureConfig::default()
            },
        })
    }

    /// Parse a two-column `ω J` text table; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Table {
                    line: i + 1,
                    reason: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Table {
                    line: i + 1,
                    reason: format!("`{s}`: {e}"),
                })
            };
            samples.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(&samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Table {
            line: 0,
            reason: format!("{}: {e}", path.as_ref().display()),
        })?;
        Self::parse(&text)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omegas.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_frequency(&self) -> f64 {
        *self.omegas.last().unwrap()
    }

    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        self.omegas[i]
    }

    fn locate(&self, x: f64) -> usize {
        match self.omegas.binary_search_by(|w| w.total_cmp(&x)) {
            Ok(i) => i.min(self.omegas.len() - 2),
            Err(i) => i - 1,
        }
    }

    fn interpolate(&self, x: f64) -> (f64, f64) {
        if x > self.max_frequency() {
            return (0.0, 0.0);
        }
        let i = self.locate(x);
        let (x0, x1) = (self.omegas[i], self.omegas[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1;
        let slope = (6.0 * s2 - 6.0 * s) / h * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) / h * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        (value, slope)
    }

    /// `J(ω)` with the odd extension to `ω < 0`.
    pub fn j(&self, omega: f64) -> f64 {
        if omega < 0.0 {
            -self.interpolate(-omega).0
        } else {
            self.interpolate(omega).0
        }
    }

    /// `J(ω)/ω`, even in `ω`, with the limit `J'(0)` at the origin.
    pub fn re_gamma(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w == 0.0 {
            self.slopes[0]
        } else {
            self.interpolate(w).0 / w
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let stride = (self.omegas.len() / 128).max(1);
        let mut v: Vec<f64> = self.omegas.iter().step_by(stride).copied().collect();
        v.push(self.peak_frequency());
        v.push(self.max_frequency());
        v
    }

    /// `Im γ̃(ω) = -(2ω/π) P∫_0^∞ (J(ν)/ν) / (ν² - ω²) dν`, the folded form of
    /// the symmetric principal-value integral over the whole line.
    pub fn im_gamma(&self, omega: f64) -> Result<f64> {
        if omega == 0.0 {
            return Ok(0.0);
        }
        if omega < 0.0 {
            return self.im_gamma(-omega).map(|v| -v);
        }
        let top = self.max_frequency();
        im_gamma_principal_value(|nu| self.re_gamma(nu), omega, top, &self.breakpoints(), &self.pv)
    }

    pub fn gamma_tilde(&self, omega: f64) -> Result<MemoryKernelValue> {
        Ok(MemoryKernelValue {
            re: self.re_gamma(omega),
            im: self.im_gamma(omega)?,
        })
    }

    /// Richardson-extrapolated central difference with steps `h` and `h/2`.
    pub fn gamma_tilde_prime(&self, omega: f64) -> Result<Complex64> {
        let h = 1e-3 * omega.abs().max(1.0);
        let central = |h: f64| -> Result<Complex64> {
            let p = self.gamma_tilde(omega + h)?.to_complex();
            let m = self.gamma_tilde(omega - h)?.to_complex();
            Ok((p - m) / (2.0 * h))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        let value = (fine * 4.0 - coarse) / 3.0;
        let spread = (value - fine).norm();
        if spread > 1e-2 * value.norm() + 1e-6 {
            return Err(Error::DerivativeUnstable { omega });
        }
        Ok(value)
    }
}

/// `Im γ̃(ω) = -(2ω/π) P∫_0^∞ (J(ν)/ν) / (ν² - ω²) dν` for a density whose
/// `J(ν)/ν` is given by `re_gamma` and vanishes beyond `support` (which may
/// be infinite).
pub fn im_gamma_principal_value(
    re_gamma: impl Fn(f64) -> f64 + Send + Sync,
    omega: f64,
    support: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if omega == 0.0 {
        return Ok(0.0);
    }
    let w = omega.abs();
    let integrand = Integrand::real(move |nu| re_gamma(nu) / ((nu - w) * (nu + w)))
        .with_breakpoints(breakpoints.iter().copied());
    let pv_failure = |e: Error| Error::PvFailure {
        pole: omega,
        reason: e.to_string(),
    };
    let span = 2.0 * support;
    let value = if w < span {
        principal_value(&integrand, w, 0.0, span, cfg)
            .map_err(pv_failure)?
            .value
            .re
    } else {
        integrate(&integrand, 0.0, support, cfg)
            .map_err(pv_failure)?
            .value
            .re
    };
    Ok(-2.0 * omega / PI * value)
}

/// Fritsch–Carlson slopes with the harmonic-mean rule for interior knots.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

/// Memory kernel of a tabulated density with `Im γ̃` pre-computed on a grid
/// and interpolated, so that response functions can be evaluated without a
/// principal-value integral per frequency.
#[derive(Debug, Clone)]
pub struct InterpolatedKernel {
    density: TabulatedDensity,
    grid: Vec<f64>,
    im: Vec<f64>,
    im_slopes: Vec<f64>,
}

impl InterpolatedKernel {
    /// Sample `Im γ̃` at `points` frequencies spread over `(0, 2 ω_max]`.
    pub fn new(density: TabulatedDensity, points: usize) -> Result<Self> {
        let points = points.max(16);
        let top = 2.0 * density.max_frequency();
        let grid: Vec<f64> = (0..=points)
            .map(|k| top * (k as f64 / points as f64).powi(2))
            .collect();
        let im = grid
            .iter()
            .map(|&w| density.im_gamma(w))
            .collect::<Result<Vec<f64>>>()?;
        let im_slopes = cubic_slopes(&grid, &im);
        Ok(Self {
            density,
            grid,
            im,
            im_slopes,
        })
    }

    pub fn density(&self) -> &TabulatedDensity {
        &self.density
    }

    fn im_and_slope(&self, omega: f64) -> (f64, f64) {
        let w = omega.abs();
        let sign = omega.signum();
        let top = *self.grid.last().unwrap();
        if w >= top {
            // Im γ̃ ~ c/ω beyond the support of J.
            let c = self.im.last().unwrap() * top;
            return (sign * c / w, -c / (w * w));
        }
        let i = match self.grid.binary_search_by(|g| g.total_cmp(&w)) {
            Ok(i) => i.min(self.grid.len() - 2),
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let h = x1 - x0;
        let s = (w - x0) / h;
        let (y0, y1, m0, m1) = (self.im[i], self.im[i + 1], self.im_slopes[i], self.im_slopes[i + 1]);
        let (s2, s3) = (s * s, s * s * s);
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1;
        let d = (6.0 * s2 - 6.0 * s) / h * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) / h * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        (sign * v, d)
    }
}

/// Plain finite-difference (Catmull–Rom style) slopes for a smooth function.
fn cubic_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

impl MemoryKernel for InterpolatedKernel {
    fn gamma_tilde(&self, omega: f64) -> Result<Complex64> {
        Ok(Complex64::new(
            self.density.re_gamma(omega),
            self.im_and_slope(omega).0,
        ))
    }

    fn gamma_tilde_prime(&self, omega: f64) -> Result<Complex64> {
        let w = omega.abs();
        let re_prime = if w == 0.0 {
            0.0
        } else {
            let (j, dj) = self.density.interpolate(w);
            omega.signum() * (dj / w - j / (w * w))
        };
        Ok(Complex64::new(re_prime, self.im_and_slope(omega).1))
    }

    fn is_decoupled(&self) -> bool {
        self.density.values.iter().all(|&v| v == 0.0)
    }

    fn features(&self) -> Vec<f64> {
        vec![self.density.peak_frequency(), self.density.max_frequency()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn peaked() -> SpectralDensity {
        SpectralDensity::peaked(1.0, 0.5, 2.0).unwrap()
    }

    #[test]
    fn ohmic_density_is_linear() {
        let sd = SpectralDensity::ohmic(0.3).unwrap();
        assert_abs_diff_eq!(sd.j(2.0), 0.6, epsilon = 1e-15);
        assert_eq!(sd.j(0.0), 0.0);
        let g = sd.gamma_tilde(5.0).unwrap();
        assert_eq!((g.re, g.im), (0.3, 0.0));
        assert_eq!(sd.gamma_tilde_prime(1.7).unwrap(), Complex64::default());
    }

    #[test]
    fn peaked_density_at_resonance() {
        let sd = peaked();
        assert_abs_diff_eq!(sd.j(2.0), 1.0, epsilon = 1e-15);
        assert_eq!(sd.j(0.0), 0.0);
        let g = sd.gamma_tilde(2.0).unwrap();
        assert_abs_diff_eq!(g.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, 0.125, epsilon = 1e-15);
        assert_eq!(sd.gamma_tilde(0.0).unwrap().im, 0.0);
    }

    #[test]
    fn peaked_requires_root_condition() {
        assert!(SpectralDensity::peaked(1.0, 3.0, 2.0).is_err());
        assert!(SpectralDensity::peaked(1.0, 2.8, 2.0).is_ok());
        assert!(SpectralDensity::ohmic(-1.0).is_err());
    }

    #[test]
    fn parity_of_kernel() {
        let sd = peaked();
        for &w in &[0.1, 0.7, 1.9, 2.0, 3.3, 12.0] {
            let p = sd.gamma_tilde(w).unwrap();
            let m = sd.gamma_tilde(-w).unwrap();
            assert!((p.re - m.re).abs() <= 1e-12 * p.re.abs());
            assert!((p.im + m.im).abs() <= 1e-12 * p.im.abs().max(1e-300));
            assert!(p.re >= 0.0);
            assert_abs_diff_eq!(sd.j(-w), -sd.j(w), epsilon = 1e-15);
        }
    }

    #[test]
    fn peaked_kernel_matches_closed_rational_form() {
        // Im γ̃ = D²ω(Γ²+ω²-Ω²) / (Ω²(Γ²ω² + (ω²-Ω²)²))
        let (d, g, w) = (1.0_f64, 0.5_f64, 2.0_f64);
        let sd = peaked();
        for k in 0..40 {
            let x = -4.0 + 0.21 * k as f64;
            let expected = d * d * x * (g * g + x * x - w * w)
                / (w * w * (g * g * x * x + (x * x - w * w).powi(2)));
            let im = sd.gamma_tilde(x).unwrap().im;
            assert!((im - expected).abs() <= 1e-13 * expected.abs().max(1e-12));
        }
    }

    #[test]
    fn peaked_derivative_at_origin() {
        // Re γ̃ is even (zero slope); Im γ̃ has slope D²(Γ² - Ω²)/Ω⁶, which
        // is negative for Γ < Ω.
        let d = peaked().gamma_tilde_prime(0.0).unwrap();
        assert_abs_diff_eq!(d.re, 0.0, epsilon = 1e-15);
        assert!(d.im.is_finite());
        assert_abs_diff_eq!(d.im, (0.25 - 4.0) / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn peaked_derivative_matches_central_differences() {
        let sd = peaked();
        for &w in &[-2.5, 0.3, 1.3, 2.0, 4.1] {
            let h = 1e-5;
            let fd = (sd.gamma_tilde(w + h).unwrap().to_complex()
                - sd.gamma_tilde(w - h).unwrap().to_complex())
                / (2.0 * h);
            let exact = sd.gamma_tilde_prime(w).unwrap();
            assert!((fd - exact).norm() <= 1e-7_f64.max(1e-5 * exact.norm()), "ω = {w}");
        }
    }

    #[test]
    fn ohmic_resonances_are_damped_oscillator_poles() {
        let sd = SpectralDensity::ohmic(0.2).unwrap();
        let r = MemoryKernel::resonances(&sd, 1.0);
        assert_eq!(r.len(), 2);
        for z in r {
            assert_abs_diff_eq!(z.center, (1.0 - 0.01_f64).sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(z.width, 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn peaked_resonances_are_roots_of_denominator() {
        // Continuation of γ̃ off the real axis: D²(Γ - iz) / (Ω²(Ω² - z² - iΓz)).
        let (d, g, w) = (1.0, 0.5, 2.0);
        let i = Complex64::i();
        let den = |z: Complex64| {
            let kernel = (g - i * z) * (d * d) / ((w * w - z * z - i * z * g) * (w * w));
            1.0 - z * z - i * z * kernel
        };
        let res = MemoryKernel::resonances(&peaked(), 1.0);
        assert_eq!(res.len(), 4);
        for r in res {
            assert!(r.width > 0.0);
            let z = Complex64::new(r.center, -r.width);
            assert!(den(z).norm() < 1e-9, "|den| = {}", den(z).norm());
        }
    }

    #[test]
    fn table_parsing_and_validation() {
        let t = TabulatedDensity::parse("# w J\n0 0\n1 0.5 # peak\n\n2 0.0001\n3 0\n").unwrap();
        assert_abs_diff_eq!(t.j(1.0), 0.5, epsilon = 1e-15);
        assert_eq!(t.j(10.0), 0.0);
        assert_abs_diff_eq!(t.j(-1.0), -0.5, epsilon = 1e-15);
        assert!(matches!(
            TabulatedDensity::parse("0 0\n1 x\n2 0\n"),
            Err(Error::Table { line: 2, .. })
        ));
        assert!(TabulatedDensity::parse("0 0\n2 1\n1 0\n").is_err());
        assert!(TabulatedDensity::parse("0 0\n1 1\n2 0.5\n").is_err());
        assert!(TabulatedDensity::parse("0 0.1\n1 1\n2 0\n").is_err());
    }

    #[test]
    fn monotone_interpolation_does_not_overshoot() {
        let samples: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let w = k as f64 * 0.5;
                (w, if (4.0..=6.0).contains(&w) { 1.0 } else { 0.0 })
            })
            .collect();
        let t = TabulatedDensity::new(&samples).unwrap();
        for k in 0..1000 {
            let v = t.j(k as f64 * 0.01);
            assert!((0.0..=1.0).contains(&v), "overshoot {v}");
        }
    }
}
