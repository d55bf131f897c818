//! Scale-invariant L2 distance between response-derived functions and the
//! two non-Markovianity quantifiers built on it:
//!
//! * `N1_ij = 𝒟[-i χ̃'_ij, (χ̃ χ₊⁻¹ χ̃)_ij]`, violation of divisibility of
//!   the mean-value propagator;
//! * `N2_ij = 𝒟[C̃_ij, C̃^RT_ij]`, violation of the regression theorem.
//!
//! Both are computed on the frequency axis; by Parseval the distance is the
//! same as in the time domain.

use rayon::prelude::*;

use crate::correlations::{covariance0, exact_spectrum, rt_spectrum, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::quadrature::{inner_product_l2, ErrorSlot, Integrand, LineIntegral, Parity, QuadratureConfig};
use crate::response::{divisibility_sides, feature_points, ComplexMatrix2, Entry, ModelParams, RealMatrix2};
use crate::spectral::MemoryKernel;

/// Half-width of the window in which `|⟨f,g⟩|² / (‖f‖²‖g‖²) > 1` is
/// attributed to rounding and clamped.
pub const CLAMP_WINDOW: f64 = 1e-12;

/// Norms below this are treated as identically zero.
pub const ZERO_NORM: f64 = 1e-14;

/// A distance together with the quadrature bookkeeping behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    /// Largest tail-extrapolation uncertainty of the three inner products,
    /// relative to the corresponding integral.
    pub relative_tail: f64,
    /// Total number of quadrature panels.
    pub panels: usize,
}

fn relative_tail(i: &LineIntegral) -> f64 {
    if i.value.norm() > 0.0 {
        i.tail_error / i.value.norm()
    } else {
        0.0
    }
}

/// `𝒟(f, g) = √(1 - |⟨f,g⟩|² / (‖f‖² ‖g‖²))` with diagnostics.
pub fn distance_estimate(f: &Integrand, g: &Integrand, cfg: &QuadratureConfig) -> Result<DistanceEstimate> {
    let ff = inner_product_l2(f, f, cfg)?;
    let gg = inner_product_l2(g, g, cfg)?;
    let fg = inner_product_l2(f, g, cfg)?;
    let (nf, ng) = (ff.value.re, gg.value.re);
    if nf.max(0.0).sqrt() < ZERO_NORM || ng.max(0.0).sqrt() < ZERO_NORM {
        return Err(Error::ZeroNorm);
    }
    let ratio = fg.value.norm_sqr() / (nf * ng);
    let overlap = if ratio > 1.0 + CLAMP_WINDOW {
        return Err(Error::CauchySchwarz { deficit: 1.0 - ratio });
    } else {
        ratio.min(1.0)
    };
    Ok(DistanceEstimate {
        value: (1.0 - overlap).max(0.0).sqrt(),
        relative_tail: relative_tail(&ff).max(relative_tail(&gg)).max(relative_tail(&fg)),
        panels: ff.panels + gg.panels + fg.panels,
    })
}

/// `𝒟(f, g) ∈ [0, 1]`; zero iff `g` is a complex multiple of `f`.
pub fn distance(f: &Integrand, g: &Integrand, cfg: &QuadratureConfig) -> Result<f64> {
    distance_estimate(f, g, cfg).map(|d| d.value)
}

/// Quadrature diagnostics for one entry of one quantifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryDiagnostics {
    pub entry: Entry,
    pub relative_tail: f64,
    pub panels: usize,
}

/// Diagnostics attached to a [`QuantifierReport`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub n1: Vec<EntryDiagnostics>,
    pub n2: Vec<EntryDiagnostics>,
    pub half_width: f64,
    /// Covariances used for the regression-theorem prediction.
    pub covariance: Option<CovarianceMatrix>,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub fn max_relative_tail(&self) -> f64 {
        self.n1
            .iter()
            .chain(&self.n2)
            .map(|d| d.relative_tail)
            .fold(0.0, f64::max)
    }

    pub fn total_panels(&self) -> usize {
        self.n1.iter().chain(&self.n2).map(|d| d.panels).sum()
    }

    pub fn cutoff_sensitive(&self) -> bool {
        self.covariance.is_some_and(|c| c.cutoff_sensitive)
    }
}

/// Both quantifiers with their diagnostics. Entries are ordered
/// `[[qq, qp], [pq, pp]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierReport {
    pub n1: Option<RealMatrix2>,
    pub n2: Option<RealMatrix2>,
    pub diagnostics: Diagnostics,
}

fn get(m: &RealMatrix2, e: Entry) -> f64 {
    match e {
        Entry::QQ => m[0][0],
        Entry::QP => m[0][1],
        Entry::PQ => m[1][0],
        Entry::PP => m[1][1],
    }
}

/// Read one entry of a quantifier matrix.
pub fn entry(m: &RealMatrix2, e: Entry) -> f64 {
    get(m, e)
}

type Sides<'a> = dyn Fn(f64) -> Result<(ComplexMatrix2, ComplexMatrix2)> + Send + Sync + 'a;

/// Entrywise distance between the two matrix-valued functions returned by
/// `sides`.
fn matrix_distance(
    quantifier: &'static str,
    sides: &Sides,
    parity: Parity,
    features: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(RealMatrix2, Vec<EntryDiagnostics>)> {
    let results: Vec<(Entry, Result<DistanceEstimate>)> = Entry::ALL
        .par_iter()
        .map(|&e| {
            let slot = ErrorSlot::default();
            let side = |left: bool| {
                let slot = &slot;
                Integrand::new(move |w| {
                    slot.unwrap_or_nan(sides(w).map(|(l, r)| if left { l.get(e) } else { r.get(e) }))
                })
                .with_breakpoints(features.iter().copied())
            };
            let r = (|| {
                let f = side(true).with_parity(parity)?;
                let g = side(false).with_parity(parity)?;
                distance_estimate(&f, &g, cfg)
            })();
            (e, slot.resolve(r))
        })
        .collect();
    let mut m = [[0.0; 2]; 2];
    let mut diags = Vec::with_capacity(4);
    for (e, r) in results {
        let d = r.map_err(|source| Error::Entry {
            quantifier,
            entry: e.label(),
            source: Box::new(source),
        })?;
        let (i, j) = match e {
            Entry::QQ => (0, 0),
            Entry::QP => (0, 1),
            Entry::PQ => (1, 0),
            Entry::PP => (1, 1),
        };
        m[i][j] = d.value;
        diags.push(EntryDiagnostics {
            entry: e,
            relative_tail: d.relative_tail,
            panels: d.panels,
        });
    }
    Ok((m, diags))
}

/// `N1` from caller-supplied sides `(-i χ̃', χ̃ χ₊⁻¹ χ̃)`; lets closed-form
/// residuals be checked against the generic path.
pub fn n1_from_sides<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    sides: &Sides,
    cfg: &QuadratureConfig,
) -> Result<(RealMatrix2, Vec<EntryDiagnostics>)> {
    if k.is_decoupled() {
        return Ok(([[0.0; 2]; 2], Vec::new()));
    }
    matrix_distance("n1", sides, Parity::Hermitian, &feature_points(p, k), cfg)
}

/// Divisibility quantifier `N1`. Closed dynamics (zero coupling) is
/// Markovian by convention and returns the zero matrix.
pub fn n1<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, cfg: &QuadratureConfig) -> Result<RealMatrix2> {
    n1_with_diagnostics(p, k, cfg).map(|r| r.0)
}

pub fn n1_with_diagnostics<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    cfg: &QuadratureConfig,
) -> Result<(RealMatrix2, Vec<EntryDiagnostics>)> {
    p.validate()?;
    n1_from_sides(p, k, &|w| divisibility_sides(p, k, w), cfg)
}

/// Regression-theorem quantifier `N2` for given equilibrium covariances.
pub fn n2_with_covariance<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    c0: &CovarianceMatrix,
    cfg: &QuadratureConfig,
) -> Result<(RealMatrix2, Vec<EntryDiagnostics>)> {
    p.validate()?;
    if k.is_decoupled() {
        return Ok(([[0.0; 2]; 2], Vec::new()));
    }
    // The quantum spectrum is not symmetric in ω (detailed balance).
    let parity = if p.is_classical() {
        Parity::Hermitian
    } else {
        Parity::None
    };
    let sides = |w: f64| Ok((exact_spectrum(p, k, w)?, rt_spectrum(p, k, w, c0)?));
    matrix_distance("n2", &sides, parity, &feature_points(p, k), cfg)
}

/// Regression-theorem quantifier `N2`.
pub fn n2<K: MemoryKernel + ?Sized>(p: &ModelParams, k: &K, cfg: &QuadratureConfig) -> Result<RealMatrix2> {
    let c0 = covariance0(p, k, cfg)?;
    n2_with_covariance(p, k, &c0, cfg).map(|r| r.0)
}

/// Which quantifiers to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    N1,
    N2,
    #[default]
    Both,
}

impl Selection {
    pub fn wants_n1(self) -> bool {
        matches!(self, Selection::N1 | Selection::Both)
    }

    pub fn wants_n2(self) -> bool {
        matches!(self, Selection::N2 | Selection::Both)
    }
}

/// Evaluate the selected quantifiers with diagnostics.
pub fn quantify<K: MemoryKernel + ?Sized>(
    p: &ModelParams,
    k: &K,
    which: Selection,
    cfg: &QuadratureConfig,
) -> Result<QuantifierReport> {
    p.validate()?;
    let mut diagnostics = Diagnostics {
        half_width: cfg.half_width,
        ..Diagnostics::default()
    };
    if k.is_decoupled() {
        diagnostics
            .notes
            .push("zero coupling: closed dynamics, quantifiers defined as 0".into());
    }
    let n1 = if which.wants_n1() {
        let (m, d) = n1_with_diagnostics(p, k, cfg)?;
        diagnostics.n1 = d;
        Some(m)
    } else {
        None
    };
    let n2 = if which.wants_n2() {
        let c0 = covariance0(p, k, cfg)?;
        if c0.cutoff_sensitive {
            diagnostics.notes.push(format!(
                "c_pp changes by {:.2}% when the cutoff is doubled",
                100.0 * c0.cutoff_change
            ));
        }
        diagnostics.covariance = Some(c0);
        let (m, d) = n2_with_covariance(p, k, &c0, cfg)?;
        diagnostics.n2 = d;
        Some(m)
    } else {
        None
    };
    if let Some(w) = p.cutoff_warning() {
        if which.wants_n2() {
            diagnostics.notes.push(w);
        }
    }
    Ok(QuantifierReport { n1, n2, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralDensity;
    use num_complex::Complex64;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn gauss() -> Integrand<'static> {
        Integrand::real(|w| (-w * w / 2.0).exp())
    }

    #[test]
    fn distance_basic_identities() {
        let f = gauss();
        assert!(distance(&f, &gauss(), &cfg()).unwrap() < 1e-7);
        let lambda = Complex64::new(3.0, -2.0);
        let g = Integrand::new(move |w| lambda * (-w * w / 2.0).exp());
        assert!(distance(&f, &g, &cfg()).unwrap() < 1e-7);
        let h = Integrand::real(|w| w * (-w * w / 2.0).exp());
        assert!((distance(&f, &h, &cfg()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function_is_reported() {
        let z = Integrand::real(|_| 0.0);
        assert_eq!(distance(&gauss(), &z, &cfg()), Err(Error::ZeroNorm));
    }

    #[test]
    fn zero_coupling_is_markovian() {
        let p = ModelParams::default();
        for sd in [
            SpectralDensity::ohmic(0.0).unwrap(),
            SpectralDensity::peaked(0.0, 0.3, 1.0).unwrap(),
        ] {
            let r = quantify(&p, &sd, Selection::Both, &cfg()).unwrap();
            assert_eq!(r.n1, Some([[0.0; 2]; 2]));
            assert_eq!(r.n2, Some([[0.0; 2]; 2]));
        }
    }

    #[test]
    fn ohmic_n1_is_symmetric_and_bounded() {
        let sd = SpectralDensity::ohmic(0.5).unwrap();
        let m = n1(&ModelParams::default(), &sd, &cfg()).unwrap();
        assert!((m[0][1] - m[1][0]).abs() < 1e-8, "{m:?}");
        for row in m {
            for v in row {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!(m[0][0] > 0.0);
    }

    #[test]
    fn classical_rt_failure() {
        let p = ModelParams { hbar: 0.0, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(0.5).unwrap();
        let m = n2(&p, &sd, &cfg()).unwrap();
        assert!(m[0][1] > 0.05, "{m:?}");
    }
}
