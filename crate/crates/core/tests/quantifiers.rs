use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use nonmarkov::quadrature::QuadratureConfig;
use nonmarkov::quantifiers::*;
use nonmarkov::response::*;
use nonmarkov::spectral::SpectralDensity;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[test]
fn ohmic_closed_form_residual_gives_same_n1() {
    let d = 0.6;
    let p = ModelParams::default();
    let sd = SpectralDensity::ohmic(d).unwrap();
    let generic = n1(&p, &sd, &cfg()).unwrap();
    // Sides chosen so that lhs - rhs is the closed-form residual.
    let closed = |w: f64| {
        let c = chi_qq(&p, &sd, w)?;
        let rhs = chi_matrix(&p, &sd, w).map(|m| m * ChiPlus::inverse() * m)?;
        let r = ComplexMatrix2::frequency_structure(w).scale(c * c * d);
        Ok((r + rhs, rhs))
    };
    let (m, diag) = n1_from_sides(&p, &sd, &closed, &cfg()).unwrap();
    assert_eq!(diag.len(), 4);
    for e in Entry::ALL {
        assert_abs_diff_eq!(entry(&m, e), entry(&generic, e), epsilon = 1e-8);
    }
}

#[test]
fn quantifiers_are_deterministic() {
    let p = ModelParams::default();
    let sd = SpectralDensity::peaked(0.8, 0.5, 2.0).unwrap();
    let a = quantify(&p, &sd, Selection::Both, &cfg()).unwrap();
    let b = quantify(&p, &sd, Selection::Both, &cfg()).unwrap();
    assert_eq!(a.n1, b.n1);
    assert_eq!(a.n2, b.n2);
    assert_eq!(a.diagnostics.total_panels(), b.diagnostics.total_panels());
}

#[test]
fn selection_controls_output() {
    let p = ModelParams::default();
    let sd = SpectralDensity::ohmic(0.3).unwrap();
    let only1 = quantify(&p, &sd, Selection::N1, &cfg()).unwrap();
    assert!(only1.n1.is_some() && only1.n2.is_none());
    assert!(only1.diagnostics.covariance.is_none());
    let only2 = quantify(&p, &sd, Selection::N2, &cfg()).unwrap();
    assert!(only2.n1.is_none() && only2.n2.is_some());
    assert!(only2.diagnostics.covariance.is_some());
}

#[test]
fn weak_coupling_quantum_rt_violation_follows_detailed_balance() {
    // For D → 0 both spectra collapse onto ±ω0. The exact spectrum weighs
    // the two lines as e^{x} : 1 while the regression form weighs them
    // equally, so the qq distance tends to a function of x = βħω0 alone.
    for beta in [0.5, 1.0, 2.0] {
        let p = ModelParams { beta, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(1e-3).unwrap();
        let m = n2(&p, &sd, &cfg()).unwrap();
        let x: f64 = beta * p.hbar * p.omega0;
        let ex = x.exp();
        let limit = (1.0 - (1.0 + ex).powi(2) / (2.0 * (1.0 + ex * ex))).sqrt();
        assert_abs_diff_eq!(m[0][0], limit, epsilon = 5e-3);
    }
}

#[test]
fn classical_weak_coupling_is_nearly_markovian() {
    let p = ModelParams { hbar: 0.0, ..ModelParams::default() };
    let sd = SpectralDensity::ohmic(1e-3).unwrap();
    let m = n2(&p, &sd, &cfg()).unwrap();
    assert!(m[0][0] < 0.05 && m[1][1] < 0.05, "{m:?}");
}

#[test]
fn distance_error_cases() {
    let zero = nonmarkov::quadrature::Integrand::real(|_| 0.0);
    let g = nonmarkov::quadrature::Integrand::real(|w| 1.0 / (1.0 + w * w));
    assert!(distance(&zero, &g, &cfg()).is_err());
    let est = distance_estimate(&g, &g, &cfg()).unwrap();
    assert!(est.value < 1e-6);
    assert!(est.panels > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_ignores_complex_rescaling(re in -3.0f64..3.0, im in -3.0f64..3.0, a in 0.2f64..2.0) {
        prop_assume!(re.hypot(im) > 1e-2);
        let lambda = Complex64::new(re, im);
        let f = move |w: f64| Complex64::new(0.0, w) / (a * a + w * w);
        let g = move |w: f64| Complex64::new(1.0, 0.0) / (1.0 + w.powi(4));
        let q = QuadratureConfig { half_width: 400.0, ..cfg() };
        let base = distance(
            &nonmarkov::quadrature::Integrand::new(f),
            &nonmarkov::quadrature::Integrand::new(g),
            &q,
        ).unwrap();
        let scaled = distance(
            &nonmarkov::quadrature::Integrand::new(move |w| f(w) * lambda),
            &nonmarkov::quadrature::Integrand::new(move |w| g(w) * lambda.conj()),
            &q,
        ).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn ohmic_n1_is_bounded_and_symmetric(d in 0.01f64..3.0, w0 in 0.5f64..2.0) {
        let p = ModelParams { omega0: w0, ..ModelParams::default() };
        let sd = SpectralDensity::ohmic(d).unwrap();
        let m = n1(&p, &sd, &cfg()).unwrap();
        for e in Entry::ALL {
            prop_assert!((0.0..=1.0).contains(&entry(&m, e)));
        }
        prop_assert!((m[0][1] - m[1][0]).abs() < 1e-8);
    }
}
