use approx::{assert_abs_diff_eq, assert_relative_eq};
use num_complex::Complex64;
use proptest::prelude::*;

use nonmarkov::quadrature::QuadratureConfig;
use nonmarkov::spectral::*;

fn tabulate(sd: &SpectralDensity, top: f64, n: usize) -> TabulatedDensity {
    let samples: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let w = top * k as f64 / n as f64;
            (w, sd.j(w))
        })
        .collect();
    TabulatedDensity::new(&samples).unwrap()
}

#[test]
fn ohmic_examples() {
    let sd = SpectralDensity::ohmic(0.3).unwrap();
    assert_eq!(j_omega(&sd, 2.0), 0.6);
    assert_eq!(j_omega(&sd, -2.0), -0.6);
    let g = gamma_tilde(&sd, 5.0).unwrap();
    assert_eq!((g.re, g.im), (0.3, 0.0));
    assert_eq!(gamma_tilde_prime(&sd, 5.0).unwrap(), Complex64::default());
    assert!(SpectralDensity::ohmic(-0.1).is_err());
    assert!(SpectralDensity::ohmic(f64::NAN).is_err());
}

#[test]
fn peaked_examples() {
    let sd = SpectralDensity::peaked(1.0, 0.5, 2.0).unwrap();
    // on resonance J = D²/(Γ Ω), Re γ̃ = J/Ω
    assert_relative_eq!(j_omega(&sd, 2.0), 1.0, max_relative = 1e-15);
    let g = gamma_tilde(&sd, 2.0).unwrap();
    assert_relative_eq!(g.re, 0.5, max_relative = 1e-15);
    // Im γ̃(Ω) = Γ² J(Ω) / (Γ Ω²)
    assert_relative_eq!(g.im, 0.125, max_relative = 1e-14);
    // γ̃(0) = D² Γ / Ω⁴, real
    let g0 = gamma_tilde(&sd, 0.0).unwrap();
    assert_relative_eq!(g0.re, 0.03125, max_relative = 1e-15);
    assert_eq!(g0.im, 0.0);
}

#[test]
fn width_regimes() {
    assert!(SpectralDensity::peaked(1.0, 3.0, 2.0).is_err());
    assert!(SpectralDensity::peaked_any_width(1.0, 3.0, 2.0).is_ok());
    assert!(SpectralDensity::peaked_any_width(1.0, 0.0, 2.0).is_err());
    assert!(SpectralDensity::peaked_any_width(1.0, 1.0, -2.0).is_err());
}

#[test]
fn derivative_against_central_difference() {
    let sd = SpectralDensity::peaked(0.8, 0.6, 1.5).unwrap();
    let w = 1.3;
    let h = 1e-5;
    let fd = (sd.gamma_tilde(w + h).unwrap().to_complex() - sd.gamma_tilde(w - h).unwrap().to_complex())
        / (2.0 * h);
    let an = gamma_tilde_prime(&sd, w).unwrap();
    assert!((fd - an).norm() < 1e-7, "{fd} vs {an}");
}

#[test]
fn im_gamma_from_principal_value_matches_closed_form() {
    let cfg = QuadratureConfig {
        rel_tol: 1e-12,
        max_subdivisions: 200_000,
        ..QuadratureConfig::default()
    };
    let sd = SpectralDensity::peaked(0.9, 0.7, 1.2).unwrap();
    let re = |w: f64| sd.gamma_tilde(w).unwrap().re;
    for w in [0.0, 0.4, 1.2, 2.5, 9.0] {
        let v = im_gamma_principal_value(re, w, f64::INFINITY, &[1.2, 0.5, 1.9], &cfg).unwrap();
        assert_abs_diff_eq!(v, sd.gamma_tilde(w).unwrap().im, epsilon = 1e-8);
    }
}

#[test]
fn tabulated_peaked_reproduces_analytic_kernel() {
    let sd = SpectralDensity::peaked(1.0, 0.5, 2.0).unwrap();
    let table = tabulate(&sd, 100.0, 20_000);
    for w in [0.3, 1.0, 1.9, 2.0, 2.6, 5.0] {
        let exact = sd.gamma_tilde(w).unwrap();
        assert_relative_eq!(table.j(w), sd.j(w), max_relative = 1e-5);
        assert_relative_eq!(table.re_gamma(w), exact.re, max_relative = 1e-5);
        // truncating J at ω = 100 misses a tail of order D²Γ/100³
        assert_abs_diff_eq!(table.im_gamma(w).unwrap(), exact.im, epsilon = 1e-4);
    }
}

#[test]
fn interpolated_kernel_tracks_tabulated_density() {
    let sd = SpectralDensity::peaked(1.0, 0.5, 2.0).unwrap();
    let table = tabulate(&sd, 60.0, 6000);
    let kernel = InterpolatedKernel::new(table.clone(), 1500).unwrap();
    for w in [0.2, 1.7, 2.0, 3.3] {
        let direct = table.gamma_tilde(w).unwrap().to_complex();
        let fast = MemoryKernel::gamma_tilde(&kernel, w).unwrap();
        assert!((direct - fast).norm() < 1e-4 * (1.0 + direct.norm()), "{w}: {direct} {fast}");
        // odd imaginary part
        let neg = MemoryKernel::gamma_tilde(&kernel, -w).unwrap();
        assert_abs_diff_eq!(neg.im, -fast.im, epsilon = 1e-15);
    }
    assert!(!kernel.is_decoupled());
}

#[test]
fn table_parser_reports_lines() {
    let err = TabulatedDensity::parse("0 0\n1 0.5\nbad row here\n").unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
    let ok = TabulatedDensity::parse("# w J\n0 0\n1 1 # peak\n2 0.5\n3 0\n").unwrap();
    assert_eq!(ok.samples().count(), 4);
    assert_eq!(ok.peak_frequency(), 1.0);
    assert_eq!(ok.max_frequency(), 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_parity(d in 0.0f64..3.0, g in 0.05f64..5.0, c in 0.2f64..4.0, w in -20.0f64..20.0) {
        let sd = SpectralDensity::peaked_any_width(d, g, c).unwrap();
        let a = sd.gamma_tilde(w).unwrap();
        let b = sd.gamma_tilde(-w).unwrap();
        prop_assert_eq!(a.re, b.re);
        prop_assert!((a.im + b.im).abs() <= 1e-15 * (1.0 + a.im.abs()));
        prop_assert!(a.re >= 0.0);
        prop_assert!((sd.j(w) + sd.j(-w)).abs() <= 1e-15 * (1.0 + sd.j(w).abs()));
    }

    #[test]
    fn derivative_is_consistent(d in 0.1f64..2.0, g in 0.1f64..2.0, c in 0.5f64..3.0, w in 0.05f64..6.0) {
        let sd = SpectralDensity::peaked_any_width(d, g, c).unwrap();
        let h = 1e-6 * (1.0 + w);
        let fd = (sd.gamma_tilde(w + h).unwrap().to_complex()
            - sd.gamma_tilde(w - h).unwrap().to_complex()) / (2.0 * h);
        let an = sd.gamma_tilde_prime(w).unwrap();
        prop_assert!((fd - an).norm() < 1e-5 * (1.0 + an.norm()), "{} vs {}", fd, an);
    }
}
