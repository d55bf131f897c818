use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use nonmarkov::quadrature::*;
use nonmarkov::quantifiers::distance;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

/// Composite trapezoid on a uniform grid; spectrally accurate for smooth,
/// rapidly decaying integrands.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

/// `Shi(1) = Σ 1 / ((2k+1) (2k+1)!)`.
fn shi_one() -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 0..20 {
        let n = 2 * k + 1;
        if k > 0 {
            fact *= ((n - 1) * n) as f64;
        }
        sum += 1.0 / (n as f64 * fact);
    }
    sum
}

#[test]
fn half_line_gaussian_against_trapezoid() {
    let f = Integrand::real(|x| (-x * x).exp());
    let v = integrate(&f, 0.0, f64::INFINITY, &cfg()).unwrap().value.re;
    let oracle = trapezoid(|x| (-x * x).exp(), 0.0, 12.0, 20_000);
    assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
    assert_abs_diff_eq!(v, PI.sqrt() / 2.0, epsilon = 1e-12);
}

#[test]
fn line_integrals() {
    let g = Integrand::real(|w| (-w * w).exp()).with_parity(Parity::Even).unwrap();
    assert_abs_diff_eq!(integrate_line(&g, &cfg()).unwrap().value.re, PI.sqrt(), epsilon = 1e-12);
    let odd = Integrand::real(|w| w * (-w * w).exp()).with_parity(Parity::Odd).unwrap();
    assert_eq!(integrate_line(&odd, &cfg()).unwrap().value, Complex64::default());
    let lorentz = Integrand::real(|w| 1.0 / (1.0 + w * w));
    let r = integrate_line(&lorentz, &cfg()).unwrap();
    assert_abs_diff_eq!(r.value.re, PI, epsilon = 1e-6);
    assert!(r.tail.re > 0.0);
}

#[test]
fn principal_values() {
    let c = cfg();
    let inv = Integrand::real(|x| 1.0 / x);
    assert_abs_diff_eq!(principal_value(&inv, 0.0, -1.0, 1.0, &c).unwrap().value.re, 0.0, epsilon = 1e-12);
    let shifted = Integrand::real(|x| 1.0 / (x - 1.0));
    let v = principal_value(&shifted, 1.0, -2.0, 2.0, &c).unwrap().value.re;
    assert_abs_diff_eq!(v, -(3f64.ln()), epsilon = 1e-9);
    let exp = Integrand::real(|x| x.exp() / x);
    let v = principal_value(&exp, 0.0, -1.0, 1.0, &c).unwrap().value.re;
    assert_abs_diff_eq!(v, 2.0 * shi_one(), epsilon = 1e-9);
}

#[test]
fn even_over_x_has_vanishing_principal_value() {
    for a in [0.5, 2.0, 7.0] {
        let f = Integrand::real(|x| (x * x).cos() / x);
        let v = principal_value(&f, 0.0, -a, a, &cfg()).unwrap().value.re;
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }
}

#[test]
fn fourier_transforms() {
    let c = cfg();
    let f = Integrand::real(|w| w * (-w).exp());
    assert_abs_diff_eq!(sine_transform(&f, 1.0, &c).unwrap(), 1.0 / PI, epsilon = 1e-10);
    let l = Integrand::real(|w| 1.0 / (1.0 + w * w));
    assert_eq!(sine_transform(&l, 0.0, &c).unwrap(), 0.0);
    // brute-force oracle on a long window; the integrand decays exponentially
    let t = 2.3;
    let brute = 2.0 / PI * trapezoid(|w| w * (-w).exp() * (w * t).sin(), 0.0, 60.0, 200_000);
    assert_abs_diff_eq!(sine_transform(&f, t, &c).unwrap(), brute, epsilon = 1e-9);
    // (2/π) ∫ cos(ωt)/(1+ω²) = e^{-t}
    assert_abs_diff_eq!(cosine_transform(&l, 1.5, &c).unwrap(), (-1.5f64).exp(), epsilon = 1e-8);
}

#[test]
fn transforms_are_linear() {
    let c = cfg();
    let f = Integrand::real(|w| 1.0 / (1.0 + w * w).powi(2));
    let g = Integrand::real(|w| 3.5 / (1.0 + w * w).powi(2));
    for t in [0.3, 1.0, 4.0] {
        let a = sine_transform(&f, t, &c).unwrap();
        let b = sine_transform(&g, t, &c).unwrap();
        assert_abs_diff_eq!(3.5 * a, b, epsilon = 1e-12);
    }
}

#[test]
fn inner_products() {
    let c = cfg();
    let f = Integrand::real(|w| (-w * w / 2.0).exp()).with_parity(Parity::Even).unwrap();
    assert_abs_diff_eq!(inner_product_l2(&f, &f, &c).unwrap().value.re, PI.sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(norm_l2(&f, &c).unwrap(), PI.sqrt().sqrt(), epsilon = 1e-12);
    let g = Integrand::real(|w| w * (-w * w / 2.0).exp()).with_parity(Parity::Odd).unwrap();
    assert_eq!(inner_product_l2(&f, &g, &c).unwrap().value, Complex64::default());
}

#[test]
fn parseval_distance() {
    let c = cfg();
    // time-domain pair
    let f = Integrand::real(|t| (-t * t / 2.0).exp());
    let g = Integrand::real(|t| t * (-t * t / 2.0).exp());
    let dt = distance(&f, &g, &c).unwrap();
    // their Fourier transforms, √(2π)e^{-ω²/2} and i√(2π)ω e^{-ω²/2}
    let s = (2.0 * PI).sqrt();
    let ft = Integrand::real(move |w| s * (-w * w / 2.0).exp());
    let gt = Integrand::new(move |w| Complex64::new(0.0, s * w * (-w * w / 2.0).exp()));
    assert_abs_diff_eq!(dt, distance(&ft, &gt, &c).unwrap(), epsilon = 1e-6);

    // a pair with non-trivial overlap: a shift is a phase in frequency space
    let h = Integrand::real(|t| (-(t - 1.0) * (t - 1.0) / 2.0).exp());
    let ht = Integrand::new(move |w| Complex64::from_polar(s * (-w * w / 2.0).exp(), w));
    let d_time = distance(&f, &h, &c).unwrap();
    let d_freq = distance(&ft, &ht, &c).unwrap();
    assert_abs_diff_eq!(d_time, (1.0 - (-0.5f64).exp()).sqrt(), epsilon = 1e-6);
    assert_abs_diff_eq!(d_time, d_freq, epsilon = 1e-6);
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let f = Integrand::new(|w| Complex64::new(1.0, w) / (1.0 + w.powi(4)));
    let a = integrate_line(&f, &cfg()).unwrap();
    let b = integrate_line(&f, &cfg()).unwrap();
    assert_eq!(a, b);
    let s1 = sine_transform(&f, 0.7, &cfg()).unwrap();
    let s2 = sine_transform(&f, 0.7, &cfg()).unwrap();
    assert_eq!(s1.to_bits(), s2.to_bits());
}

#[test]
fn invalid_configuration_is_rejected() {
    let f = Integrand::real(|x| x);
    let bad = QuadratureConfig { rel_tol: 0.0, ..cfg() };
    assert!(integrate(&f, 0.0, 1.0, &bad).is_err());
    let bad = QuadratureConfig { panels_per_period: 0, ..cfg() };
    assert!(integrate(&f, 0.0, 1.0, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_product_is_conjugate_symmetric(a in -2.0f64..2.0, b in 0.3f64..3.0, c in -1.0f64..1.0) {
        let f = Integrand::new(move |w| Complex64::new(1.0, a * w) * (-b * w * w).exp());
        let g = Integrand::new(move |w| Complex64::new(c, w) * (-(w - c) * (w - c)).exp());
        let fg = inner_product_l2(&f, &g, &cfg()).unwrap().value;
        let gf = inner_product_l2(&g, &f, &cfg()).unwrap().value;
        prop_assert!((fg - gf.conj()).norm() < 1e-10 * (1.0 + fg.norm()));
    }

    #[test]
    fn distance_is_scale_invariant(re in -5.0f64..5.0, im in -5.0f64..5.0, shift in -1.0f64..1.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let lambda = Complex64::new(re, im);
        let f = move |w: f64| Complex64::new(1.0, w) / (1.0 + w.powi(4));
        let g = move |w: f64| (-(w - shift) * (w - shift)).exp().into();
        let base = distance(&Integrand::new(f), &Integrand::new(g), &cfg()).unwrap();
        let scaled = distance(
            &Integrand::new(move |w| lambda * f(w)),
            &Integrand::new(move |w| lambda * g(w)),
            &cfg(),
        )
        .unwrap();
        prop_assert!((base - scaled).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn principal_value_of_simple_pole(pole in -0.8f64..0.8, a in 1.0f64..3.0) {
        // P∫_{-a}^{a} dx/(x - x0) = ln((a - x0)/(a + x0))
        let f = Integrand::real(move |x| 1.0 / (x - pole));
        let v = principal_value(&f, pole, -a, a, &cfg()).unwrap().value.re;
        prop_assert!((v - ((a - pole) / (a + pole)).ln()).abs() < 1e-8);
    }
}
