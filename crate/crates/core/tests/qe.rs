mod common;

use std::f64::consts::PI;

use common::{adaptive_simpson, series_expm, with_spectrum};
use fdr_core::qe::{fit_linear_ode, mat_exp};
use fdr_core::{QeFunction, QeTerm};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn rotation_generator() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

fn cosine() -> QeFunction {
    QeFunction::new(rotation_generator(), DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])).unwrap()
}

fn central_fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn state_samples(a: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64, h: f64) -> Vec<(f64, DVector<f64>)> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n)
        .map(|k| {
            let x = lo + h * k as f64;
            (x, mat_exp(a, x).unwrap() * b)
        })
        .collect()
}

#[test]
fn rotation_by_pi_matches_series() {
    let e = mat_exp(&rotation_generator(), PI).unwrap();
    let oracle = series_expm(&rotation_generator(), PI);
    assert!((&e - &oracle).amax() <= 1e-12 * oracle.amax());
    assert!((&e + DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
}

#[test]
fn eval_examples() {
    assert_eq!(QeFunction::constant(1.0).eval(3.2).unwrap(), 1.0);
    assert_eq!(QeFunction::scalar_exp(-1.0, 1.0).eval(0.0).unwrap(), 1.0);
    let oracle = series_expm(&rotation_generator(), PI / 3.0)[(0, 0)];
    let v = cosine().eval(PI / 3.0).unwrap();
    assert!((v - oracle).abs() < 1e-14);
    assert!((v - 0.5).abs() < 1e-14);
}

#[test]
fn derivative_examples() {
    let d = QeFunction::constant(2.0).derivative();
    assert_eq!(d.eval(1.3).unwrap(), 0.0);
    assert_eq!(QeFunction::scalar_exp(-1.0, 1.0).derivative().eval(0.0).unwrap(), -1.0);

    let f = cosine();
    let d = f.derivative();
    assert_eq!(d.generator(), f.generator());
    assert_eq!(d.initial(), f.initial());
    let v = d.eval(PI / 2.0).unwrap();
    let fd = central_fd(|x| f.eval(x).unwrap(), PI / 2.0, 1e-6);
    assert!((v - fd).abs() <= 1e-8);
    assert!((v + 1.0).abs() < 1e-14);
}

#[test]
fn integral_examples() {
    assert!((QeFunction::constant(1.0).integral(0.0, 5.0).unwrap() - 5.0).abs() < 1e-14);
    let e = QeFunction::scalar_exp(-1.0, 1.0).integral(0.0, 30.0).unwrap();
    assert!((e - (1.0 - (-30f64).exp())).abs() < 1e-14);
    let f = cosine();
    let oracle = adaptive_simpson(&|x| f.eval(x).unwrap(), 0.0, PI, 1e-13);
    let v = f.integral(0.0, PI).unwrap();
    assert!((v - oracle).abs() <= 1e-10);
    assert!(v.abs() < 1e-14);
}

#[test]
fn fit_examples() {
    let fit = fit_linear_ode(&state_samples(&DMatrix::from_element(1, 1, -1.0), &DVector::from_element(1, 1.0), 0.0, 2.0, 1e-2))
        .unwrap();
    assert!(fit.residual <= 1e-6);
    // the difference quotient of e^{-x} is sinh(h)/h times the value
    assert!((fit.generator[(0, 0)] + 1.0).abs() <= 1e-4 / 6.0 * 1.01);

    let constant: Vec<(f64, DVector<f64>)> = (0..50).map(|k| (k as f64 * 0.1, DVector::from_element(1, 2.5))).collect();
    let fit = fit_linear_ode(&constant).unwrap();
    assert_eq!(fit.generator[(0, 0)], 0.0);
    assert!(fit.residual <= 1e-12);

    let fit = fit_linear_ode(&state_samples(&rotation_generator(), &DVector::from_vec(vec![1.0, 0.0]), 0.0, 2.0, 1e-2))
        .unwrap();
    assert!((&fit.generator - rotation_generator()).amax() <= 1e-4);
    assert!(fit.residual <= 1e-6);
    assert!(!fit.rank_deficient);
}

#[test]
fn terms_round_trip_through_json() {
    let f = QeFunction::from_terms(&[
        QeTerm { alpha: -0.5, omega: 2.0, p: vec![1.0, -0.3], q: vec![0.0, 0.2] },
        QeTerm { alpha: 0.0, omega: 0.0, p: vec![0.7], q: vec![] },
    ])
    .unwrap();
    for &x in &[0.0f64, 0.4, 1.7, 5.0] {
        let direct = (-0.5 * x).exp() * ((1.0 - 0.3 * x) * (2.0 * x).cos() + 0.2 * x * (2.0 * x).sin()) + 0.7;
        assert!((f.eval(x).unwrap() - direct).abs() < 1e-13, "x = {x}");
    }
    let text = serde_json::to_string(&f).unwrap();
    let back: QeFunction = serde_json::from_str(&text).unwrap();
    assert_eq!(back, f);
}

fn qe_strategy() -> impl Strategy<Value = QeFunction> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-2.0f64..0.5, n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-2.0f64..2.0, n),
                prop::collection::vec(-2.0f64..2.0, n),
            )
        })
        .prop_map(|(eig, noise, b, c)| {
            QeFunction::new(with_spectrum(&eig, &noise, 0.3), DVector::from_vec(b), DVector::from_vec(c)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_matches_series(n in 1usize..=4, entries in prop::collection::vec(-1.5f64..1.5, 16), x in 0.0f64..3.0) {
        let m = DMatrix::from_fn(n, n, |i, j| entries[i * 4 + j]);
        let e = mat_exp(&m, x).unwrap();
        let oracle = series_expm(&m, x);
        prop_assert!((&e - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
    }

    #[test]
    fn derivative_matches_difference_quotient(f in qe_strategy(), x in 1e-3f64..6.0) {
        let d = f.derivative().eval(x).unwrap();
        let fd = central_fd(|s| f.eval(s).unwrap(), x, 1e-6);
        prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + f.eval(x).unwrap().abs()));
    }

    #[test]
    fn integral_is_additive(f in qe_strategy(), a in 0.0f64..3.0, l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
        let (b, c) = (a + l1, a + l1 + l2);
        let whole = f.integral(a, c).unwrap();
        let parts = f.integral(a, b).unwrap() + f.integral(b, c).unwrap();
        let scale = adaptive_simpson(&|x| f.eval(x).unwrap().abs(), a, c.max(a + 1e-9), 1e-10).max(1e-300);
        prop_assert!((whole - parts).abs() <= 1e-12 * scale.max(whole.abs()) + 1e-15);
    }

    #[test]
    fn fit_recovers_generator(
        n in 1usize..=3,
        jitter in prop::collection::vec(-0.1f64..0.1, 3),
        noise in prop::collection::vec(-1.0f64..1.0, 9),
        b in prop::collection::vec(0.5f64..1.5, 3),
    ) {
        // well-separated spectrum in [-2, 0.5]
        let eig: Vec<f64> = (0..n).map(|k| -1.8 + 1.0 * k as f64 + jitter[k]).collect();
        let a = with_spectrum(&eig, &noise, 0.3);
        let h = 1e-2;
        let fit = fit_linear_ode(&state_samples(&a, &DVector::from_column_slice(&b[..n]), 0.0, 2.0, h)).unwrap();
        prop_assert!(fit.residual <= 1e-4);
        // central differences see sinh(A h)/h = A + A^3 h^2/6 + ..
        let bias = (&a * &a * &a).amax() * h * h / 6.0;
        prop_assert!((&fit.generator - &a).amax() <= 2.0 * bias + 1e-7,
            "error {} vs bias {}", (&fit.generator - &a).amax(), bias);
    }
}
