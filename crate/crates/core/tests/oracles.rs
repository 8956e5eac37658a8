//! Closed-form values computed independently of the library's derivative,
//! expansion and continuation code.

use std::f64::consts::PI;

use lie_taylor::derive::{enumerate_multiindices, taylor_data, taylor_data_in, DerivMethod};
use lie_taylor::extend::{extend_value, ContinuationOptions};
use lie_taylor::fields::{catalog, Field};
use lie_taylor::group::registry_get;
use lie_taylor::laurent::laurent_coefficients;
use lie_taylor::linalg::CMat;
use lie_taylor::taylor::{seminorm_q, Coords, shift_taylor_data};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat(rows: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

fn h() -> CMat {
    mat([[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(-1.0, 0.0)]])
}

fn e() -> CMat {
    mat([[cx(0.0, 0.0), cx(1.0, 0.0)], [cx(0.0, 0.0), cx(0.0, 0.0)]])
}

fn f() -> CMat {
    mat([[cx(0.0, 0.0), cx(0.0, 0.0)], [cx(1.0, 0.0), cx(0.0, 0.0)]])
}

/// exp of a traceless 2x2 matrix: cosh(s) I + sinh(s)/s X with s^2 = -det X.
fn exp_sl2(x: &CMat) -> CMat {
    let det = x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
    let s = (-det).sqrt();
    let shc = if s.norm() < 1e-8 { cx(1.0, 0.0) + s * s / 6.0 } else { s.sinh() / s };
    CMat::identity(2, 2) * s.cosh() + x * shc
}

fn sample_g() -> CMat {
    exp_sl2(&(h() * cx(0.3, 0.0) + e() * cx(-0.2, 0.0) + f() * cx(0.45, 0.0)))
}

/// L(alpha) of a linear functional of g is that functional of g X_a1 ... X_an.
#[test]
fn entry_and_trace_data_on_sl2r() {
    let group = registry_get("SL2R").unwrap();
    let g = sample_g();
    let basis = [h(), e(), f()];
    for (name, functional) in [
        ("entry-11", Box::new(|m: &CMat| m[(0, 0)]) as Box<dyn Fn(&CMat) -> Complex64>),
        ("trace", Box::new(|m: &CMat| m.trace())),
    ] {
        let field = catalog(name, &group).unwrap();
        let t = taylor_data(&field, &g, 4, &DerivMethod::Exact).unwrap();
        for n in 0..=4 {
            for alpha in enumerate_multiindices(3, n) {
                let mut prod = g.clone();
                for &a in &alpha.0 {
                    prod = &prod * &basis[a];
                }
                let want = functional(&prod);
                let got = t.coeff(&alpha.0);
                assert!((got - want).norm() < 1e-12, "{name} {:?}: {got} vs {want}", alpha.0);
            }
        }
    }
}

#[test]
fn quadrature_and_differences_agree_with_closed_form() {
    let group = registry_get("SL2R").unwrap();
    let g = sample_g();
    let field = catalog("entry-11", &group).unwrap();
    let want = (&g * h() * e())[(0, 0)];
    let fd = taylor_data(&field, &g, 2, &DerivMethod::finite_difference()).unwrap();
    assert!((fd.coeff(&[0, 1]) - want).norm() < 1e-6);
    // Quadrature needs the holomorphic counterpart on the complex group.
    let sl2c = registry_get("SL2C").unwrap();
    let field = catalog("entry-11", &sl2c).unwrap();
    let q = taylor_data_in(&field, &g, 2, &DerivMethod::quadrature(), Coords::ComplexSpan).unwrap();
    assert!((q.coeff(&[0, 1]) - want).norm() < 1e-10);
}

/// On U(1) with generator 2 pi i, L^k z^m = (2 pi i m)^k z^m.
#[test]
fn characters_on_the_circle() {
    let u1 = registry_get("U1").unwrap();
    let g = u1.exp(&[0.15]).unwrap();
    for m in [-2, 1, 3] {
        let field = catalog(&format!("character:{m}"), &u1).unwrap();
        let t = taylor_data(&field, &g, 6, &DerivMethod::Exact).unwrap();
        let z = cx(0.0, 2.0 * PI * 0.15 * m as f64).exp();
        for k in 0..=6 {
            let want = cx(0.0, 2.0 * PI * m as f64).powu(k as u32) * z;
            let got = t.coeffs[k][0];
            assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0), "m={m} k={k}");
        }
    }
}

/// q_r(z^m) = sum_n (2 pi |m| r)^n / n! = exp(2 pi |m| r).
#[test]
fn seminorm_of_characters() {
    let u1 = registry_get("U1").unwrap();
    for (m, r) in [(1, 0.5), (2, 0.25), (-1, 1.0)] {
        let field = catalog(&format!("character:{m}"), &u1).unwrap();
        let q = seminorm_q(&field, r, 40, &DerivMethod::Exact).unwrap();
        let want = (2.0 * PI * (m as f64).abs() * r).exp();
        assert!((q - want).abs() < 1e-9 * want, "m={m}: {q} vs {want}");
    }
}

/// The order-0 coefficient of re-expanded data is the field at g exp(xi).
#[test]
fn shifted_data_matches_direct_evaluation() {
    let group = registry_get("SL2R").unwrap();
    let g = sample_g();
    let field = catalog("entry-11", &group).unwrap();
    let t = taylor_data(&field, &g, 14, &DerivMethod::Exact).unwrap();
    let xi = [0.1, -0.15, 0.2];
    let shifted = shift_taylor_data(&t, &xi.map(|v| cx(v, 0.0)), 2, 12).unwrap();
    let x = h() * cx(xi[0], 0.0) + e() * cx(xi[1], 0.0) + f() * cx(xi[2], 0.0);
    let moved = &g * exp_sl2(&x);
    assert!((shifted.coeffs[0][0] - moved[(0, 0)]).norm() < 1e-10);
    let want = (&moved * e())[(0, 0)];
    assert!((shifted.coeff(&[1]) - want).norm() < 1e-9);
}

#[test]
fn laurent_coefficients_of_a_known_polynomial() {
    let u1 = registry_get("U1").unwrap();
    let a = [cx(0.5, -1.0), cx(2.0, 0.0), cx(0.0, 0.25)];
    let terms = [-1, 0, 3]
        .iter()
        .zip(a)
        .map(|(n, an)| (an, catalog(&format!("character:{n}"), &u1).unwrap()))
        .collect();
    let field = Field::linear_combination(terms).unwrap();
    let data = laurent_coefficients(&field, 4, 4, 32).unwrap();
    for n in -4i64..=4 {
        let want = match n {
            -1 => a[0],
            0 => a[1],
            3 => a[2],
            _ => cx(0.0, 0.0),
        };
        assert!((data.coeff(n) - want).norm() < 1e-13, "n={n}");
    }
}

/// exp(i a H) = diag(e^{ia}, e^{-ia}), so the extended trace is 2 cos a.
#[test]
fn extended_trace_on_the_imaginary_torus() {
    let group = registry_get("SL2R").unwrap();
    let field = catalog("trace", &group).unwrap();
    let a = 0.7;
    let target = mat([[cx(0.0, a).exp(), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(0.0, -a).exp()]]);
    let ext = extend_value(&field, &target, None, &ContinuationOptions::default()).unwrap();
    assert!((ext.value - cx(2.0 * a.cos(), 0.0)).norm() < 1e-7, "{}", ext.value);
}
