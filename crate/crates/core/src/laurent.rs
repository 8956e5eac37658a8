//! Laurent analysis on the circle group and the punctured plane.
//!
//! With the U(1) basis 2 pi i the derivative along coordinate 1 acts on
//! z^n as multiplication by 2 pi i n, which makes the identities below
//! hold without rescaling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::derive::{one_variable_coefficients, ProbeOptions};
use crate::error::{Error, Result};
use crate::fields::{Field, Regularity};
use crate::group::GroupKind;
use crate::linalg::{self, CompensatedSum, CMat, ONE, ZERO};
use crate::report::Report;

/// Relative tolerance of the derivative identity.
pub const IDENTITY_REL_TOL: f64 = 1e-9;

/// Coefficients a_n for n in [-n_neg, n_pos].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentData {
    pub n_neg: usize,
    pub n_pos: usize,
    pub nodes: usize,
    /// a_n stored at index n + n_neg.
    pub coeffs: Vec<Complex64>,
    /// Largest reconstruction error at the midpoints between nodes.
    pub residual: f64,
    pub warning: Option<String>,
}

impl LaurentData {
    pub fn coeff(&self, n: i64) -> Complex64 {
        if n < -(self.n_neg as i64) || n > self.n_pos as i64 {
            return ZERO;
        }
        self.coeffs[(n + self.n_neg as i64) as usize]
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        -(self.n_neg as i64)..=self.n_pos as i64
    }

    /// sum_n a_n z^n.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = CompensatedSum::new();
        for n in self.indices() {
            acc.add(self.coeff(n) * z.powi(n as i32));
        }
        acc.value()
    }
}

fn check_circle_field(field: &Field) -> Result<()> {
    let kind = field.group().kind;
    if kind != GroupKind::Circle && kind != GroupKind::PuncturedPlane {
        return Err(Error::InvalidArgument(format!(
            "Laurent analysis needs a field on U1 or Ctimes, not {}",
            field.group().name
        )));
    }
    Ok(())
}

fn at(z: Complex64) -> CMat {
    CMat::from_element(1, 1, z)
}

fn unit_point(j: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (j % m) as f64 / m as f64)
}

/// a_n = (1/M) sum_j Phi(e^{i t_j}) e^{-i n t_j}, t_j = 2 pi j / M.
pub fn laurent_coefficients(field: &Field, n_neg: usize, n_pos: usize, m: usize) -> Result<LaurentData> {
    check_circle_field(field)?;
    if m < 2 * (n_neg + n_pos + 1) {
        return Err(Error::InvalidArgument(format!(
            "{m} nodes cannot resolve {} coefficients",
            n_neg + n_pos + 1
        )));
    }
    let samples: Vec<Complex64> = (0..m).map(|j| field.eval_raw(&at(unit_point(j, m)))).collect::<Result<_>>()?;
    let coeffs: Vec<Complex64> = (-(n_neg as i64)..=n_pos as i64)
        .map(|n| {
            let mut acc = CompensatedSum::new();
            for (j, s) in samples.iter().enumerate() {
                let k = (n.rem_euclid(m as i64) as usize * j) % m;
                acc.add(s * unit_point(k, m).conj());
            }
            acc.value() / m as f64
        })
        .collect();
    let mut data = LaurentData { n_neg, n_pos, nodes: m, coeffs, residual: 0.0, warning: None };
    let mut residual: f64 = 0.0;
    for j in 0..m {
        let z = Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / m as f64);
        residual = residual.max((field.eval_raw(&at(z))? - data.eval(z)).norm());
    }
    data.residual = residual;
    if 4 * n_neg.max(n_pos) > m {
        data.warning = Some(format!("coefficients beyond M/4 = {} may alias", m / 4));
    }
    Ok(data)
}

/// The derivatives L(1)^k Phi(1), k <= k_max, along the first basis
/// direction: exact when possible, otherwise from a circle quadrature of
/// s -> Phi(exp(s e_1)).
fn circle_derivatives(field: &Field, k_max: usize) -> Result<Vec<Complex64>> {
    let group = field.group();
    let mut dir = vec![ZERO; group.dim];
    dir[0] = ONE;
    let e = group.identity();
    if field.is_exact() {
        return Ok(field.exact_taylor(&e, &[dir], k_max)?.into_iter().map(|b| b[0]).collect());
    }
    if field.regularity() == Regularity::SmoothOnly {
        return Err(Error::UnsupportedMethod("a smooth-only field has no Laurent identity".into()));
    }
    let (a, _) = one_variable_coefficients(field, &e, &dir, k_max, ProbeOptions::default())?;
    let mut fact = 1.0;
    Ok(a.iter()
        .enumerate()
        .map(|(k, ak)| {
            if k > 0 {
                fact *= k as f64;
            }
            ak * fact
        })
        .collect())
}

/// L(1)^k Phi(1) = (2 pi i)^k sum_n n^k a_n for k <= k_max; the largest
/// deviation relative to max(1, |rhs|) is reported.
pub fn laurent_lie_taylor_check(field: &Field, k_max: usize, data: &LaurentData) -> Result<Report> {
    check_circle_field(field)?;
    let lhs = circle_derivatives(field, k_max)?;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut worst: f64 = 0.0;
    for (k, l) in lhs.iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for n in data.indices() {
            acc.add(data.coeff(n) * (n as f64).powi(k as i32));
        }
        let rhs = two_pi_i.powi(k as i32) * acc.value();
        worst = worst.max((l - rhs).norm() / rhs.norm().max(1.0));
    }
    Ok(Report::deviation(
        "laurent-identity",
        json!({ "group": field.group().name, "K": k_max, "nodes": data.nodes }),
        worst,
        IDENTITY_REL_TOL,
    ))
}

/// Truncated q_r(Phi) = sum_{k <= N} r^k / k! |L(1)^k Phi(1)| against
/// sum_n |a_n| e^{2 pi r |n|}.
pub fn laurent_seminorm_bound(field: &Field, r: f64, n: usize, data: &LaurentData) -> Result<Report> {
    check_circle_field(field)?;
    if field.group().dim != 1 {
        return Err(Error::InvalidArgument("the seminorm bound is stated for fields on U1".into()));
    }
    let derivs = circle_derivatives(field, n)?;
    let mut term = 1.0;
    let lhs = linalg::kahan_sum(derivs.iter().enumerate().map(|(k, dk)| {
        if k > 0 {
            term *= r / k as f64;
        }
        term * dk.norm()
    }));
    let rhs = linalg::kahan_sum(data.indices().map(|k| data.coeff(k).norm() * (2.0 * PI * r * k.abs() as f64).exp()));
    Ok(Report::inequality(
        "laurent-seminorm",
        json!({ "r": r, "N": n, "n_neg": data.n_neg, "n_pos": data.n_pos }),
        lhs,
        rhs,
        1e-12,
    ))
}

/// Exponential coordinate of a point of C^x: target = exp(2 pi i zeta) with
/// zeta = t - i log|target| / (2 pi) and t = arg(target) / (2 pi) in (-1/2, 1/2].
pub fn exponential_coordinate(target: Complex64) -> Result<Complex64> {
    if target.norm() == 0.0 || !target.re.is_finite() || !target.im.is_finite() {
        return Err(Error::Domain("the punctured plane excludes 0".into()));
    }
    Ok(Complex64::new(target.arg() / (2.0 * PI), -target.norm().ln() / (2.0 * PI)))
}

/// F(zeta) for the entire extension F of s -> phi(exp(s e_1)), from order-n
/// data at the unit element.
pub fn laurent_extend(field: &Field, target: Complex64, n: usize) -> Result<Complex64> {
    if field.group().kind != GroupKind::Circle {
        return Err(Error::InvalidArgument("laurent_extend takes a field on U1".into()));
    }
    let zeta = exponential_coordinate(target)?;
    let derivs = circle_derivatives(field, n)?;
    let mut acc = CompensatedSum::new();
    let mut pow = ONE;
    for (k, dk) in derivs.iter().enumerate() {
        if k > 0 {
            pow *= zeta / k as f64;
        }
        acc.add(dk * pow);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;
    use crate::group::registry_get;

    fn u1_field(name: &str) -> Field {
        catalog(name, &registry_get("U1").unwrap()).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let d = laurent_coefficients(&u1_field("constant:3"), 4, 4, 32).unwrap();
        assert!((d.coeff(0) - 3.0).norm() < 1e-14);
        assert!(d.indices().filter(|&n| n != 0).all(|n| d.coeff(n).norm() < 1e-14));
        let d = laurent_coefficients(&u1_field("trig-poly"), 4, 4, 64).unwrap();
        for (n, want) in [(-1, 2.0), (0, 3.0), (2, 1.0), (1, 0.0), (-2, 0.0), (3, 0.0)] {
            assert!((d.coeff(n) - want).norm() < 1e-12, "a_{n}");
        }
        assert!(d.residual < 1e-12 && d.warning.is_none());
        let d = laurent_coefficients(&u1_field("identity"), 2, 2, 16).unwrap();
        assert!((d.coeff(1) - 1.0).norm() < 1e-14);
        assert!(laurent_coefficients(&u1_field("identity"), 4, 4, 8).is_err());
        let d = laurent_coefficients(&u1_field("identity"), 3, 3, 14).unwrap();
        assert!(d.warning.is_none());
        let d = laurent_coefficients(&u1_field("identity"), 0, 9, 20).unwrap();
        assert!(d.warning.is_some());
    }

    #[test]
    fn identity_examples() {
        for (name, k) in [("identity", 3), ("trig-poly", 1), ("trig-poly", 6), ("constant:2", 4)] {
            let f = u1_field(name);
            let d = laurent_coefficients(&f, 4, 4, 64).unwrap();
            let rep = laurent_lie_taylor_check(&f, k, &d).unwrap();
            assert!(rep.pass, "{name} {rep:?}");
        }
    }

    #[test]
    fn seminorm_examples() {
        let f = u1_field("constant:3");
        let d = laurent_coefficients(&f, 2, 2, 16).unwrap();
        let rep = laurent_seminorm_bound(&f, 1.0, 10, &d).unwrap();
        assert!(rep.pass && (rep.lhs - 3.0).abs() < 1e-14 && (rep.rhs - 3.0).abs() < 1e-9);
        let f = u1_field("identity");
        let d = laurent_coefficients(&f, 2, 2, 16).unwrap();
        let rep = laurent_seminorm_bound(&f, 1.0, 60, &d).unwrap();
        assert!(rep.pass && rep.slack.abs() < 1e-9 * rep.rhs, "{rep:?}");
        let f = u1_field("trig-poly");
        let d = laurent_coefficients(&f, 4, 4, 64).unwrap();
        assert!(laurent_seminorm_bound(&f, 0.5, 60, &d).unwrap().pass);
    }

    #[test]
    fn extend_examples() {
        let z = u1_field("identity");
        let w = Complex64::from_polar(1.0, 0.7);
        assert!((laurent_extend(&z, w, 40).unwrap() - w).norm() < 1e-12);
        assert!((laurent_extend(&z, Complex64::new(2.0, 0.0), 60).unwrap() - 2.0).norm() < 1e-10);
        let t = u1_field("trig-poly");
        let p = Complex64::new(0.0, 1.5);
        let want = 2.0 / p + 3.0 + p * p;
        assert!((laurent_extend(&t, p, 80).unwrap() - want).norm() < 1e-8);
        assert!(matches!(laurent_extend(&z, ZERO, 10), Err(Error::Domain(_))));
    }
}
