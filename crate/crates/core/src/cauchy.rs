//! Lie-theoretic Cauchy estimates, the exponential norm bound and the two
//! inequalities behind the restriction embedding.
//!
//! Every right-hand side comes from an analytic sup envelope. Sampling is
//! only used to sanity-check envelopes: a sampled sup under-estimates and
//! would falsify the direction of the inequality.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::derive::{lie_derivative, taylor_data, DerivMethod, MultiIndex};
use crate::error::{Error, Result};
use crate::fields::{Field, Regularity};
use crate::group::GroupModel;
use crate::linalg::{self, c, CMat};
use crate::report::Report;
use crate::riemann::{curve_length, GroupPath, MetricModel};
use crate::sample;
use crate::taylor::{heuristic_tail, majorant_coefficients, majorant_eval, Tail};

/// Radius of the closed coordinate ball K0 (Euclidean, real coordinates).
pub const K0_RADIUS: f64 = 0.25;
/// Relative slack of the Cauchy inequalities.
pub const CAUCHY_REL_TOL: f64 = 1e-9;
/// Relative slack of the exponential norm bound.
pub const EXP_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeDomain {
    /// env(R) bounds |phi| on {h : ||h||_op <= R}.
    OperatorNorm,
    /// env(rho) bounds |phi| on the closed metric ball B_rho(1).
    MetricBall,
}

/// An analytic bound of |phi| on norm or metric balls.
#[derive(Clone)]
pub struct SupEnvelope {
    pub field: Field,
    pub domain: EnvelopeDomain,
    pub justification: String,
    /// ||h||_op <= exp(growth * rho) on B_rho(1); 1 for operator envelopes.
    growth: f64,
    metric: Option<MetricModel>,
}

impl fmt::Debug for SupEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SupEnvelope")
            .field("domain", &self.domain)
            .field("justification", &self.justification)
            .field("growth", &self.growth)
            .finish()
    }
}

fn missing(field: &Field) -> Error {
    Error::MissingEnvelope(format!(
        "no analytic envelope is declared for this field on {}",
        field.group().name
    ))
}

impl SupEnvelope {
    pub fn operator(field: &Field) -> Result<Self> {
        field.op_envelope(1.0).ok_or_else(|| missing(field))?;
        Ok(Self {
            field: field.clone(),
            domain: EnvelopeDomain::OperatorNorm,
            justification: "declared operator-norm envelope of the field".into(),
            growth: 1.0,
            metric: None,
        })
    }

    /// Metric-ball envelope: a curve of length rho has ||h||_op <= e^{c rho}
    /// with c the metric's operator-norm factor.
    pub fn metric(field: &Field, metric: &MetricModel) -> Result<Self> {
        field.op_envelope(1.0).ok_or_else(|| missing(field))?;
        if metric.group.name != field.group().name {
            return Err(Error::InvalidArgument("metric and field live on different groups".into()));
        }
        Ok(Self {
            field: field.clone(),
            domain: EnvelopeDomain::MetricBall,
            justification: "operator-norm envelope at radius exp(c rho), c = op-norm factor of the metric".into(),
            growth: metric.op_norm_factor(),
            metric: Some(metric.clone()),
        })
    }

    /// Bound over {a h : ||a||_op <= base, h in the ball of `radius`}.
    pub fn sup_over(&self, base: f64, radius: f64) -> f64 {
        let r = match self.domain {
            EnvelopeDomain::OperatorNorm => base * radius,
            EnvelopeDomain::MetricBall => base * (self.growth * radius).exp(),
        };
        self.field.op_envelope(r).expect("checked at construction")
    }

    pub fn bound(&self, radius: f64) -> f64 {
        self.sup_over(1.0, radius)
    }

    /// Compare the envelope with |phi| at random elements of each ball.
    pub fn sanity_check(&self, radii: &[f64], samples: usize, seed: u64) -> Result<Report> {
        let group = self.field.group().clone();
        let mut rng = sample::rng(seed);
        let mut worst_ratio: f64 = 0.0;
        let mut pass = true;
        for &radius in radii {
            let env = self.bound(radius);
            let mut max_abs: f64 = 0.0;
            for _ in 0..samples {
                let dir = sample::sphere(&mut rng, group.dim);
                // Unit-time length of t -> exp(t dir) in the norm of the ball.
                let (speed, reach) = match &self.metric {
                    None => (linalg::op_norm(&group.algebra_element(&dir)), radius.max(1.0).ln()),
                    Some(m) => (m.norm(&dir), radius),
                };
                let t: f64 = rand::Rng::gen_range(&mut rng, 0.0..=1.0) * reach / speed.max(1e-300);
                let xi: Vec<f64> = dir.iter().map(|v| v * t).collect();
                let h = group.exp(&xi)?;
                max_abs = max_abs.max(self.field.eval_raw(&h)?.norm());
            }
            if max_abs > env * (1.0 + CAUCHY_REL_TOL) {
                pass = false;
            }
            if env > 0.0 {
                worst_ratio = worst_ratio.max(max_abs / env);
            }
        }
        let mut r = Report::inequality(
            "envelope-sanity",
            json!({ "group": group.name, "domain": self.domain, "radii": radii, "samples": samples }),
            worst_ratio,
            1.0,
            CAUCHY_REL_TOL,
        );
        r.pass &= pass;
        Ok(r)
    }
}

/// kappa0 with ||xi||_op <= kappa0 on K0.
pub fn k0_op_bound(group: &GroupModel) -> f64 {
    K0_RADIUS * group.basis.iter().map(|b| linalg::op_norm(b).powi(2)).sum::<f64>().sqrt()
}

fn check_k0(xi: &[f64]) -> Result<()> {
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > K0_RADIUS * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("xi has norm {n} outside K0 (radius {K0_RADIUS})")));
    }
    Ok(())
}

/// Multiplication by i in real coordinates (x, y) -> (-y, x).
fn times_i(xi: &[f64]) -> Vec<f64> {
    let h = xi.len() / 2;
    let mut out = vec![0.0; xi.len()];
    for k in 0..h {
        out[k] = -xi[k + h];
        out[k + h] = xi[k];
    }
    out
}

/// max over theta of ||e^{i theta} xi||_gram, so that exp(z xi) stays in
/// the metric ball of radius |z| * circular_norm(xi).
pub fn circular_norm(metric: &MetricModel, xi: &[f64]) -> f64 {
    if !metric.group.is_complex {
        return metric.norm(xi);
    }
    let j = times_i(xi);
    let a = metric.norm(xi).powi(2);
    let cc = metric.norm(&j).powi(2);
    let both: Vec<f64> = xi.iter().zip(&j).map(|(x, y)| x + y).collect();
    let b = (metric.norm(&both).powi(2) - a - cc) / 2.0;
    ((a + cc) / 2.0 + (((a - cc) / 2.0).powi(2) + b * b).sqrt()).sqrt()
}

/// Index and scale when `dir` is a multiple of one basis vector.
fn as_basis_multiple(dir: &[f64]) -> Option<(usize, f64)> {
    let nz: Vec<usize> = (0..dir.len()).filter(|&k| dir[k] != 0.0).collect();
    match nz.as_slice() {
        [k] => Some((*k, dir[*k])),
        _ => None,
    }
}

/// L(X_1..X_n) phi(g) for real coordinate directions. Exact fields take any
/// directions; sampled holomorphic fields need basis-aligned directions.
fn directional_derivative(field: &Field, dirs: &[Vec<f64>], g: &CMat) -> Result<Complex64> {
    if field.is_exact() {
        let cd: Vec<Vec<Complex64>> = dirs.iter().map(|d| d.iter().map(|x| c(*x)).collect()).collect();
        return field.exact_derivative(&cd, g);
    }
    if field.regularity() != Regularity::Holomorphic {
        return Err(Error::UnsupportedMethod("Cauchy estimates need a holomorphic field".into()));
    }
    let mut alpha = Vec::with_capacity(dirs.len());
    let mut scale = 1.0;
    for d in dirs {
        let (k, s) = as_basis_multiple(d).ok_or_else(|| {
            Error::UnsupportedMethod("sampled derivatives need basis-aligned directions".into())
        })?;
        alpha.push(k);
        scale *= s;
    }
    if dirs.is_empty() {
        return field.eval_raw(g);
    }
    Ok(lie_derivative(field, &MultiIndex(alpha), g, &DerivMethod::quadrature())? * scale)
}

fn require_complex(field: &Field) -> Result<()> {
    if !field.group().is_complex {
        return Err(Error::InvalidArgument(format!("{} is not a complex group", field.group().name)));
    }
    Ok(())
}

fn n_pow_over_r(n: usize, r: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        (n as f64 / r).powi(n as i32)
    }
}

/// |L(xi_1..xi_n) phi(g exp xi)| <= ||phi||_{g exp(K0) K_r} n^n / r^n with
/// directions normalized to operator norm one and
/// K_r = {h : ||h||_op <= e^r}.
pub fn cauchy_check_operator(
    field: &Field,
    g: &CMat,
    xi: &[f64],
    dirs: &[Vec<f64>],
    r: f64,
    env: &SupEnvelope,
) -> Result<Report> {
    require_complex(field)?;
    check_k0(xi)?;
    if env.domain != EnvelopeDomain::OperatorNorm {
        return Err(Error::InvalidArgument("operator check needs an operator-norm envelope".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let group = field.group();
    let unit: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| {
            let n = linalg::op_norm(&group.algebra_element(d));
            if n == 0.0 {
                return Err(Error::InvalidArgument("zero direction".into()));
            }
            Ok(d.iter().map(|x| x / n).collect())
        })
        .collect::<Result<_>>()?;
    let at = g * group.exp(xi)?;
    let lhs = directional_derivative(field, &unit, &at)?.norm();
    let base = linalg::op_norm(g) * k0_op_bound(group).exp();
    let n = dirs.len();
    let rhs = env.sup_over(base, r.exp()) * n_pow_over_r(n, r);
    let params = json!({ "group": group.name, "n": n, "r": r, "xi": xi, "envelope": env.justification });
    Ok(Report::inequality("cauchy-operator", params, lhs, rhs, CAUCHY_REL_TOL))
}

/// Same estimate with directions normalized in the metric (circular norm)
/// and the sup taken over g exp(K0) B_r(1). The broken curve through
/// exp(z_1 xi_1)..exp(z_n xi_n) with |z_j| = r/n is measured to certify
/// that it stays in B_r(1).
pub fn cauchy_check_riemannian(
    field: &Field,
    g: &CMat,
    xi: &[f64],
    dirs: &[Vec<f64>],
    r: f64,
    metric: &MetricModel,
    env: &SupEnvelope,
) -> Result<Report> {
    require_complex(field)?;
    check_k0(xi)?;
    if env.domain != EnvelopeDomain::MetricBall {
        return Err(Error::InvalidArgument("Riemannian check needs a metric-ball envelope".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let group = field.group();
    let unit: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| {
            let n = circular_norm(metric, d);
            if n == 0.0 {
                return Err(Error::InvalidArgument("zero direction".into()));
            }
            Ok(d.iter().map(|x| x / n).collect())
        })
        .collect::<Result<_>>()?;
    let n = dirs.len();
    let mut path_length = 0.0;
    if n > 0 {
        let segments: Vec<Vec<f64>> = unit
            .iter()
            .enumerate()
            .map(|(j, d)| {
                let z = Complex64::from_polar(r / n as f64, 0.9 * j as f64);
                let jd = times_i(d);
                d.iter().zip(&jd).map(|(a, b)| z.re * a + z.im * b).collect()
            })
            .collect();
        let path = GroupPath::from_segments(group, &group.identity(), &segments, 8)?;
        path_length = curve_length(&path, metric)?;
    }
    let at = g * group.exp(xi)?;
    let lhs = directional_derivative(field, &unit, &at)?.norm();
    let base = linalg::op_norm(g) * k0_op_bound(group).exp();
    let rhs = env.sup_over(base, r) * n_pow_over_r(n, r);
    let params = json!({
        "group": group.name,
        "n": n,
        "r": r,
        "xi": xi,
        "path_length": path_length,
        "envelope": env.justification,
    });
    let mut rep = Report::inequality("cauchy-riemannian", params, lhs, rhs, CAUCHY_REL_TOL);
    rep.pass &= path_length <= r * (1.0 + 1e-9);
    Ok(rep)
}

/// ||exp xi||_op <= e^{||xi||_op}.
pub fn exp_norm_check(xi: &CMat) -> Report {
    let lhs = linalg::op_norm(&linalg::expm(xi));
    let nx = linalg::op_norm(xi);
    let rhs = nx.exp();
    Report::inequality("exp-norm", json!({ "norm_xi": nx }), lhs, rhs, EXP_REL_TOL)
}

/// sum_{n <= N} n! / n^n with 0^0 = 1.
pub fn restriction_series(n_max: usize) -> f64 {
    let mut acc = 1.0;
    for n in 1..=n_max {
        let term: f64 = (1..=n).map(|k| k as f64 / n as f64).product();
        acc += term;
    }
    acc
}

/// The radius, in units of r d, of the metric ball whose sup bounds the
/// truncated seminorm against `restriction_series`: with R = e^2 r d every
/// Cauchy term (r d / R)^n n^n / n! is at most n! / n^n.
pub const RESTRICTION_BALL_FACTOR: f64 = std::f64::consts::E * std::f64::consts::E;

/// Both inequalities of the restriction embedding.
///
/// Forward: q_r(phi), in the basis normalized by the circular metric norm,
/// is at most ||phi|| on B_R(1), R = e^2 r d, times S_N.
///
/// Reverse: |phi(g exp xi)| at sampled xi in the K0-cube of normalized
/// coordinates is at most the majorant at g and radius K0 plus its tail.
pub fn restriction_bound_check(
    field: &Field,
    metric: &MetricModel,
    r: f64,
    n: usize,
    method: &DerivMethod,
    env: &SupEnvelope,
    g: &CMat,
    samples: usize,
    seed: u64,
) -> Result<Vec<Report>> {
    require_complex(field)?;
    if env.domain != EnvelopeDomain::MetricBall {
        return Err(Error::InvalidArgument("restriction check needs a metric-ball envelope".into()));
    }
    let group = field.group();
    let d = group.dim;
    let scales: Vec<f64> = (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            1.0 / circular_norm(metric, &e)
        })
        .collect();
    let normalize = |t: &mut crate::taylor::TaylorData| {
        for (ord, block) in t.coeffs.iter_mut().enumerate() {
            for (idx, x) in block.iter_mut().enumerate() {
                let alpha = crate::fields::decode_index(idx, ord, t.dim);
                *x *= alpha.iter().map(|&a| scales[a]).product::<f64>();
            }
        }
    };

    let mut at_e = taylor_data(field, &group.identity(), n, method)?;
    normalize(&mut at_e);
    let q = majorant_eval(&majorant_coefficients(&at_e, 0.0), r, None)?.value;
    let big_r = RESTRICTION_BALL_FACTOR * r * d as f64;
    let s_n = restriction_series(n);
    let forward = Report::inequality(
        "restriction-forward",
        json!({ "group": group.name, "r": r, "N": n, "ball_radius": big_r, "S_N": s_n }),
        q,
        env.bound(big_r) * s_n,
        CAUCHY_REL_TOL,
    );

    let mut at_g = taylor_data(field, g, n, method)?;
    normalize(&mut at_g);
    let series = majorant_coefficients(&at_g, 0.0);
    let mv = majorant_eval(&series, K0_RADIUS, None)?;
    let tail = match heuristic_tail(&series, K0_RADIUS) {
        Tail::Unavailable => f64::INFINITY,
        t => t.bound(),
    };
    let mut rng = sample::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = sample::cube(&mut rng, d, K0_RADIUS);
        let xi: Vec<f64> = s.iter().zip(&scales).map(|(a, b)| a * b).collect();
        worst = worst.max(field.eval_raw(&(g * group.exp(&xi)?))?.norm());
    }
    let reverse = Report::inequality(
        "restriction-reverse",
        json!({ "group": group.name, "N": n, "radius": K0_RADIUS, "samples": samples, "tail": tail }),
        worst,
        mv.value + tail,
        CAUCHY_REL_TOL,
    );
    Ok(vec![forward, reverse])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;
    use crate::group::registry_get;

    fn unit(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    #[test]
    fn operator_examples() {
        let g = registry_get("SL2C").unwrap();
        let f = catalog("entry-11", &g).unwrap();
        let env = SupEnvelope::operator(&f).unwrap();
        let e = g.identity();
        let zero = vec![0.0; 6];
        // With xi = 0 in K0 the sup set still includes exp(K0); the bound
        // only grows.
        let rep = cauchy_check_operator(&f, &e, &zero, &[unit(6, 0)], 1.0, &env).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-14);
        assert!(rep.pass && rep.rhs >= std::f64::consts::E);
        let rep = cauchy_check_operator(&f, &e, &zero, &vec![unit(6, 0); 3], 1.0, &env).unwrap();
        assert!(rep.pass);
        let k = catalog("constant:2", &g).unwrap();
        let env = SupEnvelope::operator(&k).unwrap();
        let rep = cauchy_check_operator(&k, &e, &zero, &[unit(6, 1)], 0.5, &env).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn riemannian_examples() {
        let ct = registry_get("Ctimes").unwrap();
        let m = MetricModel::standard(ct.clone());
        let f = catalog("identity", &ct).unwrap();
        let env = SupEnvelope::metric(&f, &m).unwrap();
        let rep = cauchy_check_riemannian(&f, &ct.identity(), &[0.0, 0.0], &[unit(2, 0)], 0.5, &m, &env).unwrap();
        assert!(rep.pass, "{rep:?}");
        let sl = registry_get("SL2C").unwrap();
        let m = MetricModel::standard(sl.clone());
        let f = catalog("entry-11", &sl).unwrap();
        let env = SupEnvelope::metric(&f, &m).unwrap();
        let rep = cauchy_check_riemannian(
            &f,
            &sl.identity(),
            &[0.1, 0.0, 0.0, 0.0, 0.1, 0.0],
            &[unit(6, 1), unit(6, 2)],
            1.0,
            &m,
            &env,
        )
        .unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn missing_envelope_is_refused() {
        let ct = registry_get("Ctimes").unwrap();
        let f = catalog("trig-poly", &ct).unwrap();
        assert!(matches!(SupEnvelope::operator(&f), Err(Error::MissingEnvelope(_))));
    }

    #[test]
    fn exp_norm_examples() {
        let sl = registry_get("SL2C").unwrap();
        assert!(exp_norm_check(&CMat::zeros(2, 2)).pass);
        let rep = exp_norm_check(&sl.algebra_element(&[0.3, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(rep.pass && rep.slack.abs() < 1e-15);
        assert!(exp_norm_check(&sl.algebra_element(&[0.0, 0.5, 0.5, 0.0, 0.0, 0.0])).pass);
    }

    #[test]
    fn restriction_series_partial_sums() {
        let s: Vec<f64> = (0..=20).map(restriction_series).collect();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!((s[1] - 2.0).abs() < 1e-15);
        assert!(s[20] > 2.87 && s[20] < 2.88);
    }

    #[test]
    fn restriction_examples() {
        let ct = registry_get("Ctimes").unwrap();
        let m = MetricModel::standard(ct.clone());
        for name in ["identity", "constant:3"] {
            let f = catalog(name, &ct).unwrap();
            let env = SupEnvelope::metric(&f, &m).unwrap();
            let reps =
                restriction_bound_check(&f, &m, 0.1, 12, &DerivMethod::Exact, &env, &ct.identity(), 50, 7).unwrap();
            assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        }
    }

    #[test]
    fn envelope_sanity() {
        let sl = registry_get("SL2C").unwrap();
        let f = catalog("trace-exp", &sl).unwrap();
        let rep = SupEnvelope::operator(&f).unwrap().sanity_check(&[1.5, 2.0, 4.0], 200, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        let m = MetricModel::standard(sl.clone());
        let rep = SupEnvelope::metric(&f, &m).unwrap().sanity_check(&[0.25, 0.5, 1.0], 200, 2).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
