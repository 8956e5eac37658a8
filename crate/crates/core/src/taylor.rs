//! Lie-Taylor data, evaluation and re-expansion; majorants, seminorms and
//! the entirety heuristic.

use serde::{Deserialize, Serialize};
use serde_json::json;

use num_complex::Complex64;

use crate::derive::{taylor_data, DerivMethod};
use crate::error::{Error, Result};
use crate::fields::{decode_index, Field};
use crate::group::registry_get;
use crate::linalg::{self, serde_mat, CMat, CompensatedSum, ONE};
use crate::report::Report;

/// Coordinates of Taylor data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coords {
    /// All real basis directions e_1..e_d.
    Real,
    /// The first d/2 basis directions of a complex group, paired with
    /// complex coordinates.
    ComplexSpan,
}

/// All coefficients L(alpha) phi(g) up to a truncation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorData {
    pub group: String,
    #[serde(with = "serde_mat")]
    pub g: CMat,
    pub coords: Coords,
    /// Number of directions D; the order-n block has D^n entries.
    pub dim: usize,
    pub order: usize,
    pub method: DerivMethod,
    pub coeffs: Vec<Vec<Complex64>>,
    /// Estimated absolute error per order.
    pub errors: Vec<f64>,
}

impl TaylorData {
    pub fn coeff(&self, alpha: &[usize]) -> Complex64 {
        let idx = alpha.iter().fold(0, |acc, a| acc * self.dim + a);
        self.coeffs[alpha.len()][idx]
    }

    /// Copy truncated to order n.
    pub fn truncated(&self, n: usize) -> TaylorData {
        let mut out = self.clone();
        out.order = n.min(self.order);
        out.coeffs.truncate(out.order + 1);
        out.errors.truncate(out.order + 1);
        out
    }

    pub fn scaled(&self, a: Complex64) -> TaylorData {
        let mut out = self.clone();
        for block in &mut out.coeffs {
            for x in block.iter_mut() {
                *x *= a;
            }
        }
        out
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Monomials xi^alpha for every word of order n, lexicographic.
fn monomials(xi: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut cur = vec![ONE];
    for _ in 0..n {
        let mut next = Vec::with_capacity(cur.len() * xi.len());
        for w in &cur {
            for x in xi {
                next.push(w * x);
            }
        }
        cur = next;
    }
    cur
}

/// sum_{n <= N} (1/n!) sum_alpha T(alpha) xi^alpha1 .. xi^alphan, summed
/// in lexicographic order with compensation.
pub fn taylor_eval(t: &TaylorData, xi: &[Complex64]) -> Result<Complex64> {
    if xi.len() != t.dim {
        return Err(Error::InvalidArgument(format!("expected {} coordinates, got {}", t.dim, xi.len())));
    }
    let mut acc = CompensatedSum::new();
    let mut mono = vec![ONE];
    let mut inv_fact = 1.0;
    for n in 0..=t.order {
        if n > 0 {
            inv_fact /= n as f64;
            let mut next = Vec::with_capacity(mono.len() * xi.len());
            for w in &mono {
                for x in xi {
                    next.push(w * x);
                }
            }
            mono = next;
        }
        for (c, w) in t.coeffs[n].iter().zip(&mono) {
            acc.add(c * w * inv_fact);
        }
    }
    Ok(acc.value())
}

/// Re-expansion at g exp(xi): the output coefficient for chi is
/// sum_{k <= K} (1/k!) sum_{|m| = k} T(m chi) xi^m.
pub fn shift_taylor_data(t: &TaylorData, xi: &[Complex64], n_out: usize, k: usize) -> Result<TaylorData> {
    if xi.len() != t.dim {
        return Err(Error::InvalidArgument(format!("expected {} coordinates, got {}", t.dim, xi.len())));
    }
    if t.order < n_out + k {
        return Err(Error::InvalidArgument(format!(
            "shift needs input order at least {} (have {})",
            n_out + k,
            t.order
        )));
    }
    let d = t.dim;
    let monos: Vec<Vec<Complex64>> = (0..=k).map(|j| monomials(xi, j)).collect();
    let xnorm = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut coeffs = Vec::with_capacity(n_out + 1);
    let mut errors = Vec::with_capacity(n_out + 1);
    for n in 0..=n_out {
        let width = d.pow(n as u32);
        let mut block = Vec::with_capacity(width);
        let mut last_terms: f64 = 0.0;
        let mut prev_terms: f64 = 0.0;
        for chi in 0..width {
            let mut acc = CompensatedSum::new();
            let mut inv_fact = 1.0;
            for (j, mono) in monos.iter().enumerate() {
                if j > 0 {
                    inv_fact /= j as f64;
                }
                let src = &t.coeffs[n + j];
                let mut part = CompensatedSum::new();
                for (m, w) in mono.iter().enumerate() {
                    part.add(src[m * width + chi] * w);
                }
                let term = part.value() * inv_fact;
                if j + 1 == monos.len() {
                    last_terms = last_terms.max(term.norm());
                } else if j + 2 == monos.len() {
                    prev_terms = prev_terms.max(term.norm());
                }
                acc.add(term);
            }
            block.push(acc.value());
        }
        // Propagated input error plus a ratio extrapolation of the omitted shifts.
        let mut propagated = 0.0;
        let mut inv_fact = 1.0;
        for j in 0..=k {
            if j > 0 {
                inv_fact /= j as f64;
            }
            propagated += t.errors[n + j] * (d as f64 * xnorm).powi(j as i32) * inv_fact;
        }
        let omitted = if prev_terms > 0.0 && last_terms < prev_terms {
            let q = last_terms / prev_terms;
            last_terms * q / (1.0 - q)
        } else {
            last_terms
        };
        errors.push(propagated + omitted);
        coeffs.push(block);
    }
    let group = registry_get(&t.group)?;
    // Both layouts pair coordinate k with basis element k.
    let step = group.algebra_element_complex(xi);
    Ok(TaylorData {
        group: t.group.clone(),
        g: &t.g * linalg::expm(&step),
        coords: t.coords,
        dim: d,
        order: n_out,
        method: t.method,
        coeffs,
        errors,
    })
}

/// Nonnegative majorant coefficients c_0..c_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantSeries {
    #[serde(with = "serde_mat")]
    pub g: CMat,
    pub coeffs: Vec<f64>,
    /// Weight exponent R of n!^R; 0 is unweighted.
    pub weight: f64,
    pub order: usize,
    /// Number of directions summed over (needed for certified tails).
    pub dim: usize,
}

/// c_n = (n!^R / n!) sum_{|alpha| = n} |T(alpha)|.
pub fn majorant_coefficients(t: &TaylorData, weight: f64) -> MajorantSeries {
    let coeffs = t
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, block)| {
            let s = linalg::kahan_sum(block.iter().map(|z| z.norm()));
            s * ((weight - 1.0) * ln_factorial(n)).exp()
        })
        .collect();
    MajorantSeries { g: t.g.clone(), coeffs, weight, order: t.order, dim: t.dim }
}

/// Analytic sup envelope for a certified Cauchy tail: |phi| <= sup on a
/// coordinate ball of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub sup: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "kebab-case")]
pub enum Tail {
    Certified(f64),
    Heuristic(f64),
    /// The certified series diverges at this radius, or no extrapolation applies.
    Unavailable,
}

impl Tail {
    pub fn bound(&self) -> f64 {
        match *self {
            Tail::Certified(b) | Tail::Heuristic(b) => b,
            Tail::Unavailable => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantValue {
    pub value: f64,
    pub tail: Tail,
}

/// sup * sum_{n > N} (d r n / rho)^n / n!, finite when d r e < rho.
pub fn certified_tail(env: &TailEnvelope, dim: usize, r: f64, order: usize) -> Tail {
    let x = dim as f64 * r / env.radius;
    let q = x * std::f64::consts::E;
    if r == 0.0 {
        return Tail::Certified(0.0);
    }
    if q >= 1.0 {
        return Tail::Unavailable;
    }
    // Terms t_n have ratio t_{n+1}/t_n = x (1 + 1/n)^n < x e = q.
    let term = |n: usize| (n as f64 * (x * n as f64).ln() - ln_factorial(n)).exp();
    let mut acc = 0.0;
    let extra = 200;
    for n in order + 1..=order + extra {
        acc += term(n);
    }
    acc += term(order + extra + 1) / (1.0 - q);
    Tail::Certified(env.sup * acc)
}

/// Ratio extrapolation of the last three terms c_n r^n.
pub fn heuristic_tail(m: &MajorantSeries, r: f64) -> Tail {
    let n = m.order;
    if n < 2 {
        return Tail::Unavailable;
    }
    let s: Vec<f64> = (n - 2..=n).map(|k| m.coeffs[k] * r.powi(k as i32)).collect();
    if s[2] == 0.0 {
        return Tail::Heuristic(0.0);
    }
    let ratios: Vec<f64> = [(s[1], s[0]), (s[2], s[1])]
        .iter()
        .filter(|(_, b)| *b > 0.0)
        .map(|(a, b)| a / b)
        .collect();
    let q = ratios.iter().copied().fold(0.0, f64::max);
    if ratios.is_empty() || q >= 1.0 {
        return Tail::Unavailable;
    }
    Tail::Heuristic(s[2] * q / (1.0 - q))
}

/// sum_{n <= N} c_n r^n, with a certified tail when an envelope is given
/// and a heuristic one otherwise.
pub fn majorant_eval(m: &MajorantSeries, r: f64, env: Option<&TailEnvelope>) -> Result<MajorantValue> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument("radius must be nonnegative".into()));
    }
    let value = linalg::kahan_sum(m.coeffs.iter().enumerate().map(|(n, c)| c * r.powi(n as i32)));
    let tail = match env {
        Some(e) if m.weight == 0.0 => certified_tail(e, m.dim, r, m.order),
        _ => heuristic_tail(m, r),
    };
    Ok(MajorantValue { value, tail })
}

/// q_r(phi): the truncated majorant at the unit element.
pub fn seminorm_q(field: &Field, r: f64, n: usize, method: &DerivMethod) -> Result<f64> {
    let e = field.group().identity();
    let t = taylor_data(field, &e, n, method)?;
    Ok(majorant_eval(&majorant_coefficients(&t, 0.0), r, None)?.value)
}

/// Least-squares fit r_n ~ alpha + beta / n of the roots |c_n|^{1/n}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootFit {
    pub alpha: f64,
    pub beta: f64,
    /// Largest root in the window (the plain limsup probe).
    pub last_root: f64,
    pub window_start: usize,
}

/// Fit over the last third of orders. Neighbouring orders are paired and
/// only the larger root of each pair is kept, so series supported on every
/// other order are read by their upper envelope. Returns `None` when every
/// coefficient in the window vanishes.
pub fn root_fit(mags: &[f64]) -> Option<RootFit> {
    let n_max = mags.len().checked_sub(1)?;
    let start = (n_max - n_max / 3).max(1);
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut k = start;
    while k <= n_max {
        let pair_end = (k + 1).min(n_max);
        let best = (k..=pair_end)
            .filter(|&j| mags[j] > 0.0 && mags[j].is_finite())
            .map(|j| (j as f64, mags[j].powf(1.0 / j as f64)))
            .fold(None, |acc: Option<(f64, f64)>, p| match acc {
                Some(a) if a.1 >= p.1 => Some(a),
                _ => Some(p),
            });
        if let Some(p) = best {
            points.push(p);
        }
        k += 2;
    }
    if points.is_empty() {
        return None;
    }
    let last_root = points.iter().map(|p| p.1).fold(0.0, f64::max);
    if points.len() == 1 {
        return Some(RootFit { alpha: points[0].1, beta: 0.0, last_root, window_start: start });
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let np = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / np;
    let my = ys.iter().sum::<f64>() / np;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let alpha = my - beta * mx;
    Some(RootFit { alpha, beta, last_root, window_start: start })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithEntire,
    NotEntire,
    Inconclusive,
}

/// Decision thresholds on the extrapolated root limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntiretyThresholds {
    pub entire_below: f64,
    pub not_entire_above: f64,
}

impl Default for EntiretyThresholds {
    fn default() -> Self {
        Self { entire_below: 0.1, not_entire_above: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntiretyEvidence {
    pub verdict: Verdict,
    /// Always true: finite data cannot certify a limit.
    pub heuristic: bool,
    pub fit: Option<RootFit>,
}

pub fn entirety_heuristic(m: &MajorantSeries) -> Result<EntiretyEvidence> {
    entirety_heuristic_with(m, EntiretyThresholds::default())
}

pub fn entirety_heuristic_with(m: &MajorantSeries, th: EntiretyThresholds) -> Result<EntiretyEvidence> {
    if m.order < 10 {
        return Err(Error::InvalidArgument(format!(
            "the entirety heuristic needs order >= 10 (have {})",
            m.order
        )));
    }
    let fit = root_fit(&m.coeffs);
    let verdict = match fit {
        None => Verdict::ConsistentWithEntire,
        Some(f) if f.alpha < th.entire_below => Verdict::ConsistentWithEntire,
        Some(f) if f.alpha > th.not_entire_above => Verdict::NotEntire,
        Some(_) => Verdict::Inconclusive,
    };
    Ok(EntiretyEvidence { verdict, heuristic: true, fit })
}

/// Translation inequality: the majorant at g exp(xi) and radius r is
/// dominated by the majorant at g and radius r + |xi|_inf.
///
/// LHS truncates at N. RHS truncates at N + K and adds the tail of its
/// own series, which bounds what the truncation of the shift omits.
pub fn translation_check(
    field: &Field,
    g: &CMat,
    xi: &[f64],
    r: f64,
    n: usize,
    k: usize,
    method: &DerivMethod,
    env: Option<&TailEnvelope>,
) -> Result<Report> {
    let group = field.group();
    let moved = g * group.exp(xi)?;
    let lhs_data = taylor_data(field, &moved, n, method)?;
    let lhs = majorant_eval(&majorant_coefficients(&lhs_data, 0.0), r, None)?.value;
    let rhs_data = taylor_data(field, g, n + k, method)?;
    let xnorm = xi.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let rv = majorant_eval(&majorant_coefficients(&rhs_data, 0.0), r + xnorm, env)?;
    let tail = match rv.tail {
        Tail::Unavailable => 0.0,
        t => t.bound(),
    };
    let params = json!({
        "group": group.name,
        "xi": xi,
        "r": r,
        "N": n,
        "K": k,
        "tail": rv.tail,
    });
    Ok(Report::inequality("translation", params, lhs, rv.value + tail, 1e-12))
}

/// Majorant coefficients of all orders of a data set, exposed for reports.
pub fn block_sums(t: &TaylorData) -> Vec<f64> {
    t.coeffs.iter().map(|b| linalg::kahan_sum(b.iter().map(|z| z.norm()))).collect()
}

/// Words of order n paired with coefficients, for printing.
pub fn labelled_block(t: &TaylorData, n: usize) -> Vec<(Vec<usize>, Complex64)> {
    t.coeffs[n]
        .iter()
        .enumerate()
        .map(|(i, c)| (decode_index(i, n, t.dim), *c))
        .collect()
}

/// sum_alpha T(reverse alpha) xi^alpha, which equals [`taylor_eval`] since
/// the monomials commute.
pub fn taylor_eval_reversed(t: &TaylorData, xi: &[Complex64]) -> Result<Complex64> {
    let mut rev = t.clone();
    for n in 0..=t.order {
        for (i, slot) in rev.coeffs[n].iter_mut().enumerate() {
            let mut alpha = decode_index(i, n, t.dim);
            alpha.reverse();
            *slot = t.coeff(&alpha);
        }
    }
    taylor_eval(&rev, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;
    use crate::linalg::{c, ZERO};
    use std::f64::consts::PI;

    fn u1_identity_data(n: usize) -> TaylorData {
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        taylor_data(&z, &u1.identity(), n, &DerivMethod::Exact).unwrap()
    }

    #[test]
    fn majorant_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        let seven = catalog("constant:7", &sl2r).unwrap();
        let t = taylor_data(&seven, &sl2r.identity(), 3, &DerivMethod::Exact).unwrap();
        let m = majorant_coefficients(&t, 0.0);
        assert_eq!(m.coeffs, vec![7.0, 0.0, 0.0, 0.0]);
        assert_eq!(majorant_eval(&m, 10.0, None).unwrap().value, 7.0);

        let m = majorant_coefficients(&u1_identity_data(12), 0.0);
        let mut f = 1.0;
        for k in 0..=12 {
            if k > 0 {
                f *= k as f64;
            }
            let e = (2.0 * PI).powi(k) / f;
            assert!((m.coeffs[k as usize] - e).abs() <= 1e-13 * e);
        }

        let f11 = catalog("entry-11", &sl2r).unwrap();
        let t = taylor_data(&f11, &sl2r.identity(), 2, &DerivMethod::Exact).unwrap();
        let m = majorant_coefficients(&t, 0.0);
        assert_eq!(m.coeffs[1], 1.0);
        assert_eq!(m.coeffs[2], 1.0);
    }

    #[test]
    fn seminorm_of_u1_identity() {
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let q = seminorm_q(&z, 1.0, 40, &DerivMethod::Exact).unwrap();
        let e = (2.0 * PI).exp();
        assert!((q - e).abs() <= 1e-6 * e, "{q}");
    }

    #[test]
    fn taylor_eval_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        let f11 = catalog("entry-11", &sl2r).unwrap();
        let t = taylor_data(&f11, &sl2r.identity(), 12, &DerivMethod::Exact).unwrap();
        let v = taylor_eval(&t, &[c(0.1), c(0.0), c(0.0)]).unwrap();
        assert!((v - c(0.1f64.exp())).norm() < 1e-12);
        let v = taylor_eval(&t, &[c(0.0), c(0.2), c(0.0)]).unwrap();
        assert!((v - ONE).norm() < 1e-12);
        assert_eq!(taylor_eval(&t, &[ZERO; 3]).unwrap(), t.coeffs[0][0]);
    }

    #[test]
    fn shift_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        let f11 = catalog("entry-11", &sl2r).unwrap();
        let t = taylor_data(&f11, &sl2r.identity(), 13, &DerivMethod::Exact).unwrap();
        let xi = [c(0.1), ZERO, ZERO];
        let s = shift_taylor_data(&t, &xi, 0, 12).unwrap();
        assert!((s.coeffs[0][0] - c(0.1f64.exp())).norm() < 1e-12);
        let s = shift_taylor_data(&t, &xi, 1, 12).unwrap();
        let moved = sl2r.exp(&[0.1, 0.0, 0.0]).unwrap();
        for k in 0..3 {
            let exact = f11.exact_lie_derivative(&[k], &moved).unwrap();
            assert!((s.coeffs[1][k] - exact).norm() < 1e-10);
        }
        let same = shift_taylor_data(&t, &[ZERO; 3], 5, 8).unwrap();
        assert_eq!(same.coeffs, t.truncated(5).coeffs);
        assert!(matches!(shift_taylor_data(&t, &xi, 2, 12), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn entirety_examples() {
        let m = majorant_coefficients(&u1_identity_data(40), 0.0);
        assert_eq!(entirety_heuristic(&m).unwrap().verdict, Verdict::ConsistentWithEntire);
        let alt = MajorantSeries {
            g: linalg::identity(1),
            coeffs: (0..=40).map(|n| if n % 2 == 0 { 1.0 } else { 0.0 }).collect(),
            weight: 0.0,
            order: 40,
            dim: 1,
        };
        assert_eq!(entirety_heuristic(&alt).unwrap().verdict, Verdict::NotEntire);
        let zero = MajorantSeries { coeffs: vec![0.0; 41], ..alt.clone() };
        assert_eq!(entirety_heuristic(&zero).unwrap().verdict, Verdict::ConsistentWithEntire);
        let short = MajorantSeries { coeffs: vec![0.0; 5], order: 4, ..alt };
        assert!(entirety_heuristic(&short).is_err());
    }

    #[test]
    fn certified_tail_of_u1_identity() {
        let m = majorant_coefficients(&u1_identity_data(40), 0.0);
        // |z| = 1 on U(1): any radius works, the ball image stays on the circle.
        let env = TailEnvelope { sup: 1.0, radius: 10.0 };
        let v = majorant_eval(&m, 1.0, Some(&env)).unwrap();
        assert!(matches!(v.tail, Tail::Certified(b) if b < 1e-6));
        let v = majorant_eval(&m, 4.0, Some(&env)).unwrap();
        assert_eq!(v.tail, Tail::Unavailable);
    }

    #[test]
    fn translation_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        let seven = catalog("constant:7", &sl2r).unwrap();
        let rep = translation_check(&seven, &sl2r.identity(), &[0.2, 0.0, 0.0], 0.5, 8, 4, &DerivMethod::Exact, None).unwrap();
        assert!(rep.pass && rep.lhs == 7.0 && rep.slack == 0.0);
        let f11 = catalog("entry-11", &sl2r).unwrap();
        let rep = translation_check(&f11, &sl2r.identity(), &[0.2, 0.0, 0.0], 0.5, 8, 4, &DerivMethod::Exact, None).unwrap();
        assert!(rep.pass, "{rep:?}");
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let rep = translation_check(&z, &u1.identity(), &[0.3], 1.0, 8, 4, &DerivMethod::Exact, None).unwrap();
        assert!(rep.pass && rep.slack > 0.0);
    }

    #[test]
    fn reversal_symmetry() {
        let sl2r = registry_get("SL2R").unwrap();
        let f = catalog("adjoint", &sl2r).unwrap();
        let g = sl2r.exp(&[0.2, -0.1, 0.3]).unwrap();
        let t = taylor_data(&f, &g, 6, &DerivMethod::Exact).unwrap();
        let xi = [c(0.1), c(-0.2), c(0.15)];
        let a = taylor_eval(&t, &xi).unwrap();
        let b = taylor_eval_reversed(&t, &xi).unwrap();
        assert!((a - b).norm() <= 1e-12);
    }
}
