//! Iterated left-invariant derivatives by exact oracles, discrete Cauchy
//! integrals or nested central differences, and assembly of Taylor data.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{decode_index, Field, Regularity};
use crate::linalg::{self, c, CMat, ONE, ZERO};
use crate::taylor::{root_fit, Coords, TaylorData};

/// Default cap on the derivative order for sampled methods.
pub const DEFAULT_N_MAX: usize = 8;
/// Finite differences beyond this order amplify noise past any useful tolerance.
pub const FD_MAX_ORDER: usize = 3;
/// Largest number of coefficients a single Taylor data set may hold.
pub const MAX_COEFFICIENTS: f64 = 3.0e7;

/// A word alpha = (alpha_1..alpha_n) over the directions 0..d (zero-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|&&a| a >= d) {
            return Err(Error::InvalidArgument(format!("index {} outside 1..{d}", bad + 1)));
        }
        Ok(Self(entries))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Position in the dense lexicographic layout of its order.
    pub fn flat_index(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, a| acc * d + a)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

/// All d^n words of length n in lexicographic order.
pub fn enumerate_multiindices(d: usize, n: usize) -> Vec<MultiIndex> {
    if d == 0 {
        return if n == 0 { vec![MultiIndex(Vec::new())] } else { Vec::new() };
    }
    (0..d.pow(n as u32)).map(|i| MultiIndex(decode_index(i, n, d))).collect()
}

/// How derivatives are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DerivMethod {
    Exact,
    /// One trapezoid circle of `nodes` points and radius `radius` per variable.
    CauchyQuadrature { nodes: usize, radius: f64 },
    /// Nested central differences with `levels` Richardson levels.
    FiniteDifference { step: f64, levels: usize },
}

impl DerivMethod {
    pub fn quadrature() -> Self {
        DerivMethod::CauchyQuadrature { nodes: 32, radius: 0.5 }
    }

    pub fn finite_difference() -> Self {
        DerivMethod::FiniteDifference { step: 0.05, levels: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DerivMethod::Exact => Ok(()),
            DerivMethod::CauchyQuadrature { nodes, radius } => {
                if nodes < 8 || !nodes.is_power_of_two() {
                    return Err(Error::InvalidArgument(format!("node count {nodes} must be a power of two >= 8")));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument("quadrature radius must be positive".into()));
                }
                Ok(())
            }
            DerivMethod::FiniteDifference { step, levels } => {
                if !(step > 0.0 && step.is_finite()) || levels == 0 {
                    return Err(Error::InvalidArgument("step must be positive and levels >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Field evaluations needed for one coefficient of order n.
    pub fn cost(&self, n: usize) -> f64 {
        match *self {
            DerivMethod::Exact => n as f64,
            DerivMethod::CauchyQuadrature { nodes, .. } => (nodes as f64).powi(n as i32),
            DerivMethod::FiniteDifference { levels, .. } => levels as f64 * 2f64.powi(n as i32),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DerivMethod::Exact => "exact".into(),
            DerivMethod::CauchyQuadrature { .. } => "cauchy-quadrature".into(),
            DerivMethod::FiniteDifference { .. } => "finite-difference".into(),
        }
    }
}

fn check_method(field: &Field, method: &DerivMethod, n: usize, n_max: usize) -> Result<()> {
    method.validate()?;
    match method {
        DerivMethod::Exact => {
            if !field.is_exact() {
                return Err(Error::UnsupportedMethod("exact derivatives need a representative field".into()));
            }
        }
        DerivMethod::CauchyQuadrature { .. } => {
            if !field.group().is_complex || field.regularity() != Regularity::Holomorphic {
                return Err(Error::UnsupportedMethod(
                    "Cauchy quadrature needs a holomorphic field on a complex group".into(),
                ));
            }
            if n > n_max {
                return Err(Error::Refused {
                    reason: format!("order {n} exceeds the configured maximum {n_max}"),
                    cost: method.cost(n),
                });
            }
        }
        DerivMethod::FiniteDifference { .. } => {
            if n > FD_MAX_ORDER.min(n_max) {
                return Err(Error::Refused {
                    reason: format!("finite differences are limited to order {FD_MAX_ORDER}"),
                    cost: method.cost(n),
                });
            }
        }
    }
    Ok(())
}

fn unit(d: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

/// Precomputed one-parameter factors exp(z_j e_a) for a set of basis
/// directions and node values.
struct Factors {
    /// mats[a][j]
    mats: Vec<Vec<CMat>>,
    /// Weight attached to node j.
    weights: Vec<Complex64>,
}

fn quadrature_factors(field: &Field, nodes: usize, radius: f64) -> Factors {
    let group = field.group();
    let zs: Vec<Complex64> = (0..nodes)
        .map(|j| Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64))
        .collect();
    let mats = group
        .basis
        .iter()
        .map(|e| zs.iter().map(|z| linalg::expm(&(e * *z))).collect())
        .collect();
    // d/dz f(0) ~ (1/M) sum_j f(z_j) / z_j.
    let weights = zs.iter().map(|z| ONE / (z * nodes as f64)).collect();
    Factors { mats, weights }
}

fn difference_factors(field: &Field, h: f64) -> Factors {
    let group = field.group();
    let mats = group
        .basis
        .iter()
        .map(|e| vec![linalg::expm(&(e * c(h))), linalg::expm(&(e * c(-h)))])
        .collect();
    Factors { mats, weights: vec![c(1.0 / (2.0 * h)), c(-1.0 / (2.0 * h))] }
}

/// sum over node tuples of f(g F[a_1][j_1] .. F[a_n][j_n]) prod w_{j_k},
/// with the running maximum of |f| for error estimates.
fn nested_sum(field: &Field, g: &CMat, alpha: &[usize], f: &Factors) -> Result<(Complex64, f64)> {
    let n = alpha.len();
    let m = g.nrows();
    let mut bufs: Vec<CMat> = (0..=n).map(|_| CMat::zeros(m, m)).collect();
    bufs[0].copy_from(g);
    let mut acc = ZERO;
    let mut fmax: f64 = 0.0;
    fn rec(
        field: &Field,
        alpha: &[usize],
        f: &Factors,
        level: usize,
        weight: Complex64,
        bufs: &mut [CMat],
        acc: &mut Complex64,
        fmax: &mut f64,
    ) -> Result<()> {
        if level == alpha.len() {
            let v = field.eval_raw(&bufs[level])?;
            *fmax = fmax.max(v.norm());
            *acc += v * weight;
            return Ok(());
        }
        for (j, mat) in f.mats[alpha[level]].iter().enumerate() {
            let (head, tail) = bufs.split_at_mut(level + 1);
            head[level].mul_to(mat, &mut tail[0]);
            rec(field, alpha, f, level + 1, weight * f.weights[j], bufs, acc, fmax)?;
        }
        Ok(())
    }
    rec(field, alpha, f, 0, ONE, &mut bufs, &mut acc, &mut fmax)?;
    Ok((acc, fmax))
}

/// Derivative with an error estimate.
fn derivative_with_error(
    field: &Field,
    alpha: &[usize],
    g: &CMat,
    method: &DerivMethod,
    factors: &[Factors],
) -> Result<(Complex64, f64)> {
    let n = alpha.len();
    match *method {
        DerivMethod::Exact => {
            let d = field.group().dim;
            let dirs: Vec<Vec<Complex64>> = alpha.iter().map(|&a| unit(d, a)).collect();
            let v = field.exact_derivative(&dirs, g)?;
            Ok((v, 0.0))
        }
        DerivMethod::CauchyQuadrature { radius, .. } => {
            let (v, fmax) = nested_sum(field, g, alpha, &factors[0])?;
            // Roundoff of the node sum, magnified by 1/radius^n.
            let err = 8.0 * f64::EPSILON * fmax.max(1e-300) / radius.powi(n as i32);
            Ok((v, err))
        }
        DerivMethod::FiniteDifference { levels, .. } => {
            if n == 0 {
                return Ok((field.eval_raw(g)?, 0.0));
            }
            // Richardson table on D(h) = D + c_1 h^2 + c_2 h^4 + ...
            let mut table: Vec<Complex64> = Vec::with_capacity(levels);
            let mut fmax: f64 = 0.0;
            for f in factors.iter().take(levels) {
                let (v, fm) = nested_sum(field, g, alpha, f)?;
                fmax = fmax.max(fm);
                table.push(v);
            }
            let mut last_diff = 0.0;
            for k in 1..levels {
                let factor = 4f64.powi(k as i32);
                let prev = table.clone();
                for i in k..levels {
                    table[i] = (prev[i] * factor - prev[i - 1]) / (factor - 1.0);
                }
                last_diff = (table[levels - 1] - prev[levels - 1]).norm();
            }
            let DerivMethod::FiniteDifference { step, .. } = *method else { unreachable!() };
            let hmin = step / 2f64.powi(levels as i32 - 1);
            let round = 16.0 * f64::EPSILON * fmax / hmin.powi(n as i32);
            Ok((table[levels - 1], last_diff + round))
        }
    }
}

fn factors_for(field: &Field, method: &DerivMethod) -> Vec<Factors> {
    match *method {
        DerivMethod::Exact => Vec::new(),
        DerivMethod::CauchyQuadrature { nodes, radius } => vec![quadrature_factors(field, nodes, radius)],
        DerivMethod::FiniteDifference { step, levels } => (0..levels)
            .map(|l| difference_factors(field, step / 2f64.powi(l as i32)))
            .collect(),
    }
}

/// L(alpha) phi(g) by the chosen method.
pub fn lie_derivative(field: &Field, alpha: &MultiIndex, g: &CMat, method: &DerivMethod) -> Result<Complex64> {
    lie_derivative_capped(field, alpha, g, method, DEFAULT_N_MAX)
}

pub fn lie_derivative_capped(
    field: &Field,
    alpha: &MultiIndex,
    g: &CMat,
    method: &DerivMethod,
    n_max: usize,
) -> Result<Complex64> {
    let d = field.group().dim;
    MultiIndex::new(alpha.0.clone(), d)?;
    check_method(field, method, alpha.order(), n_max)?;
    let factors = factors_for(field, method);
    Ok(derivative_with_error(field, &alpha.0, g, method, &factors)?.0)
}

/// Basis directions covered by Taylor data in the given coordinates.
pub fn directions(field: &Field, coords: Coords) -> Result<Vec<Vec<Complex64>>> {
    let group = field.group();
    let count = match coords {
        Coords::Real => group.dim,
        Coords::ComplexSpan => {
            if !group.is_complex {
                return Err(Error::InvalidArgument("complex span coordinates need a complex group".into()));
            }
            group.complex_dim()
        }
    };
    Ok((0..count).map(|k| unit(group.dim, k)).collect())
}

/// Taylor data over all real basis directions.
pub fn taylor_data(field: &Field, g: &CMat, n: usize, method: &DerivMethod) -> Result<TaylorData> {
    taylor_data_in(field, g, n, method, Coords::Real)
}

/// Taylor data in the requested coordinates. Exact data is assembled in
/// bulk; sampled methods run one coefficient per task.
pub fn taylor_data_in(field: &Field, g: &CMat, n: usize, method: &DerivMethod, coords: Coords) -> Result<TaylorData> {
    let dirs = directions(field, coords)?;
    let dim = dirs.len();
    let n_cap = match method {
        DerivMethod::Exact => usize::MAX,
        _ => DEFAULT_N_MAX,
    };
    check_method(field, method, n, n_cap)?;
    let count: f64 = (0..=n).map(|k| (dim as f64).powi(k as i32)).sum();
    if count > MAX_COEFFICIENTS {
        return Err(Error::Refused {
            reason: format!("order {n} in {dim} directions needs {count:e} coefficients"),
            cost: count * method.cost(n),
        });
    }
    let (coeffs, errors) = match method {
        DerivMethod::Exact => {
            let coeffs = field.exact_taylor(g, &dirs, n)?;
            (coeffs, vec![0.0; n + 1])
        }
        _ => {
            let factors = factors_for(field, method);
            let mut coeffs = Vec::with_capacity(n + 1);
            let mut errors = Vec::with_capacity(n + 1);
            for order in 0..=n {
                let block: Vec<(Complex64, f64)> = (0..dim.pow(order as u32))
                    .into_par_iter()
                    .map(|idx| derivative_with_error(field, &decode_index(idx, order, dim), g, method, &factors))
                    .collect::<Result<_>>()?;
                errors.push(block.iter().map(|b| b.1).fold(0.0, f64::max));
                coeffs.push(block.into_iter().map(|b| b.0).collect());
            }
            (coeffs, errors)
        }
    };
    Ok(TaylorData {
        group: field.group().name.clone(),
        g: g.clone(),
        coords,
        dim,
        order: n,
        method: *method,
        coeffs,
        errors,
    })
}

/// Outcome of the one-variable radius probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Estimated radius of convergence; `f64::INFINITY` when the probe
    /// sees super-geometric decay or every coefficient underflows.
    pub radius: f64,
    pub heuristic: bool,
}

/// Settings of the sampled one-variable probe used for non-exact fields.
#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub nodes: usize,
    pub radius: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { nodes: 256, radius: 0.5 }
    }
}

/// Coefficients a_k = L_xi^k phi(g) / k! for k <= k_max, with a noise floor
/// per coefficient (zero for exact data).
pub fn one_variable_coefficients(
    field: &Field,
    g: &CMat,
    xi: &[Complex64],
    k_max: usize,
    probe: ProbeOptions,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if field.is_exact() {
        let stream = field.exact_taylor(g, &[xi.to_vec()], k_max)?;
        let mut fact = 1.0;
        let mut out = Vec::with_capacity(k_max + 1);
        for (k, block) in stream.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            out.push(block[0] / fact);
        }
        return Ok((out, vec![0.0; k_max + 1]));
    }
    if field.regularity() == Regularity::SmoothOnly {
        return Err(Error::UnsupportedMethod("the radius probe needs an analytic field".into()));
    }
    let group = field.group();
    let x = group.algebra_element_complex(xi);
    let m = probe.nodes.max(2 * k_max + 2).next_power_of_two();
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let z = Complex64::from_polar(probe.radius, 2.0 * PI * j as f64 / m as f64);
        samples.push(field.eval_raw(&(g * linalg::expm(&(&x * z))))?);
    }
    let fmax = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut floors = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut acc = linalg::CompensatedSum::new();
        for (j, s) in samples.iter().enumerate() {
            let angle = -2.0 * PI * ((j * k) % m) as f64 / m as f64;
            acc.add(s * Complex64::from_polar(1.0, angle));
        }
        coeffs.push(acc.value() / (m as f64 * probe.radius.powi(k as i32)));
        floors.push(64.0 * f64::EPSILON * fmax / probe.radius.powi(k as i32));
    }
    Ok((coeffs, floors))
}

/// Heuristic radius of convergence of s -> phi(g exp(s xi)) from the
/// coefficient window k <= k_max.
pub fn radius_estimate(field: &Field, g: &CMat, xi: &[Complex64], k_max: usize) -> Result<RadiusEstimate> {
    let (coeffs, floors) = one_variable_coefficients(field, g, xi, k_max, ProbeOptions::default())?;
    let mags: Vec<f64> = coeffs
        .iter()
        .zip(&floors)
        .map(|(a, f)| if a.norm() <= 100.0 * f { 0.0 } else { a.norm() })
        .collect();
    let radius = match root_fit(&mags) {
        None => f64::INFINITY,
        Some(fit) => {
            if fit.alpha <= 0.1 * fit.last_root {
                f64::INFINITY
            } else {
                1.0 / fit.alpha
            }
        }
    };
    Ok(RadiusEstimate { radius, heuristic: true })
}
