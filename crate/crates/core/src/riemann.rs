//! Left-invariant Riemannian metrics: curve lengths and certified upper
//! bounds on the distance. No geodesic solver; every consumer only needs
//! upper bounds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupModel;
use crate::linalg::{self, c, serde_mat, CMat};

/// Budget of segments in a broken-exponential candidate curve.
pub const SEGMENT_BUDGET: usize = 16;
/// Comparison slack for ball membership and chain invariants.
pub const BOUND_TOL: f64 = 1e-12;

/// A left-invariant metric given by its Gram matrix at the unit element.
#[derive(Debug, Clone)]
pub struct MetricModel {
    pub group: Arc<GroupModel>,
    pub gram: DMatrix<f64>,
    min_eig: f64,
}

impl MetricModel {
    pub fn new(group: Arc<GroupModel>, gram: DMatrix<f64>) -> Result<Self> {
        let d = group.dim;
        if gram.nrows() != d || gram.ncols() != d {
            return Err(Error::InvalidArgument(format!("gram matrix must be {d}x{d}")));
        }
        let asym = (&gram - gram.transpose()).abs().max();
        if asym > 1e-14 * gram.abs().max().max(1.0) {
            return Err(Error::InvalidArgument("gram matrix is not symmetric".into()));
        }
        let min_eig = gram.clone().symmetric_eigen().eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::InvalidArgument("gram matrix is not positive definite".into()));
        }
        Ok(Self { group, gram, min_eig })
    }

    /// The identity Gram matrix in the fixed basis.
    pub fn standard(group: Arc<GroupModel>) -> Self {
        let d = group.dim;
        Self::new(group, DMatrix::identity(d, d)).expect("identity is positive definite")
    }

    pub fn norm(&self, xi: &[f64]) -> f64 {
        let v = DVector::from_row_slice(xi);
        (v.transpose() * &self.gram * &v)[(0, 0)].max(0.0).sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    /// Constant c with ||xi||_op <= c ||xi||_gram for every algebra element.
    pub fn op_norm_factor(&self) -> f64 {
        let s: f64 = self.group.basis.iter().map(|b| linalg::op_norm(b).powi(2)).sum();
        s.sqrt() / self.min_eig.sqrt()
    }

    /// ||log(x)||_gram when the principal logarithm of x lies in the algebra.
    pub fn log_length(&self, x: &CMat) -> Option<f64> {
        self.group.log(x).ok().map(|xi| self.norm(&xi))
    }
}

/// A sampled path t -> g(t) on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPath {
    pub group: String,
    pub times: Vec<f64>,
    #[serde(with = "serde_mat::vec")]
    pub samples: Vec<CMat>,
}

impl GroupPath {
    pub fn new(group: &GroupModel, times: Vec<f64>, samples: Vec<CMat>) -> Result<Self> {
        if times.len() != samples.len() || times.is_empty() {
            return Err(Error::InvalidArgument("path needs matching, nonempty times and samples".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("path times must increase strictly from 0 to 1".into()));
        }
        Ok(Self { group: group.name.clone(), times, samples })
    }

    /// Product of exponential segments: the k-th segment runs
    /// exp(s xi_k) for s in [0, 1] after the previous segments, sampled
    /// at `per_segment` points. Durations are proportional to `weights`.
    pub fn from_segments(group: &GroupModel, start: &CMat, segments: &[Vec<f64>], per_segment: usize) -> Result<Self> {
        let per = per_segment.max(1);
        let total = segments.len().max(1) as f64;
        let mut times = vec![0.0];
        let mut samples = vec![start.clone()];
        let mut base = start.clone();
        for (k, xi) in segments.iter().enumerate() {
            let x = group.algebra_element(xi);
            for j in 1..=per {
                let s = j as f64 / per as f64;
                times.push((k as f64 + s) / total);
                samples.push(&base * linalg::expm(&(&x * c(s))));
            }
            base = samples.last().unwrap().clone();
        }
        if segments.is_empty() {
            times.push(1.0);
            samples.push(start.clone());
        }
        *times.last_mut().unwrap() = 1.0;
        Self::new(group, times, samples)
    }

    /// Path from complex span coordinates of each segment (complex groups).
    pub fn from_complex_segments(
        group: &GroupModel,
        start: &CMat,
        segments: &[Vec<Complex64>],
        per_segment: usize,
    ) -> Result<Self> {
        let real: Vec<Vec<f64>> = segments.iter().map(|w| group.complex_to_real(w)).collect();
        Self::from_segments(group, start, &real, per_segment)
    }

    pub fn start(&self) -> &CMat {
        &self.samples[0]
    }

    pub fn end(&self) -> &CMat {
        self.samples.last().unwrap()
    }
}

/// Sum of ||log(g_i^-1 g_{i+1})||_gram: the composite midpoint rule applied
/// to the left-trivialized velocity.
pub fn curve_length(path: &GroupPath, metric: &MetricModel) -> Result<f64> {
    let mut parts = Vec::with_capacity(path.samples.len());
    for (i, w) in path.samples.windows(2).enumerate() {
        let step = linalg::inverse(&w[0])? * &w[1];
        let len = metric.log_length(&step).ok_or_else(|| {
            Error::Resample(format!("samples {i} and {} are not in a common log chart", i + 1))
        })?;
        parts.push(len);
    }
    Ok(linalg::kahan_sum(parts))
}

/// Upper bound on the left-invariant distance between g and h: the
/// shortest broken-exponential candidate curve from 1 to g^-1 h.
pub fn distance_upper_bound(g: &CMat, h: &CMat, metric: &MetricModel) -> Result<f64> {
    let x = linalg::inverse(g)? * h;
    bound_from_unit(&x, metric)
}

/// Two-segment lengths through midpoints exp(eta), with eta refined by
/// coordinate search starting from log(x)/2.
fn refine_midpoint(x: &CMat, metric: &MetricModel, start: Vec<f64>, best: f64) -> f64 {
    let group = &metric.group;
    let len = |eta: &[f64]| -> Option<f64> {
        let a = group.exp(eta).ok()?;
        let rest = linalg::inverse(&a).ok()? * x;
        Some(metric.norm(eta) + metric.log_length(&rest)?)
    };
    let mut eta = start;
    let mut cur = match len(&eta) {
        Some(v) => v.min(best),
        None => return best,
    };
    let mut step = 0.25 * metric.norm(&eta).max(0.05);
    for _ in 0..40 {
        let mut improved = false;
        for k in 0..group.dim {
            for s in [step, -step] {
                let mut trial = eta.clone();
                trial[k] += s;
                if let Some(v) = len(&trial) {
                    if v < cur - 1e-15 {
                        cur = v;
                        eta = trial;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    cur
}

fn bound_from_unit(x: &CMat, metric: &MetricModel) -> Result<f64> {
    let group = &metric.group;
    if linalg::max_abs(&(x - group.identity())) == 0.0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    let base = group.log(x).ok();
    if let Some(xi) = &base {
        best = metric.norm(xi);
    }
    // Two-segment candidates exp(s e_k) followed by a log segment.
    for k in 0..group.dim {
        for s in [-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0] {
            let mut eta = vec![0.0; group.dim];
            eta[k] = s;
            let a = group.exp(&eta)?;
            let rest = linalg::inverse(&a)? * x;
            if let Some(l) = metric.log_length(&rest) {
                best = best.min(metric.norm(&eta) + l);
            }
        }
    }
    if let Some(xi) = &base {
        let half: Vec<f64> = xi.iter().map(|v| 0.5 * v).collect();
        best = refine_midpoint(x, metric, half, best);
    }
    if base.is_some() {
        return Ok(best);
    }
    // No logarithm nearby: walk k equal steps along a coordinate direction
    // or a signed pair of them, then close with a log segment.
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..group.dim {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; group.dim];
            v[j] = s;
            dirs.push(v.clone());
            for l in j + 1..group.dim {
                for t in [-1.0, 1.0] {
                    let mut w = v.clone();
                    w[l] = t;
                    dirs.push(w);
                }
            }
        }
    }
    for k in 2..=SEGMENT_BUDGET {
        for dir in &dirs {
            let eta: Vec<f64> = dir.iter().map(|v| v * std::f64::consts::PI / k as f64).collect();
            let step = group.exp(&eta)?;
            let mut acc = group.identity();
            for used in 1..k {
                acc = &acc * &step;
                let rest = linalg::inverse(&acc)? * x;
                if let Some(l) = metric.log_length(&rest) {
                    best = best.min(used as f64 * metric.norm(&eta) + l);
                }
            }
        }
        if best.is_finite() {
            return Ok(best);
        }
    }
    Err(Error::Unbounded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    InsideCertified,
    Unknown,
}

/// Certifies g in the closed ball of radius r about `center`; never
/// certifies the outside.
pub fn ball_membership_upper(g: &CMat, center: &CMat, r: f64, metric: &MetricModel) -> Membership {
    match distance_upper_bound(center, g, metric) {
        Ok(b) if b <= r + BOUND_TOL => Membership::InsideCertified,
        _ => Membership::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry_get;

    #[test]
    fn metric_validation() {
        let u1 = registry_get("U1").unwrap();
        assert!(MetricModel::new(u1.clone(), DMatrix::from_element(1, 1, -1.0)).is_err());
        let sl2r = registry_get("SL2R").unwrap();
        let asym = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(MetricModel::new(sl2r, asym).is_err());
    }

    #[test]
    fn length_examples() {
        let u1 = registry_get("U1").unwrap();
        let m = MetricModel::standard(u1.clone());
        let p = GroupPath::from_segments(&u1, &u1.identity(), &[vec![1.0]], 64).unwrap();
        assert!((curve_length(&p, &m).unwrap() - 1.0).abs() < 1e-6);
        let still = GroupPath::from_segments(&u1, &u1.identity(), &[vec![0.0]], 8).unwrap();
        assert_eq!(curve_length(&still, &m).unwrap(), 0.0);
        let sl2r = registry_get("SL2R").unwrap();
        let m = MetricModel::standard(sl2r.clone());
        let xi = vec![0.7 * 0.6, 0.7 * 0.8, 0.0];
        let p = GroupPath::from_segments(&sl2r, &sl2r.identity(), &[xi], 32).unwrap();
        assert!((curve_length(&p, &m).unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn distance_examples() {
        let u1 = registry_get("U1").unwrap();
        let m = MetricModel::standard(u1.clone());
        let e = u1.identity();
        assert_eq!(distance_upper_bound(&e, &e, &m).unwrap(), 0.0);
        let g = u1.exp(&[0.1]).unwrap();
        assert!((distance_upper_bound(&e, &g, &m).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(ball_membership_upper(&u1.exp(&[0.3]).unwrap(), &e, 0.2, &m), Membership::Unknown);
        assert_eq!(ball_membership_upper(&g, &e, 0.2, &m), Membership::InsideCertified);
        assert_eq!(ball_membership_upper(&e, &e, 0.0, &m), Membership::InsideCertified);

        let sl2r = registry_get("SL2R").unwrap();
        let m = MetricModel::standard(sl2r.clone());
        let (a, b) = (vec![0.3, -0.2, 0.1], vec![-0.1, 0.4, 0.2]);
        let h = sl2r.exp(&a).unwrap() * sl2r.exp(&b).unwrap();
        let bound = distance_upper_bound(&sl2r.identity(), &h, &m).unwrap();
        assert!(bound <= m.norm(&a) + m.norm(&b) + 1e-12);
    }

    #[test]
    fn rotation_by_pi_is_bounded() {
        // exp(pi (E - F)) = -1 has no principal logarithm.
        let sl2r = registry_get("SL2R").unwrap();
        let m = MetricModel::standard(sl2r.clone());
        let x = sl2r.exp(&[0.0, std::f64::consts::PI, -std::f64::consts::PI]).unwrap();
        let b = distance_upper_bound(&sl2r.identity(), &x, &m).unwrap();
        assert!(b.is_finite() && b <= m.norm(&[0.0, std::f64::consts::PI, -std::f64::consts::PI]) + 1e-9);
    }
}
