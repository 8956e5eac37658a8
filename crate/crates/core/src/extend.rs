//! Holomorphic shadows, Cauchy-Riemann residuals, Steiner chains and
//! analytic continuation from a real group into its complexification.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::derive::{
    lie_derivative, one_variable_coefficients, radius_estimate, taylor_data_in, DerivMethod,
    MultiIndex, ProbeOptions,
};
use crate::error::{Error, Result};
use crate::fields::{Field, Regularity};
use crate::group::{circle_covering, GroupModel};
use crate::linalg::{self, c, serde_mat, CMat, ONE};
use crate::report::Report;
use crate::riemann::{ball_membership_upper, distance_upper_bound, GroupPath, Membership, MetricModel, BOUND_TOL};
use crate::taylor::{heuristic_tail, majorant_coefficients, shift_taylor_data, taylor_eval, Coords, TaylorData, Tail};

/// Samples per segment of a default path.
pub const PATH_SAMPLES: usize = 64;

/// max_k |L(i e_k) phi(g) - i L(e_k) phi(g)| over the complex span basis.
/// Exact fields are differentiated exactly, others by finite differences.
pub fn cauchy_riemann_residual(field: &Field, g: &CMat) -> Result<f64> {
    let group = field.group();
    if !group.is_complex {
        return Err(Error::InvalidArgument(format!("{} is not a complex group", group.name)));
    }
    let method = if field.is_exact() { DerivMethod::Exact } else { DerivMethod::finite_difference() };
    let h = group.complex_dim();
    let mut worst: f64 = 0.0;
    for k in 0..h {
        let real = lie_derivative(field, &MultiIndex(vec![k]), g, &method)?;
        let imag = lie_derivative(field, &MultiIndex(vec![k + h]), g, &method)?;
        worst = worst.max((imag - linalg::I * real).norm());
    }
    Ok(worst)
}

/// Value of the identity-based Taylor series at complexified coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shadow {
    pub value: Complex64,
    pub tail: Tail,
    /// Set when the coordinates leave the probed convergence region.
    pub warning: Option<String>,
}

fn complex_link(group: &GroupModel) -> Result<Arc<GroupModel>> {
    Ok(group
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", group.name)))?
        .partner
        .clone())
}

/// phi_0(exp zeta) = Taylor_phi(1, (T eta)^-1 zeta) for partner span
/// coordinates zeta, from order-`n` data at the unit element.
pub fn holomorphic_shadow(field: &Field, zeta: &[Complex64], n: usize) -> Result<Shadow> {
    let group = field.group();
    let partner = complex_link(group)?;
    if zeta.len() != partner.complex_dim() {
        return Err(Error::InvalidArgument(format!(
            "expected {} complex coordinates, got {}",
            partner.complex_dim(),
            zeta.len()
        )));
    }
    let a = group.complexified_tangent_inverse()?;
    let w: Vec<Complex64> = (0..group.dim).map(|i| (0..zeta.len()).map(|j| a[(i, j)] * zeta[j]).sum()).collect();
    let e = group.identity();
    let r = sup_norm(&w);
    if r == 0.0 {
        return Ok(Shadow { value: field.eval_raw(&e)?, tail: Tail::Certified(0.0), warning: None });
    }
    if field.regularity() == Regularity::SmoothOnly {
        return Err(Error::UnsupportedMethod("a smooth-only field has no shadow".into()));
    }
    // Summing each order-n block at w is the one-variable series of
    // s -> phi(exp(s w / r)) at s = r.
    let dir: Vec<Complex64> = w.iter().map(|z| z / r).collect();
    let (a1, _) = one_variable_coefficients(field, &e, &dir, n, ProbeOptions::default())?;
    let mut acc = linalg::CompensatedSum::new();
    for (k, ak) in a1.iter().enumerate() {
        acc.add(ak * r.powi(k as i32));
    }
    let value = acc.value();
    let series = crate::taylor::MajorantSeries {
        g: e.clone(),
        coeffs: a1.iter().map(|z| z.norm()).collect(),
        weight: 1.0,
        order: n,
        dim: 1,
    };
    let tail = heuristic_tail(&series, r);
    let probe = radius_estimate(field, &e, &dir, 24)?;
    let warning = (r >= probe.radius)
        .then(|| format!("coordinates of size {r} reach the probed radius {}", probe.radius));
    Ok(Shadow { value, tail, warning })
}

/// A subdivision of a sampled path into ball-to-ball steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinerChain {
    pub group: String,
    pub radius: f64,
    pub margin: f64,
    pub times: Vec<f64>,
    /// Indices of the centers among the path samples.
    pub indices: Vec<usize>,
    #[serde(with = "serde_mat::vec")]
    pub centers: Vec<CMat>,
}

impl SteinerChain {
    /// Number of steps k.
    pub fn steps(&self) -> usize {
        self.centers.len().saturating_sub(1)
    }
}

/// Greedy subdivision: a new center is the last sample whose distance
/// bound from the current center stays within r (1 - margin).
pub fn steiner_chain(path: &GroupPath, r: f64, margin: f64, metric: &MetricModel) -> Result<SteinerChain> {
    if !(r > 0.0) || !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument("need r > 0 and 0 <= margin < 1".into()));
    }
    let reach = r * (1.0 - margin) + BOUND_TOL;
    let s = &path.samples;
    let mut indices = vec![0];
    let mut i = 1;
    while i < s.len() {
        let center = *indices.last().unwrap();
        let b = distance_upper_bound(&s[center], &s[i], metric).unwrap_or(f64::INFINITY);
        if b <= reach {
            i += 1;
            continue;
        }
        if i - 1 == center {
            return Err(Error::Resample(format!(
                "samples {} and {i} are further apart than the chain radius {r}",
                i - 1
            )));
        }
        indices.push(i - 1);
    }
    if *indices.last().unwrap() != s.len() - 1 {
        indices.push(s.len() - 1);
    }
    if s.len() == 1 {
        indices.push(0);
    }
    Ok(SteinerChain {
        group: path.group.clone(),
        radius: r,
        margin,
        times: indices.iter().map(|&k| path.times[k]).collect(),
        centers: indices.iter().map(|&k| s[k].clone()).collect(),
        indices,
    })
}

/// Recertifies both chain invariants: consecutive centers within r, and
/// every sample inside the ball of the center that precedes it.
pub fn verify_chain(chain: &SteinerChain, path: &GroupPath, metric: &MetricModel) -> Report {
    let mut worst_step: f64 = 0.0;
    for w in chain.centers.windows(2) {
        worst_step = worst_step.max(distance_upper_bound(&w[0], &w[1], metric).unwrap_or(f64::INFINITY));
    }
    let mut uncovered = 0usize;
    let mut seg = 0;
    for (i, g) in path.samples.iter().enumerate() {
        while seg + 1 < chain.indices.len() && chain.indices[seg + 1] <= i {
            seg += 1;
        }
        let own = ball_membership_upper(g, &chain.centers[seg], chain.radius, metric);
        let covered = own == Membership::InsideCertified
            || chain
                .centers
                .iter()
                .any(|ctr| ball_membership_upper(g, ctr, chain.radius, metric) == Membership::InsideCertified);
        if !covered {
            uncovered += 1;
        }
    }
    let mut rep = Report::inequality(
        "steiner-chain",
        json!({ "group": chain.group, "r": chain.radius, "k": chain.steps(), "uncovered": uncovered }),
        worst_step,
        chain.radius,
        0.0,
    );
    rep.pass &= uncovered == 0 && worst_step <= chain.radius + BOUND_TOL;
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuationMode {
    /// Recompute when exact data exists, otherwise compound (one complex
    /// direction only).
    Auto,
    /// Exact data at every center, with a shift cross-check per step.
    Recompute,
    /// Pure re-expansion of the identity data, losing K orders per step.
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Steiner radius in the standard metric of the complexification;
    /// `None` picks [`auto_radius`].
    pub radius: Option<f64>,
    pub margin: f64,
    /// Order N kept at each center.
    pub order: usize,
    /// Shift order K.
    pub shift_order: usize,
    /// Orders compared between shifted and recomputed data.
    pub cross_check_order: usize,
    /// Cumulative truncation estimate that aborts the continuation.
    pub budget: f64,
    pub mode: ContinuationMode,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            radius: None,
            margin: 0.05,
            order: 8,
            shift_order: 8,
            cross_check_order: 2,
            budget: 1e-6,
            mode: ContinuationMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub xi: Vec<Complex64>,
    pub xi_norm: f64,
    /// Order-0 value of the data at the new center.
    pub value: Complex64,
    /// Order-0 value obtained by shifting the previous data.
    pub shifted_value: Complex64,
    /// Largest deviation, relative to max(1, |coefficient|), between shifted
    /// and recomputed coefficients of order <= cross_check_order; zero in
    /// compound mode.
    pub deviation: f64,
    pub error_estimate: f64,
}

/// Centers of a continuation with their Taylor data and step metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ContinuationState {
    pub group: String,
    pub mode: Option<ContinuationMode>,
    #[serde(with = "serde_mat::vec")]
    pub centers: Vec<CMat>,
    pub data: Vec<TaylorData>,
    pub steps: Vec<StepRecord>,
    pub cumulative_error: f64,
}

impl ContinuationState {
    /// Largest entry of center_{l+1} - center_l exp(xi_l).
    pub fn center_residual(&self) -> Result<f64> {
        let group = crate::group::registry_get(&self.group)?;
        let mut worst: f64 = 0.0;
        for (s, w) in self.steps.iter().zip(self.centers.windows(2)) {
            let pred = &w[0] * group.exp_complex(&s.xi)?;
            worst = worst.max(linalg::max_abs(&(pred - &w[1])));
        }
        Ok(worst)
    }

    pub fn final_data(&self) -> &TaylorData {
        self.data.last().expect("a continuation has at least one center")
    }
}

fn coefficient_deviation(a: &TaylorData, b: &TaylorData, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=n.min(a.order).min(b.order) {
        for (x, y) in a.coeffs[k].iter().zip(&b.coeffs[k]) {
            worst = worst.max((x - y).norm() / y.norm().max(1.0));
        }
    }
    worst
}

fn sup_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Continue `field` (on a real group) along a path in its complexification
/// that starts at the unit element.
pub fn continue_along_path(field: &Field, path: &GroupPath, opts: &ContinuationOptions) -> Result<ContinuationState> {
    let group = field.group();
    let partner = complex_link(group)?;
    if path.group != partner.name {
        return Err(Error::InvalidArgument(format!("path lives on {}, expected {}", path.group, partner.name)));
    }
    if linalg::max_abs(&(path.start() - partner.identity())) > 1e-12 {
        return Err(Error::InvalidArgument("path must start at the unit element".into()));
    }
    let pi = field.complexify()?;
    let metric = MetricModel::standard(partner.clone());
    let r = match opts.radius {
        Some(r) => r,
        None => auto_radius(&pi)?,
    };
    let chain = steiner_chain(path, r, opts.margin, &metric)?;
    let mode = match opts.mode {
        ContinuationMode::Auto if pi.is_exact() => ContinuationMode::Recompute,
        ContinuationMode::Auto => ContinuationMode::Compound,
        m => m,
    };
    match mode {
        ContinuationMode::Recompute => recompute(&pi, &partner, &chain, opts),
        _ => compound(&pi, &partner, &chain, opts),
    }
}

fn step_xi(partner: &GroupModel, a: &CMat, b: &CMat) -> Result<Vec<Complex64>> {
    partner.log_complex(&(linalg::inverse(a)? * b))
}

fn diverged(state: &ContinuationState, step: usize, budget: f64) -> Error {
    Error::ContinuationDiverged {
        step,
        estimate: state.cumulative_error,
        budget,
        partial: Box::new(state.clone()),
    }
}

fn recompute(pi: &Field, partner: &GroupModel, chain: &SteinerChain, opts: &ContinuationOptions) -> Result<ContinuationState> {
    if !pi.is_exact() {
        return Err(Error::UnsupportedMethod("recompute mode needs exact data".into()));
    }
    let work = opts.order.max(opts.cross_check_order + opts.shift_order);
    let exact = |g: &CMat| taylor_data_in(pi, g, work, &DerivMethod::Exact, Coords::ComplexSpan);
    let mut cur = exact(&chain.centers[0])?;
    let mut state = ContinuationState {
        group: partner.name.clone(),
        mode: Some(ContinuationMode::Recompute),
        centers: vec![chain.centers[0].clone()],
        data: vec![cur.truncated(opts.order)],
        steps: Vec::new(),
        cumulative_error: 0.0,
    };
    for (l, next_center) in chain.centers.iter().enumerate().skip(1) {
        let xi = step_xi(partner, &chain.centers[l - 1], next_center)?;
        let shifted = shift_taylor_data(&cur, &xi, opts.cross_check_order, opts.shift_order)?;
        let next = exact(next_center)?;
        let deviation = coefficient_deviation(&shifted, &next, opts.cross_check_order);
        let estimate = shifted.errors[0];
        state.cumulative_error += estimate;
        state.steps.push(StepRecord {
            step: l,
            xi_norm: sup_norm(&xi),
            xi,
            value: next.coeffs[0][0],
            shifted_value: shifted.coeffs[0][0],
            deviation,
            error_estimate: estimate,
        });
        state.centers.push(next_center.clone());
        state.data.push(next.truncated(opts.order));
        if state.cumulative_error > opts.budget {
            return Err(diverged(&state, l, opts.budget));
        }
        cur = next;
    }
    Ok(state)
}

/// Identity data of order `n` in span coordinates, exact or from a circle
/// quadrature along the single complex direction.
fn identity_data(pi: &Field, partner: &GroupModel, n: usize) -> Result<TaylorData> {
    let e = partner.identity();
    if pi.is_exact() {
        return taylor_data_in(pi, &e, n, &DerivMethod::Exact, Coords::ComplexSpan);
    }
    let probe = ProbeOptions { nodes: (4 * n + 4).next_power_of_two().max(256), radius: 0.5 };
    let (a, floors) = one_variable_coefficients(pi, &e, &[ONE], n, probe)?;
    let mut fact = 1.0;
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut errors = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        coeffs.push(vec![a[k] * fact]);
        errors.push(floors[k] * fact);
    }
    Ok(TaylorData {
        group: partner.name.clone(),
        g: e,
        coords: Coords::ComplexSpan,
        dim: 1,
        order: n,
        method: DerivMethod::CauchyQuadrature { nodes: probe.nodes, radius: probe.radius },
        coeffs,
        errors,
    })
}

fn compound(pi: &Field, partner: &GroupModel, chain: &SteinerChain, opts: &ContinuationOptions) -> Result<ContinuationState> {
    if partner.complex_dim() != 1 {
        return Err(Error::UnsupportedMethod(
            "pure re-expansion is limited to one complex direction; use exact data".into(),
        ));
    }
    let k = opts.shift_order;
    let total = opts.order + k * chain.steps();
    let mut cur = identity_data(pi, partner, total)?;
    let mut state = ContinuationState {
        group: partner.name.clone(),
        mode: Some(ContinuationMode::Compound),
        centers: vec![chain.centers[0].clone()],
        data: vec![cur.truncated(opts.order)],
        steps: Vec::new(),
        cumulative_error: cur.errors[0],
    };
    for (l, next_center) in chain.centers.iter().enumerate().skip(1) {
        let xi = step_xi(partner, &chain.centers[l - 1], next_center)?;
        let next = shift_taylor_data(&cur, &xi, cur.order - k, k)?;
        // The shift propagates the input errors, so errors[0] is cumulative.
        let estimate = next.errors[0] - state.cumulative_error;
        state.cumulative_error = next.errors[0];
        state.steps.push(StepRecord {
            step: l,
            xi_norm: sup_norm(&xi),
            xi,
            value: next.coeffs[0][0],
            shifted_value: next.coeffs[0][0],
            deviation: 0.0,
            error_estimate: estimate.max(0.0),
        });
        state.centers.push(next_center.clone());
        state.data.push(next.truncated(opts.order));
        if state.cumulative_error > opts.budget {
            return Err(diverged(&state, l, opts.budget));
        }
        cur = next;
    }
    Ok(state)
}

/// Coordinate step budget at unit growth rate.
pub const STEP_BUDGET: f64 = 0.2;

/// Steiner radius for a complexified field: [`STEP_BUDGET`] divided by the
/// growth rate s = max_{1<=n<=4} (max |T(alpha)| / max(1, |T()|))^{1/n} of
/// the identity data, so that a step of size r gains a factor of about
/// (s r)^(K+1) / (K+1)! in truncation error.
pub fn auto_radius(pi: &Field) -> Result<f64> {
    let group = pi.group();
    let data = identity_data(pi, group, 4)?;
    let base = data.coeffs[0][0].norm().max(1.0);
    let mut s: f64 = 1.0;
    for n in 1..=4 {
        let m = data.coeffs[n].iter().map(|z| z.norm()).fold(0.0, f64::max);
        s = s.max((m / base).powf(1.0 / n as f64));
    }
    Ok(STEP_BUDGET / s)
}

/// Number of equal pieces that keeps sample spacing at a quarter of the
/// smallest radius a continuation on this group is expected to use.
fn pieces(partner: &GroupModel, xi: &[f64], r: f64) -> usize {
    let len = MetricModel::standard(Arc::new(partner.clone())).norm(xi);
    ((len / (PATH_SAMPLES as f64 * r / 4.0)).ceil() as usize).max(1)
}

/// exp(t log target), t in [0, 1], split into pieces of at most
/// [`PATH_SAMPLES`] samples each so that samples are at most r / 4 apart.
pub fn default_path(partner: &GroupModel, target: &CMat, r: f64) -> Result<GroupPath> {
    let xi = partner.log(target)?;
    let k = pieces(partner, &xi, r);
    let piece: Vec<f64> = xi.iter().map(|x| x / k as f64).collect();
    GroupPath::from_segments(partner, &partner.identity(), &vec![piece; k], PATH_SAMPLES)
}

/// Path through exponential segments in span coordinates, each split like
/// [`default_path`].
pub fn segment_path(partner: &GroupModel, segments: &[Vec<Complex64>], r: f64) -> Result<GroupPath> {
    let mut parts = Vec::new();
    for w in segments {
        let xi = partner.complex_to_real(w);
        let k = pieces(partner, &xi, r);
        let piece: Vec<f64> = xi.iter().map(|x| x / k as f64).collect();
        parts.extend(std::iter::repeat_n(piece, k));
    }
    GroupPath::from_segments(partner, &partner.identity(), &parts, PATH_SAMPLES)
}

/// The radius `opts` resolves to for `field`.
pub fn effective_radius(field: &Field, opts: &ContinuationOptions) -> Result<f64> {
    match opts.radius {
        Some(r) => Ok(r),
        None => auto_radius(&field.complexify()?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub value: Complex64,
    /// Error estimate of the value: the tail of the final evaluation plus,
    /// in compound mode, the accumulated re-expansion estimate.
    pub error_estimate: f64,
    pub state: ContinuationState,
}

/// Value at `target` of the holomorphic extension of `field`.
pub fn extend_value(
    field: &Field,
    target: &CMat,
    path: Option<&GroupPath>,
    opts: &ContinuationOptions,
) -> Result<Extension> {
    let partner = complex_link(field.group())?;
    let owned;
    let path = match path {
        Some(p) => p,
        None => {
            owned = default_path(&partner, target, effective_radius(field, opts)?)?;
            &owned
        }
    };
    let state = continue_along_path(field, path, opts)?;
    let last = state.final_data();
    let offset = step_xi(&partner, state.centers.last().unwrap(), target)?;
    let value = taylor_eval(last, &offset)?;
    let tail = if sup_norm(&offset) == 0.0 {
        0.0
    } else {
        heuristic_tail(&majorant_coefficients(last, 0.0), sup_norm(&offset)).bound()
    };
    let carried = if state.mode == Some(ContinuationMode::Compound) { state.cumulative_error } else { 0.0 };
    Ok(Extension { value, error_estimate: tail + carried + last.errors[0], state })
}

/// Extension identities against the complexified counterpart: Taylor
/// coefficients at g and eta(g) up to order `n_cmp`, then extended values
/// at the targets.
pub fn verify_extension(
    field: &Field,
    samples: &[CMat],
    targets: &[CMat],
    n_cmp: usize,
    opts: &ContinuationOptions,
) -> Result<Vec<Report>> {
    let group = field.group();
    let link = group
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", group.name)))?;
    let partner = link.partner.clone();
    let pi = field.complexify()?;
    let a = group.complexified_tangent_inverse()?;
    let h = partner.complex_dim();
    let mut dirs: Vec<Vec<Complex64>> = (0..h).map(|j| (0..group.dim).map(|i| a[(i, j)]).collect()).collect();
    for j in 0..h {
        let v: Vec<Complex64> = dirs[j].iter().map(|z| z * linalg::I).collect();
        dirs.push(v);
    }
    let unit: Vec<Vec<Complex64>> = (0..partner.dim)
        .map(|k| (0..partner.dim).map(|i| if i == k { ONE } else { c(0.0) }).collect())
        .collect();
    let mut coeff_dev: f64 = 0.0;
    for g in samples {
        let lhs = field.exact_taylor(g, &dirs, n_cmp)?;
        let rhs = pi.exact_taylor(&link.element_map.apply(g), &unit, n_cmp)?;
        for (lb, rb) in lhs.iter().zip(&rhs) {
            for (x, y) in lb.iter().zip(rb) {
                coeff_dev = coeff_dev.max((x - y).norm() / y.norm().max(1.0));
            }
        }
    }
    let mut value_dev: f64 = 0.0;
    let mut estimate: f64 = 0.0;
    for t in targets {
        let ext = extend_value(field, t, None, opts)?;
        let exact = pi.eval_raw(t)?;
        value_dev = value_dev.max((ext.value - exact).norm() / exact.norm().max(1.0));
        estimate = estimate.max(ext.error_estimate);
    }
    Ok(vec![
        Report::deviation(
            "extension-coefficients",
            json!({ "group": group.name, "samples": samples.len(), "N_cmp": n_cmp }),
            coeff_dev,
            1e-10,
        ),
        Report::deviation(
            "extension-values",
            json!({ "group": group.name, "targets": targets.len(), "error_estimate": estimate }),
            value_dev,
            1e-6,
        ),
    ])
}

/// |extend_value via path_a - via path_b|, passing within the combined
/// error estimates or `tol`, whichever is larger.
pub fn path_independence_check(
    field: &Field,
    target: &CMat,
    path_a: &GroupPath,
    path_b: &GroupPath,
    opts: &ContinuationOptions,
    tol: f64,
) -> Result<Report> {
    let a = extend_value(field, target, Some(path_a), opts)?;
    let b = extend_value(field, target, Some(path_b), opts)?;
    let diff = (a.value - b.value).norm();
    let allowed = tol.max(a.error_estimate + b.error_estimate);
    Ok(Report::deviation(
        "path-independence",
        json!({
            "group": field.group().name,
            "steps_a": a.state.steps.len(),
            "steps_b": b.state.steps.len(),
            "value_a": a.value,
            "value_b": b.value,
        }),
        diff,
        allowed,
    ))
}

/// Continues the pullback of a U(1) field along R -> U(1) to z and to
/// z + shift in the complexified line and compares the values.
pub fn periodicity_check(
    field: &Field,
    z: Complex64,
    shift: i64,
    opts: &ContinuationOptions,
    tol: f64,
) -> Result<Report> {
    if field.group().name != "U1" {
        return Err(Error::InvalidArgument("periodicity is checked for fields on U1".into()));
    }
    let pulled = field.pullback(&circle_covering()?)?;
    let c1 = complex_link(pulled.group())?;
    let at = |w: Complex64| c1.exp_complex(&[w]);
    let a = extend_value(&pulled, &at(z)?, None, opts)?;
    let b = extend_value(&pulled, &at(z + shift as f64)?, None, opts)?;
    let diff = (a.value - b.value).norm();
    let allowed = tol.max(a.error_estimate + b.error_estimate);
    Ok(Report::deviation(
        "periodicity",
        json!({ "z": z, "shift": shift, "value_z": a.value, "value_shifted": b.value }),
        diff,
        allowed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{catalog, circle_wave_value};
    use crate::group::registry_get;
    use std::f64::consts::PI;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cr_residual_examples() {
        let sl = registry_get("SL2C").unwrap();
        let g = sl.exp(&[0.2, -0.1, 0.3, 0.1, 0.05, -0.2]).unwrap();
        for name in ["entry-11", "trace", "adjoint", "trace-exp"] {
            let f = catalog(name, &sl).unwrap();
            assert!(cauchy_riemann_residual(&f, &g).unwrap() < 1e-8, "{name}");
        }
        let re = catalog("re-entry-11", &sl).unwrap();
        let r = cauchy_riemann_residual(&re, &sl.identity()).unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
        let k = catalog("constant:3", &sl).unwrap();
        assert_eq!(cauchy_riemann_residual(&k, &g).unwrap(), 0.0);
        let sl2r = registry_get("SL2R").unwrap();
        let f = catalog("entry-11", &sl2r).unwrap();
        assert!(matches!(cauchy_riemann_residual(&f, &sl2r.identity()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn shadow_examples() {
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let s = holomorphic_shadow(&z, &[cx(0.0, 0.1)], 30).unwrap();
        assert!((s.value - c((-0.2 * PI).exp())).norm() < 1e-12);
        let s0 = holomorphic_shadow(&z, &[cx(0.0, 0.0)], 4).unwrap();
        assert_eq!(s0.value, ONE);
        let sl2r = registry_get("SL2R").unwrap();
        let f = catalog("entry-11", &sl2r).unwrap();
        let s = holomorphic_shadow(&f, &[cx(0.0, 0.2), cx(0.0, 0.0), cx(0.0, 0.0)], 20).unwrap();
        assert!((s.value - cx(0.0, 0.2).exp()).norm() < 1e-12);
        assert!(s.warning.is_none());
    }

    #[test]
    fn chain_examples() {
        let sl = registry_get("SL2R").unwrap();
        let m = MetricModel::standard(sl.clone());
        let still = GroupPath::from_segments(&sl, &sl.identity(), &[], 1).unwrap();
        let ch = steiner_chain(&still, 0.3, 0.0, &m).unwrap();
        assert_eq!(ch.steps(), 1);
        assert_eq!(ch.times, vec![0.0, 1.0]);
        let p = GroupPath::from_segments(&sl, &sl.identity(), &[vec![0.6, 0.8, 0.0]], 64).unwrap();
        let ch = steiner_chain(&p, 0.25, 0.0, &m).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(ch.times.len(), 5);
        for (t, e) in ch.times.iter().zip(expect) {
            assert!((t - e).abs() < 1e-12, "{:?}", ch.times);
        }
        assert!(verify_chain(&ch, &p, &m).pass);
        let two = GroupPath::from_segments(&sl, &sl.identity(), &[vec![0.3, 0.0, 0.0], vec![0.0, 0.3, 0.0]], 64).unwrap();
        let ch = steiner_chain(&two, 0.25, 0.0, &m).unwrap();
        assert!((3..=4).contains(&ch.steps()), "{}", ch.steps());
        assert!(verify_chain(&ch, &two, &m).pass);
        let coarse = GroupPath::from_segments(&sl, &sl.identity(), &[vec![2.0, 0.0, 0.0]], 2).unwrap();
        assert!(matches!(steiner_chain(&coarse, 0.25, 0.0, &m), Err(Error::Resample(_))));
    }

    #[test]
    fn continuation_examples() {
        let opts = ContinuationOptions::default();
        let sl2r = registry_get("SL2R").unwrap();
        let sl2c = registry_get("SL2C").unwrap();
        let f = catalog("entry-11", &sl2r).unwrap();
        let target = sl2c.exp_complex(&[cx(0.0, 0.4), c(0.0), c(0.0)]).unwrap();
        let ext = extend_value(&f, &target, None, &opts).unwrap();
        assert!((ext.value - cx(0.0, 0.4).exp()).norm() < 1e-6);
        assert!(ext.state.steps.iter().all(|s| s.deviation <= 1e-8));
        assert!(ext.state.center_residual().unwrap() < 1e-12);
        let target = sl2c.exp_complex(&[cx(0.0, 0.4), c(0.0), c(0.0)]).unwrap()
            * sl2c.exp_complex(&[c(0.0), c(0.3), c(0.0)]).unwrap();
        let ext = extend_value(&f, &target, None, &opts).unwrap();
        assert!((ext.value - target[(0, 0)]).norm() < 1e-6);

        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let ct = registry_get("Ctimes").unwrap();
        let two = CMat::from_element(1, 1, c(2.0));
        let ext = extend_value(&z, &two, None, &opts).unwrap();
        assert!((ext.value - c(2.0)).norm() < 1e-8);
        let ext = extend_value(&z, &ct.identity(), None, &opts).unwrap();
        assert_eq!(ext.value, ONE);

        let su2 = registry_get("SU2").unwrap();
        let tr = catalog("trace", &su2).unwrap();
        let d = CMat::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(0.5)]);
        let ext = extend_value(&tr, &d, None, &opts).unwrap();
        assert!((ext.value - c(2.5)).norm() < 1e-6);

        let k = catalog("constant:4", &sl2r).unwrap();
        let st = continue_along_path(&k, &default_path(&sl2c, &target, 0.2).unwrap(), &opts).unwrap();
        assert!(st.data.iter().all(|t| t.coeffs[0][0] == c(4.0) && t.coeffs[1..].iter().flatten().all(|x| *x == c(0.0))));
    }

    #[test]
    fn compound_mode_matches() {
        let opts = ContinuationOptions { mode: ContinuationMode::Compound, order: 20, ..Default::default() };
        let r1 = registry_get("R1").unwrap();
        let f = catalog("circle-wave", &r1).unwrap();
        let c1 = registry_get("C1").unwrap();
        let w = cx(0.3, 0.2);
        let ext = extend_value(&f, &c1.exp_complex(&[w]).unwrap(), None, &opts).unwrap();
        assert!((ext.value - circle_wave_value(w)).norm() < 1e-8, "{:?}", ext.value);
        let inv = catalog("inv-square", &r1).unwrap();
        let w = cx(0.3, 0.1);
        let ext = extend_value(&inv, &c1.exp_complex(&[w]).unwrap(), None, &opts).unwrap();
        assert!((ext.value - ONE / (ONE + w * w)).norm() < 1e-6, "{:?}", ext);
    }

    #[test]
    fn verification_and_independence() {
        let opts = ContinuationOptions::default();
        let sl2r = registry_get("SL2R").unwrap();
        let sl2c = registry_get("SL2C").unwrap();
        let f = catalog("entry-11", &sl2r).unwrap();
        let samples = vec![sl2r.exp(&[0.1, 0.2, -0.3]).unwrap(), sl2r.identity()];
        let targets = vec![sl2c.exp_complex(&[cx(0.1, 0.2), c(0.0), cx(0.0, -0.1)]).unwrap()];
        let reps = verify_extension(&f, &samples, &targets, 3, &opts).unwrap();
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let reps = verify_extension(&z, &[u1.exp(&[0.3]).unwrap()], &[], 3, &opts).unwrap();
        assert!(reps[0].pass && reps[0].lhs <= 1e-10);

        let a = vec![vec![cx(0.0, 0.3), c(0.0), c(0.0)], vec![c(0.0), c(0.2), c(0.0)]];
        let b = vec![vec![c(0.0), c(0.2), c(0.0)], vec![cx(0.0, 0.3), c(0.0), c(0.0)]];
        let target = sl2c.exp_complex(&a[0]).unwrap() * sl2c.exp_complex(&a[1]).unwrap();
        // The second ordering ends elsewhere; close it with the residual segment.
        let pa = segment_path(&sl2c, &a, 0.2).unwrap();
        let end_b = sl2c.exp_complex(&b[0]).unwrap() * sl2c.exp_complex(&b[1]).unwrap();
        let fix = sl2c.log_complex(&(linalg::inverse(&end_b).unwrap() * &target)).unwrap();
        let mut b3 = b.clone();
        b3.push(fix);
        let pb = segment_path(&sl2c, &b3, 0.2).unwrap();
        let rep = path_independence_check(&f, &target, &pa, &pb, &opts, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn periodicity_examples() {
        let opts = ContinuationOptions::default();
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let rep = periodicity_check(&z, cx(0.3, 0.2), 1, &opts, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");
        let t = catalog("trig-poly", &u1).unwrap();
        let rep = periodicity_check(&t, cx(0.0, 0.1), 2, &opts, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");
        let k = catalog("constant:1", &u1).unwrap();
        assert_eq!(periodicity_check(&k, cx(0.1, 0.1), 1, &opts, 1e-8).unwrap().lhs, 0.0);
    }

    #[test]
    fn state_round_trips() {
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let ext = extend_value(&z, &CMat::from_element(1, 1, cx(0.0, 1.5)), None, &ContinuationOptions::default()).unwrap();
        let s = serde_json::to_string(&ext.state).unwrap();
        let back: ContinuationState = serde_json::from_str(&s).unwrap();
        assert_eq!(back.steps.len(), ext.state.steps.len());
        assert_eq!(back.centers.len(), ext.state.centers.len());
    }
}
