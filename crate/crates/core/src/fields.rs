//! Scalar fields on matrix groups: representative functions with exact Lie
//! derivative oracles, black-box evaluators, and the algebra generated by
//! them (linear combinations, products, exponentials, pullbacks).
//!
//! Convention: for directions X_1..X_n the derivative L(X_1..X_n) is the
//! composition L_{X_1} o ... o L_{X_n}, so the last direction acts first and
//!
//! ```text
//! L(X_1..X_n) phi(g) = d/dz_1 .. d/dz_n phi(g exp(z_1 X_1) .. exp(z_n X_n)) at 0.
//! ```
//!
//! For a representative function this is `phi . rho(g) drho(X_1) .. drho(X_n) v`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{registry_get, ElementMap, GroupModel, GroupMorphism};
use crate::linalg::{self, c, CMat, ONE, ZERO};

/// Declared regularity of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    SmoothOnly,
    /// Real-analytic; the evaluator must accept complex arguments near the
    /// real points and be holomorphic there.
    RealAnalytic,
    Holomorphic,
}

/// How a representative field turns a group element into a matrix.
#[derive(Debug, Clone)]
pub enum Rho {
    /// rho(g) = g.
    Standard,
    /// rho(g) = Ad_g, in coordinates of a complex frame of the Lie algebra.
    Adjoint { frame: Vec<CMat> },
    /// rho(z) = z^k on a 1x1 group.
    Power(i32),
}

#[derive(Debug, Clone)]
struct AdjointCache {
    /// Complex coordinate solve: coords(X) = gram_inv * (<F_i, X>)_i.
    gram_inv: DMatrix<Complex64>,
}

/// g -> phi . rho(g) v, with rho optionally precomposed with matrix maps.
#[derive(Debug, Clone)]
pub struct Representative {
    pub group: Arc<GroupModel>,
    pub rho: Rho,
    /// Maps applied to the group element, in order, before rho.
    pub pre_maps: Vec<ElementMap>,
    /// drho(e_k) for each basis direction of `group`.
    pub drho: Vec<CMat>,
    pub v: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    adjoint: Option<AdjointCache>,
}

fn frob(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

impl Representative {
    /// Build a representative field, deriving drho from the representation
    /// kind when `drho` is `None`.
    pub fn new(
        group: Arc<GroupModel>,
        rho: Rho,
        drho: Option<Vec<CMat>>,
        v: Vec<Complex64>,
        phi: Vec<Complex64>,
    ) -> Result<Self> {
        let adjoint = match &rho {
            Rho::Adjoint { frame } => {
                let n = frame.len();
                let gram = DMatrix::from_fn(n, n, |i, j| frob(&frame[i], &frame[j]));
                let gram_inv = gram
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidArgument("adjoint frame is degenerate".into()))?;
                Some(AdjointCache { gram_inv })
            }
            Rho::Power(_) if group.size != 1 => {
                return Err(Error::InvalidArgument("power representation needs a 1x1 group".into()))
            }
            _ => None,
        };
        let mut rep = Self { group, rho, pre_maps: Vec::new(), drho: Vec::new(), v, phi, adjoint };
        rep.drho = match drho {
            Some(d) => d,
            None => rep.derived_drho(),
        };
        let n = rep.rep_dim();
        if rep.v.len() != n || rep.phi.len() != n {
            return Err(Error::InvalidArgument(format!(
                "v and phi must have length {n}, got {} and {}",
                rep.v.len(),
                rep.phi.len()
            )));
        }
        if rep.drho.len() != rep.group.dim || rep.drho.iter().any(|d| d.nrows() != n || d.ncols() != n) {
            return Err(Error::InvalidArgument("drho must hold d matrices of size N x N".into()));
        }
        Ok(rep)
    }

    fn derived_drho(&self) -> Vec<CMat> {
        self.group
            .basis
            .iter()
            .map(|e| match &self.rho {
                Rho::Standard => e.clone(),
                Rho::Power(k) => e * c(*k as f64),
                Rho::Adjoint { frame } => {
                    let n = frame.len();
                    let mut m = CMat::zeros(n, n);
                    for (j, f) in frame.iter().enumerate() {
                        let col = self.frame_coords(&linalg::commutator(e, f));
                        for i in 0..n {
                            m[(i, j)] = col[i];
                        }
                    }
                    m
                }
            })
            .collect()
    }

    fn frame_coords(&self, x: &CMat) -> Vec<Complex64> {
        match (&self.rho, &self.adjoint) {
            (Rho::Adjoint { frame }, Some(cache)) => {
                let b = DVector::from_iterator(frame.len(), frame.iter().map(|f| frob(f, x)));
                (&cache.gram_inv * b).iter().copied().collect()
            }
            _ => unreachable!("frame coordinates only exist for adjoint fields"),
        }
    }

    pub fn rep_dim(&self) -> usize {
        match &self.rho {
            Rho::Standard => {
                if self.pre_maps.last() == Some(&ElementMap::CircleCovering) {
                    1
                } else {
                    self.group.size
                }
            }
            Rho::Adjoint { frame } => frame.len(),
            Rho::Power(_) => 1,
        }
    }

    fn mapped(&self, g: &CMat) -> CMat {
        let mut h = g.clone();
        for m in &self.pre_maps {
            h = m.apply(&h);
        }
        h
    }

    /// The representation matrix rho(g).
    pub fn rho_matrix(&self, g: &CMat) -> Result<CMat> {
        let h = self.mapped(g);
        match &self.rho {
            Rho::Standard => Ok(h),
            Rho::Power(k) => {
                let z = h[(0, 0)];
                if *k < 0 && z == ZERO {
                    return Err(Error::Domain("negative power at zero".into()));
                }
                Ok(CMat::from_element(1, 1, z.powi(*k)))
            }
            Rho::Adjoint { frame } => {
                let hi = linalg::inverse(&h)?;
                let n = frame.len();
                let mut m = CMat::zeros(n, n);
                for (j, f) in frame.iter().enumerate() {
                    let col = self.frame_coords(&(&h * f * &hi));
                    for i in 0..n {
                        m[(i, j)] = col[i];
                    }
                }
                Ok(m)
            }
        }
    }

    pub fn eval(&self, g: &CMat) -> Result<Complex64> {
        if self.pre_maps.is_empty() {
            match &self.rho {
                // Allocation-free paths: quadrature calls these millions of times.
                Rho::Standard => {
                    let n = g.nrows();
                    let mut acc = ZERO;
                    for i in 0..n {
                        if self.phi[i] == ZERO {
                            continue;
                        }
                        let mut row = ZERO;
                        for j in 0..n {
                            row += g[(i, j)] * self.v[j];
                        }
                        acc += self.phi[i] * row;
                    }
                    return Ok(acc);
                }
                Rho::Adjoint { frame } if g.nrows() == 2 => return Ok(self.adjoint_eval_2x2(frame, g)),
                _ => {}
            }
        }
        let r = self.rho_matrix(g)?;
        let n = self.v.len();
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += r[(i, j)] * self.v[j];
            }
            acc += self.phi[i] * row;
        }
        Ok(acc)
    }

    /// phi . coords(g V g^-1) written as a linear functional <L, g V g^-1>.
    fn adjoint_eval_2x2(&self, frame: &[CMat], g: &CMat) -> Complex64 {
        let cache = self.adjoint.as_ref().expect("adjoint cache");
        let n = frame.len();
        let mut vm = [[ZERO; 2]; 2];
        let mut lm = [[ZERO; 2]; 2];
        for k in 0..n {
            let mut w = ZERO;
            for i in 0..n {
                w += self.phi[i] * cache.gram_inv[(i, k)];
            }
            for p in 0..2 {
                for q in 0..2 {
                    vm[p][q] += self.v[k] * frame[k][(p, q)];
                    lm[p][q] += w * frame[k][(p, q)].conj();
                }
            }
        }
        let (a, b, cc, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        let det = a * d - b * cc;
        let gi = [[d / det, -b / det], [-cc / det, a / det]];
        let gm = [[a, b], [cc, d]];
        let mut acc = ZERO;
        for p in 0..2 {
            for q in 0..2 {
                let mut x = ZERO;
                for r in 0..2 {
                    for s in 0..2 {
                        x += gm[p][r] * vm[r][s] * gi[s][q];
                    }
                }
                acc += lm[p][q] * x;
            }
        }
        acc
    }

    /// drho of a (complex) coordinate direction.
    pub fn drho_dir(&self, dir: &[Complex64]) -> CMat {
        let n = self.rep_dim();
        let mut out = CMat::zeros(n, n);
        for (x, d) in dir.iter().zip(&self.drho) {
            if *x != ZERO {
                out += d * *x;
            }
        }
        out
    }

    /// Max deviation of rho(exp(t e_k)) from expm(t drho_k) over sample t, k.
    pub fn homomorphism_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.group.dim {
            for t in [-0.3, 0.2, 0.5] {
                let mut xi = vec![0.0; self.group.dim];
                xi[k] = t;
                let lhs = self.rho_matrix(&self.group.exp(&xi)?)?;
                let rhs = linalg::expm(&(&self.drho[k] * c(t)));
                worst = worst.max(linalg::max_abs(&(lhs - rhs)));
            }
        }
        Ok(worst)
    }

    fn row_at(&self, g: &CMat) -> Result<Vec<Complex64>> {
        let r = self.rho_matrix(g)?;
        let n = self.phi.len();
        Ok((0..n).map(|j| (0..n).map(|i| self.phi[i] * r[(i, j)]).sum()).collect())
    }
}

fn row_times(row: &[Complex64], m: &CMat) -> Vec<Complex64> {
    let n = row.len();
    (0..n).map(|j| (0..n).map(|i| row[i] * m[(i, j)]).sum()).collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluator of a black-box field.
pub type Evaluator = Arc<dyn Fn(&CMat) -> Complex64 + Send + Sync>;
/// Bound on |phi(g)| over group elements with operator norm at most R.
pub type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BlackBox {
    pub name: String,
    pub group: Arc<GroupModel>,
    pub evaluator: Evaluator,
    pub regularity: Regularity,
    pub envelope: Option<EnvelopeFn>,
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBox")
            .field("name", &self.name)
            .field("group", &self.group.name)
            .field("regularity", &self.regularity)
            .finish()
    }
}

/// A complex-valued function on a group.
#[derive(Debug, Clone)]
pub enum Field {
    Constant { group: Arc<GroupModel>, value: Complex64 },
    Representative(Box<Representative>),
    BlackBox(BlackBox),
    LinearCombination { group: Arc<GroupModel>, terms: Vec<(Complex64, Field)> },
    Product(Box<Field>, Box<Field>),
    Exp(Box<Field>),
    /// Black-box field pulled back along a morphism.
    Pullback { morphism: GroupMorphism, inner: Box<Field> },
}

/// Index of the subsequence of `alpha` selected by `mask` in the dense
/// lexicographic layout for `dim` directions.
fn sub_index(alpha: &[usize], mask: u32, dim: usize) -> (usize, usize) {
    let mut idx = 0;
    let mut len = 0;
    for (p, a) in alpha.iter().enumerate() {
        if mask & (1 << p) != 0 {
            idx = idx * dim + a;
            len += 1;
        }
    }
    (len, idx)
}

/// Decode a lexicographic index into a word of length n over `dim` letters.
pub fn decode_index(mut idx: usize, n: usize, dim: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for p in (0..n).rev() {
        out[p] = idx % dim;
        idx /= dim;
    }
    out
}

impl Field {
    pub fn constant(group: Arc<GroupModel>, value: Complex64) -> Field {
        Field::Constant { group, value }
    }

    pub fn representative(rep: Representative) -> Field {
        Field::Representative(Box::new(rep))
    }

    /// Matrix entry g_{ij} (zero-based) through the standard representation.
    pub fn entry(group: Arc<GroupModel>, i: usize, j: usize) -> Result<Field> {
        let m = group.size;
        if i >= m || j >= m {
            return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside a {m}x{m} matrix")));
        }
        let mut v = vec![ZERO; m];
        let mut phi = vec![ZERO; m];
        v[j] = ONE;
        phi[i] = ONE;
        Ok(Field::representative(Representative::new(group, Rho::Standard, None, v, phi)?))
    }

    pub fn linear_combination(terms: Vec<(Complex64, Field)>) -> Result<Field> {
        let group = terms
            .first()
            .map(|(_, f)| f.group().clone())
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        if terms.iter().any(|(_, f)| f.group().name != group.name) {
            return Err(Error::InvalidArgument("linear combination mixes groups".into()));
        }
        Ok(Field::LinearCombination { group, terms })
    }

    pub fn product(a: Field, b: Field) -> Result<Field> {
        if a.group().name != b.group().name {
            return Err(Error::InvalidArgument("product mixes groups".into()));
        }
        Ok(Field::Product(Box::new(a), Box::new(b)))
    }

    pub fn exp(inner: Field) -> Field {
        Field::Exp(Box::new(inner))
    }

    pub fn group(&self) -> &Arc<GroupModel> {
        match self {
            Field::Constant { group, .. } => group,
            Field::Representative(r) => &r.group,
            Field::BlackBox(b) => &b.group,
            Field::LinearCombination { group, .. } => group,
            Field::Product(a, _) => a.group(),
            Field::Exp(a) => a.group(),
            Field::Pullback { morphism, .. } => &morphism.source,
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            Field::Constant { .. } | Field::Representative(_) => Regularity::Holomorphic,
            Field::BlackBox(b) => b.regularity,
            Field::LinearCombination { terms, .. } => terms
                .iter()
                .map(|(_, f)| f.regularity())
                .min()
                .unwrap_or(Regularity::Holomorphic),
            Field::Product(a, b) => a.regularity().min(b.regularity()),
            Field::Exp(a) => a.regularity(),
            Field::Pullback { inner, .. } => inner.regularity(),
        }
    }

    /// True when every leaf admits exact derivatives.
    pub fn is_exact(&self) -> bool {
        match self {
            Field::Constant { .. } | Field::Representative(_) => true,
            Field::BlackBox(_) => false,
            Field::LinearCombination { terms, .. } => terms.iter().all(|(_, f)| f.is_exact()),
            Field::Product(a, b) => a.is_exact() && b.is_exact(),
            Field::Exp(a) => a.is_exact(),
            Field::Pullback { inner, .. } => inner.is_exact(),
        }
    }

    /// Evaluate after checking membership of `g`.
    pub fn eval(&self, g: &CMat) -> Result<Complex64> {
        let group = self.group();
        if !group.contains(g) {
            return Err(Error::Domain(format!(
                "element is not in {} (residual {:e})",
                group.name,
                group.membership_residual(g)
            )));
        }
        self.eval_raw(g)
    }

    /// Evaluate without a membership check. Used for complexified arguments
    /// of holomorphic and real-analytic fields.
    pub fn eval_raw(&self, g: &CMat) -> Result<Complex64> {
        match self {
            Field::Constant { value, .. } => Ok(*value),
            Field::Representative(r) => r.eval(g),
            Field::BlackBox(b) => Ok((b.evaluator)(g)),
            Field::LinearCombination { terms, .. } => {
                let mut acc = ZERO;
                for (a, f) in terms {
                    acc += a * f.eval_raw(g)?;
                }
                Ok(acc)
            }
            Field::Product(a, b) => Ok(a.eval_raw(g)? * b.eval_raw(g)?),
            Field::Exp(a) => Ok(a.eval_raw(g)?.exp()),
            Field::Pullback { morphism, inner } => inner.eval_raw(&morphism.element_map.apply(g)),
        }
    }

    /// Exact L(X_1..X_n) phi(g) for complex coordinate directions X_j in the
    /// field's group basis. Complex coefficients extend L C-linearly.
    pub fn exact_derivative(&self, dirs: &[Vec<Complex64>], g: &CMat) -> Result<Complex64> {
        let n = dirs.len();
        match self {
            Field::Constant { value, .. } => Ok(if n == 0 { *value } else { ZERO }),
            Field::Representative(r) => {
                let mut row = r.row_at(g)?;
                for d in dirs {
                    row = row_times(&row, &r.drho_dir(d));
                }
                Ok(dot(&row, &r.v))
            }
            Field::BlackBox(b) => Err(Error::UnsupportedMethod(format!(
                "exact derivatives of black-box field '{}'",
                b.name
            ))),
            Field::LinearCombination { terms, .. } => {
                let mut acc = ZERO;
                for (a, f) in terms {
                    acc += a * f.exact_derivative(dirs, g)?;
                }
                Ok(acc)
            }
            Field::Product(a, b) => {
                let mut acc = ZERO;
                for mask in 0u32..(1 << n) {
                    let left: Vec<_> = (0..n).filter(|p| mask & (1 << p) != 0).map(|p| dirs[p].clone()).collect();
                    let right: Vec<_> = (0..n).filter(|p| mask & (1 << p) == 0).map(|p| dirs[p].clone()).collect();
                    acc += a.exact_derivative(&left, g)? * b.exact_derivative(&right, g)?;
                }
                Ok(acc)
            }
            Field::Exp(a) => {
                let base = a.exact_derivative(&[], g)?.exp();
                let positions: Vec<usize> = (0..n).collect();
                Ok(base * partition_sum(a, dirs, &positions, g)?)
            }
            Field::Pullback { morphism, inner } => {
                let pushed: Vec<Vec<Complex64>> = dirs.iter().map(|d| push_dir(morphism, d)).collect();
                inner.exact_derivative(&pushed, &morphism.element_map.apply(g))
            }
        }
    }

    /// Exact L(alpha) phi(g) for a multi-index over the basis directions.
    pub fn exact_lie_derivative(&self, alpha: &[usize], g: &CMat) -> Result<Complex64> {
        let d = self.group().dim;
        let dirs = alpha
            .iter()
            .map(|&a| {
                if a >= d {
                    return Err(Error::InvalidArgument(format!("index {} outside 1..{d}", a + 1)));
                }
                let mut v = vec![ZERO; d];
                v[a] = ONE;
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        self.exact_derivative(&dirs, g)
    }

    /// All exact coefficients L(alpha) phi(g) for words alpha over `dirs`,
    /// orders 0..=n_max, each order in dense lexicographic layout.
    pub fn exact_taylor(
        &self,
        g: &CMat,
        dirs: &[Vec<Complex64>],
        n_max: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        let dim = dirs.len();
        match self {
            Field::Constant { value, .. } => Ok((0..=n_max)
                .map(|n| {
                    let mut v = vec![ZERO; dim.pow(n as u32)];
                    if n == 0 {
                        v[0] = *value;
                    }
                    v
                })
                .collect()),
            Field::Representative(r) => {
                let mats: Vec<CMat> = dirs.iter().map(|d| r.drho_dir(d)).collect();
                let mut rows = vec![r.row_at(g)?];
                let mut out = vec![vec![dot(&rows[0], &r.v)]];
                for _ in 1..=n_max {
                    let mut next = Vec::with_capacity(rows.len() * dim);
                    for row in &rows {
                        for m in &mats {
                            next.push(row_times(row, m));
                        }
                    }
                    out.push(next.iter().map(|row| dot(row, &r.v)).collect());
                    rows = next;
                }
                Ok(out)
            }
            Field::BlackBox(b) => Err(Error::UnsupportedMethod(format!(
                "exact derivatives of black-box field '{}'",
                b.name
            ))),
            Field::LinearCombination { terms, .. } => {
                let mut acc: Option<Vec<Vec<Complex64>>> = None;
                for (a, f) in terms {
                    let t = f.exact_taylor(g, dirs, n_max)?;
                    match &mut acc {
                        None => acc = Some(t.into_iter().map(|o| o.into_iter().map(|x| a * x).collect()).collect()),
                        Some(s) => {
                            for (so, to) in s.iter_mut().zip(t) {
                                for (x, y) in so.iter_mut().zip(to) {
                                    *x += a * y;
                                }
                            }
                        }
                    }
                }
                acc.ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))
            }
            Field::Product(a, b) => {
                let ta = a.exact_taylor(g, dirs, n_max)?;
                let tb = b.exact_taylor(g, dirs, n_max)?;
                Ok((0..=n_max)
                    .map(|n| {
                        (0..dim.pow(n as u32))
                            .map(|idx| {
                                let alpha = decode_index(idx, n, dim);
                                let full = (1u32 << n) - 1;
                                (0u32..(1 << n))
                                    .map(|mask| {
                                        let (la, ia) = sub_index(&alpha, mask, dim);
                                        let (lb, ib) = sub_index(&alpha, full & !mask, dim);
                                        ta[la][ia] * tb[lb][ib]
                                    })
                                    .sum()
                            })
                            .collect()
                    })
                    .collect())
            }
            Field::Exp(a) => {
                let cost: f64 = (1..=n_max).map(|n| (dim as f64).powi(n as i32) * 2f64.powi(n as i32 - 1)).sum();
                if cost > EXP_TERM_LIMIT {
                    return Err(Error::Refused {
                        reason: format!("exact exponential data of order {n_max} in {dim} directions"),
                        cost,
                    });
                }
                let psi = a.exact_taylor(g, dirs, n_max)?;
                let base = psi[0][0].exp();
                // B(alpha) = sum over set partitions of prod of psi(blocks);
                // split on the block containing the first position.
                let mut bell: Vec<Vec<Complex64>> = vec![vec![ONE]];
                for n in 1..=n_max {
                    let layer: Vec<Complex64> = (0..dim.pow(n as u32))
                        .map(|idx| {
                            let alpha = decode_index(idx, n, dim);
                            let full = (1u32 << n) - 1;
                            (0u32..(1 << (n - 1)))
                                .map(|s| {
                                    let mask = 1 | (s << 1);
                                    let (lp, ip) = sub_index(&alpha, mask, dim);
                                    let (lr, ir) = sub_index(&alpha, full & !mask, dim);
                                    psi[lp][ip] * bell[lr][ir]
                                })
                                .sum()
                        })
                        .collect();
                    bell.push(layer);
                }
                Ok(bell
                    .into_iter()
                    .map(|o| o.into_iter().map(|x| base * x).collect())
                    .collect())
            }
            Field::Pullback { morphism, inner } => {
                let pushed: Vec<Vec<Complex64>> = dirs.iter().map(|d| push_dir(morphism, d)).collect();
                inner.exact_taylor(&morphism.element_map.apply(g), &pushed, n_max)
            }
        }
    }

    /// Bound on |phi(h)| over all group elements h with ||h||_op <= radius,
    /// when one is known analytically.
    pub fn op_envelope(&self, radius: f64) -> Option<f64> {
        match self {
            Field::Constant { value, .. } => Some(value.norm()),
            Field::Representative(r) => {
                if !r.pre_maps.is_empty() {
                    return None;
                }
                let nv = r.v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let np = r.phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                match r.rho {
                    Rho::Standard => Some(nv * np * radius),
                    Rho::Power(k) if k >= 0 => Some(nv * np * radius.powi(k)),
                    _ => None,
                }
            }
            Field::BlackBox(b) => b.envelope.as_ref().map(|e| e(radius)),
            Field::LinearCombination { terms, .. } => {
                let mut acc = 0.0;
                for (a, f) in terms {
                    acc += a.norm() * f.op_envelope(radius)?;
                }
                Some(acc)
            }
            Field::Product(a, b) => Some(a.op_envelope(radius)? * b.op_envelope(radius)?),
            Field::Exp(a) => Some(a.op_envelope(radius)?.exp()),
            Field::Pullback { .. } => None,
        }
    }

    /// Pull the field back along a morphism into its target group.
    pub fn pullback(&self, morphism: &GroupMorphism) -> Result<Field> {
        if self.group().name != morphism.target.name {
            return Err(Error::InvalidArgument(format!(
                "field lives on {}, morphism targets {}",
                self.group().name,
                morphism.target.name
            )));
        }
        Ok(match self {
            Field::Constant { value, .. } => Field::constant(morphism.source.clone(), *value),
            Field::Representative(r) => {
                let drho = (0..morphism.source.dim)
                    .map(|j| {
                        let col: Vec<Complex64> =
                            (0..morphism.target.dim).map(|i| c(morphism.tangent_map[(i, j)])).collect();
                        r.drho_dir(&col)
                    })
                    .collect();
                let mut out = (**r).clone();
                out.group = morphism.source.clone();
                out.pre_maps.insert(0, morphism.element_map);
                out.drho = drho;
                Field::representative(out)
            }
            Field::LinearCombination { terms, .. } => Field::LinearCombination {
                group: morphism.source.clone(),
                terms: terms
                    .iter()
                    .map(|(a, f)| Ok((*a, f.pullback(morphism)?)))
                    .collect::<Result<_>>()?,
            },
            Field::Product(a, b) => Field::Product(Box::new(a.pullback(morphism)?), Box::new(b.pullback(morphism)?)),
            Field::Exp(a) => Field::Exp(Box::new(a.pullback(morphism)?)),
            Field::BlackBox(_) | Field::Pullback { .. } => {
                Field::Pullback { morphism: morphism.clone(), inner: Box::new(self.clone()) }
            }
        })
    }

    /// The counterpart of this field on the complexification partner: the
    /// same formula with drho extended C-linearly.
    pub fn complexify(&self) -> Result<Field> {
        let group = self.group();
        let link = group
            .complexification
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", group.name)))?;
        let partner = link.partner.clone();
        Ok(match self {
            Field::Constant { value, .. } => Field::constant(partner, *value),
            Field::Representative(r) => {
                // Column j of A: source complex coordinates of the j-th
                // partner span direction; the i-multiples follow C-linearly.
                let a = group.complexified_tangent_inverse()?;
                let h = partner.complex_dim();
                let mut drho = Vec::with_capacity(partner.dim);
                for j in 0..h {
                    let col: Vec<Complex64> = (0..group.dim).map(|i| a[(i, j)]).collect();
                    drho.push(r.drho_dir(&col));
                }
                for j in 0..h {
                    drho.push(&drho[j] * linalg::I);
                }
                let mut out = (**r).clone();
                out.group = partner;
                out.drho = drho;
                if link.element_map != ElementMap::Inclusion {
                    out.pre_maps.insert(0, link.element_map);
                }
                Field::representative(out)
            }
            Field::BlackBox(b) => {
                if b.regularity == Regularity::SmoothOnly {
                    return Err(Error::UnsupportedMethod(format!(
                        "'{}' is smooth-only and has no holomorphic counterpart",
                        b.name
                    )));
                }
                Field::BlackBox(BlackBox {
                    name: b.name.clone(),
                    group: partner,
                    evaluator: b.evaluator.clone(),
                    regularity: Regularity::Holomorphic,
                    envelope: None,
                })
            }
            Field::LinearCombination { terms, .. } => Field::LinearCombination {
                group: partner,
                terms: terms.iter().map(|(a, f)| Ok((*a, f.complexify()?))).collect::<Result<_>>()?,
            },
            Field::Product(a, b) => Field::Product(Box::new(a.complexify()?), Box::new(b.complexify()?)),
            Field::Exp(a) => Field::Exp(Box::new(a.complexify()?)),
            Field::Pullback { morphism, inner } => {
                let cm = complexified_morphism(morphism)?;
                Field::Pullback { morphism: cm, inner: Box::new(inner.complexify()?) }
            }
        })
    }
}

fn complexified_morphism(m: &GroupMorphism) -> Result<GroupMorphism> {
    let src = m
        .source
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("morphism source has no complexification".into()))?;
    let tgt = m
        .target
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("morphism target has no complexification".into()))?;
    crate::group::registered_morphisms()?
        .into_iter()
        .find(|cm| cm.source.name == src.partner.name && cm.target.name == tgt.partner.name && cm.element_map == m.element_map)
        .ok_or_else(|| Error::NotFound(format!("complexification of morphism {}", m.name)))
}

fn push_dir(m: &GroupMorphism, dir: &[Complex64]) -> Vec<Complex64> {
    (0..m.target.dim)
        .map(|i| (0..m.source.dim).map(|j| dir[j] * m.tangent_map[(i, j)]).sum())
        .collect()
}

/// Sum over set partitions of `positions` of the product of block derivatives.
fn partition_sum(psi: &Field, dirs: &[Vec<Complex64>], positions: &[usize], g: &CMat) -> Result<Complex64> {
    if positions.is_empty() {
        return Ok(ONE);
    }
    let first = positions[0];
    let rest = &positions[1..];
    let mut acc = ZERO;
    for mask in 0u32..(1 << rest.len()) {
        let mut block = vec![dirs[first].clone()];
        let mut others = Vec::new();
        for (p, &pos) in rest.iter().enumerate() {
            if mask & (1 << p) != 0 {
                block.push(dirs[pos].clone());
            } else {
                others.push(pos);
            }
        }
        acc += psi.exact_derivative(&block, g)? * partition_sum(psi, dirs, &others, g)?;
    }
    Ok(acc)
}

/// Largest number of partition terms the bulk exponential recursion may
/// take; order n in d directions costs sum_k d^k 2^(k-1).
pub const EXP_TERM_LIMIT: f64 = 2.5e8;

/// Names of the built-in catalog fields.
pub const CATALOG: [&str; 11] = [
    "identity",
    "entry-11",
    "trace",
    "adjoint",
    "trace-exp",
    "re-entry-11",
    "inv-square",
    "circle-wave",
    "trig-poly",
    "constant:<c>",
    "character:<k>",
];

fn adjoint_field(group: Arc<GroupModel>) -> Result<Field> {
    let frame: Vec<CMat> = group.basis[..group.complex_dim()].to_vec();
    let n = frame.len();
    let mut v = vec![ZERO; n];
    v[0] = ONE;
    let phi = vec![ONE; n];
    Ok(Field::representative(Representative::new(group, Rho::Adjoint { frame }, None, v, phi)?))
}

fn character(group: Arc<GroupModel>, k: i32) -> Result<Field> {
    Ok(Field::representative(Representative::new(group, Rho::Power(k), None, vec![ONE], vec![ONE])?))
}

fn trace_field(group: Arc<GroupModel>) -> Result<Field> {
    let terms = (0..group.size)
        .map(|i| Ok((ONE, Field::entry(group.clone(), i, i)?)))
        .collect::<Result<Vec<_>>>()?;
    Field::linear_combination(terms)
}

/// Look up a built-in field on a registry group.
///
/// * `identity`: z on U1 / Ctimes, g11 elsewhere.
/// * `entry-11`, `trace`, `trace-exp` = exp(tr g), `adjoint` = sum of the
///   coordinates of Ad_g(e_1).
/// * `re-entry-11`: Re(g11), a smooth-only control field.
/// * `inv-square`: 1/(1 + x^2) on R1 (real-analytic, radius 1).
/// * `circle-wave`: t -> exp(2 pi i t) on R1, the pullback of z along R -> U(1).
/// * `trig-poly`: 2 z^-1 + 3 + z^2 on U1 / Ctimes.
/// * `constant:<c>` and `character:<k>` (z^k on 1x1 groups).
pub fn catalog(name: &str, group: &Arc<GroupModel>) -> Result<Field> {
    let g = group.clone();
    if let Some(v) = name.strip_prefix("constant:") {
        let x: f64 = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad constant '{v}'")))?;
        return Ok(Field::constant(g, c(x)));
    }
    if let Some(v) = name.strip_prefix("character:") {
        let k: i32 = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad character '{v}'")))?;
        return character(g, k);
    }
    match name {
        "identity" | "entry-11" => Field::entry(g, 0, 0),
        "trace" => trace_field(g),
        "trace-exp" => Ok(Field::exp(trace_field(g)?)),
        "adjoint" => {
            if g.size < 2 {
                return Err(Error::InvalidArgument("adjoint field needs a non-abelian group".into()));
            }
            adjoint_field(g)
        }
        "re-entry-11" => Ok(Field::BlackBox(BlackBox {
            name: name.into(),
            group: g,
            evaluator: Arc::new(|m: &CMat| c(m[(0, 0)].re)),
            regularity: Regularity::SmoothOnly,
            envelope: Some(Arc::new(|r| r)),
        })),
        "inv-square" => {
            if g.kind != crate::group::GroupKind::RealVector || g.dim != 1 {
                return Err(Error::InvalidArgument("inv-square lives on R1".into()));
            }
            Ok(Field::BlackBox(BlackBox {
                name: name.into(),
                group: g,
                evaluator: Arc::new(|m: &CMat| {
                    let x = m[(0, 1)];
                    ONE / (ONE + x * x)
                }),
                regularity: Regularity::RealAnalytic,
                envelope: None,
            }))
        }
        "circle-wave" => {
            if g.name != "R1" {
                return Err(Error::InvalidArgument("circle-wave lives on R1".into()));
            }
            let u1 = registry_get("U1")?;
            Field::entry(u1, 0, 0)?.pullback(&crate::group::circle_covering()?)
        }
        "trig-poly" => {
            if g.size != 1 {
                return Err(Error::InvalidArgument("trig-poly lives on U1 or Ctimes".into()));
            }
            Field::linear_combination(vec![
                (c(2.0), character(g.clone(), -1)?),
                (ONE, Field::constant(g.clone(), c(3.0))),
                (ONE, character(g, 2)?),
            ])
        }
        _ => Err(Error::NotFound(format!("field '{name}'"))),
    }
}

/// JSON descriptor of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldDescriptor {
    Builtin { name: String, group: String },
    Constant { group: String, value: [f64; 2] },
    Representative {
        group: String,
        /// "standard" or "adjoint".
        rho: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drho: Option<Vec<Vec<[f64; 2]>>>,
        v: Vec<[f64; 2]>,
        phi: Vec<[f64; 2]>,
    },
    LinearCombination { terms: Vec<([f64; 2], FieldDescriptor)> },
    Product { left: Box<FieldDescriptor>, right: Box<FieldDescriptor> },
    Exp { inner: Box<FieldDescriptor> },
}

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

impl FieldDescriptor {
    pub fn build(&self) -> Result<Field> {
        match self {
            FieldDescriptor::Builtin { name, group } => catalog(name, &registry_get(group)?),
            FieldDescriptor::Constant { group, value } => Ok(Field::constant(registry_get(group)?, cx(*value))),
            FieldDescriptor::Representative { group, rho, drho, v, phi } => {
                let group = registry_get(group)?;
                let rho = match rho.as_str() {
                    "standard" => Rho::Standard,
                    "adjoint" => Rho::Adjoint { frame: group.basis[..group.complex_dim()].to_vec() },
                    other => return Err(Error::InvalidArgument(format!("unknown rho '{other}'"))),
                };
                let n = v.len();
                let drho = match drho {
                    None => None,
                    Some(ms) => Some(
                        ms.iter()
                            .map(|m| crate::group::pairs_to_matrix(n, m))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                let rep = Representative::new(
                    group,
                    rho,
                    drho,
                    v.iter().map(|p| cx(*p)).collect(),
                    phi.iter().map(|p| cx(*p)).collect(),
                )?;
                let residual = rep.homomorphism_residual()?;
                if residual > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "drho is not the derivative of rho (residual {residual:e})"
                    )));
                }
                Ok(Field::representative(rep))
            }
            FieldDescriptor::LinearCombination { terms } => Field::linear_combination(
                terms
                    .iter()
                    .map(|(a, d)| Ok((cx(*a), d.build()?)))
                    .collect::<Result<_>>()?,
            ),
            FieldDescriptor::Product { left, right } => Field::product(left.build()?, right.build()?),
            FieldDescriptor::Exp { inner } => Ok(Field::exp(inner.build()?)),
        }
    }

    /// Descriptor of a field built from registry groups. Black boxes and
    /// pullbacks are only describable through the catalog.
    pub fn describe(field: &Field) -> Result<FieldDescriptor> {
        Ok(match field {
            Field::Constant { group, value } => FieldDescriptor::Constant { group: group.name.clone(), value: pair(*value) },
            Field::Representative(r) => {
                if !r.pre_maps.is_empty() || matches!(r.rho, Rho::Power(_)) {
                    return Err(Error::InvalidArgument("field has no standalone descriptor".into()));
                }
                FieldDescriptor::Representative {
                    group: r.group.name.clone(),
                    rho: match r.rho {
                        Rho::Standard => "standard".into(),
                        _ => "adjoint".into(),
                    },
                    drho: Some(r.drho.iter().map(crate::group::matrix_to_pairs).collect()),
                    v: r.v.iter().map(|z| pair(*z)).collect(),
                    phi: r.phi.iter().map(|z| pair(*z)).collect(),
                }
            }
            Field::BlackBox(b) => FieldDescriptor::Builtin { name: b.name.clone(), group: b.group.name.clone() },
            Field::LinearCombination { terms, .. } => FieldDescriptor::LinearCombination {
                terms: terms
                    .iter()
                    .map(|(a, f)| Ok((pair(*a), FieldDescriptor::describe(f)?)))
                    .collect::<Result<_>>()?,
            },
            Field::Product(a, b) => FieldDescriptor::Product {
                left: Box::new(FieldDescriptor::describe(a)?),
                right: Box::new(FieldDescriptor::describe(b)?),
            },
            Field::Exp(a) => FieldDescriptor::Exp { inner: Box::new(FieldDescriptor::describe(a)?) },
            Field::Pullback { .. } => {
                return Err(Error::InvalidArgument("pullback fields have no standalone descriptor".into()))
            }
        })
    }
}

/// exp(2 pi i t): closed form of the `circle-wave` field, used by tests.
pub fn circle_wave_value(t: Complex64) -> Complex64 {
    (Complex64::new(0.0, 2.0 * PI) * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sl2r() -> Arc<GroupModel> {
        registry_get("SL2R").unwrap()
    }

    #[test]
    fn entry_eval_examples() {
        let f = catalog("entry-11", &sl2r()).unwrap();
        assert_eq!(f.eval(&linalg::identity(2)).unwrap(), ONE);
        let g = sl2r().exp(&[0.1, 0.0, 0.0]).unwrap();
        assert!((f.eval(&g).unwrap() - c(0.1f64.exp())).norm() < 1e-15);
        let u1 = registry_get("U1").unwrap();
        let z = catalog("identity", &u1).unwrap();
        let v = z.eval(&u1.exp(&[0.25]).unwrap()).unwrap();
        assert!((v - linalg::I).norm() < 1e-15);
    }

    #[test]
    fn exact_derivative_examples() {
        let f = catalog("entry-11", &sl2r()).unwrap();
        let e = linalg::identity(2);
        assert_eq!(f.exact_lie_derivative(&[0], &e).unwrap(), ONE);
        assert_eq!(f.exact_lie_derivative(&[1, 2], &e).unwrap(), ONE);
        assert_eq!(f.exact_lie_derivative(&[0, 1], &e).unwrap(), ZERO);
        assert!(matches!(f.exact_lie_derivative(&[3], &e), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = sl2r().exp(&[0.2, -0.1, 0.3]).unwrap();
        for name in ["entry-11", "adjoint", "trace-exp"] {
            let f = catalog(name, &sl2r()).unwrap();
            for k in 0..3 {
                let h = 1e-5;
                let mut xi = vec![0.0; 3];
                xi[k] = h;
                let fp = f.eval(&(&g * sl2r().exp(&xi).unwrap())).unwrap();
                xi[k] = -h;
                let fm = f.eval(&(&g * sl2r().exp(&xi).unwrap())).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let ex = f.exact_lie_derivative(&[k], &g).unwrap();
                assert!((fd - ex).norm() < 1e-6, "{name} k={k}: {fd} vs {ex}");
            }
        }
    }

    #[test]
    fn adjoint_is_a_homomorphism() {
        for name in ["SL2R", "SL2C", "SU2"] {
            let f = catalog("adjoint", &registry_get(name).unwrap()).unwrap();
            if let Field::Representative(r) = f {
                assert!(r.homomorphism_residual().unwrap() < 1e-12, "{name}");
            } else {
                panic!("adjoint is representative");
            }
        }
    }

    #[test]
    fn bulk_taylor_matches_single_derivatives() {
        let g = sl2r().exp(&[0.1, 0.2, -0.3]).unwrap();
        let dirs: Vec<Vec<Complex64>> = (0..3)
            .map(|k| (0..3).map(|i| if i == k { ONE } else { ZERO }).collect())
            .collect();
        let f = Field::product(
            catalog("trace-exp", &sl2r()).unwrap(),
            catalog("adjoint", &sl2r()).unwrap(),
        )
        .unwrap();
        let t = f.exact_taylor(&g, &dirs, 3).unwrap();
        for n in 0..=3 {
            for (idx, coeff) in t[n].iter().enumerate() {
                let alpha = decode_index(idx, n, 3);
                let single = f.exact_lie_derivative(&alpha, &g).unwrap();
                assert!((single - coeff).norm() <= 1e-12 * (1.0 + single.norm()), "{alpha:?}");
            }
        }
    }

    #[test]
    fn pullback_examples() {
        let p = crate::group::circle_covering().unwrap();
        let u1 = registry_get("U1").unwrap();
        let wave = catalog("identity", &u1).unwrap().pullback(&p).unwrap();
        let r1 = registry_get("R1").unwrap();
        let g = r1.exp(&[0.3]).unwrap();
        assert!((wave.eval(&g).unwrap() - circle_wave_value(c(0.3))).norm() < 1e-14);
        let d = wave.exact_lie_derivative(&[0], &r1.identity()).unwrap();
        assert!((d - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-14);
        let eta = crate::group::complexification_morphism(&u1).unwrap();
        let five = Field::constant(registry_get("Ctimes").unwrap(), c(5.0));
        assert_eq!(five.pullback(&eta).unwrap().eval(&u1.identity()).unwrap(), c(5.0));
        assert!(matches!(five.pullback(&p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn complexified_derivatives_agree() {
        let su2 = registry_get("SU2").unwrap();
        let f = catalog("adjoint", &su2).unwrap();
        let fc = f.complexify().unwrap();
        let g = su2.exp(&[0.3, -0.2, 0.1]).unwrap();
        for k in 0..3 {
            let col = su2.complexification.as_ref().unwrap().tangent_map.column(k).iter().map(|x| c(*x)).collect::<Vec<_>>();
            let lhs = fc.exact_derivative(&[col], &g).unwrap();
            let rhs = f.exact_lie_derivative(&[k], &g).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn descriptors_round_trip() {
        let f = catalog("trace-exp", &sl2r()).unwrap();
        let d = FieldDescriptor::describe(&f).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: FieldDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        let g = sl2r().exp(&[0.2, 0.1, 0.0]).unwrap();
        assert_eq!(back.build().unwrap().eval(&g).unwrap(), f.eval(&g).unwrap());
    }

    #[test]
    fn exponential_data_is_budgeted() {
        let f = catalog("trace-exp", &sl2r()).unwrap();
        let dirs: Vec<Vec<Complex64>> = (0..3).map(|k| (0..3).map(|i| if i == k { ONE } else { ZERO }).collect()).collect();
        let e = sl2r().identity();
        assert!(matches!(f.exact_taylor(&e, &dirs, 12), Err(Error::Refused { .. })));
        let t = f.exact_taylor(&e, &dirs, 4).unwrap();
        // e^{tr} at 1 is e^2; along H the trace is constant to first order.
        assert!((t[0][0] - c(2f64.exp())).norm() < 1e-12);
        assert!(t[1][0].norm() < 1e-12);
    }
}
