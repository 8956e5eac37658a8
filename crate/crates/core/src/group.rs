//! Matrix Lie groups, their exponential charts, morphisms and the curated
//! registry of complexification pairs.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I, ONE, ZERO};

/// Default membership tolerance, scaled by the condition of the element.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// Which membership predicate a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    /// U(1) as unit complex numbers.
    Circle,
    /// The punctured plane C^x.
    PuncturedPlane,
    /// R^d as real unipotent (d+1)x(d+1) matrices.
    RealVector,
    /// C^d as complex unipotent (d+1)x(d+1) matrices.
    ComplexVector,
    Sl2R,
    Sl2C,
    Su2,
}

/// Matrix-level realization of a morphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementMap {
    /// Reinterpret the matrix in the target group.
    Inclusion,
    /// The covering R -> U(1), t -> exp(2 pi i t), reading t from the
    /// translation entry of a 2x2 unipotent matrix. Also valid on C.
    CircleCovering,
}

impl ElementMap {
    pub fn apply(&self, g: &CMat) -> CMat {
        match self {
            ElementMap::Inclusion => g.clone(),
            ElementMap::CircleCovering => {
                CMat::from_element(1, 1, (Complex64::new(0.0, 2.0 * PI) * g[(0, 1)]).exp())
            }
        }
    }
}

/// Link from a real group to its (curated) universal complexification.
#[derive(Debug, Clone)]
pub struct Complexification {
    pub partner: Arc<GroupModel>,
    pub element_map: ElementMap,
    /// Real-linear map from source coordinates to partner coordinates,
    /// a (partner.dim x source.dim) matrix.
    pub tangent_map: DMatrix<f64>,
}

/// A matrix Lie group with a fixed real basis of its Lie algebra.
#[derive(Debug, Clone)]
pub struct GroupModel {
    pub name: String,
    pub kind: GroupKind,
    /// Real dimension d.
    pub dim: usize,
    /// Ambient matrix size m.
    pub size: usize,
    pub basis: Vec<CMat>,
    pub is_complex: bool,
    pub membership_tol: f64,
    pub complexification: Option<Complexification>,
    gram_inv: DMatrix<f64>,
}

/// A Lie group morphism with its matrix-level and tangent realizations.
#[derive(Debug, Clone)]
pub struct GroupMorphism {
    pub name: String,
    pub source: Arc<GroupModel>,
    pub target: Arc<GroupModel>,
    pub element_map: ElementMap,
    /// (target.dim x source.dim) real matrix.
    pub tangent_map: DMatrix<f64>,
}

fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

impl GroupModel {
    pub fn new(
        name: impl Into<String>,
        kind: GroupKind,
        size: usize,
        basis: Vec<CMat>,
        is_complex: bool,
    ) -> Result<Self> {
        let dim = basis.len();
        for b in &basis {
            if b.nrows() != size || b.ncols() != size {
                return Err(Error::InvalidArgument("basis matrix has wrong size".into()));
            }
        }
        let gram = DMatrix::from_fn(dim, dim, |i, j| real_inner(&basis[i], &basis[j]));
        let scale = gram.diagonal().iter().copied().fold(0.0, f64::max).max(1.0);
        let gram_inv = gram
            .clone()
            .try_inverse()
            .filter(|_| {
                let eig = gram.clone().symmetric_eigen().eigenvalues;
                eig.iter().copied().fold(f64::INFINITY, f64::min) > 1e-12 * scale
            })
            .ok_or_else(|| Error::InvalidArgument("basis is not linearly independent over R".into()))?;
        Ok(Self {
            name: name.into(),
            kind,
            dim,
            size,
            basis,
            is_complex,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
            complexification: None,
            gram_inv,
        })
    }

    /// Number of complex directions: d/2 for complex groups, d otherwise.
    pub fn complex_dim(&self) -> usize {
        if self.is_complex {
            self.dim / 2
        } else {
            self.dim
        }
    }

    pub fn identity(&self) -> CMat {
        linalg::identity(self.size)
    }

    /// The Lie algebra element sum_k xi^k e_k.
    pub fn algebra_element(&self, xi: &[f64]) -> CMat {
        assert_eq!(xi.len(), self.dim, "coordinate vector has wrong length");
        let mut out = CMat::zeros(self.size, self.size);
        for (x, b) in xi.iter().zip(&self.basis) {
            out += b * c(*x);
        }
        out
    }

    /// sum_k w^k e_k for complex coefficients over the first `w.len()` basis
    /// elements. For a complex group with w.len() = d/2 this is the complex
    /// span coordinate chart; for a real group it lands in the complexification.
    pub fn algebra_element_complex(&self, w: &[Complex64]) -> CMat {
        assert!(w.len() <= self.dim, "too many complex coordinates");
        let mut out = CMat::zeros(self.size, self.size);
        for (x, b) in w.iter().zip(&self.basis) {
            out += b * *x;
        }
        out
    }

    pub fn exp(&self, xi: &[f64]) -> Result<CMat> {
        if xi.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                self.dim,
                xi.len()
            )));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinates".into()));
        }
        Ok(linalg::expm(&self.algebra_element(xi)))
    }

    pub fn exp_complex(&self, w: &[Complex64]) -> Result<CMat> {
        if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinates".into()));
        }
        Ok(linalg::expm(&self.algebra_element_complex(w)))
    }

    /// Least-squares real coordinates of a matrix in the basis, with the
    /// max-entry residual of the reconstruction.
    pub fn coords(&self, x: &CMat) -> (Vec<f64>, f64) {
        let rhs = nalgebra::DVector::from_iterator(
            self.dim,
            self.basis.iter().map(|b| real_inner(b, x)),
        );
        let sol = &self.gram_inv * rhs;
        let coords: Vec<f64> = sol.iter().copied().collect();
        let residual = linalg::max_abs(&(self.algebra_element(&coords) - x));
        (coords, residual)
    }

    /// Principal logarithm in real coordinates.
    pub fn log(&self, g: &CMat) -> Result<Vec<f64>> {
        let l = linalg::logm(g)?;
        let (xi, residual) = self.coords(&l);
        let tol = self.membership_tol * (1.0 + linalg::max_abs(&l));
        if residual > tol {
            return Err(Error::Domain(format!(
                "logarithm leaves the Lie algebra of {} (residual {residual:e})",
                self.name
            )));
        }
        Ok(xi)
    }

    /// Principal logarithm in complex span coordinates (complex groups).
    pub fn log_complex(&self, g: &CMat) -> Result<Vec<Complex64>> {
        let xi = self.log(g)?;
        Ok(self.real_to_complex(&xi))
    }

    /// (x_1..x_h, y_1..y_h) -> (x_k + i y_k) for complex groups; real groups
    /// embed coordinates unchanged.
    pub fn real_to_complex(&self, xi: &[f64]) -> Vec<Complex64> {
        if self.is_complex {
            let h = self.dim / 2;
            (0..h).map(|k| Complex64::new(xi[k], xi[k + h])).collect()
        } else {
            xi.iter().map(|x| c(*x)).collect()
        }
    }

    pub fn complex_to_real(&self, w: &[Complex64]) -> Vec<f64> {
        if self.is_complex {
            let mut out: Vec<f64> = w.iter().map(|z| z.re).collect();
            out.extend(w.iter().map(|z| z.im));
            out
        } else {
            w.iter().map(|z| z.re).collect()
        }
    }

    /// Membership tolerance scaled by the condition number of `g`.
    pub fn effective_tol(&self, g: &CMat) -> f64 {
        let cond = match linalg::inverse(g) {
            Ok(gi) => linalg::op_norm(g) * linalg::op_norm(&gi),
            Err(_) => f64::INFINITY,
        };
        self.membership_tol * cond.max(1.0)
    }

    /// The defining membership predicate.
    pub fn contains(&self, g: &CMat) -> bool {
        self.membership_residual(g) <= self.effective_tol(g)
    }

    pub fn membership_residual(&self, g: &CMat) -> f64 {
        if g.nrows() != self.size || g.ncols() != self.size || !linalg::is_finite(g) {
            return f64::INFINITY;
        }
        let det2 = |g: &CMat| g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let imag = |g: &CMat| g.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        match self.kind {
            GroupKind::Circle => (g[(0, 0)].norm_sqr() - 1.0).abs(),
            GroupKind::PuncturedPlane => {
                if g[(0, 0)].norm() > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GroupKind::RealVector | GroupKind::ComplexVector => {
                let n = self.size;
                let mut r: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if j == n - 1 && i < n - 1 {
                            if self.kind == GroupKind::RealVector {
                                r = r.max(g[(i, j)].im.abs());
                            }
                            continue;
                        }
                        let expected = if i == j { ONE } else { ZERO };
                        r = r.max((g[(i, j)] - expected).norm());
                    }
                }
                r
            }
            GroupKind::Sl2R => (det2(g) - ONE).norm().max(imag(g)),
            GroupKind::Sl2C => (det2(g) - ONE).norm(),
            GroupKind::Su2 => {
                let u = g.adjoint() * g - linalg::identity(2);
                (det2(g) - ONE).norm().max(linalg::max_abs(&u))
            }
        }
    }

    /// Check the structural invariants of the model.
    pub fn validate(&self) -> Result<()> {
        let tol = self.membership_tol;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let br = linalg::commutator(&self.basis[i], &self.basis[j]);
                let (_, residual) = self.coords(&br);
                if residual > tol * (1.0 + linalg::max_abs(&br)) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: bracket [e{}, e{}] leaves the span (residual {residual:e})",
                        self.name,
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for k in 0..self.dim {
            for t in [-0.5, -0.1, 0.1, 0.5] {
                let mut xi = vec![0.0; self.dim];
                xi[k] = t;
                let g = self.exp(&xi)?;
                if !self.contains(&g) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: exp({t} e{}) fails membership",
                        self.name,
                        k + 1
                    )));
                }
            }
        }
        if self.is_complex {
            let h = self.dim / 2;
            if !self.dim.is_multiple_of(2) {
                return Err(Error::InvalidArgument("complex group with odd real dimension".into()));
            }
            for k in 0..h {
                let expected = &self.basis[k] * I;
                if linalg::max_abs(&(&self.basis[k + h] - expected)) > tol {
                    return Err(Error::InvalidArgument(format!(
                        "{}: basis element {} is not i times element {}",
                        self.name,
                        k + h + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Complex d x d matrix C with partner span coordinates u = C w for
    /// source complex coordinates w (C-linear extension of the tangent map).
    pub fn complexified_tangent(&self) -> Result<DMatrix<Complex64>> {
        let link = self
            .complexification
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", self.name)))?;
        let h = link.partner.complex_dim();
        let t = &link.tangent_map;
        Ok(DMatrix::from_fn(h, self.dim, |i, j| Complex64::new(t[(i, j)], t[(i + h, j)])))
    }

    /// Inverse of [`Self::complexified_tangent`]: column j holds the source
    /// complex coordinates of the j-th partner span direction.
    pub fn complexified_tangent_inverse(&self) -> Result<DMatrix<Complex64>> {
        let cm = self.complexified_tangent()?;
        if cm.nrows() != cm.ncols() {
            return Err(Error::InvalidArgument("tangent map is not locally injective".into()));
        }
        cm.try_inverse()
            .ok_or_else(|| Error::InvalidArgument("tangent map is not invertible".into()))
    }
}

impl GroupMorphism {
    /// Chart compatibility residual at one coordinate vector.
    pub fn chart_residual(&self, xi: &[f64]) -> Result<f64> {
        let lhs = self.element_map.apply(&self.source.exp(xi)?);
        let pushed: Vec<f64> = (&self.tangent_map * nalgebra::DVector::from_row_slice(xi))
            .iter()
            .copied()
            .collect();
        let rhs = self.target.exp(&pushed)?;
        Ok(linalg::max_abs(&(lhs - rhs)))
    }

    pub fn push_coords(&self, xi: &[f64]) -> Vec<f64> {
        (&self.tangent_map * nalgebra::DVector::from_row_slice(xi))
            .iter()
            .copied()
            .collect()
    }
}

fn m(size: usize, entries: &[Complex64]) -> CMat {
    CMat::from_row_slice(size, size, entries)
}

fn sl2_basis() -> Vec<CMat> {
    vec![
        m(2, &[ONE, ZERO, ZERO, -ONE]),
        m(2, &[ZERO, ONE, ZERO, ZERO]),
        m(2, &[ZERO, ZERO, ONE, ZERO]),
    ]
}

fn with_i_multiples(basis: Vec<CMat>) -> Vec<CMat> {
    let mut out = basis.clone();
    out.extend(basis.iter().map(|b| b * I));
    out
}

fn vector_basis(d: usize) -> Vec<CMat> {
    (0..d)
        .map(|k| {
            let mut b = CMat::zeros(d + 1, d + 1);
            b[(k, d)] = ONE;
            b
        })
        .collect()
}

fn stack_identity(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * d, d, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn finish(mut g: GroupModel, link: Option<Complexification>) -> Result<Arc<GroupModel>> {
    g.complexification = link;
    g.validate()?;
    Ok(Arc::new(g))
}

fn parse_vector_dim(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    let digits = rest
        .strip_prefix("d(")
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(rest);
    digits.parse().ok().filter(|d| (1..=3).contains(d))
}

/// Names accepted by [`registry_get`].
pub const REGISTRY_NAMES: [&str; 8] = ["U1", "Ctimes", "R1", "R2", "C1", "C2", "SL2R", "SL2C"];

/// Look up a curated group model. Accepted names: `U1`, `Ctimes`, `R<d>` or
/// `Rd(<d>)` and `C<d>` for d in 1..=3, `SL2R`, `SL2C`, `SU2`.
pub fn registry_get(name: &str) -> Result<Arc<GroupModel>> {
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    match name {
        "U1" => {
            let ct = registry_get("Ctimes")?;
            let g = GroupModel::new("U1", GroupKind::Circle, 1, vec![m(1, &[two_pi_i])], false)?;
            finish(
                g,
                Some(Complexification {
                    partner: ct,
                    element_map: ElementMap::Inclusion,
                    tangent_map: stack_identity(1),
                }),
            )
        }
        "Ctimes" => {
            let g = GroupModel::new(
                "Ctimes",
                GroupKind::PuncturedPlane,
                1,
                with_i_multiples(vec![m(1, &[two_pi_i])]),
                true,
            )?;
            finish(g, None)
        }
        "SL2R" => {
            let partner = registry_get("SL2C")?;
            let g = GroupModel::new("SL2R", GroupKind::Sl2R, 2, sl2_basis(), false)?;
            finish(
                g,
                Some(Complexification {
                    partner,
                    element_map: ElementMap::Inclusion,
                    tangent_map: stack_identity(3),
                }),
            )
        }
        "SL2C" => {
            let g = GroupModel::new("SL2C", GroupKind::Sl2C, 2, with_i_multiples(sl2_basis()), true)?;
            finish(g, None)
        }
        "SU2" => {
            let [h, e, f]: [CMat; 3] = sl2_basis().try_into().expect("three sl2 generators");
            let basis = vec![&h * I, &e - &f, (&e + &f) * I];
            let g = GroupModel::new("SU2", GroupKind::Su2, 2, basis, false)?;
            // iH -> (0,0,0,1,0,0); E - F -> (0,1,-1,0,0,0); iE + iF -> (0,0,0,0,1,1).
            let mut t = DMatrix::zeros(6, 3);
            t[(3, 0)] = 1.0;
            t[(1, 1)] = 1.0;
            t[(2, 1)] = -1.0;
            t[(4, 2)] = 1.0;
            t[(5, 2)] = 1.0;
            finish(
                g,
                Some(Complexification {
                    partner: registry_get("SL2C")?,
                    element_map: ElementMap::Inclusion,
                    tangent_map: t,
                }),
            )
        }
        _ => {
            if let Some(d) = parse_vector_dim(name, 'R') {
                let partner = registry_get(&format!("C{d}"))?;
                let g = GroupModel::new(format!("R{d}"), GroupKind::RealVector, d + 1, vector_basis(d), false)?;
                return finish(
                    g,
                    Some(Complexification {
                        partner,
                        element_map: ElementMap::Inclusion,
                        tangent_map: stack_identity(d),
                    }),
                );
            }
            if let Some(d) = parse_vector_dim(name, 'C') {
                let g = GroupModel::new(
                    format!("C{d}"),
                    GroupKind::ComplexVector,
                    d + 1,
                    with_i_multiples(vector_basis(d)),
                    true,
                )?;
                return finish(g, None);
            }
            Err(Error::NotFound(format!("group '{name}'")))
        }
    }
}

/// The complexification inclusion of a real group, as a morphism.
pub fn complexification_morphism(group: &Arc<GroupModel>) -> Result<GroupMorphism> {
    let link = group
        .complexification
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no complexification", group.name)))?;
    Ok(GroupMorphism {
        name: format!("eta:{}->{}", group.name, link.partner.name),
        source: group.clone(),
        target: link.partner.clone(),
        element_map: link.element_map,
        tangent_map: link.tangent_map.clone(),
    })
}

/// The covering p: R -> U(1), t -> exp(2 pi i t).
pub fn circle_covering() -> Result<GroupMorphism> {
    Ok(GroupMorphism {
        name: "p:R1->U1".into(),
        source: registry_get("R1")?,
        target: registry_get("U1")?,
        element_map: ElementMap::CircleCovering,
        tangent_map: DMatrix::from_element(1, 1, 1.0),
    })
}

/// The complexified covering C -> C^x, w -> exp(2 pi i w).
pub fn complexified_circle_covering() -> Result<GroupMorphism> {
    Ok(GroupMorphism {
        name: "p:C1->Ctimes".into(),
        source: registry_get("C1")?,
        target: registry_get("Ctimes")?,
        element_map: ElementMap::CircleCovering,
        tangent_map: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
    })
}

/// Every morphism registered alongside the groups.
pub fn registered_morphisms() -> Result<Vec<GroupMorphism>> {
    let mut out = Vec::new();
    for name in ["U1", "R1", "R2", "SL2R", "SU2"] {
        out.push(complexification_morphism(&registry_get(name)?)?);
    }
    out.push(circle_covering()?);
    out.push(complexified_circle_covering()?);
    Ok(out)
}

pub fn morphism_by_name(name: &str) -> Result<GroupMorphism> {
    registered_morphisms()?
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::NotFound(format!("morphism '{name}'")))
}

/// JSON form of a registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub name: String,
    pub kind: GroupKind,
    pub d: usize,
    pub m: usize,
    pub is_complex: bool,
    /// Each basis matrix row-major as [re, im] pairs.
    pub basis: Vec<Vec<[f64; 2]>>,
    pub complexification: Option<String>,
    pub morphisms: Vec<MorphismRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphismRecord {
    pub name: String,
    pub source: String,
    pub target: String,
    pub element_map: ElementMap,
    /// Row-major tangent map.
    pub tangent_map: Vec<Vec<f64>>,
}

pub fn matrix_to_pairs(a: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push([a[(i, j)].re, a[(i, j)].im]);
        }
    }
    out
}

pub fn pairs_to_matrix(size: usize, pairs: &[[f64; 2]]) -> Result<CMat> {
    if pairs.len() != size * size {
        return Err(Error::InvalidArgument(format!(
            "expected {} entries for a {size}x{size} matrix, got {}",
            size * size,
            pairs.len()
        )));
    }
    let entries: Vec<Complex64> = pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    Ok(CMat::from_row_slice(size, size, &entries))
}

fn morphism_record(mm: &GroupMorphism) -> MorphismRecord {
    MorphismRecord {
        name: mm.name.clone(),
        source: mm.source.name.clone(),
        target: mm.target.name.clone(),
        element_map: mm.element_map,
        tangent_map: (0..mm.tangent_map.nrows())
            .map(|i| mm.tangent_map.row(i).iter().copied().collect())
            .collect(),
    }
}

impl GroupModel {
    pub fn to_record(&self) -> Result<GroupRecord> {
        let morphisms = registered_morphisms()?
            .iter()
            .filter(|mm| mm.source.name == self.name)
            .map(morphism_record)
            .collect();
        Ok(GroupRecord {
            name: self.name.clone(),
            kind: self.kind,
            d: self.dim,
            m: self.size,
            is_complex: self.is_complex,
            basis: self.basis.iter().map(matrix_to_pairs).collect(),
            complexification: self.complexification.as_ref().map(|l| l.partner.name.clone()),
            morphisms,
        })
    }

    /// Rebuild a model from its record. The complexification partner is
    /// resolved through the registry.
    pub fn from_record(rec: &GroupRecord) -> Result<Arc<GroupModel>> {
        let basis = rec
            .basis
            .iter()
            .map(|b| pairs_to_matrix(rec.m, b))
            .collect::<Result<Vec<_>>>()?;
        if basis.len() != rec.d {
            return Err(Error::InvalidArgument("basis length differs from d".into()));
        }
        let g = GroupModel::new(rec.name.clone(), rec.kind, rec.m, basis, rec.is_complex)?;
        let link = match &rec.complexification {
            None => None,
            Some(partner) => {
                let partner = registry_get(partner)?;
                let mm = rec
                    .morphisms
                    .iter()
                    .find(|mm| mm.target == partner.name && mm.element_map == ElementMap::Inclusion)
                    .ok_or_else(|| Error::InvalidArgument("complexification morphism missing".into()))?;
                let rows = mm.tangent_map.len();
                let cols = mm.tangent_map.first().map_or(0, |r| r.len());
                let t = DMatrix::from_fn(rows, cols, |i, j| mm.tangent_map[i][j]);
                Some(Complexification { partner, element_map: mm.element_map, tangent_map: t })
            }
        };
        finish(g, link)
    }
}

/// The whole registry as JSON records.
pub fn registry_records() -> Result<Vec<GroupRecord>> {
    ["U1", "Ctimes", "R1", "R2", "C1", "C2", "SL2R", "SL2C", "SU2"]
        .iter()
        .map(|n| registry_get(n)?.to_record())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_shapes() {
        let sl2r = registry_get("SL2R").unwrap();
        assert_eq!((sl2r.dim, sl2r.size), (3, 2));
        let u1 = registry_get("U1").unwrap();
        assert_eq!(u1.dim, 1);
        assert_eq!(u1.basis[0][(0, 0)], Complex64::new(0.0, 2.0 * PI));
        assert_eq!(u1.complexification.as_ref().unwrap().partner.name, "Ctimes");
        let sl2c = registry_get("SL2C").unwrap();
        assert_eq!(sl2c.dim, 6);
        assert!(sl2c.is_complex);
        assert_eq!(registry_get("Rd(2)").unwrap().name, "R2");
        assert!(matches!(registry_get("SO3"), Err(Error::NotFound(_))));
    }

    #[test]
    fn complexification_doubles_dimension() {
        for name in ["U1", "R1", "R3", "SL2R", "SU2"] {
            let g = registry_get(name).unwrap();
            let partner = &g.complexification.as_ref().unwrap().partner;
            assert_eq!(partner.dim, 2 * g.dim, "{name}");
        }
    }

    #[test]
    fn exp_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        assert_eq!(sl2r.exp(&[0.0; 3]).unwrap(), linalg::identity(2));
        let g = sl2r.exp(&[0.7, 0.0, 0.0]).unwrap();
        assert!((g[(0, 0)].re - 0.7f64.exp()).abs() < 1e-15);
        assert!((g[(1, 1)].re - (-0.7f64).exp()).abs() < 1e-15);
        let u1 = registry_get("U1").unwrap();
        let z = u1.exp(&[0.25]).unwrap()[(0, 0)];
        assert!((z - I).norm() < 1e-15);
        assert!(matches!(sl2r.exp(&[f64::NAN, 0.0, 0.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn log_examples() {
        let sl2r = registry_get("SL2R").unwrap();
        let xi = sl2r.log(&linalg::identity(2)).unwrap();
        assert!(xi.iter().all(|x| x.abs() < 1e-15));
        let g = m(2, &[c(0.3f64.exp()), ZERO, ZERO, c((-0.3f64).exp())]);
        let xi = sl2r.log(&g).unwrap();
        assert!((xi[0] - 0.3).abs() < 1e-14 && xi[1].abs() < 1e-14 && xi[2].abs() < 1e-14);
        let u1 = registry_get("U1").unwrap();
        assert!(matches!(u1.log(&m(1, &[c(-1.0)])), Err(Error::OutOfChart { .. })));
    }

    #[test]
    fn morphisms_are_chart_compatible() {
        for mm in registered_morphisms().unwrap() {
            let d = mm.source.dim;
            for s in [-0.5, -0.2, 0.3, 0.5] {
                let xi: Vec<f64> = (0..d).map(|k| s * (k as f64 + 1.0) / d as f64).collect();
                let r = mm.chart_residual(&xi).unwrap();
                assert!(r <= 1e-12, "{}: residual {r}", mm.name);
            }
            let e = mm.element_map.apply(&mm.source.identity());
            assert!(linalg::max_abs(&(e - mm.target.identity())) < 1e-15);
        }
    }

    #[test]
    fn records_round_trip() {
        for rec in registry_records().unwrap() {
            let json = serde_json::to_string(&rec).unwrap();
            let back: GroupRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back, rec);
            let model = GroupModel::from_record(&back).unwrap();
            assert_eq!(model.to_record().unwrap(), rec);
        }
    }

    #[test]
    fn dependent_basis_rejected() {
        let b = sl2_basis();
        let dup = vec![b[0].clone(), b[0].clone() * c(2.0)];
        assert!(GroupModel::new("bad", GroupKind::Sl2R, 2, dup, false).is_err());
    }

    #[test]
    fn complex_tangent_of_su2() {
        let su2 = registry_get("SU2").unwrap();
        let cm = su2.complexified_tangent().unwrap();
        // u1 = iH has span coordinate i in the H slot.
        assert_eq!(cm[(0, 0)], I);
        let inv = su2.complexified_tangent_inverse().unwrap();
        let prod = &cm * &inv;
        assert!(linalg::max_abs(&(prod - linalg::identity(3))) < 1e-14);
    }
}
