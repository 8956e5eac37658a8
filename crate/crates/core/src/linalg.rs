//! Small dense complex linear algebra: matrix exponential and logarithm,
//! spectral norm, compensated summation.
//!
//! Every matrix in this crate is tiny (at most 4x4), so the routines favour
//! accuracy over asymptotic speed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for group elements and Lie algebra elements.
pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral (2-)operator norm: the largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].norm();
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    if a.nrows() == 1 {
        let z = a[(0, 0)];
        if z == ZERO {
            return Err(Error::Domain("singular 1x1 matrix".into()));
        }
        return Ok(CMat::from_element(1, 1, ONE / z));
    }
    if a.nrows() == 2 {
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        if det.norm() <= f64::MIN_POSITIVE {
            return Err(Error::Domain("singular matrix".into()));
        }
        return Ok(CMat::from_row_slice(
            2,
            2,
            &[a[(1, 1)] / det, -a[(0, 1)] / det, -a[(1, 0)] / det, a[(0, 0)] / det],
        ));
    }
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular matrix".into()))
}

/// Eigenvalues via the complex Schur decomposition.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    match a.nrows() {
        0 => Vec::new(),
        1 => vec![a[(0, 0)]],
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let disc = (tr * tr - 4.0 * det).sqrt();
            vec![(tr + disc) / 2.0, (tr - disc) / 2.0]
        }
        _ => {
            let schur = a.clone().schur();
            let (_, t) = schur.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
    }
}

// Padé(13,13) numerator coefficients for the exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    match n {
        0 => return CMat::zeros(0, 0),
        1 => return CMat::from_element(1, 1, a[(0, 0)].exp()),
        _ => {}
    }
    let norm = norm1(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * c(0.5f64.powi(s));
    let eye = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |k: usize| c(PADE13[k]);

    let w1 = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let w2 = &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &eye * b(1);
    let u = &a * (&a6 * w1 + w2);
    let z1 = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let z2 = &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &eye * b(0);
    let v = &a6 * z1 + z2;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yi = inverse(&y)?;
        let zi = inverse(&z)?;
        let y_next = (&y + &zi) * c(0.5);
        let z_next = (&z + &yi) * c(0.5);
        let delta = norm1(&(&y_next - &y)) / norm1(&y_next).max(f64::MIN_POSITIVE);
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Fails with [`Error::OutOfChart`] when an eigenvalue lies on the closed
/// negative real axis.
pub fn logm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "logm requires a square matrix");
    if !is_finite(a) {
        return Err(Error::InvalidArgument("non-finite matrix".into()));
    }
    let scale = max_abs(a).max(1.0);
    for lambda in eigenvalues(a) {
        let on_cut = lambda.re <= 0.0 && lambda.im.abs() <= 1e-12 * scale;
        if on_cut {
            return Err(Error::OutOfChart { eigenvalue: lambda });
        }
    }
    if n == 1 {
        return Ok(CMat::from_element(1, 1, a[(0, 0)].ln()));
    }
    let eye = identity(n);
    let mut x = a.clone();
    let mut squarings = 0;
    while norm1(&(&x - &eye)) > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::Domain("matrix logarithm failed to converge".into()));
        }
    }
    // log X = 2 atanh(Z) with Z = (X - I)(X + I)^{-1}.
    let zmat = (&x - &eye) * inverse(&(&x + &eye))?;
    let z2 = &zmat * &zmat;
    let mut term = zmat.clone();
    let mut acc = zmat.clone();
    for k in 1..200 {
        term = &term * &z2;
        let contrib = &term * c(1.0 / (2 * k + 1) as f64);
        acc += &contrib;
        if max_abs(&contrib) < 1e-18 * max_abs(&acc).max(1e-300) {
            break;
        }
    }
    Ok(acc * c(2f64.powi(squarings + 1)))
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Complex64) {
        self.sum.re = neumaier(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, x.im, &mut self.comp.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

#[inline]
fn neumaier(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Compensated real sum in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        sum = neumaier(sum, x, &mut comp);
    }
    sum + comp
}

/// Serde adapter storing a matrix as rows of `[re, im]` pairs.
pub mod serde_mat {
    use super::CMat;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(a: &CMat) -> Vec<Vec<[f64; 2]>> {
        (0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat, String> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMat::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(a: &CMat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(a).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    /// Adapter for `Vec<CMat>`.
    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(a: &[CMat], s: S) -> Result<S::Ok, S::Error> {
            a.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
            let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
            all.iter()
                .map(|rows| from_rows(rows).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    fn diag(entries: &[Complex64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_row_slice(entries))
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(expm(&CMat::zeros(3, 3)), identity(3));
    }

    #[test]
    fn expm_diagonal() {
        let a = diag(&[c(0.3), c(-0.3)]);
        let e = expm(&a);
        assert!(close(&e, &diag(&[c(0.3f64.exp()), c((-0.3f64).exp())]), 1e-15));
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(t [[0,-1],[1,0]]) is a rotation by t.
        let t = 2.5;
        let a = CMat::from_row_slice(2, 2, &[ZERO, c(-t), c(t), ZERO]);
        let e = expm(&a);
        let expected =
            CMat::from_row_slice(2, 2, &[c(t.cos()), c(-t.sin()), c(t.sin()), c(t.cos())]);
        assert!(close(&e, &expected, 1e-14));
    }

    #[test]
    fn expm_large_norm_scales() {
        let a = diag(&[c(20.0), c(-20.0)]);
        let e = expm(&a);
        assert!(((e[(0, 0)].re - 20f64.exp()) / 20f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn expm_nilpotent() {
        let a = CMat::from_row_slice(2, 2, &[ZERO, c(0.7), ZERO, ZERO]);
        let e = expm(&a);
        assert!(close(&e, &CMat::from_row_slice(2, 2, &[ONE, c(0.7), ZERO, ONE]), 1e-16));
    }

    #[test]
    fn logm_inverts_expm() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.2, 0.1),
                Complex64::new(0.4, -0.3),
                Complex64::new(-0.1, 0.5),
                Complex64::new(-0.2, -0.1),
            ],
        );
        let l = logm(&expm(&a)).unwrap();
        assert!(close(&l, &a, 1e-13));
    }

    #[test]
    fn logm_unipotent() {
        let g = CMat::from_row_slice(2, 2, &[ONE, c(3.0), ZERO, ONE]);
        let l = logm(&g).unwrap();
        assert!(close(&l, &CMat::from_row_slice(2, 2, &[ZERO, c(3.0), ZERO, ZERO]), 1e-13));
    }

    #[test]
    fn logm_rejects_negative_eigenvalue() {
        let g = diag(&[c(-1.0), c(-1.0)]);
        match logm(&g) {
            Err(Error::OutOfChart { eigenvalue }) => assert_eq!(eigenvalue.re, -1.0),
            other => panic!("expected out-of-chart, got {other:?}"),
        }
        assert!(matches!(
            logm(&CMat::from_element(1, 1, c(-1.0))),
            Err(Error::OutOfChart { .. })
        ));
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm(&identity(2)), 1.0);
        let g = diag(&[c(0.3f64.exp()), c((-0.3f64).exp())]);
        assert!((op_norm(&g) - 0.3f64.exp()).abs() < 1e-15);
        assert!((op_norm(&diag(&[ONE, c(-1.0)])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(c(1e16));
        s.add(c(1.0));
        s.add(c(-1e16));
        assert_eq!(s.value().re, 1.0);
        assert_eq!(kahan_sum([1e16, 1.0, -1e16]), 1.0);
    }
}
