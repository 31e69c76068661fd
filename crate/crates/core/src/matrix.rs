//! Dense complex square matrices and the handful of decompositions the rest of
//! the crate is built on.
//!
//! Storage is a column-major `nalgebra::DMatrix<Complex64>`. Products go
//! through `matrixmultiply::zgemm`; eigen- and singular-value decompositions
//! go through nalgebra. Everything is double precision.

use std::fmt;
use std::ops::{Add, AddAssign, Deref, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest ambient dimension constructors accept unless told otherwise.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues closer than this to a projection threshold are rejected.
pub const SPECTRAL_GAP_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A `dim × dim` complex matrix.
#[derive(Clone, PartialEq)]
pub struct DenseOperator {
    m: DMatrix<C64>,
}

impl fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseOperator(dim={}) {:?}", self.dim(), self.m)
    }
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { m: DMatrix::from_fn(dim, dim, |i, j| f(i, j)) }
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    /// Elementary matrix `E_{ij}` in dimension `dim`.
    pub fn elementary(dim: usize, i: usize, j: usize) -> Self {
        let mut out = Self::zeros(dim);
        out.m[(i, j)] = ONE;
        out
    }

    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: entries.len() });
        }
        Ok(Self { m: DMatrix::from_row_slice(dim, dim, &entries) })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            entries.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.m[(i, j)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[C64] {
        self.m.as_slice()
    }

    pub fn row_major_entries(&self) -> Vec<C64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * C64::new(s, 0.0) }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Frobenius inner product `tr(self* other)`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest entrywise `|A - A*|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> HermitianOperator {
        let sym = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        HermitianOperator(Self { m: sym })
    }

    /// Matrix product, computed with `zgemm`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim(), rhs.dim(), "matmul dimension mismatch");
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(d, d);
        gemm(d, d, d, ONE, self.as_slice(), 1, d as isize, rhs.as_slice(), 1, d as isize, ZERO, out.as_mut_slice(), 1, d as isize);
        Self { m: out }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|z| *z == ZERO)
    }
}

/// `C ← α·A·B + β·C` on raw column-major-or-strided buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: C64,
    a: &[C64],
    rsa: isize,
    csa: isize,
    b: &[C64],
    rsb: isize,
    csb: isize,
    beta: C64,
    c: &mut [C64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(!a.is_empty() || k == 0);
    // SAFETY: `Complex<f64>` is `repr(C)` with layout `[f64; 2]`, matching
    // matrixmultiply's `c64`. Callers pass buffers whose extents cover every
    // index reachable through the given shape and strides.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc,
            csc,
        );
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        DenseOperator { m: &self.m + &rhs.m }
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        DenseOperator { m: &self.m - &rhs.m }
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        self.matmul(rhs)
    }
}

impl Neg for &DenseOperator {
    type Output = DenseOperator;
    fn neg(self) -> DenseOperator {
        DenseOperator { m: -&self.m }
    }
}

impl AddAssign<&DenseOperator> for DenseOperator {
    fn add_assign(&mut self, rhs: &DenseOperator) {
        self.m += &rhs.m;
    }
}

impl SubAssign<&DenseOperator> for DenseOperator {
    fn sub_assign(&mut self, rhs: &DenseOperator) {
        self.m -= &rhs.m;
    }
}

#[derive(Serialize, Deserialize)]
struct WireMatrix {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for DenseOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        WireMatrix {
            dim: self.dim(),
            entries: self.row_major_entries().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = WireMatrix::deserialize(deserializer)?;
        let entries = wire.entries.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        DenseOperator::from_row_major(wire.dim, entries).map_err(D::Error::custom)
    }
}

/// A matrix whose entries satisfy `|A − A*| ≤ 1e-12` at construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HermitianOperator(DenseOperator);

impl HermitianOperator {
    pub fn new(op: DenseOperator) -> Result<Self> {
        let defect = op.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self(op))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(DenseOperator::diag(values))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DenseOperator::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DenseOperator::zeros(dim))
    }

    pub fn as_operator(&self) -> &DenseOperator {
        &self.0
    }

    pub fn into_operator(self) -> DenseOperator {
        self.0
    }

    /// Eigenvalues in ascending order with the matching orthonormal eigenvectors
    /// as columns.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = SymmetricEigen::new(self.0.m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.0.dim(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.0.m.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

impl Deref for HermitianOperator {
    type Target = DenseOperator;
    fn deref(&self) -> &DenseOperator {
        &self.0
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let op = DenseOperator::deserialize(deserializer)?;
        HermitianOperator::new(op).map_err(D::Error::custom)
    }
}

/// A nonempty ordered list of operators of one common dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorTuple {
    elems: Vec<DenseOperator>,
}

impl OperatorTuple {
    pub fn new(elems: Vec<DenseOperator>) -> Result<Self> {
        let first = elems
            .first()
            .ok_or_else(|| Error::InvalidInput("operator tuple must be nonempty".into()))?;
        let dim = first.dim();
        if let Some(bad) = elems.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
        }
        Ok(Self { elems })
    }

    pub fn single(op: DenseOperator) -> Self {
        Self { elems: vec![op] }
    }

    pub fn dim(&self) -> usize {
        self.elems[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn elems(&self) -> &[DenseOperator] {
        &self.elems
    }

    /// Tuple-norm distance `max_j ‖A_j − B_j‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "tuple arity mismatch");
        self.elems
            .iter()
            .zip(&other.elems)
            .map(|(a, b)| op_norm(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// Operator norm (largest singular value), from the Hermitian eigensolve of `A*A`.
pub fn op_norm(a: &DenseOperator) -> f64 {
    if a.dim() == 1 {
        return a.get(0, 0).norm();
    }
    let scale = a.max_abs_entry();
    if scale == 0.0 {
        return 0.0;
    }
    // Rescale first and flush entries far below the largest: the Gram matrix
    // squares the entries, and subnormals break the eigensolver.
    let a = DenseOperator::from_fn(a.dim(), |i, j| {
        let z = a.get(i, j) / scale;
        if z.norm() < 1e-40 {
            C64::new(0.0, 0.0)
        } else {
            z
        }
    });
    let gram = a.adjoint().matmul(&a);
    let top = gram
        .m
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v));
    if top.is_finite() {
        scale * top.max(0.0).sqrt()
    } else {
        scale * a.m.singular_values().max()
    }
}

/// Maximum operator norm over a family, skipping the eigensolve whenever the
/// Frobenius norm (an upper bound) cannot beat the running maximum.
pub fn max_op_norm<I>(ops: I) -> f64
where
    I: IntoIterator<Item = DenseOperator>,
{
    let mut worst: f64 = 0.0;
    for op in ops {
        if op.frobenius_norm() <= worst {
            continue;
        }
        worst = worst.max(op_norm(&op));
    }
    worst
}

/// `max{‖A_1‖, …, ‖A_n‖}`.
pub fn tuple_norm(t: &OperatorTuple) -> f64 {
    t.elems.iter().map(op_norm).fold(0.0, f64::max)
}

/// Orthogonal projection onto the span of eigenvectors of `h` with eigenvalue
/// strictly above `threshold`.
pub fn spectral_projection(h: &HermitianOperator, threshold: f64) -> Result<DenseOperator> {
    let (values, vectors) = h.eigh();
    if let Some(&near) = values.iter().find(|v| (*v - threshold).abs() < SPECTRAL_GAP_TOL) {
        return Err(Error::EigenvalueNearThreshold {
            eigenvalue: near,
            threshold,
            tolerance: SPECTRAL_GAP_TOL,
        });
    }
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > threshold).collect();
    Ok(projector_from_columns(&vectors, &keep))
}

/// `Σ_{c ∈ cols} v_c v_c*`, symmetrized.
pub(crate) fn projector_from_columns(vectors: &DMatrix<C64>, cols: &[usize]) -> DenseOperator {
    let d = vectors.nrows();
    if cols.is_empty() {
        return DenseOperator::zeros(d);
    }
    let basis = DMatrix::from_fn(d, cols.len(), |r, c| vectors[(r, cols[c])]);
    let p = &basis * basis.adjoint();
    let p = (&p + p.adjoint()) * C64::new(0.5, 0.0);
    DenseOperator { m: p }
}

/// From `A = UΣV*`, returns `U·1[Σ > cutoff]·V*`.
pub fn polar_partial_isometry(a: &DenseOperator, cutoff: f64) -> Result<DenseOperator> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidInput(format!("isometry cutoff must be positive, got {cutoff}")));
    }
    let d = a.dim();
    if a.is_zero() {
        return Ok(DenseOperator::zeros(d));
    }
    let svd = SVD::new(a.m.clone(), true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    if keep.is_empty() {
        return Ok(DenseOperator::zeros(d));
    }
    let u_k = DMatrix::from_fn(d, keep.len(), |r, c| u[(r, keep[c])]);
    let v_k = DMatrix::from_fn(keep.len(), d, |r, c| v_t[(keep[r], c)]);
    Ok(DenseOperator { m: u_k * v_k })
}

/// Number of singular values above `cutoff`.
pub fn numerical_rank(a: &DenseOperator, cutoff: f64) -> usize {
    if a.is_zero() {
        return 0;
    }
    SVD::new(a.m.clone(), false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count()
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_with_cap(a: &DenseOperator, b: &DenseOperator, cap: usize) -> Result<DenseOperator> {
    let dim = a.dim().checked_mul(b.dim()).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    Ok(DenseOperator { m: a.m.kronecker(&b.m) })
}

/// Block-diagonal matrix with the default dimension cap.
pub fn direct_sum(blocks: &[DenseOperator]) -> Result<DenseOperator> {
    direct_sum_with_cap(blocks, DEFAULT_DIM_CAP)
}

pub fn direct_sum_with_cap(blocks: &[DenseOperator], cap: usize) -> Result<DenseOperator> {
    if blocks.is_empty() {
        return Err(Error::InvalidInput("direct sum of an empty list".into()));
    }
    let dim: usize = blocks.iter().map(DenseOperator::dim).sum();
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let mut offset = 0;
    for block in blocks {
        let k = block.dim();
        out.view_mut((offset, offset), (k, k)).copy_from(&block.m);
        offset += k;
    }
    Ok(DenseOperator { m: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_matrix(dim: usize) -> impl Strategy<Value = DenseOperator> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim).prop_map(move |v| {
            DenseOperator::from_row_major(dim, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    /// Independent σ_max: power iteration on A*A, run to saturation.
    fn power_norm(a: &DenseOperator) -> f64 {
        let d = a.dim();
        let g = a.adjoint().matmul(a);
        let mut v: Vec<C64> = (0..d).map(|i| c(1.0 + i as f64 * 0.37, 0.1 * i as f64)).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<C64> = (0..d).map(|r| (0..d).map(|k| g.get(r, k) * v[k]).sum()).collect();
            let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n == 0.0 {
                return 0.0;
            }
            lambda = n;
            v = w.into_iter().map(|z| z / n).collect();
        }
        lambda.sqrt()
    }

    #[test]
    fn op_norm_extreme_scales() {
        let tiny = DenseOperator::diag(&[1e-320, 0.0, 5e-321]);
        assert_eq!(op_norm(&tiny), 1e-320);
        let huge = DenseOperator::diag(&[0.0, -3e200]);
        assert!((op_norm(&huge) / 3e200 - 1.0).abs() < 1e-14);
        let mixed = DenseOperator::from_fn(8, |i, j| C64::new(if i == j { 1e-77 } else { 1e-313 }, 0.0));
        assert!((op_norm(&mixed) / 1e-77 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&DenseOperator::identity(3)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&DenseOperator::diag(&[1.0, -2.0])) - 2.0).abs() < 1e-14);
        let r1 = DenseOperator::from_real_rows(&[&[0.0, 3.0], &[0.0, 0.0]]).unwrap();
        assert!((op_norm(&r1) - 3.0).abs() < 1e-14);
        assert_eq!(op_norm(&DenseOperator::zeros(4)), 0.0);
    }

    #[test]
    fn tuple_norm_examples() {
        let t = OperatorTuple::new(vec![DenseOperator::identity(2), DenseOperator::zeros(2)]).unwrap();
        assert!((tuple_norm(&t) - 1.0).abs() < 1e-14);
        let t = OperatorTuple::new(vec![DenseOperator::diag(&[1.0, -2.0]), DenseOperator::diag(&[0.5, 0.0])]).unwrap();
        assert!((tuple_norm(&t) - 2.0).abs() < 1e-14);
        let a = DenseOperator::from_real_rows(&[&[1.0, 2.0], &[0.0, -1.0]]).unwrap();
        assert_eq!(tuple_norm(&OperatorTuple::single(a.clone())), op_norm(&a));
    }

    #[test]
    fn tuple_rejects_empty_and_ragged() {
        assert!(OperatorTuple::new(vec![]).is_err());
        assert!(matches!(
            OperatorTuple::new(vec![DenseOperator::zeros(2), DenseOperator::zeros(3)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectral_projection_examples() {
        let p = spectral_projection(&HermitianOperator::diag(&[1.0, 0.0]), 0.5).unwrap();
        assert!((&p - &DenseOperator::diag(&[1.0, 0.0])).max_abs_entry() < 1e-14);
        let p = spectral_projection(&HermitianOperator::diag(&[0.9, 0.1, 0.95]), 0.5).unwrap();
        assert!((&p - &DenseOperator::diag(&[1.0, 0.0, 1.0])).max_abs_entry() < 1e-14);
        let err = spectral_projection(&HermitianOperator::diag(&[0.5 + 1e-9, 0.0]), 0.5);
        assert!(matches!(err, Err(Error::EigenvalueNearThreshold { .. })));
    }

    #[test]
    fn polar_examples() {
        let a = DenseOperator::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]).unwrap();
        let v = polar_partial_isometry(&a, 0.5).unwrap();
        let expected = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!((&v - &expected).max_abs_entry() < 1e-14);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DenseOperator::from_row_major(2, vec![c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]).unwrap();
        let v = polar_partial_isometry(&u, 0.5).unwrap();
        assert!((&v - &u).max_abs_entry() < 1e-13);

        assert!(polar_partial_isometry(&DenseOperator::zeros(3), 0.5).unwrap().is_zero());
        assert!(polar_partial_isometry(&u, 0.0).is_err());
    }

    #[test]
    fn kron_examples() {
        let k = kron(&DenseOperator::identity(2), &DenseOperator::identity(3)).unwrap();
        assert_eq!(k, DenseOperator::identity(6));
        let k = kron(&DenseOperator::diag(&[1.0, 2.0]), &DenseOperator::identity(2)).unwrap();
        assert_eq!(k, DenseOperator::diag(&[1.0, 1.0, 2.0, 2.0]));
        let big = DenseOperator::identity(65);
        assert!(matches!(kron(&big, &big), Err(Error::DimensionOverflow { dim: 4225, cap: 4096 })));
        assert!(kron_with_cap(&big, &big, 5000).is_ok());
    }

    #[test]
    fn direct_sum_examples() {
        let s = direct_sum(&[DenseOperator::identity(2), DenseOperator::identity(3)]).unwrap();
        assert_eq!(s, DenseOperator::identity(5));
        let s = direct_sum(&[DenseOperator::diag(&[1.0]), DenseOperator::diag(&[-2.0])]).unwrap();
        assert_eq!(s, DenseOperator::diag(&[1.0, -2.0]));
        assert!((op_norm(&s) - 2.0).abs() < 1e-14);
        assert!(direct_sum(&[]).is_err());
        assert!(matches!(
            direct_sum_with_cap(&[DenseOperator::identity(3), DenseOperator::identity(3)], 5),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn serialization_layout() {
        let a = DenseOperator::from_row_major(2, vec![c(1.0, 0.0), c(2.0, -1.0), c(0.0, 0.5), c(3.0, 0.0)]).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"dim":2,"entries":[[1.0,0.0],[2.0,-1.0],[0.0,0.5],[3.0,0.0]]}"#);
        let back: DenseOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<DenseOperator>(r#"{"dim":2,"entries":[[1.0,0.0]]}"#).is_err());
    }

    #[test]
    fn hermitian_validation() {
        let bad = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(HermitianOperator::new(bad), Err(Error::NotHermitian { .. })));
        let json = r#"{"dim":2,"entries":[[0.0,0.0],[1.0,0.0],[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<HermitianOperator>(json).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn op_norm_matches_power_iteration(a in arb_matrix(4)) {
            let n = op_norm(&a);
            prop_assert!((n - power_norm(&a)).abs() <= 1e-8 * (1.0 + n));
        }

        #[test]
        fn c_star_identity_and_submultiplicativity(a in arb_matrix(3), b in arb_matrix(3)) {
            let na = op_norm(&a);
            prop_assert!((op_norm(&a.adjoint().matmul(&a)) - na * na).abs() <= 1e-10 * (1.0 + na * na));
            prop_assert!(op_norm(&a.matmul(&b)) <= na * op_norm(&b) + 1e-10);
            prop_assert_eq!(a.adjoint().adjoint(), a);
        }

        #[test]
        fn kron_is_multiplicative_in_norm(a in arb_matrix(2), b in arb_matrix(2)) {
            let k = kron(&a, &b).unwrap();
            prop_assert!((op_norm(&k) - op_norm(&a) * op_norm(&b)).abs() < 1e-10);
        }

        #[test]
        fn kron_mixed_product(a in arb_matrix(2), b in arb_matrix(3), c2 in arb_matrix(2), d in arb_matrix(3)) {
            let lhs = kron(&a, &b).unwrap().matmul(&kron(&c2, &d).unwrap());
            let rhs = kron(&a.matmul(&c2), &b.matmul(&d)).unwrap();
            prop_assert!((&lhs - &rhs).max_abs_entry() < 1e-12);
        }

        #[test]
        fn tensor_factors_commute(a in arb_matrix(2), b in arb_matrix(3)) {
            let left = kron(&a, &DenseOperator::identity(3)).unwrap();
            let right = kron(&DenseOperator::identity(2), &b).unwrap();
            prop_assert!(left.commutator(&right).max_abs_entry() <= 1e-13);
        }

        #[test]
        fn direct_sum_norm_is_block_max(a in arb_matrix(2), b in arb_matrix(3)) {
            let s = direct_sum(&[a.clone(), b.clone()]).unwrap();
            prop_assert!((op_norm(&s) - op_norm(&a).max(op_norm(&b))).abs() < 1e-12);
        }

        #[test]
        fn spectral_projection_is_orthogonal_projection(a in arb_matrix(4)) {
            let h = a.hermitian_part();
            if let Ok(p) = spectral_projection(&h, 0.1) {
                prop_assert!((&p.matmul(&p) - &p).max_abs_entry() < 1e-12);
                prop_assert!(p.hermitian_defect() < 1e-12);
            }
        }

        #[test]
        fn polar_of_well_conditioned_is_unitary(a in arb_matrix(3)) {
            let shifted = &a + &DenseOperator::identity(3).scale(4.0);
            let v = polar_partial_isometry(&shifted, 0.5).unwrap();
            prop_assert!((&v.adjoint().matmul(&v) - &DenseOperator::identity(3)).max_abs_entry() < 1e-12);
            prop_assert!((&v.matmul(&v.adjoint()).matmul(&v) - &v).max_abs_entry() < 1e-12);
        }
    }
}
