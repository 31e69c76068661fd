//! Recovers the tower data from the generator pair `(a, b)` alone, given only
//! the block shapes: leading projections by repeated squaring of scaled
//! corner compressions of `a`, ladders of matrix units from `b`, the
//! conjugation sums that undo the corner compressions, and the witnesses
//! `y_j^{(n)}` from `z_n`.
//!
//! Also hosts a finite-dimensional subalgebra closure used to measure
//! distances to `C*(a, b)`.

use serde::Serialize;

use crate::algebra::{AlgebraShape, MatrixUnitSystem};
use crate::error::{Error, Result};
use crate::generator::{GeneratorPlan, IndexAtom, RowAssignment};
use crate::matrix::{op_norm, DenseOperator, HermitianOperator, C64};
use crate::stabilizer::{stabilize_units, StabilizeParams};
use crate::tower::TowerModel;

pub const MAX_SQUARINGS: usize = 64;
pub const SQUARING_TOL: f64 = 1e-10;
/// Eigenvalues this close to 1 form the leading cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Every other eigenvalue must satisfy `|λ| ≤ 1 − GAP`.
pub const GAP: f64 = 0.25;
pub const LADDER_TOL: f64 = 1e-8;

/// One audited step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub name: String,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RecoveryTrace {
    pub steps: Vec<TraceStep>,
}

impl RecoveryTrace {
    fn push(&mut self, name: impl Into<String>, iterations: usize, residual: f64) {
        self.steps.push(TraceStep { name: name.into(), iterations, residual });
    }

    pub fn max_iterations(&self, prefix: &str) -> usize {
        self.steps.iter().filter(|s| s.name.starts_with(prefix)).map(|s| s.iterations).max().unwrap_or(0)
    }

    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.steps.iter().filter(|s| s.name.starts_with(prefix)).map(|s| s.residual).fold(0.0, f64::max)
    }
}

/// Limit of `(scale·a)^{2^t}`. Requires the spectrum of `scale·a` to split
/// into a nonempty cluster at 1 and a remainder inside `[−0.75, 0.75]`.
/// The step's residual is the last Frobenius change between iterates.
pub fn extract_leading_projection(a: &HermitianOperator, scale: f64) -> Result<(DenseOperator, TraceStep)> {
    let scaled = a.scale(scale);
    let values = scaled.eigenvalues();
    let cluster = values.iter().filter(|v| (*v - 1.0).abs() <= CLUSTER_TOL).count();
    if cluster == 0 {
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoSpectralGap(format!("no eigenvalue at 1 (largest is {top})")));
    }
    if let Some(bad) = values.iter().find(|v| (*v - 1.0).abs() > CLUSTER_TOL && v.abs() > 1.0 - GAP) {
        return Err(Error::NoSpectralGap(format!("eigenvalue {bad} outside [-{0}, {0}]", 1.0 - GAP)));
    }
    let mut y = scaled.into_operator();
    let mut change = f64::INFINITY;
    for t in 1..=MAX_SQUARINGS {
        let next = y.matmul(&y);
        change = (&next - &y).frobenius_norm();
        y = next;
        if change <= SQUARING_TOL {
            let e = y.hermitian_part().into_operator();
            return Ok((e, TraceStep { name: "leading-projection".into(), iterations: t, residual: change }));
        }
    }
    Err(Error::NonConvergence { squarings: MAX_SQUARINGS, last_change: change })
}

/// Matrix units of one level, compressed by `P = p_1⋯p_{n−1}`, from the
/// recovered `P e_11^{(n,s)}` of every block and the compression `P b P`.
///
/// With `E_ii = P e_ii`, `2^{2n} E_ii·PbP = P e_{i,i+1} + P e_{i,i−1}` for every
/// row below the corner, which gives the superdiagonal one row at a time; the
/// next diagonal unit is `e_{i,i+1}* e_{i,i+1}`. Remaining units are products
/// through the first row.
pub fn ladder_units(
    e11: &[DenseOperator],
    compressed_b: &DenseOperator,
    shape: &AlgebraShape,
    m: usize,
) -> Result<MatrixUnitSystem> {
    if e11.len() != shape.num_blocks() {
        return Err(Error::DimensionMismatch { expected: shape.num_blocks(), actual: e11.len() });
    }
    let d = compressed_b.dim();
    let scale = 4f64.powi(m as i32 + 1);
    let mut blocks = Vec::with_capacity(shape.num_blocks());
    for (s, e) in e11.iter().enumerate() {
        let k = shape.block(s);
        // first_row[j] = P e_{1,j}.
        let mut diag = e.clone();
        let mut prev_super: Option<DenseOperator> = None;
        let mut first_row = vec![e.clone()];
        for i in 0..k - 1 {
            let mut sup = diag.matmul(compressed_b).scale(scale);
            if let Some(prev) = &prev_super {
                sup -= &prev.adjoint();
            }
            let norm = op_norm(&sup);
            if norm < LADDER_TOL {
                return Err(Error::LadderBreakdown { level: m + 1, row: i + 1, norm });
            }
            diag = sup.adjoint().matmul(&sup);
            let next = first_row[i].matmul(&sup);
            first_row.push(next);
            prev_super = Some(sup);
        }
        let first_col: Vec<DenseOperator> = first_row.iter().map(DenseOperator::adjoint).collect();
        let mut units = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                units.push(match (i, j) {
                    (0, _) => first_row[j].clone(),
                    (_, 0) => first_col[i].clone(),
                    _ => first_col[i].matmul(&first_row[j]),
                });
            }
        }
        blocks.push(units);
    }
    MatrixUnitSystem::new(shape.clone(), d, blocks, false)
}

/// `Φ_l(X) = Σ_{s,i} e_{i,k_s}^{(l,s)} X e_{k_s,i}^{(l,s)}`: moves an element
/// living under the level-`l` corner back across the whole level.
fn spread_from_corner(block: &MatrixUnitSystem, x: &DenseOperator) -> DenseOperator {
    let shape = block.shape();
    let mut acc = DenseOperator::zeros(x.dim());
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        for i in 0..k {
            acc += &block.unit(s, i, k - 1).matmul(x).matmul(block.unit(s, k - 1, i));
        }
    }
    acc
}

/// Everything recovered at one level.
#[derive(Clone, Debug)]
pub struct RecoveredLevel {
    pub level: usize,
    pub units: MatrixUnitSystem,
    pub p: DenseOperator,
    pub z: HermitianOperator,
}

pub enum NextLevel {
    Recovered(Box<RecoveredLevel>),
    NotApplicable { requested: usize, depth: usize },
}

/// Recovers level `m` from `a`, `b`, the block shapes, and the already
/// recovered lower levels.
pub fn recover_next_level(
    a: &HermitianOperator,
    b: &HermitianOperator,
    shapes: &[AlgebraShape],
    lower: &[RecoveredLevel],
    trace: &mut RecoveryTrace,
) -> Result<NextLevel> {
    let m = lower.len();
    if m >= shapes.len() {
        return Ok(NextLevel::NotApplicable { requested: m + 1, depth: shapes.len() });
    }
    let d = a.dim();
    let identity = DenseOperator::identity(d);
    let mut prefix = identity.clone();
    for level in lower {
        prefix = prefix.matmul(&level.p);
    }
    let compressed_a = prefix.matmul(a).matmul(&prefix);
    let compressed_b = prefix.matmul(b).matmul(&prefix);
    let r_before: usize = shapes[..m].iter().map(AlgebraShape::num_blocks).sum();
    let shape = &shapes[m];

    let mut e11 = Vec::with_capacity(shape.num_blocks());
    let mut remaining = prefix.clone();
    for s in 0..shape.num_blocks() {
        let block_a = remaining.matmul(&compressed_a).matmul(&remaining).hermitian_part();
        let scale = 2f64.powi((r_before + s + 1) as i32);
        let (e, mut step) = extract_leading_projection(&block_a, scale)?;
        step.name = format!("leading-projection/n{}/s{}", m + 1, s + 1);
        trace.steps.push(step);
        remaining -= &e;
        e11.push(e);
    }

    let raw = ladder_units(&e11, &compressed_b, shape, m)?;
    let raw_defect = crate::algebra::ladder_mult_defect(&raw);
    trace.push(format!("ladder/n{}", m + 1), shape.num_blocks(), raw_defect);
    let (compressed, moved) = stabilize_units(&raw, &StabilizeParams::default())?;
    trace.push(format!("polish/n{}", m + 1), 1, moved);

    let units = if m == 0 {
        let mut u = compressed;
        u.set_unital(true);
        u
    } else {
        let mut u = compressed.map(|x| {
            let mut y = x.clone();
            for level in lower.iter().rev() {
                y = spread_from_corner(&level.units, &y);
            }
            y
        });
        u.set_unital(true);
        u
    };
    let unit_defect = op_norm(&(&units.diagonal_sum() - &identity));
    trace.push(format!("decompress/n{}", m + 1), m, unit_defect);

    let mut p = DenseOperator::zeros(d);
    let mut leading = DenseOperator::zeros(d);
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        p += units.unit(s, k - 1, k - 1);
        leading += &units.unit(s, 0, 0).scale(0.5f64.powi((r_before + s + 1) as i32));
    }
    let z = (&(&identity - &p).matmul(&prefix).matmul(a) - &prefix.matmul(&leading)).hermitian_part();
    Ok(NextLevel::Recovered(Box::new(RecoveredLevel { level: m + 1, units, p, z })))
}

/// Runs `recover_next_level` through every level.
pub fn recover_all(
    a: &HermitianOperator,
    b: &HermitianOperator,
    shapes: &[AlgebraShape],
) -> Result<(Vec<RecoveredLevel>, RecoveryTrace)> {
    let mut levels = Vec::with_capacity(shapes.len());
    let mut trace = RecoveryTrace::default();
    while let NextLevel::Recovered(level) = recover_next_level(a, b, shapes, &levels, &mut trace)? {
        levels.push(*level);
    }
    Ok((levels, trace))
}

/// Rebuilds `y_j^{(n)}` from `z_n` and the units of levels `0..=m`.
///
/// At the first level `y = (1/c_1) Σ_{s,i} e_{i,2} z_1 e_{2,i}`. Later levels
/// first recover `α(y) = Σ_{s,i} e_{i,f} (z_n/c_n) e_{f+1,i}` for every atom
/// and then sum `e_{i,k}-chains · α(y) · e_{k,j}-chains` over all atoms.
/// Returns the witness and whether `z_n` was zero (degenerate).
pub fn reconstruct_witness(
    z: &HermitianOperator,
    c: f64,
    units: &[MatrixUnitSystem],
    assignment: Option<&RowAssignment>,
    j: usize,
) -> Result<(HermitianOperator, bool)> {
    let m = units.len().checked_sub(1).ok_or_else(|| Error::InvalidInput("no unit systems".into()))?;
    let d = z.dim();
    if let Some(bad) = units.iter().find(|u| u.ambient_dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: bad.ambient_dim() });
    }
    if z.is_zero() {
        return Ok((HermitianOperator::zeros(d), true));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("normalization must be positive, got {c}")));
    }
    let top = &units[m];
    let shape = top.shape();
    let unscaled = z.scale(1.0 / c);
    if m == 0 {
        let mut y = DenseOperator::zeros(d);
        for s in 0..shape.num_blocks() {
            for i in 0..shape.block(s) {
                y += &top.unit(s, i, 1).matmul(&unscaled).matmul(top.unit(s, 1, i));
            }
        }
        return Ok((y.hermitian_part(), false));
    }
    let assignment = assignment.ok_or_else(|| Error::InvalidInput("row assignment required above the first level".into()))?;
    if j >= assignment.starts.len() {
        return Err(Error::InvalidInput(format!("generator {} not encoded at level {}", j + 1, m + 1)));
    }
    let lower = &units[..m];
    let ranks: Vec<usize> = lower.iter().map(|u| crate::algebra::rank(u.shape())).collect();
    let mut y = DenseOperator::zeros(d);
    for q in 0..assignment.card {
        let f = assignment.row(j, q);
        let mut alpha = DenseOperator::zeros(d);
        for s in 0..shape.num_blocks() {
            for i in 0..shape.block(s) {
                alpha += &top.unit(s, i, f).matmul(&unscaled).matmul(top.unit(s, f + 1, i));
            }
        }
        let atom = atom_from_rank(lower, &ranks, q);
        let mut term = alpha;
        for (l, block) in lower.iter().enumerate().rev() {
            let (s, i) = atom.rows[l];
            let (t, jj) = atom.cols[l];
            let ks = block.shape().block(s);
            let kt = block.shape().block(t);
            term = block.unit(s, i, ks - 1).matmul(&term).matmul(block.unit(t, kt - 1, jj));
        }
        y += &term;
    }
    Ok((y.hermitian_part(), false))
}

fn atom_from_rank(lower: &[MatrixUnitSystem], ranks: &[usize], mut code: usize) -> IndexAtom {
    let m = lower.len();
    let mut digits = vec![0usize; 2 * m];
    for pos in (0..2 * m).rev() {
        digits[pos] = code % ranks[pos / 2];
        code /= ranks[pos / 2];
    }
    let locate = |l: usize, mut q: usize| {
        for (s, &k) in lower[l].shape().blocks().iter().enumerate() {
            if q < k {
                return (s, q);
            }
            q -= k;
        }
        unreachable!("digit below rank")
    };
    IndexAtom {
        rows: (0..m).map(|l| locate(l, digits[2 * l])).collect(),
        cols: (0..m).map(|l| locate(l, digits[2 * l + 1])).collect(),
    }
}

/// Round-trip measurements against the construction that produced `(a, b)`.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub unit_residual: Vec<f64>,
    pub z_residual: Vec<f64>,
    pub witness_residual: Vec<f64>,
    pub leading_residual: f64,
    pub max_squarings: usize,
    pub trace: RecoveryTrace,
}

impl RoundTripReport {
    pub fn max_unit_residual(&self) -> f64 {
        self.unit_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_z_residual(&self) -> f64 {
        self.z_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_witness_residual(&self) -> f64 {
        self.witness_residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Recovers every level from the plan's `(a, b)` and compares each recovered
/// unit, `z_n` and witness with the stored one.
pub fn round_trip(model: &TowerModel, plan: &GeneratorPlan) -> Result<RoundTripReport> {
    let shapes: Vec<AlgebraShape> = (0..model.depth()).map(|m| model.shape(m).clone()).collect();
    let (levels, trace) = recover_all(plan.a(), plan.b(), &shapes)?;
    let mut unit_residual = Vec::new();
    let mut z_residual = Vec::new();
    let mut witness_residual = Vec::new();
    let mut leading_residual: f64 = 0.0;
    let units: Vec<MatrixUnitSystem> = levels.iter().map(|l| l.units.clone()).collect();
    for (m, level) in levels.iter().enumerate() {
        let stored = model.block(m);
        unit_residual.push(level.units.distance(stored)?);
        for s in 0..stored.shape().num_blocks() {
            leading_residual = leading_residual.max(op_norm(&(level.units.unit(s, 0, 0) - stored.unit(s, 0, 0))));
        }
        let reference = &plan.levels[m];
        z_residual.push(op_norm(&(level.z.as_operator() - reference.z.as_operator())));
        for (j, y) in reference.witness.approximants.iter().enumerate() {
            let (rebuilt, _) = reconstruct_witness(&level.z, reference.c, &units[..=m], reference.assignment.as_ref(), j)?;
            witness_residual.push(op_norm(&(rebuilt.as_operator() - y.as_operator())));
        }
    }
    let max_squarings = trace.max_iterations("leading-projection");
    Ok(RoundTripReport { unit_residual, z_residual, witness_residual, leading_residual, max_squarings, trace })
}

/// Frobenius-orthonormal Hermitian basis of a `*`-closed subspace of `M_D`.
///
/// A `*`-closed subspace is the complexification of its Hermitian part, so
/// the basis is kept in real coordinates: `X_ii`, then `√2·Re X_ij` and
/// `√2·Im X_ij` for `i < j`. The map is an isometry for the Frobenius inner
/// product, and the basis is orthonormal over `ℂ` as well.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanBasis {
    dim: usize,
    // Column-major, one length-D² column per element.
    data: Vec<f64>,
    word_cap: usize,
    tol: f64,
    max_word_length: usize,
    closed: bool,
}

fn hermitian_coords(x: &DenseOperator) -> Vec<f64> {
    let d = x.dim();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(x.get(i, i).re);
    }
    for j in 0..d {
        for i in 0..j {
            let z = x.get(i, j);
            v.push(std::f64::consts::SQRT_2 * z.re);
            v.push(std::f64::consts::SQRT_2 * z.im);
        }
    }
    v
}

fn from_hermitian_coords(d: usize, v: &[f64]) -> DenseOperator {
    let mut x = DenseOperator::zeros(d);
    for i in 0..d {
        x.set(i, i, C64::new(v[i], 0.0));
    }
    let mut pos = d;
    for j in 0..d {
        for i in 0..j {
            let z = C64::new(v[pos], v[pos + 1]) * std::f64::consts::FRAC_1_SQRT_2;
            x.set(i, j, z);
            x.set(j, i, z.conj());
            pos += 2;
        }
    }
    x
}

/// `(x + x*)/2` and `(x − x*)/2i`.
fn hermitian_split(x: &DenseOperator) -> (DenseOperator, DenseOperator) {
    let adj = x.adjoint();
    let re = (x + &adj).scale(0.5);
    let im = (x - &adj).scale_complex(C64::new(0.0, -0.5));
    (re, im)
}

/// `C ← α·A·B + β·C` on strided real buffers.
#[allow(clippy::too_many_arguments)]
fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass buffers covering every index reachable through the
    // given shapes and strides; `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
    }
}

impl SpanBasis {
    fn empty(dim: usize, word_cap: usize, tol: f64) -> Self {
        Self { dim, data: Vec::new(), word_cap, tol, max_word_length: 0, closed: false }
    }

    pub fn matrix_dim(&self) -> usize {
        self.dim
    }

    /// Complex dimension of the span.
    pub fn len(&self) -> usize {
        self.data.len() / (self.dim * self.dim).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn word_cap(&self) -> usize {
        self.word_cap
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Longest word whose products were folded into the span.
    pub fn max_word_length(&self) -> usize {
        self.max_word_length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.dim * self.dim
    }

    /// The `idx`-th basis element (Hermitian).
    pub fn element(&self, idx: usize) -> DenseOperator {
        let l = self.dim * self.dim;
        from_hermitian_coords(self.dim, &self.data[idx * l..(idx + 1) * l])
    }

    /// Largest `|⟨q_i, q_j⟩ − δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let l = self.dim * self.dim;
        let mut gram = vec![0.0; n * n];
        dgemm(n, l, n, 1.0, &self.data, l as isize, 1, &self.data, 1, l as isize, 0.0, &mut gram, 1, n as isize);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[i + j * n] - target).abs());
            }
        }
        worst
    }

    /// Projects each of the `cols` columns of `block` off the span in place.
    fn project_out(&self, block: &mut [f64], cols: usize) {
        let n = self.len();
        if n == 0 || cols == 0 {
            return;
        }
        let l = self.dim * self.dim;
        let mut coeff = vec![0.0; n * cols];
        dgemm(n, l, cols, 1.0, &self.data, l as isize, 1, block, 1, l as isize, 0.0, &mut coeff, 1, n as isize);
        dgemm(l, n, cols, -1.0, &self.data, 1, l as isize, &coeff, 1, n as isize, 1.0, block, 1, l as isize);
    }

    /// Orthogonalizes a chunk of candidates against the span and each other,
    /// appending the survivors (residual above `tol`, or above `tol·‖c‖`
    /// when `relative`). Returns the indices of appended elements.
    fn absorb(&mut self, mut block: Vec<f64>, relative: bool) -> Vec<usize> {
        let l = self.dim * self.dim;
        let cols = block.len() / l;
        let norms: Vec<f64> = block.chunks(l).map(col_norm).collect();
        self.project_out(&mut block, cols);
        // Projection only shrinks residuals, so anything already below the
        // threshold is rejected after one pass.
        let kept: Vec<usize> = (0..cols)
            .filter(|&c| col_norm(&block[c * l..(c + 1) * l]) > self.threshold(norms[c], relative))
            .collect();
        if kept.is_empty() {
            return Vec::new();
        }
        // Survivors are not projected a second time here; only the vectors
        // that end up appended are, in the loop below.
        let mut fresh: Vec<f64> = Vec::with_capacity(kept.len() * l);
        for &c in &kept {
            let mut v = block[c * l..(c + 1) * l].to_vec();
            orthogonalize_against(&mut v, &fresh, l);
            let r = col_norm(&v);
            if r > self.threshold(norms[c], relative) && self.len() + fresh.len() / l < l {
                fresh.extend(v.into_iter().map(|z| z / r));
            }
        }
        // Normalizing a small residual amplifies whatever rounding noise still
        // lies in the old span. Re-project the unit vectors until they keep
        // most of their norm; one that collapses was noise and is dropped.
        for _ in 0..4 {
            let n = fresh.len() / l;
            if n == 0 {
                break;
            }
            self.project_out(&mut fresh, n);
            let mut clean: Vec<f64> = Vec::with_capacity(fresh.len());
            let mut settled = true;
            for x in 0..n {
                let mut v = fresh[x * l..(x + 1) * l].to_vec();
                orthogonalize_against(&mut v, &clean, l);
                let r = col_norm(&v);
                if r < 1e-3 {
                    continue;
                }
                settled &= r > 0.7;
                clean.extend(v.into_iter().map(|z| z / r));
            }
            fresh = clean;
            if settled {
                break;
            }
        }
        let start = self.len();
        self.data.extend(fresh);
        (start..self.len()).collect()
    }

    fn threshold(&self, norm: f64, relative: bool) -> f64 {
        if relative {
            self.tol * norm.max(f64::MIN_POSITIVE)
        } else {
            self.tol
        }
    }

    fn residual_hermitian(&self, h: &DenseOperator) -> DenseOperator {
        let mut v = hermitian_coords(h);
        self.project_out(&mut v, 1);
        from_hermitian_coords(self.dim, &v)
    }

    /// `x − Π(x)` for the Frobenius-orthogonal projection `Π` onto the span.
    pub fn residual(&self, x: &DenseOperator) -> DenseOperator {
        if self.is_full() {
            return DenseOperator::zeros(self.dim);
        }
        let (re, im) = hermitian_split(x);
        let r_re = self.residual_hermitian(&re);
        let r_im = self.residual_hermitian(&im);
        &r_re + &r_im.scale_complex(C64::new(0.0, 1.0))
    }

    /// Largest Frobenius residual of `other`'s elements against this span.
    pub fn containment_residual(&self, other: &SpanBasis) -> f64 {
        if self.is_full() {
            return 0.0;
        }
        (0..other.len()).map(|i| self.residual(&other.element(i)).frobenius_norm()).fold(0.0, f64::max)
    }
}

/// Two rounds of modified Gram-Schmidt against the orthonormal columns of `q`.
fn orthogonalize_against(v: &mut [f64], q: &[f64], l: usize) {
    for _ in 0..2 {
        for col in q.chunks(l) {
            let dot: f64 = col.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
            for (vi, qi) in v.iter_mut().zip(col) {
                *vi -= dot * qi;
            }
        }
    }
}

fn col_norm(v: &[f64]) -> f64 {
    v.iter().map(|z| z * z).sum::<f64>().sqrt()
}

pub const DEFAULT_WORD_CAP: usize = 8;
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-9;
const CHUNK: usize = 256;

/// Span of all words in the generators and their adjoints, up to word length
/// `2^word_cap` (the reach of `word_cap` rounds of pairwise products).
///
/// Works on Hermitian parts: every generator is split into `(g + g*)/2` and
/// `(g − g*)/2i`, and each round replaces a newly added element `v` by
/// `(gv + vg)/2` and `(gv − vg)/2i` for every letter `g`. These are the
/// Hermitian parts of `gv`, so the complex span grows exactly like the span
/// of left products. A round that adds nothing means the span is closed;
/// reaching `D²` also ends the search.
pub fn subalgebra_closure(generators: &[DenseOperator], word_cap: usize, tol: f64) -> Result<SpanBasis> {
    let first = generators
        .first()
        .ok_or_else(|| Error::InvalidInput("closure needs at least one generator".into()))?;
    if word_cap == 0 {
        return Err(Error::InvalidInput("word cap must be at least 1".into()));
    }
    let d = first.dim();
    if let Some(bad) = generators.iter().find(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: bad.dim() });
    }
    let l = d * d;

    let mut letters: Vec<DenseOperator> = Vec::new();
    for g in generators {
        let n = op_norm(g);
        if n == 0.0 {
            continue;
        }
        let (re, im) = hermitian_split(&g.scale(1.0 / n));
        for part in [re, im] {
            if part.max_abs_entry() > 1e-14 {
                letters.push(part);
            }
        }
    }

    let mut basis = SpanBasis::empty(d, word_cap, tol);
    let mut seed: Vec<f64> = hermitian_coords(&DenseOperator::identity(d));
    for g in &letters {
        seed.extend(hermitian_coords(g));
    }
    let mut frontier = Vec::new();
    for chunk in seed.chunks(CHUNK * l) {
        frontier.extend(basis.absorb(chunk.to_vec(), true));
    }
    basis.max_word_length = 1;

    let max_length = 1usize.checked_shl(word_cap as u32).unwrap_or(usize::MAX);
    while !frontier.is_empty() && !basis.is_full() {
        if basis.max_word_length >= max_length {
            return Err(Error::CapExceeded { word_cap, partial: Box::new(basis) });
        }
        let mut next = Vec::new();
        let mut pending: Vec<f64> = Vec::with_capacity(CHUNK * l);
        'outer: for g in &letters {
            for &idx in &frontier {
                let (jordan, lie) = hermitian_split(&g.matmul(&basis.element(idx)));
                pending.extend(hermitian_coords(&jordan));
                pending.extend(hermitian_coords(&lie));
                if pending.len() >= CHUNK * l {
                    next.extend(basis.absorb(std::mem::take(&mut pending), false));
                    if basis.is_full() {
                        break 'outer;
                    }
                }
            }
        }
        if !pending.is_empty() && !basis.is_full() {
            next.extend(basis.absorb(pending, false));
        }
        basis.max_word_length += 1;
        frontier = next;
    }
    basis.closed = true;
    Ok(basis)
}

/// `(‖x − Π(x)‖_F, ‖x − Π(x)‖)`; the second is an upper bound on the
/// operator-norm distance from `x` to the span.
pub fn distance_to_span(x: &DenseOperator, basis: &SpanBasis) -> Result<(f64, f64)> {
    if x.dim() != basis.matrix_dim() {
        return Err(Error::DimensionMismatch { expected: basis.matrix_dim(), actual: x.dim() });
    }
    let r = basis.residual(x);
    Ok((r.frobenius_norm(), op_norm(&r)))
}
