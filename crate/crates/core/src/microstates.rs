//! Finite-`k` microstate machinery: noncommutative polynomials, membership in
//! the norm-matching microstate set, Haar sampling, packing and covering
//! estimates in the tuple operator norm, and the dimension counting behind
//! the covering upper bound.
//!
//! Nothing here computes an asymptotic dimension. Sampling certifies covering
//! lower bounds (through packings) and only estimates upper ones.

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::{subrank, AlgebraShape, MatrixUnitSystem, UnitalEmbedding};
use crate::error::{Error, Result};
use crate::matrix::{kron, op_norm, DenseOperator, HermitianOperator, OperatorTuple, C64};

/// Complex coefficient with rational real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalComplex {
    pub re: Ratio<i64>,
    pub im: Ratio<i64>,
}

impl RationalComplex {
    pub fn real(num: i64, den: i64) -> Self {
        Self { re: Ratio::new(num, den), im: Ratio::from_integer(0) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(ratio_to_f64(self.re), ratio_to_f64(self.im))
    }

    /// Nearest rational pair (continued fractions), if both parts fit in `i64`.
    pub fn approximate(z: C64) -> Option<Self> {
        Some(Self { re: Ratio::approximate_float(z.re)?, im: Ratio::approximate_float(z.im)? })
    }
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Literal form `{coeff: [num, den, num_im, den_im], word: [indices]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermLiteral {
    coeff: [i64; 4],
    word: Vec<usize>,
}

/// One monomial; `word` holds 1-based indeterminate indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TermLiteral", into = "TermLiteral")]
pub struct Term {
    pub coeff: RationalComplex,
    pub word: Vec<usize>,
}

impl TryFrom<TermLiteral> for Term {
    type Error = String;

    fn try_from(t: TermLiteral) -> std::result::Result<Self, String> {
        let [num, den, num_im, den_im] = t.coeff;
        if den == 0 || den_im == 0 {
            return Err("coefficient denominators must be nonzero".into());
        }
        if t.word.contains(&0) {
            return Err("word indices are 1-based".into());
        }
        Ok(Self { coeff: RationalComplex { re: Ratio::new(num, den), im: Ratio::new(num_im, den_im) }, word: t.word })
    }
}

impl From<Term> for TermLiteral {
    fn from(t: Term) -> Self {
        Self {
            coeff: [*t.coeff.re.numer(), *t.coeff.re.denom(), *t.coeff.im.numer(), *t.coeff.im.denom()],
            word: t.word,
        }
    }
}

/// `Σ c_w X_w` over words in self-adjoint indeterminates `X_1, …, X_n`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NcPolynomial {
    pub terms: Vec<Term>,
}

impl NcPolynomial {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    /// The single indeterminate `X_i` (1-based).
    pub fn var(i: usize) -> Self {
        Self::new(vec![Term { coeff: RationalComplex::real(1, 1), word: vec![i] }])
    }

    pub fn one() -> Self {
        Self::new(vec![Term { coeff: RationalComplex::real(1, 1), word: vec![] }])
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.word.len()).max().unwrap_or(0)
    }
}

/// Evaluates `p` at a tuple; the empty word contributes `c·I`.
pub fn eval_poly(p: &NcPolynomial, tuple: &OperatorTuple) -> Result<DenseOperator> {
    let d = tuple.dim();
    let arity = tuple.len();
    let mut acc = DenseOperator::zeros(d);
    for term in &p.terms {
        let mut word = DenseOperator::identity(d);
        for &index in &term.word {
            if index == 0 || index > arity {
                return Err(Error::IndexOutOfRange { index, arity });
            }
            word = word.matmul(&tuple.elems()[index - 1]);
        }
        acc += &word.scale_complex(term.coeff.to_c64());
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostateSpec {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub polynomials: Vec<NcPolynomial>,
    pub target_norms: Vec<f64>,
}

impl MicrostateSpec {
    /// Targets `‖p_j(x)‖` taken from a reference tuple.
    pub fn from_reference(x: &OperatorTuple, k: usize, epsilon: f64, polynomials: Vec<NcPolynomial>) -> Result<Self> {
        let target_norms = polynomials.iter().map(|p| eval_poly(p, x).map(|v| op_norm(&v))).collect::<Result<_>>()?;
        let spec = Self { n: x.len(), k, epsilon, polynomials, target_norms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.polynomials.len() != self.target_norms.len() {
            return Err(Error::InvalidInput(format!(
                "{} polynomials but {} target norms",
                self.polynomials.len(),
                self.target_norms.len()
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidInput("k and n must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub gaps: Vec<f64>,
}

/// Whether every `|‖p_j(A)‖ − target_j| < ε`; the gaps are reported either way.
pub fn gamma_member(tuple: &OperatorTuple, spec: &MicrostateSpec) -> Result<Membership> {
    spec.validate()?;
    if tuple.dim() != spec.k {
        return Err(Error::DimensionMismatch { expected: spec.k, actual: tuple.dim() });
    }
    if tuple.len() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, actual: tuple.len() });
    }
    if let Some(bad) = tuple.elems().iter().find(|a| a.hermitian_defect() > crate::matrix::HERMITIAN_TOL) {
        return Err(Error::NotHermitian { defect: bad.hermitian_defect() });
    }
    let gaps: Vec<f64> = spec
        .polynomials
        .iter()
        .zip(&spec.target_norms)
        .map(|(p, &t)| eval_poly(p, tuple).map(|v| (op_norm(&v) - t).abs()))
        .collect::<Result<_>>()?;
    Ok(Membership { member: gaps.iter().all(|&g| g < spec.epsilon), gaps })
}

fn haar_from_rng(k: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(k, k, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    // Fix the phases so that R has a positive diagonal; otherwise the law of
    // Q depends on the QR convention.
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..k {
            q[(i, j)] *= phase;
        }
    }
    DenseOperator::from_matrix(q).expect("square QR factor")
}

/// Haar-distributed unitary from a seeded complex Ginibre matrix.
pub fn haar_unitary(k: usize, seed: u64) -> Result<DenseOperator> {
    if k == 0 {
        return Err(Error::InvalidInput("unitary size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(haar_from_rng(k, &mut rng))
}

/// Independent Haar unitaries, sample `i` drawn from stream `i + 1` of `seed`.
pub fn haar_samples(k: usize, count: usize, seed: u64) -> Result<Vec<DenseOperator>> {
    if k == 0 {
        return Err(Error::InvalidInput("unitary size must be positive".into()));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            haar_from_rng(k, &mut rng)
        })
        .collect())
}

/// `{W_i* A W_i}` for independent Haar `W_i`.
pub fn orbit_cloud(a: &HermitianOperator, count: usize, seed: u64) -> Result<Vec<HermitianOperator>> {
    if count == 0 {
        return Err(Error::InvalidInput("orbit cloud needs at least one point".into()));
    }
    haar_samples(a.dim(), count, seed)?
        .into_iter()
        .map(|w| HermitianOperator::new(w.adjoint().matmul(a).matmul(&w).hermitian_part().into_operator()))
        .collect()
}

/// Packing and covering counts of a finite cloud at one scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringEstimate {
    /// Separation used for the packing.
    pub omega: f64,
    pub sample_count: usize,
    pub packing_count: usize,
    /// `omega / 2`: the radius at which the packing certifies a lower bound.
    pub cover_radius: f64,
    /// Certified: no ball of radius below `cover_radius` holds two packed
    /// points, so covering the cloud at that radius takes this many balls.
    pub implied_cover_lower: usize,
    /// Greedy cover of the cloud at `cover_radius`; an estimate for the
    /// underlying continuous set, not a bound.
    pub greedy_cover_count: usize,
}

fn greedy_pack_by<T>(cloud: &[T], omega: f64, dist: impl Fn(&T, &T) -> f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in cloud.iter().enumerate() {
        if kept.iter().all(|&j| dist(p, &cloud[j]) >= omega) {
            kept.push(i);
        }
    }
    kept
}

fn greedy_cover_by<T>(cloud: &[T], radius: f64, dist: impl Fn(&T, &T) -> f64) -> usize {
    let mut covered = vec![false; cloud.len()];
    let mut balls = 0;
    for i in 0..cloud.len() {
        if covered[i] {
            continue;
        }
        balls += 1;
        for j in i..cloud.len() {
            if !covered[j] && dist(&cloud[i], &cloud[j]) <= radius {
                covered[j] = true;
            }
        }
    }
    balls
}

fn check_cloud<T>(cloud: &[T], omega: f64) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cloud must be nonempty".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    Ok(())
}

/// Scans the cloud in order, keeping each point at distance `≥ ω` from every
/// kept point.
pub fn greedy_packing(cloud: &[OperatorTuple], omega: f64) -> Result<CoveringEstimate> {
    check_cloud(cloud, omega)?;
    let dist = |a: &OperatorTuple, b: &OperatorTuple| a.distance(b);
    let packing_count = greedy_pack_by(cloud, omega, dist).len();
    Ok(CoveringEstimate {
        omega,
        sample_count: cloud.len(),
        packing_count,
        cover_radius: omega / 2.0,
        implied_cover_lower: packing_count,
        greedy_cover_count: greedy_cover_by(cloud, omega / 2.0, dist),
    })
}

/// Number of greedy balls of radius `ω` needed to cover the cloud.
pub fn greedy_cover(cloud: &[OperatorTuple], omega: f64) -> Result<usize> {
    check_cloud(cloud, omega)?;
    Ok(greedy_cover_by(cloud, omega, |a, b| a.distance(b)))
}

/// Singleton tuples, for clouds of single operators.
pub fn as_tuples<'a>(ops: impl IntoIterator<Item = &'a DenseOperator>) -> Vec<OperatorTuple> {
    ops.into_iter().map(|o| OperatorTuple::single(o.clone())).collect()
}

/// Fewest closed discs of radius `ω` (centered anywhere in the plane) that
/// cover `points` equally spaced points of the unit circle. A disc meets the
/// circle in an arc of angle at most `2·asin(ω)`, so this is the fewest arcs
/// of that angle covering the points, found by running the greedy sweep from
/// every starting point. It lower-bounds the covering number of the whole
/// circle.
pub fn circle_net_oracle(points: usize, omega: f64) -> Result<usize> {
    if points == 0 || !(omega > 0.0) {
        return Err(Error::InvalidInput("need points > 0 and omega > 0".into()));
    }
    if omega >= 1.0 {
        // A disc of radius ≥ 1 covers the closed half circle... and two cover all.
        return Ok(if omega > 1.0 { 1 } else { 2 }.min(points));
    }
    let step = std::f64::consts::TAU / points as f64;
    let width = 2.0 * omega.asin();
    // Points an arc starting at a point can reach past it, with slack for rounding.
    let reach = ((width / step) + 1e-9).floor() as usize;
    if reach + 1 >= points {
        return Ok(1);
    }
    let mut best = usize::MAX;
    for start in 0..=reach.min(points - 1) {
        let mut pos = start;
        let mut arcs = 0;
        while pos < start + points {
            arcs += 1;
            pos += reach + 1;
        }
        best = best.min(arcs);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitaryBoundReport {
    pub k: usize,
    pub omega: f64,
    pub certified_radius: f64,
    pub log_cover_lower: f64,
    pub log_greedy_cover: f64,
    pub log_bound_lower: f64,
    pub log_bound_upper: f64,
    /// "consistent" when the certified lower bound reaches `(1/ω)^{k²}`,
    /// "inconclusive" when it does not, "violation" if any count exceeds
    /// `(9πe/ω)^{k²}`.
    pub status: String,
    pub violation: bool,
}

/// Compares a `U_k` estimate against `(1/ω)^{k²} ≤ ν ≤ (9πe/ω)^{k²}` in logs.
pub fn check_unitary_bounds(k: usize, omega: f64, estimate: &CoveringEstimate) -> UnitaryBoundReport {
    let k2 = (k * k) as f64;
    let log_bound_lower = k2 * (1.0 / omega).ln();
    let log_bound_upper = k2 * (9.0 * std::f64::consts::PI * std::f64::consts::E / omega).ln();
    let log_cover_lower = (estimate.implied_cover_lower as f64).ln();
    let log_greedy_cover = (estimate.greedy_cover_count as f64).ln();
    let violation = log_cover_lower > log_bound_upper + 1e-12 || log_greedy_cover > log_bound_upper + 1e-12;
    // A lower bound certified at a radius applies at every smaller radius.
    let applies = estimate.cover_radius >= omega;
    let status = if violation {
        "violation"
    } else if applies && log_cover_lower >= log_bound_lower - 1e-12 {
        "consistent"
    } else {
        "inconclusive"
    };
    UnitaryBoundReport {
        k,
        omega,
        certified_radius: estimate.cover_radius,
        log_cover_lower,
        log_greedy_cover,
        log_bound_lower,
        log_bound_upper,
        status: status.into(),
        violation,
    }
}

/// Finite-`k` profile `log ν / (−k² log ω)`. This is a single-scale number,
/// not a limit, and says nothing about the asymptotic dimension on its own.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringProfile {
    pub k: usize,
    pub omega: f64,
    pub value: f64,
    pub disclaimer: String,
}

pub fn covering_profile(k: usize, estimate: &CoveringEstimate) -> CoveringProfile {
    let omega = estimate.cover_radius;
    CoveringProfile {
        k,
        omega,
        value: (estimate.implied_cover_lower as f64).ln() / (-((k * k) as f64) * omega.ln()),
        disclaimer: "finite-k, single-scale sample profile; not an estimate of the limit".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionReport {
    /// `Σ c_ι² k_ι`.
    pub dim: usize,
    pub k: usize,
    pub n: usize,
    pub k_squared_over_n: f64,
    /// Whether `subrank ≥ N`, the case in which the bound is claimed.
    pub applies: bool,
    pub bound_holds: bool,
}

/// Real dimension of `Σ Q_ss M_k^{sa} Q_ss` for diagonal projections of ranks
/// `c_ι`, and the bound `dim ≤ k²/N` when `subrank ≥ N`.
pub fn compression_dimension(shape: &AlgebraShape, embedding: &UnitalEmbedding, n: usize) -> Result<CompressionReport> {
    if embedding.shape() != shape {
        return Err(Error::InvalidInput("embedding is for a different shape".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    let dim: usize = shape.blocks().iter().zip(embedding.multiplicities()).map(|(&k, &c)| c * c * k).sum();
    let k = embedding.target_dim();
    let k_squared_over_n = (k * k) as f64 / n as f64;
    let applies = subrank(shape) >= n;
    Ok(CompressionReport { dim, k, n, k_squared_over_n, applies, bound_holds: !applies || dim as f64 <= k_squared_over_n })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub k: usize,
    pub tuples: Vec<Vec<usize>>,
    pub count: usize,
    /// `(k / subrank)^r`.
    pub cap: f64,
    pub within_cap: bool,
}

/// All positive `(c_1, …, c_r)` with `Σ c_ι k_ι = k`.
pub fn enumerate_multiplicities(k: usize, shape: &AlgebraShape) -> Result<MultiplicityReport> {
    let blocks = shape.blocks();
    let minimum: usize = blocks.iter().sum();
    if k < minimum {
        return Err(Error::InvalidInput(format!("k = {k} is below the shape's rank {minimum}")));
    }
    fn walk(blocks: &[usize], rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some((&head, tail)) = blocks.split_first() else {
            if rest == 0 {
                out.push(prefix.clone());
            }
            return;
        };
        let reserve: usize = tail.iter().sum();
        let mut c = 1;
        while c * head + reserve <= rest {
            prefix.push(c);
            walk(tail, rest - c * head, prefix, out);
            prefix.pop();
            c += 1;
        }
    }
    let mut tuples = Vec::new();
    walk(blocks, k, &mut Vec::new(), &mut tuples);
    let cap = (k as f64 / subrank(shape) as f64).powi(blocks.len() as i32);
    let count = tuples.len();
    Ok(MultiplicityReport { k, tuples, count, cap, within_cap: count as f64 <= cap })
}

/// `log((12R/ω)^{n k²/N})`, the covering bound for compressed balls.
pub fn compressed_ball_log_bound(n: usize, k: usize, subrank_n: usize, r: f64, omega: f64) -> f64 {
    (n * k * k) as f64 / subrank_n as f64 * (12.0 * r.max(1.0) / omega).ln()
}

/// Staircase `Σ_ι Σ_s (s + Σ_{j<ι} k_j)·e_ss^{(ι)}`: eigenvalues `1..=rank`,
/// each with the multiplicity of its block's units.
pub fn build_test_element(shape: &AlgebraShape, units: &MatrixUnitSystem) -> Result<HermitianOperator> {
    if units.shape() != shape {
        return Err(Error::InvalidInput("unit system has a different shape".into()));
    }
    let mut z = DenseOperator::zeros(units.ambient_dim());
    let mut offset = 0;
    for (iota, &k) in shape.blocks().iter().enumerate() {
        for s in 0..k {
            z += &units.unit(iota, s, s).scale((offset + s + 1) as f64);
        }
        offset += k;
    }
    Ok(z.hermitian_part())
}

/// A polynomial in the generators approximating a target, with its error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Approximant {
    pub polynomial: NcPolynomial,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Least-squares fit of `target` by words of length `≤ max_degree` in the
/// tuple, with coefficients rounded to rationals. Passes when the operator
/// norm error is at most `1/N³`.
pub fn polynomial_approximant(
    tuple: &OperatorTuple,
    target: &DenseOperator,
    max_degree: usize,
    n_param: usize,
) -> Result<Approximant> {
    let d = tuple.dim();
    if target.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: target.dim() });
    }
    let mut words: Vec<Vec<usize>> = vec![vec![]];
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for w in &layer {
            for i in 1..=tuple.len() {
                let mut v = w.clone();
                v.push(i);
                next.push(v);
            }
        }
        words.extend(next.iter().cloned());
        layer = next;
    }
    let values: Vec<DenseOperator> = words
        .iter()
        .map(|w| eval_poly(&NcPolynomial::new(vec![Term { coeff: RationalComplex::real(1, 1), word: w.clone() }]), tuple))
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(d * d, words.len(), |r, c| values[c].as_matrix()[(r % d, r / d)]);
    let rhs = DMatrix::from_fn(d * d, 1, |r, _| target.as_matrix()[(r % d, r / d)]);
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))?;
    let mut terms = Vec::new();
    for (w, c) in words.into_iter().zip(coeffs.iter()) {
        if c.norm() < 1e-14 {
            continue;
        }
        let coeff = RationalComplex::approximate(*c)
            .ok_or_else(|| Error::InvalidInput(format!("coefficient {c} has no i64 rational approximation")))?;
        terms.push(Term { coeff, word: w });
    }
    let polynomial = NcPolynomial::new(terms);
    let error = op_norm(&(&eval_poly(&polynomial, tuple)? - target));
    let tolerance = 1.0 / (n_param as f64).powi(3);
    Ok(Approximant { polynomial, error, tolerance, pass: error <= tolerance })
}

/// `max_j ‖A_j − Σ P_ss A_j P_ss‖` over the diagonal units of `units`.
pub fn compression_defect(tuple: &OperatorTuple, units: &MatrixUnitSystem) -> Result<f64> {
    if tuple.dim() != units.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: units.ambient_dim(), actual: tuple.dim() });
    }
    Ok(tuple.elems().iter().map(|a| op_norm(&(a - &pinch(a, units)))).fold(0.0, f64::max))
}

fn pinch(a: &DenseOperator, units: &MatrixUnitSystem) -> DenseOperator {
    let mut acc = DenseOperator::zeros(a.dim());
    for s in 0..units.shape().num_blocks() {
        for i in 0..units.shape().block(s) {
            let p = units.unit(s, i, i);
            acc += &p.matmul(a).matmul(p);
        }
    }
    acc
}

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
    DenseOperator::from_fn(d, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .hermitian_part()
        .into_operator()
}

/// `n` Hermitian elements, each block diagonal for `units` plus a Hermitian
/// perturbation of operator norm exactly `omega`.
pub fn synthetic_block_tuple(units: &MatrixUnitSystem, n: usize, omega: f64, seed: u64) -> Result<OperatorTuple> {
    if n == 0 || !(omega >= 0.0) {
        return Err(Error::InvalidInput("need n ≥ 1 and omega ≥ 0".into()));
    }
    let d = units.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elems = (0..n)
        .map(|_| {
            let base = pinch(&random_hermitian(d, &mut rng), units);
            let e = random_hermitian(d, &mut rng);
            let norm = op_norm(&e);
            &base + &e.scale(omega / norm)
        })
        .collect();
    OperatorTuple::new(elems)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessRow {
    pub k: usize,
    pub found: bool,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessSearch {
    pub rows: Vec<WitnessRow>,
    /// Always "inconclusive": finitely many `k` can support the
    /// approximation property but never decide it.
    pub verdict: String,
}

/// Looks for microstates of `x` at each `k` by amplifying `x` (when
/// `dim x` divides `k`) or compressing an amplification to its top-left
/// corner otherwise.
pub fn witness_search(x: &OperatorTuple, polynomials: &[NcPolynomial], epsilon: f64, ks: &[usize]) -> Result<WitnessSearch> {
    let d = x.dim();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let spec = MicrostateSpec::from_reference(x, k, epsilon, polynomials.to_vec())?;
        let copies = k.div_ceil(d);
        let candidate = x
            .elems()
            .iter()
            .map(|a| {
                let big = kron(a, &DenseOperator::identity(copies))?;
                Ok(DenseOperator::from_fn(k, |i, j| big.get(i, j)))
            })
            .collect::<Result<Vec<_>>>()?;
        let m = gamma_member(&OperatorTuple::new(candidate)?, &spec)?;
        rows.push(WitnessRow { k, found: m.member, max_gap: m.gaps.iter().copied().fold(0.0, f64::max) });
    }
    Ok(WitnessSearch { rows, verdict: "inconclusive".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::canonical_units;
    use proptest::prelude::*;

    fn tuple(ops: Vec<DenseOperator>) -> OperatorTuple {
        OperatorTuple::new(ops).unwrap()
    }

    #[test]
    fn eval_examples() {
        let a = DenseOperator::diag(&[1.0, 2.0]);
        let b = DenseOperator::diag(&[3.0, -1.0]);
        assert_eq!(eval_poly(&NcPolynomial::var(1), &tuple(vec![a.clone()])).unwrap(), a);
        assert_eq!(eval_poly(&NcPolynomial::one(), &tuple(vec![a.clone()])).unwrap(), DenseOperator::identity(2));
        let comm = NcPolynomial::new(vec![
            Term { coeff: RationalComplex::real(1, 1), word: vec![1, 2] },
            Term { coeff: RationalComplex::real(-1, 1), word: vec![2, 1] },
        ]);
        assert!(eval_poly(&comm, &tuple(vec![a.clone(), b])).unwrap().is_zero());
        assert!(matches!(
            eval_poly(&NcPolynomial::var(3), &tuple(vec![a])),
            Err(Error::IndexOutOfRange { index: 3, arity: 1 })
        ));
    }

    #[test]
    fn polynomial_literal_format() {
        let json = r#"[{"coeff":[1,2,-3,4],"word":[1,2]},{"coeff":[5,1,0,1],"word":[]}]"#;
        let p: NcPolynomial = serde_json::from_str(json).unwrap();
        assert_eq!(p.terms[0].coeff.re, Ratio::new(1, 2));
        assert_eq!(p.terms[0].coeff.im, Ratio::new(-3, 4));
        assert_eq!(p.terms[1].word, Vec::<usize>::new());
        assert_eq!(serde_json::to_string(&p).unwrap(), json);
        assert!(serde_json::from_str::<NcPolynomial>(r#"[{"coeff":[1,0,0,1],"word":[1]}]"#).is_err());
        assert!(serde_json::from_str::<NcPolynomial>(r#"[{"coeff":[1,1,0,1],"word":[0]}]"#).is_err());
    }

    #[test]
    fn membership_examples() {
        let a = DenseOperator::diag(&[0.3, -0.7]);
        let x = tuple(vec![a.clone()]);
        let spec = MicrostateSpec::from_reference(&x, 2, 1e-9, vec![NcPolynomial::var(1), NcPolynomial::one()]).unwrap();
        assert!(gamma_member(&x, &spec).unwrap().member);

        let eps = 0.1;
        let spec = MicrostateSpec { n: 1, k: 2, epsilon: eps, polynomials: vec![NcPolynomial::var(1)], target_norms: vec![0.0] };
        let m = gamma_member(&tuple(vec![DenseOperator::diag(&[2.0 * eps, 0.0])]), &spec).unwrap();
        assert!(!m.member);
        assert!((m.gaps[0] - 2.0 * eps).abs() < 1e-15);
    }

    #[test]
    fn amplified_generators_are_microstates() {
        use crate::tower::{build_tower, Mode, Recipe, TowerSpec};
        let spec = TowerSpec::new(vec![AlgebraShape::full(3)], 1, Mode::Strict, 3, Recipe::LeadingFactor);
        let model = build_tower(&spec).unwrap();
        let x = tuple(model.generators().iter().map(|g| g.as_operator().clone()).collect());
        let polys = vec![
            NcPolynomial::var(1),
            NcPolynomial::new(vec![Term { coeff: RationalComplex::real(1, 1), word: vec![1, 1, 1] }]),
        ];
        let w = haar_unitary(6, 9).unwrap();
        let amplified = tuple(
            x.elems()
                .iter()
                .map(|a| {
                    let big = kron(a, &DenseOperator::identity(2)).unwrap();
                    w.adjoint().matmul(&big).matmul(&w).hermitian_part().into_operator()
                })
                .collect(),
        );
        let probe = MicrostateSpec::from_reference(&x, 6, 1.0, polys.clone()).unwrap();
        let defect = gamma_member(&amplified, &probe).unwrap().gaps.into_iter().fold(0.0, f64::max);
        let spec = MicrostateSpec::from_reference(&x, 6, (2.0 * defect).max(1e-13), polys).unwrap();
        assert!(gamma_member(&amplified, &spec).unwrap().member);
    }

    #[test]
    fn haar_unitaries_are_unitary() {
        let u = haar_unitary(1, 3).unwrap();
        assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-14);
        for seed in 0..20 {
            let u = haar_unitary(8, seed).unwrap();
            assert!((&u.adjoint().matmul(&u) - &DenseOperator::identity(8)).max_abs_entry() <= 1e-12);
        }
    }

    #[test]
    fn haar_trace_second_moment() {
        // E|tr U|² = 1 for Haar U in every dimension.
        let samples = haar_samples(4, 2000, 17).unwrap();
        let mean = samples.iter().map(|u| u.trace().norm_sqr()).sum::<f64>() / samples.len() as f64;
        assert!((mean - 1.0).abs() <= 0.1, "{mean}");
    }

    #[test]
    fn orbit_examples() {
        for p in orbit_cloud(&HermitianOperator::identity(3), 5, 1).unwrap() {
            assert!((p.as_operator() - &DenseOperator::identity(3)).max_abs_entry() < 1e-12);
        }
        for p in orbit_cloud(&HermitianOperator::diag(&[1.0, 0.0]), 100, 2).unwrap() {
            assert!((&p.matmul(&p) - p.as_operator()).max_abs_entry() < 1e-12);
            assert!((p.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orbit_preserves_spectrum() {
        let a = HermitianOperator::diag(&[-1.0, 0.25, 0.25, 2.0]);
        for p in orbit_cloud(&a, 30, 5).unwrap() {
            let ev = p.eigenvalues();
            for (x, y) in ev.iter().zip([-1.0, 0.25, 0.25, 2.0]) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    fn scalar(z: C64) -> OperatorTuple {
        OperatorTuple::single(DenseOperator::from_fn(1, |_, _| z))
    }

    #[test]
    fn packing_and_cover_examples() {
        let same: Vec<_> = (0..5).map(|_| scalar(C64::new(1.0, 0.0))).collect();
        assert_eq!(greedy_packing(&same, 0.1).unwrap().packing_count, 1);
        assert_eq!(greedy_cover(&same[..1], 0.1).unwrap(), 1);
        let close = vec![scalar(C64::new(0.0, 0.0)), scalar(C64::new(0.05, 0.0))];
        assert_eq!(greedy_cover(&close, 0.1).unwrap(), 1);
        let tie = vec![scalar(C64::new(0.0, 0.0)), scalar(C64::new(0.5, 0.0))];
        assert_eq!(greedy_packing(&tie, 0.5).unwrap().packing_count, 2);
        let circle = as_tuples(&haar_samples(1, 500, 1).unwrap());
        assert_eq!(greedy_cover(&circle, 2.1).unwrap(), 1);
    }

    #[test]
    fn sampled_circle_packing_meets_lower_bound() {
        let circle = as_tuples(&haar_samples(1, 10_000, 4).unwrap());
        let est = greedy_packing(&circle, 0.5).unwrap();
        assert!(est.implied_cover_lower >= 2);
        let report = check_unitary_bounds(1, 0.25, &est);
        assert!(!report.violation);
        assert_eq!(report.status, "consistent");
        assert!(((9.0 * std::f64::consts::PI * std::f64::consts::E / 0.5) - 153.7).abs() < 0.1);
    }

    #[test]
    fn circle_oracle_counts_arcs() {
        // Arcs of angle 2·asin(ω): 2π / (π/3) = 6 at ω = 0.5.
        let n = circle_net_oracle(10_000, 0.5).unwrap();
        assert!((6..=7).contains(&n), "{n}");
        assert!(circle_net_oracle(10_000, 0.25).unwrap() >= 4);
        assert_eq!(circle_net_oracle(10_000, 1.5).unwrap(), 1);
    }

    #[test]
    fn bounds_report_for_trivial_case() {
        let cloud = as_tuples(&haar_samples(2, 50, 3).unwrap());
        let est = greedy_packing(&cloud, 2.0).unwrap();
        let report = check_unitary_bounds(2, 1.0, &est);
        assert!(!report.violation);
        assert_eq!(report.status, "consistent");
    }

    #[test]
    fn packing_is_unitarily_invariant() {
        let cloud: Vec<DenseOperator> =
            orbit_cloud(&HermitianOperator::diag(&[1.0, 0.0, -1.0]), 200, 8).unwrap().into_iter().map(|h| h.into_operator()).collect();
        let w = haar_unitary(3, 99).unwrap();
        let rotated: Vec<DenseOperator> = cloud.iter().map(|a| w.adjoint().matmul(a).matmul(&w)).collect();
        let a = greedy_packing(&as_tuples(&cloud), 0.8).unwrap();
        let b = greedy_packing(&as_tuples(&rotated), 0.8).unwrap();
        assert_eq!(a.packing_count, b.packing_count);
    }

    #[test]
    fn compression_examples() {
        let shape = AlgebraShape::new(vec![2, 3]).unwrap();
        let emb = UnitalEmbedding::new(shape.clone(), vec![1, 1], 5).unwrap();
        assert_eq!(compression_dimension(&shape, &emb, 2).unwrap().dim, 5);
        let full = AlgebraShape::full(4);
        let r = compression_dimension(&full, &UnitalEmbedding::minimal(&full), 4).unwrap();
        assert_eq!(r.dim, 4);
        assert!(r.applies && r.bound_holds && r.k_squared_over_n == 4.0);
    }

    #[test]
    fn multiplicity_examples() {
        let shape = AlgebraShape::new(vec![2, 3]).unwrap();
        let r = enumerate_multiplicities(5, &shape).unwrap();
        assert_eq!(r.tuples, vec![vec![1, 1]]);
        assert!(r.within_cap && (r.cap - 6.25).abs() < 1e-12);
        assert_eq!(enumerate_multiplicities(12, &shape).unwrap().tuples, vec![vec![3, 2]]);
        let s3 = AlgebraShape::new(vec![1, 2, 4]).unwrap();
        assert_eq!(enumerate_multiplicities(7, &s3).unwrap().tuples, vec![vec![1, 1, 1]]);
        assert!(enumerate_multiplicities(4, &shape).is_err());
    }

    #[test]
    fn test_element_examples() {
        let s = AlgebraShape::full(3);
        let z = build_test_element(&s, &canonical_units(&s, &UnitalEmbedding::minimal(&s)).unwrap()).unwrap();
        assert_eq!(z.as_operator(), &DenseOperator::diag(&[1.0, 2.0, 3.0]));
        let s = AlgebraShape::new(vec![2, 2]).unwrap();
        let emb = UnitalEmbedding::new(s.clone(), vec![2, 3], 10).unwrap();
        let z = build_test_element(&s, &canonical_units(&s, &emb).unwrap()).unwrap();
        let ev = z.eigenvalues();
        for (value, mult) in [(1.0, 2), (2.0, 2), (3.0, 3), (4.0, 3)] {
            assert_eq!(ev.iter().filter(|&&v| (v - value).abs() < 1e-9).count(), mult);
        }
    }

    #[test]
    fn approximant_of_test_element() {
        let s = AlgebraShape::full(3);
        let units = canonical_units(&s, &UnitalEmbedding::minimal(&s)).unwrap();
        let z = build_test_element(&s, &units).unwrap();
        // A diagonal generator with simple spectrum: the staircase is a
        // quadratic in it (Lagrange interpolation).
        let x = tuple(vec![DenseOperator::diag(&[0.1, 0.4, 0.9])]);
        let approx = polynomial_approximant(&x, z.as_operator(), 2, 10).unwrap();
        assert!(approx.pass, "{approx:?}");
        let short = polynomial_approximant(&x, z.as_operator(), 1, 10).unwrap();
        assert!(!short.pass);
    }

    #[test]
    fn compression_defect_of_synthetic_tuples() {
        let s = AlgebraShape::new(vec![2, 3]).unwrap();
        let units = canonical_units(&s, &UnitalEmbedding::new(s.clone(), vec![2, 1], 7).unwrap()).unwrap();
        for omega in [0.1, 0.01] {
            for seed in 0..5 {
                let t = synthetic_block_tuple(&units, 2, omega, seed).unwrap();
                assert!(compression_defect(&t, &units).unwrap() <= 2.0 * omega + 1e-10);
            }
        }
    }

    #[test]
    fn witness_search_is_inconclusive_by_design() {
        let x = tuple(vec![DenseOperator::diag(&[0.5, -0.5])]);
        let r = witness_search(&x, &[NcPolynomial::var(1)], 1e-9, &[2, 3, 4]).unwrap();
        assert_eq!(r.verdict, "inconclusive");
        assert!(r.rows.iter().all(|row| row.found));
    }

    proptest! {
        #[test]
        fn membership_is_monotone_in_epsilon(v in proptest::collection::vec(-1.0f64..1.0, 2), eps in 1e-6f64..1.0, extra in 0.0f64..1.0) {
            let x = tuple(vec![DenseOperator::diag(&v)]);
            let y = tuple(vec![DenseOperator::diag(&[v[0] * 0.9, v[1]])]);
            let polys = vec![NcPolynomial::var(1)];
            let tight = MicrostateSpec::from_reference(&x, 2, eps, polys.clone()).unwrap();
            let loose = MicrostateSpec::from_reference(&x, 2, eps + extra + 1e-12, polys).unwrap();
            if gamma_member(&y, &tight).unwrap().member {
                prop_assert!(gamma_member(&y, &loose).unwrap().member);
            }
        }
    }
}
