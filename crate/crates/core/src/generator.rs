//! The two-generator construction on a built tower: corner projections `p_n`,
//! index atoms and row assignments, interleaving elements `z_n`, and the
//! Hermitian pair `(a, b)`.
//!
//! Levels are 0-based in the API (`m = n − 1`); reports use `n`.

use serde::Serialize;

use crate::algebra::{rank, subrank, MatrixUnitSystem};
use crate::error::{Error, Result};
use crate::matrix::{max_op_norm, op_norm, DenseOperator, HermitianOperator};
use crate::tower::{atom_count, witnesses, CommutantWitness, TowerModel};

/// Threshold below which an interleaving numerator counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// `p_n = Σ_s e_{k_s k_s}^{(n,s)}`.
pub fn corner_projection(model: &TowerModel, m: usize) -> DenseOperator {
    corner_of(model.block(m))
}

pub(crate) fn corner_of(block: &MatrixUnitSystem) -> DenseOperator {
    let shape = block.shape();
    let mut p = DenseOperator::zeros(block.ambient_dim());
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        p += block.unit(s, k - 1, k - 1);
    }
    p
}

/// Position of `(s, i)` in the flattened index range `0..rank` of one level.
fn flat(shape_blocks: &[usize], s: usize, i: usize) -> usize {
    shape_blocks[..s].iter().sum::<usize>() + i
}

fn unflat(shape_blocks: &[usize], mut q: usize) -> (usize, usize) {
    for (s, &k) in shape_blocks.iter().enumerate() {
        if q < k {
            return (s, q);
        }
        q -= k;
    }
    panic!("flat index out of range");
}

/// One element of `Δ_{n−1}`: for every lower level `l`, a row pair `(i_l, s_l)`
/// and a column pair `(j_l, t_l)`, all 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexAtom {
    /// `rows[l] = (s_l, i_l)`.
    pub rows: Vec<(usize, usize)>,
    /// `cols[l] = (t_l, j_l)`.
    pub cols: Vec<(usize, usize)>,
}

impl IndexAtom {
    /// Atom with rows and columns swapped (the index set of the adjoint).
    pub fn reflected(&self) -> Self {
        Self { rows: self.cols.clone(), cols: self.rows.clone() }
    }
}

/// Injective row maps `f_j`: atom with lexicographic rank `q` goes to row
/// `starts[j] + q` (0-based) of every block at the level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowAssignment {
    pub level: usize,
    pub card: usize,
    pub starts: Vec<usize>,
}

impl RowAssignment {
    pub fn row(&self, j: usize, lex_rank: usize) -> usize {
        self.starts[j] + lex_rank
    }

    /// Largest row touched, counting the `f + 1` partner.
    pub fn max_row(&self) -> usize {
        self.starts.iter().map(|s| s + self.card).max().unwrap_or(0)
    }
}

/// Enumerates `Δ_{m−1}` lexicographically over
/// `(row_1, col_1, row_2, col_2, …)` and assigns rows `j·Card + 1 + rank`.
pub fn enumerate_indices(model: &TowerModel, m: usize) -> Result<(Vec<IndexAtom>, RowAssignment)> {
    if m == 0 {
        return Err(Error::InvalidInput("index atoms exist only from the second level on".into()));
    }
    let shapes: Vec<_> = (0..model.depth()).map(|l| model.shape(l).clone()).collect();
    let card = atom_count(&shapes, m);
    let active = model.spec().active_generators(m);
    let required = active * card + 3;
    let have = subrank(&shapes[m]);
    if have < required {
        return Err(Error::InsufficientSubrank { level: m + 1, subrank: have, required });
    }
    let ranks: Vec<usize> = shapes[..m].iter().map(rank).collect();
    let mut atoms = Vec::with_capacity(card);
    for mut code in 0..card {
        let mut digits = vec![0usize; 2 * m];
        for pos in (0..2 * m).rev() {
            let radix = ranks[pos / 2];
            digits[pos] = code % radix;
            code /= radix;
        }
        let rows = (0..m).map(|l| unflat(shapes[l].blocks(), digits[2 * l])).collect();
        let cols = (0..m).map(|l| unflat(shapes[l].blocks(), digits[2 * l + 1])).collect();
        atoms.push(IndexAtom { rows, cols });
    }
    let starts = (0..active).map(|j| j * card + 1).collect();
    Ok((atoms, RowAssignment { level: m + 1, card, starts }))
}

/// Lexicographic rank of an atom under `enumerate_indices`' order.
pub fn lex_rank(model: &TowerModel, atom: &IndexAtom) -> usize {
    let mut code = 0;
    for l in 0..atom.rows.len() {
        let blocks = model.shape(l).blocks();
        let radix = rank(model.shape(l));
        let (s, i) = atom.rows[l];
        let (t, j) = atom.cols[l];
        code = code * radix + flat(blocks, s, i);
        code = code * radix + flat(blocks, t, j);
    }
    code
}

/// `α(y) = e_{k,i_{m−1}} ⋯ e_{k,i_1} · y · e_{j_1,k} ⋯ e_{j_{m−1},k}` with the
/// corner row `k = k_s` of each block. Checks that `y` commutes with level `m`.
pub fn conjugated_element(model: &TowerModel, atom: &IndexAtom, y: &DenseOperator, m: usize) -> Result<DenseOperator> {
    if y.dim() != model.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: model.ambient_dim(), actual: y.dim() });
    }
    if atom.rows.len() != m || atom.cols.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: atom.rows.len() });
    }
    let defect = commutator_with_block(y, model.block(m));
    if defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "element does not commute with level {} (defect {defect:e})",
            m + 1
        )));
    }
    Ok(conjugate_unchecked(model.blocks(), atom, y))
}

pub(crate) fn conjugate_unchecked(blocks: &[MatrixUnitSystem], atom: &IndexAtom, y: &DenseOperator) -> DenseOperator {
    let mut out = y.clone();
    for (l, block) in blocks.iter().enumerate().take(atom.rows.len()) {
        let (s, i) = atom.rows[l];
        let (t, j) = atom.cols[l];
        let ks = block.shape().block(s);
        let kt = block.shape().block(t);
        out = block.unit(s, ks - 1, i).matmul(&out).matmul(block.unit(t, j, kt - 1));
    }
    out
}

/// Commutator bound over the spanning set `{e_{1j}, e_{j1}}`, scaled by 2.
fn commutator_with_block(y: &DenseOperator, block: &MatrixUnitSystem) -> f64 {
    2.0 * max_op_norm(
        block
            .iter()
            .filter(|(_, i, j, _)| *i == 0 || *j == 0)
            .map(|(_, _, _, u)| y.commutator(u)),
    )
}

/// `r_1 + ⋯ + r_{m+1}` (block counts through 0-based level `m`).
pub fn block_count_prefix(model: &TowerModel, m: usize) -> usize {
    (0..=m).map(|l| model.shape(l).num_blocks()).sum()
}

/// Norm target `2^{−(r_1+⋯+r_n+1)}` for `z_n`.
pub fn z_norm_target(model: &TowerModel, m: usize) -> f64 {
    0.5f64.powi(block_count_prefix(model, m) as i32 + 1)
}

/// Builds `z_n` and its normalization `c_n` from the level's witnesses.
pub fn build_z(model: &TowerModel, witness: &CommutantWitness, m: usize) -> Result<(HermitianOperator, f64)> {
    if m == 0 {
        return build_z_first(model, witness);
    }
    let (_, assignment) = enumerate_indices(model, m)?;
    build_z_with_assignment(model, witness, m, &assignment)
}

fn build_z_first(model: &TowerModel, witness: &CommutantWitness) -> Result<(HermitianOperator, f64)> {
    let block = model.block(0);
    let y = witness
        .approximants
        .first()
        .ok_or_else(|| Error::InvalidInput("no witness at the first level".into()))?;
    let mut w = DenseOperator::zeros(model.ambient_dim());
    for s in 0..block.shape().num_blocks() {
        w += &block.unit(s, 1, 1).matmul(y);
    }
    let norm = op_norm(&w);
    if norm < DEGENERACY_TOL {
        return Err(Error::DegenerateWitness { level: 1, norm });
    }
    let c = z_norm_target(model, 0) / norm;
    Ok((w.scale(c).hermitian_part(), c))
}

/// `z_n` for an arbitrary (unchecked) row assignment at level `m ≥ 1`.
pub fn build_z_with_assignment(
    model: &TowerModel,
    witness: &CommutantWitness,
    m: usize,
    assignment: &RowAssignment,
) -> Result<(HermitianOperator, f64)> {
    let (atoms, _) = enumerate_indices_unchecked(model, m);
    let block = model.block(m);
    let mut sum = DenseOperator::zeros(model.ambient_dim());
    for (j, y) in witness.approximants.iter().enumerate().take(assignment.starts.len()) {
        for (q, atom) in atoms.iter().enumerate() {
            let alpha = conjugate_unchecked(model.blocks(), atom, y);
            let f = assignment.row(j, q);
            for s in 0..block.shape().num_blocks() {
                let term = block.unit(s, f, f + 1).matmul(&alpha);
                sum += &term;
                sum += &term.adjoint();
            }
        }
    }
    let norm = op_norm(&sum);
    if norm < DEGENERACY_TOL {
        return Err(Error::DegenerateWitness { level: m + 1, norm });
    }
    let c = z_norm_target(model, m) / norm;
    Ok((sum.scale(c).hermitian_part(), c))
}

fn enumerate_indices_unchecked(model: &TowerModel, m: usize) -> (Vec<IndexAtom>, usize) {
    let shapes: Vec<_> = (0..model.depth()).map(|l| model.shape(l).clone()).collect();
    let card = atom_count(&shapes, m);
    let ranks: Vec<usize> = shapes[..m].iter().map(rank).collect();
    let atoms = (0..card)
        .map(|mut code| {
            let mut digits = vec![0usize; 2 * m];
            for pos in (0..2 * m).rev() {
                digits[pos] = code % ranks[pos / 2];
                code /= ranks[pos / 2];
            }
            IndexAtom {
                rows: (0..m).map(|l| unflat(shapes[l].blocks(), digits[2 * l])).collect(),
                cols: (0..m).map(|l| unflat(shapes[l].blocks(), digits[2 * l + 1])).collect(),
            }
        })
        .collect();
    (atoms, card)
}

/// Everything built at one level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelPlan {
    pub n: usize,
    pub p: DenseOperator,
    pub z: HermitianOperator,
    pub c: f64,
    pub a_n: HermitianOperator,
    pub b_n: HermitianOperator,
    #[serde(skip)]
    pub witness: CommutantWitness,
    #[serde(skip)]
    pub assignment: Option<RowAssignment>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Totals {
    pub a: HermitianOperator,
    pub b: HermitianOperator,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorPlan {
    pub levels: Vec<LevelPlan>,
    pub totals: Totals,
    /// `2^{−L}`: the omitted levels would add at most this much in norm.
    pub tail_bound: f64,
}

impl GeneratorPlan {
    pub fn a(&self) -> &HermitianOperator {
        &self.totals.a
    }

    pub fn b(&self) -> &HermitianOperator {
        &self.totals.b
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// `p_1 ⋯ p_m` for every `m ≤ L`, starting with `p_0 = I`.
pub(crate) fn prefix_products(identity: &DenseOperator, ps: &[DenseOperator]) -> Vec<DenseOperator> {
    let mut out = Vec::with_capacity(ps.len() + 1);
    out.push(identity.clone());
    for p in ps {
        let next = out.last().expect("nonempty").matmul(p);
        out.push(next);
    }
    out
}

/// `a_n` and `b_n` for every level, with totals `a = Σ a_n`, `b = Σ b_n`.
pub fn build_ab(
    model: &TowerModel,
    ps: &[DenseOperator],
    zs: &[HermitianOperator],
) -> Result<(Vec<HermitianOperator>, Vec<HermitianOperator>, Totals)> {
    if ps.len() != model.depth() || zs.len() != model.depth() {
        return Err(Error::DimensionMismatch { expected: model.depth(), actual: ps.len().min(zs.len()) });
    }
    let prefixes = prefix_products(model.identity(), ps);
    let d = model.ambient_dim();
    let (mut a_levels, mut b_levels) = (Vec::new(), Vec::new());
    let (mut a, mut b) = (DenseOperator::zeros(d), DenseOperator::zeros(d));
    let mut r_before = 0usize;
    for m in 0..model.depth() {
        let block = model.block(m);
        let shape = block.shape();
        let mut diag = DenseOperator::zeros(d);
        let mut ladder = DenseOperator::zeros(d);
        for s in 0..shape.num_blocks() {
            diag += &block.unit(s, 0, 0).scale(0.5f64.powi((r_before + s + 1) as i32));
            for i in 0..shape.block(s) - 1 {
                ladder += block.unit(s, i, i + 1);
                ladder += block.unit(s, i + 1, i);
            }
        }
        let a_n = (&prefixes[m].matmul(&diag) + zs[m].as_operator()).hermitian_part();
        let b_n = prefixes[m].matmul(&ladder).scale(0.25f64.powi(m as i32 + 1)).hermitian_part();
        a += a_n.as_operator();
        b += b_n.as_operator();
        a_levels.push(a_n);
        b_levels.push(b_n);
        r_before += shape.num_blocks();
    }
    Ok((a_levels, b_levels, Totals { a: a.hermitian_part(), b: b.hermitian_part() }))
}

/// Runs the whole construction through the tower's depth.
pub fn construct(model: &TowerModel) -> Result<GeneratorPlan> {
    let mut ps = Vec::with_capacity(model.depth());
    let mut zs = Vec::with_capacity(model.depth());
    let mut cs = Vec::with_capacity(model.depth());
    let mut ws = Vec::with_capacity(model.depth());
    let mut assignments = Vec::with_capacity(model.depth());
    for m in 0..model.depth() {
        ps.push(corner_projection(model, m));
        let w = witnesses(model, m)?;
        let assignment = if m == 0 { None } else { Some(enumerate_indices(model, m)?.1) };
        let (z, c) = build_z(model, &w, m)?;
        zs.push(z);
        cs.push(c);
        ws.push(w);
        assignments.push(assignment);
    }
    let (a_levels, b_levels, totals) = build_ab(model, &ps, &zs)?;
    let levels = (0..model.depth())
        .zip(ps.into_iter().zip(zs))
        .zip(a_levels.into_iter().zip(b_levels))
        .zip(ws.into_iter().zip(assignments))
        .map(|(((m, (p, z)), (a_n, b_n)), (witness, assignment))| LevelPlan {
            n: m + 1,
            p,
            z,
            c: cs[m],
            a_n,
            b_n,
            witness,
            assignment,
        })
        .collect();
    Ok(GeneratorPlan { levels, totals, tail_bound: 0.5f64.powi(model.depth() as i32) })
}

/// One measured identity with its tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct FactRow {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactReport {
    pub rows: Vec<FactRow>,
    pub pass: bool,
}

impl FactReport {
    pub fn row(&self, name: &str) -> Option<&FactRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub const FACT_TOL: f64 = 1e-10;

/// Measures the construction identities:
///
/// * `F1`: `p_n z_n = z_n p_n = 0`
/// * `F2`: `z_n e_11^{(m,s)} = e_11^{(m,s)} z_n = 0` for `m ≤ n`
/// * `F3`: `z_n z_m = 0` for `n ≠ m`
/// * `orthogonal_levels`: `a_n a_m = 0` for `n ≠ m`
/// * `a_norm_stated`: `|‖a_n‖ − 2^{−(r_1+⋯+r_n)−1}|`, the closed form as
///   usually quoted
/// * `a_norm_max`: `|‖a_n‖ − max_s{2^{−r_1−⋯−r_{n−1}−s}, ‖z_n‖}|`, the
///   maximum the closed form is derived from
/// * `a_norm_decay`: `max_n (‖a_n‖ − 2^{−n})`
/// * `b_norm_slack`: `max_n (‖b_n‖ − 2^{−2n+1})`
/// * `corner_compression`: `(I−p_n)p_{<n} z_n p_{<n}(I−p_n) = z_n`
/// * `z_norm`: `|‖z_n‖ − 2^{−(r_1+⋯+r_n+1)}|`
/// * `leading_separation`: `‖(I−E)(2a)(I−E)‖ − 1/2` with `E = e_11^{(1,1)}`
///
/// The first `a_norm_stated` disagrees with `a_norm_max` whenever `r_n ≥ 1`
/// (the maximum is attained at `s = 1`, giving `2^{−r_1−⋯−r_{n−1}−1}`), so it
/// is reported but fails on every nontrivial tower.
pub fn verify_facts(model: &TowerModel, plan: &GeneratorPlan) -> FactReport {
    let d = model.ambient_dim();
    let identity = DenseOperator::identity(d);
    let ps: Vec<DenseOperator> = plan.levels.iter().map(|l| l.p.clone()).collect();
    let prefixes = prefix_products(&identity, &ps);
    let mut rows = Vec::new();
    let mut push = |name: &str, measured: f64, threshold: f64| {
        rows.push(FactRow { name: name.into(), measured, threshold, pass: measured <= threshold });
    };

    let zs: Vec<&DenseOperator> = plan.levels.iter().map(|l| l.z.as_operator()).collect();
    let f1 = max_op_norm(plan.levels.iter().flat_map(|l| [l.p.matmul(&l.z), l.z.matmul(&l.p)]));
    push("F1", f1, FACT_TOL);

    let mut f2_terms = Vec::new();
    for (n, z) in zs.iter().enumerate() {
        for m in 0..=n {
            let block = model.block(m);
            for s in 0..block.shape().num_blocks() {
                let e = block.unit(s, 0, 0);
                f2_terms.push(z.matmul(e));
                f2_terms.push(e.matmul(z));
            }
        }
    }
    push("F2", max_op_norm(f2_terms), FACT_TOL);

    let f3 = max_op_norm(
        (0..zs.len()).flat_map(|n| (0..zs.len()).filter(move |&m| m != n).map(move |m| (n, m))).map(|(n, m)| zs[n].matmul(zs[m])),
    );
    push("F3", f3, FACT_TOL);

    let a_levels: Vec<&DenseOperator> = plan.levels.iter().map(|l| l.a_n.as_operator()).collect();
    let orth = max_op_norm(
        (0..a_levels.len())
            .flat_map(|n| (0..a_levels.len()).filter(move |&m| m != n).map(move |m| (n, m)))
            .map(|(n, m)| a_levels[n].matmul(a_levels[m])),
    );
    push("orthogonal_levels", orth, FACT_TOL);

    let mut stated_gap: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    let mut decay: f64 = f64::NEG_INFINITY;
    let mut b_slack: f64 = f64::NEG_INFINITY;
    let mut z_gap: f64 = 0.0;
    let mut r_before = 0usize;
    for (m, level) in plan.levels.iter().enumerate() {
        let r_n = model.shape(m).num_blocks();
        let a_norm = op_norm(&level.a_n);
        let z_norm = op_norm(&level.z);
        stated_gap = stated_gap.max((a_norm - 0.5f64.powi((r_before + r_n + 1) as i32)).abs());
        let expected = 0.5f64.powi((r_before + 1) as i32).max(z_norm);
        max_gap = max_gap.max((a_norm - expected).abs());
        decay = decay.max(a_norm - 0.5f64.powi(m as i32 + 1));
        b_slack = b_slack.max(op_norm(&level.b_n) - 0.5f64.powi(2 * (m as i32 + 1) - 1));
        z_gap = z_gap.max((z_norm - z_norm_target(model, m)).abs());
        r_before += r_n;
    }
    push("a_norm_stated", stated_gap, FACT_TOL);
    push("a_norm_max", max_gap, FACT_TOL);
    push("a_norm_decay", decay, 1e-12);
    push("b_norm_slack", b_slack, 1e-12);
    push("z_norm", z_gap, FACT_TOL);

    let compression = max_op_norm(plan.levels.iter().enumerate().map(|(m, level)| {
        let outer = &identity - &level.p;
        let left = outer.matmul(&prefixes[m]);
        let right = prefixes[m].matmul(&outer);
        &left.matmul(&level.z).matmul(&right) - level.z.as_operator()
    }));
    push("corner_compression", compression, FACT_TOL);

    let e = model.block(0).unit(0, 0, 0);
    let rest = &identity - e;
    let two_a = plan.a().scale(2.0);
    let separation = op_norm(&rest.matmul(&two_a).matmul(&rest)) - 0.5;
    push("leading_separation", separation, FACT_TOL);
    let eigen = op_norm(&(&two_a.matmul(e) - e));
    push("leading_eigenvector", eigen, FACT_TOL);

    let pass = rows.iter().all(|r| r.pass);
    FactReport { rows, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraShape;
    use crate::tower::{build_tower, Mode, Recipe, TowerSpec};

    fn t1(n: usize) -> TowerModel {
        let shapes = vec![AlgebraShape::full(3), AlgebraShape::full(21)];
        build_tower(&TowerSpec::new(shapes, n, Mode::Strict, 7, Recipe::LeadingFactor)).unwrap()
    }

    fn is_projection(p: &DenseOperator) -> bool {
        (&p.matmul(p) - p).max_abs_entry() < 1e-12 && p.hermitian_defect() < 1e-12
    }

    #[test]
    fn corner_projection_examples() {
        let model = t1(1);
        let p1 = corner_projection(&model, 0);
        assert_eq!(&p1, model.block(0).unit(0, 2, 2));
        for m in 0..2 {
            let p = corner_projection(&model, m);
            assert!(is_projection(&p));
            assert!(p.matmul(model.block(m).unit(0, 0, 0)).is_zero());
        }

        let shape = AlgebraShape::new(vec![3, 4]).unwrap();
        let spec = TowerSpec::new(vec![shape], 1, Mode::Strict, 1, Recipe::LeadingFactor);
        let model = build_tower(&spec).unwrap();
        let p = corner_projection(&model, 0);
        assert_eq!(p, &model.block(0).unit(0, 2, 2).clone() + model.block(0).unit(1, 3, 3));
    }

    #[test]
    fn index_enumeration() {
        let model = t1(1);
        let (atoms, assignment) = enumerate_indices(&model, 1).unwrap();
        assert_eq!(atoms.len(), 9);
        assert_eq!(assignment.card, 9);
        // 1-based rows 2..=10.
        let rows: Vec<usize> = (0..9).map(|q| assignment.row(0, q) + 1).collect();
        assert_eq!(rows, (2..=10).collect::<Vec<_>>());
        for (q, atom) in atoms.iter().enumerate() {
            assert_eq!(lex_rank(&model, atom), q);
        }
        assert!(enumerate_indices(&model, 0).is_err());

        let two = t1(2);
        let (_, assignment) = enumerate_indices(&two, 1).unwrap();
        assert_eq!(assignment.starts, vec![1, 10]);
        assert_eq!(assignment.max_row() + 1, 20);
    }

    #[test]
    fn capacity_violation() {
        let shapes = vec![AlgebraShape::full(3), AlgebraShape::full(11)];
        let mut spec = TowerSpec::new(shapes, 1, Mode::Relaxed, 7, Recipe::LeadingFactor);
        assert!(build_tower(&spec).is_err());
        spec.shapes[1] = AlgebraShape::full(12);
        let model = build_tower(&spec).unwrap();
        assert!(enumerate_indices(&model, 1).is_ok());
    }

    #[test]
    fn conjugated_element_examples() {
        let model = t1(1);
        let atom = IndexAtom { rows: vec![(0, 0)], cols: vec![(0, 0)] };
        let alpha = conjugated_element(&model, &atom, model.identity(), 1).unwrap();
        assert_eq!(&alpha, model.block(0).unit(0, 2, 2));

        let y = witnesses(&model, 1).unwrap().approximants[0].clone();
        let (atoms, _) = enumerate_indices(&model, 1).unwrap();
        for atom in &atoms {
            let a = conjugated_element(&model, atom, &y, 1).unwrap();
            assert!(op_norm(&a) <= op_norm(&y) + 1e-12);
            let refl = conjugated_element(&model, &atom.reflected(), &y, 1).unwrap();
            assert!((&a.adjoint() - &refl).max_abs_entry() < 1e-13);
        }
        let not_commuting = model.block(1).unit(0, 0, 1).clone();
        assert!(conjugated_element(&model, &atom, &not_commuting, 1).is_err());
    }

    #[test]
    fn z_norms_on_t1() {
        let model = t1(1);
        let plan = construct(&model).unwrap();
        assert!((op_norm(&plan.levels[0].z) - 0.25).abs() < 1e-10);
        assert!((op_norm(&plan.levels[1].z) - 0.125).abs() < 1e-10);
        for level in &plan.levels {
            assert!(level.z.hermitian_defect() <= 1e-12);
            assert!(is_projection(&level.p));
        }
    }

    #[test]
    fn zero_witness_is_degenerate() {
        let model = t1(1);
        let mut w = witnesses(&model, 0).unwrap();
        w.approximants[0] = HermitianOperator::zeros(63);
        assert!(matches!(build_z(&model, &w, 0), Err(Error::DegenerateWitness { level: 1, .. })));
        let mut w = witnesses(&model, 1).unwrap();
        w.approximants[0] = HermitianOperator::zeros(63);
        assert!(matches!(build_z(&model, &w, 1), Err(Error::DegenerateWitness { level: 2, .. })));
    }

    #[test]
    fn generator_norms_on_t1() {
        let model = t1(1);
        let plan = construct(&model).unwrap();
        // The maximum over the block terms and z_n is 2^{-r_1-...-r_{n-1}-1}.
        assert!((op_norm(&plan.levels[0].a_n) - 0.5).abs() < 1e-10);
        assert!((op_norm(&plan.levels[1].a_n) - 0.25).abs() < 1e-10);
        assert!(op_norm(&plan.levels[0].b_n) <= 0.5 + 1e-12);
        assert!(op_norm(&plan.levels[1].b_n) <= 0.125 + 1e-12);
        assert!(plan.levels[0].a_n.matmul(&plan.levels[1].a_n).max_abs_entry() <= 1e-12);
        assert!(plan.a().hermitian_defect() <= 1e-12 && plan.b().hermitian_defect() <= 1e-12);
    }

    #[test]
    fn fact_report_on_t1() {
        for n in [1, 2] {
            let model = t1(n);
            let plan = construct(&model).unwrap();
            let report = verify_facts(&model, &plan);
            for name in ["F1", "F2", "F3", "orthogonal_levels", "corner_compression"] {
                assert!(report.row(name).unwrap().measured <= 1e-12, "{name}: {report:?}");
            }
            for name in ["a_norm_max", "a_norm_decay", "b_norm_slack", "z_norm", "leading_separation", "leading_eigenvector"] {
                assert!(report.row(name).unwrap().pass, "{name}: {report:?}");
            }
            assert!(!report.row("a_norm_stated").unwrap().pass);
            assert!(!report.pass);
        }
    }

    #[test]
    fn overlapping_rows_break_f1() {
        let model = t1(1);
        let w = witnesses(&model, 1).unwrap();
        let (_, mut assignment) = enumerate_indices(&model, 1).unwrap();
        // Last atom's partner row lands on the corner row 21.
        assignment.starts[0] = 21 - 1 - assignment.card;
        let (z, _) = build_z_with_assignment(&model, &w, 1, &assignment).unwrap();
        let p = corner_projection(&model, 1);
        assert!(op_norm(&p.matmul(&z)) > 0.01);
    }

    #[test]
    fn depth_one_plan() {
        let spec = TowerSpec::new(vec![AlgebraShape::full(3)], 1, Mode::Strict, 3, Recipe::LeadingFactor);
        let model = build_tower(&spec).unwrap();
        let plan = construct(&model).unwrap();
        assert_eq!(plan.depth(), 1);
        assert_eq!(plan.tail_bound, 0.5);
        let report = verify_facts(&model, &plan);
        assert!(report.row("F1").unwrap().pass);
    }
}
