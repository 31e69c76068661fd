//! Truncated towers of mutually commuting finite-dimensional blocks, realized
//! as tensor factors of one ambient matrix algebra.
//!
//! Level `m` (1-based in reports, 0-based in the API) lives on factor
//! `M_{d_m}`, `d_m = Σ_s c_s k_s`. The ambient space is `⊗_m M_{d_m}` and
//! level-`m` units are `I ⊗ ⋯ ⊗ e ⊗ ⋯ ⊗ I`, so distinct levels commute exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::algebra::{canonical_units, rank, subrank, AlgebraShape, MatrixUnitSystem, UnitalEmbedding};
use crate::error::{Error, Result};
use crate::matrix::{kron_with_cap, op_norm, DenseOperator, HermitianOperator, C64, DEFAULT_DIM_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// Random Hermitian supported on the first tensor factor.
    LeadingFactor,
    /// Weighted Pauli words on the `M_2` factors of the first level.
    Uhf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSpec {
    pub shapes: Vec<AlgebraShape>,
    pub generators: usize,
    pub mode: Mode,
    pub seed: u64,
    pub recipe: Recipe,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<Vec<usize>>>,
}

impl TowerSpec {
    pub fn new(shapes: Vec<AlgebraShape>, generators: usize, mode: Mode, seed: u64, recipe: Recipe) -> Self {
        Self { shapes, generators, mode, seed, recipe, multiplicities: None }
    }

    pub fn depth(&self) -> usize {
        self.shapes.len()
    }

    /// Generators encoded at level `m` (0-based): `min(m + 1, n)`.
    pub fn active_generators(&self, m: usize) -> usize {
        (m + 1).min(self.generators)
    }

    pub fn embedding(&self, m: usize) -> Result<UnitalEmbedding> {
        let shape = &self.shapes[m];
        match &self.multiplicities {
            None => Ok(UnitalEmbedding::minimal(shape)),
            Some(all) => {
                let c = all.get(m).ok_or_else(|| {
                    Error::InvalidInput(format!("multiplicities missing for level {}", m + 1))
                })?;
                let dim = shape.blocks().iter().zip(c).map(|(k, c)| k * c).sum();
                UnitalEmbedding::new(shape.clone(), c.clone(), dim)
            }
        }
    }

    pub fn level_dims(&self) -> Result<Vec<usize>> {
        (0..self.depth()).map(|m| self.embedding(m).map(|e| e.target_dim())).collect()
    }

    /// Checks arity and the subrank growth condition for the spec's mode.
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::InvalidInput("tower needs at least one level".into()));
        }
        if self.generators == 0 {
            return Err(Error::InvalidInput("tower needs at least one generator".into()));
        }
        if let Some(all) = &self.multiplicities {
            if all.len() != self.depth() {
                return Err(Error::DimensionMismatch { expected: self.depth(), actual: all.len() });
            }
        }
        for m in 0..self.depth() {
            self.embedding(m)?;
        }
        match self.mode {
            Mode::Strict => strict_growth_check(&self.shapes),
            Mode::Relaxed => relaxed_growth_check(&self.shapes, self.generators),
        }
    }
}

/// `Π_{l<m} rank(B_l)²` for 0-based level `m`, i.e. the number of index atoms
/// feeding level `m`.
pub fn atom_count(shapes: &[AlgebraShape], m: usize) -> usize {
    shapes[..m].iter().map(|s| rank(s) * rank(s)).product()
}

/// Subrank required at 0-based level `m` under the literal growth rule:
/// 3 at the first level, `(m+1)·Π_{l<m} rank(B_l)² + 3` afterwards.
pub fn strict_required(shapes: &[AlgebraShape], m: usize) -> usize {
    if m == 0 {
        3
    } else {
        (m + 1) * atom_count(shapes, m) + 3
    }
}

/// Subrank needed for row capacity when only `min(m+1, n)` generators are
/// encoded at level `m`.
pub fn relaxed_required(shapes: &[AlgebraShape], m: usize, generators: usize) -> usize {
    if m == 0 {
        3
    } else {
        (m + 1).min(generators) * atom_count(shapes, m) + 3
    }
}

fn strict_growth_check(shapes: &[AlgebraShape]) -> Result<()> {
    for m in 0..shapes.len() {
        let required = strict_required(shapes, m);
        let have = subrank(&shapes[m]);
        if have < required {
            return Err(Error::StrictModeViolation { level: m + 1, subrank: have, required });
        }
    }
    Ok(())
}

fn relaxed_growth_check(shapes: &[AlgebraShape], generators: usize) -> Result<()> {
    for m in 0..shapes.len() {
        let required = relaxed_required(shapes, m, generators);
        let have = subrank(&shapes[m]);
        if have < required {
            return Err(Error::InsufficientSubrank { level: m + 1, subrank: have, required });
        }
    }
    Ok(())
}

/// A built tower: commuting exact unital blocks plus Hermitian generators.
#[derive(Clone, Debug)]
pub struct TowerModel {
    spec: TowerSpec,
    level_dims: Vec<usize>,
    blocks: Vec<MatrixUnitSystem>,
    generators: Vec<HermitianOperator>,
    identity: DenseOperator,
}

impl TowerModel {
    pub fn spec(&self) -> &TowerSpec {
        &self.spec
    }

    pub fn ambient_dim(&self) -> usize {
        self.identity.dim()
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn level_dims(&self) -> &[usize] {
        &self.level_dims
    }

    pub fn block(&self, m: usize) -> &MatrixUnitSystem {
        &self.blocks[m]
    }

    pub fn blocks(&self) -> &[MatrixUnitSystem] {
        &self.blocks
    }

    pub fn shape(&self, m: usize) -> &AlgebraShape {
        self.blocks[m].shape()
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    pub fn identity(&self) -> &DenseOperator {
        &self.identity
    }

    /// Replaces the generators; the count must stay the same.
    pub fn with_generators(mut self, generators: Vec<HermitianOperator>) -> Result<Self> {
        if generators.len() != self.generators.len() {
            return Err(Error::DimensionMismatch { expected: self.generators.len(), actual: generators.len() });
        }
        if let Some(bad) = generators.iter().find(|g| g.dim() != self.ambient_dim()) {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), actual: bad.dim() });
        }
        self.generators = generators;
        Ok(self)
    }
}

pub fn build_tower(spec: &TowerSpec) -> Result<TowerModel> {
    build_tower_with_cap(spec, DEFAULT_DIM_CAP)
}

pub fn build_tower_with_cap(spec: &TowerSpec, cap: usize) -> Result<TowerModel> {
    spec.validate()?;
    let level_dims = spec.level_dims()?;
    let dim = level_dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let mut blocks = Vec::with_capacity(spec.depth());
    for m in 0..spec.depth() {
        let local = canonical_units(&spec.shapes[m], &spec.embedding(m)?)?;
        let left: usize = level_dims[..m].iter().product();
        let right: usize = level_dims[m + 1..].iter().product();
        blocks.push(local.lift(left, right, cap)?);
    }
    let generators = match spec.recipe {
        Recipe::LeadingFactor => leading_factor_generators(spec, &level_dims)?,
        Recipe::Uhf => uhf_generators(spec, &level_dims)?,
    };
    Ok(TowerModel { spec: spec.clone(), level_dims, blocks, generators, identity: DenseOperator::identity(dim) })
}

/// `E(x) = Σ_s (1/k_s) Σ_ij e_ij x e_ji`, the trace-preserving conditional
/// expectation onto the commutant of a unital block.
pub fn commutant_projection(x: &HermitianOperator, block: &MatrixUnitSystem) -> Result<HermitianOperator> {
    Ok(commutant_projection_op(x, block)?.hermitian_part())
}

pub(crate) fn commutant_projection_op(x: &DenseOperator, block: &MatrixUnitSystem) -> Result<DenseOperator> {
    if x.dim() != block.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: block.ambient_dim(), actual: x.dim() });
    }
    let shape = block.shape();
    let mut acc = DenseOperator::zeros(x.dim());
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        let w = 1.0 / k as f64;
        for i in 0..k {
            for j in 0..k {
                let term = block.unit(s, i, j).matmul(&x.matmul(block.unit(s, j, i)));
                acc += &term.scale(w);
            }
        }
    }
    Ok(acc)
}

/// Per-level commuting approximants `y_j^{(m)} = E_m(x_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct CommutantWitness {
    pub level: usize,
    pub approximants: Vec<HermitianOperator>,
    pub distances: Vec<f64>,
}

/// Witnesses at 0-based level `m` for the first `min(m+1, n)` generators.
pub fn witnesses(model: &TowerModel, m: usize) -> Result<CommutantWitness> {
    let active = model.spec.active_generators(m);
    let mut approximants = Vec::with_capacity(active);
    let mut distances = Vec::with_capacity(active);
    for x in &model.generators[..active] {
        let y = commutant_projection(x, &model.blocks[m])?;
        distances.push(op_norm(&(x.as_operator() - y.as_operator())));
        approximants.push(y);
    }
    Ok(CommutantWitness { level: m + 1, approximants, distances })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelConditions {
    pub level: usize,
    pub subrank: usize,
    pub unitality_defect: f64,
    /// Max `‖[u, v]‖` against units of every other level.
    pub max_cross_commutator: f64,
    /// `"all-pairs"` or `"generators"` (bound scaled, see `cross_commutator`).
    pub commutator_method: String,
    pub strict_required: usize,
    pub strict_ok: bool,
    pub relaxed_required: usize,
    pub relaxed_ok: bool,
    pub distance_bound: f64,
    pub distances: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub mode: Mode,
    pub levels: Vec<LevelConditions>,
    /// Ordering indices between levels are implicit in the tensor layout.
    pub interleaving: String,
    pub pass: bool,
}

/// Above this many unit pairs the commutator check runs on the spanning set
/// `{e_{1j}, e_{j1}}` of each block and reports four times the measured maximum.
const ALL_PAIRS_LIMIT: usize = 5000;

pub fn check_conditions(model: &TowerModel) -> Result<ConditionReport> {
    let shapes = &model.spec.shapes;
    let mut levels = Vec::with_capacity(model.depth());
    for m in 0..model.depth() {
        let block = &model.blocks[m];
        let unitality_defect = op_norm(&(&block.diagonal_sum() - &model.identity));
        let mut max_cross_commutator: f64 = 0.0;
        let mut method = "all-pairs";
        for l in 0..model.depth() {
            if l == m {
                continue;
            }
            let (value, used) = cross_commutator(block, &model.blocks[l]);
            max_cross_commutator = max_cross_commutator.max(value);
            if used != "all-pairs" {
                method = used;
            }
        }
        let witness = witnesses(model, m)?;
        let distance_bound = 0.5f64.powi(m as i32 + 1);
        let sr = subrank(&shapes[m]);
        let strict_req = strict_required(shapes, m);
        let relaxed_req = relaxed_required(shapes, m, model.spec.generators);
        let growth_ok = match model.spec.mode {
            Mode::Strict => sr >= strict_req,
            Mode::Relaxed => sr >= relaxed_req,
        };
        let pass = unitality_defect <= 1e-12
            && max_cross_commutator <= 1e-12
            && growth_ok
            && witness.distances.iter().all(|&d| d < distance_bound);
        levels.push(LevelConditions {
            level: m + 1,
            subrank: sr,
            unitality_defect,
            max_cross_commutator,
            commutator_method: method.into(),
            strict_required: strict_req,
            strict_ok: sr >= strict_req,
            relaxed_required: relaxed_req,
            relaxed_ok: sr >= relaxed_req,
            distance_bound,
            distances: witness.distances,
            pass,
        });
    }
    let pass = levels.iter().all(|l| l.pass);
    Ok(ConditionReport {
        mode: model.spec.mode,
        levels,
        interleaving: "satisfied by construction (tensor factors)".into(),
        pass,
    })
}

/// Max commutator norm between two unit systems. Every unit is a product
/// `e_{i1} e_{1j}`, so `‖[e_ij, f]‖ ≤ 2·max_g ‖[g, f]‖` over that spanning set,
/// and applying this on both sides gives the factor 4.
fn cross_commutator(a: &MatrixUnitSystem, b: &MatrixUnitSystem) -> (f64, &'static str) {
    if a.len() * b.len() <= ALL_PAIRS_LIMIT {
        let mut worst: f64 = 0.0;
        for (_, _, _, u) in a.iter() {
            for (_, _, _, v) in b.iter() {
                let c = u.commutator(v);
                if c.frobenius_norm() > worst {
                    worst = worst.max(op_norm(&c));
                }
            }
        }
        return (worst, "all-pairs");
    }
    let span = |sys: &MatrixUnitSystem| -> Vec<DenseOperator> {
        sys.iter().filter(|(_, i, j, _)| *i == 0 || *j == 0).map(|(_, _, _, u)| u.clone()).collect()
    };
    let (ga, gb) = (span(a), span(b));
    let mut worst: f64 = 0.0;
    for u in &ga {
        for v in &gb {
            let c = u.commutator(v);
            if c.frobenius_norm() > worst {
                worst = worst.max(op_norm(&c));
            }
        }
    }
    (4.0 * worst, "generators")
}

/// Scale applied to the traceless-in-commutant part of each generator; below
/// 1/2 so the first level's distance condition holds with margin.
const SPREAD: f64 = 0.45;

fn generator_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64 + 1);
    rng
}

/// `μ·I + SPREAD·(H − E_1(H))/‖H − E_1(H)‖` on the first factor, padded with
/// identities. Distance to the level-1 commutant is exactly `SPREAD`; later
/// levels see an element of their commutant.
fn shape_generator(
    h: DenseOperator,
    first_block: &MatrixUnitSystem,
    mu: f64,
    rest: usize,
    cap: usize,
) -> Result<HermitianOperator> {
    let d1 = h.dim();
    let off = &h - &commutant_projection_op(&h, first_block)?;
    let norm = op_norm(&off);
    let spread = if norm > 1e-12 { off.scale(SPREAD / norm) } else { DenseOperator::zeros(d1) };
    let local = &DenseOperator::identity(d1).scale(mu) + &spread;
    let full = kron_with_cap(&local, &DenseOperator::identity(rest), cap)?;
    Ok(full.hermitian_part())
}

fn draw_mu(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = Uniform::new(0.2, 0.5).expect("valid range").sample(rng);
    if Uniform::new(0.0, 1.0).expect("valid range").sample(rng) < 0.5 {
        -magnitude
    } else {
        magnitude
    }
}

fn leading_factor_generators(spec: &TowerSpec, dims: &[usize]) -> Result<Vec<HermitianOperator>> {
    let d1 = dims[0];
    let rest: usize = dims[1..].iter().product();
    let first = canonical_units(&spec.shapes[0], &spec.embedding(0)?)?;
    (0..spec.generators)
        .map(|j| {
            let mut rng = generator_rng(spec.seed, j);
            let mut h = DenseOperator::zeros(d1);
            for r in 0..d1 {
                for c in r..d1 {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = if r == c { 0.0 } else { StandardNormal.sample(&mut rng) };
                    h.set(r, c, C64::new(re, im));
                    h.set(c, r, C64::new(re, -im));
                }
            }
            let mu = draw_mu(&mut rng);
            shape_generator(h, &first, mu, rest, DEFAULT_DIM_CAP)
        })
        .collect()
}

fn pauli(idx: usize) -> DenseOperator {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = match idx {
        0 => vec![one, z, z, one],
        1 => vec![z, one, one, z],
        2 => vec![z, -i, i, z],
        _ => vec![one, z, z, -one],
    };
    DenseOperator::from_row_major(2, entries).expect("2x2")
}

fn uhf_generators(spec: &TowerSpec, dims: &[usize]) -> Result<Vec<HermitianOperator>> {
    for (m, shape) in spec.shapes.iter().enumerate() {
        if shape.num_blocks() != 1 || !shape.block(0).is_power_of_two() || dims[m] != shape.block(0) {
            return Err(Error::InvalidInput(format!(
                "uhf recipe needs single full blocks of size 2^t with multiplicity 1; level {} is {:?}",
                m + 1,
                shape.blocks()
            )));
        }
    }
    let d1 = dims[0];
    let qubits = d1.trailing_zeros() as usize;
    let rest: usize = dims[1..].iter().product();
    let first = canonical_units(&spec.shapes[0], &spec.embedding(0)?)?;
    (0..spec.generators)
        .map(|j| {
            let mut rng = generator_rng(spec.seed, j);
            let mut h = DenseOperator::zeros(d1);
            for word in 1..4usize.pow(qubits as u32) {
                let weight: f64 = StandardNormal.sample(&mut rng);
                let mut term = DenseOperator::identity(1);
                let mut code = word;
                for _ in 0..qubits {
                    term = kron_with_cap(&term, &pauli(code % 4), DEFAULT_DIM_CAP)?;
                    code /= 4;
                }
                h += &term.scale(weight);
            }
            let mu = draw_mu(&mut rng);
            shape_generator(h, &first, mu, rest, DEFAULT_DIM_CAP)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shapes(list: &[&[usize]]) -> Vec<AlgebraShape> {
        list.iter().map(|b| AlgebraShape::new(b.to_vec()).unwrap()).collect()
    }

    fn spec(list: &[&[usize]], n: usize, mode: Mode) -> TowerSpec {
        TowerSpec::new(shapes(list), n, mode, 7, Recipe::LeadingFactor)
    }

    #[test]
    fn strict_examples() {
        let t1 = build_tower(&spec(&[&[3], &[21]], 2, Mode::Strict)).unwrap();
        assert_eq!(t1.ambient_dim(), 63);
        assert!(matches!(
            build_tower(&spec(&[&[2], &[2]], 1, Mode::Strict)),
            Err(Error::StrictModeViolation { level: 1, subrank: 2, required: 3 })
        ));
        assert!(matches!(
            build_tower(&spec(&[&[3], &[12]], 1, Mode::Strict)),
            Err(Error::StrictModeViolation { level: 2, subrank: 12, required: 21 })
        ));
        let relaxed = build_tower(&spec(&[&[3], &[12]], 1, Mode::Relaxed)).unwrap();
        assert_eq!(relaxed.ambient_dim(), 36);
    }

    #[test]
    fn relaxed_capacity_rule() {
        assert!(matches!(
            spec(&[&[3], &[11]], 1, Mode::Relaxed).validate(),
            Err(Error::InsufficientSubrank { level: 2, subrank: 11, required: 12 })
        ));
        assert!(spec(&[&[3], &[21]], 2, Mode::Relaxed).validate().is_ok());
        assert!(spec(&[&[3], &[20]], 2, Mode::Relaxed).validate().is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let s = spec(&[&[3], &[12], &[1299]], 1, Mode::Relaxed);
        assert!(matches!(build_tower(&s), Err(Error::DimensionOverflow { dim: 46764, .. })));
    }

    #[test]
    fn t1_conditions_hold() {
        let model = build_tower(&spec(&[&[3], &[21]], 1, Mode::Strict)).unwrap();
        let report = check_conditions(&model).unwrap();
        assert!(report.pass, "{report:?}");
        for level in &report.levels {
            assert!(level.unitality_defect <= 1e-12);
            assert!(level.max_cross_commutator <= 1e-12);
            assert_eq!(level.commutator_method, "all-pairs");
        }
        assert!((report.levels[0].distances[0] - SPREAD).abs() < 1e-12);
        assert!(report.levels[1].distances[0] < 1e-12);
        for g in model.generators() {
            assert!(op_norm(g) <= 1.0);
        }
    }

    #[test]
    fn generator_equal_to_unit_has_positive_distance() {
        let model = build_tower(&spec(&[&[3], &[21]], 1, Mode::Strict)).unwrap();
        let e11 = HermitianOperator::new(model.block(0).unit(0, 0, 0).clone()).unwrap();
        let model = model.with_generators(vec![e11]).unwrap();
        let w = witnesses(&model, 0).unwrap();
        // E(e_11) = I/3 on the first factor; ‖e_11 − I/3‖ = 2/3.
        assert!((w.distances[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(!check_conditions(&model).unwrap().pass);
    }

    #[test]
    fn scalar_generator_has_zero_distance() {
        let model = build_tower(&spec(&[&[3]], 1, Mode::Strict)).unwrap();
        let x = HermitianOperator::identity(3).scale(0.3);
        let model = model.with_generators(vec![x]).unwrap();
        let report = check_conditions(&model).unwrap();
        assert!(report.levels[0].distances[0] < 1e-15);
    }

    #[test]
    fn commutant_projection_examples() {
        let model = build_tower(&spec(&[&[3], &[21]], 1, Mode::Strict)).unwrap();
        let x = &model.generators()[0];
        let y = commutant_projection(x, model.block(0)).unwrap();
        for (_, _, _, u) in model.block(0).iter() {
            assert!(op_norm(&y.commutator(u)) <= 1e-12);
        }
        let yy = commutant_projection(&y, model.block(0)).unwrap();
        assert!(op_norm(&(yy.as_operator() - y.as_operator())) <= 1e-12);
        assert!(op_norm(&y) <= op_norm(x) + 1e-12);

        // x already in the level-2 commutant.
        let z = commutant_projection(x, model.block(1)).unwrap();
        assert!(op_norm(&(z.as_operator() - x.as_operator())) <= 1e-13);

        let full = AlgebraShape::full(4);
        let units = canonical_units(&full, &UnitalEmbedding::minimal(&full)).unwrap();
        let a = DenseOperator::from_fn(4, |i, j| C64::new((i + 2 * j) as f64, 0.0)).hermitian_part();
        let e = commutant_projection(&a, &units).unwrap();
        let expected = DenseOperator::identity(4).scale(a.trace().re / 4.0);
        assert!((e.as_operator() - &expected).max_abs_entry() < 1e-13);
    }

    #[test]
    fn recipes_are_deterministic() {
        let s = spec(&[&[3], &[21]], 2, Mode::Strict);
        let a = build_tower(&s).unwrap();
        let b = build_tower(&s).unwrap();
        assert_eq!(a.generators(), b.generators());
        assert_ne!(a.generators()[0], a.generators()[1]);
    }

    #[test]
    fn uhf_recipe() {
        let mut s = spec(&[&[4], &[32]], 1, Mode::Relaxed);
        s.recipe = Recipe::Uhf;
        let model = build_tower(&s).unwrap();
        assert_eq!(model.ambient_dim(), 128);
        let report = check_conditions(&model).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.levels[0].commutator_method, "generators");
        s.shapes = shapes(&[&[3], &[32]]);
        assert!(build_tower(&s).is_err());
    }

    #[test]
    fn multiplicities_amplify_factors() {
        let mut s = spec(&[&[3], &[12]], 1, Mode::Relaxed);
        s.multiplicities = Some(vec![vec![2], vec![1]]);
        let model = build_tower(&s).unwrap();
        assert_eq!(model.level_dims(), &[6, 12]);
        assert!(check_conditions(&model).unwrap().pass);
    }

    #[test]
    fn spec_config_round_trip() {
        let json = r#"{"shapes":[[3],[21]],"generators":1,"mode":"strict","seed":7,"recipe":"leading-factor"}"#;
        let s: TowerSpec = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), json);
        assert!(serde_json::from_str::<TowerSpec>(r#"{"shapes":[[3]],"generators":1,"mode":"strict","seed":7,"recipe":"leading-factor","extra":1}"#).is_err());
    }

    /// Growth formula written out directly from its definition.
    fn brute_strict(blocks: &[usize]) -> bool {
        if blocks[0] < 3 {
            return false;
        }
        for m in 1..blocks.len() {
            let mut product = 1usize;
            for &b in &blocks[..m] {
                product *= b * b;
            }
            if blocks[m] < (m + 1) * product + 3 {
                return false;
            }
        }
        true
    }

    proptest! {
        #[test]
        fn strict_predicate_matches_formula(blocks in proptest::collection::vec(1usize..=30, 1..=3)) {
            let sh: Vec<AlgebraShape> = blocks.iter().map(|&k| AlgebraShape::full(k)).collect();
            prop_assert_eq!(strict_growth_check(&sh).is_ok(), brute_strict(&blocks));
        }
    }
}
