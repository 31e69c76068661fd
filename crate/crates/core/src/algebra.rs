//! Finite-dimensional C*-algebra shapes `⊕_s M_{k_s}` and their matrix-unit
//! systems, stored as dense ambient matrices.
//!
//! Indices are 0-based in the Rust API: `unit(s, i, j)` is `e_{i+1, j+1}` of
//! block `s+1`. Serialized unit lists use 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{kron_with_cap, op_norm, DenseOperator, C64, DEFAULT_DIM_CAP};

/// Block sizes `[k_1, …, k_r]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraShape {
    blocks: Vec<usize>,
}

impl AlgebraShape {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("shape needs at least one block".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidInput(format!("block sizes must be positive: {blocks:?}")));
        }
        Ok(Self { blocks })
    }

    pub fn full(k: usize) -> Self {
        Self::new(vec![k]).expect("k must be positive")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, s: usize) -> usize {
        self.blocks[s]
    }

    /// Number of matrix units, `Σ k_s²`.
    pub fn unit_count(&self) -> usize {
        self.blocks.iter().map(|k| k * k).sum()
    }
}

impl TryFrom<Vec<usize>> for AlgebraShape {
    type Error = Error;
    fn try_from(blocks: Vec<usize>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<AlgebraShape> for Vec<usize> {
    fn from(shape: AlgebraShape) -> Self {
        shape.blocks
    }
}

/// `k_1 + ⋯ + k_r`.
pub fn rank(shape: &AlgebraShape) -> usize {
    shape.blocks.iter().sum()
}

/// `min{k_1, …, k_r}`.
pub fn subrank(shape: &AlgebraShape) -> usize {
    *shape.blocks.iter().min().expect("shape is nonempty")
}

/// Unital embedding `⊕_s M_{k_s} → M_k` with block `s` repeated `c_s` times.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitalEmbedding {
    shape: AlgebraShape,
    multiplicities: Vec<usize>,
    target_dim: usize,
}

impl UnitalEmbedding {
    pub fn new(shape: AlgebraShape, multiplicities: Vec<usize>, target_dim: usize) -> Result<Self> {
        if multiplicities.len() != shape.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: shape.num_blocks(),
                actual: multiplicities.len(),
            });
        }
        if multiplicities.contains(&0) {
            return Err(Error::InvalidInput("multiplicities must be positive".into()));
        }
        let total: usize = shape.blocks.iter().zip(&multiplicities).map(|(k, c)| k * c).sum();
        if total != target_dim {
            return Err(Error::DimensionMismatch { expected: target_dim, actual: total });
        }
        Ok(Self { shape, multiplicities, target_dim })
    }

    /// Multiplicity one in every block; target dimension is the rank.
    pub fn minimal(shape: &AlgebraShape) -> Self {
        let r = shape.num_blocks();
        Self { shape: shape.clone(), multiplicities: vec![1; r], target_dim: rank(shape) }
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Row offset of block `s` in the target.
    pub fn block_offset(&self, s: usize) -> usize {
        (0..s).map(|t| self.shape.blocks[t] * self.multiplicities[t]).sum()
    }
}

/// A family `{e_ij^{(s)}}` of ambient matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixUnitSystem {
    shape: AlgebraShape,
    ambient_dim: usize,
    // units[s][i * k_s + j]
    units: Vec<Vec<DenseOperator>>,
    unital: bool,
}

/// `(δ_adj, δ_unit, δ_mult)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitDefects {
    pub adjoint: f64,
    pub unit: f64,
    pub mult: f64,
}

impl UnitDefects {
    pub fn max(&self) -> f64 {
        self.adjoint.max(self.unit).max(self.mult)
    }
}

#[derive(Serialize, Deserialize)]
struct WireUnit {
    s: usize,
    i: usize,
    j: usize,
    matrix: DenseOperator,
}

impl MatrixUnitSystem {
    /// `units[s]` lists block `s` row-major, `k_s²` matrices.
    pub fn new(
        shape: AlgebraShape,
        ambient_dim: usize,
        units: Vec<Vec<DenseOperator>>,
        unital: bool,
    ) -> Result<Self> {
        if units.len() != shape.num_blocks() {
            return Err(Error::DimensionMismatch { expected: shape.num_blocks(), actual: units.len() });
        }
        for (s, block) in units.iter().enumerate() {
            let k = shape.block(s);
            if block.len() != k * k {
                return Err(Error::DimensionMismatch { expected: k * k, actual: block.len() });
            }
            if let Some(bad) = block.iter().find(|u| u.dim() != ambient_dim) {
                return Err(Error::DimensionMismatch { expected: ambient_dim, actual: bad.dim() });
            }
        }
        Ok(Self { shape, ambient_dim, units, unital })
    }

    pub fn from_fn(
        shape: &AlgebraShape,
        ambient_dim: usize,
        unital: bool,
        mut f: impl FnMut(usize, usize, usize) -> DenseOperator,
    ) -> Result<Self> {
        let units = (0..shape.num_blocks())
            .map(|s| {
                let k = shape.block(s);
                (0..k * k).map(|idx| f(s, idx / k, idx % k)).collect()
            })
            .collect();
        Self::new(shape.clone(), ambient_dim, units, unital)
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn set_unital(&mut self, unital: bool) {
        self.unital = unital;
    }

    pub fn unit(&self, s: usize, i: usize, j: usize) -> &DenseOperator {
        let k = self.shape.block(s);
        &self.units[s][i * k + j]
    }

    pub fn unit_mut(&mut self, s: usize, i: usize, j: usize) -> &mut DenseOperator {
        let k = self.shape.block(s);
        &mut self.units[s][i * k + j]
    }

    pub fn len(&self) -> usize {
        self.shape.unit_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All `(s, i, j, e_ij^{(s)})`, blocks in order, each row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, &DenseOperator)> {
        self.units.iter().enumerate().flat_map(move |(s, block)| {
            let k = self.shape.block(s);
            block.iter().enumerate().map(move |(idx, u)| (s, idx / k, idx % k, u))
        })
    }

    pub fn map(&self, mut f: impl FnMut(&DenseOperator) -> DenseOperator) -> Self {
        let units: Vec<Vec<DenseOperator>> = self.units.iter().map(|b| b.iter().map(&mut f).collect()).collect();
        Self { shape: self.shape.clone(), ambient_dim: units[0][0].dim(), units, unital: self.unital }
    }

    /// `Σ_s Σ_i e_ii^{(s)}`.
    pub fn diagonal_sum(&self) -> DenseOperator {
        let mut acc = DenseOperator::zeros(self.ambient_dim);
        for s in 0..self.shape.num_blocks() {
            for i in 0..self.shape.block(s) {
                acc += self.unit(s, i, i);
            }
        }
        acc
    }

    /// Replaces each unit `e` by `I_left ⊗ e ⊗ I_right`.
    pub fn lift(&self, left: usize, right: usize, cap: usize) -> Result<Self> {
        let l = DenseOperator::identity(left);
        let r = DenseOperator::identity(right);
        let mut units = Vec::with_capacity(self.units.len());
        for block in &self.units {
            let mut lifted = Vec::with_capacity(block.len());
            for u in block {
                let inner = if right == 1 { u.clone() } else { kron_with_cap(u, &r, cap)? };
                lifted.push(if left == 1 { inner } else { kron_with_cap(&l, &inner, cap)? });
            }
            units.push(lifted);
        }
        Ok(Self {
            shape: self.shape.clone(),
            ambient_dim: left * self.ambient_dim * right,
            units,
            unital: self.unital,
        })
    }

    /// Largest `‖a − b‖` over matching units.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape || self.ambient_dim != other.ambient_dim {
            return Err(Error::InvalidInput("unit systems have different shapes".into()));
        }
        Ok(self
            .iter()
            .zip(other.iter())
            .map(|((_, _, _, a), (_, _, _, b))| op_norm(&(a - b)))
            .fold(0.0, f64::max))
    }
}

impl Serialize for MatrixUnitSystem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let wire: Vec<WireUnit> = self
            .iter()
            .map(|(s, i, j, m)| WireUnit { s: s + 1, i: i + 1, j: j + 1, matrix: m.clone() })
            .collect();
        wire.serialize(serializer)
    }
}

/// Exact units of `embedding`: `e_ij^{(s)}` is `E_ij ⊗ I_{c_s}` placed in block `s`.
pub fn canonical_units(shape: &AlgebraShape, embedding: &UnitalEmbedding) -> Result<MatrixUnitSystem> {
    if embedding.shape() != shape {
        return Err(Error::InvalidInput(format!(
            "embedding is for shape {:?}, not {:?}",
            embedding.shape().blocks(),
            shape.blocks()
        )));
    }
    let dim = embedding.target_dim();
    if dim > DEFAULT_DIM_CAP {
        return Err(Error::DimensionOverflow { dim, cap: DEFAULT_DIM_CAP });
    }
    MatrixUnitSystem::from_fn(shape, dim, true, |s, i, j| {
        let c = embedding.multiplicities()[s];
        let offset = embedding.block_offset(s);
        let mut e = DenseOperator::zeros(dim);
        for t in 0..c {
            e.set(offset + i * c + t, offset + j * c + t, C64::new(1.0, 0.0));
        }
        e
    })
}

/// Lemma-style defects of a candidate unit family: adjoint pairing, unit
/// deficiency `‖Σ a_ii − I‖`, and the multiplicative table including
/// cross-block products.
pub fn unit_defects(candidate: &MatrixUnitSystem) -> UnitDefects {
    UnitDefects {
        adjoint: adjoint_defect(candidate),
        unit: op_norm(&(&candidate.diagonal_sum() - &DenseOperator::identity(candidate.ambient_dim))),
        mult: mult_defect(candidate),
    }
}

/// Defect against a generating set of the relations: adjoint pairing, the
/// ladder relations, `e_i1* e_i1 = e_11`, and the unit sum when unital.
/// Costs `O(len)` products where [`unit_defects`] costs `O(len²)`.
pub fn relation_defect(c: &MatrixUnitSystem) -> f64 {
    let mut worst = adjoint_defect(c).max(ladder_mult_defect(c));
    for s in 0..c.shape().num_blocks() {
        for i in 0..c.shape().block(s) {
            let e = c.unit(s, i, 0);
            worst = worst.max(op_norm(&(&e.adjoint().matmul(e) - c.unit(s, 0, 0))));
        }
    }
    if c.is_unital() {
        worst = worst.max(op_norm(&(&c.diagonal_sum() - &DenseOperator::identity(c.ambient_dim()))));
    }
    worst
}

pub(crate) fn adjoint_defect(c: &MatrixUnitSystem) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, i, j, a) in c.iter() {
        if j < i {
            continue;
        }
        let d = &a.adjoint() - c.unit(s, j, i);
        if d.frobenius_norm() > worst {
            worst = worst.max(op_norm(&d));
        }
    }
    worst
}

pub(crate) fn mult_defect(c: &MatrixUnitSystem) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, i, j, a) in c.iter() {
        for (s1, i1, j1, b) in c.iter() {
            let mut prod = a.matmul(b);
            if s == s1 && j == i1 {
                prod -= c.unit(s, i, j1);
            }
            if prod.frobenius_norm() > worst {
                worst = worst.max(op_norm(&prod));
            }
        }
    }
    worst
}

/// Multiplicative defect restricted to the relations a stabilizer pass
/// actually consumes: `a_i1 a_1j ≈ a_ij`, `a_ii a_i1 a_11 ≈ a_i1`, and
/// orthogonality of distinct diagonal units.
pub(crate) fn ladder_mult_defect(c: &MatrixUnitSystem) -> f64 {
    let mut worst: f64 = 0.0;
    let mut consider = |d: DenseOperator| {
        if d.frobenius_norm() > worst {
            worst = worst.max(op_norm(&d));
        }
    };
    let shape = c.shape().clone();
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        for i in 0..k {
            let ei1 = c.unit(s, i, 0);
            consider(&c.unit(s, i, i).matmul(ei1).matmul(c.unit(s, 0, 0)) - ei1);
            consider(&c.unit(s, i, i).matmul(c.unit(s, i, i)) - c.unit(s, i, i));
            for j in 0..k {
                consider(&ei1.matmul(c.unit(s, 0, j)) - c.unit(s, i, j));
            }
        }
    }
    let diag: Vec<&DenseOperator> = (0..shape.num_blocks())
        .flat_map(|s| (0..shape.block(s)).map(move |i| (s, i)))
        .map(|(s, i)| c.unit(s, i, i))
        .collect();
    for (x, p) in diag.iter().enumerate() {
        for q in &diag[x + 1..] {
            consider(p.matmul(q));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseOperator as D;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(b: &[usize]) -> AlgebraShape {
        AlgebraShape::new(b.to_vec()).unwrap()
    }

    /// Every product against the relation table, entrywise.
    fn brute_force_product_table(sys: &MatrixUnitSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for (s, i, j, a) in sys.iter() {
            worst = worst.max((&a.adjoint() - sys.unit(s, j, i)).max_abs_entry());
            for (s1, i1, j1, b) in sys.iter() {
                let prod = a.matmul(b);
                let expected = if s == s1 && j == i1 { sys.unit(s, i, j1).clone() } else { D::zeros(sys.ambient_dim()) };
                worst = worst.max((&prod - &expected).max_abs_entry());
            }
        }
        if sys.is_unital() {
            worst = worst.max((&sys.diagonal_sum() - &D::identity(sys.ambient_dim())).max_abs_entry());
        }
        worst
    }

    #[test]
    fn rank_and_subrank() {
        assert_eq!(rank(&shape(&[2, 3])), 5);
        assert_eq!(rank(&shape(&[3])), 3);
        assert_eq!(rank(&shape(&[2, 2, 2])), 6);
        assert_eq!(subrank(&shape(&[2, 3])), 2);
        assert_eq!(subrank(&shape(&[21])), 21);
        assert_eq!(subrank(&shape(&[5, 2, 9])), 2);
    }

    #[test]
    fn shape_validation() {
        assert!(AlgebraShape::new(vec![]).is_err());
        assert!(AlgebraShape::new(vec![2, 0]).is_err());
        assert!(serde_json::from_str::<AlgebraShape>("[2,3]").is_ok());
        assert!(serde_json::from_str::<AlgebraShape>("[]").is_err());
    }

    #[test]
    fn embedding_validation() {
        assert!(UnitalEmbedding::new(shape(&[2, 3]), vec![1, 1], 5).is_ok());
        assert!(matches!(
            UnitalEmbedding::new(shape(&[2, 3]), vec![1, 1], 6),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(UnitalEmbedding::new(shape(&[2, 3]), vec![1], 2).is_err());
    }

    #[test]
    fn canonical_m2_is_elementary() {
        let sh = shape(&[2]);
        let sys = canonical_units(&sh, &UnitalEmbedding::minimal(&sh)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(sys.unit(0, i, j), &D::elementary(2, i, j));
            }
        }
    }

    #[test]
    fn canonical_amplified() {
        let sh = shape(&[2]);
        let sys = canonical_units(&sh, &UnitalEmbedding::new(sh.clone(), vec![2], 4).unwrap()).unwrap();
        assert_eq!(sys.diagonal_sum(), D::identity(4));
        for (_, _, _, u) in sys.iter() {
            assert_eq!(crate::matrix::numerical_rank(u, 0.5), 2);
        }
    }

    #[test]
    fn canonical_product_tables_exhaustive() {
        for blocks in [vec![2, 3], vec![1], vec![3], vec![2, 2], vec![1, 2, 3]] {
            let sh = shape(&blocks);
            for c in 1..=3usize {
                let mult: Vec<usize> = (0..blocks.len()).map(|s| 1 + (s + c) % 3).collect();
                let target: usize = blocks.iter().zip(&mult).map(|(k, c)| k * c).sum();
                if target > 32 {
                    continue;
                }
                let emb = UnitalEmbedding::new(sh.clone(), mult, target).unwrap();
                let sys = canonical_units(&sh, &emb).unwrap();
                assert_eq!(brute_force_product_table(&sys), 0.0);
                assert!(unit_defects(&sys).max() <= 1e-15);
            }
        }
    }

    #[test]
    fn defects_of_perturbed_units_scale_with_perturbation() {
        let sh = shape(&[2, 3]);
        let exact = canonical_units(&sh, &UnitalEmbedding::minimal(&sh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-3;
        let noisy = exact.map(|u| {
            let noise = D::from_fn(u.dim(), |_, _| C64::new(rng.random_range(-eps..eps), rng.random_range(-eps..eps)));
            u + &noise.scale(std::f64::consts::FRAC_1_SQRT_2)
        });
        let d = unit_defects(&noisy);
        assert!(d.max() > 0.0);
        assert!(d.adjoint <= 10.0 * eps && d.unit <= 10.0 * eps && d.mult <= 10.0 * eps, "{d:?}");
    }

    #[test]
    fn dropped_diagonal_unit_has_unit_defect_one() {
        let sh = shape(&[3]);
        let mut sys = canonical_units(&sh, &UnitalEmbedding::minimal(&sh)).unwrap();
        *sys.unit_mut(0, 1, 1) = D::zeros(3);
        assert!((unit_defects(&sys).unit - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lift_preserves_relations() {
        let sh = shape(&[2]);
        let sys = canonical_units(&sh, &UnitalEmbedding::minimal(&sh)).unwrap();
        let lifted = sys.lift(3, 2, 4096).unwrap();
        assert_eq!(lifted.ambient_dim(), 12);
        assert_eq!(brute_force_product_table(&lifted), 0.0);
    }

    #[test]
    fn serialized_units_are_one_based() {
        let sh = shape(&[1]);
        let sys = canonical_units(&sh, &UnitalEmbedding::minimal(&sh)).unwrap();
        let json = serde_json::to_string(&sys).unwrap();
        assert_eq!(json, r#"[{"s":1,"i":1,"j":1,"matrix":{"dim":1,"entries":[[1.0,0.0]]}}]"#);
    }

    proptest! {
        #[test]
        fn rank_dominates_subrank(blocks in proptest::collection::vec(1usize..30, 1..6)) {
            let sh = AlgebraShape::new(blocks.clone()).unwrap();
            prop_assert!(rank(&sh) >= subrank(&sh));
            prop_assert_eq!(rank(&sh) == subrank(&sh), blocks.len() == 1);
        }
    }
}
