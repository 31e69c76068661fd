//! The commuting-norm identity: for commuting `A₀` and `B = ⊕ M_{k_s}` with
//! every `k_s ≥ n`, `‖Σ_s Σ_ij a_ij e_ij^{(s)}‖ = ‖[a_ij]‖` for `a_ij ∈ A₀`.
//!
//! The model realizes `A₀ = M_d ⊗ I` and `B` as `I ⊗ B` on `C^d ⊗ C^{rank}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::algebra::{canonical_units, rank, subrank, AlgebraShape, MatrixUnitSystem, UnitalEmbedding};
use crate::error::{Error, Result};
use crate::matrix::{kron, op_norm, DenseOperator, C64, DEFAULT_DIM_CAP};

pub const NORM_IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CommutingModel {
    n: usize,
    a0_dim: usize,
    units: MatrixUnitSystem,
    seed: u64,
}

impl CommutingModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.units.ambient_dim()
    }

    pub fn a0_dim(&self) -> usize {
        self.a0_dim
    }

    /// Units of `B`, already padded to the ambient space.
    pub fn units(&self) -> &MatrixUnitSystem {
        &self.units
    }

    pub fn shape(&self) -> &AlgebraShape {
        self.units.shape()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `a ⊗ I`.
    pub fn pad(&self, a: &DenseOperator) -> Result<DenseOperator> {
        if a.dim() != self.a0_dim {
            return Err(Error::DimensionMismatch { expected: self.a0_dim, actual: a.dim() });
        }
        kron(a, &DenseOperator::identity(rank(self.shape())))
    }

    /// Largest `‖[a ⊗ I, e]‖` over the elementary matrices `a` of `M_d` and
    /// all units `e`.
    pub fn commutation_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.a0_dim {
            for j in 0..self.a0_dim {
                let a = self.pad(&DenseOperator::elementary(self.a0_dim, i, j))?;
                for (_, _, _, e) in self.units.iter() {
                    worst = worst.max(a.commutator(e).max_abs_entry());
                }
            }
        }
        Ok(worst)
    }
}

pub fn build_commuting_model(n: usize, shape: &AlgebraShape, d: usize, seed: u64) -> Result<CommutingModel> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    let sub = subrank(shape);
    if sub < n {
        return Err(Error::SubrankTooSmall { subrank: sub, n });
    }
    let base = canonical_units(shape, &UnitalEmbedding::minimal(shape))?;
    let units = base.lift(d, 1, DEFAULT_DIM_CAP)?;
    Ok(CommutingModel { n, a0_dim: d, units, seed })
}

/// One side-by-side evaluation of the identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// `max_s ‖[p_s a_ij]‖` with `p_s` the central projection of block `s`.
    pub rhs_central: f64,
    pub gap: f64,
    pub central_gap: f64,
    pub pass: bool,
}

fn block_matrix(entries: &[Vec<DenseOperator>]) -> DenseOperator {
    let n = entries.len();
    let d = entries[0][0].dim();
    DenseOperator::from_fn(n * d, |r, c| entries[r / d][c / d].get(r % d, c % d))
}

fn check_array(model: &CommutingModel, a: &[Vec<DenseOperator>]) -> Result<()> {
    let n = model.n;
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: a.len() });
    }
    for row in a {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: row.len() });
        }
        for x in row {
            if x.dim() != model.a0_dim {
                return Err(Error::DimensionMismatch { expected: model.a0_dim, actual: x.dim() });
            }
        }
    }
    Ok(())
}

/// Evaluates both sides for an `n × n` array of `d × d` matrices, each taken
/// as `a_ij ⊗ I ∈ A₀`.
pub fn check_norm_identity(model: &CommutingModel, a: &[Vec<DenseOperator>]) -> Result<NormIdentity> {
    check_array(model, a)?;
    let n = model.n;
    let padded: Vec<Vec<DenseOperator>> =
        a.iter().map(|row| row.iter().map(|x| model.pad(x)).collect::<Result<_>>()).collect::<Result<_>>()?;

    let mut sum = DenseOperator::zeros(model.ambient_dim());
    for s in 0..model.shape().num_blocks() {
        for i in 0..n {
            for j in 0..n {
                sum += &padded[i][j].matmul(model.units.unit(s, i, j));
            }
        }
    }
    let lhs = op_norm(&sum);
    let rhs = op_norm(&block_matrix(a));

    let mut rhs_central: f64 = 0.0;
    for s in 0..model.shape().num_blocks() {
        let mut p = DenseOperator::zeros(model.ambient_dim());
        for i in 0..model.shape().block(s) {
            p += model.units.unit(s, i, i);
        }
        let cut: Vec<Vec<DenseOperator>> = padded.iter().map(|row| row.iter().map(|x| p.matmul(x)).collect()).collect();
        rhs_central = rhs_central.max(op_norm(&block_matrix(&cut)));
    }

    let gap = (lhs - rhs).abs();
    let central_gap = (rhs_central - rhs).abs();
    Ok(NormIdentity { lhs, rhs, rhs_central, gap, central_gap, pass: gap <= NORM_IDENTITY_TOL && central_gap <= NORM_IDENTITY_TOL })
}

/// Seeded complex Gaussian `n × n` array of `d × d` matrices.
pub fn random_array(n: usize, d: usize, seed: u64) -> Vec<Vec<DenseOperator>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| DenseOperator::from_fn(d, |_, _| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormIdentityRow {
    pub seed: u64,
    pub shape: Vec<usize>,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub central_gap: f64,
    pub pass: bool,
}

/// Builds the model and a random array from `seed` and checks the identity.
pub fn norm_identity_run(n: usize, shape: &AlgebraShape, d: usize, seed: u64) -> Result<NormIdentityRow> {
    let model = build_commuting_model(n, shape, d, seed)?;
    let r = check_norm_identity(&model, &random_array(n, d, seed))?;
    Ok(NormIdentityRow {
        seed,
        shape: shape.blocks().to_vec(),
        n,
        lhs: r.lhs,
        rhs: r.rhs,
        gap: r.gap,
        central_gap: r.central_gap,
        pass: r.pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microstates::haar_unitary;
    use proptest::prelude::*;

    fn shape(b: &[usize]) -> AlgebraShape {
        AlgebraShape::new(b.to_vec()).unwrap()
    }

    #[test]
    fn build_examples() {
        let m = build_commuting_model(2, &shape(&[2]), 2, 0).unwrap();
        assert_eq!(m.ambient_dim(), 4);
        assert!(m.commutation_defect().unwrap() <= 1e-13);
        assert!(matches!(
            build_commuting_model(2, &shape(&[1, 3]), 2, 0),
            Err(Error::SubrankTooSmall { subrank: 1, n: 2 })
        ));
        assert!(build_commuting_model(1, &shape(&[2]), 2, 0).is_err());
        let m = build_commuting_model(3, &shape(&[3, 4]), 3, 0).unwrap();
        assert_eq!(m.ambient_dim(), 21);
        assert!(m.commutation_defect().unwrap() <= 1e-13);
    }

    #[test]
    fn scalar_entries_reduce_to_numeric_norm() {
        let m = build_commuting_model(2, &shape(&[2, 3]), 2, 0).unwrap();
        let lam = [[1.0, 2.0], [0.5, -1.0]];
        let a: Vec<Vec<_>> = lam.iter().map(|row| row.iter().map(|&l| DenseOperator::identity(2).scale(l)).collect()).collect();
        let r = check_norm_identity(&m, &a).unwrap();
        // Largest singular value of [[1, 2], [0.5, -1]].
        let t: f64 = 1.0 + 4.0 + 0.25 + 1.0;
        let det: f64 = -1.0 - 1.0;
        let expected = ((t + (t * t - 4.0 * det * det).sqrt()) / 2.0).sqrt();
        assert!((r.lhs - expected).abs() <= 1e-12 && (r.rhs - expected).abs() <= 1e-12, "{r:?}");
    }

    #[test]
    fn identity_array_has_norm_one() {
        let m = build_commuting_model(3, &shape(&[3]), 2, 0).unwrap();
        let a: Vec<Vec<_>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { DenseOperator::identity(2) } else { DenseOperator::zeros(2) }).collect())
            .collect();
        let r = check_norm_identity(&m, &a).unwrap();
        assert!((r.lhs - 1.0).abs() <= 1e-12 && (r.rhs - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn wrong_array_sizes() {
        let m = build_commuting_model(2, &shape(&[2]), 2, 0).unwrap();
        assert!(matches!(check_norm_identity(&m, &random_array(3, 2, 0)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(check_norm_identity(&m, &random_array(2, 3, 0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn random_arrays_on_mixed_shape() {
        for seed in 0..100 {
            let row = norm_identity_run(2, &shape(&[2, 3]), 2, seed).unwrap();
            assert!(row.pass, "{row:?}");
        }
    }

    #[test]
    fn all_small_shapes() {
        for b in [&[2][..], &[3], &[2, 3]] {
            for n in [2, 3] {
                if subrank(&shape(b)) < n {
                    continue;
                }
                for seed in 0..20 {
                    assert!(norm_identity_run(n, &shape(b), 2, seed).unwrap().pass);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn invariant_under_a0_conjugation(seed in 0u64..1000) {
            let m = build_commuting_model(2, &shape(&[2, 3]), 3, seed).unwrap();
            let a = random_array(2, 3, seed);
            let u = haar_unitary(3, seed + 7).unwrap();
            let b: Vec<Vec<_>> = a.iter().map(|row| row.iter().map(|x| u.adjoint().matmul(x).matmul(&u)).collect()).collect();
            let ra = check_norm_identity(&m, &a).unwrap();
            let rb = check_norm_identity(&m, &b).unwrap();
            prop_assert!((ra.lhs - rb.lhs).abs() <= 1e-10);
            prop_assert!((ra.rhs - rb.rhs).abs() <= 1e-10);
        }
    }
}
