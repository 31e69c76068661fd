//! Turns approximate matrix units into exact ones nearby: spectral
//! projections of the diagonal, sequential orthogonalization, then a polar
//! ladder through the first column.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::{relation_defect, unit_defects, MatrixUnitSystem};
use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, op_norm, polar_partial_isometry, spectral_projection, DenseOperator, C64};

/// Systems with more units than this are prechecked with the ladder
/// relations instead of the full product table.
pub const FULL_DEFECT_LIMIT: usize = 200;
pub const ADMISSIBLE_DEFECT: f64 = 0.1;
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilizeParams {
    pub projection_threshold: f64,
    pub isometry_cutoff: f64,
    /// When false the returned distance is NaN (not measured).
    pub max_distance_report: bool,
}

impl Default for StabilizeParams {
    fn default() -> Self {
        Self { projection_threshold: 0.5, isometry_cutoff: 0.5, max_distance_report: true }
    }
}

impl StabilizeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("projection_threshold", self.projection_threshold), ("isometry_cutoff", self.isometry_cutoff)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Coarse admissibility of a candidate. Unit deficiency only counts for
/// unital candidates.
pub fn admissibility_defect(c: &MatrixUnitSystem) -> f64 {
    if c.len() <= FULL_DEFECT_LIMIT {
        let d = unit_defects(c);
        let unit = if c.is_unital() { d.unit } else { 0.0 };
        d.adjoint.max(d.mult).max(unit)
    } else {
        relation_defect(c)
    }
}

fn failed(what: &str, e: Error) -> Error {
    Error::StabilizationFailed(format!("{what}: {e}"))
}

/// Exact matrix units near `candidate` and `max ‖a_ij − e_ij‖`.
pub fn stabilize_units(candidate: &MatrixUnitSystem, params: &StabilizeParams) -> Result<(MatrixUnitSystem, f64)> {
    params.validate()?;
    if relation_defect(candidate) <= EXACT_TOL {
        let dist = if params.max_distance_report { 0.0 } else { f64::NAN };
        return Ok((candidate.clone(), dist));
    }
    let admissibility = admissibility_defect(candidate);
    if admissibility > ADMISSIBLE_DEFECT {
        return Err(Error::StabilizationFailed(format!(
            "input defect {admissibility:.3e} exceeds {ADMISSIBLE_DEFECT}"
        )));
    }
    let d = candidate.ambient_dim();
    let shape = candidate.shape().clone();
    let identity = DenseOperator::identity(d);
    let threshold = params.projection_threshold;

    // (1)+(2): spectral projections of the diagonal, orthogonalized in order.
    let mut used = DenseOperator::zeros(d);
    let mut diag: Vec<Vec<DenseOperator>> = Vec::with_capacity(shape.num_blocks());
    for s in 0..shape.num_blocks() {
        let mut block = Vec::with_capacity(shape.block(s));
        for i in 0..shape.block(s) {
            let p = spectral_projection(&candidate.unit(s, i, i).hermitian_part(), threshold)
                .map_err(|e| failed(&format!("diagonal unit ({}, {})", s + 1, i + 1), e))?;
            let rest = &identity - &used;
            let q = spectral_projection(&rest.matmul(&p).matmul(&rest).hermitian_part(), threshold)
                .map_err(|e| failed(&format!("orthogonalizing ({}, {})", s + 1, i + 1), e))?;
            used += &q;
            block.push(q);
        }
        diag.push(block);
    }
    // (3)
    if candidate.is_unital() {
        let deficiency = &identity - &used;
        let last = diag.last_mut().and_then(|b| b.last_mut()).expect("nonempty shape");
        *last += &deficiency;
        *last = last.hermitian_part().into_operator();
    }

    // (4)+(5)
    let mut units: Vec<Vec<DenseOperator>> = Vec::with_capacity(shape.num_blocks());
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        let q11 = &diag[s][0];
        let r = rank_of_projection(q11);
        let mut column = vec![q11.clone()];
        for i in 1..k {
            let qii = &diag[s][i];
            if rank_of_projection(qii) != r {
                return Err(Error::StabilizationFailed(format!(
                    "block {}: diagonal units 1 and {} have ranks {} and {}",
                    s + 1,
                    i + 1,
                    r,
                    rank_of_projection(qii)
                )));
            }
            let v = polar_partial_isometry(&qii.matmul(candidate.unit(s, i, 0)).matmul(q11), params.isometry_cutoff)?;
            let vr = numerical_rank(&v, 0.5);
            if vr != r {
                return Err(Error::StabilizationFailed(format!(
                    "block {}: unit ({}, 1) keeps rank {} of {} above the isometry cutoff",
                    s + 1,
                    i + 1,
                    vr,
                    r
                )));
            }
            column.push(v);
        }
        let mut block = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                block.push(match (i, j) {
                    _ if i == j => diag[s][i].clone(),
                    (_, 0) => column[i].clone(),
                    (0, _) => column[j].adjoint(),
                    _ => column[i].matmul(&column[j].adjoint()),
                });
            }
        }
        units.push(block);
    }
    let exact = MatrixUnitSystem::new(shape, d, units, candidate.is_unital())?;
    let dist = if params.max_distance_report { exact.distance(candidate)? } else { f64::NAN };
    Ok((exact, dist))
}

fn rank_of_projection(p: &DenseOperator) -> usize {
    p.trace().re.round() as usize
}

/// Adds a seeded perturbation of operator norm exactly `delta` to each unit,
/// with `a_ji = a_ij*` preserved.
pub fn perturb_units(units: &MatrixUnitSystem, delta: f64, seed: u64) -> Result<MatrixUnitSystem> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("perturbation size must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(units.clone());
    }
    let d = units.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = units.clone();
    let shape = units.shape().clone();
    for s in 0..shape.num_blocks() {
        let k = shape.block(s);
        for i in 0..k {
            for j in i..k {
                let mut g = DenseOperator::from_fn(d, |_, _| {
                    C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
                });
                if i == j {
                    g = g.hermitian_part().into_operator();
                }
                let n = op_norm(&g);
                let g = g.scale(delta / n);
                *out.unit_mut(s, i, j) += &g;
                if i != j {
                    *out.unit_mut(s, j, i) += &g.adjoint();
                }
            }
        }
    }
    Ok(out)
}
