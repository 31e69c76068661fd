//! Dispatch from a command and a config to a report.

use std::collections::HashMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use adiv_core::algebra::{canonical_units, relation_defect, subrank, unit_defects, AlgebraShape, MatrixUnitSystem, UnitalEmbedding};
use adiv_core::generator::{construct, verify_facts, GeneratorPlan};
use adiv_core::matrix::{op_norm, DenseOperator, C64};
use adiv_core::microstates::{
    as_tuples, check_unitary_bounds, circle_net_oracle, compression_defect, compression_dimension,
    enumerate_multiplicities, greedy_packing, haar_samples, synthetic_block_tuple,
};
use adiv_core::recovery::{distance_to_span, round_trip, subalgebra_closure, MAX_SQUARINGS};
use adiv_core::similarity::{norm_identity_run, NORM_IDENTITY_TOL};
use adiv_core::stabilizer::{perturb_units, stabilize_units, FULL_DEFECT_LIMIT};
use adiv_core::tower::{build_tower, check_conditions, Mode, TowerModel};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{ClosureConfig, RunConfig};
use crate::error::{Context, RunError};
use crate::presets::find_preset;
use crate::report::{Relation, Row, RunReport};

/// Tolerance of the exact construction identities.
pub const IDENTITY_TOL: f64 = 1e-12;
pub const UNIT_ROUND_TRIP_TOL: f64 = 1e-6;
pub const WITNESS_ROUND_TRIP_TOL: f64 = 1e-8;
pub const LEADING_TOL: f64 = 1e-8;
pub const DISTANCE_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    TowerBuild,
    TowerCheck,
    GenConstruct,
    GenVerify,
    Recover,
    StabilizeSweep,
    CoverEstimate,
    CountingCheck,
    Lemma52Check,
    All,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::TowerBuild,
        Command::TowerCheck,
        Command::GenConstruct,
        Command::GenVerify,
        Command::Recover,
        Command::StabilizeSweep,
        Command::CoverEstimate,
        Command::CountingCheck,
        Command::Lemma52Check,
        Command::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::TowerBuild => "tower-build",
            Command::TowerCheck => "tower-check",
            Command::GenConstruct => "gen-construct",
            Command::GenVerify => "gen-verify",
            Command::Recover => "recover",
            Command::StabilizeSweep => "stabilize-sweep",
            Command::CoverEstimate => "cover-estimate",
            Command::CountingCheck => "counting-check",
            Command::Lemma52Check => "lemma52-check",
            Command::All => "all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| RunError::ConfigInvalid { path: "command".into(), message: format!("unknown command `{s}`") })
    }
}

/// Runs `command`, writes the report to `out` when given, and returns it.
/// Failures of any kind end up in the report with `pass = false`.
pub fn run(command: Command, config: &RunConfig, out: Option<&Path>) -> RunReport {
    let echo = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    let mut report = RunReport::new(command.name(), echo);
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        check_command(command, config)?;
        config.validate()?;
        dispatch(command, config, &mut report)
    }));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => report.fail(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            report.fail(RunError::Internal(msg).to_string());
        }
    }
    report.timing.insert("total".into(), start.elapsed().as_secs_f64());
    report.finish();
    if let Some(path) = out {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            report.fail(RunError::Io { path: path.display().to_string(), source: e }.to_string());
            report.finish();
        }
    }
    report
}

/// Report for a config that could not be parsed at all.
pub fn error_report(command: Command, error: &RunError) -> RunReport {
    let mut report = RunReport::new(command.name(), serde_json::Value::Null);
    report.fail(error.to_string());
    report.finish();
    report
}

fn check_command(command: Command, config: &RunConfig) -> Result<(), RunError> {
    match &config.command {
        Some(name) if name != command.name() => Err(RunError::ConfigInvalid {
            path: "command".into(),
            message: format!("config is for `{name}`, invoked as `{command}`"),
        }),
        _ => Ok(()),
    }
}

fn timed<T>(report: &mut RunReport, key: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let value = f();
    report.timing.insert(key.into(), start.elapsed().as_secs_f64());
    value
}

fn dispatch(command: Command, config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    match command {
        Command::TowerBuild => tower_build(config, report),
        Command::TowerCheck => tower_check(config, report),
        Command::GenConstruct => gen_construct(config, report),
        Command::GenVerify => gen_verify(config, report),
        Command::Recover => recover(config, report),
        Command::StabilizeSweep => stabilize_sweep(config, report),
        Command::CoverEstimate => cover_estimate(config, report),
        Command::CountingCheck => counting_check(config, report),
        Command::Lemma52Check => lemma52_check(config, report),
        Command::All => all(config, report),
    }
}

fn model_of(config: &RunConfig, report: &mut RunReport) -> Result<TowerModel, RunError> {
    let spec = config.tower_spec()?;
    timed(report, "build", || build_tower(&spec)).context("building tower")
}

fn plan_of(model: &TowerModel, report: &mut RunReport) -> Result<GeneratorPlan, RunError> {
    timed(report, "construct", || construct(model)).context("constructing generators")
}

fn tower_build(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let model = model_of(config, report)?;
    report.detail("ambient_dim", model.ambient_dim());
    report.detail("level_dims", model.level_dims());
    for (m, block) in model.blocks().iter().enumerate() {
        let n = m + 1;
        // The full product table is quadratic in the unit count; past the
        // limit the generating relations are checked instead.
        let defect = if block.len() <= FULL_DEFECT_LIMIT { unit_defects(block).max() } else { relation_defect(block) };
        report.push(Row::at_most(format!("level{n}.unit_defect"), defect, IDENTITY_TOL));
        let sum = &block.diagonal_sum() - model.identity();
        report.push(Row::at_most(format!("level{n}.unitality"), op_norm(&sum), IDENTITY_TOL));
    }
    Ok(())
}

fn tower_check(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let model = model_of(config, report)?;
    let conditions = timed(report, "check", || check_conditions(&model)).context("checking tower conditions")?;
    for level in &conditions.levels {
        let n = level.level;
        report.push(Row::at_most(format!("level{n}.unitality"), level.unitality_defect, IDENTITY_TOL));
        report.push(Row::at_most(format!("level{n}.cross_commutator"), level.max_cross_commutator, IDENTITY_TOL));
        let required = match conditions.mode {
            Mode::Strict => level.strict_required,
            Mode::Relaxed => level.relaxed_required,
        };
        report.push(Row::at_least(format!("level{n}.subrank"), level.subrank as f64, required as f64));
        let worst = level.distances.iter().copied().fold(0.0, f64::max);
        report.push(Row::new(format!("level{n}.witness_distance"), worst, Relation::Below, level.distance_bound));
    }
    report.detail("conditions", &conditions);
    Ok(())
}

fn gen_construct(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let model = model_of(config, report)?;
    let plan = plan_of(&model, report)?;
    let a_bound = 0.5;
    let b_bound: f64 = (1..=plan.depth()).map(|n| 0.5f64.powi(2 * n as i32 - 1)).sum();
    report.push(Row::at_most("a_norm", op_norm(plan.a()), a_bound + IDENTITY_TOL));
    report.push(Row::at_most("b_norm", op_norm(plan.b()), b_bound + IDENTITY_TOL));
    let facts = verify_facts(&model, &plan);
    for name in ["F1", "F2", "F3", "z_norm"] {
        if let Some(r) = facts.row(name) {
            report.push(Row::at_most(name, r.measured, r.threshold));
        }
    }
    #[derive(Serialize)]
    struct LevelSummary {
        level: usize,
        c: f64,
        z_norm: f64,
        a_norm: f64,
        b_norm: f64,
    }
    let levels: Vec<LevelSummary> = plan
        .levels
        .iter()
        .enumerate()
        .map(|(m, l)| LevelSummary { level: m + 1, c: l.c, z_norm: op_norm(&l.z), a_norm: op_norm(&l.a_n), b_norm: op_norm(&l.b_n) })
        .collect();
    report.detail("levels", levels);
    report.detail("tail_bound", plan.tail_bound);
    Ok(())
}

/// Thresholds for the construction identities: `IDENTITY_TOL` for the exact
/// identities, the module's own tolerance for the norm comparisons.
fn fact_threshold(name: &str, module: f64) -> f64 {
    match name {
        "F1" | "F2" | "F3" | "orthogonal_levels" | "corner_compression" | "b_norm_slack" | "a_norm_decay" => IDENTITY_TOL,
        _ => module,
    }
}

fn gen_verify(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let model = model_of(config, report)?;
    let plan = plan_of(&model, report)?;
    let facts = timed(report, "facts", || verify_facts(&model, &plan));
    for r in &facts.rows {
        let row = Row::at_most(r.name.clone(), r.measured, fact_threshold(&r.name, r.threshold));
        // The closed form as usually quoted is off by the factor 2^{r_n}; the
        // maximum it is derived from is checked as `a_norm_max`.
        report.push(if r.name == "a_norm_stated" { row.informational() } else { row });
    }
    round_trip_rows(&model, &plan, "recovery.", report)
}

fn round_trip_rows(model: &TowerModel, plan: &GeneratorPlan, prefix: &str, report: &mut RunReport) -> Result<(), RunError> {
    let rt = timed(report, "round_trip", || round_trip(model, plan)).context("recovering from (a, b)")?;
    report.push(Row::at_most(format!("{prefix}unit_residual"), rt.max_unit_residual(), UNIT_ROUND_TRIP_TOL));
    report.push(Row::at_most(format!("{prefix}z_residual"), rt.max_z_residual(), UNIT_ROUND_TRIP_TOL));
    report.push(Row::at_most(format!("{prefix}witness_residual"), rt.max_witness_residual(), WITNESS_ROUND_TRIP_TOL));
    report.push(Row::at_most(format!("{prefix}squarings"), rt.max_squarings as f64, MAX_SQUARINGS as f64));
    report.push(Row::at_most(format!("{prefix}squaring_residual"), rt.trace.max_residual("leading-projection"), LEADING_TOL));
    report.push(Row::at_most(format!("{prefix}leading_residual"), rt.leading_residual, LEADING_TOL));
    report.detail(&format!("{prefix}unit_residual_by_level"), &rt.unit_residual);
    report.detail(&format!("{prefix}trace"), &rt.trace);
    Ok(())
}

fn recover(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let model = model_of(config, report)?;
    let plan = plan_of(&model, report)?;
    round_trip_rows(&model, &plan, "", report)?;
    if let Some(closure) = &config.closure {
        closure_rows(&model, &plan, closure, report)?;
    }
    Ok(())
}

fn closure_rows(model: &TowerModel, plan: &GeneratorPlan, cfg: &ClosureConfig, report: &mut RunReport) -> Result<(), RunError> {
    let generators = [plan.a().as_operator().clone(), plan.b().as_operator().clone()];
    let span = timed(report, "closure_ab", || subalgebra_closure(&generators, cfg.word_cap, cfg.tol)).context("closure of {a, b}")?;
    let bound = 0.5f64.powi(model.depth() as i32) + DISTANCE_SLACK;
    for (j, x) in model.generators().iter().enumerate() {
        let (_, op_bound) = distance_to_span(x, &span).context("distance to closure")?;
        report.push(Row::at_most(format!("closure.distance_x{}", j + 1), op_bound, bound));
    }
    report.push(Row::at_most("closure.orthonormality", span.orthonormality_defect(), 1e-8));
    report.detail("closure.dim_ab", span.len());
    report.detail("closure.max_word_length_ab", span.max_word_length());
    if cfg.compare_units {
        let mut seeds: Vec<DenseOperator> = vec![model.identity().clone()];
        for block in model.blocks() {
            seeds.extend(block.iter().map(|(_, _, _, e)| e.clone()));
        }
        seeds.extend(plan.levels.iter().map(|l| l.z.as_operator().clone()));
        let reference = timed(report, "closure_units", || subalgebra_closure(&seeds, cfg.word_cap, cfg.tol))
            .context("closure of {units, z, I}")?;
        let gap = (span.len() as f64 - reference.len() as f64).abs();
        report.push(Row::new("closure.dim_gap", gap, Relation::Equal, 0.0));
        report.detail("closure.dim_units", reference.len());
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn stabilize_sweep(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let cfg = &config.stabilize;
    let shape = AlgebraShape::new(cfg.shape.clone()).context("stabilize.shape")?;
    let dim = shape.blocks().iter().zip(&cfg.multiplicities).map(|(k, c)| k * c).sum();
    let embedding = UnitalEmbedding::new(shape.clone(), cfg.multiplicities.clone(), dim).context("stabilize.multiplicities")?;
    let exact = canonical_units(&shape, &embedding).context("canonical units")?;

    let (fixed, _) = stabilize_units(&exact, &cfg.params).context("stabilizing exact units")?;
    report.push(Row::new("fixed_point", max_unit_gap(&fixed, &exact), Relation::Equal, 0.0));

    let base = config.base_seed();
    let mut worst_defect: f64 = 0.0;
    let mut medians = Vec::new();
    let start = Instant::now();
    for &delta in &cfg.deltas {
        let mut distances = Vec::new();
        for i in 0..cfg.seeds {
            let seed = base.wrapping_add(i);
            let candidate = perturb_units(&exact, delta, seed).context("perturbing units")?;
            let (out, dist) = stabilize_units(&candidate, &cfg.params).context(format!("stabilizing at delta {delta:e}, seed {seed}"))?;
            worst_defect = worst_defect.max(unit_defects(&out).max());
            distances.push(dist);
        }
        medians.push(median(distances));
    }
    report.timing.insert("sweep".into(), start.elapsed().as_secs_f64());
    report.push(Row::at_most("output_defect", worst_defect, IDENTITY_TOL));
    let mut order = cfg.deltas.iter().copied().zip(medians.iter().copied()).collect::<Vec<_>>();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let drop = order.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
    report.push(Row::at_most("median_distance_drop", drop, 0.0));
    #[derive(Serialize)]
    struct DeltaRow {
        delta: f64,
        median_distance: f64,
    }
    report.detail("medians", order.iter().map(|&(delta, median_distance)| DeltaRow { delta, median_distance }).collect::<Vec<_>>());
    Ok(())
}

fn max_unit_gap(a: &MatrixUnitSystem, b: &MatrixUnitSystem) -> f64 {
    a.iter().zip(b.iter()).map(|((_, _, _, x), (_, _, _, y))| (x - y).max_abs_entry()).fold(0.0, f64::max)
}

fn cover_estimate(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let cfg = &config.cover;
    let k = cfg.k;
    let cloud = timed(report, "sampling", || haar_samples(k, cfg.samples, config.base_seed())).context("sampling Haar unitaries")?;
    let cloud = as_tuples(&cloud);
    let mut statuses = Vec::new();
    for omega in cfg.omega.values() {
        let lower = (1.0 / omega).powi((k * k) as i32);
        if k == 1 {
            let exact = circle_net_oracle(cfg.grid, omega).context("circle net count")?;
            report.push(Row::at_least(format!("omega={omega}.net_lower"), exact as f64, lower));
        }
        // Points 2ω apart cannot share a ball of radius below ω.
        let estimate = greedy_packing(&cloud, 2.0 * omega).context("packing")?;
        report.push(Row::at_least(format!("omega={omega}.sampled_lower"), estimate.implied_cover_lower as f64, lower));
        let bounds = check_unitary_bounds(k, omega, &estimate);
        let over = bounds.log_cover_lower.max(bounds.log_greedy_cover) - bounds.log_bound_upper;
        report.push(Row::at_most(format!("omega={omega}.upper_log_slack"), over, 0.0));
        statuses.push((omega, estimate, bounds));
    }
    report.detail("estimates", statuses);
    Ok(())
}

/// Real dimension of the pinched Hermitian matrices, by rank.
fn pinched_rank(units: &MatrixUnitSystem) -> usize {
    let k = units.ambient_dim();
    let projections: Vec<&DenseOperator> = (0..units.shape().num_blocks())
        .flat_map(|s| (0..units.shape().block(s)).map(move |i| (s, i)))
        .map(|(s, i)| units.unit(s, i, i))
        .collect();
    let mut basis = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in a..k {
            if a == b {
                basis.push(DenseOperator::elementary(k, a, a));
            } else {
                let e = DenseOperator::elementary(k, a, b);
                basis.push(&e + &e.adjoint());
                basis.push((&e - &e.adjoint()).scale_complex(C64::new(0.0, 1.0)));
            }
        }
    }
    let rows: Vec<Vec<f64>> = basis
        .iter()
        .map(|h| {
            let mut pinched = DenseOperator::zeros(k);
            for p in &projections {
                pinched += &p.matmul(h).matmul(p);
            }
            pinched.as_slice().iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>()
        })
        .filter(|row| row.iter().any(|&x| x != 0.0))
        .collect();
    if rows.is_empty() {
        return 0;
    }
    // Rank of the row set from the eigenvalues of its Gram matrix.
    let gram = DMatrix::from_fn(rows.len(), rows.len(), |a, b| rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum::<f64>());
    gram.symmetric_eigenvalues().iter().filter(|&&v| v > 1e-9).count()
}

/// Nondecreasing block lists with sum at most `max`.
fn shapes_up_to(max: usize) -> Vec<Vec<usize>> {
    fn walk(min: usize, rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        for b in min..=rest {
            prefix.push(b);
            walk(b, rest - b, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(1, max, &mut Vec::new(), &mut out);
    out
}

/// Every positive multiplicity vector with `Σ c_ι k_ι ≤ max`, by odometer.
fn multiplicities_up_to(blocks: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c = vec![1usize; blocks.len()];
    loop {
        let total: usize = c.iter().zip(blocks).map(|(c, k)| c * k).sum();
        if total <= max {
            out.push(c.clone());
        }
        // Advance the odometer, resetting digits that overflow the budget.
        let mut i = 0;
        loop {
            if i == c.len() {
                return out;
            }
            c[i] += 1;
            let total: usize = c.iter().zip(blocks).map(|(c, k)| c * k).sum();
            if total <= max {
                break;
            }
            c[i] = 1;
            i += 1;
        }
    }
}

fn counting_check(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let max_k = config.counting.max_k;
    let start = Instant::now();
    let mut instances = 0usize;
    let mut dim_mismatch = 0usize;
    let mut bound_excess = f64::NEG_INFINITY;
    let mut enum_mismatch = 0usize;
    let mut cap_excess = f64::NEG_INFINITY;
    let mut ranks: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    for blocks in shapes_up_to(max_k) {
        let shape = AlgebraShape::new(blocks.clone()).context("shape")?;
        let sub = subrank(&shape);
        let all = multiplicities_up_to(&blocks, max_k);
        for c in &all {
            let k: usize = c.iter().zip(&blocks).map(|(c, b)| c * b).sum();
            let embedding = UnitalEmbedding::new(shape.clone(), c.clone(), k).context("embedding")?;
            let formula = compression_dimension(&shape, &embedding, sub).context("compression dimension")?;
            // Instances that differ by permuting equal blocks share a rank.
            let mut key: Vec<(usize, usize)> = blocks.iter().copied().zip(c.iter().copied()).collect();
            key.sort_unstable();
            let brute = match ranks.get(&key) {
                Some(&r) => r,
                None => {
                    let units = canonical_units(&shape, &embedding).context("canonical units")?;
                    let r = pinched_rank(&units);
                    ranks.insert(key, r);
                    r
                }
            };
            if formula.dim != brute {
                dim_mismatch += 1;
            }
            bound_excess = bound_excess.max(formula.dim as f64 - formula.k_squared_over_n);
            instances += 1;
        }
        let rank: usize = blocks.iter().sum();
        for k in rank..=max_k {
            let listed = enumerate_multiplicities(k, &shape).context("enumerating multiplicities")?;
            let mut expected: Vec<Vec<usize>> =
                all.iter().filter(|c| c.iter().zip(&blocks).map(|(c, b)| c * b).sum::<usize>() == k).cloned().collect();
            let mut got = listed.tuples.clone();
            expected.sort();
            got.sort();
            if expected != got {
                enum_mismatch += 1;
            }
            cap_excess = cap_excess.max(listed.count as f64 - listed.cap);
        }
    }
    report.timing.insert("counting".into(), start.elapsed().as_secs_f64());
    report.push(Row::new("dimension_mismatches", dim_mismatch as f64, Relation::Equal, 0.0));
    report.push(Row::at_most("dimension_bound_excess", bound_excess, 0.0));
    report.push(Row::new("enumeration_mismatches", enum_mismatch as f64, Relation::Equal, 0.0));
    report.push(Row::at_most("multiplicity_cap_excess", cap_excess, 0.0));
    report.detail("instances", instances);
    let start = Instant::now();
    let result = compression_rows(config, report);
    report.timing.insert("compression".into(), start.elapsed().as_secs_f64());
    result
}

fn compression_rows(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let cfg = &config.compression;
    let preset = find_preset(&cfg.preset)
        .ok_or_else(|| RunError::ConfigInvalid { path: "compression.preset".into(), message: format!("unknown preset `{}`", cfg.preset) })?;
    let model = build_tower(&preset.spec).context("building compression tower")?;
    let level = cfg.level.unwrap_or(model.depth());
    if level == 0 || level > model.depth() {
        return Err(RunError::ConfigInvalid { path: "compression.level".into(), message: format!("tower has {} levels", model.depth()) });
    }
    let units = model.block(level - 1);
    let base = config.base_seed();
    for &omega in &cfg.omegas {
        let mut worst: f64 = 0.0;
        for i in 0..cfg.seeds {
            let tuple = synthetic_block_tuple(units, cfg.tuple_len, omega, base.wrapping_add(i)).context("synthetic tuple")?;
            worst = worst.max(compression_defect(&tuple, units).context("compression defect")?);
        }
        report.push(Row::at_most(format!("compression.omega={omega}"), worst, 2.0 * omega + 1e-10));
    }
    Ok(())
}

fn lemma52_check(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let cfg = &config.lemma52;
    let mut cases = Vec::new();
    for blocks in &cfg.shapes {
        let shape = AlgebraShape::new(blocks.clone()).context("lemma52.shapes")?;
        for &n in &cfg.ns {
            if n >= 2 && subrank(&shape) >= n {
                cases.push((shape.clone(), n));
            }
        }
    }
    if cases.is_empty() {
        return Err(RunError::ConfigInvalid { path: "lemma52.ns".into(), message: "no shape has subrank ≥ n ≥ 2".into() });
    }
    let base = config.base_seed();
    let mut rows = Vec::new();
    for i in 0..cfg.instances {
        let (shape, n) = &cases[i as usize % cases.len()];
        rows.push(norm_identity_run(*n, shape, cfg.d, base.wrapping_add(i)).context("norm identity")?);
    }
    let gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let central = rows.iter().map(|r| r.central_gap).fold(0.0, f64::max);
    report.push(Row::at_most("max_gap", gap, NORM_IDENTITY_TOL));
    report.push(Row::at_most("max_central_gap", central, NORM_IDENTITY_TOL));
    report.push(Row::new("instances", rows.len() as f64, Relation::Equal, cfg.instances as f64));
    report.detail("runs", rows);
    Ok(())
}

fn all(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let mut main = config.clone();
    main.command = None;
    if main.preset.is_none() && main.tower.is_none() {
        main.preset = Some("T1".into());
    }
    let mut with_closure = main.clone();
    with_closure.closure = Some(config.closure.clone().unwrap_or_default());
    let mut t0 = main.clone();
    t0.preset = Some("T0".into());
    t0.tower = None;
    t0.closure = None;

    let parts: [(&str, Command, &RunConfig); 10] = [
        ("tower-build", Command::TowerBuild, &main),
        ("tower-check", Command::TowerCheck, &main),
        ("gen-construct", Command::GenConstruct, &main),
        ("gen-verify", Command::GenVerify, &main),
        ("recover.T0", Command::Recover, &t0),
        ("recover", Command::Recover, &with_closure),
        ("stabilize-sweep", Command::StabilizeSweep, &main),
        ("cover-estimate", Command::CoverEstimate, &main),
        ("counting-check", Command::CountingCheck, &main),
        ("lemma52-check", Command::Lemma52Check, &main),
    ];
    for (prefix, command, cfg) in parts {
        let sub = run(command, cfg, None);
        report.absorb(prefix, sub);
    }
    Ok(())
}
