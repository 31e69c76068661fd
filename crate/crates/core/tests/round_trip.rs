use adiv_core::algebra::AlgebraShape;
use adiv_core::generator::construct;
use adiv_core::recovery::round_trip;
use adiv_core::tower::{build_tower, Mode, Recipe, TowerSpec};

fn tower(shapes: &[usize], mode: Mode, seed: u64) -> TowerSpec {
    let shapes = shapes.iter().map(|&k| AlgebraShape::full(k)).collect();
    TowerSpec::new(shapes, 1, mode, seed, Recipe::LeadingFactor)
}

#[test]
fn depth_one_round_trip() {
    let model = build_tower(&tower(&[3], Mode::Strict, 1)).unwrap();
    let plan = construct(&model).unwrap();
    let report = round_trip(&model, &plan).unwrap();
    assert!(report.max_unit_residual() <= 1e-6);
    assert!(report.max_z_residual() <= 1e-6);
    assert!(report.max_witness_residual() <= 1e-8);
}

#[test]
fn depth_two_round_trip() {
    let model = build_tower(&tower(&[3, 21], Mode::Strict, 1)).unwrap();
    let plan = construct(&model).unwrap();
    let report = round_trip(&model, &plan).unwrap();
    assert!(report.max_unit_residual() <= 1e-6, "{:?}", report.unit_residual);
    assert!(report.max_z_residual() <= 1e-6, "{:?}", report.z_residual);
    assert!(report.max_witness_residual() <= 1e-8, "{:?}", report.witness_residual);
    assert!(report.max_squarings <= 64);
    assert!(report.leading_residual <= 1e-8);
}

#[test]
fn round_trip_across_seeds() {
    for seed in [0, 7, 23, 99] {
        let model = build_tower(&tower(&[3, 21], Mode::Strict, seed)).unwrap();
        let plan = construct(&model).unwrap();
        let report = round_trip(&model, &plan).unwrap();
        assert!(report.max_unit_residual() <= 1e-6, "seed {seed}: {:?}", report.unit_residual);
        assert!(report.max_witness_residual() <= 1e-8, "seed {seed}");
    }
}

#[test]
fn relaxed_round_trip() {
    let model = build_tower(&tower(&[3, 12], Mode::Relaxed, 5)).unwrap();
    let plan = construct(&model).unwrap();
    let report = round_trip(&model, &plan).unwrap();
    assert!(report.max_unit_residual() <= 1e-6, "{:?}", report.unit_residual);
    assert!(report.max_witness_residual() <= 1e-8);
}
