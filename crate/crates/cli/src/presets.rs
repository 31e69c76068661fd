//! Named tower specs used by the runner and the acceptance suite.

use adiv_core::algebra::AlgebraShape;
use adiv_core::tower::{strict_required, Mode, Recipe, TowerSpec};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: TowerSpec,
    /// Checks this preset is used for.
    pub exercises: Vec<&'static str>,
    /// Smallest subrank the strict growth rule allows at each level.
    pub strict_bounds: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

fn shapes(blocks: &[&[usize]]) -> Vec<AlgebraShape> {
    blocks.iter().map(|b| AlgebraShape::new(b.to_vec()).expect("preset shapes are valid")).collect()
}

fn preset(
    name: &'static str,
    description: &'static str,
    spec: TowerSpec,
    exercises: Vec<&'static str>,
    note: Option<&'static str>,
) -> Preset {
    let strict_bounds = (0..spec.depth()).map(|m| strict_required(&spec.shapes, m)).collect();
    Preset { name, description, spec, exercises, strict_bounds, note }
}

pub fn list_presets() -> Vec<Preset> {
    vec![
        preset(
            "T0",
            "depth 1, a single M_3 (ambient dim 3)",
            TowerSpec::new(shapes(&[&[3]]), 1, Mode::Strict, 1, Recipe::LeadingFactor),
            vec!["recovery round trip"],
            None,
        ),
        preset(
            "T1",
            "depth 2, M_3 then M_21, one generator, strict growth (ambient dim 63)",
            TowerSpec::new(shapes(&[&[3], &[21]]), 1, Mode::Strict, 7, Recipe::LeadingFactor),
            vec!["construction identities", "recovery round trip", "generation distance", "closure dimensions"],
            None,
        ),
        preset(
            "T1b",
            "depth 2, M_3 then M_12, one generator (ambient dim 36)",
            TowerSpec::new(shapes(&[&[3], &[12]]), 1, Mode::Relaxed, 7, Recipe::LeadingFactor),
            vec!["construction identities under the relaxed growth rule"],
            Some("M_12 is below the strict bound 21 at level 2, so this preset runs in relaxed mode"),
        ),
        preset(
            "U2",
            "UHF-style tower M_4 then M_32, one generator, Pauli-word generators (ambient dim 128)",
            TowerSpec::new(shapes(&[&[4], &[32]]), 1, Mode::Relaxed, 11, Recipe::Uhf),
            vec!["two-generator construction for a tensor product", "tower conditions"],
            Some("relaxed growth; first level is M_2 ⊗ M_2, the second M_32 carries the rest of the product"),
        ),
    ]
}

pub fn find_preset(name: &str) -> Option<Preset> {
    list_presets().into_iter().find(|p| p.name == name)
}
