//! Run configuration: a JSON document validated before any computation.
//!
//! Every section has defaults, so `{}` is a valid config for any command that
//! does not need a tower; tower commands need `preset` or `tower`.

use adiv_core::stabilizer::StabilizeParams;
use adiv_core::tower::TowerSpec;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::presets::find_preset;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tower: Option<TowerSpec>,
    /// Overrides the tower seed and the base seed of every sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureConfig>,
    #[serde(default)]
    pub stabilize: StabilizeConfig,
    #[serde(default)]
    pub cover: CoverConfig,
    #[serde(default)]
    pub counting: CountingConfig,
    #[serde(default)]
    pub compression: CompressionConfig,
    #[serde(default)]
    pub lemma52: NormIdentityConfig,
}

/// Subalgebra closure of `{a, b}` against the generating set of units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    #[serde(default = "default_word_cap")]
    pub word_cap: usize,
    #[serde(default = "default_closure_tol")]
    pub tol: f64,
    /// Also close `{units, z_n, I}` and compare dimensions.
    #[serde(default = "yes")]
    pub compare_units: bool,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self { word_cap: default_word_cap(), tol: default_closure_tol(), compare_units: true }
    }
}

fn default_word_cap() -> usize {
    adiv_core::recovery::DEFAULT_WORD_CAP
}

fn default_closure_tol() -> f64 {
    adiv_core::recovery::DEFAULT_CLOSURE_TOL
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizeConfig {
    #[serde(default = "default_stabilize_shape")]
    pub shape: Vec<usize>,
    #[serde(default = "default_stabilize_multiplicities")]
    pub multiplicities: Vec<usize>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_twenty")]
    pub seeds: u64,
    #[serde(default)]
    pub params: StabilizeParams,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        Self {
            shape: default_stabilize_shape(),
            multiplicities: default_stabilize_multiplicities(),
            deltas: default_deltas(),
            seeds: default_twenty(),
            params: StabilizeParams::default(),
        }
    }
}

fn default_stabilize_shape() -> Vec<usize> {
    vec![5, 5]
}

fn default_stabilize_multiplicities() -> Vec<usize> {
    vec![1, 1]
}

fn default_deltas() -> Vec<f64> {
    vec![1e-6, 1e-4, 1e-3]
}

fn default_twenty() -> u64 {
    20
}

/// A single value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(x) => vec![*x],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverConfig {
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_omegas")]
    pub omega: OneOrMany,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Points of the circle discretization for the exact net count (k = 1).
    #[serde(default = "default_samples")]
    pub grid: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self { k: 1, omega: default_omegas(), samples: default_samples(), grid: default_samples() }
    }
}

fn default_one() -> usize {
    1
}

fn default_omegas() -> OneOrMany {
    OneOrMany::Many(vec![0.5, 0.25])
}

fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    #[serde(default = "default_max_k")]
    pub max_k: usize,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self { max_k: default_max_k() }
    }
}

fn default_max_k() -> usize {
    12
}

/// Block-diagonal tuples plus perturbations, measured against the diagonal
/// units of one level of a preset tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    #[serde(default = "default_compression_preset")]
    pub preset: String,
    /// 1-based level; defaults to the deepest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default = "default_tuple_len")]
    pub tuple_len: usize,
    #[serde(default = "default_compression_omegas")]
    pub omegas: Vec<f64>,
    #[serde(default = "default_twenty")]
    pub seeds: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            preset: default_compression_preset(),
            level: None,
            tuple_len: default_tuple_len(),
            omegas: default_compression_omegas(),
            seeds: default_twenty(),
        }
    }
}

fn default_compression_preset() -> String {
    "T1".into()
}

fn default_tuple_len() -> usize {
    2
}

fn default_compression_omegas() -> Vec<f64> {
    vec![0.1, 0.01]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormIdentityConfig {
    #[serde(default = "default_norm_shapes")]
    pub shapes: Vec<Vec<usize>>,
    #[serde(default = "default_norm_ns")]
    pub ns: Vec<usize>,
    /// Size of the commuting factor.
    #[serde(default = "default_two")]
    pub d: usize,
    /// Spread round-robin over the admissible (shape, n) pairs.
    #[serde(default = "default_instances")]
    pub instances: u64,
}

impl Default for NormIdentityConfig {
    fn default() -> Self {
        Self { shapes: default_norm_shapes(), ns: default_norm_ns(), d: 2, instances: default_instances() }
    }
}

fn default_norm_shapes() -> Vec<Vec<usize>> {
    vec![vec![2], vec![3], vec![2, 3]]
}

fn default_norm_ns() -> Vec<usize> {
    vec![2, 3]
}

fn default_two() -> usize {
    2
}

fn default_instances() -> u64 {
    100
}

fn invalid(path: &str, message: impl Into<String>) -> RunError {
    RunError::ConfigInvalid { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "" } else { &path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.preset.is_some() && self.tower.is_some() {
            return Err(invalid("tower", "give either `preset` or `tower`, not both"));
        }
        if let Some(name) = &self.preset {
            if find_preset(name).is_none() {
                return Err(invalid("preset", format!("unknown preset `{name}`")));
            }
        }
        if let Some(spec) = &self.tower {
            spec.validate().map_err(|e| invalid("tower", e.to_string()))?;
        }
        if let Some(c) = &self.closure {
            if c.word_cap == 0 || c.word_cap > 16 {
                return Err(invalid("closure.word_cap", "must be in 1..=16"));
            }
            if !(c.tol > 0.0) {
                return Err(invalid("closure.tol", "must be positive"));
            }
        }
        let s = &self.stabilize;
        if s.shape.len() != s.multiplicities.len() {
            return Err(invalid("stabilize.multiplicities", "needs one entry per block of `stabilize.shape`"));
        }
        if s.shape.is_empty() || s.shape.contains(&0) || s.multiplicities.contains(&0) {
            return Err(invalid("stabilize.shape", "blocks and multiplicities must be positive"));
        }
        if s.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(invalid("stabilize.deltas", "must be nonnegative"));
        }
        s.params.validate().map_err(|e| invalid("stabilize.params", e.to_string()))?;
        if self.cover.k == 0 || self.cover.samples == 0 || self.cover.grid == 0 {
            return Err(invalid("cover", "k, samples and grid must be positive"));
        }
        if self.cover.omega.values().iter().any(|w| !(*w > 0.0)) || self.cover.omega.values().is_empty() {
            return Err(invalid("cover.omega", "must be positive"));
        }
        if find_preset(&self.compression.preset).is_none() {
            return Err(invalid("compression.preset", format!("unknown preset `{}`", self.compression.preset)));
        }
        if self.compression.tuple_len == 0 {
            return Err(invalid("compression.tuple_len", "must be positive"));
        }
        if self.compression.omegas.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("compression.omegas", "must be nonnegative"));
        }
        if self.lemma52.d == 0 {
            return Err(invalid("lemma52.d", "must be positive"));
        }
        if self.lemma52.shapes.iter().any(|b| b.is_empty() || b.contains(&0)) {
            return Err(invalid("lemma52.shapes", "blocks must be positive"));
        }
        Ok(())
    }

    /// The tower spec named by `preset` or given inline, with the seed
    /// override applied.
    pub fn tower_spec(&self) -> Result<TowerSpec, RunError> {
        let mut spec = match (&self.preset, &self.tower) {
            (Some(name), None) => find_preset(name).ok_or_else(|| invalid("preset", format!("unknown preset `{name}`")))?.spec,
            (None, Some(spec)) => spec.clone(),
            (None, None) => return Err(invalid("preset", "this command needs `preset` or `tower`")),
            (Some(_), Some(_)) => return Err(invalid("tower", "give either `preset` or `tower`, not both")),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        Ok(spec)
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
