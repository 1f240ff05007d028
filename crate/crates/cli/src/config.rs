//! Experiment configuration.
//!
//! ```json
//! {
//!   "map": "doubling",
//!   "kernel": {"kind": "gaussian"},
//!   "epsilons": [0.03125, 0.015625],
//!   "deltas": [0.5],
//!   "grid": {"exp": 13},
//!   "seed": 1,
//!   "out": "out"
//! }
//! ```
//!
//! `map` is a preset name or a full map object. `epsilons` may be replaced by
//! `{"octaves": [5, 12]}`, meaning `2^-5, ..., 2^-12`.

use std::fmt;
use std::path::{Path, PathBuf};

use bernoulli_mix::kernels::{Kernel, KernelKind, KernelSpec};
use bernoulli_mix::maps::{map_preset, BernoulliMap, MapSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Schema or invariant violation in the configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapChoice {
    Preset(String),
    Spec(MapSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelChoice {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for KernelChoice {
    fn default() -> Self {
        Self { kind: KernelKind::Gaussian, covariance: None, values: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonList {
    Values(Vec<f64>),
    Octaves { octaves: [i32; 2] },
}

impl EpsilonList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsilonList::Values(v) => v.clone(),
            EpsilonList::Octaves { octaves: [lo, hi] } => (*lo..=*hi).map(|k| 2f64.powi(-k)).collect(),
        }
    }
}

/// Grid size: `base^exp` cells per axis, where `base` is the map's lattice base.
/// Without `exp`, the smallest power with at least `cells_per_epsilon / ε_min` cells,
/// capped so the whole grid has at most `max_cells` cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    #[serde(default)]
    pub exp: Option<u32>,
    #[serde(default = "default_cells_per_epsilon")]
    pub cells_per_epsilon: f64,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
}

fn default_cells_per_epsilon() -> f64 {
    8.0
}

fn default_max_cells() -> usize {
    1 << 16
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { exp: None, cells_per_epsilon: default_cells_per_epsilon(), max_cells: default_max_cells() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOptions {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_mc_steps")]
    pub steps: usize,
    /// Start cell as a fraction of the torus along each axis.
    #[serde(default = "default_mc_start")]
    pub start: f64,
    #[serde(default = "default_mc_bins")]
    pub max_bins: usize,
}

fn default_particles() -> usize {
    100_000
}

fn default_mc_steps() -> usize {
    20
}

fn default_mc_start() -> f64 {
    0.3
}

fn default_mc_bins() -> usize {
    256
}

impl Default for McOptions {
    fn default() -> Self {
        Self { particles: default_particles(), steps: default_mc_steps(), start: default_mc_start(), max_bins: default_mc_bins() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapChoice>,
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default = "default_epsilons")]
    pub epsilons: EpsilonList,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Cylinder depth for `validate`.
    #[serde(default = "default_depth")]
    pub validate_depth: usize,
    /// Random coefficient sets per `ε` for `verify-pcmix`.
    #[serde(default = "default_trials")]
    pub pcmix_trials: usize,
    #[serde(default)]
    pub mc: McOptions,
}

fn default_epsilons() -> EpsilonList {
    EpsilonList::Octaves { octaves: [5, 10] }
}

fn default_deltas() -> Vec<f64> {
    vec![0.5]
}

fn default_depth() -> usize {
    6
}

fn default_trials() -> usize {
    10
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub grid_exp: Option<u32>,
}

/// A checked configuration with the map built.
#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub map: BernoulliMap,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// sha256 of the canonical JSON of `config`, without `out`.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn resolve(mut self, ov: &Overrides) -> anyhow::Result<Resolved> {
        if let Some(p) = &ov.preset {
            self.map = Some(MapChoice::Preset(p.clone()));
        }
        if let Some(s) = ov.seed {
            self.seed = Some(s);
        }
        if let Some(o) = &ov.out {
            self.out = Some(o.clone());
        }
        if let Some(k) = ov.grid_exp {
            self.grid.exp = Some(k);
        }
        let seed = self.seed.ok_or_else(|| bad("seed is mandatory (set \"seed\" or pass --seed)"))?;
        let map = match &self.map {
            None => return Err(bad("no map given (set \"map\" or pass --preset)")),
            Some(MapChoice::Preset(name)) => map_preset(name).map_err(|e| bad(e.to_string()))?,
            Some(MapChoice::Spec(spec)) => spec.build().map_err(|e| bad(e.to_string()))?,
        };
        let mut epsilons = self.epsilons.values();
        if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e <= 0.25)) {
            return Err(bad(format!("ε = {e} is outside (0, 1/4]")));
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
            return Err(bad(format!("δ = {d} is outside (0, 1)")));
        }
        if self.deltas.is_empty() {
            return Err(bad("δ list is empty"));
        }
        if self.grid.cells_per_epsilon <= 0.0 || self.grid.max_cells == 0 {
            return Err(bad("grid policy needs positive cells_per_epsilon and max_cells"));
        }
        if self.kernel.kind == KernelKind::Tabulated && self.kernel.values.is_none() {
            return Err(bad("tabulated kernel needs \"values\""));
        }
        // sweeps run coarse to fine
        epsilons.sort_by(|a, b| b.total_cmp(a));
        epsilons.dedup();
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        // the output location does not change the data
        let mut canon = self.clone();
        canon.out = None;
        let hash = hex::encode(Sha256::digest(serde_json::to_vec(&canon)?));
        Ok(Resolved { config: self, map, epsilons, seed, out, hash })
    }
}

impl Resolved {
    pub fn kernel(&self, epsilon: f64) -> anyhow::Result<Box<dyn Kernel>> {
        let spec = KernelSpec {
            kind: self.config.kernel.kind,
            epsilon,
            covariance: self.config.kernel.covariance.clone(),
            values: self.config.kernel.values.clone(),
        };
        spec.build(self.map.dim()).map_err(|e| bad(format!("kernel: {e}")))
    }

    pub fn base(&self) -> u64 {
        self.map.grid_base().filter(|&b| b > 1).unwrap_or(2)
    }

    /// Cells per axis for the whole sweep.
    pub fn grid_size(&self) -> anyhow::Result<usize> {
        let base = self.base() as usize;
        let d = self.map.dim() as u32;
        if let Some(k) = self.config.grid.exp {
            return base.checked_pow(k).filter(|m| m.checked_pow(d).is_some()).ok_or_else(|| bad(format!("grid {base}^{k} is too large")));
        }
        let eps_min = self.epsilons.iter().cloned().fold(0.25, f64::min);
        let want = (self.config.grid.cells_per_epsilon / eps_min).max(16.0);
        let mut m = base;
        while (m as f64) < want {
            let next = m * base;
            if next.checked_pow(d).is_none_or(|c| c > self.config.grid.max_cells) {
                break;
            }
            m = next;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(json: &str) -> anyhow::Result<Resolved> {
        serde_json::from_str::<ExperimentConfig>(json)?.resolve(&Overrides::default())
    }

    #[test]
    fn seed_is_mandatory() {
        let err = resolve(r#"{"map": "doubling"}"#).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(resolve(r#"{"map": "doubling", "seed": 1, "epsilons": [0.3]}"#).is_err());
        assert!(resolve(r#"{"map": "doubling", "seed": 1, "deltas": [1.0]}"#).is_err());
        assert!(resolve(r#"{"map": "doubling", "seed": 1, "colour": 3}"#).is_err());
    }

    #[test]
    fn octaves_expand_and_sort() {
        let r = resolve(r#"{"map": "doubling", "seed": 1, "epsilons": {"octaves": [5, 7]}}"#).unwrap();
        assert_eq!(r.epsilons, vec![2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7)]);
    }

    #[test]
    fn grid_follows_the_map_lattice() {
        let r = resolve(r#"{"map": "intro3", "seed": 1, "epsilons": [0.01]}"#).unwrap();
        assert_eq!(r.grid_size().unwrap(), 2187);
        let r = resolve(r#"{"map": "doubling", "seed": 1, "epsilons": [0.01], "grid": {"exp": 10}}"#).unwrap();
        assert_eq!(r.grid_size().unwrap(), 1024);
        let r = resolve(r#"{"map": "quad2d", "seed": 1, "epsilons": [0.001]}"#).unwrap();
        assert_eq!(r.grid_size().unwrap(), 256);
    }

    #[test]
    fn hash_tracks_content() {
        let a = resolve(r#"{"map": "doubling", "seed": 1}"#).unwrap();
        let b = resolve(r#"{"seed": 1, "map": "doubling"}"#).unwrap();
        let c = resolve(r#"{"map": "doubling", "seed": 2}"#).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
    }
}
