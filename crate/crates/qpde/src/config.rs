//! TOML run configuration.
//!
//! ```toml
//! output_dir = "run"
//!
//! [model]
//! kind = "hubbard"        # or "fcidump" with `path`, `ordering` and `permutation`
//! n_s = 4
//! t = 1.0
//! u = 10.0
//!
//! [compression]
//! d_prep = 6
//! d_evol = 5
//!
//! [estimation]
//! mode = "gap"            # or "fci"
//! shots = 10000           # 0 uses exact probabilities
//! ```
//!
//! Every omitted key takes the value of [`RunConfig::default`]; unknown keys are rejected.

use std::path::{Path, PathBuf};

use qpde_core::dmrg::DmrgSchedule;
use qpde_core::estimator::{EstimatorConfig, GridWidth};
use qpde_core::ordering::GaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{QpdeError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub compression: CompressionConfig,
    pub estimation: EstimationConfig,
    pub dmrg: DmrgConfig,
    pub ga: GaSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Hubbard {
        n_s: usize,
        #[serde(default = "default_t")]
        t: f64,
        #[serde(default = "default_u")]
        u: f64,
    },
    Fcidump {
        path: PathBuf,
        #[serde(default)]
        ordering: OrderingChoice,
        /// Used when `ordering = "explicit"`; `permutation[k]` is the orbital placed at site `k`.
        #[serde(default)]
        permutation: Option<Vec<usize>>,
    },
}

fn default_t() -> f64 {
    1.0
}

fn default_u() -> f64 {
    10.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingChoice {
    #[default]
    None,
    Ga,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressionConfig {
    pub d_prep: usize,
    pub d_evol: usize,
    pub sweeps_prep: usize,
    pub sweeps_evol: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Trotter slices per step in the reference evolution.
    pub reference_slices: usize,
    pub cutoff: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMode {
    #[default]
    Gap,
    Fci,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub mode: EstimationMode,
    /// Initial prior mean; omitted means 0 for `gap` and the bond-2 DMRG value for `fci`.
    pub mu_init: Option<f64>,
    pub var_init: f64,
    pub m: usize,
    pub shots: u64,
    pub dt: f64,
    pub p_dep: f64,
    pub max_iter: usize,
    pub max_restarts: usize,
    pub var_target: f64,
    pub master_seed: u64,
    pub grid_width: GridWidthChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridWidthChoice {
    #[default]
    Variance,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgConfig {
    /// Bond limit per sweep; omitted means 3×10, 12×50, 5×1000.
    pub max_bond_per_sweep: Option<Vec<usize>>,
    /// Omitted means 1e-12 for Hubbard and 1e-8 for FCIDUMP models.
    pub svd_cutoff: Option<f64>,
    pub overlap_penalty_weight: Option<f64>,
    pub seed: u64,
    /// Bond limit of the cheap run that seeds `mu_init` in FCI mode.
    pub fci_prior_bond: usize,
    pub fci_prior_sweeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSection {
    pub population: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub shuffle_prob: Option<f64>,
    pub generations: usize,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("qpde-run"),
            model: ModelConfig::Hubbard {
                n_s: 4,
                t: default_t(),
                u: default_u(),
            },
            compression: CompressionConfig::default(),
            estimation: EstimationConfig::default(),
            dmrg: DmrgConfig::default(),
            ga: GaSection::default(),
        }
    }
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            d_prep: 6,
            d_evol: 5,
            sweeps_prep: 1000,
            sweeps_evol: 1000,
            seed: 0,
            init_scale: qpde_core::brickwall::DEFAULT_INIT_SCALE,
            reference_slices: 100,
            cutoff: qpde_core::mpo::DEFAULT_CUTOFF,
        }
    }
}

impl Default for EstimationConfig {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        Self {
            mode: EstimationMode::Gap,
            mu_init: None,
            var_init: e.var_init,
            m: e.m,
            shots: e.shots.unwrap_or(0),
            dt: 0.1,
            p_dep: e.p_dep,
            max_iter: e.max_iter,
            max_restarts: e.max_restarts,
            var_target: e.var_target,
            master_seed: e.master_seed,
            grid_width: GridWidthChoice::Variance,
        }
    }
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            max_bond_per_sweep: None,
            svd_cutoff: None,
            overlap_penalty_weight: None,
            seed: 0,
            fci_prior_bond: 2,
            fci_prior_sweeps: 10,
        }
    }
}

impl Default for GaSection {
    fn default() -> Self {
        let g = GaConfig::default();
        Self {
            population: g.population,
            crossover_prob: g.crossover_prob,
            mutation_prob: g.mutation_prob,
            shuffle_prob: g.shuffle_prob,
            generations: g.generations,
            tournament: g.tournament,
            seed: 0,
        }
    }
}

fn field(name: &str, message: impl std::fmt::Display) -> QpdeError {
    QpdeError::Config(format!("{}: {}", name, message))
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(field(name, format!("{} is outside [0, 1]", v)))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("{} must be positive", v)))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(field(name, format!("{} is below {}", v, min)))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| QpdeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; a relative FCIDUMP path is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QpdeError::Config(format!("{}: {}", path.display(), e)))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let ModelConfig::Fcidump { path: p, .. } = &mut cfg.model {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| QpdeError::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.model {
            ModelConfig::Hubbard { n_s, t, u } => {
                at_least("model.n_s", *n_s, 1)?;
                if !t.is_finite() {
                    return Err(field("model.t", "must be finite"));
                }
                if !u.is_finite() {
                    return Err(field("model.u", "must be finite"));
                }
            }
            ModelConfig::Fcidump {
                path,
                ordering,
                permutation,
            } => {
                if path.as_os_str().is_empty() {
                    return Err(field("model.path", "is empty"));
                }
                match (ordering, permutation) {
                    (OrderingChoice::Explicit, None) => {
                        return Err(field("model.permutation", "is required when ordering = \"explicit\""));
                    }
                    (OrderingChoice::Explicit, Some(p)) => {
                        let n = p.len();
                        qpde_core::fermion::validate_permutation(p, n).map_err(|e| field("model.permutation", e))?;
                    }
                    (_, Some(_)) => {
                        return Err(field("model.permutation", "is only used with ordering = \"explicit\""));
                    }
                    _ => {}
                }
            }
        }
        let c = &self.compression;
        at_least("compression.d_prep", c.d_prep, 1)?;
        at_least("compression.d_evol", c.d_evol, 1)?;
        at_least("compression.reference_slices", c.reference_slices, 1)?;
        if !(c.init_scale >= 0.0 && c.init_scale.is_finite()) {
            return Err(field("compression.init_scale", format!("{} must be non-negative", c.init_scale)));
        }
        probability("compression.cutoff", c.cutoff)?;
        let e = &self.estimation;
        positive("estimation.var_init", e.var_init)?;
        positive("estimation.dt", e.dt)?;
        positive("estimation.var_target", e.var_target)?;
        probability("estimation.p_dep", e.p_dep)?;
        at_least("estimation.m", e.m, 4)?;
        at_least("estimation.max_iter", e.max_iter, 1)?;
        if let Some(mu) = e.mu_init {
            if !mu.is_finite() {
                return Err(field("estimation.mu_init", "must be finite"));
            }
        }
        let d = &self.dmrg;
        if let Some(b) = &d.max_bond_per_sweep {
            if b.is_empty() || b.contains(&0) {
                return Err(field("dmrg.max_bond_per_sweep", "needs at least one sweep and positive bonds"));
            }
        }
        if let Some(x) = d.svd_cutoff {
            probability("dmrg.svd_cutoff", x)?;
        }
        if let Some(w) = d.overlap_penalty_weight {
            positive("dmrg.overlap_penalty_weight", w)?;
        }
        at_least("dmrg.fci_prior_bond", d.fci_prior_bond, 1)?;
        at_least("dmrg.fci_prior_sweeps", d.fci_prior_sweeps, 1)?;
        let g = &self.ga;
        at_least("ga.population", g.population, 2)?;
        at_least("ga.generations", g.generations, 1)?;
        at_least("ga.tournament", g.tournament, 1)?;
        probability("ga.crossover_prob", g.crossover_prob)?;
        probability("ga.mutation_prob", g.mutation_prob)?;
        if let Some(p) = g.shuffle_prob {
            probability("ga.shuffle_prob", p)?;
        }
        Ok(())
    }

    pub fn is_molecular(&self) -> bool {
        matches!(self.model, ModelConfig::Fcidump { .. })
    }

    pub fn dmrg_schedule(&self) -> DmrgSchedule {
        let base = if self.is_molecular() {
            DmrgSchedule::molecular()
        } else {
            DmrgSchedule::hubbard()
        };
        DmrgSchedule {
            max_bond_per_sweep: self.dmrg.max_bond_per_sweep.clone().unwrap_or(base.max_bond_per_sweep),
            svd_cutoff: self.dmrg.svd_cutoff.unwrap_or(base.svd_cutoff),
            overlap_penalty_weight: self.dmrg.overlap_penalty_weight,
        }
    }

    pub fn ga_config(&self) -> GaConfig {
        let g = &self.ga;
        GaConfig {
            population: g.population,
            crossover_prob: g.crossover_prob,
            mutation_prob: g.mutation_prob,
            shuffle_prob: g.shuffle_prob,
            generations: g.generations,
            tournament: g.tournament,
        }
    }

    /// Estimator settings with the prior mean resolved by the caller.
    pub fn estimator_config(&self, mu_init: f64) -> EstimatorConfig {
        let e = &self.estimation;
        EstimatorConfig {
            mu_init,
            var_init: e.var_init,
            m: e.m,
            shots: (e.shots > 0).then_some(e.shots),
            p_dep: e.p_dep,
            max_iter: e.max_iter,
            max_restarts: e.max_restarts,
            var_target: e.var_target,
            grid_width: match e.grid_width {
                GridWidthChoice::Variance => GridWidth::Variance,
                GridWidthChoice::Sigma => GridWidth::Sigma,
            },
            master_seed: e.master_seed,
            ..EstimatorConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_roundtrip() {
        let d = RunConfig::default();
        let text = d.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), d);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml_str("[compression]\nd_prp = 3\n").unwrap_err();
        assert!(e.to_string().contains("d_prp"), "{}", e);
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn field_names_in_messages() {
        let e = RunConfig::from_toml_str("[estimation]\np_dep = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("estimation.p_dep"), "{}", e);
        let e = RunConfig::from_toml_str("[model]\nkind = \"fcidump\"\npath = \"x\"\nordering = \"explicit\"\n").unwrap_err();
        assert!(e.to_string().contains("model.permutation"), "{}", e);
        let e = RunConfig::from_toml_str("[model]\nkind = \"fcidump\"\npath = \"x\"\nordering = \"explicit\"\npermutation = [0, 0]\n").unwrap_err();
        assert!(e.to_string().contains("model.permutation"), "{}", e);
    }

    #[test]
    fn hubbard_section() {
        let c = RunConfig::from_toml_str("[model]\nkind = \"hubbard\"\nn_s = 10\n").unwrap();
        assert_eq!(c.model, ModelConfig::Hubbard { n_s: 10, t: 1.0, u: 10.0 });
        assert_eq!(c.estimator_config(0.0).shots, Some(10_000));
        assert_eq!(c.dmrg_schedule(), DmrgSchedule::hubbard());
    }
}
