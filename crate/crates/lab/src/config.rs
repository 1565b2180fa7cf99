//! Experiment configuration: a strict TOML schema whose defaults are materialized before a run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mlsi_core::gibbs::presets::Preset;
use mlsi_core::{standard_splitting, Tolerances};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{LabError, LabResult};

/// A named check; the kebab-case name is used in configs, `--only` and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    GibbsStructure,
    EntropyProperties,
    DynamicsProperties,
    Mixing,
    Step1,
    Step2,
    LemmaCre,
    Mlsi,
    ConditionalMlsi,
    Qf,
    Assemble,
    MixingTime,
}

impl Check {
    /// Every check in execution order; estimates precede the assembly that consumes them.
    pub const ALL: [Check; 12] = [
        Check::GibbsStructure,
        Check::EntropyProperties,
        Check::DynamicsProperties,
        Check::Mixing,
        Check::Step1,
        Check::Step2,
        Check::LemmaCre,
        Check::Mlsi,
        Check::ConditionalMlsi,
        Check::Qf,
        Check::Assemble,
        Check::MixingTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::GibbsStructure => "gibbs-structure",
            Check::EntropyProperties => "entropy-properties",
            Check::DynamicsProperties => "dynamics-properties",
            Check::Mixing => "mixing",
            Check::Step1 => "step1",
            Check::Step2 => "step2",
            Check::LemmaCre => "lemma-cre",
            Check::Mlsi => "mlsi",
            Check::ConditionalMlsi => "conditional-mlsi",
            Check::Qf => "qf",
            Check::Assemble => "assemble",
            Check::MixingTime => "mixing-time",
        }
    }

    /// Whether the check draws random states or instances.
    pub fn needs_seed(self) -> bool {
        !matches!(self, Check::GibbsStructure | Check::Mixing)
    }

    /// Whether the check needs the dense Gibbs state of the whole chain.
    pub fn needs_dense(self) -> bool {
        matches!(
            self,
            Check::DynamicsProperties
                | Check::Mlsi
                | Check::ConditionalMlsi
                | Check::Qf
                | Check::Assemble
                | Check::MixingTime
        )
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| LabError::config(format!("unknown check {s:?}")))
    }
}

/// Sorts and deduplicates a check list into execution order.
pub fn normalize_checks(checks: &[Check]) -> Vec<Check> {
    let mut out = checks.to_vec();
    out.sort();
    out.dedup();
    out
}

/// Parses a comma-separated `--only` list.
pub fn parse_check_list(list: &str) -> LabResult<Vec<Check>> {
    let checks = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Check::from_str)
        .collect::<LabResult<Vec<_>>>()?;
    if checks.is_empty() {
        return Err(LabError::config("empty check list"));
    }
    Ok(normalize_checks(&checks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Dense,
    Classical,
    #[default]
    Auto,
}

/// One explicit interaction term; the matrix comes inline or from an operator file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub center: usize,
    pub sites: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPotential {
    pub k: usize,
    pub terms: Vec<TermSpec>,
}

/// A named preset (table with a `preset` key) or an explicit term list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset(Preset),
    Explicit(ExplicitPotential),
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let table = toml::Table::deserialize(d)?;
        if table.contains_key("preset") {
            Preset::deserialize(toml::Value::Table(table))
                .map(PotentialSpec::Preset)
                .map_err(D::Error::custom)
        } else {
            ExplicitPotential::deserialize(toml::Value::Table(table))
                .map(PotentialSpec::Explicit)
                .map_err(D::Error::custom)
        }
    }
}

impl PotentialSpec {
    /// Interaction range of the potential.
    pub fn k(&self) -> usize {
        match self {
            PotentialSpec::Preset(_) => 2,
            PotentialSpec::Explicit(e) => e.k,
        }
    }
}

/// Standard splitting parameters `(k, l, n_blocks)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub k: usize,
    pub l: usize,
    pub n_blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// Random starting states per estimator.
    pub n_random: usize,
    pub optimizer_steps: usize,
    pub n_starts: usize,
    /// States per inequality check.
    pub n_states: usize,
    /// Instances per property suite.
    pub n_instances: usize,
    /// Rank of sampled states on the classical engine.
    pub rank: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            n_random: 60,
            optimizer_steps: 40,
            n_starts: 3,
            n_states: 100,
            n_instances: 100,
            rank: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingSpec {
    /// `(k, l, n_blocks)` geometries to scan; defaults to `l = 1, 2, 3` at the configured `k` and `n_blocks`.
    pub family: Option<Vec<[usize; 3]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSpec {
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorFormat {
    #[default]
    Text,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub operator_format: OperatorFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            operator_format: OperatorFormat::Text,
        }
    }
}

fn default_local_dim() -> usize {
    2
}

fn all_checks() -> Vec<Check> {
    Check::ALL.to_vec()
}

/// The file as written by the user.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub beta: f64,
    #[serde(default = "default_local_dim")]
    pub local_dim: usize,
    pub n_sites: Option<usize>,
    pub potential: PotentialSpec,
    pub geometry: Option<Geometry>,
    #[serde(default = "all_checks")]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mixing: MixingSpec,
    #[serde(default)]
    pub evolve: EvolveSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Default evolution times.
pub const DEFAULT_TIMES: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: Option<u64>,
    pub beta: f64,
    pub local_dim: usize,
    pub n_sites: usize,
    pub potential: PotentialSpec,
    pub geometry: Geometry,
    pub checks: Vec<Check>,
    pub engine: Engine,
    pub sampling: Sampling,
    pub tolerances: Tolerances,
    pub mixing_family: Vec<[usize; 3]>,
    pub times: Vec<f64>,
    pub output: OutputSpec,
    pub dense_cap: usize,
    /// Directory against which relative term files are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub only: Option<Vec<Check>>,
    pub dense_cap: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies overrides, fills defaults and validates.
    pub fn resolve(
        self,
        overrides: &Overrides,
        default_checks: Option<&[Check]>,
        base_dir: &Path,
    ) -> LabResult<Resolved> {
        let pot_k = self.potential.k();
        let geometry = self.geometry.unwrap_or(Geometry {
            k: pot_k,
            l: 1,
            n_blocks: 1,
        });
        let splitting = standard_splitting(geometry.k, geometry.l, geometry.n_blocks)?;
        let checks = match (&overrides.only, default_checks) {
            (Some(only), _) => only.clone(),
            (None, Some(d)) => d.to_vec(),
            (None, None) => self.checks.clone(),
        };
        let checks = normalize_checks(&checks);
        let n_sites = self.n_sites.unwrap_or(splitting.n_sites);
        let mixing_family = self
            .mixing
            .family
            .unwrap_or_else(|| (1..=3).map(|l| [geometry.k, l, geometry.n_blocks]).collect());
        let resolved = Resolved {
            seed: overrides.seed.or(self.seed),
            beta: self.beta,
            local_dim: self.local_dim,
            n_sites,
            potential: self.potential,
            geometry,
            checks,
            engine: self.engine,
            sampling: self.sampling,
            tolerances: self.tolerances,
            mixing_family,
            times: self.evolve.times.unwrap_or_else(|| DEFAULT_TIMES.to_vec()),
            output: OutputSpec {
                dir: overrides.out.clone().unwrap_or(self.output.dir),
                ..self.output
            },
            dense_cap: overrides.dense_cap.unwrap_or(mlsi_core::lattice::DEFAULT_DIM_CAP),
            base_dir: base_dir.to_path_buf(),
        };
        resolved.validate(pot_k, splitting.n_sites)?;
        Ok(resolved)
    }
}

impl Resolved {
    fn validate(&self, pot_k: usize, split_sites: usize) -> LabResult<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be finite and non-negative, got {}", self.beta));
        }
        if self.local_dim < 2 {
            return bad(format!("local_dim must be at least 2, got {}", self.local_dim));
        }
        if self.n_sites == 0 {
            return bad("n_sites must be positive".into());
        }
        if self.checks.is_empty() {
            return bad("no checks requested".into());
        }
        if let Some(c) = self.checks.iter().find(|c| c.needs_seed()) {
            if self.seed.is_none() {
                return bad(format!("check {c} samples random states and needs a seed"));
            }
        }
        let s = &self.sampling;
        if s.n_random == 0 || s.n_states == 0 || s.n_instances == 0 || s.rank == 0 {
            return bad("sampling counts must be positive".into());
        }
        if self.geometry.k < pot_k {
            return bad(format!(
                "geometry k = {} is below the interaction range {pot_k}",
                self.geometry.k
            ));
        }
        let uses_geometry = self.checks.iter().any(|c| {
            matches!(
                c,
                Check::Step1 | Check::Step2 | Check::LemmaCre | Check::ConditionalMlsi | Check::Qf | Check::Assemble
            )
        });
        if uses_geometry && self.n_sites != split_sites {
            return bad(format!(
                "geometry (k={}, l={}, n={}) needs {split_sites} sites but n_sites = {}",
                self.geometry.k, self.geometry.l, self.geometry.n_blocks, self.n_sites
            ));
        }
        for &[k, l, n] in &self.mixing_family {
            standard_splitting(k, l, n)?;
            if k < pot_k {
                return bad(format!(
                    "mixing geometry k = {k} is below the interaction range {pot_k}"
                ));
            }
        }
        if self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || self.times.windows(2).any(|w| w[1] < w[0]) {
            return bad("evolution times must be finite, non-negative and sorted".into());
        }
        if self.dense_cap == 0 {
            return bad("dense cap must be positive".into());
        }
        Ok(())
    }

    /// Seed of a sampling check; validation guarantees presence.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
