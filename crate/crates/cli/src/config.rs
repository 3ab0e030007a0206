//! Scenario configuration: one JSON file per run, with command-line flags
//! taking precedence.

use std::fs;
use std::path::{Path, PathBuf};

use cvphase::conditional::{GridJoint, JointState, WitnessConfig, WitnessOperator};
use cvphase::fock::{thermal_weights, FockMixtureState, ThermalWeights, DEFAULT_TAIL};
use cvphase::gaussian::{attenuate, make_product, make_tmsv, GaussianState};
use cvphase::phase_space::io::{read_field, FieldFormat};
use cvphase::phase_space::{ModeLayout, Party};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Must match the subcommand when present.
    pub scenario: Option<String>,
    pub state: Option<StateSpec>,
    pub attenuation: Option<Attenuation>,
    pub sweep: Option<SweepSpec>,
    pub grid: GridSpec,
    pub witness: WitnessConfig,
    pub herald: Option<WitnessOperator>,
    pub scan: ScanSpec,
    pub axes: AxesSpec,
    pub dump: DumpSpec,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub field_format: Option<FieldFormat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Tmsv {
        r: f64,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        n_alice_modes: usize,
        n_bob_modes: usize,
    },
    /// Uncorrelated zero-mean Gaussian state.
    Product {
        alice_covariance: Vec<Vec<f64>>,
        bob_covariance: Vec<Vec<f64>>,
    },
    /// Either explicit `weights` or a thermal parameter `t`, optionally with
    /// a `cutoff`.
    FockMixture {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        t: Option<f64>,
        #[serde(default)]
        cutoff: Option<usize>,
    },
    /// A sampled joint Wigner function; `path` names the field header and is
    /// resolved against the config file's directory.
    Field {
        path: PathBuf,
        n_alice_modes: usize,
        n_bob_modes: usize,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attenuation {
    pub party: Party,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    /// TMSV squeezing.
    R,
    /// Transmissivity of a loss channel applied to the base state.
    Eta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub end: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_party")]
    pub party: Party,
}

fn default_party() -> Party {
    Party::Alice
}

impl SweepSpec {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let values = match (&self.values, self.start, self.end, self.steps) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 2 => {
                (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
            }
            _ => {
                return Err(CliError::Config(
                    "sweep needs either `values` or `start`, `end` and `steps` (≥ 2)".into(),
                ))
            }
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("sweep values must be finite and non-empty".into()));
        }
        if self.parameter == SweepParameter::Eta && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CliError::Config("transmissivities must lie in [0, 1]".into()));
        }
        Ok(values)
    }
}

/// The scenario's main grid: the homodyne table for steering statistics,
/// the sampling grid for exported fields.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub points: Option<usize>,
    pub half_width: Option<f64>,
}

/// Conditioning points: an inclusive `points_per_axis` lattice over
/// `center ± half_width` in every Alice coordinate, plus `random_points`
/// uniform draws from the same box.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub points_per_axis: usize,
    pub half_width: f64,
    pub center: Option<Vec<f64>>,
    pub random_points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 21,
            half_width: 4.0,
            center: None,
            random_points: 0,
        }
    }
}

/// Homodyne directions `g` (Alice) and `f` (Bob).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxesSpec {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl Default for AxesSpec {
    fn default() -> Self {
        Self {
            alice: vec![1.0, 0.0],
            bob: vec![1.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpTarget {
    Joint,
    #[default]
    Alice,
    Bob,
    Conditional,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpSpec {
    pub target: DumpTarget,
    /// Conditioning point for `conditional`.
    pub x_a: Option<Vec<f64>>,
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub grid_l: Option<f64>,
    pub seed: Option<u64>,
}

/// A validated configuration together with the directory relative paths are
/// resolved against.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn load(path: Option<&Path>, scenario: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let (mut config, base_dir) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let config: ScenarioConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, dir)
            }
            None => (ScenarioConfig::default(), PathBuf::new()),
        };
        if let Some(name) = &config.scenario {
            if name != scenario {
                return Err(CliError::Config(format!(
                    "config is for scenario `{name}`, not `{scenario}`"
                )));
            }
        }
        config.scenario = Some(scenario.to_string());
        if let Some(out) = &overrides.out {
            config.output = Some(out.clone());
        }
        if let Some(n) = overrides.grid_n {
            config.grid.points = Some(n);
        }
        if let Some(l) = overrides.grid_l {
            config.grid.half_width = Some(l);
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        let loaded = Self { config, base_dir };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        c.witness.validate().map_err(config_error)?;
        if let Some(n) = c.grid.points {
            if n < 16 || n % 2 != 0 {
                return Err(CliError::Config(format!("grid points must be even and ≥ 16, got {n}")));
            }
        }
        if let Some(l) = c.grid.half_width {
            if !(l > 0.0 && l.is_finite()) {
                return Err(CliError::Config(format!("grid half-width must be positive, got {l}")));
            }
        }
        if c.scan.points_per_axis < 2 || !(c.scan.half_width > 0.0 && c.scan.half_width.is_finite()) {
            return Err(CliError::Config(
                "scan needs at least 2 points per axis and a positive half-width".into(),
            ));
        }
        if let Some(a) = c.attenuation {
            if !(0.0..=1.0).contains(&a.eta) {
                return Err(CliError::Config("attenuation eta must lie in [0, 1]".into()));
            }
        }
        if let Some(sweep) = &c.sweep {
            sweep.resolve()?;
        }
        if let Some(StateSpec::Field { path, .. }) = &c.state {
            if !self.base_dir.join(path).is_file() {
                return Err(CliError::Config(format!("field file {} not found", path.display())));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.config
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn field_format(&self) -> FieldFormat {
        self.config.field_format.unwrap_or(FieldFormat::Csv)
    }

    /// Builds the configured state, or `default` when none is given.
    pub fn state_or(&self, default: StateSpec) -> Result<JointState, CliError> {
        let spec = self.config.state.clone().unwrap_or(default);
        let state = spec.build(&self.base_dir, self.config.witness.max_fock)?;
        self.attenuated(state)
    }

    pub fn attenuated(&self, state: JointState) -> Result<JointState, CliError> {
        match (self.config.attenuation, state) {
            (None, s) => Ok(s),
            (Some(a), JointState::Gaussian(g)) => Ok(JointState::Gaussian(
                attenuate(&g, a.party, a.eta).map_err(config_error)?,
            )),
            (Some(_), _) => Err(CliError::Config("attenuation applies to Gaussian states only".into())),
        }
    }
}

pub fn config_error(e: cvphase::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config("covariance must be a non-empty square matrix".into()));
    }
    Ok(DMatrix::from_row_slice(n, n, &rows.concat()))
}

impl StateSpec {
    /// `min_cutoff` keeps thermal mixtures without an explicit cutoff at
    /// least as deep as the witness search.
    pub fn build(&self, base_dir: &Path, min_cutoff: usize) -> Result<JointState, CliError> {
        let state = match self {
            StateSpec::Tmsv { r } => JointState::Gaussian(make_tmsv(*r).map_err(config_error)?),
            StateSpec::Gaussian {
                mean,
                covariance,
                n_alice_modes,
                n_bob_modes,
            } => {
                let layout = ModeLayout::new(*n_alice_modes, *n_bob_modes).map_err(config_error)?;
                JointState::Gaussian(
                    GaussianState::new(mean.clone(), matrix(covariance)?, layout)
                        .map_err(config_error)?,
                )
            }
            StateSpec::Product {
                alice_covariance,
                bob_covariance,
            } => JointState::Gaussian(
                make_product(&matrix(alice_covariance)?, &matrix(bob_covariance)?)
                    .map_err(config_error)?,
            ),
            StateSpec::FockMixture { weights, t, cutoff } => {
                let mixture = match (weights, t, cutoff) {
                    (Some(w), None, _) => FockMixtureState::new(w.clone()),
                    (None, Some(t), Some(c)) => thermal_weights(*t, *c),
                    (None, Some(t), None) => ThermalWeights::new(*t).and_then(|w| {
                        thermal_weights(*t, w.cutoff_for_tail(DEFAULT_TAIL).max(min_cutoff))
                    }),
                    _ => {
                        return Err(CliError::Config(
                            "fock-mixture needs exactly one of `weights` and `t`".into(),
                        ))
                    }
                };
                JointState::FockMixture(mixture.map_err(config_error)?)
            }
            StateSpec::Field {
                path,
                n_alice_modes,
                n_bob_modes,
            } => {
                let layout = ModeLayout::new(*n_alice_modes, *n_bob_modes).map_err(config_error)?;
                let field = read_field(&base_dir.join(path)).map_err(config_error)?;
                JointState::NumericGrid(GridJoint::new(field, layout).map_err(config_error)?)
            }
        };
        Ok(state)
    }
}
