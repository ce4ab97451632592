//! JSON experiment configuration. One file fully determines a run; unknown
//! keys are rejected so stale configs fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{make_gridworld, make_random_cmdp_sparse, RhoSpec};
use crate::features::FeatureMap;
use crate::harness::HarnessError;
use crate::model::TabularCmdp;
use crate::solvers::{AlgorithmSpec, CoresetSpec, DualCapSpec, EstimatorSpec, SolveConfig};

/// A hyperparameter that is either a single value or a sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Scalar(f64),
    Grid(Vec<f64>),
}

impl GridValue {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridValue::Scalar(v) => vec![*v],
            GridValue::Grid(v) => v.clone(),
        }
    }

    fn single(&self, name: &str) -> Result<f64, HarnessError> {
        let values = self.values();
        if values.len() != 1 {
            return Err(HarnessError::Config(format!(
                "`{name}` must be a single value here (got a grid of {}); use the sweep command",
                values.len()
            )));
        }
        Ok(values[0])
    }
}

impl Default for GridValue {
    fn default() -> Self {
        GridValue::Scalar(0.0)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoConfig {
    #[default]
    Uniform,
    Point(usize),
    Custom(Vec<f64>),
}

impl RhoConfig {
    fn to_spec(&self) -> RhoSpec {
        match self {
            RhoConfig::Uniform => RhoSpec::Uniform,
            RhoConfig::Point(s) => RhoSpec::Point(*s),
            RhoConfig::Custom(v) => RhoSpec::Custom(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Gridworld {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default)]
        rho: RhoConfig,
    },
    Random {
        n_states: usize,
        n_actions: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
        seed: u64,
        #[serde(default)]
        sparsity: f64,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default)]
        rho: RhoConfig,
    },
}

fn default_gamma() -> f64 {
    0.9
}

impl EnvConfig {
    pub fn build(&self) -> Result<TabularCmdp, HarnessError> {
        match self {
            EnvConfig::Gridworld { gamma, b, rho } => {
                Ok(make_gridworld(*gamma, *b, &rho.to_spec())?)
            }
            EnvConfig::Random {
                n_states,
                n_actions,
                gamma,
                seed,
                sparsity,
                b,
                rho,
            } => {
                let mut cmdp =
                    make_random_cmdp_sparse(*n_states, *n_actions, *gamma, *seed, *sparsity);
                if let Some(b) = b {
                    cmdp.threshold = *b;
                }
                if !matches!(rho, RhoConfig::Uniform) {
                    cmdp.rho = rho.to_spec_rho(*n_states);
                    cmdp.validate()
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                }
                Ok(cmdp)
            }
        }
    }
}

impl RhoConfig {
    fn to_spec_rho(&self, n_states: usize) -> Vec<f64> {
        match self.to_spec() {
            RhoSpec::Uniform => vec![1.0 / n_states as f64; n_states],
            RhoSpec::Point(s) => {
                let mut rho = vec![0.0; n_states];
                rho[s] = 1.0;
                rho
            }
            RhoSpec::Custom(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    Cbp,
    CbpPractical {
        alpha_lambda: GridValue,
    },
    Gda {
        alpha_pi: GridValue,
        alpha_lambda: GridValue,
    },
    GdaTheory {
        #[serde(default)]
        anytime: bool,
    },
    Crpo {
        alpha_pi: GridValue,
        #[serde(default)]
        eta_tol: GridValue,
    },
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Cbp => "cbp",
            AlgorithmConfig::CbpPractical { .. } => "cbp_practical",
            AlgorithmConfig::Gda { .. } => "gda",
            AlgorithmConfig::GdaTheory { .. } => "gda_theory",
            AlgorithmConfig::Crpo { .. } => "crpo",
        }
    }

    /// The run specification when no field carries a grid.
    pub fn single(&self) -> Result<AlgorithmSpec, HarnessError> {
        Ok(match self {
            AlgorithmConfig::Cbp => AlgorithmSpec::Cbp,
            AlgorithmConfig::CbpPractical { alpha_lambda } => AlgorithmSpec::CbpPractical {
                alpha_lambda: alpha_lambda.single("alpha_lambda")?,
            },
            AlgorithmConfig::Gda {
                alpha_pi,
                alpha_lambda,
            } => AlgorithmSpec::Gda {
                alpha_pi: alpha_pi.single("alpha_pi")?,
                alpha_lambda: alpha_lambda.single("alpha_lambda")?,
            },
            AlgorithmConfig::GdaTheory { anytime } => {
                AlgorithmSpec::GdaTheory { anytime: *anytime }
            }
            AlgorithmConfig::Crpo { alpha_pi, eta_tol } => AlgorithmSpec::Crpo {
                alpha_pi: alpha_pi.single("alpha_pi")?,
                eta_tol: eta_tol.single("eta_tol")?,
            },
        })
    }

    /// Cross product of the declared grids, in declaration order.
    pub fn cells(&self) -> Vec<(String, AlgorithmSpec)> {
        match self {
            AlgorithmConfig::Cbp => vec![("cbp".into(), AlgorithmSpec::Cbp)],
            AlgorithmConfig::GdaTheory { anytime } => vec![(
                "gda_theory".into(),
                AlgorithmSpec::GdaTheory { anytime: *anytime },
            )],
            AlgorithmConfig::CbpPractical { alpha_lambda } => alpha_lambda
                .values()
                .into_iter()
                .map(|al| {
                    (
                        format!("alpha_lambda={al}"),
                        AlgorithmSpec::CbpPractical { alpha_lambda: al },
                    )
                })
                .collect(),
            AlgorithmConfig::Gda {
                alpha_pi,
                alpha_lambda,
            } => {
                let mut cells = Vec::new();
                for ap in alpha_pi.values() {
                    for al in alpha_lambda.values() {
                        cells.push((
                            format!("alpha_pi={ap},alpha_lambda={al}"),
                            AlgorithmSpec::Gda {
                                alpha_pi: ap,
                                alpha_lambda: al,
                            },
                        ));
                    }
                }
                cells
            }
            AlgorithmConfig::Crpo { alpha_pi, eta_tol } => {
                let mut cells = Vec::new();
                for ap in alpha_pi.values() {
                    for et in eta_tol.values() {
                        cells.push((
                            format!("alpha_pi={ap},eta_tol={et}"),
                            AlgorithmSpec::Crpo {
                                alpha_pi: ap,
                                eta_tol: et,
                            },
                        ));
                    }
                }
                cells
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    #[default]
    Exact,
    MonteCarlo {
        m: usize,
        #[serde(default = "default_eps_trunc")]
        eps_trunc: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_eps_trunc() -> f64 {
    1e-3
}

fn default_delta() -> f64 {
    0.05
}

impl EstimatorConfig {
    fn to_spec(self) -> EstimatorSpec {
        match self {
            EstimatorConfig::Exact => EstimatorSpec::Exact,
            EstimatorConfig::MonteCarlo {
                m,
                eps_trunc,
                delta,
            } => EstimatorSpec::MonteCarlo {
                m,
                eps_trunc,
                delta,
            },
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureConfig {
    #[default]
    OneHot,
    TileCoding {
        grid: (usize, usize),
        tile: (usize, usize),
        #[serde(default = "default_tilings")]
        n_tilings: usize,
        #[serde(default)]
        offsets: Option<Vec<(usize, usize)>>,
    },
}

fn default_tilings() -> usize {
    1
}

impl FeatureConfig {
    /// Resolves to a concrete map; `None` lets the solver default to one-hot.
    pub fn build(&self, cmdp: &TabularCmdp) -> Result<Option<FeatureMap>, HarnessError> {
        match self {
            FeatureConfig::OneHot => Ok(None),
            FeatureConfig::TileCoding {
                grid,
                tile,
                n_tilings,
                offsets,
            } => {
                if grid.0 * grid.1 != cmdp.n_states {
                    return Err(HarnessError::Config(format!(
                        "tile-coding grid {:?} does not cover {} states",
                        grid, cmdp.n_states
                    )));
                }
                Ok(Some(FeatureMap::tile_coding(
                    *grid,
                    cmdp.n_actions,
                    *tile,
                    *n_tilings,
                    offsets.clone(),
                )?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoresetConfig {
    #[default]
    FullEnumeration,
    Greedy {
        eps_prime: f64,
        #[serde(default = "default_nu")]
        nu: f64,
    },
}

fn default_nu() -> f64 {
    1.0
}

impl CoresetConfig {
    fn to_spec(self) -> CoresetSpec {
        match self {
            CoresetConfig::FullEnumeration => CoresetSpec::FullEnumeration,
            CoresetConfig::Greedy { eps_prime, nu } => CoresetSpec::Greedy { eps_prime, nu },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DualCapConfig {
    Estimated {
        #[serde(default = "default_pre_iterations")]
        pre_iterations: usize,
    },
    Oracle,
    Fixed {
        value: f64,
    },
}

fn default_pre_iterations() -> usize {
    100
}

impl Default for DualCapConfig {
    fn default() -> Self {
        DualCapConfig::Estimated {
            pre_iterations: default_pre_iterations(),
        }
    }
}

impl DualCapConfig {
    fn to_spec(self) -> DualCapSpec {
        match self {
            DualCapConfig::Estimated { pre_iterations } => {
                DualCapSpec::Estimated { pre_iterations }
            }
            DualCapConfig::Oracle => DualCapSpec::Oracle,
            DualCapConfig::Fixed { value } => DualCapSpec::Fixed(value),
        }
    }
}

/// One experiment: environment, algorithm (possibly with grids), estimation
/// route, horizon and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub coreset: CoresetConfig,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub entropy_nu: f64,
    #[serde(default)]
    pub dual_cap: DualCapConfig,
    #[serde(default)]
    pub visited_only: bool,
    #[serde(default)]
    pub lambda0: f64,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_output() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("`seeds` must be nonempty".into()));
        }
        if self.entropy_nu < 0.0 {
            return Err(HarnessError::Config(
                "`entropy_nu` must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash of the full config document.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Solver configuration for a fully resolved algorithm cell.
    pub fn solve_config(
        &self,
        cmdp: &TabularCmdp,
        algorithm: AlgorithmSpec,
        seed: u64,
    ) -> Result<SolveConfig, HarnessError> {
        Ok(SolveConfig {
            algorithm,
            estimator: self.estimator.to_spec(),
            features: self.features.build(cmdp)?,
            coreset: self.coreset.to_spec(),
            iterations: self.iterations,
            seed,
            entropy_nu: self.entropy_nu,
            dual_cap: self.dual_cap.to_spec(),
            visited_only: self.visited_only,
            lambda0: self.lambda0,
        })
    }
}
