use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rbflux::problem::{ParametricProblem, ProblemDescriptor};
use rbflux::rb::EstimatorConstant;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_NU: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainingSet {
    Random { count: usize, seed: u64 },
    Grid { per_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSet {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemDescriptor,
    pub tolerance: f64,
    pub train: TrainingSet,
    pub test: TestSet,
    pub estimator_constant: EstimatorConstant,
    pub max_basis: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemDescriptor::thermal_block(8, DEFAULT_NU),
            tolerance: 1e-4,
            train: TrainingSet::Random { count: 200, seed: 1 },
            test: TestSet { count: 20, seed: 2 },
            estimator_constant: EstimatorConstant::Divide,
            max_basis: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Config file and flag overrides shared by the commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration; defaults apply when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid cells per side of the unit square
    #[arg(long)]
    pub cells_per_side: Option<usize>,
    /// Interior penalty parameter
    #[arg(long)]
    pub nu: Option<f64>,
    /// Greedy tolerance
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Number of random training parameters
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Seed of the random training set
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of test parameters
    #[arg(long)]
    pub test_count: Option<usize>,
    /// Estimator constant: divide or multiply by the minimum diffusion
    #[arg(long, value_parser = parse_estimator_constant)]
    pub estimator_constant: Option<EstimatorConstant>,
    /// Cap on the reduced basis size
    #[arg(long)]
    pub max_basis: Option<usize>,
}

fn parse_estimator_constant(s: &str) -> std::result::Result<EstimatorConstant, String> {
    match s {
        "divide" => Ok(EstimatorConstant::Divide),
        "multiply" => Ok(EstimatorConstant::Multiply),
        other => Err(format!("expected divide or multiply, got {other:?}")),
    }
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.cells_per_side {
            config.problem = config.problem.with_cells_per_side(n);
        }
        if let Some(nu) = self.nu {
            config.problem = config.problem.with_nu(nu);
        }
        if let Some(t) = self.tolerance {
            config.tolerance = t;
        }
        if self.train_count.is_some() || self.seed.is_some() {
            let (count, seed) = match config.train {
                TrainingSet::Random { count, seed } => (count, seed),
                TrainingSet::Grid { .. } => (RunConfig::default_train_count(), 1),
            };
            config.train = TrainingSet::Random {
                count: self.train_count.unwrap_or(count),
                seed: self.seed.unwrap_or(seed),
            };
        }
        if let Some(c) = self.test_count {
            config.test.count = c;
        }
        if let Some(e) = self.estimator_constant {
            config.estimator_constant = e;
        }
        if let Some(m) = self.max_basis {
            config.max_basis = Some(m);
        }
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    fn default_train_count() -> usize {
        200
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            bail!("tolerance must be positive and finite, got {}", self.tolerance);
        }
        if let ProblemDescriptor::ThermalBlock { cells_per_side, .. } = self.problem {
            if cells_per_side % 2 != 0 {
                bail!("the thermal block needs an even number of cells per side, got {cells_per_side}");
            }
        }
        match self.train {
            TrainingSet::Random { count: 0, .. } | TrainingSet::Grid { per_dim: 0 } => {
                bail!("the training set is empty")
            }
            _ => {}
        }
        if self.max_basis == Some(0) {
            bail!("max_basis must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn build_problem(&self) -> Result<ParametricProblem> {
        Ok(self.problem.build()?)
    }

    pub fn training_points(&self, problem: &ParametricProblem) -> Vec<Vec<f64>> {
        let bx = problem.parameter_box();
        match self.train {
            TrainingSet::Random { count, seed } => bx.sample_uniform(count, seed),
            TrainingSet::Grid { per_dim } => bx.tensor_grid(per_dim),
        }
    }

    /// Random test parameters, skipping any that coincide with training points.
    pub fn test_points(&self, problem: &ParametricProblem, train: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let bx = problem.parameter_box();
        let mut extra = 0;
        loop {
            let points: Vec<Vec<f64>> = bx
                .sample_uniform(self.test.count + extra, self.test.seed)
                .into_iter()
                .filter(|p| !train.contains(p))
                .take(self.test.count)
                .collect();
            if points.len() == self.test.count {
                return points;
            }
            extra += self.test.count.max(1);
        }
    }
}
