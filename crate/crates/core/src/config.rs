//! TOML run configuration shared by every subcommand.

use crate::collision::AngularSpec;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quadrature::MomentumGridSpec;
use crate::solver::{InitialData, SolverConfig};
use crate::verify::VerifyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Everything a run needs; every section may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; overrides the seeds of the initial data and the test family.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub kernel: KernelSpec,
    /// Momentum grid used by `eval` and `moments`.
    pub grid: MomentumGridSpec,
    /// Angular shells used by `eval`.
    pub angular: AngularSpec,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("out"),
            kernel: KernelSpec::default(),
            grid: MomentumGridSpec { sphere_theta: 3, sphere_phi: 6, ..MomentumGridSpec::default() },
            angular: AngularSpec::default(),
            solver: SolverConfig::default(),
            initial: InitialData::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Replaces the master seed and propagates it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks every section; no computation starts before this succeeds.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.grid.validate()?;
        self.angular.validate()?;
        self.solver_config().validate()?;
        self.initial.validate()?;
        self.verify_config().validate()?;
        Ok(())
    }

    /// Solver settings with the run's kernel.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { kernel: self.kernel, ..self.solver.clone() }
    }

    /// Initial data seeded by the master seed.
    pub fn initial_data(&self) -> InitialData {
        InitialData { seed: self.seed, ..self.initial.clone() }
    }

    /// Verification settings seeded by the master seed.
    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig { seed: self.seed, ..self.verify.clone() }
    }

    /// SHA-256 of the canonical TOML form, as lowercase hex. The output
    /// directory does not affect any result and is left out.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
