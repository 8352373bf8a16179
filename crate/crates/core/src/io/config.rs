use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::NoiseSpec;
use crate::lens::LensSpec;
use crate::scheme::RasterSpec;
use crate::solvers::{Algorithm, InitMethod, SolverConfig, SyncKernel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectSource {
    Phantom,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub source: ObjectSource,
    pub n: usize,
    /// Complex `PTYC` array, required when `source = "file"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub dx: f64,
    pub dy: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub shear: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_std: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub method: InitMethod,
    #[serde(default = "default_keep")]
    pub percentile_keep: f64,
}

fn default_keep() -> f64 {
    0.8
}

fn default_beta() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub algorithm: Algorithm,
    pub iterations: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_kernel")]
    pub sync_kernel: SyncKernel,
    pub seed: u64,
    #[serde(default)]
    pub stop_eps_delta: Option<f64>,
}

fn default_kernel() -> SyncKernel {
    SyncKernel::Weighted
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

/// A complete experiment: object, lens, scan, noise, initializer, solver, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub object: ObjectSection,
    pub lens: LensSpec,
    pub scheme: SchemeSection,
    pub noise: NoiseSection,
    pub init: InitSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.object.source == ObjectSource::File && self.object.path.is_none() {
            return Err(Error::Config("object.source = \"file\" needs object.path".into()));
        }
        if self.lens.m > self.object.n {
            return Err(Error::Config(format!("lens side {} exceeds object side {}", self.lens.m, self.object.n)));
        }
        if !(self.noise.sigma_std >= 0.0) {
            return Err(Error::Config("noise.sigma_std must be >= 0".into()));
        }
        self.lens.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.solver_config().validate()
    }

    pub fn raster(&self) -> RasterSpec {
        RasterSpec {
            n: self.object.n,
            m: self.lens.m,
            dx: self.scheme.dx,
            dy: self.scheme.dy,
            jitter: self.scheme.jitter,
            shear: self.scheme.shear,
            seed: self.scheme.seed,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec { sigma_std: self.noise.sigma_std, seed: self.noise.seed }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            algorithm: self.solver.algorithm,
            iterations: self.solver.iterations,
            beta: self.solver.beta,
            init: self.init.method,
            percentile_keep: self.init.percentile_keep,
            sync_kernel: self.solver.sync_kernel,
            stop_eps_delta: self.solver.stop_eps_delta,
            seed: self.solver.seed,
            ..SolverConfig::default()
        }
    }
}
