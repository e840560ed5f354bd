//! Run configuration: a TOML file, overridden key by key by command-line flags.
//!
//! ```toml
//! process = "cnot-cz"        # or "cz-cnot"
//! seed = 7
//! shots = 3000               # omit for exact probabilities
//! output_dir = "out"
//! theta_grid = [0.0, 0.7853981633974483, 1.5707963267948966]
//!
//! [noise]                    # omit for ideal gates
//! gamma = 0.05               # amplitude damping, default 0.01
//! lambda = 0.05              # dephasing, default 0.01
//!
//! [volume]
//! samples = 200              # Bloch-sphere inputs per cloud
//! ```

use crate::CliError;
use ptomo_core::nonmarkov::default_theta_grid;
use ptomo_core::process::{ProcessKind, ProcessSpec, ShotConfig};
use ptomo_core::NoiseSpec;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MIN_SHOTS: u64 = 100;
pub const DEFAULT_VOLUME_SAMPLES: usize = 200;

/// Rate used for a noise parameter left unset once noise is switched on.
pub const DEFAULT_NOISE_RATE: f64 = 0.01;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeFile {
    pub samples: Option<usize>,
}

/// Raw contents of a config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub process: Option<String>,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub theta_grid: Option<Vec<f64>>,
    pub noise: Option<NoiseFile>,
    pub volume: Option<VolumeFile>,
}

/// Values given on the command line; `Some` wins over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub process: Option<String>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub noise_gamma: Option<f64>,
    pub noise_lambda: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub theta_grid: Option<Vec<f64>>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub process: ProcessKind,
    pub noise: Option<NoiseSpec>,
    pub shots: Option<u64>,
    pub seed: u64,
    pub theta_grid: Vec<f64>,
    pub output_dir: PathBuf,
    pub volume_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            process: ProcessKind::CnotCz,
            noise: None,
            shots: None,
            seed: 0,
            theta_grid: default_theta_grid(),
            output_dir: PathBuf::from("out"),
            volume_samples: DEFAULT_VOLUME_SAMPLES,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, over: &Overrides) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::resolve(file, over)
    }

    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self, CliError> {
        match path {
            None => Self::resolve(ConfigFile::default(), over),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text, over)
            }
        }
    }

    pub fn resolve(file: ConfigFile, over: &Overrides) -> Result<Self, CliError> {
        let d = Self::default();
        let name = over.process.clone().or(file.process);
        let process = match name {
            None => d.process,
            Some(n) => ProcessKind::parse(&n)
                .ok_or_else(|| CliError::Config(format!("unknown process {n:?} (cnot-cz, cz-cnot)")))?,
        };
        let requested = file.noise.is_some() || over.noise_gamma.is_some() || over.noise_lambda.is_some();
        let nf = file.noise.unwrap_or_default();
        let noise = if requested {
            let gamma = over.noise_gamma.or(nf.gamma).unwrap_or(DEFAULT_NOISE_RATE);
            let lambda = over.noise_lambda.or(nf.lambda).unwrap_or(DEFAULT_NOISE_RATE);
            Some(NoiseSpec::new(gamma, lambda).map_err(|e| CliError::Config(format!("noise: {e}")))?)
        } else {
            None
        };
        let shots = over.shots.or(file.shots);
        if let Some(s) = shots {
            if s < MIN_SHOTS {
                return Err(CliError::Config(format!("shots = {s}, need at least {MIN_SHOTS}")));
            }
        }
        let theta_grid = over.theta_grid.clone().or(file.theta_grid).unwrap_or(d.theta_grid);
        if theta_grid.is_empty() || theta_grid.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("theta grid must be a non-empty list of finite radians".into()));
        }
        let volume_samples = file.volume.and_then(|v| v.samples).unwrap_or(d.volume_samples);
        if volume_samples == 0 {
            return Err(CliError::Config("volume.samples must be positive".into()));
        }
        Ok(Self {
            process,
            noise,
            shots,
            seed: over.seed.or(file.seed).unwrap_or(d.seed),
            theta_grid,
            output_dir: over.output_dir.clone().or(file.output_dir).unwrap_or(d.output_dir),
            volume_samples,
        })
    }

    pub fn spec(&self) -> ProcessSpec {
        ProcessSpec::named(self.process, self.noise)
    }

    pub fn shot_config(&self) -> Option<ShotConfig> {
        self.shots.map(|s| ShotConfig::new(s, self.seed).expect("shots validated"))
    }

    /// Canonical description of everything that affects results. The output
    /// directory is left out so that identical runs hash identically.
    pub fn canonical(&self) -> String {
        let noise = match &self.noise {
            None => "none".to_string(),
            Some(n) => format!("{:?},{:?}", n.gamma_amp, n.lambda_phase),
        };
        let shots = self.shots.map_or("exact".to_string(), |s| s.to_string());
        let grid: Vec<String> = self.theta_grid.iter().map(|t| format!("{t:?}")).collect();
        format!(
            "process={};noise={noise};shots={shots};seed={};theta_grid={};volume_samples={}",
            self.process.name(),
            self.seed,
            grid.join(","),
            self.volume_samples
        )
    }

    /// SHA-256 of [`RunConfig::canonical`], lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_file_or_flags() {
        let cfg = RunConfig::load(None, &Overrides::default()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.theta_grid.len(), 13);
    }

    #[test]
    fn flags_override_file_keys() {
        let text = "process = \"cz-cnot\"\nseed = 3\nshots = 500\n[noise]\ngamma = 0.1\n";
        let over = Overrides { seed: Some(9), noise_lambda: Some(0.2), ..Default::default() };
        let cfg = RunConfig::from_toml(text, &over).unwrap();
        assert_eq!(cfg.process, ProcessKind::CzCnot);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.shots, Some(500));
        let n = cfg.noise.unwrap();
        assert_eq!((n.gamma_amp, n.lambda_phase), (0.1, 0.2));
    }

    #[test]
    fn unset_noise_rates_take_the_default() {
        let cfg = RunConfig::from_toml("[noise]\n", &Overrides::default()).unwrap();
        let n = cfg.noise.unwrap();
        assert_eq!((n.gamma_amp, n.lambda_phase), (DEFAULT_NOISE_RATE, DEFAULT_NOISE_RATE));
        let over = Overrides { noise_lambda: Some(0.0), ..Default::default() };
        let n = RunConfig::load(None, &over).unwrap().noise.unwrap();
        assert_eq!((n.gamma_amp, n.lambda_phase), (DEFAULT_NOISE_RATE, 0.0));
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let bad = [
            "process = \"swap\"",
            "shots = 10",
            "[noise]\ngamma = 1.5",
            "unknown_key = 1",
            "theta_grid = []",
            "[volume]\nsamples = 0",
        ];
        for text in bad {
            let err = RunConfig::from_toml(text, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig { output_dir: "elsewhere".into(), ..RunConfig::default() };
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
