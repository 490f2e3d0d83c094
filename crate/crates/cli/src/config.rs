use std::path::{Path, PathBuf};

use serde::Deserialize;

use needlets::mcharness::ExperimentConfig;
use needlets::model::DEFAULT_WINDOW_GRID;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub window: WindowSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub num_coeffs: Vec<f64>,
    #[serde(default = "one")]
    pub den_coeffs: Vec<f64>,
}

fn one() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub grid_size: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { grid_size: DEFAULT_WINDOW_GRID }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub j: Vec<u32>,
    #[serde(default)]
    pub q: Vec<usize>,
    #[serde(default)]
    pub z: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub threads: Option<usize>,
    #[serde(default = "default_order")]
    pub expansion_order: usize,
}

fn default_replicates() -> usize {
    2000
}

fn default_order() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("needlets-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), formats: default_formats() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.spectrum_model()?;
        needlets::NeedletWindow::new(self.window.grid_size).map_err(|e| CliError::Config(e.to_string()))?;
        if self.experiment.replicates < 2 {
            return Err(CliError::Config("replicates must be >= 2".into()));
        }
        if self.experiment.threads == Some(0) {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats must not be empty".into()));
        }
        Ok(())
    }

    pub fn spectrum_model(&self) -> Result<needlets::PowerSpectrum, CliError> {
        let s = &self.spectrum;
        needlets::PowerSpectrum::new(s.alpha, s.num_coeffs.clone(), s.den_coeffs.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            alpha: self.spectrum.alpha,
            num_coeffs: self.spectrum.num_coeffs.clone(),
            den_coeffs: self.spectrum.den_coeffs.clone(),
            window_grid: self.window.grid_size,
            js: self.experiment.j.clone(),
            qs: self.experiment.q.clone(),
            zs: self.experiment.z.clone(),
            replicates: self.experiment.replicates,
            master_seed: self.experiment.master_seed,
            expansion_order: self.experiment.expansion_order,
        }
    }
}

pub fn check_qs(qs: &[usize]) -> Result<(), CliError> {
    if qs.is_empty() {
        return Err(CliError::Config("q list must not be empty".into()));
    }
    if qs.iter().any(|&q| q < 2) {
        return Err(CliError::Config("q must be ≥ 2".into()));
    }
    Ok(())
}

pub fn check_js(js: &[u32]) -> Result<(), CliError> {
    if js.is_empty() {
        return Err(CliError::Config("j list must not be empty".into()));
    }
    if let Some(j) = js.iter().find(|&&j| j == 0 || j > needlets::model::MAX_SCALE) {
        return Err(CliError::Config(format!("j = {j} is outside 1..={}", needlets::model::MAX_SCALE)));
    }
    Ok(())
}
