//! Run configuration: a TOML file with nested sections mirroring the
//! library configs. Unknown keys are rejected; every command writes its
//! resolved configuration next to its outputs so runs are reproducible
//! from the artifacts alone.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use qtrack_core::descriptors::DescriptorConfig;
use qtrack_core::graph::CutConfig;
use qtrack_core::model::{Mode, ModelConfig, ScalingConstants};
use qtrack_core::pqc::{EncodingAxis, PqcFamily};
use qtrack_core::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub events_dir: PathBuf,
    pub graphs_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            events_dir: "data/events".into(),
            graphs_dir: "data/graphs".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub n_events: usize,
    pub tracks_per_event: usize,
    pub seed: u64,
    pub layer_radii_mm: Vec<f64>,
}

impl Default for GenerateSection {
    fn default() -> Self {
        GenerateSection {
            n_events: 20,
            tracks_per_event: 20,
            seed: 1,
            layer_radii_mm: qtrack_core::event::DEFAULT_LAYER_RADII_MM.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutsSection {
    pub pt_min_gev: f64,
    pub eta_max: f64,
    pub dphi_dr_max: f64,
    pub z0_max_mm: f64,
    pub barrel_volumes: Vec<u32>,
}

impl Default for CutsSection {
    fn default() -> Self {
        let c = CutConfig::default();
        CutsSection {
            pt_min_gev: c.pt_min_gev,
            eta_max: c.eta_max,
            dphi_dr_max: c.dphi_dr_max,
            z0_max_mm: c.z0_max_mm,
            barrel_volumes: c.barrel_volumes,
        }
    }
}

impl CutsSection {
    pub fn to_cut_config(&self) -> CutConfig {
        CutConfig {
            pt_min_gev: self.pt_min_gev,
            eta_max: self.eta_max,
            dphi_dr_max: self.dphi_dr_max,
            z0_max_mm: self.z0_max_mm,
            barrel_volumes: self.barrel_volumes.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    /// Explicit event ids; empty means every event found in `events_dir`.
    pub events: Vec<u64>,
    pub histogram_bins: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            events: Vec::new(),
            histogram_bins: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub preset: String,
    pub hidden_dim: usize,
    pub n_qubits: usize,
    pub n_iterations: usize,
    pub n_layers: usize,
    pub encoding_axis: String,
    pub mode: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            preset: "circuit10".into(),
            hidden_dim: 4,
            n_qubits: 4,
            n_iterations: 3,
            n_layers: 1,
            encoding_axis: "y".into(),
            mode: "hybrid".into(),
        }
    }
}

pub fn parse_axis(s: &str) -> Result<EncodingAxis> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(EncodingAxis::X),
        "y" => Ok(EncodingAxis::Y),
        "z" => Ok(EncodingAxis::Z),
        other => bail!("unknown encoding axis '{}' (expected x, y or z)", other),
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s.to_ascii_lowercase().as_str() {
        "hybrid" => Ok(Mode::Hybrid),
        "classical" => Ok(Mode::Classical),
        other => bail!("unknown mode '{}' (expected hybrid or classical)", other),
    }
}

impl ModelSection {
    pub fn to_model_config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::preset(
            &self.preset,
            self.hidden_dim,
            self.n_qubits,
            self.n_iterations,
            self.n_layers,
        )?;
        cfg.encoding_axis = parse_axis(&self.encoding_axis)?;
        cfg.mode = parse_mode(&self.mode)?;
        cfg.scaling = ScalingConstants::default();
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub split_ratio: f64,
    pub threshold: f64,
    pub split_seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seeds: t.seeds,
            split_ratio: t.split_ratio,
            threshold: t.threshold,
            split_seed: t.split_seed,
        }
    }
}

impl TrainingSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seeds: self.seeds.clone(),
            split_ratio: self.split_ratio,
            threshold: self.threshold,
            split_seed: self.split_seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorsSection {
    pub families: Vec<String>,
    pub n_qubits: usize,
    pub n_layers: Vec<usize>,
    pub n_samples: usize,
    pub n_bins: usize,
    pub seeds: Vec<u64>,
    pub dump_templates: bool,
}

impl Default for DescriptorsSection {
    fn default() -> Self {
        DescriptorsSection {
            families: vec!["circuit10".into(), "circuit19".into()],
            n_qubits: 4,
            n_layers: vec![1, 2, 3],
            n_samples: 5000,
            n_bins: 75,
            seeds: vec![1],
            dump_templates: false,
        }
    }
}

impl DescriptorsSection {
    pub fn families(&self) -> Result<Vec<PqcFamily>> {
        self.families
            .iter()
            .map(|s| s.parse::<PqcFamily>().map_err(Into::into))
            .collect()
    }

    pub fn descriptor_config(&self, seed: u64) -> DescriptorConfig {
        DescriptorConfig {
            n_samples: self.n_samples,
            n_bins: self.n_bins,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// One of: embedding, n_layers, n_iterations, hidden_dim.
    pub axis: String,
    /// Grid values for the numeric axes.
    pub values: Vec<usize>,
    /// Axes for the embedding sweep.
    pub axes: Vec<String>,
    /// Model modes to run at every grid point.
    pub modes: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: "hidden_dim".into(),
            values: vec![2, 4, 6, 8],
            axes: vec!["x".into(), "y".into(), "z".into()],
            modes: vec!["hybrid".into()],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: PathsSection,
    pub generate: GenerateSection,
    pub cuts: CutsSection,
    pub preprocess: PreprocessSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub descriptors: DescriptorsSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
            None => Ok(RunConfig::default()),
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Stable hash of the resolved configuration, carried by artifacts.
    pub fn hash(&self) -> Result<String> {
        Ok(qtrack_core::provenance::fnv1a64_hex(
            self.to_toml()?.as_bytes(),
        ))
    }

    /// Writes the resolved config next to a command's outputs.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("resolved-config.toml"), self.to_toml()?)?;
        Ok(())
    }
}
