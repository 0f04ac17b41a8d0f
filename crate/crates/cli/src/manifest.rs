//! Manifests for `simulate` and `metrics`. Relative paths inside a manifest
//! are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dmpscale::dmp::{self, DmpModel};
use dmpscale::sim::{ForceProfileSpec, SyntheticDemoSpec};
use dmpscale::trajectory::Obstacle;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{overlay, DmpSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// Metres.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneRef {
    Path(PathBuf),
    Inline(Vec<Obstacle>),
}

/// One simulated transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Demonstration to train on; exclusive with `model`.
    #[serde(default)]
    pub demo: Option<SyntheticDemoSpec>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Overrides of the DMP settings used with `demo`.
    #[serde(default)]
    pub dmp: Option<Value>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub scene: Option<SceneRef>,
    #[serde(default = "ForceProfileSpec::zero")]
    pub profile: ForceProfileSpec,
    /// Overrides of the run configuration.
    #[serde(default)]
    pub config: Option<Value>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub subject: Option<Subject>,
    pub output_dir: PathBuf,
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Fails naming the path when it does not exist.
pub fn existing(base: &Path, p: &Path) -> anyhow::Result<PathBuf> {
    let full = resolve(base, p);
    if !full.exists() {
        bail!("referenced file {} does not exist", full.display());
    }
    Ok(full)
}

pub fn load_manifest<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<(T, PathBuf)> {
    if !path.exists() {
        bail!("manifest {} does not exist", path.display());
    }
    let value: T = dmpscale::io::read_json(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((value, dir))
}

impl RunManifest {
    /// Loads or trains the model.
    pub fn model(&self, base: &Path, defaults: &DmpSettings) -> anyhow::Result<DmpModel> {
        match (&self.demo, &self.model) {
            (Some(_), Some(_)) => bail!("give either `demo` or `model`, not both"),
            (None, None) => bail!("manifest needs a `demo` or a `model`"),
            (None, Some(p)) => Ok(DmpModel::load(existing(base, p)?)?),
            (Some(spec), None) => {
                let spec = match spec {
                    SyntheticDemoSpec::FromFile { path } => SyntheticDemoSpec::FromFile {
                        path: existing(base, path)?,
                    },
                    other => other.clone(),
                };
                let demo = dmpscale::sim::make_demo(&spec)?;
                let settings: DmpSettings = overlay(defaults, self.dmp.as_ref()).context("dmp overrides")?;
                Ok(dmp::learn_weights(&demo, &settings.hyperparams()?)?)
            }
        }
    }

    pub fn scene(&self, base: &Path) -> anyhow::Result<Vec<Obstacle>> {
        match &self.scene {
            None => Ok(Vec::new()),
            Some(SceneRef::Path(p)) => Ok(Obstacle::load_scene(existing(base, p)?)?),
            Some(SceneRef::Inline(list)) => {
                for ob in list {
                    ob.validate()?;
                }
                Ok(list.clone())
            }
        }
    }
}

/// One executed run for the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRun {
    pub mode: String,
    pub subject: String,
    /// Metres.
    pub height: f64,
    /// Seconds; otherwise read from `log` or `run_dir/log.csv`.
    #[serde(default)]
    pub wall_time: Option<f64>,
    #[serde(default)]
    pub log: Option<PathBuf>,
    /// Trajectory CSV; otherwise `run_dir/trajectory.csv`.
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    /// Output directory of a `simulate` run.
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsManifest {
    pub runs: Vec<MetricsRun>,
    /// Modes that must be present; defaults to those seen in `runs`.
    #[serde(default)]
    pub modes: Option<Vec<String>>,
    #[serde(default)]
    pub kinematics: Option<dmpscale::trajectory::KinematicMap>,
}
