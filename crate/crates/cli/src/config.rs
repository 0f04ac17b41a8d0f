use std::path::Path;

use anyhow::Context;
use dmpscale::dmp::DmpHyperparams;
use dmpscale::physio::PhysioParams;
use dmpscale::sim::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmpSettings {
    pub n_basis: usize,
    pub alpha_y: f64,
    pub beta_y: f64,
    pub alpha_x: f64,
}

impl Default for DmpSettings {
    fn default() -> Self {
        let h = DmpHyperparams::default();
        DmpSettings {
            n_basis: h.n_basis(),
            alpha_y: h.alpha_y,
            beta_y: h.beta_y,
            alpha_x: h.alpha_x,
        }
    }
}

impl DmpSettings {
    pub fn hyperparams(&self) -> dmpscale::Result<DmpHyperparams> {
        DmpHyperparams::new(self.alpha_y, self.beta_y, self.alpha_x, self.n_basis)
    }
}

/// Defaults for every command, read from `--config`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub dmp: DmpSettings,
    pub run: RunConfig,
    pub physio: PhysioParams,
}

impl Settings {
    pub fn load(path: Option<&Path>, seed: u64) -> anyhow::Result<Self> {
        let mut settings: Settings = match path {
            Some(p) => dmpscale::io::read_json(p).with_context(|| "reading --config")?,
            None => Settings::default(),
        };
        settings.run.seed = seed;
        Ok(settings)
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, anything else
/// replaces.
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, p) => *slot = p.clone(),
    }
}

/// `base` with the fields present in `patch` replaced.
pub fn overlay<T>(base: &T, patch: Option<&Value>) -> anyhow::Result<T>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let Some(patch) = patch else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut value = serde_json::to_value(base)?;
    merge_json(&mut value, patch);
    Ok(serde_json::from_value(value)?)
}
