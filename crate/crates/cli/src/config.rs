use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{AnglesArgs, BellArgs, DesignArgs, FitArgs, Format, SimulateArgs, StatsArgs};

/// Contents of a `--config` file. Relative paths inside it are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub crystal: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub angles: Option<AnglesArgs>,
    pub design: Option<DesignArgs>,
    pub stats: Option<StatsArgs>,
    pub fit: Option<FitArgs>,
    pub bell: Option<BellArgs>,
    pub simulate: Option<SimulateArgs>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Overlays every flag that was given on top of the file block.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&T>) -> Result<T> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let mut base = serde_json::to_value(file)?;
    let Value::Object(over) = serde_json::to_value(flags)? else {
        bail!("command options must serialize to an object");
    };
    let Value::Object(target) = &mut base else {
        bail!("config block must be a JSON object");
    };
    for (k, v) in over {
        if !v.is_null() {
            target.insert(k, v);
        }
    }
    Ok(serde_json::from_value(base)?)
}
