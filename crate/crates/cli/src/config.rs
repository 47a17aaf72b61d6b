use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};
use tqkd::pipeline::Axis;

use crate::{ChainChoice, Table};

const PARAM_KEYS: [&str; 8] = [
    "lambda_p",
    "lambda_dc",
    "frame_width",
    "bins_per_frame",
    "sigma_d",
    "downtime_bins",
    "downtime_seconds",
    "reconciliation_efficiency",
];

/// Command options a config file may set.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    pub axis: Option<Axis>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub log: Option<bool>,
    pub table: Option<Table>,
    pub out: Option<PathBuf>,
    pub frames: Option<u64>,
    pub seed: Option<u64>,
    pub n_max: Option<usize>,
    pub kind: Option<ChainChoice>,
    pub addr: Option<String>,
}

/// A flat JSON object split into parameter keys and command options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub params: Map<String, Value>,
    pub options: FileOptions,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let Value::Object(all) = serde_json::from_str::<Value>(text)? else {
            bail!("config must be a JSON object");
        };
        let has_sigma = all.contains_key("sigma_d");
        let mut params = Map::new();
        let mut rest = Map::new();
        for (k, v) in all {
            if PARAM_KEYS.contains(&k.as_str()) {
                params.insert(k, v);
            } else if k == "fwhm" {
                if has_sigma {
                    bail!("config sets both fwhm and sigma_d");
                }
                let fwhm = v.as_f64().context("fwhm must be a number")?;
                params.insert("sigma_d".into(), tqkd::params::fwhm_to_sigma(fwhm)?.into());
            } else {
                rest.insert(k, v);
            }
        }
        let options = serde_json::from_value(Value::Object(rest)).context("config options")?;
        Ok(ConfigFile { params, options })
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConfigFile::from_json(&text).with_context(|| format!("in {}", path.display()))
}
