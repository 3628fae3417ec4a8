use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A configuration problem the user can fix; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Fully resolved run description, echoed next to every output.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub grid: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tolerances: BTreeMap<String, f64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub params: BTreeMap<String, Value>,
}

/// Values from a `--config` file: top-level `seed`, `grid`, `threads`, `out`
/// and one flat parameter object per subcommand.
pub struct Settings {
    top: Map<String, Value>,
    section: Map<String, Value>,
    pub run: RunConfig,
}

impl Settings {
    pub fn load(path: Option<&Path>, subcommand: &str) -> Result<Settings> {
        let top = match path {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(usage(format!("{}: config must be a JSON object", p.display()))),
                    Err(e) => return Err(usage(format!("{}: {e}", p.display()))),
                }
            }
        };
        let section = match top.get(subcommand) {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(usage(format!("config section `{subcommand}` must be an object"))),
        };
        for (k, v) in &section {
            if v.is_object() || v.is_array() {
                return Err(usage(format!("config `{subcommand}.{k}` must be a scalar")));
            }
        }
        Ok(Settings {
            top,
            section,
            run: RunConfig {
                subcommand: subcommand.to_string(),
                ..RunConfig::default()
            },
        })
    }

    fn lookup<T: DeserializeOwned>(map: &Map<String, Value>, key: &str, scope: &str) -> Result<Option<T>> {
        match map.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| usage(format!("config `{scope}{key}`: {e}"))),
        }
    }

    pub fn global<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Self::lookup(&self.top, key, ""),
        }
    }

    /// Flag, else the config value, else `default`; recorded in the echo.
    pub fn param<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: DeserializeOwned + Serialize,
    {
        let v = self.opt_param(key, flag)?.unwrap_or(default);
        self.run.params.insert(key.into(), serde_json::to_value(&v)?);
        Ok(v)
    }

    pub fn opt_param<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: DeserializeOwned + Serialize,
    {
        let scope = format!("{}.", self.run.subcommand);
        let v = match flag {
            Some(v) => Some(v),
            None => Self::lookup(&self.section, key, &scope)?,
        };
        if let Some(v) = &v {
            self.run.params.insert(key.into(), serde_json::to_value(v)?);
        }
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: DeserializeOwned + Serialize,
    {
        match self.opt_param(key, flag)? {
            Some(v) => Ok(v),
            None => bail!(usage(format!("missing required parameter `--{key}`"))),
        }
    }

    /// Reject config keys that the subcommand never asked for.
    pub fn finish(&self) -> Result<()> {
        for k in self.section.keys() {
            if !self.run.params.contains_key(k) {
                return Err(usage(format!("unknown config key `{}.{k}`", self.run.subcommand)));
            }
        }
        Ok(())
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.run.inputs.insert(role.into(), path.display().to_string());
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.run.outputs.insert(role.into(), path.display().to_string());
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.run.tolerances.insert(name.into(), value);
    }

    /// Write the echo as `config.json` inside a directory output, or as
    /// `<stem>.config.json` beside a file output.
    pub fn echo(&self, out: &Path, out_is_dir: bool) -> Result<PathBuf> {
        let path = if out_is_dir {
            out.join("config.json")
        } else {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.with_file_name(format!("{stem}.config.json"))
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(&self.run)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
