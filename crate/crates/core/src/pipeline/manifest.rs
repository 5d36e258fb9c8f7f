use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::MetricParams;
use crate::sampling::SamplingSpec;
use crate::watertight::RemeshConfig;

/// Default per-asset wall-clock limit.
pub const DEFAULT_BUDGET_SECS: f64 = 600.0;

/// Per-entry deltas applied on top of the global defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub remesh: Option<Value>,
    pub sampling: Option<Value>,
    pub metrics: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub asset_id: String,
    pub input_path: PathBuf,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub remesh: RemeshConfig,
    pub sampling: SamplingSpec,
    pub metrics: MetricParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalSettings {
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub defaults: Defaults,
    pub budget_secs: f64,
}

impl Default for GlobalSettings {
    fn default() -> Self {
        Self {
            output_dir: None,
            seed: 0,
            defaults: Defaults::default(),
            budget_secs: DEFAULT_BUDGET_SECS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub global: GlobalSettings,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GlobalLine {
    global: GlobalSettings,
}

/// Fully resolved settings for one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSettings {
    pub remesh: RemeshConfig,
    pub sampling: SamplingSpec,
    pub metrics: MetricParams,
}

fn overlay<T: Serialize + serde::de::DeserializeOwned>(base: &T, delta: Option<&Value>) -> Result<T> {
    let Some(delta) = delta else {
        return serde_json::from_value(serde_json::to_value(base).expect("serializable"))
            .map_err(|e| Error::invalid(e.to_string()));
    };
    let Value::Object(delta) = delta else {
        return Err(Error::invalid("overrides must be JSON objects"));
    };
    let mut v = serde_json::to_value(base).expect("serializable");
    let obj = v.as_object_mut().expect("settings serialize as objects");
    for (k, val) in delta {
        if !obj.contains_key(k) {
            return Err(Error::invalid(format!("unknown override key {k:?}")));
        }
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| Error::invalid(format!("bad override: {e}")))
}

/// Asset ids become directory names, so they must be plain path components.
pub fn check_asset_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 200
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("asset id {id:?} must be [A-Za-z0-9._-]+ and not start with '.'")))
    }
}

impl Manifest {
    /// Parses line-delimited JSON. An optional `{"global": {...}}` line sets
    /// run-wide settings; every other non-blank line is an entry. Relative
    /// input paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut global = None;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        let err = |line: usize, msg: String| Error::Parse {
            format: "manifest",
            msg: format!("line {line}: {msg}"),
        };
        for (n, line) in text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|e| err(n, e.to_string()))?;
            if value.get("global").is_some() {
                if global.is_some() {
                    return Err(err(n, "second global record".into()));
                }
                let g: GlobalLine = serde_json::from_value(value).map_err(|e| err(n, e.to_string()))?;
                global = Some(g.global);
                continue;
            }
            let mut entry: ManifestEntry = serde_json::from_value(value).map_err(|e| err(n, e.to_string()))?;
            check_asset_id(&entry.asset_id).map_err(|e| err(n, e.to_string()))?;
            if !seen.insert(entry.asset_id.clone()) {
                return Err(err(n, format!("duplicate asset id {:?}", entry.asset_id)));
            }
            if entry.input_path.is_relative() {
                entry.input_path = base_dir.join(&entry.input_path);
            }
            entries.push(entry);
        }
        let manifest = Self {
            global: global.unwrap_or_default(),
            entries,
        };
        // surface bad overrides before any work starts
        for e in &manifest.entries {
            manifest.settings(e).map_err(|x| Error::Parse {
                format: "manifest",
                msg: format!("asset {:?}: {x}", e.asset_id),
            })?;
        }
        if !(manifest.global.budget_secs > 0.0) {
            return Err(Error::invalid("budget_secs must be positive"));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Line-delimited form accepted by [`Manifest::parse`].
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&serde_json::json!({ "global": self.global })).expect("serializable");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("serializable"));
            out.push('\n');
        }
        out
    }

    /// Defaults with the entry's overrides applied and the global seed in
    /// place of any sampling seed.
    pub fn settings(&self, entry: &ManifestEntry) -> Result<AssetSettings> {
        let d = &self.global.defaults;
        let remesh: RemeshConfig = overlay(&d.remesh, entry.overrides.remesh.as_ref())?;
        let mut sampling: SamplingSpec = overlay(&d.sampling, entry.overrides.sampling.as_ref())?;
        let metrics: MetricParams = overlay(&d.metrics, entry.overrides.metrics.as_ref())?;
        remesh.validate()?;
        sampling.seed = self.global.seed;
        sampling.validate()?;
        Ok(AssetSettings { remesh, sampling, metrics })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_and_entries() {
        let text = r#"
{"global": {"seed": 7, "defaults": {"remesh": {"grid_res": 64}}}}
{"asset_id": "a", "input_path": "a.obj"}
{"asset_id": "b", "input_path": "/abs/b.ply", "overrides": {"remesh": {"directions": 32}}}
"#;
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.global.seed, 7);
        assert_eq!(m.entries[0].input_path, PathBuf::from("/data/a.obj"));
        assert_eq!(m.entries[1].input_path, PathBuf::from("/abs/b.ply"));
        let sa = m.settings(&m.entries[0]).unwrap();
        let sb = m.settings(&m.entries[1]).unwrap();
        assert_eq!(sa.remesh.grid_res, 64);
        assert_eq!(sa.remesh.directions, 64);
        assert_eq!(sb.remesh.directions, 32);
        assert_eq!(sb.remesh.grid_res, 64);
        assert_eq!(sa.sampling.seed, 7);
        let again = Manifest::parse(&m.to_jsonl(), Path::new("/")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_manifests() {
        let p = Path::new(".");
        assert!(Manifest::parse("{not json", p).is_err());
        let dup = "{\"asset_id\":\"a\",\"input_path\":\"x\"}\n{\"asset_id\":\"a\",\"input_path\":\"y\"}";
        assert!(Manifest::parse(dup, p).is_err());
        assert!(Manifest::parse("{\"asset_id\":\"../a\",\"input_path\":\"x\"}", p).is_err());
        let bad_override = "{\"asset_id\":\"a\",\"input_path\":\"x\",\"overrides\":{\"remesh\":{\"grid_rez\":9}}}";
        assert!(Manifest::parse(bad_override, p).is_err());
        let bad_value = "{\"asset_id\":\"a\",\"input_path\":\"x\",\"overrides\":{\"remesh\":{\"grid_res\":4}}}";
        assert!(Manifest::parse(bad_value, p).is_err());
        assert!(Manifest::parse("{\"asset_id\":\"a\"}", p).is_err());
    }
}
