use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use swimmer_core::config::ScenarioConfig;
use swimmer_core::Vec3;

pub struct OutDir {
    pub path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> std::io::Result<()> {
        let p = self.path.join(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(p, contents)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("json serializes");
        s.push('\n');
        self.write(name, &s)
    }

    /// `meta.json`: the command line, the resolved scenario and the results.
    pub fn meta(&self, argv: &[String], config: Option<&ScenarioConfig>, results: Value) -> std::io::Result<()> {
        let mut meta = json!({
            "program": "swimlab",
            "version": env!("CARGO_PKG_VERSION"),
            "argv": argv,
            "results": results,
        });
        if let Some(c) = config {
            meta["config"] = serde_json::to_value(c).expect("config serializes");
            meta["config_toml"] = Value::String(c.to_toml_string());
        }
        self.write_json("meta.json", &meta)
    }
}

pub fn vec_json(v: &Vec3, dim: usize) -> Value {
    json!(v.iter().take(dim).copied().collect::<Vec<f64>>())
}

/// JSON has no infinities; those become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
