//! Config files, flag overrides, exit codes and the run manifest.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<fudge::Error> for CliError {
    fn from(e: fudge::Error) -> Self {
        if e.is_validation() || matches!(e, fudge::Error::Io { .. }) {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

/// Reads a JSON object from `path`, or starts from an empty one.
pub fn load_object(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Validation(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Validation(format!("{}: {e}", path.display()))),
    }
}

/// Sets `key` (dot-separated path) when the flag was given.
pub fn set<T: Serialize>(obj: &mut Map<String, Value>, key: &str, value: Option<T>) {
    let Some(v) = value else { return };
    let v = serde_json::to_value(v).expect("flag values serialize");
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut cur = obj;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if !entry.is_object() {
            *entry = Value::Object(Map::new());
        }
        cur = entry.as_object_mut().expect("object");
    }
    cur.insert(last.to_string(), v);
}

/// Typed view of the merged object; unknown keys are rejected by the target type.
pub fn parse<T: DeserializeOwned>(obj: &Map<String, Value>, what: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(obj.clone()))
        .map_err(|e| CliError::Validation(format!("{what} config: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written as `manifest.json` into every output directory.
#[derive(Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_sha256: String,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputFile>,
}

impl<'a, C: Serialize> RunManifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Self {
            tool: "fudge",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(&canonical),
            config,
            seeds: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fudge::io::write_json(&dir.join("manifest.json"), self).map_err(CliError::from)
    }
}
