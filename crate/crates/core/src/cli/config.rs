//! Run configuration: a single JSON document with defaults for every field,
//! range validation, and a content hash over a canonical serialization.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::machine::MachineParams;
use crate::proxies::Codec;
use crate::scopes::{AnalysisConfig, VariableConfig};
use crate::symbolize::{FitScope, Strategy};

pub const SEED_ENV: &str = "CAUSALKIT_SEED";

pub const MAX_L_MAX: usize = 12;
pub const MAX_ALPHABET: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyConfig {
    pub codecs: Vec<Codec>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            codecs: Codec::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { k: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub variables: Vec<VariableConfig>,
    pub machine: MachineParams,
    pub proxies: ProxyConfig,
    pub cluster: ClusterConfig,
    /// Covariates to stratify by; empty means every covariate in the input.
    pub stratify_by: Vec<String>,
    pub fit_scope: FitScope,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_path: None,
            output_dir: None,
            variables: VariableConfig::defaults(),
            machine: MachineParams::default(),
            proxies: ProxyConfig::default(),
            cluster: ClusterConfig::default(),
            stratify_by: Vec::new(),
            fit_scope: FitScope::Pooled,
        }
    }
}

fn out_of_range(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::config(Some(field.into()), message)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(None, format!("invalid config: {e}")))
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            variables: self.variables.clone(),
            machine: self.machine.clone(),
            codecs: self.proxies.codecs.clone(),
            fit_scope: self.fit_scope,
        }
    }

    /// Applies the `CAUSALKIT_SEED` override. Returns whether it was set.
    pub fn apply_seed_env(&mut self) -> Result<bool, CliError> {
        match std::env::var(SEED_ENV) {
            Ok(raw) => {
                self.cluster.seed = raw.trim().parse().map_err(|_| {
                    out_of_range(
                        SEED_ENV,
                        format!("{SEED_ENV} must be an unsigned 64-bit integer, got {raw:?}"),
                    )
                })?;
                Ok(true)
            }
            Err(_) => Ok(false),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.machine;
        if !(0.0..=2.0).contains(&m.delta) {
            return Err(out_of_range(
                "machine.delta",
                format!("machine.delta must be in [0, 2], got {}", m.delta),
            ));
        }
        if m.l_max > MAX_L_MAX {
            return Err(out_of_range(
                "machine.l_max",
                format!("machine.l_max must be in [0, {MAX_L_MAX}], got {}", m.l_max),
            ));
        }
        if m.min_count < 1 {
            return Err(out_of_range(
                "machine.min_count",
                "machine.min_count must be at least 1, got 0",
            ));
        }
        if m.min_series_length < 1 {
            return Err(out_of_range(
                "machine.min_series_length",
                "machine.min_series_length must be at least 1, got 0",
            ));
        }
        if let Some(l) = m.l_block {
            if !(1..=32).contains(&l) {
                return Err(out_of_range(
                    "machine.l_block",
                    format!("machine.l_block must be in [1, 32], got {l}"),
                ));
            }
        }
        if self.variables.is_empty() {
            return Err(out_of_range(
                "variables",
                "at least one variable is required",
            ));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].iter().any(|w| w.name == v.name) {
                return Err(out_of_range(
                    format!("variables[{i}].name"),
                    format!("variable `{}` is listed twice", v.name),
                ));
            }
            if v.strategy != Strategy::Binary && !(2..=MAX_ALPHABET).contains(&v.k) {
                return Err(out_of_range(
                    format!("variables[{i}].k"),
                    format!(
                        "variables[{i}].k must be in [2, {MAX_ALPHABET}], got {}",
                        v.k
                    ),
                ));
            }
        }
        if self.proxies.codecs.is_empty() {
            return Err(out_of_range(
                "proxies.codecs",
                "at least one codec is required",
            ));
        }
        if self.cluster.k < 1 {
            return Err(out_of_range(
                "cluster.k",
                "cluster.k must be at least 1, got 0",
            ));
        }
        Ok(())
    }

    /// The configuration as echoed in manifests: paths removed, since they do
    /// not affect any computed number.
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            input_path: None,
            output_dir: None,
            ..self.clone()
        }
    }
}

/// Sorted keys, no whitespace, floats in exponent form, integers verbatim.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format!("{:e}", n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// SHA-256 of the canonical form of any serializable value.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes to JSON");
    sha256_hex(canonical_json(&v).as_bytes())
}
