//! Run configuration: a flat `key = value` file overlaid by command-line flags.
//!
//! Recognized keys mirror the `run` flags: `seed`, `seeds`, `tmax`, `tau`,
//! `tau-sigma`, `policy`, `B`, `compress-every`, `out`, `workers`, `endpoint`,
//! `model`, `token-env`, `gateway-timeout-ms`, `max-retries`, `temperature`,
//! `policy-timeout-ms`. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use memex_core::gateway::GatewayConfig;
use memex_core::memory::DEFAULT_SUMMARY_TOKENS;
use memex_core::EpisodeConfig;
use serde::Serialize;

const KEYS: &[&str] = &[
    "seed",
    "seeds",
    "tmax",
    "tau",
    "tau-sigma",
    "policy",
    "B",
    "compress-every",
    "out",
    "workers",
    "endpoint",
    "model",
    "token-env",
    "gateway-timeout-ms",
    "max-retries",
    "temperature",
    "policy-timeout-ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    OracleFull,
    OracleIndexed,
    Gateway,
}

impl FromStr for PolicyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle_full" => Ok(PolicyChoice::OracleFull),
            "oracle_indexed" => Ok(PolicyChoice::OracleIndexed),
            "gateway" => Ok(PolicyChoice::Gateway),
            other => Err(format!("unknown policy '{other}' (expected oracle_full, oracle_indexed or gateway)")),
        }
    }
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyChoice::OracleFull => "oracle_full",
            PolicyChoice::OracleIndexed => "oracle_indexed",
            PolicyChoice::Gateway => "gateway",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub t_max: usize,
    pub tau: usize,
    pub tau_sigma: usize,
    pub policy: PolicyChoice,
    pub reads: usize,
    pub compress_every: usize,
    pub out: PathBuf,
    pub workers: usize,
    pub policy_timeout_ms: u64,
    pub gateway: GatewayConfig,
}

impl RunConfig {
    pub fn episode(&self, seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            t_max: self.t_max,
            tau: self.tau,
            tau_sigma: self.tau_sigma,
            seed,
            policy_timeout_ms: self.policy_timeout_ms,
        }
    }
}

/// Parse `"0..100"` (half-open), `"3..=5"`, `"1,4,9"` or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("invalid seed '{s}': {e}"));
    if let Some((a, b)) = text.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        return if a <= b { Ok((a..=b).collect()) } else { Err(format!("empty seed range '{text}'")) };
    }
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        return if a < b { Ok((a..b).collect()) } else { Err(format!("empty seed range '{text}'")) };
    }
    text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<Vec<_>, _>>().and_then(|v| {
        if v.is_empty() {
            Err("no seeds given".into())
        } else {
            Ok(v)
        }
    })
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(format!("line {}: unknown key '{key}'", n + 1));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config_text(&text)
}

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| format!("invalid value for {key}: {e}")))
        .transpose()
}

/// Build a [`RunConfig`] from merged key/value settings (flags already applied).
pub fn resolve(map: &BTreeMap<String, String>) -> Result<RunConfig, String> {
    let mut seeds = match map.get("seeds") {
        Some(s) => parse_seeds(s)?,
        None => Vec::new(),
    };
    if let Some(seed) = value::<u64>(map, "seed")? {
        if !seeds.contains(&seed) {
            seeds.insert(0, seed);
        }
    }
    if seeds.is_empty() {
        seeds.push(0);
    }
    let policy = value::<PolicyChoice>(map, "policy")?.unwrap_or(PolicyChoice::OracleIndexed);
    let default_tmax = match policy {
        PolicyChoice::OracleIndexed => 150,
        _ => 60,
    };
    let defaults = GatewayConfig::default();
    let gateway = GatewayConfig {
        endpoint: map.get("endpoint").cloned().unwrap_or(defaults.endpoint),
        model: map.get("model").cloned().unwrap_or(defaults.model),
        token_env: map.get("token-env").cloned().unwrap_or(defaults.token_env),
        timeout_ms: value(map, "gateway-timeout-ms")?.unwrap_or(defaults.timeout_ms),
        max_retries: value(map, "max-retries")?.unwrap_or(defaults.max_retries),
        temperature: value(map, "temperature")?.unwrap_or(defaults.temperature),
        backoff_ms: defaults.backoff_ms,
    };
    let config = RunConfig {
        seeds,
        t_max: value(map, "tmax")?.unwrap_or(default_tmax),
        tau: value(map, "tau")?.unwrap_or(8000),
        tau_sigma: value(map, "tau-sigma")?.unwrap_or(DEFAULT_SUMMARY_TOKENS),
        policy,
        reads: value(map, "B")?.unwrap_or(2),
        compress_every: value(map, "compress-every")?.unwrap_or(3),
        out: map.get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("memex-out")),
        workers: value(map, "workers")?.unwrap_or(1),
        policy_timeout_ms: value(map, "policy-timeout-ms")?.unwrap_or(60_000),
        gateway,
    };
    if config.compress_every == 0 {
        return Err("compress-every must be positive".into());
    }
    if config.workers == 0 {
        return Err("workers must be positive".into());
    }
    config.episode(0).validate().map_err(|e| e.to_string())?;
    Ok(config)
}
