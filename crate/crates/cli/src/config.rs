//! Layered settings: command-line flags over `TRIGROOTS_*` environment
//! variables over a config file over built-in defaults.
//!
//! The config file is either flat `key = value` lines with `#` comments, a
//! flat JSON object, or a previous output file, whose header is replayed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use trigroots::{Error, Result};

pub const ENV_PREFIX: &str = "TRIGROOTS_";

/// Every key understood by some subcommand.
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    /// Boolean switch rather than a valued option.
    pub switch: bool,
    pub default: Option<&'static str>,
}

pub const KEYS: &[Key] = &[
    Key { name: "n", help: "degree, or a comma-separated list of degrees for sweep", switch: false, default: None },
    Key { name: "ensemble", help: "coefficient law: gaussian, rademacher, uniform, bounded_two_point(p), truncated_gaussian(c)", switch: false, default: Some("gaussian") },
    Key { name: "seed", help: "master seed", switch: false, default: Some("0") },
    Key { name: "trial", help: "trial index within the seed stream", switch: false, default: Some("0") },
    Key { name: "trials", help: "number of trials", switch: false, default: None },
    Key { name: "count", help: "number of polynomials to emit", switch: false, default: Some("1") },
    Key { name: "format", help: "csv or json", switch: false, default: Some("csv") },
    Key { name: "domain", help: "torus, half (for [0, pi]) or lo,hi in radians", switch: false, default: Some("torus") },
    Key { name: "path", help: "counting path: certified or fast", switch: false, default: Some("certified") },
    Key { name: "certified", help: "same as --path certified", switch: true, default: None },
    Key { name: "grid", help: "grid size for the fast path (default 8n)", switch: false, default: None },
    Key { name: "budget", help: "evaluation budget for certified counting", switch: false, default: None },
    Key { name: "audit_every", help: "recount every k-th fast trial with the certified path", switch: false, default: Some("100") },
    Key { name: "input", help: "input file(s), comma separated", switch: false, default: None },
    Key { name: "output", help: "output file (default standard output)", switch: false, default: None },
    Key { name: "threads", help: "worker threads, 0 for one per core", switch: false, default: Some("0") },
    Key { name: "resume", help: "append to an existing sweep output, skipping finished trials", switch: true, default: None },
    Key { name: "timings", help: "record per-trial wall time (breaks byte reproducibility)", switch: true, default: None },
    Key { name: "eps", help: "deviation eps (tails: comma-separated list)", switch: false, default: None },
    Key { name: "t", help: "evaluation angle in radians", switch: false, default: Some("1.0") },
    Key { name: "alpha", help: "value threshold", switch: false, default: Some("0.1") },
    Key { name: "beta", help: "slope threshold (in units of n)", switch: false, default: Some("0.1") },
    Key { name: "c0", help: "schedule constant", switch: false, default: Some("1.0") },
    Key { name: "r", help: "window constant R (default: window_fraction of its admissible supremum)", switch: false, default: None },
    Key { name: "window_fraction", help: "R as a fraction of its supremum", switch: false, default: Some("0.999") },
    Key { name: "verdicts", help: "file for the run-length verdict table", switch: false, default: None },
    Key { name: "suite", help: "bernstein, sieve, cover, interpolation, separation, charproduct or all (comma separated)", switch: false, default: Some("all") },
    Key { name: "plot_data", help: "emit whitespace tables for gnuplot instead of CSV", switch: true, default: None },
    Key { name: "bootstrap", help: "bootstrap resamples for the variance standard error (0 for none)", switch: false, default: Some("0") },
];

pub fn key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    Config,
    Env,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::Config => "config",
            Source::Env => "env",
            Source::Flag => "flag",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Shadowed {
    pub source: Source,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conflict {
    pub key: String,
    pub value: String,
    pub source: Source,
    pub overridden: Vec<Shadowed>,
}

/// Resolved settings of one subcommand.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, Source)>,
    pub conflicts: Vec<Conflict>,
}

impl Settings {
    /// Layers the sources for the keys `allowed`.
    pub fn resolve(
        allowed: &[&str],
        config: &BTreeMap<String, String>,
        env: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Settings {
        let mut s = Settings::default();
        for &name in allowed {
            let k = key(name).expect("registered key");
            let mut layers: Vec<(Source, String)> = Vec::new();
            if let Some(d) = k.default {
                layers.push((Source::Default, d.to_string()));
            }
            for (src, map) in [(Source::Config, config), (Source::Env, env), (Source::Flag, flags)] {
                if let Some(v) = map.get(name) {
                    layers.push((src, v.clone()));
                }
            }
            if let Some((src, v)) = layers.last().cloned() {
                let overridden: Vec<Shadowed> = layers[..layers.len() - 1]
                    .iter()
                    .filter(|(s, val)| *s != Source::Default && *val != v)
                    .map(|(s, val)| Shadowed {
                        source: *s,
                        value: val.clone(),
                    })
                    .collect();
                if !overridden.is_empty() {
                    s.conflicts.push(Conflict {
                        key: name.to_string(),
                        value: v.clone(),
                        source: src,
                        overridden,
                    });
                }
                s.values.insert(name.to_string(), (v, src));
            }
        }
        s
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|(v, _)| v.as_str())
    }

    pub fn is_set(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(name)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| Error::Parameter(format!("{name} = `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, name: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(name)?
            .ok_or_else(|| Error::Parameter(format!("missing required setting `{name}`")))
    }

    pub fn switch(&self, name: &str) -> Result<bool> {
        Ok(self.get::<bool>(name)?.unwrap_or(false))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, name: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.raw(name)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| {
                        x.parse::<T>()
                            .map_err(|e| Error::Parameter(format!("{name} entry `{x}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Resolved values, for the output header.
    pub fn config_json(&self, exclude: &[&str]) -> Map<String, Value> {
        self.values
            .iter()
            .filter(|(k, _)| !exclude.contains(&k.as_str()))
            .map(|(k, (v, _))| (k.clone(), Value::String(v.clone())))
            .collect()
    }

    pub fn sources_json(&self) -> Map<String, Value> {
        self.values
            .iter()
            .map(|(k, (_, s))| (k.clone(), Value::String(s.to_string())))
            .collect()
    }
}

fn value_to_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn check_key(name: &str, origin: &str) -> Result<()> {
    if key(name).is_none() {
        return Err(Error::Parameter(format!("unknown key `{name}` in {origin}")));
    }
    Ok(())
}

fn from_json_object(obj: &Map<String, Value>, origin: &str) -> Result<BTreeMap<String, String>> {
    // a previous output: {"header": {"config": {...}}, ...}
    let obj = match obj.get("header") {
        Some(Value::Object(h)) => match h.get("config") {
            Some(Value::Object(c)) => c,
            _ => return Err(Error::Parse(format!("{origin}: header without config"))),
        },
        _ => obj,
    };
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        check_key(k, origin)?;
        out.insert(k.clone(), value_to_string(v));
    }
    Ok(out)
}

/// Parses the contents of a config file.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(trimmed) {
            return from_json_object(&obj, origin);
        }
        // JSONL output: header on the first line
        let first = trimmed.lines().next().unwrap_or("");
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(first) {
            return from_json_object(&obj, origin);
        }
        return Err(Error::Parse(format!("{origin}: malformed JSON")));
    }
    if let Some(rest) = trimmed.lines().next().and_then(|l| l.strip_prefix("# header ")) {
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(rest) {
            let wrapped: Map<String, Value> = [("header".to_string(), Value::Object(obj))].into_iter().collect();
            return from_json_object(&wrapped, origin);
        }
    }
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{origin}:{}: expected key = value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        check_key(&k, origin)?;
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

/// `TRIGROOTS_<KEY>` variables.
pub fn from_env(vars: impl Iterator<Item = (String, String)>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, v) in vars {
        if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
            let name = rest.to_ascii_lowercase();
            check_key(&name, "the environment")?;
            out.insert(name, v);
        }
    }
    Ok(out)
}
