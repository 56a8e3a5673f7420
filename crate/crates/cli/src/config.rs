//! Run configuration: flat `key=value` lines or a single JSON object.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("missing required key: {0}")]
    Missing(&'static str),
    #[error("unknown keys: {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error("key {key}: expected {expected}, got {got}")]
    Type {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("config mixes key=value lines and JSON")]
    Mixed,
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate key: {0}")]
    Duplicate(String),
    #[error("invalid JSON config: {0}")]
    Json(String),
}

pub const KNOWN_KEYS: &[&str] = &[
    "scenario", "seed", "alpha", "Omega", "dt", "T", "n_traj", "g", "tau", "n_modes", "mode_dim", "D", "n_paths", "n0",
    "bins", "depth", "out", "format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Fluorescence,
    Photomultiplier,
    PdpCheck,
    SternGerlach,
    Brownian,
    LswDemo,
    HistoryTree,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        Self::Fluorescence,
        Self::Photomultiplier,
        Self::PdpCheck,
        Self::SternGerlach,
        Self::Brownian,
        Self::LswDemo,
        Self::HistoryTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fluorescence => "fluorescence",
            Self::Photomultiplier => "photomultiplier",
            Self::PdpCheck => "pdp-check",
            Self::SternGerlach => "stern-gerlach",
            Self::Brownian => "brownian",
            Self::LswDemo => "lsw-demo",
            Self::HistoryTree => "history-tree",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown scenario {s:?}; expected one of {}",
                Self::ALL.map(|k| k.name()).join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(ConfigError::Invalid(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

/// Scenario parameters after defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum Scenario {
    Fluorescence {
        alpha: f64,
        #[serde(rename = "Omega")]
        omega: f64,
        dt: f64,
        #[serde(rename = "T")]
        t_final: f64,
        n_traj: usize,
        n0: [f64; 3],
        bins: usize,
    },
    Photomultiplier {
        alpha: f64,
        #[serde(rename = "Omega")]
        omega: f64,
        dt: f64,
        #[serde(rename = "T")]
        t_final: f64,
        n_traj: usize,
        n0: [f64; 3],
    },
    PdpCheck {
        g: f64,
        tau: f64,
        n_modes: usize,
        mode_dim: usize,
        #[serde(rename = "Omega")]
        omega: f64,
    },
    SternGerlach {
        n_traj: usize,
        n0: [f64; 3],
    },
    Brownian {
        #[serde(rename = "D")]
        d: f64,
        #[serde(rename = "T")]
        t_final: f64,
        n_paths: usize,
        bins: usize,
    },
    LswDemo,
    HistoryTree {
        depth: usize,
        n_traj: usize,
        n0: [f64; 3],
    },
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::Fluorescence { .. } => ScenarioKind::Fluorescence,
            Self::Photomultiplier { .. } => ScenarioKind::Photomultiplier,
            Self::PdpCheck { .. } => ScenarioKind::PdpCheck,
            Self::SternGerlach { .. } => ScenarioKind::SternGerlach,
            Self::Brownian { .. } => ScenarioKind::Brownian,
            Self::LswDemo => ScenarioKind::LswDemo,
            Self::HistoryTree { .. } => ScenarioKind::HistoryTree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub scenario: Scenario,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Unvalidated key/value pairs, as read from either format.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Value>,
}

impl RawConfig {
    /// Inserts or replaces a textual value (used for `--set` overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), Value::String(value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn looks_like_json(line: &str) -> bool {
    line.starts_with('{') || line.starts_with('}') || line.starts_with('"')
}

/// Reads either format without validating keys or values.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let mut stream = serde_json::Deserializer::from_str(trimmed).into_iter::<Value>();
        let value = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(ConfigError::Json(e.to_string())),
            None => return Err(ConfigError::Json("empty document".into())),
        };
        let rest = trimmed[stream.byte_offset()..].trim();
        if !rest.is_empty() {
            return Err(if rest.contains('=') {
                ConfigError::Mixed
            } else {
                ConfigError::Json(format!("trailing content {rest:?}"))
            });
        }
        let Value::Object(map) = value else {
            return Err(ConfigError::Json("top level must be an object".into()));
        };
        return Ok(RawConfig {
            entries: map.into_iter().collect(),
        });
    }

    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if looks_like_json(line) {
            return Err(ConfigError::Mixed);
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        if entries.insert(key.clone(), Value::String(v.trim().to_string())).is_some() {
            return Err(ConfigError::Duplicate(key));
        }
    }
    Ok(RawConfig { entries })
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("{s:?}"),
        other => other.to_string(),
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn value(&self, key: &'static str) -> Option<&Value> {
        self.raw.entries.get(key)
    }

    fn f64_opt(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.value(key) else { return Ok(None) };
        let parsed = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.parse::<f64>().ok(),
            _ => None,
        };
        match parsed {
            Some(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(ConfigError::Type {
                key: key.into(),
                expected: "a finite number",
                got: describe(v),
            }),
        }
    }

    fn f64(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or(ConfigError::Missing(key))
    }

    fn u64_opt(&self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        let Some(v) = self.value(key) else { return Ok(None) };
        let parsed = match v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.parse::<u64>().ok(),
            _ => None,
        };
        parsed.map(Some).ok_or_else(|| ConfigError::Type {
            key: key.into(),
            expected: "an unsigned integer",
            got: describe(v),
        })
    }

    fn usize_opt(&self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        Ok(self.u64_opt(key)?.map(|x| x as usize))
    }

    fn usize(&self, key: &'static str) -> Result<usize, ConfigError> {
        self.usize_opt(key)?.ok_or(ConfigError::Missing(key))
    }

    fn string_opt(&self, key: &'static str) -> Result<Option<String>, ConfigError> {
        match self.value(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(ConfigError::Type {
                key: key.into(),
                expected: "a string",
                got: describe(v),
            }),
        }
    }

    fn vec3_opt(&self, key: &'static str) -> Result<Option<[f64; 3]>, ConfigError> {
        let Some(v) = self.value(key) else { return Ok(None) };
        let parts: Option<Vec<f64>> = match v {
            Value::String(s) => s.split(',').map(|p| p.trim().parse::<f64>().ok()).collect(),
            Value::Array(a) => a.iter().map(Value::as_f64).collect(),
            _ => None,
        };
        match parts.as_deref() {
            Some(&[a, b, c]) if [a, b, c].iter().all(|x| x.is_finite()) => Ok(Some([a, b, c])),
            _ => Err(ConfigError::Type {
                key: key.into(),
                expected: "three comma-separated numbers",
                got: describe(v),
            }),
        }
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::Invalid(format!("{key} must be > 0")))
    }
}

fn at_least_one(key: &str, x: usize) -> Result<usize, ConfigError> {
    if x >= 1 {
        Ok(x)
    } else {
        Err(ConfigError::Invalid(format!("{key} must be >= 1")))
    }
}

fn bloch(key: &str, n: [f64; 3]) -> Result<[f64; 3], ConfigError> {
    let norm_sq: f64 = n.iter().map(|x| x * x).sum();
    if norm_sq > 1.0 + 1e-10 {
        return Err(ConfigError::Invalid(format!("{key} must lie in the unit ball")));
    }
    Ok(n)
}

/// Default initial Bloch vector for the fluorescence run: 60° from `e₃` in the x–z plane.
pub fn default_fluorescence_n0() -> [f64; 3] {
    let th = 60f64.to_radians();
    [th.sin(), 0.0, th.cos()]
}

/// Validates keys and values and fills in per-scenario defaults.
pub fn validate(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
    let unknown: Vec<String> = raw.keys().filter(|k| !KNOWN_KEYS.contains(k)).map(String::from).collect();
    if !unknown.is_empty() {
        return Err(ConfigError::Unknown(unknown));
    }
    let r = Reader { raw };
    let kind: ScenarioKind = r.string_opt("scenario")?.ok_or(ConfigError::Missing("scenario"))?.parse()?;
    let seed = r.u64_opt("seed")?.ok_or(ConfigError::Missing("seed"))?;
    if let Some(dt) = r.f64_opt("dt")? {
        positive("dt", dt)?;
    }
    if let Some(alpha) = r.f64_opt("alpha")? {
        positive("alpha", alpha)?;
    }

    let scenario = match kind {
        ScenarioKind::Fluorescence | ScenarioKind::Photomultiplier => {
            let alpha = positive("alpha", r.f64("alpha")?)?;
            let omega = r.f64("Omega")?;
            let dt = positive("dt", r.f64("dt")?)?;
            let t_final = positive("T", r.f64("T")?)?;
            let n_traj = at_least_one("n_traj", r.usize("n_traj")?)?;
            if alpha * dt >= 1.0 {
                return Err(ConfigError::Invalid("alpha·dt must be < 1".into()));
            }
            if kind == ScenarioKind::Fluorescence {
                Scenario::Fluorescence {
                    alpha,
                    omega,
                    dt,
                    t_final,
                    n_traj,
                    n0: bloch("n0", r.vec3_opt("n0")?.unwrap_or_else(default_fluorescence_n0))?,
                    bins: at_least_one("bins", r.usize_opt("bins")?.unwrap_or(40))?,
                }
            } else {
                Scenario::Photomultiplier {
                    alpha,
                    omega,
                    dt,
                    t_final,
                    n_traj,
                    n0: bloch("n0", r.vec3_opt("n0")?.unwrap_or([0.0, 0.0, 1.0]))?,
                }
            }
        }
        ScenarioKind::PdpCheck => Scenario::PdpCheck {
            g: r.f64("g")?,
            tau: positive("tau", r.f64("tau")?)?,
            n_modes: at_least_one("n_modes", r.usize("n_modes")?)?,
            mode_dim: r.usize_opt("mode_dim")?.unwrap_or(2),
            omega: r.f64_opt("Omega")?.unwrap_or(0.0),
        },
        ScenarioKind::SternGerlach => Scenario::SternGerlach {
            n_traj: at_least_one("n_traj", r.usize("n_traj")?)?,
            n0: bloch("n0", r.vec3_opt("n0")?.unwrap_or([1.0, 0.0, 0.0]))?,
        },
        ScenarioKind::Brownian => Scenario::Brownian {
            d: positive("D", r.f64("D")?)?,
            t_final: positive("T", r.f64("T")?)?,
            n_paths: at_least_one("n_paths", r.usize("n_paths")?)?,
            bins: at_least_one("bins", r.usize_opt("bins")?.unwrap_or(32))?,
        },
        ScenarioKind::LswDemo => Scenario::LswDemo,
        ScenarioKind::HistoryTree => {
            let depth = r.usize_opt("depth")?.unwrap_or(4);
            if !(1..=10).contains(&depth) {
                return Err(ConfigError::Invalid("depth must be between 1 and 10".into()));
            }
            Scenario::HistoryTree {
                depth,
                n_traj: at_least_one("n_traj", r.usize("n_traj")?)?,
                n0: bloch("n0", r.vec3_opt("n0")?.unwrap_or([0.3, 0.4, 0.5]))?,
            }
        }
    };

    let format = match r.string_opt("format")? {
        Some(s) => s.parse()?,
        None => Format::Csv,
    };
    Ok(RunConfig {
        seed,
        scenario,
        out: r.string_opt("out")?.map(PathBuf::from),
        format,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    validate(&parse_raw(text)?)
}
