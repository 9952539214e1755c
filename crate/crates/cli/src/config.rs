//! Run configuration: a JSON document validated against per-command parameter blocks.

use crate::params::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use std::path::PathBuf;

/// Current configuration document version.
pub const CONFIG_VERSION: u64 = 1;

/// Cap on repeated passes when collecting unknown keys.
const MAX_PASSES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    DpSample,
    MeanMoments,
    MeanChain,
    TransformCheck,
    QuantileEstimate,
    DensityEstimate,
    PyramidFit,
    FrailtySim,
    LocalregFit,
    Envelope,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::DpSample,
        Command::MeanMoments,
        Command::MeanChain,
        Command::TransformCheck,
        Command::QuantileEstimate,
        Command::DensityEstimate,
        Command::PyramidFit,
        Command::FrailtySim,
        Command::LocalregFit,
        Command::Envelope,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::DpSample => "dp-sample",
            Command::MeanMoments => "mean-moments",
            Command::MeanChain => "mean-chain",
            Command::TransformCheck => "transform-check",
            Command::QuantileEstimate => "quantile-estimate",
            Command::DensityEstimate => "density-estimate",
            Command::PyramidFit => "pyramid-fit",
            Command::FrailtySim => "frailty-sim",
            Command::LocalregFit => "localreg-fit",
            Command::Envelope => "envelope",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub params: Params,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// The resolved configuration, defaults filled in.
    pub fn resolved(&self) -> Value {
        serde_json::json!({
            "version": CONFIG_VERSION,
            "command": self.command.name(),
            "seed": self.seed,
            "params": self.params.to_value(),
            "format": self.format,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    MalformedJson,
    Schema,
    MissingSeed,
    Io,
    Runtime,
}

/// Failure with every violation found, serialized to standard error as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            command: None,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn with_command(mut self, command: Command) -> Self {
        self.command = Some(command.name().to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::MalformedJson | ErrorKind::Schema | ErrorKind::MissingSeed => 2,
            ErrorKind::Io => 3,
            ErrorKind::Runtime => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<npbayes_core::Error> for CliError {
    fn from(e: npbayes_core::Error) -> Self {
        CliError::new(ErrorKind::Runtime, e.to_string())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    version: Option<u64>,
    command: Option<String>,
    seed: Option<u64>,
    params: Option<Value>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

fn container_mut<'a>(root: &'a mut Value, path: &serde_path_to_error::Path, key: &str) -> Option<&'a mut serde_json::Map<String, Value>> {
    use serde_path_to_error::Segment;
    let mut segments: Vec<&Segment> = path.iter().collect();
    if matches!(segments.last(), Some(Segment::Map { key: k }) if k == key) {
        segments.pop();
    }
    let mut node = root;
    for s in segments {
        node = match s {
            Segment::Map { key } => node.get_mut(key.as_str())?,
            Segment::Seq { index } => node.get_mut(*index)?,
            _ => return None,
        };
    }
    node.as_object_mut()
}

/// Deserializes `value`, collecting every unknown key (removing each and
/// retrying) and then the first remaining type error, each prefixed by its path.
pub(crate) fn collect<T: for<'de> Deserialize<'de>>(mut value: Value, prefix: &str, violations: &mut Vec<String>) -> Option<T> {
    for _ in 0..MAX_PASSES {
        match serde_path_to_error::deserialize::<_, T>(value.clone()) {
            Ok(t) => return Some(t),
            Err(e) => {
                let path = e.path().to_string();
                let inner = e.inner().to_string();
                let place = match (prefix.is_empty(), path == ".") {
                    (true, _) => path.clone(),
                    (false, true) => prefix.to_string(),
                    (false, false) => format!("{prefix}.{path}"),
                };
                if let Some(key) = unknown_key(&inner) {
                    let last_is_key = matches!(
                        e.path().iter().last(),
                        Some(serde_path_to_error::Segment::Map { key: k }) if *k == key
                    );
                    let place = if last_is_key {
                        place
                    } else if place == "." {
                        key.clone()
                    } else {
                        format!("{place}.{key}")
                    };
                    violations.push(format!("{place}: unknown key `{key}`"));
                    if let Some(map) = container_mut(&mut value, e.path(), &key) {
                        if map.remove(&key).is_some() {
                            continue;
                        }
                    }
                    return None;
                }
                violations.push(format!("{place}: {inner}"));
                return None;
            }
        }
    }
    None
}

/// Parses and validates a configuration document. `command` comes from the
/// command line; a `command` key in the document must agree with it.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::new(ErrorKind::MalformedJson, format!("configuration is not valid JSON: {e}")))?;
    if !value.is_object() {
        return Err(CliError::new(ErrorKind::Schema, "configuration must be a JSON object"));
    }
    let mut violations = Vec::new();
    let env: Option<Envelope> = collect(value, "", &mut violations);
    let Some(env) = env else {
        return Err(schema_error(command, violations));
    };
    match env.version {
        None => violations.push("version: missing (expected 1)".to_string()),
        Some(CONFIG_VERSION) => {}
        Some(v) => violations.push(format!("version: unsupported version {v} (expected {CONFIG_VERSION})")),
    }
    let named = match env.command.as_deref() {
        None => None,
        Some(name) => match Command::from_name(name) {
            Some(c) => Some(c),
            None => {
                violations.push(format!("command: unknown command `{name}`"));
                None
            }
        },
    };
    let command = match (command, named) {
        (Some(a), Some(b)) if a != b => {
            violations.push(format!("command: document says `{b}` but `{a}` was requested"));
            Some(a)
        }
        (Some(a), _) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => {
            if env.command.is_none() {
                violations.push("command: missing".to_string());
            }
            None
        }
    };
    let Some(command) = command else {
        return Err(schema_error(None, violations));
    };
    let raw = env.params.unwrap_or_else(|| Value::Object(Default::default()));
    let params = Params::parse(command, raw, &mut violations);
    if let Some(p) = &params {
        if let Err(e) = p.validate() {
            violations.push(format!("params: {e}"));
        }
    }
    let missing_seed = params.as_ref().is_some_and(Params::is_stochastic) && env.seed.is_none();
    if missing_seed {
        violations.push(format!("seed: missing; `{command}` is stochastic and needs an explicit seed"));
    }
    if !violations.is_empty() {
        let mut err = schema_error(Some(command), violations);
        if missing_seed && err.violations.len() == 1 {
            err.kind = ErrorKind::MissingSeed;
            err.message = format!("missing seed for stochastic command `{command}`");
        }
        return Err(err);
    }
    Ok(RunConfig {
        command,
        seed: env.seed,
        params: params.expect("params parsed without violations"),
        output: env.output,
        format: env.format.unwrap_or_default(),
    })
}

fn schema_error(command: Option<Command>, violations: Vec<String>) -> CliError {
    let mut err = CliError::new(
        ErrorKind::Schema,
        format!("configuration has {} violation(s)", violations.len()),
    );
    err.violations = violations;
    match command {
        Some(c) => err.with_command(c),
        None => err,
    }
}
