//! Flat `key = value` experiment descriptions.
//!
//! ```text
//! # white input, 8-sparse system
//! [system]
//! kind = general
//! n_large = 8
//!
//! [signal]
//! kind = white
//! variance = 1
//!
//! [run]
//! L = 128
//! noise_var = 1e-4
//! iterations = 5000
//! runs = 100
//!
//! [algorithm.lms]
//! variant = lms
//! mu = 0.01
//!
//! [algorithm.l0lms]
//! variant = l0lms
//! mu = 0.01
//! kappa = 8e-5
//! ```
//!
//! Keys may also be written fully qualified (`system.kind = cluster`) in any
//! shared block. Algorithm keys placed before the first section describe a
//! single algorithm labelled by its variant. Unknown keys are rejected.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::error::Error;
use crate::filters::{AlgorithmConfig, Variant};
use crate::signals::{SignalKind, SignalSpec};
use crate::sim::{ExperimentEntry, TrialConfig};
use crate::systems::{gen_cluster_sparse, gen_general_sparse, ChangeEvent, ImpulseResponse};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// How to draw the true system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSpec {
    General {
        n_large: usize,
        small_var: f64,
    },
    Cluster {
        delay: usize,
        span: usize,
        gain_db: f64,
    },
}

impl SystemSpec {
    pub fn generate(&self, len: usize, seed: u64) -> crate::Result<ImpulseResponse> {
        match *self {
            SystemSpec::General { n_large, small_var } => {
                gen_general_sparse(len, n_large, small_var, seed)
            }
            SystemSpec::Cluster {
                delay,
                span,
                gain_db,
            } => gen_cluster_sparse(len, delay, span, gain_db, seed),
        }
    }
}

/// A parsed experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub signal: SignalSpec,
    pub len: usize,
    pub noise_var: f64,
    pub iterations: usize,
    pub runs: usize,
    /// Seed of the system draw; also stored as every trial's seed.
    pub seed: u64,
    pub change: Option<ChangeEvent>,
    pub algorithms: Vec<(String, AlgorithmConfig)>,
}

const ALGO_KEYS: [&str; 6] = ["variant", "mu", "kappa", "beta", "q", "delta"];
const SHARED_KEYS: [&str; 18] = [
    "L",
    "noise_var",
    "iterations",
    "runs",
    "seed",
    "system.kind",
    "system.n_large",
    "system.small_var",
    "system.delay",
    "system.span",
    "system.gain_db",
    "signal.kind",
    "signal.variance",
    "signal.ar_coeff",
    "signal.normalize",
    "change.at",
    "change.delay",
    "change.gain_db",
];

#[derive(Debug)]
enum Section {
    Top,
    System,
    Signal,
    Run,
    Algorithm(String),
}

/// Raw values with the line each was set on.
#[derive(Default)]
struct Table {
    values: HashMap<String, (String, usize)>,
}

impl Table {
    fn insert(&mut self, key: String, value: String, line: usize) -> Result<(), ConfigError> {
        if let Some((_, first)) = self.values.get(&key) {
            return Err(err(line, format!("`{key}` already set on line {first}")));
        }
        self.values.insert(key, (value, line));
        Ok(())
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(_, l)| *l)
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn get<T: ParseValue>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some((raw, line)) => T::parse_value(raw)
                .map(Some)
                .map_err(|why| err(*line, format!("`{key}`: cannot parse `{raw}` as {why}"))),
        }
    }

    fn get_or<T: ParseValue>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: ParseValue>(&self, key: &str, line: usize) -> Result<T, ConfigError> {
        self.get(key)?
            .ok_or_else(|| err(line, format!("missing required key `{key}`")))
    }
}

trait ParseValue: Sized {
    fn parse_value(raw: &str) -> Result<Self, &'static str>;
}

impl ParseValue for f64 {
    fn parse_value(raw: &str) -> Result<Self, &'static str> {
        raw.parse().map_err(|_| "a number")
    }
}

impl ParseValue for usize {
    fn parse_value(raw: &str) -> Result<Self, &'static str> {
        raw.parse().map_err(|_| "a nonnegative integer")
    }
}

impl ParseValue for u64 {
    fn parse_value(raw: &str) -> Result<Self, &'static str> {
        raw.parse().map_err(|_| "a nonnegative integer")
    }
}

impl ParseValue for bool {
    fn parse_value(raw: &str) -> Result<Self, &'static str> {
        match raw.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err("a boolean"),
        }
    }
}

impl ParseValue for String {
    fn parse_value(raw: &str) -> Result<Self, &'static str> {
        Ok(raw.to_string())
    }
}

fn canonical_shared(section: &Section, key: &str) -> Option<String> {
    let full = if key.contains('.') {
        key.to_string()
    } else {
        match section {
            Section::System => format!("system.{key}"),
            Section::Signal => format!("signal.{key}"),
            _ => key.to_string(),
        }
    };
    SHARED_KEYS.contains(&full.as_str()).then_some(full)
}

/// Attaches a line number to a library validation error.
fn locate(table: &Table, prefix: &str, e: Error) -> ConfigError {
    match &e {
        Error::InvalidParameter { name, .. } => {
            let candidates = [
                format!("{prefix}{name}"),
                name.to_string(),
                format!("system.{name}"),
                format!("signal.{name}"),
            ];
            let line = candidates
                .iter()
                .map(|k| table.line(k))
                .find(|l| *l > 0)
                .or_else(|| {
                    let suffix = format!(".{name}");
                    table
                        .values
                        .iter()
                        .filter(|(k, _)| k.starts_with("algorithm.") && k.ends_with(&suffix))
                        .map(|(_, (_, l))| *l)
                        .min()
                })
                .unwrap_or(0);
            err(line, e.to_string())
        }
        _ => err(0, e.to_string()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut table = Table::default();
        let mut section = Section::Top;
        // label -> line of its header, in file order
        let mut algo_sections: Vec<(String, usize)> = Vec::new();
        let mut top_algo_line = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                section = match name {
                    "system" => Section::System,
                    "signal" => Section::Signal,
                    "run" => Section::Run,
                    _ => match name.strip_prefix("algorithm.") {
                        Some(label)
                            if !label.is_empty()
                                && label
                                    .chars()
                                    .all(|c| c.is_ascii_alphanumeric() || "_-+.".contains(c)) =>
                        {
                            if algo_sections.iter().any(|(l, _)| l == label) {
                                return Err(err(
                                    line_no,
                                    format!("duplicate algorithm section `{label}`"),
                                ));
                            }
                            algo_sections.push((label.to_string(), line_no));
                            Section::Algorithm(label.to_string())
                        }
                        _ => return Err(err(line_no, format!("unknown section `[{name}]`"))),
                    },
                };
                continue;
            }

            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(line_no, format!("`{key}` has no value")));
            }

            let full = match &section {
                Section::Algorithm(label) => {
                    if !ALGO_KEYS.contains(&key) {
                        return Err(err(
                            line_no,
                            format!("unknown key `{key}` in [algorithm.{label}]"),
                        ));
                    }
                    format!("algorithm.{label}.{key}")
                }
                Section::Top if ALGO_KEYS.contains(&key) => {
                    top_algo_line.get_or_insert(line_no);
                    format!("algorithm..{key}")
                }
                _ => canonical_shared(&section, key)
                    .ok_or_else(|| err(line_no, format!("unknown key `{key}`")))?,
            };
            table.insert(full, value.to_string(), line_no)?;
        }

        let mut algorithms = Vec::new();
        let mut algo_headers: Vec<(Option<String>, usize)> = Vec::new();
        if let Some(line) = top_algo_line {
            algo_headers.push((None, line));
        }
        algo_headers.extend(algo_sections.into_iter().map(|(l, n)| (Some(l), n)));
        if algo_headers.is_empty() {
            return Err(err(
                0,
                "no algorithm given (add `variant = ...` or an [algorithm.<label>] block)",
            ));
        }
        for (label, header_line) in algo_headers {
            let prefix = format!("algorithm.{}.", label.as_deref().unwrap_or(""));
            let key = |k: &str| format!("{prefix}{k}");
            let variant_raw: String = table.require(&key("variant"), header_line)?;
            let variant: Variant = variant_raw
                .parse()
                .map_err(|e: Error| err(table.line(&key("variant")), e.to_string()))?;
            let mu: f64 = table.require(&key("mu"), header_line)?;
            let mut algo = AlgorithmConfig::new(variant, mu);
            algo.kappa = table.get_or(&key("kappa"), 0.0)?;
            algo.beta = table.get_or(&key("beta"), AlgorithmConfig::DEFAULT_BETA)?;
            algo.q = table.get_or(&key("q"), AlgorithmConfig::DEFAULT_Q)?;
            algo.delta = table.get_or(&key("delta"), AlgorithmConfig::DEFAULT_DELTA)?;
            algo.validate().map_err(|e| locate(&table, &prefix, e))?;
            let label = label.unwrap_or_else(|| variant.to_string());
            if algorithms.iter().any(|(l, _): &(String, _)| *l == label) {
                return Err(err(
                    header_line,
                    format!("duplicate algorithm label `{label}`"),
                ));
            }
            algorithms.push((label, algo));
        }

        let len: usize = table.require("L", 0)?;
        let iterations: usize = table.require("iterations", 0)?;

        let kind: String = table.get_or("system.kind", "general".to_string())?;
        let system = match kind.to_ascii_lowercase().as_str() {
            "general" => {
                for k in ["system.delay", "system.span", "system.gain_db"] {
                    if table.has(k) {
                        return Err(err(
                            table.line(k),
                            format!("`{k}` only applies to cluster systems"),
                        ));
                    }
                }
                SystemSpec::General {
                    n_large: table.get_or("system.n_large", 1)?,
                    small_var: table.get_or("system.small_var", 0.0)?,
                }
            }
            "cluster" => {
                for k in ["system.n_large", "system.small_var"] {
                    if table.has(k) {
                        return Err(err(
                            table.line(k),
                            format!("`{k}` only applies to general systems"),
                        ));
                    }
                }
                SystemSpec::Cluster {
                    delay: table.get_or("system.delay", 0)?,
                    span: table.require("system.span", table.line("system.kind"))?,
                    gain_db: table.get_or("system.gain_db", 0.0)?,
                }
            }
            other => {
                return Err(err(
                    table.line("system.kind"),
                    format!("`system.kind`: `{other}` is not one of general, cluster"),
                ))
            }
        };

        let signal_kind: String = table.get_or("signal.kind", "white".to_string())?;
        let signal = SignalSpec {
            kind: signal_kind
                .parse::<SignalKind>()
                .map_err(|e| err(table.line("signal.kind"), e.to_string()))?,
            variance: table.get_or("signal.variance", 1.0)?,
            ar_coeff: table.get_or("signal.ar_coeff", 0.0)?,
            normalize: table.get_or("signal.normalize", false)?,
        };
        if signal.kind == SignalKind::White && table.has("signal.ar_coeff") {
            return Err(err(
                table.line("signal.ar_coeff"),
                "`signal.ar_coeff` only applies to ar1 signals",
            ));
        }
        signal.validate().map_err(|e| locate(&table, "", e))?;

        let change_keys = ["change.at", "change.delay", "change.gain_db"];
        let change = if change_keys.iter().any(|k| table.has(k)) {
            let first = change_keys
                .iter()
                .map(|k| table.line(k))
                .filter(|l| *l > 0)
                .min();
            let first = first.unwrap_or(0);
            Some(ChangeEvent {
                at_iteration: table.require("change.at", first)?,
                new_delay: table.require("change.delay", first)?,
                gain_db: table.get_or("change.gain_db", 0.0)?,
            })
        } else {
            None
        };

        let cfg = ExperimentConfig {
            system,
            signal,
            len,
            noise_var: table.get_or("noise_var", 0.0)?,
            iterations,
            runs: table.get_or("runs", crate::sim::params::RUNS)?,
            seed: table.get_or("seed", 0)?,
            change,
            algorithms,
        };
        if cfg.runs == 0 {
            return Err(err(table.line("runs"), "`runs` must be >= 1"));
        }
        cfg.entries().map_err(|e| locate(&table, "", e))?;
        Ok(cfg)
    }

    /// Resolves into runnable configurations.
    pub fn entries(&self) -> crate::Result<Vec<ExperimentEntry>> {
        let system = self.system.generate(self.len, self.seed)?;
        self.algorithms
            .iter()
            .map(|(label, algo)| {
                let trial = TrialConfig {
                    algo: *algo,
                    system: system.clone(),
                    change: self.change,
                    signal: self.signal,
                    noise_var: self.noise_var,
                    iterations: self.iterations,
                    seed: self.seed,
                };
                trial.validate()?;
                Ok(ExperimentEntry {
                    label: label.clone(),
                    trial,
                    runs: self.runs,
                })
            })
            .collect()
    }
}

impl fmt::Display for ExperimentConfig {
    /// Emits text that parses back into an equal configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        s.push_str("[system]\n");
        match self.system {
            SystemSpec::General { n_large, small_var } => {
                let _ = writeln!(
                    s,
                    "kind = general\nn_large = {n_large}\nsmall_var = {small_var:e}"
                );
            }
            SystemSpec::Cluster {
                delay,
                span,
                gain_db,
            } => {
                let _ = writeln!(
                    s,
                    "kind = cluster\ndelay = {delay}\nspan = {span}\ngain_db = {gain_db}"
                );
            }
        }
        let _ = writeln!(
            s,
            "\n[signal]\nkind = {}\nvariance = {:e}",
            self.signal.kind, self.signal.variance
        );
        if self.signal.kind == SignalKind::Ar1 {
            let _ = writeln!(s, "ar_coeff = {}", self.signal.ar_coeff);
        }
        let _ = writeln!(s, "normalize = {}", self.signal.normalize);
        let _ = writeln!(
            s,
            "\n[run]\nL = {}\nnoise_var = {:e}\niterations = {}\nruns = {}\nseed = {}",
            self.len, self.noise_var, self.iterations, self.runs, self.seed
        );
        if let Some(ev) = &self.change {
            let _ = writeln!(
                s,
                "change.at = {}\nchange.delay = {}\nchange.gain_db = {}",
                ev.at_iteration, ev.new_delay, ev.gain_db
            );
        }
        for (label, a) in &self.algorithms {
            let _ = writeln!(
                s,
                "\n[algorithm.{label}]\nvariant = {}\nmu = {:e}\nkappa = {:e}\nbeta = {}\nq = {}\ndelta = {:e}",
                a.variant, a.mu, a.kappa, a.beta, a.q, a.delta
            );
        }
        f.write_str(&s)
    }
}

/// Parses and resolves a configuration document.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentEntry>, ConfigError> {
    ExperimentConfig::parse(text)?
        .entries()
        .map_err(|e| err(0, e.to_string()))
}
