//! Runs experiment presets or configuration files and writes learning curves.
//!
//! Output files, all under the chosen directory:
//!
//! - `<name>_curves.csv`: `iteration,<label>,...`, ensemble-average MSD in dB
//!   (or linear with `--linear`), `-inf` for an exactly zero MSD;
//! - `summary.csv`: `label,level_db,reach_iteration,runs,seed`, one row per
//!   configuration and curve segment;
//! - `<name>_meta.txt`: every resolved parameter.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use l0lms::config::{ConfigError, ExperimentConfig};
use l0lms::sim::{
    monte_carlo, preset, steady_state, ExperimentEntry, ExperimentId, LearningCurve,
    PresetOverrides, SteadyStateStats, DEFAULT_TOL_DB, DEFAULT_WINDOW,
};
use l0lms::systems::SystemKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("exactly one of a preset or a config file must be given")]
    Source,
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Model(#[from] l0lms::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Preset(ExperimentId),
    Config(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub source: Source,
    pub output_dir: PathBuf,
    pub runs_override: Option<usize>,
    /// Ensemble seed; for presets also the system seed.
    pub seed: u64,
    pub linear: bool,
    /// Also write each configuration's true system as `<name>_<label>_system.csv`.
    pub dump_systems: bool,
}

impl RunRequest {
    pub fn new(
        preset: Option<ExperimentId>,
        config_path: Option<PathBuf>,
        output_dir: PathBuf,
    ) -> Result<Self, CliError> {
        let source = match (preset, config_path) {
            (Some(p), None) => Source::Preset(p),
            (None, Some(c)) => Source::Config(c),
            _ => return Err(CliError::Source),
        };
        Ok(RunRequest {
            source,
            output_dir,
            runs_override: None,
            seed: 0,
            linear: false,
            dump_systems: false,
        })
    }
}

/// A resolved experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub entries: Vec<ExperimentEntry>,
}

pub fn resolve(req: &RunRequest) -> Result<Experiment, CliError> {
    let (name, mut entries) = match &req.source {
        Source::Preset(id) => {
            let ov = PresetOverrides {
                runs: req.runs_override,
                seed: req.seed,
                ..Default::default()
            };
            (id.to_string(), preset(*id, &ov)?)
        }
        Source::Config(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let cfg = ExperimentConfig::parse(&text).map_err(|source| CliError::Config {
                path: path.clone(),
                source,
            })?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".into());
            (name, cfg.entries()?)
        }
    };
    if let Some(runs) = req.runs_override {
        if runs == 0 {
            return Err(l0lms::Error::InvalidParameter {
                name: "runs",
                reason: "must be >= 1".into(),
            }
            .into());
        }
        for e in &mut entries {
            e.runs = runs;
        }
    }
    Ok(Experiment { name, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done {
        curve: LearningCurve,
        stats: Vec<SteadyStateStats>,
    },
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct LabelResult {
    pub label: String,
    pub runs: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub window: usize,
    pub results: Vec<LabelResult>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.results
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::Failed(_)))
            .count()
    }
}

/// Steady-state window: the default, shortened to half of the shortest
/// segment for short runs.
pub fn window_for(entries: &[ExperimentEntry]) -> usize {
    let shortest = entries
        .iter()
        .map(|e| match e.trial.change {
            Some(ev) => ev.at_iteration.min(e.trial.iterations - ev.at_iteration),
            None => e.trial.iterations,
        })
        .min()
        .unwrap_or(1);
    DEFAULT_WINDOW.min(shortest / 2).max(1)
}

pub fn run(req: &RunRequest) -> Result<RunReport, CliError> {
    let exp = resolve(req)?;
    fs::create_dir_all(&req.output_dir).map_err(io_err(&req.output_dir))?;
    let window = window_for(&exp.entries);

    let mut results = Vec::new();
    for e in &exp.entries {
        let outcome = match monte_carlo(&e.trial, e.runs, req.seed) {
            Ok(curve) => {
                let curve = curve.with_label(&e.label);
                let stats = steady_state(&curve, window, DEFAULT_TOL_DB)?;
                Outcome::Done { curve, stats }
            }
            Err(err @ l0lms::Error::Diverged { .. }) => Outcome::Failed(err.to_string()),
            Err(err) => return Err(err.into()),
        };
        results.push(LabelResult {
            label: e.label.clone(),
            runs: e.runs,
            outcome,
        });
    }

    let report = RunReport {
        name: exp.name.clone(),
        window,
        results,
    };
    write_curves(&req.output_dir, &report, req.linear)?;
    write_summary(&req.output_dir, &report, req.seed)?;
    write_meta(&req.output_dir, &exp, req, window)?;
    if req.dump_systems {
        for e in &exp.entries {
            let path = req
                .output_dir
                .join(format!("{}_{}_system.csv", exp.name, e.label));
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            e.trial
                .system
                .write_csv(io::BufWriter::new(file))
                .map_err(io_err(&path))?;
        }
    }
    Ok(report)
}

pub fn format_db(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn write_curves(dir: &Path, report: &RunReport, linear: bool) -> Result<(), CliError> {
    let path = dir.join(format!("{}_curves.csv", report.name));
    let mut w = csv::Writer::from_path(&path)?;
    let curves: Vec<&LearningCurve> = report
        .results
        .iter()
        .filter_map(|r| match &r.outcome {
            Outcome::Done { curve, .. } => Some(curve),
            Outcome::Failed(_) => None,
        })
        .collect();
    let columns: Vec<Vec<String>> = curves
        .iter()
        .map(|c| {
            if linear {
                c.msd.iter().map(|v| format!("{v:.6e}")).collect()
            } else {
                c.db().into_iter().map(format_db).collect()
            }
        })
        .collect();

    let mut header = vec!["iteration".to_string()];
    header.extend(curves.iter().map(|c| c.label.clone()));
    w.write_record(&header)?;
    let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    for n in 0..len {
        let mut row = vec![n.to_string()];
        row.extend(
            columns
                .iter()
                .map(|col| col.get(n).cloned().unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

fn write_summary(dir: &Path, report: &RunReport, seed: u64) -> Result<(), CliError> {
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["label", "level_db", "reach_iteration", "runs", "seed"])?;
    for r in &report.results {
        match &r.outcome {
            Outcome::Done { stats, .. } => {
                for s in stats {
                    let label = if stats.len() > 1 {
                        format!("{}@{}", r.label, s.segment_start)
                    } else {
                        r.label.clone()
                    };
                    let reach = s
                        .reach_iteration
                        .map_or_else(|| "not_reached".to_string(), |n| n.to_string());
                    w.write_record([
                        label,
                        format_db(s.level_db),
                        reach,
                        r.runs.to_string(),
                        seed.to_string(),
                    ])?;
                }
            }
            Outcome::Failed(msg) => {
                w.write_record([
                    r.label.clone(),
                    "NaN".to_string(),
                    format!("failed: {msg}"),
                    r.runs.to_string(),
                    seed.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

fn describe_entry(out: &mut String, e: &ExperimentEntry) {
    let t = &e.trial;
    let a = &t.algo;
    let _ = writeln!(out, "[{}]", e.label);
    let _ = writeln!(out, "variant = {}", a.variant);
    let _ = writeln!(out, "mu = {:e}", a.mu);
    if a.variant.has_attractor() {
        let _ = writeln!(out, "kappa = {:e}", a.kappa);
        let _ = writeln!(out, "gamma = {:e}", a.gamma());
        let _ = writeln!(out, "beta = {}", a.beta);
        let _ = writeln!(out, "q = {}", a.q);
    }
    if a.variant.is_normalized() {
        let _ = writeln!(out, "delta = {:e}", a.delta);
    }
    let _ = writeln!(out, "L = {}", t.filter_len());
    match &t.system.meta().kind {
        SystemKind::General { n_large, small_var } => {
            let _ = writeln!(
                out,
                "system = general, n_large = {n_large}, small_var = {small_var:e}"
            );
        }
        SystemKind::Cluster {
            delay,
            span,
            gain_db,
        } => {
            let _ = writeln!(
                out,
                "system = cluster, delay = {delay}, span = {span}, tau = span / 4, gain_db = {gain_db}"
            );
        }
        SystemKind::Custom => {
            let _ = writeln!(out, "system = custom");
        }
    }
    let _ = writeln!(out, "system.seed = {}", t.system.meta().seed);
    let _ = writeln!(out, "system.energy = {:e}", t.system.energy());
    let s = &t.signal;
    let _ = write!(out, "signal = {}, variance = {:e}", s.kind, s.variance);
    if s.kind == l0lms::signals::SignalKind::Ar1 {
        let _ = write!(out, ", ar_coeff = {}", s.ar_coeff);
    }
    let _ = writeln!(out, ", normalize = {}", s.normalize);
    let _ = writeln!(out, "noise_var = {:e}", t.noise_var);
    let _ = writeln!(out, "iterations = {}", t.iterations);
    if let Some(ev) = &t.change {
        let _ = writeln!(
            out,
            "change = at {}, new delay {}, gain {} dB",
            ev.at_iteration, ev.new_delay, ev.gain_db
        );
    }
    let _ = writeln!(out, "runs = {}", e.runs);
    out.push('\n');
}

fn write_meta(
    dir: &Path,
    exp: &Experiment,
    req: &RunRequest,
    window: usize,
) -> Result<(), CliError> {
    let mut out = String::new();
    let _ = writeln!(out, "experiment = {}", exp.name);
    match &req.source {
        Source::Preset(id) => {
            let _ = writeln!(out, "source = preset {id}");
        }
        Source::Config(p) => {
            let _ = writeln!(out, "source = config {}", p.display());
        }
    }
    let _ = writeln!(out, "seed = {}", req.seed);
    let _ = writeln!(
        out,
        "trial seeds = splitmix(seed, trial index); excitation stream 0, noise stream 1"
    );
    let _ = writeln!(
        out,
        "msd = sum_i (w_i - h_i)^2 on the weights entering each iteration (w(0) = 0)"
    );
    let _ = writeln!(
        out,
        "curves = {}",
        if req.linear {
            "linear MSD"
        } else {
            "10 log10(MSD), -inf for 0"
        }
    );
    let _ = writeln!(out, "steady_state.window = {window}");
    let _ = writeln!(out, "steady_state.tol_db = {DEFAULT_TOL_DB}");
    let _ = writeln!(out, "partial update = indices j with j mod q == n mod q (0-based), refreshed before the weight update");
    let _ = writeln!(out, "regressor history before n = 0 is zero");
    let _ = writeln!(
        out,
        "divergence = abort trial on any non-finite coefficient"
    );
    out.push('\n');
    for e in &exp.entries {
        describe_entry(&mut out, e);
    }
    let path = dir.join(format!("{}_meta.txt", exp.name));
    fs::write(&path, out).map_err(io_err(&path))
}
