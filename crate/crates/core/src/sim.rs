//! Monte-Carlo learning curves.
//!
//! A trial draws one excitation and one noise realization, runs a filter
//! against the (possibly switching) true system and records the mean square
//! deviation `||w(n) - h(n)||^2` at every iteration. An ensemble averages the
//! linear MSD of `runs` independent trials. Trial seeds are derived from the
//! ensemble seed and the trial index only, so the first `k` trials of any
//! ensemble are the same trials regardless of its size, and the result does
//! not depend on the order the trials execute in.

use std::fmt;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::filters::{AlgorithmConfig, FilterState, InputTap, Regressor, Variant};
use crate::signals::{observation_noise, system_output, SignalSpec};
use crate::systems::{
    apply_change, gen_cluster_sparse, gen_general_sparse, ChangeEvent, ImpulseResponse,
};

/// Steady-state window used when none is given.
pub const DEFAULT_WINDOW: usize = 2000;
/// Steady-state tolerance in dB used when none is given.
pub const DEFAULT_TOL_DB: f64 = 1.0;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `base`.
///
/// Trial `i` of an ensemble uses `derive_seed(base_seed, i)`; inside a trial
/// the excitation uses sub-stream 0 and the observation noise sub-stream 1.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ mix64(index.wrapping_add(0x5EED)))
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub algo: AlgorithmConfig,
    pub system: ImpulseResponse,
    pub change: Option<ChangeEvent>,
    pub signal: SignalSpec,
    pub noise_var: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrialConfig {
    pub fn filter_len(&self) -> usize {
        self.system.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.algo.validate()?;
        self.signal.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be >= 1"));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::invalid(
                "noise_var",
                format!("must be >= 0, got {}", self.noise_var),
            ));
        }
        if self.algo.variant.has_attractor() && self.algo.q > self.filter_len() {
            return Err(Error::invalid(
                "q",
                format!(
                    "partial-update divisor {} exceeds filter length {}",
                    self.algo.q,
                    self.filter_len()
                ),
            ));
        }
        if let Some(ev) = &self.change {
            ev.validate()?;
            if ev.at_iteration >= self.iterations {
                return Err(Error::invalid(
                    "change.at",
                    format!(
                        "change at {} is not before the end of the run ({} iterations)",
                        ev.at_iteration, self.iterations
                    ),
                ));
            }
            apply_change(&self.system, ev)?;
        }
        Ok(())
    }

    /// The true system after the change event, if any.
    pub fn changed_system(&self) -> Result<Option<ImpulseResponse>> {
        self.change
            .as_ref()
            .map(|ev| apply_change(&self.system, ev))
            .transpose()
    }
}

/// Per-iteration MSD, linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub msd: Vec<f64>,
    pub runs: usize,
    pub label: String,
    /// Iteration at which the true system switched.
    pub change_at: Option<usize>,
}

/// `10 log10(v)`, with `0` mapped to negative infinity.
pub fn to_db(v: f64) -> f64 {
    if v == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * v.log10()
    }
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.msd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }

    pub fn db(&self) -> Vec<f64> {
        self.msd.iter().copied().map(to_db).collect()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `[start, end)` ranges split at the change point.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        match self.change_at {
            Some(at) if at > 0 && at < self.len() => vec![(0, at), (at, self.len())],
            _ => vec![(0, self.len())],
        }
    }
}

/// Squared Euclidean distance between estimate and truth.
pub fn msd(w_est: &[f64], w_true: &[f64]) -> Result<f64> {
    check_len(w_true.len(), w_est.len())?;
    Ok(w_est
        .iter()
        .zip(w_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Runs one trial with `cfg.seed`. `msd[n]` is measured on the weights
/// entering iteration `n`, so `msd[0] == ||h||^2`.
pub fn run_trial(cfg: &TrialConfig) -> Result<LearningCurve> {
    cfg.validate()?;
    let n_iter = cfg.iterations;
    let l = cfg.filter_len();

    let x = cfg.signal.generate(n_iter, derive_seed(cfg.seed, 0))?;
    let noise = observation_noise(n_iter, cfg.noise_var, derive_seed(cfg.seed, 1))?;

    let after = cfg.changed_system()?;
    let switch_at = cfg.change.map_or(n_iter, |ev| ev.at_iteration);
    let mut d = system_output(&x, cfg.system.coefficients(), 0..switch_at);
    if let Some(h) = &after {
        d.extend(system_output(&x, h.coefficients(), switch_at..n_iter));
    }
    for (d, v) in d.iter_mut().zip(&noise) {
        *d += v;
    }

    let mut state = FilterState::new(l);
    let mut reg = Regressor::new(l);
    let mut curve = Vec::with_capacity(n_iter);
    for n in 0..n_iter {
        let h = match &after {
            Some(h) if n >= switch_at => h,
            _ => &cfg.system,
        };
        curve.push(msd(state.coefficients(), h.coefficients())?);
        reg.push(x[n]);
        state.step(&InputTap::new(reg.as_slice(), d[n]), &cfg.algo)?;
    }

    Ok(LearningCurve {
        msd: curve,
        runs: 1,
        label: cfg.algo.variant.to_string(),
        change_at: cfg.change.map(|ev| ev.at_iteration),
    })
}

/// Ensemble average of `runs` trials seeded by `derive_seed(base_seed, i)`.
pub fn monte_carlo(cfg: &TrialConfig, runs: usize, base_seed: u64) -> Result<LearningCurve> {
    if runs == 0 {
        return Err(Error::invalid("runs", "must be >= 1"));
    }
    cfg.validate()?;

    let trial = |i: usize| {
        let mut c = cfg.clone();
        c.seed = derive_seed(base_seed, i as u64);
        run_trial(&c).map(|curve| curve.msd)
    };

    #[cfg(feature = "parallel")]
    let curves: Vec<Result<Vec<f64>>> = (0..runs).into_par_iter().map(trial).collect();
    #[cfg(not(feature = "parallel"))]
    let curves: Vec<Result<Vec<f64>>> = (0..runs).map(trial).collect();

    // Fixed summation order: trial 0, 1, 2, ...
    let mut iter = curves.into_iter();
    let mut acc = iter.next().expect("runs >= 1")?;
    for c in iter {
        for (a, v) in acc.iter_mut().zip(c?) {
            *a += v;
        }
    }
    let scale = runs as f64;
    for a in &mut acc {
        *a /= scale;
    }

    Ok(LearningCurve {
        msd: acc,
        runs,
        label: cfg.algo.variant.to_string(),
        change_at: cfg.change.map(|ev| ev.at_iteration),
    })
}

/// Steady-state level and time-to-steady-state of one curve segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateStats {
    /// First iteration of the segment.
    pub segment_start: usize,
    /// Mean dB-MSD over the last `window` iterations of the segment.
    pub level_db: f64,
    /// First iteration (absolute) whose trailing-window mean is within
    /// `tol_db` of the level; `None` if the segment never settles.
    pub reach_iteration: Option<usize>,
    pub window: usize,
    pub tol_db: f64,
}

impl SteadyStateStats {
    /// Iterations from the segment start to steady state.
    pub fn reach_offset(&self) -> Option<usize> {
        self.reach_iteration.map(|n| n - self.segment_start)
    }
}

/// Means of every length-`window` run of `db`; entry `i` covers
/// `db[i..i + window]`. Negative infinities propagate.
pub fn trailing_means(db: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || db.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(db.len() - window + 1);
    let mut sum = 0.0;
    let mut neg_inf = 0usize;
    let add = |v: f64, sign: f64, sum: &mut f64, neg_inf: &mut usize| {
        if v == f64::NEG_INFINITY {
            if sign > 0.0 {
                *neg_inf += 1;
            } else {
                *neg_inf -= 1;
            }
        } else {
            *sum += sign * v;
        }
    };
    for (i, &v) in db.iter().enumerate() {
        add(v, 1.0, &mut sum, &mut neg_inf);
        if i >= window {
            add(db[i - window], -1.0, &mut sum, &mut neg_inf);
        }
        if i + 1 >= window {
            out.push(if neg_inf > 0 {
                f64::NEG_INFINITY
            } else {
                sum / window as f64
            });
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Steady-state statistics for each segment of the curve (one segment, or
/// two when the system changed mid-run).
///
/// A segment counts as settled only if its final window is itself flat: the
/// mean of its first half may exceed the mean of its second half by at most
/// `tol_db`. Otherwise `reach_iteration` is `None`.
pub fn steady_state(
    curve: &LearningCurve,
    window: usize,
    tol_db: f64,
) -> Result<Vec<SteadyStateStats>> {
    if window == 0 {
        return Err(Error::invalid("window", "must be >= 1"));
    }
    if !(tol_db.is_finite() && tol_db > 0.0) {
        return Err(Error::invalid(
            "tol_db",
            format!("must be > 0, got {tol_db}"),
        ));
    }
    let db = curve.db();
    curve
        .segments()
        .into_iter()
        .map(|(start, end)| {
            if window >= end - start {
                return Err(Error::invalid(
                    "window",
                    format!("window {window} must be shorter than the segment [{start}, {end})"),
                ));
            }
            let seg = &db[start..end];
            let tail = &seg[seg.len() - window..];
            let level_db = mean(tail);
            let half = window / 2;
            let drift = if half == 0 {
                0.0
            } else {
                mean(&tail[..half]) - mean(&tail[window - half..])
            };
            let reach_iteration = if drift > tol_db {
                None
            } else {
                trailing_means(seg, window)
                    .iter()
                    .position(|m| *m <= level_db + tol_db)
                    .map(|i| start + i + window - 1)
            };
            Ok(SteadyStateStats {
                segment_start: start,
                level_db,
                reach_iteration,
                window,
                tol_db,
            })
        })
        .collect()
}

/// First iteration in `[from, to)` whose trailing-window mean dB-MSD, with
/// the window kept inside `[from, to)`, is at or below `threshold_db`.
pub fn reach_threshold(
    curve: &LearningCurve,
    window: usize,
    threshold_db: f64,
    from: usize,
    to: usize,
) -> Option<usize> {
    let to = to.min(curve.len());
    if from >= to {
        return None;
    }
    let db = curve.db();
    trailing_means(&db[from..to], window)
        .iter()
        .position(|m| *m <= threshold_db)
        .map(|i| from + i + window - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    /// Colored input, clustered echo path with an abrupt change, NLMS vs l0-NLMS.
    Exp1,
    /// White input, 8-sparse system, LMS vs l0-LMS over two kappa values.
    Exp2,
    /// White input, sparsity sweep over the number of large coefficients.
    Exp3,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 3] = [ExperimentId::Exp1, ExperimentId::Exp2, ExperimentId::Exp3];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp1" => Ok(ExperimentId::Exp1),
            "exp2" => Ok(ExperimentId::Exp2),
            "exp3" => Ok(ExperimentId::Exp3),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// Knobs that may be changed on a preset without touching its algorithms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresetOverrides {
    pub runs: Option<usize>,
    pub iterations: Option<usize>,
    /// Iteration of the system change (exp1 only).
    pub change_at: Option<usize>,
    /// Seed for system generation; also stored as each trial's seed.
    pub seed: u64,
}

/// One labelled configuration of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentEntry {
    pub label: String,
    pub trial: TrialConfig,
    pub runs: usize,
}

/// Preset parameters.
pub mod params {
    pub const RUNS: usize = 100;
    pub const BETA: f64 = 5.0;
    pub const Q: usize = 4;

    pub const EXP1_LEN: usize = 500;
    pub const EXP1_MU: f64 = 1.0;
    pub const EXP1_KAPPA: f64 = 8e-6;
    pub const EXP1_AR: f64 = 0.8;
    pub const EXP1_NOISE_VAR: f64 = 1e-3;
    pub const EXP1_DELAY: usize = 100;
    pub const EXP1_SPAN: usize = 96;
    pub const EXP1_CHANGE_AT: usize = 30_000;
    pub const EXP1_NEW_DELAY: usize = 300;
    pub const EXP1_GAIN_DB: f64 = -6.0;
    pub const EXP1_ITERATIONS: usize = 60_000;

    pub const EXP2_LEN: usize = 128;
    pub const EXP2_N_LARGE: usize = 8;
    pub const EXP2_MU: f64 = 1e-2;
    pub const EXP2_NOISE_VAR: f64 = 1e-4;
    pub const EXP2_KAPPAS: [f64; 2] = [2e-5, 8e-5];
    pub const EXP2_ITERATIONS: usize = 5_000;

    pub const EXP3_LEN: usize = 128;
    pub const EXP3_MU: f64 = 6e-3;
    pub const EXP3_NOISE_VAR: f64 = 1e-3;
    pub const EXP3_SMALL_VAR: f64 = 1e-4;
    /// Number of large coefficients and the matching attraction intensity.
    pub const EXP3_SWEEP: [(usize, f64); 5] = [
        (8, 8e-5),
        (16, 5.5e-5),
        (32, 4.5e-5),
        (64, 3.5e-5),
        (128, 1e-6),
    ];
    pub const EXP3_ITERATIONS: usize = 10_000;
}

/// Fully populated configurations of a reference experiment.
pub fn preset(id: ExperimentId, ov: &PresetOverrides) -> Result<Vec<ExperimentEntry>> {
    use params::*;

    let runs = ov.runs.unwrap_or(RUNS);
    if runs == 0 {
        return Err(Error::invalid("runs", "must be >= 1"));
    }
    let seed = ov.seed;
    let entry =
        |label: String, algo: AlgorithmConfig, system: ImpulseResponse, trial: &TrialConfig| {
            ExperimentEntry {
                label,
                trial: TrialConfig {
                    algo,
                    system,
                    ..trial.clone()
                },
                runs,
            }
        };

    let entries = match id {
        ExperimentId::Exp1 => {
            let system = gen_cluster_sparse(EXP1_LEN, EXP1_DELAY, EXP1_SPAN, 0.0, seed)?;
            let base = TrialConfig {
                algo: AlgorithmConfig::nlms(EXP1_MU),
                system: system.clone(),
                change: Some(ChangeEvent {
                    at_iteration: ov.change_at.unwrap_or(EXP1_CHANGE_AT),
                    new_delay: EXP1_NEW_DELAY,
                    gain_db: EXP1_GAIN_DB,
                }),
                signal: SignalSpec::ar1(EXP1_AR, true),
                noise_var: EXP1_NOISE_VAR,
                iterations: ov.iterations.unwrap_or(EXP1_ITERATIONS),
                seed,
            };
            vec![
                entry(
                    "nlms".into(),
                    AlgorithmConfig::nlms(EXP1_MU),
                    system.clone(),
                    &base,
                ),
                entry(
                    "l0nlms".into(),
                    AlgorithmConfig::l0_nlms(EXP1_MU, EXP1_KAPPA)
                        .with_beta(BETA)
                        .with_q(Q),
                    system,
                    &base,
                ),
            ]
        }
        ExperimentId::Exp2 => {
            let system = gen_general_sparse(EXP2_LEN, EXP2_N_LARGE, 0.0, seed)?;
            let base = TrialConfig {
                algo: AlgorithmConfig::lms(EXP2_MU),
                system: system.clone(),
                change: None,
                signal: SignalSpec::white(1.0),
                noise_var: EXP2_NOISE_VAR,
                iterations: ov.iterations.unwrap_or(EXP2_ITERATIONS),
                seed,
            };
            let mut v = vec![entry(
                "lms".into(),
                AlgorithmConfig::lms(EXP2_MU),
                system.clone(),
                &base,
            )];
            for kappa in EXP2_KAPPAS {
                v.push(entry(
                    format!("l0lms_k{kappa:e}"),
                    AlgorithmConfig::l0_lms(EXP2_MU, kappa)
                        .with_beta(BETA)
                        .with_q(Q),
                    system.clone(),
                    &base,
                ));
            }
            v
        }
        ExperimentId::Exp3 => {
            let base = TrialConfig {
                algo: AlgorithmConfig::lms(EXP3_MU),
                system: ImpulseResponse::zeros(EXP3_LEN)?,
                change: None,
                signal: SignalSpec::white(1.0),
                noise_var: EXP3_NOISE_VAR,
                iterations: ov.iterations.unwrap_or(EXP3_ITERATIONS),
                seed,
            };
            let mut v = Vec::new();
            let mut densest = None;
            for (lcn, kappa) in EXP3_SWEEP {
                let system = gen_general_sparse(EXP3_LEN, lcn, EXP3_SMALL_VAR, seed)?;
                v.push(entry(
                    format!("l0lms_lcn{lcn}"),
                    AlgorithmConfig::l0_lms(EXP3_MU, kappa)
                        .with_beta(BETA)
                        .with_q(Q),
                    system.clone(),
                    &base,
                ));
                densest = Some(system);
            }
            // LMS does not care about sparsity; it runs on the densest system so
            // that the LCN = 128 curve has a like-for-like reference.
            v.push(entry(
                "lms".into(),
                AlgorithmConfig::lms(EXP3_MU),
                densest.expect("non-empty sweep"),
                &base,
            ));
            v
        }
    };
    for e in &entries {
        e.trial.validate()?;
    }
    Ok(entries)
}

/// Same configuration with the variant switched, keeping every parameter.
pub fn with_variant(cfg: &TrialConfig, variant: Variant) -> TrialConfig {
    let mut c = cfg.clone();
    c.algo.variant = variant;
    c
}
