//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function has a plain-Rust counterpart (`*_impl`) so the
//! numerics can be tested natively.

use l0lms::filters::{
    attractor_exact, attractor_taylor, AlgorithmConfig, FilterState, InputTap, Regressor,
};
use l0lms::signals::{synth_desired, SignalSpec};
use l0lms::sim::{derive_seed, monte_carlo, steady_state, to_db, TrialConfig};
use l0lms::systems::{gen_general_sparse, ImpulseResponse};
use l0lms::{Error, Result};
use wasm_bindgen::prelude::*;

/// Filter length of the demo system.
pub const LEN: usize = 128;
/// Observation-noise variance of the demo.
pub const NOISE_VAR: f64 = 1e-4;

const MAX_WORK: usize = 40_000_000;

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn check_budget(runs: usize, iterations: usize) -> Result<()> {
    if runs.saturating_mul(iterations).saturating_mul(LEN) > MAX_WORK {
        return Err(invalid(
            "runs",
            format!("runs x iterations must stay below {}", MAX_WORK / LEN),
        ));
    }
    Ok(())
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct AttractorCurves {
    x: Vec<f64>,
    taylor: Vec<f64>,
    exact: Vec<f64>,
}

#[wasm_bindgen]
impl AttractorCurves {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn taylor(&self) -> Vec<f64> {
        self.taylor.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }
}

/// Samples both attractors on `[-2/beta, 2/beta]`.
pub fn attractor_impl(beta: f64, points: usize) -> Result<AttractorCurves> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", format!("must be > 0, got {beta}")));
    }
    if points < 2 {
        return Err(invalid("points", "must be >= 2"));
    }
    let lim = 2.0 / beta;
    let x: Vec<f64> = (0..points)
        .map(|i| lim * (2.0 * i as f64 - (points - 1) as f64) / (points - 1) as f64)
        .collect();
    Ok(AttractorCurves {
        taylor: x.iter().map(|&v| attractor_taylor(v, beta)).collect(),
        exact: x.iter().map(|&v| attractor_exact(v, beta)).collect(),
        x,
    })
}

#[wasm_bindgen]
pub fn attractor(beta: f64, points: usize) -> std::result::Result<AttractorCurves, JsError> {
    attractor_impl(beta, points).map_err(js)
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Comparison {
    lms_db: Vec<f64>,
    l0_db: Vec<f64>,
    lms_level: f64,
    l0_level: f64,
    lms_reach: Option<u32>,
    l0_reach: Option<u32>,
}

#[wasm_bindgen]
impl Comparison {
    #[wasm_bindgen(getter)]
    pub fn lms_db(&self) -> Vec<f64> {
        self.lms_db.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn l0_db(&self) -> Vec<f64> {
        self.l0_db.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lms_level(&self) -> f64 {
        self.lms_level
    }
    #[wasm_bindgen(getter)]
    pub fn l0_level(&self) -> f64 {
        self.l0_level
    }
    /// Iteration at which LMS settles, `undefined` if it does not.
    #[wasm_bindgen(getter)]
    pub fn lms_reach(&self) -> Option<u32> {
        self.lms_reach
    }
    #[wasm_bindgen(getter)]
    pub fn l0_reach(&self) -> Option<u32> {
        self.l0_reach
    }
}

fn demo_trial(algo: AlgorithmConfig, system: ImpulseResponse, iterations: usize) -> TrialConfig {
    TrialConfig {
        algo,
        system,
        change: None,
        signal: SignalSpec::white(1.0),
        noise_var: NOISE_VAR,
        iterations,
        seed: 0,
    }
}

/// Ensemble learning curves of LMS and l0-LMS on one random sparse system.
pub fn compare_impl(
    mu: f64,
    kappa: f64,
    n_large: usize,
    runs: usize,
    iterations: usize,
    seed: u64,
) -> Result<Comparison> {
    check_budget(runs, iterations)?;
    let system = gen_general_sparse(LEN, n_large, 0.0, seed)?;
    let lms = monte_carlo(
        &demo_trial(AlgorithmConfig::lms(mu), system.clone(), iterations),
        runs,
        seed,
    )?;
    let l0 = monte_carlo(
        &demo_trial(AlgorithmConfig::l0_lms(mu, kappa), system, iterations),
        runs,
        seed,
    )?;
    let window = (iterations / 10).max(1);
    let s_lms = &steady_state(&lms, window, 1.0)?[0];
    let s_l0 = &steady_state(&l0, window, 1.0)?[0];
    Ok(Comparison {
        lms_db: lms.db(),
        l0_db: l0.db(),
        lms_level: s_lms.level_db,
        l0_level: s_l0.level_db,
        lms_reach: s_lms.reach_iteration.map(|n| n as u32),
        l0_reach: s_l0.reach_iteration.map(|n| n as u32),
    })
}

#[wasm_bindgen]
pub fn compare(
    mu: f64,
    kappa: f64,
    n_large: usize,
    runs: usize,
    iterations: usize,
    seed: u64,
) -> std::result::Result<Comparison, JsError> {
    compare_impl(mu, kappa, n_large, runs, iterations, seed).map_err(js)
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Identification {
    truth: Vec<f64>,
    lms: Vec<f64>,
    l0: Vec<f64>,
}

#[wasm_bindgen]
impl Identification {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lms(&self) -> Vec<f64> {
        self.lms.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn l0(&self) -> Vec<f64> {
        self.l0.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lms_msd_db(&self) -> f64 {
        to_db(sq_dist(&self.lms, &self.truth))
    }
    #[wasm_bindgen(getter)]
    pub fn l0_msd_db(&self) -> f64 {
        to_db(sq_dist(&self.l0, &self.truth))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// One run of LMS and l0-LMS on the same data; returns the final estimates.
pub fn identify_impl(
    mu: f64,
    kappa: f64,
    n_large: usize,
    iterations: usize,
    seed: u64,
) -> Result<Identification> {
    check_budget(1, iterations)?;
    let system = gen_general_sparse(LEN, n_large, 0.0, seed)?;
    let x = SignalSpec::white(1.0).generate(iterations, derive_seed(seed, 0))?;
    let d = synth_desired(&x, &system, NOISE_VAR, derive_seed(seed, 1))?;
    let lms_cfg = AlgorithmConfig::lms(mu);
    let l0_cfg = AlgorithmConfig::l0_lms(mu, kappa);
    let mut lms = FilterState::new(LEN);
    let mut l0 = FilterState::new(LEN);
    let mut reg = Regressor::new(LEN);
    for (xn, dn) in x.iter().zip(&d) {
        reg.push(*xn);
        let tap = InputTap::new(reg.as_slice(), *dn);
        lms.step(&tap, &lms_cfg)?;
        l0.step(&tap, &l0_cfg)?;
    }
    Ok(Identification {
        truth: system.coefficients().to_vec(),
        lms: lms.coefficients().to_vec(),
        l0: l0.coefficients().to_vec(),
    })
}

#[wasm_bindgen]
pub fn identify(
    mu: f64,
    kappa: f64,
    n_large: usize,
    iterations: usize,
    seed: u64,
) -> std::result::Result<Identification, JsError> {
    identify_impl(mu, kappa, n_large, iterations, seed).map_err(js)
}
