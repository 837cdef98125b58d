//! Adaptive transversal filters with an optional zero attractor.
//!
//! Every variant shares the same gradient-correction step
//!
//! ```text
//! e(n)     = d(n) - x(n)' w(n)
//! w(n+1)   = w(n) + g(n) e(n) x(n) + kappa f(n)
//! ```
//!
//! where `g(n) = mu` for LMS-type updates and `mu / (delta + x(n)' x(n))` for
//! NLMS-type updates. The zero-attraction vector `f` is only used by the l0
//! variants. It holds `f_beta(w_i)` as last computed: each iteration refreshes
//! the residue class `j mod Q == n mod Q` from the current (pre-update)
//! weights and reuses the stale values everywhere else.

use std::fmt;
use std::iter::StepBy;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Lms,
    Nlms,
    L0Lms,
    L0Nlms,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Lms, Variant::Nlms, Variant::L0Lms, Variant::L0Nlms];

    /// True for the variants that divide the step by the regressor energy.
    pub fn is_normalized(self) -> bool {
        matches!(self, Variant::Nlms | Variant::L0Nlms)
    }

    /// True for the variants carrying a zero attractor.
    pub fn has_attractor(self) -> bool {
        matches!(self, Variant::L0Lms | Variant::L0Nlms)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lms => "lms",
            Variant::Nlms => "nlms",
            Variant::L0Lms => "l0lms",
            Variant::L0Nlms => "l0nlms",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "lms" => Ok(Variant::Lms),
            "nlms" => Ok(Variant::Nlms),
            "l0lms" => Ok(Variant::L0Lms),
            "l0nlms" => Ok(Variant::L0Nlms),
            _ => Err(Error::invalid(
                "variant",
                format!("`{s}` is not one of lms, nlms, l0lms, l0nlms"),
            )),
        }
    }
}

/// Algorithm variant plus its tuning parameters.
///
/// `kappa` and `beta` only matter for the l0 variants and `delta` only for the
/// normalized ones; the others are carried along untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    /// Step size.
    pub mu: f64,
    /// Attraction intensity, the product of the step size and the l0 weight.
    pub kappa: f64,
    /// Attraction range is `(-1/beta, 1/beta)`.
    pub beta: f64,
    /// One in `q` cached attractor entries is refreshed per iteration.
    pub q: usize,
    /// NLMS regularizer.
    pub delta: f64,
}

impl AlgorithmConfig {
    pub const DEFAULT_BETA: f64 = 5.0;
    pub const DEFAULT_Q: usize = 4;
    pub const DEFAULT_DELTA: f64 = 1e-5;

    pub fn new(variant: Variant, mu: f64) -> Self {
        AlgorithmConfig {
            variant,
            mu,
            kappa: 0.0,
            beta: Self::DEFAULT_BETA,
            q: Self::DEFAULT_Q,
            delta: Self::DEFAULT_DELTA,
        }
    }

    pub fn lms(mu: f64) -> Self {
        Self::new(Variant::Lms, mu)
    }

    pub fn nlms(mu: f64) -> Self {
        Self::new(Variant::Nlms, mu)
    }

    pub fn l0_lms(mu: f64, kappa: f64) -> Self {
        Self::new(Variant::L0Lms, mu).with_kappa(kappa)
    }

    pub fn l0_nlms(mu: f64, kappa: f64) -> Self {
        Self::new(Variant::L0Nlms, mu).with_kappa(kappa)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Weight of the l0 penalty in the underlying cost, `kappa / mu`.
    pub fn gamma(&self) -> f64 {
        self.kappa / self.mu
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        positive("mu", self.mu)?;
        positive("beta", self.beta)?;
        positive("delta", self.delta)?;
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(
                "kappa",
                format!("must be finite and >= 0, got {}", self.kappa),
            ));
        }
        if self.q == 0 {
            return Err(Error::invalid("q", "must be >= 1"));
        }
        Ok(())
    }
}

/// One regressor/desired-sample pair. `x` is ordered most recent first.
#[derive(Debug, Clone, Copy)]
pub struct InputTap<'a> {
    pub x: &'a [f64],
    pub d: f64,
}

impl<'a> InputTap<'a> {
    pub fn new(x: &'a [f64], d: f64) -> Self {
        InputTap { x, d }
    }
}

/// Component-wise sign with `sgn(0) == 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact zero-attraction term `-beta sgn(x) exp(-beta |x|)`, kappa factored out.
///
/// Only used to cross-check [`attractor_taylor`].
pub fn attractor_exact(x: f64, beta: f64) -> f64 {
    -beta * sgn(x) * (-beta * x.abs()).exp()
}

/// First-order surrogate `f_beta(x)` of [`attractor_exact`]:
///
/// ```text
/// beta^2 x + beta   for -1/beta <= x < 0
/// beta^2 x - beta   for 0 < x <= 1/beta
/// 0                 elsewhere
/// ```
pub fn attractor_taylor(x: f64, beta: f64) -> f64 {
    -beta * (1.0 - beta * x.abs()).max(0.0) * sgn(x)
}

/// Coefficient indices whose cached attractor is refreshed at iteration `n`.
pub fn update_indices(n: u64, q: usize, l: usize) -> Result<StepBy<Range<usize>>> {
    if q == 0 {
        return Err(Error::invalid("q", "must be >= 1"));
    }
    if q > l {
        return Err(Error::invalid(
            "q",
            format!("partial-update divisor {q} exceeds filter length {l}"),
        ));
    }
    let start = (n % q as u64) as usize;
    Ok((start..l).step_by(q))
}

/// Adaptive coefficients, the cached attractor vector and the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    w: Vec<f64>,
    f_cache: Vec<f64>,
    n: u64,
}

impl FilterState {
    /// Zero coefficients, zero cache, iteration 0.
    pub fn new(len: usize) -> Self {
        FilterState {
            w: vec![0.0; len],
            f_cache: vec![0.0; len],
            n: 0,
        }
    }

    /// Starts from given coefficients with an empty attractor cache.
    pub fn from_coefficients(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("w", format!("non-finite coefficient {bad}")));
        }
        let f_cache = vec![0.0; w.len()];
        Ok(FilterState { w, f_cache, n: 0 })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.w
    }

    pub fn attractor_cache(&self) -> &[f64] {
        &self.f_cache
    }

    pub fn iteration(&self) -> u64 {
        self.n
    }

    /// Filter output `x' w` for the given regressor.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        check_len(self.w.len(), x.len())?;
        Ok(dot(x, &self.w))
    }

    /// A-priori estimation error `d - x' w`.
    pub fn compute_error(&self, tap: &InputTap<'_>) -> Result<f64> {
        Ok(tap.d - self.output(tap.x)?)
    }

    /// Runs one adaptation step and returns the a-priori error.
    ///
    /// On divergence the coefficients are left as computed and the iteration
    /// counter is not advanced; the state should be discarded.
    pub fn step(&mut self, tap: &InputTap<'_>, cfg: &AlgorithmConfig) -> Result<f64> {
        cfg.validate()?;
        let e = self.compute_error(tap)?;
        let x = tap.x;

        let gain = if cfg.variant.is_normalized() {
            cfg.mu * e / (cfg.delta + dot(x, x))
        } else {
            cfg.mu * e
        };

        let mut finite = true;
        if cfg.variant.has_attractor() {
            for j in update_indices(self.n, cfg.q, self.w.len())? {
                self.f_cache[j] = attractor_taylor(self.w[j], cfg.beta);
            }
        }
        if cfg.variant.has_attractor() && cfg.kappa != 0.0 {
            for ((w, &xi), &f) in self.w.iter_mut().zip(x).zip(&self.f_cache) {
                *w += gain * xi + cfg.kappa * f;
                finite &= w.is_finite();
            }
        } else {
            for (w, &xi) in self.w.iter_mut().zip(x) {
                *w += gain * xi;
                finite &= w.is_finite();
            }
        }

        if !finite {
            return Err(Error::Diverged { iteration: self.n });
        }
        self.n += 1;
        Ok(e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tapped delay line producing the regressor `[x(n), x(n-1), ..., x(n-L+1)]`.
///
/// Samples before the first push read as zero.
#[derive(Debug, Clone)]
pub struct Regressor {
    buf: Vec<f64>,
    head: usize,
    len: usize,
}

impl Regressor {
    pub fn new(len: usize) -> Self {
        // Two copies' worth of storage keeps the window contiguous; the tail is
        // moved back to the upper half only once every `len` pushes.
        Regressor {
            buf: vec![0.0; 2 * len],
            head: len,
            len,
        }
    }

    pub fn push(&mut self, sample: f64) {
        if self.len == 0 {
            return;
        }
        if self.head == 0 {
            let keep = self.len - 1;
            self.buf.copy_within(0..keep, self.len + 1);
            self.head = self.len + 1;
        }
        self.head -= 1;
        self.buf[self.head] = sample;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.buf[self.head..self.head + self.len]
    }
}
