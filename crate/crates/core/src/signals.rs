//! Excitation and observation-noise sources.
//!
//! All generators are driven by a ChaCha8 stream seeded from a `u64`, so a
//! sequence is reproducible on any platform from its seed alone.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::systems::ImpulseResponse;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    White,
    Ar1,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::White => "white",
            SignalKind::Ar1 => "ar1",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" => Ok(SignalKind::White),
            "ar1" => Ok(SignalKind::Ar1),
            _ => Err(Error::invalid(
                "signal.kind",
                format!("`{s}` is not one of white, ar1"),
            )),
        }
    }
}

/// Description of the excitation `x(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// Variance of the white driving noise.
    pub variance: f64,
    /// Pole of the AR(1) filter; ignored for white input.
    pub ar_coeff: f64,
    /// Rescale the generated sequence to unit sample variance.
    pub normalize: bool,
}

impl SignalSpec {
    pub fn white(variance: f64) -> Self {
        SignalSpec {
            kind: SignalKind::White,
            variance,
            ar_coeff: 0.0,
            normalize: false,
        }
    }

    pub fn ar1(ar_coeff: f64, normalize: bool) -> Self {
        SignalSpec {
            kind: SignalKind::Ar1,
            variance: 1.0,
            ar_coeff,
            normalize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::invalid(
                "signal.variance",
                format!("must be > 0, got {}", self.variance),
            ));
        }
        if self.ar_coeff.is_nan() || self.ar_coeff.abs() >= 1.0 {
            return Err(Error::invalid(
                "signal.ar_coeff",
                format!("must lie in (-1, 1), got {}", self.ar_coeff),
            ));
        }
        Ok(())
    }

    /// Draws `n` samples of this excitation.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let u = gen_white(n, self.variance, seed)?;
        let x = match self.kind {
            SignalKind::White => u,
            SignalKind::Ar1 => color_ar1(&u, self.ar_coeff)?,
        };
        if self.normalize {
            normalize_power(&x)
        } else {
            Ok(x)
        }
    }
}

/// `n` i.i.d. zero-mean Gaussian samples of the given variance.
pub fn gen_white(n: usize, variance: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::invalid(
            "variance",
            format!("must be > 0, got {variance}"),
        ));
    }
    let sd = variance.sqrt();
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect())
}

/// First-order autoregressive coloring `x(n) = a x(n-1) + u(n)`, `x(0) = u(0)`.
pub fn color_ar1(u: &[f64], a: f64) -> Result<Vec<f64>> {
    if a.is_nan() || a.abs() >= 1.0 {
        return Err(Error::invalid(
            "ar_coeff",
            format!("|a| must be < 1 for a stable filter, got {a}"),
        ));
    }
    let mut prev = 0.0;
    Ok(u.iter()
        .map(|&v| {
            prev = a * prev + v;
            prev
        })
        .collect())
}

/// Population variance about the sample mean.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Scales `x` to unit sample variance.
pub fn normalize_power(x: &[f64]) -> Result<Vec<f64>> {
    let var = sample_variance(x);
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::invalid(
            "x",
            "cannot normalize a zero-power sequence",
        ));
    }
    let scale = var.sqrt().recip();
    Ok(x.iter().map(|v| v * scale).collect())
}

/// Noise-free system output `sum_k h[k] x(n-k)` for `n` in `range`, with
/// `x(m) = 0` for `m < 0`.
pub fn system_output(x: &[f64], h: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
    let taps: Vec<(usize, f64)> = h
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (k, *v))
        .collect();
    range
        .map(|n| {
            taps.iter()
                .take_while(|(k, _)| *k <= n)
                .map(|(k, v)| v * x[n - k])
                .sum()
        })
        .collect()
}

/// Observation noise, all zeros when `noise_var == 0`.
pub(crate) fn observation_noise(n: usize, noise_var: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::invalid(
            "noise_var",
            format!("must be >= 0, got {noise_var}"),
        ));
    }
    if noise_var == 0.0 || n == 0 {
        Ok(vec![0.0; n])
    } else {
        gen_white(n, noise_var, seed)
    }
}

/// Desired signal `d(n) = sum_k h[k] x(n-k) + v(n)` with white Gaussian `v`.
pub fn synth_desired(
    x: &[f64],
    h: &ImpulseResponse,
    noise_var: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let v = observation_noise(x.len(), noise_var, seed)?;
    let y = system_output(x, h.coefficients(), 0..x.len());
    Ok(y.into_iter().zip(v).map(|(y, v)| y + v).collect())
}
