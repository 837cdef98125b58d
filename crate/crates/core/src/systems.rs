//! Ground-truth sparse systems.
//!
//! Two shapes are generated: a *general* sparse response with a handful of
//! large taps scattered over the whole length (optionally on top of a small
//! Gaussian floor), and a *clustered* response whose energy sits in a single
//! decaying burst, as in a network echo path with a flat delay in front and
//! zeros behind.

use std::io::{self, Write};

use rand::seq::index;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::signals::rng_from_seed;

/// How a system was produced. Kept with the coefficients for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    General {
        n_large: usize,
        small_var: f64,
    },
    Cluster {
        delay: usize,
        span: usize,
        gain_db: f64,
    },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMeta {
    pub kind: SystemKind,
    pub seed: u64,
}

/// Coefficients of the unknown system plus which taps count as large.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    h: Vec<f64>,
    large_idx: Vec<usize>,
    meta: SystemMeta,
}

/// Abrupt change of a clustered system: move the burst and rescale it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeEvent {
    /// First iteration that sees the new system.
    pub at_iteration: usize,
    pub new_delay: usize,
    pub gain_db: f64,
}

impl ChangeEvent {
    pub fn validate(&self) -> Result<()> {
        if self.at_iteration == 0 {
            return Err(Error::invalid("change.at", "must be >= 1"));
        }
        if !self.gain_db.is_finite() {
            return Err(Error::invalid("change.gain_db", "must be finite"));
        }
        Ok(())
    }
}

/// Amplitude factor of a gain in decibels.
pub fn db_to_amplitude(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 20.0)
}

impl ImpulseResponse {
    /// Wraps arbitrary coefficients; every nonzero tap is flagged as large.
    pub fn from_coefficients(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::invalid("L", "system length must be >= 1"));
        }
        if let Some(bad) = h.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("h", format!("non-finite coefficient {bad}")));
        }
        let large_idx = h
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(ImpulseResponse {
            h,
            large_idx,
            meta: SystemMeta {
                kind: SystemKind::Custom,
                seed: 0,
            },
        })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::from_coefficients(vec![0.0; len])
    }

    /// Unit impulse at tap `at`.
    pub fn delay(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::invalid(
                "delay",
                format!("{at} is outside [0, {len})"),
            ));
        }
        let mut h = vec![0.0; len];
        h[at] = 1.0;
        Self::from_coefficients(h)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.h
    }

    pub fn large_indices(&self) -> &[usize] {
        &self.large_idx
    }

    pub fn meta(&self) -> &SystemMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }

    /// `[start, end)` of the part that a [`ChangeEvent`] relocates.
    fn active_span(&self) -> (usize, usize) {
        match self.meta.kind {
            SystemKind::Cluster { delay, span, .. } => (delay, delay + span),
            _ => {
                let first = self.h.iter().position(|v| *v != 0.0);
                let last = self.h.iter().rposition(|v| *v != 0.0);
                match (first, last) {
                    (Some(a), Some(b)) => (a, b + 1),
                    _ => (0, 0),
                }
            }
        }
    }

    /// Writes `index,value` rows under a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,value")?;
        for (i, v) in self.h.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

/// `n_large` taps at uniformly drawn distinct positions with standard normal
/// values; every other tap is `N(0, small_var)` (exactly zero when
/// `small_var == 0`).
pub fn gen_general_sparse(
    l: usize,
    n_large: usize,
    small_var: f64,
    seed: u64,
) -> Result<ImpulseResponse> {
    if l == 0 {
        return Err(Error::invalid("L", "system length must be >= 1"));
    }
    if n_large == 0 || n_large > l {
        return Err(Error::invalid(
            "n_large",
            format!("must be in [1, {l}], got {n_large}"),
        ));
    }
    if !(small_var.is_finite() && small_var >= 0.0) {
        return Err(Error::invalid(
            "small_var",
            format!("must be >= 0, got {small_var}"),
        ));
    }

    let mut rng = rng_from_seed(seed);
    let mut large_idx = index::sample(&mut rng, l, n_large).into_vec();
    large_idx.sort_unstable();

    let mut h = vec![0.0; l];
    for &i in &large_idx {
        h[i] = StandardNormal.sample(&mut rng);
    }
    if small_var > 0.0 {
        let small = Normal::new(0.0, small_var.sqrt()).expect("finite std dev");
        let mut large = large_idx.iter().peekable();
        for (i, v) in h.iter_mut().enumerate() {
            if large.peek() == Some(&&i) {
                large.next();
                continue;
            }
            *v = small.sample(&mut rng);
        }
    }

    Ok(ImpulseResponse {
        h,
        large_idx,
        meta: SystemMeta {
            kind: SystemKind::General { n_large, small_var },
            seed,
        },
    })
}

/// A single burst `g exp(-k / tau) u_k` on `[delay, delay + span)`, with
/// `tau = span / 4`, `u_k` standard normal and `g` the requested gain relative
/// to a unit-peak envelope. Zero elsewhere.
pub fn gen_cluster_sparse(
    l: usize,
    delay: usize,
    span: usize,
    gain_db: f64,
    seed: u64,
) -> Result<ImpulseResponse> {
    if span == 0 {
        return Err(Error::invalid("span", "must be >= 1"));
    }
    if delay + span > l {
        return Err(Error::invalid(
            "span",
            format!(
                "cluster [{delay}, {}) does not fit in length {l}",
                delay + span
            ),
        ));
    }
    if !gain_db.is_finite() {
        return Err(Error::invalid("gain_db", "must be finite"));
    }

    let mut rng = rng_from_seed(seed);
    let tau = span as f64 / 4.0;
    let g = db_to_amplitude(gain_db);
    let mut h = vec![0.0; l];
    for (k, v) in h[delay..delay + span].iter_mut().enumerate() {
        let u: f64 = StandardNormal.sample(&mut rng);
        *v = g * (-(k as f64) / tau).exp() * u;
    }

    Ok(ImpulseResponse {
        h,
        large_idx: (delay..delay + span).collect(),
        meta: SystemMeta {
            kind: SystemKind::Cluster {
                delay,
                span,
                gain_db,
            },
            seed,
        },
    })
}

/// Moves the active cluster to `ev.new_delay` and scales it by `ev.gain_db`.
pub fn apply_change(ir: &ImpulseResponse, ev: &ChangeEvent) -> Result<ImpulseResponse> {
    ev.validate()?;
    let l = ir.len();
    let (start, end) = ir.active_span();
    let span = end - start;
    if ev.new_delay + span > l {
        return Err(Error::invalid(
            "change.delay",
            format!(
                "shifted cluster [{}, {}) does not fit in length {l}",
                ev.new_delay,
                ev.new_delay + span
            ),
        ));
    }

    let g = db_to_amplitude(ev.gain_db);
    let mut h = vec![0.0; l];
    for (dst, src) in h[ev.new_delay..ev.new_delay + span]
        .iter_mut()
        .zip(&ir.h[start..end])
    {
        *dst = g * src;
    }
    let large_idx = ir
        .large_idx
        .iter()
        .map(|&i| {
            if (start..end).contains(&i) {
                i - start + ev.new_delay
            } else {
                i
            }
        })
        .collect();
    let kind = match ir.meta.kind {
        SystemKind::Cluster { span, gain_db, .. } => SystemKind::Cluster {
            delay: ev.new_delay,
            span,
            gain_db: gain_db + ev.gain_db,
        },
        ref other => other.clone(),
    };

    Ok(ImpulseResponse {
        h,
        large_idx,
        meta: SystemMeta {
            kind,
            seed: ir.meta.seed,
        },
    })
}
