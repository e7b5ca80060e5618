//! Werner-state arithmetic: memory decay, entanglement swapping and the
//! two-to-one recurrence distillation protocol.
//!
//! Every formula accepts fidelities anywhere in `[0, 1]`. The physically
//! meaningful domain is `[1/4, 1]`, and states are entangled only above
//! `1/2`; inputs below `1/4` are accepted but logged at debug level.

use std::fmt;

use crate::error::{Error, Result};

/// Overlap of a Werner state with the target Bell state, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Fidelity(f64);

impl Fidelity {
    pub const ONE: Fidelity = Fidelity(1.0);
    /// Lower end of the physical Werner range (maximally mixed state).
    pub const MIXED: Fidelity = Fidelity(0.25);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fidelity(value))
        } else {
            Err(Error::domain("fidelity", value, "[0, 1]"))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_entangled(self) -> bool {
        self.0 > 0.5
    }

    // Formulas may drift a few ulps past the unit interval.
    fn clamped(value: f64) -> Self {
        Fidelity(value.clamp(0.0, 1.0))
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for Fidelity {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Fidelity::new(value)
    }
}

fn note_separable(f1: Fidelity, f2: Fidelity) {
    if f1 < Fidelity::MIXED || f2 < Fidelity::MIXED {
        log::debug!("werner input below 1/4 ({f1}, {f2}): separable regime");
    }
}

/// Per-step decoherence rate `alpha = -ln(f_star) / m_star`.
pub fn decoherence_rate(f_star: Fidelity, m_star: u32) -> Result<f64> {
    let f = f_star.value();
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::domain("f_star", f, "(0, 1)"));
    }
    if m_star < 1 {
        return Err(Error::domain("m_star", m_star as f64, ">= 1"));
    }
    Ok(-f.ln() / m_star as f64)
}

/// Exponential memory decay with a hard cutoff age.
///
/// Pairs are born with fidelity 1 and lose a factor `e^{-alpha}` per time
/// step; at age `m_star` their fidelity is exactly `f_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayModel {
    alpha: f64,
    m_star: u32,
    f_star: Fidelity,
    grid: Vec<f64>,
}

impl DecayModel {
    pub fn new(f_star: Fidelity, m_star: u32) -> Result<Self> {
        let alpha = decoherence_rate(f_star, m_star)?;
        // f_star^(m/m_star) equals e^{-alpha m} and is exact at both ends of
        // the grid, so F(0) == 1 and F(m_star) == f_star bit for bit.
        let grid = (0..=m_star)
            .map(|m| f_star.value().powf(m as f64 / m_star as f64))
            .collect();
        Ok(DecayModel {
            alpha,
            m_star,
            f_star,
            grid,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m_star(&self) -> u32 {
        self.m_star
    }

    pub fn f_star(&self) -> Fidelity {
        self.f_star
    }

    /// Fidelity of a pair that has been stored for `m` steps.
    pub fn fidelity_at_age(&self, m: u32) -> Result<Fidelity> {
        self.grid
            .get(m as usize)
            .map(|&f| Fidelity(f))
            .ok_or_else(|| Error::domain("age", m as f64, "0 ..= m_star"))
    }

    /// Fidelities for ages `0..=m_star`, strictly decreasing.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Age on the grid whose fidelity is closest to `f`. Ties go to the
    /// younger age.
    pub fn nearest_age(&self, f: Fidelity) -> u32 {
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (m, &g) in self.grid.iter().enumerate() {
            let gap = (f.value() - g).abs();
            if gap < best_gap {
                best = m as u32;
                best_gap = gap;
            }
        }
        best
    }
}

/// Output fidelity of a Bell-state measurement joining two Werner pairs.
///
/// Evaluated as `f1 f2 + (1 - f1)(1 - f2) / 3`, which is algebraically the
/// same as `((4 f1 - 1)(4 f2 - 1) / 3 + 1) / 4` but returns `f2` exactly
/// when `f1 == 1`.
pub fn swap_fidelity(f1: Fidelity, f2: Fidelity) -> Fidelity {
    note_separable(f1, f2);
    let (a, b) = (f1.value(), f2.value());
    Fidelity::clamped(a * b + (1.0 - a) * (1.0 - b) / 3.0)
}

/// Probability that the recurrence protocol heralds success.
pub fn distill_success_prob(f1: Fidelity, f2: Fidelity) -> f64 {
    note_separable(f1, f2);
    let (a, b) = (f1.value(), f2.value());
    (8.0 * (a * b) - 2.0 * (a + b) + 5.0) / 9.0
}

/// Fidelity of the surviving pair when distillation succeeds.
pub fn distill_output_fidelity(f1: Fidelity, f2: Fidelity) -> Result<Fidelity> {
    let (a, b) = (f1.value(), f2.value());
    // Both numerator and success probability carry a factor 1/9; dividing the
    // scaled forms keeps the fixed points at 1/2 and 1 exact.
    let numerator = 10.0 * (a * b) - (a + b) + 1.0;
    let denominator = 8.0 * (a * b) - 2.0 * (a + b) + 5.0;
    if denominator <= 0.0 {
        return Err(Error::ZeroSuccessProbability(a, b));
    }
    note_separable(f1, f2);
    Ok(Fidelity::clamped(numerator / denominator))
}
