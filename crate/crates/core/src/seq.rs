//! Sequence-space counterexample: the map `A(x) = E x - (x, a) x` on
//! truncated sequences, with `E = diag(e^{-k})` and `a = (1/k)`.
//!
//! The linearisation at the origin is `E`, which is injective, yet every
//! neighbourhood of zero in every `h^s` contains the nonzero solutions
//! `x^(k) = k e^{-k} e_k` of `A(x) = 0`. Entries are indexed from `k = 1`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default truncation length.
pub const DEFAULT_TRUNCATION: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceVec {
    entries: Vec<f64>,
}

impl SequenceVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("sequence truncation must be at least 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sequence entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn zeros(truncation: usize) -> Result<Self> {
        Self::new(vec![0.0; truncation])
    }

    /// Unit vector `e_k` (1-based).
    pub fn unit(k: usize, truncation: usize) -> Result<Self> {
        check_index(k, truncation)?;
        let mut v = vec![0.0; truncation];
        v[k - 1] = 1.0;
        Self::new(v)
    }

    pub fn truncation(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry `x_k`, 1-based.
    pub fn get(&self, k: usize) -> f64 {
        self.entries[k - 1]
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(x, a) = Σ x_k / k`.
    pub fn pair_with_a(&self) -> f64 {
        self.entries.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).sum()
    }

    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        check_same(self, other)?;
        Self::new(self.entries.iter().zip(&other.entries).map(|(a, b)| a + alpha * b).collect())
    }

    /// `E x`, componentwise `e^{-k} x_k`.
    pub fn apply_e(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, v)| (-((i + 1) as f64)).exp() * v)
            .collect();
        Self { entries }
    }
}

fn check_index(k: usize, truncation: usize) -> Result<()> {
    if k == 0 || k > truncation {
        return Err(Error::InvalidInput(format!(
            "index k = {k} outside 1..={truncation}"
        )));
    }
    Ok(())
}

fn check_same(a: &SequenceVec, b: &SequenceVec) -> Result<()> {
    if a.truncation() != b.truncation() {
        return Err(Error::InvalidInput(format!(
            "truncation mismatch: {} vs {}",
            a.truncation(),
            b.truncation()
        )));
    }
    Ok(())
}

/// `A(x)_k = e^{-k} x_k - x_k Σ_m x_m / m`.
pub fn seq_map(x: &SequenceVec) -> SequenceVec {
    let pairing = x.pair_with_a();
    let entries = x
        .entries
        .iter()
        .enumerate()
        .map(|(i, v)| (-((i + 1) as f64)).exp() * v - v * pairing)
        .collect();
    SequenceVec { entries }
}

/// Differential of [`seq_map`] at `x0` applied to `h`:
/// `E h - (h, a) x0 - (x0, a) h`.
pub fn seq_linearization_at(x0: &SequenceVec, h: &SequenceVec) -> Result<SequenceVec> {
    check_same(x0, h)?;
    let h_a = h.pair_with_a();
    let x0_a = x0.pair_with_a();
    let entries = (0..h.truncation())
        .map(|i| (-((i + 1) as f64)).exp() * h.entries[i] - h_a * x0.entries[i] - x0_a * h.entries[i])
        .collect();
    Ok(SequenceVec { entries })
}

/// The spurious zero `x^(k)` of [`seq_map`]: `k e^{-k}` at position `k`.
pub fn counterexample(k: usize, truncation: usize) -> Result<SequenceVec> {
    check_index(k, truncation)?;
    let mut v = vec![0.0; truncation];
    v[k - 1] = k as f64 * (-(k as f64)).exp();
    SequenceVec::new(v)
}

/// `‖x‖_{h^s} = (Σ k^{2s} |x_k|²)^{1/2}` over the truncation.
pub fn hs_norm(x: &SequenceVec, s: f64) -> f64 {
    x.entries
        .iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64).powf(2.0 * s) * v * v)
        .sum::<f64>()
        .sqrt()
}

/// `‖e_k‖_{h^{s1}} / ‖E e_k‖_{h^{s2}} = k^{s1 - s2} e^k`, evaluated in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityRatio {
    pub k: usize,
    pub log10: f64,
    /// `10^log10`, or `f64::MAX` when that overflows.
    pub value: f64,
    pub saturated: bool,
}

pub fn instability_ratio(k: usize, s1: f64, s2: f64) -> Result<InstabilityRatio> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let kf = k as f64;
    let ln = (s1 - s2) * kf.ln() + kf;
    let log10 = ln / std::f64::consts::LN_10;
    let raw = ln.exp();
    let saturated = !raw.is_finite();
    Ok(InstabilityRatio {
        k,
        log10,
        value: if saturated { f64::MAX } else { raw },
        saturated,
    })
}
