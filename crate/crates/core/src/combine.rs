//! Cauchy combination of dependent p-values.

use crate::dist::{cauchy_tail, ln_cauchy_tail};
use crate::{Error, Result};

/// Default weights for (p_xci, p_noxci, p_full).
pub const DEFAULT_WEIGHTS: [f64; 3] = [0.25, 0.25, 0.5];

/// Below this p a term uses wᵢ/(pᵢπ) in place of wᵢ·tan((0.5 − pᵢ)π).
const SMALL_P: f64 = 1e-15;
/// Replacement for inputs equal to 1.
const ONE_MINUS: f64 = 1.0 - 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct CctInput {
    p_values: Vec<f64>,
    weights: Vec<f64>,
}

impl CctInput {
    /// Weights must be positive and sum to 1 within 1e-12.
    pub fn new(p_values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if p_values.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: weights.len(), found: p_values.len() });
        }
        if p_values.is_empty() {
            return Err(Error::InvalidInput("no p-values to combine".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("CCT weights {weights:?} must be positive and sum to 1")));
        }
        Ok(CctInput { p_values, weights })
    }

    /// The three-model combination with [`DEFAULT_WEIGHTS`].
    pub fn three_model(p_xci: f64, p_noxci: f64, p_full: f64) -> Self {
        CctInput { p_values: vec![p_xci, p_noxci, p_full], weights: DEFAULT_WEIGHTS.to_vec() }
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn checked(p: f64) -> Result<f64> {
    if p == 1.0 {
        log::warn!("CCT input p = 1 replaced by 1 - 1e-16");
        return Ok(ONE_MINUS);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::PValueAtBoundary(p));
    }
    Ok(p)
}

/// T = Σ wᵢ tan((0.5 − pᵢ)π).
pub fn cct_statistic(input: &CctInput) -> Result<f64> {
    let mut t = 0.0;
    for (&p, &w) in input.p_values.iter().zip(&input.weights) {
        let p = checked(p)?;
        t += if p < SMALL_P { w / (p * std::f64::consts::PI) } else { w * ((0.5 - p) * std::f64::consts::PI).tan() };
    }
    Ok(t)
}

/// Combined p-value P(C > T) for a standard Cauchy C.
pub fn cct(input: &CctInput) -> Result<f64> {
    Ok(cauchy_tail(cct_statistic(input)?))
}

/// Combined p-value from log-scale inputs, for components below the f64
/// range. Returns ln p.
pub fn cct_log(ln_p_values: &[f64], weights: &[f64]) -> Result<f64> {
    if ln_p_values.len() != weights.len() {
        return Err(Error::LengthMismatch { expected: weights.len(), found: ln_p_values.len() });
    }
    // Terms with tiny p dominate: T ≈ Σ wᵢ/(pᵢπ), summed in log space.
    if ln_p_values.iter().any(|&l| l < SMALL_P.ln()) {
        let mut t = 0.0;
        let mut ln_big = f64::NEG_INFINITY;
        for (&l, &w) in ln_p_values.iter().zip(weights) {
            if l == f64::NEG_INFINITY {
                return Err(Error::PValueAtBoundary(0.0));
            }
            if l < SMALL_P.ln() {
                let term = w.ln() - l - std::f64::consts::PI.ln();
                ln_big = if ln_big == f64::NEG_INFINITY { term } else { ln_big.max(term) + (-(ln_big - term).abs()).exp().ln_1p() };
            } else {
                let p = checked(l.exp().min(1.0))?;
                t += w * ((0.5 - p) * std::f64::consts::PI).tan();
            }
        }
        let total = ln_big + (t / ln_big.exp()).ln_1p();
        if !total.is_finite() || t / ln_big.exp() <= -1.0 {
            return Err(Error::InvalidInput("CCT statistic underflow".into()));
        }
        // P(C > T) ≈ 1/(πT) for huge T.
        return Ok(-std::f64::consts::PI.ln() - total);
    }
    let p: Vec<f64> = ln_p_values.iter().map(|l| l.exp()).collect();
    let input = CctInput::new(p, weights.to_vec())?;
    Ok(ln_cauchy_tail(cct_statistic(&input)?))
}
