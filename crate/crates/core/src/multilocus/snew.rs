//! Random-effects likelihood ratio test S_new for H₀: μ = τ² = 0 on per-variant
//! effect estimates β̂ᵢ ~ N(μ, Vᵢ + τ²), its boundary mixture null laws and
//! seeded Monte Carlo null tables for small k.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Method, NullLaw, TestResult};
use crate::codings::Component;
use crate::dist::{ln_mixture_tail, p_from_ln, ChiSquareMixture};
use crate::{Error, Result};

pub const HT_TOL: f64 = 1e-8;
pub const HT_MAX_ITER: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimates {
    betas: Vec<f64>,
    variances: Vec<f64>,
    component: Option<Component>,
}

impl EffectEstimates {
    pub fn new(betas: Vec<f64>, variances: Vec<f64>, component: Option<Component>) -> Result<Self> {
        if betas.len() != variances.len() {
            return Err(Error::LengthMismatch { expected: betas.len(), found: variances.len() });
        }
        if let Some(i) = variances.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NonpositiveSe(format!("variance {} at position {i}", variances[i])));
        }
        if let Some(b) = betas.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidInput(format!("effect estimate {b}")));
        }
        Ok(EffectEstimates { betas, variances, component })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn component(&self) -> Option<Component> {
        self.component
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectsEstimate {
    pub mu: f64,
    pub tau2: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Hardy–Thompson iteration for (μ̂, τ̂²) from τ² = 0. Non-convergence after
/// [`HT_MAX_ITER`] steps returns the last iterate with `converged = false`.
pub fn estimate_random_effects(est: &EffectEstimates) -> Result<RandomEffectsEstimate> {
    if est.len() < 2 {
        return Err(Error::TooFewVariants(est.len()));
    }
    let re = hardy_thompson(&est.betas, &est.variances);
    if !re.converged {
        log::warn!("random-effects iteration stopped after {} steps", re.iterations);
    }
    Ok(re)
}

fn hardy_thompson(b: &[f64], v: &[f64]) -> RandomEffectsEstimate {
    let mut tau2 = 0.0_f64;
    let mut mu = weighted_mean(b, v, tau2);
    for it in 1..=HT_MAX_ITER {
        let (mut sw2, mut num) = (0.0, 0.0);
        for (&bi, &vi) in b.iter().zip(v) {
            let w = 1.0 / (vi + tau2);
            sw2 += w * w;
            num += w * w * ((bi - mu).powi(2) - vi);
        }
        let new_tau2 = (num / sw2).max(0.0);
        let new_mu = weighted_mean(b, v, new_tau2);
        let change = (new_tau2 - tau2).abs().max((new_mu - mu).abs());
        tau2 = new_tau2;
        mu = new_mu;
        if change < HT_TOL {
            return RandomEffectsEstimate { mu, tau2, iterations: it, converged: true };
        }
    }
    RandomEffectsEstimate { mu, tau2, iterations: HT_MAX_ITER, converged: false }
}

fn weighted_mean(b: &[f64], v: &[f64], tau2: f64) -> f64 {
    let (mut sw, mut swb) = (0.0, 0.0);
    for (&bi, &vi) in b.iter().zip(v) {
        let w = 1.0 / (vi + tau2);
        sw += w;
        swb += w * bi;
    }
    swb / sw
}

/// Twice the log-likelihood gain of (μ, τ²) over (0, 0).
fn lr_at(b: &[f64], v: &[f64], mu: f64, tau2: f64) -> f64 {
    b.iter()
        .zip(v)
        .map(|(&bi, &vi)| (vi / (vi + tau2)).ln() + bi * bi / vi - (bi - mu).powi(2) / (vi + tau2))
        .sum()
}

fn snew_raw(b: &[f64], v: &[f64]) -> (f64, RandomEffectsEstimate) {
    let re = hardy_thompson(b, v);
    let s_ht = lr_at(b, v, re.mu, re.tau2);
    // The fixed-effects maximum (τ² = 0) is a candidate too, which keeps the
    // statistic nonnegative.
    let (sw, swb) = b.iter().zip(v).fold((0.0, 0.0), |(a, c), (&bi, &vi)| (a + 1.0 / vi, c + bi / vi));
    let s_fixed = swb * swb / sw;
    if s_ht >= s_fixed {
        (s_ht, re)
    } else {
        (s_fixed, RandomEffectsEstimate { mu: swb / sw, tau2: 0.0, ..re })
    }
}

/// S = Σ ln(Vᵢ/(Vᵢ+τ̂²)) + Σ β̂ᵢ²/Vᵢ − Σ (β̂ᵢ−μ̂)²/(Vᵢ+τ̂²) for one component.
pub fn snew_statistic(est: &EffectEstimates) -> Result<(f64, RandomEffectsEstimate)> {
    if est.len() < 2 {
        return Err(Error::TooFewVariants(est.len()));
    }
    let (s, re) = snew_raw(&est.betas, &est.variances);
    if !re.converged {
        log::warn!("random-effects iteration stopped after {} steps", re.iterations);
    }
    Ok((s, re))
}

/// Asymptotic law of a sum of `components` independent S statistics.
pub fn snew_mixture(components: usize) -> Result<ChiSquareMixture> {
    match components {
        1 => Ok(ChiSquareMixture::one_to_one()),
        3 => Ok(ChiSquareMixture::one_three_three_one()),
        c => Err(Error::UnsupportedComponents(c)),
    }
}

/// Sum of the component statistics. A table is used when one matches the
/// component count and every component has exactly the table's k (< 50);
/// otherwise the boundary mixture law applies.
pub fn snew_combined(components: &[EffectEstimates], tables: Option<&[SnewNullTable]>) -> Result<TestResult> {
    let mixture = snew_mixture(components.len())?;
    let mut subs = Vec::with_capacity(components.len());
    let mut total = 0.0;
    for est in components {
        let (s, _) = snew_statistic(est)?;
        total += s;
        subs.push(TestResult::from_law(Method::SNew, s, NullLaw::Mixture(ChiSquareMixture::one_to_one()), est.component)?);
    }
    let k0 = components[0].len();
    let table = tables.and_then(|ts| {
        ts.iter().find(|t| t.components == components.len() && t.k == k0 && t.k < 50 && components.iter().all(|c| c.len() == k0))
    });
    let mut out = match table {
        Some(t) => {
            let ln_p = t.ln_p_value(total)?;
            TestResult {
                method: Method::SNew,
                statistic: total,
                null_law: NullLaw::EmpiricalTable { k: t.k, components: t.components },
                p_value: p_from_ln(ln_p),
                ln_p_value: ln_p,
                component: None,
                rho: None,
                tail_method: None,
                components: Vec::new(),
            }
        }
        None => TestResult::from_law(Method::SNew, total, NullLaw::Mixture(mixture), None)?,
    };
    if components.len() == 1 {
        out.component = components[0].component;
    } else {
        out.components = subs;
    }
    Ok(out)
}

/// Seeded Monte Carlo null quantiles of the combined S statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnewNullTable {
    pub k: usize,
    pub components: usize,
    /// Decreasing upper-tail probabilities, ending at the anchor.
    pub p_grid: Vec<f64>,
    /// Empirical upper quantiles matching `p_grid` (nondecreasing).
    pub quantiles: Vec<f64>,
}

/// Smallest tabulated tail probability.
pub const TABLE_MIN_P: f64 = 1e-5;
/// At least this many draws must lie beyond the anchor quantile.
const TABLE_MIN_EXCEEDANCES: f64 = 50.0;
const DRAWS_PER_TASK: usize = 4096;

/// Tail probabilities 10^(−j/20) down to max(1e-5, 50/n_draws).
fn table_grid(n_draws: usize) -> Vec<f64> {
    let p_min = TABLE_MIN_P.max(TABLE_MIN_EXCEEDANCES / n_draws as f64);
    let mut grid = Vec::new();
    let mut j = 0;
    loop {
        let p = 10f64.powf(-(j as f64) / 20.0);
        if p < p_min * (1.0 - 1e-12) {
            break;
        }
        grid.push(p);
        j += 1;
    }
    grid
}

/// Null draws use β̂ᵢ ~ N(0, 1) with Vᵢ = 1; the statistic is scale-free
/// in (β̂, V) jointly, so unit variances lose no generality for equal Vᵢ.
pub fn tabulate_snew_null(k: usize, components: usize, n_draws: usize, seed: u64) -> Result<SnewNullTable> {
    if k < 2 {
        return Err(Error::TooFewVariants(k));
    }
    snew_mixture(components)?;
    if n_draws < 10_000 {
        return Err(Error::InvalidInput(format!("n_draws {n_draws} below 10000")));
    }
    let n_tasks = n_draws.div_ceil(DRAWS_PER_TASK);
    let mut stats: Vec<f64> = (0..n_tasks)
        .into_par_iter()
        .flat_map_iter(|task| {
            let mut rng = crate::rng::stream(seed, task as u64);
            let m = DRAWS_PER_TASK.min(n_draws - task * DRAWS_PER_TASK);
            let v = vec![1.0; k];
            let mut b = vec![0.0; k];
            (0..m)
                .map(|_| {
                    let mut s = 0.0;
                    for _ in 0..components {
                        for x in b.iter_mut() {
                            *x = rng.sample(StandardNormal);
                        }
                        s += snew_raw(&b, &v).0;
                    }
                    s
                })
                .collect::<Vec<_>>()
        })
        .collect();
    stats.sort_by(|a, b| a.total_cmp(b));
    let n = stats.len();
    let p_grid = table_grid(n);
    let quantiles = p_grid
        .iter()
        .map(|&p| {
            let idx = (((1.0 - p) * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
            stats[idx]
        })
        .collect();
    Ok(SnewNullTable { k, components, p_grid, quantiles })
}

impl SnewNullTable {
    pub fn new(k: usize, components: usize, p_grid: Vec<f64>, quantiles: Vec<f64>) -> Result<Self> {
        snew_mixture(components)?;
        if p_grid.len() != quantiles.len() || p_grid.is_empty() {
            return Err(Error::LengthMismatch { expected: p_grid.len(), found: quantiles.len() });
        }
        if p_grid.windows(2).any(|w| w[1] >= w[0]) || quantiles.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("null table grid is not monotone".into()));
        }
        Ok(SnewNullTable { k, components, p_grid, quantiles })
    }

    /// ln p by linear interpolation of ln p between grid quantiles. Past the
    /// last grid point the asymptotic tail is rescaled to agree with the table
    /// at that anchor.
    pub fn ln_p_value(&self, s: f64) -> Result<f64> {
        let q = &self.quantiles;
        let lp: Vec<f64> = self.p_grid.iter().map(|p| p.ln()).collect();
        if s <= q[0] {
            return Ok(lp[0]);
        }
        let last = q.len() - 1;
        if s > q[last] {
            let mix = snew_mixture(self.components)?;
            return Ok((ln_mixture_tail(s, &mix) - ln_mixture_tail(q[last], &mix) + lp[last]).min(lp[last]));
        }
        let j = q.partition_point(|&x| x <= s) - 1;
        if j == last {
            return Ok(lp[last]);
        }
        let (q0, q1) = (q[j], q[j + 1]);
        if q1 == q0 {
            return Ok(lp[j + 1]);
        }
        Ok(lp[j] + (s - q0) / (q1 - q0) * (lp[j + 1] - lp[j]))
    }

    pub fn p_value(&self, s: f64) -> Result<f64> {
        Ok(p_from_ln(self.ln_p_value(s)?))
    }
}
