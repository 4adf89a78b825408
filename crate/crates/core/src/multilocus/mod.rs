//! Multilocus tests built on per-component score vectors: Burden, SKAT, SKATO,
//! Hotelling's T² and Fisher's method, plus the random-effects likelihood
//! ratio test S_new (see [`snew`]).
//!
//! Every score test works from a [`ComponentScores`] pair (U, Σ) with
//! U ~ N(0, Σ) under the null. Combined statistics over several sex-stratified
//! components add the component statistics; the components are independent,
//! so the null law of a sum of quadratic forms uses the pooled spectrum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::codings::Component;
use crate::dist::{
    ln_chisq_tail, ln_mixture_tail, ln_weighted_chisq_tail, ln_weighted_chisq_tail_with, p_from_ln, TailMethod, ChiSquareMixture, EigenSpectrum,
};
use crate::glm::{irls_fit, irls_fit_from, GlmFit, LinkFamily, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::{inverse_spd, pinv_psd, solve_spd, sym_eigenvalues};
use crate::{Error, Result};

pub mod snew;

pub use snew::{
    estimate_random_effects, snew_combined, snew_statistic, tabulate_snew_null, EffectEstimates,
    RandomEffectsEstimate, SnewNullTable,
};

/// Default |z| screen for calling a variant's effect non-zero in [`estimate_rho`].
pub const RHO_Z_THRESHOLD: f64 = 1.645;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Burden,
    Skat,
    Skato,
    Hotelling,
    Fisher,
    SNew,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Burden => "burden",
            Method::Skat => "skat",
            Method::Skato => "skato",
            Method::Hotelling => "hotelling",
            Method::Fisher => "fisher",
            Method::SNew => "snew",
        }
    }
}

/// Null law a statistic is referred to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NullLaw {
    ChiSquare { df: f64 },
    /// Σ λᵢ χ²₁, tail by characteristic-function inversion (moment matching in the far tail).
    WeightedChiSquare(EigenSpectrum),
    Mixture(ChiSquareMixture),
    /// Seeded Monte Carlo table for `components` components of `k` variants.
    EmpiricalTable { k: usize, components: usize },
}

impl NullLaw {
    /// Short text descriptor, e.g. `chisq(df=3)`.
    pub fn describe(&self) -> String {
        match self {
            NullLaw::ChiSquare { df } => format!("chisq(df={df})"),
            NullLaw::WeightedChiSquare(s) => format!("wchisq(k={})", s.lambdas().len()),
            NullLaw::Mixture(m) => {
                let parts: Vec<String> = m.components().iter().map(|(w, df)| format!("{w}*chisq{df}")).collect();
                format!("mixture({})", parts.join("+"))
            }
            NullLaw::EmpiricalTable { k, components } => format!("table(k={k},components={components})"),
        }
    }

    /// ln P(T > s). Empirical tables are not self-contained and return `None`.
    pub fn ln_tail(&self, s: f64) -> Option<Result<f64>> {
        match self {
            NullLaw::ChiSquare { df } => Some(Ok(if s <= 0.0 { 0.0 } else { ln_chisq_tail(s, *df, 0.0) })),
            NullLaw::WeightedChiSquare(spec) => Some(ln_weighted_chisq_tail(s, spec)),
            NullLaw::Mixture(m) => Some(Ok(ln_mixture_tail(s, m))),
            NullLaw::EmpiricalTable { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub null_law: NullLaw,
    /// Floored at `f64::MIN_POSITIVE`; see `ln_p_value` for the full range.
    pub p_value: f64,
    pub ln_p_value: f64,
    /// Set on single-component results.
    pub component: Option<Component>,
    /// SKATO mixing weight of a single-component result.
    pub rho: Option<f64>,
    /// How a weighted χ² tail was evaluated.
    pub tail_method: Option<TailMethod>,
    /// Per-component results of a combined statistic; empty otherwise.
    pub components: Vec<TestResult>,
}

impl TestResult {
    fn from_law(method: Method, statistic: f64, null_law: NullLaw, component: Option<Component>) -> Result<Self> {
        let (ln_p, tail_method) = match &null_law {
            NullLaw::WeightedChiSquare(spec) => {
                let (ln_p, m) = ln_weighted_chisq_tail_with(statistic, spec, TailMethod::Auto)?;
                (ln_p, Some(m))
            }
            law => (law.ln_tail(statistic).expect("self-contained law")?, None),
        };
        Ok(TestResult {
            method,
            statistic,
            null_law,
            p_value: p_from_ln(ln_p),
            ln_p_value: ln_p,
            component,
            rho: None,
            tail_method,
            components: Vec::new(),
        })
    }
}

/// Null-model quantities for one sex-stratified component: the coded genotype
/// matrix and the fitted null GLM of the same samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreInputs {
    /// n × k coded genotypes.
    pub genotypes: DMatrix<f64>,
    /// n × q null design (intercept and covariates).
    pub null_design: DMatrix<f64>,
    pub response: DVector<f64>,
    /// μ̃ under the null.
    pub fitted: DVector<f64>,
    /// Null coefficients over all `null_design` columns.
    pub null_coefficients: DVector<f64>,
    /// IRLS working weights at the null fit.
    pub weights: DVector<f64>,
    pub family: LinkFamily,
    /// Pearson estimate for the identity link, 1 otherwise.
    pub dispersion: f64,
    pub component: Option<Component>,
}

impl ScoreInputs {
    pub fn from_null_fit(genotypes: DMatrix<f64>, fit: &GlmFit, component: Option<Component>) -> Result<Self> {
        if genotypes.nrows() != fit.n() {
            return Err(Error::LengthMismatch { expected: fit.n(), found: genotypes.nrows() });
        }
        let dispersion = match fit.family {
            LinkFamily::Identity => fit.dispersion,
            _ => 1.0,
        };
        Ok(ScoreInputs {
            genotypes,
            null_design: fit.design.clone(),
            response: fit.response.clone(),
            fitted: fit.fitted.clone(),
            null_coefficients: fit.coefficients.clone(),
            weights: fit.working_weights.clone(),
            family: fit.family,
            dispersion,
            component,
        })
    }

    /// Fit the null model and package it with the genotypes.
    pub fn fit_null(
        genotypes: DMatrix<f64>,
        null_design: &DMatrix<f64>,
        response: &DVector<f64>,
        family: LinkFamily,
        component: Option<Component>,
    ) -> Result<Self> {
        let fit = irls_fit(null_design, response, family, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        ScoreInputs::from_null_fit(genotypes, &fit, component)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn k(&self) -> usize {
        self.genotypes.ncols()
    }

    /// y − μ̃.
    pub fn residuals(&self) -> DVector<f64> {
        &self.response - &self.fitted
    }

    /// G̃ = G − X₀(X₀′WX₀)⁻¹X₀′WG, so that X₀′WG̃ = 0.
    fn residualized(&self) -> Result<DMatrix<f64>> {
        let x0 = &self.null_design;
        let mut xtw = x0.transpose();
        for (i, mut col) in xtw.column_iter_mut().enumerate() {
            col *= self.weights[i];
        }
        let a = &xtw * x0;
        let b = &xtw * &self.genotypes;
        let keep = crate::linalg::independent_columns(x0);
        let c = if keep.len() == x0.ncols() {
            solve_spd(&a, &b, "X0'WX0")?
        } else {
            let (pinv, _) = pinv_psd(&a);
            pinv * b
        };
        Ok(&self.genotypes - x0 * c)
    }

    /// U = G′(y − μ̃)/√φ̃ and Σ = G̃′WG̃.
    pub fn scores(&self) -> Result<ComponentScores> {
        let gt = self.residualized()?;
        let r = self.residuals();
        let u = self.genotypes.transpose() * &r / self.dispersion.sqrt();
        let mut wg = gt.clone();
        for (i, mut row) in wg.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        let sigma = gt.transpose() * wg;
        ComponentScores::new(u, sigma, self.component)
    }

    /// Per-variant effects β̂ᵢ and variances V̂ᵢ from the models
    /// y ~ X₀ + gᵢ. The identity link has a closed form with
    /// V̂ᵢ = RSSᵢ/(n − q − 1) / ‖g̃ᵢ‖²; other links refit by IRLS with φ = 1.
    pub fn effects(&self) -> Result<EffectEstimates> {
        let k = self.k();
        let mut betas = Vec::with_capacity(k);
        let mut vars = Vec::with_capacity(k);
        if self.family == LinkFamily::Identity {
            let gt = self.residualized()?;
            let r = self.residuals();
            let rss0 = r.norm_squared();
            let q = crate::linalg::independent_columns(&self.null_design).len();
            let df = self.n() as f64 - q as f64 - 1.0;
            if df <= 0.0 {
                return Err(Error::InvalidInput("too few samples for per-variant fits".into()));
            }
            for j in 0..k {
                let g = gt.column(j);
                let ss = g.norm_squared();
                let ssg = self.genotypes.column(j).norm_squared();
                if !(ss > crate::linalg::RANK_TOL * ssg) {
                    return Err(Error::ZeroVariance);
                }
                let gr = g.dot(&r);
                let beta = gr / ss;
                let rss = (rss0 - gr * gr / ss).max(0.0);
                let v = rss / df / ss;
                if !(v > 0.0) {
                    return Err(Error::NonpositiveSe(format!("variant {j}")));
                }
                betas.push(beta);
                vars.push(v);
            }
        } else {
            let q = self.null_design.ncols();
            let mut x = DMatrix::zeros(self.n(), q + 1);
            x.columns_mut(0, q).copy_from(&self.null_design);
            let mut start = DVector::zeros(q + 1);
            start.rows_mut(0, q).copy_from(&self.null_coefficients);
            for j in 0..k {
                x.column_mut(q).copy_from(&self.genotypes.column(j));
                let fit = irls_fit_from(&x, &self.response, self.family, &start, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
                let pos = fit.retained.iter().position(|&c| c == q).ok_or(Error::ZeroVariance)?;
                let cov = inverse_spd(&fit.information, "per-variant information")?;
                betas.push(fit.coefficients[q]);
                vars.push(cov[(pos, pos)]);
            }
        }
        EffectEstimates::new(betas, vars, self.component)
    }
}

/// Score vector and its null covariance for one component, U ~ N(0, Σ).
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentScores {
    pub u: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub component: Option<Component>,
}

impl ComponentScores {
    pub fn new(u: DVector<f64>, sigma: DMatrix<f64>, component: Option<Component>) -> Result<Self> {
        let k = u.len();
        if sigma.nrows() != k || sigma.ncols() != k {
            return Err(Error::LengthMismatch { expected: k, found: sigma.nrows() });
        }
        Ok(ComponentScores { u, sigma, component })
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    /// Single-variant z-scores Uᵢ/√Σᵢᵢ; 0 where Σᵢᵢ = 0.
    pub fn z_scores(&self) -> Vec<f64> {
        (0..self.k())
            .map(|i| {
                let s = self.sigma[(i, i)];
                if s > 0.0 {
                    self.u[i] / s.sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// ρ from the signs and sizes of the single-variant scores.
    pub fn estimate_rho(&self, threshold: f64) -> f64 {
        let z = self.z_scores();
        estimate_rho_with(&z, &z, threshold)
    }
}

/// ρ = ratio₁²(2·ratio₂ − 1)², with ratio₁ the fraction of variants whose
/// |z| exceeds [`RHO_Z_THRESHOLD`] and ratio₂ the fraction of those with a
/// positive β̂.
pub fn estimate_rho(betas: &[f64], z_scores: &[f64]) -> Result<f64> {
    if betas.len() != z_scores.len() {
        return Err(Error::LengthMismatch { expected: betas.len(), found: z_scores.len() });
    }
    Ok(estimate_rho_with(betas, z_scores, RHO_Z_THRESHOLD))
}

fn estimate_rho_with(betas: &[f64], z: &[f64], threshold: f64) -> f64 {
    let k = betas.len();
    if k == 0 {
        return 0.0;
    }
    let nonzero: Vec<usize> = (0..k).filter(|&i| z[i].abs() > threshold).collect();
    if nonzero.is_empty() {
        return 0.0;
    }
    let r1 = nonzero.len() as f64 / k as f64;
    let r2 = nonzero.iter().filter(|&&i| betas[i] > 0.0).count() as f64 / nonzero.len() as f64;
    (r1 * r1 * (2.0 * r2 - 1.0).powi(2)).clamp(0.0, 1.0)
}

/// Q_ρ and the eigenvalues of R_ρ^{1/2} DΣD R_ρ^{1/2} for one component,
/// with D = diag(weights) and R_ρ = (1 − ρ)I + ρ11′.
fn skato_component(cs: &ComponentScores, rho: f64, weights: Option<&DVector<f64>>) -> Result<(f64, EigenSpectrum)> {
    let k = cs.k();
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho {rho} outside [0, 1]")));
    }
    let d = match weights {
        Some(w) if w.len() != k => return Err(Error::LengthMismatch { expected: k, found: w.len() }),
        Some(w) => w.clone(),
        None => DVector::from_element(k, 1.0),
    };
    let du = d.component_mul(&cs.u);
    let q_s = du.norm_squared();
    let q_b = du.sum().powi(2);
    let q = rho * q_b + (1.0 - rho) * q_s;
    let a = DMatrix::from_fn(k, k, |i, j| d[i] * cs.sigma[(i, j)] * d[j]);
    let s = (1.0 - rho).sqrt();
    let b = ((1.0 - rho + k as f64 * rho).sqrt() - s) / k as f64;
    let m = if b == 0.0 {
        a * (s * s)
    } else {
        let r = DMatrix::from_fn(k, k, |i, j| if i == j { s + b } else { b });
        &r * a * &r
    };
    Ok((q, EigenSpectrum::new(sym_eigenvalues(&m))?))
}

fn check_weights(parts: &[ComponentScores], weights: Option<&[DVector<f64>]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != parts.len() {
            return Err(Error::LengthMismatch { expected: parts.len(), found: w.len() });
        }
    }
    Ok(())
}

fn skato_method(method: Method, parts: &[ComponentScores], rhos: &[f64], weights: Option<&[DVector<f64>]>) -> Result<TestResult> {
    if parts.is_empty() {
        return Err(Error::TooFewVariants(0));
    }
    if rhos.len() != parts.len() {
        return Err(Error::LengthMismatch { expected: parts.len(), found: rhos.len() });
    }
    check_weights(parts, weights)?;
    let mut subs = Vec::with_capacity(parts.len());
    let mut spectra = Vec::with_capacity(parts.len());
    let mut total = 0.0;
    for (c, cs) in parts.iter().enumerate() {
        let (q, spec) = skato_component(cs, rhos[c], weights.map(|w| &w[c]))?;
        total += q;
        let mut r = TestResult::from_law(method, q, NullLaw::WeightedChiSquare(spec.clone()), cs.component)?;
        r.rho = Some(rhos[c]);
        subs.push(r);
        spectra.push(spec);
    }
    if parts.len() == 1 {
        return Ok(subs.pop().unwrap());
    }
    let pooled = EigenSpectrum::pooled(spectra.iter())?;
    let mut out = TestResult::from_law(method, total, NullLaw::WeightedChiSquare(pooled), None)?;
    out.components = subs;
    Ok(out)
}

/// Burden test Q_B = (Σ wᵢUᵢ)² per component, summed over components.
/// `weights[c]` holds the per-variant weights of component `c` (unit if `None`).
pub fn burden(parts: &[ComponentScores], weights: Option<&[DVector<f64>]>) -> Result<TestResult> {
    skato_method(Method::Burden, parts, &vec![1.0; parts.len()], weights)
}

/// SKAT Q_S = Σ (wᵢUᵢ)², i.e. the kernel W = diag(wᵢ²).
pub fn skat(parts: &[ComponentScores], weights: Option<&[DVector<f64>]>) -> Result<TestResult> {
    skato_method(Method::Skat, parts, &vec![0.0; parts.len()], weights)
}

/// SKATO at fixed ρ per component: Q_ρ = ρQ_B + (1 − ρ)Q_S.
pub fn skato(parts: &[ComponentScores], rhos: &[f64], weights: Option<&[DVector<f64>]>) -> Result<TestResult> {
    skato_method(Method::Skato, parts, rhos, weights)
}

/// Combined SKATO with unit weights and a ρ per component; `None` estimates
/// each ρ from the component's own scores.
pub fn skato_combined(parts: &[ComponentScores], rho_per_component: Option<&[f64]>) -> Result<TestResult> {
    let rhos: Vec<f64> = match rho_per_component {
        Some(r) => r.to_vec(),
        None => parts.iter().map(|p| p.estimate_rho(RHO_Z_THRESHOLD)).collect(),
    };
    skato(parts, &rhos, None)
}

/// ρ-grid used by the optional minimum-p SKATO.
pub const RHO_GRID: [f64; 11] = [0.0, 0.01, 0.04, 0.09, 0.16, 0.25, 0.36, 0.49, 0.64, 0.81, 1.0];

/// Smallest SKATO p-value over [`RHO_GRID`] (same ρ in every component).
/// The minimum is not itself a p-value; this mode is for exploration only.
pub fn skato_grid_min(parts: &[ComponentScores]) -> Result<TestResult> {
    let mut best: Option<TestResult> = None;
    for &rho in &RHO_GRID {
        let r = skato(parts, &vec![rho; parts.len()], None)?;
        if best.as_ref().is_none_or(|b| r.ln_p_value < b.ln_p_value) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

/// Hotelling's T² = U′Σ⁺U per component with df = rank Σ; combined statistics
/// add both.
pub fn hotelling(parts: &[ComponentScores]) -> Result<TestResult> {
    if parts.is_empty() {
        return Err(Error::TooFewVariants(0));
    }
    let mut subs = Vec::with_capacity(parts.len());
    let (mut total, mut df) = (0.0, 0usize);
    for cs in parts {
        let (pinv, rank) = pinv_psd(&cs.sigma);
        if rank == 0 {
            return Err(Error::Singular("score covariance"));
        }
        let t = (cs.u.transpose() * &pinv * &cs.u)[(0, 0)].max(0.0);
        total += t;
        df += rank;
        subs.push(TestResult::from_law(Method::Hotelling, t, NullLaw::ChiSquare { df: rank as f64 }, cs.component)?);
    }
    if parts.len() == 1 {
        return Ok(subs.pop().unwrap());
    }
    let mut out = TestResult::from_law(Method::Hotelling, total, NullLaw::ChiSquare { df: df as f64 }, None)?;
    out.components = subs;
    Ok(out)
}

/// Fisher's method −2 Σ ln pᵢ against χ²(2k).
pub fn fisher_method(p_values: &[f64]) -> Result<TestResult> {
    if p_values.contains(&0.0) {
        return Err(Error::ZeroPValue);
    }
    if let Some(&bad) = p_values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidInput(format!("p-value {bad} outside (0, 1]")));
    }
    let ln: Vec<f64> = p_values.iter().map(|p| p.ln()).collect();
    fisher_method_ln(&ln)
}

/// Fisher's method from log p-values, for inputs below the f64 range.
pub fn fisher_method_ln(ln_p_values: &[f64]) -> Result<TestResult> {
    if ln_p_values.is_empty() {
        return Err(Error::TooFewVariants(0));
    }
    if let Some(&bad) = ln_p_values.iter().find(|&&l| l.is_nan() || l > 0.0 || l == f64::NEG_INFINITY) {
        return Err(Error::InvalidInput(format!("log p-value {bad} outside (-inf, 0]")));
    }
    let stat = -2.0 * ln_p_values.iter().sum::<f64>();
    TestResult::from_law(Method::Fisher, stat, NullLaw::ChiSquare { df: 2.0 * ln_p_values.len() as f64 }, None)
}

/// Fisher's method over the single-variant score tests Uᵢ²/Σᵢᵢ ~ χ²(1) of
/// every variant in every component.
pub fn fisher_scores(parts: &[ComponentScores]) -> Result<TestResult> {
    let mut ln_ps = Vec::new();
    for cs in parts {
        for i in 0..cs.k() {
            let s = cs.sigma[(i, i)];
            if s > 0.0 {
                ln_ps.push(ln_chisq_tail(cs.u[i] * cs.u[i] / s, 1.0, 0.0).max(-f64::MAX));
            }
        }
    }
    fisher_method_ln(&ln_ps)
}

/// Beta(MAF; a, b) density weights.
pub fn beta_weights(maf: &[f64], a: f64, b: f64) -> DVector<f64> {
    use statrs::function::beta::ln_beta;
    let lb = ln_beta(a, b);
    DVector::from_iterator(
        maf.len(),
        maf.iter().map(|&m| ((a - 1.0) * m.ln() + (b - 1.0) * (1.0 - m).ln() - lb).exp()),
    )
}
