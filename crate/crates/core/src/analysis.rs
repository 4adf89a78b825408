//! Three-model analysis of one variant set: the additive model under XCI
//! coding, the additive model without XCI, and the transformed sex-stratified
//! full model, combined by CCT.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::codings::{code_raw, transform_variants, CodingScheme, Component, TransformOptions, TransformedCodings};
use crate::cohort::{CohortData, Sex};
use crate::combine::{cct_log, DEFAULT_WEIGHTS};
use crate::dist::p_from_ln;
use crate::glm::{irls_fit, LinkFamily, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::multilocus::{
    beta_weights, burden, fisher_scores, hotelling, skat, skato, snew_combined, ComponentScores, ScoreInputs,
    SnewNullTable, TestResult, RHO_Z_THRESHOLD,
};
use crate::{Error, Result};

/// Minimum samples per sex stratum.
pub const MIN_STRATUM: usize = 10;

/// Multilocus statistic used inside each of the three models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultilocusTest {
    SNew,
    Skato,
    Skat,
    Burden,
    Hotelling,
    Fisher,
}

impl MultilocusTest {
    pub fn label(self) -> &'static str {
        match self {
            MultilocusTest::SNew => "snew",
            MultilocusTest::Skato => "skato",
            MultilocusTest::Skat => "skat",
            MultilocusTest::Burden => "burden",
            MultilocusTest::Hotelling => "hotelling",
            MultilocusTest::Fisher => "fisher",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "snew" | "s_new" => MultilocusTest::SNew,
            "skato" => MultilocusTest::Skato,
            "skat" => MultilocusTest::Skat,
            "burden" => MultilocusTest::Burden,
            "hotelling" => MultilocusTest::Hotelling,
            "fisher" => MultilocusTest::Fisher,
            other => return Err(Error::InvalidInput(format!("unknown test '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub test: MultilocusTest,
    pub family: LinkFamily,
    /// Drop the female dominant component.
    pub two_df: bool,
    /// CCT weights for (p_xci, p_noxci, p_full).
    pub cct_weights: [f64; 3],
    /// |z| screen for ρ estimation.
    pub rho_threshold: f64,
    /// Beta(MAF; a, b) weights for the untransformed SKATO-family models.
    pub raw_weight_shape: (f64, f64),
    pub snew_tables: Vec<SnewNullTable>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            test: MultilocusTest::SNew,
            family: LinkFamily::Identity,
            two_df: false,
            cct_weights: DEFAULT_WEIGHTS,
            rho_threshold: RHO_Z_THRESHOLD,
            raw_weight_shape: (1.0, 25.0),
            snew_tables: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    /// S_new with all three components, for common variants.
    pub fn common() -> Self {
        AnalysisConfig::default()
    }

    /// SKATO in 2-df mode, for rare variants.
    pub fn rare() -> Self {
        AnalysisConfig { test: MultilocusTest::Skato, two_df: true, ..AnalysisConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThreeModelResult {
    pub xci: TestResult,
    pub noxci: TestResult,
    pub full: TestResult,
    pub ln_p_cct: f64,
    pub p_cct: f64,
    pub n_female: usize,
    pub n_male: usize,
    /// Variants entering the pooled models (polymorphic in the analysed samples).
    pub k: usize,
    /// Variants whose female dominant coding was dropped.
    pub dropped_dominant: usize,
    /// The full model ran without a female dominant component.
    pub two_df: bool,
}

impl ThreeModelResult {
    pub fn p_xci(&self) -> f64 {
        self.xci.p_value
    }

    pub fn p_noxci(&self) -> f64 {
        self.noxci.p_value
    }

    pub fn p_full(&self) -> f64 {
        self.full.p_value
    }
}

/// Pooled null design [1, S, covariates] over `samples` (S = 1 for males).
fn pooled_design(cohort: &CohortData, samples: &[usize]) -> DMatrix<f64> {
    let cov = cohort.covariates();
    let q = cov.map_or(0, |c| c.ncols());
    DMatrix::from_fn(samples.len(), 2 + q, |r, j| match j {
        0 => 1.0,
        1 => f64::from(cohort.sexes()[samples[r]] == Sex::Male),
        _ => cov.unwrap()[(samples[r], j - 2)],
    })
}

/// Stratum null design [1, covariates].
fn stratum_design(cohort: &CohortData, samples: &[usize]) -> DMatrix<f64> {
    let cov = cohort.covariates();
    let q = cov.map_or(0, |c| c.ncols());
    DMatrix::from_fn(samples.len(), 1 + q, |r, j| if j == 0 { 1.0 } else { cov.unwrap()[(samples[r], j - 1)] })
}

fn response(cohort: &CohortData, samples: &[usize]) -> DVector<f64> {
    DVector::from_iterator(samples.len(), samples.iter().map(|&i| cohort.phenotype()[i]))
}

/// Run the configured test on one or more score components.
pub fn run_test(inputs: &[ScoreInputs], cfg: &AnalysisConfig, weights: Option<&[DVector<f64>]>) -> Result<TestResult> {
    if cfg.test == MultilocusTest::SNew {
        let est = inputs.iter().map(|i| i.effects()).collect::<Result<Vec<_>>>()?;
        return snew_combined(&est, Some(&cfg.snew_tables));
    }
    let parts = inputs.iter().map(|i| i.scores()).collect::<Result<Vec<ComponentScores>>>()?;
    match cfg.test {
        MultilocusTest::Skato => {
            let rhos: Vec<f64> = parts.iter().map(|p| p.estimate_rho(cfg.rho_threshold)).collect();
            skato(&parts, &rhos, weights)
        }
        MultilocusTest::Skat => skat(&parts, weights),
        MultilocusTest::Burden => burden(&parts, weights),
        MultilocusTest::Hotelling => hotelling(&parts),
        MultilocusTest::Fisher => fisher_scores(&parts),
        MultilocusTest::SNew => unreachable!(),
    }
}

/// Raw-coded pooled model inputs over `samples`, one coding scheme per
/// variant. Variants constant over the samples are left out. Also returns the
/// pooled minor allele frequency of each retained variant.
pub fn pooled_inputs(
    cohort: &CohortData,
    variants: &[usize],
    samples: &[usize],
    schemes: &[CodingScheme],
    family: LinkFamily,
) -> Result<(ScoreInputs, Vec<f64>)> {
    if schemes.len() != variants.len() {
        return Err(Error::LengthMismatch { expected: variants.len(), found: schemes.len() });
    }
    let sexes: Vec<Sex> = samples.iter().map(|&i| cohort.sexes()[i]).collect();
    let chromosomes: f64 = sexes.iter().map(|&s| if s == Sex::Female { 2.0 } else { 1.0 }).sum();
    let mut cols = Vec::with_capacity(variants.len());
    let mut maf = Vec::with_capacity(variants.len());
    for (&j, &scheme) in variants.iter().zip(schemes) {
        let classes: Vec<_> = samples.iter().map(|&i| cohort.variant(j)[i]).collect();
        let coded = code_raw(&classes, &sexes, scheme)?;
        let first = coded[0];
        if coded.iter().all(|&x| x == first) {
            continue;
        }
        let alleles: f64 = classes.iter().map(|c| f64::from(c.allele_count().unwrap_or(0))).sum();
        let f = alleles / chromosomes;
        maf.push(f.min(1.0 - f));
        cols.push(coded);
    }
    let g = DMatrix::from_fn(samples.len(), cols.len(), |r, c| cols[c][r]);
    let fit = irls_fit(&pooled_design(cohort, samples), &response(cohort, samples), family, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok((ScoreInputs::from_null_fit(g, &fit, None)?, maf))
}

/// The configured test on a raw-coded pooled model. SKATO, SKAT and Burden
/// use Beta(MAF; a, b) weights.
pub fn pooled_test(
    cohort: &CohortData,
    variants: &[usize],
    samples: &[usize],
    schemes: &[CodingScheme],
    cfg: &AnalysisConfig,
) -> Result<(TestResult, usize)> {
    let (inputs, maf) = pooled_inputs(cohort, variants, samples, schemes, cfg.family)?;
    let k = inputs.k();
    let w = [beta_weights(&maf, cfg.raw_weight_shape.0, cfg.raw_weight_shape.1)];
    let weighted = matches!(cfg.test, MultilocusTest::Skato | MultilocusTest::Skat | MultilocusTest::Burden);
    Ok((run_test(&[inputs], cfg, if weighted { Some(&w) } else { None })?, k))
}

/// Score inputs of the transformed full model, one per non-empty component,
/// in the order female additive, female dominant, male additive.
pub fn full_model_inputs(cohort: &CohortData, codings: &TransformedCodings, family: LinkFamily) -> Result<Vec<ScoreInputs>> {
    let mut inputs = Vec::with_capacity(3);
    for sex in [Sex::Female, Sex::Male] {
        let samples = codings.samples(sex);
        let fit = irls_fit(&stratum_design(cohort, samples), &response(cohort, samples), family, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        for c in Component::ALL.into_iter().filter(|c| c.sex() == sex) {
            let g = codings.matrix(c);
            if g.ncols() > 0 {
                inputs.push(ScoreInputs::from_null_fit(g.clone(), &fit, Some(c))?);
            }
        }
    }
    if inputs.is_empty() {
        return Err(Error::TooFewVariants(0));
    }
    Ok(inputs)
}

/// The configured test on the transformed full model.
pub fn full_model(cohort: &CohortData, codings: &TransformedCodings, cfg: &AnalysisConfig) -> Result<TestResult> {
    run_test(&full_model_inputs(cohort, codings, cfg.family)?, cfg, None)
}

/// Stratify and transform `variants`, rejecting strata below [`MIN_STRATUM`].
pub fn transform_window(cohort: &CohortData, variants: &[usize], two_df: bool) -> Result<TransformedCodings> {
    let opts = TransformOptions { two_df, ..TransformOptions::default() };
    let codings = transform_variants(cohort, variants, &opts)?;
    let (nf, nm) = (codings.female_samples.len(), codings.male_samples.len());
    if nf.min(nm) < MIN_STRATUM {
        return Err(Error::WindowTooSmall {
            window: variants.len(),
            reason: format!("{nf} female / {nm} male samples, need {MIN_STRATUM} per sex"),
        });
    }
    Ok(codings)
}

/// Sorted union of the analysed female and male samples.
pub fn analysed_samples(codings: &TransformedCodings) -> Vec<usize> {
    let mut samples: Vec<usize> = codings.female_samples.iter().chain(&codings.male_samples).cloned().collect();
    samples.sort_unstable();
    samples
}

/// CCT of three results, in log space.
pub fn combine_three(xci: &TestResult, noxci: &TestResult, full: &TestResult, weights: &[f64; 3]) -> Result<f64> {
    let ln_ps = [xci.ln_p_value, noxci.ln_p_value, full.ln_p_value].map(|l| l.max(-f64::MAX));
    cct_log(&ln_ps, weights)
}

/// Evaluate the three models and their CCT on the listed variants, using the
/// samples observed at all of them.
pub fn analyze_variant_set(cohort: &CohortData, variants: &[usize], cfg: &AnalysisConfig) -> Result<ThreeModelResult> {
    let codings = transform_window(cohort, variants, cfg.two_df)?;
    let samples = analysed_samples(&codings);
    let xci_schemes = vec![CodingScheme::AdditiveXci; variants.len()];
    let noxci_schemes = vec![CodingScheme::AdditiveNoXci; variants.len()];
    let (xci, k) = pooled_test(cohort, variants, &samples, &xci_schemes, cfg)?;
    let (noxci, _) = pooled_test(cohort, variants, &samples, &noxci_schemes, cfg)?;
    let full = full_model(cohort, &codings, cfg)?;
    let ln_p_cct = combine_three(&xci, &noxci, &full, &cfg.cct_weights)?;
    Ok(ThreeModelResult {
        xci,
        noxci,
        full,
        ln_p_cct,
        p_cct: p_from_ln(ln_p_cct),
        n_female: codings.female_samples.len(),
        n_male: codings.male_samples.len(),
        k,
        dropped_dominant: if cfg.two_df { 0 } else { codings.dropped_dominant.iter().filter(|&&d| d).count() },
        two_df: codings.g_d_dag.ncols() == 0,
    })
}
