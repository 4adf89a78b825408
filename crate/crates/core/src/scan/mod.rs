//! Moving-window scans over individual-level and summary-level data.

pub mod io;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_variant_set, AnalysisConfig, MIN_STRATUM};
use crate::codings::{code_raw, CodingScheme, Component};
use crate::cohort::{CohortData, Sex};
use crate::glm::{irls_fit, LinkFamily, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::multilocus::{beta_weights, skato, ComponentScores, ScoreInputs, TestResult, RHO_Z_THRESHOLD};
use crate::{Error, Result};

/// Start indices of windows of `window` consecutive variants, `step` apart.
pub fn window_starts(k: usize, window: usize, step: usize) -> Vec<usize> {
    if window == 0 || step == 0 || k < window {
        return Vec::new();
    }
    (0..=(k - window) / step).map(|i| i * step).collect()
}

/// Denominator of the Bonferroni threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Correction {
    /// Number of windows tested.
    #[default]
    Windows,
    /// Number of rare variants in the data.
    RareVariants,
}

/// A variant is rare when its MAF is below `maf_threshold`; a window is
/// eligible for a rare-variant scan when at least `min_fraction` of it is rare.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RareRule {
    pub maf_threshold: f64,
    pub min_fraction: f64,
}

impl Default for RareRule {
    fn default() -> Self {
        RareRule { maf_threshold: 0.03, min_fraction: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub window: usize,
    pub step: usize,
    /// Family-wise level before correction.
    pub alpha: f64,
    pub analysis: AnalysisConfig,
    pub correction: Correction,
    pub rare_rule: RareRule,
    /// Skip windows failing `rare_rule`.
    pub rare_only: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            window: 8,
            step: 1,
            alpha: 0.05,
            analysis: AnalysisConfig::default(),
            correction: Correction::Windows,
            rare_rule: RareRule::default(),
            rare_only: false,
        }
    }
}

impl ScanConfig {
    fn validate(&self, k: usize) -> Result<()> {
        if self.step == 0 || self.window == 0 {
            return Err(Error::InvalidInput("window and step must be at least 1".into()));
        }
        if self.window > k {
            return Err(Error::InvalidInput(format!("window {} exceeds the {k} available variants", self.window)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// One evaluated window. `p_cct` is the CCT of the three model p-values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window: usize,
    pub variant_ids: Vec<String>,
    pub n_female: usize,
    pub n_male: usize,
    pub k: usize,
    pub stat_xci: f64,
    pub law_xci: String,
    pub p_xci: f64,
    pub stat_noxci: f64,
    pub law_noxci: String,
    pub p_noxci: f64,
    pub stat_full: f64,
    pub law_full: String,
    pub p_full: f64,
    pub p_cct: f64,
    pub ln_p_cct: f64,
    pub dropped_dominant: usize,
    pub two_df: bool,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub window: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub windows: Vec<WindowResult>,
    pub skipped: Vec<SkippedWindow>,
    pub n_tests: usize,
    /// alpha / n_tests.
    pub threshold: f64,
}

/// Minor allele frequency over the non-missing samples.
pub fn pooled_maf(cohort: &CohortData, j: usize) -> f64 {
    let (mut alleles, mut chromosomes) = (0.0, 0.0);
    for (g, &s) in cohort.variant(j).iter().zip(cohort.sexes()) {
        if let Some(c) = g.allele_count() {
            alleles += f64::from(c);
            chromosomes += if s == Sex::Female { 2.0 } else { 1.0 };
        }
    }
    if chromosomes == 0.0 {
        return 0.0;
    }
    let f = alleles / chromosomes;
    f.min(1.0 - f)
}

/// Three models plus CCT on every window. Windows that cannot be analysed
/// are reported in `skipped`; significance uses the Bonferroni threshold.
pub fn moving_window_scan(cohort: &CohortData, cfg: &ScanConfig) -> Result<ScanReport> {
    let k = cohort.n_variants();
    cfg.validate(k)?;
    let rare: Vec<bool> = (0..k).map(|j| pooled_maf(cohort, j) < cfg.rare_rule.maf_threshold).collect();
    let starts = window_starts(k, cfg.window, cfg.step);
    let outcomes: Vec<std::result::Result<WindowResult, SkippedWindow>> = starts
        .par_iter()
        .enumerate()
        .map(|(w, &start)| {
            let variants: Vec<usize> = (start..start + cfg.window).collect();
            if cfg.rare_only {
                let frac = variants.iter().filter(|&&j| rare[j]).count() as f64 / cfg.window as f64;
                if frac < cfg.rare_rule.min_fraction {
                    return Err(SkippedWindow { window: w, reason: format!("rare fraction {frac:.3} below {}", cfg.rare_rule.min_fraction) });
                }
            }
            match analyze_variant_set(cohort, &variants, &cfg.analysis) {
                Ok(r) => Ok(WindowResult {
                    window: w,
                    variant_ids: variants.iter().map(|&j| cohort.variant_ids()[j].clone()).collect(),
                    n_female: r.n_female,
                    n_male: r.n_male,
                    k: r.k,
                    stat_xci: r.xci.statistic,
                    law_xci: r.xci.null_law.describe(),
                    p_xci: r.xci.p_value,
                    stat_noxci: r.noxci.statistic,
                    law_noxci: r.noxci.null_law.describe(),
                    p_noxci: r.noxci.p_value,
                    stat_full: r.full.statistic,
                    law_full: r.full.null_law.describe(),
                    p_full: r.full.p_value,
                    p_cct: r.p_cct,
                    ln_p_cct: r.ln_p_cct,
                    dropped_dominant: r.dropped_dominant,
                    two_df: r.two_df,
                    significant: false,
                }),
                Err(e) => Err(SkippedWindow { window: w, reason: e.to_string() }),
            }
        })
        .collect();
    let mut windows = Vec::new();
    let mut skipped = Vec::new();
    let mut ineligible = 0;
    for o in outcomes {
        match o {
            Ok(r) => windows.push(r),
            Err(s) => {
                if s.reason.starts_with("rare fraction") {
                    ineligible += 1;
                } else {
                    log::warn!("window {} skipped: {}", s.window, s.reason);
                }
                skipped.push(s);
            }
        }
    }
    let n_tests = match cfg.correction {
        Correction::Windows => starts.len() - ineligible,
        Correction::RareVariants => rare.iter().filter(|&&r| r).count(),
    }
    .max(1);
    let threshold = cfg.alpha / n_tests as f64;
    for w in &mut windows {
        w.significant = w.p_cct < threshold;
    }
    Ok(ScanReport { windows, skipped, n_tests, threshold })
}

/// Per-variant sex-stratified summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub maf_f: f64,
    pub maf_m: f64,
    pub beta_f: f64,
    pub se_f: f64,
    pub beta_m: f64,
    pub se_m: f64,
    pub n_f: usize,
    pub n_m: usize,
}

impl SummaryRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.se_f > 0.0 && self.se_m > 0.0) {
            return Err(Error::NonpositiveSe(self.id.clone()));
        }
        for maf in [self.maf_f, self.maf_m] {
            if !(maf > 0.0 && maf <= 0.5) {
                return Err(Error::Validation(format!("variant `{}`: MAF {maf} outside (0, 0.5]", self.id)));
            }
        }
        if !(self.beta_f.is_finite() && self.beta_m.is_finite()) {
            return Err(Error::Validation(format!("variant `{}`: non-finite effect", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SummaryStats {
    pub records: Vec<SummaryRecord>,
}

impl SummaryStats {
    pub fn new(records: Vec<SummaryRecord>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate variant `{}`", r.id)));
            }
        }
        Ok(SummaryStats { records })
    }

    pub fn get(&self, id: &str) -> Option<&SummaryRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Per-variant marginal regressions within each sex on [1, covariates, g]
/// with the raw allele count, over the samples observed at the variant.
pub fn summary_from_cohort(cohort: &CohortData, variants: &[usize]) -> Result<SummaryStats> {
    let mut records = Vec::with_capacity(variants.len());
    for &j in variants {
        let mut per_sex = Vec::with_capacity(2);
        for sex in [Sex::Female, Sex::Male] {
            let samples: Vec<usize> = (0..cohort.n_samples())
                .filter(|&i| cohort.sexes()[i] == sex && !cohort.variant(j)[i].is_missing())
                .collect();
            if samples.len() < MIN_STRATUM {
                return Err(Error::EmptyStratum(sex.label()));
            }
            let classes: Vec<_> = samples.iter().map(|&i| cohort.variant(j)[i]).collect();
            let sexes = vec![sex; samples.len()];
            let g = code_raw(&classes, &sexes, CodingScheme::AdditiveNoXci)?;
            let chromosomes = if sex == Sex::Female { 2.0 } else { 1.0 } * samples.len() as f64;
            let f = g.iter().sum::<f64>() / chromosomes;
            let q = cohort.covariates().map_or(0, |c| c.ncols());
            let x0 = DMatrix::from_fn(samples.len(), 1 + q, |r, c| {
                if c == 0 { 1.0 } else { cohort.covariates().unwrap()[(samples[r], c - 1)] }
            });
            let y = DVector::from_iterator(samples.len(), samples.iter().map(|&i| cohort.phenotype()[i]));
            let fit = irls_fit(&x0, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let gm = DMatrix::from_column_slice(samples.len(), 1, &g);
            let est = ScoreInputs::from_null_fit(gm, &fit, None)?.effects()?;
            per_sex.push((f.min(1.0 - f), est.betas()[0], est.variances()[0].sqrt(), samples.len()));
        }
        let (f, m) = (per_sex[0], per_sex[1]);
        records.push(SummaryRecord {
            id: cohort.variant_ids()[j].clone(),
            maf_f: f.0,
            beta_f: f.1,
            se_f: f.2,
            n_f: f.3,
            maf_m: m.0,
            beta_m: m.1,
            se_m: m.2,
            n_m: m.3,
        });
    }
    SummaryStats::new(records)
}

/// SKATO mixing weights for the summary-level test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SummaryRho {
    Fixed { female: f64, male: f64 },
    /// Per stratum from the |z| screen.
    Estimated,
}

/// Sex-stratified SKATO from summary statistics. Effects enter as z = β̂/SE,
/// assumed independent across variants, with Beta(MAF; 1, 25) weights per
/// stratum; the stratum statistics are summed and referred to the pooled
/// spectrum.
pub fn skato_from_summary(stats: &SummaryStats, window: &[String], rho: SummaryRho) -> Result<TestResult> {
    if window.len() < 2 {
        return Err(Error::TooFewVariants(window.len()));
    }
    let recs = window
        .iter()
        .map(|id| stats.get(id).ok_or_else(|| Error::MissingVariant(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let k = recs.len();
    let z_f = DVector::from_iterator(k, recs.iter().map(|r| r.beta_f / r.se_f));
    let z_m = DVector::from_iterator(k, recs.iter().map(|r| r.beta_m / r.se_m));
    let maf_f: Vec<f64> = recs.iter().map(|r| r.maf_f).collect();
    let maf_m: Vec<f64> = recs.iter().map(|r| r.maf_m).collect();
    let parts = [
        ComponentScores::new(z_f, DMatrix::identity(k, k), Some(Component::FemaleAdditive))?,
        ComponentScores::new(z_m, DMatrix::identity(k, k), Some(Component::MaleAdditive))?,
    ];
    let rhos = match rho {
        SummaryRho::Fixed { female, male } => [female, male],
        SummaryRho::Estimated => [parts[0].estimate_rho(RHO_Z_THRESHOLD), parts[1].estimate_rho(RHO_Z_THRESHOLD)],
    };
    let weights = [beta_weights(&maf_f, 1.0, 25.0), beta_weights(&maf_m, 1.0, 25.0)];
    skato(&parts, &rhos, Some(&weights))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryWindowResult {
    pub window: usize,
    pub variant_ids: Vec<String>,
    pub statistic: f64,
    pub p_value: f64,
    pub rho_f: f64,
    pub rho_m: f64,
    pub significant: bool,
}

/// [`skato_from_summary`] on moving windows over the records in file order.
/// Bonferroni over the window count.
pub fn summary_window_scan(stats: &SummaryStats, window: usize, step: usize, alpha: f64, rho: SummaryRho) -> Result<Vec<SummaryWindowResult>> {
    let k = stats.records.len();
    if window < 2 || step == 0 || window > k {
        return Err(Error::InvalidInput(format!("window {window} / step {step} invalid for {k} variants")));
    }
    let starts = window_starts(k, window, step);
    let threshold = alpha / starts.len() as f64;
    starts
        .par_iter()
        .enumerate()
        .map(|(w, &s)| {
            let ids: Vec<String> = stats.records[s..s + window].iter().map(|r| r.id.clone()).collect();
            let r = skato_from_summary(stats, &ids, rho)?;
            let rho_of = |i: usize| r.components.get(i).and_then(|c| c.rho).unwrap_or(f64::NAN);
            Ok(SummaryWindowResult {
                window: w,
                variant_ids: ids,
                statistic: r.statistic,
                p_value: r.p_value,
                rho_f: rho_of(0),
                rho_m: rho_of(1),
                significant: r.p_value < threshold,
            })
        })
        .collect()
}
