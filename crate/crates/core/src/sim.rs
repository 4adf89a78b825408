//! Generative models and power-experiment drivers.
//!
//! Three trait families are supported: the additive misspecification model
//! y = 0.5·S + G_A β + ε, the transformed-coding model on the standardized
//! stratum codings, and the rare-variant model with MAF-linked effect sizes.
//! Replicate `r` always draws from stream `r` of the master seed, so grid
//! points share random numbers and results do not depend on scheduling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    analysed_samples, combine_three, full_model, pooled_test, transform_window, AnalysisConfig,
};
use crate::codings::{transform_pipeline, CodingScheme, Component};
use crate::cohort::{CohortData, GenotypeClass, Sex};
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MafLaw {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
}

impl MafLaw {
    /// U(0, 0.5).
    pub const COMMON: MafLaw = MafLaw::Uniform { lo: 0.0, hi: 0.5 };
    /// U(0.1, 0.5).
    pub const MODERATE: MafLaw = MafLaw::Uniform { lo: 0.1, hi: 0.5 };
    /// Beta(1, 40).
    pub const RARE: MafLaw = MafLaw::Beta { a: 1.0, b: 40.0 };

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MafLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MafLaw::Beta { a, b } => Beta::new(a, b).expect("valid beta shape").sample(rng),
        }
    }
}

/// Effect directions across variants. `Concordant` and `Discordant` are
/// relative to the male signs and only apply to females.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignPattern {
    AllPositive,
    AllNegative,
    /// A random half positive, redrawn per replicate.
    HalfHalf,
    Concordant,
    Discordant,
    /// Independent fair signs.
    Random,
}

impl SignPattern {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "allpositive" | "positive" => SignPattern::AllPositive,
            "allnegative" | "negative" => SignPattern::AllNegative,
            "halfhalf" | "half" => SignPattern::HalfHalf,
            "concordant" => SignPattern::Concordant,
            "discordant" => SignPattern::Discordant,
            "random" => SignPattern::Random,
            _ => return Err(Error::UnknownPattern(s.to_string())),
        })
    }

    fn signs<R: Rng + ?Sized>(self, k: usize, reference: Option<&[f64]>, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            SignPattern::AllPositive => vec![1.0; k],
            SignPattern::AllNegative => vec![-1.0; k],
            SignPattern::HalfHalf => {
                let mut s: Vec<f64> = (0..k).map(|i| if i < k / 2 { 1.0 } else { -1.0 }).collect();
                s.shuffle(rng);
                s
            }
            SignPattern::Random => (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
            SignPattern::Concordant | SignPattern::Discordant => {
                let r = reference.ok_or_else(|| Error::UnknownPattern(format!("{self:?} needs reference signs")))?;
                let f = if self == SignPattern::Concordant { 1.0 } else { -1.0 };
                r.iter().map(|x| f * x).collect()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EffectModel {
    /// y = 0.5·S + G_A β + ε with βᵢ ~ N(mu, tau²) per replicate and G_A the
    /// raw additive coding chosen by each variant's XCI flag.
    Additive { mu: f64, tau: f64 },
    /// y_f = G_f†β_f + G_d†β_d + ε and y_m = G_m†β_m + ε with
    /// β_c,i ~ N(mu[c], tau[c]²), components ordered (f, d, m).
    Transformed { mu: [f64; 3], tau: [f64; 3] },
    /// y_f = G_f β_f + ε, y_m = G_m β_m + ε on raw codings with
    /// |β_f,i| = c_f |log₁₀ MAF_f,i| and |β_m,i| = c_m |log₁₀ MAF_m,i|.
    Rare { c_f: f64, c_m: f64, female: SignPattern, male: SignPattern },
}

/// Effect parameter varied along a power curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridParam {
    Mu,
    Tau,
    MuF,
    MuD,
    MuM,
    TauF,
    TauD,
    TauM,
    CF,
    CM,
}

impl GridParam {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "").as_str() {
            "mu" => GridParam::Mu,
            "tau" => GridParam::Tau,
            "muf" => GridParam::MuF,
            "mud" => GridParam::MuD,
            "mum" => GridParam::MuM,
            "tauf" => GridParam::TauF,
            "taud" => GridParam::TauD,
            "taum" => GridParam::TauM,
            "cf" => GridParam::CF,
            "cm" => GridParam::CM,
            other => return Err(Error::InvalidInput(format!("unknown grid parameter '{other}'"))),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            GridParam::Mu => "mu",
            GridParam::Tau => "tau",
            GridParam::MuF => "mu_f",
            GridParam::MuD => "mu_d",
            GridParam::MuM => "mu_m",
            GridParam::TauF => "tau_f",
            GridParam::TauD => "tau_d",
            GridParam::TauM => "tau_m",
            GridParam::CF => "c_f",
            GridParam::CM => "c_m",
        }
    }
}

impl EffectModel {
    /// The model with one parameter replaced.
    pub fn with(&self, param: GridParam, v: f64) -> Result<EffectModel> {
        use GridParam::*;
        let mut m = *self;
        match (&mut m, param) {
            (EffectModel::Additive { mu, .. }, Mu) => *mu = v,
            (EffectModel::Additive { tau, .. }, Tau) => *tau = v,
            (EffectModel::Transformed { mu, .. }, MuF | MuD | MuM) => mu[param as usize - MuF as usize] = v,
            (EffectModel::Transformed { tau, .. }, TauF | TauD | TauM) => tau[param as usize - TauF as usize] = v,
            (EffectModel::Rare { c_f, .. }, CF) => *c_f = v,
            (EffectModel::Rare { c_m, .. }, CM) => *c_m = v,
            _ => return Err(Error::InvalidInput(format!("{} does not apply to {self:?}", param.label()))),
        }
        Ok(m)
    }

    pub fn null(&self) -> EffectModel {
        match *self {
            EffectModel::Additive { .. } => EffectModel::Additive { mu: 0.0, tau: 0.0 },
            EffectModel::Transformed { .. } => EffectModel::Transformed { mu: [0.0; 3], tau: [0.0; 3] },
            EffectModel::Rare { female, male, .. } => EffectModel::Rare { c_f: 0.0, c_m: 0.0, female, male },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_f: usize,
    pub n_m: usize,
    pub k: usize,
    pub maf_law: MafLaw,
    /// Per-variant XCI status used by the generator's raw codings and by the
    /// correctly coded 1-df test.
    pub xci_flags: Vec<bool>,
    pub effect: EffectModel,
    pub error_sd: f64,
    pub seed: u64,
    pub reps: usize,
    pub alpha: f64,
    pub grid_param: Option<GridParam>,
    pub grid: Vec<f64>,
    pub analysis: AnalysisConfig,
}

impl SimConfig {
    /// 1000 + 1000 samples, k variants all under XCI, additive null model.
    pub fn new(k: usize, seed: u64) -> Self {
        SimConfig {
            n_f: 1000,
            n_m: 1000,
            k,
            maf_law: MafLaw::MODERATE,
            xci_flags: vec![true; k],
            effect: EffectModel::Additive { mu: 0.0, tau: 0.0 },
            error_sd: 1.0,
            seed,
            reps: 1000,
            alpha: 5e-4,
            grid_param: None,
            grid: Vec::new(),
            analysis: AnalysisConfig::default(),
        }
    }

    /// Mark a seeded random half of the variants as XCI, fixed for the
    /// experiment.
    pub fn with_random_half_xci(mut self) -> Self {
        let mut idx: Vec<usize> = (0..self.k).collect();
        idx.shuffle(&mut stream(self.seed, u64::MAX));
        self.xci_flags = vec![false; self.k];
        for &i in &idx[..self.k / 2] {
            self.xci_flags[i] = true;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_f == 0 || self.n_m == 0 || self.k == 0 || self.reps == 0 {
            return Err(Error::Validation("sample, variant and replicate counts must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Validation(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.xci_flags.len() != self.k {
            return Err(Error::LengthMismatch { expected: self.k, found: self.xci_flags.len() });
        }
        if !(self.error_sd >= 0.0) {
            return Err(Error::Validation("error_sd must be nonnegative".into()));
        }
        Ok(())
    }

    fn points(&self) -> Result<Vec<(f64, EffectModel)>> {
        match self.grid_param {
            None => Ok(vec![(f64::NAN, self.effect)]),
            Some(p) => self.grid.iter().map(|&v| Ok((v, self.effect.with(p, v)?))).collect(),
        }
    }
}

/// Genotypes of one replicate: females first, then males.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedGenotypes {
    pub maf_female: Vec<f64>,
    pub maf_male: Vec<f64>,
    pub sexes: Vec<Sex>,
    /// Variant-major classes.
    pub classes: Vec<Vec<GenotypeClass>>,
}

/// HWE female genotypes and Bernoulli male genotypes from sex-specific MAFs
/// drawn from the configured law.
pub fn gen_genotypes<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> SimulatedGenotypes {
    let n = config.n_f + config.n_m;
    let sexes: Vec<Sex> = (0..n).map(|i| if i < config.n_f { Sex::Female } else { Sex::Male }).collect();
    let mut maf_female = Vec::with_capacity(config.k);
    let mut maf_male = Vec::with_capacity(config.k);
    let mut classes = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        let ff = config.maf_law.sample(rng);
        let fm = config.maf_law.sample(rng);
        maf_female.push(ff);
        maf_male.push(fm);
        let col = sexes
            .iter()
            .map(|&s| match s {
                Sex::Female => match u8::from(rng.random::<f64>() < ff) + u8::from(rng.random::<f64>() < ff) {
                    0 => GenotypeClass::HomRef,
                    1 => GenotypeClass::Het,
                    _ => GenotypeClass::HomAlt,
                },
                Sex::Male => {
                    if rng.random::<f64>() < fm {
                        GenotypeClass::HemiAlt
                    } else {
                        GenotypeClass::HemiRef
                    }
                }
            })
            .collect();
        classes.push(col);
    }
    SimulatedGenotypes { maf_female, maf_male, sexes, classes }
}

fn raw_code(g: GenotypeClass, xci: bool) -> f64 {
    let scheme = if xci { CodingScheme::AdditiveXci } else { CodingScheme::AdditiveNoXci };
    scheme.code(g).unwrap_or(0.0)
}

fn noise<R: Rng + ?Sized>(sd: f64, rng: &mut R) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

fn placeholder_cohort(geno: &SimulatedGenotypes, y: Vec<f64>) -> Result<CohortData> {
    let n = geno.sexes.len();
    CohortData::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        geno.sexes.clone(),
        y,
        (0..geno.classes.len()).map(|j| format!("v{j}")).collect(),
        geno.classes.clone(),
    )
}

/// Traits for one replicate under `effect`.
pub fn gen_traits<R: Rng + ?Sized>(
    config: &SimConfig,
    effect: &EffectModel,
    geno: &SimulatedGenotypes,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = geno.sexes.len();
    let k = geno.classes.len();
    let mut y = vec![0.0; n];
    match *effect {
        EffectModel::Additive { mu, tau } => {
            let law = Normal::new(mu, tau).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let beta: Vec<f64> = (0..k).map(|_| law.sample(rng)).collect();
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = if geno.sexes[i] == Sex::Male { 0.5 } else { 0.0 };
                for j in 0..k {
                    *yi += beta[j] * raw_code(geno.classes[j][i], config.xci_flags[j]);
                }
            }
        }
        EffectModel::Transformed { mu, tau } => {
            let mut beta = [vec![], vec![], vec![]];
            for c in 0..3 {
                let law = Normal::new(mu[c], tau[c]).map_err(|e| Error::InvalidInput(e.to_string()))?;
                beta[c] = (0..k).map(|_| law.sample(rng)).collect();
            }
            let codings = transform_pipeline(&placeholder_cohort(geno, vec![0.0; n])?)?;
            for (c, comp) in Component::ALL.into_iter().enumerate() {
                let g = codings.matrix(comp);
                let samples = codings.samples(comp.sex());
                for (col, &v) in codings.variants(comp).iter().enumerate() {
                    for (r, &i) in samples.iter().enumerate() {
                        y[i] += beta[c][v] * g[(r, col)];
                    }
                }
            }
        }
        EffectModel::Rare { c_f, c_m, female, male } => {
            let sm = male.signs(k, None, rng)?;
            let sf = female.signs(k, Some(&sm), rng)?;
            let bf: Vec<f64> = (0..k).map(|j| sf[j] * c_f * geno.maf_female[j].log10().abs()).collect();
            let bm: Vec<f64> = (0..k).map(|j| sm[j] * c_m * geno.maf_male[j].log10().abs()).collect();
            for (i, yi) in y.iter_mut().enumerate() {
                let b = if geno.sexes[i] == Sex::Female { &bf } else { &bm };
                for j in 0..k {
                    if b[j] != 0.0 {
                        *yi += b[j] * raw_code(geno.classes[j][i], config.xci_flags[j]);
                    }
                }
            }
        }
    }
    for yi in y.iter_mut() {
        *yi += noise(config.error_sd, rng);
    }
    Ok(y)
}

/// Genotypes and traits of replicate `rep` under `effect`.
pub fn simulate_replicate(config: &SimConfig, effect: &EffectModel, rep: u64) -> Result<CohortData> {
    let mut rng = stream(config.seed, rep);
    let geno = gen_genotypes(config, &mut rng);
    let y = gen_traits(config, effect, &geno, &mut rng)?;
    placeholder_cohort(&geno, y)
}

/// Tests recorded by a power experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerTest {
    /// Additive model with each variant coded by its true XCI status.
    OneDf,
    AdditiveXci,
    AdditiveNoXci,
    /// Transformed sex-stratified full model.
    Full,
    /// CCT of the XCI, no-XCI and full models.
    Cct,
}

impl PowerTest {
    pub const ALL: [PowerTest; 5] =
        [PowerTest::OneDf, PowerTest::AdditiveXci, PowerTest::AdditiveNoXci, PowerTest::Full, PowerTest::Cct];

    pub fn label(self) -> &'static str {
        match self {
            PowerTest::OneDf => "one_df",
            PowerTest::AdditiveXci => "xci",
            PowerTest::AdditiveNoXci => "noxci",
            PowerTest::Full => "full",
            PowerTest::Cct => "cct",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        PowerTest::ALL
            .into_iter()
            .find(|t| t.label() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown power test '{s}'")))
    }
}

/// ln p of each requested test on one replicate.
pub fn evaluate_replicate(cohort: &CohortData, config: &SimConfig, tests: &[PowerTest]) -> Result<Vec<f64>> {
    let cfg = &config.analysis;
    let all: Vec<usize> = (0..cohort.n_variants()).collect();
    let codings = transform_window(cohort, &all, cfg.two_df)?;
    let samples = analysed_samples(&codings);
    let need = |t: PowerTest| tests.contains(&t);
    let xci_schemes = vec![CodingScheme::AdditiveXci; all.len()];
    let noxci_schemes = vec![CodingScheme::AdditiveNoXci; all.len()];
    let xci = if need(PowerTest::AdditiveXci) || need(PowerTest::Cct) || (need(PowerTest::OneDf) && config.xci_flags.iter().all(|&f| f)) {
        Some(pooled_test(cohort, &all, &samples, &xci_schemes, cfg)?.0)
    } else {
        None
    };
    let noxci = if need(PowerTest::AdditiveNoXci) || need(PowerTest::Cct) {
        Some(pooled_test(cohort, &all, &samples, &noxci_schemes, cfg)?.0)
    } else {
        None
    };
    let full = if need(PowerTest::Full) || need(PowerTest::Cct) { Some(full_model(cohort, &codings, cfg)?) } else { None };
    let one_df = if need(PowerTest::OneDf) {
        if config.xci_flags.iter().all(|&f| f) {
            xci.as_ref().map(|r| r.ln_p_value)
        } else {
            let schemes: Vec<CodingScheme> = config
                .xci_flags
                .iter()
                .map(|&f| if f { CodingScheme::AdditiveXci } else { CodingScheme::AdditiveNoXci })
                .collect();
            Some(pooled_test(cohort, &all, &samples, &schemes, cfg)?.0.ln_p_value)
        }
    } else {
        None
    };
    tests
        .iter()
        .map(|t| {
            Ok(match t {
                PowerTest::OneDf => one_df.unwrap(),
                PowerTest::AdditiveXci => xci.as_ref().unwrap().ln_p_value,
                PowerTest::AdditiveNoXci => noxci.as_ref().unwrap().ln_p_value,
                PowerTest::Full => full.as_ref().unwrap().ln_p_value,
                PowerTest::Cct => combine_three(xci.as_ref().unwrap(), noxci.as_ref().unwrap(), full.as_ref().unwrap(), &cfg.cct_weights)?,
            })
        })
        .collect()
}

/// ln p-values indexed `[grid point][test][replicate]`. A replicate whose
/// analysis fails (for example every variant monomorphic) records ln p = 0,
/// i.e. no rejection; the count is returned alongside.
pub fn simulate_ln_p(config: &SimConfig, tests: &[PowerTest]) -> Result<(Vec<Vec<Vec<f64>>>, Vec<usize>)> {
    config.validate()?;
    let points = config.points()?;
    let n_tasks = points.len() * config.reps;
    let rows: Vec<Result<Option<Vec<f64>>>> = (0..n_tasks)
        .into_par_iter()
        .map(|task| {
            let (g, rep) = (task / config.reps, task % config.reps);
            let cohort = simulate_replicate(config, &points[g].1, rep as u64)?;
            match evaluate_replicate(&cohort, config, tests) {
                Ok(v) => Ok(Some(v)),
                Err(e @ (Error::InvalidInput(_) | Error::LengthMismatch { .. } | Error::Validation(_))) => Err(e),
                Err(e) => {
                    log::debug!("replicate {rep} at grid point {g} failed: {e}");
                    Ok(None)
                }
            }
        })
        .collect();
    let mut out = vec![vec![Vec::with_capacity(config.reps); tests.len()]; points.len()];
    let mut failures = vec![0; points.len()];
    for (task, row) in rows.into_iter().enumerate() {
        let g = task / config.reps;
        match row? {
            Some(v) => {
                for (t, l) in v.into_iter().enumerate() {
                    out[g][t].push(l);
                }
            }
            None => {
                failures[g] += 1;
                for col in out[g].iter_mut() {
                    col.push(0.0);
                }
            }
        }
    }
    Ok((out, failures))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub grid_param: Option<GridParam>,
    pub grid: Vec<f64>,
    pub tests: Vec<PowerTest>,
    pub alpha: f64,
    pub reps: usize,
    /// `power[g][t]`.
    pub power: Vec<Vec<f64>>,
    /// √(p(1 − p)/reps).
    pub se: Vec<Vec<f64>>,
    /// Replicates whose analysis failed, per grid point.
    pub failures: Vec<usize>,
}

/// Fraction of ln p-values at or below ln α.
pub fn rejection_rate(ln_p: &[f64], alpha: f64) -> f64 {
    let la = alpha.ln();
    ln_p.iter().filter(|&&l| l <= la).count() as f64 / ln_p.len() as f64
}

pub fn run_power_experiment(config: &SimConfig, tests: &[PowerTest]) -> Result<PowerCurve> {
    let (ln_p, failures) = simulate_ln_p(config, tests)?;
    let reps = config.reps as f64;
    let power: Vec<Vec<f64>> = ln_p.iter().map(|g| g.iter().map(|t| rejection_rate(t, config.alpha)).collect()).collect();
    let se = power.iter().map(|g| g.iter().map(|&p| (p * (1.0 - p) / reps).sqrt()).collect()).collect();
    Ok(PowerCurve {
        grid_param: config.grid_param,
        grid: if config.grid_param.is_some() { config.grid.clone() } else { vec![f64::NAN] },
        tests: tests.to_vec(),
        alpha: config.alpha,
        reps: config.reps,
        power,
        se,
        failures,
    })
}

impl PowerCurve {
    /// Tab-separated rows `param value test power se`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("param\tvalue\ttest\tpower\tse\n");
        let name = self.grid_param.map_or("none", |p| p.label());
        for (g, v) in self.grid.iter().enumerate() {
            for (t, test) in self.tests.iter().enumerate() {
                s.push_str(&format!("{name}\t{v:.5e}\t{}\t{:.5e}\t{:.5e}\n", test.label(), self.power[g][t], self.se[g][t]));
            }
        }
        s
    }
}
