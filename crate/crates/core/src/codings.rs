//! Genotype coding schemes and the three-step transformation (sex
//! stratification, reparametrization, standardization) that yields codings
//! invariant to X-inactivation status and to coding scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortData, GenotypeClass, Sex};
use crate::{Error, Result};

/// Raw coding schemes, listed on the classes (rr, rR, RR, r, R).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodingScheme {
    AdditiveXci,
    AdditiveNoXci,
    Dominant,
    Interaction,
    Sex,
}

impl CodingScheme {
    pub const ALL: [CodingScheme; 5] = [
        CodingScheme::AdditiveXci,
        CodingScheme::AdditiveNoXci,
        CodingScheme::Dominant,
        CodingScheme::Interaction,
        CodingScheme::Sex,
    ];

    /// Codes for (rr, rR, RR, r, R).
    pub fn table(self) -> [f64; 5] {
        match self {
            CodingScheme::AdditiveXci => [0.0, 0.5, 1.0, 0.0, 1.0],
            CodingScheme::AdditiveNoXci => [0.0, 1.0, 2.0, 0.0, 1.0],
            CodingScheme::Dominant => [0.0, 1.0, 0.0, 0.0, 0.0],
            CodingScheme::Interaction => [0.0, 0.0, 0.0, 0.0, 1.0],
            CodingScheme::Sex => [0.0, 0.0, 0.0, 1.0, 1.0],
        }
    }

    /// `None` for a missing genotype.
    pub fn code(self, class: GenotypeClass) -> Option<f64> {
        let t = self.table();
        match class {
            GenotypeClass::HomRef => Some(t[0]),
            GenotypeClass::Het => Some(t[1]),
            GenotypeClass::HomAlt => Some(t[2]),
            GenotypeClass::HemiRef => Some(t[3]),
            GenotypeClass::HemiAlt => Some(t[4]),
            GenotypeClass::Missing => None,
        }
    }
}

/// Apply a coding scheme element-wise.
pub fn code_raw(genotypes: &[GenotypeClass], sexes: &[Sex], scheme: CodingScheme) -> Result<Vec<f64>> {
    if genotypes.len() != sexes.len() {
        return Err(Error::LengthMismatch { expected: sexes.len(), found: genotypes.len() });
    }
    genotypes
        .iter()
        .zip(sexes)
        .enumerate()
        .map(|(i, (&g, &s))| {
            if !g.compatible_with(s) {
                return Err(Error::MixedSexClass { class: g.label(), sex: s.label() });
            }
            scheme.code(g).ok_or(Error::MissingGenotype(i))
        })
        .collect()
}

/// Female genotype-class probabilities and the two sex-specific allele
/// frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenotypeFrequencies {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub f_female: f64,
    pub f_male: f64,
}

impl GenotypeFrequencies {
    /// `f_female` is derived as p2/2 + p3.
    pub fn new(p1: f64, p2: f64, p3: f64, f_male: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(p1) && ok(p2) && ok(p3) && ok(f_male)) || (p1 + p2 + p3 - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("invalid genotype frequencies ({p1}, {p2}, {p3}; {f_male})")));
        }
        Ok(GenotypeFrequencies { p1, p2, p3, f_female: p2 / 2.0 + p3, f_male })
    }

    /// Hardy–Weinberg female class probabilities for allele frequency `f_female`.
    pub fn hwe(f_female: f64, f_male: f64) -> Result<Self> {
        let q = 1.0 - f_female;
        GenotypeFrequencies::new(q * q, 2.0 * f_female * q, f_female * f_female, f_male)
    }
}

/// Observed class proportions. Missing entries are ignored.
pub fn estimate_frequencies(female: &[GenotypeClass], male: &[GenotypeClass]) -> Result<GenotypeFrequencies> {
    let mut c = [0usize; 3];
    for g in female {
        match g {
            GenotypeClass::HomRef => c[0] += 1,
            GenotypeClass::Het => c[1] += 1,
            GenotypeClass::HomAlt => c[2] += 1,
            GenotypeClass::Missing => {}
            other => return Err(Error::MixedSexClass { class: other.label(), sex: "female" }),
        }
    }
    let (mut m_ref, mut m_alt) = (0usize, 0usize);
    for g in male {
        match g {
            GenotypeClass::HemiRef => m_ref += 1,
            GenotypeClass::HemiAlt => m_alt += 1,
            GenotypeClass::Missing => {}
            other => return Err(Error::MixedSexClass { class: other.label(), sex: "male" }),
        }
    }
    let nf = c.iter().sum::<usize>();
    if nf == 0 {
        return Err(Error::EmptyStratum("female"));
    }
    if m_ref + m_alt == 0 {
        return Err(Error::EmptyStratum("male"));
    }
    let nf = nf as f64;
    let (p1, p2) = (c[0] as f64 / nf, c[1] as f64 / nf);
    let p3 = c[2] as f64 / nf;
    Ok(GenotypeFrequencies {
        p1,
        p2,
        p3,
        f_female: p2 / 2.0 + p3,
        f_male: m_alt as f64 / (m_ref + m_alt) as f64,
    })
}

/// Reparametrized class codes: female additive and dominant on (rr, rR, RR),
/// male on (r, R).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReparamCodes {
    pub female_additive: [f64; 3],
    pub female_dominant: [f64; 3],
    pub male: [f64; 2],
}

pub const FEMALE_ADDITIVE_STAR: [f64; 3] = [-1.0, 0.0, 1.0];
pub const MALE_STAR: [f64; 2] = [0.0, 1.0];

/// G_f* = (−1, 0, 1), G_d* = (−p3, 2p1p3/p2, −p1), G_m* = (0, 1).
pub fn reparametrize(freq: &GenotypeFrequencies) -> Result<ReparamCodes> {
    let GenotypeFrequencies { p1, p2, p3, .. } = *freq;
    if p2 == 0.0 || p1 * p3 == 0.0 {
        return Err(Error::DominantUndefined { p1, p2, p3 });
    }
    Ok(ReparamCodes {
        female_additive: FEMALE_ADDITIVE_STAR,
        female_dominant: [-p3, 2.0 * p1 * p3 / p2, -p1],
        male: MALE_STAR,
    })
}

/// Raw female additive convention that the original effect refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RawAdditive {
    /// (0, 0.5, 1)
    Xci,
    /// (0, 1, 2)
    NoXci,
}

fn dominance_denominator(f: &GenotypeFrequencies) -> f64 {
    4.0 * f.p1 * f.p3 + f.p1 * f.p2 + f.p2 * f.p3
}

/// β_d* = 2p2 / (4p1p3 + p1p2 + p2p3) · β_d.
pub fn beta_d_star(freq: &GenotypeFrequencies, beta_d: f64) -> f64 {
    2.0 * freq.p2 / dominance_denominator(freq) * beta_d
}

/// β_f* for an effect β_f expressed on the given raw additive coding.
pub fn beta_f_star(freq: &GenotypeFrequencies, beta_f: f64, beta_d: f64, raw: RawAdditive) -> f64 {
    let shift = (freq.p3 - freq.p1) * freq.p2 / dominance_denominator(freq) * beta_d;
    match raw {
        RawAdditive::NoXci => beta_f - shift,
        RawAdditive::Xci => beta_f / 2.0 - shift,
    }
}

const SNAP: f64 = 4294967296.0; // 2^32

/// Divide by the sample standard deviation (n − 1 denominator).
///
/// The column is first expressed relative to its largest magnitude and rounded
/// to a 2⁻³² grid, so `standardize(c·x) == standardize(x)` bit for bit for
/// any c > 0 (barring a ratio within a few ulps of a grid midpoint).
pub fn standardize(column: &[f64]) -> Result<Vec<f64>> {
    let n = column.len();
    let scale = column.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if n < 2 || !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let canon: Vec<f64> = column.iter().map(|&x| (x / scale * SNAP).round() / SNAP).collect();
    let (lo, hi) = canon.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        return Err(Error::ZeroVariance);
    }
    let mean = canon.iter().sum::<f64>() / n as f64;
    let ss: f64 = canon.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok(canon.iter().map(|x| x / sd).collect())
}

/// Positive multipliers applied to the reparametrized codes before
/// standardization. The output does not depend on them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingScales {
    pub female_additive: f64,
    pub female_dominant: f64,
    pub male: f64,
}

impl Default for CodingScales {
    fn default() -> Self {
        CodingScales { female_additive: 1.0, female_dominant: 1.0, male: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransformOptions {
    /// External frequencies, one per analysed variant; estimated from the
    /// analysed samples when absent.
    pub frequencies: Option<Vec<GenotypeFrequencies>>,
    pub scales: CodingScales,
    /// Drop every dominant component.
    pub two_df: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    FemaleAdditive,
    FemaleDominant,
    MaleAdditive,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::FemaleAdditive, Component::FemaleDominant, Component::MaleAdditive];

    pub fn sex(self) -> Sex {
        match self {
            Component::MaleAdditive => Sex::Male,
            _ => Sex::Female,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::FemaleAdditive => "female_additive",
            Component::FemaleDominant => "female_dominant",
            Component::MaleAdditive => "male_additive",
        }
    }
}

/// Standardized stratum codings for a set of variants.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedCodings {
    /// n_f × k_f, columns for `f_variants`.
    pub g_f_dag: DMatrix<f64>,
    /// n_f × k_d, columns for `d_variants`.
    pub g_d_dag: DMatrix<f64>,
    /// n_m × k_m, columns for `m_variants`.
    pub g_m_dag: DMatrix<f64>,
    pub f_variants: Vec<usize>,
    pub d_variants: Vec<usize>,
    pub m_variants: Vec<usize>,
    /// Cohort row indices of the analysed females and males.
    pub female_samples: Vec<usize>,
    pub male_samples: Vec<usize>,
    pub frequencies: Vec<GenotypeFrequencies>,
    pub dropped_dominant: Vec<bool>,
}

impl TransformedCodings {
    pub fn matrix(&self, c: Component) -> &DMatrix<f64> {
        match c {
            Component::FemaleAdditive => &self.g_f_dag,
            Component::FemaleDominant => &self.g_d_dag,
            Component::MaleAdditive => &self.g_m_dag,
        }
    }

    pub fn variants(&self, c: Component) -> &[usize] {
        match c {
            Component::FemaleAdditive => &self.f_variants,
            Component::FemaleDominant => &self.d_variants,
            Component::MaleAdditive => &self.m_variants,
        }
    }

    pub fn samples(&self, sex: Sex) -> &[usize] {
        match sex {
            Sex::Female => &self.female_samples,
            Sex::Male => &self.male_samples,
        }
    }
}

fn female_index(g: GenotypeClass) -> usize {
    match g {
        GenotypeClass::HomRef => 0,
        GenotypeClass::Het => 1,
        _ => 2,
    }
}

fn columns_to_matrix(rows: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Transform every variant of the cohort (complete cases over all variants).
pub fn transform_pipeline(cohort: &CohortData) -> Result<TransformedCodings> {
    let all: Vec<usize> = (0..cohort.n_variants()).collect();
    transform_variants(cohort, &all, &TransformOptions::default())
}

/// Stratify, reparametrize and standardize the listed variants over the
/// samples observed at all of them. The pipeline reads genotype classes only.
pub fn transform_variants(cohort: &CohortData, variants: &[usize], opts: &TransformOptions) -> Result<TransformedCodings> {
    if let Some(f) = &opts.frequencies {
        if f.len() != variants.len() {
            return Err(Error::LengthMismatch { expected: variants.len(), found: f.len() });
        }
    }
    let samples = cohort.complete_cases(variants);
    let (female, male): (Vec<usize>, Vec<usize>) =
        samples.iter().partition(|&&i| cohort.sexes()[i] == Sex::Female);
    if female.is_empty() {
        return Err(Error::EmptyStratum("female"));
    }
    if male.is_empty() {
        return Err(Error::EmptyStratum("male"));
    }
    let s = opts.scales;
    let mut out = TransformedCodings {
        g_f_dag: DMatrix::zeros(0, 0),
        g_d_dag: DMatrix::zeros(0, 0),
        g_m_dag: DMatrix::zeros(0, 0),
        f_variants: Vec::new(),
        d_variants: Vec::new(),
        m_variants: Vec::new(),
        female_samples: female.clone(),
        male_samples: male.clone(),
        frequencies: Vec::with_capacity(variants.len()),
        dropped_dominant: Vec::with_capacity(variants.len()),
    };
    let (mut fc, mut dc, mut mc) = (Vec::new(), Vec::new(), Vec::new());
    for (pos, &j) in variants.iter().enumerate() {
        let col = cohort.variant(j);
        let fg: Vec<GenotypeClass> = female.iter().map(|&i| col[i]).collect();
        let mg: Vec<GenotypeClass> = male.iter().map(|&i| col[i]).collect();
        let freq = match &opts.frequencies {
            Some(f) => f[pos],
            None => estimate_frequencies(&fg, &mg)?,
        };
        let fa = FEMALE_ADDITIVE_STAR.map(|v| v * s.female_additive);
        let f_col: Vec<f64> = fg.iter().map(|&g| fa[female_index(g)]).collect();
        let f_std = standardize(&f_col);
        let mut dropped = true;
        if let Ok(f_std) = f_std {
            fc.push(f_std);
            out.f_variants.push(pos);
            if !opts.two_df {
                if let Ok(codes) = reparametrize(&freq) {
                    let dd = codes.female_dominant.map(|v| v * s.female_dominant);
                    let d_col: Vec<f64> = fg.iter().map(|&g| dd[female_index(g)]).collect();
                    if let Ok(d_std) = standardize(&d_col) {
                        dc.push(d_std);
                        out.d_variants.push(pos);
                        dropped = false;
                    }
                }
            }
        }
        let mm = MALE_STAR.map(|v| v * s.male);
        let m_col: Vec<f64> = mg
            .iter()
            .map(|&g| if g == GenotypeClass::HemiAlt { mm[1] } else { mm[0] })
            .collect();
        if let Ok(m_std) = standardize(&m_col) {
            mc.push(m_std);
            out.m_variants.push(pos);
        }
        out.frequencies.push(freq);
        out.dropped_dominant.push(dropped);
    }
    out.g_f_dag = columns_to_matrix(female.len(), &fc);
    out.g_d_dag = columns_to_matrix(female.len(), &dc);
    out.g_m_dag = columns_to_matrix(male.len(), &mc);
    Ok(out)
}
