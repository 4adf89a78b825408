//! Sample-level data: sexes, genotype classes, phenotype and covariates.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn label(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

/// X-chromosome genotype class. Females carry two alleles, males one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenotypeClass {
    /// rr
    HomRef,
    /// rR
    Het,
    /// RR
    HomAlt,
    /// r
    HemiRef,
    /// R
    HemiAlt,
    Missing,
}

impl GenotypeClass {
    /// Class from an R-allele count. `None` means missing.
    pub fn from_count(sex: Sex, count: Option<u8>) -> Result<Self> {
        use GenotypeClass::*;
        match (sex, count) {
            (_, None) => Ok(Missing),
            (Sex::Female, Some(0)) => Ok(HomRef),
            (Sex::Female, Some(1)) => Ok(Het),
            (Sex::Female, Some(2)) => Ok(HomAlt),
            (Sex::Male, Some(0)) => Ok(HemiRef),
            (Sex::Male, Some(1)) => Ok(HemiAlt),
            (s, Some(c)) => Err(Error::InvalidInput(format!(
                "allele count {c} is impossible for a {} sample",
                s.label()
            ))),
        }
    }

    pub fn allele_count(self) -> Option<u8> {
        use GenotypeClass::*;
        match self {
            HomRef | HemiRef => Some(0),
            Het | HemiAlt => Some(1),
            HomAlt => Some(2),
            Missing => None,
        }
    }

    pub fn label(self) -> &'static str {
        use GenotypeClass::*;
        match self {
            HomRef => "rr",
            Het => "rR",
            HomAlt => "RR",
            HemiRef => "r",
            HemiAlt => "R",
            Missing => "NA",
        }
    }

    pub fn is_missing(self) -> bool {
        self == GenotypeClass::Missing
    }

    /// `Missing` is compatible with both sexes.
    pub fn compatible_with(self, sex: Sex) -> bool {
        use GenotypeClass::*;
        match self {
            HomRef | Het | HomAlt => sex == Sex::Female,
            HemiRef | HemiAlt => sex == Sex::Male,
            Missing => true,
        }
    }
}

/// Individual-level data for one X-chromosome region.
///
/// Genotypes are stored variant-major so a variant's column is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct CohortData {
    sample_ids: Vec<String>,
    sexes: Vec<Sex>,
    phenotype: Vec<f64>,
    covariate_names: Vec<String>,
    covariates: Option<DMatrix<f64>>,
    variant_ids: Vec<String>,
    genotypes: Vec<GenotypeClass>,
}

impl CohortData {
    /// `genotypes[j]` holds the classes of variant `j` for every sample.
    pub fn new(
        sample_ids: Vec<String>,
        sexes: Vec<Sex>,
        phenotype: Vec<f64>,
        variant_ids: Vec<String>,
        genotypes: Vec<Vec<GenotypeClass>>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        for (len, _) in [(sexes.len(), "sexes"), (phenotype.len(), "phenotype")] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, found: len });
            }
        }
        if genotypes.len() != variant_ids.len() {
            return Err(Error::LengthMismatch { expected: variant_ids.len(), found: genotypes.len() });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSample(id.clone()));
            }
        }
        let mut flat = Vec::with_capacity(n * genotypes.len());
        for col in &genotypes {
            if col.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: col.len() });
            }
            for (i, &g) in col.iter().enumerate() {
                if !g.compatible_with(sexes[i]) {
                    return Err(Error::SexGenotypeConflict(sample_ids[i].clone()));
                }
            }
            flat.extend_from_slice(col);
        }
        Ok(CohortData {
            sample_ids,
            sexes,
            phenotype,
            covariate_names: Vec::new(),
            covariates: None,
            variant_ids,
            genotypes: flat,
        })
    }

    /// Attach an `n × q` covariate matrix.
    pub fn with_covariates(mut self, names: Vec<String>, covariates: DMatrix<f64>) -> Result<Self> {
        if covariates.nrows() != self.n_samples() {
            return Err(Error::LengthMismatch { expected: self.n_samples(), found: covariates.nrows() });
        }
        if names.len() != covariates.ncols() {
            return Err(Error::LengthMismatch { expected: covariates.ncols(), found: names.len() });
        }
        self.covariate_names = names;
        self.covariates = if covariates.ncols() == 0 { None } else { Some(covariates) };
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_variants(&self) -> usize {
        self.variant_ids.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn sexes(&self) -> &[Sex] {
        &self.sexes
    }

    pub fn phenotype(&self) -> &[f64] {
        &self.phenotype
    }

    pub fn covariates(&self) -> Option<&DMatrix<f64>> {
        self.covariates.as_ref()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn variant(&self, j: usize) -> &[GenotypeClass] {
        let n = self.n_samples();
        &self.genotypes[j * n..(j + 1) * n]
    }

    pub fn count(&self, sex: Sex) -> usize {
        self.sexes.iter().filter(|&&s| s == sex).count()
    }

    /// Samples observed at every variant in `variants`.
    pub fn complete_cases(&self, variants: &[usize]) -> Vec<usize> {
        (0..self.n_samples())
            .filter(|&i| {
                self.phenotype[i].is_finite()
                    && variants.iter().all(|&j| !self.variant(j)[i].is_missing())
            })
            .collect()
    }

    /// A new cohort restricted to `samples` (in that order) and `variants`.
    pub fn subset(&self, samples: &[usize], variants: &[usize]) -> CohortData {
        let pick_s = |v: &Vec<String>| samples.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let mut genotypes = Vec::with_capacity(samples.len() * variants.len());
        for &j in variants {
            let col = self.variant(j);
            genotypes.extend(samples.iter().map(|&i| col[i]));
        }
        let covariates = self
            .covariates
            .as_ref()
            .map(|c| DMatrix::from_fn(samples.len(), c.ncols(), |r, k| c[(samples[r], k)]));
        CohortData {
            sample_ids: pick_s(&self.sample_ids),
            sexes: samples.iter().map(|&i| self.sexes[i]).collect(),
            phenotype: samples.iter().map(|&i| self.phenotype[i]).collect(),
            covariate_names: self.covariate_names.clone(),
            covariates,
            variant_ids: variants.iter().map(|&j| self.variant_ids[j].clone()).collect(),
            genotypes,
        }
    }

    /// Replace the phenotype, keeping everything else.
    pub fn with_phenotype(mut self, phenotype: Vec<f64>) -> Result<Self> {
        if phenotype.len() != self.n_samples() {
            return Err(Error::LengthMismatch { expected: self.n_samples(), found: phenotype.len() });
        }
        self.phenotype = phenotype;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use GenotypeClass::*;

    #[test]
    fn male_count_two_is_rejected() {
        assert!(GenotypeClass::from_count(Sex::Male, Some(2)).is_err());
        assert_eq!(GenotypeClass::from_count(Sex::Female, Some(2)).unwrap(), HomAlt);
    }

    #[test]
    fn construction_checks_sex_consistency_and_ids() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let sexes = vec![Sex::Female, Sex::Male];
        let err = CohortData::new(ids.clone(), sexes.clone(), vec![0.0, 1.0], vec!["v".into()], vec![vec![Het, HomAlt]])
            .unwrap_err();
        assert_eq!(err, Error::SexGenotypeConflict("b".into()));
        let dup = CohortData::new(vec!["a".into(), "a".into()], sexes.clone(), vec![0.0, 1.0], vec![], vec![]);
        assert_eq!(dup.unwrap_err(), Error::DuplicateSample("a".into()));
        let ok = CohortData::new(ids, sexes, vec![0.0, 1.0], vec!["v".into()], vec![vec![Het, Missing]]).unwrap();
        assert_eq!(ok.complete_cases(&[0]), vec![0]);
        assert_eq!(ok.subset(&[1], &[0]).variant(0), &[Missing]);
    }
}
