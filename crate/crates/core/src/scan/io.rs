//! Text formats: cohort and summary-statistics TSV, scan results (TSV and
//! JSON lines), S_new null tables, and `key = value` configuration files.
//!
//! Numbers are written in scientific notation with 6 significant digits
//! unless stated otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::cohort::{CohortData, GenotypeClass, Sex};
use crate::multilocus::SnewNullTable;
use crate::scan::{SummaryRecord, SummaryStats, SummaryWindowResult, WindowResult};
use crate::{Error, Result};

/// Scientific notation with 6 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

fn field<T: std::str::FromStr>(s: &str, line: usize, column: usize, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| parse_err(line, column, format!("cannot parse {what} from `{s}`")))
}

/// Nonblank lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

/// Header `sample_id sex phenotype [cov_<name>...] g_<variant>...`, tab
/// separated. Sex is `F` or `M`; genotype cells are R-allele counts (0–2 for
/// females, 0–1 for males) or `NA`.
pub fn parse_cohort(text: &str) -> Result<CohortData> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty cohort file"))?;
    let cols: Vec<&str> = header.split('\t').collect();
    for (c, want) in ["sample_id", "sex", "phenotype"].iter().enumerate() {
        if cols.get(c).map(|s| s.trim()) != Some(want) {
            return Err(parse_err(hl, c + 1, format!("expected column `{want}`")));
        }
    }
    let mut cov_names = Vec::new();
    let mut variant_ids = Vec::new();
    for (c, name) in cols.iter().enumerate().skip(3) {
        if let Some(v) = name.strip_prefix("g_") {
            variant_ids.push(v.to_string());
        } else if let Some(v) = name.strip_prefix("cov_") {
            if !variant_ids.is_empty() {
                return Err(parse_err(hl, c + 1, "covariate columns must precede genotype columns"));
            }
            cov_names.push(v.to_string());
        } else {
            return Err(parse_err(hl, c + 1, format!("unexpected column `{name}`")));
        }
    }
    let q = cov_names.len();
    let (mut ids, mut sexes, mut pheno, mut covs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut geno: Vec<Vec<GenotypeClass>> = vec![Vec::new(); variant_ids.len()];
    for (ln, l) in it {
        let cells: Vec<&str> = l.split('\t').collect();
        if cells.len() != cols.len() {
            return Err(parse_err(ln, cells.len().min(cols.len()) + 1, format!("expected {} fields, found {}", cols.len(), cells.len())));
        }
        let id = cells[0].trim().to_string();
        let sex = match cells[1].trim() {
            "F" | "f" => Sex::Female,
            "M" | "m" => Sex::Male,
            other => return Err(parse_err(ln, 2, format!("sex must be F or M, found `{other}`"))),
        };
        pheno.push(field::<f64>(cells[2], ln, 3, "phenotype")?);
        for c in 0..q {
            covs.push(field::<f64>(cells[3 + c], ln, 4 + c, "covariate")?);
        }
        for (v, cell) in cells[3 + q..].iter().enumerate() {
            let cell = cell.trim();
            let count = if cell == "NA" { None } else { Some(field::<u8>(cell, ln, 4 + q + v, "genotype")?) };
            let class = match GenotypeClass::from_count(sex, count) {
                Ok(c) => c,
                Err(_) if sex == Sex::Male && count == Some(2) => return Err(Error::SexGenotypeConflict(id)),
                Err(e) => return Err(parse_err(ln, 4 + q + v, e.to_string())),
            };
            geno[v].push(class);
        }
        ids.push(id);
        sexes.push(sex);
    }
    let n = ids.len();
    let cohort = CohortData::new(ids, sexes, pheno, variant_ids, geno)?;
    if q > 0 {
        return cohort.with_covariates(cov_names, DMatrix::from_row_slice(n, q, &covs));
    }
    Ok(cohort)
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<CohortData> {
    parse_cohort(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_cohort`].
pub fn format_cohort(cohort: &CohortData) -> String {
    let mut s = String::from("sample_id\tsex\tphenotype");
    for c in cohort.covariate_names() {
        let _ = write!(s, "\tcov_{c}");
    }
    for v in cohort.variant_ids() {
        let _ = write!(s, "\tg_{v}");
    }
    s.push('\n');
    for i in 0..cohort.n_samples() {
        let sex = if cohort.sexes()[i] == Sex::Female { "F" } else { "M" };
        let _ = write!(s, "{}\t{sex}\t{:e}", cohort.sample_ids()[i], cohort.phenotype()[i]);
        if let Some(cov) = cohort.covariates() {
            for c in 0..cov.ncols() {
                let _ = write!(s, "\t{:e}", cov[(i, c)]);
            }
        }
        for j in 0..cohort.n_variants() {
            match cohort.variant(j)[i].allele_count() {
                Some(c) => {
                    let _ = write!(s, "\t{c}");
                }
                None => s.push_str("\tNA"),
            }
        }
        s.push('\n');
    }
    s
}

pub const SUMMARY_HEADER: [&str; 9] = ["variant_id", "maf_f", "maf_m", "beta_f", "se_f", "beta_m", "se_m", "n_f", "n_m"];

pub fn parse_summary(text: &str) -> Result<SummaryStats> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty summary file"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols != SUMMARY_HEADER {
        return Err(parse_err(hl, 1, format!("header must be `{}`", SUMMARY_HEADER.join("\\t"))));
    }
    let mut records = Vec::new();
    for (ln, l) in it {
        let c: Vec<&str> = l.split('\t').collect();
        if c.len() != SUMMARY_HEADER.len() {
            return Err(parse_err(ln, c.len().min(9) + 1, format!("expected 9 fields, found {}", c.len())));
        }
        let num = |i: usize| field::<f64>(c[i], ln, i + 1, SUMMARY_HEADER[i]);
        records.push(SummaryRecord {
            id: c[0].trim().to_string(),
            maf_f: num(1)?,
            maf_m: num(2)?,
            beta_f: num(3)?,
            se_f: num(4)?,
            beta_m: num(5)?,
            se_m: num(6)?,
            n_f: field(c[7], ln, 8, "n_f")?,
            n_m: field(c[8], ln, 9, "n_m")?,
        });
    }
    SummaryStats::new(records)
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<SummaryStats> {
    parse_summary(&std::fs::read_to_string(path)?)
}

/// Full-precision summary TSV.
pub fn format_summary(stats: &SummaryStats) -> String {
    let mut s = SUMMARY_HEADER.join("\t");
    s.push('\n');
    for r in &stats.records {
        let _ = writeln!(s, "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{}\t{}", r.id, r.maf_f, r.maf_m, r.beta_f, r.se_f, r.beta_m, r.se_m, r.n_f, r.n_m);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResultFormat {
    Tsv,
    JsonLines,
}

impl ResultFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ResultFormat::Tsv),
            "json-lines" | "jsonl" => Ok(ResultFormat::JsonLines),
            other => Err(Error::InvalidInput(format!("unknown result format `{other}`"))),
        }
    }
}

/// Column order of the window results TSV. `variants` is comma separated.
pub const RESULT_COLUMNS: [&str; 19] = [
    "window", "variants", "n_female", "n_male", "k", "stat_xci", "law_xci", "p_xci", "stat_noxci", "law_noxci",
    "p_noxci", "stat_full", "law_full", "p_full", "p_cct", "ln_p_cct", "dropped_dominant", "two_df", "significant",
];

pub fn format_results(results: &[WindowResult], format: ResultFormat) -> String {
    let mut s = String::new();
    match format {
        ResultFormat::Tsv => {
            s.push_str(&RESULT_COLUMNS.join("\t"));
            s.push('\n');
            for r in results {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.window,
                    r.variant_ids.join(","),
                    r.n_female,
                    r.n_male,
                    r.k,
                    sci(r.stat_xci),
                    r.law_xci,
                    sci(r.p_xci),
                    sci(r.stat_noxci),
                    r.law_noxci,
                    sci(r.p_noxci),
                    sci(r.stat_full),
                    r.law_full,
                    sci(r.p_full),
                    sci(r.p_cct),
                    sci(r.ln_p_cct),
                    r.dropped_dominant,
                    r.two_df,
                    r.significant
                );
            }
        }
        ResultFormat::JsonLines => {
            for r in results {
                s.push_str(&serde_json::to_string(r).expect("serializable"));
                s.push('\n');
            }
        }
    }
    s
}

pub fn parse_results(text: &str, format: ResultFormat) -> Result<Vec<WindowResult>> {
    match format {
        ResultFormat::JsonLines => lines(text)
            .map(|(ln, l)| serde_json::from_str(l).map_err(|e| parse_err(ln, e.column(), e.to_string())))
            .collect(),
        ResultFormat::Tsv => {
            let mut it = lines(text);
            let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty results file"))?;
            if header.split('\t').collect::<Vec<_>>() != RESULT_COLUMNS {
                return Err(parse_err(hl, 1, "unexpected results header"));
            }
            it.map(|(ln, l)| {
                let c: Vec<&str> = l.split('\t').collect();
                if c.len() != RESULT_COLUMNS.len() {
                    return Err(parse_err(ln, c.len().min(RESULT_COLUMNS.len()) + 1, "wrong field count"));
                }
                let f = |i: usize| field::<f64>(c[i], ln, i + 1, RESULT_COLUMNS[i]);
                let u = |i: usize| field::<usize>(c[i], ln, i + 1, RESULT_COLUMNS[i]);
                let b = |i: usize| field::<bool>(c[i], ln, i + 1, RESULT_COLUMNS[i]);
                Ok(WindowResult {
                    window: u(0)?,
                    variant_ids: if c[1].is_empty() { Vec::new() } else { c[1].split(',').map(String::from).collect() },
                    n_female: u(2)?,
                    n_male: u(3)?,
                    k: u(4)?,
                    stat_xci: f(5)?,
                    law_xci: c[6].to_string(),
                    p_xci: f(7)?,
                    stat_noxci: f(8)?,
                    law_noxci: c[9].to_string(),
                    p_noxci: f(10)?,
                    stat_full: f(11)?,
                    law_full: c[12].to_string(),
                    p_full: f(13)?,
                    p_cct: f(14)?,
                    ln_p_cct: f(15)?,
                    dropped_dominant: u(16)?,
                    two_df: b(17)?,
                    significant: b(18)?,
                })
            })
            .collect()
        }
    }
}

pub fn write_results(results: &[WindowResult], path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    Ok(std::fs::write(path, format_results(results, format))?)
}

pub fn read_results(path: impl AsRef<Path>, format: ResultFormat) -> Result<Vec<WindowResult>> {
    parse_results(&std::fs::read_to_string(path)?, format)
}

pub fn format_summary_results(results: &[SummaryWindowResult]) -> String {
    let mut s = String::from("window\tvariants\tstatistic\tp_value\trho_f\trho_m\tsignificant\n");
    for r in results {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.window,
            r.variant_ids.join(","),
            sci(r.statistic),
            sci(r.p_value),
            sci(r.rho_f),
            sci(r.rho_m),
            r.significant
        );
    }
    s
}

/// Rows `k components quantile p`, tab separated, one per grid point, with
/// full-precision values. Several tables may share a file.
pub fn format_null_tables(tables: &[SnewNullTable]) -> String {
    let mut s = String::from("k\tcomponents\tquantile\tp\n");
    for t in tables {
        for (q, p) in t.quantiles.iter().zip(&t.p_grid) {
            let _ = writeln!(s, "{}\t{}\t{:e}\t{:e}", t.k, t.components, q, p);
        }
    }
    s
}

pub fn parse_null_tables(text: &str) -> Result<Vec<SnewNullTable>> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, 1, "empty null table"))?;
    if header.split('\t').map(str::trim).collect::<Vec<_>>() != ["k", "components", "quantile", "p"] {
        return Err(parse_err(hl, 1, "header must be `k components quantile p`"));
    }
    let mut groups: Vec<((usize, usize), Vec<f64>, Vec<f64>)> = Vec::new();
    for (ln, l) in it {
        let c: Vec<&str> = l.split('\t').collect();
        if c.len() != 4 {
            return Err(parse_err(ln, c.len().min(4) + 1, "expected 4 fields"));
        }
        let key = (field(c[0], ln, 1, "k")?, field(c[1], ln, 2, "components")?);
        let (q, p): (f64, f64) = (field(c[2], ln, 3, "quantile")?, field(c[3], ln, 4, "p")?);
        match groups.last_mut() {
            Some((k, qs, ps)) if *k == key => {
                qs.push(q);
                ps.push(p);
            }
            _ => groups.push((key, vec![q], vec![p])),
        }
    }
    groups.into_iter().map(|((k, comp), qs, ps)| SnewNullTable::new(k, comp, ps, qs)).collect()
}

pub fn load_null_tables(path: impl AsRef<Path>) -> Result<Vec<SnewNullTable>> {
    parse_null_tables(&std::fs::read_to_string(path)?)
}

/// `key = value` lines; `#` starts a comment. Later keys override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| parse_err(i + 1, 1, format!("expected `key = value`, found `{l}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(parse_err(i + 1, 1, "empty key"));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}
