use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use xlocus::analysis::{analyze_variant_set, transform_window, AnalysisConfig, MultilocusTest};
use xlocus::codings::Component;
use xlocus::glm::LinkFamily;
use xlocus::multilocus::tabulate_snew_null;
use xlocus::power::{log_grid, max_power_loss_scan, LossMode, PowerLossConfig};
use xlocus::scan::io::{self, ResultFormat};
use xlocus::scan::{moving_window_scan, summary_window_scan, Correction, ScanConfig, SummaryRho};
use xlocus::sim::{run_power_experiment, EffectModel, GridParam, MafLaw, PowerTest, SignPattern, SimConfig};
use xlocus::{CohortData, Error};

#[derive(Parser, Debug)]
#[command(name = "xlocus", version, about = "Multilocus association tests for X-chromosome variants")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "XLOCUS_THREADS")]
    threads: Option<usize>,
    /// `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarize the transformed sex-stratified codings of a variant set.
    Transform(TransformArgs),
    /// Three models and their CCT on one variant set.
    Assoc(AssocArgs),
    /// Moving-window scan of a cohort.
    Scan(ScanArgs),
    /// Moving-window SKATO scan from sex-stratified summary statistics.
    SummaryScan(SummaryScanArgs),
    /// Simulated power curves.
    SimulatePower(SimulatePowerArgs),
    /// Maximum power loss against the correctly coded 1-df test.
    PowerLoss(PowerLossArgs),
    /// Monte Carlo null table for S_new.
    TabulateNull(TabulateNullArgs),
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    cohort: PathBuf,
    /// Comma-separated variant ids; all variants when absent.
    #[arg(long)]
    variants: Option<String>,
    #[arg(long)]
    two_df: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// snew, skato, skat, burden, hotelling or fisher.
    #[arg(long)]
    test: Option<String>,
    /// Drop the female dominant component.
    #[arg(long)]
    two_df: bool,
    /// identity or logit.
    #[arg(long)]
    family: Option<String>,
    /// S_new null tables from `tabulate-null`.
    #[arg(long)]
    null_table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AssocArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    variants: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    /// Family-wise level; divided by the number of tests.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    /// windows or rare-variants.
    #[arg(long)]
    correction: Option<String>,
    /// Skip windows with too few rare variants.
    #[arg(long)]
    rare_only: bool,
    #[arg(long)]
    rare_maf: Option<f64>,
    #[arg(long)]
    rare_fraction: Option<f64>,
    /// tsv or json-lines.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SummaryScanArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed female ρ; estimated per window when neither ρ is given.
    #[arg(long)]
    rho_f: Option<f64>,
    #[arg(long)]
    rho_m: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulatePowerArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_female: Option<usize>,
    #[arg(long)]
    n_male: Option<usize>,
    /// moderate, common, rare, uniform:lo:hi or beta:a:b.
    #[arg(long)]
    maf: Option<String>,
    /// additive, transformed or rare.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Transformed-model means as f,d,m.
    #[arg(long)]
    mus: Option<String>,
    /// Transformed-model standard deviations as f,d,m.
    #[arg(long)]
    taus: Option<String>,
    #[arg(long)]
    c_f: Option<f64>,
    #[arg(long)]
    c_m: Option<f64>,
    #[arg(long)]
    female_pattern: Option<String>,
    #[arg(long)]
    male_pattern: Option<String>,
    /// Parameter varied along the curve, e.g. mu_d or c_f.
    #[arg(long)]
    grid_param: Option<String>,
    /// Comma list, or lin:lo:hi:n / log:lo:hi:n.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Mark a seeded random half of the variants as XCI.
    #[arg(long)]
    random_half_xci: bool,
    /// Comma list of one_df, xci, noxci, full, cct.
    #[arg(long)]
    tests: Option<String>,
    #[command(flatten)]
    model_args: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PowerLossArgs {
    #[arg(long)]
    k: Option<usize>,
    /// random-tau or fixed-mu.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    effects: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n_female: Option<usize>,
    #[arg(long)]
    n_male: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TabulateNullArgs {
    #[arg(long)]
    k: Option<usize>,
    /// 1 or 3.
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit code 1 for bad input, 2 for failures while running.
#[derive(Debug)]
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidInput(_)
            | Error::SexGenotypeConflict(_)
            | Error::DuplicateSample(_)
            | Error::NonpositiveSe(_)
            | Error::MissingVariant(_)
            | Error::UnknownPattern(_)
            | Error::UnsupportedComponents(_) => Failure::Validation(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(anyhow!(msg.into()))
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Flag value, else config value, else default.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).or_else(|| self.0.get(&key.replace('-', "_"))).map(String::as_str)
    }

    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Outcome<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| invalid(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Outcome<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn switch(&self, flag: bool, key: &str) -> Outcome<bool> {
        Ok(flag || self.opt::<bool>(None, key)?.unwrap_or(false))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(Failure::Runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_list(s: &str) -> Outcome<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 4 && (parts[0] == "lin" || parts[0] == "log") {
        let lo: f64 = parts[1].parse().map_err(|_| invalid(format!("bad grid `{s}`")))?;
        let hi: f64 = parts[2].parse().map_err(|_| invalid(format!("bad grid `{s}`")))?;
        let n: usize = parts[3].parse().map_err(|_| invalid(format!("bad grid `{s}`")))?;
        if n == 0 || (parts[0] == "log" && !(lo > 0.0 && hi > 0.0)) {
            return Err(invalid(format!("bad grid `{s}`")));
        }
        if parts[0] == "log" {
            return Ok(log_grid(lo, hi, n));
        }
        return Ok((0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| invalid(format!("cannot parse number `{v}`")))).collect()
}

fn select_variants(cohort: &CohortData, ids: Option<&str>) -> Outcome<Vec<usize>> {
    match ids {
        None => Ok((0..cohort.n_variants()).collect()),
        Some(list) => list
            .split(',')
            .map(|id| {
                let id = id.trim();
                cohort.variant_ids().iter().position(|v| v == id).ok_or_else(|| Failure::from(Error::MissingVariant(id.into())))
            })
            .collect(),
    }
}

fn analysis_config(s: &Settings, m: &ModelArgs, default: AnalysisConfig) -> Outcome<AnalysisConfig> {
    let mut cfg = default;
    if let Some(t) = s.opt::<String>(m.test.clone(), "test")? {
        cfg.test = MultilocusTest::parse(&t)?;
    }
    cfg.two_df = cfg.two_df || s.switch(m.two_df, "two-df")?;
    if let Some(f) = s.opt::<String>(m.family.clone(), "family")? {
        cfg.family = match f.as_str() {
            "identity" | "linear" => LinkFamily::Identity,
            "logit" | "logistic" => LinkFamily::Logit,
            other => return Err(invalid(format!("unknown family `{other}`"))),
        };
    }
    if let Some(p) = s.opt::<PathBuf>(m.null_table.clone(), "null-table")? {
        cfg.snew_tables = io::load_null_tables(p)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome<()> {
    let settings = Settings(match &cli.config {
        Some(p) => io::load_config(p)?,
        None => BTreeMap::new(),
    });
    let s = &settings;
    if let Some(n) = s.opt(cli.threads, "threads")? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.into()))?;
    }
    let seed = s.get(cli.seed, "seed", 1)?;
    match cli.command {
        Command::Transform(a) => {
            let cohort = io::load_cohort(&a.cohort)?;
            let variants = select_variants(&cohort, a.variants.as_deref())?;
            let two_df = s.switch(a.two_df, "two-df")?;
            let codings = transform_window(&cohort, &variants, two_df)?;
            let mut t = String::from("variant\tp_rr\tp_rR\tp_RR\tf_male\tfemale_additive\tfemale_dominant\tmale_additive\n");
            for (pos, &j) in variants.iter().enumerate() {
                let fr = &codings.frequencies[pos];
                let has = |c: Component| codings.variants(c).contains(&pos);
                let _ = writeln!(
                    t,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    cohort.variant_ids()[j],
                    io::sci(fr.p1),
                    io::sci(fr.p2),
                    io::sci(fr.p3),
                    io::sci(fr.f_male),
                    has(Component::FemaleAdditive),
                    has(Component::FemaleDominant),
                    has(Component::MaleAdditive)
                );
            }
            let _ = writeln!(t, "# n_female={} n_male={}", codings.female_samples.len(), codings.male_samples.len());
            emit(a.out.as_deref(), &t)
        }
        Command::Assoc(a) => {
            let cohort = io::load_cohort(&a.cohort)?;
            let variants = select_variants(&cohort, a.variants.as_deref())?;
            let cfg = analysis_config(s, &a.model, AnalysisConfig::default())?;
            let r = analyze_variant_set(&cohort, &variants, &cfg)?;
            let mut t = String::from("model\tstatistic\tnull_law\tp_value\n");
            for (name, x) in [("xci", &r.xci), ("noxci", &r.noxci), ("full", &r.full)] {
                let _ = writeln!(t, "{name}\t{}\t{}\t{}", io::sci(x.statistic), x.null_law.describe(), io::sci(x.p_value));
            }
            let _ = writeln!(t, "cct\tNA\tcauchy\t{}", io::sci(r.p_cct));
            emit(None, &t)
        }
        Command::Scan(a) => {
            let cohort = io::load_cohort(&a.cohort)?;
            let d = ScanConfig::default();
            let mut cfg = ScanConfig {
                window: s.get(a.window, "window", d.window)?,
                step: s.get(a.step, "step", d.step)?,
                alpha: s.get(a.alpha, "alpha", d.alpha)?,
                analysis: analysis_config(s, &a.model, d.analysis.clone())?,
                rare_only: s.switch(a.rare_only, "rare-only")?,
                ..d
            };
            cfg.rare_rule.maf_threshold = s.get(a.rare_maf, "rare-maf", cfg.rare_rule.maf_threshold)?;
            cfg.rare_rule.min_fraction = s.get(a.rare_fraction, "rare-fraction", cfg.rare_rule.min_fraction)?;
            cfg.correction = match s.opt::<String>(a.correction.clone(), "correction")?.as_deref() {
                None | Some("windows") => Correction::Windows,
                Some("rare-variants") => Correction::RareVariants,
                Some(other) => return Err(invalid(format!("unknown correction `{other}`"))),
            };
            let format = ResultFormat::parse(&s.get(a.format.clone(), "format", "tsv".to_string())?)?;
            let report = moving_window_scan(&cohort, &cfg)?;
            log::info!(
                "{} windows analysed, {} skipped, threshold {}",
                report.windows.len(),
                report.skipped.len(),
                io::sci(report.threshold)
            );
            emit(a.out.as_deref(), &io::format_results(&report.windows, format))
        }
        Command::SummaryScan(a) => {
            let stats = io::load_summary(&a.summary)?;
            let rho = match (s.opt(a.rho_f, "rho-f")?, s.opt(a.rho_m, "rho-m")?) {
                (None, None) => SummaryRho::Estimated,
                (f, m) => SummaryRho::Fixed { female: f.unwrap_or(0.0), male: m.unwrap_or(0.0) },
            };
            let r = summary_window_scan(
                &stats,
                s.get(a.window, "window", 8)?,
                s.get(a.step, "step", 1)?,
                s.get(a.alpha, "alpha", 0.05)?,
                rho,
            )?;
            emit(a.out.as_deref(), &io::format_summary_results(&r))
        }
        Command::SimulatePower(a) => {
            let k = s.get(a.k, "k", 10)?;
            let mut cfg = SimConfig::new(k, seed);
            cfg.n_f = s.get(a.n_female, "n-female", cfg.n_f)?;
            cfg.n_m = s.get(a.n_male, "n-male", cfg.n_m)?;
            cfg.reps = s.get(a.reps, "reps", cfg.reps)?;
            cfg.alpha = s.get(a.alpha, "alpha", cfg.alpha)?;
            if let Some(m) = s.opt::<String>(a.maf.clone(), "maf")? {
                cfg.maf_law = parse_maf(&m)?;
            }
            let model = s.get(a.model.clone(), "model", "additive".to_string())?;
            let default_analysis = if model == "rare" { AnalysisConfig::rare() } else { AnalysisConfig::common() };
            cfg.analysis = analysis_config(s, &a.model_args, default_analysis)?;
            cfg.effect = match model.as_str() {
                "additive" => EffectModel::Additive { mu: s.get(a.mu, "mu", 0.0)?, tau: s.get(a.tau, "tau", 0.0)? },
                "transformed" => EffectModel::Transformed {
                    mu: triple(s.opt(a.mus.clone(), "mus")?)?,
                    tau: triple(s.opt(a.taus.clone(), "taus")?)?,
                },
                "rare" => EffectModel::Rare {
                    c_f: s.get(a.c_f, "c-f", 0.0)?,
                    c_m: s.get(a.c_m, "c-m", 0.0)?,
                    female: SignPattern::parse(&s.get(a.female_pattern.clone(), "female-pattern", "all-positive".to_string())?)?,
                    male: SignPattern::parse(&s.get(a.male_pattern.clone(), "male-pattern", "all-positive".to_string())?)?,
                },
                other => return Err(invalid(format!("unknown model `{other}`"))),
            };
            if let Some(p) = s.opt::<String>(a.grid_param.clone(), "grid-param")? {
                cfg.grid_param = Some(GridParam::parse(&p)?);
                let grid = s.opt::<String>(a.grid.clone(), "grid")?.ok_or_else(|| invalid("--grid-param needs --grid"))?;
                cfg.grid = parse_list(&grid)?;
            }
            if s.switch(a.random_half_xci, "random-half-xci")? {
                cfg = cfg.with_random_half_xci();
            }
            let tests = match s.opt::<String>(a.tests.clone(), "tests")? {
                Some(t) => t.split(',').map(|x| PowerTest::parse(x.trim())).collect::<Result<Vec<_>, _>>()?,
                None => vec![PowerTest::OneDf, PowerTest::Full, PowerTest::Cct],
            };
            let curve = run_power_experiment(&cfg, &tests)?;
            if curve.failures.iter().any(|&f| f > 0) {
                log::warn!("failed replicates per grid point: {:?}", curve.failures);
            }
            emit(a.out.as_deref(), &curve.to_tsv())
        }
        Command::PowerLoss(a) => {
            let mode = match s.get(a.mode.clone(), "mode", "random-tau".to_string())?.as_str() {
                "random-tau" => LossMode::RandomTau,
                "fixed-mu" => LossMode::FixedMu,
                other => return Err(invalid(format!("unknown mode `{other}`"))),
            };
            let analysis = analysis_config(s, &a.model, AnalysisConfig::default())?;
            let mut cfg = PowerLossConfig::new(s.get(a.k, "k", 10)?, mode, analysis.test, seed);
            cfg.analysis = analysis;
            if let Some(v) = s.opt::<String>(a.alphas.clone(), "alphas")? {
                cfg.alphas = parse_list(&v)?;
            }
            if let Some(v) = s.opt::<String>(a.effects.clone(), "effects")? {
                cfg.effects = parse_list(&v)?;
            }
            cfg.reps = s.get(a.reps, "reps", cfg.reps)?;
            cfg.n_f = s.get(a.n_female, "n-female", cfg.n_f)?;
            cfg.n_m = s.get(a.n_male, "n-male", cfg.n_m)?;
            emit(a.out.as_deref(), &max_power_loss_scan(&cfg)?.to_tsv())
        }
        Command::TabulateNull(a) => {
            let table = tabulate_snew_null(
                s.get(a.k, "k", 10)?,
                s.get(a.components, "components", 1)?,
                s.get(a.draws, "draws", 200_000)?,
                seed,
            )?;
            emit(a.out.as_deref(), &io::format_null_tables(&[table]))
        }
    }
}

fn parse_maf(s: &str) -> Outcome<MafLaw> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| parts.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| invalid(format!("bad MAF law `{s}`")));
    Ok(match parts[0] {
        "moderate" => MafLaw::MODERATE,
        "common" => MafLaw::COMMON,
        "rare" => MafLaw::RARE,
        "uniform" => MafLaw::Uniform { lo: num(1)?, hi: num(2)? },
        "beta" => MafLaw::Beta { a: num(1)?, b: num(2)? },
        _ => return Err(invalid(format!("bad MAF law `{s}`"))),
    })
}

fn triple(s: Option<String>) -> Outcome<[f64; 3]> {
    match s {
        None => Ok([0.0; 3]),
        Some(v) => {
            let xs = parse_list(&v)?;
            xs.try_into().map_err(|_| invalid(format!("expected three values f,d,m in `{v}`")))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
