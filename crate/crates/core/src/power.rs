//! Non-centrality parameters, noncentral χ² power, the normal-approximation
//! power-loss terms, and the simulated maximum power-loss scan.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, MultilocusTest};
use crate::dist::{chisq_quantile, chisq_tail, fisher_quantile_approx, normal_cdf};
use crate::linalg::solve_spd;
use crate::sim::{rejection_rate, simulate_ln_p, EffectModel, GridParam, MafLaw, PowerTest, SimConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlleleFreqPair {
    pub f_female: f64,
    pub f_male: f64,
}

impl AlleleFreqPair {
    pub fn new(f_female: f64, f_male: f64) -> Result<Self> {
        for f in [f_female, f_male] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidInput(format!("allele frequency {f} outside (0, 1)")));
            }
        }
        Ok(AlleleFreqPair { f_female, f_male })
    }

    pub fn d1(&self) -> f64 {
        self.f_female * (1.0 - self.f_female)
    }

    pub fn d2(&self) -> f64 {
        self.f_male * (1.0 - self.f_male)
    }
}

/// Asymptotic ratio ncp_XCI / ncp_noXCI = 1 + d₁d₂ / (2(d₁ + d₂)²) for a
/// variant under XCI tested with the XCI and the no-XCI additive codings.
pub fn ncp_ratio_xci(freqs: &AlleleFreqPair) -> f64 {
    let (d1, d2) = (freqs.d1(), freqs.d2());
    1.0 + d1 * d2 / (2.0 * (d1 + d2).powi(2))
}

/// Joint law of the XCI-coded genotypes assumed when building the moment
/// matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MomentModel {
    /// Variants independent within each sex: E(GᵢGⱼ) = ½f_f,i f_f,j + ½f_m,i f_m,j.
    #[default]
    WithinSexIndependent,
    /// Variants independent marginally: E(GᵢGⱼ) = E(Gᵢ)E(Gⱼ). This yields
    /// off-diagonal Schur entries (f_f,i − f_m,i)(f_m,j − f_f,j)/4.
    MarginalIndependent,
}

/// P₂₂ − P₂₁P₁₁⁻¹P₁₂ for the regressors (1, S | G₁..G_k) with equal sex
/// proportions, G XCI-coded (0, ½, 1 for females, 0/1 for males) under HWE.
pub fn moment_schur(freqs: &[AlleleFreqPair], model: MomentModel) -> Result<DMatrix<f64>> {
    let k = freqs.len();
    let mean = |f: &AlleleFreqPair| 0.5 * (f.f_female + f.f_male);
    let p11 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.5]);
    let p12 = DMatrix::from_fn(2, k, |r, j| if r == 0 { mean(&freqs[j]) } else { 0.5 * freqs[j].f_male });
    let p22 = DMatrix::from_fn(k, k, |i, j| {
        let (a, b) = (&freqs[i], &freqs[j]);
        if i == j {
            0.5 * (a.d1() / 2.0 + a.f_female * a.f_female) + 0.5 * a.f_male
        } else {
            match model {
                MomentModel::WithinSexIndependent => 0.5 * a.f_female * b.f_female + 0.5 * a.f_male * b.f_male,
                MomentModel::MarginalIndependent => mean(a) * mean(b),
            }
        }
    });
    let sol = solve_spd(&p11, &p12, "P11")?;
    Ok(p22 - p12.transpose() * sol)
}

/// (n/σ²)·β′[P₂₂ − P₂₁P₁₁⁻¹P₁₂]β under [`MomentModel::WithinSexIndependent`].
pub fn ncp_multilocus(freqs: &[AlleleFreqPair], betas: &[f64], n: usize, sigma2: f64) -> Result<f64> {
    ncp_multilocus_with(freqs, betas, n, sigma2, MomentModel::default())
}

pub fn ncp_multilocus_with(
    freqs: &[AlleleFreqPair],
    betas: &[f64],
    n: usize,
    sigma2: f64,
    model: MomentModel,
) -> Result<f64> {
    if freqs.len() != betas.len() {
        return Err(Error::LengthMismatch { expected: freqs.len(), found: betas.len() });
    }
    if n == 0 || !(sigma2 > 0.0) {
        return Err(Error::InvalidInput("n and sigma2 must be positive".into()));
    }
    let m = moment_schur(freqs, model)?;
    let b = DVector::from_column_slice(betas);
    Ok(n as f64 / sigma2 * (b.transpose() * m * &b)[(0, 0)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcpSpec {
    pub ncp: f64,
    pub df: f64,
    pub alpha: f64,
}

/// P(χ²(df, ncp) > χ²_{df, α}) with the exact central quantile.
pub fn power_noncentral(spec: &NcpSpec) -> f64 {
    let q = chisq_quantile(spec.alpha, spec.df, 0.0);
    chisq_tail(q, spec.df, spec.ncp)
}

/// How the central χ² quantiles in the power-loss terms are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum QuantileMode {
    #[default]
    Exact,
    /// ½(z_α + √(2df))².
    FisherApprox,
}

fn quantile(alpha: f64, df: f64, mode: QuantileMode) -> f64 {
    match mode {
        QuantileMode::Exact => chisq_quantile(alpha, df, 0.0),
        QuantileMode::FisherApprox => fisher_quantile_approx(df, alpha),
    }
}

/// Φ((q − (df + ncp))/√(2(df + 2ncp))), the normal approximation to the
/// noncentral χ² CDF at q.
pub fn normal_approx_cdf(q: f64, df: f64, ncp: f64) -> f64 {
    normal_cdf((q - (df + ncp)) / (2.0 * (df + 2.0 * ncp)).sqrt())
}

/// Approximate power of the true configuration minus that of the wrong one.
pub fn power_loss_normal_approx(
    df_wrong: f64,
    ncp_wrong: f64,
    df_true: f64,
    ncp_true: f64,
    alpha: f64,
    mode: QuantileMode,
) -> f64 {
    power_loss_at_quantiles(quantile(alpha, df_wrong, mode), df_wrong, ncp_wrong, quantile(alpha, df_true, mode), df_true, ncp_true)
}

/// As [`power_loss_normal_approx`] with the two critical values supplied.
pub fn power_loss_at_quantiles(q_wrong: f64, df_wrong: f64, ncp_wrong: f64, q_true: f64, df_true: f64, ncp_true: f64) -> f64 {
    normal_approx_cdf(q_wrong, df_wrong, ncp_wrong) - normal_approx_cdf(q_true, df_true, ncp_true)
}

/// Admissible b for the full-model power-loss limit at ncp = ck:
/// (√(2c+6) − √6, √(2c+2) − √2).
pub fn full_model_loss_interval(c: f64) -> (f64, f64) {
    ((2.0 * c + 6.0).sqrt() - 6f64.sqrt(), (2.0 * c + 2.0).sqrt() - 2f64.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    /// βᵢ = μ for every variant.
    FixedMu,
    /// βᵢ ~ N(0, τ²) per replicate.
    RandomTau,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub alpha: f64,
    pub loss: f64,
    pub argmax_effect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLossCurve {
    pub k: usize,
    pub mode: LossMode,
    pub test: MultilocusTest,
    /// Transformed full model against the correctly coded 1-df model.
    pub full: Vec<LossPoint>,
    /// CCT against the correctly coded 1-df model.
    pub cct: Vec<LossPoint>,
}

impl PowerLossCurve {
    /// Rows `comparison alpha loss argmax_effect`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("comparison\talpha\tloss\targmax_effect\n");
        for (name, pts) in [("full", &self.full), ("cct", &self.cct)] {
            for p in pts {
                s.push_str(&format!("{name}\t{:.5e}\t{:.5e}\t{:.5e}\n", p.alpha, p.loss, p.argmax_effect));
            }
        }
        s
    }
}

/// `points` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

/// Default effect grid: 30 log-spaced points on [0.005, 0.5].
pub fn default_effect_grid() -> Vec<f64> {
    log_grid(0.005, 0.5, 30)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLossConfig {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub effects: Vec<f64>,
    pub mode: LossMode,
    pub reps: usize,
    pub seed: u64,
    pub n_f: usize,
    pub n_m: usize,
    pub analysis: AnalysisConfig,
}

impl PowerLossConfig {
    pub fn new(k: usize, mode: LossMode, test: MultilocusTest, seed: u64) -> Self {
        PowerLossConfig {
            k,
            alphas: (2..=6).map(|e| 10f64.powi(-e)).collect(),
            effects: default_effect_grid(),
            mode,
            reps: 10_000,
            seed,
            n_f: 1000,
            n_m: 1000,
            analysis: AnalysisConfig { test, ..AnalysisConfig::default() },
        }
    }
}

/// Maximum over the effect grid of power(1-df XCI) − power(test), per α, for
/// the full model and for CCT. All variants are under XCI, so the XCI-coded
/// additive model is the true one. Zero effects carry no alternative and are
/// skipped; a loss below zero is reported as zero.
pub fn max_power_loss_scan(config: &PowerLossConfig) -> Result<PowerLossCurve> {
    if config.alphas.is_empty() || config.effects.is_empty() {
        return Err(Error::InvalidInput("alpha and effect grids must be nonempty".into()));
    }
    let effects: Vec<f64> = config.effects.iter().cloned().filter(|&e| e != 0.0).collect();
    let zero_curve = |_: ()| config.alphas.iter().map(|&a| LossPoint { alpha: a, loss: 0.0, argmax_effect: 0.0 }).collect::<Vec<_>>();
    if effects.is_empty() {
        return Ok(PowerLossCurve { k: config.k, mode: config.mode, test: config.analysis.test, full: zero_curve(()), cct: zero_curve(()) });
    }
    let mut sim = SimConfig::new(config.k, config.seed);
    sim.n_f = config.n_f;
    sim.n_m = config.n_m;
    sim.maf_law = MafLaw::MODERATE;
    sim.reps = config.reps;
    sim.alpha = config.alphas[0];
    sim.analysis = config.analysis.clone();
    let (effect, param) = match config.mode {
        LossMode::FixedMu => (EffectModel::Additive { mu: 0.0, tau: 0.0 }, GridParam::Mu),
        LossMode::RandomTau => (EffectModel::Additive { mu: 0.0, tau: 0.0 }, GridParam::Tau),
    };
    sim.effect = effect;
    sim.grid_param = Some(param);
    sim.grid = effects.clone();
    let tests = [PowerTest::AdditiveXci, PowerTest::Full, PowerTest::Cct];
    let (ln_p, _) = simulate_ln_p(&sim, &tests)?;
    let curve = |t: usize| {
        config
            .alphas
            .iter()
            .map(|&alpha| {
                let mut best = LossPoint { alpha, loss: 0.0, argmax_effect: effects[0] };
                let mut best_raw = f64::NEG_INFINITY;
                for (g, &e) in effects.iter().enumerate() {
                    let loss = rejection_rate(&ln_p[g][0], alpha) - rejection_rate(&ln_p[g][t], alpha);
                    if loss > best_raw {
                        best_raw = loss;
                        best = LossPoint { alpha, loss: loss.max(0.0), argmax_effect: e };
                    }
                }
                best
            })
            .collect::<Vec<_>>()
    };
    Ok(PowerLossCurve { k: config.k, mode: config.mode, test: config.analysis.test, full: curve(1), cct: curve(2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair(f: f64, m: f64) -> AlleleFreqPair {
        AlleleFreqPair::new(f, m).unwrap()
    }

    #[test]
    fn xci_ratio_examples() {
        assert_relative_eq!(ncp_ratio_xci(&pair(0.5, 0.5)), 1.125, max_relative = 1e-15);
        let r = ncp_ratio_xci(&pair(0.3, 0.2));
        assert_relative_eq!(r, 1.0 + 0.21 * 0.16 / (2.0 * 0.37f64.powi(2)), max_relative = 1e-15);
        assert!((r - 1.1227).abs() < 1e-4);
        assert!(ncp_ratio_xci(&pair(0.3, 1e-12)) - 1.0 < 1e-10);
    }

    #[test]
    fn single_variant_ncp() {
        let ncp = ncp_multilocus(&[pair(0.5, 0.5)], &[0.2], 100, 1.0).unwrap();
        assert_relative_eq!(ncp, 0.75, max_relative = 1e-12);
        assert_eq!(ncp_multilocus(&[pair(0.5, 0.5)], &[0.0], 100, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn schur_diagonal_and_off_diagonal() {
        let f = [pair(0.3, 0.1), pair(0.2, 0.45), pair(0.4, 0.4)];
        let w = moment_schur(&f, MomentModel::WithinSexIndependent).unwrap();
        let m = moment_schur(&f, MomentModel::MarginalIndependent).unwrap();
        for i in 0..3 {
            let diag = f[i].d1() / 4.0 + f[i].d2() / 2.0;
            assert_relative_eq!(w[(i, i)], diag, max_relative = 1e-12);
            assert_relative_eq!(m[(i, i)], diag, max_relative = 1e-12);
            for j in 0..3 {
                if i != j {
                    assert!(w[(i, j)].abs() < 1e-15);
                    let expected = (f[i].f_female - f[i].f_male) * (f[j].f_male - f[j].f_female) / 4.0;
                    assert!((m[(i, j)] - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn power_examples() {
        assert_relative_eq!(power_noncentral(&NcpSpec { ncp: 0.0, df: 3.0, alpha: 0.01 }), 0.01, max_relative = 1e-9);
        let p = power_noncentral(&NcpSpec { ncp: 7.85, df: 1.0, alpha: 0.05 });
        // (Z + √ncp)² > z²_{α/2} ⇔ Z > 1.96 − √ncp or Z < −1.96 − √ncp.
        let z = crate::dist::normal_upper_quantile(0.025);
        let oracle = 1.0 - normal_cdf(z - 7.85f64.sqrt()) + normal_cdf(-z - 7.85f64.sqrt());
        assert_relative_eq!(p, oracle, max_relative = 1e-9);
        assert!((p - 0.80).abs() < 0.01);
    }

    #[test]
    fn loss_vanishes_for_identical_configurations() {
        assert_eq!(power_loss_normal_approx(3.0, 5.0, 3.0, 5.0, 1e-3, QuantileMode::Exact), 0.0);
    }

    #[test]
    fn misspecified_coding_loss_grows_with_effect() {
        // ncp = c β² with c₁ > a > c₂ and critical value aβ².
        let (c1, c2, a) = (1.125, 1.0, 1.06);
        let losses: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&b: &f64| power_loss_at_quantiles(a * b * b, 1.0, c2 * b * b, a * b * b, 1.0, c1 * b * b))
            .collect();
        assert!(losses.windows(2).all(|w| w[1] > w[0]), "{losses:?}");
        let far = 1e4;
        assert!(power_loss_at_quantiles(a * far * far, 1.0, c2 * far * far, a * far * far, 1.0, c1 * far * far) > 0.999);
    }

    #[test]
    fn full_model_loss_grows_with_k() {
        let c = 1.0;
        let (lo, hi) = full_model_loss_interval(c);
        assert!(lo < hi);
        let b = 0.5 * (lo + hi);
        let losses: Vec<f64> = [10.0, 50.0, 200.0]
            .iter()
            .map(|&k: &f64| {
                let alpha = 1.0 - normal_cdf(b * k.sqrt());
                power_loss_normal_approx(3.0 * k, c * k, k, c * k, alpha, QuantileMode::FisherApprox)
            })
            .collect();
        assert!(losses.windows(2).all(|w| w[1] > w[0]), "{losses:?}");
    }

    #[test]
    fn zero_effect_grid_gives_zero_loss() {
        let mut cfg = PowerLossConfig::new(3, LossMode::RandomTau, MultilocusTest::SNew, 1);
        cfg.effects = vec![0.0];
        let r = max_power_loss_scan(&cfg).unwrap();
        assert!(r.cct.iter().chain(&r.full).all(|p| p.loss == 0.0));
    }

    proptest! {
        #[test]
        fn ratio_exceeds_one(f in 0.01..0.99f64, m in 0.01..0.99f64) {
            prop_assert!(ncp_ratio_xci(&pair(f, m)) > 1.0);
        }

        #[test]
        fn ncp_is_quadratic_and_permutation_invariant(
            v in proptest::collection::vec((0.05..0.95f64, 0.05..0.95f64, -1.0..1.0f64), 1..6),
            c in 0.1..5.0f64,
        ) {
            let f: Vec<AlleleFreqPair> = v.iter().map(|t| pair(t.0, t.1)).collect();
            let b: Vec<f64> = v.iter().map(|t| t.2).collect();
            let base = ncp_multilocus(&f, &b, 500, 2.0).unwrap();
            let bc: Vec<f64> = b.iter().map(|x| c * x).collect();
            prop_assert!((ncp_multilocus(&f, &bc, 500, 2.0).unwrap() - c * c * base).abs() <= 1e-9 * base.max(1.0));
            let fr: Vec<AlleleFreqPair> = f.iter().rev().cloned().collect();
            let br: Vec<f64> = b.iter().rev().cloned().collect();
            prop_assert!((ncp_multilocus(&fr, &br, 500, 2.0).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
