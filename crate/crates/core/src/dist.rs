//! Tail probabilities and quantiles for the null and alternative laws used by
//! the tests: (non)central χ², weighted sums of χ²₁ variables, χ² mixtures and
//! the standard Cauchy law.
//!
//! Linear-scale tails never return 0 for a positive true probability; they
//! floor at [`f64::MIN_POSITIVE`]. The `ln_*` variants keep full range.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const EIGEN_REL_TOL: f64 = 1e-10;

/// Clamp a log-probability to a linear value in `[MIN_POSITIVE, 1]`.
pub fn p_from_ln(ln_p: f64) -> f64 {
    if ln_p >= 0.0 {
        1.0
    } else if ln_p == f64::NEG_INFINITY {
        0.0
    } else {
        ln_p.exp().max(f64::MIN_POSITIVE)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln Q(a, x) for the regularized upper incomplete gamma function.
fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < a + 1.0 {
        return gamma_ur(a, x).ln();
    }
    // Modified Lentz evaluation of the continued fraction; valid for x > a + 1.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -x + a * x.ln() - ln_gamma(a) + h.ln()
}

/// ln P(χ²(df, ncp) > x). `df` may be any positive real.
pub fn ln_chisq_tail(x: f64, df: f64, ncp: f64) -> f64 {
    assert!(df > 0.0 && ncp >= 0.0, "chisq_tail needs df > 0 and ncp >= 0");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if ncp == 0.0 {
        return ln_gamma_q(df / 2.0, x / 2.0);
    }
    // Poisson mixture of central tails, summed outward from the Poisson mode.
    let half = ncp / 2.0;
    let ln_pois = |j: f64| -half + j * half.ln() - ln_gamma(j + 1.0);
    let term = |j: f64| ln_pois(j) + ln_gamma_q(df / 2.0 + j, x / 2.0);
    let j0 = half.floor();
    let mut total = term(j0);
    let mut j = j0 + 1.0;
    loop {
        let t = term(j);
        total = log_add(total, t);
        let lp = ln_pois(j);
        // Remaining Poisson mass beyond j bounds the rest of the sum.
        if j > half && lp - (1.0 - half / (j + 1.0)).ln() < total - 40.0 {
            break;
        }
        j += 1.0;
    }
    let mut j = j0 - 1.0;
    while j >= 0.0 {
        let t = term(j);
        total = log_add(total, t);
        if t < total - 40.0 {
            break;
        }
        j -= 1.0;
    }
    total.min(0.0)
}

/// P(χ²(df, ncp) > x); `ncp = 0` is the central law.
pub fn chisq_tail(x: f64, df: f64, ncp: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if ncp == 0.0 && x < df + 1.0 {
        return gamma_ur(df / 2.0, x / 2.0);
    }
    p_from_ln(ln_chisq_tail(x, df, ncp))
}

/// The `x` with `P(χ²(df, ncp) > x) = alpha`, by bisection on the log tail.
pub fn chisq_quantile(alpha: f64, df: f64, ncp: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let target = alpha.ln();
    let mut lo = 0.0;
    let mut hi = (df + ncp).max(1.0);
    while ln_chisq_tail(hi, df, ncp) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_chisq_tail(mid, df, ncp) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

/// Upper quantile z_α, so that P(Z > z_α) = α.
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    -std_normal().inverse_cdf(alpha)
}

/// Eigenvalues of a positive semidefinite middle matrix, sorted descending,
/// with numerical zeros removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    lambdas: Vec<f64>,
}

impl EigenSpectrum {
    /// Values down to `-EIGEN_REL_TOL * max(1, λ_max)` are clamped to zero;
    /// anything more negative is an error.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        let max = lambdas.iter().cloned().fold(0.0_f64, f64::max);
        let floor = -EIGEN_REL_TOL * max.max(1.0);
        if let Some(&bad) = lambdas.iter().find(|&&l| l < floor || l.is_nan()) {
            return Err(Error::NegativeEigenvalue(bad));
        }
        lambdas.retain(|&l| l > EIGEN_REL_TOL * max);
        lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(EigenSpectrum { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Union of several spectra.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a EigenSpectrum>) -> Result<Self> {
        EigenSpectrum::new(parts.into_iter().flat_map(|s| s.lambdas.iter().cloned()).collect())
    }
}

/// Parameters of the χ² law matched to Σ λᵢ χ²₁ by its first cumulants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiuParams {
    pub mean_q: f64,
    pub sd_q: f64,
    pub df: f64,
    pub ncp: f64,
    pub mean_x: f64,
    pub sd_x: f64,
}

/// Liu, Tang and Zhang moment matching for a central weighted sum.
pub fn liu_params(spectrum: &EigenSpectrum) -> Result<LiuParams> {
    let l = spectrum.lambdas();
    if l.is_empty() {
        return Err(Error::AllZeroSpectrum);
    }
    let c = |p: i32| l.iter().map(|x| x.powi(p)).sum::<f64>();
    let (c1, c2, c3, c4) = (c(1), c(2), c(3), c(4));
    let s1 = c3 / c2.powf(1.5);
    let s2 = c4 / (c2 * c2);
    let (a, ncp, df) = if s1 * s1 > s2 {
        let a = 1.0 / (s1 - (s1 * s1 - s2).sqrt());
        let d = s1 * a.powi(3) - a * a;
        (a, d, a * a - 2.0 * d)
    } else {
        (1.0 / s1, 0.0, 1.0 / (s1 * s1))
    };
    Ok(LiuParams {
        mean_q: c1,
        sd_q: (2.0 * c2).sqrt(),
        df,
        ncp,
        mean_x: df + ncp,
        sd_x: std::f64::consts::SQRT_2 * a,
    })
}

/// Method used for a weighted χ² tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailMethod {
    /// Imhof inversion of the characteristic function, Liu below
    /// [`INVERSION_FLOOR`] or when the quadrature does not converge.
    Auto,
    /// Numerical inversion of the characteristic function.
    Imhof,
    /// Four-cumulant moment matching.
    Liu,
    /// Closed form (one distinct eigenvalue).
    Exact,
}

/// Inverted tails below this are recomputed by moment matching: the
/// inversion has absolute, not relative, accuracy.
pub const INVERSION_FLOOR: f64 = 1e-7;

const IMHOF_TOL: f64 = 1e-10;
const IMHOF_TRUNCATION: f64 = 1e-9;
const IMHOF_BUDGET: usize = 500_000;

fn liu_ln_tail(q: f64, spectrum: &EigenSpectrum) -> Result<f64> {
    let p = liu_params(spectrum)?;
    let x = (q - p.mean_q) / p.sd_q * p.sd_x + p.mean_x;
    Ok(ln_chisq_tail(x, p.df, p.ncp))
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022935322010529225,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const GK_WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// (integral, error estimate) over [a, b].
fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_X[i]) + f(c + h * GK_X[i]);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Imhof's integral for P(Σ λᵢ χ²₁ > q); `None` when the quadrature budget
/// runs out. Eigenvalues must be positive.
fn imhof_tail(q: f64, lambdas: &[f64]) -> Option<f64> {
    // Scale so the largest eigenvalue is 1.
    let top = lambdas.iter().cloned().fold(0.0, f64::max);
    let l: Vec<f64> = lambdas.iter().map(|x| x / top).collect();
    let q = q / top;
    let integrand = |u: f64| {
        let mut theta = -q * u;
        let mut ln_rho = 0.0;
        for &x in &l {
            theta += (x * u).atan();
            ln_rho += (x * u).mul_add(x * u, 1.0).ln();
        }
        (0.5 * theta).sin() / (u * (0.25 * ln_rho).exp())
    };
    // |θ'(u)| / 2 bounds the local angular frequency of the integrand.
    let half_slope = |u: f64| 0.5 * (l.iter().map(|x| x / (x * x).mul_add(u * u, 1.0)).sum::<f64>() - q);
    let envelope = |u: f64| 1.0 / (u * (0.25 * l.iter().map(|x| (x * u).mul_add(x * u, 1.0).ln()).sum::<f64>()).exp());
    // Past `upper` the phase decreases at rate at least q/4, so integration
    // by parts bounds the remainder by 2 g(upper) / (q/4).
    let mut upper: f64 = 1.0;
    while -half_slope(upper) < 0.25 * q || 8.0 * envelope(upper) / q > IMHOF_TRUNCATION {
        upper *= 2.0;
        if upper > 1e15 {
            return None;
        }
    }
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut a = 0.0;
    while a < upper {
        if parts.len() == IMHOF_BUDGET {
            return None;
        }
        // The frequency on [a, ∞) is at most max(|θ'(a)|/2, q/2): half a period.
        let width = (std::f64::consts::PI / half_slope(a).abs().max(0.5 * q)).min(upper - a);
        let b = a + width;
        let (v, e) = gauss_kronrod(&integrand, a, b);
        parts.push((a, b, v, e));
        a = b;
    }
    let mut err: f64 = parts.iter().map(|p| p.3).sum();
    let mut budget = IMHOF_BUDGET / 10;
    while err > IMHOF_TOL {
        if budget == 0 {
            return None;
        }
        budget -= 1;
        let (worst, _) = parts.iter().enumerate().fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (a, b, _, e) = parts.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (v1, e1) = gauss_kronrod(&integrand, a, m);
        let (v2, e2) = gauss_kronrod(&integrand, m, b);
        err += e1 + e2 - e;
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
    let total: f64 = parts.iter().map(|p| p.2).sum();
    Some((0.5 + total / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// ln P(Σ λᵢ χ²₁ > q) with [`TailMethod::Auto`].
pub fn ln_weighted_chisq_tail(q: f64, spectrum: &EigenSpectrum) -> Result<f64> {
    Ok(ln_weighted_chisq_tail_with(q, spectrum, TailMethod::Auto)?.0)
}

/// ln P(Σ λᵢ χ²₁ > q) and the method that produced it. `Imhof` and `Liu`
/// force that method; a single distinct eigenvalue is always `Exact`.
pub fn ln_weighted_chisq_tail_with(q: f64, spectrum: &EigenSpectrum, method: TailMethod) -> Result<(f64, TailMethod)> {
    let l = spectrum.lambdas();
    if l.is_empty() {
        return Err(Error::AllZeroSpectrum);
    }
    if q <= 0.0 {
        return Ok((0.0, TailMethod::Exact));
    }
    let top = l[0].max(l[l.len() - 1]);
    if l.iter().all(|x| (x - top).abs() <= 1e-12 * top) {
        return Ok((ln_chisq_tail(q / top, l.len() as f64, 0.0), TailMethod::Exact));
    }
    match method {
        TailMethod::Liu => Ok((liu_ln_tail(q, spectrum)?, TailMethod::Liu)),
        TailMethod::Imhof | TailMethod::Exact => match imhof_tail(q, l) {
            Some(p) => Ok((p.ln(), TailMethod::Imhof)),
            None => Err(Error::NotConverged(IMHOF_BUDGET)),
        },
        TailMethod::Auto => match imhof_tail(q, l) {
            Some(p) if p >= INVERSION_FLOOR => Ok((p.ln(), TailMethod::Imhof)),
            _ => Ok((liu_ln_tail(q, spectrum)?, TailMethod::Liu)),
        },
    }
}

/// P(Σ λᵢ χ²₁ > q) with [`TailMethod::Auto`].
pub fn weighted_chisq_tail(q: f64, spectrum: &EigenSpectrum) -> Result<f64> {
    Ok(p_from_ln(ln_weighted_chisq_tail(q, spectrum)?))
}

/// Finite mixture of central χ² laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareMixture {
    components: Vec<(f64, u32)>,
}

impl ChiSquareMixture {
    pub fn new(components: Vec<(f64, u32)>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.is_empty()
            || (total - 1.0).abs() > 1e-12
            || components.iter().any(|&(w, df)| !(0.0..=1.0).contains(&w) || df == 0)
        {
            return Err(Error::InvalidInput(format!("invalid χ² mixture {components:?}")));
        }
        Ok(ChiSquareMixture { components })
    }

    /// 1:1 mixture of χ²(1) and χ²(2).
    pub fn one_to_one() -> Self {
        ChiSquareMixture { components: vec![(0.5, 1), (0.5, 2)] }
    }

    /// 1:3:3:1 mixture over χ²(3) .. χ²(6).
    pub fn one_three_three_one() -> Self {
        ChiSquareMixture { components: vec![(0.125, 3), (0.375, 4), (0.375, 5), (0.125, 6)] }
    }

    pub fn components(&self) -> &[(f64, u32)] {
        &self.components
    }
}

pub fn ln_mixture_tail(s: f64, mixture: &ChiSquareMixture) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    mixture
        .components
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &(w, df)| log_add(acc, w.ln() + ln_chisq_tail(s, df as f64, 0.0)))
        .min(0.0)
}

/// Σ wᵢ P(χ²(dfᵢ) > s).
pub fn mixture_tail(s: f64, mixture: &ChiSquareMixture) -> f64 {
    p_from_ln(ln_mixture_tail(s, mixture))
}

/// P(C > t) for a standard Cauchy variable.
pub fn cauchy_tail(t: f64) -> f64 {
    if t > 1e15 {
        1.0 / (std::f64::consts::PI * t)
    } else if t > 0.0 {
        (1.0 / t).atan() / std::f64::consts::PI
    } else {
        0.5 - t.atan() / std::f64::consts::PI
    }
}

pub fn ln_cauchy_tail(t: f64) -> f64 {
    if t > 1e15 {
        -std::f64::consts::PI.ln() - t.ln()
    } else {
        cauchy_tail(t).ln()
    }
}

/// Normal approximation to the upper-α χ²(k) quantile: ½(z_α + √(2k))².
pub fn fisher_quantile_approx(k: f64, alpha: f64) -> f64 {
    let z = normal_upper_quantile(alpha);
    0.5 * (z + (2.0 * k).sqrt()).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    // (Z + μ)² tail from two normal tails; independent of the gamma code path.
    fn one_df_tail_oracle(x: f64, ncp: f64) -> f64 {
        let mu = ncp.sqrt();
        let r = x.sqrt();
        (1.0 - normal_cdf(r - mu)) + normal_cdf(-r - mu)
    }

    #[test]
    fn central_one_df_matches_normal_relation() {
        assert_eq!(chisq_tail(0.0, 1.0, 0.0), 1.0);
        assert!((chisq_tail(3.841, 1.0, 0.0) - 0.05).abs() < 1e-4);
        for &x in &[0.1, 1.0, 3.841, 10.0, 30.0] {
            assert_relative_eq!(chisq_tail(x, 1.0, 0.0), one_df_tail_oracle(x, 0.0), max_relative = 1e-9);
        }
    }

    #[test]
    fn noncentral_one_df_matches_normal_relation() {
        for &(x, ncp) in &[(3.841, 4.0), (1.0, 0.5), (20.0, 7.85), (50.0, 30.0)] {
            assert_relative_eq!(chisq_tail(x, 1.0, ncp), one_df_tail_oracle(x, ncp), max_relative = 1e-9);
        }
    }

    #[test]
    fn log_tail_survives_underflow() {
        // ln P(χ²₁ > x) ≈ ln(2φ(√x)/√x) for large x (Mills ratio, leading term).
        let x: f64 = 2000.0;
        let approx = (2.0 / (2.0 * std::f64::consts::PI).sqrt()).ln() - x / 2.0 - 0.5 * x.ln();
        let ln_p = ln_chisq_tail(x, 1.0, 0.0);
        assert!((ln_p - approx).abs() < 1e-3, "{ln_p} vs {approx}");
        assert_eq!(chisq_tail(x, 1.0, 0.0), f64::MIN_POSITIVE);
    }

    #[test]
    fn quantile_inverts_tail() {
        assert_relative_eq!(chisq_quantile(0.05, 1.0, 0.0), 3.8414588206941285, max_relative = 1e-10);
        assert_relative_eq!(chisq_quantile(0.05, 50.0, 0.0), 67.5048065495412, max_relative = 1e-9);
        let q = chisq_quantile(1e-12, 30.0, 5.0);
        assert_relative_eq!(ln_chisq_tail(q, 30.0, 5.0), 1e-12_f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn single_and_equal_spectra_are_exact() {
        let one = EigenSpectrum::new(vec![1.0]).unwrap();
        let three = EigenSpectrum::new(vec![1.0, 1.0, 1.0]).unwrap();
        for &q in &[0.5, 2.0, 7.0, 15.0] {
            assert_relative_eq!(weighted_chisq_tail(q, &one).unwrap(), chisq_tail(q, 1.0, 0.0), max_relative = 1e-12);
            assert_relative_eq!(weighted_chisq_tail(q, &three).unwrap(), chisq_tail(q, 3.0, 0.0), max_relative = 1e-10);
        }
    }

    #[test]
    fn inversion_matches_paired_closed_form() {
        // Eigenvalues (a, a, b, b): a difference of two exponential tails.
        let (a, b) = (2.0, 0.5);
        let s = EigenSpectrum::new(vec![a, a, b, b]).unwrap();
        for q in [1.0, 5.0, 12.0, 30.0] {
            let exact = (a * (-q / (2.0 * a)).exp() - b * (-q / (2.0 * b)).exp()) / (a - b);
            let (ln_p, method) = ln_weighted_chisq_tail_with(q, &s, TailMethod::Imhof).unwrap();
            assert_eq!(method, TailMethod::Imhof);
            assert_abs_diff_eq!(ln_p.exp(), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn inversion_matches_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{ChiSquared, Distribution};
        let l = [2.0, 1.0, 0.5];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let chi = ChiSquared::new(1.0).unwrap();
        let draws = 1_000_000;
        let hits = (0..draws).filter(|_| l.iter().map(|x| x * chi.sample(&mut rng)).sum::<f64>() > 5.0).count();
        let mc = hits as f64 / draws as f64;
        let s = EigenSpectrum::new(l.to_vec()).unwrap();
        assert_abs_diff_eq!(weighted_chisq_tail(5.0, &s).unwrap(), mc, epsilon = 2e-3);
    }

    #[test]
    fn auto_switches_to_moment_matching_in_the_far_tail() {
        let s = EigenSpectrum::new(vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05]).unwrap();
        assert_eq!(ln_weighted_chisq_tail_with(5.0, &s, TailMethod::Auto).unwrap().1, TailMethod::Imhof);
        let (ln_p, method) = ln_weighted_chisq_tail_with(60.0, &s, TailMethod::Auto).unwrap();
        assert_eq!(method, TailMethod::Liu);
        assert!(ln_p < INVERSION_FLOOR.ln() && ln_p.is_finite());
        // Widely spread eigenvalues still converge; reference by conditioning
        // on the small component and integrating the χ²₁ tail.
        let wide = EigenSpectrum::new(vec![5.0, 1e-3]).unwrap();
        let (ln_p, method) = ln_weighted_chisq_tail_with(1.0, &wide, TailMethod::Imhof).unwrap();
        assert_eq!(method, TailMethod::Imhof);
        assert_abs_diff_eq!(ln_p.exp(), 0.6548824258838352, epsilon = 1e-9);
    }

    #[test]
    fn spectrum_clamps_noise_and_rejects_real_negatives() {
        let s = EigenSpectrum::new(vec![1.0, -1e-12, 2.0, 0.0]).unwrap();
        assert_eq!(s.lambdas(), &[2.0, 1.0]);
        assert!(matches!(EigenSpectrum::new(vec![1.0, -0.1]), Err(Error::NegativeEigenvalue(_))));
        let empty = EigenSpectrum::new(vec![0.0]).unwrap();
        assert_eq!(weighted_chisq_tail(1.0, &empty), Err(Error::AllZeroSpectrum));
    }

    #[test]
    fn mixtures() {
        let m = ChiSquareMixture::one_to_one();
        assert_eq!(mixture_tail(0.0, &m), 1.0);
        let direct = 0.5 * chisq_tail(4.0, 1.0, 0.0) + 0.5 * chisq_tail(4.0, 2.0, 0.0);
        assert_relative_eq!(mixture_tail(4.0, &m), direct, max_relative = 1e-12);
        assert!(ChiSquareMixture::new(vec![(0.5, 1), (0.4, 2)]).is_err());
    }

    #[test]
    fn cauchy_values() {
        assert_eq!(cauchy_tail(0.0), 0.5);
        assert_relative_eq!(cauchy_tail(1.0), 0.25, max_relative = 1e-15);
        assert_relative_eq!(cauchy_tail(9.765e26), 3.26e-28, max_relative = 0.01);
        assert_relative_eq!(cauchy_tail(-1.0), 0.75, max_relative = 1e-15);
    }

    #[test]
    fn fisher_approximation() {
        assert!((fisher_quantile_approx(1.0, 0.05) - 4.679).abs() < 1e-3);
        assert_relative_eq!(fisher_quantile_approx(7.0, 0.5), 7.0, max_relative = 1e-12);
        let approx = fisher_quantile_approx(50.0, 0.05);
        assert!((approx - 67.80).abs() < 0.01);
        assert!((approx - chisq_quantile(0.05, 50.0, 0.0)).abs() / 67.5 < 0.01);
    }

    proptest! {
        #[test]
        fn tail_is_monotone_and_bounded(x in 0.0f64..200.0, dx in 0.0f64..20.0, df in 1u32..40, ncp in 0.0f64..60.0) {
            let a = chisq_tail(x, df as f64, ncp);
            let b = chisq_tail(x + dx, df as f64, ncp);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a * (1.0 + 1e-12));
        }

        #[test]
        fn tail_is_nondecreasing_in_ncp(x in 0.1f64..100.0, df in 1u32..20, ncp in 0.0f64..40.0, d in 0.0f64..10.0) {
            let a = chisq_tail(x, df as f64, ncp);
            let b = chisq_tail(x, df as f64, ncp + d);
            prop_assert!(b >= a * (1.0 - 1e-10));
        }

        #[test]
        fn equal_unit_spectrum_matches_central(m in 1usize..12, frac in 0.0f64..1.0) {
            let q = frac * 5.0 * m as f64;
            let s = EigenSpectrum::new(vec![1.0; m]).unwrap();
            let w = weighted_chisq_tail(q, &s).unwrap();
            prop_assert!((w - chisq_tail(q, m as f64, 0.0)).abs() < 2e-3);
        }

        #[test]
        fn cauchy_tail_is_monotone(t in -1e6f64..1e6, dt in 0.0f64..1e3) {
            prop_assert!(cauchy_tail(t + dt) <= cauchy_tail(t));
        }
    }
}
