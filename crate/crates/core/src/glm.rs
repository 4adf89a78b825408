//! Generalized linear models fitted by Fisher scoring, and the Wald, Score and
//! likelihood-ratio statistics for a block of coefficients.
//!
//! All three links are canonical, so the linear predictor is the natural
//! parameter θ and the working weights equal the variance function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::chisq_tail;
use crate::linalg::{independent_columns, inverse_spd, select_columns, solve_spd};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkFamily {
    /// Gaussian response, g(μ) = μ.
    Identity,
    /// Bernoulli response, g(μ) = log(μ / (1 − μ)).
    Logit,
    /// Poisson response, g(μ) = log μ.
    Log,
}

impl LinkFamily {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            LinkFamily::Identity => mu,
            LinkFamily::Logit => (mu / (1.0 - mu)).ln(),
            LinkFamily::Log => mu.ln(),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            LinkFamily::Identity => eta,
            LinkFamily::Logit => 1.0 / (1.0 + (-eta).exp()),
            LinkFamily::Log => eta.exp(),
        }
    }

    /// g'(μ).
    pub fn link_derivative(self, mu: f64) -> f64 {
        match self {
            LinkFamily::Identity => 1.0,
            LinkFamily::Logit => 1.0 / (mu * (1.0 - mu)),
            LinkFamily::Log => 1.0 / mu,
        }
    }

    /// V(μ) = Var(Y) / φ.
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            LinkFamily::Identity => 1.0,
            LinkFamily::Logit => mu * (1.0 - mu),
            LinkFamily::Log => mu,
        }
    }

    /// Cumulant function b(θ).
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            LinkFamily::Identity => 0.5 * theta * theta,
            LinkFamily::Logit => {
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
            LinkFamily::Log => theta.exp(),
        }
    }

    /// c(y, φ) in the exponential-family density.
    pub fn log_partition_offset(self, y: f64, phi: f64) -> f64 {
        match self {
            LinkFamily::Identity => -y * y / (2.0 * phi) - 0.5 * (2.0 * std::f64::consts::PI * phi).ln(),
            LinkFamily::Logit => 0.0,
            LinkFamily::Log => -statrs::function::gamma::ln_gamma(y + 1.0),
        }
    }

    pub fn in_support(self, y: f64) -> bool {
        match self {
            LinkFamily::Identity => y.is_finite(),
            LinkFamily::Logit => y == 0.0 || y == 1.0,
            LinkFamily::Log => y >= 0.0 && y.fract() == 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlmFit {
    pub family: LinkFamily,
    /// Design as supplied (all columns).
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    /// Indices of the design columns kept after rank filtering.
    pub retained: Vec<usize>,
    /// β̂ over all design columns; dropped columns hold 0.
    pub coefficients: DVector<f64>,
    /// X′W(θ̂)X over the retained columns.
    pub information: DMatrix<f64>,
    /// Pearson estimator (1/n) Σ (y − μ̂)² / V(μ̂).
    pub dispersion: f64,
    /// μ̂.
    pub fitted: DVector<f64>,
    pub linear_predictor: DVector<f64>,
    pub working_weights: DVector<f64>,
    pub working_response: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl GlmFit {
    pub fn n(&self) -> usize {
        self.response.len()
    }

    /// Response residuals y − μ̂.
    pub fn residuals(&self) -> DVector<f64> {
        &self.response - &self.fitted
    }

    /// Σ [y θ − b(θ)] / φ + c(y, φ).
    pub fn log_likelihood(&self, phi: f64) -> f64 {
        self.response
            .iter()
            .zip(self.linear_predictor.iter())
            .map(|(&y, &t)| (y * t - self.family.cumulant(t)) / phi + self.family.log_partition_offset(y, phi))
            .sum()
    }
}

/// Fisher scoring from slopes 0 and intercept g(ȳ). A column counts as an
/// intercept when every entry equals 1.
pub fn irls_fit(x: &DMatrix<f64>, y: &DVector<f64>, family: LinkFamily, tol: f64, max_iter: usize) -> Result<GlmFit> {
    let ybar = y.mean();
    let g0 = family.link(ybar);
    if !g0.is_finite() {
        return Err(if family == LinkFamily::Logit { Error::Separation } else { Error::InvalidInput("response mean outside link domain".into()) });
    }
    let start = DVector::from_fn(x.ncols(), |j, _| if x.column(j).iter().all(|&v| v == 1.0) { g0 } else { 0.0 });
    irls_fit_from(x, y, family, &start, tol, max_iter)
}

/// Fisher scoring from an explicit starting β.
pub fn irls_fit_from(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: LinkFamily,
    start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<GlmFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: y.len() });
    }
    if start.len() != x.ncols() {
        return Err(Error::LengthMismatch { expected: x.ncols(), found: start.len() });
    }
    if let Some(bad) = y.iter().find(|&&v| !family.in_support(v)) {
        return Err(Error::InvalidInput(format!("response {bad} outside the {family:?} support")));
    }
    let retained = independent_columns(x);
    if retained.is_empty() {
        return Err(Error::Singular("design has no usable column"));
    }
    if retained.len() < x.ncols() {
        log::warn!("dropping {} collinear design column(s)", x.ncols() - retained.len());
    }
    let xr = select_columns(x, &retained);
    let mut beta = DVector::from_fn(retained.len(), |j, _| start[retained[j]]);
    let mut eta = &xr * &beta;
    let mut mu = eta.map(|e| family.inverse_link(e));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let w = mu.map(|m| 1.0 / (family.variance(m) * family.link_derivative(m).powi(2)));
        let z = DVector::from_fn(n, |i, _| eta[i] + family.link_derivative(mu[i]) * (y[i] - mu[i]));
        let xtw = weighted_transpose(&xr, &w);
        let info = &xtw * &xr;
        let rhs = DMatrix::from_column_slice(n, 1, z.as_slice());
        let new = solve_spd(&info, &(&xtw * rhs), "X'WX")?.column(0).into_owned();
        let delta = (&new - &beta).amax();
        beta = new;
        eta = &xr * &beta;
        mu = eta.map(|e| family.inverse_link(e));
        if !delta.is_finite() {
            return Err(Error::NotConverged(iterations));
        }
        if delta < tol {
            converged = true;
            break;
        }
    }
    if family == LinkFamily::Logit && mu.iter().any(|&m| !(1e-12..=1.0 - 1e-12).contains(&m)) {
        return Err(Error::Separation);
    }
    if !converged {
        return Err(Error::NotConverged(iterations));
    }
    let w = mu.map(|m| 1.0 / (family.variance(m) * family.link_derivative(m).powi(2)));
    let z = DVector::from_fn(n, |i, _| eta[i] + family.link_derivative(mu[i]) * (y[i] - mu[i]));
    let information = weighted_transpose(&xr, &w) * &xr;
    let dispersion = (0..n).map(|i| (y[i] - mu[i]).powi(2) / family.variance(mu[i])).sum::<f64>() / n as f64;
    let mut coefficients = DVector::zeros(x.ncols());
    for (k, &j) in retained.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    Ok(GlmFit {
        family,
        design: x.clone(),
        response: y.clone(),
        retained,
        coefficients,
        information,
        dispersion,
        fitted: mu,
        linear_predictor: eta,
        working_weights: w,
        working_response: z,
        converged,
        iterations,
    })
}

/// X′ diag(w).
fn weighted_transpose(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut t = x.transpose();
    for (i, mut col) in t.column_iter_mut().enumerate() {
        col *= w[i];
    }
    t
}

/// (n_f φ̂_f + n_m φ̂_m) / (n_f + n_m).
pub fn pooled_dispersion(fit_f: &GlmFit, fit_m: &GlmFit) -> f64 {
    let (nf, nm) = (fit_f.n() as f64, fit_m.n() as f64);
    (nf * fit_f.dispersion + nm * fit_m.dispersion) / (nf + nm)
}

/// Selection of tested coefficients, L = (0 I).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContrastMatrix {
    tested: Vec<usize>,
}

impl ContrastMatrix {
    pub fn select(tested: Vec<usize>) -> Result<Self> {
        let mut sorted = tested.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != tested.len() || tested.is_empty() {
            return Err(Error::InvalidInput("contrast must select distinct coefficients".into()));
        }
        Ok(ContrastMatrix { tested })
    }

    pub fn tested(&self) -> &[usize] {
        &self.tested
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    Wald,
    Score,
    Lrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Wald, Score or LRT statistic for the coefficients selected by `l`, with
/// the dispersion `phi` plugged into every term. `fit_null` must be the fit of
/// the full design with the tested columns removed.
pub fn joint_test(fit_full: &GlmFit, fit_null: &GlmFit, l: &ContrastMatrix, kind: TestKind, phi: f64) -> Result<JointTest> {
    if !(phi > 0.0) {
        return Err(Error::DispersionZero);
    }
    let tested: Vec<usize> = l.tested().iter().cloned().filter(|j| fit_full.retained.contains(j)).collect();
    let df = tested.len();
    if df == 0 {
        return Err(Error::Singular("no tested column survives rank filtering"));
    }
    let statistic = match kind {
        TestKind::Wald => {
            let pos: Vec<usize> = tested.iter().map(|j| fit_full.retained.iter().position(|r| r == j).unwrap()).collect();
            let cov = inverse_spd(&fit_full.information, "X'WX")?;
            let sub = DMatrix::from_fn(df, df, |a, b| cov[(pos[a], pos[b])]);
            let b = DVector::from_fn(df, |a, _| fit_full.coefficients[tested[a]]);
            let rhs = DMatrix::from_column_slice(df, 1, b.as_slice());
            let sol = solve_spd(&sub, &rhs, "Wald middle matrix")?;
            b.dot(&sol.column(0)) / phi
        }
        TestKind::Score => {
            let xt = select_columns(&fit_full.design, &tested);
            let x0 = select_columns(&fit_null.design, &fit_null.retained);
            let fam = fit_null.family;
            let mu = &fit_null.fitted;
            // Score contributions (y − μ)/(V g').
            let s = DVector::from_fn(mu.len(), |i, _| {
                (fit_null.response[i] - mu[i]) / (fam.variance(mu[i]) * fam.link_derivative(mu[i]))
            });
            let w = &fit_null.working_weights;
            let u = xt.transpose() * &s;
            let x0tw = weighted_transpose(&x0, w);
            let proj = solve_spd(&(&x0tw * &x0), &(&x0tw * &xt), "null information")?;
            let r = &xt - &x0 * proj;
            let mid = weighted_transpose(&r, w) * &r;
            let rhs = DMatrix::from_column_slice(df, 1, u.as_slice());
            let sol = solve_spd(&mid, &rhs, "score middle matrix")?;
            u.dot(&sol.column(0)) / phi
        }
        TestKind::Lrt => {
            let fam = fit_full.family;
            let y = &fit_full.response;
            let th = &fit_full.linear_predictor;
            let tn = &fit_null.linear_predictor;
            let dev: f64 = (0..y.len())
                .map(|i| y[i] * (th[i] - tn[i]) - (fam.cumulant(th[i]) - fam.cumulant(tn[i])))
                .sum();
            2.0 * dev / phi
        }
    };
    Ok(JointTest { statistic, df, p_value: chisq_tail(statistic, df as f64, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) });
        let eta = DVector::from_fn(n, |i, _| -0.3 + 0.8 * x[(i, 1)] - 0.5 * x[(i, 2)]);
        let yl = eta.map(|e| e + rng.sample::<f64, _>(StandardNormal));
        let yb = eta.map(|e| if rng.random::<f64>() < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 });
        (x, yl, yb)
    }

    #[test]
    fn identity_matches_normal_equations() {
        let (x, y, _) = toy(120, 1);
        let fit = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let xtx = x.transpose() * &x;
        let ols = xtx.clone().cholesky().unwrap().solve(&(x.transpose() * &y));
        for j in 0..3 {
            assert_relative_eq!(fit.coefficients[j], ols[j], epsilon = 1e-10);
        }
        let rss = (&y - &x * &ols).norm_squared();
        assert_relative_eq!(fit.dispersion, rss / 120.0, max_relative = 1e-10);
    }

    #[test]
    fn constant_response_intercept_only() {
        let x = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::from_element(5, 2.5);
        let fit = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.5, max_relative = 1e-14);
        assert!(fit.dispersion < 1e-28);
    }

    // Plain Newton–Raphson on the Bernoulli log-likelihood.
    fn newton_logit(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut b = DVector::zeros(x.ncols());
        for _ in 0..50 {
            let p = (x * &b).map(|e| 1.0 / (1.0 + (-e).exp()));
            let grad = x.transpose() * (y - &p);
            let mut h = DMatrix::zeros(x.ncols(), x.ncols());
            for i in 0..x.nrows() {
                let r = x.row(i);
                h += r.transpose() * r * (p[i] * (1.0 - p[i]));
            }
            b += h.lu().solve(&grad).unwrap();
        }
        b
    }

    #[test]
    fn logit_matches_newton_oracle() {
        let (x, _, y) = toy(400, 2);
        let fit = irls_fit(&x, &y, LinkFamily::Logit, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let oracle = newton_logit(&x, &y);
        for j in 0..3 {
            assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn collinear_column_is_dropped() {
        let (mut x, y, _) = toy(50, 3);
        x = x.insert_column(3, 0.0);
        for i in 0..50 {
            x[(i, 3)] = 2.0 * x[(i, 1)];
        }
        let fit = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(fit.retained, vec![0, 1, 2]);
        assert_eq!(fit.coefficients[3], 0.0);
    }

    #[test]
    fn separation_is_reported() {
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let r = irls_fit(&x, &y, LinkFamily::Logit, DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(matches!(r, Err(Error::Separation) | Err(Error::NotConverged(_))));
    }

    #[test]
    fn pooled_dispersion_weights_by_size() {
        let (x, y, _) = toy(100, 4);
        let mut a = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let (x2, y2, _) = toy(300, 5);
        let mut b = irls_fit(&x2, &y2, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        a.dispersion = 1.0;
        b.dispersion = 2.0;
        assert_relative_eq!(pooled_dispersion(&a, &b), 1.75, max_relative = 1e-15);
        b.dispersion = 1.0;
        assert_eq!(pooled_dispersion(&a, &b), 1.0);
    }

    #[test]
    fn three_statistics_agree_for_linear_model() {
        let (x, y, _) = toy(200, 6);
        let full = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let x0 = x.columns(0, 1).into_owned();
        let null = irls_fit(&x0, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let l = ContrastMatrix::select(vec![1, 2]).unwrap();
        let phi = 0.9;
        let w = joint_test(&full, &null, &l, TestKind::Wald, phi).unwrap().statistic;
        let s = joint_test(&full, &null, &l, TestKind::Score, phi).unwrap().statistic;
        let r = joint_test(&full, &null, &l, TestKind::Lrt, phi).unwrap().statistic;
        assert_relative_eq!(w, s, max_relative = 1e-8);
        assert_relative_eq!(w, r, max_relative = 1e-8);
        // Oracle: (RSS0 − RSS1)/φ.
        let oracle = ((&y - &null.fitted).norm_squared() - (&y - &full.fitted).norm_squared()) / phi;
        assert_relative_eq!(w, oracle, max_relative = 1e-8);
    }

    #[test]
    fn score_vanishes_at_null_fit() {
        let (x, _, _) = toy(60, 7);
        let x0 = x.columns(0, 1).into_owned();
        let y = DVector::from_element(60, 1.5);
        let null = irls_fit(&x0, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let full = irls_fit(&x, &y, LinkFamily::Identity, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let l = ContrastMatrix::select(vec![1, 2]).unwrap();
        let s = joint_test(&full, &null, &l, TestKind::Score, 1.0).unwrap();
        assert!(s.statistic.abs() < 1e-20);
        assert_eq!(s.p_value, 1.0);
    }
}
