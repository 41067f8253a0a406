//! Fitting expectation value against code distance and extrapolating to infinite
//! distance.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
    All,
}

impl Parity {
    pub fn admits(self, d: usize) -> bool {
        match self {
            Parity::Odd => d % 2 == 1,
            Parity::Even => d % 2 == 0,
            Parity::All => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub d: usize,
    pub ev: f64,
    pub std_err: f64,
    pub n_shots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    pub points: Vec<DataPoint>,
    pub parity_filter: Parity,
    pub cutoff_d: usize,
}

impl DataSeries {
    pub fn new(points: Vec<DataPoint>, parity_filter: Parity, cutoff_d: usize) -> Result<Self> {
        if points.windows(2).any(|w| w[0].d >= w[1].d) {
            return Err(Error::Fit("distances must be strictly increasing".into()));
        }
        Ok(DataSeries { points, parity_filter, cutoff_d })
    }

    /// Points entering the fit: matching parity and `d ≤ cutoff_d`.
    pub fn fit_points(&self) -> Vec<DataPoint> {
        self.points.iter().copied().filter(|p| p.d <= self.cutoff_d && self.parity_filter.admits(p.d)).collect()
    }

    /// Points beyond the cutoff, kept for comparison only.
    pub fn reference_points(&self) -> Vec<DataPoint> {
        self.points.iter().copied().filter(|p| p.d > self.cutoff_d && self.parity_filter.admits(p.d)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    SingleExp,
    DoubleExp,
    Richardson,
}

impl Ansatz {
    pub fn num_terms(self) -> usize {
        match self {
            Ansatz::SingleExp => 1,
            Ansatz::DoubleExp => 2,
            Ansatz::Richardson => 0,
        }
    }
}

impl fmt::Display for Ansatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ansatz::SingleExp => "single_exp",
            Ansatz::DoubleExp => "double_exp",
            Ansatz::Richardson => "richardson",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    #[serde(with = "crate::jsonfloat")]
    pub b: f64,
    #[serde(with = "crate::jsonfloat")]
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub ansatz: Ansatz,
    #[serde(with = "crate::jsonfloat")]
    pub a: f64,
    pub terms: Vec<ExpTerm>,
    /// Covariance of `(A, B_1, C_1, B_2, C_2, …)`; empty for Richardson.
    #[serde(with = "crate::jsonfloat::matrix")]
    pub param_covariance: Vec<Vec<f64>>,
    #[serde(with = "crate::jsonfloat")]
    pub r2: f64,
    #[serde(with = "crate::jsonfloat")]
    pub extrapolated: f64,
    #[serde(with = "crate::jsonfloat::vec")]
    pub bootstrap_samples: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(with = "crate::jsonfloat")]
    pub chi2: f64,
}

impl FitResult {
    pub fn evaluate(&self, d: f64) -> f64 {
        model(self.a, &self.terms, d)
    }

    /// `(d, ev, std_err, fitted_value, residual)` rows for every point of the series
    /// that passes the parity filter.
    pub fn plot_rows(&self, series: &DataSeries) -> Vec<[f64; 5]> {
        series
            .points
            .iter()
            .filter(|p| series.parity_filter.admits(p.d))
            .map(|p| {
                let fitted = if self.ansatz == Ansatz::Richardson { self.extrapolated } else { self.evaluate(p.d as f64) };
                [p.d as f64, p.ev, p.std_err, fitted, p.ev - fitted]
            })
            .collect()
    }
}

fn model(a: f64, terms: &[ExpTerm], d: f64) -> f64 {
    a + terms.iter().map(|t| t.b * (-t.c * d).exp()).sum::<f64>()
}

/// Parameter vector used by the optimiser: `(A, B_1, ln C_1, B_2, ln C_2, …)`.
fn unpack(theta: &[f64]) -> (f64, Vec<ExpTerm>) {
    let terms = theta[1..].chunks(2).map(|t| ExpTerm { b: t[0], c: t[1].exp() }).collect();
    (theta[0], terms)
}

/// Model value and its gradient with respect to `(A, B_1, ln C_1, …)` at distance `d`.
pub fn ansatz_jacobian(theta: &[f64], d: f64) -> (f64, Vec<f64>) {
    let mut y = theta[0];
    let mut grad = vec![0.0; theta.len()];
    grad[0] = 1.0;
    for (i, t) in theta[1..].chunks(2).enumerate() {
        let (b, c) = (t[0], t[1].exp());
        let e = (-c * d).exp();
        y += b * e;
        grad[1 + 2 * i] = e;
        grad[2 + 2 * i] = -b * d * c * e;
    }
    (y, grad)
}

/// Standard error used for weighting. Points with no recorded spread fall back to the
/// binomial error at the rule-of-three rate `3/n`; points without a shot count get unit
/// weight.
pub fn effective_sigma(p: &DataPoint) -> f64 {
    if p.std_err > 0.0 {
        p.std_err
    } else if p.n_shots > 0 {
        let n = p.n_shots as f64;
        let q = (3.0 / n).min(0.5);
        2.0 * (q * (1.0 - q) / n).sqrt()
    } else {
        1.0
    }
}

const MAX_ITERATIONS: usize = 500;
const REL_TOL: f64 = 1e-10;

struct LmOutcome {
    theta: Vec<f64>,
    chi2: f64,
    iterations: usize,
    converged: bool,
}

fn residuals(theta: &[f64], data: &[(f64, f64, f64)]) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.len();
    let m = theta.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, m);
    for (k, &(d, y, s)) in data.iter().enumerate() {
        let (f, g) = ansatz_jacobian(theta, d);
        r[k] = (f - y) / s;
        for (c, gc) in g.iter().enumerate() {
            j[(k, c)] = gc / s;
        }
    }
    (r, j)
}

fn chi2_of(theta: &[f64], data: &[(f64, f64, f64)]) -> f64 {
    data.iter().map(|&(d, y, s)| ((ansatz_jacobian(theta, d).0 - y) / s).powi(2)).sum()
}

/// Solves the damped normal equations on the free parameters; fixed ones get a zero step.
fn damped_step(h: &DMatrix<f64>, g: &DVector<f64>, lambda: f64, free: &[usize]) -> Option<DVector<f64>> {
    let k = free.len();
    let mut a = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (i, &fi) in free.iter().enumerate() {
        for (j, &fj) in free.iter().enumerate() {
            a[(i, j)] = h[(fi, fj)];
        }
        a[(i, i)] += lambda * h[(fi, fi)].max(1e-12);
        rhs[i] = -g[fi];
    }
    let sol = a.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| a.lu().solve(&rhs))?;
    let mut step = DVector::zeros(h.nrows());
    for (i, &fi) in free.iter().enumerate() {
        step[fi] = sol[i];
    }
    Some(step)
}

fn levenberg_marquardt(mut theta: Vec<f64>, data: &[(f64, f64, f64)]) -> LmOutcome {
    let m = theta.len();
    let mut lambda = 1e-3;
    let mut chi2 = chi2_of(&theta, data);
    for iteration in 1..=MAX_ITERATIONS {
        if chi2 < 1e-28 {
            return LmOutcome { theta, chi2, iterations: iteration - 1, converged: true };
        }
        let (r, j) = residuals(&theta, data);
        let h = j.transpose() * &j;
        let g = j.transpose() * r;
        loop {
            let all: Vec<usize> = (0..m).collect();
            let Some(mut step) = damped_step(&h, &g, lambda, &all) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return LmOutcome { theta, chi2, iterations: iteration, converged: true };
                }
                continue;
            };
            // A pinned at a bound and pushed outward: drop it from this step.
            let a_next = theta[0] + step[0];
            if (theta[0] >= 1.0 && a_next > 1.0) || (theta[0] <= -1.0 && a_next < -1.0) {
                let free: Vec<usize> = (1..m).collect();
                match damped_step(&h, &g, lambda, &free) {
                    Some(s) => step = s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                }
            }
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            trial[0] = trial[0].clamp(-1.0, 1.0);
            let trial_chi2 = chi2_of(&trial, data);
            if trial_chi2.is_finite() && trial_chi2 < chi2 {
                let rel = (chi2 - trial_chi2) / chi2.max(f64::MIN_POSITIVE);
                theta = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < REL_TOL {
                    return LmOutcome { theta, chi2, iterations: iteration, converged: true };
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // no downhill step left at machine precision
                return LmOutcome { theta, chi2, iterations: iteration, converged: true };
            }
        }
    }
    LmOutcome { theta, chi2, iterations: MAX_ITERATIONS, converged: false }
}

/// Starting point: `A₀` is the EV at the largest fit distance, `C₀` the log-slope of
/// `|ev − A₀|` between the two smallest distances, `B₀ = ev(d_min) − A₀` split across
/// terms, and `C₂ = 2 C₁`.
fn initial_theta(points: &[DataPoint], n_terms: usize) -> Vec<f64> {
    let first = points[0];
    let second = points[1];
    let a0 = points[points.len() - 1].ev.clamp(-1.0, 1.0);
    let e1 = (first.ev - a0).abs();
    let e2 = (second.ev - a0).abs();
    let mut c0 = (e1 / e2).ln() / (second.d - first.d) as f64;
    if !c0.is_finite() || c0 <= 0.0 {
        c0 = 0.5;
    }
    let mut theta = vec![a0];
    for i in 0..n_terms {
        let c = c0 * (1 << i) as f64;
        theta.push((first.ev - a0) * (c * first.d as f64).exp() / n_terms as f64);
        theta.push(c.ln());
    }
    theta
}

/// Second starting point for two terms: a single exponential fitted to the upper half
/// of the distances supplies `A` and the slow term; the residual at the two smallest
/// distances supplies the fast term.
fn peeled_theta(points: &[DataPoint], data: &[(f64, f64, f64)]) -> Option<Vec<f64>> {
    let tail_start = (points.len() / 2).min(points.len() - 3);
    let tail = &points[tail_start..];
    let slow = levenberg_marquardt(initial_theta(tail, 1), &data[tail_start..]).theta;
    let (d1, d2) = (data[0].0, data[1].0);
    let r1 = data[0].1 - eval_theta(&slow, d1);
    let r2 = data[1].1 - eval_theta(&slow, d2);
    let c_slow = slow[2].exp();
    let mut c_fast = (r1.abs() / r2.abs()).ln() / (d2 - d1);
    if !c_fast.is_finite() || c_fast <= c_slow {
        c_fast = 2.0 * c_slow;
    }
    let theta = vec![slow[0], slow[1], slow[2], r1 * (c_fast * d1).exp(), c_fast.ln()];
    theta.iter().all(|v| v.is_finite()).then_some(theta)
}

fn eval_theta(theta: &[f64], d: f64) -> f64 {
    ansatz_jacobian(theta, d).0
}

/// Weighted least-squares fit of the chosen ansatz to the fit points of `series`.
pub fn lm_fit(series: &DataSeries, ansatz: Ansatz) -> Result<FitResult> {
    let points = series.fit_points();
    if ansatz == Ansatz::Richardson {
        let value = richardson_extrapolate(series)?;
        return Ok(FitResult {
            ansatz,
            a: value,
            terms: Vec::new(),
            param_covariance: Vec::new(),
            r2: f64::NAN,
            extrapolated: value,
            bootstrap_samples: Vec::new(),
            converged: true,
            iterations: 0,
            chi2: 0.0,
        });
    }
    let n_params = 1 + 2 * ansatz.num_terms();
    if points.len() < n_params {
        return Err(Error::Fit(format!(
            "{ansatz} needs at least {n_params} fit points, got {}",
            points.len()
        )));
    }
    let data: Vec<(f64, f64, f64)> = points.iter().map(|p| (p.d as f64, p.ev, effective_sigma(p))).collect();
    let mut out = levenberg_marquardt(initial_theta(&points, ansatz.num_terms()), &data);
    if ansatz == Ansatz::DoubleExp {
        if let Some(theta) = peeled_theta(&points, &data) {
            let alt = levenberg_marquardt(theta, &data);
            if alt.chi2 < out.chi2 {
                out = alt;
            }
        }
    }
    let (a, terms) = unpack(&out.theta);

    if ansatz == Ansatz::DoubleExp {
        let (c1, c2) = (terms[0].c, terms[1].c);
        if (c1 - c2).abs() <= 1e-6 * c1.max(c2).max(1.0) {
            return lm_fit(series, Ansatz::SingleExp);
        }
    }

    let mut fit = FitResult {
        ansatz,
        a,
        terms,
        param_covariance: covariance(&out.theta, &data),
        r2: 0.0,
        extrapolated: a,
        bootstrap_samples: Vec::new(),
        converged: out.converged,
        iterations: out.iterations,
        chi2: out.chi2,
    };
    fit.r2 = r2_score(series, &fit).unwrap_or(f64::NAN);
    Ok(fit)
}

/// `(JᵀJ)⁻¹` in the natural parameters `(A, B_1, C_1, …)`; NaN when singular.
fn covariance(theta: &[f64], data: &[(f64, f64, f64)]) -> Vec<Vec<f64>> {
    let m = theta.len();
    let (_, mut j) = residuals(theta, data);
    for i in (2..m).step_by(2) {
        let c = theta[i].exp();
        for k in 0..j.nrows() {
            j[(k, i)] /= c;
        }
    }
    let h = j.transpose() * j;
    match h.try_inverse() {
        Some(inv) => (0..m).map(|r| (0..m).map(|c| inv[(r, c)]).collect()).collect(),
        None => vec![vec![f64::NAN; m]; m],
    }
}

/// `Σ_k y_k Π_{i≠k} d_k / (d_k − d_i)` over the fit points.
pub fn richardson_extrapolate(series: &DataSeries) -> Result<f64> {
    let points = series.fit_points();
    if points.is_empty() {
        return Err(Error::Fit("no fit points".into()));
    }
    let mut total = 0.0;
    for (k, pk) in points.iter().enumerate() {
        let mut coef = 1.0;
        for (i, pi) in points.iter().enumerate() {
            if i == k {
                continue;
            }
            if pi.d == pk.d {
                return Err(Error::Fit(format!("duplicate distance {}", pk.d)));
            }
            coef *= pk.d as f64 / (pk.d as f64 - pi.d as f64);
        }
        total += coef * pk.ev;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    #[serde(with = "crate::jsonfloat::vec")]
    pub samples: Vec<f64>,
    #[serde(with = "crate::jsonfloat")]
    pub mean: f64,
    #[serde(with = "crate::jsonfloat")]
    pub std: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p16: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p84: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p2_5: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p97_5: f64,
}

/// Linear-interpolated percentile of sorted data, `q ∈ [0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BootstrapSummary {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let std = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let mut sorted = finite;
        sorted.sort_by(|a, b| a.total_cmp(b));
        BootstrapSummary {
            mean,
            std,
            p16: percentile(&sorted, 16.0),
            p84: percentile(&sorted, 84.0),
            p2_5: percentile(&sorted, 2.5),
            p97_5: percentile(&sorted, 97.5),
            samples,
        }
    }
}

/// Draws one resampled EV. The point is treated as the mean of `n_eff` ±1 outcomes with
/// `P(−1) = (1 − ev)/2`, where `n_eff` reproduces the recorded standard error (equal to
/// `n_shots` for direct estimates).
fn resample_point(p: &DataPoint, rng: &mut ChaCha8Rng) -> f64 {
    if p.std_err <= 0.0 {
        return p.ev;
    }
    let q = ((1.0 - p.ev) / 2.0).clamp(0.0, 1.0);
    if q == 0.0 || q == 1.0 {
        return p.ev;
    }
    let n_eff = (4.0 * q * (1.0 - q) / (p.std_err * p.std_err)).round().max(1.0) as u64;
    let k = Binomial::new(n_eff, q).expect("valid binomial").sample(rng);
    1.0 - 2.0 * k as f64 / n_eff as f64
}

/// Refits `trials` resampled copies of the series. Trial `t` uses ChaCha8 stream `t`
/// keyed by `seed`, so the result does not depend on scheduling.
pub fn bootstrap(series: &DataSeries, ansatz: Ansatz, trials: usize, seed: u64) -> BootstrapSummary {
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let mut resampled = series.clone();
            for p in resampled.points.iter_mut() {
                p.ev = resample_point(p, &mut rng);
            }
            lm_fit(&resampled, ansatz).map_or(f64::NAN, |f| f.extrapolated)
        })
        .collect();
    BootstrapSummary::from_samples(samples)
}

/// `1 − SS_res/SS_tot` over the fit points.
pub fn r2_score(series: &DataSeries, fit: &FitResult) -> Result<f64> {
    let points = series.fit_points();
    if points.len() < 2 {
        return Err(Error::Fit("R² needs at least two fit points".into()));
    }
    let mean = points.iter().map(|p| p.ev).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.ev - mean).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.ev - fit.evaluate(p.d as f64)).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { Ok(1.0) } else { Err(Error::Fit("data has zero variance".into())) };
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Line `log₁₀|ev − true_ev| = a + m·d` through the fit points.
pub fn error_line(series: &DataSeries, true_ev: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        series.fit_points().iter().map(|p| (p.d as f64, (p.ev - true_ev).abs().log10())).collect();
    if pts.len() < 2 {
        return Err(Error::Fit("error line needs at least two fit points".into()));
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Fit("a fit point has zero error".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let m = sxy / sxx;
    Ok((my - m * mx, m))
}

/// Distance at which the error line reaches `|ide_error|`.
pub fn effective_distance(series: &DataSeries, ide_error: f64, true_ev: f64) -> Result<f64> {
    let (a, m) = error_line(series, true_ev)?;
    if m >= 0.0 {
        return Err(Error::Fit(format!("error line slope {m} is not negative; d_eff undefined")));
    }
    Ok((ide_error.abs().log10() - a) / m)
}

/// `|E_d − E*| / |E_ext − E*|`. A zero denominator gives `+∞` (or 1 when the
/// numerator is also zero).
pub fn improvement_ratio(e_d: f64, e_ext: f64, e_star: f64) -> f64 {
    let num = (e_d - e_star).abs();
    let den = (e_ext - e_star).abs();
    if den == 0.0 {
        return if num == 0.0 { 1.0 } else { f64::INFINITY };
    }
    num / den
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceSavings {
    pub delta_d: f64,
    pub qubit_ratio: f64,
}

/// Distance gained from an LER reduction `f` at suppression factor `Λ` per distance
/// step of two, and the matching reduction in qubit count from the baseline distance.
pub fn resource_savings(lambda_factor: f64, f: f64, baseline_d: usize) -> Result<ResourceSavings> {
    if !(lambda_factor > 1.0) {
        return Err(Error::InvalidParameter(format!("Λ must exceed 1, got {lambda_factor}")));
    }
    if !(f >= 1.0) {
        return Err(Error::InvalidParameter(format!("f must be at least 1, got {f}")));
    }
    let delta_d = 2.0 * f.ln() / lambda_factor.ln();
    let d = baseline_d as f64;
    Ok(ResourceSavings { delta_d, qubit_ratio: (d + delta_d).powi(2) / (d * d) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exact_series(a: f64, terms: &[ExpTerm], ds: &[usize]) -> DataSeries {
        let points = ds.iter().map(|&d| DataPoint { d, ev: model(a, terms, d as f64), std_err: 0.0, n_shots: 0 }).collect();
        DataSeries::new(points, Parity::All, usize::MAX).unwrap()
    }

    #[test]
    fn single_exp_recovery() {
        let s = exact_series(0.7, &[ExpTerm { b: 0.1, c: 0.5 }], &[3, 5, 7, 9, 11]);
        let fit = lm_fit(&s, Ansatz::SingleExp).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.a, 0.7, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.terms[0].c, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn a_is_clamped() {
        // data pointing above +1
        let points = [3usize, 5, 7, 9]
            .iter()
            .map(|&d| DataPoint { d, ev: 1.2 - 0.5 * (-0.3 * d as f64).exp(), std_err: 0.01, n_shots: 0 })
            .collect();
        let s = DataSeries::new(points, Parity::All, 9).unwrap();
        let fit = lm_fit(&s, Ansatz::SingleExp).unwrap();
        assert!(fit.a <= 1.0 && fit.a >= -1.0);
        assert_abs_diff_eq!(fit.a, 1.0);
    }

    #[test]
    fn insufficient_points() {
        let s = exact_series(0.5, &[ExpTerm { b: 0.1, c: 0.5 }], &[3, 5, 7, 9]);
        assert!(matches!(lm_fit(&s, Ansatz::DoubleExp), Err(Error::Fit(_))));
    }

    #[test]
    fn richardson_examples() {
        let s = exact_series(0.3, &[], &[7]);
        assert_eq!(richardson_extrapolate(&s).unwrap(), 0.3);
        let pts = vec![
            DataPoint { d: 3, ev: 0.8, std_err: 0.0, n_shots: 0 },
            DataPoint { d: 5, ev: 0.9, std_err: 0.0, n_shots: 0 },
        ];
        let s = DataSeries::new(pts, Parity::Odd, 5).unwrap();
        assert_abs_diff_eq!(richardson_extrapolate(&s).unwrap(), 2.5 * 0.9 - 1.5 * 0.8, epsilon = 1e-14);
        let s = exact_series(-0.42, &[], &[2, 3, 5, 8, 13]);
        assert_abs_diff_eq!(richardson_extrapolate(&s).unwrap(), -0.42, epsilon = 1e-12);
    }

    #[test]
    fn r2_of_mean_is_zero() {
        let s = exact_series(0.5, &[ExpTerm { b: 0.2, c: 0.4 }], &[3, 5, 7]);
        let mean = s.points.iter().map(|p| p.ev).sum::<f64>() / 3.0;
        let flat = FitResult {
            ansatz: Ansatz::SingleExp,
            a: mean,
            terms: vec![ExpTerm { b: 0.0, c: 1.0 }],
            param_covariance: vec![],
            r2: 0.0,
            extrapolated: mean,
            bootstrap_samples: vec![],
            converged: true,
            iterations: 0,
            chi2: 0.0,
        };
        assert_abs_diff_eq!(r2_score(&s, &flat).unwrap(), 0.0, epsilon = 1e-12);
        let c = exact_series(0.5, &[], &[3, 5]);
        assert!(r2_score(&c, &flat).is_err());
    }

    #[test]
    fn effective_distance_examples() {
        // log10 error = 1 − 0.5 d
        let pts = [3usize, 5, 7, 9]
            .iter()
            .map(|&d| DataPoint { d, ev: 1.0 - 10f64.powf(1.0 - 0.5 * d as f64), std_err: 0.0, n_shots: 0 })
            .collect();
        let s = DataSeries::new(pts, Parity::Odd, 9).unwrap();
        let at_cutoff = 10f64.powf(1.0 - 4.5);
        assert_abs_diff_eq!(effective_distance(&s, at_cutoff, 1.0).unwrap(), 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(effective_distance(&s, at_cutoff / 10.0, 1.0).unwrap(), 11.0, epsilon = 1e-9);
        let rising = exact_series(0.0, &[ExpTerm { b: 0.01, c: -0.2 }], &[3, 5, 7]);
        assert!(effective_distance(&rising, 0.1, 0.0).is_err());
    }

    #[test]
    fn improvement_ratio_examples() {
        assert_eq!(improvement_ratio(0.9, 0.9, 1.0), 1.0);
        assert_abs_diff_eq!(improvement_ratio(0.99, 0.999, 1.0), 10.0, epsilon = 1e-9);
        assert_eq!(improvement_ratio(1.0, 0.999, 1.0), 0.0);
        assert_eq!(improvement_ratio(0.9, 1.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn resource_savings_examples() {
        let r = resource_savings(10.0, 100.0, 9).unwrap();
        assert_abs_diff_eq!(r.delta_d, 4.0, epsilon = 1e-12);
        assert_eq!(format!("{:.2}", r.qubit_ratio), "2.09");
        let r = resource_savings(3.0, 1.0, 9).unwrap();
        assert_eq!((r.delta_d, r.qubit_ratio), (0.0, 1.0));
        assert!(resource_savings(1.0, 10.0, 9).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic_and_degenerate_without_noise() {
        let s = exact_series(0.7, &[ExpTerm { b: 0.1, c: 0.5 }], &[3, 5, 7, 9, 11]);
        let b = bootstrap(&s, Ansatz::SingleExp, 20, 1);
        assert!(b.samples.iter().all(|v| (v - 0.7).abs() < 1e-6));
        let mut noisy = s.clone();
        for p in noisy.points.iter_mut() {
            p.std_err = 1e-3;
        }
        let x = bootstrap(&noisy, Ansatz::SingleExp, 50, 9);
        let y = bootstrap(&noisy, Ansatz::SingleExp, 50, 9);
        assert_eq!(x.samples, y.samples);
        assert!(x.std > 0.0);
    }

    #[test]
    fn plot_rows_cover_reference_points() {
        let s = DataSeries::new(
            [3usize, 4, 5, 7, 9].iter().map(|&d| DataPoint { d, ev: 1.0 - 0.3 * (-0.4 * d as f64).exp(), std_err: 0.0, n_shots: 0 }).collect(),
            Parity::Odd,
            7,
        )
        .unwrap();
        assert_eq!(s.fit_points().len(), 3);
        assert_eq!(s.reference_points().len(), 1);
        let fit = lm_fit(&s, Ansatz::SingleExp).unwrap();
        let rows = fit.plot_rows(&s);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r[4].abs() < 1e-6));
    }
}
