//! Confidence intervals, threshold fits and the closed-form percolation limits.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PointEstimate;
use crate::damage::Scheme;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{stream, Stage};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Fraction of missing checks at which the damage clusters percolate.
pub const PERCOLATION_BOND_FRACTION: f64 = 0.249;

/// Wilson score interval for `failures` out of `trials`.
pub fn wilson_interval<T: Real>(failures: u64, trials: u64, z: T) -> (T, T) {
    if trials == 0 {
        return (T::zero(), T::one());
    }
    let n = T::of(trials as f64);
    let p = T::of(failures as f64) / n;
    let z2 = z * z;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let denom = T::one() + z2 / n;
    let center = (p + z2 / (two * n)) / denom;
    let half = z * (p * (T::one() - p) / n + z2 / (four * n * n)).sqrt() / denom;
    let lo = if failures == 0 { T::zero() } else { (center - half).max(T::zero()) };
    let hi = if failures == trials { T::one() } else { (center + half).min(T::one()) };
    (lo, hi)
}

/// Bond failure rate at which a check is missing with probability
/// [`PERCOLATION_BOND_FRACTION`]. Each check has four bonds that can remove it;
/// under the adaptive scheme a failure removes it only half the time.
pub fn percolation_limit_analytic<T: Real>(scheme: Scheme) -> T {
    let p = T::one() - T::of(1.0 - PERCOLATION_BOND_FRACTION).powf(T::of(0.25));
    match scheme {
        Scheme::NonAdaptive => p,
        Scheme::Adaptive => T::of(2.0) * p,
    }
}

/// `y = c0 + c1 x + c2 x^2` with standard errors of the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit<T> {
    pub coefficients: [T; 3],
    pub std_errors: [T; 3],
    pub residual_sum_squares: T,
}

impl<T: Real> QuadraticFit<T> {
    pub fn eval(&self, x: T) -> T {
        let [a, b, c] = self.coefficients;
        a + b * x + c * x * x
    }
}

/// Weighted least squares for `y ~ [1, x, x^2]`; returns coefficients and the
/// unscaled covariance `(X^T W X)^-1`.
fn weighted_quadratic(x: &[f64], y: &[f64], w: &[f64]) -> Option<([f64; 3], DMatrix<f64>)> {
    let n = x.len();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let a = DMatrix::from_fn(n, 3, |i, j| w[i].sqrt() * (x[i] / scale).powi(j as i32));
    let b = DVector::from_fn(n, |i, _| w[i].sqrt() * y[i]);
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > s_max * 1e-12) {
        return None;
    }
    let beta = svd.solve(&b, 0.0).ok()?;
    let cov = (a.transpose() * &a).try_inverse()?;
    let coeff = [beta[0], beta[1] / scale, beta[2] / (scale * scale)];
    let mut cov_x = cov;
    for i in 0..3 {
        for j in 0..3 {
            cov_x[(i, j)] /= scale.powi((i + j) as i32);
        }
    }
    Some((coeff, cov_x))
}

/// Least-squares quadratic through `(p_bond, p_th)` pairs.
pub fn fit_threshold_curve<T: Real>(points: &[(T, T)]) -> Result<QuadraticFit<T>> {
    if points.len() < 4 {
        return Err(Error::UnderDetermined { needed: 4, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.as_f64()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.as_f64()).collect();
    let w = vec![1.0; x.len()];
    let (c, cov) = weighted_quadratic(&x, &y, &w).ok_or(Error::SingularFit)?;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(&xi, &yi)| (yi - (c[0] + c[1] * xi + c[2] * xi * xi)).powi(2))
        .sum();
    let s2 = rss / (x.len() - 3) as f64;
    let se = [0, 1, 2].map(|i| T::of((s2 * cov[(i, i)]).max(0.0).sqrt()));
    Ok(QuadraticFit { coefficients: c.map(T::of), std_errors: se, residual_sum_squares: T::of(rss) })
}

/// Crossing points of each pair of curves, one per pair that crosses.
///
/// Each curve is `(size, [(x, y)])` with ascending `x`. Two curves cross where
/// the larger size goes from below to above the smaller one; the crossing is
/// linearly interpolated.
pub fn pairwise_crossings(curves: &[(usize, Vec<(f64, f64)>)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, (da, a)) in curves.iter().enumerate() {
        for (db, b) in &curves[i + 1..] {
            let (small, large) = if da < db { (a, b) } else { (b, a) };
            if let Some(x) = crossing(small, large) {
                out.push(x);
            }
        }
    }
    out
}

fn crossing(small: &[(f64, f64)], large: &[(f64, f64)]) -> Option<f64> {
    let diffs: Vec<(f64, f64)> = small
        .iter()
        .filter_map(|&(x, ys)| {
            large
                .iter()
                .find(|&&(xl, _)| (xl - x).abs() <= 1e-12 * x.abs().max(1.0))
                .map(|&(_, yl)| (x, yl - ys))
        })
        .collect();
    let mut last_neg: Option<(f64, f64)> = None;
    for &(x, dv) in &diffs {
        if dv < 0.0 {
            last_neg = Some((x, dv));
        } else if dv > 0.0 {
            if let Some((x0, d0)) = last_neg {
                return Some(x0 + (x - x0) * (-d0) / (dv - d0));
            }
        }
    }
    None
}

fn curves_of(points: &[PointEstimate], x_of: impl Fn(&PointEstimate) -> f64) -> Vec<(usize, Vec<(f64, f64)>)> {
    let mut ds: Vec<usize> = points.iter().map(|p| p.d).collect();
    ds.sort_unstable();
    ds.dedup();
    ds.into_iter()
        .map(|d| {
            let mut c: Vec<(f64, f64)> = points.iter().filter(|p| p.d == d).map(|p| (x_of(p), p.rate)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            (d, c)
        })
        .collect()
}

/// Bond failure rate where percolation frequencies of different distances
/// cross, averaged over distance pairs.
pub fn percolation_crossover(points: &[PointEstimate]) -> Option<f64> {
    let xs = pairwise_crossings(&curves_of(points, |p| p.p_bond));
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdStatus {
    Found,
    NoCrossing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    /// Quadratic in `(p - p_th) d^(1/nu)` with `p_th` and `nu` free.
    Scaling,
    /// Same ansatz with `nu = 1`.
    ScalingFixedNu,
    /// Mean of pairwise curve crossings.
    PairwiseCrossing,
}

impl FitMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::Scaling => "scaling",
            FitMethod::ScalingFixedNu => "scaling-fixed-nu",
            FitMethod::PairwiseCrossing => "pairwise-crossing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub scheme: Scheme,
    pub p_bond: f64,
    pub status: ThresholdStatus,
    pub p_th: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub method: Option<FitMethod>,
    pub nu: Option<f64>,
    /// `A, B, C` of `rate = A + B x + C x^2`.
    pub coefficients: Option<[f64; 3]>,
    pub reduced_chi2: Option<f64>,
    pub distances: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThresholdOptions {
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { bootstrap: 1000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Datum {
    p: f64,
    d: f64,
    trials: u64,
    rate: f64,
}

impl Datum {
    fn weight(&self) -> f64 {
        let n = self.trials as f64;
        let r = (self.rate * n + 0.5) / (n + 1.0);
        n / (r * (1.0 - r))
    }
}

fn scaling_chi2(data: &[Datum], p_th: f64, nu: f64) -> Option<(f64, [f64; 3])> {
    let x: Vec<f64> = data.iter().map(|t| (t.p - p_th) * t.d.powf(1.0 / nu)).collect();
    let y: Vec<f64> = data.iter().map(|t| t.rate).collect();
    let w: Vec<f64> = data.iter().map(Datum::weight).collect();
    let (c, _) = weighted_quadratic(&x, &y, &w)?;
    let chi2 = x
        .iter()
        .zip(&y)
        .zip(&w)
        .map(|((&xi, &yi), &wi)| wi * (yi - (c[0] + c[1] * xi + c[2] * xi * xi)).powi(2))
        .sum();
    Some((chi2, c))
}

const NU_RANGE: (f64, f64) = (0.3, 3.0);

struct ScalingCost<'a> {
    data: &'a [Datum],
    range: (f64, f64),
}

impl CostFunction for ScalingCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (lo, hi) = self.range;
        let p = v[0].clamp(lo, hi);
        let nu = v[1].clamp(0.1, 10.0);
        let penalty = 1e6 * ((v[0] - p).powi(2) / (hi - lo).powi(2) + (v[1] - nu).powi(2));
        Ok(scaling_chi2(self.data, p, nu).map_or(1e300, |r| r.0) + penalty)
    }
}

struct FixedNuCost<'a> {
    data: &'a [Datum],
}

impl CostFunction for FixedNuCost<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(scaling_chi2(self.data, *p, 1.0).map_or(1e300, |r| r.0))
    }
}

fn fit_free_nu(data: &[Datum], range: (f64, f64), start: (f64, f64)) -> Option<(f64, f64)> {
    let mut best = start;
    let span = range.1 - range.0;
    for _ in 0..2 {
        let simplex = vec![
            vec![best.0, best.1],
            vec![best.0 + 0.1 * span, best.1],
            vec![best.0, best.1 * 1.25],
        ];
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-14).ok()?;
        let res = Executor::new(ScalingCost { data, range }, solver)
            .configure(|s| s.max_iters(2000))
            .run()
            .ok()?;
        let v = res.state().get_best_param()?.clone();
        best = (v[0], v[1]);
    }
    (best.0.is_finite() && best.1.is_finite()).then_some(best)
}

fn fit_fixed_nu(data: &[Datum], range: (f64, f64)) -> Option<f64> {
    let solver = BrentOpt::new(range.0, range.1).set_tolerance(1e-12, 1e-14);
    let res = Executor::new(FixedNuCost { data }, solver)
        .configure(|s| s.max_iters(500))
        .run()
        .ok()?;
    res.state().get_best_param().copied()
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    let eps = 1e-3 * (hi - lo);
    x > lo + eps && x < hi - eps
}

fn pairwise_mean(data: &[Datum]) -> Option<f64> {
    let mut ds: Vec<f64> = data.iter().map(|t| t.d).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    let curves: Vec<(usize, Vec<(f64, f64)>)> = ds
        .iter()
        .map(|&d| {
            let mut c: Vec<(f64, f64)> = data.iter().filter(|t| t.d == d).map(|t| (t.p, t.rate)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            (d as usize, c)
        })
        .collect();
    let xs = pairwise_crossings(&curves);
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Whether the largest distance goes from below to above the smallest.
fn has_crossing(data: &[Datum]) -> bool {
    let dmin = data.iter().map(|t| t.d).fold(f64::INFINITY, f64::min);
    let dmax = data.iter().map(|t| t.d).fold(0.0, f64::max);
    let curve = |d: f64| {
        let mut c: Vec<(f64, f64)> = data.iter().filter(|t| t.d == d).map(|t| (t.p, t.rate)).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    };
    crossing(&curve(dmin), &curve(dmax)).is_some()
}

struct Fit {
    method: FitMethod,
    p_th: f64,
    nu: Option<f64>,
    coefficients: Option<[f64; 3]>,
    reduced_chi2: Option<f64>,
}

fn fit(data: &[Datum], range: (f64, f64)) -> Option<Fit> {
    let n = data.len() as f64;
    let start = pairwise_mean(data).unwrap_or(0.5 * (range.0 + range.1)).clamp(range.0, range.1);
    if let Some((p, nu)) = fit_free_nu(data, range, (start, 1.0)) {
        if within(p, range) && nu > NU_RANGE.0 && nu < NU_RANGE.1 {
            if let Some((chi2, c)) = scaling_chi2(data, p, nu) {
                return Some(Fit {
                    method: FitMethod::Scaling,
                    p_th: p,
                    nu: Some(nu),
                    coefficients: Some(c),
                    reduced_chi2: Some(chi2 / (n - 5.0)),
                });
            }
        }
    }
    if let Some(p) = fit_fixed_nu(data, range) {
        if within(p, range) {
            if let Some((chi2, c)) = scaling_chi2(data, p, 1.0) {
                return Some(Fit {
                    method: FitMethod::ScalingFixedNu,
                    p_th: p,
                    nu: Some(1.0),
                    coefficients: Some(c),
                    reduced_chi2: Some(chi2 / (n - 4.0)),
                });
            }
        }
    }
    pairwise_mean(data).map(|p| Fit { method: FitMethod::PairwiseCrossing, p_th: p, nu: None, coefficients: None, reduced_chi2: None })
}

fn refit(data: &[Datum], range: (f64, f64), method: FitMethod, start: (f64, f64)) -> Option<f64> {
    match method {
        FitMethod::Scaling => fit_free_nu(data, range, start).map(|r| r.0),
        FitMethod::ScalingFixedNu => fit_fixed_nu(data, range),
        FitMethod::PairwiseCrossing => pairwise_mean(data),
    }
}

pub fn estimate_threshold(points: &[PointEstimate]) -> Result<ThresholdEstimate> {
    estimate_threshold_with(points, ThresholdOptions::default())
}

/// Threshold from the rates of several distances at one bond failure rate.
pub fn estimate_threshold_with(points: &[PointEstimate], opts: ThresholdOptions) -> Result<ThresholdEstimate> {
    let first = points.first().ok_or_else(|| Error::InsufficientData("no points".into()))?;
    let mut distances: Vec<usize> = points.iter().map(|p| p.d).collect();
    distances.sort_unstable();
    distances.dedup();
    if distances.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 distances, got {}", distances.len())));
    }
    for &d in &distances {
        let k = points.iter().filter(|p| p.d == d).count();
        if k < 4 {
            return Err(Error::InsufficientData(format!("need at least 4 p_comp values at d={d}, got {k}")));
        }
    }
    let data: Vec<Datum> = points
        .iter()
        .map(|p| Datum { p: p.p_comp, d: p.d as f64, trials: p.trials, rate: p.rate })
        .collect();
    let lo = data.iter().map(|t| t.p).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|t| t.p).fold(f64::NEG_INFINITY, f64::max);
    let range = (lo, hi);
    let mut estimate = ThresholdEstimate {
        scheme: first.scheme,
        p_bond: first.p_bond,
        status: ThresholdStatus::NoCrossing,
        p_th: None,
        ci_low: None,
        ci_high: None,
        method: None,
        nu: None,
        coefficients: None,
        reduced_chi2: None,
        distances,
    };
    if !has_crossing(&data) {
        return Ok(estimate);
    }
    let Some(best) = fit(&data, range) else {
        return Ok(estimate);
    };

    let start = (best.p_th, best.nu.unwrap_or(1.0));
    let mut samples: Vec<f64> = (0..opts.bootstrap as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = stream(opts.seed, b, Stage::Bootstrap);
            let resampled: Vec<Datum> = data
                .iter()
                .map(|t| {
                    let f = Binomial::new(t.trials, t.rate).map(|dist| dist.sample(&mut rng)).unwrap_or(0);
                    Datum { rate: f as f64 / t.trials as f64, ..*t }
                })
                .collect();
            refit(&resampled, range, best.method, start)
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    if !samples.is_empty() {
        let q = |f: f64| samples[((f * (samples.len() - 1) as f64).round() as usize).min(samples.len() - 1)];
        estimate.ci_low = Some(q(0.025).min(best.p_th));
        estimate.ci_high = Some(q(0.975).max(best.p_th));
    }
    estimate.status = ThresholdStatus::Found;
    estimate.p_th = Some(best.p_th);
    estimate.method = Some(best.method);
    estimate.nu = best.nu;
    estimate.coefficients = best.coefficients;
    estimate.reduced_chi2 = best.reduced_chi2;
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn analytic_limits() {
        let na: f64 = percolation_limit_analytic(Scheme::NonAdaptive);
        let ad: f64 = percolation_limit_analytic(Scheme::Adaptive);
        assert_abs_diff_eq!(na, 0.069, epsilon = 1e-3);
        assert_abs_diff_eq!(ad, 0.138, epsilon = 1e-3);
        assert_eq!(ad, 2.0 * na);
        assert_abs_diff_eq!(1.0 - (1.0 - na).powi(4), PERCOLATION_BOND_FRACTION, epsilon = 1e-12);
        let na32: f32 = percolation_limit_analytic(Scheme::NonAdaptive);
        assert_abs_diff_eq!(na32 as f64, na, epsilon = 1e-6);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert_abs_diff_eq!(lo + hi, 1.0, epsilon = 1e-12);
        assert_eq!(wilson_interval(10, 10, Z95).1, 1.0);
        let (a, b) = wilson_interval(100, 1000, Z95);
        let (c, e) = wilson_interval(200, 2000, Z95);
        let ratio = (b - a) / (e - c);
        assert!((ratio - 2f64.sqrt()).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn noiseless_quadratic_is_recovered() {
        let truth = [0.029, -0.587, 2.786];
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|i| {
                let x = 0.01 * i as f64;
                (x, truth[0] + truth[1] * x + truth[2] * x * x)
            })
            .collect();
        let fit = fit_threshold_curve(&pts).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(fit.coefficients[i], truth[i], epsilon = 1e-6);
            assert!(fit.std_errors[i] < 1e-6);
        }
        assert_abs_diff_eq!(fit.eval(0.04), 0.029 - 0.587 * 0.04 + 2.786 * 0.0016, epsilon = 1e-9);
    }

    #[test]
    fn three_points_are_not_enough() {
        let pts = [(0.0, 0.029), (0.02, 0.018), (0.04, 0.01)];
        assert_eq!(fit_threshold_curve(&pts), Err(Error::UnderDetermined { needed: 4, got: 3 }));
    }

    #[test]
    fn fit_reports_uncertainty_for_noisy_points() {
        let pts = [(0.0, 0.030), (0.01, 0.0235), (0.02, 0.0185), (0.03, 0.0136), (0.04, 0.0103), (0.05, 0.0072)];
        let fit = fit_threshold_curve(&pts).unwrap();
        assert!(fit.std_errors.iter().all(|&s| s > 0.0));
        assert_abs_diff_eq!(fit.coefficients[0], 0.029, epsilon = 0.002);
    }

    fn synthetic(p_th: f64, nu: f64, trials: u64, seed: u64) -> Vec<PointEstimate> {
        let mut rng = stream(seed, 0, Stage::Bootstrap);
        let mut out = Vec::new();
        for d in [5usize, 7, 9] {
            for i in 0..6 {
                let p = 0.02 + 0.004 * i as f64;
                let x = (p - p_th) * (d as f64).powf(1.0 / nu);
                let rate: f64 = (0.2 + 1.5 * x + 4.0 * x * x).clamp(0.0, 1.0);
                let f = Binomial::new(trials, rate).unwrap().sample(&mut rng);
                let (lo, hi) = wilson_interval(f, trials, Z95);
                out.push(PointEstimate {
                    scheme: Scheme::NonAdaptive,
                    d,
                    p_bond: 0.0,
                    p_comp: p,
                    trials,
                    failures: f,
                    percolation_failures: 0,
                    rate: f as f64 / trials as f64,
                    ci_low: lo,
                    ci_high: hi,
                    seed,
                });
            }
        }
        out
    }

    #[test]
    fn recovers_synthetic_threshold() {
        let pts = synthetic(0.029, 1.0, 20_000, 3);
        let est = estimate_threshold_with(&pts, ThresholdOptions { bootstrap: 200, seed: 1 }).unwrap();
        assert_eq!(est.status, ThresholdStatus::Found);
        let p = est.p_th.unwrap();
        assert!((p - 0.029).abs() < 0.001, "{est:?}");
        assert!(est.ci_low.unwrap() <= p && p <= est.ci_high.unwrap());
        assert!(est.ci_high.unwrap() - est.ci_low.unwrap() < 0.004);
        assert_eq!(est.distances, vec![5, 7, 9]);
    }

    #[test]
    fn curves_without_crossing_are_reported() {
        // Threshold far below the swept range: larger codes are always worse.
        let pts = synthetic(0.005, 1.0, 20_000, 4);
        let est = estimate_threshold_with(&pts, ThresholdOptions { bootstrap: 10, seed: 1 }).unwrap();
        assert_eq!(est.status, ThresholdStatus::NoCrossing);
        assert!(est.p_th.is_none());
    }

    #[test]
    fn too_few_distances_or_points() {
        let pts = synthetic(0.029, 1.0, 1000, 5);
        let two: Vec<_> = pts.iter().filter(|p| p.d != 9).cloned().collect();
        assert!(matches!(estimate_threshold(&two), Err(Error::InsufficientData(_))));
        let sparse: Vec<_> = pts.iter().filter(|p| p.p_comp < 0.031).cloned().collect();
        assert!(matches!(estimate_threshold(&sparse), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pairwise_crossing_is_interpolated() {
        let small = (3, vec![(0.0, 0.2), (1.0, 0.4)]);
        let large = (5, vec![(0.0, 0.1), (1.0, 0.5)]);
        let xs = pairwise_crossings(&[large, small]);
        assert_eq!(xs.len(), 1);
        assert_abs_diff_eq!(xs[0], 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn wilson_contains_rate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
            let f = ((trials as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(f, trials, Z95);
            let r = f as f64 / trials as f64;
            prop_assert!(0.0 <= lo && lo <= r + 1e-12 && r <= hi + 1e-12 && hi <= 1.0);
        }
    }
}
