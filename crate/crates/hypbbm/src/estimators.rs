//! Population statistics: extremal spread rates and their log corrections,
//! the distance CLT, escape rate, boundary histograms against the Poisson
//! kernel, atom decay, and box-counting dimension. Reference constants are
//! derived from lambda at call time.
//!
//! Particles within one snapshot share ancestry, so single-snapshot tests
//! report statistics for replica-level aggregation rather than verdicts.

use crate::branching::Population;
use crate::geometry::{dist_halfplane, dist_to_base, radial_projection_halfplane, HalfPlanePoint};
use crate::stats::{self, LinearFit};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("lambda = {lambda} is outside the transient regime (lambda <= 1/8)")]
    WrongRegime { lambda: f64 },
}

/// Upper spread rate 1/2 + sqrt(2 lambda).
pub fn r_star(lambda: f64) -> f64 {
    0.5 + (2.0 * lambda).sqrt()
}

/// Lower spread rate 1/2 - sqrt(2 lambda).
pub fn r_star_lower(lambda: f64) -> f64 {
    0.5 - (2.0 * lambda).sqrt()
}

/// Dimension of the limit set in the transient regime.
pub fn ls_dimension(lambda: f64) -> Result<f64, EstimatorError> {
    if lambda > 0.125 {
        return Err(EstimatorError::WrongRegime { lambda });
    }
    Ok((1.0 - (1.0 - 8.0 * lambda).sqrt()) / 2.0)
}

/// Dimension of the support of the limiting boundary measure.
pub fn support_dimension(lambda: f64) -> f64 {
    (2.0 * lambda).min(1.0)
}

/// Time series of a population statistic with strictly increasing times.
#[derive(Debug, Clone)]
pub struct RateSeries {
    points: Vec<(f64, f64)>,
}

impl RateSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        for w in points.windows(2) {
            assert!(w[0].0 < w[1].0, "times not strictly increasing");
        }
        RateSeries { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Outcome of one statistical check. `pass` is statistic <= threshold, or
/// statistic >= threshold when `lower_tail` flags a one-sided lower test.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub threshold: f64,
    pub lower_tail: bool,
    pub pass: bool,
    pub sample_size: usize,
    pub description: String,
}

impl TestReport {
    pub fn new(
        statistic: f64,
        threshold: f64,
        lower_tail: bool,
        sample_size: usize,
        description: impl Into<String>,
    ) -> Self {
        let pass = if lower_tail { statistic >= threshold } else { statistic <= threshold };
        TestReport { statistic, threshold, lower_tail, pass, sample_size, description: description.into() }
    }
}

/// Exact extrema of the distance to `origin` over the snapshot. Particle
/// order (address order) breaks ties: strict comparisons keep the first.
pub fn max_min_distance(pop: &Population, origin: HalfPlanePoint) -> (f64, f64) {
    assert!(!pop.particles.is_empty());
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for p in &pop.particles {
        let d = dist_halfplane(p.position, origin);
        if d > max {
            max = d;
        }
        if d < min {
            min = d;
        }
    }
    (max, min)
}

/// Mean distance to the base point over the snapshot.
pub fn mean_distance(pop: &Population) -> f64 {
    assert!(!pop.particles.is_empty());
    stats::kahan_sum(pop.particles.iter().map(|p| dist_to_base(p.position))) / pop.n() as f64
}

/// Least-squares slope over the trailing `window_fraction` of the series
/// (by point count, at least 4 points).
pub fn rate_fit(series: &RateSeries, window_fraction: f64) -> Result<f64, EstimatorError> {
    assert!(window_fraction > 0.0 && window_fraction <= 1.0);
    let n = series.points.len();
    let take = ((n as f64 * window_fraction).ceil() as usize).min(n);
    if take < 4 {
        return Err(EstimatorError::InsufficientData { needed: 4, got: take });
    }
    let tail = &series.points[n - take..];
    let ts: Vec<f64> = tail.iter().map(|(t, _)| *t).collect();
    let vs: Vec<f64> = tail.iter().map(|(_, v)| *v).collect();
    Ok(stats::least_squares(&ts, &vs).slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// Centered and log-scaled extremal series with its limiting reference.
#[derive(Debug, Clone)]
pub struct LogCorrection {
    pub points: Vec<(f64, f64)>,
    pub reference: f64,
}

/// (value - rate * t) / log t for the chosen extremum, with the limit
/// -3/sqrt(8 lambda) for Max and +3/sqrt(8 lambda) for Min. Only defined
/// in the transient regime, and only for t >= e so log t >= 1.
pub fn log_correction(
    series: &RateSeries,
    lambda: f64,
    extremum: Extremum,
) -> Result<LogCorrection, EstimatorError> {
    if lambda > 0.125 {
        return Err(EstimatorError::WrongRegime { lambda });
    }
    let magnitude = 3.0 / (8.0 * lambda).sqrt();
    let (rate, reference) = match extremum {
        Extremum::Max => (r_star(lambda), -magnitude),
        Extremum::Min => (r_star_lower(lambda), magnitude),
    };
    let mut points = Vec::with_capacity(series.points.len());
    for &(t, v) in &series.points {
        assert!(t >= std::f64::consts::E, "log scaling needs t >= e, got {t}");
        points.push((t, (v - rate * t) / t.ln()));
    }
    Ok(LogCorrection { points, reference })
}

/// KS statistic of the standardized distances (ρ - t/2)/sqrt(t) against the
/// standard normal, thresholded at significance 1e-3 for the realized N(t).
pub fn distance_clt_test(pop: &Population) -> Result<TestReport, EstimatorError> {
    clt_test(pop, |p| dist_to_base(p), "distance CLT vs standard normal")
}

/// Calibration arm of the CLT: same standardization applied to the vertical
/// coordinate -log Im, whose law is exactly Gaussian at every t.
pub fn vertical_clt_test(pop: &Population) -> Result<TestReport, EstimatorError> {
    clt_test(pop, |p| -p.w, "vertical CLT vs standard normal")
}

fn clt_test(
    pop: &Population,
    value: impl Fn(HalfPlanePoint) -> f64,
    description: &str,
) -> Result<TestReport, EstimatorError> {
    let n = pop.n();
    if n < 30 {
        return Err(EstimatorError::InsufficientData { needed: 30, got: n });
    }
    let t = pop.t;
    let scale = t.sqrt();
    let xs: Vec<f64> = pop.particles.iter().map(|p| (value(p.position) - t / 2.0) / scale).collect();
    let d = stats::ks_statistic(&xs, stats::normal_cdf);
    Ok(TestReport::new(d, stats::ks_critical(n, 1e-3), false, n, description))
}

/// Least-squares fit of the mean distance against snapshot time.
pub fn escape_rate(pops: &[Population]) -> Result<LinearFit, EstimatorError> {
    if pops.len() < 4 {
        return Err(EstimatorError::InsufficientData { needed: 4, got: pops.len() });
    }
    let ts: Vec<f64> = pops.iter().map(|p| p.t).collect();
    let ms: Vec<f64> = pops.iter().map(mean_distance).collect();
    Ok(stats::least_squares(&ts, &ms))
}

fn arc_bin(angle: f64, bins: usize) -> usize {
    let x = (angle + std::f64::consts::PI) / std::f64::consts::TAU;
    ((x * bins as f64).floor() as usize).min(bins - 1)
}

/// Normalized arc-bin masses of the radial pushforward; sums to 1.
pub fn boundary_measure(pop: &Population, bins: usize) -> Vec<f64> {
    assert!(bins >= 2 && !pop.particles.is_empty());
    let mut counts = vec![0u64; bins];
    for p in &pop.particles {
        counts[arc_bin(radial_projection_halfplane(p.position).angle(), bins)] += 1;
    }
    let w = 1.0 / pop.n() as f64;
    counts.into_iter().map(|c| c as f64 * w).collect()
}

/// Arc-bin masses weighted by e^(-lambda t) each; sums to the martingale
/// value of the snapshot.
pub fn boundary_measure_lambda(pop: &Population, lambda: f64, bins: usize) -> Vec<f64> {
    let w = (-lambda * pop.t).exp();
    boundary_measure(pop, bins).into_iter().map(|m| m * pop.n() as f64 * w).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AtomDecayPoint {
    pub t: f64,
    pub occupied: usize,
    pub max_mass: f64,
}

/// Occupied-bin count and largest single-bin mass of the radial empirical
/// distribution at a fine fixed binning, per snapshot.
pub fn atom_decay(pops: &[Population], bins: usize) -> Vec<AtomDecayPoint> {
    assert!(!pops.is_empty());
    pops.iter()
        .map(|pop| {
            let masses = boundary_measure(pop, bins);
            let occupied = masses.iter().filter(|m| **m > 0.0).count();
            let max_mass = masses.into_iter().fold(0.0f64, f64::max);
            AtomDecayPoint { t: pop.t, occupied, max_mass }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Dyadic arc widths 2π/2^4 down to 2π/2^9, the window where desk-scale
/// particle counts still fill boxes.
pub fn default_scales() -> Vec<f64> {
    (4..=9).map(|k| std::f64::consts::TAU / (1u64 << k) as f64).collect()
}

/// Occupied-arc counts per scale and the slope of log N(ε) vs log(1/ε).
pub fn box_dimension(angles: &[f64], scales: &[f64]) -> Result<DimensionEstimate, EstimatorError> {
    if angles.len() < 100 {
        return Err(EstimatorError::InsufficientData { needed: 100, got: angles.len() });
    }
    assert!(scales.windows(2).all(|w| w[0] > w[1]), "scales not strictly decreasing");
    let mut counts = Vec::with_capacity(scales.len());
    for &eps in scales {
        let bins = (std::f64::consts::TAU / eps).round() as usize;
        let mut occupied = vec![false; bins];
        for &a in angles {
            occupied[arc_bin(a, bins)] = true;
        }
        counts.push(occupied.iter().filter(|o| **o).count());
    }
    let xs: Vec<f64> = scales.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (*c as f64).ln()).collect();
    let fit = stats::least_squares(&xs, &ys);
    Ok(DimensionEstimate { scales: scales.to_vec(), counts, slope: fit.slope, r_squared: fit.r_squared })
}
