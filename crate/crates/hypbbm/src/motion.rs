//! Single-particle hyperbolic Brownian motion in the log chart, where the
//! vertical coordinate is a drifted Brownian motion and advances without
//! discretization error. Only the horizontal variance integral needs a
//! quadrature scheme.

use crate::geometry::{dist_halfplane, HalfPlanePoint};
use crate::rng::RandomStream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Quadrature rule for the horizontal variance integral over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UIntegration {
    LeftEndpoint,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub dt_max: f64,
    pub u_integration: UIntegration,
}

impl Default for StepScheme {
    fn default() -> Self {
        StepScheme { dt_max: 1e-2, u_integration: UIntegration::Trapezoid }
    }
}

impl StepScheme {
    /// Finer default for running-maximum statistics, which a coarse grid
    /// would clip harder.
    pub fn excursion() -> Self {
        StepScheme { dt_max: 1e-3, u_integration: UIntegration::Trapezoid }
    }

    pub fn with_dt(dt_max: f64) -> Self {
        assert!(dt_max > 0.0);
        StepScheme { dt_max, u_integration: UIntegration::Trapezoid }
    }
}

/// One SDE step of length dt. The w update is the exact marginal
/// w' ~ N(w - dt/2, dt); the u update draws from N(u, sigma^2) with
/// sigma^2 the scheme's approximation of the integral of e^(2w) over
/// the step.
pub fn step(p: HalfPlanePoint, dt: f64, rng: &mut ChaCha8Rng, scheme: &StepScheme) -> HalfPlanePoint {
    debug_assert!(dt > 0.0);
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let w = p.w - dt / 2.0 + dt.sqrt() * z1;
    let var_u = match scheme.u_integration {
        UIntegration::LeftEndpoint => dt * (2.0 * p.w).exp(),
        UIntegration::Trapezoid => dt * ((2.0 * p.w).exp() + (2.0 * w).exp()) / 2.0,
    };
    HalfPlanePoint::new(p.u + var_u.sqrt() * z2, w)
}

/// A discretized trajectory; `steps` holds (dt, point) pairs and the dts
/// sum to `total_duration` within 1e-12.
#[derive(Debug, Clone)]
pub struct PathSegment {
    pub start: HalfPlanePoint,
    pub steps: Vec<(f64, HalfPlanePoint)>,
    pub total_duration: f64,
}

impl PathSegment {
    pub fn endpoint(&self) -> HalfPlanePoint {
        self.steps.last().map_or(self.start, |(_, p)| *p)
    }
}

// Step grid: full dt_max steps with the last one shortened to land exactly
// on `duration`. Every dt is an exact difference of grid times.
fn grid_times(duration: f64, dt_max: f64) -> impl Iterator<Item = f64> {
    let mut j = 0u64;
    std::iter::from_fn(move || {
        let prev = (j as f64 * dt_max).min(duration);
        if prev >= duration {
            return None;
        }
        j += 1;
        Some(((j as f64) * dt_max).min(duration))
    })
}

pub fn sample_path(
    start: HalfPlanePoint,
    duration: f64,
    scheme: &StepScheme,
    stream: RandomStream,
) -> PathSegment {
    assert!(duration >= 0.0);
    let mut rng = stream.motion_rng();
    let mut steps = Vec::with_capacity((duration / scheme.dt_max).ceil() as usize);
    let mut p = start;
    let mut t = 0.0;
    for next in grid_times(duration, scheme.dt_max) {
        let dt = next - t;
        p = step(p, dt, &mut rng, scheme);
        steps.push((dt, p));
        t = next;
    }
    PathSegment { start, steps, total_duration: duration }
}

/// Endpoint of the trajectory without storing the path.
pub fn endpoint_at(
    start: HalfPlanePoint,
    duration: f64,
    scheme: &StepScheme,
    stream: RandomStream,
) -> HalfPlanePoint {
    let mut rng = stream.motion_rng();
    let mut p = start;
    let mut t = 0.0;
    for next in grid_times(duration, scheme.dt_max) {
        p = step(p, next - t, &mut rng, scheme);
        t = next;
    }
    p
}

/// Running maximum of the distance to the start over the discretized path.
/// A lower bound of the continuous-time maximum: excursions between grid
/// points are invisible.
pub fn max_distance_on_interval(
    start: HalfPlanePoint,
    duration: f64,
    scheme: &StepScheme,
    stream: RandomStream,
) -> f64 {
    assert!(duration > 0.0);
    let mut rng = stream.motion_rng();
    let mut p = start;
    let mut t = 0.0;
    let mut max = 0.0f64;
    for next in grid_times(duration, scheme.dt_max) {
        p = step(p, next - t, &mut rng, scheme);
        t = next;
        max = max.max(dist_halfplane(p, start));
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{log_one_minus_norm_sq, radial_projection_halfplane};
    use crate::rng::{replica_seed, RandomStream};
    use crate::stats;

    const BASE: HalfPlanePoint = HalfPlanePoint::BASE;

    #[test]
    fn single_step_drift_and_variance() {
        let scheme = StepScheme::default();
        let mut rng = RandomStream::from_seed(1).motion_rng();
        let n = 100_000usize;
        let mut ws = Vec::with_capacity(n);
        for _ in 0..n {
            ws.push(-step(BASE, 1.0, &mut rng, &scheme).w);
        }
        let (mean, _) = stats::mean_and_se(&ws);
        assert!((mean - 0.5).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        let var = stats::sample_variance(&ws);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn small_steps_stay_close() {
        // dt -> 0: the increment scale shrinks like sqrt(dt)
        let scheme = StepScheme::default();
        for (i, dt) in [1e-4, 1e-6, 1e-8].iter().enumerate() {
            let mut rng = RandomStream::from_seed(2 + i as u64).motion_rng();
            let q = step(BASE, *dt, &mut rng, &scheme);
            let d = dist_halfplane(q, BASE);
            assert!(d < 100.0 * dt.sqrt(), "dt={dt} moved {d}");
        }
    }

    #[test]
    fn zero_duration_path() {
        let seg = sample_path(BASE, 0.0, &StepScheme::default(), RandomStream::from_seed(3));
        assert!(seg.steps.is_empty());
        assert_eq!(seg.endpoint(), BASE);
    }

    #[test]
    fn grid_sums_exactly_and_lands_on_duration() {
        for (duration, dt) in [(1.0, 1e-2), (0.35, 1e-2), (2.0, 0.3), (1e-3, 1e-2)] {
            let seg = sample_path(BASE, duration, &StepScheme::with_dt(dt), RandomStream::from_seed(4));
            let total = stats::kahan_sum(seg.steps.iter().map(|(d, _)| *d));
            assert!((total - duration).abs() < 1e-12, "sum {total} vs {duration}");
            for (d, p) in &seg.steps {
                assert!(*d > 0.0 && *d <= dt * (1.0 + 1e-9));
                assert!(p.u.is_finite() && p.w.is_finite());
            }
        }
    }

    #[test]
    fn deterministic_per_stream_and_consistent_endpoint() {
        let stream = RandomStream::from_seed(5);
        let scheme = StepScheme::default();
        let a = sample_path(BASE, 2.0, &scheme, stream);
        let b = sample_path(BASE, 2.0, &scheme, stream);
        assert_eq!(a.endpoint(), b.endpoint());
        let e = endpoint_at(BASE, 2.0, &scheme, stream);
        assert_eq!(a.endpoint(), e);
    }

    #[test]
    fn endpoint_law_matches_exact_vertical_marginal() {
        // -log Im at t=4 from the base point is N(2, 4)
        let scheme = StepScheme::default();
        let n = 10_000usize;
        let mut xs = Vec::with_capacity(n);
        for i in 0..n {
            let p = endpoint_at(BASE, 4.0, &scheme, RandomStream::from_seed(replica_seed(600, i as u64)));
            xs.push(-p.w);
        }
        let d = stats::ks_statistic(&xs, |x| stats::normal_cdf((x - 2.0) / 2.0));
        let crit = stats::ks_critical(n, 1e-3);
        assert!(d < crit, "KS {d} >= {crit}");
    }

    #[test]
    fn vertical_law_indifferent_to_step_size() {
        // the w update is exact, so coarse and fine grids pass the same test
        let n = 10_000usize;
        for (k, dt) in [(0u64, 0.1), (1, 0.001)] {
            let scheme = StepScheme::with_dt(dt);
            let mut xs = Vec::with_capacity(n);
            for i in 0..n {
                let stream = RandomStream::from_seed(replica_seed(700 + k, i as u64));
                xs.push(-endpoint_at(BASE, 1.0, &scheme, stream).w);
            }
            let d = stats::ks_statistic(&xs, |x| stats::normal_cdf(x - 0.5));
            let crit = stats::ks_critical(n, 1e-3);
            assert!(d < crit, "dt={dt}: KS {d} >= {crit}");
        }
    }

    #[test]
    fn escape_rate_is_one_half() {
        let scheme = StepScheme::default();
        let n = 200usize;
        let mut rates = Vec::with_capacity(n);
        for i in 0..n {
            let p = endpoint_at(BASE, 100.0, &scheme, RandomStream::from_seed(replica_seed(800, i as u64)));
            rates.push(dist_halfplane(p, BASE) / 100.0);
        }
        let (mean, _) = stats::mean_and_se(&rates);
        assert!((mean - 0.5).abs() < 0.03, "escape rate {mean}");
    }

    #[test]
    fn u_increments_centered() {
        let scheme = StepScheme::default();
        let mut rng = RandomStream::from_seed(9).motion_rng();
        let n = 100_000usize;
        let mut dus = Vec::with_capacity(n);
        for _ in 0..n {
            let q = step(BASE, 0.01, &mut rng, &scheme);
            dus.push(q.u - BASE.u);
        }
        let (mean, se) = stats::mean_and_se(&dus);
        assert!(mean.abs() < 3.0 * se, "u drift {mean} (se {se})");
    }

    #[test]
    fn max_dominates_endpoint_distance() {
        let scheme = StepScheme::default();
        for i in 0..200u64 {
            let stream = RandomStream::from_seed(replica_seed(1000, i));
            let m = max_distance_on_interval(BASE, 1.0, &scheme, stream);
            let e = dist_halfplane(endpoint_at(BASE, 1.0, &scheme, stream), BASE);
            assert!(m >= e - 1e-12, "max {m} < endpoint {e}");
        }
    }

    #[test]
    fn excursion_tail_inequality_and_gaussian_rate() {
        // shared ensemble: running maxima and endpoint distances at t=1
        let scheme = StepScheme::excursion();
        let n = 100_000usize;
        let mut maxima = Vec::with_capacity(n);
        let mut ends = Vec::with_capacity(n);
        for i in 0..n {
            let stream = RandomStream::from_seed(replica_seed(1100, i as u64));
            let mut rng = stream.motion_rng();
            let mut p = BASE;
            let mut t = 0.0;
            let mut max = 0.0f64;
            for next in super::grid_times(1.0, scheme.dt_max) {
                p = step(p, next - t, &mut rng, &scheme);
                t = next;
                max = max.max(dist_halfplane(p, BASE));
            }
            maxima.push(max);
            ends.push(dist_halfplane(p, BASE));
        }
        for c in [1.5, 2.0, 2.5] {
            let p_max = maxima.iter().filter(|m| **m >= c).count() as f64 / n as f64;
            let p_end = ends.iter().filter(|e| **e >= c).count() as f64 / n as f64;
            let se = ((p_max * (1.0 - p_max) + 4.0 * p_end * (1.0 - p_end)) / n as f64).sqrt();
            assert!(
                p_max <= 2.0 * p_end + 3.0 * se,
                "c={c}: P[M>=c]={p_max} vs 2P[end>=c]={p_end}"
            );
        }
        // log-tail of P[M >= c] against -(c - 1/2)^2/2 over c in [2, 4]
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut c = 2.0;
        while c <= 4.0 + 1e-9 {
            let p = maxima.iter().filter(|m| **m >= c).count() as f64 / n as f64;
            if p > 0.0 {
                xs.push(-(c - 0.5) * (c - 0.5) / 2.0);
                ys.push(p.ln());
            }
            c += 0.25;
        }
        let fit = stats::least_squares(&xs, &ys);
        assert!(
            fit.slope > 0.8 && fit.slope < 1.2,
            "tail slope {} (r2 {})",
            fit.slope,
            fit.r_squared
        );
    }

    #[test]
    fn scheme_refinement_statistically_invisible() {
        // endpoint u at t=1 under dt and dt/2: energy-distance permutation
        // test cannot tell the ensembles apart
        let n = 10_000usize;
        let mut coarse = Vec::with_capacity(n);
        let mut fine = Vec::with_capacity(n);
        for i in 0..n {
            coarse.push(
                endpoint_at(BASE, 1.0, &StepScheme::with_dt(1e-2), RandomStream::from_seed(replica_seed(1200, i as u64))).u,
            );
            fine.push(
                endpoint_at(BASE, 1.0, &StepScheme::with_dt(5e-3), RandomStream::from_seed(replica_seed(1300, i as u64))).u,
            );
        }
        let a: Vec<f64> = coarse.iter().step_by(10).copied().collect();
        let b: Vec<f64> = fine.iter().step_by(10).copied().collect();
        let p = stats::energy_permutation_pvalue(&a, &b, 200, 77);
        assert!(p > 0.01, "refinement detected: p = {p}");
    }

    #[test]
    fn long_run_reaches_boundary_uniformly() {
        // at t = 200 the disk coordinates of the endpoint are beyond f64
        // resolution of the boundary, so both checks run in the half-plane
        // chart: 1 - |z|^2 through its log, the angle through the scale-safe
        // projection
        let scheme = StepScheme::default();
        let n = 500usize;
        let mut counts = [0.0f64; 16];
        for i in 0..n {
            let p = endpoint_at(BASE, 200.0, &scheme, RandomStream::from_seed(replica_seed(1400, i as u64)));
            let log_gap = log_one_minus_norm_sq(p);
            assert!(log_gap < -8.0 * std::f64::consts::LN_10, "replica {i}: log gap {log_gap}");
            let angle = radial_projection_halfplane(p).angle();
            let bin = (((angle + std::f64::consts::PI) / std::f64::consts::TAU) * 16.0)
                .floor()
                .min(15.0) as usize;
            counts[bin] += 1.0;
        }
        let expected = [n as f64 / 16.0; 16];
        let stat = stats::chi_square_stat(&counts, &expected);
        let threshold = stats::chi2_quantile(1.0 - 1e-3, 15);
        assert!(stat < threshold, "chi2 {stat} >= {threshold}");
    }
}
