//! The acceptance checklist: every distributional law the simulator must
//! reproduce at desk scale. Each criterion pins its tolerance, sample size,
//! and master seed in code; the `acceptance` test target and the `verify`
//! subcommand both consume `all_criteria`.

use crate::branching::{lambda_measure, many_to_one, run, RunConfig, TestFunctional};
use crate::config::parse_spec;
use crate::estimators::{
    box_dimension, boundary_measure, default_scales, distance_clt_test, max_min_distance,
    mean_distance, vertical_clt_test,
};
use crate::experiment::{execute, render_summary};
use crate::geometry::{
    disk_to_halfplane, dist_to_base, halfplane_to_disk, BoundaryPoint, DiskPoint, HalfPlanePoint,
};
use crate::kernel::{poisson_arc_mass, poisson_kernel};
use crate::moebius::MoebiusMap;
use crate::motion::{self, StepScheme};
use crate::rng::RandomStream;
use crate::stats;
use crate::yule::{martingale_track, sample_tree, DEFAULT_VERTEX_CAP};
use rand::Rng;
use rayon::prelude::*;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub exploratory: bool,
    pub details: String,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let tag = if self.exploratory { " [exploratory]" } else { "" };
        format!("criterion {:02} {:<15} {verdict}{tag}  {}", self.index, self.name, self.details)
    }
}

/// Growth rate of the maximal distance in the recurrent-at-origin phase.
fn rate_upper(lambda: f64) -> f64 {
    0.5 + (2.0 * lambda).sqrt()
}

/// Growth rate of the minimal distance in the transient phase.
fn rate_lower(lambda: f64) -> f64 {
    0.5 - (2.0 * lambda).sqrt()
}

// Shared unit-rate ensemble: 200 replicas to horizon 12 with unit snapshot
// grid, reduced per replica. Criteria take prefixes of it: extremes and
// escape use the first 50, the KS and atom criteria the first 100, the
// boundary criterion all 200. The master seed is fixed ahead of any runs.

const FIXTURE_SEED: u64 = 100;
const FIXTURE_REPLICAS: usize = 200;
const FIXTURE_HORIZON: usize = 12;
const ATOM_BINS: usize = 1 << 10;

pub struct UnitRateSummary {
    pub n: Vec<usize>,
    pub max_dist: Vec<f64>,
    pub mean_dist: Vec<f64>,
    pub martingale: Vec<f64>,
    /// KS statistics of the standardized distance and vertical laws at t=10;
    /// NaN for the rare replica too small to test.
    pub ks_distance: f64,
    pub ks_vertical: f64,
    pub masses16: Vec<f64>,
    /// occupied fine-arc count and largest fine-arc mass at t=6 and t=12
    pub occupied: [usize; 2],
    pub max_mass: [f64; 2],
    pub lambda_total_12: f64,
}

fn unit_rate_replica(index: u64) -> UnitRateSummary {
    let master = RandomStream::from_seed(FIXTURE_SEED);
    let mut config = RunConfig::new(1.0, FIXTURE_HORIZON as f64);
    config.snapshot_times = (1..=FIXTURE_HORIZON).map(|j| j as f64).collect();
    config.seed = master.replica(index).seed();
    let result = run(&config).expect("fixture replica");
    let pops = &result.populations;

    let mut n = Vec::with_capacity(pops.len());
    let mut max_dist = Vec::with_capacity(pops.len());
    let mut mean = Vec::with_capacity(pops.len());
    let mut martingale = Vec::with_capacity(pops.len());
    for pop in pops {
        n.push(pop.n());
        max_dist.push(max_min_distance(pop, HalfPlanePoint::BASE).0);
        mean.push(mean_distance(pop));
        martingale.push(pop.n() as f64 * (-pop.t).exp());
    }
    let pop10 = &pops[9];
    let ks_distance = distance_clt_test(pop10).map_or(f64::NAN, |r| r.statistic);
    let ks_vertical = vertical_clt_test(pop10).map_or(f64::NAN, |r| r.statistic);
    let masses16 = boundary_measure(pop10, 16);
    let fine = |j: usize| {
        let masses = boundary_measure(&pops[j], ATOM_BINS);
        let occupied = masses.iter().filter(|m| **m > 0.0).count();
        (occupied, masses.into_iter().fold(0.0f64, f64::max))
    };
    let (occ6, max6) = fine(5);
    let (occ12, max12) = fine(11);

    UnitRateSummary {
        n,
        max_dist,
        mean_dist: mean,
        martingale,
        ks_distance,
        ks_vertical,
        masses16,
        occupied: [occ6, occ12],
        max_mass: [max6, max12],
        lambda_total_12: lambda_measure(&pops[11], 1.0).total_weight,
    }
}

pub fn unit_rate_fixture() -> &'static [UnitRateSummary] {
    static FIXTURE: OnceLock<Vec<UnitRateSummary>> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        (0..FIXTURE_REPLICAS as u64).into_par_iter().map(unit_rate_replica).collect()
    })
}

/// Population size at fixed time is geometric: chi-square over the cells
/// {1..10, >10} at the 0.999 quantile, sample mean within 3 se of e^t, and
/// the whole thing in under ten seconds.
pub fn criterion_01() -> CriterionReport {
    let clock = Instant::now();
    let master = RandomStream::from_seed(1001);
    let replicas = 10_000usize;
    let mut counts = vec![0.0f64; 11];
    let mut ns = Vec::with_capacity(replicas);
    for i in 0..replicas {
        let tree = sample_tree(1.0, 1.0, master.replica(i as u64), DEFAULT_VERTEX_CAP).expect("cap");
        let n = tree.cross_section(1.0).expect("in horizon").n();
        counts[(n - 1).min(10)] += 1.0;
        ns.push(n as f64);
    }
    let p = (-1.0f64).exp();
    let m = replicas as f64;
    let mut expected: Vec<f64> = (1..=10).map(|k| m * p * (1.0 - p).powi(k - 1)).collect();
    expected.push(m - expected.iter().sum::<f64>());
    let stat = stats::chi_square_stat(&counts, &expected);
    let threshold = stats::chi2_quantile(0.999, 10);
    let (mean, se) = stats::mean_and_se(&ns);
    let target = 1.0f64.exp();
    let elapsed = clock.elapsed();
    let pass = stat <= threshold && (mean - target).abs() <= 3.0 * se && elapsed < Duration::from_secs(10);
    CriterionReport {
        index: 1,
        name: "population_law",
        pass,
        exploratory: false,
        details: format!(
            "chi2 {stat:.2} vs {threshold:.2}; mean {mean:.4} vs {target:.4} (3se {:.4}); {elapsed:.2?}",
            3.0 * se
        ),
    }
}

/// The renormalized population N(t) e^(-t) is a martingale: unit mean within
/// 3 se at t in {1, 3, 6}, and the increment variance over [6, 8] stays
/// below the one over [1, 3].
pub fn criterion_02() -> CriterionReport {
    let master = RandomStream::from_seed(1002);
    let replicas = 10_000usize;
    let grid = [1.0, 3.0, 6.0, 8.0];
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(replicas); grid.len()];
    for i in 0..replicas {
        let tree = sample_tree(1.0, 8.0, master.replica(i as u64), DEFAULT_VERTEX_CAP).expect("cap");
        let track = martingale_track(&tree, &grid).expect("in horizon");
        for (j, &(_, v)) in track.samples.iter().enumerate() {
            samples[j].push(v);
        }
    }
    let mut mean_ok = true;
    let mut means = String::new();
    for j in 0..3 {
        let (mean, se) = stats::mean_and_se(&samples[j]);
        mean_ok &= (mean - 1.0).abs() <= 3.0 * se;
        means.push_str(&format!("t={} {:.4}+-{:.4} ", grid[j], mean, se));
    }
    let early: Vec<f64> = (0..replicas).map(|i| samples[1][i] - samples[0][i]).collect();
    let late: Vec<f64> = (0..replicas).map(|i| samples[3][i] - samples[2][i]).collect();
    let var_early = stats::sample_variance(&early);
    let var_late = stats::sample_variance(&late);
    let pass = mean_ok && var_late < var_early;
    CriterionReport {
        index: 2,
        name: "martingale",
        pass,
        exploratory: false,
        details: format!("{means}; var incr [6,8] {var_late:.3e} < [1,3] {var_early:.3e}"),
    }
}

/// The vertical coordinate of a single path is exactly Gaussian: KS of
/// -log Im B_4 against N(2, 4) at significance 1e-3.
pub fn criterion_03() -> CriterionReport {
    let master = RandomStream::from_seed(1003);
    let replicas = 10_000usize;
    let scheme = StepScheme::default();
    let xs: Vec<f64> = (0..replicas)
        .map(|i| {
            let end = motion::endpoint_at(HalfPlanePoint::BASE, 4.0, &scheme, master.replica(i as u64));
            (-end.w - 2.0) / 2.0
        })
        .collect();
    let d = stats::ks_statistic(&xs, stats::normal_cdf);
    let threshold = stats::ks_critical(replicas, 1e-3);
    CriterionReport {
        index: 3,
        name: "vertical_law",
        pass: d <= threshold,
        exploratory: false,
        details: format!("KS {d:.4} vs {threshold:.4} at n={replicas}"),
    }
}

/// A single path escapes at speed 1/2: mean rho/t at t=100 lands in
/// [0.47, 0.53] over 200 replicas.
pub fn criterion_04() -> CriterionReport {
    let master = RandomStream::from_seed(1004);
    let replicas = 200usize;
    let scheme = StepScheme::default();
    let rates: Vec<f64> = (0..replicas)
        .map(|i| {
            let end = motion::endpoint_at(HalfPlanePoint::BASE, 100.0, &scheme, master.replica(i as u64));
            dist_to_base(end) / 100.0
        })
        .collect();
    let (mean, se) = stats::mean_and_se(&rates);
    let pass = (0.47..=0.53).contains(&mean);
    CriterionReport {
        index: 4,
        name: "escape_single",
        pass,
        exploratory: false,
        details: format!("mean rate {mean:.4} (se {se:.4}) vs [0.47, 0.53]"),
    }
}

/// Unit-time excursions: the running maximum is dominated by twice the
/// endpoint tail at c in {1.5, 2, 2.5} (within 3 se), and the log-tail of
/// the maximum decays against (c - 1/2)^2 / 2 with coefficient in
/// [0.8, 1.2] over c in [2, 4].
pub fn criterion_05() -> CriterionReport {
    let master = RandomStream::from_seed(1005);
    let replicas = 100_000usize;
    let scheme = StepScheme::excursion();
    let mut maxes = Vec::with_capacity(replicas);
    let mut ends = Vec::with_capacity(replicas);
    for i in 0..replicas {
        let seg = motion::sample_path(HalfPlanePoint::BASE, 1.0, &scheme, master.replica(i as u64));
        let mut m = 0.0f64;
        for &(_, q) in &seg.steps {
            m = m.max(dist_to_base(q));
        }
        maxes.push(m);
        ends.push(dist_to_base(seg.endpoint()));
    }
    let n = replicas as f64;
    let frac = |xs: &[f64], c: f64| xs.iter().filter(|x| **x >= c).count() as f64 / n;
    let mut domination = true;
    let mut dom_details = String::new();
    for c in [1.5, 2.0, 2.5] {
        let pm = frac(&maxes, c);
        let pe = frac(&ends, c);
        let se = ((pm * (1.0 - pm) + 4.0 * pe * (1.0 - pe)) / n).sqrt();
        domination &= pm <= 2.0 * pe + 3.0 * se;
        dom_details.push_str(&format!("c={c} {pm:.4}<={:.4} ", 2.0 * pe + 3.0 * se));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut c = 2.0;
    while c <= 4.0 + 1e-9 {
        let pm = frac(&maxes, c);
        if pm > 0.0 {
            xs.push((c - 0.5) * (c - 0.5) / 2.0);
            ys.push(pm.ln());
        }
        c += 0.25;
    }
    let coefficient = if xs.len() >= 4 { -stats::least_squares(&xs, &ys).slope } else { f64::NAN };
    let pass = domination && (0.8..=1.2).contains(&coefficient);
    CriterionReport {
        index: 5,
        name: "excursion_tail",
        pass,
        exploratory: false,
        details: format!("{dom_details}; tail coefficient {coefficient:.3} vs [0.8, 1.2]"),
    }
}

/// The population identity for the unit-ball count at lambda=1/2, t=2:
/// branching average over 2000 replicas against e^(lambda t) times the
/// single-path average over 10^4 draws, within 3 combined se and a minute.
pub fn criterion_06() -> CriterionReport {
    let clock = Instant::now();
    let (lhs, rhs, (lse, rse)) = many_to_one(
        TestFunctional::BallIndicator { radius: 1.0 },
        2.0,
        0.5,
        2000,
        10_000,
        &StepScheme::default(),
        RandomStream::from_seed(1006),
    )
    .expect("within cap");
    let se = (lse * lse + rse * rse).sqrt();
    let elapsed = clock.elapsed();
    let pass = (lhs - rhs).abs() <= 3.0 * se && elapsed < Duration::from_secs(60);
    CriterionReport {
        index: 6,
        name: "many_to_one",
        pass,
        exploratory: false,
        details: format!("lhs {lhs:.4} rhs {rhs:.4} (3se {:.4}); {elapsed:.2?}", 3.0 * se),
    }
}

/// Maximal distance grows linearly at rate r* = 1/2 + sqrt(2): the replica
/// mean of Max(12)/12 over 50 replicas should land in [r* - 0.12, r*].
pub fn criterion_07() -> CriterionReport {
    let fixture = &unit_rate_fixture()[..50];
    let series: Vec<f64> = [6, 8, 10, 12]
        .iter()
        .map(|&t| {
            let vals: Vec<f64> = fixture.iter().map(|s| s.max_dist[t - 1]).collect();
            stats::mean_and_se(&vals).0 / t as f64
        })
        .collect();
    let rate = series[3];
    let upper = rate_upper(1.0);
    let pass = (upper - 0.12..=upper).contains(&rate);
    CriterionReport {
        index: 7,
        name: "max_rate",
        pass,
        exploratory: false,
        details: format!(
            "mean Max/t at t=6,8,10,12: {:.3} {:.3} {:.3} {:.3} vs [{:.3}, {:.3}]",
            series[0],
            series[1],
            series[2],
            series[3],
            upper - 0.12,
            upper
        ),
    }
}

/// In the transient phase (lambda = 0.1) the minimal distance grows at
/// r_* = 1/2 - sqrt(0.2): replica mean of Min(12)/12 in [r_*, r_* + 0.12],
/// and the centered minimum positive in at least 80 percent of replicas.
pub fn criterion_08() -> CriterionReport {
    let master = RandomStream::from_seed(1008);
    let replicas = 50usize;
    let mins: Vec<f64> = (0..replicas)
        .map(|i| {
            let mut config = RunConfig::new(0.1, 12.0);
            config.seed = master.replica(i as u64).seed();
            let result = run(&config).expect("within cap");
            max_min_distance(&result.populations[0], HalfPlanePoint::BASE).1
        })
        .collect();
    let lower = rate_lower(0.1);
    let (mean, _) = stats::mean_and_se(&mins);
    let rate = mean / 12.0;
    let positive =
        mins.iter().filter(|m| **m - lower * 12.0 > 0.0).count() as f64 / replicas as f64;
    let rate_ok = (lower..=lower + 0.12).contains(&rate);
    let pass = rate_ok && positive >= 0.8;
    CriterionReport {
        index: 8,
        name: "min_rate",
        pass,
        exploratory: false,
        details: format!(
            "mean Min/t {rate:.4} vs [{:.4}, {:.4}]; centered positive {positive:.2} vs >= 0.8",
            lower,
            lower + 0.12
        ),
    }
}

fn occupation_fractions(lambda: f64, master: RandomStream) -> Vec<f64> {
    let replicas = 500usize;
    let snapshots = [10.0, 25.0, 40.0];
    let occupied: Vec<[bool; 3]> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut config = RunConfig::new(lambda, 40.0);
            config.snapshot_times = snapshots.to_vec();
            config.seed = master.replica(i).seed();
            let result = run(&config).expect("within cap");
            let mut flags = [false; 3];
            for (j, pop) in result.populations.iter().enumerate() {
                flags[j] = pop.particles.iter().any(|p| dist_to_base(p.position) <= 2.0);
            }
            flags
        })
        .collect();
    (0..3)
        .map(|j| occupied.iter().filter(|f| f[j]).count() as f64 / replicas as f64)
        .collect()
}

/// Recurrence transition at lambda = 1/8: occupation of the radius-2 ball
/// around the origin decays strictly at lambda = 0.05 and stays above one
/// half at lambda = 0.25, sampled at t in {10, 25, 40} over 500 replicas.
pub fn criterion_09() -> CriterionReport {
    let master = RandomStream::from_seed(1009);
    let low = occupation_fractions(0.05, master.child(0));
    let high = occupation_fractions(0.25, master.child(1));
    let decays = low[0] > low[1] && low[1] > low[2];
    let stays = high.iter().all(|f| *f > 0.5);
    let pass = decays && stays;
    CriterionReport {
        index: 9,
        name: "regime_probe",
        pass,
        exploratory: false,
        details: format!(
            "lambda 0.05: {:.3} {:.3} {:.3} (strict decay {decays}); lambda 0.25: {:.3} {:.3} {:.3} (>0.5 {stays})",
            low[0], low[1], low[2], high[0], high[1], high[2]
        ),
    }
}

/// Distance CLT inside the population at t=10: the median per-replica KS
/// statistic of the standardized distances stays below 0.1, and its median
/// gap to the vertical calibration KS stays below 0.05.
pub fn criterion_10() -> CriterionReport {
    let fixture = &unit_rate_fixture()[..100];
    let mut ks = Vec::new();
    let mut gaps = Vec::new();
    for s in fixture {
        if s.ks_distance.is_finite() && s.ks_vertical.is_finite() {
            ks.push(s.ks_distance);
            gaps.push(s.ks_distance - s.ks_vertical);
        }
    }
    let med_ks = stats::median(&ks);
    let med_gap = stats::median(&gaps);
    let pass = med_ks < 0.1 && med_gap < 0.05;
    CriterionReport {
        index: 10,
        name: "distance_clt",
        pass,
        exploratory: false,
        details: format!("median KS {med_ks:.4} vs 0.1; median gap {med_gap:.4} vs 0.05 (n={})", ks.len()),
    }
}

/// The population's mean distance climbs at speed 1/2: least-squares slope
/// of the replica-averaged mean distance over t = 1..12 in [0.45, 0.55].
pub fn criterion_11() -> CriterionReport {
    let fixture = &unit_rate_fixture()[..50];
    let ts: Vec<f64> = (1..=FIXTURE_HORIZON).map(|j| j as f64).collect();
    let means: Vec<f64> = (0..FIXTURE_HORIZON)
        .map(|j| {
            let vals: Vec<f64> = fixture.iter().map(|s| s.mean_dist[j]).collect();
            stats::mean_and_se(&vals).0
        })
        .collect();
    let slope = stats::least_squares(&ts, &means).slope;
    let pass = (0.45..=0.55).contains(&slope);
    CriterionReport {
        index: 11,
        name: "escape_slope",
        pass,
        exploratory: false,
        details: format!("slope {slope:.4} vs [0.45, 0.55]"),
    }
}

/// Boundary mixing at t=10. From the origin the replica-averaged arc masses
/// over 16 arcs are uniform (chi-square of standardized deviations at the
/// 0.999 quantile over 200 replicas); from z0 = 0.5 every arc mass is within
/// 3 se of its harmonic-measure mass.
pub fn criterion_12() -> CriterionReport {
    let fixture = unit_rate_fixture();
    let bins = 16usize;
    let mut stat = 0.0;
    for j in 0..bins {
        let vals: Vec<f64> = fixture.iter().map(|s| s.masses16[j]).collect();
        let (mean, se) = stats::mean_and_se(&vals);
        let z = (mean - 1.0 / bins as f64) / se;
        stat += z * z;
    }
    let threshold = stats::chi2_quantile(0.999, bins);
    let uniform_ok = stat <= threshold;

    let master = RandomStream::from_seed(1012);
    let z0 = DiskPoint::new(0.5, 0.0).expect("inside disk");
    let start = disk_to_halfplane(z0);
    let replicas = 200usize;
    let masses: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut config = RunConfig::new(1.0, 10.0);
            config.start = start;
            config.seed = master.replica(i).seed();
            let result = run(&config).expect("within cap");
            boundary_measure(&result.populations[0], bins)
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let mut max_z = 0.0f64;
    for j in 0..bins {
        let vals: Vec<f64> = masses.iter().map(|m| m[j]).collect();
        let (mean, se) = stats::mean_and_se(&vals);
        let a = -std::f64::consts::PI + tau * j as f64 / bins as f64;
        let reference = poisson_arc_mass(z0, a, a + tau / bins as f64);
        max_z = max_z.max((mean - reference).abs() / se);
    }
    let poisson_ok = max_z <= 3.0;
    let pass = uniform_ok && poisson_ok;
    CriterionReport {
        index: 12,
        name: "boundary_mass",
        pass,
        exploratory: false,
        details: format!(
            "uniform chi2 {stat:.2} vs {threshold:.2}; off-center max |z| {max_z:.2} vs 3"
        ),
    }
}

/// The limit boundary measure is diffuse: between t=6 and t=12 the occupied
/// fine-arc count (2^10 arcs) rises and the largest single-arc mass falls,
/// each in at least 90 percent of 100 replicas.
pub fn criterion_13() -> CriterionReport {
    let fixture = &unit_rate_fixture()[..100];
    let n = fixture.len() as f64;
    let more = fixture.iter().filter(|s| s.occupied[1] > s.occupied[0]).count() as f64 / n;
    let less = fixture.iter().filter(|s| s.max_mass[1] < s.max_mass[0]).count() as f64 / n;
    let pass = more >= 0.9 && less >= 0.9;
    CriterionReport {
        index: 13,
        name: "atom_decay",
        pass,
        exploratory: false,
        details: format!("occupied up {more:.2} vs >= 0.9; max mass down {less:.2} vs >= 0.9"),
    }
}

/// Exploratory: at the critical rate lambda = 1/8 the box-counting slope of
/// the pooled boundary directions over 50 replicas at t=12 sits within 0.15
/// of 1/2. Informational only; never gates the run.
pub fn criterion_14() -> CriterionReport {
    let master = RandomStream::from_seed(1014);
    let replicas = 50usize;
    let mut angles = Vec::new();
    for i in 0..replicas {
        let mut config = RunConfig::new(0.125, 12.0);
        config.seed = master.replica(i as u64).seed();
        let result = run(&config).expect("within cap");
        for p in &result.populations[0].particles {
            angles.push(crate::geometry::radial_projection_halfplane(p.position).angle());
        }
    }
    let (slope, detail) = match box_dimension(&angles, &default_scales()) {
        Ok(est) => (est.slope, format!("slope {:.3} vs 0.5 +- 0.15 ({} angles)", est.slope, angles.len())),
        Err(e) => (f64::NAN, format!("not estimable: {e}")),
    };
    CriterionReport {
        index: 14,
        name: "box_dimension",
        pass: (slope - 0.5).abs() <= 0.15,
        exploratory: true,
        details: detail,
    }
}

fn moebius_invariance_ok() -> (bool, f64) {
    let mut rng = RandomStream::from_seed(1015).motion_rng();
    let disk_point = |rng: &mut rand_chacha::ChaCha8Rng, rmax: f64| {
        let r = rng.random_range(0.0..rmax);
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        DiskPoint::new(r * theta.cos(), r * theta.sin()).expect("inside disk")
    };
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let z0 = disk_point(&mut rng, 0.8);
        let rot = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let g = MoebiusMap::gamma(z0).compose(&MoebiusMap::rotation(rot));
        let p = disk_point(&mut rng, 0.9);
        let q = disk_point(&mut rng, 0.9);
        let gp = g.apply(p).expect("image stays inside the disk");
        let gq = g.apply(q).expect("image stays inside the disk");
        worst = worst.max((crate::geometry::dist_disk(gp, gq) - crate::geometry::dist_disk(p, q)).abs());
    }
    (worst <= 1e-9, worst)
}

fn chart_roundtrip_ok() -> (bool, f64) {
    let mut worst = 0.0f64;
    for &r in &[0.0, 0.3, 0.7, 0.9, 0.999] {
        for k in 0..12 {
            let theta = std::f64::consts::TAU * k as f64 / 12.0;
            let z = DiskPoint::new(r * theta.cos(), r * theta.sin()).expect("inside disk");
            let back = halfplane_to_disk(disk_to_halfplane(z)).expect("representable");
            worst = worst.max((back.re() - z.re()).abs().max((back.im() - z.im()).abs()));
        }
    }
    (worst <= 1e-12, worst)
}

fn poisson_normalization_ok() -> (bool, f64) {
    let pi = std::f64::consts::PI;
    let mut worst = 0.0f64;
    for &(x, y) in &[(0.0, 0.0), (0.3, 0.2), (0.0, -0.7), (0.9, 0.0), (-0.5, 0.5)] {
        let z0 = DiskPoint::new(x, y).expect("inside disk");
        worst = worst.max((poisson_arc_mass(z0, -pi, pi) - 1.0).abs());
        assert!(poisson_kernel(z0, BoundaryPoint::new(1.0)) > 0.0);
    }
    (worst <= 1e-8, worst)
}

fn equivariance_ok() -> (bool, f64) {
    let h0 = HalfPlanePoint::new(0.4, 0.3);
    let mut base = RunConfig::new(1.0, 3.0);
    base.seed = 1015;
    base.snapshot_times = vec![1.0, 3.0];
    let mut shifted = base.clone();
    shifted.start = h0;
    let a = run(&base).expect("within cap");
    let b = run(&shifted).expect("within cap");
    let scale = h0.w.exp();
    let mut worst = 0.0f64;
    for (pa, pb) in a.populations.iter().zip(&b.populations) {
        for (x, y) in pa.particles.iter().zip(&pb.particles) {
            let moved = HalfPlanePoint::new(h0.u + scale * x.position.u, h0.w + x.position.w);
            worst = worst.max((moved.u - y.position.u).abs().max((moved.w - y.position.w).abs()));
        }
    }
    (worst <= 1e-8, worst)
}

fn determinism_ok() -> bool {
    let text = "kind = rates\nlambda = 1\nt = 4\nsnapshots = 1, 2, 3, 4\nreplicas = 20\nseed = 9\n";
    let spec = parse_spec(text).expect("valid spec");
    let on = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        pool.install(|| execute(&spec, false).expect("runs"))
    };
    let one = on(1);
    let two = on(2);
    let again = on(2);
    render_summary(&one) == render_summary(&two)
        && render_summary(&two) == render_summary(&again)
        && one.tables[0].rows == two.tables[0].rows
        && one.spec_hash == two.spec_hash
}

fn martingale_merge_ok() -> bool {
    unit_rate_fixture().iter().all(|s| s.lambda_total_12 == s.martingale[11])
}

/// Determinism and exact-structure bundle: byte-identical summaries across
/// reruns and worker counts, isometry invariance of the distance, chart
/// round-trips, harmonic-measure normalization, equivariance of a full run
/// under a start isometry, and the weighted measure total matching the
/// population martingale bit for bit.
pub fn criterion_15() -> CriterionReport {
    let deterministic = determinism_ok();
    let (moebius, worst_m) = moebius_invariance_ok();
    let (charts, worst_c) = chart_roundtrip_ok();
    let (poisson, worst_p) = poisson_normalization_ok();
    let (equivariant, worst_e) = equivariance_ok();
    let merged = martingale_merge_ok();
    let pass = deterministic && moebius && charts && poisson && equivariant && merged;
    CriterionReport {
        index: 15,
        name: "determinism",
        pass,
        exploratory: false,
        details: format!(
            "summaries {deterministic}; isometry {worst_m:.1e}<=1e-9; charts {worst_c:.1e}<=1e-12; kernel {worst_p:.1e}<=1e-8; equivariance {worst_e:.1e}<=1e-8; measure total exact {merged}"
        ),
    }
}

pub fn all_criteria() -> Vec<CriterionReport> {
    vec![
        criterion_01(),
        criterion_02(),
        criterion_03(),
        criterion_04(),
        criterion_05(),
        criterion_06(),
        criterion_07(),
        criterion_08(),
        criterion_09(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
        criterion_13(),
        criterion_14(),
        criterion_15(),
    ]
}
