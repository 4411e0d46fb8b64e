//! Experiment execution: run a validated spec replica by replica, reduce to
//! summary rows plus kind-specific tables and test reports, and write the
//! artifact set (CSV, JSON report, gnuplot script, optional particle dump).

use crate::branching::{many_to_one, run, Particle, Population, RunConfig, TestFunctional};
use crate::config::{ExperimentKind, ExperimentSpec};
use crate::estimators::{
    self, box_dimension, default_scales, distance_clt_test, log_correction, ls_dimension,
    max_min_distance, r_star, r_star_lower, support_dimension, vertical_clt_test, Extremum,
    RateSeries, TestReport,
};
use crate::geometry::{dist_halfplane, halfplane_to_disk, radial_projection_halfplane, HalfPlanePoint};
use crate::kernel::poisson_arc_mass;
use crate::motion;
use crate::rng::RandomStream;
use crate::stats;
use crate::yule::{NodeAddress, YuleError};
use rayon::prelude::*;
use serde_json::json;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("population cap {cap} exceeded; use a smaller horizon or lambda, or raise particle_cap")]
    CapExceeded { cap: usize },
    #[error("simulation: {0}")]
    Run(YuleError),
    #[error("estimator: {0}")]
    Estimator(#[from] crate::estimators::EstimatorError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn map_run_err(e: YuleError) -> ExperimentError {
    match e {
        YuleError::PopulationCapExceeded { cap } => ExperimentError::CapExceeded { cap },
        other => ExperimentError::Run(other),
    }
}

/// One summary line: a single replica observed at a single snapshot time.
/// Distances are hyperbolic, measured from the start point.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub replica: usize,
    pub t: f64,
    pub n: usize,
    pub martingale: f64,
    pub max_dist: f64,
    pub min_dist: f64,
    pub mean_dist: f64,
}

/// A named CSV block produced by one estimator.
#[derive(Debug, Clone)]
pub struct Table {
    pub file_name: String,
    pub schema: String,
    pub header: String,
    pub rows: Vec<String>,
}

/// Everything a finished run produces, before any of it touches disk.
#[derive(Debug)]
pub struct RunRecord {
    pub kind: ExperimentKind,
    pub spec_hash: String,
    pub seed: u64,
    pub version: String,
    pub rows: Vec<SummaryRow>,
    pub tables: Vec<Table>,
    pub reports: Vec<TestReport>,
    pub particle_lines: Option<Vec<String>>,
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

struct ReplicaSummary {
    rows: Vec<SummaryRow>,
    final_n: usize,
    bin_masses: Option<Vec<f64>>,
    angles: Option<Vec<f64>>,
    occupied: Option<Vec<bool>>,
    clt: Option<(f64, f64)>,
    lines: Vec<String>,
}

fn particle_lines(replica: usize, pop: &Population, out: &mut Vec<String>) {
    for p in &pop.particles {
        let (re, im) = match halfplane_to_disk(p.position) {
            Ok(z) => (json!(z.re()), json!(z.im())),
            Err(_) => (json!(null), json!(null)),
        };
        out.push(
            json!({
                "replica": replica,
                "t": pop.t,
                "address": p.address.to_string(),
                "u": p.position.u,
                "w": p.position.w,
                "disk_re": re,
                "disk_im": im,
            })
            .to_string(),
        );
    }
}

fn mean_dist_from(pop: &Population, origin: HalfPlanePoint) -> f64 {
    stats::kahan_sum(pop.particles.iter().map(|p| dist_halfplane(p.position, origin))) / pop.n() as f64
}

fn summarize_population(replica: usize, pop: &Population, spec: &ExperimentSpec) -> SummaryRow {
    let (max_dist, min_dist) = max_min_distance(pop, spec.start);
    SummaryRow {
        replica,
        t: pop.t,
        n: pop.n(),
        martingale: pop.n() as f64 * (-spec.lambda * pop.t).exp(),
        max_dist,
        min_dist,
        mean_dist: mean_dist_from(pop, spec.start),
    }
}

/// Per-replica pass for every kind that runs the full branching process.
/// Reductions happen here so whole populations never accumulate across
/// replicas.
fn branching_replica(
    spec: &ExperimentSpec,
    master: RandomStream,
    replica: usize,
    dump: bool,
) -> Result<ReplicaSummary, ExperimentError> {
    let mut config = RunConfig::new(spec.lambda, spec.horizon);
    config.snapshot_times = spec.snapshots.clone();
    config.start = spec.start;
    config.scheme = spec.scheme;
    config.particle_cap = spec.particle_cap;
    config.seed = master.replica(replica as u64).seed();
    let result = run(&config).map_err(map_run_err)?;

    let mut rows = Vec::with_capacity(result.populations.len());
    let mut lines = Vec::new();
    for pop in &result.populations {
        rows.push(summarize_population(replica, pop, spec));
        if dump {
            particle_lines(replica, pop, &mut lines);
        }
    }
    let last = result.populations.last().expect("snapshots are nonempty");

    let bin_masses = matches!(spec.kind, ExperimentKind::Boundary)
        .then(|| estimators::boundary_measure(last, spec.bins));
    let angles = matches!(spec.kind, ExperimentKind::Dimension).then(|| {
        last.particles.iter().map(|p| radial_projection_halfplane(p.position).angle()).collect()
    });
    let occupied = matches!(spec.kind, ExperimentKind::RegimeProbe).then(|| {
        result
            .populations
            .iter()
            .map(|pop| {
                pop.particles.iter().any(|p| dist_halfplane(p.position, spec.start) <= spec.ball_radius)
            })
            .collect()
    });
    let clt = matches!(spec.kind, ExperimentKind::Clt)
        .then(|| {
            let d = distance_clt_test(last).ok()?;
            let v = vertical_clt_test(last).ok()?;
            Some((d.statistic, v.statistic))
        })
        .flatten();

    Ok(ReplicaSummary { rows, final_n: last.n(), bin_masses, angles, occupied, clt, lines })
}

fn single_bm_replica(
    spec: &ExperimentSpec,
    master: RandomStream,
    replica: usize,
    dump: bool,
) -> ReplicaSummary {
    let stream = master.replica(replica as u64);
    let mut rows = Vec::with_capacity(spec.snapshots.len());
    let mut lines = Vec::new();
    let mut last = spec.start;
    for &t in &spec.snapshots {
        let end = motion::endpoint_at(spec.start, t, &spec.scheme, stream);
        let d = dist_halfplane(end, spec.start);
        rows.push(SummaryRow {
            replica,
            t,
            n: 1,
            martingale: 1.0,
            max_dist: d,
            min_dist: d,
            mean_dist: d,
        });
        if dump {
            let pop = Population {
                t,
                particles: vec![Particle {
                    address: NodeAddress::ROOT,
                    offset: t,
                    position: end,
                    path_max: None,
                }],
            };
            particle_lines(replica, &pop, &mut lines);
        }
        last = end;
    }
    // vertical displacement in the frame of the start point; its law is
    // exactly Gaussian with mean t/2 and variance t
    let vertical = -(last.w - spec.start.w);
    let distance = dist_halfplane(last, spec.start);
    ReplicaSummary {
        rows,
        final_n: 1,
        bin_masses: None,
        angles: None,
        occupied: None,
        clt: Some((distance, vertical)),
        lines,
    }
}

fn csv_f(v: f64) -> String {
    format!("{v}")
}

fn collect_rows(summaries: &[ReplicaSummary]) -> Vec<SummaryRow> {
    summaries.iter().flat_map(|s| s.rows.iter().cloned()).collect()
}

/// Mean and standard error per snapshot index of a per-row field, across
/// replicas in index order.
fn per_snapshot_stats(
    summaries: &[ReplicaSummary],
    snapshots: usize,
    field: impl Fn(&SummaryRow) -> f64,
) -> Vec<(f64, f64)> {
    (0..snapshots)
        .map(|j| {
            let vals: Vec<f64> = summaries.iter().map(|s| field(&s.rows[j])).collect();
            stats::mean_and_se(&vals)
        })
        .collect()
}

pub fn execute(spec: &ExperimentSpec, dump_particles: bool) -> Result<RunRecord, ExperimentError> {
    let master = RandomStream::from_seed(spec.seed);
    let summaries: Vec<ReplicaSummary> = match spec.kind {
        ExperimentKind::SingleBm => (0..spec.replicas)
            .into_par_iter()
            .map(|i| single_bm_replica(spec, master, i, dump_particles))
            .collect(),
        ExperimentKind::ManyToOne => Vec::new(),
        _ => (0..spec.replicas)
            .into_par_iter()
            .map(|i| branching_replica(spec, master, i, dump_particles))
            .collect::<Result<_, _>>()?,
    };

    let mut tables = Vec::new();
    let mut reports = Vec::new();
    match spec.kind {
        ExperimentKind::PopulationLaw => population_law_outputs(spec, &summaries, &mut tables, &mut reports),
        ExperimentKind::SingleBm => single_bm_outputs(spec, &summaries, &mut reports),
        ExperimentKind::ManyToOne => many_to_one_outputs(spec, master, &mut tables, &mut reports)?,
        ExperimentKind::Rates => rates_outputs(spec, &summaries, &mut tables, &mut reports),
        ExperimentKind::LogCorrection => log_correction_outputs(spec, &summaries, &mut tables, &mut reports)?,
        ExperimentKind::Clt => clt_outputs(&summaries, &mut tables, &mut reports),
        ExperimentKind::Escape => escape_outputs(spec, &summaries, &mut tables, &mut reports),
        ExperimentKind::Boundary => boundary_outputs(spec, &summaries, &mut tables, &mut reports),
        ExperimentKind::Dimension => dimension_outputs(spec, &summaries, &mut tables, &mut reports)?,
        ExperimentKind::RegimeProbe => regime_outputs(spec, &summaries, &mut tables, &mut reports),
    }

    let lines: Vec<String> = summaries.iter().flat_map(|s| s.lines.iter().cloned()).collect();
    Ok(RunRecord {
        kind: spec.kind,
        spec_hash: format!("{:016x}", fnv1a(spec.canonical_string().as_bytes())),
        seed: spec.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        rows: collect_rows(&summaries),
        tables,
        reports,
        particle_lines: dump_particles.then_some(lines),
    })
}

fn population_law_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) {
    let t = *spec.snapshots.last().unwrap();
    let p = (-spec.lambda * t).exp();
    // cells 1..=10 plus one tail cell; geometric expected counts
    let mut observed = vec![0.0f64; 11];
    for s in summaries {
        let cell = if s.final_n <= 10 { s.final_n - 1 } else { 10 };
        observed[cell] += 1.0;
    }
    let m = summaries.len() as f64;
    let mut expected: Vec<f64> = (1..=10).map(|n| m * p * (1.0 - p).powi(n - 1)).collect();
    expected.push(m - expected.iter().sum::<f64>());
    let rows = (0..11)
        .map(|i| format!("{},{},{}", i + 1, observed[i], csv_f(expected[i])))
        .collect();
    tables.push(Table {
        file_name: "histogram.csv".into(),
        schema: "hypbbm.histogram.v1".into(),
        header: "bin,observed,expected".into(),
        rows,
    });

    let stat = stats::chi_square_stat(&observed, &expected);
    reports.push(TestReport::new(
        stat,
        stats::chi2_quantile(0.999, 10),
        false,
        summaries.len(),
        "population size vs geometric law, chi-square on cells {1..10, >10}",
    ));
    let ns: Vec<f64> = summaries.iter().map(|s| s.final_n as f64).collect();
    let (mean, se) = stats::mean_and_se(&ns);
    let z = (mean - (spec.lambda * t).exp()).abs() / se;
    reports.push(TestReport::new(z, 3.0, false, summaries.len(), "mean population within 3 se of exp(lambda t)"));
}

fn single_bm_outputs(spec: &ExperimentSpec, summaries: &[ReplicaSummary], reports: &mut Vec<TestReport>) {
    let t = *spec.snapshots.last().unwrap();
    let scale = t.sqrt();
    let xs: Vec<f64> = summaries
        .iter()
        .map(|s| (s.clt.expect("single bm stores endpoint stats").1 - t / 2.0) / scale)
        .collect();
    let d = stats::ks_statistic(&xs, stats::normal_cdf);
    reports.push(TestReport::new(
        d,
        stats::ks_critical(xs.len(), 1e-3),
        false,
        xs.len(),
        "vertical displacement vs its exact Gaussian law",
    ));
    let (mean, se) = stats::mean_and_se(&xs);
    reports.push(TestReport::new(
        mean.abs() / se,
        3.0,
        false,
        xs.len(),
        "standardized vertical mean within 3 se of 0",
    ));
}

fn many_to_one_outputs(
    spec: &ExperimentSpec,
    master: RandomStream,
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) -> Result<(), ExperimentError> {
    let t = *spec.snapshots.last().unwrap();
    let bm_replicas = spec.replicas.max(10_000);
    let (lhs, rhs, (lse, rse)) = many_to_one(
        TestFunctional::BallIndicator { radius: spec.ball_radius },
        t,
        spec.lambda,
        spec.replicas,
        bm_replicas,
        &spec.scheme,
        master,
    )
    .map_err(map_run_err)?;
    tables.push(Table {
        file_name: "manyone.csv".into(),
        schema: "hypbbm.manyone.v1".into(),
        header: "lhs,rhs,se_lhs,se_rhs".into(),
        rows: vec![format!("{},{},{},{}", csv_f(lhs), csv_f(rhs), csv_f(lse), csv_f(rse))],
    });
    let se = (lse * lse + rse * rse).sqrt();
    reports.push(TestReport::new(
        (lhs - rhs).abs() / se,
        3.0,
        false,
        spec.replicas + bm_replicas,
        "population identity for the ball indicator, both sides within 3 combined se",
    ));
    Ok(())
}

fn rates_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) {
    let maxes = per_snapshot_stats(summaries, spec.snapshots.len(), |r| r.max_dist);
    let mins = per_snapshot_stats(summaries, spec.snapshots.len(), |r| r.min_dist);
    let reference = r_star(spec.lambda);
    let rows = spec
        .snapshots
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            format!(
                "{},{},{},{},{}",
                csv_f(t),
                csv_f(maxes[j].0),
                csv_f(mins[j].0),
                csv_f(maxes[j].0 / t),
                csv_f(reference)
            )
        })
        .collect();
    tables.push(Table {
        file_name: "rates.csv".into(),
        schema: "hypbbm.rates.v1".into(),
        header: "t,max,min,max_over_t,reference".into(),
        rows,
    });

    let t = *spec.snapshots.last().unwrap();
    let rate = maxes.last().unwrap().0 / t;
    reports.push(TestReport::new(rate, reference - 0.12, true, summaries.len(), "max rate above r* - 0.12"));
    reports.push(TestReport::new(rate, reference, false, summaries.len(), "max rate below r*"));
    if spec.lambda <= 0.125 {
        let low = r_star_lower(spec.lambda);
        let min_rate = mins.last().unwrap().0 / t;
        reports.push(TestReport::new(min_rate, low, true, summaries.len(), "min rate above r_*"));
        reports.push(TestReport::new(min_rate, low + 0.12, false, summaries.len(), "min rate below r_* + 0.12"));
    }
}

fn log_correction_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) -> Result<(), ExperimentError> {
    let maxes = per_snapshot_stats(summaries, spec.snapshots.len(), |r| r.max_dist);
    let mins = per_snapshot_stats(summaries, spec.snapshots.len(), |r| r.min_dist);
    let max_series =
        RateSeries::new(spec.snapshots.iter().zip(&maxes).map(|(&t, &(m, _))| (t, m)).collect());
    let min_series =
        RateSeries::new(spec.snapshots.iter().zip(&mins).map(|(&t, &(m, _))| (t, m)).collect());
    let max_corr = log_correction(&max_series, spec.lambda, Extremum::Max)?;
    let min_corr = log_correction(&min_series, spec.lambda, Extremum::Min)?;
    let rows = (0..spec.snapshots.len())
        .map(|j| {
            format!(
                "{},{},{},{},{}",
                csv_f(spec.snapshots[j]),
                csv_f(max_corr.points[j].1),
                csv_f(max_corr.reference),
                csv_f(min_corr.points[j].1),
                csv_f(min_corr.reference)
            )
        })
        .collect();
    tables.push(Table {
        file_name: "logcorr.csv".into(),
        schema: "hypbbm.logcorr.v1".into(),
        header: "t,max_centered,max_reference,min_centered,min_reference".into(),
        rows,
    });

    let t = *spec.snapshots.last().unwrap();
    let low = r_star_lower(spec.lambda);
    let frac = summaries
        .iter()
        .filter(|s| s.rows.last().unwrap().min_dist - low * t > 0.0)
        .count() as f64
        / summaries.len() as f64;
    reports.push(TestReport::new(
        frac,
        0.8,
        true,
        summaries.len(),
        "centered min positive in at least 80 percent of replicas",
    ));
    Ok(())
}

fn clt_outputs(summaries: &[ReplicaSummary], tables: &mut Vec<Table>, reports: &mut Vec<TestReport>) {
    let mut rows = Vec::new();
    let mut ks_dist = Vec::new();
    let mut gaps = Vec::new();
    for (i, s) in summaries.iter().enumerate() {
        if let Some((d, v)) = s.clt {
            rows.push(format!("{},{},{},{}", i, csv_f(d), csv_f(v), csv_f(d - v)));
            ks_dist.push(d);
            gaps.push(d - v);
        }
    }
    tables.push(Table {
        file_name: "clt.csv".into(),
        schema: "hypbbm.clt.v1".into(),
        header: "replica,ks_distance,ks_vertical,gap".into(),
        rows,
    });
    reports.push(TestReport::new(
        stats::median(&ks_dist),
        0.1,
        false,
        ks_dist.len(),
        "median KS of standardized distances below 0.1",
    ));
    reports.push(TestReport::new(
        stats::median(&gaps),
        0.05,
        false,
        gaps.len(),
        "median gap between distance and vertical KS below 0.05",
    ));
}

fn escape_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) {
    let means = per_snapshot_stats(summaries, spec.snapshots.len(), |r| r.mean_dist);
    let rows = spec
        .snapshots
        .iter()
        .zip(&means)
        .map(|(&t, &(m, se))| format!("{},{},{}", csv_f(t), csv_f(m), csv_f(se)))
        .collect();
    tables.push(Table {
        file_name: "escape.csv".into(),
        schema: "hypbbm.escape.v1".into(),
        header: "t,mean_distance,se".into(),
        rows,
    });
    let ts: Vec<f64> = spec.snapshots.clone();
    let ms: Vec<f64> = means.iter().map(|&(m, _)| m).collect();
    let fit = stats::least_squares(&ts, &ms);
    reports.push(TestReport::new(
        (fit.slope - 0.5).abs(),
        0.05,
        false,
        summaries.len(),
        "mean distance slope within 0.05 of 1/2",
    ));
}

fn boundary_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) {
    let bins = spec.bins;
    let per_bin: Vec<(f64, f64)> = (0..bins)
        .map(|j| {
            let vals: Vec<f64> =
                summaries.iter().map(|s| s.bin_masses.as_ref().expect("boundary masses")[j]).collect();
            stats::mean_and_se(&vals)
        })
        .collect();
    let uniform_start = spec.start == HalfPlanePoint::BASE;
    let z0 = halfplane_to_disk(spec.start).expect("start is representable");
    let tau = std::f64::consts::TAU;
    let reference: Vec<f64> = (0..bins)
        .map(|j| {
            let a = -std::f64::consts::PI + tau * j as f64 / bins as f64;
            poisson_arc_mass(z0, a, a + tau / bins as f64)
        })
        .collect();
    let rows = (0..bins)
        .map(|j| {
            format!("{},{},{},{}", j, csv_f(per_bin[j].0), csv_f(per_bin[j].1), csv_f(reference[j]))
        })
        .collect();
    tables.push(Table {
        file_name: "boundary.csv".into(),
        schema: "hypbbm.boundary.v1".into(),
        header: "bin,mass_mean,se,reference".into(),
        rows,
    });

    if uniform_start {
        let stat: f64 =
            (0..bins).map(|j| ((per_bin[j].0 - reference[j]) / per_bin[j].1).powi(2)).sum();
        reports.push(TestReport::new(
            stat,
            stats::chi2_quantile(0.999, bins),
            false,
            summaries.len(),
            "replica-averaged arc masses uniform, chi-square on standardized deviations",
        ));
    } else {
        let stat = (0..bins)
            .map(|j| ((per_bin[j].0 - reference[j]) / per_bin[j].1).abs())
            .fold(0.0f64, f64::max);
        reports.push(TestReport::new(
            stat,
            3.0,
            false,
            summaries.len(),
            "every arc mass within 3 se of its harmonic-measure mass",
        ));
    }
}

fn dimension_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) -> Result<(), ExperimentError> {
    let mut angles = Vec::new();
    for s in summaries {
        angles.extend_from_slice(s.angles.as_ref().expect("dimension angles"));
    }
    let scales = default_scales();
    let est = box_dimension(&angles, &scales)?;
    let rows = est
        .scales
        .iter()
        .zip(&est.counts)
        .map(|(&e, &c)| format!("{},{}", csv_f(e), c))
        .collect();
    tables.push(Table {
        file_name: "dimension.csv".into(),
        schema: "hypbbm.dimension.v1".into(),
        header: "scale,occupied".into(),
        rows,
    });
    let reference = match ls_dimension(spec.lambda) {
        Ok(d) => d,
        Err(_) => support_dimension(spec.lambda),
    };
    reports.push(TestReport::new(
        (est.slope - reference).abs(),
        0.15,
        false,
        angles.len(),
        "exploratory: box-counting slope within 0.15 of the limit dimension",
    ));
    Ok(())
}

fn regime_outputs(
    spec: &ExperimentSpec,
    summaries: &[ReplicaSummary],
    tables: &mut Vec<Table>,
    reports: &mut Vec<TestReport>,
) {
    let snapshots = spec.snapshots.len();
    let fractions: Vec<(f64, f64)> = (0..snapshots)
        .map(|j| {
            let vals: Vec<f64> = summaries
                .iter()
                .map(|s| if s.occupied.as_ref().expect("occupation flags")[j] { 1.0 } else { 0.0 })
                .collect();
            stats::mean_and_se(&vals)
        })
        .collect();
    let rows = spec
        .snapshots
        .iter()
        .zip(&fractions)
        .map(|(&t, &(f, se))| format!("{},{},{}", csv_f(t), csv_f(f), csv_f(se)))
        .collect();
    tables.push(Table {
        file_name: "occupation.csv".into(),
        schema: "hypbbm.occupation.v1".into(),
        header: "t,fraction,se".into(),
        rows,
    });
    if spec.lambda > 0.125 {
        let min = fractions.iter().map(|&(f, _)| f).fold(f64::INFINITY, f64::min);
        reports.push(TestReport::new(
            min,
            0.5,
            true,
            summaries.len(),
            "recurrent regime: occupation fraction stays above one half",
        ));
    } else {
        let max_rise = fractions
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::NEG_INFINITY, f64::max);
        reports.push(TestReport::new(
            max_rise,
            0.0,
            false,
            summaries.len(),
            "transient regime: occupation fraction non-increasing",
        ));
    }
}

pub fn render_summary(record: &RunRecord) -> String {
    let mut out = String::from("# schema: hypbbm.summary.v1\nreplica,t,n,martingale,max_dist,min_dist,mean_dist\n");
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.replica,
            csv_f(r.t),
            r.n,
            csv_f(r.martingale),
            csv_f(r.max_dist),
            csv_f(r.min_dist),
            csv_f(r.mean_dist)
        ));
    }
    out
}

fn render_table(table: &Table) -> String {
    let mut out = format!("# schema: {}\n{}\n", table.schema, table.header);
    for row in &table.rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

fn plot_script(record: &RunRecord) -> String {
    let body = match record.kind {
        ExperimentKind::PopulationLaw => {
            "set style data histogram\nset style fill solid 0.6\nplot 'histogram.csv' skip 2 using 2:xtic(1) title 'observed', '' skip 2 using 3 title 'expected'"
        }
        ExperimentKind::SingleBm => {
            "plot 'summary.csv' skip 2 using 2:7 title 'distance' with points pt 7 ps 0.3, 0.5*x title 't/2'"
        }
        ExperimentKind::ManyToOne => {
            "plot 'manyone.csv' skip 2 using (0):1:3 with yerrorbars title 'branching side', '' skip 2 using (1):2:4 with yerrorbars title 'single-path side'"
        }
        ExperimentKind::Rates => {
            "plot 'rates.csv' skip 2 using 1:4 with linespoints title 'max/t', '' skip 2 using 1:5 with lines title 'r*'"
        }
        ExperimentKind::LogCorrection => {
            "plot 'logcorr.csv' skip 2 using 1:2 with linespoints title 'max centered', '' skip 2 using 1:3 with lines title 'max limit', '' skip 2 using 1:4 with linespoints title 'min centered', '' skip 2 using 1:5 with lines title 'min limit'"
        }
        ExperimentKind::Clt => {
            "plot 'clt.csv' skip 2 using 1:2 with points title 'KS distance', 0.1 title 'bound'"
        }
        ExperimentKind::Escape => {
            "plot 'escape.csv' skip 2 using 1:2:3 with yerrorbars title 'mean distance', 0.5*x title 't/2'"
        }
        ExperimentKind::Boundary => {
            "set style data histogram\nset style fill solid 0.6\nplot 'boundary.csv' skip 2 using 2:xtic(1) title 'mass', '' skip 2 using 4 title 'reference'"
        }
        ExperimentKind::Dimension => {
            "set logscale xy\nplot 'dimension.csv' skip 2 using (1/$1):2 with linespoints title 'occupied arcs'"
        }
        ExperimentKind::RegimeProbe => {
            "plot 'occupation.csv' skip 2 using 1:2:3 with yerrorbars title 'occupation fraction', 0.5 title 'one half'"
        }
    };
    format!("# gnuplot script; run: gnuplot -p plot.gp\nset datafile separator ','\n{body}\n")
}

/// Write summary.csv, one CSV per table, report.json, plot.gp, and the
/// particle dump when one was collected. Returns the artifact file names.
pub fn write_artifacts(record: &RunRecord, dir: &Path) -> Result<Vec<String>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut names = vec!["summary.csv".to_string()];
    fs::write(dir.join("summary.csv"), render_summary(record))?;
    for table in &record.tables {
        fs::write(dir.join(&table.file_name), render_table(table))?;
        names.push(table.file_name.clone());
    }
    if let Some(lines) = &record.particle_lines {
        let mut body = lines.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        fs::write(dir.join("particles.jsonl"), body)?;
        names.push("particles.jsonl".into());
    }
    fs::write(dir.join("plot.gp"), plot_script(record))?;
    names.push("plot.gp".into());

    let report = json!({
        "schema": "hypbbm.report.v1",
        "kind": record.kind.name(),
        "spec_hash": record.spec_hash,
        "seed": record.seed,
        "version": record.version,
        "reports": record.reports,
        "artifacts": names.iter().chain(std::iter::once(&"report.json".to_string())).collect::<Vec<_>>(),
    });
    fs::write(dir.join("report.json"), format!("{:#}\n", report))?;
    names.push("report.json".into());
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;

    #[test]
    fn population_law_run_is_deterministic() {
        let spec = parse_spec("kind = population_law\nlambda = 1\nt = 0.5\nreplicas = 200\nseed = 5\n").unwrap();
        let a = execute(&spec, false).unwrap();
        let b = execute(&spec, false).unwrap();
        assert_eq!(render_summary(&a), render_summary(&b));
        assert_eq!(a.spec_hash, b.spec_hash);
        assert_eq!(a.tables[0].rows, b.tables[0].rows);
        assert_eq!(a.rows.len(), 200);
    }

    #[test]
    fn summary_header_is_pinned() {
        let spec = parse_spec("kind = population_law\nt = 0.2\nreplicas = 10\n").unwrap();
        let record = execute(&spec, false).unwrap();
        let text = render_summary(&record);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# schema: hypbbm.summary.v1"));
        assert_eq!(lines.next(), Some("replica,t,n,martingale,max_dist,min_dist,mean_dist"));
    }

    #[test]
    fn rates_table_has_pinned_columns() {
        let spec =
            parse_spec("kind = rates\nlambda = 1\nt = 4\nsnapshots = 1, 2, 3, 4\nreplicas = 12\n").unwrap();
        let record = execute(&spec, false).unwrap();
        let table = record.tables.iter().find(|t| t.file_name == "rates.csv").unwrap();
        assert_eq!(table.header, "t,max,min,max_over_t,reference");
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            assert_eq!(row.split(',').count(), 5);
        }
    }

    #[test]
    fn cap_error_suggests_remedy() {
        let spec = parse_spec("kind = population_law\nlambda = 3\nt = 6\nreplicas = 1\nparticle_cap = 32\n").unwrap();
        let err = execute(&spec, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("particle_cap") && msg.contains("32"), "{msg}");
    }

    #[test]
    fn artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = parse_spec("kind = regime_probe\nlambda = 0.3\nt = 2\nsnapshots = 1, 2\nreplicas = 30\n").unwrap();
        let record = execute(&spec, true).unwrap();
        let names = write_artifacts(&record, dir.path()).unwrap();
        for name in &names {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        assert!(names.contains(&"occupation.csv".to_string()));
        assert!(names.contains(&"particles.jsonl".to_string()));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema"], "hypbbm.report.v1");
        assert_eq!(report["kind"], "regime_probe");
        assert!(report["reports"].as_array().map(|a| !a.is_empty()).unwrap_or(false));
        let first = fs::read_to_string(dir.path().join("particles.jsonl")).unwrap();
        let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert!(line["address"].is_string() && line["u"].is_number());
    }

    #[test]
    fn single_bm_reports_standard_normal() {
        let spec = parse_spec("kind = single_bm\nt = 4\nreplicas = 400\nseed = 2\n").unwrap();
        let record = execute(&spec, false).unwrap();
        assert_eq!(record.rows.len(), 400);
        assert!(record.reports.iter().all(|r| r.pass), "{:?}", record.reports);
    }
}
