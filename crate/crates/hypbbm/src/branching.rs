//! The branching engine: a Yule tree drives fission, every edge carries an
//! independent Brownian segment started at its parent's endpoint. Snapshot
//! times land on exact sub-steps of the per-edge grid, so populations need
//! no path interpolation.

use crate::geometry::{dist_halfplane, dist_to_base, radial_projection_halfplane, HalfPlanePoint};
use crate::moebius::MoebiusMap;
use crate::motion::{self, StepScheme};
use crate::rng::RandomStream;
use crate::yule::{self, NodeAddress, YuleError, YuleTree, DEFAULT_VERTEX_CAP};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lambda: f64,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub start: HalfPlanePoint,
    pub scheme: StepScheme,
    pub seed: u64,
    pub particle_cap: usize,
    /// Track the running maximum of the distance to the start along each
    /// ancestral line; costs one distance evaluation per step.
    pub track_path_max: bool,
}

impl RunConfig {
    pub fn new(lambda: f64, horizon: f64) -> Self {
        RunConfig {
            lambda,
            horizon,
            snapshot_times: vec![horizon],
            start: HalfPlanePoint::BASE,
            scheme: StepScheme::default(),
            seed: 0,
            particle_cap: DEFAULT_VERTEX_CAP,
            track_path_max: false,
        }
    }

    fn validate(&self) {
        assert!(self.lambda > 0.0 && self.horizon >= 0.0);
        let mut last = 0.0;
        for &t in &self.snapshot_times {
            assert!((0.0..=self.horizon).contains(&t), "snapshot {t} outside [0, {}]", self.horizon);
            assert!(t >= last, "snapshot times not sorted");
            last = t;
        }
    }
}

/// A member of a population snapshot: the tree point (edge + offset) and
/// the simulated position there.
#[derive(Debug, Clone)]
pub struct Particle {
    pub address: NodeAddress,
    pub offset: f64,
    pub position: HalfPlanePoint,
    /// Running maximum of ρ(path, start) along the ancestral line, when
    /// tracking is on.
    pub path_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub t: f64,
    pub particles: Vec<Particle>,
}

impl Population {
    pub fn n(&self) -> usize {
        self.particles.len()
    }
}

/// Finished simulation: populations at the requested times plus enough
/// per-edge state to rebuild group elements on demand.
#[derive(Debug)]
pub struct RunResult {
    pub populations: Vec<Population>,
    pub tree: YuleTree,
    pub start: HalfPlanePoint,
    // simulated endpoint and running max of each fully-covered edge
    endpoints: Vec<Option<(HalfPlanePoint, f64)>>,
}

pub fn run(config: &RunConfig) -> Result<RunResult, YuleError> {
    config.validate();
    let stream = RandomStream::from_seed(config.seed);
    let tree = yule::sample_tree(config.lambda, config.horizon, stream, config.particle_cap)?;
    let snaps = &config.snapshot_times;
    let mut collected: Vec<Vec<Particle>> = snaps.iter().map(|_| Vec::new()).collect();
    let mut endpoints: Vec<Option<(HalfPlanePoint, f64)>> = vec![None; tree.vertex_count()];

    for i in 0..tree.vertex_count() {
        let node = node_view(&tree, i);
        let (edge_start, incoming_max) = match node.parent {
            None => (config.start, 0.0),
            Some(p) => endpoints[p].expect("parent edge simulated before child"),
        };
        // cover the full edge when it fissions inside the horizon, otherwise
        // only out to the last snapshot the edge still owns
        let fissions = node.end < config.horizon;
        let lo = snaps.partition_point(|&t| t <= node.birth);
        let covered = if fissions {
            node.len
        } else {
            let hi = snaps.partition_point(|&t| t <= node.end.min(config.horizon));
            if hi == lo {
                // edge owns no snapshot and never fissions: nothing to simulate
                continue;
            }
            snaps[hi - 1] - node.birth
        };
        let hi = snaps.partition_point(|&t| t <= node.birth + covered);

        let mut rng = node.stream.motion_rng();
        let mut p = edge_start;
        let mut run_max = incoming_max;
        let mut t = 0.0;
        let mut j: u64 = 1;
        let mut si = lo;
        while t < covered {
            let g = (j as f64 * config.scheme.dt_max).min(covered);
            let mut next = g;
            if si < hi {
                let snap_off = snaps[si] - node.birth;
                if snap_off < next {
                    next = snap_off;
                }
            }
            if next > t {
                p = motion::step(p, next - t, &mut rng, &config.scheme);
                t = next;
                if config.track_path_max {
                    run_max = run_max.max(dist_halfplane(p, config.start));
                }
            }
            while si < hi && snaps[si] - node.birth <= t {
                collected[si].push(Particle {
                    address: tree.address(i),
                    offset: t,
                    position: p,
                    path_max: config.track_path_max.then_some(run_max),
                });
                si += 1;
            }
            if t >= g {
                j += 1;
            }
        }
        if fissions {
            endpoints[i] = Some((p, run_max));
        }
    }

    let populations = snaps
        .iter()
        .zip(collected)
        .map(|(&t, mut particles)| {
            if t == 0.0 {
                particles = vec![Particle {
                    address: NodeAddress::ROOT,
                    offset: 0.0,
                    position: config.start,
                    path_max: config.track_path_max.then_some(0.0),
                }];
            }
            Population { t, particles }
        })
        .collect();

    Ok(RunResult { populations, tree, start: config.start, endpoints })
}

struct NodeView {
    parent: Option<usize>,
    birth: f64,
    len: f64,
    end: f64,
    stream: RandomStream,
}

fn node_view(tree: &YuleTree, i: usize) -> NodeView {
    let (parent, birth, len, stream) = tree.node_parts(i);
    NodeView { parent, birth, len, end: birth + len, stream }
}

/// Value carried by one atom of an empirical measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Atom {
    Point(HalfPlanePoint),
    Boundary(crate::geometry::BoundaryPoint),
    Real(f64),
}

impl Atom {
    pub fn real(&self) -> Option<f64> {
        match self {
            Atom::Real(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(Atom, f64)>,
    pub total_weight: f64,
}

impl EmpiricalMeasure {
    pub fn reals(&self) -> Vec<f64> {
        self.atoms.iter().filter_map(|(a, _)| a.real()).collect()
    }

    pub fn boundary_angles(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .filter_map(|(a, _)| match a {
                Atom::Boundary(b) => Some(b.angle()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pushforward {
    Identity,
    Radial,
    Vertical,
    Distance,
    RealPart,
}

/// Normalized empirical distribution of a snapshot under a pushforward.
/// Weights are all 1/N(t).
pub fn empirical(pop: &Population, pushforward: Pushforward) -> EmpiricalMeasure {
    assert!(!pop.particles.is_empty(), "empty population");
    let w = 1.0 / pop.n() as f64;
    let atoms = pop
        .particles
        .iter()
        .map(|part| {
            let atom = match pushforward {
                Pushforward::Identity => Atom::Point(part.position),
                Pushforward::Radial => Atom::Boundary(radial_projection_halfplane(part.position)),
                Pushforward::Vertical => Atom::Real(-part.position.w),
                Pushforward::Distance => Atom::Real(dist_to_base(part.position)),
                Pushforward::RealPart => Atom::Real(part.position.u),
            };
            (atom, w)
        })
        .collect();
    EmpiricalMeasure { atoms, total_weight: 1.0 }
}

/// Unnormalized copy of the snapshot weighted by e^(-lambda t); its total
/// weight is the population martingale value.
pub fn lambda_measure(pop: &Population, lambda: f64) -> EmpiricalMeasure {
    assert!(!pop.particles.is_empty(), "empty population");
    let w = (-lambda * pop.t).exp();
    let atoms = pop.particles.iter().map(|p| (Atom::Point(p.position), w)).collect();
    EmpiricalMeasure { atoms, total_weight: pop.n() as f64 * w }
}

/// Bounded test functionals for the many-to-one comparison.
#[derive(Debug, Clone, Copy)]
pub enum TestFunctional {
    One,
    /// indicator{ρ(endpoint, base) ≤ radius}
    BallIndicator { radius: f64 },
    /// indicator{running max of ρ(path, base) ≤ c}
    PathMaxBelow { c: f64 },
}

/// Both sides of the population identity E[Σ_τ f] = e^(λt) E[f(single BM)],
/// estimated by independent replica ensembles; returns (lhs, rhs, standard
/// errors).
pub fn many_to_one(
    f: TestFunctional,
    t: f64,
    lambda: f64,
    bbm_replicas: usize,
    bm_replicas: usize,
    scheme: &StepScheme,
    stream: RandomStream,
) -> Result<(f64, f64, (f64, f64)), YuleError> {
    assert!(bbm_replicas >= 100 && bm_replicas >= 100);
    let track = matches!(f, TestFunctional::PathMaxBelow { .. });
    let mut lhs = Vec::with_capacity(bbm_replicas);
    for i in 0..bbm_replicas {
        let mut config = RunConfig::new(lambda, t);
        config.scheme = *scheme;
        config.seed = stream.child(0).replica(i as u64).seed();
        config.track_path_max = track;
        let result = run(&config)?;
        let pop = &result.populations[0];
        let total: f64 = pop.particles.iter().map(|p| eval_functional(f, p)).sum();
        lhs.push(total);
    }
    let scale = (lambda * t).exp();
    let mut rhs = Vec::with_capacity(bm_replicas);
    for i in 0..bm_replicas {
        let s = stream.child(1).replica(i as u64);
        let v = match f {
            TestFunctional::One => 1.0,
            TestFunctional::BallIndicator { radius } => {
                let end = motion::endpoint_at(HalfPlanePoint::BASE, t, scheme, s);
                if dist_to_base(end) <= radius { 1.0 } else { 0.0 }
            }
            TestFunctional::PathMaxBelow { c } => {
                let m = motion::max_distance_on_interval(HalfPlanePoint::BASE, t, scheme, s);
                if m <= c { 1.0 } else { 0.0 }
            }
        };
        rhs.push(v);
    }
    let (lm, lse) = crate::stats::mean_and_se(&lhs);
    let (rm, rse) = crate::stats::mean_and_se(&rhs);
    Ok((lm, scale * rm, (lse, scale * rse)))
}

fn eval_functional(f: TestFunctional, p: &Particle) -> f64 {
    match f {
        TestFunctional::One => 1.0,
        TestFunctional::BallIndicator { radius } => {
            if dist_to_base(p.position) <= radius { 1.0 } else { 0.0 }
        }
        TestFunctional::PathMaxBelow { c } => {
            let m = p.path_max.expect("path max tracking was off");
            if m <= c { 1.0 } else { 0.0 }
        }
    }
}

/// Fresh-frame endpoint of a fully simulated edge: the endpoint the same
/// noise would have produced had the edge started at the base point. The
/// started-at-parent edge is the exact affine image of the fresh edge.
fn fresh_endpoint(start: HalfPlanePoint, end: HalfPlanePoint) -> HalfPlanePoint {
    HalfPlanePoint::new((end.u - start.u) * (-start.w).exp(), end.w - start.w)
}

/// Product of the per-edge group letters along the prefixes of v. Composing
/// with the start isometry and applying to the base point recovers the
/// recorded position at the vertex below v.
pub fn group_element(result: &RunResult, v: &NodeAddress) -> Result<MoebiusMap, YuleError> {
    let mut g = MoebiusMap::IDENTITY;
    let mut idx = result.tree.index_of(&NodeAddress::ROOT)?;
    let mut start = result.start;
    for depth in 0..=v.depth() {
        if depth > 0 {
            let side = v.sides()[depth - 1];
            idx = result.tree.child_of(idx, side).ok_or_else(|| YuleError::UnknownAddress {
                address: v.to_string(),
            })?;
        }
        let (end, _) = result.endpoints[idx].ok_or_else(|| YuleError::OutOfHorizon {
            t: node_view(&result.tree, idx).end,
            horizon: result.tree.horizon,
        })?;
        let fresh = fresh_endpoint(start, end);
        let z = crate::geometry::halfplane_to_disk(fresh).map_err(|_| YuleError::OutOfHorizon {
            t: node_view(&result.tree, idx).end,
            horizon: result.tree.horizon,
        })?;
        g = g.compose(&MoebiusMap::gamma(z));
        start = end;
    }
    Ok(g)
}
