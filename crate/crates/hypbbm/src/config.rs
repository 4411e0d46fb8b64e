//! Experiment specs: a flat key = value document with # comments, parsed
//! into a validated ExperimentSpec with kind-specific defaults.

use crate::geometry::{disk_to_halfplane, DiskPoint, HalfPlanePoint};
use crate::motion::{StepScheme, UIntegration};
use crate::yule::DEFAULT_VERTEX_CAP;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("key {key}: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PopulationLaw,
    SingleBm,
    ManyToOne,
    Rates,
    LogCorrection,
    Clt,
    Escape,
    Boundary,
    Dimension,
    RegimeProbe,
}

impl ExperimentKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "population_law" => Self::PopulationLaw,
            "single_bm" => Self::SingleBm,
            "many_to_one" => Self::ManyToOne,
            "rates" => Self::Rates,
            "log_correction" => Self::LogCorrection,
            "clt" => Self::Clt,
            "escape" => Self::Escape,
            "boundary" => Self::Boundary,
            "dimension" => Self::Dimension,
            "regime_probe" => Self::RegimeProbe,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PopulationLaw => "population_law",
            Self::SingleBm => "single_bm",
            Self::ManyToOne => "many_to_one",
            Self::Rates => "rates",
            Self::LogCorrection => "log_correction",
            Self::Clt => "clt",
            Self::Escape => "escape",
            Self::Boundary => "boundary",
            Self::Dimension => "dimension",
            Self::RegimeProbe => "regime_probe",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fully resolved experiment description. Field defaults depend on the kind;
/// see `defaults_for`.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub lambda: f64,
    pub horizon: f64,
    pub snapshots: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub scheme: StepScheme,
    pub start: HalfPlanePoint,
    pub particle_cap: usize,
    pub bins: usize,
    pub ball_radius: f64,
    pub out: Option<String>,
}

struct Defaults {
    horizon: f64,
    snapshots: Option<Vec<f64>>, // None means [horizon]
    replicas: usize,
    bins: usize,
    ball_radius: f64,
}

fn defaults_for(kind: ExperimentKind) -> Defaults {
    use ExperimentKind::*;
    let (horizon, snapshots, replicas): (f64, Option<Vec<f64>>, usize) = match kind {
        PopulationLaw => (1.0, None, 10_000),
        SingleBm => (4.0, None, 10_000),
        ManyToOne => (2.0, None, 2_000),
        Rates => (12.0, Some(vec![6.0, 8.0, 10.0, 12.0]), 50),
        LogCorrection => (12.0, Some(vec![6.0, 8.0, 10.0, 12.0]), 50),
        Clt => (10.0, None, 100),
        Escape => (12.0, Some((1..=12).map(f64::from).collect()), 50),
        Boundary => (10.0, None, 200),
        Dimension => (12.0, None, 50),
        RegimeProbe => (40.0, Some(vec![10.0, 25.0, 40.0]), 500),
    };
    let bins = match kind {
        Dimension => 1 << 10,
        _ => 16,
    };
    let ball_radius = match kind {
        ManyToOne => 1.0,
        _ => 2.0,
    };
    Defaults { horizon, snapshots, replicas, bins, ball_radius }
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        pairs.push((line, key.trim().to_string(), value.trim().to_string()));
    }

    let mut kind = None;
    for (line, key, value) in &pairs {
        if key == "kind" {
            kind = Some(ExperimentKind::parse(value).ok_or_else(|| ConfigError::Parse {
                line: *line,
                message: format!("unknown kind {value:?}"),
            })?);
        }
    }
    let kind = kind.ok_or_else(|| invalid("kind", "missing required key"))?;
    let d = defaults_for(kind);

    let mut spec = ExperimentSpec {
        kind,
        lambda: 1.0,
        horizon: d.horizon,
        snapshots: Vec::new(),
        replicas: d.replicas,
        seed: 0,
        scheme: StepScheme::default(),
        start: HalfPlanePoint::BASE,
        particle_cap: DEFAULT_VERTEX_CAP,
        bins: d.bins,
        ball_radius: d.ball_radius,
        out: None,
    };
    let mut snapshots_given = None;
    let mut horizon_given = false;

    for (line, key, value) in pairs {
        let bad = |msg: &str| ConfigError::Parse { line, message: format!("{key}: {msg} ({value:?})") };
        match key.as_str() {
            "kind" => {}
            "lambda" => spec.lambda = value.parse().map_err(|_| bad("not a number"))?,
            "t" => {
                spec.horizon = value.parse().map_err(|_| bad("not a number"))?;
                horizon_given = true;
            }
            "snapshots" => {
                let mut v = Vec::new();
                for part in value.split(',') {
                    v.push(part.trim().parse().map_err(|_| bad("not a number list"))?);
                }
                snapshots_given = Some(v);
            }
            "replicas" => spec.replicas = value.parse().map_err(|_| bad("not an integer"))?,
            "seed" => spec.seed = value.parse().map_err(|_| bad("not an integer"))?,
            "dt" => spec.scheme.dt_max = value.parse().map_err(|_| bad("not a number"))?,
            "u_scheme" => {
                spec.scheme.u_integration = match value.as_str() {
                    "left" => UIntegration::LeftEndpoint,
                    "trapezoid" => UIntegration::Trapezoid,
                    _ => return Err(bad("expected left or trapezoid")),
                }
            }
            "start" => spec.start = parse_start(&value).ok_or_else(|| bad("expected disk:re,im or halfplane:u,w"))?,
            "particle_cap" => spec.particle_cap = value.parse().map_err(|_| bad("not an integer"))?,
            "bins" => spec.bins = value.parse().map_err(|_| bad("not an integer"))?,
            "ball_radius" => spec.ball_radius = value.parse().map_err(|_| bad("not a number"))?,
            "out" => spec.out = Some(value),
            _ => return Err(ConfigError::Parse { line, message: format!("unknown key {key:?}") }),
        }
    }

    spec.snapshots = match snapshots_given {
        Some(v) => v,
        None => match (&d.snapshots, horizon_given) {
            // an explicit horizon overrides kind-default snapshot grids
            (Some(v), false) => v.clone(),
            _ => vec![spec.horizon],
        },
    };

    validate(&spec)?;
    Ok(spec)
}

fn parse_start(s: &str) -> Option<HalfPlanePoint> {
    let (chart, coords) = s.split_once(':')?;
    let (a, b) = coords.split_once(',')?;
    let a: f64 = a.trim().parse().ok()?;
    let b: f64 = b.trim().parse().ok()?;
    match chart.trim() {
        "disk" => Some(disk_to_halfplane(DiskPoint::new(a, b).ok()?)),
        "halfplane" => Some(HalfPlanePoint::new(a, b)),
        _ => None,
    }
}

fn validate(spec: &ExperimentSpec) -> Result<(), ConfigError> {
    if !(spec.lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    if !(spec.horizon >= 0.0) {
        return Err(invalid("t", "must be nonnegative"));
    }
    if spec.replicas < 1 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    if !(spec.scheme.dt_max > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if spec.bins < 2 {
        return Err(invalid("bins", "must be at least 2"));
    }
    if !(spec.ball_radius > 0.0) {
        return Err(invalid("ball_radius", "must be positive"));
    }
    if spec.snapshots.is_empty() {
        return Err(invalid("snapshots", "must be nonempty"));
    }
    let mut last = 0.0;
    for &t in &spec.snapshots {
        if !(0.0..=spec.horizon).contains(&t) {
            return Err(invalid("snapshots", format!("time {t} outside [0, {}]", spec.horizon)));
        }
        if t < last {
            return Err(invalid("snapshots", "times must be sorted"));
        }
        last = t;
    }
    match spec.kind {
        ExperimentKind::LogCorrection => {
            if spec.lambda > 0.125 {
                return Err(invalid(
                    "lambda",
                    format!("{} is outside the transient regime (lambda <= 1/8)", spec.lambda),
                ));
            }
            for &t in &spec.snapshots {
                if t < std::f64::consts::E {
                    return Err(invalid("snapshots", format!("log scaling needs t >= e, got {t}")));
                }
            }
        }
        ExperimentKind::Rates | ExperimentKind::Escape => {
            if spec.snapshots.len() < 4 {
                return Err(invalid("snapshots", "rate fits need at least 4 snapshot times"));
            }
        }
        _ => {}
    }
    Ok(())
}

impl ExperimentSpec {
    /// Stable one-line rendering of every resolved field, the input of the
    /// record hash.
    pub fn canonical_string(&self) -> String {
        let snaps: Vec<String> = self.snapshots.iter().map(|t| format!("{t}")).collect();
        format!(
            "kind={} lambda={} t={} snapshots={} replicas={} seed={} dt={} u_scheme={} start={},{} cap={} bins={} ball_radius={}",
            self.kind,
            self.lambda,
            self.horizon,
            snaps.join(","),
            self.replicas,
            self.seed,
            self.scheme.dt_max,
            match self.scheme.u_integration {
                UIntegration::LeftEndpoint => "left",
                UIntegration::Trapezoid => "trapezoid",
            },
            self.start.u,
            self.start.w,
            self.particle_cap,
            self.bins,
            self.ball_radius,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_fills_defaults() {
        let spec = parse_spec("kind = population_law\nlambda = 1\nt = 1\nreplicas = 10000\n").unwrap();
        assert_eq!(spec.kind, ExperimentKind::PopulationLaw);
        assert_eq!(spec.lambda, 1.0);
        assert_eq!(spec.horizon, 1.0);
        assert_eq!(spec.snapshots, vec![1.0]);
        assert_eq!(spec.replicas, 10_000);
        assert_eq!(spec.seed, 0);
        assert_eq!(spec.scheme.dt_max, 1e-2);
        assert_eq!(spec.start, HalfPlanePoint::BASE);
    }

    #[test]
    fn comments_blanks_and_overrides() {
        let text = "\n# an experiment\nkind = rates   # tail rates\nlambda = 0.5\nseed = 7\n\nsnapshots = 6, 8, 10, 12\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.kind, ExperimentKind::Rates);
        assert_eq!(spec.lambda, 0.5);
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.snapshots, vec![6.0, 8.0, 10.0, 12.0]);
        assert_eq!(spec.horizon, 12.0);
        assert_eq!(spec.replicas, 50);
    }

    #[test]
    fn zero_lambda_rejected() {
        let err = parse_spec("kind = population_law\nlambda = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "lambda"), "{err}");
    }

    #[test]
    fn log_correction_regime_checked_at_validation() {
        let err = parse_spec("kind = log_correction\nlambda = 0.25\n").unwrap_err();
        match err {
            ConfigError::Validation { key, message } => {
                assert_eq!(key, "lambda");
                assert!(message.contains("transient"), "{message}");
            }
            other => panic!("wrong error {other}"),
        }
        assert!(parse_spec("kind = log_correction\nlambda = 0.125\n").is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_spec("kind = rates\nwhat is this\n").unwrap_err();
        assert_eq!(err, ConfigError::Parse { line: 2, message: "expected key = value, got \"what is this\"".into() });

        let err = parse_spec("kind = rates\nlambda = abc\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");

        let err = parse_spec("kind = nope\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err}");

        let err = parse_spec("kind = rates\nstrange_key = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn start_charts() {
        let spec = parse_spec("kind = boundary\nstart = disk:0.5,0.0\n").unwrap();
        let h = disk_to_halfplane(DiskPoint::new(0.5, 0.0).unwrap());
        assert_eq!(spec.start, h);
        let spec = parse_spec("kind = boundary\nstart = halfplane:0.0,-1.0\n").unwrap();
        assert_eq!(spec.start, HalfPlanePoint::new(0.0, -1.0));
        assert!(parse_spec("kind = boundary\nstart = polar:1,2\n").is_err());
    }

    #[test]
    fn snapshot_validation() {
        let err = parse_spec("kind = clt\nt = 5\nsnapshots = 2, 9\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "snapshots"), "{err}");
        let err = parse_spec("kind = clt\nsnapshots = 3, 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "snapshots"), "{err}");
        // explicit horizon collapses kind-default grids to the endpoint
        let spec = parse_spec("kind = regime_probe\nlambda = 0.05\nt = 25\n").unwrap();
        assert_eq!(spec.snapshots, vec![25.0]);
    }

    #[test]
    fn canonical_string_is_stable() {
        let a = parse_spec("kind = rates\nlambda = 1\n").unwrap();
        let b = parse_spec("# comment\nkind = rates\n\nlambda = 1.0\n").unwrap();
        assert_eq!(a.canonical_string(), b.canonical_string());
        let c = parse_spec("kind = rates\nlambda = 1\nseed = 3\n").unwrap();
        assert_ne!(a.canonical_string(), c.canonical_string());
    }
}
