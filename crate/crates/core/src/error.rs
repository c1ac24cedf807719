use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EgtError {
    #[error("payoff matrix contains a non-finite entry")]
    NonFinitePayoff,
    #[error("strategy state ({p}, {q}) is outside the unit square")]
    OutOfSimplex { p: f64, q: f64 },
    #[error("({p}, {q}) is not a pure strategy point")]
    NotPurePoint { p: f64, q: f64 },
    #[error("integration needs dt > 0 and at least one step (dt={dt}, steps={steps})")]
    BadIntegration { dt: f64, steps: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("style weight {0} must lie in (0, 1)")]
    StyleWeight(f64),
    #[error("time headway {0} must be positive")]
    Headway(f64),
    #[error("speed {0} must be positive")]
    Speed(f64),
    #[error("distance {0} must be non-negative")]
    Distance(f64),
    #[error("arrival time {0} must be positive")]
    ArrivalTime(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("vehicles {follower} and leader overlap (gap {gap} m)")]
    Collided { follower: String, gap: f64 },
    #[error("invalid IDM parameter: {0}")]
    IdmParams(&'static str),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("scenario value: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has {0} steps; at least 2 are needed")]
    TooShort(usize),
    #[error("trace has no vehicle labelled {0}")]
    MissingVehicle(String),
}
