use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are grouped by the subsystem that raises
/// them; everything is fail-fast, nothing here is recoverable mid-episode.
#[derive(Debug, Error)]
pub enum Error {
    // configuration
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("steps_per_episode must be at least 1")]
    NoSteps,
    #[error("vehicle roster is empty")]
    EmptyRoster,
    #[error("initial positions must be strictly increasing (vehicle {0})")]
    UnorderedRoster(usize),
    #[error("vehicles {follower} and {leader} overlap at initialization (gap {gap:.3} m)")]
    OverlappingVehicles {
        follower: usize,
        leader: usize,
        gap: f64,
    },
    #[error("vehicle {0} has a non-positive length")]
    BadVehicleLength(usize),
    #[error("vehicle {0} has a negative or non-finite initial speed")]
    BadVehicleSpeed(usize),
    #[error("unknown controller tag `{0}`")]
    UnknownController(String),
    #[error("controller `rl` requires a checkpoint path")]
    MissingCheckpoint,
    #[error("perturbation profile dips below zero speed (base {base} m/s, peak excursion {excursion} m/s)")]
    NegativeProfileSpeed { base: f64, excursion: f64 },
    #[error("perturbation profiles require an open-chain topology")]
    ProfileNeedsOpenChain,
    #[error("unknown preset `{0}` (expected closed-loop, perturbation or smoke)")]
    UnknownPreset(String),
    #[error("config override `{0}` is not a KEY=VALUE pair")]
    BadOverride(String),
    #[error("config key `{0}` does not exist")]
    UnknownConfigKey(String),
    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    // simulation
    #[error("non-finite acceleration command {value} for vehicle {vehicle}")]
    NonFiniteCommand { vehicle: usize, value: f64 },
    #[error("expected {expected} acceleration commands, got {got}")]
    CommandCount { expected: usize, got: usize },
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(usize),
    #[error("episode already finished; reset the environment before stepping")]
    EpisodeFinished,

    // controllers
    #[error("{controller} requires a front neighbor")]
    MissingFrontNeighbor { controller: &'static str },
    #[error("IDM acceleration is undefined for non-positive gap {0}")]
    NonPositiveGap(f64),
    #[error("no policy supplied for RL-controlled vehicle {0}")]
    MissingPolicy(usize),

    // metrics
    #[error("speed series too short for amplitude analysis: need {needed} samples, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    // learner
    #[error("input has dimension {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {quantity} during DDPG update")]
    NonFiniteLoss { quantity: &'static str },
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    // io / formats
    #[error("bad trajectory csv at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
