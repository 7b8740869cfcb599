//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while parsing inputs or running the model.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in an ASCII map, with 1-based file line/column.
    #[error("map parse error at line {line}, column {col}: {msg}")]
    MapParse { line: usize, col: usize, msg: String },

    /// The map parsed but violates a world constraint.
    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// More hidden keys than the model supports.
    #[error("{0} hidden keys requested, at most {max} supported", max = crate::grid::MAX_HIDDEN_KEYS)]
    TooManyHiddenKeys(usize),

    /// No placement of the hidden keys leaves the goal reachable.
    #[error("no goal-reachable placement of the hidden keys exists")]
    NoReachablePlacement,

    /// An action was applied in a state where it is not legal.
    #[error("illegal action `{action}`: {msg}")]
    IllegalAction { action: String, msg: String },

    /// Syntax error in an epistemic formula, with 1-based character position.
    #[error("formula parse error at position {pos}: {msg}")]
    FormulaParse { pos: usize, msg: String },

    /// A variable occurs outside the scope of any `exists` binding it.
    #[error("unbound variable `{0}` in formula")]
    UnboundVariable(String),

    /// A formula references a box that the map does not have.
    #[error("formula references {name}, but the map has only {count} boxes")]
    UnknownBox { name: String, count: usize },

    /// A belief update removed every particle.
    #[error("belief annihilated: no particle is consistent with the observation")]
    BeliefAnnihilated,

    /// The observed trajectory has zero probability under the model.
    #[error("trajectory has zero probability under the model")]
    ImpossibleTrajectory,

    /// A belief intervention has no support to renormalize.
    #[error("intervention impossible: no posterior mass where the statement is {value}")]
    ImpossibleIntervention { value: bool },

    /// A listener assigns zero mass to the statement being true.
    #[error("statement unassertable: listener assigns it zero probability")]
    Unassertable,

    /// Pearson correlation is undefined because one input has no variance.
    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(String),

    /// A scenario file is malformed or internally inconsistent.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// Human ranking data is missing or inconsistent.
    #[error("human data error: {0}")]
    HumanData(String),

    /// The brute-force checker refuses inputs above its size limit.
    #[error("oracle refused: {atoms} joint hypotheses exceed the limit of {limit}")]
    OracleTooLarge { atoms: usize, limit: usize },

    /// A caller violated an argument contract (mismatched lengths etc.).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
