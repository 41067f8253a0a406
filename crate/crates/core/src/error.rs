use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid code distance {0}: must be at least 2")]
    InvalidDistance(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circuit construction error: {0}")]
    Circuit(String),

    #[error("circuit has {qubits} qubits, above the tableau limit of {limit}")]
    TooManyQubits { qubits: usize, limit: usize },

    #[error("error mechanism with probability {probability} is at or above 0.5: {symptom}")]
    MechanismProbability { probability: f64, symptom: String },

    #[error("cannot decompose error mechanism into graphlike components: {0}")]
    Decomposition(String),

    #[error("matching is infeasible: {0}")]
    InfeasibleMatching(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("state decomposition error: {0}")]
    Decompose(String),

    #[error("mismatched labels: {0}")]
    LabelMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("stage `{stage}` failed for {item}: {source}")]
    Stage {
        stage: String,
        item: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
