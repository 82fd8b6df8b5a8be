use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("missing channel {0}")]
    MissingChannel(String),

    #[error("singular fit: design matrix is rank deficient (column {column})")]
    SingularFit { column: usize },

    #[error("insufficient data: {have} observations for {need} coefficients")]
    InsufficientData { have: usize, need: usize },

    #[error("fit failed for {entity}: {source}")]
    Fit {
        entity: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no fitted model for {0}")]
    MissingModel(String),

    #[error("allocation undefined: {0}")]
    UndefinedAllocation(&'static str),

    #[error("return-air temperature undefined: total zone flow is zero")]
    UndefinedRat,

    #[error("energy flexibility undefined: baseline energy {0} kWh is not positive")]
    UndefinedFlexibility(f64),

    #[error("no zone has positive savings")]
    NoPositiveSavings,

    #[error("gini undefined: shares sum to zero")]
    UndefinedGini,

    #[error("flexibility undefined: {0}")]
    MetricPrecondition(String),

    #[error("simulation diverged in zone {zone} at step {step}")]
    SimulationDiverged { zone: String, step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn fit(entity: impl Into<String>, source: Error) -> Self {
        Error::Fit {
            entity: entity.into(),
            source: Box::new(source),
        }
    }
}
