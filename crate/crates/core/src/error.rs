use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(&'static str),

    #[error("no feasible point inside the initial sphere (radius^2 = {radius_sq})")]
    EmptySphere { radius_sq: f64 },

    #[error("solver {solver} is incompatible with {constraint} element constraints")]
    IncompatibleSolver {
        solver: &'static str,
        constraint: &'static str,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
