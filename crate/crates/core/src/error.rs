use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point: imaginary part {0} is not positive")]
    InvalidPoint(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("invalid group: {0}")]
    Group(String),

    #[error("orbit radius {radius} exceeds the cap {cap}")]
    RadiusCap { radius: f64, cap: f64 },

    #[error("too few shells to fit a growth rate at radius {0} (need at least 8)")]
    TooFewShells(f64),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("empty measure: {0}")]
    EmptyMeasure(String),

    #[error("fold cap exceeded for {lost} atom(s): farthest at distance {dist:.3} but cap is {cap:.3}; the orbit table must reach radius at least {required:.3}")]
    FoldCap {
        dist: f64,
        cap: f64,
        required: f64,
        lost: usize,
    },

    #[error("fit refused: {0}")]
    Fit(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
