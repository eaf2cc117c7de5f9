use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::calendar::HourClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: negative energy {value}")]
    NegativeEnergy { line: u64, value: f64 },

    #[error("line {line}: negative wind speed {value}")]
    NegativeWindSpeed { line: u64, value: f64 },

    #[error("line {line}: duplicate timestamp {timestamp} with conflicting values")]
    ConflictingDuplicate { line: u64, timestamp: DateTime<Utc> },

    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },

    #[error("unknown timezone `{0}`")]
    UnknownTimezone(String),

    #[error("invalid month {0}")]
    InvalidMonth(u32),

    #[error("missing month {0}")]
    MissingMonth(u32),

    #[error("duplicate month {0}")]
    DuplicateMonth(u32),

    #[error("negative rate: month {month} {field} = {value}")]
    NegativeRate { month: u32, field: &'static str, value: f64 },

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid calendar config: {0}")]
    CalendarConfig(String),

    #[error("no data for month {month}{}", class.map(|c| format!(" ({c})")).unwrap_or_default())]
    NoData { month: u32, class: Option<HourClass> },

    #[error("insufficient history for month {0}")]
    InsufficientHistory(u32),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the "no data" outcomes that reports render as an empty row
    /// instead of failing the whole run.
    pub fn is_missing_data(&self) -> bool {
        matches!(self, Error::NoData { .. } | Error::InsufficientHistory(_))
    }
}
