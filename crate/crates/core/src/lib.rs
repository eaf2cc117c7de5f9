//! Valuation of distributed renewable generation from interval meter data.
//!
//! The pipeline runs from raw 5-minute interval energy through average power,
//! heavy/light-load-hour classification, pooled monthly energy estimates with
//! standard errors, displaced-supply value, demand-charge deltas and resource
//! characterization (power curves, capacity factors, diurnal profiles).
//!
//! Batch loops run on rayon when the `parallel` feature is enabled (the
//! default). Every batch entry point has a `*_with` variant taking an
//! [`Execution`] so the sequential path stays available for comparison.

pub mod calendar;
pub mod characterize;
pub mod demand;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod money;
pub mod rates;
pub mod stats;
pub mod synthetic;
pub mod valuation;

pub use calendar::{HourClass, MonthHours, TariffCalendar};
pub use error::{Error, Result};
pub use exec::Execution;
pub use ingest::{IntervalSample, IntervalSeries, MetSample, PairedSample, PowerSample, PowerSeries};
pub use rates::{MonthRates, RateSchedule};
pub use stats::Uncertain;
pub use valuation::{AnnualEstimate, ErrorMode, MonthlyEstimate, MonthlyRow};
