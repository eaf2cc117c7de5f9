//! Pooled monthly energy estimates, displaced-supply value and annual totals.
//!
//! Each calendar month pools every sample from every year in which that
//! month was observed. Mean power per hour class times the class's hour
//! count in a reference year gives the monthly energy. Standard errors are
//! taken across month-instances (per-year means), so a month seen in a
//! single year carries no error bar at all.
//!
//! Pooling assumes missing data is missing at random; gaps in low-output
//! periods will bias estimates upward. That is accepted, not corrected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{HourClass, MonthHours, TariffCalendar};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::PowerSeries;
use crate::rates::RateSchedule;
use crate::stats::{self, Uncertain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// Plain sum of monthly errors.
    Linear,
    /// Root-sum-square of monthly errors.
    #[default]
    Quadrature,
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::Linear => "linear",
            ErrorMode::Quadrature => "quadrature",
        })
    }
}

impl FromStr for ErrorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ErrorMode::Linear),
            "quadrature" => Ok(ErrorMode::Quadrature),
            other => Err(Error::InvalidArgument(format!("unknown error mode `{other}`"))),
        }
    }
}

impl ErrorMode {
    pub fn combine<I: IntoIterator<Item = Option<f64>>>(self, errs: I) -> Option<f64> {
        match self {
            ErrorMode::Linear => stats::linear_sum(errs),
            ErrorMode::Quadrature => stats::quadrature_sum(errs),
        }
    }
}

/// Per-year mean power for one calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeans {
    pub year: i32,
    pub hlh_kw: Option<f64>,
    pub llh_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyEstimate {
    pub calendar_month: u32,
    pub reference_year: i32,
    /// HLH/LLH hour counts of the reference year's month.
    pub hours: MonthHours,
    pub mean_power_hlh: f64,
    pub se_power_hlh: Option<f64>,
    pub mean_power_llh: f64,
    pub se_power_llh: Option<f64>,
    pub energy_hlh: Uncertain,
    pub energy_llh: Uncertain,
    pub energy_total: Uncertain,
    pub n_month_instances: usize,
    pub samples_hlh: usize,
    pub samples_llh: usize,
    pub instances: Vec<InstanceMeans>,
}

/// Displaced-supply value of one month, in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyValue {
    pub hlh: Uncertain,
    pub llh: Uncertain,
    pub total: Uncertain,
}

/// One line of a monthly energy/value table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyRow {
    pub month: u32,
    pub energy_kwh: Uncertain,
    pub value_usd: Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualEstimate {
    pub energy_kwh: f64,
    pub energy_err_linear: Option<f64>,
    pub energy_err_quadrature: Option<f64>,
    pub value_usd: f64,
    pub value_err_linear: Option<f64>,
    pub value_err_quadrature: Option<f64>,
    pub months_covered: usize,
    pub mode: ErrorMode,
    /// Fewer than twelve months were summed. No scaling is applied; the
    /// total presumes the observed months are typical.
    pub extrapolated: bool,
}

impl AnnualEstimate {
    pub fn energy_err(&self) -> Option<f64> {
        match self.mode {
            ErrorMode::Linear => self.energy_err_linear,
            ErrorMode::Quadrature => self.energy_err_quadrature,
        }
    }

    pub fn value_err(&self) -> Option<f64> {
        match self.mode {
            ErrorMode::Linear => self.value_err_linear,
            ErrorMode::Quadrature => self.value_err_quadrature,
        }
    }
}

/// A sample reduced to what the estimator needs.
#[derive(Debug, Clone, Copy)]
struct Obs {
    year: i32,
    class: HourClass,
    kw: f64,
}

/// Local year of the last sample, the default reference year.
pub fn latest_year(power: &PowerSeries, calendar: &TariffCalendar) -> Option<i32> {
    power.samples.last().map(|s| calendar.stamp(s.timestamp).year())
}

/// Estimate for a single calendar month.
pub fn monthly_estimate(
    power: &PowerSeries,
    calendar: &TariffCalendar,
    calendar_month: u32,
    reference_year: i32,
) -> Result<MonthlyEstimate> {
    if !(1..=12).contains(&calendar_month) {
        return Err(Error::InvalidMonth(calendar_month));
    }
    let obs: Vec<Obs> = power
        .samples
        .iter()
        .map(|s| calendar.stamp(s.timestamp))
        .zip(&power.samples)
        .filter(|(st, _)| st.month() == calendar_month)
        .map(|(st, s)| Obs { year: st.year(), class: st.class, kw: s.power_kw })
        .collect();
    let hours = calendar.hours_in_month(reference_year, calendar_month)?;
    estimate_from_obs(calendar_month, reference_year, hours, &obs)
}

/// Estimates for all twelve calendar months. Months without data come back
/// as [`Error::NoData`].
pub fn monthly_estimates(
    power: &PowerSeries,
    calendar: &TariffCalendar,
    reference_year: i32,
) -> Vec<(u32, Result<MonthlyEstimate>)> {
    monthly_estimates_with(Execution::default(), power, calendar, reference_year)
}

pub fn monthly_estimates_with(
    exec: Execution,
    power: &PowerSeries,
    calendar: &TariffCalendar,
    reference_year: i32,
) -> Vec<(u32, Result<MonthlyEstimate>)> {
    let stamps = calendar.stamp_all(exec, power);
    let mut buckets: Vec<Vec<Obs>> = vec![Vec::new(); 12];
    for (st, s) in stamps.iter().zip(&power.samples) {
        buckets[st.month() as usize - 1].push(Obs { year: st.year(), class: st.class, kw: s.power_kw });
    }
    let jobs: Vec<(u32, Vec<Obs>)> = (1..=12).zip(buckets).collect();
    exec.map_owned(jobs, |(month, obs)| {
        let est = calendar
            .hours_in_month(reference_year, month)
            .and_then(|hours| estimate_from_obs(month, reference_year, hours, &obs));
        (month, est)
    })
}

fn estimate_from_obs(month: u32, reference_year: i32, hours: MonthHours, obs: &[Obs]) -> Result<MonthlyEstimate> {
    if obs.is_empty() {
        return Err(Error::NoData { month, class: None });
    }
    let mut per_year: BTreeMap<i32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let (mut all_hlh, mut all_llh) = (Vec::new(), Vec::new());
    for o in obs {
        let entry = per_year.entry(o.year).or_default();
        match o.class {
            HourClass::Hlh => {
                entry.0.push(o.kw);
                all_hlh.push(o.kw);
            }
            HourClass::Llh => {
                entry.1.push(o.kw);
                all_llh.push(o.kw);
            }
        }
    }
    let mean_hlh = class_mean(&all_hlh, hours.hlh, month, HourClass::Hlh)?;
    let mean_llh = class_mean(&all_llh, hours.llh, month, HourClass::Llh)?;

    let instances: Vec<InstanceMeans> = per_year
        .iter()
        .map(|(&year, (h, l))| InstanceMeans { year, hlh_kw: stats::mean(h), llh_kw: stats::mean(l) })
        .collect();
    let inst_hlh: Vec<f64> = instances.iter().filter_map(|i| i.hlh_kw).collect();
    let inst_llh: Vec<f64> = instances.iter().filter_map(|i| i.llh_kw).collect();
    let se_hlh = stats::standard_error(&inst_hlh);
    let se_llh = stats::standard_error(&inst_llh);

    let (h, l) = (hours.hlh as f64, hours.llh as f64);
    let energy_hlh = Uncertain::new(mean_hlh * h, se_hlh.map(|s| s * h));
    let energy_llh = Uncertain::new(mean_llh * l, se_llh.map(|s| s * l));
    let inst_totals: Vec<f64> = instances
        .iter()
        .filter_map(|i| Some(i.hlh_kw? * h + i.llh_kw? * l))
        .collect();
    let energy_total = Uncertain::new(energy_hlh.value + energy_llh.value, stats::standard_error(&inst_totals));

    Ok(MonthlyEstimate {
        calendar_month: month,
        reference_year,
        hours,
        mean_power_hlh: mean_hlh,
        se_power_hlh: se_hlh,
        mean_power_llh: mean_llh,
        se_power_llh: se_llh,
        energy_hlh,
        energy_llh,
        energy_total,
        n_month_instances: instances.len(),
        samples_hlh: all_hlh.len(),
        samples_llh: all_llh.len(),
        instances,
    })
}

/// A class with no samples is only acceptable when the reference month has
/// no hours of that class to fill.
fn class_mean(samples: &[f64], hours: u32, month: u32, class: HourClass) -> Result<f64> {
    match stats::mean(samples) {
        Some(m) => Ok(m),
        None if hours == 0 => Ok(0.0),
        None => Err(Error::NoData { month, class: Some(class) }),
    }
}

/// Dollar value of the estimated energy: `E_hlh/1000 * r_hlh + E_llh/1000 * r_llh`.
/// The total's error is taken across per-year values so the HLH/LLH
/// correlation within a year is respected.
pub fn monthly_value(est: &MonthlyEstimate, schedule: &RateSchedule) -> MonthlyValue {
    let month = est.calendar_month;
    let r_hlh = schedule.lookup(month, HourClass::Hlh) / 1000.0;
    let r_llh = schedule.lookup(month, HourClass::Llh) / 1000.0;
    let hlh = est.energy_hlh.scale(r_hlh);
    let llh = est.energy_llh.scale(r_llh);
    let (h, l) = (est.hours.hlh as f64, est.hours.llh as f64);
    let inst_values: Vec<f64> = est
        .instances
        .iter()
        .filter_map(|i| Some(i.hlh_kw? * h * r_hlh + i.llh_kw? * l * r_llh))
        .collect();
    MonthlyValue { hlh, llh, total: Uncertain::new(hlh.value + llh.value, stats::standard_error(&inst_values)) }
}

pub fn monthly_row(est: &MonthlyEstimate, schedule: &RateSchedule) -> MonthlyRow {
    MonthlyRow {
        month: est.calendar_month,
        energy_kwh: est.energy_total,
        value_usd: monthly_value(est, schedule).total,
    }
}

/// Sums monthly rows into an annual figure, computing both error modes.
/// Missing months are not imputed; `extrapolated` marks a partial year.
pub fn annualize(rows: &[MonthlyRow], mode: ErrorMode) -> Result<AnnualEstimate> {
    let mut seen = [false; 12];
    for r in rows {
        if !(1..=12).contains(&r.month) {
            return Err(Error::InvalidMonth(r.month));
        }
        if std::mem::replace(&mut seen[r.month as usize - 1], true) {
            return Err(Error::DuplicateMonth(r.month));
        }
    }
    let e_errs = || rows.iter().map(|r| r.energy_kwh.se);
    let v_errs = || rows.iter().map(|r| r.value_usd.se);
    Ok(AnnualEstimate {
        energy_kwh: rows.iter().map(|r| r.energy_kwh.value).sum(),
        energy_err_linear: ErrorMode::Linear.combine(e_errs()),
        energy_err_quadrature: ErrorMode::Quadrature.combine(e_errs()),
        value_usd: rows.iter().map(|r| r.value_usd.value).sum(),
        value_err_linear: ErrorMode::Linear.combine(v_errs()),
        value_err_quadrature: ErrorMode::Quadrature.combine(v_errs()),
        months_covered: rows.len(),
        mode,
        extrapolated: rows.len() < 12,
    })
}

/// [`annualize`] for a partial year: requires at least one month and
/// sums what is available.
pub fn annual_extrapolation(rows: &[MonthlyRow], mode: ErrorMode) -> Result<AnnualEstimate> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no monthly estimates to extrapolate"));
    }
    annualize(rows, mode)
}
