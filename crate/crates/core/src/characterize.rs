//! Resource characterization: binned power curves, capacity factors,
//! diurnal profiles and nameplate exceedance.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::TariffCalendar;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{PairedSample, PowerSeries};
use crate::stats;

pub const DEFAULT_BIN_WIDTH_MPS: f64 = 1.0;
pub const LOWER_PERCENTILE: u32 = 16;
pub const UPPER_PERCENTILE: u32 = 84;
/// Capacity factors always use a 365-day year.
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurveBin {
    pub speed_center_mps: f64,
    pub mean_kw: f64,
    pub p16_kw: f64,
    pub p84_kw: f64,
    pub sample_count: usize,
}

/// Power as a function of wind speed. Empty bins are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub bin_width_mps: f64,
    pub bins: Vec<PowerCurveBin>,
}

pub fn power_curve(pairs: &[PairedSample], bin_width_mps: f64) -> Result<PowerCurve> {
    power_curve_with(Execution::default(), pairs, bin_width_mps)
}

/// Bins pairs by `round(speed / width)` and summarizes each bin with its
/// mean and nearest-rank 16th/84th percentiles.
pub fn power_curve_with(exec: Execution, pairs: &[PairedSample], bin_width_mps: f64) -> Result<PowerCurve> {
    if !(bin_width_mps > 0.0 && bin_width_mps.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin width must be positive, got {bin_width_mps}")));
    }
    let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        let idx = (p.wind_speed_mps / bin_width_mps).round() as i64;
        bins.entry(idx).or_default().push(p.power_kw);
    }
    let bins = exec.map_owned(bins.into_iter().collect(), |(idx, mut powers): (i64, Vec<f64>)| {
        let mean_kw = stats::mean(&powers).expect("bins are non-empty");
        powers.sort_by(f64::total_cmp);
        PowerCurveBin {
            speed_center_mps: idx as f64 * bin_width_mps,
            mean_kw,
            p16_kw: stats::nearest_rank(&powers, LOWER_PERCENTILE).expect("non-empty"),
            p84_kw: stats::nearest_rank(&powers, UPPER_PERCENTILE).expect("non-empty"),
            sample_count: powers.len(),
        }
    });
    Ok(PowerCurve { bin_width_mps, bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityFactor {
    pub annual_energy_kwh: f64,
    pub nameplate_kw: f64,
    /// Percent, unrounded.
    pub value: f64,
}

impl CapacityFactor {
    /// One decimal place, e.g. `8.1%`.
    pub fn display(&self) -> String {
        format!("{:.1}%", self.value)
    }
}

pub fn capacity_factor(annual_energy_kwh: f64, nameplate_kw: f64) -> Result<CapacityFactor> {
    if !(nameplate_kw > 0.0 && nameplate_kw.is_finite()) {
        return Err(Error::InvalidArgument(format!("nameplate must be positive, got {nameplate_kw}")));
    }
    if !annual_energy_kwh.is_finite() {
        return Err(Error::NonFinite("annual energy"));
    }
    Ok(CapacityFactor {
        annual_energy_kwh,
        nameplate_kw,
        value: annual_energy_kwh / (nameplate_kw * HOURS_PER_YEAR) * 100.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HourStat {
    pub mean_kw: Option<f64>,
    /// Standard error across daily means, present with two or more days.
    pub se_kw: Option<f64>,
    pub samples: usize,
    pub days: usize,
}

/// Mean power by local hour of day for one calendar month, pooled across
/// days and years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalProfile {
    pub calendar_month: u32,
    pub per_hour: [HourStat; 24],
}

pub fn diurnal_profile(power: &PowerSeries, calendar: &TariffCalendar, calendar_month: u32) -> Result<DiurnalProfile> {
    diurnal_profile_with(Execution::default(), power, calendar, calendar_month)
}

pub fn diurnal_profile_with(
    exec: Execution,
    power: &PowerSeries,
    calendar: &TariffCalendar,
    calendar_month: u32,
) -> Result<DiurnalProfile> {
    if !(1..=12).contains(&calendar_month) {
        return Err(Error::InvalidMonth(calendar_month));
    }
    let stamps = calendar.stamp_all(exec, power);
    // hour -> date -> samples
    let mut grid: Vec<BTreeMap<NaiveDate, Vec<f64>>> = vec![BTreeMap::new(); 24];
    let mut any = false;
    for (st, s) in stamps.iter().zip(&power.samples) {
        if st.month() == calendar_month {
            any = true;
            grid[st.hour() as usize].entry(st.date()).or_default().push(s.power_kw);
        }
    }
    if !any {
        return Err(Error::NoData { month: calendar_month, class: None });
    }
    let mut per_hour = [HourStat::default(); 24];
    for (slot, days) in per_hour.iter_mut().zip(&grid) {
        let pooled: Vec<f64> = days.values().flatten().copied().collect();
        let daily: Vec<f64> = days.values().filter_map(|v| stats::mean(v)).collect();
        *slot = HourStat {
            mean_kw: stats::mean(&pooled),
            se_kw: stats::standard_error(&daily),
            samples: pooled.len(),
            days: daily.len(),
        };
    }
    Ok(DiurnalProfile { calendar_month, per_hour })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub max_kw: f64,
    /// Fraction of samples strictly above nameplate.
    pub fraction_above: f64,
}

pub fn nameplate_exceedance(power: &PowerSeries, nameplate_kw: f64) -> Result<Exceedance> {
    if !(nameplate_kw > 0.0 && nameplate_kw.is_finite()) {
        return Err(Error::InvalidArgument(format!("nameplate must be positive, got {nameplate_kw}")));
    }
    if power.is_empty() {
        return Err(Error::EmptyInput("power series"));
    }
    let max_kw = power.samples.iter().map(|s| s.power_kw).fold(f64::NEG_INFINITY, f64::max);
    let above = power.samples.iter().filter(|s| s.power_kw > nameplate_kw).count();
    Ok(Exceedance { max_kw, fraction_above: above as f64 / power.len() as f64 })
}
