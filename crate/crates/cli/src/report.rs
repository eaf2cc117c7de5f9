//! Plot-ready CSV renderings. Output is a pure function of the inputs:
//! fixed row order and fixed decimal formatting.

use std::fmt::Write;

use gridworth_core::characterize::{DiurnalProfile, PowerCurve};
use gridworth_core::demand::{AnnualDemandImpact, DemandDelta, Determinant, DeterminantStatus, YearMonth};
use gridworth_core::money::Cents;
use gridworth_core::valuation::{AnnualEstimate, MonthlyRow};
use gridworth_core::Error;

pub const ENERGY_HEADER: &str = "month,energy_kwh,energy_se_kwh,value_usd,value_se_usd";
pub const DEMAND_HEADER: &str =
    "month,delta_demand_kw,delta_demand_sd_kw,delta_ahlh_kwh_per_h,delta_expense_usd,delta_expense_sd_usd,status";
pub const DETERMINANT_HEADER: &str = "month,peak_kw,average_kw,grandfather_kw,determinant_kw,status";
pub const CURVE_HEADER: &str = "speed_mps,mean_kw,p16_kw,p84_kw,n";
pub const DIURNAL_HEADER: &str = "hour_local,mean_kw,se_kw";

/// Three significant figures, no exponent: 80712.3 -> "80700", 0.01234 -> "0.0123".
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    if mag >= 2 {
        let unit = 10f64.powi(mag - 2);
        let rounded = (x / unit).round() * unit;
        // rounding can carry into the next decade (999.6 -> 1000)
        format!("{rounded:.0}")
    } else {
        let decimals = (2 - mag) as usize;
        let s = format!("{x:.decimals$}");
        if s.parse::<f64>() == Ok(0.0) { "0".into() } else { s }
    }
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn cents(x: f64) -> String {
    Cents::from_dollars(x).to_string()
}

fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') { s.trim_start_matches('-').to_string() } else { s }
}

/// Monthly energy/value table: one row per calendar month (empty fields
/// where there is no data) and a `total` row using the selected error mode.
/// The total value is the sum of the rounded monthly cents.
pub fn energy_table(rows: &[(u32, Option<MonthlyRow>)], annual: &AnnualEstimate) -> String {
    let mut out = String::new();
    writeln!(out, "{ENERGY_HEADER}").unwrap();
    let mut total_value = Cents(0);
    for (month, row) in rows {
        match row {
            Some(r) => {
                let v = Cents::from_dollars(r.value_usd.value);
                total_value = total_value + v;
                writeln!(
                    out,
                    "{month},{},{},{v},{}",
                    sig3(r.energy_kwh.value),
                    opt(r.energy_kwh.se, sig3),
                    opt(r.value_usd.se, cents)
                )
                .unwrap();
            }
            None => writeln!(out, "{month},,,,").unwrap(),
        }
    }
    writeln!(
        out,
        "total,{},{},{total_value},{}",
        sig3(annual.energy_kwh),
        opt(annual.energy_err(), sig3),
        opt(annual.value_err(), cents)
    )
    .unwrap();
    out
}

pub fn demand_table(rows: &[(u32, Result<DemandDelta, Error>)], annual: &AnnualDemandImpact) -> String {
    let mut out = String::new();
    writeln!(out, "{DEMAND_HEADER}").unwrap();
    for (month, row) in rows {
        match row {
            Ok(d) => writeln!(
                out,
                "{month},{},{},{},{},{},ok",
                fixed(d.delta_peak_kw.value, 2),
                opt(d.delta_peak_kw.se, |x| fixed(x, 2)),
                fixed(d.delta_ahlh_kw.value, 2),
                cents(d.delta_expense.value),
                opt(d.delta_expense.se, cents),
            )
            .unwrap(),
            Err(e) => {
                let status = match e {
                    Error::InsufficientHistory(_) => "insufficient history",
                    _ => "no data",
                };
                writeln!(out, "{month},,,,,,{status}").unwrap();
            }
        }
    }
    writeln!(out, "total,,,,{},{},{}", cents(annual.total_usd), opt(annual.err(), cents), annual.mode).unwrap();
    out
}

pub fn determinant_table(rows: &[(YearMonth, Determinant, DeterminantStatus)]) -> String {
    let mut out = String::new();
    writeln!(out, "{DETERMINANT_HEADER}").unwrap();
    for (ym, d, status) in rows {
        writeln!(
            out,
            "{ym},{},{},{},{},{status}",
            fixed(d.peak_kw, 2),
            fixed(d.average_kw, 2),
            fixed(d.grandfather_kw, 2),
            fixed(d.value_kw, 2)
        )
        .unwrap();
    }
    out
}

pub fn curve_table(curve: &PowerCurve) -> String {
    let mut out = String::new();
    writeln!(out, "{CURVE_HEADER}").unwrap();
    for b in &curve.bins {
        writeln!(
            out,
            "{},{},{},{},{}",
            fixed(b.speed_center_mps, 2),
            fixed(b.mean_kw, 4),
            fixed(b.p16_kw, 4),
            fixed(b.p84_kw, 4),
            b.sample_count
        )
        .unwrap();
    }
    out
}

pub fn diurnal_table(profile: &DiurnalProfile) -> String {
    let mut out = String::new();
    writeln!(out, "{DIURNAL_HEADER}").unwrap();
    for (hour, h) in profile.per_hour.iter().enumerate() {
        writeln!(out, "{hour},{},{}", opt(h.mean_kw, |x| fixed(x, 4)), opt(h.se_kw, |x| fixed(x, 4))).unwrap();
    }
    out
}
