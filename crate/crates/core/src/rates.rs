//! Monthly load-shaping energy rates and demand rates, loaded from JSON.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::calendar::HourClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthRates {
    pub month: u32,
    #[serde(rename = "hlh_energy_rate_usd_per_mwh")]
    pub hlh_energy_rate: f64,
    #[serde(rename = "llh_energy_rate_usd_per_mwh")]
    pub llh_energy_rate: f64,
    #[serde(rename = "demand_rate_usd_per_kw")]
    pub demand_rate: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default = "default_schedule_id")]
    schedule_id: String,
    #[serde(default)]
    description: Option<String>,
    grandfather_kw: f64,
    months: Vec<MonthRates>,
}

fn default_schedule_id() -> String {
    "unnamed".to_string()
}

/// A complete twelve-month schedule. Construct through [`RateSchedule::new`]
/// or [`load_schedule`]; both validate, so lookups never fail.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    pub schedule_id: String,
    pub description: Option<String>,
    months: [MonthRates; 12],
    grandfather_kw: f64,
}

impl RateSchedule {
    pub fn new(schedule_id: impl Into<String>, months: Vec<MonthRates>, grandfather_kw: f64) -> Result<Self> {
        if !grandfather_kw.is_finite() {
            return Err(Error::NonFinite("grandfather_kw"));
        }
        if grandfather_kw < 0.0 {
            return Err(Error::Schedule(format!("negative grandfather_kw {grandfather_kw}")));
        }
        let mut slots: [Option<MonthRates>; 12] = [None; 12];
        for m in months {
            if !(1..=12).contains(&m.month) {
                return Err(Error::InvalidMonth(m.month));
            }
            for (field, value) in [
                ("hlh_energy_rate_usd_per_mwh", m.hlh_energy_rate),
                ("llh_energy_rate_usd_per_mwh", m.llh_energy_rate),
                ("demand_rate_usd_per_kw", m.demand_rate),
            ] {
                if !value.is_finite() {
                    return Err(Error::NonFinite(field));
                }
                if value < 0.0 {
                    return Err(Error::NegativeRate { month: m.month, field, value });
                }
            }
            let slot = &mut slots[m.month as usize - 1];
            if slot.is_some() {
                return Err(Error::DuplicateMonth(m.month));
            }
            *slot = Some(m);
        }
        let mut out = [MonthRates { month: 0, hlh_energy_rate: 0.0, llh_energy_rate: 0.0, demand_rate: 0.0 }; 12];
        for (i, slot) in slots.into_iter().enumerate() {
            out[i] = slot.ok_or(Error::MissingMonth(i as u32 + 1))?;
        }
        Ok(Self { schedule_id: schedule_id.into(), description: None, months: out, grandfather_kw })
    }

    /// Same rates in every month.
    pub fn flat(hlh: f64, llh: f64, demand: f64, grandfather_kw: f64) -> Result<Self> {
        let months = (1..=12)
            .map(|month| MonthRates { month, hlh_energy_rate: hlh, llh_energy_rate: llh, demand_rate: demand })
            .collect();
        Self::new("flat", months, grandfather_kw)
    }

    pub fn months(&self) -> &[MonthRates; 12] {
        &self.months
    }

    pub fn grandfather_kw(&self) -> f64 {
        self.grandfather_kw
    }

    /// Energy rate in $/MWh. Panics on a month outside 1..=12.
    pub fn lookup(&self, month: u32, class: HourClass) -> f64 {
        let m = &self.months[month as usize - 1];
        match class {
            HourClass::Hlh => m.hlh_energy_rate,
            HourClass::Llh => m.llh_energy_rate,
        }
    }

    /// Demand rate in $/kW. Panics on a month outside 1..=12.
    pub fn demand_rate(&self, month: u32) -> f64 {
        self.months[month as usize - 1].demand_rate
    }

    /// Returns a copy with every rate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for m in out.months.iter_mut() {
            m.hlh_energy_rate *= k;
            m.llh_energy_rate *= k;
            m.demand_rate *= k;
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = ScheduleFile {
            schedule_id: self.schedule_id.clone(),
            description: self.description.clone(),
            grandfather_kw: self.grandfather_kw,
            months: self.months.to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("schedule serializes")
    }
}

/// Reads and validates a JSON schedule file.
pub fn load_schedule<R: Read>(raw: R) -> Result<RateSchedule> {
    let file: ScheduleFile = serde_json::from_reader(raw).map_err(|e| Error::Schedule(e.to_string()))?;
    let mut schedule = RateSchedule::new(file.schedule_id, file.months, file.grandfather_kw)?;
    schedule.description = file.description;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn month_json(m: u32, hlh: f64) -> String {
        format!(
            r#"{{"month": {m}, "hlh_energy_rate_usd_per_mwh": {hlh}, "llh_energy_rate_usd_per_mwh": {}, "demand_rate_usd_per_kw": 9.5}}"#,
            hlh - 8.0
        )
    }

    fn file(months: &[String]) -> String {
        format!(r#"{{"schedule_id": "t", "grandfather_kw": 1200, "months": [{}]}}"#, months.join(","))
    }

    fn twelve() -> Vec<String> {
        (1..=12).map(|m| month_json(m, if m == 7 { 29.46 } else { 30.0 + m as f64 })).collect()
    }

    #[test]
    fn loads_complete_schedule() {
        let s = load_schedule(file(&twelve()).as_bytes()).unwrap();
        assert_eq!(s.months().len(), 12);
        assert_eq!(s.grandfather_kw(), 1200.0);
        assert_eq!(s.lookup(7, HourClass::Hlh), 29.46);
        assert!((s.lookup(7, HourClass::Llh) - 21.46).abs() < 1e-12);
        for m in 1..=12 {
            for c in [HourClass::Hlh, HourClass::Llh] {
                assert!(s.lookup(m, c) > 0.0);
            }
        }
    }

    #[test]
    fn missing_month_is_named() {
        let mut months = twelve();
        months.pop();
        let err = load_schedule(file(&months).as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "missing month 12");
    }

    #[test]
    fn negative_and_duplicate_rejected() {
        let mut neg = twelve();
        neg[0] = r#"{"month": 1, "hlh_energy_rate_usd_per_mwh": -1, "llh_energy_rate_usd_per_mwh": 1, "demand_rate_usd_per_kw": 1}"#.into();
        let err = load_schedule(file(&neg).as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("negative rate"), "{err}");

        let mut dup = twelve();
        dup.push(month_json(3, 40.0));
        assert!(matches!(load_schedule(file(&dup).as_bytes()), Err(Error::DuplicateMonth(3))));

        let mut bad = twelve();
        bad.push(month_json(13, 40.0));
        assert!(matches!(load_schedule(file(&bad).as_bytes()), Err(Error::InvalidMonth(13))));
    }

    #[test]
    fn ships_a_valid_sample_schedule() {
        let raw = include_str!("../../../data/sample_schedule.json");
        let s = load_schedule(raw.as_bytes()).unwrap();
        assert_eq!(s.lookup(7, HourClass::Hlh), 29.46);
    }

    proptest! {
        #[test]
        fn json_round_trip_preserves_all_numbers(
            rates in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0, 0.0f64..50.0), 12),
            g in 0.0f64..1e5,
        ) {
            let months = rates
                .iter()
                .enumerate()
                .map(|(i, &(h, l, d))| MonthRates { month: i as u32 + 1, hlh_energy_rate: h, llh_energy_rate: l, demand_rate: d })
                .collect();
            let s = RateSchedule::new("rt", months, g).unwrap();
            let back = load_schedule(s.to_json().as_bytes()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
