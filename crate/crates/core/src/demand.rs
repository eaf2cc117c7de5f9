//! Demand billing determinant and the differential effect of a generator on
//! monthly demand charges.
//!
//! The determinant is `max HLH hourly purchase - mean HLH purchase -
//! grandfathered amount`, charged only when positive. Generation lowers the
//! max term by its output at the utility's peak hour and the mean term by
//! its average HLH output, so the expense change is
//! `(delta_ahlh - delta_peak) * demand_rate`. The grandfathered term cancels
//! in the difference; months where the utility's own determinant sits at or
//! near zero are flagged separately, because the linear delta does not
//! hold there.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, Datelike, DurationRound, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::calendar::{HourClass, TariffCalendar};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{self, HourlyPower, PowerSeries};
use crate::rates::RateSchedule;
use crate::stats::{self, Uncertain};
use crate::valuation::ErrorMode;

/// Number of most recent monthly peak hours kept in a [`PeakHourRecord`].
pub const PEAK_HISTORY_WINDOW: usize = 24;
pub const PEAK_HEADER: [&str; 2] = ["month", "peak_hour_start_utc"];

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantInput {
    pub hourly_hlh_loads: Vec<(DateTime<Utc>, f64)>,
    pub grandfather_kw: f64,
}

impl DeterminantInput {
    /// Selects the HLH hours of local `year`-`month` from an hourly load record.
    pub fn for_month(
        calendar: &TariffCalendar,
        loads: &[HourlyPower],
        year: i32,
        month: u32,
        grandfather_kw: f64,
    ) -> Self {
        let hourly_hlh_loads = loads
            .iter()
            .filter(|h| {
                let st = calendar.stamp(h.hour_start);
                st.year() == year && st.month() == month && st.class == HourClass::Hlh
            })
            .map(|h| (h.hour_start, h.mean_kw))
            .collect();
        Self { hourly_hlh_loads, grandfather_kw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub peak_kw: f64,
    pub average_kw: f64,
    pub grandfather_kw: f64,
    pub value_kw: f64,
}

impl Determinant {
    /// Demand charges apply only to a positive determinant.
    pub fn charged(&self) -> bool {
        self.value_kw > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminantStatus {
    Charged,
    /// Positive but within the configured band of zero.
    NearZero,
    NotCharged,
}

impl fmt::Display for DeterminantStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeterminantStatus::Charged => "charged",
            DeterminantStatus::NearZero => "near zero",
            DeterminantStatus::NotCharged => "not charged",
        })
    }
}

pub fn billing_determinant(input: &DeterminantInput) -> Result<Determinant> {
    let loads: Vec<f64> = input.hourly_hlh_loads.iter().map(|&(_, kw)| kw).collect();
    let average_kw = stats::mean(&loads).ok_or(Error::EmptyInput("no HLH hourly loads"))?;
    let peak_kw = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Determinant {
        peak_kw,
        average_kw,
        grandfather_kw: input.grandfather_kw,
        value_kw: peak_kw - average_kw - input.grandfather_kw,
    })
}

pub fn determinant_status(det: &Determinant, band_kw: f64) -> DeterminantStatus {
    if !det.charged() {
        DeterminantStatus::NotCharged
    } else if det.value_kw <= band_kw {
        DeterminantStatus::NearZero
    } else {
        DeterminantStatus::Charged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad year-month `{s}`"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidMonth(month));
        }
        Ok(YearMonth { year, month })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakHourEntry {
    pub month_key: YearMonth,
    pub peak_hour_start: DateTime<Utc>,
}

/// The utility's monthly peak hours, trimmed to the most recent
/// [`PEAK_HISTORY_WINDOW`] months.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakHourRecord {
    entries: Vec<PeakHourEntry>,
}

impl PeakHourRecord {
    pub fn new(mut entries: Vec<PeakHourEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.month_key);
        if let Some(w) = entries.windows(2).find(|w| w[0].month_key == w[1].month_key) {
            return Err(Error::DuplicateMonth(w[0].month_key.month));
        }
        let skip = entries.len().saturating_sub(PEAK_HISTORY_WINDOW);
        entries.drain(..skip);
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PeakHourEntry] {
        &self.entries
    }

    /// Entries whose hour does not classify as HLH.
    pub fn non_hlh_entries<'a>(&'a self, calendar: &'a TariffCalendar) -> impl Iterator<Item = &'a PeakHourEntry> + 'a {
        self.entries.iter().filter(|e| calendar.classify_hour(e.peak_hour_start) != HourClass::Hlh)
    }

    /// Peak hours whose local date falls in `calendar_month`, any year.
    pub fn hours_in_month(&self, calendar: &TariffCalendar, calendar_month: u32) -> Vec<DateTime<Utc>> {
        self.entries
            .iter()
            .map(|e| e.peak_hour_start)
            .filter(|&t| calendar.to_local(t).month() == calendar_month)
            .collect()
    }
}

/// Parses the peak-hour history CSV (`month,peak_hour_start_utc`).
pub fn parse_peak_csv<R: Read>(raw: R) -> Result<PeakHourRecord> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(raw);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(PEAK_HEADER) {
        return Err(Error::BadHeader {
            expected: PEAK_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        if rec.len() != 2 {
            return Err(malformed(format!("expected 2 fields, found {}", rec.len())));
        }
        let month_key: YearMonth = rec[0].parse().map_err(|e: Error| malformed(e.to_string()))?;
        let peak_hour_start =
            ingest::parse_timestamp(&rec[1]).ok_or_else(|| malformed(format!("bad timestamp `{}`", &rec[1])))?;
        entries.push(PeakHourEntry { month_key, peak_hour_start });
    }
    PeakHourRecord::new(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandDelta {
    pub calendar_month: u32,
    /// Generation at the historical peak hours: mean and sample std dev.
    pub delta_peak_kw: Uncertain,
    /// Average generation over all HLH samples of the month; the spread is
    /// the std dev of per-year means.
    pub delta_ahlh_kw: Uncertain,
    /// `(delta_ahlh - delta_peak) * demand_rate`; negative is a saving.
    pub delta_expense: Uncertain,
    pub demand_rate: f64,
    pub peak_observations: usize,
    /// Peak hours with no usable generation data.
    pub dropped_observations: usize,
}

/// Expense change from the two generation terms at a given demand rate.
pub fn expense_delta(delta_peak_kw: Uncertain, delta_ahlh_kw: Uncertain, demand_rate: f64) -> Uncertain {
    let sd = stats::quadrature_sum([delta_peak_kw.se, delta_ahlh_kw.se]).map(|s| s * demand_rate);
    Uncertain::new((delta_ahlh_kw.value - delta_peak_kw.value) * demand_rate, sd)
}

/// Precomputed hourly and per-class views of one generator's output, reused
/// across the twelve months.
#[derive(Debug, Clone)]
pub struct DemandAnalysis<'a> {
    calendar: &'a TariffCalendar,
    hourly: HashMap<DateTime<Utc>, f64>,
    /// HLH samples per (calendar month, year).
    hlh: BTreeMap<(u32, i32), Vec<f64>>,
}

impl<'a> DemandAnalysis<'a> {
    pub fn new(gen: &PowerSeries, calendar: &'a TariffCalendar, min_hour_coverage: f64) -> Result<Self> {
        Self::new_with(Execution::default(), gen, calendar, min_hour_coverage)
    }

    pub fn new_with(
        exec: Execution,
        gen: &PowerSeries,
        calendar: &'a TariffCalendar,
        min_hour_coverage: f64,
    ) -> Result<Self> {
        let hourly = ingest::aggregate_hourly(gen, min_hour_coverage)?
            .into_iter()
            .map(|h| (h.hour_start, h.mean_kw))
            .collect();
        let mut hlh: BTreeMap<(u32, i32), Vec<f64>> = BTreeMap::new();
        for (st, s) in calendar.stamp_all(exec, gen).iter().zip(&gen.samples) {
            if st.class == HourClass::Hlh {
                hlh.entry((st.month(), st.year())).or_default().push(s.power_kw);
            }
        }
        Ok(Self { calendar, hourly, hlh })
    }

    pub fn delta(&self, peaks: &PeakHourRecord, schedule: &RateSchedule, calendar_month: u32) -> Result<DemandDelta> {
        if !(1..=12).contains(&calendar_month) {
            return Err(Error::InvalidMonth(calendar_month));
        }
        let hours = peaks.hours_in_month(self.calendar, calendar_month);
        if hours.is_empty() {
            return Err(Error::InsufficientHistory(calendar_month));
        }
        let obs: Vec<f64> = hours
            .iter()
            .filter_map(|t| {
                let hour = t.duration_trunc(TimeDelta::hours(1)).ok()?;
                self.hourly.get(&hour).copied()
            })
            .collect();
        let dropped = hours.len() - obs.len();
        let peak_mean = stats::mean(&obs).ok_or(Error::InsufficientHistory(calendar_month))?;
        let delta_peak_kw = Uncertain::new(peak_mean, stats::sample_std_dev(&obs));

        let by_year: Vec<&Vec<f64>> = self.hlh.range((calendar_month, i32::MIN)..=(calendar_month, i32::MAX)).map(|(_, v)| v).collect();
        let pooled: Vec<f64> = by_year.iter().flat_map(|v| v.iter().copied()).collect();
        let ahlh = stats::mean(&pooled).ok_or(Error::NoData { month: calendar_month, class: Some(HourClass::Hlh) })?;
        let year_means: Vec<f64> = by_year.iter().filter_map(|v| stats::mean(v)).collect();
        let delta_ahlh_kw = Uncertain::new(ahlh, stats::sample_std_dev(&year_means));

        let demand_rate = schedule.demand_rate(calendar_month);
        Ok(DemandDelta {
            calendar_month,
            delta_peak_kw,
            delta_ahlh_kw,
            delta_expense: expense_delta(delta_peak_kw, delta_ahlh_kw, demand_rate),
            demand_rate,
            peak_observations: obs.len(),
            dropped_observations: dropped,
        })
    }

    /// Deltas for all twelve calendar months.
    pub fn deltas_with(
        &self,
        exec: Execution,
        peaks: &PeakHourRecord,
        schedule: &RateSchedule,
    ) -> Vec<(u32, Result<DemandDelta>)> {
        let months: Vec<u32> = (1..=12).collect();
        exec.map(&months, |&m| (m, self.delta(peaks, schedule, m)))
    }
}

/// One-shot delta for a single calendar month.
pub fn demand_delta(
    gen: &PowerSeries,
    peaks: &PeakHourRecord,
    calendar: &TariffCalendar,
    schedule: &RateSchedule,
    calendar_month: u32,
    min_hour_coverage: f64,
) -> Result<DemandDelta> {
    DemandAnalysis::new(gen, calendar, min_hour_coverage)?.delta(peaks, schedule, calendar_month)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualDemandImpact {
    pub total_usd: f64,
    pub err_linear: Option<f64>,
    pub err_quadrature: Option<f64>,
    pub months: usize,
    pub mode: ErrorMode,
}

impl AnnualDemandImpact {
    pub fn err(&self) -> Option<f64> {
        match self.mode {
            ErrorMode::Linear => self.err_linear,
            ErrorMode::Quadrature => self.err_quadrature,
        }
    }
}

pub fn annual_demand_impact(deltas: &[DemandDelta], mode: ErrorMode) -> Result<AnnualDemandImpact> {
    let mut seen = [false; 12];
    for d in deltas {
        if !(1..=12).contains(&d.calendar_month) {
            return Err(Error::InvalidMonth(d.calendar_month));
        }
        if std::mem::replace(&mut seen[d.calendar_month as usize - 1], true) {
            return Err(Error::DuplicateMonth(d.calendar_month));
        }
    }
    let errs = || deltas.iter().map(|d| d.delta_expense.se);
    Ok(AnnualDemandImpact {
        total_usd: deltas.iter().map(|d| d.delta_expense.value).sum(),
        err_linear: ErrorMode::Linear.combine(errs()),
        err_quadrature: ErrorMode::Quadrature.combine(errs()),
        months: deltas.len(),
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PowerSample;
    use chrono::{Duration, TimeZone};

    fn cal() -> TariffCalendar {
        TariffCalendar::default()
    }

    fn local(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        cal().timezone().with_ymd_and_hms(y, m, d, h, 0, 0).unwrap().with_timezone(&Utc)
    }

    fn input(loads: &[f64], g: f64) -> DeterminantInput {
        DeterminantInput {
            hourly_hlh_loads: loads.iter().enumerate().map(|(i, &kw)| (local(2013, 7, 2, 6) + Duration::hours(i as i64), kw)).collect(),
            grandfather_kw: g,
        }
    }

    #[test]
    fn determinant_arithmetic() {
        let d = billing_determinant(&input(&[10.0, 20.0, 30.0], 5.0)).unwrap();
        assert_eq!(d.value_kw, 5.0);
        assert!(d.charged());
        let flat = billing_determinant(&input(&[7.3; 16], 2.5)).unwrap();
        assert_eq!(flat.value_kw, -2.5);
        assert!(!flat.charged());
        assert!(billing_determinant(&input(&[], 0.0)).is_err());
    }

    #[test]
    fn status_bands() {
        let d = billing_determinant(&input(&[10.0, 20.0, 30.0], 5.0)).unwrap();
        assert_eq!(determinant_status(&d, 1.0), DeterminantStatus::Charged);
        assert_eq!(determinant_status(&d, 5.0), DeterminantStatus::NearZero);
        let n = billing_determinant(&input(&[10.0, 20.0, 30.0], 50.0)).unwrap();
        assert_eq!(determinant_status(&n, 5.0), DeterminantStatus::NotCharged);
    }

    #[test]
    fn input_for_month_keeps_only_hlh() {
        let loads: Vec<HourlyPower> = (0..24 * 7)
            .map(|i| HourlyPower { hour_start: local(2013, 7, 1, 0) + Duration::hours(i), mean_kw: i as f64, samples: 12, coverage: 1.0 })
            .collect();
        let inp = DeterminantInput::for_month(&cal(), &loads, 2013, 7, 0.0);
        // Jul 1-7 2013: Mon-Sun with Jul 4 a holiday, so 5 HLH days
        assert_eq!(inp.hourly_hlh_loads.len(), 5 * 16);
    }

    #[test]
    fn expense_formula() {
        let e = expense_delta(Uncertain::exact(2.0), Uncertain::exact(5.0), 10.0);
        assert_eq!(e.value, 30.0);
        assert_eq!(e.se, None);
        let july = expense_delta(Uncertain::new(39.0, Some(15.0)), Uncertain::new(19.0, Some(1.0)), 8.65);
        assert!(july.value < 0.0);
    }

    #[test]
    fn year_month_parsing() {
        assert_eq!("2013-07".parse::<YearMonth>().unwrap(), YearMonth { year: 2013, month: 7 });
        assert!("2013-13".parse::<YearMonth>().is_err());
        assert!("July".parse::<YearMonth>().is_err());
        assert_eq!(YearMonth { year: 2013, month: 7 }.to_string(), "2013-07");
    }

    fn peaks_csv(rows: &[(&str, &str)]) -> String {
        let mut s = "month,peak_hour_start_utc\n".to_string();
        for (m, t) in rows {
            s.push_str(&format!("{m},{t}\n"));
        }
        s
    }

    #[test]
    fn peak_record_keeps_latest_24_and_rejects_duplicates() {
        let rows: Vec<(String, String)> = (0..30)
            .map(|i| {
                let (y, m) = (2011 + i / 12, i % 12 + 1);
                (format!("{y}-{m:02}"), format!("{y}-{m:02}-10T17:00:00Z"))
            })
            .collect();
        let refs: Vec<(&str, &str)> = rows.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let rec = parse_peak_csv(peaks_csv(&refs).as_bytes()).unwrap();
        assert_eq!(rec.entries().len(), 24);
        assert_eq!(rec.entries()[0].month_key, YearMonth { year: 2011, month: 7 });

        let dup = peaks_csv(&[("2013-07", "2013-07-02T17:00:00Z"), ("2013-07", "2013-07-03T17:00:00Z")]);
        assert!(matches!(parse_peak_csv(dup.as_bytes()), Err(Error::DuplicateMonth(7))));
        let bad = peaks_csv(&[("2013-07", "yesterday")]);
        assert!(matches!(parse_peak_csv(bad.as_bytes()), Err(Error::MalformedRow { line: 2, .. })));
    }

    fn july_series(kw: impl Fn(DateTime<Utc>) -> f64) -> PowerSeries {
        let start = local(2013, 7, 1, 0);
        let samples = (0..31 * 288)
            .map(|i| {
                let t = start + Duration::minutes(5 * i);
                PowerSample { timestamp: t, power_kw: kw(t) }
            })
            .collect();
        PowerSeries::new("g", samples)
    }

    fn july_peaks() -> PeakHourRecord {
        PeakHourRecord::new(vec![
            PeakHourEntry { month_key: YearMonth { year: 2013, month: 7 }, peak_hour_start: local(2013, 7, 2, 17) },
            PeakHourEntry { month_key: YearMonth { year: 2012, month: 7 }, peak_hour_start: local(2013, 7, 9, 10) },
        ])
        .unwrap()
    }

    #[test]
    fn zero_generation_has_zero_expense() {
        let sched = RateSchedule::flat(30.0, 20.0, 9.0, 0.0).unwrap();
        let d = demand_delta(&july_series(|_| 0.0), &july_peaks(), &cal(), &sched, 7, 0.5).unwrap();
        assert_eq!(d.delta_expense.value, 0.0);
        assert_eq!(d.peak_observations, 2);
    }

    #[test]
    fn constant_hlh_generation_cancels_exactly() {
        let sched = RateSchedule::flat(30.0, 20.0, 9.0, 0.0).unwrap();
        let c = cal();
        let gen = july_series(|t| if c.classify_hour(t) == HourClass::Hlh { 0.37 } else { 0.0 });
        let d = demand_delta(&gen, &july_peaks(), &c, &sched, 7, 0.5).unwrap();
        assert_eq!(d.delta_peak_kw.value, 0.37);
        assert_eq!(d.delta_ahlh_kw.value, 0.37);
        assert_eq!(d.delta_expense.value, 0.0);
    }

    #[test]
    fn missing_history_and_missing_generation() {
        let sched = RateSchedule::flat(30.0, 20.0, 9.0, 0.0).unwrap();
        let gen = july_series(|_| 1.0);
        let err = demand_delta(&gen, &july_peaks(), &cal(), &sched, 8, 0.5).unwrap_err();
        assert!(matches!(err, Error::InsufficientHistory(8)));

        // drop the hour of the first peak from the generation record
        let gap_start = local(2013, 7, 2, 17);
        let gapped = PowerSeries::new(
            "g",
            gen.samples.iter().copied().filter(|s| s.timestamp < gap_start || s.timestamp >= gap_start + Duration::hours(1)).collect(),
        );
        let d = demand_delta(&gapped, &july_peaks(), &cal(), &sched, 7, 0.5).unwrap();
        assert_eq!(d.peak_observations, 1);
        assert_eq!(d.dropped_observations, 1);
        assert_eq!(d.delta_peak_kw.se, None);
    }

    #[test]
    fn annual_sum_and_duplicates() {
        let mk = |m, v| DemandDelta {
            calendar_month: m,
            delta_peak_kw: Uncertain::exact(0.0),
            delta_ahlh_kw: Uncertain::exact(0.0),
            delta_expense: Uncertain::new(v, Some(3.0)),
            demand_rate: 1.0,
            peak_observations: 2,
            dropped_observations: 0,
        };
        let a = annual_demand_impact(&[mk(1, 10.0), mk(2, -4.0)], ErrorMode::Linear).unwrap();
        assert_eq!(a.total_usd, 6.0);
        assert_eq!(a.err(), Some(6.0));
        assert!((a.err_quadrature.unwrap() - 18f64.sqrt()).abs() < 1e-12);
        assert!(annual_demand_impact(&[mk(1, 1.0), mk(1, 1.0)], ErrorMode::Linear).is_err());
        assert_eq!(annual_demand_impact(&[], ErrorMode::Linear).unwrap().total_usd, 0.0);
    }
}
