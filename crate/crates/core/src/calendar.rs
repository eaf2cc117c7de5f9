//! Heavy-load / light-load hour classification in local civil time.
//!
//! An hour is HLH when its local hour-beginning label is 06..=21, the local
//! day is not a Sunday and the local date is not one of the six NERC
//! holidays (or a configured extra exclusion). Everything else is LLH.
//! Holidays are taken on their actual date; weekend holidays are not
//! shifted to an observed weekday.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Timelike, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{PowerSample, PowerSeries};

pub const DEFAULT_TIMEZONE: &str = "America/Los_Angeles";
/// First local hour-beginning label inside the heavy-load window.
pub const HLH_FIRST_HOUR: u32 = 6;
/// Local hour at which the heavy-load window closes (exclusive).
pub const HLH_END_HOUR: u32 = 22;
pub const HLH_HOURS_PER_DAY: u32 = HLH_END_HOUR - HLH_FIRST_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HourClass {
    #[serde(rename = "HLH")]
    Hlh,
    #[serde(rename = "LLH")]
    Llh,
}

impl fmt::Display for HourClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HourClass::Hlh => "HLH",
            HourClass::Llh => "LLH",
        })
    }
}

/// HLH/LLH hour counts for one calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthHours {
    pub hlh: u32,
    pub llh: u32,
}

impl MonthHours {
    pub fn total(self) -> u32 {
        self.hlh + self.llh
    }

    pub fn get(self, class: HourClass) -> u32 {
        match class {
            HourClass::Hlh => self.hlh,
            HourClass::Llh => self.llh,
        }
    }
}

/// Local civil-time view of an instant, as seen by a [`TariffCalendar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalStamp {
    pub local: NaiveDateTime,
    pub class: HourClass,
}

impl LocalStamp {
    pub fn year(&self) -> i32 {
        self.local.year()
    }
    pub fn month(&self) -> u32 {
        self.local.month()
    }
    pub fn date(&self) -> NaiveDate {
        self.local.date()
    }
    pub fn hour(&self) -> u32 {
        self.local.hour()
    }
}

/// Structured overrides for building a calendar, e.g. from a JSON file:
///
/// ```json
/// { "timezone": "America/Los_Angeles", "extra_exclusion_dates": ["2013-11-29"] }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarConfig {
    #[serde(default)]
    pub timezone: Option<String>,
    #[serde(default)]
    pub extra_exclusion_dates: Vec<NaiveDate>,
}

impl CalendarConfig {
    pub fn from_json(raw: &str) -> Result<Self> {
        serde_json::from_str(raw).map_err(|e| Error::CalendarConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TariffCalendar {
    tz: Tz,
    extra_exclusions: BTreeSet<NaiveDate>,
}

impl Default for TariffCalendar {
    fn default() -> Self {
        Self { tz: chrono_tz::America::Los_Angeles, extra_exclusions: BTreeSet::new() }
    }
}

impl TariffCalendar {
    pub fn new(timezone: &str) -> Result<Self> {
        let tz = Tz::from_str(timezone).map_err(|_| Error::UnknownTimezone(timezone.to_string()))?;
        Ok(Self { tz, extra_exclusions: BTreeSet::new() })
    }

    pub fn from_config(config: &CalendarConfig) -> Result<Self> {
        let cal = Self::new(config.timezone.as_deref().unwrap_or(DEFAULT_TIMEZONE))?;
        Ok(cal.with_extra_exclusions(config.extra_exclusion_dates.iter().copied()))
    }

    /// Adds local dates that are treated like holidays.
    pub fn with_extra_exclusions(mut self, dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.extra_exclusions.extend(dates);
        self
    }

    pub fn timezone(&self) -> Tz {
        self.tz
    }

    pub fn timezone_name(&self) -> &'static str {
        self.tz.name()
    }

    pub fn extra_exclusions(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.extra_exclusions.iter().copied()
    }

    pub fn to_local(&self, instant: DateTime<Utc>) -> NaiveDateTime {
        self.tz.from_utc_datetime(&instant.naive_utc()).naive_local()
    }

    /// True when the local date carries no heavy-load hours at all.
    pub fn is_excluded_day(&self, date: NaiveDate) -> bool {
        date.weekday() == Weekday::Sun || is_nerc_holiday(date) || self.extra_exclusions.contains(&date)
    }

    /// Classifies the clock hour containing `hour_start`.
    pub fn classify_hour(&self, hour_start: DateTime<Utc>) -> HourClass {
        self.classify_local(self.to_local(hour_start))
    }

    fn classify_local(&self, local: NaiveDateTime) -> HourClass {
        let in_window = (HLH_FIRST_HOUR..HLH_END_HOUR).contains(&local.hour());
        if in_window && !self.is_excluded_day(local.date()) {
            HourClass::Hlh
        } else {
            HourClass::Llh
        }
    }

    pub fn stamp(&self, instant: DateTime<Utc>) -> LocalStamp {
        let local = self.to_local(instant);
        LocalStamp { local, class: self.classify_local(local) }
    }

    /// UTC instant of local midnight starting `date`.
    fn local_midnight(&self, date: NaiveDate) -> DateTime<Utc> {
        let naive = date.and_time(NaiveTime::MIN);
        match self.tz.from_local_datetime(&naive).earliest() {
            Some(t) => t.with_timezone(&Utc),
            // Zones that skip midnight: the first valid instant is an hour on.
            None => self
                .tz
                .from_local_datetime(&(naive + Duration::hours(1)))
                .earliest()
                .expect("local time one hour past a gap exists")
                .with_timezone(&Utc)
                - Duration::hours(1),
        }
    }

    /// HLH/LLH counts for a local calendar month.
    ///
    /// The heavy-load window never touches a DST transition in North
    /// American zones, so HLH is 16 hours per non-excluded day; the month
    /// total comes from the elapsed UTC time between local month starts
    /// (one hour short in March, one hour long in November).
    pub fn hours_in_month(&self, year: i32, month: u32) -> Result<MonthHours> {
        let first = NaiveDate::from_ymd_opt(year, month, 1).ok_or(Error::InvalidMonth(month))?;
        let next = first.checked_add_months(chrono::Months::new(1)).ok_or(Error::InvalidMonth(month))?;
        let total = (self.local_midnight(next) - self.local_midnight(first)).num_hours() as u32;
        let hlh_days = first.iter_days().take_while(|d| *d < next).filter(|d| !self.is_excluded_day(*d)).count();
        let hlh = hlh_days as u32 * HLH_HOURS_PER_DAY;
        Ok(MonthHours { hlh, llh: total - hlh })
    }

    /// Splits a series by the class of each sample's containing hour.
    pub fn classify_series(&self, series: &PowerSeries) -> ClassifiedSeries {
        self.classify_series_with(Execution::default(), series)
    }

    pub fn classify_series_with(&self, exec: Execution, series: &PowerSeries) -> ClassifiedSeries {
        let classes = exec.map(&series.samples, |s| self.classify_hour(s.timestamp));
        let mut out = ClassifiedSeries::default();
        for (s, class) in series.samples.iter().zip(classes) {
            match class {
                HourClass::Hlh => out.hlh.push(*s),
                HourClass::Llh => out.llh.push(*s),
            }
        }
        out
    }

    /// Local stamps for every sample, in order.
    pub fn stamp_all(&self, exec: Execution, series: &PowerSeries) -> Vec<LocalStamp> {
        exec.map(&series.samples, |s| self.stamp(s.timestamp))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifiedSeries {
    pub hlh: Vec<PowerSample>,
    pub llh: Vec<PowerSample>,
}

/// The six NERC holidays for `year`, on their actual dates.
pub fn nerc_holidays(year: i32) -> [NaiveDate; 6] {
    let ymd = |m, d| NaiveDate::from_ymd_opt(year, m, d).expect("valid holiday date");
    let nth = |m, wd, n| NaiveDate::from_weekday_of_month_opt(year, m, wd, n).expect("valid weekday of month");
    let last_monday_may = {
        let may31 = ymd(5, 31);
        let back = may31.weekday().num_days_from_monday();
        may31 - Duration::days(back as i64)
    };
    [
        ymd(1, 1),
        last_monday_may,
        ymd(7, 4),
        nth(9, Weekday::Mon, 1),
        nth(11, Weekday::Thu, 4),
        ymd(12, 25),
    ]
}

pub fn is_nerc_holiday(date: NaiveDate) -> bool {
    nerc_holidays(date.year()).contains(&date)
}
