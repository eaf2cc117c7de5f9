//! Interval meter and metrology data: parsing, regularization, conversion
//! to average power, met alignment and hourly aggregation.
//!
//! All timestamps are UTC here. Civil-time interpretation belongs to
//! [`crate::calendar`].

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, DurationRound, NaiveDateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::stats;

/// Length of one meter interval.
pub const INTERVAL_SECONDS: i64 = 300;
/// Intervals per clock hour.
pub const INTERVALS_PER_HOUR: usize = 12;
/// Default hourly completeness threshold for [`aggregate_hourly`].
pub const DEFAULT_MIN_HOUR_COVERAGE: f64 = 0.5;
/// Default met join tolerance, half an interval.
pub const DEFAULT_MET_TOLERANCE_SECONDS: i64 = 150;

pub const INTERVAL_HEADER: [&str; 2] = ["timestamp_utc", "energy_wh"];
pub const MET_HEADER: [&str; 2] = ["timestamp_utc", "wind_speed_mps"];
pub const HOURLY_HEADER: [&str; 2] = ["hour_start_utc", "mean_kw"];

fn interval() -> TimeDelta {
    TimeDelta::seconds(INTERVAL_SECONDS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    /// Start of the 5-minute interval.
    pub timestamp: DateTime<Utc>,
    pub energy_wh: f64,
}

/// Counters collected while ingesting one file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    /// Missing interval slots between the first and last sample.
    pub gaps: usize,
    /// Rows collapsed because they repeated an earlier row exactly.
    pub duplicates: usize,
    /// Rows whose timestamp was floored onto the 5-minute grid.
    pub realigned: usize,
}

/// Sorted, de-duplicated 5-minute energy readings from one meter. Missing
/// intervals are absent, never zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSeries {
    pub meter_id: String,
    samples: Vec<IntervalSample>,
    report: IngestReport,
}

impl IntervalSeries {
    /// Builds a series from samples in any order, applying the same
    /// regularization rules as the CSV parser.
    pub fn from_samples(meter_id: impl Into<String>, samples: Vec<IntervalSample>) -> Result<Self> {
        let rows = samples
            .into_iter()
            .enumerate()
            .map(|(i, s)| (i as u64 + 1, s.timestamp, s.energy_wh))
            .collect();
        regularize(meter_id.into(), rows)
    }

    pub fn samples(&self) -> &[IntervalSample] {
        &self.samples
    }

    pub fn report(&self) -> IngestReport {
        self.report
    }

    pub fn interval_seconds(&self) -> i64 {
        INTERVAL_SECONDS
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_energy_wh(&self) -> f64 {
        self.samples.iter().map(|s| s.energy_wh).sum()
    }

    /// Writes the series in the interval CSV format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(INTERVAL_HEADER)?;
        for s in &self.samples {
            w.write_record([format_timestamp(s.timestamp), s.energy_wh.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub timestamp: DateTime<Utc>,
    pub power_kw: f64,
}

/// Average power per 5-minute interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerSeries {
    pub meter_id: String,
    pub samples: Vec<PowerSample>,
}

impl PowerSeries {
    /// Wraps already-sorted samples. Panics in debug builds if unsorted.
    pub fn new(meter_id: impl Into<String>, samples: Vec<PowerSample>) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        Self { meter_id: meter_id.into(), samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Energy represented by the samples, in kWh.
    pub fn energy_kwh(&self) -> f64 {
        self.samples.iter().map(|s| s.power_kw / INTERVALS_PER_HOUR as f64).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            meter_id: self.meter_id.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| PowerSample { timestamp: s.timestamp, power_kw: s.power_kw * k })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetSample {
    pub timestamp: DateTime<Utc>,
    pub wind_speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub timestamp: DateTime<Utc>,
    pub power_kw: f64,
    pub wind_speed_mps: f64,
}

/// Result of [`align_with_met`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    pub pairs: Vec<PairedSample>,
    pub unmatched_power: usize,
    pub unmatched_met: usize,
}

/// One clock hour of averaged power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyPower {
    pub hour_start: DateTime<Utc>,
    pub mean_kw: f64,
    /// 5-minute samples present in the hour.
    pub samples: usize,
    /// `samples / 12`.
    pub coverage: f64,
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses an RFC 3339 instant. A missing seconds field (`2013-01-01T00:00Z`)
/// is accepted.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc));
    }
    // Minute precision, with either a Z or a numeric offset.
    if let Ok(ts) = DateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M%:z") {
        return Some(ts.with_timezone(&Utc));
    }
    let naive = raw.strip_suffix('Z').or_else(|| raw.strip_suffix('z'))?;
    NaiveDateTime::parse_from_str(naive, "%Y-%m-%dT%H:%M")
        .ok()
        .map(|n| n.and_utc())
}

fn reader<R: Read>(raw: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(raw)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: [&str; 2]) -> Result<()> {
    let found = rdr.headers()?.clone();
    if found.len() != 2 || found.iter().zip(expected).any(|(f, e)| f != e) {
        return Err(Error::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_row(rec: &csv::StringRecord, what: &str) -> Result<(u64, DateTime<Utc>, f64)> {
    let line = line_of(rec);
    if rec.len() != 2 {
        return Err(Error::MalformedRow { line, reason: format!("expected 2 fields, found {}", rec.len()) });
    }
    let ts = parse_timestamp(&rec[0])
        .ok_or_else(|| Error::MalformedRow { line, reason: format!("bad timestamp `{}`", &rec[0]) })?;
    let value: f64 = rec[1]
        .parse()
        .map_err(|_| Error::MalformedRow { line, reason: format!("bad {what} `{}`", &rec[1]) })?;
    if !value.is_finite() {
        return Err(Error::MalformedRow { line, reason: format!("non-finite {what}") });
    }
    Ok((line, ts, value))
}

/// Parses the interval CSV (`timestamp_utc,energy_wh`).
///
/// Rows may arrive in any order. Timestamps off the 5-minute grid are
/// floored onto it. Exact duplicates collapse; a repeated timestamp with a
/// different energy is rejected, as is any negative energy.
pub fn parse_interval_csv<R: Read>(raw: R, meter_id: &str) -> Result<IntervalSeries> {
    let mut rdr = reader(raw);
    check_header(&mut rdr, INTERVAL_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(parse_row(&rec?, "energy")?);
    }
    regularize(meter_id.to_string(), rows)
}

fn regularize(meter_id: String, mut rows: Vec<(u64, DateTime<Utc>, f64)>) -> Result<IntervalSeries> {
    let mut report = IngestReport { rows: rows.len(), ..Default::default() };
    for (line, ts, energy) in rows.iter_mut() {
        if *energy < 0.0 || !energy.is_finite() {
            return Err(Error::NegativeEnergy { line: *line, value: *energy });
        }
        let floored = ts.duration_trunc(interval()).expect("5-minute truncation in range");
        if floored != *ts {
            report.realigned += 1;
            *ts = floored;
        }
    }
    rows.sort_by_key(|&(line, ts, _)| (ts, line));

    let mut samples: Vec<IntervalSample> = Vec::with_capacity(rows.len());
    for (line, ts, energy) in rows {
        match samples.last() {
            Some(prev) if prev.timestamp == ts => {
                if prev.energy_wh != energy {
                    return Err(Error::ConflictingDuplicate { line, timestamp: ts });
                }
                report.duplicates += 1;
            }
            _ => samples.push(IntervalSample { timestamp: ts, energy_wh: energy }),
        }
    }
    report.gaps = count_gaps(samples.iter().map(|s| s.timestamp));
    Ok(IntervalSeries { meter_id, samples, report })
}

fn count_gaps(timestamps: impl Iterator<Item = DateTime<Utc>>) -> usize {
    let mut gaps = 0;
    let mut prev: Option<DateTime<Utc>> = None;
    for ts in timestamps {
        if let Some(p) = prev {
            let slots = (ts - p).num_seconds() / INTERVAL_SECONDS;
            gaps += (slots - 1).max(0) as usize;
        }
        prev = Some(ts);
    }
    gaps
}

/// Parses the met CSV (`timestamp_utc,wind_speed_mps`), sorted by time.
/// Repeated timestamps keep the first row.
pub fn parse_met_csv<R: Read>(raw: R) -> Result<Vec<MetSample>> {
    let mut rdr = reader(raw);
    check_header(&mut rdr, MET_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let (line, ts, speed) = parse_row(&rec?, "wind speed")?;
        if speed < 0.0 {
            return Err(Error::NegativeWindSpeed { line, value: speed });
        }
        out.push(MetSample { timestamp: ts, wind_speed_mps: speed });
    }
    out.sort_by_key(|m| m.timestamp);
    out.dedup_by_key(|m| m.timestamp);
    Ok(out)
}

/// Parses the hourly load CSV (`hour_start_utc,mean_kw`).
pub fn parse_hourly_csv<R: Read>(raw: R) -> Result<Vec<HourlyPower>> {
    let mut rdr = reader(raw);
    check_header(&mut rdr, HOURLY_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let (line, ts, kw) = parse_row(&rec?, "power")?;
        if ts.duration_trunc(TimeDelta::hours(1)).ok() != Some(ts) {
            return Err(Error::MalformedRow { line, reason: format!("{} is not a whole hour", format_timestamp(ts)) });
        }
        out.push(HourlyPower { hour_start: ts, mean_kw: kw, samples: INTERVALS_PER_HOUR, coverage: 1.0 });
    }
    out.sort_by_key(|h| h.hour_start);
    Ok(out)
}

pub fn write_hourly_csv<W: Write>(hours: &[HourlyPower], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HOURLY_HEADER)?;
    for h in hours {
        w.write_record([format_timestamp(h.hour_start), h.mean_kw.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Converts interval energy to average power: `kW = Wh * 12 / 1000`.
pub fn to_average_power(series: &IntervalSeries) -> PowerSeries {
    PowerSeries {
        meter_id: series.meter_id.clone(),
        samples: series
            .samples
            .iter()
            .map(|s| PowerSample { timestamp: s.timestamp, power_kw: s.energy_wh * 12.0 / 1000.0 })
            .collect(),
    }
}

/// Nearest-neighbour join of power onto met samples within `tolerance`.
/// Ties go to the earlier met sample. Both inputs must be sorted.
pub fn align_with_met(power: &PowerSeries, met: &[MetSample], tolerance: TimeDelta) -> Alignment {
    align_with_met_with(Execution::default(), power, met, tolerance)
}

pub fn align_with_met_with(
    exec: Execution,
    power: &PowerSeries,
    met: &[MetSample],
    tolerance: TimeDelta,
) -> Alignment {
    let matches = exec.map(&power.samples, |p| nearest_met(met, p.timestamp, tolerance));
    let mut used = vec![false; met.len()];
    let mut pairs = Vec::with_capacity(matches.len());
    let mut unmatched_power = 0;
    for (p, m) in power.samples.iter().zip(matches) {
        match m {
            Some(i) => {
                used[i] = true;
                pairs.push(PairedSample {
                    timestamp: p.timestamp,
                    power_kw: p.power_kw,
                    wind_speed_mps: met[i].wind_speed_mps,
                });
            }
            None => unmatched_power += 1,
        }
    }
    Alignment { pairs, unmatched_power, unmatched_met: used.iter().filter(|u| !**u).count() }
}

fn nearest_met(met: &[MetSample], ts: DateTime<Utc>, tolerance: TimeDelta) -> Option<usize> {
    let idx = met.partition_point(|m| m.timestamp < ts);
    let before = idx.checked_sub(1).map(|i| (i, ts - met[i].timestamp));
    let after = met.get(idx).map(|m| (idx, m.timestamp - ts));
    let best = match (before, after) {
        (Some(b), Some(a)) => Some(if a.1 < b.1 { a } else { b }),
        (b, a) => b.or(a),
    };
    best.filter(|&(_, d)| d <= tolerance).map(|(i, _)| i)
}

/// Mean power per UTC clock hour. An hour is emitted only when the fraction
/// of its 12 slots that are present reaches `min_coverage`.
pub fn aggregate_hourly(power: &PowerSeries, min_coverage: f64) -> Result<Vec<HourlyPower>> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(Error::InvalidArgument(format!("min_coverage must be in (0, 1], got {min_coverage}")));
    }
    let mut by_hour: BTreeMap<DateTime<Utc>, Vec<f64>> = BTreeMap::new();
    for s in &power.samples {
        let hour = s.timestamp.duration_trunc(TimeDelta::hours(1)).expect("hour truncation in range");
        by_hour.entry(hour).or_default().push(s.power_kw);
    }
    Ok(by_hour
        .into_iter()
        .filter_map(|(hour_start, vals)| {
            let coverage = vals.len() as f64 / INTERVALS_PER_HOUR as f64;
            (coverage >= min_coverage).then(|| HourlyPower {
                hour_start,
                mean_kw: stats::mean(&vals).unwrap_or(0.0),
                samples: vals.len(),
                coverage,
            })
        })
        .collect())
}
