//! Fixture files and a runner for the `gridworth` binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use gridworth_core::ingest::{format_timestamp, write_hourly_csv, HourlyPower, IntervalSample, IntervalSeries};
use gridworth_core::synthetic::{pv_series, wind_series, SynthOptions};
use gridworth_core::TariffCalendar;
use tempfile::TempDir;

pub const GEN_HEADER: &str = "timestamp_utc,energy_wh\n";

pub struct Fixtures {
    dir: TempDir,
    pub pv: PathBuf,
    pub zero_gen: PathBuf,
    pub empty_gen: PathBuf,
    pub wind: PathBuf,
    pub met: PathBuf,
    pub peaks: PathBuf,
    /// Same history with every April entry removed.
    pub peaks_no_april: PathBuf,
    pub peaks_empty: PathBuf,
    pub load: PathBuf,
    pub schedule: PathBuf,
}

impl Fixtures {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes an extra file into the fixture directory.
    pub fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }
}

fn local_midnight(cal: &TariffCalendar, y: i32, m: u32, d: u32) -> DateTime<Utc> {
    cal.timezone().with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap().with_timezone(&Utc)
}

fn write_series(path: &Path, series: &IntervalSeries) {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

/// Two calendar years (2012-2013) of 5-minute PV data, a zero-output twin,
/// a month of wind with met data, peak-hour history and hourly purchases.
pub fn fixtures() -> Fixtures {
    let dir = tempfile::tempdir().unwrap();
    let at = |n: &str| dir.path().join(n);
    let cal = TariffCalendar::default();

    let start = local_midnight(&cal, 2012, 1, 1);
    let days = (local_midnight(&cal, 2014, 1, 1) - start).num_days();
    let pv = pv_series("pv", &cal, SynthOptions { start, days, nameplate_kw: 54.0, dropout: 0.01, seed: 7 });
    write_series(&at("pv.csv"), &pv);

    let zero: Vec<IntervalSample> = pv.samples().iter().map(|s| IntervalSample { timestamp: s.timestamp, energy_wh: 0.0 }).collect();
    write_series(&at("zero.csv"), &IntervalSeries::from_samples("zero", zero).unwrap());
    fs::write(at("empty.csv"), GEN_HEADER).unwrap();

    let wstart = local_midnight(&cal, 2013, 3, 1);
    let (wind, met) = wind_series("wind", SynthOptions { start: wstart, days: 21, nameplate_kw: 10.0, dropout: 0.02, seed: 11 });
    write_series(&at("wind.csv"), &wind);
    let mut m = String::from("timestamp_utc,wind_speed_mps\n");
    for s in &met {
        writeln!(m, "{},{}", format_timestamp(s.timestamp), s.wind_speed_mps).unwrap();
    }
    fs::write(at("met.csv"), m).unwrap();

    // Winter peaks in the morning, summer peaks late afternoon, on the first Tuesday.
    let mut peaks = String::from("month,peak_hour_start_utc\n");
    let mut no_april = peaks.clone();
    for year in [2012, 2013] {
        for month in 1..=12u32 {
            let tuesday = NaiveDate::from_weekday_of_month_opt(year, month, Weekday::Tue, 1).unwrap();
            let hour = if (4..=9).contains(&month) { 17 } else { 8 };
            let t = local_midnight(&cal, year, month, tuesday.day()) + Duration::hours(hour);
            let line = format!("{year:04}-{month:02},{}\n", format_timestamp(t));
            peaks.push_str(&line);
            if month != 4 {
                no_april.push_str(&line);
            }
        }
    }
    fs::write(at("peaks.csv"), peaks).unwrap();
    fs::write(at("peaks_no_april.csv"), no_april).unwrap();
    fs::write(at("peaks_empty.csv"), "month,peak_hour_start_utc\n").unwrap();

    let hours: Vec<HourlyPower> = (0..days * 24)
        .map(|i| {
            let t = start + Duration::hours(i);
            let h = (i % 24) as f64;
            let mean_kw = 20_000.0 + 4_000.0 * (std::f64::consts::PI * (h - 3.0) / 12.0).sin().max(0.0) + (i % 7) as f64 * 35.0;
            HourlyPower { hour_start: t, mean_kw, samples: 12, coverage: 1.0 }
        })
        .collect();
    let mut buf = Vec::new();
    write_hourly_csv(&hours, &mut buf).unwrap();
    fs::write(at("load.csv"), buf).unwrap();

    Fixtures {
        pv: at("pv.csv"),
        zero_gen: at("zero.csv"),
        empty_gen: at("empty.csv"),
        wind: at("wind.csv"),
        met: at("met.csv"),
        peaks: at("peaks.csv"),
        peaks_no_april: at("peaks_no_april.csv"),
        peaks_empty: at("peaks_empty.csv"),
        load: at("load.csv"),
        schedule: Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_schedule.json"),
        dir,
    }
}

pub fn gridworth<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_gridworth")).env_remove("GRIDWORTH_TZ").args(args).output().unwrap()
}

/// Every file in a directory, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Checks the failure contract: nonzero exit, empty stdout, exactly one
/// stderr line containing `needle`.
pub fn check_failure(o: &Output, needle: &str) -> Result<(), String> {
    let err = stderr(o);
    if o.status.success() {
        return Err(format!("exited 0 (stdout {:?})", stdout(o)));
    }
    if !o.stdout.is_empty() {
        return Err(format!("wrote to stdout: {:?}", stdout(o)));
    }
    if err.lines().count() != 1 || !err.ends_with('\n') {
        return Err(format!("expected one diagnostic line, got {err:?}"));
    }
    if !err.contains(needle) {
        return Err(format!("diagnostic {err:?} lacks {needle:?}"));
    }
    Ok(())
}

/// Documented failure cases: (label, args, expected diagnostic fragment).
pub fn error_cases(fx: &Fixtures) -> Vec<(&'static str, Vec<String>, String)> {
    let s = |p: &Path| p.display().to_string();
    let out = s(&fx.out("err-out"));
    let sched = s(&fx.schedule);
    let bad_row = fx.file("bad_row.csv", "timestamp_utc,energy_wh\n2013-01-01T00:00:00Z,10\n2013-01-01T00:05:00Z,abc\n");
    let negative = fx.file("negative.csv", "timestamp_utc,energy_wh\n2013-01-01T00:00:00Z,10\n2013-01-01T00:05:00Z,-3\n");
    let header = fx.file("header.csv", "time,wh\n2013-01-01T00:00:00Z,10\n");
    let conflict = fx.file("conflict.csv", "timestamp_utc,energy_wh\n2013-01-01T00:00:00Z,10\n2013-01-01T00:00:00Z,11\n");
    let mut short = serde_json::from_str::<serde_json::Value>(&fs::read_to_string(&fx.schedule).unwrap()).unwrap();
    short["months"].as_array_mut().unwrap().pop();
    let short = fx.file("short_schedule.json", &short.to_string());
    let energy_with = |gen: String, sched: String, extra: &[&str]| {
        let mut v = vec!["energy".to_string(), "--generation".into(), gen, "--schedule".into(), sched, "--out-dir".into(), out.clone()];
        v.extend(extra.iter().map(|x| x.to_string()));
        v
    };
    let energy = |gen: String, extra: &[&str]| energy_with(gen, sched.clone(), extra);
    let demand = |peaks: String| {
        vec![
            "demand".to_string(),
            "--generation".into(),
            s(&fx.pv),
            "--peaks".into(),
            peaks,
            "--schedule".into(),
            sched.clone(),
            "--out-dir".into(),
            out.clone(),
        ]
    };
    let argv = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        ("zero-row generation", energy(s(&fx.empty_gen), &[]), format!("{}: no data", s(&fx.empty_gen))),
        ("missing generation file", energy(s(&fx.out("absent.csv")), &[]), "absent.csv".into()),
        ("malformed row", energy(s(&bad_row), &[]), "line 3".into()),
        ("negative energy", energy(s(&negative), &[]), "negative energy".into()),
        ("bad header", energy(s(&header), &[]), "bad header".into()),
        ("conflicting duplicate", energy(s(&conflict), &[]), "conflicting".into()),
        ("schedule missing a month", energy_with(s(&fx.pv), s(&short), &[]), "missing month 12".into()),
        ("unknown error mode", energy(s(&fx.pv), &["--error-mode", "cubic"]), "--error-mode".into()),
        ("unknown timezone", energy(s(&fx.pv), &["--tz", "Mars/Olympus"]), "unknown timezone".into()),
        ("empty peak history", demand(s(&fx.peaks_empty)), "no peak history".into()),
        ("missing peak history file", demand(s(&fx.out("no_peaks.csv"))), "no_peaks.csv".into()),
        ("hours: invalid month", argv(&["hours", "--year", "2013", "--month", "13"]), "invalid month 13".into()),
        ("hours: missing argument", argv(&["hours", "--year", "2013"]), "--month".into()),
        ("capacity: zero nameplate", argv(&["capacity", "--annual-kwh", "100", "--nameplate-kw", "0"]), "nameplate".into()),
        (
            "curve: zero bin width",
            argv(&["curve", "--generation", &s(&fx.wind), "--met", &s(&fx.met), "--bin-width", "0", "--out-dir", &out]),
            "bin width".into(),
        ),
        ("no subcommand", vec![], "subcommand".into()),
    ]
}
