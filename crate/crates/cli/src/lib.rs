//! `gridworth` command-line reports: argument parsing, input loading, and
//! deterministic CSV/JSON output with a manifest of inputs and outputs.

pub mod manifest;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::TimeDelta;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gridworth_core::calendar::CalendarConfig;
use gridworth_core::characterize::{self, DEFAULT_BIN_WIDTH_MPS};
use gridworth_core::demand::{self, DemandAnalysis, DeterminantInput, PeakHourRecord, YearMonth};
use gridworth_core::ingest::{self, DEFAULT_MET_TOLERANCE_SECONDS, DEFAULT_MIN_HOUR_COVERAGE};
use gridworth_core::valuation::{self, AnnualEstimate, ErrorMode};
use gridworth_core::{rates, Execution, PowerSeries, RateSchedule, TariffCalendar};

use manifest::{AnalysisRun, CalendarParams, FileRecord, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "gridworth", version, about = "Value and characterize interval meter data from distributed generation")]
pub struct Cli {
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monthly HLH/LLH energy and value with an annual total.
    Energy(EnergyArgs),
    /// Change in demand charges caused by the generator.
    Demand(DemandArgs),
    /// Binned power curve from generation and met data.
    Curve(CurveArgs),
    /// Capacity factor from annual energy and nameplate.
    Capacity(CapacityArgs),
    /// HLH and LLH hour counts for one month.
    Hours(HoursArgs),
    /// Mean power by local hour of day.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CalendarArgs {
    /// IANA timezone for the tariff calendar (overrides the calendar file).
    #[arg(long, env = "GRIDWORTH_TZ")]
    pub tz: Option<String>,
    /// JSON calendar config: `timezone`, `extra_exclusion_dates`.
    #[arg(long, value_name = "PATH")]
    pub calendar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerationArgs {
    /// Interval CSV (`timestamp_utc,energy_wh`).
    #[arg(long, value_name = "PATH")]
    pub generation: PathBuf,
    /// Meter id; defaults to the file stem.
    #[arg(long)]
    pub meter_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub gen: GenerationArgs,
    /// Rate schedule JSON.
    #[arg(long, value_name = "PATH")]
    pub schedule: PathBuf,
    /// Year whose hour counts scale the pooled means; defaults to the latest year in the data.
    #[arg(long)]
    pub reference_year: Option<i32>,
    #[arg(long, default_value_t = ErrorMode::Quadrature, value_parser = parse_error_mode)]
    pub error_mode: ErrorMode,
    #[command(flatten)]
    pub calendar: CalendarArgs,
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemandArgs {
    #[command(flatten)]
    pub gen: GenerationArgs,
    /// Peak-hour history CSV (`month,peak_hour_start_utc`).
    #[arg(long, value_name = "PATH")]
    pub peaks: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub schedule: PathBuf,
    /// Hourly purchases CSV (`hour_start_utc,mean_kw`) for billing determinants.
    #[arg(long, value_name = "PATH")]
    pub load: Option<PathBuf>,
    /// Determinants at or below this many kW are flagged as near zero.
    #[arg(long, default_value_t = 0.0)]
    pub band_kw: f64,
    /// Minimum fraction of 5-minute samples for an hour to count.
    #[arg(long, default_value_t = DEFAULT_MIN_HOUR_COVERAGE)]
    pub min_hour_coverage: f64,
    #[arg(long, default_value_t = ErrorMode::Quadrature, value_parser = parse_error_mode)]
    pub error_mode: ErrorMode,
    #[command(flatten)]
    pub calendar: CalendarArgs,
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub gen: GenerationArgs,
    /// Met CSV (`timestamp_utc,wind_speed_mps`).
    #[arg(long, value_name = "PATH")]
    pub met: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_MPS)]
    pub bin_width: f64,
    /// Largest generation/met time offset accepted as a pair.
    #[arg(long, default_value_t = DEFAULT_MET_TOLERANCE_SECONDS)]
    pub tolerance_seconds: i64,
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long)]
    pub annual_kwh: f64,
    #[arg(long)]
    pub nameplate_kw: f64,
}

#[derive(Debug, Args)]
pub struct HoursArgs {
    #[arg(long)]
    pub year: i32,
    #[arg(long)]
    pub month: u32,
    #[command(flatten)]
    pub calendar: CalendarArgs,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub gen: GenerationArgs,
    /// Calendar month; defaults to every month with data.
    #[arg(long)]
    pub month: Option<u32>,
    #[command(flatten)]
    pub calendar: CalendarArgs,
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
}

fn parse_error_mode(s: &str) -> std::result::Result<ErrorMode, String> {
    s.parse().map_err(|_| format!("expected `linear` or `quadrature`, got `{s}`"))
}

/// Runs a parsed command and returns what should go to stdout.
pub fn run(cli: Cli) -> Result<String> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Energy(a) => cmd_energy(exec, a),
        Command::Demand(a) => cmd_demand(exec, a),
        Command::Curve(a) => cmd_curve(exec, a),
        Command::Capacity(a) => cmd_capacity(a),
        Command::Hours(a) => cmd_hours(a),
        Command::Profile(a) => cmd_profile(exec, a),
    }
}

/// Collapses an error chain to one line.
pub fn one_line(err: &anyhow::Error) -> String {
    format!("{err:#}").split_whitespace().collect::<Vec<_>>().join(" ")
}

struct Input {
    record: FileRecord,
    bytes: Vec<u8>,
}

fn read_input(role: &str, path: &Path) -> Result<Input> {
    let bytes = fs::read(path).with_context(|| path.display().to_string())?;
    Ok(Input { record: FileRecord::new(role, path.display().to_string(), &bytes), bytes })
}

fn in_file<T, E: std::fmt::Display>(path: &Path, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn resolve_calendar(args: &CalendarArgs, inputs: &mut Vec<FileRecord>) -> Result<TariffCalendar> {
    let mut config = match &args.calendar {
        Some(path) => {
            let input = read_input("calendar", path)?;
            let text = in_file(path, String::from_utf8(input.bytes))?;
            inputs.push(input.record);
            in_file(path, CalendarConfig::from_json(&text))?
        }
        None => CalendarConfig::default(),
    };
    if let Some(tz) = &args.tz {
        config.timezone = Some(tz.clone());
    }
    Ok(TariffCalendar::from_config(&config)?)
}

fn calendar_params(cal: &TariffCalendar) -> CalendarParams {
    CalendarParams {
        timezone: cal.timezone_name().to_string(),
        extra_exclusion_dates: cal.extra_exclusions().map(|d| d.to_string()).collect(),
    }
}

fn load_generation(args: &GenerationArgs, inputs: &mut Vec<FileRecord>) -> Result<PowerSeries> {
    let path = &args.generation;
    let input = read_input("generation", path)?;
    let meter_id = args
        .meter_id
        .clone()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "meter".into());
    let series = in_file(path, ingest::parse_interval_csv(&input.bytes[..], &meter_id))?;
    if series.is_empty() {
        bail!("{}: no data", path.display());
    }
    inputs.push(input.record);
    Ok(ingest::to_average_power(&series))
}

fn load_schedule(path: &Path, inputs: &mut Vec<FileRecord>) -> Result<RateSchedule> {
    let input = read_input("schedule", path)?;
    let schedule = in_file(path, rates::load_schedule(&input.bytes[..]))?;
    inputs.push(input.record);
    Ok(schedule)
}

#[derive(Serialize)]
struct EnergySummary<'a> {
    meter_id: &'a str,
    schedule_id: &'a str,
    reference_year: i32,
    #[serde(flatten)]
    annual: &'a AnnualEstimate,
}

fn cmd_energy(exec: Execution, a: EnergyArgs) -> Result<String> {
    let mut inputs = Vec::new();
    let cal = resolve_calendar(&a.calendar, &mut inputs)?;
    let power = load_generation(&a.gen, &mut inputs)?;
    let schedule = load_schedule(&a.schedule, &mut inputs)?;
    let reference_year = match a.reference_year {
        Some(y) => y,
        None => valuation::latest_year(&power, &cal).expect("series is non-empty"),
    };

    let mut rows = Vec::with_capacity(12);
    for (month, est) in valuation::monthly_estimates_with(exec, &power, &cal, reference_year) {
        match est {
            Ok(e) => rows.push((month, Some(valuation::monthly_row(&e, &schedule)))),
            Err(e) if e.is_missing_data() => rows.push((month, None)),
            Err(e) => return Err(e.into()),
        }
    }
    let present: Vec<_> = rows.iter().filter_map(|(_, r)| *r).collect();
    let annual = valuation::annualize(&present, a.error_mode)?;

    let mut out = OutputDir::create(&a.out_dir)?;
    out.write("energy_monthly.csv", report::energy_table(&rows, &annual).as_bytes())?;
    let summary = EnergySummary {
        meter_id: &power.meter_id,
        schedule_id: &schedule.schedule_id,
        reference_year,
        annual: &annual,
    };
    out.write("annual_summary.json", json_bytes(&summary).as_bytes())?;
    let run = AnalysisRun {
        command: "energy",
        inputs,
        calendar: Some(calendar_params(&cal)),
        schedule_id: Some(schedule.schedule_id.clone()),
        reference_year: Some(reference_year),
        error_mode: Some(a.error_mode),
        parameters: BTreeMap::new(),
        outputs: Vec::new(),
    };
    out.finish(run)?;

    let err = annual.energy_err().map(|e| format!(" ± {}", report::sig3(e))).unwrap_or_default();
    let mut msg = format!(
        "{}: {} kWh{err}, ${:.2} over {} months ({})",
        power.meter_id,
        report::sig3(annual.energy_kwh),
        annual.value_usd,
        annual.months_covered,
        a.error_mode
    );
    if annual.extrapolated {
        msg.push_str(", partial year");
    }
    Ok(msg + "\n")
}

fn cmd_demand(exec: Execution, a: DemandArgs) -> Result<String> {
    let mut inputs = Vec::new();
    let cal = resolve_calendar(&a.calendar, &mut inputs)?;
    let power = load_generation(&a.gen, &mut inputs)?;
    let peaks_in = read_input("peaks", &a.peaks)?;
    let peaks: PeakHourRecord = in_file(&a.peaks, demand::parse_peak_csv(&peaks_in.bytes[..]))?;
    if peaks.entries().is_empty() {
        bail!("{}: no peak history", a.peaks.display());
    }
    inputs.push(peaks_in.record);
    let schedule = load_schedule(&a.schedule, &mut inputs)?;

    let analysis = DemandAnalysis::new_with(exec, &power, &cal, a.min_hour_coverage)?;
    let rows = analysis.deltas_with(exec, &peaks, &schedule);
    let mut deltas = Vec::new();
    for (_, r) in &rows {
        match r {
            Ok(d) => deltas.push(*d),
            Err(e) if e.is_missing_data() => {}
            Err(e) => bail!("{e}"),
        }
    }
    let annual = demand::annual_demand_impact(&deltas, a.error_mode)?;

    let mut out = OutputDir::create(&a.out_dir)?;
    out.write("demand_monthly.csv", report::demand_table(&rows, &annual).as_bytes())?;

    let mut parameters = BTreeMap::new();
    parameters.insert("min_hour_coverage".into(), a.min_hour_coverage.into());
    if let Some(load_path) = &a.load {
        let load_in = read_input("load", load_path)?;
        let hours = in_file(load_path, ingest::parse_hourly_csv(&load_in.bytes[..]))?;
        inputs.push(load_in.record);
        let months: BTreeSet<YearMonth> = hours
            .iter()
            .map(|h| {
                let st = cal.stamp(h.hour_start);
                YearMonth { year: st.year(), month: st.month() }
            })
            .collect();
        let mut dets = Vec::new();
        for ym in months {
            let input = DeterminantInput::for_month(&cal, &hours, ym.year, ym.month, schedule.grandfather_kw());
            if input.hourly_hlh_loads.is_empty() {
                continue;
            }
            let det = demand::billing_determinant(&input)?;
            dets.push((ym, det, demand::determinant_status(&det, a.band_kw)));
        }
        out.write("determinants.csv", report::determinant_table(&dets).as_bytes())?;
        parameters.insert("band_kw".into(), a.band_kw.into());
    }

    let run = AnalysisRun {
        command: "demand",
        inputs,
        calendar: Some(calendar_params(&cal)),
        schedule_id: Some(schedule.schedule_id.clone()),
        reference_year: None,
        error_mode: Some(a.error_mode),
        parameters,
        outputs: Vec::new(),
    };
    out.finish(run)?;

    let off_peak = peaks.non_hlh_entries(&cal).count();
    let err = annual.err().map(|e| format!(" ± ${e:.2}")).unwrap_or_default();
    let mut msg = format!("{}: demand charge change ${:.2}{err} over {} months ({})", power.meter_id, annual.total_usd, annual.months, a.error_mode);
    if off_peak > 0 {
        msg.push_str(&format!(", {off_peak} peak hours outside HLH"));
    }
    Ok(msg + "\n")
}

fn cmd_curve(exec: Execution, a: CurveArgs) -> Result<String> {
    if a.tolerance_seconds < 0 {
        bail!("--tolerance-seconds must be non-negative, got {}", a.tolerance_seconds);
    }
    let mut inputs = Vec::new();
    let power = load_generation(&a.gen, &mut inputs)?;
    let met_in = read_input("met", &a.met)?;
    let met = in_file(&a.met, ingest::parse_met_csv(&met_in.bytes[..]))?;
    inputs.push(met_in.record);

    let aligned = ingest::align_with_met_with(exec, &power, &met, TimeDelta::seconds(a.tolerance_seconds));
    if aligned.pairs.is_empty() {
        bail!("no data: no generation samples within {} s of a met sample", a.tolerance_seconds);
    }
    let curve = characterize::power_curve_with(exec, &aligned.pairs, a.bin_width)?;

    let mut out = OutputDir::create(&a.out_dir)?;
    out.write("power_curve.csv", report::curve_table(&curve).as_bytes())?;
    let mut parameters = BTreeMap::new();
    parameters.insert("bin_width_mps".into(), a.bin_width.into());
    parameters.insert("tolerance_seconds".into(), a.tolerance_seconds.into());
    let run = AnalysisRun {
        command: "curve",
        inputs,
        calendar: None,
        schedule_id: None,
        reference_year: None,
        error_mode: None,
        parameters,
        outputs: Vec::new(),
    };
    out.finish(run)?;
    Ok(format!(
        "{}: {} bins from {} pairs ({} generation, {} met unmatched)\n",
        power.meter_id,
        curve.bins.len(),
        aligned.pairs.len(),
        aligned.unmatched_power,
        aligned.unmatched_met
    ))
}

fn cmd_capacity(a: CapacityArgs) -> Result<String> {
    let cf = characterize::capacity_factor(a.annual_kwh, a.nameplate_kw)?;
    Ok(cf.display() + "\n")
}

fn cmd_hours(a: HoursArgs) -> Result<String> {
    let cal = resolve_calendar(&a.calendar, &mut Vec::new())?;
    let h = cal.hours_in_month(a.year, a.month)?;
    Ok(format!("HLH {}, LLH {}\n", h.hlh, h.llh))
}

fn cmd_profile(exec: Execution, a: ProfileArgs) -> Result<String> {
    let mut inputs = Vec::new();
    let cal = resolve_calendar(&a.calendar, &mut inputs)?;
    let power = load_generation(&a.gen, &mut inputs)?;
    let months: Vec<u32> = match a.month {
        Some(m) => vec![m],
        None => (1..=12).collect(),
    };
    let mut profiles = Vec::new();
    for m in months {
        match characterize::diurnal_profile_with(exec, &power, &cal, m) {
            Ok(p) => profiles.push(p),
            Err(e) if e.is_missing_data() && a.month.is_none() => {}
            Err(e) => return Err(e.into()),
        }
    }
    let mut out = OutputDir::create(&a.out_dir)?;
    for p in &profiles {
        out.write(&format!("diurnal_{:02}.csv", p.calendar_month), report::diurnal_table(p).as_bytes())?;
    }
    let run = AnalysisRun {
        command: "profile",
        inputs,
        calendar: Some(calendar_params(&cal)),
        schedule_id: None,
        reference_year: None,
        error_mode: None,
        parameters: BTreeMap::new(),
        outputs: Vec::new(),
    };
    out.finish(run)?;
    Ok(format!("{}: {} monthly profiles\n", power.meter_id, profiles.len()))
}

fn json_bytes<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
