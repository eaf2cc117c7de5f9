//! Deterministic synthetic meter data for fixtures, demos and benchmarks.
//!
//! Output depends only on the arguments (ChaCha8 seeded from `seed`).
//! Energies are quantized to whole watt-hours like the real meters.

use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calendar::TariffCalendar;
use crate::ingest::{IntervalSample, IntervalSeries, MetSample, INTERVAL_SECONDS};

#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub start: DateTime<Utc>,
    pub days: i64,
    pub nameplate_kw: f64,
    /// Probability that any single interval is missing.
    pub dropout: f64,
    pub seed: u64,
}

fn slots(opts: &SynthOptions) -> impl Iterator<Item = DateTime<Utc>> + '_ {
    let n = opts.days * 86_400 / INTERVAL_SECONDS;
    (0..n).map(move |i| opts.start + Duration::seconds(i * INTERVAL_SECONDS))
}

fn to_wh(kw: f64) -> f64 {
    (kw.max(0.0) * 1000.0 / 12.0).round()
}

/// Photovoltaic-like output: a half-sine between local 06:00 and 18:00,
/// seasonally scaled and shaded by a random daily cloudiness.
pub fn pv_series(meter_id: &str, calendar: &TariffCalendar, opts: SynthOptions) -> IntervalSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut day_key = None;
    let mut clouds = 1.0;
    let mut samples = Vec::new();
    for t in slots(&opts) {
        let local = calendar.to_local(t);
        if day_key != Some(local.date()) {
            day_key = Some(local.date());
            clouds = 0.35 + 0.65 * rng.random::<f64>();
        }
        let dropped = rng.random::<f64>() < opts.dropout;
        let hour = local.hour() as f64 + local.minute() as f64 / 60.0;
        let season = 0.6 + 0.4 * (2.0 * PI * (local.ordinal() as f64 - 80.0) / 365.0).sin();
        let sun = if (6.0..18.0).contains(&hour) { (PI * (hour - 6.0) / 12.0).sin() } else { 0.0 };
        let kw = opts.nameplate_kw * 0.8 * sun * season * clouds;
        if !dropped {
            samples.push(IntervalSample { timestamp: t, energy_wh: to_wh(kw) });
        }
    }
    IntervalSeries::from_samples(meter_id, samples).expect("synthetic samples are valid")
}

/// Small-turbine-like output with a matching met record. Wind speed follows
/// a mean-reverting walk quantized to 1 m/s; power follows a cubic curve
/// between 3 m/s cut-in and 12 m/s rated speed, with multiplicative noise.
pub fn wind_series(meter_id: &str, opts: SynthOptions) -> (IntervalSeries, Vec<MetSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut speed: f64 = 5.0;
    let mut samples = Vec::new();
    let mut met = Vec::new();
    for t in slots(&opts) {
        speed += 0.15 * (5.5 - speed) + rng.random_range(-1.2..1.2);
        speed = speed.clamp(0.0, 25.0);
        let reported = speed.round();
        let frac = ((speed - 3.0) / 9.0).clamp(0.0, 1.0);
        let noise = 1.0 + rng.random_range(-0.15..0.15);
        let kw = opts.nameplate_kw * frac.powi(3) * noise;
        met.push(MetSample { timestamp: t, wind_speed_mps: reported });
        if rng.random::<f64>() >= opts.dropout {
            samples.push(IntervalSample { timestamp: t, energy_wh: to_wh(kw) });
        }
    }
    let series = IntervalSeries::from_samples(meter_id, samples).expect("synthetic samples are valid");
    (series, met)
}
