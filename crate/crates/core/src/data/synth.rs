//! Synthetic visitor-flow generator with calendar, holiday and weather effects.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::panel::{default_poi_names, HourRange, HourlyPanel};
use super::records::{format_timestamp, EntryRecord, HolidayKind, HolidayRecord, WeatherRecord};
use crate::error::{Error, Result};

/// Extra arrivals at one POI for a few consecutive hours.
#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub poi: usize,
    pub start: NaiveDateTime,
    pub hours: usize,
    pub extra_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub first_year: i32,
    pub last_year: i32,
    pub n_pois: usize,
    /// Mean arrivals per open hour at profile level 1, one per POI.
    pub base_rate: Vec<f64>,
    pub daily: [f64; 24],
    pub weekly: [f64; 7],
    pub seasonal: [f64; 12],
    /// `[open, close)` hours per POI.
    pub opening: Vec<(u32, u32)>,
    pub spikes: Vec<Spike>,
    pub national_factor: f64,
    pub school_factor: f64,
    /// Strength of the weather response; 0 disables it.
    pub weather_effect: f64,
    pub seed: u64,
}

const DAILY: [f64; 24] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.3, 0.6, 0.9, 1.2, 1.4, 1.3, 1.2, 1.4, 1.5, 1.3, 1.0, 0.7, 0.5, 0.4, 0.3,
    0.1, 0.0,
];
const WEEKLY: [f64; 7] = [0.8, 0.85, 0.9, 0.95, 1.1, 1.4, 1.3];
const SEASONAL: [f64; 12] = [0.6, 0.6, 0.7, 0.85, 1.0, 1.2, 1.5, 1.6, 1.1, 0.9, 0.7, 1.1];

impl SynthConfig {
    /// Defaults with per-POI rates, opening hours and events drawn from `seed`.
    pub fn new(first_year: i32, last_year: i32, n_pois: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0f1);
        let base_rate = (0..n_pois).map(|_| rng.random_range(3.0..15.0)).collect();
        let opening = (0..n_pois)
            .map(|_| {
                let open = rng.random_range(8..=10);
                (open, open + rng.random_range(7..=10))
            })
            .collect();
        let mut spikes = Vec::new();
        if n_pois > 0 {
            for year in first_year..=last_year {
                for _ in 0..6 {
                    let day = rng.random_range(0..365);
                    let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap().and_hms_opt(11, 0, 0).unwrap()
                        + Duration::days(day);
                    spikes.push(Spike {
                        poi: rng.random_range(0..n_pois),
                        start,
                        hours: rng.random_range(2..=4),
                        extra_rate: rng.random_range(10.0..30.0),
                    });
                }
            }
        }
        Self {
            first_year,
            last_year,
            n_pois,
            base_rate,
            daily: DAILY,
            weekly: WEEKLY,
            seasonal: SEASONAL,
            opening,
            spikes,
            national_factor: 1.3,
            school_factor: 1.2,
            weather_effect: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.first_year > self.last_year {
            return bad(format!("year range {}:{} is empty", self.first_year, self.last_year));
        }
        if self.n_pois == 0 {
            return bad("need at least one POI".into());
        }
        if self.base_rate.len() != self.n_pois || self.opening.len() != self.n_pois {
            return bad("base_rate and opening need one entry per POI".into());
        }
        let factors = self.daily.iter().chain(&self.weekly).chain(&self.seasonal).chain(&self.base_rate);
        let extra = [self.national_factor, self.school_factor, self.weather_effect];
        if factors.chain(&extra).any(|v| !v.is_finite() || *v < 0.0) {
            return bad("profile factors and rates must be finite and non-negative".into());
        }
        if let Some((o, c)) = self.opening.iter().find(|(o, c)| o >= c || *c > 24) {
            return bad(format!("opening hours {o}..{c} invalid"));
        }
        if let Some(s) = self.spikes.iter().find(|s| s.poi >= self.n_pois || !(s.extra_rate >= 0.0)) {
            return bad(format!("spike {s:?} invalid"));
        }
        Ok(())
    }

    pub fn range(&self) -> Result<HourRange> {
        HourRange::years(self.first_year, self.last_year)
    }

    /// Writes the configuration as `key=value` lines.
    pub fn write_manifest<W: Write>(&self, mut w: W) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        writeln!(w, "seed={}", self.seed)?;
        writeln!(w, "years={}:{}", self.first_year, self.last_year)?;
        writeln!(w, "pois={}", self.n_pois)?;
        writeln!(w, "base_rate={}", join(&self.base_rate))?;
        writeln!(w, "daily={}", join(&self.daily))?;
        writeln!(w, "weekly={}", join(&self.weekly))?;
        writeln!(w, "seasonal={}", join(&self.seasonal))?;
        let opening: Vec<String> = self.opening.iter().map(|(o, c)| format!("{o}-{c}")).collect();
        writeln!(w, "opening={}", opening.join(","))?;
        let spikes: Vec<String> = self
            .spikes
            .iter()
            .map(|s| format!("{}@{}+{}h:{}", s.poi, format_timestamp(&s.start), s.hours, s.extra_rate))
            .collect();
        writeln!(w, "spikes={}", spikes.join(","))?;
        writeln!(w, "national_factor={}", self.national_factor)?;
        writeln!(w, "school_factor={}", self.school_factor)?;
        writeln!(w, "weather_effect={}", self.weather_effect)?;
        Ok(())
    }
}

/// Gregorian Easter Sunday (anonymous computus).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("valid Easter date")
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("nth weekday exists")
}

/// Austrian-style public holidays plus Salzburg-like school breaks.
pub fn holiday_calendar(first_year: i32, last_year: i32) -> Vec<HolidayRecord> {
    let mut out = Vec::new();
    let ymd = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).unwrap();
    for y in first_year..=last_year {
        let easter = easter_sunday(y);
        let mut national = vec![
            ymd(y, 1, 1),
            ymd(y, 1, 6),
            ymd(y, 5, 1),
            ymd(y, 8, 15),
            ymd(y, 10, 26),
            ymd(y, 11, 1),
            ymd(y, 12, 8),
            ymd(y, 12, 25),
            ymd(y, 12, 26),
        ];
        national.extend([1, 39, 50, 60].map(|k| easter + Duration::days(k)));
        let mut school: Vec<NaiveDate> = Vec::new();
        let mut span = |from: NaiveDate, to: NaiveDate| {
            let mut d = from;
            while d <= to {
                school.push(d);
                d += Duration::days(1);
            }
        };
        span(ymd(y, 1, 1), ymd(y, 1, 6));
        let semester = nth_weekday(y, 2, Weekday::Mon, 2);
        span(semester, semester + Duration::days(6));
        span(easter - Duration::days(8), easter + Duration::days(1));
        let summer_end = nth_weekday(y, 9, Weekday::Mon, 2) - Duration::days(1);
        span(nth_weekday(y, 7, Weekday::Sat, 2), summer_end);
        span(ymd(y, 10, 27), ymd(y, 10, 31));
        span(ymd(y, 12, 24), ymd(y, 12, 31));
        national.sort();
        national.dedup();
        school.sort();
        school.dedup();
        out.extend(national.into_iter().map(|date| HolidayRecord { date, kind: HolidayKind::National }));
        out.extend(school.into_iter().map(|date| HolidayRecord { date, kind: HolidayKind::School }));
    }
    out.sort();
    out
}

/// Hourly weather: a seasonal temperature cycle with a mean-reverting
/// anomaly, plus cloud, wind and precipitation walks.
pub fn weather_series(range: &HourRange, seed: u64) -> Vec<WeatherRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0077_ea74);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut temp_anom, mut cloud, mut wind) = (0.0f64, 50.0f64, 3.0f64);
    let round1 = |v: f64| (v * 10.0).round() / 10.0;
    (0..range.hours)
        .map(|t| {
            let ts = range.timestamp(t);
            let doy = ts.ordinal0() as f64;
            let hour = ts.hour() as f64;
            temp_anom = 0.98 * temp_anom + 0.6 * unit.sample(&mut rng);
            cloud = (0.97 * cloud + 0.03 * 55.0 + 6.0 * unit.sample(&mut rng)).clamp(0.0, 100.0);
            wind = (0.95 * wind + 0.05 * 3.0 + 0.4 * unit.sample(&mut rng)).max(0.0);
            let seasonal = 9.0 - 11.0 * (2.0 * PI * (doy + 10.0) / 365.0).cos();
            let diurnal = 4.0 * (2.0 * PI * (hour - 9.0) / 24.0).sin();
            let temp = seasonal + diurnal + temp_anom;
            let precip = if cloud > 70.0 && rng.random::<f64>() < (cloud - 70.0) / 60.0 {
                rng.random_range(0.1..4.0)
            } else {
                0.0
            };
            let summer = (5..=8).contains(&ts.month());
            let description = if precip > 0.0 && temp < 0.5 {
                "Snow"
            } else if precip > 3.0 && summer && temp > 18.0 {
                "Thunderstorm"
            } else if precip > 1.0 {
                "Rain"
            } else if precip > 0.0 {
                "Drizzle"
            } else if hour < 9.0 && wind < 1.0 && cloud > 60.0 {
                "Fog"
            } else if hour < 10.0 && cloud > 60.0 && temp < 8.0 {
                "Mist"
            } else if cloud > 50.0 {
                "Clouds"
            } else {
                "Clear"
            };
            WeatherRecord {
                timestamp: ts,
                temp_c: round1(temp),
                feels_like_c: round1(temp - 0.7 * wind),
                wind_mps: round1(wind),
                precip_mm: round1(precip),
                clouds_pct: cloud.round(),
                description: description.to_string(),
            }
        })
        .collect()
}

fn weather_factor(w: &WeatherRecord, strength: f64) -> f64 {
    let base = match w.description.as_str() {
        "Thunderstorm" => 0.5,
        "Rain" => 0.7,
        "Snow" => 0.8,
        "Drizzle" => 0.85,
        "Fog" | "Mist" => 0.9,
        "Clear" => 1.1,
        _ => 1.0,
    };
    let comfort = 1.0 - 0.01 * (w.feels_like_c - 20.0).abs();
    (1.0 + strength * (base * comfort.max(0.5) - 1.0)).max(0.0)
}

/// Calendar inputs a rate depends on, precomputed once per dataset.
pub struct RateContext<'a> {
    cfg: &'a SynthConfig,
    national: HashSet<NaiveDate>,
    school: HashSet<NaiveDate>,
}

impl<'a> RateContext<'a> {
    pub fn new(cfg: &'a SynthConfig, holidays: &[HolidayRecord]) -> Self {
        let pick = |k| holidays.iter().filter(|h| h.kind == k).map(|h| h.date).collect();
        Self { cfg, national: pick(HolidayKind::National), school: pick(HolidayKind::School) }
    }

    /// Expected arrivals at `poi` during the hour starting at `ts`.
    pub fn rate(&self, poi: usize, ts: &NaiveDateTime, weather: &WeatherRecord) -> f64 {
        let cfg = self.cfg;
        let (open, close) = cfg.opening[poi];
        let hour = ts.hour();
        if hour < open || hour >= close {
            return 0.0;
        }
        let date = ts.date();
        let mut lambda = cfg.base_rate[poi]
            * cfg.daily[hour as usize]
            * cfg.weekly[date.weekday().num_days_from_monday() as usize]
            * cfg.seasonal[date.month0() as usize];
        if self.national.contains(&date) {
            lambda *= cfg.national_factor;
        }
        if self.school.contains(&date) {
            lambda *= cfg.school_factor;
        }
        lambda *= weather_factor(weather, cfg.weather_effect);
        for s in cfg.spikes.iter().filter(|s| s.poi == poi) {
            if *ts >= s.start && *ts < s.start + Duration::hours(s.hours as i64) {
                lambda += s.extra_rate;
            }
        }
        lambda
    }
}

/// Poisson draw that tolerates a zero rate.
pub fn draw_count<R: Rng>(rng: &mut R, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let d: Poisson<f64> = Poisson::new(lambda).expect("positive finite rate");
    d.sample(rng) as u32
}

/// Hourly counts plus the holiday and weather records that drove them.
pub fn synth_panel(cfg: &SynthConfig) -> Result<(HourlyPanel, Vec<HolidayRecord>, Vec<WeatherRecord>)> {
    cfg.validate()?;
    let range = cfg.range()?;
    let holidays = holiday_calendar(cfg.first_year, cfg.last_year);
    let weather = weather_series(&range, cfg.seed);
    let ctx = RateContext::new(cfg, &holidays);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = Vec::with_capacity(range.hours * cfg.n_pois);
    for (t, w) in weather.iter().enumerate() {
        let ts = range.timestamp(t);
        for p in 0..cfg.n_pois {
            counts.push(draw_count(&mut rng, ctx.rate(p, &ts, w)));
        }
    }
    let panel = HourlyPanel::from_counts(range, default_poi_names(cfg.n_pois), counts)?;
    Ok((panel, holidays, weather))
}

/// Spreads each hourly count over random seconds within its hour, in time
/// order.
pub fn expand_entries(panel: &HourlyPanel, seed: u64) -> Vec<EntryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00e7_7e1e);
    let mut out = Vec::with_capacity(panel.total() as usize);
    let mut hour = Vec::new();
    for t in 0..panel.n_hours() {
        let ts = panel.timestamp(t);
        hour.clear();
        for (p, &k) in panel.row(t).iter().enumerate() {
            for _ in 0..k {
                let offset = Duration::seconds(rng.random_range(0..3600));
                hour.push(EntryRecord { poi_id: p, timestamp: ts + offset });
            }
        }
        hour.sort_by_key(|e| (e.timestamp, e.poi_id));
        out.extend_from_slice(&hour);
    }
    out
}

/// Entry, holiday and weather records for `cfg`; identical for equal configs.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<EntryRecord>, Vec<HolidayRecord>, Vec<WeatherRecord>)> {
    let (panel, holidays, weather) = synth_panel(cfg)?;
    Ok((expand_entries(&panel, cfg.seed), holidays, weather))
}
