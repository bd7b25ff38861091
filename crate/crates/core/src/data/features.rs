use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};

use super::panel::{floor_hour, HourlyPanel};
use super::records::{HolidayKind, HolidayRecord, WeatherRecord};
use crate::error::{Error, Result};

/// One-hot weather vocabulary; anything else lands in `wx_OTHER`.
pub const WEATHER_VOCAB: [&str; 8] = ["Snow", "Rain", "Clouds", "Clear", "Mist", "Fog", "Drizzle", "Thunderstorm"];

/// Longest weather gap bridged by carrying the last reading forward.
pub const MAX_WEATHER_GAP_HOURS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Only the per-POI count columns.
    VisitorsOnly,
    /// Calendar, holiday and weather columns ahead of the counts.
    External,
}

impl FeatureMode {
    pub fn id(&self) -> &'static str {
        match self {
            FeatureMode::VisitorsOnly => "visitors",
            FeatureMode::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "visitors" => Some(FeatureMode::VisitorsOnly),
            "external" => Some(FeatureMode::External),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    /// Min-max scale the count inputs and the targets.
    pub normalize_counts: bool,
    /// Rows whose extrema define every column's scaling.
    pub train_rows: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Left as computed (sin/cos columns, raw counts).
    Identity,
    MinMax { min: f64, max: f64 },
}

impl Scaling {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Scaling::Identity => v,
            Scaling::MinMax { min, max } => {
                let span = max - min;
                if span > 0.0 {
                    (v - min) / span
                } else {
                    v - min
                }
            }
        }
    }

    pub fn invert(&self, v: f64) -> f64 {
        match *self {
            Scaling::Identity => v,
            Scaling::MinMax { min, max } => {
                let span = max - min;
                if span > 0.0 {
                    v * span + min
                } else {
                    v + min
                }
            }
        }
    }
}

/// Model-ready feature matrix with the scaling that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: Vec<String>,
    pub scaling: Vec<Scaling>,
    pub config: FeatureConfig,
    /// Row-major `T×F`.
    data: Vec<f64>,
    /// Row-major `T×P` unscaled counts.
    raw_counts: Vec<f64>,
    n_pois: usize,
}

impl FeatureFrame {
    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_pois(&self) -> usize {
        self.n_pois
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let f = self.n_features();
        &self.data[t * f..(t + 1) * f]
    }

    pub fn value(&self, t: usize, col: usize) -> f64 {
        self.data[t * self.n_features() + col]
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column indices of the per-POI counts (always the last `P`).
    pub fn count_columns(&self) -> Range<usize> {
        self.n_features() - self.n_pois..self.n_features()
    }

    pub fn raw_counts(&self, t: usize) -> &[f64] {
        &self.raw_counts[t * self.n_pois..(t + 1) * self.n_pois]
    }

    /// Training target for row `t`: counts on the model's scale.
    pub fn target(&self, t: usize) -> Vec<f64> {
        (0..self.n_pois).map(|p| self.target_scaling(p).apply(self.raw_counts(t)[p])).collect()
    }

    pub fn target_scaling(&self, poi: usize) -> Scaling {
        if self.config.normalize_counts {
            self.scaling[self.count_columns().start + poi]
        } else {
            Scaling::Identity
        }
    }

    /// Maps a model output for `poi` back to visitor counts.
    pub fn denormalize(&self, poi: usize, v: f64) -> f64 {
        self.target_scaling(poi).invert(v)
    }

    /// Row ranges whose calendar year lies in `train_years` and equals
    /// `test_year`. Rows are in time order, so each side is contiguous.
    pub fn split_by_year(&self, train_years: Range<i32>, test_year: i32) -> Result<(Range<usize>, Range<usize>)> {
        split_by_year(&self.timestamps, train_years, test_year)
    }
}

/// See [`FeatureFrame::split_by_year`]; `train_years` is half-open.
pub fn split_by_year(
    timestamps: &[NaiveDateTime],
    train_years: Range<i32>,
    test_year: i32,
) -> Result<(Range<usize>, Range<usize>)> {
    if train_years.contains(&test_year) {
        return Err(Error::Config(format!("test year {test_year} overlaps training years {train_years:?}")));
    }
    let span = |pred: &dyn Fn(i32) -> bool| -> Result<Range<usize>> {
        let first = timestamps.iter().position(|t| pred(t.year()));
        let last = timestamps.iter().rposition(|t| pred(t.year()));
        match (first, last) {
            (Some(a), Some(b)) => {
                if timestamps[a..=b].iter().any(|t| !pred(t.year())) {
                    return Err(Error::Invalid("rows are not in time order".into()));
                }
                Ok(a..b + 1)
            }
            _ => Err(Error::Empty("year split")),
        }
    };
    let train = span(&|y| train_years.contains(&y))?;
    let test = span(&|y| y == test_year)?;
    Ok((train, test))
}

fn school_days(holidays: &[HolidayRecord]) -> (HashSet<NaiveDate>, HashSet<NaiveDate>) {
    let mut national = HashSet::new();
    let mut school = HashSet::new();
    for h in holidays {
        match h.kind {
            HolidayKind::National => national.insert(h.date),
            HolidayKind::School => school.insert(h.date),
        };
    }
    (national, school)
}

/// Days from `date` to the next school day strictly after it: a weekday
/// that is neither a national nor a school holiday.
pub fn days_to_next_school_day(date: NaiveDate, national: &HashSet<NaiveDate>, school: &HashSet<NaiveDate>) -> u32 {
    let mut k = 1;
    loop {
        let d = date + Duration::days(k as i64);
        let weekend = matches!(d.weekday(), Weekday::Sat | Weekday::Sun);
        if !weekend && !national.contains(&d) && !school.contains(&d) {
            return k;
        }
        k += 1;
        if k > 400 {
            return k;
        }
    }
}

/// Weather aligned to each panel hour, carrying readings forward across
/// gaps of up to [`MAX_WEATHER_GAP_HOURS`].
fn align_weather<'w>(panel: &HourlyPanel, weather: &'w [WeatherRecord]) -> Result<Vec<&'w WeatherRecord>> {
    let mut by_hour: HashMap<usize, &WeatherRecord> = HashMap::new();
    for w in weather {
        if let Some(t) = panel.range.index_of(&floor_hour(&w.timestamp)) {
            by_hour.insert(t, w);
        }
    }
    let mut out = Vec::with_capacity(panel.n_hours());
    let mut last: Option<(usize, &WeatherRecord)> = None;
    for t in 0..panel.n_hours() {
        if let Some(w) = by_hour.get(&t) {
            last = Some((t, w));
        }
        match last {
            Some((at, w)) if t - at <= MAX_WEATHER_GAP_HOURS => out.push(w),
            _ => {
                return Err(Error::Invalid(format!(
                    "no weather within {MAX_WEATHER_GAP_HOURS} h before {}",
                    panel.timestamp(t)
                )))
            }
        }
    }
    Ok(out)
}

/// Builds the feature matrix for `panel`. Scaling comes from
/// `cfg.train_rows` only; other rows are scaled with the same constants and
/// may fall outside `[0, 1]`.
pub fn build_features(
    panel: &HourlyPanel,
    holidays: &[HolidayRecord],
    weather: &[WeatherRecord],
    cfg: &FeatureConfig,
) -> Result<FeatureFrame> {
    let n = panel.n_hours();
    let p = panel.n_pois();
    if cfg.train_rows.is_empty() || cfg.train_rows.end > n {
        return Err(Error::Config(format!("training rows {:?} not inside 0..{n}", cfg.train_rows)));
    }
    let mut columns: Vec<String> = Vec::new();
    let mut angle: Vec<bool> = Vec::new();
    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut push = |name: &str, is_angle: bool, values: Vec<f64>| {
        columns.push(name.to_string());
        angle.push(is_angle);
        raw.push(values);
    };
    let stamps: Vec<NaiveDateTime> = (0..n).map(|t| panel.timestamp(t)).collect();

    if cfg.mode == FeatureMode::External {
        let (national, school) = school_days(holidays);
        let month_angle = |t: &NaiveDateTime| 2.0 * PI * (t.month0() as f64) / 12.0;
        push("year", false, stamps.iter().map(|t| t.year() as f64).collect());
        push("month_sin", true, stamps.iter().map(|t| month_angle(t).sin()).collect());
        push("month_cos", true, stamps.iter().map(|t| month_angle(t).cos()).collect());
        push("day_of_month", false, stamps.iter().map(|t| t.day() as f64).collect());
        push(
            "day_of_week",
            false,
            stamps.iter().map(|t| t.weekday().num_days_from_monday() as f64).collect(),
        );
        push("hour", false, stamps.iter().map(|t| t.hour() as f64).collect());
        let flag = |set: &HashSet<NaiveDate>| stamps.iter().map(|t| f64::from(u8::from(set.contains(&t.date())))).collect();
        push("holiday_national", false, flag(&national));
        push("holiday_school", false, flag(&school));
        let mut cache: HashMap<NaiveDate, u32> = HashMap::new();
        push(
            "days_to_next_school_day",
            false,
            stamps
                .iter()
                .map(|t| *cache.entry(t.date()).or_insert_with(|| days_to_next_school_day(t.date(), &national, &school)) as f64)
                .collect(),
        );

        let wx = align_weather(panel, weather)?;
        push("temp_c", false, wx.iter().map(|w| w.temp_c).collect());
        push("feels_like_c", false, wx.iter().map(|w| w.feels_like_c).collect());
        push("wind_mps", false, wx.iter().map(|w| w.wind_mps).collect());
        push("precip_mm", false, wx.iter().map(|w| w.precip_mm).collect());
        push("clouds_pct", false, wx.iter().map(|w| w.clouds_pct).collect());
        let mut unknown: HashSet<&str> = HashSet::new();
        let slot: Vec<usize> = wx
            .iter()
            .map(|w| {
                WEATHER_VOCAB.iter().position(|v| *v == w.description).unwrap_or_else(|| {
                    unknown.insert(&w.description);
                    WEATHER_VOCAB.len()
                })
            })
            .collect();
        if !unknown.is_empty() {
            let mut u: Vec<_> = unknown.into_iter().collect();
            u.sort();
            log::warn!("weather descriptions outside the vocabulary mapped to OTHER: {}", u.join(", "));
        }
        for (k, word) in WEATHER_VOCAB.iter().chain(std::iter::once(&"OTHER")).enumerate() {
            push(&format!("wx_{word}"), false, slot.iter().map(|&s| f64::from(u8::from(s == k))).collect());
        }
    }
    for (i, name) in panel.poi_names.iter().enumerate() {
        push(&format!("count_{name}"), false, (0..n).map(|t| panel.count(t, i) as f64).collect());
    }

    let f = columns.len();
    let count_start = f - p;
    let train = cfg.train_rows.clone();
    let mut scaling = Vec::with_capacity(f);
    for (c, values) in raw.iter().enumerate() {
        let is_count = c >= count_start;
        let s = if angle[c] || (is_count && !cfg.normalize_counts) {
            Scaling::Identity
        } else {
            let slice = &values[train.clone()];
            let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
            let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Scaling::MinMax { min, max }
        };
        scaling.push(s);
    }
    if let Some(yc) = columns.iter().position(|c| c == "year") {
        if let Scaling::MinMax { min, max } = scaling[yc] {
            if raw[yc].iter().any(|&y| y < min || y > max) {
                log::warn!("year column leaves its training range [{min}, {max}] outside the training rows");
            }
        }
    }
    let mut data = vec![0.0; n * f];
    for (c, values) in raw.iter().enumerate() {
        for t in 0..n {
            data[t * f + c] = scaling[c].apply(values[t]);
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite feature value".into()));
    }
    let mut raw_counts = vec![0.0; n * p];
    for t in 0..n {
        for (i, v) in panel.row(t).iter().enumerate() {
            raw_counts[t * p + i] = *v as f64;
        }
    }
    Ok(FeatureFrame {
        timestamps: stamps,
        columns,
        scaling,
        config: cfg.clone(),
        data,
        raw_counts,
        n_pois: p,
    })
}
