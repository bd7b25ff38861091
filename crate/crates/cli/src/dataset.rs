//! Dataset directory layout: three record CSVs plus a manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::Datelike;
use flowcast::data::records::{write_entries, write_holidays, write_weather};
use flowcast::data::*;
use flowcast::harness::{parse_key_values, Experiment};

use crate::Usage;

pub const ENTRIES: &str = "entries.csv";
pub const WEATHER: &str = "weather.csv";
pub const HOLIDAYS: &str = "holidays.csv";
pub const MANIFEST: &str = "manifest.txt";

pub fn files(dir: &Path) -> [PathBuf; 4] {
    [ENTRIES, WEATHER, HOLIDAYS, MANIFEST].map(|f| dir.join(f))
}

pub fn write_dataset(dir: &Path, cfg: &SynthConfig) -> Result<Vec<PathBuf>> {
    let (entries, holidays, weather) = synth_generate(cfg)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let [e, w, h, m] = files(dir);
    write_entries(BufWriter::new(File::create(&e)?), &entries)?;
    write_weather(BufWriter::new(File::create(&w)?), &weather)?;
    write_holidays(BufWriter::new(File::create(&h)?), &holidays)?;
    cfg.write_manifest(BufWriter::new(File::create(&m)?))?;
    Ok(vec![e, w, h, m])
}

pub struct Dataset {
    pub panel: HourlyPanel,
    pub holidays: Vec<HolidayRecord>,
    pub weather: Vec<WeatherRecord>,
}

fn parse_years(s: &str) -> Option<(i32, i32)> {
    let (a, b) = s.split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Loads a dataset directory. The manifest, when present, fixes the year
/// span and POI count; otherwise both are inferred from the entries.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let [e, w, h, m] = files(dir);
    for f in [&e, &w, &h] {
        if !f.exists() {
            return Err(Usage(format!("missing input file {}", f.display())).into());
        }
    }
    let entries = load_entries(&e)?;
    let weather = load_weather(&w)?;
    let holidays = load_holidays(&h)?;
    let mut years = None;
    let mut pois = None;
    if m.exists() {
        for (k, v) in parse_key_values(&std::fs::read_to_string(&m)?)? {
            match k.as_str() {
                "years" => years = parse_years(&v),
                "pois" => pois = v.parse::<usize>().ok(),
                _ => {}
            }
        }
    }
    let years = match years {
        Some(y) => y,
        None => {
            let first = entries.iter().map(|r| r.timestamp.year()).min();
            let last = entries.iter().map(|r| r.timestamp.year()).max();
            first.zip(last).ok_or_else(|| Usage(format!("{} has no entries", e.display())))?
        }
    };
    let pois = pois.unwrap_or_else(|| entries.iter().map(|r| r.poi_id + 1).max().unwrap_or(0));
    let panel = aggregate_hourly(&entries, HourRange::years(years.0, years.1)?, pois)?;
    Ok(Dataset { panel, holidays, weather })
}

impl Dataset {
    /// Trains on every year before `test_year` (default: the last year).
    pub fn experiment(self, test_year: Option<i32>, window: usize) -> Result<Experiment> {
        let first = self.panel.timestamp(0).year();
        let last = self.panel.timestamp(self.panel.n_hours() - 1).year();
        let test = test_year.unwrap_or(last);
        if test <= first || test > last {
            return Err(Usage(format!("test year {test} must lie in {}..={last}", first + 1)).into());
        }
        Ok(Experiment::new(self.panel, self.holidays, self.weather, first..test, test, window)?)
    }
}
