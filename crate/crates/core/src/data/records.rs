//! Raw record types and their CSV formats.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub const ENTRY_HEADER: [&str; 2] = ["poi_id", "timestamp"];
pub const WEATHER_HEADER: [&str; 7] = [
    "timestamp",
    "temp_c",
    "feels_like_c",
    "wind_mps",
    "precip_mm",
    "clouds_pct",
    "description",
];
pub const HOLIDAY_HEADER: [&str; 2] = ["date", "kind"];

/// One admission at a point of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntryRecord {
    pub poi_id: usize,
    pub timestamp: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    pub temp_c: f64,
    pub feels_like_c: f64,
    pub wind_mps: f64,
    pub precip_mm: f64,
    pub clouds_pct: f64,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HolidayKind {
    National,
    School,
}

impl HolidayKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HolidayKind::National => "national",
            HolidayKind::School => "school",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HolidayRecord {
    pub date: NaiveDate,
    pub kind: HolidayKind,
}

/// Accepts `T` or a space between date and time; seconds optional.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

struct Rows<R: Read> {
    path: String,
    reader: csv::Reader<R>,
}

impl<R: Read> Rows<R> {
    fn open(reader: R, path: &str, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let got: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if got != header {
            return Err(Error::Schema {
                path: path.to_string(),
                line: 1,
                msg: format!("expected header `{}`, found `{}`", header.join(","), got.join(",")),
            });
        }
        Ok(Self {
            path: path.to_string(),
            reader,
        })
    }

    /// Visits each data row with its 1-based line number.
    fn for_each(mut self, mut f: impl FnMut(&csv::StringRecord, u64) -> Result<(), String>) -> Result<()> {
        let mut rec = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut rec).map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Schema {
                    path: self.path.clone(),
                    line,
                    msg: e.to_string(),
                }
            })?;
            if !more {
                return Ok(());
            }
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            f(&rec, line).map_err(|msg| Error::Schema {
                path: self.path.clone(),
                line,
                msg,
            })?;
        }
    }
}

fn field<'r>(rec: &'r csv::StringRecord, i: usize, name: &str) -> Result<&'r str, String> {
    rec.get(i).map(str::trim).ok_or_else(|| format!("missing field `{name}`"))
}

fn number(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, String> {
    let s = field(rec, i, name)?;
    let v: f64 = s.parse().map_err(|_| format!("`{name}` is not a number: {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("`{name}` is not finite"));
    }
    Ok(v)
}

fn timestamp(rec: &csv::StringRecord, i: usize) -> Result<NaiveDateTime, String> {
    let s = field(rec, i, "timestamp")?;
    parse_timestamp(s).ok_or_else(|| format!("bad timestamp {s:?}"))
}

pub fn read_entries<R: Read>(reader: R, path: &str) -> Result<Vec<EntryRecord>> {
    let mut out = Vec::new();
    Rows::open(reader, path, &ENTRY_HEADER)?.for_each(|rec, _| {
        let s = field(rec, 0, "poi_id")?;
        let poi_id = s.parse().map_err(|_| format!("bad poi_id {s:?}"))?;
        out.push(EntryRecord {
            poi_id,
            timestamp: timestamp(rec, 1)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_weather<R: Read>(reader: R, path: &str) -> Result<Vec<WeatherRecord>> {
    let mut out = Vec::new();
    Rows::open(reader, path, &WEATHER_HEADER)?.for_each(|rec, _| {
        out.push(WeatherRecord {
            timestamp: timestamp(rec, 0)?,
            temp_c: number(rec, 1, "temp_c")?,
            feels_like_c: number(rec, 2, "feels_like_c")?,
            wind_mps: number(rec, 3, "wind_mps")?,
            precip_mm: number(rec, 4, "precip_mm")?,
            clouds_pct: number(rec, 5, "clouds_pct")?,
            description: field(rec, 6, "description")?.to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_holidays<R: Read>(reader: R, path: &str) -> Result<Vec<HolidayRecord>> {
    let mut out = Vec::new();
    Rows::open(reader, path, &HOLIDAY_HEADER)?.for_each(|rec, _| {
        let d = field(rec, 0, "date")?;
        let date = NaiveDate::parse_from_str(d, DATE_FORMAT).map_err(|_| format!("bad date {d:?}"))?;
        let kind = match field(rec, 1, "kind")? {
            "national" => HolidayKind::National,
            "school" => HolidayKind::School,
            other => return Err(format!("unknown holiday kind {other:?}")),
        };
        out.push(HolidayRecord { date, kind });
        Ok(())
    })?;
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn load_entries(path: &Path) -> Result<Vec<EntryRecord>> {
    read_entries(open(path)?, &path.display().to_string())
}

pub fn load_weather(path: &Path) -> Result<Vec<WeatherRecord>> {
    read_weather(open(path)?, &path.display().to_string())
}

pub fn load_holidays(path: &Path) -> Result<Vec<HolidayRecord>> {
    read_holidays(open(path)?, &path.display().to_string())
}

pub fn write_entries<W: Write>(w: W, entries: &[EntryRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ENTRY_HEADER)?;
    for e in entries {
        out.write_record([e.poi_id.to_string(), format_timestamp(&e.timestamp)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_weather<W: Write>(w: W, weather: &[WeatherRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(WEATHER_HEADER)?;
    for r in weather {
        out.write_record([
            format_timestamp(&r.timestamp),
            format!("{:.1}", r.temp_c),
            format!("{:.1}", r.feels_like_c),
            format!("{:.1}", r.wind_mps),
            format!("{:.1}", r.precip_mm),
            format!("{:.0}", r.clouds_pct),
            r.description.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_holidays<W: Write>(w: W, holidays: &[HolidayRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HOLIDAY_HEADER)?;
    for h in holidays {
        out.write_record([h.date.format(DATE_FORMAT).to_string(), h.kind.as_str().to_string()])?;
    }
    out.flush()?;
    Ok(())
}
