use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

use super::records::EntryRecord;
use crate::error::{Error, Result};

/// Contiguous span of whole hours `[start, start + hours)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourRange {
    pub start: NaiveDateTime,
    pub hours: usize,
}

impl HourRange {
    /// Every hour of the calendar days `first..=last`.
    pub fn days(first: NaiveDate, last: NaiveDate) -> Result<Self> {
        if last < first {
            return Err(Error::Config(format!("date range {first}..{last} is empty")));
        }
        let days = (last - first).num_days() as usize + 1;
        Ok(Self {
            start: first.and_hms_opt(0, 0, 0).unwrap(),
            hours: days * 24,
        })
    }

    /// Every hour of the calendar years `first..=last`.
    pub fn years(first: i32, last: i32) -> Result<Self> {
        let bad = || Error::Config(format!("bad year range {first}:{last}"));
        let a = NaiveDate::from_ymd_opt(first, 1, 1).ok_or_else(bad)?;
        let b = NaiveDate::from_ymd_opt(last, 12, 31).ok_or_else(bad)?;
        Self::days(a, b)
    }

    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::hours(self.hours as i64)
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::hours(t as i64)
    }

    /// Hour index of `ts`, if inside the range.
    pub fn index_of(&self, ts: &NaiveDateTime) -> Option<usize> {
        if *ts < self.start {
            return None;
        }
        let i = (*ts - self.start).num_hours() as usize;
        (i < self.hours).then_some(i)
    }
}

/// Hour-aligned floor of a timestamp.
pub fn floor_hour(ts: &NaiveDateTime) -> NaiveDateTime {
    ts.date().and_hms_opt(ts.hour(), 0, 0).unwrap()
}

/// `T×P` hourly entry counts with an explicit zero for every empty hour.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    pub range: HourRange,
    pub poi_names: Vec<String>,
    /// Row-major `T×P`.
    counts: Vec<u32>,
}

impl HourlyPanel {
    pub fn from_counts(range: HourRange, poi_names: Vec<String>, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != range.hours * poi_names.len() {
            return Err(Error::Invalid(format!(
                "{} counts for {} hours x {} POIs",
                counts.len(),
                range.hours,
                poi_names.len()
            )));
        }
        Ok(Self {
            range,
            poi_names,
            counts,
        })
    }

    pub fn n_hours(&self) -> usize {
        self.range.hours
    }

    pub fn n_pois(&self) -> usize {
        self.poi_names.len()
    }

    pub fn count(&self, t: usize, poi: usize) -> u32 {
        self.counts[t * self.n_pois() + poi]
    }

    pub fn row(&self, t: usize) -> &[u32] {
        let p = self.n_pois();
        &self.counts[t * p..(t + 1) * p]
    }

    pub fn series(&self, poi: usize) -> Vec<f64> {
        (0..self.n_hours()).map(|t| self.count(t, poi) as f64).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.range.timestamp(t)
    }

    pub fn year_of(&self, t: usize) -> i32 {
        self.timestamp(t).year()
    }
}

pub fn default_poi_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("poi_{i:02}")).collect()
}

/// Counts entries per hour and POI.
pub fn aggregate_hourly(entries: &[EntryRecord], range: HourRange, n_pois: usize) -> Result<HourlyPanel> {
    let mut counts = vec![0u32; range.hours * n_pois];
    for e in entries {
        if e.poi_id >= n_pois {
            return Err(Error::Invalid(format!("unknown poi_id {} (expected < {n_pois})", e.poi_id)));
        }
        let t = range.index_of(&e.timestamp).ok_or_else(|| {
            Error::Invalid(format!(
                "entry at {} outside range {}..{}",
                e.timestamp,
                range.start,
                range.end()
            ))
        })?;
        counts[t * n_pois + e.poi_id] += 1;
    }
    HourlyPanel::from_counts(range, default_poi_names(n_pois), counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::records::parse_timestamp;

    fn e(poi: usize, ts: &str) -> EntryRecord {
        EntryRecord {
            poi_id: poi,
            timestamp: parse_timestamp(ts).unwrap(),
        }
    }

    #[test]
    fn counts_and_zero_fill() {
        let range = HourRange::days(NaiveDate::from_ymd_opt(2018, 3, 1).unwrap(), NaiveDate::from_ymd_opt(2018, 3, 1).unwrap()).unwrap();
        let entries = vec![
            e(0, "2018-03-01T10:05:00"),
            e(0, "2018-03-01T10:30:00"),
            e(0, "2018-03-01T10:59:59"),
            e(1, "2018-03-01T23:00:00"),
        ];
        let panel = aggregate_hourly(&entries, range, 2).unwrap();
        assert_eq!(panel.n_hours(), 24);
        assert_eq!(panel.count(10, 0), 3);
        assert_eq!(panel.count(11, 0), 0);
        assert_eq!(panel.count(23, 1), 1);
        assert_eq!(panel.total(), 4);
    }

    #[test]
    fn rejects_out_of_range_and_unknown_poi() {
        let range = HourRange::years(2018, 2018).unwrap();
        assert_eq!(range.hours, 365 * 24);
        assert!(aggregate_hourly(&[e(0, "2019-01-01T00:00:00")], range, 1).is_err());
        assert!(aggregate_hourly(&[e(0, "2017-12-31T23:59:00")], range, 1).is_err());
        assert!(aggregate_hourly(&[e(2, "2018-06-01T00:00:00")], range, 2).is_err());
    }
}
