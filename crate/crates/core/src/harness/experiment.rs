use std::ops::Range;

use crate::data::{
    build_features, split_by_year, FeatureConfig, FeatureFrame, FeatureMode, HolidayRecord, HourlyPanel,
    WeatherRecord, WindowedDataset,
};
use crate::error::Result;

/// Raw inputs plus the year split shared by every run of a benchmark.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub panel: HourlyPanel,
    pub holidays: Vec<HolidayRecord>,
    pub weather: Vec<WeatherRecord>,
    pub train_rows: Range<usize>,
    pub test_rows: Range<usize>,
    pub window: usize,
}

impl Experiment {
    pub fn new(
        panel: HourlyPanel,
        holidays: Vec<HolidayRecord>,
        weather: Vec<WeatherRecord>,
        train_years: Range<i32>,
        test_year: i32,
        window: usize,
    ) -> Result<Self> {
        let stamps: Vec<_> = (0..panel.n_hours()).map(|t| panel.timestamp(t)).collect();
        let (train_rows, test_rows) = split_by_year(&stamps, train_years, test_year)?;
        Ok(Self { panel, holidays, weather, train_rows, test_rows, window })
    }

    pub fn prepare(&self, mode: FeatureMode, normalize: bool) -> Result<Prepared> {
        let cfg = FeatureConfig { mode, normalize_counts: normalize, train_rows: self.train_rows.clone() };
        let frame = build_features(&self.panel, &self.holidays, &self.weather, &cfg)?;
        let prepared =
            Prepared { frame, train_rows: self.train_rows.clone(), test_rows: self.test_rows.clone(), window: self.window };
        prepared.train_set()?;
        prepared.test_set()?;
        Ok(prepared)
    }

    /// Frame rows whose counts are forecast in the test year.
    pub fn target_rows(&self) -> Range<usize> {
        self.test_rows.start + self.window..self.test_rows.end
    }
}

/// A feature frame with its train and test windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub frame: FeatureFrame,
    pub train_rows: Range<usize>,
    pub test_rows: Range<usize>,
    pub window: usize,
}

impl Prepared {
    pub fn train_set(&self) -> Result<WindowedDataset<'_>> {
        WindowedDataset::new(&self.frame, self.train_rows.clone(), self.window)
    }

    pub fn test_set(&self) -> Result<WindowedDataset<'_>> {
        WindowedDataset::new(&self.frame, self.test_rows.clone(), self.window)
    }
}
