//! Record ingestion, hourly aggregation, feature construction, windowing and
//! synthetic data.

pub mod features;
pub mod panel;
pub mod records;
pub mod synth;
pub mod window;

pub use features::{build_features, split_by_year, FeatureConfig, FeatureFrame, FeatureMode, Scaling, WEATHER_VOCAB};
pub use panel::{aggregate_hourly, default_poi_names, floor_hour, HourRange, HourlyPanel};
pub use records::{
    load_entries, load_holidays, load_weather, parse_timestamp, EntryRecord, HolidayKind, HolidayRecord,
    WeatherRecord,
};
pub use synth::{synth_generate, synth_panel, SynthConfig};
pub use window::{WindowedDataset, WINDOW_LEN};
