//! Predictions exchange format and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::Result;
use chrono::NaiveDateTime;
use flowcast::data::records::{format_timestamp, parse_timestamp};
use flowcast::data::HourlyPanel;
use flowcast::harness::Predictions;
use serde::{Deserialize, Serialize};

use crate::Usage;

pub const PREDICTION_HEADER: [&str; 5] = ["model", "poi", "timestamp", "y_true", "y_pred"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub model: String,
    pub poi: String,
    pub timestamp: String,
    pub y_true: f64,
    pub y_pred: f64,
}

pub fn prediction_rows(model: &str, panel: &HourlyPanel, preds: &Predictions) -> Vec<PredictionRow> {
    let mut out = Vec::with_capacity(preds.y_pred.len());
    for (k, &row) in preds.rows.iter().enumerate() {
        let ts = format_timestamp(&panel.timestamp(row));
        for p in 0..preds.n_pois {
            let i = k * preds.n_pois + p;
            out.push(PredictionRow {
                model: model.to_string(),
                poi: panel.poi_names[p].clone(),
                timestamp: ts.clone(),
                y_true: preds.y_true[i],
                y_pred: preds.y_pred[i],
            });
        }
    }
    out
}

pub fn write_predictions<W: Write>(w: W, rows: &[PredictionRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    if !path.exists() {
        return Err(Usage(format!("missing input file {}", path.display())).into());
    }
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_HEADER {
        return Err(Usage(format!("{}: line 1: expected header {}", path.display(), PREDICTION_HEADER.join(","))).into());
    }
    let mut out = Vec::new();
    for (i, rec) in rd.deserialize().enumerate() {
        out.push(rec.map_err(|e| Usage(format!("{}: line {}: {e}", path.display(), i + 2)))?);
    }
    Ok(out)
}

/// One chart series: a label and `(hour offset, value)` points.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Truth plus one series per model for `poi` in `[from, to]`.
pub fn select_series(
    rows: &[PredictionRow],
    poi: &str,
    from: Option<NaiveDateTime>,
    to: Option<NaiveDateTime>,
) -> Result<(NaiveDateTime, Vec<Series>)> {
    if !rows.iter().any(|r| r.poi == poi) {
        return Err(Usage(format!("POI `{poi}` does not appear in the predictions")).into());
    }
    let mut picked = Vec::new();
    for r in rows.iter().filter(|r| r.poi == poi) {
        let ts = parse_timestamp(&r.timestamp).ok_or_else(|| Usage(format!("bad timestamp `{}`", r.timestamp)))?;
        if from.is_some_and(|f| ts < f) || to.is_some_and(|t| ts > t) {
            continue;
        }
        picked.push((ts, r));
    }
    let start = picked.iter().map(|(t, _)| *t).min().ok_or_else(|| Usage("no predictions in the selected range".into()))?;
    let hours = |t: &NaiveDateTime| (*t - start).num_minutes() as f64 / 60.0;
    let mut truth: BTreeMap<NaiveDateTime, f64> = BTreeMap::new();
    let mut models: Vec<Series> = Vec::new();
    for (ts, r) in &picked {
        truth.entry(*ts).or_insert(r.y_true);
        let idx = match models.iter().position(|s| s.label == r.model) {
            Some(i) => i,
            None => {
                models.push(Series { label: r.model.clone(), points: Vec::new() });
                models.len() - 1
            }
        };
        models[idx].points.push((hours(ts), r.y_pred));
    }
    for s in &mut models {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut series = vec![Series { label: "truth".into(), points: truth.iter().map(|(t, v)| (hours(t), *v)).collect() }];
    series.extend(models);
    Ok((start, series))
}

const COLORS: [&str; 9] = ["#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Line chart with an hourly x-axis and a count axis starting at zero.
pub fn render_svg(title: &str, start: NaiveDateTime, series: &[Series]) -> String {
    let (w, h) = (960.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let x_max = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).fold(1.0f64, f64::max);
    let y_max = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(1.0f64, f64::max);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - y.max(0.0) / y_max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="dimgray"/>"#, top + ph, left + pw, top + ph);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="dimgray"/>"#, top + ph);
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.1}</text>"#,
            left - 6.0,
            sy(v) + 3.0
        );
    }
    let step = ((x_max / 8.0).ceil() as i64).max(1);
    let mut tick = 0;
    while tick as f64 <= x_max {
        let ts = start + chrono::Duration::hours(tick);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            sx(tick as f64),
            top + ph + 16.0,
            ts.format("%m-%d %H:00")
        );
        tick += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">hour</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&ser.label)
        );
        let ly = top + 14.0 * i as f64 + 6.0;
        let lx = left + pw + 16.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
