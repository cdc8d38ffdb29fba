//! Line plots as a long-format CSV plus a dependency-free SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::atomic_write;
use crate::error::{Error, Result};
use crate::probe::LayerProbe;
use crate::tensor::linear_resample;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub values: Vec<f64>,
    /// Display multiplier applied only in the SVG.
    pub scale: f64,
}

impl PlotSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
            scale: 1.0,
        }
    }

    pub fn from_probe(probe: &LayerProbe) -> Self {
        Self {
            name: format!("conv{}", probe.layer_index),
            values: probe.series.clone(),
            scale: probe.scale_hint,
        }
    }
}

/// Write `<stem>.csv` (`series,index,value`, unscaled) and `<stem>.svg`.
/// Series shorter than the longest one are linearly resampled for the SVG.
pub fn emit_plot(series: &[PlotSeries], stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "index", "value"])?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.name.clone(), i.to_string(), v.to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    atomic_write(&csv_path, &bytes)?;
    atomic_write(&svg_path, render_svg(series)?.as_bytes())?;
    Ok((csv_path, svg_path))
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

pub fn render_svg(series: &[PlotSeries]) -> Result<String> {
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let scaled: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let v: Vec<f64> = match s.values.len() {
                n if n == len || n == 0 => s.values.clone(),
                1 => vec![s.values[0]; len],
                _ => linear_resample(&s.values, len)?,
            };
            Ok(v.into_iter().map(|x| x * s.scale).collect())
        })
        .collect::<Result<_>>()?;
    let all = scaled.iter().flatten().filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let x_of = |i: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * i / (len.max(2) - 1) as f64;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(lo, hi, 5) {
        let y = y_of(t);
        let _ = writeln!(
            svg,
            r#"<line class="ytick" x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    if len > 1 {
        for t in nice_ticks(0.0, (len - 1) as f64, 8) {
            let x = x_of(t);
            let _ = writeln!(
                svg,
                r#"<line class="xtick" x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y1 + 4.0,
                y1 + 16.0,
                fmt_tick(t)
            );
        }
    }
    for (k, (s, v)) in series.iter().zip(&scaled).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite())
            .map(|(i, &y)| format!("{:.2},{:.2}", x_of(i as f64), y_of(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 14.0 * k as f64;
        let label = if s.scale == 1.0 {
            escape(&s.name)
        } else {
            format!("{} (×{})", escape(&s.name), fmt_tick(s.scale))
        };
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text></g>"#,
            x1 - 120.0,
            x1 - 100.0,
            x1 - 95.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_are_horizontal() {
        let svg = render_svg(&[
            PlotSeries::new("a", vec![1.0; 10]),
            PlotSeries::new("b", vec![2.0; 10]),
        ])
        .unwrap();
        let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(lines.len(), 2);
        for l in lines {
            let pts = l.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
            let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
            assert!(ys.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(svg.matches("class=\"legend\"").count(), 2);
        assert!(svg.contains("class=\"ytick\""));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let series = vec![
            PlotSeries::new("conv3", vec![0.1, 0.25, 1.0 / 7.0]),
            PlotSeries::new("output", vec![-0.5, 0.75]),
        ];
        let (csv_path, svg_path) = emit_plot(&series, &dir.path().join("fig")).unwrap();
        assert!(svg_path.exists());
        let mut r = csv::Reader::from_path(csv_path).unwrap();
        let rows: Vec<(String, usize, f64)> = r.deserialize().map(|x| x.unwrap()).collect();
        let mut back: Vec<PlotSeries> = Vec::new();
        for (name, _, v) in rows {
            match back.last_mut() {
                Some(s) if s.name == name => s.values.push(v),
                _ => back.push(PlotSeries::new(name, vec![v])),
            }
        }
        assert_eq!(back, series);
    }
}
