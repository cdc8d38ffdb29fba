use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generator::{OUTPUT_SAMPLES, SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Labeled intervals over one generated output.
///
/// Text form: one `start<TAB>end<TAB>label` line per interval, times in
/// seconds. An optional leading `# source_layer: <name>` line records which
/// layer the annotation was made on; other `#` lines are ignored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationTier {
    pub intervals: Vec<Interval>,
    pub source_layer: Option<String>,
}

impl AnnotationTier {
    pub fn new(intervals: Vec<Interval>, source_layer: Option<String>) -> Result<Self> {
        let tier = Self {
            intervals,
            source_layer,
        };
        tier.validate()?;
        Ok(tier)
    }

    pub fn validate(&self) -> Result<()> {
        let limit = OUTPUT_SAMPLES as f64 / SAMPLE_RATE as f64;
        let mut prev_end = 0.0;
        for (i, iv) in self.intervals.iter().enumerate() {
            if !(iv.start.is_finite() && iv.end.is_finite()) || iv.end <= iv.start {
                return Err(Error::Validation(format!("interval {i} has end <= start")));
            }
            if iv.start < 0.0 || iv.end > limit + 1e-9 {
                return Err(Error::Validation(format!(
                    "interval {i} [{}, {}] leaves [0, {limit}]",
                    iv.start, iv.end
                )));
            }
            if iv.start < prev_end {
                return Err(Error::Validation(format!(
                    "interval {i} overlaps or precedes the previous one"
                )));
            }
            prev_end = iv.end;
        }
        Ok(())
    }

    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Interval> + 'a {
        self.intervals.iter().filter(move |iv| iv.label == label)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        let mut source_layer = None;
        for (n, line) in text.lines().enumerate() {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(layer) = comment.trim().strip_prefix("source_layer:") {
                    source_layer = Some(layer.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let bad = || Error::Validation(format!("annotation line {}: expected start<TAB>end<TAB>label", n + 1));
            let start: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let end: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let label = parts.next().ok_or_else(bad)?.trim_end_matches('\r').to_string();
            intervals.push(Interval { start, end, label });
        }
        Self::new(intervals, source_layer)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(layer) = &self.source_layer {
            let _ = writeln!(s, "# source_layer: {layer}");
        }
        for iv in &self.intervals {
            let _ = writeln!(s, "{:.6}\t{:.6}\t{}", iv.start, iv.end, iv.label);
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, self.to_text().as_bytes())
    }
}

/// Pair the durations of intervals labeled `label` in two tiers, in order.
pub fn measure_durations(a: &AnnotationTier, b: &AnnotationTier, label: &str) -> Result<Vec<(f64, f64)>> {
    let xs: Vec<f64> = a.with_label(label).map(Interval::duration).collect();
    let ys: Vec<f64> = b.with_label(label).map(Interval::duration).collect();
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!(
            "label `{label}` occurs {} times in the first tier and {} in the second",
            xs.len(),
            ys.len()
        )));
    }
    Ok(xs.into_iter().zip(ys).collect())
}
