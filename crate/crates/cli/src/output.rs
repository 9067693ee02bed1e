use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IndexedValue {
    index: usize,
    value: f64,
}

pub fn write_values_csv(path: &Path, values: &[f64]) -> Result<()> {
    let rows: Vec<IndexedValue> = values.iter().enumerate().map(|(index, &value)| IndexedValue { index, value }).collect();
    write_csv(path, &rows)
}

/// Wall-clock phases, kept out of the deterministic report.
#[derive(Default, Serialize)]
pub struct Timing {
    phases: Vec<(String, f64)>,
}

impl Timing {
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(phase, start.elapsed().as_secs_f64());
        out
    }

    pub fn record(&mut self, phase: &str, seconds: f64) {
        self.phases.push((phase.to_string(), seconds));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let map: serde_json::Map<String, serde_json::Value> =
            self.phases.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
        write_json(&dir.join(TIMING_FILE), &map)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
