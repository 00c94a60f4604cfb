//! CSV tables with a single leading `#` manifest line.

use std::fmt::Write as _;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use dheom_core::hierarchy::Diagnostics;
use dheom_core::quantum::ComplexMatrix;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Provenance of one run, written as `# key=value ...`.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    /// `(stage, wall time)` pairs.
    pub wall_times: Vec<(String, Duration)>,
    /// Extra `(key, value)` pairs such as solver diagnostics.
    pub fields: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            ..Self::default()
        }
    }

    pub fn wall_time(&mut self, stage: &str, elapsed: Duration) {
        self.wall_times.push((stage.to_string(), elapsed));
    }

    pub fn field(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_string(), value.to_string()));
    }

    pub fn diagnostics(&mut self, d: &Diagnostics) {
        self.field("depth", d.depth);
        self.field("step", format!("{:e}", d.step));
        self.field("steps", d.steps);
        self.field("trace_drift", format!("{:e}", d.trace_drift));
        self.field("auxiliary_trace", format!("{:e}", d.auxiliary_trace));
        self.field("hermiticity_drift", format!("{:e}", d.hermiticity_drift));
    }

    pub fn line(&self) -> String {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let mut out = format!(
            "# tool=dheom version={} command={} config_hash={} timestamp_unix={timestamp}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash
        );
        for (stage, t) in &self.wall_times {
            let _ = write!(out, " wall_time_{stage}_s={:.6}", t.as_secs_f64());
        }
        for (k, v) in &self.fields {
            let _ = write!(out, " {k}={v}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn render(&self, manifest: &RunManifest) -> String {
        let mut out = manifest.line();
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `prefix_ij_re, prefix_ij_im` for every entry in row-major order.
pub fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("{prefix}_{i}_{j}_re"));
            cols.push(format!("{prefix}_{i}_{j}_im"));
        }
    }
    cols
}

pub fn matrix_cells(m: &ComplexMatrix) -> Vec<String> {
    let mut cells = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            cells.push(num(m[(i, j)].re));
            cells.push(num(m[(i, j)].im));
        }
    }
    cells
}
