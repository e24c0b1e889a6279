use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::ExperimentConfig;

/// One measured value; the CSV has exactly these columns in this order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub seed: u64,
    pub delta: f64,
    pub metric: String,
    pub value: f64,
}

/// Least-squares fit of `log y = a + slope · log δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// `None` with only two points.
    pub std_err: Option<f64>,
    pub points: usize,
}

/// `None` when fewer than two usable points remain (non-positive values are dropped).
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let std_err = (n > 2).then(|| {
        let ssr: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (ssr / (n - 2) as f64 / sxx).sqrt()
    });
    Some(SlopeFit { slope, std_err, points: n })
}

/// Moments of one metric at one δ over the seeds that produced a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaStats {
    pub delta: f64,
    pub grid_multiple: usize,
    pub samples: usize,
    pub mean: f64,
    pub rms: f64,
    /// `(mean |x|^{q′})^{1/q′}`.
    pub moment: f64,
}

impl DeltaStats {
    pub fn from_values(delta: f64, grid_multiple: usize, values: &[f64], q: f64) -> Self {
        let n = values.len();
        let avg = |f: &dyn Fn(f64) -> f64| if n == 0 { f64::NAN } else { values.iter().map(|&v| f(v)).sum::<f64>() / n as f64 };
        DeltaStats {
            delta,
            grid_multiple,
            samples: n,
            mean: avg(&|v| v),
            rms: avg(&|v| v * v).sqrt(),
            moment: avg(&|v| v.abs().powf(q)).powf(1.0 / q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    /// Ordered from the largest δ to the smallest.
    pub per_delta: Vec<DeltaStats>,
    /// Fit of the RMS against δ.
    pub slope: Option<SlopeFit>,
    pub predicted_slope: Option<f64>,
    /// Fraction of seeds whose values are monotone along the ladder, if checked.
    pub monotone_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    /// Acceptance band in words, e.g. `slope in [0.36, 0.54]`.
    pub band: String,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricSummary>,
    pub gates: Vec<Gate>,
    /// `(grid multiple, count)` of solver blow-ups.
    pub blow_ups: Vec<(usize, usize)>,
    pub notes: Vec<String>,
    pub passed: bool,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl ConvergenceReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn csv(&self) -> String {
        records_csv(&self.records)
    }
}

pub const CSV_HEADER: &str = "seed,delta,metric,value";

pub fn records_csv(records: &[Record]) -> String {
    let mut s = String::with_capacity(records.len() * 40 + 32);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        writeln!(s, "{},{},{},{}", r.seed, r.delta, r.metric, r.value).expect("writing to a String");
    }
    s
}

/// Results of a suite run, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub reports: Vec<ConvergenceReport>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn new(reports: Vec<ConvergenceReport>) -> Self {
        let passed = reports.iter().all(|r| r.passed);
        SuiteReport { reports, passed }
    }

    /// Write `<experiment>.csv` and `<experiment>.json` per report plus `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for r in &self.reports {
            write_file(&dir.join(format!("{}.csv", r.experiment)), &r.csv())?;
            write_file(&dir.join(format!("{}.json", r.experiment)), &to_json(r)?)?;
        }
        write_file(&dir.join("summary.json"), &to_json(self)?)
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.45)).collect();
        let f = fit_log_log(&x, &y).unwrap();
        assert!((f.slope - 0.45).abs() < 1e-12);
        assert!(f.std_err.unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert!(fit_log_log(&[1.0], &[2.0]).is_none());
        assert!(fit_log_log(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        let f = fit_log_log(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(f.std_err, None);
    }

    #[test]
    fn stats() {
        let s = DeltaStats::from_values(0.1, 2, &[3.0, -4.0], 2.0);
        assert_eq!(s.mean, -0.5);
        assert!((s.rms - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((s.moment - s.rms).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let r = vec![Record { seed: 3, delta: 0.125, metric: "sup".into(), value: 1e-3 }];
        assert_eq!(records_csv(&r), "seed,delta,metric,value\n3,0.125,sup,0.001\n");
    }
}
