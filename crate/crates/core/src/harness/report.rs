//! Study reports: per-level metrics, fitted slopes, threshold checks, and
//! their text/CSV renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One refinement level: mean ± std of a metric over `seeds` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub level: f64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

impl MetricRow {
    pub fn from_samples(level: f64, samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            level,
            mean,
            std: var.sqrt(),
            seeds: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `<= 1e-10`.
    pub condition: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            condition: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            condition: format!(">= {limit}"),
            passed: value >= limit,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            condition: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        }
    }

    pub fn flag(name: &str, passed: bool) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            condition: "== 1".into(),
            passed,
        }
    }
}

/// A named table written next to the report as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub id: String,
    pub config: String,
    /// Label of the level column, e.g. `dt` or `n`.
    pub level_name: String,
    pub metric_name: String,
    pub rows: Vec<MetricRow>,
    pub slopes: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Reference slopes drawn as guide lines in the plot.
    pub guides: Vec<f64>,
    /// Diagnostics without a threshold.
    pub values: Vec<(String, f64)>,
    /// Opaque files (field snapshots) written verbatim.
    pub attachments: Vec<(String, Vec<u8>)>,
}

impl StudyReport {
    pub fn new(id: &str, config: String) -> Self {
        Self {
            id: id.into(),
            config,
            level_name: "level".into(),
            metric_name: "metric".into(),
            rows: Vec::new(),
            slopes: Vec::new(),
            checks: Vec::new(),
            tables: Vec::new(),
            guides: Vec::new(),
            values: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.push(Table { name: name.into(), csv });
    }

    /// Study CSV `<level>,mean,std,seeds`.
    pub fn study_csv(&self) -> String {
        let mut out = format!("{},mean,std,seeds\n", self.level_name);
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.level, r.mean, r.std, r.seeds);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "study: {}\nmetric: {} vs {}\n\n",
            self.id, self.metric_name, self.level_name
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{} = {:<12} mean = {:.6e}  std = {:.6e}  seeds = {}",
                self.level_name, r.level, r.mean, r.std, r.seeds
            );
        }
        if !self.slopes.is_empty() {
            out.push('\n');
        }
        for (name, s) in &self.slopes {
            let _ = writeln!(out, "slope {name}: {s:.4}");
        }
        for (name, v) in &self.values {
            let _ = writeln!(out, "{name}: {v:.6e}");
        }
        out.push('\n');
        for c in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {}: {:.6e} (required {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.condition
            );
        }
        let _ = write!(
            out,
            "\nresult: {}\n\n# config\n{}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.config
        );
        out
    }

    /// Writes `report.txt`, `study.csv`, extra tables and (optionally) `plot.svg`
    /// into `dir`, returning the written paths.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (dir.join("report.txt"), self.to_text()),
            (dir.join("study.csv"), self.study_csv()),
        ];
        for t in &self.tables {
            files.push((dir.join(format!("{}.csv", t.name)), t.csv.clone()));
        }
        if plots {
            match super::plot::render(self) {
                Ok(svg) => files.push((dir.join("plot.svg"), svg)),
                Err(Error::TooFewLevels(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let mut written = Vec::new();
        for (path, body) in &files {
            fs::write(path, body).map_err(|e| Error::io(path, e))?;
            written.push(path.clone());
        }
        for (name, bytes) in &self.attachments {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        assert!((fit_slope(&xs, &ys) - 0.5).abs() < 1e-12);
        let two = fit_slope(&[1.0, 2.0], &[4.0, 1.0]);
        assert!((two + 2.0).abs() < 1e-12);
    }

    #[test]
    fn sample_statistics() {
        let r = MetricRow::from_samples(0.5, &[1.0, 2.0, 3.0]);
        assert_eq!((r.mean, r.std, r.seeds), (2.0, 1.0, 3));
    }

    #[test]
    fn report_pass_flag_follows_checks() {
        let mut r = StudyReport::new("x", String::new());
        r.check(Check::at_most("a", 1.0, 2.0));
        assert!(r.passed());
        r.check(Check::within("b", 5.0, 3.2, 4.8));
        assert!(!r.passed());
        assert_eq!(r.failures()[0].name, "b");
        assert!(r.to_text().contains("[FAIL] b"));
    }
}
