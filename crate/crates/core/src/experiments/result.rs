//! Scenario outputs and their on-disk layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::measurement::{PhaseScan, WignerGrid};
use crate::trace::Trace;

use super::config::ExperimentConfig;

/// Marker written next to every result: no random numbers are drawn anywhere.
pub const DETERMINISM: &str = "seed-free";

/// Everything a scenario produced. Arrays always travel with their grids.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub scenario: String,
    pub config: ExperimentConfig,
    pub traces: Vec<(String, Trace)>,
    pub scans: Vec<(String, PhaseScan)>,
    pub wigners: Vec<(String, WignerGrid)>,
    pub metrics: BTreeMap<String, f64>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

impl ScenarioResult {
    pub fn new(scenario: &str, config: &ExperimentConfig) -> Self {
        Self {
            scenario: scenario.to_string(),
            config: config.clone(),
            traces: Vec::new(),
            scans: Vec::new(),
            wigners: Vec::new(),
            metrics: BTreeMap::new(),
            summary: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn trace(&self, name: &str) -> Option<&Trace> {
        self.traces.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn scan(&self, name: &str) -> Option<&PhaseScan> {
        self.scans.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn wigner(&self, name: &str) -> Option<&WignerGrid> {
        self.wigners.iter().find(|(n, _)| n == name).map(|(_, w)| w)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// The output directory as `(file name, contents)` pairs, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        out.push((
            "config.snapshot".to_string(),
            format!("# scenario: {}\n{}", self.scenario, self.config.to_text()),
        ));
        for (name, t) in &self.traces {
            let mut s = String::from("t_seconds,P_g\n");
            for (x, y) in t.t.iter().zip(&t.p_g) {
                let _ = writeln!(s, "{x},{y}");
            }
            out.push((format!("trace_{name}.csv"), s));
        }
        for (name, scan) in &self.scans {
            let mut s = String::from("phi_radians,S_g\n");
            for (x, y) in scan.phi_grid.iter().zip(&scan.s_g) {
                let _ = writeln!(s, "{x},{y}");
            }
            out.push((format!("scan_{name}.csv"), s));
        }
        for (name, w) in &self.wigners {
            let mut s = String::from("beta_x,beta_y,W\n");
            for (iy, y) in w.beta_y.iter().enumerate() {
                for (ix, x) in w.beta_x.iter().enumerate() {
                    let _ = writeln!(s, "{x},{y},{}", w.values[[iy, ix]]);
                }
            }
            out.push((format!("wigner_{name}.csv"), s));
        }
        out.push(("metrics.json".to_string(), self.metrics_json()));
        out
    }

    pub fn metrics_json(&self) -> String {
        let metrics: Map<String, Value> = self
            .metrics
            .iter()
            .map(|(k, v)| (k.clone(), number(*v)))
            .collect();
        let doc = json!({
            "scenario": self.scenario,
            "code_version": env!("CARGO_PKG_VERSION"),
            "determinism": DETERMINISM,
            "metrics": metrics,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("plain JSON values");
        s.push('\n');
        s
    }

    /// Writes [`Self::files`] into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in self.files() {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_metrics_become_strings() {
        let mut r = ScenarioResult::new("x", &ExperimentConfig::default());
        r.metric("tau", f64::INFINITY);
        r.metric("d2", 20.5);
        let v: Value = serde_json::from_str(&r.metrics_json()).unwrap();
        assert_eq!(v["metrics"]["tau"], "inf");
        assert_eq!(v["metrics"]["d2"], 20.5);
        assert_eq!(v["determinism"], DETERMINISM);
    }

    #[test]
    fn csv_headers_and_layout() {
        let mut r = ScenarioResult::new("x", &ExperimentConfig::default());
        r.traces.push(("a".into(), Trace::new(vec![0.0, 1e-6], vec![1.0, 0.5])));
        let files = r.files();
        let (name, body) = &files[1];
        assert_eq!(name, "trace_a.csv");
        assert_eq!(body, "t_seconds,P_g\n0,1\n0.000001,0.5\n");
        assert!(files[0].1.starts_with("# scenario: x\nomega = 300000\n"));
        assert_eq!(files.last().unwrap().0, "metrics.json");
    }

    #[test]
    fn snapshot_reparses_to_the_same_config() {
        let mut c = ExperimentConfig::default();
        c.n_bar = Some(27.0);
        let r = ScenarioResult::new("fig3", &c);
        let snap = &r.files()[0].1;
        assert_eq!(ExperimentConfig::parse(snap).unwrap(), c);
    }
}
