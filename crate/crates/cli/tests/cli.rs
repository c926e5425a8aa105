use std::path::Path;
use std::process::{Command, Output};

fn cqed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn split_reports_centers_near_phi_plus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("split");
    let o = cqed(
        &["split", "--n-bar", "36", "--t-i", "32e-6", "--damping", "off", "-o", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("undamped centers [-0.399, +0.399]"), "{text}");

    let metrics: serde_like::Metrics = serde_like::read(&out.join("metrics.json"));
    assert!((metrics.get("nbar36.undamped.peak1.center") - 0.4).abs() < 0.02);
    assert!(out.join("config.snapshot").is_file());
    assert!(out.join("scan_undamped_nbar36.csv").is_file());
}

#[test]
fn nothing_is_written_outside_the_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqed(
        &["split", "--set", "damping_enabled=false", "--phi-points", "64", "-o", "out"],
        dir.path(),
    );
    assert!(o.status.success());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("out")]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# quick\nn_bar = 22\nphi_points = 64\ndamping_enabled = false\n").unwrap();
    let o = cqed(
        &["split", "--config", cfg.to_str().unwrap(), "--n-bar", "29", "-o", "out"],
        dir.path(),
    );
    assert!(o.status.success());
    let snap = std::fs::read_to_string(dir.path().join("out/config.snapshot")).unwrap();
    assert!(snap.contains("n_bar = 29\n") && snap.contains("phi_points = 64\n"), "{snap}");
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqed(&["fig3", "--config", "absent.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqed(&["split", "--set", "n_bars=3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = cqed(&["split", "--no-such-flag", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqed(&["split", "--n-max", "20", "--damping", "off", "-o", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncation too small"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqed(&["selftest", "--threads", "2"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

/// Reads numbers from the flat `metrics` object.
mod serde_like {
    use std::path::Path;

    pub struct Metrics(String);

    impl Metrics {
        pub fn get(&self, key: &str) -> f64 {
            let needle = format!("\"{key}\": ");
            let start = self.0.find(&needle).expect("metric present") + needle.len();
            let rest = &self.0[start..];
            let end = rest.find([',', '\n']).unwrap();
            rest[..end].trim().parse().unwrap()
        }
    }

    pub fn read(path: &Path) -> Metrics {
        Metrics(std::fs::read_to_string(path).unwrap())
    }
}
