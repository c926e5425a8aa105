//! Flat `key = value` experiment configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::Truncation;
use crate::jc::{CouplingProfile, Level, MODE_EXTENT};
use crate::lindblad::DampingParams;

/// Which A₁ outcome the readout is conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    None,
    Excited,
    Ground,
}

impl Condition {
    pub fn level(self) -> Option<Level> {
        match self {
            Condition::None => None,
            Condition::Excited => Some(Level::Excited),
            Condition::Ground => Some(Level::Ground),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::Excited => "e",
            Condition::Ground => "g",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Condition::None),
            "e" => Some(Condition::Excited),
            "g" => Some(Condition::Ground),
            _ => None,
        }
    }
}

/// Physical parameters and numerical controls of a run. SI units throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Vacuum Rabi angular frequency (rad/s).
    pub omega: f64,
    pub t_cav: f64,
    /// Atomic lifetime; recorded, never applied.
    pub t_atom: f64,
    pub waist: f64,
    pub velocity: f64,
    /// Overrides the velocity through `v = √π w / t_i`.
    pub t_i: Option<f64>,
    /// `None` lets each scenario pick its own mean photon number.
    pub n_bar: Option<f64>,
    pub n_bar_list: Vec<f64>,
    pub temperature: f64,
    pub frequency: f64,
    /// Highest Fock level; 0 picks the smallest admissible one per run.
    pub n_max: usize,
    pub damping_enabled: bool,
    pub thermal_photons: bool,
    pub condition_on: Condition,
    /// F₁ injection before A₁ enters the mode.
    pub f1_lead: f64,
    /// F₂ injection after A₁ leaves the mode.
    pub f2_delay: f64,
    /// A₂ mode entry after F₂.
    pub a2_delay: f64,
    pub phi_points: usize,
    pub horizon: f64,
    pub trace_points: usize,
    pub echo_times: Vec<f64>,
    /// Wigner snapshot delay after the A₁ axis crossing.
    pub wigner_delay: f64,
    /// Half-width of the Wigner grid; 0 sizes it from the field.
    pub wigner_extent: f64,
    pub wigner_points: usize,
    pub verify_step: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omega: 3e5,
            t_cav: 850e-6,
            t_atom: 30e-3,
            waist: 6e-3,
            velocity: 335.0,
            t_i: None,
            n_bar: None,
            n_bar_list: vec![15.0, 22.0, 29.0, 36.0],
            temperature: 0.6,
            frequency: 51.1e9,
            n_max: 0,
            damping_enabled: true,
            thermal_photons: false,
            condition_on: Condition::None,
            f1_lead: 1e-6,
            f2_delay: 1e-6,
            a2_delay: 0.0,
            phi_points: 240,
            horizon: 200e-6,
            trace_points: 2001,
            echo_times: vec![20e-6],
            wigner_delay: 48e-6,
            wigner_extent: 0.0,
            wigner_points: 121,
            verify_step: false,
        }
    }
}

/// Every recognised key, in serialization order.
pub const KEYS: &[&str] = &[
    "omega",
    "t_cav",
    "t_atom",
    "waist",
    "velocity",
    "t_i",
    "n_bar",
    "n_bar_list",
    "temperature",
    "frequency",
    "n_max",
    "damping_enabled",
    "thermal_photons",
    "condition_on",
    "f1_lead",
    "f2_delay",
    "a2_delay",
    "phi_points",
    "horizon",
    "trace_points",
    "echo_times",
    "wigner_delay",
    "wigner_extent",
    "wigner_points",
    "verify_step",
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {what}"))
}

fn real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "a real number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, v, "a finite number"))
    }
}

fn optional(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        real(key, v).map(Some)
    }
}

fn integer(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| real(key, s.trim()))
        .collect::<Result<Vec<_>>>()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn show_optional(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "omega" => self.omega = real(key, v)?,
            "t_cav" => self.t_cav = real(key, v)?,
            "t_atom" => self.t_atom = real(key, v)?,
            "waist" => self.waist = real(key, v)?,
            "velocity" => self.velocity = real(key, v)?,
            "t_i" => self.t_i = optional(key, v)?,
            "n_bar" => self.n_bar = optional(key, v)?,
            "n_bar_list" => self.n_bar_list = list(key, v)?,
            "temperature" => self.temperature = real(key, v)?,
            "frequency" => self.frequency = real(key, v)?,
            "n_max" => self.n_max = integer(key, v)?,
            "damping_enabled" => self.damping_enabled = boolean(key, v)?,
            "thermal_photons" => self.thermal_photons = boolean(key, v)?,
            "condition_on" => {
                self.condition_on = Condition::parse(v).ok_or_else(|| bad(key, v, "none, e or g"))?
            }
            "f1_lead" => self.f1_lead = real(key, v)?,
            "f2_delay" => self.f2_delay = real(key, v)?,
            "a2_delay" => self.a2_delay = real(key, v)?,
            "phi_points" => self.phi_points = integer(key, v)?,
            "horizon" => self.horizon = real(key, v)?,
            "trace_points" => self.trace_points = integer(key, v)?,
            "echo_times" => self.echo_times = list(key, v)?,
            "wigner_delay" => self.wigner_delay = real(key, v)?,
            "wigner_extent" => self.wigner_extent = real(key, v)?,
            "wigner_points" => self.wigner_points = integer(key, v)?,
            "verify_step" => self.verify_step = boolean(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Text form of one key.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "omega" => self.omega.to_string(),
            "t_cav" => self.t_cav.to_string(),
            "t_atom" => self.t_atom.to_string(),
            "waist" => self.waist.to_string(),
            "velocity" => self.velocity.to_string(),
            "t_i" => show_optional(self.t_i),
            "n_bar" => show_optional(self.n_bar),
            "n_bar_list" => join(&self.n_bar_list),
            "temperature" => self.temperature.to_string(),
            "frequency" => self.frequency.to_string(),
            "n_max" => self.n_max.to_string(),
            "damping_enabled" => self.damping_enabled.to_string(),
            "thermal_photons" => self.thermal_photons.to_string(),
            "condition_on" => self.condition_on.as_str().to_string(),
            "f1_lead" => self.f1_lead.to_string(),
            "f2_delay" => self.f2_delay.to_string(),
            "a2_delay" => self.a2_delay.to_string(),
            "phi_points" => self.phi_points.to_string(),
            "horizon" => self.horizon.to_string(),
            "trace_points" => self.trace_points.to_string(),
            "echo_times" => join(&self.echo_times),
            "wigner_delay" => self.wigner_delay.to_string(),
            "wigner_extent" => self.wigner_extent.to_string(),
            "wigner_points" => self.wigner_points.to_string(),
            "verify_step" => self.verify_step.to_string(),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        })
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and text
    /// after `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Parses a config text over the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Complete `key = value` listing; `parse` of the output gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega", self.omega),
            ("t_cav", self.t_cav),
            ("t_atom", self.t_atom),
            ("waist", self.waist),
            ("velocity", self.velocity),
            ("frequency", self.frequency),
            ("horizon", self.horizon),
        ];
        for (k, v) in positive {
            if v <= 0.0 {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("temperature", self.temperature),
            ("f1_lead", self.f1_lead),
            ("f2_delay", self.f2_delay),
            ("a2_delay", self.a2_delay),
            ("wigner_delay", self.wigner_delay),
            ("wigner_extent", self.wigner_extent),
        ];
        for (k, v) in non_negative {
            if v < 0.0 {
                return Err(Error::Config(format!(
                    "{k} must be non-negative (timeline F1 < A1 entry, A1 exit < F2 <= A2), got {v}"
                )));
            }
        }
        if let Some(t) = self.t_i {
            if t <= 0.0 {
                return Err(Error::Config(format!("t_i must be positive, got {t}")));
            }
        }
        if let Some(n) = self.n_bar {
            if n <= 0.0 {
                return Err(Error::Config(format!("n_bar must be positive, got {n}")));
            }
        }
        if self.n_bar_list.iter().any(|n| *n <= 0.0) {
            return Err(Error::Config("n_bar_list entries must be positive".into()));
        }
        if self.echo_times.iter().any(|t| *t <= 0.0) {
            return Err(Error::Config("echo_times entries must be positive".into()));
        }
        if self.phi_points < 16 {
            return Err(Error::Config("phi_points must be at least 16".into()));
        }
        if self.trace_points < 2 || self.wigner_points < 3 {
            return Err(Error::Config("trace_points >= 2 and wigner_points >= 3 required".into()));
        }
        Ok(())
    }

    /// Effective interaction time `√π w / v`, or the `t_i` override.
    pub fn interaction_time(&self) -> f64 {
        self.t_i.unwrap_or(PI.sqrt() * self.waist / self.velocity)
    }

    /// Atomic velocity consistent with [`Self::interaction_time`].
    pub fn effective_velocity(&self) -> f64 {
        PI.sqrt() * self.waist / self.interaction_time()
    }

    pub fn profile(&self) -> CouplingProfile {
        CouplingProfile::gaussian(self.omega, self.waist, self.effective_velocity())
    }

    /// Half-width `3w/v` of the transit window.
    pub fn transit_half_width(&self) -> f64 {
        MODE_EXTENT * self.waist / self.effective_velocity()
    }

    /// Damping used by the damped variants (even when `damping_enabled` is off).
    pub fn cavity_damping(&self) -> DampingParams {
        if self.thermal_photons {
            DampingParams::thermal(self.t_cav, self.temperature, self.frequency)
        } else {
            DampingParams::zero_temperature(self.t_cav)
        }
    }

    /// Truncation for coherent fields of mean up to `n_bar`.
    pub fn truncation_for(&self, n_bar: f64) -> Result<Truncation> {
        if self.n_max == 0 {
            return Ok(Truncation::for_mean(n_bar));
        }
        let t = Truncation::new(self.n_max)?;
        t.check_mean(n_bar)?;
        t.check_tail(n_bar)?;
        Ok(t)
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        self.set(key, value)?;
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_interaction_times() {
        let a = ExperimentConfig::default();
        assert!((a.interaction_time() * 1e6 - 31.75).abs() < 0.1);
        let b = a.with("velocity", "200").unwrap();
        assert!((b.interaction_time() * 1e6 - 53.2).abs() < 0.1);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = ExperimentConfig::parse("# header\n\nn_bar = 15 # photons\ncondition_on = g\n").unwrap();
        assert_eq!(c.n_bar, Some(15.0));
        assert_eq!(c.condition_on, Condition::Ground);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::parse("n_photons = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("n_photons")));
    }

    #[test]
    fn malformed_values_rejected() {
        for text in ["omega = fast", "n_max = -1", "damping_enabled = maybe", "omega", "condition_on = x"] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn timeline_must_be_ordered() {
        assert!(ExperimentConfig::parse("f2_delay = -1e-6").is_err());
        assert!(ExperimentConfig::parse("f1_lead = -2e-6").is_err());
    }

    #[test]
    fn override_velocity_with_interaction_time() {
        let c = ExperimentConfig::parse("t_i = 52e-6").unwrap();
        assert!((c.interaction_time() - 52e-6).abs() < 1e-18);
        assert!((c.profile().interaction_time().unwrap() - 52e-6).abs() < 1e-15);
    }

    #[test]
    fn fixed_truncation_is_guarded() {
        let c = ExperimentConfig::parse("n_max = 30").unwrap();
        assert!(matches!(c.truncation_for(36.0), Err(Error::TruncationTooSmall { .. })));
        assert_eq!(ExperimentConfig::parse("n_max = 120").unwrap().truncation_for(36.0).unwrap().n_max(), 120);
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            1e3..1e7f64,
            proptest::option::of(1e-6..1e-4f64),
            proptest::option::of(1.0..50.0f64),
            proptest::collection::vec(1.0..60.0f64, 1..5),
            0usize..200,
            any::<bool>(),
            0usize..3,
            0.0..5e-6f64,
        )
            .prop_map(|(omega, t_i, n_bar, list, n_max, damp, cond, delay)| ExperimentConfig {
                omega,
                t_i,
                n_bar,
                n_bar_list: list,
                n_max,
                damping_enabled: damp,
                condition_on: [Condition::None, Condition::Excited, Condition::Ground][cond],
                a2_delay: delay,
                ..ExperimentConfig::default()
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(c in arb_config()) {
            let text = c.to_text();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
