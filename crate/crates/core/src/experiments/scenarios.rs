//! Scenario runners on the F₁ → A₁ → F₂ → A₂ timeline.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::approx::{approx_pg, cat_metrics, classical_limit_check, component_phase, ClassicalLimitBase};
use crate::error::{Error, Result};
use crate::fock::{coherent_state, wrap_phase, CoherentParams, FieldState, Truncation};
use crate::jc::{
    echo_sequence, evolve, prepare_dipole_state, rabi_trace, Branch, CouplingProfile, JointState, Level,
};
use crate::lindblad::{
    conditional_field_state, conditional_field_state_pure, evolve_density, evolve_density_observed,
    partial_trace_field, CouplingWindow, DampingParams, DensityOperator, PulseEvent, Propagated, Schedule,
    StepOptions, TRACE_TOLERANCE,
};
use crate::measurement::{
    homodyne_scan, phase_grid, symmetric_axis, wigner, wigner_point, FieldInput, PhaseScan, Probe, WignerGrid,
};
use crate::trace::Trace;

use super::config::{Condition, ExperimentConfig};
use super::result::ScenarioResult;

pub const SPLIT_N_BAR: f64 = 36.0;
pub const FIG3_N_BAR: f64 = 27.0;
pub const REVIVAL_N_BAR: f64 = 15.0;
pub const ECHO_N_BAR: f64 = 36.0;
pub const CAT_N_BAR: f64 = 36.0;
/// Mean photon number of the long-interaction cat.
pub const CAT_B_N_BAR: f64 = 15.0;
/// Atomic velocities giving the two interaction times `t_a` and `t_b`.
pub const VELOCITY_A: f64 = 335.0;
pub const VELOCITY_B: f64 = 200.0;
/// Range of mean photon numbers in the cat-size tables.
pub const CAT_SWEEP: std::ops::RangeInclusive<u32> = 15..=36;
/// Samples of the fringe amplitude per decay fit.
const FRINGE_SAMPLES: usize = 21;

/// Event times on the common axis, F₁ injection at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timeline {
    pub half_width: f64,
    pub a1_entry: f64,
    pub a1_crossing: f64,
    pub a1_exit: f64,
    pub f2: f64,
    pub a2_entry: f64,
    pub a2_crossing: f64,
}

impl Timeline {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let h = cfg.transit_half_width();
        let a1_entry = cfg.f1_lead;
        let a1_exit = a1_entry + 2.0 * h;
        let f2 = a1_exit + cfg.f2_delay;
        let a2_entry = f2 + cfg.a2_delay;
        Self {
            half_width: h,
            a1_entry,
            a1_crossing: a1_entry + h,
            a1_exit,
            f2,
            a2_entry,
            a2_crossing: a2_entry + h,
        }
    }
}

/// Label fragment for a mean photon number: `29` or `12p5`.
pub fn n_label(n_bar: f64) -> String {
    if n_bar.fract() == 0.0 {
        format!("{}", n_bar as i64)
    } else {
        n_bar.to_string().replace('.', "p")
    }
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn coherent(cfg: &ExperimentConfig, n_bar: f64) -> Result<FieldState> {
    let t = cfg.truncation_for(n_bar)?;
    coherent_state(&CoherentParams::from_mean(n_bar), t)
}

fn step_options(cfg: &ExperimentConfig) -> StepOptions {
    StepOptions {
        dt: None,
        verify: cfg.verify_step,
    }
}

/// Running conservation checks over the integrations of one scenario.
#[derive(Clone, Copy, Debug)]
struct Ledger {
    trace_drift: f64,
    hermiticity: f64,
    min_eigenvalue: f64,
}

impl Ledger {
    fn new() -> Self {
        Self {
            trace_drift: 0.0,
            hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }

    /// Checks a finished integration and folds it into the totals.
    fn check(&mut self, run: &Propagated, context: &str) -> Result<()> {
        if run.report.trace_drift > TRACE_TOLERANCE {
            return Err(Error::InvariantViolated(format!(
                "{context}: trace drift {:.2e}",
                run.report.trace_drift
            )));
        }
        run.state.check_physical(context)?;
        self.trace_drift = self.trace_drift.max(run.report.trace_drift);
        self.hermiticity = self.hermiticity.max(run.report.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(run.state.min_eigenvalue());
        Ok(())
    }

    fn record(&self, r: &mut ScenarioResult) {
        if self.min_eigenvalue.is_finite() {
            r.metric("max_trace_drift", self.trace_drift);
            r.metric("max_hermiticity_correction", self.hermiticity);
            r.metric("min_eigenvalue", self.min_eigenvalue);
        }
    }
}

fn initial_joint(cfg: &ExperimentConfig, n_bar: f64, prepared: Option<Branch>) -> Result<JointState> {
    let field = coherent(cfg, n_bar)?;
    match prepared {
        None => Ok(JointState::product(Level::Ground, &field)),
        Some(b) => prepare_dipole_state(b, &field, &cfg.profile()),
    }
}

/// A₁ crossing the mode without damping; the atom starts in `g` or in a
/// prepared dipole state.
pub fn a1_undamped(cfg: &ExperimentConfig, n_bar: f64, prepared: Option<Branch>) -> Result<JointState> {
    Ok(evolve(&initial_joint(cfg, n_bar, prepared)?, &cfg.profile(), f64::INFINITY))
}

/// Damped joint evolution from F₁ (`t = 0`) to `until`, with `P_g` sampled
/// every `sample` seconds when requested.
pub fn a1_damped(
    cfg: &ExperimentConfig,
    n_bar: f64,
    prepared: Option<Branch>,
    until: f64,
    sample: Option<f64>,
) -> Result<(Propagated, Trace)> {
    let tl = Timeline::new(cfg);
    let rho = DensityOperator::from_joint(&initial_joint(cfg, n_bar, prepared)?);
    let schedule = Schedule::new().with_window(CouplingWindow::transit(cfg.profile(), tl.a1_crossing));
    let (mut t, mut p) = (Vec::new(), Vec::new());
    let run = evolve_density_observed(
        &rho,
        &schedule,
        until,
        &cfg.cavity_damping(),
        step_options(cfg),
        sample,
        |time, r| {
            t.push(time);
            p.push(r.population(Level::Ground));
        },
    )?;
    Ok((run, Trace::new(t, p)))
}

/// Field seen by the readout: A₁ traced out or conditioned on its outcome.
pub fn readout_field(joint: &DensityOperator, condition: Condition) -> Result<DensityOperator> {
    match condition.level() {
        None => partial_trace_field(joint),
        Some(level) => conditional_field_state(joint, level),
    }
}

fn readout_field_pure(psi: &JointState, condition: Condition) -> Result<DensityOperator> {
    match condition.level() {
        None => DensityOperator::from_field_ensemble(&[
            psi.field_component(Level::Excited),
            psi.field_component(Level::Ground),
        ]),
        Some(level) => Ok(DensityOperator::from_field(&conditional_field_state_pure(psi, level)?)),
    }
}

/// Probe A₂, uncoupled during the F₂ → entry delay.
pub fn probe(cfg: &ExperimentConfig, damped: bool) -> Probe {
    let mut p = Probe::transit(cfg.profile());
    p.start -= cfg.a2_delay;
    if damped {
        p = p.with_damping(cfg.cavity_damping());
    }
    p
}

/// Homodyne scan with the F₁ amplitude as reference, fitted with `expected` peaks.
pub fn scan(
    cfg: &ExperimentConfig,
    field: &DensityOperator,
    n_bar: f64,
    damped: bool,
    expected: usize,
) -> Result<PhaseScan> {
    homodyne_scan(
        FieldInput::Mixed(field),
        n_bar.sqrt(),
        &probe(cfg, damped),
        &phase_grid(cfg.phi_points),
    )?
    .fit(expected)
}

fn record_peaks(r: &mut ScenarioResult, prefix: &str, s: &PhaseScan) {
    for (k, p) in s.peaks.iter().enumerate() {
        r.metric(format!("{prefix}.peak{k}.center"), p.center);
        r.metric(format!("{prefix}.peak{k}.width"), p.width);
        r.metric(format!("{prefix}.peak{k}.amplitude"), p.amplitude);
        r.metric(format!("{prefix}.peak{k}.center_error"), p.center_error);
    }
    if let Some(res) = s.fit_residual {
        r.metric(format!("{prefix}.fit_residual"), res);
    }
    r.metric(format!("{prefix}.extra_peaks"), s.extra_peaks.len() as f64);
    if let Some(sep) = s.separation() {
        r.metric(format!("{prefix}.separation_deg"), sep.to_degrees());
    }
}

fn centers(s: &PhaseScan) -> String {
    s.peaks
        .iter()
        .map(|p| format!("{:+.3}", p.center))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Phase splitting for each `n̄`: reference scan without A₁, then the
/// undamped and (optionally) damped pipelines.
pub fn run_fig2(cfg: &ExperimentConfig, n_bars: &[f64]) -> Result<ScenarioResult> {
    fig2_like("fig2", cfg, n_bars)
}

/// Single-`n̄` splitting run (default `n̄ = 36`).
pub fn run_split(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    fig2_like("split", cfg, &[cfg.n_bar.unwrap_or(SPLIT_N_BAR)])
}

fn fig2_like(name: &str, cfg: &ExperimentConfig, n_bars: &[f64]) -> Result<ScenarioResult> {
    cfg.validate()?;
    let tl = Timeline::new(cfg);
    let t_i = cfg.interaction_time();
    let mut r = ScenarioResult::new(name, cfg);
    let mut ledger = Ledger::new();
    r.metric("t_i", t_i);
    r.say(format!("interaction time t_i = {:.2} us", t_i * 1e6));
    for &n_bar in n_bars {
        let label = format!("nbar{}", n_label(n_bar));
        let phi_plus = component_phase(cfg.omega, t_i, n_bar)?;
        r.metric(format!("{label}.phi_plus"), phi_plus);

        let reference = DensityOperator::from_field(&coherent(cfg, n_bar)?);
        let s = scan(cfg, &reference, n_bar, false, 1)?;
        record_peaks(&mut r, &format!("{label}.reference"), &s);
        r.scans.push((format!("reference_{label}"), s));

        let psi = a1_undamped(cfg, n_bar, None)?;
        let field = readout_field_pure(&psi, cfg.condition_on)?;
        let s = scan(cfg, &field, n_bar, false, 2)?;
        record_peaks(&mut r, &format!("{label}.undamped"), &s);
        r.say(format!(
            "n_bar = {n_bar}: Phi+ = {phi_plus:.3} rad, undamped centers [{}] rad",
            centers(&s)
        ));
        r.scans.push((format!("undamped_{label}"), s));

        if cfg.damping_enabled {
            let (decayed, _) = {
                let run = evolve_density(
                    &reference,
                    &Schedule::new(),
                    tl.f2,
                    &cfg.cavity_damping(),
                    step_options(cfg),
                )?;
                ledger.check(&run, "reference field decay")?;
                (run.state, ())
            };
            let s = scan(cfg, &decayed, n_bar, true, 1)?;
            record_peaks(&mut r, &format!("{label}.damped_reference"), &s);
            r.scans.push((format!("damped_reference_{label}"), s));

            let (run, _) = a1_damped(cfg, n_bar, None, tl.f2, None)?;
            ledger.check(&run, "A1 transit")?;
            let field = readout_field(&run.state, cfg.condition_on)?;
            let mean = field.mean_photon_number();
            let s = scan(cfg, &field, n_bar, true, 2)?;
            record_peaks(&mut r, &format!("{label}.damped"), &s);
            r.metric(format!("{label}.damped.mean_photons_at_readout"), mean);
            if let Some(sep) = s.separation() {
                let d2 = 4.0 * mean * (0.5 * sep).sin().powi(2);
                r.metric(format!("{label}.damped.effective_d2"), d2);
                r.say(format!(
                    "n_bar = {n_bar}: damped centers [{}] rad, separation {:.1} deg, effective d2 = {d2:.1}",
                    centers(&s),
                    sep.to_degrees()
                ));
            }
            r.scans.push((format!("damped_{label}"), s));
        }
    }
    ledger.record(&mut r);
    Ok(r)
}

/// Largest excess of `S_g` over the baseline near the mirror image of the
/// main peak, relative to the main peak amplitude.
pub fn secondary_peak_ratio(s: &PhaseScan) -> Option<f64> {
    let main = s.peaks.first()?;
    let baseline = s
        .phi_grid
        .iter()
        .zip(&s.s_g)
        .filter(|(phi, _)| wrap_phase(**phi - main.center).abs() > 4.0 * main.width)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let mirror = -main.center;
    let reach = (2.0 * main.width).max(2.0 * PI / s.phi_grid.len() as f64);
    let excess = s
        .phi_grid
        .iter()
        .zip(&s.s_g)
        .filter(|(phi, _)| wrap_phase(**phi - mirror).abs() <= reach)
        .map(|(_, v)| v - baseline)
        .fold(0.0f64, f64::max);
    Some(excess / main.amplitude)
}

/// Dipole-state preparation: single scan peak and frozen Rabi oscillation.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let n_bar = cfg.n_bar.unwrap_or(FIG3_N_BAR);
    let tl = Timeline::new(cfg);
    let t_i = cfg.interaction_time();
    let phi_plus = component_phase(cfg.omega, t_i, n_bar)?;
    let profile = cfg.profile();
    let mut r = ScenarioResult::new("fig3", cfg);
    let mut ledger = Ledger::new();
    r.metric("n_bar", n_bar);
    r.metric("phi_plus", phi_plus);
    let transit = 2.0 * tl.half_width;
    let grid: Vec<f64> = (0..cfg.trace_points)
        .map(|k| transit * k as f64 / (cfg.trace_points - 1) as f64)
        .collect();
    for (branch, tag) in [(Branch::Plus, "plus"), (Branch::Minus, "minus")] {
        let prepared = initial_joint(cfg, n_bar, Some(branch))?;
        let frozen = Trace::new(grid.clone(), rabi_trace(&prepared, &profile, &grid));
        r.metric(format!("{tag}.frozen_max_deviation"), frozen.max_deviation_from(0.5));
        r.traces.push((format!("undamped_{tag}"), frozen));

        let psi = evolve(&prepared, &profile, f64::INFINITY);
        let field = readout_field_pure(&psi, cfg.condition_on)?;
        let s = scan(cfg, &field, n_bar, false, 1)?;
        record_peaks(&mut r, &format!("{tag}.undamped"), &s);
        let secondary = secondary_peak_ratio(&s).unwrap_or(f64::NAN);
        r.metric(format!("{tag}.undamped.secondary_ratio"), secondary);
        r.say(format!(
            "{tag}: peak at [{}] rad (Phi+ = {phi_plus:.3}), secondary/main = {secondary:.3}",
            centers(&s)
        ));
        r.scans.push((format!("undamped_{tag}"), s));

        if cfg.damping_enabled {
            let sample = tl.f2 / (cfg.trace_points - 1) as f64;
            let (run, trace) = a1_damped(cfg, n_bar, Some(branch), tl.f2, Some(sample))?;
            ledger.check(&run, "prepared A1 transit")?;
            let inside: Vec<usize> = (0..trace.len())
                .filter(|&k| trace.t[k] >= tl.a1_entry && trace.t[k] <= tl.a1_exit)
                .collect();
            let dev = inside
                .iter()
                .map(|&k| (trace.p_g[k] - 0.5).abs())
                .fold(0.0, f64::max);
            r.metric(format!("{tag}.damped.frozen_max_deviation"), dev);
            r.traces.push((format!("damped_{tag}"), trace));
            let field = readout_field(&run.state, cfg.condition_on)?;
            let s = scan(cfg, &field, n_bar, true, 1)?;
            record_peaks(&mut r, &format!("{tag}.damped"), &s);
            r.metric(
                format!("{tag}.damped.secondary_ratio"),
                secondary_peak_ratio(&s).unwrap_or(f64::NAN),
            );
            r.scans.push((format!("damped_{tag}"), s));
        }
    }
    ledger.record(&mut r);
    Ok(r)
}

fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| end * k as f64 / (points - 1) as f64).collect()
}

/// One Rabi period at the mean photon number.
pub fn rabi_period(omega: f64, n_bar: f64) -> f64 {
    2.0 * PI / (omega * n_bar.sqrt())
}

/// Contrast below which the oscillation counts as collapsed.
pub const COLLAPSE_CONTRAST: f64 = 0.1;

/// Damped `P_g(t)` under constant coupling, with optional Stark events.
fn damped_constant_trace(
    cfg: &ExperimentConfig,
    initial: &JointState,
    duration: f64,
    events: &[(f64, PulseEvent)],
    ledger: &mut Ledger,
) -> Result<Trace> {
    let mut schedule = Schedule::new().with_window(CouplingWindow::constant(cfg.omega, 0.0, duration));
    for (t, e) in events {
        schedule = schedule.with_event(*t, *e);
    }
    let (mut t, mut p) = (Vec::new(), Vec::new());
    let run = evolve_density_observed(
        &DensityOperator::from_joint(initial),
        &schedule,
        duration,
        &cfg.cavity_damping(),
        step_options(cfg),
        Some(duration / (cfg.trace_points - 1) as f64),
        |time, r| {
            t.push(time);
            p.push(r.population(Level::Ground));
        },
    )?;
    ledger.check(&run, "constant-coupling evolution")?;
    Ok(Trace::new(t, p))
}

/// Rabi oscillation of an atom at rest in the field: collapse, spontaneous
/// revival, the component-expansion overlay and the classical-limit sweep.
pub fn run_collapse_revival(cfg: &ExperimentConfig, horizon: f64) -> Result<ScenarioResult> {
    cfg.validate()?;
    let n_bar = cfg.n_bar.unwrap_or(REVIVAL_N_BAR);
    let mut r = ScenarioResult::new("collapse_revival", cfg);
    let mut ledger = Ledger::new();
    let profile = CouplingProfile::constant(cfg.omega);
    let initial = initial_joint(cfg, n_bar, None)?;
    let grid = uniform_grid(horizon, cfg.trace_points);
    let exact = Trace::new(grid.clone(), rabi_trace(&initial, &profile, &grid));
    let p = CoherentParams::from_mean(n_bar);
    let truncation = initial.truncation();
    let approx = grid
        .iter()
        .map(|&t| approx_pg(&p, cfg.omega, t, truncation))
        .collect::<Result<Vec<f64>>>()?;
    let approx = Trace::new(grid.clone(), approx);

    let window = rabi_period(cfg.omega, n_bar);
    let predicted = 4.0 * PI * n_bar.sqrt() / cfg.omega;
    r.metric("n_bar", n_bar);
    r.metric("rabi_period", window);
    r.metric("predicted_revival_time", predicted);
    r.metric(
        "approx_max_error",
        exact.p_g.iter().zip(&approx.p_g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
    );
    let report = |r: &mut ScenarioResult, tag: &str, tr: &Trace| {
        let collapse = tr.collapse_time(window, COLLAPSE_CONTRAST);
        r.metric(format!("{tag}.collapse_time"), collapse.unwrap_or(f64::NAN));
        let after = collapse.map_or(0.5 * predicted, |c| c + window);
        if let Some((t, c)) = tr.revival(window, after) {
            r.metric(format!("{tag}.revival_time"), t);
            r.metric(format!("{tag}.revival_contrast"), c);
            r.say(format!(
                "{tag}: collapse at {:.1} us, revival at {:.1} us (predicted {:.1} us), contrast {c:.3}",
                collapse.unwrap_or(f64::NAN) * 1e6,
                t * 1e6,
                predicted * 1e6
            ));
        }
    };
    report(&mut r, "undamped", &exact);
    if cfg.damping_enabled {
        let damped = damped_constant_trace(cfg, &initial, horizon, &[], &mut ledger)?;
        report(&mut r, "damped", &damped);
        r.traces.push(("damped".into(), damped));
    }
    r.traces.push(("undamped".into(), exact));
    r.traces.push(("approx".into(), approx));

    let base = ClassicalLimitBase {
        omega: cfg.omega,
        n_bar,
        t_fixed: cfg.interaction_time(),
    };
    for s in [1.0, 2.0, 4.0] {
        let c = classical_limit_check(s, &base)?;
        let tag = format!("classical.s{}", s as u32);
        r.metric(format!("{tag}.rabi_frequency"), c.rabi_frequency);
        r.metric(format!("{tag}.collapse_time"), c.collapse_time);
        r.metric(format!("{tag}.phi_plus"), c.phi_plus);
        r.metric(format!("{tag}.revival_time"), 4.0 * PI * c.n_bar.sqrt() / c.omega);
    }
    ledger.record(&mut r);
    Ok(r)
}

fn time_label(t: f64) -> String {
    format!("T{}us", n_label((t * 1e6 * 1000.0).round() / 1000.0))
}

/// Sign-flip echo at each of `echo_times`.
pub fn run_echo(cfg: &ExperimentConfig, echo_times: &[f64]) -> Result<ScenarioResult> {
    cfg.validate()?;
    let n_bar = cfg.n_bar.unwrap_or(ECHO_N_BAR);
    let mut r = ScenarioResult::new("echo", cfg);
    let mut ledger = Ledger::new();
    let profile = CouplingProfile::constant(cfg.omega);
    let initial = initial_joint(cfg, n_bar, None)?;
    let window = rabi_period(cfg.omega, n_bar);
    r.metric("n_bar", n_bar);
    for &t_echo in echo_times {
        let label = time_label(t_echo);
        let report = |r: &mut ScenarioResult, tag: &str, tr: &Trace| {
            let key = format!("{label}.{tag}");
            let collapse = tr.collapse_time(window, COLLAPSE_CONTRAST);
            r.metric(
                format!("{key}.collapsed_before_echo"),
                if collapse.is_some_and(|c| c < t_echo) { 1.0 } else { 0.0 },
            );
            if let Some((t, c)) = tr.revival(window, 1.5 * t_echo) {
                r.metric(format!("{key}.revival_time"), t);
                r.metric(format!("{key}.revival_contrast"), c);
                r.say(format!(
                    "T = {:.1} us, {tag}: revival at {:.2} us (2T = {:.1} us), contrast {c:.3}",
                    t_echo * 1e6,
                    t * 1e6,
                    2e6 * t_echo
                ));
            }
        };
        let undamped = echo_sequence(&initial, &profile, t_echo, cfg.trace_points);
        report(&mut r, "undamped", &undamped);
        r.traces.push((format!("undamped_{label}"), undamped));
        if cfg.damping_enabled {
            let damped = damped_constant_trace(
                cfg,
                &initial,
                2.5 * t_echo,
                &[(t_echo, PulseEvent::Stark(PI))],
                &mut ledger,
            )?;
            report(&mut r, "damped", &damped);
            r.traces.push((format!("damped_{label}"), damped));
        }
    }
    ledger.record(&mut r);
    Ok(r)
}

/// `⟨a²⟩` of a field operator.
fn mean_a_squared(rho: &DensityOperator) -> C64 {
    let m = rho.matrix();
    let dim = rho.truncation().dim();
    (0..dim.saturating_sub(2))
        .map(|n| m[[n + 2, n]] * (((n + 1) * (n + 2)) as f64).sqrt())
        .sum()
}

/// Interference-fringe amplitude of a two-component cat.
///
/// The lobe midpoint is `⟨a⟩` and the separation `δ = 2√(⟨a²⟩ − ⟨a⟩²)`.
/// Along the perpendicular through the midpoint the fringe term is
/// `e^{−2s²} cos(2|δ|s + c)`; the Gaussian factor is divided out and the
/// maximum over one fringe period is returned.
pub fn fringe_amplitude(rho: &DensityOperator) -> Result<f64> {
    let mid = rho.mean_field();
    let delta = 2.0 * (mean_a_squared(rho) - mid * mid).sqrt();
    let size = delta.norm();
    if size < 1e-9 {
        return Err(Error::InvalidParameter("field has no separated components".into()));
    }
    let u = C64::new(0.0, 1.0) * delta / size;
    let period = PI / size;
    let points = 41;
    let mut best = 0.0f64;
    for k in 0..points {
        let s = -0.5 * period + period * k as f64 / (points - 1) as f64;
        let w = wigner_point(FieldInput::Mixed(rho), mid + u * s)?;
        best = best.max(w.abs() * (2.0 * s * s).exp());
    }
    Ok(best)
}

/// Fringe decay of an even cat `|αe^{−iΦ⁺}⟩ + |αe^{iΦ⁺}⟩` under damping.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeDecay {
    pub n_bar: f64,
    pub interaction_time: f64,
    pub d_squared: f64,
    /// `2T_cav/d²`.
    pub formula: f64,
    /// Fitted `1/e` time of the fringe amplitude.
    pub fitted: f64,
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Integrates the ideal cat for `2T_cav/d²` and fits `ln A(t)` with a line.
pub fn fringe_decay(
    omega: f64,
    t_i: f64,
    n_bar: f64,
    t_cav: f64,
    damping: &DampingParams,
    truncation: Truncation,
) -> Result<FringeDecay> {
    let m = cat_metrics(omega, t_i, n_bar, t_cav)?;
    if !m.decoherence_time.is_finite() {
        return Err(Error::InvalidParameter("components do not separate".into()));
    }
    let alpha = n_bar.sqrt();
    let a = coherent_state(&CoherentParams::new(C64::from_polar(alpha, -m.phi_plus)), truncation)?;
    let b = coherent_state(&CoherentParams::new(C64::from_polar(alpha, m.phi_plus)), truncation)?;
    let cat = FieldState::from_amplitudes(a.amplitudes() + b.amplitudes(), truncation)?.normalized();
    let duration = m.decoherence_time;
    let mut times = Vec::new();
    let mut amplitudes = Vec::new();
    let mut failure = None;
    let run = evolve_density_observed(
        &DensityOperator::from_field(&cat),
        &Schedule::new(),
        duration,
        damping,
        StepOptions::default(),
        Some(duration / (FRINGE_SAMPLES - 1) as f64),
        |t, rho| match fringe_amplitude(rho) {
            Ok(v) => {
                times.push(t);
                amplitudes.push(v);
            }
            Err(e) => failure = Some(e),
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    run.state.check_physical("cat decay")?;
    let logs: Vec<f64> = amplitudes.iter().map(|a| a.ln()).collect();
    let (slope, _) = linear_fit(&times, &logs);
    Ok(FringeDecay {
        n_bar,
        interaction_time: t_i,
        d_squared: m.d_squared,
        formula: m.decoherence_time,
        fitted: -1.0 / slope,
        times,
        amplitudes,
    })
}

/// Lobe peak and fringe extremum of a conditioned field, by symmetry about
/// the real axis: the lobes are the largest values above and below it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatPicture {
    pub lobe_peak: f64,
    pub fringe_extremum: f64,
}

pub fn cat_picture(grid: &WignerGrid, field: &DensityOperator) -> Result<CatPicture> {
    let lobe_peak = grid.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mid = field.mean_field();
    let delta = 2.0 * (mean_a_squared(field) - mid * mid).sqrt();
    let size = delta.norm().max(1e-9);
    let u = C64::new(0.0, 1.0) * delta / size;
    let period = PI / size;
    let mut fringe = 0.0f64;
    for k in 0..81 {
        let s = -period + 2.0 * period * k as f64 / 80.0;
        fringe = fringe.max(wigner_point(FieldInput::Mixed(field), mid + u * s)?.abs());
    }
    Ok(CatPicture {
        lobe_peak,
        fringe_extremum: fringe,
    })
}

/// Wigner function of the damped field, A₁ detected in `g`, `wigner_delay`
/// after A₁ crosses the axis.
pub fn run_wigner(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut r = ScenarioResult::new("wigner", cfg);
    wigner_snapshot(cfg, &mut r)?;
    Ok(r)
}

fn wigner_snapshot(cfg: &ExperimentConfig, r: &mut ScenarioResult) -> Result<()> {
    let n_bar = cfg.n_bar.unwrap_or(CAT_N_BAR);
    let tl = Timeline::new(cfg);
    let mut ledger = Ledger::new();
    let at = tl.a1_crossing + cfg.wigner_delay;
    let field = if cfg.damping_enabled {
        let (run, _) = a1_damped(cfg, n_bar, None, at, None)?;
        ledger.check(&run, "A1 transit to the Wigner snapshot")?;
        conditional_field_state(&run.state, Level::Ground)?
    } else {
        let psi = a1_undamped(cfg, n_bar, None)?;
        DensityOperator::from_field(&conditional_field_state_pure(&psi, Level::Ground)?)
    };
    let extent = if cfg.wigner_extent > 0.0 {
        cfg.wigner_extent
    } else {
        field.mean_photon_number().sqrt() + 3.0
    };
    let axis = symmetric_axis(extent, cfg.wigner_points);
    let grid = wigner(FieldInput::Mixed(&field), &axis, &axis)?;
    let pic = cat_picture(&grid, &field)?;
    r.metric("wigner.n_bar", n_bar);
    r.metric("wigner.snapshot_time_after_crossing", cfg.wigner_delay);
    r.metric("wigner.lobe_peak", pic.lobe_peak);
    r.metric("wigner.fringe_extremum", pic.fringe_extremum);
    r.metric("wigner.fringe_ratio", pic.fringe_extremum / pic.lobe_peak);
    r.metric("wigner.integral", grid.integral());
    r.say(format!(
        "Wigner (A1 in g, {:.0} us after crossing): lobe peak {:.3}, fringe extremum {:.3} (ratio {:.2})",
        cfg.wigner_delay * 1e6,
        pic.lobe_peak,
        pic.fringe_extremum,
        pic.fringe_extremum / pic.lobe_peak
    ));
    r.wigners.push((format!("nbar{}", n_label(n_bar)), grid));
    ledger.record(r);
    Ok(())
}

/// Cat size tables for `t_a` and `t_b`, fringe-decay fits of the ideal cats
/// and the damped Wigner snapshot.
pub fn run_cat_metrics(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut r = ScenarioResult::new("cat", cfg);
    let t_a = PI.sqrt() * cfg.waist / VELOCITY_A;
    let t_b = PI.sqrt() * cfg.waist / VELOCITY_B;
    r.metric("t_a", t_a);
    r.metric("t_b", t_b);
    for (tag, t) in [("ta", t_a), ("tb", t_b)] {
        let d2: Vec<f64> = CAT_SWEEP
            .map(|n| cat_metrics(cfg.omega, t, n as f64, cfg.t_cav).map(|m| m.d_squared))
            .collect::<Result<_>>()?;
        for (n, v) in CAT_SWEEP.zip(&d2) {
            r.metric(format!("d2.{tag}.nbar{n}"), *v);
        }
        let lo = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d2.iter().copied().fold(0.0, f64::max);
        r.metric(format!("d2.{tag}.min"), lo);
        r.metric(format!("d2.{tag}.max"), hi);
        r.metric(format!("d2.{tag}.ratio"), hi / lo);
        r.say(format!(
            "d2 at t_i = {:.1} us over n_bar 15..36: {lo:.2} .. {hi:.2} (max/min {:.3})",
            t * 1e6,
            hi / lo
        ));
    }
    let damping = cfg.cavity_damping();
    let n_a = cfg.n_bar.unwrap_or(CAT_N_BAR);
    for (tag, t, n_bar) in [("ta", t_a, n_a), ("tb", t_b, CAT_B_N_BAR)] {
        let fit = fringe_decay(cfg.omega, t, n_bar, cfg.t_cav, &damping, cfg.truncation_for(n_bar)?)?;
        r.metric(format!("decoherence.{tag}.n_bar"), n_bar);
        r.metric(format!("decoherence.{tag}.d2"), fit.d_squared);
        r.metric(format!("decoherence.{tag}.formula"), fit.formula);
        r.metric(format!("decoherence.{tag}.fitted"), fit.fitted);
        r.say(format!(
            "cat n_bar = {n_bar}, t_i = {:.1} us: d2 = {:.2}, fringe decay {:.1} us (2T_cav/d2 = {:.1} us)",
            t * 1e6,
            fit.d_squared,
            fit.fitted * 1e6,
            fit.formula * 1e6
        ));
    }
    wigner_snapshot(cfg, &mut r)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            phi_points: 96,
            trace_points: 401,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn timeline_is_ordered() {
        let c = ExperimentConfig::default().with("a2_delay", "2e-6").unwrap();
        let tl = Timeline::new(&c);
        assert!(0.0 < tl.a1_entry && tl.a1_entry < tl.a1_crossing && tl.a1_crossing < tl.a1_exit);
        assert!(tl.a1_exit < tl.f2 && tl.f2 < tl.a2_entry && tl.a2_entry < tl.a2_crossing);
        assert!((tl.f2 - tl.a1_exit - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 0.5).collect();
        let (a, b) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }

    #[test]
    fn labels() {
        assert_eq!(n_label(29.0), "29");
        assert_eq!(n_label(12.5), "12p5");
        assert_eq!(time_label(20e-6), "T20us");
    }

    #[test]
    fn undamped_split_tracks_phase_law() {
        let c = quick().with("damping_enabled", "false").unwrap();
        let r = run_split(&c).unwrap();
        let phi = r.get("nbar36.phi_plus").unwrap();
        let lo = r.get("nbar36.undamped.peak0.center").unwrap();
        let hi = r.get("nbar36.undamped.peak1.center").unwrap();
        assert!((hi - phi).abs() < 0.02 && (lo + phi).abs() < 0.02, "{lo} {hi} vs {phi}");
        let reference = r.get("nbar36.reference.peak0.center").unwrap();
        assert!(reference.abs() < 0.01);
    }

    #[test]
    fn ideal_cat_fringes_decay_at_the_formula_rate() {
        let fit = fringe_decay(3e5, 31.75e-6, 25.0, 850e-6, &DampingParams::zero_temperature(850e-6), Truncation::for_mean(25.0)).unwrap();
        assert!((fit.fitted / fit.formula - 1.0).abs() < 0.15, "{} vs {}", fit.fitted, fit.formula);
        assert!(fit.amplitudes.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fringe_amplitude_of_fresh_cat() {
        let t = Truncation::for_mean(16.0);
        let a = coherent_state(&CoherentParams::new(C64::new(0.0, 4.0)), t).unwrap();
        let b = coherent_state(&CoherentParams::new(C64::new(0.0, -4.0)), t).unwrap();
        let cat = FieldState::from_amplitudes(a.amplitudes() + b.amplitudes(), t).unwrap().normalized();
        let amp = fringe_amplitude(&DensityOperator::from_field(&cat)).unwrap();
        // Cross term (2/π)·2/N² with N² ≈ 2.
        assert!((amp - 2.0 / PI).abs() < 2e-3, "{amp}");
    }

    #[test]
    fn scenario_output_is_deterministic() {
        let c = quick().with("damping_enabled", "false").unwrap();
        let a = run_fig3(&c).unwrap().files();
        let b = run_fig3(&c).unwrap().files();
        assert_eq!(a, b);
    }
}
