//! Quick run of the invariants of every module, for `cqed selftest`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::approx::{approx_pg, classical_limit_check, component_phase, ClassicalLimitBase};
use crate::error::Result;
use crate::experiments::{run_fig3, ExperimentConfig};
use crate::fit::extract_peaks;
use crate::fock::{
    coherent_overlap_magnitude, coherent_state, overlap, photon_statistics, CoherentParams, Displacement,
    Truncation,
};
use crate::jc::{evolve, rabi_trace, CouplingProfile, JointState, Level};
use crate::lindblad::{
    evolve_density, CouplingWindow, DampingParams, DensityOperator, Schedule, StepOptions,
};
use crate::linalg::dagger;
use crate::measurement::{
    homodyne_scan, phase_distribution, phase_grid, symmetric_axis, wigner, wigner_point, FieldInput, PhaseScan,
    Probe,
};

const OMEGA: f64 = 3e5;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String)>;

fn within(value: f64, expected: f64, tol: f64) -> (bool, String) {
    let err = (value - expected).abs();
    (err <= tol, format!("{value:.10e} vs {expected:.10e} (|diff| {err:.2e}, tol {tol:.0e})"))
}

fn below(value: f64, limit: f64) -> (bool, String) {
    (value < limit, format!("{value:.3e} < {limit:.0e}"))
}

fn coherent(n_bar: f64) -> Result<crate::fock::FieldState> {
    coherent_state(&CoherentParams::from_mean(n_bar), Truncation::for_mean(n_bar))
}

fn coherent_norm() -> Outcome {
    Ok(within(coherent(36.0)?.norm(), 1.0, 1e-8))
}

fn overlap_closed_form() -> Outcome {
    let t = Truncation::for_mean(36.0);
    let a = coherent_state(&CoherentParams::new(C64::new(6.0, 0.0)), t)?;
    let b = coherent_state(&CoherentParams::new(C64::from_polar(6.0, 0.4)), t)?;
    Ok(within(overlap(&a, &b)?.norm(), coherent_overlap_magnitude(36.0, 0.4), 1e-8))
}

fn displacement_unitary() -> Outcome {
    let t = Truncation::new(60)?;
    let d = Displacement::new(C64::new(1.5, -0.5), t);
    let id = dagger(d.matrix()).dot(d.matrix());
    let worst = (0..20)
        .flat_map(|i| (0..20).map(move |j| (i, j)))
        .map(|(i, j)| (id[[i, j]] - if i == j { 1.0 } else { 0.0 }).norm())
        .fold(0.0, f64::max);
    Ok(below(worst, 1e-10))
}

fn poisson_statistics() -> Outcome {
    let s = photon_statistics(&coherent(29.0)?);
    let err = (s.mean - 29.0).abs().max((s.variance - 29.0).abs());
    Ok(below(err, 1e-6))
}

fn jc_conserves_norm_and_excitation() -> Outcome {
    let psi = JointState::product(Level::Ground, &coherent(15.0)?);
    let out = evolve(&psi, &CouplingProfile::constant(OMEGA), 40e-6);
    let err = (out.norm() - 1.0).abs().max((out.excitation_number() - psi.excitation_number()).abs());
    Ok(below(err, 1e-10))
}

fn phase_law() -> Outcome {
    Ok(within(component_phase(OMEGA, 32e-6, 36.0)?, 0.4, 1e-12))
}

fn expansion_matches_exact() -> Outcome {
    let field = coherent(36.0)?;
    let psi = JointState::product(Level::Ground, &field);
    let grid: Vec<f64> = (0..=60).map(|k| k as f64 * 1e-6).collect();
    let exact = rabi_trace(&psi, &CouplingProfile::constant(OMEGA), &grid);
    let p = CoherentParams::from_mean(36.0);
    let mut worst = 0.0f64;
    for (t, e) in grid.iter().zip(&exact) {
        worst = worst.max((approx_pg(&p, OMEGA, *t, field.truncation())? - e).abs());
    }
    Ok(below(worst, 0.05))
}

fn classical_limit() -> Outcome {
    let base = ClassicalLimitBase {
        omega: OMEGA,
        n_bar: 15.0,
        t_fixed: 32e-6,
    };
    let one = classical_limit_check(1.0, &base)?;
    let two = classical_limit_check(2.0, &base)?;
    let invariant = (two.rabi_frequency / one.rabi_frequency - 1.0).abs();
    let growth = (two.collapse_time / one.collapse_time / 2.0 - 1.0).abs();
    Ok((
        invariant < 1e-12 && growth < 0.1,
        format!("Omega sqrt(n) drift {invariant:.1e}, collapse growth off by {:.1}%", growth * 100.0),
    ))
}

fn lindblad_without_damping_is_unitary() -> Outcome {
    let t = Truncation::for_mean(9.0);
    let field = coherent_state(&CoherentParams::from_mean(9.0), t)?;
    let psi = JointState::product(Level::Ground, &field);
    let schedule = Schedule::new().with_window(CouplingWindow::constant(OMEGA, 0.0, 10e-6));
    let run = evolve_density(
        &DensityOperator::from_joint(&psi),
        &schedule,
        10e-6,
        &DampingParams::none(),
        StepOptions::default(),
    )?;
    let exact = DensityOperator::from_joint(&evolve(&psi, &CouplingProfile::constant(OMEGA), 10e-6));
    Ok(below(run.state.trace_distance(&exact)?, 1e-6))
}

fn damped_state_stays_physical() -> Outcome {
    let t = Truncation::for_mean(9.0);
    let field = coherent_state(&CoherentParams::from_mean(9.0), t)?;
    let psi = JointState::product(Level::Ground, &field);
    let schedule = Schedule::new().with_window(CouplingWindow::constant(OMEGA, 0.0, 20e-6));
    let run = evolve_density(
        &DensityOperator::from_joint(&psi),
        &schedule,
        20e-6,
        &DampingParams::thermal(850e-6, 0.6, 51.1e9),
        StepOptions::default(),
    )?;
    run.state.check_physical("selftest")?;
    Ok(below(run.report.trace_drift, 1e-6))
}

fn field_amplitude_decays() -> Outcome {
    let rho = DensityOperator::from_field(&coherent(16.0)?);
    let run = evolve_density(
        &rho,
        &Schedule::new(),
        100e-6,
        &DampingParams::zero_temperature(850e-6),
        StepOptions::default(),
    )?;
    Ok(within(run.state.mean_field().re, 4.0 * (-0.5 * 100e-6 / 850e-6f64).exp(), 1e-6))
}

fn wigner_vacuum() -> Outcome {
    let v = crate::fock::FieldState::vacuum(Truncation::new(10)?);
    Ok(within(wigner_point(FieldInput::Pure(&v), C64::new(0.0, 0.0))?, 2.0 / PI, 1e-6))
}

fn wigner_normalized() -> Outcome {
    let s = coherent_state(&CoherentParams::new(C64::new(1.0, 1.0)), Truncation::for_amplitude(2f64.sqrt()))?;
    let axis = symmetric_axis(5.0, 101);
    let grid = wigner(FieldInput::Pure(&s), &axis, &axis)?;
    let bound = grid.max_abs() <= 2.0 / PI + 1e-6;
    let (ok, detail) = within(grid.integral(), 1.0, 0.02);
    Ok((ok && bound, detail))
}

fn phase_distribution_normalized() -> Outcome {
    let s = coherent(6.0)?;
    let grid = phase_grid(256);
    let p = phase_distribution(FieldInput::Pure(&s), &grid)?;
    Ok(within(p.iter().sum::<f64>() * 2.0 * PI / 256.0, 1.0, 1e-6))
}

fn scan_symmetry() -> Outcome {
    let field = coherent(15.0)?;
    let psi = evolve(&JointState::product(Level::Ground, &field), &CouplingProfile::constant(OMEGA), 20e-6);
    let rho = DensityOperator::from_field_ensemble(&[psi.field_component(Level::Excited), psi.field_component(Level::Ground)])?;
    let probe = Probe::transit(CouplingProfile::gaussian(OMEGA, 6e-3, 335.0));
    let grid = phase_grid(64);
    let s = homodyne_scan(FieldInput::Mixed(&rho), 15f64.sqrt(), &probe, &grid)?;
    let worst = (1..32).map(|k| (s.s_g[32 + k] - s.s_g[32 - k]).abs()).fold(0.0, f64::max);
    Ok(below(worst, 1e-9))
}

fn fit_recovers_synthetic_peak() -> Outcome {
    let grid = phase_grid(128);
    let y = grid.iter().map(|f| 0.1 + 0.6 * (-0.5 * (f - 0.3) * (f - 0.3) / 0.04).exp()).collect();
    let fit = extract_peaks(&PhaseScan::new(grid, y), 1)?;
    Ok(within(fit.peaks[0].center, 0.3, 1e-4))
}

fn config_round_trip() -> Outcome {
    let c = ExperimentConfig::parse("n_bar = 27\nt_i = 52e-6\ncondition_on = g\n")?;
    let text = c.to_text();
    let back = ExperimentConfig::parse(&text)?;
    Ok((back == c && back.to_text() == text, "serialize -> parse -> serialize".into()))
}

fn scenario_determinism() -> Outcome {
    let c = ExperimentConfig {
        damping_enabled: false,
        phi_points: 64,
        trace_points: 101,
        ..ExperimentConfig::default()
    };
    let a = run_fig3(&c)?.files();
    let b = run_fig3(&c)?.files();
    Ok((a == b, format!("{} files compared byte for byte", a.len())))
}

/// Runs every check; failures are reported, not raised.
pub fn run_selftest() -> Vec<Check> {
    let checks: Vec<(&'static str, &'static str, fn() -> Outcome)> = vec![
        ("fock", "coherent state normalized to 1e-8", coherent_norm),
        ("fock", "coherent overlap matches closed form to 1e-8", overlap_closed_form),
        ("fock", "displacement is unitary on the low block", displacement_unitary),
        ("fock", "Poissonian mean and variance", poisson_statistics),
        ("jc", "norm and excitation number conserved", jc_conserves_norm_and_excitation),
        ("approx", "component phase law", phase_law),
        ("approx", "expansion within 0.05 of exact P_g (n=36, t<=60us)", expansion_matches_exact),
        ("approx", "classical limit scaling", classical_limit),
        ("lindblad", "kappa = 0 agrees with unitary evolution", lindblad_without_damping_is_unitary),
        ("lindblad", "damped thermal state stays physical", damped_state_stays_physical),
        ("lindblad", "<a> decays as exp(-kappa t / 2)", field_amplitude_decays),
        ("measurement", "vacuum Wigner at origin is 2/pi", wigner_vacuum),
        ("measurement", "Wigner integrates to 1 and is bounded", wigner_normalized),
        ("measurement", "phase distribution normalized", phase_distribution_normalized),
        ("measurement", "unconditioned scan is symmetric", scan_symmetry),
        ("fit", "single Gaussian recovered", fit_recovers_synthetic_peak),
        ("experiments", "config round trip", config_round_trip),
        ("experiments", "scenario output deterministic", scenario_determinism),
    ];
    checks
        .into_iter()
        .map(|(module, name, f)| {
            let (passed, detail) = match f() {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            Check {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {} ({})", c.module, c.name, c.detail);
        }
    }
}
