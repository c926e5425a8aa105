//! Resonant Jaynes–Cummings dynamics in the interaction picture.
//!
//! The Hamiltonian `H/ħ = (Ω/2)(a†σ⁻ + aσ⁺)` only couples the pairs
//! `{|g,n+1⟩, |e,n⟩}`, so evolution is a set of independent 2×2 rotations.
//! With the coupling axis fixed in time, a pulse of any shape acts through
//! its area `∫Ω(t)dt` alone.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FieldState, Truncation};
use crate::trace::Trace;

/// Number of `w/v` units on each side of the axis crossing treated as the
/// edge of the Gaussian mode.
pub const MODE_EXTENT: f64 = 3.0;

/// Smallest mean photon number for which dipole-state preparation is
/// attempted.
pub const MIN_PREPARATION_FIELD: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Excited,
    Ground,
}

impl Level {
    /// Position of the level block in the joint basis (`e → 0`, `g → 1`).
    pub fn index(self) -> usize {
        match self {
            Level::Excited => 0,
            Level::Ground => 1,
        }
    }
}

/// Which of the two rotating dipole states / field components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Pure atom + field state on `{e, g} ⊗ {|0⟩ … |n_max⟩}`.
///
/// Amplitudes are stored level-major: `index(level, n) = level.index() *
/// (n_max + 1) + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    amplitudes: Array1<C64>,
    truncation: Truncation,
}

impl JointState {
    pub fn product(level: Level, field: &FieldState) -> Self {
        let t = field.truncation();
        let mut amplitudes = Array1::zeros(2 * t.dim());
        let offset = level.index() * t.dim();
        for (n, z) in field.amplitudes().iter().enumerate() {
            amplitudes[offset + n] = *z;
        }
        Self {
            amplitudes,
            truncation: t,
        }
    }

    /// Product of an atomic superposition `[c_e, c_g]` with a field state.
    pub fn product_superposition(atom: [C64; 2], field: &FieldState) -> Self {
        let t = field.truncation();
        let mut amplitudes = Array1::zeros(2 * t.dim());
        for (n, z) in field.amplitudes().iter().enumerate() {
            amplitudes[n] = atom[0] * z;
            amplitudes[t.dim() + n] = atom[1] * z;
        }
        Self {
            amplitudes,
            truncation: t,
        }
    }

    pub fn from_amplitudes(amplitudes: Array1<C64>, truncation: Truncation) -> Result<Self> {
        if amplitudes.len() != 2 * truncation.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * truncation.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            truncation,
        })
    }

    pub fn index(&self, level: Level, n: usize) -> usize {
        level.index() * self.truncation.dim() + n
    }

    pub fn amplitude(&self, level: Level, n: usize) -> C64 {
        self.amplitudes[self.index(level, n)]
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            self.amplitudes.mapv_inplace(|z| z / norm);
        }
        self
    }

    pub fn population(&self, level: Level) -> f64 {
        let dim = self.truncation.dim();
        let offset = level.index() * dim;
        self.amplitudes
            .iter()
            .skip(offset)
            .take(dim)
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// Unnormalized field amplitudes attached to one atomic level.
    pub fn field_component(&self, level: Level) -> FieldState {
        let dim = self.truncation.dim();
        let offset = level.index() * dim;
        let amps = Array1::from_shape_fn(dim, |n| self.amplitudes[offset + n]);
        FieldState::from_amplitudes(amps, self.truncation).expect("matching dimension")
    }

    /// Field amplitudes left after projecting the atom on `⟨χ|`, where
    /// `chi = [c_e, c_g]`. Unnormalized.
    pub fn project_atom(&self, chi: [C64; 2]) -> FieldState {
        let dim = self.truncation.dim();
        let amps = Array1::from_shape_fn(dim, |n| {
            chi[0].conj() * self.amplitudes[n] + chi[1].conj() * self.amplitudes[dim + n]
        });
        FieldState::from_amplitudes(amps, self.truncation).expect("matching dimension")
    }

    /// Reduced atomic density matrix in the `(e, g)` basis.
    pub fn atom_density(&self) -> [[C64; 2]; 2] {
        let e = self.field_component(Level::Excited);
        let g = self.field_component(Level::Ground);
        let inner = |x: &FieldState, y: &FieldState| -> C64 {
            x.amplitudes()
                .iter()
                .zip(y.amplitudes().iter())
                .map(|(a, b)| a * b.conj())
                .sum()
        };
        [[inner(&e, &e), inner(&e, &g)], [inner(&g, &e), inner(&g, &g)]]
    }

    /// `⟨a†a + |e⟩⟨e|⟩`.
    pub fn excitation_number(&self) -> f64 {
        let dim = self.truncation.dim();
        (0..dim)
            .map(|n| {
                let pe = self.amplitudes[n].norm_sqr();
                let pg = self.amplitudes[dim + n].norm_sqr();
                (n as f64 + 1.0) * pe + n as f64 * pg
            })
            .sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &JointState) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CouplingKind {
    Constant,
    /// Atom crossing a Gaussian mode of waist `waist` (m) at `velocity` (m/s).
    GaussianMode { waist: f64, velocity: f64 },
}

/// Time dependence of the vacuum Rabi coupling seen by one atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    /// Peak vacuum Rabi angular frequency Ω (rad/s).
    pub omega: f64,
    pub kind: CouplingKind,
}

impl CouplingProfile {
    pub fn constant(omega: f64) -> Self {
        Self {
            omega,
            kind: CouplingKind::Constant,
        }
    }

    pub fn gaussian(omega: f64, waist: f64, velocity: f64) -> Self {
        Self {
            omega,
            kind: CouplingKind::GaussianMode { waist, velocity },
        }
    }

    /// Effective interaction time `√π w / v` of a Gaussian transit.
    pub fn interaction_time(&self) -> Option<f64> {
        match self.kind {
            CouplingKind::Constant => None,
            CouplingKind::GaussianMode { waist, velocity } => Some(PI.sqrt() * waist / velocity),
        }
    }

    /// Half-width of the transit window around the axis crossing.
    pub fn transit_half_width(&self) -> Option<f64> {
        match self.kind {
            CouplingKind::Constant => None,
            CouplingKind::GaussianMode { waist, velocity } => Some(MODE_EXTENT * waist / velocity),
        }
    }

    /// Coupling at time `t`, measured from the axis crossing for a Gaussian mode.
    pub fn rate(&self, t: f64) -> f64 {
        match self.kind {
            CouplingKind::Constant => self.omega,
            CouplingKind::GaussianMode { waist, velocity } => {
                let x = velocity * t / waist;
                self.omega * (-x * x).exp()
            }
        }
    }

    /// `∫_{t0}^{t1} Ω(t) dt` with Gaussian times relative to the axis crossing.
    pub fn area_between(&self, t0: f64, t1: f64) -> f64 {
        match self.kind {
            CouplingKind::Constant => self.omega * (t1 - t0),
            CouplingKind::GaussianMode { waist, velocity } => {
                let ti = PI.sqrt() * waist / velocity;
                let s = velocity / waist;
                0.5 * self.omega * ti * (libm::erf(s * t1) - libm::erf(s * t0))
            }
        }
    }

    /// Pulse area over `duration`. A Gaussian window is centred on the axis
    /// crossing; `f64::INFINITY` gives the full transit area `Ω t_i`.
    pub fn area(&self, duration: f64) -> f64 {
        match self.kind {
            CouplingKind::Constant => self.omega * duration,
            CouplingKind::GaussianMode { .. } => {
                if duration.is_infinite() {
                    self.omega * self.interaction_time().unwrap()
                } else {
                    self.area_between(-0.5 * duration, 0.5 * duration)
                }
            }
        }
    }

    /// Pulse area accumulated `t` seconds after the start of the interaction.
    /// A Gaussian transit starts at the mode edge.
    pub fn area_since_entry(&self, t: f64) -> f64 {
        match self.transit_half_width() {
            None => self.omega * t,
            Some(h) => self.area_between(-h, -h + t),
        }
    }
}

/// Rotation of the pair `(|g,n+1⟩, |e,n⟩)` by `θ = area·√(n+1)/2`.
pub fn evolve_block(_n: usize, theta: f64) -> [[C64; 2]; 2] {
    let c = C64::new(theta.cos(), 0.0);
    let s = C64::new(0.0, -theta.sin());
    [[c, s], [s, c]]
}

/// Applies the resonant evolution for a given pulse area.
pub fn evolve_by_area(s: &JointState, area: f64) -> JointState {
    let dim = s.truncation().dim();
    let mut out = s.amplitudes().clone();
    for n in 0..dim - 1 {
        let theta = 0.5 * area * ((n + 1) as f64).sqrt();
        let u = evolve_block(n, theta);
        let ig = dim + n + 1;
        let ie = n;
        let (g, e) = (s.amplitudes()[ig], s.amplitudes()[ie]);
        out[ig] = u[0][0] * g + u[0][1] * e;
        out[ie] = u[1][0] * g + u[1][1] * e;
    }
    JointState::from_amplitudes(out, s.truncation()).expect("same dimension")
}

/// Evolves `s` for `duration` seconds under `profile` (see
/// [`CouplingProfile::area`] for the Gaussian window convention).
pub fn evolve(s: &JointState, profile: &CouplingProfile, duration: f64) -> JointState {
    evolve_by_area(s, profile.area(duration))
}

/// `P_g(t)` on a time grid measured from the start of the interaction.
pub fn rabi_trace(initial: &JointState, profile: &CouplingProfile, t_grid: &[f64]) -> Vec<f64> {
    t_grid
        .par_iter()
        .map(|&t| evolve_by_area(initial, profile.area_since_entry(t)).population(Level::Ground))
        .collect()
}

/// Multiplies every `e` amplitude by `e^{iχ}`.
pub fn stark_phase_pulse(s: &JointState, chi: f64) -> JointState {
    let dim = s.truncation().dim();
    let phase = C64::from_polar(1.0, chi);
    let mut out = s.amplitudes().clone();
    for z in out.iter_mut().take(dim) {
        *z *= phase;
    }
    JointState::from_amplitudes(out, s.truncation()).expect("same dimension")
}

/// Area of the π/2 Rabi pulse: rotates the `n̄` block by π/4.
pub fn half_pi_pulse_area(n_bar: f64) -> f64 {
    PI / (2.0 * n_bar.sqrt())
}

/// π/2 Rabi pulse followed by a π/2 Stark pulse, from `g` (plus) or `e`
/// (minus), leaving the atom in `(|e⟩ ± |g⟩)/√2`.
///
/// The Rabi pulse is a constant-coupling pulse at the peak `Ω` of the profile
/// lasting `π/(2Ω√n̄)`.
pub fn prepare_dipole_state(
    which: Branch,
    field: &FieldState,
    profile: &CouplingProfile,
) -> Result<JointState> {
    let n_bar = field.mean_photon_number();
    if n_bar < MIN_PREPARATION_FIELD {
        return Err(Error::FieldTooSmall {
            n_bar,
            min: MIN_PREPARATION_FIELD,
        });
    }
    let start = match which {
        Branch::Plus => Level::Ground,
        Branch::Minus => Level::Excited,
    };
    let duration = PI / (2.0 * profile.omega * n_bar.sqrt());
    let rabi = evolve(
        &JointState::product(start, field),
        &CouplingProfile::constant(profile.omega),
        duration,
    );
    Ok(stark_phase_pulse(&rabi, PI / 2.0))
}

/// Evolution with a sign-flip Stark pulse (`χ = π`) at time `echo_time`,
/// sampled on `samples` points over `[0, 2.5 T]`.
pub fn echo_sequence(
    initial: &JointState,
    profile: &CouplingProfile,
    echo_time: f64,
    samples: usize,
) -> Trace {
    let end = 2.5 * echo_time;
    let t: Vec<f64> = (0..samples)
        .map(|k| end * k as f64 / (samples.max(2) - 1) as f64)
        .collect();
    let flipped = stark_phase_pulse(
        &evolve_by_area(initial, profile.area_since_entry(echo_time)),
        PI,
    );
    let p_g = t
        .par_iter()
        .map(|&tk| {
            if tk < echo_time {
                evolve_by_area(initial, profile.area_since_entry(tk)).population(Level::Ground)
            } else {
                let area =
                    profile.area_since_entry(tk) - profile.area_since_entry(echo_time);
                evolve_by_area(&flipped, area).population(Level::Ground)
            }
        })
        .collect();
    Trace::new(t, p_g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, CoherentParams};
    use crate::trace::oscillation_contrast;
    use proptest::prelude::*;

    const OMEGA: f64 = 3e5;

    fn coherent(n_bar: f64) -> FieldState {
        coherent_state(&CoherentParams::from_mean(n_bar), Truncation::for_mean(n_bar)).unwrap()
    }

    fn one_over_sqrt2() -> C64 {
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    #[test]
    fn block_identity_and_vacuum_pi_pulse() {
        let u = evolve_block(7, 0.0);
        assert_eq!(u[0][0], C64::new(1.0, 0.0));
        assert_eq!(u[0][1], C64::new(0.0, 0.0));

        let t = Truncation::new(5).unwrap();
        let s = JointState::product(Level::Excited, &FieldState::vacuum(t));
        let out = evolve(&s, &CouplingProfile::constant(OMEGA), PI / OMEGA);
        assert!((out.amplitude(Level::Ground, 1) - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((out.population(Level::Ground) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_entries_at_n35() {
        // Ωt = 9.6 and n + 1 = 36 give θ = 28.8 rad.
        let theta = 0.5 * 9.6 * 36f64.sqrt();
        assert!((theta - 28.8).abs() < 1e-12);
        let u = evolve_block(35, theta);
        assert!((u[0][0].re - 28.8f64.cos()).abs() < 1e-12);
        assert!((u[1][0].im + 28.8f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn ground_vacuum_is_dark() {
        let t = Truncation::new(4).unwrap();
        let s = JointState::product(Level::Ground, &FieldState::vacuum(t));
        let out = evolve(&s, &CouplingProfile::constant(OMEGA), 1e-3);
        assert_eq!(out, s);
        let trace = rabi_trace(&s, &CouplingProfile::constant(OMEGA), &[0.0, 1e-5, 2e-5]);
        assert!(trace.iter().all(|p| (*p - 1.0).abs() < 1e-15));
    }

    #[test]
    fn ground_population_matches_scalar_sum() {
        let field = coherent(36.0);
        let s = JointState::product(Level::Ground, &field);
        let t = 32e-6;
        let out = evolve(&s, &CouplingProfile::constant(OMEGA), t);
        // Independent oracle: Σ P(n) cos²(Ω√n t / 2).
        let oracle: f64 = field
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, p)| p * (0.5 * OMEGA * (n as f64).sqrt() * t).cos().powi(2))
            .sum();
        assert!((out.population(Level::Ground) - oracle).abs() < 1e-12);
    }

    #[test]
    fn gaussian_transit_equals_constant_for_interaction_time() {
        let field = coherent(29.0);
        let s = JointState::product(Level::Ground, &field);
        let gauss = CouplingProfile::gaussian(OMEGA, 6e-3, 335.0);
        let ti = gauss.interaction_time().unwrap();
        assert!((ti - 32e-6).abs() < 0.5e-6);
        let a = evolve(&s, &gauss, f64::INFINITY);
        let b = evolve(&s, &CouplingProfile::constant(OMEGA), ti);
        assert!(a.fidelity(&b) >= 1.0 - 1e-9);
        let vb = CouplingProfile::gaussian(OMEGA, 6e-3, 200.0);
        assert!((vb.interaction_time().unwrap() - 53e-6).abs() < 0.5e-6);
    }

    #[test]
    fn collapse_time_is_independent_of_field() {
        let mut times = Vec::new();
        for n_bar in [15.0, 36.0] {
            let s = JointState::product(Level::Ground, &coherent(n_bar));
            let grid: Vec<f64> = (0..3000).map(|k| k as f64 * 2e-8).collect();
            let p = rabi_trace(&s, &CouplingProfile::constant(OMEGA), &grid);
            let trace = Trace::new(grid, p);
            let window = 2.0 * PI / (OMEGA * n_bar.sqrt());
            let tc = trace.collapse_time(window, 0.1).expect("collapses");
            times.push(tc);
        }
        let rel = (times[0] - times[1]).abs() / times[1];
        assert!(rel < 0.1, "collapse times {times:?}");
    }

    #[test]
    fn stark_pulse_flips_sign() {
        let t = Truncation::new(3).unwrap();
        let s = JointState::product_superposition(
            [one_over_sqrt2(), one_over_sqrt2()],
            &FieldState::vacuum(t),
        );
        assert_eq!(stark_phase_pulse(&s, 0.0), s);
        let flipped = stark_phase_pulse(&s, PI);
        assert!((flipped.amplitude(Level::Excited, 0) + one_over_sqrt2()).norm() < 1e-15);
        assert!((flipped.amplitude(Level::Ground, 0) - one_over_sqrt2()).norm() < 1e-15);
    }

    #[test]
    fn rabi_then_stark_maps_ground_to_plus_dipole() {
        // Oracle: Stark matrix diag(1, e^{iπ/2}) times the Rabi block at the
        // dominant photon number, both in the (g, e) basis, acting on g.
        let n_bar: f64 = 27.0;
        let theta = 0.5 * half_pi_pulse_area(n_bar) * n_bar.sqrt();
        let rabi = evolve_block(27, theta);
        let stark = [C64::new(1.0, 0.0), C64::from_polar(1.0, PI / 2.0)];
        let g_amp = stark[0] * rabi[0][0];
        let e_amp = stark[1] * rabi[1][0];
        let overlap = one_over_sqrt2() * (g_amp + e_amp);
        assert!(overlap.norm_sqr() >= 1.0 - 1e-6);

        let prepared = prepare_dipole_state(
            Branch::Plus,
            &coherent(n_bar),
            &CouplingProfile::constant(OMEGA),
        )
        .unwrap();
        let rho = prepared.atom_density();
        let fid = 0.5 * (rho[0][0] + rho[1][1] + rho[0][1] + rho[1][0]).re;
        assert!(fid >= 0.99, "atomic fidelity {fid}");
    }

    #[test]
    fn preparation_fidelity_both_branches() {
        for n_bar in [15.0, 27.0, 36.0] {
            for (branch, sign) in [(Branch::Plus, 1.0), (Branch::Minus, -1.0)] {
                let prepared = prepare_dipole_state(
                    branch,
                    &coherent(n_bar),
                    &CouplingProfile::constant(OMEGA),
                )
                .unwrap();
                let rho = prepared.atom_density();
                let fid = 0.5 * (rho[0][0] + rho[1][1] + (rho[0][1] + rho[1][0]) * sign).re;
                // Starting from e the pair couples through √(n+1), which
                // costs a first-order coherence loss: no pulse length does
                // better than 0.974, 0.985 and 0.989 at these n̄.
                let floor = match branch {
                    Branch::Plus => 0.99,
                    Branch::Minus => 0.97,
                };
                assert!(fid >= floor, "{branch:?} n_bar {n_bar}: {fid}");
            }
        }
    }

    #[test]
    fn preparation_rejects_tiny_fields() {
        let err = prepare_dipole_state(
            Branch::Plus,
            &coherent(2.0),
            &CouplingProfile::constant(OMEGA),
        )
        .unwrap_err();
        assert!(matches!(err, Error::FieldTooSmall { .. }));
    }

    #[test]
    fn prepared_plus_state_freezes_oscillation() {
        let profile = CouplingProfile::constant(OMEGA);
        let prepared = prepare_dipole_state(Branch::Plus, &coherent(27.0), &profile).unwrap();
        // One full rotation of the components: Φ⁺ = 2π.
        let period = 8.0 * PI * 27f64.sqrt() / OMEGA;
        let grid: Vec<f64> = (0..2000).map(|k| period * k as f64 / 1999.0).collect();
        let p = rabi_trace(&prepared, &profile, &grid);
        let worst = p.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.05, "max deviation {worst}");
    }

    #[test]
    fn immediate_echo_is_plain_trace() {
        let profile = CouplingProfile::constant(OMEGA);
        let s = JointState::product(Level::Ground, &coherent(15.0));
        let echo = echo_sequence(&s, &profile, 0.0, 50);
        assert!(echo.p_g.iter().all(|p| (*p - 1.0).abs() < 1e-12));

        // After a flip at T the signal retraces itself: P(t) = P_plain(|t − 2T|).
        let t_flip = 5e-6;
        let echo = echo_sequence(&s, &profile, t_flip, 101);
        let mirrored: Vec<f64> = echo
            .t
            .iter()
            .map(|t| if *t < t_flip { *t } else { (t - 2.0 * t_flip).abs() })
            .collect();
        let plain = rabi_trace(&s, &profile, &mirrored);
        for (a, b) in echo.p_g.iter().zip(plain.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn echo_revives_at_twice_the_flip_time() {
        let profile = CouplingProfile::constant(OMEGA);
        let s = JointState::product(Level::Ground, &coherent(36.0));
        let flip = 20e-6;
        let trace = echo_sequence(&s, &profile, flip, 5001);
        let window = 2.0 * PI / (OMEGA * 6.0);
        let contrast = oscillation_contrast(&trace, window);
        assert!(contrast[trace.index_near(flip)] < 0.1);
        let (t_rev, c_rev) = trace.revival(window, 1.5 * flip).unwrap();
        assert!((t_rev - 2.0 * flip).abs() <= 1e-6, "revival at {t_rev}");
        assert!(c_rev >= 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn evolution_conserves_norm_blocks_and_excitations(
            n_bar in 0.5f64..30.0, area in 0.0f64..40.0, phase in -3.0f64..3.0,
        ) {
            let t = Truncation::for_mean(n_bar);
            let field = coherent_state(&CoherentParams::new(C64::from_polar(n_bar.sqrt(), phase)), t).unwrap();
            let s = JointState::product_superposition(
                [C64::new(0.6, 0.0), C64::new(0.0, 0.8)], &field);
            let out = evolve_by_area(&s, area);
            prop_assert!((out.norm() - s.norm()).abs() < 1e-8);
            prop_assert!((out.excitation_number() - s.excitation_number()).abs() < 1e-8);
            let dim = t.dim();
            for n in 0..dim - 1 {
                let before = s.amplitude(Level::Ground, n + 1).norm_sqr() + s.amplitude(Level::Excited, n).norm_sqr();
                let after = out.amplitude(Level::Ground, n + 1).norm_sqr() + out.amplitude(Level::Excited, n).norm_sqr();
                prop_assert!((before - after).abs() < 1e-12);
            }
        }
    }
}
