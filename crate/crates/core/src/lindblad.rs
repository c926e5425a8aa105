//! Cavity damping of the joint atom–field state.
//!
//! The master equation is
//!
//! ```text
//! dρ/dt = −i[H(t), ρ] + κ(n_th + 1) D[a]ρ + κ n_th D[a†]ρ,
//! H(t)  = (Ω(t)/2)(a†σ⁻ + aσ⁺),
//! ```
//!
//! with `D[L]ρ = LρL† − ½{L†L, ρ}`. The ladder operators are the truncated
//! matrices, so the generator is trace preserving exactly. Integration is
//! fixed-step RK4; the right-hand side is evaluated entry by entry from the
//! banded structure of `H` and `a` rather than with dense products.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Displacement, FieldState, Truncation, GUARD_SIGMAS};
use crate::jc::{CouplingProfile, JointState, Level};
use crate::linalg::{hermitian_eigenvalues, hermiticity_error, trace_distance};

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// Fraction of the fastest Rabi period used as the default step.
pub const STEPS_PER_RABI_UNIT: f64 = 50.0;
/// Largest trace distance tolerated between the `dt` and `dt/2` runs.
pub const STEP_CHECK_TOLERANCE: f64 = 1e-4;
pub const TRACE_TOLERANCE: f64 = 1e-6;
pub const HERMITICITY_TOLERANCE: f64 = 1e-9;
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Field only, `n_max + 1` states.
    Field,
    /// `{e, g} ⊗ field` in the [`JointState`] ordering.
    Joint,
}

/// Dense density matrix over the field or joint basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: Array2<C64>,
    truncation: Truncation,
    basis: Basis,
}

impl DensityOperator {
    pub fn from_matrix(matrix: Array2<C64>, truncation: Truncation, basis: Basis) -> Result<Self> {
        let dim = match basis {
            Basis::Field => truncation.dim(),
            Basis::Joint => 2 * truncation.dim(),
        };
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            truncation,
            basis,
        })
    }

    pub fn from_field(s: &FieldState) -> Self {
        let a = s.amplitudes();
        let matrix = Array2::from_shape_fn((a.len(), a.len()), |(i, j)| a[i] * a[j].conj());
        Self {
            matrix,
            truncation: s.truncation(),
            basis: Basis::Field,
        }
    }

    pub fn from_joint(s: &JointState) -> Self {
        let a = s.amplitudes();
        let matrix = Array2::from_shape_fn((a.len(), a.len()), |(i, j)| a[i] * a[j].conj());
        Self {
            matrix,
            truncation: s.truncation(),
            basis: Basis::Joint,
        }
    }

    /// `|ψ⟩⟨ψ|` summed over an ensemble of (unnormalized) field vectors.
    pub fn from_field_ensemble(states: &[FieldState]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
        let mut rho = Self::from_field(first);
        for s in &states[1..] {
            if s.truncation() != rho.truncation {
                return Err(Error::DimensionMismatch {
                    expected: rho.truncation.dim(),
                    found: s.truncation().dim(),
                });
            }
            rho.matrix = rho.matrix + Self::from_field(s).matrix;
        }
        Ok(rho)
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        self.same_shape(other)?;
        Ok(trace_distance(&self.matrix, &other.matrix))
    }

    fn same_shape(&self, other: &DensityOperator) -> Result<()> {
        if self.basis != other.basis || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    fn level_count(&self) -> usize {
        match self.basis {
            Basis::Field => 1,
            Basis::Joint => 2,
        }
    }

    /// Photon-number distribution (summed over the atom for joint states).
    pub fn photon_distribution(&self) -> Vec<f64> {
        let m = self.truncation.dim();
        (0..m)
            .map(|n| {
                (0..self.level_count())
                    .map(|l| self.matrix[[l * m + n, l * m + n]].re)
                    .sum()
            })
            .collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `Tr(ρ a)`.
    pub fn mean_field(&self) -> C64 {
        let m = self.truncation.dim();
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..self.level_count() {
            for n in 1..m {
                acc += self.matrix[[l * m + n, l * m + n - 1]] * (n as f64).sqrt();
            }
        }
        acc
    }

    /// Population of an atomic level (joint basis only).
    pub fn population(&self, level: Level) -> f64 {
        debug_assert_eq!(self.basis, Basis::Joint);
        let m = self.truncation.dim();
        let off = level.index() * m;
        (0..m).map(|n| self.matrix[[off + n, off + n]].re).sum()
    }

    /// Field-basis operator on a different truncation (zero padded).
    pub fn embed(&self, truncation: Truncation) -> Result<Self> {
        if self.basis != Basis::Field {
            return Err(Error::InvalidParameter(
                "only field operators can be re-truncated".into(),
            ));
        }
        let dim = truncation.dim();
        let dropped: f64 = (dim..self.dim()).map(|n| self.matrix[[n, n]].re).sum();
        if dropped > 1e-12 {
            return Err(Error::TruncationTooSmall {
                n_max: truncation.n_max(),
                required: self.truncation.n_max(),
                reason: format!("embedding would drop population {dropped:.2e}"),
            });
        }
        let keep = dim.min(self.dim());
        let mut matrix = Array2::zeros((dim, dim));
        for i in 0..keep {
            for j in 0..keep {
                matrix[[i, j]] = self.matrix[[i, j]];
            }
        }
        Ok(Self {
            matrix,
            truncation,
            basis: Basis::Field,
        })
    }

    /// Applies a field displacement `D ρ D†` (acting on the field factor).
    pub fn displaced(&self, beta: C64) -> Result<Self> {
        let mean_after =
            self.mean_photon_number() + 2.0 * (beta.conj() * self.mean_field()).re + beta.norm_sqr();
        let needed = mean_after + GUARD_SIGMAS * mean_after.max(0.0).sqrt();
        if needed >= self.truncation.n_max() as f64 {
            return Err(Error::TruncationTooSmall {
                n_max: self.truncation.n_max(),
                required: needed.ceil() as usize + 1,
                reason: format!("injection raises the mean photon number to {mean_after:.2}"),
            });
        }
        let d = Displacement::new(beta, self.truncation);
        let dm = d.matrix();
        let dd = crate::linalg::dagger(dm);
        let m = self.truncation.dim();
        let mut out = self.matrix.clone();
        let levels = self.level_count();
        for a in 0..levels {
            for b in 0..levels {
                let block = self
                    .matrix
                    .slice(ndarray::s![a * m..(a + 1) * m, b * m..(b + 1) * m])
                    .to_owned();
                let moved = dm.dot(&block).dot(&dd);
                out.slice_mut(ndarray::s![a * m..(a + 1) * m, b * m..(b + 1) * m])
                    .assign(&moved);
            }
        }
        Ok(Self {
            matrix: out,
            truncation: self.truncation,
            basis: self.basis,
        })
    }

    /// Multiplies the `e` amplitudes by `e^{iχ}` (joint basis only).
    pub fn stark_shifted(&self, chi: f64) -> Self {
        let m = self.truncation.dim();
        let phase = C64::from_polar(1.0, chi);
        let mut out = self.matrix.clone();
        for ((i, j), z) in out.indexed_iter_mut() {
            let pi = if i < m { phase } else { C64::new(1.0, 0.0) };
            let pj = if j < m { phase } else { C64::new(1.0, 0.0) };
            *z *= pi * pj.conj();
        }
        Self {
            matrix: out,
            truncation: self.truncation,
            basis: self.basis,
        }
    }

    /// Checks trace, Hermiticity and positivity against the module tolerances.
    pub fn check_physical(&self, context: &str) -> Result<()> {
        let trace_err = (self.trace() - 1.0).abs();
        if trace_err > TRACE_TOLERANCE {
            return Err(Error::InvariantViolated(format!(
                "{context}: trace deviates from 1 by {trace_err:.2e}"
            )));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(Error::InvariantViolated(format!(
                "{context}: Hermiticity error {herm:.2e}"
            )));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -POSITIVITY_TOLERANCE {
            return Err(Error::InvariantViolated(format!(
                "{context}: negative eigenvalue {min_ev:.2e}"
            )));
        }
        Ok(())
    }
}

/// Planck occupation `1/(e^{hν/k_BT} − 1)`.
pub fn thermal_occupation(temperature: f64, frequency: f64) -> f64 {
    let x = PLANCK * frequency / (BOLTZMANN * temperature);
    1.0 / x.exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingParams {
    /// Energy decay rate `1/T_cav` (s⁻¹).
    pub kappa: f64,
    pub n_thermal: f64,
}

impl DampingParams {
    pub fn zero_temperature(t_cav: f64) -> Self {
        Self {
            kappa: 1.0 / t_cav,
            n_thermal: 0.0,
        }
    }

    pub fn thermal(t_cav: f64, temperature: f64, frequency: f64) -> Self {
        Self {
            kappa: 1.0 / t_cav,
            n_thermal: thermal_occupation(temperature, frequency),
        }
    }

    pub fn none() -> Self {
        Self {
            kappa: 0.0,
            n_thermal: 0.0,
        }
    }
}

/// Index tables for the banded right-hand side.
struct Layout {
    dim: usize,
    /// Field level of each basis index.
    n: Vec<usize>,
    /// Jaynes–Cummings partner and `√` factor (without Ω/2).
    partner: Vec<Option<(usize, f64)>>,
    /// Index of the same level with one more photon.
    raised: Vec<Option<usize>>,
    /// Index of the same level with one photon less.
    lowered: Vec<Option<usize>>,
    /// Diagonal of the truncated `aa†`.
    aad: Vec<f64>,
}

impl Layout {
    fn new(truncation: Truncation, basis: Basis) -> Self {
        let m = truncation.dim();
        let levels = match basis {
            Basis::Field => 1,
            Basis::Joint => 2,
        };
        let dim = levels * m;
        let mut layout = Layout {
            dim,
            n: Vec::with_capacity(dim),
            partner: Vec::with_capacity(dim),
            raised: Vec::with_capacity(dim),
            lowered: Vec::with_capacity(dim),
            aad: Vec::with_capacity(dim),
        };
        for i in 0..dim {
            let (level, n) = (i / m, i % m);
            layout.n.push(n);
            let partner = match (basis, level) {
                (Basis::Field, _) => None,
                // |e,n⟩ ↔ |g,n+1⟩
                (Basis::Joint, 0) if n + 1 < m => Some((m + n + 1, ((n + 1) as f64).sqrt())),
                // |g,n⟩ ↔ |e,n−1⟩
                (Basis::Joint, 1) if n >= 1 => Some((n - 1, (n as f64).sqrt())),
                _ => None,
            };
            layout.partner.push(partner);
            layout.raised.push((n + 1 < m).then_some(i + 1));
            layout.lowered.push((n >= 1).then(|| i - 1));
            layout.aad.push(if n + 1 < m { (n + 1) as f64 } else { 0.0 });
        }
        layout
    }
}

/// Writes `L(ρ)` into `out`. Both slices are row-major `dim × dim`.
fn rhs_into(layout: &Layout, rho: &[C64], out: &mut [C64], omega_t: f64, damping: &DampingParams) {
    let d = layout.dim;
    let half_omega = 0.5 * omega_t;
    let down = damping.kappa * (damping.n_thermal + 1.0);
    let up = damping.kappa * damping.n_thermal;
    let minus_i = C64::new(0.0, -1.0);
    for i in 0..d {
        let ni = layout.n[i] as f64;
        let pi = layout.partner[i];
        let ri = layout.raised[i];
        let li = layout.lowered[i];
        let row = i * d;
        for j in i..d {
            let rho_ij = rho[row + j];
            let nj = layout.n[j] as f64;
            let mut acc = C64::new(0.0, 0.0);
            if half_omega != 0.0 {
                let mut comm = C64::new(0.0, 0.0);
                if let Some((p, c)) = pi {
                    comm += rho[p * d + j] * (half_omega * c);
                }
                if let Some((p, c)) = layout.partner[j] {
                    comm -= rho[row + p] * (half_omega * c);
                }
                acc += minus_i * comm;
            }
            if down != 0.0 {
                let mut jump = C64::new(0.0, 0.0);
                if let (Some(a), Some(b)) = (ri, layout.raised[j]) {
                    jump = rho[a * d + b] * ((ni + 1.0) * (nj + 1.0)).sqrt();
                }
                acc += (jump - rho_ij * (0.5 * (ni + nj))) * down;
            }
            if up != 0.0 {
                let mut jump = C64::new(0.0, 0.0);
                if let (Some(a), Some(b)) = (li, layout.lowered[j]) {
                    jump = rho[a * d + b] * (ni * nj).sqrt();
                }
                acc += (jump - rho_ij * (0.5 * (layout.aad[i] + layout.aad[j]))) * up;
            }
            out[row + j] = acc;
            if j != i {
                out[j * d + i] = acc.conj();
            }
        }
    }
}

/// Time derivative of `ρ` under the damped resonant model at instantaneous
/// coupling `omega_t`.
pub fn lindblad_rhs(
    rho: &DensityOperator,
    omega_t: f64,
    damping: &DampingParams,
) -> Result<DensityOperator> {
    let layout = Layout::new(rho.truncation, rho.basis);
    if layout.dim != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim,
            found: rho.dim(),
        });
    }
    let input = rho.matrix.as_standard_layout();
    let mut out = vec![C64::new(0.0, 0.0); layout.dim * layout.dim];
    rhs_into(
        &layout,
        input.as_slice().expect("standard layout"),
        &mut out,
        omega_t,
        damping,
    );
    DensityOperator::from_matrix(
        Array2::from_shape_vec((layout.dim, layout.dim), out).expect("square"),
        rho.truncation,
        rho.basis,
    )
}

/// Instantaneous operation applied between integration steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PulseEvent {
    /// Stark phase `e^{iχ}` on the `e` amplitudes.
    Stark(f64),
    /// Coherent injection: displacement of the field by `β`.
    Inject(C64),
}

/// An atom coupled between `start` and `end`; Gaussian profiles are centred
/// on `crossing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingWindow {
    pub start: f64,
    pub end: f64,
    pub crossing: f64,
    pub profile: CouplingProfile,
}

impl CouplingWindow {
    /// Full transit of a Gaussian mode whose axis is crossed at `crossing`.
    pub fn transit(profile: CouplingProfile, crossing: f64) -> Self {
        let half = profile.transit_half_width().unwrap_or(0.0);
        Self {
            start: crossing - half,
            end: crossing + half,
            crossing,
            profile,
        }
    }

    /// Constant coupling between `start` and `end`.
    pub fn constant(omega: f64, start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            crossing: start,
            profile: CouplingProfile::constant(omega),
        }
    }
}

/// Piecewise coupling plus instantaneous events, on a time axis starting at 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub windows: Vec<CouplingWindow>,
    pub events: Vec<(f64, PulseEvent)>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_window(mut self, w: CouplingWindow) -> Self {
        self.windows.push(w);
        self
    }

    pub fn with_event(mut self, t: f64, e: PulseEvent) -> Self {
        self.events.push((t, e));
        self.events.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.windows
            .iter()
            .filter(|w| t >= w.start && t <= w.end)
            .map(|w| w.profile.rate(t - w.crossing))
            .sum()
    }

    pub fn peak_rate(&self) -> f64 {
        self.windows.iter().map(|w| w.profile.omega).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// Step size; `None` uses the largest admissible step.
    pub dt: Option<f64>,
    /// Re-run at `dt/2` and compare the final states.
    pub verify: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            dt: None,
            verify: false,
        }
    }
}

impl StepOptions {
    pub fn verified() -> Self {
        Self {
            dt: None,
            verify: true,
        }
    }
}

/// Largest admissible RK4 step: `1/(50 Ω √n_max)` while coupled, otherwise
/// set by the fastest damping rate.
pub fn max_step(schedule: &Schedule, truncation: Truncation, damping: &DampingParams) -> f64 {
    let n_max = truncation.n_max() as f64;
    let coupling = schedule.peak_rate() * n_max.sqrt();
    let decay = damping.kappa * (n_max + 1.0) * (1.0 + 2.0 * damping.n_thermal);
    let fastest = coupling.max(decay);
    if fastest > 0.0 {
        1.0 / (STEPS_PER_RABI_UNIT * fastest)
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationReport {
    pub steps: usize,
    pub dt: f64,
    /// Largest `|Tr ρ(t) − Tr ρ(0)|` seen.
    pub trace_drift: f64,
    /// Largest anti-Hermitian part removed by re-symmetrization.
    pub max_hermiticity_error: f64,
    /// Trace distance to the half-step run, when requested.
    pub step_check: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Propagated {
    pub state: DensityOperator,
    pub report: IntegrationReport,
}

fn apply_event(rho: &DensityOperator, event: &PulseEvent) -> Result<DensityOperator> {
    match *event {
        PulseEvent::Stark(chi) => {
            if rho.basis != Basis::Joint {
                return Err(Error::InvalidParameter(
                    "Stark pulse needs an atom in the state".into(),
                ));
            }
            Ok(rho.stark_shifted(chi))
        }
        PulseEvent::Inject(beta) => rho.displaced(beta),
    }
}

/// Integrates `rho` over `[0, duration]` under `schedule`.
pub fn evolve_density(
    rho: &DensityOperator,
    schedule: &Schedule,
    duration: f64,
    damping: &DampingParams,
    opts: StepOptions,
) -> Result<Propagated> {
    evolve_density_observed(rho, schedule, duration, damping, opts, None, |_, _| {})
}

/// Like [`evolve_density`], calling `observe(t, ρ)` every `sample_interval`
/// seconds of simulated time (at the nearest step) and at both ends.
#[allow(clippy::too_many_arguments)]
pub fn evolve_density_observed<F>(
    rho: &DensityOperator,
    schedule: &Schedule,
    duration: f64,
    damping: &DampingParams,
    opts: StepOptions,
    sample_interval: Option<f64>,
    mut observe: F,
) -> Result<Propagated>
where
    F: FnMut(f64, &DensityOperator),
{
    let bound = max_step(schedule, rho.truncation, damping);
    let dt = match opts.dt {
        Some(dt) if dt > bound * (1.0 + 1e-12) => {
            return Err(Error::StepTooLarge {
                detail: format!("dt = {dt:.3e} s exceeds the bound {bound:.3e} s"),
            })
        }
        Some(dt) => dt,
        None => bound.min(duration.max(f64::MIN_POSITIVE)),
    };
    let (state, mut report) = integrate(rho, schedule, duration, damping, dt, sample_interval, &mut observe)?;
    if opts.verify {
        let (fine, _) = integrate(rho, schedule, duration, damping, 0.5 * dt, None, &mut |_, _| {})?;
        let dist = state.trace_distance(&fine)?;
        report.step_check = Some(dist);
        if dist > STEP_CHECK_TOLERANCE {
            return Err(Error::StepTooLarge {
                detail: format!("half-step run differs by trace distance {dist:.2e}"),
            });
        }
    }
    Ok(Propagated { state, report })
}

fn integrate(
    rho: &DensityOperator,
    schedule: &Schedule,
    duration: f64,
    damping: &DampingParams,
    dt: f64,
    sample_interval: Option<f64>,
    observe: &mut dyn FnMut(f64, &DensityOperator),
) -> Result<(DensityOperator, IntegrationReport)> {
    let layout = Layout::new(rho.truncation, rho.basis);
    let d = layout.dim;
    let mut current = rho.clone();
    let trace0 = rho.trace();
    let mut report = IntegrationReport {
        steps: 0,
        dt,
        trace_drift: 0.0,
        max_hermiticity_error: 0.0,
        step_check: None,
    };

    // Segment boundaries: start, events inside (0, duration), end.
    let mut cuts: Vec<f64> = vec![0.0];
    for (t, _) in &schedule.events {
        if *t > 0.0 && *t < duration {
            cuts.push(*t);
        }
    }
    cuts.push(duration);
    cuts.dedup();

    let mut next_sample = 0.0;
    let mut events = schedule.events.iter().peekable();
    let mut y: Vec<C64> = Vec::new();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![C64::new(0.0, 0.0); d * d],
        vec![C64::new(0.0, 0.0); d * d],
        vec![C64::new(0.0, 0.0); d * d],
        vec![C64::new(0.0, 0.0); d * d],
        vec![C64::new(0.0, 0.0); d * d],
    );

    for seg in cuts.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        while let Some((te, ev)) = events.peek() {
            if *te <= t0 + 1e-15 {
                current = apply_event(&current, ev)?;
                events.next();
            } else {
                break;
            }
        }
        if let Some(iv) = sample_interval {
            if t0 >= next_sample - 1e-15 {
                observe(t0, &current);
                next_sample = t0 + iv;
            }
        }
        let len = t1 - t0;
        if len <= 0.0 {
            continue;
        }
        let n_steps = (len / dt).ceil().max(1.0) as usize;
        let h = len / n_steps as f64;
        y.clear();
        y.extend(current.matrix.as_standard_layout().iter().copied());
        for step in 0..n_steps {
            let t = t0 + step as f64 * h;
            let (w0, wm, w1) = (
                schedule.rate_at(t),
                schedule.rate_at(t + 0.5 * h),
                schedule.rate_at(t + h),
            );
            rhs_into(&layout, &y, &mut k1, w0, damping);
            for i in 0..d * d {
                tmp[i] = y[i] + k1[i] * (0.5 * h);
            }
            rhs_into(&layout, &tmp, &mut k2, wm, damping);
            for i in 0..d * d {
                tmp[i] = y[i] + k2[i] * (0.5 * h);
            }
            rhs_into(&layout, &tmp, &mut k3, wm, damping);
            for i in 0..d * d {
                tmp[i] = y[i] + k3[i] * h;
            }
            rhs_into(&layout, &tmp, &mut k4, w1, damping);
            for i in 0..d * d {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            // Re-symmetrize and track how much was removed.
            let mut trace = 0.0;
            for i in 0..d {
                for j in i..d {
                    let a = y[i * d + j];
                    let b = y[j * d + i];
                    let herm = (a - b.conj()).norm();
                    if herm > report.max_hermiticity_error {
                        report.max_hermiticity_error = herm;
                    }
                    let avg = (a + b.conj()) * 0.5;
                    y[i * d + j] = avg;
                    y[j * d + i] = avg.conj();
                }
                trace += y[i * d + i].re;
            }
            report.trace_drift = report.trace_drift.max((trace - trace0).abs());
            report.steps += 1;
            let t_now = t + h;
            if let Some(iv) = sample_interval {
                if t_now >= next_sample - 0.5 * h && step + 1 < n_steps {
                    current.matrix = Array2::from_shape_vec((d, d), y.clone()).expect("square");
                    observe(t_now, &current);
                    next_sample += iv;
                }
            }
        }
        current.matrix = Array2::from_shape_vec((d, d), y.clone()).expect("square");
    }
    for (te, ev) in events {
        if *te <= duration + 1e-15 {
            current = apply_event(&current, ev)?;
        }
    }
    if sample_interval.is_some() {
        observe(duration, &current);
    }
    Ok((current, report))
}

/// Reduces a joint operator to the field.
pub fn partial_trace_field(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.basis != Basis::Joint {
        return Err(Error::DimensionMismatch {
            expected: 2 * rho.truncation.dim(),
            found: rho.dim(),
        });
    }
    let m = rho.truncation.dim();
    let matrix = Array2::from_shape_fn((m, m), |(i, j)| {
        rho.matrix[[i, j]] + rho.matrix[[m + i, m + j]]
    });
    DensityOperator::from_matrix(matrix, rho.truncation, Basis::Field)
}

/// Reduces a joint operator to the atom, `(e, g)` basis.
pub fn partial_trace_atom(rho: &DensityOperator) -> Result<[[C64; 2]; 2]> {
    if rho.basis != Basis::Joint {
        return Err(Error::DimensionMismatch {
            expected: 2 * rho.truncation.dim(),
            found: rho.dim(),
        });
    }
    let m = rho.truncation.dim();
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            *entry = (0..m).map(|n| rho.matrix[[a * m + n, b * m + n]]).sum();
        }
    }
    Ok(out)
}

/// Field state after the atom is detected in `outcome`, normalized.
pub fn conditional_field_state(rho: &DensityOperator, outcome: Level) -> Result<DensityOperator> {
    if rho.basis != Basis::Joint {
        return Err(Error::DimensionMismatch {
            expected: 2 * rho.truncation.dim(),
            found: rho.dim(),
        });
    }
    let m = rho.truncation.dim();
    let off = outcome.index() * m;
    let p: f64 = (0..m).map(|n| rho.matrix[[off + n, off + n]].re).sum();
    if p <= 1e-14 {
        return Err(Error::ZeroProbabilityOutcome);
    }
    let matrix = Array2::from_shape_fn((m, m), |(i, j)| rho.matrix[[off + i, off + j]] / p);
    DensityOperator::from_matrix(matrix, rho.truncation, Basis::Field)
}

/// Pure-state version of [`conditional_field_state`].
pub fn conditional_field_state_pure(psi: &JointState, outcome: Level) -> Result<FieldState> {
    let field = psi.field_component(outcome);
    if field.norm() <= 1e-7 {
        return Err(Error::ZeroProbabilityOutcome);
    }
    Ok(field.normalized())
}

/// Probability that a probe atom entering in `g` is still in `g` at the end
/// of `[t0, t1]`, for each initial photon number `0..=n_max`.
///
/// `P(g)` of the probe only depends on the excitation-diagonal 2×2 blocks
/// `{|g,N⟩, |e,N−1⟩}`, which the damped dynamics never mixes with the
/// off-diagonal ones. The `g` projector is propagated backwards through
/// those blocks once, so the response applies to any photon distribution.
/// Times are relative to the probe's axis crossing; outside the transit
/// window the probe is uncoupled and only the field decays.
pub fn probe_ground_response(
    profile: &CouplingProfile,
    t0: f64,
    t1: f64,
    damping: &DampingParams,
    n_max: usize,
) -> Vec<f64> {
    if damping.kappa == 0.0 {
        let (a, b) = match profile.transit_half_width() {
            Some(h) => (t0.max(-h), t1.min(h)),
            None => (t0, t1),
        };
        let area = if b > a { profile.area_between(a, b) } else { 0.0 };
        return (0..=n_max)
            .map(|n| (0.5 * area * (n as f64).sqrt()).cos().powi(2))
            .collect();
    }
    BlockAdjoint::new(n_max, damping).ground_response(profile, t0, t1)
}

/// Heisenberg-picture propagation on the excitation-diagonal blocks.
/// Block `N` holds `(|g,N⟩, |e,N−1⟩)` for `N = 0 … n_max + 1`.
struct BlockAdjoint {
    blocks: usize,
    /// `√N` coupling factor (zero where the pair is incomplete).
    coupling: Vec<f64>,
    /// Diagonal of `a` from block `N+1` to block `N`.
    lower: Vec<[f64; 2]>,
    /// Diagonal of `a†a` and of the truncated `aa†` on block `N`.
    number: Vec<[f64; 2]>,
    anti_number: Vec<[f64; 2]>,
    down: f64,
    up: f64,
    n_max: usize,
}

type Block = [C64; 4];

impl BlockAdjoint {
    fn new(n_max: usize, damping: &DampingParams) -> Self {
        let blocks = n_max + 2;
        let g_exists = |nn: usize| nn <= n_max;
        let e_exists = |nn: usize| nn >= 1 && nn - 1 <= n_max;
        let aad = |n: usize| if n < n_max { (n + 1) as f64 } else { 0.0 };
        let mut s = Self {
            blocks,
            coupling: Vec::with_capacity(blocks),
            lower: Vec::with_capacity(blocks),
            number: Vec::with_capacity(blocks),
            anti_number: Vec::with_capacity(blocks),
            down: damping.kappa * (damping.n_thermal + 1.0),
            up: damping.kappa * damping.n_thermal,
            n_max,
        };
        for nn in 0..blocks {
            let both = g_exists(nn) && e_exists(nn);
            s.coupling.push(if both { (nn as f64).sqrt() } else { 0.0 });
            // a maps (g,N+1) → (g,N) with √(N+1) and (e,N) → (e,N−1) with √N.
            let lg = if g_exists(nn + 1) && g_exists(nn) {
                ((nn + 1) as f64).sqrt()
            } else {
                0.0
            };
            let le = if e_exists(nn + 1) && e_exists(nn) {
                (nn as f64).sqrt()
            } else {
                0.0
            };
            s.lower.push([lg, le]);
            let ng = if g_exists(nn) { nn as f64 } else { 0.0 };
            let ne = if e_exists(nn) { (nn - 1) as f64 } else { 0.0 };
            s.number.push([ng, ne]);
            let ag = if g_exists(nn) { aad(nn) } else { 0.0 };
            let ae = if e_exists(nn) { aad(nn - 1) } else { 0.0 };
            s.anti_number.push([ag, ae]);
        }
        s
    }

    /// `L†(O)` block by block at coupling `omega_t`.
    fn adjoint_rhs(&self, o: &[Block], out: &mut [Block], omega_t: f64) {
        let i = C64::new(0.0, 1.0);
        for nn in 0..self.blocks {
            let b = &o[nn];
            let h = 0.5 * omega_t * self.coupling[nn];
            // i[H, O] with H = h σ_x in (g, e) order; O = [o00, o01; o10, o11].
            let mut r = [
                i * h * (b[2] - b[1]),
                i * h * (b[3] - b[0]),
                i * h * (b[0] - b[3]),
                i * h * (b[1] - b[2]),
            ];
            let q = self.number[nn];
            if self.down != 0.0 {
                let mut gain = [C64::new(0.0, 0.0); 4];
                if nn >= 1 {
                    let l = self.lower[nn - 1];
                    let p = &o[nn - 1];
                    gain = [p[0] * l[0] * l[0], p[1] * l[0] * l[1], p[2] * l[1] * l[0], p[3] * l[1] * l[1]];
                }
                for (k, (a, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    r[k] += (gain[k] - b[k] * (0.5 * (q[*a] + q[*c]))) * self.down;
                }
            }
            if self.up != 0.0 {
                let rr = self.anti_number[nn];
                let mut gain = [C64::new(0.0, 0.0); 4];
                if nn + 1 < self.blocks {
                    let l = self.lower[nn];
                    let p = &o[nn + 1];
                    gain = [p[0] * l[0] * l[0], p[1] * l[0] * l[1], p[2] * l[1] * l[0], p[3] * l[1] * l[1]];
                }
                for (k, (a, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    r[k] += (gain[k] - b[k] * (0.5 * (rr[*a] + rr[*c]))) * self.up;
                }
            }
            out[nn] = r;
        }
    }

    fn ground_response(&self, profile: &CouplingProfile, t0: f64, t1: f64) -> Vec<f64> {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let mut o: Vec<Block> = (0..self.blocks)
            .map(|nn| if nn <= self.n_max { [one, zero, zero, zero] } else { [zero; 4] })
            .collect();
        let half = profile.transit_half_width().unwrap_or(f64::INFINITY);
        let rate = |t: f64| if t.abs() <= half { profile.rate(t) } else { 0.0 };
        let fastest = (profile.omega * (self.n_max as f64).sqrt())
            .max(self.down.max(self.up) * (self.n_max as f64 + 1.0));
        let len = t1 - t0;
        if len > 0.0 && fastest > 0.0 {
            let n_steps = (len * STEPS_PER_RABI_UNIT * fastest).ceil().max(1.0) as usize;
            let h = len / n_steps as f64;
            let mut k1 = vec![[zero; 4]; self.blocks];
            let mut k2 = k1.clone();
            let mut k3 = k1.clone();
            let mut k4 = k1.clone();
            let mut tmp = k1.clone();
            let axpy = |dst: &mut Vec<Block>, base: &[Block], k: &[Block], s: f64| {
                for ((d, b), kk) in dst.iter_mut().zip(base).zip(k) {
                    for c in 0..4 {
                        d[c] = b[c] + kk[c] * s;
                    }
                }
            };
            // Backwards in physical time: s = t1 − t.
            for step in 0..n_steps {
                let t = t1 - step as f64 * h;
                let (w0, wm, w1) = (rate(t), rate(t - 0.5 * h), rate(t - h));
                self.adjoint_rhs(&o, &mut k1, w0);
                axpy(&mut tmp, &o, &k1, 0.5 * h);
                self.adjoint_rhs(&tmp, &mut k2, wm);
                axpy(&mut tmp, &o, &k2, 0.5 * h);
                self.adjoint_rhs(&tmp, &mut k3, wm);
                axpy(&mut tmp, &o, &k3, h);
                self.adjoint_rhs(&tmp, &mut k4, w1);
                for nn in 0..self.blocks {
                    for c in 0..4 {
                        o[nn][c] += (k1[nn][c] + (k2[nn][c] + k3[nn][c]) * 2.0 + k4[nn][c]) * (h / 6.0);
                    }
                }
            }
        }
        (0..=self.n_max).map(|nn| o[nn][0].re).collect()
    }
}
