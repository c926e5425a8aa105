//! Large-`n̄` expansion of the resonant dynamics.
//!
//! Expanding `√(n+1) ≈ √n + 1/(2√n̄)` and every function of `n` to second
//! order around `n̄`, an initial `|g⟩ ⊗ |α⟩` evolves into
//!
//! ```text
//! |ψ(t)⟩ ≈ (1/√2)[e^{−iΩ√n̄t/2}|α⁺(t)⟩|φ⁺(t)⟩ − e^{iΩ√n̄t/2}|α⁻(t)⟩|φ⁻(t)⟩]
//! ```
//!
//! where `|α^±⟩` are quasi-coherent fields rotated by `∓Ωt/(4√n̄)` and
//! `|φ^±⟩ = (e^{∓iΩt/(4√n̄)}|e⟩ ± |g⟩)/√2` rotating dipole states.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_state, overlap, CoherentParams, FieldState, Truncation};
use crate::jc::{Branch, JointState};

/// Collapse threshold on the component overlap.
pub const COLLAPSE_OVERLAP: f64 = 0.1;
/// Below this separation a cat has no interference to lose.
pub const MIN_SEPARATION: f64 = 1e-12;

fn require_field(n_bar: f64) -> Result<()> {
    if n_bar > 0.0 {
        Ok(())
    } else {
        Err(Error::ZeroField)
    }
}

/// `Φ⁺ = Ωt/(4√n̄)`.
pub fn component_phase(omega: f64, t: f64, n_bar: f64) -> Result<f64> {
    require_field(n_bar)?;
    Ok(omega * t / (4.0 * n_bar.sqrt()))
}

/// `|α^±(t)⟩` built term by term over the Fock basis, then normalized.
pub fn approx_field_component(
    branch: Branch,
    p: &CoherentParams,
    omega: f64,
    t: f64,
    truncation: Truncation,
) -> Result<FieldState> {
    let n_bar = p.n_bar();
    require_field(n_bar)?;
    let base = coherent_state(p, truncation)?;
    let s = branch.sign();
    let drift = -s * component_phase(omega, t, n_bar)?;
    let global = s * omega * n_bar.sqrt() * t / 4.0;
    let spread = s * omega * t / (16.0 * n_bar.powf(1.5));
    let amps = Array1::from_shape_fn(truncation.dim(), |n| {
        let nf = n as f64;
        let phase = global + nf * drift + spread * (nf - n_bar).powi(2);
        base.amplitudes()[n] * C64::from_polar(1.0, phase)
    });
    Ok(FieldState::from_amplitudes(amps, truncation)?.normalized())
}

/// `|φ^±(t)⟩` in the `(e, g)` basis.
pub fn approx_atom_state(branch: Branch, omega: f64, t: f64, n_bar: f64) -> Result<[C64; 2]> {
    let s = branch.sign();
    let phi = component_phase(omega, t, n_bar)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Ok([C64::from_polar(r, -s * phi), C64::new(s * r, 0.0)])
}

/// `⟨α⁻(t)|α⁺(t)⟩`, the envelope of the Rabi oscillation.
pub fn component_overlap(
    p: &CoherentParams,
    omega: f64,
    t: f64,
    truncation: Truncation,
) -> Result<C64> {
    let plus = approx_field_component(Branch::Plus, p, omega, t, truncation)?;
    let minus = approx_field_component(Branch::Minus, p, omega, t, truncation)?;
    overlap(&minus, &plus)
}

/// `P_g(t) = ½[1 + Re(e^{−iΩ√n̄t}⟨α⁻|α⁺⟩)]`.
pub fn approx_pg(p: &CoherentParams, omega: f64, t: f64, truncation: Truncation) -> Result<f64> {
    let ov = component_overlap(p, omega, t, truncation)?;
    let beat = C64::from_polar(1.0, -omega * p.n_bar().sqrt() * t);
    Ok((0.5 * (1.0 + (beat * ov).re)).clamp(0.0, 1.0))
}

/// The two branches of the expansion at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitComponents {
    pub plus_field: FieldState,
    pub minus_field: FieldState,
    pub plus_atom: [C64; 2],
    pub minus_atom: [C64; 2],
    /// `e^{∓iΩ√n̄t/2}`.
    pub global_phases: [C64; 2],
}

impl SplitComponents {
    pub fn new(p: &CoherentParams, omega: f64, t: f64, truncation: Truncation) -> Result<Self> {
        let n_bar = p.n_bar();
        let fast = 0.5 * omega * n_bar.sqrt() * t;
        Ok(Self {
            plus_field: approx_field_component(Branch::Plus, p, omega, t, truncation)?,
            minus_field: approx_field_component(Branch::Minus, p, omega, t, truncation)?,
            plus_atom: approx_atom_state(Branch::Plus, omega, t, n_bar)?,
            minus_atom: approx_atom_state(Branch::Minus, omega, t, n_bar)?,
            global_phases: [C64::from_polar(1.0, -fast), C64::from_polar(1.0, fast)],
        })
    }

    /// The joint state as the expansion gives it; not renormalized.
    pub fn reconstruct(&self) -> JointState {
        let plus = JointState::product_superposition(self.plus_atom, &self.plus_field);
        let minus = JointState::product_superposition(self.minus_atom, &self.minus_field);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let amps = plus.amplitudes() * (self.global_phases[0] * r)
            - minus.amplitudes() * (self.global_phases[1] * r);
        JointState::from_amplitudes(amps, self.plus_field.truncation()).expect("same truncation")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatMetrics {
    pub d_squared: f64,
    /// `2 T_cav / d²`; infinite when the components coincide.
    pub decoherence_time: f64,
    pub phi_plus: f64,
}

/// `d² = 4n̄ sin²Φ⁺` and the decoherence time `2T_cav/d²`.
pub fn cat_metrics(omega: f64, t: f64, n_bar: f64, t_cav: f64) -> Result<CatMetrics> {
    if t_cav <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cavity lifetime must be positive, got {t_cav}"
        )));
    }
    let phi_plus = component_phase(omega, t, n_bar)?;
    let d_squared = 4.0 * n_bar * phi_plus.sin().powi(2);
    let decoherence_time = if d_squared < MIN_SEPARATION {
        f64::INFINITY
    } else {
        2.0 * t_cav / d_squared
    };
    Ok(CatMetrics {
        d_squared,
        decoherence_time,
        phi_plus,
    })
}

/// Field and time at which the classical limit is probed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLimitBase {
    pub omega: f64,
    pub n_bar: f64,
    /// Time at which `Φ⁺` is reported.
    pub t_fixed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLimitReport {
    pub scale: f64,
    pub omega: f64,
    pub n_bar: f64,
    /// `Ω√n̄`, invariant under the scaling.
    pub rabi_frequency: f64,
    pub phi_plus: f64,
    /// First time `|⟨α⁻|α⁺⟩|` drops below [`COLLAPSE_OVERLAP`].
    pub collapse_time: f64,
}

/// First time the component overlap falls below [`COLLAPSE_OVERLAP`].
pub fn overlap_collapse_time(omega: f64, n_bar: f64) -> Result<f64> {
    let p = CoherentParams::from_mean(n_bar);
    let truncation = Truncation::for_mean(n_bar);
    let magnitude = |t: f64| component_overlap(&p, omega, t, truncation).map(|z| z.norm());
    let step = 0.05 / omega;
    let mut lo = 0.0;
    let mut hi = step;
    // The envelope first reaches zero near Φ⁺ = π/2.
    let limit = 2.0 * std::f64::consts::PI * n_bar.sqrt() / omega;
    while magnitude(hi)? >= COLLAPSE_OVERLAP {
        lo = hi;
        hi += step;
        if hi > limit {
            return Err(Error::InvalidParameter(format!(
                "overlap never collapses for n_bar = {n_bar}"
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if magnitude(mid)? >= COLLAPSE_OVERLAP {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rescales `Ω → Ω/s`, `n̄ → n̄ s²` and reports the invariants.
pub fn classical_limit_check(scale: f64, base: &ClassicalLimitBase) -> Result<ClassicalLimitReport> {
    if scale < 1.0 {
        return Err(Error::InvalidParameter(format!("scale must be ≥ 1, got {scale}")));
    }
    let omega = base.omega / scale;
    let n_bar = base.n_bar * scale * scale;
    Ok(ClassicalLimitReport {
        scale,
        omega,
        n_bar,
        rabi_frequency: omega * n_bar.sqrt(),
        phi_plus: component_phase(omega, base.t_fixed, n_bar)?,
        collapse_time: overlap_collapse_time(omega, n_bar)?,
    })
}
