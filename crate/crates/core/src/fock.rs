//! Truncated single-mode Fock space.
//!
//! States live on the photon-number basis `|0⟩ … |n_max⟩`. Coherent
//! amplitudes are built through log-gamma so they stay finite well past
//! `n = 170`, and displacements are exact exponentials of the truncated
//! generator `βa† − β*a`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm;

/// Standard deviations of headroom above the mean photon number.
pub const GUARD_SIGMAS: f64 = 6.0;
/// Fixed headroom added on top of the sigma guard.
pub const GUARD_PAD: f64 = 10.0;
/// Largest Poisson mass allowed above `n_max`.
pub const TAIL_LIMIT: f64 = 1e-10;

/// Highest retained Fock level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    n_max: usize,
}

impl Truncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of basis states, `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Smallest truncation that satisfies both the sigma guard and the tail
    /// bound for a Poisson distribution of mean `n_bar`.
    pub fn for_mean(n_bar: f64) -> Self {
        let guard = (n_bar + GUARD_SIGMAS * n_bar.sqrt() + GUARD_PAD).ceil() as usize;
        let mut n_max = guard.max(1);
        while poisson_tail(n_bar, n_max) >= TAIL_LIMIT {
            n_max += 1;
        }
        Self { n_max }
    }

    /// Truncation adequate for a coherent amplitude of modulus `amplitude`.
    pub fn for_amplitude(amplitude: f64) -> Self {
        Self::for_mean(amplitude * amplitude)
    }

    /// Checks the guard `n_max ≥ n̄ + 6√n̄ + 10` and the Poisson tail bound.
    pub fn check_mean(&self, n_bar: f64) -> Result<()> {
        let needed = Self::for_mean(n_bar);
        if self.n_max < needed.n_max {
            return Err(Error::TruncationTooSmall {
                n_max: self.n_max,
                required: needed.n_max,
                reason: format!("mean photon number {n_bar}"),
            });
        }
        Ok(())
    }

    /// Checks only the Poisson tail bound.
    pub fn check_tail(&self, n_bar: f64) -> Result<()> {
        let tail = poisson_tail(n_bar, self.n_max);
        if tail >= TAIL_LIMIT {
            return Err(Error::TruncationTooSmall {
                n_max: self.n_max,
                required: Self::for_mean(n_bar).n_max,
                reason: format!("Poisson tail {tail:.2e} for mean {n_bar}"),
            });
        }
        Ok(())
    }
}

/// `ln P(n)` for a Poisson distribution of mean `n_bar`.
fn ln_poisson(n_bar: f64, n: usize) -> f64 {
    if n_bar == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as f64;
    -n_bar + n * n_bar.ln() - libm::lgamma(n + 1.0)
}

/// Poisson mass strictly above `n_max`.
pub fn poisson_tail(n_bar: f64, n_max: usize) -> f64 {
    if n_bar == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut n = n_max + 1;
    loop {
        let term = ln_poisson(n_bar, n).exp();
        total += term;
        if (n as f64) > n_bar && term < 1e-30 {
            break;
        }
        n += 1;
    }
    total
}

/// Coherent-state amplitude; `n_bar` is derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentParams {
    alpha: C64,
}

impl CoherentParams {
    pub fn new(alpha: C64) -> Self {
        Self { alpha }
    }

    /// Real positive amplitude with the given mean photon number.
    pub fn from_mean(n_bar: f64) -> Self {
        Self {
            alpha: C64::new(n_bar.max(0.0).sqrt(), 0.0),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn n_bar(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Photon-number spread `√n̄`.
    pub fn delta_n(&self) -> f64 {
        self.n_bar().sqrt()
    }

    /// Phase spread `1/√n̄`.
    pub fn delta_phi(&self) -> f64 {
        1.0 / self.delta_n()
    }
}

/// Pure state of the cavity field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    amplitudes: Array1<C64>,
    truncation: Truncation,
}

impl FieldState {
    pub fn from_amplitudes(amplitudes: Array1<C64>, truncation: Truncation) -> Result<Self> {
        if amplitudes.len() != truncation.dim() {
            return Err(Error::DimensionMismatch {
                expected: truncation.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            truncation,
        })
    }

    pub fn vacuum(truncation: Truncation) -> Self {
        Self::number(0, truncation)
    }

    /// Fock state `|n⟩`. Panics if `n > n_max`.
    pub fn number(n: usize, truncation: Truncation) -> Self {
        assert!(n <= truncation.n_max(), "Fock level above truncation");
        let mut amplitudes = Array1::zeros(truncation.dim());
        amplitudes[n] = C64::new(1.0, 0.0);
        Self {
            amplitudes,
            truncation,
        }
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

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨a⟩`.
    pub fn mean_field(&self) -> C64 {
        (1..self.truncation.dim())
            .map(|n| self.amplitudes[n - 1].conj() * self.amplitudes[n] * (n as f64).sqrt())
            .sum()
    }

    /// `⟨a†a⟩`.
    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum()
    }

    /// Same state on a larger basis (zero padded). Shrinking is allowed only
    /// if the dropped levels are empty to 1e-12.
    pub fn embed(&self, truncation: Truncation) -> Result<Self> {
        let dim = truncation.dim();
        let dropped: f64 = self
            .amplitudes
            .iter()
            .skip(dim)
            .map(|z| z.norm_sqr())
            .sum();
        if dropped > 1e-12 {
            return Err(Error::TruncationTooSmall {
                n_max: truncation.n_max(),
                required: self.truncation.n_max(),
                reason: format!("embedding would drop population {dropped:.2e}"),
            });
        }
        let mut amplitudes = Array1::zeros(dim);
        for (n, z) in self.amplitudes.iter().take(dim).enumerate() {
            amplitudes[n] = *z;
        }
        Ok(Self {
            amplitudes,
            truncation,
        })
    }
}

/// Coherent state `e^{-|α|²/2} Σ αⁿ/√n! |n⟩` on the given truncation.
pub fn coherent_state(params: &CoherentParams, truncation: Truncation) -> Result<FieldState> {
    let n_bar = params.n_bar();
    truncation.check_tail(n_bar)?;
    if n_bar == 0.0 {
        return Ok(FieldState::vacuum(truncation));
    }
    let modulus = params.alpha().norm();
    let phase = params.alpha().arg();
    let amplitudes = Array1::from_shape_fn(truncation.dim(), |n| {
        let nf = n as f64;
        let log_mag = -0.5 * n_bar + nf * modulus.ln() - 0.5 * libm::lgamma(nf + 1.0);
        C64::from_polar(log_mag.exp(), nf * phase)
    });
    FieldState::from_amplitudes(amplitudes, truncation)
}

/// Truncated annihilation operator.
pub fn annihilation(truncation: Truncation) -> Array2<C64> {
    let dim = truncation.dim();
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Displacement operator `exp(βa† − β*a)` on a truncation, kept so that
/// phase-rotated copies `D(βe^{iθ})` can be produced without another
/// exponential.
#[derive(Clone, Debug)]
pub struct Displacement {
    beta: C64,
    matrix: Array2<C64>,
}

impl Displacement {
    pub fn new(beta: C64, truncation: Truncation) -> Self {
        let a = annihilation(truncation);
        let generator = a.t().mapv(|z| z * beta) - a.mapv(|z| z * beta.conj());
        Self {
            beta,
            matrix: expm(&generator),
        }
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// `D(βe^{iθ}) = e^{iθa†a} D(β) e^{−iθa†a}`.
    pub fn rotated(&self, theta: f64) -> Array2<C64> {
        let mut out = self.matrix.clone();
        for ((m, n), z) in out.indexed_iter_mut() {
            *z *= C64::from_polar(1.0, (m as f64 - n as f64) * theta);
        }
        out
    }
}

/// Mean photon number after displacing `s` by `beta`:
/// `⟨n⟩ + 2 Re(β*⟨a⟩) + |β|²`.
pub fn displaced_mean(s: &FieldState, beta: C64) -> f64 {
    s.mean_photon_number() + 2.0 * (beta.conj() * s.mean_field()).re + beta.norm_sqr()
}

fn check_displacement_guard(mean_after: f64, truncation: Truncation) -> Result<()> {
    let needed = mean_after + GUARD_SIGMAS * mean_after.max(0.0).sqrt();
    if needed >= truncation.n_max() as f64 {
        return Err(Error::TruncationTooSmall {
            n_max: truncation.n_max(),
            required: needed.ceil() as usize + 1,
            reason: format!("displaced mean photon number {mean_after:.2}"),
        });
    }
    Ok(())
}

/// Applies `exp(βa† − β*a)` to `s`.
pub fn displace(s: &FieldState, beta: C64) -> Result<FieldState> {
    check_displacement_guard(displaced_mean(s, beta), s.truncation())?;
    let d = Displacement::new(beta, s.truncation());
    FieldState::from_amplitudes(d.matrix().dot(s.amplitudes()), s.truncation())
}

/// `⟨s1|s2⟩`.
pub fn overlap(s1: &FieldState, s2: &FieldState) -> Result<C64> {
    if s1.truncation() != s2.truncation() {
        return Err(Error::DimensionMismatch {
            expected: s1.truncation().dim(),
            found: s2.truncation().dim(),
        });
    }
    Ok(s1
        .amplitudes()
        .iter()
        .zip(s2.amplitudes().iter())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// `|⟨s1|s2⟩|²`.
pub fn fidelity(s1: &FieldState, s2: &FieldState) -> Result<f64> {
    Ok(overlap(s1, s2)?.norm_sqr())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonStatistics {
    pub mean: f64,
    pub variance: f64,
    pub distribution: Vec<f64>,
}

pub fn photon_statistics(s: &FieldState) -> PhotonStatistics {
    let norm_sqr = s.norm().powi(2);
    debug_assert!((norm_sqr - 1.0).abs() < 1e-6, "state not normalized");
    statistics_of(s.probabilities())
}

pub(crate) fn statistics_of(distribution: Vec<f64>) -> PhotonStatistics {
    let mean: f64 = distribution
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum();
    let variance = distribution
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum();
    PhotonStatistics {
        mean,
        variance,
        distribution,
    }
}

/// Closed-form `|⟨α|αe^{iθ}⟩| = exp(−n̄(1 − cos θ))`.
pub fn coherent_overlap_magnitude(n_bar: f64, theta: f64) -> f64 {
    (-n_bar * (1.0 - theta.cos())).exp()
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}
