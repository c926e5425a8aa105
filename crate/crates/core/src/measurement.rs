//! Field observables: the homodyne phase scan, Wigner function, phase and
//! quadrature distributions.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{extract_components, Peak};
use crate::fock::{Displacement, FieldState, Truncation};
use crate::jc::CouplingProfile;
use crate::lindblad::{probe_ground_response, Basis, DampingParams, DensityOperator};

/// A cavity field, pure or mixed.
#[derive(Clone, Copy, Debug)]
pub enum FieldInput<'a> {
    Pure(&'a FieldState),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a FieldState> for FieldInput<'a> {
    fn from(s: &'a FieldState) -> Self {
        FieldInput::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for FieldInput<'a> {
    fn from(r: &'a DensityOperator) -> Self {
        FieldInput::Mixed(r)
    }
}

impl FieldInput<'_> {
    pub fn truncation(&self) -> Truncation {
        match self {
            FieldInput::Pure(s) => s.truncation(),
            FieldInput::Mixed(r) => r.truncation(),
        }
    }

    fn check(&self) -> Result<()> {
        if let FieldInput::Mixed(r) = self {
            if r.basis() != Basis::Field {
                return Err(Error::DimensionMismatch {
                    expected: r.truncation().dim(),
                    found: r.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn mean_photon_number(&self) -> f64 {
        match self {
            FieldInput::Pure(s) => s.mean_photon_number(),
            FieldInput::Mixed(r) => r.mean_photon_number(),
        }
    }

    /// Matrix element `ρ_mn`.
    fn element(&self, m: usize, n: usize) -> C64 {
        match self {
            FieldInput::Pure(s) => s.amplitudes()[m] * s.amplitudes()[n].conj(),
            FieldInput::Mixed(r) => r.matrix()[[m, n]],
        }
    }

    /// Dense `ρ` (built for pure states).
    pub fn density(&self) -> Array2<C64> {
        match self {
            FieldInput::Pure(s) => DensityOperator::from_field(s).matrix().clone(),
            FieldInput::Mixed(r) => r.matrix().clone(),
        }
    }
}

/// Probe atom sent through the mode after the reference injection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub profile: CouplingProfile,
    /// Window relative to the axis crossing (Gaussian) or from `0` (constant).
    pub start: f64,
    pub end: f64,
    pub damping: DampingParams,
}

impl Probe {
    /// Full transit of a Gaussian mode, no damping.
    pub fn transit(profile: CouplingProfile) -> Self {
        let half = profile.transit_half_width().unwrap_or(0.0);
        Self {
            profile,
            start: -half,
            end: half,
            damping: DampingParams::none(),
        }
    }

    /// Constant coupling for `duration`.
    pub fn constant(omega: f64, duration: f64) -> Self {
        Self {
            profile: CouplingProfile::constant(omega),
            start: 0.0,
            end: duration,
            damping: DampingParams::none(),
        }
    }

    pub fn with_damping(mut self, damping: DampingParams) -> Self {
        self.damping = damping;
        self
    }

    /// Probability of staying in `g` for each photon number up to `n_max`.
    pub fn ground_response(&self, n_max: usize) -> Vec<f64> {
        probe_ground_response(&self.profile, self.start, self.end, &self.damping, n_max)
    }
}

/// `S_g(φ)` on a phase grid, with fitted peaks once [`PhaseScan::fit`] ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub phi_grid: Vec<f64>,
    pub s_g: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// RMS residual of the peak fit.
    pub fit_residual: Option<f64>,
    /// Fitted peaks not attributed to a field component.
    #[serde(default)]
    pub extra_peaks: Vec<Peak>,
}

impl PhaseScan {
    pub fn new(phi_grid: Vec<f64>, s_g: Vec<f64>) -> Self {
        assert_eq!(phi_grid.len(), s_g.len(), "scan grid and values differ in length");
        Self {
            phi_grid,
            s_g,
            peaks: Vec::new(),
            fit_residual: None,
            extra_peaks: Vec::new(),
        }
    }

    /// Fits `expected` component peaks on a constant baseline and stores
    /// them (see [`extract_components`]).
    pub fn fit(mut self, expected: usize) -> Result<Self> {
        let fit = extract_components(&self, expected)?;
        self.peaks = fit.peaks;
        self.extra_peaks = fit.extra;
        self.fit_residual = Some(fit.residual);
        Ok(self)
    }

    /// Center distance between the outermost fitted peaks.
    pub fn separation(&self) -> Option<f64> {
        match self.peaks.as_slice() {
            [first, .., last] => Some(last.center - first.center),
            _ => None,
        }
    }
}

/// Uniform grid of `points` phases over `[−π, π)`.
pub fn phase_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -PI + 2.0 * PI * k as f64 / points as f64)
        .collect()
}

/// Truncation needed once a field of mean `n` is displaced by up to `amplitude`.
pub fn scan_truncation(field_mean: f64, amplitude: f64, current: Truncation) -> Truncation {
    let worst = (field_mean.sqrt() + amplitude).powi(2);
    let needed = Truncation::for_mean(worst);
    if needed.n_max() > current.n_max() {
        needed
    } else {
        current
    }
}

/// Homodyne phase scan: for each `φ` the field is displaced by
/// `−α e^{−iφ}` (a reference of amplitude `α` and phase `π − φ`), then the
/// probe crosses the mode and `S_g(φ)` is its probability to stay in `g`.
///
/// A field component of phase `Φ` gives a peak at `φ = −Φ`, so the component
/// attached to `|φ_a⁺⟩` (phase `−Φ⁺`) shows at `+Φ⁺`.
pub fn homodyne_scan(
    field: FieldInput<'_>,
    injection_amplitude: f64,
    probe: &Probe,
    phi_grid: &[f64],
) -> Result<PhaseScan> {
    field.check()?;
    let own = field.truncation();
    let scan = scan_truncation(field.mean_photon_number(), injection_amplitude, own);
    let n_run = own.dim();
    let dim = scan.dim();
    let response = probe.ground_response(scan.n_max());
    let d = Displacement::new(C64::new(-injection_amplitude, 0.0), scan);
    let base = d.matrix();
    // Only the first n_run columns touch the field.
    let cols = Array2::from_shape_fn((dim, n_run), |(m, n)| base[[m, n]]);
    let rho = match field {
        FieldInput::Mixed(r) => Some(r.matrix().clone()),
        FieldInput::Pure(_) => None,
    };
    let amps: Option<Array1<C64>> = match field {
        FieldInput::Pure(s) => Some(s.amplitudes().clone()),
        FieldInput::Mixed(_) => None,
    };
    let s_g: Vec<f64> = phi_grid
        .par_iter()
        .map(|&phi| {
            // D(−αe^{−iφ})_{mn} = e^{−i(m−n)φ} D(−α)_{mn}.
            let rot_col: Vec<C64> = (0..n_run).map(|n| C64::from_polar(1.0, n as f64 * phi)).collect();
            let probs: Vec<f64> = match (&amps, &rho) {
                (Some(a), _) => {
                    let v: Vec<C64> = (0..n_run).map(|n| a[n] * rot_col[n]).collect();
                    (0..dim)
                        .map(|m| {
                            let mut acc = C64::new(0.0, 0.0);
                            for (n, vn) in v.iter().enumerate() {
                                acc += cols[[m, n]] * vn;
                            }
                            acc.norm_sqr()
                        })
                        .collect()
                }
                (None, Some(r)) => {
                    // diag(D ρ D†) with the phase factors folded into ρ.
                    let rr = Array2::from_shape_fn((n_run, n_run), |(i, j)| {
                        r[[i, j]] * rot_col[i] * rot_col[j].conj()
                    });
                    let dr = cols.dot(&rr);
                    (0..dim)
                        .map(|m| {
                            let mut acc = C64::new(0.0, 0.0);
                            for n in 0..n_run {
                                acc += dr[[m, n]] * cols[[m, n]].conj();
                            }
                            acc.re
                        })
                        .collect()
                }
                _ => unreachable!(),
            };
            probs
                .iter()
                .zip(&response)
                .map(|(p, r)| p * r)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    Ok(PhaseScan::new(phi_grid.to_vec(), s_g))
}

/// Sampled Wigner function, `values[[iy, ix]] = W(beta_x[ix] + i beta_y[iy])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub beta_x: Vec<f64>,
    pub beta_y: Vec<f64>,
    pub values: Array2<f64>,
}

impl WignerGrid {
    /// Riemann sum of `W` over the grid (uniform spacing assumed).
    pub fn integral(&self) -> f64 {
        let dx = spacing(&self.beta_x);
        let dy = spacing(&self.beta_y);
        self.values.sum() * dx * dy
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ W dβ_y` at each `β_x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dy = spacing(&self.beta_y);
        (0..self.beta_x.len())
            .map(|ix| self.values.column(ix).sum() * dy)
            .collect()
    }
}

fn spacing(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        1.0
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    }
}

/// Symmetric uniform axis of `points` samples over `[−extent, extent]`.
pub fn symmetric_axis(extent: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -extent + 2.0 * extent * k as f64 / (points.max(2) - 1) as f64)
        .collect()
}

/// `W(β) = (2/π) Tr[D(−β) ρ D(−β)† Π]`, evaluated with the Laguerre
/// recursion over matrix elements (no displacement matrices).
pub fn wigner_point(field: FieldInput<'_>, beta: C64) -> Result<f64> {
    field.check()?;
    Ok(wigner_at(&field, beta, &mut Vec::new()))
}

fn wigner_at(field: &FieldInput<'_>, beta: C64, w: &mut Vec<C64>) -> f64 {
    let dim = field.truncation().dim();
    w.clear();
    w.resize(dim, C64::new(0.0, 0.0));
    let two_a = beta * 2.0;
    w[0] = C64::new((-2.0 * beta.norm_sqr()).exp() / PI, 0.0);
    let mut acc = field.element(0, 0).re * w[0].re;
    for n in 1..dim {
        w[n] = two_a * w[n - 1] / (n as f64).sqrt();
        acc += 2.0 * (field.element(0, n) * w[n]).re;
    }
    for m in 1..dim {
        let sm = (m as f64).sqrt();
        let mut temp = w[m];
        w[m] = (two_a.conj() * temp - w[m - 1] * sm) / sm;
        acc += field.element(m, m).re * w[m].re;
        for n in m + 1..dim {
            let next = (two_a * w[n - 1] - temp * sm) / (n as f64).sqrt();
            temp = w[n];
            w[n] = next;
            acc += 2.0 * (field.element(m, n) * w[n]).re;
        }
    }
    2.0 * acc
}

/// Wigner function on a rectangular grid, rows evaluated in parallel.
pub fn wigner(field: FieldInput<'_>, beta_x: &[f64], beta_y: &[f64]) -> Result<WignerGrid> {
    field.check()?;
    // A coherent component must sit inside the grid.
    let reach = field.mean_photon_number().sqrt();
    let extent = beta_x
        .iter()
        .chain(beta_y)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if extent < reach {
        return Err(Error::InvalidParameter(format!(
            "Wigner grid extent {extent:.2} does not reach the field amplitude {reach:.2}"
        )));
    }
    let rows: Vec<Vec<f64>> = beta_y
        .par_iter()
        .map(|&y| {
            let mut scratch = Vec::new();
            beta_x
                .iter()
                .map(|&x| wigner_at(&field, C64::new(x, y), &mut scratch))
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((beta_y.len(), beta_x.len()));
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, v) in row.into_iter().enumerate() {
            values[[iy, ix]] = v;
        }
    }
    Ok(WignerGrid {
        beta_x: beta_x.to_vec(),
        beta_y: beta_y.to_vec(),
        values,
    })
}

/// `P(φ) = |⟨φ|ψ⟩|²` with `|φ⟩ = Σ e^{inφ}|n⟩/√(2π)`.
pub fn phase_distribution(field: FieldInput<'_>, phi_grid: &[f64]) -> Result<Vec<f64>> {
    field.check()?;
    let dim = field.truncation().dim();
    let rho = field.density();
    Ok(phi_grid
        .par_iter()
        .map(|&phi| {
            let v: Vec<C64> = (0..dim).map(|n| C64::from_polar(1.0, n as f64 * phi)).collect();
            let mut acc = 0.0;
            for m in 0..dim {
                let mut row = C64::new(0.0, 0.0);
                for n in 0..dim {
                    row += rho[[m, n]] * v[n];
                }
                acc += (v[m].conj() * row).re;
            }
            (acc / (2.0 * PI)).max(0.0)
        })
        .collect())
}

/// Hermite functions `ψ_n(x) = 2^{1/4} φ_n(√2 x)` for `n ≤ n_max`, normalized
/// in `x = Re β`.
fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let u = std::f64::consts::SQRT_2 * x;
    let mut phi = vec![0.0; n_max + 1];
    phi[0] = PI.powf(-0.25) * (-0.5 * u * u).exp();
    if n_max >= 1 {
        phi[1] = std::f64::consts::SQRT_2 * u * phi[0];
    }
    for n in 1..n_max {
        let nf = n as f64;
        phi[n + 1] = (2.0 / (nf + 1.0)).sqrt() * u * phi[n] - (nf / (nf + 1.0)).sqrt() * phi[n - 1];
    }
    let scale = 2f64.powf(0.25);
    phi.iter().map(|p| p * scale).collect()
}

/// Distribution of the quadrature `Re β`, `⟨x|ρ|x⟩`.
pub fn quadrature_distribution(field: FieldInput<'_>, x_grid: &[f64]) -> Result<Vec<f64>> {
    field.check()?;
    let n_max = field.truncation().n_max();
    let rho = field.density();
    Ok(x_grid
        .par_iter()
        .map(|&x| {
            let h = hermite_functions(x, n_max);
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..=n_max {
                for n in 0..=n_max {
                    acc += rho[[m, n]] * (h[m] * h[n]);
                }
            }
            acc.re.max(0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, CoherentParams};
    use crate::linalg::dagger;

    fn coherent(alpha: C64) -> FieldState {
        coherent_state(&CoherentParams::new(alpha), Truncation::for_amplitude(alpha.norm())).unwrap()
    }

    /// Oracle: `(2/π) Σ (−1)ⁿ (D(−β) ρ D(−β)†)_nn`.
    fn displaced_parity(rho: &Array2<C64>, t: Truncation, beta: C64) -> f64 {
        let d = Displacement::new(-beta, t);
        let moved = d.matrix().dot(rho).dot(&dagger(d.matrix()));
        (0..t.dim())
            .map(|n| if n % 2 == 0 { moved[[n, n]].re } else { -moved[[n, n]].re })
            .sum::<f64>()
            * 2.0
            / PI
    }

    #[test]
    fn vacuum_wigner_at_origin() {
        let v = FieldState::vacuum(Truncation::new(20).unwrap());
        let w = wigner_point(FieldInput::Pure(&v), C64::new(0.0, 0.0)).unwrap();
        assert!((w - 2.0 / PI).abs() < 1e-12);
        assert!((w - 0.63662).abs() < 1e-5);
    }

    #[test]
    fn coherent_wigner_is_displaced_gaussian() {
        let alpha = C64::new(2.0, -1.0);
        let s = coherent(alpha);
        for (dx, dy) in [(0.0, 0.0), (0.3, 0.1), (-0.5, 0.4), (1.0, 1.0)] {
            let beta = alpha + C64::new(dx, dy);
            let w = wigner_point(FieldInput::Pure(&s), beta).unwrap();
            let expected = 2.0 / PI * (-2.0 * (dx * dx + dy * dy)).exp();
            assert!((w - expected).abs() < 1e-7, "{beta}: {w} vs {expected}");
        }
    }

    #[test]
    fn wigner_matches_displaced_parity() {
        let t = Truncation::new(60).unwrap();
        let p = CoherentParams::new(C64::new(3.0, 0.0));
        let a = coherent_state(&p, t).unwrap();
        let b = coherent_state(&CoherentParams::new(C64::new(0.0, 3.0)), t).unwrap();
        let cat = FieldState::from_amplitudes(a.amplitudes() + b.amplitudes(), t)
            .unwrap()
            .normalized();
        let rho = DensityOperator::from_field(&cat);
        for beta in [C64::new(0.0, 0.0), C64::new(1.5, 1.5), C64::new(2.9, 0.2), C64::new(-0.7, 1.1)] {
            let w = wigner_point(FieldInput::Mixed(&rho), beta).unwrap();
            let oracle = displaced_parity(rho.matrix(), t, beta);
            assert!((w - oracle).abs() < 1e-9, "{beta}: {w} vs {oracle}");
        }
    }

    #[test]
    fn cat_wigner_has_fringes() {
        // Oracle: closed form for (|αe^{iΦ}⟩ + |αe^{−iΦ}⟩)/N.
        let n_bar: f64 = 36.0;
        let phi: f64 = 0.4;
        let a1 = C64::from_polar(n_bar.sqrt(), phi);
        let a2 = C64::from_polar(n_bar.sqrt(), -phi);
        let t = Truncation::for_mean(n_bar);
        let s1 = coherent_state(&CoherentParams::new(a1), t).unwrap();
        let s2 = coherent_state(&CoherentParams::new(a2), t).unwrap();
        let cat = FieldState::from_amplitudes(s1.amplitudes() + s2.amplitudes(), t).unwrap();
        let norm2 = cat.norm().powi(2);
        let cat = cat.normalized();
        let closed = |beta: C64| -> f64 {
            let g = |a: C64| (-2.0 * (beta - a).norm_sqr()).exp();
            // Cross term: (2/π)·2 Re[⟨a2|a1⟩-weighted Gaussian].
            let cross = (-2.0 * (beta - a1) * (beta - a2).conj()
                + (a2.conj() * a1 - 0.5 * a1.norm_sqr() - 0.5 * a2.norm_sqr()))
            .exp();
            2.0 / PI * (g(a1) + g(a2) + 2.0 * cross.re) / norm2
        };
        let mid = 0.5 * (a1 + a2);
        let mut max_fringe: f64 = 0.0;
        for k in -40..=40 {
            let beta = mid + C64::new(0.0, 0.02 * k as f64);
            let w = wigner_point(FieldInput::Pure(&cat), beta).unwrap();
            assert!((w - closed(beta)).abs() < 1e-8, "{beta}");
            max_fringe = max_fringe.max(w.abs());
        }
        let lobe = wigner_point(FieldInput::Pure(&cat), a1).unwrap();
        assert!(max_fringe >= 0.5 * lobe);
        assert!(max_fringe <= 2.0 / PI + 1e-6);
    }

    #[test]
    fn grid_normalization_and_bound() {
        let alpha = C64::new(1.5, 0.5);
        let s = coherent(alpha);
        let axis = symmetric_axis(5.0, 101);
        let g = wigner(FieldInput::Pure(&s), &axis, &axis).unwrap();
        assert!((g.integral() - 1.0).abs() < 0.02);
        assert!(g.max_abs() <= 2.0 / PI + 1e-6);
    }

    #[test]
    fn wigner_marginal_is_quadrature_distribution() {
        let axis = symmetric_axis(6.0, 121);
        for alpha in [C64::new(0.0, 0.0), C64::new(1.2, -0.8)] {
            let s = coherent(alpha);
            let g = wigner(FieldInput::Pure(&s), &axis, &axis).unwrap();
            let marginal = g.marginal_x();
            let direct = quadrature_distribution(FieldInput::Pure(&s), &axis).unwrap();
            let peak = direct.iter().cloned().fold(0.0, f64::max);
            for (m, d) in marginal.iter().zip(&direct) {
                assert!((m - d).abs() <= 0.02 * peak, "{m} vs {d}");
            }
            // Coherent quadrature: Gaussian of variance 1/4 around Re α.
            let ix = axis.iter().position(|x| (x - 1.2).abs() < 1e-9);
            if let Some(ix) = ix {
                if alpha.re != 0.0 {
                    let expected = (2.0 / PI).sqrt();
                    assert!((direct[ix] - expected).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn phase_distribution_properties() {
        let grid = phase_grid(512);
        let dphi = 2.0 * PI / 512.0;
        let vac = FieldState::vacuum(Truncation::new(10).unwrap());
        let p = phase_distribution(FieldInput::Pure(&vac), &grid).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / (2.0 * PI)).abs() < 1e-12));

        let s = coherent(C64::new(6.0, 0.0));
        let p = phase_distribution(FieldInput::Pure(&s), &grid).unwrap();
        assert!((p.iter().sum::<f64>() * dphi - 1.0).abs() < 1e-6);
        let (imax, _) = p.iter().enumerate().fold((0, 0.0), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        assert!(grid[imax].abs() < dphi);
        let var: f64 = grid.iter().zip(&p).map(|(g, v)| g * g * v * dphi).sum();
        // Δφ = 1/√n̄ is twice the standard deviation.
        assert!((var.sqrt() * 2.0 - 1.0 / 6.0).abs() < 0.01, "{}", var.sqrt());
    }

    #[test]
    fn coherent_scan_peaks_at_origin() {
        let alpha = 29f64.sqrt();
        let s = coherent(C64::new(alpha, 0.0));
        let probe = Probe::transit(CouplingProfile::gaussian(3e5, 6e-3, 335.0));
        let scan = homodyne_scan(FieldInput::Pure(&s), alpha, &probe, &phase_grid(96))
            .unwrap()
            .fit(1)
            .unwrap();
        assert!(scan.peaks[0].center.abs() < 1e-3, "{:?}", scan.peaks);
        assert!(scan.s_g.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn vacuum_scan_is_flat() {
        let vac = FieldState::vacuum(Truncation::new(10).unwrap());
        let probe = Probe::transit(CouplingProfile::gaussian(3e5, 6e-3, 335.0));
        let scan = homodyne_scan(FieldInput::Pure(&vac), 5.0, &probe, &phase_grid(32)).unwrap();
        let first = scan.s_g[0];
        assert!(scan.s_g.iter().all(|v| (v - first).abs() < 1e-10));
    }

    #[test]
    fn pure_and_mixed_scans_agree() {
        let s = coherent(C64::from_polar(4.0, 0.3));
        let rho = DensityOperator::from_field(&s);
        let probe = Probe::transit(CouplingProfile::gaussian(3e5, 6e-3, 335.0));
        let grid = phase_grid(24);
        let a = homodyne_scan(FieldInput::Pure(&s), 4.0, &probe, &grid).unwrap();
        let b = homodyne_scan(FieldInput::Mixed(&rho), 4.0, &probe, &grid).unwrap();
        for (x, y) in a.s_g.iter().zip(&b.s_g) {
            assert!((x - y).abs() < 1e-10);
        }
        // Component phase 0.3 shows at φ = −0.3.
        let fitted = homodyne_scan(FieldInput::Pure(&s), 4.0, &probe, &phase_grid(96))
            .unwrap()
            .fit(1)
            .unwrap();
        assert!((fitted.peaks[0].center + 0.3).abs() < 1e-3);
    }

    #[test]
    fn scan_rejects_joint_operator() {
        let t = Truncation::new(4).unwrap();
        let joint = DensityOperator::from_joint(&crate::jc::JointState::product(
            crate::jc::Level::Ground,
            &FieldState::vacuum(t),
        ));
        let probe = Probe::constant(3e5, 1e-5);
        assert!(homodyne_scan(FieldInput::Mixed(&joint), 1.0, &probe, &[0.0]).is_err());
    }
}
