//! Dense complex matrix helpers: matrix exponential, Hermitian spectra and
//! trace distance.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

fn one_norm(m: &Array2<C64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
///
/// The argument is scaled until its 1-norm is at most 1/2, where the Taylor
/// series converges to machine precision in well under 30 terms.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm needs a square matrix");
    let norm = one_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.mapv(|z| z / 2f64.powi(squarings));

    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..40 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result = result + &term;
        if one_norm(&term) < 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

fn to_nalgebra(m: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part of
/// `m` is used.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let h = to_nalgebra(m);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Trace distance ½‖a − b‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let diff = a - b;
    0.5 * hermitian_eigenvalues(&diff)
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// Largest entry of |m − m†|.
pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((4, 4));
        let e = expm(&z);
        assert_eq!(e, Array2::eye(4));
    }

    #[test]
    fn expm_matches_rotation() {
        // exp(-i θ σ_x) = cos θ I − i sin θ σ_x
        let theta = 7.3;
        let m = ndarray::arr2(&[
            [C64::new(0.0, 0.0), C64::new(0.0, -theta)],
            [C64::new(0.0, -theta), C64::new(0.0, 0.0)],
        ]);
        let e = expm(&m);
        assert!((e[[0, 0]] - C64::new(theta.cos(), 0.0)).norm() < 1e-13);
        assert!((e[[0, 1]] - C64::new(0.0, -theta.sin())).norm() < 1e-13);
    }

    #[test]
    fn trace_distance_of_orthogonal_projectors() {
        let mut a = Array2::<C64>::zeros((2, 2));
        let mut b = Array2::<C64>::zeros((2, 2));
        a[[0, 0]] = C64::new(1.0, 0.0);
        b[[1, 1]] = C64::new(1.0, 0.0);
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-14);
    }
}
