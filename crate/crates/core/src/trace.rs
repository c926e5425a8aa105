//! Sampled `P_g(t)` signals and their oscillation envelope.

use serde::{Deserialize, Serialize};

/// Fraction of the peak contrast delimiting the top of a revival.
pub const REVIVAL_TOP: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub t: Vec<f64>,
    pub p_g: Vec<f64>,
}

impl Trace {
    pub fn new(t: Vec<f64>, p_g: Vec<f64>) -> Self {
        assert_eq!(t.len(), p_g.len(), "trace grid and values differ in length");
        Self { t, p_g }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn index_near(&self, t: f64) -> usize {
        self.t
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// First time the contrast falls below `threshold`, ignoring the edge
    /// where the window does not fit.
    pub fn collapse_time(&self, window: f64, threshold: f64) -> Option<f64> {
        let contrast = oscillation_contrast(self, window);
        let first = *self.t.first()?;
        self.t
            .iter()
            .zip(contrast.iter())
            .find(|(t, c)| **t >= first + 0.5 * window && **c < threshold)
            .map(|(t, _)| *t)
    }

    /// Revival after `after`: the centroid of the contiguous stretch where the
    /// contrast stays within [`REVIVAL_TOP`] of its maximum, and that maximum.
    pub fn revival(&self, window: f64, after: f64) -> Option<(f64, f64)> {
        let contrast = oscillation_contrast(self, window);
        let last = *self.t.last()?;
        let usable = |k: usize| self.t[k] >= after && self.t[k] <= last - 0.5 * window;
        let peak = (0..self.len())
            .filter(|&k| usable(k))
            .max_by(|a, b| contrast[*a].total_cmp(&contrast[*b]))?;
        let top = REVIVAL_TOP * contrast[peak];
        let mut lo = peak;
        while lo > 0 && usable(lo - 1) && contrast[lo - 1] >= top {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < self.len() && usable(hi + 1) && contrast[hi + 1] >= top {
            hi += 1;
        }
        let (num, den) = (lo..=hi).fold((0.0, 0.0), |(n, d), k| (n + self.t[k] * contrast[k], d + contrast[k]));
        Some((num / den, contrast[peak]))
    }

    pub fn max_deviation_from(&self, level: f64) -> f64 {
        self.p_g
            .iter()
            .map(|p| (p - level).abs())
            .fold(0.0, f64::max)
    }
}

/// Peak-to-peak amplitude of the oscillation around each sample, estimated
/// as `2√2` times the standard deviation over a centred window. For
/// `P_g = ½(1 + C cos ωt)` and a window of one period this returns `C`.
pub fn oscillation_contrast(trace: &Trace, window: f64) -> Vec<f64> {
    let n = trace.len();
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for (i, p) in trace.p_g.iter().enumerate() {
        sum[i + 1] = sum[i] + p;
        sum_sq[i + 1] = sum_sq[i] + p * p;
    }
    let half = 0.5 * window;
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = trace.t[i];
        while trace.t[lo] < t - half {
            lo += 1;
        }
        while hi < n && trace.t[hi] <= t + half {
            hi += 1;
        }
        let count = (hi - lo) as f64;
        let mean = (sum[hi] - sum[lo]) / count;
        let var = ((sum_sq[hi] - sum_sq[lo]) / count - mean * mean).max(0.0);
        out.push(2.0 * std::f64::consts::SQRT_2 * var.sqrt());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn contrast_of_pure_cosine() {
        let omega = 2.0 * PI;
        let t: Vec<f64> = (0..4001).map(|k| k as f64 * 1e-3).collect();
        let p: Vec<f64> = t.iter().map(|t| 0.5 * (1.0 + 0.8 * (omega * t).cos())).collect();
        let trace = Trace::new(t, p);
        let c = oscillation_contrast(&trace, 1.0);
        assert!((c[2000] - 0.8).abs() < 1e-2);
    }

    #[test]
    fn collapse_and_revival_detection() {
        let t: Vec<f64> = (0..8001).map(|k| k as f64 * 1e-3).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|t| {
                let env = (-(t * t)).exp() + (-(t - 6.0) * (t - 6.0)).exp();
                0.5 * (1.0 + env * (20.0 * PI * t).cos())
            })
            .collect();
        let trace = Trace::new(t, p);
        let tc = trace.collapse_time(0.1, 0.1).unwrap();
        assert!((tc - 1.52).abs() < 0.1, "collapse at {tc}");
        let (tr, c) = trace.revival(0.1, 3.0).unwrap();
        assert!((tr - 6.0).abs() < 0.05);
        assert!(c > 0.95);
    }
}
