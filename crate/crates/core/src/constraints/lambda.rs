//! Integrating out the Lagrange multipliers.
//!
//! With the multipliers `λ_0 .. λ_{N+1}` distributed as a Wiener path of
//! diffusion `ν` and coupled through `exp(-(i/ħ) Σ_{n=1}^{N} λ_n p_n)`, the
//! interior integrals are Gaussian. Dividing by `(2πνT)^{-1/2}` leaves
//!
//! ```text
//! W = exp(-(λ_{N+1}-λ_0)² / (2νT))
//!   · exp(-(i/ħT) Σ_j p_j [λ_{N+1}(t_j - t_0) + λ_0 (t_{N+1} - t_j)])
//!   · exp(-(ν/(2ħ²T)) Σ_{j,k} p_j p_k (min(t_j,t_k) - t_0)(t_{N+1} - max(t_j,t_k)))
//! ```
//!
//! per constrained component. The third factor is the Brownian-bridge
//! covariance, so `p` concentrates at zero with width `∝ ν^{-1/2}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

fn check_times(times: &[f64], interior: usize) -> Result<()> {
    if times.len() != interior + 2 {
        return Err(Error::Dimension {
            what: "slice times",
            expected: interior + 2,
            got: times.len(),
        });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("slice times"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "slice times must increase strictly"));
    }
    Ok(())
}

/// Effective weight on the interior constrained momenta after the
/// multipliers are integrated out.
///
/// `p_path[j]` holds the constrained momenta at interior slice `j + 1`,
/// `lambda_ends[i] = (λ_0, λ_{N+1})` for constrained component `i`, and
/// `times` the `N + 2` slice times including both ends.
pub fn lambda_effective_weight(
    p_path: &[Vec<f64>],
    lambda_ends: &[(f64, f64)],
    nu: f64,
    times: &[f64],
    hbar: f64,
) -> Result<Complex64> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::param("nu", format!("must be positive, got {nu}")));
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::param("hbar", format!("must be positive, got {hbar}")));
    }
    check_times(times, p_path.len())?;
    let nc = lambda_ends.len();
    if let Some(row) = p_path.iter().find(|r| r.len() != nc) {
        return Err(Error::Dimension {
            what: "constrained momenta per slice",
            expected: nc,
            got: row.len(),
        });
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let span = t1 - t0;
    let inner = &times[1..times.len() - 1];
    let mut log = Complex64::new(0.0, 0.0);
    for (i, &(l0, l1)) in lambda_ends.iter().enumerate() {
        let dl = l1 - l0;
        let mut phase = 0.0;
        let mut quad = 0.0;
        for (j, (row, &tj)) in p_path.iter().zip(inner).enumerate() {
            let pj = row[i];
            phase += pj * (l1 * (tj - t0) + l0 * (t1 - tj));
            for (row_k, &tk) in p_path.iter().zip(inner).skip(j) {
                let pk = row_k[i];
                let cov = (tj.min(tk) - t0) * (t1 - tj.max(tk));
                // off-diagonal pairs appear twice in the double sum
                let mult = if tk == tj { 1.0 } else { 2.0 };
                quad += mult * pj * pk * cov;
            }
        }
        log += Complex64::new(
            -dl * dl / (2.0 * nu * span) - nu * quad / (2.0 * hbar * hbar * span),
            -phase / (hbar * span),
        );
    }
    if !(log.re.is_finite() && log.im.is_finite()) {
        return Err(Error::NonFinite("lambda weight"));
    }
    Ok(log.exp())
}

/// Uniform slice times `t_n = n T/(N+1)`.
pub(crate) fn uniform_times(slices: usize, total_time: f64) -> Vec<f64> {
    let eps = total_time / (slices as f64 + 1.0);
    (0..slices + 2).map(|n| n as f64 * eps).collect()
}

/// Concentration of the effective weight at one diffusion constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleRow {
    pub nu: f64,
    /// Gaussian width of the weight along a constant momentum path.
    pub width: f64,
    /// `|W|` with a single momentum `probe` at the middle slice, relative to
    /// the weight of the zero path.
    pub weight_at_probe: f64,
}

/// Widths and probe weights of the single-constraint effective weight over
/// `nu_ladder`, with both multiplier ends at zero.
pub fn saddle_concentration_check(
    nu_ladder: &[f64],
    slices: usize,
    total_time: f64,
    hbar: f64,
    probe: f64,
) -> Result<Vec<SaddleRow>> {
    if slices == 0 {
        return Err(Error::param("slices", "at least one interior slice is required"));
    }
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::param("total_time", "must be positive"));
    }
    let times = uniform_times(slices, total_time);
    let inner = &times[1..=slices];
    let t1 = times[slices + 1];
    let total_cov: f64 = inner
        .iter()
        .flat_map(|&a| inner.iter().map(move |&b| a.min(b) * (t1 - a.max(b))))
        .sum();
    let mid = slices / 2;
    nu_ladder
        .iter()
        .map(|&nu| {
            let zero = lambda_effective_weight(&vec![vec![0.0]; slices], &[(0.0, 0.0)], nu, &times, hbar)?;
            let mut path = vec![vec![0.0]; slices];
            path[mid][0] = probe;
            let w = lambda_effective_weight(&path, &[(0.0, 0.0)], nu, &times, hbar)?;
            Ok(SaddleRow {
                nu,
                width: hbar * (total_time / (nu * total_cov)).sqrt(),
                weight_at_probe: w.norm() / zero.norm(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_path_has_unit_weight() {
        let t = uniform_times(3, 1.0);
        let w = lambda_effective_weight(&vec![vec![0.0]; 3], &[(0.7, 0.7)], 2.0, &t, 1.0).unwrap();
        assert!((w - 1.0).norm() < 1e-15);
    }

    #[test]
    fn width_scales_as_inverse_root_nu() {
        let rows = saddle_concentration_check(&[1.0, 4.0, 100.0, 1e6], 7, 1.0, 1.0, 0.1).unwrap();
        for w in rows.windows(2) {
            let ratio = w[1].width / w[0].width;
            let want = (w[0].nu / w[1].nu).sqrt();
            assert!((ratio / want - 1.0).abs() < 1e-12);
        }
        assert!(rows[3].weight_at_probe < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let t = uniform_times(2, 1.0);
        assert!(lambda_effective_weight(&vec![vec![0.0]; 2], &[(0.0, 0.0)], 0.0, &t, 1.0).is_err());
        assert!(lambda_effective_weight(&vec![vec![0.0]; 3], &[(0.0, 0.0)], 1.0, &t, 1.0).is_err());
        assert!(lambda_effective_weight(&vec![vec![0.0, 1.0]; 2], &[(0.0, 0.0)], 1.0, &t, 1.0).is_err());
    }
}
