//! Independent ground truth: Fock-space propagators, Gaussian moments and
//! brute-force tensor quadrature.
//!
//! Nothing here goes through the lattice or symbol machinery, so the other
//! modules can be checked against it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_AXES};
use crate::states::{ladder_value, Label, ModeSpace};
use crate::symbols::PolynomialOperator;

/// Largest truncated Hilbert-space dimension the oracle will exponentiate.
pub const MAX_FOCK_DIM: usize = 2500;

/// Coherent-state norm loss above which the oracle refuses to answer.
pub const NORM_LOSS_LIMIT: f64 = 1e-10;

/// Centred Gaussian moment `E[x^n]` for variance `variance`:
/// `(n-1)!! variance^{n/2}` for even `n`, zero for odd `n`.
pub fn gaussian_moment(n: u32, variance: f64) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut double_fact = 1.0;
    let mut k = n as i64 - 1;
    while k > 1 {
        double_fact *= k as f64;
        k -= 2;
    }
    double_fact * variance.powi(n as i32 / 2)
}

/// Tensor-grid integral with its boundary diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureValue {
    pub value: Complex64,
    /// Largest integrand magnitude on the outer faces times the quadrature
    /// weight carried by those faces.
    pub boundary: f64,
}

const CHUNK: usize = 1 << 14;

/// Deterministic trapezoid quadrature of `f` over `grid`.
///
/// Nodes are summed in fixed-size chunks, and chunk sums are combined by a
/// pairwise tree in index order, so the result does not depend on the number
/// of worker threads.
pub fn brute_quadrature<F>(f: F, grid: &Grid) -> Result<QuadratureValue>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if grid.dims() > MAX_AXES {
        return Err(Error::Budget(format!(
            "{} axes requested, at most {MAX_AXES} allowed",
            grid.dims()
        )));
    }
    let nodes: Vec<Vec<f64>> = grid.axes.iter().map(|a| a.nodes()).collect();
    let weights: Vec<Vec<f64>> = grid.axes.iter().map(|a| a.weights()).collect();
    let total = grid.node_count();
    let chunks = total.div_ceil(CHUNK);

    let partials: Vec<(Complex64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let dims = nodes.len();
            let mut x = vec![0.0; dims];
            let mut sum = Complex64::new(0.0, 0.0);
            let mut edge_max = 0.0_f64;
            let mut edge_weight = 0.0_f64;
            for flat in start..end {
                let mut rem = flat;
                let mut w = 1.0;
                let mut edge = false;
                for k in (0..dims).rev() {
                    let n = nodes[k].len();
                    let i = rem % n;
                    rem /= n;
                    x[k] = nodes[k][i];
                    w *= weights[k][i];
                    if n > 1 && (i == 0 || i == n - 1) {
                        edge = true;
                    }
                }
                let v = f(&x);
                sum += v * w;
                if edge {
                    edge_max = edge_max.max(v.norm());
                    edge_weight += w;
                }
            }
            (sum, edge_max, edge_weight)
        })
        .collect();

    let value = tree_sum(partials.iter().map(|p| p.0).collect());
    let edge_max = partials.iter().fold(0.0_f64, |m, p| m.max(p.1));
    let edge_weight: f64 = partials.iter().map(|p| p.2).sum();
    Ok(QuadratureValue {
        value,
        boundary: edge_max * edge_weight,
    })
}

/// Pairwise sum in index order.
pub(crate) fn tree_sum(mut v: Vec<Complex64>) -> Complex64 {
    if v.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    while v.len() > 1 {
        let mut next = Vec::with_capacity(v.len().div_ceil(2));
        for pair in v.chunks(2) {
            next.push(if pair.len() == 2 { pair[0] + pair[1] } else { pair[0] });
        }
        v = next;
    }
    v[0]
}

/// Number-basis cutoff per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockTruncation {
    pub n_trunc: usize,
}

impl Default for FockTruncation {
    fn default() -> Self {
        FockTruncation { n_trunc: 60 }
    }
}

impl FockTruncation {
    pub fn new(n_trunc: usize) -> Result<Self> {
        if n_trunc < 4 {
            return Err(Error::param("n_trunc", "must be at least 4"));
        }
        Ok(FockTruncation { n_trunc })
    }
}

/// Single-mode number-basis amplitudes `⟨n|p,q⟩` for `n < n_trunc`.
pub fn mode_coherent_vector(space: &ModeSpace, k: usize, label: &Label, n_trunc: usize) -> Vec<Complex64> {
    let pt = label.mode(k);
    let alpha = ladder_value(space, k, pt) / (2.0 * space.hbar()).sqrt();
    let prefactor = Complex64::new(-0.5 * alpha.norm_sqr(), -pt.p * pt.q / (2.0 * space.hbar())).exp();
    let mut out = Vec::with_capacity(n_trunc);
    let mut term = prefactor;
    for n in 0..n_trunc {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        out.push(term);
    }
    out
}

/// Smallest cutoff for which a Poisson(`mean`) tail is below `limit`.
fn required_cutoff(mean: f64, limit: f64) -> usize {
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut n = 0usize;
    while 1.0 - cdf > limit && n < 100_000 {
        n += 1;
        p *= mean / n as f64;
        cdf += p;
    }
    n + 1
}

/// Tensor-product number-basis vector of a coherent state, with the norm it
/// lost to truncation. Refuses when the loss exceeds [`NORM_LOSS_LIMIT`].
pub fn coherent_vector(space: &ModeSpace, label: &Label, trunc: FockTruncation) -> Result<(DVector<Complex64>, f64)> {
    label.check(space)?;
    let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for k in 0..space.modes() {
        let m = DVector::from_vec(mode_coherent_vector(space, k, label, trunc.n_trunc));
        v = v.kronecker(&m);
    }
    let loss = 1.0 - v.norm_squared();
    if loss > NORM_LOSS_LIMIT {
        let worst = (0..space.modes())
            .map(|k| ladder_value(space, k, label.mode(k)).norm_sqr() / (2.0 * space.hbar()))
            .fold(0.0_f64, f64::max);
        return Err(Error::Truncation(format!(
            "coherent state loses {loss:.3e} of its norm at n_trunc = {}; need n_trunc >= {}",
            trunc.n_trunc,
            required_cutoff(worst, NORM_LOSS_LIMIT / space.modes() as f64)
        )));
    }
    Ok((v, loss.max(0.0)))
}

/// Matrix of `(a†)^m a^n` in the truncated number basis. Entries inside the
/// cutoff are exact.
pub fn ladder_matrix(m: u32, n: u32, n_trunc: usize) -> DMatrix<f64> {
    let (m, n) = (m as usize, n as usize);
    let mut mat = DMatrix::zeros(n_trunc, n_trunc);
    for j in n..n_trunc {
        let l = j - n;
        let i = l + m;
        if i >= n_trunc {
            continue;
        }
        // sqrt(j!/l!) * sqrt(i!/l!)
        let mut v = 1.0;
        for t in (l + 1)..=j {
            v *= (t as f64).sqrt();
        }
        for t in (l + 1)..=i {
            v *= (t as f64).sqrt();
        }
        mat[(i, j)] = v;
    }
    mat
}

/// Truncated matrix of a polynomial operator on the tensor number basis.
pub fn fock_matrix(op: &PolynomialOperator, trunc: FockTruncation) -> Result<DMatrix<Complex64>> {
    let space = op.space();
    let dim = trunc
        .n_trunc
        .checked_pow(space.modes() as u32)
        .filter(|d| *d <= MAX_FOCK_DIM)
        .ok_or_else(|| {
            Error::Budget(format!(
                "Fock dimension {}^{} exceeds {MAX_FOCK_DIM}",
                trunc.n_trunc,
                space.modes()
            ))
        })?;
    let hbar = space.hbar();
    let mut total = DMatrix::<Complex64>::zeros(dim, dim);
    for (mono, &c) in op.terms() {
        let mut coeff = c * hbar.powi(mono.hbar_pow as i32);
        let mut mat = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &(m, n) in &mono.powers {
            coeff *= (2.0 * hbar).powf(0.5 * (m + n) as f64);
            let lm = ladder_matrix(m, n, trunc.n_trunc).map(|x| Complex64::new(x, 0.0));
            mat = mat.kronecker(&lm);
        }
        total += mat * coeff;
    }
    Ok(total)
}

/// Exact-within-truncation propagator `⟨a| e^{-iĤT/ħ} |b⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockAmplitude {
    pub amplitude: Complex64,
    /// Bound from the norm the endpoint states lose to truncation.
    pub error_estimate: f64,
}

pub fn fock_propagator(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    total_time: f64,
    trunc: FockTruncation,
) -> Result<FockAmplitude> {
    if !total_time.is_finite() {
        return Err(Error::NonFinite("total_time"));
    }
    let space = op.space();
    let (va, la) = coherent_vector(space, a, trunc)?;
    let (vb, lb) = coherent_vector(space, b, trunc)?;
    let h = fock_matrix(op, trunc)?;
    let gen = h * Complex64::new(0.0, -total_time / space.hbar());
    let evolved = gen.exp() * vb;
    let amplitude = va.dotc(&evolved);
    Ok(FockAmplitude {
        amplitude,
        error_estimate: la.sqrt() + lb.sqrt(),
    })
}

/// `⟨a|Ô|b⟩` in the truncated basis (no time evolution).
pub fn fock_matrix_element(op: &PolynomialOperator, a: &Label, b: &Label, trunc: FockTruncation) -> Result<Complex64> {
    let space = op.space();
    let (va, _) = coherent_vector(space, a, trunc)?;
    let (vb, _) = coherent_vector(space, b, trunc)?;
    let h = fock_matrix(op, trunc)?;
    Ok(va.dotc(&(h * vb)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::states::overlap;

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(2, 0.7), 0.7);
        assert!((gaussian_moment(4, 0.7) - 3.0 * 0.49).abs() < 1e-15);
        assert_eq!(gaussian_moment(5, 0.7), 0.0);
        assert_eq!(gaussian_moment(0, 0.7), 1.0);
    }

    #[test]
    fn moments_agree_with_quadrature() {
        let grid = Grid::new(vec![Axis::symmetric(10.0, 0.01).unwrap()]).unwrap();
        for var in [0.25, 0.5, 1.0] {
            for n in 0..7 {
                let q = brute_quadrature(
                    |x| {
                        let g = (-x[0] * x[0] / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
                        Complex64::new(g * x[0].powi(n as i32), 0.0)
                    },
                    &grid,
                )
                .unwrap();
                assert!((q.value.re - gaussian_moment(n, var)).abs() < 1e-10, "n={n} var={var}");
            }
        }
    }

    #[test]
    fn quadrature_basics() {
        let grid = Grid::standard(1).unwrap();
        let unit = brute_quadrature(
            |x| Complex64::new((-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(), 0.0),
            &grid,
        )
        .unwrap();
        assert!((unit.value.re - 1.0).abs() < 1e-8);
        let zero = brute_quadrature(|_| Complex64::new(0.0, 0.0), &grid).unwrap();
        assert_eq!(zero.value, Complex64::new(0.0, 0.0));

        let g = |x: f64| (-(x - 0.3) * (x - 0.3)).exp();
        let h = |y: f64| (-0.5 * y * y).exp() * (1.0 + y * y);
        let g1 = brute_quadrature(|x| Complex64::new(g(x[0]), 0.0), &grid).unwrap().value;
        let h1 = brute_quadrature(|x| Complex64::new(h(x[0]), 0.0), &grid).unwrap().value;
        let gh = brute_quadrature(|x| Complex64::new(g(x[0]) * h(x[1]), 0.0), &Grid::standard(2).unwrap())
            .unwrap()
            .value;
        assert!((gh - g1 * h1).norm() < 1e-12);
    }

    #[test]
    fn ladder_matrix_entries() {
        let a = ladder_matrix(0, 1, 6);
        assert!((a[(2, 3)] - 3f64.sqrt()).abs() < 1e-15);
        let num = ladder_matrix(1, 1, 6);
        for k in 0..6 {
            assert!((num[(k, k)] - k as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_refusal_names_cutoff() {
        let space = ModeSpace::single(0.25).unwrap();
        let far = Label::point(3.0, 3.0).unwrap();
        let err = coherent_vector(&space, &far, FockTruncation { n_trunc: 20 }).unwrap_err();
        match err {
            Error::Truncation(msg) => assert!(msg.contains("need n_trunc")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_time_is_overlap() {
        let space = ModeSpace::single(1.0).unwrap();
        let a = Label::point(0.4, -1.0).unwrap();
        let b = Label::point(-0.8, 0.9).unwrap();
        let ho = PolynomialOperator::harmonic_oscillator(&space);
        let f = fock_propagator(&ho, &a, &b, 0.0, FockTruncation::default()).unwrap();
        assert!((f.amplitude - overlap(&space, &a, &b).unwrap()).norm() < 1e-10);
    }
}
