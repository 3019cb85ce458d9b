//! Physical matrix elements between zero-momentum states.
//!
//! Each constrained pair lives on a periodic box `[-L/2, L/2]` in the
//! momentum basis `|m⟩`, `P̂|m⟩ = (2πħm/L)|m⟩`, `|m| ≤ K`. The physical
//! state is `|0⟩` (the normalized constant wavefunction) tensored with the
//! reduced coherent state. Position matrix elements are
//! `⟨m|Q̂|m'⟩ = iL(-1)^d/(2πd)` for `d = m - m' ≠ 0` and zero on the
//! diagonal. Operators that commute with the constraints give matrix
//! elements independent of `L`; a bare `Q̂` does not.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::check_on_surface;
use crate::error::{Error, Result};
use crate::oracle::{coherent_vector, ladder_matrix, FockTruncation, MAX_FOCK_DIM};
use crate::states::Label;
use crate::symbols::{binomial, factorial, PolynomialOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiracOptions {
    /// Box length `L`.
    pub box_length: f64,
    /// Momentum cutoff `K`: modes `-K..=K`.
    pub box_modes: usize,
    pub trunc: FockTruncation,
}

impl Default for DiracOptions {
    fn default() -> Self {
        DiracOptions {
            box_length: 10.0,
            box_modes: 4,
            trunc: FockTruncation::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiracResult {
    /// `⟨0, z''| e^{-iĤT/ħ} |0, z'⟩` at box length `L`.
    pub amplitude: Complex64,
    /// The same at `2L`.
    pub doubled_box: Complex64,
    /// `|amplitude - doubled_box|`.
    pub length_dependence: f64,
    /// Truncation bound from the reduced coherent states.
    pub error_estimate: f64,
}

impl DiracResult {
    /// The amplitude does not depend on the box.
    pub fn factorizes(&self, tol: f64) -> bool {
        self.length_dependence <= tol
    }
}

/// Polynomial `Σ c Q̂^a P̂^b` kept with every `Q̂` to the left.
type QpPoly = BTreeMap<(u32, u32), Complex64>;

fn qp_mul(x: &QpPoly, y: &QpPoly, hbar: f64) -> QpPoly {
    let mut out = QpPoly::new();
    for (&(a1, b1), &c1) in x {
        for (&(a2, b2), &c2) in y {
            // P^b Q^a = Σ_k C(b,k) C(a,k) k! (-iħ)^k Q^{a-k} P^{b-k}
            for k in 0..=b1.min(a2) {
                let w = binomial(b1, k) * binomial(a2, k) * factorial(k);
                let c = c1 * c2 * w * Complex64::new(0.0, -hbar).powu(k);
                *out.entry((a1 + a2 - k, b1 + b2 - k)).or_default() += c;
            }
        }
    }
    out
}

/// `A†^m A^n` with `A = Q̂/s + i s P̂` in position-left form.
fn ladder_as_qp(m: u32, n: u32, s: f64, hbar: f64) -> QpPoly {
    let a = QpPoly::from([((1, 0), Complex64::new(1.0 / s, 0.0)), ((0, 1), Complex64::new(0.0, s))]);
    let ad = QpPoly::from([((1, 0), Complex64::new(1.0 / s, 0.0)), ((0, 1), Complex64::new(0.0, -s))]);
    let mut out = QpPoly::from([((0, 0), Complex64::new(1.0, 0.0))]);
    for _ in 0..m {
        out = qp_mul(&out, &ad, hbar);
    }
    for _ in 0..n {
        out = qp_mul(&out, &a, hbar);
    }
    out
}

fn box_position(k: usize, length: f64) -> DMatrix<Complex64> {
    let d = 2 * k + 1;
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            return Complex64::new(0.0, 0.0);
        }
        let diff = i as i64 - j as i64;
        let sign = if diff % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(0.0, length * sign / (2.0 * std::f64::consts::PI * diff as f64))
    })
}

fn box_momentum(k: usize, length: f64, hbar: f64) -> DVector<f64> {
    DVector::from_fn(2 * k + 1, |i, _| 2.0 * std::f64::consts::PI * hbar * (i as f64 - k as f64) / length)
}

fn factor_matrix(poly: &QpPoly, q: &DMatrix<Complex64>, p: &DVector<f64>) -> DMatrix<Complex64> {
    let d = p.len();
    let mut total = DMatrix::zeros(d, d);
    for (&(a, b), &c) in poly {
        let mut m = DMatrix::identity(d, d);
        for _ in 0..a {
            m = &m * q;
        }
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= Complex64::new(p[j].powi(b as i32), 0.0);
        }
        total += m * c;
    }
    total
}

fn hamiltonian(op: &PolynomialOperator, opts: &DiracOptions, length: f64) -> Result<DMatrix<Complex64>> {
    let space = op.space();
    let hbar = space.hbar();
    let nc = space.n_constrained();
    let q = box_position(opts.box_modes, length);
    let p = box_momentum(opts.box_modes, length, hbar);
    let mut total: Option<DMatrix<Complex64>> = None;
    for (mono, &c) in op.terms() {
        let mut coeff = c * hbar.powi(mono.hbar_pow as i32);
        let mut mat = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for (k, &(m, n)) in mono.powers.iter().enumerate() {
            let f = if k < nc {
                factor_matrix(&ladder_as_qp(m, n, space.width(k), hbar), &q, &p)
            } else {
                coeff *= (2.0 * hbar).powf(0.5 * (m + n) as f64);
                ladder_matrix(m, n, opts.trunc.n_trunc).map(|x| Complex64::new(x, 0.0))
            };
            mat = mat.kronecker(&f);
        }
        mat *= coeff;
        total = Some(match total {
            Some(t) => t + mat,
            None => mat,
        });
    }
    let dim = (2 * opts.box_modes + 1).pow(nc as u32) * opts.trunc.n_trunc.pow(space.n_reduced() as u32);
    Ok(total.unwrap_or_else(|| DMatrix::zeros(dim, dim)))
}

/// `⟨0, z''| e^{-iĤT/ħ} |0, z'⟩` at box length `L` and `2L`.
///
/// Only the reduced parts of the labels enter; their constrained momenta
/// must vanish.
pub fn dirac_physical_matrix_element(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    total_time: f64,
    opts: &DiracOptions,
) -> Result<DiracResult> {
    let space = op.space();
    check_on_surface(space, a, "final")?;
    check_on_surface(space, b, "initial")?;
    if !total_time.is_finite() {
        return Err(Error::NonFinite("total_time"));
    }
    if !(opts.box_length.is_finite() && opts.box_length > 0.0) {
        return Err(Error::param("box_length", "must be positive"));
    }
    let nc = space.n_constrained();
    let box_dim = (2 * opts.box_modes + 1)
        .checked_pow(nc as u32)
        .ok_or_else(|| Error::Budget("box basis too large".into()))?;
    let fock_dim = opts
        .trunc
        .n_trunc
        .checked_pow(space.n_reduced() as u32)
        .ok_or_else(|| Error::Budget("Fock basis too large".into()))?;
    if box_dim.saturating_mul(fock_dim) > MAX_FOCK_DIM {
        return Err(Error::Budget(format!(
            "box x Fock dimension {box_dim} x {fock_dim} exceeds {MAX_FOCK_DIM}"
        )));
    }
    let reduced = space.reduced_space();
    let (za, la) = coherent_vector(&reduced, &a.reduced(), opts.trunc)?;
    let (zb, lb) = coherent_vector(&reduced, &b.reduced(), opts.trunc)?;
    let mut zero = DVector::zeros(box_dim);
    // |m = 0⟩ in every box is the centre index of the tensor basis
    let centre: usize = (0..nc).fold(0, |acc, _| acc * (2 * opts.box_modes + 1) + opts.box_modes);
    zero[centre] = Complex64::new(1.0, 0.0);
    let va = zero.kronecker(&za);
    let vb = zero.kronecker(&zb);
    let amp = |length: f64| -> Result<Complex64> {
        let h = hamiltonian(op, opts, length)?;
        let gen = h * Complex64::new(0.0, -total_time / space.hbar());
        Ok(va.dotc(&(gen.exp() * &vb)))
    };
    let amplitude = amp(opts.box_length)?;
    let doubled_box = amp(2.0 * opts.box_length)?;
    Ok(DiracResult {
        amplitude,
        doubled_box,
        length_dependence: (amplitude - doubled_box).norm(),
        error_estimate: la.sqrt() + lb.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fock_propagator;
    use crate::states::ModeSpace;
    use crate::symbols::parse_operator;

    #[test]
    fn reordering_matches_commutator() {
        // A†A = Q²/s² + s²P² + i[Q,P] = Q²/s² + s²P² - ħ
        let p = ladder_as_qp(1, 1, 1.0, 1.0);
        assert!((p[&(2, 0)] - 1.0).norm() < 1e-15);
        assert!((p[&(0, 2)] - 1.0).norm() < 1e-15);
        assert!((p[&(0, 0)] + 1.0).norm() < 1e-15);
        assert!(p.get(&(1, 1)).map_or(true, |c| c.norm() < 1e-15));
    }

    #[test]
    fn box_position_elements() {
        let q = box_position(2, 3.0);
        let want = Complex64::new(0.0, -3.0 / (2.0 * std::f64::consts::PI));
        assert!((q[(3, 2)] - want).norm() < 1e-15);
        assert!((q[(2, 3)] + want).norm() < 1e-15);
        assert_eq!(q[(1, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reduced_dynamics_factorize() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let op = parse_operator(&s, &["0.5 p1^2", "0.5 q1^2", "0.7 p0^2", "0.2 p0 q1"]).unwrap();
        let a = Label::new(vec![0.0], vec![0.0], vec![(0.3, 0.4)]).unwrap();
        let b = Label::new(vec![0.0], vec![0.0], vec![(-0.2, 0.1)]).unwrap();
        let opts = DiracOptions {
            trunc: FockTruncation::new(30).unwrap(),
            ..DiracOptions::default()
        };
        let r = dirac_physical_matrix_element(&op, &a, &b, 0.8, &opts).unwrap();
        assert!(r.factorizes(1e-12), "{}", r.length_dependence);
        let red = s.reduced_space();
        let h0 = PolynomialOperator::harmonic_oscillator(&red);
        let f = fock_propagator(&h0, &a.reduced(), &b.reduced(), 0.8, opts.trunc).unwrap();
        assert!((r.amplitude - f.amplitude).norm() < 1e-10);
    }

    #[test]
    fn bare_position_depends_on_box() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let op = parse_operator(&s, &["0.5 p1^2", "0.5 q1^2", "0.3 q0"]).unwrap();
        let a = Label::new(vec![0.0], vec![0.0], vec![(0.0, 0.0)]).unwrap();
        let opts = DiracOptions {
            trunc: FockTruncation::new(20).unwrap(),
            ..DiracOptions::default()
        };
        let r = dirac_physical_matrix_element(&op, &a, &a, 1.0, &opts).unwrap();
        assert!(r.length_dependence > 1e-3, "{}", r.length_dependence);
    }
}
