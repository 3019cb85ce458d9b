//! Normal-ordered polynomial operators.
//!
//! Each mode is written with the scaled ladder operator `A = Q/s + i s P`,
//! `[A, A†] = 2ħ`, so that `Q = s(A + A†)/2` and `P = (A - A†)/(2is)` carry
//! no hidden powers of ħ. Reordering produces explicit `ħ^k` factors, which
//! are tracked symbolically in [`LadderMonomial::hbar_pow`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::states::{ladder_value, Label, ModeSpace};

/// `ħ^hbar_pow ∏_k (A_k†)^{m_k} (A_k)^{n_k}`, normal ordered.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LadderMonomial {
    pub hbar_pow: u32,
    /// `(m, n)` per mode: creation power, annihilation power.
    pub powers: Vec<(u32, u32)>,
}

impl LadderMonomial {
    pub fn identity(modes: usize) -> Self {
        LadderMonomial {
            hbar_pow: 0,
            powers: vec![(0, 0); modes],
        }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|&(m, n)| m + n).sum()
    }

    /// Modes on which this monomial acts non-trivially.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.powers
            .iter()
            .enumerate()
            .filter(|(_, &(m, n))| m + n > 0)
            .map(|(k, _)| k)
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Normal-ordered polynomial in the ladder operators of a [`ModeSpace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialOperator {
    #[serde(skip)]
    space: ModeSpace,
    terms: BTreeMap<LadderMonomial, Complex64>,
}

impl PolynomialOperator {
    pub fn zero(space: &ModeSpace) -> Self {
        PolynomialOperator {
            space: space.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(space: &ModeSpace, c: impl Into<Complex64>) -> Self {
        let mut op = Self::zero(space);
        op.add_term(LadderMonomial::identity(space.modes()), c.into());
        op
    }

    pub fn identity(space: &ModeSpace) -> Self {
        Self::scalar(space, 1.0)
    }

    fn single(space: &ModeSpace, mode: usize, m: u32, n: u32, c: Complex64) -> Self {
        assert!(mode < space.modes(), "mode {mode} out of range");
        let mut mono = LadderMonomial::identity(space.modes());
        mono.powers[mode] = (m, n);
        let mut op = Self::zero(space);
        op.add_term(mono, c);
        op
    }

    /// Scaled annihilator `A_k`.
    pub fn scaled_annihilator(space: &ModeSpace, mode: usize) -> Self {
        Self::single(space, mode, 0, 1, Complex64::new(1.0, 0.0))
    }

    /// Scaled creator `A_k†`.
    pub fn scaled_creator(space: &ModeSpace, mode: usize) -> Self {
        Self::single(space, mode, 1, 0, Complex64::new(1.0, 0.0))
    }

    /// Standard annihilator `a_k = A_k/√(2ħ)`.
    pub fn annihilator(space: &ModeSpace, mode: usize) -> Self {
        let c = 1.0 / (2.0 * space.hbar()).sqrt();
        Self::single(space, mode, 0, 1, Complex64::new(c, 0.0))
    }

    /// Standard creator `a_k† = A_k†/√(2ħ)`.
    pub fn creator(space: &ModeSpace, mode: usize) -> Self {
        let c = 1.0 / (2.0 * space.hbar()).sqrt();
        Self::single(space, mode, 1, 0, Complex64::new(c, 0.0))
    }

    /// `Q_k = s (A + A†) / 2`.
    pub fn position(space: &ModeSpace, mode: usize) -> Self {
        let s = space.width(mode);
        let half = Complex64::new(0.5 * s, 0.0);
        Self::single(space, mode, 1, 0, half) + Self::single(space, mode, 0, 1, half)
    }

    /// `P_k = (A - A†) / (2 i s)`.
    pub fn momentum(space: &ModeSpace, mode: usize) -> Self {
        let s = space.width(mode);
        let c = Complex64::new(0.0, 0.5 / s);
        Self::single(space, mode, 1, 0, c) + Self::single(space, mode, 0, 1, -c)
    }

    /// `c ∏ (a_k†)^{m_k} a_k^{n_k}` in standard ladder units; `factors` lists
    /// `(mode, m, n)`.
    pub fn ladder_term(space: &ModeSpace, c: Complex64, factors: &[(usize, u32, u32)]) -> Result<Self> {
        let mut mono = LadderMonomial::identity(space.modes());
        let mut scale = c;
        for &(k, m, n) in factors {
            if k >= space.modes() {
                return Err(Error::Dimension {
                    what: "ladder term mode",
                    expected: space.modes(),
                    got: k + 1,
                });
            }
            let (pm, pn) = mono.powers[k];
            if pn > 0 && m > 0 {
                return Err(Error::param("ladder term", "factors must already be normal ordered per mode"));
            }
            mono.powers[k] = (pm + m, pn + n);
            scale *= (2.0 * space.hbar()).powf(-0.5 * (m + n) as f64);
        }
        let mut op = Self::zero(space);
        op.add_term(mono, scale);
        Ok(op)
    }

    /// `(P² + Q²)/2` on every reduced mode.
    pub fn harmonic_oscillator(space: &ModeSpace) -> Self {
        let mut op = Self::zero(space);
        for k in space.reduced_modes() {
            let p = Self::momentum(space, k);
            let q = Self::position(space, k);
            op = op + (&p * &p + &q * &q).scale(0.5);
        }
        op
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LadderMonomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub(crate) fn add_term(&mut self, mono: LadderMonomial, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry(mono).or_insert(Complex64::new(0.0, 0.0));
        *e += c;
        self.terms.retain(|_, v| *v != Complex64::new(0.0, 0.0));
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        let mut out = Self::zero(&self.space);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::identity(&self.space);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(&self.space);
        for (m, v) in &self.terms {
            let mut mono = m.clone();
            for p in &mut mono.powers {
                *p = (p.1, p.0);
            }
            out.add_term(mono, v.conj());
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.adjoint();
        let keys: BTreeSet<&LadderMonomial> = self.terms.keys().chain(adj.terms.keys()).collect();
        let ok = keys.into_iter().all(|k| {
            let a = self.terms.get(k).copied().unwrap_or_default();
            let b = adj.terms.get(k).copied().unwrap_or_default();
            (a - b).norm() <= tol * (1.0 + a.norm())
        });
        ok
    }

    /// Total ladder degree.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(LadderMonomial::degree).max().unwrap_or(0)
    }

    /// True when the operator is at most quadratic in the canonical
    /// variables, so every lattice slice integral is Gaussian.
    pub fn is_quadratic(&self) -> bool {
        self.degree() <= 2
    }

    /// Modes touched by at least one term.
    pub fn support(&self) -> BTreeSet<usize> {
        self.terms.keys().flat_map(|m| m.support().collect::<Vec<_>>()).collect()
    }

    /// Splits into `(terms supported inside modes, terms supported outside,
    /// terms touching both)`. Constant terms go with the second part.
    pub fn split_by_modes(&self, inside: &BTreeSet<usize>) -> (Self, Self, Self) {
        let mut a = Self::zero(&self.space);
        let mut b = Self::zero(&self.space);
        let mut cross = Self::zero(&self.space);
        for (m, &v) in &self.terms {
            let sup: Vec<usize> = m.support().collect();
            let any_in = sup.iter().any(|k| inside.contains(k));
            let any_out = sup.iter().any(|k| !inside.contains(k));
            match (any_in, any_out) {
                (true, false) => a.add_term(m.clone(), v),
                (false, _) => b.add_term(m.clone(), v),
                (true, true) => cross.add_term(m.clone(), v),
            }
        }
        (a, b, cross)
    }

    /// Re-expresses an operator supported on `modes` over `target`, whose
    /// modes are `modes` in order.
    pub fn restrict(&self, modes: &[usize], target: &ModeSpace) -> Result<Self> {
        if target.modes() != modes.len() {
            return Err(Error::Dimension {
                what: "restricted mode space",
                expected: modes.len(),
                got: target.modes(),
            });
        }
        let mut out = Self::zero(target);
        for (m, &v) in &self.terms {
            if let Some(k) = m.support().find(|k| !modes.contains(k)) {
                return Err(Error::Unsupported(format!("term acts on mode {k} outside the restriction")));
            }
            let mono = LadderMonomial {
                hbar_pow: m.hbar_pow,
                powers: modes.iter().map(|&k| m.powers[k]).collect(),
            };
            out.add_term(mono, v);
        }
        Ok(out)
    }

    /// Coefficients with the powers of ħ multiplied out, keyed by ladder
    /// powers.
    pub fn collapsed(&self) -> BTreeMap<Vec<(u32, u32)>, Complex64> {
        let hbar = self.space.hbar();
        let mut out: BTreeMap<Vec<(u32, u32)>, Complex64> = BTreeMap::new();
        for (m, &c) in &self.terms {
            *out.entry(m.powers.clone()).or_default() += c * hbar.powi(m.hbar_pow as i32);
        }
        out
    }

    /// Coefficient-wise comparison at the space's ħ.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let a = self.collapsed();
        let b = other.collapsed();
        let keys: BTreeSet<&Vec<(u32, u32)>> = a.keys().chain(b.keys()).collect();
        let ok = keys.into_iter().all(|k| {
            let x = a.get(k).copied().unwrap_or_default();
            let y = b.get(k).copied().unwrap_or_default();
            (x - y).norm() <= tol
        });
        ok
    }

    /// Same normal-ordered coefficients reinterpreted at a different ħ.
    pub fn with_space(&self, space: &ModeSpace) -> Self {
        assert_eq!(space.modes(), self.space.modes());
        PolynomialOperator {
            space: space.clone(),
            terms: self.terms.clone(),
        }
    }

    /// `⟨a|Ô|b⟩ / ⟨a|b⟩ = Σ c ħ^k ∏ conj(α_a)^m α_b^n`, exact for the
    /// normal-ordered form.
    pub fn matrix_element_ratio(&self, a: &Label, b: &Label) -> Complex64 {
        let hbar = self.space.hbar();
        let mut total = Complex64::new(0.0, 0.0);
        for (m, &c) in &self.terms {
            let mut v = c * hbar.powi(m.hbar_pow as i32);
            for k in m.support() {
                let (pm, pn) = m.powers[k];
                let aa = ladder_value(&self.space, k, a.mode(k)).conj();
                let bb = ladder_value(&self.space, k, b.mode(k));
                v *= aa.powu(pm) * bb.powu(pn);
            }
            total += v;
        }
        total
    }
}

fn assert_same_space(a: &PolynomialOperator, b: &PolynomialOperator) {
    assert_eq!(a.space.modes(), b.space.modes(), "operators live on different mode spaces");
}

impl Add for PolynomialOperator {
    type Output = PolynomialOperator;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl Add for &PolynomialOperator {
    type Output = PolynomialOperator;
    fn add(self, rhs: Self) -> PolynomialOperator {
        assert_same_space(self, rhs);
        let mut out = self.clone();
        for (m, &v) in &rhs.terms {
            out.add_term(m.clone(), v);
        }
        out
    }
}

impl Neg for &PolynomialOperator {
    type Output = PolynomialOperator;
    fn neg(self) -> PolynomialOperator {
        self.scale(-1.0)
    }
}

impl Sub for &PolynomialOperator {
    type Output = PolynomialOperator;
    fn sub(self, rhs: Self) -> PolynomialOperator {
        self + &(-rhs)
    }
}

impl Sub for PolynomialOperator {
    type Output = PolynomialOperator;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

/// Per-mode reordering `A^n1 A†^m2 = Σ_k k! C(n1,k) C(m2,k) (2ħ)^k A†^(m2-k) A^(n1-k)`.
fn mode_product(a: (u32, u32), b: (u32, u32)) -> Vec<(u32, (u32, u32), f64)> {
    let (m1, n1) = a;
    let (m2, n2) = b;
    (0..=n1.min(m2))
        .map(|k| {
            let c = factorial(k) * binomial(n1, k) * binomial(m2, k) * 2f64.powi(k as i32);
            (k, (m1 + m2 - k, n1 + n2 - k), c)
        })
        .collect()
}

impl Mul for &PolynomialOperator {
    type Output = PolynomialOperator;
    fn mul(self, rhs: Self) -> PolynomialOperator {
        assert_same_space(self, rhs);
        let mut out = PolynomialOperator::zero(&self.space);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                // Expand the product mode by mode.
                let mut partial: Vec<(LadderMonomial, f64)> = vec![(
                    LadderMonomial {
                        hbar_pow: ma.hbar_pow + mb.hbar_pow,
                        powers: Vec::with_capacity(ma.powers.len()),
                    },
                    1.0,
                )];
                for k in 0..ma.powers.len() {
                    let options = mode_product(ma.powers[k], mb.powers[k]);
                    let mut next = Vec::with_capacity(partial.len() * options.len());
                    for (mono, w) in &partial {
                        for &(hk, pw, c) in &options {
                            let mut m = mono.clone();
                            m.hbar_pow += hk;
                            m.powers.push(pw);
                            next.push((m, w * c));
                        }
                    }
                    partial = next;
                }
                for (mono, w) in partial {
                    out.add_term(mono, ca * cb * w);
                }
            }
        }
        out
    }
}

impl Mul for PolynomialOperator {
    type Output = PolynomialOperator;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl fmt::Display for PolynomialOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            if m.hbar_pow > 0 {
                write!(f, " ħ^{}", m.hbar_pow)?;
            }
            for (k, &(a, b)) in m.powers.iter().enumerate() {
                if a > 0 {
                    write!(f, " A{k}†^{a}")?;
                }
                if b > 0 {
                    write!(f, " A{k}^{b}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> ModeSpace {
        ModeSpace::single(1.0).unwrap()
    }

    #[test]
    fn commutator_is_i_hbar() {
        for hbar in [1.0, 0.25] {
            let s = ModeSpace::single(hbar).unwrap();
            let q = PolynomialOperator::position(&s, 0);
            let p = PolynomialOperator::momentum(&s, 0);
            let comm = &(&q * &p) - &(&p * &q);
            // [Q, P] = iħ, stored as i · ħ^1
            let expect = {
                let mut o = PolynomialOperator::zero(&s);
                o.add_term(
                    LadderMonomial {
                        hbar_pow: 1,
                        powers: vec![(0, 0)],
                    },
                    Complex64::new(0.0, 1.0),
                );
                o
            };
            assert_eq!(comm, expect);
        }
    }

    #[test]
    fn oscillator_is_number_plus_half() {
        let s = space();
        let ho = PolynomialOperator::harmonic_oscillator(&s);
        let terms: Vec<_> = ho.terms().collect();
        assert_eq!(terms.len(), 2);
        // A†A/2 + ħ/2
        assert_eq!(terms[0].0.hbar_pow, 0);
        assert_eq!(terms[0].0.powers, vec![(1, 1)]);
        assert!((terms[0].1 - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(terms[1].0.hbar_pow, 1);
        assert!((terms[1].1 - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(ho.is_hermitian(1e-14));
        assert!(ho.is_quadratic());
    }

    #[test]
    fn ladder_term_matches_scaled_form() {
        let s = ModeSpace::single(0.5).unwrap();
        let n = PolynomialOperator::ladder_term(&s, Complex64::new(1.0, 0.0), &[(0, 1, 1)]).unwrap();
        let alt = &PolynomialOperator::creator(&s, 0) * &PolynomialOperator::annihilator(&s, 0);
        assert_eq!(n.len(), 1);
        let (a, b) = (n.terms().next().unwrap(), alt.terms().next().unwrap());
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_detected() {
        let s = space();
        let a = PolynomialOperator::annihilator(&s, 0);
        assert!(!a.is_hermitian(1e-12));
        let q = PolynomialOperator::position(&s, 0);
        let p = PolynomialOperator::momentum(&s, 0);
        assert!(!(&q * &p).is_hermitian(1e-12));
        assert!((&(&q * &p) + &(&p * &q)).is_hermitian(1e-12));
    }

    #[test]
    fn split_and_restrict() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let pc = PolynomialOperator::momentum(&s, 0);
        let ho = PolynomialOperator::harmonic_oscillator(&s);
        let op = &(&pc * &pc) + &ho;
        let inside: BTreeSet<usize> = [0].into_iter().collect();
        let (c, z, cross) = op.split_by_modes(&inside);
        assert!(cross.is_zero());
        assert_eq!(c.support(), inside);
        // the normal-ordering constant of P_c² has no mode support
        let r = z.restrict(&[1], &s.reduced_space()).unwrap();
        let rs = s.reduced_space();
        let expect = &PolynomialOperator::harmonic_oscillator(&rs) + &PolynomialOperator::scalar(&rs, 0.5);
        assert!(r.approx_eq(&expect, 1e-15));
        assert!(op.restrict(&[1], &s.reduced_space()).is_err());
    }
}
