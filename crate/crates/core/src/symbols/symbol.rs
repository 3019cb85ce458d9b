//! Upper and lower symbols as exact polynomials in the label coordinates.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use super::operator::{binomial, factorial, PolynomialOperator};
use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::states::{Label, ModeSpace, PhasePoint};

/// Which symbol a [`SymbolFn`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// Diagonal expectation `⟨x|Ĥ|x⟩`.
    Upper,
    /// Density `h` in `Ĥ = ∫ h(x) |x⟩⟨x| dμ(x)`.
    Lower,
    /// Any other phase-space polynomial (differences, reduced parts, ...).
    Plain,
}

/// `ħ^hbar_pow ∏_k p_k^{a_k} q_k^{b_k}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SymbolMonomial {
    pub hbar_pow: u32,
    /// `(p exponent, q exponent)` per mode.
    pub powers: Vec<(u32, u32)>,
}

/// Polynomial on phase space with explicit powers of ħ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolFn {
    kind: SymbolKind,
    hbar: f64,
    modes: usize,
    terms: BTreeMap<SymbolMonomial, Complex64>,
}

impl SymbolFn {
    pub fn zero(kind: SymbolKind, modes: usize, hbar: f64) -> Self {
        SymbolFn {
            kind,
            hbar,
            modes,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(kind: SymbolKind, modes: usize, hbar: f64, c: Complex64) -> Self {
        let mut s = Self::zero(kind, modes, hbar);
        s.add_term(
            SymbolMonomial {
                hbar_pow: 0,
                powers: vec![(0, 0); modes],
            },
            c,
        );
        s
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SymbolMonomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, mono: SymbolMonomial, c: Complex64) {
        assert_eq!(mono.powers.len(), self.modes);
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry(mono.clone()).or_default();
        *e += c;
        if *e == Complex64::new(0.0, 0.0) {
            self.terms.remove(&mono);
        }
    }

    /// Value at a list of per-mode phase points.
    pub fn eval_points(&self, pts: &[PhasePoint]) -> Complex64 {
        assert_eq!(pts.len(), self.modes, "symbol evaluated at wrong dimension");
        let mut total = Complex64::new(0.0, 0.0);
        for (m, &c) in &self.terms {
            let mut v = c * self.hbar.powi(m.hbar_pow as i32);
            for (pt, &(a, b)) in pts.iter().zip(&m.powers) {
                v *= pt.p.powi(a as i32) * pt.q.powi(b as i32);
            }
            total += v;
        }
        total
    }

    pub fn eval(&self, label: &Label) -> Complex64 {
        self.eval_points(label.points())
    }

    /// Part multiplying `ħ^k`, with the factor stripped.
    pub fn hbar_coefficient(&self, k: u32) -> SymbolFn {
        let mut out = Self::zero(SymbolKind::Plain, self.modes, self.hbar);
        for (m, &c) in &self.terms {
            if m.hbar_pow == k {
                let mut mono = m.clone();
                mono.hbar_pow = 0;
                out.add_term(mono, c);
            }
        }
        out
    }

    /// Smallest power of ħ carried by any term (`None` for the zero symbol).
    pub fn min_hbar_pow(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.hbar_pow).min()
    }

    /// Largest absolute imaginary part of any coefficient.
    pub fn max_imaginary(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.im.abs()))
    }

    pub fn difference(&self, other: &SymbolFn) -> SymbolFn {
        assert_eq!(self.modes, other.modes);
        let mut out = self.clone();
        out.kind = SymbolKind::Plain;
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    /// Same coefficients evaluated at a different ħ.
    pub fn with_hbar(&self, hbar: f64) -> SymbolFn {
        let mut s = self.clone();
        s.hbar = hbar;
        s
    }
}

impl fmt::Display for SymbolFn {
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
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            if m.hbar_pow > 0 {
                write!(f, " ħ^{}", m.hbar_pow)?;
            }
            for (k, &(a, b)) in m.powers.iter().enumerate() {
                if a > 0 {
                    write!(f, " p{k}^{a}")?;
                }
                if b > 0 {
                    write!(f, " q{k}^{b}")?;
                }
            }
        }
        Ok(())
    }
}

/// Coefficients of `conj(α)^m α^n` as a polynomial in `(p, q)`, with
/// `α = q/s + i s p`. Entry `(a, b, c)` means `c p^a q^b`.
fn alpha_expansion(m: u32, n: u32, s: f64) -> Vec<(u32, u32, Complex64)> {
    let mut acc: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
    let ip = Complex64::new(0.0, s);
    for a in 0..=m {
        let ca = binomial(m, a) * s.powi(-((m - a) as i32)) * (-ip).powu(a);
        for b in 0..=n {
            let cb = binomial(n, b) * s.powi(-((n - b) as i32)) * ip.powu(b);
            *acc.entry((a + b, m + n - a - b)).or_default() += ca * cb;
        }
    }
    acc.into_iter()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .map(|((a, b), c)| (a, b, c))
        .collect()
}

/// Expands `Σ c ħ^k ∏ conj(α_k)^{m_k} α_k^{n_k}` into a [`SymbolFn`].
fn from_alpha_terms(
    kind: SymbolKind,
    space: &ModeSpace,
    items: impl IntoIterator<Item = (u32, Vec<(u32, u32)>, Complex64)>,
) -> SymbolFn {
    let modes = space.modes();
    let mut out = SymbolFn::zero(kind, modes, space.hbar());
    for (hk, powers, c) in items {
        let mut partial: Vec<(Vec<(u32, u32)>, Complex64)> = vec![(Vec::with_capacity(modes), c)];
        for (k, &(m, n)) in powers.iter().enumerate() {
            let exp = alpha_expansion(m, n, space.width(k));
            let mut next = Vec::with_capacity(partial.len() * exp.len());
            for (pw, w) in &partial {
                for &(a, b, e) in &exp {
                    let mut pw = pw.clone();
                    pw.push((a, b));
                    next.push((pw, w * e));
                }
            }
            partial = next;
        }
        for (pw, w) in partial {
            out.add_term(
                SymbolMonomial {
                    hbar_pow: hk,
                    powers: pw,
                },
                w,
            );
        }
    }
    out
}

/// `⟨l|op|l⟩`, evaluated in closed form.
pub fn upper_symbol(op: &PolynomialOperator, l: &Label) -> Result<Complex64> {
    l.check(op.space())?;
    Ok(op.matrix_element_ratio(l, l))
}

/// Upper symbol of `op` as a polynomial.
pub fn upper_symbol_fn(op: &PolynomialOperator) -> SymbolFn {
    from_alpha_terms(
        SymbolKind::Upper,
        op.space(),
        op.terms().map(|(m, &c)| (m.hbar_pow, m.powers.clone(), c)),
    )
}

/// Lower symbol of `op`.
///
/// Each normal-ordered monomial is rewritten anti-normally,
/// `A†^m A^n = Σ_j (-1)^j j! C(m,j) C(n,j) (2ħ)^j A^{n-j} A†^{m-j}`, and
/// `A^n A†^m = ∫ conj(α)^m α^n |x⟩⟨x| dμ(x)`.
pub fn lower_symbol(op: &PolynomialOperator) -> SymbolFn {
    let mut items = Vec::new();
    for (mono, &c) in op.terms() {
        let mut partial: Vec<(u32, Vec<(u32, u32)>, f64)> = vec![(mono.hbar_pow, Vec::new(), 1.0)];
        for &(m, n) in &mono.powers {
            let mut next = Vec::new();
            for (hk, pw, w) in &partial {
                for j in 0..=m.min(n) {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let coef = sign * factorial(j) * binomial(m, j) * binomial(n, j) * 2f64.powi(j as i32);
                    let mut pw = pw.clone();
                    pw.push((m - j, n - j));
                    next.push((hk + j, pw, w * coef));
                }
            }
            partial = next;
        }
        for (hk, pw, w) in partial {
            items.push((hk, pw, c * w));
        }
    }
    from_alpha_terms(SymbolKind::Lower, op.space(), items)
}

/// `H - h`. Every surviving term carries at least one power of ħ.
pub fn symbol_gap(op: &PolynomialOperator) -> SymbolFn {
    upper_symbol_fn(op).difference(&lower_symbol(op))
}

/// Quadrature value of the upper-from-lower relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothedSymbol {
    pub value: Complex64,
    /// Largest weighted integrand magnitude at the ends of any axis.
    pub boundary: f64,
    pub boundary_warning: bool,
}

/// Boundary diagnostic above which [`upper_from_lower`] warns.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// `∫ h(x) |⟨l|x⟩|² dμ(x)` by trapezoid quadrature on `axis` (used for every
/// p and q coordinate).
///
/// `|⟨l|x⟩|² dμ` is a product over modes of normalized Gaussians with
/// variance `ħ s²` in q and `ħ/s²` in p, so each monomial of `h` splits into
/// one-dimensional integrals.
pub fn upper_from_lower(h: &SymbolFn, space: &ModeSpace, l: &Label, axis: Axis) -> Result<SmoothedSymbol> {
    l.check(space)?;
    if h.modes() != space.modes() {
        return Err(Error::Dimension {
            what: "symbol modes",
            expected: space.modes(),
            got: h.modes(),
        });
    }
    let hbar = space.hbar();
    let nodes = axis.nodes();
    let weights = axis.weights();
    let n = nodes.len();

    // moments[(mode, is_q, power)] -> (value, boundary)
    let mut cache: BTreeMap<(usize, bool, u32), (f64, f64)> = BTreeMap::new();
    let mut moment = |k: usize, is_q: bool, pow: u32| -> (f64, f64) {
        *cache.entry((k, is_q, pow)).or_insert_with(|| {
            let s = space.width(k);
            let pt = l.mode(k);
            let (centre, var) = if is_q { (pt.q, hbar * s * s) } else { (pt.p, hbar / (s * s)) };
            let norm = (2.0 * std::f64::consts::PI * var).sqrt();
            let f = |x: f64| x.powi(pow as i32) * (-(x - centre).powi(2) / (2.0 * var)).exp() / norm;
            let v: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * f(x)).sum();
            let edge = if n > 1 {
                (weights[0] * f(nodes[0]).abs()).max(weights[n - 1] * f(nodes[n - 1]).abs())
            } else {
                0.0
            };
            (v, edge)
        })
    };

    let mut value = Complex64::new(0.0, 0.0);
    let mut boundary = 0.0_f64;
    for (m, &c) in h.terms() {
        let scale = c * hbar.powi(m.hbar_pow as i32);
        let mut factors = Vec::with_capacity(2 * m.powers.len());
        for (k, &(a, b)) in m.powers.iter().enumerate() {
            factors.push(moment(k, false, a));
            factors.push(moment(k, true, b));
        }
        let v = scale * factors.iter().map(|f| f.0).product::<f64>();
        // Edge contribution of one axis times the interior values of the rest.
        let term_edge: f64 = (0..factors.len())
            .map(|i| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| if i == j { f.1 } else { f.0.abs() })
                    .product::<f64>()
            })
            .sum();
        let term_scale = scale.norm() * term_edge;
        value += v;
        boundary = boundary.max(term_scale);
    }
    Ok(SmoothedSymbol {
        value,
        boundary,
        boundary_warning: boundary > BOUNDARY_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1(hbar: f64) -> ModeSpace {
        ModeSpace::single(hbar).unwrap()
    }

    fn pt(p: f64, q: f64) -> Label {
        Label::point(p, q).unwrap()
    }

    #[test]
    fn oscillator_symbols() {
        let s = s1(1.0);
        let ho = PolynomialOperator::harmonic_oscillator(&s);
        let l = pt(0.7, -1.2);
        let u = upper_symbol(&ho, &l).unwrap();
        assert!((u.re - (0.49 + 1.44 + 1.0) / 2.0).abs() < 1e-14 && u.im == 0.0);
        let h = lower_symbol(&ho);
        assert!((h.eval(&l).re - (0.49 + 1.44 - 1.0) / 2.0).abs() < 1e-14);
        let gap = symbol_gap(&ho);
        assert_eq!(gap.terms().count(), 1);
        let (m, c) = gap.terms().next().unwrap();
        assert_eq!(m.hbar_pow, 1);
        assert!(m.powers.iter().all(|&p| p == (0, 0)));
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn linear_operators_have_equal_symbols() {
        let s = s1(0.5);
        for op in [
            PolynomialOperator::position(&s, 0),
            PolynomialOperator::momentum(&s, 0),
            PolynomialOperator::identity(&s),
        ] {
            assert!(symbol_gap(&op).is_zero());
        }
    }

    #[test]
    fn quartic_gap() {
        let s = s1(1.0);
        let q = PolynomialOperator::position(&s, 0);
        let q4 = q.pow(4);
        let gap = symbol_gap(&q4);
        assert_eq!(gap.min_hbar_pow(), Some(1));
        for x in [0.0, 0.5, 2.0] {
            let g = gap.eval(&pt(0.3, x));
            assert!((g.re - 6.0 * x * x).abs() < 1e-12, "{g}");
        }
        let u = upper_symbol_fn(&q4).eval(&pt(0.0, 2.0)).re;
        assert!((u - (16.0 + 3.0 * 4.0 + 0.75)).abs() < 1e-12);
        let lo = lower_symbol(&q4).eval(&pt(0.0, 2.0)).re;
        assert!((lo - (16.0 - 3.0 * 4.0 + 0.75)).abs() < 1e-12);
    }

    #[test]
    fn smoothing_lower_gives_upper() {
        let s = s1(1.0);
        let axis = Axis::symmetric(8.0, 0.05).unwrap();
        let ho = PolynomialOperator::harmonic_oscillator(&s);
        let r = upper_from_lower(&lower_symbol(&ho), &s, &pt(0.0, 0.0), axis).unwrap();
        assert!((r.value.re - 0.5).abs() < 1e-10);
        assert!(!r.boundary_warning);
        let one = SymbolFn::constant(SymbolKind::Lower, 1, 1.0, Complex64::new(1.0, 0.0));
        let r = upper_from_lower(&one, &s, &pt(0.3, -0.2), axis).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-12);
        // six widths from the edge: the truncated tail shows up at 1e-9
        let r = upper_from_lower(&one, &s, &pt(2.0, 0.0), axis).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn narrow_grid_warns() {
        let s = s1(1.0);
        let axis = Axis::symmetric(2.0, 0.05).unwrap();
        let one = SymbolFn::constant(SymbolKind::Lower, 1, 1.0, Complex64::new(1.0, 0.0));
        let r = upper_from_lower(&one, &s, &pt(0.0, 1.5), axis).unwrap();
        assert!(r.boundary_warning);
    }

    #[test]
    fn width_changes_lower_symbol() {
        let s = s1(1.0).with_widths(vec![2.0]).unwrap();
        let q2 = PolynomialOperator::position(&s, 0).pow(2);
        // Q² = Q_l² - ħ s²/2 as a lower symbol
        let h = lower_symbol(&q2).eval(&pt(0.0, 1.0)).re;
        assert!((h - (1.0 - 2.0)).abs() < 1e-12);
    }
}
