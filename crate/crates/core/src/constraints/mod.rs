//! First-class constraints in Abelianized form `p_i = 0`.
//!
//! The constrained pairs are modes `0..n_constrained` of the [`ModeSpace`].
//! Three ways of imposing the constraints are provided and compared against
//! the reduced propagator:
//!
//! * classical projection: every slice's constrained momentum is pinned to
//!   zero ([`projected_lattice_propagator`]);
//! * Lagrange multipliers: `λ_n` enter with a Wiener weight and the phase
//!   `-(i/ħ) Σ λ_n p_n` ([`extended_lambda_propagator`],
//!   [`lambda_effective_weight`]);
//! * Dirac states: zero-momentum box states tensored with reduced coherent
//!   states ([`dirac_physical_matrix_element`]).

mod dirac;
mod lambda;
mod projected;
mod report;

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::gaussian_moment;
use crate::states::{Label, ModeSpace, PhasePoint};
use crate::symbols::{binomial, upper_symbol_fn, PolynomialOperator, SymbolFn};

pub use dirac::{dirac_physical_matrix_element, DiracOptions, DiracResult};
pub use lambda::{lambda_effective_weight, saddle_concentration_check, SaddleRow};
pub use projected::{concentrated_propagator, extended_lambda_propagator, projected_lattice_propagator, ConstrainedResult};
pub use report::{equivalence_report, EquivalenceOptions, EquivalenceReport, LadderRow, RouteOutcome, DIRAC, EXTENDED, PROJECTED, REDUCED};

/// Which modes carry a constraint `p_i = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintSpec {
    indices: Vec<usize>,
}

impl ConstraintSpec {
    /// Validates `indices` against the space: distinct, and exactly the
    /// space's constrained modes (which come first).
    pub fn new(space: &ModeSpace, indices: Vec<usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.iter().copied().collect();
        if set.len() != indices.len() {
            return Err(Error::Constraint("constraint indices must be distinct".into()));
        }
        let want: BTreeSet<usize> = space.constrained_modes().collect();
        if set != want {
            return Err(Error::Constraint(format!(
                "constrained modes must be the first {} modes of the space, got {indices:?}",
                space.n_constrained()
            )));
        }
        Ok(ConstraintSpec { indices })
    }

    pub fn of(space: &ModeSpace) -> Self {
        ConstraintSpec {
            indices: space.constrained_modes().collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Reduced Hamiltonian acting on the reduced modes only.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub h0: PolynomialOperator,
}

impl ReducedSystem {
    pub fn new(h0: PolynomialOperator) -> Result<Self> {
        if h0.space().n_constrained() != 0 {
            return Err(Error::Constraint("the reduced operator must live on the reduced space".into()));
        }
        Ok(ReducedSystem { h0 })
    }

    /// Terms of `op` with no support on constrained modes (constants
    /// included), moved to the reduced space.
    pub fn from_operator(op: &PolynomialOperator) -> Result<Self> {
        let space = op.space();
        let inside: BTreeSet<usize> = space.constrained_modes().collect();
        let (_, outside, _) = op.split_by_modes(&inside);
        let modes: Vec<usize> = space.reduced_modes().collect();
        ReducedSystem::new(outside.restrict(&modes, &space.reduced_space())?)
    }
}

/// Checks that the constrained momenta of `label` vanish.
pub(crate) fn check_on_surface(space: &ModeSpace, label: &Label, which: &str) -> Result<()> {
    label.check(space)?;
    if let Some(k) = space.constrained_modes().find(|&k| label.mode(k).p != 0.0) {
        return Err(Error::Constraint(format!(
            "{which} endpoint has p_{k} = {} but must satisfy p = 0",
            label.mode(k).p
        )));
    }
    Ok(())
}

/// `⟨p,q,z| P̂_mode^n |p,q,z⟩ = E[(p + ξ)^n]` with `ξ` the fiducial momentum
/// spread. The label's `q` never enters.
pub fn momentum_moment(space: &ModeSpace, label: &Label, mode: usize, n: u32) -> Result<f64> {
    label.check(space)?;
    if mode >= space.modes() {
        return Err(Error::Dimension {
            what: "mode",
            expected: space.modes(),
            got: mode + 1,
        });
    }
    let s = space.width(mode);
    let var = 0.5 * space.hbar() / (s * s);
    let p = label.mode(mode).p;
    let mut total = 0.0;
    for k in (0..=n).step_by(2) {
        total += binomial(n, k) * p.powi((n - k) as i32) * gaussian_moment(k, var);
    }
    Ok(total)
}

/// Moments of a constrained momentum on the constraint surface
/// `p = 0`: `⟨0,q,z| P̂_i^n |0,q,z⟩`.
pub fn constrained_state_moments(space: &ModeSpace, constraint: usize, q: &[f64], z: &[(f64, f64)], n: u32) -> Result<f64> {
    if !space.is_constrained(constraint) {
        return Err(Error::Constraint(format!("mode {constraint} is not constrained")));
    }
    let label = Label::new(vec![0.0; q.len()], q.to_vec(), z.to_vec())?;
    momentum_moment(space, &label, constraint, n)
}

/// `⟨0,q,z|Ĥ|0,q,z⟩` split by powers of ħ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSymbol {
    pub value: Complex64,
    /// `ħ⁰` part.
    pub classical: Complex64,
    /// `(value - classical) / ħ`.
    pub correction: Complex64,
    /// The `ħ⁰` part depends on a constrained `q`.
    pub classical_gauge_dependence: bool,
    /// Some `ħ^k` (`k ≥ 1`) part depends on a constrained `q`: the quantum
    /// corrections break the gauge symmetry.
    pub quantum_gauge_dependence: bool,
}

/// Whether some term of `sym` with a power of ħ in `hbar_range` depends on a
/// constrained `q` once the constrained momenta are set to zero.
fn depends_on_constrained_q(sym: &SymbolFn, space: &ModeSpace, classical: bool) -> bool {
    sym.terms().any(|(m, c)| {
        c.norm() > 0.0
            && (m.hbar_pow == 0) == classical
            && space.constrained_modes().all(|k| m.powers[k].0 == 0)
            && space.constrained_modes().any(|k| m.powers[k].1 > 0)
    })
}

/// Upper symbol of `op` restricted to the constraint surface.
pub fn reduced_symbol_hcr(op: &PolynomialOperator, q: &[f64], z: &[(f64, f64)]) -> Result<ReducedSymbol> {
    let space = op.space();
    let label = Label::new(vec![0.0; q.len()], q.to_vec(), z.to_vec())?;
    label.check(space)?;
    let sym = upper_symbol_fn(op);
    let value = sym.eval(&label);
    let classical = sym.hbar_coefficient(0).eval(&label);
    let correction = (value - classical) / space.hbar();
    Ok(ReducedSymbol {
        value,
        classical,
        correction,
        classical_gauge_dependence: depends_on_constrained_q(&sym, space, true),
        quantum_gauge_dependence: depends_on_constrained_q(&sym, space, false),
    })
}

/// Computational space holding a subset of modes as unconstrained modes.
pub(crate) fn sector_space(space: &ModeSpace, modes: &[usize]) -> Result<ModeSpace> {
    ModeSpace::new(0, modes.len(), space.hbar())?.with_widths(modes.iter().map(|&k| space.width(k)).collect())
}

pub(crate) fn sector_label(label: &Label, modes: &[usize]) -> Label {
    Label::from_points(0, modes.iter().map(|&k| label.mode(k)).collect::<Vec<PhasePoint>>())
        .expect("sector of a valid label")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fock_matrix_element, FockTruncation};

    #[test]
    fn moments_are_q_independent() {
        for hbar in [1.0, 0.5, 0.25] {
            let s = ModeSpace::new(1, 1, hbar).unwrap();
            for n in 0..7 {
                let a = constrained_state_moments(&s, 0, &[0.0], &[(0.2, 0.1)], n).unwrap();
                let b = constrained_state_moments(&s, 0, &[7.0], &[(0.2, 0.1)], n).unwrap();
                assert_eq!(a, b);
            }
            assert_eq!(constrained_state_moments(&s, 0, &[1.0], &[(0.0, 0.0)], 1).unwrap(), 0.0);
            assert_eq!(constrained_state_moments(&s, 0, &[1.0], &[(0.0, 0.0)], 2).unwrap(), hbar / 2.0);
        }
    }

    #[test]
    fn moments_match_fock() {
        let s = ModeSpace::new(1, 1, 0.5).unwrap();
        let p = PolynomialOperator::momentum(&s, 0);
        let label = Label::new(vec![0.4], vec![1.0], vec![(0.0, 0.3)]).unwrap();
        let trunc = FockTruncation::new(30).unwrap();
        for n in 1..5 {
            let f = fock_matrix_element(&p.pow(n), &label, &label, trunc).unwrap();
            let m = momentum_moment(&s, &label, 0, n).unwrap();
            assert!((f.re - m).abs() < 1e-10, "n={n}: {f} vs {m}");
        }
    }

    #[test]
    fn spec_rejects_wrong_modes() {
        let s = ModeSpace::new(1, 2, 1.0).unwrap();
        assert!(ConstraintSpec::new(&s, vec![0]).is_ok());
        assert!(ConstraintSpec::new(&s, vec![1]).is_err());
        assert!(ConstraintSpec::new(&s, vec![0, 0]).is_err());
        assert!(constrained_state_moments(&s, 1, &[0.0], &[(0.0, 0.0), (0.0, 0.0)], 2).is_err());
    }

    #[test]
    fn reduced_only_symbol_is_gauge_free() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let h0 = PolynomialOperator::harmonic_oscillator(&s);
        let a = reduced_symbol_hcr(&h0, &[0.0], &[(0.3, -0.2)]).unwrap();
        let b = reduced_symbol_hcr(&h0, &[4.0], &[(0.3, -0.2)]).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.value.re - (0.09 + 0.04 + 1.0) / 2.0).abs() < 1e-14);
        assert!(!a.quantum_gauge_dependence && !a.classical_gauge_dependence);
    }

    #[test]
    fn kinetic_term_breaks_gauge_at_order_hbar() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let q = PolynomialOperator::position(&s, 0);
        let p = PolynomialOperator::momentum(&s, 0);
        let f = &PolynomialOperator::identity(&s) + &(&q * &q);
        let op = &f * &(&p * &p);
        let r = reduced_symbol_hcr(&op, &[1.5], &[(0.0, 0.0)]).unwrap();
        assert!((r.value.re - (0.5 * (1.0 + 2.25) - 0.25)).abs() < 1e-13);
        assert!(r.classical.norm() < 1e-15);
        assert!(r.quantum_gauge_dependence);
        assert!(!r.classical_gauge_dependence);
    }

    #[test]
    fn reduced_system_from_operator() {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let op = &PolynomialOperator::harmonic_oscillator(&s) + &PolynomialOperator::position(&s, 0);
        let r = ReducedSystem::from_operator(&op).unwrap();
        assert!(r
            .h0
            .approx_eq(&PolynomialOperator::harmonic_oscillator(&s.reduced_space()), 1e-15));
    }
}
