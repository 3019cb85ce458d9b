use num_complex::Complex64;
use proptest::prelude::*;

use cspi::constraints::constrained_state_moments;
use cspi::lattice::{propagator_gaussian_chain, LatticeConfig, SymbolRoute};
use cspi::states::{overlap, Label, ModeSpace, PhasePoint};
use cspi::symbols::{symbol_gap, upper_symbol, PolynomialOperator};
use cspi::wiener::{raw_estimate, MetricSpec, WienerConfig};

fn point() -> impl Strategy<Value = PhasePoint> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(p, q)| PhasePoint::new(p, q))
}

fn two_mode_label() -> impl Strategy<Value = Label> {
    (point(), point()).prop_map(|(a, b)| Label::from_points(0, vec![a, b]).unwrap())
}

fn space() -> impl Strategy<Value = ModeSpace> {
    (0.2..2.0f64, 0.5..2.0f64, 0.5..2.0f64)
        .prop_map(|(h, w0, w1)| ModeSpace::new(0, 2, h).unwrap().with_widths(vec![w0, w1]).unwrap())
}

/// A random Hermitian operator `X + X†` built from ladder monomials of degree ≤ 4.
fn hermitian(space: &ModeSpace) -> impl Strategy<Value = PolynomialOperator> {
    let space = space.clone();
    prop::collection::vec(((-1.0..1.0f64, -1.0..1.0f64), 0..2usize, 0..3u32, 0..3u32), 1..4).prop_map(move |terms| {
        let mut x = PolynomialOperator::zero(&space);
        for ((re, im), k, m, n) in terms {
            x = &x + &PolynomialOperator::ladder_term(&space, Complex64::new(re, im), &[(k, m, n)]).unwrap();
        }
        &x + &x.adjoint()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn overlap_is_hermitian_and_bounded(s in space(), a in two_mode_label(), b in two_mode_label()) {
        let ab = overlap(&s, &a, &b).unwrap();
        let ba = overlap(&s, &b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-13);
        prop_assert!(ab.norm() <= 1.0 + 1e-13);
        prop_assert!((overlap(&s, &a, &a).unwrap() - 1.0).norm() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hermitian_operators_have_real_upper_symbols(
        op in space().prop_flat_map(|s| hermitian(&s)),
        l in two_mode_label(),
    ) {
        prop_assert!(op.is_hermitian(1e-12));
        let v = upper_symbol(&op, &l).unwrap();
        prop_assert!(v.im.abs() <= 1e-10 * (1.0 + v.re.abs()), "{v}");
        prop_assert!(symbol_gap(&op).eval(&l).im.abs() <= 1e-10 * (1.0 + v.re.abs()));
    }

    #[test]
    fn constrained_moments_ignore_q(hbar in 0.1..2.0f64, q in -50.0..50.0f64, z in point(), n in 0..8u32) {
        let s = ModeSpace::new(1, 1, hbar).unwrap();
        let at = |q: f64| constrained_state_moments(&s, 0, &[q], &[(z.p, z.q)], n).unwrap();
        prop_assert_eq!(at(q), at(0.0));
    }

    #[test]
    fn lattice_is_deterministic(a in point(), b in point(), n in 1..20usize) {
        let s = ModeSpace::single(1.0).unwrap();
        let op = PolynomialOperator::harmonic_oscillator(&s);
        let cfg = LatticeConfig::new(n, 0.3, SymbolRoute::Upper).unwrap();
        let (a, b) = (Label::from_points(0, vec![a]).unwrap(), Label::from_points(0, vec![b]).unwrap());
        let x = propagator_gaussian_chain(&op, &a, &b, &cfg).unwrap().amplitude;
        let y = propagator_gaussian_chain(&op, &a, &b, &cfg).unwrap().amplitude;
        prop_assert_eq!(x, y);
    }
}

#[test]
fn wiener_estimate_is_reproducible_per_seed() {
    let s = ModeSpace::single(1.0).unwrap();
    let h = cspi::symbols::lower_symbol(&PolynomialOperator::harmonic_oscillator(&s));
    let (a, b) = (Label::point(0.3, 0.5).unwrap(), Label::point(-0.2, 0.1).unwrap());
    let cfg = |seed| WienerConfig {
        nu: 5.0,
        lattice: LatticeConfig::new(8, 0.4, SymbolRoute::Lower).unwrap(),
        metric: MetricSpec::unit_phase_space(&s),
        seed,
        n_samples: 2000,
    };
    let x = raw_estimate(&s, &h, &a, &b, &cfg(4)).unwrap();
    let y = raw_estimate(&s, &h, &a, &b, &cfg(4)).unwrap();
    let z = raw_estimate(&s, &h, &a, &b, &cfg(5)).unwrap();
    assert_eq!(x.mean, y.mean);
    assert_ne!(x.mean, z.mean);
}
