//! Lattice routes with the constraints imposed slice by slice.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::Serialize;

use super::lambda::{lambda_effective_weight, uniform_times};
use super::{check_on_surface, sector_label, sector_space};
use crate::error::{Error, Result};
use crate::lattice::{gaussian_chain, quadrature_chain, Coord, LabelKernel, LatticeConfig, Method, PropagatorResult, SliceKernel};
use crate::grid::Axis;
use crate::states::{overlap, Label, ModeSpace, PhasePoint};
use crate::symbols::PolynomialOperator;

/// A constrained-route amplitude before and after gauge normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstrainedResult {
    /// `raw · ⟨z''|z'⟩ / gauge_factor`, comparable with the reduced
    /// propagator.
    pub result: PropagatorResult,
    /// The lattice integral itself.
    pub raw: Complex64,
    /// The same lattice integral for the zero operator.
    pub gauge_factor: Complex64,
}

/// Value, error estimate and method of one chain evaluation.
type ChainValue = (Complex64, f64, Method);

fn run_chain<K: SliceKernel>(
    kernel: &K,
    start: &[f64],
    end: &[f64],
    slices: usize,
    quadratic: bool,
    axes: impl FnOnce() -> Result<Vec<Axis>>,
) -> Result<ChainValue> {
    if quadratic {
        Ok((gaussian_chain(kernel, start, end, slices)?.exp(), 0.0, Method::GaussianChain))
    } else {
        let q = quadrature_chain(kernel, start, end, slices, &axes()?)?;
        Ok((q.value, q.boundary, Method::Quadrature))
    }
}

fn combine(a: ChainValue, b: ChainValue) -> ChainValue {
    let method = if a.2 == Method::Quadrature || b.2 == Method::Quadrature {
        Method::Quadrature
    } else {
        Method::GaussianChain
    };
    (a.0 * b.0, a.1 * b.0.norm() + b.1 * a.0.norm(), method)
}

/// Coordinates of a sector kernel: every `q`, and `p` only where not pinned.
fn free_coords(modes: usize, pinned: &[bool]) -> Vec<Coord> {
    (0..modes)
        .flat_map(|k| {
            let p = (!pinned[k]).then_some(Coord { mode: k, is_q: false });
            p.into_iter().chain([Coord { mode: k, is_q: true }])
        })
        .collect()
}

/// Lattice integral with the momenta of the `pinned` modes held at zero.
fn projected_chain(op: &PolynomialOperator, pinned: &[bool], a: &Label, b: &Label, cfg: &LatticeConfig) -> Result<ChainValue> {
    let m = op.space().modes();
    let k = LabelKernel::new(op, cfg.epsilon(), cfg.route, free_coords(m, pinned), vec![PhasePoint::ORIGIN; m]);
    let start = k.coords_of(b);
    let end = k.coords_of(a);
    run_chain(&k, &start, &end, cfg.slices, op.is_quadratic(), || k.default_axes(&start, &end))
}

/// Splits the evaluation into the constrained sector and the reduced
/// sector when no term couples them.
struct Sectors {
    constrained: Vec<usize>,
    reduced: Vec<usize>,
    /// `(constrained part, reduced part)` on their own sector spaces.
    parts: Option<(PolynomialOperator, PolynomialOperator)>,
}

fn sectors(op: &PolynomialOperator) -> Result<Sectors> {
    let space = op.space();
    let constrained: Vec<usize> = space.constrained_modes().collect();
    let reduced: Vec<usize> = space.reduced_modes().collect();
    let inside: BTreeSet<usize> = constrained.iter().copied().collect();
    let (c_part, r_part, cross) = op.split_by_modes(&inside);
    let parts = if cross.is_zero() && !constrained.is_empty() {
        Some((
            c_part.restrict(&constrained, &sector_space(space, &constrained)?)?,
            r_part.restrict(&reduced, &sector_space(space, &reduced)?)?,
        ))
    } else {
        None
    };
    Ok(Sectors {
        constrained,
        reduced,
        parts,
    })
}

fn finish(space: &ModeSpace, a: &Label, b: &Label, cfg: &LatticeConfig, raw: ChainValue, gauge: Complex64) -> Result<ConstrainedResult> {
    if gauge.norm() == 0.0 || !gauge.norm().is_finite() {
        return Err(Error::NonFinite("gauge normalization"));
    }
    let reduced = space.reduced_space();
    let z_overlap = overlap(&reduced, &a.reduced(), &b.reduced())?;
    let scale = z_overlap / gauge;
    Ok(ConstrainedResult {
        result: PropagatorResult {
            amplitude: raw.0 * scale,
            method: raw.2,
            total_time: cfg.total_time,
            lattice: Some(*cfg),
            error_estimate: raw.1 * scale.norm(),
        },
        raw: raw.0,
        gauge_factor: gauge,
    })
}

/// Lattice propagator with every interior constrained momentum set to zero.
///
/// Both endpoints must lie on the constraint surface. The free integral over
/// the constrained `q` is a gauge volume; dividing by the zero-operator
/// integral and multiplying by the reduced overlap removes it.
pub fn projected_lattice_propagator(op: &PolynomialOperator, a: &Label, b: &Label, cfg: &LatticeConfig) -> Result<ConstrainedResult> {
    let space = op.space();
    check_on_surface(space, a, "final")?;
    check_on_surface(space, b, "initial")?;
    let sec = sectors(op)?;
    let (raw, gauge) = match &sec.parts {
        Some((c_op, r_op)) => {
            let pinned = vec![true; sec.constrained.len()];
            let (ca, cb) = (sector_label(a, &sec.constrained), sector_label(b, &sec.constrained));
            let (ra, rb) = (sector_label(a, &sec.reduced), sector_label(b, &sec.reduced));
            let c = projected_chain(c_op, &pinned, &ca, &cb, cfg)?;
            let c0 = projected_chain(&PolynomialOperator::zero(c_op.space()), &pinned, &ca, &cb, cfg)?;
            let z = projected_chain(r_op, &vec![false; sec.reduced.len()], &ra, &rb, cfg)?;
            let z0 = overlap(r_op.space(), &ra, &rb)?;
            (combine(c, z), c0.0 * z0)
        }
        None => {
            let pinned: Vec<bool> = (0..space.modes()).map(|k| space.is_constrained(k)).collect();
            let v = projected_chain(op, &pinned, a, b, cfg)?;
            let v0 = projected_chain(&PolynomialOperator::zero(space), &pinned, a, b, cfg)?;
            (v, v0.0)
        }
    };
    finish(space, a, b, cfg, raw, gauge)
}

/// The projected propagator multiplied by the multiplier weight at the
/// concentration point `p = 0`, with both multiplier ends at
/// `lambda_common`.
pub fn concentrated_propagator(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    cfg: &LatticeConfig,
    nu: f64,
    lambda_common: f64,
) -> Result<ConstrainedResult> {
    let mut r = projected_lattice_propagator(op, a, b, cfg)?;
    let nc = op.space().n_constrained();
    let w = lambda_effective_weight(
        &vec![vec![0.0; nc]; cfg.slices],
        &vec![(lambda_common, lambda_common); nc],
        nu,
        &uniform_times(cfg.slices, cfg.total_time),
        op.space().hbar(),
    )?;
    r.result.amplitude *= w;
    r.raw *= w;
    Ok(r)
}

/// Slice kernel with one multiplier per constrained mode appended to the
/// label coordinates.
struct LambdaKernel {
    label: LabelKernel,
    label_dim: usize,
    /// Label coordinate index of each constrained momentum.
    p_index: Vec<usize>,
    hbar: f64,
    step_var: f64,
}

impl SliceKernel for LambdaKernel {
    fn dim(&self) -> usize {
        self.label_dim + self.p_index.len()
    }

    fn log_kernel(&self, next: &[f64], prev: &[f64]) -> Complex64 {
        let d = self.label_dim;
        let mut s = self.label.log_kernel(&next[..d], &prev[..d]);
        let norm = -0.5 * (2.0 * std::f64::consts::PI * self.step_var).ln();
        for (i, &pi) in self.p_index.iter().enumerate() {
            let (ln, lp) = (next[d + i], prev[d + i]);
            s += Complex64::new(norm - (ln - lp) * (ln - lp) / (2.0 * self.step_var), -lp * prev[pi] / self.hbar);
        }
        s
    }

    fn log_measure(&self) -> f64 {
        self.label.log_measure()
    }
}

fn lambda_chain(
    op: &PolynomialOperator,
    constrained: &[usize],
    a: &Label,
    b: &Label,
    cfg: &LatticeConfig,
    nu: f64,
    lambda_common: f64,
) -> Result<ChainValue> {
    let space = op.space();
    let m = space.modes();
    let label = LabelKernel::new(op, cfg.epsilon(), cfg.route, free_coords(m, &vec![false; m]), vec![PhasePoint::ORIGIN; m]);
    let label_dim = 2 * m;
    let k = LambdaKernel {
        label,
        label_dim,
        p_index: constrained.iter().map(|&c| 2 * c).collect(),
        hbar: space.hbar(),
        step_var: nu * cfg.epsilon(),
    };
    let ends = |l: &Label| {
        let mut x = k.label.coords_of(l);
        x.extend(std::iter::repeat(lambda_common).take(constrained.len()));
        x
    };
    let (start, end) = (ends(b), ends(a));
    let lambda_half = 8.0 * (nu * cfg.total_time).sqrt() / 2.0;
    run_chain(&k, &start, &end, cfg.slices, op.is_quadratic(), || {
        let mut axes = k.label.default_axes(&start[..label_dim], &end[..label_dim])?;
        for _ in constrained {
            axes.push(Axis::with_count(
                lambda_common - lambda_half,
                lambda_common + lambda_half,
                crate::lattice::MAX_NODES_PER_AXIS,
            )?);
        }
        Ok(axes)
    })
}

/// Lattice propagator over the extended phase space: constrained momenta
/// are integrated, and each interior slice carries a multiplier `λ_n` with
/// Wiener steps of variance `ν ε` and the phase `-(i/ħ) λ_n p_n`. Both
/// multiplier ends sit at `lambda_common`. Normalized like
/// [`projected_lattice_propagator`].
pub fn extended_lambda_propagator(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    cfg: &LatticeConfig,
    nu: f64,
    lambda_common: f64,
) -> Result<ConstrainedResult> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::param("nu", format!("must be positive, got {nu}")));
    }
    if !lambda_common.is_finite() {
        return Err(Error::NonFinite("lambda_common"));
    }
    let space = op.space();
    check_on_surface(space, a, "final")?;
    check_on_surface(space, b, "initial")?;
    let sec = sectors(op)?;
    let (raw, gauge) = match &sec.parts {
        Some((c_op, r_op)) => {
            let all: Vec<usize> = (0..sec.constrained.len()).collect();
            let (ca, cb) = (sector_label(a, &sec.constrained), sector_label(b, &sec.constrained));
            let (ra, rb) = (sector_label(a, &sec.reduced), sector_label(b, &sec.reduced));
            let c = lambda_chain(c_op, &all, &ca, &cb, cfg, nu, lambda_common)?;
            let c0 = lambda_chain(&PolynomialOperator::zero(c_op.space()), &all, &ca, &cb, cfg, nu, lambda_common)?;
            let z = projected_chain(r_op, &vec![false; sec.reduced.len()], &ra, &rb, cfg)?;
            let z0 = overlap(r_op.space(), &ra, &rb)?;
            (combine(c, z), c0.0 * z0)
        }
        None => {
            let v = lambda_chain(op, &sec.constrained, a, b, cfg, nu, lambda_common)?;
            let v0 = lambda_chain(&PolynomialOperator::zero(space), &sec.constrained, a, b, cfg, nu, lambda_common)?;
            (v, v0.0)
        }
    };
    finish(space, a, b, cfg, raw, gauge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{propagator_gaussian_chain, SymbolRoute};

    fn system() -> (ModeSpace, PolynomialOperator, PolynomialOperator) {
        let s = ModeSpace::new(1, 1, 1.0).unwrap();
        let red = s.reduced_space();
        let h0 = PolynomialOperator::harmonic_oscillator(&red);
        let full = parse(&s, &["0.5 p1^2", "0.5 q1^2"]);
        (s, full, h0)
    }

    fn parse(s: &ModeSpace, t: &[&str]) -> PolynomialOperator {
        crate::symbols::parse_operator(s, t).unwrap()
    }

    fn labels() -> (Label, Label) {
        (
            Label::new(vec![0.0], vec![0.4], vec![(0.3, 1.0)]).unwrap(),
            Label::new(vec![0.0], vec![-1.1], vec![(-0.5, 0.2)]).unwrap(),
        )
    }

    #[test]
    fn zero_operator_gives_gauge_volume() {
        let (s, _, _) = system();
        let (a, b) = labels();
        let cfg = LatticeConfig::new(5, 1.0, SymbolRoute::Upper).unwrap();
        let r = projected_lattice_propagator(&PolynomialOperator::zero(&s), &a, &b, &cfg).unwrap();
        // each projected overlap is exp(-Δq²/4ħ); chaining N+1 of them
        // with N integrals dq/(2πħ) gives a heat kernel of variance 2ħ(N+1)
        let (n, hbar, dq) = (5.0_f64, 1.0, 0.4 - -1.1);
        let var = 2.0 * hbar * (n + 1.0);
        let g = (4.0 * std::f64::consts::PI * hbar).powf((n + 1.0) / 2.0) / (2.0 * std::f64::consts::PI * hbar).powf(n)
            * (-dq * dq / (2.0 * var)).exp()
            / (2.0 * std::f64::consts::PI * var).sqrt();
        let zo = overlap(&s.reduced_space(), &a.reduced(), &b.reduced()).unwrap();
        assert!((r.raw - zo * g).norm() < 1e-12 * g);
        assert!((r.result.amplitude - zo).norm() < 1e-14);
    }

    #[test]
    fn reduced_only_operator_matches_reduced_lattice() {
        let (s, full, h0) = system();
        let (a, b) = labels();
        for route in [SymbolRoute::Upper, SymbolRoute::Lower] {
            let cfg = LatticeConfig::new(16, 0.3, route).unwrap();
            let r = projected_lattice_propagator(&full, &a, &b, &cfg).unwrap();
            let z = propagator_gaussian_chain(&h0, &a.reduced(), &b.reduced(), &cfg).unwrap();
            assert!((r.result.amplitude - z.amplitude).norm() < 1e-12);
            // same operator forced through the joint evaluation
            let coupled = &full + &parse(&s, &["1e-300 q0 q1"]);
            let j = projected_lattice_propagator(&coupled, &a, &b, &cfg).unwrap();
            assert!((j.result.amplitude - z.amplitude).norm() < 1e-10, "{route:?}");
        }
    }

    #[test]
    fn kinetic_constraint_term_shifts_phase() {
        let (s, full, h0) = system();
        let (a, b) = labels();
        let cfg = LatticeConfig::new(64, 0.5, SymbolRoute::Lower).unwrap();
        let with = &full + &parse(&s, &["p0^2"]);
        let r = projected_lattice_propagator(&with, &a, &b, &cfg).unwrap();
        let z = propagator_gaussian_chain(&h0, &a.reduced(), &b.reduced(), &cfg).unwrap();
        let shift = (r.result.amplitude / z.amplitude).arg();
        // lower symbol of P² on p = 0 is -ħ/2: phase +ħT/2
        assert!((shift - 0.25).abs() < 1e-12, "{shift}");
    }

    #[test]
    fn endpoints_must_satisfy_constraint() {
        let (_, full, _) = system();
        let a = Label::new(vec![0.1], vec![0.0], vec![(0.0, 0.0)]).unwrap();
        let b = Label::new(vec![0.0], vec![0.0], vec![(0.0, 0.0)]).unwrap();
        let cfg = LatticeConfig::new(4, 0.3, SymbolRoute::Upper).unwrap();
        assert!(matches!(
            projected_lattice_propagator(&full, &a, &b, &cfg),
            Err(Error::Constraint(_))
        ));
        assert!(extended_lambda_propagator(&full, &a, &b, &cfg, 1.0, 0.0).is_err());
    }

    #[test]
    fn multiplier_route_on_separable_system() {
        let (_, full, h0) = system();
        let (a, b) = labels();
        let cfg = LatticeConfig::new(16, 0.3, SymbolRoute::Upper).unwrap();
        let z = propagator_gaussian_chain(&h0, &a.reduced(), &b.reduced(), &cfg).unwrap();
        for nu in [5.0, 20.0, 80.0] {
            let r = extended_lambda_propagator(&full, &a, &b, &cfg, nu, 0.0).unwrap();
            assert!((r.result.amplitude - z.amplitude).norm() < 1e-10);
        }
    }

    #[test]
    fn concentrated_amplitude_ignores_common_multiplier() {
        let (s, full, _) = system();
        let (a, b) = labels();
        let cfg = LatticeConfig::new(8, 0.3, SymbolRoute::Lower).unwrap();
        let op = &full + &parse(&s, &["0.3 p0^2"]);
        let base = concentrated_propagator(&op, &a, &b, &cfg, 10.0, 0.0).unwrap();
        for c in [-1.0, 1.0] {
            let r = concentrated_propagator(&op, &a, &b, &cfg, 10.0, c).unwrap();
            assert!((r.result.amplitude - base.result.amplitude).norm() < 1e-10);
        }
    }
}
