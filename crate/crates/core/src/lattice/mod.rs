//! Time-sliced coherent-state propagators.
//!
//! `⟨x''| e^{-iĤT/ħ} |x'⟩` is approximated by inserting `N` resolutions of
//! unity, giving `N + 1` short-time kernels with `ε = T/(N + 1)`:
//!
//! * upper route: `⟨x_{n+1}|x_n⟩ exp(-iε ⟨x_{n+1}|Ĥ|x_n⟩ / (ħ ⟨x_{n+1}|x_n⟩))`
//! * lower route: `⟨x_{n+1}|x_n⟩ exp(-iε h(x_n)/ħ)` with `h` the lower symbol.

mod chain;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use chain::{gaussian_chain, quadrature_chain, ChainQuadrature, SliceKernel, MAX_NODES_PER_AXIS};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::oracle::{fock_propagator, FockTruncation};
use crate::states::{ladder_value, log_overlap_mode, Label, ModeSpace, PhasePoint};
use crate::symbols::{lower_symbol, PolynomialOperator, SymbolFn};

/// Which symbol enters the short-time kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SymbolRoute {
    #[default]
    Upper,
    Lower,
}

/// Discretization of the time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Number of interior slices `N`.
    pub slices: usize,
    /// `t'' - t'`.
    pub total_time: f64,
    pub route: SymbolRoute,
}

impl LatticeConfig {
    pub fn new(slices: usize, total_time: f64, route: SymbolRoute) -> Result<Self> {
        if slices == 0 {
            return Err(Error::param("slices", "N must be at least 1"));
        }
        if !total_time.is_finite() {
            return Err(Error::NonFinite("total_time"));
        }
        Ok(LatticeConfig {
            slices,
            total_time,
            route,
        })
    }

    /// `ε = T / (N + 1)`.
    pub fn epsilon(&self) -> f64 {
        self.total_time / (self.slices as f64 + 1.0)
    }
}

/// How an amplitude was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GaussianChain,
    Quadrature,
    FockOracle,
    WienerMc,
}

/// An amplitude with the discretization that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatorResult {
    pub amplitude: Complex64,
    pub method: Method,
    pub total_time: f64,
    pub lattice: Option<LatticeConfig>,
    /// Boundary diagnostic for quadrature, zero for the Gaussian chain,
    /// truncation bound for the oracle, standard error for Monte Carlo.
    pub error_estimate: f64,
}

/// Which label coordinate a lattice variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Coord {
    pub mode: usize,
    pub is_q: bool,
}

/// Short-time kernel on labels, with some coordinates optionally held fixed
/// at every interior slice.
pub(crate) struct LabelKernel {
    space: ModeSpace,
    route: SymbolRoute,
    eps: f64,
    /// Normal-ordered terms with ħ multiplied in: `(c, [(mode, m, n)])`.
    terms: Vec<(Complex64, Vec<(usize, u32, u32)>)>,
    lower: Option<SymbolFn>,
    free: Vec<Coord>,
    template: Vec<PhasePoint>,
}

impl LabelKernel {
    pub fn new(op: &PolynomialOperator, eps: f64, route: SymbolRoute, free: Vec<Coord>, template: Vec<PhasePoint>) -> Self {
        let space = op.space().clone();
        let hbar = space.hbar();
        let terms = op
            .terms()
            .map(|(m, &c)| {
                let f = m
                    .powers
                    .iter()
                    .enumerate()
                    .filter(|(_, &(a, b))| a + b > 0)
                    .map(|(k, &(a, b))| (k, a, b))
                    .collect();
                (c * hbar.powi(m.hbar_pow as i32), f)
            })
            .collect();
        let lower = (route == SymbolRoute::Lower).then(|| lower_symbol(op));
        LabelKernel {
            space,
            route,
            eps,
            terms,
            lower,
            free,
            template,
        }
    }

    /// Every coordinate of every mode free.
    pub fn full(op: &PolynomialOperator, eps: f64, route: SymbolRoute) -> Self {
        let m = op.space().modes();
        let free = (0..m)
            .flat_map(|k| [Coord { mode: k, is_q: false }, Coord { mode: k, is_q: true }])
            .collect();
        Self::new(op, eps, route, free, vec![PhasePoint::ORIGIN; m])
    }

    pub fn embed(&self, x: &[f64]) -> Vec<PhasePoint> {
        let mut pts = self.template.clone();
        for (c, &v) in self.free.iter().zip(x) {
            if c.is_q {
                pts[c.mode].q = v;
            } else {
                pts[c.mode].p = v;
            }
        }
        pts
    }

    pub fn coords_of(&self, label: &Label) -> Vec<f64> {
        self.free
            .iter()
            .map(|c| {
                let pt = label.mode(c.mode);
                if c.is_q {
                    pt.q
                } else {
                    pt.p
                }
            })
            .collect()
    }

    /// `⟨a|op|b⟩ / ⟨a|b⟩` from the cached terms.
    fn ratio(&self, a: &[PhasePoint], b: &[PhasePoint]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (c, f) in &self.terms {
            let mut v = *c;
            for &(k, m, n) in f {
                v *= ladder_value(&self.space, k, a[k]).conj().powu(m) * ladder_value(&self.space, k, b[k]).powu(n);
            }
            total += v;
        }
        total
    }

    pub fn log_kernel_points(&self, next: &[PhasePoint], prev: &[PhasePoint]) -> Complex64 {
        let mut s: Complex64 = (0..self.space.modes())
            .map(|k| log_overlap_mode(&self.space, k, next[k], prev[k]))
            .sum();
        if self.eps != 0.0 {
            let energy = match self.route {
                SymbolRoute::Upper => self.ratio(next, prev),
                SymbolRoute::Lower => self.lower.as_ref().map(|h| h.eval_points(prev)).unwrap_or_default(),
            };
            s += Complex64::new(0.0, -self.eps / self.space.hbar()) * energy;
        }
        s
    }

    /// Default axes: the endpoint hull widened by eight coherent-state
    /// widths, `MAX_NODES_PER_AXIS` nodes.
    pub fn default_axes(&self, start: &[f64], end: &[f64]) -> Result<Vec<Axis>> {
        let hbar_root = self.space.hbar().sqrt();
        self.free
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s = self.space.width(c.mode);
                let w = if c.is_q { s } else { 1.0 / s } * hbar_root;
                let lo = start[i].min(end[i]) - 8.0 * w;
                let hi = start[i].max(end[i]) + 8.0 * w;
                Axis::with_count(lo, hi, MAX_NODES_PER_AXIS)
            })
            .collect()
    }
}

impl SliceKernel for LabelKernel {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn log_kernel(&self, next: &[f64], prev: &[f64]) -> Complex64 {
        self.log_kernel_points(&self.embed(next), &self.embed(prev))
    }

    fn log_measure(&self) -> f64 {
        -(self.space.modes() as f64) * (2.0 * std::f64::consts::PI * self.space.hbar()).ln()
    }
}

fn check_labels(space: &ModeSpace, a: &Label, b: &Label) -> Result<()> {
    a.check(space)?;
    b.check(space)
}

/// One short-time factor `⟨a| e^{-iεĤ/ħ} |b⟩` in the chosen route.
pub fn short_time_kernel(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    epsilon: f64,
    route: SymbolRoute,
) -> Result<Complex64> {
    check_labels(op.space(), a, b)?;
    if !epsilon.is_finite() {
        return Err(Error::NonFinite("epsilon"));
    }
    let k = LabelKernel::full(op, epsilon, route);
    let v = k.log_kernel_points(a.points(), b.points()).exp();
    if v == Complex64::new(0.0, 0.0) {
        return Err(Error::param("labels", "overlap underflows to zero"));
    }
    Ok(v)
}

/// Iterated tensor quadrature of the lattice product. `axes` gives one axis
/// per label coordinate in the order `(p_0, q_0, p_1, q_1, ...)`; `None`
/// picks [`LabelKernel::default_axes`].
pub fn propagator_quadrature(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    cfg: &LatticeConfig,
    axes: Option<&[Axis]>,
) -> Result<PropagatorResult> {
    let space = op.space();
    check_labels(space, a, b)?;
    let k = LabelKernel::full(op, cfg.epsilon(), cfg.route);
    let start = k.coords_of(b);
    let end = k.coords_of(a);
    let axes = match axes {
        Some(ax) => ax.to_vec(),
        None => k.default_axes(&start, &end)?,
    };
    let q = quadrature_chain(&k, &start, &end, cfg.slices, &axes)?;
    Ok(PropagatorResult {
        amplitude: q.value,
        method: Method::Quadrature,
        total_time: cfg.total_time,
        lattice: Some(*cfg),
        error_estimate: q.boundary,
    })
}

/// Same lattice expression as [`propagator_quadrature`], evaluated exactly
/// for operators at most quadratic in the canonical variables.
pub fn propagator_gaussian_chain(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    cfg: &LatticeConfig,
) -> Result<PropagatorResult> {
    let space = op.space();
    check_labels(space, a, b)?;
    if !op.is_quadratic() {
        return Err(Error::Unsupported(format!(
            "Gaussian chain needs a quadratic operator, got degree {}",
            op.degree()
        )));
    }
    let k = LabelKernel::full(op, cfg.epsilon(), cfg.route);
    let log = gaussian_chain(&k, &k.coords_of(b), &k.coords_of(a), cfg.slices)?;
    Ok(PropagatorResult {
        amplitude: log.exp(),
        method: Method::GaussianChain,
        total_time: cfg.total_time,
        lattice: Some(*cfg),
        error_estimate: 0.0,
    })
}

/// Uses the Gaussian chain for quadratic operators and quadrature otherwise.
pub fn propagator(op: &PolynomialOperator, a: &Label, b: &Label, cfg: &LatticeConfig) -> Result<PropagatorResult> {
    if op.is_quadratic() {
        propagator_gaussian_chain(op, a, b, cfg)
    } else {
        propagator_quadrature(op, a, b, cfg, None)
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub slices: usize,
    pub epsilon: f64,
    pub amplitude: Complex64,
    /// `|lattice - oracle|`.
    pub error: f64,
}

/// Lattice amplitudes against the Fock oracle over a list of slice counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub route: SymbolRoute,
    pub total_time: f64,
    pub oracle: Complex64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln ε`, when at least two
    /// errors are above round-off.
    pub slope: Option<f64>,
    /// First-order Richardson extrapolation from the last two rows.
    pub extrapolated: Option<Complex64>,
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 1e-14)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Removes the first-order term of `A(ε) = A₀ + cε` from two samples.
pub fn richardson(e1: f64, a1: Complex64, e2: f64, a2: Complex64) -> Option<Complex64> {
    (e1 != e2).then(|| (a2 * e1 - a1 * e2) / (e1 - e2))
}

pub fn convergence_study(
    op: &PolynomialOperator,
    a: &Label,
    b: &Label,
    total_time: f64,
    slice_list: &[usize],
    route: SymbolRoute,
    trunc: FockTruncation,
) -> Result<ConvergenceStudy> {
    if slice_list.is_empty() {
        return Err(Error::param("slice_list", "at least one N is required"));
    }
    let oracle = fock_propagator(op, a, b, total_time, trunc)?.amplitude;
    let mut rows = Vec::with_capacity(slice_list.len());
    for &n in slice_list {
        let cfg = LatticeConfig::new(n, total_time, route)?;
        let r = propagator(op, a, b, &cfg)?;
        rows.push(ConvergenceRow {
            slices: n,
            epsilon: cfg.epsilon(),
            amplitude: r.amplitude,
            error: (r.amplitude - oracle).norm(),
        });
    }
    let slope = log_log_slope(&rows.iter().map(|r| (r.epsilon, r.error)).collect::<Vec<_>>());
    let extrapolated = match rows.as_slice() {
        [.., x, y] => richardson(x.epsilon, x.amplitude, y.epsilon, y.amplitude),
        _ => None,
    };
    Ok(ConvergenceStudy {
        route,
        total_time,
        oracle,
        rows,
        slope,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::overlap;

    fn ho1() -> (ModeSpace, PolynomialOperator) {
        let s = ModeSpace::single(1.0).unwrap();
        let op = PolynomialOperator::harmonic_oscillator(&s);
        (s, op)
    }

    #[test]
    fn epsilon_is_exact() {
        let c = LatticeConfig::new(3, 0.2, SymbolRoute::Upper).unwrap();
        assert_eq!(c.epsilon(), 0.05);
        assert!(LatticeConfig::new(0, 1.0, SymbolRoute::Upper).is_err());
    }

    #[test]
    fn kernel_limits() {
        let (s, ho) = ho1();
        let a = Label::point(0.3, -0.4).unwrap();
        let b = Label::point(-0.2, 0.9).unwrap();
        let ov = overlap(&s, &a, &b).unwrap();
        for route in [SymbolRoute::Upper, SymbolRoute::Lower] {
            assert_eq!(short_time_kernel(&ho, &a, &b, 0.0, route).unwrap(), ov);
            let zero = PolynomialOperator::zero(&s);
            assert_eq!(short_time_kernel(&zero, &a, &b, 0.3, route).unwrap(), ov);
        }
        let o = Label::point(0.0, 0.0).unwrap();
        let k = short_time_kernel(&ho, &o, &o, 0.01, SymbolRoute::Upper).unwrap();
        assert!((k - Complex64::new(0.0, -0.005).exp()).norm() < 1e-15);
    }

    #[test]
    fn zero_time_chain_is_overlap() {
        let (s, ho) = ho1();
        let a = Label::point(0.3, -0.4).unwrap();
        let b = Label::point(-0.2, 0.9).unwrap();
        let ov = overlap(&s, &a, &b).unwrap();
        for n in [1, 2, 5] {
            let cfg = LatticeConfig::new(n, 0.0, SymbolRoute::Upper).unwrap();
            let g = propagator_gaussian_chain(&ho, &a, &b, &cfg).unwrap();
            assert!((g.amplitude - ov).norm() < 1e-12);
        }
    }

    #[test]
    fn chain_matches_quadrature_small() {
        let (_, ho) = ho1();
        let a = Label::point(0.0, 0.0).unwrap();
        let cfg = LatticeConfig::new(2, 0.2, SymbolRoute::Lower).unwrap();
        let g = propagator_gaussian_chain(&ho, &a, &a, &cfg).unwrap();
        let q = propagator_quadrature(&ho, &a, &a, &cfg, None).unwrap();
        assert!((g.amplitude - q.amplitude).norm() < 1e-6, "{} {}", g.amplitude, q.amplitude);
    }

    #[test]
    fn quartic_needs_quadrature() {
        let (s, _) = ho1();
        let q4 = PolynomialOperator::position(&s, 0).pow(4);
        let a = Label::point(0.0, 0.0).unwrap();
        let cfg = LatticeConfig::new(2, 0.1, SymbolRoute::Upper).unwrap();
        assert!(matches!(
            propagator_gaussian_chain(&q4, &a, &a, &cfg),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn slope_and_richardson() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&e| (e, 3.0 * e)).collect();
        assert!((log_log_slope(&pts).unwrap() - 1.0).abs() < 1e-12);
        let r = richardson(0.1, Complex64::new(1.3, 0.0), 0.05, Complex64::new(1.15, 0.0)).unwrap();
        assert!((r.re - 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[(0.1, 0.0), (0.05, 0.0)]).is_none());
    }
}
