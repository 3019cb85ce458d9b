//! Pinned Wiener measure on flat phase space.
//!
//! Paths are Brownian bridges with diffusion constant `ν` on axes weighted by
//! a constant diagonal metric. The regularized propagator is estimated by
//! averaging
//!
//! ```text
//! F = exp{ i Σ_n arg⟨x_{n+1}|x_n⟩ - (iε/ħ) Σ_{n=0}^{N} h(x_n) }
//! ```
//!
//! over bridges from `x'` to `x''` and calibrating against the `h = 0`,
//! equal-endpoint estimate, which must equal `⟨x''|x''⟩ = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::{LatticeConfig, Method, PropagatorResult};
use crate::oracle::{brute_quadrature, tree_sum};
use crate::states::{log_overlap_mode, Label, ModeSpace, PhasePoint};
use crate::symbols::SymbolFn;

/// Constant diagonal metric `Σ w_i dx_i²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub weights: Vec<f64>,
}

impl MetricSpec {
    pub fn flat(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("metric", "at least one axis is required"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param("metric", "weights must be positive and finite"));
        }
        Ok(MetricSpec { weights })
    }

    /// Unit weights on the `2M` label coordinates `(p_0, q_0, p_1, ...)`.
    pub fn unit_phase_space(space: &ModeSpace) -> Self {
        MetricSpec {
            weights: vec![1.0; 2 * space.modes()],
        }
    }

    pub fn axes(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerConfig {
    pub nu: f64,
    pub lattice: LatticeConfig,
    pub metric: MetricSpec,
    pub seed: u64,
    pub n_samples: usize,
}

impl WienerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::param("nu", "diffusion constant must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "at least one sample is required"));
        }
        if !(self.lattice.total_time > 0.0) {
            return Err(Error::param("total_time", "bridge sampling needs T > 0"));
        }
        MetricSpec::flat(self.metric.weights.clone()).map(|_| ())
    }
}

/// One sampled path on the uniform grid `t_0 = 0, ..., t_{N+1} = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgePath {
    pub times: Vec<f64>,
    /// `values[n][axis]`.
    pub values: Vec<Vec<f64>>,
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(())
}

/// `∏_i (2πνt/w_i)^{-1/2} exp(-w_i Δ_i² / (2νt))`.
pub fn heat_kernel(a: &[f64], b: &[f64], t: f64, nu: f64, metric: &MetricSpec) -> Result<f64> {
    check_time(t)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::param("nu", "diffusion constant must be positive"));
    }
    if a.len() != metric.axes() || b.len() != metric.axes() {
        return Err(Error::Dimension {
            what: "heat kernel point",
            expected: metric.axes(),
            got: a.len().min(b.len()),
        });
    }
    Ok(log_heat_kernel(a, b, t, nu, &metric.weights).exp())
}

fn log_heat_kernel(a: &[f64], b: &[f64], t: f64, nu: f64, w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), w)| -0.5 * (2.0 * PI * nu * t / w).ln() - w * (x - y).powi(2) / (2.0 * nu * t))
        .sum()
}

/// Product-rule check with its grid diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductRuleReport {
    pub residual: f64,
    pub boundary: f64,
    /// Set when the grid step exceeds the width of the narrower kernel, so
    /// the trapezoid rule cannot resolve it.
    pub resolution_warning: bool,
}

/// `|ρ(a,c;t1+t2) - ∫ ρ(a,x;t1) ρ(x,c;t2) dx|` on `grid`.
pub fn chapman_kolmogorov_residual(
    a: &[f64],
    c: &[f64],
    t1: f64,
    t2: f64,
    nu: f64,
    metric: &MetricSpec,
    grid: &Grid,
) -> Result<ProductRuleReport> {
    check_time(t1)?;
    check_time(t2)?;
    if grid.dims() != metric.axes() {
        return Err(Error::Dimension {
            what: "product-rule grid",
            expected: metric.axes(),
            got: grid.dims(),
        });
    }
    let direct = heat_kernel(a, c, t1 + t2, nu, metric)?;
    let w = &metric.weights;
    let q = brute_quadrature(
        |x| {
            Complex64::new(
                (log_heat_kernel(a, x, t1, nu, w) + log_heat_kernel(x, c, t2, nu, w)).exp(),
                0.0,
            )
        },
        grid,
    )?;
    let narrow = t1.min(t2);
    let resolution_warning = grid
        .axes
        .iter()
        .zip(w)
        .any(|(ax, w)| ax.len() > 1 && ax.spacing() > (nu * narrow / w).sqrt());
    Ok(ProductRuleReport {
        residual: (direct - q.value.re).abs().max(q.value.im.abs()),
        boundary: q.boundary,
        resolution_warning,
    })
}

/// Per-sample generator: the stream is selected by the sample index, so
/// samples are independent of how work is split across threads.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Bridge pinned to zero at both ends, by recursive bisection with exact
/// Gaussian conditioning. `out[n][axis]`.
fn zero_bridge(rng: &mut ChaCha8Rng, times: &[f64], nu: f64, weights: &[f64], out: &mut [Vec<f64>]) {
    let last = times.len() - 1;
    for v in out.iter_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    let mut stack = vec![(0usize, last)];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let mid = (lo + hi) / 2;
        let (tl, tm, th) = (times[lo], times[mid], times[hi]);
        let frac = (tm - tl) / (th - tl);
        let var = nu * (tm - tl) * (th - tm) / (th - tl);
        for (ax, &w) in weights.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let mean = out[lo][ax] + frac * (out[hi][ax] - out[lo][ax]);
            out[mid][ax] = mean + (var / w).sqrt() * z;
        }
        // right half first so the left half is drawn next
        stack.push((mid, hi));
        stack.push((lo, mid));
    }
}

fn time_grid(cfg: &LatticeConfig) -> Vec<f64> {
    let eps = cfg.epsilon();
    (0..cfg.slices + 2).map(|n| n as f64 * eps).collect()
}

fn add_endpoints(zero: &[Vec<f64>], times: &[f64], start: &[f64], end: &[f64]) -> Vec<Vec<f64>> {
    let t = *times.last().unwrap();
    zero.iter()
        .zip(times)
        .map(|(row, &s)| {
            row.iter()
                .enumerate()
                .map(|(ax, &x)| x + start[ax] + (s / t) * (end[ax] - start[ax]))
                .collect()
        })
        .collect()
}

/// Sample `index` of the pinned bridge `start → end`. Endpoints are copied
/// exactly.
pub fn sample_pinned_bridge(start: &[f64], end: &[f64], cfg: &WienerConfig, index: u64) -> Result<BridgePath> {
    cfg.validate()?;
    let axes = cfg.metric.axes();
    if start.len() != axes || end.len() != axes {
        return Err(Error::Dimension {
            what: "bridge endpoint",
            expected: axes,
            got: start.len().min(end.len()),
        });
    }
    let times = time_grid(&cfg.lattice);
    let mut zero = vec![vec![0.0; axes]; times.len()];
    let mut rng = sample_rng(cfg.seed, index);
    zero_bridge(&mut rng, &times, cfg.nu, &cfg.metric.weights, &mut zero);
    let mut values = add_endpoints(&zero, &times, start, end);
    values[0] = start.to_vec();
    *values.last_mut().unwrap() = end.to_vec();
    Ok(BridgePath { times, values })
}

/// CSV dump `sample_id,time_index,axis,value`.
pub fn bridge_csv(paths: &[(u64, BridgePath)]) -> String {
    let mut s = String::from("sample_id,time_index,axis,value\n");
    for (id, p) in paths {
        for (n, row) in p.values.iter().enumerate() {
            for (ax, v) in row.iter().enumerate() {
                s.push_str(&format!("{id},{n},{ax},{v:e}\n"));
            }
        }
    }
    s
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: Complex64,
    pub stderr: f64,
}

/// Calibrated estimate plus the pieces that went into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerEstimate {
    pub result: PropagatorResult,
    /// Uncalibrated mean of `F` for the requested endpoints.
    pub raw: McEstimate,
    /// Mean of `F` with `h = 0` and both endpoints at `x''`.
    pub anchor: McEstimate,
    /// `|anchor mean|`; small values signal a severe sign problem.
    pub average_sign: f64,
}

const CHUNK: usize = 2048;

fn label_coords(label: &Label) -> Vec<f64> {
    label.points().iter().flat_map(|pt| [pt.p, pt.q]).collect()
}

fn to_points(x: &[f64]) -> Vec<PhasePoint> {
    x.chunks(2).map(|c| PhasePoint::new(c[0], c[1])).collect()
}

/// `(Σ arg⟨x_{n+1}|x_n⟩, Σ_{n=0}^{N} h(x_n))` along a path.
fn path_functionals(space: &ModeSpace, h: Option<&SymbolFn>, path: &[Vec<f64>]) -> (f64, Complex64) {
    let mut phase = 0.0;
    let mut energy = Complex64::new(0.0, 0.0);
    let pts: Vec<Vec<PhasePoint>> = path.iter().map(|x| to_points(x)).collect();
    for n in 0..pts.len() - 1 {
        for k in 0..space.modes() {
            phase += log_overlap_mode(space, k, pts[n + 1][k], pts[n][k]).im;
        }
        if let Some(h) = h {
            energy += h.eval_points(&pts[n]);
        }
    }
    (phase, energy)
}

fn check_mc_inputs(space: &ModeSpace, h: &SymbolFn, a: &Label, b: &Label, cfg: &WienerConfig) -> Result<()> {
    cfg.validate()?;
    a.check(space)?;
    b.check(space)?;
    if h.modes() != space.modes() {
        return Err(Error::Dimension {
            what: "symbol modes",
            expected: space.modes(),
            got: h.modes(),
        });
    }
    if cfg.metric.axes() != 2 * space.modes() {
        return Err(Error::Dimension {
            what: "metric axes",
            expected: 2 * space.modes(),
            got: cfg.metric.axes(),
        });
    }
    Ok(())
}

/// Running sums for a ratio of two complex means.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    x: Complex64,
    y: Complex64,
    xx: f64,
    yy: f64,
    xy: Complex64,
}

impl Sums {
    fn add(self, o: Sums) -> Sums {
        Sums {
            x: self.x + o.x,
            y: self.y + o.y,
            xx: self.xx + o.xx,
            yy: self.yy + o.yy,
            xy: self.xy + o.xy,
        }
    }
}

fn tree_reduce(mut v: Vec<Sums>) -> Sums {
    if v.is_empty() {
        return Sums::default();
    }
    while v.len() > 1 {
        v = v
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].add(c[1]) } else { c[0] })
            .collect();
    }
    v[0]
}

/// Draws all samples and returns sums of `X = F_h(b → a)` and
/// `Y = F_0(a → a)` on common random numbers.
fn run_samples(space: &ModeSpace, h: &SymbolFn, a: &Label, b: &Label, cfg: &WienerConfig) -> Sums {
    let times = time_grid(&cfg.lattice);
    let eps = cfg.lattice.epsilon();
    let hbar = space.hbar();
    let (xa, xb) = (label_coords(a), label_coords(b));
    let axes = cfg.metric.axes();
    let n = cfg.n_samples;
    let chunks: Vec<Sums> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut zero = vec![vec![0.0; axes]; times.len()];
            let mut s = Sums::default();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let mut rng = sample_rng(cfg.seed, i as u64);
                zero_bridge(&mut rng, &times, cfg.nu, &cfg.metric.weights, &mut zero);
                let path = add_endpoints(&zero, &times, &xb, &xa);
                let (phase, energy) = path_functionals(space, Some(h), &path);
                let x = (Complex64::new(0.0, phase) - Complex64::new(0.0, eps / hbar) * energy).exp();
                let loop_path = add_endpoints(&zero, &times, &xa, &xa);
                let (phase0, _) = path_functionals(space, None, &loop_path);
                let y = Complex64::new(0.0, phase0).exp();
                s.x += x;
                s.y += y;
                s.xx += x.norm_sqr();
                s.yy += y.norm_sqr();
                s.xy += x * y.conj();
            }
            s
        })
        .collect();
    tree_reduce(chunks)
}

fn mean_estimate(sum: Complex64, sq: f64, n: usize) -> McEstimate {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sq / nf) - mean.norm_sqr()).max(0.0) * nf / (nf - 1.0) } else { f64::INFINITY };
    McEstimate {
        mean,
        stderr: (var / nf).sqrt(),
    }
}

/// Uncalibrated Monte Carlo mean of `F` over bridges `b → a`.
pub fn raw_estimate(space: &ModeSpace, h: &SymbolFn, a: &Label, b: &Label, cfg: &WienerConfig) -> Result<McEstimate> {
    check_mc_inputs(space, h, a, b, cfg)?;
    let s = run_samples(space, h, a, b, cfg);
    Ok(mean_estimate(s.x, s.xx, cfg.n_samples))
}

/// `⟨a| e^{-iĤT/ħ} |b⟩` at diffusion constant `ν`, estimated from pinned
/// bridges with `h` the lower symbol of `Ĥ`.
///
/// The unspecified normalization of the measure is fixed by the anchor
/// `h = 0, b = a`, whose exact value is 1; the ratio of the two pinned heat
/// kernels accounts for the different endpoint pinning. The standard error
/// uses the delta method on the common-random-number ratio.
pub fn regularized_propagator_mc(
    space: &ModeSpace,
    h: &SymbolFn,
    a: &Label,
    b: &Label,
    cfg: &WienerConfig,
) -> Result<WienerEstimate> {
    check_mc_inputs(space, h, a, b, cfg)?;
    let s = run_samples(space, h, a, b, cfg);
    let n = cfg.n_samples as f64;
    let raw = mean_estimate(s.x, s.xx, cfg.n_samples);
    let anchor = mean_estimate(s.y, s.yy, cfg.n_samples);
    if anchor.mean.norm() == 0.0 {
        return Err(Error::param("n_samples", "anchor estimate vanished; sign problem too severe"));
    }
    let (xa, xb) = (label_coords(a), label_coords(b));
    let t = cfg.lattice.total_time;
    let pin = (log_heat_kernel(&xa, &xb, t, cfg.nu, &cfg.metric.weights)
        - log_heat_kernel(&xa, &xa, t, cfg.nu, &cfg.metric.weights))
    .exp();
    let ratio = raw.mean / anchor.mean;
    // E|X - R Y|² with R the ratio of means; E(X - R Y) = 0 by construction.
    let resid = (s.xx / n + ratio.norm_sqr() * s.yy / n - 2.0 * (ratio.conj() * s.xy / n).re).max(0.0);
    let stderr = if cfg.n_samples > 1 {
        (resid / (n - 1.0)).sqrt() / anchor.mean.norm() * pin
    } else {
        f64::INFINITY
    };
    Ok(WienerEstimate {
        result: PropagatorResult {
            amplitude: ratio * pin,
            method: Method::WienerMc,
            total_time: t,
            lattice: Some(cfg.lattice),
            error_estimate: stderr,
        },
        raw,
        anchor,
        average_sign: anchor.mean.norm(),
    })
}

/// Exact expectation of `F` on a lattice with one interior slice, by
/// quadrature against the bridge's Gaussian law at the midpoint. Used to
/// check the sampler and estimator for bias.
pub fn single_slice_expectation(
    space: &ModeSpace,
    h: &SymbolFn,
    a: &Label,
    b: &Label,
    cfg: &WienerConfig,
    grid: &Grid,
) -> Result<Complex64> {
    check_mc_inputs(space, h, a, b, cfg)?;
    if cfg.lattice.slices != 1 {
        return Err(Error::param("slices", "the single-slice expectation needs N = 1"));
    }
    if grid.dims() != cfg.metric.axes() {
        return Err(Error::Dimension {
            what: "grid axes",
            expected: cfg.metric.axes(),
            got: grid.dims(),
        });
    }
    let (xa, xb) = (label_coords(a), label_coords(b));
    let eps = cfg.lattice.epsilon();
    let hbar = space.hbar();
    // Midpoint law: mean (x' + x'')/2, variance ν (T/2)(T/2)/T / w.
    let t = cfg.lattice.total_time;
    let q = brute_quadrature(
        |x| {
            let path = vec![xb.clone(), x.to_vec(), xa.clone()];
            let (phase, energy) = path_functionals(space, Some(h), &path);
            let f = (Complex64::new(0.0, phase) - Complex64::new(0.0, eps / hbar) * energy).exp();
            let dens: f64 = x
                .iter()
                .enumerate()
                .map(|(ax, &v)| {
                    let var = cfg.nu * t / 4.0 / cfg.metric.weights[ax];
                    let m = 0.5 * (xa[ax] + xb[ax]);
                    (-(v - m).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
                })
                .product();
            f * dens
        },
        grid,
    )?;
    Ok(q.value)
}

/// Empirical covariance of the bridge at two interior time indices, with
/// the standard error of the estimate. Single axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub empirical: f64,
    pub stderr: f64,
    pub expected: f64,
}

pub fn bridge_covariance(cfg: &WienerConfig, axis: usize, i: usize, j: usize) -> Result<CovarianceCheck> {
    cfg.validate()?;
    let times = time_grid(&cfg.lattice);
    if i >= times.len() || j >= times.len() || axis >= cfg.metric.axes() {
        return Err(Error::param("index", "time or axis index out of range"));
    }
    let axes = cfg.metric.axes();
    let n = cfg.n_samples;
    let parts: Vec<(f64, f64, f64, f64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut zero = vec![vec![0.0; axes]; times.len()];
            let mut acc = (0.0, 0.0, 0.0, 0.0);
            for k in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let mut rng = sample_rng(cfg.seed, k as u64);
                zero_bridge(&mut rng, &times, cfg.nu, &cfg.metric.weights, &mut zero);
                let (x, y) = (zero[i][axis], zero[j][axis]);
                acc.0 += x;
                acc.1 += y;
                acc.2 += x * y;
                acc.3 += (x * y) * (x * y);
            }
            acc
        })
        .collect();
    let tot = tree_sum(parts.iter().map(|p| Complex64::new(p.0, p.1)).collect());
    let sxy = tree_sum(parts.iter().map(|p| Complex64::new(p.2, p.3)).collect());
    let nf = n as f64;
    let (mx, my) = (tot.re / nf, tot.im / nf);
    let mxy = sxy.re / nf;
    let empirical = mxy - mx * my;
    let var = (sxy.im / nf - mxy * mxy).max(0.0);
    let (s, t) = (times[i], times[j]);
    let total = *times.last().unwrap();
    Ok(CovarianceCheck {
        empirical,
        stderr: (var / nf).sqrt(),
        expected: cfg.nu * (s.min(t) - s * t / total) / cfg.metric.weights[axis],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::lattice::SymbolRoute;

    fn cfg(nu: f64, slices: usize, t: f64, seed: u64, n: usize, axes: usize) -> WienerConfig {
        WienerConfig {
            nu,
            lattice: LatticeConfig::new(slices, t, SymbolRoute::Lower).unwrap(),
            metric: MetricSpec::flat(vec![1.0; axes]).unwrap(),
            seed,
            n_samples: n,
        }
    }

    #[test]
    fn heat_kernel_peak() {
        let m = MetricSpec::flat(vec![1.0, 1.0]).unwrap();
        let v = heat_kernel(&[0.3, 0.1], &[0.3, 0.1], 1.0, 1.0, &m).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let v = heat_kernel(&[0.0, 0.0], &[0.0, 0.0], 0.5, 2.0, &m).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(heat_kernel(&[0.0, 0.0], &[0.0, 0.0], 0.0, 1.0, &m).is_err());
    }

    #[test]
    fn endpoints_pinned_and_deterministic() {
        let c = cfg(1.0, 5, 1.0, 7, 1, 2);
        let p = sample_pinned_bridge(&[0.0, 0.25], &[1.0, -0.5], &c, 3).unwrap();
        assert_eq!(p.values[0], vec![0.0, 0.25]);
        assert_eq!(p.values[6], vec![1.0, -0.5]);
        let again = sample_pinned_bridge(&[0.0, 0.25], &[1.0, -0.5], &c, 3).unwrap();
        assert_eq!(p, again);
        let other = sample_pinned_bridge(&[0.0, 0.25], &[1.0, -0.5], &c, 4).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn coarse_grid_flagged() {
        let m = MetricSpec::flat(vec![1.0]).unwrap();
        let grid = Grid::new(vec![Axis::symmetric(8.0, 0.05).unwrap()]).unwrap();
        let r = chapman_kolmogorov_residual(&[0.0], &[0.0], 1e-4, 0.5, 1.0, &m, &grid).unwrap();
        assert!(r.resolution_warning);
        let r = chapman_kolmogorov_residual(&[0.0], &[0.0], 0.5, 0.5, 1.0, &m, &grid).unwrap();
        assert!(!r.resolution_warning);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn csv_layout() {
        let c = cfg(1.0, 1, 1.0, 1, 1, 1);
        let p = sample_pinned_bridge(&[0.0], &[1.0], &c, 0).unwrap();
        let csv = bridge_csv(&[(0, p)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sample_id,time_index,axis,value");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("0,2,0,1e0"));
    }
}
