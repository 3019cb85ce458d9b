//! Evaluators for nearest-neighbour chains
//! `∫ ∏_{n=1}^{N} ρ dy_n ∏_{n=0}^{N} exp k(y_{n+1}, y_n)` with pinned
//! `y_0`, `y_{N+1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, MAX_AXES};
use crate::oracle::tree_sum;

/// Largest node count per axis the quadrature evaluator accepts.
pub const MAX_NODES_PER_AXIS: usize = 61;

/// One time step of a lattice: the log of the transition factor between
/// consecutive slices, each described by `dim()` real coordinates.
pub trait SliceKernel: Sync {
    fn dim(&self) -> usize;

    /// `ln k(next, prev)`.
    fn log_kernel(&self, next: &[f64], prev: &[f64]) -> Complex64;

    /// Log of the measure density attached to each interior slice.
    fn log_measure(&self) -> f64;
}

/// `c + bᵀy + ½ yᵀAy` with complex symmetric `A`.
#[derive(Debug, Clone)]
pub(crate) struct QuadForm {
    pub c: Complex64,
    pub b: DVector<Complex64>,
    pub a: DMatrix<Complex64>,
}

impl QuadForm {
    pub fn eval(&self, y: &[f64]) -> Complex64 {
        let y = DVector::from_iterator(y.len(), y.iter().map(|&v| Complex64::new(v, 0.0)));
        self.c + self.b.dot(&y) + (y.transpose() * &self.a * &y)[(0, 0)] * 0.5
    }

    /// Integrates out the last variable over the real line.
    fn eliminate_last(&self, label: impl Fn() -> String) -> Result<QuadForm> {
        let n = self.b.len();
        let j = n - 1;
        let a = -self.a[(j, j)];
        if !(a.re > 0.0) || !a.re.is_finite() {
            return Err(Error::Divergent { pivot: label() });
        }
        let bj = self.b[j];
        let c = self.c + 0.5 * (Complex64::new(2.0 * std::f64::consts::PI, 0.0) / a).ln() + bj * bj / (2.0 * a);
        let mut b = DVector::zeros(j);
        let mut m = DMatrix::zeros(j, j);
        for r in 0..j {
            b[r] = self.b[r] + bj * self.a[(j, r)] / a;
            for s in 0..j {
                m[(r, s)] = self.a[(r, s)] + self.a[(r, j)] * self.a[(j, s)] / a;
            }
        }
        Ok(QuadForm { c, b, a: m })
    }
}

/// Quadratic form of `f` over `dim` real variables by polarization at unit
/// points, checked against `f` at an off-axis probe.
fn extract_quadratic<F>(dim: usize, f: F) -> Result<QuadForm>
where
    F: Fn(&[f64]) -> Complex64,
{
    let mut x = vec![0.0; dim];
    let c = f(&x);
    let mut plus = vec![Complex64::new(0.0, 0.0); dim];
    let mut minus = vec![Complex64::new(0.0, 0.0); dim];
    for i in 0..dim {
        x[i] = 1.0;
        plus[i] = f(&x);
        x[i] = -1.0;
        minus[i] = f(&x);
        x[i] = 0.0;
    }
    let mut b = DVector::zeros(dim);
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        b[i] = 0.5 * (plus[i] - minus[i]);
        a[(i, i)] = plus[i] + minus[i] - 2.0 * c;
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            x[i] = 1.0;
            x[j] = 1.0;
            let v = f(&x);
            x[i] = 0.0;
            x[j] = 0.0;
            let h = v - c - b[i] - b[j] - 0.5 * (a[(i, i)] + a[(j, j)]);
            a[(i, j)] = h;
            a[(j, i)] = h;
        }
    }
    let form = QuadForm { c, b, a };
    let probe: Vec<f64> = (0..dim).map(|i| 0.37 - 0.29 * i as f64 + 0.11 * (i * i) as f64).collect();
    let want = f(&probe);
    let got = form.eval(&probe);
    if (want - got).norm() > 1e-9 * (1.0 + want.norm()) {
        return Err(Error::Unsupported(
            "slice exponent is not quadratic; the Gaussian chain needs a quadratic operator".into(),
        ));
    }
    Ok(form)
}

fn check_endpoints(dim: usize, start: &[f64], end: &[f64], slices: usize) -> Result<()> {
    if start.len() != dim || end.len() != dim {
        return Err(Error::Dimension {
            what: "chain endpoint",
            expected: dim,
            got: if start.len() != dim { start.len() } else { end.len() },
        });
    }
    if slices == 0 {
        return Err(Error::param("slices", "at least one interior slice is required"));
    }
    Ok(())
}

/// Exact log of the chain integral for a kernel whose exponent is quadratic,
/// eliminating one variable at a time.
pub fn gaussian_chain<K: SliceKernel>(kernel: &K, start: &[f64], end: &[f64], slices: usize) -> Result<Complex64> {
    let d = kernel.dim();
    check_endpoints(d, start, end, slices)?;
    let form = extract_quadratic(2 * d, |w| kernel.log_kernel(&w[..d], &w[d..]))?;
    let log_rho = Complex64::new(kernel.log_measure(), 0.0);
    let cv = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)));
    let kb_u = form.b.rows(0, d).into_owned();
    let kb_v = form.b.rows(d, d).into_owned();
    let ka_uu = form.a.view((0, 0), (d, d)).into_owned();
    let ka_uv = form.a.view((0, d), (d, d)).into_owned();
    let ka_vu = form.a.view((d, 0), (d, d)).into_owned();
    let ka_vv = form.a.view((d, d), (d, d)).into_owned();

    if d == 0 {
        return Ok(form.c * (slices as f64 + 1.0) + log_rho * slices as f64);
    }

    // First kernel with the initial slice pinned.
    let x0 = cv(start);
    let mut msg = QuadForm {
        c: form.c + kb_v.dot(&x0) + 0.5 * (x0.transpose() * &ka_vv * &x0)[(0, 0)],
        b: &kb_u + &ka_uv * &x0,
        a: ka_uu.clone(),
    };

    for n in 1..slices {
        let mut b = DVector::zeros(2 * d);
        b.rows_mut(0, d).copy_from(&kb_u);
        b.rows_mut(d, d).copy_from(&(&kb_v + &msg.b));
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        a.view_mut((0, 0), (d, d)).copy_from(&ka_uu);
        a.view_mut((0, d), (d, d)).copy_from(&ka_uv);
        a.view_mut((d, 0), (d, d)).copy_from(&ka_vu);
        a.view_mut((d, d), (d, d)).copy_from(&(&ka_vv + &msg.a));
        let mut joint = QuadForm {
            c: msg.c + form.c + log_rho,
            b,
            a,
        };
        for i in (0..d).rev() {
            joint = joint.eliminate_last(|| format!("slice {n}, coordinate {i}"))?;
        }
        msg = joint;
    }

    let xe = cv(end);
    let mut last = QuadForm {
        c: msg.c + form.c + log_rho + kb_u.dot(&xe) + 0.5 * (xe.transpose() * &ka_uu * &xe)[(0, 0)],
        b: &kb_v + &msg.b + &ka_vu * &xe,
        a: &ka_vv + &msg.a,
    };
    for i in (0..d).rev() {
        last = last.eliminate_last(|| format!("slice {slices}, coordinate {i}"))?;
    }
    Ok(last.c)
}

/// Transfer-vector quadrature of the chain on a tensor grid per slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainQuadrature {
    pub value: Complex64,
    /// Largest integrand magnitude on the outer faces of any slice grid
    /// times the weight of those faces.
    pub boundary: f64,
}

/// Evaluates the chain by iterated quadrature with `axes` (one per
/// coordinate) at every interior slice.
///
/// Each output node of the transfer step is computed independently and
/// summed in a fixed order, so the result is independent of thread count.
pub fn quadrature_chain<K: SliceKernel>(
    kernel: &K,
    start: &[f64],
    end: &[f64],
    slices: usize,
    axes: &[Axis],
) -> Result<ChainQuadrature> {
    let d = kernel.dim();
    check_endpoints(d, start, end, slices)?;
    if axes.len() != d {
        return Err(Error::Dimension {
            what: "quadrature axes",
            expected: d,
            got: axes.len(),
        });
    }
    let total_axes = d * slices;
    if total_axes > MAX_AXES {
        return Err(Error::Budget(format!(
            "{slices} slices x {d} coordinates = {total_axes} axes, at most {MAX_AXES} allowed"
        )));
    }
    if let Some(ax) = axes.iter().find(|a| a.len() > MAX_NODES_PER_AXIS) {
        return Err(Error::Budget(format!(
            "axis with {} nodes, at most {MAX_NODES_PER_AXIS} per axis allowed",
            ax.len()
        )));
    }
    let grid = Grid::new(axes.to_vec())?;
    let pts = grid.points();
    let rho = kernel.log_measure().exp();
    let weights: Vec<f64> = pts.iter().map(|p| p.weight * rho).collect();
    let boundary_weight: f64 = pts.iter().filter(|p| p.boundary).map(|p| p.weight * rho).sum();

    let mut v: Vec<Complex64> = pts.par_iter().map(|p| kernel.log_kernel(&p.x, start).exp()).collect();
    let face = |v: &[Complex64]| -> f64 {
        pts.iter()
            .zip(v)
            .filter(|(p, _)| p.boundary)
            .fold(0.0_f64, |m, (_, x)| m.max(x.norm()))
            * boundary_weight
    };
    let mut boundary = face(&v);

    for _ in 1..slices {
        v = pts
            .par_iter()
            .map(|out| {
                let terms: Vec<Complex64> = pts
                    .iter()
                    .zip(&v)
                    .zip(&weights)
                    .map(|((inp, &val), &w)| kernel.log_kernel(&out.x, &inp.x).exp() * val * w)
                    .collect();
                tree_sum(terms)
            })
            .collect();
        boundary = boundary.max(face(&v));
    }

    let last: Vec<Complex64> = pts.par_iter().zip(&v).map(|(p, &val)| kernel.log_kernel(end, &p.x).exp() * val).collect();
    boundary = boundary.max(face(&last));
    let value = tree_sum(last.iter().zip(&weights).map(|(&x, &w)| x * w).collect());
    Ok(ChainQuadrature { value, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Heat kernel in one coordinate: the chain reproduces the kernel at the
    /// total time.
    struct Heat {
        t: f64,
    }

    impl SliceKernel for Heat {
        fn dim(&self) -> usize {
            1
        }
        fn log_kernel(&self, next: &[f64], prev: &[f64]) -> Complex64 {
            let d = next[0] - prev[0];
            Complex64::new(-d * d / (2.0 * self.t) - 0.5 * (2.0 * std::f64::consts::PI * self.t).ln(), 0.0)
        }
        fn log_measure(&self) -> f64 {
            0.0
        }
    }

    fn heat(x: f64, t: f64) -> f64 {
        (-x * x / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
    }

    #[test]
    fn gaussian_chain_composes_heat_kernels() {
        let k = Heat { t: 0.1 };
        for n in [1, 3, 10] {
            let v = gaussian_chain(&k, &[0.2], &[-0.5], n).unwrap().exp();
            let want = heat(0.7, 0.1 * (n + 1) as f64);
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_chain_matches() {
        let k = Heat { t: 0.5 };
        let axis = Axis::with_count(-6.0, 6.0, 61).unwrap();
        let q = quadrature_chain(&k, &[0.2], &[-0.5], 3, &[axis]).unwrap();
        let want = heat(0.7, 2.0);
        assert!((q.value.re - want).abs() < 1e-8, "{} vs {want}", q.value);
    }

    #[test]
    fn budget_enforced() {
        let k = Heat { t: 0.5 };
        let axis = Axis::with_count(-6.0, 6.0, 61).unwrap();
        assert!(matches!(
            quadrature_chain(&k, &[0.0], &[0.0], 9, &[axis]),
            Err(Error::Budget(_))
        ));
        let fine = Axis::with_count(-6.0, 6.0, 62).unwrap();
        assert!(matches!(
            quadrature_chain(&k, &[0.0], &[0.0], 2, &[fine]),
            Err(Error::Budget(_))
        ));
    }

    struct Quartic;

    impl SliceKernel for Quartic {
        fn dim(&self) -> usize {
            1
        }
        fn log_kernel(&self, next: &[f64], prev: &[f64]) -> Complex64 {
            Complex64::new(-(next[0] - prev[0]).powi(4), 0.0)
        }
        fn log_measure(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn non_quadratic_refused() {
        assert!(matches!(
            gaussian_chain(&Quartic, &[0.0], &[0.0], 2),
            Err(Error::Unsupported(_))
        ));
    }

    struct Growing;

    impl SliceKernel for Growing {
        fn dim(&self) -> usize {
            1
        }
        fn log_kernel(&self, next: &[f64], _prev: &[f64]) -> Complex64 {
            Complex64::new(next[0] * next[0], 0.0)
        }
        fn log_measure(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn divergent_pivot_reported() {
        assert!(matches!(
            gaussian_chain(&Growing, &[0.0], &[0.0], 2),
            Err(Error::Divergent { .. })
        ));
    }
}
