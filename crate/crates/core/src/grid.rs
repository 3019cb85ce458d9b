//! Tensor-product trapezoid grids.
//!
//! Every quadrature in the crate (verification residuals, the lattice
//! quadrature evaluator, brute-force oracles) runs on these grids so the
//! node layout and summation order are shared and deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of tensor axes any single quadrature may use.
pub const MAX_AXES: usize = 8;

/// One uniform axis `lo..=hi` with trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::NonFinite("grid axis"));
        }
        if hi < lo {
            return Err(Error::param("axis", format!("hi {hi} < lo {lo}")));
        }
        if step <= 0.0 {
            return Err(Error::param("axis", "step must be positive"));
        }
        Ok(Axis { lo, hi, step })
    }

    /// Symmetric axis `[-extent, extent]`.
    pub fn symmetric(extent: f64, step: f64) -> Result<Self> {
        Axis::new(-extent, extent, step)
    }

    /// Axis with exactly `count` nodes spanning `lo..=hi`.
    pub fn with_count(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("axis", "node count must be positive"));
        }
        if count == 1 {
            return Axis::new(lo, lo, (hi - lo).max(1.0));
        }
        Axis::new(lo, hi, (hi - lo) / (count - 1) as f64)
    }

    pub fn len(&self) -> usize {
        if self.hi == self.lo {
            1
        } else {
            ((self.hi - self.lo) / self.step).round() as usize + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Actual spacing between nodes (the requested step, snapped so the
    /// last node lands on `hi`).
    pub fn spacing(&self) -> f64 {
        let n = self.len();
        if n == 1 {
            self.step
        } else {
            (self.hi - self.lo) / (n - 1) as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.len();
        let h = self.spacing();
        (0..n).map(|i| self.lo + i as f64 * h).collect()
    }

    /// Trapezoid weights. A single-node axis is a one-point rectangle rule
    /// with width `step`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let h = self.spacing();
        if n == 1 {
            return vec![h];
        }
        let mut w = vec![h; n];
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        w
    }
}

/// Tensor product of axes. Nodes are enumerated in row-major order with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.len() > MAX_AXES {
            return Err(Error::Budget(format!(
                "{} axes requested, at most {MAX_AXES} allowed",
                axes.len()
            )));
        }
        Ok(Grid { axes })
    }

    /// `dims` copies of the same axis.
    pub fn cube(axis: Axis, dims: usize) -> Result<Self> {
        Grid::new(vec![axis; dims])
    }

    /// Default verification grid: `[-8, 8]` with step 0.05 on every axis.
    pub fn standard(dims: usize) -> Result<Self> {
        Grid::cube(Axis::symmetric(8.0, 0.05)?, dims)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// All nodes with their tensor weights and a flag marking nodes on the
    /// outer boundary of the box.
    pub fn points(&self) -> Vec<GridPoint> {
        let nodes: Vec<Vec<f64>> = self.axes.iter().map(Axis::nodes).collect();
        let weights: Vec<Vec<f64>> = self.axes.iter().map(Axis::weights).collect();
        let total = self.node_count();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dims()];
        for _ in 0..total {
            let mut x = Vec::with_capacity(self.dims());
            let mut w = 1.0;
            let mut boundary = false;
            for (k, &i) in idx.iter().enumerate() {
                x.push(nodes[k][i]);
                w *= weights[k][i];
                let n = nodes[k].len();
                if n > 1 && (i == 0 || i == n - 1) {
                    boundary = true;
                }
            }
            out.push(GridPoint {
                x,
                weight: w,
                boundary,
            });
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < nodes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub x: Vec<f64>,
    pub weight: f64,
    pub boundary: bool,
}
