//! Canonical coherent states on a split phase space.
//!
//! Modes `0..n_constrained` carry the Abelianized constraint pairs
//! `(p_i, q^i)`; the remaining modes carry the reduced pairs `z`. Each mode
//! uses the state `e^{-iqP/ħ} e^{ipQ/ħ} |η⟩` with `η` the Gaussian ground
//! state of `A = Q/s + i s P` (width `s`, default 1), whose wavefunction is
//!
//! ```text
//! ψ_{p,q}(x) = e^{i p (x - q)/ħ} (π ħ s²)^{-1/4} exp(-(x - q)² / (2 ħ s²))
//! ```
//!
//! With `α = q/s + i s p` the overlap of two labels is
//!
//! ```text
//! ⟨a|b⟩ = exp{ i (p_a q_a - p_b q_b)/(2ħ) + (ᾱ_a α_b - |α_a|²/2 - |α_b|²/2)/(2ħ) }
//! ```
//!
//! mode by mode. The first factor is the phase left over from writing the
//! state as a displaced vacuum times `e^{-ipq/2ħ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::oracle;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Mode bookkeeping shared by every operator and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpace {
    n_constrained: usize,
    n_reduced: usize,
    hbar: f64,
    fiducial: FiducialSpec,
}

/// Fiducial vector: the centred Gaussian ground state, one width per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiducialSpec {
    pub widths: Vec<f64>,
}

impl FiducialSpec {
    pub fn unit(modes: usize) -> Self {
        FiducialSpec {
            widths: vec![1.0; modes],
        }
    }

    /// Always true: the Gaussian ground state has vanishing first moments.
    pub fn centered(&self) -> bool {
        true
    }
}

impl ModeSpace {
    pub fn new(n_constrained: usize, n_reduced: usize, hbar: f64) -> Result<Self> {
        if n_reduced == 0 {
            return Err(Error::param("n_reduced", "at least one reduced mode is required"));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::param("hbar", format!("must be positive and finite, got {hbar}")));
        }
        Ok(ModeSpace {
            n_constrained,
            n_reduced,
            hbar,
            fiducial: FiducialSpec::unit(n_constrained + n_reduced),
        })
    }

    /// One unconstrained mode.
    pub fn single(hbar: f64) -> Result<Self> {
        ModeSpace::new(0, 1, hbar)
    }

    pub fn with_widths(mut self, widths: Vec<f64>) -> Result<Self> {
        if widths.len() != self.modes() {
            return Err(Error::Dimension {
                what: "fiducial widths",
                expected: self.modes(),
                got: widths.len(),
            });
        }
        if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param("widths", "every width must be positive"));
        }
        self.fiducial = FiducialSpec { widths };
        Ok(self)
    }

    pub fn n_constrained(&self) -> usize {
        self.n_constrained
    }

    pub fn n_reduced(&self) -> usize {
        self.n_reduced
    }

    /// Total number of modes `M`.
    pub fn modes(&self) -> usize {
        self.n_constrained + self.n_reduced
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn width(&self, mode: usize) -> f64 {
        self.fiducial.widths[mode]
    }

    pub fn fiducial(&self) -> &FiducialSpec {
        &self.fiducial
    }

    pub fn is_constrained(&self, mode: usize) -> bool {
        mode < self.n_constrained
    }

    pub fn constrained_modes(&self) -> std::ops::Range<usize> {
        0..self.n_constrained
    }

    pub fn reduced_modes(&self) -> std::ops::Range<usize> {
        self.n_constrained..self.modes()
    }

    /// Same ħ and widths restricted to the reduced modes, as a space with no
    /// constraints.
    pub fn reduced_space(&self) -> ModeSpace {
        ModeSpace {
            n_constrained: 0,
            n_reduced: self.n_reduced,
            hbar: self.hbar,
            fiducial: FiducialSpec {
                widths: self.fiducial.widths[self.n_constrained..].to_vec(),
            },
        }
    }

    /// Copy of this space at a different ħ.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        let mut s = ModeSpace::new(self.n_constrained, self.n_reduced, hbar)?;
        s.fiducial = self.fiducial.clone();
        Ok(s)
    }
}

/// A single canonical pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub q: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        PhasePoint { p, q }
    }
}

/// Phase-space point `(p, q, z)` labelling a coherent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    n_constrained: usize,
    points: Vec<PhasePoint>,
}

impl Label {
    /// `p`, `q` for the constrained pairs and `(p_z, q_z)` for the reduced
    /// pairs.
    pub fn new(p: Vec<f64>, q: Vec<f64>, z: Vec<(f64, f64)>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::Dimension {
                what: "constrained q",
                expected: p.len(),
                got: q.len(),
            });
        }
        let points: Vec<PhasePoint> = p
            .iter()
            .zip(&q)
            .map(|(&p, &q)| PhasePoint { p, q })
            .chain(z.iter().map(|&(p, q)| PhasePoint { p, q }))
            .collect();
        Label::from_points(p.len(), points)
    }

    pub fn from_points(n_constrained: usize, points: Vec<PhasePoint>) -> Result<Self> {
        if n_constrained > points.len() {
            return Err(Error::Dimension {
                what: "label points",
                expected: n_constrained,
                got: points.len(),
            });
        }
        if points.iter().any(|pt| !(pt.p.is_finite() && pt.q.is_finite())) {
            return Err(Error::NonFinite("label"));
        }
        Ok(Label {
            n_constrained,
            points,
        })
    }

    /// Single-mode label.
    pub fn point(p: f64, q: f64) -> Result<Self> {
        Label::from_points(0, vec![PhasePoint { p, q }])
    }

    pub fn origin(space: &ModeSpace) -> Self {
        Label {
            n_constrained: space.n_constrained(),
            points: vec![PhasePoint::ORIGIN; space.modes()],
        }
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn mode(&self, k: usize) -> PhasePoint {
        self.points[k]
    }

    pub fn set_mode(&mut self, k: usize, pt: PhasePoint) {
        self.points[k] = pt;
    }

    pub fn modes(&self) -> usize {
        self.points.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.n_constrained
    }

    pub fn p(&self) -> Vec<f64> {
        self.points[..self.n_constrained].iter().map(|x| x.p).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.points[..self.n_constrained].iter().map(|x| x.q).collect()
    }

    pub fn z(&self) -> Vec<(f64, f64)> {
        self.points[self.n_constrained..]
            .iter()
            .map(|x| (x.p, x.q))
            .collect()
    }

    /// The reduced part as a label of the reduced space.
    pub fn reduced(&self) -> Label {
        Label {
            n_constrained: 0,
            points: self.points[self.n_constrained..].to_vec(),
        }
    }

    /// Checks the label against a mode space.
    pub fn check(&self, space: &ModeSpace) -> Result<()> {
        if self.points.len() != space.modes() {
            return Err(Error::Dimension {
                what: "label modes",
                expected: space.modes(),
                got: self.points.len(),
            });
        }
        if self.n_constrained != space.n_constrained() {
            return Err(Error::Dimension {
                what: "label constrained modes",
                expected: space.n_constrained(),
                got: self.n_constrained,
            });
        }
        Ok(())
    }
}

/// Eigenvalue of `A = Q/s + i s P` on the coherent state of mode `k`.
#[inline]
pub fn ladder_value(space: &ModeSpace, k: usize, pt: PhasePoint) -> Complex64 {
    let s = space.width(k);
    Complex64::new(pt.q / s, s * pt.p)
}

/// Logarithm of the single-mode overlap `⟨a|b⟩` (exact closed form; no
/// branch cut is involved).
#[inline]
pub fn log_overlap_mode(space: &ModeSpace, k: usize, a: PhasePoint, b: PhasePoint) -> Complex64 {
    let hbar = space.hbar();
    let alpha = ladder_value(space, k, a);
    let beta = ladder_value(space, k, b);
    let phase = I * ((a.p * a.q - b.p * b.q) / (2.0 * hbar));
    let gauss = (alpha.conj() * beta - 0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr()) / (2.0 * hbar);
    phase + gauss
}

/// `ln ⟨a|b⟩` summed over the given modes.
pub fn log_overlap_modes(
    space: &ModeSpace,
    modes: impl IntoIterator<Item = usize>,
    a: &Label,
    b: &Label,
) -> Complex64 {
    modes
        .into_iter()
        .map(|k| log_overlap_mode(space, k, a.mode(k), b.mode(k)))
        .sum()
}

/// `ln ⟨a|b⟩` over all modes. Labels are assumed already checked.
pub fn log_overlap(space: &ModeSpace, a: &Label, b: &Label) -> Complex64 {
    log_overlap_modes(space, 0..space.modes(), a, b)
}

/// Reproducing kernel `⟨a|b⟩`.
pub fn overlap(space: &ModeSpace, a: &Label, b: &Label) -> Result<Complex64> {
    a.check(space)?;
    b.check(space)?;
    Ok(log_overlap(space, a, b).exp())
}

/// Overlap split as `(constrained factor, reduced factor)`; the full overlap
/// is their product.
pub fn overlap_factors(space: &ModeSpace, a: &Label, b: &Label) -> Result<(Complex64, Complex64)> {
    a.check(space)?;
    b.check(space)?;
    let c = log_overlap_modes(space, space.constrained_modes(), a, b).exp();
    let z = log_overlap_modes(space, space.reduced_modes(), a, b).exp();
    Ok((c, z))
}

/// Single-mode wavefunction `⟨x|p,q⟩`.
pub fn mode_wavefunction(space: &ModeSpace, k: usize, pt: PhasePoint, x: f64) -> Complex64 {
    let hbar = space.hbar();
    let s = space.width(k);
    let d = x - pt.q;
    let norm = (std::f64::consts::PI * hbar * s * s).powf(-0.25);
    let arg = Complex64::new(-d * d / (2.0 * hbar * s * s), pt.p * d / hbar);
    norm * arg.exp()
}

/// Position-representation wavefunction of the coherent state `label`.
pub fn coherent_wavefunction(space: &ModeSpace, label: &Label, x: &[f64]) -> Result<Complex64> {
    label.check(space)?;
    if x.len() != space.modes() {
        return Err(Error::Dimension {
            what: "position argument",
            expected: space.modes(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("position argument"));
    }
    Ok((0..space.modes())
        .map(|k| mode_wavefunction(space, k, label.mode(k), x[k]))
        .product())
}

/// Resolution-of-unity measure `∏ dp dq / (2πħ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: ModeSpace,
}

impl Measure {
    pub fn new(space: &ModeSpace) -> Self {
        Measure {
            space: space.clone(),
        }
    }

    /// Density per unit `dp dq` for `modes` modes.
    pub fn density_for(&self, modes: usize) -> f64 {
        (2.0 * std::f64::consts::PI * self.space.hbar()).powi(-(modes as i32))
    }

    pub fn density(&self) -> f64 {
        self.density_for(self.space.modes())
    }
}

/// Outcome of a reproducing-property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionReport {
    /// `max |K(a;b) - ∫ K(a;x) K(x;b) dμ(x)|` over the test pairs.
    pub residual: f64,
    /// Largest boundary diagnostic over the pairs.
    pub boundary: f64,
    /// Set when the boundary contribution exceeds `tolerance`.
    pub boundary_warning: bool,
}

/// Checks the reproducing property of the kernel by quadrature over the
/// full `2M`-dimensional label space, one copy of `axis` per coordinate.
pub fn resolution_residual(
    space: &ModeSpace,
    axis: Axis,
    pairs: &[(Label, Label)],
    tolerance: f64,
) -> Result<ResolutionReport> {
    let m = space.modes();
    let grid = Grid::cube(axis, 2 * m)?;
    let density = Measure::new(space).density();
    let mut residual = 0.0_f64;
    let mut boundary = 0.0_f64;
    for (a, b) in pairs {
        a.check(space)?;
        b.check(space)?;
        let direct = log_overlap(space, a, b).exp();
        let q = oracle::brute_quadrature(
            |x: &[f64]| {
                let pts = (0..m).map(|k| PhasePoint::new(x[2 * k], x[2 * k + 1])).collect();
                let mid = Label {
                    n_constrained: space.n_constrained(),
                    points: pts,
                };
                (log_overlap(space, a, &mid) + log_overlap(space, &mid, b)).exp() * density
            },
            &grid,
        )?;
        residual = residual.max((direct - q.value).norm());
        boundary = boundary.max(q.boundary);
    }
    Ok(ResolutionReport {
        residual,
        boundary,
        boundary_warning: boundary > tolerance,
    })
}

/// Which canonical operator a moment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    P,
    Q,
}

/// `⟨η|Ô^n|η⟩` for the fiducial of `mode`. Odd moments vanish exactly.
pub fn fiducial_moment(space: &ModeSpace, mode: usize, n: u32, which: Quadrature) -> f64 {
    let s = space.width(mode);
    let variance = match which {
        Quadrature::Q => 0.5 * space.hbar() * s * s,
        Quadrature::P => 0.5 * space.hbar() / (s * s),
    };
    oracle::gaussian_moment(n, variance)
}
