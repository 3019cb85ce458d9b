//! Experiment configuration files.
//!
//! A config is TOML. Every section is optional except `[system]`; missing
//! fields take the defaults listed on each struct, and the resolved values
//! are echoed into the result document.

use serde::{Deserialize, Serialize};

use crate::lattice::SymbolRoute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub endpoints: EndpointsConfig,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub wiener: WienerSection,
    #[serde(default)]
    pub equivalence: EquivalenceSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub symbols: SymbolsSection,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    /// Number of constrained modes; they are modes `0..constrained`.
    #[serde(default)]
    pub constrained: usize,
    #[serde(default = "one_usize")]
    pub reduced: usize,
    /// Fiducial width per mode; all 1 when absent.
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
    /// Operator terms, summed.
    #[serde(default)]
    pub operator: Vec<String>,
    /// Reduced Hamiltonian on the reduced modes, written with their global
    /// mode numbers. When absent, the terms of `operator` that mention no
    /// constrained mode.
    #[serde(default)]
    pub reduced_operator: Option<Vec<String>>,
}

/// Labels as `[p, q]` per mode; the origin when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsConfig {
    #[serde(default, rename = "final")]
    pub final_label: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub initial: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub slices: usize,
    pub total_time: f64,
    pub route: SymbolRoute,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            slices: 16,
            total_time: 0.2,
            route: SymbolRoute::Upper,
        }
    }
}

/// Slice counts for `convergence`; time and route come from `[lattice]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub slices: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            slices: vec![2, 4, 8, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerSection {
    /// Diffusion constants, one estimate each.
    pub nu: Vec<f64>,
    pub slices: usize,
    pub samples: usize,
    /// Metric weight per label coordinate `(p_0, q_0, p_1, ...)`; all 1 when
    /// absent.
    pub metric: Option<Vec<f64>>,
    pub seed: u64,
    /// Number of bridge paths written to `bridges.csv` (largest `ν`).
    pub dump_paths: usize,
}

impl Default for WienerSection {
    fn default() -> Self {
        WienerSection {
            nu: vec![5.0, 20.0, 80.0],
            slices: 32,
            samples: 100_000,
            metric: None,
            seed: 0,
            dump_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSection {
    pub slices: usize,
    pub route: SymbolRoute,
    pub nu_ladder: Vec<f64>,
    pub lambda_common: f64,
    pub box_length: f64,
    pub box_modes: usize,
}

impl Default for EquivalenceSection {
    fn default() -> Self {
        EquivalenceSection {
            slices: 512,
            route: SymbolRoute::Lower,
            nu_ladder: vec![5.0, 20.0, 80.0],
            lambda_common: 0.0,
            box_length: 10.0,
            box_modes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n_trunc: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { n_trunc: 60 }
    }
}

/// Grid for smoothing the lower symbol back into the upper one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolsSection {
    pub step: f64,
    /// Half-width of the smoothing axis; chosen from the labels when absent.
    pub extent: Option<f64>,
}

impl Default for SymbolsSection {
    fn default() -> Self {
        SymbolsSection { step: 0.02, extent: None }
    }
}
