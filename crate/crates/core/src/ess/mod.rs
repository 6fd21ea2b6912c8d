//! Pair-approximation dynamics and evolutionarily stable states.
//!
//! The macroscopic state is `(p_f, p_ff)`. On uniform-degree graphs under
//! imitation updating the drift of both coordinates is known to first order
//! in the selection intensity; on graphs with a degree distribution the same
//! holds for birth-death updating with the moment ratio `E[k^2]/E[k]` taking
//! the place of the degree. Stable states are the zeros of these drifts that
//! pass the Jacobian test `det J > 0, tr J < 0`.

mod dynamics;
mod inversion;
mod stability;
mod closed_form;

use serde::{Deserialize, Serialize};

use crate::error::EssError;
use crate::game::SelectionParams;
use crate::graph::DegreeStats;

pub use dynamics::{
    mean_fitness_bar, pf_dot_nonuniform, pf_dot_uniform, pff_dot_nonuniform, pff_dot_uniform,
    reduced_pf_dot, transition_probabilities_nonuniform, DynamicsCoefficients,
};
pub use inversion::{invert_payoff_relation, InversionMode, PayoffRelation};
pub use stability::{jacobian_stability, Stability, StabilityReport, FD_STEP};
pub use closed_form::{
    ess_approx_large_k, ess_ba, ess_er, ess_nonuniform, ess_uniform, interior_candidate, EssResult,
    FixedPoint, LogBase,
};

/// First two moments of a degree distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeMoments {
    pub mean_degree: f64,
    pub second_moment: f64,
}

impl DegreeMoments {
    pub fn new(mean_degree: f64, second_moment: f64) -> Result<Self, EssError> {
        if !(mean_degree > 0.0) || !second_moment.is_finite() || second_moment < mean_degree * mean_degree * (1.0 - 1e-12) {
            return Err(EssError::InvalidDegree(format!(
                "mean degree {mean_degree} with second moment {second_moment}"
            )));
        }
        Ok(DegreeMoments { mean_degree, second_moment })
    }

    /// Erdős–Rényi moments, `E[k^2] = k(k+1)`.
    pub fn erdos_renyi(mean_degree: f64) -> Result<Self, EssError> {
        Self::new(mean_degree, mean_degree * (mean_degree + 1.0))
    }

    /// Mean degree of a node reached through a random edge.
    pub fn kappa(&self) -> f64 {
        self.second_moment / self.mean_degree
    }
}

impl From<&DegreeStats> for DegreeMoments {
    fn from(s: &DegreeStats) -> Self {
        DegreeMoments { mean_degree: s.mean_degree, second_moment: s.second_moment }
    }
}

/// What the analysis knows about the graph: a uniform degree (imitation
/// dynamics) or the first two degree moments (birth-death dynamics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeProfile {
    Uniform { k: usize },
    Moments(DegreeMoments),
}

impl DegreeProfile {
    /// Effective degree entering the pair closure.
    pub fn kappa(&self) -> f64 {
        match self {
            DegreeProfile::Uniform { k } => *k as f64,
            DegreeProfile::Moments(m) => m.kappa(),
        }
    }
}

/// Selection intensity and population size used when the dynamics have to
/// be evaluated numerically (stability labels). Neither changes the sign
/// structure of the Jacobian as long as `alpha * k^2` stays well below 1;
/// beyond that the first-order drifts no longer describe the pair
/// correlations near the absorbing states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityProbe {
    pub sel: SelectionParams,
    pub population: usize,
}

impl StabilityProbe {
    pub fn new(alpha: f64, population: usize) -> Result<Self, EssError> {
        if population == 0 {
            return Err(EssError::InvalidDegree("population must be positive".into()));
        }
        Ok(StabilityProbe { sel: SelectionParams::new(alpha)?, population })
    }

    /// Probe weak enough for effective degree `kappa`: `alpha` is capped
    /// at `0.01 / kappa^2`.
    pub fn weak(kappa: f64, population: usize) -> Result<Self, EssError> {
        let alpha = if kappa > 0.0 { (0.01 / (kappa * kappa)).min(1e-4) } else { 1e-4 };
        Self::new(alpha, population)
    }
}

impl Default for StabilityProbe {
    fn default() -> Self {
        StabilityProbe { sel: SelectionParams::new(1e-4).unwrap(), population: 1000 }
    }
}
