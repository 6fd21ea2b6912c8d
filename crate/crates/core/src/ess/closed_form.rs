use serde::{Deserialize, Serialize};

use super::dynamics::closure_for;
use super::stability::{jacobian_stability, Stability};
use super::{DegreeMoments, DegreeProfile, StabilityProbe};
use crate::error::EssError;
use crate::game::{PayoffMatrix, Regime};

const DENOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub p_f: f64,
    pub p_ff: f64,
    pub stability: Stability,
}

/// Fixed points of the pair dynamics and the stable state selected by the
/// payoff ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssResult {
    pub regime: Regime,
    /// Effective degree of the closure (`k`, or `E[k^2]/E[k]`).
    pub effective_degree: f64,
    /// Interior root of the reduced drift, whether or not it lies in (0, 1).
    pub interior_candidate: Option<f64>,
    /// Always contains 0 and 1; the interior root only when inside (0, 1).
    pub fixed_points: Vec<FixedPoint>,
    pub selected_ess: Option<f64>,
}

impl EssResult {
    pub fn stability_of(&self, p_f: f64) -> Option<Stability> {
        self.fixed_points.iter().find(|fp| fp.p_f == p_f).map(|fp| fp.stability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// Interior root for effective degree `kappa`:
/// `[(kappa-2)(u_fn-u_nn) + (u_ff-u_nn)] / [(kappa-2)(2u_fn-u_ff-u_nn)]`.
///
/// Takes raw entries so that normalisations outside the open unit interval
/// (such as `u_fn = 1`) can be evaluated. Returns `None` when the
/// denominator vanishes.
pub fn interior_candidate(u_ff: f64, u_fn: f64, u_nn: f64, kappa: f64) -> Option<f64> {
    let den = (kappa - 2.0) * (2.0 * u_fn - u_ff - u_nn);
    if den.abs() < DENOM_TOL {
        return None;
    }
    Some(((kappa - 2.0) * (u_fn - u_nn) + (u_ff - u_nn)) / den)
}

fn strictly_all_forward(u: &PayoffMatrix) -> bool {
    u.u_ff() > u.u_fn() && u.u_fn() > u.u_nn()
}

fn strictly_none_forward(u: &PayoffMatrix) -> bool {
    u.u_nn() > u.u_fn() && u.u_fn() > u.u_ff()
}

fn analyse(
    u: &PayoffMatrix,
    profile: DegreeProfile,
    interior: Option<f64>,
    probe: &StabilityProbe,
) -> Result<EssResult, EssError> {
    let mut candidates = vec![0.0, 1.0];
    if let Some(p) = interior.filter(|p| *p > 0.0 && *p < 1.0) {
        candidates.insert(1, p);
    }
    let mut fixed_points = Vec::with_capacity(candidates.len());
    for p_f in candidates {
        let state = closure_for(&profile, p_f)?;
        let stability = jacobian_stability(&profile, probe, u, (p_f, state.p_ff()))?.label;
        fixed_points.push(FixedPoint { p_f, p_ff: state.p_ff(), stability });
    }

    let selected_ess = if strictly_all_forward(u) {
        Some(1.0)
    } else if strictly_none_forward(u) {
        Some(0.0)
    } else {
        let p = interior.ok_or_else(|| {
            EssError::Degenerate("interior fixed point has a vanishing denominator (2u_fn = u_ff + u_nn)".into())
        })?;
        if p > 0.0 && p < 1.0 {
            Some(p)
        } else {
            // interior root rejected; fall back to the unique stable boundary
            let stable: Vec<f64> = fixed_points
                .iter()
                .filter(|fp| fp.stability == Stability::Stable)
                .map(|fp| fp.p_f)
                .collect();
            (stable.len() == 1).then(|| stable[0])
        }
    };

    Ok(EssResult {
        regime: u.classify_regime(),
        effective_degree: profile.kappa(),
        interior_candidate: interior,
        fixed_points,
        selected_ess,
    })
}

/// Stable states on a `k`-regular graph under imitation updating.
pub fn ess_uniform(u: &PayoffMatrix, k: usize, probe: &StabilityProbe) -> Result<EssResult, EssError> {
    if k < 3 {
        return Err(EssError::InvalidDegree(format!("uniform degree {k} must be at least 3")));
    }
    let kf = k as f64;
    // b / a of the reduced drift
    let den = (kf - 2.0) * (2.0 * u.u_fn() - u.u_ff() - u.u_nn());
    let interior = (den.abs() >= DENOM_TOL)
        .then(|| ((kf - 2.0) * u.u_fn() + u.u_ff() - (kf - 1.0) * u.u_nn()) / den);
    analyse(u, DegreeProfile::Uniform { k }, interior, probe)
}

/// Large-degree limit of the interior stable state,
/// `1 / (1 + (u_fn - u_ff)/(u_fn - u_nn))`.
pub fn ess_approx_large_k(u: &PayoffMatrix) -> Result<f64, EssError> {
    let (ff, fnn, nn) = (u.u_ff(), u.u_fn(), u.u_nn());
    if fnn == nn {
        return Err(EssError::Degenerate("u_fn = u_nn".into()));
    }
    let denom = 1.0 + (fnn - ff) / (fnn - nn);
    if denom == 0.0 {
        return Err(EssError::Degenerate("2u_fn = u_ff + u_nn".into()));
    }
    Ok(1.0 / denom)
}

/// Stable states under birth-death updating on a graph with the given
/// degree moments.
pub fn ess_nonuniform(u: &PayoffMatrix, moments: &DegreeMoments, probe: &StabilityProbe) -> Result<EssResult, EssError> {
    let kappa = moments.kappa();
    if !(kappa > 2.0) {
        return Err(EssError::InvalidDegree(format!("moment ratio {kappa} must exceed 2")));
    }
    let interior = interior_candidate(u.u_ff(), u.u_fn(), u.u_nn(), kappa);
    analyse(u, DegreeProfile::Moments(*moments), interior, probe)
}

/// Erdős–Rényi specialisation (`E[k^2] = k(k+1)`).
pub fn ess_er(u: &PayoffMatrix, mean_degree: f64, probe: &StabilityProbe) -> Result<EssResult, EssError> {
    if !(mean_degree > 1.0) {
        return Err(EssError::InvalidDegree(format!("mean degree {mean_degree} must exceed 1")));
    }
    let km1 = mean_degree - 1.0;
    let den = km1 * (2.0 * u.u_fn() - u.u_ff() - u.u_nn());
    let interior = (den.abs() >= DENOM_TOL)
        .then(|| (km1 * (u.u_fn() - u.u_nn()) + (u.u_ff() - u.u_nn())) / den);
    analyse(u, DegreeProfile::Moments(DegreeMoments::erdos_renyi(mean_degree)?), interior, probe)
}

/// Barabási–Albert specialisation (`E[k^2] ~ k^2 log N / 4`).
pub fn ess_ba(
    u: &PayoffMatrix,
    mean_degree: f64,
    n: usize,
    base: LogBase,
    probe: &StabilityProbe,
) -> Result<EssResult, EssError> {
    let spread = mean_degree * base.log(n as f64);
    if !(spread > 8.0) {
        return Err(EssError::Degenerate(format!(
            "mean degree * log N = {spread} must exceed 8"
        )));
    }
    let lead = spread - 8.0;
    let den = lead * (2.0 * u.u_fn() - u.u_ff() - u.u_nn());
    let interior = (den.abs() >= DENOM_TOL)
        .then(|| (lead * (u.u_fn() - u.u_nn()) + 4.0 * (u.u_ff() - u.u_nn())) / den);
    // the asymptotic moment can fall below k^2 for small N; only the ratio is used
    let moments = DegreeMoments { mean_degree, second_moment: mean_degree * spread / 4.0 };
    analyse(u, DegreeProfile::Moments(moments), interior, probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pm(i: u8) -> PayoffMatrix {
        PayoffMatrix::preset(i).unwrap()
    }

    fn probe() -> StabilityProbe {
        StabilityProbe::default()
    }

    #[test]
    fn uniform_examples() {
        for k in [3, 10, 20, 50] {
            assert_eq!(ess_uniform(&pm(1), k, &probe()).unwrap().selected_ess, Some(1.0));
            assert_eq!(ess_uniform(&pm(4), k, &probe()).unwrap().selected_ess, Some(0.0));
        }
        let r = ess_uniform(&pm(2), 10, &probe()).unwrap();
        assert_abs_diff_eq!(r.selected_ess.unwrap(), 3.4 / 4.8, epsilon = 1e-12);
        assert_eq!(r.fixed_points.len(), 3);
        let r = ess_uniform(&pm(3), 20, &probe()).unwrap();
        assert_abs_diff_eq!(r.selected_ess.unwrap(), 3.4 / 10.8, epsilon = 1e-12);
        assert_abs_diff_eq!(ess_uniform(&pm(2), 50, &probe()).unwrap().selected_ess.unwrap(), 19.4 / 28.8, epsilon = 1e-12);
    }

    #[test]
    fn uniform_degenerate_interior_is_an_error() {
        // 2u_fn = u_ff + u_nn without a strict extreme ordering
        let u = PayoffMatrix::new(0.6, 0.5, 0.4).unwrap();
        assert_eq!(ess_uniform(&u, 10, &probe()).unwrap().selected_ess, Some(1.0));
        let tie = PayoffMatrix::new(0.5, 0.5, 0.5).unwrap();
        assert!(matches!(ess_uniform(&tie, 10, &probe()), Err(EssError::Degenerate(_))));
        assert!(ess_uniform(&pm(2), 2, &probe()).is_err());
    }

    #[test]
    fn large_k_examples() {
        let sym = PayoffMatrix::new(0.3, 0.7, 0.3).unwrap();
        assert_abs_diff_eq!(ess_approx_large_k(&sym).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ess_approx_large_k(&pm(2)).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ess_approx_large_k(&pm(3)).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let bad = PayoffMatrix::new(0.3, 0.5, 0.5).unwrap();
        assert!(ess_approx_large_k(&bad).is_err());
    }

    #[test]
    fn nonuniform_examples() {
        let er10 = DegreeMoments::erdos_renyi(10.0).unwrap();
        assert_abs_diff_eq!(ess_nonuniform(&pm(2), &er10, &probe()).unwrap().selected_ess.unwrap(), 3.8 / 5.4, epsilon = 1e-12);
        let reg20 = DegreeMoments::new(20.0, 400.0).unwrap();
        assert_abs_diff_eq!(ess_nonuniform(&pm(3), &reg20, &probe()).unwrap().selected_ess.unwrap(), 3.4 / 10.8, epsilon = 1e-12);
        assert_eq!(ess_nonuniform(&pm(1), &er10, &probe()).unwrap().selected_ess, Some(1.0));
        assert_eq!(ess_nonuniform(&pm(4), &er10, &probe()).unwrap().selected_ess, Some(0.0));
        let flat = DegreeMoments::new(2.0, 4.0).unwrap();
        assert!(ess_nonuniform(&pm(2), &flat, &probe()).is_err());
    }

    #[test]
    fn er_examples() {
        assert_abs_diff_eq!(ess_er(&pm(2), 20.0, &probe()).unwrap().selected_ess.unwrap(), 7.8 / 11.4, epsilon = 1e-12);
        assert_abs_diff_eq!(ess_er(&pm(3), 20.0, &probe()).unwrap().selected_ess.unwrap(), 3.6 / 11.4, epsilon = 1e-12);
        assert_eq!(ess_er(&pm(1), 20.0, &probe()).unwrap().selected_ess, Some(1.0));
        assert!(ess_er(&pm(2), 1.0, &probe()).is_err());
    }

    #[test]
    fn ba_examples() {
        let spread = 20.0 * 1000f64.ln() - 8.0;
        let expected = (spread * 0.4 + 0.8) / (spread * 0.6);
        let r = ess_ba(&pm(2), 20.0, 1000, LogBase::Natural, &probe()).unwrap();
        assert_abs_diff_eq!(r.selected_ess.unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.67692, epsilon = 1e-5);
        let r = ess_ba(&pm(3), 10.0, 1000, LogBase::Natural, &probe()).unwrap();
        assert_abs_diff_eq!(r.selected_ess.unwrap(), 0.31150, epsilon = 1e-5);
        assert_eq!(ess_ba(&pm(1), 20.0, 1000, LogBase::Natural, &probe()).unwrap().selected_ess, Some(1.0));
        assert!(ess_ba(&pm(2), 1.0, 100, LogBase::Natural, &probe()).is_err());
        // base-10 logs shrink the spread term
        let r10 = ess_ba(&pm(2), 20.0, 1000, LogBase::Ten, &probe()).unwrap();
        let s10 = 20.0 * 3.0 - 8.0;
        assert_abs_diff_eq!(r10.selected_ess.unwrap(), (s10 * 0.4 + 0.8) / (s10 * 0.6), epsilon = 1e-12);
    }

    #[test]
    fn anti_coordination_interior_is_stable() {
        for i in [2, 3] {
            let r = ess_uniform(&pm(i), 10, &probe()).unwrap();
            let p = r.selected_ess.unwrap();
            assert_eq!(r.stability_of(p), Some(Stability::Stable));
            assert_ne!(r.stability_of(0.0), Some(Stability::Stable));
            assert_ne!(r.stability_of(1.0), Some(Stability::Stable));
        }
    }

    #[test]
    fn coordination_interior_is_not_stable() {
        let u = PayoffMatrix::new(0.8, 0.3, 0.6).unwrap();
        let r = ess_uniform(&u, 20, &probe()).unwrap();
        let p = r.interior_candidate.unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(r.stability_of(p), Some(Stability::Saddle));
        assert_eq!(r.stability_of(0.0), Some(Stability::Stable));
        assert_eq!(r.stability_of(1.0), Some(Stability::Stable));
    }
}
