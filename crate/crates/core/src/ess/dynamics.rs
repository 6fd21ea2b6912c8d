use serde::{Deserialize, Serialize};

use super::{DegreeMoments, DegreeProfile, StabilityProbe};
use crate::error::{EssError, GameError};
use crate::game::{pair_closure, NetworkState, PayoffMatrix, SelectionParams};

/// Coefficients of the uniform-degree imitation dynamics.
///
/// `gamma1..gamma3` weight `u_nn, u_fn, u_ff` in the drift of `p_f` at a
/// given state; `a` and `b` define the reduced one-dimensional drift
/// `p_f (1 - p_f) (a p_f - b)` on the closure manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsCoefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub a: f64,
    pub b: f64,
}

impl DynamicsCoefficients {
    /// `f_given_f` and `f_given_n` are `p_f|f` and `p_f|n`.
    pub fn new(k: usize, u: &PayoffMatrix, f_given_f: f64, f_given_n: f64) -> Self {
        let (gamma1, gamma2, gamma3) = gammas(k as f64, f_given_f, f_given_n);
        let (a, b) = reduced_ab(k as f64, u);
        DynamicsCoefficients { gamma1, gamma2, gamma3, a, b }
    }

    pub fn drift_weight(&self, u: &PayoffMatrix) -> f64 {
        self.gamma1 * u.u_nn() + self.gamma2 * u.u_fn() + self.gamma3 * u.u_ff()
    }
}

fn gammas(k: f64, ff: f64, fnn: f64) -> (f64, f64, f64) {
    let nf = 1.0 - ff;
    let nn = 1.0 - fnn;
    let s = (k - 1.0) * (nn + ff);
    let g1 = -nn * (s + 3.0);
    let g2 = nn - ff + (nf - fnn) * (s + 2.0);
    let g3 = ff * (s + 3.0);
    (g1, g2, g3)
}

pub(super) fn reduced_ab(k: f64, u: &PayoffMatrix) -> (f64, f64) {
    let a = (k - 2.0) * (u.u_ff() - 2.0 * u.u_fn() + u.u_nn());
    let b = (k - 1.0) * u.u_nn() - (k - 2.0) * u.u_fn() - u.u_ff();
    (a, b)
}

fn check_k(k: usize) -> Result<(), EssError> {
    if k < 3 {
        return Err(GameError::DegreeTooSmall(k).into());
    }
    Ok(())
}

/// Drift rates divided by `p_fn`, as smooth functions of `p_f` and the two
/// conditionals. Shared by the public drifts and the stability chart.
pub(super) fn rates(
    profile: &DegreeProfile,
    probe: &StabilityProbe,
    u: &PayoffMatrix,
    p_f: f64,
    ff: f64,
    fnn: f64,
) -> (f64, f64) {
    let n = probe.population as f64;
    match profile {
        DegreeProfile::Uniform { k } => {
            let k = *k as f64;
            let (g1, g2, g3) = gammas(k, ff, fnn);
            let weight = g1 * u.u_nn() + g2 * u.u_fn() + g3 * u.u_ff();
            let r_f = probe.sel.alpha() * k * (k - 1.0) / (2.0 * n * (k + 1.0).powi(2)) * weight;
            let r_ff = (1.0 + (k - 1.0) * (fnn - ff)) / ((k + 1.0) * n);
            (r_f, r_ff)
        }
        DegreeProfile::Moments(m) => {
            let p_n = 1.0 - p_f;
            let p_ff = p_f * ff;
            let p_fn = p_f * (1.0 - ff) + p_n * fnn;
            let p_nn = p_n * (1.0 - fnn);
            let pi_bar = n * (p_ff * u.u_ff() + p_fn * u.u_fn() + p_nn * u.u_nn());
            let (up, down) = bd_weights(m.mean_degree, &probe.sel, u, ff, fnn);
            let r_f = (up - down) / (2.0 * pi_bar * n);
            let kappa = m.kappa();
            let r_ff = (((kappa - 1.0) * fnn + 1.0) * up - (kappa - 1.0) * ff * down)
                / (pi_bar * m.mean_degree * n);
            (r_f, r_ff)
        }
    }
}

/// Birth-death weights: expected fitness-weighted chance that the reproducing
/// user converts a discordant neighbour, per unit of `p_fn / (2 pi_bar)`.
///
/// Summing the binomial neighbourhood configurations, the fitness-weighted
/// share of discordant neighbours is linear in the degree, so only the mean
/// degree enters.
fn bd_weights(mean_degree: f64, sel: &SelectionParams, u: &PayoffMatrix, ff: f64, fnn: f64) -> (f64, f64) {
    let alpha = sel.alpha();
    let nf = 1.0 - ff;
    let nn = 1.0 - fnn;
    let up = (1.0 - alpha)
        + alpha * (u.u_ff() * (mean_degree - 1.0) * ff + u.u_fn() * (ff + mean_degree * nf));
    let down = (1.0 - alpha)
        + alpha * (u.u_nn() * (mean_degree - 1.0) * nn + u.u_fn() * (nn + mean_degree * fnn));
    (up, down)
}

/// Expected per-event change of `p_f` under imitation on a `k`-regular
/// graph, to first order in `alpha`. Zero at boundary states.
pub fn pf_dot_uniform(
    state: &NetworkState,
    k: usize,
    sel: &SelectionParams,
    n: usize,
    u: &PayoffMatrix,
) -> Result<f64, EssError> {
    check_k(k)?;
    let Some((ff, fnn)) = state.conditionals() else {
        return Ok(0.0);
    };
    let probe = StabilityProbe { sel: *sel, population: n };
    let (r_f, _) = rates(&DegreeProfile::Uniform { k }, &probe, u, state.p_f(), ff, fnn);
    Ok(state.p_fn() * r_f)
}

/// Expected per-event change of `p_ff` under imitation, selection-free part.
pub fn pff_dot_uniform(state: &NetworkState, k: usize, n: usize) -> Result<f64, EssError> {
    check_k(k)?;
    let Some((ff, fnn)) = state.conditionals() else {
        return Ok(0.0);
    };
    let k = k as f64;
    Ok(state.p_fn() / ((k + 1.0) * n as f64) * (1.0 + (k - 1.0) * (fnn - ff)))
}

/// Drift of `p_f` restricted to the pair-closure manifold:
/// `c * p_f (1 - p_f) (a p_f - b)` with
/// `c = alpha k (k-2)(k+3) / (N (k-1)(k+1)^2)`.
pub fn reduced_pf_dot(
    p_f: f64,
    k: usize,
    sel: &SelectionParams,
    n: usize,
    u: &PayoffMatrix,
) -> Result<f64, EssError> {
    check_k(k)?;
    if !(0.0..=1.0).contains(&p_f) {
        return Err(GameError::InvalidProbability(p_f).into());
    }
    let kf = k as f64;
    let (a, b) = reduced_ab(kf, u);
    let scale = sel.alpha() * kf * (kf - 2.0) * (kf + 3.0)
        / (n as f64 * (kf - 1.0) * (kf + 1.0).powi(2));
    Ok(scale * p_f * (1.0 - p_f) * (a * p_f - b))
}

/// `N (p_ff u_ff + p_fn u_fn + p_nn u_nn)`.
pub fn mean_fitness_bar(state: &NetworkState, n: usize, u: &PayoffMatrix) -> f64 {
    n as f64 * (state.p_ff() * u.u_ff() + state.p_fn() * u.u_fn() + state.p_nn() * u.u_nn())
}

/// Expected per-event change of `p_f` under birth-death updating on a graph
/// with mean degree `mean_degree`.
pub fn pf_dot_nonuniform(
    state: &NetworkState,
    mean_degree: f64,
    sel: &SelectionParams,
    n: usize,
    u: &PayoffMatrix,
) -> Result<f64, EssError> {
    if !(mean_degree > 1.0) {
        return Err(EssError::InvalidDegree(format!("mean degree {mean_degree} must exceed 1")));
    }
    let Some((ff, fnn)) = state.conditionals() else {
        return Ok(0.0);
    };
    let nn = 1.0 - fnn;
    let pi_bar = mean_fitness_bar(state, n, u);
    let bracket = ff * (u.u_ff() - u.u_fn()) - nn * (u.u_nn() - u.u_fn());
    Ok(sel.alpha() * (mean_degree - 1.0) * state.p_fn() / (2.0 * pi_bar * n as f64) * bracket)
}

/// `(Prob(dp_f = +1/N), Prob(dp_f = -1/N))` for one birth-death event, with
/// `pi_bar` from [`mean_fitness_bar`]. Boundary states give `(0, 0)`.
pub fn transition_probabilities_nonuniform(
    state: &NetworkState,
    mean_degree: f64,
    sel: &SelectionParams,
    n: usize,
    u: &PayoffMatrix,
) -> (f64, f64) {
    let Some((ff, fnn)) = state.conditionals() else {
        return (0.0, 0.0);
    };
    let pi_bar = mean_fitness_bar(state, n, u);
    let (up, down) = bd_weights(mean_degree, sel, u, ff, fnn);
    let base = state.p_fn() / (2.0 * pi_bar);
    (base * up, base * down)
}

/// Expected per-event change of `p_ff` under birth-death updating. A
/// replaced user is reached through an edge, so its expected degree is the
/// moment ratio `E[k^2]/E[k]` rather than the mean degree.
pub fn pff_dot_nonuniform(
    state: &NetworkState,
    moments: &DegreeMoments,
    sel: &SelectionParams,
    n: usize,
    u: &PayoffMatrix,
) -> Result<f64, EssError> {
    if !(moments.mean_degree > 0.0) {
        return Err(EssError::InvalidDegree(format!("mean degree {} must be positive", moments.mean_degree)));
    }
    let Some((ff, fnn)) = state.conditionals() else {
        return Ok(0.0);
    };
    let (up, down) = transition_probabilities_nonuniform(state, moments.mean_degree, sel, n, u);
    let kappa = moments.kappa();
    let half_edges = moments.mean_degree * n as f64 / 2.0;
    Ok(((kappa - 1.0) * fnn + 1.0) / half_edges * up - (kappa - 1.0) * ff / half_edges * down)
}

/// Drifts `(p_f', p_ff')` at a state for the dynamics matching `profile`.
pub(super) fn drifts(
    profile: &DegreeProfile,
    probe: &StabilityProbe,
    u: &PayoffMatrix,
    state: &NetworkState,
) -> Result<(f64, f64), EssError> {
    let n = probe.population;
    match profile {
        DegreeProfile::Uniform { k } => Ok((
            pf_dot_uniform(state, *k, &probe.sel, n, u)?,
            pff_dot_uniform(state, *k, n)?,
        )),
        DegreeProfile::Moments(m) => Ok((
            pf_dot_nonuniform(state, m.mean_degree, &probe.sel, n, u)?,
            pff_dot_nonuniform(state, m, &probe.sel, n, u)?,
        )),
    }
}

/// Pair closure for the given profile (degree `k` or moment ratio).
pub(super) fn closure_for(profile: &DegreeProfile, p_f: f64) -> Result<NetworkState, EssError> {
    match profile {
        DegreeProfile::Uniform { k } => Ok(pair_closure(p_f, *k)?),
        DegreeProfile::Moments(m) => Ok(crate::game::closure_with_ratio(p_f, m.kappa())?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sel() -> SelectionParams {
        SelectionParams::new(0.1).unwrap()
    }

    fn pm(i: u8) -> PayoffMatrix {
        PayoffMatrix::preset(i).unwrap()
    }

    #[test]
    fn coefficient_a_b_examples() {
        let c = DynamicsCoefficients::new(10, &pm(1), 0.5, 0.5);
        assert_abs_diff_eq!(c.a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.b, -2.0, epsilon = 1e-12);
        let c = DynamicsCoefficients::new(10, &pm(2), 0.5, 0.5);
        assert_abs_diff_eq!(c.b / c.a, 3.4 / 4.8, epsilon = 1e-12);
    }

    #[test]
    fn pf_dot_uniform_examples() {
        let boundary = NetworkState::from_pf_pff(1.0, 1.0).unwrap();
        assert_eq!(pf_dot_uniform(&boundary, 10, &sel(), 1000, &pm(1)).unwrap(), 0.0);
        // p_fn = 0 with both classes present: segregated clusters
        let segregated = NetworkState::from_pf_pff(0.4, 0.4).unwrap();
        assert_eq!(pf_dot_uniform(&segregated, 10, &sel(), 1000, &pm(2)).unwrap(), 0.0);

        let root = pair_closure(3.4 / 4.8, 10).unwrap();
        assert!(pf_dot_uniform(&root, 10, &sel(), 1000, &pm(2)).unwrap().abs() < 1e-12);

        let half = pair_closure(0.5, 10).unwrap();
        assert!(pf_dot_uniform(&half, 10, &sel(), 1000, &pm(1)).unwrap() > 0.0);
        assert!(pf_dot_uniform(&half, 2, &sel(), 1000, &pm(1)).is_err());
    }

    #[test]
    fn pff_dot_uniform_examples() {
        let closed = pair_closure(0.37, 12).unwrap();
        assert!(pff_dot_uniform(&closed, 12, 1000).unwrap().abs() < 1e-18);
        let segregated = NetworkState::from_pf_pff(0.3, 0.3).unwrap();
        assert_eq!(pff_dot_uniform(&segregated, 10, 1000).unwrap(), 0.0);
        let s = NetworkState::from_pf_pff(0.5, 0.25).unwrap();
        assert_abs_diff_eq!(pff_dot_uniform(&s, 10, 1000).unwrap(), 0.5 / 11_000.0, epsilon = 1e-18);
    }

    #[test]
    fn reduced_dynamic_examples() {
        for p in [0.0, 1.0] {
            assert_eq!(reduced_pf_dot(p, 10, &sel(), 1000, &pm(2)).unwrap(), 0.0);
        }
        let (a, b) = reduced_ab(10.0, &pm(2));
        assert_abs_diff_eq!(a * (3.4 / 4.8) - b, 0.0, epsilon = 1e-12);
        assert!(reduced_pf_dot(3.4 / 4.8, 10, &sel(), 1000, &pm(2)).unwrap().abs() < 1e-12);
        assert!(reduced_pf_dot(0.5, 10, &sel(), 1000, &pm(1)).unwrap() > 0.0);
    }

    #[test]
    fn mean_fitness_bar_examples() {
        let s = NetworkState::from_pf_pff(0.5, 0.25).unwrap();
        assert_abs_diff_eq!(mean_fitness_bar(&s, 100, &pm(2)), 65.0, epsilon = 1e-12);
        let all = NetworkState::from_pf_pff(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(mean_fitness_bar(&all, 10, &pm(1)), 8.0, epsilon = 1e-12);
        let flat = PayoffMatrix::new(0.3, 0.3, 0.3).unwrap();
        let mixed = NetworkState::from_pf_pff(0.6, 0.3).unwrap();
        assert_abs_diff_eq!(mean_fitness_bar(&mixed, 50, &flat), 15.0, epsilon = 1e-12);
    }

    #[test]
    fn pf_dot_nonuniform_examples() {
        let segregated = NetworkState::from_pf_pff(0.5, 0.5).unwrap();
        assert_eq!(pf_dot_nonuniform(&segregated, 20.0, &sel(), 1000, &pm(2)).unwrap(), 0.0);
        let flat = PayoffMatrix::new(0.3, 0.3, 0.3).unwrap();
        let s = NetworkState::from_pf_pff(0.5, 0.2).unwrap();
        assert_eq!(pf_dot_nonuniform(&s, 20.0, &sel(), 1000, &flat).unwrap(), 0.0);
        // p_f|f = p_n|n = 0.55: bracket 0.55*(-0.2) - 0.55*(-0.4) = 0.11
        let s = NetworkState::from_conditionals(0.5, 0.55, 0.45).unwrap();
        let v = pf_dot_nonuniform(&s, 20.0, &sel(), 1000, &pm(2)).unwrap();
        let pi_bar = mean_fitness_bar(&s, 1000, &pm(2));
        assert_abs_diff_eq!(v, 0.1 * 19.0 * s.p_fn() / (2.0 * pi_bar * 1000.0) * 0.11, epsilon = 1e-18);
        assert!(pf_dot_nonuniform(&s, 1.0, &sel(), 1000, &pm(2)).is_err());
    }

    #[test]
    fn pff_dot_nonuniform_boundary_and_kappa() {
        let m = DegreeMoments::new(20.0, 400.0).unwrap();
        assert_eq!(m.kappa(), 20.0);
        assert_eq!(DegreeMoments::erdos_renyi(10.0).unwrap().kappa(), 11.0);
        for (p_f, p_ff) in [(0.0, 0.0), (1.0, 1.0)] {
            let s = NetworkState::from_pf_pff(p_f, p_ff).unwrap();
            assert_eq!(pff_dot_nonuniform(&s, &m, &sel(), 1000, &pm(2)).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonuniform_pf_dot_is_difference_of_transition_probabilities() {
        let s = NetworkState::from_pf_pff(0.4, 0.2).unwrap();
        for i in 1..=4 {
            let (up, down) = transition_probabilities_nonuniform(&s, 12.0, &sel(), 500, &pm(i));
            let direct = pf_dot_nonuniform(&s, 12.0, &sel(), 500, &pm(i)).unwrap();
            assert_abs_diff_eq!((up - down) / 500.0, direct, epsilon = 1e-18);
        }
    }
}
