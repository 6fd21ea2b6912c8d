//! Jacobian test for fixed points of the pair dynamics.
//!
//! The coordinates `(p_f, p_ff)` meet the absorbing states at corners of the
//! feasible triangle, where the drift is not differentiable. The Jacobian is
//! therefore taken in the chart `(p_f, c)` with `c = p_f|f - p_f|n`, in which
//!
//! ```text
//! p_f|f = p_f + (1 - p_f) c,   p_f|n = p_f (1 - c),
//! p_f'  = 2 p_f (1 - p_f)(1 - c) R_f,
//! c'    = 2 (1 - c) [R_ff - (2 p_f + (1 - 2 p_f) c) R_f],
//! ```
//!
//! and `R_f`, `R_ff` are the drifts divided by `p_fn`. Away from the boundary
//! the chart is a diffeomorphism, so determinant and trace at a fixed point
//! agree with those of the `(p_f, p_ff)` Jacobian. On the boundary every
//! value of `c` describes the same network state; the fixed point is the
//! zero of `c'` along the edge.

use serde::{Deserialize, Serialize};

use super::dynamics::{drifts, rates};
use super::{DegreeProfile, StabilityProbe};
use crate::error::EssError;
use crate::game::{NetworkState, PayoffMatrix, SelectionParams};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;

const FIXED_POINT_TOL: f64 = 1e-9;
const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Inconclusive,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub label: Stability,
    /// Jacobian in the `(p_f, c)` chart, row-major.
    pub jacobian: [[f64; 2]; 2],
    pub determinant: f64,
    pub trace: f64,
    /// Chart coordinate `c` at the fixed point.
    pub correlation: f64,
}

fn chart_field(profile: &DegreeProfile, probe: &StabilityProbe, u: &PayoffMatrix, p_f: f64, c: f64) -> [f64; 2] {
    let ff = p_f + (1.0 - p_f) * c;
    let fnn = p_f * (1.0 - c);
    let (r_f, r_ff) = rates(profile, probe, u, p_f, ff, fnn);
    let pf_dot = 2.0 * p_f * (1.0 - p_f) * (1.0 - c) * r_f;
    let c_dot = 2.0 * (1.0 - c) * edge_balance(r_f, r_ff, p_f, c);
    [pf_dot, c_dot]
}

fn edge_balance(r_f: f64, r_ff: f64, p_f: f64, c: f64) -> f64 {
    r_ff - (2.0 * p_f + (1.0 - 2.0 * p_f) * c) * r_f
}

/// Zero of `c'` along a boundary edge, nearest to the selection-free value
/// `1 / (kappa - 1)`.
fn boundary_correlation(profile: &DegreeProfile, probe: &StabilityProbe, u: &PayoffMatrix, p_f: f64) -> Result<f64, EssError> {
    let g = |c: f64| {
        let ff = p_f + (1.0 - p_f) * c;
        let fnn = p_f * (1.0 - c);
        let (r_f, r_ff) = rates(profile, probe, u, p_f, ff, fnn);
        edge_balance(r_f, r_ff, p_f, c)
    };
    let guess = 1.0 / (profile.kappa() - 1.0);
    const GRID: usize = 2000;
    let upper = 1.0 - 1e-9;
    let mut best: Option<(f64, f64)> = None;
    let mut lo = 0.0;
    let mut g_lo = g(lo);
    for i in 1..=GRID {
        let hi = upper * i as f64 / GRID as f64;
        let g_hi = g(hi);
        if g_lo == 0.0 || g_lo.signum() != g_hi.signum() {
            let (mut a, mut b, mut ga) = (lo, hi, g_lo);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let gm = g(mid);
                if gm == 0.0 || b - a < 1e-15 {
                    a = mid;
                    b = mid;
                    break;
                }
                if gm.signum() == ga.signum() {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            let root = 0.5 * (a + b);
            if best.is_none_or(|(r, _)| (root - guess).abs() < (r - guess).abs()) {
                best = Some((root, g(root)));
            }
        }
        lo = hi;
        g_lo = g_hi;
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| EssError::Degenerate(format!(
            "no pair equilibrium on the boundary p_f = {p_f}; selection too strong for the first-order drift"
        )))
}

/// Finite difference along one coordinate, one-sided when `x` sits on the
/// edge of `[lo, hi]`.
fn diff(f: impl Fn(f64) -> [f64; 2], x: f64, lo: f64, hi: f64) -> [f64; 2] {
    let h = FD_STEP;
    let (a, b) = if x - h < lo {
        (x, x + h)
    } else if x + h > hi {
        (x - h, x)
    } else {
        (x - h, x + h)
    };
    let (fa, fb) = (f(a), f(b));
    [(fb[0] - fa[0]) / (b - a), (fb[1] - fa[1]) / (b - a)]
}

/// Labels the fixed point `(p_f, p_ff)` by the signs of the Jacobian's
/// determinant and trace.
///
/// The point must annihilate `p_f'` and the selection-free part of `p_ff'`
/// to within `1e-9`; the pair closure used by the closed forms is exact only at
/// that order.
pub fn jacobian_stability(
    profile: &DegreeProfile,
    probe: &StabilityProbe,
    u: &PayoffMatrix,
    point: (f64, f64),
) -> Result<StabilityReport, EssError> {
    let state = NetworkState::from_pf_pff(point.0, point.1)?;
    let neutral = StabilityProbe { sel: SelectionParams::new(0.0)?, ..*probe };
    let (pf_dot, _) = drifts(profile, probe, u, &state)?;
    let (_, pff_dot) = drifts(profile, &neutral, u, &state)?;
    if pf_dot.abs() >= FIXED_POINT_TOL || pff_dot.abs() >= FIXED_POINT_TOL {
        return Err(EssError::NotFixedPoint { p_f: point.0, p_ff: point.1, pf_dot, pff_dot });
    }

    let p_f = state.p_f();
    let c = match state.conditionals() {
        Some((ff, fnn)) => ff - fnn,
        None => boundary_correlation(profile, probe, u, p_f)?,
    };
    let field = |x: f64, y: f64| chart_field(profile, probe, u, x, y);
    let col_pf = diff(|x| field(x, c), p_f, 0.0, 1.0);
    let col_c = diff(|y| field(p_f, y), c, f64::NEG_INFINITY, 1.0);
    let jacobian = [[col_pf[0], col_c[0]], [col_pf[1], col_c[1]]];
    let determinant = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    let trace = jacobian[0][0] + jacobian[1][1];
    let norm = jacobian.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    Ok(StabilityReport {
        label: classify(determinant, trace, norm),
        jacobian,
        determinant,
        trace,
        correlation: c,
    })
}

fn classify(det: f64, tr: f64, norm: f64) -> Stability {
    let tol_tr = CLASSIFY_TOL * norm;
    let tol_det = CLASSIFY_TOL * norm * norm;
    if det < -tol_det {
        Stability::Saddle
    } else if det > tol_det && tr < -tol_tr {
        Stability::Stable
    } else if det > tol_det && tr > tol_tr {
        Stability::Unstable
    } else {
        Stability::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ess::DegreeMoments;
    use crate::game::pair_closure;

    fn pm(i: u8) -> PayoffMatrix {
        PayoffMatrix::preset(i).unwrap()
    }

    fn label(profile: DegreeProfile, u: &PayoffMatrix, point: (f64, f64)) -> Stability {
        jacobian_stability(&profile, &StabilityProbe::default(), u, point).unwrap().label
    }

    #[test]
    fn corner_examples() {
        for k in [10, 20] {
            let reg = DegreeProfile::Uniform { k };
            assert_eq!(label(reg, &pm(1), (1.0, 1.0)), Stability::Stable);
            assert_ne!(label(reg, &pm(1), (0.0, 0.0)), Stability::Stable);
            assert_eq!(label(reg, &pm(4), (0.0, 0.0)), Stability::Stable);
            assert_ne!(label(reg, &pm(4), (1.0, 1.0)), Stability::Stable);
        }
    }

    #[test]
    fn nonuniform_corners() {
        let er = DegreeProfile::Moments(DegreeMoments::erdos_renyi(20.0).unwrap());
        assert_eq!(label(er, &pm(1), (1.0, 1.0)), Stability::Stable);
        assert_eq!(label(er, &pm(4), (0.0, 0.0)), Stability::Stable);
        assert_ne!(label(er, &pm(2), (0.0, 0.0)), Stability::Stable);
    }

    #[test]
    fn rejects_points_off_the_closure() {
        let reg = DegreeProfile::Uniform { k: 10 };
        let r = jacobian_stability(&reg, &StabilityProbe::default(), &pm(2), (0.5, 0.25));
        assert!(matches!(r, Err(EssError::NotFixedPoint { .. })));
    }

    #[test]
    fn chart_matches_direct_jacobian_in_the_interior() {
        let k = 10;
        let reg = DegreeProfile::Uniform { k };
        let probe = StabilityProbe::default();
        let p = 3.4 / 4.8;
        let s = pair_closure(p, k).unwrap();
        let report = jacobian_stability(&reg, &probe, &pm(2), (s.p_f(), s.p_ff())).unwrap();

        let f = |x: f64, y: f64| {
            let st = NetworkState::from_pf_pff(x, y).unwrap();
            let (a, b) = drifts(&reg, &probe, &pm(2), &st).unwrap();
            [a, b]
        };
        let h = 1e-6;
        let (x, y) = (s.p_f(), s.p_ff());
        let dx = [(f(x + h, y)[0] - f(x - h, y)[0]) / (2.0 * h), (f(x + h, y)[1] - f(x - h, y)[1]) / (2.0 * h)];
        let dy = [(f(x, y + h)[0] - f(x, y - h)[0]) / (2.0 * h), (f(x, y + h)[1] - f(x, y - h)[1]) / (2.0 * h)];
        let det = dx[0] * dy[1] - dy[0] * dx[1];
        let tr = dx[0] + dy[1];
        assert!((det - report.determinant).abs() < 1e-4 * det.abs());
        assert!((tr - report.trace).abs() < 1e-4 * tr.abs());
        assert_eq!(report.label, Stability::Stable);
    }

    #[test]
    fn classify_thresholds() {
        assert_eq!(classify(1.0, -1.0, 1.0), Stability::Stable);
        assert_eq!(classify(1.0, 1.0, 1.0), Stability::Unstable);
        assert_eq!(classify(-1.0, 0.0, 1.0), Stability::Saddle);
        assert_eq!(classify(0.0, -1.0, 1.0), Stability::Inconclusive);
        assert_eq!(classify(1.0, 0.0, 1.0), Stability::Inconclusive);
    }
}
