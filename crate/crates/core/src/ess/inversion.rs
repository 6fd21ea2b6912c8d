use serde::{Deserialize, Serialize};

use super::closed_form::interior_candidate;
use super::DegreeProfile;
use crate::error::EssError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMode {
    #[default]
    Exact,
    LargeK,
}

/// Affine constraint `u_ff = intercept + slope * u_nn` with `u_fn = 1` under
/// which the interior stable state equals `p_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffRelation {
    pub p_star: f64,
    pub mode: InversionMode,
    /// Effective degree used by the exact relation.
    pub kappa: f64,
    pub intercept: f64,
    pub slope: f64,
    /// `(1 - u_ff) / (1 - u_nn)`; constant along the relation only in
    /// large-degree mode.
    pub ratio: Option<f64>,
}

impl PayoffRelation {
    pub fn u_ff_at(&self, u_nn: f64) -> f64 {
        self.intercept + self.slope * u_nn
    }

    /// Stable state predicted for `(u_ff, 1, u_nn)` by the formula this
    /// relation inverts.
    pub fn forward(&self, u_ff: f64, u_nn: f64) -> Option<f64> {
        match self.mode {
            InversionMode::Exact => interior_candidate(u_ff, 1.0, u_nn, self.kappa),
            InversionMode::LargeK => {
                let d = 1.0 + (1.0 - u_ff) / (1.0 - u_nn);
                (u_nn != 1.0 && d != 0.0).then(|| 1.0 / d)
            }
        }
    }

    /// `count` points `(u_ff, u_nn)` on the relation with both entries in
    /// `(0, 1)`, evenly spaced over the admissible `u_nn` range.
    pub fn sample_points(&self, count: usize) -> Vec<(f64, f64)> {
        // u_ff in (0, 1) bounds u_nn; slope is positive in both modes
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if self.slope > 0.0 {
            lo = lo.max(-self.intercept / self.slope);
            hi = hi.min((1.0 - self.intercept) / self.slope);
        }
        if !(hi > lo) {
            return Vec::new();
        }
        (1..=count)
            .map(|i| {
                let u_nn = lo + (hi - lo) * i as f64 / (count + 1) as f64;
                (self.u_ff_at(u_nn), u_nn)
            })
            .collect()
    }
}

/// Solves the stable-state formula for `u_ff` in terms of `u_nn` with
/// `u_fn` normalised to 1.
pub fn invert_payoff_relation(
    p_star: f64,
    profile: &DegreeProfile,
    mode: InversionMode,
) -> Result<PayoffRelation, EssError> {
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(EssError::BoundaryTarget(p_star));
    }
    let kappa = profile.kappa();
    match mode {
        InversionMode::LargeK => {
            let r = 1.0 / p_star - 1.0;
            Ok(PayoffRelation { p_star, mode, kappa, intercept: 1.0 - r, slope: r, ratio: Some(r) })
        }
        InversionMode::Exact => {
            if !(kappa > 2.0) {
                return Err(EssError::InvalidDegree(format!("effective degree {kappa} must exceed 2")));
            }
            let q = kappa - 2.0;
            let den = 1.0 + p_star * q;
            Ok(PayoffRelation {
                p_star,
                mode,
                kappa,
                intercept: q * (2.0 * p_star - 1.0) / den,
                slope: (1.0 + q * (1.0 - p_star)) / den,
                ratio: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn large_k_ratios() {
        let prof = DegreeProfile::Uniform { k: 499 };
        let r = |p| invert_payoff_relation(p, &prof, InversionMode::LargeK).unwrap().ratio.unwrap();
        assert_abs_diff_eq!(r(0.53), 1.0 / 0.53 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r(0.53), 0.88679, epsilon = 1e-5);
        assert_abs_diff_eq!(r(0.81), 0.23457, epsilon = 1e-5);
        assert_eq!(r(0.5), 1.0);
        let rel = invert_payoff_relation(0.5, &prof, InversionMode::LargeK).unwrap();
        assert_eq!(rel.u_ff_at(0.3), 0.3);
    }

    #[test]
    fn exact_round_trip() {
        for k in [3usize, 10, 50, 499] {
            let prof = DegreeProfile::Uniform { k };
            for p in [0.19, 0.35, 0.53, 0.77, 0.81] {
                let rel = invert_payoff_relation(p, &prof, InversionMode::Exact).unwrap();
                let pts = rel.sample_points(3);
                assert_eq!(pts.len(), 3);
                for (u_ff, u_nn) in pts {
                    assert!(u_ff > 0.0 && u_ff < 1.0 && u_nn > 0.0 && u_nn < 1.0);
                    assert_abs_diff_eq!(rel.forward(u_ff, u_nn).unwrap(), p, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn boundary_targets_are_rejected() {
        let prof = DegreeProfile::Uniform { k: 10 };
        for p in [0.0, 1.0, -0.1] {
            assert!(matches!(
                invert_payoff_relation(p, &prof, InversionMode::Exact),
                Err(EssError::BoundaryTarget(_))
            ));
        }
    }
}
