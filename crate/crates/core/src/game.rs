//! Payoffs, fitness and the macroscopic network-state algebra.

use serde::{Deserialize, Serialize};

use crate::error::GameError;

/// Absolute tolerance for state-algebra identities.
pub const STATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// S_f: forward the information.
    Forward,
    /// S_n: do not forward.
    NotForward,
}

impl Strategy {
    pub fn is_forward(self) -> bool {
        self == Strategy::Forward
    }

    pub fn other(self) -> Strategy {
        match self {
            Strategy::Forward => Strategy::NotForward,
            Strategy::NotForward => Strategy::Forward,
        }
    }
}

/// Qualitative ordering of the payoff entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// u_ff > u_fn > u_nn
    AllForward,
    /// u_nn > u_fn > u_ff
    NoneForward,
    /// u_fn above both diagonal entries.
    AntiCoordination,
    /// u_fn below both diagonal entries.
    Coordination,
    /// Some entries are tied.
    Degenerate,
}

/// Symmetric 2x2 payoff matrix with entries in the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    u_ff: f64,
    u_fn: f64,
    u_nn: f64,
}

impl PayoffMatrix {
    pub fn new(u_ff: f64, u_fn: f64, u_nn: f64) -> Result<Self, GameError> {
        for (name, value) in [("u_ff", u_ff), ("u_fn", u_fn), ("u_nn", u_nn)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(GameError::PayoffOutOfRange { name, value });
            }
        }
        Ok(PayoffMatrix { u_ff, u_fn, u_nn })
    }

    /// The four benchmark matrices PM1..PM4 used in the synthetic-network
    /// experiments.
    pub fn preset(index: u8) -> Result<Self, GameError> {
        match index {
            1 => Self::new(0.8, 0.6, 0.4),
            2 => Self::new(0.6, 0.8, 0.4),
            3 => Self::new(0.4, 0.8, 0.6),
            4 => Self::new(0.4, 0.6, 0.8),
            other => Err(GameError::UnknownPreset(other)),
        }
    }

    pub fn u_ff(&self) -> f64 {
        self.u_ff
    }

    pub fn u_fn(&self) -> f64 {
        self.u_fn
    }

    pub fn u_nn(&self) -> f64 {
        self.u_nn
    }

    #[inline]
    pub fn payoff(&self, own: Strategy, other: Strategy) -> f64 {
        match (own, other) {
            (Strategy::Forward, Strategy::Forward) => self.u_ff,
            (Strategy::NotForward, Strategy::NotForward) => self.u_nn,
            _ => self.u_fn,
        }
    }

    pub fn classify_regime(&self) -> Regime {
        let (ff, fnn, nn) = (self.u_ff, self.u_fn, self.u_nn);
        if ff == fnn || fnn == nn || ff == nn {
            Regime::Degenerate
        } else if ff > fnn && fnn > nn {
            Regime::AllForward
        } else if nn > fnn && fnn > ff {
            Regime::NoneForward
        } else if fnn > ff && fnn > nn {
            Regime::AntiCoordination
        } else {
            Regime::Coordination
        }
    }
}

/// Selection intensity. The baseline fitness is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    alpha: f64,
}

impl SelectionParams {
    pub const BASELINE: f64 = 1.0;

    pub fn new(alpha: f64) -> Result<Self, GameError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(GameError::InvalidAlpha(alpha));
        }
        Ok(SelectionParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(1 - alpha) * B + alpha * payoff`.
    #[inline]
    pub fn fitness(&self, payoff: f64) -> f64 {
        (1.0 - self.alpha) * Self::BASELINE + self.alpha * payoff
    }
}

/// Fitness of an S_f user with `k` neighbours of which `k_f` forward.
pub fn fitness_f(k: usize, k_f: usize, sel: &SelectionParams, u: &PayoffMatrix) -> Result<f64, GameError> {
    if k_f > k {
        return Err(GameError::CountExceedsDegree { count: k_f, degree: k });
    }
    Ok(sel.fitness(k_f as f64 * u.u_ff + (k - k_f) as f64 * u.u_fn))
}

/// Fitness of an S_n user with `k` neighbours of which `k_n` do not forward.
pub fn fitness_n(k: usize, k_n: usize, sel: &SelectionParams, u: &PayoffMatrix) -> Result<f64, GameError> {
    if k_n > k {
        return Err(GameError::CountExceedsDegree { count: k_n, degree: k });
    }
    Ok(sel.fitness(k_n as f64 * u.u_nn + (k - k_n) as f64 * u.u_fn))
}

/// Binomial probability of `j` successes in `k` trials, computed in log
/// space so large degrees do not overflow.
pub fn binomial_pmf(k: usize, j: usize, p: f64) -> Result<f64, GameError> {
    if j > k {
        return Err(GameError::CountExceedsDegree { count: j, degree: k });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GameError::InvalidProbability(p));
    }
    if p == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if j == k { 1.0 } else { 0.0 });
    }
    let j_small = j.min(k - j);
    let ln_choose: f64 = (0..j_small)
        .map(|i| ((k - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum();
    Ok((ln_choose + j as f64 * p.ln() + (k - j) as f64 * (-p).ln_1p()).exp())
}

/// Probability that an S_f user of degree `k` has exactly `k_f` forwarding
/// neighbours, given `p_f|f`.
pub fn config_prob_f(k: usize, k_f: usize, p_f_given_f: f64) -> Result<f64, GameError> {
    binomial_pmf(k, k_f, p_f_given_f)
}

/// Probability that an S_n user of degree `k` has exactly `k_n` non-forwarding
/// neighbours, given `p_n|n`.
pub fn config_prob_n(k: usize, k_n: usize, p_n_given_n: f64) -> Result<f64, GameError> {
    binomial_pmf(k, k_n, p_n_given_n)
}

/// A conditional neighbour probability. When the conditioning class is empty
/// (`p_f = 0` or `p_f = 1`) the value is vacuous; a boundary limit may still
/// be carried, e.g. from the pair closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditional {
    Defined(f64),
    Vacuous { limit: Option<f64> },
}

impl Conditional {
    pub fn value(self) -> Option<f64> {
        match self {
            Conditional::Defined(v) => Some(v),
            Conditional::Vacuous { .. } => None,
        }
    }

    pub fn is_vacuous(self) -> bool {
        matches!(self, Conditional::Vacuous { .. })
    }

    /// The defined value, or the boundary limit if one is carried.
    pub fn value_or_limit(self) -> Option<f64> {
        match self {
            Conditional::Defined(v) => Some(v),
            Conditional::Vacuous { limit } => limit,
        }
    }
}

/// Macroscopic state `(p_f, p_ff)` and everything derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    p_f: f64,
    p_ff: f64,
    p_fn: f64,
    p_nn: f64,
    f_given_f: Conditional,
    n_given_f: Conditional,
    f_given_n: Conditional,
    n_given_n: Conditional,
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

impl NetworkState {
    /// Builds the state from the user fraction and the S_f-S_f edge fraction.
    pub fn from_pf_pff(p_f: f64, p_ff: f64) -> Result<Self, GameError> {
        let infeasible = |reason| Err(GameError::InfeasibleState { p_f, p_ff, reason });
        if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&p_f) || p_f.is_nan() {
            return infeasible("p_f outside [0, 1]");
        }
        if p_ff.is_nan() || p_ff < -STATE_TOL {
            return infeasible("p_ff negative");
        }
        if p_ff > p_f + STATE_TOL {
            return infeasible("p_ff exceeds p_f");
        }
        if p_ff < 2.0 * p_f - 1.0 - STATE_TOL {
            return infeasible("implied p_nn negative");
        }
        let p_f = clamp_unit(p_f);
        let p_ff = p_ff.clamp(0.0_f64.max(2.0 * p_f - 1.0), p_f);
        let p_n = 1.0 - p_f;
        let p_fn = 2.0 * (p_f - p_ff);
        let p_nn = (1.0 - p_ff - p_fn).max(0.0);

        let (f_given_f, n_given_f) = if p_f > 0.0 {
            let ff = clamp_unit(p_ff / p_f);
            (Conditional::Defined(ff), Conditional::Defined(1.0 - ff))
        } else {
            (Conditional::Vacuous { limit: None }, Conditional::Vacuous { limit: None })
        };
        let (f_given_n, n_given_n) = if p_n > 0.0 {
            let fnn = clamp_unit((p_f - p_ff) / p_n);
            (Conditional::Defined(fnn), Conditional::Defined(1.0 - fnn))
        } else {
            (Conditional::Vacuous { limit: None }, Conditional::Vacuous { limit: None })
        };
        Ok(NetworkState { p_f, p_ff, p_fn, p_nn, f_given_f, n_given_f, f_given_n, n_given_n })
    }

    /// Builds the state from `p_f` and the two conditionals `p_f|f`, `p_f|n`.
    /// Conditionals on an empty class are kept as vacuous limits.
    pub fn from_conditionals(p_f: f64, f_given_f: f64, f_given_n: f64) -> Result<Self, GameError> {
        for p in [p_f, f_given_f, f_given_n] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GameError::InvalidProbability(p));
            }
        }
        let p_n = 1.0 - p_f;
        let lhs = p_f * (1.0 - f_given_f);
        let rhs = p_n * f_given_n;
        if (lhs - rhs).abs() > STATE_TOL {
            return Err(GameError::InfeasibleState {
                p_f,
                p_ff: p_f * f_given_f,
                reason: "conditionals violate p_f p_n|f = p_n p_f|n",
            });
        }
        let wrap = |v: f64, class_empty: bool| {
            if class_empty {
                Conditional::Vacuous { limit: Some(v) }
            } else {
                Conditional::Defined(v)
            }
        };
        let p_ff = p_f * f_given_f;
        let p_nn = p_n * (1.0 - f_given_n);
        Ok(NetworkState {
            p_f,
            p_ff,
            p_fn: lhs + rhs,
            p_nn,
            f_given_f: wrap(f_given_f, p_f == 0.0),
            n_given_f: wrap(1.0 - f_given_f, p_f == 0.0),
            f_given_n: wrap(f_given_n, p_n == 0.0),
            n_given_n: wrap(1.0 - f_given_n, p_n == 0.0),
        })
    }

    pub fn p_f(&self) -> f64 {
        self.p_f
    }

    pub fn p_n(&self) -> f64 {
        1.0 - self.p_f
    }

    pub fn p_ff(&self) -> f64 {
        self.p_ff
    }

    pub fn p_fn(&self) -> f64 {
        self.p_fn
    }

    pub fn p_nn(&self) -> f64 {
        self.p_nn
    }

    pub fn f_given_f(&self) -> Conditional {
        self.f_given_f
    }

    pub fn n_given_f(&self) -> Conditional {
        self.n_given_f
    }

    pub fn f_given_n(&self) -> Conditional {
        self.f_given_n
    }

    pub fn n_given_n(&self) -> Conditional {
        self.n_given_n
    }

    /// True when one strategy class is empty.
    pub fn is_boundary(&self) -> bool {
        self.f_given_f.is_vacuous() || self.f_given_n.is_vacuous()
    }

    /// `(p_f|f, p_f|n)` when both are defined.
    pub fn conditionals(&self) -> Option<(f64, f64)> {
        Some((self.f_given_f.value()?, self.f_given_n.value()?))
    }
}

/// Expresses the full state through `p_f` alone, assuming the edge dynamic
/// has equilibrated so that `p_f|f - p_f|n = 1/(k-1)`.
pub fn pair_closure(p_f: f64, k: usize) -> Result<NetworkState, GameError> {
    if k < 3 {
        return Err(GameError::DegreeTooSmall(k));
    }
    closure_with_ratio(p_f, k as f64)
}

/// Pair closure with a real-valued effective degree (the moment ratio
/// E[k^2]/E[k] on non-uniform graphs).
pub fn closure_with_ratio(p_f: f64, kappa: f64) -> Result<NetworkState, GameError> {
    if !(0.0..=1.0).contains(&p_f) {
        return Err(GameError::InvalidProbability(p_f));
    }
    let shrink = (kappa - 2.0) / (kappa - 1.0);
    let f_given_f = p_f + (1.0 - p_f) / (kappa - 1.0);
    let f_given_n = shrink * p_f;
    NetworkState::from_conditionals(p_f, f_given_f.min(1.0), f_given_n)
}
