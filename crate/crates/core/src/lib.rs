//! Information diffusion on social networks modelled as a graphical
//! evolutionary game.
//!
//! Every user holds one of two strategies, forward ([`Strategy::Forward`])
//! or not forward ([`Strategy::NotForward`]), and collects payoff from each
//! incident edge according to a symmetric [`PayoffMatrix`]. The crate offers
//! three views of the same game:
//!
//! * [`graph`]: the networks the game is played on (random regular,
//!   Erdős–Rényi, Barabási–Albert, SNAP edge lists).
//! * [`ess`]: pair-approximation dynamics of the macroscopic state
//!   `(p_f, p_ff)`, closed-form stable states, Jacobian stability tests and
//!   the inverse map from an observed stable state to payoff constraints.
//! * [`sim`]: the agent-based simulator for the imitation (IM),
//!   birth-death (BD) and death-birth (DB) update rules, with seeded
//!   ensembles.
//!
//! ```
//! use evodiff::{ess, PayoffMatrix};
//!
//! let pm2 = PayoffMatrix::preset(2).unwrap();
//! let probe = ess::StabilityProbe::default();
//! let result = ess::ess_uniform(&pm2, 20, &probe).unwrap();
//! assert!((result.selected_ess.unwrap() - 7.4 / 10.8).abs() < 1e-12);
//! ```

// `!(x > y)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ess;
pub mod game;
pub mod graph;
pub mod rng;
pub mod sim;

pub use error::{EssError, GameError, GraphError, SimError};
pub use game::{
    NetworkState, PayoffMatrix, Regime, SelectionParams, Strategy, Conditional,
};
pub use graph::{DegreeStats, Graph, GraphSpec};
