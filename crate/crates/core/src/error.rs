use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("infeasible regular graph: n={n}, k={k} ({reason})")]
    InfeasibleRegular { n: usize, k: usize, reason: &'static str },
    #[error("mean degree {mean_degree} outside (0, {max}] for n={n}")]
    InvalidMeanDegree { n: usize, mean_degree: f64, max: f64 },
    #[error("invalid attachment count m={m} for n={n}: need 2 <= m < n")]
    InvalidAttachment { n: usize, m: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("edge ({u}, {v}) is a self-loop, duplicate or out of range")]
    InvalidEdge { u: usize, v: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error("could not sample a simple {k}-regular graph on {n} nodes after {attempts} attempts")]
    SamplingFailed { n: usize, k: usize, attempts: usize },
    #[error("graph invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("payoff {name}={value} must lie strictly inside (0, 1)")]
    PayoffOutOfRange { name: &'static str, value: f64 },
    #[error("unknown payoff preset {0}; expected 1..=4")]
    UnknownPreset(u8),
    #[error("selection intensity alpha={0} must lie in [0, 1]")]
    InvalidAlpha(f64),
    #[error("neighbour count {count} exceeds degree {degree}")]
    CountExceedsDegree { count: usize, degree: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("infeasible network state (p_f={p_f}, p_ff={p_ff}): {reason}")]
    InfeasibleState { p_f: f64, p_ff: f64, reason: &'static str },
    #[error("degree k={0} too small for pair closure (need k >= 3)")]
    DegreeTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EssError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("degenerate payoff configuration: {0}")]
    Degenerate(String),
    #[error("invalid degree descriptor: {0}")]
    InvalidDegree(String),
    #[error("({p_f}, {p_ff}) is not a fixed point: p_f'={pf_dot:e}, p_ff'={pff_dot:e}")]
    NotFixedPoint { p_f: f64, p_ff: f64, pf_dot: f64, pff_dot: f64 },
    #[error("stable state {0} has no interior inversion; need 0 < p* < 1")]
    BoundaryTarget(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("invalid simulation config: {0}")]
    Config(String),
}
