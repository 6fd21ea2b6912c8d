//! Agent-based simulation of strategy updates on a graph.
//!
//! One update event changes the strategy of at most one user. A generation
//! is `N` events, which moves `p_f` by at most one unit of `1/N` per event
//! and matches the time scale of the analytical drifts.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::game::{PayoffMatrix, SelectionParams, Strategy};
use crate::graph::{Graph, GraphSpec};
use crate::rng::{derive_seed, rng_from_seed, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UpdateRule {
    /// Imitation: a uniform user copies itself or a neighbour, chosen in
    /// proportion to fitness.
    Im,
    /// Birth-death: a fitness-chosen user overwrites a uniform neighbour.
    Bd,
    /// Death-birth: a uniform user copies a fitness-chosen neighbour.
    Db,
}

impl FromStr for UpdateRule {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "im" => Ok(UpdateRule::Im),
            "bd" => Ok(UpdateRule::Bd),
            "db" => Ok(UpdateRule::Db),
            other => Err(SimError::Config(format!("unknown update rule {other:?} (expected IM, BD or DB)"))),
        }
    }
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UpdateRule::Im => "IM",
            UpdateRule::Bd => "BD",
            UpdateRule::Db => "DB",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rule: UpdateRule,
    pub alpha: f64,
    pub payoff: PayoffMatrix,
    pub initial_pf: f64,
    /// Generation budget; each generation is `N` update events.
    pub max_steps: u64,
    /// Number of sampled generations inspected by the steadiness test.
    pub window: usize,
    pub steady_tol: f64,
    pub seed: u64,
}

impl SimConfig {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_INITIAL_PF: f64 = 0.5;
    pub const DEFAULT_MAX_STEPS: u64 = 2000;
    pub const DEFAULT_WINDOW: usize = 50;
    pub const DEFAULT_TOL: f64 = 5e-3;

    pub fn new(rule: UpdateRule, payoff: PayoffMatrix, seed: u64) -> Self {
        SimConfig {
            rule,
            alpha: Self::DEFAULT_ALPHA,
            payoff,
            initial_pf: Self::DEFAULT_INITIAL_PF,
            max_steps: Self::DEFAULT_MAX_STEPS,
            window: Self::DEFAULT_WINDOW,
            steady_tol: Self::DEFAULT_TOL,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SimError::Config(format!("alpha {} must lie in (0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.initial_pf) {
            return Err(SimError::Config(format!("initial p_f {} must lie in [0, 1]", self.initial_pf)));
        }
        if self.window < 2 {
            return Err(SimError::Config(format!("window {} must be at least 2", self.window)));
        }
        if !(self.steady_tol > 0.0) {
            return Err(SimError::Config(format!("steadiness tolerance {} must be positive", self.steady_tol)));
        }
        Ok(())
    }

    pub fn selection(&self) -> Result<SelectionParams, SimError> {
        Ok(SelectionParams::new(self.alpha)?)
    }
}

/// Fenwick tree over node fitness for birth-death selection.
#[derive(Debug, Clone)]
struct FitnessTree {
    key: (u64, [u64; 3]),
    values: Vec<f64>,
    tree: Vec<f64>,
}

impl FitnessTree {
    fn key(cfg: &SimConfig) -> (u64, [u64; 3]) {
        let u = &cfg.payoff;
        (cfg.alpha.to_bits(), [u.u_ff().to_bits(), u.u_fn().to_bits(), u.u_nn().to_bits()])
    }

    fn build(values: Vec<f64>, key: (u64, [u64; 3])) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        for (i, v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        FitnessTree { key, values, tree }
    }

    fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.values[i];
        self.values[i] = value;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut j = self.values.len();
        let mut s = 0.0;
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s
    }

    /// Index whose cumulative weight interval contains `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        // rounding can push past the last positive weight
        let mut i = pos.min(n - 1);
        while self.values[i] <= 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

/// Strategies plus incrementally maintained node and edge counters.
#[derive(Debug, Clone)]
pub struct SimState {
    strategies: Vec<Strategy>,
    forward_neighbors: Vec<u32>,
    count_f: usize,
    count_ff: usize,
    count_fn: usize,
    count_nn: usize,
    step: u64,
    tree: Option<FitnessTree>,
}

/// From-scratch counts `(count_f, count_ff, count_fn, count_nn)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub f: usize,
    pub ff: usize,
    pub fnn: usize,
    pub nn: usize,
}

/// Result of one update event: the user whose strategy was (re)assigned
/// and the strategy it holds afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Update {
    pub node: usize,
    pub strategy: Strategy,
    pub changed: bool,
}

impl SimState {
    pub fn from_strategies(g: &Graph, strategies: Vec<Strategy>) -> Result<Self, SimError> {
        if strategies.len() != g.node_count() {
            return Err(SimError::Config(format!(
                "{} strategies for {} nodes",
                strategies.len(),
                g.node_count()
            )));
        }
        let mut s = SimState {
            strategies,
            forward_neighbors: Vec::new(),
            count_f: 0,
            count_ff: 0,
            count_fn: 0,
            count_nn: 0,
            step: 0,
            tree: None,
        };
        s.forward_neighbors = (0..g.node_count())
            .map(|v| g.neighbors(v).iter().filter(|&&u| s.strategies[u as usize].is_forward()).count() as u32)
            .collect();
        let c = s.recount(g);
        s.count_f = c.f;
        s.count_ff = c.ff;
        s.count_fn = c.fnn;
        s.count_nn = c.nn;
        Ok(s)
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn strategy(&self, v: usize) -> Strategy {
        self.strategies[v]
    }

    pub fn count_f(&self) -> usize {
        self.count_f
    }

    pub fn count_ff(&self) -> usize {
        self.count_ff
    }

    pub fn count_fn(&self) -> usize {
        self.count_fn
    }

    pub fn count_nn(&self) -> usize {
        self.count_nn
    }

    /// Update events applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn counts(&self) -> Counts {
        Counts { f: self.count_f, ff: self.count_ff, fnn: self.count_fn, nn: self.count_nn }
    }

    pub fn recount(&self, g: &Graph) -> Counts {
        let f = self.strategies.iter().filter(|s| s.is_forward()).count();
        let (mut ff, mut fnn, mut nn) = (0, 0, 0);
        for (u, v) in g.edges() {
            match (self.strategies[u].is_forward(), self.strategies[v].is_forward()) {
                (true, true) => ff += 1,
                (false, false) => nn += 1,
                _ => fnn += 1,
            }
        }
        Counts { f, ff, fnn, nn }
    }

    pub fn p_f(&self) -> f64 {
        if self.strategies.is_empty() {
            0.0
        } else {
            self.count_f as f64 / self.strategies.len() as f64
        }
    }

    /// Edge fractions `(p_ff, p_fn, p_nn)`; zero on an edgeless graph.
    pub fn edge_fractions(&self) -> (f64, f64, f64) {
        let e = self.count_ff + self.count_fn + self.count_nn;
        if e == 0 {
            return (0.0, 0.0, 0.0);
        }
        let e = e as f64;
        (self.count_ff as f64 / e, self.count_fn as f64 / e, self.count_nn as f64 / e)
    }

    pub fn is_absorbed(&self) -> bool {
        self.count_f == 0 || self.count_f == self.strategies.len()
    }

    fn fitness_with(&self, g: &Graph, v: usize, sel: &SelectionParams, u: &PayoffMatrix) -> f64 {
        let nf = self.forward_neighbors[v] as f64;
        let nn = g.degree(v) as f64 - nf;
        let payoff = match self.strategies[v] {
            Strategy::Forward => nf * u.u_ff() + nn * u.u_fn(),
            Strategy::NotForward => nf * u.u_fn() + nn * u.u_nn(),
        };
        sel.fitness(payoff)
    }

    fn ensure_tree(&mut self, g: &Graph, cfg: &SimConfig, sel: &SelectionParams) {
        let key = FitnessTree::key(cfg);
        if self.tree.as_ref().is_none_or(|t| t.key != key) {
            self.rebuild_tree(g, cfg, sel);
        }
    }

    fn rebuild_tree(&mut self, g: &Graph, cfg: &SimConfig, sel: &SelectionParams) {
        let values = (0..g.node_count()).map(|v| self.fitness_with(g, v, sel, &cfg.payoff)).collect();
        self.tree = Some(FitnessTree::build(values, FitnessTree::key(cfg)));
    }

    /// Assigns `strategy` to `v`, updating every counter in `O(deg v)`.
    fn assign(&mut self, g: &Graph, v: usize, strategy: Strategy, cfg: &SimConfig, sel: &SelectionParams) -> Update {
        let old = self.strategies[v];
        if old == strategy {
            return Update { node: v, strategy, changed: false };
        }
        self.strategies[v] = strategy;
        let nf = self.forward_neighbors[v] as usize;
        let nn = g.degree(v) - nf;
        if strategy.is_forward() {
            self.count_f += 1;
            // n-n edges become f-n, f-n edges become f-f
            self.count_nn -= nn;
            self.count_fn += nn;
            self.count_fn -= nf;
            self.count_ff += nf;
        } else {
            self.count_f -= 1;
            self.count_ff -= nf;
            self.count_fn += nf;
            self.count_fn -= nn;
            self.count_nn += nn;
        }
        for &u in g.neighbors(v) {
            let u = u as usize;
            if strategy.is_forward() {
                self.forward_neighbors[u] += 1;
            } else {
                self.forward_neighbors[u] -= 1;
            }
        }
        if let Some(mut tree) = self.tree.take() {
            tree.set(v, self.fitness_with(g, v, sel, &cfg.payoff));
            for &u in g.neighbors(v) {
                tree.set(u as usize, self.fitness_with(g, u as usize, sel, &cfg.payoff));
            }
            self.tree = Some(tree);
        }
        Update { node: v, strategy, changed: true }
    }
}

/// Each node independently forwards with probability `initial_pf`.
pub fn init_strategies(g: &Graph, initial_pf: f64, seed: u64) -> Result<SimState, SimError> {
    init_with_rng(g, initial_pf, &mut rng_from_seed(seed))
}

fn init_with_rng(g: &Graph, initial_pf: f64, rng: &mut SimRng) -> Result<SimState, SimError> {
    if !(0.0..=1.0).contains(&initial_pf) {
        return Err(SimError::Config(format!("initial p_f {initial_pf} must lie in [0, 1]")));
    }
    let strategies = (0..g.node_count())
        .map(|_| if rng.gen::<f64>() < initial_pf { Strategy::Forward } else { Strategy::NotForward })
        .collect();
    SimState::from_strategies(g, strategies)
}

/// `(1 - alpha) + alpha * (payoff summed over the neighbourhood of v)`.
pub fn node_fitness(g: &Graph, s: &SimState, v: usize, cfg: &SimConfig) -> Result<f64, SimError> {
    Ok(s.fitness_with(g, v, &cfg.selection()?, &cfg.payoff))
}

pub fn step_im(g: &Graph, s: &mut SimState, cfg: &SimConfig, rng: &mut SimRng) -> Result<Option<Update>, SimError> {
    let sel = cfg.selection()?;
    Ok(im(g, s, cfg, &sel, rng))
}

pub fn step_bd(g: &Graph, s: &mut SimState, cfg: &SimConfig, rng: &mut SimRng) -> Result<Option<Update>, SimError> {
    let sel = cfg.selection()?;
    Ok(bd(g, s, cfg, &sel, rng))
}

pub fn step_db(g: &Graph, s: &mut SimState, cfg: &SimConfig, rng: &mut SimRng) -> Result<Option<Update>, SimError> {
    let sel = cfg.selection()?;
    Ok(db(g, s, cfg, &sel, rng))
}

/// One event of the configured rule. `None` when the event is a no-op on an
/// isolated user.
pub fn step(g: &Graph, s: &mut SimState, cfg: &SimConfig, rng: &mut SimRng) -> Result<Option<Update>, SimError> {
    let sel = cfg.selection()?;
    Ok(dispatch(g, s, cfg, &sel, rng))
}

fn dispatch(g: &Graph, s: &mut SimState, cfg: &SimConfig, sel: &SelectionParams, rng: &mut SimRng) -> Option<Update> {
    match cfg.rule {
        UpdateRule::Im => im(g, s, cfg, sel, rng),
        UpdateRule::Bd => bd(g, s, cfg, sel, rng),
        UpdateRule::Db => db(g, s, cfg, sel, rng),
    }
}

fn finish(s: &mut SimState, update: Option<Update>) -> Option<Update> {
    s.step += 1;
    update
}

fn im(g: &Graph, s: &mut SimState, cfg: &SimConfig, sel: &SelectionParams, rng: &mut SimRng) -> Option<Update> {
    if g.node_count() == 0 {
        return None;
    }
    let v = rng.gen_range(0..g.node_count());
    let nbrs = g.neighbors(v);
    if nbrs.is_empty() {
        return finish(s, None);
    }
    let u = &cfg.payoff;
    let own = s.fitness_with(g, v, sel, u);
    let total = own + nbrs.iter().map(|&w| s.fitness_with(g, w as usize, sel, u)).sum::<f64>();
    let target = rng.gen::<f64>() * total;
    let mut acc = own;
    let mut chosen = s.strategies[v];
    if target >= acc {
        for &w in nbrs {
            chosen = s.strategies[w as usize];
            acc += s.fitness_with(g, w as usize, sel, u);
            if target < acc {
                break;
            }
        }
    }
    let up = s.assign(g, v, chosen, cfg, sel);
    finish(s, Some(up))
}

fn db(g: &Graph, s: &mut SimState, cfg: &SimConfig, sel: &SelectionParams, rng: &mut SimRng) -> Option<Update> {
    if g.node_count() == 0 {
        return None;
    }
    let v = rng.gen_range(0..g.node_count());
    let nbrs = g.neighbors(v);
    if nbrs.is_empty() {
        return finish(s, None);
    }
    let u = &cfg.payoff;
    let total: f64 = nbrs.iter().map(|&w| s.fitness_with(g, w as usize, sel, u)).sum();
    let chosen = if total > 0.0 {
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = s.strategies[nbrs[nbrs.len() - 1] as usize];
        for &w in nbrs {
            acc += s.fitness_with(g, w as usize, sel, u);
            if target < acc {
                chosen = s.strategies[w as usize];
                break;
            }
        }
        chosen
    } else {
        s.strategies[nbrs[rng.gen_range(0..nbrs.len())] as usize]
    };
    let up = s.assign(g, v, chosen, cfg, sel);
    finish(s, Some(up))
}

fn bd(g: &Graph, s: &mut SimState, cfg: &SimConfig, sel: &SelectionParams, rng: &mut SimRng) -> Option<Update> {
    if g.node_count() == 0 {
        return None;
    }
    s.ensure_tree(g, cfg, sel);
    let tree = s.tree.as_ref().expect("tree built");
    let total = tree.total();
    let parent = if total > 0.0 {
        tree.find(rng.gen::<f64>() * total)
    } else {
        rng.gen_range(0..g.node_count())
    };
    let nbrs = g.neighbors(parent);
    if nbrs.is_empty() {
        return finish(s, None);
    }
    let child = nbrs[rng.gen_range(0..nbrs.len())] as usize;
    let up = s.assign(g, child, s.strategies[parent], cfg, sel);
    finish(s, Some(up))
}

/// Half-window mean comparison on the last sampled generations.
pub fn detect_steady(window: &[f64], tol: f64) -> bool {
    if window.len() < 2 {
        return false;
    }
    let half = window.len() / 2;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    (mean(&window[..half]) - mean(&window[half..])).abs() < tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    AbsorbedAllF,
    AbsorbedAllN,
    Steady,
    MaxSteps,
}

impl std::fmt::Display for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Terminal::AbsorbedAllF => "absorbed_all_f",
            Terminal::AbsorbedAllN => "absorbed_all_n",
            Terminal::Steady => "steady",
            Terminal::MaxSteps => "max_steps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Update events applied when the sample was taken.
    pub step: u64,
    pub p_f: f64,
    pub p_ff: f64,
    pub p_fn: f64,
    pub p_nn: f64,
}

impl Sample {
    fn of(s: &SimState) -> Self {
        let (p_ff, p_fn, p_nn) = s.edge_fractions();
        Sample { step: s.step, p_f: s.p_f(), p_ff, p_fn, p_nn }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub terminal: Terminal,
    /// Exact on absorption, otherwise the mean `p_f` over the last window.
    pub final_pf: f64,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,p_f,p_ff,p_fn,p_nn")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{},{}", s.step, s.p_f, s.p_ff, s.p_fn, s.p_nn)?;
        }
        Ok(())
    }
}

/// Runs the configured rule until absorption, steadiness or the generation
/// budget, sampling once per generation.
pub fn run(g: &Graph, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    if g.node_count() == 0 {
        return Err(SimError::Config("cannot simulate on an empty graph".into()));
    }
    let sel = cfg.selection()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut s = init_with_rng(g, cfg.initial_pf, &mut rng)?;
    let n = g.node_count() as u64;
    let mut samples = vec![Sample::of(&s)];
    let mut generation = 0u64;

    let terminal = loop {
        if s.is_absorbed() {
            break if s.count_f == 0 { Terminal::AbsorbedAllN } else { Terminal::AbsorbedAllF };
        }
        if generation >= cfg.max_steps {
            break Terminal::MaxSteps;
        }
        if cfg.rule == UpdateRule::Bd {
            // bound the rounding drift of the incremental fitness sums
            s.rebuild_tree(g, cfg, &sel);
        }
        for _ in 0..n {
            dispatch(g, &mut s, cfg, &sel, &mut rng);
            #[cfg(debug_assertions)]
            if s.step % 10_000 == 0 {
                assert_eq!(s.counts(), s.recount(g), "counter drift at step {}", s.step);
            }
            if s.is_absorbed() {
                break;
            }
        }
        generation += 1;
        samples.push(Sample::of(&s));
        if s.is_absorbed() {
            continue;
        }
        if samples.len() >= cfg.window {
            let tail: Vec<f64> = samples[samples.len() - cfg.window..].iter().map(|x| x.p_f).collect();
            if detect_steady(&tail, cfg.steady_tol) {
                break Terminal::Steady;
            }
        }
    };
    assert_eq!(s.counts(), s.recount(g), "counter drift at termination");

    let final_pf = match terminal {
        Terminal::AbsorbedAllF => 1.0,
        Terminal::AbsorbedAllN => 0.0,
        Terminal::Steady | Terminal::MaxSteps => {
            let tail = &samples[samples.len().saturating_sub(cfg.window)..];
            tail.iter().map(|x| x.p_f).sum::<f64>() / tail.len() as f64
        }
    };
    Ok(Trajectory { samples, terminal, final_pf })
}

/// Where ensemble members get their graph.
#[derive(Debug, Clone, Copy)]
pub enum GraphSource<'a> {
    Fixed(&'a Graph),
    /// A fresh realisation every `regen_every` runs, seeded from `seed`.
    Generated { spec: GraphSpec, seed: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalCounts {
    pub absorbed_all_f: usize,
    pub absorbed_all_n: usize,
    pub steady: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: SimConfig,
    pub runs: usize,
    pub regen_every: usize,
    pub mean_final_pf: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_final_pf: f64,
    pub per_run_final: Vec<f64>,
    pub terminals: TerminalCounts,
}

fn member_config(cfg: &SimConfig, i: usize) -> SimConfig {
    SimConfig { seed: derive_seed(cfg.seed, Stream::Run, i as u64), ..*cfg }
}

fn block_seed(seed: u64, block: usize) -> u64 {
    derive_seed(seed, Stream::Graph, block as u64)
}

/// Replays member `i` of the ensemble [`run_ensemble`] would produce with
/// the same arguments, returning its full trajectory.
pub fn ensemble_member(
    source: GraphSource<'_>,
    cfg: &SimConfig,
    regen_every: usize,
    i: usize,
) -> Result<Trajectory, SimError> {
    if regen_every == 0 {
        return Err(SimError::Config("regen_every must be at least 1".into()));
    }
    match source {
        GraphSource::Fixed(g) => run(g, &member_config(cfg, i)),
        GraphSource::Generated { spec, seed } => {
            let g = spec.generate(block_seed(seed, i / regen_every))?;
            run(&g, &member_config(cfg, i))
        }
    }
}

/// Independent runs with seeds derived from `(cfg.seed, run index)`.
pub fn run_ensemble(
    source: GraphSource<'_>,
    cfg: &SimConfig,
    runs: usize,
    regen_every: usize,
) -> Result<EnsembleResult, SimError> {
    cfg.validate()?;
    if runs == 0 {
        return Err(SimError::Config("runs must be at least 1".into()));
    }
    if regen_every == 0 {
        return Err(SimError::Config("regen_every must be at least 1".into()));
    }
    let one = |g: &Graph, i: usize| run(g, &member_config(cfg, i));
    let trajectories: Vec<Trajectory> = match source {
        GraphSource::Fixed(g) => (0..runs).into_par_iter().map(|i| one(g, i)).collect::<Result<_, _>>()?,
        GraphSource::Generated { spec, seed } => {
            let blocks = runs.div_ceil(regen_every);
            let per_block: Vec<Vec<Trajectory>> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let g = spec.generate(block_seed(seed, b))?;
                    let end = ((b + 1) * regen_every).min(runs);
                    (b * regen_every..end).into_par_iter().map(|i| one(&g, i)).collect()
                })
                .collect::<Result<_, SimError>>()?;
            per_block.into_iter().flatten().collect()
        }
    };

    let mut terminals = TerminalCounts::default();
    for t in &trajectories {
        match t.terminal {
            Terminal::AbsorbedAllF => terminals.absorbed_all_f += 1,
            Terminal::AbsorbedAllN => terminals.absorbed_all_n += 1,
            Terminal::Steady => terminals.steady += 1,
            Terminal::MaxSteps => terminals.max_steps += 1,
        }
    }
    let per_run_final: Vec<f64> = trajectories.iter().map(|t| t.final_pf).collect();
    let mean = per_run_final.iter().sum::<f64>() / runs as f64;
    let std = if runs > 1 {
        (per_run_final.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleResult {
        config: *cfg,
        runs,
        regen_every,
        mean_final_pf: mean,
        std_final_pf: std,
        per_run_final,
        terminals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_regular;
    use Strategy::{Forward as F, NotForward as N};

    fn cfg(rule: UpdateRule, alpha: f64, pm: u8) -> SimConfig {
        SimConfig { alpha, ..SimConfig::new(rule, PayoffMatrix::preset(pm).unwrap(), 7) }
    }

    #[test]
    fn init_examples() {
        let g = build_regular(1000, 10, 1).unwrap();
        let all = init_strategies(&g, 1.0, 3).unwrap();
        assert_eq!(all.count_f(), 1000);
        assert_eq!(all.count_ff(), g.edge_count());
        let none = init_strategies(&g, 0.0, 3).unwrap();
        assert_eq!(none.count_f(), 0);
        let half = init_strategies(&g, 0.5, 3).unwrap();
        assert!((400..=600).contains(&half.count_f()));
        assert_eq!(half.counts(), half.recount(&g));
        assert_eq!(init_strategies(&g, 0.5, 3).unwrap().strategies(), half.strategies());
    }

    #[test]
    fn node_fitness_examples() {
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let s = SimState::from_strategies(&g, vec![F, F, F, N, N]).unwrap();
        let c = cfg(UpdateRule::Im, 0.5, 1);
        assert!((node_fitness(&g, &s, 0, &c).unwrap() - 1.6).abs() < 1e-12);
        let c = cfg(UpdateRule::Im, 0.3, 1);
        assert!((node_fitness(&g, &s, 4, &c).unwrap() - 0.7).abs() < 1e-12);
        let c = cfg(UpdateRule::Im, 0.0, 1);
        for v in 0..5 {
            assert_eq!(node_fitness(&g, &s, v, &c).unwrap(), 1.0);
        }
    }

    #[test]
    fn fenwick_selection_matches_weights() {
        let t = FitnessTree::build(vec![1.0, 0.0, 2.0, 3.0, 0.5], (0, [0; 3]));
        assert!((t.total() - 6.5).abs() < 1e-12);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.2), 4);
        assert_eq!(t.find(6.5), 4);
    }

    #[test]
    fn absorbing_states_are_never_left() {
        let g = build_regular(50, 4, 2).unwrap();
        for rule in [UpdateRule::Im, UpdateRule::Bd, UpdateRule::Db] {
            for init in [vec![F; 50], vec![N; 50]] {
                let mut s = SimState::from_strategies(&g, init.clone()).unwrap();
                let mut rng = rng_from_seed(1);
                for _ in 0..2000 {
                    step(&g, &mut s, &cfg(rule, 0.5, 2), &mut rng).unwrap();
                }
                assert_eq!(s.strategies(), &init[..]);
            }
        }
    }

    #[test]
    fn two_node_birth_death() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let c = cfg(UpdateRule::Bd, 1.0, 1);
        let mut rng = rng_from_seed(11);
        let trials = 20_000;
        let mut converted = 0;
        for _ in 0..trials {
            let mut s = SimState::from_strategies(&g, vec![F, N]).unwrap();
            step_bd(&g, &mut s, &c, &mut rng).unwrap();
            converted += usize::from(s.strategy(1) == F);
        }
        let p = converted as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.02, "{p}");
    }

    #[test]
    fn death_birth_proportional_choice() {
        // node 0 (S_n) with neighbours 1 (S_f) and 2 (S_n); the payoffs give
        // node 1 fitness 2 and node 2 fitness 1 at alpha = 1
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 3)]).unwrap();
        let u = PayoffMatrix::new(0.5, 0.5, 0.25).unwrap();
        let c = SimConfig { alpha: 1.0, ..SimConfig::new(UpdateRule::Db, u, 0) };
        let base = SimState::from_strategies(&g, vec![N, F, N, F, F]).unwrap();
        assert!((node_fitness(&g, &base, 1, &c).unwrap() - 1.5).abs() < 1e-12);
        // node 1: neighbours 0 (n), 3 (f), 4 (f) -> 0.5 + 0.5 + 0.5 = 1.5
        // node 2: neighbours 0 (n), 3 (f) -> 0.25 + 0.5 = 0.75
        let mut rng = rng_from_seed(5);
        let (mut hits, mut adopted) = (0, 0);
        while hits < 30_000 {
            let mut s = base.clone();
            if let Some(up) = step_db(&g, &mut s, &c, &mut rng).unwrap() {
                if up.node == 0 {
                    hits += 1;
                    adopted += usize::from(up.strategy == F);
                }
            }
        }
        let p = adopted as f64 / hits as f64;
        assert!((p - 2.0 / 3.0).abs() < 0.015, "{p}");
    }

    #[test]
    fn isolated_focal_is_a_no_op() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let c = cfg(UpdateRule::Im, 0.3, 2);
        let mut s = SimState::from_strategies(&g, vec![F, N, N]).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            for rule in [UpdateRule::Im, UpdateRule::Bd, UpdateRule::Db] {
                if let Some(up) = step(&g, &mut s, &SimConfig { rule, ..c }, &mut rng).unwrap() {
                    assert_ne!(up.node, 2);
                }
            }
        }
        assert_eq!(s.strategy(2), N);
    }

    #[test]
    fn counters_track_recount_under_all_rules() {
        let g = crate::graph::build_erdos_renyi(200, 6.0, 4).unwrap();
        for rule in [UpdateRule::Im, UpdateRule::Bd, UpdateRule::Db] {
            let c = cfg(rule, 0.4, 3);
            let mut s = init_strategies(&g, 0.5, 9).unwrap();
            let mut rng = rng_from_seed(8);
            for i in 0..20_000 {
                let before = s.count_f();
                step(&g, &mut s, &c, &mut rng).unwrap();
                assert!(s.count_f().abs_diff(before) <= 1);
                if i % 1000 == 0 {
                    assert_eq!(s.counts(), s.recount(&g));
                }
            }
            assert_eq!(s.counts(), s.recount(&g));
            assert_eq!(s.step(), 20_000);
        }
    }

    #[test]
    fn detect_steady_examples() {
        assert!(detect_steady(&[0.4; 10], 1e-3));
        let ramp: Vec<f64> = (0..50).map(|i| 0.01 * i as f64).collect();
        assert!(!detect_steady(&ramp, 5e-3));
        let noisy: Vec<f64> = (0..50).map(|i| 0.5 + 1e-5 * ((i * 7919 % 13) as f64 - 6.0)).collect();
        assert!(detect_steady(&noisy, 5e-3));
        assert!(!detect_steady(&[0.5], 1.0));
    }

    #[test]
    fn run_edge_cases() {
        let g = build_regular(100, 4, 5).unwrap();
        let c = SimConfig { initial_pf: 0.0, ..cfg(UpdateRule::Im, 0.1, 2) };
        let t = run(&g, &c).unwrap();
        assert_eq!(t.terminal, Terminal::AbsorbedAllN);
        assert_eq!(t.final_pf, 0.0);
        assert_eq!(t.samples.len(), 1);

        let c = SimConfig { max_steps: 0, ..cfg(UpdateRule::Im, 0.1, 2) };
        let t = run(&g, &c).unwrap();
        assert_eq!(t.terminal, Terminal::MaxSteps);
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.final_pf, t.samples[0].p_f);

        assert!(run(&g, &SimConfig { alpha: 0.0, ..c }).is_err());
        assert!(run(&g, &SimConfig { window: 1, ..c }).is_err());
    }

    #[test]
    fn run_is_deterministic() {
        let g = build_regular(200, 6, 5).unwrap();
        for rule in [UpdateRule::Im, UpdateRule::Bd, UpdateRule::Db] {
            let c = SimConfig { max_steps: 30, ..cfg(rule, 0.1, 2) };
            assert_eq!(run(&g, &c).unwrap(), run(&g, &c).unwrap());
        }
    }

    #[test]
    fn ensemble_basics() {
        let g = build_regular(100, 4, 5).unwrap();
        let c = SimConfig { max_steps: 20, ..cfg(UpdateRule::Im, 0.1, 2) };
        let one = run_ensemble(GraphSource::Fixed(&g), &c, 1, 1).unwrap();
        assert_eq!(one.std_final_pf, 0.0);
        assert_eq!(one.mean_final_pf, one.per_run_final[0]);
        let src = GraphSource::Generated { spec: GraphSpec::Regular { n: 100, k: 4 }, seed: 3 };
        let a = run_ensemble(src, &c, 6, 4).unwrap();
        let b = run_ensemble(src, &c, 6, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_run_final.len(), 6);
        assert!(run_ensemble(src, &c, 0, 4).is_err());
        for i in [0, 5] {
            assert_eq!(ensemble_member(src, &c, 4, i).unwrap().final_pf, a.per_run_final[i]);
        }
    }
}
