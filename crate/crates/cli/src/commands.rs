use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use evodiff::ess::{self, DegreeMoments, DegreeProfile, InversionMode, LogBase, StabilityProbe};
use evodiff::graph::read_edge_list;
use evodiff::sim::{self, GraphSource, SimConfig, UpdateRule};
use evodiff::{Graph, GraphSpec, PayoffMatrix};
use serde::Serialize;

use crate::args::*;
use crate::error::CliError;
use crate::report::*;

type Result<T> = std::result::Result<T, CliError>;

fn precondition(msg: impl Into<String>) -> CliError {
    CliError::Precondition(msg.into())
}

/// Graph source after validation.
enum Source {
    Generated(GraphSpec),
    Loaded { graph: Graph, echo: GraphEcho },
}

impl Source {
    fn echo(&self) -> GraphEcho {
        match self {
            Source::Generated(spec) => GraphEcho::Generated { spec: *spec },
            Source::Loaded { echo, .. } => echo.clone(),
        }
    }

    fn node_count(&self) -> usize {
        match self {
            Source::Generated(spec) => spec.node_count(),
            Source::Loaded { graph, .. } => graph.node_count(),
        }
    }

    /// `Some(k)` when every user has degree `k`.
    fn uniform_degree(&self) -> Option<usize> {
        match self {
            Source::Generated(GraphSpec::Regular { k, .. }) => Some(*k),
            Source::Generated(_) => None,
            Source::Loaded { graph, .. } => (graph.min_degree() == graph.max_degree()).then(|| graph.max_degree()),
        }
    }

    fn default_rule(&self) -> UpdateRule {
        match self {
            Source::Generated(GraphSpec::Regular { .. }) => UpdateRule::Im,
            _ => UpdateRule::Bd,
        }
    }
}

fn load_graph(path: &Path) -> Result<(Graph, GraphEcho)> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let loaded = read_edge_list(BufReader::new(file))?;
    let stats = loaded.graph.degree_stats();
    let echo = GraphEcho::Loaded {
        path: path.to_path_buf(),
        node_count: loaded.graph.node_count(),
        edge_count: loaded.graph.edge_count(),
        records_dropped: loaded.dropped(),
        mean_degree: stats.mean_degree,
        second_moment: stats.second_moment,
    };
    Ok((loaded.graph, echo))
}

fn graph_spec(args: &GraphArgs) -> Result<Option<GraphSpec>> {
    let Some(family) = args.family else {
        return Ok(None);
    };
    let spec = match family {
        Family::Regular => GraphSpec::Regular {
            n: args.n,
            k: args.k.ok_or_else(|| precondition("--family regular needs --k"))?,
        },
        Family::Er => GraphSpec::ErdosRenyi {
            n: args.n,
            mean_degree: args.kavg.ok_or_else(|| precondition("--family er needs --kavg"))?,
        },
        Family::Ba => GraphSpec::BarabasiAlbert {
            n: args.n,
            m: args.m.ok_or_else(|| precondition("--family ba needs --m"))?,
        },
    };
    Ok(Some(spec))
}

fn resolve_source(args: &GraphArgs) -> Result<Source> {
    if let Some(path) = &args.edges {
        let (graph, echo) = load_graph(path)?;
        return Ok(Source::Loaded { graph, echo });
    }
    match graph_spec(args)? {
        Some(spec) => Ok(Source::Generated(spec)),
        None => Err(precondition("one of --family or --edges is required")),
    }
}

fn resolve_payoff(args: &PayoffArgs) -> Result<PayoffMatrix> {
    match (args.pm, args.uff, args.ufn, args.unn) {
        (Some(pm), ..) => Ok(PayoffMatrix::preset(pm)?),
        (None, Some(ff), Some(fnn), Some(nn)) => Ok(PayoffMatrix::new(ff, fnn, nn)?),
        _ => Err(precondition("a payoff is required: --pm 1..4 or --uff/--ufn/--unn")),
    }
}

fn rule_of(rule: Rule) -> UpdateRule {
    match rule {
        Rule::Im => UpdateRule::Im,
        Rule::Bd => UpdateRule::Bd,
        Rule::Db => UpdateRule::Db,
    }
}

/// Mean degree used by the BA prediction: `--kavg`, else `2m`.
fn ba_mean_degree(spec: &GraphSpec, kavg: Option<f64>) -> f64 {
    kavg.unwrap_or_else(|| spec.nominal_mean_degree())
}

/// Degree profile matching the closed form used for `source` and `rule`.
fn profile_for(source: &Source, rule: UpdateRule, kavg: Option<f64>) -> Result<Option<DegreeProfile>> {
    Ok(match (rule, source) {
        (UpdateRule::Im, s) => s.uniform_degree().map(|k| DegreeProfile::Uniform { k }),
        (UpdateRule::Bd, Source::Generated(spec)) => Some(DegreeProfile::Moments(match *spec {
            GraphSpec::Regular { k, .. } => DegreeMoments::new(k as f64, (k * k) as f64)?,
            GraphSpec::ErdosRenyi { mean_degree, .. } => DegreeMoments::erdos_renyi(mean_degree)?,
            GraphSpec::BarabasiAlbert { n, .. } => {
                let kbar = ba_mean_degree(spec, kavg);
                DegreeMoments { mean_degree: kbar, second_moment: kbar * kbar * (n as f64).ln() / 4.0 }
            }
        })),
        (UpdateRule::Bd, Source::Loaded { graph, .. }) => {
            Some(DegreeProfile::Moments(DegreeMoments::from(&graph.degree_stats())))
        }
        (UpdateRule::Db, _) => None,
    })
}

/// Closed-form prediction for the given graph under `rule`, if one exists.
fn theory(source: &Source, rule: UpdateRule, kavg: Option<f64>, u: &PayoffMatrix) -> Result<Option<Theory>> {
    let Some(profile) = profile_for(source, rule, kavg)? else {
        return Ok(None);
    };
    let probe = StabilityProbe::weak(profile.kappa(), source.node_count().max(1))?;
    let (model, ess) = match (&profile, source) {
        (DegreeProfile::Uniform { k }, _) => ("uniform_imitation", ess::ess_uniform(u, *k, &probe)?),
        (DegreeProfile::Moments(_), Source::Generated(GraphSpec::ErdosRenyi { mean_degree, .. })) => {
            ("erdos_renyi_birth_death", ess::ess_er(u, *mean_degree, &probe)?)
        }
        (DegreeProfile::Moments(_), Source::Generated(spec @ GraphSpec::BarabasiAlbert { n, .. })) => {
            let kbar = ba_mean_degree(spec, kavg);
            ("barabasi_albert_birth_death", ess::ess_ba(u, kbar, *n, LogBase::Natural, &probe)?)
        }
        (DegreeProfile::Moments(m), Source::Generated(GraphSpec::Regular { .. })) => {
            ("regular_birth_death", ess::ess_nonuniform(u, m, &probe)?)
        }
        (DegreeProfile::Moments(m), Source::Loaded { .. }) => {
            ("measured_moments_birth_death", ess::ess_nonuniform(u, m, &probe)?)
        }
    };
    Ok(Some(Theory { model, ess, large_degree_approx: ess::ess_approx_large_k(u).ok() }))
}

fn sim_config(exec: &ExecArgs, rule: UpdateRule, u: PayoffMatrix) -> Result<SimConfig> {
    let cfg = SimConfig {
        rule,
        alpha: exec.alpha,
        payoff: u,
        initial_pf: exec.initial_pf,
        max_steps: exec.max_gens,
        window: exec.window,
        steady_tol: exec.tol,
        seed: exec.seed,
    };
    cfg.validate()?;
    if exec.runs == 0 {
        return Err(precondition("--runs must be at least 1"));
    }
    if exec.regen_every == 0 {
        return Err(precondition("--regen-every must be at least 1"));
    }
    Ok(cfg)
}

fn graph_source<'a>(source: &'a Source, seed: u64) -> GraphSource<'a> {
    match source {
        Source::Generated(spec) => GraphSource::Generated { spec: *spec, seed },
        Source::Loaded { graph, .. } => GraphSource::Fixed(graph),
    }
}

fn emit(output: &OutputArgs, table: impl FnOnce() -> String, record: &impl Serialize) -> Result<()> {
    let text = match output.format {
        Format::Table => table(),
        Format::Record => {
            let mut s = serde_json::to_string_pretty(record)?;
            s.push('\n');
            s
        }
    };
    write_text(output.out.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?);
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    if args.graph.edges.is_some() {
        return Err(precondition("generate takes a --family, not --edges"));
    }
    let spec = graph_spec(&args.graph)?.ok_or_else(|| precondition("generate needs --family"))?;
    let graph = spec.generate(args.seed)?;
    let mut buf = Vec::new();
    graph.write_edge_list(&mut buf)?;
    let stats = graph.degree_stats();
    let summary = format!(
        "nodes {}\nedges {}\nmean_degree {:.6}\nsecond_moment {:.6}\nmoment_ratio {:.6}\nmin_degree {}\nmax_degree {}\n",
        stats.node_count,
        graph.edge_count(),
        stats.mean_degree,
        stats.second_moment,
        stats.moment_ratio(),
        stats.min_degree(),
        stats.max_degree(),
    );
    match &args.out {
        Some(path) => {
            write_text(Some(path), std::str::from_utf8(&buf).expect("edge list is ascii"))?;
            write_text(None, &summary)
        }
        None => {
            write_text(None, std::str::from_utf8(&buf).expect("edge list is ascii"))?;
            eprint!("{summary}");
            Ok(())
        }
    }
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let source = resolve_source(&args.graph)?;
    let u = resolve_payoff(&args.payoff)?;
    let t = theory(&source, source.default_rule(), args.graph.kavg, &u)?;
    if t.is_none() {
        return Err(precondition("no closed form for a non-regular graph under imitation"));
    }
    let record = ReportRecord {
        command: "predict",
        graph: source.echo(),
        payoff: u,
        axis_value: None,
        theory: t,
        simulation: None,
    };
    emit(&args.output, || record.to_table(), &record)
}

fn simulate_record(
    command: &'static str,
    source: &Source,
    kavg: Option<f64>,
    u: PayoffMatrix,
    exec: &ExecArgs,
    with_sim: bool,
    axis_value: Option<f64>,
) -> Result<ReportRecord> {
    let rule = exec.rule.map(rule_of).unwrap_or_else(|| source.default_rule());
    let cfg = sim_config(exec, rule, u)?;
    let theory = theory(source, rule, kavg, &u)?;
    let simulation = if with_sim {
        Some(sim::run_ensemble(graph_source(source, exec.seed), &cfg, exec.runs, exec.regen_every)?)
    } else {
        None
    };
    Ok(ReportRecord { command, graph: source.echo(), payoff: u, axis_value, theory, simulation })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let source = resolve_source(&args.graph)?;
    let u = resolve_payoff(&args.payoff)?;
    let record = simulate_record("simulate", &source, args.graph.kavg, u, &args.exec, true, None)?;
    if let Some(path) = &args.trajectory {
        let cfg = record.simulation.as_ref().expect("simulation ran").config;
        let traj = sim::ensemble_member(graph_source(&source, args.exec.seed), &cfg, args.exec.regen_every, 0)?;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        write_text(Some(path), std::str::from_utf8(&buf).expect("csv is ascii"))?;
    }
    emit(&args.output, || record.to_table(), &record)
}

fn integral(value: f64, what: &str) -> Result<usize> {
    if value.fract() != 0.0 || value < 0.0 {
        return Err(precondition(format!("{what} must be a non-negative integer, got {value}")));
    }
    Ok(value as usize)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.values.is_empty() {
        return Err(precondition("--values must list at least one value"));
    }
    let mut records = Vec::with_capacity(args.values.len());
    for &value in &args.values {
        let mut graph = args.graph.clone();
        let mut payoff = args.payoff.clone();
        let mut exec = args.exec.clone();
        match args.axis {
            Axis::Degree => match graph.family {
                Some(Family::Regular) => graph.k = Some(integral(value, "degree")?),
                Some(Family::Er) => graph.kavg = Some(value),
                Some(Family::Ba) => {
                    let d = integral(value, "degree")?;
                    if d % 2 != 0 {
                        return Err(precondition(format!("BA mean degree {d} must be even (m = degree / 2)")));
                    }
                    graph.m = Some(d / 2);
                    graph.kavg = None;
                }
                None => return Err(precondition("a degree sweep needs --family")),
            },
            Axis::Alpha => exec.alpha = value,
            Axis::Payoff => {
                let pm = integral(value, "payoff preset")?;
                if !(1..=4).contains(&pm) {
                    return Err(precondition(format!("payoff preset {pm} outside 1..4")));
                }
                payoff = PayoffArgs { pm: Some(pm as u8), uff: None, ufn: None, unn: None };
            }
        }
        let source = resolve_source(&graph)?;
        let u = resolve_payoff(&payoff)?;
        records.push(simulate_record("sweep", &source, graph.kavg, u, &exec, !args.no_sim, Some(value))?);
    }
    emit(&args.output, || sweep_table(&records), &records)
}

pub fn stability(args: &StabilityArgs) -> Result<()> {
    let source = resolve_source(&args.graph)?;
    let u = resolve_payoff(&args.payoff)?;
    let rule = source.default_rule();
    let profile = profile_for(&source, rule, args.graph.kavg)?
        .ok_or_else(|| precondition("no pair dynamics for this graph and rule"))?;
    let population = source.node_count().max(1);
    let probe = match args.probe_alpha {
        Some(alpha) => StabilityProbe::new(alpha, population)?,
        None => StabilityProbe::weak(profile.kappa(), population)?,
    };
    let points: Vec<(f64, f64)> = match &args.point {
        Some(p) if p.len() == 2 => vec![(p[0], p[1])],
        Some(p) => return Err(precondition(format!("--point takes p_f,p_ff; got {} values", p.len()))),
        None => {
            let t = theory(&source, rule, args.graph.kavg, &u)?.expect("profile exists");
            t.ess.fixed_points.iter().map(|fp| (fp.p_f, fp.p_ff)).collect()
        }
    };
    let points = points
        .into_iter()
        .map(|(p_f, p_ff)| {
            let report = ess::jacobian_stability(&profile, &probe, &u, (p_f, p_ff))?;
            Ok(LabelledPoint { p_f, p_ff, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let record = StabilityRecord {
        graph: source.echo(),
        payoff: u,
        effective_degree: profile.kappa(),
        probe_alpha: probe.sel.alpha(),
        points,
    };
    emit(&args.output, || record.to_table(), &record)
}

pub fn invert(args: &InvertArgs) -> Result<()> {
    let (profile, population) = match &args.edges {
        Some(path) => {
            let (graph, _) = load_graph(path)?;
            (DegreeProfile::Moments(DegreeMoments::from(&graph.degree_stats())), graph.node_count())
        }
        None => (DegreeProfile::Uniform { k: args.k }, args.k + 1),
    };
    let mode = match args.mode {
        Mode::Exact => InversionMode::Exact,
        Mode::LargeK => InversionMode::LargeK,
    };
    let relation = ess::invert_payoff_relation(args.pstar, &profile, mode)?;
    // sampled points have u_fn = 1; scale into the open unit interval
    const SCALE: f64 = 0.8;
    let probe = StabilityProbe::weak(profile.kappa(), population)?;
    let checks = relation
        .sample_points(3)
        .into_iter()
        .map(|(u_ff, u_nn)| {
            let u = PayoffMatrix::new(u_ff * SCALE, SCALE, u_nn * SCALE)?;
            let predicted = match (mode, &profile) {
                (InversionMode::LargeK, _) => ess::ess_approx_large_k(&u)?,
                (InversionMode::Exact, DegreeProfile::Uniform { k }) => ess::ess_uniform(&u, *k, &probe)?
                    .selected_ess
                    .ok_or_else(|| precondition("no stable state selected"))?,
                (InversionMode::Exact, DegreeProfile::Moments(m)) => ess::ess_nonuniform(&u, m, &probe)?
                    .selected_ess
                    .ok_or_else(|| precondition("no stable state selected"))?,
            };
            Ok(Check {
                u_ff: u.u_ff(),
                u_fn: u.u_fn(),
                u_nn: u.u_nn(),
                predicted,
                abs_error: (predicted - args.pstar).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let record = InversionRecord { relation, checks };
    emit(&args.output, || record.to_table(), &record)
}
