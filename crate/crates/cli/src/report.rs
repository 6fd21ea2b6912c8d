use std::fmt::Write as _;
use std::path::PathBuf;

use evodiff::ess::{EssResult, PayoffRelation, StabilityReport};
use evodiff::sim::EnsembleResult;
use evodiff::{GraphSpec, PayoffMatrix};
use serde::{Serialize, Serializer};

/// Where the graph of a report came from.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphEcho {
    Generated {
        #[serde(flatten)]
        spec: GraphSpec,
    },
    Loaded {
        path: PathBuf,
        node_count: usize,
        edge_count: usize,
        records_dropped: usize,
        mean_degree: f64,
        second_moment: f64,
    },
}

impl GraphEcho {
    pub fn describe(&self) -> String {
        match self {
            GraphEcho::Generated { spec } => match spec {
                GraphSpec::Regular { n, k } => format!("regular n={n} k={k}"),
                GraphSpec::ErdosRenyi { n, mean_degree } => format!("er n={n} kavg={mean_degree}"),
                GraphSpec::BarabasiAlbert { n, m } => format!("ba n={n} m={m}"),
            },
            GraphEcho::Loaded { path, node_count, edge_count, .. } => {
                format!("{} ({node_count} nodes, {edge_count} edges)", path.display())
            }
        }
    }
}

/// Closed-form prediction and the model it came from.
#[derive(Debug, Clone, Serialize)]
pub struct Theory {
    pub model: &'static str,
    pub ess: EssResult,
    /// Degree-free approximation, when defined.
    pub large_degree_approx: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReportRecord {
    pub command: &'static str,
    pub graph: GraphEcho,
    pub payoff: PayoffMatrix,
    /// Swept parameter value, if any.
    pub axis_value: Option<f64>,
    pub theory: Option<Theory>,
    pub simulation: Option<EnsembleResult>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub abs_gap: f64,
}

impl ReportRecord {
    /// `|mean final p_f - selected stable state|`, when both are present.
    pub fn gap(&self) -> Option<f64> {
        let predicted = self.theory.as_ref()?.ess.selected_ess?;
        let simulated = self.simulation.as_ref()?.mean_final_pf;
        Some((simulated - predicted).abs())
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let u = &self.payoff;
        let _ = writeln!(s, "graph         {}", self.graph.describe());
        let _ = writeln!(s, "payoff        u_ff={} u_fn={} u_nn={} ({:?})", u.u_ff(), u.u_fn(), u.u_nn(), u.classify_regime());
        if let Some(v) = self.axis_value {
            let _ = writeln!(s, "axis value    {v}");
        }
        match &self.theory {
            Some(t) => {
                let selected = t.ess.selected_ess.map_or("none".to_string(), |p| format!("{p:.6}"));
                let _ = writeln!(s, "theory        {selected} ({}, effective degree {:.4})", t.model, t.ess.effective_degree);
                let points: Vec<String> =
                    t.ess.fixed_points.iter().map(|fp| format!("{:.6} [{}]", fp.p_f, fp.stability)).collect();
                let _ = writeln!(s, "fixed points  {}", points.join(", "));
            }
            None => {
                let _ = writeln!(s, "theory        none for this graph and rule");
            }
        }
        if let Some(sim) = &self.simulation {
            let t = &sim.terminals;
            let _ = writeln!(
                s,
                "simulation    mean {:.6} std {:.6} over {} runs ({} rule, alpha {})",
                sim.mean_final_pf, sim.std_final_pf, sim.runs, sim.config.rule, sim.config.alpha
            );
            let _ = writeln!(
                s,
                "terminals     all_f {} all_n {} steady {} max_steps {}",
                t.absorbed_all_f, t.absorbed_all_n, t.steady, t.max_steps
            );
        }
        if let Some(g) = self.gap() {
            let _ = writeln!(s, "gap           {g:.6}");
        }
        s
    }
}

impl Serialize for ReportRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            command: &'static str,
            graph: &'a GraphEcho,
            payoff: &'a PayoffMatrix,
            #[serde(skip_serializing_if = "Option::is_none")]
            axis_value: Option<f64>,
            theory: &'a Option<Theory>,
            simulation: &'a Option<EnsembleResult>,
            comparison: Option<Comparison>,
        }
        Out {
            command: self.command,
            graph: &self.graph,
            payoff: &self.payoff,
            axis_value: self.axis_value,
            theory: &self.theory,
            simulation: &self.simulation,
            comparison: self.gap().map(|abs_gap| Comparison { abs_gap }),
        }
        .serialize(serializer)
    }
}

/// Summary table of a sweep, one CSV row per value.
pub fn sweep_table(records: &[ReportRecord]) -> String {
    let mut s = String::from("value,theory,sim_mean,sim_std,gap\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.axis_value.map_or(String::new(), |v| v.to_string()),
            opt(r.theory.as_ref().and_then(|t| t.ess.selected_ess)),
            opt(r.simulation.as_ref().map(|e| e.mean_final_pf)),
            opt(r.simulation.as_ref().map(|e| e.std_final_pf)),
            opt(r.gap()),
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelledPoint {
    pub p_f: f64,
    pub p_ff: f64,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRecord {
    pub graph: GraphEcho,
    pub payoff: PayoffMatrix,
    pub effective_degree: f64,
    pub probe_alpha: f64,
    pub points: Vec<LabelledPoint>,
}

impl StabilityRecord {
    pub fn to_table(&self) -> String {
        let mut s = String::from("p_f,p_ff,label,determinant,trace\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:.6},{:.6},{},{:e},{:e}",
                p.p_f, p.p_ff, p.report.label, p.report.determinant, p.report.trace
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Check {
    pub u_ff: f64,
    pub u_fn: f64,
    pub u_nn: f64,
    pub predicted: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InversionRecord {
    pub relation: PayoffRelation,
    pub checks: Vec<Check>,
}

impl InversionRecord {
    pub fn to_table(&self) -> String {
        let r = &self.relation;
        let mut s = String::new();
        let _ = writeln!(s, "p_star        {}", r.p_star);
        let _ = writeln!(s, "mode          {:?} (effective degree {})", r.mode, r.kappa);
        let _ = writeln!(s, "relation      u_ff = {:.9} + {:.9} * u_nn  (u_fn = 1)", r.intercept, r.slope);
        if let Some(ratio) = r.ratio {
            let _ = writeln!(s, "ratio         (1 - u_ff) / (1 - u_nn) = {ratio:.9}");
        }
        let _ = writeln!(s, "checks        u_ff,u_fn,u_nn,predicted,abs_error");
        for c in &self.checks {
            let _ = writeln!(s, "              {:.6},{:.6},{:.6},{:.12},{:e}", c.u_ff, c.u_fn, c.u_nn, c.predicted, c.abs_error);
        }
        s
    }
}
