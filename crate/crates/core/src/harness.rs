//! Run orchestration and output files: trace CSV, summary and verdict JSON,
//! and two plot-data CSVs (agent states and global objective per round).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{evaluate_limit, LimitPoint, VerdictReport};
use crate::engine::{initialize, run, RunTrace};
use crate::error::{DadsError, Result};
use crate::graph::make_cycle;
use crate::local_solver::DualBlock;
use crate::par::Parallelism;
use crate::problem::ProblemSpec;
use crate::scenario::{resolve, LoadedScenario};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const VERDICT_FILE: &str = "verdicts.json";
pub const STATES_FILE: &str = "states.csv";
pub const OBJECTIVE_FILE: &str = "objective.csv";

/// Resolves a scenario and applies command-line overrides before the
/// assumption checks run.
pub fn prepare(name_or_path: &str, rounds: Option<usize>, seed: Option<u64>) -> Result<LoadedScenario> {
    let loaded = resolve(name_or_path)?;
    if rounds.is_none() && seed.is_none() {
        return Ok(loaded);
    }
    let base = Path::new(name_or_path).parent().map(Path::to_path_buf);
    let mut scenario = loaded.scenario;
    if let Some(r) = rounds {
        scenario.engine.rounds = r;
    }
    if let Some(s) = seed {
        scenario.set_seed(s);
    }
    LoadedScenario::from_scenario(scenario, base.as_deref())
}

/// Hex SHA-256 of the scenario as serialized after overrides.
pub fn config_hash(loaded: &LoadedScenario) -> Result<String> {
    let text = loaded.scenario.to_toml_string()?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub rounds_run: usize,
    pub stopped_early: Option<usize>,
    pub slater_point: Vec<f64>,
    pub gamma: f64,
    pub radius: f64,
    pub limit_point: Vec<Vec<f64>>,
    pub objective: Option<f64>,
    pub settle_rounds: Vec<Option<usize>>,
    pub final_lambda_disagreement: Option<f64>,
    pub final_w_disagreement: Option<f64>,
    pub final_feasibility_violation: Option<f64>,
    pub max_dual_norm: f64,
    pub reference_limit: Option<Vec<Vec<f64>>>,
    pub verdicts_passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub report: VerdictReport,
    pub summary: Summary,
}

/// Runs the engine, then evaluates the limit point and the whole-trace
/// containment check.
pub fn execute(loaded: &LoadedScenario, parallelism: Parallelism) -> Result<RunOutput> {
    let config = loaded.scenario.engine_config(parallelism);
    let mut trace = run(&loaded.spec, &loaded.schedule, &config)?;
    trace.meta.scenario = loaded.scenario.name.clone();
    trace.meta.seed = loaded.scenario.seed();
    trace.meta.config_hash = config_hash(loaded)?;

    let cycle = make_cycle(loaded.spec.n_agents())?;
    let limit = LimitPoint {
        x_stack: trace.final_primal(),
        duals: trace.final_duals(),
    };
    let mut report = evaluate_limit(
        &loaded.spec,
        &cycle,
        &limit,
        trace.init.radius,
        &loaded.scenario.diagnostics,
        parallelism,
    )?;
    let all_duals = trace
        .init
        .agents
        .iter()
        .map(|a| &a.dual)
        .chain(trace.rounds.iter().flat_map(|r| r.agents.iter().map(|a| &a.dual_after)));
    let (max_norm, nonneg) = containment(all_duals);
    push_containment(&mut report, max_norm, nonneg, trace.init.radius);
    let worst_settle = trace.settle_rounds.iter().flatten().max().copied();
    report.push(
        "settling",
        false,
        true,
        worst_settle.map_or(-1.0, |t| t as f64),
        "n/a".into(),
        format!("last primal switch per agent: {:?}", trace.settle_rounds),
    );

    let last = trace.rounds.last();
    let summary = Summary {
        scenario: trace.meta.scenario.clone(),
        seed: trace.meta.seed,
        config_hash: trace.meta.config_hash.clone(),
        rounds_run: trace.rounds.len(),
        stopped_early: trace.stopped_early,
        slater_point: trace.init.slater_point.clone(),
        gamma: trace.init.gamma,
        radius: trace.init.radius,
        limit_point: limit.x_stack.clone(),
        objective: trace.final_objective(),
        settle_rounds: trace.settle_rounds.clone(),
        final_lambda_disagreement: last.map(|r| r.lambda_disagreement),
        final_w_disagreement: last.map(|r| r.w_disagreement),
        final_feasibility_violation: last.map(|r| r.feasibility_violation),
        max_dual_norm: max_norm,
        reference_limit: loaded.scenario.diagnostics.reference_limit.clone(),
        verdicts_passed: report.all_asserted_pass(),
    };
    Ok(RunOutput { trace, report, summary })
}

fn containment<'a>(duals: impl Iterator<Item = &'a DualBlock>) -> (f64, bool) {
    duals.fold((0.0, true), |(m, ok), d| (m.max(d.norm()), ok && d.is_nonnegative()))
}

fn push_containment(report: &mut VerdictReport, max_norm: f64, nonneg: bool, radius: f64) {
    report.push(
        "dual_containment_all_rounds",
        true,
        nonneg && max_norm <= radius + 1e-9,
        max_norm,
        format!("<= {radius:.6} + 1e-9 and nonnegative"),
        "every stored dual estimate".into(),
    );
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn trace_header(spec: &ProblemSpec) -> String {
    let n = spec.dim();
    let nn = n * spec.n_agents();
    let mut cols = vec!["phase".to_string(), "round".into(), "agent".into()];
    cols.extend((1..=n).map(|k| format!("x_{k}")));
    cols.extend(
        [
            "q_value",
            "objective_term",
            "dual_norm",
            "proj_displacement",
            "sup_norm",
            "certified_gap",
            "changed",
        ]
        .map(String::from),
    );
    cols.extend((1..=spec.constraint_dim()).map(|k| format!("mu_{k}")));
    cols.extend((1..=nn).map(|k| format!("lambda_{k}")));
    cols.extend((1..=nn).map(|k| format!("w_{k}")));
    cols.join(",")
}

fn push_vec(line: &mut String, v: &[f64]) {
    for x in v {
        line.push(',');
        line.push_str(&num(*x));
    }
}

/// One row per agent for initialization and for every round. Dual columns
/// hold the estimate after that row's update.
pub fn trace_csv(spec: &ProblemSpec, trace: &RunTrace) -> String {
    let mut out = trace_header(spec);
    out.push('\n');
    for (i, a) in trace.init.agents.iter().enumerate() {
        let mut line = format!("init,0,{}", i + 1);
        push_vec(&mut line, &a.primal);
        let _ = write!(
            line,
            ",,{},{},,,,",
            num(spec.objectives[i].eval(&a.primal)),
            num(a.dual.norm())
        );
        push_vec(&mut line, &a.dual.stacked());
        out.push_str(&line);
        out.push('\n');
    }
    for r in &trace.rounds {
        for a in &r.agents {
            let mut line = format!("round,{},{}", r.round, a.agent + 1);
            push_vec(&mut line, &a.primal);
            let _ = write!(
                line,
                ",{},{},{},{},{},{},{}",
                num(a.q_value),
                num(a.objective_term),
                num(a.dual_after.norm()),
                num(a.displacement_norm),
                num(crate::linalg::norm(&a.supgradient)),
                num(a.certified_gap),
                u8::from(a.changed)
            );
            push_vec(&mut line, &a.dual_after.stacked());
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Per-round primal estimates, one column per agent and coordinate.
pub fn states_csv(spec: &ProblemSpec, trace: &RunTrace) -> String {
    let n = spec.dim();
    let mut cols = vec!["round".to_string()];
    for i in 1..=spec.n_agents() {
        if n == 1 {
            cols.push(format!("agent_{i}"));
        } else {
            cols.extend((1..=n).map(|k| format!("agent_{i}_x{k}")));
        }
    }
    let mut out = cols.join(",");
    out.push('\n');
    let mut row = |round: usize, xs: Vec<&Vec<f64>>| {
        let mut line = round.to_string();
        for x in xs {
            push_vec(&mut line, x);
        }
        out.push_str(&line);
        out.push('\n');
    };
    if trace.rounds.is_empty() {
        row(0, trace.init.agents.iter().map(|a| &a.primal).collect());
    }
    for r in &trace.rounds {
        row(r.round, r.agents.iter().map(|a| &a.primal).collect());
    }
    out
}

/// Per-round `Σ f_i(x_i(k))`.
pub fn objective_csv(spec: &ProblemSpec, trace: &RunTrace) -> String {
    let mut out = String::from("round,objective\n");
    if trace.rounds.is_empty() {
        let v: f64 = trace
            .init
            .agents
            .iter()
            .zip(&spec.objectives)
            .map(|(a, f)| f.eval(&a.primal))
            .sum();
        let _ = writeln!(out, "0,{}", num(v));
    }
    for r in &trace.rounds {
        let _ = writeln!(out, "{},{}", r.round, num(r.objective));
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| DadsError::invalid(format!("cannot serialize: {e}")))
}

#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub verdicts: PathBuf,
    pub states: PathBuf,
    pub objective: PathBuf,
}

pub fn write_outputs(dir: &Path, loaded: &LoadedScenario, out: &RunOutput) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        trace: dir.join(TRACE_FILE),
        summary: dir.join(SUMMARY_FILE),
        verdicts: dir.join(VERDICT_FILE),
        states: dir.join(STATES_FILE),
        objective: dir.join(OBJECTIVE_FILE),
    };
    fs::write(&files.trace, trace_csv(&loaded.spec, &out.trace))?;
    fs::write(&files.summary, to_json(&out.summary)?)?;
    fs::write(&files.verdicts, to_json(&out.report)?)?;
    fs::write(&files.states, states_csv(&loaded.spec, &out.trace))?;
    fs::write(&files.objective, objective_csv(&loaded.spec, &out.trace))?;
    Ok(files)
}

/// Limit point and containment data recovered from a trace CSV.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub limit: LimitPoint,
    pub last_round: Option<usize>,
    pub max_dual_norm: f64,
    pub nonnegative: bool,
}

pub fn parse_trace_csv(spec: &ProblemSpec, text: &str) -> Result<ParsedTrace> {
    let bad = |line: usize, msg: String| DadsError::invalid(format!("trace line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| DadsError::invalid("trace is empty"))?;
    let expected = trace_header(spec);
    if header.trim() != expected {
        return Err(DadsError::invalid(format!(
            "trace header does not match the scenario\n  expected: {expected}\n  found:    {}",
            header.trim()
        )));
    }
    let (n, m, n_agents) = (spec.dim(), spec.constraint_dim(), spec.n_agents());
    let width = 3 + n + 7 + m + 2 * n * n_agents;
    let dual_at = 3 + n + 7;

    let mut max_dual_norm = 0.0f64;
    let mut nonnegative = true;
    let mut latest: Option<(bool, usize)> = None;
    let mut slots: Vec<Option<(Vec<f64>, DualBlock)>> = vec![None; n_agents];
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != width {
            return Err(bad(lineno, format!("expected {width} fields, found {}", fields.len())));
        }
        let is_round = match fields[0] {
            "init" => false,
            "round" => true,
            other => return Err(bad(lineno, format!("unknown phase {other:?}"))),
        };
        let round: usize = fields[1].parse().map_err(|_| bad(lineno, "bad round".into()))?;
        let agent: usize = fields[2].parse().map_err(|_| bad(lineno, "bad agent".into()))?;
        if agent == 0 || agent > n_agents {
            return Err(bad(lineno, format!("agent {agent} out of range")));
        }
        let parse = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| bad(lineno, format!("bad number {s:?}"))) };
        let x = fields[3..3 + n].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let stacked = fields[dual_at..].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let dual = DualBlock::from_stacked(m, &stacked)?;
        max_dual_norm = max_dual_norm.max(dual.norm());
        nonnegative &= dual.is_nonnegative();
        let key = (is_round, round);
        if latest.is_none_or(|l| key > l) {
            latest = Some(key);
            slots = vec![None; n_agents];
        }
        if Some(key) == latest {
            slots[agent - 1] = Some((x, dual));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DadsError::invalid("trace has no data rows"));
    }
    let (x_stack, duals): (Vec<_>, Vec<_>) = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| DadsError::invalid(format!("final round lacks agent {}", i + 1))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(ParsedTrace {
        limit: LimitPoint { x_stack, duals },
        last_round: latest.filter(|l| l.0).map(|l| l.1),
        max_dual_norm,
        nonnegative,
    })
}

/// Re-evaluates the verdicts on the final rows of a recorded trace.
pub fn verify_trace(loaded: &LoadedScenario, trace_text: &str, parallelism: Parallelism) -> Result<VerdictReport> {
    let parsed = parse_trace_csv(&loaded.spec, trace_text)?;
    let cycle = make_cycle(loaded.spec.n_agents())?;
    let config = loaded.scenario.engine_config(parallelism);
    let radius = initialize(&loaded.spec, &loaded.schedule, &cycle, &config)?.radius;
    let mut report = evaluate_limit(
        &loaded.spec,
        &cycle,
        &parsed.limit,
        radius,
        &loaded.scenario.diagnostics,
        parallelism,
    )?;
    push_containment(&mut report, parsed.max_dual_norm, parsed.nonnegative, radius);
    Ok(report)
}

pub fn write_verdicts(path: &Path, report: &VerdictReport) -> Result<()> {
    fs::write(path, to_json(report)?)?;
    Ok(())
}

/// One line per verdict, suitable for a terminal.
pub fn format_report(report: &VerdictReport) -> String {
    let mut out = String::new();
    for v in &report.verdicts {
        let tag = match (v.asserted, v.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, _) => "INFO",
        };
        let _ = writeln!(
            out,
            "{tag} {:<28} {:>14.6e}  {}  ({})",
            v.name, v.value, v.threshold, v.detail
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_run(rounds: usize) -> (LoadedScenario, RunOutput) {
        let loaded = prepare("paper_example", Some(rounds), None).unwrap();
        let out = execute(&loaded, Parallelism::Sequential).unwrap();
        (loaded, out)
    }

    #[test]
    fn csv_round_trip_recovers_limit() {
        let (loaded, out) = short_run(12);
        let text = trace_csv(&loaded.spec, &out.trace);
        let parsed = parse_trace_csv(&loaded.spec, &text).unwrap();
        assert_eq!(parsed.limit.x_stack, out.trace.final_primal());
        assert_eq!(parsed.limit.duals, out.trace.final_duals());
        assert_eq!(parsed.last_round, Some(11));
        assert_eq!(text.lines().count(), 1 + 4 + 12 * 4);
    }

    #[test]
    fn zero_rounds_trace_is_init_only() {
        let (loaded, out) = short_run(0);
        let text = trace_csv(&loaded.spec, &out.trace);
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().skip(1).all(|l| l.starts_with("init,")));
        let parsed = parse_trace_csv(&loaded.spec, &text).unwrap();
        assert_eq!(parsed.last_round, None);
    }

    #[test]
    fn empty_and_mismatched_traces_are_rejected() {
        let (loaded, _) = short_run(0);
        assert!(matches!(
            parse_trace_csv(&loaded.spec, ""),
            Err(DadsError::InvalidInput(_))
        ));
        let header_only = trace_header(&loaded.spec) + "\n";
        assert!(matches!(
            parse_trace_csv(&loaded.spec, &header_only),
            Err(DadsError::InvalidInput(_))
        ));
        let other = prepare("planar_pair", None, None).unwrap();
        let (_, out) = short_run(2);
        let text = trace_csv(&loaded.spec, &out.trace);
        assert!(matches!(
            parse_trace_csv(&other.spec, &text),
            Err(DadsError::InvalidInput(_))
        ));
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn plot_files_have_one_row_per_round() {
        let (loaded, out) = short_run(5);
        let states = states_csv(&loaded.spec, &out.trace);
        assert!(states.starts_with("round,agent_1,agent_2,agent_3,agent_4\n"));
        assert_eq!(states.lines().count(), 6);
        assert_eq!(objective_csv(&loaded.spec, &out.trace).lines().count(), 6);
    }

    #[test]
    fn config_hash_tracks_overrides() {
        let a = prepare("paper_example", None, None).unwrap();
        let b = prepare("paper_example", None, Some(3)).unwrap();
        assert_eq!(config_hash(&a).unwrap().len(), 64);
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }
}
