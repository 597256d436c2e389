// SPDX-License-Identifier: Apache-2.0

//! Subcommand bodies. Each returns the text to print so tests can call them
//! without a process.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use trainer_core::analytics::{read_cohorts_csv, render_text, CohortReport};
use trainer_core::bus::ActionType;
use trainer_core::canonical;
use trainer_core::perf::{
    batch, compare_runs, pace, parse_trace, render_comparison, summarize, DrawCallStats, MetricsSummary,
    SceneDescription, VSyncMode, VSyncPolicy,
};
use trainer_core::scenario::fixture::{verano, VERANO_ID};
use trainer_core::scenario::{lint_scenario, parse_scenario, topological_order, Scenario};
use trainer_core::session::replay_record;
use trainer_core::store::Catalog;
use trainer_core::{Attempt, HintConfig, Mode, ScoreReport, ScoringRules, Session, SessionRecord, Store};

/// A failed command: message for stderr plus process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }

    /// Bad input: exit code 1.
    pub fn input(message: impl fmt::Display) -> Self {
        Self::new(1, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Output = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

/// The built-in fixture when `path` is `None`.
pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    match path {
        None => Ok(verano()),
        Some(p) => parse_scenario(&read(p)?).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
    }
}

pub fn validate(path: &Path, show_order: bool) -> Output {
    let sc = load_scenario(Some(path))?;
    let mut out = format!("ok: {} ({} steps, {})\n", sc.id, sc.steps.len(), sc.direction);
    for w in lint_scenario(&sc) {
        let _ = writeln!(out, "warning: {}: {}", w.location, w.message);
    }
    if show_order {
        let order = topological_order(&sc).map_err(Failure::input)?;
        for (i, id) in order.iter().enumerate() {
            let _ = writeln!(out, "{:>3}. {id}", i + 1);
        }
    }
    Ok(out)
}

const RUN_HELP: &str = "\
commands:
  <step> <action> [tool=ID] [torque=NM] [part=ID]   attempt a step
      actions: rotate(cw,1.5) press hold(500) hide screw[rotate(cw,1)+press]
  status     progress and held tool
  steps      list the steps
  abandon    end the session now
  help       this text
";

/// Parses one attempt line.
pub fn parse_attempt_line(line: &str) -> Result<Attempt, String> {
    let mut words = line.split_whitespace();
    let step = words.next().ok_or("empty line")?;
    let action = words.next().ok_or("missing action")?;
    let mut attempt = Attempt::new(step, action.parse::<trainer_core::Action>().map_err(|e| e.to_string())?);
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| format!("expected key=value, got `{w}`"))?;
        attempt = match k {
            "tool" => attempt.with_tool(v),
            "torque" => attempt.with_torque(v.parse().map_err(|_| format!("bad torque `{v}`"))?),
            "part" => attempt.on_part(v),
            _ => return Err(format!("unknown key `{k}`")),
        };
    }
    Ok(attempt)
}

/// Terminal session: reads commands from `input` until the session ends or
/// input runs out (which abandons it).
pub fn run_interactive<R: BufRead, W: Write>(
    id: &str,
    scenario: Scenario,
    mode: Mode,
    hints: HintConfig,
    mut input: R,
    out: &mut W,
) -> Result<Session, Failure> {
    let io = |e: std::io::Error| Failure::new(2, e);
    let rules = ScoringRules::default_for(&scenario);
    let mut session = Session::start(id, Arc::new(scenario), mode, hints, rules).map_err(Failure::input)?;
    let started = Instant::now();
    let mut shown = 0;
    writeln!(
        out,
        "{}: {} mode, {} steps. Type `help` for commands.",
        session.scenario().engine_name,
        mode,
        session.scenario().steps.len()
    )
    .map_err(io)?;

    let mut line = String::new();
    loop {
        for e in &session.events()[shown..] {
            if e.action == ActionType::HintIssued {
                let channel = e.get("channel").and_then(|v| v.as_str()).unwrap_or("");
                let text = e.get("text").and_then(|v| v.as_str()).unwrap_or("");
                writeln!(out, "[{channel}] {}: {text}", e.target).map_err(io)?;
            }
        }
        shown = session.events().len();
        if session.is_finished() {
            break;
        }
        write!(out, "> ").map_err(io)?;
        out.flush().map_err(io)?;
        line.clear();
        let t_ms = started.elapsed().as_millis() as u64;
        if input.read_line(&mut line).map_err(io)? == 0 {
            session.abandon(t_ms).map_err(Failure::input)?;
            writeln!(out).map_err(io)?;
            break;
        }
        match line.trim() {
            "" => {}
            "help" => write!(out, "{RUN_HELP}").map_err(io)?,
            "status" => {
                let p = session.progress();
                write!(out, "{}/{} steps", p.completed, p.total).map_err(io)?;
                if let Some(h) = session.held_tool() {
                    write!(out, ", holding {}", h.tool).map_err(io)?;
                    if let Some(t) = h.torque {
                        write!(out, " at {t} N·m").map_err(io)?;
                    }
                }
                writeln!(out).map_err(io)?;
            }
            "steps" => {
                for s in &session.scenario().steps {
                    let done = if session.completed_steps().contains(&s.id) { "x" } else { " " };
                    writeln!(out, "[{done}] {}", s.id).map_err(io)?;
                }
            }
            "abandon" | "quit" => session.abandon(t_ms).map_err(Failure::input)?,
            cmd => match parse_attempt_line(cmd) {
                Err(e) => writeln!(out, "? {e}").map_err(io)?,
                Ok(a) => match session.attempt(&a.at(t_ms)) {
                    Err(e) => writeln!(out, "? {e}").map_err(io)?,
                    Ok(o) if o.accepted => {
                        let p = session.progress();
                        writeln!(out, "ok ({}/{})", p.completed, p.total).map_err(io)?;
                    }
                    Ok(o) => writeln!(out, "rejected: {}", o.error.expect("rejections carry a kind")).map_err(io)?,
                },
            },
        }
    }
    let report = session.score_report().map_err(Failure::input)?;
    write!(out, "{}", summary(&report)).map_err(io)?;
    Ok(session)
}

pub fn summary(r: &ScoreReport) -> String {
    let mut out = format!(
        "session {} on {}: {:?}, score {:.2} (band {}), {}/{} steps\n",
        r.session_id, r.scenario_id, r.outcome, r.score, r.band, r.completed_steps, r.total_steps
    );
    for (kind, n) in &r.errors {
        let _ = writeln!(out, "  {kind}: {n}");
    }
    let stages: Vec<String> = r.stages.iter().map(|(s, ok)| format!("{s}:{}", if *ok { "ok" } else { "x" })).collect();
    if !stages.is_empty() {
        let _ = writeln!(out, "  stages {}", stages.join(" "));
    }
    out
}

/// Verifies a record file against its scenario by replay.
pub fn replay(record_path: &Path, scenario_path: Option<&Path>) -> Output {
    let record = SessionRecord::parse(&read(record_path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", record_path.display())))?;
    let catalog = match scenario_path {
        Some(p) => {
            let mut c = Catalog::builtin();
            c.insert(load_scenario(Some(p))?);
            c
        }
        None => Catalog::builtin(),
    };
    let sc = catalog
        .get(&record.header.scenario_id)
        .ok_or_else(|| Failure::input(format!("unknown scenario `{}` (pass --scenario)", record.header.scenario_id)))?;
    let replayed = replay_record(sc, &record).map_err(|e| Failure::new(3, format!("replay failed: {e}")))?;
    if replayed != record.report {
        return Err(Failure::new(
            3,
            format!("replay mismatch: record says {} but replay gives {}", record.report.score, replayed.score),
        ));
    }
    Ok(format!("verified\n{}", summary(&replayed)))
}

pub fn report_csv(path: &Path, json: bool) -> Output {
    let file = fs::File::open(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
    let cohorts = read_cohorts_csv(file).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let reports: Vec<CohortReport> = cohorts.iter().map(CohortReport::build).collect();
    render_reports(&reports, json)
}

pub fn report_store(dir: &Path, groups: &[String], scenario: Option<&str>, json: bool) -> Output {
    let store = Store::open(dir).map_err(|e| Failure::new(2, e))?;
    let scenario = scenario.unwrap_or(VERANO_ID);
    let groups: Vec<String> = if groups.is_empty() {
        let mut seen: Vec<String> = Vec::new();
        for e in store.entries() {
            if let Some(g) = e.group.filter(|g| !seen.contains(g)) {
                if e.scenario_id == scenario {
                    seen.push(g);
                }
            }
        }
        seen.sort();
        seen
    } else {
        groups.to_vec()
    };
    let mut reports = Vec::new();
    for g in &groups {
        reports.push(CohortReport::build(&store.query_cohort(g, scenario).map_err(|e| Failure::new(2, e))?));
    }
    render_reports(&reports, json)
}

fn render_reports(reports: &[CohortReport], json: bool) -> Output {
    if json {
        canonical::to_string(&reports).map_err(|e| Failure::new(2, e))
    } else {
        Ok(render_text(reports))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerfArgs<'a> {
    pub scene: Option<&'a Path>,
    pub trace: Option<&'a Path>,
    pub vsync: Option<VSyncPolicy>,
    pub refresh_hz: f64,
    pub compare: Option<&'a Path>,
    pub json: bool,
}

pub fn perf(args: &PerfArgs<'_>) -> Output {
    if args.scene.is_none() && args.trace.is_none() {
        return Err(Failure::input("nothing to do: pass --scene and/or --trace"));
    }
    let mut out = String::new();
    let mut current = MetricsSummary::default();

    if let Some(path) = args.trace {
        let trace = parse_trace(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let policies = match args.vsync {
            Some(p) => vec![p],
            None => vec![VSyncPolicy::DontSync, VSyncPolicy::EveryVBlank, VSyncPolicy::EverySecondVBlank],
        };
        let _ = writeln!(out, "{} frames, refresh {} Hz", trace.len(), args.refresh_hz);
        let _ = writeln!(out, "{:<14}{:>12}{:>12}{:>14}{:>16}", "vsync", "avg ms", "max ms", "mean fps", "fps of mean");
        for p in &policies {
            let mode = VSyncMode::new(*p, args.refresh_hz).map_err(Failure::input)?;
            let s = summarize(&pace(&trace, mode));
            let f = s.frame_time.as_ref().expect("trace is non-empty");
            let _ = writeln!(
                out,
                "{:<14}{:>12.3}{:>12.3}{:>14.2}{:>16.2}",
                p.to_string(),
                f.average_frame_time_ms,
                f.maximum_frame_time_ms,
                f.average_frame_rate_fps,
                f.fps_of_mean_frame_time
            );
            if args.vsync.is_some() || *p == VSyncPolicy::DontSync {
                current.frame_time = s.frame_time;
            }
        }
    }

    if let Some(path) = args.scene {
        let scene: SceneDescription =
            serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let calls = batch(&scene).map_err(Failure::input)?;
        let dynamic_only = batch(&scene.all_dynamic()).map_err(Failure::input)?.len();
        let _ = writeln!(
            out,
            "{} objects -> {} draw calls ({} with no static batching)",
            scene.objects().len(),
            calls.len(),
            dynamic_only
        );
        current.draw_calls = DrawCallStats::from_counts(&[calls.len()]);
    }

    if let Some(path) = args.compare {
        let baseline: MetricsSummary =
            serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        out.push('\n');
        out.push_str(&render_comparison(&compare_runs(&baseline, &current)));
    }

    if args.json {
        return canonical::to_string(&current).map_err(|e| Failure::new(2, e));
    }
    Ok(out)
}
