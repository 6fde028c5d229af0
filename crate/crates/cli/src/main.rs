use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use cfdg_core::coverage::{Config, Evaluator};
use cfdg_core::decision::normalize_interstitial;
use cfdg_core::dot::{document_from_cfg, emit_annotated_dot, emit_dot, parse_dot, Dialect, DotDocument};
use cfdg_core::expr::{minimal_suites, ExprError, TestVector};
use cfdg_core::trace::{parse_traces, serialize_traces, validate_run, TraceWarning};
use cfdg_core::{
    create_cfdg, expr_to_cfg, parse_expr, verify_decision_invariants, Cfdg, Cfg, CoverageReport, Criterion, LoopMode,
    Run, Semantics, TestSuite,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Exit status when `--strict` is given and a decision fails its checks.
const EXIT_INVARIANT: u8 = 2;
/// Exit status when a coverage verdict is below 100%.
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cfdg",
    version,
    about = "Infer decisions in control-flow graphs and measure coverage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add one cluster per inferred decision to dot files.
    Annotate(AnnotateArgs),
    /// Evaluate a coverage criterion over a trace file.
    Coverage(CoverageArgs),
    /// Generate the CFG of a decision expression as dot.
    Gen(GenArgs),
    /// Print the runs of an expression's CFG for test vectors.
    Simulate(SimulateArgs),
    /// List the smallest test suites meeting a criterion.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Dot flavour: gcc, clang or generic (detected when omitted).
    #[arg(long)]
    dialect: Option<Dialect>,
    /// Contract plain blocks that sit between two conditions first.
    #[arg(long)]
    normalize_interstitial: bool,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Dot files, `-` for standard input.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    /// Exit with status 2 when a decision fails its well-formedness checks.
    #[arg(long)]
    strict: bool,
    /// Output file (standard output by default).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Dot file, `-` for standard input.
    dot: PathBuf,
    /// Trace file, `-` for standard input.
    traces: PathBuf,
    /// sc, dc, cc, dcc, mcc, fpc or mcdc.
    #[arg(long)]
    criterion: Criterion,
    /// masking, strict or paper-literal.
    #[arg(long, default_value = "masking")]
    semantics: Semantics,
    /// traversal or edge-set.
    #[arg(long, default_value = "traversal")]
    loop_mode: LoopMode,
    #[command(flatten)]
    graph: GraphArgs,
    /// Function to evaluate when the file holds more than one.
    #[arg(long)]
    function: Option<String>,
    /// Accept runs that stop before an exit vertex.
    #[arg(long)]
    allow_partial: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Decision expression such as `(a && b) || c`.
    expr: String,
    /// Include the decision cluster.
    #[arg(long)]
    annotate: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    expr: String,
    /// One vector per run, one T/F per symbol; `-` marks a don't-care.
    #[arg(required = true, allow_hyphen_values = true)]
    vectors: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    expr: String,
    #[arg(long)]
    criterion: Criterion,
    #[arg(long, default_value = "masking")]
    semantics: Semantics,
    /// Print at most this many suites.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Annotate(a) => annotate(a),
        Command::Coverage(a) => coverage(a),
        Command::Gen(a) => gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn display(path: &Path) -> String {
    if path == Path::new("-") {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading standard input")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing standard output")?;
            out.flush().context("writing standard output")
        }
    }
}

fn parse_expression(text: &str) -> Result<cfdg_core::DecisionExpr> {
    parse_expr(text).map_err(|e| match e {
        ExprError::Syntax { position, .. } => {
            let col = text[..position.min(text.len())].chars().count();
            anyhow!("{e}\n  {text}\n  {}^", " ".repeat(col))
        }
        other => other.into(),
    })
}

/// Optionally normalizes a function's graph. Returns the graph the
/// decisions are inferred on and the vertices contracted away.
fn prepare(cfg: &Cfg, normalize: bool) -> (Cfg, Vec<String>) {
    if !normalize {
        return (cfg.clone(), Vec::new());
    }
    let (out, map) = normalize_interstitial(cfg);
    (out, map.keys().map(|v| v.to_string()).collect())
}

fn report_dot_warnings(source: &str, doc: &DotDocument) {
    for w in &doc.warnings {
        eprintln!("warning: {source}: {w}");
    }
}

fn annotate(args: AnnotateArgs) -> Result<u8> {
    let stdin_uses = args.inputs.iter().filter(|p| *p == Path::new("-")).count();
    if stdin_uses > 1 {
        bail!("standard input can be read only once");
    }
    let mut out = String::new();
    let mut failed_checks = false;
    for path in &args.inputs {
        let source = display(path);
        let text = read_input(path)?;
        let doc = parse_dot(&text, args.graph.dialect).with_context(|| source.clone())?;
        report_dot_warnings(&source, &doc);
        let mut cfdgs = Vec::new();
        for f in &doc.functions {
            let (cfg, _) = prepare(&f.cfg, args.graph.normalize_interstitial);
            let (cfdg, _) = create_cfdg(&cfg).with_context(|| format!("{source}: function `{}`", f.name))?;
            for check in verify_decision_invariants(&cfdg).failures() {
                failed_checks = true;
                eprintln!(
                    "warning: {source}: function `{}`, decision {}: {}",
                    f.name,
                    check.decision_id,
                    describe_check(check)
                );
            }
            cfdgs.push(cfdg);
        }
        out.push_str(&emit_annotated_dot(&doc, &cfdgs).with_context(|| source.clone())?);
    }
    write_output(args.output.as_deref(), &out)?;
    Ok(if failed_checks && args.strict {
        EXIT_INVARIANT
    } else {
        0
    })
}

fn describe_check(check: &cfdg_core::decision::DecisionCheck) -> String {
    let names = |vs: &[cfdg_core::VertexId]| vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
    let mut problems = Vec::new();
    if !check.two_successors() {
        problems.push(format!("{} external successors", check.external_successors.len()));
    }
    if !check.extra_entries.is_empty() {
        problems.push(format!("also entered at {}", names(&check.extra_entries)));
    }
    if !check.undominated.is_empty() {
        problems.push(format!("entry does not dominate {}", names(&check.undominated)));
    }
    if !check.unshared.is_empty() {
        problems.push(format!("no shared successor for {}", names(&check.unshared)));
    }
    problems.join("; ")
}

fn pick_function<'a>(doc: &'a DotDocument, name: Option<&str>) -> Result<&'a cfdg_core::dot::DotFunction> {
    match name {
        Some(n) => doc
            .functions
            .iter()
            .find(|f| f.name == n)
            .ok_or_else(|| anyhow!("no function named `{n}`")),
        None => match doc.functions.as_slice() {
            [f] => Ok(f),
            fs => {
                let names: Vec<&str> = fs.iter().map(|f| f.name.as_str()).collect();
                bail!(
                    "the file holds {} functions; pick one with --function: {}",
                    fs.len(),
                    names.join(", ")
                )
            }
        },
    }
}

fn coverage(args: CoverageArgs) -> Result<u8> {
    if args.dot == Path::new("-") && args.traces == Path::new("-") {
        bail!("standard input can be read only once");
    }
    let dot_source = display(&args.dot);
    let doc = parse_dot(&read_input(&args.dot)?, args.graph.dialect).with_context(|| dot_source.clone())?;
    report_dot_warnings(&dot_source, &doc);
    let function = pick_function(&doc, args.function.as_deref())?;

    let trace_source = display(&args.traces);
    let (suite, warnings) = parse_traces(&read_input(&args.traces)?, &function.cfg, args.allow_partial)
        .with_context(|| trace_source.clone())?;
    for w in &warnings {
        match w {
            TraceWarning::Truncated { run, last } => {
                eprintln!("warning: {trace_source}: run `{run}` stops at `{last}` before an exit")
            }
        }
    }

    let (cfg, contracted) = prepare(&function.cfg, args.graph.normalize_interstitial);
    let suite = if contracted.is_empty() {
        suite
    } else {
        // Contracted blocks have one successor, so dropping them from a path
        // leaves a path of the normalized graph.
        let runs = suite
            .runs()
            .iter()
            .map(|r| {
                let run = Run::new(
                    r.name.clone(),
                    r.path
                        .iter()
                        .filter(|v| !contracted.iter().any(|c| c == v.as_str()))
                        .cloned(),
                );
                if !args.allow_partial {
                    validate_run(&cfg, &run).with_context(|| trace_source.clone())?;
                }
                Ok(run)
            })
            .collect::<Result<Vec<_>>>()?;
        TestSuite::new(runs)?
    };
    let (cfdg, _) = create_cfdg(&cfg).with_context(|| format!("function `{}`", function.name))?;
    let config = Config {
        semantics: args.semantics,
        loop_mode: args.loop_mode,
    };
    let report = Evaluator::new(&cfdg, &suite, config).evaluate(args.criterion);
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Text => format_report(&report, &cfdg),
    };
    write_output(args.output.as_deref(), &text)?;
    Ok(if report.is_complete() { 0 } else { EXIT_INCOMPLETE })
}

fn format_report(report: &CoverageReport, cfdg: &Cfdg) -> String {
    let mut out = format!(
        "{}: {:.1}% ({} of {} obligations) [{} semantics, {} loop mode]\n",
        report.criterion,
        report.verdict_percent,
        report.satisfied(),
        report.total(),
        report.semantics.as_str(),
        report.loop_mode.as_str(),
    );
    for d in cfdg.decisions() {
        let members: Vec<String> = d.members.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("decision {}: {}\n", d.id, members.join(" ")));
    }
    for o in &report.obligations {
        let status = if o.is_satisfied() { "ok" } else { "MISSING" };
        out.push_str(&format!("  {status:<7} {} {}", o.kind, o.subject));
        if !o.witnesses.is_empty() {
            let w: Vec<String> = o.witnesses.iter().map(|w| w.join(" + ")).collect();
            out.push_str(&format!(" by {}", w.join(", ")));
        }
        if let Some(detail) = &o.detail {
            out.push_str(&format!(": {detail}"));
        }
        out.push('\n');
    }
    out
}

fn gen(args: GenArgs) -> Result<u8> {
    let expr = parse_expression(&args.expr)?;
    let program = expr_to_cfg(&expr);
    let doc = document_from_cfg(&expr.to_string(), &program.cfg);
    let text = if args.annotate {
        let (cfdg, _) = create_cfdg(&program.cfg)?;
        emit_annotated_dot(&doc, &[cfdg])?
    } else {
        emit_dot(&doc)
    };
    write_output(args.output.as_deref(), &text)?;
    Ok(0)
}

fn simulate(args: SimulateArgs) -> Result<u8> {
    let expr = parse_expression(&args.expr)?;
    let program = expr_to_cfg(&expr);
    let symbols = program.symbols().to_vec();
    let mut runs = Vec::new();
    for (i, text) in args.vectors.iter().enumerate() {
        let vector: TestVector = text.parse()?;
        let assignment = vector.to_assignment(&symbols)?;
        let mut run = program.simulate(&assignment)?;
        let read = program.evaluated_symbols(&run);
        for (s, v) in symbols.iter().zip(&vector.0) {
            if v.is_none() && read.contains(s) {
                eprintln!("warning: vector {text}: don't-care `{s}` is evaluated and was taken as false");
            }
        }
        run.name = format!("t{i}");
        runs.push(run);
    }
    let suite = TestSuite::new(runs)?;
    write_output(args.output.as_deref(), &serialize_traces(&suite))?;
    Ok(0)
}

fn oracle(args: OracleArgs) -> Result<u8> {
    let expr = parse_expression(&args.expr)?;
    let suites = minimal_suites(&expr, args.criterion, args.semantics)?;
    let size = suites.first().map(Vec::len);
    let shown = &suites[..args.limit.unwrap_or(suites.len()).min(suites.len())];
    let text = match args.format {
        Format::Json => {
            let listed: Vec<Vec<String>> = shown
                .iter()
                .map(|s| s.iter().map(|v| v.to_string()).collect())
                .collect();
            let value = json!({
                "expr": expr.to_string(),
                "symbols": expr.symbols(),
                "criterion": args.criterion,
                "semantics": args.semantics,
                "minimal_size": size,
                "suite_count": suites.len(),
                "suites": listed,
            });
            serde_json::to_string_pretty(&value)? + "\n"
        }
        Format::Text => match size {
            None => format!(
                "no suite meets {} under {} semantics\n",
                args.criterion,
                args.semantics.as_str()
            ),
            Some(n) => {
                let mut out = format!(
                    "minimal size {n}, {} suites over {}\n",
                    suites.len(),
                    expr.symbols().join(" ")
                );
                for s in shown {
                    let vs: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                    out.push_str(&format!("{}\n", vs.join(" ")));
                }
                if shown.len() < suites.len() {
                    out.push_str(&format!("... {} more\n", suites.len() - shown.len()));
                }
                out
            }
        },
    };
    write_output(args.output.as_deref(), &text)?;
    Ok(if size.is_some() { 0 } else { EXIT_INCOMPLETE })
}
