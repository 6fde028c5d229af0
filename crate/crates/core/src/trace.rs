//! Test runs as vertex paths, the line-oriented trace file format, and the
//! split of a run into passes through one decision.
//!
//! Trace files hold one run per line:
//!
//! ```text
//! # comment
//! t1: x0 a ret
//! t2: x0 a "vertex with spaces" ret
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Cfg, Decision, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate run name `{0}`")]
    DuplicateRun(String),
    #[error("run `{run}` is empty")]
    EmptyRun { run: String },
    #[error("run `{run}`, position {position}: unknown vertex `{vertex}`")]
    UnknownVertex {
        run: String,
        position: usize,
        vertex: VertexId,
    },
    #[error("run `{run}` starts at `{vertex}`, which is not an entry vertex")]
    NotAtEntry { run: String, vertex: VertexId },
    #[error("run `{run}` ends at `{vertex}`, which is not an exit vertex")]
    NotAtExit { run: String, vertex: VertexId },
    #[error("run `{run}`, position {position}: no edge {tail} -> {head}")]
    DanglingStep {
        run: String,
        position: usize,
        tail: VertexId,
        head: VertexId,
    },
}

/// One test's walk through the graph, entry to exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub name: String,
    pub path: Vec<VertexId>,
}

impl Run {
    pub fn new<I, V>(name: impl Into<String>, path: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<VertexId>,
    {
        Run {
            name: name.into(),
            path: path.into_iter().map(Into::into).collect(),
        }
    }

    /// Traversed edges in order, repeats included.
    pub fn edges(&self) -> impl Iterator<Item = (&VertexId, &VertexId)> + '_ {
        self.path.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn edge_set(&self) -> BTreeSet<(VertexId, VertexId)> {
        self.edges().map(|(t, h)| (t.clone(), h.clone())).collect()
    }

    pub fn visits(&self, v: &str) -> bool {
        self.path.iter().any(|p| p.as_str() == v)
    }
}

/// A set of uniquely named runs, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestSuite {
    runs: Vec<Run>,
}

impl TestSuite {
    pub fn new(runs: Vec<Run>) -> Result<Self, TraceError> {
        let mut seen = HashSet::new();
        for r in &runs {
            if !seen.insert(r.name.as_str()) {
                return Err(TraceError::DuplicateRun(r.name.clone()));
            }
        }
        Ok(TestSuite { runs })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn push(&mut self, run: Run) -> Result<(), TraceError> {
        if self.runs.iter().any(|r| r.name == run.name) {
            return Err(TraceError::DuplicateRun(run.name));
        }
        self.runs.push(run);
        Ok(())
    }
}

/// Non-fatal findings while loading traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceWarning {
    /// The run stops before an exit vertex; accepted under `allow_partial`.
    Truncated { run: String, last: VertexId },
}

/// Checks that the run starts at an entry, ends at an exit, and only steps
/// along edges of `cfg`.
pub fn validate_run(cfg: &Cfg, run: &Run) -> Result<(), TraceError> {
    validate_run_with(cfg, run, false).map(|_| ())
}

fn validate_run_with(cfg: &Cfg, run: &Run, allow_partial: bool) -> Result<Option<TraceWarning>, TraceError> {
    let name = || run.name.clone();
    let (first, last) = match (run.path.first(), run.path.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(TraceError::EmptyRun { run: name() }),
    };
    let mut indices = Vec::with_capacity(run.path.len());
    for (i, v) in run.path.iter().enumerate() {
        match cfg.index_of(v.as_str()) {
            Some(ix) => indices.push(ix),
            None => {
                return Err(TraceError::UnknownVertex {
                    run: name(),
                    position: i + 1,
                    vertex: v.clone(),
                })
            }
        }
    }
    if !cfg.pred_ix(indices[0]).is_empty() {
        return Err(TraceError::NotAtEntry {
            run: name(),
            vertex: first.clone(),
        });
    }
    for (i, w) in indices.windows(2).enumerate() {
        if !cfg.succ_ix(w[0]).contains(&w[1]) {
            return Err(TraceError::DanglingStep {
                run: name(),
                position: i + 2,
                tail: run.path[i].clone(),
                head: run.path[i + 1].clone(),
            });
        }
    }
    if !cfg.succ_ix(*indices.last().expect("non-empty")).is_empty() {
        if allow_partial {
            return Ok(Some(TraceWarning::Truncated {
                run: name(),
                last: last.clone(),
            }));
        }
        return Err(TraceError::NotAtExit {
            run: name(),
            vertex: last.clone(),
        });
    }
    Ok(None)
}

/// Reads trace lines without consulting a graph.
pub fn parse_trace_lines(text: &str) -> Result<Vec<Run>, TraceError> {
    let mut runs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let tokens = tokenize(raw).map_err(|message| TraceError::Syntax { line, message })?;
        let Some(tokens) = tokens else { continue };
        let (name, path) = tokens;
        if name.is_empty() {
            return Err(TraceError::Syntax {
                line,
                message: "missing run name before `:`".into(),
            });
        }
        if path.is_empty() {
            return Err(TraceError::EmptyRun { run: name });
        }
        runs.push(Run::new(name, path));
    }
    Ok(runs)
}

/// Parses a trace file and validates every run against `cfg`. With
/// `allow_partial`, runs that stop before an exit are kept and reported as
/// warnings.
pub fn parse_traces(text: &str, cfg: &Cfg, allow_partial: bool) -> Result<(TestSuite, Vec<TraceWarning>), TraceError> {
    let runs = parse_trace_lines(text)?;
    let mut warnings = Vec::new();
    for run in &runs {
        if let Some(w) = validate_run_with(cfg, run, allow_partial)? {
            warnings.push(w);
        }
    }
    Ok((TestSuite::new(runs)?, warnings))
}

/// Writes a suite in the trace file format.
pub fn serialize_traces(suite: &TestSuite) -> String {
    let mut out = String::new();
    for run in suite.runs() {
        out.push_str(&quote_if_needed(&run.name, true));
        out.push(':');
        for v in &run.path {
            out.push(' ');
            out.push_str(&quote_if_needed(v.as_str(), false));
        }
        out.push('\n');
    }
    out
}

fn quote_if_needed(s: &str, is_name: bool) -> String {
    let plain = !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '#' || c == '\\' || (is_name && c == ':'));
    if plain {
        return s.to_owned();
    }
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

type Line = (String, Vec<String>);

/// Splits one line into `(name, vertices)`; `None` for blank and comment
/// lines.
fn tokenize(line: &str) -> Result<Option<Line>, String> {
    let mut tokens: Vec<String> = Vec::new();
    let mut colon_at: Option<usize> = None;
    let mut chars = line.chars().peekable();
    let mut current: Option<String> = None;
    while let Some(c) = chars.next() {
        match c {
            '#' => break,
            '"' => {
                let mut s = current.take().unwrap_or_default();
                loop {
                    match chars.next() {
                        None => return Err("unterminated quoted vertex id".into()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(e) => s.push(e),
                            None => return Err("unterminated quoted vertex id".into()),
                        },
                        Some(other) => s.push(other),
                    }
                }
                current = Some(s);
            }
            ':' if colon_at.is_none() => {
                if let Some(tok) = current.take() {
                    tokens.push(tok);
                }
                colon_at = Some(tokens.len());
            }
            c if c.is_whitespace() => {
                if let Some(tok) = current.take() {
                    tokens.push(tok);
                }
            }
            other => current.get_or_insert_with(String::new).push(other),
        }
    }
    if let Some(tok) = current.take() {
        tokens.push(tok);
    }
    if tokens.is_empty() && colon_at.is_none() {
        return Ok(None);
    }
    let Some(split) = colon_at else {
        return Err("expected `name: vertex ...`".into());
    };
    let mut tokens = tokens.into_iter();
    let name_parts: Vec<String> = tokens.by_ref().take(split).collect();
    if name_parts.len() > 1 {
        return Err("run name must be a single token".into());
    }
    let name = name_parts.into_iter().next().unwrap_or_default();
    Ok(Some((name, tokens.collect())))
}

/// One pass of a run through a decision, ending on the edge that leaves it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTraversal<'a> {
    pub run: &'a Run,
    pub decision_id: usize,
    /// Edges whose tail is a decision member, in the order walked; the last
    /// one leaves the decision.
    pub internal_edges: Vec<(VertexId, VertexId)>,
    pub outcome: VertexId,
}

/// Splits `run` at every edge that leaves `decision`. A pass cut short by the
/// end of a truncated run is dropped.
pub fn decision_traversals<'a>(run: &'a Run, decision: &Decision) -> Vec<DecisionTraversal<'a>> {
    let mut out = Vec::new();
    let mut segment = Vec::new();
    for (t, h) in run.edges() {
        if !decision.contains(t.as_str()) {
            continue;
        }
        segment.push((t.clone(), h.clone()));
        if !decision.contains(h.as_str()) {
            out.push(DecisionTraversal {
                run,
                decision_id: decision.id,
                internal_edges: std::mem::take(&mut segment),
                outcome: h.clone(),
            });
        }
    }
    out
}

/// Renders a run as one trace line; used for diagnostics.
pub fn format_run(run: &Run) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}:", quote_if_needed(&run.name, true));
    for v in &run.path {
        let _ = write!(s, " {}", quote_if_needed(v.as_str(), false));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CfgBuilder;

    fn and_guard() -> Cfg {
        let mut b = CfgBuilder::new();
        for v in ["x0", "a", "b", "x1", "ret"] {
            b.vertex(v);
        }
        b.edge("x0", "a")
            .edge("a", "b")
            .edge("a", "ret")
            .edge("b", "x1")
            .edge("b", "ret")
            .edge("x1", "ret");
        b.build(true).unwrap()
    }

    fn edge(t: &str, h: &str) -> (VertexId, VertexId) {
        (t.into(), h.into())
    }

    #[test]
    fn parses_and_guard_runs() {
        let text = "# runs of a && b\nt1: x0 a ret\n\nt3: x0 a b x1 ret  # a, b\n";
        let (suite, warnings) = parse_traces(text, &and_guard(), false).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(suite.len(), 2);
        assert_eq!(
            suite.runs()[0].edge_set(),
            [edge("x0", "a"), edge("a", "ret")].into_iter().collect()
        );
        assert_eq!(suite.runs()[1].path.len(), 5);
    }

    #[test]
    fn dangling_step_position() {
        let err = parse_traces("bad: x0 b ret", &and_guard(), false).unwrap_err();
        assert!(matches!(err, TraceError::DanglingStep { position: 2, .. }), "{err:?}");
    }

    #[test]
    fn entry_and_exit_checks() {
        let cfg = and_guard();
        assert!(validate_run(&cfg, &Run::new("b", ["x0", "a", "b", "ret"])).is_ok());
        assert!(matches!(
            validate_run(&cfg, &Run::new("mid", ["a", "b", "ret"])),
            Err(TraceError::NotAtEntry { .. })
        ));
        assert!(matches!(
            validate_run(&cfg, &Run::new("stop", ["x0", "a", "b"])),
            Err(TraceError::NotAtExit { .. })
        ));
        let (suite, warnings) = parse_traces("stop: x0 a b", &cfg, true).unwrap();
        assert_eq!(suite.len(), 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_trace_lines("x0 a ret"),
            Err(TraceError::Syntax { line: 1, .. })
        ));
        assert!(matches!(parse_trace_lines("t: \"x0"), Err(TraceError::Syntax { .. })));
        assert!(matches!(parse_trace_lines("t:"), Err(TraceError::EmptyRun { .. })));
        assert!(parse_trace_lines("t: a\nt: a").is_ok());
        assert!(matches!(
            parse_traces("t: x0 a ret\nt: x0 a ret", &and_guard(), false),
            Err(TraceError::DuplicateRun(_))
        ));
    }

    #[test]
    fn quoted_ids() {
        let runs = parse_trace_lines(r#""my run": "<bb 2>" "say \"hi\"" c:d"#).unwrap();
        assert_eq!(runs[0].name, "my run");
        assert_eq!(
            runs[0].path,
            vec![
                VertexId::from("<bb 2>"),
                VertexId::from("say \"hi\""),
                VertexId::from("c:d")
            ]
        );
        let suite = TestSuite::new(runs).unwrap();
        assert_eq!(parse_trace_lines(&serialize_traces(&suite)).unwrap(), suite.runs());
    }

    #[test]
    fn traversals_of_and_guard_runs() {
        let d = Decision::new(0, "a", ["a", "b"]);
        let tt = Run::new("tt", ["x0", "a", "b", "x1", "ret"]);
        let t = decision_traversals(&tt, &d);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].outcome.as_str(), "x1");
        assert_eq!(t[0].internal_edges, vec![edge("a", "b"), edge("b", "x1")]);

        let f = Run::new("f", ["x0", "a", "ret"]);
        let t = decision_traversals(&f, &d);
        assert_eq!(t[0].outcome.as_str(), "ret");
        assert_eq!(t[0].internal_edges, vec![edge("a", "ret")]);

        let other = Decision::new(1, "zz", ["zz"]);
        assert!(decision_traversals(&f, &other).is_empty());
    }

    #[test]
    fn loop_gives_one_traversal_per_exit() {
        // while (c1 || c2) { body }
        let d = Decision::new(0, "c1", ["c1", "c2"]);
        let run = Run::new("r", ["e", "c1", "body", "c1", "c2", "body", "c1", "c2", "out"]);
        let t = decision_traversals(&run, &d);
        let outcomes: Vec<&str> = t.iter().map(|t| t.outcome.as_str()).collect();
        assert_eq!(outcomes, ["body", "body", "out"]);
        assert_eq!(t[1].internal_edges, vec![edge("c1", "c2"), edge("c2", "body")]);
    }
}
