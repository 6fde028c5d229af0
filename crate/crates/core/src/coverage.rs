//! Control-flow coverage criteria evaluated over a decision graph.
//!
//! Each criterion is broken into obligations (a vertex visited, a decision
//! outcome taken, an independence pair exhibited). A suite meets a criterion
//! when every obligation is satisfied; the report also carries the
//! percentage satisfied.
//!
//! Runs are looked at per decision as *observations*. In
//! [`LoopMode::Traversal`] each pass through a decision is one observation;
//! in [`LoopMode::EdgeSet`] a whole run is one observation, made of every
//! edge it walks out of the decision's members.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{Cfdg, Decision, VertexId};
use crate::trace::TestSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Sc,
    Dc,
    Cc,
    Dcc,
    Mcc,
    Fpc,
    Mcdc,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::Sc,
        Criterion::Dc,
        Criterion::Cc,
        Criterion::Dcc,
        Criterion::Mcc,
        Criterion::Fpc,
        Criterion::Mcdc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Sc => "sc",
            Criterion::Dc => "dc",
            Criterion::Cc => "cc",
            Criterion::Dcc => "dcc",
            Criterion::Mcc => "mcc",
            Criterion::Fpc => "fpc",
            Criterion::Mcdc => "mcdc",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sc" => Criterion::Sc,
            "dc" => Criterion::Dc,
            "cc" => Criterion::Cc,
            "dcc" | "d/cc" => Criterion::Dcc,
            "mcc" => Criterion::Mcc,
            "fpc" => Criterion::Fpc,
            "mcdc" | "mc/dc" => Criterion::Mcdc,
            _ => return Err(format!("unknown criterion `{s}`")),
        })
    }
}

/// How "vary only that condition" is read when short-circuiting leaves some
/// conditions unevaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// Conditions evaluated in both observations must take the same edge.
    #[default]
    Masking,
    /// The other conditions' taken edges must be identical, including which
    /// ones were evaluated at all.
    Strict,
    /// The printed formulas with `c` and `x` bound existentially; the
    /// agreement clause then always holds, and the outcome flip (for FPC
    /// and MC/DC) must be exhibited by one and the same exiting condition in
    /// both observations.
    PaperLiteral,
}

impl Semantics {
    pub const ALL: [Semantics; 3] = [Semantics::Masking, Semantics::Strict, Semantics::PaperLiteral];

    pub fn as_str(self) -> &'static str {
        match self {
            Semantics::Masking => "masking",
            Semantics::Strict => "strict",
            Semantics::PaperLiteral => "paper-literal",
        }
    }
}

impl FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "masking" => Ok(Semantics::Masking),
            "strict" | "unique-cause" => Ok(Semantics::Strict),
            "paper-literal" | "paper_literal" | "literal" => Ok(Semantics::PaperLiteral),
            _ => Err(format!("unknown semantics `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    #[default]
    Traversal,
    EdgeSet,
}

impl LoopMode {
    pub const ALL: [LoopMode; 2] = [LoopMode::Traversal, LoopMode::EdgeSet];

    pub fn as_str(self) -> &'static str {
        match self {
            LoopMode::Traversal => "traversal",
            LoopMode::EdgeSet => "edge-set",
        }
    }
}

impl FromStr for LoopMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "traversal" => Ok(LoopMode::Traversal),
            "edge-set" | "edge_set" => Ok(LoopMode::EdgeSet),
            _ => Err(format!("unknown loop mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationKind {
    VertexVisit,
    EntryVisit,
    ExitVisit,
    DecisionOutcome,
    ConditionOutcome,
    IndependencePair,
}

impl ObligationKind {
    /// The name used in JSON reports.
    pub fn as_str(self) -> &'static str {
        match self {
            ObligationKind::VertexVisit => "vertex_visit",
            ObligationKind::EntryVisit => "entry_visit",
            ObligationKind::ExitVisit => "exit_visit",
            ObligationKind::DecisionOutcome => "decision_outcome",
            ObligationKind::ConditionOutcome => "condition_outcome",
            ObligationKind::IndependencePair => "independence_pair",
        }
    }
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Vertex(VertexId),
    Decision(usize),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Vertex(v) => write!(f, "{v}"),
            Subject::Decision(id) => write!(f, "decision {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub subject: Subject,
    pub status: Status,
    /// Run names backing a satisfied obligation: one name, or two for an
    /// observation pair.
    pub witnesses: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Obligation {
    fn new(kind: ObligationKind, subject: Subject, witness: Option<Vec<String>>) -> Self {
        Obligation {
            kind,
            subject,
            status: if witness.is_some() {
                Status::Satisfied
            } else {
                Status::Missing
            },
            witnesses: witness.into_iter().collect(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: impl FnOnce() -> Option<String>) -> Self {
        if self.status == Status::Missing {
            self.detail = detail();
        }
        self
    }

    pub fn is_satisfied(&self) -> bool {
        self.status == Status::Satisfied
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub criterion: Criterion,
    pub semantics: Semantics,
    pub loop_mode: LoopMode,
    pub verdict_percent: f64,
    pub obligations: Vec<Obligation>,
}

impl CoverageReport {
    fn new(criterion: Criterion, config: &Config, mut obligations: Vec<Obligation>) -> Self {
        obligations.sort_by(|a, b| (a.kind, &a.subject).cmp(&(b.kind, &b.subject)));
        let total = obligations.len();
        let satisfied = obligations.iter().filter(|o| o.is_satisfied()).count();
        let verdict_percent = if total == 0 {
            100.0
        } else {
            100.0 * satisfied as f64 / total as f64
        };
        CoverageReport {
            criterion,
            semantics: config.semantics,
            loop_mode: config.loop_mode,
            verdict_percent,
            obligations,
        }
    }

    pub fn total(&self) -> usize {
        self.obligations.len()
    }

    pub fn satisfied(&self) -> usize {
        self.obligations.iter().filter(|o| o.is_satisfied()).count()
    }

    /// Every obligation satisfied (vacuously true when there are none).
    pub fn is_complete(&self) -> bool {
        self.obligations.iter().all(Obligation::is_satisfied)
    }

    pub fn missing(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| !o.is_satisfied())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Config {
    pub semantics: Semantics,
    pub loop_mode: LoopMode,
}

/// Edges taken out of one decision by one observation, by vertex index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Observation {
    taken: BTreeMap<usize, BTreeSet<usize>>,
    outcomes: BTreeSet<usize>,
}

/// Distinct observations of a decision, each with the first run showing it.
#[derive(Debug, Default)]
struct Observations {
    items: Vec<(Observation, usize)>,
}

impl Observations {
    fn add(&mut self, seen: &mut HashMap<Observation, ()>, obs: Observation, run: usize) {
        if seen.insert(obs.clone(), ()).is_none() {
            self.items.push((obs, run));
        }
    }
}

/// Precomputed observations of one suite over one decision graph.
pub struct Evaluator<'a> {
    cfdg: &'a Cfdg,
    suite: &'a TestSuite,
    config: Config,
    visited: Vec<Option<usize>>,
    per_decision: Vec<Observations>,
    external: Vec<BTreeSet<usize>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfdg: &'a Cfdg, suite: &'a TestSuite, config: Config) -> Self {
        let cfg = cfdg.cfg();
        let paths: Vec<Vec<usize>> = suite
            .runs()
            .iter()
            .map(|r| r.path.iter().filter_map(|v| cfg.index_of(v.as_str())).collect())
            .collect();

        let mut visited = vec![None; cfg.len()];
        for (ri, path) in paths.iter().enumerate() {
            for &v in path {
                visited[v].get_or_insert(ri);
            }
        }

        let decisions = cfdg.decisions();
        let external = decisions
            .iter()
            .map(|d| {
                cfdg.external_successors(d)
                    .iter()
                    .filter_map(|v| cfg.index_of(v.as_str()))
                    .collect()
            })
            .collect();

        let mut per_decision: Vec<Observations> = decisions.iter().map(|_| Observations::default()).collect();
        let mut seen: Vec<HashMap<Observation, ()>> = decisions.iter().map(|_| HashMap::new()).collect();
        for (ri, path) in paths.iter().enumerate() {
            let mut open: HashMap<usize, Observation> = HashMap::new();
            for w in path.windows(2) {
                let (t, h) = (w[0], w[1]);
                let Some(d) = cfdg.owner_ix(t) else { continue };
                let obs = open.entry(d).or_insert_with(|| Observation {
                    taken: BTreeMap::new(),
                    outcomes: BTreeSet::new(),
                });
                obs.taken.entry(t).or_default().insert(h);
                if cfdg.owner_ix(h) != Some(d) {
                    obs.outcomes.insert(h);
                    if config.loop_mode == LoopMode::Traversal {
                        let done = open.remove(&d).expect("just inserted");
                        per_decision[d].add(&mut seen[d], done, ri);
                    }
                }
            }
            if config.loop_mode == LoopMode::EdgeSet {
                let mut finished: Vec<_> = open.into_iter().collect();
                finished.sort_by_key(|(d, _)| *d);
                for (d, obs) in finished {
                    per_decision[d].add(&mut seen[d], obs, ri);
                }
            }
        }

        Evaluator {
            cfdg,
            suite,
            config,
            visited,
            per_decision,
            external,
        }
    }

    fn name(&self, run: usize) -> String {
        self.suite.runs()[run].name.clone()
    }

    fn vertex(&self, ix: usize) -> &VertexId {
        self.cfdg.cfg().id(ix)
    }

    fn decision_members(&self, d: &Decision) -> Vec<usize> {
        let cfg = self.cfdg.cfg();
        d.members.iter().filter_map(|m| cfg.index_of(m.as_str())).collect()
    }

    fn visit_obligations(&self, kind: ObligationKind, vertices: impl Iterator<Item = usize>) -> Vec<Obligation> {
        vertices
            .map(|v| {
                let witness = self.visited[v].map(|r| vec![self.name(r)]);
                Obligation::new(kind, Subject::Vertex(self.vertex(v).clone()), witness)
            })
            .collect()
    }

    fn statement_obligations(&self) -> Vec<Obligation> {
        self.visit_obligations(ObligationKind::VertexVisit, 0..self.cfdg.cfg().len())
    }

    fn decision_obligations(&self) -> Vec<Obligation> {
        self.cfdg
            .decisions()
            .iter()
            .enumerate()
            .map(|(pos, d)| {
                let observations = &self.per_decision[pos].items;
                let witness = match self.config.loop_mode {
                    LoopMode::Traversal => {
                        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
                        for (obs, run) in observations {
                            for &o in &obs.outcomes {
                                first.entry(o).or_insert(*run);
                            }
                        }
                        (first.len() >= 2).then(|| {
                            let mut runs: Vec<usize> = first.values().copied().collect();
                            runs.sort_unstable();
                            runs.dedup();
                            runs.into_iter().map(|r| self.name(r)).collect()
                        })
                    }
                    LoopMode::EdgeSet => observations
                        .iter()
                        .find(|(obs, _)| obs.outcomes.len() >= 2)
                        .map(|(_, run)| vec![self.name(*run)]),
                };
                Obligation::new(ObligationKind::DecisionOutcome, Subject::Decision(d.id), witness).with_detail(|| {
                    let reached: BTreeSet<&str> = observations
                        .iter()
                        .flat_map(|(o, _)| o.outcomes.iter().map(|&v| self.vertex(v).as_str()))
                        .collect();
                    let external: Vec<&str> = self.external[pos].iter().map(|&v| self.vertex(v).as_str()).collect();
                    Some(format!("outcomes reached {reached:?} of {external:?}"))
                })
            })
            .collect()
    }

    fn condition_obligations(&self) -> Vec<Obligation> {
        let mut out = Vec::new();
        for (pos, d) in self.cfdg.decisions().iter().enumerate() {
            let observations = &self.per_decision[pos].items;
            for v in self.decision_members(d) {
                let witness = match self.config.loop_mode {
                    LoopMode::Traversal => {
                        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
                        for (obs, run) in observations {
                            for &h in obs.taken.get(&v).into_iter().flatten() {
                                first.entry(h).or_insert(*run);
                            }
                        }
                        (first.len() >= 2).then(|| {
                            let mut runs: Vec<usize> = first.values().copied().collect();
                            runs.sort_unstable();
                            runs.dedup();
                            runs.into_iter().map(|r| self.name(r)).collect()
                        })
                    }
                    LoopMode::EdgeSet => observations
                        .iter()
                        .find(|(obs, _)| obs.taken.get(&v).is_some_and(|h| h.len() >= 2))
                        .map(|(_, run)| vec![self.name(*run)]),
                };
                out.push(Obligation::new(
                    ObligationKind::ConditionOutcome,
                    Subject::Vertex(self.vertex(v).clone()),
                    witness,
                ));
            }
        }
        out
    }

    /// Searches ordered observation pairs of each decision for one satisfying
    /// `accept(v, o1, o2, external)` with `v` taking different edges.
    fn pair_obligations<F>(&self, accept: F, detail: impl Fn(usize, usize) -> Option<String>) -> Vec<Obligation>
    where
        F: Fn(usize, &Observation, &Observation, &BTreeSet<usize>) -> bool,
    {
        let mut out = Vec::new();
        for (pos, d) in self.cfdg.decisions().iter().enumerate() {
            let observations = &self.per_decision[pos].items;
            let external = &self.external[pos];
            for v in self.decision_members(d) {
                let mut witness = None;
                'search: for (o1, r1) in observations {
                    for (o2, r2) in observations {
                        if varies(v, o1, o2) && accept(v, o1, o2, external) {
                            witness = Some(vec![self.name(*r1), self.name(*r2)]);
                            break 'search;
                        }
                    }
                }
                out.push(
                    Obligation::new(
                        ObligationKind::IndependencePair,
                        Subject::Vertex(self.vertex(v).clone()),
                        witness,
                    )
                    .with_detail(|| detail(pos, v)),
                );
            }
        }
        out
    }

    fn agreement_detail(&self, pos: usize, v: usize) -> Option<String> {
        let observations = &self.per_decision[pos].items;
        let external = &self.external[pos];
        let masked_only = observations.iter().any(|(o1, _)| {
            observations.iter().any(|(o2, _)| {
                varies(v, o1, o2)
                    && agrees(Semantics::Masking, v, o1, o2)
                    && !agrees(Semantics::Strict, v, o1, o2)
                    && flips(Semantics::Masking, o1, o2, external)
            })
        });
        if self.config.semantics == Semantics::Strict && masked_only {
            Some(format!(
                "pairs varying `{}` differ in which other conditions were evaluated; \
                 short-circuiting rules out unique-cause independence",
                self.vertex(v)
            ))
        } else {
            None
        }
    }

    pub fn sc(&self) -> CoverageReport {
        CoverageReport::new(Criterion::Sc, &self.config, self.statement_obligations())
    }

    pub fn dc(&self) -> CoverageReport {
        CoverageReport::new(Criterion::Dc, &self.config, self.decision_obligations())
    }

    pub fn cc(&self) -> CoverageReport {
        CoverageReport::new(Criterion::Cc, &self.config, self.condition_obligations())
    }

    pub fn dcc(&self) -> CoverageReport {
        let mut obligations = self.statement_obligations();
        obligations.extend(self.decision_obligations());
        obligations.extend(self.condition_obligations());
        CoverageReport::new(Criterion::Dcc, &self.config, obligations)
    }

    pub fn mcc(&self) -> CoverageReport {
        let semantics = self.config.semantics;
        let obligations = self.pair_obligations(
            |v, o1, o2, _| agrees(semantics, v, o1, o2),
            |pos, v| self.agreement_detail(pos, v),
        );
        CoverageReport::new(Criterion::Mcc, &self.config, obligations)
    }

    pub fn fpc(&self) -> CoverageReport {
        let semantics = self.config.semantics;
        let obligations = self.pair_obligations(|_, o1, o2, ext| flips(semantics, o1, o2, ext), |_, _| None);
        CoverageReport::new(Criterion::Fpc, &self.config, obligations)
    }

    pub fn mcdc(&self) -> CoverageReport {
        let cfg = self.cfdg.cfg();
        let semantics = self.config.semantics;
        let entries = (0..cfg.len()).filter(|&v| cfg.pred_ix(v).is_empty());
        let exits = (0..cfg.len()).filter(|&v| cfg.succ_ix(v).is_empty());
        let mut obligations = self.visit_obligations(ObligationKind::EntryVisit, entries);
        obligations.extend(self.visit_obligations(ObligationKind::ExitVisit, exits));
        obligations.extend(self.decision_obligations());
        obligations.extend(self.condition_obligations());
        obligations.extend(self.pair_obligations(
            |v, o1, o2, ext| agrees(semantics, v, o1, o2) && flips(semantics, o1, o2, ext),
            |pos, v| self.agreement_detail(pos, v),
        ));
        CoverageReport::new(Criterion::Mcdc, &self.config, obligations)
    }

    pub fn evaluate(&self, criterion: Criterion) -> CoverageReport {
        match criterion {
            Criterion::Sc => self.sc(),
            Criterion::Dc => self.dc(),
            Criterion::Cc => self.cc(),
            Criterion::Dcc => self.dcc(),
            Criterion::Mcc => self.mcc(),
            Criterion::Fpc => self.fpc(),
            Criterion::Mcdc => self.mcdc(),
        }
    }
}

/// `v` takes different edges in the two observations.
fn varies(v: usize, o1: &Observation, o2: &Observation) -> bool {
    match (o1.taken.get(&v), o2.taken.get(&v)) {
        (Some(a), Some(b)) => a.iter().any(|s1| b.iter().any(|s2| s1 != s2)),
        _ => false,
    }
}

/// The other conditions of the decision are held fixed.
fn agrees(semantics: Semantics, v: usize, o1: &Observation, o2: &Observation) -> bool {
    match semantics {
        Semantics::PaperLiteral => true,
        Semantics::Strict => {
            let others = |o: &'_ Observation| -> Vec<(usize, BTreeSet<usize>)> {
                o.taken
                    .iter()
                    .filter(|(&c, _)| c != v)
                    .map(|(&c, h)| (c, h.clone()))
                    .collect()
            };
            others(o1) == others(o2)
        }
        Semantics::Masking => o1
            .taken
            .iter()
            .filter(|(&c, _)| c != v)
            .all(|(c, h1)| o2.taken.get(c).is_none_or(|h2| h1 == h2)),
    }
}

/// The two observations reach the decision's two distinct outcomes. Under
/// the literal reading one and the same member must take the exit edge in
/// both.
fn flips(semantics: Semantics, o1: &Observation, o2: &Observation, external: &BTreeSet<usize>) -> bool {
    let both =
        |x1: usize, x2: usize| x1 != x2 && external.len() == 2 && external.contains(&x1) && external.contains(&x2);
    match semantics {
        Semantics::PaperLiteral => o1.taken.iter().any(|(c, h1)| {
            o2.taken
                .get(c)
                .is_some_and(|h2| h1.iter().any(|&x1| h2.iter().any(|&x2| both(x1, x2))))
        }),
        _ => o1.outcomes.iter().any(|&x1| o2.outcomes.iter().any(|&x2| both(x1, x2))),
    }
}

pub fn evaluate(
    cfdg: &Cfdg,
    suite: &TestSuite,
    criterion: Criterion,
    semantics: Semantics,
    loop_mode: LoopMode,
) -> CoverageReport {
    Evaluator::new(cfdg, suite, Config { semantics, loop_mode }).evaluate(criterion)
}

pub fn evaluate_sc(cfdg: &Cfdg, suite: &TestSuite) -> CoverageReport {
    Evaluator::new(cfdg, suite, Config::default()).sc()
}

pub fn evaluate_dc(cfdg: &Cfdg, suite: &TestSuite, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(
        cfdg,
        suite,
        Config {
            loop_mode,
            ..Config::default()
        },
    )
    .dc()
}

pub fn evaluate_cc(cfdg: &Cfdg, suite: &TestSuite, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(
        cfdg,
        suite,
        Config {
            loop_mode,
            ..Config::default()
        },
    )
    .cc()
}

pub fn evaluate_dcc(cfdg: &Cfdg, suite: &TestSuite, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(
        cfdg,
        suite,
        Config {
            loop_mode,
            ..Config::default()
        },
    )
    .dcc()
}

pub fn evaluate_mcc(cfdg: &Cfdg, suite: &TestSuite, semantics: Semantics, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(cfdg, suite, Config { semantics, loop_mode }).mcc()
}

pub fn evaluate_fpc(cfdg: &Cfdg, suite: &TestSuite, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(
        cfdg,
        suite,
        Config {
            loop_mode,
            ..Config::default()
        },
    )
    .fpc()
}

pub fn evaluate_mcdc(cfdg: &Cfdg, suite: &TestSuite, semantics: Semantics, loop_mode: LoopMode) -> CoverageReport {
    Evaluator::new(cfdg, suite, Config { semantics, loop_mode }).mcdc()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::create_cfdg;
    use crate::graph::CfgBuilder;
    use crate::trace::Run;

    fn and_guard() -> Cfdg {
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
        create_cfdg(&b.build(true).unwrap()).unwrap().0
    }

    fn tt() -> Run {
        Run::new("tt", ["x0", "a", "b", "x1", "ret"])
    }
    fn tf() -> Run {
        Run::new("tf", ["x0", "a", "b", "ret"])
    }
    fn f() -> Run {
        Run::new("f", ["x0", "a", "ret"])
    }

    fn suite(runs: Vec<Run>) -> TestSuite {
        TestSuite::new(runs).unwrap()
    }

    fn independence(report: &CoverageReport, v: &str) -> bool {
        report
            .obligations
            .iter()
            .find(|o| o.kind == ObligationKind::IndependencePair && o.subject == Subject::Vertex(v.into()))
            .expect("obligation present")
            .is_satisfied()
    }

    #[test]
    fn statement_coverage() {
        let cfdg = and_guard();
        assert!(evaluate_sc(&cfdg, &suite(vec![tt()])).is_complete());
        let r = evaluate_sc(&cfdg, &suite(vec![tf()]));
        assert_eq!((r.satisfied(), r.total()), (4, 5));
        assert_eq!(r.missing().next().unwrap().subject, Subject::Vertex("x1".into()));
        let r = evaluate_sc(&cfdg, &suite(vec![f()]));
        assert_eq!((r.satisfied(), r.total()), (3, 5));
        assert_eq!(r.missing().next().unwrap().subject, Subject::Vertex("b".into()));
        let r = evaluate_sc(&cfdg, &suite(vec![]));
        assert_eq!((r.satisfied(), r.total()), (0, 5));
        assert_eq!(r.verdict_percent, 0.0);
    }

    #[test]
    fn single_vertex_graph_is_covered_by_its_trivial_run() {
        let cfg = crate::graph::build_cfg(["v"], [], [], true).unwrap();
        let cfdg = create_cfdg(&cfg).unwrap().0;
        let s = suite(vec![Run::new("only", ["v"])]);
        assert!(evaluate_sc(&cfdg, &s).is_complete());
        assert!(evaluate_mcdc(&cfdg, &s, Semantics::Masking, LoopMode::Traversal).is_complete());
    }

    #[test]
    fn decision_coverage() {
        let cfdg = and_guard();
        assert!(evaluate_dc(&cfdg, &suite(vec![tt(), f()]), LoopMode::Traversal).is_complete());
        let r = evaluate_dc(&cfdg, &suite(vec![tt()]), LoopMode::Traversal);
        assert!(!r.is_complete());
        assert!(r.obligations[0].detail.as_deref().unwrap().contains("x1"));
        // one loop-free run never shows both outcomes
        assert!(!evaluate_dc(&cfdg, &suite(vec![tt(), f()]), LoopMode::EdgeSet).is_complete());
    }

    #[test]
    fn no_decisions_is_vacuous() {
        let cfg = crate::graph::build_cfg(["a", "b"], [("a".into(), "b".into())], [], true).unwrap();
        let cfdg = create_cfdg(&cfg).unwrap().0;
        let empty = suite(vec![]);
        for c in [Criterion::Dc, Criterion::Cc, Criterion::Mcc, Criterion::Fpc] {
            let r = evaluate(&cfdg, &empty, c, Semantics::Masking, LoopMode::Traversal);
            assert!(r.is_complete() && r.total() == 0 && r.verdict_percent == 100.0);
        }
        let r = evaluate(&cfdg, &empty, Criterion::Mcdc, Semantics::Masking, LoopMode::Traversal);
        assert_eq!((r.satisfied(), r.total()), (0, 2));
    }

    #[test]
    fn condition_coverage() {
        let cfdg = and_guard();
        assert!(evaluate_cc(&cfdg, &suite(vec![tt(), tf(), f()]), LoopMode::Traversal).is_complete());
        let r = evaluate_cc(&cfdg, &suite(vec![tt(), f()]), LoopMode::Traversal);
        let missing: Vec<_> = r.missing().map(|o| o.subject.clone()).collect();
        assert_eq!(missing, vec![Subject::Vertex("b".into())]);
    }

    #[test]
    fn decision_condition_coverage() {
        let cfdg = and_guard();
        assert!(evaluate_dcc(&cfdg, &suite(vec![tt(), tf(), f()]), LoopMode::Traversal).is_complete());
        // c1 varied while c2 held false: the outcome never changes
        let r = evaluate_dcc(&cfdg, &suite(vec![tf(), f()]), LoopMode::Traversal);
        assert!(r.missing().any(|o| o.kind == ObligationKind::DecisionOutcome));
        let r = evaluate_dcc(&cfdg, &suite(vec![]), LoopMode::Traversal);
        assert_eq!(r.satisfied(), 0);
    }

    #[test]
    fn multiple_condition_semantics() {
        let cfdg = and_guard();
        let r = evaluate_mcc(&cfdg, &suite(vec![tt(), tf()]), Semantics::Masking, LoopMode::Traversal);
        assert!(independence(&r, "b"));
        let s = suite(vec![tt(), f()]);
        assert!(independence(
            &evaluate_mcc(&cfdg, &s, Semantics::Masking, LoopMode::Traversal),
            "a"
        ));
        let strict = evaluate_mcc(&cfdg, &s, Semantics::Strict, LoopMode::Traversal);
        assert!(!independence(&strict, "a"));
        assert!(strict.missing().any(|o| o.detail.is_some()));
        assert!(independence(
            &evaluate_mcc(&cfdg, &s, Semantics::PaperLiteral, LoopMode::Traversal),
            "a"
        ));
    }

    #[test]
    fn full_predicate_coverage() {
        let cfdg = and_guard();
        let r = evaluate_fpc(&cfdg, &suite(vec![tt(), f()]), LoopMode::Traversal);
        assert!(independence(&r, "a"));
        let r = evaluate_fpc(&cfdg, &suite(vec![tf(), f()]), LoopMode::Traversal);
        assert!(!independence(&r, "a"));
    }

    #[test]
    fn mcdc_masking_and_strict() {
        let cfdg = and_guard();
        let full = suite(vec![tt(), tf(), f()]);
        let r = evaluate_mcdc(&cfdg, &full, Semantics::Masking, LoopMode::Traversal);
        assert!(r.is_complete(), "{r:#?}");
        let kinds: BTreeSet<_> = r.obligations.iter().map(|o| o.kind).collect();
        assert_eq!(kinds.len(), 5);
        let pair = r
            .obligations
            .iter()
            .find(|o| o.subject == Subject::Vertex("a".into()) && o.kind == ObligationKind::IndependencePair)
            .unwrap();
        assert_eq!(pair.witnesses, vec![vec!["tt".to_string(), "f".to_string()]]);

        let r = evaluate_mcdc(&cfdg, &suite(vec![tt(), tf()]), Semantics::Masking, LoopMode::Traversal);
        assert!(!independence(&r, "a"));
        let r = evaluate_mcdc(&cfdg, &full, Semantics::Strict, LoopMode::Traversal);
        assert!(!independence(&r, "a"));
        assert!(independence(&r, "b"));
    }

    #[test]
    fn loop_traversals_are_separate_observations() {
        // while (c1 || c2) body; exit at out
        let mut b = CfgBuilder::new();
        for v in ["e", "c1", "c2", "body", "out"] {
            b.vertex(v);
        }
        b.edge("e", "c1")
            .edge("c1", "body")
            .edge("c1", "c2")
            .edge("c2", "body")
            .edge("c2", "out")
            .edge("body", "c1");
        let cfdg = create_cfdg(&b.build(true).unwrap()).unwrap().0;
        assert_eq!(cfdg.decisions().len(), 1);
        let s = suite(vec![Run::new(
            "r",
            ["e", "c1", "body", "c1", "c2", "body", "c1", "c2", "out"],
        )]);
        // one run, three passes: both outcomes and both edges of each condition
        assert!(evaluate_dc(&cfdg, &s, LoopMode::Traversal).is_complete());
        assert!(evaluate_dc(&cfdg, &s, LoopMode::EdgeSet).is_complete());
        let mcdc = evaluate_mcdc(&cfdg, &s, Semantics::Masking, LoopMode::Traversal);
        assert!(mcdc.is_complete(), "{mcdc:#?}");
        // as one edge set the run pairs with itself: both edges of c2 and both
        // outcomes sit in the same observation
        let mcdc = evaluate_mcdc(&cfdg, &s, Semantics::Masking, LoopMode::EdgeSet);
        assert!(independence(&mcdc, "c2"));
        let pair = mcdc
            .obligations
            .iter()
            .find(|o| o.kind == ObligationKind::IndependencePair)
            .unwrap();
        assert_eq!(pair.witnesses, vec![vec!["r".to_string(), "r".to_string()]]);
    }

    #[test]
    fn report_json_round_trip() {
        let cfdg = and_guard();
        let r = evaluate_mcdc(&cfdg, &suite(vec![tt(), f()]), Semantics::Strict, LoopMode::Traversal);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"criterion\":\"mcdc\""));
        assert!(json.contains("\"loop_mode\":\"traversal\""));
        assert!(json.contains("\"kind\":\"independence_pair\""));
        let back: CoverageReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        for o in &r.obligations {
            assert_eq!(serde_json::to_string(&o.kind).unwrap(), format!("\"{}\"", o.kind));
        }
    }
}
