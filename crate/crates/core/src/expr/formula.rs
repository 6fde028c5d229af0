//! Coverage conditions evaluated by brute-force quantification.
//!
//! This is a second, deliberately naive implementation of the coverage
//! criteria, meant as a cross-check for [`crate::coverage`]. Each run is a
//! plain set of edges and every `∃` ranges over the whole vertex set. It
//! treats each run as one pass through each decision, so in traversal mode it
//! is only meaningful for loop-free programs.

use std::collections::BTreeSet;

use crate::coverage::{Criterion, LoopMode, Semantics};
use crate::graph::{Cfg, VertexId};
use crate::trace::Run;

type Edge = (VertexId, VertexId);

struct R {
    edges: BTreeSet<Edge>,
    /// A run of a single vertex has no edges but still visits it.
    lone: Option<VertexId>,
}

impl R {
    fn has(&self, a: &VertexId, b: &VertexId) -> bool {
        self.edges.contains(&(a.clone(), b.clone()))
    }
}

/// The checked obligation: `(kind, subject, holds)`, with `kind` one of the
/// coverage report's obligation kinds and `subject` a vertex id or decision
/// number.
pub type Verdict = (&'static str, String, bool);

pub struct FormulaOracle<'a> {
    v: Vec<VertexId>,
    e: BTreeSet<Edge>,
    decisions: &'a [(usize, BTreeSet<VertexId>)],
    runs: Vec<R>,
}

impl<'a> FormulaOracle<'a> {
    /// `decisions` pairs each decision number with its member set.
    pub fn new(cfg: &Cfg, decisions: &'a [(usize, BTreeSet<VertexId>)], runs: &[Run]) -> Self {
        let runs = runs
            .iter()
            .map(|r| R {
                edges: r.path.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect(),
                lone: (r.path.len() == 1).then(|| r.path[0].clone()),
            })
            .collect();
        FormulaOracle {
            v: cfg.vertices().to_vec(),
            e: cfg.edges().map(|(a, b)| (a.clone(), b.clone())).collect(),
            decisions,
            runs,
        }
    }

    fn successors(&self, d: &BTreeSet<VertexId>) -> BTreeSet<VertexId> {
        self.e
            .iter()
            .filter(|(a, b)| d.contains(a) && !d.contains(b))
            .map(|(_, b)| b.clone())
            .collect()
    }

    /// Pairs of runs (one run paired with itself in edge-set reading).
    fn pairs(&self, mode: LoopMode) -> Vec<(&R, &R)> {
        match mode {
            LoopMode::EdgeSet => self.runs.iter().map(|r| (r, r)).collect(),
            LoopMode::Traversal => self
                .runs
                .iter()
                .flat_map(|r1| self.runs.iter().map(move |r2| (r1, r2)))
                .collect(),
        }
    }

    fn cond1(&self) -> Vec<Verdict> {
        self.v
            .iter()
            .map(|v| {
                let holds = self
                    .runs
                    .iter()
                    .any(|r| r.lone.as_ref() == Some(v) || self.v.iter().any(|u| r.has(u, v) || r.has(v, u)));
                ("vertex_visit", v.to_string(), holds)
            })
            .collect()
    }

    fn cond2(&self, mode: LoopMode) -> Vec<Verdict> {
        self.decisions
            .iter()
            .map(|(id, d)| {
                let holds = self.pairs(mode).iter().any(|(r1, r2)| {
                    d.iter().any(|v1| {
                        d.iter().any(|v2| {
                            self.v.iter().any(|s1| {
                                self.v.iter().any(|s2| {
                                    r1.has(v1, s1) && r2.has(v2, s2) && s1 != s2 && !d.contains(s1) && !d.contains(s2)
                                })
                            })
                        })
                    })
                });
                ("decision_outcome", id.to_string(), holds)
            })
            .collect()
    }

    fn cond3(&self, mode: LoopMode) -> Vec<Verdict> {
        let mut out = Vec::new();
        for (_, d) in self.decisions {
            for v in d {
                let holds = self.pairs(mode).iter().any(|(r1, r2)| {
                    self.v
                        .iter()
                        .any(|s1| self.v.iter().any(|s2| r1.has(v, s1) && r2.has(v, s2) && s1 != s2))
                });
                out.push(("condition_outcome", v.to_string(), holds));
            }
        }
        out
    }

    /// `v` takes different edges in r1 and r2.
    fn varies(&self, v: &VertexId, r1: &R, r2: &R) -> bool {
        self.v
            .iter()
            .any(|s1| self.v.iter().any(|s2| r1.has(v, s1) && r2.has(v, s2) && s1 != s2))
    }

    fn others(&self, r: &R, d: &BTreeSet<VertexId>, v: &VertexId) -> BTreeSet<Edge> {
        r.edges
            .iter()
            .filter(|(c, _)| d.contains(c) && c != v)
            .cloned()
            .collect()
    }

    fn agree(&self, semantics: Semantics, d: &BTreeSet<VertexId>, v: &VertexId, r1: &R, r2: &R) -> bool {
        match semantics {
            Semantics::Strict => self.others(r1, d, v) == self.others(r2, d, v),
            Semantics::Masking => d.iter().filter(|c| *c != v).all(|c| {
                let a: BTreeSet<&VertexId> = self.v.iter().filter(|x| r1.has(c, x)).collect();
                let b: BTreeSet<&VertexId> = self.v.iter().filter(|x| r2.has(c, x)).collect();
                a.is_empty() || b.is_empty() || a == b
            }),
            // c and x bound by the outer ∃: each side of the equation is
            // either {(c, x)} or ∅.
            Semantics::PaperLiteral => self.v.iter().any(|c| {
                self.v.iter().any(|x| {
                    let in1 = r1.has(c, x) && d.contains(c) && c != v;
                    let in2 = r2.has(c, x) && d.contains(c) && c != v;
                    in1 == in2
                })
            }),
        }
    }

    fn flip(&self, semantics: Semantics, d: &BTreeSet<VertexId>, r1: &R, r2: &R) -> bool {
        let succ = self.successors(d);
        let same_member = semantics == Semantics::PaperLiteral;
        d.iter().any(|c1| {
            d.iter().filter(|c2| !same_member || *c2 == c1).any(|c2| {
                self.v.iter().any(|x1| {
                    self.v
                        .iter()
                        .any(|x2| r1.has(c1, x1) && r2.has(c2, x2) && BTreeSet::from([x1.clone(), x2.clone()]) == succ)
                })
            })
        })
    }

    /// Independence ranges over all ordered pairs in both loop modes.
    fn independence(&self, need: impl Fn(&BTreeSet<VertexId>, &VertexId, &R, &R) -> bool) -> Vec<Verdict> {
        let mut out = Vec::new();
        for (_, d) in self.decisions {
            for v in d {
                let holds = self
                    .pairs(LoopMode::Traversal)
                    .iter()
                    .any(|(r1, r2)| self.varies(v, r1, r2) && need(d, v, r1, r2));
                out.push(("independence_pair", v.to_string(), holds));
            }
        }
        out
    }

    fn entry_exit(&self) -> Vec<Verdict> {
        let mut out = Vec::new();
        for v in &self.v {
            if !self.e.iter().any(|(_, b)| b == v) {
                let holds = self
                    .runs
                    .iter()
                    .any(|r| r.lone.as_ref() == Some(v) || self.v.iter().any(|x| r.has(v, x)));
                out.push(("entry_visit", v.to_string(), holds));
            }
            if !self.e.iter().any(|(a, _)| a == v) {
                let holds = self
                    .runs
                    .iter()
                    .any(|r| r.lone.as_ref() == Some(v) || self.v.iter().any(|x| r.has(x, v)));
                out.push(("exit_visit", v.to_string(), holds));
            }
        }
        out
    }

    pub fn check(&self, criterion: Criterion, semantics: Semantics, mode: LoopMode) -> Vec<Verdict> {
        let mut out = match criterion {
            Criterion::Sc => self.cond1(),
            Criterion::Dc => self.cond2(mode),
            Criterion::Cc => self.cond3(mode),
            Criterion::Dcc => {
                let mut v = self.cond1();
                v.extend(self.cond2(mode));
                v.extend(self.cond3(mode));
                v
            }
            Criterion::Mcc => self.independence(|d, v, r1, r2| self.agree(semantics, d, v, r1, r2)),
            Criterion::Fpc => self.independence(|d, _, r1, r2| self.flip(semantics, d, r1, r2)),
            Criterion::Mcdc => {
                let mut v = self.entry_exit();
                v.extend(self.cond2(mode));
                v.extend(self.cond3(mode));
                v.extend(self.independence(|d, v, r1, r2| {
                    self.agree(semantics, d, v, r1, r2) && self.flip(semantics, d, r1, r2)
                }));
                v
            }
        };
        out.sort();
        out
    }

    /// Whether every obligation of `criterion` holds.
    pub fn holds(&self, criterion: Criterion, semantics: Semantics, mode: LoopMode) -> bool {
        self.check(criterion, semantics, mode).iter().all(|(_, _, h)| *h)
    }
}
