//! Control-flow graph model: vertices, edges, entry/exit queries, dominators,
//! and the decision-annotated graph built on top of it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of a program point. For graphs read from dot files this is the node
/// name exactly as the compiler wrote it (`fn_0_basic_block_3`, `Node0x55`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(id: impl Into<String>) -> Self {
        VertexId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId(s.to_owned())
    }
}

impl From<String> for VertexId {
    fn from(s: String) -> Self {
        VertexId(s)
    }
}

impl std::borrow::Borrow<str> for VertexId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex id must not be empty")]
    EmptyVertexId,
    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(VertexId),
    #[error("vertex `{vertex}` has {} distinct successors (at most 2 allowed)", successors.len())]
    OutdegreeViolation {
        vertex: VertexId,
        successors: Vec<VertexId>,
    },
    #[error("edge {tail} -> {head} references a vertex that is not in the graph")]
    DanglingEdge { tail: VertexId, head: VertexId },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(VertexId),
    #[error("graph has no unique entry vertex (indegree-0 vertices: {entries:?})")]
    NoUniqueEntry { entries: Vec<VertexId> },
    #[error("graph has no exit vertex")]
    NoExit,
    #[error("graph is not connected: `{0}` is unreachable from the entry component")]
    Disconnected(VertexId),
    #[error("invalid decision {id}: {reason}")]
    InvalidDecision { id: usize, reason: String },
}

/// A validated control-flow graph.
///
/// Vertices keep insertion order, which is also the order they are written
/// back out. Internally vertices are addressed by dense indices; the index
/// accessors are public so analyses can work without hashing.
#[derive(Debug, Clone)]
pub struct Cfg {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    labels: Vec<Option<String>>,
    edges: Vec<(usize, usize)>,
    edge_labels: HashMap<(usize, usize), String>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    collapsed: Vec<(VertexId, VertexId)>,
}

/// Incremental construction of a [`Cfg`].
#[derive(Debug, Default, Clone)]
pub struct CfgBuilder {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    labels: Vec<Option<String>>,
    edges: Vec<(VertexId, VertexId, Option<String>)>,
}

impl CfgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a vertex if it is not already present. Returns its index.
    pub fn vertex(&mut self, id: impl Into<VertexId>) -> usize {
        let id = id.into();
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        self.labels.push(None);
        i
    }

    pub fn label(&mut self, id: impl Into<VertexId>, label: impl Into<String>) -> &mut Self {
        let i = self.vertex(id);
        self.labels[i] = Some(label.into());
        self
    }

    pub fn edge(&mut self, tail: impl Into<VertexId>, head: impl Into<VertexId>) -> &mut Self {
        self.edges.push((tail.into(), head.into(), None));
        self
    }

    pub fn labeled_edge(
        &mut self,
        tail: impl Into<VertexId>,
        head: impl Into<VertexId>,
        label: impl Into<String>,
    ) -> &mut Self {
        self.edges.push((tail.into(), head.into(), Some(label.into())));
        self
    }

    /// Validates and freezes the graph. Edge endpoints must have been declared
    /// through [`CfgBuilder::vertex`] (or a labelling call).
    pub fn build(self, strict: bool) -> Result<Cfg, GraphError> {
        if self.ids.iter().any(|v| v.0.is_empty()) {
            return Err(GraphError::EmptyVertexId);
        }
        let n = self.ids.len();
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut edge_labels = HashMap::new();
        let mut collapsed = Vec::new();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (tail, head, label) in self.edges {
            let (t, h) = match (self.index.get(&tail), self.index.get(&head)) {
                (Some(&t), Some(&h)) => (t, h),
                _ => return Err(GraphError::DanglingEdge { tail, head }),
            };
            if succ[t].contains(&h) {
                collapsed.push((tail, head));
                continue;
            }
            succ[t].push(h);
            pred[h].push(t);
            edges.push((t, h));
            if let Some(label) = label {
                edge_labels.insert((t, h), label);
            }
        }
        for (v, s) in succ.iter().enumerate() {
            if s.len() > 2 {
                return Err(GraphError::OutdegreeViolation {
                    vertex: self.ids[v].clone(),
                    successors: s.iter().map(|&h| self.ids[h].clone()).collect(),
                });
            }
        }
        let cfg = Cfg {
            ids: self.ids,
            index: self.index,
            labels: self.labels,
            edges,
            edge_labels,
            succ,
            pred,
            collapsed,
        };
        if strict {
            cfg.validate_strict()?;
        }
        Ok(cfg)
    }
}

/// Builds a graph from explicit vertex and edge lists.
///
/// Parallel edges are collapsed; the collapsed pairs are available from
/// [`Cfg::collapsed_edges`].
pub fn build_cfg<V, E, L>(vertices: V, edges: E, labels: L, strict: bool) -> Result<Cfg, GraphError>
where
    V: IntoIterator,
    V::Item: Into<VertexId>,
    E: IntoIterator<Item = (VertexId, VertexId)>,
    L: IntoIterator<Item = (VertexId, String)>,
{
    let mut b = CfgBuilder::new();
    for v in vertices {
        let v = v.into();
        if b.index.contains_key(&v) {
            return Err(GraphError::DuplicateVertex(v));
        }
        b.vertex(v);
    }
    for (v, label) in labels {
        if !b.index.contains_key(&v) {
            return Err(GraphError::UnknownVertex(v));
        }
        b.label(v, label);
    }
    for (t, h) in edges {
        if !b.index.contains_key(&t) || !b.index.contains_key(&h) {
            return Err(GraphError::DanglingEdge { tail: t, head: h });
        }
        b.edge(t, h);
    }
    b.build(strict)
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn id(&self, ix: usize) -> &VertexId {
        &self.ids[ix]
    }

    pub fn index_of(&self, v: &str) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.index.contains_key(v)
    }

    fn require(&self, v: &str) -> Result<usize, GraphError> {
        self.index_of(v)
            .ok_or_else(|| GraphError::UnknownVertex(VertexId::new(v)))
    }

    /// Edges in insertion order, after parallel-edge collapse.
    pub fn edges(&self) -> impl Iterator<Item = (&VertexId, &VertexId)> + '_ {
        self.edges.iter().map(|&(t, h)| (&self.ids[t], &self.ids[h]))
    }

    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, tail: &str, head: &str) -> bool {
        match (self.index_of(tail), self.index_of(head)) {
            (Some(t), Some(h)) => self.succ[t].contains(&h),
            _ => false,
        }
    }

    pub fn label(&self, v: &str) -> Option<&str> {
        self.index_of(v).and_then(|i| self.labels[i].as_deref())
    }

    pub fn edge_label(&self, tail: &str, head: &str) -> Option<&str> {
        let key = (self.index_of(tail)?, self.index_of(head)?);
        self.edge_labels.get(&key).map(String::as_str)
    }

    /// Parallel edges dropped during construction.
    pub fn collapsed_edges(&self) -> &[(VertexId, VertexId)] {
        &self.collapsed
    }

    pub fn succ_ix(&self, ix: usize) -> &[usize] {
        &self.succ[ix]
    }

    pub fn pred_ix(&self, ix: usize) -> &[usize] {
        &self.pred[ix]
    }

    pub fn outdegree(&self, v: &str) -> Result<usize, GraphError> {
        Ok(self.succ[self.require(v)?].len())
    }

    /// A condition is a vertex with two distinct successors.
    pub fn is_condition_ix(&self, ix: usize) -> bool {
        self.succ[ix].len() == 2
    }

    pub fn is_condition(&self, v: &str) -> bool {
        self.index_of(v).is_some_and(|i| self.is_condition_ix(i))
    }

    pub fn successors(&self, v: &str) -> Result<BTreeSet<VertexId>, GraphError> {
        self.successors_of([v])
    }

    /// Union of the successors of every vertex in `set`; may include members
    /// of `set` itself.
    pub fn successors_of<'a, I>(&self, set: I) -> Result<BTreeSet<VertexId>, GraphError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = BTreeSet::new();
        for v in set {
            let i = self.require(v)?;
            out.extend(self.succ[i].iter().map(|&h| self.ids[h].clone()));
        }
        Ok(out)
    }

    pub fn predecessors(&self, v: &str) -> Result<BTreeSet<VertexId>, GraphError> {
        let i = self.require(v)?;
        Ok(self.pred[i].iter().map(|&t| self.ids[t].clone()).collect())
    }

    /// Indegree-0 and outdegree-0 vertices.
    pub fn entry_and_exits(&self) -> (BTreeSet<VertexId>, BTreeSet<VertexId>) {
        let entries = (0..self.len())
            .filter(|&i| self.pred[i].is_empty())
            .map(|i| self.ids[i].clone())
            .collect();
        let exits = (0..self.len())
            .filter(|&i| self.succ[i].is_empty())
            .map(|i| self.ids[i].clone())
            .collect();
        (entries, exits)
    }

    pub fn entry_ix(&self) -> Result<usize, GraphError> {
        let entries: Vec<usize> = (0..self.len()).filter(|&i| self.pred[i].is_empty()).collect();
        match entries.as_slice() {
            [one] => Ok(*one),
            _ => Err(GraphError::NoUniqueEntry {
                entries: entries.iter().map(|&i| self.ids[i].clone()).collect(),
            }),
        }
    }

    pub fn validate_strict(&self) -> Result<(), GraphError> {
        let entry = self.entry_ix()?;
        if !self.succ.iter().any(Vec::is_empty) {
            return Err(GraphError::NoExit);
        }
        // weak connectivity
        let mut seen = vec![false; self.len()];
        let mut stack = vec![entry];
        seen[entry] = true;
        while let Some(v) = stack.pop() {
            for &w in self.succ[v].iter().chain(&self.pred[v]) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GraphError::Disconnected(self.ids[i].clone()));
        }
        Ok(())
    }

    /// Reverse postorder of the vertices reachable from `root`, successors
    /// explored in edge order.
    pub fn reverse_postorder(&self, root: usize) -> Vec<usize> {
        let mut post = Vec::with_capacity(self.len());
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        seen[root] = true;
        while let Some(top) = stack.last_mut() {
            let (v, next) = *top;
            if let Some(&w) = self.succ[v].get(next) {
                top.1 += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                post.push(v);
                stack.pop();
            }
        }
        post.reverse();
        post
    }
}

/// Immediate-dominator tree of a graph with a unique entry.
#[derive(Debug, Clone)]
pub struct Dominators {
    entry: usize,
    idom: Vec<Option<usize>>,
    ids: Vec<VertexId>,
}

impl Dominators {
    pub fn entry(&self) -> &VertexId {
        &self.ids[self.entry]
    }

    pub fn is_reachable_ix(&self, v: usize) -> bool {
        self.idom[v].is_some()
    }

    /// `a` dominates `b` (reflexive). Unreachable vertices are dominated by
    /// nothing.
    pub fn dominates_ix(&self, a: usize, b: usize) -> bool {
        if self.idom[b].is_none() {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.idom[cur] {
                Some(p) if p != cur => cur = p,
                _ => return false,
            }
        }
    }

    /// All dominators of `v`, or an empty set if `v` is unreachable.
    pub fn dominators_of_ix(&self, v: usize) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        if self.idom[v].is_none() {
            return out;
        }
        let mut cur = v;
        loop {
            out.insert(self.ids[cur].clone());
            match self.idom[cur] {
                Some(p) if p != cur => cur = p,
                _ => break,
            }
        }
        out
    }

    pub fn to_map(&self) -> BTreeMap<VertexId, BTreeSet<VertexId>> {
        (0..self.ids.len())
            .map(|v| (self.ids[v].clone(), self.dominators_of_ix(v)))
            .collect()
    }
}

/// Iterative dominator computation over reverse postorder
/// (Cooper, Harvey and Kennedy).
pub fn compute_dominators(cfg: &Cfg) -> Result<Dominators, GraphError> {
    let entry = cfg.entry_ix()?;
    let rpo = cfg.reverse_postorder(entry);
    let mut order = vec![usize::MAX; cfg.len()];
    for (i, &v) in rpo.iter().enumerate() {
        order[v] = i;
    }
    let mut idom: Vec<Option<usize>> = vec![None; cfg.len()];
    idom[entry] = Some(entry);
    let mut changed = true;
    while changed {
        changed = false;
        for &v in rpo.iter().skip(1) {
            let mut new_idom: Option<usize> = None;
            for &p in &cfg.pred[v] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(q) => intersect(&idom, &order, p, q),
                });
            }
            if new_idom.is_some() && idom[v] != new_idom {
                idom[v] = new_idom;
                changed = true;
            }
        }
    }
    Ok(Dominators {
        entry,
        idom,
        ids: cfg.ids.clone(),
    })
}

fn intersect(idom: &[Option<usize>], order: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while order[a] > order[b] {
            a = idom[a].expect("processed vertex has an idom");
        }
        while order[b] > order[a] {
            b = idom[b].expect("processed vertex has an idom");
        }
    }
    a
}

/// A group of condition vertices forming one decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub id: usize,
    pub entry: VertexId,
    pub members: BTreeSet<VertexId>,
}

impl Decision {
    pub fn new<I, V>(id: usize, entry: impl Into<VertexId>, members: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<VertexId>,
    {
        Decision {
            id,
            entry: entry.into(),
            members: members.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, v: &str) -> bool {
        self.members.contains(v)
    }
}

/// A control-flow graph together with its decision subgraphs.
#[derive(Debug, Clone)]
pub struct Cfdg {
    cfg: Cfg,
    decisions: Vec<Decision>,
    owner: Vec<Option<usize>>,
}

impl Cfdg {
    /// Checks that the decisions are disjoint, contain only conditions, and
    /// together cover every condition of the graph.
    pub fn new(cfg: Cfg, mut decisions: Vec<Decision>) -> Result<Self, GraphError> {
        decisions.sort_by_key(|d| d.id);
        let mut owner = vec![None; cfg.len()];
        for (pos, d) in decisions.iter().enumerate() {
            let invalid = |reason: String| GraphError::InvalidDecision { id: d.id, reason };
            if d.members.is_empty() {
                return Err(invalid("no members".into()));
            }
            if !d.members.contains(&d.entry) {
                return Err(invalid(format!("entry `{}` is not a member", d.entry)));
            }
            for m in &d.members {
                let ix = cfg
                    .index_of(m.as_str())
                    .ok_or_else(|| GraphError::UnknownVertex(m.clone()))?;
                if !cfg.is_condition_ix(ix) {
                    return Err(invalid(format!("member `{m}` does not have outdegree 2")));
                }
                if owner[ix].is_some() {
                    return Err(invalid(format!("member `{m}` belongs to two decisions")));
                }
                owner[ix] = Some(pos);
            }
        }
        if let Some(ix) = (0..cfg.len()).find(|&i| cfg.is_condition_ix(i) && owner[i].is_none()) {
            return Err(GraphError::InvalidDecision {
                id: usize::MAX,
                reason: format!("condition `{}` is not in any decision", cfg.id(ix)),
            });
        }
        Ok(Cfdg { cfg, decisions, owner })
    }

    pub fn cfg(&self) -> &Cfg {
        &self.cfg
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn decision_of(&self, v: &str) -> Option<&Decision> {
        let ix = self.cfg.index_of(v)?;
        self.owner[ix].map(|p| &self.decisions[p])
    }

    /// Position in [`Cfdg::decisions`] of the decision owning vertex `ix`.
    pub fn owner_ix(&self, ix: usize) -> Option<usize> {
        self.owner[ix]
    }

    /// Successors of the decision's members that are not members themselves.
    pub fn external_successors(&self, d: &Decision) -> BTreeSet<VertexId> {
        self.cfg
            .successors_of(d.members.iter().map(VertexId::as_str))
            .expect("decision members are graph vertices")
            .into_iter()
            .filter(|s| !d.members.contains(s))
            .collect()
    }

    pub fn into_parts(self) -> (Cfg, Vec<Decision>) {
        (self.cfg, self.decisions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn and_guard() -> Cfg {
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

    fn set(items: &[&str]) -> BTreeSet<VertexId> {
        items.iter().map(|&s| VertexId::from(s)).collect()
    }

    #[test]
    fn and_guard_entry_and_exit() {
        let cfg = and_guard();
        assert_eq!(cfg.entry_and_exits(), (set(&["x0"]), set(&["ret"])));
    }

    #[test]
    fn single_vertex_is_entry_and_exit() {
        let cfg = build_cfg(["v"], [], [], true).unwrap();
        assert_eq!(cfg.entry_and_exits(), (set(&["v"]), set(&["v"])));
    }

    #[test]
    fn loop_without_exit() {
        let cfg = build_cfg(
            ["e", "u", "v"],
            [
                ("e".into(), "u".into()),
                ("u".into(), "v".into()),
                ("v".into(), "u".into()),
            ],
            [],
            false,
        )
        .unwrap();
        assert_eq!(cfg.entry_and_exits(), (set(&["e"]), set(&[])));
        assert_eq!(cfg.validate_strict(), Err(GraphError::NoExit));
    }

    #[test]
    fn three_successors_rejected() {
        let mut b = CfgBuilder::new();
        for v in ["a", "b", "c", "d"] {
            b.vertex(v);
        }
        b.edge("a", "b").edge("a", "c").edge("a", "d");
        assert!(matches!(
            b.build(false),
            Err(GraphError::OutdegreeViolation { vertex, .. }) if vertex.as_str() == "a"
        ));
    }

    #[test]
    fn parallel_edges_collapse() {
        let mut b = CfgBuilder::new();
        b.vertex("c");
        b.vertex("j");
        b.edge("c", "j").edge("c", "j");
        let cfg = b.build(true).unwrap();
        assert_eq!(cfg.outdegree("c").unwrap(), 1);
        assert_eq!(cfg.collapsed_edges().len(), 1);
        assert!(!cfg.is_condition("c"));
    }

    #[test]
    fn dangling_and_unknown() {
        let err = build_cfg(["a"], [("a".into(), "zz".into())], [], false).unwrap_err();
        assert!(matches!(err, GraphError::DanglingEdge { .. }));
        let cfg = and_guard();
        assert_eq!(cfg.successors("nope"), Err(GraphError::UnknownVertex("nope".into())));
    }

    #[test]
    fn strict_mode_errors() {
        let two_entries = build_cfg(
            ["a", "b", "c"],
            [("a".into(), "c".into()), ("b".into(), "c".into())],
            [],
            true,
        );
        assert!(matches!(two_entries, Err(GraphError::NoUniqueEntry { .. })));
        // an isolated cycle is unreachable even though every vertex has an edge
        let disconnected = build_cfg(
            ["a", "b", "c", "d"],
            [
                ("a".into(), "b".into()),
                ("c".into(), "d".into()),
                ("d".into(), "c".into()),
            ],
            [],
            true,
        );
        assert!(matches!(disconnected, Err(GraphError::Disconnected(_))));
        assert!(build_cfg(
            ["a", "b", "c", "d"],
            [
                ("a".into(), "b".into()),
                ("c".into(), "d".into()),
                ("d".into(), "c".into())
            ],
            [],
            false
        )
        .is_ok());
    }

    #[test]
    fn successor_sets() {
        let cfg = and_guard();
        assert_eq!(cfg.successors("a").unwrap(), set(&["b", "ret"]));
        assert_eq!(cfg.successors_of(["a", "b"]).unwrap(), set(&["b", "x1", "ret"]));
        assert!(cfg.successors("ret").unwrap().is_empty());
    }

    #[test]
    fn and_guard_dominators() {
        let cfg = and_guard();
        let dom = compute_dominators(&cfg).unwrap();
        let b = cfg.index_of("b").unwrap();
        assert!(dom.dominators_of_ix(b).is_superset(&set(&["x0", "a", "b"])));
        assert_eq!(dom.dominators_of_ix(cfg.index_of("x0").unwrap()), set(&["x0"]));
        assert_eq!(
            dom.dominators_of_ix(cfg.index_of("ret").unwrap()),
            set(&["x0", "a", "ret"])
        );
    }

    #[test]
    fn cfdg_rejects_overlap_and_uncovered_conditions() {
        let cfg = and_guard();
        assert!(Cfdg::new(cfg.clone(), vec![Decision::new(0, "a", ["a"])]).is_err());
        assert!(Cfdg::new(
            cfg.clone(),
            vec![Decision::new(0, "a", ["a", "b"]), Decision::new(1, "b", ["b"])]
        )
        .is_err());
        assert!(Cfdg::new(cfg.clone(), vec![Decision::new(0, "x0", ["x0"])]).is_err());
        let cfdg = Cfdg::new(cfg, vec![Decision::new(0, "a", ["a", "b"])]).unwrap();
        assert_eq!(cfdg.external_successors(&cfdg.decisions()[0]), set(&["x1", "ret"]));
    }
}
