//! Inference of decision subgraphs.
//!
//! Every vertex with two successors starts out as its own decision. A
//! depth-first walk then merges a decision with a successor decision whenever
//! the two share a successor other than the vertex connecting them; this is
//! the signature of a short-circuit `&&`/`||` chain.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{compute_dominators, Cfdg, Cfg, CfgBuilder, Decision, GraphError, VertexId};

/// Bookkeeping from one inference run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeStats {
    /// How many times each vertex was visited: once when the top-level loop
    /// starts a merge from it, once when a merge marks it visited.
    pub vertex_visit_counts: BTreeMap<VertexId, u32>,
    pub merges_performed: usize,
    /// Conditions with an edge to themselves. Such edges are ignored while
    /// merging.
    pub self_loops: Vec<VertexId>,
}

impl MergeStats {
    pub fn max_visits(&self) -> u32 {
        self.vertex_visit_counts.values().copied().max().unwrap_or(0)
    }
}

/// Mapping from condition vertices to their current decision, shared by every
/// merge call of one inference run.
///
/// Decisions are kept in a union-find forest; merging two decisions makes
/// every member of both map to the union, as if the map held one shared set
/// per decision.
#[derive(Debug)]
pub struct DecisionMap<'g> {
    cfg: &'g Cfg,
    /// rank[v] is the position of v in the successor iteration order.
    rank: Vec<usize>,
    by_rank: Vec<usize>,
    parent: Vec<usize>,
    /// Successor ranks of each decision root, self-edges excluded.
    succ: Vec<BTreeSet<usize>>,
    visited: Vec<bool>,
    visits: Vec<u32>,
    discovered: Vec<usize>,
    next_discovery: usize,
    merges: usize,
}

struct Frame {
    member: usize,
    succs: Vec<usize>,
    next: usize,
    pending: Option<usize>,
}

impl<'g> DecisionMap<'g> {
    /// Every condition of `cfg` starts as a singleton decision.
    pub fn new(cfg: &'g Cfg) -> Self {
        let n = cfg.len();
        let by_rank = iteration_order(cfg);
        let mut rank = vec![0; n];
        for (r, &v) in by_rank.iter().enumerate() {
            rank[v] = r;
        }
        let succ = (0..n)
            .map(|v| {
                if cfg.is_condition_ix(v) {
                    cfg.succ_ix(v).iter().filter(|&&h| h != v).map(|&h| rank[h]).collect()
                } else {
                    BTreeSet::new()
                }
            })
            .collect();
        DecisionMap {
            cfg,
            rank,
            by_rank,
            parent: (0..n).collect(),
            succ,
            visited: vec![false; n],
            visits: vec![0; n],
            discovered: vec![usize::MAX; n],
            next_discovery: 0,
            merges: 0,
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[v] != root {
            let next = self.parent[v];
            self.parent[v] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.succ[ra].len() >= self.succ[rb].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let moved = std::mem::take(&mut self.succ[small]);
        self.succ[big].extend(moved);
        self.parent[small] = big;
        self.merges += 1;
        big
    }

    fn discover(&mut self, v: usize) {
        if self.discovered[v] == usize::MAX {
            self.discovered[v] = self.next_discovery;
            self.next_discovery += 1;
        }
    }

    fn visit(&mut self, v: usize) {
        self.visits[v] += 1;
        self.discover(v);
    }

    pub fn is_visited(&self, v: &str) -> bool {
        self.cfg.index_of(v).is_some_and(|i| self.visited[i])
    }

    /// Current members of the decision containing `v`.
    pub fn members(&mut self, v: &str) -> Option<BTreeSet<VertexId>> {
        let ix = self.cfg.index_of(v)?;
        if !self.cfg.is_condition_ix(ix) {
            return None;
        }
        let root = self.find(ix);
        let cfg = self.cfg;
        let members = (0..cfg.len())
            .filter(|&u| cfg.is_condition_ix(u) && self.find(u) == root)
            .map(|u| cfg.id(u).clone())
            .collect();
        Some(members)
    }

    /// Merges the decision containing `v` with every successor decision that
    /// shares a successor with it, recursing forward first. Returns the
    /// successors of the resulting decision.
    pub fn merge(&mut self, v: &str) -> Result<BTreeSet<VertexId>, GraphError> {
        let ix = self
            .cfg
            .index_of(v)
            .ok_or_else(|| GraphError::UnknownVertex(VertexId::new(v)))?;
        if !self.cfg.is_condition_ix(ix) {
            return Ok(BTreeSet::new());
        }
        let root = self.merge_ix(ix);
        let members = self.members(self.cfg.id(root).as_str()).unwrap_or_default();
        self.cfg.successors_of(members.iter().map(VertexId::as_str))
    }

    fn frame(&mut self, member: usize) -> Frame {
        let root = self.find(member);
        Frame {
            member,
            succs: self.succ[root].iter().map(|&r| self.by_rank[r]).collect(),
            next: 0,
            pending: None,
        }
    }

    fn merge_ix(&mut self, start: usize) -> usize {
        let first = self.frame(start);
        let mut stack = vec![first];
        loop {
            let top = stack.last_mut().expect("stack is non-empty");
            if top.next == top.succs.len() {
                let done = stack.pop().expect("stack is non-empty");
                let returned = self.find(done.member);
                match stack.last_mut() {
                    None => return returned,
                    Some(parent) => {
                        let s = parent.pending.take().expect("parent awaits a recursive call");
                        let d1 = parent.member;
                        self.merge_if_shared(d1, s, returned);
                    }
                }
                continue;
            }
            let s = top.succs[top.next];
            top.next += 1;
            if self.visited[s] {
                continue;
            }
            self.visited[s] = true;
            self.visit(s);
            if self.cfg.is_condition_ix(s) {
                top.pending = Some(s);
                let frame = self.frame(s);
                stack.push(frame);
            }
        }
    }

    /// Merge test: (successors(D1) \ {s}) ∩ S ≠ ∅, where S are the successors
    /// returned by the recursive call on s's decision.
    fn merge_if_shared(&mut self, d1: usize, s: usize, returned: usize) {
        let r1 = self.find(d1);
        let s_rank = self.rank[s];
        let (small, large) = if self.succ[r1].len() <= self.succ[returned].len() {
            (&self.succ[r1], &self.succ[returned])
        } else {
            (&self.succ[returned], &self.succ[r1])
        };
        let shared = small.iter().any(|&x| x != s_rank && large.contains(&x));
        if shared {
            self.union(r1, s);
        }
    }
}

/// Order in which a decision's successors are explored: reverse postorder
/// from each indegree-0 vertex, then any remaining vertices in index order.
/// Exploring in topological order ensures a condition reachable through a
/// sibling condition is reached through that sibling first.
fn iteration_order(cfg: &Cfg) -> Vec<usize> {
    let n = cfg.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let roots: Vec<usize> = (0..n).filter(|&v| cfg.pred_ix(v).is_empty()).chain(0..n).collect();
    for root in roots {
        if placed[root] {
            continue;
        }
        for v in reverse_postorder_unplaced(cfg, root, &placed) {
            placed[v] = true;
            order.push(v);
        }
    }
    order
}

fn reverse_postorder_unplaced(cfg: &Cfg, root: usize, placed: &[bool]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut post = Vec::new();
    let mut stack = vec![(root, 0usize)];
    seen.insert(root);
    while let Some(top) = stack.last_mut() {
        let (v, next) = *top;
        if let Some(&w) = cfg.succ_ix(v).get(next) {
            top.1 += 1;
            if !placed[w] && seen.insert(w) {
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

/// Groups the conditions of `cfg` into decisions.
///
/// Conditions are considered in ascending [`VertexId`] order and a merge is
/// started from each one that has not been visited yet. Decisions are
/// numbered by the first time one of their members was reached.
pub fn create_cfdg(cfg: &Cfg) -> Result<(Cfdg, MergeStats), GraphError> {
    let mut conditions: Vec<usize> = (0..cfg.len()).filter(|&v| cfg.is_condition_ix(v)).collect();
    conditions.sort_by(|&a, &b| cfg.id(a).cmp(cfg.id(b)));

    let mut map = DecisionMap::new(cfg);
    for &v in &conditions {
        if !map.visited[v] {
            map.visit(v);
            map.merge_ix(v);
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in &conditions {
        let root = map.find(v);
        groups.entry(root).or_default().push(v);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g.iter().map(|&v| map.discovered[v]).min());

    let dominators = compute_dominators(cfg).ok();
    let decisions = groups
        .iter()
        .enumerate()
        .map(|(id, members)| {
            let entry = pick_entry(cfg, members, &map.rank, dominators.as_ref());
            Decision {
                id,
                entry: cfg.id(entry).clone(),
                members: members.iter().map(|&v| cfg.id(v).clone()).collect(),
            }
        })
        .collect();

    let stats = MergeStats {
        vertex_visit_counts: (0..cfg.len())
            .filter(|&v| map.visits[v] > 0)
            .map(|v| (cfg.id(v).clone(), map.visits[v]))
            .collect(),
        merges_performed: map.merges,
        self_loops: conditions
            .iter()
            .filter(|&&v| cfg.succ_ix(v).contains(&v))
            .map(|&v| cfg.id(v).clone())
            .collect(),
    };
    Ok((Cfdg::new(cfg.clone(), decisions)?, stats))
}

/// Members entered from outside the decision (or with no predecessor).
fn entered_from_outside(cfg: &Cfg, members: &[usize]) -> Vec<usize> {
    members
        .iter()
        .copied()
        .filter(|&m| {
            let preds = cfg.pred_ix(m);
            preds.is_empty() || preds.iter().any(|p| !members.contains(p))
        })
        .collect()
}

fn pick_entry(cfg: &Cfg, members: &[usize], rank: &[usize], dominators: Option<&crate::graph::Dominators>) -> usize {
    let mut candidates = entered_from_outside(cfg, members);
    if candidates.is_empty() {
        candidates = members.to_vec();
    }
    candidates.sort_by_key(|&v| rank[v]);
    if let Some(dom) = dominators {
        if let Some(&v) = candidates
            .iter()
            .find(|&&c| members.iter().all(|&m| dom.dominates_ix(c, m)))
        {
            return v;
        }
    }
    candidates[0]
}

/// Contracts non-condition vertices sitting between two conditions (one
/// predecessor that is a condition, one successor that is a condition). The
/// returned map sends each removed vertex to the vertex its edge now points
/// at.
pub fn normalize_interstitial(cfg: &Cfg) -> (Cfg, BTreeMap<VertexId, VertexId>) {
    let n = cfg.len();
    let mut target = vec![None; n];
    for (p, slot) in target.iter_mut().enumerate() {
        let (preds, succs) = (cfg.pred_ix(p), cfg.succ_ix(p));
        if let ([pred], [succ]) = (preds, succs) {
            if pred != succ && *pred != p && *succ != p && cfg.is_condition_ix(*pred) && cfg.is_condition_ix(*succ) {
                *slot = Some(*succ);
            }
        }
    }
    // A condition whose two branches would land on the same vertex is left
    // alone; contracting would collapse its edges and erase the condition.
    for c in 0..n {
        if let [x, y] = cfg.succ_ix(c) {
            let (x, y) = (*x, *y);
            if target[x].unwrap_or(x) == target[y].unwrap_or(y) {
                if target[x].is_some() {
                    target[x] = None;
                }
                if target[y].is_some() {
                    target[y] = None;
                }
            }
        }
    }

    let mut b = CfgBuilder::new();
    for v in (0..n).filter(|&v| target[v].is_none()) {
        let id = cfg.id(v).clone();
        b.vertex(id.clone());
        if let Some(label) = cfg.label(id.as_str()) {
            b.label(id, label);
        }
    }
    for &(t, h) in cfg.edge_indices() {
        if target[t].is_some() {
            continue;
        }
        let head = target[h].unwrap_or(h);
        match cfg.edge_label(cfg.id(t).as_str(), cfg.id(h).as_str()) {
            Some(label) => b.labeled_edge(cfg.id(t).clone(), cfg.id(head).clone(), label),
            None => b.edge(cfg.id(t).clone(), cfg.id(head).clone()),
        };
    }
    let contracted = target
        .iter()
        .enumerate()
        .filter_map(|(p, t)| t.map(|t| (cfg.id(p).clone(), cfg.id(t).clone())))
        .collect();
    let out = b.build(false).expect("contraction never raises outdegree");
    (out, contracted)
}

/// Structural checks on one decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionCheck {
    pub decision_id: usize,
    pub external_successors: BTreeSet<VertexId>,
    /// Members entered from outside the decision other than its entry.
    pub extra_entries: Vec<VertexId>,
    /// Members the entry does not dominate. Empty when dominators could not
    /// be computed; see `dominators_known`.
    pub undominated: Vec<VertexId>,
    pub dominators_known: bool,
    /// Members that share no successor with any other member.
    pub unshared: Vec<VertexId>,
}

impl DecisionCheck {
    pub fn two_successors(&self) -> bool {
        self.external_successors.len() == 2
    }

    pub fn single_dominating_entry(&self) -> bool {
        self.extra_entries.is_empty() && self.dominators_known && self.undominated.is_empty()
    }

    pub fn shared_successors(&self) -> bool {
        self.unshared.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.two_successors() && self.single_dominating_entry() && self.shared_successors()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub checks: Vec<DecisionCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(DecisionCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &DecisionCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Checks every decision for two external successors, a single dominating
/// entry, and members that each reach one of the decision's successors.
pub fn verify_decision_invariants(cfdg: &Cfdg) -> InvariantReport {
    let cfg = cfdg.cfg();
    let dominators = compute_dominators(cfg).ok();
    let checks = cfdg
        .decisions()
        .iter()
        .map(|d| {
            let members: Vec<usize> = d.members.iter().filter_map(|m| cfg.index_of(m.as_str())).collect();
            let external = cfdg.external_successors(d);
            let extra_entries = entered_from_outside(cfg, &members)
                .into_iter()
                .map(|m| cfg.id(m).clone())
                .filter(|m| *m != d.entry)
                .collect();
            let undominated = match (&dominators, cfg.index_of(d.entry.as_str())) {
                (Some(dom), Some(entry)) => members
                    .iter()
                    .filter(|&&m| !dom.dominates_ix(entry, m))
                    .map(|&m| cfg.id(m).clone())
                    .collect(),
                _ => Vec::new(),
            };
            // A lone condition trivially shares both successors with its
            // decision. Otherwise each member must share a successor with the
            // remaining members; the entry of `(a && b) || c` only reaches
            // other members, so external successors alone are too strict.
            let unshared = if members.len() < 2 {
                Vec::new()
            } else {
                members
                    .iter()
                    .filter(|&&m| {
                        !cfg.succ_ix(m)
                            .iter()
                            .any(|&s| members.iter().any(|&o| o != m && cfg.succ_ix(o).contains(&s)))
                    })
                    .map(|&m| cfg.id(m).clone())
                    .collect()
            };
            DecisionCheck {
                decision_id: d.id,
                external_successors: external,
                extra_entries,
                undominated,
                dominators_known: dominators.is_some(),
                unshared,
            }
        })
        .collect();
    InvariantReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> Cfg {
        let mut b = CfgBuilder::new();
        for &(t, h) in edges {
            b.vertex(t);
            b.vertex(h);
        }
        for &(t, h) in edges {
            b.edge(t, h);
        }
        b.build(false).unwrap()
    }

    fn ids(items: &[&str]) -> BTreeSet<VertexId> {
        items.iter().map(|&s| VertexId::from(s)).collect()
    }

    fn and_guard() -> Cfg {
        graph(&[
            ("x0", "a"),
            ("a", "b"),
            ("a", "ret"),
            ("b", "x1"),
            ("b", "ret"),
            ("x1", "ret"),
        ])
    }

    /// `x = ((a && b) || c)`: a-true -> b, a-false -> c, b-true -> T,
    /// b-false -> c, c -> T/F.
    fn and_or() -> Cfg {
        graph(&[
            ("entry", "a"),
            ("a", "b"),
            ("a", "c"),
            ("b", "T"),
            ("b", "c"),
            ("c", "T"),
            ("c", "F"),
            ("T", "exit"),
            ("F", "exit"),
        ])
    }

    #[test]
    fn and_guard_one_decision() {
        let (cfdg, stats) = create_cfdg(&and_guard()).unwrap();
        assert_eq!(cfdg.decisions().len(), 1);
        let d = &cfdg.decisions()[0];
        assert_eq!(d.members, ids(&["a", "b"]));
        assert_eq!(d.entry.as_str(), "a");
        assert_eq!(cfdg.external_successors(d), ids(&["x1", "ret"]));
        assert!(stats.max_visits() <= 2);
    }

    #[test]
    fn and_or_merges_twice() {
        let (cfdg, stats) = create_cfdg(&and_or()).unwrap();
        assert_eq!(cfdg.decisions().len(), 1);
        assert_eq!(cfdg.decisions()[0].members, ids(&["a", "b", "c"]));
        assert_eq!(stats.merges_performed, 2);
        assert!(verify_decision_invariants(&cfdg).passed());
    }

    #[test]
    fn merge_walkthrough_on_and_or() {
        let cfg = and_or();
        let mut map = DecisionMap::new(&cfg);
        let succ = map.merge("a").unwrap();
        assert_eq!(map.members("a").unwrap(), ids(&["a", "b", "c"]));
        assert_eq!(map.members("c").unwrap(), ids(&["a", "b", "c"]));
        assert_eq!(succ, ids(&["b", "c", "T", "F"]));
        assert!(map.is_visited("c") && map.is_visited("T"));
    }

    #[test]
    fn merge_without_condition_successors() {
        let cfg = graph(&[("e", "a"), ("a", "s1"), ("a", "s2"), ("s1", "x"), ("s2", "x")]);
        let mut map = DecisionMap::new(&cfg);
        assert_eq!(map.merge("a").unwrap(), ids(&["s1", "s2"]));
        assert_eq!(map.members("a").unwrap(), ids(&["a"]));
    }

    #[test]
    fn sequential_ifs_stay_separate() {
        // if (a) { s1 } if (b) { s2 }
        let cfg = graph(&[
            ("e", "a"),
            ("a", "s1"),
            ("a", "b"),
            ("s1", "b"),
            ("b", "s2"),
            ("b", "x"),
            ("s2", "x"),
        ]);
        let (cfdg, _) = create_cfdg(&cfg).unwrap();
        let sets: Vec<_> = cfdg.decisions().iter().map(|d| d.members.clone()).collect();
        assert_eq!(sets, vec![ids(&["a"]), ids(&["b"])]);
    }

    #[test]
    fn straight_line_has_no_decisions() {
        let (cfdg, stats) = create_cfdg(&graph(&[("a", "b"), ("b", "c")])).unwrap();
        assert!(cfdg.decisions().is_empty());
        assert_eq!(stats.merges_performed, 0);
    }

    #[test]
    fn decision_ids_are_deterministic() {
        let cfg = graph(&[
            ("e", "z"),
            ("z", "s1"),
            ("z", "m"),
            ("s1", "m"),
            ("m", "s2"),
            ("m", "x"),
            ("s2", "x"),
        ]);
        let (a, _) = create_cfdg(&cfg).unwrap();
        let (b, _) = create_cfdg(&cfg).unwrap();
        assert_eq!(a.decisions(), b.decisions());
        // "m" sorts first, so it is discovered first
        assert_eq!(a.decisions()[0].members, ids(&["m"]));
    }

    #[test]
    fn self_loop_is_reported_not_merged() {
        let cfg = graph(&[("e", "c"), ("c", "c"), ("c", "x")]);
        let (cfdg, stats) = create_cfdg(&cfg).unwrap();
        assert_eq!(stats.self_loops, vec![VertexId::from("c")]);
        assert_eq!(cfdg.decisions().len(), 1);
    }

    #[test]
    fn contraction_of_interstitial_vertex() {
        let cfg = graph(&[
            ("e", "c1"),
            ("c1", "p"),
            ("c1", "y"),
            ("p", "c2"),
            ("c2", "y"),
            ("c2", "z"),
        ]);
        let (out, map) = normalize_interstitial(&cfg);
        assert!(out.has_edge("c1", "c2"));
        assert!(!out.contains("p"));
        assert_eq!(map.get("p").map(VertexId::as_str), Some("c2"));
        let (cfdg, _) = create_cfdg(&out).unwrap();
        assert_eq!(cfdg.decisions()[0].members, ids(&["c1", "c2"]));
    }

    #[test]
    fn contraction_keeps_both_branches_apart() {
        // Contracting p into s would make both edges of c point at s.
        let cfg = graph(&[("e", "c"), ("c", "p"), ("c", "s"), ("p", "s"), ("s", "x"), ("s", "y")]);
        let (out, map) = normalize_interstitial(&cfg);
        assert!(map.is_empty());
        assert!(out.contains("p"));
        assert!(out.is_condition("c"));
    }

    #[test]
    fn contraction_identity_without_interstitials() {
        let cfg = and_or();
        let (out, map) = normalize_interstitial(&cfg);
        assert!(map.is_empty());
        assert_eq!(out.edges().collect::<Vec<_>>(), cfg.edges().collect::<Vec<_>>());
    }

    #[test]
    fn singleton_decision_passes_checks() {
        let cfg = graph(&[("e", "v"), ("v", "x"), ("v", "y")]);
        let (cfdg, _) = create_cfdg(&cfg).unwrap();
        assert!(verify_decision_invariants(&cfdg).passed());
    }

    #[test]
    fn second_external_predecessor_is_named() {
        // b is also reachable from `side`, bypassing a
        let cfg = graph(&[
            ("e", "s"),
            ("s", "a"),
            ("s", "side"),
            ("side", "b"),
            ("a", "b"),
            ("a", "F"),
            ("b", "T"),
            ("b", "F"),
        ]);
        let cfdg = Cfdg::new(
            cfg,
            vec![Decision::new(0, "s", ["s"]), Decision::new(1, "a", ["a", "b"])],
        )
        .unwrap();
        let report = verify_decision_invariants(&cfdg);
        let bad: Vec<_> = report.failures().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].decision_id, 1);
        assert_eq!(bad[0].extra_entries, vec![VertexId::from("b")]);
        assert_eq!(bad[0].undominated, vec![VertexId::from("b")]);
        assert!(bad[0].two_successors() && bad[0].shared_successors());
    }
}
