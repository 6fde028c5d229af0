//! Boolean decision expressions and the single-decision programs they denote.
//!
//! An expression such as `(a && b) || c` is lowered to a CFG with an `entry`
//! vertex, one vertex per condition, the sinks `T` and `F` and a shared
//! `exit`. Short-circuit operators split control flow; the other operators do
//! not, so any subtree rooted at `&`, `|` or `^` becomes one condition vertex.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::coverage::{Config, Criterion, Evaluator, LoopMode, Semantics};
use crate::decision::create_cfdg;
use crate::graph::{Cfg, CfgBuilder, VertexId};
use crate::trace::{Run, TestSuite};

pub mod formula;

/// Symbol limit for [`enumerate_runs`].
pub const MAX_ENUMERATED_SYMBOLS: usize = 16;
/// Symbol limit for [`minimal_suites`].
pub const MAX_SEARCH_SYMBOLS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at column {}: {message}", position + 1)]
    Syntax { position: usize, message: String },
    #[error("no value for symbol `{0}`")]
    IncompleteAssignment(String),
    #[error("{count} symbols exceed the limit of {limit}")]
    TooManySymbols { count: usize, limit: usize },
    #[error("invalid test vector `{vector}`: {message}")]
    BadVector { vector: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    And,
    ScAnd,
    Or,
    ScOr,
    Xor,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [OpKind::And, OpKind::ScAnd, OpKind::Or, OpKind::ScOr, OpKind::Xor];

    pub fn token(self) -> &'static str {
        match self {
            OpKind::And => "&",
            OpKind::ScAnd => "&&",
            OpKind::Or => "|",
            OpKind::ScOr => "||",
            OpKind::Xor => "^",
        }
    }

    pub fn is_short_circuit(self) -> bool {
        matches!(self, OpKind::ScAnd | OpKind::ScOr)
    }

    fn precedence(self) -> u8 {
        match self {
            OpKind::Or | OpKind::ScOr => 1,
            OpKind::And | OpKind::ScAnd => 2,
            OpKind::Xor => 3,
        }
    }

    fn apply(self, l: bool, r: bool) -> bool {
        match self {
            OpKind::And | OpKind::ScAnd => l && r,
            OpKind::Or | OpKind::ScOr => l || r,
            OpKind::Xor => l ^ r,
        }
    }

    /// The operator obtained by pushing a negation through it.
    fn dual(self) -> OpKind {
        match self {
            OpKind::And => OpKind::Or,
            OpKind::Or => OpKind::And,
            OpKind::ScAnd => OpKind::ScOr,
            OpKind::ScOr => OpKind::ScAnd,
            OpKind::Xor => OpKind::Xor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DecisionExpr {
    Cond {
        symbol: String,
        negated: bool,
    },
    Op {
        kind: OpKind,
        left: Box<DecisionExpr>,
        right: Box<DecisionExpr>,
    },
}

pub type Assignment = BTreeMap<String, bool>;

impl DecisionExpr {
    pub fn cond(symbol: impl Into<String>) -> Self {
        DecisionExpr::Cond {
            symbol: symbol.into(),
            negated: false,
        }
    }

    pub fn op(kind: OpKind, left: DecisionExpr, right: DecisionExpr) -> Self {
        DecisionExpr::Op {
            kind,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Logical negation, pushed down to the leaves.
    pub fn negate(self) -> Self {
        match self {
            DecisionExpr::Cond { symbol, negated } => DecisionExpr::Cond {
                symbol,
                negated: !negated,
            },
            DecisionExpr::Op {
                kind: OpKind::Xor,
                left,
                right,
            } => DecisionExpr::Op {
                kind: OpKind::Xor,
                left: Box::new(left.negate()),
                right,
            },
            DecisionExpr::Op { kind, left, right } => DecisionExpr::Op {
                kind: kind.dual(),
                left: Box::new(left.negate()),
                right: Box::new(right.negate()),
            },
        }
    }

    /// Distinct symbols in order of first occurrence.
    pub fn symbols(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk_leaves(&mut |s| {
            if !out.iter().any(|x| x == s) {
                out.push(s.to_string());
            }
        });
        out
    }

    /// Number of condition leaves, counting repeated symbols separately.
    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.walk_leaves(&mut |_| n += 1);
        n
    }

    fn walk_leaves(&self, f: &mut impl FnMut(&str)) {
        match self {
            DecisionExpr::Cond { symbol, .. } => f(symbol),
            DecisionExpr::Op { left, right, .. } => {
                left.walk_leaves(f);
                right.walk_leaves(f);
            }
        }
    }

    pub fn eval(&self, assignment: &Assignment) -> Result<bool, ExprError> {
        match self {
            DecisionExpr::Cond { symbol, negated } => assignment
                .get(symbol)
                .map(|v| v ^ negated)
                .ok_or_else(|| ExprError::IncompleteAssignment(symbol.clone())),
            DecisionExpr::Op { kind, left, right } => {
                let l = left.eval(assignment)?;
                let r = right.eval(assignment)?;
                Ok(kind.apply(l, r))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            DecisionExpr::Cond { .. } => u8::MAX,
            DecisionExpr::Op { kind, .. } => kind.precedence(),
        }
    }
}

impl fmt::Display for DecisionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionExpr::Cond { symbol, negated } => {
                if *negated {
                    f.write_str("!")?;
                }
                f.write_str(symbol)
            }
            DecisionExpr::Op { kind, left, right } => {
                let p = kind.precedence();
                if left.precedence() < p {
                    write!(f, "({left})")?;
                } else {
                    write!(f, "{left}")?;
                }
                write!(f, " {} ", kind.token())?;
                if right.precedence() <= p {
                    write!(f, "({right})")
                } else {
                    write!(f, "{right}")
                }
            }
        }
    }
}

impl FromStr for DecisionExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Op(OpKind),
    Not,
    Open,
    Close,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let two = |next: char| chars.get(i + 1) == Some(&next);
        let tok = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Token::Open,
            ')' => Token::Close,
            '!' => Token::Not,
            '^' => Token::Op(OpKind::Xor),
            '&' if two('&') => {
                i += 1;
                Token::Op(OpKind::ScAnd)
            }
            '&' => Token::Op(OpKind::And),
            '|' if two('|') => {
                i += 1;
                Token::Op(OpKind::ScOr)
            }
            '|' => Token::Op(OpKind::Or),
            _ if c.is_alphanumeric() || c == '_' => {
                while i + 1 < chars.len() && (chars[i + 1].is_alphanumeric() || chars[i + 1] == '_') {
                    i += 1;
                }
                Token::Ident(chars[start..=i].iter().collect())
            }
            _ => {
                return Err(ExprError::Syntax {
                    position: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, chars.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            position: self.tokens[self.pos].1,
            message: message.into(),
        }
    }

    fn binary(&mut self, level: u8) -> Result<DecisionExpr, ExprError> {
        if level > 3 {
            return self.unary();
        }
        let mut left = self.binary(level + 1)?;
        while let Token::Op(kind) = *self.peek() {
            if kind.precedence() != level {
                break;
            }
            self.pos += 1;
            let right = self.binary(level + 1)?;
            left = DecisionExpr::op(kind, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<DecisionExpr, ExprError> {
        match self.peek().clone() {
            Token::Not => {
                self.pos += 1;
                Ok(self.unary()?.negate())
            }
            Token::Open => {
                self.pos += 1;
                let inner = self.binary(1)?;
                if *self.peek() != Token::Close {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Token::Ident(name) => {
                self.pos += 1;
                Ok(DecisionExpr::cond(name))
            }
            Token::End => Err(self.error("unexpected end of expression")),
            other => Err(self.error(format!("expected a condition, found {}", describe(&other)))),
        }
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Ident(s) => format!("`{s}`"),
        Token::Op(k) => format!("`{}`", k.token()),
        Token::Not => "`!`".into(),
        Token::Open => "`(`".into(),
        Token::Close => "`)`".into(),
        Token::End => "end of expression".into(),
    }
}

/// Parses an expression. Precedence from tightest: `!`, `^`, `&`/`&&`,
/// `|`/`||`; binary operators associate to the left.
pub fn parse_expr(text: &str) -> Result<DecisionExpr, ExprError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let expr = p.binary(1)?;
    if *p.peek() != Token::End {
        return Err(p.error(format!("unexpected {}", describe(p.peek()))));
    }
    Ok(expr)
}

/// A positional input vector such as `TTF`, `101` or `F-`. `None` marks a
/// don't-care input, which is fed to the program as false.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TestVector(pub Vec<Option<bool>>);

impl TestVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_dont_care(&self) -> bool {
        self.0.iter().any(Option::is_none)
    }

    /// Binds the vector to `symbols` positionally.
    pub fn to_assignment(&self, symbols: &[String]) -> Result<Assignment, ExprError> {
        if self.len() < symbols.len() {
            return Err(ExprError::IncompleteAssignment(symbols[self.len()].clone()));
        }
        if self.len() > symbols.len() {
            return Err(ExprError::BadVector {
                vector: self.to_string(),
                message: format!("{} values for {} symbols", self.len(), symbols.len()),
            });
        }
        Ok(symbols
            .iter()
            .zip(&self.0)
            .map(|(s, v)| (s.clone(), v.unwrap_or(false)))
            .collect())
    }

    pub fn from_assignment(assignment: &Assignment, symbols: &[String]) -> Self {
        TestVector(symbols.iter().map(|s| assignment.get(s).copied()).collect())
    }
}

impl fmt::Display for TestVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            f.write_str(match v {
                Some(true) => "T",
                Some(false) => "F",
                None => "-",
            })?;
        }
        Ok(())
    }
}

impl FromStr for TestVector {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'T' | 't' | '1' => Ok(Some(true)),
                'F' | 'f' | '0' => Ok(Some(false)),
                '-' | '.' | '·' | 'x' | 'X' => Ok(None),
                _ => Err(ExprError::BadVector {
                    vector: s.to_string(),
                    message: format!("unexpected `{c}`"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TestVector)
    }
}

/// One condition vertex of a generated program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprCondition {
    pub vertex: VertexId,
    /// The (possibly compound) subexpression evaluated at this vertex.
    pub expr: DecisionExpr,
    pub on_true: VertexId,
    pub on_false: VertexId,
}

/// The program generated from a decision expression.
#[derive(Debug, Clone)]
pub struct ExprCfg {
    pub cfg: Cfg,
    pub conditions: Vec<ExprCondition>,
    pub entry: VertexId,
    pub exit: VertexId,
    pub true_sink: VertexId,
    pub false_sink: VertexId,
    symbols: Vec<String>,
}

impl ExprCfg {
    pub fn condition_vertices(&self) -> Vec<VertexId> {
        self.conditions.iter().map(|c| c.vertex.clone()).collect()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// The run taken under `assignment`, named after its input vector.
    pub fn simulate(&self, assignment: &Assignment) -> Result<Run, ExprError> {
        for s in &self.symbols {
            if !assignment.contains_key(s) {
                return Err(ExprError::IncompleteAssignment(s.clone()));
            }
        }
        let by_vertex: HashMap<&VertexId, &ExprCondition> = self.conditions.iter().map(|c| (&c.vertex, c)).collect();
        let mut path = vec![self.entry.clone()];
        let mut at = self.conditions[0].vertex.clone();
        while let Some(cond) = by_vertex.get(&at) {
            path.push(at.clone());
            at = if cond.expr.eval(assignment)? {
                cond.on_true.clone()
            } else {
                cond.on_false.clone()
            };
        }
        path.push(at);
        path.push(self.exit.clone());
        let name = TestVector::from_assignment(assignment, &self.symbols).to_string();
        Ok(Run { name, path })
    }

    /// Symbols read by the condition vertices on `run`'s path.
    pub fn evaluated_symbols(&self, run: &Run) -> BTreeSet<String> {
        let on_path: BTreeSet<&VertexId> = run.path.iter().collect();
        self.conditions
            .iter()
            .filter(|c| on_path.contains(&c.vertex))
            .flat_map(|c| c.expr.symbols())
            .collect()
    }

    /// Whether the run ends in the true sink.
    pub fn outcome(&self, run: &Run) -> Option<bool> {
        let last_sink = run.path.iter().rev().nth(1)?;
        if *last_sink == self.true_sink {
            Some(true)
        } else if *last_sink == self.false_sink {
            Some(false)
        } else {
            None
        }
    }
}

/// Condition vertex names, left to right.
fn condition_id(i: usize) -> String {
    format!("c{i}")
}

fn cluster_count(expr: &DecisionExpr) -> usize {
    match expr {
        DecisionExpr::Op { kind, left, right } if kind.is_short_circuit() => cluster_count(left) + cluster_count(right),
        _ => 1,
    }
}

fn lower(expr: &DecisionExpr, start: usize, on_true: &str, on_false: &str, out: &mut Vec<ExprCondition>) {
    match expr {
        DecisionExpr::Op { kind, left, right } if kind.is_short_circuit() => {
            let mid = start + cluster_count(left);
            lower(right, mid, on_true, on_false, out);
            let right_entry = condition_id(mid);
            match kind {
                OpKind::ScAnd => lower(left, start, &right_entry, on_false, out),
                _ => lower(left, start, on_true, &right_entry, out),
            }
        }
        _ => out.push(ExprCondition {
            vertex: condition_id(start).into(),
            expr: expr.clone(),
            on_true: on_true.into(),
            on_false: on_false.into(),
        }),
    }
}

/// Generates the program `entry; if (expr) T else F; exit`.
pub fn expr_to_cfg(expr: &DecisionExpr) -> ExprCfg {
    let mut conditions = Vec::new();
    lower(expr, 0, "T", "F", &mut conditions);
    conditions.sort_by_key(|c| c.vertex.as_str()[1..].parse::<usize>().expect("generated id"));

    let mut b = CfgBuilder::new();
    b.label("entry", "entry");
    for c in &conditions {
        b.label(c.vertex.clone(), c.expr.to_string());
    }
    b.label("T", "T").label("F", "F").label("exit", "exit");
    b.edge("entry", conditions[0].vertex.clone());
    for c in &conditions {
        b.labeled_edge(c.vertex.clone(), c.on_true.clone(), "true");
        b.labeled_edge(c.vertex.clone(), c.on_false.clone(), "false");
    }
    b.edge("T", "exit").edge("F", "exit");
    let cfg = b.build(true).expect("generated graphs are well formed");

    ExprCfg {
        cfg,
        conditions,
        entry: "entry".into(),
        exit: "exit".into(),
        true_sink: "T".into(),
        false_sink: "F".into(),
        symbols: expr.symbols(),
    }
}

/// Simulates one assignment over the expression's program.
pub fn simulate(expr: &DecisionExpr, assignment: &Assignment) -> Result<Run, ExprError> {
    expr_to_cfg(expr).simulate(assignment)
}

/// All `2^k` assignments in vector order (`TT..T` first), each with its
/// run.
pub fn enumerate_assignments(symbols: &[String]) -> Result<Vec<Assignment>, ExprError> {
    if symbols.len() > MAX_ENUMERATED_SYMBOLS {
        return Err(ExprError::TooManySymbols {
            count: symbols.len(),
            limit: MAX_ENUMERATED_SYMBOLS,
        });
    }
    let k = symbols.len();
    Ok((0..1u32 << k)
        .map(|mask| {
            symbols
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), mask & (1 << (k - 1 - i)) == 0))
                .collect()
        })
        .collect())
}

pub fn enumerate_runs(expr: &DecisionExpr) -> Result<Vec<(Assignment, Run)>, ExprError> {
    let program = expr_to_cfg(expr);
    enumerate_assignments(program.symbols())?
        .into_iter()
        .map(|a| {
            let run = program.simulate(&a)?;
            Ok((a, run))
        })
        .collect()
}

/// All smallest suites meeting `criterion` (in traversal mode).
///
/// Assignments that drive the program down the same path are
/// interchangeable, so the search runs over distinct paths. Each path is
/// reported by its first assignment in vector order, with symbols the path
/// never reads shown as `-`. An empty result means no suite meets the
/// criterion.
pub fn minimal_suites(
    expr: &DecisionExpr,
    criterion: Criterion,
    semantics: Semantics,
) -> Result<Vec<Vec<TestVector>>, ExprError> {
    let symbols = expr.symbols();
    if symbols.len() > MAX_SEARCH_SYMBOLS {
        return Err(ExprError::TooManySymbols {
            count: symbols.len(),
            limit: MAX_SEARCH_SYMBOLS,
        });
    }
    let program = expr_to_cfg(expr);
    let (cfdg, _) = create_cfdg(&program.cfg).expect("generated graphs are well formed");

    let mut classes: Vec<(TestVector, Run)> = Vec::new();
    for (assignment, run) in enumerate_runs(expr)? {
        if classes.iter().any(|(_, r)| r.path == run.path) {
            continue;
        }
        let read = program.evaluated_symbols(&run);
        let pattern = TestVector(
            symbols
                .iter()
                .map(|s| read.contains(s).then(|| assignment[s]))
                .collect(),
        );
        let run = Run {
            name: pattern.to_string(),
            path: run.path,
        };
        classes.push((pattern, run));
    }

    let config = Config {
        semantics,
        loop_mode: LoopMode::Traversal,
    };
    let meets = |picked: &[usize]| {
        let runs = picked.iter().map(|&i| classes[i].1.clone()).collect();
        let suite = TestSuite::new(runs).expect("distinct paths have distinct names");
        Evaluator::new(&cfdg, &suite, config).evaluate(criterion).is_complete()
    };

    let all: Vec<usize> = (0..classes.len()).collect();
    if !meets(&all) {
        return Ok(Vec::new());
    }
    for size in 1..=classes.len() {
        let mut found = Vec::new();
        for_each_combination(classes.len(), size, &mut |picked| {
            if meets(picked) {
                found.push(picked.iter().map(|&i| classes[i].0.clone()).collect());
            }
        });
        if !found.is_empty() {
            return Ok(found);
        }
    }
    unreachable!("the full set of paths meets the criterion")
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let mut picked: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&picked);
        let Some(i) = (0..k).rev().find(|&i| picked[i] != i + n - k) else {
            return;
        };
        picked[i] += 1;
        for j in i + 1..k {
            picked[j] = picked[j - 1] + 1;
        }
    }
}

/// Every expression with up to `max_conditions` distinct conditions
/// `a, b, c, ...` (left to right) over the five binary operators, one per
/// binary tree shape and operator labelling.
pub fn enumerate_exprs(max_conditions: usize) -> Vec<DecisionExpr> {
    fn shapes(names: &[String]) -> Vec<DecisionExpr> {
        if names.len() == 1 {
            return vec![DecisionExpr::cond(names[0].clone())];
        }
        let mut out = Vec::new();
        for split in 1..names.len() {
            let lefts = shapes(&names[..split]);
            let rights = shapes(&names[split..]);
            for l in &lefts {
                for r in &rights {
                    for kind in OpKind::ALL {
                        out.push(DecisionExpr::op(kind, l.clone(), r.clone()));
                    }
                }
            }
        }
        out
    }
    (1..=max_conditions)
        .flat_map(|n| {
            let names: Vec<String> = (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
            shapes(&names)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> DecisionExpr {
        parse_expr(s).unwrap()
    }

    fn assign(pairs: &[(&str, bool)]) -> Assignment {
        pairs.iter().map(|(s, v)| (s.to_string(), *v)).collect()
    }

    fn vectors(list: &[&str]) -> Vec<TestVector> {
        list.iter().map(|v| v.parse().unwrap()).collect()
    }

    #[test]
    fn parses_examples() {
        use DecisionExpr as D;
        assert_eq!(
            e("(a && b) || c"),
            D::op(
                OpKind::ScOr,
                D::op(OpKind::ScAnd, D::cond("a"), D::cond("b")),
                D::cond("c")
            )
        );
        assert_eq!(e("a"), D::cond("a"));
        assert_eq!(e("a ^ b"), D::op(OpKind::Xor, D::cond("a"), D::cond("b")));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(e("a || b && c"), e("a || (b && c)"));
        assert_eq!(e("a & b ^ c"), e("a & (b ^ c)"));
        assert_eq!(e("a && b & c"), e("(a && b) & c"));
        assert_eq!(e("a | b || c"), e("(a | b) || c"));
        assert_eq!(e("a ^ b ^ c"), e("(a ^ b) ^ c"));
        assert_eq!(e("!a ^ b"), e("(!a) ^ b"));
    }

    #[test]
    fn negation_is_pushed_to_leaves() {
        assert_eq!(e("!(a && b)"), e("!a || !b"));
        assert_eq!(e("!(a & !b)"), e("!a | b"));
        assert_eq!(e("!(a ^ b)"), e("!a ^ b"));
        assert_eq!(e("!!a"), e("a"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = |s: &str| match parse_expr(s) {
            Err(ExprError::Syntax { position, .. }) => position,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(err("a &&"), 4);
        assert_eq!(err("(a"), 2);
        assert_eq!(err("a b"), 2);
        assert_eq!(err("a $ b"), 2);
        assert_eq!(err(""), 0);
        assert_eq!(err("a)"), 1);
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "a && b || c",
            "a && (b || c)",
            "(a ^ b) & c",
            "a ^ (b ^ c)",
            "!a | b & !c",
            "a || (b || c)",
        ] {
            let x = e(s);
            assert_eq!(e(&x.to_string()), x, "{s} -> {x}");
        }
        assert_eq!(e("((a && b) || c)").to_string(), "a && b || c");
    }

    #[test]
    fn symbols_in_first_occurrence_order() {
        assert_eq!(e("b && a || b ^ c").symbols(), vec!["b", "a", "c"]);
        assert_eq!(e("b && a || b ^ c").leaf_count(), 4);
    }

    #[test]
    fn lowering_and() {
        let p = expr_to_cfg(&e("a && b"));
        assert_eq!(p.condition_vertices(), vec![VertexId::from("c0"), VertexId::from("c1")]);
        let g = &p.cfg;
        assert!(g.has_edge("entry", "c0"));
        assert_eq!(g.edge_label("c0", "c1"), Some("true"));
        assert_eq!(g.edge_label("c0", "F"), Some("false"));
        assert_eq!(g.edge_label("c1", "T"), Some("true"));
        assert_eq!(g.edge_label("c1", "F"), Some("false"));
        assert!(g.has_edge("T", "exit") && g.has_edge("F", "exit"));
        assert_eq!(g.edge_count(), 7);
        assert_eq!(g.label("c1"), Some("b"));
    }

    #[test]
    fn lowering_and_or() {
        let p = expr_to_cfg(&e("(a && b) || c"));
        let g = &p.cfg;
        assert_eq!(p.conditions.len(), 3);
        assert!(g.has_edge("c0", "c2") && g.has_edge("c1", "c2"));
        assert!(g.has_edge("c0", "c1") && g.has_edge("c1", "T"));
        assert!(g.has_edge("c2", "T") && g.has_edge("c2", "F"));
    }

    #[test]
    fn non_short_circuit_clusters() {
        assert_eq!(expr_to_cfg(&e("a & b")).conditions.len(), 1);
        assert_eq!(expr_to_cfg(&e("(a & b) && c")).conditions.len(), 2);
        assert_eq!(expr_to_cfg(&e("a ^ b || c & d")).conditions.len(), 2);
        // a non-short-circuit operator evaluates both sides in one block
        assert_eq!(expr_to_cfg(&e("(a && b) & c")).conditions.len(), 1);
        assert_eq!(expr_to_cfg(&e("(a & b) && c")).cfg.label("c0"), Some("a & b"));
    }

    #[test]
    fn simulate_and_runs() {
        let x = e("a && b");
        let path = |a, b| {
            simulate(&x, &assign(&[("a", a), ("b", b)]))
                .unwrap()
                .path
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(path(true, false), ["entry", "c0", "c1", "F", "exit"]);
        assert_eq!(path(false, true), ["entry", "c0", "F", "exit"]);
        assert_eq!(path(true, true), ["entry", "c0", "c1", "T", "exit"]);
        let r = simulate(&e("a"), &assign(&[("a", true)])).unwrap();
        assert_eq!(r.path.len(), 4);
        assert_eq!(r.name, "T");
        assert_eq!(
            simulate(&x, &assign(&[("a", true)])),
            Err(ExprError::IncompleteAssignment("b".into()))
        );
    }

    #[test]
    fn enumerate_counts() {
        let count_true = |s: &str| {
            let x = e(s);
            let p = expr_to_cfg(&x);
            let runs = enumerate_runs(&x).unwrap();
            (
                runs.len(),
                runs.iter().filter(|(_, r)| p.outcome(r) == Some(true)).count(),
            )
        };
        assert_eq!(count_true("a && b"), (4, 1));
        assert_eq!(count_true("(a && b) || c"), (8, 5));
        assert_eq!(count_true("a"), (2, 1));
        let many = (0..17).map(|i| format!("x{i}")).collect::<Vec<_>>().join(" & ");
        assert!(matches!(
            enumerate_runs(&e(&many)),
            Err(ExprError::TooManySymbols { .. })
        ));
    }

    #[test]
    fn test_vectors() {
        let v: TestVector = "T0-".parse().unwrap();
        assert_eq!(v.0, vec![Some(true), Some(false), None]);
        assert_eq!(v.to_string(), "TF-");
        assert!(v.has_dont_care());
        let syms = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert!(!v.to_assignment(&syms).unwrap()["c"]);
        let short: TestVector = "T".parse().unwrap();
        assert_eq!(
            short.to_assignment(&syms),
            Err(ExprError::IncompleteAssignment("b".into()))
        );
        assert!("TQ".parse::<TestVector>().is_err());
    }

    #[test]
    fn minimal_mcdc_for_and() {
        let suites = minimal_suites(&e("a && b"), Criterion::Mcdc, Semantics::Masking).unwrap();
        assert_eq!(suites[0].len(), 3);
        let expected = vectors(&["TT", "TF", "F-"]);
        assert!(suites.contains(&expected), "{suites:?}");
    }

    #[test]
    fn minimal_small_criteria() {
        let dc = minimal_suites(&e("a"), Criterion::Dc, Semantics::Masking).unwrap();
        assert_eq!(dc, vec![vectors(&["T", "F"])]);
        let sc = minimal_suites(&e("a && b"), Criterion::Sc, Semantics::Masking).unwrap();
        assert_eq!(sc[0].len(), 2);
        // the sinks T and F cannot both be on one run
        let sc = minimal_suites(&e("a"), Criterion::Sc, Semantics::Masking).unwrap();
        assert_eq!(sc, vec![vectors(&["T", "F"])]);
        // strict reading cannot show a's independence in `a && b`
        let strict = minimal_suites(&e("a && b"), Criterion::Mcdc, Semantics::Strict).unwrap();
        assert!(strict.is_empty());
    }

    #[test]
    fn combinations() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
    }

    #[test]
    fn expression_family_sizes() {
        let family = enumerate_exprs(4);
        let by_size = |n| family.iter().filter(|x| x.leaf_count() == n).count();
        assert_eq!((by_size(1), by_size(2), by_size(3), by_size(4)), (1, 5, 50, 625));
    }
}
