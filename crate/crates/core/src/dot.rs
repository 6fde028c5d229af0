//! Reading and writing GraphViz dot files of control-flow graphs.
//!
//! The reader covers the part of the dot language that compiler CFG dumps
//! use: `digraph`, nested subgraphs, node and edge statements with ports,
//! attribute lists, comments, quoted strings with escapes and `+`
//! concatenation, and HTML-like `<...>` ids. Identifier and attribute text is
//! kept as written, so emitting a parsed file changes only layout.
//!
//! A file is split into functions by dialect: GCC dumps put each function in
//! a top-level subgraph, Clang writes one digraph per function, and anything
//! else is read as one function per digraph.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::graph::{Cfdg, Cfg, CfgBuilder, GraphError, VertexId};

/// Subgraph id prefix of the clusters written for decisions.
pub const DECISION_CLUSTER_PREFIX: &str = "cluster_decision_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DotError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: undirected graphs are not control-flow graphs")]
    NotADigraph { line: usize, column: usize },
    #[error("function `{function}`: {source}")]
    Graph {
        function: String,
        #[source]
        source: GraphError,
    },
    #[error("function `{function}`: decision vertex `{vertex}` is not in the document")]
    DecisionVertexMissing { function: String, vertex: VertexId },
    #[error("{found} decision graphs given for {expected} functions")]
    FunctionCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DotWarning {
    /// A repeated edge was dropped from the CFG (the dot text keeps it).
    MultiEdgeCollapsed {
        function: String,
        tail: VertexId,
        head: VertexId,
    },
    /// An edge drawn with `style=invis` is layout scaffolding, not control
    /// flow, and was left out of the CFG.
    InvisibleEdgeIgnored {
        function: String,
        tail: VertexId,
        head: VertexId,
    },
}

impl fmt::Display for DotWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DotWarning::MultiEdgeCollapsed { function, tail, head } => {
                write!(f, "function `{function}`: repeated edge {tail} -> {head} collapsed")
            }
            DotWarning::InvisibleEdgeIgnored { function, tail, head } => {
                write!(f, "function `{function}`: invisible edge {tail} -> {head} ignored")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dialect {
    Gcc,
    Clang,
    Generic,
}

impl Dialect {
    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Gcc => "gcc",
            Dialect::Clang => "clang",
            Dialect::Generic => "generic",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcc" => Ok(Dialect::Gcc),
            "clang" | "llvm" => Ok(Dialect::Clang),
            "generic" => Ok(Dialect::Generic),
            _ => Err(format!("unknown dialect `{s}`")),
        }
    }
}

/// Guesses the producer of a dot file from its block labels.
pub fn detect_dialect(text: &str) -> Dialect {
    static CLANG: OnceLock<Regex> = OnceLock::new();
    static GCC: OnceLock<Regex> = OnceLock::new();
    let clang = CLANG.get_or_init(|| Regex::new(r#""\{?%[\w.]+:|\bNode0x[0-9a-fA-F]+\b"#).unwrap());
    let gcc = GCC.get_or_init(|| Regex::new(r"\\?<bb\\? \d+\\?>|\bfn_\d+_basic_block_\d+\b").unwrap());
    if clang.is_match(text) {
        Dialect::Clang
    } else if gcc.is_match(text) {
        Dialect::Gcc
    } else {
        Dialect::Generic
    }
}

/// An identifier as written (`raw`) and as meant (`value`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Id {
    pub raw: String,
    pub value: String,
}

impl Id {
    /// An id for `value`, quoted when it is not a plain identifier.
    pub fn new(value: &str) -> Self {
        let plain = !value.is_empty()
            && !value.starts_with(|c: char| c.is_ascii_digit())
            && value.chars().all(|c| c.is_alphanumeric() || c == '_')
            && !is_keyword(value);
        let numeral = !value.is_empty()
            && value.parse::<f64>().is_ok()
            && value.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '-');
        let raw = if plain || numeral {
            value.to_string()
        } else {
            format!("\"{}\"", value.replace('"', "\\\""))
        };
        Id {
            raw,
            value: value.to_string(),
        }
    }

    /// An id for `value`, always quoted.
    pub fn new_quoted(value: &str) -> Self {
        Id {
            raw: format!("\"{}\"", value.replace('"', "\\\"")),
            value: value.to_string(),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    ["strict", "graph", "digraph", "node", "edge", "subgraph"]
        .iter()
        .any(|k| s.eq_ignore_ascii_case(k))
}

pub type AttrList = Vec<(Id, Option<Id>)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRef {
    pub id: Id,
    pub port: Vec<Id>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrTarget {
    Graph,
    Node,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeEnd {
    Node(NodeRef),
    Subgraph(Subgraph),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Node { node: NodeRef, attrs: Vec<AttrList> },
    Edge { ends: Vec<EdgeEnd>, attrs: Vec<AttrList> },
    Attr { target: AttrTarget, attrs: Vec<AttrList> },
    Assign(Id, Id),
    Subgraph(Subgraph),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub id: Option<Id>,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub strict: bool,
    pub id: Option<Id>,
    pub stmts: Vec<Stmt>,
}

fn attr_value<'a>(lists: &'a [AttrList], key: &str) -> Option<&'a str> {
    lists
        .iter()
        .flatten()
        .rev()
        .find(|(k, _)| k.value == key)
        .and_then(|(_, v)| v.as_ref().map(|v| v.value.as_str()))
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(Id),
    Keyword(String),
    Punct(&'static str),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> DotError {
        DotError::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), DotError> {
        let mut line_start = self.col == 1;
        loop {
            match self.peek_char() {
                Some('\n') => {
                    self.bump();
                    line_start = true;
                }
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') if line_start => {
                    while !matches!(self.peek_char(), None | Some('\n')) {
                        self.bump();
                    }
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while !matches!(self.peek_char(), None | Some('\n')) {
                        self.bump();
                    }
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let (line, column) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(DotError::Syntax {
                                    line,
                                    column,
                                    message: "unterminated comment".into(),
                                })
                            }
                            Some('*') if self.peek_char() == Some('/') => {
                                self.bump();
                                break;
                            }
                            _ => {}
                        }
                    }
                    line_start = false;
                }
                _ => return Ok(()),
            }
        }
    }

    fn quoted(&mut self) -> Result<String, DotError> {
        let (line, column) = (self.line, self.col);
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(DotError::Syntax {
                        line,
                        column,
                        message: "unterminated string".into(),
                    })
                }
                Some('"') => return Ok(value),
                Some('\\') => match self.peek_char() {
                    Some('"') => {
                        self.bump();
                        value.push('"');
                    }
                    Some('\n') => {
                        self.bump();
                    }
                    Some('\r') if self.peek_at(1) == Some('\n') => {
                        self.bump();
                        self.bump();
                    }
                    _ => value.push('\\'),
                },
                Some(c) => value.push(c),
            }
        }
    }

    /// Returns the token with its line and column.
    fn next(&mut self) -> Result<(Tok, usize, usize), DotError> {
        self.skip_trivia()?;
        let (line, col, start) = (self.line, self.col, self.pos);
        let Some(c) = self.peek_char() else {
            return Ok((Tok::Eof, line, col));
        };
        let tok = match c {
            '{' | '}' | '[' | ']' | ';' | ',' | '=' | ':' => {
                self.bump();
                Tok::Punct(match c {
                    '{' => "{",
                    '}' => "}",
                    '[' => "[",
                    ']' => "]",
                    ';' => ";",
                    ',' => ",",
                    '=' => "=",
                    _ => ":",
                })
            }
            '-' if self.peek_at(1) == Some('>') => {
                self.bump();
                self.bump();
                Tok::Punct("->")
            }
            '-' if self.peek_at(1) == Some('-') => {
                self.bump();
                self.bump();
                Tok::Punct("--")
            }
            '"' => {
                let mut value = self.quoted()?;
                // "a" + "b" concatenation
                loop {
                    let save = (self.pos, self.line, self.col);
                    self.skip_trivia()?;
                    if self.peek_char() == Some('+') {
                        self.bump();
                        self.skip_trivia()?;
                        if self.peek_char() != Some('"') {
                            return Err(self.error("expected a string after `+`"));
                        }
                        value.push_str(&self.quoted()?);
                    } else {
                        (self.pos, self.line, self.col) = save;
                        break;
                    }
                }
                Tok::Id(Id {
                    raw: self.src[start..self.pos].to_string(),
                    value,
                })
            }
            '<' => {
                let mut depth = 0usize;
                loop {
                    match self.bump() {
                        None => {
                            return Err(DotError::Syntax {
                                line,
                                column: col,
                                message: "unterminated HTML string".into(),
                            })
                        }
                        Some('<') => depth += 1,
                        Some('>') => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                }
                let raw = &self.src[start..self.pos];
                Tok::Id(Id {
                    raw: raw.to_string(),
                    value: raw[1..raw.len() - 1].to_string(),
                })
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' => {
                self.bump();
                while matches!(self.peek_char(), Some(d) if d.is_ascii_digit() || d == '.') {
                    self.bump();
                }
                let raw = &self.src[start..self.pos];
                if raw == "-" || raw == "." || raw == "-." {
                    return Err(DotError::Syntax {
                        line,
                        column: col,
                        message: format!("unexpected `{raw}`"),
                    });
                }
                Tok::Id(Id {
                    raw: raw.to_string(),
                    value: raw.to_string(),
                })
            }
            c if c.is_alphabetic() || c == '_' || !c.is_ascii() => {
                while matches!(self.peek_char(), Some(d) if d.is_alphanumeric() || d == '_' || !d.is_ascii()) {
                    self.bump();
                }
                let raw = &self.src[start..self.pos];
                if is_keyword(raw) {
                    Tok::Keyword(raw.to_ascii_lowercase())
                } else {
                    Tok::Id(Id {
                        raw: raw.to_string(),
                        value: raw.to_string(),
                    })
                }
            }
            _ => return Err(self.error(format!("unexpected character `{c}`"))),
        };
        Ok((tok, line, col))
    }
}

// ---------------------------------------------------------------- parsing

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, DotError> {
        let mut lexer = Lexer {
            src: text,
            pos: 0,
            line: 1,
            col: 1,
        };
        let mut toks = Vec::new();
        loop {
            let t = lexer.next()?;
            let end = t.0 == Tok::Eof;
            toks.push(t);
            if end {
                break;
            }
        }
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> DotError {
        let (_, line, column) = self.toks[self.pos];
        DotError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(q) if q == k)
    }

    fn expect(&mut self, p: &str) -> Result<(), DotError> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn id(&mut self) -> Result<Id, DotError> {
        match self.peek() {
            Tok::Id(_) => match self.advance() {
                Tok::Id(id) => Ok(id),
                _ => unreachable!(),
            },
            other => Err(self.error(format!("expected an identifier, found {}", describe(other)))),
        }
    }

    fn graphs(&mut self) -> Result<Vec<Graph>, DotError> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            out.push(self.graph()?);
        }
        if out.is_empty() {
            return Err(self.error("expected `digraph`"));
        }
        Ok(out)
    }

    fn graph(&mut self) -> Result<Graph, DotError> {
        let strict = self.is_keyword("strict");
        if strict {
            self.advance();
        }
        if self.is_keyword("graph") {
            let (_, line, column) = self.toks[self.pos];
            return Err(DotError::NotADigraph { line, column });
        }
        if !self.is_keyword("digraph") {
            return Err(self.error(format!("expected `digraph`, found {}", describe(self.peek()))));
        }
        self.advance();
        let id = match self.peek() {
            Tok::Id(_) => Some(self.id()?),
            _ => None,
        };
        let stmts = self.block()?;
        Ok(Graph { strict, id, stmts })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, DotError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error("expected `}`"));
            }
            stmts.push(self.stmt()?);
            if self.is_punct(";") {
                self.advance();
            }
        }
        self.advance();
        Ok(stmts)
    }

    fn attr_lists(&mut self) -> Result<Vec<AttrList>, DotError> {
        let mut lists = Vec::new();
        while self.is_punct("[") {
            self.advance();
            let mut list = Vec::new();
            while !self.is_punct("]") {
                let key = self.id()?;
                let value = if self.is_punct("=") {
                    self.advance();
                    Some(self.id()?)
                } else {
                    None
                };
                list.push((key, value));
                if self.is_punct(",") || self.is_punct(";") {
                    self.advance();
                }
            }
            self.advance();
            lists.push(list);
        }
        Ok(lists)
    }

    fn subgraph(&mut self) -> Result<Subgraph, DotError> {
        let mut id = None;
        if self.is_keyword("subgraph") {
            self.advance();
            if let Tok::Id(_) = self.peek() {
                id = Some(self.id()?);
            }
        }
        let stmts = self.block()?;
        Ok(Subgraph { id, stmts })
    }

    fn node_ref(&mut self) -> Result<NodeRef, DotError> {
        let id = self.id()?;
        let mut port = Vec::new();
        while self.is_punct(":") && port.len() < 2 {
            self.advance();
            port.push(self.id()?);
        }
        Ok(NodeRef { id, port })
    }

    fn edge_end(&mut self) -> Result<EdgeEnd, DotError> {
        if self.is_keyword("subgraph") || self.is_punct("{") {
            Ok(EdgeEnd::Subgraph(self.subgraph()?))
        } else {
            Ok(EdgeEnd::Node(self.node_ref()?))
        }
    }

    fn stmt(&mut self) -> Result<Stmt, DotError> {
        for (k, target) in [
            ("graph", AttrTarget::Graph),
            ("node", AttrTarget::Node),
            ("edge", AttrTarget::Edge),
        ] {
            if self.is_keyword(k) {
                self.advance();
                return Ok(Stmt::Attr {
                    target,
                    attrs: self.attr_lists()?,
                });
            }
        }
        if matches!(self.peek(), Tok::Id(_)) && matches!(self.peek2(), Tok::Punct("=")) {
            let key = self.id()?;
            self.advance();
            let value = self.id()?;
            return Ok(Stmt::Assign(key, value));
        }
        let first = self.edge_end()?;
        if !(self.is_punct("->") || self.is_punct("--")) {
            return match first {
                EdgeEnd::Subgraph(s) => Ok(Stmt::Subgraph(s)),
                EdgeEnd::Node(node) => Ok(Stmt::Node {
                    node,
                    attrs: self.attr_lists()?,
                }),
            };
        }
        let mut ends = vec![first];
        while self.is_punct("->") || self.is_punct("--") {
            if self.is_punct("--") {
                return Err(self.error("`--` edges are undirected; use `->`"));
            }
            self.advance();
            ends.push(self.edge_end()?);
        }
        Ok(Stmt::Edge {
            ends,
            attrs: self.attr_lists()?,
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Id(id) => format!("`{}`", id.raw),
        Tok::Keyword(k) => format!("`{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of file".into(),
    }
}

/// Parses the dot text into syntax trees, one per graph in the file.
pub fn parse_graphs(text: &str) -> Result<Vec<Graph>, DotError> {
    Parser::new(text)?.graphs()
}

// ---------------------------------------------------------------- writing

fn write_attrs(out: &mut String, lists: &[AttrList]) {
    for list in lists {
        out.push_str(" [");
        for (i, (k, v)) in list.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&k.raw);
            if let Some(v) = v {
                out.push('=');
                out.push_str(&v.raw);
            }
        }
        out.push(']');
    }
}

fn write_node_ref(out: &mut String, n: &NodeRef) {
    out.push_str(&n.id.raw);
    for p in &n.port {
        out.push(':');
        out.push_str(&p.raw);
    }
}

fn write_subgraph(out: &mut String, s: &Subgraph, depth: usize) {
    if let Some(id) = &s.id {
        let _ = write!(out, "subgraph {} ", id.raw);
    } else if !s.stmts.is_empty() || depth > 0 {
        out.push_str("subgraph ");
    }
    write_block(out, &s.stmts, depth);
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for stmt in stmts {
        write_stmt(out, stmt, depth + 1);
    }
    out.push_str(&"  ".repeat(depth));
    out.push('}');
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&"  ".repeat(depth));
    match stmt {
        Stmt::Node { node, attrs } => {
            write_node_ref(out, node);
            write_attrs(out, attrs);
        }
        Stmt::Edge { ends, attrs } => {
            for (i, end) in ends.iter().enumerate() {
                if i > 0 {
                    out.push_str(" -> ");
                }
                match end {
                    EdgeEnd::Node(n) => write_node_ref(out, n),
                    EdgeEnd::Subgraph(s) => write_subgraph(out, s, depth),
                }
            }
            write_attrs(out, attrs);
        }
        Stmt::Attr { target, attrs } => {
            out.push_str(match target {
                AttrTarget::Graph => "graph",
                AttrTarget::Node => "node",
                AttrTarget::Edge => "edge",
            });
            write_attrs(out, attrs);
        }
        Stmt::Assign(k, v) => {
            let _ = write!(out, "{}={}", k.raw, v.raw);
        }
        Stmt::Subgraph(s) => write_subgraph(out, s, depth),
    }
    out.push_str(";\n");
}

/// Writes graphs back as dot text.
pub fn write_graphs(graphs: &[Graph]) -> String {
    let mut out = String::new();
    for g in graphs {
        if g.strict {
            out.push_str("strict ");
        }
        out.push_str("digraph ");
        if let Some(id) = &g.id {
            out.push_str(&id.raw);
            out.push(' ');
        }
        write_block(&mut out, &g.stmts, 0);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- functions

/// Where a function's statements live: a whole graph, or one of its
/// top-level subgraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub graph: usize,
    pub subgraph: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DotFunction {
    pub name: String,
    pub cfg: Cfg,
    /// Graph-level `key=value` assignments of the function, as written.
    pub passthrough_attrs: Vec<(String, String)>,
    pub scope: Scope,
}

#[derive(Debug, Clone)]
pub struct DotDocument {
    pub dialect: Dialect,
    pub functions: Vec<DotFunction>,
    pub graphs: Vec<Graph>,
    pub warnings: Vec<DotWarning>,
}

fn is_decision_cluster(s: &Subgraph) -> bool {
    s.id.as_ref()
        .is_some_and(|id| id.value.starts_with(DECISION_CLUSTER_PREFIX))
}

fn contains_nodes(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Node { .. } | Stmt::Edge { .. } => true,
        Stmt::Subgraph(sub) => contains_nodes(&sub.stmts),
        _ => false,
    })
}

#[derive(Default)]
struct Collector {
    nodes: Vec<(String, Option<String>)>,
    index: HashMap<String, usize>,
    edges: Vec<(String, String, Option<String>)>,
    invisible: Vec<(String, String)>,
}

impl Collector {
    fn node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.index.insert(id.to_string(), self.nodes.len());
        self.nodes.push((id.to_string(), None));
        self.nodes.len() - 1
    }

    fn end_nodes(&mut self, end: &EdgeEnd) -> Vec<String> {
        match end {
            EdgeEnd::Node(n) => {
                self.node(&n.id.value);
                vec![n.id.value.clone()]
            }
            EdgeEnd::Subgraph(s) => {
                let mut mentioned = Vec::new();
                self.stmts(&s.stmts, &mut Some(&mut mentioned));
                mentioned
            }
        }
    }

    fn stmts(&mut self, stmts: &[Stmt], mentioned: &mut Option<&mut Vec<String>>) {
        for stmt in stmts {
            match stmt {
                Stmt::Node { node, attrs } => {
                    let i = self.node(&node.id.value);
                    if let Some(label) = attr_value(attrs, "label") {
                        self.nodes[i].1 = Some(label.to_string());
                    }
                    if let Some(m) = mentioned.as_deref_mut() {
                        m.push(node.id.value.clone());
                    }
                }
                Stmt::Edge { ends, attrs } => {
                    let groups: Vec<Vec<String>> = ends.iter().map(|e| self.end_nodes(e)).collect();
                    let invisible = attr_value(attrs, "style").is_some_and(|s| s.contains("invis"));
                    let label = attr_value(attrs, "label").map(str::to_string);
                    for pair in groups.windows(2) {
                        for t in &pair[0] {
                            for h in &pair[1] {
                                if invisible {
                                    self.invisible.push((t.clone(), h.clone()));
                                } else {
                                    self.edges.push((t.clone(), h.clone(), label.clone()));
                                }
                            }
                        }
                    }
                    if let Some(m) = mentioned.as_deref_mut() {
                        m.extend(groups.into_iter().flatten());
                    }
                }
                Stmt::Subgraph(sub) => self.stmts(&sub.stmts, mentioned),
                _ => {}
            }
        }
    }
}

fn assignments(stmts: &[Stmt]) -> Vec<(String, String)> {
    stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Assign(k, v) => Some((k.raw.clone(), v.raw.clone())),
            _ => None,
        })
        .collect()
}

fn build_function(
    name: String,
    stmts: &[Stmt],
    scope: Scope,
    warnings: &mut Vec<DotWarning>,
) -> Result<DotFunction, DotError> {
    let mut c = Collector::default();
    c.stmts(stmts, &mut None);
    let mut b = CfgBuilder::new();
    for (id, label) in &c.nodes {
        b.vertex(id.as_str());
        if let Some(label) = label {
            b.label(id.as_str(), label.as_str());
        }
    }
    for (t, h, label) in &c.edges {
        match label {
            Some(l) => b.labeled_edge(t.as_str(), h.as_str(), l.as_str()),
            None => b.edge(t.as_str(), h.as_str()),
        };
    }
    let cfg = b.build(false).map_err(|source| DotError::Graph {
        function: name.clone(),
        source,
    })?;
    for (tail, head) in cfg.collapsed_edges() {
        warnings.push(DotWarning::MultiEdgeCollapsed {
            function: name.clone(),
            tail: tail.clone(),
            head: head.clone(),
        });
    }
    for (t, h) in c.invisible {
        warnings.push(DotWarning::InvisibleEdgeIgnored {
            function: name.clone(),
            tail: t.into(),
            head: h.into(),
        });
    }
    Ok(DotFunction {
        name,
        cfg,
        passthrough_attrs: assignments(stmts),
        scope,
    })
}

fn graph_label(stmts: &[Stmt]) -> Option<String> {
    stmts.iter().rev().find_map(|s| match s {
        Stmt::Assign(k, v) if k.value == "label" => Some(v.value.clone()),
        Stmt::Attr {
            target: AttrTarget::Graph,
            attrs,
        } => attr_value(attrs, "label").map(str::to_string),
        _ => None,
    })
}

/// Parses a dot file into per-function CFGs. The dialect is detected from
/// the text unless given.
pub fn parse_dot(text: &str, dialect: Option<Dialect>) -> Result<DotDocument, DotError> {
    let dialect = dialect.unwrap_or_else(|| detect_dialect(text));
    let graphs = parse_graphs(text)?;
    let mut functions = Vec::new();
    let mut warnings = Vec::new();
    for (gi, g) in graphs.iter().enumerate() {
        let graph_name = g.id.as_ref().map(|i| i.value.clone()).unwrap_or_default();
        let mut split = false;
        if dialect == Dialect::Gcc {
            for (si, stmt) in g.stmts.iter().enumerate() {
                let Stmt::Subgraph(sub) = stmt else { continue };
                if is_decision_cluster(sub) || !contains_nodes(&sub.stmts) {
                    continue;
                }
                split = true;
                let name = graph_label(&sub.stmts)
                    .or_else(|| sub.id.as_ref().map(|i| i.value.clone()))
                    .unwrap_or_else(|| format!("{graph_name}#{si}"));
                let scope = Scope {
                    graph: gi,
                    subgraph: Some(si),
                };
                functions.push(build_function(name, &sub.stmts, scope, &mut warnings)?);
            }
        }
        if !split {
            let name = if graph_name.is_empty() {
                graph_label(&g.stmts).unwrap_or_default()
            } else {
                graph_name
            };
            let scope = Scope {
                graph: gi,
                subgraph: None,
            };
            functions.push(build_function(name, &g.stmts, scope, &mut warnings)?);
        }
    }
    Ok(DotDocument {
        dialect,
        functions,
        graphs,
        warnings,
    })
}

/// Writes the document back unchanged apart from layout.
pub fn emit_dot(document: &DotDocument) -> String {
    write_graphs(&document.graphs)
}

/// A generic-dialect document holding `cfg` as the single function `name`,
/// with one node statement per vertex and vertex and edge labels kept.
pub fn document_from_cfg(name: &str, cfg: &Cfg) -> DotDocument {
    let label = |text: &str| vec![vec![(Id::new("label"), Some(Id::new_quoted(text)))]];
    let mut stmts = Vec::new();
    for v in cfg.vertices() {
        stmts.push(Stmt::Node {
            node: NodeRef {
                id: Id::new(v.as_str()),
                port: Vec::new(),
            },
            attrs: cfg.label(v.as_str()).map(label).unwrap_or_default(),
        });
    }
    for (t, h) in cfg.edges() {
        let end = |v: &VertexId| {
            EdgeEnd::Node(NodeRef {
                id: Id::new(v.as_str()),
                port: Vec::new(),
            })
        };
        stmts.push(Stmt::Edge {
            ends: vec![end(t), end(h)],
            attrs: cfg.edge_label(t.as_str(), h.as_str()).map(label).unwrap_or_default(),
        });
    }
    let graph = Graph {
        strict: false,
        id: Some(Id::new(name)),
        stmts,
    };
    DotDocument {
        dialect: Dialect::Generic,
        functions: vec![DotFunction {
            name: name.to_string(),
            cfg: cfg.clone(),
            passthrough_attrs: Vec::new(),
            scope: Scope {
                graph: 0,
                subgraph: None,
            },
        }],
        graphs: vec![graph],
        warnings: Vec::new(),
    }
}

/// Drops decision clusters from an earlier annotation, keeping anything in
/// them other than their label and bare node references.
fn drop_decision_clusters(stmts: &mut Vec<Stmt>) {
    let old = std::mem::take(stmts);
    for stmt in old {
        match stmt {
            Stmt::Subgraph(sub) if is_decision_cluster(&sub) => {
                for inner in sub.stmts {
                    match inner {
                        Stmt::Assign(..) => {}
                        Stmt::Node { ref attrs, .. } if attrs.is_empty() => {}
                        other => stmts.push(other),
                    }
                }
            }
            Stmt::Subgraph(mut sub) => {
                drop_decision_clusters(&mut sub.stmts);
                stmts.push(Stmt::Subgraph(sub));
            }
            other => stmts.push(other),
        }
    }
}

/// Strips the `cluster` prefix from subgraph names so that the only
/// clusters left are decisions. GraphViz cannot draw a node inside two
/// clusters that do not nest.
fn strip_cluster_names(stmts: &mut [Stmt]) {
    for stmt in stmts {
        let sub = match stmt {
            Stmt::Subgraph(sub) => sub,
            Stmt::Edge { ends, .. } => {
                for end in ends {
                    if let EdgeEnd::Subgraph(sub) = end {
                        strip_cluster_names(&mut sub.stmts);
                    }
                }
                continue;
            }
            _ => continue,
        };
        if let Some(id) = &sub.id {
            if id.value.len() >= 7 && id.value[..7].eq_ignore_ascii_case("cluster") {
                let rest = &id.value[7..];
                let rest = rest.strip_prefix('_').filter(|r| !r.is_empty()).unwrap_or(rest);
                sub.id = match rest {
                    "" => None,
                    _ if id.raw.starts_with('"') => Some(Id {
                        raw: format!("\"{}\"", rest.replace('"', "\\\"")),
                        value: rest.to_string(),
                    }),
                    _ => Some(Id::new(rest)),
                };
            }
        }
        strip_cluster_names(&mut sub.stmts);
    }
}

/// Collects the written form of every node id in `stmts`.
fn raw_ids(stmts: &[Stmt], out: &mut HashMap<String, Id>) {
    fn note(out: &mut HashMap<String, Id>, n: &NodeRef) {
        out.entry(n.id.value.clone()).or_insert_with(|| n.id.clone());
    }
    for stmt in stmts {
        match stmt {
            Stmt::Node { node, .. } => note(out, node),
            Stmt::Edge { ends, .. } => {
                for end in ends {
                    match end {
                        EdgeEnd::Node(n) => note(out, n),
                        EdgeEnd::Subgraph(s) => raw_ids(&s.stmts, out),
                    }
                }
            }
            Stmt::Subgraph(s) => raw_ids(&s.stmts, out),
            _ => {}
        }
    }
}

/// Writes the document with one `cluster_decision_<function>_<n>` subgraph
/// per decision, labelled `Decision <n>`. `cfdgs` runs parallel to
/// `document.functions`.
pub fn emit_annotated_dot(document: &DotDocument, cfdgs: &[Cfdg]) -> Result<String, DotError> {
    if cfdgs.len() != document.functions.len() {
        return Err(DotError::FunctionCount {
            expected: document.functions.len(),
            found: cfdgs.len(),
        });
    }
    let mut graphs = document.graphs.clone();
    for g in &mut graphs {
        drop_decision_clusters(&mut g.stmts);
        strip_cluster_names(&mut g.stmts);
    }
    for (fid, (function, cfdg)) in document.functions.iter().zip(cfdgs).enumerate() {
        let graph = &mut graphs[function.scope.graph];
        let stmts = match function.scope.subgraph {
            None => &mut graph.stmts,
            Some(si) => match &mut graph.stmts[si] {
                Stmt::Subgraph(sub) => &mut sub.stmts,
                _ => unreachable!("function scopes point at subgraphs"),
            },
        };
        let mut ids = HashMap::new();
        raw_ids(stmts, &mut ids);
        for d in cfdg.decisions() {
            let mut members = Vec::new();
            let ordered: BTreeSet<&VertexId> = d.members.iter().collect();
            for m in ordered {
                let Some(id) = ids.get(m.as_str()) else {
                    return Err(DotError::DecisionVertexMissing {
                        function: function.name.clone(),
                        vertex: m.clone(),
                    });
                };
                members.push(Stmt::Node {
                    node: NodeRef {
                        id: id.clone(),
                        port: Vec::new(),
                    },
                    attrs: Vec::new(),
                });
            }
            let mut body = vec![Stmt::Assign(Id::new("label"), Id::new(&format!("Decision {}", d.id)))];
            body.extend(members);
            stmts.push(Stmt::Subgraph(Subgraph {
                id: Some(Id::new(&format!("{DECISION_CLUSTER_PREFIX}{fid}_{}", d.id))),
                stmts: body,
            }));
        }
    }
    Ok(write_graphs(&graphs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::create_cfdg;

    const AND_GUARD: &str = r#"digraph and_guard {
  // x = 0; if (a && b) x = 1; return x;
  x0 [label="x = 0"];
  a [label="a", shape=diamond];
  b [label="b", shape=diamond];
  x1 [label="x = 1"];
  ret [label="return x"];
  x0 -> a;
  a -> b [label="true"];
  a -> ret [label="false"];
  b -> x1 [label="true"];
  b -> ret [label="false"];
  x1 -> ret;
}
"#;

    #[test]
    fn documents_from_graphs_parse_back() {
        let doc = parse_dot(AND_GUARD, None).unwrap();
        let cfg = &doc.functions[0].cfg;
        let text = emit_dot(&document_from_cfg("and guard", cfg));
        assert!(text.starts_with("digraph \"and guard\" {\n  x0 [label=\"x = 0\"];"));
        let again = parse_dot(&text, None).unwrap();
        let back = &again.functions[0].cfg;
        assert_eq!(again.functions[0].name, "and guard");
        assert!(back.edges().eq(cfg.edges()));
        assert_eq!(back.edge_label("a", "b"), Some("true"));
        assert_eq!(back.label("x1"), Some("x = 1"));
    }

    #[test]
    fn detects_dialects() {
        assert_eq!(detect_dialect(r#"n [label="<bb 4>:\l x = 1;"]"#), Dialect::Gcc);
        assert_eq!(detect_dialect(r#"n [label="\<bb\ 4\>:\l"]"#), Dialect::Gcc);
        assert_eq!(detect_dialect(r#"n [label="%24:\l br label %5"]"#), Dialect::Clang);
        assert_eq!(detect_dialect(r#"n [label="{%24:\l"]"#), Dialect::Clang);
        assert_eq!(detect_dialect("digraph { n0 -> n1; n1 -> n5 }"), Dialect::Generic);
    }

    #[test]
    fn parses_and_guard() {
        let doc = parse_dot(AND_GUARD, None).unwrap();
        assert_eq!(doc.dialect, Dialect::Generic);
        assert_eq!(doc.functions.len(), 1);
        let f = &doc.functions[0];
        assert_eq!(f.name, "and_guard");
        assert_eq!(f.cfg.len(), 5);
        assert_eq!(f.cfg.edge_count(), 6);
        assert_eq!(f.cfg.label("x0"), Some("x = 0"));
        assert_eq!(f.cfg.edge_label("a", "ret"), Some("false"));
        assert!(f.cfg.validate_strict().is_ok());
    }

    #[test]
    fn empty_digraph() {
        let doc = parse_dot("digraph g {}", None).unwrap();
        assert_eq!(doc.functions.len(), 1);
        assert!(doc.functions[0].cfg.is_empty());
        let again = parse_dot(&emit_dot(&doc), None).unwrap();
        assert!(again.functions[0].cfg.is_empty());
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_dot("digraph g {\n  a -> ;\n}", None).unwrap_err();
        assert_eq!(
            err,
            DotError::Syntax {
                line: 2,
                column: 8,
                message: "expected an identifier, found `;`".into()
            }
        );
        assert!(matches!(
            parse_dot("graph g { a -- b }", None),
            Err(DotError::NotADigraph { line: 1, .. })
        ));
        assert!(matches!(
            parse_dot("digraph g { a -> b", None),
            Err(DotError::Syntax { .. })
        ));
        assert!(matches!(
            parse_dot("digraph g { a [label=\"x] }", None),
            Err(DotError::Syntax { .. })
        ));
        assert!(matches!(parse_dot("", None), Err(DotError::Syntax { .. })));
    }

    #[test]
    fn strings_comments_and_ports() {
        let text = "/* head */ digraph \"g\" {\n# 1 \"file\"\n  \"a b\" [label=\"say \\\"hi\\\"\" + \" there\"];\n  \"a b\":s -> c:n:w; // tail\n  c -> <d> ;\n  c -> e -> f\n}";
        let doc = parse_dot(text, None).unwrap();
        let g = &doc.functions[0].cfg;
        assert_eq!(g.label("a b"), Some("say \"hi\" there"));
        assert!(g.has_edge("a b", "c"));
        assert!(g.has_edge("c", "d"));
        assert!(g.has_edge("e", "f"));
        let round = parse_dot(&emit_dot(&doc), None).unwrap();
        assert!(round.functions[0].cfg.edges().eq(g.edges()));
        assert_eq!(round.functions[0].cfg.label("a b"), Some("say \"hi\" there"));
    }

    #[test]
    fn line_continuations_in_labels() {
        let text = "digraph g {\n  n [label=\"one\\\ntwo\"];\n}";
        let doc = parse_dot(text, None).unwrap();
        assert_eq!(doc.functions[0].cfg.label("n"), Some("onetwo"));
    }

    #[test]
    fn subgraph_edge_operands() {
        let doc = parse_dot("digraph { a -> { b c } }", None).unwrap();
        let g = &doc.functions[0].cfg;
        assert!(g.has_edge("a", "b") && g.has_edge("a", "c"));
    }

    #[test]
    fn repeated_and_invisible_edges() {
        let doc = parse_dot("digraph { a -> b; a -> b; a -> c [style=invis]; }", None).unwrap();
        assert_eq!(doc.functions[0].cfg.edge_count(), 1);
        assert!(doc.functions[0].cfg.contains("c"));
        assert_eq!(doc.warnings.len(), 2);
        assert!(matches!(doc.warnings[0], DotWarning::MultiEdgeCollapsed { .. }));
        assert!(matches!(doc.warnings[1], DotWarning::InvisibleEdgeIgnored { .. }));
    }

    #[test]
    fn annotates_and_guard() {
        let doc = parse_dot(AND_GUARD, None).unwrap();
        let (cfdg, _) = create_cfdg(&doc.functions[0].cfg).unwrap();
        let out = emit_annotated_dot(&doc, &[cfdg]).unwrap();
        assert_eq!(out.matches("subgraph cluster_decision_").count(), 1);
        assert!(out.contains("subgraph cluster_decision_0_0 {\n    label=\"Decision 0\";\n    a;\n    b;\n  }"));
        let again = parse_dot(&out, None).unwrap();
        let (g0, g1) = (&doc.functions[0].cfg, &again.functions[0].cfg);
        assert_eq!(g0.vertices(), g1.vertices());
        assert!(g0.edges().eq(g1.edges()));
    }

    #[test]
    fn gcc_functions_and_cluster_renaming() {
        let text = r#"digraph "t.c.015t.cfg" {
overlap=false;
subgraph "cluster_main" {
	style="dashed";
	label="main ()";
	subgraph cluster_0_1 {
	label="loop 1";
	fn_0_basic_block_3 [shape=record,label="{ FREQ:1 |\<bb\ 3\>:\l\
|x_8\ =\ x_1\ +\ 1;\l\
}"];
	}
	fn_0_basic_block_0 [label="ENTRY"];
	fn_0_basic_block_1 [label="EXIT"];
	fn_0_basic_block_2 [label="\<bb\ 2\>:"];
	fn_0_basic_block_0:s -> fn_0_basic_block_2:n [style="solid,bold"];
	fn_0_basic_block_2:s -> fn_0_basic_block_3:n [style="solid,bold"];
	fn_0_basic_block_2:s -> fn_0_basic_block_1:n [style="solid,bold"];
	fn_0_basic_block_3:s -> fn_0_basic_block_2:n [style="dotted,bold",color=blue];
	fn_0_basic_block_0:s -> fn_0_basic_block_1:n [style="invis",constraint=true];
}
}
"#;
        let doc = parse_dot(text, None).unwrap();
        assert_eq!(doc.dialect, Dialect::Gcc);
        assert_eq!(doc.functions.len(), 1);
        let f = &doc.functions[0];
        assert_eq!(f.name, "main ()");
        assert_eq!(f.cfg.len(), 4);
        assert_eq!(f.cfg.edge_count(), 4);
        assert!(f
            .cfg
            .label("fn_0_basic_block_3")
            .unwrap()
            .contains("\\<bb\\ 3\\>:\\l|x_8"));
        let (cfdg, _) = create_cfdg(&f.cfg).unwrap();
        let out = emit_annotated_dot(&doc, &[cfdg]).unwrap();
        assert!(out.contains("subgraph \"main\" {"), "{out}");
        assert!(out.contains("subgraph \"0_1\" {"), "{out}");
        assert!(out.contains("subgraph cluster_decision_0_0 {"));
        assert!(out.contains("[style=\"dotted,bold\", color=blue]"));
        let again = parse_dot(&out, None).unwrap();
        assert_eq!(again.functions.len(), 1);
        assert!(again.functions[0].cfg.edges().eq(f.cfg.edges()));
    }

    #[test]
    fn reannotation_replaces_decision_clusters() {
        let doc = parse_dot(AND_GUARD, None).unwrap();
        let (cfdg, _) = create_cfdg(&doc.functions[0].cfg).unwrap();
        let once = emit_annotated_dot(&doc, std::slice::from_ref(&cfdg)).unwrap();
        let doc2 = parse_dot(&once, None).unwrap();
        let twice = emit_annotated_dot(&doc2, &[cfdg]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn missing_decision_vertex() {
        let doc = parse_dot("digraph { a -> b; a -> c }", None).unwrap();
        let other = parse_dot("digraph { z -> b; z -> c }", None).unwrap();
        let (cfdg, _) = create_cfdg(&other.functions[0].cfg).unwrap();
        assert!(matches!(
            emit_annotated_dot(&doc, &[cfdg]),
            Err(DotError::DecisionVertexMissing { .. })
        ));
        assert!(matches!(
            emit_annotated_dot(&doc, &[]),
            Err(DotError::FunctionCount { .. })
        ));
    }
}
