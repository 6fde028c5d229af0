//! Decision-subgraph inference for control-flow graphs, and evaluation of
//! control-flow coverage criteria over the resulting decision graphs.
//!
//! The pipeline is:
//!
//! 1. obtain a [`Cfg`], either by reading a GraphViz file with
//!    [`dot::parse_dot`] or by lowering a boolean expression with
//!    [`expr::expr_to_cfg`];
//! 2. group its conditions into decisions with [`decision::create_cfdg`];
//! 3. read test runs with [`trace::parse_traces`] and score them with
//!    [`coverage::evaluate`].

pub mod coverage;
pub mod decision;
pub mod dot;
pub mod expr;
pub mod generate;
pub mod graph;
pub mod trace;

pub use coverage::{evaluate, CoverageReport, Criterion, LoopMode, Semantics};
pub use decision::{create_cfdg, verify_decision_invariants, MergeStats};
pub use expr::{expr_to_cfg, parse_expr, DecisionExpr, ExprCfg, TestVector};
pub use graph::{build_cfg, compute_dominators, Cfdg, Cfg, CfgBuilder, Decision, GraphError, VertexId};
pub use trace::{Run, TestSuite};
