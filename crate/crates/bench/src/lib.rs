//! Workloads shared by the benchmarks.

use cfdg_core::expr::{enumerate_exprs, enumerate_runs};
use cfdg_core::generate::random_cfg;
use cfdg_core::{create_cfdg, expr_to_cfg, Cfdg, Cfg, TestSuite};

/// Graph sizes the inference benchmarks sweep over.
pub const SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// A seeded random CFG of `n` vertices.
pub fn random_graph(n: usize) -> Cfg {
    random_cfg(n, 0x5eed ^ n as u64)
}

/// Every expression with up to `max_conditions` conditions, inferred, with
/// the suite of all its runs.
pub fn exhaustive_family(max_conditions: usize) -> Vec<(Cfdg, TestSuite)> {
    enumerate_exprs(max_conditions)
        .iter()
        .map(|e| {
            let (cfdg, _) = create_cfdg(&expr_to_cfg(e).cfg).expect("generated graphs are well formed");
            let runs = enumerate_runs(e)
                .expect("few symbols")
                .into_iter()
                .map(|(_, r)| r)
                .collect();
            (cfdg, TestSuite::new(runs).expect("runs are named by vector"))
        })
        .collect()
}

/// A generic-dialect dot file holding `functions` copies of a random CFG
/// of `n` vertices.
pub fn dot_text(n: usize, functions: usize) -> String {
    let g = random_graph(n);
    let mut out = String::new();
    for f in 0..functions {
        out.push_str(&format!("digraph f{f} {{\n"));
        for (a, b) in g.edges() {
            out.push_str(&format!("  {a} -> {b};\n"));
        }
        out.push_str("}\n");
    }
    out
}
