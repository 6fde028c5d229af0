//! Seeded random CFGs for property tests and benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::graph::{Cfg, CfgBuilder};

/// A random well-formed CFG on `n` vertices `v0..v{n-1}`.
///
/// The vertices form a chain from the entry `v0` to the single exit
/// `v{n-1}`. About half of the others get a second edge to a random vertex
/// other than the entry, which may point backwards and close a loop.
pub fn random_cfg(n: usize, seed: u64) -> Cfg {
    random_cfg_with(n, seed, 0.5)
}

/// Like [`random_cfg`], with `branch_probability` the chance of a second
/// out-edge.
pub fn random_cfg_with(n: usize, seed: u64, branch_probability: f64) -> Cfg {
    assert!(n > 0, "a CFG needs at least one vertex");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut b = CfgBuilder::new();
    for i in 0..n {
        b.vertex(format!("v{i}"));
    }
    for i in 0..n.saturating_sub(1) {
        b.edge(format!("v{i}"), format!("v{}", i + 1));
        if n > 2 && rng.gen_bool(branch_probability) {
            let mut t = rng.gen_range(1..n);
            if t == i + 1 {
                t = if t + 1 < n { t + 1 } else { 1 };
            }
            if t != i + 1 {
                b.edge(format!("v{i}"), format!("v{t}"));
            }
        }
    }
    b.build(true).expect("chain graphs are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        for seed in 0..20 {
            let g = random_cfg(30, seed);
            assert_eq!(g.len(), 30);
            let (entries, exits) = g.entry_and_exits();
            assert_eq!(entries.len(), 1);
            assert_eq!(exits.len(), 1);
            assert!(g.vertices().iter().all(|v| g.outdegree(v.as_str()).unwrap() <= 2));
        }
        assert_eq!(random_cfg(1, 0).edge_count(), 0);
        assert_eq!(random_cfg(2, 0).edge_count(), 1);
    }

    #[test]
    fn deterministic() {
        let a = random_cfg(50, 7);
        let b = random_cfg(50, 7);
        assert!(a.edges().eq(b.edges()));
    }
}
