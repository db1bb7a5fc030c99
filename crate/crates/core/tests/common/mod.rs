#![allow(dead_code)]

use dynwalk::graph::{DynGraph, EdgeBatch, EdgeOp};
use rand::Rng;

/// A batch that `graph` accepts: inserts respect the degree bound and
/// deletes name present edges.
pub fn valid_batch(rng: &mut impl Rng, graph: &DynGraph, max_ops: usize) -> EdgeBatch {
    let n = graph.n();
    let mut g = graph.clone();
    let mut ops = Vec::new();
    let want = rng.gen_range(0..=max_ops);
    for _ in 0..want * 4 {
        if ops.len() == want || n < 2 {
            break;
        }
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let op = if g.has_edge(u, v) { EdgeOp::delete(u, v) } else { EdgeOp::insert(u, v) };
        if let Ok((next, _)) = g.validate_and_apply(&EdgeBatch::new(vec![op])) {
            g = next;
            ops.push(op);
        }
    }
    EdgeBatch::new(ops)
}
