//! Bounded-degree undirected graphs under batched edge updates, and their lazy
//! random-walk transition matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::numerics::{q, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeOpKind {
    Insert,
    Delete,
}

/// One edge change, written `+(u,v)` or `-(u,v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeOp {
    pub kind: EdgeOpKind,
    pub u: usize,
    pub v: usize,
}

impl EdgeOp {
    pub fn insert(u: usize, v: usize) -> Self {
        EdgeOp { kind: EdgeOpKind::Insert, u, v }
    }

    pub fn delete(u: usize, v: usize) -> Self {
        EdgeOp { kind: EdgeOpKind::Delete, u, v }
    }

    pub fn inverse(&self) -> Self {
        let kind = match self.kind {
            EdgeOpKind::Insert => EdgeOpKind::Delete,
            EdgeOpKind::Delete => EdgeOpKind::Insert,
        };
        EdgeOp { kind, ..*self }
    }
}

impl fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.kind {
            EdgeOpKind::Insert => '+',
            EdgeOpKind::Delete => '-',
        };
        write!(f, "{sign}({},{})", self.u, self.v)
    }
}

impl FromStr for EdgeOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Contract(format!("malformed edge op `{s}`"));
        let s = s.trim();
        let kind = match s.chars().next() {
            Some('+') => EdgeOpKind::Insert,
            Some('-') => EdgeOpKind::Delete,
            _ => return Err(bad()),
        };
        let body = s[1..].strip_prefix('(').and_then(|b| b.strip_suffix(')')).ok_or_else(bad)?;
        let (u, v) = body.split_once(',').ok_or_else(bad)?;
        let u = u.trim().parse().map_err(|_| bad())?;
        let v = v.trim().parse().map_err(|_| bad())?;
        Ok(EdgeOp { kind, u, v })
    }
}

/// Ordered edge changes applied sequentially and atomically.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeBatch {
    pub ops: Vec<EdgeOp>,
}

impl EdgeBatch {
    pub fn new(ops: Vec<EdgeOp>) -> Self {
        EdgeBatch { ops }
    }

    pub fn empty() -> Self {
        EdgeBatch::default()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The batch that undoes this one.
    pub fn inverse(&self) -> Self {
        EdgeBatch { ops: self.ops.iter().rev().map(EdgeOp::inverse).collect() }
    }
}

impl fmt::Display for EdgeBatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ops.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A change to one transition-matrix entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryDelta {
    pub row: usize,
    pub col: usize,
    pub delta: Q,
}

/// Sums deltas per entry and drops entries that cancel.
pub fn net_deltas(deltas: impl IntoIterator<Item = EntryDelta>) -> Vec<EntryDelta> {
    let mut acc: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for d in deltas {
        *acc.entry((d.row, d.col)).or_insert_with(Q::zero) += d.delta;
    }
    acc.into_iter().filter(|(_, v)| !v.is_zero()).map(|((row, col), delta)| EntryDelta { row, col, delta }).collect()
}

/// Undirected graph on `0..n` with every degree at most `d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynGraph {
    n: usize,
    d: usize,
    edges: BTreeSet<(usize, usize)>,
    degrees: Vec<usize>,
    batch_limit: Option<usize>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl DynGraph {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("degree bound must be positive".into()));
        }
        Ok(DynGraph { n, d, edges: BTreeSet::new(), degrees: vec![0; n], batch_limit: None })
    }

    /// Builds a graph from an edge list, rejecting it as a single batch would.
    pub fn from_edges(n: usize, d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = DynGraph::new(n, d)?;
        let batch = EdgeBatch::new(edges.iter().map(|&(u, v)| EdgeOp::insert(u, v)).collect());
        Ok(g.validate_and_apply(&batch)?.0)
    }

    /// Caps the number of operations accepted per batch.
    pub fn with_batch_limit(mut self, limit: Option<usize>) -> Self {
        self.batch_limit = limit;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&key(u, v))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, in order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    fn step_weight(&self) -> Q {
        q(1, 2 * self.d as i64)
    }

    /// Symmetric row-stochastic matrix of the lazy walk: `1/(2d)` per edge,
    /// the rest of each row on the diagonal.
    pub fn lazy_transition(&self) -> RatMatrix {
        let w = self.step_weight();
        let mut t = RatMatrix::identity(self.n);
        for &(u, v) in &self.edges {
            t.set(u, v, w.clone());
            t.set(v, u, w.clone());
            *t.entry_mut(u, u) -= &w;
            *t.entry_mut(v, v) -= &w;
        }
        t
    }

    /// Applies the whole batch or nothing; returns the new graph and the net
    /// transition-matrix changes.
    pub fn validate_and_apply(&self, batch: &EdgeBatch) -> Result<(DynGraph, Vec<EntryDelta>)> {
        if let Some(limit) = self.batch_limit {
            if batch.len() > limit {
                return Err(Error::BatchRejected {
                    index: limit,
                    reason: format!("batch has {} ops, limit is {limit}", batch.len()),
                });
            }
        }
        let mut g = self.clone();
        let w = self.step_weight();
        let mut raw = Vec::with_capacity(batch.len() * 4);
        for (index, op) in batch.ops.iter().enumerate() {
            let reject = |reason: String| Err(Error::BatchRejected { index, reason });
            let (u, v) = (op.u, op.v);
            if u >= g.n || v >= g.n {
                return reject(format!("{op}: vertex out of range"));
            }
            if u == v {
                return reject(format!("{op}: self-loop"));
            }
            let sign = match op.kind {
                EdgeOpKind::Insert => {
                    if g.has_edge(u, v) {
                        return reject(format!("{op}: edge already present"));
                    }
                    for x in [u, v] {
                        if g.degrees[x] >= g.d {
                            return reject(format!("{op}: vertex {x} would exceed degree {}", g.d));
                        }
                    }
                    g.edges.insert(key(u, v));
                    g.degrees[u] += 1;
                    g.degrees[v] += 1;
                    w.clone()
                }
                EdgeOpKind::Delete => {
                    if !g.edges.remove(&key(u, v)) {
                        return reject(format!("{op}: edge absent"));
                    }
                    g.degrees[u] -= 1;
                    g.degrees[v] -= 1;
                    -w.clone()
                }
            };
            raw.push(EntryDelta { row: u, col: v, delta: sign.clone() });
            raw.push(EntryDelta { row: v, col: u, delta: sign.clone() });
            raw.push(EntryDelta { row: u, col: u, delta: -sign.clone() });
            raw.push(EntryDelta { row: v, col: v, delta: -sign });
        }
        Ok((g, net_deltas(raw)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::qi;

    #[test]
    fn transition_examples() {
        assert_eq!(DynGraph::new(3, 2).unwrap().lazy_transition(), RatMatrix::identity(3));
        let g = DynGraph::from_edges(2, 1, &[(0, 1)]).unwrap();
        let half = q(1, 2);
        assert_eq!(
            g.lazy_transition(),
            RatMatrix::from_rows(vec![vec![half.clone(), half.clone()], vec![half.clone(), half]]).unwrap()
        );
        let tri = DynGraph::from_edges(3, 2, &[(0, 1), (1, 2), (0, 2)]).unwrap().lazy_transition();
        for i in 0..3 {
            assert_eq!(tri.get(i, i), &q(1, 2));
            assert_eq!(tri.row(i).iter().sum::<Q>(), qi(1));
            for j in 0..3 {
                if i != j {
                    assert_eq!(tri.get(i, j), &q(1, 4));
                }
            }
        }
    }

    #[test]
    fn delta_examples() {
        let g = DynGraph::new(2, 1).unwrap();
        let (_, deltas) = g.validate_and_apply(&EdgeBatch::new(vec![EdgeOp::insert(0, 1)])).unwrap();
        let expect = vec![
            EntryDelta { row: 0, col: 0, delta: q(-1, 2) },
            EntryDelta { row: 0, col: 1, delta: q(1, 2) },
            EntryDelta { row: 1, col: 0, delta: q(1, 2) },
            EntryDelta { row: 1, col: 1, delta: q(-1, 2) },
        ];
        assert_eq!(deltas, expect);

        let batch = EdgeBatch::new(vec![EdgeOp::insert(0, 1), EdgeOp::delete(1, 0)]);
        let (g2, deltas) = g.validate_and_apply(&batch).unwrap();
        assert!(deltas.is_empty());
        assert_eq!(g2, g);
    }

    #[test]
    fn rejections_carry_op_index() {
        let g = DynGraph::from_edges(3, 1, &[(0, 1)]).unwrap();
        let cases = [
            (EdgeBatch::new(vec![EdgeOp::delete(0, 1), EdgeOp::insert(0, 2), EdgeOp::insert(1, 2)]), 2),
            (EdgeBatch::new(vec![EdgeOp::insert(0, 2)]), 0),
            (EdgeBatch::new(vec![EdgeOp::delete(0, 1), EdgeOp::insert(0, 1), EdgeOp::insert(1, 0)]), 2),
            (EdgeBatch::new(vec![EdgeOp::delete(0, 2)]), 0),
            (EdgeBatch::new(vec![EdgeOp::delete(0, 1), EdgeOp::insert(2, 2)]), 1),
            (EdgeBatch::new(vec![EdgeOp::insert(0, 9)]), 0),
        ];
        for (batch, at) in cases {
            match g.validate_and_apply(&batch) {
                Err(Error::BatchRejected { index, .. }) => assert_eq!(index, at, "{batch}"),
                other => panic!("expected rejection for {batch}, got {other:?}"),
            }
        }
        let limited = g.clone().with_batch_limit(Some(1));
        let two = EdgeBatch::new(vec![EdgeOp::delete(0, 1), EdgeOp::insert(0, 1)]);
        assert!(matches!(limited.validate_and_apply(&two), Err(Error::BatchRejected { .. })));
    }

    #[test]
    fn edge_op_text_roundtrip() {
        for s in ["+(0,1)", "-(12,3)"] {
            assert_eq!(s.parse::<EdgeOp>().unwrap().to_string(), s);
        }
        assert_eq!("+( 2 , 5 )".parse::<EdgeOp>().unwrap(), EdgeOp::insert(2, 5));
        for bad in ["(0,1)", "+0,1", "+(0;1)", "+(a,1)", ""] {
            assert!(bad.parse::<EdgeOp>().is_err(), "{bad}");
        }
    }
}
