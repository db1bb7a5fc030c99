//! The dynamic walk-generating-function program.
//!
//! For a transition matrix `A` on `n` vertices we maintain
//! `G = sum_{i<=K} (xB)^i mod x^{K+1}` where `B = [[0, A], [I, 0]]` is the
//! bipartite embedding; the `x^{2j}` coefficient of `G[s][t]` is `A^j[s][t]`.
//! Every change to `A` lands in the top-right block of `B`, i.e. on arcs from
//! a first-copy vertex (an *input*) to a second-copy vertex (an *output*).
//!
//! A batch of changes is applied through a delta gadget: a small matrix over
//! the affected inputs, the affected outputs and two portals whose walk sum
//! from portal to portal is exactly the correction to `G[s][t]`. Negative
//! changes are applied first, then positive ones against the updated `G`.

use num_traits::Zero;

use crate::error::{contract, Error, Result};
use crate::graph::{net_deltas, DynGraph, EdgeBatch, EntryDelta};
use crate::linalg::{PolyMatrix, RatMatrix};
use crate::matpow::{power_large, power_sum};
use crate::numerics::{truncate_q, PrecisionBudget, Q};
use crate::poly::UniPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Exact,
    /// Coefficients are kept as multiples of `2^-b`.
    Bits(u64),
}

pub const DEFAULT_GUARD_BITS: u64 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynConfig {
    /// Truncation degree `K` of the maintained series.
    pub max_degree: usize,
    pub precision: Precision,
    pub guard_bits: u64,
    /// Cap on the number of changed arcs a single correction walk may use.
    /// `None` means `K`, which is never binding; lowering it below
    /// `(K + 1) / 2` drops real walks.
    pub max_delta_hops: Option<usize>,
    /// When set, gadgets with at least this many inputs take their powers
    /// through `power_large` instead of repeated multiplication.
    pub cascade_threshold: Option<usize>,
}

impl DynConfig {
    pub fn exact(max_degree: usize) -> Self {
        DynConfig {
            max_degree,
            precision: Precision::Exact,
            guard_bits: DEFAULT_GUARD_BITS,
            max_delta_hops: None,
            cascade_threshold: None,
        }
    }

    pub fn bits(max_degree: usize, bits: u64) -> Self {
        DynConfig { precision: Precision::Bits(bits), ..DynConfig::exact(max_degree) }
    }
}

/// `[[0, A], [I, 0]]`.
pub fn bipartite_embed(a: &PolyMatrix) -> PolyMatrix {
    let n = a.dim();
    let mut b = PolyMatrix::zero(2 * n);
    for r in 0..n {
        for c in 0..n {
            b.set(r, n + c, a.get(r, c).clone());
        }
        b.set(n + r, r, UniPoly::one());
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GadgetSign {
    Minus,
    Plus,
}

/// The correction gadget for one signed group of arc changes.
///
/// `arcs` holds `(input index, output index, signed change)` with indices
/// into `inputs` / `outputs`, which are indices of `B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaGadget {
    pub sign: GadgetSign,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub arcs: Vec<(usize, usize, Q)>,
    generation: u64,
}

impl DeltaGadget {
    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// The explicit gadget for the pair `(s, t)`: inputs, then outputs, then
    /// the two portals. The portals are always fresh indices.
    ///
    /// Arcs: input -> output carries `change * x`; output `v` -> input `u`
    /// carries `G[v][u]`; portal_s -> input `u` carries `G[s][u]`; output `v`
    /// -> portal_t carries `G[v][t]`.
    pub fn portal_matrix(&self, state: &DynState, s: usize, t: usize) -> PolyMatrix {
        let (a, b) = (self.inputs.len(), self.outputs.len());
        let (ps, pt) = (a + b, a + b + 1);
        let g = &state.g;
        let mut m = PolyMatrix::zero(a + b + 2);
        for (i, o, w) in &self.arcs {
            m.set(*i, a + o, UniPoly::monomial(w.clone(), 1));
        }
        for (o, &v) in self.outputs.iter().enumerate() {
            for (i, &u) in self.inputs.iter().enumerate() {
                m.set(a + o, i, g.get(v, u).clone());
            }
            m.set(a + o, pt, g.get(v, t).clone());
        }
        for (i, &u) in self.inputs.iter().enumerate() {
            m.set(ps, i, g.get(s, u).clone());
        }
        m
    }

    pub fn portal_indices(&self) -> (usize, usize) {
        let k = self.inputs.len() + self.outputs.len();
        (k, k + 1)
    }
}

type Rect = Vec<Vec<UniPoly>>;

fn rect_zero(rows: usize, cols: usize) -> Rect {
    vec![vec![UniPoly::zero(); cols]; rows]
}

fn rect_mul(a: &Rect, b: &Rect, cols: usize, max_degree: usize) -> Rect {
    let mut out = rect_zero(a.len(), cols);
    for (i, row) in a.iter().enumerate() {
        for (k, aik) in row.iter().enumerate() {
            if aik.is_zero() {
                continue;
            }
            for (j, bkj) in b[k].iter().enumerate() {
                out[i][j].add_mul_mod_deg(aik, bkj, max_degree);
            }
        }
    }
    out
}

fn rect_is_zero(a: &Rect) -> bool {
    a.iter().all(|r| r.iter().all(UniPoly::is_zero))
}

/// Maintained walk generating function of a dynamic transition matrix.
#[derive(Clone, Debug)]
pub struct DynState {
    config: DynConfig,
    n: usize,
    base: RatMatrix,
    graph: Option<DynGraph>,
    g: PolyMatrix,
    budget: PrecisionBudget,
    step_count: u64,
    generation: u64,
}

impl DynState {
    /// Starts from an arbitrary `n x n` matrix (no graph attached).
    pub fn from_matrix(a: RatMatrix, config: DynConfig) -> Result<Self> {
        let g = power_sum(&bipartite_embed(&a.to_poly()), config.max_degree);
        Self::assemble(a, None, g, config)
    }

    pub fn from_graph(graph: DynGraph, config: DynConfig) -> Result<Self> {
        let a = graph.lazy_transition();
        let g = power_sum(&bipartite_embed(&a.to_poly()), config.max_degree);
        Self::assemble(a, Some(graph), g, config)
    }

    /// Adopts an externally computed exact power sum for `graph`.
    pub fn from_graph_with_sum(graph: DynGraph, g: PolyMatrix, config: DynConfig) -> Result<Self> {
        if g.dim() != 2 * graph.n() {
            return contract("power sum has the wrong dimension");
        }
        let a = graph.lazy_transition();
        Self::assemble(a, Some(graph), g, config)
    }

    fn assemble(base: RatMatrix, graph: Option<DynGraph>, g: PolyMatrix, config: DynConfig) -> Result<Self> {
        let bits = match config.precision {
            Precision::Exact => 0,
            Precision::Bits(b) => {
                if b <= config.guard_bits + 1 {
                    return Err(Error::Config(format!("{b} bits leave nothing above the guard")));
                }
                b
            }
        };
        let mut state = DynState {
            n: base.dim(),
            budget: PrecisionBudget::new(bits, config.guard_bits),
            config,
            base,
            graph,
            g,
            step_count: 0,
            generation: 0,
        };
        state.truncate_to_mode();
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.config.max_degree
    }

    pub fn config(&self) -> &DynConfig {
        &self.config
    }

    pub fn precision(&self) -> Precision {
        self.config.precision
    }

    /// Current transition matrix `A`.
    pub fn base(&self) -> &RatMatrix {
        &self.base
    }

    pub fn graph(&self) -> Option<&DynGraph> {
        self.graph.as_ref()
    }

    /// The maintained series `G`.
    pub fn series(&self) -> &PolyMatrix {
        &self.g
    }

    pub fn embedding(&self) -> PolyMatrix {
        bipartite_embed(&self.base.to_poly())
    }

    pub fn budget(&self) -> &PrecisionBudget {
        &self.budget
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Certified bound on every coefficient's deviation; zero when exact.
    pub fn error_bound(&self) -> Q {
        match self.config.precision {
            Precision::Exact => Q::zero(),
            Precision::Bits(_) => self.budget.error_bound(),
        }
    }

    pub fn set_max_delta_hops(&mut self, hops: Option<usize>) {
        self.config.max_delta_hops = hops;
    }

    pub fn set_cascade_threshold(&mut self, threshold: Option<usize>) {
        self.config.cascade_threshold = threshold;
    }

    fn truncate_to_mode(&mut self) {
        if let Precision::Bits(b) = self.config.precision {
            self.g = self.g.map_coeffs(|c| truncate_q(c, b));
        }
    }

    /// Splits arc changes (in `B` coordinates) into the minus and plus gadgets.
    pub fn build_delta_gadgets(&self, deltas: &[EntryDelta]) -> Result<(DeltaGadget, DeltaGadget)> {
        let n = self.n;
        for d in deltas {
            if d.row >= n || d.col < n || d.col >= 2 * n {
                return contract(format!("change at ({}, {}) lies outside the top-right block", d.row, d.col));
            }
        }
        let pick = |sign: GadgetSign| {
            let chosen: Vec<&EntryDelta> = deltas
                .iter()
                .filter(|d| match sign {
                    GadgetSign::Minus => d.delta < Q::zero(),
                    GadgetSign::Plus => d.delta > Q::zero(),
                })
                .collect();
            let mut inputs: Vec<usize> = chosen.iter().map(|d| d.row).collect();
            let mut outputs: Vec<usize> = chosen.iter().map(|d| d.col).collect();
            inputs.sort_unstable();
            inputs.dedup();
            outputs.sort_unstable();
            outputs.dedup();
            let arcs = chosen
                .iter()
                .map(|d| {
                    let i = inputs.binary_search(&d.row).expect("collected above");
                    let o = outputs.binary_search(&d.col).expect("collected above");
                    (i, o, d.delta.clone())
                })
                .collect();
            DeltaGadget { sign, inputs, outputs, arcs, generation: self.generation }
        };
        Ok((pick(GadgetSign::Minus), pick(GadgetSign::Plus)))
    }

    /// `S = sum_{r>=1} P (QP)^{r-1}` with `P = x * changes` on inputs x outputs
    /// and `Q = G[outputs][inputs]`; entry `(u, v)` of `S` is the total weight
    /// of portal-to-portal gadget walks entering at `u` and leaving at `v`.
    fn gadget_kernel(&self, gadget: &DeltaGadget) -> Result<Rect> {
        let k = self.config.max_degree;
        let (a, b) = (gadget.inputs.len(), gadget.outputs.len());
        let mut p = rect_zero(a, b);
        for (i, o, w) in &gadget.arcs {
            p[*i][*o] = UniPoly::monomial(w.clone(), 1).truncated(k);
        }
        let mut qm = rect_zero(b, a);
        for (o, &v) in gadget.outputs.iter().enumerate() {
            for (i, &u) in gadget.inputs.iter().enumerate() {
                qm[o][i] = self.g.get(v, u).clone();
            }
        }
        let qp = rect_mul(&qm, &p, b, k);
        let hops = self.config.max_delta_hops.unwrap_or(k);
        let mut sum = rect_zero(a, b);
        if hops == 0 {
            return Ok(sum);
        }
        let cascade = self.config.cascade_threshold.is_some_and(|th| b >= th);
        let mut term = p.clone();
        for r in 1..=hops {
            if rect_is_zero(&term) {
                break;
            }
            for (srow, trow) in sum.iter_mut().zip(&term) {
                for (s, t) in srow.iter_mut().zip(trow) {
                    *s += t;
                }
            }
            if r == hops {
                break;
            }
            term = if cascade {
                let power = power_large(&PolyMatrix::from_rows(qp.clone())?, r)?.truncated(k);
                let rows: Rect = (0..b).map(|i| (0..b).map(|j| power.get(i, j).clone()).collect()).collect();
                rect_mul(&p, &rows, b, k)
            } else {
                rect_mul(&term, &qp, b, k)
            };
        }
        Ok(sum)
    }

    /// Applies one gadget built from the current `G`.
    pub fn apply_gadget(&mut self, gadget: &DeltaGadget) -> Result<()> {
        if gadget.generation != self.generation {
            return contract("gadget was built from an earlier state");
        }
        if gadget.is_empty() {
            return Ok(());
        }
        let k = self.config.max_degree;
        let dim = 2 * self.n;
        let kernel = self.gadget_kernel(gadget)?;
        let b = gadget.outputs.len();
        // left[s][o] = sum_u G[s][u] S[u][o]
        let g_in: Rect = (0..dim).map(|s| gadget.inputs.iter().map(|&u| self.g.get(s, u).clone()).collect()).collect();
        let left = rect_mul(&g_in, &kernel, b, k);
        let g_out: Rect =
            gadget.outputs.iter().map(|&v| (0..dim).map(|t| self.g.get(v, t).clone()).collect()).collect();
        for (s, lrow) in left.iter().enumerate() {
            for (o, l) in lrow.iter().enumerate() {
                if l.is_zero() {
                    continue;
                }
                for (t, gv) in g_out[o].iter().enumerate() {
                    if !gv.is_zero() {
                        self.g.entry_mut(s, t).add_mul_mod_deg(l, gv, k);
                    }
                }
            }
        }
        for (i, o, w) in &gadget.arcs {
            let (r, c) = (gadget.inputs[*i], gadget.outputs[*o] - self.n);
            *self.base.entry_mut(r, c) += w;
        }
        self.generation += 1;
        Ok(())
    }

    /// Applies net changes to the transition matrix as one batch.
    pub fn apply_entry_deltas(&mut self, deltas: &[EntryDelta]) -> Result<()> {
        let n = self.n;
        for d in deltas {
            if d.row >= n || d.col >= n {
                return Err(Error::OutOfRange(format!("entry ({}, {}) outside {n} x {n}", d.row, d.col)));
            }
        }
        let lifted: Vec<EntryDelta> = net_deltas(deltas.iter().cloned())
            .into_iter()
            .map(|d| EntryDelta { row: d.row, col: n + d.col, delta: d.delta })
            .collect();
        if lifted.is_empty() {
            self.step_count += 1;
            return Ok(());
        }
        if let Precision::Bits(_) = self.config.precision {
            if !self.budget.can_spend(1) {
                return Err(Error::StalePrecision(format!(
                    "{} bits left with guard {}; a refresh is required",
                    self.budget.remaining(),
                    self.budget.guard_bits
                )));
            }
        }
        let (minus, _) = self.build_delta_gadgets(&lifted)?;
        self.apply_gadget(&minus)?;
        let (_, plus) = self.build_delta_gadgets(&lifted)?;
        self.apply_gadget(&plus)?;
        if let Precision::Bits(_) = self.config.precision {
            self.truncate_to_mode();
            self.budget.spend(1)?;
        }
        self.step_count += 1;
        Ok(())
    }

    /// Validates a graph batch and applies its net transition changes.
    pub fn apply_batch(&mut self, batch: &EdgeBatch) -> Result<()> {
        self.apply_batches(std::slice::from_ref(batch))
    }

    /// Applies several consecutive batches as a single merged update.
    pub fn apply_batches(&mut self, batches: &[EdgeBatch]) -> Result<()> {
        let Some(graph) = self.graph.as_ref() else {
            return contract("state has no graph attached");
        };
        let mut next = graph.clone();
        let mut all = Vec::new();
        for batch in batches {
            let (g2, deltas) = next.validate_and_apply(batch)?;
            next = g2;
            all.extend(deltas);
        }
        self.apply_entry_deltas(&net_deltas(all))?;
        self.graph = Some(next);
        Ok(())
    }

    /// Coefficient of `x^{2j}` in `G[s][t]`, i.e. `A^j[s][t]`.
    pub fn read_power_entry(&self, s: usize, t: usize, j: usize) -> Result<Q> {
        if s >= self.n || t >= self.n {
            return Err(Error::OutOfRange(format!("vertex pair ({s}, {t}) with n = {}", self.n)));
        }
        if 2 * j > self.config.max_degree {
            return Err(Error::OutOfRange(format!(
                "power {j} needs degree {} but the series stops at {}",
                2 * j,
                self.config.max_degree
            )));
        }
        Ok(self.g.get(s, t).coeff(2 * j))
    }
}
