//! Discrete-time simulation of pipelined recomputation.
//!
//! Every step spawns a job holding a snapshot of the graph. The job's exact
//! from-scratch result becomes usable `L` ticks later; batches that arrived
//! meanwhile are queued and then replayed two per tick on the job's private
//! exact state. When the queue drains the job hands its state, truncated to
//! the served precision, to the served state, whose budget starts over.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::dyncore::{bipartite_embed, DynConfig, DynState, Precision};
use crate::error::{Error, Result};
use crate::graph::{DynGraph, EdgeBatch};
use crate::oracle::exact_power_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JobPhase {
    Computing,
    CatchingUp,
    Delivered,
}

#[derive(Clone, Debug)]
pub struct MuddleJob {
    pub spawn_time: i64,
    pub snapshot: DynGraph,
    pub latency: usize,
    pub backlog: VecDeque<EdgeBatch>,
    pub phase: JobPhase,
    /// Exact recompute for the snapshot; embargoed until `spawn_time + latency`.
    state: DynState,
}

impl MuddleJob {
    fn spawn(clock: i64, snapshot: DynGraph, latency: usize, max_degree: usize) -> Result<Self> {
        let t = snapshot.lazy_transition();
        let sum = exact_power_sum(&bipartite_embed(&t.to_poly()), max_degree);
        let state = DynState::from_graph_with_sum(snapshot.clone(), sum, DynConfig::exact(max_degree))?;
        let phase = if latency == 0 { JobPhase::CatchingUp } else { JobPhase::Computing };
        Ok(MuddleJob { spawn_time: clock, snapshot, latency, backlog: VecDeque::new(), phase, state })
    }

    /// One tick at time `clock` with the batch that arrived in it.
    /// Returns how many queued batches were replayed.
    fn advance(&mut self, clock: i64, batch: &EdgeBatch) -> Result<usize> {
        let age = (clock - self.spawn_time) as usize;
        self.backlog.push_back(batch.clone());
        if age <= self.latency {
            if age == self.latency {
                self.phase = JobPhase::CatchingUp;
            }
            return Ok(0);
        }
        let take = self.backlog.len().min(2);
        let replay: Vec<EdgeBatch> = self.backlog.drain(..take).collect();
        self.state.apply_batches(&replay)?;
        Ok(take)
    }

    fn ready(&self) -> bool {
        self.phase == JobPhase::CatchingUp && self.backlog.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuddleConfig {
    pub latency: usize,
    pub max_degree: usize,
    pub precision: Precision,
    pub guard_bits: u64,
}

impl MuddleConfig {
    pub fn new(latency: usize, max_degree: usize, precision: Precision) -> Self {
        MuddleConfig { latency, max_degree, precision, guard_bits: crate::dyncore::DEFAULT_GUARD_BITS }
    }

    fn served_config(&self) -> DynConfig {
        DynConfig { precision: self.precision, guard_bits: self.guard_bits, ..DynConfig::exact(self.max_degree) }
    }
}

/// Default latency `ceil(log2 n)`.
pub fn default_latency(n: usize) -> usize {
    n.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Per-step counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub clock: i64,
    pub active_jobs: usize,
    pub computing: usize,
    pub catching_up: usize,
    /// Queue lengths of the active jobs, oldest first.
    pub backlog_depths: Vec<usize>,
    pub budget_remaining: u64,
    pub served_budget_age: u64,
    pub delivered: bool,
    /// Backlog length of the delivering job at hand-off.
    pub delivered_backlog: Option<usize>,
    pub batches_caught_up: usize,
}

impl StepReport {
    pub fn trace_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.clock, self.active_jobs, self.served_budget_age, u8::from(self.delivered))
    }
}

#[derive(Clone, Debug)]
pub struct Timeline {
    clock: i64,
    config: MuddleConfig,
    graph: DynGraph,
    jobs: VecDeque<MuddleJob>,
    served: DynState,
    history: Vec<StepReport>,
}

impl Timeline {
    /// Starts with a full pipeline: `2L` quiet steps are simulated before
    /// clock zero.
    pub fn new(graph: DynGraph, config: MuddleConfig) -> Result<Self> {
        let l = config.latency as u64;
        if let Precision::Bits(b) = config.precision {
            let need = l + l.div_ceil(2) + 1 + config.guard_bits;
            if need >= b {
                return Err(Error::Config(format!("latency {l} needs more than {need} bits of precision, got {b}")));
            }
        }
        let served = DynState::from_graph(graph.clone(), config.served_config())?;
        let warmup = 2 * config.latency as i64;
        let mut tl = Timeline { clock: -warmup, config, graph, jobs: VecDeque::new(), served, history: Vec::new() };
        for _ in 0..warmup {
            tl.step(&EdgeBatch::empty())?;
        }
        tl.history.clear();
        Ok(tl)
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    pub fn config(&self) -> &MuddleConfig {
        &self.config
    }

    pub fn graph(&self) -> &DynGraph {
        &self.graph
    }

    pub fn served(&self) -> &DynState {
        &self.served
    }

    pub fn jobs(&self) -> impl Iterator<Item = &MuddleJob> {
        self.jobs.iter()
    }

    pub fn history(&self) -> &[StepReport] {
        &self.history
    }

    /// Processes the batch arriving at the current clock.
    pub fn step(&mut self, batch: &EdgeBatch) -> Result<StepReport> {
        let (next_graph, _) = self.graph.validate_and_apply(batch)?;
        self.served.apply_batch(batch)?;
        self.graph = next_graph;

        let mut caught_up = 0;
        for job in self.jobs.iter_mut() {
            caught_up += job.advance(self.clock, batch)?;
        }
        let job = MuddleJob::spawn(self.clock, self.graph.clone(), self.config.latency, self.config.max_degree)?;
        self.jobs.push_back(job);

        let mut delivered = None;
        while self.jobs.front().is_some_and(MuddleJob::ready) {
            let mut job = self.jobs.pop_front().expect("checked non-empty");
            job.phase = JobPhase::Delivered;
            delivered = Some(job);
        }
        if self.jobs.iter().any(MuddleJob::ready) {
            return Err(Error::Internal("a younger job finished before an older one".into()));
        }
        let delivered_backlog = delivered.as_ref().map(|j| j.backlog.len());
        if let Some(job) = delivered {
            if job.state.graph() != Some(&self.graph) {
                return Err(Error::Internal("delivered job is behind the current graph".into()));
            }
            self.served = DynState::from_graph_with_sum(
                self.graph.clone(),
                job.state.series().clone(),
                self.config.served_config(),
            )?;
        }

        let report = StepReport {
            clock: self.clock,
            active_jobs: self.jobs.len(),
            computing: self.jobs.iter().filter(|j| j.phase == JobPhase::Computing).count(),
            catching_up: self.jobs.iter().filter(|j| j.phase == JobPhase::CatchingUp).count(),
            backlog_depths: self.jobs.iter().map(|j| j.backlog.len()).collect(),
            budget_remaining: self.served.budget().remaining(),
            served_budget_age: self.served.budget().bits_spent,
            delivered: delivered_backlog.is_some(),
            delivered_backlog,
            batches_caught_up: caught_up,
        };
        self.clock += 1;
        self.history.push(report.clone());
        Ok(report)
    }

    /// Latest counters, or the empty report before the first step.
    pub fn accounting(&self) -> StepReport {
        self.history.last().cloned().unwrap_or_else(|| StepReport {
            clock: self.clock,
            active_jobs: self.jobs.len(),
            computing: self.jobs.iter().filter(|j| j.phase == JobPhase::Computing).count(),
            catching_up: self.jobs.iter().filter(|j| j.phase == JobPhase::CatchingUp).count(),
            backlog_depths: self.jobs.iter().map(|j| j.backlog.len()).collect(),
            budget_remaining: self.served.budget().remaining(),
            served_budget_age: self.served.budget().bits_spent,
            delivered: false,
            delivered_backlog: None,
            batches_caught_up: 0,
        })
    }

    /// Largest served budget age seen so far.
    pub fn max_budget_age(&self) -> u64 {
        self.history.iter().map(|r| r.served_budget_age).max().unwrap_or(0)
    }

    pub fn trace(&self) -> String {
        let mut out = String::new();
        for r in &self.history {
            let _ = writeln!(out, "{}", r.trace_line());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeOp;
    use crate::numerics::truncate_q;

    fn oracle_series(g: &DynGraph, k: usize) -> crate::linalg::PolyMatrix {
        exact_power_sum(&bipartite_embed(&g.lazy_transition().to_poly()), k)
    }

    #[test]
    fn latency_defaults() {
        assert_eq!(default_latency(1), 0);
        assert_eq!(default_latency(2), 1);
        assert_eq!(default_latency(8), 3);
        assert_eq!(default_latency(9), 4);
    }

    #[test]
    fn zero_latency_serves_fresh_state() {
        let g = DynGraph::new(4, 2).unwrap();
        let mut tl = Timeline::new(g, MuddleConfig::new(0, 4, Precision::Exact)).unwrap();
        for batch in [vec![EdgeOp::insert(0, 1)], vec![EdgeOp::insert(1, 2), EdgeOp::insert(2, 3)], vec![]] {
            let r = tl.step(&EdgeBatch::new(batch)).unwrap();
            assert!(r.delivered);
            assert_eq!(r.active_jobs, 0);
            assert_eq!(tl.served().series(), &oracle_series(tl.graph(), 4));
        }
    }

    #[test]
    fn quiet_run_matches_oracle() {
        let l = 3;
        let g = DynGraph::new(5, 2).unwrap();
        let mut tl = Timeline::new(g.clone(), MuddleConfig::new(l, 4, Precision::Bits(32))).unwrap();
        for _ in 0..3 * l {
            let r = tl.step(&EdgeBatch::empty()).unwrap();
            assert_eq!(tl.served().series(), &oracle_series(&g, 4));
            assert_eq!(r.active_jobs, 2 * l);
            assert_eq!(r.computing, l);
            assert_eq!(r.delivered_backlog, Some(0));
        }
    }

    #[test]
    fn pipeline_delivers_truncated_truth() {
        let l = 2;
        let bits = 40;
        let g = DynGraph::new(5, 2).unwrap();
        let mut tl = Timeline::new(g, MuddleConfig::new(l, 4, Precision::Bits(bits))).unwrap();
        let script = [
            vec![EdgeOp::insert(0, 1)],
            vec![EdgeOp::insert(1, 2)],
            vec![EdgeOp::insert(2, 3), EdgeOp::insert(3, 4)],
            vec![EdgeOp::delete(0, 1)],
            vec![],
            vec![EdgeOp::insert(0, 4)],
            vec![EdgeOp::delete(2, 3), EdgeOp::insert(0, 2)],
        ];
        for ops in script {
            let r = tl.step(&EdgeBatch::new(ops)).unwrap();
            assert!(r.delivered);
            let expect = oracle_series(tl.graph(), 4).map_coeffs(|c| truncate_q(c, bits));
            assert_eq!(tl.served().series(), &expect);
        }
        assert!(tl.trace().lines().all(|line| line.split('\t').count() == 4));
    }

    #[test]
    fn rejects_latency_beyond_budget() {
        let g = DynGraph::new(3, 2).unwrap();
        assert!(matches!(Timeline::new(g, MuddleConfig::new(8, 4, Precision::Bits(16))), Err(Error::Config(_))));
    }
}
