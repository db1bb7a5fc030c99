//! Line-oriented script driver and the embedded self-test.
//!
//! ```text
//! init n=<int> d=<int> alpha=<p/q> prec=exact|bits:<int> ell=<int> mode=direct|muddled [L=<int>]
//! batch <+|->(u,v) ...
//! query expansion | query entry <s> <t> <j> | query lambda tol=<p/q> | query conductance
//! trace on|off
//! ```
//!
//! Every key of `init` except `n` and `d` is optional. `#` starts a comment.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyncore::{DynConfig, DynState, Precision};
use crate::error::{Error, Result};
use crate::expander::{default_walk_length, expansion_query, TesterConfig};
use crate::graph::{DynGraph, EdgeBatch, EdgeOp};
use crate::linalg::{det_rational_crt, PolyMatrix, RatMatrix};
use crate::matpow::{power_large, small_powers_via_series};
use crate::muddle::{default_latency, MuddleConfig, Timeline};
use crate::numerics::{fmt_q, inv_pow2, parse_q, q, Q};
use crate::oracle::{conductance_bruteforce, det_bareiss, exact_power_sum, second_eigenvalue, walk_count_dp};
use crate::poly::UniPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Direct,
    Muddled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitParams {
    pub n: usize,
    pub d: usize,
    pub alpha: Q,
    pub precision: Precision,
    pub ell: usize,
    pub mode: RunMode,
    pub latency: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Init(InitParams),
    Batch(EdgeBatch),
    QueryExpansion,
    QueryEntry { s: usize, t: usize, j: usize },
    QueryLambda { tol: Q },
    QueryConductance,
    Trace(bool),
}

/// Commands with their 1-based line numbers, plus the parse error that
/// stopped reading, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<(usize, Command)>,
    pub error: Option<Error>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_init(line: usize, words: &[&str]) -> Result<InitParams> {
    let mut keys: BTreeMap<&str, &str> = BTreeMap::new();
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| parse_err(line, format!("expected key=value, got `{w}`")))?;
        if keys.insert(k, v).is_some() {
            return Err(parse_err(line, format!("duplicate key `{k}`")));
        }
    }
    let int = |k: &str| -> Result<Option<usize>> {
        keys.get(k)
            .map(|v| v.parse::<usize>().map_err(|_| parse_err(line, format!("`{k}` needs an integer, got `{v}`"))))
            .transpose()
    };
    for k in keys.keys() {
        if !["n", "d", "alpha", "prec", "ell", "mode", "L"].contains(k) {
            return Err(parse_err(line, format!("unknown init key `{k}`")));
        }
    }
    let n = int("n")?.ok_or_else(|| parse_err(line, "init needs n"))?;
    let d = int("d")?.ok_or_else(|| parse_err(line, "init needs d"))?;
    if n == 0 || d == 0 {
        return Err(parse_err(line, "n and d must be positive"));
    }
    let alpha = match keys.get("alpha") {
        Some(v) => parse_q(v).map_err(|e| parse_err(line, e.to_string()))?,
        None => q(1, 2),
    };
    let precision = match keys.get("prec").copied() {
        None | Some("exact") => Precision::Exact,
        Some(p) => match p.strip_prefix("bits:").map(str::parse::<u64>) {
            Some(Ok(b)) => Precision::Bits(b),
            _ => return Err(parse_err(line, format!("bad precision `{p}`"))),
        },
    };
    let ell = match int("ell")? {
        Some(e) => e,
        None => default_walk_length(&alpha, n).map_err(|e| parse_err(line, e.to_string()))?,
    };
    let mode = match keys.get("mode").copied() {
        None | Some("direct") => RunMode::Direct,
        Some("muddled") => RunMode::Muddled,
        Some(m) => return Err(parse_err(line, format!("bad mode `{m}`"))),
    };
    let latency = int("L")?.unwrap_or_else(|| default_latency(n));
    Ok(InitParams { n, d, alpha, precision, ell, mode, latency })
}

fn parse_vertex(line: usize, word: &str, n: usize) -> Result<usize> {
    let v: usize = word.parse().map_err(|_| parse_err(line, format!("expected a vertex, got `{word}`")))?;
    if v >= n {
        return Err(parse_err(line, format!("vertex {v} out of range for n = {n}")));
    }
    Ok(v)
}

fn parse_line(line: usize, text: &str, n: Option<usize>) -> Result<Option<Command>> {
    let text = text.split('#').next().unwrap_or("").trim();
    let words: Vec<&str> = text.split_whitespace().collect();
    let Some((&head, rest)) = words.split_first() else {
        return Ok(None);
    };
    if head != "init" && n.is_none() {
        return Err(parse_err(line, "the first command must be init"));
    }
    let cmd = match head {
        "init" => {
            if n.is_some() {
                return Err(parse_err(line, "init may appear only once"));
            }
            Command::Init(parse_init(line, rest)?)
        }
        "batch" => {
            let n = n.expect("checked above");
            let mut ops = Vec::with_capacity(rest.len());
            for w in rest {
                let op: EdgeOp = w.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
                parse_vertex(line, &op.u.to_string(), n)?;
                parse_vertex(line, &op.v.to_string(), n)?;
                ops.push(op);
            }
            Command::Batch(EdgeBatch::new(ops))
        }
        "query" => {
            let n = n.expect("checked above");
            match rest {
                ["expansion"] => Command::QueryExpansion,
                ["conductance"] => Command::QueryConductance,
                ["entry", s, t, j] => Command::QueryEntry {
                    s: parse_vertex(line, s, n)?,
                    t: parse_vertex(line, t, n)?,
                    j: j.parse().map_err(|_| parse_err(line, format!("bad power `{j}`")))?,
                },
                ["lambda", tol] => {
                    let tol = tol
                        .strip_prefix("tol=")
                        .ok_or_else(|| parse_err(line, "query lambda needs tol=<p/q>"))
                        .and_then(|t| parse_q(t).map_err(|e| parse_err(line, e.to_string())))?;
                    if !tol.is_positive() {
                        return Err(parse_err(line, "tolerance must be positive"));
                    }
                    Command::QueryLambda { tol }
                }
                _ => return Err(parse_err(line, format!("unknown query `{}`", rest.join(" ")))),
            }
        }
        "trace" => match rest {
            ["on"] => Command::Trace(true),
            ["off"] => Command::Trace(false),
            _ => return Err(parse_err(line, "trace takes on or off")),
        },
        other => return Err(parse_err(line, format!("unknown command `{other}`"))),
    };
    Ok(Some(cmd))
}

impl Script {
    pub fn parse(text: &str) -> Script {
        let mut commands = Vec::new();
        let mut n = None;
        for (i, raw) in text.lines().enumerate() {
            match parse_line(i + 1, raw, n) {
                Ok(None) => {}
                Ok(Some(cmd)) => {
                    if let Command::Init(params) = &cmd {
                        n = Some(params.n);
                    }
                    commands.push((i + 1, cmd));
                }
                Err(e) => return Script { commands, error: Some(e) },
            }
        }
        Script { commands, error: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub lines: Vec<String>,
    pub parse_failed: bool,
}

impl Transcript {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

enum Engine {
    Direct(DynState),
    Muddled(Timeline),
}

impl Engine {
    fn state(&self) -> &DynState {
        match self {
            Engine::Direct(s) => s,
            Engine::Muddled(t) => t.served(),
        }
    }
}

struct Session {
    tester: TesterConfig,
    engine: Engine,
    trace: bool,
}

impl Session {
    fn new(params: InitParams) -> Result<Self> {
        let tester = TesterConfig::with_walk_length(params.alpha.clone(), params.d, params.ell)?;
        let k = tester.required_degree();
        let graph = DynGraph::new(params.n, params.d)?;
        let engine = match params.mode {
            RunMode::Direct => {
                let cfg = DynConfig { precision: params.precision, ..DynConfig::exact(k) };
                Engine::Direct(DynState::from_graph(graph, cfg)?)
            }
            RunMode::Muddled => {
                Engine::Muddled(Timeline::new(graph, MuddleConfig::new(params.latency, k, params.precision))?)
            }
        };
        Ok(Session { tester, engine, trace: false })
    }

    fn run(&mut self, cmd: &Command) -> Result<Option<String>> {
        match cmd {
            Command::Init(_) => Ok(None),
            Command::Trace(on) => {
                self.trace = *on;
                Ok(None)
            }
            Command::Batch(batch) => match &mut self.engine {
                Engine::Direct(st) => {
                    st.apply_batch(batch)?;
                    let line = format!("{}\t0\t{}\t0", st.step_count() - 1, st.budget().bits_spent);
                    Ok(self.trace.then_some(line))
                }
                Engine::Muddled(tl) => {
                    let report = tl.step(batch)?;
                    Ok(self.trace.then(|| report.trace_line()))
                }
            },
            Command::QueryExpansion => Ok(Some(expansion_query(self.engine.state(), &self.tester)?.to_string())),
            Command::QueryEntry { s, t, j } => {
                let v = self.engine.state().read_power_entry(*s, *t, *j)?;
                Ok(Some(format!("entry: {}", fmt_q(&v))))
            }
            Command::QueryLambda { tol } => {
                let t = self.graph().lazy_transition();
                let b = second_eigenvalue(&t, tol)?;
                Ok(Some(format!("lambda: lower={} upper={}", fmt_q(&b.lower), fmt_q(&b.upper))))
            }
            Command::QueryConductance => {
                let r = conductance_bruteforce(self.graph())?;
                let set: Vec<String> = r.best_set.iter().map(ToString::to_string).collect();
                Ok(Some(format!("conductance: value={} set={}", fmt_q(&r.conductance), set.join(","))))
            }
        }
    }

    fn graph(&self) -> &DynGraph {
        match &self.engine {
            Engine::Direct(st) => st.graph().expect("sessions always track a graph"),
            Engine::Muddled(tl) => tl.graph(),
        }
    }
}

/// Runs a script; semantic failures become `error:` lines and execution
/// continues, a parse error ends the transcript.
pub fn run_script(input: &str) -> Transcript {
    let script = Script::parse(input);
    let mut out = Transcript::default();
    let mut session: Option<Session> = None;
    for (_, cmd) in &script.commands {
        if let Command::Init(params) = cmd {
            match Session::new(params.clone()) {
                Ok(s) => session = Some(s),
                Err(e) => {
                    out.lines.push(format!("error: {e}"));
                    session = None;
                }
            }
            continue;
        }
        let Some(s) = session.as_mut() else {
            out.lines.push("error: no active session".into());
            continue;
        };
        match s.run(cmd) {
            Ok(Some(line)) => out.lines.push(line),
            Ok(None) => {}
            Err(e) => out.lines.push(format!("error: {e}")),
        }
    }
    if let Some(e) = script.error {
        out.lines.push(format!("error: {e}"));
        out.parse_failed = true;
    }
    out
}

/// Deliberate defects the self-test must catch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mutation {
    #[default]
    None,
    /// Allows one changed arc fewer per correction walk than needed.
    ShortGadgetWalks,
    /// Keeps half the advertised bits while charging the full budget.
    CoarseTruncation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.failed == 0)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!("suite {}: {} passed, {} failed\n", s.name, s.passed, s.failed));
        }
        let (p, f) = self.suites.iter().fold((0, 0), |(p, f), s| (p + s.passed, f + s.failed));
        out.push_str(&format!("total: {p} passed, {f} failed\n"));
        out
    }
}

fn tally(name: &'static str, results: impl IntoIterator<Item = bool>) -> SuiteResult {
    let (mut passed, mut failed) = (0, 0);
    for ok in results {
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    SuiteResult { name, passed, failed }
}

pub(crate) fn random_batch(rng: &mut ChaCha8Rng, g: &DynGraph, max_ops: usize) -> EdgeBatch {
    let mut cur = g.clone();
    let mut ops = Vec::new();
    let want = rng.gen_range(1..=max_ops);
    for _ in 0..want * 8 {
        if ops.len() == want {
            break;
        }
        let u = rng.gen_range(0..g.n());
        let v = rng.gen_range(0..g.n());
        if u == v {
            continue;
        }
        let op = if cur.has_edge(u, v) { EdgeOp::delete(u, v) } else { EdgeOp::insert(u, v) };
        if let Ok((next, _)) = cur.validate_and_apply(&EdgeBatch::new(vec![op])) {
            cur = next;
            ops.push(op);
        }
    }
    EdgeBatch::new(ops)
}

fn oracle_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut results = Vec::new();
    for _ in 0..4 {
        let n = rng.gen_range(3..=6);
        let d = rng.gen_range(1..=3);
        let k = rng.gen_range(2..=6);
        let mut st = DynState::from_graph(DynGraph::new(n, d).unwrap(), DynConfig::exact(k)).unwrap();
        for _ in 0..6 {
            let batch = random_batch(rng, st.graph().unwrap(), 3);
            let ok = st.apply_batch(&batch).is_ok() && *st.series() == exact_power_sum(&st.embedding(), k);
            results.push(ok);
        }
    }
    tally("oracle", results)
}

fn hesse_suite(rng: &mut ChaCha8Rng, mutation: Mutation) -> SuiteResult {
    let mut results = Vec::new();
    for _ in 0..6 {
        let n = rng.gen_range(3..=5);
        let k = rng.gen_range(4..=6);
        let mut a = RatMatrix::zero(n);
        for r in 0..n {
            for c in 0..n {
                if rng.gen_bool(0.5) {
                    a.set(r, c, Q::from_integer(rng.gen_range(1..=3).into()));
                }
            }
        }
        let mut cfg = DynConfig::exact(k);
        if mutation == Mutation::ShortGadgetWalks {
            cfg.max_delta_hops = Some(k.div_ceil(2) - 1);
        }
        let Ok(mut st) = DynState::from_matrix(a.clone(), cfg) else {
            results.push(false);
            continue;
        };
        let before = st.series().clone();
        let removed: Vec<(usize, usize)> =
            (0..n * n).map(|i| (i / n, i % n)).filter(|&(r, c)| !a.get(r, c).is_zero() && rng.gen_bool(0.5)).collect();
        let deltas: Vec<_> = removed
            .iter()
            .map(|&(r, c)| crate::graph::EntryDelta { row: r, col: c, delta: -a.get(r, c).clone() })
            .collect();
        let mut ok = st.apply_entry_deltas(&deltas).is_ok();
        let stripped = st.base().clone();
        for s in 0..n {
            for t in 0..n {
                let walks = walk_count_dp(&stripped, s, t, k / 2);
                for j in 0..=k / 2 {
                    ok &= st.read_power_entry(s, t, j).ok() == Some(walks.coeff(j));
                }
            }
        }
        let back: Vec<_> = deltas
            .iter()
            .map(|d| crate::graph::EntryDelta { row: d.row, col: d.col, delta: -d.delta.clone() })
            .collect();
        ok &= st.apply_entry_deltas(&back).is_ok() && *st.series() == before;
        results.push(ok);
    }
    tally("hesse", results)
}

fn decay_suite(rng: &mut ChaCha8Rng, mutation: Mutation) -> SuiteResult {
    let bits = 48u64;
    let kept = if mutation == Mutation::CoarseTruncation { bits / 2 } else { bits };
    let (n, d, k) = (5, 3, 4);
    let g = DynGraph::new(n, d).unwrap();
    let mut exact = DynState::from_graph(g.clone(), DynConfig::exact(k)).unwrap();
    let mut approx = DynState::from_graph(g, DynConfig::bits(k, kept)).unwrap();
    let mut results = Vec::new();
    for t in 1..=12u64 {
        let batch = random_batch(rng, exact.graph().unwrap(), 2);
        let ok = exact.apply_batch(&batch).is_ok() && approx.apply_batch(&batch).is_ok();
        let bound = inv_pow2(bits - t - 2);
        let worst = max_deviation(exact.series(), approx.series());
        results.push(ok && worst <= bound);
    }
    tally("decay", results)
}

pub(crate) fn max_deviation(a: &PolyMatrix, b: &PolyMatrix) -> Q {
    a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).max_abs_coeff()).max().unwrap_or_else(Q::zero)
}

fn algebra_suite(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut results = Vec::new();
    for _ in 0..10 {
        let l = rng.gen_range(1..=5);
        let m = RatMatrix::from_rows(
            (0..l).map(|_| (0..l).map(|_| q(rng.gen_range(-9..=9), rng.gen_range(1..=9))).collect()).collect(),
        )
        .unwrap();
        results.push(det_rational_crt(&m, None).ok() == Some(det_bareiss(&m)));
    }
    for _ in 0..4 {
        let l = rng.gen_range(1..=3);
        let a = RatMatrix::from_rows(
            (0..l).map(|_| (0..l).map(|_| q(rng.gen_range(-4..=4), 12 * l as i64)).collect()).collect(),
        )
        .unwrap();
        let ok = small_powers_via_series(&a, l).map(|t| t.is_consistent()).unwrap_or(false);
        results.push(ok);
        let mut pm = PolyMatrix::zero(l);
        for i in 0..l {
            for j in 0..l {
                pm.set(i, j, UniPoly::from_coeffs(vec![a.get(i, j).clone(), q(rng.gen_range(-3..=3), 4)]));
            }
        }
        let k = rng.gen_range(1..=6);
        let mut naive = pm.clone();
        for _ in 1..k {
            naive = naive.mul(&pm);
        }
        results.push(power_large(&pm, k).ok() == Some(naive));
    }
    tally("algebra", results)
}

/// Runs the embedded suites, optionally with a planted defect.
pub fn run_selftest_with(mutation: Mutation) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    SelftestReport {
        suites: vec![
            oracle_suite(&mut rng),
            hesse_suite(&mut rng, mutation),
            decay_suite(&mut rng, mutation),
            algebra_suite(&mut rng),
        ],
    }
}

pub fn run_selftest() -> SelftestReport {
    run_selftest_with(Mutation::None)
}
