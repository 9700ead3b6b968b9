//! Immediate versus deferred rebuilding on identical workloads.
//!
//! Every workload runs once per [`RebuildStrategy`]. Counters (repairs,
//! hashcons updates, rewrites) are deterministic; times are the median of
//! several repetitions. The two final e-graphs are checked to be isomorphic
//! and to yield the same extracted terms.

use std::io;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::domains::math::{self, MathAnalysis};
use crate::language::{ENode, Op};
use crate::{AstSize, EGraph, Extractor, Id, RebuildStrategy, Runner, RunnerConfig, SchedulerKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Workload {
    /// `width` towers `f1(f2(...fd(x_i)))`, then `x_1` merged with every
    /// other `x_i`.
    WidthDepth { width: usize, depth: usize },
    /// `n` parents `f_i(x)` of one class, then `x` merged with `n` fresh
    /// leaves `y_i`.
    HashconsFanout { n: usize },
    /// Saturation of math terms with the math rules.
    Simplify {
        name: String,
        terms: Vec<String>,
        iter_limit: usize,
    },
}

impl Workload {
    pub fn name(&self) -> String {
        match self {
            Workload::WidthDepth { width, depth } => format!("width-depth-w{width}-d{depth}"),
            Workload::HashconsFanout { n } => format!("hashcons-fanout-n{n}"),
            Workload::Simplify { name, .. } => name.clone(),
        }
    }
}

/// The default corpus: three width-depth sizes, three fan-out sizes and a
/// handful of algebraic simplifications.
pub fn default_corpus() -> Vec<Workload> {
    let mut corpus: Vec<Workload> = [10, 50, 100]
        .into_iter()
        .map(|width| Workload::WidthDepth { width, depth: 10 })
        .collect();
    corpus.extend([100, 500, 1000].into_iter().map(|n| Workload::HashconsFanout { n }));
    let simplify = |name: &str, terms: &[&str], iter_limit| Workload::Simplify {
        name: name.into(),
        terms: terms.iter().map(|t| t.to_string()).collect(),
        iter_limit,
    };
    corpus.extend([
        simplify("math-intro", &["(/ (* a 2) 2)", "(* (/ (* b 2) 2) 1)"], 8),
        simplify("math-sums", &["(+ (+ a b) (+ c d))", "(+ (+ (+ 1 a) 2) (+ b 3))"], 5),
        simplify("math-products", &["(* (* a b) (* c 2))", "(/ (* (* x 4) y) 4)"], 5),
        simplify(
            "math-mixed",
            &["(+ (* a b) (* a c))", "(- (+ a b) (+ b a))", "(* (+ x 0) (/ y 1))"],
            5,
        ),
        simplify("math-wide", &["(+ (+ (+ a b) (+ c d)) (+ (+ e f) (+ g h)))"], 4),
        simplify("math-shifts", &["(/ (* (* a 2) 2) 4)"], 6),
        simplify("math-chain", &["(* (* (* a b) c) (* d 2))"], 5),
        simplify("math-cancel", &["(- (+ (* a 2) b) (* 2 a))"], 5),
        simplify("math-consts", &["(+ (* 3 4) (- 10 (* 2 5)))"], 6),
        simplify("math-div", &["(/ (/ (* a b) b) 1)"], 6),
        simplify("math-poly", &["(+ (* x x) (+ (* 2 x) 1))"], 5),
        simplify("math-units", &["(+ (* a 0) (* 1 (+ b 0)))"], 6),
    ]);
    corpus
}

/// One cumulative point of a saturation workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationPoint {
    pub cumulative_rewrites: usize,
    pub cumulative_congruence_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub workload: String,
    pub strategy: RebuildStrategy,
    pub iters: usize,
    pub rewrites: usize,
    pub repairs: usize,
    pub congruence_ms: f64,
    pub total_ms: f64,
    pub enodes: usize,
    pub eclasses: usize,
    #[serde(skip)]
    pub hashcons_updates: usize,
    #[serde(skip)]
    pub per_iteration: Vec<IterationPoint>,
}

/// The final state of one workload run.
pub struct BenchRun {
    pub record: BenchRecord,
    pub egraph: EGraph<MathAnalysis>,
    pub roots: Vec<Id>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn synthetic(workload: &Workload, strategy: RebuildStrategy) -> BenchRun {
    let start = Instant::now();
    let mut g = EGraph::new(MathAnalysis);
    let mut merges: Vec<(Id, Id)> = Vec::new();
    let mut roots = Vec::new();
    match *workload {
        Workload::WidthDepth { width, depth } => {
            let mut leaves = Vec::new();
            for i in 0..width {
                let mut id = g.add(ENode::leaf(Op::symbol(&format!("x{i}"))));
                leaves.push(id);
                for level in (1..=depth).rev() {
                    id = g.add(ENode::new(Op::call(&format!("f{level}")), [id]));
                }
                roots.push(id);
            }
            merges.extend(leaves[1..].iter().map(|&x| (leaves[0], x)));
        }
        Workload::HashconsFanout { n } => {
            let x = g.add(ENode::leaf(Op::symbol("x")));
            for i in 0..n {
                roots.push(g.add(ENode::new(Op::call(&format!("f{i}")), [x])));
            }
            for i in 0..n {
                let y = g.add(ENode::leaf(Op::symbol(&format!("y{i}"))));
                merges.push((x, y));
            }
        }
        Workload::Simplify { .. } => unreachable!("not a synthetic workload"),
    }
    g.rebuild().expect("synthetic workloads have no constants");
    let before = g.stats();
    let t = Instant::now();
    for &(a, b) in &merges {
        g.union(a, b);
        if strategy == RebuildStrategy::Immediate {
            g.rebuild().expect("no conflicts");
        }
    }
    g.rebuild().expect("no conflicts");
    let congruence = ms(t.elapsed());
    let stats = g.stats();
    let record = BenchRecord {
        workload: workload.name(),
        strategy,
        iters: 1,
        rewrites: merges.len(),
        repairs: stats.repairs - before.repairs,
        congruence_ms: congruence,
        total_ms: ms(start.elapsed()),
        enodes: g.total_size(),
        eclasses: g.number_of_classes(),
        hashcons_updates: stats.hashcons_updates - before.hashcons_updates,
        per_iteration: vec![IterationPoint {
            cumulative_rewrites: merges.len(),
            cumulative_congruence_ms: congruence,
        }],
    };
    BenchRun {
        record,
        egraph: g,
        roots,
    }
}

fn saturate(workload: &Workload, strategy: RebuildStrategy) -> BenchRun {
    let Workload::Simplify { terms, iter_limit, .. } = workload else {
        unreachable!("not a saturation workload")
    };
    let start = Instant::now();
    let config = RunnerConfig {
        iter_limit: *iter_limit,
        node_limit: 200_000,
        time_limit: Duration::from_secs(600),
        scheduler: SchedulerKind::EveryRule,
        strategy,
        parallel_search: false,
    };
    let lang = math::language();
    let mut runner = Runner::new(config, EGraph::new(MathAnalysis));
    for t in terms {
        runner = runner.with_term(&lang.parse_term(t).expect("corpus terms parse"));
    }
    let runner = runner.run(&math::math_rules(false));
    let mut per_iteration = Vec::new();
    let (mut rewrites, mut congruence) = (0, 0.0);
    for it in &runner.iterations {
        rewrites += it.applied;
        congruence += (it.apply_time + it.rebuild_time) * 1e3;
        per_iteration.push(IterationPoint {
            cumulative_rewrites: rewrites,
            cumulative_congruence_ms: congruence,
        });
    }
    let record = BenchRecord {
        workload: workload.name(),
        strategy,
        iters: runner.iterations.len(),
        rewrites,
        repairs: runner.iterations.iter().map(|i| i.repairs).sum(),
        congruence_ms: congruence,
        total_ms: ms(start.elapsed()),
        enodes: runner.egraph.total_size(),
        eclasses: runner.egraph.number_of_classes(),
        hashcons_updates: runner.iterations.iter().map(|i| i.hashcons_updates).sum(),
        per_iteration,
    };
    BenchRun {
        record,
        egraph: runner.egraph,
        roots: runner.roots,
    }
}

/// Runs `workload` once under `strategy`.
pub fn run_workload(workload: &Workload, strategy: RebuildStrategy) -> BenchRun {
    match workload {
        Workload::Simplify { .. } => saturate(workload, strategy),
        _ => synthetic(workload, strategy),
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Runs `workload` `repetitions` times and reports median times. Panics if
/// the counters differ between repetitions.
pub fn run_repeated(workload: &Workload, strategy: RebuildStrategy, repetitions: usize) -> BenchRun {
    let mut first = run_workload(workload, strategy);
    let (mut congruence, mut total) = (vec![first.record.congruence_ms], vec![first.record.total_ms]);
    let mut series = vec![first.record.per_iteration.clone()];
    for _ in 1..repetitions.max(1) {
        let again = run_workload(workload, strategy).record;
        assert_eq!(
            (again.repairs, again.rewrites, again.enodes, again.eclasses),
            (
                first.record.repairs,
                first.record.rewrites,
                first.record.enodes,
                first.record.eclasses
            ),
            "non-deterministic counters in {}",
            workload.name()
        );
        congruence.push(again.congruence_ms);
        total.push(again.total_ms);
        series.push(again.per_iteration);
    }
    first.record.congruence_ms = median(congruence);
    first.record.total_ms = median(total);
    for (i, point) in first.record.per_iteration.iter_mut().enumerate() {
        point.cumulative_congruence_ms = median(series.iter().map(|s| s[i].cumulative_congruence_ms).collect());
    }
    first
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("workload {workload}: strategies disagree: {detail}")]
pub struct StrategyMismatch {
    pub workload: String,
    pub detail: String,
}

/// Checks that two rebuilt e-graphs are isomorphic: the same number of
/// classes and e-nodes, and a bijection between classes that maps every
/// e-node onto an e-node. Also checks that corresponding roots extract to
/// the same term.
pub fn compare_egraphs(
    left: &EGraph<MathAnalysis>,
    left_roots: &[Id],
    right: &EGraph<MathAnalysis>,
    right_roots: &[Id],
) -> Result<(), String> {
    if left.number_of_classes() != right.number_of_classes() {
        return Err(format!(
            "{} classes vs {}",
            left.number_of_classes(),
            right.number_of_classes()
        ));
    }
    if left.total_size() != right.total_size() {
        return Err(format!("{} e-nodes vs {}", left.total_size(), right.total_size()));
    }
    let left_ex = Extractor::new(left, AstSize);
    let right_ex = Extractor::new(right, AstSize);
    let mut map = rustc_hash::FxHashMap::default();
    let mut image = rustc_hash::FxHashSet::default();
    for class in left.classes() {
        let (_, term) = left_ex.find_best(class.id);
        let other = right
            .lookup_term(&term)
            .ok_or_else(|| format!("term {term} of class {} missing", class.id))?;
        if !image.insert(other) {
            return Err(format!("two classes map to {other}"));
        }
        map.insert(class.id, other);
    }
    for class in left.classes() {
        for node in &class.nodes {
            let mapped = node.map_children(|c| map[&left.find(c)]);
            if right.lookup(&mapped) != Some(map[&class.id]) {
                return Err(format!("e-node {node} of class {} has no counterpart", class.id));
            }
        }
    }
    for (&l, &r) in left_roots.iter().zip(right_roots) {
        let (lt, rt) = (left_ex.find_best(l).1.to_string(), right_ex.find_best(r).1.to_string());
        if lt != rt {
            return Err(format!("extracted {lt} vs {rt}"));
        }
        if map[&left.find(l)] != right.find(r) {
            return Err("roots fall into different classes".into());
        }
    }
    Ok(())
}

/// Runs every workload under both strategies, checking that the results
/// agree.
pub fn run_bench(workloads: &[Workload], repetitions: usize) -> Result<Vec<BenchRecord>, StrategyMismatch> {
    let mut records = Vec::new();
    for w in workloads {
        let imm = run_repeated(w, RebuildStrategy::Immediate, repetitions);
        let def = run_repeated(w, RebuildStrategy::Deferred, repetitions);
        compare_egraphs(&imm.egraph, &imm.roots, &def.egraph, &def.roots).map_err(|detail| StrategyMismatch {
            workload: w.name(),
            detail,
        })?;
        records.push(imm.record);
        records.push(def.record);
    }
    Ok(records)
}

pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupRow {
    pub workload: String,
    pub immediate_ms: f64,
    pub deferred_ms: f64,
    /// Immediate congruence time over deferred congruence time.
    pub speedup: f64,
    pub immediate_repairs: usize,
    pub deferred_repairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub workload: String,
    pub cumulative_rewrites: usize,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub rows: Vec<SpeedupRow>,
    pub geometric_mean: f64,
    /// Cumulative speedup after each iteration of each workload.
    pub series: Vec<SeriesPoint>,
    /// `(repairs, congruence_ms)` for every record.
    pub repairs_vs_time: Vec<(usize, f64)>,
    /// Spearman rank correlation of `repairs_vs_time`.
    pub correlation: f64,
}

/// Pairs immediate and deferred records by workload.
pub fn speedup_report(records: &[BenchRecord]) -> SpeedupReport {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for imm in records.iter().filter(|r| r.strategy == RebuildStrategy::Immediate) {
        let Some(def) = records
            .iter()
            .find(|r| r.strategy == RebuildStrategy::Deferred && r.workload == imm.workload)
        else {
            continue;
        };
        rows.push(SpeedupRow {
            workload: imm.workload.clone(),
            immediate_ms: imm.congruence_ms,
            deferred_ms: def.congruence_ms,
            speedup: imm.congruence_ms / def.congruence_ms.max(1e-9),
            immediate_repairs: imm.repairs,
            deferred_repairs: def.repairs,
        });
        for (a, b) in imm.per_iteration.iter().zip(&def.per_iteration) {
            series.push(SeriesPoint {
                workload: imm.workload.clone(),
                cumulative_rewrites: b.cumulative_rewrites,
                speedup: a.cumulative_congruence_ms / b.cumulative_congruence_ms.max(1e-9),
            });
        }
    }
    let geometric_mean = if rows.is_empty() {
        f64::NAN
    } else {
        (rows.iter().map(|r| r.speedup.ln()).sum::<f64>() / rows.len() as f64).exp()
    };
    let repairs_vs_time: Vec<(usize, f64)> = records.iter().map(|r| (r.repairs, r.congruence_ms)).collect();
    let xs: Vec<f64> = repairs_vs_time.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = repairs_vs_time.iter().map(|p| p.1).collect();
    SpeedupReport {
        rows,
        geometric_mean,
        series,
        correlation: spearman(&xs, &ys),
        repairs_vs_time,
    }
}

// 1-based ranks, ties get their average rank
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rank correlation coefficient.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_depth_counts() {
        let w = Workload::WidthDepth { width: 10, depth: 10 };
        let d = run_workload(&w, RebuildStrategy::Deferred).record;
        let i = run_workload(&w, RebuildStrategy::Immediate).record;
        assert_eq!(d.repairs, 11);
        assert_eq!(i.repairs, 9 * 11);
        assert_eq!((d.enodes, d.eclasses), (i.enodes, i.eclasses));
    }

    #[test]
    fn fanout_counts() {
        let w = Workload::HashconsFanout { n: 20 };
        assert_eq!(run_workload(&w, RebuildStrategy::Deferred).record.hashcons_updates, 20);
        assert_eq!(
            run_workload(&w, RebuildStrategy::Immediate).record.hashcons_updates,
            400
        );
    }

    #[test]
    fn strategies_agree_on_small_corpus() {
        let corpus = [
            Workload::WidthDepth { width: 5, depth: 3 },
            Workload::Simplify {
                name: "s".into(),
                terms: vec!["(+ (* a 2) (* a 3))".into()],
                iter_limit: 4,
            },
        ];
        let records = run_bench(&corpus, 1).unwrap();
        assert_eq!(records.len(), 4);
        let mut out = Vec::new();
        write_csv(&records, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("workload,strategy,iters,rewrites,repairs,congruence_ms,total_ms,enodes,eclasses\n"));
        assert!(text.contains("width-depth-w5-d3,immediate,1,4,"));
        let report = speedup_report(&records);
        assert_eq!(report.rows.len(), 2);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
