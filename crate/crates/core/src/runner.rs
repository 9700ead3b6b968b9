//! The equality saturation loop.
//!
//! Each iteration searches every rule against the rebuilt graph, then
//! applies all collected matches, then rebuilds once.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use log::info;
use serde::{Deserialize, Serialize, Serializer};

use crate::rewrite::{ApplyError, Rewrite, RuleMatches};
use crate::scheduler::{Scheduler, SchedulerKind};
use crate::{Analysis, EGraph, Id, Term};

/// When congruence is restored during the write phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RebuildStrategy {
    /// Rebuild right after every union.
    Immediate,
    /// Rebuild once per iteration.
    #[default]
    Deferred,
}

impl fmt::Display for RebuildStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RebuildStrategy::Immediate => "immediate",
            RebuildStrategy::Deferred => "deferred",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub iter_limit: usize,
    pub node_limit: usize,
    pub time_limit: Duration,
    pub scheduler: SchedulerKind,
    pub strategy: RebuildStrategy,
    /// Search rules on several threads. Results are identical to the
    /// sequential search.
    pub parallel_search: bool,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            iter_limit: 30,
            node_limit: 10_000,
            time_limit: Duration::from_secs(5),
            scheduler: SchedulerKind::default(),
            strategy: RebuildStrategy::Deferred,
            parallel_search: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    Saturated,
    IterLimit(usize),
    NodeLimit(usize),
    TimeLimit(Duration),
    HookStop(String),
    AnalysisContradiction(String),
    ApplierFailed(String),
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Saturated => write!(f, "saturated"),
            StopReason::IterLimit(n) => write!(f, "iteration limit ({n})"),
            StopReason::NodeLimit(n) => write!(f, "node limit ({n})"),
            StopReason::TimeLimit(t) => write!(f, "time limit ({} ms)", t.as_millis()),
            StopReason::HookStop(m) => write!(f, "stopped by hook: {m}"),
            StopReason::AnalysisContradiction(m) => write!(f, "analysis contradiction: {m}"),
            StopReason::ApplierFailed(m) => write!(f, "applier failed: {m}"),
        }
    }
}

impl StopReason {
    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            StopReason::Saturated => "saturated",
            StopReason::IterLimit(_) => "iter-limit",
            StopReason::NodeLimit(_) => "node-limit",
            StopReason::TimeLimit(_) => "time-limit",
            StopReason::HookStop(_) => "hook-stop",
            StopReason::AnalysisContradiction(_) => "analysis-contradiction",
            StopReason::ApplierFailed(_) => "applier-failed",
        }
    }
}

impl Serialize for StopReason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("kind", self.kind())?;
        map.serialize_entry("detail", &self.to_string())?;
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub name: String,
    pub matches: usize,
    pub applied: usize,
    pub banned: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub rules: Vec<RuleReport>,
    /// Productive applications summed over all rules.
    pub applied: usize,
    pub enodes: usize,
    pub eclasses: usize,
    pub search_time: f64,
    pub apply_time: f64,
    pub rebuild_time: f64,
    pub repairs: usize,
    pub rebuilds: usize,
    pub hashcons_updates: usize,
    pub stop_reason: Option<StopReason>,
}

pub type Hook<N> = Box<dyn FnMut(&mut Runner<N>) -> Result<(), String>>;

/// Drives equality saturation over an e-graph.
///
/// ```
/// use eqsat::{domains::math, EGraph, Runner, RunnerConfig, StopReason};
///
/// let term = math::language().parse_term("(+ 1 2)").unwrap();
/// let runner = Runner::new(RunnerConfig::default(), EGraph::new(math::MathAnalysis))
///     .with_term(&term)
///     .run(&math::math_rules(false));
/// assert_eq!(runner.stop_reason, Some(StopReason::Saturated));
/// ```
pub struct Runner<N: Analysis> {
    pub config: RunnerConfig,
    pub egraph: EGraph<N>,
    pub roots: Vec<Id>,
    pub iterations: Vec<IterationReport>,
    pub stop_reason: Option<StopReason>,
    hooks: Vec<Hook<N>>,
    scheduler: Box<dyn Scheduler>,
    start: Option<Instant>,
}

impl<N: Analysis> Runner<N> {
    pub fn new(config: RunnerConfig, egraph: EGraph<N>) -> Self {
        let scheduler = config.scheduler.build();
        Runner {
            config,
            egraph,
            roots: Vec::new(),
            iterations: Vec::new(),
            stop_reason: None,
            hooks: Vec::new(),
            scheduler,
            start: None,
        }
    }

    /// Adds `term` as a new root.
    pub fn with_term(mut self, term: &Term) -> Self {
        let id = self.egraph.add_term(term);
        self.roots.push(id);
        self
    }

    pub fn with_scheduler(mut self, scheduler: impl Scheduler + 'static) -> Self {
        self.scheduler = Box::new(scheduler);
        self
    }

    /// Registers a hook run before every iteration. Returning `Err` stops
    /// the run with [`StopReason::HookStop`].
    pub fn with_hook(mut self, hook: impl FnMut(&mut Runner<N>) -> Result<(), String> + 'static) -> Self {
        self.hooks.push(Box::new(hook));
        self
    }

    /// Time since [`run`](Runner::run) started.
    pub fn elapsed(&self) -> Duration {
        self.start.map_or(Duration::ZERO, |s| s.elapsed())
    }

    pub fn run(mut self, rules: &[Rewrite<N>]) -> Self {
        self.start = Some(Instant::now());
        if let Err(conflict) = self.egraph.rebuild() {
            self.stop_reason = Some(StopReason::AnalysisContradiction(conflict.to_string()));
            return self;
        }
        loop {
            if let Some(reason) = self.check_limits() {
                self.stop(reason);
                break;
            }
            if let Err(message) = self.run_hooks() {
                self.stop(StopReason::HookStop(message));
                break;
            }
            let report = self.run_one(rules);
            let done = report.stop_reason.clone();
            self.iterations.push(report);
            if let Some(reason) = done {
                self.stop_reason = Some(reason);
                break;
            }
        }
        info!(
            "stopped after {} iterations: {}",
            self.iterations.len(),
            self.stop_reason.as_ref().expect("stop reason set")
        );
        self
    }

    fn stop(&mut self, reason: StopReason) {
        if let Some(last) = self.iterations.last_mut() {
            last.stop_reason.get_or_insert(reason.clone());
        }
        self.stop_reason = Some(reason);
    }

    fn check_limits(&self) -> Option<StopReason> {
        if self.iterations.len() >= self.config.iter_limit {
            Some(StopReason::IterLimit(self.iterations.len()))
        } else if self.egraph.total_size() > self.config.node_limit {
            Some(StopReason::NodeLimit(self.egraph.total_size()))
        } else if self.elapsed() > self.config.time_limit {
            Some(StopReason::TimeLimit(self.elapsed()))
        } else {
            None
        }
    }

    fn run_hooks(&mut self) -> Result<(), String> {
        let mut hooks = std::mem::take(&mut self.hooks);
        let result = hooks.iter_mut().try_for_each(|hook| hook(self));
        self.hooks = hooks;
        result
    }

    fn search(&mut self, iteration: usize, rules: &[Rewrite<N>]) -> (Vec<RuleMatches>, Vec<bool>) {
        let allowed: Vec<bool> = (0..rules.len())
            .map(|i| self.scheduler.can_search(iteration, i))
            .collect();
        let egraph = &self.egraph;
        let search_rule = |(rule, ok): (&Rewrite<N>, &bool)| {
            if *ok {
                rule.search_split(egraph)
            } else {
                RuleMatches::default()
            }
        };
        let mut matches: Vec<RuleMatches> = if self.config.parallel_search && rules.len() > 1 {
            let workers = std::thread::available_parallelism()
                .map_or(1, |n| n.get())
                .min(rules.len());
            let chunk = rules.len().div_ceil(workers);
            std::thread::scope(|scope| {
                let handles: Vec<_> = rules
                    .chunks(chunk)
                    .zip(allowed.chunks(chunk))
                    .map(|(rs, oks)| scope.spawn(move || rs.iter().zip(oks).map(search_rule).collect::<Vec<_>>()))
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("search worker panicked"))
                    .collect()
            })
        } else {
            rules.iter().zip(&allowed).map(search_rule).collect()
        };
        let mut banned = Vec::with_capacity(rules.len());
        for (i, m) in matches.iter_mut().enumerate() {
            banned.push(!allowed[i] || !self.scheduler.filter(iteration, i, m));
        }
        (matches, banned)
    }

    fn run_one(&mut self, rules: &[Rewrite<N>]) -> IterationReport {
        let iteration = self.iterations.len();
        let stats_before = self.egraph.stats();
        let ids_before = self.egraph.number_of_ids();
        let mut stop_reason = None;

        let t = Instant::now();
        self.egraph.refresh_index();
        let (matches, banned) = self.search(iteration, rules);
        let search_time = t.elapsed().as_secs_f64();

        let mut reports: Vec<RuleReport> = rules
            .iter()
            .zip(&matches)
            .zip(&banned)
            .map(|((rule, m), &banned)| RuleReport {
                name: rule.name().to_owned(),
                matches: m.len(),
                applied: 0,
                banned,
            })
            .collect();

        if self.elapsed() > self.config.time_limit {
            stop_reason = Some(StopReason::TimeLimit(self.elapsed()));
        }

        let t = Instant::now();
        let rebuild_each = self.config.strategy == RebuildStrategy::Immediate;
        if stop_reason.is_none() {
            for (i, (rule, m)) in rules.iter().zip(&matches).enumerate() {
                match rule.apply(&mut self.egraph, &m.accepted, rebuild_each) {
                    Ok(n) => reports[i].applied = n,
                    Err(ApplyError::Applier { rule, message }) => {
                        stop_reason = Some(StopReason::ApplierFailed(format!("{rule}: {message}")));
                        break;
                    }
                    Err(ApplyError::Conflict(c)) => {
                        stop_reason = Some(StopReason::AnalysisContradiction(c.to_string()));
                        break;
                    }
                }
                rule.prepare_rejected(&mut self.egraph, &m.rejected);
                if self.egraph.total_size() > self.config.node_limit {
                    stop_reason = Some(StopReason::NodeLimit(self.egraph.total_size()));
                    break;
                }
            }
        }
        let apply_time = t.elapsed().as_secs_f64();

        let t = Instant::now();
        if let Err(conflict) = self.egraph.rebuild() {
            stop_reason.get_or_insert(StopReason::AnalysisContradiction(conflict.to_string()));
        }
        let rebuild_time = t.elapsed().as_secs_f64();

        let applied: usize = reports.iter().map(|r| r.applied).sum();
        let grew = self.egraph.number_of_ids() != ids_before;
        if stop_reason.is_none() && applied == 0 && !grew && self.scheduler.can_stop(iteration) {
            stop_reason = Some(StopReason::Saturated);
        }
        let stats = self.egraph.stats();
        IterationReport {
            iteration,
            rules: reports,
            applied,
            enodes: self.egraph.total_size(),
            eclasses: self.egraph.number_of_classes(),
            search_time,
            apply_time,
            rebuild_time,
            repairs: stats.repairs - stats_before.repairs,
            rebuilds: stats.rebuilds - stats_before.rebuilds,
            hashcons_updates: stats.hashcons_updates - stats_before.hashcons_updates,
            stop_reason,
        }
    }

    /// One JSON object per iteration, newline separated.
    pub fn report_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.iterations {
            out.push_str(&serde_json::to_string(r).expect("report serialises"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivResult {
    /// Both sides ended up in the same class. `false` means unknown, not
    /// disproved.
    pub equal: bool,
    /// Iterations run before the two sides were unified (or the run ended).
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Adds both terms, saturates, and stops as soon as they share a class.
///
/// ```
/// use eqsat::{check_equiv, domains::math, EGraph, RunnerConfig};
///
/// let lang = math::language();
/// let lhs = lang.parse_term("(/ (* a 2) 2)").unwrap();
/// let rhs = lang.parse_term("a").unwrap();
/// let rules = math::intro_rules(true);
/// let result = check_equiv(EGraph::new(math::MathAnalysis), &lhs, &rhs, &rules, RunnerConfig::default());
/// assert!(result.equal);
/// ```
pub fn check_equiv<N: Analysis>(
    egraph: EGraph<N>,
    lhs: &Term,
    rhs: &Term,
    rules: &[Rewrite<N>],
    config: RunnerConfig,
) -> EquivResult {
    let pair = [(lhs.clone(), rhs.clone())];
    run_batched(egraph, &pair, rules, config).remove(0)
}

/// Checks many pairs. With `batched`, all pairs share one e-graph and one
/// run, which stops once every pair is unified; otherwise each pair gets
/// its own run starting from a copy of `egraph`.
pub fn check_equiv_batch<N: Analysis + Clone>(
    egraph: EGraph<N>,
    pairs: &[(Term, Term)],
    rules: &[Rewrite<N>],
    config: RunnerConfig,
    batched: bool,
) -> Vec<EquivResult> {
    if !batched {
        return pairs
            .iter()
            .flat_map(|p| run_batched(egraph.clone(), std::slice::from_ref(p), rules, config.clone()))
            .collect();
    }
    run_batched(egraph, pairs, rules, config)
}

fn run_batched<N: Analysis>(
    egraph: EGraph<N>,
    pairs: &[(Term, Term)],
    rules: &[Rewrite<N>],
    config: RunnerConfig,
) -> Vec<EquivResult> {
    let mut runner = Runner::new(config, egraph);
    for (l, r) in pairs {
        runner = runner.with_term(l).with_term(r);
    }
    let unified: Rc<RefCell<Vec<Option<usize>>>> = Rc::new(RefCell::new(vec![None; pairs.len()]));
    let seen = Rc::clone(&unified);
    let runner = runner
        .with_hook(move |r| {
            let mut seen = seen.borrow_mut();
            for (i, slot) in seen.iter_mut().enumerate() {
                if slot.is_none() && r.egraph.find(r.roots[2 * i]) == r.egraph.find(r.roots[2 * i + 1]) {
                    *slot = Some(r.iterations.len());
                }
            }
            if seen.iter().all(Option::is_some) {
                Err("all pairs unified".into())
            } else {
                Ok(())
            }
        })
        .run(rules);
    let stop = runner.stop_reason.clone().expect("run finished");
    let unified = unified.borrow();
    (0..pairs.len())
        .map(|i| {
            let equal = runner.egraph.find(runner.roots[2 * i]) == runner.egraph.find(runner.roots[2 * i + 1]);
            EquivResult {
                equal,
                iterations: unified[i].unwrap_or(runner.iterations.len()),
                stop_reason: stop.clone(),
            }
        })
        .collect()
}
