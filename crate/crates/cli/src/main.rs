//! `eqsat`: simplify terms, check equivalences and run the rebuild
//! benchmarks from the command line.
//!
//! Exit codes: 0 success (or `equal`), 1 `unknown`, 2 bad input, 3 analysis
//! contradiction.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use eqsat::bench::{default_corpus, run_bench, speedup_report, write_csv};
use eqsat::domains::{lambda, math};
use eqsat::language::{LanguageDef, Term};
use eqsat::{
    check_equiv_batch, parse_rules, Analysis, AstDepth, AstSize, CostFunction, EGraph, Extractor, IterationReport,
    Rewrite, Runner, RunnerConfig, SchedulerKind, StopReason,
};
use serde::Serialize;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "eqsat", version, about = "Equality saturation over e-graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Saturate a term and print its cheapest equivalent.
    Simplify {
        #[command(flatten)]
        opts: Options,
        expr: String,
    },
    /// Check whether two terms are equal under the rules.
    CheckEquiv {
        #[command(flatten)]
        opts: Options,
        /// Read pairs from a file, two terms per line.
        #[arg(long, conflicts_with_all = ["lhs", "rhs"])]
        pairs: Option<PathBuf>,
        /// Check all pairs in one shared e-graph.
        #[arg(long, requires = "pairs")]
        batched: bool,
        #[arg(required_unless_present = "pairs")]
        lhs: Option<String>,
        #[arg(required_unless_present = "pairs")]
        rhs: Option<String>,
    },
    /// Compare immediate and deferred rebuilding on the benchmark corpus.
    Bench {
        /// Repetitions per workload; times are medians.
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the speedup report as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone)]
struct Options {
    /// `math`, `lambda`, or a rules file.
    #[arg(long, default_value = "math")]
    rules: String,
    /// Language of a rules file.
    #[arg(long, value_enum, default_value_t = Lang::Math)]
    lang: Lang,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    nodes: usize,
    #[arg(long, default_value_t = 5_000)]
    time_ms: u64,
    #[arg(long, value_enum, default_value_t = Sched::Backoff)]
    scheduler: Sched,
    #[arg(long, value_enum, default_value_t = Cost::AstSize)]
    cost: Cost,
    /// Print a JSON report.
    #[arg(long)]
    json: bool,
    /// Let `x / x -> 1` fire without proving `x` non-zero.
    #[arg(long)]
    unsafe_math: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lang {
    Math,
    Lambda,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sched {
    Every,
    Backoff,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cost {
    AstSize,
    AstDepth,
}

/// Failures mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Contradiction(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl Options {
    fn config(&self) -> RunnerConfig {
        RunnerConfig {
            iter_limit: self.iters,
            node_limit: self.nodes,
            time_limit: Duration::from_millis(self.time_ms),
            scheduler: match self.scheduler {
                Sched::Every => SchedulerKind::EveryRule,
                Sched::Backoff => SchedulerKind::default(),
            },
            ..RunnerConfig::default()
        }
    }

    fn lang(&self) -> Lang {
        match self.rules.as_str() {
            "math" => Lang::Math,
            "lambda" => Lang::Lambda,
            _ => self.lang,
        }
    }
}

fn load_rules<N: Analysis>(
    opts: &Options,
    lang: &LanguageDef,
    builtin: impl FnOnce() -> Vec<Rewrite<N>>,
) -> Result<Vec<Rewrite<N>>> {
    if opts.rules == "math" || opts.rules == "lambda" {
        return Ok(builtin());
    }
    let path = Path::new(&opts.rules);
    let text = fs::read_to_string(path).with_context(|| format!("reading rules file {}", path.display()))?;
    parse_rules(&text, lang).with_context(|| format!("in rules file {}", path.display()))
}

fn parse(lang: &LanguageDef, text: &str) -> Result<Term> {
    lang.parse_term(text).with_context(|| format!("cannot parse `{text}`"))
}

#[derive(Serialize)]
struct Best {
    term: String,
    cost: usize,
}

#[derive(Serialize)]
struct SimplifyReport<'a> {
    schema_version: u32,
    stop_reason: &'a StopReason,
    iterations: &'a [IterationReport],
    best: Option<Best>,
}

fn best<N: Analysis>(egraph: &EGraph<N>, root: eqsat::Id, cost: Cost) -> Option<(usize, Term)> {
    fn with<N: Analysis, C: CostFunction<N, Cost = usize>>(
        g: &EGraph<N>,
        root: eqsat::Id,
        c: C,
    ) -> Option<(usize, Term)> {
        Extractor::new(g, c).try_find_best(root).ok()
    }
    match cost {
        Cost::AstSize => with(egraph, root, AstSize),
        Cost::AstDepth => with(egraph, root, AstDepth),
    }
}

fn simplify<N: Analysis>(
    opts: &Options,
    lang: &LanguageDef,
    rules: &[Rewrite<N>],
    egraph: EGraph<N>,
    expr: &str,
) -> Result<(), Failure> {
    let term = parse(lang, expr)?;
    let runner = Runner::new(opts.config(), egraph).with_term(&term).run(rules);
    let stop = runner.stop_reason.clone().expect("run finished");
    let contradiction = matches!(stop, StopReason::AnalysisContradiction(_));
    let found = if contradiction {
        None
    } else {
        best(&runner.egraph, runner.roots[0], opts.cost)
    };
    if opts.json {
        let report = SimplifyReport {
            schema_version: SCHEMA_VERSION,
            stop_reason: &stop,
            iterations: &runner.iterations,
            best: found.as_ref().map(|(cost, term)| Best {
                term: term.to_string(),
                cost: *cost,
            }),
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else if let Some((cost, term)) = &found {
        println!("{term}");
        println!("cost {cost}, {} iterations, {stop}", runner.iterations.len());
    }
    match stop {
        StopReason::AnalysisContradiction(msg) => Err(Failure::Contradiction(msg)),
        _ => Ok(()),
    }
}

/// Splits a line holding two terms after the first complete one.
fn split_pair(line: &str) -> Option<(&str, &str)> {
    let line = line.trim();
    let mut depth = 0usize;
    for (i, c) in line.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some((&line[..=i], line[i + 1..].trim()));
                }
            }
            c if c.is_whitespace() && depth == 0 => return Some((&line[..i], line[i..].trim())),
            _ => {}
        }
    }
    None
}

fn read_pairs(path: &Path, lang: &LanguageDef) -> Result<Vec<(Term, Term)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading pairs file {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (l, r) = split_pair(line)
            .filter(|(_, r)| !r.is_empty())
            .with_context(|| format!("{}:{}: expected two terms", path.display(), i + 1))?;
        let at = |e: anyhow::Error| e.context(format!("{}:{}", path.display(), i + 1));
        pairs.push((parse(lang, l).map_err(at)?, parse(lang, r).map_err(at)?));
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct Verdict {
    lhs: String,
    rhs: String,
    verdict: &'static str,
    iterations: usize,
    stop_reason: StopReason,
}

#[derive(Serialize)]
struct EquivReport {
    schema_version: u32,
    results: Vec<Verdict>,
}

fn check<N: Analysis + Clone>(
    opts: &Options,
    rules: &[Rewrite<N>],
    egraph: EGraph<N>,
    pairs: Vec<(Term, Term)>,
    batched: bool,
) -> Result<bool, Failure> {
    let results = check_equiv_batch(egraph, &pairs, rules, opts.config(), batched);
    let verdicts: Vec<Verdict> = pairs
        .iter()
        .zip(results)
        .map(|((l, r), res)| Verdict {
            lhs: l.to_string(),
            rhs: r.to_string(),
            verdict: if res.equal { "equal" } else { "unknown" },
            iterations: res.iterations,
            stop_reason: res.stop_reason,
        })
        .collect();
    if let Some(v) = verdicts
        .iter()
        .find(|v| matches!(v.stop_reason, StopReason::AnalysisContradiction(_)))
    {
        return Err(Failure::Contradiction(v.stop_reason.to_string()));
    }
    let all_equal = verdicts.iter().all(|v| v.verdict == "equal");
    if opts.json {
        let report = EquivReport {
            schema_version: SCHEMA_VERSION,
            results: verdicts,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else if verdicts.len() == 1 {
        let v = &verdicts[0];
        if v.verdict == "equal" {
            println!("equal ({} iterations)", v.iterations);
        } else {
            println!("unknown ({} iterations, {})", v.iterations, v.stop_reason);
        }
    } else {
        for v in &verdicts {
            println!("{}\t{}\t{}\t{} iterations", v.verdict, v.lhs, v.rhs, v.iterations);
        }
    }
    Ok(all_equal)
}

fn check_command(
    opts: &Options,
    pairs_file: Option<&Path>,
    batched: bool,
    lhs: Option<&str>,
    rhs: Option<&str>,
) -> Result<bool, Failure> {
    let pairs = |lang: &LanguageDef| -> Result<Vec<(Term, Term)>> {
        match pairs_file {
            Some(path) => read_pairs(path, lang),
            None => Ok(vec![(
                parse(lang, lhs.unwrap_or_default())?,
                parse(lang, rhs.unwrap_or_default())?,
            )]),
        }
    };
    match opts.lang() {
        Lang::Math => {
            let lang = math::language();
            let rules = load_rules(opts, &lang, || math::math_rules(opts.unsafe_math))?;
            let pairs = pairs(&lang)?;
            check(opts, &rules, EGraph::new(math::MathAnalysis), pairs, batched)
        }
        Lang::Lambda => {
            let lang = lambda::language();
            let rules = load_rules(opts, &lang, lambda::lambda_rules)?;
            let pairs = pairs(&lang)?;
            check(opts, &rules, EGraph::new(lambda::LambdaAnalysis), pairs, batched)
        }
    }
}

fn bench(repetitions: usize, out: Option<&Path>, json: bool) -> Result<()> {
    let records = run_bench(&default_corpus(), repetitions)?;
    match out {
        Some(path) => write_csv(&records, fs::File::create(path)?)?,
        None if !json => write_csv(&records, std::io::stdout())?,
        None => {}
    }
    let report = speedup_report(&records);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for row in &report.rows {
            eprintln!(
                "{:<24} {:>9.3} ms {:>9.3} ms {:>8.2}x  repairs {} / {}",
                row.workload,
                row.immediate_ms,
                row.deferred_ms,
                row.speedup,
                row.immediate_repairs,
                row.deferred_repairs
            );
        }
        eprintln!(
            "geometric mean speedup {:.2}x, spearman(repairs, congruence time) {:.3}",
            report.geometric_mean, report.correlation
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Simplify { opts, expr } => {
            match opts.lang() {
                Lang::Math => {
                    let lang = math::language();
                    let rules = load_rules(&opts, &lang, || math::math_rules(opts.unsafe_math))?;
                    simplify(&opts, &lang, &rules, EGraph::new(math::MathAnalysis), &expr)?;
                }
                Lang::Lambda => {
                    let lang = lambda::language();
                    let rules = load_rules(&opts, &lang, lambda::lambda_rules)?;
                    simplify(&opts, &lang, &rules, EGraph::new(lambda::LambdaAnalysis), &expr)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckEquiv {
            opts,
            pairs,
            batched,
            lhs,
            rhs,
        } => {
            let equal = check_command(&opts, pairs.as_deref(), batched, lhs.as_deref(), rhs.as_deref())?;
            Ok(if equal { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bench { repetitions, out, json } => {
            bench(repetitions, out.as_deref(), json)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Contradiction(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
