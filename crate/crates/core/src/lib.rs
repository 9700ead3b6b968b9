//! Equality saturation over e-graphs with deferred rebuilding and e-class
//! analyses.
//!
//! ```
//! use eqsat::{domains::math, EGraph, Runner, RunnerConfig, AstSize, Extractor};
//!
//! let lang = math::language();
//! let term = lang.parse_term("(/ (* a 2) 2)").unwrap();
//! let runner = Runner::new(RunnerConfig::default(), EGraph::new(math::MathAnalysis))
//!     .with_term(&term)
//!     .run(&math::intro_rules(false));
//! let root = runner.roots[0];
//! let (cost, best) = Extractor::new(&runner.egraph, AstSize).find_best(root);
//! assert_eq!(best.to_string(), "a");
//! assert_eq!(cost, 1);
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

mod sexp;

pub mod analysis;
pub mod bench;
pub mod domains;
pub mod egraph;
pub mod extract;
pub mod language;
pub mod pattern;
pub mod rewrite;
pub mod rules_file;
pub mod runner;
pub mod scheduler;
pub mod unionfind;

pub use analysis::{join_constants, Analysis, AnalysisConflict, NoAnalysis};
pub use egraph::{EClass, EGraph, RebuildStats, Violation};
pub use extract::{
    extract_best, AstDepth, AstSize, CostAnalysis, CostFunction, ExtractError, Extractor, LocalCost, WeightedAstSize,
};
pub use language::{
    print_term, Arity, ENode, LanguageDef, LanguageError, LeafKinds, LeafValue, Op, ParseError, Symbol, Term,
};
pub use pattern::{Pattern, SearchMatches, Subst, Var};
pub use rewrite::{Applier, Condition, ConditionEqual, ConditionalApplier, Rewrite, RewriteError};
pub use rules_file::{parse_rules, RulesFileError};
pub use runner::{
    check_equiv, check_equiv_batch, EquivResult, IterationReport, RebuildStrategy, Runner, RunnerConfig, StopReason,
};
pub use scheduler::{BackoffScheduler, Scheduler, SchedulerKind, SimpleScheduler};
pub use sexp::SexpError;
pub use unionfind::UnionFind;

/// An e-class identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(u32);

impl From<usize> for Id {
    fn from(n: usize) -> Id {
        Id(u32::try_from(n).expect("too many e-class ids"))
    }
}

impl From<Id> for usize {
    fn from(id: Id) -> usize {
        id.0 as usize
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
