//! Rewrite rules: a searcher pattern plus an [`Applier`].
//!
//! Appliers come in three flavours: a plain [`Pattern`], a
//! [`ConditionalApplier`] that guards another applier with a [`Condition`],
//! and arbitrary user types implementing [`Applier`] directly.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::language::{LanguageDef, ParseError};
use crate::pattern::{Pattern, SearchMatches, Subst, Var};
use crate::{Analysis, AnalysisConflict, EGraph, Id};

pub trait Applier<N: Analysis>: Send + Sync {
    /// Instantiates the right-hand side for one match. The returned ids are
    /// merged with `eclass` by the caller.
    fn apply_one(&self, egraph: &mut EGraph<N>, eclass: Id, subst: &Subst) -> Result<Vec<Id>, String>;

    /// Read-only guard evaluated while searching. Matches failing it are not
    /// applied.
    fn check(&self, _egraph: &EGraph<N>, _eclass: Id, _subst: &Subst) -> bool {
        true
    }

    /// Called during the write phase for every match that failed
    /// [`check`](Applier::check).
    fn prepare(&self, _egraph: &mut EGraph<N>, _eclass: Id, _subst: &Subst) {}

    /// Variables this applier reads from the substitution.
    fn vars(&self) -> Vec<Var>;

    /// The right-hand side pattern, when the applier is purely syntactic.
    fn pattern(&self) -> Option<&Pattern> {
        None
    }
}

impl<N: Analysis> Applier<N> for Pattern {
    fn apply_one(&self, egraph: &mut EGraph<N>, _eclass: Id, subst: &Subst) -> Result<Vec<Id>, String> {
        self.apply_subst(egraph, subst)
            .map(|id| vec![id])
            .map_err(|e| e.to_string())
    }

    fn vars(&self) -> Vec<Var> {
        Pattern::vars(self)
    }

    fn pattern(&self) -> Option<&Pattern> {
        Some(self)
    }
}

/// A guard on a match. `check` must not change the graph.
pub trait Condition<N: Analysis>: Send + Sync {
    fn check(&self, egraph: &EGraph<N>, eclass: Id, subst: &Subst) -> bool;

    /// Write-phase hook run when `check` failed.
    fn prepare(&self, _egraph: &mut EGraph<N>, _eclass: Id, _subst: &Subst) {}

    fn vars(&self) -> Vec<Var> {
        Vec::new()
    }
}

impl<N, F> Condition<N> for F
where
    N: Analysis,
    F: Fn(&EGraph<N>, Id, &Subst) -> bool + Send + Sync,
{
    fn check(&self, egraph: &EGraph<N>, eclass: Id, subst: &Subst) -> bool {
        self(egraph, eclass, subst)
    }
}

/// Holds when both patterns, instantiated under the match, are already
/// present and in the same class.
///
/// The check itself never adds anything. When it fails, [`prepare`] adds
/// both instantiations so that later iterations can try to prove them
/// equal.
///
/// [`prepare`]: Condition::prepare
#[derive(Debug, Clone)]
pub struct ConditionEqual {
    pub left: Pattern,
    pub right: Pattern,
}

impl ConditionEqual {
    pub fn new(left: Pattern, right: Pattern) -> Self {
        ConditionEqual { left, right }
    }

    pub fn parse(left: &str, right: &str, lang: &LanguageDef) -> Result<Self, ParseError> {
        Ok(ConditionEqual::new(
            Pattern::parse(left, lang)?,
            Pattern::parse(right, lang)?,
        ))
    }
}

impl<N: Analysis> Condition<N> for ConditionEqual {
    fn check(&self, egraph: &EGraph<N>, _eclass: Id, subst: &Subst) -> bool {
        match (
            self.left.lookup_subst(egraph, subst),
            self.right.lookup_subst(egraph, subst),
        ) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    fn prepare(&self, egraph: &mut EGraph<N>, _eclass: Id, subst: &Subst) {
        // both patterns only use searcher variables, checked at construction
        let _ = self.left.apply_subst(egraph, subst);
        let _ = self.right.apply_subst(egraph, subst);
    }

    fn vars(&self) -> Vec<Var> {
        let mut vars = self.left.vars();
        for v in self.right.vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars
    }
}

/// Holds when the analysis reports a constant for the variable's class.
#[derive(Debug, Clone, Copy)]
pub struct IsConst(pub Var);

impl<N: Analysis> Condition<N> for IsConst {
    fn check(&self, egraph: &EGraph<N>, _eclass: Id, subst: &Subst) -> bool {
        N::constant(&egraph[subst[self.0]].data).is_some()
    }

    fn vars(&self) -> Vec<Var> {
        vec![self.0]
    }
}

/// Holds when the two variables are bound to different classes.
#[derive(Debug, Clone, Copy)]
pub struct NotSameVar(pub Var, pub Var);

impl<N: Analysis> Condition<N> for NotSameVar {
    fn check(&self, egraph: &EGraph<N>, _eclass: Id, subst: &Subst) -> bool {
        egraph.find(subst[self.0]) != egraph.find(subst[self.1])
    }

    fn vars(&self) -> Vec<Var> {
        vec![self.0, self.1]
    }
}

/// Applies `applier` only to matches satisfying `condition`.
#[derive(Debug, Clone)]
pub struct ConditionalApplier<C, A> {
    pub condition: C,
    pub applier: A,
}

impl<N, C, A> Applier<N> for ConditionalApplier<C, A>
where
    N: Analysis,
    C: Condition<N>,
    A: Applier<N>,
{
    fn apply_one(&self, egraph: &mut EGraph<N>, eclass: Id, subst: &Subst) -> Result<Vec<Id>, String> {
        self.applier.apply_one(egraph, eclass, subst)
    }

    fn check(&self, egraph: &EGraph<N>, eclass: Id, subst: &Subst) -> bool {
        self.condition.check(egraph, eclass, subst) && self.applier.check(egraph, eclass, subst)
    }

    fn prepare(&self, egraph: &mut EGraph<N>, eclass: Id, subst: &Subst) {
        self.condition.prepare(egraph, eclass, subst);
        self.applier.prepare(egraph, eclass, subst);
    }

    fn vars(&self) -> Vec<Var> {
        let mut vars = self.condition.vars();
        for v in self.applier.vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars
    }

    fn pattern(&self) -> Option<&Pattern> {
        self.applier.pattern()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rule `{rule}`: variable {var} is not bound by the left-hand side")]
    UnboundVar { rule: String, var: Var },
    #[error("rule `{rule}`: {source}")]
    Parse {
        rule: String,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("rule `{rule}` failed: {message}")]
    Applier { rule: String, message: String },
    #[error(transparent)]
    Conflict(#[from] AnalysisConflict),
}

/// Matches of one rule split by the applier's guard.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleMatches {
    pub accepted: Vec<SearchMatches>,
    pub rejected: Vec<SearchMatches>,
}

impl RuleMatches {
    /// Number of accepted substitutions.
    pub fn len(&self) -> usize {
        self.accepted.iter().map(|m| m.substs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }
}

pub struct Rewrite<N: Analysis> {
    name: String,
    searcher: Pattern,
    applier: Arc<dyn Applier<N>>,
}

impl<N: Analysis> Clone for Rewrite<N> {
    fn clone(&self) -> Self {
        Rewrite {
            name: self.name.clone(),
            searcher: self.searcher.clone(),
            applier: Arc::clone(&self.applier),
        }
    }
}

impl<N: Analysis> fmt::Debug for Rewrite<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.applier.pattern() {
            Some(rhs) => write!(f, "{}: {} => {}", self.name, self.searcher, rhs),
            None => write!(f, "{}: {} => <dynamic>", self.name, self.searcher),
        }
    }
}

impl<N: Analysis> Rewrite<N> {
    pub fn new(
        name: impl Into<String>,
        searcher: Pattern,
        applier: impl Applier<N> + 'static,
    ) -> Result<Self, RewriteError> {
        let name = name.into();
        let bound = searcher.vars();
        if let Some(var) = applier.vars().into_iter().find(|v| !bound.contains(v)) {
            return Err(RewriteError::UnboundVar { rule: name, var });
        }
        Ok(Rewrite {
            name,
            searcher,
            applier: Arc::new(applier),
        })
    }

    /// A purely syntactic rule `lhs => rhs`.
    pub fn parse(name: &str, lhs: &str, rhs: &str, lang: &LanguageDef) -> Result<Self, RewriteError> {
        let parse = |s| {
            Pattern::parse(s, lang).map_err(|source| RewriteError::Parse {
                rule: name.to_owned(),
                source,
            })
        };
        Rewrite::new(name, parse(lhs)?, parse(rhs)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn searcher(&self) -> &Pattern {
        &self.searcher
    }

    pub fn applier(&self) -> &dyn Applier<N> {
        &*self.applier
    }

    /// Matches that pass the applier's guard. The graph must be clean.
    pub fn search(&self, egraph: &EGraph<N>) -> Vec<SearchMatches> {
        self.search_split(egraph).accepted
    }

    pub fn search_split(&self, egraph: &EGraph<N>) -> RuleMatches {
        let mut out = RuleMatches::default();
        for m in self.searcher.search(egraph) {
            let (yes, no): (Vec<Subst>, Vec<Subst>) = m
                .substs
                .into_iter()
                .partition(|s| self.applier.check(egraph, m.eclass, s));
            if !yes.is_empty() {
                out.accepted.push(SearchMatches {
                    eclass: m.eclass,
                    substs: yes,
                });
            }
            if !no.is_empty() {
                out.rejected.push(SearchMatches {
                    eclass: m.eclass,
                    substs: no,
                });
            }
        }
        out
    }

    /// Applies `matches`, merging each instantiation with its matched class.
    /// Returns how many substitutions caused at least one new union. With
    /// `rebuild_each` the graph is rebuilt right after every union.
    pub fn apply(
        &self,
        egraph: &mut EGraph<N>,
        matches: &[SearchMatches],
        rebuild_each: bool,
    ) -> Result<usize, ApplyError> {
        let mut applied = 0;
        for m in matches {
            for subst in &m.substs {
                let ids = self
                    .applier
                    .apply_one(egraph, m.eclass, subst)
                    .map_err(|message| ApplyError::Applier {
                        rule: self.name.clone(),
                        message,
                    })?;
                let mut productive = false;
                for id in ids {
                    if egraph.find(id) != egraph.find(m.eclass) {
                        egraph.union(m.eclass, id);
                        productive = true;
                        if rebuild_each {
                            egraph.rebuild()?;
                        }
                    }
                }
                applied += productive as usize;
            }
        }
        Ok(applied)
    }

    /// Runs the applier's [`prepare`](Applier::prepare) hook on rejected
    /// matches.
    pub fn prepare_rejected(&self, egraph: &mut EGraph<N>, rejected: &[SearchMatches]) {
        for m in rejected {
            for subst in &m.substs {
                self.applier.prepare(egraph, m.eclass, subst);
            }
        }
    }
}
