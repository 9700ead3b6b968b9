//! A lambda calculus partial evaluator.
//!
//! Substitution is explicit: `(let x e body)` is pushed through `body` by
//! rewrites until it reaches variables and constants. The analysis tracks an
//! over-approximation of each class's free variables plus a folded
//! constant, and [`CaptureAvoid`] renames binders when a substitution would
//! capture.

use std::collections::BTreeSet;

use crate::language::{Arity, LanguageDef, LeafKinds, LeafValue, Op};
use crate::pattern::{Pattern, Subst, Var};
use crate::rewrite::{Applier, ConditionEqual, ConditionalApplier, IsConst, NotSameVar, Rewrite};
use crate::{join_constants, Analysis, EGraph, ENode, Id};

pub fn language() -> LanguageDef {
    LanguageDef::new(
        "lambda",
        [
            ("+", Arity::Fixed(2)),
            ("=", Arity::Fixed(2)),
            ("if", Arity::Fixed(3)),
            ("app", Arity::Fixed(2)),
            ("lam", Arity::Fixed(2)),
            ("let", Arity::Fixed(3)),
            ("fix", Arity::Fixed(2)),
            ("var", Arity::Fixed(1)),
            ("subst", Arity::Fixed(3)),
        ],
        LeafKinds {
            ints: true,
            bools: true,
            symbols: true,
        },
    )
    .expect("lambda language is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LambdaData {
    /// Classes of variable names that may occur free.
    pub free: BTreeSet<Id>,
    pub constant: Option<LeafValue>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LambdaAnalysis;

fn eval(egraph: &EGraph<LambdaAnalysis>, enode: &ENode) -> Option<LeafValue> {
    let c = |i: usize| egraph[enode.children[i]].data.constant;
    match enode.op {
        Op::Leaf(v @ (LeafValue::Int(_) | LeafValue::Bool(_))) => Some(v),
        Op::Leaf(LeafValue::Symbol(_)) => None,
        Op::Call(op) => match op.as_str() {
            "+" => match (c(0)?, c(1)?) {
                (LeafValue::Int(a), LeafValue::Int(b)) => a.checked_add(b).map(LeafValue::Int),
                _ => None,
            },
            "=" => Some(LeafValue::Bool(c(0)? == c(1)?)),
            _ => None,
        },
    }
}

impl Analysis for LambdaAnalysis {
    type Data = LambdaData;

    fn make(egraph: &EGraph<Self>, enode: &ENode) -> LambdaData {
        let free_of = |i: usize| egraph[enode.children[i]].data.free.iter().copied();
        let mut free = BTreeSet::new();
        let name = enode.op.to_string();
        match (name.as_str(), enode.op) {
            ("var", Op::Call(_)) => {
                free.insert(egraph.find(enode.children[0]));
            }
            ("let", Op::Call(_)) => {
                free.extend(free_of(2));
                free.remove(&egraph.find(enode.children[0]));
                free.extend(free_of(1));
            }
            ("lam" | "fix", Op::Call(_)) => {
                free.extend(free_of(1));
                free.remove(&egraph.find(enode.children[0]));
            }
            _ => {
                for i in 0..enode.children.len() {
                    free.extend(free_of(i));
                }
            }
        }
        LambdaData {
            free,
            constant: eval(egraph, enode),
        }
    }

    fn merge(&mut self, to: &mut LambdaData, from: LambdaData) -> Result<bool, String> {
        let mut constant = to.constant;
        let changed = join_constants(&mut constant, from.constant)?;
        to.constant = constant;
        let before = to.free.len();
        to.free.extend(from.free);
        Ok(changed || to.free.len() != before)
    }

    fn modify(egraph: &mut EGraph<Self>, id: Id) {
        if let Some(c) = egraph[id].data.constant {
            let lit = egraph.add(ENode::leaf(Op::Leaf(c)));
            egraph.union(id, lit);
        }
    }

    fn constant(data: &LambdaData) -> Option<LeafValue> {
        data.constant
    }
}

/// Pushes a `let` under a binder, renaming the binder to a fresh symbol
/// `_<class id>` when it occurs free in the substituted expression.
#[derive(Debug, Clone)]
pub struct CaptureAvoid {
    pub fresh: Var,
    pub v2: Var,
    pub e: Var,
    pub if_not_free: Pattern,
    pub if_free: Pattern,
}

impl Applier<LambdaAnalysis> for CaptureAvoid {
    fn apply_one(&self, egraph: &mut EGraph<LambdaAnalysis>, eclass: Id, subst: &Subst) -> Result<Vec<Id>, String> {
        let (v2, e) = (subst[self.v2], subst[self.e]);
        let v2 = egraph.find(v2);
        if egraph[e].data.free.contains(&v2) {
            let mut subst = subst.clone();
            let sym = egraph.add(ENode::leaf(Op::symbol(&format!("_{eclass}"))));
            subst.insert(self.fresh, sym);
            self.if_free.apply_one(egraph, eclass, &subst)
        } else {
            self.if_not_free.apply_one(egraph, eclass, subst)
        }
    }

    fn vars(&self) -> Vec<Var> {
        let mut vars = Vec::new();
        for v in self.if_not_free.vars().into_iter().chain(self.if_free.vars()) {
            if v != self.fresh && !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars
    }
}

fn pattern(s: &str) -> Pattern {
    Pattern::parse(s, &language()).unwrap_or_else(|e| panic!("bad pattern {s}: {e}"))
}

fn rw(name: &str, lhs: &str, rhs: &str) -> Rewrite<LambdaAnalysis> {
    Rewrite::new(name, pattern(lhs), pattern(rhs)).expect("well-formed rule")
}

fn guarded<A>(
    name: &str,
    lhs: &str,
    condition: impl crate::rewrite::Condition<LambdaAnalysis> + 'static,
    applier: A,
) -> Rewrite<LambdaAnalysis>
where
    A: Applier<LambdaAnalysis> + 'static,
{
    Rewrite::new(name, pattern(lhs), ConditionalApplier { condition, applier }).expect("well-formed rule")
}

/// The seventeen partial-evaluation rules.
pub fn lambda_rules() -> Vec<Rewrite<LambdaAnalysis>> {
    let v = Var::new;
    vec![
        rw("if-true", "(if true ?then ?else)", "?then"),
        rw("if-false", "(if false ?then ?else)", "?else"),
        guarded(
            "if-elim",
            "(if (= (var ?x) ?e) ?then ?else)",
            ConditionEqual::new(pattern("(let ?x ?e ?then)"), pattern("(let ?x ?e ?else)")),
            pattern("?else"),
        ),
        rw("add-comm", "(+ ?a ?b)", "(+ ?b ?a)"),
        rw("add-assoc", "(+ (+ ?a ?b) ?c)", "(+ ?a (+ ?b ?c))"),
        rw("eq-comm", "(= ?a ?b)", "(= ?b ?a)"),
        rw("fix", "(fix ?v ?e)", "(let ?v (fix ?v ?e) ?e)"),
        rw("beta", "(app (lam ?v ?body) ?e)", "(let ?v ?e ?body)"),
        rw(
            "let-app",
            "(let ?v ?e (app ?a ?b))",
            "(app (let ?v ?e ?a) (let ?v ?e ?b))",
        ),
        rw("let-add", "(let ?v ?e (+ ?a ?b))", "(+ (let ?v ?e ?a) (let ?v ?e ?b))"),
        rw("let-eq", "(let ?v ?e (= ?a ?b))", "(= (let ?v ?e ?a) (let ?v ?e ?b))"),
        rw(
            "let-if",
            "(let ?v ?e (if ?cond ?then ?else))",
            "(if (let ?v ?e ?cond) (let ?v ?e ?then) (let ?v ?e ?else))",
        ),
        guarded("let-const", "(let ?v ?e ?c)", IsConst(v("?c")), pattern("?c")),
        rw("let-var-same", "(let ?v1 ?e (var ?v1))", "?e"),
        guarded(
            "let-var-diff",
            "(let ?v1 ?e (var ?v2))",
            NotSameVar(v("?v1"), v("?v2")),
            pattern("(var ?v2)"),
        ),
        rw("let-lam-same", "(let ?v1 ?e (lam ?v1 ?body))", "(lam ?v1 ?body)"),
        guarded(
            "let-lam-diff",
            "(let ?v1 ?e (lam ?v2 ?body))",
            NotSameVar(v("?v1"), v("?v2")),
            CaptureAvoid {
                fresh: v("?fresh"),
                v2: v("?v2"),
                e: v("?e"),
                if_not_free: pattern("(lam ?v2 (let ?v1 ?e ?body))"),
                if_free: pattern("(lam ?fresh (let ?v1 ?e (let ?v2 (var ?fresh) ?body)))"),
            },
        ),
    ]
}
