//! Arithmetic with constant folding.

use crate::language::{Arity, LanguageDef, LeafKinds, LeafValue, Op};
use crate::pattern::{Pattern, Subst, Var};
use crate::rewrite::{ConditionalApplier, Rewrite};
use crate::{join_constants, Analysis, EGraph, ENode, Id};

pub fn language() -> LanguageDef {
    LanguageDef::new(
        "math",
        [
            ("+", Arity::Fixed(2)),
            ("*", Arity::Fixed(2)),
            ("/", Arity::Fixed(2)),
            ("<<", Arity::Fixed(2)),
            ("-", Arity::Fixed(2)),
        ],
        LeafKinds {
            ints: true,
            bools: false,
            symbols: true,
        },
    )
    .expect("math language is well formed")
}

/// Folds operators over integer constants. Division folds only when exact,
/// and overflowing results are left unfolded.
#[derive(Debug, Clone, Copy, Default)]
pub struct MathAnalysis;

/// Evaluates one operator over integer arguments, `None` if undefined,
/// inexact or out of range.
pub fn fold(op: &str, a: i64, b: i64) -> Option<i64> {
    match op {
        "+" => a.checked_add(b),
        "-" => a.checked_sub(b),
        "*" => a.checked_mul(b),
        "/" if b != 0 && a.checked_rem(b)? == 0 => a.checked_div(b),
        "<<" if (0..63).contains(&b) => {
            let r = a.checked_shl(b as u32)?;
            (r >> b == a).then_some(r)
        }
        _ => None,
    }
}

impl Analysis for MathAnalysis {
    type Data = Option<LeafValue>;

    fn make(egraph: &EGraph<Self>, enode: &ENode) -> Self::Data {
        match enode.op {
            Op::Leaf(v @ LeafValue::Int(_)) => Some(v),
            Op::Leaf(_) => None,
            Op::Call(_) if enode.children.len() != 2 => None,
            Op::Call(op) => {
                let int = |i: usize| match egraph[enode.children[i]].data {
                    Some(LeafValue::Int(n)) => Some(n),
                    _ => None,
                };
                fold(op.as_str(), int(0)?, int(1)?).map(LeafValue::Int)
            }
        }
    }

    fn merge(&mut self, to: &mut Self::Data, from: Self::Data) -> Result<bool, String> {
        join_constants(to, from)
    }

    fn modify(egraph: &mut EGraph<Self>, id: Id) {
        if let Some(v) = egraph[id].data {
            let lit = egraph.add(ENode::leaf(Op::Leaf(v)));
            egraph.union(id, lit);
        }
    }

    fn constant(data: &Self::Data) -> Option<LeafValue> {
        *data
    }
}

/// Holds when `var`'s class folds to a non-zero constant.
pub fn is_nonzero_const(var: Var) -> impl Fn(&EGraph<MathAnalysis>, Id, &Subst) -> bool + Send + Sync {
    move |egraph, _, subst| matches!(egraph[subst[var]].data, Some(LeafValue::Int(n)) if n != 0)
}

fn pattern(s: &str) -> Pattern {
    Pattern::parse(s, &language()).unwrap_or_else(|e| panic!("bad pattern {s}: {e}"))
}

fn rw(name: &str, lhs: &str, rhs: &str) -> Rewrite<MathAnalysis> {
    Rewrite::new(name, pattern(lhs), pattern(rhs)).expect("well-formed rule")
}

fn div_self(unsafe_math: bool) -> Rewrite<MathAnalysis> {
    if unsafe_math {
        rw("div-self", "(/ ?x ?x)", "1")
    } else {
        let applier = ConditionalApplier {
            condition: is_nonzero_const(Var::new("?x")),
            applier: pattern("1"),
        };
        Rewrite::new("div-self", pattern("(/ ?x ?x)"), applier).expect("well-formed rule")
    }
}

/// The four rules of the introductory example: `x * 2 -> x << 1`,
/// `(x * y) / z -> x * (y / z)`, `x / x -> 1` and `x * 1 -> x`.
///
/// `x / x -> 1` only fires for a provably non-zero `x` unless
/// `unsafe_math` is set.
pub fn intro_rules(unsafe_math: bool) -> Vec<Rewrite<MathAnalysis>> {
    vec![
        rw("mul-two", "(* ?x 2)", "(<< ?x 1)"),
        rw("div-assoc", "(/ (* ?x ?y) ?z)", "(* ?x (/ ?y ?z))"),
        div_self(unsafe_math),
        rw("mul-one", "(* ?x 1)", "?x"),
    ]
}

/// [`intro_rules`] plus commutativity and associativity of `+` and `*` and a
/// few identities.
pub fn math_rules(unsafe_math: bool) -> Vec<Rewrite<MathAnalysis>> {
    let mut rules = intro_rules(unsafe_math);
    rules.extend([
        rw("add-comm", "(+ ?a ?b)", "(+ ?b ?a)"),
        rw("mul-comm", "(* ?a ?b)", "(* ?b ?a)"),
        rw("add-assoc", "(+ (+ ?a ?b) ?c)", "(+ ?a (+ ?b ?c))"),
        rw("add-assoc-rev", "(+ ?a (+ ?b ?c))", "(+ (+ ?a ?b) ?c)"),
        rw("mul-assoc", "(* (* ?a ?b) ?c)", "(* ?a (* ?b ?c))"),
        rw("mul-assoc-rev", "(* ?a (* ?b ?c))", "(* (* ?a ?b) ?c)"),
        rw("add-zero", "(+ ?a 0)", "?a"),
        rw("sub-cancel", "(- ?a ?a)", "0"),
        rw("sub-to-add", "(- ?a ?b)", "(+ ?a (* -1 ?b))"),
        rw("factor", "(+ (* ?a ?b) (* ?a ?c))", "(* ?a (+ ?b ?c))"),
        rw("div-one", "(/ ?a 1)", "?a"),
    ]);
    rules
}
