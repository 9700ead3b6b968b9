#![allow(dead_code)]

use std::collections::HashMap;

use eqsat::language::{ENode, LeafValue, Op, Term};
use eqsat::pattern::{Pattern, PatternNode};
use eqsat::{Analysis, EGraph, Id, Subst};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One step of a random e-graph construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// Add `op` over earlier terms (indices into the add sequence).
    Add(&'static str, Vec<usize>),
    Merge(usize, usize),
    Rebuild,
}

/// Signature used by the random sequences: two constants, one unary and
/// two binary function symbols.
pub const SIGNATURE: [(&str, usize); 5] = [("a", 0), ("b", 0), ("f", 1), ("g", 2), ("h", 2)];

pub fn node(op: &str, children: &[Id]) -> ENode {
    if children.is_empty() {
        ENode::leaf(Op::symbol(op))
    } else {
        ENode::new(Op::call(op), children.iter().copied())
    }
}

/// A random sequence of at most `max_adds` additions and `max_merges`
/// merges, with rebuilds sprinkled in.
pub fn random_steps(rng: &mut ChaCha8Rng, max_adds: usize, max_merges: usize) -> Vec<Step> {
    let adds = rng.gen_range(1..=max_adds);
    let merges = rng.gen_range(0..=max_merges);
    let mut kinds: Vec<bool> = std::iter::repeat_n(true, adds)
        .chain(std::iter::repeat_n(false, merges))
        .collect();
    kinds.shuffle(rng);
    let mut steps = Vec::new();
    let mut terms = 0;
    for is_add in kinds {
        if is_add || terms < 2 {
            let choices: Vec<_> = SIGNATURE.iter().filter(|(_, arity)| terms > 0 || *arity == 0).collect();
            let &&(op, arity) = choices.choose(rng).unwrap();
            let children = (0..arity).map(|_| rng.gen_range(0..terms)).collect();
            steps.push(Step::Add(op, children));
            terms += 1;
        } else {
            steps.push(Step::Merge(rng.gen_range(0..terms), rng.gen_range(0..terms)));
        }
        if rng.gen_bool(0.2) {
            steps.push(Step::Rebuild);
        }
    }
    steps.push(Step::Rebuild);
    steps
}

/// Replays `steps`, calling `after_rebuild` after every rebuild. Returns the
/// id of every added term.
pub fn replay<N: Analysis>(
    egraph: &mut EGraph<N>,
    steps: &[Step],
    mut after_rebuild: impl FnMut(&EGraph<N>),
) -> Vec<Id> {
    let mut ids = Vec::new();
    for step in steps {
        match step {
            Step::Add(op, children) => {
                let children: Vec<Id> = children.iter().map(|&c| ids[c]).collect();
                ids.push(egraph.add(node(op, &children)));
            }
            Step::Merge(a, b) => {
                egraph.union(ids[*a], ids[*b]);
            }
            Step::Rebuild => {
                egraph.rebuild().expect("no analysis conflicts");
                after_rebuild(egraph);
            }
        }
    }
    ids
}

/// Congruence closure by brute force: start from the asserted merges and
/// repeatedly merge any two terms with the same operator and pairwise
/// equivalent arguments until nothing changes.
pub struct NaiveClosure {
    terms: Vec<(&'static str, Vec<usize>)>,
    class: Vec<usize>,
}

impl NaiveClosure {
    pub fn new(steps: &[Step]) -> Self {
        let mut terms = Vec::new();
        let mut merges = Vec::new();
        for step in steps {
            match step {
                Step::Add(op, children) => terms.push((*op, children.clone())),
                Step::Merge(a, b) => merges.push((*a, *b)),
                Step::Rebuild => {}
            }
        }
        let mut closure = NaiveClosure {
            class: (0..terms.len()).collect(),
            terms,
        };
        for (a, b) in merges {
            closure.merge(a, b);
        }
        loop {
            let mut changed = false;
            for i in 0..closure.terms.len() {
                for j in i + 1..closure.terms.len() {
                    if !closure.same(i, j) && closure.congruent(i, j) {
                        closure.merge(i, j);
                        changed = true;
                    }
                }
            }
            if !changed {
                return closure;
            }
        }
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (from, to) = (self.class[a], self.class[b]);
        for c in &mut self.class {
            if *c == from {
                *c = to;
            }
        }
    }

    fn congruent(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.terms[i], &self.terms[j]);
        a.0 == b.0 && a.1.len() == b.1.len() && a.1.iter().zip(&b.1).all(|(&x, &y)| self.same(x, y))
    }

    pub fn same(&self, i: usize, j: usize) -> bool {
        self.class[i] == self.class[j]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn number_of_classes(&self) -> usize {
        let mut classes = self.class.clone();
        classes.sort_unstable();
        classes.dedup();
        classes.len()
    }

    /// Distinct (operator, argument classes) signatures: the e-nodes a
    /// congruence-closed e-graph must hold.
    pub fn number_of_nodes(&self) -> usize {
        let mut sigs: Vec<(&str, Vec<usize>)> = self
            .terms
            .iter()
            .map(|(op, ch)| (*op, ch.iter().map(|&c| self.class[c]).collect()))
            .collect();
        sigs.sort();
        sigs.dedup();
        sigs.len()
    }
}

/// Compares an e-graph built from `steps` against the naive closure.
pub fn partition_mismatch<N: Analysis>(egraph: &EGraph<N>, ids: &[Id], steps: &[Step]) -> Option<String> {
    let oracle = NaiveClosure::new(steps);
    for i in 0..oracle.len() {
        for j in i + 1..oracle.len() {
            let got = egraph.find(ids[i]) == egraph.find(ids[j]);
            if got != oracle.same(i, j) {
                return Some(format!("terms {i} and {j}: e-graph says {got}, closure says {}", !got));
            }
        }
    }
    if egraph.number_of_classes() != oracle.number_of_classes() {
        return Some(format!(
            "{} classes vs {} in the closure",
            egraph.number_of_classes(),
            oracle.number_of_classes()
        ));
    }
    if egraph.total_size() != oracle.number_of_nodes() {
        return Some(format!(
            "{} e-nodes vs {} in the closure",
            egraph.total_size(),
            oracle.number_of_nodes()
        ));
    }
    None
}

pub type Env = HashMap<&'static str, BigRational>;

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact rational semantics of the arithmetic language. `None` means
/// undefined: division by zero, a non-integral or out-of-range shift, or an
/// unbound symbol.
pub fn eval_math(term: &Term, env: &Env) -> Option<BigRational> {
    let mut values: Vec<Option<BigRational>> = Vec::with_capacity(term.len());
    for n in term.nodes() {
        let v = match n.op {
            Op::Leaf(LeafValue::Int(i)) => Some(BigRational::from_integer(BigInt::from(i))),
            Op::Leaf(LeafValue::Symbol(s)) => env.get(s.as_str()).cloned(),
            Op::Leaf(LeafValue::Bool(_)) => None,
            Op::Call(f) => {
                let a = values[usize::from(n.children[0])].clone();
                let b = values[usize::from(n.children[1])].clone();
                match (a, b) {
                    (Some(a), Some(b)) => binary(f.as_str(), a, b),
                    _ => None,
                }
            }
        };
        values.push(v);
    }
    values.pop().flatten()
}

fn binary(op: &str, a: BigRational, b: BigRational) -> Option<BigRational> {
    match op {
        "+" => Some(a + b),
        "-" => Some(a - b),
        "*" => Some(a * b),
        "/" if b.is_zero() => None,
        "/" => Some(a / b),
        "<<" => {
            if !b.is_integer() || b.is_negative() {
                return None;
            }
            let k = b.to_integer().to_u32().filter(|&k| k < 64)?;
            Some(a * BigRational::from_integer(BigInt::one() << k))
        }
        _ => None,
    }
}

/// Instantiates `pattern` with a concrete term for every variable.
pub fn instantiate(pattern: &Pattern, subst: &Subst, term_of: &mut impl FnMut(Id) -> Term) -> Term {
    let mut out = Term::default();
    let mut index: Vec<Id> = Vec::with_capacity(pattern.nodes().len());
    for pn in pattern.nodes() {
        let id = match pn {
            PatternNode::Var(v) => {
                let sub = term_of(subst.get(*v).expect("bound variable"));
                let offset: Vec<Id> = sub
                    .nodes()
                    .iter()
                    .scan(Vec::<Id>::new(), |seen, n| {
                        let id = out.add(n.map_children(|c| seen[usize::from(c)]));
                        seen.push(id);
                        Some(id)
                    })
                    .collect();
                *offset.last().expect("non-empty term")
            }
            PatternNode::Node(n) => out.add(n.map_children(|c| index[usize::from(c)])),
        };
        index.push(id);
    }
    out
}

/// Optimal ast-size of every class among terms of depth at most `depth`,
/// by dynamic programming over depth.
pub fn min_size_up_to_depth<N: Analysis>(egraph: &EGraph<N>, depth: usize) -> HashMap<Id, usize> {
    let mut best: HashMap<Id, usize> = HashMap::new();
    for _ in 0..depth {
        let mut next = HashMap::new();
        for class in egraph.classes() {
            let cost = class
                .iter()
                .filter_map(|n| {
                    n.children
                        .iter()
                        .map(|c| best.get(&egraph.find(*c)).copied())
                        .sum::<Option<usize>>()
                        .map(|s| s + 1)
                })
                .min();
            if let Some(cost) = cost {
                next.insert(class.id, cost);
            }
        }
        best = next;
    }
    best
}
