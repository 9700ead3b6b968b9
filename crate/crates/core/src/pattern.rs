//! Patterns, substitutions and e-matching.
//!
//! A [`Pattern`] is a term whose leaves may be `?`-prefixed variables. It is
//! compiled once into a short instruction sequence ([`MatchProgram`]) that
//! binds e-nodes into registers and checks repeated variables, then run
//! against each candidate e-class.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use smallvec::SmallVec;
use thiserror::Error;

use crate::language::{Children, ENode, LanguageDef, Op, ParseError, Symbol};
use crate::sexp::{self, Sexp};
use crate::{Analysis, EGraph, Id};

/// A pattern variable such as `?x`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Symbol);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pattern variables must start with `?`, got `{0}`")]
pub struct BadVar(String);

impl FromStr for Var {
    type Err = BadVar;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > 1 && s.starts_with('?') {
            Ok(Var(Symbol::new(s)))
        } else {
            Err(BadVar(s.to_owned()))
        }
    }
}

impl Var {
    /// Panics if `name` does not start with `?`.
    pub fn new(name: &str) -> Self {
        name.parse().unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn as_str(self) -> &'static str {
        self.0.as_str()
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A binding of pattern variables to e-class ids.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subst {
    bindings: SmallVec<[(Var, Id); 3]>,
}

impl Subst {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `var`, returning the previous binding if any.
    pub fn insert(&mut self, var: Var, id: Id) -> Option<Id> {
        for (v, old) in self.bindings.iter_mut() {
            if *v == var {
                return Some(std::mem::replace(old, id));
            }
        }
        self.bindings.push((var, id));
        None
    }

    pub fn get(&self, var: Var) -> Option<Id> {
        self.bindings.iter().find(|(v, _)| *v == var).map(|&(_, id)| id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, Id)> + '_ {
        self.bindings.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

impl Index<Var> for Subst {
    type Output = Id;

    fn index(&self, var: Var) -> &Id {
        self.bindings
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, id)| id)
            .unwrap_or_else(|| panic!("{var} is not bound"))
    }
}

impl fmt::Debug for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.bindings.iter().map(|(v, id)| (v, id)))
            .finish()
    }
}

/// All substitutions under which a pattern is represented in one e-class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchMatches {
    pub eclass: Id,
    pub substs: Vec<Subst>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternNode {
    Var(Var),
    /// An operator or leaf; children index earlier pattern nodes.
    Node(ENode),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pattern variable {0} is not bound by the substitution")]
pub struct UnboundVar(pub Var);

/// A term with variables. Nodes are stored children-first; the root is last.
#[derive(Clone)]
pub struct Pattern {
    nodes: Vec<PatternNode>,
    program: MatchProgram,
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for Pattern {}

impl Pattern {
    pub fn from_nodes(nodes: Vec<PatternNode>) -> Self {
        assert!(!nodes.is_empty(), "empty pattern");
        let program = MatchProgram::compile(&nodes);
        Pattern { nodes, program }
    }

    pub fn parse(text: &str, lang: &LanguageDef) -> Result<Self, ParseError> {
        let sexp = sexp::read(text)?;
        Self::from_sexp(&sexp, lang)
    }

    pub(crate) fn from_sexp(sexp: &Sexp, lang: &LanguageDef) -> Result<Self, ParseError> {
        fn build(s: &Sexp, lang: &LanguageDef, out: &mut Vec<PatternNode>) -> Result<Id, ParseError> {
            let node = match s {
                Sexp::Atom(a, _) if a.starts_with('?') && a.len() > 1 => PatternNode::Var(Var(Symbol::new(a))),
                Sexp::Atom(a, pos) => PatternNode::Node(ENode::leaf(lang.atom_op(a, *pos)?)),
                Sexp::List(items, _) => {
                    let op = lang.head_op(&items[0], items.len() - 1)?;
                    let mut children = Children::new();
                    for item in &items[1..] {
                        children.push(build(item, lang, out)?);
                    }
                    PatternNode::Node(ENode { op, children })
                }
            };
            out.push(node);
            Ok(Id::from(out.len() - 1))
        }
        let mut nodes = Vec::new();
        build(sexp, lang, &mut nodes)?;
        Ok(Pattern::from_nodes(nodes))
    }

    pub fn nodes(&self) -> &[PatternNode] {
        &self.nodes
    }

    pub fn program(&self) -> &MatchProgram {
        &self.program
    }

    fn root(&self) -> &PatternNode {
        self.nodes.last().expect("non-empty pattern")
    }

    /// Distinct variables in first-occurrence order.
    pub fn vars(&self) -> Vec<Var> {
        let mut vars = Vec::new();
        for n in &self.nodes {
            if let PatternNode::Var(v) = n {
                if !vars.contains(v) {
                    vars.push(*v);
                }
            }
        }
        vars
    }

    /// Every `(substitution, class)` pair under which this pattern is
    /// represented, grouped by class in ascending id order.
    pub fn search<N: Analysis>(&self, egraph: &EGraph<N>) -> Vec<SearchMatches> {
        debug_assert!(egraph.is_clean(), "e-matching on a graph that has not been rebuilt");
        match self.root() {
            PatternNode::Var(_) => egraph
                .class_ids()
                .filter_map(|id| self.search_eclass(egraph, id))
                .collect(),
            PatternNode::Node(n) => match egraph.classes_with_op(n.op, n.children.len()) {
                Some(ids) => ids.iter().filter_map(|&id| self.search_eclass(egraph, id)).collect(),
                None => egraph
                    .class_ids()
                    .filter_map(|id| self.search_eclass(egraph, id))
                    .collect(),
            },
        }
    }

    pub fn search_eclass<N: Analysis>(&self, egraph: &EGraph<N>, eclass: Id) -> Option<SearchMatches> {
        let eclass = egraph.find(eclass);
        let mut substs = self.program.run(egraph, eclass);
        if substs.is_empty() {
            return None;
        }
        substs.sort_unstable();
        substs.dedup();
        Some(SearchMatches { eclass, substs })
    }

    /// Adds this pattern instantiated under `subst` and returns the root's
    /// class.
    pub fn apply_subst<N: Analysis>(&self, egraph: &mut EGraph<N>, subst: &Subst) -> Result<Id, UnboundVar> {
        let mut ids: Vec<Id> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let id = match n {
                PatternNode::Var(v) => subst.get(*v).ok_or(UnboundVar(*v))?,
                PatternNode::Node(node) => egraph.add(node.map_children(|c| ids[usize::from(c)])),
            };
            ids.push(id);
        }
        Ok(*ids.last().expect("non-empty pattern"))
    }

    /// Like [`apply_subst`](Pattern::apply_subst) but never adds: returns
    /// `None` if some instantiated subterm is absent.
    pub fn lookup_subst<N: Analysis>(&self, egraph: &EGraph<N>, subst: &Subst) -> Option<Id> {
        let mut ids: Vec<Id> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let id = match n {
                PatternNode::Var(v) => egraph.find(subst.get(*v)?),
                PatternNode::Node(node) => egraph.lookup(&node.map_children(|c| ids[usize::from(c)]))?,
            };
            ids.push(id);
        }
        ids.last().copied()
    }

    fn write(&self, id: usize, out: &mut String) {
        match &self.nodes[id] {
            PatternNode::Var(v) => out.push_str(v.as_str()),
            PatternNode::Node(n) if n.children.is_empty() => out.push_str(&n.op.to_string()),
            PatternNode::Node(n) => {
                out.push('(');
                out.push_str(&n.op.to_string());
                for &c in &n.children {
                    out.push(' ');
                    self.write(usize::from(c), out);
                }
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(self.nodes.len() - 1, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({self})")
    }
}

type Reg = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    /// For each e-node in the class held by `class` with this head and
    /// arity, load its children into `out..out + arity` and continue.
    Bind { class: Reg, op: Op, arity: usize, out: Reg },
    /// Continue only if both registers hold the same class.
    Compare { a: Reg, b: Reg },
}

/// A compiled pattern. Register 0 holds the class being matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchProgram {
    instructions: Vec<Instruction>,
    vars: Vec<(Var, Reg)>,
    registers: usize,
}

impl MatchProgram {
    pub fn compile(nodes: &[PatternNode]) -> Self {
        let mut instructions = Vec::new();
        let mut vars: Vec<(Var, Reg)> = Vec::new();
        let mut registers = 1;
        // breadth-first, so shallow operator checks prune early
        let mut queue = std::collections::VecDeque::from([(nodes.len() - 1, 0)]);
        while let Some((idx, reg)) = queue.pop_front() {
            match &nodes[idx] {
                PatternNode::Var(v) => match vars.iter().find(|(w, _)| w == v) {
                    Some(&(_, first)) => instructions.push(Instruction::Compare { a: first, b: reg }),
                    None => vars.push((*v, reg)),
                },
                PatternNode::Node(n) => {
                    let out = registers;
                    registers += n.children.len();
                    instructions.push(Instruction::Bind {
                        class: reg,
                        op: n.op,
                        arity: n.children.len(),
                        out,
                    });
                    for (i, &c) in n.children.iter().enumerate() {
                        queue.push_back((usize::from(c), out + i));
                    }
                }
            }
        }
        MatchProgram {
            instructions,
            vars,
            registers,
        }
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// All substitutions matching in `eclass` (may contain duplicates).
    pub fn run<N: Analysis>(&self, egraph: &EGraph<N>, eclass: Id) -> Vec<Subst> {
        let mut regs = vec![eclass; self.registers];
        let mut out = Vec::new();
        self.step(egraph, 0, &mut regs, &mut out);
        out
    }

    fn step<N: Analysis>(&self, egraph: &EGraph<N>, pc: usize, regs: &mut Vec<Id>, out: &mut Vec<Subst>) {
        let Some(instr) = self.instructions.get(pc) else {
            let mut subst = Subst::new();
            for &(v, r) in &self.vars {
                subst.insert(v, egraph.find(regs[r]));
            }
            out.push(subst);
            return;
        };
        match *instr {
            Instruction::Bind {
                class,
                op,
                arity,
                out: first,
            } => {
                let class = &egraph[regs[class]];
                if egraph.is_clean() {
                    for node in class.nodes_with_op(op, arity) {
                        regs[first..first + arity].copy_from_slice(&node.children);
                        self.step(egraph, pc + 1, regs, out);
                    }
                } else {
                    for node in class.nodes.iter().filter(|n| n.op == op && n.children.len() == arity) {
                        regs[first..first + arity].copy_from_slice(&node.children);
                        self.step(egraph, pc + 1, regs, out);
                    }
                }
            }
            Instruction::Compare { a, b } => {
                if egraph.find(regs[a]) == egraph.find(regs[b]) {
                    self.step(egraph, pc + 1, regs, out);
                }
            }
        }
    }
}
