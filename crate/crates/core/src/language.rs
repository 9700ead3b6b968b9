//! Runtime language definitions, e-nodes and ground terms.
//!
//! Everything else in the crate is generic over the operators described
//! here: an [`ENode`] is an [`Op`] plus child ids, and a [`Term`] is a flat
//! buffer of e-nodes whose child ids index earlier entries of the buffer.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use indexmap::IndexMap;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::sexp::{self, Sexp, SexpError};
use crate::Id;

/// An interned string. Equal names intern to the same allocation, so
/// equality is a pointer comparison. Hashing uses the contents, which keeps
/// hash-map layouts identical from run to run.
#[derive(Clone, Copy)]
pub struct Symbol(&'static str);

fn interner() -> &'static Mutex<FxHashMap<&'static str, ()>> {
    static INTERNER: OnceLock<Mutex<FxHashMap<&'static str, ()>>> = OnceLock::new();
    INTERNER.get_or_init(|| Mutex::new(FxHashMap::default()))
}

impl Symbol {
    pub fn new(name: &str) -> Self {
        let mut table = interner().lock().expect("symbol table poisoned");
        if let Some((&s, _)) = table.get_key_value(name) {
            return Symbol(s);
        }
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        table.insert(leaked, ());
        Symbol(leaked)
    }

    pub fn as_str(self) -> &'static str {
        self.0
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

// Ordered by name, never by address.
impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            Ordering::Equal
        } else {
            self.0.cmp(other.0)
        }
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

/// Data carried by a childless e-node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeafValue {
    Int(i64),
    Bool(bool),
    Symbol(Symbol),
}

impl fmt::Display for LeafValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeafValue::Int(n) => write!(f, "{n}"),
            LeafValue::Bool(b) => write!(f, "{b}"),
            LeafValue::Symbol(s) => write!(f, "{s}"),
        }
    }
}

/// The head of an e-node: either a language operator or leaf data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Call(Symbol),
    Leaf(LeafValue),
}

impl Op {
    pub fn call(name: &str) -> Self {
        Op::Call(Symbol::new(name))
    }

    pub fn int(n: i64) -> Self {
        Op::Leaf(LeafValue::Int(n))
    }

    pub fn boolean(b: bool) -> Self {
        Op::Leaf(LeafValue::Bool(b))
    }

    pub fn symbol(name: &str) -> Self {
        Op::Leaf(LeafValue::Symbol(Symbol::new(name)))
    }

    pub fn leaf(&self) -> Option<LeafValue> {
        match self {
            Op::Leaf(v) => Some(*v),
            Op::Call(_) => None,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Call(s) => write!(f, "{s}"),
            Op::Leaf(v) => write!(f, "{v}"),
        }
    }
}

pub type Children = SmallVec<[Id; 3]>;

/// An operator applied to child e-class ids.
///
/// Equality and hashing are structural over `(op, children)`. The derived
/// ordering compares the operator first and then the child ids in order,
/// which is the order e-nodes are kept in inside an e-class.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ENode {
    pub op: Op,
    pub children: Children,
}

impl ENode {
    pub fn new(op: Op, children: impl IntoIterator<Item = Id>) -> Self {
        ENode {
            op,
            children: children.into_iter().collect(),
        }
    }

    pub fn leaf(op: Op) -> Self {
        ENode {
            op,
            children: Children::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Whether `self` and `other` could be congruent: same operator and arity.
    pub fn matches(&self, other: &ENode) -> bool {
        self.op == other.op && self.children.len() == other.children.len()
    }

    pub fn map_children(&self, mut f: impl FnMut(Id) -> Id) -> ENode {
        ENode {
            op: self.op,
            children: self.children.iter().map(|&c| f(c)).collect(),
        }
    }
}

impl fmt::Debug for ENode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ENode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return write!(f, "{}", self.op);
        }
        write!(f, "({}", self.op)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

/// A ground term stored as a flat buffer: children precede their parents
/// and the root is the last node.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Term {
    nodes: Vec<ENode>,
}

impl Term {
    /// Appends a node whose children are indices of nodes already in the
    /// buffer, returning its index.
    pub fn add(&mut self, node: ENode) -> Id {
        debug_assert!(
            node.children.iter().all(|c| usize::from(*c) < self.nodes.len()),
            "term children must precede their parent"
        );
        self.nodes.push(node);
        Id::from(self.nodes.len() - 1)
    }

    pub fn nodes(&self) -> &[ENode] {
        &self.nodes
    }

    pub fn root(&self) -> Id {
        assert!(!self.nodes.is_empty(), "empty term has no root");
        Id::from(self.nodes.len() - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Number of operators and leaves in the tree this buffer denotes
    /// (shared buffer entries count once per use).
    pub fn size(&self) -> usize {
        let mut sizes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let s: usize = 1 + n.children.iter().map(|&c| sizes[usize::from(c)]).sum::<usize>();
            sizes.push(s);
        }
        sizes.last().copied().unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        let mut depths = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let d = 1 + n.children.iter().map(|&c| depths[usize::from(c)]).max().unwrap_or(0);
            depths.push(d);
        }
        depths.last().copied().unwrap_or(0)
    }

    /// The subterm rooted at `id`, as its own compact term.
    pub fn subterm(&self, id: Id) -> Term {
        let mut out = Term::default();
        let mut memo: FxHashMap<Id, Id> = FxHashMap::default();
        fn go(t: &Term, id: Id, out: &mut Term, memo: &mut FxHashMap<Id, Id>) -> Id {
            if let Some(&new) = memo.get(&id) {
                return new;
            }
            let node = &t.nodes[usize::from(id)];
            let node = node.map_children(|c| go(t, c, out, memo));
            let new = out.add(node);
            memo.insert(id, new);
            new
        }
        go(self, id, &mut out, &mut memo);
        out
    }

    /// Parses `text` under `lang`. Equivalent to [`LanguageDef::parse_term`].
    pub fn parse(text: &str, lang: &LanguageDef) -> Result<Term, ParseError> {
        lang.parse_term(text)
    }

    fn write_node(&self, id: Id, out: &mut String) {
        let node = &self.nodes[usize::from(id)];
        if node.children.is_empty() {
            out.push_str(&node.op.to_string());
            return;
        }
        out.push('(');
        out.push_str(&node.op.to_string());
        for &c in &node.children {
            out.push(' ');
            self.write_node(c, out);
        }
        out.push(')');
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nodes.is_empty() {
            return Ok(());
        }
        let mut s = String::new();
        self.write_node(self.root(), &mut s);
        f.write_str(&s)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Term({self})")
    }
}

/// Renders a term as an s-expression with single spaces between atoms.
pub fn print_term(t: &Term) -> String {
    t.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    Variadic,
}

impl Arity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Arity::Fixed(k) => k == n,
            Arity::Variadic => true,
        }
    }
}

/// Which kinds of leaf data a language admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LeafKinds {
    pub ints: bool,
    pub bools: bool,
    pub symbols: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed s-expression: {0}")]
    Syntax(#[from] SexpError),
    #[error("unknown operator `{name}` at byte {position}")]
    UnknownOperator { name: String, position: usize },
    #[error("operator `{name}` at byte {position} expects {expected} children, found {found}")]
    ArityMismatch {
        name: String,
        expected: String,
        found: usize,
        position: usize,
    },
    #[error("list head at byte {0} must be an operator name")]
    BadHead(usize),
    #[error("pattern variable `{name}` at byte {position} is not allowed in a ground term")]
    UnexpectedVariable { name: String, position: usize },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax(e) => e.position(),
            ParseError::UnknownOperator { position, .. }
            | ParseError::ArityMismatch { position, .. }
            | ParseError::UnexpectedVariable { position, .. } => *position,
            ParseError::BadHead(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LanguageError {
    #[error("operator `{0}` declared twice")]
    DuplicateOperator(String),
}

/// A runtime description of a term language: operator names with their
/// arities, plus the leaf kinds that may appear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageDef {
    name: String,
    operators: IndexMap<Symbol, Arity>,
    leaves: LeafKinds,
}

impl LanguageDef {
    pub fn new(
        name: &str,
        operators: impl IntoIterator<Item = (&'static str, Arity)>,
        leaves: LeafKinds,
    ) -> Result<Self, LanguageError> {
        let mut ops = IndexMap::new();
        for (op, arity) in operators {
            if ops.insert(Symbol::new(op), arity).is_some() {
                return Err(LanguageError::DuplicateOperator(op.to_owned()));
            }
        }
        Ok(LanguageDef {
            name: name.to_owned(),
            operators: ops,
            leaves,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn leaves(&self) -> LeafKinds {
        self.leaves
    }

    pub fn arity(&self, op: Symbol) -> Option<Arity> {
        self.operators.get(&op).copied()
    }

    pub fn operators(&self) -> impl Iterator<Item = (Symbol, Arity)> + '_ {
        self.operators.iter().map(|(s, a)| (*s, *a))
    }

    /// Classifies a bare atom: integer and boolean literals (when admitted),
    /// nullary operators, then symbol leaves.
    pub(crate) fn atom_op(&self, atom: &str, position: usize) -> Result<Op, ParseError> {
        if self.leaves.ints {
            if let Ok(n) = atom.parse::<i64>() {
                return Ok(Op::int(n));
            }
        }
        if self.leaves.bools {
            match atom {
                "true" => return Ok(Op::boolean(true)),
                "false" => return Ok(Op::boolean(false)),
                _ => {}
            }
        }
        let sym = Symbol::new(atom);
        if let Some(arity) = self.arity(sym) {
            if arity.admits(0) {
                return Ok(Op::Call(sym));
            }
            if !self.leaves.symbols {
                return Err(arity_error(atom, arity, 0, position));
            }
        }
        if self.leaves.symbols {
            Ok(Op::Leaf(LeafValue::Symbol(sym)))
        } else {
            Err(ParseError::UnknownOperator {
                name: atom.to_owned(),
                position,
            })
        }
    }

    pub(crate) fn head_op(&self, sexp: &Sexp, argc: usize) -> Result<Op, ParseError> {
        let Sexp::Atom(name, position) = sexp else {
            return Err(ParseError::BadHead(sexp.position()));
        };
        let sym = Symbol::new(name);
        match self.arity(sym) {
            None => Err(ParseError::UnknownOperator {
                name: name.clone(),
                position: *position,
            }),
            Some(arity) if !arity.admits(argc) => Err(arity_error(name, arity, argc, *position)),
            Some(_) => Ok(Op::Call(sym)),
        }
    }

    pub fn parse_term(&self, text: &str) -> Result<Term, ParseError> {
        let sexp = sexp::read(text)?;
        let mut term = Term::default();
        self.build_term(&sexp, &mut term)?;
        Ok(term)
    }

    fn build_term(&self, sexp: &Sexp, term: &mut Term) -> Result<Id, ParseError> {
        match sexp {
            Sexp::Atom(atom, position) => {
                if atom.starts_with('?') {
                    return Err(ParseError::UnexpectedVariable {
                        name: atom.clone(),
                        position: *position,
                    });
                }
                let op = self.atom_op(atom, *position)?;
                Ok(term.add(ENode::leaf(op)))
            }
            Sexp::List(items, _) => {
                let op = self.head_op(&items[0], items.len() - 1)?;
                let mut children = Children::new();
                for item in &items[1..] {
                    children.push(self.build_term(item, term)?);
                }
                Ok(term.add(ENode { op, children }))
            }
        }
    }

    /// Checks every node of `term` against this language.
    pub fn validate(&self, term: &Term) -> Result<(), ParseError> {
        for node in term.nodes() {
            match node.op {
                Op::Call(sym) => match self.arity(sym) {
                    None => {
                        return Err(ParseError::UnknownOperator {
                            name: sym.to_string(),
                            position: 0,
                        })
                    }
                    Some(a) if !a.admits(node.children.len()) => {
                        return Err(arity_error(sym.as_str(), a, node.children.len(), 0))
                    }
                    Some(_) => {}
                },
                Op::Leaf(v) => {
                    let ok = match v {
                        LeafValue::Int(_) => self.leaves.ints,
                        LeafValue::Bool(_) => self.leaves.bools,
                        LeafValue::Symbol(_) => self.leaves.symbols,
                    };
                    if !ok || !node.children.is_empty() {
                        return Err(ParseError::UnknownOperator {
                            name: v.to_string(),
                            position: 0,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn arity_error(name: &str, arity: Arity, found: usize, position: usize) -> ParseError {
    let expected = match arity {
        Arity::Fixed(k) => k.to_string(),
        Arity::Variadic => "any number of".to_owned(),
    };
    ParseError::ArityMismatch {
        name: name.to_owned(),
        expected,
        found,
        position,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> LanguageDef {
        LanguageDef::new(
            "toy",
            [
                ("+", Arity::Fixed(2)),
                ("*", Arity::Fixed(2)),
                ("/", Arity::Fixed(2)),
                ("neg", Arity::Fixed(1)),
                ("nil", Arity::Fixed(0)),
            ],
            LeafKinds {
                ints: true,
                bools: true,
                symbols: true,
            },
        )
        .unwrap()
    }

    #[test]
    fn parses_the_intro_term() {
        let t = toy().parse_term("(/ (* a 2) 2)").unwrap();
        assert_eq!(t.len(), 5);
        let root = &t.nodes()[usize::from(t.root())];
        assert_eq!(root.op, Op::call("/"));
        assert_eq!(t.to_string(), "(/ (* a 2) 2)");
    }

    #[test]
    fn parses_leaves() {
        let lang = toy();
        let t = lang.parse_term("a").unwrap();
        assert_eq!(t.nodes(), &[ENode::leaf(Op::symbol("a"))]);
        assert_eq!(lang.parse_term("-7").unwrap().nodes()[0].op, Op::int(-7));
        assert_eq!(lang.parse_term("true").unwrap().nodes()[0].op, Op::boolean(true));
        assert_eq!(lang.parse_term("nil").unwrap().nodes()[0].op, Op::call("nil"));
    }

    #[test]
    fn nested_structure() {
        let t = toy().parse_term("(+ 1 (+ 2 3))").unwrap();
        assert_eq!(t.size(), 5);
        assert_eq!(t.depth(), 3);
        assert_eq!(print_term(&t), "(+ 1 (+ 2 3))");
    }

    #[test]
    fn canonical_spacing() {
        let t = toy().parse_term("  ( +   1\n\t(neg   x ) )").unwrap();
        assert_eq!(t.to_string(), "(+ 1 (neg x))");
    }

    #[test]
    fn rejects_unknown_and_arity() {
        let lang = toy();
        match lang.parse_term("(foo 1 2)") {
            Err(ParseError::UnknownOperator { name, position }) => {
                assert_eq!(name, "foo");
                assert_eq!(position, 1);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            lang.parse_term("(+ 1)"),
            Err(ParseError::ArityMismatch { found: 1, .. })
        ));
        assert!(matches!(lang.parse_term("(+ 1 2"), Err(ParseError::Syntax(_))));
        assert!(matches!(lang.parse_term("((+) 1)"), Err(ParseError::BadHead(1))));
        assert!(matches!(
            lang.parse_term("(+ ?x 1)"),
            Err(ParseError::UnexpectedVariable { .. })
        ));
    }

    #[test]
    fn symbols_off_rejects_names() {
        let lang = LanguageDef::new(
            "nums",
            [("+", Arity::Fixed(2))],
            LeafKinds {
                ints: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            lang.parse_term("(+ x 1)"),
            Err(ParseError::UnknownOperator { .. })
        ));
        assert!(matches!(lang.parse_term("+"), Err(ParseError::ArityMismatch { .. })));
    }

    #[test]
    fn duplicate_operator_rejected() {
        let err = LanguageDef::new(
            "dup",
            [("f", Arity::Fixed(1)), ("f", Arity::Fixed(2))],
            LeafKinds::default(),
        );
        assert_eq!(err, Err(LanguageError::DuplicateOperator("f".into())));
    }

    #[test]
    fn symbol_interning_is_injective() {
        let a = Symbol::new("alpha");
        let b = Symbol::new("alpha");
        let c = Symbol::new("beta");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a < c);
        assert_eq!(a.as_str(), "alpha");
    }

    #[test]
    fn subterm_extracts() {
        let t = toy().parse_term("(+ (neg x) (* y 2))").unwrap();
        let root = &t.nodes()[usize::from(t.root())];
        let right = t.subterm(root.children[1]);
        assert_eq!(right.to_string(), "(* y 2)");
    }

    fn arb_term_text() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (-50i64..50).prop_map(|n| n.to_string()),
            prop::sample::select(vec!["a", "b", "x", "true", "false", "nil"]).prop_map(str::to_owned),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (prop::sample::select(vec!["+", "*", "/"]), inner.clone(), inner.clone())
                    .prop_map(|(op, a, b)| format!("({op} {a} {b})")),
                inner.prop_map(|a| format!("(neg {a})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(text in arb_term_text()) {
            let lang = toy();
            let t = lang.parse_term(&text).unwrap();
            let printed = print_term(&t);
            prop_assert_eq!(&printed, &text);
            prop_assert_eq!(lang.parse_term(&printed).unwrap(), t);
        }

        #[test]
        fn unknown_operators_always_rejected(name in "[g-m][a-z]{0,4}", text in arb_term_text()) {
            let lang = toy();
            let src = format!("({name} {text})");
            let rejected = matches!(lang.parse_term(&src), Err(ParseError::UnknownOperator { .. }));
            prop_assert!(rejected);
        }
    }
}
