//! Choosing the cheapest represented term of an e-class.
//!
//! A [`CostFunction`] is local: a node's cost depends only on its operator
//! and the costs of its children. [`Extractor`] computes the cheapest cost
//! of every class by iterating to a fixpoint, then rebuilds a term top-down.
//! [`CostAnalysis`] maintains the same table incrementally as an e-class
//! analysis.

use std::cmp::Ordering;
use std::fmt::Debug;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::language::{ENode, Symbol, Term};
use crate::{Analysis, EGraph, Id};

pub trait CostFunction<N: Analysis> {
    type Cost: Ord + Clone + Debug;

    /// Cost of `enode` given its children's best costs, or `None` for an
    /// infinite cost. Must be monotone in every child cost.
    fn cost(&self, egraph: &EGraph<N>, enode: &ENode, child_costs: &[Self::Cost]) -> Option<Self::Cost>;
}

/// A cost function that looks only at the operator and child costs.
/// Every `LocalCost` is a [`CostFunction`] for any analysis.
pub trait LocalCost {
    type Cost: Ord + Clone + Debug;

    fn node_cost(&self, enode: &ENode, child_costs: &[Self::Cost]) -> Option<Self::Cost>;
}

impl<N: Analysis, L: LocalCost> CostFunction<N> for L {
    type Cost = L::Cost;

    fn cost(&self, _egraph: &EGraph<N>, enode: &ENode, child_costs: &[Self::Cost]) -> Option<Self::Cost> {
        self.node_cost(enode, child_costs)
    }
}

/// `1 + sum(child_costs)`.
pub fn ast_size(child_costs: &[usize]) -> usize {
    child_costs.iter().fold(1usize, |a, &c| a.saturating_add(c))
}

/// Counts operators and leaves.
#[derive(Debug, Clone, Copy, Default)]
pub struct AstSize;

impl LocalCost for AstSize {
    type Cost = usize;

    fn node_cost(&self, _enode: &ENode, child_costs: &[usize]) -> Option<usize> {
        Some(ast_size(child_costs))
    }
}

/// Height of the tree.
#[derive(Debug, Clone, Copy, Default)]
pub struct AstDepth;

impl LocalCost for AstDepth {
    type Cost = usize;

    fn node_cost(&self, _enode: &ENode, child_costs: &[usize]) -> Option<usize> {
        Some(1 + child_costs.iter().copied().max().unwrap_or(0))
    }
}

/// Tree size where each operator counts with its own weight (default 1).
#[derive(Debug, Clone, Default)]
pub struct WeightedAstSize {
    weights: FxHashMap<Symbol, usize>,
}

impl WeightedAstSize {
    pub fn new<'a>(weights: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        WeightedAstSize {
            weights: weights.into_iter().map(|(op, w)| (Symbol::new(op), w)).collect(),
        }
    }

    pub fn weight(&self, enode: &ENode) -> usize {
        match enode.op {
            crate::Op::Call(s) => self.weights.get(&s).copied().unwrap_or(1),
            crate::Op::Leaf(_) => 1,
        }
    }
}

impl LocalCost for WeightedAstSize {
    type Cost = usize;

    fn node_cost(&self, enode: &ENode, child_costs: &[usize]) -> Option<usize> {
        Some(child_costs.iter().fold(self.weight(enode), |a, &c| a.saturating_add(c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("class {0} represents no term of finite cost")]
    NoFiniteTerm(Id),
}

/// The cheapest cost and node of every class of a rebuilt e-graph.
///
/// ```
/// use eqsat::{AstSize, EGraph, Extractor, NoAnalysis, domains::math};
///
/// let mut egraph = EGraph::<NoAnalysis>::default();
/// let a = egraph.add_term(&math::language().parse_term("(* a 1)").unwrap());
/// let b = egraph.add_term(&math::language().parse_term("a").unwrap());
/// egraph.union(a, b);
/// egraph.rebuild().unwrap();
/// let (cost, term) = Extractor::new(&egraph, AstSize).find_best(a);
/// assert_eq!((cost, term.to_string()), (1, "a".to_string()));
/// ```
pub struct Extractor<'a, C: CostFunction<N>, N: Analysis> {
    egraph: &'a EGraph<N>,
    cost_function: C,
    table: FxHashMap<Id, (C::Cost, ENode)>,
}

impl<'a, C: CostFunction<N>, N: Analysis> Extractor<'a, C, N> {
    pub fn new(egraph: &'a EGraph<N>, cost_function: C) -> Self {
        let mut extractor = Extractor {
            egraph,
            cost_function,
            table: FxHashMap::default(),
        };
        while extractor.sweep() {}
        extractor
    }

    fn node_cost(&self, enode: &ENode) -> Option<C::Cost> {
        let child_costs = enode
            .children
            .iter()
            .map(|&c| self.table.get(&self.egraph.find(c)).map(|(cost, _)| cost.clone()))
            .collect::<Option<Vec<_>>>()?;
        self.cost_function.cost(self.egraph, enode, &child_costs)
    }

    // One pass over all classes; returns whether any entry changed.
    fn sweep(&mut self) -> bool {
        let mut changed = false;
        for class in self.egraph.classes() {
            let best = class
                .nodes
                .iter()
                .filter_map(|n| self.node_cost(n).map(|c| (c, n)))
                .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            let Some((cost, node)) = best else { continue };
            let improved = match self.table.get(&class.id) {
                None => true,
                Some((old, old_node)) => cost < *old || (cost == *old && node != old_node),
            };
            if improved {
                self.table.insert(class.id, (cost, node.clone()));
                changed = true;
            }
        }
        changed
    }

    /// Best cost of `eclass`, `None` if no finite term is represented.
    pub fn find_best_cost(&self, eclass: Id) -> Option<C::Cost> {
        self.table.get(&self.egraph.find(eclass)).map(|(c, _)| c.clone())
    }

    /// The cheapest e-node of `eclass`, lowest in node order among ties.
    pub fn find_best_node(&self, eclass: Id) -> Option<&ENode> {
        self.table.get(&self.egraph.find(eclass)).map(|(_, n)| n)
    }

    /// Panics if `eclass` has no finite-cost term; see
    /// [`try_find_best`](Extractor::try_find_best).
    pub fn find_best(&self, eclass: Id) -> (C::Cost, Term) {
        self.try_find_best(eclass).unwrap_or_else(|e| panic!("{e}"))
    }

    /// The cheapest term of `eclass` with its cost.
    ///
    /// Among equally cheap nodes the term prefers the smaller operator, then
    /// the children's chosen terms in printed order, so the result does not
    /// depend on class ids.
    pub fn try_find_best(&self, eclass: Id) -> Result<(C::Cost, Term), ExtractError> {
        let root = self.egraph.find(eclass);
        let cost = self.find_best_cost(root).ok_or(ExtractError::NoFiniteTerm(root))?;
        let mut term = Term::default();
        let mut memo: FxHashMap<Id, (Id, String)> = FxHashMap::default();
        self.build(root, &mut term, &mut memo);
        Ok((cost, term))
    }

    fn build(&self, class: Id, term: &mut Term, memo: &mut FxHashMap<Id, (Id, String)>) -> (Id, String) {
        if let Some(done) = memo.get(&class) {
            return done.clone();
        }
        let (best, fallback) = &self.table[&class];
        // candidates whose children are strictly cheaper cannot recurse back here
        let candidates: Vec<&ENode> = self.egraph[class]
            .nodes
            .iter()
            .filter(|n| {
                self.node_cost(n).as_ref() == Some(best)
                    && n.children
                        .iter()
                        .all(|&c| self.find_best_cost(c).is_some_and(|cc| cc.cmp(best) == Ordering::Less))
            })
            .collect();
        let candidates = if candidates.is_empty() {
            vec![fallback]
        } else {
            candidates
        };
        let mut chosen: Option<(String, Vec<String>, &ENode, Vec<Id>)> = None;
        for node in candidates {
            let op = node.op.to_string();
            if chosen.as_ref().is_some_and(|(o, ..)| op > *o) {
                continue;
            }
            let (ids, names): (Vec<Id>, Vec<String>) = node
                .children
                .iter()
                .map(|&c| self.build(self.egraph.find(c), term, memo))
                .unzip();
            let better = match &chosen {
                None => true,
                Some((o, n, ..)) => (&op, &names) < (o, n),
            };
            if better {
                chosen = Some((op, names, node, ids));
            }
        }
        let (op, names, node, ids) = chosen.expect("at least one candidate");
        let mut it = ids.into_iter();
        let id = term.add(node.map_children(|_| it.next().expect("child id")));
        let printed = if names.is_empty() {
            op
        } else {
            format!("({op} {})", names.join(" "))
        };
        memo.insert(class, (id, printed.clone()));
        (id, printed)
    }
}

/// Adds `root`'s cheapest term with its cost.
pub fn extract_best<N: Analysis, C: CostFunction<N>>(
    egraph: &EGraph<N>,
    root: Id,
    cost_function: C,
) -> Result<(C::Cost, Term), ExtractError> {
    Extractor::new(egraph, cost_function).try_find_best(root)
}

/// Extraction maintained as an analysis: each class's data is its cheapest
/// cost and a node achieving it.
#[derive(Debug, Clone, Default)]
pub struct CostAnalysis<C>(pub C);

#[derive(Debug, Clone)]
pub struct CostData<T> {
    /// `None` while no finite-cost term is known.
    pub cost: Option<T>,
    pub node: ENode,
}

impl<T: PartialEq> PartialEq for CostData<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost
    }
}

fn finite_cmp<T: Ord>(a: &Option<T>, b: &Option<T>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

impl<C> Analysis for CostAnalysis<C>
where
    C: LocalCost + Send + Sync,
    C::Cost: Send + Sync,
{
    type Data = CostData<C::Cost>;

    fn make(egraph: &EGraph<Self>, enode: &ENode) -> Self::Data {
        let child_costs: Option<Vec<C::Cost>> = enode.children.iter().map(|&c| egraph[c].data.cost.clone()).collect();
        let cost = child_costs.and_then(|cs| egraph.analysis.0.node_cost(enode, &cs));
        CostData {
            cost,
            node: enode.clone(),
        }
    }

    fn merge(&mut self, to: &mut Self::Data, from: Self::Data) -> Result<bool, String> {
        match finite_cmp(&from.cost, &to.cost) {
            Ordering::Less => {
                *to = from;
                Ok(true)
            }
            Ordering::Equal if from.node < to.node => {
                to.node = from.node;
                Ok(false)
            }
            _ => Ok(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::{Arity, LanguageDef, LeafKinds};
    use crate::NoAnalysis;

    fn lang() -> LanguageDef {
        LanguageDef::new(
            "test",
            [("+", Arity::Fixed(2)), ("*", Arity::Fixed(2)), ("f", Arity::Fixed(1))],
            LeafKinds {
                ints: true,
                bools: false,
                symbols: true,
            },
        )
        .unwrap()
    }

    fn add<N: Analysis>(g: &mut EGraph<N>, s: &str) -> Id {
        g.add_term(&lang().parse_term(s).unwrap())
    }

    #[test]
    fn cost_functions() {
        let leaf = ENode::leaf(crate::Op::symbol("a"));
        let mul = ENode::new(crate::Op::call("*"), [Id::from(0usize), Id::from(1usize)]);
        assert_eq!(AstSize.node_cost(&leaf, &[]), Some(1));
        assert_eq!(AstSize.node_cost(&mul, &[1, 1]), Some(3));
        assert_eq!(AstDepth.node_cost(&mul, &[1, 2]), Some(3));
        assert_eq!(WeightedAstSize::new([("*", 2)]).node_cost(&mul, &[1, 1]), Some(4));
    }

    #[test]
    fn picks_smallest_and_handles_cycles() {
        let mut g = EGraph::<NoAnalysis>::default();
        let big = add(&mut g, "(f (+ a (* b 1)))");
        let a = add(&mut g, "a");
        let inner = g.lookup_term(&lang().parse_term("(+ a (* b 1))").unwrap()).unwrap();
        g.union(inner, a);
        // f(x) = x makes the class cyclic
        g.union(big, a);
        g.rebuild().unwrap();
        let (cost, t) = extract_best(&g, big, AstSize).unwrap();
        assert_eq!((cost, t.to_string()), (1, "a".into()));
        let ex = Extractor::new(&g, AstSize);
        assert_eq!(ex.find_best_cost(inner), Some(1));
    }

    #[test]
    fn ties_break_by_operator_then_children() {
        let mut g = EGraph::<NoAnalysis>::default();
        let x = add(&mut g, "(+ b a)");
        let y = add(&mut g, "(+ a b)");
        g.union(x, y);
        g.rebuild().unwrap();
        assert_eq!(extract_best(&g, x, AstSize).unwrap().1.to_string(), "(+ a b)");
        let z = add(&mut g, "(* b a)");
        g.union(x, z);
        g.rebuild().unwrap();
        assert_eq!(extract_best(&g, x, AstSize).unwrap().1.to_string(), "(* b a)");
    }

    #[test]
    fn infinite_costs_fail() {
        struct NoLeaves;
        impl CostFunction<NoAnalysis> for NoLeaves {
            type Cost = usize;
            fn cost(&self, _: &EGraph<NoAnalysis>, n: &ENode, c: &[usize]) -> Option<usize> {
                (!n.is_leaf()).then(|| ast_size(c))
            }
        }
        let mut g = EGraph::<NoAnalysis>::default();
        let id = add(&mut g, "(f a)");
        assert_eq!(extract_best(&g, id, NoLeaves), Err(ExtractError::NoFiniteTerm(id)));
    }

    #[test]
    fn cost_analysis_tracks_minimum() {
        let mut g = EGraph::new(CostAnalysis(AstSize));
        let big = add(&mut g, "(+ (* a 1) (* b 1))");
        assert_eq!(g[big].data.cost, Some(7));
        let a = add(&mut g, "a");
        let a1 = add(&mut g, "(* a 1)");
        g.union(a, a1);
        g.rebuild().unwrap();
        assert_eq!(g[big].data.cost, Some(5));
        assert!(g.invariant_check().is_empty());
        let ex = Extractor::new(&g, AstSize);
        for c in g.classes() {
            assert_eq!(c.data.cost, ex.find_best_cost(c.id));
        }
        let mut d = CostData {
            cost: Some(3),
            node: ENode::leaf(crate::Op::int(1)),
        };
        let e = CostData {
            cost: Some(5),
            node: ENode::leaf(crate::Op::int(0)),
        };
        assert_eq!(CostAnalysis(AstSize).merge(&mut d, e), Ok(false));
        assert_eq!(d.cost, Some(3));
    }
}
