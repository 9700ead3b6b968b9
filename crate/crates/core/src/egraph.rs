use std::fmt::{self, Write as _};
use std::mem;
use std::ops::Index;

use indexmap::IndexMap;
use log::trace;
use rustc_hash::{FxBuildHasher, FxHashMap};
use serde::Serialize;

use crate::analysis::{Analysis, AnalysisConflict};
use crate::language::{ENode, Op, Term};
use crate::unionfind::UnionFind;
use crate::Id;

/// An equivalence class of e-nodes.
#[derive(Debug, Clone)]
pub struct EClass<D> {
    /// Canonical id as of the last rebuild.
    pub id: Id,
    /// The e-nodes in this class; sorted, deduplicated and canonical after a
    /// rebuild.
    pub nodes: Vec<ENode>,
    pub data: D,
    /// Every e-node that uses this class as a child, with the class that
    /// e-node lives in. May hold stale entries until the next rebuild.
    pub(crate) parents: Vec<(ENode, Id)>,
}

impl<D> EClass<D> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ENode> {
        self.nodes.iter()
    }

    pub fn parents(&self) -> &[(ENode, Id)] {
        &self.parents
    }

    /// The contiguous run of nodes with the given head and arity. Only
    /// meaningful on a rebuilt graph, where nodes are sorted.
    pub fn nodes_with_op(&self, op: Op, arity: usize) -> &[ENode] {
        let start = self.nodes.partition_point(|n| (n.op, n.children.len()) < (op, arity));
        let end = start + self.nodes[start..].partition_point(|n| n.op == op && n.children.len() == arity);
        &self.nodes[start..end]
    }
}

/// Counters for the congruence machinery. All are cumulative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RebuildStats {
    pub unions: usize,
    pub rebuilds: usize,
    pub repairs: usize,
    pub hashcons_updates: usize,
}

/// One way in which an e-graph fails its invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two congruent e-nodes live in different classes.
    Congruence {
        left: ENode,
        right: ENode,
        left_class: Id,
        right_class: Id,
    },
    /// The hashcons disagrees with the class contents.
    Hashcons(String),
    /// A class's node list is not canonical, sorted and deduplicated.
    NodeList(Id, String),
    /// A parent list is missing an entry.
    Parents(Id, String),
    /// Stored analysis data differs from the join of `make` over the class,
    /// or `modify` would still change the graph.
    Analysis(Id, String),
    /// Pending work remains.
    Dirty(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Congruence {
                left,
                right,
                left_class,
                right_class,
            } => write!(
                f,
                "congruent nodes {left} (class {left_class}) and {right} (class {right_class}) not merged"
            ),
            Violation::Hashcons(msg) => write!(f, "hashcons: {msg}"),
            Violation::NodeList(id, msg) => write!(f, "class {id} nodes: {msg}"),
            Violation::Parents(id, msg) => write!(f, "class {id} parents: {msg}"),
            Violation::Analysis(id, msg) => write!(f, "class {id} analysis: {msg}"),
            Violation::Dirty(msg) => write!(f, "dirty: {msg}"),
        }
    }
}

/// An e-graph: a union-find over class ids, the classes themselves, and a
/// hashcons from canonical e-nodes to their class.
///
/// [`add`](EGraph::add) and [`union`](EGraph::union) never restore the
/// congruence invariant themselves. `union` queues the merged class on a
/// worklist and [`rebuild`](EGraph::rebuild) restores congruence, the
/// hashcons and the analysis data in one pass over the deduplicated
/// worklist. Searching a graph that has not been rebuilt can miss matches.
#[derive(Clone)]
pub struct EGraph<N: Analysis> {
    pub analysis: N,
    unionfind: UnionFind,
    classes: Vec<Option<EClass<N::Data>>>,
    class_count: usize,
    memo: FxHashMap<ENode, Id>,
    worklist: Vec<Id>,
    // classes whose node lists must be re-canonicalised at the end of rebuild
    touched: Vec<Id>,
    // hashcons keys written by repair during the current rebuild
    inserted: Vec<ENode>,
    clean: bool,
    by_op: FxHashMap<(Op, usize), Vec<Id>>,
    by_op_fresh: bool,
    conflict: Option<AnalysisConflict>,
    stats: RebuildStats,
}

impl<N: Analysis + Default> Default for EGraph<N> {
    fn default() -> Self {
        EGraph::new(N::default())
    }
}

impl<N: Analysis> EGraph<N> {
    pub fn new(analysis: N) -> Self {
        EGraph {
            analysis,
            unionfind: UnionFind::default(),
            classes: Vec::new(),
            class_count: 0,
            memo: FxHashMap::default(),
            worklist: Vec::new(),
            touched: Vec::new(),
            inserted: Vec::new(),
            clean: true,
            by_op: FxHashMap::default(),
            by_op_fresh: true,
            conflict: None,
            stats: RebuildStats::default(),
        }
    }

    /// Number of e-nodes in the hashcons.
    pub fn total_size(&self) -> usize {
        self.memo.len()
    }

    /// Number of e-nodes stored across all classes (may include duplicates
    /// before a rebuild).
    pub fn total_number_of_nodes(&self) -> usize {
        self.classes().map(|c| c.len()).sum()
    }

    pub fn number_of_classes(&self) -> usize {
        self.class_count
    }

    /// Number of ids ever allocated.
    pub fn number_of_ids(&self) -> usize {
        self.unionfind.len()
    }

    /// Whether the invariants currently hold (no pending worklist).
    pub fn is_clean(&self) -> bool {
        self.clean
    }

    pub fn stats(&self) -> RebuildStats {
        self.stats
    }

    pub fn classes(&self) -> impl Iterator<Item = &EClass<N::Data>> {
        self.classes.iter().filter_map(Option::as_ref)
    }

    /// Canonical ids of all classes, ascending.
    pub fn class_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.classes().map(|c| c.id)
    }

    pub fn find(&self, id: Id) -> Id {
        self.unionfind.find(id)
    }

    pub fn find_mut(&mut self, id: Id) -> Id {
        self.unionfind.find_mut(id)
    }

    pub fn canonicalize(&self, enode: &ENode) -> ENode {
        enode.map_children(|c| self.find(c))
    }

    fn canonicalize_mut(&mut self, enode: &ENode) -> ENode {
        enode.map_children(|c| self.unionfind.find_mut(c))
    }

    pub fn is_canonical(&self, enode: &ENode) -> bool {
        enode.children.iter().all(|&c| self.find(c) == c)
    }

    pub fn lookup(&self, enode: &ENode) -> Option<Id> {
        self.memo.get(&self.canonicalize(enode)).map(|&id| self.find(id))
    }

    /// The class representing `term`, if every subterm is already present.
    pub fn lookup_term(&self, term: &Term) -> Option<Id> {
        let mut ids: Vec<Id> = Vec::with_capacity(term.len());
        for node in term.nodes() {
            let node = node.map_children(|c| ids[usize::from(c)]);
            ids.push(self.lookup(&node)?);
        }
        ids.last().copied()
    }

    /// The classes holding at least one e-node with the given head and arity.
    /// Returns `None` when the index is stale (call
    /// [`refresh_index`](EGraph::refresh_index) after rebuilding).
    pub fn classes_with_op(&self, op: Op, arity: usize) -> Option<&[Id]> {
        if !self.by_op_fresh {
            return None;
        }
        Some(self.by_op.get(&(op, arity)).map_or(&[], Vec::as_slice))
    }

    /// Recomputes the head-symbol index if any class changed since it was
    /// last built.
    pub fn refresh_index(&mut self) {
        if self.by_op_fresh {
            return;
        }
        self.by_op.clear();
        for class in self.classes.iter().flatten() {
            let mut last = None;
            for n in &class.nodes {
                let key = (n.op, n.children.len());
                if last != Some(key) {
                    self.by_op.entry(key).or_default().push(class.id);
                    last = Some(key);
                }
            }
        }
        for ids in self.by_op.values_mut() {
            ids.sort_unstable();
            ids.dedup();
        }
        self.by_op_fresh = true;
    }

    fn class_mut(&mut self, id: Id) -> &mut EClass<N::Data> {
        let id = self.unionfind.find_mut(id);
        self.classes[usize::from(id)]
            .as_mut()
            .expect("canonical id without class")
    }

    pub fn add(&mut self, enode: ENode) -> Id {
        let enode = self.canonicalize_mut(&enode);
        if let Some(&id) = self.memo.get(&enode) {
            return self.find_mut(id);
        }
        let id = self.unionfind.make_set();
        trace!("add {enode} as {id}");
        let data = N::make(self, &enode);
        for &child in &enode.children {
            self.class_mut(child).parents.push((enode.clone(), id));
        }
        self.memo.insert(enode.clone(), id);
        debug_assert_eq!(self.classes.len(), usize::from(id));
        self.classes.push(Some(EClass {
            id,
            nodes: vec![enode],
            data,
            parents: Vec::new(),
        }));
        self.class_count += 1;
        self.by_op_fresh = false;
        N::modify(self, id);
        self.find_mut(id)
    }

    pub fn add_term(&mut self, term: &Term) -> Id {
        let mut ids: Vec<Id> = Vec::with_capacity(term.len());
        for node in term.nodes() {
            let node = node.map_children(|c| ids[usize::from(c)]);
            ids.push(self.add(node));
        }
        *ids.last().expect("cannot add an empty term")
    }

    /// Merges the classes of `a` and `b`, returning the canonical id of the
    /// result. Congruence is not restored until [`rebuild`](EGraph::rebuild).
    pub fn union(&mut self, a: Id, b: Id) -> Id {
        let (mut leader, mut other) = (self.find_mut(a), self.find_mut(b));
        if leader == other {
            return leader;
        }
        // the class with more e-nodes keeps its id
        if self[leader].len() < self[other].len() {
            mem::swap(&mut leader, &mut other);
        }
        trace!("union {other} into {leader}");
        self.unionfind.union_roots(leader, other);
        let absorbed = self.classes[usize::from(other)].take().expect("missing class");
        self.class_count -= 1;
        let class = self.classes[usize::from(leader)].as_mut().expect("missing class");
        class.nodes.extend(absorbed.nodes);
        class.parents.extend(absorbed.parents);
        if let Err(message) = self.analysis.merge(&mut class.data, absorbed.data) {
            self.conflict.get_or_insert(AnalysisConflict { class: leader, message });
        }
        self.worklist.push(leader);
        self.touched.push(leader);
        self.clean = false;
        self.by_op_fresh = false;
        self.stats.unions += 1;
        leader
    }

    /// Restores the congruence, hashcons and analysis invariants. Returns the
    /// number of `repair` calls this rebuild made, or the first analysis
    /// contradiction seen since the previous rebuild.
    pub fn rebuild(&mut self) -> Result<usize, AnalysisConflict> {
        let before = self.stats.repairs;
        self.stats.rebuilds += 1;
        while !self.worklist.is_empty() {
            let mut todo = mem::take(&mut self.worklist);
            for id in todo.iter_mut() {
                *id = self.unionfind.find_mut(*id);
            }
            todo.sort_unstable();
            todo.dedup();
            for id in todo {
                self.repair(id);
            }
        }
        self.rebuild_classes();
        self.clean = true;
        let repairs = self.stats.repairs - before;
        trace!("rebuild: {repairs} repairs");
        match self.conflict.take() {
            Some(conflict) => Err(conflict),
            None => Ok(repairs),
        }
    }

    fn repair(&mut self, id: Id) {
        self.stats.repairs += 1;
        let parents = mem::take(&mut self.class_mut(id).parents);

        // point every parent's canonical form at its canonical class
        for (node, class) in &parents {
            self.memo.remove(node);
            let node = self.canonicalize_mut(node);
            let class = self.unionfind.find_mut(*class);
            self.inserted.push(node.clone());
            self.memo.insert(node, class);
            self.stats.hashcons_updates += 1;
        }

        // deduplicate parents, merging the classes of congruent ones
        let mut deduped: IndexMap<ENode, Id, FxBuildHasher> = IndexMap::default();
        for (node, class) in parents {
            let node = self.canonicalize_mut(&node);
            if let Some(&existing) = deduped.get(&node) {
                self.union(class, existing);
            }
            let class = self.unionfind.find_mut(class);
            deduped.insert(node, class);
        }
        for &class in deduped.values() {
            self.touched.push(class);
        }
        self.class_mut(id).parents.extend(deduped);

        N::modify(self, id);

        // propagate analysis data upwards
        let id = self.find_mut(id);
        let count = self[id].parents.len();
        for i in 0..count {
            let (node, class) = self[id].parents[i].clone();
            let data = N::make(self, &node);
            let class = self.unionfind.find_mut(class);
            let target = self.classes[usize::from(class)].as_mut().expect("missing class");
            match self.analysis.merge(&mut target.data, data) {
                Ok(true) => self.worklist.push(class),
                Ok(false) => {}
                Err(message) => {
                    self.conflict.get_or_insert(AnalysisConflict { class, message });
                }
            }
        }
    }

    // Canonicalises, sorts and deduplicates the node lists of every class
    // touched since the last rebuild, and drops hashcons keys that went stale.
    fn rebuild_classes(&mut self) {
        let mut touched = mem::take(&mut self.touched);
        for id in touched.iter_mut() {
            *id = self.unionfind.find_mut(*id);
        }
        touched.sort_unstable();
        touched.dedup();
        for id in touched {
            let mut nodes = mem::take(&mut self.classes[usize::from(id)].as_mut().expect("missing class").nodes);
            for node in nodes.iter_mut() {
                let canon = self.canonicalize_mut(node);
                if canon != *node {
                    self.memo.remove(node);
                    *node = canon;
                }
                let previous = self.memo.insert(node.clone(), id);
                debug_assert!(
                    previous.is_none_or(|p| self.unionfind.find(p) == id),
                    "congruent node {node} left in two classes"
                );
            }
            nodes.sort_unstable();
            nodes.dedup();
            self.classes[usize::from(id)].as_mut().expect("missing class").nodes = nodes;
        }
        for node in mem::take(&mut self.inserted) {
            if !self.is_canonical(&node) {
                self.memo.remove(&node);
            }
        }
    }

    /// Exhaustively checks the e-graph invariants. Quadratic in the number of
    /// e-nodes; meant for tests.
    pub fn invariant_check(&self) -> Vec<Violation>
    where
        N: Clone,
    {
        let mut out = Vec::new();
        if !self.clean || !self.worklist.is_empty() {
            out.push(Violation::Dirty(format!(
                "{} pending worklist entries",
                self.worklist.len()
            )));
        }

        let all: Vec<(Id, ENode)> = self
            .classes()
            .flat_map(|c| c.nodes.iter().map(move |n| (c.id, n.clone())))
            .collect();

        // congruence, by brute force over all pairs
        for (i, (c1, n1)) in all.iter().enumerate() {
            let n1c = self.canonicalize(n1);
            for (c2, n2) in &all[i + 1..] {
                if self.find(*c1) != self.find(*c2) && n1c == self.canonicalize(n2) {
                    out.push(Violation::Congruence {
                        left: n1.clone(),
                        right: n2.clone(),
                        left_class: *c1,
                        right_class: *c2,
                    });
                }
            }
        }

        // node lists and hashcons
        for class in self.classes() {
            if self.find(class.id) != class.id {
                out.push(Violation::NodeList(class.id, "class id is not canonical".into()));
            }
            for w in class.nodes.windows(2) {
                if w[0] >= w[1] {
                    out.push(Violation::NodeList(
                        class.id,
                        format!("{} and {} out of order or duplicated", w[0], w[1]),
                    ));
                }
            }
            for node in &class.nodes {
                if !self.is_canonical(node) {
                    out.push(Violation::NodeList(class.id, format!("{node} is not canonical")));
                }
                match self.memo.get(node) {
                    None => out.push(Violation::Hashcons(format!("{node} missing"))),
                    Some(&v) if v != class.id => out.push(Violation::Hashcons(format!(
                        "{node} maps to {v}, expected {}",
                        class.id
                    ))),
                    Some(_) => {}
                }
                for &child in &node.children {
                    let child = self.find(child);
                    let present = self[child]
                        .parents
                        .iter()
                        .any(|(p, pc)| self.canonicalize(p) == *node && self.find(*pc) == class.id);
                    if !present {
                        out.push(Violation::Parents(child, format!("missing parent {node}")));
                    }
                }
            }
        }
        if self.memo.len() != all.len() {
            out.push(Violation::Hashcons(format!(
                "{} entries for {} distinct e-nodes",
                self.memo.len(),
                all.len()
            )));
        }
        for (node, &id) in &self.memo {
            if !self.is_canonical(node) {
                out.push(Violation::Hashcons(format!("stale key {node}")));
            }
            if self.find(id) != id {
                out.push(Violation::Hashcons(format!("{node} maps to non-canonical {id}")));
            }
        }

        // analysis: stored data is the join of make over the class
        let mut analysis = self.analysis.clone();
        for class in self.classes() {
            let mut iter = class.nodes.iter();
            let Some(first) = iter.next() else {
                out.push(Violation::NodeList(class.id, "empty class".into()));
                continue;
            };
            let mut joined = N::make(self, first);
            let mut failed = None;
            for node in iter {
                if let Err(e) = analysis.merge(&mut joined, N::make(self, node)) {
                    failed = Some(e);
                }
            }
            if let Some(e) = failed {
                out.push(Violation::Analysis(class.id, format!("join of make failed: {e}")));
            } else if joined != class.data {
                out.push(Violation::Analysis(
                    class.id,
                    format!("stored {:?}, recomputed {:?}", class.data, joined),
                ));
            }
        }

        // analysis: modify is a fixpoint
        let mut probe = self.clone();
        let ids: Vec<Id> = probe.class_ids().collect();
        for id in ids {
            N::modify(&mut probe, id);
        }
        if probe.total_size() != self.total_size()
            || probe.number_of_classes() != self.number_of_classes()
            || probe.number_of_ids() != self.number_of_ids()
        {
            out.push(Violation::Analysis(
                Id::from(0usize),
                "modify changed the graph on a rebuilt e-graph".into(),
            ));
        }
        out
    }

    /// One line per canonical class: `<id>: {node, node, ...} data=<data>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for class in self.classes() {
            let nodes: Vec<String> = class.nodes.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "{}: {{{}}} data={:?}", class.id, nodes.join(", "), class.data);
        }
        s
    }

    /// A JSON document with the union-find parents and every class's
    /// e-nodes. Analysis data is not included.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct JsonNode {
            op: String,
            children: Vec<Id>,
        }
        #[derive(Serialize)]
        struct JsonClass {
            id: Id,
            nodes: Vec<JsonNode>,
        }
        #[derive(Serialize)]
        struct JsonEGraph {
            unionfind: Vec<Id>,
            classes: Vec<JsonClass>,
        }
        let doc = JsonEGraph {
            unionfind: self.unionfind.parents().to_vec(),
            classes: self
                .classes()
                .map(|c| JsonClass {
                    id: c.id,
                    nodes: c
                        .nodes
                        .iter()
                        .map(|n| JsonNode {
                            op: n.op.to_string(),
                            children: n.children.to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("e-graph serialises")
    }
}

impl<N: Analysis> Index<Id> for EGraph<N> {
    type Output = EClass<N::Data>;

    fn index(&self, id: Id) -> &Self::Output {
        let id = self.find(id);
        self.classes[usize::from(id)]
            .as_ref()
            .expect("canonical id without class")
    }
}

impl<N: Analysis> fmt::Debug for EGraph<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}
