use crate::Id;

/// Parent-pointer union-find over e-class ids.
///
/// Ids are handed out densely and never reused. `find` is read-only;
/// `find_mut` additionally compresses the path it walks.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parents: Vec<Id>,
}

impl UnionFind {
    pub fn make_set(&mut self) -> Id {
        let id = Id::from(self.parents.len());
        self.parents.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    fn parent(&self, id: Id) -> Id {
        self.parents[usize::from(id)]
    }

    pub fn find(&self, mut id: Id) -> Id {
        while id != self.parent(id) {
            id = self.parent(id);
        }
        id
    }

    pub fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while cur != root {
            let next = self.parent(cur);
            self.parents[usize::from(cur)] = root;
            cur = next;
        }
        root
    }

    /// Makes `root` the representative of `other`'s set. Both must be roots.
    pub fn union_roots(&mut self, root: Id, other: Id) -> Id {
        debug_assert_eq!(root, self.parent(root));
        debug_assert_eq!(other, self.parent(other));
        self.parents[usize::from(other)] = root;
        root
    }

    pub(crate) fn parents(&self) -> &[Id] {
        &self.parents
    }
}
