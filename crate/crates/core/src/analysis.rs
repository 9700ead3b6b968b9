//! E-class analyses: a semilattice value per e-class kept up to date by the
//! same worklist that restores congruence.
//!
//! An analysis supplies three hooks. `make` computes the value for a single
//! e-node from its children's values, `merge` joins two values in place and
//! reports whether the destination changed, and `modify` may edit the e-graph
//! in response to a class's value (for instance, adding the literal a class
//! is known to equal). Once the graph is rebuilt, every class's value is the
//! join of `make` over its e-nodes and `modify` is a no-op.

use std::fmt::Debug;

use thiserror::Error;

use crate::{EGraph, ENode, Id, LeafValue};

/// Two values that cannot be joined, e.g. two different constants in one
/// e-class. Holds the diagnostic produced by the analysis.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("analysis contradiction in e-class {class}: {message}")]
pub struct AnalysisConflict {
    pub class: Id,
    pub message: String,
}

pub trait Analysis: Sized + Send + Sync {
    type Data: Debug + Clone + PartialEq + Send + Sync;

    /// The value of a single e-node. Must only read the data of `enode`'s
    /// children.
    fn make(egraph: &EGraph<Self>, enode: &ENode) -> Self::Data;

    /// Joins `from` into `to`, returning whether `to` changed. An `Err`
    /// reports a contradiction; `to` must be left untouched in that case.
    fn merge(&mut self, to: &mut Self::Data, from: Self::Data) -> Result<bool, String>;

    /// Called after a class is created or repaired. May add e-nodes and
    /// union them into `id`. Must be idempotent when nothing else changed.
    #[allow(unused_variables)]
    fn modify(egraph: &mut EGraph<Self>, id: Id) {}

    /// The constant a class is known to equal, if the analysis tracks one.
    /// Used by the `is-const` rule condition.
    #[allow(unused_variables)]
    fn constant(data: &Self::Data) -> Option<LeafValue> {
        None
    }
}

/// The unit analysis: no data, no hooks.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAnalysis;

impl Analysis for NoAnalysis {
    type Data = ();

    fn make(_: &EGraph<Self>, _: &ENode) {}

    fn merge(&mut self, _: &mut (), _: ()) -> Result<bool, String> {
        Ok(false)
    }
}

/// Constant-folding join on optional constants: absent is bottom, and two
/// present constants must agree.
pub fn join_constants(to: &mut Option<LeafValue>, from: Option<LeafValue>) -> Result<bool, String> {
    match (&*to, from) {
        (_, None) => Ok(false),
        (None, Some(y)) => {
            *to = Some(y);
            Ok(true)
        }
        (Some(x), Some(y)) if *x == y => Ok(false),
        (Some(x), Some(y)) => Err(format!("conflicting constants {x} and {y}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn join(mut a: Option<LeafValue>, b: Option<LeafValue>) -> Result<(Option<LeafValue>, bool), String> {
        let changed = join_constants(&mut a, b)?;
        Ok((a, changed))
    }

    #[test]
    fn four_cases() {
        let three = Some(LeafValue::Int(3));
        assert_eq!(join(None, None), Ok((None, false)));
        assert_eq!(join(three, None), Ok((three, false)));
        assert_eq!(join(None, three), Ok((three, true)));
        assert_eq!(join(three, three), Ok((three, false)));
        assert!(join(three, Some(LeafValue::Int(4))).is_err());
    }

    #[test]
    fn conflict_leaves_destination() {
        let mut a = Some(LeafValue::Int(3));
        assert!(join_constants(&mut a, Some(LeafValue::Bool(true))).is_err());
        assert_eq!(a, Some(LeafValue::Int(3)));
    }

    fn arb() -> impl Strategy<Value = Option<LeafValue>> {
        prop::option::of((0i64..3).prop_map(LeafValue::Int))
    }

    proptest! {
        #[test]
        fn semilattice_laws(a in arb(), b in arb(), c in arb()) {
            // idempotent
            prop_assert_eq!(join(a, a).unwrap().0, a);
            // commutative (when defined)
            let ab = join(a, b).map(|r| r.0);
            let ba = join(b, a).map(|r| r.0);
            prop_assert_eq!(ab.is_ok(), ba.is_ok());
            if let (Ok(x), Ok(y)) = (&ab, &ba) { prop_assert_eq!(x, y); }
            // associative (when defined)
            let left = join(a, b).and_then(|(ab, _)| join(ab, c)).map(|r| r.0);
            let right = join(b, c).and_then(|(bc, _)| join(a, bc)).map(|r| r.0);
            prop_assert_eq!(left.is_ok(), right.is_ok());
            if let (Ok(x), Ok(y)) = (left, right) { prop_assert_eq!(x, y); }
        }

        #[test]
        fn changed_flag_is_accurate(a in arb(), b in arb()) {
            if let Ok((r, changed)) = join(a, b) {
                prop_assert_eq!(changed, r != a);
            }
        }
    }
}
