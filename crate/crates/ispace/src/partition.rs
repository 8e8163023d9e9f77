//! State labelings and partitions, with the refinement lattice operations.
//!
//! A labeling and a partition carry the same data, a total map from states
//! to classes, and convert losslessly in both directions. Both are kept in
//! canonical form: class ids are contiguous, 0-based, and assigned by first
//! occurrence in state-id order, so two equal partitions are byte-equal.
//!
//! Partitions of one state set form a lattice under refinement. `a` refines
//! `b` when every block of `a` sits inside a block of `b`; the identity
//! partition refines everything and the constant partition is refined by
//! everything. [`Partition::common_refinement`] is the coarsest partition
//! refining both arguments (blockwise intersection) and
//! [`Partition::common_coarsening`] is the finest partition both refine
//! (union of transitively overlapping blocks).

use serde::{Deserialize, Serialize};

use crate::ts::{LabelId, StateId};

/// A total map from states to label ids, canonicalized, with optional label
/// names riding along.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<LabelId>,
    label_count: usize,
    names: Option<Vec<String>>,
}

impl Labeling {
    /// Canonicalizes arbitrary label ids: classes are renumbered by first
    /// occurrence in state order and `names` (indexed by the *input* ids) are
    /// reordered to match.
    pub fn from_ids(raw: Vec<usize>, names: Option<Vec<String>>) -> Self {
        let mut remap: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut order: Vec<usize> = Vec::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|&v| {
                *remap.entry(v).or_insert_with(|| {
                    order.push(v);
                    order.len() - 1
                })
            })
            .collect();
        let names = names.map(|ns| {
            order
                .iter()
                .map(|&old| ns.get(old).cloned().unwrap_or_else(|| format!("l{old}")))
                .collect()
        });
        Self {
            label_count: order.len(),
            labels,
            names,
        }
    }

    /// Wraps ids that are already canonical (contiguous, first-occurrence
    /// ordered); debug-asserted.
    pub fn canonical(labels: Vec<usize>, names: Option<Vec<String>>) -> Self {
        let lab = Self::from_ids(labels.clone(), names);
        debug_assert_eq!(lab.labels, labels, "ids were not canonical");
        lab
    }

    /// Every state mapped to one label.
    pub fn constant(n: usize) -> Self {
        Self::from_ids(vec![0; n], None)
    }

    /// Every state its own label.
    pub fn identity(n: usize) -> Self {
        Self::from_ids((0..n).collect(), None)
    }

    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn label_of(&self, s: StateId) -> LabelId {
        self.labels[s]
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn label_name(&self, l: LabelId) -> Option<&str> {
        self.names.as_ref().map(|n| n[l].as_str())
    }

    /// Label names when present, otherwise the numeric ids as strings.
    pub fn names_or_numeric(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => (0..self.label_count).map(|l| l.to_string()).collect(),
        }
    }

    pub fn to_partition(&self) -> Partition {
        Partition {
            block_of: self.labels.clone(),
            block_count: self.label_count,
        }
    }
}

/// A partition of `{0, .., n-1}` in canonical form: `block_of[s]` is the
/// block id of state `s`, blocks numbered by first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    block_of: Vec<usize>,
    block_count: usize,
}

impl Partition {
    pub fn from_block_ids(raw: Vec<usize>) -> Self {
        Labeling::from_ids(raw, None).to_partition()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_block_ids((0..n).collect())
    }

    pub fn constant(n: usize) -> Self {
        Self::from_block_ids(vec![0; n])
    }

    pub fn domain_size(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self, s: StateId) -> usize {
        self.block_of[s]
    }

    pub fn block_ids(&self) -> &[usize] {
        &self.block_of
    }

    /// Members of each block, ascending inside each block.
    pub fn blocks(&self) -> Vec<Vec<StateId>> {
        let mut blocks = vec![Vec::new(); self.block_count];
        for (s, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(s);
        }
        blocks
    }

    pub fn to_labeling(&self) -> Labeling {
        Labeling {
            labels: self.block_of.clone(),
            label_count: self.block_count,
            names: None,
        }
    }

    /// Whether every block of `self` sits inside a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        assert_eq!(self.domain_size(), other.domain_size());
        let mut image = vec![usize::MAX; self.block_count];
        for s in 0..self.block_of.len() {
            let b = self.block_of[s];
            let target = other.block_of[s];
            if image[b] == usize::MAX {
                image[b] = target;
            } else if image[b] != target {
                return false;
            }
        }
        true
    }

    /// Coarsest partition refining both: blocks are the nonempty pairwise
    /// intersections.
    pub fn common_refinement(&self, other: &Partition) -> Partition {
        assert_eq!(self.domain_size(), other.domain_size());
        let mut remap: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut next = 0usize;
        let block_of: Vec<usize> = (0..self.block_of.len())
            .map(|s| {
                *remap
                    .entry((self.block_of[s], other.block_of[s]))
                    .or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
            })
            .collect();
        Partition {
            block_of,
            block_count: next,
        }
    }

    /// Finest partition that both arguments refine: union-find over states,
    /// joining each state with its block-mates in both partitions.
    pub fn common_coarsening(&self, other: &Partition) -> Partition {
        assert_eq!(self.domain_size(), other.domain_size());
        let n = self.block_of.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        let mut first_in_self = vec![usize::MAX; self.block_count];
        let mut first_in_other = vec![usize::MAX; other.block_count];
        for s in 0..n {
            for (first, b) in [
                (&mut first_in_self, self.block_of[s]),
                (&mut first_in_other, other.block_of[s]),
            ] {
                if first[b] == usize::MAX {
                    first[b] = s;
                } else {
                    union(&mut parent, first[b], s);
                }
            }
        }
        let roots: Vec<usize> = (0..n).map(|s| find(&mut parent, s)).collect();
        Partition::from_block_ids(roots)
    }

    /// Merges blocks `a` and `b`, then recanonicalizes.
    pub fn merge_blocks(&self, a: usize, b: usize) -> Partition {
        let (keep, drop) = (a.min(b), a.max(b));
        let raw: Vec<usize> = self
            .block_of
            .iter()
            .map(|&x| if x == drop { keep } else { x })
            .collect();
        Partition::from_block_ids(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn labeling_canonicalizes_ids_and_names() {
        let lab = Labeling::from_ids(
            vec![2, 0, 2, 1],
            Some(vec!["zero".into(), "one".into(), "two".into()]),
        );
        assert_eq!(lab.labels(), &[0, 1, 0, 2]);
        assert_eq!(
            lab.label_names().unwrap(),
            &["two".to_string(), "zero".to_string(), "one".to_string()]
        );
    }

    #[test]
    fn labeling_partition_round_trip_is_identity() {
        let lab = Labeling::from_ids(vec![0, 1, 1, 0, 2], None);
        assert_eq!(lab.to_partition().to_labeling().labels(), lab.labels());
    }

    #[test]
    fn refines_is_reflexive_and_ordered_by_bounds() {
        let p = Partition::from_block_ids(vec![0, 1, 1, 0]);
        let id = Partition::identity(4);
        let all = Partition::constant(4);
        assert!(p.refines(&p));
        assert!(id.refines(&p));
        assert!(p.refines(&all));
        assert!(!all.refines(&p));
        assert!(!p.refines(&id));
    }

    #[test]
    fn common_refinement_intersects_blocks() {
        let a = Partition::from_block_ids(vec![0, 0, 1, 1]);
        let b = Partition::from_block_ids(vec![0, 1, 0, 1]);
        let meet = a.common_refinement(&b);
        assert_eq!(meet.block_ids(), &[0, 1, 2, 3]);
    }

    #[test]
    fn common_coarsening_merges_overlapping_blocks() {
        let a = Partition::from_block_ids(vec![0, 0, 1, 2]);
        let b = Partition::from_block_ids(vec![0, 1, 1, 2]);
        let join = a.common_coarsening(&b);
        assert_eq!(join.block_ids(), &[0, 0, 0, 1]);
    }

    #[test]
    fn merge_blocks_recanonicalizes() {
        let p = Partition::from_block_ids(vec![0, 1, 2, 1]);
        let merged = p.merge_blocks(0, 2);
        assert_eq!(merged.block_ids(), &[0, 1, 0, 1]);
        assert_eq!(merged.block_count(), 2);
    }

    fn arb_partition(n: usize) -> impl Strategy<Value = Partition> {
        proptest::collection::vec(0..n, n).prop_map(Partition::from_block_ids)
    }

    proptest! {
        #[test]
        fn lattice_ops_are_commutative_idempotent(
            a in arb_partition(6), b in arb_partition(6)
        ) {
            prop_assert_eq!(a.common_refinement(&b), b.common_refinement(&a));
            prop_assert_eq!(a.common_coarsening(&b), b.common_coarsening(&a));
            prop_assert_eq!(a.common_refinement(&a), a.clone());
            prop_assert_eq!(a.common_coarsening(&a), a.clone());
        }

        #[test]
        fn lattice_ops_are_associative(
            a in arb_partition(5), b in arb_partition(5), c in arb_partition(5)
        ) {
            prop_assert_eq!(
                a.common_refinement(&b).common_refinement(&c),
                a.common_refinement(&b.common_refinement(&c))
            );
            prop_assert_eq!(
                a.common_coarsening(&b).common_coarsening(&c),
                a.common_coarsening(&b.common_coarsening(&c))
            );
        }

        #[test]
        fn bounds_and_bound_properties(a in arb_partition(6), b in arb_partition(6)) {
            let id = Partition::identity(6);
            let constant = Partition::constant(6);
            prop_assert!(id.refines(&a));
            prop_assert!(a.refines(&constant));
            let meet = a.common_refinement(&b);
            prop_assert!(meet.refines(&a) && meet.refines(&b));
            let join = a.common_coarsening(&b);
            prop_assert!(a.refines(&join) && b.refines(&join));
        }

        #[test]
        fn refines_is_antisymmetric_and_transitive(
            a in arb_partition(5), b in arb_partition(5), c in arb_partition(5)
        ) {
            if a.refines(&b) && b.refines(&a) {
                prop_assert_eq!(a.clone(), b.clone());
            }
            if a.refines(&b) && b.refines(&c) {
                prop_assert!(a.refines(&c));
            }
        }
    }
}
