//! Finite transition systems, state labelings, and quotients.
//!
//! A transition system is a triple `(S, Λ, T)` with finite state set `S`,
//! finite symbol set `Λ`, and transition relation `T ⊆ S × Λ × S`. A labeling
//! `σ : S → L` is *sufficient* when equally labeled states always step to
//! equally labeled states: `σ(s) = σ(q)` and `(s, λ, s') ∈ T` and
//! `(q, λ, q') ∈ T` imply `σ(s') = σ(q')`. The definition is read literally,
//! so `s = q` is allowed: a state whose `λ`-successors carry two different
//! labels already violates sufficiency.
//!
//! Quotienting a labeled system collapses each label class to a single state.
//! For deterministic full systems the quotient is deterministic if and only
//! if the labeling is sufficient; [`check_determinism`](TransitionSystem::check_determinism)
//! on the quotient is the cheap way to see a labeling fail.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::partition::{Labeling, Partition};

pub type StateId = usize;
pub type SymbolId = usize;
pub type LabelId = usize;

/// A finite transition system with named states and symbols.
///
/// Transitions are stored sorted by `(source, symbol, target)` with
/// duplicates removed, so equal systems compare equal structurally and
/// serialize byte-identically. Determinism and fullness are computed once at
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    state_names: Vec<String>,
    symbol_names: Vec<String>,
    transitions: Vec<(StateId, SymbolId, StateId)>,
    deterministic: bool,
    full: bool,
}

impl TransitionSystem {
    pub fn new(
        state_names: Vec<String>,
        symbol_names: Vec<String>,
        mut transitions: Vec<(StateId, SymbolId, StateId)>,
    ) -> Result<Self> {
        let n = state_names.len();
        let m = symbol_names.len();
        for &(s, a, t) in &transitions {
            if s >= n || t >= n {
                return Err(Error::DomainMismatch(format!(
                    "transition ({s},{a},{t}) references a state outside 0..{n}"
                )));
            }
            if a >= m {
                return Err(Error::DomainMismatch(format!(
                    "transition ({s},{a},{t}) references a symbol outside 0..{m}"
                )));
            }
        }
        transitions.sort_unstable();
        transitions.dedup();
        let deterministic = transitions
            .windows(2)
            .all(|w| (w[0].0, w[0].1) != (w[1].0, w[1].1));
        let full = {
            let mut covered = vec![false; n * m.max(1)];
            for &(s, a, _) in &transitions {
                covered[s * m + a] = true;
            }
            m == 0 || covered.iter().all(|&c| c)
        };
        Ok(Self {
            state_names,
            symbol_names,
            transitions,
            deterministic,
            full,
        })
    }

    /// Builds a system with generated names `"0", "1", ...` for states and
    /// symbols.
    pub fn with_counts(
        n_states: usize,
        n_symbols: usize,
        transitions: Vec<(StateId, SymbolId, StateId)>,
    ) -> Result<Self> {
        let state_names = (0..n_states).map(|i| i.to_string()).collect();
        let symbol_names = (0..n_symbols).map(|i| i.to_string()).collect();
        Self::new(state_names, symbol_names, transitions)
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn symbol_count(&self) -> usize {
        self.symbol_names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn symbol_name(&self, a: SymbolId) -> &str {
        &self.symbol_names[a]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.symbol_names
    }

    pub fn transitions(&self) -> &[(StateId, SymbolId, StateId)] {
        &self.transitions
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// All targets of `(s, a)`, in ascending order.
    pub fn successors(&self, s: StateId, a: SymbolId) -> &[(StateId, SymbolId, StateId)] {
        let lo = self.transitions.partition_point(|&t| (t.0, t.1) < (s, a));
        let hi = self
            .transitions
            .partition_point(|&t| (t.0, t.1) <= (s, a));
        &self.transitions[lo..hi]
    }

    /// The unique target of `(s, a)` in a deterministic system, if present.
    pub fn successor(&self, s: StateId, a: SymbolId) -> Option<StateId> {
        self.successors(s, a).first().map(|&(_, _, t)| t)
    }

    /// Whether `(s, a)` has at least one outgoing transition.
    pub fn has_successor(&self, s: StateId, a: SymbolId) -> bool {
        !self.successors(s, a).is_empty()
    }

    /// Predecessor lists per state: `preds[t]` holds `(source, symbol)` pairs,
    /// ascending.
    pub fn predecessors(&self) -> Vec<Vec<(StateId, SymbolId)>> {
        let mut preds = vec![Vec::new(); self.state_count()];
        for &(s, a, t) in &self.transitions {
            preds[t].push((s, a));
        }
        preds
    }

    /// Reports determinism, with the lexicographically smallest witness
    /// `(state, symbol)` and its first two targets when it fails.
    pub fn check_determinism(&self) -> DeterminismVerdict {
        for w in self.transitions.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return DeterminismVerdict::Nondeterministic {
                    state: w[0].0,
                    symbol: w[0].1,
                    target_a: w[0].2,
                    target_b: w[1].2,
                };
            }
        }
        DeterminismVerdict::Deterministic
    }

    /// Reports fullness, with the smallest uncovered `(state, symbol)` pair
    /// when it fails.
    pub fn check_fullness(&self) -> FullnessVerdict {
        let m = self.symbol_count();
        for s in 0..self.state_count() {
            for a in 0..m {
                if !self.has_successor(s, a) {
                    return FullnessVerdict::Missing { state: s, symbol: a };
                }
            }
        }
        FullnessVerdict::Full
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DeterminismVerdict {
    Deterministic,
    Nondeterministic {
        state: StateId,
        symbol: SymbolId,
        target_a: StateId,
        target_b: StateId,
    },
}

impl DeterminismVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, DeterminismVerdict::Deterministic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FullnessVerdict {
    Full,
    Missing { state: StateId, symbol: SymbolId },
}

impl FullnessVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, FullnessVerdict::Full)
    }
}

/// A concrete failure of sufficiency: `state_a` and `state_b` share a label
/// and both step under `symbol`, but to differently labeled successors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficiencyViolation {
    pub state_a: StateId,
    pub state_b: StateId,
    pub symbol: SymbolId,
    pub succ_a: StateId,
    pub succ_b: StateId,
}

impl fmt::Display for SufficiencyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "states {} and {} share a label and step under symbol {} to \
             differently labeled successors {} and {}",
            self.state_a, self.state_b, self.symbol, self.succ_a, self.succ_b
        )
    }
}

impl SufficiencyViolation {
    /// Replays the violation against a labeled system: true when every part
    /// of the claim holds there.
    pub fn holds_in(&self, sys: &LabeledSystem) -> bool {
        let lab = &sys.labeling;
        let ts = &sys.ts;
        self.state_a < ts.state_count()
            && self.state_b < ts.state_count()
            && lab.label_of(self.state_a) == lab.label_of(self.state_b)
            && ts
                .successors(self.state_a, self.symbol)
                .iter()
                .any(|&(_, _, t)| t == self.succ_a)
            && ts
                .successors(self.state_b, self.symbol)
                .iter()
                .any(|&(_, _, t)| t == self.succ_b)
            && lab.label_of(self.succ_a) != lab.label_of(self.succ_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SufficiencyVerdict {
    Sufficient,
    Violation(SufficiencyViolation),
}

impl SufficiencyVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, SufficiencyVerdict::Sufficient)
    }

    pub fn violation(&self) -> Option<&SufficiencyViolation> {
        match self {
            SufficiencyVerdict::Sufficient => None,
            SufficiencyVerdict::Violation(v) => Some(v),
        }
    }
}

/// A transition system together with a total state labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSystem {
    pub ts: TransitionSystem,
    pub labeling: Labeling,
}

impl LabeledSystem {
    pub fn new(ts: TransitionSystem, labeling: Labeling) -> Result<Self> {
        if labeling.domain_size() != ts.state_count() {
            return Err(Error::DomainMismatch(format!(
                "labeling covers {} states but the system has {}",
                labeling.domain_size(),
                ts.state_count()
            )));
        }
        Ok(Self { ts, labeling })
    }

    /// Same system, relabeled by the blocks of `p`.
    pub fn relabeled_by(&self, p: &Partition) -> Result<Self> {
        LabeledSystem::new(self.ts.clone(), p.to_labeling())
    }

    /// Checks sufficiency of the labeling.
    ///
    /// Runs one pass over the transitions grouped by `(source label, symbol)`.
    /// When the labeling fails, the returned witness is the minimum violating
    /// tuple `(state_a, state_b, symbol, succ_a, succ_b)` in lexicographic
    /// order (with `state_a <= state_b`), so reruns and alternative
    /// implementations must agree on it exactly.
    pub fn check_sufficiency(&self) -> SufficiencyVerdict {
        let lab = &self.labeling;
        // Transitions are sorted by (source, symbol, target); grouping by
        // (source label, symbol) preserves ascending source and target order
        // inside each group.
        let mut groups: std::collections::BTreeMap<(LabelId, SymbolId), Vec<(StateId, StateId)>> =
            std::collections::BTreeMap::new();
        for &(s, a, t) in self.ts.transitions() {
            groups.entry((lab.label_of(s), a)).or_default().push((s, t));
        }
        let mut best: Option<SufficiencyViolation> = None;
        for ((_, symbol), g) in &groups {
            let Some(cand) = group_min_violation(lab, *symbol, g) else {
                continue;
            };
            let key = |v: &SufficiencyViolation| (v.state_a, v.state_b, v.symbol, v.succ_a, v.succ_b);
            if best.as_ref().is_none_or(|b| key(&cand) < key(b)) {
                best = Some(cand);
            }
        }
        match best {
            None => SufficiencyVerdict::Sufficient,
            Some(v) => SufficiencyVerdict::Violation(v),
        }
    }

    /// Collapses each label class to one state.
    ///
    /// Block `i` is named after its first member state; the output labeling is
    /// the identity on blocks and keeps the input label names. No sufficiency
    /// check happens here: quotients of insufficient labelings are legal and
    /// simply come out nondeterministic.
    pub fn quotient(&self) -> LabeledSystem {
        let lab = &self.labeling;
        let k = lab.label_count();
        let mut block_names = vec![None::<String>; k];
        for s in 0..self.ts.state_count() {
            let b = lab.label_of(s);
            if block_names[b].is_none() {
                block_names[b] = Some(self.ts.state_name(s).to_string());
            }
        }
        let state_names: Vec<String> = block_names
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.unwrap_or_else(|| format!("B{i}")))
            .collect();
        let mut transitions: Vec<(StateId, SymbolId, StateId)> = self
            .ts
            .transitions()
            .iter()
            .map(|&(s, a, t)| (lab.label_of(s), a, lab.label_of(t)))
            .collect();
        transitions.sort_unstable();
        transitions.dedup();
        let ts = TransitionSystem::new(state_names, self.ts.symbol_names().to_vec(), transitions)
            .expect("quotient transitions are in range by construction");
        let labeling = Labeling::canonical(
            (0..k).collect(),
            self.labeling.label_names().map(|n| n.to_vec()),
        );
        LabeledSystem { ts, labeling }
    }
}

/// Minimum violating tuple inside one `(source label, symbol)` group, if the
/// group's successor labels are not all equal. `g` is ascending by
/// `(source, target)`.
fn group_min_violation(
    lab: &Labeling,
    symbol: SymbolId,
    g: &[(StateId, StateId)],
) -> Option<SufficiencyViolation> {
    let first_label = lab.label_of(g[0].1);
    if g.iter().all(|&(_, t)| lab.label_of(t) == first_label) {
        return None;
    }
    // Some violation exists, and the smallest source in the group is always
    // part of one, so state_a is g[0].0.
    let s0 = g[0].0;
    let s0_targets: Vec<StateId> = g.iter().take_while(|&&(s, _)| s == s0).map(|&(_, t)| t).collect();
    let a_label = lab.label_of(s0_targets[0]);
    if let Some(&q_prime) = s0_targets.iter().find(|&&t| lab.label_of(t) != a_label) {
        // s0 alone branches to two labels.
        return Some(SufficiencyViolation {
            state_a: s0,
            state_b: s0,
            symbol,
            succ_a: s0_targets[0],
            succ_b: q_prime,
        });
    }
    // All of s0's targets carry a_label; the partner is the smallest source
    // with a target labeled differently, and the successor pair is minimized
    // in (succ_a, succ_b) order.
    let &(state_b, _) = g
        .iter()
        .find(|&&(_, t)| lab.label_of(t) != a_label)
        .expect("a differing target exists");
    let succ_b = g
        .iter()
        .filter(|&&(s, t)| s == state_b && lab.label_of(t) != a_label)
        .map(|&(_, t)| t)
        .min()
        .expect("state_b has a differing target");
    Some(SufficiencyViolation {
        state_a: s0,
        state_b,
        symbol,
        succ_a: s0_targets[0],
        succ_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(n: usize, m: usize, tr: &[(usize, usize, usize)]) -> TransitionSystem {
        TransitionSystem::with_counts(n, m, tr.to_vec()).unwrap()
    }

    fn labeled(n: usize, m: usize, tr: &[(usize, usize, usize)], labels: &[usize]) -> LabeledSystem {
        LabeledSystem::new(ts(n, m, tr), Labeling::from_ids(labels.to_vec(), None)).unwrap()
    }

    #[test]
    fn construction_rejects_out_of_range_ids() {
        assert!(TransitionSystem::with_counts(2, 1, vec![(0, 0, 2)]).is_err());
        assert!(TransitionSystem::with_counts(2, 1, vec![(0, 1, 1)]).is_err());
        assert!(TransitionSystem::with_counts(2, 1, vec![(2, 0, 0)]).is_err());
    }

    #[test]
    fn transitions_are_sorted_and_deduped() {
        let t = ts(3, 2, &[(2, 1, 0), (0, 0, 1), (0, 0, 1), (0, 1, 2)]);
        assert_eq!(t.transitions(), &[(0, 0, 1), (0, 1, 2), (2, 1, 0)]);
    }

    #[test]
    fn determinism_witness_is_smallest() {
        let t = ts(3, 2, &[(0, 0, 1), (1, 0, 0), (1, 0, 2), (1, 1, 1), (1, 1, 2)]);
        assert!(!t.is_deterministic());
        assert_eq!(
            t.check_determinism(),
            DeterminismVerdict::Nondeterministic {
                state: 1,
                symbol: 0,
                target_a: 0,
                target_b: 2
            }
        );
    }

    #[test]
    fn fullness_witness_is_smallest_missing_pair() {
        let t = ts(2, 2, &[(0, 0, 1), (0, 1, 1), (1, 1, 0)]);
        assert!(!t.is_full());
        assert_eq!(
            t.check_fullness(),
            FullnessVerdict::Missing { state: 1, symbol: 0 }
        );
        let full = ts(2, 1, &[(0, 0, 1), (1, 0, 0)]);
        assert!(full.check_fullness().holds());
    }

    #[test]
    fn single_state_system_with_no_symbols_is_full_and_deterministic() {
        let t = ts(1, 0, &[]);
        assert!(t.is_full());
        assert!(t.is_deterministic());
    }

    #[test]
    fn sufficiency_constant_labeling_on_strongly_connected_system() {
        // Everything shares one label and every step stays inside it.
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2), (2, 0, 0)], &[0, 0, 0]);
        assert!(sys.check_sufficiency().holds());
    }

    #[test]
    fn sufficiency_identity_labeling_always_holds_on_deterministic_systems() {
        let sys = labeled(3, 2, &[(0, 0, 1), (0, 1, 2), (1, 0, 1), (2, 1, 0)], &[0, 1, 2]);
        assert!(sys.check_sufficiency().holds());
    }

    #[test]
    fn sufficiency_violation_and_minimal_witness() {
        // 0 and 1 share label 0; 0 steps to 1 (label 0), 1 steps to 2 (label 1).
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2), (2, 0, 2)], &[0, 0, 1]);
        let v = match sys.check_sufficiency() {
            SufficiencyVerdict::Violation(v) => v,
            _ => panic!("expected a violation"),
        };
        assert_eq!((v.state_a, v.state_b, v.symbol, v.succ_a, v.succ_b), (0, 1, 0, 1, 2));
        assert!(v.holds_in(&sys));
    }

    #[test]
    fn sufficiency_violation_same_state_branching() {
        // A single nondeterministic state with differently labeled successors
        // violates the definition with state_a == state_b.
        let sys = labeled(3, 1, &[(0, 0, 1), (0, 0, 2)], &[0, 0, 1]);
        let v = sys.check_sufficiency();
        assert_eq!(
            v,
            SufficiencyVerdict::Violation(SufficiencyViolation {
                state_a: 0,
                state_b: 0,
                symbol: 0,
                succ_a: 1,
                succ_b: 2
            })
        );
    }

    #[test]
    fn sufficiency_witness_prefers_smaller_state_a_over_earlier_symbol() {
        // Violation (0, 3, 1) and violation (1, 2, 0): the minimum orders by
        // state_a first, so (0, 3, 1) wins although symbol 0 sorts earlier.
        let sys = labeled(
            6,
            2,
            &[(0, 1, 4), (3, 1, 5), (1, 0, 4), (2, 0, 5), (4, 0, 4), (5, 0, 5)],
            &[0, 0, 0, 0, 1, 2],
        );
        let v = sys.check_sufficiency().violation().copied().unwrap();
        assert_eq!((v.state_a, v.state_b, v.symbol), (0, 3, 1));
    }

    #[test]
    fn quotient_collapses_label_classes() {
        // Two-state cycle labeled identically collapses to a self-loop.
        let sys = labeled(2, 1, &[(0, 0, 1), (1, 0, 0)], &[0, 0]);
        let q = sys.quotient();
        assert_eq!(q.ts.state_count(), 1);
        assert_eq!(q.ts.transitions(), &[(0, 0, 0)]);
        assert!(q.ts.is_deterministic());
    }

    #[test]
    fn quotient_of_insufficient_labeling_is_nondeterministic() {
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2), (2, 0, 2)], &[0, 0, 1]);
        assert!(!sys.check_sufficiency().holds());
        let q = sys.quotient();
        assert!(!q.ts.is_deterministic());
        // Identity labeling distinguishes every state, so on a branching
        // quotient it is insufficient: determinism and sufficiency coincide.
        assert!(!q.check_sufficiency().holds());
    }

    #[test]
    fn quotient_block_names_come_from_first_members() {
        let t = TransitionSystem::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec!["a".into()],
            vec![(0, 0, 1), (1, 0, 2), (2, 0, 0)],
        )
        .unwrap();
        let sys = LabeledSystem::new(t, Labeling::from_ids(vec![0, 1, 0], None)).unwrap();
        let q = sys.quotient();
        assert_eq!(q.ts.state_names(), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn successor_lookup_matches_sorted_ranges() {
        let t = ts(3, 2, &[(0, 0, 1), (0, 0, 2), (0, 1, 0), (2, 1, 1)]);
        let succ: Vec<usize> = t.successors(0, 0).iter().map(|&(_, _, x)| x).collect();
        assert_eq!(succ, vec![1, 2]);
        assert_eq!(t.successor(2, 1), Some(1));
        assert_eq!(t.successor(1, 0), None);
    }
}
