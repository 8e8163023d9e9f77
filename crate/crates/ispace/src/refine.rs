//! Minimal sufficient refinements of state labelings.
//!
//! The reference algorithm is iterated block splitting in the style of Moore
//! minimization: start from the label classes and split any block whose
//! members disagree on the block of some successor, until stable. On a full
//! deterministic system the fixpoint is the unique coarsest sufficient
//! refinement of the labeling.
//!
//! Truncated systems (history trees cut at a depth) need a policy for states
//! with missing successors:
//!
//! * [`RefinementMode::Strict`] treats a missing `(state, symbol)` successor
//!   as a distinguished `⊥` signature entry. This is sound for the truncated
//!   object exactly as given, at the price of splitting near the cut.
//! * [`RefinementMode::FrontierWildcard`] declares a frontier set whose
//!   members never trigger splits. A frontier state has no signature of its
//!   own; each round it is re-attached to the block its predecessor's block
//!   demands, falling back to a block shared by its `(predecessor block,
//!   symbol, label)` group when no interior witness exists. On history trees
//!   this approximates the untruncated system and is validated by
//!   depth-stability checks.
//!
//! [`brute_force_msr`] is an independent oracle: it enumerates every
//! partition of the state set (restricted growth strings, label-compatible
//! prefixes only) and checks sufficiency pairwise, without sharing any code
//! with the splitting loop.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::ts::{LabeledSystem, StateId, SufficiencyViolation, SymbolId};

/// Hard cap on exhaustive partition enumeration.
pub const BRUTE_FORCE_MAX_STATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefinementMode {
    /// Missing successors are distinguished `⊥` signature entries.
    Strict,
    /// `frontier` members never trigger splits and are re-attached by demand;
    /// `free_labels` members (used when learning from partially labeled
    /// trials) are additionally exempt from the label-class constraint.
    FrontierWildcard {
        frontier: BTreeSet<StateId>,
        free_labels: BTreeSet<StateId>,
    },
}

impl RefinementMode {
    pub fn wildcard(frontier: BTreeSet<StateId>) -> Self {
        RefinementMode::FrontierWildcard {
            frontier,
            free_labels: BTreeSet::new(),
        }
    }

    pub fn kind(&self) -> ModeKind {
        match self {
            RefinementMode::Strict => ModeKind::Strict,
            RefinementMode::FrontierWildcard { .. } => ModeKind::FrontierWildcard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Strict,
    FrontierWildcard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementResult {
    pub partition: Partition,
    /// Literal sufficiency of the result on the input system, re-checked.
    pub sufficient: bool,
    /// Splitting rounds until the partition stopped changing.
    pub iterations: usize,
    pub mode: ModeKind,
}

/// Outcome of refinement on systems that may be nondeterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneralRefinement {
    Refined(RefinementResult),
    /// Some state's `symbol`-successors fell into two blocks that can never
    /// be re-merged (splitting only refines), so no sufficient refinement of
    /// the input labeling exists.
    NoSufficientRefinement {
        state: StateId,
        symbol: SymbolId,
        succ_a: StateId,
        succ_b: StateId,
    },
}

/// Coarsest sufficient refinement of the labeling of a deterministic system.
///
/// Errors with [`Error::NondeterministicInput`] when the system branches;
/// use [`sufficient_refinement_general`] there instead.
pub fn minimal_sufficient_refinement(
    sys: &LabeledSystem,
    mode: &RefinementMode,
) -> Result<RefinementResult> {
    if let crate::ts::DeterminismVerdict::Nondeterministic { state, symbol, .. } =
        sys.ts.check_determinism()
    {
        return Err(Error::NondeterministicInput { state, symbol });
    }
    if let RefinementMode::FrontierWildcard { frontier, free_labels } = mode {
        for set in [frontier, free_labels] {
            if let Some(&s) = set.iter().find(|&&s| s >= sys.ts.state_count()) {
                return Err(Error::DomainMismatch(format!(
                    "wildcard state {s} is outside the state set"
                )));
            }
        }
    }
    let (partition, iterations) = split_to_fixpoint(sys, mode);
    let sufficient = sys
        .relabeled_by(&partition)
        .expect("partition covers the state set")
        .check_sufficiency()
        .holds();
    Ok(RefinementResult {
        partition,
        sufficient,
        iterations,
        mode: mode.kind(),
    })
}

/// One signature split round plus wildcard re-attachment, iterated to a
/// fixpoint. Works on the canonical block-id vector so that round-over-round
/// comparison is plain equality.
fn split_to_fixpoint(sys: &LabeledSystem, mode: &RefinementMode) -> (Partition, usize) {
    let n = sys.ts.state_count();
    let m = sys.ts.symbol_count();
    let empty = BTreeSet::new();
    let (frontier, free_labels) = match mode {
        RefinementMode::Strict => (&empty, &empty),
        RefinementMode::FrontierWildcard { frontier, free_labels } => (frontier, free_labels),
    };
    let preds = sys.ts.predecessors();

    // Free-label states start in a pseudo-class past the real labels so they
    // begin unmixed and get pulled in by demand.
    let pseudo = sys.labeling.label_count();
    let init: Vec<usize> = (0..n)
        .map(|s| {
            if free_labels.contains(&s) {
                pseudo
            } else {
                sys.labeling.label_of(s)
            }
        })
        .collect();
    let mut current = Partition::from_block_ids(init);

    let mut iterations = 0;
    loop {
        iterations += 1;
        let next = split_round(sys, &current, frontier, free_labels, &preds, m);
        if next == current {
            return (current, iterations);
        }
        current = next;
        // Interior splitting is monotone and wildcard re-attachment settles
        // one round after it; n + 2 rounds bound the loop.
        assert!(iterations <= n + 2, "refinement failed to stabilize");
    }
}

fn split_round(
    sys: &LabeledSystem,
    current: &Partition,
    frontier: &BTreeSet<StateId>,
    free_labels: &BTreeSet<StateId>,
    preds: &[Vec<(StateId, SymbolId)>],
    m: usize,
) -> Partition {
    let n = sys.ts.state_count();
    let mut new_block: Vec<Option<usize>> = vec![None; n];
    let mut next_id = 0usize;

    // Interior states split by (current block, successor-block signature).
    // A missing successor is the None entry.
    let mut groups: BTreeMap<(usize, Vec<Option<usize>>), usize> = BTreeMap::new();
    for (s, slot) in new_block.iter_mut().enumerate() {
        if frontier.contains(&s) {
            continue;
        }
        let sig: Vec<Option<usize>> = (0..m)
            .map(|a| sys.ts.successor(s, a).map(|t| current.block_of(t)))
            .collect();
        let id = *groups.entry((current.block_of(s), sig)).or_insert_with(|| {
            next_id += 1;
            next_id - 1
        });
        *slot = Some(id);
    }

    // Interior blocks keep a single source label, recorded for the wildcard
    // label-class constraint.
    let mut block_label: Vec<Option<usize>> = vec![None; next_id];
    for (s, &b) in new_block.iter().enumerate() {
        if let Some(b) = b {
            if !free_labels.contains(&s) {
                block_label[b] = Some(sys.labeling.label_of(s));
            }
        }
    }

    // Frontier states re-attach in ascending state order (on trees this is
    // parents-first): take the block demanded by any predecessor whose block
    // has an interior witness with an interior successor, else fall back to a
    // fresh block shared by the (predecessor block, symbol, label) group.
    let interior_by_block: BTreeMap<usize, Vec<StateId>> = {
        let mut map: BTreeMap<usize, Vec<StateId>> = BTreeMap::new();
        for (s, &b) in new_block.iter().enumerate() {
            if let Some(b) = b {
                map.entry(b).or_default().push(s);
            }
        }
        map
    };
    let mut fallback: BTreeMap<(usize, SymbolId, Option<usize>), usize> = BTreeMap::new();
    for s in 0..n {
        if !frontier.contains(&s) {
            continue;
        }
        let own_label = if free_labels.contains(&s) {
            None
        } else {
            Some(sys.labeling.label_of(s))
        };
        let mut chosen: Option<usize> = None;
        let mut fallback_key: Option<(usize, SymbolId, Option<usize>)> = None;
        for &(p, a) in &preds[s] {
            let Some(pb) = new_block[p] else { continue };
            if fallback_key.is_none() {
                fallback_key = Some((pb, a, own_label));
            }
            // Only interior successors count as demand; blocks minted for
            // other frontier states this round carry no label entry yet.
            let witness = interior_by_block
                .get(&pb)
                .into_iter()
                .flatten()
                .find_map(|&q| match sys.ts.successor(q, a) {
                    Some(t) if !frontier.contains(&t) => new_block[t],
                    _ => None,
                });
            if let Some(demand) = witness {
                let compatible = match own_label {
                    None => true,
                    Some(l) => block_label[demand] == Some(l),
                };
                if compatible {
                    chosen = Some(demand);
                    break;
                }
            }
        }
        let id = chosen.unwrap_or_else(|| {
            let key = fallback_key.unwrap_or((usize::MAX, 0, own_label));
            *fallback.entry(key).or_insert_with(|| {
                next_id += 1;
                next_id - 1
            })
        });
        new_block[s] = Some(id);
    }

    Partition::from_block_ids(new_block.into_iter().map(|b| b.unwrap()).collect())
}

/// Sufficient refinement for systems that may branch: signatures use the
/// *set* of successor blocks per symbol. A state whose successors under one
/// symbol ever occupy two blocks is a permanent conflict (splitting only
/// refines), so the search reports that no sufficient refinement exists.
pub fn sufficient_refinement_general(sys: &LabeledSystem) -> GeneralRefinement {
    let n = sys.ts.state_count();
    let m = sys.ts.symbol_count();
    let mut current = sys.labeling.to_partition();
    let mut iterations = 0;
    loop {
        iterations += 1;
        for s in 0..n {
            for a in 0..m {
                let succs = sys.ts.successors(s, a);
                if succs.len() < 2 {
                    continue;
                }
                let first_block = current.block_of(succs[0].2);
                if let Some(&(_, _, other)) = succs
                    .iter()
                    .find(|&&(_, _, t)| current.block_of(t) != first_block)
                {
                    return GeneralRefinement::NoSufficientRefinement {
                        state: s,
                        symbol: a,
                        succ_a: succs[0].2,
                        succ_b: other,
                    };
                }
            }
        }
        let mut groups: BTreeMap<(usize, Vec<Option<usize>>), usize> = BTreeMap::new();
        let mut next_id = 0usize;
        let raw: Vec<usize> = (0..n)
            .map(|s| {
                let sig: Vec<Option<usize>> = (0..m)
                    .map(|a| {
                        sys.ts
                            .successors(s, a)
                            .first()
                            .map(|&(_, _, t)| current.block_of(t))
                    })
                    .collect();
                *groups.entry((current.block_of(s), sig)).or_insert_with(|| {
                    next_id += 1;
                    next_id - 1
                })
            })
            .collect();
        let next = Partition::from_block_ids(raw);
        if next == current {
            let sufficient = sys
                .relabeled_by(&current)
                .expect("partition covers the state set")
                .check_sufficiency()
                .holds();
            return GeneralRefinement::Refined(RefinementResult {
                partition: current,
                sufficient,
                iterations,
                mode: ModeKind::Strict,
            });
        }
        current = next;
    }
}

/// Worklist (Hopcroft-style) strict-mode refinement for deterministic
/// systems. Produces the identical canonical partition to
/// [`minimal_sufficient_refinement`] with [`RefinementMode::Strict`], usually
/// touching far fewer states per round.
pub fn minimal_sufficient_refinement_fast(sys: &LabeledSystem) -> Result<Partition> {
    if let crate::ts::DeterminismVerdict::Nondeterministic { state, symbol, .. } =
        sys.ts.check_determinism()
    {
        return Err(Error::NondeterministicInput { state, symbol });
    }
    let n = sys.ts.state_count();
    let m = sys.ts.symbol_count();
    let mut preds_by_symbol: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; m];
    for &(s, a, t) in sys.ts.transitions() {
        preds_by_symbol[a][t].push(s);
    }

    let mut block_of: Vec<usize> = sys.labeling.labels().to_vec();
    let mut members: Vec<Vec<StateId>> = sys.labeling.to_partition().blocks();
    let mut worklist: std::collections::VecDeque<(usize, SymbolId)> =
        (0..members.len()).flat_map(|b| (0..m).map(move |a| (b, a))).collect();
    let mut queued: BTreeSet<(usize, SymbolId)> = worklist.iter().copied().collect();

    while let Some((splitter, a)) = worklist.pop_front() {
        queued.remove(&(splitter, a));
        // X = states with an a-successor inside the splitter block.
        let mut x: BTreeSet<StateId> = BTreeSet::new();
        for &t in &members[splitter] {
            x.extend(preds_by_symbol[a][t].iter().copied());
        }
        if x.is_empty() {
            continue;
        }
        let touched: BTreeSet<usize> = x.iter().map(|&s| block_of[s]).collect();
        for b in touched {
            let (inside, outside): (Vec<StateId>, Vec<StateId>) =
                members[b].iter().partition(|s| x.contains(s));
            if inside.is_empty() || outside.is_empty() {
                continue;
            }
            let new_b = members.len();
            members[b] = inside;
            for &s in &outside {
                block_of[s] = new_b;
            }
            members.push(outside);
            for sym in 0..m {
                if queued.insert((new_b, sym)) {
                    worklist.push_back((new_b, sym));
                }
                // Re-splitting the shrunk block keeps the fixpoint exact
                // without the smaller-half bookkeeping.
                if queued.insert((b, sym)) {
                    worklist.push_back((b, sym));
                }
            }
        }
    }
    Ok(Partition::from_block_ids(block_of))
}

/// Result of exhaustive minimization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    /// A sufficient refinement with the fewest blocks (lexicographically
    /// least block-id vector among ties).
    pub partition: Partition,
    /// Whether exactly one partition attains the minimum block count.
    pub unique_minimum: bool,
}

/// Enumerates every partition of the state set that refines the labeling and
/// keeps those that are sufficient, returning one with the fewest blocks.
///
/// Sufficiency is checked pairwise per symbol here, independently of both
/// [`LabeledSystem::check_sufficiency`] and the splitting loop, so this
/// function can serve as an oracle for either. `Ok(None)` means no sufficient
/// refinement of the labeling exists (possible only on nondeterministic
/// input). States are capped at [`BRUTE_FORCE_MAX_STATES`].
pub fn brute_force_msr(sys: &LabeledSystem) -> Result<Option<OracleOutcome>> {
    let n = sys.ts.state_count();
    if n > BRUTE_FORCE_MAX_STATES {
        return Err(Error::TooLarge {
            states: n,
            cap: BRUTE_FORCE_MAX_STATES,
        });
    }
    let labels = sys.labeling.labels();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut best_count = 0usize;

    // Restricted growth strings: assignment[i] <= 1 + max(assignment[..i]).
    // A state may only join a block whose first member shares its label.
    let mut assignment = vec![0usize; n];
    let mut block_label: Vec<usize> = Vec::with_capacity(n);
    fn recurse(
        i: usize,
        labels: &[usize],
        sys: &LabeledSystem,
        assignment: &mut Vec<usize>,
        block_label: &mut Vec<usize>,
        best: &mut Option<(usize, Vec<usize>)>,
        best_count: &mut usize,
    ) {
        if i == labels.len() {
            let blocks = block_label.len();
            if !naive_sufficient(sys, assignment) {
                return;
            }
            match best {
                Some((b, v)) if *b < blocks => {}
                Some((b, v)) if *b == blocks => {
                    *best_count += 1;
                    if assignment < v {
                        *v = assignment.clone();
                    }
                }
                _ => {
                    *best = Some((blocks, assignment.clone()));
                    *best_count = 1;
                }
            }
            return;
        }
        for b in 0..=block_label.len() {
            if b == block_label.len() {
                block_label.push(labels[i]);
                assignment[i] = b;
                recurse(i + 1, labels, sys, assignment, block_label, best, best_count);
                block_label.pop();
            } else if block_label[b] == labels[i] {
                assignment[i] = b;
                recurse(i + 1, labels, sys, assignment, block_label, best, best_count);
            }
        }
    }
    if n == 0 {
        return Ok(Some(OracleOutcome {
            partition: Partition::from_block_ids(vec![]),
            unique_minimum: true,
        }));
    }
    recurse(
        0,
        labels,
        sys,
        &mut assignment,
        &mut block_label,
        &mut best,
        &mut best_count,
    );
    Ok(best.map(|(_, v)| OracleOutcome {
        partition: Partition::from_block_ids(v),
        unique_minimum: best_count == 1,
    }))
}

/// Quadratic literal sufficiency check used only by the oracle.
fn naive_sufficient(sys: &LabeledSystem, block_of: &[usize]) -> bool {
    let transitions = sys.ts.transitions();
    for (i, &(s, a, t)) in transitions.iter().enumerate() {
        for &(s2, a2, t2) in &transitions[i..] {
            if a2 == a && block_of[s] == block_of[s2] && block_of[t] != block_of[t2] {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum MergeObstruction {
    /// The two blocks carry different task labels, so the merged partition no
    /// longer refines the labeling.
    BreaksRefinement,
    /// The merged partition stops being sufficient.
    BreaksSufficiency { witness: SufficiencyViolation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub block_a: usize,
    pub block_b: usize,
    #[serde(flatten)]
    pub obstruction: MergeObstruction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "certificate", rename_all = "snake_case")]
pub enum MinimalityCertificate {
    /// Every pairwise block merge is obstructed. For deterministic automata
    /// this coincides with global minimality (cross-checked by the oracle);
    /// in general it is a necessary condition.
    Minimal { merges: Vec<MergeReport> },
    NotMinimal {
        block_a: usize,
        block_b: usize,
        merged: Partition,
    },
}

impl MinimalityCertificate {
    pub fn is_minimal(&self) -> bool {
        matches!(self, MinimalityCertificate::Minimal { .. })
    }
}

/// Certifies that `p` admits no coarser sufficient refinement reachable by a
/// single block merge: for every unordered block pair, merging either breaks
/// refinement of the task labeling or breaks sufficiency.
///
/// `p` itself must refine the labeling and be sufficient.
pub fn certify_minimality(sys: &LabeledSystem, p: &Partition) -> Result<MinimalityCertificate> {
    if p.domain_size() != sys.ts.state_count() {
        return Err(Error::DomainMismatch(format!(
            "partition covers {} states but the system has {}",
            p.domain_size(),
            sys.ts.state_count()
        )));
    }
    if !p.refines(&sys.labeling.to_partition()) {
        return Err(Error::InvalidInput(
            "partition does not refine the task labeling".into(),
        ));
    }
    let relabeled = sys.relabeled_by(p)?;
    if let Some(v) = relabeled.check_sufficiency().violation() {
        return Err(Error::NotSufficient(*v));
    }
    // Label of each block under the task labeling; well defined because p
    // refines it.
    let mut label_of_block = vec![0usize; p.block_count()];
    for s in 0..p.domain_size() {
        label_of_block[p.block_of(s)] = sys.labeling.label_of(s);
    }
    let mut merges = Vec::new();
    for a in 0..p.block_count() {
        for b in (a + 1)..p.block_count() {
            if label_of_block[a] != label_of_block[b] {
                merges.push(MergeReport {
                    block_a: a,
                    block_b: b,
                    obstruction: MergeObstruction::BreaksRefinement,
                });
                continue;
            }
            let merged = p.merge_blocks(a, b);
            match sys.relabeled_by(&merged)?.check_sufficiency() {
                crate::ts::SufficiencyVerdict::Violation(witness) => {
                    merges.push(MergeReport {
                        block_a: a,
                        block_b: b,
                        obstruction: MergeObstruction::BreaksSufficiency { witness },
                    });
                }
                crate::ts::SufficiencyVerdict::Sufficient => {
                    return Ok(MinimalityCertificate::NotMinimal {
                        block_a: a,
                        block_b: b,
                        merged,
                    });
                }
            }
        }
    }
    Ok(MinimalityCertificate::Minimal { merges })
}

/// Greedily merges block pairs of `p` for as long as the result stays a
/// sufficient refinement of the labeling.
///
/// On full deterministic systems the splitting fixpoint is already
/// pairwise unmergeable and this returns `p` unchanged. On partial systems
/// a missing transition can hide a behavioral equivalence that splitting is
/// too conservative to keep together (states are separated for disagreeing
/// on *whether* a symbol steps, which literal sufficiency never penalizes),
/// so a coarsening pass is needed to reach a partition that
/// [`certify_minimality`] accepts.
///
/// `p` itself must refine the labeling and be sufficient.
pub fn coarsen_to_unmergeable(sys: &LabeledSystem, p: &Partition) -> Result<Partition> {
    if !p.refines(&sys.labeling.to_partition()) {
        return Err(Error::InvalidInput(
            "partition does not refine the task labeling".into(),
        ));
    }
    if let Some(v) = sys.relabeled_by(p)?.check_sufficiency().violation() {
        return Err(Error::NotSufficient(*v));
    }
    let mut current = p.clone();
    'scan: loop {
        let mut label_of_block = vec![0usize; current.block_count()];
        for s in 0..current.domain_size() {
            label_of_block[current.block_of(s)] = sys.labeling.label_of(s);
        }
        for a in 0..current.block_count() {
            for b in (a + 1)..current.block_count() {
                if label_of_block[a] != label_of_block[b] {
                    continue;
                }
                let merged = current.merge_blocks(a, b);
                if sys.relabeled_by(&merged)?.check_sufficiency().holds() {
                    current = merged;
                    continue 'scan;
                }
            }
        }
        return Ok(current);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Labeling;
    use crate::ts::TransitionSystem;

    fn labeled(n: usize, m: usize, tr: &[(usize, usize, usize)], labels: &[usize]) -> LabeledSystem {
        LabeledSystem::new(
            TransitionSystem::with_counts(n, m, tr.to_vec()).unwrap(),
            Labeling::from_ids(labels.to_vec(), None),
        )
        .unwrap()
    }

    /// Four-phase consistency tracker with a redundant parity bit: states are
    /// (phase, bit) with phases start/r/g/trap, symbols r/g. The parity bit
    /// never affects labels or phase flow, so the coarsest sufficient
    /// refinement collapses it: 4 blocks.
    fn redundant_consistency_automaton() -> LabeledSystem {
        let phase = |p: usize, bit: usize| p * 2 + bit;
        let mut tr = Vec::new();
        for bit in 0..2 {
            let flip = 1 - bit;
            // start --r--> last-r, --g--> last-g
            tr.push((phase(0, bit), 0, phase(1, flip)));
            tr.push((phase(0, bit), 1, phase(2, flip)));
            // last-r --r--> trap, --g--> last-g
            tr.push((phase(1, bit), 0, phase(3, flip)));
            tr.push((phase(1, bit), 1, phase(2, flip)));
            // last-g --r--> last-r, --g--> trap
            tr.push((phase(2, bit), 0, phase(1, flip)));
            tr.push((phase(2, bit), 1, phase(3, flip)));
            // trap absorbs
            tr.push((phase(3, bit), 0, phase(3, flip)));
            tr.push((phase(3, bit), 1, phase(3, flip)));
        }
        let labels: Vec<usize> = (0..8).map(|s| usize::from(s / 2 == 3)).collect();
        labeled(8, 2, &tr, &labels)
    }

    #[test]
    fn fixpoint_on_redundant_automaton_has_four_blocks() {
        let sys = redundant_consistency_automaton();
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        assert!(r.sufficient);
        assert_eq!(r.partition.block_count(), 4);
        // Parity bits merged: states 2k and 2k+1 share a block.
        for p in 0..4 {
            assert_eq!(r.partition.block_of(2 * p), r.partition.block_of(2 * p + 1));
        }
    }

    #[test]
    fn oracle_agrees_and_reports_uniqueness_on_redundant_automaton() {
        let sys = redundant_consistency_automaton();
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        let oracle = brute_force_msr(&sys).unwrap().unwrap();
        assert_eq!(oracle.partition, r.partition);
        assert!(oracle.unique_minimum);
    }

    #[test]
    fn result_is_a_fixpoint() {
        let sys = redundant_consistency_automaton();
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        let relabeled = sys.relabeled_by(&r.partition).unwrap();
        let again = minimal_sufficient_refinement(&relabeled, &RefinementMode::Strict).unwrap();
        assert_eq!(again.partition, crate::partition::Partition::identity(8).common_coarsening(&again.partition));
        assert_eq!(again.partition.block_count(), r.partition.block_count());
    }

    #[test]
    fn already_sufficient_labeling_is_returned_unchanged() {
        let sys = labeled(4, 1, &[(0, 0, 1), (1, 0, 0), (2, 0, 3), (3, 0, 2)], &[0, 1, 0, 1]);
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        assert_eq!(r.partition, sys.labeling.to_partition());
        assert!(r.sufficient);
    }

    #[test]
    fn nondeterministic_input_is_rejected() {
        let sys = labeled(2, 1, &[(0, 0, 0), (0, 0, 1)], &[0, 0]);
        assert!(matches!(
            minimal_sufficient_refinement(&sys, &RefinementMode::Strict),
            Err(Error::NondeterministicInput { state: 0, symbol: 0 })
        ));
    }

    #[test]
    fn strict_mode_distinguishes_missing_successors() {
        // 0 and 1 share a label; 1 lacks the a-successor. Strict splits them.
        let sys = labeled(3, 1, &[(0, 0, 2), (2, 0, 2)], &[0, 0, 1]);
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        assert_ne!(r.partition.block_of(0), r.partition.block_of(1));
        assert!(r.sufficient);
    }

    #[test]
    fn wildcard_mode_reattaches_frontier_states_by_demand() {
        // Chain 0 -a-> 1 -a-> 2 with 2 on the frontier: everything stays one
        // block, matching the unbounded chain.
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2)], &[0, 0, 0]);
        let mode = RefinementMode::wildcard([2].into());
        let r = minimal_sufficient_refinement(&sys, &mode).unwrap();
        assert_eq!(r.partition.block_count(), 1);
        assert!(r.sufficient);
        // Strict on the same system splits the chain by distance to the cut.
        let strict = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        assert_eq!(strict.partition.block_count(), 3);
    }

    #[test]
    fn wildcard_frontier_state_with_mismatched_label_falls_back() {
        // Frontier state 2 is labeled differently from the demanded block, so
        // it must not be pulled across its label class.
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2)], &[0, 0, 1]);
        let mode = RefinementMode::wildcard([2].into());
        let r = minimal_sufficient_refinement(&sys, &mode).unwrap();
        assert_ne!(r.partition.block_of(2), r.partition.block_of(0));
    }

    #[test]
    fn general_refinement_matches_deterministic_path_on_deterministic_input() {
        let sys = redundant_consistency_automaton();
        let strict = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        match sufficient_refinement_general(&sys) {
            GeneralRefinement::Refined(r) => assert_eq!(r.partition, strict.partition),
            other => panic!("expected refinement, got {other:?}"),
        }
    }

    #[test]
    fn general_refinement_reports_permanent_conflicts() {
        // State 0 branches under symbol 0 to states labeled apart by the task
        // labeling; no sufficient refinement can exist.
        let sys = labeled(3, 1, &[(0, 0, 1), (0, 0, 2), (1, 0, 1), (2, 0, 2)], &[0, 1, 2]);
        match sufficient_refinement_general(&sys) {
            GeneralRefinement::NoSufficientRefinement { state: 0, symbol: 0, .. } => {}
            other => panic!("expected no sufficient refinement, got {other:?}"),
        }
        assert_eq!(brute_force_msr(&sys).unwrap(), None);
    }

    #[test]
    fn general_refinement_handles_benign_nondeterminism() {
        // Branching whose targets share labels is fine.
        let sys = labeled(4, 1, &[(0, 0, 2), (0, 0, 3), (1, 0, 2), (2, 0, 2), (3, 0, 3)], &[0, 0, 1, 1]);
        match sufficient_refinement_general(&sys) {
            GeneralRefinement::Refined(r) => {
                assert!(r.sufficient);
                assert!(r.partition.refines(&sys.labeling.to_partition()));
            }
            other => panic!("expected refinement, got {other:?}"),
        }
    }

    #[test]
    fn fast_path_matches_reference_on_seeded_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..200 {
            let n = rng.gen_range(2..=9);
            let m = rng.gen_range(1..=3);
            let mut tr = Vec::new();
            for s in 0..n {
                for a in 0..m {
                    // Drop ~1/5 of transitions so partial systems are covered.
                    if rng.gen_range(0..5) > 0 {
                        tr.push((s, a, rng.gen_range(0..n)));
                    }
                }
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let sys = labeled(n, m, &tr, &labels);
            let slow = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
            let fast = minimal_sufficient_refinement_fast(&sys).unwrap();
            assert_eq!(slow.partition, fast, "case {case}");
        }
    }

    #[test]
    fn oracle_equivalence_on_seeded_random_automata() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for case in 0..60 {
            let n = rng.gen_range(2..=7);
            let m = rng.gen_range(1..=2);
            let mut tr = Vec::new();
            for s in 0..n {
                for a in 0..m {
                    tr.push((s, a, rng.gen_range(0..n)));
                }
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let sys = labeled(n, m, &tr, &labels);
            let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
            let oracle = brute_force_msr(&sys).unwrap().unwrap();
            assert_eq!(r.partition, oracle.partition, "case {case}");
            assert!(oracle.unique_minimum, "case {case}: full deterministic systems have a unique minimum");
        }
    }

    #[test]
    fn refinement_is_invariant_under_state_permutation() {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(1..=2);
            let mut tr = Vec::new();
            for s in 0..n {
                for a in 0..m {
                    tr.push((s, a, rng.gen_range(0..n)));
                }
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let sys = labeled(n, m, &tr, &labels);
            let base = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();

            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let tr2: Vec<_> = tr.iter().map(|&(s, a, t)| (perm[s], a, perm[t])).collect();
            let mut labels2 = vec![0; n];
            for s in 0..n {
                labels2[perm[s]] = labels[s];
            }
            let sys2 = labeled(n, m, &tr2, &labels2);
            let permuted = minimal_sufficient_refinement(&sys2, &RefinementMode::Strict).unwrap();
            // Same blocks after mapping back through the permutation.
            let pulled: Vec<usize> = (0..n).map(|s| permuted.partition.block_of(perm[s])).collect();
            assert_eq!(Partition::from_block_ids(pulled), base.partition);
        }
    }

    #[test]
    fn monotonicity_finer_labelings_give_finer_refinements() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(1..=2);
            let mut tr = Vec::new();
            for s in 0..n {
                for a in 0..m {
                    tr.push((s, a, rng.gen_range(0..n)));
                }
            }
            let coarse: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            // Refine each coarse class by an extra random bit.
            let fine: Vec<usize> = coarse.iter().map(|&l| l * 2 + rng.gen_range(0..2)).collect();
            let sys_coarse = labeled(n, m, &tr, &coarse);
            let sys_fine = labeled(n, m, &tr, &fine);
            let rc = minimal_sufficient_refinement(&sys_coarse, &RefinementMode::Strict).unwrap();
            let rf = minimal_sufficient_refinement(&sys_fine, &RefinementMode::Strict).unwrap();
            assert!(rf.partition.refines(&rc.partition));
        }
    }

    #[test]
    fn certificate_on_redundant_automaton() {
        let sys = redundant_consistency_automaton();
        let r = minimal_sufficient_refinement(&sys, &RefinementMode::Strict).unwrap();
        let cert = certify_minimality(&sys, &r.partition).unwrap();
        let MinimalityCertificate::Minimal { merges } = cert else {
            panic!("expected a minimal certificate");
        };
        assert_eq!(merges.len(), 4 * 3 / 2);
        for m in &merges {
            let trap_block = r.partition.block_of(6);
            let involves_trap = m.block_a == trap_block || m.block_b == trap_block;
            match (&m.obstruction, involves_trap) {
                (MergeObstruction::BreaksRefinement, true) => {}
                (MergeObstruction::BreaksSufficiency { witness }, false) => {
                    let merged = r.partition.merge_blocks(m.block_a, m.block_b);
                    assert!(witness.holds_in(&sys.relabeled_by(&merged).unwrap()));
                }
                other => panic!("unexpected obstruction shape: {other:?}"),
            }
        }
    }

    #[test]
    fn certificate_flags_mergeable_partitions() {
        // Identity partition on a two-state cycle with a constant labeling is
        // sufficient but not minimal.
        let sys = labeled(2, 1, &[(0, 0, 1), (1, 0, 0)], &[0, 0]);
        let cert = certify_minimality(&sys, &Partition::identity(2)).unwrap();
        assert!(matches!(
            cert,
            MinimalityCertificate::NotMinimal { block_a: 0, block_b: 1, .. }
        ));
    }

    #[test]
    fn certificate_rejects_insufficient_partitions() {
        let sys = labeled(3, 1, &[(0, 0, 1), (1, 0, 2), (2, 0, 2)], &[0, 0, 1]);
        let err = certify_minimality(&sys, &sys.labeling.to_partition());
        assert!(matches!(err, Err(Error::NotSufficient(_))));
    }

    #[test]
    fn oracle_rejects_oversized_instances() {
        let tr: Vec<_> = (0..11).map(|s| (s, 0, (s + 1) % 11)).collect();
        let sys = labeled(11, 1, &tr, &[0; 11]);
        assert!(matches!(brute_force_msr(&sys), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn coarsening_is_identity_on_full_systems() {
        for seed in 0..20 {
            let ts = crate::worlds::random_automaton(6, 2, seed).unwrap();
            let labels = crate::worlds::random_labeling(6, 2, seed + 900).unwrap();
            let sys = LabeledSystem::new(ts, labels).unwrap();
            let p = minimal_sufficient_refinement(&sys, &RefinementMode::Strict)
                .unwrap()
                .partition;
            assert_eq!(coarsen_to_unmergeable(&sys, &p).unwrap(), p);
        }
    }

    #[test]
    fn coarsening_finds_merges_splitting_misses_on_partial_systems() {
        // States 0 and 1 disagree on whether symbol 0 steps at all, which
        // the splitting signature separates; literal sufficiency does not,
        // so they can share a block.
        let sys = labeled(
            3,
            2,
            &[(0, 0, 2), (0, 1, 0), (1, 1, 1), (2, 0, 2), (2, 1, 2)],
            &[0, 0, 1],
        );
        let split = minimal_sufficient_refinement(&sys, &RefinementMode::Strict)
            .unwrap()
            .partition;
        assert_eq!(split.block_count(), 3);
        let coarse = coarsen_to_unmergeable(&sys, &split).unwrap();
        assert_eq!(coarse.block_count(), 2);
        assert_eq!(coarse.block_of(0), coarse.block_of(1));
        assert!(sys.relabeled_by(&coarse).unwrap().check_sufficiency().holds());
        assert!(certify_minimality(&sys, &coarse).unwrap().is_minimal());
        assert!(coarse.refines(&sys.labeling.to_partition()));
    }
}
