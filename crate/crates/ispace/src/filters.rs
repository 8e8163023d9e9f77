//! Deterministic filters derived from sufficient labelings, and the
//! set-valued belief filter over a hidden external state.
//!
//! A [`Dits`] is a deterministic transition system over one of the input
//! views, with an initial state and optional per-state outputs: the minimal
//! machinery needed to track a label online. [`derive_dits`] builds one from
//! a history tree and a sufficient partition by collapsing blocks.
//!
//! When the external model is known but the state is not, the canonical
//! filter tracks the set of states consistent with everything seen so far:
//! [`ndet_filter_step`] is one update (act, intersect with the observation's
//! preimage), and [`reachable_belief_dits`] closes that update into a
//! deterministic filter over reachable belief sets.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::history::{HistoryTree, IoAlphabet, PairSymbol, Trial, View};
use crate::partition::{Labeling, Partition};
use crate::plan::ExternalModel;
use crate::ts::{LabeledSystem, StateId, SymbolId, TransitionSystem};

/// Default cap on explored belief states.
pub const DEFAULT_BELIEF_CAP: usize = 100_000;

/// A deterministic filter: transition system, initial state, optional
/// outputs, over a declared view of an action/observation alphabet.
#[derive(Debug, Clone)]
pub struct Dits {
    pub ts: TransitionSystem,
    pub initial: StateId,
    pub outputs: Option<Labeling>,
    pub view: View,
    pub io: IoAlphabet,
}

impl Dits {
    pub fn new(
        ts: TransitionSystem,
        initial: StateId,
        outputs: Option<Labeling>,
        view: View,
        io: IoAlphabet,
    ) -> Result<Self> {
        if let crate::ts::DeterminismVerdict::Nondeterministic { state, symbol, .. } =
            ts.check_determinism()
        {
            return Err(Error::NondeterministicInput { state, symbol });
        }
        if initial >= ts.state_count() {
            return Err(Error::InvalidInput(format!("initial state {initial} out of range")));
        }
        if let Some(outputs) = &outputs {
            if outputs.domain_size() != ts.state_count() {
                return Err(Error::DomainMismatch(format!(
                    "outputs cover {} states but the filter has {}",
                    outputs.domain_size(),
                    ts.state_count()
                )));
            }
        }
        if ts.symbol_count() != io.symbol_count(view) {
            return Err(Error::AlphabetMismatch(format!(
                "filter has {} symbols but the {view} view of its alphabet needs {}",
                ts.symbol_count(),
                io.symbol_count(view)
            )));
        }
        Ok(Dits { ts, initial, outputs, view, io })
    }

    pub fn with_outputs(mut self, outputs: Labeling) -> Result<Self> {
        if outputs.domain_size() != self.ts.state_count() {
            return Err(Error::DomainMismatch(format!(
                "outputs cover {} states but the filter has {}",
                outputs.domain_size(),
                self.ts.state_count()
            )));
        }
        self.outputs = Some(outputs);
        Ok(self)
    }

    /// One transition, if present.
    pub fn step(&self, state: StateId, symbol: SymbolId) -> Option<StateId> {
        self.ts.successor(state, symbol)
    }

    /// Advances one stage given the stage's action (absent at stage one) and
    /// observation.
    pub fn step_stage(
        &self,
        state: StateId,
        action: Option<SymbolId>,
        observation: SymbolId,
        stage: usize,
    ) -> Result<StateId> {
        let symbol = match self.view {
            View::Observations => observation,
            View::Pairs => match action {
                None => self.io.initial_symbol(observation),
                Some(u) => self.io.pair_symbol(u, observation),
            },
            View::Alternating => {
                return Err(Error::InvalidInput(
                    "filters use the observations or pairs view".into(),
                ))
            }
        };
        self.ts
            .successor(state, symbol)
            .ok_or(Error::MissingTransition { state, symbol, stage })
    }

    /// Replays a trial, returning the visited states including the initial
    /// one (index = stage).
    pub fn run(&self, trial: &Trial) -> Result<Vec<StateId>> {
        let symbols = trial.tree_symbols(&self.io, self.view)?;
        let mut states = vec![self.initial];
        for (k, &sym) in symbols.iter().enumerate() {
            let prev = *states.last().expect("states is never empty");
            let next = self.ts.successor(prev, sym).ok_or(Error::MissingTransition {
                state: prev,
                symbol: sym,
                stage: k + 1,
            })?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn output_name_of(&self, state: StateId) -> Option<&str> {
        self.outputs.as_ref().and_then(|o| o.label_name(o.label_of(state)))
    }
}

/// Collapses a history tree by a sufficient partition into a deterministic
/// filter. The partition's blocks become states named after their first
/// member; the root's block is initial. An insufficient partition is
/// rejected with its witness rather than producing a nondeterministic
/// object.
pub fn derive_dits(tree: &HistoryTree, p: &Partition) -> Result<Dits> {
    if p.domain_size() != tree.ts.state_count() {
        return Err(Error::DomainMismatch(format!(
            "partition covers {} states but the tree has {}",
            p.domain_size(),
            tree.ts.state_count()
        )));
    }
    let relabeled = LabeledSystem::new(tree.ts.clone(), p.to_labeling())?;
    if let Some(v) = relabeled.check_sufficiency().violation() {
        return Err(Error::NotSufficient(*v));
    }
    let quotient = relabeled.quotient();
    debug_assert!(quotient.ts.is_deterministic());
    Dits::new(quotient.ts, p.block_of(0), None, tree.view, tree.io.clone())
}

/// A sorted set of external-state ids: everything still consistent with the
/// history.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState(Vec<StateId>);

impl BeliefState {
    pub fn new(mut members: Vec<StateId>) -> Self {
        members.sort_unstable();
        members.dedup();
        BeliefState(members)
    }

    pub fn singleton(state: StateId) -> Self {
        BeliefState(vec![state])
    }

    pub fn members(&self) -> &[StateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, state: StateId) -> bool {
        self.0.binary_search(&state).is_ok()
    }

    /// The single member, when localization is complete.
    pub fn as_singleton(&self) -> Option<StateId> {
        match self.0.as_slice() {
            [x] => Some(*x),
            _ => None,
        }
    }

    pub fn is_subset_of(&self, other: &BeliefState) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }
}

impl fmt::Display for BeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// Restricts a belief to the states that could have produced the
/// observation.
pub fn belief_observe(model: &ExternalModel, belief: &BeliefState, y: SymbolId) -> Result<BeliefState> {
    let kept: Vec<StateId> = belief
        .members()
        .iter()
        .copied()
        .filter(|&x| model.observation_of(x) == y)
        .collect();
    if kept.is_empty() {
        return Err(Error::InconsistentObservation { observation: y, stage: 0 });
    }
    Ok(BeliefState::new(kept))
}

/// One belief update: image of the belief under the action, intersected with
/// the observation's preimage. Empty results are an error: the model cannot
/// explain the trace.
pub fn ndet_filter_step(
    model: &ExternalModel,
    belief: &BeliefState,
    u: SymbolId,
    y: SymbolId,
) -> Result<BeliefState> {
    if belief.is_empty() {
        return Err(Error::InvalidInput("belief is already empty".into()));
    }
    let image = BeliefState::new(
        belief.members().iter().map(|&x| model.step(x, u)).collect::<Result<Vec<_>>>()?,
    );
    belief_observe(model, &image, y)
}

fn at_stage(err: Error, stage: usize) -> Error {
    match err {
        Error::InconsistentObservation { observation, .. } => {
            Error::InconsistentObservation { observation, stage }
        }
        other => other,
    }
}

/// Runs the set-valued filter over a recorded trial, returning the belief
/// before any event followed by the belief after each stage. The first event
/// must be an observation alone; errors carry the 1-based stage where the
/// trial stopped making sense.
pub fn run_ndet_filter(
    model: &ExternalModel,
    prior: &BeliefState,
    trial: &Trial,
) -> Result<Vec<BeliefState>> {
    trial.validate()?;
    let io = model.io_alphabet();
    let mut beliefs = vec![prior.clone()];
    for (k, (u, y)) in trial.steps().into_iter().enumerate() {
        let y = io.observation_id(y)?;
        let next = match u {
            None if k == 0 => belief_observe(model, &beliefs[k], y),
            None => Err(Error::InvalidInput(format!(
                "stage {}: only the first event may lack an action",
                k + 1
            ))),
            Some(name) => ndet_filter_step(model, &beliefs[k], io.action_id(name)?, y),
        }
        .map_err(|e| at_stage(e, k + 1))?;
        beliefs.push(next);
    }
    Ok(beliefs)
}

/// A deterministic filter over reachable belief states, with the beliefs
/// themselves alongside.
#[derive(Debug, Clone)]
pub struct BeliefDits {
    /// Pairs-view filter; state 0 is the prior (before any observation);
    /// outputs are the localization labels (each singleton unique).
    pub dits: Dits,
    pub beliefs: Vec<BeliefState>,
}

impl BeliefDits {
    pub fn belief_of(&self, state: StateId) -> &BeliefState {
        &self.beliefs[state]
    }
}

/// Closes the belief update into a filter: breadth-first from the prior,
/// one initial edge per consistent first observation, then one edge per
/// consistent action-observation pair. `max_depth` bounds the number of
/// stages explored (`None` runs to the fixpoint); `cap` bounds the state
/// count. Equal beliefs reached along different histories merge, except
/// that the prior keeps its own node.
pub fn reachable_belief_dits(
    model: &ExternalModel,
    prior: &BeliefState,
    max_depth: Option<usize>,
    cap: usize,
) -> Result<BeliefDits> {
    if prior.is_empty() {
        return Err(Error::InvalidInput("the prior belief is empty".into()));
    }
    if let Some(&x) = prior.members().iter().find(|&&x| x >= model.ts.state_count()) {
        return Err(Error::DomainMismatch(format!("belief member {x} is outside the model")));
    }
    let io = model.io_alphabet();
    let ny = io.observation_count();
    let nu = io.action_count();

    let mut beliefs = vec![prior.clone()];
    let mut depth = vec![0usize];
    let mut id_of: BTreeMap<BeliefState, StateId> = BTreeMap::new();
    let mut transitions = Vec::new();
    let mut queue = VecDeque::from([0usize]);

    let intern = |b: BeliefState,
                      d: usize,
                      beliefs: &mut Vec<BeliefState>,
                      depth: &mut Vec<usize>,
                      queue: &mut VecDeque<usize>,
                      id_of: &mut BTreeMap<BeliefState, StateId>|
     -> Result<StateId> {
        if let Some(&id) = id_of.get(&b) {
            return Ok(id);
        }
        let id = beliefs.len();
        if id >= cap {
            return Err(Error::SizeLimit { what: "belief states", needed: id + 1, cap });
        }
        id_of.insert(b.clone(), id);
        beliefs.push(b);
        depth.push(d);
        queue.push_back(id);
        Ok(id)
    };

    while let Some(node) = queue.pop_front() {
        let d = depth[node];
        if max_depth.is_some_and(|limit| d >= limit) {
            continue;
        }
        if node == 0 {
            for y in 0..ny {
                if let Ok(b) = belief_observe(model, &beliefs[0], y) {
                    let id = intern(b, 1, &mut beliefs, &mut depth, &mut queue, &mut id_of)?;
                    transitions.push((0, io.initial_symbol(y), id));
                }
            }
        } else {
            let here = beliefs[node].clone();
            for u in 0..nu {
                for y in 0..ny {
                    if let Ok(b) = ndet_filter_step(model, &here, u, y) {
                        let id =
                            intern(b, d + 1, &mut beliefs, &mut depth, &mut queue, &mut id_of)?;
                        transitions.push((node, io.pair_symbol(u, y), id));
                    }
                }
            }
        }
    }

    let names: Vec<String> = beliefs.iter().map(|b| b.to_string()).collect();
    let ts = TransitionSystem::new(names, io.symbol_names(View::Pairs), transitions)?;
    let outputs = localization_labels(model, &beliefs);
    let dits = Dits::new(ts, 0, Some(outputs), View::Pairs, io)?;
    Ok(BeliefDits { dits, beliefs })
}

/// Localization labeling over beliefs: each singleton gets the unique label
/// named after its member; everything else shares one label.
fn localization_labels(model: &ExternalModel, beliefs: &[BeliefState]) -> Labeling {
    let raw: Vec<usize> = beliefs
        .iter()
        .map(|b| match b.as_singleton() {
            Some(x) => 1 + x,
            None => 0,
        })
        .collect();
    let mut names = vec!["ambiguous".to_string()];
    names.extend(model.ts.state_names().iter().cloned());
    Labeling::from_ids(raw, Some(names))
}

/// Completes the belief filter into a deterministic full task machine whose
/// goal outputs mark the singleton beliefs. Event streams the model cannot
/// produce fall into an absorbing sink labeled like ambiguous beliefs.
pub fn localization_task_machine(
    model: &ExternalModel,
    prior: &BeliefState,
    cap: usize,
) -> Result<crate::history::TaskMachine> {
    let bd = reachable_belief_dits(model, prior, None, cap)?;
    let n = bd.dits.ts.state_count();
    let m = bd.dits.ts.symbol_count();
    let sink = n;
    let mut names: Vec<String> = (0..n).map(|s| bd.dits.ts.state_name(s).to_string()).collect();
    names.push("sink".to_string());
    let mut transitions = bd.dits.ts.transitions().to_vec();
    for s in 0..n {
        for a in 0..m {
            if bd.dits.ts.successor(s, a).is_none() {
                transitions.push((s, a, sink));
            }
        }
    }
    for a in 0..m {
        transitions.push((sink, a, sink));
    }
    let ts = TransitionSystem::new(names, bd.dits.ts.symbol_names().to_vec(), transitions)?;
    let mut raw: Vec<usize> = bd
        .beliefs
        .iter()
        .map(|b| usize::from(b.as_singleton().is_some()))
        .collect();
    raw.push(0);
    let outputs = Labeling::from_ids(raw, Some(vec!["searching".into(), "localized".into()]));
    let goal_label = outputs
        .label_names()
        .into_iter()
        .flatten()
        .position(|n| n == "localized")
        .map(|id| BTreeSet::from([id]));
    crate::history::TaskMachine::new(ts, 0, outputs, View::Pairs, bd.dits.io.clone(), goal_label)
}

fn belief_per_tree_node(
    model: &ExternalModel,
    tree: &HistoryTree,
    prior: &BeliefState,
) -> Result<Vec<Option<BeliefState>>> {
    if tree.view != View::Pairs {
        return Err(Error::InvalidInput(
            "belief labelings need a pairs-view tree".into(),
        ));
    }
    model.io_alphabet().compatible(&tree.io)?;
    let n = tree.ts.state_count();
    let mut belief: Vec<Option<BeliefState>> = vec![None; n];
    belief[0] = Some(prior.clone());
    for node in 1..n {
        let (p, sym) = tree.parent(node).expect("non-root nodes have parents");
        let parent_belief = match &belief[p] {
            Some(b) => b.clone(),
            None => continue,
        };
        let next = match tree.io.decode_pair(sym) {
            PairSymbol::Initial(y) => belief_observe(model, &parent_belief, y),
            PairSymbol::Pair(u, y) => ndet_filter_step(model, &parent_belief, u, y),
        };
        belief[node] = next.ok();
    }
    Ok(belief)
}

/// Labels each pairs-view tree node with the belief its history induces;
/// histories the model cannot produce share the dead label.
pub fn belief_labeling(
    model: &ExternalModel,
    tree: &HistoryTree,
    prior: &BeliefState,
) -> Result<Labeling> {
    let beliefs = belief_per_tree_node(model, tree, prior)?;
    let mut ids: BTreeMap<Option<&BeliefState>, usize> = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    let raw: Vec<usize> = beliefs
        .iter()
        .map(|b| {
            let next = ids.len();
            *ids.entry(b.as_ref()).or_insert_with(|| {
                names.push(match b {
                    Some(b) => b.to_string(),
                    None => "∅".to_string(),
                });
                next
            })
        })
        .collect();
    Ok(Labeling::from_ids(raw, Some(names)))
}

/// Labels each pairs-view tree node with what the history reveals about the
/// state: the state itself once the belief is a singleton, one shared label
/// while ambiguous, and a dead label for impossible histories.
pub fn localization_labeling(
    model: &ExternalModel,
    tree: &HistoryTree,
    prior: &BeliefState,
) -> Result<Labeling> {
    let beliefs = belief_per_tree_node(model, tree, prior)?;
    let raw: Vec<usize> = beliefs
        .iter()
        .map(|b| match b {
            None => 0,
            Some(b) => match b.as_singleton() {
                Some(x) => 2 + x,
                None => 1,
            },
        })
        .collect();
    let mut names = vec!["∅".to_string(), "ambiguous".to_string()];
    names.extend(model.ts.state_names().iter().cloned());
    Ok(Labeling::from_ids(raw, Some(names)))
}
