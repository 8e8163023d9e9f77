//! Histories, truncated history trees, task machines, and learning filters
//! from recorded trials.
//!
//! A history records what an observer has seen: an initial condition, then
//! an observation, then alternating actions and observations. The set of all
//! histories is infinite; [`build_history_tree`] materializes it up to a
//! depth as a tree-shaped transition system whose edges carry either bare
//! observations (the view of an observer who cannot see actions) or
//! action-observation pairs (the view of the acting robot). The deepest
//! nodes form the frontier, which the refinement module may treat as
//! wildcards to approximate the untruncated space.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::filters::Dits;
use crate::partition::Labeling;
use crate::refine::{minimal_sufficient_refinement, RefinementMode, RefinementResult};
use crate::ts::{LabelId, StateId, SymbolId, TransitionSystem};

/// Default cap on materialized tree nodes.
pub const DEFAULT_TREE_CAP: usize = 1_000_000;

/// How symbols are presented to a tree, machine, or filter.
///
/// * `Observations`: bare observations; actions are invisible.
/// * `Pairs`: an initial observation, then one composite symbol per
///   action-observation pair.
/// * `Alternating`: actions and observations as separate symbols in turn
///   (machines only; trees always use one of the first two).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum View {
    Observations,
    Pairs,
    Alternating,
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            View::Observations => write!(f, "observations"),
            View::Pairs => write!(f, "pairs"),
            View::Alternating => write!(f, "alternating"),
        }
    }
}

/// Named action and observation alphabets shared by trees, machines, trials,
/// and filters. Symbol ids for each view are fixed functions of the sizes:
///
/// * observations view: observation ids as given;
/// * pairs view: ids `0..|Y|` are the initial observations, then pair
///   `(u, y)` has id `|Y| + u*|Y| + y`;
/// * alternating view: action ids as given, then observation `y` has id
///   `|U| + y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoAlphabet {
    actions: Vec<String>,
    observations: Vec<String>,
}

impl IoAlphabet {
    pub fn new(actions: Vec<String>, observations: Vec<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput("at least one observation is required".into()));
        }
        Ok(IoAlphabet { actions, observations })
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn observation_names(&self) -> &[String] {
        &self.observations
    }

    pub fn action_id(&self, name: &str) -> Result<SymbolId> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::AlphabetMismatch(format!("unknown action {name:?}")))
    }

    pub fn observation_id(&self, name: &str) -> Result<SymbolId> {
        self.observations
            .iter()
            .position(|o| o == name)
            .ok_or_else(|| Error::AlphabetMismatch(format!("unknown observation {name:?}")))
    }

    pub fn symbol_count(&self, view: View) -> usize {
        match view {
            View::Observations => self.observations.len(),
            View::Pairs => self.observations.len() * (1 + self.actions.len()),
            View::Alternating => self.actions.len() + self.observations.len(),
        }
    }

    pub fn symbol_names(&self, view: View) -> Vec<String> {
        match view {
            View::Observations => self.observations.clone(),
            View::Pairs => {
                let mut names = self.observations.clone();
                for u in &self.actions {
                    for y in &self.observations {
                        names.push(format!("{u},{y}"));
                    }
                }
                names
            }
            View::Alternating => {
                let mut names = self.actions.clone();
                names.extend(self.observations.iter().cloned());
                names
            }
        }
    }

    /// Pairs-view id of the initial observation `y`.
    pub fn initial_symbol(&self, y: SymbolId) -> SymbolId {
        debug_assert!(y < self.observations.len());
        y
    }

    /// Pairs-view id of the composite symbol `(u, y)`.
    pub fn pair_symbol(&self, u: SymbolId, y: SymbolId) -> SymbolId {
        debug_assert!(u < self.actions.len() && y < self.observations.len());
        self.observations.len() + u * self.observations.len() + y
    }

    /// Decomposes a pairs-view symbol id.
    pub fn decode_pair(&self, sym: SymbolId) -> PairSymbol {
        let ny = self.observations.len();
        if sym < ny {
            PairSymbol::Initial(sym)
        } else {
            let rest = sym - ny;
            PairSymbol::Pair(rest / ny, rest % ny)
        }
    }

    /// Requires both alphabets to match exactly.
    pub fn compatible(&self, other: &IoAlphabet) -> Result<()> {
        self.compatible_actions(other)?;
        self.compatible_observations(other)
    }

    pub(crate) fn compatible_observations(&self, other: &IoAlphabet) -> Result<()> {
        if self.observations != other.observations {
            return Err(Error::AlphabetMismatch(
                "observation alphabets differ".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn compatible_actions(&self, other: &IoAlphabet) -> Result<()> {
        if self.actions != other.actions {
            return Err(Error::AlphabetMismatch("action alphabets differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSymbol {
    Initial(SymbolId),
    Pair(SymbolId, SymbolId),
}

/// What was known before the first observation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Model-free: nothing.
    #[default]
    Unknown,
    /// A known starting state of some external model.
    State(StateId),
    /// A known set of possible starting states, sorted.
    Set(Vec<StateId>),
}

/// One history: the initial condition, then entries `(u_k, y_{k+1})` where
/// the first entry's action is always absent (nothing was done before the
/// first observation) and later actions are absent exactly when the observer
/// cannot see them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryState {
    init: InitialCondition,
    events: Vec<(Option<SymbolId>, SymbolId)>,
}

impl HistoryState {
    pub fn root(init: InitialCondition) -> Self {
        HistoryState { init, events: Vec::new() }
    }

    /// Number of observations recorded.
    pub fn stage(&self) -> usize {
        self.events.len()
    }

    pub fn init(&self) -> &InitialCondition {
        &self.init
    }

    pub fn events(&self) -> &[(Option<SymbolId>, SymbolId)] {
        &self.events
    }

    pub fn observations(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.events.iter().map(|&(_, y)| y)
    }

    /// Appends one action-observation step. The action must be absent at
    /// stage zero (nothing precedes the first observation) and may be absent
    /// later only for observation-only histories.
    pub fn extend(&self, action: Option<SymbolId>, observation: SymbolId) -> Result<HistoryState> {
        if self.events.is_empty() && action.is_some() {
            return Err(Error::InvalidInput(
                "the first observation cannot be preceded by an action".into(),
            ));
        }
        if let Some((prev, _)) = self.events.last() {
            if prev.is_some() != action.is_some() && !self.events.is_empty() && self.events.len() > 1
            {
                return Err(Error::InvalidInput(
                    "histories must record actions uniformly after the first stage".into(),
                ));
            }
        }
        let mut events = self.events.clone();
        events.push((action, observation));
        Ok(HistoryState { init: self.init.clone(), events })
    }

    /// Renders the history with names, `ε` when empty.
    pub fn format(&self, io: &IoAlphabet) -> String {
        if self.events.is_empty() {
            return "ε".into();
        }
        let parts: Vec<String> = self
            .events
            .iter()
            .map(|&(u, y)| match u {
                None => io.observations[y].clone(),
                Some(u) => format!("{},{}", io.actions[u], io.observations[y]),
            })
            .collect();
        parts.join(".")
    }
}

/// Extends a history by one stage; the root extends with a bare observation.
pub fn hist_transition(
    history: &HistoryState,
    action: Option<SymbolId>,
    observation: SymbolId,
) -> Result<HistoryState> {
    history.extend(action, observation)
}

/// All histories up to a depth, as a tree-shaped transition system. Node 0
/// is the empty history; nodes are numbered breadth-first with children in
/// symbol order, so equal parameters rebuild the identical object.
#[derive(Debug, Clone)]
pub struct HistoryTree {
    pub ts: TransitionSystem,
    pub view: View,
    pub io: IoAlphabet,
    pub init: InitialCondition,
    /// Largest stage present.
    pub depth: usize,
    histories: Vec<HistoryState>,
    parent: Vec<Option<(StateId, SymbolId)>>,
    frontier: BTreeSet<StateId>,
}

impl HistoryTree {
    pub fn history(&self, node: StateId) -> &HistoryState {
        &self.histories[node]
    }

    pub fn parent(&self, node: StateId) -> Option<(StateId, SymbolId)> {
        self.parent[node]
    }

    /// Nodes at the cut depth (or trial leaves): states whose successors were
    /// truncated away rather than genuinely absent.
    pub fn frontier(&self) -> &BTreeSet<StateId> {
        &self.frontier
    }

    pub fn node_count(&self) -> usize {
        self.ts.state_count()
    }

    /// Wildcard refinement mode for this tree's frontier.
    pub fn wildcard_mode(&self) -> RefinementMode {
        RefinementMode::wildcard(self.frontier.clone())
    }

    /// Node reached by a symbol path from the root, if present.
    pub fn node_at(&self, path: &[SymbolId]) -> Option<StateId> {
        let mut node = 0;
        for &sym in path {
            node = self.ts.successor(node, sym)?;
        }
        Some(node)
    }

    /// Rebuilds a tree from a stored transition system. Node 0 must be the
    /// root and every other node must have exactly one incoming edge from a
    /// lower-numbered node; histories, depth, and the frontier (the leaves)
    /// are recomputed.
    pub fn from_parts(
        ts: TransitionSystem,
        view: View,
        io: IoAlphabet,
        init: InitialCondition,
    ) -> Result<Self> {
        if view == View::Alternating {
            return Err(Error::InvalidInput(
                "history trees use the observations or pairs view".into(),
            ));
        }
        if ts.symbol_count() != io.symbol_count(view) {
            return Err(Error::AlphabetMismatch(format!(
                "the tree has {} symbols but the {view} view needs {}",
                ts.symbol_count(),
                io.symbol_count(view)
            )));
        }
        let n = ts.state_count();
        let mut parent: Vec<Option<(StateId, SymbolId)>> = vec![None; n];
        let mut has_out = vec![false; n];
        for &(s, a, t) in ts.transitions() {
            has_out[s] = true;
            if t == 0 {
                return Err(Error::InvalidInput("the root has an incoming edge".into()));
            }
            if s >= t {
                return Err(Error::InvalidInput(
                    "tree nodes must be numbered parents-first".into(),
                ));
            }
            if parent[t].is_some() {
                return Err(Error::InvalidInput(format!("node {t} has two parents")));
            }
            parent[t] = Some((s, a));
        }
        let mut histories = vec![HistoryState::root(init.clone())];
        for (t, &par) in parent.iter().enumerate().skip(1) {
            let (p, sym) =
                par.ok_or_else(|| Error::InvalidInput(format!("node {t} is unreachable")))?;
            let (u, y) = match view {
                View::Observations => (None, sym),
                View::Pairs => match io.decode_pair(sym) {
                    PairSymbol::Initial(y) => (None, y),
                    PairSymbol::Pair(u, y) => (Some(u), y),
                },
                View::Alternating => unreachable!(),
            };
            let h = histories[p].extend(u, y)?;
            histories.push(h);
        }
        let depth = histories.iter().map(|h| h.stage()).max().unwrap_or(0);
        let frontier = (0..n).filter(|&s| !has_out[s]).collect();
        Ok(HistoryTree { ts, view, io, init, depth, histories, parent, frontier })
    }
}

fn tree_node_name(parent_name: &str, edge: &str) -> String {
    if parent_name == "ε" {
        edge.to_string()
    } else {
        format!("{parent_name}.{edge}")
    }
}

/// Projected node count of a complete tree, guarding against overflow.
fn complete_tree_size(io: &IoAlphabet, view: View, depth: usize) -> Option<usize> {
    let ny = io.observation_count();
    match view {
        View::Observations => {
            let mut total = 1usize;
            let mut level = 1usize;
            for _ in 0..depth {
                level = level.checked_mul(ny)?;
                total = total.checked_add(level)?;
            }
            Some(total)
        }
        View::Pairs => {
            let branch = io.action_count().checked_mul(ny)?;
            let mut total = 1usize;
            let mut level = ny;
            for _ in 0..depth {
                total = total.checked_add(level)?;
                level = level.checked_mul(branch)?;
            }
            Some(total)
        }
        View::Alternating => None,
    }
}

/// Builds the complete history tree of the given view up to `depth` stages.
pub fn build_history_tree(
    io: &IoAlphabet,
    view: View,
    init: InitialCondition,
    depth: usize,
    cap: usize,
) -> Result<HistoryTree> {
    if depth == 0 {
        return Err(Error::InvalidInput("tree depth must be at least 1".into()));
    }
    if view == View::Alternating {
        return Err(Error::InvalidInput(
            "history trees use the observations or pairs view".into(),
        ));
    }
    if view == View::Pairs && io.action_count() == 0 {
        return Err(Error::InvalidInput(
            "the pairs view requires at least one action".into(),
        ));
    }
    let projected = complete_tree_size(io, view, depth)
        .ok_or(Error::SizeLimit { what: "history tree nodes", needed: usize::MAX, cap })?;
    if projected > cap {
        return Err(Error::SizeLimit { what: "history tree nodes", needed: projected, cap });
    }

    let symbol_names = io.symbol_names(view);
    let mut names = vec!["ε".to_string()];
    let mut histories = vec![HistoryState::root(init.clone())];
    let mut parent: Vec<Option<(StateId, SymbolId)>> = vec![None];
    let mut transitions = Vec::new();
    let mut frontier = BTreeSet::new();

    // Breadth-first, children in symbol order.
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        let h = histories[node].clone();
        if h.stage() == depth {
            frontier.insert(node);
            continue;
        }
        let edges: Vec<(SymbolId, Option<SymbolId>, SymbolId)> = match view {
            View::Observations => (0..io.observation_count()).map(|y| (y, None, y)).collect(),
            View::Pairs => {
                if h.stage() == 0 {
                    (0..io.observation_count())
                        .map(|y| (io.initial_symbol(y), None, y))
                        .collect()
                } else {
                    let mut v = Vec::new();
                    for u in 0..io.action_count() {
                        for y in 0..io.observation_count() {
                            v.push((io.pair_symbol(u, y), Some(u), y));
                        }
                    }
                    v
                }
            }
            View::Alternating => unreachable!(),
        };
        for (sym, u, y) in edges {
            let child = histories.len();
            let child_action = if view == View::Pairs { u } else { None };
            histories.push(h.extend(child_action, y)?);
            names.push(tree_node_name(&names[node], &symbol_names[sym]));
            parent.push(Some((node, sym)));
            transitions.push((node, sym, child));
            queue.push_back(child);
        }
    }
    let ts = TransitionSystem::new(names, symbol_names, transitions)?;
    Ok(HistoryTree { ts, view, io: io.clone(), init, depth, histories, parent, frontier })
}

/// A recorded execution: alternating observation and action events by name,
/// with optional task labels keyed by stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub view: View,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialCondition>,
    /// Entries `["y", name]` or `["u", name]`, starting with an observation.
    pub events: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<usize, String>,
}

impl Trial {
    pub fn new(view: View, events: Vec<(String, String)>) -> Result<Self> {
        let t = Trial { view, init: None, events, labels: BTreeMap::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut expect_obs = true;
        for (i, (kind, _)) in self.events.iter().enumerate() {
            match (kind.as_str(), self.view) {
                ("y", _) if expect_obs => {
                    expect_obs = matches!(self.view, View::Observations);
                }
                ("u", View::Pairs | View::Alternating) if !expect_obs => {
                    expect_obs = true;
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "event {i} ({kind:?}) breaks the observation/action alternation for the {} view",
                        self.view
                    )));
                }
            }
        }
        let stages = self.stage_count();
        if let Some(&k) = self.labels.keys().find(|&&k| k > stages || k == 0) {
            return Err(Error::InvalidInput(format!(
                "label at stage {k} but the trial has stages 1..={stages}"
            )));
        }
        Ok(())
    }

    /// Number of observations.
    pub fn stage_count(&self) -> usize {
        self.events.iter().filter(|(kind, _)| kind == "y").count()
    }

    /// Stagewise `(action, observation)` pairs by name; the first action is
    /// absent, later ones absent only in the observations view.
    pub fn steps(&self) -> Vec<(Option<&str>, &str)> {
        let mut out = Vec::new();
        let mut pending: Option<&str> = None;
        for (kind, name) in &self.events {
            if kind == "u" {
                pending = Some(name.as_str());
            } else {
                out.push((pending.take(), name.as_str()));
            }
        }
        out
    }

    /// Tree-edge symbol ids of this trial under the target view.
    pub fn tree_symbols(&self, io: &IoAlphabet, view: View) -> Result<Vec<SymbolId>> {
        let mut out = Vec::new();
        for (k, (u, y)) in self.steps().into_iter().enumerate() {
            let y = io.observation_id(y)?;
            match view {
                View::Observations => out.push(y),
                View::Pairs => {
                    if k == 0 {
                        out.push(io.initial_symbol(y));
                    } else {
                        let u = u.ok_or_else(|| {
                            Error::AlphabetMismatch(
                                "trial lacks actions but the pairs view needs them".into(),
                            )
                        })?;
                        out.push(io.pair_symbol(io.action_id(u)?, y));
                    }
                }
                View::Alternating => {
                    return Err(Error::InvalidInput(
                        "trials project to the observations or pairs view".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    pub fn to_history(&self, io: &IoAlphabet) -> Result<HistoryState> {
        let mut h = HistoryState::root(self.init.clone().unwrap_or_default());
        for (u, y) in self.steps() {
            let u = match u {
                Some(name) => Some(io.action_id(name)?),
                None => None,
            };
            h = h.extend(u, io.observation_id(y)?)?;
        }
        Ok(h)
    }
}

/// Builds the prefix tree of the trials under the given view, returning the
/// tree and the observed label name per node (root at stage 0 is unlabeled).
/// Conflicting labels on a shared prefix are an error: two executions that
/// produced the same history must carry the same task information.
pub fn tree_from_trials(
    trials: &[Trial],
    io: &IoAlphabet,
    view: View,
) -> Result<(HistoryTree, Vec<Option<String>>)> {
    if trials.is_empty() {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    for t in trials {
        t.validate()?;
    }
    let init = trials[0].init.clone().unwrap_or_default();

    // Collect every prefix path; (len, path) ordering is breadth-first with
    // children in symbol order.
    let mut paths: BTreeSet<(usize, Vec<SymbolId>)> = BTreeSet::new();
    paths.insert((0, Vec::new()));
    let mut labels_by_path: BTreeMap<Vec<SymbolId>, (String, usize)> = BTreeMap::new();
    for (ti, trial) in trials.iter().enumerate() {
        let syms = trial.tree_symbols(io, view)?;
        for k in 1..=syms.len() {
            paths.insert((k, syms[..k].to_vec()));
        }
        for (&stage, name) in &trial.labels {
            let prefix = syms[..stage].to_vec();
            match labels_by_path.get(&prefix) {
                None => {
                    labels_by_path.insert(prefix, (name.clone(), ti));
                }
                Some((existing, _)) if existing == name => {}
                Some((existing, _)) => {
                    return Err(Error::InconsistentTrials {
                        trial: ti,
                        stage,
                        first: existing.clone(),
                        second: name.clone(),
                    });
                }
            }
        }
    }

    let symbol_names = io.symbol_names(view);
    let mut id_of: BTreeMap<Vec<SymbolId>, StateId> = BTreeMap::new();
    let mut names = Vec::new();
    let mut histories = Vec::new();
    let mut parent: Vec<Option<(StateId, SymbolId)>> = Vec::new();
    let mut transitions = Vec::new();
    let mut node_labels = Vec::new();
    let mut has_child = Vec::new();
    let mut depth = 0;
    for (len, path) in &paths {
        let id = names.len();
        id_of.insert(path.clone(), id);
        depth = depth.max(*len);
        if *len == 0 {
            names.push("ε".to_string());
            histories.push(HistoryState::root(init.clone()));
            parent.push(None);
        } else {
            let p = id_of[&path[..len - 1]];
            has_child[p] = true;
            let sym = path[len - 1];
            names.push(tree_node_name(&names[p], &symbol_names[sym]));
            let (u, y) = match view {
                View::Observations => (None, sym),
                View::Pairs => match io.decode_pair(sym) {
                    PairSymbol::Initial(y) => (None, y),
                    PairSymbol::Pair(u, y) => (Some(u), y),
                },
                View::Alternating => unreachable!("rejected by tree_symbols"),
            };
            histories.push(histories[p].extend(u, y)?);
            parent.push(Some((p, sym)));
            transitions.push((p, sym, id));
        }
        node_labels.push(labels_by_path.get(path).map(|(n, _)| n.clone()));
        has_child.push(false);
    }
    let frontier: BTreeSet<StateId> = (0..names.len()).filter(|&s| !has_child[s]).collect();
    let ts = TransitionSystem::new(names, symbol_names, transitions)?;
    Ok((
        HistoryTree { ts, view, io: io.clone(), init, depth, histories, parent, frontier },
        node_labels,
    ))
}

/// A deterministic full automaton that consumes histories under its view and
/// emits a task label per state.
#[derive(Debug, Clone)]
pub struct TaskMachine {
    pub ts: TransitionSystem,
    pub initial: StateId,
    pub outputs: Labeling,
    pub view: View,
    pub io: IoAlphabet,
    /// Output labels that count as reaching the goal, if the task has one.
    pub goal: Option<BTreeSet<LabelId>>,
}

impl TaskMachine {
    pub fn new(
        ts: TransitionSystem,
        initial: StateId,
        outputs: Labeling,
        view: View,
        io: IoAlphabet,
        goal: Option<BTreeSet<LabelId>>,
    ) -> Result<Self> {
        if let crate::ts::DeterminismVerdict::Nondeterministic { state, symbol, .. } =
            ts.check_determinism()
        {
            return Err(Error::NondeterministicInput { state, symbol });
        }
        if let crate::ts::FullnessVerdict::Missing { state, symbol } = ts.check_fullness() {
            return Err(Error::MissingTransition { state, symbol, stage: 0 });
        }
        if initial >= ts.state_count() {
            return Err(Error::InvalidInput(format!("initial state {initial} out of range")));
        }
        if outputs.domain_size() != ts.state_count() {
            return Err(Error::DomainMismatch(format!(
                "outputs cover {} states but the machine has {}",
                outputs.domain_size(),
                ts.state_count()
            )));
        }
        if ts.symbol_count() != io.symbol_count(view) {
            return Err(Error::AlphabetMismatch(format!(
                "machine has {} symbols but the {view} view of its alphabet needs {}",
                ts.symbol_count(),
                io.symbol_count(view)
            )));
        }
        if let Some(goal) = &goal {
            if let Some(&g) = goal.iter().find(|&&g| g >= outputs.label_count()) {
                return Err(Error::InvalidInput(format!("goal label {g} out of range")));
            }
        }
        Ok(TaskMachine { ts, initial, outputs, view, io, goal })
    }

    pub fn output_of(&self, state: StateId) -> LabelId {
        self.outputs.label_of(state)
    }

    pub fn is_goal_output(&self, label: LabelId) -> bool {
        self.goal.as_ref().is_some_and(|g| g.contains(&label))
    }

    fn step(&self, state: StateId, symbol: SymbolId) -> Result<StateId> {
        self.ts
            .successor(state, symbol)
            .ok_or(Error::MissingTransition { state, symbol, stage: 0 })
    }

    /// Advances the machine by one stage given the stage's action (absent at
    /// stage one) and observation, adapting them to the machine's view.
    pub fn step_stage(
        &self,
        state: StateId,
        action: Option<SymbolId>,
        observation: SymbolId,
    ) -> Result<StateId> {
        match self.view {
            View::Observations => self.step(state, observation),
            View::Pairs => match action {
                None => self.step(state, self.io.initial_symbol(observation)),
                Some(u) => self.step(state, self.io.pair_symbol(u, observation)),
            },
            View::Alternating => {
                let mid = match action {
                    None => state,
                    Some(u) => self.step(state, u)?,
                };
                self.step(mid, self.io.action_count() + observation)
            }
        }
    }

    /// Runs the machine over a whole history and returns the final state.
    pub fn run(&self, history: &HistoryState) -> Result<StateId> {
        let mut state = self.initial;
        for (k, &(u, y)) in history.events().iter().enumerate() {
            if u.is_none() && k > 0 && self.view != View::Observations {
                return Err(Error::AlphabetMismatch(format!(
                    "history lacks the action at stage {} but the {} view needs it",
                    k + 1,
                    self.view
                )));
            }
            state = self.step_stage(state, u, y)?;
        }
        Ok(state)
    }
}

/// Task label of a history under a machine.
pub fn apply_task_machine(machine: &TaskMachine, history: &HistoryState) -> Result<LabelId> {
    Ok(machine.output_of(machine.run(history)?))
}

/// Labels every tree node with the machine's output on its history, machine
/// state memoized along tree edges (one step per node).
pub fn label_tree(machine: &TaskMachine, tree: &HistoryTree) -> Result<Labeling> {
    machine.io.compatible_observations(&tree.io)?;
    match (tree.view, machine.view) {
        (View::Observations, View::Pairs | View::Alternating) => {
            return Err(Error::AlphabetMismatch(
                "an observations-only tree cannot drive a machine that needs actions".into(),
            ));
        }
        (_, View::Pairs | View::Alternating) => machine.io.compatible_actions(&tree.io)?,
        _ => {}
    }
    let n = tree.ts.state_count();
    let mut mstate = vec![machine.initial; n];
    let mut raw = vec![0usize; n];
    raw[0] = machine.output_of(machine.initial);
    // Nodes are numbered parents-first.
    for node in 1..n {
        let (p, sym) = tree.parent[node].expect("non-root nodes have parents");
        let (u, y) = match tree.view {
            View::Observations => (None, sym),
            View::Pairs => match tree.io.decode_pair(sym) {
                PairSymbol::Initial(y) => (None, y),
                PairSymbol::Pair(u, y) => (Some(u), y),
            },
            View::Alternating => unreachable!("trees never use the alternating view"),
        };
        mstate[node] = machine.step_stage(mstate[p], u, y)?;
        raw[node] = machine.output_of(mstate[node]);
    }
    Ok(Labeling::from_ids(raw, Some(machine.outputs.names_or_numeric())))
}

/// Which refinement policy a learner applies to unlabeled tree nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnMode {
    /// Unlabeled nodes form their own label class.
    Strict,
    /// Unlabeled nodes and leaves are wildcards attached by demand.
    FrontierWildcard,
}

pub struct LearnedFilter {
    pub dits: Dits,
    pub refinement: RefinementResult,
    pub tree: HistoryTree,
    pub tree_labeling: Labeling,
    /// Tree nodes with no observed label.
    pub unlabeled: BTreeSet<StateId>,
}

/// Learns a deterministic filter from recorded trials: builds their prefix
/// tree, attaches the observed labels, computes the coarsest sufficient
/// refinement, and returns the quotient with per-block output labels.
pub fn learn_dits_from_trials(
    trials: &[Trial],
    io: &IoAlphabet,
    view: View,
    mode: LearnMode,
) -> Result<LearnedFilter> {
    let (tree, node_labels) = tree_from_trials(trials, io, view)?;
    let n = tree.ts.state_count();

    // Observed label names in first-occurrence order, then one extra class
    // for unlabeled nodes.
    let mut name_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    for name in node_labels.iter().flatten() {
        if !name_ids.contains_key(name.as_str()) {
            name_ids.insert(name, names.len());
            names.push(name.clone());
        }
    }
    let bottom = names.len();
    names.push("unlabeled".to_string());
    let raw: Vec<usize> = node_labels
        .iter()
        .map(|l| l.as_ref().map_or(bottom, |n| name_ids[n.as_str()]))
        .collect();
    let unlabeled: BTreeSet<StateId> =
        (0..n).filter(|&s| node_labels[s].is_none()).collect();
    let tree_labeling = Labeling::from_ids(raw, Some(names));
    let labeled = crate::ts::LabeledSystem::new(tree.ts.clone(), tree_labeling.clone())?;

    let refinement_mode = match mode {
        LearnMode::Strict => RefinementMode::Strict,
        LearnMode::FrontierWildcard => RefinementMode::FrontierWildcard {
            frontier: tree.frontier().union(&unlabeled).copied().collect(),
            free_labels: unlabeled.clone(),
        },
    };
    let refinement = minimal_sufficient_refinement(&labeled, &refinement_mode)?;

    let dits = crate::filters::derive_dits(&tree, &refinement.partition)?;
    // Per-block output: the observed label of any labeled member; blocks of
    // purely unlabeled nodes keep the unlabeled class.
    let mut block_raw = vec![usize::MAX; refinement.partition.block_count()];
    for s in 0..n {
        let b = refinement.partition.block_of(s);
        let l = tree_labeling.label_of(s);
        if !unlabeled.contains(&s) {
            if block_raw[b] != usize::MAX && block_raw[b] != l {
                return Err(Error::InvalidInput(format!(
                    "refinement merged differently labeled nodes into block {b}"
                )));
            }
            block_raw[b] = l;
        }
    }
    // The labeling canonicalized ids by first occurrence, so find the
    // unlabeled class through an actual unlabeled node. Every block has a
    // labeled member when no node is unlabeled, so the default never fires.
    let bottom_label = unlabeled.iter().next().map_or(0, |&s| tree_labeling.label_of(s));
    for slot in block_raw.iter_mut() {
        if *slot == usize::MAX {
            *slot = bottom_label;
        }
    }
    let outputs = Labeling::from_ids(block_raw, Some(tree_labeling.names_or_numeric()));
    let dits = dits.with_outputs(outputs)?;

    Ok(LearnedFilter { dits, refinement, tree, tree_labeling, unlabeled })
}

/// Checks that the learned filter replays every trial to its observed labels.
pub fn replay_consistency(filter: &LearnedFilter, trials: &[Trial]) -> Result<()> {
    for (ti, trial) in trials.iter().enumerate() {
        let states = filter.dits.run(trial)?;
        for (&stage, want) in &trial.labels {
            let outputs = filter
                .dits
                .outputs
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("filter has no outputs".into()))?;
            let got = outputs.label_name(outputs.label_of(states[stage])).unwrap_or("?");
            if got != want {
                return Err(Error::InconsistentTrials {
                    trial: ti,
                    stage,
                    first: want.clone(),
                    second: got.to_string(),
                });
            }
        }
    }
    Ok(())
}
