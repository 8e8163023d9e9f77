//! Coupled execution of an internal filter against an external system,
//! reachability, feasibility checking, and policy synthesis.
//!
//! The external system is a deterministic full transition system over
//! actions, with an observation per state. The internal side is a policy
//! filter: a deterministic filter over the pairs view plus an action per
//! state. One stage of the coupled system observes, updates the filter and
//! the task machine, checks the goal, then acts:
//!
//! ```text
//! y_k = h(x_k)    ı_k = φ(ı_{k-1}, ...)    u_k = π(ı_k)    x_{k+1} = f(x_k, u_k)
//! ```
//!
//! The first stage has no preceding action and the initial filter state
//! never acts.
//!
//! [`synthesize_policy`] searches the belief space for a policy that reaches
//! goal-labeled histories whatever the unknown start state turns out to be:
//! a belief node wins if some action makes every consistent observation lead
//! to a winning node.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::filters::{belief_observe, ndet_filter_step, BeliefState, Dits};
use crate::history::{IoAlphabet, TaskMachine, Trial, View};
use crate::partition::Labeling;
use crate::refine::{minimal_sufficient_refinement, RefinementMode};
use crate::ts::{StateId, SymbolId, TransitionSystem};

/// Default cap on synthesis nodes.
pub const DEFAULT_SYNTHESIS_CAP: usize = 100_000;

/// The sensed process: deterministic full dynamics over actions, plus an
/// observation per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalModel {
    pub ts: TransitionSystem,
    /// Observation per state; label names are the observation alphabet.
    pub obs: Labeling,
}

impl ExternalModel {
    pub fn new(ts: TransitionSystem, obs: Labeling) -> Result<Self> {
        if let crate::ts::DeterminismVerdict::Nondeterministic { state, symbol, .. } =
            ts.check_determinism()
        {
            return Err(Error::NondeterministicInput { state, symbol });
        }
        if let crate::ts::FullnessVerdict::Missing { state, symbol } = ts.check_fullness() {
            return Err(Error::MissingTransition { state, symbol, stage: 0 });
        }
        if obs.domain_size() != ts.state_count() {
            return Err(Error::DomainMismatch(format!(
                "observations cover {} states but the model has {}",
                obs.domain_size(),
                ts.state_count()
            )));
        }
        Ok(ExternalModel { ts, obs })
    }

    pub fn observation_of(&self, state: StateId) -> SymbolId {
        self.obs.label_of(state)
    }

    pub fn step(&self, state: StateId, action: SymbolId) -> Result<StateId> {
        self.ts
            .successor(state, action)
            .ok_or(Error::MissingTransition { state, symbol: action, stage: 0 })
    }

    pub fn io_alphabet(&self) -> IoAlphabet {
        IoAlphabet::new(self.ts.symbol_names().to_vec(), self.obs.names_or_numeric())
            .expect("models have at least one observation")
    }

    pub fn all_states(&self) -> BeliefState {
        BeliefState::new((0..self.ts.state_count()).collect())
    }
}

/// A filter that also chooses actions: a pairs-view [`Dits`] plus one action
/// per state. The initial state never acts (nothing precedes the first
/// observation), so its entry may be absent; every other state's must be
/// present.
#[derive(Debug, Clone)]
pub struct PolicyDits {
    pub dits: Dits,
    pub policy: Vec<Option<SymbolId>>,
}

impl PolicyDits {
    pub fn new(dits: Dits, policy: Vec<Option<SymbolId>>) -> Result<Self> {
        if dits.view != View::Pairs {
            return Err(Error::InvalidInput("policy filters use the pairs view".into()));
        }
        if policy.len() != dits.ts.state_count() {
            return Err(Error::DomainMismatch(format!(
                "policy covers {} states but the filter has {}",
                policy.len(),
                dits.ts.state_count()
            )));
        }
        let nu = dits.io.action_count();
        for (s, &u) in policy.iter().enumerate() {
            match u {
                Some(u) if u >= nu => {
                    return Err(Error::InvalidInput(format!(
                        "policy action {u} at state {s} is out of range"
                    )));
                }
                None if s != dits.initial => {
                    return Err(Error::InvalidInput(format!(
                        "policy is undefined at non-initial state {s}"
                    )));
                }
                _ => {}
            }
        }
        Ok(PolicyDits { dits, policy })
    }

    pub fn action_of(&self, state: StateId) -> Option<SymbolId> {
        self.policy[state]
    }

    /// The transitions actually traversable under the policy: initial
    /// observations from the initial state, and from every other state only
    /// the pairs whose action is the state's own. Always a subset of the
    /// filter's transitions.
    pub fn restricted_transitions(&self) -> Vec<(StateId, SymbolId, StateId)> {
        self.dits
            .ts
            .transitions()
            .iter()
            .copied()
            .filter(|&(s, sym, _)| match self.dits.io.decode_pair(sym) {
                crate::history::PairSymbol::Initial(_) => s == self.dits.initial,
                crate::history::PairSymbol::Pair(u, _) => self.policy[s] == Some(u),
            })
            .collect()
    }
}

/// Why a coupled run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The task machine reached a goal output.
    Goal,
    /// The joint (external, filter, machine) state repeated.
    Cycle,
    /// The step budget ran out.
    Horizon,
}

/// One stage of a coupled run: what held when the stage's observation was
/// made, and the action then taken (absent on the final stage of a stopped
/// run).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledStage {
    pub x: StateId,
    pub y: SymbolId,
    pub istate: StateId,
    pub mstate: StateId,
    pub action: Option<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledTrace {
    pub initial_x: StateId,
    pub stages: Vec<CoupledStage>,
    pub termination: Termination,
}

impl CoupledTrace {
    /// Stage count (observations made).
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Actions taken.
    pub fn actions_taken(&self) -> usize {
        self.stages.iter().filter(|s| s.action.is_some()).count()
    }

    pub fn final_istate(&self) -> Option<StateId> {
        self.stages.last().map(|s| s.istate)
    }

    /// Re-checks every stage against the model, plan, and machine.
    pub fn validate(
        &self,
        ext: &ExternalModel,
        plan: &PolicyDits,
        task: &TaskMachine,
    ) -> Result<()> {
        let mut x = self.initial_x;
        let mut istate = plan.dits.initial;
        let mut mstate = task.initial;
        let mut prev_action: Option<SymbolId> = None;
        for (k, stage) in self.stages.iter().enumerate() {
            let y = ext.observation_of(x);
            istate = plan.dits.step_stage(istate, prev_action, y, k + 1)?;
            mstate = task.step_stage(mstate, prev_action, y)?;
            let expected = CoupledStage { x, y, istate, mstate, action: stage.action };
            if *stage != expected {
                return Err(Error::InvalidInput(format!(
                    "stage {} does not replay: recorded {stage:?}, expected {expected:?}",
                    k + 1
                )));
            }
            if let Some(u) = stage.action {
                if plan.action_of(istate) != Some(u) {
                    return Err(Error::InvalidInput(format!(
                        "stage {} action {u} is not the policy's choice",
                        k + 1
                    )));
                }
                x = ext.step(x, u)?;
                prev_action = Some(u);
            }
        }
        Ok(())
    }

    /// The event stream as a trial (pairs view).
    pub fn to_trial(&self, io: &IoAlphabet) -> Trial {
        let mut events = Vec::new();
        for stage in &self.stages {
            events.push(("y".to_string(), io.observation_names()[stage.y].clone()));
            if let Some(u) = stage.action {
                events.push(("u".to_string(), io.action_names()[u].clone()));
            }
        }
        // The trailing action of an ongoing run has no following observation;
        // drop it so the trial alternates cleanly.
        if events.last().is_some_and(|(k, _)| k == "u") {
            events.pop();
        }
        Trial { view: View::Pairs, init: None, events, labels: BTreeMap::new() }
    }
}

/// The task machine must share the model's observations, and its actions
/// too whenever its view consumes them.
fn check_task_io(ext_io: &IoAlphabet, task: &TaskMachine) -> Result<()> {
    ext_io.compatible_observations(&task.io)?;
    if task.view != View::Observations {
        ext_io.compatible_actions(&task.io)?;
    }
    Ok(())
}

/// Runs the coupled system from `x1` until the task machine reports a goal
/// output, the joint state repeats, or `max_steps` stages pass.
pub fn couple_and_run(
    ext: &ExternalModel,
    plan: &PolicyDits,
    task: &TaskMachine,
    x1: StateId,
    max_steps: usize,
) -> Result<CoupledTrace> {
    if x1 >= ext.ts.state_count() {
        return Err(Error::InvalidInput(format!("initial state {x1} out of range")));
    }
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let ext_io = ext.io_alphabet();
    ext_io.compatible(&plan.dits.io)?;
    check_task_io(&ext_io, task)?;
    let mut x = x1;
    let mut istate = plan.dits.initial;
    let mut mstate = task.initial;
    let mut prev_action: Option<SymbolId> = None;
    let mut stages = Vec::new();
    let mut seen = BTreeSet::new();
    for k in 1..=max_steps {
        let y = ext.observation_of(x);
        istate = plan.dits.step_stage(istate, prev_action, y, k)?;
        mstate = task.step_stage(mstate, prev_action, y)?;
        stages.push(CoupledStage { x, y, istate, mstate, action: None });
        if task.is_goal_output(task.output_of(mstate)) {
            return Ok(CoupledTrace { initial_x: x1, stages, termination: Termination::Goal });
        }
        if !seen.insert((x, istate, mstate)) {
            return Ok(CoupledTrace { initial_x: x1, stages, termination: Termination::Cycle });
        }
        let u = plan.action_of(istate).ok_or_else(|| {
            Error::InvalidInput(format!("policy is undefined at state {istate}"))
        })?;
        stages.last_mut().expect("just pushed").action = Some(u);
        x = ext.step(x, u)?;
        prev_action = Some(u);
    }
    Ok(CoupledTrace { initial_x: x1, stages, termination: Termination::Horizon })
}

/// States from which some action sequence drives the task machine to a goal
/// output: forward product construction, then reverse reachability from the
/// goal nodes.
pub fn compute_reachable_set(ext: &ExternalModel, task: &TaskMachine) -> Result<BTreeSet<StateId>> {
    if task.goal.is_none() {
        return Err(Error::InvalidInput("the task machine declares no goal outputs".into()));
    }
    check_task_io(&ext.io_alphabet(), task)?;
    let nx = ext.ts.state_count();
    let nm = task.ts.state_count();
    let node = |x: StateId, m: StateId| x * nm + m;
    // Product edges under every action.
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); nx * nm];
    for x in 0..nx {
        for m in 0..nm {
            for u in 0..ext.ts.symbol_count() {
                let x2 = ext.step(x, u)?;
                let m2 = task.step_stage(m, Some(u), ext.observation_of(x2))?;
                rev[node(x2, m2)].push(node(x, m));
            }
        }
    }
    let mut winning = vec![false; nx * nm];
    let mut queue = VecDeque::new();
    for x in 0..nx {
        for m in 0..nm {
            if task.is_goal_output(task.output_of(m)) && !winning[node(x, m)] {
                winning[node(x, m)] = true;
                queue.push_back(node(x, m));
            }
        }
    }
    while let Some(n) = queue.pop_front() {
        for &p in &rev[n] {
            if !winning[p] {
                winning[p] = true;
                queue.push_back(p);
            }
        }
    }
    let mut result = BTreeSet::new();
    for x in 0..nx {
        let m1 = task.step_stage(task.initial, None, ext.observation_of(x))?;
        if winning[node(x, m1)] {
            result.insert(x);
        }
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub enum FeasibilityVerdict {
    Feasible,
    /// The smallest initial state whose coupled run fails to reach a goal
    /// output, with the failing trace.
    Counterexample { state: StateId, trace: CoupledTrace },
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityVerdict::Feasible)
    }
}

/// Checks the plan by exhaustive coupled simulation from every state in
/// `x_init`. The step budget covers every joint state once, so a run that
/// neither reaches the goal nor repeats within it cannot exist.
pub fn check_feasible(
    ext: &ExternalModel,
    plan: &PolicyDits,
    task: &TaskMachine,
    x_init: &BTreeSet<StateId>,
) -> Result<FeasibilityVerdict> {
    let bound = ext
        .ts
        .state_count()
        .saturating_mul(plan.dits.ts.state_count())
        .saturating_mul(task.ts.state_count())
        .saturating_add(1);
    for &x in x_init {
        let trace = couple_and_run(ext, plan, task, x, bound)?;
        if trace.termination != Termination::Goal {
            return Ok(FeasibilityVerdict::Counterexample { state: x, trace });
        }
    }
    Ok(FeasibilityVerdict::Feasible)
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub feasible: bool,
    /// The winning policy over the reachable winning belief region.
    pub plan: Option<PolicyDits>,
    /// Size of the full winning region (before restricting to the policy's
    /// reachable part).
    pub winning_nodes: usize,
    /// States from which the task is achievable at all.
    pub reachable: BTreeSet<StateId>,
    /// When infeasible: an initial state consistent with a losing first
    /// observation, and an event stream following losing nodes.
    pub counterexample: Option<(StateId, Trial)>,
}

/// Plans over belief space: a node pairs the belief with the task machine
/// state driven by the same events. A non-goal node wins when some action
/// makes every consistent observation lead to a winning node; the root wins
/// when every consistent first observation does. The returned plan follows
/// the smallest winning action everywhere.
pub fn synthesize_policy(
    ext: &ExternalModel,
    prior: &BeliefState,
    task: &TaskMachine,
    cap: usize,
) -> Result<SynthesisResult> {
    if task.goal.is_none() {
        return Err(Error::InvalidInput("the task machine declares no goal outputs".into()));
    }
    if prior.is_empty() {
        return Err(Error::InvalidInput("the prior belief is empty".into()));
    }
    let io = ext.io_alphabet();
    check_task_io(&io, task)?;
    let ny = io.observation_count();
    let nu = io.action_count();

    // Node 0 is the pre-observation root; nodes thereafter are
    // (belief, machine state), interned in breadth-first order.
    let mut keys: Vec<(BeliefState, StateId)> = vec![(prior.clone(), task.initial)];
    let mut id_of: BTreeMap<(BeliefState, StateId), usize> = BTreeMap::new();
    // children[node][u] = (y, child) list; for the root only u=0 is used.
    let mut children: Vec<Vec<Vec<(SymbolId, usize)>>> = Vec::new();
    let mut is_goal = vec![false];

    let intern = |key: (BeliefState, StateId),
                      keys: &mut Vec<(BeliefState, StateId)>,
                      is_goal: &mut Vec<bool>,
                      queue: &mut VecDeque<usize>,
                      id_of: &mut BTreeMap<(BeliefState, StateId), usize>|
     -> Result<usize> {
        if let Some(&id) = id_of.get(&key) {
            return Ok(id);
        }
        let id = keys.len();
        if id >= cap {
            return Err(Error::SizeLimit { what: "synthesis nodes", needed: id + 1, cap });
        }
        id_of.insert(key.clone(), id);
        is_goal.push(task.is_goal_output(task.output_of(key.1)));
        keys.push(key);
        queue.push_back(id);
        Ok(id)
    };

    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        let (belief, mstate) = keys[node].clone();
        let mut per_action: Vec<Vec<(SymbolId, usize)>> = Vec::new();
        if node == 0 {
            let mut kids = Vec::new();
            for y in 0..ny {
                if let Ok(b) = belief_observe(ext, &belief, y) {
                    let m = task.step_stage(mstate, None, y)?;
                    let id = intern((b, m), &mut keys, &mut is_goal, &mut queue, &mut id_of)?;
                    kids.push((y, id));
                }
            }
            per_action.push(kids);
        } else if !is_goal[node] {
            for u in 0..nu {
                let mut kids = Vec::new();
                for y in 0..ny {
                    if let Ok(b) = ndet_filter_step(ext, &belief, u, y) {
                        let m = task.step_stage(mstate, Some(u), y)?;
                        let id =
                            intern((b, m), &mut keys, &mut is_goal, &mut queue, &mut id_of)?;
                        kids.push((y, id));
                    }
                }
                per_action.push(kids);
            }
        }
        if children.len() <= node {
            children.resize(node + 1, Vec::new());
        }
        children[node] = per_action;
    }

    let n = keys.len();
    // Least fixpoint of the winning condition. A node also records the
    // smallest action whose observation outcomes were all already won when
    // the node itself entered the set. Judging actions against the final
    // set instead would admit cycles through coexisting winning nodes (an
    // action looping back to the node would count as winning); anchoring
    // the choice at entry time makes every step strictly descend the
    // marking order, so runs must bottom out at a goal.
    let mut winning: Vec<bool> = is_goal.clone();
    let mut chosen: Vec<Option<SymbolId>> = vec![None; n];
    loop {
        let mut changed = false;
        for node in (0..n).rev() {
            if winning[node] {
                continue;
            }
            if node == 0 {
                if !children[0][0].is_empty() && children[0][0].iter().all(|&(_, c)| winning[c]) {
                    winning[0] = true;
                    changed = true;
                }
            } else if let Some(u) = children[node]
                .iter()
                .position(|kids| !kids.is_empty() && kids.iter().all(|&(_, c)| winning[c]))
            {
                winning[node] = true;
                chosen[node] = Some(u);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let feasible = winning[0];
    let winning_nodes = winning.iter().filter(|&&w| w).count();
    let reachable = compute_reachable_set(ext, task)?;

    if !feasible {
        // Pick the smallest losing first observation and walk losing nodes,
        // tracking which initial states stay consistent with the events.
        let (y0, mut node) = children[0][0]
            .iter()
            .copied()
            .find(|&(_, c)| !winning[c])
            .expect("an infeasible root has a losing child");
        let mut consistent: Vec<(StateId, StateId)> = prior
            .members()
            .iter()
            .copied()
            .filter(|&x| ext.observation_of(x) == y0)
            .map(|x| (x, x))
            .collect();
        let mut events = vec![("y".to_string(), io.observation_names()[y0].clone())];
        for _ in 0..n {
            if is_goal[node] {
                break;
            }
            // Every action keeps some losing observation; follow the
            // smallest.
            let Some((u, y, next)) = children[node].iter().enumerate().find_map(|(u, kids)| {
                kids.iter().find(|&&(_, c)| !winning[c]).map(|&(y, c)| (u, y, c))
            }) else {
                break;
            };
            let stepped: Vec<(StateId, StateId)> = consistent
                .iter()
                .filter_map(|&(x0, x)| {
                    let x2 = ext.step(x, u).ok()?;
                    (ext.observation_of(x2) == y).then_some((x0, x2))
                })
                .collect();
            if stepped.is_empty() {
                break;
            }
            consistent = stepped;
            events.push(("u".to_string(), io.action_names()[u].clone()));
            events.push(("y".to_string(), io.observation_names()[y].clone()));
            node = next;
        }
        let origin = consistent.first().map(|&(x0, _)| x0).unwrap_or(prior.members()[0]);
        let trial = Trial { view: View::Pairs, init: None, events, labels: BTreeMap::new() };
        return Ok(SynthesisResult {
            feasible: false,
            plan: None,
            winning_nodes,
            reachable,
            counterexample: Some((origin, trial)),
        });
    }

    // Extract the plan: from the root every consistent observation, from
    // each winning node the action recorded when it entered the set.
    let mut plan_id: BTreeMap<usize, StateId> = BTreeMap::from([(0, 0)]);
    let mut order = vec![0usize];
    let mut transitions = Vec::new();
    let mut bfs = VecDeque::from([0usize]);
    while let Some(node) = bfs.pop_front() {
        let edges: Vec<(SymbolId, usize)> = if node == 0 {
            children[0][0].iter().map(|&(y, c)| (io.initial_symbol(y), c)).collect()
        } else if let Some(u) = chosen[node] {
            children[node][u].iter().map(|&(y, c)| (io.pair_symbol(u, y), c)).collect()
        } else {
            Vec::new()
        };
        for (sym, child) in edges {
            let next_id = plan_id.len();
            let id = *plan_id.entry(child).or_insert_with(|| {
                order.push(child);
                bfs.push_back(child);
                next_id
            });
            transitions.push((plan_id[&node], sym, id));
        }
    }
    let names: Vec<String> = order
        .iter()
        .map(|&node| {
            if node == 0 {
                "ε".to_string()
            } else {
                format!("{}·{}", keys[node].0, task.ts.state_name(keys[node].1))
            }
        })
        .collect();
    let outputs = Labeling::from_ids(
        order.iter().map(|&node| task.output_of(keys[node].1)).collect(),
        Some(task.outputs.names_or_numeric()),
    );
    let ts = TransitionSystem::new(names, io.symbol_names(View::Pairs), transitions)?;
    let dits = Dits::new(ts, 0, Some(outputs), View::Pairs, io)?;
    // Goal nodes never act before the run stops; give them the smallest
    // action so the policy is total off the initial state.
    let policy: Vec<Option<SymbolId>> = order
        .iter()
        .enumerate()
        .map(|(i, &node)| {
            if i == 0 {
                None
            } else {
                chosen[node].or(Some(0))
            }
        })
        .collect();
    let plan = PolicyDits::new(dits, policy)?;
    Ok(SynthesisResult {
        feasible: true,
        plan: Some(plan),
        winning_nodes,
        reachable,
        counterexample: None,
    })
}

/// Quotients a plan by the coarsest sufficient refinement of its own policy
/// labeling, over the policy-restricted transitions. The result chooses the
/// same action after every event stream the original could follow, and is
/// undefined exactly where the original was.
pub fn minimize_for_policy(plan: &PolicyDits) -> Result<PolicyDits> {
    let n = plan.dits.ts.state_count();
    let restricted = TransitionSystem::new(
        plan.dits.ts.state_names().to_vec(),
        plan.dits.ts.symbol_names().to_vec(),
        plan.restricted_transitions(),
    )?;
    // The initial state's absent action is its own label class.
    let raw: Vec<usize> = plan.policy.iter().map(|u| u.map_or(0, |u| u + 1)).collect();
    let labeled = crate::ts::LabeledSystem::new(restricted.clone(), Labeling::from_ids(raw, None))?;
    let refinement = minimal_sufficient_refinement(&labeled, &RefinementMode::Strict)?;
    let p = refinement.partition;

    let quotient = labeled.relabeled_by(&p)?.quotient();
    let mut policy = vec![None; p.block_count()];
    for s in 0..n {
        policy[p.block_of(s)] = plan.policy[s];
    }
    let outputs = plan.dits.outputs.as_ref().and_then(|o| {
        // Keep outputs only when the merge respects them.
        let mut raw = vec![usize::MAX; p.block_count()];
        for s in 0..n {
            let b = p.block_of(s);
            if raw[b] != usize::MAX && raw[b] != o.label_of(s) {
                return None;
            }
            raw[b] = o.label_of(s);
        }
        Some(Labeling::from_ids(raw, Some(o.names_or_numeric())))
    });
    let dits = Dits::new(
        quotient.ts,
        p.block_of(plan.dits.initial),
        outputs,
        View::Pairs,
        plan.dits.io.clone(),
    )?;
    PolicyDits::new(dits, policy)
}

/// True when the two plans take identical actions along every event stream
/// that can occur under their own choices, and are defined on exactly the
/// same such streams. Checked as a product walk over reachable state pairs;
/// only on-policy symbols are followed, since streams carrying an action the
/// plan does not take can never happen.
pub fn behavior_equivalent(a: &PolicyDits, b: &PolicyDits) -> Result<bool> {
    a.dits.io.compatible(&b.dits.io)?;
    let io = &a.dits.io;
    let ny = io.observation_count();
    let start = (a.dits.initial, b.dits.initial, true);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((sa, sb, at_start)) = queue.pop_front() {
        if a.policy[sa] != b.policy[sb] {
            return Ok(false);
        }
        let symbols: Vec<SymbolId> = match a.policy[sa] {
            Some(u) => (0..ny).map(|y| io.pair_symbol(u, y)).collect(),
            None if at_start => (0..ny).map(|y| io.initial_symbol(y)).collect(),
            // Re-entering an actionless state mid-stream strands both plans.
            None => Vec::new(),
        };
        for sym in symbols {
            match (a.dits.step(sa, sym), b.dits.step(sb, sym)) {
                (Some(ta), Some(tb)) => {
                    if seen.insert((ta, tb, false)) {
                        queue.push_back((ta, tb, false));
                    }
                }
                (None, None) => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::InitialCondition;

    /// A 4-cell ring the robot walks clockwise or stays; the observation is
    /// the cell's parity.
    fn ring_model() -> ExternalModel {
        let ts = TransitionSystem::new(
            (0..4).map(|i| format!("c{i}")).collect(),
            vec!["go".into(), "stay".into()],
            (0..4).flat_map(|i| [(i, 0, (i + 1) % 4), (i, 1, i)]).collect(),
        )
        .unwrap();
        let obs = Labeling::from_ids(
            vec![0, 1, 0, 1],
            Some(vec!["even".into(), "odd".into()]),
        );
        ExternalModel::new(ts, obs).unwrap()
    }

    /// Task: see the odd observation twice (counting the first stage).
    fn two_odds_task(io: &IoAlphabet) -> TaskMachine {
        // Machine over observations: count odd sightings, saturate at 2.
        let ts = TransitionSystem::with_counts(
            3,
            2,
            vec![(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 2), (2, 0, 2), (2, 1, 2)],
        )
        .unwrap();
        let obs_io = IoAlphabet::new(vec![], io.observation_names().to_vec()).unwrap();
        TaskMachine::new(
            ts,
            0,
            Labeling::from_ids(vec![0, 0, 1], Some(vec!["counting".into(), "done".into()])),
            View::Observations,
            obs_io,
            Some(BTreeSet::from([1])),
        )
        .unwrap()
    }

    /// A hand-built plan that always walks.
    fn always_go_plan(ext: &ExternalModel) -> PolicyDits {
        let io = ext.io_alphabet();
        // One filter state for "before anything", one for "running".
        let mut transitions = vec![];
        for y in 0..2 {
            transitions.push((0, io.initial_symbol(y), 1));
            for u in 0..2 {
                transitions.push((1, io.pair_symbol(u, y), 1));
            }
        }
        let ts = TransitionSystem::with_counts(2, io.symbol_count(View::Pairs), transitions).unwrap();
        let dits = Dits::new(ts, 0, None, View::Pairs, io).unwrap();
        PolicyDits::new(dits, vec![None, Some(0)]).unwrap()
    }

    #[test]
    fn coupled_run_reaches_the_goal_and_replays() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let plan = always_go_plan(&ext);
        let trace = couple_and_run(&ext, &plan, &task, 0, 100).unwrap();
        assert_eq!(trace.termination, Termination::Goal);
        // From c0: observe even, odd, even, odd -> second odd at stage 4.
        assert_eq!(trace.len(), 4);
        assert_eq!(trace.actions_taken(), 3);
        trace.validate(&ext, &plan, &task).unwrap();
    }

    #[test]
    fn coupled_run_detects_cycles() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        // A plan that always stays: from an even cell the odd count freezes.
        let io = ext.io_alphabet();
        let mut transitions = vec![];
        for y in 0..2 {
            transitions.push((0, io.initial_symbol(y), 1));
            for u in 0..2 {
                transitions.push((1, io.pair_symbol(u, y), 1));
            }
        }
        let ts = TransitionSystem::with_counts(2, io.symbol_count(View::Pairs), transitions).unwrap();
        let dits = Dits::new(ts, 0, None, View::Pairs, io).unwrap();
        let plan = PolicyDits::new(dits, vec![None, Some(1)]).unwrap();
        let trace = couple_and_run(&ext, &plan, &task, 0, 100).unwrap();
        assert_eq!(trace.termination, Termination::Cycle);
        trace.validate(&ext, &plan, &task).unwrap();
    }

    #[test]
    fn horizon_stops_short_runs() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let plan = always_go_plan(&ext);
        let trace = couple_and_run(&ext, &plan, &task, 0, 1).unwrap();
        assert_eq!(trace.termination, Termination::Horizon);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn reachable_set_is_everything_on_the_ring() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let r = compute_reachable_set(&ext, &task).unwrap();
        assert_eq!(r, (0..4).collect());
    }

    #[test]
    fn unreachable_goal_gives_an_empty_reachable_set() {
        let ext = ring_model();
        let io = ext.io_alphabet();
        // Machine whose goal output sits on an unreachable state.
        let ts = TransitionSystem::with_counts(2, 2, vec![(0, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 1)])
            .unwrap();
        let obs_io = IoAlphabet::new(vec![], io.observation_names().to_vec()).unwrap();
        let task = TaskMachine::new(
            ts,
            0,
            Labeling::from_ids(vec![0, 1], None),
            View::Observations,
            obs_io,
            Some(BTreeSet::from([1])),
        )
        .unwrap();
        assert!(compute_reachable_set(&ext, &task).unwrap().is_empty());
    }

    #[test]
    fn feasibility_finds_the_smallest_failing_start() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let plan = always_go_plan(&ext);
        let all: BTreeSet<StateId> = (0..4).collect();
        assert!(check_feasible(&ext, &plan, &task, &all).unwrap().is_feasible());
    }

    #[test]
    fn synthesis_wins_the_ring_task() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let prior = ext.all_states();
        let result = synthesize_policy(&ext, &prior, &task, DEFAULT_SYNTHESIS_CAP).unwrap();
        assert!(result.feasible);
        let plan = result.plan.as_ref().unwrap();
        // The synthesized plan must actually work from every state.
        let verdict = check_feasible(&ext, plan, &task, &result.reachable).unwrap();
        assert!(verdict.is_feasible());
        // Restricted transitions are a subset of the filter's.
        let all: BTreeSet<_> = plan.dits.ts.transitions().iter().copied().collect();
        for t in plan.restricted_transitions() {
            assert!(all.contains(&t));
        }
    }

    #[test]
    fn synthesis_reports_infeasible_tasks() {
        let ext = ring_model();
        let io = ext.io_alphabet();
        let ts = TransitionSystem::with_counts(2, 2, vec![(0, 0, 0), (0, 1, 0), (1, 0, 1), (1, 1, 1)])
            .unwrap();
        let obs_io = IoAlphabet::new(vec![], io.observation_names().to_vec()).unwrap();
        let task = TaskMachine::new(
            ts,
            0,
            Labeling::from_ids(vec![0, 1], None),
            View::Observations,
            obs_io,
            Some(BTreeSet::from([1])),
        )
        .unwrap();
        let result = synthesize_policy(&ext, &ext.all_states(), &task, DEFAULT_SYNTHESIS_CAP).unwrap();
        assert!(!result.feasible);
        assert!(result.plan.is_none());
        assert_eq!(result.winning_nodes, 0);
        let (origin, trial) = result.counterexample.unwrap();
        assert!(origin < 4);
        trial.validate().unwrap();
    }

    #[test]
    fn one_step_goal_from_a_singleton_prior() {
        let ext = ring_model();
        let io = ext.io_alphabet();
        // Goal: see odd once.
        let ts = TransitionSystem::with_counts(2, 2, vec![(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)])
            .unwrap();
        let obs_io = IoAlphabet::new(vec![], io.observation_names().to_vec()).unwrap();
        let task = TaskMachine::new(
            ts,
            0,
            Labeling::from_ids(vec![0, 1], None),
            View::Observations,
            obs_io,
            Some(BTreeSet::from([1])),
        )
        .unwrap();
        let result =
            synthesize_policy(&ext, &BeliefState::singleton(0), &task, DEFAULT_SYNTHESIS_CAP)
                .unwrap();
        assert!(result.feasible);
        let plan = result.plan.unwrap();
        let trace = couple_and_run(&ext, &plan, &task, 0, 10).unwrap();
        assert_eq!(trace.termination, Termination::Goal);
        // One action suffices: step onto an odd cell.
        assert_eq!(trace.actions_taken(), 1);
    }

    #[test]
    fn minimize_for_policy_merges_twin_states() {
        let ext = ring_model();
        let io = ext.io_alphabet();
        // Three filter states where 1 and 2 are twins: same action, same
        // successors.
        let mut transitions = vec![];
        for y in 0..2 {
            transitions.push((0, io.initial_symbol(y), 1));
        }
        for s in [1, 2] {
            for u in 0..2 {
                transitions.push((s, io.pair_symbol(u, 0), 1));
                transitions.push((s, io.pair_symbol(u, 1), 2));
            }
        }
        let ts = TransitionSystem::with_counts(3, io.symbol_count(View::Pairs), transitions).unwrap();
        let dits = Dits::new(ts, 0, None, View::Pairs, io).unwrap();
        let plan = PolicyDits::new(dits, vec![None, Some(0), Some(0)]).unwrap();
        let small = minimize_for_policy(&plan).unwrap();
        assert_eq!(small.dits.ts.state_count(), 2);
        assert!(behavior_equivalent(&plan, &small).unwrap());
        // Idempotent.
        let again = minimize_for_policy(&small).unwrap();
        assert_eq!(again.dits.ts.state_count(), 2);
    }

    #[test]
    fn minimized_synthesized_plans_stay_equivalent() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let result = synthesize_policy(&ext, &ext.all_states(), &task, DEFAULT_SYNTHESIS_CAP).unwrap();
        let plan = result.plan.unwrap();
        let small = minimize_for_policy(&plan).unwrap();
        assert!(small.dits.ts.state_count() <= plan.dits.ts.state_count());
        assert!(behavior_equivalent(&plan, &small).unwrap());
        let verdict = check_feasible(&ext, &small, &task, &result.reachable).unwrap();
        assert!(verdict.is_feasible());
    }

    #[test]
    fn trace_serializes_as_a_trial() {
        let ext = ring_model();
        let task = two_odds_task(&ext.io_alphabet());
        let plan = always_go_plan(&ext);
        let trace = couple_and_run(&ext, &plan, &task, 0, 100).unwrap();
        let trial = trace.to_trial(&ext.io_alphabet());
        trial.validate().unwrap();
        assert_eq!(trial.stage_count(), trace.len());
        // The plan replays the trial through its own filter.
        let states = plan.dits.run(&trial).unwrap();
        assert_eq!(states.len(), trace.len() + 1);
    }

    #[test]
    fn unused_initial_condition_type_is_exercised() {
        // Keeps the model-based initial conditions honest in serialization.
        let init = InitialCondition::Set(vec![0, 2]);
        let json = serde_json::to_string(&init).unwrap();
        assert_eq!(json, "{\"set\":[0,2]}");
    }
}
