//! Example worlds: the gate ring, the L-shaped corridor family, and seeded
//! random instances for property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::filters::{reachable_belief_dits, BeliefState};
use crate::history::{IoAlphabet, TaskMachine, View};
use crate::partition::Labeling;
use crate::plan::{ExternalModel, PolicyDits};
use crate::ts::{StateId, SymbolId, TransitionSystem};

/// A ring of regions separated by gates that alternate red and green, so
/// every region touches exactly one gate of each color. A robot wanders the
/// ring; an observer sees only the color of each gate it crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateWorldConfig {
    pub regions: usize,
    /// Passive worlds expose crossing choices directly as actions
    /// (cross-red, cross-green). Active worlds act by walling gates off
    /// (block-red, block-green, block-none) and the robot then crosses
    /// whichever gate stays open; with both open it crosses the red one.
    pub active: bool,
}

/// State layout of [`gate_world`]: `region * 2 + last`, where `last` is 0
/// after crossing a red gate and 1 after a green one.
pub fn gate_state(region: usize, last_green: bool) -> StateId {
    region * 2 + usize::from(last_green)
}

/// Builds the gate ring. Gate `i` joins regions `i` and `i+1` (mod n) and is
/// red when `i` is even, which alternates colors exactly when the region
/// count is even; other counts cannot give every region one gate of each
/// color and are rejected.
pub fn gate_world(cfg: &GateWorldConfig) -> Result<ExternalModel> {
    let n = cfg.regions;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "a ring of {n} regions cannot give every region one red and one green gate"
        )));
    }
    // Region i touches gates (i-1 mod n) and i; even gate ids are red.
    let red_gate = |i: usize| if i.is_multiple_of(2) { i } else { (i + n - 1) % n };
    let green_gate = |i: usize| if !i.is_multiple_of(2) { i } else { (i + n - 1) % n };
    let across = |region: usize, gate: usize| if gate == region { (region + 1) % n } else { gate };

    let state_names: Vec<String> = (0..n)
        .flat_map(|i| ["r", "g"].map(|c| format!("q{i}{c}")))
        .collect();
    let cross_red = |i: usize| gate_state(across(i, red_gate(i)), false);
    let cross_green = |i: usize| gate_state(across(i, green_gate(i)), true);

    let (action_names, transitions): (Vec<String>, Vec<(usize, usize, usize)>) = if cfg.active {
        let names = vec!["block-red".into(), "block-green".into(), "block-none".into()];
        let mut tr = Vec::new();
        for i in 0..n {
            for last in 0..2 {
                let s = gate_state(i, last == 1);
                tr.push((s, 0, cross_green(i)));
                tr.push((s, 1, cross_red(i)));
                tr.push((s, 2, cross_red(i)));
            }
        }
        (names, tr)
    } else {
        let names = vec!["cross-red".into(), "cross-green".into()];
        let mut tr = Vec::new();
        for i in 0..n {
            for last in 0..2 {
                let s = gate_state(i, last == 1);
                tr.push((s, 0, cross_red(i)));
                tr.push((s, 1, cross_green(i)));
            }
        }
        (names, tr)
    };
    let ts = TransitionSystem::new(state_names, action_names, transitions)?;
    let obs = Labeling::from_ids(
        (0..2 * n).map(|s| s % 2).collect(),
        Some(vec!["r".into(), "g".into()]),
    );
    ExternalModel::new(ts, obs)
}

/// Audits that every region of a gate world really borders one red and one
/// green gate: crossing red from anywhere lands in a red-last state in a
/// neighboring region, likewise green, and crossing the same color twice
/// returns to the starting region (both sides of a gate share it).
pub fn gate_world_audit(model: &ExternalModel, active: bool) -> Result<()> {
    let (red_action, green_action) = if active { (1, 0) } else { (0, 1) };
    for s in 0..model.ts.state_count() {
        for (action, color) in [(red_action, 0), (green_action, 1)] {
            let t = model.step(s, action)?;
            if t % 2 != color {
                return Err(Error::InvalidConfig(format!(
                    "state {s}: crossing does not land on its gate's color"
                )));
            }
            if t / 2 == s / 2 {
                return Err(Error::InvalidConfig(format!(
                    "state {s}: crossing does not change region"
                )));
            }
            let back = model.step(t, action)?;
            if back / 2 != s / 2 {
                return Err(Error::InvalidConfig(format!(
                    "state {s}: recrossing the same color does not return"
                )));
            }
        }
    }
    Ok(())
}

fn gate_obs_io() -> IoAlphabet {
    IoAlphabet::new(vec![], vec!["r".into(), "g".into()]).expect("two observations")
}

/// The crossing-consistency tracker: consistent while the observed gate
/// colors alternate, inconsistent forever after a repeat.
pub fn consistency_machine() -> TaskMachine {
    let ts = TransitionSystem::new(
        vec!["start".into(), "last-r".into(), "last-g".into(), "trap".into()],
        vec!["r".into(), "g".into()],
        vec![
            (0, 0, 1),
            (0, 1, 2),
            (1, 0, 3),
            (1, 1, 2),
            (2, 0, 1),
            (2, 1, 3),
            (3, 0, 3),
            (3, 1, 3),
        ],
    )
    .expect("fixed machine");
    TaskMachine::new(
        ts,
        0,
        Labeling::from_ids(
            vec![0, 0, 0, 1],
            Some(vec!["consistent".into(), "inconsistent".into()]),
        ),
        View::Observations,
        gate_obs_io(),
        None,
    )
    .expect("fixed machine")
}

/// Reachability form of the consistency task: the goal output appears after
/// `crossings` alternating gate colors in a row, and a repeated color before
/// that is terminal failure.
pub fn consistency_goal_machine(crossings: usize) -> Result<TaskMachine> {
    if crossings == 0 {
        return Err(Error::InvalidConfig("at least one crossing is required".into()));
    }
    // States: start, then (count, last) for 1 <= count < crossings, then
    // goal, then trap.
    let inner = crossings.saturating_sub(1);
    let goal = 1 + 2 * inner;
    let trap = goal + 1;
    let mut names = vec!["start".to_string()];
    for c in 1..crossings {
        names.push(format!("{c}r"));
        names.push(format!("{c}g"));
    }
    names.push("goal".into());
    names.push("trap".into());
    let state_of = |count: usize, last: usize| {
        if count >= crossings {
            goal
        } else {
            1 + 2 * (count - 1) + last
        }
    };
    let mut tr = Vec::new();
    for y in 0..2 {
        tr.push((0, y, state_of(1, y)));
        tr.push((goal, y, goal));
        tr.push((trap, y, trap));
    }
    for count in 1..crossings {
        for last in 0..2 {
            let s = state_of(count, last);
            for y in 0..2 {
                tr.push((s, y, if y == last { trap } else { state_of(count + 1, y) }));
            }
        }
    }
    let ts = TransitionSystem::new(names, vec!["r".into(), "g".into()], tr)?;
    let mut raw = vec![0usize; goal + 2];
    raw[goal] = 1;
    raw[trap] = 2;
    let outputs = Labeling::from_ids(
        raw,
        Some(vec!["working".into(), "goal".into(), "failed".into()]),
    );
    let goal_id = BTreeSet::from([1]);
    TaskMachine::new(ts, 0, outputs, View::Observations, gate_obs_io(), Some(goal_id))
}

/// The alternation plan for the active gate world: after crossing a red
/// gate, wall the red gate off so the next crossing must be green, and the
/// other way round.
pub fn gate_alternation_plan(model: &ExternalModel) -> Result<PolicyDits> {
    let io = model.io_alphabet();
    // Filter states: before anything, last saw red, last saw green.
    let mut tr = Vec::new();
    for (y, target) in [(0, 1), (1, 2)] {
        tr.push((0, io.initial_symbol(y), target));
        for s in 1..3 {
            for u in 0..io.action_count() {
                tr.push((s, io.pair_symbol(u, y), target));
            }
        }
    }
    let ts = TransitionSystem::new(
        vec!["start".into(), "saw-r".into(), "saw-g".into()],
        io.symbol_names(View::Pairs),
        tr,
    )?;
    let dits = crate::filters::Dits::new(ts, 0, None, View::Pairs, io)?;
    // block-red after red, block-green after green.
    PolicyDits::new(dits, vec![None, Some(0), Some(1)])
}

/// Where a corridor state sits: which environment, which cell, and whether
/// the last move was blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorridorState {
    pub l1: usize,
    pub l2: usize,
    pub i: usize,
    pub j: usize,
    pub blocked: bool,
}

/// The corridor family: every L-shaped corridor with arm lengths between 1
/// and `bound`, glued into one model whose states remember their
/// environment. The robot starts at the corner cell (0,0) of an unknown
/// environment; moves in the four cardinal directions succeed when the
/// target cell exists and otherwise leave the robot in place with the
/// blocked flag set, which is all the sensor reports.
#[derive(Debug, Clone)]
pub struct CorridorFamily {
    pub model: ExternalModel,
    /// All environments at the corner with a clear flag.
    pub initial_belief: BeliefState,
    /// Decoded layout per model state.
    pub states: Vec<CorridorState>,
}

/// Action ids of the corridor family.
pub const CORRIDOR_EAST: SymbolId = 0;
pub const CORRIDOR_NORTH: SymbolId = 1;
pub const CORRIDOR_WEST: SymbolId = 2;
pub const CORRIDOR_SOUTH: SymbolId = 3;

pub fn l_corridor_family(bound: usize) -> Result<CorridorFamily> {
    if bound == 0 {
        return Err(Error::InvalidConfig("arm lengths start at 1".into()));
    }
    let mut states = Vec::new();
    let mut names = Vec::new();
    let mut initial = Vec::new();
    for l1 in 1..=bound {
        for l2 in 1..=bound {
            // Horizontal arm (i,0) up to l1, then vertical arm (l1,j).
            let mut cells: Vec<(usize, usize)> = (0..=l1).map(|i| (i, 0)).collect();
            cells.extend((1..=l2).map(|j| (l1, j)));
            for (i, j) in cells {
                for blocked in [false, true] {
                    if (i, j) == (0, 0) && !blocked {
                        initial.push(states.len());
                    }
                    states.push(CorridorState { l1, l2, i, j, blocked });
                    names.push(format!("E{l1}{l2}:{i},{j}{}", if blocked { "!" } else { "" }));
                }
            }
        }
    }
    let index: BTreeMap<(usize, usize, usize, usize, bool), usize> = states
        .iter()
        .enumerate()
        .map(|(id, s)| ((s.l1, s.l2, s.i, s.j, s.blocked), id))
        .collect();
    let deltas = [(1isize, 0isize), (0, 1), (-1, 0), (0, -1)];
    let mut tr = Vec::new();
    for (id, s) in states.iter().enumerate() {
        for (a, (di, dj)) in deltas.iter().enumerate() {
            let ti = s.i as isize + di;
            let tj = s.j as isize + dj;
            let target = if ti >= 0 && tj >= 0 {
                index.get(&(s.l1, s.l2, ti as usize, tj as usize, false)).copied()
            } else {
                None
            };
            let target = target.unwrap_or(index[&(s.l1, s.l2, s.i, s.j, true)]);
            tr.push((id, a, target));
        }
    }
    let ts = TransitionSystem::new(
        names,
        vec!["e".into(), "n".into(), "w".into(), "s".into()],
        tr,
    )?;
    let obs = Labeling::from_ids(
        states.iter().map(|s| usize::from(s.blocked)).collect(),
        Some(vec!["0".into(), "1".into()]),
    );
    let model = ExternalModel::new(ts, obs)?;
    Ok(CorridorFamily { model, initial_belief: BeliefState::new(initial), states })
}

/// The corridor search strategy as a belief-space plan: go east until the
/// first blocked reading, then north until everything is pinned down. A
/// belief prescribes north as soon as any member has left the horizontal arm
/// or has been blocked; otherwise east.
pub fn corridor_two_phase_plan(family: &CorridorFamily, cap: usize) -> Result<PolicyDits> {
    let bd = reachable_belief_dits(&family.model, &family.initial_belief, None, cap)?;
    let policy: Vec<Option<SymbolId>> = bd
        .beliefs
        .iter()
        .enumerate()
        .map(|(node, b)| {
            if node == 0 {
                None
            } else if b
                .members()
                .iter()
                .any(|&x| family.states[x].j >= 1 || family.states[x].blocked)
            {
                Some(CORRIDOR_NORTH)
            } else {
                Some(CORRIDOR_EAST)
            }
        })
        .collect();
    PolicyDits::new(bd.dits, policy)
}

/// Uniformly random deterministic full automaton; the same seed rebuilds the
/// same system.
pub fn random_automaton(states: usize, symbols: usize, seed: u64) -> Result<TransitionSystem> {
    if states == 0 || symbols == 0 {
        return Err(Error::InvalidConfig("states and symbols must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Vec::with_capacity(states * symbols);
    for s in 0..states {
        for a in 0..symbols {
            tr.push((s, a, rng.gen_range(0..states)));
        }
    }
    TransitionSystem::with_counts(states, symbols, tr)
}

/// Uniformly random labeling into at most `labels` classes.
pub fn random_labeling(states: usize, labels: usize, seed: u64) -> Result<Labeling> {
    if states == 0 || labels == 0 {
        return Err(Error::InvalidConfig("states and labels must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Labeling::from_ids(
        (0..states).map(|_| rng.gen_range(0..labels)).collect(),
        None,
    ))
}

/// Random transition system where each (state, symbol) slot independently
/// gets zero, one, or two targets, for exercising nondeterministic and
/// partial inputs.
pub fn random_loose_system(states: usize, symbols: usize, seed: u64) -> Result<TransitionSystem> {
    if states == 0 || symbols == 0 {
        return Err(Error::InvalidConfig("states and symbols must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Vec::new();
    for s in 0..states {
        for a in 0..symbols {
            for _ in 0..rng.gen_range(0..=2) {
                tr.push((s, a, rng.gen_range(0..states)));
            }
        }
    }
    TransitionSystem::with_counts(states, symbols, tr)
}

/// Every observation sequence of exactly `depth` stages that some action
/// choices can produce from some listed initial state.
pub fn enumerate_observation_traces(
    model: &ExternalModel,
    initials: &[StateId],
    depth: usize,
) -> BTreeSet<Vec<SymbolId>> {
    let mut frontier: BTreeSet<(StateId, Vec<SymbolId>)> = initials
        .iter()
        .map(|&x| (x, vec![model.observation_of(x)]))
        .collect();
    for _ in 1..depth {
        let mut next = BTreeSet::new();
        for (x, trace) in frontier {
            for u in 0..model.ts.symbol_count() {
                let x2 = model.step(x, u).expect("models are full");
                let mut t = trace.clone();
                t.push(model.observation_of(x2));
                next.insert((x2, t));
            }
        }
        frontier = next;
    }
    frontier.into_iter().map(|(_, t)| t).collect()
}

/// World configurations accepted by the command line generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "world", rename_all = "kebab-case")]
pub enum WorldConfig {
    Gate {
        regions: usize,
        #[serde(default)]
        active: bool,
    },
    Corridor {
        bound: usize,
    },
}
