//! Stable JSON documents for every object the toolkit exchanges, plus DOT
//! export.
//!
//! One document shape, [`SystemDoc`], covers plain transition systems,
//! labeled systems, external models, filters, task machines, policies, and
//! history trees: the core fields are always present and each richer object
//! adds its own optional fields. Emission is canonical (fixed field order,
//! sorted arrays), so equal objects produce byte-identical text.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::filters::{BeliefState, Dits};
use crate::history::{HistoryTree, InitialCondition, IoAlphabet, TaskMachine, View};
use crate::partition::{Labeling, Partition};
use crate::plan::{ExternalModel, PolicyDits};
use crate::ts::{LabeledSystem, StateId, SymbolId, TransitionSystem};

/// The common document for systems and everything built on them. `states`,
/// `alphabet`, and `transitions` are always present; the rest appear only
/// when the object carries them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub transitions: Vec<(StateId, SymbolId, StateId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<StateId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<View>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<Vec<StateId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<Option<SymbolId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_belief: Option<Vec<StateId>>,
}

impl SystemDoc {
    fn base(ts: &TransitionSystem) -> Self {
        SystemDoc {
            states: ts.state_names().to_vec(),
            alphabet: ts.symbol_names().to_vec(),
            transitions: ts.transitions().to_vec(),
            labels: None,
            label_names: None,
            initial: None,
            init: None,
            outputs: None,
            output_names: None,
            view: None,
            actions: None,
            observations: None,
            frontier: None,
            policy: None,
            goal: None,
            initial_belief: None,
        }
    }

    pub fn from_transition_system(ts: &TransitionSystem) -> Self {
        Self::base(ts)
    }

    pub fn to_transition_system(&self) -> Result<TransitionSystem> {
        TransitionSystem::new(
            self.states.clone(),
            self.alphabet.clone(),
            self.transitions.clone(),
        )
    }

    pub fn from_labeled(sys: &LabeledSystem) -> Self {
        let mut doc = Self::base(&sys.ts);
        doc.labels = Some(sys.labeling.labels().to_vec());
        doc.label_names = sys.labeling.label_names().map(<[_]>::to_vec);
        doc
    }

    pub fn to_labeled(&self) -> Result<LabeledSystem> {
        let labels = self
            .labels
            .clone()
            .ok_or_else(|| Error::InvalidInput("the document has no labels".into()))?;
        LabeledSystem::new(
            self.to_transition_system()?,
            Labeling::from_ids(labels, self.label_names.clone()),
        )
    }

    /// External models store the observation map in `labels`/`label_names`.
    pub fn from_external(model: &ExternalModel) -> Self {
        let mut doc = Self::base(&model.ts);
        doc.labels = Some(model.obs.labels().to_vec());
        doc.label_names = Some(model.obs.names_or_numeric());
        doc
    }

    pub fn to_external(&self) -> Result<ExternalModel> {
        let labels = self
            .labels
            .clone()
            .ok_or_else(|| Error::InvalidInput("the document has no observation labels".into()))?;
        ExternalModel::new(
            self.to_transition_system()?,
            Labeling::from_ids(labels, self.label_names.clone()),
        )
    }

    fn io_fields(&mut self, io: &IoAlphabet) {
        self.actions = Some(io.action_names().to_vec());
        self.observations = Some(io.observation_names().to_vec());
    }

    fn io_alphabet(&self) -> Result<IoAlphabet> {
        let observations = self
            .observations
            .clone()
            .ok_or_else(|| Error::InvalidInput("the document has no observations".into()))?;
        IoAlphabet::new(self.actions.clone().unwrap_or_default(), observations)
    }

    fn view(&self) -> Result<View> {
        self.view
            .ok_or_else(|| Error::InvalidInput("the document has no view".into()))
    }

    fn doc_outputs(&self) -> Option<Labeling> {
        self.outputs
            .as_ref()
            .map(|raw| Labeling::from_ids(raw.clone(), self.output_names.clone()))
    }

    pub fn from_dits(dits: &Dits) -> Self {
        let mut doc = Self::base(&dits.ts);
        doc.initial = Some(dits.initial);
        if let Some(o) = &dits.outputs {
            doc.outputs = Some(o.labels().to_vec());
            doc.output_names = o.label_names().map(<[_]>::to_vec);
        }
        doc.view = Some(dits.view);
        doc.io_fields(&dits.io);
        doc
    }

    pub fn to_dits(&self) -> Result<Dits> {
        let initial = self
            .initial
            .ok_or_else(|| Error::InvalidInput("the document has no initial state".into()))?;
        Dits::new(
            self.to_transition_system()?,
            initial,
            self.doc_outputs(),
            self.view()?,
            self.io_alphabet()?,
        )
    }

    pub fn from_task_machine(machine: &TaskMachine) -> Self {
        let mut doc = Self::base(&machine.ts);
        doc.initial = Some(machine.initial);
        doc.outputs = Some(machine.outputs.labels().to_vec());
        doc.output_names = machine.outputs.label_names().map(<[_]>::to_vec);
        doc.view = Some(machine.view);
        doc.io_fields(&machine.io);
        doc.goal = machine
            .goal
            .as_ref()
            .map(|g| g.iter().copied().collect());
        doc
    }

    pub fn to_task_machine(&self) -> Result<TaskMachine> {
        let initial = self
            .initial
            .ok_or_else(|| Error::InvalidInput("the document has no initial state".into()))?;
        let outputs = self
            .doc_outputs()
            .ok_or_else(|| Error::InvalidInput("the document has no outputs".into()))?;
        let goal: Option<BTreeSet<usize>> =
            self.goal.as_ref().map(|g| g.iter().copied().collect());
        TaskMachine::new(
            self.to_transition_system()?,
            initial,
            outputs,
            self.view()?,
            self.io_alphabet()?,
            goal,
        )
    }

    pub fn from_plan(plan: &PolicyDits) -> Self {
        let mut doc = Self::from_dits(&plan.dits);
        doc.policy = Some(plan.policy.clone());
        doc
    }

    pub fn to_plan(&self) -> Result<PolicyDits> {
        let policy = self
            .policy
            .clone()
            .ok_or_else(|| Error::InvalidInput("the document has no policy".into()))?;
        PolicyDits::new(self.to_dits()?, policy)
    }

    pub fn from_tree(tree: &HistoryTree) -> Self {
        let mut doc = Self::base(&tree.ts);
        doc.initial = Some(0);
        doc.init = Some(tree.init.clone());
        doc.view = Some(tree.view);
        doc.io_fields(&tree.io);
        doc.frontier = Some(tree.frontier().iter().copied().collect());
        doc
    }

    pub fn to_tree(&self) -> Result<HistoryTree> {
        let tree = HistoryTree::from_parts(
            self.to_transition_system()?,
            self.view()?,
            self.io_alphabet()?,
            self.init.clone().unwrap_or_default(),
        )?;
        if let Some(listed) = &self.frontier {
            let listed: BTreeSet<StateId> = listed.iter().copied().collect();
            if &listed != tree.frontier() {
                return Err(Error::InvalidInput(
                    "the listed frontier does not match the tree's leaves".into(),
                ));
            }
        }
        Ok(tree)
    }
}

/// A batch of recorded trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialsDoc {
    pub trials: Vec<crate::history::Trial>,
}

/// Partition document: one block id per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub labels: Vec<usize>,
}

impl PartitionDoc {
    pub fn from_partition(p: &Partition) -> Self {
        PartitionDoc { labels: (0..p.domain_size()).map(|s| p.block_of(s)).collect() }
    }

    pub fn to_partition(&self) -> Partition {
        Partition::from_block_ids(self.labels.clone())
    }
}

/// Belief document: a sorted list of external state ids.
pub fn belief_to_doc(b: &BeliefState) -> Vec<StateId> {
    b.members().to_vec()
}

pub fn belief_from_doc(members: Vec<StateId>) -> BeliefState {
    BeliefState::new(members)
}

/// Parses any of the document types from JSON text.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))
}

/// Canonical JSON emission: pretty, two-space indent, trailing newline.
pub fn emit_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents always serialize");
    text.push('\n');
    text
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a transition system as DOT text, states in id order and edges in
/// the canonical transition order. Labels, when given, are appended to the
/// state names; the initial state, when given, is drawn with a double
/// border.
pub fn to_dot(
    ts: &TransitionSystem,
    labels: Option<&Labeling>,
    initial: Option<StateId>,
) -> String {
    let mut out = String::from("digraph system {\n  rankdir=LR;\n  node [shape=circle];\n");
    for s in 0..ts.state_count() {
        let mut text = ts.state_name(s).to_string();
        if let Some(l) = labels {
            let id = l.label_of(s);
            match l.label_name(id) {
                Some(name) => text.push_str(&format!(" | {name}")),
                None => text.push_str(&format!(" | {id}")),
            }
        }
        let shape = if initial == Some(s) { " shape=doublecircle" } else { "" };
        out.push_str(&format!("  n{s} [label=\"{}\"{shape}];\n", dot_escape(&text)));
    }
    for &(s, a, t) in ts.transitions() {
        out.push_str(&format!(
            "  n{s} -> n{t} [label=\"{}\"];\n",
            dot_escape(ts.symbol_name(a))
        ));
    }
    out.push_str("}\n");
    out
}
