//! Learns a deterministic filter from recorded runs instead of a model.
//!
//! Each trial is a sequence of gate-color observations from the ring world,
//! stamped at every stage with the task machine's verdict ("is the color
//! sequence still consistent with alternating gates?"). The learner builds
//! the prefix tree of the trials, groups histories that can share a filter
//! state, and replays every trial through the result to confirm it would
//! have produced the recorded labels.
//!
//! Run with `cargo run --example learn_filter`.

use ispace::history::{
    apply_task_machine, learn_dits_from_trials, replay_consistency, LearnMode, Trial, View,
};
use ispace::worlds::{consistency_machine, enumerate_observation_traces, gate_world, GateWorldConfig};

fn main() -> ispace::Result<()> {
    let model = gate_world(&GateWorldConfig { regions: 4, active: false })?;
    let machine = consistency_machine();
    let io = model.io_alphabet();
    let all_states: Vec<_> = (0..model.ts.state_count()).collect();

    // Record every run of a fixed length the world can produce, then stamp
    // each stage with the task verdict an oracle would have issued.
    let depth = 6;
    let mut trials = Vec::new();
    for trace in enumerate_observation_traces(&model, &all_states, depth) {
        let events = trace
            .iter()
            .map(|&y| ("y".to_string(), io.observation_names()[y].clone()))
            .collect();
        let mut trial = Trial::new(View::Observations, events)?;
        let mut h = ispace::history::HistoryState::root(Default::default());
        for (stage, &y) in trace.iter().enumerate() {
            h = h.extend(None, y)?;
            let verdict = apply_task_machine(&machine, &h)?;
            trial
                .labels
                .insert(stage + 1, machine.outputs.label_name(verdict).unwrap_or("?").to_string());
        }
        trials.push(trial);
    }
    println!("recorded {} trials of {} observations each", trials.len(), depth);

    let learned = learn_dits_from_trials(&trials, &io, View::Observations, LearnMode::FrontierWildcard)?;
    println!(
        "prefix tree: {} histories ({} without an observed label), learned filter: {} states",
        learned.tree.node_count(),
        learned.unlabeled.len(),
        learned.dits.ts.state_count(),
    );
    for s in 0..learned.dits.ts.state_count() {
        println!(
            "  {} answers {}",
            learned.dits.ts.state_name(s),
            learned.dits.output_name_of(s).unwrap_or("?")
        );
    }

    // Every recorded trial replays through the learned filter with the
    // labels it was stamped with.
    replay_consistency(&learned, &trials)?;
    println!("replay consistency: all {} trials agree", trials.len());
    Ok(())
}
