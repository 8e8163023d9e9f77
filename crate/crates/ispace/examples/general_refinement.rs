//! Sufficient refinements when the underlying system branches.
//!
//! On a deterministic system the coarsest sufficient refinement always
//! exists. Once a state can step to several successors under one symbol,
//! splitting may be forced to separate those successors forever, and then
//! no refinement of the task labeling is sufficient at all. This example
//! shows both outcomes.
//!
//! Run with `cargo run --example general_refinement`.

use ispace::refine::{sufficient_refinement_general, GeneralRefinement};
use ispace::worlds::random_loose_system;
use ispace::{LabeledSystem, Labeling, TransitionSystem};

fn main() -> ispace::Result<()> {
    // A loose sensor model: "blip" may leave the idle state alone or wake
    // the device; both outcomes look the same to the task (label "quiet")
    // and both successors answer "ping" the same way, so a sufficient
    // grouping still exists.
    let ok = TransitionSystem::new(
        vec!["idle".into(), "waking".into(), "active".into()],
        vec!["blip".into(), "ping".into()],
        vec![
            (0, 0, 0),
            (0, 0, 1),
            (1, 0, 1),
            (1, 1, 2),
            (0, 1, 2),
            (2, 0, 2),
            (2, 1, 2),
        ],
    )?;
    let labels = Labeling::from_ids(
        vec![0, 0, 1],
        Some(vec!["quiet".into(), "loud".into()]),
    );
    report("sensor model", sufficient_refinement_general(&LabeledSystem::new(ok, labels)?));

    // A fork whose two branches carry different task labels: any refinement
    // keeps them apart, so the fork state can never predict its own label.
    let bad = TransitionSystem::new(
        vec!["fork".into(), "win".into(), "lose".into()],
        vec!["go".into()],
        vec![(0, 0, 1), (0, 0, 2), (1, 0, 1), (2, 0, 2)],
    )?;
    let labels = Labeling::from_ids(
        vec![0, 1, 0],
        Some(vec!["safe".into(), "goal".into()]),
    );
    report("forked task", sufficient_refinement_general(&LabeledSystem::new(bad, labels)?));

    // Unstructured branching rarely admits any sufficient grouping: in a
    // random loose system a missing transition or a label-splitting fork
    // almost always dooms the whole labeling.
    let mut refined = 0;
    for seed in 0..100 {
        let ts = random_loose_system(6, 2, seed)?;
        let n = ts.state_count();
        let sys = LabeledSystem::new(ts, Labeling::constant(n))?;
        if matches!(sufficient_refinement_general(&sys), GeneralRefinement::Refined(_)) {
            refined += 1;
        }
    }
    println!("random loose systems ever admitting one: {refined} of 100");
    Ok(())
}

fn report(what: &str, outcome: GeneralRefinement) {
    match outcome {
        GeneralRefinement::Refined(r) => println!(
            "{what}: refined into {} blocks (sufficient: {})",
            r.partition.block_count(),
            r.sufficient
        ),
        GeneralRefinement::NoSufficientRefinement { state, symbol, succ_a, succ_b } => println!(
            "{what}: no sufficient refinement exists; state {state} splits under \
             symbol {symbol} into permanently separated successors {succ_a} and {succ_b}"
        ),
    }
}
