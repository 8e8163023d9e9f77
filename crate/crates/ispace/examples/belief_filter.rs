//! Tracks a hidden state as a set: which states of a known model remain
//! consistent with everything seen so far.
//!
//! The model is a family of L-shaped corridors of bounded size, one copy
//! per possible leg length, all overlaid into a single system. The robot
//! knows it starts at the corner but not which corridor it is in; its only
//! sensor says whether the last move hit a wall. Walking east until blocked
//! and then north until blocked measures both legs, shrinking the belief to
//! a single state.
//!
//! Run with `cargo run --example belief_filter`.

use ispace::filters::{ndet_filter_step, reachable_belief_dits};
use ispace::worlds::{l_corridor_family, CORRIDOR_EAST, CORRIDOR_NORTH};

fn main() -> ispace::Result<()> {
    let family = l_corridor_family(2)?;
    let model = &family.model;
    let io = model.io_alphabet();

    let describe = |b: &ispace::filters::BeliefState| {
        let names: Vec<&str> = b.members().iter().map(|&x| model.ts.state_name(x)).collect();
        names.join(" | ")
    };

    println!("prior: {}", describe(&family.initial_belief));

    // Walk one wall-following run and watch the belief contract. Each step
    // maps the set through the action, then keeps only the members that
    // agree with the observation.
    let mut belief = family.initial_belief.clone();
    for (action, seen) in [
        (CORRIDOR_EAST, "0"),
        (CORRIDOR_EAST, "1"),
        (CORRIDOR_NORTH, "0"),
        (CORRIDOR_NORTH, "0"),
    ] {
        belief = ndet_filter_step(model, &belief, action, io.observation_id(seen)?)?;
        println!(
            "after {} seeing {}: {}",
            io.action_names()[action],
            seen,
            describe(&belief)
        );
    }
    match belief.as_singleton() {
        Some(x) => println!("localized: this is {}", model.ts.state_name(x)),
        None => println!("still ambiguous"),
    }

    // An observation no corridor can produce rejects the whole set.
    let err = ndet_filter_step(model, &family.initial_belief, CORRIDOR_EAST, io.observation_id("1")?);
    println!("\nimpossible reading: {}", err.unwrap_err());

    // The filter over all reachable beliefs is itself a deterministic
    // transition system, with one state per distinct belief.
    let bd = reachable_belief_dits(model, &family.initial_belief, None, 10_000)?;
    println!(
        "\nreachable belief filter: {} states over {} event symbols",
        bd.dits.ts.state_count(),
        bd.dits.ts.symbol_count()
    );
    let singletons = bd.beliefs.iter().filter(|b| b.len() == 1).count();
    println!("beliefs that pin down the corridor exactly: {singletons}");
    Ok(())
}
