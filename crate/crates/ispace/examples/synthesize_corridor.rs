//! Synthesizes a localization policy from scratch and then shrinks it.
//!
//! The planner searches the space of (belief, task state) pairs: an action
//! is safe at a node when every observation it can produce leads to a node
//! already known to be winning. The result is a plan the robot can execute
//! with no access to the hidden state, here for a robot that must work out
//! which L-shaped corridor it lives in.
//!
//! Run with `cargo run --example synthesize_corridor`.

use ispace::filters::localization_task_machine;
use ispace::plan::{
    behavior_equivalent, check_feasible, minimize_for_policy, synthesize_policy,
    FeasibilityVerdict,
};
use ispace::worlds::l_corridor_family;

fn main() -> ispace::Result<()> {
    let family = l_corridor_family(2)?;
    let model = &family.model;
    let prior = &family.initial_belief;
    let task = localization_task_machine(model, prior, 100_000)?;

    let result = synthesize_policy(model, prior, &task, 100_000)?;
    println!(
        "feasible: {} (winning region: {} nodes, achievable starts: {})",
        result.feasible,
        result.winning_nodes,
        result.reachable.len()
    );
    let plan = result.plan.expect("feasible synthesis returns a plan");

    // Plan states pair the belief with the task state; runs stop at states
    // whose output reaches the goal, so their action never fires.
    let io = model.io_alphabet();
    println!("\nsynthesized plan ({} states):", plan.dits.ts.state_count());
    for s in 0..plan.dits.ts.state_count() {
        let output = plan.dits.output_name_of(s).unwrap_or("-");
        let action = match plan.action_of(s) {
            Some(u) if output != "localized" => io.action_names()[u].as_str(),
            _ => "-",
        };
        println!("  {:30} {:10} acts {}", plan.dits.ts.state_name(s), output, action);
    }

    // Double-check the plan against the model from every state that can
    // actually start a run.
    match check_feasible(model, &plan, &task, &result.reachable)? {
        FeasibilityVerdict::Feasible => println!("\nverified from all achievable starts"),
        FeasibilityVerdict::Counterexample { state, trace } => {
            println!("\nfails from {}: {:?}", model.ts.state_name(state), trace.termination)
        }
    }

    // The synthesized plan distinguishes more than the policy needs; the
    // minimized plan merges states that always act alike from here on.
    let small = minimize_for_policy(&plan)?;
    println!(
        "minimized: {} -> {} states, same behavior: {}",
        plan.dits.ts.state_count(),
        small.dits.ts.state_count(),
        behavior_equivalent(&plan, &small)?
    );
    Ok(())
}
