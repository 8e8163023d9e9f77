//! Runs a three-state plan that keeps a robot crossing alternately colored
//! gates forever, from any starting region, without knowing where it is.
//!
//! In the active gate world the robot blocks one gate color and is then
//! swept through an open gate; it only sees the color it crossed. The plan
//! below remembers nothing but the last color and blocks it, which forces
//! the next crossing onto the other color. A task machine counts
//! alternations and declares the goal after enough of them.
//!
//! Run with `cargo run --example plan_gate_world`.

use ispace::plan::{check_feasible, couple_and_run, FeasibilityVerdict};
use ispace::worlds::{consistency_goal_machine, gate_alternation_plan, gate_world, GateWorldConfig};
use std::collections::BTreeSet;

fn main() -> ispace::Result<()> {
    let model = gate_world(&GateWorldConfig { regions: 6, active: true })?;
    let plan = gate_alternation_plan(&model)?;
    let task = consistency_goal_machine(4)?;

    println!(
        "world: {} states, plan: {} internal states, task: reach {} alternating crossings",
        model.ts.state_count(),
        plan.dits.ts.state_count(),
        4
    );

    // One concrete run, watched stage by stage.
    let trace = couple_and_run(&model, &plan, &task, 0, 50)?;
    let io = model.io_alphabet();
    for stage in &trace.stages {
        println!(
            "  at {} saw {} (plan in {}){}",
            model.ts.state_name(stage.x),
            io.observation_names()[stage.y],
            plan.dits.ts.state_name(stage.istate),
            match stage.action {
                Some(u) => format!(", does {}", io.action_names()[u]),
                None => ", done".to_string(),
            }
        );
    }
    println!("terminated: {:?} after {} actions\n", trace.termination, trace.actions_taken());

    // The same plan works from every state of the world: it never needed to
    // know where it started.
    let everywhere: BTreeSet<_> = (0..model.ts.state_count()).collect();
    match check_feasible(&model, &plan, &task, &everywhere)? {
        FeasibilityVerdict::Feasible => println!("feasible from all {} states", everywhere.len()),
        FeasibilityVerdict::Counterexample { state, trace } => println!(
            "fails from {}: {:?}",
            model.ts.state_name(state),
            trace.termination
        ),
    }
    Ok(())
}
