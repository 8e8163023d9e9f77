//! Compresses a task labeling on a history tree down to the smallest
//! deterministic filter that still tracks the task.
//!
//! A robot wanders a ring of regions separated by alternately colored gates
//! and only sees the color of each gate it crosses. The task machine flags
//! whether the color sequence so far is consistent with the gate layout
//! (colors must alternate). The tree of all observation histories is huge;
//! the minimized filter that answers "still consistent?" has four states.
//!
//! Run with `cargo run --example filter_minimization`.

use ispace::history::{build_history_tree, label_tree, InitialCondition, View};
use ispace::refine::{certify_minimality, minimal_sufficient_refinement, MergeObstruction};
use ispace::worlds::{consistency_machine, gate_world, GateWorldConfig};
use ispace::LabeledSystem;

fn main() -> ispace::Result<()> {
    let model = gate_world(&GateWorldConfig { regions: 4, active: false })?;
    let machine = consistency_machine();
    let io = model.io_alphabet();

    for depth in [4, 5, 6] {
        let tree = build_history_tree(&io, View::Observations, InitialCondition::Unknown, depth, 1 << 20)?;
        let labels = label_tree(&machine, &tree)?;
        let sys = LabeledSystem::new(tree.ts.clone(), labels)?;

        // Frontier histories have unseen futures, so the refinement may
        // regroup them freely instead of pinning them to dead-end blocks.
        let result = minimal_sufficient_refinement(&sys, &tree.wildcard_mode())?;
        println!(
            "depth {}: {} histories -> {} filter states ({} splitting rounds)",
            depth,
            tree.node_count(),
            result.partition.block_count(),
            result.iterations
        );

        if depth == 6 {
            let filter = ispace::filters::derive_dits(&tree, &result.partition)?;
            println!("\nminimized filter transitions:");
            for &(s, a, t) in filter.ts.transitions() {
                println!(
                    "  {} --{}--> {}",
                    filter.ts.state_name(s),
                    filter.ts.symbol_name(a),
                    filter.ts.state_name(t)
                );
            }

            // No two filter states can merge: each merge either mixes task
            // labels or makes the filter lose track of itself.
            let cert = certify_minimality(&sys, &result.partition)?;
            println!("\nminimal: {}", cert.is_minimal());
            if let ispace::refine::MinimalityCertificate::Minimal { merges } = cert {
                for m in merges {
                    let why = match m.obstruction {
                        MergeObstruction::BreaksRefinement => "mixes task labels".to_string(),
                        MergeObstruction::BreaksSufficiency { witness } => format!(
                            "loses sufficiency ({})",
                            witness
                        ),
                    };
                    println!("  merging blocks {} and {}: {}", m.block_a, m.block_b, why);
                }
            }
        }
    }
    Ok(())
}
