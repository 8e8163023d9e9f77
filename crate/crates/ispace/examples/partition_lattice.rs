//! Partitions of a state set form a lattice, and the coarsest sufficient
//! refinement lives at a precise spot in it. This example exercises the
//! lattice operations and cross-checks the refinement engine against an
//! exhaustive oracle that tries every partition.
//!
//! Run with `cargo run --example partition_lattice`.

use ispace::refine::{brute_force_msr, minimal_sufficient_refinement, RefinementMode};
use ispace::worlds::{random_automaton, random_labeling};
use ispace::{LabeledSystem, Partition};

fn main() -> ispace::Result<()> {
    // Meets and joins on a six-element domain.
    let by_parity = Partition::from_block_ids(vec![0, 1, 0, 1, 0, 1]);
    let by_third = Partition::from_block_ids(vec![0, 0, 1, 1, 2, 2]);
    let meet = by_parity.common_refinement(&by_third);
    let join = by_parity.common_coarsening(&by_third);
    println!("parity blocks:  {:?}", by_parity.blocks());
    println!("thirds blocks:  {:?}", by_third.blocks());
    println!("meet (both):    {:?}", meet.blocks());
    println!("join (either):  {:?}", join.blocks());
    println!("meet refines both: {}", meet.refines(&by_parity) && meet.refines(&by_third));
    println!(
        "both refine join:  {}",
        by_parity.refines(&join) && by_third.refines(&join)
    );

    // The fast engine must land on exactly the partition the oracle finds
    // by enumerating all of them, and the oracle confirms it is the only
    // coarsest sufficient one.
    println!("\nengine vs exhaustive oracle on random automata:");
    let mut checked = 0;
    for seed in 0..25 {
        let ts = random_automaton(6, 2, seed)?;
        let labels = random_labeling(6, 2, seed ^ 0x9e37)?;
        let sys = LabeledSystem::new(ts, labels)?;
        let fast = minimal_sufficient_refinement(&sys, &RefinementMode::Strict)?;
        let oracle = brute_force_msr(&sys)?.expect("6 states is within oracle range");
        assert_eq!(
            fast.partition, oracle.partition,
            "engine and oracle disagree on seed {seed}"
        );
        assert!(oracle.unique_minimum, "coarsest sufficient refinement not unique on seed {seed}");
        checked += 1;
    }
    println!("  {checked} systems: identical partitions, uniqueness confirmed on each");

    // Sufficient partitions of one automaton are closed under join: group
    // two states whenever either grouping does and the result still tracks
    // itself. This is what makes the coarsest one unique.
    let ts = random_automaton(6, 2, 3)?;
    let sys_a = LabeledSystem::new(ts.clone(), random_labeling(6, 2, 0)?)?;
    let sys_b = LabeledSystem::new(ts, random_labeling(6, 3, 2)?)?;
    let msr_a = minimal_sufficient_refinement(&sys_a, &RefinementMode::Strict)?.partition;
    let msr_b = minimal_sufficient_refinement(&sys_b, &RefinementMode::Strict)?.partition;
    let joined = msr_a.common_coarsening(&msr_b);
    let still = sys_a.relabeled_by(&joined)?.check_sufficiency().holds();
    println!(
        "\njoin of two sufficient partitions ({} and {} blocks -> {}) stays sufficient: {still}",
        msr_a.block_count(),
        msr_b.block_count(),
        joined.block_count()
    );
    Ok(())
}
