//! Checks whether a labeling of a transition system can track itself: the
//! label of a state plus the next symbol must determine the next label.
//!
//! Run with `cargo run --example sufficiency_check`.

use ispace::{LabeledSystem, Labeling, TransitionSystem};

fn main() -> ispace::Result<()> {
    // A four-state cycle with a reset symbol. Resetting from b rewinds to
    // the start, but resetting from d only backs up one step.
    let ts = TransitionSystem::new(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        vec!["step".into(), "reset".into()],
        vec![
            (0, 0, 1),
            (1, 0, 2),
            (2, 0, 3),
            (3, 0, 0),
            (0, 1, 0),
            (1, 1, 0),
            (2, 1, 2),
            (3, 1, 1),
        ],
    )?;

    // Group the states into "even" and "odd" positions on the cycle.
    let coarse = Labeling::from_ids(vec![0, 1, 0, 1], Some(vec!["even".into(), "odd".into()]));
    let sys = LabeledSystem::new(ts, coarse)?;

    let verdict = sys.check_sufficiency();
    println!("even/odd labeling sufficient: {}", verdict.holds());
    if let Some(v) = verdict.violation() {
        let name = |s| sys.ts.state_name(s);
        let shared = sys.labeling.label_of(v.state_a);
        println!(
            "  witness: {} and {} share label '{}' but symbol '{}' sends them to \
             differently labeled states {} and {}",
            name(v.state_a),
            name(v.state_b),
            sys.labeling.label_name(shared).unwrap_or("?"),
            sys.ts.symbol_name(v.symbol),
            name(v.succ_a),
            name(v.succ_b),
        );
    }

    // Sufficiency is exactly determinism of the quotient system.
    let q = sys.quotient();
    println!("quotient deterministic: {}", q.ts.check_determinism().holds());

    // The identity labeling is always sufficient on a deterministic system.
    let fine = sys.relabeled_by(&ispace::Partition::identity(sys.ts.state_count()))?;
    println!("identity labeling sufficient: {}", fine.check_sufficiency().holds());

    // The coarsest sufficient refinement repairs the labeling by splitting
    // as few blocks as possible; here it ends up separating every state.
    let refined =
        ispace::refine::minimal_sufficient_refinement(&sys, &ispace::refine::RefinementMode::Strict)?;
    let repaired = sys.relabeled_by(&refined.partition)?;
    println!(
        "coarsest sufficient refinement: {} blocks, sufficient: {}",
        refined.partition.block_count(),
        repaired.check_sufficiency().holds()
    );

    Ok(())
}
