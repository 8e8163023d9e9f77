//! Serializes systems to the JSON document format the command line tool
//! reads, and renders them as Graphviz DOT.
//!
//! Run with `cargo run --example export_formats`.

use ispace::io::{emit_json, parse_json, to_dot, SystemDoc};
use ispace::worlds::{gate_world, GateWorldConfig};

fn main() -> ispace::Result<()> {
    let model = gate_world(&GateWorldConfig { regions: 4, active: false })?;

    // The JSON document carries the transition structure plus whichever
    // optional sections the object needs; here states, the two crossing
    // symbols, and the color observed in each state.
    let doc = SystemDoc::from_external(&model);
    let text = emit_json(&doc);
    println!("{text}");

    let back: SystemDoc = parse_json(&text)?;
    println!("round-trips intact: {}", back.to_external()? == model);

    // DOT output, one node per state annotated with its observation; pipe
    // it through `dot -Tsvg` to draw it.
    print!("{}", to_dot(&model.ts, Some(&model.obs), Some(0)));
    Ok(())
}
