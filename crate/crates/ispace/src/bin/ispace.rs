//! Command-line front end: every operation reads and writes the JSON
//! documents from the library's io module, so commands compose into
//! pipelines. Identical invocations produce byte-identical output.
//!
//! Exit codes: 0 the requested property holds or the artifact was produced;
//! 1 a checked property fails (witness on stdout); 2 malformed input;
//! 3 no solution exists; 4 a size cap was exceeded.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ispace::filters::{
    derive_dits, reachable_belief_dits, run_ndet_filter, BeliefState, DEFAULT_BELIEF_CAP,
};
use ispace::history::{
    build_history_tree, label_tree, learn_dits_from_trials, InitialCondition, IoAlphabet,
    LearnMode, Trial, View, DEFAULT_TREE_CAP,
};
use ispace::io::{emit_json, parse_json, PartitionDoc, SystemDoc, TrialsDoc};
use ispace::partition::Labeling;
use ispace::plan::{
    check_feasible, compute_reachable_set, couple_and_run, minimize_for_policy, synthesize_policy,
    FeasibilityVerdict, Termination, DEFAULT_SYNTHESIS_CAP,
};
use ispace::refine::{
    certify_minimality, minimal_sufficient_refinement, sufficient_refinement_general,
    GeneralRefinement, MinimalityCertificate, ModeKind, RefinementMode,
};
use ispace::ts::{DeterminismVerdict, FullnessVerdict, SufficiencyVerdict};
use ispace::worlds::{
    consistency_goal_machine, gate_world, l_corridor_family, random_automaton, random_labeling,
    random_loose_system, GateWorldConfig, WorldConfig,
};
use ispace::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ispace",
    version,
    about = "Sufficiency checking, filter minimization, and policy synthesis \
             over finite transition systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct OutOpt {
    /// Write the result to this file instead of stdout.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    All,
    Determinism,
    Fullness,
    Sufficiency,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    FrontierWildcard,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Observations,
    Pairs,
}

impl From<ViewArg> for View {
    fn from(v: ViewArg) -> View {
        match v {
            ViewArg::Observations => View::Observations,
            ViewArg::Pairs => View::Pairs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WorldArg {
    Gate,
    Corridor,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check determinism, fullness, and (when labels are present)
    /// sufficiency of a system document.
    Check {
        system: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        property: PropertyArg,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Compute the coarsest sufficient refinement of a labeled system and
    /// report the partition, quotient, and minimality certificate.
    Minimize {
        system: PathBuf,
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
        /// Treat states carrying this label as unconstrained wildcards
        /// (frontier-wildcard mode only).
        #[arg(long)]
        free_label: Option<String>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Collapse a labeled system by its label classes (or by an explicit
    /// partition) without checking sufficiency.
    Quotient {
        system: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Build the complete history tree of a view up to a depth.
    BuildTree {
        #[arg(long, value_enum)]
        view: ViewArg,
        #[arg(long)]
        depth: usize,
        /// Take the action/observation alphabet from this external model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        observations: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        actions: Vec<String>,
        /// Known initial external state.
        #[arg(long, conflicts_with = "init_set")]
        init_state: Option<usize>,
        /// Known set of possible initial external states.
        #[arg(long, value_delimiter = ',')]
        init_set: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_TREE_CAP)]
        cap: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Label every tree node by running a task machine over its history.
    Label {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        machine: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Derive a deterministic filter from a tree and a sufficient partition.
    Filter {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Track belief states: replay a trial, or close the belief update into
    /// a deterministic filter.
    Belief {
        #[arg(long)]
        model: PathBuf,
        /// Prior belief as state ids; defaults to the model's declared
        /// initial belief, then to all states.
        #[arg(long, value_delimiter = ',')]
        prior: Option<Vec<usize>>,
        /// Replay this trial instead of building the closure.
        #[arg(long)]
        trial: Option<PathBuf>,
        /// Stage bound for the closure; omit to run to the fixpoint.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BELIEF_CAP)]
        cap: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Run the coupled internal-external system from chosen start states.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, conflicts_with = "all")]
        start: Option<usize>,
        /// Simulate from every external state.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// External states from which some action sequence reaches the task
    /// goal.
    Reach {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Check a plan by exhaustive coupled simulation from every initial
    /// state.
    Feasible {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        task: PathBuf,
        /// Initial states; defaults to the goal-reaching set.
        #[arg(long, value_delimiter = ',')]
        from: Option<Vec<usize>>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Synthesize a feasible plan over belief states, or report a
    /// counterexample.
    Synthesize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, value_delimiter = ',')]
        prior: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_SYNTHESIS_CAP)]
        cap: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Merge plan states that choose the same actions along all event
    /// streams.
    MinimizePlan {
        plan: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Learn a deterministic filter from recorded trials.
    Learn {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, value_enum, default_value = "pairs")]
        view: ViewArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        observations: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        actions: Vec<String>,
        #[arg(long, value_enum, default_value = "frontier-wildcard")]
        mode: ModeArg,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Generate an example world (or one of its task machines).
    GenWorld {
        #[command(flatten)]
        args: GenWorldArgs,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Generate a seeded random transition system, optionally labeled.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        symbols: usize,
        #[arg(long)]
        seed: u64,
        /// Also attach a random labeling with this many classes.
        #[arg(long)]
        labels: Option<usize>,
        /// Allow missing and duplicated transitions.
        #[arg(long)]
        loose: bool,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Render any system document as DOT text.
    ExportDot {
        system: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
}

#[derive(Args)]
struct GenWorldArgs {
    /// World configuration as JSON ({"world":"gate","regions":4,...}).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    world: Option<WorldArg>,
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long)]
    active: bool,
    #[arg(long)]
    bound: Option<usize>,
    /// Emit the localization task machine instead of the model
    /// (corridor only).
    #[arg(long)]
    localization_task: bool,
    /// Emit the task machine requiring this many alternating gate
    /// crossings instead of the model (gate only); 0 emits the plain
    /// consistent/inconsistent tracker with no goal.
    #[arg(long)]
    consistency_task: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BELIEF_CAP)]
    cap: usize,
}

struct Outcome {
    text: String,
    code: i32,
    output: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn read_doc(path: &Path) -> Result<SystemDoc> {
    parse_json(&read_text(path)?)
}

fn io_from_sources(
    model: &Option<PathBuf>,
    actions: &[String],
    observations: &[String],
) -> Result<IoAlphabet> {
    match model {
        Some(path) => Ok(read_doc(path)?.to_external()?.io_alphabet()),
        None => IoAlphabet::new(actions.to_vec(), observations.to_vec()),
    }
}

fn term_name(t: &Termination) -> &'static str {
    match t {
        Termination::Goal => "goal",
        Termination::Cycle => "cycle",
        Termination::Horizon => "horizon",
    }
}

#[derive(Serialize)]
struct CheckReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    deterministic: Option<DeterminismVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    full: Option<FullnessVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sufficient: Option<SufficiencyVerdict>,
}

#[derive(Serialize)]
struct MinimizeReport {
    partition: PartitionDoc,
    mode: ModeKind,
    iterations: usize,
    sufficient: bool,
    quotient: SystemDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<MinimalityCertificate>,
}

fn cmd_check(system: &Path, property: PropertyArg) -> Result<Outcome> {
    let doc = read_doc(system)?;
    let ts = doc.to_transition_system()?;
    let check_suff = |required: bool| -> Result<Option<SufficiencyVerdict>> {
        if doc.labels.is_none() {
            if required {
                return Err(Error::InvalidInput(
                    "the document has no labels to check sufficiency of".into(),
                ));
            }
            return Ok(None);
        }
        Ok(Some(doc.to_labeled()?.check_sufficiency()))
    };
    let report = match property {
        PropertyArg::All => CheckReport {
            deterministic: Some(ts.check_determinism()),
            full: Some(ts.check_fullness()),
            sufficient: check_suff(false)?,
        },
        PropertyArg::Determinism => CheckReport {
            deterministic: Some(ts.check_determinism()),
            full: None,
            sufficient: None,
        },
        PropertyArg::Fullness => CheckReport {
            deterministic: None,
            full: Some(ts.check_fullness()),
            sufficient: None,
        },
        PropertyArg::Sufficiency => CheckReport {
            deterministic: None,
            full: None,
            sufficient: check_suff(true)?,
        },
    };
    let ok = report.deterministic.is_none_or(|v| v.holds())
        && report.full.is_none_or(|v| v.holds())
        && report.sufficient.is_none_or(|v| v.holds());
    Ok(Outcome {
        text: emit_json(&report),
        code: if ok { 0 } else { 1 },
        output: None,
    })
}

fn cmd_minimize(system: &Path, mode: ModeArg, free_label: &Option<String>) -> Result<Outcome> {
    let doc = read_doc(system)?;
    let sys = doc.to_labeled()?;
    let mut free_states: BTreeSet<usize> = BTreeSet::new();
    let mode = match mode {
        ModeArg::Strict => {
            if free_label.is_some() {
                return Err(Error::InvalidInput(
                    "--free-label needs --mode frontier-wildcard".into(),
                ));
            }
            RefinementMode::Strict
        }
        ModeArg::FrontierWildcard => {
            let mut frontier: BTreeSet<usize> =
                doc.frontier.clone().unwrap_or_default().into_iter().collect();
            if let Some(name) = free_label {
                let names = sys.labeling.names_or_numeric();
                let id = names.iter().position(|n| n == name).ok_or_else(|| {
                    Error::InvalidInput(format!("no label named {name:?} in the document"))
                })?;
                free_states = (0..sys.ts.state_count())
                    .filter(|&s| sys.labeling.label_of(s) == id)
                    .collect();
                frontier.extend(free_states.iter().copied());
            }
            RefinementMode::FrontierWildcard { frontier, free_labels: free_states.clone() }
        }
    };
    let refinement = match minimal_sufficient_refinement(&sys, &mode) {
        Ok(r) => r,
        Err(Error::NondeterministicInput { .. }) => match sufficient_refinement_general(&sys) {
            GeneralRefinement::Refined(r) => r,
            GeneralRefinement::NoSufficientRefinement { state, symbol, succ_a, succ_b } => {
                let witness = json!({
                    "error": "no_sufficient_refinement",
                    "state": state,
                    "symbol": symbol,
                    "succ_a": succ_a,
                    "succ_b": succ_b,
                });
                return Ok(Outcome { text: emit_json(&witness), code: 3, output: None });
            }
        },
        Err(e) => return Err(e),
    };
    let p = &refinement.partition;
    // Emit a filter when the input is a tree, a plain labeled quotient
    // otherwise.
    let quotient = match doc.to_tree() {
        Ok(tree) if refinement.sufficient => SystemDoc::from_dits(&derive_dits(&tree, p)?),
        _ => SystemDoc::from_labeled(&sys.relabeled_by(p)?.quotient()),
    };
    let certificate = if refinement.sufficient && free_states.is_empty() {
        Some(certify_minimality(&sys, p)?)
    } else {
        None
    };
    let report = MinimizeReport {
        partition: PartitionDoc::from_partition(p),
        mode: refinement.mode,
        iterations: refinement.iterations,
        sufficient: refinement.sufficient,
        quotient,
        certificate,
    };
    Ok(Outcome { text: emit_json(&report), code: 0, output: None })
}

fn cmd_quotient(system: &Path, partition: &Option<PathBuf>) -> Result<Outcome> {
    let mut sys = read_doc(system)?.to_labeled()?;
    if let Some(path) = partition {
        let p: PartitionDoc = parse_json(&read_text(path)?)?;
        sys = sys.relabeled_by(&p.to_partition())?;
    }
    let doc = SystemDoc::from_labeled(&sys.quotient());
    Ok(Outcome { text: emit_json(&doc), code: 0, output: None })
}

fn cmd_simulate(
    model: &Path,
    plan: &Path,
    task: &Path,
    start: Option<usize>,
    all: bool,
    max_steps: usize,
) -> Result<Outcome> {
    let doc = read_doc(model)?;
    let ext = doc.to_external()?;
    let plan = read_doc(plan)?.to_plan()?;
    let task = read_doc(task)?.to_task_machine()?;
    let starts: Vec<usize> = match (start, all) {
        (Some(x), false) => vec![x],
        (None, true) => doc
            .initial_belief
            .clone()
            .unwrap_or_else(|| (0..ext.ts.state_count()).collect()),
        _ => {
            return Err(Error::InvalidInput(
                "choose a start state with --start or pass --all".into(),
            ))
        }
    };
    let io = ext.io_alphabet();
    let mut runs = Vec::new();
    let mut all_goal = true;
    for x in starts {
        let trace = couple_and_run(&ext, &plan, &task, x, max_steps)?;
        all_goal &= trace.termination == Termination::Goal;
        runs.push(json!({
            "state": x,
            "name": ext.ts.state_name(x),
            "termination": term_name(&trace.termination),
            "stages": trace.len(),
            "actions": trace.actions_taken(),
            "trial": trace.to_trial(&io),
        }));
    }
    let report = json!({ "runs": runs, "all_goal": all_goal });
    Ok(Outcome {
        text: emit_json(&report),
        code: if all_goal { 0 } else { 1 },
        output: None,
    })
}

fn cmd_gen_world(args: GenWorldArgs) -> Result<Outcome> {
    let GenWorldArgs {
        config,
        world,
        regions,
        active,
        bound,
        localization_task,
        consistency_task,
        cap,
    } = args;
    let cfg: WorldConfig = match (config, world) {
        (Some(path), None) => parse_json(&read_text(&path)?)?,
        (None, Some(WorldArg::Gate)) => WorldConfig::Gate {
            regions: regions
                .ok_or_else(|| Error::InvalidInput("--regions is required for gate".into()))?,
            active,
        },
        (None, Some(WorldArg::Corridor)) => WorldConfig::Corridor {
            bound: bound
                .ok_or_else(|| Error::InvalidInput("--bound is required for corridor".into()))?,
        },
        _ => {
            return Err(Error::InvalidInput(
                "pass exactly one of --config or --world".into(),
            ))
        }
    };
    let doc = match cfg {
        WorldConfig::Gate { regions, active } => {
            if localization_task {
                return Err(Error::InvalidInput(
                    "--localization-task applies to corridor worlds".into(),
                ));
            }
            match consistency_task {
                Some(0) => SystemDoc::from_task_machine(&ispace::worlds::consistency_machine()),
                Some(k) => SystemDoc::from_task_machine(&consistency_goal_machine(k)?),
                None => SystemDoc::from_external(&gate_world(&GateWorldConfig { regions, active })?),
            }
        }
        WorldConfig::Corridor { bound } => {
            if consistency_task.is_some() {
                return Err(Error::InvalidInput(
                    "--consistency-task applies to gate worlds".into(),
                ));
            }
            let family = l_corridor_family(bound)?;
            if localization_task {
                let machine = ispace::filters::localization_task_machine(
                    &family.model,
                    &family.initial_belief,
                    cap,
                )?;
                SystemDoc::from_task_machine(&machine)
            } else {
                let mut doc = SystemDoc::from_external(&family.model);
                doc.initial_belief = Some(family.initial_belief.members().to_vec());
                doc
            }
        }
    };
    Ok(Outcome { text: emit_json(&doc), code: 0, output: None })
}

fn run(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Check { system, property, out } => {
            cmd_check(&system, property).map(|o| o.with_output(out))
        }
        Cmd::Minimize { system, mode, free_label, out } => {
            cmd_minimize(&system, mode, &free_label).map(|o| o.with_output(out))
        }
        Cmd::Quotient { system, partition, out } => {
            cmd_quotient(&system, &partition).map(|o| o.with_output(out))
        }
        Cmd::BuildTree {
            view,
            depth,
            model,
            observations,
            actions,
            init_state,
            init_set,
            cap,
            out,
        } => {
            let io = io_from_sources(&model, &actions, &observations)?;
            let init = match (init_state, init_set) {
                (Some(x), None) => InitialCondition::State(x),
                (None, Some(xs)) => InitialCondition::Set(xs),
                (None, None) => InitialCondition::Unknown,
                _ => unreachable!("clap forbids both"),
            };
            let tree = build_history_tree(&io, view.into(), init, depth, cap)?;
            Ok(Outcome {
                text: emit_json(&SystemDoc::from_tree(&tree)),
                code: 0,
                output: None,
            }
            .with_output(out))
        }
        Cmd::Label { tree, machine, out } => {
            let tree = read_doc(&tree)?.to_tree()?;
            let machine = read_doc(&machine)?.to_task_machine()?;
            let labeling = label_tree(&machine, &tree)?;
            let mut doc = SystemDoc::from_tree(&tree);
            doc.labels = Some(labeling.labels().to_vec());
            doc.label_names = Some(labeling.names_or_numeric());
            Ok(Outcome { text: emit_json(&doc), code: 0, output: None }.with_output(out))
        }
        Cmd::Filter { tree, partition, out } => {
            let tree = read_doc(&tree)?.to_tree()?;
            let p: PartitionDoc = parse_json(&read_text(&partition)?)?;
            let dits = derive_dits(&tree, &p.to_partition())?;
            Ok(Outcome {
                text: emit_json(&SystemDoc::from_dits(&dits)),
                code: 0,
                output: None,
            }
            .with_output(out))
        }
        Cmd::Belief { model, prior, trial, depth, cap, out } => {
            let doc = read_doc(&model)?;
            let ext = doc.to_external()?;
            let prior = BeliefState::new(match prior {
                Some(ids) => ids,
                None => doc
                    .initial_belief
                    .clone()
                    .unwrap_or_else(|| (0..ext.ts.state_count()).collect()),
            });
            let outcome = match trial {
                Some(path) => {
                    let trial: Trial = parse_json(&read_text(&path)?)?;
                    let beliefs = run_ndet_filter(&ext, &prior, &trial)?;
                    let members: Vec<&[usize]> =
                        beliefs.iter().map(|b| b.members()).collect();
                    Outcome {
                        text: emit_json(&json!({ "beliefs": members })),
                        code: 0,
                        output: None,
                    }
                }
                None => {
                    let bd = reachable_belief_dits(&ext, &prior, depth, cap)?;
                    let mut doc = SystemDoc::from_dits(&bd.dits);
                    doc.initial_belief = Some(prior.members().to_vec());
                    Outcome { text: emit_json(&doc), code: 0, output: None }
                }
            };
            Ok(outcome.with_output(out))
        }
        Cmd::Simulate { model, plan, task, start, all, max_steps, out } => {
            cmd_simulate(&model, &plan, &task, start, all, max_steps).map(|o| o.with_output(out))
        }
        Cmd::Reach { model, task, out } => {
            let ext = read_doc(&model)?.to_external()?;
            let task = read_doc(&task)?.to_task_machine()?;
            let reachable = compute_reachable_set(&ext, &task)?;
            let names: Vec<&str> =
                reachable.iter().map(|&x| ext.ts.state_name(x)).collect();
            let report = json!({
                "reachable": reachable.iter().collect::<Vec<_>>(),
                "names": names,
            });
            Ok(Outcome { text: emit_json(&report), code: 0, output: None }.with_output(out))
        }
        Cmd::Feasible { model, plan, task, from, out } => {
            let ext = read_doc(&model)?.to_external()?;
            let plan = read_doc(&plan)?.to_plan()?;
            let task = read_doc(&task)?.to_task_machine()?;
            let x_init: BTreeSet<usize> = match from {
                Some(ids) => ids.into_iter().collect(),
                None => compute_reachable_set(&ext, &task)?,
            };
            let io = ext.io_alphabet();
            let outcome = match check_feasible(&ext, &plan, &task, &x_init)? {
                FeasibilityVerdict::Feasible => Outcome {
                    text: emit_json(&json!({ "feasible": true, "checked": x_init.len() })),
                    code: 0,
                    output: None,
                },
                FeasibilityVerdict::Counterexample { state, trace } => Outcome {
                    text: emit_json(&json!({
                        "feasible": false,
                        "state": state,
                        "termination": term_name(&trace.termination),
                        "trial": trace.to_trial(&io),
                    })),
                    code: 1,
                    output: None,
                },
            };
            Ok(outcome.with_output(out))
        }
        Cmd::Synthesize { model, task, prior, cap, out } => {
            let doc = read_doc(&model)?;
            let ext = doc.to_external()?;
            let task = read_doc(&task)?.to_task_machine()?;
            let prior = BeliefState::new(match prior {
                Some(ids) => ids,
                None => doc
                    .initial_belief
                    .clone()
                    .unwrap_or_else(|| (0..ext.ts.state_count()).collect()),
            });
            let result = synthesize_policy(&ext, &prior, &task, cap)?;
            let outcome = if let Some(plan) = result.plan {
                let mut doc = SystemDoc::from_plan(&plan);
                doc.initial_belief = Some(prior.members().to_vec());
                Outcome { text: emit_json(&doc), code: 0, output: None }
            } else {
                let (state, trial) = result
                    .counterexample
                    .expect("infeasible synthesis carries a counterexample");
                Outcome {
                    text: emit_json(&json!({
                        "feasible": false,
                        "state": state,
                        "trial": trial,
                    })),
                    code: 3,
                    output: None,
                }
            };
            Ok(outcome.with_output(out))
        }
        Cmd::MinimizePlan { plan, out } => {
            let plan = read_doc(&plan)?.to_plan()?;
            let small = minimize_for_policy(&plan)?;
            Ok(Outcome {
                text: emit_json(&SystemDoc::from_plan(&small)),
                code: 0,
                output: None,
            }
            .with_output(out))
        }
        Cmd::Learn { trials, view, model, observations, actions, mode, out } => {
            let docs: TrialsDoc = parse_json(&read_text(&trials)?)?;
            let io = io_from_sources(&model, &actions, &observations)?;
            let mode = match mode {
                ModeArg::Strict => LearnMode::Strict,
                ModeArg::FrontierWildcard => LearnMode::FrontierWildcard,
            };
            let learned = learn_dits_from_trials(&docs.trials, &io, view.into(), mode)?;
            Ok(Outcome {
                text: emit_json(&SystemDoc::from_dits(&learned.dits)),
                code: 0,
                output: None,
            }
            .with_output(out))
        }
        Cmd::GenWorld { args, out } => cmd_gen_world(args).map(|o| o.with_output(out)),
        Cmd::Random { states, symbols, seed, labels, loose, out } => {
            let ts = if loose {
                random_loose_system(states, symbols, seed)?
            } else {
                random_automaton(states, symbols, seed)?
            };
            let doc = match labels {
                Some(classes) => {
                    let labeling = random_labeling(states, classes, seed.wrapping_add(1))?;
                    SystemDoc::from_labeled(&ispace::ts::LabeledSystem::new(ts, labeling)?)
                }
                None => SystemDoc::from_transition_system(&ts),
            };
            Ok(Outcome { text: emit_json(&doc), code: 0, output: None }.with_output(out))
        }
        Cmd::ExportDot { system, out } => {
            let doc = read_doc(&system)?;
            let ts = doc.to_transition_system()?;
            let annotation = match (&doc.labels, &doc.outputs) {
                (Some(raw), _) => Some(Labeling::from_ids(raw.clone(), doc.label_names.clone())),
                (None, Some(raw)) => {
                    Some(Labeling::from_ids(raw.clone(), doc.output_names.clone()))
                }
                (None, None) => None,
            };
            let dot = ispace::io::to_dot(&ts, annotation.as_ref(), doc.initial);
            Ok(Outcome { text: dot, code: 0, output: None }.with_output(out))
        }
    }
}

impl Outcome {
    fn with_output(mut self, out: OutOpt) -> Outcome {
        self.output = out.output;
        self
    }
}

fn fail(err: Error) -> ! {
    let code = match &err {
        Error::SizeLimit { .. } | Error::TooLarge { .. } => 4,
        Error::InconsistentTrials { .. } => 3,
        Error::NotSufficient(_)
        | Error::InconsistentObservation { .. }
        | Error::MissingTransition { .. } => 1,
        _ => 2,
    };
    if let Error::NotSufficient(v) = &err {
        print!(
            "{}",
            emit_json(&json!({ "error": "not_sufficient", "witness": v }))
        );
    }
    eprintln!("error: {err}");
    std::process::exit(code);
}

fn main() {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(outcome) => {
            match &outcome.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &outcome.text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        std::process::exit(2);
                    }
                }
                None => print!("{}", outcome.text),
            }
            std::process::exit(outcome.code);
        }
        Err(err) => fail(err),
    }
}
