//! Command-line front end for probabilistic actual cause discovery.
//!
//! Exit codes: 0 = cause found / check passed / artifact written,
//! 1 = no cause / refuted / disagreement, 2 = usage or input error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use pac_core::abs_check::{self, AbstractPacQuery, WStrategy};
use pac_core::abstraction::{self, AbsMode};
use pac_core::bench::{self, BenchReport, GenSpec};
use pac_core::concrete::{self, CandidatePolicy, CauseReport, CheckOutcome, PacQuery, RootPolicy};
use pac_core::refine::{self, RefineConfig};
use pac_core::{format_rat, parse_rat, Dtmc, Predicate};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pac", version, about = "Probabilistic actual causes in acyclic DTMCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Subgraphs,
    WPreserving,
}

#[derive(Args)]
struct ModelArg {
    /// Model file, line-oriented text or JSON.
    #[arg(long)]
    model: String,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Effect predicate, e.g. "pos < 0.6 && halt".
    #[arg(long)]
    effect: String,
    /// Contingency propositions, semicolon-separated.
    #[arg(long, default_value = "")]
    w: String,
    /// Root policy: "initial", "all", or comma-separated state names.
    #[arg(long, default_value = "initial")]
    roots: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a given cause set.
    Check {
        #[command(flatten)]
        query: QueryArgs,
        /// Comma-separated state names of the candidate cause.
        #[arg(long)]
        cause: String,
    },
    /// Search for a cause on the concrete chain.
    Discover {
        #[command(flatten)]
        query: QueryArgs,
        /// Enumerate subsets of eligible states up to this size.
        #[arg(long)]
        subsets: Option<usize>,
        /// Candidate template predicates, semicolon-separated.
        #[arg(long)]
        templates: Option<String>,
        /// Worker threads for the candidate scan.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Single abstract pass over the predicate-induced MDP.
    AbsDiscover {
        #[command(flatten)]
        query: QueryArgs,
        /// Partition predicates, semicolon-separated.
        #[arg(long)]
        preds: String,
        #[arg(long, value_enum, default_value = "subgraphs")]
        strategy: Strategy,
        /// Print the abstract-to-concrete state map.
        #[arg(long)]
        show_map: bool,
    },
    /// Full abstraction-refinement loop.
    Refine {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        preds: String,
        /// Preserved fraction of a split state, rational in (0, 1].
        #[arg(long, default_value = "3/5")]
        alpha: String,
        #[arg(long, default_value_t = 64)]
        max_rounds: usize,
        #[arg(long, value_enum, default_value = "subgraphs")]
        strategy: Strategy,
        /// Fall back to the concrete search if the loop exhausts.
        #[arg(long)]
        fallback: bool,
        /// Print the per-round trace records.
        #[arg(long)]
        trace: bool,
    },
    /// Decompose the chain into stutter-signature subgraphs.
    Subgraphs {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        w: String,
        #[arg(long, default_value_t = 100_000)]
        path_cap: usize,
    },
    /// Emit the SMT-LIB instance for the concrete query.
    ExportSmt {
        #[command(flatten)]
        query: QueryArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<String>,
    },
    /// Emit the SMT-LIB instance for the abstract query.
    ExportSmtAbs {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        preds: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Generate a random model from a spec, or dump a built-in example.
    Gen {
        /// Spec as key=value pairs separated by commas.
        #[arg(long, conflicts_with = "spec_file")]
        spec: Option<String>,
        /// Built-in model instead of a spec: "fig2" or "fig7a".
        #[arg(long, conflicts_with_all = ["spec", "spec_file", "seed"])]
        example: Option<String>,
        /// Spec file with key=value lines.
        #[arg(long)]
        spec_file: Option<String>,
        /// Seed override; falls back to PAC_SEED, then the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Time concrete discovery against the refinement loop.
    Bench {
        /// One case per flag occurrence.
        #[arg(long, required = true)]
        spec: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Split ratio for the refinement side; raise it on large models.
        #[arg(long, default_value = "3/5")]
        alpha: String,
        #[arg(long, default_value_t = 16)]
        max_rounds: usize,
    },
    /// Check the model invariants.
    Validate {
        #[command(flatten)]
        model: ModelArg,
    },
}

fn load_model(path: &str) -> Result<Dtmc, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    Dtmc::parse(&text).map_err(|e| e.to_string())
}

fn parse_w(text: &str) -> Result<Vec<Predicate>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Predicate::parse_list(text).map_err(|e| e.to_string())
}

fn parse_roots(m: &Dtmc, text: &str) -> Result<RootPolicy, String> {
    match text {
        "initial" => Ok(RootPolicy::InitialOnly),
        "all" => Ok(RootPolicy::AllStates),
        names => Ok(RootPolicy::Explicit(parse_states(m, names)?)),
    }
}

fn parse_states(m: &Dtmc, names: &str) -> Result<BTreeSet<usize>, String> {
    names
        .split(',')
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .map(|n| m.state_by_name(n).map(|s| s.id).ok_or_else(|| format!("unknown state `{n}`")))
        .collect()
}

fn name_set(m: &Dtmc, set: &BTreeSet<usize>) -> String {
    let names: Vec<&str> = set.iter().map(|&s| m.states[s].name.as_str()).collect();
    format!("{{{}}}", names.join(","))
}

fn render_report(m: &Dtmc, r: &CauseReport, format: Format) -> String {
    match format {
        Format::Text => format!(
            "cause: {}\npredicate: {}\nroot: {}\np_aw: {}\np_cw: {} (worst root {})\nmode: {}\n",
            name_set(m, &r.cause),
            r.cause_predicate,
            m.states[r.root].name,
            r.p_aw,
            r.p_cw,
            m.states[r.worst_root].name,
            r.mode,
        ),
        Format::Records => format!(
            "cause={} root={} p_aw={} worst={} p_cw={} mode={}\n",
            name_set(m, &r.cause),
            m.states[r.root].name,
            r.p_aw,
            m.states[r.worst_root].name,
            r.p_cw,
            r.mode,
        ),
    }
}

fn build_query<'m>(m: &'m Dtmc, q: &QueryArgs) -> Result<PacQuery<'m>, String> {
    Ok(PacQuery {
        model: m,
        effect: Predicate::parse(&q.effect).map_err(|e| e.to_string())?,
        contingencies: parse_w(&q.w)?,
        roots: parse_roots(m, &q.roots)?,
        candidates: CandidatePolicy::SingleState,
    })
}

fn env_seed() -> Option<u64> {
    std::env::var("PAC_SEED").ok().and_then(|v| v.parse().ok())
}

fn emit(out: &Option<String>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{path}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Check { query, cause } => {
            let m = load_model(&query.model.model)?;
            let q = build_query(&m, &query)?;
            let cause = parse_states(&m, &cause)?;
            match concrete::check_cause(&q, &cause).map_err(|e| e.to_string())? {
                CheckOutcome::Confirmed(r) => {
                    print!("confirmed\n{}", render_report(&m, &r, query.format));
                    Ok(0)
                }
                CheckOutcome::Refuted { failures, diagnostic } => {
                    println!("refuted");
                    if let Some(d) = diagnostic {
                        println!("  {d}");
                    }
                    for f in failures {
                        println!("  {f}");
                    }
                    Ok(1)
                }
            }
        }
        Command::Discover { query, subsets, templates, jobs } => {
            let m = load_model(&query.model.model)?;
            let mut q = build_query(&m, &query)?;
            if let Some(k) = subsets {
                q.candidates = CandidatePolicy::SubsetsUpTo(k);
            }
            if let Some(t) = &templates {
                q.candidates =
                    CandidatePolicy::Templates(Predicate::parse_list(t).map_err(|e| e.to_string())?);
            }
            match concrete::discover_with_jobs(&q, jobs.max(1)).map_err(|e| e.to_string())? {
                Some(r) => {
                    print!("{}", render_report(&m, &r, query.format));
                    Ok(0)
                }
                None => {
                    println!("no cause");
                    Ok(1)
                }
            }
        }
        Command::AbsDiscover { query, preds, strategy, show_map } => {
            let m = load_model(&query.model.model)?;
            let predicates = Predicate::parse_list(&preds).map_err(|e| e.to_string())?;
            let w = parse_w(&query.w)?;
            let mode = match (strategy, w.is_empty()) {
                (Strategy::WPreserving, false) => AbsMode::WPreserving(w.clone()),
                _ => AbsMode::Plain,
            };
            let a = abstraction::abstract_model(&m, &predicates, mode).map_err(|e| e.to_string())?;
            let mut q = AbstractPacQuery::new(
                &a,
                Predicate::parse(&query.effect).map_err(|e| e.to_string())?,
            );
            q.contingencies = w;
            q.strategy = match strategy {
                Strategy::Subgraphs => WStrategy::Subgraphs { path_cap: 100_000 },
                Strategy::WPreserving => WStrategy::WPreserving,
            };
            if show_map {
                print!("{}", a.abs_map());
            }
            match abs_check::discover_abs(&q).map_err(|e| e.to_string())? {
                Some(r) => {
                    for warning in &r.warnings {
                        println!("warning: {warning}");
                    }
                    let names: Vec<String> =
                        r.cause.iter().map(|&i| a.states[i].id.to_string()).collect();
                    print!(
                        "cause: {{{}}}\nconcrete: {}\nroot: {}\np_min_aw: {}\np_max_cw: {} (worst root {})\n",
                        names.join(","),
                        name_set(&m, &r.concrete_cause),
                        a.states[r.root].id,
                        format_rat(&r.p_min_aw),
                        format_rat(&r.p_max_cw),
                        a.states[r.worst_root].id,
                    );
                    if let Some(g) = r.subgraph {
                        println!("subgraph: {g}");
                    }
                    Ok(0)
                }
                None => {
                    println!("no cause");
                    Ok(1)
                }
            }
        }
        Command::Refine { query, preds, alpha, max_rounds, strategy, fallback, trace } => {
            let m = load_model(&query.model.model)?;
            let predicates = Predicate::parse_list(&preds).map_err(|e| e.to_string())?;
            let effect = Predicate::parse(&query.effect).map_err(|e| e.to_string())?;
            let w = parse_w(&query.w)?;
            let cfg = RefineConfig {
                alpha: parse_rat(&alpha).map_err(|e| e.to_string())?,
                max_rounds,
                strategy: match strategy {
                    Strategy::Subgraphs => WStrategy::Subgraphs { path_cap: 100_000 },
                    Strategy::WPreserving => WStrategy::WPreserving,
                },
                fallback_concrete: fallback,
            };
            let (report, rounds) =
                refine::run(&m, &predicates, &effect, &w, &cfg).map_err(|e| e.to_string())?;
            if trace {
                print!("{}", rounds.serialize());
            }
            match report {
                Some(r) => {
                    print!("{}", render_report(&m, &r, query.format));
                    Ok(0)
                }
                None => {
                    println!("no cause");
                    Ok(1)
                }
            }
        }
        Command::Subgraphs { model, w, path_cap } => {
            let m = load_model(&model.model)?;
            let w = parse_w(&w)?;
            let names: Vec<String> = w.iter().map(|p| p.to_string()).collect();
            let subgraphs =
                abstraction::enumerate_subgraphs(&m, &w, path_cap).map_err(|e| e.to_string())?;
            let mut out = String::new();
            for (i, g) in subgraphs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "subgraph {} signature {} paths {}",
                    i,
                    g.signature_text(&names),
                    g.path_count
                );
                out.push_str(&g.serialize(&m));
            }
            print!("{out}");
            Ok(0)
        }
        Command::ExportSmt { query, out } => {
            let m = load_model(&query.model.model)?;
            let q = build_query(&m, &query)?;
            let inst = concrete::export_smt(&q).map_err(|e| e.to_string())?;
            emit(&out, &inst.text)?;
            Ok(0)
        }
        Command::ExportSmtAbs { query, preds, out } => {
            let m = load_model(&query.model.model)?;
            let predicates = Predicate::parse_list(&preds).map_err(|e| e.to_string())?;
            let a = abstraction::abstract_model(&m, &predicates, AbsMode::Plain)
                .map_err(|e| e.to_string())?;
            let mut q = AbstractPacQuery::new(
                &a,
                Predicate::parse(&query.effect).map_err(|e| e.to_string())?,
            );
            q.contingencies = parse_w(&query.w)?;
            let inst = abs_check::export_smt_abs(&q).map_err(|e| e.to_string())?;
            emit(&out, &inst.text)?;
            Ok(0)
        }
        Command::Gen { spec, example, spec_file, seed, json, out } => {
            let m = if let Some(name) = &example {
                match name.as_str() {
                    "fig2" => pac_core::fixtures::fig2_model(),
                    "fig7a" => pac_core::fixtures::fig7a_model(),
                    other => return Err(format!("unknown example `{other}`")),
                }
            } else {
                let text = match (&spec, &spec_file) {
                    (Some(s), _) => s.clone(),
                    (None, Some(f)) => fs::read_to_string(f).map_err(|e| format!("{f}: {e}"))?,
                    (None, None) => String::new(),
                };
                let mut gs = GenSpec::parse(&text).map_err(|e| e.to_string())?;
                if let Some(s) = seed.or_else(env_seed) {
                    gs.seed = s;
                }
                bench::generate(&gs).map_err(|e| e.to_string())?
            };
            let rendered = if json { m.serialize_json() } else { m.serialize() };
            emit(&out, &rendered)?;
            Ok(0)
        }
        Command::Bench { spec, seed, alpha, max_rounds } => {
            let cfg = RefineConfig {
                alpha: parse_rat(&alpha).map_err(|e| e.to_string())?,
                max_rounds,
                fallback_concrete: true,
                ..RefineConfig::default()
            };
            let mut report = BenchReport::default();
            let mut all_agree = true;
            for (i, text) in spec.iter().enumerate() {
                let mut gs = GenSpec::parse(text).map_err(|e| e.to_string())?;
                if let Some(s) = seed.or_else(env_seed) {
                    gs.seed = s;
                }
                let label = format!("case{}-seed{}", i, gs.seed);
                let m = bench::generate(&gs).map_err(|e| e.to_string())?;
                let effect = Predicate::parse("fail").map_err(|e| e.to_string())?;
                if m.satisfying_set(&effect).map_err(|e| e.to_string())?.is_empty() {
                    println!("{label}: no effect states, skipped");
                    continue;
                }
                let preds = bench::default_predicates(&m, &gs.effect_rule);
                let row = bench::compare(&m, &effect, &preds, &label, &cfg)
                    .map_err(|e| e.to_string())?;
                all_agree &= row.agreement;
                report.rows.push(row);
            }
            print!("{}", report.render());
            Ok(if all_agree { 0 } else { 1 })
        }
        Command::Validate { model } => {
            let m = load_model(&model.model)?;
            println!("ok: {} states", m.len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
