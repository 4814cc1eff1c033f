//! Command line front end. Every subcommand prints a short human summary,
//! then a JSON report carrying the tool version and the effective run
//! configuration; `--output` redirects the JSON to a file. Reports are
//! deterministic: same argv, inputs, and seed give the same bytes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pomdp_lra_core::approx::{
    anytime_approximate, decide_promise, Budget, HaltReason, PromiseQuery, Verdict,
};
use pomdp_lra_core::belief::GainPartition;
use pomdp_lra_core::blind::{search_periodic, super_support_automaton, support_automaton};
use pomdp_lra_core::chain;
use pomdp_lra_core::corpus;
use pomdp_lra_core::model::{
    parse_belief_spec, parse_pomdp, parse_quantity, render_pomdp, validate, Belief, Pomdp,
};
use pomdp_lra_core::strategy::{
    parse_strategy, render_strategy, FiniteMemoryStrategy, Strategy,
};

const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;
const EXIT_NUMERIC: u8 = 70;

#[derive(Parser)]
#[command(
    name = "pomdp-lra",
    version,
    about = "Exact and approximate analysis of finite POMDPs under the long-run average payoff"
)]
struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the format invariants.
    Validate { file: PathBuf },
    /// Exact long-run average gain of a strategy on a model.
    Evaluate {
        file: PathBuf,
        /// Strategy file (finite_memory, eventually_periodic, or finite_recall).
        #[arg(long)]
        strategy: PathBuf,
        /// Initial belief as "state:prob,..." with fraction support;
        /// defaults to the model's initial belief.
        #[arg(long)]
        belief: Option<String>,
    },
    /// Seeded Monte Carlo run of a strategy on a model.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        belief: Option<String>,
        /// Also write the full trace as JSON lines to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Best eventually periodic word on a blind model, exhaustively over
    /// prefix and period length bounds.
    SearchPeriodic {
        file: PathBuf,
        #[arg(long)]
        max_prefix: usize,
        #[arg(long)]
        max_period: usize,
        #[arg(long)]
        belief: Option<String>,
    },
    /// Reachable support automaton of a blind model; with a partition, the
    /// per-block super-support automaton.
    Supports {
        file: PathBuf,
        /// Blocks as "state,state:gain;state:gain" with strictly
        /// descending gains.
        #[arg(long)]
        partition: Option<String>,
        #[arg(long, value_enum, default_value_t = DumpFormat::Json)]
        format: DumpFormat,
        #[arg(long)]
        belief: Option<String>,
    },
    /// Anytime lower/upper bounds on the value by transducer enumeration.
    Approximate {
        file: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        max_memory: Option<usize>,
        #[arg(long)]
        max_candidates: Option<u64>,
        #[arg(long)]
        belief: Option<String>,
    },
    /// Decide the promised side of "value vs x"; exits 0 (at least), 1 (at
    /// most), or 2 (unknown).
    Decide {
        file: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        max_memory: Option<usize>,
        #[arg(long)]
        max_candidates: Option<u64>,
        #[arg(long)]
        belief: Option<String>,
    },
    /// Write a bundled example model and its companion strategies.
    Examples {
        #[arg(long, value_parser = ["ex1", "ex2", "triv1"])]
        name: String,
        /// Directory to write into; created if missing.
        #[arg(long)]
        emit: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Json,
    Dot,
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numeric(m) => m,
        }
    }
}

fn input(err: impl std::fmt::Display) -> Failure {
    Failure::Input(err.to_string())
}

fn numeric(err: impl std::fmt::Display) -> Failure {
    Failure::Numeric(err.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            use std::io::Write;
            let _ = writeln!(std::io::stderr(), "error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

/// Writes to stdout; a closed pipe ends the process quietly (141, as if
/// killed by SIGPIPE) instead of panicking. Durable side effects are done
/// before any printing, so nothing is lost.
fn put(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if out.write_all(text.as_bytes()).is_err() || out.flush().is_err() {
        std::process::exit(141);
    }
}

fn load_pomdp(path: &PathBuf) -> Result<Pomdp, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_pomdp(&text).map_err(input)
}

fn load_strategy(path: &PathBuf, pomdp: &Pomdp) -> Result<Strategy, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_strategy(&text, pomdp).map_err(input)
}

fn resolve_belief(pomdp: &Pomdp, spec: &Option<String>) -> Result<Belief, Failure> {
    match spec {
        Some(s) => parse_belief_spec(s, pomdp).map_err(input),
        None => Ok(pomdp.initial_belief.clone()),
    }
}

/// Blocks as "state,state:gain;state:gain"; gains accept fractions.
fn parse_partition_spec(spec: &str, pomdp: &Pomdp) -> Result<GainPartition, Failure> {
    let mut blocks = Vec::new();
    let mut gains = Vec::new();
    for part in spec.split(';') {
        let (states, gain) = part
            .rsplit_once(':')
            .ok_or_else(|| Failure::Input(format!("partition block '{part}' lacks ':gain'")))?;
        let mut block = Vec::new();
        for name in states.split(',') {
            let name = name.trim();
            let k = pomdp
                .state_index(name)
                .ok_or_else(|| Failure::Input(format!("unknown state '{name}'")))?;
            block.push(k);
        }
        block.sort_unstable();
        blocks.push(block);
        gains.push(parse_quantity(gain.trim()).map_err(input)?);
    }
    GainPartition::new(blocks, gains).map_err(input)
}

fn tolerances() -> Value {
    json!({"validation": 1e-9, "support": 1e-12})
}

/// Finite floats stay numbers; infinities (unset bounds) become null.
fn bound(value: f64) -> Value {
    if value.is_finite() {
        json!(value)
    } else {
        Value::Null
    }
}

fn strategy_value(pomdp: &Pomdp, sigma: &FiniteMemoryStrategy) -> Value {
    let text = render_strategy(pomdp, &Strategy::FiniteMemory(sigma.clone()));
    serde_json::from_str(&text).expect("rendered strategies are valid JSON")
}

fn emit(output: &Option<PathBuf>, human: String, report: Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    if let Some(path) = output {
        fs::write(path, &text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    put(&human);
    if output.is_none() {
        put(&text);
    }
    Ok(())
}

fn emit_text(output: &Option<PathBuf>, text: String) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            put(&text);
            Ok(())
        }
    }
}

fn config_value(subcommand: &str, output: &Option<PathBuf>, fields: Value) -> Value {
    let mut config = json!({
        "subcommand": subcommand,
        "tolerances": tolerances(),
        "output": output.as_ref().map(|p| p.display().to_string()),
    });
    if let (Value::Object(into), Value::Object(from)) = (&mut config, fields) {
        into.extend(from);
    }
    json!({"version": env!("CARGO_PKG_VERSION"), "config": config})
}

fn report(base: Value, body: Value) -> Value {
    let mut report = base;
    if let (Value::Object(into), Value::Object(from)) = (&mut report, body) {
        into.extend(from);
    }
    report
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let output = cli.output;
    match cli.command {
        Command::Validate { file } => {
            let text = fs::read_to_string(&file)
                .map_err(|e| Failure::Input(format!("{}: {e}", file.display())))?;
            let base = config_value(
                "validate",
                &output,
                json!({"file": file.display().to_string()}),
            );
            // Violations found by the parser (malformed document, bad
            // shapes) surface as input errors; validate() covers the
            // numeric invariants of a well-formed model.
            let pomdp = parse_pomdp(&text).map_err(input)?;
            let checked = validate(&pomdp);
            let violations: Vec<String> =
                checked.violations.iter().map(|v| v.to_string()).collect();
            let mut human = String::new();
            if checked.is_valid() {
                human.push_str("valid\n");
            } else {
                for v in &violations {
                    human.push_str(v);
                    human.push('\n');
                }
            }
            emit(
                &output,
                human,
                report(base, json!({"valid": checked.is_valid(), "violations": violations})),
            )?;
            Ok(if checked.is_valid() { 0 } else { EXIT_INPUT })
        }
        Command::Evaluate {
            file,
            strategy,
            belief,
        } => {
            let pomdp = load_pomdp(&file)?;
            let p1 = resolve_belief(&pomdp, &belief)?;
            let sigma = load_strategy(&strategy, &pomdp)?.to_finite_memory(pomdp.n_signals());
            let result = chain::evaluate(&pomdp, &p1, &sigma).map_err(numeric)?;
            let base = config_value(
                "evaluate",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "strategy": strategy.display().to_string(),
                    "belief": belief,
                }),
            );
            let per_state: Value = pomdp
                .states
                .iter()
                .enumerate()
                .map(|(k, name)| (name.clone(), json!(result.per_state_gains[k])))
                .collect::<serde_json::Map<_, _>>()
                .into();
            let constant: Value = pomdp
                .states
                .iter()
                .enumerate()
                .map(|(k, name)| (name.clone(), json!(result.constant_gain[k])))
                .collect::<serde_json::Map<_, _>>()
                .into();
            let classes: Vec<Value> = result
                .classes
                .iter()
                .map(|c| {
                    let nodes: Vec<Value> = c
                        .nodes
                        .iter()
                        .zip(&c.stationary)
                        .map(|(&(k, mem), w)| {
                            json!({
                                "state": pomdp.states[k],
                                "memory": sigma.memory_states[mem],
                                "weight": w,
                            })
                        })
                        .collect();
                    json!({"gain": c.gain, "nodes": nodes})
                })
                .collect();
            emit(
                &output,
                format!("overall gain {:.9}\n", result.overall_gain),
                report(
                    base,
                    json!({
                        "overall_gain": result.overall_gain,
                        "per_state_gains": per_state,
                        "constant_gain": constant,
                        "recurrent_classes": classes,
                    }),
                ),
            )?;
            Ok(0)
        }
        Command::Simulate {
            file,
            strategy,
            horizon,
            seed,
            belief,
            trace,
        } => {
            if horizon == 0 {
                return Err(Failure::Input("horizon must be positive".into()));
            }
            let pomdp = load_pomdp(&file)?;
            let p1 = resolve_belief(&pomdp, &belief)?;
            let sigma = load_strategy(&strategy, &pomdp)?.to_finite_memory(pomdp.n_signals());
            let base = config_value(
                "simulate",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "strategy": strategy.display().to_string(),
                    "belief": belief,
                    "horizon": horizon,
                    "seed": seed,
                    "trace": trace.as_ref().map(|p| p.display().to_string()),
                }),
            );
            let average = match &trace {
                Some(path) => {
                    let (rows, average) =
                        chain::simulate(&pomdp, &p1, &sigma, horizon, seed).map_err(numeric)?;
                    let lines = chain::trace_to_jsonl(&pomdp, &sigma, &rows);
                    fs::write(path, lines)
                        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                    average
                }
                None => chain::simulate_average(&pomdp, &p1, &sigma, horizon, seed)
                    .map_err(numeric)?,
            };
            emit(
                &output,
                format!("empirical average {average:.9}\n"),
                report(base, json!({"empirical_average": average})),
            )?;
            Ok(0)
        }
        Command::SearchPeriodic {
            file,
            max_prefix,
            max_period,
            belief,
        } => {
            let pomdp = load_pomdp(&file)?;
            let p1 = resolve_belief(&pomdp, &belief)?;
            let found =
                search_periodic(&pomdp, &p1, max_prefix, max_period).map_err(input)?;
            let base = config_value(
                "search-periodic",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "belief": belief,
                    "max_prefix": max_prefix,
                    "max_period": max_period,
                }),
            );
            let prefix: Vec<&str> =
                found.prefix.iter().map(|&a| pomdp.actions[a].as_str()).collect();
            let period: Vec<&str> =
                found.period.iter().map(|&a| pomdp.actions[a].as_str()).collect();
            emit(
                &output,
                format!(
                    "best word prefix [{}] period [{}] gain {:.9}\n",
                    prefix.join(" "),
                    period.join(" "),
                    found.gain
                ),
                report(
                    base,
                    json!({
                        "prefix": prefix,
                        "period": period,
                        "gain": found.gain,
                        "candidates": found.candidates,
                        "truncated": found.truncated,
                    }),
                ),
            )?;
            Ok(0)
        }
        Command::Supports {
            file,
            partition,
            format,
            belief,
        } => {
            let pomdp = load_pomdp(&file)?;
            let base = config_value(
                "supports",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "belief": belief,
                    "partition": partition,
                    "format": match format { DumpFormat::Json => "json", DumpFormat::Dot => "dot" },
                }),
            );
            let (json_dump, dot_dump) = match &partition {
                Some(spec) => {
                    let partition = parse_partition_spec(spec, &pomdp)?;
                    let automaton =
                        super_support_automaton(&pomdp, &partition).map_err(input)?;
                    (automaton.to_json(&pomdp), automaton.to_dot(&pomdp))
                }
                None => {
                    let p1 = resolve_belief(&pomdp, &belief)?;
                    let automaton = support_automaton(&pomdp, &p1).map_err(input)?;
                    (automaton.to_json(&pomdp), automaton.to_dot(&pomdp))
                }
            };
            match format {
                DumpFormat::Dot => emit_text(&output, dot_dump)?,
                DumpFormat::Json => {
                    let automaton: Value =
                        serde_json::from_str(&json_dump).expect("dumps are valid JSON");
                    let nodes = automaton["nodes"].as_array().map_or(0, Vec::len);
                    emit(
                        &output,
                        format!("{nodes} reachable supports\n"),
                        report(base, json!({"automaton": automaton})),
                    )?;
                }
            }
            Ok(0)
        }
        Command::Approximate {
            file,
            epsilon,
            max_memory,
            max_candidates,
            belief,
        } => {
            if !(epsilon > 0.0) {
                return Err(Failure::Input(format!(
                    "epsilon must be positive, got {epsilon}"
                )));
            }
            let pomdp = load_pomdp(&file)?;
            let p1 = resolve_belief(&pomdp, &belief)?;
            let budget = Budget {
                max_memory,
                max_candidates,
            };
            let base = config_value(
                "approximate",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "belief": belief,
                    "epsilon": epsilon,
                    "max_memory": max_memory,
                    "max_candidates": max_candidates,
                }),
            );
            let result = anytime_approximate(&pomdp, &p1, epsilon, &budget).map_err(numeric)?;
            let halt = match result.halt {
                HaltReason::GapClosed => "gap_closed",
                HaltReason::BudgetExhausted => "budget_exhausted",
            };
            emit(
                &output,
                format!(
                    "lower {:.9} upper {:.9} ({halt})\n",
                    result.lower_bound, result.upper_bound
                ),
                report(
                    base,
                    json!({
                        "lower_bound": bound(result.lower_bound),
                        "upper_bound": result.upper_bound,
                        "halt": halt,
                        "epsilon": result.epsilon,
                        "candidates_evaluated": result.candidates_evaluated,
                        "memory_sizes_exhausted": result.memory_sizes_exhausted,
                        "witness": result
                            .witness
                            .as_ref()
                            .map(|w| strategy_value(&pomdp, w)),
                    }),
                ),
            )?;
            Ok(0)
        }
        Command::Decide {
            file,
            x,
            epsilon,
            max_memory,
            max_candidates,
            belief,
        } => {
            if !(epsilon > 0.0) || !(0.0..=1.0).contains(&x) {
                return Err(Failure::Input(format!(
                    "decide needs x in [0,1] and positive epsilon, got x={x} epsilon={epsilon}"
                )));
            }
            let pomdp = load_pomdp(&file)?;
            let p1 = resolve_belief(&pomdp, &belief)?;
            let query = PromiseQuery {
                x,
                epsilon,
                budget: Budget {
                    max_memory,
                    max_candidates,
                },
            };
            let base = config_value(
                "decide",
                &output,
                json!({
                    "file": file.display().to_string(),
                    "belief": belief,
                    "x": x,
                    "epsilon": epsilon,
                    "max_memory": max_memory,
                    "max_candidates": max_candidates,
                }),
            );
            let decision = decide_promise(&pomdp, &p1, &query).map_err(numeric)?;
            let (verdict, code) = match decision.verdict {
                Verdict::AtLeastXPlusEps => ("at_least_x_plus_eps", 0u8),
                Verdict::AtMostXMinusEps => ("at_most_x_minus_eps", 1),
                Verdict::Unknown => ("unknown", 2),
            };
            emit(
                &output,
                format!("verdict {verdict}\n"),
                report(
                    base,
                    json!({
                        "verdict": verdict,
                        "x": decision.x,
                        "epsilon": decision.epsilon,
                        "lower_bound": bound(decision.lower_bound),
                        "upper_bound": decision.upper_bound,
                        "candidates_evaluated": decision.candidates_evaluated,
                        "witness": decision
                            .witness
                            .as_ref()
                            .map(|w| strategy_value(&pomdp, w)),
                    }),
                ),
            )?;
            Ok(code)
        }
        Command::Examples { name, emit: dir } => {
            fs::create_dir_all(&dir)
                .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
            let mut files: Vec<(String, String)> = Vec::new();
            match name.as_str() {
                "ex1" => {
                    let pomdp = corpus::ex1();
                    files.push(("ex1.pomdp.json".into(), render_pomdp(&pomdp)));
                    files.push((
                        "alt_ba.strat.json".into(),
                        render_strategy(
                            &pomdp,
                            &Strategy::FiniteMemory(corpus::ex1_alternating()),
                        ),
                    ));
                    files.push((
                        "const_a.strat.json".into(),
                        render_strategy(
                            &pomdp,
                            &Strategy::FiniteMemory(corpus::ex1_constant_a()),
                        ),
                    ));
                }
                "ex2" => {
                    let pomdp = corpus::ex2();
                    files.push(("ex2.pomdp.json".into(), render_pomdp(&pomdp)));
                    files.push((
                        "ex2_opt.strat.json".into(),
                        render_strategy(&pomdp, &Strategy::FiniteMemory(corpus::ex2_optimal())),
                    ));
                    for (i, sigma) in corpus::ex2_recall1_strategies().into_iter().enumerate() {
                        files.push((
                            format!("ex2_recall1_{i:02}.strat.json"),
                            render_strategy(&pomdp, &Strategy::FiniteRecall(sigma)),
                        ));
                    }
                }
                "triv1" => {
                    files.push(("triv1.pomdp.json".into(), render_pomdp(&corpus::triv1())));
                }
                other => {
                    return Err(Failure::Input(format!("unknown example '{other}'")));
                }
            }
            let mut human = String::new();
            let mut written = Vec::new();
            for (file_name, text) in &files {
                let path = dir.join(file_name);
                fs::write(&path, text)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                human.push_str(&format!("wrote {}\n", path.display()));
                written.push(file_name.clone());
            }
            let base = config_value(
                "examples",
                &output,
                json!({"name": name, "emit": dir.display().to_string()}),
            );
            emit(&output, human, report(base, json!({"written": written})))?;
            Ok(0)
        }
    }
}
