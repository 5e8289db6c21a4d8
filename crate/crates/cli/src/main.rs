//! `slicekit` command-line front end.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use slicekit::dot;
use slicekit::gsa::convert;
use slicekit::interp::{run_function, Outcome, DEFAULT_FUEL};
use slicekit::ir::{parse_module, print_module, validate, Module};
use slicekit::outline::{apply_rewrite, outline_slice, outlined_name, Outliner};
use slicekit::sbcr::{cleanup_with, generate_corpus, run_sbcr, CorpusSpec, CostModelConfig};
use slicekit::slice::{candidate, Legality};

#[derive(Parser)]
#[command(name = "slicekit", version, about = "Idempotent backward slicing and slice-based code-size reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a module and print its diagnostics.
    Validate { input: PathBuf },
    /// Interpret a function and print its result and trace.
    Run {
        input: PathBuf,
        function: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<i32>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Print the module in gated SSA form.
    Gsa {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute the backward slice of a variable.
    Slice {
        input: PathBuf,
        #[arg(long)]
        criterion: String,
        #[arg(long)]
        function: Option<String>,
        /// Emit the dependence graph as DOT, to stdout or to the given path.
        #[arg(long, num_args = 0..=1, default_missing_value = "-")]
        dot: Option<String>,
    },
    /// Outline the slice of a variable and rewrite its definition into a call.
    Outline {
        input: PathBuf,
        #[arg(long)]
        criterion: String,
        #[arg(long)]
        function: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the full code-size reduction pass.
    Sbcr {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the JSON report to this path (`-` for stdout).
        #[arg(long)]
        json: Option<String>,
        #[command(flatten)]
        cost: CostFlags,
    },
    /// Generate a module with planted copies of one slice.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        copies: usize,
        #[arg(long, default_value_t = 10)]
        slice_size: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        params: u8,
        #[arg(long, default_value_t = 6)]
        noise: usize,
        #[arg(long, default_value_t = 1)]
        per_host: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print instruction and block counts.
    Stats {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Render an analysis of one function as DOT.
    Dot {
        input: PathBuf,
        #[arg(long)]
        function: Option<String>,
        #[arg(long, value_enum, default_value_t = Graph::Cfg)]
        graph: Graph,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CostFlags {
    /// Outline only slices with more instructions than this.
    #[arg(long, default_value_t = 3)]
    min_instrs: usize,
    #[arg(long, default_value_t = 20)]
    max_instrs: usize,
    #[arg(long, default_value_t = 1)]
    max_params: usize,
    #[arg(long, default_value_t = 10)]
    min_occurrences: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Graph {
    Cfg,
    Dom,
    Postdom,
    Loops,
}

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SLICEKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load(path: &Path) -> Result<Module> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let m = parse_module(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let errors: Vec<String> = validate(&m).into_iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect();
    if !errors.is_empty() {
        bail!("{} does not validate:\n{}", path.display(), errors.join("\n"));
    }
    Ok(m)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) if p != Path::new("-") => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        _ => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// The function defining `var`, or the one named by `--function`.
fn owner<'m>(m: &'m Module, var: &str, function: Option<&str>) -> Result<&'m slicekit::ir::Function> {
    match function {
        Some(name) => m.function(name).ok_or_else(|| anyhow!("no function `@{name}`")),
        None => m
            .functions
            .iter()
            .find(|f| f.find_def(var).is_some())
            .ok_or_else(|| anyhow!("no function defines `%{var}`")),
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Validate { input } => {
            let text = fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let m = parse_module(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            let diags = validate(&m);
            for d in &diags {
                out!("{d}");
            }
            if diags.iter().any(|d| d.is_error()) {
                return Ok(ExitCode::from(1));
            }
            out!("ok");
        }
        Command::Run { input, function, args, fuel } => {
            let m = load(&input)?;
            let exec = run_function(&m, &function, &args, fuel)?;
            match exec.outcome {
                Outcome::Value(v) => out!("value: {v}"),
                Outcome::Trap(t) => out!("trap: {t}"),
                Outcome::FuelExhausted => out!("fuel exhausted"),
            }
            for e in &exec.trace {
                out!("  {e}");
            }
            out!("steps: {}", exec.steps);
        }
        Command::Gsa { input, output } => {
            let mut m = load(&input)?;
            for f in m.functions.iter_mut() {
                match convert(f) {
                    Ok(form) => *f = form.gsa,
                    Err(e) => eprintln!("warning: @{} left in SSA form: {e}", f.name),
                }
            }
            emit(output.as_deref(), &print_module(&m))?;
        }
        Command::Slice { input, criterion, function, dot: dot_out } => {
            let m = load(&input)?;
            let f = owner(&m, &criterion, function.as_deref())?;
            let form = convert(f)?;
            let ox = Outliner::new(&m, &form);
            let cand = candidate(&m, &ox.ctx, &criterion)?;
            match dot_out {
                Some(path) => emit(Some(Path::new(&path)), &dot::dependence_dot(&form.gsa, &cand.graph))?,
                None => {
                    let label = |b: &usize| form.gsa.blocks[*b].label.clone();
                    out!("criterion: %{criterion} in @{}", f.name);
                    out!("nodes: {}", cand.graph.nodes.iter().map(|n| format!("%{n}")).collect::<Vec<_>>().join(" "));
                    out!("stop set: {}", cand.inputs.iter().map(|n| format!("%{n}")).collect::<Vec<_>>().join(" "));
                    out!("region: {}", cand.region.iter().map(label).collect::<Vec<_>>().join(" "));
                    out!("entry: {}", label(&cand.entry));
                    match &cand.legality {
                        Legality::Ok => out!("legal: yes"),
                        Legality::Rejected { reason, detail } => out!("legal: no ({reason}: {detail})"),
                    }
                    out!("steps: {}", cand.graph.steps);
                }
            }
        }
        Command::Outline { input, criterion, function, output } => {
            let m = load(&input)?;
            let f = owner(&m, &criterion, function.as_deref())?;
            let form = convert(f)?;
            let ox = Outliner::new(&m, &form);
            let cand = candidate(&m, &ox.ctx, &criterion)?;
            let taken: HashSet<String> = m.functions.iter().map(|f| f.name.clone()).collect();
            let o = outline_slice(&ox, &cand, &outlined_name(&f.name, &criterion, &taken))?;
            let mut n = m.clone();
            *n.function_mut(&f.name).unwrap() = form.normalized.clone();
            let mut out = apply_rewrite(&n, &o)?;
            let pure: HashSet<String> = out.functions.iter().filter(|f| f.idempotent).map(|f| f.name.clone()).collect();
            let parent = out.function_mut(&f.name).unwrap();
            *parent = cleanup_with(parent, &|c| pure.contains(c));
            eprintln!("outlined @{} (I={}, P={})", o.new_function.name, o.instr_count, o.param_count);
            emit(output.as_deref(), &print_module(&out))?;
        }
        Command::Sbcr { input, output, json, cost } => {
            let cfg = CostModelConfig {
                min_instrs_exclusive: cost.min_instrs,
                max_instrs: cost.max_instrs,
                max_params: cost.max_params,
                min_occurrences: cost.min_occurrences,
            };
            if cfg.min_instrs_exclusive >= cfg.max_instrs {
                return Ok(usage("--min-instrs must be below --max-instrs"));
            }
            let m = load(&input)?;
            let (out, report) = run_sbcr(&m, &cfg);
            let js = serde_json::to_string_pretty(&report)?;
            emit(output.as_deref(), &print_module(&out))?;
            match json.as_deref() {
                Some("-") => out!("{js}"),
                Some(p) => fs::write(p, js + "\n").with_context(|| format!("cannot write {p}"))?,
                None => eprintln!(
                    "instructions: {} -> {} ({:+}), retained groups: {}",
                    report.instcount_before,
                    report.instcount_after,
                    report.delta,
                    report.retained().count()
                ),
            }
        }
        Command::Gen { seed, copies, slice_size, params, noise, per_host, output } => {
            if slice_size == 0 {
                return Ok(usage("--slice-size must be positive"));
            }
            let spec = CorpusSpec { copies, slice_size, params: params as usize, noise, per_host };
            emit(output.as_deref(), &print_module(&generate_corpus(seed, &spec)))?;
        }
        Command::Stats { input, json } => {
            let m = load(&input)?;
            let rows: Vec<serde_json::Value> = m
                .functions
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "function": f.name,
                        "blocks": f.blocks.len(),
                        "instructions": f.instruction_count(),
                    })
                })
                .collect();
            if json {
                let v = serde_json::json!({ "instructions": m.instruction_count(), "functions": rows });
                out!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                for f in &m.functions {
                    out!("@{}: {} instructions, {} blocks", f.name, f.instruction_count(), f.blocks.len());
                }
                out!("total: {} instructions, {} functions", m.instruction_count(), m.functions.len());
            }
        }
        Command::Dot { input, function, graph, output } => {
            let m = load(&input)?;
            let name = function.or_else(|| m.entry.clone()).or_else(|| m.functions.first().map(|f| f.name.clone()));
            let f = name.as_deref().and_then(|n| m.function(n)).ok_or_else(|| anyhow!("no such function"))?;
            let text = match graph {
                Graph::Cfg => dot::cfg_dot(f),
                Graph::Dom => dot::dom_dot(f),
                Graph::Postdom => dot::postdom_dot(f),
                Graph::Loops => dot::loops_dot(f),
            };
            emit(output.as_deref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
