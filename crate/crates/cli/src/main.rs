//! Command-line surface for the prompt-ensembling pipeline: discover
//! strategies, select and augment them, run experiments, study error
//! propagation, verify candidate solutions, and merge reports.
//!
//! Exit codes: 0 success, 1 usage/config, 2 backend, 3 verification failed.

mod config;

use clap::{Parser, Subcommand};
use config::RunConfigFile;
use divse_core::blocksworld::{validate_plan, BlocksInstance};
use divse_core::coloring::{verify_coloring, Graph};
use divse_core::discovery::{augment_examples, extract_approaches, extract_personas, select_pairs};
use divse_core::extract::{parse_coloring, parse_plan};
use divse_core::report::summarize_report;
use divse_core::runner::{
    ensemble_size_sweep, error_propagation_study, render_run_log, run, RunError, Summary,
    TrialRecord,
};
use divse_core::strategy::{FewShotExample, StrategyBundle};
use divse_core::task::load_dataset;
use rand::SeedableRng;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy)]
pub enum ExitKind {
    Usage = 1,
    Backend = 2,
    VerifyFailed = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    fn backend(message: impl Into<String>) -> CliError {
        CliError {
            kind: ExitKind::Backend,
            message: message.into(),
        }
    }

    fn verify(message: impl Into<String>) -> CliError {
        CliError {
            kind: ExitKind::VerifyFailed,
            message: message.into(),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> CliError {
        match e {
            RunError::Backend { .. } => CliError::backend(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "divse",
    version,
    about = "Prompt-ensembling experiment toolkit with sound task verifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover approaches and personas into a strategy bundle
    Discover {
        #[arg(long)]
        config: PathBuf,
        /// Bundle file to create or update
        #[arg(long)]
        out: PathBuf,
    },
    /// Score persona/approach pairs on a validation slice and keep the best
    Select {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Number of pairs to keep (defaults to the task's ensemble size)
        #[arg(long)]
        size: Option<usize>,
    },
    /// Restyle few-shot exemplars for every selected pair
    Augment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// JSON list of few-shot exemplars to augment
        #[arg(long)]
        shots: PathBuf,
        /// Retry budget per (pair, exemplar)
        #[arg(long, default_value_t = 2)]
        retries: u32,
    },
    /// Execute an experiment and write the run log and summary
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Re-aggregate a multi-call ensemble at several sizes
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated prefix sizes, e.g. 1,3,5
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Error-propagation study over a one-call ensemble run log
    Propagation {
        #[arg(long)]
        config: PathBuf,
        /// Run log (JSON lines) from a one-call ensemble run
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "runs/propagation.json")]
        out: PathBuf,
    },
    /// Check a plan or coloring against an instance file
    Verify {
        /// Block-stacking instance (single object or array)
        #[arg(long, conflicts_with = "graph")]
        instance: Option<PathBuf>,
        /// Plan file: tuple or prose action lines
        #[arg(long, requires = "instance")]
        plan: Option<PathBuf>,
        /// Graph instance (single object or array)
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Coloring file: one "vertex: Color n" line per vertex
        #[arg(long, requires = "graph")]
        coloring: Option<PathBuf>,
        /// Index into an array instance file
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Merge run summaries into a cost-sorted CSV with frontier membership
    Report {
        /// summary.json files produced by `run` or `sweep`
        #[arg(long, num_args = 1.., required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long, default_value = "runs/report.csv")]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version leave through the error path with success status
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(ExitKind::Usage as i32);
            }
            print!("{e}");
            return;
        }
    };
    if let Err(e) = execute(cli.command) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.kind as i32);
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Discover { config, out } => discover(&config, &out),
        Command::Select {
            config,
            bundle,
            size,
        } => select(&config, &bundle, size),
        Command::Augment {
            config,
            bundle,
            shots,
            retries,
        } => augment(&config, &bundle, &shots, retries),
        Command::Run { config, out_dir } => run_command(&config, &out_dir),
        Command::Sweep {
            config,
            sizes,
            out_dir,
        } => sweep(&config, &sizes, &out_dir),
        Command::Propagation {
            config,
            records,
            out,
        } => propagation(&config, &records, &out),
        Command::Verify {
            instance,
            plan,
            graph,
            coloring,
            index,
        } => verify(instance, plan, graph, coloring, index),
        Command::Report { summaries, out } => report(&summaries, &out),
    }
}

fn load_bundle(path: &Path) -> Result<StrategyBundle, CliError> {
    StrategyBundle::load(path).map_err(|e| {
        CliError::usage(format!(
            "cannot load strategy bundle {}: {e}",
            path.display()
        ))
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn discover(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let discovery = file.discovery_config();
    let items =
        load_dataset(file.task, &file.dataset).map_err(|e| CliError::usage(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(file.seed.unwrap_or(0));

    let approaches = extract_approaches(
        &items,
        &discovery,
        gateway.as_ref(),
        &file.model_id,
        &mut rng,
    )
    .map_err(|e| CliError::backend(e.to_string()))?;
    let personas = extract_personas(file.task, &discovery, gateway.as_ref(), &file.model_id)
        .map_err(|e| CliError::backend(e.to_string()))?;

    let mut bundle = if out.exists() {
        load_bundle(out)?
    } else {
        StrategyBundle::new(file.task.as_str())
    };
    bundle.approaches = approaches;
    bundle.personas = personas;
    bundle
        .save(out)
        .map_err(|e| CliError::usage(format!("cannot save bundle: {e}")))?;
    println!(
        "discovered {} approaches and {} personas -> {}",
        bundle.approaches.approaches.len(),
        bundle.personas.personas.len(),
        out.display()
    );
    Ok(())
}

fn select(config_path: &Path, bundle_path: &Path, size: Option<usize>) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let mut bundle = load_bundle(bundle_path)?;
    let items =
        load_dataset(file.task, &file.dataset).map_err(|e| CliError::usage(e.to_string()))?;
    let discovery = file.discovery_config();
    let validation = &items[..discovery.validation_size.min(items.len())];
    let spec = file.task.spec();
    let size = size.unwrap_or(spec.default_ensemble_size);

    let pairs = select_pairs(
        &bundle.personas,
        &bundle.approaches,
        validation,
        size,
        gateway.as_ref(),
        &spec,
        &file.model_id,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    println!("selected {} pairs:", pairs.len());
    for pair in &pairs {
        println!(
            "  {}  val_accuracy={}",
            pair.label(),
            pair.val_accuracy
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    bundle.pairs = pairs;
    bundle
        .save(bundle_path)
        .map_err(|e| CliError::usage(format!("cannot save bundle: {e}")))?;
    Ok(())
}

fn augment(
    config_path: &Path,
    bundle_path: &Path,
    shots_path: &Path,
    retries: u32,
) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let mut bundle = load_bundle(bundle_path)?;
    let shots_text = std::fs::read_to_string(shots_path)
        .map_err(|e| CliError::usage(format!("cannot read shots {}: {e}", shots_path.display())))?;
    let shots: Vec<FewShotExample> = serde_json::from_str(&shots_text)
        .map_err(|e| CliError::usage(format!("invalid shots file: {e}")))?;
    let spec = file.task.spec();

    let augmented = augment_examples(
        &bundle.pairs,
        &shots,
        gateway.as_ref(),
        &spec,
        &file.model_id,
        retries,
    )
    .map_err(|e| CliError::backend(e.to_string()))?;
    println!(
        "augmented {} exemplars across {} pairs -> {}",
        augmented.len(),
        bundle.pairs.len(),
        bundle_path.display()
    );
    bundle.shots = shots;
    bundle.augmented = augmented;
    bundle
        .save(bundle_path)
        .map_err(|e| CliError::usage(format!("cannot save bundle: {e}")))?;
    Ok(())
}

fn load_run_inputs(
    file: &RunConfigFile,
) -> Result<(Vec<divse_core::task::TaskItem>, Option<StrategyBundle>), CliError> {
    let items =
        load_dataset(file.task, &file.dataset).map_err(|e| CliError::usage(e.to_string()))?;
    let bundle = match &file.bundle {
        Some(path) => Some(load_bundle(path)?),
        None => None,
    };
    Ok((items, bundle))
}

fn run_command(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let config = file.run_config()?;
    let (items, bundle) = load_run_inputs(&file)?;

    let output = run(&config, &items, bundle.as_ref(), gateway.as_ref())?;
    let log_path = out_dir.join("run.jsonl");
    write_file(&log_path, &render_run_log(&output.trials))?;
    let summary_path = out_dir.join("summary.json");
    write_file(
        &summary_path,
        &serde_json::to_string_pretty(&output.summary).expect("summaries serialize"),
    )?;
    println!(
        "task={} mode={} items={} accuracy={:.4} cost={} log={}",
        output.summary.task,
        output.summary.mode.as_str(),
        output.summary.n_items,
        output.summary.accuracy,
        output.summary.total_cost,
        log_path.display()
    );
    Ok(())
}

fn sweep(config_path: &Path, sizes: &str, out_dir: &Path) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let config = file.run_config()?;
    let (items, bundle) = load_run_inputs(&file)?;
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::usage(format!("bad sweep sizes: {e}")))?;

    let summaries =
        ensemble_size_sweep(&config, &items, bundle.as_ref(), gateway.as_ref(), &sizes)?;
    let path = out_dir.join("sweep.json");
    write_file(
        &path,
        &serde_json::to_string_pretty(&summaries).expect("summaries serialize"),
    )?;
    for summary in &summaries {
        println!(
            "size={} accuracy={:.4} cost={}",
            summary.ensemble_size, summary.accuracy, summary.total_cost
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn propagation(config_path: &Path, records_path: &Path, out: &Path) -> Result<(), CliError> {
    let file = RunConfigFile::load(config_path)?;
    let gateway = file.gateway()?;
    let config = file.run_config()?;
    let (items, bundle) = load_run_inputs(&file)?;
    let bundle =
        bundle.ok_or_else(|| CliError::usage("the propagation study needs a strategy bundle"))?;

    let text = std::fs::read_to_string(records_path).map_err(|e| {
        CliError::usage(format!(
            "cannot read records {}: {e}",
            records_path.display()
        ))
    })?;
    let records: Vec<TrialRecord> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::usage(format!("invalid run log: {e}")))?;

    let report = error_propagation_study(&config, &records, &items, &bundle, gateway.as_ref())?;
    write_file(
        out,
        &serde_json::to_string_pretty(&report).expect("reports serialize"),
    )?;
    match report.rate {
        Some(rate) => println!(
            "qualifying={} propagated={} rate={:.4} -> {}",
            report.n_qualifying,
            report.n_propagated,
            rate,
            out.display()
        ),
        None => {
            println!(
                "no qualifying items; propagation rate undefined -> {}",
                out.display()
            )
        }
    }
    Ok(())
}

fn read_json_instance<T: serde::de::DeserializeOwned>(
    path: &Path,
    index: usize,
) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let mut list: Vec<serde_json::Value> = serde_json::from_str(trimmed)
            .map_err(|e| CliError::usage(format!("invalid instance file: {e}")))?;
        if index >= list.len() {
            return Err(CliError::usage(format!(
                "index {index} out of range for {} instances",
                list.len()
            )));
        }
        serde_json::from_value(list.swap_remove(index))
            .map_err(|e| CliError::usage(format!("invalid instance: {e}")))
    } else {
        serde_json::from_str(trimmed).map_err(|e| CliError::usage(format!("invalid instance: {e}")))
    }
}

#[derive(serde::Deserialize)]
struct GraphFile {
    n_vertices: u32,
    edges: Vec<(u32, u32)>,
    max_colors: u32,
}

fn verify(
    instance: Option<PathBuf>,
    plan: Option<PathBuf>,
    graph: Option<PathBuf>,
    coloring: Option<PathBuf>,
    index: usize,
) -> Result<(), CliError> {
    match (instance, plan, graph, coloring) {
        (Some(instance), Some(plan_path), None, None) => {
            let inst: BlocksInstance = read_json_instance(&instance, index)?;
            let initial = inst
                .initial_state()
                .map_err(|e| CliError::usage(format!("bad instance: {e}")))?;
            let goal = inst
                .goal()
                .map_err(|e| CliError::usage(format!("bad instance: {e}")))?;
            let plan_text = std::fs::read_to_string(&plan_path).map_err(|e| {
                CliError::usage(format!("cannot read plan {}: {e}", plan_path.display()))
            })?;
            let actions = parse_plan(&plan_text)
                .map_err(|e| CliError::verify(format!("plan does not parse: {e}")))?;
            let report = validate_plan(&initial, &goal, &actions);
            if let Some(failure) = &report.failed_step {
                return Err(CliError::verify(format!(
                    "invalid at step {} (rule {}): {}",
                    failure.index + 1,
                    failure.rule.number(),
                    failure.message
                )));
            }
            if !report.goal_satisfied {
                return Err(CliError::verify("valid, goal not satisfied"));
            }
            println!("valid, goal satisfied");
            Ok(())
        }
        (None, None, Some(graph_path), Some(coloring_path)) => {
            let file: GraphFile = read_json_instance(&graph_path, index)?;
            let graph = Graph::new(file.n_vertices, file.edges, file.max_colors)
                .map_err(|e| CliError::usage(format!("bad graph: {e}")))?;
            let text = std::fs::read_to_string(&coloring_path).map_err(|e| {
                CliError::usage(format!(
                    "cannot read coloring {}: {e}",
                    coloring_path.display()
                ))
            })?;
            let parsed = parse_coloring(&text, graph.n_vertices)
                .map_err(|e| CliError::verify(format!("coloring does not parse: {e}")))?;
            let verdict = verify_coloring(&graph, &parsed.assignments);
            if verdict.is_valid() {
                println!("valid coloring");
                Ok(())
            } else {
                let reasons: Vec<String> =
                    verdict.violations().iter().map(|v| v.to_string()).collect();
                Err(CliError::verify(format!(
                    "invalid coloring: {}",
                    reasons.join("; ")
                )))
            }
        }
        _ => Err(CliError::usage(
            "verify needs either --instance with --plan, or --graph with --coloring",
        )),
    }
}

fn report(summaries: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut loaded: Vec<Summary> = Vec::with_capacity(summaries.len());
    for path in summaries {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let summary: Summary = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid summary {}: {e}", path.display())))?;
        loaded.push(summary);
    }
    let report = summarize_report(&loaded).map_err(|e| CliError::usage(e.to_string()))?;
    write_file(out, &report.csv)?;
    print!("{}", report.csv);
    println!("wrote {}", out.display());
    Ok(())
}
