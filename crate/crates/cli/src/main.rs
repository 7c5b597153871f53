use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use skillrepo::config::{ConfigError, RunConfig};
use skillrepo::gateway::{annotate, HttpEmbedder, Role};
use skillrepo::grouping::{group_by_label, validate_annotation, Corpus, Dimension, GroupSize, Grouper, GroupingError};
use skillrepo::harness::{
    read_trace, replay_rewards, rollout_trace_lines, stream_trace_lines, to_jsonl, Harness, HarnessError,
    StreamTask, TraceError,
};
use skillrepo::reward::RewardWeights;
use skillrepo::skill_store::{load_repo, save_repo, serialize_skill, RepoError};

#[derive(Parser)]
#[command(name = "skillrepo", version, about = "Skill repository curation runtime")]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate raw tasks with the five attribute lists.
    Annotate(AnnotateArgs),
    /// Build related-task groups from an annotated corpus.
    Group(GroupArgs),
    /// Run group rollouts (with --groups) or a single stream.
    Run(RunArgs),
    /// Inspect a skill repository directory.
    Repo {
        #[command(subcommand)]
        action: RepoAction,
    },
    /// Recompute rewards from a rollout trace.
    RewardReplay(ReplayArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Where invalid annotations go; defaults to `<output>.rejects.jsonl`.
    #[arg(long)]
    rejects: Option<PathBuf>,
}

#[derive(Args)]
struct GroupArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Partition by each record's `label` instead of running the pipeline.
    #[arg(long)]
    by_label: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed group length.
    #[arg(long, conflicts_with_all = ["size_min", "size_max"])]
    size: Option<usize>,
    #[arg(long, requires = "size_max")]
    size_min: Option<usize>,
    #[arg(long, requires = "size_min")]
    size_max: Option<usize>,
    #[arg(long)]
    max_groups: Option<usize>,
    /// Embedding service base URL (overrides the config; stub otherwise).
    #[arg(long)]
    embed_url: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// JSONL of `{id, text, subset?, solution?}`.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// JSONL of `{group_id, task_ids}`; omit to run `--tasks` as one stream.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Output directory for traces and metrics.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum RepoAction {
    List {
        #[arg(long)]
        dir: PathBuf,
    },
    Show {
        #[arg(long)]
        dir: PathBuf,
        name: String,
    },
    Validate {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    lambda_f: Option<f64>,
    #[arg(long)]
    lambda_u: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
}

/// Exit code 1: bad input or configuration. Exit code 2: a model or
/// embedding provider failed.
enum Failure {
    Input(String),
    Provider(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Provider(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Provider(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<GroupingError> for Failure {
    fn from(e: GroupingError) -> Self {
        match e {
            GroupingError::EmbedderFailure(_) => Failure::Provider(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_provider_error() {
            Failure::Provider(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<RepoError> for Failure {
    fn from(e: RepoError) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, Value)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line)
            .map_err(|e| Failure::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: &[Value]) -> CmdResult {
    let mut text = String::new();
    for line in lines {
        text.push_str(&line.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn record_id(record: &Value) -> Option<String> {
    match record.get("id")? {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

fn cmd_annotate(config: &RunConfig, args: &AnnotateArgs) -> CmdResult {
    let provider = config.provider(Role::Annotator)?;
    let prompts = config.prompts()?;
    let rejects_path = args
        .rejects
        .clone()
        .unwrap_or_else(|| args.output.with_extension("rejects.jsonl"));

    let done: HashSet<String> = if args.output.exists() {
        read_jsonl(&args.output)?
            .iter()
            .filter_map(|(_, v)| record_id(v))
            .collect()
    } else {
        HashSet::new()
    };

    let open = |path: &Path| {
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_failure(path, e))
    };
    let mut output = open(&args.output)?;
    let mut rejects = None;
    let (mut written, mut rejected) = (0usize, 0usize);

    for (line, record) in read_jsonl(&args.input)? {
        let id = record_id(&record)
            .ok_or_else(|| Failure::Input(format!("{}:{line}: record has no id", args.input.display())))?;
        if done.contains(&id) {
            continue;
        }
        let text = record.get("text").and_then(Value::as_str).unwrap_or_default();
        let raw = annotate(provider.as_ref(), &prompts, text)
            .map_err(|e| Failure::Provider(format!("task `{id}`: {e}")))?;
        match validate_annotation(&raw) {
            Ok(attributes) => {
                let mut merged = record.clone();
                let obj = merged
                    .as_object_mut()
                    .ok_or_else(|| Failure::Input(format!("{}:{line}: not an object", args.input.display())))?;
                for d in Dimension::ALL {
                    obj.insert(d.key().into(), json!(attributes.get(d)));
                }
                writeln!(output, "{merged}").map_err(|e| io_failure(&args.output, e))?;
                written += 1;
            }
            Err(e) => {
                log::warn!("task `{id}`: invalid annotation: {e}");
                let file = match &mut rejects {
                    Some(f) => f,
                    None => rejects.insert(open(&rejects_path)?),
                };
                let entry = json!({"id": id, "error": e.to_string(), "annotation": raw});
                writeln!(file, "{entry}").map_err(|e| io_failure(&rejects_path, e))?;
                rejected += 1;
            }
        }
    }
    eprintln!(
        "annotated {written} tasks, {rejected} rejected, {} already present",
        done.len()
    );
    if rejected > 0 {
        eprintln!("warning: rejected annotations written to {}", rejects_path.display());
    }
    Ok(())
}

fn cmd_group(config: &RunConfig, args: &GroupArgs) -> CmdResult {
    let corpus_path = args
        .corpus
        .clone()
        .or_else(|| config.paths.corpus.clone())
        .ok_or_else(|| Failure::Input("no corpus given (--corpus or paths.corpus)".into()))?;

    if args.by_label {
        let records = read_jsonl(&corpus_path)?;
        let pairs = records.iter().map(|(line, v)| {
            let id = record_id(v).unwrap_or_else(|| format!("<line {line}>"));
            let label = v.get("label").and_then(Value::as_str).map(str::to_string);
            (id, label)
        });
        let groups = group_by_label(pairs)?;
        let lines: Vec<Value> = groups
            .iter()
            .map(|g| json!({"group_id": g.label, "task_ids": g.task_ids}))
            .collect();
        write_lines(&args.output, &lines)?;
        eprintln!("wrote {} label groups", lines.len());
        return Ok(());
    }

    let corpus = Corpus::load(&corpus_path)?;
    let mut plan = config.task_grouping.plan.clone();
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(n) = args.size {
        plan.size = GroupSize::Fixed(n);
    }
    if let (Some(min), Some(max)) = (args.size_min, args.size_max) {
        plan.size = GroupSize::Range { min, max };
    }
    if args.max_groups.is_some() {
        plan.max_groups = args.max_groups;
    }
    let embedder = match &args.embed_url {
        Some(url) => Box::new(HttpEmbedder::new(
            url.clone(),
            std::time::Duration::from_secs(config.model_gateway.embedder.timeout_secs),
        )),
        None => config.embedder(),
    };
    let grouper = Grouper::with_embedder(&corpus, config.task_grouping.params.clone(), embedder.as_ref())?;
    let run = grouper.build_groups(&plan)?;
    let lines: Vec<Value> = run.groups.iter().map(|g| g.to_record()).collect();
    write_lines(&args.output, &lines)?;
    eprintln!(
        "wrote {} groups from {} tasks; {} seeds had no admissible successor",
        lines.len(),
        corpus.len(),
        run.singleton_seeds.len()
    );
    Ok(())
}

fn load_tasks(path: &Path) -> Result<Vec<StreamTask>, Failure> {
    read_jsonl(path)?
        .into_iter()
        .map(|(line, v)| {
            serde_json::from_value(v).map_err(|e| Failure::Input(format!("{}:{line}: {e}", path.display())))
        })
        .collect()
}

fn cmd_run(mut config: RunConfig, args: &RunArgs) -> CmdResult {
    if let Some(tasks) = &args.tasks {
        config.paths.tasks = Some(tasks.clone());
    }
    if let Some(groups) = &args.groups {
        config.paths.groups = Some(groups.clone());
    }
    if let Some(out) = &args.out {
        config.paths.trace_dir = Some(out.clone());
    }
    if let Some(jobs) = args.jobs {
        config.stream_harness.jobs = jobs;
    }
    if let Some(n) = args.rollouts {
        config.stream_harness.group_size = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.dry_run {
        print!("{}", config.to_toml());
        return Ok(());
    }
    config.validate()?;

    let tasks_path = config
        .paths
        .tasks
        .clone()
        .ok_or_else(|| Failure::Input("no tasks given (--tasks or paths.tasks)".into()))?;
    let tasks = load_tasks(&tasks_path)?;
    let out_dir = config.paths.trace_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;
    let trace_path = out_dir.join("trace.jsonl");

    let params = config.harness_params();
    let harness = Harness::new(
        config.clients()?,
        Arc::new(config.stream_harness.environment),
        params.clone(),
    )
    .with_prompts(config.prompts()?);

    match &config.paths.groups {
        Some(groups_path) => {
            let by_id: HashMap<&str, &StreamTask> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
            let mut trace = String::new();
            for (index, (line, record)) in read_jsonl(groups_path)?.into_iter().enumerate() {
                let bad = |m: &str| Failure::Input(format!("{}:{line}: {m}", groups_path.display()));
                let group_id = record
                    .get("group_id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("missing group_id"))?;
                let ids = record
                    .get("task_ids")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("missing task_ids"))?;
                let members = ids
                    .iter()
                    .map(|id| {
                        let id = id.as_str().ok_or_else(|| bad("task ids must be strings"))?;
                        by_id
                            .get(id)
                            .map(|t| (*t).clone())
                            .ok_or_else(|| bad(&format!("unknown task `{id}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let base_seed = config.seed.wrapping_add((index as u64) << 32);
                let result = harness.run_rollout_group(group_id, &members, params.rollouts, base_seed)?;
                trace.push_str(&to_jsonl(&rollout_trace_lines(&result, params.reward.clamp_compression)));
                let totals: Vec<String> = result.rollouts.iter().map(|r| format!("{:.4}", r.reward.total)).collect();
                eprintln!("group {group_id}: rewards [{}]", totals.join(", "));
            }
            fs::write(&trace_path, trace).map_err(|e| io_failure(&trace_path, e))?;
        }
        None => {
            let run = harness.run_stream(&tasks, config.seed)?;
            fs::write(&trace_path, to_jsonl(&stream_trace_lines(&run.positions)))
                .map_err(|e| io_failure(&trace_path, e))?;
            let metrics_path = out_dir.join("metrics.json");
            let metrics = serde_json::to_string_pretty(&run.metrics).expect("metrics serialize");
            fs::write(&metrics_path, metrics + "\n").map_err(|e| io_failure(&metrics_path, e))?;
            let csv_path = out_dir.join("metrics.csv");
            fs::write(&csv_path, run.metrics.op_buckets_csv()).map_err(|e| io_failure(&csv_path, e))?;
            if let Some(dir) = &config.paths.repo_dir {
                save_repo(&run.final_repo, dir)?;
            }
            eprintln!(
                "stream of {} tasks: success rate {:.3}, usage rate {:.3}, final repo {} skills",
                run.metrics.examples,
                run.metrics.success_rate,
                run.metrics.usage_rate,
                run.final_repo.len()
            );
        }
    }
    eprintln!("trace written to {}", trace_path.display());
    Ok(())
}

fn cmd_repo(action: &RepoAction) -> CmdResult {
    match action {
        RepoAction::List { dir } => {
            for skill in load_repo(dir)?.iter() {
                println!("{}\t{}", skill.name(), skill.description());
            }
        }
        RepoAction::Show { dir, name } => {
            let repo = load_repo(dir)?;
            let skill = repo
                .get(name)
                .ok_or_else(|| Failure::Input(format!("no skill named `{name}` in {}", dir.display())))?;
            print!("{}", serialize_skill(skill));
            println!();
        }
        RepoAction::Validate { dir } => {
            let repo = load_repo(dir)?;
            println!("ok: {} skills", repo.len());
        }
    }
    Ok(())
}

fn cmd_reward_replay(args: &ReplayArgs) -> CmdResult {
    let lines = read_trace(&args.trace)?;
    let overridden = args.lambda_f.is_some() || args.lambda_u.is_some() || args.lambda_c.is_some();
    let weights = overridden.then(|| {
        let d = RewardWeights::default();
        RewardWeights {
            lambda_f: args.lambda_f.unwrap_or(d.lambda_f),
            lambda_u: args.lambda_u.unwrap_or(d.lambda_u),
            lambda_c: args.lambda_c.unwrap_or(d.lambda_c),
        }
    });
    if weights.is_some_and(|w| !w.is_valid()) {
        return Err(Failure::Input("reward weights must be finite and non-negative".into()));
    }
    let rows = replay_rewards(&lines, weights)?;
    if rows.is_empty() {
        return Err(Failure::Input(format!("{}: no reward records", args.trace.display())));
    }
    for row in &rows {
        println!("{}", serde_json::to_string(row).expect("rows serialize"));
    }
    let mismatched = rows.iter().filter(|r| !r.matches).count();
    if !overridden && mismatched > 0 {
        return Err(Failure::Input(format!(
            "{mismatched} of {} stored totals were not reproduced",
            rows.len()
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Annotate(args) => cmd_annotate(&config, args),
        Command::Group(args) => cmd_group(&config, args),
        Command::Run(args) => cmd_run(config, args),
        Command::Repo { action } => cmd_repo(action),
        Command::RewardReplay(args) => cmd_reward_replay(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
