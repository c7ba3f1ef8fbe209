use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hetgnn::distill::{distill, load_teacher};
use hetgnn::gconstruct::{construct_graph, ConstructedGraph};
use hetgnn::model::ModelState;
use hetgnn::partition::{hash_partition, load_all_partitions, random_partition, shuffle_to_partitions, Partition, PartitionManifest};
use hetgnn::pipeline::{construct_featureless_inputs, infer_embeddings, train, two_stage_featureless, write_embeddings, TrainHooks};
use hetgnn::schema::{parse_schema, parse_train_config, Task, TrainConfig};

#[derive(Parser)]
#[command(name = "hetgnn", version, about = "Heterogeneous graph construction, partitioning, training and inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from tables and write its partitions.
    Gconstruct(GconstructArgs),
    /// Partition a graph saved by `gconstruct --save-graph`.
    Partition(PartitionArgs),
    /// Train a model on a partitioned graph.
    Train {
        #[arg(value_enum)]
        task: TrainTask,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Export embeddings (and predictions for classifiers) of a trained model.
    Infer(InferArgs),
    /// Distill a teacher's exported embeddings into an MLP student.
    Distill(TrainArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum TrainTask {
    GsNodeClassification,
    GsLinkPrediction,
    GsTwoStage,
    GsDistill,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Algorithm {
    #[default]
    Random,
    Hash,
}

#[derive(Args)]
struct GconstructArgs {
    #[arg(long)]
    conf_file: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value = "graph")]
    graph_name: String,
    #[arg(long, default_value_t = 1)]
    num_partitions: usize,
    /// Threads for table ingestion and shuffling.
    #[arg(long, default_value_t = 1)]
    num_processes: usize,
    /// Directory holding the input files; defaults to the schema's directory.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Algorithm::Random)]
    partition_algorithm: Algorithm,
    /// Also keep the unpartitioned graph here.
    #[arg(long)]
    save_graph: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    graph_dir: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long)]
    graph_name: Option<String>,
    #[arg(long)]
    num_partitions: usize,
    #[arg(long, default_value_t = 1)]
    num_processes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Algorithm::Random)]
    partition_algorithm: Algorithm,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    part_config: PathBuf,
    #[arg(long)]
    cf: PathBuf,
    #[arg(long)]
    save_model_path: PathBuf,
    /// In-process workers; must equal the number of partitions.
    #[arg(long)]
    num_trainers: Option<usize>,
    /// Accepted for compatibility; workers always run in this process.
    #[arg(long)]
    ip_config: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    part_config: PathBuf,
    #[arg(long)]
    restore_model_path: PathBuf,
    #[arg(long)]
    save_embed_path: PathBuf,
    /// Accepted for compatibility with training invocations.
    #[arg(long)]
    inference: bool,
    #[arg(long)]
    cf: Option<PathBuf>,
    #[arg(long)]
    num_trainers: Option<usize>,
    #[arg(long)]
    ip_config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gconstruct(a) => gconstruct(a),
        Command::Partition(a) => partition(a),
        Command::Train { task, args } => train_cmd(task, args),
        Command::Infer(a) => infer(a),
        Command::Distill(a) => distill_cmd(a),
    }
}

fn thread_pool(n: usize) -> Result<rayon::ThreadPool> {
    if n == 0 {
        bail!("--num-processes must be >= 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building thread pool")
}

fn write_partitions(graph: &ConstructedGraph, out: &Path, parts: usize, seed: u64, algo: Algorithm) -> Result<PathBuf> {
    let assignment = match algo {
        Algorithm::Random => random_partition(graph, parts, seed)?,
        Algorithm::Hash => hash_partition(graph, parts)?,
    };
    let partitioned = shuffle_to_partitions(graph, &assignment)?;
    let path = partitioned.save(out)?;
    log::info!("wrote {parts} partition(s); manifest {}", path.display());
    Ok(path)
}

fn gconstruct(a: GconstructArgs) -> Result<()> {
    let schema = parse_schema(&a.conf_file)?;
    let input_dir = a
        .input_dir
        .clone()
        .unwrap_or_else(|| a.conf_file.parent().map(Path::to_path_buf).unwrap_or_default());
    let pool = thread_pool(a.num_processes)?;
    pool.install(|| {
        let mut graph = construct_graph(&schema, &input_dir, a.seed)?;
        graph.name = a.graph_name.clone();
        if let Some(dir) = &a.save_graph {
            graph.save(dir)?;
        }
        write_partitions(&graph, &a.output_dir, a.num_partitions, a.seed, a.partition_algorithm)?;
        Ok(())
    })
}

fn partition(a: PartitionArgs) -> Result<()> {
    let pool = thread_pool(a.num_processes)?;
    pool.install(|| {
        let mut graph = ConstructedGraph::load(&a.graph_dir)?;
        if let Some(name) = &a.graph_name {
            graph.name = name.clone();
        }
        write_partitions(&graph, &a.output_dir, a.num_partitions, a.seed, a.partition_algorithm)?;
        Ok(())
    })
}

fn load(args: &TrainArgs) -> Result<(TrainConfig, Vec<Arc<Partition>>)> {
    let mut config = parse_train_config(&args.cf)?;
    if let Some(ip) = &args.ip_config {
        log::warn!("--ip-config {} ignored: workers run in-process, one per partition", ip.display());
    }
    let (manifest, parts) = load_all_partitions(&args.part_config)?;
    config.num_workers = args.num_trainers.unwrap_or(manifest.num_parts);
    config.validate()?;
    Ok((config, parts))
}

fn train_cmd(task: TrainTask, args: TrainArgs) -> Result<()> {
    let (config, parts) = load(&args)?;
    let expected = match task {
        TrainTask::GsNodeClassification => Task::NodeClassification,
        TrainTask::GsLinkPrediction => Task::LinkPrediction,
        TrainTask::GsDistill => return distill_cmd(args),
        TrainTask::GsTwoStage => {
            let out = two_stage_featureless(&parts, &config)?;
            let stage1 = args.save_model_path.join("stage1");
            out.stage1.model.save(&stage1)?;
            out.stage1.report.save(&stage1.join("train_report.json"))?;
            out.stage2.model.save(&args.save_model_path)?;
            out.stage2.report.save(&args.save_model_path.join("train_report.json"))?;
            log::info!("saved two-stage model to {}", args.save_model_path.display());
            return Ok(());
        }
    };
    if config.task != expected {
        bail!("task `{:?}` in {} does not match the `{}` command", config.task, args.cf.display(), task_name(task));
    }
    log::info!("spawning {} worker(s)", config.num_workers);
    let out = train(&parts, &config, None, &TrainHooks::default())?;
    out.model.save(&args.save_model_path)?;
    out.report.save(&args.save_model_path.join("train_report.json"))?;
    log::info!(
        "best epoch {} (val {:?}, test {:?}); saved to {}",
        out.report.best_epoch,
        out.report.best_val_metric,
        out.report.test_metric,
        args.save_model_path.display()
    );
    Ok(())
}

fn task_name(task: TrainTask) -> &'static str {
    match task {
        TrainTask::GsNodeClassification => "gs_node_classification",
        TrainTask::GsLinkPrediction => "gs_link_prediction",
        TrainTask::GsTwoStage => "gs_two_stage",
        TrainTask::GsDistill => "gs_distill",
    }
}

fn distill_cmd(args: TrainArgs) -> Result<()> {
    let (config, parts) = load(&args)?;
    let dc = config.distill.as_ref().context("config has no `distill` section")?;
    let node_type = config.target_ntype.as_deref().context("config has no `target_ntype`")?;
    let teacher = load_teacher(&dc.teacher_path, node_type, dc.mode)?;
    let out = distill(&parts, &teacher, &config)?;
    out.student.save(&args.save_model_path)?;
    out.report.save(&args.save_model_path.join("distill_report.json"))?;
    log::info!("student test accuracy {:?}", out.report.test_accuracy);
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    if let Some(ip) = &a.ip_config {
        log::warn!("--ip-config {} ignored: workers run in-process, one per partition", ip.display());
    }
    let (manifest, parts) = load_all_partitions(&a.part_config)?;
    if let Some(n) = a.num_trainers {
        if n != manifest.num_parts {
            bail!("--num-trainers {n} but the graph has {} partitions", manifest.num_parts);
        }
    }
    let exclude_eval_edges = match &a.cf {
        Some(cf) => parse_train_config(cf)?.exclude_eval_edges,
        None => true,
    };
    let model = ModelState::restore(&a.restore_model_path)?;
    // A model that reads inputs for a featureless type was trained on
    // constructed features.
    let constructed = manifest
        .meta
        .node_types
        .iter()
        .zip(&model.spec.node_types)
        .any(|(m, s)| m.is_featureless() && s.input_dim > 0);
    let parts = if constructed {
        construct_featureless_inputs(&parts, exclude_eval_edges)?
    } else {
        parts
    };
    let embeddings = infer_embeddings(&parts, &model, exclude_eval_edges)?;
    let (_, dir) = PartitionManifest::load(&a.part_config)?;
    let ids = (0..manifest.meta.node_types.len())
        .map(|t| manifest.read_id_map(&dir, t))
        .collect::<hetgnn::Result<Vec<_>>>()?;
    write_embeddings(&a.save_embed_path, &parts[0].meta, &model, &embeddings, &ids)?;
    log::info!("wrote embeddings to {}", a.save_embed_path.display());
    Ok(())
}
