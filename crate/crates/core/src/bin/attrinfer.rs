//! Command-line interface: train, evaluate, sweep, ablate, and generate
//! synthetic benchmark graphs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/parse error,
//! 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use attrinfer::error::{Error, Result};
use attrinfer::eval::metrics::{compute_metrics, predict_labels};
use attrinfer::eval::{
    emit_ablation_csv, emit_report, run_ablations, run_parameter_sweep, run_sparsity_sweep,
    ReportBundle, SweepAxis,
};
use attrinfer::graph::{
    generate_synthetic, load_graph, split_labels, write_graph, AttributeSchema,
};
use attrinfer::model::{load_checkpoint, save_checkpoint, Dims};
use attrinfer::numerics::Rng;
use attrinfer::training::{infer, train, Mode, PreparedData, TrainConfig};

#[derive(Parser)]
#[command(name = "attrinfer")]
#[command(about = "Semi-supervised attribute inference on attributed social graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Attribute schema (schema.json)
    #[arg(long)]
    schema: PathBuf,
    /// Node attribute table (nodes.tsv)
    #[arg(long)]
    nodes: PathBuf,
    /// Undirected edge list (edges.tsv)
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Training mode
    #[arg(long, default_value = "full")]
    mode: String,
    /// Number of training iterations
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Adversarial loss weight
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    /// Mutual-information loss weight
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
    /// Encoder/decoder learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Discriminator learning rate
    #[arg(long, default_value_t = 0.001)]
    disc_lr: f64,
    /// Seed for initialization, splits and noise
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn to_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            iterations: self.iters,
            lr_model: self.lr,
            lr_disc: self.disc_lr,
            beta: self.beta,
            lambda: self.lambda,
            dims: Dims::default(),
            seed: self.seed,
            mode: self.mode.parse::<Mode>()?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, metrics and training log
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split it was trained with
    Eval {
        /// Model checkpoint written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep label sparsity or a loss weight over a grid of values
    Sweep {
        /// Sweep axis: sparsity, lambda or beta
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long)]
        values: String,
        /// Comma-separated seeds
        #[arg(long)]
        seeds: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every mode on identical splits and tabulate test accuracy
    Ablate {
        /// Comma-separated seeds
        #[arg(long)]
        seeds: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic homophily benchmark graph
    Synth {
        /// Number of users
        #[arg(long)]
        users: usize,
        /// Number of communities
        #[arg(long)]
        communities: usize,
        /// Probability of community-aligned labels and edge bias
        #[arg(long)]
        homophily: f64,
        /// Fraction of attribute cells blanked
        #[arg(long)]
        missing: f64,
        /// Generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_list<T: std::str::FromStr>(input: &str, what: &str) -> Result<Vec<T>> {
    input
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("'{s}' is not a valid {what}")))
        })
        .collect()
}

/// The split every single-run command uses; recomputed from the seed, so
/// `eval` sees exactly the masks `train` used.
fn standard_mask(
    graph: &attrinfer::graph::AttributedGraph,
    seed: u64,
) -> Result<attrinfer::graph::LabelMask> {
    split_labels(graph, (0.8, 0.1, 0.1), &mut Rng::new(seed))
}

fn cmd_train(data: &DataArgs, train_args: &TrainArgs, out: &Path) -> Result<()> {
    let graph = load_graph(&data.schema, &data.nodes, &data.edges)?;
    let config = train_args.to_config()?;
    let mask = standard_mask(&graph, config.seed)?;
    let outcome = train(&config, &graph, &mask)?;

    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    save_checkpoint(
        &out.join("checkpoint.json"),
        &outcome.params,
        &config,
        graph.schema(),
    )?;

    let prepared = PreparedData::build(&graph, &mask)?;
    let x_hat = infer(&outcome.params, &prepared, config.mode)?;
    let predictions = predict_labels(&x_hat, graph.schema());
    let metrics = compute_metrics(&predictions, &graph, &mask.test)?;
    emit_report(
        &ReportBundle {
            metrics: Some(&metrics),
            sweep: None,
            history: Some(&outcome.history),
        },
        out,
    )?;
    println!(
        "trained {} for {} iterations: test accuracy {:.4}, macro-F1 {:.4}",
        config.mode, config.iterations, metrics.accuracy_cell, metrics.macro_f1
    );
    if let (Some(it), Some(acc)) = (outcome.best_iteration, outcome.best_val_accuracy) {
        println!("selected iteration {it} by validation accuracy {acc:.4}");
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &DataArgs, out: &Path) -> Result<()> {
    let graph = load_graph(&data.schema, &data.nodes, &data.edges)?;
    let (params, config) = load_checkpoint(checkpoint, graph.schema())?;
    let mask = standard_mask(&graph, config.seed)?;
    let prepared = PreparedData::build(&graph, &mask)?;
    let x_hat = infer(&params, &prepared, config.mode)?;
    let predictions = predict_labels(&x_hat, graph.schema());
    let metrics = compute_metrics(&predictions, &graph, &mask.test)?;
    emit_report(
        &ReportBundle {
            metrics: Some(&metrics),
            sweep: None,
            history: None,
        },
        out,
    )?;
    println!(
        "evaluated checkpoint ({} mode): test accuracy {:.4}, label-level accuracy {:.4}, macro-F1 {:.4}",
        config.mode, metrics.accuracy_cell, metrics.accuracy_label_level, metrics.macro_f1
    );
    Ok(())
}

fn cmd_sweep(
    axis: &str,
    values: &str,
    seeds: &str,
    data: &DataArgs,
    train_args: &TrainArgs,
    out: &Path,
) -> Result<()> {
    let graph = load_graph(&data.schema, &data.nodes, &data.edges)?;
    let config = train_args.to_config()?;
    let axis: SweepAxis = axis.parse()?;
    let values: Vec<f64> = parse_list(values, "number")?;
    let seeds: Vec<u64> = parse_list(seeds, "seed")?;
    let result = match axis {
        SweepAxis::Sparsity => run_sparsity_sweep(&graph, &config, &values, &seeds)?,
        SweepAxis::Lambda | SweepAxis::Beta => {
            run_parameter_sweep(&graph, &config, axis, &values, &seeds)?
        }
    };
    emit_report(
        &ReportBundle {
            metrics: None,
            sweep: Some(&result),
            history: None,
        },
        out,
    )?;
    println!("{} sweep over {} points:", result.axis, result.points.len());
    for p in &result.points {
        println!(
            "  {:>8.4}: accuracy {:.4} +/- {:.4} over {} seeds",
            p.value,
            p.mean,
            p.std,
            p.seeds.len()
        );
    }
    Ok(())
}

fn cmd_ablate(seeds: &str, data: &DataArgs, train_args: &TrainArgs, out: &Path) -> Result<()> {
    let graph = load_graph(&data.schema, &data.nodes, &data.edges)?;
    let config = train_args.to_config()?;
    let seeds: Vec<u64> = parse_list(seeds, "seed")?;
    let result = run_ablations(&graph, &config, &seeds)?;
    emit_ablation_csv(&result, out)?;
    println!("ablation over {} seeds:", result.seeds.len());
    for row in &result.rows {
        println!(
            "  {:>12}: accuracy {:.4} +/- {:.4}",
            row.mode.to_string(),
            row.mean,
            row.std
        );
    }
    Ok(())
}

fn cmd_synth(
    users: usize,
    communities: usize,
    homophily: f64,
    missing: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let schema = AttributeSchema::from_counts(&[("alpha", 3), ("beta", 4), ("gamma", 5)])?;
    let mut rng = Rng::new(seed);
    let synthetic = generate_synthetic(users, &schema, communities, homophily, missing, &mut rng)?;
    write_graph(out, &synthetic.graph, Some(&synthetic.ground_truth))?;
    println!(
        "wrote {} users, {} edges, {} observed cells to {}",
        synthetic.graph.n_users(),
        synthetic.graph.edges().len(),
        synthetic.graph.observed_cells().len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train { data, train, out } => cmd_train(data, train, out),
        Command::Eval {
            checkpoint,
            data,
            out,
        } => cmd_eval(checkpoint, data, out),
        Command::Sweep {
            axis,
            values,
            seeds,
            data,
            train,
            out,
        } => cmd_sweep(axis, values, seeds, data, train, out),
        Command::Ablate {
            seeds,
            data,
            train,
            out,
        } => cmd_ablate(seeds, data, train, out),
        Command::Synth {
            users,
            communities,
            homophily,
            missing,
            seed,
            out,
        } => cmd_synth(*users, *communities, *homophily, *missing, *seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
