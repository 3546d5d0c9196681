use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specmap_cli::{run, ExperimentConfig};

/// Spectral embedding toolkit: graphs, eigensolvers and network training.
#[derive(Parser)]
#[command(name = "specmap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point cloud and write it as CSV.
    GenData(KeyArgs),
    /// Build an affinity matrix and write it in the COO graph format.
    BuildGraph(KeyArgs),
    /// Run the linear-algebra eigensolver and report per-epoch metrics.
    SolveLa(KeyArgs),
    /// Train the network pipelines over replica seeds.
    TrainNn(KeyArgs),
    /// Evaluate a parameter checkpoint.
    Eval(KeyArgs),
}

/// Flags mirror the canonical configuration keys; a config file supplies
/// defaults that individual flags override.
#[derive(Args)]
struct KeyArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    noise_var: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    test_n: Option<String>,
    #[arg(long)]
    test_seed: Option<String>,
    #[arg(long)]
    images_path: Option<String>,
    #[arg(long)]
    labels_path: Option<String>,
    #[arg(long)]
    test_images_path: Option<String>,
    #[arg(long)]
    test_labels_path: Option<String>,
    #[arg(long)]
    data_csv: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    kernel_convention: Option<String>,
    #[arg(long)]
    knn_k: Option<String>,
    #[arg(long)]
    graph_path: Option<String>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    deflate: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    update_xi: Option<String>,
    #[arg(long)]
    batch_order: Option<String>,
    #[arg(long)]
    oracle_cap: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
}

impl KeyArgs {
    fn resolve(&self) -> specmap_cli::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        let overrides: [(&str, &Option<String>); 33] = [
            ("dataset", &self.dataset),
            ("n", &self.n),
            ("noise_var", &self.noise_var),
            ("seed", &self.seed),
            ("test_n", &self.test_n),
            ("test_seed", &self.test_seed),
            ("images_path", &self.images_path),
            ("labels_path", &self.labels_path),
            ("test_images_path", &self.test_images_path),
            ("test_labels_path", &self.test_labels_path),
            ("data_csv", &self.data_csv),
            ("kernel", &self.kernel),
            ("sigma", &self.sigma),
            ("threshold", &self.threshold),
            ("kernel_convention", &self.kernel_convention),
            ("knn_k", &self.knn_k),
            ("graph_path", &self.graph_path),
            ("objective", &self.objective),
            ("scheme", &self.scheme),
            ("k", &self.k),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("alpha", &self.alpha),
            ("lr", &self.lr),
            ("seeds", &self.seeds),
            ("deflate", &self.deflate),
            ("tol", &self.tol),
            ("hidden", &self.hidden),
            ("update_xi", &self.update_xi),
            ("batch_order", &self.batch_order),
            ("oracle_cap", &self.oracle_cap),
            ("checkpoint", &self.checkpoint),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::GenData(a) => ("gen-data", a),
        Command::BuildGraph(a) => ("build-graph", a),
        Command::SolveLa(a) => ("solve-la", a),
        Command::TrainNn(a) => ("train-nn", a),
        Command::Eval(a) => ("eval", a),
    };
    let outcome = args.resolve().and_then(|cfg| run(name, &cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.category());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
