//! `rgcnet`: reproducible reservoir-graph-convolution experiments from the
//! command line. Exit codes: 0 success, 1 internal or numeric failure,
//! 2 usage or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rgcnet::classify::LayerKind;
use rgcnet::data::{
    describe_dataset, export_connectivity_histograms, load_connectome_dataset, load_tu_dataset,
    simulate_longitudinal, write_connectome_csv, Dataset, SimulatorProfile,
};
use rgcnet::error::Error;
use rgcnet::generate::GeneratorVariant;
use rgcnet::harness::{
    layer_depth_comparison, nested_cv_classification, nested_cv_generation, write_aggregate_csv,
    write_depth_comparison_csv, ExperimentConfig, TaskKind,
};
use rgcnet::metrics::{evaluate_pair, EvalReport};

#[derive(Parser)]
#[command(name = "rgcnet", version, about = "Reservoir-based graph convolution experiments")]
struct Cli {
    /// Master seed; all trial seeds derive from it deterministically.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for concurrent trials (0 = available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LayerArg {
    Rgc,
    Trgc,
    Gcn,
    Gat,
}

impl From<LayerArg> for LayerKind {
    fn from(v: LayerArg) -> Self {
        match v {
            LayerArg::Rgc => LayerKind::Rgc,
            LayerArg::Trgc => LayerKind::Trgc,
            LayerArg::Gcn => LayerKind::Gcn,
            LayerArg::Gat => LayerKind::Gat,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Rgc,
    Trgc,
    Gcn,
}

impl From<VariantArg> for GeneratorVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Rgc => GeneratorVariant::Rgc,
            VariantArg::Trgc => GeneratorVariant::Trgc,
            VariantArg::Gcn => GeneratorVariant::Gcn,
        }
    }
}

#[derive(Args)]
struct CommonRunArgs {
    /// Experiment config JSON (all fields optional; CLI flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV results and the run manifest.
    #[arg(long, default_value = "rgcnet_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Graph classification under nested 3-fold cross-validation.
    Classify {
        /// TU-format dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Convolution kind filling the stack.
        #[arg(long, value_enum)]
        layer: Option<LayerArg>,
        /// Number of conv layers.
        #[arg(long)]
        layers: Option<usize>,
        #[command(flatten)]
        run: CommonRunArgs,
    },
    /// Brain-graph evolution prediction on a longitudinal dataset.
    Generate {
        /// Directory of subject_{s}_t{t}.csv matrices.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[command(flatten)]
        run: CommonRunArgs,
    },
    /// Synthesize a longitudinal connectome dataset.
    Simulate {
        /// Simulator profile JSON (defaults when omitted).
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output directory for subject_{s}_t{t}.csv files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the six comparison metrics between two CSV matrices.
    Metrics {
        /// Ground-truth adjacency CSV.
        #[arg(long = "true")]
        truth: PathBuf,
        /// Predicted adjacency CSV.
        #[arg(long)]
        pred: PathBuf,
    },
    /// Print dataset statistics (general + topological averages).
    Describe {
        #[arg(long)]
        dataset: PathBuf,
        /// Dataset layout; inferred from directory contents when omitted.
        #[arg(long, value_enum)]
        kind: Option<DatasetKindArg>,
        /// Also export per-timepoint connectivity histograms here.
        #[arg(long)]
        hist_out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Accuracy-vs-depth comparison across layer kinds (over-smoothing
    /// artifact).
    Gridsearch {
        #[arg(long)]
        dataset: PathBuf,
        /// Layer kinds to compare.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LayerArg::Rgc, LayerArg::Gcn])]
        kinds: Vec<LayerArg>,
        /// Depths to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5])]
        depths: Vec<usize>,
        #[command(flatten)]
        run: CommonRunArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DatasetKindArg {
    Tu,
    Connectome,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RGC_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Usage/input problems exit 2; internal and numeric failures exit 1.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Ingestion(_) | Error::Parameter(_) | Error::Config(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> rgcnet::Result<()> {
    match cli.command {
        Command::Classify {
            dataset,
            layer,
            layers,
            run,
        } => {
            let mut cfg = load_config(run.config.as_deref())?;
            cfg.task = TaskKind::Classify;
            if let Some(l) = layer {
                cfg.layer_kind = l.into();
            }
            if let Some(n) = layers {
                cfg.n_layers = n;
            }
            apply_globals(&mut cfg, &cli.seed, &cli.workers);
            let data = load_tu_dataset(&dataset)?;
            let report = nested_cv_classification(&cfg, &data)?;
            std::fs::create_dir_all(&run.out)?;
            report.write_trials_csv(run.out.join("trials.csv"))?;
            write_aggregate_csv(std::slice::from_ref(&report), run.out.join("aggregate.csv"))?;
            write_manifest(&run.out, "classify", &dataset, &cfg)?;
            let acc = report
                .accuracy()
                .ok_or_else(|| Error::Numeric("every trial failed".to_string()))?;
            println!(
                "dataset={} model={} layers={} accuracy={:.4} +- {:.4} trials={}",
                report.dataset,
                report.model,
                report.n_layers,
                acc.mean,
                acc.std,
                report.trials.len()
            );
            Ok(())
        }
        Command::Generate {
            dataset,
            variant,
            run,
        } => {
            let mut cfg = load_config(run.config.as_deref())?;
            cfg.task = TaskKind::Generate;
            if let Some(v) = variant {
                cfg.variant = v.into();
            }
            apply_globals(&mut cfg, &cli.seed, &cli.workers);
            let data = load_connectome_dataset(&dataset)?;
            let report = nested_cv_generation(&cfg, &data)?;
            std::fs::create_dir_all(&run.out)?;
            report.write_trials_csv(run.out.join("trials.csv"))?;
            write_aggregate_csv(std::slice::from_ref(&report), run.out.join("aggregate.csv"))?;
            write_manifest(&run.out, "generate", &dataset, &cfg)?;
            let model_eval = report
                .eval_mean()
                .ok_or_else(|| Error::Numeric("every trial failed".to_string()))?;
            let identity_eval = report.identity_mean().expect("identity evaluated per trial");
            print_generation_table(&report.dataset, &report.model, &model_eval, &identity_eval);
            Ok(())
        }
        Command::Simulate { profile, out } => {
            let profile = match profile {
                Some(p) => SimulatorProfile::from_json_file(p)?,
                None => SimulatorProfile::default(),
            };
            let mut profile = profile;
            if let Some(seed) = cli.seed {
                profile.seed = seed;
            }
            let params = profile.to_params()?;
            let data = simulate_longitudinal(&params)?;
            std::fs::create_dir_all(&out)?;
            for g in &data.graphs {
                let (s, t) = (g.subject.unwrap(), g.timepoint.unwrap());
                write_connectome_csv(&g.adjacency, out.join(format!("subject_{s}_t{t}.csv")))?;
            }
            let manifest = serde_json::json!({
                "command": "simulate",
                "profile": profile,
                "seed": profile.seed,
                "version": env!("CARGO_PKG_VERSION"),
                "files": data.graphs.len(),
            });
            std::fs::write(
                out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
            )?;
            println!(
                "wrote {} matrices ({} subjects x {} timepoints) to {}",
                data.graphs.len(),
                params.n_subjects,
                params.n_timepoints,
                out.display()
            );
            Ok(())
        }
        Command::Metrics { truth, pred } => {
            let a = read_matrix(&truth)?;
            let b = read_matrix(&pred)?;
            let report = evaluate_pair(&a, &b)?;
            println!("{}", EvalReport::CSV_HEADER);
            println!("{}", report.csv_row());
            Ok(())
        }
        Command::Describe {
            dataset,
            kind,
            hist_out,
            bins,
        } => {
            let data = load_any_dataset(&dataset, kind)?;
            let desc = describe_dataset(&data)?;
            println!("{desc}");
            if let Some(dir) = hist_out {
                export_connectivity_histograms(&data, &dir, bins)?;
                println!("histograms written to {}", dir.display());
            }
            Ok(())
        }
        Command::Gridsearch {
            dataset,
            kinds,
            depths,
            run,
        } => {
            let mut cfg = load_config(run.config.as_deref())?;
            cfg.task = TaskKind::Classify;
            apply_globals(&mut cfg, &cli.seed, &cli.workers);
            let data = load_tu_dataset(&dataset)?;
            let kinds: Vec<LayerKind> = kinds.into_iter().map(Into::into).collect();
            let reports = layer_depth_comparison(&cfg, &data, &kinds, &depths)?;
            std::fs::create_dir_all(&run.out)?;
            write_depth_comparison_csv(&reports, &depths, run.out.join("depth_comparison.csv"))?;
            write_aggregate_csv(&reports, run.out.join("aggregate.csv"))?;
            for r in &reports {
                r.write_trials_csv(run.out.join(format!("trials_{}_{}layers.csv", r.model, r.n_layers)))?;
            }
            write_manifest(&run.out, "gridsearch", &dataset, &cfg)?;
            for r in &reports {
                if let Some(acc) = r.accuracy() {
                    println!(
                        "model={} layers={} accuracy={:.4} +- {:.4}",
                        r.model, r.n_layers, acc.mean, acc.std
                    );
                }
            }
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> rgcnet::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_globals(cfg: &mut ExperimentConfig, seed: &Option<u64>, workers: &Option<usize>) {
    if let Some(s) = seed {
        cfg.master_seed = *s;
        // Trial seeds fan out from the master seed.
        cfg.seeds = (0..cfg.seeds.len() as u64)
            .map(|i| rgcnet::linalg::Rng::derive_seed(*s, 0xE0 + i))
            .collect();
    }
    if let Some(w) = workers {
        cfg.workers = *w;
    }
}

fn write_manifest(out: &Path, command: &str, dataset: &Path, cfg: &ExperimentConfig) -> rgcnet::Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "dataset": dataset.display().to_string(),
        "config": cfg,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

fn read_matrix(path: &Path) -> rgcnet::Result<rgcnet::linalg::Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Ingestion(format!("bad value '{t}' in {}", path.display())))
            })
            .collect::<rgcnet::Result<_>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Ingestion(format!(
            "{} is not a square matrix",
            path.display()
        )));
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    rgcnet::linalg::Matrix::from_vec(n, n, data)
}

/// TU directories hold *_A.txt; connectome directories hold subject CSVs.
fn load_any_dataset(path: &Path, kind: Option<DatasetKindArg>) -> rgcnet::Result<Dataset> {
    let kind = match kind {
        Some(k) => k,
        None => {
            let has_tu = std::fs::read_dir(path)
                .map_err(|e| Error::Ingestion(format!("cannot read {}: {e}", path.display())))?
                .filter_map(|e| e.ok())
                .any(|e| e.file_name().to_string_lossy().ends_with("_A.txt"));
            if has_tu {
                DatasetKindArg::Tu
            } else {
                DatasetKindArg::Connectome
            }
        }
    };
    match kind {
        DatasetKindArg::Tu => load_tu_dataset(path),
        DatasetKindArg::Connectome => load_connectome_dataset(path),
    }
}

fn print_generation_table(dataset: &str, model: &str, eval: &EvalReport, identity: &EvalReport) {
    println!("dataset: {dataset}");
    println!(
        "{:<24}{:>10}{:>12}{:>10}{:>12}{:>14}{:>14}",
        "model", "MAE", "Frobenius", "NodeStr", "Clustering", "Betweenness", "Eigenvector"
    );
    let row = |name: &str, e: &EvalReport| {
        println!(
            "{:<24}{:>10.4}{:>12.4}{:>10.4}{:>12.4}{:>14.4}{:>14.4}",
            name, e.mae, e.frobenius_distance, e.mae_node_strength, e.mae_clustering,
            e.mae_betweenness, e.mae_eigenvector
        );
    };
    row("Identity Function", identity);
    row(model, eval);
    println!(
        "(betweenness centrality convention: {})",
        if eval.betweenness_normalized {
            "normalized"
        } else {
            "raw"
        }
    );
}
