//! `clustree` — simulate clustered datasets, fit and apply weighted
//! sum-of-trees models, run the benchmark grid, and emit variable-importance
//! matrices. Every flag can also be set through a `CLUSTREE_`-prefixed
//! environment variable.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use clustree::bench::{
    run_benchmark, summarize, write_results_csv, write_summary_csv, BenchmarkSpec, Method,
};
use clustree::data::{format_float, read_csv_file, write_csv_file};
use clustree::ensemble::{fit_ensemble, predict_group, shared_weights, BaseKind, PredictionMode};
use clustree::importance::{vivi_matrix, weighted_vivi, ViviMatrix};
use clustree::model_io::{load_model_file, save_model_file, ModelFile};
use clustree::numerics::RandomSource;
use clustree::simgen::{generate, Dgp, Setting, SimConfig};
use clustree::stage1::{group_averaged_weights, predict_weights, Stage1Kind, WeightVector};
use clustree::tree::TreeConfig;

#[derive(Parser)]
#[command(
    name = "clustree",
    version,
    about = "Weighted sum-of-trees regression for clustered data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated train/test pair and a metadata sidecar.
    Simulate(SimulateArgs),
    /// Fit a weighted sum-of-trees (or sum-of-forests) model from a CSV.
    Fit(FitArgs),
    /// Predict outcomes for a test CSV with a fitted model.
    Predict(PredictArgs),
    /// Run the comparative benchmark grid and write tidy result CSVs.
    Benchmark(BenchmarkArgs),
    /// Emit per-group VIVI matrices and optionally their weighted combination.
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation setting: 1, 2, or 3.
    #[arg(long, env = "CLUSTREE_SETTING")]
    setting: u8,
    /// Data-generating process for setting 3: mu1, mu2, or mu3.
    #[arg(long, env = "CLUSTREE_DGP")]
    dgp: Option<Dgp>,
    /// Observations per group.
    #[arg(long, env = "CLUSTREE_N")]
    n: usize,
    /// Total number of groups.
    #[arg(long, env = "CLUSTREE_K")]
    k: usize,
    /// Random-effects scale (settings 1 and 2).
    #[arg(long, default_value_t = 1.0, env = "CLUSTREE_SIGMA_ALPHA")]
    sigma_alpha: f64,
    #[arg(long, default_value_t = 0, env = "CLUSTREE_SEED")]
    seed: u64,
    #[arg(long, env = "CLUSTREE_OUT_TRAIN")]
    out_train: PathBuf,
    #[arg(long, env = "CLUSTREE_OUT_TEST")]
    out_test: PathBuf,
    /// Sidecar path for the config and noiseless means; defaults to
    /// `<out-train>.meta.json`.
    #[arg(long, env = "CLUSTREE_OUT_META")]
    out_meta: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, env = "CLUSTREE_TRAIN_CSV")]
    train_csv: PathBuf,
    /// Base learner per group: tree or forest.
    #[arg(long, default_value = "tree", env = "CLUSTREE_BASE")]
    base: String,
    /// Stage-1 classifier: logistic or nb.
    #[arg(long, default_value = "logistic", env = "CLUSTREE_STAGE1")]
    stage1: String,
    /// Trees per group forest (forest base only); defaults to the number of
    /// training groups J.
    #[arg(long, env = "CLUSTREE_FOREST_SIZE")]
    forest_size: Option<usize>,
    #[arg(long, default_value_t = 0, env = "CLUSTREE_SEED")]
    seed: u64,
    #[arg(long, env = "CLUSTREE_OUT_MODEL")]
    out_model: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, env = "CLUSTREE_MODEL")]
    model: PathBuf,
    #[arg(long, env = "CLUSTREE_TEST_CSV")]
    test_csv: PathBuf,
    /// Weighting mode: `group` shares group-averaged weights across each
    /// test group's rows; `point` weights every row by itself.
    #[arg(long, default_value = "group", env = "CLUSTREE_MODE")]
    mode: String,
    /// Permute test columns by name when their order differs from the model.
    #[arg(long, default_value_t = false, env = "CLUSTREE_REORDER")]
    reorder: bool,
    #[arg(long, env = "CLUSTREE_OUT_CSV")]
    out_csv: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON file holding a full benchmark spec; overrides the grid flags.
    #[arg(long, env = "CLUSTREE_SPEC_FILE")]
    spec_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1, env = "CLUSTREE_SETTING")]
    setting: u8,
    /// Comma-separated data-generating processes (setting 3).
    #[arg(long, value_delimiter = ',', env = "CLUSTREE_DGP")]
    dgp: Vec<Dgp>,
    /// Comma-separated observations-per-group values.
    #[arg(long, value_delimiter = ',', env = "CLUSTREE_N")]
    n: Vec<usize>,
    /// Comma-separated total group counts.
    #[arg(long, value_delimiter = ',', env = "CLUSTREE_K")]
    k: Vec<usize>,
    /// Comma-separated random-effect scales (settings 1 and 2); defaults to
    /// 0.5,1,2,4.
    #[arg(long, value_delimiter = ',', env = "CLUSTREE_SIGMA_ALPHA")]
    sigma_alpha: Vec<f64>,
    #[arg(long, default_value_t = 20, env = "CLUSTREE_REPLICATES")]
    replicates: usize,
    /// Comma-separated methods; defaults to all four.
    #[arg(long, value_delimiter = ',', env = "CLUSTREE_METHODS")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0, env = "CLUSTREE_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 1, env = "CLUSTREE_THREADS")]
    threads: usize,
    #[arg(long, env = "CLUSTREE_OUT_CSV")]
    out_csv: PathBuf,
    #[arg(long, env = "CLUSTREE_SUMMARY_CSV")]
    summary_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long, env = "CLUSTREE_MODEL")]
    model: PathBuf,
    /// Data used to evaluate importances; rows are matched to each group
    /// learner by their group label.
    #[arg(long, env = "CLUSTREE_DATA_CSV")]
    data_csv: PathBuf,
    /// Permutation repeats per feature.
    #[arg(long, default_value_t = 10, env = "CLUSTREE_REPEATS")]
    repeats: usize,
    /// Partial-dependence grid size per feature.
    #[arg(long, default_value_t = 10, env = "CLUSTREE_GRID_SIZE")]
    grid_size: usize,
    /// `uniform`, or `from-model:<rows.csv>` to average stage-1 weights over
    /// a holdout cohort.
    #[arg(long, default_value = "uniform", env = "CLUSTREE_WEIGHTS")]
    weights: String,
    #[arg(long, default_value_t = 0, env = "CLUSTREE_SEED")]
    seed: u64,
    /// Worker threads for the feature-pair computations.
    #[arg(long, default_value_t = 1, env = "CLUSTREE_THREADS")]
    threads: usize,
    /// Output stem: per-group files land next to it as
    /// `<stem>.<group>.csv` plus `<stem>.combined.csv`.
    #[arg(long, env = "CLUSTREE_OUT_CSV")]
    out_csv: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Importance(args) => cmd_importance(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let setting = Setting::try_from(args.setting).map_err(|e| anyhow!(e))?;
    let config = SimConfig {
        setting,
        dgp: args.dgp,
        n: args.n,
        k: args.k,
        sigma_alpha: args.sigma_alpha,
        seed: args.seed,
    };
    let sim = generate(&config).context("generating the simulated dataset")?;
    write_csv_file(&sim.train, &args.out_train)
        .with_context(|| format!("writing {}", args.out_train.display()))?;
    write_csv_file(&sim.test, &args.out_test)
        .with_context(|| format!("writing {}", args.out_test.display()))?;

    let meta_path = args.out_meta.unwrap_or_else(|| {
        let mut p = args.out_train.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    });
    let meta = serde_json::json!({
        "config": config,
        "true_mu_train": sim.true_mu_train,
        "true_mu_test": sim.true_mu_test,
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;

    println!(
        "wrote {} ({} rows), {} ({} rows), {}",
        args.out_train.display(),
        sim.train.n_rows(),
        args.out_test.display(),
        sim.test.n_rows(),
        meta_path.display()
    );
    Ok(())
}

fn parse_base(s: &str) -> Result<BaseKind> {
    match s {
        "tree" => Ok(BaseKind::Tree),
        "forest" => Ok(BaseKind::Forest),
        other => bail!("--base must be 'tree' or 'forest', got '{other}'"),
    }
}

fn parse_stage1(s: &str) -> Result<Stage1Kind> {
    match s {
        "logistic" => Ok(Stage1Kind::MultinomialLogistic),
        "nb" | "naive-bayes" => Ok(Stage1Kind::GaussianNaiveBayes),
        other => bail!("--stage1 must be 'logistic' or 'nb', got '{other}'"),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let base = parse_base(&args.base)?;
    let stage1 = parse_stage1(&args.stage1)?;
    let (train, _) = read_csv_file(&args.train_csv, true)?;
    let labels = train.group_labels();
    let forest_size = args.forest_size.unwrap_or(labels.len());

    let ensemble = fit_ensemble(
        &train,
        base,
        stage1,
        &TreeConfig::default(),
        forest_size,
        &RandomSource::new(args.seed),
    )
    .context("fitting the ensemble")?;
    for warning in ensemble.classifier().warnings() {
        eprintln!("warning: {warning}");
    }

    let file = ModelFile::new(ensemble, train.feature_names().to_vec())?;
    save_model_file(&file, &args.out_model)
        .with_context(|| format!("writing {}", args.out_model.display()))?;

    println!("fitted J = {} learners", labels.len());
    for label in &labels {
        println!("  group {label}: {} rows", train.group_rows(label).len());
    }
    println!("model written to {}", args.out_model.display());
    Ok(())
}

/// Check the data columns against the model schema; with `reorder`, return
/// the permutation mapping model feature position -> data column index.
fn align_features(
    model_names: &[String],
    data_names: &[String],
    reorder: bool,
) -> Result<Vec<usize>> {
    if model_names == data_names {
        return Ok((0..model_names.len()).collect());
    }
    let missing: Vec<&str> = model_names
        .iter()
        .filter(|n| !data_names.contains(n))
        .map(|s| s.as_str())
        .collect();
    let extra: Vec<&str> = data_names
        .iter()
        .filter(|n| !model_names.contains(n))
        .map(|s| s.as_str())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        bail!(
            "feature names do not match the model (missing: [{}], unexpected: [{}])",
            missing.join(", "),
            extra.join(", ")
        );
    }
    if !reorder {
        bail!("feature columns are ordered differently from the model; pass --reorder to permute by name");
    }
    Ok(model_names
        .iter()
        .map(|n| data_names.iter().position(|d| d == n).unwrap())
        .collect())
}

fn reorder_row(row: &[f64], permutation: &[usize]) -> Vec<f64> {
    permutation.iter().map(|&i| row[i]).collect()
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let mode = match args.mode.as_str() {
        "group" => PredictionMode::GroupAveraged,
        "point" => PredictionMode::PerPoint,
        other => bail!("--mode must be 'group' or 'point', got '{other}'"),
    };
    let file = load_model_file(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let (data, has_outcome) = read_csv_file(&args.test_csv, false)?;
    let permutation = align_features(&file.feature_names, data.feature_names(), args.reorder)?;

    let rows: Vec<Vec<f64>> = (0..data.n_rows())
        .map(|i| reorder_row(data.row(i), &permutation))
        .collect();

    let model = &file.model;
    let mut predictions = vec![0.0; data.n_rows()];
    let mut weights: Vec<Option<WeightVector>> = vec![None; data.n_rows()];
    for label in data.group_labels() {
        let indices = data.group_rows(&label);
        let group_rows: Vec<&[f64]> = indices.iter().map(|&i| rows[i].as_slice()).collect();
        let values = predict_group(model, &group_rows, mode)?;
        let shared = match mode {
            PredictionMode::GroupAveraged => Some(shared_weights(model, &group_rows)?),
            PredictionMode::PerPoint => None,
        };
        for (&i, v) in indices.iter().zip(values) {
            predictions[i] = v;
            weights[i] = Some(match &shared {
                Some(w) => w.clone(),
                None => predict_weights(model.classifier(), &rows[i])?,
            });
        }
    }

    let out = std::fs::File::create(&args.out_csv)
        .with_context(|| format!("creating {}", args.out_csv.display()))?;
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string()];
    if has_outcome {
        header.push("y_true".to_string());
    }
    header.push("y_pred".to_string());
    for label in model.group_labels() {
        header.push(format!("w_{label}"));
    }
    wtr.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut record = vec![data.groups()[i].clone()];
        if has_outcome {
            record.push(format_float(data.outcomes()[i]));
        }
        record.push(format_float(predictions[i]));
        for w in weights[i].as_ref().unwrap().values() {
            record.push(format_float(*w));
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    println!(
        "wrote {} predictions to {}",
        data.n_rows(),
        args.out_csv.display()
    );
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let spec: BenchmarkSpec = match &args.spec_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let setting = Setting::try_from(args.setting).map_err(|e| anyhow!(e))?;
            let methods = if args.methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                args.methods
                    .iter()
                    .map(|m| m.parse().map_err(|e: String| anyhow!(e)))
                    .collect::<Result<Vec<Method>>>()?
            };
            let sigma_alphas = match setting {
                Setting::Three => vec![],
                _ if args.sigma_alpha.is_empty() => vec![0.5, 1.0, 2.0, 4.0],
                _ => args.sigma_alpha.clone(),
            };
            BenchmarkSpec {
                setting,
                dgps: args.dgp.clone(),
                n_values: args.n.clone(),
                k_values: args.k.clone(),
                sigma_alphas,
                replicates: args.replicates,
                methods,
                seed: args.seed,
            }
        }
    };

    let result = run_benchmark(&spec, args.threads.max(1)).context("running the benchmark")?;
    let out = std::fs::File::create(&args.out_csv)
        .with_context(|| format!("creating {}", args.out_csv.display()))?;
    write_results_csv(&result, out)?;
    println!(
        "wrote {} result rows to {}",
        result.rows.len(),
        args.out_csv.display()
    );

    if let Some(path) = &args.summary_csv {
        let summaries = summarize(&spec, &result);
        let out =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_summary_csv(&summaries, out)?;
        println!("wrote {} summary rows to {}", summaries.len(), path.display());
    }

    let failures = result.n_failures();
    if failures > 0 {
        for row in result.rows.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "failed cell: setting={} n={} K={} replicate={} method={}: {}",
                row.cell.setting,
                row.cell.n,
                row.cell.k,
                row.replicate,
                row.method.name(),
                row.error.as_ref().unwrap()
            );
        }
        bail!("{failures} benchmark cells failed (rows recorded with NaN markers)");
    }
    Ok(())
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn vivi_output_path(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.file_stem().unwrap_or_default().to_os_string();
    name.push(format!(".{suffix}.csv"));
    stem.with_file_name(name)
}

fn cmd_importance(args: ImportanceArgs) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .context("building the thread pool")?;
    pool.install(|| run_importance(args))
}

fn run_importance(args: ImportanceArgs) -> Result<()> {
    let file = load_model_file(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let model = &file.model;
    let (data, _) = read_csv_file(&args.data_csv, true)?;
    align_features(&file.feature_names, data.feature_names(), false)?;

    // one VIVI matrix per group learner, evaluated on that group's rows
    let mut matrices: Vec<ViviMatrix> = Vec::new();
    let mut written = Vec::new();
    for (j, label) in model.group_labels().iter().enumerate() {
        let rows = data.group_rows(label);
        if rows.is_empty() {
            bail!(
                "data file {} has no rows for group '{label}'",
                args.data_csv.display()
            );
        }
        let subset = data.subset(&rows)?;
        let mut rng = RandomSource::new(args.seed).child(j as u64);
        let learner = &model.learners()[j];
        let report = match learner {
            clustree::ensemble::BaseLearner::Tree(t) => {
                vivi_matrix(t, &subset, args.repeats, args.grid_size, &mut rng)?
            }
            clustree::ensemble::BaseLearner::Forest(f) => {
                vivi_matrix(f, &subset, args.repeats, args.grid_size, &mut rng)?
            }
        };
        for w in &report.warnings {
            eprintln!("warning (group {label}): {w}");
        }
        println!(
            "group {label} raw importances: {}",
            report
                .raw_importance
                .iter()
                .zip(data.feature_names())
                .map(|(v, n)| format!("{n}={v:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        let path = vivi_output_path(&args.out_csv, &sanitize_label(label));
        report.matrix.write_csv(std::fs::File::create(&path)?)?;
        written.push(path.display().to_string());
        matrices.push(report.matrix);
    }

    // combined matrix under uniform or holdout-derived weights
    let weights = if args.weights == "uniform" {
        WeightVector::uniform(matrices.len())?
    } else if let Some(path) = args.weights.strip_prefix("from-model:") {
        let (holdout, _) = read_csv_file(Path::new(path), false)?;
        let holdout_perm = align_features(&file.feature_names, holdout.feature_names(), false)?;
        let rows: Vec<Vec<f64>> = (0..holdout.n_rows())
            .map(|i| reorder_row(holdout.row(i), &holdout_perm))
            .collect();
        group_averaged_weights(model.classifier(), rows.iter().map(|r| r.as_slice()))?
    } else {
        bail!("--weights must be 'uniform' or 'from-model:<rows.csv>'");
    };
    let combined = weighted_vivi(&matrices, &weights)?;
    let combined_path = vivi_output_path(&args.out_csv, "combined");
    combined.write_csv(std::fs::File::create(&combined_path)?)?;
    written.push(combined_path.display().to_string());

    println!("wrote {}", written.join(", "));
    println!(
        "combination weights: {}",
        weights
            .values()
            .iter()
            .zip(model.group_labels())
            .map(|(w, l)| format!("{l}={w:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}
