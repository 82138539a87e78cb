use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ranksel::detectors::{ingest_external, DetectorConfig};
use ranksel::evaluation::{adjusted_best_f1, dataset_quality, Pooling};
use ranksel::harness::{
    dataset_metric_table, pairwise_tests, rollup_csv, run_experiment, AggMethod, ExperimentConfig,
};
use ranksel::injection::{estimate_period, inject_copies, AnomalyKind};
use ranksel::io::{load_dataset, ndjson_line, write_score_file, DataFormat};
use ranksel::rankagg::theory::{borda_theory_check, outlier_simulation, OutlierSimConfig};
use ranksel::rankagg::{
    borda, empirical_influence, kemeny_exact, minimum_influence_metric, partial_borda,
    robust_borda, trim_by_influence, trimmed_borda, RankingSet,
};
use ranksel::surrogate::{metric_rankings, InapplicablePolicy};
use ranksel::{Dataset, Error, Permutation, Result, RngSeed};

#[derive(Parser)]
#[command(
    name = "ranksel",
    version,
    about = "Label-free anomaly detector selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct DataArgs {
    /// Dataset file or directory.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full selection experiment from a JSON config.
    Run {
        /// Experiment config; repeat for several datasets.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Output directory for reports.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Score a dataset with a built-in detector and write score files.
    Detect {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        kind: DetectorChoice,
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write injected copies of every series as ndjson.
    Inject {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        kind: AnomalyKind,
        #[arg(long, default_value_t = 5)]
        copies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjusted best F1 of score files against the dataset labels.
    Evaluate {
        #[arg(long)]
        scores_dir: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = PoolingChoice::PerSeries)]
        pooling: PoolingChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Surrogate metric table and the rankings it induces.
    Metrics {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated metric ids, or `all`.
        #[arg(long, default_value = "speedup,noise,cutoff,scale,contextual")]
        which: String,
        #[arg(long, default_value_t = 5)]
        copies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directories of external score files.
        #[arg(long)]
        external: Vec<PathBuf>,
        #[arg(long, default_value = "rank_last")]
        inapplicable: InapplicablePolicy,
        /// Writes `metrics.csv` and `rankings.json` here.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a rankings JSON file.
    Aggregate {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long, default_value = "borda")]
        method: AggMethod,
        /// Top-k cutoff for partial and robust; ceil(N/2) when absent.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mallows sets with uniform outlier rankings, as CSV.
    Simulate {
        /// Item counts.
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        n: Vec<usize>,
        /// Rankings per set.
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        theta: Vec<f64>,
        /// Outlier fractions.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4")]
        outliers: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-item Borda error rate against its exponential bound, as CSV.
    Theory {
        #[arg(long, default_value_t = 0.4)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 5000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorChoice {
    Ma,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingChoice {
    PerSeries,
    Pooled,
}

impl From<PoolingChoice> for Pooling {
    fn from(p: PoolingChoice) -> Self {
        match p {
            PoolingChoice::PerSeries => Pooling::PerSeries,
            PoolingChoice::Pooled => Pooling::Pooled,
        }
    }
}

/// Rankings exchanged between `metrics` and `aggregate`.
#[derive(Serialize, Deserialize)]
struct RankingsFile {
    #[serde(default)]
    model_ids: Vec<String>,
    #[serde(default)]
    metric_ids: Vec<String>,
    /// One rank vector per metric (rank 1 = best).
    rankings: Vec<Permutation>,
}

#[derive(Serialize)]
struct AggregateOutput {
    method: AggMethod,
    k: Option<usize>,
    ranks: Permutation,
    order: Vec<String>,
    selected: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_metric: Option<String>,
    influence: BTreeMap<String, f64>,
    discarded: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Detect {
            data,
            kind,
            window,
            k,
            out,
        } => {
            let cfg = match kind {
                DetectorChoice::Ma => DetectorConfig::moving_average(window),
                DetectorChoice::Knn => DetectorConfig::knn(window, k),
            };
            cfg.validate()?;
            let dataset = load(&data)?;
            for s in &dataset.series {
                write_score_file(&cfg.score(s)?, &out, s.test_start())?;
            }
            println!(
                "wrote {} score files for {} to {}",
                dataset.len(),
                cfg.model_id,
                out.display()
            );
            Ok(())
        }
        Command::Inject {
            data,
            kind,
            copies,
            seed,
            out,
        } => {
            let dataset = load(&data)?;
            let seed = RngSeed(seed);
            let mut text = String::new();
            for s in &dataset.series {
                let period = estimate_period(s).unwrap_or(1);
                for inj in inject_copies(s, kind, period, copies, seed.derive_str(&s.id))? {
                    let extra = [
                        ("kind", serde_json::json!(kind.as_str())),
                        ("source", serde_json::json!(s.id)),
                        (
                            "anomaly_span",
                            serde_json::json!([inj.anomaly_span.0, inj.anomaly_span.1]),
                        ),
                    ];
                    text.push_str(&ndjson_line(&inj.to_series(), &extra)?);
                    text.push('\n');
                }
            }
            emit(out.as_deref(), &text)
        }
        Command::Evaluate {
            scores_dir,
            data,
            pooling,
            out,
        } => {
            let dataset = load(&data)?;
            let text = evaluate_csv(
                &dataset,
                &ingest_external(&scores_dir, &dataset)?,
                pooling.into(),
            )?;
            emit(out.as_deref(), &text)
        }
        Command::Metrics {
            data,
            which,
            copies,
            seed,
            external,
            inapplicable,
            out,
        } => {
            let dataset = load(&data)?;
            let all = which.trim() == "all";
            let config = ExperimentConfig {
                metrics: if all {
                    Vec::new()
                } else {
                    which.split(',').map(|s| s.trim().to_string()).collect()
                },
                all_metrics: all,
                copies,
                seed: RngSeed(seed),
                inapplicable,
                ..ExperimentConfig::default()
            };
            let mut outputs = Vec::new();
            for dir in &external {
                outputs.extend(ingest_external(dir, &dataset)?);
            }
            let table = dataset_metric_table(&config, &dataset, outputs)?;
            let set = metric_rankings(&table, RngSeed(seed), inapplicable)?;
            let file = RankingsFile {
                model_ids: table.model_ids.clone(),
                metric_ids: set.metric_ids,
                rankings: set.rankings,
            };
            fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            write(&out.join("metrics.csv"), &table.to_csv())?;
            write(
                &out.join("rankings.json"),
                &serde_json::to_string_pretty(&file)?,
            )?;
            println!("wrote metrics.csv and rankings.json to {}", out.display());
            Ok(())
        }
        Command::Aggregate {
            rankings,
            method,
            k,
            seed,
            out,
        } => {
            let text = fs::read_to_string(&rankings).map_err(|e| io_error(&rankings, e))?;
            let file: RankingsFile = serde_json::from_str(&text)?;
            let result = aggregate(file, method, k, RngSeed(seed))?;
            emit(
                out.as_deref(),
                &(serde_json::to_string_pretty(&result)? + "\n"),
            )
        }
        Command::Simulate {
            n,
            m,
            theta,
            outliers,
            trials,
            seed,
            out,
        } => {
            let mut text = String::from(
                "n,theta,trial,fraction_noise,d_median_center,ranking,is_outlier,influence,d_center\n",
            );
            for (i, &items) in n.iter().enumerate() {
                let config = OutlierSimConfig {
                    n: items,
                    m,
                    thetas: theta.clone(),
                    fractions: outliers.clone(),
                    trials,
                    seed: RngSeed(seed).derive(i as u64),
                };
                for r in outlier_simulation(&config)? {
                    let _ = writeln!(
                        text,
                        "{items},{},{},{},{},{},{},{},{}",
                        r.theta,
                        r.trial,
                        r.fraction_noise,
                        r.d_median_center,
                        r.ranking,
                        u8::from(r.is_outlier),
                        r.influence,
                        r.d_center
                    );
                }
            }
            emit(out.as_deref(), &text)
        }
        Command::Theory {
            epsilon,
            m,
            trials,
            seed,
            out,
        } => {
            let mut text = String::from("m,trials,error_rate,bound,std_err\n");
            for row in borda_theory_check(&m, epsilon, trials, RngSeed(seed))? {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{}",
                    row.m, row.trials, row.error_rate, row.bound, row.std_err
                );
            }
            emit(out.as_deref(), &text)
        }
    }
}

fn cmd_run(configs: &[PathBuf], out: &Path) -> Result<()> {
    let mut reports = Vec::new();
    let mut alpha = None;
    for path in configs {
        let config = ExperimentConfig::from_file(path)?;
        alpha.get_or_insert(config.alpha);
        reports.push(run_experiment(&config)?);
    }
    let mut names: Vec<&str> = reports.iter().map(|r| r.dataset.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!(
            "dataset name '{}' appears twice",
            w[0]
        )));
    }
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    for report in &reports {
        write(
            &out.join(format!("{}.json", report.dataset)),
            &report.to_json()?,
        )?;
        println!("{}:", report.dataset);
        for (strategy, s) in &report.summary {
            println!("  {strategy:<24} mean F1 {:.4}", s.mean_f1);
        }
    }
    write(&out.join("rollup.csv"), &rollup_csv(&reports))?;
    let pairwise = pairwise_tests(&reports, alpha.unwrap_or(0.05))?;
    write(&out.join("pairwise.csv"), &pairwise.to_csv())?;
    println!("reports written to {}", out.display());
    Ok(())
}

fn evaluate_csv(
    dataset: &Dataset,
    outputs: &[ranksel::ModelOutput],
    pooling: Pooling,
) -> Result<String> {
    let mut by_model: BTreeMap<&str, Vec<ranksel::ModelOutput>> = BTreeMap::new();
    for o in outputs {
        by_model
            .entry(o.model_id.as_str())
            .or_default()
            .push(o.clone());
    }
    if by_model.is_empty() {
        return Err(Error::Missing("score files in the scores directory".into()));
    }
    let mut text = String::from("level,model_id,series_id,f1,precision,recall,threshold\n");
    for (model, outs) in &by_model {
        for s in &dataset.series {
            let labels = s
                .test_labels()
                .ok_or_else(|| Error::Missing(format!("labels for series '{}'", s.id)))?;
            let o = outs.iter().find(|o| o.series_id == s.id).ok_or_else(|| {
                Error::Missing(format!("scores of '{model}' on series '{}'", s.id))
            })?;
            let r = adjusted_best_f1(&o.scores, labels)?;
            let _ = writeln!(
                text,
                "series,{model},{},{},{},{},{}",
                s.id, r.best_f1, r.precision, r.recall, r.best_threshold
            );
        }
        let q = dataset_quality(outs, dataset, pooling)?;
        let _ = writeln!(text, "dataset,{model},{},{q},,,", dataset.name);
    }
    Ok(text)
}

fn aggregate(
    file: RankingsFile,
    method: AggMethod,
    k: Option<usize>,
    seed: RngSeed,
) -> Result<AggregateOutput> {
    let metric_ids = if file.metric_ids.is_empty() {
        (0..file.rankings.len()).map(|i| format!("r{i}")).collect()
    } else {
        file.metric_ids
    };
    let set = RankingSet::new(file.rankings, metric_ids)?;
    let n = set.n();
    let model_ids = if file.model_ids.is_empty() {
        (0..n).map(|i| i.to_string()).collect()
    } else if file.model_ids.len() == n {
        file.model_ids
    } else {
        return Err(Error::Invalid(format!(
            "{} model ids for rankings over {n} models",
            file.model_ids.len()
        )));
    };
    let uses_k = matches!(method, AggMethod::Partial | AggMethod::Robust);
    let k = uses_k.then(|| k.unwrap_or(n.div_ceil(2)));
    let (influence, discarded) = if set.m() >= 2 {
        let t = trim_by_influence(&set, seed)?;
        let ei = set
            .metric_ids
            .iter()
            .cloned()
            .zip(empirical_influence(&set, seed)?)
            .collect();
        (ei, t.discarded)
    } else {
        (BTreeMap::new(), Vec::new())
    };
    let mut selected_metric = None;
    let ranks = match method {
        AggMethod::Borda => borda(&set, seed)?,
        AggMethod::Partial => partial_borda(&set, k.unwrap_or(n), seed)?,
        AggMethod::Trimmed => trimmed_borda(&set, seed)?,
        AggMethod::Robust => robust_borda(&set, k.unwrap_or(n), seed)?,
        AggMethod::Kemeny => kemeny_exact(&set)?,
        AggMethod::Mim => {
            let (id, p) = minimum_influence_metric(&set, seed)?;
            selected_metric = Some(id);
            p
        }
    };
    let order: Vec<String> = ranks
        .order()
        .into_iter()
        .map(|i| model_ids[i].clone())
        .collect();
    Ok(AggregateOutput {
        method,
        k,
        selected: order[0].clone(),
        order,
        ranks,
        selected_metric,
        influence,
        discarded: if matches!(method, AggMethod::Trimmed | AggMethod::Robust) {
            discarded
        } else {
            Vec::new()
        },
    })
}

fn load(data: &DataArgs) -> Result<Dataset> {
    load_dataset(&data.dataset, data.format)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
