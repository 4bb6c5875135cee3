use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cardfraud::experiments::{
    compare_sampling, emit_report, gen_synthetic, prepare_all, run_cell, run_experiment,
    sweep_imbalance, Cell, ExperimentPlan, Partition, RunRecord, SyntheticSpec, ALL_FORMATS,
};
use cardfraud::ingest::{load_csv, profile, Schema};
use cardfraud::metrics::{evaluate, MetricReport};
use cardfraud::preprocess::correlation_matrix;
use cardfraud::{Dataset, Error, ModelFile, Result, Run};
use clap::{Parser, Subcommand};

const DEFAULT_OUT: &str = "cardfraud-out";

#[derive(Debug, Parser)]
#[command(name = "cardfraud", version, about = "Credit-card fraud detection experiments")]
struct Cli {
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid cells trained in parallel (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "CARDFRAUD_OUT")]
    out: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    /// CSV file.
    data: PathBuf,
    /// Schema preset (ecd, scd, tcd) or schema TOML file. Without one every
    /// column except the label is numeric.
    #[arg(long)]
    schema: Option<String>,
    /// Label column when no schema is given.
    #[arg(long, default_value = "Class")]
    label: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Row, class and per-column statistics.
    Profile(DataArgs),
    /// Feature correlation matrix as CSV and heatmap SVG.
    Explore {
        #[command(flatten)]
        data: DataArgs,
        /// Include the label as a column.
        #[arg(long)]
        with_label: bool,
    },
    /// Write a synthetic dataset from a spec file or a preset name.
    GenSynth {
        /// Spec TOML, or one of ecd, scd, tcd.
        spec: String,
        /// Rows for a preset.
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        /// Destination CSV (default: <out>/synthetic.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the first model of a config on its first dataset and sampler.
    Train { config: PathBuf },
    /// Score a saved model on a dataset.
    Evaluate {
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Decision threshold (default: the one stored with the model).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Under-sample the training data to each majority:minority ratio.
    SweepImbalance {
        config: PathBuf,
        /// Comma-separated ratios; overrides the config.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Compare resampling methods on validation and test data.
    CompareSampling { config: PathBuf },
    /// Run the full dataset × sampler × model grid.
    Run { plan: PathBuf },
}

fn resolve_schema(args: &DataArgs) -> Result<Schema> {
    match &args.schema {
        Some(s) => match Schema::preset(s) {
            Some(schema) => Ok(schema),
            None => Schema::load(Path::new(s)),
        },
        None => Schema::from_header(&args.data, &args.label),
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    load_csv(&args.data, &resolve_schema(args)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Ctx {
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out_dir(&self, plan: Option<&ExperimentPlan>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| plan.and_then(|p| p.run.output.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Loads a plan, makes dataset paths absolute relative to the plan file
    /// and applies flag overrides.
    fn plan(&self, path: &Path) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut plan.datasets {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    d.path = Some(absolute(&base.join(p)));
                }
            }
            if let Some(s) = &d.schema {
                if Schema::preset(s).is_none() && Path::new(s).is_relative() {
                    d.schema = Some(absolute(&base.join(s)).display().to_string());
                }
            }
        }
        if let Some(s) = self.seed {
            plan.run.seed = s;
        }
        if let Some(j) = self.jobs {
            plan.run.jobs = j;
        }
        plan.run.output = Some(self.out_dir(Some(&plan)));
        plan.validate()?;
        Ok(plan)
    }

    /// Writes the effective plan next to the results and echoes it on stderr.
    fn echo(&self, plan: &ExperimentPlan, dir: &Path) -> Result<()> {
        mkdir(dir)?;
        let text = plan.to_toml()?;
        log::info!("resolved configuration:\n{text}");
        write(&dir.join("resolved.toml"), &text)
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn fmt_metrics(m: &MetricReport) -> String {
    format!(
        "acc {:.4}  prec {}  rec {}  f1 {}  (tp {} fp {} fn {} tn {})",
        m.accuracy,
        short(m.precision),
        short(m.recall),
        short(m.f1),
        m.tp,
        m.fp,
        m.fn_,
        m.tn
    )
}

fn short(s: cardfraud::metrics::Score) -> String {
    match s.value() {
        Some(v) => format!("{v:.4}"),
        None => "undef".into(),
    }
}

fn print_record(record: &RunRecord) {
    println!("{} ({}), plan {}", record.experiment, record.operation, &record.plan_hash[..12]);
    for c in &record.cells {
        let head = format!("{:<10} {:<8} {:<10} ratio {:<6}", c.dataset, c.model, c.sampler, c.ratio);
        if c.status != cardfraud::experiments::CellStatus::Ok {
            println!("{head} {}", c.status);
            continue;
        }
        for &p in &record.partitions {
            if let Some(m) = c.metrics(p) {
                println!("{head} {:<10} {}", p.name(), fmt_metrics(m));
            }
        }
    }
}

fn finish(mut run: Run, plan: &ExperimentPlan, dir: &Path) -> Result<()> {
    let written = emit_report(
        &mut run,
        dir,
        &ALL_FORMATS,
        plan.run.chart_partition,
        plan.run.timings,
        plan.run.save_models,
    )?;
    print_record(&run.record);
    println!("wrote {} files under {}", written.len(), dir.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        jobs: cli.jobs,
        out: cli.out,
    };
    match cli.command {
        Command::Profile(args) => {
            let ds = load_data(&args)?;
            let p = profile(&ds)?;
            let dir = ctx.out_dir(None);
            mkdir(&dir)?;
            let path = dir.join(format!("{}.profile.json", stem(&args.data)));
            write(&path, &serde_json::to_string_pretty(&p).map_err(Error::from)?)?;
            println!(
                "{} rows, {} features, {} fraud / {} normal, fraud_fraction {:.6}",
                p.n_rows, p.n_features, p.n_pos, p.n_neg, p.fraud_fraction
            );
            for c in &p.columns {
                println!(
                    "  {:<28} mean {:>14.6} std {:>14.6} missing {:>6} distinct {:>8}",
                    c.name, c.mean, c.std, c.n_missing, c.n_distinct
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Explore { data, with_label } => {
            let ds = load_data(&data)?;
            let corr = correlation_matrix(&ds, with_label)?;
            let dir = ctx.out_dir(None);
            mkdir(&dir)?;
            let name = format!("{}.correlation", stem(&data.data));
            corr.write(&dir, &name)?;
            if corr.has_warnings() {
                eprintln!("warning: zero-variance columns {:?}", corr.zero_variance);
            }
            println!("{}×{} correlation matrix", corr.dim(), corr.dim());
            println!("wrote {0}/{name}.csv and {0}/{name}.svg", dir.display());
        }
        Command::GenSynth { spec, rows, output } => {
            let mut s = match SyntheticSpec::preset(&spec, rows, 0) {
                Some(s) => s,
                None => {
                    let text = std::fs::read_to_string(&spec)
                        .map_err(|e| Error::InvalidArgument(format!("{spec}: {e}")))?;
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{spec}: {e}")))?
                }
            };
            if let Some(seed) = ctx.seed {
                s.seed = seed;
            }
            let ds: Dataset = gen_synthetic(&s)?;
            let path = output.unwrap_or_else(|| ctx.out_dir(None).join("synthetic.csv"));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                mkdir(parent)?;
            }
            ds.write_csv(&path)?;
            println!("{} rows ({} fraud), {} features -> {}", ds.n_rows(), ds.n_pos(), ds.n_features(), path.display());
        }
        Command::Train { config } => {
            let plan = ctx.plan(&config)?;
            let dir = ctx.out_dir(Some(&plan));
            ctx.echo(&plan, &dir)?;
            let parts = prepare_all::<f64>(&plan)?;
            let cell = Cell {
                dataset: 0,
                model: plan.models[0].clone(),
                sampler: plan.run_samplers()[0].clone(),
                cap_ratio: false,
            };
            let out = run_cell(&parts[0], &cell, &plan.run, &[Partition::Validation, Partition::Test]);
            let r = &out.result;
            let Some(model) = out.model else {
                return Err(Error::Precondition(format!("{}: {}", r.key(), r.status)));
            };
            let path = dir.join(format!("{}.model", r.key()));
            model.save(&path)?;
            write(
                &dir.join(format!("{}.json", r.key())),
                &serde_json::to_string_pretty(r).map_err(Error::from)?,
            )?;
            for (name, m) in [("validation", &r.validation), ("test", &r.test)] {
                if let Some(m) = m {
                    println!("{:<10} {}", name, fmt_metrics(m));
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Evaluate { model, data, threshold } => {
            let file = ModelFile::load(&model)?;
            let ds = file.prepare(&load_data(&data)?)?;
            let t = threshold.unwrap_or(file.threshold);
            let pred = file.model.classify(&ds, t)?;
            let m = evaluate(ds.labels(), &pred)?;
            let dir = ctx.out_dir(None);
            mkdir(&dir)?;
            let path = dir.join(format!("{}.evaluation.json", stem(&data.data)));
            write(&path, &serde_json::to_string_pretty(&m).map_err(Error::from)?)?;
            println!("{}", fmt_metrics(&m));
            println!("wrote {}", path.display());
        }
        Command::SweepImbalance { config, ratios } => {
            let mut plan = ctx.plan(&config)?;
            if let Some(r) = ratios {
                plan.ratios = r;
            }
            plan.validate()?;
            let dir = ctx.out_dir(Some(&plan));
            ctx.echo(&plan, &dir)?;
            let run = sweep_imbalance(&plan, &plan.models, &plan.ratios)?;
            finish(run, &plan, &dir)?;
        }
        Command::CompareSampling { config } => {
            let plan = ctx.plan(&config)?;
            let dir = ctx.out_dir(Some(&plan));
            ctx.echo(&plan, &dir)?;
            let run = compare_sampling(&plan, &plan.models)?;
            finish(run, &plan, &dir)?;
        }
        Command::Run { plan: path } => {
            let plan = ctx.plan(&path)?;
            let dir = ctx.out_dir(Some(&plan));
            ctx.echo(&plan, &dir)?;
            let run = run_experiment(&plan)?;
            finish(run, &plan, &dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
