use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scaudit_core::data::{apply_recipe, RawTable};
use scaudit_core::harness::{DatasetConfig, Method, Stat};
use scaudit_core::{
    emit_report, run_experiment, ExperimentConfig, ModelSpec, PrepRecipe, RunSummary, Schema,
};

#[derive(Parser)]
#[command(
    name = "scaudit",
    version,
    about = "Self-consistency audits and abstaining ensembles for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a preprocessing recipe to a raw CSV and write a clean CSV.
    Prep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap the learner and report baseline metrics, SC CDFs and W1.
    Audit(RunArgs),
    /// Run the κ-gated ensemble next to the baseline.
    Ensemble {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Mode::Simple)]
        mode: Mode,
        /// Models per inner bag for `--mode super` (odd).
        #[arg(long)]
        inner: Option<usize>,
    },
    /// Re-aggregate stored split records and rewrite the report files.
    Report {
        /// A summary.json written by `audit` or `ensemble`.
        #[arg(long)]
        from: PathBuf,
        /// Output directory; defaults to the directory of `--from`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Simple,
    Super,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Column roles, e.g. `target=o,group=g` or `target=o,group=g,features=a|b`.
    #[arg(long, value_parser = parse_schema)]
    schema: Option<Schema>,
    #[arg(long)]
    recipe: Option<PathBuf>,
    /// logistic, tree, forest or constant.
    #[arg(long)]
    model: Option<String>,
    /// Bootstrap replicates per split.
    #[arg(long)]
    b: Option<usize>,
    /// Number of train/test splits.
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_schema(s: &str) -> Result<Schema, String> {
    let (mut target, mut group, mut features) = (None, None, None);
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let value = value.trim().to_owned();
        match key.trim() {
            "target" => target = Some(value),
            "group" => group = Some(value),
            "features" => features = Some(value.split('|').map(str::to_owned).collect()),
            other => return Err(format!("unknown schema key `{other}`")),
        }
    }
    Ok(Schema {
        target: target.ok_or("schema needs target=<column>")?,
        group: group.ok_or("schema needs group=<column>")?,
        features,
    })
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

impl RunArgs {
    fn config(&self, methods: Vec<Method>, inner: Option<usize>) -> CliResult<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => {
                let path = self
                    .dataset
                    .clone()
                    .ok_or("either --config or --dataset is required")?;
                let schema = match (&self.schema, &self.recipe) {
                    (Some(schema), _) => schema.clone(),
                    (None, Some(recipe)) => {
                        let r = PrepRecipe::from_json_file(recipe)?;
                        Schema::new(r.target.column, r.group.column)
                    }
                    (None, None) => {
                        return Err("--schema or --recipe is required with --dataset".into())
                    }
                };
                ExperimentConfig::new(DatasetConfig {
                    path,
                    schema,
                    recipe: None,
                })
            }
        };
        if let Some(path) = &self.dataset {
            config.dataset.path = path.clone();
        }
        if let Some(schema) = &self.schema {
            config.dataset.schema = schema.clone();
        }
        if let Some(recipe) = &self.recipe {
            config.dataset.recipe = Some(recipe.clone());
        }
        if let Some(kind) = &self.model {
            config.model = ModelSpec::from_kind(kind)?;
        }
        if let Some(b) = self.b {
            config.replicates = b;
        }
        if let Some(s) = self.splits {
            config.split.split_count = s;
        }
        if let Some(kappa) = self.kappa {
            config.policy.kappa = kappa;
        }
        if let Some(seed) = self.seed {
            config.split.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        if let Some(inner) = inner {
            config.inner_count = inner;
        }
        config.methods = methods;
        config.validate()?;
        Ok(config)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

fn fmt_stat(s: Stat) -> String {
    match (s.mean, s.std) {
        (Some(m), Some(sd)) => format!("{m:.4}±{sd:.4}"),
        _ => "-".into(),
    }
}

fn print_summary(summary: &RunSummary) {
    println!(
        "{:<9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>16} {:>16}",
        "method", "err", "fpr", "fnr", "pr", "ar", "mean_sc", "w1", "w1_masked"
    );
    for m in &summary.methods {
        let o = &m.mean.overall;
        println!(
            "{:<9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>16} {:>16}",
            m.method.name(),
            fmt(o.err),
            fmt(o.fpr),
            fmt(o.fnr),
            fmt(o.pr),
            fmt(o.ar),
            fmt(o.mean_sc),
            fmt_stat(m.w1),
            fmt_stat(m.w1_masked)
        );
    }
}

fn run(args: &RunArgs, methods: Vec<Method>, inner: Option<usize>) -> CliResult<()> {
    let config = args.config(methods, inner)?;
    let out = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("scaudit-out"));
    let summary = run_experiment(&config)?;
    write_report(&summary, &out)
}

fn write_report(summary: &RunSummary, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let files = emit_report(summary, out)?;
    print_summary(summary);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Prep {
            dataset,
            recipe,
            out,
        } => {
            let recipe = PrepRecipe::from_json_file(&recipe)?;
            let data = apply_recipe(&RawTable::read_csv(&dataset)?, &recipe)?;
            data.write_csv(&out)?;
            eprintln!(
                "wrote {} rows, {} features to {}",
                data.n(),
                data.m(),
                out.display()
            );
            Ok(())
        }
        Command::Audit(args) => run(&args, vec![Method::Baseline], None),
        Command::Ensemble {
            run: args,
            mode,
            inner,
        } => {
            let method = match mode {
                Mode::Simple => Method::Simple,
                Mode::Super => Method::Super,
            };
            if inner.is_some() && matches!(mode, Mode::Simple) {
                return Err("--inner only applies to --mode super".into());
            }
            run(&args, vec![Method::Baseline, method], inner)
        }
        Command::Report { from, out } => {
            let stored = RunSummary::from_json_file(&from)?;
            let summary = RunSummary::from_records(stored.config, stored.splits)?;
            let out = out.unwrap_or_else(|| {
                from.parent()
                    .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
            });
            write_report(&summary, &out)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
