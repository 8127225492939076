//! Command-line definitions and the subcommands behind them.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mdport::analytics::{
    backtest, compute_metrics, lambda_sweep, portfolio_series, sensitivity_run, AnalyticsError,
    GridSpacing, LambdaGrid, SplitSpec,
};
use mdport::estimation::{asset_stats, compute_simple_returns, PerturbationConfig};
use mdport::{solve_model, ModelConfig, ModelKind, ReturnMatrix, SolveStatus};

use crate::error::CliError;
use crate::io::{ingest_prices, write_allocation, write_prices, write_text, Ingested};
use crate::manifest::{digest_file, FileDigest, Manifest};
use crate::report::{self, Table};

#[derive(Debug, Parser)]
#[command(name = "mdport", version, about = "Portfolio optimisation experiments on daily price data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for sweeps and sensitivity runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a price file and write a cleaned copy.
    Ingest(IngestArgs),
    /// Solve one model and write its allocation.
    Solve(SolveArgs),
    /// Fit models on a train window and evaluate on the test window.
    Backtest(BacktestArgs),
    /// Trace the simultaneous model over a grid of lambda values.
    SweepLambda(SweepArgs),
    /// Compare allocations before and after perturbing returns.
    Sensitivity(SensitivityArgs),
    /// Render the tables in a results directory as one document.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Directory for results; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// CSV is always written; markdown adds a `.md` copy of each table.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Required daily expected return. Mandatory for every model with a
    /// return row; the simultaneous model ignores it.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Daily standard-deviation ceiling for reverse Markowitz.
    #[arg(long, default_value_t = 0.02)]
    pub sigma0: f64,
    /// Risk weight for the simultaneous model.
    #[arg(long, default_value_t = 0.08)]
    pub lambda: f64,
    /// Per-asset weight cap (default 0.5 for MD models, 1 otherwise).
    #[arg(long)]
    pub cap: Option<f64>,
    /// Smallest nonzero weight in the MD MILP.
    #[arg(long, default_value_t = 0.05)]
    pub min_alloc: f64,
    /// L1 penalty added to the quadratic models.
    #[arg(long, default_value_t = 0.0)]
    pub mu_l1: f64,
}

impl ModelFlags {
    pub fn config(&self, models: &[ModelKind]) -> Result<ModelConfig, CliError> {
        let needs_rho = models.iter().find(|k| {
            !matches!(k, ModelKind::Simultaneous | ModelKind::ReverseMarkowitz)
        });
        let rho = match (self.rho, needs_rho) {
            (Some(rho), _) => rho,
            (None, None) => 0.0,
            (None, Some(k)) => {
                return Err(CliError::Usage(format!("--rho is required by model {}", k.slug())))
            }
        };
        Ok(ModelConfig {
            rho,
            sigma0: self.sigma0,
            lambda: self.lambda,
            mu_l1: self.mu_l1,
            cap: self.cap,
            min_alloc: self.min_alloc,
        })
    }

    fn record(&self, m: &mut Manifest) {
        m.flag("rho", self.rho.map_or("unset".into(), |r| r.to_string()));
        m.flag("sigma0", self.sigma0);
        m.flag("lambda", self.lambda);
        m.flag("cap", self.cap.map_or("model-default".into(), |c| c.to_string()));
        m.flag("min_alloc", self.min_alloc);
        m.flag("mu_l1", self.mu_l1);
    }
}

#[derive(Debug, Args)]
pub struct Window {
    /// First day of the estimation window (default: first day of data).
    #[arg(long)]
    pub train_start: Option<NaiveDate>,
    /// Last day of the estimation window, inclusive (default: last day of data).
    #[arg(long)]
    pub train_end: Option<NaiveDate>,
}

impl Window {
    fn record(&self, m: &mut Manifest) {
        let show = |d: Option<NaiveDate>| d.map_or("data".into(), |d| d.to_string());
        m.flag("train_start", show(self.train_start));
        m.flag("train_end", show(self.train_end));
    }

    fn apply(&self, returns: &ReturnMatrix) -> Result<ReturnMatrix, CliError> {
        let lo = self.train_start.unwrap_or(NaiveDate::MIN);
        let hi = self.train_end.unwrap_or(NaiveDate::MAX);
        let w = returns.select_columns(|_, d| lo <= d && d <= hi);
        if w.n_days() == 0 {
            return Err(AnalyticsError::EmptyPartition("train").into());
        }
        Ok(w)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Price CSV: `date,TICK1,TICK2,...`.
    #[arg(long)]
    pub prices: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub prices: PathBuf,
    /// markowitz, reverse-markowitz, simultaneous, mad, md or md-milp.
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[command(flatten)]
    pub window: Window,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[arg(long)]
    pub prices: PathBuf,
    /// `all` (the five table models) or a comma-separated list.
    #[arg(long, default_value = "all")]
    pub models: String,
    #[command(flatten)]
    pub flags: ModelFlags,
    /// First training day (default: first day of data).
    #[arg(long)]
    pub train_start: Option<NaiveDate>,
    /// Last training day, inclusive.
    #[arg(long, default_value = "2020-05-01")]
    pub train_end: NaiveDate,
    /// Last test day, inclusive.
    #[arg(long, default_value = "2020-08-01")]
    pub test_end: NaiveDate,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[command(flatten)]
    pub window: Window,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 100)]
    pub grid_n: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    pub grid_spacing: Spacing,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long, default_value = "all")]
    pub models: String,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[command(flatten)]
    pub window: Window,
    /// Noise divisor: perturbed returns are `r + N(0, sd) / c`.
    #[arg(long, default_value_t = 1000.0)]
    pub c: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding earlier results.
    #[arg(long, default_value = "out")]
    pub dir: PathBuf,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
}

/// Parses `all` or a comma-separated list of model slugs.
pub fn parse_models(spec: &str) -> Result<Vec<ModelKind>, CliError> {
    if spec.trim() == "all" {
        return Ok(ModelKind::DEPLOYED.to_vec());
    }
    spec.split(',')
        .map(|s| parse_model(s.trim()))
        .collect()
}

fn parse_model(slug: &str) -> Result<ModelKind, CliError> {
    ModelKind::from_slug(slug).ok_or_else(|| {
        let known: Vec<&str> = ModelKind::ALL.iter().map(|m| m.slug()).collect();
        CliError::Usage(format!("unknown model {slug:?}; expected one of {}", known.join(", ")))
    })
}

struct Loaded {
    ingested: Ingested,
    returns: ReturnMatrix,
    digest: FileDigest,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let ingested = ingest_prices(path)?;
    let returns = compute_simple_returns(&ingested.prices)?;
    Ok(Loaded {
        digest: digest_file(path)?,
        ingested,
        returns,
    })
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

/// Writes `table` as `<stem>.csv` (and `<stem>.md` for markdown) and
/// records both in the manifest.
fn emit(
    table: &Table,
    output: &Output,
    stem: &str,
    deterministic: bool,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let csv = format!("{stem}.csv");
    write_text(&output.out.join(&csv), &table.to_csv())?;
    manifest.add_output(&output.out, &csv, deterministic)?;
    if output.format == Format::Markdown {
        let md = format!("{stem}.md");
        write_text(&output.out.join(&md), &table.to_markdown())?;
        manifest.add_output(&output.out, &md, deterministic)?;
    }
    Ok(())
}

fn base_manifest(command: &str, args: &[String], threads: Option<usize>, output: &Output) -> Manifest {
    let mut m = Manifest::new(command, args.to_vec());
    m.threads = threads;
    m.flag("out", output.out.display());
    m.flag("format", format!("{:?}", output.format).to_lowercase());
    m
}

/// Runs the parsed command line. `args` is the raw argument list, stored in
/// the manifest. Returns the lines to print on success.
pub fn run(cli: Cli, args: &[String]) -> Result<Vec<String>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Ingest(a) => ingest(a, args, cli.threads),
        Command::Solve(a) => solve(a, args, cli.threads),
        Command::Backtest(a) => run_backtest(a, args, cli.threads),
        Command::SweepLambda(a) => sweep(a, args, cli.threads),
        Command::Sensitivity(a) => sensitivity(a, args, cli.threads),
        Command::Report(a) => render_report(a, args, cli.threads),
    }
}

fn ingest(a: IngestArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let loaded = load(&a.prices)?;
    prepare(&a.output.out)?;
    let mut m = base_manifest("ingest", args, threads, &a.output);
    m.flag("prices", a.prices.display());
    m.inputs.push(loaded.digest);
    let p = &loaded.ingested.prices;
    write_prices(&a.output.out.join("prices.csv"), p)?;
    m.add_output(&a.output.out, "prices.csv", true)?;
    let mut summary = Table::new(&["n_tickers", "n_days", "first_date", "last_date", "dropped"]);
    summary.push(vec![
        p.n_assets().to_string(),
        p.n_days().to_string(),
        p.dates()[0].to_string(),
        p.dates()[p.n_days() - 1].to_string(),
        loaded.ingested.dropped.join(" "),
    ]);
    emit(&summary, &a.output, "ingest", true, &mut m)?;
    m.write(&a.output.out)?;
    Ok(vec![format!(
        "tickers={} days={} dropped={}",
        p.n_assets(),
        p.n_days(),
        loaded.ingested.dropped.len()
    )])
}

fn solve(a: SolveArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let model = parse_model(&a.model)?;
    let loaded = load(&a.prices)?;
    let train = a.window.apply(&loaded.returns)?;
    let stats = asset_stats(&train)?;
    let cfg = a.flags.config(&[model])?;
    let rep = solve_model(model, &train, &stats, &cfg)?;
    let Some(x) = rep.allocation.clone() else {
        return Err(CliError::NotSolved {
            model: model.slug().into(),
            status: format!("{:?}", rep.status).to_lowercase(),
        });
    };
    prepare(&a.output.out)?;
    let mut m = base_manifest("solve", args, threads, &a.output);
    m.flag("prices", a.prices.display());
    m.flag("model", model.slug());
    a.flags.record(&mut m);
    a.window.record(&mut m);
    m.inputs.push(loaded.digest);

    write_allocation(&a.output.out.join("allocation.csv"), train.tickers(), &x)?;
    m.add_output(&a.output.out, "allocation.csv", true)?;
    let metrics = compute_metrics(&portfolio_series(&train, &x)?, &x)?;
    let table = report::table1(&[mdport::analytics::BacktestRow {
        report: rep.clone(),
        in_sample: Some(metrics),
        out_of_sample: None,
    }]);
    emit(&table, &a.output, "report", false, &mut m)?;
    m.write(&a.output.out)?;
    Ok(vec![format!(
        "model={} status=optimal objective={:e} positions={} time_s={:.6}",
        model.slug(),
        rep.objective.unwrap_or(f64::NAN),
        metrics.n_positions,
        rep.wall_time
    )])
}

fn run_backtest(a: BacktestArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let models = parse_models(&a.models)?;
    let loaded = load(&a.prices)?;
    let first = loaded.returns.dates()[0];
    let split = SplitSpec::by_end_dates(a.train_start.unwrap_or(first), a.train_end, a.test_end)?;
    let cfg = a.flags.config(&models)?;
    let jobs: Vec<_> = models.iter().map(|&k| (k, cfg)).collect();
    let rows = backtest(&loaded.returns, &split, &jobs)?;

    prepare(&a.output.out)?;
    let mut m = base_manifest("backtest", args, threads, &a.output);
    m.flag("prices", a.prices.display());
    m.flag("models", models.iter().map(|k| k.slug()).collect::<Vec<_>>().join(","));
    a.flags.record(&mut m);
    m.flag("train_start", split.train().start);
    m.flag("train_end", a.train_end);
    m.flag("test_end", a.test_end);
    m.inputs.push(loaded.digest);

    emit(&report::table1(&rows), &a.output, "table1", false, &mut m)?;
    emit(&report::table2(&rows), &a.output, "table2", true, &mut m)?;
    let mut weights = Table::new(&["ticker"]);
    weights
        .header
        .extend(rows.iter().map(|r| r.report.model.slug().to_owned()));
    for (i, t) in loaded.returns.tickers().iter().enumerate() {
        let mut line = vec![t.clone()];
        line.extend(rows.iter().map(|r| {
            r.report
                .allocation
                .as_ref()
                .map_or(report::MISSING.into(), |x| x.weights()[i].to_string())
        }));
        weights.push(line);
    }
    write_text(&a.output.out.join("allocations.csv"), &weights.to_csv())?;
    m.add_output(&a.output.out, "allocations.csv", true)?;
    m.write(&a.output.out)?;
    Ok(rows
        .iter()
        .map(|r| {
            format!(
                "model={} status={} time_s={:.6}",
                r.report.model.slug(),
                format!("{:?}", r.report.status).to_lowercase(),
                r.report.wall_time
            )
        })
        .collect())
}

fn sweep(a: SweepArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let loaded = load(&a.prices)?;
    let train = a.window.apply(&loaded.returns)?;
    let stats = asset_stats(&train)?;
    let grid = LambdaGrid {
        min: a.grid_min,
        max: a.grid_max,
        n: a.grid_n,
        spacing: match a.grid_spacing {
            Spacing::Log => GridSpacing::Log,
            Spacing::Linear => GridSpacing::Linear,
        },
    };
    let result = lambda_sweep(&stats, &grid.values()?, &a.flags.config(&[ModelKind::Simultaneous])?)?;

    prepare(&a.output.out)?;
    let mut m = base_manifest("sweep-lambda", args, threads, &a.output);
    m.flag("prices", a.prices.display());
    a.flags.record(&mut m);
    a.window.record(&mut m);
    m.flag("grid_min", a.grid_min);
    m.flag("grid_max", a.grid_max);
    m.flag("grid_n", a.grid_n);
    m.flag("grid_spacing", format!("{:?}", a.grid_spacing).to_lowercase());
    m.inputs.push(loaded.digest);
    emit(&report::frontier_table(&result), &a.output, "frontier", true, &mut m)?;
    emit(&report::lambda_star_table(&result), &a.output, "lambda_star", true, &mut m)?;
    m.write(&a.output.out)?;
    let solved = result.points.iter().filter(|p| p.status == SolveStatus::Optimal).count();
    Ok(vec![format!(
        "lambda_star={:e} solved={}/{}",
        result.lambda_star(),
        solved,
        result.points.len()
    )])
}

fn sensitivity(a: SensitivityArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let models = parse_models(&a.models)?;
    let loaded = load(&a.prices)?;
    let train = a.window.apply(&loaded.returns)?;
    let pcfg = PerturbationConfig::new(a.c, a.seed)?;
    let cfg = a.flags.config(&models)?;
    let jobs: Vec<_> = models.iter().map(|&k| (k, cfg)).collect();
    let result = sensitivity_run(&train, &jobs, &pcfg)?;

    prepare(&a.output.out)?;
    let mut m = base_manifest("sensitivity", args, threads, &a.output);
    m.flag("prices", a.prices.display());
    m.flag("models", models.iter().map(|k| k.slug()).collect::<Vec<_>>().join(","));
    a.flags.record(&mut m);
    a.window.record(&mut m);
    m.flag("c", a.c);
    m.seed = Some(a.seed);
    m.inputs.push(loaded.digest);
    emit(&report::table3(&result), &a.output, "table3", true, &mut m)?;
    emit(&report::covariance_table(&result), &a.output, "covariance_change", true, &mut m)?;
    m.write(&a.output.out)?;
    let mut lines = vec![format!(
        "covariance_change_pct={:.4}",
        100.0 * result.covariance.relative_change
    )];
    for row in &result.rows {
        lines.push(match (&row.change_pct, &row.failure) {
            (Some(c), _) => format!("model={} change_pct={c:.4}", row.model.slug()),
            (None, f) => format!(
                "model={} failed={:?}",
                row.model.slug(),
                f.as_deref().unwrap_or("unknown")
            ),
        });
    }
    Ok(lines)
}

const REPORT_SECTIONS: [(&str, &str); 7] = [
    ("Solve report", "report.csv"),
    ("In-sample performance", "table1.csv"),
    ("Out-of-sample performance", "table2.csv"),
    ("Allocation change after perturbation", "table3.csv"),
    ("Covariance change", "covariance_change.csv"),
    ("Chosen lambda", "lambda_star.csv"),
    ("Lambda frontier", "frontier.csv"),
];

fn render_report(a: ReportArgs, args: &[String], threads: Option<usize>) -> Result<Vec<String>, CliError> {
    let mut sections = Vec::new();
    let mut inputs = Vec::new();
    for (title, file) in REPORT_SECTIONS {
        let path = a.dir.join(file);
        if path.is_file() {
            sections.push((title, Table::read_csv(&path)?));
            inputs.push(digest_file(&path)?);
        }
    }
    if sections.is_empty() {
        return Err(CliError::Usage(format!(
            "no result tables found in {}",
            a.dir.display()
        )));
    }
    let (name, text) = match a.format {
        Format::Markdown => {
            let mut doc = String::from("# mdport report\n");
            for (title, t) in &sections {
                doc.push_str(&format!("\n## {title}\n\n{}", t.to_markdown()));
            }
            ("report.md", doc)
        }
        Format::Csv => {
            let mut doc = String::new();
            for (k, (title, t)) in sections.iter().enumerate() {
                if k > 0 {
                    doc.push('\n');
                }
                doc.push_str(&format!("# {title}\n{}", t.to_csv()));
            }
            ("report.txt", doc)
        }
    };
    let output = Output {
        out: a.out.clone(),
        format: a.format,
    };
    prepare(&a.out)?;
    let mut m = base_manifest("report", args, threads, &output);
    m.flag("dir", a.dir.display());
    m.inputs = inputs;
    write_text(&a.out.join(name), &text)?;
    m.add_output(&a.out, name, true)?;
    m.write(&a.out)?;
    Ok(text.lines().map(str::to_owned).collect())
}
