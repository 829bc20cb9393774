//! `cmdb`: ingest, screen and extract a PDF corpus, then query, evaluate,
//! export or serve the resulting model store.
//!
//! Exit codes: 0 success, 1 some documents failed, 2 fatal or usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cmdb_core::agent::{
    provider_from_spec, CallMeta, ClientConfig, Provider, ProviderClient, ProviderError, ProviderRequest,
    ProviderResponse,
};
use cmdb_core::eval::{evaluate, load_ground_truth, roc_csv, DEFAULT_OPERATING_THRESHOLD};
use cmdb_core::pipeline::{ConfigLayer, Pipeline, PipelineConfig, PipelineReport, StopAfter};
use cmdb_core::schema::MaterialClass;
use cmdb_core::store::{read_jsonl, QueryFilter, StoredRecord, Store, DEFAULT_PAGE_SIZE};
use cmdb_core::{MechanismClass, ReviewStatus};
use serde::Serialize;

const DB_FILE: &str = "models.db";

#[derive(Parser)]
#[command(name = "cmdb", version, about = "Mine constitutive models from PDF papers")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML config file; flags override the environment, which overrides the file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Model store (SQLite). Defaults to `CM_DB_PATH`, then `db` in the config, then `<workdir>/models.db`.
    #[arg(long, global = true, value_name = "PATH")]
    db: Option<PathBuf>,
    /// `mock:<script.json>`, `http`, or an endpoint URL.
    #[arg(long, global = true)]
    provider: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Characters of each paper shown to the gatekeeper.
    #[arg(long, global = true)]
    limit_chars: Option<usize>,
    /// Analyst attempts per document, including the first.
    #[arg(long, global = true)]
    correction_budget: Option<u32>,
    #[arg(long, global = true)]
    doc_timeout_secs: Option<u64>,
    /// Log more (repeat for debug); `RUST_LOG` takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and segment every PDF in a directory.
    Ingest { dir: PathBuf },
    /// Ingest, then run the gatekeeper on each paper.
    Screen { dir: PathBuf },
    /// Ingest, screen, and extract records from relevant papers.
    Extract { dir: PathBuf },
    /// The whole pipeline; resumes work left by earlier runs.
    Run { dir: PathBuf },
    /// Score stored records against a ground-truth file.
    Eval(EvalArgs),
    /// Search the store.
    Query(QueryArgs),
    /// Mechanism class distribution of stored records.
    Stats,
    /// Write every record as JSON Lines.
    Export {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Load records from a JSON Lines export.
    Import { file: PathBuf },
    /// Start the HTTP service (`CM_LISTEN_ADDR`, `CM_API_TOKEN`).
    Serve {
        #[arg(long, value_name = "ADDR")]
        listen: Option<String>,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Ground truth, one JSON document per line.
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Confidence threshold for the reported ROC operating point.
    #[arg(long, default_value_t = DEFAULT_OPERATING_THRESHOLD)]
    threshold: f64,
    /// Also write the ROC curve as CSV.
    #[arg(long, value_name = "FILE")]
    roc_csv: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    material_class: Option<MaterialClass>,
    /// Case-insensitive substring of the material name.
    #[arg(long)]
    material: Option<String>,
    #[arg(long)]
    mechanism: Option<MechanismClass>,
    /// Parameter symbol for `--min`/`--max`, e.g. `E` or `\phi`.
    #[arg(long)]
    param: Option<String>,
    /// Lower bound in SI units.
    #[arg(long, allow_negative_numbers = true)]
    min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max: Option<f64>,
    #[arg(long)]
    review_status: Option<ReviewStatus>,
    /// Free text over material names, notes and symbol definitions.
    #[arg(short = 'q', long = "text")]
    text: Option<String>,
    #[arg(long, default_value_t = 1)]
    page: u32,
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
    page_size: u32,
}

/// Outcome of a command that ran to completion.
enum Done {
    Ok,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() && std::env::args().any(|a| a == "--json") {
                let rendered = e.render().to_string();
                let first = rendered.lines().next().unwrap_or_default().trim_start_matches("error: ");
                println!("{}", serde_json::json!({ "error": first }));
            }
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.global.verbose);
    let json = cli.global.json;
    match dispatch(cli) {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::Partial) => ExitCode::from(1),
        Err(e) => {
            if json {
                println!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

/// Settings resolved from flags, environment and config file.
struct Settings {
    pipeline: PipelineConfig,
    db: PathBuf,
}

fn settings(g: &GlobalOpts) -> Result<Settings> {
    let (file_layer, file_db) = match &g.config {
        Some(path) => read_config(path)?,
        None => (ConfigLayer::default(), None),
    };
    let env_layer = ConfigLayer::from_env()?;
    let flags = ConfigLayer {
        limit_chars: g.limit_chars,
        correction_budget: g.correction_budget,
        workers: g.workers,
        doc_timeout_secs: g.doc_timeout_secs,
        provider: g.provider.clone(),
        workdir: g.workdir.clone(),
    };
    let pipeline = PipelineConfig::merge(&file_layer, &env_layer, &flags)?;
    let db = g
        .db
        .clone()
        .or_else(|| std::env::var_os("CM_DB_PATH").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or(file_db)
        .unwrap_or_else(|| pipeline.workdir.join(DB_FILE));
    Ok(Settings { pipeline, db })
}

/// The config file holds the pipeline keys plus an optional `db` path.
fn read_config(path: &Path) -> Result<(ConfigLayer, Option<PathBuf>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    let db = match table.remove("db") {
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => bail!("config {}: `db` must be a string, found {}", path.display(), other.type_str()),
        None => None,
    };
    let layer = ConfigLayer::from_toml(&toml::to_string(&table)?)
        .with_context(|| format!("config {}", path.display()))?;
    Ok((layer, db))
}

fn open_store(path: &Path) -> Result<Arc<Store>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let store = Store::open(path).with_context(|| format!("cannot open store {}", path.display()))?;
    Ok(Arc::new(store))
}

/// Stands in when no provider is configured; any model call fails.
struct Unconfigured;

impl Provider for Unconfigured {
    fn complete(&self, _req: &ProviderRequest, _meta: &CallMeta) -> Result<ProviderResponse, ProviderError> {
        Err(ProviderError::Fatal(
            "no provider configured (use --provider, CM_PROVIDER or `provider` in the config)".into(),
        ))
    }
}

fn pipeline(s: &Settings, needs_provider: bool) -> Result<Pipeline> {
    let provider: Box<dyn Provider> = match &s.pipeline.provider {
        Some(spec) => provider_from_spec(spec)?,
        None if needs_provider => bail!("no provider configured (use --provider, CM_PROVIDER or `provider` in the config)"),
        None => Box::new(Unconfigured),
    };
    let client = Arc::new(ProviderClient::new(provider, ClientConfig::default()));
    Ok(Pipeline::new(s.pipeline.clone(), client, open_store(&s.db)?)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Done> {
    let g = &cli.global;
    let s = settings(g)?;
    match cli.command {
        Command::Ingest { dir } => drive(&s, g.json, &dir, StopAfter::Parse),
        Command::Screen { dir } => drive(&s, g.json, &dir, StopAfter::Screen),
        Command::Extract { dir } => drive(&s, g.json, &dir, StopAfter::Extract),
        Command::Run { dir } => drive(&s, g.json, &dir, StopAfter::Extract),
        Command::Eval(args) => eval(&s, g.json, &args),
        Command::Query(args) => query(&s, g.json, args),
        Command::Stats => {
            let hist = open_store(&s.db)?.mechanism_distribution()?;
            if g.json {
                print_json(&hist)?;
            } else {
                for b in &hist.buckets {
                    println!("{:<26} {:>6} {:>6.1}%", b.mechanism.as_str(), b.count, b.percentage);
                }
                println!("total {}", hist.total);
            }
            Ok(Done::Ok)
        }
        Command::Export { out } => {
            let n = open_store(&s.db)?.export_to_path(&out)?;
            report_count(g.json, "exported", n, &out)
        }
        Command::Import { file } => {
            let n = open_store(&s.db)?.import_from_path(&file)?;
            report_count(g.json, "imported", n, &file)
        }
        Command::Serve { listen } => serve(&s, listen),
    }
}

fn report_count(json: bool, verb: &str, n: usize, path: &Path) -> Result<Done> {
    if json {
        print_json(&serde_json::json!({ verb: n, "path": path }))?;
    } else {
        println!("{verb} {n} records ({})", path.display());
    }
    Ok(Done::Ok)
}

fn drive(s: &Settings, json: bool, dir: &Path, stop: StopAfter) -> Result<Done> {
    let p = pipeline(s, stop > StopAfter::Parse)?;
    let report: PipelineReport = p.drive(dir, stop)?;
    if json {
        print_json(&report)?;
    } else {
        print!("{}", report.summary());
    }
    Ok(if report.has_failures() { Done::Partial } else { Done::Ok })
}

fn eval(s: &Settings, json: bool, args: &EvalArgs) -> Result<Done> {
    let gts = load_ground_truth(&args.gt)?;
    let is_export = s.db.extension().is_some_and(|e| e == "jsonl");
    let records = if is_export {
        read_jsonl(&s.db)?
    } else {
        if !s.db.exists() {
            bail!("store {} does not exist", s.db.display());
        }
        open_store(&s.db)?.all_records()?
    };
    let report = evaluate(&records, &gts, args.threshold)?;
    if let Some(path) = &args.roc_csv {
        let curve = report
            .roc
            .as_ref()
            .ok_or_else(|| anyhow!("no ROC curve: every scored item has the same label"))?;
        std::fs::write(path, roc_csv(curve)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if json {
        print_json(&report)?;
    } else {
        let c = &report.confusion;
        println!("tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
        println!("{}", report.metrics.summary());
        if let Some(roc) = &report.roc {
            println!("auc {:.4}", roc.auc);
        }
    }
    Ok(Done::Ok)
}

fn query(s: &Settings, json: bool, a: QueryArgs) -> Result<Done> {
    let filter = QueryFilter {
        material_class: a.material_class,
        material_name_substring: a.material,
        mechanism: a.mechanism,
        parameter_symbol: a.param,
        param_min_si: a.min,
        param_max_si: a.max,
        review_status: a.review_status,
        text: a.text,
        page: a.page,
        page_size: a.page_size,
    };
    filter.validate()?;
    let page = open_store(&s.db)?.query_models(&filter)?;
    if json {
        print_json(&page.items)?;
    } else {
        for StoredRecord { record: r, version, .. } in &page.items {
            println!(
                "{}  {}  {}  {} ({})  {}  v{}  {}",
                r.record_id,
                r.doc_id,
                r.mechanism.as_str(),
                r.material.material_name,
                r.material.material_class.as_str(),
                r.review_status.as_str(),
                version,
                r.equation_latex
            );
        }
        let pages = page.total.div_ceil(u64::from(page.page_size.max(1)));
        println!("{} records, page {} of {}", page.total, page.page, pages.max(1));
    }
    Ok(Done::Ok)
}

fn serve(s: &Settings, listen: Option<String>) -> Result<Done> {
    let mut config = cmdb_server::ServerConfig::from_env().map_err(|e| anyhow!(e))?;
    if let Some(addr) = listen {
        config.listen_addr = addr.parse().with_context(|| format!("--listen `{addr}`"))?;
    }
    let p = Arc::new(pipeline(s, false)?);
    let state = cmdb_server::AppState::new(p, &config);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(cmdb_server::serve(state, config.listen_addr))
        .with_context(|| format!("serving on {}", config.listen_addr))?;
    Ok(Done::Ok)
}
