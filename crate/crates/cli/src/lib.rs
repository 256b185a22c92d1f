//! Headless driver for slice exploration. Every JSON document it writes uses
//! the same types, and so the same schema, as the HTTP service.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 model or protocol error.

mod config;
mod table;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slicevis_core::frame::{ingest_csv, medoid, parse_schema_override, DatasetSummary, SchemaOverride};
use slicevis_core::model::{connect_external, ExternalOptions, InputField};
use slicevis_core::session::{Mutation, Session, SessionSpec};
use slicevis_core::simulate::{simulate, SimKind};
use slicevis_core::tour::{build_tour, CancelToken, Tour, TourInputs, TourKind, TourRequest, TourSpace, KMED_CAP};
use slicevis_core::{
    fit_builtin, BuiltinSpec, ColumnKind, DataFrame, DistanceKind, Error, ErrorClass, ModelHandle, PredictionKind,
    Roles, SimilarityConfig, Value,
};

pub use table::OccupancyTable;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Model => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{} error: {e}", e.class()),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "slicevis", version, about = "Explore fitted models through conditional sections")]
pub struct Cli {
    /// TOML file with per-subcommand defaults, e.g. `[tour] sigma = 0.5`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a CSV file and print its dataset summary.
    Ingest(DataArgs),
    /// Fit a builtin model and print its description.
    Fit(FitArgs),
    /// Compute tours and their occupancy diagnostics.
    Tour(TourArgs),
    /// Compute the section payload at a point.
    Section(SectionArgs),
    /// Generate a synthetic dataset as CSV.
    Simulate(SimulateArgs),
    /// Run the session server.
    Serve(ServeArgs),
    /// Serve one builtin model over the external prediction protocol.
    ServeModel(ServeModelArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// `column=kind` lines overriding inferred column kinds.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RoleArgs {
    #[arg(long)]
    pub response: Option<String>,
    /// Section variables (one or two).
    #[arg(long, value_delimiter = ',')]
    pub section: Vec<String>,
    /// Predictors frozen at their initial value and left out of distances.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Builtin model spec: `linear`, `knn:K`, `tree[:DEPTH[:MINLEAF]]`, `kde[:BW]`, `kmeans:K[:SEED]`.
    #[arg(long)]
    pub builtin: Vec<String>,
    /// Endpoint of an external model server.
    #[arg(long)]
    pub external: Vec<String>,
    /// Prediction kind of the external models.
    #[arg(long, default_value = "numeric")]
    pub external_kind: PredictionKind,
    /// Levels of class or probability outputs of external models.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Model inputs; every column but the response by default.
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimilarityArgs {
    /// Similarity threshold; `max` shows every observation.
    #[arg(long, default_value = "1", value_parser = parse_sigma)]
    pub sigma: f64,
    #[arg(long, default_value = "maxnorm")]
    pub distance: DistanceKind,
    #[arg(long, default_value_t = 10)]
    pub fade_bins: u32,
}

impl SimilarityArgs {
    fn config(&self) -> SimilarityConfig {
        SimilarityConfig { distance: self.distance, sigma: self.sigma, fade_bins: self.fade_bins }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub builtin: String,
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<String>,
    /// Model id in the output.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct TourArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub similarity: SimilarityArgs,
    /// Tour kinds; several give one table column each.
    #[arg(long, value_delimiter = ',', default_value = "random")]
    pub kind: Vec<TourKind>,
    #[arg(long, default_value_t = 30)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds, starting at `--seed`, to average over.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Variable for `alongVar` tours.
    #[arg(long)]
    pub var: Option<String>,
    /// Steps per segment of an interpolated path.
    #[arg(long)]
    pub interpolate: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Row label of the occupancy table; the data file name by default.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SectionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub roles: RoleArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub similarity: SimilarityArgs,
    /// Conditioning values `name=value`; the rest stay at the medoid.
    #[arg(long, value_delimiter = ',')]
    pub point: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub resolution: Vec<usize>,
    #[arg(long)]
    pub color_var: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the condition selector payload instead.
    #[arg(long)]
    pub conditions: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "normal")]
    pub kind: SimKind,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 15)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Clone, Args)]
pub struct ServeModelArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub builtin: String,
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8081")]
    pub addr: SocketAddr,
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    match s {
        "max" | "inf" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")),
    }
}

/// Parses `args` (program name first), applies the config file and runs the
/// command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(args) {
        Ok(c) => c,
        Err(Parsed::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(Parsed::Cli(e)) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

enum Parsed {
    Clap(clap::Error),
    Cli(CliError),
}

fn parse(args: Vec<OsString>) -> Result<Cli, Parsed> {
    let mut cmd = Cli::command();
    let matches = cmd.try_get_matches_from_mut(args.clone()).map_err(Parsed::Clap)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Cli::from_arg_matches(&matches).map_err(Parsed::Clap);
    };
    let table = config::load(path).map_err(Parsed::Cli)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let sub_cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let extra = config::overrides(&table, sub_cmd, sub).map_err(Parsed::Cli)?;
    let mut full = args;
    full.extend(extra);
    Cli::try_parse_from(full).map_err(Parsed::Clap)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Ingest(a) => {
            let (df, dropped) = load_data(a)?;
            emit_json(out, &DatasetSummary::of(&df, dropped))
        }
        Command::Fit(a) => {
            let (df, _) = load_data(&a.data)?;
            let spec: BuiltinSpec = a.builtin.parse()?;
            let inputs = default_inputs(&df, &a.inputs, a.response.as_deref());
            let model = fit_builtin(&spec, &df, a.response.as_deref(), &inputs)?;
            let model = match &a.id {
                Some(id) => model.with_id(id.clone()),
                None => model,
            };
            emit_json(out, &model.info())
        }
        Command::Tour(a) => tour(a, out),
        Command::Section(a) => section(a, out),
        Command::Simulate(a) => {
            let df = simulate(a.kind, a.n, a.p, a.seed)?;
            emit_text(out, &df.to_csv()?)
        }
        Command::Serve(a) => block_on(slicevis_server::serve(a.addr, |addr| eprintln!("listening on http://{addr}"))),
        Command::ServeModel(a) => {
            let (df, _) = load_data(&a.data)?;
            let spec: BuiltinSpec = a.builtin.parse()?;
            let inputs = default_inputs(&df, &a.inputs, a.response.as_deref());
            let model = fit_builtin(&spec, &df, a.response.as_deref(), &inputs)?;
            let app = slicevis_server::model_server::router(model);
            block_on(slicevis_server::serve_router(app, a.addr, |addr| eprintln!("serving model at http://{addr}/predict")))
        }
    }
}

fn block_on(fut: impl std::future::Future<Output = std::io::Result<()>>) -> CliResult<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(fut).map_err(|e| CliError::Io(e.to_string()))
}

/// Reads the CSV behind `a`; returns the frame and the rows dropped.
pub fn load_data(a: &DataArgs) -> CliResult<(DataFrame, usize)> {
    let bytes = std::fs::read(&a.data).map_err(|e| CliError::Io(format!("{}: {e}", a.data.display())))?;
    let schema = match &a.schema {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            parse_schema_override(&text)?
        }
        None => SchemaOverride::new(),
    };
    let (df, report) = ingest_csv(&bytes, &schema)?;
    Ok((df, report.rows_dropped))
}

fn default_inputs(df: &DataFrame, inputs: &[String], response: Option<&str>) -> Vec<String> {
    if inputs.is_empty() {
        df.names().filter(|n| Some(*n) != response).map(str::to_string).collect()
    } else {
        inputs.to_vec()
    }
}

fn load_models(df: &DataFrame, a: &ModelArgs, response: Option<&str>) -> CliResult<Vec<ModelHandle>> {
    let inputs = default_inputs(df, &a.inputs, response);
    let mut models = Vec::new();
    for (i, b) in a.builtin.iter().enumerate() {
        let spec: BuiltinSpec = b.parse()?;
        models.push(fit_builtin(&spec, df, response, &inputs)?.with_id(format!("m{}", i + 1)));
    }
    let opts = ExternalOptions { timeout: Duration::from_millis(a.timeout_ms), ..ExternalOptions::default() };
    for url in &a.external {
        let schema = InputField::schema_of(df, &inputs)?;
        let m = connect_external(format!("m{}", models.len() + 1), url, a.external_kind, schema, opts)?;
        models.push(if a.levels.is_empty() { m } else { m.with_levels(a.levels.clone()) });
    }
    Ok(models)
}

/// Row the session would start from: the medoid of `vars`, or row 0 when
/// every variable is constant.
fn anchor_row(df: &DataFrame, vars: &[String], seed: u64) -> CliResult<usize> {
    match medoid(df, vars, KMED_CAP, seed) {
        Ok(r) => Ok(r),
        Err(Error::AllConstant) => Ok(0),
        Err(e) => Err(e.into()),
    }
}

fn tour(a: &TourArgs, out: Option<&Path>) -> CliResult<()> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let (df, _) = load_data(&a.data)?;
    let response = a.roles.response.as_deref();
    let models = load_models(&df, &a.models, response)?;
    let roles = Roles::infer(&df, response, &a.roles.section, &a.roles.hidden);
    let predictors: Vec<String> = roles.predictors();
    let anchor = anchor_row(&df, &predictors, a.seed)?;
    let frozen = df.row_values(anchor, &roles.hidden)?;
    let ts = TourSpace::new(&df, &roles.conditioning, frozen)?;
    let start = ts.point_of_row(anchor);
    let cfg = a.similarity.config();
    cfg.validate()?;
    let inputs = TourInputs { response, models: &models, start: Some(&start), similarity: &cfg };
    let cancel = CancelToken::new();

    let label = a.label.clone().unwrap_or_else(|| {
        a.data.data.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut table = OccupancyTable::new(a.kind.iter().map(ToString::to_string).collect());
    let mut tours: Vec<Tour> = Vec::new();
    let mut cells = Vec::with_capacity(a.kind.len());
    for &kind in &a.kind {
        let req = TourRequest { kind, length: a.length, seed: None, var: a.var.clone(), interpolate: a.interpolate };
        let (mut visible, mut total) = (0.0, 0.0);
        for seed in a.seed..a.seed + a.seeds {
            let mut t = build_tour(&ts, &req, seed, &inputs, &cancel, None)?;
            t.seed = Some(seed);
            if let Some(d) = &t.diagnostics {
                visible += d.mean_visible;
                total += d.mean_total_similarity;
            }
            tours.push(t);
        }
        let k = a.seeds as f64;
        cells.push((visible / k, total / k));
    }
    table.push_row(label, cells);
    match a.format {
        Format::Table => emit_text(out, &table.to_string()),
        Format::Json if tours.len() == 1 => emit_json(out, &tours[0]),
        Format::Json => emit_json(out, &tours),
    }
}

fn parse_point(df: &DataFrame, items: &[String]) -> CliResult<BTreeMap<String, Value>> {
    let mut values = BTreeMap::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected name=value in --point, got `{item}`")))?;
        let value = match df.column(k)?.kind() {
            ColumnKind::Numeric => Value::Num(v.parse().map_err(|_| Error::InvalidValue {
                var: k.to_string(),
                reason: format!("`{v}` is not a number"),
            })?),
            ColumnKind::Categorical => Value::Level(v.to_string()),
        };
        values.insert(k.to_string(), value);
    }
    Ok(values)
}

fn section(a: &SectionArgs, out: Option<&Path>) -> CliResult<()> {
    let (df, _) = load_data(&a.data)?;
    let response = a.roles.response.as_deref();
    let models = load_models(&df, &a.models, response)?;
    let roles = Roles::infer(&df, response, &a.roles.section, &a.roles.hidden);
    let values = parse_point(&df, &a.point)?;
    let mut spec = SessionSpec::new(roles);
    spec.similarity = a.similarity.config();
    spec.seed = a.seed;
    spec.color_var = a.color_var.clone();
    spec.resolution = (!a.resolution.is_empty()).then(|| a.resolution.clone());
    let dataset_id = a.data.data.display().to_string();
    let mut session = Session::new("cli", dataset_id, Arc::new(df), models, spec)?;
    if !values.is_empty() {
        session.apply(Mutation::SetPoint { values })?;
    }
    if a.conditions {
        emit_json(out, &session.conditions()?)
    } else {
        emit_json(out, session.section())
    }
}

fn emit_json<T: Serialize + ?Sized>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    emit_text(out, &text)
}

fn emit_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
