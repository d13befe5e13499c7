//! The `eqlcon` command line: `gen`, `train`, `eval` and `plotdata`.
//!
//! Exit codes: 0 on success, 2 for usage and input errors, 3 for numerical
//! failures (training divergence, degenerate results).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::datagen::{self, GenError, Preset, RegionSpec};
use crate::datamodel::{
    self, load_constraint, load_dataset, save_constraint, save_dataset, write_file, DataError,
    Dataset, Direction, LinearConstraint, LossConfig, PercentileSide, TrainConfig,
};
use crate::extract::{self, ExtractError};
use crate::network::Primitive;
use crate::trainer::{self, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(_) => 2,
            CliError::Gen(GenError::RejectionBudgetExceeded { .. }) => 3,
            CliError::Gen(_) => 2,
            CliError::Extract(ExtractError::DegenerateConstraint | ExtractError::NonFinite) => 3,
            CliError::Extract(_) => 2,
            CliError::Train(TrainError::Config(_) | TrainError::Shape { .. }) => 2,
            CliError::Train(TrainError::Network(_)) => 2,
            CliError::Train(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eqlcon",
    version,
    about = "Learn linear inequality constraints from feasible points"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset from a preset or a region description.
    Gen(GenArgs),
    /// Train one or more networks and extract their constraints.
    Train(TrainArgs),
    /// Score a constraint against a dataset.
    Eval(EvalArgs),
    /// Write CSV files for plotting a constraint over its data.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    SquareHigh,
    Circle,
    SquareLow,
    Cube,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::SquareHigh => Preset::SquareHigh,
            PresetArg::Circle => Preset::Circle,
            PresetArg::SquareLow => Preset::SquareLow,
            PresetArg::Cube => Preset::Cube,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<PresetArg>,
    /// Region description (JSON).
    #[arg(long, requires = "n")]
    pub spec: Option<PathBuf>,
    /// Number of points for `--spec`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Lower,
    Upper,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Lower => Direction::LowerBound,
            DirectionArg::Upper => Direction::UpperBound,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Experiment configuration (JSON). Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub alpha3: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub l1: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    #[arg(long, conflicts_with = "no_mask")]
    pub mask_threshold: Option<f64>,
    /// Disable weight masking.
    #[arg(long)]
    pub no_mask: bool,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub constraint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub constraint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Experiment file layout: every field optional, named as in
/// [`LossConfig`] and [`TrainConfig`]. `"mask_threshold": null` disables
/// masking; omitting it keeps the default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha3: Option<f64>,
    pub gamma: Option<f64>,
    pub direction: Option<Direction>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub percentile_side: Option<PercentileSide>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    #[serde(default, deserialize_with = "present")]
    pub mask_threshold: Option<Option<f64>>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub primitives: Option<Vec<Primitive>>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

/// The configuration actually used for a training command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub loss: LossConfig,
    pub train: TrainConfig,
}

impl Experiment {
    /// Defaults, then the config file, then command-line flags.
    pub fn resolve(file: Option<ConfigFile>, args: &TrainArgs) -> Result<Self, CliError> {
        let mut loss = LossConfig::default();
        let mut train = TrainConfig::default();
        if let Some(f) = file {
            set(&mut loss.alpha1, f.alpha1);
            set(&mut loss.alpha2, f.alpha2);
            set(&mut loss.alpha3, f.alpha3);
            set(&mut loss.gamma, f.gamma);
            set(&mut loss.direction, f.direction);
            set(&mut loss.l1, f.l1);
            set(&mut loss.l2, f.l2);
            set(&mut loss.percentile_side, f.percentile_side);
            set(&mut train.epochs, f.epochs);
            set(&mut train.learning_rate, f.learning_rate);
            set(&mut train.mask_threshold, f.mask_threshold);
            set(&mut train.seed, f.seed);
            set(&mut train.runs, f.runs);
            set(&mut train.primitives, f.primitives);
        }
        set(&mut loss.alpha1, args.alpha1);
        set(&mut loss.alpha2, args.alpha2);
        set(&mut loss.alpha3, args.alpha3);
        set(&mut loss.gamma, args.gamma);
        set(&mut loss.direction, args.direction.map(Direction::from));
        set(&mut loss.l1, args.l1);
        set(&mut loss.l2, args.l2);
        set(&mut train.epochs, args.epochs);
        set(&mut train.learning_rate, args.learning_rate);
        set(&mut train.seed, args.seed);
        set(&mut train.runs, args.runs);
        if args.no_mask {
            train.mask_threshold = None;
        } else if let Some(t) = args.mask_threshold {
            train.mask_threshold = Some(t);
        }
        loss.validate()?;
        train.validate()?;
        Ok(Experiment { loss, train })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Plotdata(a) => cmd_plotdata(&a, out),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Data(DataError::Io {
        path: path.to_owned(),
        source,
    })
}

fn stdout_err(source: std::io::Error) -> CliError {
    io_err(Path::new("<stdout>"), source)
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = match (&args.preset, &args.spec) {
        (Some(p), _) => datagen::paper_dataset((*p).into(), args.seed),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let spec = RegionSpec::from_json(&text).map_err(|source| DataError::Json {
                path: path.clone(),
                source,
            })?;
            let n = args
                .n
                .ok_or_else(|| CliError::Usage("--spec requires --n".into()))?;
            datagen::generate(&spec, n, args.seed)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --preset or --spec is required".into(),
            ))
        }
    };
    save_dataset(&data, &args.out)?;
    writeln!(
        out,
        "wrote {} points with {} features to {}",
        data.len(),
        data.n_features(),
        args.out.display()
    )
    .map_err(stdout_err)?;
    Ok(())
}

/// One row of the training summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub result: usize,
    pub run: usize,
    pub seed: u64,
    pub expression: Option<String>,
    pub constraint: Option<LinearConstraint>,
    pub violation_rate: Option<f64>,
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Some(
                serde_json::from_str(&text).map_err(|source| DataError::Json {
                    path: path.clone(),
                    source,
                })?,
            )
        }
        None => None,
    };
    let exp = Experiment::resolve(file, args)?;
    let data = load_dataset(&args.data)?;
    let runs = trainer::train_multi(&data, &exp.loss, &exp.train)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let dir = &args.out_dir;
    write_file(
        &dir.join("config.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&exp).expect("config serializes")
        ),
    )?;

    let mut rows = Vec::with_capacity(runs.len());
    for (rank, (net, report)) in runs.iter().enumerate() {
        let run = report.seed.wrapping_sub(exp.train.seed) as usize;
        let stem = format!("run_{run:02}");
        if let Some(c) = &report.constraint {
            save_constraint(
                c,
                dir.join(format!("{stem}.txt")),
                Some(data.feature_names()),
            )?;
        }
        write_file(
            &dir.join(format!("{stem}_network.json")),
            &format!("{}\n", net.to_json()),
        )?;
        write_file(
            &dir.join(format!("{stem}_history.csv")),
            &report.history_csv(),
        )?;
        rows.push(SummaryRow {
            result: rank + 1,
            run,
            seed: report.seed,
            expression: report
                .constraint
                .as_ref()
                .map(|c| c.display_with(data.feature_names()).to_string()),
            constraint: report.constraint.clone(),
            violation_rate: report.violation_rate,
        });
    }

    let table = summary_table(&rows);
    write_file(&dir.join("summary.txt"), &table)?;
    write_file(
        &dir.join("summary.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&rows).expect("summary serializes")
        ),
    )?;
    out.write_all(table.as_bytes()).map_err(stdout_err)?;
    Ok(())
}

/// Fixed-width table: result number, run, seed, expression, error (%).
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let exprs: Vec<String> = rows
        .iter()
        .map(|r| {
            r.expression
                .clone()
                .unwrap_or_else(|| "(degenerate)".into())
        })
        .collect();
    let width = exprs
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("expression".len());
    let mut s = format!(
        "{:>6}  {:>4}  {:>6}  {:<width$}  {:>9}\n",
        "result", "run", "seed", "expression", "error_%"
    );
    for (r, e) in rows.iter().zip(&exprs) {
        let rate = r
            .violation_rate
            .map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"));
        s.push_str(&format!(
            "{:>6}  {:>4}  {:>6}  {:<width$}  {:>9}\n",
            r.result, r.run, r.seed, e, rate
        ));
    }
    s
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = load_constraint(&args.constraint)?;
    let data = load_dataset(&args.data)?;
    let report = extract::violation_rate(&c, &data)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes"),
        Format::Text => format!(
            "{}: {} of {} points violate ({}%)",
            c.display_with(data.feature_names()),
            report.violations,
            report.n,
            datamodel::format_number(report.rate_percent)
        ),
    };
    writeln!(out, "{text}").map_err(stdout_err)
}

/// Number of boundary samples for two features.
pub const BOUNDARY_SAMPLES: usize = 200;
/// Grid side for the three-feature boundary mesh.
pub const MESH_SIDE: usize = 20;

pub fn cmd_plotdata(args: &PlotArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = load_dataset(&args.data)?;
    let c = load_constraint(&args.constraint)?;
    if c.n_features() != data.n_features() {
        return Err(ExtractError::Shape {
            constraint: c.n_features(),
            data: data.n_features(),
        }
        .into());
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let points_path = args.out_dir.join("points.csv");
    save_dataset(&data, &points_path)?;
    writeln!(out, "wrote {}", points_path.display()).map_err(stdout_err)?;
    match boundary_samples(&c, &data) {
        Some(rows) => {
            let path = args.out_dir.join("boundary.csv");
            let mut s = data.feature_names().join(",");
            s.push('\n');
            for r in rows {
                let line: Vec<String> = r.iter().map(f64::to_string).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            write_file(&path, &s)?;
            writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
        }
        None => writeln!(
            out,
            "note: boundary of a {}-feature constraint is not plottable; wrote points only",
            data.n_features()
        )
        .map_err(stdout_err)?,
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Points on the hyperplane `coeffs·x = bound`, spanning the data range of
/// the non-normalized features. A line of [`BOUNDARY_SAMPLES`] points for
/// two features, a [`MESH_SIDE`]² grid for three, `None` otherwise.
pub fn boundary_samples(c: &LinearConstraint, data: &Dataset) -> Option<Vec<Vec<f64>>> {
    let f = c.n_features();
    if !(2..=3).contains(&f) || data.is_empty() {
        return None;
    }
    let pivot = c.coeffs().iter().rposition(|&a| a == 1.0)?;
    let free: Vec<usize> = (0..f).filter(|&j| j != pivot).collect();
    let ranges: Vec<(f64, f64)> = free
        .iter()
        .map(|&j| data.column_range(j).expect("non-empty"))
        .collect();
    let solve = |mut x: Vec<f64>| {
        let rest: f64 = free.iter().map(|&j| c.coeffs()[j] * x[j]).sum();
        x[pivot] = c.bound() - rest;
        x
    };
    let mut rows = Vec::new();
    if f == 2 {
        for v in linspace(ranges[0].0, ranges[0].1, BOUNDARY_SAMPLES) {
            let mut x = vec![0.0; 2];
            x[free[0]] = v;
            rows.push(solve(x));
        }
    } else {
        for u in linspace(ranges[0].0, ranges[0].1, MESH_SIDE) {
            for v in linspace(ranges[1].0, ranges[1].1, MESH_SIDE) {
                let mut x = vec![0.0; 3];
                x[free[0]] = u;
                x[free[1]] = v;
                rows.push(solve(x));
            }
        }
    }
    Some(rows)
}
