use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bellstab::experiment::{
    load_config, run_experiment, sweep, ExperimentConfig, ExperimentName, OutputFormat, ResultRow,
    ResultTable, CSV_HEADER,
};
use bellstab::par::Execution;
use bellstab::schedule::Mode;
use bellstab::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Simulate repeated ZZ/XX parity stabilization of a two-qubit Bell state.
#[derive(Parser, Debug)]
#[command(name = "simulate", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file; an empty file gives the default device.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "csv|json")]
    format: Option<String>,
    /// Print the compiled pulse schedule and exit.
    #[arg(long)]
    dump_schedule: bool,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// fig3a, fig3bc, fig3d, fig3e, fig4_zz, fig4_alt, fig9_zz, fig9_alt or custom.
    #[arg(long, value_name = "NAME")]
    experiment: Option<String>,
    #[arg(long, value_name = "N")]
    rounds: Option<usize>,
    #[arg(long, value_name = "feedback|pfu")]
    mode: Option<String>,
    /// Tomography shots per setting; 0 for exact expectation values.
    #[arg(long, value_name = "K")]
    shots: Option<u64>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run several configurations concurrently, writing one output file per config.
    Sweep {
        #[arg(required = true, value_name = "CONFIG")]
        configs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long, value_name = "csv|json", default_value = "csv")]
        format: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Run the configurations one after another.
        #[arg(long)]
        sequential: bool,
    },
}

fn apply_overrides(config: &mut ExperimentConfig, o: &Overrides) -> Result<(), Error> {
    if let Some(name) = &o.experiment {
        config.experiment.name = name.parse::<ExperimentName>()?;
    }
    if let Some(n) = o.rounds {
        config.experiment.rounds = Some(n);
    }
    if let Some(mode) = &o.mode {
        config.experiment.mode = Some(mode.parse::<Mode>()?);
    }
    if let Some(shots) = o.shots {
        config.experiment.shots = shots;
    }
    if let Some(seed) = o.seed {
        config.experiment.seed = seed;
    }
    config.validate()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    #[serde(rename = "N")]
    n: usize,
    basis: &'a str,
    mode: &'a str,
    fidelity: f64,
    exp_zz: f64,
    exp_xx: f64,
    exp_yy: f64,
    p_plus: f64,
    ancilla_excited: f64,
}

impl<'a> From<&'a ResultRow> for CsvRow<'a> {
    fn from(r: &'a ResultRow) -> Self {
        CsvRow {
            n: r.n,
            basis: &r.basis,
            mode: &r.mode,
            fidelity: r.fidelity,
            exp_zz: r.exp_zz,
            exp_xx: r.exp_xx,
            exp_yy: r.exp_yy,
            p_plus: r.p_plus,
            ancilla_excited: r.ancilla_excited,
        }
    }
}

fn render_csv(table: &ResultTable) -> Result<Vec<u8>, Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Io(io::Error::other(e.to_string()));
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for row in &table.rows {
        w.serialize(CsvRow::from(row)).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(io::Error::other(e.to_string())))
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a ExperimentConfig,
    experiment: ExperimentName,
    rows: &'a [ResultRow],
}

fn render_json(config: &ExperimentConfig, table: &ResultTable) -> Result<Vec<u8>, Error> {
    let report = JsonReport {
        config,
        experiment: table.experiment,
        rows: &table.rows,
    };
    let mut out = serde_json::to_vec_pretty(&report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn render(config: &ExperimentConfig, table: &ResultTable, format: OutputFormat) -> Result<Vec<u8>, Error> {
    match format {
        OutputFormat::Csv => render_csv(table),
        OutputFormat::Json => render_json(config, table),
    }
}

fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run_single(args: RunArgs) -> Result<(), Error> {
    let mut config = load(args.config.as_deref())?;
    apply_overrides(&mut config, &args.overrides)?;
    if let Some(f) = &args.format {
        config.output.format = f.parse()?;
    }
    if let Some(p) = args.out {
        config.output.path = Some(p);
    }
    if args.dump_schedule {
        return emit(config.compiled()?.dump().as_bytes(), None);
    }
    let table = run_experiment(&config)?;
    let bytes = render(&config, &table, config.output.format)?;
    emit(&bytes, config.output.path.as_deref())
}

fn run_sweep(
    paths: Vec<PathBuf>,
    out_dir: PathBuf,
    format: &str,
    overrides: &Overrides,
    sequential: bool,
) -> Result<(), Error> {
    let format: OutputFormat = format.parse()?;
    let configs = paths
        .iter()
        .map(|p| {
            let mut c = load_config(p)?;
            apply_overrides(&mut c, overrides)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    fs::create_dir_all(&out_dir)?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let tables = sweep(configs.clone(), exec);
    for ((path, config), table) in paths.iter().zip(&configs).zip(tables) {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let table = table.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        fs::write(out_dir.join(format!("{stem}.{ext}")), render(config, &table, format)?)?;
    }
    Ok(())
}

fn report(kind: &str, message: &str) -> ExitCode {
    let line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{kind}]: {line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return report("usage", first);
        }
    };
    let result = match cli.command {
        Some(Command::Sweep {
            configs,
            out_dir,
            format,
            overrides,
            sequential,
        }) => run_sweep(configs, out_dir, &format, &overrides, sequential),
        None => run_single(cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}
