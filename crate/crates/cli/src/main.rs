use clap::{Parser, ValueEnum};
use npbayes_cli::{parse_config, run, CliError, Command, ErrorKind, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    DpSample,
    MeanMoments,
    MeanChain,
    TransformCheck,
    QuantileEstimate,
    DensityEstimate,
    PyramidFit,
    FrailtySim,
    LocalregFit,
    Envelope,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::DpSample => Command::DpSample,
            CommandArg::MeanMoments => Command::MeanMoments,
            CommandArg::MeanChain => Command::MeanChain,
            CommandArg::TransformCheck => Command::TransformCheck,
            CommandArg::QuantileEstimate => Command::QuantileEstimate,
            CommandArg::DensityEstimate => Command::DensityEstimate,
            CommandArg::PyramidFit => Command::PyramidFit,
            CommandArg::FrailtySim => Command::FrailtySim,
            CommandArg::LocalregFit => Command::LocalregFit,
            CommandArg::Envelope => Command::Envelope,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Nonparametric Bayesian samplers and estimators.
#[derive(Debug, Parser)]
#[command(name = "npbayes", version)]
struct Args {
    command: CommandArg,
    /// JSON configuration document.
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides the document's `output`. Standard output when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the document's `format`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn execute(args: Args) -> Result<(), CliError> {
    let command = Command::from(args.command);
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::new(ErrorKind::Io, format!("cannot read {}: {e}", args.config.display())).with_command(command)
    })?;
    let mut config = parse_config(&text, Some(command))?;
    if let Some(f) = args.format {
        config.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    let out = args.out.or_else(|| config.output.clone());
    let report = run(&config)?;
    let rendered = report.render(config.format);
    match out {
        Some(path) => {
            std::fs::write(&path, rendered).map_err(|e| {
                CliError::new(ErrorKind::Io, format!("cannot write {}: {e}", path.display())).with_command(command)
            })?;
            print!("{}", report.summary_lines());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
