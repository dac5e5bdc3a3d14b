use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use staylength::densfit::FamilyKind;
use staylength_cli::{
    detect_input_kind, parse_phases, parse_stages, run_pipeline, run_simulate, CliError,
    PipelineConfig, RunReport, Stage,
};

#[derive(Parser)]
#[command(
    name = "staylength",
    version,
    about = "Weighted length-of-stay analytics for booking data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Booking CSV with columns nights,weight,created_date. `fit-sarima` also
    /// accepts the monthly series written by `descriptives`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Phase boundaries, e.g. pre_end=2020-03-15,restr_end=2021-06-30.
    #[arg(long)]
    phases: Option<String>,
    /// Upper truncation of stay length in nights.
    #[arg(long, default_value_t = 180)]
    cap: u32,
    /// Long-stay threshold in nights.
    #[arg(long, default_value_t = 28)]
    threshold: u32,
    /// Table format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Keep duplicate (nights, created_date) rows separate.
    #[arg(long)]
    no_collapse: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted phase descriptives and the monthly series.
    Descriptives(Common),
    /// Fit and rank candidate densities.
    FitDist {
        #[command(flatten)]
        common: Common,
        /// Comma-separated families among lognormal, gamma, pln, or all.
        #[arg(long)]
        family: Option<String>,
    },
    /// Negative binomial regression on phase and calendar month.
    FitNb(Common),
    /// Logistic regression for stays at or above the threshold.
    FitLogit(Common),
    /// Two-part model: long-stay prevalence and conditional NB intensity.
    FitHurdle(Common),
    /// Seasonal MA model on the monthly mean series.
    FitSarima {
        #[command(flatten)]
        common: Common,
        /// Fit without phase dummies.
        #[arg(long)]
        no_dummies: bool,
        /// Add a drift term.
        #[arg(long)]
        drift: bool,
    },
    /// Draw a synthetic booking file.
    Simulate {
        /// Generator settings as key = value lines.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several stages in one pass.
    Report {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stages; defaults to descriptives,fit-dist,fit-nb,fit-hurdle,fit-sarima.
        #[arg(long)]
        stages: Option<String>,
    },
}

fn config(common: Common, stages: Vec<Stage>) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::new(common.input, common.out);
    if let Some(p) = &common.phases {
        cfg.boundaries = parse_phases(p)?;
    }
    cfg.cap = common.cap;
    cfg.threshold = common.threshold;
    cfg.format = common.format.parse()?;
    cfg.collapse = !common.no_collapse;
    cfg.stages = stages;
    Ok(cfg)
}

fn build(command: Command) -> Result<PipelineConfig, CliError> {
    match command {
        Command::Descriptives(c) => config(c, vec![Stage::Descriptives]),
        Command::FitDist { common, family } => {
            let mut cfg = config(common, vec![Stage::FitDist])?;
            if let Some(f) = family.filter(|f| f != "all") {
                cfg.families = f
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<FamilyKind>()
                            .map_err(|e| CliError::usage(e.to_string()))
                    })
                    .collect::<Result<_, _>>()?;
            }
            Ok(cfg)
        }
        Command::FitNb(c) => config(c, vec![Stage::FitNb]),
        Command::FitLogit(c) => config(c, vec![Stage::FitLogit]),
        Command::FitHurdle(c) => config(c, vec![Stage::FitHurdle]),
        Command::FitSarima {
            common,
            no_dummies,
            drift,
        } => {
            let mut cfg = config(common, vec![Stage::FitSarima])?;
            if cfg.input.is_file() {
                cfg.input_kind = detect_input_kind(&cfg.input)?;
            }
            cfg.include_dummies = !no_dummies;
            cfg.include_drift = drift;
            Ok(cfg)
        }
        Command::Report { common, stages } => {
            let stages = match stages {
                Some(s) => parse_stages(&s)?,
                None => Stage::REPORT.to_vec(),
            };
            config(common, stages)
        }
        Command::Simulate { .. } => unreachable!("handled separately"),
    }
}

fn print_report(report: &RunReport) {
    match serde_json::to_string_pretty(report) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: cannot serialize run report: {e}"),
    }
    for (stage, secs) in &report.timings {
        eprintln!("timing {}: {:.3}s", stage.name(), secs);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for s in &report.stages {
        if let Some(e) = &s.error {
            eprintln!("error in {}: {e}", s.stage.name());
        }
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {}", e.message);
    ExitCode::from(e.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Command::Simulate { spec, out, seed } = cli.command {
        return match run_simulate(spec.as_deref(), &out, seed) {
            Ok(r) => {
                println!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        };
    }
    let result = build(cli.command).and_then(|cfg| run_pipeline(&cfg));
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}
