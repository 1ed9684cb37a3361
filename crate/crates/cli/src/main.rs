//! `onecount`: command-line front end for the one-count detector models.
//!
//! Verbs cover state preparation, single-count application, closed-form
//! prediction, figure sweeps, the interaction-oracle cross-check, and
//! seeded experiment simulation with model discrimination.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onecount::experiment::{
    discriminate, parse_config, run_experiment, DiscriminationResult, EstimateReport,
};
use onecount::fock::{photon_statistics, prepare, DensityMatrix, StatePrep, Truncation};
use onecount::jc::{conditioned_field_state, UnitaryConstruction};
use onecount::jump::{apply_jump, jump_norm, predict_distribution, predict_pn, JumpModel};
use onecount::sweep::{format_float, sweep_figure, table_report, write_csv, Figure, GridSpec};

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  invalid arguments, state/model parameters, or config file
  3  computation cannot proceed (zero click probability, no accepted trials)
  4  file I/O failure";

#[derive(Parser)]
#[command(
    name = "onecount",
    about = "Single-photon-subtraction detector models on truncated Fock space",
    after_help = EXIT_HELP,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare a field state and print its occupation summary
    Prepare {
        #[command(flatten)]
        state: StateArgs,
        /// Occupation levels to list
        #[arg(long, default_value_t = 8)]
        levels: usize,
    },
    /// Apply one detector count to a state and print the post-count summary
    Jump {
        #[command(flatten)]
        state: StateArgs,
        /// Jump model: A, E, H(y), N, or Beta(b)
        #[arg(long)]
        model: JumpModel,
        /// Occupation levels to list
        #[arg(long, default_value_t = 8)]
        levels: usize,
    },
    /// Closed-form post-count probabilities without building matrices
    Predict {
        #[command(flatten)]
        state: StateArgs,
        /// Jump model: A, E, H(y), N, or Beta(b)
        #[arg(long)]
        model: JumpModel,
        /// Print only this output level
        #[arg(long)]
        n: Option<usize>,
        /// Levels to list when --n is not given
        #[arg(long, default_value_t = 8)]
        levels: usize,
    },
    /// Sweep a prediction figure onto CSV
    Figure {
        /// Which sweep: coherent-chi0, thermal-chi0, thermal-chi1, or thermal-y
        which: Figure,
        /// Grid points (default per figure)
        #[arg(long)]
        points: Option<usize>,
        /// Grid start (default per figure)
        #[arg(long)]
        start: Option<f64>,
        /// Grid stop (default per figure)
        #[arg(long)]
        stop: Option<f64>,
        /// Write CSV here instead of standard output
        #[arg(long)]
        out: Option<String>,
        /// Also print a text summary with per-column extrema and dips
        #[arg(long)]
        report: bool,
    },
    /// Cross-check the probe model against the full interaction unitary
    Oracle {
        /// States to check (repeatable)
        #[arg(long = "state", required = true)]
        states: Vec<StatePrep>,
        /// Interaction phases y to check (repeatable)
        #[arg(long = "y", required = true)]
        phases: Vec<f64>,
        /// Truncation: tail(eps) or dim(n)
        #[arg(long, default_value_t)]
        truncation: Truncation,
        /// Build the unitary by series exponential instead of closed-form blocks
        #[arg(long)]
        series: bool,
    },
    /// Run a seeded counting experiment from a config file
    Simulate {
        /// Config file (key = value schema, see README)
        #[arg(long)]
        config: String,
        /// Override the seed from the config file
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the report(s) to this file
        #[arg(long)]
        out: Option<String>,
        /// Emit CSV rows instead of the text report
        #[arg(long)]
        csv: bool,
    },
    /// Simulate, then rank the config's candidate models against the counts
    Discriminate {
        /// Config file; must list candidates
        #[arg(long)]
        config: String,
        /// Override the seed from the config file
        #[arg(long)]
        seed: Option<u64>,
        /// Emit CSV rows instead of the text report
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct StateArgs {
    /// State: thermal(nbar), coherent(re[,im]), fock(n), or squeezed(r)
    #[arg(long)]
    state: StatePrep,
    /// Truncation: tail(eps) or dim(n)
    #[arg(long, default_value_t)]
    truncation: Truncation,
}

/// CLI failure with its documented exit code.
enum Failure {
    Validation(String),
    Computation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Computation(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Computation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<onecount::Error> for Failure {
    fn from(e: onecount::Error) -> Self {
        if e.is_computation() {
            Failure::Computation(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Prepare { state, levels } => {
            let rho = prepare(&state.state, state.truncation)?;
            write!(out, "{}", state_summary(&state.state, &rho, levels)).map_err(io_failure)?;
        }
        Command::Jump {
            state,
            model,
            levels,
        } => {
            let rho = prepare(&state.state, state.truncation)?;
            let outcome = apply_jump(model, &rho)?;
            writeln!(out, "# one count of {model} on {}", state.state).map_err(io_failure)?;
            writeln!(out, "norm = {}", format_float(outcome.norm)).map_err(io_failure)?;
            write!(out, "{}", occupation_block(&outcome.state, levels)).map_err(io_failure)?;
        }
        Command::Predict {
            state,
            model,
            n,
            levels,
        } => {
            let rho = prepare(&state.state, state.truncation)?;
            let chi = rho.number_distribution();
            writeln!(out, "# predicted post-count occupations: {model} on {}", state.state)
                .map_err(io_failure)?;
            writeln!(out, "norm = {}", format_float(jump_norm(model, &chi)?))
                .map_err(io_failure)?;
            match n {
                Some(level) => {
                    let p = predict_pn(model, &chi, level)?;
                    writeln!(out, "P_{level} = {}", format_float(p)).map_err(io_failure)?;
                }
                None => {
                    let probs = predict_distribution(model, &chi)?;
                    for (level, p) in probs.iter().enumerate().take(levels) {
                        writeln!(out, "P_{level} = {}", format_float(*p)).map_err(io_failure)?;
                    }
                }
            }
        }
        Command::Figure {
            which,
            points,
            start,
            stop,
            out: path,
            report,
        } => {
            let grid = if points.is_some() || start.is_some() || stop.is_some() {
                let base = which.default_grid();
                Some(GridSpec::new(
                    start.unwrap_or(base.start),
                    stop.unwrap_or(base.stop),
                    points.unwrap_or(base.points),
                ))
            } else {
                None
            };
            let table = sweep_figure(which, grid)?;
            match path {
                Some(p) => {
                    let mut file = File::create(&p)?;
                    write_csv(&table, &mut file)?;
                    writeln!(out, "wrote {p}").map_err(io_failure)?;
                }
                None => write_csv(&table, &mut out)?,
            }
            if report {
                write!(out, "{}", table_report(which, &table)).map_err(io_failure)?;
            }
        }
        Command::Oracle {
            states,
            phases,
            truncation,
            series,
        } => {
            let how = if series {
                UnitaryConstruction::SeriesExponential
            } else {
                UnitaryConstruction::AnalyticBlocks
            };
            writeln!(out, "state\ty\tnorm\tmax_deviation\tstatus").map_err(io_failure)?;
            for state in &states {
                let rho = prepare(state, truncation)?;
                for &y in &phases {
                    writeln!(out, "{}", oracle_row(state, &rho, y, how)?).map_err(io_failure)?;
                }
            }
        }
        Command::Simulate {
            config,
            seed,
            out: path,
            csv,
        } => {
            let cfg = load_config(&config, seed)?;
            let report = run_experiment(&cfg)?;
            let ranking = if cfg.candidates.is_empty() {
                None
            } else {
                Some(discriminate(&report, &cfg.candidates)?)
            };
            let text = render_outputs(&report, ranking.as_ref(), csv);
            if let Some(p) = &path {
                let mut file = File::create(p)?;
                file.write_all(text.as_bytes())?;
            }
            write!(out, "{text}").map_err(io_failure)?;
        }
        Command::Discriminate { config, seed, csv } => {
            let cfg = load_config(&config, seed)?;
            if cfg.candidates.is_empty() {
                return Err(Failure::Validation(
                    "config lists no candidates to discriminate between".to_string(),
                ));
            }
            let report = run_experiment(&cfg)?;
            let ranking = discriminate(&report, &cfg.candidates)?;
            if csv {
                writeln!(out, "{}", DiscriminationResult::CSV_HEADER).map_err(io_failure)?;
                write!(out, "{}", ranking.csv_rows()).map_err(io_failure)?;
            } else {
                write!(out, "{}", ranking.render()).map_err(io_failure)?;
            }
        }
    }
    Ok(())
}

fn io_failure(e: io::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn load_config(path: &str, seed: Option<u64>) -> Result<onecount::experiment::ExperimentConfig, Failure> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    let mut cfg = match parse_config(&text) {
        Ok(cfg) => cfg,
        // a config without a seed is still usable when --seed supplies one
        Err(onecount::Error::Config { line: 0, message })
            if message.contains("'seed'") && seed.is_some() =>
        {
            let patched = format!("{text}\nseed = 0\n");
            parse_config(&patched)?
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn render_outputs(
    report: &EstimateReport,
    ranking: Option<&DiscriminationResult>,
    csv: bool,
) -> String {
    let mut text = String::new();
    if csv {
        text.push_str(EstimateReport::CSV_HEADER);
        text.push('\n');
        text.push_str(&report.csv_row());
        text.push('\n');
        if let Some(r) = ranking {
            text.push_str(DiscriminationResult::CSV_HEADER);
            text.push('\n');
            text.push_str(&r.csv_rows());
        }
    } else {
        text.push_str(&report.render());
        if let Some(r) = ranking {
            text.push_str(&r.render());
        }
    }
    text
}

fn state_summary(prep: &StatePrep, rho: &DensityMatrix, levels: usize) -> String {
    let stats = photon_statistics(rho);
    let mut text = String::new();
    text.push_str(&format!("# prepared state {prep}\n"));
    text.push_str(&format!("dim = {}\n", rho.dim()));
    text.push_str(&format!(
        "tail_mass_bound = {}\n",
        format_float(rho.tail_mass_bound())
    ));
    text.push_str(&format!("trace = {}\n", format_float(rho.trace())));
    text.push_str(&format!("mean = {}\n", format_float(stats.mean)));
    text.push_str(&format!(
        "mean_square = {}\n",
        format_float(stats.mean_square)
    ));
    match stats.mandel_q {
        Some(q) => text.push_str(&format!("mandel_q = {}\n", format_float(q))),
        None => text.push_str("mandel_q = undefined\n"),
    }
    text.push_str(&occupation_block(rho, levels));
    text
}

fn occupation_block(rho: &DensityMatrix, levels: usize) -> String {
    let chi = rho.number_distribution();
    let mut text = String::from("chi:\n");
    for n in 0..levels.min(rho.dim()) {
        text.push_str(&format!("  {n} {}\n", format_float(chi.get(n))));
    }
    text
}

fn oracle_row(
    prep: &StatePrep,
    rho: &DensityMatrix,
    y: f64,
    how: UnitaryConstruction,
) -> Result<String, Failure> {
    let oracle = conditioned_field_state(y, rho, how);
    let direct = apply_jump(JumpModel::H { y }, rho);
    match (oracle, direct) {
        (Ok(a), Ok(b)) => {
            let mut max_dev = (a.norm - b.norm).abs();
            for m in 0..rho.dim() {
                for n in 0..rho.dim() {
                    max_dev = max_dev.max((a.state.element(m, n) - b.state.element(m, n)).norm());
                }
            }
            Ok(format!(
                "{prep}\t{}\t{}\t{}\tok",
                format_float(y),
                format_float(b.norm),
                format_float(max_dev)
            ))
        }
        // a state the probe cannot fire on is a flagged row, not a failure
        (Err(onecount::Error::ZeroJumpWeight(_)), _)
        | (_, Err(onecount::Error::ZeroJumpWeight(_))) => Ok(format!(
            "{prep}\t{}\t-\t-\tzero-weight",
            format_float(y)
        )),
        (Err(e), _) | (_, Err(e)) => Err(e.into()),
    }
}
