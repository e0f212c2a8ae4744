use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use newton_cli::{
    bank_build, bank_inspect, bank_queries, eval, plot, query, resolve_bank_path, train, CliError, CliResult, Metric,
    QueryInput, QueryOptions, TrainOptions, EXIT_USAGE,
};

/// Match observations to Newtonian scenarios and evaluate predicted motion.
#[derive(Debug, Parser)]
#[command(name = "newton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, inspect or export the scenario bank.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
    /// Retrieve the best matching entry and state for raw feature vectors.
    Query {
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Query set CSV.
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        queries: Option<PathBuf>,
        /// Comma-separated raw feature vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        features: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Encoder parameters; defaults to the identity encoder with a zero head.
        #[arg(long)]
        params: Option<PathBuf>,
        /// SVG of the predicted curves.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of per-state similarities.
        #[arg(long)]
        sims: Option<PathBuf>,
    },
    /// Train the query encoder against the bank.
    Train {
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Starting parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Trained parameter file.
        #[arg(long)]
        out: PathBuf,
        /// Loss CSV; defaults to `<out>.loss.csv`.
        #[arg(long)]
        loss: Option<PathBuf>,
    },
    /// Score predictions against ground truth, one column per scenario.
    Eval {
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value = "fmeasure")]
        metric: Metric,
        /// Distance threshold for fmeasure; defaults to 5% of the ground-truth length.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Report CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one entry's trajectory with velocity and force glyphs.
    Plot {
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        entry: u16,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum BankAction {
    /// Simulate, encode and write the bank.
    Build {
        /// Output path; defaults to `$NEWTON_BANK_DIR/bank.nbk`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Encoder parameters; defaults to the identity encoder.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Print a summary of a bank file.
    Inspect {
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Export a query set with one record per bank state.
    Queries {
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bank { action } => match action {
            BankAction::Build { out, params } => {
                let path = resolve_bank_path(out.as_deref())?;
                let file = bank_build(&path, params.as_deref())?;
                println!(
                    "wrote {} ({} entries, {} payload bytes)",
                    path.display(),
                    file.bank.len(),
                    file.payload_len()
                );
            }
            BankAction::Inspect { bank } => print!("{}", bank_inspect(&resolve_bank_path(bank.as_deref())?)?),
            BankAction::Queries { bank, out } => {
                let set = bank_queries(&resolve_bank_path(bank.as_deref())?, &out)?;
                println!("wrote {} ({} records)", out.display(), set.records.len());
            }
        },
        Command::Query {
            bank,
            queries,
            features,
            lambda,
            params,
            out,
            sims,
        } => {
            let input = match (features, queries) {
                (Some(f), _) => QueryInput::Features(f),
                (None, Some(q)) => QueryInput::File(q),
                (None, None) => return Err(CliError::Usage("give --features or --queries".into())),
            };
            let opts = QueryOptions {
                lambda,
                params,
                svg: out,
                sims,
            };
            for o in query(&resolve_bank_path(bank.as_deref())?, &input, &opts)? {
                println!("{}", o.line());
            }
        }
        Command::Train {
            bank,
            queries,
            iters,
            seed,
            lambda,
            params,
            out,
            loss,
        } => {
            let opts = TrainOptions {
                iters,
                seed,
                lambda,
                init: params,
                out,
                loss,
            };
            let s = train(&resolve_bank_path(bank.as_deref())?, &queries, &opts)?;
            println!(
                "wrote {} and {} (final loss {:.6})",
                s.params_path.display(),
                s.loss_path.display(),
                s.losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Eval {
            bank,
            queries,
            metric,
            threshold,
            lambda,
            params,
            out,
        } => {
            let report = eval(
                &resolve_bank_path(bank.as_deref())?,
                &queries,
                metric,
                lambda,
                threshold,
                params.as_deref(),
            )?;
            let csv = report.to_csv();
            match out {
                Some(p) => newton_core::store::write_atomic(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
        Command::Plot { bank, entry, out } => {
            plot(&resolve_bank_path(bank.as_deref())?, entry, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("newton: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
