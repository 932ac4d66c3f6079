use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use rlho::binpack::Instance;
use rlho::harness::{self, Experiment, ExperimentSpec};
use rlho::{exact, Error, Result};

#[derive(Parser)]
#[command(
    name = "rlho",
    version,
    about = "Learned initial solutions for simulated annealing on bin packing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over a list of seeds and write JSONL records.
    Run(Box<RunArgs>),
    /// Summarize JSONL result files.
    Aggregate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Print the mean-best-cost table.
        #[arg(long)]
        table: bool,
        /// Write best-cost curves to this CSV file.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Solve a small instance exactly (at most 12 items).
    BruteForce {
        #[arg(long)]
        instance_file: PathBuf,
    },
    /// Write a random instance in the text format read by `--instance-file`.
    GenInstance {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    experiment: Experiment,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    tm: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    instance_seed: Option<u64>,
    #[arg(long)]
    instance_file: Option<PathBuf>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    step_cap: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Directory for mode-a policy checkpoints.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

impl RunArgs {
    fn into_spec(self) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.experiment, self.n, self.out);
        macro_rules! set {
            ($($field:ident <- $arg:expr),* $(,)?) => {
                $(if let Some(v) = $arg { spec.$field = v; })*
            };
        }
        set! {
            x <- self.x,
            y <- self.y,
            t_max <- self.tm,
            t_min <- self.t0,
            iterations <- self.iterations,
            seeds <- self.seeds,
            instance_seed <- self.instance_seed,
            patience <- self.patience,
            step_cap <- self.step_cap,
            learning_rate <- self.lr,
            hidden <- self.hidden,
        }
        spec.instance_file = self.instance_file;
        spec.checkpoint_dir = self.checkpoint_dir;
        spec
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let path = harness::run_experiment(&args.into_spec())?;
            println!("{}", path.display());
        }
        Command::Aggregate {
            paths,
            table,
            curves,
        } => {
            let report = harness::aggregate(&paths)?;
            if table || curves.is_none() {
                print!("{}", report.render_table());
            }
            if let Some(path) = curves {
                std::fs::write(&path, report.curves_csv()).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
        }
        Command::BruteForce { instance_file } => {
            let inst = Arc::new(Instance::read(&instance_file)?);
            let sol = exact::solve(&inst)?;
            println!("optimum {}", sol.bins);
            println!("lower_bound {}", inst.lower_bound());
            let assignment: Vec<String> = sol
                .packing
                .assignment()
                .iter()
                .map(|b| b.to_string())
                .collect();
            println!("assignment {}", assignment.join(" "));
        }
        Command::GenInstance { n, seed, out } => {
            Instance::generate(n, seed)?.write(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
