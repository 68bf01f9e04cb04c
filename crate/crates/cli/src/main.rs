//! mechlab: batch experiment driver for exact buy-many / item-pricing
//! computations. Every command emits CSV certificate rows; the exit code is
//! 0 when all assertions pass, 2 on parse errors, 3 on guard limits, and 4 on
//! assertion failures.

mod commands;
mod csvout;

use clap::{Parser, Subcommand};
use commands::CliError;
use mechlab_core::opt::Guards;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "mechlab", version, about = "exact mechanism computations at desk scale")]
struct Cli {
    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on the per-buyer choice-mapping enumeration.
    #[arg(long = "guard-enum", global = true)]
    guard_enum: Option<u128>,
    /// Cap on subset counts in decompositions and availability dynamics.
    #[arg(long = "guard-subsets", global = true)]
    guard_subsets: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check instance invariants.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Check the buy-many constraint of a menu.
    CheckBuyMany {
        #[arg(long)]
        menu: PathBuf,
    },
    /// Optimal item pricing revenue (and profit when costs are present).
    OptPricing {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated cost vector overriding the instance costs.
        #[arg(long)]
        costs: Option<String>,
    },
    /// Joint ex-ante revenue relaxation.
    Exante {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Dual cost vector of the ex-ante program with supergradient checks.
    Subgradient {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated allocation bound for buyer 0.
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Profit-bound report of a buy-many menu against the pricing oracle.
    ProfitBound {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        menu: PathBuf,
        #[arg(long)]
        costs: Option<String>,
    },
    /// Convex decomposition of an allocation target.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated prices ("inf" withholds an item).
        #[arg(long)]
        prices: String,
        /// Comma-separated target allocation.
        #[arg(long)]
        x: String,
    },
    /// Build, derandomize and verify a sequential pricing.
    Sequential {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated serving order (buyer indices).
        #[arg(long)]
        order: Option<String>,
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long, default_value_t = 20000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate and verify the linear-gap family.
    Gap {
        #[arg(long)]
        m: usize,
        /// Optional price perturbation (strict-preference variant).
        #[arg(long)]
        eps: Option<String>,
    },
    /// Random-instance property campaign.
    Sweep {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        support: usize,
        #[arg(long, default_value_t = 8)]
        scale: i64,
    },
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Subgradient { seed, .. }
        | Command::Sequential { seed, .. }
        | Command::Sweep { seed, .. } => Some(*seed),
        _ => None,
    }
}

fn run(cli: &Cli) -> Result<Vec<csvout::Row>, CliError> {
    let mut guards = Guards::default();
    if let Some(g) = cli.guard_enum {
        guards.enum_limit = g;
    }
    if let Some(g) = cli.guard_subsets {
        guards.subset_limit = g;
    }
    match &cli.command {
        Command::Validate { instance } => commands::cmd_validate(instance),
        Command::CheckBuyMany { menu } => commands::cmd_check_buy_many(menu),
        Command::OptPricing { instance, costs } => {
            commands::cmd_opt_pricing(instance, costs.as_deref(), &guards)
        }
        Command::Exante { instance } => commands::cmd_exante(instance, &guards),
        Command::Subgradient { instance, x, seed } => {
            commands::cmd_subgradient(instance, x, *seed, &guards)
        }
        Command::ProfitBound {
            instance,
            menu,
            costs,
        } => commands::cmd_profit_bound(instance, menu, costs.as_deref(), &guards),
        Command::Decompose { instance, prices, x } => {
            commands::cmd_decompose(instance, prices, x, &guards)
        }
        Command::Sequential {
            instance,
            order,
            mode,
            trials,
            seed,
        } => commands::cmd_sequential(instance, order.as_deref(), mode, *trials, *seed, &guards),
        Command::Gap { m, eps } => commands::cmd_gap(*m, eps.as_deref(), &guards),
        Command::Sweep {
            seed,
            trials,
            n,
            m,
            support,
            scale,
        } => commands::cmd_sweep(*seed, *trials, *n, *m, *support, *scale, &guards),
    }
}

fn main() {
    if let Ok(threads) = std::env::var("MECHLAB_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let config = format!("{:?}", cli.command);
    let seed = seed_of(&cli.command);
    match run(&cli) {
        Ok(rows) => {
            let result = match &cli.out {
                Some(path) => std::fs::File::create(path)
                    .map_err(|e| e.to_string())
                    .and_then(|mut f| {
                        csvout::write_csv(&mut f, &config, seed, &rows).map_err(|e| e.to_string())
                    }),
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    csvout::write_csv(&mut lock, &config, seed, &rows).map_err(|e| e.to_string())
                }
            };
            if let Err(e) = result {
                eprintln!("mechlab: output error: {e}");
                std::process::exit(1);
            }
            if rows.iter().any(|r| !r.pass) {
                std::process::exit(4);
            }
        }
        Err(e) => {
            eprintln!("mechlab: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
