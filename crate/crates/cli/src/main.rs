mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Search for initial conditions and inputs that violate a temporal-logic
/// requirement of a hybrid system.
#[derive(Debug, Parser)]
#[command(name = "hyfal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one point and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Run one search driver (gd, sa, sa+gd).
    Falsify(RunArgs),
    /// Compare SA and SA+GD over a list of seeds.
    Experiment(RunArgs),
}

#[derive(Debug, Args, Default)]
struct VariantArgs {
    /// Vehicle: heading angle in the thrust terms.
    #[arg(long)]
    corrected_dynamics: bool,
    /// Glycemic: infusion terms routed as printed.
    #[arg(long)]
    printed_routing: bool,
    /// Vehicle: regions tied to their locations.
    #[arg(long)]
    located_sets: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    /// Initial state, comma separated.
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<String>,
    /// Input parameters, comma separated, channel by channel.
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<String>,
    /// Billiard throw angle in degrees.
    #[arg(long, allow_negative_numbers = true)]
    angle: Option<f64>,
    /// Horizon; the model's own by default.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// `objective`, `requirement`, an s-expression, or `@file`.
    #[arg(long)]
    formula: Option<String>,
    /// Also write sensitivity.csv.
    #[arg(long)]
    sensitivity: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// RK4 steps over the horizon.
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    /// Allow a point outside the search box.
    #[arg(long)]
    unchecked: bool,
    #[command(flatten)]
    variants: VariantArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    formula: Option<String>,
    /// gd, sa or sa+gd.
    #[arg(long)]
    driver: Option<String>,
    /// Comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Number of seeds derived from --master-seed.
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    master_seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for experiments.
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<String>,
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    k2: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    r_threshold: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    angle: Option<f64>,
    /// Keep descending after the robustness turns negative.
    #[arg(long)]
    satisfy: bool,
    #[arg(long)]
    unchecked: bool,
    /// Any configuration key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    variants: VariantArgs,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Falsify(a) => commands::falsify(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    if let Err(e) = result {
        eprintln!("hyfal: {e}");
        std::process::exit(e.exit_code());
    }
}
