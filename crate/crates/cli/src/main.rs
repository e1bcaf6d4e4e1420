//! `bidiropt`: command-line driver for the optimization laboratory.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::SharedArgs;

#[derive(Debug, Parser)]
#[command(
    name = "bidiropt",
    version,
    about = "Forward and reverse optimization passes over a mini SSA IR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate every function in a file or directory of `.ir` files.
    Validate { path: PathBuf },
    /// Interpret a function on arguments or a workload.
    Run {
        path: PathBuf,
        function: String,
        args: Vec<u32>,
        #[arg(long)]
        workload: Option<PathBuf>,
    },
    /// Apply forward passes and reverse steps (`name@site`) in order.
    Opt {
        path: PathBuf,
        #[arg(long)]
        function: Option<String>,
        /// Comma-separated steps.
        #[arg(long, default_value = "")]
        passes: String,
        #[arg(long, value_enum, default_value = "text")]
        format: config::Format,
    },
    /// Exhaustive forward phase-ordering search.
    Search {
        path: PathBuf,
        #[arg(long)]
        function: Option<String>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Iterative bi-directional optimization.
    Ibo {
        path: PathBuf,
        #[arg(long)]
        function: Option<String>,
        /// Iterations (default 2).
        #[arg(short)]
        k: Option<usize>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Explore the class of programs reachable by forward and reverse passes.
    EquivClass {
        path: PathBuf,
        #[arg(long)]
        function: Option<String>,
        /// Also write the graph as Graphviz text.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Exhaustive search against IBO for k = 1..K on a file or directory.
    Compare {
        path: PathBuf,
        /// Largest k (default 3).
        #[arg(short)]
        k: Option<usize>,
        #[command(flatten)]
        shared: SharedArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => commands::validate(&path),
        Command::Run {
            path,
            function,
            args,
            workload,
        } => commands::run(&path, &function, &args, workload.as_deref()),
        Command::Opt {
            path,
            function,
            passes,
            format,
        } => commands::opt(&path, function.as_deref(), &passes, format),
        Command::Search { path, function, shared } => commands::search(&path, function.as_deref(), &shared),
        Command::Ibo {
            path,
            function,
            k,
            shared,
        } => commands::ibo(&path, function.as_deref(), k, &shared),
        Command::EquivClass {
            path,
            function,
            dot,
            shared,
        } => commands::equiv_class(&path, function.as_deref(), dot.as_deref(), &shared),
        Command::Compare { path, k, shared } => commands::compare(&path, k, &shared),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
