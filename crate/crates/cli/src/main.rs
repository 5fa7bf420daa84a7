mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cadas", version, about = "Morphometric grading of cervical epithelium patches")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Nuclei foreground mask of one image
    Segment(commands::SegmentArgs),
    /// Split a nuclei mask into fitted cell ellipses
    Resolve(commands::ResolveArgs),
    /// Per-band feature vector of one patch from its resolved cells
    Features(commands::FeaturesArgs),
    /// Grade query feature vectors against a labelled feature table
    Grade(commands::GradeArgs),
    /// Confusion matrices and metrics for a predictions table
    Evaluate(commands::EvaluateArgs),
    /// Agreement between the two rater columns of a manifest
    Agreement(commands::AgreementArgs),
    /// Write a synthetic dataset with ground truth and a manifest
    Synth(commands::SynthArgs),
    /// Full pipeline over a manifest, with cross-validated grading
    Run(commands::RunArgs),
}

/// Exit status for usage and configuration errors; 2 is reserved for runs
/// where too many entries failed.
const EXIT_CONFIG: u8 = 1;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Commands::Segment(a) => commands::segment(a),
        Commands::Resolve(a) => commands::resolve(a),
        Commands::Features(a) => commands::features(a),
        Commands::Grade(a) => commands::grade(a),
        Commands::Evaluate(a) => commands::evaluate(a),
        Commands::Agreement(a) => commands::agreement(a),
        Commands::Synth(a) => commands::synth(a),
        Commands::Run(a) => commands::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
