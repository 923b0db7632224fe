use std::path::PathBuf;
use std::process::ExitCode;

use chemotaxis_control::experiment::{
    output_dir, parse_config, ConfigTable, parse_override, resolve_spec, run_experiment_with, scan_csv, scan_run, write_outputs,
};
use chemotaxis_control::verify::run_checks;
use chemotaxis_control::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Optimal control experiments for the 1D Keller-Segel system.
#[derive(Parser)]
#[command(name = "ksopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file and write the artifacts.
    Run {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: the config's `out`, else runs/<preset>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a config key, e.g. --set max_iter=2000. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Print progress every this many iterations (0 disables).
        #[arg(long, default_value_t = 1000)]
        progress: usize,
    },
    /// Check the discrete invariants and the gradient on random instances.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cost along a perturbation of a finished run's controls.
    Scan {
        #[arg(long = "run")]
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Direction::Constant)]
        direction: Direction,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        amplitudes: Vec<f64>,
        /// Where to write the scan (default: <run>/scan.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Constant,
}

fn run(
    preset: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    sets: Vec<String>,
    progress: usize,
) -> Result<(), Error> {
    let mut table = match &config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text, path)?
        }
        None => ConfigTable::new(),
    };
    for assignment in &sets {
        let (key, value) = parse_override(assignment)?;
        table.insert(key, value);
    }
    if preset.is_none() && config.is_none() {
        return Err(Error::Config("give --preset or --config".into()));
    }
    let mut spec = resolve_spec(preset.as_deref(), table)?;
    if out.is_some() {
        spec.out = out;
    }
    let dir = output_dir(&spec);
    let data = run_experiment_with(&spec, |r| {
        if progress > 0 && r.iter % progress == 0 {
            eprintln!(
                "iter {:>7}  cost {:.6e}  |grad| {:.4e} (max {:.4e})",
                r.iter, r.cost, r.grad_norm_l2, r.grad_norm_max
            );
        }
    })?;
    let artifacts = write_outputs(&dir, &data)?;
    let (cost, l2, max) = data.final_values();
    match &data.outcome {
        Some(o) => println!(
            "{}: {} after {} iterations, cost {cost:.6e}, |grad| {l2:.4e} (max {max:.4e})",
            dir.display(),
            o.trace.termination,
            o.trace.iterations()
        ),
        None => println!("{}: uncontrolled run, cost {cost:.6e}", dir.display()),
    }
    eprintln!("wrote {} files to {}", artifacts.files().len(), artifacts.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            preset,
            config,
            out,
            sets,
            progress,
        } => run(preset, config, out, sets, progress),
        Command::Verify { seed } => match run_checks(seed) {
            Ok(checks) => {
                for c in &checks {
                    println!("{c}");
                }
                if checks.iter().all(|c| c.passed) {
                    Ok(())
                } else {
                    return ExitCode::from(2);
                }
            }
            Err(e) => Err(e),
        },
        Command::Scan {
            run_dir,
            direction: Direction::Constant,
            amplitudes,
            out,
        } => scan_run(&run_dir, &amplitudes).and_then(|scan| {
            let text = scan_csv(&scan);
            let path = out.unwrap_or_else(|| run_dir.join("scan.csv"));
            std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
            print!("{text}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
