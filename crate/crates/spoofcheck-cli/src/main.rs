//! Batch driver for the spoofing checker: simulate scenes, plant ghost
//! attacks, check logs, score verdicts, and benchmark the pipeline.
//!
//! Everything is file-to-file and deterministic under fixed seeds, so any
//! step can be rerun or diffed in isolation. Exit codes: 0 success, 2 bad
//! configuration or arguments, 3 bad input data or I/O failure. Errors go
//! to stderr as a one-line JSON record.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spoofcheck::config::RunConfig;
use spoofcheck::framelog::{read_log_path, write_log_path};
use spoofcheck::metrics::{attack_eval, benchmark, match_ratio, AttackBookkeeping};
use spoofcheck::pipeline::{collect_verdicts, read_verdicts_path, run_check, write_verdicts_path};
use spoofcheck::sim::{generate_scenes, inject_attack};
use spoofcheck::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spoofcheck",
    version,
    about = "Temporal-consistency checking of 3D detections against ghost-object spoofing"
)]
struct Cli {
    /// TOML run configuration. Falls back to $SPOOFCHECK_CONFIG, then to
    /// built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic benign scenes as a JSON Lines frame log.
    Simulate {
        /// Output frame log path.
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
        /// Override the simulator seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of scenes from the config.
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Plant ghost detections into an existing frame log.
    Attack {
        /// Input frame log (benign).
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        /// Output frame log with ghosts and attack records.
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
        /// Override the injector seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the consistency check over a frame log and write verdicts.
    Check {
        /// Input frame log.
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        /// Output verdict log (JSON Lines, one checked frame per line).
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
        /// Scene-level worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Score a verdict log against the frame log it was produced from.
    Eval {
        /// The checked frame log (attacked or benign).
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        /// The verdict log produced by `check` on that same frame log.
        #[arg(long, value_name = "FILE")]
        verdicts: PathBuf,
        /// Directory for the report files.
        #[arg(long, short, value_name = "DIR")]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Both)]
        format: ReportFormat,
    },
    /// Measure per-stage wall-clock cost of the check pipeline.
    Bench {
        /// Input frame log.
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long, short, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Override the repetition count from the config (minimum 10).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
}

fn load_config(cli_path: Option<&Path>) -> Result<RunConfig> {
    if let Some(path) = cli_path {
        return RunConfig::from_path(path);
    }
    if let Some(path) = std::env::var_os("SPOOFCHECK_CONFIG") {
        return RunConfig::from_path(Path::new(&path));
    }
    Ok(RunConfig::default())
}

fn cmd_simulate(
    config: &RunConfig,
    output: &Path,
    seed: Option<u64>,
    scenes: Option<usize>,
) -> Result<()> {
    let mut scene_config = config.scene_config()?;
    if let Some(seed) = seed {
        scene_config.seed = seed;
    }
    let count = scenes.unwrap_or_else(|| config.scene_count());
    let records = generate_scenes(&scene_config, count)?;
    write_log_path(output, &records)?;
    println!(
        "wrote {} frames across {count} scenes to {}",
        records.len(),
        output.display()
    );
    Ok(())
}

fn cmd_attack(config: &RunConfig, input: &Path, output: &Path, seed: Option<u64>) -> Result<()> {
    let attack = config.attack_config()?;
    let records = read_log_path(input)?;
    let attacked = inject_attack(
        &records,
        &attack,
        seed.unwrap_or_else(|| config.attack_seed()),
    )?;
    let (attempts, ghosts) =
        attacked
            .iter()
            .filter_map(|r| r.attack.as_ref())
            .fold((0u64, 0u64), |(a, g), rec| {
                (
                    a + u64::from(rec.attempted),
                    g + rec.injected_ids.len() as u64,
                )
            });
    write_log_path(output, &attacked)?;
    println!(
        "planted {ghosts} ghosts from {attempts} attempts into {}",
        output.display()
    );
    Ok(())
}

fn cmd_check(config: &RunConfig, input: &Path, output: &Path, jobs: usize) -> Result<()> {
    let settings = config.check_settings()?;
    let records = read_log_path(input)?;
    let results = run_check(&records, &settings, jobs)?;
    let frames = collect_verdicts(&results);
    let verdict_count: usize = frames.iter().map(|f| f.verdicts.len()).sum();
    write_verdicts_path(output, &frames)?;
    println!(
        "checked {} frames across {} scenes, {verdict_count} verdicts, to {}",
        frames.len(),
        results.len(),
        output.display()
    );
    Ok(())
}

fn write_report(dir: &Path, stem: &str, format: ReportFormat, json: &str, csv: &str) -> Result<()> {
    if format != ReportFormat::Csv {
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
    }
    if format != ReportFormat::Json {
        std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    }
    Ok(())
}

fn cmd_eval(
    config: &RunConfig,
    input: &Path,
    verdicts: &Path,
    output: &Path,
    format: ReportFormat,
) -> Result<()> {
    let records = read_log_path(input)?;
    let frames = read_verdicts_path(verdicts)?;
    let book = AttackBookkeeping::from_log(&records);

    let ratios = match_ratio(&frames, &book, &config.cmcs);
    let eval = attack_eval(&frames, &book)?;

    std::fs::create_dir_all(output)?;
    let ratios_json = serde_json::to_string_pretty(&ratios)
        .map_err(|e| Error::Data(format!("cannot serialize match ratios: {e}")))?;
    write_report(
        output,
        "match_ratio",
        format,
        &ratios_json,
        &ratios.to_csv(),
    )?;
    let eval_json = serde_json::to_string_pretty(&eval)
        .map_err(|e| Error::Data(format!("cannot serialize attack eval: {e}")))?;
    write_report(output, "attack_eval", format, &eval_json, &eval.to_csv())?;

    let overall = eval.overall();
    println!(
        "eval over {} checked frames: asr {:.4}, dsr {:.4}{}, recall_benign {:.4}, reports in {}",
        frames.len(),
        overall.asr,
        overall.dsr,
        if overall.dsr_degenerate {
            " (degenerate: no successful injections)"
        } else {
            ""
        },
        overall.recall_benign,
        output.display()
    );
    Ok(())
}

fn cmd_bench(
    config: &RunConfig,
    input: &Path,
    output: Option<&Path>,
    reps: Option<usize>,
    format: ReportFormat,
) -> Result<()> {
    let settings = config.check_settings()?;
    let records = read_log_path(input)?;
    let report = benchmark(
        &records,
        &settings,
        reps.unwrap_or_else(|| config.bench_repetitions()),
    )?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Data(format!("cannot serialize benchmark report: {e}")))?;
    match output {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
            if let Some(dir) = dir {
                std::fs::create_dir_all(dir)?;
            }
            match format {
                ReportFormat::Json => std::fs::write(path, json)?,
                ReportFormat::Csv => std::fs::write(path, report.to_csv())?,
                ReportFormat::Both => {
                    return Err(Error::Config(
                        "bench --output takes one file; pick --format json or csv".into(),
                    ))
                }
            }
            println!(
                "benchmarked {} repetitions, {:.1} frames/sec, report in {}",
                report.repetitions,
                report.frames_per_second,
                path.display()
            );
        }
        None => match format {
            ReportFormat::Csv => print!("{}", report.to_csv()),
            _ => println!("{json}"),
        },
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate {
            output,
            seed,
            scenes,
        } => cmd_simulate(&config, output, *seed, *scenes),
        Command::Attack {
            input,
            output,
            seed,
        } => cmd_attack(&config, input, output, *seed),
        Command::Check {
            input,
            output,
            jobs,
        } => cmd_check(&config, input, output, *jobs),
        Command::Eval {
            input,
            verdicts,
            output,
            format,
        } => cmd_eval(&config, input, verdicts, output, *format),
        Command::Bench {
            input,
            output,
            reps,
            format,
        } => cmd_bench(&config, input, output.as_deref(), *reps, *format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = if err.is_config() { "config" } else { "data" };
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } })
            );
            ExitCode::from(if err.is_config() { 2 } else { 3 })
        }
    }
}
