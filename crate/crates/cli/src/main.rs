use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coexact::harness::{self, Analysis, PlotSeries, RunOptions, RunOutput, RunRecord};
use coexact::Error;

#[derive(Parser)]
#[command(name = "coexact", version, about = "Coexact spectra, magnetic critical values and flows on model geometries")]
struct Cli {
    /// Scenario configuration (TOML).
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Overrides every scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread budget for the whole run.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies every verification tolerance.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// Directory for JSONL records and timings.
    #[arg(long, global = true, env = "COEXACT_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coexact and curl spectra.
    Spectrum,
    /// Critical values (Hamiltonian, strict, Lagrangian, covers).
    Mane,
    /// Magnetic flows: comass tables, drift, cyclotron and periodic orbits.
    Flow,
    /// Hyperbolic shadowing of magnetic orbits and bump suites.
    Shadow,
    /// Spanning chains and the per-loop isoperimetric check.
    Iso,
    /// Verdict table, from stored records when `--input` is given.
    Verify {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Every analysis of every scenario.
    Run,
    /// Extracts a CSV series from stored records.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        /// spectrum, spectrum-vs-h, cover, comass, bump or verdicts.
        #[arg(long)]
        series: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read_records(path: &Path) -> Result<Vec<RunRecord>, Error> {
    harness::read_jsonl(BufReader::new(File::open(path)?))
}

fn execute(cli: &Cli, name: &str, only: Option<Analysis>) -> Result<RunOutput, Error> {
    let config = harness::load_config(&cli.config)?;
    let opts = RunOptions { seed: cli.seed, threads: cli.threads, tol_scale: cli.tol_scale, only };
    let out = harness::run(&config, &opts)?;
    fs::create_dir_all(&cli.out_dir)?;
    let mut w = BufWriter::new(File::create(cli.out_dir.join(format!("{name}.jsonl")))?);
    harness::write_jsonl(&out.records, &mut w)?;
    w.flush()?;
    let mut t = BufWriter::new(File::create(cli.out_dir.join(format!("{name}.timings.jsonl")))?);
    for timing in &out.timings {
        serde_json::to_writer(&mut t, timing)?;
        writeln!(t)?;
    }
    t.flush()?;
    Ok(out)
}

fn print_summary(out: &RunOutput) {
    for rec in &out.records {
        for (key, e) in &rec.errors {
            eprintln!("{:<14} error in {key}: [{}] {}", rec.scenario, e.kind, e.message);
        }
        if let Some(rows) = &rec.verify {
            print!("{}", harness::format_table(rec, rows));
        }
    }
}

fn main_inner(cli: &Cli) -> Result<i32, Error> {
    let only = match &cli.command {
        Command::Spectrum => Some(Analysis::Spectrum),
        Command::Mane => Some(Analysis::Mane),
        Command::Flow => Some(Analysis::Flow),
        Command::Shadow => Some(Analysis::Shadow),
        Command::Iso => Some(Analysis::Iso),
        Command::Verify { input: None } => Some(Analysis::Verify),
        Command::Run => None,
        Command::Verify { input: Some(input) } => {
            let records = read_records(input)?;
            let mut failed = false;
            for rec in &records {
                let rows = harness::verify(rec);
                failed |= !rec.errors.is_empty() || rows.iter().any(|r| r.status == harness::Status::Fail);
                print!("{}", harness::format_table(rec, &rows));
            }
            return Ok(i32::from(failed));
        }
        Command::PlotData { input, series, output } => {
            let series: PlotSeries = series.parse()?;
            let records = read_records(input)?;
            match output {
                Some(p) => {
                    let mut w = BufWriter::new(File::create(p)?);
                    harness::plot_data(&records, series, &mut w)?;
                    w.flush()?;
                }
                None => harness::plot_data(&records, series, io::stdout().lock())?,
            }
            return Ok(0);
        }
    };
    let name = match &cli.command {
        Command::Spectrum => "spectrum",
        Command::Mane => "mane",
        Command::Flow => "flow",
        Command::Shadow => "shadow",
        Command::Iso => "iso",
        Command::Verify { .. } => "verify",
        _ => "run",
    };
    let out = execute(cli, name, only)?;
    print_summary(&out);
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
