use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use lopsim::formats::{count_rows, counts_to_string, read_circuit, read_counts, write_atomic};
use lopsim::run::{run, sweep, RunOptions, RunOutput};
use lopsim::scenario::{builtin, Scenario, Shots, SweepParameter, BUILTIN_SCENARIOS};
use lopsim::{report, tomography, validate};

#[derive(Parser)]
#[command(name = "lopsim", version, about = "Linear-optical polarization circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run a scenario once per parameter value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// epsilon, overlap, contamination, entangled-state-fidelity, shots
        /// or component:<label>.<param>
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Check every built-in circuit, or one circuit file.
    Validate {
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List built-in scenarios.
    List,
    /// Two-qubit tomography of a Werner pair or of recorded counts.
    Tomography {
        /// Werner fidelity of the simulated pair.
        #[arg(long, default_value_t = 0.962, conflicts_with = "counts")]
        fidelity: f64,
        /// Count table to reconstruct instead of simulating.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, default_value = "1000000")]
        shots: Shots,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per setting, or `exact`.
    #[arg(long)]
    shots: Option<Shots>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    no_subtraction: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

impl RunArgs {
    fn scenario(&self) -> anyhow::Result<Scenario> {
        let p = Path::new(&self.scenario);
        if p.exists() {
            return Scenario::load(p);
        }
        builtin(&self.scenario).with_context(|| {
            format!("`{}` is neither a file nor a built-in scenario (see `lopsim list`)", self.scenario)
        })
    }

    fn options(&self) -> RunOptions {
        RunOptions { threads: self.jobs, seed: self.seed, shots: self.shots, no_subtraction: self.no_subtraction }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn write_run(dir: &Path, out: &RunOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("counts.csv"), counts_to_string(&count_rows(&out.counts)).as_bytes())?;
    write_atomic(&dir.join("report.json"), json(out).as_bytes())?;
    write_atomic(&dir.join("summary.txt"), report::summary(out).as_bytes())?;
    Ok(())
}

fn print_run(out: &RunOutput, format: Format) {
    match format {
        Format::Csv => print!("{}", counts_to_string(&count_rows(&out.counts))),
        Format::Json => print!("{}", json(out)),
        Format::Text => print!("{}", report::summary(out)),
    }
    if format != Format::Text {
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run(a) => {
            let out = run(&a.scenario()?, &a.options())?;
            if let Some(dir) = &a.out {
                write_run(dir, &out)?;
            }
            print_run(&out, a.format);
        }
        Command::Sweep { run: a, parameter, values } => {
            let param: SweepParameter = parameter.parse()?;
            let points = sweep(&a.scenario()?, &param, &values, &a.options())?;
            let table = report::sweep_table(&parameter, &points);
            if let Some(dir) = &a.out {
                let pts = dir.join("points");
                std::fs::create_dir_all(&pts)?;
                for (i, p) in points.iter().enumerate() {
                    write_run(&pts.join(format!("{i:03}")), &p.output)?;
                }
                write_atomic(&dir.join("sweep.csv"), table.as_bytes())?;
            }
            match a.format {
                Format::Json => print!("{}", json(&points)),
                _ => print!("{table}"),
            }
        }
        Command::Validate { circuit, format } => {
            let checks = match circuit {
                Some(p) => {
                    let spec = read_circuit(&p)?;
                    let ideal = lopsim::core::circuit::builtin_ideal(&spec.name)
                        .with_context(|| format!("no ideal operator known for circuit name `{}`", spec.name))?;
                    validate::check_circuit(&spec.name, &spec, &ideal, validate::expected_success(&spec.name))
                }
                None => validate::validate_builtins(),
            };
            match format {
                Format::Json => print!("{}", json(&checks)),
                Format::Csv => {
                    println!("circuit,check,value,status");
                    for c in &checks {
                        println!("{},{},{:e},{:?}", c.circuit, c.check, c.value, c.status);
                    }
                }
                Format::Text => print!("{}", validate::matrix(&checks)),
            }
            return Ok(validate::all_pass(&checks));
        }
        Command::List => {
            for name in BUILTIN_SCENARIOS {
                println!("{name}");
            }
        }
        Command::Tomography { fidelity, counts, shots, seed, out, format } => {
            let shots = match shots {
                Shots::Exact => None,
                Shots::Count(n) => Some(n),
            };
            let (data, rep) = match counts {
                Some(p) => {
                    let f = std::fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                    let data = tomography::dataset_from_rows(&read_counts(f)?)?;
                    let (_, rep) = tomography::analyse(&data)?;
                    (data, rep)
                }
                None => tomography::werner_loop(fidelity, shots, seed)?,
            };
            let rows = tomography::dataset_rows(&data);
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                write_atomic(&dir.join("counts.csv"), counts_to_string(&rows).as_bytes())?;
                write_atomic(&dir.join("tomography.json"), json(&rep).as_bytes())?;
            }
            match format {
                Format::Csv => print!("{}", counts_to_string(&rows)),
                Format::Json => print!("{}", json(&rep)),
                Format::Text => {
                    println!("{:<22}{:.4}", "fidelity (linear)", rep.fidelity_linear);
                    println!("{:<22}{:.4}", "fidelity (ML)", rep.fidelity_ml);
                    println!("{:<22}{:.4}", "concurrence (ML)", rep.concurrence_ml);
                    if let Some(c) = rep.concurrence_model {
                        println!("{:<22}{:.4}", "concurrence (model)", c);
                    }
                }
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
