use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmf_core::report::{
    run_outage_sweep, run_selection_sweep, snr_grid, write_outage_csv, write_selection_csv, SweepSpec,
};
use cmf_core::search::{build_gmin_table, DEFAULT_TABLE_CAP};
use cmf_core::sim::{Strategy, DEFAULT_TARGET_RATE, DEFAULT_TRIALS};
use cmf_core::{CmfError, Execution};

const DEFAULT_SEED: u64 = 20_130_611;
const CEE_SWEEP: [f64; 4] = [0.0, 0.01, 0.05, 0.1];

#[derive(Parser, Debug)]
#[command(
    name = "cmf",
    version,
    about = "Compute-and-forward ECV selection experiments"
)]
struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate gmin^2 for every ECV up to a cap.
    GminTable {
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-ECV selection probabilities versus SNR.
    SelectionProb(SweepArgs),
    /// System outage, relay outage and rank failure versus SNR.
    Outage(SweepArgs),
    /// Outage versus SNR under channel-estimation error.
    Cee(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// gmin table up to 2200.
    Table1,
    /// Optimum-selection histogram, M = 2.
    Fig2,
    /// CMF(3) and CMF(5) rank failure, M = 2 and 6.
    Fig3,
    /// Optimum, CMF(3) and CMF(5) outage, M = 2 and 6.
    Fig4,
    /// CMF(5) outage and rank failure, M = 2 and 6.
    Fig5,
    /// Optimum and CMF(5) under estimation error, M = 6.
    Fig6,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    preset: Option<Preset>,
    /// First SNR point in dB [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    snr_start: Option<f64>,
    /// Last SNR point in dB, inclusive [default: 20].
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<f64>,
    /// SNR step in dB [default: 2].
    #[arg(long)]
    snr_step: Option<f64>,
    /// Number of relays; repeat for several.
    #[arg(long = "relays")]
    relays: Vec<u32>,
    /// CMF(K) candidate count; repeat for several.
    #[arg(long = "k")]
    k: Vec<usize>,
    /// Include the optimum strategy.
    #[arg(long)]
    optimal: bool,
    /// Target rate R_t [default: 0.5].
    #[arg(long)]
    target_rate: Option<f64>,
    /// Monte Carlo trials per point [default: 1000000].
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed [default: 20130611].
    #[arg(long)]
    seed: Option<u64>,
    /// Channel-estimation error variance; repeat for several.
    #[arg(long = "cee-var")]
    cee_var: Vec<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<CmfError> for Failure {
    fn from(e: CmfError) -> Self {
        let msg = e.to_string();
        match e {
            CmfError::Io(_) | CmfError::Csv(_) => Failure::Io(msg),
            CmfError::InvalidConfig(_) | CmfError::InvalidPower(..) | CmfError::InvalidCandidateSet(_) => {
                Failure::Usage(msg)
            }
            _ => Failure::Numeric(msg),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Per-command values used when the matching flag is absent.
struct Defaults {
    relays: Vec<u32>,
    k: Vec<usize>,
    optimal: bool,
    cee: Vec<f64>,
}

fn defaults(command: &str, preset: Option<Preset>) -> Result<Defaults, Failure> {
    let d = |relays: &[u32], k: &[usize], optimal, cee: &[f64]| Defaults {
        relays: relays.to_vec(),
        k: k.to_vec(),
        optimal,
        cee: cee.to_vec(),
    };
    Ok(match preset {
        Some(Preset::Table1) => {
            return Err(Failure::Usage("preset table1 only applies to gmin-table".into()))
        }
        Some(Preset::Fig2) => d(&[2], &[], true, &[0.0]),
        Some(Preset::Fig3) => d(&[2, 6], &[3, 5], false, &[0.0]),
        Some(Preset::Fig4) => d(&[2, 6], &[3, 5], true, &[0.0]),
        Some(Preset::Fig5) => d(&[2, 6], &[5], false, &[0.0]),
        Some(Preset::Fig6) => d(&[6], &[5], true, &CEE_SWEEP),
        None => match command {
            "selection-prob" => d(&[2], &[], true, &[0.0]),
            "cee" => d(&[6], &[5], true, &CEE_SWEEP),
            _ => d(&[2, 6], &[3, 5], true, &[0.0]),
        },
    })
}

fn resolve(command: &str, a: &SweepArgs) -> Result<SweepSpec, Failure> {
    let base = defaults(command, a.preset)?;
    let snr_db = snr_grid(
        a.snr_start.unwrap_or(0.0),
        a.snr_stop.unwrap_or(20.0),
        a.snr_step.unwrap_or(2.0),
    )?;
    let (k, optimal) = if a.k.is_empty() && !a.optimal {
        (base.k, base.optimal)
    } else {
        (a.k.clone(), a.optimal)
    };
    let mut strategies: Vec<Strategy> = k.into_iter().map(Strategy::Simplified).collect();
    if optimal {
        strategies.push(Strategy::Optimal);
    }
    let spec = SweepSpec {
        snr_db,
        relays: if a.relays.is_empty() {
            base.relays
        } else {
            a.relays.clone()
        },
        strategies,
        target_rate: a.target_rate.unwrap_or(DEFAULT_TARGET_RATE),
        trials: a.trials.unwrap_or(DEFAULT_TRIALS),
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        cee_sigma_sq: if a.cee_var.is_empty() {
            base.cee
        } else {
            a.cee_var.clone()
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Writes via a temporary file in the destination directory and renames it
/// into place, so a failed run never leaves a partial file behind.
fn emit(out: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    match out {
        None => {
            io::stdout().write_all(body)?;
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(body)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| Failure::Io(e.error.to_string()))?;
            Ok(())
        }
    }
}

fn report(rows: usize, out: Option<&Path>) {
    match out {
        Some(p) => println!("wrote {rows} rows to {}", p.display()),
        None => eprintln!("wrote {rows} rows"),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let exec = Execution::Parallel;
    match cli.command {
        Command::GminTable { cap, preset, out } => {
            if preset.is_some_and(|p| p != Preset::Table1) {
                return Err(Failure::Usage("gmin-table only accepts --preset table1".into()));
            }
            let cap = cap.unwrap_or(DEFAULT_TABLE_CAP);
            if !cap.is_finite() || cap <= 0.0 {
                return Err(Failure::Usage(format!("--cap must be positive, got {cap}")));
            }
            let table = build_gmin_table(cap)?;
            let mut body = format!("# command=gmin-table\n# cap={cap}\n").into_bytes();
            table.write_csv(&mut body)?;
            emit(out.as_deref(), &body)?;
            report(table.len(), out.as_deref());
        }
        Command::SelectionProb(args) => {
            let spec = resolve("selection-prob", &args)?;
            let rows = run_selection_sweep(&spec, exec)?;
            let mut body = Vec::new();
            write_selection_csv(&mut body, &spec, &rows)?;
            emit(args.out.as_deref(), &body)?;
            report(rows.len(), args.out.as_deref());
        }
        Command::Outage(args) => outage("outage", &args, exec)?,
        Command::Cee(args) => outage("cee", &args, exec)?,
    }
    Ok(())
}

fn outage(command: &str, args: &SweepArgs, exec: Execution) -> Result<(), Failure> {
    let spec = resolve(command, args)?;
    let rows = run_outage_sweep(&spec, exec)?;
    let mut body = Vec::new();
    write_outage_csv(&mut body, &spec, command, &rows)?;
    emit(args.out.as_deref(), &body)?;
    report(rows.len(), args.out.as_deref());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Numeric(m) | Failure::Io(m)) = &f;
            eprintln!("error: {m}");
            if matches!(f, Failure::Usage(_)) {
                eprintln!("run `cmf --help` for usage");
            }
            ExitCode::from(f.code())
        }
    }
}
