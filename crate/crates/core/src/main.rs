//! `sim`: runs one experiment from a configuration file.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aerosim::config::parse_config;
use aerosim::experiment::{check_requirements, run_experiment, Experiment};
use aerosim::SimError;

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Cellular-network simulator for low-altitude aerial UEs")]
struct Cli {
    /// dl_cdf, ul_sweep, pc_sweep, partition, los_curve, pathloss_curves,
    /// fragmentation, handover or aerial_id.
    experiment: String,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the configuration and exit without computing.
    #[arg(long)]
    dry_run: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "AEROSIM_WORKERS", default_value_t = 0)]
    workers: usize,
}

fn exit_code(e: &SimError) -> u8 {
    match e.root() {
        SimError::Config { .. } | SimError::Parse { .. } => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), SimError> {
    let exp: Experiment = cli.experiment.parse()?;
    let cfg = parse_config(&cli.config).map_err(|e| match e {
        SimError::Io { .. } => SimError::config("--config", e.to_string()),
        other => other,
    })?;
    check_requirements(&cfg, exp)?;
    if cli.dry_run {
        println!("{exp}: configuration {} is valid", cli.config.display());
        return Ok(());
    }
    let out = match (&cli.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => return Err(SimError::config("output_dir", "give --out or output_dir")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build_global()
        .map_err(|e| SimError::Runtime(format!("worker pool: {e}")))?;
    let rep = run_experiment(&cfg, exp, &out)?;
    for f in &rep.manifest.files {
        println!("{}  {}", f.sha256, out.join(&f.file).display());
    }
    if rep.metadata.seam_flagged {
        eprintln!(
            "warning: pathloss seam at the BS height is {:.2} dB, above the ledger tolerance",
            rep.metadata.altitude_seam_db
        );
    }
    eprintln!("{exp} finished in {:.1} s", rep.metadata.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
