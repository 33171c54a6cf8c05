use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use starjam::experiments::{run_experiment, validate_config, ExperimentConfig, Scheme, SweepKind};

/// Secrecy-rate experiments for a STAR-RIS-assisted full-duplex jamming receiver.
#[derive(Parser, Debug)]
#[command(name = "starjam", version)]
struct Cli {
    #[command(subcommand)]
    sweep: Sweep,

    /// Sectioned key-value config file; missing keys take the reference defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Comma-separated schemes out of es, ms, woj, wij.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    modes: Option<Vec<Scheme>>,

    /// Channel realizations per sweep point.
    #[arg(long, global = true, value_name = "INT")]
    trials: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Imperfect-CSI error weight for the RIS-Eve channel, in [0, 1].
    #[arg(long, global = true, value_name = "FLOAT")]
    eps: Option<f64>,

    /// Allow RIS sizes above the desk-scale cap.
    #[arg(long, global = true)]
    full_scale: bool,

    /// Worker threads for independent trials.
    #[arg(long, global = true, value_name = "INT")]
    workers: Option<usize>,

    /// Comma-separated sweep values, replacing the config or default list.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sweep {
    /// Per-iteration AO traces at each RIS size.
    Convergence,
    /// Secrecy rate against the number of RIS elements.
    SweepL,
    /// Secrecy rate against the RIS offset from the Bob transmit array (m).
    SweepDistance,
    /// Secrecy rate against the jamming power P_B (dBm).
    SweepPower,
    /// One scenario point.
    Single,
}

impl From<Sweep> for SweepKind {
    fn from(s: Sweep) -> Self {
        match s {
            Sweep::Convergence => SweepKind::Convergence,
            Sweep::SweepL => SweepKind::SweepL,
            Sweep::SweepDistance => SweepKind::SweepDistance,
            Sweep::SweepPower => SweepKind::SweepPower,
            Sweep::Single => SweepKind::Single,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = validate_config(&text).map_err(|e| e.to_string())?;
    let kind = SweepKind::from(cli.sweep);
    if cfg.sweep != kind {
        let was_default = |key: &str| cfg.defaulted.iter().any(|d| d.starts_with(&format!("{key} =")));
        if was_default("sweep_values") {
            cfg.sweep_values = kind.default_values(&cfg.geometry);
        } else if !was_default("sweep") {
            return Err(format!("config sets sweep = \"{}\" but the command is `{}`", cfg.sweep.name(), kind.name()));
        }
        if was_default("modes") {
            cfg.modes = kind.default_schemes();
        }
        cfg.sweep = kind;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(m) = &cli.modes {
        cfg.modes = m.clone();
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.output_path = o.clone();
    }
    if cli.eps.is_some() {
        cfg.imperfect_csi_eps = cli.eps;
    }
    if cli.full_scale {
        cfg.full_scale = true;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(v) = &cli.values {
        cfg.sweep_values = v.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration\n{e}");
            return ExitCode::from(2);
        }
    };
    for d in &cfg.defaulted {
        eprintln!("default: {d}");
    }
    eprintln!(
        "running {} over {} values x {} trials, modes {}",
        cfg.sweep.name(),
        cfg.sweep_values.len(),
        cfg.trials,
        cfg.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
    );
    match run_experiment(&cfg) {
        Ok(out) => {
            for a in &out.aggregates {
                println!("{} = {:<8} {:<4} C = {:.4} ± {:.4} bps/Hz", cfg.sweep.coordinate(), a.coordinate, a.mode, a.secrecy_mean, a.secrecy_std);
            }
            println!("wrote {}", cfg.output_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
