use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uavchan::config::RunConfig;
use uavchan::run::{replay, run, Command, Which};

/// Generative mmWave UAV channel model: data, training, evaluation and SNR maps.
#[derive(Parser)]
#[command(name = "uavchan", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory for all outputs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw an oracle city and its train/test split.
    Datagen {
        #[command(flatten)]
        common: Common,
    },
    /// Train the link-state classifier and the path VAE.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Sample path sets for the conditions in a CSV file.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV with gnb_type, dx_m, dy_m, dz_m columns (a dataset file works).
        #[arg(long)]
        data: PathBuf,
    },
    /// Refit the 3GPP LOS-probability or path-loss formulas.
    #[command(name = "fit-3gpp")]
    Fit3gpp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Compare a model, or fitted 3GPP parameters, against test data.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with_all = ["gpp_plos", "gpp_pathloss"])]
        model: Option<PathBuf>,
        #[arg(long)]
        gpp_plos: Option<PathBuf>,
        #[arg(long)]
        gpp_pathloss: Option<PathBuf>,
    },
    /// Median SNR over a vertical slice around a gNB.
    SnrMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Re-run a recorded manifest and check its outputs are unchanged.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, short)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> uavchan::Result<()> {
    let (common, command) = match Cli::parse().command {
        Cmd::Replay { manifest, out, quiet } => {
            let mut log = logger(quiet);
            let m = replay(&manifest, &out, &mut log)?;
            log(&format!("replayed {} outputs identically", m.outputs.len()));
            return Ok(());
        }
        Cmd::Datagen { common } => (common, Command::Datagen),
        Cmd::Train { common, data } => (common, Command::Train { data }),
        Cmd::Generate { common, model, data } => (common, Command::Generate { model, data }),
        Cmd::Fit3gpp { common, data, which } => (common, Command::Fit3gpp { data, which }),
        Cmd::Eval {
            common,
            data,
            model,
            gpp_plos,
            gpp_pathloss,
        } => (
            common,
            Command::Eval {
                data,
                model,
                gpp_plos,
                gpp_pathloss,
            },
        ),
        Cmd::SnrMap { common, model } => (common, Command::SnrMap { model }),
    };
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let mut log = logger(common.quiet);
    let m = run(&command, &cfg, &common.out, &mut log)?;
    for o in &m.outputs {
        log(&format!("wrote {}", common.out.join(&o.path).display()));
    }
    Ok(())
}

fn logger(quiet: bool) -> impl FnMut(&str) {
    move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    }
}
