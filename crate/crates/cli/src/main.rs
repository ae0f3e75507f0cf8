//! qtrack: hit-graph construction, hybrid GNN training and circuit
//! descriptors from one reproducible command line.
//!
//! Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical
//! failure. Errors are also emitted as a JSON record on stderr.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "qtrack",
    version,
    about = "Particle track segment classification with hybrid quantum-classical graph networks"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override paths.output_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Override paths.events_dir.
    #[arg(long, global = true)]
    events_dir: Option<PathBuf>,

    /// Override paths.graphs_dir.
    #[arg(long, global = true)]
    graphs_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic events as TrackML-format CSV triplets.
    Generate {
        /// Override generate.n_events.
        #[arg(long)]
        n_events: Option<usize>,
        /// Override generate.tracks_per_event.
        #[arg(long)]
        tracks: Option<usize>,
        /// Override generate.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build labeled hit graphs from events (cuts, labels, diagnostics).
    Preprocess {
        /// Override cuts.dphi_dr_max.
        #[arg(long)]
        dphi_dr_max: Option<f64>,
        /// Override cuts.z0_max_mm.
        #[arg(long)]
        z0_max_mm: Option<f64>,
        /// Override cuts.pt_min_gev.
        #[arg(long)]
        pt_min: Option<f64>,
    },
    /// Expressibility and entanglement-capability sweep over circuits.
    Descriptors {
        /// Override descriptors.n_samples.
        #[arg(long)]
        n_samples: Option<usize>,
        /// Also write the circuit templates as JSON.
        #[arg(long)]
        dump_templates: bool,
    },
    /// Train the edge classifier over all configured seeds.
    Train {
        /// Override model.preset.
        #[arg(long)]
        preset: Option<String>,
        /// Override model.mode (hybrid|classical).
        #[arg(long)]
        mode: Option<String>,
        /// Override model.encoding_axis (x|y|z).
        #[arg(long)]
        encoding_axis: Option<String>,
        /// Override training.epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Grid sweep (embedding | n_layers | n_iterations | hidden_dim).
    Sweep {
        /// Override sweep.axis.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Score graphs with a checkpoint and write metrics plus per-edge scores.
    Evaluate {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Finite-difference gradient verification for all presets.
    Gradcheck {
        /// Initialization seed of the checked models.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn error_kind(err: &anyhow::Error) -> (&'static str, u8) {
    if let Some(core) = err.downcast_ref::<qtrack_core::Error>() {
        use qtrack_core::Error::*;
        return match core {
            NonFinite(_) => ("numerical", 3),
            Io(_) | Csv { .. } | MissingColumn { .. } | DataIntegrity(_) | BadFormat(_)
            | Json(_) => ("data", 2),
            _ => ("usage", 1),
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
    {
        return ("data", 2);
    }
    ("usage", 1)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("thread pool: {}", e))?;
    }

    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.out_dir {
        cfg.paths.output_dir = dir;
    }
    if let Some(dir) = cli.events_dir {
        cfg.paths.events_dir = dir;
    }
    if let Some(dir) = cli.graphs_dir {
        cfg.paths.graphs_dir = dir;
    }

    match cli.command {
        Command::Generate {
            n_events,
            tracks,
            seed,
        } => {
            if let Some(n) = n_events {
                cfg.generate.n_events = n;
            }
            if let Some(t) = tracks {
                cfg.generate.tracks_per_event = t;
            }
            if let Some(s) = seed {
                cfg.generate.seed = s;
            }
            commands::cmd_generate(&cfg)?;
        }
        Command::Preprocess {
            dphi_dr_max,
            z0_max_mm,
            pt_min,
        } => {
            if let Some(v) = dphi_dr_max {
                cfg.cuts.dphi_dr_max = v;
            }
            if let Some(v) = z0_max_mm {
                cfg.cuts.z0_max_mm = v;
            }
            if let Some(v) = pt_min {
                cfg.cuts.pt_min_gev = v;
            }
            commands::cmd_preprocess(&cfg)?;
        }
        Command::Descriptors {
            n_samples,
            dump_templates,
        } => {
            if let Some(n) = n_samples {
                cfg.descriptors.n_samples = n;
            }
            if dump_templates {
                cfg.descriptors.dump_templates = true;
            }
            commands::cmd_descriptors(&cfg)?;
        }
        Command::Train {
            preset,
            mode,
            encoding_axis,
            epochs,
        } => {
            if let Some(p) = preset {
                cfg.model.preset = p;
            }
            if let Some(m) = mode {
                cfg.model.mode = m;
            }
            if let Some(a) = encoding_axis {
                cfg.model.encoding_axis = a;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            commands::cmd_train(&cfg)?;
        }
        Command::Sweep { axis } => {
            if let Some(a) = axis {
                cfg.sweep.axis = a;
            }
            commands::cmd_sweep(&cfg)?;
        }
        Command::Evaluate { checkpoint } => {
            commands::cmd_evaluate(&cfg, &checkpoint)?;
        }
        Command::Gradcheck { seed } => {
            if !commands::cmd_gradcheck(&cfg, seed)? {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "error_kind": "numerical",
                        "message": "gradient check failed; see gradcheck.csv"
                    })
                );
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", err);
                return ExitCode::SUCCESS;
            }
            eprintln!(
                "{}",
                serde_json::json!({"error_kind": "usage", "message": err.to_string()})
            );
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let (kind, code) = error_kind(&err);
            eprintln!(
                "{}",
                serde_json::json!({"error_kind": kind, "message": format!("{:#}", err)})
            );
            ExitCode::from(code)
        }
    }
}
