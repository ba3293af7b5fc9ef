use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use grf_risk::pipeline::{self, CityParams, PipelineConfig, RegionsParams};

#[derive(Parser, Debug)]
#[command(
    name = "grf-risk",
    version,
    about = "Geographical random forest risk mapping for geolocated events"
)]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Overrides the split and forest seeds (or the synth seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Buffer-aggregate layer features around every event.
    Featurize,
    /// Mann-Whitney U and VIF per feature, then apply the selection rule.
    Select {
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Fit the model on the training split and score the test split.
    Train {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Evaluate a list of localization weights on one fitted model.
    Sweep {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated weights in [0, 1]; defaults to the config list.
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
    },
    /// Predict risk over a grid covering the study area.
    Riskmap {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Global feature importances, with direction from a risk grid CSV.
    Importance {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        risk: Option<PathBuf>,
    },
    /// Run featurize, select, train, riskmap and importance in order.
    Run,
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_enum, default_value_t = Scenario::City)]
        scenario: Scenario,
        /// Number of events.
        #[arg(long)]
        n: Option<usize>,
        /// Share of high-severity events.
        #[arg(long)]
        minority_fraction: Option<f64>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scenario {
    /// Disc regions with sign-flipping feature effects; writes a feature table.
    Regions,
    /// Layers, events, boundary and config for a full pipeline run.
    City,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&cli.config)
        .with_context(|| format!("loading config {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.split_seed = seed;
        config.grf.forest_params.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = std::path::absolute(out)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Synth {
        scenario,
        n,
        minority_fraction,
    } = &cli.command
    {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let seed = cli.seed.unwrap_or(0);
        match scenario {
            Scenario::Regions => {
                let mut p = RegionsParams::default();
                p.n = n.unwrap_or(p.n);
                p.minority_fraction = minority_fraction.unwrap_or(p.minority_fraction);
                let data = pipeline::write_regions(&dir, &p, seed)?;
                println!("wrote {} rows to {}", data.table.len(), dir.display());
            }
            Scenario::City => {
                let mut p = CityParams::default();
                p.n_events = n.unwrap_or(p.n_events);
                p.minority_fraction = minority_fraction.unwrap_or(p.minority_fraction);
                let files = pipeline::write_city(&dir, &p, seed)?;
                println!(
                    "wrote {} events; config {}",
                    files.events.len(),
                    files.config_path.display()
                );
            }
        }
        return Ok(());
    }

    let config = load_config(&cli)?;
    match cli.command {
        Command::Featurize => {
            let t = pipeline::cmd_featurize(&config)?;
            println!("{} events × {} features", t.len(), t.feature_names.len());
        }
        Command::Select { table } => {
            let r = pipeline::cmd_select(&config, table.as_deref())?;
            println!(
                "{} of {} features selected",
                r.selected_names().len(),
                r.rows.len()
            );
        }
        Command::Train { table, manifest } => {
            let r = pipeline::cmd_train(&config, table.as_deref(), manifest.as_deref())?;
            let m = r.evaluation.metrics;
            let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
            println!(
                "accuracy {} precision {} recall {}",
                f(m.accuracy),
                f(m.precision),
                f(m.recall)
            );
        }
        Command::Sweep { table, manifest, a } => {
            let a = (!a.is_empty()).then_some(a);
            let rows =
                pipeline::cmd_sweep(&config, table.as_deref(), manifest.as_deref(), a.as_deref())?;
            for r in rows {
                println!(
                    "a={:.2} accuracy={} recall={} {}",
                    r.a,
                    r.accuracy.map_or("NA".into(), |x| format!("{x:.3}")),
                    r.recall.map_or("NA".into(), |x| format!("{x:.3}")),
                    r.remarks
                );
            }
        }
        Command::Riskmap { model } => {
            let map = pipeline::cmd_riskmap(&config, model.as_deref())?;
            println!("{} cells", map.grid.cells.len());
        }
        Command::Importance { model, risk } => {
            let rows = pipeline::cmd_importance(&config, model.as_deref(), risk.as_deref())?;
            for r in rows.iter().take(10) {
                println!("{:<24} {:.4}", r.feature, r.importance);
            }
        }
        Command::Run => {
            let a = pipeline::run_all(&config)?;
            for f in a.files {
                println!("{}", f.display());
            }
        }
        Command::Synth { .. } => bail!("unreachable"),
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
