//! `hqclass` command-line runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hqclass::data::BOX_HALF_WIDTH;
use hqclass::exec::with_jobs;
use hqclass::experiment::{
    self, grid_stem, prepare_split, run_cell, test_roc, write_grid, ExperimentConfig, ExperimentReport, ResultRow,
    RunOptions, TrainedModel,
};
use hqclass::metrics::prediction_grid;
use hqclass::model::HybridModel;
use hqclass::{Error, Execution};

#[derive(Parser)]
#[command(name = "hqclass", version, about = "Hybrid quantum-classical classifier benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Write measured seconds into results.csv (reruns then differ byte-wise).
    #[arg(long)]
    wall_time: bool,
    /// No per-cell progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train/test CSVs for every noise level and seed.
    GenData(Common),
    /// Train one model on one split; saves results, epochs, ROC curve and the model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model label from the config; the first model when omitted.
        #[arg(long)]
        model: Option<String>,
        /// Noise level; the first grid entry when omitted.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Every model at every noise level and seed.
    SweepNoise(Common),
    /// DRC / VC-DRC at every block count, noise level and seed.
    SweepBlocks(Common),
    /// Prediction grids, either for a saved model or for a whole sweep.
    Grids {
        #[command(flatten)]
        common: Common,
        /// Saved model (JSON written by `train`).
        #[arg(long, conflicts_with = "config")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Third coordinate for 3-input models.
        #[arg(long)]
        slice: Option<f64>,
    },
    /// Noise sweeps on every shape plus the block sweep.
    BenchAll(Common),
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn progress(row: &ResultRow) {
    eprintln!(
        "done {:<12} {} sigma={} seed={} B={} L={} auc={:.4} ({:.1}s)",
        row.model, row.shape, row.noise_sigma, row.seed, row.blocks, row.layers, row.best_auc, row.wall_time_s
    );
}

fn options(common: &Common) -> RunOptions<'static> {
    RunOptions {
        exec: common.exec(),
        wall_time: common.wall_time,
        progress: if common.quiet { None } else { Some(&progress) },
    }
}

fn wrote(dir: &Path) {
    eprintln!("wrote {}", dir.display());
}

fn train_one(common: &Common, model: Option<&str>, noise: Option<f64>) -> Result<()> {
    let cfg = common.load()?;
    let entry = match model {
        Some(label) => cfg
            .models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::Config {
                line: 1,
                message: format!("no model labelled '{label}' in the config"),
            })?,
        None => &cfg.models[0],
    };
    let sigma = noise.unwrap_or(cfg.dataset.noise_grid[0]);
    if !(sigma >= 0.0 && sigma.is_finite()) {
        bail!(Error::Config {
            line: 1,
            message: format!("noise must be finite and >= 0, got {sigma}"),
        });
    }
    let seed = cfg.seeds[0];
    let exec = common.exec();
    let split = prepare_split(&cfg, cfg.dataset.shape, sigma, seed)?;
    let (cell, trained) = run_cell(&cfg, entry, sigma, seed, &split, exec, cfg.grid.enabled)?;
    if !common.quiet {
        progress(&cell.row);
    }
    let dir = &cfg.output_dir;
    let roc = test_roc(&trained, &split.1, exec)?;
    let report = ExperimentReport { cells: vec![cell] };
    report.write(&cfg, dir, common.wall_time)?;
    roc.write_csv(&dir.join(format!("roc_{}.csv", entry.label)))?;
    if let TrainedModel::Hybrid(m) = &trained {
        m.save(&dir.join(format!("model_{}.json", entry.label)))?;
    }
    wrote(dir);
    Ok(())
}

fn grids_for_model(common: &Common, path: &Path, resolution: usize, slice: Option<f64>) -> Result<()> {
    let model = HybridModel::load(path)?;
    let dim = model.spec().input_dim;
    let slice = match (dim, slice) {
        (3, None) => Some(0.0),
        (3, s) => s,
        _ => None,
    };
    let bounds = [(-BOX_HALF_WIDTH, BOX_HALF_WIDTH); 2];
    let grid = prediction_grid(&model, bounds, resolution, slice, common.exec())?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    write_grid(&grid, &dir, &format!("grid_{stem}"))?;
    wrote(&dir);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = common.load()?;
            let paths = with_jobs(common.jobs, || experiment::write_datasets(&cfg, &cfg.output_dir, common.exec()))??;
            eprintln!("wrote {} files to {}", paths.len(), cfg.output_dir.display());
        }
        Command::Train { common, model, noise } => {
            with_jobs(common.jobs, || train_one(&common, model.as_deref(), noise))??;
        }
        Command::SweepNoise(common) => {
            let cfg = common.load()?;
            let report = with_jobs(common.jobs, || experiment::run_sweep(&cfg, &options(&common)))??;
            report.write(&cfg, &cfg.output_dir, common.wall_time)?;
            wrote(&cfg.output_dir);
        }
        Command::SweepBlocks(common) => {
            let cfg = common.load()?;
            let report = with_jobs(common.jobs, || experiment::run_block_sweep(&cfg, &options(&common)))??;
            report.write(&cfg, &cfg.output_dir, common.wall_time)?;
            wrote(&cfg.output_dir);
        }
        Command::Grids {
            common,
            model,
            resolution,
            slice,
        } => match model {
            Some(path) => with_jobs(common.jobs, || grids_for_model(&common, &path, resolution, slice))??,
            None => {
                let mut cfg = common.load()?;
                cfg.grid.enabled = true;
                let report = with_jobs(common.jobs, || experiment::run_sweep(&cfg, &options(&common)))??;
                std::fs::create_dir_all(&cfg.output_dir)
                    .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
                for c in &report.cells {
                    if let Some(g) = &c.grid {
                        write_grid(g, &cfg.output_dir, &grid_stem(&c.row.model, c.row.shape, c.row.noise_sigma, c.row.seed))?;
                    }
                }
                wrote(&cfg.output_dir);
            }
        },
        Command::BenchAll(common) => {
            let cfg = common.load()?;
            let report = with_jobs(common.jobs, || experiment::bench_all(&cfg, &options(&common)))??;
            report.write(&cfg, &cfg.output_dir, common.wall_time)?;
            wrote(&cfg.output_dir);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
